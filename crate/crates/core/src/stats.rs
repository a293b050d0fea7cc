//! Sample summaries for Monte Carlo estimates.

use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean; zero for fewer than two samples.
    pub stderr: f64,
    pub count: usize,
}

pub fn summarize(samples: &[f64]) -> Summary {
    let count = samples.len();
    if count == 0 {
        return Summary::default();
    }
    let n = count as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let stderr = if count > 1 {
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Summary { mean, stderr, count }
}

/// Run `f` on a pool of `workers` threads (`None` uses the global pool).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
