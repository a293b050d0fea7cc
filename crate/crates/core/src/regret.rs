//! Regret of the online policy against the hindsight optimum.
//!
//! Each trial samples one path and scores both policies on it (common random
//! numbers): the offline solver on the full path and the online run stage by
//! stage, both in adjusted utility.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::offline::solve_offline_single;
use crate::online::{run_online_on_path, OnlineConfig, OnlineParams, Regularizer};
use crate::real::Real;
use crate::scenario::{trial_seed, PathSampler, Scenario, StageRealization};
use crate::stats::{summarize, with_workers, Summary};

/// Hindsight optimum minus online total on one path.
pub fn path_regret<T: Real>(path: &[StageRealization<T>], params: &OnlineParams<T>) -> Result<T> {
    let offline = solve_offline_single(path, params.budget, params.cap)?;
    let online = run_online_on_path(path, params)?;
    Ok(offline.adjusted_objective - online.total_adjusted)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretEstimate {
    pub horizon: usize,
    pub alpha: f64,
    pub regret: Summary,
    /// `regret / K` summary.
    pub average: Summary,
    pub bound: Option<f64>,
    pub per_trial: Vec<f64>,
}

/// Monte Carlo regret over `trials` paths seeded from `base_seed`.
pub fn estimate_regret<T: Real>(
    sc: &Scenario<T>,
    trials: usize,
    base_seed: u64,
    config: &OnlineConfig,
    workers: Option<usize>,
) -> Result<RegretEstimate> {
    if sc.m() != 1 {
        return Err(Error::Dimension(format!("regret needs one influencer, scenario has {}", sc.m())));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let params = OnlineParams::for_scenario(sc, config)?;
    let sampler = PathSampler::new(sc);
    let per_trial: Vec<f64> = with_workers(workers, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| path_regret(&sampler.path(trial_seed(base_seed, t)), &params).map(|r| r.as_f64()))
            .collect::<Result<Vec<_>>>()
    })?;
    let k = sc.horizon() as f64;
    let averaged: Vec<f64> = per_trial.iter().map(|r| r / k).collect();
    let bound = if config.regularizer == Regularizer::Entropy {
        theorem1_bound(sc, sc.horizon()).ok().map(|b| b.as_f64())
    } else {
        None
    };
    Ok(RegretEstimate {
        horizon: sc.horizon(),
        alpha: params.alpha().as_f64(),
        regret: summarize(&per_trial),
        average: summarize(&averaged),
        bound,
        per_trial,
    })
}

/// Regret at each horizon with `B = αK`. Trials share seeds across horizons, so
/// shorter runs see prefixes of the longer paths.
pub fn regret_curve<T: Real>(
    sc: &Scenario<T>,
    horizons: &[usize],
    alpha: T,
    trials: usize,
    base_seed: u64,
    config: &OnlineConfig,
    workers: Option<usize>,
) -> Result<Vec<RegretEstimate>> {
    horizons
        .iter()
        .map(|&k| estimate_regret(&sc.with_average_budgets(k, &[alpha])?, trials, base_seed, config, workers))
        .collect()
}

/// Regret bound for entropy updates started at `θ₀ = e^{−1}`:
/// `ū b̄/α + 2√K √((2/σ₁)(n b̄² + α²/n)(n e^{−1} + ū(log(ū/α + 1) + 1)/α))`.
pub fn regret_bound<T: Real>(n: usize, cap: T, alpha: T, u_bar: T, horizon: usize) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter("the regret bound needs a positive average budget".into()));
    }
    let nf = T::from_usize(n).unwrap();
    let k = T::from_usize(horizon).unwrap();
    let two = T::lit(2.0);
    let (s1, _) = Regularizer::Entropy.sigmas(u_bar / alpha + T::one());
    let a = two / s1 * (nf * cap * cap + alpha * alpha / nf);
    let b = nf * T::lit((-1.0f64).exp()) + u_bar * ((u_bar / alpha + T::one()).ln() + T::one()) / alpha;
    Ok(u_bar * cap / alpha + two * k.sqrt() * (a * b).sqrt())
}

/// [`regret_bound`] for a single-influencer scenario run over `horizon` stages
/// at the scenario's average budget.
pub fn theorem1_bound<T: Real>(sc: &Scenario<T>, horizon: usize) -> Result<T> {
    regret_bound(sc.n(), sc.caps()[0], sc.average_budgets()[0], sc.max_stage_weight(), horizon)
}
