//! Finite opinion and duration distributions, validated scenarios, and
//! reproducible sampling of campaign paths.

mod config;
mod sampling;

pub use config::{
    load_scenario, parse_scenario, Completion, DurationsDoc, NetworkDoc, Num, OpinionsDoc,
    RowDistributionDoc, ScenarioDoc,
};
pub use sampling::{sample_path, trial_seed, PathSampler, StageRealization};

use serde::Serialize;

use crate::dynamics::{de_groot_weights, opinion_problems, CampaignWeights, Network, OpinionMatrix};
use crate::error::{Error, Result};
use crate::real::Real;

/// Distribution over one individual's opinion row.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct RowDistribution<T> {
    pub rows: Vec<Vec<T>>,
    pub probs: Vec<T>,
}

/// Finite distribution over opinion matrices.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "snake_case")]
pub enum OpinionDistribution<T> {
    /// Explicit atoms `x^r` with probabilities `p_r`.
    Explicit {
        support: Vec<OpinionMatrix<T>>,
        probs: Vec<T>,
    },
    /// Individuals draw their rows independently; `marginals[i]` is individual `i`'s law.
    Product { marginals: Vec<RowDistribution<T>> },
}

impl<T: Real> OpinionDistribution<T> {
    pub fn n(&self) -> usize {
        match self {
            Self::Explicit { support, .. } => support.first().map_or(0, OpinionMatrix::n),
            Self::Product { marginals } => marginals.len(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Explicit { support, .. } => support.first().map_or(0, OpinionMatrix::m),
            Self::Product { marginals } => marginals
                .first()
                .and_then(|d| d.rows.first())
                .map_or(0, Vec::len),
        }
    }

    /// Always-the-same opinion matrix.
    pub fn degenerate(x: OpinionMatrix<T>) -> Self {
        Self::Explicit {
            support: vec![x],
            probs: vec![T::one()],
        }
    }

    /// Law of the opinions about influencer `j` alone, for a single-influencer view.
    pub fn column(&self, j: usize) -> Self {
        match self {
            Self::Explicit { support, probs } => Self::Explicit {
                support: support
                    .iter()
                    .map(|x| OpinionMatrix::single(x.column(j)).expect("column of a valid matrix"))
                    .collect(),
                probs: probs.clone(),
            },
            Self::Product { marginals } => Self::Product {
                marginals: marginals
                    .iter()
                    .map(|d| RowDistribution {
                        rows: d.rows.iter().map(|r| vec![r[j]]).collect(),
                        probs: d.probs.clone(),
                    })
                    .collect(),
            },
        }
    }

    fn problems(&self, out: &mut Vec<String>) {
        match self {
            Self::Explicit { support, probs } => {
                if support.is_empty() {
                    out.push("opinions.support: empty".into());
                }
                if support.len() != probs.len() {
                    out.push(format!(
                        "opinions.probs: {} probabilities for {} atoms",
                        probs.len(),
                        support.len()
                    ));
                }
                let (n, m) = (self.n(), self.m());
                for (r, x) in support.iter().enumerate() {
                    if x.n() != n || x.m() != m {
                        out.push(format!("opinions.support[{r}]: shape {}x{}, expected {n}x{m}", x.n(), x.m()));
                    }
                }
                pmf_problems("opinions.probs", probs, out);
            }
            Self::Product { marginals } => {
                if marginals.is_empty() {
                    out.push("opinions.marginals: empty".into());
                }
                let m = self.m();
                for (i, d) in marginals.iter().enumerate() {
                    let path = format!("opinions.marginals[{i}]");
                    if d.rows.is_empty() {
                        out.push(format!("{path}.rows: empty"));
                    }
                    if d.rows.len() != d.probs.len() {
                        out.push(format!("{path}.probs: {} probabilities for {} rows", d.probs.len(), d.rows.len()));
                    }
                    for (r, row) in d.rows.iter().enumerate() {
                        if row.len() != m {
                            out.push(format!("{path}.rows[{r}]: {} entries, expected {m}", row.len()));
                            continue;
                        }
                        for p in opinion_problems(std::slice::from_ref(row)) {
                            out.push(format!("{path}.rows[{r}]: {}", p.trim_start_matches("row 0 ")));
                        }
                    }
                    pmf_problems(&format!("{path}.probs"), &d.probs, out);
                }
            }
        }
    }

    fn cast<U: Real>(&self) -> OpinionDistribution<U> {
        let cv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        match self {
            Self::Explicit { support, probs } => OpinionDistribution::Explicit {
                support: support.iter().map(OpinionMatrix::cast).collect(),
                probs: cv(probs),
            },
            Self::Product { marginals } => OpinionDistribution::Product {
                marginals: marginals
                    .iter()
                    .map(|d| RowDistribution {
                        rows: d.rows.iter().map(|r| cv(r)).collect(),
                        probs: cv(&d.probs),
                    })
                    .collect(),
            },
        }
    }
}

/// Finite distribution over campaign durations.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DurationDistribution<T> {
    pub values: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Real> DurationDistribution<T> {
    pub fn degenerate(value: T) -> Self {
        Self {
            values: vec![value],
            probs: vec![T::one()],
        }
    }

    pub fn uniform(values: Vec<T>) -> Self {
        let p = T::one() / T::from_usize(values.len()).unwrap();
        let probs = vec![p; values.len()];
        Self { values, probs }
    }

    fn problems(&self, out: &mut Vec<String>) {
        if self.values.is_empty() {
            out.push("durations.values: empty".into());
        }
        if self.values.len() != self.probs.len() {
            out.push(format!(
                "durations.probs: {} probabilities for {} values",
                self.probs.len(),
                self.values.len()
            ));
        }
        for (l, &v) in self.values.iter().enumerate() {
            if !(v.is_finite() && v > T::zero()) {
                out.push(format!("durations.values[{l}]: {v} is not a positive duration"));
            }
        }
        pmf_problems("durations.probs", &self.probs, out);
    }
}

fn pmf_problems<T: Real>(path: &str, probs: &[T], out: &mut Vec<String>) {
    for (r, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < T::zero() {
            out.push(format!("{path}[{r}]: {p} is not a probability"));
        }
    }
    let total: T = probs.iter().copied().sum();
    if (total - T::one()).abs() > T::structural_tol() {
        out.push(format!("{path}: sums to {total}, expected 1"));
    }
}

/// A complete, validated game instance.
#[derive(Clone, Debug)]
pub struct Scenario<T: Real> {
    pub name: String,
    network: Network<T>,
    opinions: OpinionDistribution<T>,
    durations: DurationDistribution<T>,
    /// `ρ(τ)` for every duration atom, aligned with `durations.values`.
    duration_weights: Vec<CampaignWeights<T>>,
    horizon: usize,
    budgets: Vec<T>,
    caps: Vec<T>,
    seed: u64,
}

impl<T: Real> Scenario<T> {
    /// Validates every constraint and reports all violations at once.
    pub fn new(
        network: Network<T>,
        opinions: OpinionDistribution<T>,
        durations: DurationDistribution<T>,
        horizon: usize,
        budgets: Vec<T>,
        caps: Vec<T>,
        seed: u64,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        opinions.problems(&mut problems);
        durations.problems(&mut problems);
        if opinions.n() != network.n() {
            problems.push(format!(
                "opinions: {} individuals but the network has {}",
                opinions.n(),
                network.n()
            ));
        }
        scalar_problems(network.n(), opinions.m(), horizon, &budgets, &caps, &mut problems);
        if !problems.is_empty() {
            return Err(Error::InvalidScenario(problems));
        }
        let duration_weights = durations
            .values
            .iter()
            .map(|&tau| de_groot_weights(&network, tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: String::new(),
            network,
            opinions,
            durations,
            duration_weights,
            horizon,
            budgets,
            caps,
            seed,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn opinions(&self) -> &OpinionDistribution<T> {
        &self.opinions
    }

    pub fn durations(&self) -> &DurationDistribution<T> {
        &self.durations
    }

    /// Campaign weights for each duration atom.
    pub fn duration_weights(&self) -> &[CampaignWeights<T>] {
        &self.duration_weights
    }

    /// Individuals.
    pub fn n(&self) -> usize {
        self.network.n()
    }

    /// Influencers.
    pub fn m(&self) -> usize {
        self.caps.len()
    }

    /// Number of campaigns `K`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn budgets(&self) -> &[T] {
        &self.budgets
    }

    pub fn caps(&self) -> &[T] {
        &self.caps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Average per-campaign budgets `α_j = B_j / K`.
    pub fn average_budgets(&self) -> Vec<T> {
        let k = T::from_usize(self.horizon).unwrap();
        self.budgets.iter().map(|&b| b / k).collect()
    }

    /// Largest stage total `max_τ Σ_i ρ_i(τ)` over the duration support.
    pub fn max_stage_weight(&self) -> T {
        self.duration_weights
            .iter()
            .map(CampaignWeights::total)
            .fold(T::zero(), T::max)
    }

    /// Same scenario with a different horizon; budgets are kept as totals.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        self.rebuilt(horizon, self.budgets.clone(), self.caps.clone())
    }

    pub fn with_budgets(&self, budgets: Vec<T>) -> Result<Self> {
        self.rebuilt(self.horizon, budgets, self.caps.clone())
    }

    /// Horizon `K` with budgets `B_j = α_j K`.
    pub fn with_average_budgets(&self, horizon: usize, alphas: &[T]) -> Result<Self> {
        let k = T::from_usize(horizon).unwrap();
        self.rebuilt(horizon, alphas.iter().map(|&a| a * k).collect(), self.caps.clone())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The single-influencer problem faced by influencer `j` when everyone else is absent.
    pub fn influencer_view(&self, j: usize) -> Result<Self> {
        if j >= self.m() {
            return Err(Error::IndexOutOfRange {
                what: "influencers",
                index: j,
                len: self.m(),
            });
        }
        let mut sc = Self::new(
            self.network.clone(),
            self.opinions.column(j),
            self.durations.clone(),
            self.horizon,
            vec![self.budgets[j]],
            vec![self.caps[j]],
            self.seed,
        )?;
        sc.name = format!("{}[{j}]", self.name);
        Ok(sc)
    }

    fn rebuilt(&self, horizon: usize, budgets: Vec<T>, caps: Vec<T>) -> Result<Self> {
        let mut problems = Vec::new();
        scalar_problems(self.n(), self.opinions.m(), horizon, &budgets, &caps, &mut problems);
        if !problems.is_empty() {
            return Err(Error::InvalidScenario(problems));
        }
        Ok(Self {
            horizon,
            budgets,
            caps,
            ..self.clone()
        })
    }

    pub fn cast<U: Real>(&self) -> Result<Scenario<U>> {
        let cv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        let sc = Scenario::new(
            self.network.cast(),
            self.opinions.cast(),
            DurationDistribution {
                values: cv(&self.durations.values),
                probs: cv(&self.durations.probs),
            },
            self.horizon,
            cv(&self.budgets),
            cv(&self.caps),
            self.seed,
        )?;
        Ok(sc.with_name(self.name.clone()))
    }
}

fn scalar_problems<T: Real>(
    n: usize,
    opinion_m: usize,
    horizon: usize,
    budgets: &[T],
    caps: &[T],
    out: &mut Vec<String>,
) {
    let m = caps.len();
    if m == 0 {
        out.push("caps: at least one influencer is required".into());
    }
    if opinion_m != m {
        out.push(format!("opinions: rows have {opinion_m} entries but there are {m} influencers"));
    }
    if budgets.len() != m {
        out.push(format!("budgets: {} entries for {m} influencers", budgets.len()));
    }
    if horizon == 0 {
        out.push("horizon: must be at least 1".into());
    }
    for (j, &c) in caps.iter().enumerate() {
        if !(c.is_finite() && c > T::zero()) {
            out.push(format!("caps[{j}]: {c} must be positive"));
        }
    }
    let pool = T::from_usize(n * horizon).unwrap();
    for (j, &b) in budgets.iter().enumerate() {
        if !b.is_finite() || b < T::zero() {
            out.push(format!("budgets[{j}]: {b} must be a non-negative finite number"));
        } else if let Some(&c) = caps.get(j) {
            let capacity = pool * c;
            if b > capacity * (T::one() + T::structural_tol()) {
                out.push(format!(
                    "budgets[{j}]: {b} exceeds n*K*cap = {capacity}; the budget cannot be spent"
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Scenario<f64> {
        Scenario::new(
            Network::isolated(2),
            OpinionDistribution::degenerate(OpinionMatrix::new(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap()),
            DurationDistribution::degenerate(1.0),
            3,
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            9,
        )
        .unwrap()
    }

    #[test]
    fn derived_quantities() {
        let sc = tiny();
        assert_eq!((sc.n(), sc.m(), sc.horizon()), (2, 2, 3));
        assert_eq!(sc.average_budgets(), vec![1.0 / 3.0, 2.0 / 3.0]);
        assert!((sc.max_stage_weight() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_budget_rejected() {
        let err = tiny().with_budgets(vec![7.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("budgets[0]"), "{err}");
    }

    #[test]
    fn all_problems_reported() {
        let err = Scenario::new(
            Network::isolated(2),
            OpinionDistribution::degenerate(OpinionMatrix::new(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap()),
            DurationDistribution {
                values: vec![-1.0],
                probs: vec![0.5],
            },
            0,
            vec![1.0],
            vec![1.0, 0.0],
            0,
        )
        .unwrap_err();
        let Error::InvalidScenario(list) = err else {
            panic!("wrong error kind")
        };
        let joined = list.join("\n");
        for needle in ["durations.values[0]", "durations.probs", "horizon", "budgets:", "caps[1]"] {
            assert!(joined.contains(needle), "missing {needle} in {joined}");
        }
    }

    #[test]
    fn influencer_view_extracts_column() {
        let view = tiny().influencer_view(1).unwrap();
        assert_eq!(view.m(), 1);
        assert_eq!(view.budgets(), &[2.0]);
        match view.opinions() {
            OpinionDistribution::Explicit { support, .. } => assert_eq!(support[0].column(0), vec![0.5, 0.8]),
            _ => panic!("expected explicit"),
        }
    }

    #[test]
    fn casts_to_f32() {
        let sc = tiny().cast::<f32>().unwrap();
        assert_eq!(sc.budgets(), &[1.0f32, 2.0]);
    }
}
