//! Online dual mirror descent for a single influencer.
//!
//! At stage `k` the influencer sees `x(t_k)` and `ρ_k`, answers with the
//! water-filling response for its current multiplier `θ_k`, spends it only if
//! the remaining budget covers the whole stage, and then moves `θ` along the
//! dual subgradient `α − Σ b̃`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{coord_utility, CampaignWeights};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scenario::{sample_path, Scenario, StageRealization};
use crate::waterfill::{response, Coord};

/// Mirror-descent reference function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// `h(θ) = θ log θ`: multiplicative updates.
    #[default]
    Entropy,
    /// `h(θ) = θ²/2`: projected subgradient steps.
    Squared,
}

impl Regularizer {
    /// Strong-convexity constants `(σ₁, σ₂)` on `(0, θ_max]`.
    pub fn sigmas<T: Real>(self, theta_max: T) -> (T, T) {
        match self {
            Self::Entropy => {
                let s = theta_max.recip();
                (s, s)
            }
            Self::Squared => (T::one(), T::one()),
        }
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entropy" => Ok(Self::Entropy),
            "squared" => Ok(Self::Squared),
            other => Err(Error::InvalidParameter(format!(
                "unknown regularizer `{other}` (expected entropy or squared)"
            ))),
        }
    }
}

/// `θ_max = ū/α + 1`; infinite when `α = 0`.
pub fn theta_max<T: Real>(u_bar: T, alpha: T) -> T {
    if alpha > T::zero() {
        u_bar / alpha + T::one()
    } else {
        T::infinity()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DualState<T> {
    pub theta: T,
    pub eta: T,
    pub regularizer: Regularizer,
    pub theta_max: T,
}

impl<T: Real> DualState<T> {
    pub fn new(theta: T, eta: T, regularizer: Regularizer, theta_max: T) -> Result<Self> {
        if !(theta >= T::zero() && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial multiplier {theta} must be finite and ≥ 0")));
        }
        if regularizer == Regularizer::Entropy && theta == T::zero() {
            return Err(Error::InvalidParameter("entropy updates need a positive initial multiplier".into()));
        }
        if !(eta > T::zero() && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size {eta} must be positive")));
        }
        Ok(Self {
            theta,
            eta,
            regularizer,
            theta_max,
        })
    }

    /// One mirror-descent step along subgradient `g`.
    pub fn update(&self, g: T) -> Self {
        let theta = match self.regularizer {
            Regularizer::Entropy => self.theta * (-self.eta * g).exp(),
            Regularizer::Squared => (self.theta - self.eta * g).max(T::zero()),
        };
        Self { theta, ..*self }
    }
}

/// Stage response `b̃_i = min{(√(ρ_i(1 − x_i)/θ) − 1)^+, b̄}`; `θ = 0` gives the cap
/// wherever the score is positive.
pub fn online_stage_allocation<T: Real>(weights: &CampaignWeights<T>, x: &[T], theta: T, cap: T) -> Vec<T> {
    weights
        .rho
        .iter()
        .zip(x)
        .map(|(&rho, &xi)| response(Coord::new(rho * (T::one() - xi), T::one()), theta, cap))
        .collect()
}

/// All-or-nothing gate: spend `b̃` only if the remaining budget covers all of it.
pub fn budget_gate<T: Real>(b_tilde: &[T], remaining: T) -> Vec<T> {
    let total: T = b_tilde.iter().copied().sum();
    if total <= remaining {
        b_tilde.to_vec()
    } else {
        vec![T::zero(); b_tilde.len()]
    }
}

/// `g̃ = α − Σ b̃`, on the pre-gate response.
pub fn dual_subgradient<T: Real>(b_tilde: &[T], alpha: T) -> T {
    alpha - b_tilde.iter().copied().sum::<T>()
}

/// `η = √(B'/A)` from the regret bound, capped at `σ₂/b̄`.
///
/// `A = (2K/σ₁)(n b̄² + α²/n)` and `B' = n e^{−1} + ū(log(ū/α + 1) + 1)/α`. Without a
/// positive average budget the bound is vacuous and `1/√K` is used.
pub fn default_eta<T: Real>(n: usize, cap: T, alpha: T, horizon: usize, u_bar: T) -> T {
    let k = T::from_usize(horizon.max(1)).unwrap();
    if !(alpha > T::zero()) {
        return k.sqrt().recip();
    }
    let nf = T::from_usize(n).unwrap();
    let tmax = theta_max(u_bar, alpha);
    let (s1, s2) = Regularizer::Entropy.sigmas(tmax);
    let two = T::lit(2.0);
    let a = two * k / s1 * (nf * cap * cap + alpha * alpha / nf);
    let b = nf * T::lit((-1.0f64).exp()) + u_bar * ((u_bar / alpha + T::one()).ln() + T::one()) / alpha;
    (b / a).sqrt().min(s2 / cap)
}

/// Step size, starting multiplier and reference function for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    /// `None` picks [`default_eta`].
    pub eta: Option<f64>,
    /// `None` starts at `e^{−1}`.
    pub theta0: Option<f64>,
    pub regularizer: Regularizer,
}

/// Everything a run needs besides the path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct OnlineParams<T> {
    pub budget: T,
    pub cap: T,
    pub horizon: usize,
    /// Bound `ū` on a stage's total weight.
    pub u_bar: T,
    pub eta: T,
    pub theta0: T,
    pub regularizer: Regularizer,
}

impl<T: Real> OnlineParams<T> {
    pub fn new(budget: T, cap: T, horizon: usize, u_bar: T, n: usize, config: &OnlineConfig) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if !(cap > T::zero()) || budget < T::zero() {
            return Err(Error::InvalidParameter(format!("budget {budget} and cap {cap}")));
        }
        let alpha = budget / T::from_usize(horizon).unwrap();
        let params = Self {
            budget,
            cap,
            horizon,
            u_bar,
            eta: config
                .eta
                .map(T::lit)
                .unwrap_or_else(|| default_eta(n, cap, alpha, horizon, u_bar)),
            theta0: T::lit(config.theta0.unwrap_or((-1.0f64).exp())),
            regularizer: config.regularizer,
        };
        params.check()?;
        Ok(params)
    }

    /// Parameters for a single-influencer scenario (the first budget and cap).
    pub fn for_scenario(sc: &Scenario<T>, config: &OnlineConfig) -> Result<Self> {
        Self::new(sc.budgets()[0], sc.caps()[0], sc.horizon(), sc.max_stage_weight(), sc.n(), config)
    }

    pub fn alpha(&self) -> T {
        self.budget / T::from_usize(self.horizon).unwrap()
    }

    pub fn theta_max(&self) -> T {
        theta_max(self.u_bar, self.alpha())
    }

    /// Largest admissible step `σ₂/b̄`.
    pub fn step_bound(&self) -> T {
        self.regularizer.sigmas(self.theta_max()).1 / self.cap
    }

    fn check(&self) -> Result<()> {
        let tmax = self.theta_max();
        if tmax.is_finite() {
            let bound = self.step_bound();
            if self.eta > bound * (T::one() + T::structural_tol()) {
                return Err(Error::StepSize {
                    eta: self.eta.as_f64(),
                    bound: bound.as_f64(),
                });
            }
            if self.theta0 > tmax {
                return Err(Error::InvalidParameter(format!(
                    "initial multiplier {} exceeds θ_max = {}",
                    self.theta0, tmax
                )));
            }
        }
        DualState::new(self.theta0, self.eta, self.regularizer, tmax).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct StageRecord<T> {
    pub k: usize,
    pub x: Vec<T>,
    pub rho: Vec<T>,
    pub b_tilde: Vec<T>,
    pub b_hat: Vec<T>,
    /// Multiplier used at this stage.
    pub theta: T,
    pub g: T,
    /// Budget left before this stage.
    pub remaining: T,
    pub spent: T,
    pub utility: T,
    pub utility_adjusted: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct OnlineRunTrace<T> {
    pub stages: Vec<StageRecord<T>>,
    /// First stage after which cumulative spending exceeds `B − b̄`.
    pub stop_time: Option<usize>,
    pub final_theta: T,
    pub total_spent: T,
    pub total_utility: T,
    pub total_adjusted: T,
    pub params: OnlineParams<T>,
}

impl<T: Real> OnlineRunTrace<T> {
    /// Budget left after the last stage.
    pub fn remaining(&self) -> T {
        self.stages
            .last()
            .map(|s| s.remaining - s.spent)
            .unwrap_or(self.params.budget)
    }
}

fn single_x<T: Real>(stage: &StageRealization<T>) -> Result<Vec<T>> {
    if stage.x.m() != 1 {
        return Err(Error::Dimension(format!(
            "stage {} has {} influencers, expected one",
            stage.k,
            stage.x.m()
        )));
    }
    Ok(stage.x.column(0))
}

/// Run the online policy along a realised path.
pub fn run_online_on_path<T: Real>(path: &[StageRealization<T>], params: &OnlineParams<T>) -> Result<OnlineRunTrace<T>> {
    let alpha = params.alpha();
    let mut dual = DualState::new(params.theta0, params.eta, params.regularizer, params.theta_max())?;
    let mut remaining = params.budget;
    let mut cumulative = T::zero();
    let mut stop_time = None;
    let mut stages = Vec::with_capacity(path.len());
    let (mut total_utility, mut total_adjusted) = (T::zero(), T::zero());

    for stage in path {
        let x = single_x(stage)?;
        let b_tilde = online_stage_allocation(&stage.weights, &x, dual.theta, params.cap);
        let b_hat = budget_gate(&b_tilde, remaining);
        let spent: T = b_hat.iter().copied().sum();
        let g = dual_subgradient(&b_tilde, alpha);

        let mut utility = T::zero();
        let mut baseline = T::zero();
        for ((&rho, &xi), &b) in stage.weights.rho.iter().zip(&x).zip(&b_hat) {
            utility = utility + coord_utility(rho, xi, b, T::zero());
            baseline = baseline + rho * xi;
        }
        total_utility = total_utility + utility;
        total_adjusted = total_adjusted + (utility - baseline);

        cumulative = cumulative + spent;
        if stop_time.is_none() && cumulative > params.budget - params.cap {
            stop_time = Some(stage.k);
        }
        stages.push(StageRecord {
            k: stage.k,
            x,
            rho: stage.weights.rho.clone(),
            b_tilde,
            b_hat,
            theta: dual.theta,
            g,
            remaining,
            spent,
            utility,
            utility_adjusted: utility - baseline,
        });
        remaining = remaining - spent;
        dual = dual.update(g);
    }

    Ok(OnlineRunTrace {
        stages,
        stop_time,
        final_theta: dual.theta,
        total_spent: cumulative,
        total_utility,
        total_adjusted,
        params: *params,
    })
}

/// Sample the scenario's path for `seed` and run the online policy on it.
pub fn run_online_single<T: Real>(sc: &Scenario<T>, seed: u64, config: &OnlineConfig) -> Result<OnlineRunTrace<T>> {
    if sc.m() != 1 {
        return Err(Error::Dimension(format!(
            "online single-influencer run needs one influencer, scenario has {}",
            sc.m()
        )));
    }
    let params = OnlineParams::for_scenario(sc, config)?;
    run_online_on_path(&sample_path(sc, seed), &params)
}
