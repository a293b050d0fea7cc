//! Online play: every influencer runs dual mirror descent on its own budget.
//!
//! Within a stage the players' responses are coupled through the opponents'
//! investment in each individual. With full information each player can
//! reproduce everyone's multiplier and remaining budget, so the stage
//! allocation is the fixed point of the coupled responses. With partial
//! information a coordinator broadcasts `Σ θ` and each player applies the
//! interior closed form `b_j = G(1 − (m−1)θ_j/Σθ) − x_j` with `G = (m−1)ρ/Σθ`.

use serde::{Deserialize, Serialize};

use super::offline::{measure_epsilon, offline_equilibrium, Alg2Config};
use super::{EquilibriumReport, GamePath, StrategyProfile};
use crate::dynamics::{coord_utility, Allocation, CampaignWeights, OpinionMatrix};
use crate::error::{Error, Result};
use crate::online::{budget_gate, dual_subgradient, DualState, OnlineConfig, OnlineParams};
use crate::real::{clamp, Real};
use crate::scenario::{sample_path, Scenario, StageRealization};
use crate::waterfill::{response, Coord};

/// Iterates kept for cycle detection.
const CYCLE_WINDOW: usize = 8;
const CYCLE_TOL: f64 = 1e-9;
const MAX_FIXED_POINT_ITERS: usize = 500;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoMode {
    /// Coupled fixed point of all players' responses.
    #[default]
    Full,
    /// Closed form from the broadcast `Σ θ`.
    Partial,
}

impl std::str::FromStr for InfoMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "partial" => Ok(Self::Partial),
            other => Err(Error::InvalidParameter(format!(
                "unknown information mode `{other}` (expected full or partial)"
            ))),
        }
    }
}

/// Outcome of the stage fixed-point iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct FixedPoint<T> {
    pub allocation: Allocation<T>,
    pub converged: bool,
    /// The iteration entered a cycle; the member with the lowest total spend is returned.
    pub cycled: bool,
    pub iterations: usize,
    /// `max |b − response(b)|` at the returned point.
    pub residual: T,
}

/// Partial-information response of one player.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PartialResponse<T> {
    pub b: Vec<T>,
    /// Some coordinate of the closed form fell outside `[0, b̄]`.
    pub clamped: bool,
}

/// `b_j = G(1 − (m−1)θ_j/Σθ) − x_j` with `G = (m−1)ρ/Σθ`, clamped to `[0, b̄]`.
pub fn online_stage_partial_info<T: Real>(
    weights: &CampaignWeights<T>,
    x_own: &[T],
    theta_own: T,
    theta_sum: T,
    m: usize,
    cap: T,
) -> Result<PartialResponse<T>> {
    if !(theta_sum > T::zero()) {
        return Err(Error::InvalidParameter(format!("multiplier sum {theta_sum} must be positive")));
    }
    let others = T::from_usize(m.saturating_sub(1)).unwrap();
    let share = T::one() - others * theta_own / theta_sum;
    let mut clamped = false;
    let b = weights
        .rho
        .iter()
        .zip(x_own)
        .map(|(&rho, &x)| {
            let raw = others * rho / theta_sum * share - x;
            let v = clamp(raw, T::zero(), cap);
            clamped |= v != raw;
            v
        })
        .collect();
    Ok(PartialResponse { b, clamped })
}

/// Per-individual conditions under which the closed form is trusted.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Feasibility<T> {
    /// `ρ/(m b̄) · (1 − 1/(m b̄))`.
    pub bound: T,
    /// `m b̄ > 1`, without which the bound is not positive.
    pub satisfiable: bool,
    /// `θ_j ≤ bound` per player.
    pub theta_ok: Vec<bool>,
    /// `ū/α_j + 1 ≤ bound` per player.
    pub theta_max_ok: Vec<bool>,
}

impl<T: Real> Feasibility<T> {
    pub fn all(&self) -> bool {
        self.satisfiable && self.theta_ok.iter().chain(&self.theta_max_ok).all(|&ok| ok)
    }
}

pub fn corollary5_feasibility<T: Real>(
    theta: &[T],
    rho: T,
    m: usize,
    cap: T,
    alphas: &[T],
    u_bar: T,
) -> Feasibility<T> {
    let mb = T::from_usize(m).unwrap() * cap;
    let bound = rho / mb * (T::one() - mb.recip());
    let satisfiable = bound > T::zero();
    Feasibility {
        bound,
        satisfiable,
        theta_ok: theta.iter().map(|&t| satisfiable && t <= bound).collect(),
        theta_max_ok: alphas
            .iter()
            .map(|&a| satisfiable && a > T::zero() && u_bar / a + T::one() <= bound)
            .collect(),
    }
}

/// One sweep of simultaneous responses. `b` and the result are `[j][i]`.
fn respond<T: Real>(
    rho: &[T],
    x: &OpinionMatrix<T>,
    theta: &[T],
    caps: &[T],
    remaining: Option<&[T]>,
    b: &[Vec<T>],
) -> Vec<Vec<T>> {
    let effective: Vec<Vec<T>> = match remaining {
        Some(rem) => b.iter().zip(rem).map(|(bj, &r)| budget_gate(bj, r)).collect(),
        None => b.to_vec(),
    };
    let m = b.len();
    (0..m)
        .map(|j| {
            (0..rho.len())
                .map(|i| {
                    let c: T = (0..m).filter(|&l| l != j).map(|l| effective[l][i]).sum();
                    let coord = Coord::new(rho[i] * (T::one() - x.get(i, j) + c), T::one() + c);
                    response(coord, theta[j], caps[j])
                })
                .collect()
        })
        .collect()
}

fn max_gap<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> T {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(&p, &q)| (p - q).abs())
        .fold(T::zero(), T::max)
}

fn total<T: Real>(b: &[Vec<T>]) -> T {
    b.iter().flatten().copied().sum()
}

fn closed_form_seed<T: Real>(weights: &CampaignWeights<T>, x: &OpinionMatrix<T>, theta: &[T], caps: &[T]) -> Vec<Vec<T>> {
    let m = theta.len();
    let sum: T = theta.iter().copied().sum();
    (0..m)
        .map(|j| match online_stage_partial_info(weights, &x.column(j), theta[j], sum, m, caps[j]) {
            Ok(r) => r.b,
            Err(_) => vec![caps[j]; x.n()],
        })
        .collect()
}

pub(crate) fn stage_fixed_point<T: Real>(
    weights: &CampaignWeights<T>,
    x: &OpinionMatrix<T>,
    theta: &[T],
    caps: &[T],
    remaining: Option<&[T]>,
) -> (Vec<Vec<T>>, bool, bool, usize, T) {
    let rho = &weights.rho;
    let tol = T::structural_tol();
    let mut current = closed_form_seed(weights, x, theta, caps);
    let mut history: Vec<Vec<Vec<T>>> = vec![current.clone()];
    for it in 1..=MAX_FIXED_POINT_ITERS {
        let next = respond(rho, x, theta, caps, remaining, &current);
        if max_gap(&next, &current) <= tol {
            let residual = max_gap(&respond(rho, x, theta, caps, remaining, &next), &next);
            return (next, true, false, it, residual);
        }
        // Agreement with the latest iterate is slow convergence, not a cycle.
        let earlier = &history[..history.len() - 1];
        if let Some(start) = earlier
            .iter()
            .position(|h| max_gap(h, &next) <= T::lit(CYCLE_TOL))
        {
            let pick = history[start..]
                .iter()
                .fold(None::<&Vec<Vec<T>>>, |best, h| match best {
                    Some(b) if total(b) <= total(h) => Some(b),
                    _ => Some(h),
                })
                .expect("non-empty cycle")
                .clone();
            let residual = max_gap(&respond(rho, x, theta, caps, remaining, &pick), &pick);
            return (pick, false, true, it, residual);
        }
        history.push(next.clone());
        if history.len() > CYCLE_WINDOW {
            history.remove(0);
        }
        current = next;
    }
    let residual = max_gap(&respond(rho, x, theta, caps, remaining, &current), &current);
    (current, false, false, MAX_FIXED_POINT_ITERS, residual)
}

/// Fixed point of the coupled stage responses
/// `b_ij = min{(√(ρ_i(1 − x_ij + c_ij)/θ_j) − 1 − c_ij)^+, b̄_j}`, `c_ij = Σ_{l≠j} b_il`,
/// iterated simultaneously from the closed-form seed.
pub fn online_stage_full_info<T: Real>(
    weights: &CampaignWeights<T>,
    x: &OpinionMatrix<T>,
    theta: &[T],
    caps: &[T],
) -> Result<FixedPoint<T>> {
    if theta.len() != x.m() || caps.len() != x.m() || weights.n() != x.n() {
        return Err(Error::Dimension(format!(
            "{} multipliers, {} caps and {} weights for a {}x{} opinion matrix",
            theta.len(),
            caps.len(),
            weights.n(),
            x.n(),
            x.m()
        )));
    }
    let (b, converged, cycled, iterations, residual) = stage_fixed_point(weights, x, theta, caps, None);
    Ok(FixedPoint {
        allocation: Allocation::from_columns(&b, caps.to_vec())?,
        converged,
        cycled,
        iterations,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct GameStageRecord<T> {
    pub k: usize,
    pub theta: Vec<T>,
    /// Pre-gate responses `[j][i]`.
    pub b_tilde: Vec<Vec<T>>,
    /// Post-gate allocations `[j][i]`.
    pub b_hat: Vec<Vec<T>>,
    pub g: Vec<T>,
    /// Budgets left before the stage.
    pub remaining: Vec<T>,
    pub utilities: Vec<T>,
    /// Full information: the fixed point converged. Partial: always true.
    pub converged: bool,
    /// Partial information: the closed form needed clamping.
    pub clamped: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct OnlineGameRun<T> {
    pub mode: InfoMode,
    pub stages: Vec<GameStageRecord<T>>,
    /// Total utility per player.
    pub utilities: Vec<T>,
    pub profile: StrategyProfile<T>,
    pub params: Vec<OnlineParams<T>>,
}

impl<T: Real> OnlineGameRun<T> {
    pub fn average_utilities(&self) -> Vec<T> {
        let k = T::from_usize(self.stages.len().max(1)).unwrap();
        self.utilities.iter().map(|&u| u / k).collect()
    }
}

/// Every player runs dual mirror descent with its own parameters; stage
/// allocations are coupled according to `mode`. In full-information mode the
/// opponents enter each response through their gated allocations.
pub fn run_online_game<T: Real>(
    path: &[StageRealization<T>],
    params: &[OnlineParams<T>],
    mode: InfoMode,
) -> Result<OnlineGameRun<T>> {
    let gp = GamePath::new(path)?;
    let m = gp.m;
    if params.len() != m {
        return Err(Error::Dimension(format!("{} parameter sets for {m} players", params.len())));
    }
    let caps: Vec<T> = params.iter().map(|p| p.cap).collect();
    let mut duals = params
        .iter()
        .map(|p| DualState::new(p.theta0, p.eta, p.regularizer, p.theta_max()))
        .collect::<Result<Vec<_>>>()?;
    let mut remaining: Vec<T> = params.iter().map(|p| p.budget).collect();
    let mut utilities = vec![T::zero(); m];
    let mut flat = vec![T::zero(); gp.coords() * m];
    let mut theta_path = Vec::with_capacity(path.len());
    let mut stages = Vec::with_capacity(path.len());

    for (k, stage) in path.iter().enumerate() {
        let theta: Vec<T> = duals.iter().map(|d| d.theta).collect();
        let (b_tilde, converged, clamped, iterations) = match mode {
            InfoMode::Full => {
                let (b, conv, _, it, _) = stage_fixed_point(&stage.weights, &stage.x, &theta, &caps, Some(&remaining));
                (b, conv, false, it)
            }
            InfoMode::Partial => {
                let sum: T = theta.iter().copied().sum();
                let mut clamped = false;
                let mut b = Vec::with_capacity(m);
                for j in 0..m {
                    if sum > T::zero() {
                        let r = online_stage_partial_info(&stage.weights, &stage.x.column(j), theta[j], sum, m, caps[j])?;
                        clamped |= r.clamped;
                        b.push(r.b);
                    } else {
                        clamped = true;
                        b.push(vec![caps[j]; gp.n]);
                    }
                }
                (b, true, clamped, 0)
            }
        };
        let b_hat: Vec<Vec<T>> = b_tilde.iter().zip(&remaining).map(|(b, &r)| budget_gate(b, r)).collect();

        let mut stage_u = vec![T::zero(); m];
        for i in 0..gp.n {
            let row_total: T = b_hat.iter().map(|b| b[i]).sum();
            for j in 0..m {
                let others = row_total - b_hat[j][i];
                stage_u[j] = stage_u[j] + coord_utility(stage.weights.rho[i], stage.x.get(i, j), b_hat[j][i], others);
                flat[(k * gp.n + i) * m + j] = b_hat[j][i];
            }
        }
        let g: Vec<T> = (0..m)
            .map(|j| dual_subgradient(&b_tilde[j], params[j].alpha()))
            .collect();
        let before = remaining.clone();
        for j in 0..m {
            utilities[j] = utilities[j] + stage_u[j];
            remaining[j] = remaining[j] - b_hat[j].iter().copied().sum::<T>();
            duals[j] = duals[j].update(g[j]);
        }
        theta_path.push(theta.clone());
        stages.push(GameStageRecord {
            k: stage.k,
            theta,
            b_tilde,
            b_hat,
            g,
            remaining: before,
            utilities: stage_u,
            converged,
            clamped,
            iterations,
        });
    }

    let mut profile = StrategyProfile::from_flat(&gp, &flat, &caps, duals.iter().map(|d| d.theta).collect());
    profile.theta_path = Some(theta_path);
    Ok(OnlineGameRun {
        mode,
        stages,
        utilities,
        profile,
        params: params.to_vec(),
    })
}

/// Online parameters of every player in `sc`.
pub fn player_params<T: Real>(sc: &Scenario<T>, config: &OnlineConfig) -> Result<Vec<OnlineParams<T>>> {
    (0..sc.m())
        .map(|j| {
            OnlineParams::new(
                sc.budgets()[j],
                sc.caps()[j],
                sc.horizon(),
                sc.max_stage_weight(),
                sc.n(),
                config,
            )
        })
        .collect()
}

/// Two players with full information on the scenario's path for `seed`.
pub fn online_game_m2<T: Real>(sc: &Scenario<T>, seed: u64, config: &OnlineConfig) -> Result<OnlineGameRun<T>> {
    if sc.m() != 2 {
        return Err(Error::Dimension(format!("expected two influencers, scenario has {}", sc.m())));
    }
    run_online_game(&sample_path(sc, seed), &player_params(sc, config)?, InfoMode::Full)
}

/// Any number of players in the chosen information mode.
pub fn online_game_multi<T: Real>(
    sc: &Scenario<T>,
    seed: u64,
    mode: InfoMode,
    config: &OnlineConfig,
) -> Result<OnlineGameRun<T>> {
    run_online_game(&sample_path(sc, seed), &player_params(sc, config)?, mode)
}

/// Online run next to the offline equilibrium of the same path.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct OnlineComparison<T> {
    pub online: OnlineGameRun<T>,
    pub offline: EquilibriumReport<T>,
    /// `|U_j(online) − U_j(offline)|/K` per player.
    pub gaps: Vec<T>,
    /// Best unilateral gain against the online profile, per stage.
    pub online_epsilon: Vec<T>,
}

/// Run the online game for `seed` and solve the offline game on the same path:
/// best-response dynamics for two players, dual ascent otherwise.
pub fn compare_online_offline<T: Real>(
    sc: &Scenario<T>,
    seed: u64,
    mode: InfoMode,
    config: &OnlineConfig,
    alg2: &Alg2Config,
    br_tol: T,
) -> Result<OnlineComparison<T>> {
    let path = sample_path(sc, seed);
    let online = run_online_game(&path, &player_params(sc, config)?, mode)?;
    let offline = offline_equilibrium(&path, sc.budgets(), sc.caps(), alg2, br_tol)?;
    let k = T::from_usize(sc.horizon()).unwrap();
    let gaps = online
        .utilities
        .iter()
        .zip(&offline.utilities)
        .map(|(&a, &b)| (a - b).abs() / k)
        .collect();
    let online_epsilon = measure_epsilon(&path, &online.profile, sc.budgets(), sc.caps())?;
    Ok(OnlineComparison {
        online,
        offline,
        gaps,
        online_epsilon,
    })
}
