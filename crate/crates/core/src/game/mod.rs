//! Games between several influencers over the same campaigns.
//!
//! Offline, the `K` campaigns form one static game over `nK` coordinates; for
//! two players best-response dynamics find its unique equilibrium, and for any
//! number of players a dual-ascent loop around projected gradient play finds an
//! ε-Nash profile ([`offline`]). Online, every player runs the dual mirror
//! descent policy and the stage allocations are coupled either through the
//! full-information fixed point or through a broadcast of `Σ θ` ([`online`]).

pub mod offline;
pub mod online;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{coord_utility, Allocation};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scenario::StageRealization;

pub use offline::{
    algorithm2_epsilon_nash, best_response, best_response_m2, br_dynamics_m2, measure_epsilon,
    offline_equilibrium, pseudo_gradient_jacobian, Alg2Config, BestResponse, BR_MAX_SWEEPS,
};
pub use online::{
    compare_online_offline, corollary5_feasibility, online_game_m2, online_game_multi,
    online_stage_full_info, online_stage_partial_info, player_params, run_online_game, Feasibility, FixedPoint,
    GameStageRecord, InfoMode, OnlineComparison, OnlineGameRun,
};

/// A realised path flattened for the solvers: `rho[k*n + i]`,
/// `x[(k*n + i)*m + j]`.
#[derive(Clone, Debug)]
pub(crate) struct GamePath<T> {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub rho: Vec<T>,
    pub x: Vec<T>,
}

impl<T: Real> GamePath<T> {
    pub fn new(path: &[StageRealization<T>]) -> Result<Self> {
        let first = path
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty path".into()))?;
        let (n, m) = (first.x.n(), first.x.m());
        let mut rho = Vec::with_capacity(path.len() * n);
        let mut x = Vec::with_capacity(path.len() * n * m);
        for s in path {
            if s.x.n() != n || s.x.m() != m || s.weights.n() != n {
                return Err(Error::Dimension(format!(
                    "stage {} is {}x{} with {} weights, expected {n}x{m}",
                    s.k,
                    s.x.n(),
                    s.x.m(),
                    s.weights.n()
                )));
            }
            rho.extend_from_slice(&s.weights.rho);
            for i in 0..n {
                x.extend_from_slice(s.x.row(i));
            }
        }
        Ok(Self {
            n,
            k: path.len(),
            m,
            rho,
            x,
        })
    }

    /// Number of (stage, individual) coordinates.
    pub fn coords(&self) -> usize {
        self.n * self.k
    }

    /// Total utility of player `j` under the flat profile `b`.
    pub fn utility(&self, b: &[T], j: usize) -> T {
        let m = self.m;
        (0..self.coords())
            .map(|c| {
                let row = &b[c * m..(c + 1) * m];
                let total: T = row.iter().copied().sum();
                coord_utility(self.rho[c], self.x[c * m + j], row[j], total - row[j])
            })
            .sum()
    }

    pub fn utilities(&self, b: &[T]) -> Vec<T> {
        (0..self.m).map(|j| self.utility(b, j)).collect()
    }

    pub fn spent(&self, b: &[T], j: usize) -> T {
        (0..self.coords()).map(|c| b[c * self.m + j]).sum()
    }

    pub fn check_budgets(&self, budgets: &[T], caps: &[T]) -> Result<()> {
        if budgets.len() != self.m || caps.len() != self.m {
            return Err(Error::Dimension(format!(
                "{} budgets and {} caps for {} influencers",
                budgets.len(),
                caps.len(),
                self.m
            )));
        }
        let coords = T::from_usize(self.coords()).unwrap();
        for (&b, &cap) in budgets.iter().zip(caps) {
            if !(cap > T::zero()) || b < T::zero() {
                return Err(Error::InvalidParameter(format!("budget {b} and cap {cap}")));
            }
            if b > cap * coords * (T::one() + T::structural_tol()) {
                return Err(Error::InfeasibleBudget {
                    budget: b.as_f64(),
                    capacity: (cap * coords).as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Allocations of every player over a path.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct StrategyProfile<T> {
    /// One `n × m` allocation per stage.
    pub stages: Vec<Allocation<T>>,
    /// `Σ_{k,i} b_ij(k)` per player.
    pub spent: Vec<T>,
    /// Final multiplier per player.
    pub theta: Vec<T>,
    /// Multiplier per stage and player, for online runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_path: Option<Vec<Vec<T>>>,
}

impl<T: Real> StrategyProfile<T> {
    pub(crate) fn from_flat(gp: &GamePath<T>, b: &[T], caps: &[T], theta: Vec<T>) -> Self {
        let (n, m) = (gp.n, gp.m);
        let stages = (0..gp.k)
            .map(|k| {
                let mut a = Allocation::zeros(n, caps.to_vec());
                for i in 0..n {
                    for j in 0..m {
                        a.set(i, j, b[(k * n + i) * m + j]);
                    }
                }
                a
            })
            .collect();
        Self {
            stages,
            spent: (0..m).map(|j| gp.spent(b, j)).collect(),
            theta,
            theta_path: None,
        }
    }

    pub(crate) fn to_flat(&self) -> Vec<T> {
        self.stages
            .iter()
            .flat_map(|a| (0..a.n()).flat_map(move |i| a.row(i).to_vec()))
            .collect()
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    pub fn m(&self) -> usize {
        self.spent.len()
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        self.stages[k].get(i, j)
    }

    /// Largest coordinate-wise difference to another profile of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(&a, b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Total utility of every player along `path`.
    pub fn utilities(&self, path: &[StageRealization<T>]) -> Result<Vec<T>> {
        let gp = GamePath::new(path)?;
        if gp.k != self.horizon() || gp.m != self.m() {
            return Err(Error::Dimension("profile and path disagree".into()));
        }
        Ok(gp.utilities(&self.to_flat()))
    }
}

/// Result of an equilibrium computation.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct EquilibriumReport<T> {
    pub profile: StrategyProfile<T>,
    /// Best unilateral gain per player, in average utility per stage.
    pub epsilon: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Total utility per player.
    pub utilities: Vec<T>,
}

impl<T: Real> EquilibriumReport<T> {
    pub fn max_epsilon(&self) -> T {
        self.epsilon.iter().copied().fold(T::zero(), T::max)
    }

    /// Utility per stage.
    pub fn average_utilities(&self) -> Vec<T> {
        let k = T::from_usize(self.profile.horizon().max(1)).unwrap();
        self.utilities.iter().map(|&u| u / k).collect()
    }
}

/// A random feasible profile: uniform in each box, then scaled into the budget.
pub fn random_profile<T: Real>(
    path: &[StageRealization<T>],
    budgets: &[T],
    caps: &[T],
    seed: u64,
) -> Result<StrategyProfile<T>> {
    let gp = GamePath::new(path)?;
    gp.check_budgets(budgets, caps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = vec![T::zero(); gp.coords() * gp.m];
    for j in 0..gp.m {
        let draws: Vec<f64> = (0..gp.coords()).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = draws.iter().sum::<f64>() * caps[j].as_f64();
        let scale = if total > budgets[j].as_f64() { budgets[j].as_f64() / total } else { 1.0 };
        for (c, d) in draws.iter().enumerate() {
            b[c * gp.m + j] = caps[j] * T::lit(d * scale);
        }
    }
    Ok(StrategyProfile::from_flat(&gp, &b, caps, vec![T::zero(); gp.m]))
}
