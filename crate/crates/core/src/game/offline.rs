//! Offline equilibria over a fully revealed path.

use serde::{Deserialize, Serialize};

use super::{EquilibriumReport, GamePath, StrategyProfile};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::{clamp, Real};
use crate::scenario::StageRealization;
use crate::waterfill::{water_fill, Coord, WaterFill};

/// Sweep cap used by [`offline_equilibrium`].
pub const BR_MAX_SWEEPS: usize = 100_000;

/// Player `j`'s exact best response to the rest of the flat profile `b`.
///
/// With `c` the opponents' total on a coordinate, the response is
/// `min{(√(ρ(1 − x_j + c)/θ) − 1 − c)^+, b̄}`, the single-influencer water-filling
/// with scores `ρ(1 − x_j + c)` and shifts `1 + c`.
pub(crate) fn best_response_flat<T: Real>(gp: &GamePath<T>, b: &[T], j: usize, budget: T, cap: T) -> WaterFill<T> {
    let m = gp.m;
    let coords: Vec<Coord<T>> = (0..gp.coords())
        .map(|c| {
            let row = &b[c * m..(c + 1) * m];
            let others = row.iter().copied().sum::<T>() - row[j];
            Coord::new(gp.rho[c] * (T::one() - gp.x[c * m + j] + others), T::one() + others)
        })
        .collect();
    water_fill(&coords, budget, cap)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct BestResponse<T> {
    /// `b[k][i]`.
    pub b: Vec<Vec<T>>,
    pub theta: T,
    /// Total utility of the response against the fixed opponents.
    pub utility: T,
    pub saturated: bool,
}

/// Best response of player `j` to the opponents in `profile`.
pub fn best_response<T: Real>(
    path: &[StageRealization<T>],
    profile: &StrategyProfile<T>,
    j: usize,
    budget: T,
    cap: T,
) -> Result<BestResponse<T>> {
    let gp = GamePath::new(path)?;
    if j >= gp.m || profile.m() != gp.m || profile.horizon() != gp.k {
        return Err(Error::Dimension(format!(
            "player {j} of a {}-player profile over {} stages on a {}-player path of {} stages",
            profile.m(),
            profile.horizon(),
            gp.m,
            gp.k
        )));
    }
    let coords = T::from_usize(gp.coords()).unwrap();
    if budget > cap * coords * (T::one() + T::structural_tol()) {
        return Err(Error::InfeasibleBudget {
            budget: budget.as_f64(),
            capacity: (cap * coords).as_f64(),
        });
    }
    let mut b = profile.to_flat();
    let wf = best_response_flat(&gp, &b, j, budget, cap);
    for (c, &v) in wf.values.iter().enumerate() {
        b[c * gp.m + j] = v;
    }
    Ok(BestResponse {
        b: wf.values.chunks(gp.n).map(<[T]>::to_vec).collect(),
        theta: wf.theta,
        utility: gp.utility(&b, j),
        saturated: wf.saturated,
    })
}

/// [`best_response`] restricted to two-player games.
pub fn best_response_m2<T: Real>(
    path: &[StageRealization<T>],
    profile: &StrategyProfile<T>,
    j: usize,
    budget: T,
    cap: T,
) -> Result<BestResponse<T>> {
    if profile.m() != 2 {
        return Err(Error::Dimension(format!("expected two players, profile has {}", profile.m())));
    }
    best_response(path, profile, j, budget, cap)
}

fn epsilon_flat<T: Real>(gp: &GamePath<T>, b: &[T], budgets: &[T], caps: &[T]) -> Vec<T> {
    let k = T::from_usize(gp.k).unwrap();
    (0..gp.m)
        .map(|j| {
            let current = gp.utility(b, j);
            let wf = best_response_flat(gp, b, j, budgets[j], caps[j]);
            let mut dev = b.to_vec();
            for (c, &v) in wf.values.iter().enumerate() {
                dev[c * gp.m + j] = v;
            }
            ((gp.utility(&dev, j) - current) / k).max(T::zero())
        })
        .collect()
}

/// Best unilateral gain of each player, per stage.
pub fn measure_epsilon<T: Real>(
    path: &[StageRealization<T>],
    profile: &StrategyProfile<T>,
    budgets: &[T],
    caps: &[T],
) -> Result<Vec<T>> {
    let gp = GamePath::new(path)?;
    gp.check_budgets(budgets, caps)?;
    if profile.m() != gp.m || profile.horizon() != gp.k {
        return Err(Error::Dimension("profile and path disagree".into()));
    }
    Ok(epsilon_flat(&gp, &profile.to_flat(), budgets, caps))
}

fn report<T: Real>(
    gp: &GamePath<T>,
    b: &[T],
    budgets: &[T],
    caps: &[T],
    theta: Vec<T>,
    iterations: usize,
    converged: bool,
) -> EquilibriumReport<T> {
    EquilibriumReport {
        profile: StrategyProfile::from_flat(gp, b, caps, theta),
        epsilon: epsilon_flat(gp, b, budgets, caps),
        iterations,
        converged,
        utilities: gp.utilities(b),
    }
}

/// Alternating best responses for two players until a full sweep moves the
/// profile by less than `tol` in L1. Starts from `init` or from zero.
pub fn br_dynamics_m2<T: Real>(
    path: &[StageRealization<T>],
    budgets: &[T],
    caps: &[T],
    tol: T,
    max_iters: usize,
    init: Option<&StrategyProfile<T>>,
) -> Result<EquilibriumReport<T>> {
    let gp = GamePath::new(path)?;
    if gp.m != 2 {
        return Err(Error::Dimension(format!("best-response dynamics need two players, path has {}", gp.m)));
    }
    gp.check_budgets(budgets, caps)?;
    let mut b = match init {
        Some(p) if p.m() == 2 && p.horizon() == gp.k => p.to_flat(),
        Some(_) => return Err(Error::Dimension("initial profile does not match the path".into())),
        None => vec![T::zero(); gp.coords() * 2],
    };
    let mut theta = vec![T::zero(); 2];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_iters {
        sweeps += 1;
        let mut change = T::zero();
        for j in 0..2 {
            let wf = best_response_flat(&gp, &b, j, budgets[j], caps[j]);
            for (c, &v) in wf.values.iter().enumerate() {
                change = change + (b[c * 2 + j] - v).abs();
                b[c * 2 + j] = v;
            }
            theta[j] = wf.theta;
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(report(&gp, &b, budgets, caps, theta, sweeps, converged))
}

/// Parameters of the dual-ascent / gradient-play equilibrium search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Alg2Config {
    /// Starting multipliers; `e^{−1}` for every player when empty.
    pub theta0: Vec<f64>,
    /// Dual step per player; `0.25` for every player when empty.
    pub eta: Vec<f64>,
    /// Stop when every `|Ĉ_j/K − α_j|` is at most this.
    pub eps_thr: f64,
    /// Inner loop stops once a step moves every player's allocation by at most
    /// this in L1.
    pub eps_thr2: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for Alg2Config {
    fn default() -> Self {
        Self {
            theta0: Vec::new(),
            eta: Vec::new(),
            eps_thr: 1e-3,
            eps_thr2: 1e-6,
            max_outer: 10_000,
            max_inner: 1_000_000,
        }
    }
}

fn per_player(values: &[f64], m: usize, default: f64, what: &str) -> Result<Vec<f64>> {
    match values.len() {
        0 => Ok(vec![default; m]),
        l if l == m => Ok(values.to_vec()),
        l => Err(Error::Dimension(format!("{l} values of {what} for {m} players"))),
    }
}

/// Projected gradient play on `u_j − θ_j Σ b_j` for fixed multipliers, in place.
/// Returns the number of steps taken.
fn gradient_play<T: Real>(gp: &GamePath<T>, b: &mut [T], theta: &[T], caps: &[T], tol: T, max_steps: usize) -> usize {
    let m = gp.m;
    let lip = gp.rho.iter().copied().fold(T::zero(), T::max) * T::lit(2.0);
    let step = (T::lit(2.0) * lip).recip();
    let mut grad = vec![T::zero(); m];
    let mut moved = vec![T::zero(); m];
    for it in 1..=max_steps {
        moved.iter_mut().for_each(|v| *v = T::zero());
        for c in 0..gp.coords() {
            let row = &mut b[c * m..(c + 1) * m];
            let s = T::one() + row.iter().copied().sum::<T>();
            let scale = gp.rho[c] / (s * s);
            for j in 0..m {
                grad[j] = scale * (s - gp.x[c * m + j] - row[j]) - theta[j];
            }
            for j in 0..m {
                let next = clamp(row[j] + step * grad[j], T::zero(), caps[j]);
                moved[j] = moved[j] + (next - row[j]).abs();
                row[j] = next;
            }
        }
        if moved.iter().all(|&v| v <= tol) {
            return it;
        }
    }
    max_steps
}

/// ε-Nash profile by dual ascent on the budget multipliers around simultaneous
/// projected gradient play.
///
/// The outer residual is `r_j = Ĉ_j/K − α_j`, spending per stage against the
/// average budget. `θ_j ← max(0, θ_j + η_j r_j)`, and `η_j`
/// halves whenever `r_j` changes sign. A player whose multiplier sits at zero
/// while under budget has met its conditions. Any final overshoot of a budget
/// is removed by scaling that player's allocation.
pub fn algorithm2_epsilon_nash<T: Real>(
    path: &[StageRealization<T>],
    budgets: &[T],
    caps: &[T],
    config: &Alg2Config,
) -> Result<EquilibriumReport<T>> {
    let gp = GamePath::new(path)?;
    gp.check_budgets(budgets, caps)?;
    let m = gp.m;
    let mut theta: Vec<T> = per_player(&config.theta0, m, (-1.0f64).exp(), "theta0")?
        .into_iter()
        .map(T::lit)
        .collect();
    if theta.iter().any(|&t| !(t > T::zero())) {
        return Err(Error::InvalidParameter("initial multipliers must be positive".into()));
    }
    let mut eta: Vec<T> = per_player(&config.eta, m, 0.25, "eta")?.into_iter().map(T::lit).collect();
    let scale = T::from_usize(gp.k).unwrap();
    let (thr, thr2) = (T::lit(config.eps_thr), T::lit(config.eps_thr2));

    let mut b = vec![T::zero(); gp.coords() * m];
    let mut last_sign = vec![0i8; m];
    let mut residual = T::infinity();
    for outer in 1..=config.max_outer {
        gradient_play(&gp, &mut b, &theta, caps, thr2, config.max_inner);
        residual = T::zero();
        for j in 0..m {
            let r = (gp.spent(&b, j) - budgets[j]) / scale;
            let done = r.abs() <= thr || (theta[j] == T::zero() && r < T::zero());
            if !done {
                residual = residual.max(r.abs());
            }
            let sign = if r > T::zero() { 1 } else { -1 };
            if last_sign[j] != 0 && sign != last_sign[j] {
                eta[j] = eta[j] * T::lit(0.5);
            }
            last_sign[j] = sign;
            if !done {
                theta[j] = (theta[j] + eta[j] * r).max(T::zero());
            }
        }
        if residual == T::zero() {
            for j in 0..m {
                let spent = gp.spent(&b, j);
                if spent > budgets[j] {
                    let f = budgets[j] / spent;
                    for c in 0..gp.coords() {
                        b[c * m + j] = b[c * m + j] * f;
                    }
                }
            }
            return Ok(report(&gp, &b, budgets, caps, theta, outer, true));
        }
    }
    Err(Error::NonConvergence {
        solver: "dual ascent equilibrium search",
        iterations: config.max_outer,
        residual: residual.as_f64(),
    })
}

/// Offline equilibrium of a path: best-response dynamics (at most
/// [`BR_MAX_SWEEPS`] sweeps) for two players, dual ascent otherwise.
pub fn offline_equilibrium<T: Real>(
    path: &[StageRealization<T>],
    budgets: &[T],
    caps: &[T],
    alg2: &Alg2Config,
    br_tol: T,
) -> Result<EquilibriumReport<T>> {
    if budgets.len() == 2 {
        br_dynamics_m2(path, budgets, caps, br_tol, BR_MAX_SWEEPS, None)
    } else {
        algorithm2_epsilon_nash(path, budgets, caps, alg2)
    }
}

/// Jacobian `V_{jl} = ∂g_j/∂b_l` of the pseudo-gradient `g_j = ∂u_j/∂b_j` on one
/// coordinate: `V_{jl} = ρ(2y_j − S − S δ_{jl})/S³` with `y = x + b`, `S = 1 + Σ b`.
pub fn pseudo_gradient_jacobian<T: Real>(rho: T, x: &[T], b: &[T]) -> Matrix<T> {
    let m = x.len();
    let s = T::one() + b.iter().copied().sum::<T>();
    let s3 = s * s * s;
    let mut data = Vec::with_capacity(m * m);
    for j in 0..m {
        let y = x[j] + b[j];
        for l in 0..m {
            let diag = if j == l { s } else { T::zero() };
            data.push(rho * (T::lit(2.0) * y - s - diag) / s3);
        }
    }
    Matrix::from_row_major(m, m, data).expect("square")
}
