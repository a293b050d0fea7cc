//! Offline single-influencer allocation with the whole path known in advance.
//!
//! With every campaign revealed, the `K` stages collapse into one pool of `nK`
//! coordinates with scores `s = ρ_ik (1 − x_i(t_k))`. The optimum is the
//! water-filling point `b = min{(√(s/θ) − 1)^+, b̄}` with `θ` chosen so the
//! whole budget is spent.

use serde::Serialize;

use crate::dynamics::coord_utility;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scenario::StageRealization;
use crate::waterfill::{water_fill, Coord};

/// Largest `nK` the grid oracle accepts.
pub const ORACLE_MAX_COORDS: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct OfflineSolution<T> {
    /// `b[k][i]`, stage-major.
    pub b: Vec<Vec<T>>,
    pub theta: T,
    /// `Σ_k Σ_i ρ_ik (x_i + b_i)/(1 + b_i)`.
    pub objective: T,
    /// Objective minus its zero-investment value.
    pub adjusted_objective: T,
    pub spent: T,
    /// The budget could not all be spent on individuals with positive score;
    /// the remainder is left idle.
    pub saturated: bool,
}

fn single_column<T: Real>(path: &[StageRealization<T>]) -> Result<()> {
    match path.iter().find(|s| s.x.m() != 1 || s.weights.n() != s.x.n()) {
        Some(s) => Err(Error::Dimension(format!(
            "stage {} is not a single-influencer realisation ({} influencers, {} weights for {} individuals)",
            s.k,
            s.x.m(),
            s.weights.n(),
            s.x.n()
        ))),
        None => Ok(()),
    }
}

/// Scores `ρ_ik (1 − x_i(t_k))`, stage-major.
pub fn scores<T: Real>(path: &[StageRealization<T>]) -> Vec<T> {
    path.iter()
        .flat_map(|s| (0..s.x.n()).map(move |i| s.weights.rho[i] * (T::one() - s.x.get(i, 0))))
        .collect()
}

/// Objective `Σ ρ (x + b)/(1 + b)` of a stage-major allocation.
pub fn single_objective<T: Real>(path: &[StageRealization<T>], b: &[Vec<T>]) -> T {
    path.iter()
        .zip(b)
        .map(|(s, row)| {
            (0..s.x.n())
                .map(|i| coord_utility(s.weights.rho[i], s.x.get(i, 0), row[i], T::zero()))
                .sum::<T>()
        })
        .sum()
}

/// Zero-investment value `Σ ρ x` of a path.
pub fn baseline_objective<T: Real>(path: &[StageRealization<T>]) -> T {
    path.iter()
        .map(|s| (0..s.x.n()).map(|i| s.weights.rho[i] * s.x.get(i, 0)).sum::<T>())
        .sum()
}

/// Exact optimum of the offline single-influencer program.
pub fn solve_offline_single<T: Real>(
    path: &[StageRealization<T>],
    budget: T,
    cap: T,
) -> Result<OfflineSolution<T>> {
    single_column(path)?;
    if !(cap > T::zero()) || budget < T::zero() {
        return Err(Error::InvalidParameter(format!("budget {budget} and cap {cap}")));
    }
    let pool: usize = path.iter().map(|s| s.x.n()).sum();
    let capacity = cap * T::from_usize(pool).unwrap();
    if budget > capacity * (T::one() + T::structural_tol()) {
        return Err(Error::InfeasibleBudget {
            budget: budget.as_f64(),
            capacity: capacity.as_f64(),
        });
    }
    let coords: Vec<Coord<T>> = scores(path).into_iter().map(|s| Coord::new(s, T::one())).collect();
    let wf = water_fill(&coords, budget.min(capacity), cap);

    let mut b = Vec::with_capacity(path.len());
    let mut offset = 0;
    for s in path {
        b.push(wf.values[offset..offset + s.x.n()].to_vec());
        offset += s.x.n();
    }
    let objective = single_objective(path, &b);
    Ok(OfflineSolution {
        adjusted_objective: objective - baseline_objective(path),
        objective,
        theta: wf.theta,
        spent: wf.spent,
        saturated: wf.saturated,
        b,
    })
}

/// Worst violations of the optimality conditions of an offline solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct KktResiduals {
    /// `max |b − (√(s/θ) − 1)|` over strictly interior coordinates.
    pub interior: f64,
    /// `max (√(s/θ) − 1)^+` over coordinates at zero.
    pub at_zero: f64,
    /// `max (1 + b̄ − √(s/θ))^+` over coordinates at the cap.
    pub at_cap: f64,
    /// `|Σ b − B|`, zero when the solution is saturated.
    pub budget: f64,
    /// Smallest score among capped coordinates minus the largest interior score
    /// (non-negative when ordering holds), and likewise interior versus zero.
    pub cap_order_gap: f64,
    pub zero_order_gap: f64,
}

impl KktResiduals {
    pub fn max_violation(&self) -> f64 {
        self.interior
            .max(self.at_zero)
            .max(self.at_cap)
            .max(self.budget)
            .max(-self.cap_order_gap.min(0.0))
            .max(-self.zero_order_gap.min(0.0))
    }
}

/// Check stationarity, complementary slackness, the exact budget and the score
/// ordering coordinate by coordinate.
pub fn kkt_residuals<T: Real>(
    path: &[StageRealization<T>],
    solution: &OfflineSolution<T>,
    budget: T,
    cap: T,
) -> KktResiduals {
    let s = scores(path);
    let b: Vec<f64> = solution.b.iter().flatten().map(|v| v.as_f64()).collect();
    let cap = cap.as_f64();
    let theta = solution.theta.as_f64();
    let edge = 1e-12 * cap.max(1.0);
    let mut r = KktResiduals::default();
    if !solution.saturated {
        r.budget = (solution.spent.as_f64() - budget.as_f64()).abs();
    }
    let (mut min_cap, mut max_int, mut min_int, mut max_zero) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (score, &bi) in s.iter().map(|v| v.as_f64()).zip(&b) {
        let root = if theta > 0.0 { (score / theta).sqrt() } else { f64::INFINITY };
        if bi <= edge {
            if score > 0.0 {
                r.at_zero = r.at_zero.max(root - 1.0);
            }
            max_zero = max_zero.max(score);
        } else if bi >= cap - edge {
            r.at_cap = r.at_cap.max(1.0 + cap - root);
            min_cap = min_cap.min(score);
        } else {
            r.interior = r.interior.max((bi - (root - 1.0)).abs());
            max_int = max_int.max(score);
            min_int = min_int.min(score);
        }
    }
    let upper = if max_int.is_finite() { max_int } else { max_zero };
    let lower = if min_int.is_finite() { min_int } else { min_cap };
    r.cap_order_gap = if min_cap.is_finite() && upper.is_finite() { min_cap - upper } else { 0.0 };
    r.zero_order_gap = if max_zero.is_finite() && lower.is_finite() { lower - max_zero } else { 0.0 };
    r
}

/// Best point of a separable objective on the grid `b_c ∈ {0, h, 2h, …} ∩ [0, cap]`
/// with `Σ b_c ≤ budget`. `value(c, b)` is coordinate `c`'s contribution.
///
/// Exhaustive over the grid: the budget-simplex enumeration is carried out by
/// dynamic programming over coordinates, which visits every feasible
/// combination of per-coordinate grid levels implicitly.
pub fn grid_search_separable<T: Real>(
    coords: usize,
    budget: T,
    cap: T,
    step: T,
    value: impl Fn(usize, T) -> T,
) -> (Vec<T>, T) {
    let units = (budget / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let cap_units = (cap / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let level = |u: usize| T::from_usize(u).unwrap() * step;

    // best[c][u]: best total of coordinates c.. using at most u units.
    let mut best = vec![vec![T::zero(); units + 1]; coords + 1];
    let mut choice = vec![vec![0usize; units + 1]; coords];
    for c in (0..coords).rev() {
        let table: Vec<T> = (0..=cap_units.min(units)).map(|u| value(c, level(u))).collect();
        for u in 0..=units {
            let mut top = T::neg_infinity();
            let mut arg = 0;
            for (take, &v) in table.iter().enumerate().take(u + 1) {
                let total = v + best[c + 1][u - take];
                if total > top {
                    top = total;
                    arg = take;
                }
            }
            best[c][u] = top;
            choice[c][u] = arg;
        }
    }
    let mut b = Vec::with_capacity(coords);
    let mut left = units;
    for row in &choice {
        let take = row[left];
        b.push(level(take));
        left -= take;
    }
    let total = if coords == 0 { T::zero() } else { best[0][units] };
    (b, total)
}

/// Grid-search optimum of the offline single-influencer program. Stage-major `b`.
pub fn brute_force_oracle<T: Real>(
    path: &[StageRealization<T>],
    budget: T,
    cap: T,
    step: T,
) -> Result<(Vec<Vec<T>>, T)> {
    single_column(path)?;
    let pool: usize = path.iter().map(|s| s.x.n()).sum();
    if pool > ORACLE_MAX_COORDS {
        return Err(Error::OracleTooLarge {
            coords: pool,
            limit: ORACLE_MAX_COORDS,
        });
    }
    let flat: Vec<(T, T)> = path
        .iter()
        .flat_map(|s| (0..s.x.n()).map(move |i| (s.weights.rho[i], s.x.get(i, 0))))
        .collect();
    let (values, total) = grid_search_separable(pool, budget, cap, step, |c, b| {
        let (rho, x) = flat[c];
        coord_utility(rho, x, b, T::zero())
    });
    let mut b = Vec::with_capacity(path.len());
    let mut offset = 0;
    for s in path {
        b.push(values[offset..offset + s.x.n()].to_vec());
        offset += s.x.n();
    }
    Ok((b, total))
}
