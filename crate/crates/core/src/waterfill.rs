//! Budget-constrained water-filling over shifted square-root responses.
//!
//! Every allocation problem in the crate reduces to maximising a separable sum
//! of concave terms `w_c (x_c + b_c)/(d_c + b_c)` subject to `Σ b_c ≤ B` and
//! `0 ≤ b_c ≤ cap`. Stationarity gives the response
//!
//! ```text
//! b_c(θ) = min{ (√(w_c/θ) − d_c)^+ , cap }
//! ```
//!
//! for a common multiplier `θ`. `Σ_c b_c(θ)` is continuous and non-increasing,
//! with kinks where a coordinate leaves zero (`θ = w_c/d_c²`) or reaches the cap
//! (`θ = w_c/(d_c + cap)²`). Between consecutive kinks the active set is fixed
//! and `Σ_c b_c(θ) = B` has the closed form
//!
//! ```text
//! √θ = Σ_A √w_c / (B − |C|·cap + Σ_A d_c)
//! ```
//!
//! so the solver binary-searches the sorted kinks and solves once.

use serde::Serialize;

use crate::real::{clamp, pos, Real};

/// One coordinate of a water-filling problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coord<T> {
    /// Marginal-value weight `w`; zero means investing is worthless.
    pub weight: T,
    /// Response shift `d ≥ 1` (one plus what others invest in the same individual).
    pub shift: T,
}

impl<T: Real> Coord<T> {
    pub fn new(weight: T, shift: T) -> Self {
        Self { weight, shift }
    }

    fn zero_kink(&self) -> T {
        self.weight / (self.shift * self.shift)
    }

    fn cap_kink(&self, cap: T) -> T {
        let s = self.shift + cap;
        self.weight / (s * s)
    }
}

/// Optimal `b_c(θ)` for a given multiplier. `θ = 0` sends every useful
/// coordinate to the cap.
#[inline]
pub fn response<T: Real>(coord: Coord<T>, theta: T, cap: T) -> T {
    if coord.weight <= T::zero() {
        return T::zero();
    }
    if theta <= T::zero() {
        return cap;
    }
    clamp(pos((coord.weight / theta).sqrt() - coord.shift), T::zero(), cap)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct WaterFill<T> {
    pub values: Vec<T>,
    pub theta: T,
    pub spent: T,
    /// The budget exceeds what useful coordinates can absorb at their caps;
    /// the remainder is left unspent and `θ = 0`.
    pub saturated: bool,
}

/// Solve `max Σ_c w_c (x_c + b_c)/(d_c + b_c)` s.t. `Σ b ≤ budget`, `0 ≤ b ≤ cap`.
pub fn water_fill<T: Real>(coords: &[Coord<T>], budget: T, cap: T) -> WaterFill<T> {
    let n = coords.len();
    let useful: Vec<usize> = (0..n).filter(|&c| coords[c].weight > T::zero()).collect();
    let mut values = vec![T::zero(); n];

    if budget <= T::zero() || useful.is_empty() {
        let theta = useful
            .iter()
            .map(|&c| coords[c].zero_kink())
            .fold(T::zero(), T::max);
        return WaterFill {
            values,
            theta,
            spent: T::zero(),
            saturated: budget > T::zero(),
        };
    }

    let capacity = cap * T::from_usize(useful.len()).unwrap();
    if budget >= capacity {
        for &c in &useful {
            values[c] = cap;
        }
        let saturated = budget > capacity;
        let theta = if saturated {
            T::zero()
        } else {
            useful
                .iter()
                .map(|&c| coords[c].cap_kink(cap))
                .fold(T::infinity(), T::min)
        };
        return WaterFill {
            values,
            theta,
            spent: capacity,
            saturated,
        };
    }

    let mut kinks: Vec<T> = useful
        .iter()
        .flat_map(|&c| [coords[c].zero_kink(), coords[c].cap_kink(cap)])
        .collect();
    kinks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kinks.dedup();

    let total_at = |theta: T| -> T { useful.iter().map(|&c| response(coords[c], theta, cap)).sum() };

    // total_at(kinks[0]) = capacity > budget and total_at(last) = 0 < budget.
    let (mut lo, mut hi) = (0usize, kinks.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if total_at(kinks[mid]) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (theta_lo, theta_hi) = (kinks[lo], kinks[hi]);

    let mut sqrt_w = T::zero();
    let mut shift_sum = T::zero();
    let mut capped = 0usize;
    let mut active = Vec::new();
    for &c in &useful {
        let co = coords[c];
        if co.cap_kink(cap) >= theta_hi {
            capped += 1;
        } else if co.zero_kink() > theta_lo {
            active.push(c);
            sqrt_w = sqrt_w + co.weight.sqrt();
            shift_sum = shift_sum + co.shift;
        }
    }
    let remaining = budget - cap * T::from_usize(capped).unwrap();

    let theta = if active.is_empty() {
        theta_hi
    } else {
        let root = sqrt_w / (remaining + shift_sum);
        clamp(root * root, theta_lo, theta_hi)
    };

    for &c in &useful {
        let co = coords[c];
        values[c] = if co.cap_kink(cap) >= theta_hi {
            cap
        } else if co.zero_kink() > theta_lo {
            clamp((co.weight / theta).sqrt() - co.shift, T::zero(), cap)
        } else {
            T::zero()
        };
    }
    let spent = values.iter().copied().sum();
    WaterFill {
        values,
        theta,
        spent,
        saturated: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(weights: &[f64]) -> Vec<Coord<f64>> {
        weights.iter().map(|&w| Coord::new(w, 1.0)).collect()
    }

    #[test]
    fn symmetric_pair() {
        let wf = water_fill(&unit(&[1.0, 1.0]), 2.0, 5.0);
        assert!((wf.values[0] - 1.0).abs() < 1e-14);
        assert!((wf.values[1] - 1.0).abs() < 1e-14);
        assert!((wf.theta - 0.25).abs() < 1e-14);
    }

    #[test]
    fn single_coordinate_spends_budget() {
        let wf = water_fill(&unit(&[0.3]), 0.4, 1.0);
        assert!((wf.values[0] - 0.4).abs() < 1e-14);
        assert!((response(Coord::new(0.3, 1.0), wf.theta, 1.0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn weak_coordinates_stay_at_zero() {
        let wf = water_fill(&unit(&[4.0, 0.01]), 0.5, 10.0);
        assert_eq!(wf.values[1], 0.0);
        assert!((wf.values[0] - 0.5).abs() < 1e-14);
        assert!(wf.theta >= 0.01);
    }

    #[test]
    fn caps_bind_for_strong_coordinates() {
        let wf = water_fill(&unit(&[100.0, 1.0, 1.0]), 1.5, 0.5);
        assert_eq!(wf.values[0], 0.5);
        assert!((wf.spent - 1.5).abs() < 1e-14);
        assert!((wf.values[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn saturation_flagged() {
        let wf = water_fill(&unit(&[1.0, 0.0]), 3.0, 1.0);
        assert!(wf.saturated);
        assert_eq!(wf.values, vec![1.0, 0.0]);
        assert_eq!(wf.theta, 0.0);
    }

    #[test]
    fn worthless_coordinates_get_nothing() {
        let wf = water_fill(&unit(&[0.0, 0.0]), 1.0, 1.0);
        assert!(wf.saturated);
        assert_eq!(wf.spent, 0.0);
    }

    #[test]
    fn zero_budget() {
        let wf = water_fill(&unit(&[1.0, 2.0]), 0.0, 1.0);
        assert_eq!(wf.values, vec![0.0, 0.0]);
        assert!(!wf.saturated);
        assert_eq!(wf.theta, 2.0);
    }

    #[test]
    fn shifted_coordinates() {
        let coords = vec![Coord::new(2.0f64, 1.5), Coord::new(2.0, 1.0)];
        let wf = water_fill(&coords, 1.0, 3.0);
        // Both interior: √(2/θ) − 1.5 + √(2/θ) − 1 = 1.
        let s: f64 = (1.0 + 2.5) / 2.0;
        assert!((wf.theta - 2.0 / (s * s)).abs() < 1e-14);
        assert!((wf.values[0] - (s - 1.5)).abs() < 1e-14);
    }

    #[test]
    fn zero_theta_response_is_cap() {
        assert_eq!(response(Coord::new(1.0, 1.0), 0.0, 0.7), 0.7);
        assert_eq!(response(Coord::new(0.0, 1.0), 0.0, 0.7), 0.0);
    }
}
