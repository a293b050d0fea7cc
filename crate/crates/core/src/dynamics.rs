//! De Groot opinion dynamics and per-stage influencer payoffs.
//!
//! Between campaigns, opinions evolve as `ẋ = −L x` on the social graph. Only
//! the end-of-campaign aggregate matters for payoffs, so a campaign of length
//! `τ` is summarised by the weight vector `ρ = 1ᵀ e^{−Lτ}`: individual `i`'s
//! post-investment opinion counts `ρ_i` times in the aggregate.
//!
//! Investments act on opinions multiplicatively normalised: individual `i`
//! receiving `b_i1, …, b_im` moves from `x_ij` to `(x_ij + b_ij)/(1 + Σ_ℓ b_iℓ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, Matrix};
use crate::real::Real;

/// Weighted graph Laplacian of the social network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "Matrix<T>", into = "Matrix<T>")]
pub struct Network<T: Real> {
    laplacian: Matrix<T>,
}

impl<T: Real> Network<T> {
    /// Validates the Laplacian: square, finite, zero row sums, non-positive
    /// off-diagonal and non-negative diagonal entries. Nothing is repaired.
    pub fn new(laplacian: Matrix<T>) -> Result<Self> {
        let problems = laplacian_problems(&laplacian);
        if problems.is_empty() {
            Ok(Self { laplacian })
        } else {
            Err(Error::InvalidNetwork(problems.join("; ")))
        }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Network with no edges.
    pub fn isolated(n: usize) -> Self {
        Self {
            laplacian: Matrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.laplacian.rows()
    }

    pub fn laplacian(&self) -> &Matrix<T> {
        &self.laplacian
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            laplacian: self.laplacian.cast(),
        }
    }
}

impl<T: Real> TryFrom<Matrix<T>> for Network<T> {
    type Error = Error;

    fn try_from(m: Matrix<T>) -> Result<Self> {
        Self::new(m)
    }
}

impl<T: Real> From<Network<T>> for Matrix<T> {
    fn from(net: Network<T>) -> Self {
        net.laplacian
    }
}

/// Human-readable list of every Laplacian invariant `l` violates.
pub(crate) fn laplacian_problems<T: Real>(l: &Matrix<T>) -> Vec<String> {
    let mut out = Vec::new();
    if !l.is_square() {
        out.push(format!("laplacian is {}x{}, not square", l.rows(), l.cols()));
        return out;
    }
    if l.rows() == 0 {
        out.push("laplacian is empty".into());
        return out;
    }
    if !l.all_finite() {
        out.push("laplacian has non-finite entries".into());
        return out;
    }
    for i in 0..l.rows() {
        let row = l.row(i);
        let scale = row.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
        let sum: T = row.iter().copied().sum();
        if sum.abs() > T::structural_tol() * scale {
            out.push(format!("row {i} sums to {sum}, expected 0"));
        }
        for (j, &v) in row.iter().enumerate() {
            if i == j && v < T::zero() {
                out.push(format!("diagonal entry ({i},{j}) = {v} is negative"));
            }
            if i != j && v > T::zero() {
                out.push(format!("off-diagonal entry ({i},{j}) = {v} is positive"));
            }
        }
    }
    out
}

/// Campaign weights `ρ = 1ᵀ e^{−Lτ}` for one campaign duration `τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CampaignWeights<T> {
    pub rho: Vec<T>,
    pub duration: T,
}

impl<T: Real> CampaignWeights<T> {
    /// Weights supplied directly, e.g. for a hand-built test instance.
    /// Only non-negativity is checked; the sum need not equal `n`.
    pub fn from_rho(rho: Vec<T>, duration: T) -> Result<Self> {
        if rho.iter().any(|r| !r.is_finite() || *r < T::zero()) {
            return Err(Error::InvalidParameter("campaign weights must be finite and non-negative".into()));
        }
        Ok(Self { rho, duration })
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }

    /// `Σ_i ρ_i`, the constant-sum total of one stage.
    pub fn total(&self) -> T {
        self.rho.iter().copied().sum()
    }

    pub fn cast<U: Real>(&self) -> CampaignWeights<U> {
        CampaignWeights {
            rho: self.rho.iter().map(|v| U::lit(v.as_f64())).collect(),
            duration: U::lit(self.duration.as_f64()),
        }
    }
}

/// Column sums of `e^{−L·duration}`.
pub fn de_groot_weights<T: Real>(net: &Network<T>, duration: T) -> Result<CampaignWeights<T>> {
    if !(duration.is_finite() && duration > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "campaign duration must be positive, got {duration}"
        )));
    }
    let propagator = expm(&net.laplacian().scale(-duration))
        .map_err(|e| Error::InvalidNetwork(e.to_string()))?;
    if !propagator.all_finite() {
        return Err(Error::InvalidNetwork("matrix exponential is not finite".into()));
    }
    let tol = T::propagated_tol();
    let mut rho = propagator.column_sums();
    for (i, r) in rho.iter_mut().enumerate() {
        if *r < -tol {
            return Err(Error::InvalidNetwork(format!("campaign weight {i} is negative ({r})")));
        }
        *r = r.max(T::zero());
    }
    let n = T::from_usize(net.n()).unwrap();
    let total: T = rho.iter().copied().sum();
    if (total - n).abs() > tol * n.max(T::one()) {
        return Err(Error::InvalidNetwork(format!(
            "campaign weights sum to {total}, expected {n}"
        )));
    }
    Ok(CampaignWeights { rho, duration })
}

/// Opinions `x_ij ∈ [0,1]` of `n` individuals about `m` influencers.
///
/// With `m ≥ 2` every row lies on the simplex. With a single influencer the
/// entry is the share already won; the remainder is the status quo and the row
/// is not required to sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OpinionMatrix<T> {
    n: usize,
    m: usize,
    data: Vec<T>,
}

impl<T: Real> OpinionMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let problems = opinion_problems(&rows);
        if !problems.is_empty() {
            return Err(Error::InvalidParameter(problems.join("; ")));
        }
        let n = rows.len();
        let m = rows[0].len();
        Ok(Self {
            n,
            m,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Single-influencer opinions, one entry per individual.
    pub fn single(column: Vec<T>) -> Result<Self> {
        Self::new(column.into_iter().map(|v| vec![v]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.m + j]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn cast<U: Real>(&self) -> OpinionMatrix<U> {
        OpinionMatrix {
            n: self.n,
            m: self.m,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

pub(crate) fn opinion_problems<T: Real>(rows: &[Vec<T>]) -> Vec<String> {
    let mut out = Vec::new();
    let Some(first) = rows.first() else {
        out.push("opinion matrix has no rows".into());
        return out;
    };
    let m = first.len();
    if m == 0 {
        out.push("opinion rows are empty".into());
        return out;
    }
    let tol = T::structural_tol();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            out.push(format!("row {i} has {} entries, expected {m}", row.len()));
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < -tol || v > T::one() + tol {
                out.push(format!("entry ({i},{j}) = {v} outside [0,1]"));
            }
        }
        if m >= 2 {
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                out.push(format!("row {i} sums to {s}, expected 1"));
            }
        }
    }
    out
}

/// Per-stage investments `b_ij ∈ [0, b̄_j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Allocation<T> {
    n: usize,
    m: usize,
    data: Vec<T>,
    caps: Vec<T>,
}

impl<T: Real> Allocation<T> {
    pub fn zeros(n: usize, caps: Vec<T>) -> Self {
        let m = caps.len();
        Self {
            n,
            m,
            data: vec![T::zero(); n * m],
            caps,
        }
    }

    /// `rows[i][j]` is the investment of influencer `j` in individual `i`.
    pub fn new(rows: Vec<Vec<T>>, caps: Vec<T>) -> Result<Self> {
        let m = caps.len();
        let tol = T::structural_tol();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!("allocation row {i} has {} entries, expected {m}", row.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < T::zero() || v > caps[j] * (T::one() + tol) {
                    return Err(Error::InvalidParameter(format!(
                        "allocation ({i},{j}) = {v} outside [0, {}]",
                        caps[j]
                    )));
                }
            }
        }
        Ok(Self {
            n: rows.len(),
            m,
            data: rows.into_iter().flatten().collect(),
            caps,
        })
    }

    /// Allocation from per-influencer columns, `columns[j][i] = b_ij`.
    pub fn from_columns(columns: &[Vec<T>], caps: Vec<T>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let rows = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        Self::new(rows, caps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn caps(&self) -> &[T] {
        &self.caps
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.m + j]
    }

    /// Sets `b_ij`, clamped into `[0, b̄_j]`.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.m + j] = crate::real::clamp(v, T::zero(), self.caps[j]);
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn spent(&self, j: usize) -> T {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }
}

/// Post-investment opinions of one individual.
pub fn opinion_update<T: Real>(x_row: &[T], b_row: &[T]) -> Vec<T> {
    let denom = T::one() + b_row.iter().copied().sum::<T>();
    x_row
        .iter()
        .zip(b_row)
        .map(|(&x, &b)| (x + b) / denom)
        .collect()
}

/// Contribution `ρ (x + b)/(1 + b + others)` of one individual to one influencer.
#[inline]
pub(crate) fn coord_utility<T: Real>(rho: T, x: T, b: T, others: T) -> T {
    rho * (x + b) / (T::one() + b + others)
}

/// `∂/∂b` of [`coord_utility`].
#[inline]
pub(crate) fn coord_gradient<T: Real>(rho: T, x: T, b: T, others: T) -> T {
    let g = T::one() + b + others;
    rho * (T::one() + others - x) / (g * g)
}

fn check_dims<T: Real>(weights: &CampaignWeights<T>, x: &OpinionMatrix<T>, b: &Allocation<T>, j: usize) -> Result<()> {
    if weights.n() != x.n() || x.n() != b.n() || x.m() != b.m() {
        return Err(Error::Dimension(format!(
            "weights n={}, opinions {}x{}, allocation {}x{}",
            weights.n(),
            x.n(),
            x.m(),
            b.n(),
            b.m()
        )));
    }
    if j >= x.m() {
        return Err(Error::IndexOutOfRange {
            what: "influencers",
            index: j,
            len: x.m(),
        });
    }
    Ok(())
}

fn others_sum<T: Real>(b: &Allocation<T>, i: usize, j: usize) -> T {
    b.row(i)
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != j)
        .map(|(_, &v)| v)
        .sum()
}

/// Reward of influencer `j` for one stage: `Σ_i ρ_i (x_ij + b_ij)/(1 + Σ_ℓ b_iℓ)`.
pub fn stage_utility<T: Real>(
    weights: &CampaignWeights<T>,
    x: &OpinionMatrix<T>,
    b: &Allocation<T>,
    j: usize,
) -> Result<T> {
    check_dims(weights, x, b, j)?;
    Ok((0..x.n())
        .map(|i| coord_utility(weights.rho[i], x.get(i, j), b.get(i, j), others_sum(b, i, j)))
        .sum())
}

/// Rewards of every influencer for one stage.
pub fn stage_utilities<T: Real>(
    weights: &CampaignWeights<T>,
    x: &OpinionMatrix<T>,
    b: &Allocation<T>,
) -> Result<Vec<T>> {
    (0..x.m()).map(|j| stage_utility(weights, x, b, j)).collect()
}

/// Stage reward of `j` minus the reward it would get by not investing, other
/// investments held fixed: `Σ_i ρ_i b_ij (1 − x_ij + Σ_{ℓ≠j} b_iℓ)/(1 + Σ_ℓ b_iℓ)`.
pub fn adjusted_stage_utility<T: Real>(
    weights: &CampaignWeights<T>,
    x: &OpinionMatrix<T>,
    b: &Allocation<T>,
    j: usize,
) -> Result<T> {
    check_dims(weights, x, b, j)?;
    Ok((0..x.n())
        .map(|i| {
            let bij = b.get(i, j);
            let others = others_sum(b, i, j);
            weights.rho[i] * bij * (T::one() - x.get(i, j) + others) / (T::one() + bij + others)
        })
        .sum())
}

/// Gradient of influencer `j`'s stage reward in its own investments:
/// `ρ_i (1 − x_ij + Σ_{ℓ≠j} b_iℓ)/(1 + Σ_ℓ b_iℓ)²`.
pub fn stage_gradient<T: Real>(
    weights: &CampaignWeights<T>,
    x: &OpinionMatrix<T>,
    b: &Allocation<T>,
    j: usize,
) -> Result<Vec<T>> {
    check_dims(weights, x, b, j)?;
    Ok((0..x.n())
        .map(|i| coord_gradient(weights.rho[i], x.get(i, j), b.get(i, j), others_sum(b, i, j)))
        .collect())
}
