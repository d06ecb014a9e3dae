use ndarray::{Array1, Array2};

use super::{brute_force_optimum, mean_of, nearest, ClusterStats, Partition};
use crate::error::{domain, JlError, Result};
use crate::geometry::squared_distance;
use crate::projection::Dataset;

/// Size, mean and variance of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub size: usize,
    pub mean: Array1<f64>,
    pub variance: f64,
}

impl ClusterSummary {
    pub fn of_members(data: &Dataset, members: &[usize]) -> Result<Self> {
        if members.is_empty() {
            return Err(domain("empty cluster"));
        }
        let mean = mean_of(data.points().view(), members);
        let sse: f64 = members
            .iter()
            .map(|&i| squared_distance(data.point(i), mean.view()))
            .sum();
        Ok(Self {
            size: members.len(),
            mean,
            variance: sse / members.len() as f64,
        })
    }
}

/// Variance of the union of two disjoint clusters from their summaries:
/// `m₁₂·VAR₁₂ = m₁·VAR₁ + m₂·VAR₂ + (m₁m₂/m₁₂)‖μ₁ - μ₂‖²`.
pub fn var_merge(a: &ClusterSummary, b: &ClusterSummary) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(JlError::Shape("cluster means differ in dimension".into()));
    }
    let (m1, m2) = (a.size as f64, b.size as f64);
    let m12 = m1 + m2;
    let gap = squared_distance(a.mean.view(), b.mean.view());
    Ok((m1 * a.variance + m2 * b.variance + m1 * m2 / m12 * gap) / m12)
}

/// [`var_merge`] on explicit memberships, rejecting shared points.
pub fn var_merge_members(data: &Dataset, c1: &[usize], c2: &[usize]) -> Result<f64> {
    if let Some(&i) = c1.iter().find(|i| c2.contains(i)) {
        return Err(JlError::Overlap(i));
    }
    var_merge(
        &ClusterSummary::of_members(data, c1)?,
        &ClusterSummary::of_members(data, c2)?,
    )
}

/// `(VAR₁·m₁₂/m₂ + VAR₂·m₁₂/m₁) / ‖μ₁ - μ₂‖²` for clusters `j1`, `j2`.
pub fn balance_quotient(stats: &ClusterStats, j1: usize, j2: usize) -> Result<f64> {
    let k = stats.k();
    if j1 == j2 || j1 >= k || j2 >= k {
        return Err(domain(format!(
            "need two distinct clusters below {k}, got {j1}, {j2}"
        )));
    }
    let dist = squared_distance(stats.centroids.row(j1), stats.centroids.row(j2));
    if dist == 0.0 {
        return Err(JlError::CoincidentCentroids(j1, j2));
    }
    let (m1, m2) = (stats.sizes[j1] as f64, stats.sizes[j2] as f64);
    let m12 = m1 + m2;
    Ok((stats.variances[j1] * m12 / m2 + stats.variances[j2] * m12 / m1) / dist)
}

/// Balance quotients of all cluster pairs and their maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBalance {
    pub p: f64,
    /// Entry `(j1, j2)` for `j1 < j2`; zero elsewhere.
    pub per_pair: Array2<f64>,
}

impl PairBalance {
    pub fn compute(stats: &ClusterStats) -> Result<Self> {
        let k = stats.k();
        let mut per_pair = Array2::zeros((k, k));
        let mut p: f64 = 0.0;
        for j1 in 0..k {
            for j2 in (j1 + 1)..k {
                let q = balance_quotient(stats, j1, j2)?;
                per_pair[[j1, j2]] = q;
                p = p.max(q);
            }
        }
        Ok(Self { p, per_pair })
    }
}

/// True iff every point is at least as close to its own centroid as to any
/// other.
pub fn is_lloyd_fixed_point(data: &Dataset, partition: &Partition) -> Result<bool> {
    let stats = ClusterStats::compute(data, partition)?;
    Ok((0..data.len()).all(|i| {
        let own = squared_distance(data.point(i), stats.centroids.row(partition.cluster_of(i)));
        own <= nearest(data.point(i), &stats.centroids).1
    }))
}

/// How far each cluster reaches toward the others along the centre line.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMeasure {
    /// `α[A][B]`: the largest scalar projection of `x - μ_A`, `x ∈ A`, onto
    /// the unit vector toward `μ_B`, over half the centre distance, clamped
    /// to `[0, 1]`. Diagonal is zero.
    pub per_pair_alpha: Array2<f64>,
    /// `2(1 - max α)`.
    pub g: f64,
    /// Half centre distances, symmetric.
    pub d_halfdist: Array2<f64>,
}

pub fn measure_gap(data: &Dataset, partition: &Partition) -> Result<GapMeasure> {
    let k = partition.k();
    if k < 2 {
        return Err(domain("the gap needs at least two clusters"));
    }
    let stats = ClusterStats::compute(data, partition)?;
    let mu = &stats.centroids;
    let members: Vec<Vec<usize>> = (0..k).map(|j| partition.members(j)).collect();
    let mut alpha = Array2::zeros((k, k));
    let mut half = Array2::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let dir = &mu.row(b) - &mu.row(a);
            let len = dir.dot(&dir).sqrt();
            if len == 0.0 {
                return Err(JlError::CoincidentCentroids(a.min(b), a.max(b)));
            }
            let d = len / 2.0;
            let reach = members[a]
                .iter()
                .map(|&i| (&data.point(i) - &mu.row(a)).dot(&dir) / len)
                .fold(f64::NEG_INFINITY, f64::max);
            alpha[[a, b]] = (reach / d).clamp(0.0, 1.0);
            half[[a, b]] = d;
        }
    }
    let max_alpha = alpha.iter().copied().fold(0.0, f64::max);
    Ok(GapMeasure {
        per_pair_alpha: alpha,
        g: 2.0 * (1.0 - max_alpha),
        d_halfdist: half,
    })
}

/// Outcome of `(1-δ)J ≤ (n/n')J' ≤ (1+δ)J` for one partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichOutcome {
    pub pass: bool,
    pub cost_original: f64,
    /// `(n/n')·J'`.
    pub cost_projected_adjusted: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `adjusted - (1-δ)J`; negative on failure.
    pub lower_margin: f64,
    /// `(1+δ)J - adjusted`; negative on failure.
    pub upper_margin: f64,
}

pub fn cost_sandwich_check(
    stats: &ClusterStats,
    stats_projected: &ClusterStats,
    n: usize,
    n_prime: usize,
    delta: f64,
) -> Result<SandwichOutcome> {
    if stats.sizes != stats_projected.sizes {
        return Err(JlError::Partition(
            "statistics belong to different partitions".into(),
        ));
    }
    if n == 0 || n_prime == 0 || n_prime > n {
        return Err(domain(format!("need 0 < n' <= n, got n={n}, n'={n_prime}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    let j = stats.cost;
    let adjusted = n as f64 / n_prime as f64 * stats_projected.cost;
    let lower_bound = (1.0 - delta) * j;
    let upper_bound = (1.0 + delta) * j;
    let lower_margin = adjusted - lower_bound;
    let upper_margin = upper_bound - adjusted;
    Ok(SandwichOutcome {
        pass: lower_margin >= 0.0 && upper_margin >= 0.0,
        cost_original: j,
        cost_projected_adjusted: adjusted,
        lower_bound,
        upper_bound,
        lower_margin,
        upper_margin,
    })
}

/// Computes both statistics for `partition` and runs [`cost_sandwich_check`].
pub fn cost_sandwich(
    data: &Dataset,
    projected: &Dataset,
    partition: &Partition,
    delta: f64,
) -> Result<SandwichOutcome> {
    if data.ids() != projected.ids() {
        return Err(JlError::MismatchedIds);
    }
    cost_sandwich_check(
        &ClusterStats::compute(data, partition)?,
        &ClusterStats::compute(projected, partition)?,
        data.dim(),
        projected.dim(),
        delta,
    )
}

/// Both global optima and the two inequalities linking them.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumTransfer {
    pub optimum: Partition,
    pub optimum_projected: Partition,
    pub cost: f64,
    pub cost_projected: f64,
    /// `(n/n')·OPT'`.
    pub adjusted: f64,
    /// `(n/n')OPT' ≤ (1+δ)OPT`.
    pub forward_pass: bool,
    /// `(1+δ)OPT - (n/n')OPT'`.
    pub forward_margin: f64,
    /// `(1-δ)OPT ≤ (n/n')OPT'`.
    pub reverse_pass: bool,
    /// `(n/n')OPT' - (1-δ)OPT`.
    pub reverse_margin: f64,
}

pub fn global_optimum_transfer_check(
    data: &Dataset,
    projected: &Dataset,
    k: usize,
    delta: f64,
) -> Result<OptimumTransfer> {
    if data.ids() != projected.ids() {
        return Err(JlError::MismatchedIds);
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    let (optimum, stats) = brute_force_optimum(data, k)?;
    let (optimum_projected, stats_projected) = brute_force_optimum(projected, k)?;
    let adjusted = data.dim() as f64 / projected.dim() as f64 * stats_projected.cost;
    let forward_margin = (1.0 + delta) * stats.cost - adjusted;
    let reverse_margin = adjusted - (1.0 - delta) * stats.cost;
    Ok(OptimumTransfer {
        optimum,
        optimum_projected,
        cost: stats.cost,
        cost_projected: stats_projected.cost,
        adjusted,
        forward_pass: forward_margin >= 0.0,
        forward_margin,
        reverse_pass: reverse_margin >= 0.0,
        reverse_margin,
    })
}
