//! Gaussian mixtures on a regular simplex with a guaranteed relative gap.
//!
//! Centres sit at the vertices of a regular simplex with edge
//! `centre_distance`. Points are isotropic normal around their centre and
//! are rejected when they reach further than `α·d` toward any other centre,
//! `α = 1 - target_gap/2`, `d` half the centre distance. Each cluster is then
//! shifted so its empirical mean is exactly the vertex, and any point that
//! the shift pushed over the limit is redrawn.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, JlError, Result};
use crate::kmeans::{is_lloyd_fixed_point, measure_gap, Partition};
use crate::projection::Dataset;

/// Acceptance below this fraction means the mixture spec cannot be met.
const MIN_ACCEPTANCE: f64 = 0.01;
/// Draws before the acceptance rate is judged.
const MIN_DRAWS: u64 = 1000;
const MAX_RECENTER_ROUNDS: usize = 200;
const MAX_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub k: usize,
    pub sizes: Vec<usize>,
    pub dim: usize,
    pub centre_distance: f64,
    pub cluster_sigma: f64,
    /// In `(0, 2]`.
    pub target_gap: f64,
    pub seed: u64,
}

impl MixtureSpec {
    /// `k` clusters of `size` points each.
    pub fn balanced(
        k: usize,
        size: usize,
        dim: usize,
        centre_distance: f64,
        cluster_sigma: f64,
        target_gap: f64,
        seed: u64,
    ) -> Self {
        Self {
            k,
            sizes: vec![size; k],
            dim,
            centre_distance,
            cluster_sigma,
            target_gap,
            seed,
        }
    }

    pub fn m(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.sizes.len() != self.k {
            return Err(domain(format!(
                "need k >= 1 and one size per cluster (k={}, {} sizes)",
                self.k,
                self.sizes.len()
            )));
        }
        if self.sizes.contains(&0) {
            return Err(domain("cluster sizes must be positive"));
        }
        if self.dim == 0 || self.dim + 1 < self.k {
            return Err(domain(format!(
                "a {}-vertex simplex needs dim >= {}, got {}",
                self.k,
                self.k - 1,
                self.dim
            )));
        }
        if !(self.centre_distance > 0.0 && self.centre_distance.is_finite()) {
            return Err(domain("centre_distance must be positive"));
        }
        if !(self.cluster_sigma >= 0.0 && self.cluster_sigma.is_finite()) {
            return Err(domain("cluster_sigma must be nonnegative"));
        }
        if !(self.target_gap > 0.0 && self.target_gap <= 2.0) {
            return Err(domain(format!(
                "target_gap must lie in (0, 2], got {}",
                self.target_gap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub data: Dataset,
    pub truth: Partition,
    /// `k x dim` simplex vertices.
    pub centres: Array2<f64>,
    /// Seed that produced the instance; differs from `MixtureSpec::seed` when an
    /// earlier draw missed the gap or was not a Lloyd fixed point.
    pub seed_used: u64,
}

const GAUSSIAN_STREAM: u64 = 1 << 62;

/// Standard normal `m x n` points with ids `0..m`.
pub fn gaussian_points(m: usize, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(GAUSSIAN_STREAM);
    let points = Array2::from_shape_simple_fn((m, n), || StandardNormal.sample(&mut rng));
    Dataset::from_points(points)
}

/// Vertices of a regular simplex with unit-free edge length `edge`, embedded
/// in the first `k-1` coordinates of `R^dim`.
pub fn simplex_centres(k: usize, dim: usize, edge: f64) -> Array2<f64> {
    // Helmert basis of the plane orthogonal to (1, ..., 1) in R^k; the
    // standard basis vectors have pairwise distance √2 there.
    let mut c = Array2::zeros((k, dim));
    for r in 1..k {
        let norm = ((r * (r + 1)) as f64).sqrt();
        for j in 0..k {
            let h = if j < r {
                1.0
            } else if j == r {
                -(r as f64)
            } else {
                0.0
            };
            c[[j, r - 1]] = h / norm * edge / std::f64::consts::SQRT_2;
        }
    }
    c
}

pub fn generate(spec: &MixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let centres = simplex_centres(spec.k, spec.dim, spec.centre_distance);
    let labels: Vec<usize> = spec
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j, s))
        .collect();
    let truth = Partition::new(labels, spec.k)?;

    for attempt in 0..MAX_ATTEMPTS {
        let seed = spec.seed.wrapping_add(attempt);
        let blocks: Vec<Array2<f64>> = (0..spec.k)
            .into_par_iter()
            .map(|j| sample_cluster(spec, &centres, j, seed))
            .collect::<Result<_>>()?;
        let mut points = Array2::zeros((spec.m(), spec.dim));
        let mut row = 0;
        for b in &blocks {
            points
                .slice_mut(ndarray::s![row..row + b.nrows(), ..])
                .assign(b);
            row += b.nrows();
        }
        let data = Dataset::from_points(points)?;
        let gap_met = spec.k < 2
            || spec.cluster_sigma == 0.0
            || measure_gap(&data, &truth)?.g >= spec.target_gap;
        if gap_met && is_lloyd_fixed_point(&data, &truth)? {
            return Ok(Mixture {
                data,
                truth,
                centres,
                seed_used: seed,
            });
        }
    }
    Err(JlError::InfeasibleSpec(format!(
        "no draw in {MAX_ATTEMPTS} met the gap and fixed-point conditions"
    )))
}

/// Unit directions from centre `j` toward every other centre, with the
/// largest admissible reach `α·d` along each.
fn limits(spec: &MixtureSpec, centres: &Array2<f64>, j: usize) -> Vec<(Array1<f64>, f64)> {
    // Shaved so that rounding in the empirical centroids cannot push the
    // measured gap below the target.
    let alpha = 1.0 - spec.target_gap / 2.0 - 1e-9;
    (0..spec.k)
        .filter(|&b| b != j)
        .map(|b| {
            let dir = &centres.row(b) - &centres.row(j);
            let len = dir.dot(&dir).sqrt();
            (dir / len, alpha * len / 2.0)
        })
        .collect()
}

fn within(offset: ndarray::ArrayView1<'_, f64>, limits: &[(Array1<f64>, f64)]) -> bool {
    limits.iter().all(|(u, lim)| offset.dot(u) <= *lim)
}

fn sample_cluster(
    spec: &MixtureSpec,
    centres: &Array2<f64>,
    j: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let size = spec.sizes[j];
    let mu = centres.row(j);
    let mut block = Array2::zeros((size, spec.dim));
    if spec.cluster_sigma == 0.0 {
        for mut r in block.rows_mut() {
            r.assign(&mu);
        }
        return Ok(block);
    }
    let lims = limits(spec, centres, j);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    let mut draws = 0u64;
    let mut accepted = 0u64;
    let mut draw = |rng: &mut ChaCha8Rng| -> Result<Array1<f64>> {
        loop {
            draws += 1;
            let z: Array1<f64> =
                Array1::from_shape_simple_fn(spec.dim, || StandardNormal.sample(rng));
            let offset = z * spec.cluster_sigma;
            if within(offset.view(), &lims) {
                accepted += 1;
                return Ok(offset);
            }
            if draws >= MIN_DRAWS && (accepted as f64) < MIN_ACCEPTANCE * draws as f64 {
                return Err(JlError::InfeasibleSpec(format!(
                    "cluster {j}: acceptance {accepted}/{draws} with sigma {} and gap {}",
                    spec.cluster_sigma, spec.target_gap
                )));
            }
        }
    };

    // Offsets from the centre; recentred so their mean is zero.
    let mut offsets = Array2::zeros((size, spec.dim));
    for mut r in offsets.rows_mut() {
        r.assign(&draw(&mut rng)?);
    }
    for _ in 0..MAX_RECENTER_ROUNDS {
        let mean = offsets.mean_axis(ndarray::Axis(0)).expect("nonempty");
        offsets -= &mean;
        let bad: Vec<usize> = (0..size)
            .filter(|&i| !within(offsets.row(i), &lims))
            .collect();
        if bad.is_empty() {
            for (mut out, off) in block.rows_mut().into_iter().zip(offsets.rows()) {
                out.assign(&(&mu + &off));
            }
            return Ok(block);
        }
        for i in bad {
            offsets.row_mut(i).assign(&draw(&mut rng)?);
        }
    }
    Err(JlError::InfeasibleSpec(format!(
        "cluster {j} could not be recentred within the gap"
    )))
}
