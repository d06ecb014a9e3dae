//! Pairwise squared distances, the distortion-band report and Monte-Carlo
//! failure-rate estimation.

use std::io::Write;

use ndarray::{s, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{domain, JlError, Result};
use crate::projection::{Dataset, ProjectionOperator};
use crate::stats::{wilson_interval, Z95};

/// Rows per block of the Gram product.
pub const DEFAULT_BLOCK_ROWS: usize = 256;

/// Below this fraction of `‖u‖² + ‖v‖²` the Gram-matrix form loses too many
/// digits to cancellation and the pair is recomputed from the difference.
const CANCELLATION_GUARD: f64 = 1e-4;

/// Squared distances of all `m(m-1)/2` unordered pairs, row-major over `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances {
    m: usize,
    values: Vec<f64>,
}

impl PairwiseDistances {
    pub fn compute(points: ArrayView2<'_, f64>) -> Self {
        Self::compute_blocked(points, DEFAULT_BLOCK_ROWS)
    }

    pub fn compute_blocked(points: ArrayView2<'_, f64>, block_rows: usize) -> Self {
        let m = points.nrows();
        let block_rows = block_rows.max(1);
        let mut values = vec![0.0; m * m.saturating_sub(1) / 2];
        let norms: Vec<f64> = points.rows().into_iter().map(|r| r.dot(&r)).collect();

        let mut chunks = Vec::new();
        let mut rest = values.as_mut_slice();
        let mut start = 0;
        while start < m {
            let end = (start + block_rows).min(m);
            let len = pair_index(m, end.min(m - 1), end.min(m - 1) + 1).min(m * (m - 1) / 2)
                - pair_index_start(m, start);
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            chunks.push((start, end, head));
            rest = tail;
            start = end;
        }

        chunks.into_par_iter().for_each(|(i0, i1, out)| {
            let gram = points
                .slice(s![i0..i1, ..])
                .dot(&points.slice(s![i0.., ..]).t());
            let mut k = 0;
            for i in i0..i1 {
                for j in (i + 1)..m {
                    let scale = norms[i] + norms[j];
                    let mut d = scale - 2.0 * gram[[i - i0, j - i0]];
                    if d <= CANCELLATION_GUARD * scale {
                        d = squared_distance(points.row(i), points.row(j));
                    }
                    out[k] = d;
                    k += 1;
                }
            }
        });
        Self { m, values }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Squared distance between points `i` and `j`, `i != j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.values[pair_index(self.m, a, b)]
    }
}

fn pair_index_start(m: usize, i: usize) -> usize {
    // Number of pairs whose first index is below i.
    i * m - i * (i + 1) / 2
}

fn pair_index(m: usize, i: usize, j: usize) -> usize {
    pair_index_start(m, i) + (j - i - 1)
}

/// `‖u - v‖²` accumulated coordinate by coordinate.
pub fn squared_distance(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Per-pair adjusted quotients `(n/n')‖u'-v'‖² / ‖u-v‖²` against the band
/// `[1-δ, 1+δ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    pub quotients: Vec<f64>,
    pub band: (f64, f64),
    pub violations: u64,
    pub pair_count: u64,
    /// Pairs with zero original distance; excluded from `quotients`.
    pub coincident_pairs: u64,
    pub success: bool,
}

/// Streaming counterpart of [`DistortionReport`] that keeps no quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionSummary {
    pub band: (f64, f64),
    pub violations: u64,
    pub pair_count: u64,
    pub coincident_pairs: u64,
    pub min_quotient: f64,
    pub max_quotient: f64,
}

impl DistortionSummary {
    pub fn success(&self) -> bool {
        self.violations == 0
    }
}

fn band_for(delta: f64) -> Result<(f64, f64)> {
    if delta > 0.0 && delta < 1.0 {
        Ok((1.0 - delta, 1.0 + delta))
    } else {
        Err(domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn check_pairs(original: &PairwiseDistances, projected: &PairwiseDistances) -> Result<()> {
    if original.m != projected.m {
        return Err(JlError::MismatchedIds);
    }
    if original.is_empty() {
        return Err(JlError::Degenerate("fewer than two points".into()));
    }
    Ok(())
}

impl DistortionReport {
    pub fn from_pairwise(
        original: &PairwiseDistances,
        projected: &PairwiseDistances,
        squared_scale: f64,
        delta: f64,
    ) -> Result<Self> {
        let band = band_for(delta)?;
        check_pairs(original, projected)?;
        let mut quotients = Vec::with_capacity(original.len());
        let mut coincident = 0;
        let mut violations = 0;
        for (&d, &dp) in original.values.iter().zip(&projected.values) {
            if d == 0.0 {
                coincident += 1;
                continue;
            }
            let q = squared_scale * dp / d;
            if q < band.0 || q > band.1 {
                violations += 1;
            }
            quotients.push(q);
        }
        if quotients.is_empty() {
            return Err(JlError::Degenerate("all points coincide".into()));
        }
        Ok(Self {
            quotients,
            band,
            violations,
            pair_count: original.len() as u64,
            coincident_pairs: coincident,
            success: violations == 0,
        })
    }

    pub fn min_quotient(&self) -> f64 {
        self.quotients.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_quotient(&self) -> f64 {
        self.quotients
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `δ/20`.
    pub fn default_bin_width(&self) -> f64 {
        (self.band.1 - self.band.0) / 40.0
    }

    /// Bins `[1 + i·w, 1 + (i+1)·w)` covering every quotient, so the band
    /// edges fall on bin edges whenever `δ/w` is an integer.
    pub fn histogram(&self, bin_width: f64) -> Vec<HistogramBin> {
        histogram(&self.quotients, 1.0, bin_width)
    }
}

impl DistortionSummary {
    pub fn from_pairwise(
        original: &PairwiseDistances,
        projected: &PairwiseDistances,
        squared_scale: f64,
        delta: f64,
    ) -> Result<Self> {
        let band = band_for(delta)?;
        check_pairs(original, projected)?;
        let mut s = Self {
            band,
            violations: 0,
            pair_count: original.len() as u64,
            coincident_pairs: 0,
            min_quotient: f64::INFINITY,
            max_quotient: f64::NEG_INFINITY,
        };
        for (&d, &dp) in original.values.iter().zip(&projected.values) {
            if d == 0.0 {
                s.coincident_pairs += 1;
                continue;
            }
            let q = squared_scale * dp / d;
            if q < band.0 || q > band.1 {
                s.violations += 1;
            }
            s.min_quotient = s.min_quotient.min(q);
            s.max_quotient = s.max_quotient.max(q);
        }
        if s.coincident_pairs == s.pair_count {
            return Err(JlError::Degenerate("all points coincide".into()));
        }
        Ok(s)
    }
}

fn check_datasets(original: &Dataset, projected: &Dataset) -> Result<()> {
    if original.ids() != projected.ids() {
        return Err(JlError::MismatchedIds);
    }
    if projected.dim() > original.dim() {
        return Err(JlError::Shape(format!(
            "projected dimension {} exceeds original {}",
            projected.dim(),
            original.dim()
        )));
    }
    Ok(())
}

/// Full report for an original/projected pair. Equal dimensions are accepted
/// as a diagnostic identity mode with adjustment factor 1.
pub fn distortion_report(
    original: &Dataset,
    projected: &Dataset,
    delta: f64,
) -> Result<DistortionReport> {
    band_for(delta)?;
    check_datasets(original, projected)?;
    let scale = original.dim() as f64 / projected.dim() as f64;
    DistortionReport::from_pairwise(
        &PairwiseDistances::compute(original.points().view()),
        &PairwiseDistances::compute(projected.points().view()),
        scale,
        delta,
    )
}

pub fn distortion_summary(
    original: &Dataset,
    projected: &Dataset,
    delta: f64,
) -> Result<DistortionSummary> {
    band_for(delta)?;
    check_datasets(original, projected)?;
    let scale = original.dim() as f64 / projected.dim() as f64;
    DistortionSummary::from_pairwise(
        &PairwiseDistances::compute(original.points().view()),
        &PairwiseDistances::compute(projected.points().view()),
        scale,
        delta,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Fixed-width histogram with bins anchored at `origin`; empty bins between
/// the extremes are kept.
pub fn histogram(values: &[f64], origin: f64, bin_width: f64) -> Vec<HistogramBin> {
    assert!(bin_width > 0.0, "bin width must be positive");
    if values.is_empty() {
        return Vec::new();
    }
    let index = |v: f64| ((v - origin) / bin_width).floor() as i64;
    let (lo, hi) = values.iter().fold((i64::MAX, i64::MIN), |(lo, hi), &v| {
        (lo.min(index(v)), hi.max(index(v)))
    });
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for &v in values {
        counts[(index(v) - lo) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let idx = lo + i as i64;
            HistogramBin {
                lo: origin + idx as f64 * bin_width,
                hi: origin + (idx + 1) as f64 * bin_width,
                count,
            }
        })
        .collect()
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for b in bins {
        w.write_record([
            format!("{}", b.lo),
            format!("{}", b.hi),
            b.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureRateEstimate {
    pub trials: u64,
    pub failures: u64,
    pub rate: f64,
    pub wilson_interval: (f64, f64),
}

/// Runs `trials` projections with seeds `base_seed + t` and counts the ones
/// with at least one pair outside the band.
pub fn estimate_failure_rate(
    data: &Dataset,
    n_prime: usize,
    delta: f64,
    trials: u64,
    base_seed: u64,
) -> Result<FailureRateEstimate> {
    band_for(delta)?;
    if trials == 0 {
        return Err(domain("trials must be >= 1"));
    }
    let original = PairwiseDistances::compute(data.points().view());
    let mut failures = 0;
    for t in 0..trials {
        let op = ProjectionOperator::build(data.dim(), n_prime, base_seed.wrapping_add(t))?;
        let projected = op.project(data)?;
        let summary = DistortionSummary::from_pairwise(
            &original,
            &PairwiseDistances::compute(projected.points().view()),
            op.squared_scale(),
            delta,
        )?;
        if !summary.success() {
            failures += 1;
        }
    }
    Ok(FailureRateEstimate {
        trials,
        failures,
        rate: failures as f64 / trials as f64,
        wilson_interval: wilson_interval(failures, trials, Z95),
    })
}
