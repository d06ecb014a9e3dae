//! Clusterability parameters: exact measurement on small instances and the
//! predicted values after a projection with error `δ`.

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, JlError, Result};
use crate::geometry::squared_distance;
use crate::kmeans::{
    brute_force_optimum, brute_force_optimum_metric, squared_distance_matrix, ClusterStats,
    Partition, METRIC_BRUTE_FORCE_LIMIT,
};
use crate::projection::Dataset;

/// Parameters an instance may or may not have; `None` means not measured or
/// not applicable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterabilityParams {
    /// `σ` with `OPT_k < σ²·OPT_{k-1}`.
    pub sigma_separatedness: Option<f64>,
    /// `(c, σ)`; only `c` is transported.
    pub approx_stability: Option<(f64, f64)>,
    /// `β`: every point is `β` times closer to its own centre than to others.
    pub centre_stability_beta: Option<f64>,
    /// `β` with deletion cost above `(1+β)·OPT`.
    pub weak_deletion_beta: Option<f64>,
    /// `s` of multiplicative perturbation robustness.
    pub mult_perturb_s: Option<f64>,
}

/// Which transported parameters fell out of their defining range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Degraded {
    pub sigma_separatedness: bool,
    pub approx_stability: bool,
    pub centre_stability: bool,
    pub weak_deletion: bool,
    pub mult_perturb: bool,
}

impl Degraded {
    pub fn any(&self) -> bool {
        self.sigma_separatedness
            || self.approx_stability
            || self.centre_stability
            || self.weak_deletion
            || self.mult_perturb
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transported {
    pub params: ClusterabilityParams,
    /// Set where the prediction is vacuous: `σ' >= 1`, `c' <= 1`, `β' <= 1`,
    /// `(1+β)' <= 1` or `s' >= 1`.
    pub degraded: Degraded,
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..0.5).contains(&delta) {
        Ok(())
    } else {
        Err(domain(format!("delta must lie in [0, 1/2), got {delta}")))
    }
}

/// Predicted parameters after a projection that keeps every squared distance
/// within `[1-δ, 1+δ]` of the original.
pub fn transport(before: &ClusterabilityParams, delta: f64) -> Result<Transported> {
    check_delta(delta)?;
    let up = (1.0 + delta) / (1.0 - delta);
    let down = (1.0 - delta) / (1.0 + delta);
    let mut params = ClusterabilityParams::default();
    let mut degraded = Degraded::default();

    if let Some(s) = before.sigma_separatedness {
        if !(s > 0.0 && s < 1.0) {
            return Err(domain(format!("sigma must lie in (0, 1), got {s}")));
        }
        let after = s * up.sqrt();
        degraded.sigma_separatedness = after >= 1.0;
        params.sigma_separatedness = Some(after);
    }
    if let Some((c, sigma)) = before.approx_stability {
        if c <= 1.0 {
            return Err(domain(format!("c must exceed 1, got {c}")));
        }
        let after = c * down;
        degraded.approx_stability = after <= 1.0;
        params.approx_stability = Some((after, sigma));
    }
    if let Some(beta) = before.centre_stability_beta {
        if beta <= 1.0 {
            return Err(domain(format!(
                "centre-stability beta must exceed 1, got {beta}"
            )));
        }
        let after = beta * down.sqrt();
        degraded.centre_stability = after <= 1.0;
        params.centre_stability_beta = Some(after);
    }
    if let Some(beta) = before.weak_deletion_beta {
        if beta <= 0.0 {
            return Err(domain(format!(
                "weak-deletion beta must be positive, got {beta}"
            )));
        }
        // (1+β)·down - 1, arranged to return β unchanged at δ = 0.
        let after = beta * down + (down - 1.0);
        degraded.weak_deletion = after <= 0.0;
        params.weak_deletion_beta = Some(after);
    }
    if let Some(s) = before.mult_perturb_s {
        if !(s > 0.0 && s < 1.0) {
            return Err(domain(format!("s must lie in (0, 1), got {s}")));
        }
        // Perturbation band on the projected data that a band of `s` on the
        // original can absorb, taking the slack factor to 1.
        let after = s * (1.0 + delta) / (1.0 - delta).powi(2);
        degraded.mult_perturb = after >= 1.0;
        params.mult_perturb_s = Some(after);
    }
    Ok(Transported { params, degraded })
}

/// Robustness level the original data must have so that the projected data
/// is robust at `s_p`, with slack `nu` in `(0, 1]`: `s_p·ν·(1-δ)²/(1+δ)`.
pub fn required_original_s(s_p: f64, nu: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(s_p > 0.0 && s_p < 1.0) || !(nu > 0.0 && nu <= 1.0) {
        return Err(domain(format!(
            "need s_p in (0, 1) and nu in (0, 1], got {s_p}, {nu}"
        )));
    }
    Ok(s_p * nu * (1.0 - delta).powi(2) / (1.0 + delta))
}

/// `sqrt(OPT_k / OPT_{k-1})`; the instance is σ-separated for every larger σ.
pub fn measure_sigma_separatedness(data: &Dataset, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(domain("sigma-separatedness needs k >= 2"));
    }
    let opt_k = brute_force_optimum(data, k)?.1.cost;
    let opt_km1 = brute_force_optimum(data, k - 1)?.1.cost;
    if opt_km1 == 0.0 {
        return Err(JlError::Degenerate(format!(
            "optimal cost with {} clusters is zero",
            k - 1
        )));
    }
    Ok((opt_k / opt_km1).sqrt())
}

/// Smallest ratio of a point's distance to a foreign centroid over its
/// distance to its own. Points on their own centroid impose nothing, so the
/// result can be `+∞`. A value `<= 1` means the partition is not
/// centre-stable.
pub fn measure_centre_stability(data: &Dataset, partition: &Partition) -> Result<f64> {
    if partition.k() < 2 {
        return Err(domain("centre stability needs k >= 2"));
    }
    let stats = ClusterStats::compute(data, partition)?;
    let mut beta = f64::INFINITY;
    for i in 0..data.len() {
        let own_c = partition.cluster_of(i);
        let own = squared_distance(data.point(i), stats.centroids.row(own_c));
        if own == 0.0 {
            continue;
        }
        for j in (0..partition.k()).filter(|&j| j != own_c) {
            let other = squared_distance(data.point(i), stats.centroids.row(j));
            beta = beta.min((other / own).sqrt());
        }
    }
    Ok(beta)
}

/// Centre stability of the exhaustive optimum.
pub fn measure_optimal_centre_stability(data: &Dataset, k: usize) -> Result<f64> {
    let (optimum, _) = brute_force_optimum(data, k)?;
    measure_centre_stability(data, &optimum)
}

/// `min_{j ≠ j'} J(merge j into j') / OPT` over the optimal partition; the
/// instance is `(1+β)`-weakly-deletion-stable for every smaller `1+β`.
pub fn measure_weak_deletion_stability(data: &Dataset, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(domain("weak deletion stability needs k >= 2"));
    }
    let (optimum, stats) = brute_force_optimum(data, k)?;
    if stats.cost == 0.0 {
        return Err(JlError::Degenerate("optimal cost is zero".into()));
    }
    let mut best = f64::INFINITY;
    for j in 0..k {
        for target in (0..k).filter(|&t| t != j) {
            let labels: Vec<usize> = optimum
                .assignments()
                .iter()
                .map(|&c| {
                    let c = if c == j { target } else { c };
                    if c > j {
                        c - 1
                    } else {
                        c
                    }
                })
                .collect();
            let merged = Partition::new(labels, k - 1)?;
            best = best.min(ClusterStats::compute(data, &merged)?.cost);
        }
    }
    Ok(best / stats.cost)
}

/// Multiplies every distance (not squared distance) by an independent factor
/// drawn log-uniformly from `[s, 1/s]`.
pub fn perturb_metric(d2: &Array2<f64>, s: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let m = d2.nrows();
    let span = -s.ln();
    let mut out = d2.clone();
    for i in 0..m {
        for j in (i + 1)..m {
            let f = (rng.random_range(-span..=span)).exp();
            out[[i, j]] = d2[[i, j]] * f * f;
            out[[j, i]] = out[[i, j]];
        }
    }
    out
}

/// Samples `trials` perturbed metrics and reports whether every one keeps the
/// optimal partition. A single failure falsifies robustness at `s`; success
/// proves nothing.
pub fn check_perturbation_robustness_metric(
    d2: &Array2<f64>,
    k: usize,
    s: f64,
    trials: u64,
    seed: u64,
) -> Result<bool> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(domain(format!("s must lie in (0, 1], got {s}")));
    }
    if k < 2 {
        return Err(domain("perturbation robustness needs k >= 2"));
    }
    let (optimum, _) = brute_force_optimum_metric(d2, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let perturbed = perturb_metric(d2, s, &mut rng);
        let (p, _) = brute_force_optimum_metric(&perturbed, k)?;
        if !p.same_up_to_relabeling(&optimum) {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn check_perturbation_robustness(
    data: &Dataset,
    k: usize,
    s: f64,
    trials: u64,
    seed: u64,
) -> Result<bool> {
    if data.len() > METRIC_BRUTE_FORCE_LIMIT {
        return Err(JlError::TooLarge {
            m: data.len(),
            limit: METRIC_BRUTE_FORCE_LIMIT,
        });
    }
    check_perturbation_robustness_metric(&squared_distance_matrix(data), k, s, trials, seed)
}

/// Exact σ-separatedness, optimal centre stability and weak deletion `β`.
pub fn measure_params(data: &Dataset, k: usize) -> Result<ClusterabilityParams> {
    Ok(ClusterabilityParams {
        sigma_separatedness: Some(measure_sigma_separatedness(data, k)?),
        centre_stability_beta: Some(measure_optimal_centre_stability(data, k)?),
        weak_deletion_beta: Some(measure_weak_deletion_stability(data, k)? - 1.0),
        ..Default::default()
    })
}

/// Before/predicted/measured parameters for one projection.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportReport {
    pub before: ClusterabilityParams,
    pub predicted_after: ClusterabilityParams,
    pub measured_after: Option<ClusterabilityParams>,
    pub degraded: Degraded,
    pub delta: f64,
    pub epsilon: f64,
}

/// One CSV row of a [`TransportReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransportRow {
    pub parameter: &'static str,
    pub before: Option<f64>,
    pub predicted_after: Option<f64>,
    pub measured_after: Option<f64>,
    /// `None` when there is nothing to compare.
    pub bound_satisfied: Option<bool>,
}

impl TransportReport {
    pub fn new(
        before: ClusterabilityParams,
        measured_after: Option<ClusterabilityParams>,
        delta: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let t = transport(&before, delta)?;
        Ok(Self {
            before,
            predicted_after: t.params,
            measured_after,
            degraded: t.degraded,
            delta,
            epsilon,
        })
    }

    pub fn rows(&self) -> Vec<TransportRow> {
        let after = self.measured_after.unwrap_or_default();
        // Upper bounds for σ and s, lower bounds for the others.
        let row =
            |parameter, before: Option<f64>, pred: Option<f64>, meas: Option<f64>, upper: bool| {
                let bound_satisfied = match (pred, meas) {
                    (Some(p), Some(m)) => Some(if upper { m <= p } else { m >= p }),
                    _ => None,
                };
                TransportRow {
                    parameter,
                    before,
                    predicted_after: pred,
                    measured_after: meas,
                    bound_satisfied,
                }
            };
        let one_plus = |b: Option<f64>| b.map(|b| 1.0 + b);
        vec![
            row(
                "sigma_separatedness",
                self.before.sigma_separatedness,
                self.predicted_after.sigma_separatedness,
                after.sigma_separatedness,
                true,
            ),
            row(
                "approx_stability_c",
                self.before.approx_stability.map(|p| p.0),
                self.predicted_after.approx_stability.map(|p| p.0),
                after.approx_stability.map(|p| p.0),
                false,
            ),
            row(
                "centre_stability_beta",
                self.before.centre_stability_beta,
                self.predicted_after.centre_stability_beta,
                after.centre_stability_beta,
                false,
            ),
            row(
                "weak_deletion_ratio",
                one_plus(self.before.weak_deletion_beta),
                one_plus(self.predicted_after.weak_deletion_beta),
                one_plus(after.weak_deletion_beta),
                false,
            ),
            row(
                "mult_perturb_s",
                self.before.mult_perturb_s,
                self.predicted_after.mult_perturb_s,
                after.mult_perturb_s,
                true,
            ),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "parameter",
            "before",
            "predicted_after",
            "measured_after",
            "theorem_bound_satisfied",
        ])?;
        let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in self.rows() {
            w.write_record([
                r.parameter.to_string(),
                f(r.before),
                f(r.predicted_after),
                f(r.measured_after),
                r.bound_satisfied.map(|b| b.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn line(xs: &[f64]) -> Dataset {
        Dataset::from_points(Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap()).unwrap()
    }

    fn full() -> ClusterabilityParams {
        ClusterabilityParams {
            sigma_separatedness: Some(0.3),
            approx_stability: Some((2.0, 0.1)),
            centre_stability_beta: Some(3.0),
            weak_deletion_beta: Some(4.0),
            mult_perturb_s: Some(0.5),
        }
    }

    #[test]
    fn identity_at_zero_delta() {
        let t = transport(&full(), 0.0).unwrap();
        assert_eq!(t.params, full());
        assert!(!t.degraded.any());
    }

    #[test]
    fn transport_values() {
        let p = ClusterabilityParams {
            sigma_separatedness: Some(0.3),
            ..Default::default()
        };
        let s = transport(&p, 0.05)
            .unwrap()
            .params
            .sigma_separatedness
            .unwrap();
        assert!((s - 0.315_394_489_822_708_1).abs() < 1e-15);

        let p = ClusterabilityParams {
            centre_stability_beta: Some(1.01),
            ..Default::default()
        };
        let t = transport(&p, 0.05).unwrap();
        assert!((t.params.centre_stability_beta.unwrap() - 0.960_701_628_523_455_3).abs() < 1e-15);
        assert!(t.degraded.centre_stability);

        let p = ClusterabilityParams {
            weak_deletion_beta: Some(0.05),
            ..Default::default()
        };
        assert!(transport(&p, 0.1).unwrap().degraded.weak_deletion);
        assert!(transport(&full(), 0.5).is_err());
    }

    #[test]
    fn required_s_inverts_transport_at_unit_slack() {
        let s = required_original_s(0.8, 1.0, 0.1).unwrap();
        let p = ClusterabilityParams {
            mult_perturb_s: Some(s),
            ..Default::default()
        };
        let back = transport(&p, 0.1).unwrap().params.mult_perturb_s.unwrap();
        assert!((back - 0.8).abs() < 1e-15);
    }

    #[test]
    fn degrades_monotonically() {
        let mut prev = transport(&full(), 0.0).unwrap().params;
        for i in 1..50 {
            let cur = transport(&full(), i as f64 * 0.01).unwrap().params;
            assert!(cur.sigma_separatedness > prev.sigma_separatedness);
            assert!(cur.approx_stability.unwrap().0 < prev.approx_stability.unwrap().0);
            assert!(cur.centre_stability_beta < prev.centre_stability_beta);
            assert!(cur.weak_deletion_beta < prev.weak_deletion_beta);
            assert!(cur.mult_perturb_s > prev.mult_perturb_s);
            prev = cur;
        }
    }

    #[test]
    fn line_instance() {
        let data = line(&[0.0, 1.0, 10.0, 11.0]);
        let sigma = measure_sigma_separatedness(&data, 2).unwrap();
        assert!((sigma - (1.0f64 / 101.0).sqrt()).abs() < 1e-15);
        assert_eq!(measure_weak_deletion_stability(&data, 2).unwrap(), 101.0);
    }

    #[test]
    fn degenerate_cases() {
        let points = line(&[0.0, 0.0, 5.0, 5.0]);
        assert_eq!(measure_sigma_separatedness(&points, 2).unwrap(), 0.0);
        assert!(matches!(
            measure_weak_deletion_stability(&points, 2),
            Err(JlError::Degenerate(_))
        ));
        let p = Partition::new(vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(
            measure_centre_stability(&points, &p).unwrap(),
            f64::INFINITY
        );
        let single = line(&[2.0, 2.0, 2.0]);
        assert!(matches!(
            measure_sigma_separatedness(&single, 2),
            Err(JlError::Degenerate(_))
        ));
    }

    #[test]
    fn centre_stability_on_a_line() {
        // Centroids 0 and 3; point 1 (cluster {-1, 1}) is 1 from its centre
        // and 2 from the other.
        let data = line(&[-1.0, 1.0, 3.0]);
        let p = Partition::new(vec![0, 0, 1], 2).unwrap();
        assert_eq!(measure_centre_stability(&data, &p).unwrap(), 2.0);
    }

    #[test]
    fn perturbation_checks() {
        let far = Dataset::from_points(array![
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [100.0, 0.0],
            [100.1, 0.0],
            [100.0, 0.1]
        ])
        .unwrap();
        assert!(check_perturbation_robustness(&far, 2, 0.9, 1000, 1).unwrap());
        assert!(check_perturbation_robustness(&far, 2, 1.0, 5, 1).unwrap());

        // A square, slightly stretched: two splits differ by about 10 %.
        let tied =
            Dataset::from_points(array![[0.0, 0.0], [1.05, 0.0], [1.05, 1.0], [0.0, 1.0]]).unwrap();
        assert!(!check_perturbation_robustness(&tied, 2, 0.5, 50, 1).unwrap());
        let big = Dataset::from_points(Array2::zeros((13, 1))).unwrap();
        assert!(check_perturbation_robustness(&big, 2, 0.9, 1, 0).is_err());
    }

    #[test]
    fn perturbation_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = Array2::from_shape_simple_fn((8, 3), || {
            let v: f64 = StandardNormal.sample(&mut rng);
            0.3 * v
        });
        x.slice_mut(ndarray::s![4.., 0]).mapv_inplace(|v| v + 20.0);
        let data = Dataset::from_points(x).unwrap();
        let d2 = squared_distance_matrix(&data);
        let (nu, s_p) = (0.9, 0.8);
        assert!(check_perturbation_robustness_metric(&d2, 2, nu * s_p, 200, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let q_p = perturb_metric(&d2, nu, &mut rng);
            assert!(check_perturbation_robustness_metric(&q_p, 2, s_p, 50, 3).unwrap());
        }
    }

    #[test]
    fn report_csv() {
        let before = full();
        let measured = ClusterabilityParams {
            sigma_separatedness: Some(0.31),
            ..Default::default()
        };
        let r = TransportReport::new(before, Some(measured), 0.1, 0.1).unwrap();
        let rows = r.rows();
        assert_eq!(rows[0].bound_satisfied, Some(true));
        assert_eq!(rows[2].bound_satisfied, None);
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with(
            "parameter,before,predicted_after,measured_after,theorem_bound_satisfied\n"
        ));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sigma_is_scale_invariant(seed in any::<u64>(), a in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_simple_fn((7, 2), || StandardNormal.sample(&mut rng));
            let data = Dataset::from_points(x.clone()).unwrap();
            let scaled = Dataset::from_points(x * a).unwrap();
            let s0 = measure_sigma_separatedness(&data, 2).unwrap();
            let s1 = measure_sigma_separatedness(&scaled, 2).unwrap();
            prop_assert!((s0 - s1).abs() <= 1e-9 * s0);
        }

        #[test]
        fn centre_stability_rigid_invariant(seed in any::<u64>(), theta in 0.0f64..6.3, tx in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_simple_fn((8, 2), || StandardNormal.sample(&mut rng));
            let rot = array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
            let moved = x.dot(&rot.t()) + tx;
            let p = Partition::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
            let b0 = measure_centre_stability(&Dataset::from_points(x).unwrap(), &p).unwrap();
            let b1 = measure_centre_stability(&Dataset::from_points(moved).unwrap(), &p).unwrap();
            prop_assert!((b0 - b1).abs() <= 1e-9 * b0);
        }
    }
}
