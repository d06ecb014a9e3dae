//! Seeded Monte-Carlo drivers for the k-means and clusterability transfer
//! statements. Every trial `t` derives all of its randomness from
//! `base_seed + t`, so a single trial can be replayed in isolation.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clusterability::{
    check_perturbation_robustness, measure_optimal_centre_stability, measure_sigma_separatedness,
    measure_weak_deletion_stability, transport, ClusterabilityParams,
};
use crate::datagen::{gaussian_points, generate, MixtureSpec};
use crate::dimension::{
    converse_gap_delta_bound, gap_delta_bound, n_prime_explicit, DimensionRequest,
};
use crate::error::{domain, Result};
use crate::kmeans::{
    brute_force_optimum, cost_sandwich, global_optimum_transfer_check, is_lloyd_fixed_point, lloyd,
    measure_gap, ClusterStats, LloydInit, PairBalance, Partition,
};
use crate::projection::{Dataset, OperatorSpec, ProjectionOperator};
use crate::stats::{success_rate_floor, PassRate};

const LLOYD_MAX_ITERS: usize = 300;

/// Pass count of one harness against the floor implied by its failure
/// probability.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessOutcome {
    pub label: String,
    pub rate: PassRate,
    /// Failure probability the statement allows: `ε`, or `2ε` where two
    /// projections are involved.
    pub failure: f64,
}

impl HarnessOutcome {
    pub fn floor(&self) -> f64 {
        success_rate_floor(self.failure, self.rate.trials)
    }

    pub fn cleared(&self) -> bool {
        self.rate.clears(self.failure)
    }
}

impl fmt::Display for HarnessOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}/{} passed (rate {:.4}, floor {:.4}) {}",
            self.label,
            self.rate.passes,
            self.rate.trials,
            self.rate.rate(),
            self.floor(),
            if self.cleared() { "ok" } else { "below floor" }
        )
    }
}

/// Independent sub-seeds for the parts of one trial.
struct TrialSeeds {
    data: u64,
    projection: u64,
    lloyd: u64,
    partitions: u64,
}

impl TrialSeeds {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            data: rng.next_u64(),
            projection: rng.next_u64(),
            lloyd: rng.next_u64(),
            partitions: rng.next_u64(),
        }
    }
}

fn theorem_n_prime(m: usize, epsilon: f64, delta: f64, n: usize) -> Result<usize> {
    let n_prime =
        n_prime_explicit(&DimensionRequest::new(m as u64, epsilon, delta, None)?) as usize;
    if n_prime >= n {
        return Err(domain(format!(
            "target dimension {n_prime} for m={m}, eps={epsilon}, delta={delta} is not below n={n}"
        )));
    }
    Ok(n_prime)
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(domain("need at least one trial"));
    }
    Ok(())
}

/// A uniformly shuffled balanced labelling, so every cluster is nonempty.
pub fn random_partition(m: usize, k: usize, rng: &mut impl Rng) -> Result<Partition> {
    let mut labels: Vec<usize> = (0..m).map(|i| i % k).collect();
    labels.shuffle(rng);
    Partition::new(labels, k)
}

fn write_rows<W: Write>(
    out: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Cost sandwich `(1-δ)J ≤ (n/n')J' ≤ (1+δ)J` on generated mixtures, checked
/// for the Lloyd partition and a batch of random partitions per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichConfig {
    pub mixture: MixtureSpec,
    pub epsilon: f64,
    pub delta: f64,
    /// Overrides the dimension bound for `n'`.
    pub n_prime: Option<usize>,
    pub random_partitions: usize,
    pub trials: u64,
    pub base_seed: u64,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        Self {
            mixture: MixtureSpec::balanced(5, 100, 2000, 10.0, 1.0, 0.5, 0),
            epsilon: 0.1,
            delta: 0.2,
            n_prime: None,
            random_partitions: 100,
            trials: 100,
            base_seed: 0,
        }
    }
}

impl SandwichConfig {
    pub fn resolved_n_prime(&self) -> Result<usize> {
        match self.n_prime {
            Some(np) if np == 0 || np > self.mixture.dim => Err(domain(format!(
                "n' must lie in [1, {}], got {np}",
                self.mixture.dim
            ))),
            Some(np) => Ok(np),
            None => theorem_n_prime(self.mixture.m(), self.epsilon, self.delta, self.mixture.dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichTrial {
    pub seed: u64,
    /// Costs of the Lloyd partition.
    pub cost_original: f64,
    pub cost_projected_adjusted: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub partitions_checked: usize,
    pub partitions_passed: usize,
    /// Every checked partition satisfied both inequalities.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub n_prime: usize,
    pub outcome: HarnessOutcome,
    pub trials: Vec<SandwichTrial>,
}

impl SandwichReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &[
                "seed",
                "cost_original",
                "cost_projected_adjusted",
                "lower_bound",
                "upper_bound",
                "partitions_checked",
                "partitions_passed",
                "pass",
            ],
            self.trials.iter().map(|t| {
                vec![
                    t.seed.to_string(),
                    t.cost_original.to_string(),
                    t.cost_projected_adjusted.to_string(),
                    t.lower_bound.to_string(),
                    t.upper_bound.to_string(),
                    t.partitions_checked.to_string(),
                    t.partitions_passed.to_string(),
                    t.pass.to_string(),
                ]
            }),
        )
    }
}

pub fn run_sandwich(config: &SandwichConfig) -> Result<SandwichReport> {
    check_trials(config.trials)?;
    config.mixture.validate()?;
    let n_prime = config.resolved_n_prime()?;
    let k = config.mixture.k;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = config.base_seed + t;
            let s = TrialSeeds::new(seed);
            let mix = generate(&MixtureSpec {
                seed: s.data,
                ..config.mixture.clone()
            })?;
            let projected = ProjectionOperator::build(mix.data.dim(), n_prime, s.projection)?
                .project(&mix.data)?;
            let fitted = lloyd(&mix.data, k, LloydInit::Seed(s.lloyd), LLOYD_MAX_ITERS)?;
            let lloyd_check =
                cost_sandwich(&mix.data, &projected, &fitted.partition, config.delta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(s.partitions);
            let mut passed = usize::from(lloyd_check.pass);
            for _ in 0..config.random_partitions {
                let p = random_partition(mix.data.len(), k, &mut rng)?;
                passed += usize::from(cost_sandwich(&mix.data, &projected, &p, config.delta)?.pass);
            }
            let checked = config.random_partitions + 1;
            Ok(SandwichTrial {
                seed,
                cost_original: lloyd_check.cost_original,
                cost_projected_adjusted: lloyd_check.cost_projected_adjusted,
                lower_bound: lloyd_check.lower_bound,
                upper_bound: lloyd_check.upper_bound,
                partitions_checked: checked,
                partitions_passed: passed,
                pass: passed == checked,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passes = trials.iter().filter(|t| t.pass).count() as u64;
    Ok(SandwichReport {
        n_prime,
        outcome: HarnessOutcome {
            label: "cost sandwich".into(),
            rate: PassRate {
                trials: config.trials,
                passes,
            },
            failure: config.epsilon,
        },
        trials,
    })
}

/// Which form of the admissible-δ condition to apply to a measured gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapReading {
    /// `δ ≤ (1-α²)/((1+2p)+α²)`.
    Lemma,
    /// `δ/(1-δ) ≤ (1-α²)/((1+2p)+α²)`.
    Theorem,
}

impl GapReading {
    pub const ALL: [GapReading; 2] = [GapReading::Lemma, GapReading::Theorem];

    pub fn bound(self, g: f64, p: f64) -> Result<f64> {
        match self {
            GapReading::Lemma => gap_delta_bound(g, p),
            GapReading::Theorem => converse_gap_delta_bound(g, p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GapReading::Lemma => "lemma",
            GapReading::Theorem => "theorem",
        }
    }
}

/// Direction of a fixed-point transfer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Fixed point of the original data, checked on the projection.
    Forward,
    /// Fixed point of the projection, checked on the original data.
    Converse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    pub mixture: MixtureSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub n_prime: Option<usize>,
    pub trials: u64,
    pub base_seed: u64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        let (k, size, n, dist) = (4, 50, 2000, 10.0);
        // Per-cluster variance (dist/2)², which puts the balance quotient at 1.
        let sigma = dist / (2.0 * (n as f64).sqrt());
        Self {
            mixture: MixtureSpec::balanced(k, size, n, dist, sigma, 1.8, 0),
            epsilon: 0.1,
            delta: 0.2,
            n_prime: None,
            trials: 200,
            base_seed: 0,
        }
    }
}

impl FixedPointConfig {
    pub fn resolved_n_prime(&self) -> Result<usize> {
        match self.n_prime {
            Some(np) if np == 0 || np > self.mixture.dim => Err(domain(format!(
                "n' must lie in [1, {}], got {np}",
                self.mixture.dim
            ))),
            Some(np) => Ok(np),
            None => theorem_n_prime(self.mixture.m(), self.epsilon, self.delta, self.mixture.dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointTrial {
    pub seed: u64,
    /// Gap and balance quotient in the space where the fixed point was found.
    pub g: f64,
    pub p: f64,
    /// Admissible δ under each reading, in [`GapReading::ALL`] order.
    pub bounds: [f64; 2],
    /// The partition is still a fixed point in the other space.
    pub transferred: bool,
}

impl FixedPointTrial {
    pub fn eligible(&self, reading: GapReading, delta: f64) -> bool {
        delta <= self.bounds[reading as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub direction: Direction,
    pub n_prime: usize,
    pub delta: f64,
    /// One outcome per reading, counting only trials whose measured gap
    /// admits `δ` under that reading.
    pub outcomes: Vec<(GapReading, HarnessOutcome)>,
    pub trials: Vec<FixedPointTrial>,
}

impl FixedPointReport {
    pub fn outcome(&self, reading: GapReading) -> &HarnessOutcome {
        &self
            .outcomes
            .iter()
            .find(|(r, _)| *r == reading)
            .expect("both readings")
            .1
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &[
                "seed",
                "g",
                "p",
                "bound_lemma",
                "bound_theorem",
                "eligible_lemma",
                "eligible_theorem",
                "transferred",
            ],
            self.trials.iter().map(|t| {
                vec![
                    t.seed.to_string(),
                    t.g.to_string(),
                    t.p.to_string(),
                    t.bounds[0].to_string(),
                    t.bounds[1].to_string(),
                    t.eligible(GapReading::Lemma, self.delta).to_string(),
                    t.eligible(GapReading::Theorem, self.delta).to_string(),
                    t.transferred.to_string(),
                ]
            }),
        )
    }
}

fn fixed_point_trial(
    config: &FixedPointConfig,
    direction: Direction,
    n_prime: usize,
    seed: u64,
) -> Result<FixedPointTrial> {
    let s = TrialSeeds::new(seed);
    let mix = generate(&MixtureSpec {
        seed: s.data,
        ..config.mixture.clone()
    })?;
    let projected =
        ProjectionOperator::build(mix.data.dim(), n_prime, s.projection)?.project(&mix.data)?;
    let (home, other) = match direction {
        Direction::Forward => (&mix.data, &projected),
        Direction::Converse => (&projected, &mix.data),
    };
    let fitted = lloyd(
        home,
        config.mixture.k,
        LloydInit::Partition(mix.truth.clone()),
        LLOYD_MAX_ITERS,
    )?;
    let stats = ClusterStats::compute(home, &fitted.partition)?;
    let g = measure_gap(home, &fitted.partition)?.g;
    let p = PairBalance::compute(&stats)?.p;
    let bound = |r: GapReading| if g > 0.0 { r.bound(g, p) } else { Ok(0.0) };
    Ok(FixedPointTrial {
        seed,
        g,
        p,
        bounds: [bound(GapReading::Lemma)?, bound(GapReading::Theorem)?],
        transferred: is_lloyd_fixed_point(other, &fitted.partition)?,
    })
}

/// Fixed-point transfer under a measured gap. [`Direction::Forward`] starts
/// from a Lloyd fixed point of the original data, [`Direction::Converse`]
/// from one of the projected data.
pub fn run_fixed_point(
    config: &FixedPointConfig,
    direction: Direction,
) -> Result<FixedPointReport> {
    check_trials(config.trials)?;
    config.mixture.validate()?;
    if config.mixture.k < 2 {
        return Err(domain("fixed-point transfer needs k >= 2"));
    }
    let n_prime = config.resolved_n_prime()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| fixed_point_trial(config, direction, n_prime, config.base_seed + t))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = GapReading::ALL
        .iter()
        .map(|&r| {
            let eligible: Vec<_> = trials
                .iter()
                .filter(|t| t.eligible(r, config.delta))
                .collect();
            let passes = eligible.iter().filter(|t| t.transferred).count() as u64;
            let label = match direction {
                Direction::Forward => {
                    format!("fixed point, original to projected ({} reading)", r.name())
                }
                Direction::Converse => {
                    format!("fixed point, projected to original ({} reading)", r.name())
                }
            };
            (
                r,
                HarnessOutcome {
                    label,
                    rate: PassRate {
                        trials: eligible.len() as u64,
                        passes,
                    },
                    failure: config.epsilon,
                },
            )
        })
        .collect();
    Ok(FixedPointReport {
        direction,
        n_prime,
        delta: config.delta,
        outcomes,
        trials,
    })
}

/// Global-optimum transfer on standard normal point sets small enough for
/// the exhaustive optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumConfig {
    pub m: usize,
    pub n: usize,
    pub ks: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub n_prime: Option<usize>,
    pub lloyd_restarts: usize,
    pub trials: u64,
    pub base_seed: u64,
}

impl Default for OptimumConfig {
    fn default() -> Self {
        Self {
            m: 10,
            n: 200,
            ks: vec![2, 3],
            epsilon: 0.1,
            delta: 0.45,
            n_prime: None,
            lloyd_restarts: 50,
            trials: 100,
            base_seed: 0,
        }
    }
}

impl OptimumConfig {
    pub fn resolved_n_prime(&self) -> Result<usize> {
        match self.n_prime {
            Some(np) if np == 0 || np > self.n => {
                Err(domain(format!("n' must lie in [1, {}], got {np}", self.n)))
            }
            Some(np) => Ok(np),
            None => theorem_n_prime(self.m, self.epsilon, self.delta, self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumTrial {
    pub seed: u64,
    pub k: usize,
    pub opt: f64,
    pub opt_projected_adjusted: f64,
    pub forward_pass: bool,
    pub reverse_pass: bool,
    pub best_lloyd: f64,
    /// The exhaustive optimum is no worse than every Lloyd restart.
    pub oracle_bounds_lloyd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumReport {
    pub n_prime: usize,
    /// One outcome per `k`.
    pub outcomes: Vec<HarnessOutcome>,
    /// Trials in which some Lloyd restart beat the exhaustive optimum.
    pub oracle_violations: usize,
    pub trials: Vec<OptimumTrial>,
}

impl OptimumReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &[
                "seed",
                "k",
                "opt",
                "opt_projected_adjusted",
                "forward_pass",
                "reverse_pass",
                "best_lloyd",
                "oracle_bounds_lloyd",
            ],
            self.trials.iter().map(|t| {
                vec![
                    t.seed.to_string(),
                    t.k.to_string(),
                    t.opt.to_string(),
                    t.opt_projected_adjusted.to_string(),
                    t.forward_pass.to_string(),
                    t.reverse_pass.to_string(),
                    t.best_lloyd.to_string(),
                    t.oracle_bounds_lloyd.to_string(),
                ]
            }),
        )
    }
}

pub fn run_optimum(config: &OptimumConfig) -> Result<OptimumReport> {
    check_trials(config.trials)?;
    if config.ks.iter().any(|&k| k == 0 || k > config.m) {
        return Err(domain(format!("every k must lie in [1, {}]", config.m)));
    }
    let n_prime = config.resolved_n_prime()?;
    let per_seed = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = config.base_seed + t;
            let s = TrialSeeds::new(seed);
            let data = gaussian_points(config.m, config.n, s.data)?;
            let projected =
                ProjectionOperator::build(config.n, n_prime, s.projection)?.project(&data)?;
            let mut rows = Vec::with_capacity(config.ks.len());
            for &k in &config.ks {
                let check = global_optimum_transfer_check(&data, &projected, k, config.delta)?;
                let mut best_lloyd = f64::INFINITY;
                for r in 0..config.lloyd_restarts {
                    let fit = lloyd(
                        &data,
                        k,
                        LloydInit::Seed(s.lloyd.wrapping_add(r as u64)),
                        LLOYD_MAX_ITERS,
                    )?;
                    best_lloyd = best_lloyd.min(fit.stats.cost);
                }
                rows.push(OptimumTrial {
                    seed,
                    k,
                    opt: check.cost,
                    opt_projected_adjusted: check.adjusted,
                    forward_pass: check.forward_pass,
                    reverse_pass: check.reverse_pass,
                    best_lloyd,
                    // Relative slack for summation order only.
                    oracle_bounds_lloyd: check.cost <= best_lloyd * (1.0 + 1e-12),
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let trials: Vec<OptimumTrial> = per_seed.into_iter().flatten().collect();
    let outcomes = config
        .ks
        .iter()
        .map(|&k| {
            let passes = trials.iter().filter(|t| t.k == k && t.forward_pass).count() as u64;
            HarnessOutcome {
                label: format!("optimum transfer, k={k}"),
                rate: PassRate {
                    trials: config.trials,
                    passes,
                },
                failure: config.epsilon,
            }
        })
        .collect();
    let oracle_violations = trials.iter().filter(|t| !t.oracle_bounds_lloyd).count();
    Ok(OptimumReport {
        n_prime,
        outcomes,
        oracle_violations,
        trials,
    })
}

/// Measured σ-separatedness, centre stability and weak-deletion ratio before
/// and after projection, compared with their transported bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportHarnessConfig {
    pub mixture: MixtureSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub n_prime: Option<usize>,
    pub trials: u64,
    pub base_seed: u64,
}

impl Default for TransportHarnessConfig {
    fn default() -> Self {
        let (n, dist) = (400, 10.0);
        Self {
            mixture: MixtureSpec::balanced(3, 4, n, dist, dist / (4.0 * (n as f64).sqrt()), 1.0, 0),
            epsilon: 0.1,
            delta: 0.45,
            n_prime: None,
            trials: 100,
            base_seed: 0,
        }
    }
}

impl TransportHarnessConfig {
    pub fn resolved_n_prime(&self) -> Result<usize> {
        match self.n_prime {
            Some(np) if np == 0 || np > self.mixture.dim => Err(domain(format!(
                "n' must lie in [1, {}], got {np}",
                self.mixture.dim
            ))),
            Some(np) => Ok(np),
            None => theorem_n_prime(self.mixture.m(), self.epsilon, self.delta, self.mixture.dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportTrial {
    pub seed: u64,
    pub before: ClusterabilityParams,
    pub predicted: ClusterabilityParams,
    pub measured: ClusterabilityParams,
    /// σ, β and weak-deletion ratio, in that order; `None` when the
    /// original parameter lies outside the domain of its transport formula.
    pub satisfied: [Option<bool>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportHarnessReport {
    pub n_prime: usize,
    /// σ-separatedness, centre stability, weak deletion.
    pub outcomes: Vec<HarnessOutcome>,
    pub trials: Vec<TransportTrial>,
}

impl TransportHarnessReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let b = |v: Option<bool>| v.map(|v| v.to_string()).unwrap_or_default();
        let ratio = |p: &ClusterabilityParams| p.weak_deletion_beta.map(|x| 1.0 + x);
        write_rows(
            out,
            &[
                "seed",
                "sigma",
                "sigma_predicted",
                "sigma_projected",
                "sigma_ok",
                "beta",
                "beta_predicted",
                "beta_projected",
                "beta_ok",
                "deletion_ratio",
                "deletion_ratio_predicted",
                "deletion_ratio_projected",
                "deletion_ok",
            ],
            self.trials.iter().map(|t| {
                vec![
                    t.seed.to_string(),
                    f(t.before.sigma_separatedness),
                    f(t.predicted.sigma_separatedness),
                    f(t.measured.sigma_separatedness),
                    b(t.satisfied[0]),
                    f(t.before.centre_stability_beta),
                    f(t.predicted.centre_stability_beta),
                    f(t.measured.centre_stability_beta),
                    b(t.satisfied[1]),
                    f(ratio(&t.before)),
                    f(ratio(&t.predicted)),
                    f(ratio(&t.measured)),
                    b(t.satisfied[2]),
                ]
            }),
        )
    }
}

/// Parameters that are individually measurable; a degenerate measurement
/// leaves the field empty instead of failing the trial.
fn measure_available(data: &Dataset, k: usize) -> ClusterabilityParams {
    ClusterabilityParams {
        sigma_separatedness: measure_sigma_separatedness(data, k).ok(),
        centre_stability_beta: measure_optimal_centre_stability(data, k).ok(),
        weak_deletion_beta: measure_weak_deletion_stability(data, k)
            .ok()
            .map(|r| r - 1.0),
        ..Default::default()
    }
}

fn transport_trial(
    config: &TransportHarnessConfig,
    n_prime: usize,
    seed: u64,
) -> Result<TransportTrial> {
    let s = TrialSeeds::new(seed);
    let k = config.mixture.k;
    let mix = generate(&MixtureSpec {
        seed: s.data,
        ..config.mixture.clone()
    })?;
    let projected =
        ProjectionOperator::build(mix.data.dim(), n_prime, s.projection)?.project(&mix.data)?;
    let before = measure_available(&mix.data, k);
    let measured = measure_available(&projected, k);
    // Each parameter is transported on its own so one out-of-domain value
    // does not hide the others.
    let single = |p: ClusterabilityParams| transport(&p, config.delta).ok().map(|t| t.params);
    let mut predicted = ClusterabilityParams::default();
    let mut satisfied = [None; 3];
    if let Some(sigma) = before.sigma_separatedness {
        let p = single(ClusterabilityParams {
            sigma_separatedness: Some(sigma),
            ..Default::default()
        });
        predicted.sigma_separatedness = p.and_then(|p| p.sigma_separatedness);
        satisfied[0] = predicted
            .sigma_separatedness
            .zip(measured.sigma_separatedness)
            .map(|(b, m)| m <= b);
    }
    if let Some(beta) = before.centre_stability_beta {
        let p = single(ClusterabilityParams {
            centre_stability_beta: Some(beta),
            ..Default::default()
        });
        predicted.centre_stability_beta = p.and_then(|p| p.centre_stability_beta);
        satisfied[1] = predicted
            .centre_stability_beta
            .zip(measured.centre_stability_beta)
            .map(|(b, m)| m >= b);
    }
    if let Some(beta) = before.weak_deletion_beta {
        let p = single(ClusterabilityParams {
            weak_deletion_beta: Some(beta),
            ..Default::default()
        });
        predicted.weak_deletion_beta = p.and_then(|p| p.weak_deletion_beta);
        satisfied[2] = predicted
            .weak_deletion_beta
            .zip(measured.weak_deletion_beta)
            .map(|(b, m)| m >= b);
    }
    Ok(TransportTrial {
        seed,
        before,
        predicted,
        measured,
        satisfied,
    })
}

pub fn run_transport(config: &TransportHarnessConfig) -> Result<TransportHarnessReport> {
    check_trials(config.trials)?;
    config.mixture.validate()?;
    if config.mixture.k < 2 {
        return Err(domain("clusterability transport needs k >= 2"));
    }
    let n_prime = config.resolved_n_prime()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| transport_trial(config, n_prime, config.base_seed + t))
        .collect::<Result<Vec<_>>>()?;
    let labels = [
        "sigma-separatedness transport",
        "centre stability transport",
        "weak deletion transport",
    ];
    let outcomes = labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let judged: Vec<bool> = trials.iter().filter_map(|t| t.satisfied[i]).collect();
            HarnessOutcome {
                label: (*label).into(),
                rate: PassRate {
                    trials: judged.len() as u64,
                    passes: judged.iter().filter(|&&b| b).count() as u64,
                },
                failure: config.epsilon,
            }
        })
        .collect();
    Ok(TransportHarnessReport {
        n_prime,
        outcomes,
        trials,
    })
}

/// Perturbation robustness: an instance robust at `s` should give a
/// projection robust at `s(1+δ)/(1-δ)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationConfig {
    pub mixture: MixtureSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub s: f64,
    pub n_prime: Option<usize>,
    /// Perturbed metrics sampled per robustness check.
    pub perturbations: u64,
    pub trials: u64,
    pub base_seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        let n = 400;
        Self {
            mixture: MixtureSpec::balanced(3, 3, n, 100.0, 0.5 / (2.0 * n as f64).sqrt(), 1.0, 0),
            epsilon: 0.1,
            delta: 0.45,
            s: 0.15,
            n_prime: None,
            perturbations: 20,
            trials: 100,
            base_seed: 0,
        }
    }
}

impl PerturbationConfig {
    pub fn resolved_n_prime(&self) -> Result<usize> {
        match self.n_prime {
            Some(np) if np == 0 || np > self.mixture.dim => Err(domain(format!(
                "n' must lie in [1, {}], got {np}",
                self.mixture.dim
            ))),
            Some(np) => Ok(np),
            None => theorem_n_prime(self.mixture.m(), self.epsilon, self.delta, self.mixture.dim),
        }
    }

    pub fn projected_s(&self) -> Result<f64> {
        let t = transport(
            &ClusterabilityParams {
                mult_perturb_s: Some(self.s),
                ..Default::default()
            },
            self.delta,
        )?;
        if t.degraded.mult_perturb {
            return Err(domain(format!(
                "s={} at delta={} transports outside (0, 1)",
                self.s, self.delta
            )));
        }
        Ok(t.params.mult_perturb_s.expect("set above"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationTrial {
    pub seed: u64,
    /// No sampled perturbation at `s` changed the original optimum.
    pub robust_original: bool,
    pub robust_projected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub n_prime: usize,
    pub s_projected: f64,
    /// Over trials whose original instance passed the check at `s`.
    pub outcome: HarnessOutcome,
    pub trials: Vec<PerturbationTrial>,
}

impl PerturbationReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &["seed", "robust_original", "robust_projected"],
            self.trials.iter().map(|t| {
                vec![
                    t.seed.to_string(),
                    t.robust_original.to_string(),
                    t.robust_projected.to_string(),
                ]
            }),
        )
    }
}

pub fn run_perturbation(config: &PerturbationConfig) -> Result<PerturbationReport> {
    check_trials(config.trials)?;
    config.mixture.validate()?;
    let n_prime = config.resolved_n_prime()?;
    let s_projected = config.projected_s()?;
    let k = config.mixture.k;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = config.base_seed + t;
            let s = TrialSeeds::new(seed);
            let mix = generate(&MixtureSpec {
                seed: s.data,
                ..config.mixture.clone()
            })?;
            let projected = ProjectionOperator::build(mix.data.dim(), n_prime, s.projection)?
                .project(&mix.data)?;
            let robust_original = check_perturbation_robustness(
                &mix.data,
                k,
                config.s,
                config.perturbations,
                s.partitions,
            )?;
            let robust_projected = check_perturbation_robustness(
                &projected,
                k,
                s_projected,
                config.perturbations,
                s.partitions.wrapping_add(1),
            )?;
            Ok(PerturbationTrial {
                seed,
                robust_original,
                robust_projected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let eligible: Vec<_> = trials.iter().filter(|t| t.robust_original).collect();
    let passes = eligible.iter().filter(|t| t.robust_projected).count() as u64;
    Ok(PerturbationReport {
        n_prime,
        s_projected,
        outcome: HarnessOutcome {
            label: "perturbation robustness transport".into(),
            rate: PassRate {
                trials: eligible.len() as u64,
                passes,
            },
            failure: 2.0 * config.epsilon,
        },
        trials,
    })
}

/// Repeated projections of one given dataset: the cost sandwich for the
/// Lloyd partition plus random partitions, and transfer of a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCompareConfig {
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub n_prime: Option<usize>,
    pub random_partitions: usize,
    pub trials: u64,
    pub base_seed: u64,
    /// Orthonormalize operator rows.
    pub orthogonalize: bool,
}

impl Default for InstanceCompareConfig {
    fn default() -> Self {
        Self {
            k: 2,
            epsilon: 0.1,
            delta: 0.2,
            n_prime: None,
            random_partitions: 100,
            trials: 100,
            base_seed: 0,
            orthogonalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTrial {
    pub seed: u64,
    pub sandwich: SandwichTrial,
    pub fixed_point_transferred: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCompareReport {
    pub n_prime: usize,
    /// Lloyd fixed point of the original data the transfer is tested on.
    pub fixed_point: Partition,
    pub g: f64,
    pub p: f64,
    pub bounds: [f64; 2],
    pub sandwich: HarnessOutcome,
    /// Counts only trials admitted by the measured gap under each reading;
    /// the gap is a property of the data, so it is all trials or none.
    pub fixed_point_outcomes: Vec<(GapReading, HarnessOutcome)>,
    pub trials: Vec<InstanceTrial>,
}

impl InstanceCompareReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(
            out,
            &[
                "seed",
                "cost_original",
                "cost_projected_adjusted",
                "lower_bound",
                "upper_bound",
                "partitions_checked",
                "partitions_passed",
                "pass",
                "fixed_point_transferred",
            ],
            self.trials.iter().map(|t| {
                let s = &t.sandwich;
                vec![
                    t.seed.to_string(),
                    s.cost_original.to_string(),
                    s.cost_projected_adjusted.to_string(),
                    s.lower_bound.to_string(),
                    s.upper_bound.to_string(),
                    s.partitions_checked.to_string(),
                    s.partitions_passed.to_string(),
                    s.pass.to_string(),
                    t.fixed_point_transferred.to_string(),
                ]
            }),
        )
    }
}

/// `init` seeds Lloyd when given; otherwise Lloyd starts from `base_seed`.
pub fn run_instance_compare(
    data: &Dataset,
    init: Option<Partition>,
    config: &InstanceCompareConfig,
) -> Result<InstanceCompareReport> {
    check_trials(config.trials)?;
    let k = config.k;
    if k < 2 || k > data.len() {
        return Err(domain(format!(
            "k must lie in [2, {}], got {k}",
            data.len()
        )));
    }
    let n_prime = match config.n_prime {
        Some(np) if np == 0 || np > data.dim() => {
            return Err(domain(format!(
                "n' must lie in [1, {}], got {np}",
                data.dim()
            )))
        }
        Some(np) => np,
        None => theorem_n_prime(data.len(), config.epsilon, config.delta, data.dim())?,
    };
    let start = match init {
        Some(p) => LloydInit::Partition(p),
        None => LloydInit::Seed(config.base_seed),
    };
    let fitted = lloyd(data, k, start, LLOYD_MAX_ITERS)?;
    let fixed_point = fitted.partition.clone();
    let g = measure_gap(data, &fixed_point)?.g;
    let p = PairBalance::compute(&fitted.stats)?.p;
    let bound = |r: GapReading| if g > 0.0 { r.bound(g, p) } else { Ok(0.0) };
    let bounds = [bound(GapReading::Lemma)?, bound(GapReading::Theorem)?];
    let is_fixed = is_lloyd_fixed_point(data, &fixed_point)?;

    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = config.base_seed + t;
            let spec = OperatorSpec {
                n: data.dim(),
                n_prime,
                seed,
                orthogonalize: config.orthogonalize,
            };
            let projected = spec.build()?.project(data)?;
            let check = cost_sandwich(data, &projected, &fixed_point, config.delta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut passed = usize::from(check.pass);
            for _ in 0..config.random_partitions {
                let rp = random_partition(data.len(), k, &mut rng)?;
                passed += usize::from(cost_sandwich(data, &projected, &rp, config.delta)?.pass);
            }
            let checked = config.random_partitions + 1;
            Ok(InstanceTrial {
                seed,
                sandwich: SandwichTrial {
                    seed,
                    cost_original: check.cost_original,
                    cost_projected_adjusted: check.cost_projected_adjusted,
                    lower_bound: check.lower_bound,
                    upper_bound: check.upper_bound,
                    partitions_checked: checked,
                    partitions_passed: passed,
                    pass: passed == checked,
                },
                fixed_point_transferred: is_lloyd_fixed_point(&projected, &fixed_point)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sandwich_passes = trials.iter().filter(|t| t.sandwich.pass).count() as u64;
    let transfers = trials.iter().filter(|t| t.fixed_point_transferred).count() as u64;
    let fixed_point_outcomes = GapReading::ALL
        .iter()
        .map(|&r| {
            let admitted = is_fixed && config.delta <= bounds[r as usize];
            let rate = if admitted {
                PassRate {
                    trials: config.trials,
                    passes: transfers,
                }
            } else {
                PassRate {
                    trials: 0,
                    passes: 0,
                }
            };
            (
                r,
                HarnessOutcome {
                    label: format!("fixed point, original to projected ({} reading)", r.name()),
                    rate,
                    failure: config.epsilon,
                },
            )
        })
        .collect();
    Ok(InstanceCompareReport {
        n_prime,
        fixed_point,
        g,
        p,
        bounds,
        sandwich: HarnessOutcome {
            label: "cost sandwich".into(),
            rate: PassRate {
                trials: config.trials,
                passes: sandwich_passes,
            },
            failure: config.epsilon,
        },
        fixed_point_outcomes,
        trials,
    })
}

/// The exhaustive optimum is a lower bound for `restarts` seeded Lloyd runs.
pub fn oracle_bounds_lloyd(data: &Dataset, k: usize, restarts: usize, seed: u64) -> Result<bool> {
    let (_, opt) = brute_force_optimum(data, k)?;
    for r in 0..restarts {
        let fit = lloyd(
            data,
            k,
            LloydInit::Seed(seed.wrapping_add(r as u64)),
            LLOYD_MAX_ITERS,
        )?;
        if opt.cost > fit.stats.cost * (1.0 + 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}
