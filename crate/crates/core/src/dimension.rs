//! Target-dimension selection.
//!
//! Two routes to the reduced dimensionality `n'`:
//!
//! * the explicit bound `n' >= 2(-ln ε + 2 ln m) / D(δ)`, which does not depend
//!   on the original dimensionality `n`;
//! * the implicit bound: the smallest `n'` with `C(m,2) · B(n') <= ε`, where
//!   `B` is the two-sided per-pair tail bound for the squared length of a
//!   projected vector. It depends on `n` and is solved numerically.
//!
//! The module also carries the single-shot comparison quantities used for the
//! repeated-projection scheme (`dg_*`) and the admissible error for a given
//! inter-cluster gap.

use crate::error::{domain, JlError, Result};

/// Validated input for the dimension formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionRequest {
    m: u64,
    epsilon: f64,
    delta: f64,
    n: Option<u64>,
}

impl DimensionRequest {
    pub fn new(m: u64, epsilon: f64, delta: f64, n: Option<u64>) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(domain(format!("delta must lie in (0, 1/2), got {delta}")));
        }
        Self::relaxed(m, epsilon, delta, n)
    }

    /// Accepts any `δ ∈ (0, 1)`, where every formula is still defined. The
    /// published sweeps include `δ = 1/2`.
    pub fn relaxed(m: u64, epsilon: f64, delta: f64, n: Option<u64>) -> Result<Self> {
        if m < 2 {
            return Err(domain(format!("m must be >= 2, got {m}")));
        }
        check_epsilon(epsilon)?;
        check_unit_delta(delta)?;
        if n == Some(0) {
            return Err(domain("n must be positive"));
        }
        Ok(Self {
            m,
            epsilon,
            delta,
            n,
        })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> Option<u64> {
        self.n
    }

    pub fn with_n(self, n: u64) -> Result<Self> {
        Self::relaxed(self.m, self.epsilon, self.delta, Some(n))
    }
}

/// All dimension quantities for one request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionResult {
    pub n_prime_explicit: u64,
    pub n_prime_implicit: Option<u64>,
    pub dg_n_prime: u64,
    pub dg_repetitions: u64,
}

impl DimensionResult {
    /// Explicit over implicit, when the implicit bound was computed.
    pub fn ratio(&self) -> Option<f64> {
        self.n_prime_implicit
            .map(|imp| self.n_prime_explicit as f64 / imp as f64)
    }
}

/// Computes every column for `req`; the implicit bound only when `req.n()` is set.
pub fn evaluate(req: &DimensionRequest) -> Result<DimensionResult> {
    let n_prime_implicit = match req.n {
        Some(_) => Some(n_prime_implicit(req)?),
        None => None,
    };
    Ok(DimensionResult {
        n_prime_explicit: n_prime_explicit(req),
        n_prime_implicit,
        dg_n_prime: dg_n_prime(req.m, req.delta)?,
        dg_repetitions: dg_repetitions(req.m, req.epsilon)?,
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("epsilon must lie in (0, 1), got {epsilon}")))
    }
}

fn check_unit_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// `D(δ) = δ - ln(1 + δ)`: the lower bound of `-(ln(1 - δ*) + δ*)` over
/// `δ* ∈ {-δ, +δ}` that appears in the explicit bound.
pub fn denominator(delta: f64) -> Result<f64> {
    check_unit_delta(delta)?;
    Ok(delta - delta.ln_1p())
}

/// `ceil(2(-ln ε + 2 ln m) / D(δ))`.
pub fn n_prime_explicit(req: &DimensionRequest) -> u64 {
    let d = req.delta - req.delta.ln_1p();
    let numerator = 2.0 * (-req.epsilon.ln() + 2.0 * (req.m as f64).ln());
    (numerator / d).ceil() as u64
}

/// Natural log of the per-pair failure bound `B(n')`.
///
/// Both tail terms are formed in the log domain and combined with
/// log-sum-exp; the raw powers underflow for `n'` in the tens of thousands.
pub fn log_pair_failure_bound(n_prime: u64, n: u64, delta: f64) -> Result<f64> {
    if n_prime == 0 || n_prime >= n {
        return Err(domain(format!("need 0 < n' < n, got n'={n_prime}, n={n}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(domain(format!("delta must lie in [0, 1), got {delta}")));
    }
    let k = n_prime as f64;
    let rest = (n - n_prime) as f64;
    let r = k * delta / rest;
    if r >= 1.0 {
        return Err(domain(format!(
            "n'δ/(n-n') = {r} >= 1; the bound is undefined, shrink n' or raise n"
        )));
    }
    let lower = 0.5 * k * (-delta).ln_1p() + 0.5 * rest * r.ln_1p();
    let upper = 0.5 * k * delta.ln_1p() + 0.5 * rest * (-r).ln_1p();
    Ok(log_add_exp(lower, upper))
}

/// `B(n') = (1-δ)^{n'/2}(1+n'δ/(n-n'))^{(n-n')/2} + (1+δ)^{n'/2}(1-n'δ/(n-n'))^{(n-n')/2}`.
pub fn pair_failure_bound(n_prime: u64, n: u64, delta: f64) -> Result<f64> {
    log_pair_failure_bound(n_prime, n, delta).map(f64::exp)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// `ln C(m, 2)`.
pub fn log_pair_count(m: u64) -> f64 {
    let m = m as f64;
    m.ln() + (m - 1.0).ln() - std::f64::consts::LN_2
}

/// How the implicit bound was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Bisection,
    LinearScan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitSolution {
    pub n_prime: u64,
    pub method: SolveMethod,
}

/// Smallest `n'` with `C(m,2) · B(n') <= ε`.
pub fn n_prime_implicit(req: &DimensionRequest) -> Result<u64> {
    solve_implicit(req).map(|s| s.n_prime)
}

/// Like [`n_prime_implicit`] but also reports the solver route taken.
pub fn solve_implicit(req: &DimensionRequest) -> Result<ImplicitSolution> {
    let n = req
        .n
        .ok_or_else(|| domain("the implicit bound needs the original dimension n"))?;
    let lo: u64 = 2;
    // Largest n' keeping n'δ/(n-n') < 1.
    let hi = ((n - 1) as f64 / (1.0 + req.delta)).floor() as u64;
    if hi < lo {
        return Err(JlError::Infeasible {
            lo,
            hi,
            log_lhs_at_edge: f64::NAN,
        });
    }
    let log_eps = req.epsilon.ln();
    let log_pairs = log_pair_count(req.m);
    let lhs = |k: u64| -> f64 {
        log_pairs + log_pair_failure_bound(k, n, req.delta).expect("n' inside the bracket")
    };
    let holds = |k: u64| lhs(k) <= log_eps;

    let edge = lhs(hi);
    if edge > log_eps {
        return Err(JlError::Infeasible {
            lo,
            hi,
            log_lhs_at_edge: edge,
        });
    }

    if is_non_increasing_on(&lhs, lo, hi) {
        let (mut below, mut above) = (lo, hi);
        if holds(below) {
            return Ok(ImplicitSolution {
                n_prime: below,
                method: SolveMethod::Bisection,
            });
        }
        // invariant: !holds(below) && holds(above)
        while above - below > 1 {
            let mid = below + (above - below) / 2;
            if holds(mid) {
                above = mid;
            } else {
                below = mid;
            }
        }
        return Ok(ImplicitSolution {
            n_prime: above,
            method: SolveMethod::Bisection,
        });
    }

    let mut k = (n_prime_explicit(req) / 2).clamp(lo, hi);
    if holds(k) {
        while k > lo && holds(k - 1) {
            k -= 1;
        }
    } else {
        while !holds(k) {
            k += 1;
        }
    }
    Ok(ImplicitSolution {
        n_prime: k,
        method: SolveMethod::LinearScan,
    })
}

/// Samples `f` at 8 geometrically spaced points of `[lo, hi]`.
fn is_non_increasing_on(f: &impl Fn(u64) -> f64, lo: u64, hi: u64) -> bool {
    const SAMPLES: usize = 8;
    let ratio = (hi as f64 / lo as f64).powf(1.0 / (SAMPLES - 1) as f64);
    let mut prev = f64::INFINITY;
    let mut last_k = 0;
    for i in 0..SAMPLES {
        let k = ((lo as f64) * ratio.powi(i as i32)).round() as u64;
        let k = k.clamp(lo, hi);
        if k == last_k {
            continue;
        }
        last_k = k;
        let v = f(k);
        if v > prev {
            return false;
        }
        prev = v;
    }
    true
}

/// Denominator used in the repeated-projection dimension formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DgDenominator {
    /// `δ² - δ³`; reproduces the published comparison tables.
    #[default]
    Transcribed,
    /// `δ²/2 - δ³/3`.
    Original,
}

/// `ceil(4 ln m / (δ² - δ³))`.
pub fn dg_n_prime(m: u64, delta: f64) -> Result<u64> {
    dg_n_prime_with(m, delta, DgDenominator::Transcribed)
}

pub fn dg_n_prime_with(m: u64, delta: f64, variant: DgDenominator) -> Result<u64> {
    if m < 2 {
        return Err(domain(format!("m must be >= 2, got {m}")));
    }
    check_unit_delta(delta)?;
    let den = match variant {
        DgDenominator::Transcribed => delta * delta - delta.powi(3),
        DgDenominator::Original => delta * delta / 2.0 - delta.powi(3) / 3.0,
    };
    Ok((4.0 * (m as f64).ln() / den).ceil() as u64)
}

/// `ceil(ln ε / ln(1 - 1/m))`: repetitions of a projection that succeeds with
/// probability `1/m` needed to push the overall failure below `ε`.
///
/// `ln(1 - 1/m)` is evaluated literally, which is what the published
/// comparison tables contain; for `m` around `1e8` this differs from
/// [`dg_repetitions_exact`] by a few units.
pub fn dg_repetitions(m: u64, epsilon: f64) -> Result<u64> {
    check_repetition_args(m, epsilon)?;
    let per_trial = (1.0 - 1.0 / m as f64).ln();
    Ok((epsilon.ln() / per_trial).ceil() as u64)
}

/// Same count with `ln(1 - 1/m)` computed through `ln_1p`.
pub fn dg_repetitions_exact(m: u64, epsilon: f64) -> Result<u64> {
    check_repetition_args(m, epsilon)?;
    let per_trial = (-1.0 / m as f64).ln_1p();
    Ok((epsilon.ln() / per_trial).ceil() as u64)
}

fn check_repetition_args(m: u64, epsilon: f64) -> Result<()> {
    if m < 2 {
        return Err(domain(format!("m must be >= 2, got {m}")));
    }
    check_epsilon(epsilon)
}

/// Largest admissible δ for a relative inter-cluster gap `g` and balance
/// quotient `p`: `(1 - α²) / ((1 + 2p) + α²)` with `α = 1 - g/2`.
pub fn gap_delta_bound(g: f64, p: f64) -> Result<f64> {
    if !(g > 0.0 && g <= 2.0) {
        return Err(domain(format!("gap g must lie in (0, 2], got {g}")));
    }
    if !(p >= 0.0 && p.is_finite()) {
        return Err(domain(format!("balance quotient p must be >= 0, got {p}")));
    }
    let alpha = 1.0 - g / 2.0;
    let a2 = alpha * alpha;
    Ok((1.0 - a2) / ((1.0 + 2.0 * p) + a2))
}

/// Largest δ satisfying `δ/(1-δ) <= (1 - α²)/((1 + 2p) + α²)`, the form in
/// which the projected-to-original direction states its condition.
pub fn converse_gap_delta_bound(g: f64, p: f64) -> Result<f64> {
    let b = gap_delta_bound(g, p)?;
    Ok(b / (1.0 + b))
}
