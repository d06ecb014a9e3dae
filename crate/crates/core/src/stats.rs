//! Small binomial helpers shared by the Monte-Carlo drivers.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Clamp the rounding noise at the extremes so that lo <= p <= hi.
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

/// Lowest acceptable empirical success rate when the true rate is at least
/// `1 - failure`: `1 - failure - 3·sqrt(failure(1-failure)/trials)`.
pub fn success_rate_floor(failure: f64, trials: u64) -> f64 {
    1.0 - failure - 3.0 * (failure * (1.0 - failure) / trials as f64).sqrt()
}

/// Observed pass count over a batch of seeded trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassRate {
    pub trials: u64,
    pub passes: u64,
}

impl PassRate {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            return f64::NAN;
        }
        self.passes as f64 / self.trials as f64
    }

    /// Whether the observed rate clears [`success_rate_floor`] for `failure`.
    pub fn clears(&self, failure: f64) -> bool {
        self.trials > 0 && self.rate() >= success_rate_floor(failure, self.trials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_rate() {
        for (s, t) in [(0, 10), (10, 10), (3, 7), (180, 200), (1, 1)] {
            let (lo, hi) = wilson_interval(s, t, Z95);
            let p = s as f64 / t as f64;
            assert!(lo <= p && p <= hi, "{s}/{t}: {lo} {p} {hi}");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn wilson_reference_value() {
        // 8/10 at z=1.96: centre 0.7396, half-width 0.2296 (textbook value).
        let (lo, hi) = wilson_interval(8, 10, Z95);
        assert!((lo - 0.4902).abs() < 1e-3 && (hi - 0.9433).abs() < 1e-3);
    }

    #[test]
    fn floor_value() {
        let f = success_rate_floor(0.1, 200);
        assert!((f - (0.9 - 3.0 * (0.09f64 / 200.0).sqrt())).abs() < 1e-15);
    }
}
