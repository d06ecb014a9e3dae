//! Table and figure data for the published dimension sweeps, the distortion
//! histogram and the admissible-δ curve.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::datagen::gaussian_points;
use crate::dimension::{
    dg_n_prime, dg_repetitions, gap_delta_bound, n_prime_explicit, n_prime_implicit,
    DimensionRequest,
};
use crate::error::{domain, JlError, Result};
use crate::geometry::{DistortionReport, DistortionSummary, PairwiseDistances};
use crate::projection::ProjectionOperator;

/// Everything `reproduce` can regenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Tables 1 to 8: four sweeps, each with and without the comparison
    /// columns.
    Table(u8),
    Figure(Sweep),
    FigDistortion,
    FigGap,
}

impl Target {
    pub fn all() -> Vec<Target> {
        let mut v: Vec<Target> = (1..=8).map(Target::Table).collect();
        v.extend(Sweep::ALL.iter().map(|&s| Target::Figure(s)));
        v.push(Target::FigDistortion);
        v.push(Target::FigGap);
        v
    }

    pub fn id(&self) -> String {
        match self {
            Target::Table(i) => format!("table{i}"),
            Target::Figure(s) => format!("fig-{}", s.id()),
            Target::FigDistortion => "fig-distortion".into(),
            Target::FigGap => "fig-gap".into(),
        }
    }

    /// Tables and the sweep figures are pure arithmetic; the distortion
    /// figure runs a full projection.
    pub fn is_deterministic_formula(&self) -> bool {
        !matches!(self, Target::FigDistortion)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Target {
    type Err = JlError;

    fn from_str(s: &str) -> Result<Self> {
        Target::all()
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| {
                let ids: Vec<String> = Target::all().iter().map(Target::id).collect();
                domain(format!(
                    "unknown target '{s}', expected one of: {}",
                    ids.join(", ")
                ))
            })
    }
}

/// One-parameter sweep with the other three parameters held at the
/// published defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    SampleSize,
    Epsilon,
    Delta,
    OrigN,
}

const M_DEFAULT: u64 = 2_000_000;
const EPS_DEFAULT: f64 = 0.01;
const DELTA_DEFAULT: f64 = 0.05;
const N_DEFAULT: u64 = 500_000;

impl Sweep {
    pub const ALL: [Sweep; 4] = [
        Sweep::SampleSize,
        Sweep::Epsilon,
        Sweep::Delta,
        Sweep::OrigN,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Sweep::SampleSize => "samplesize",
            Sweep::Epsilon => "epsilon",
            Sweep::Delta => "delta",
            Sweep::OrigN => "orign",
        }
    }

    pub fn column(&self) -> &'static str {
        match self {
            Sweep::SampleSize => "m",
            Sweep::Epsilon => "epsilon",
            Sweep::Delta => "delta",
            Sweep::OrigN => "n",
        }
    }

    /// Swept values in table order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::SampleSize => {
                let mut v = Vec::new();
                for exp in 1..=7 {
                    for mant in [1.0, 2.0, 5.0] {
                        let x = mant * 10f64.powi(exp);
                        if x >= 10.0 {
                            v.push(x);
                        }
                    }
                }
                v.push(1e8);
                v
            }
            Sweep::Epsilon => vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
            Sweep::Delta => vec![
                0.5, 0.4, 0.3, 0.2, 0.1, 0.09, 0.08, 0.07, 0.06, 0.05, 0.04, 0.03, 0.02, 0.01,
            ],
            Sweep::OrigN => (4..=10).map(|i| i as f64 * 1e5).collect(),
        }
    }

    fn request(&self, x: f64) -> Result<DimensionRequest> {
        let (m, eps, delta, n) = match self {
            Sweep::SampleSize => (x as u64, EPS_DEFAULT, DELTA_DEFAULT, N_DEFAULT),
            Sweep::Epsilon => (M_DEFAULT, x, DELTA_DEFAULT, N_DEFAULT),
            Sweep::Delta => (M_DEFAULT, EPS_DEFAULT, x, N_DEFAULT),
            Sweep::OrigN => (M_DEFAULT, EPS_DEFAULT, DELTA_DEFAULT, x as u64),
        };
        DimensionRequest::relaxed(m, eps, delta, Some(n))
    }

    fn format_value(&self, x: f64) -> String {
        match self {
            Sweep::SampleSize | Sweep::OrigN => format!("{}", x as u64),
            Sweep::Epsilon | Sweep::Delta => format!("{x}"),
        }
    }
}

/// One row of a dimension sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub explicit: u64,
    /// `None` when no admissible `n'` exists below `n/(1+δ)`.
    pub implicit: Option<u64>,
    pub dg_n_prime: u64,
    pub dg_repetitions: u64,
}

impl SweepRow {
    pub fn explicit_over_implicit(&self) -> Option<f64> {
        self.implicit.map(|i| self.explicit as f64 / i as f64)
    }

    /// Implicit bound over the Dasgupta-Gupta dimension.
    pub fn ours_over_theirs(&self) -> Option<f64> {
        self.implicit.map(|i| i as f64 / self.dg_n_prime as f64)
    }
}

pub fn sweep_rows(sweep: Sweep) -> Result<Vec<SweepRow>> {
    sweep
        .values()
        .into_iter()
        .map(|x| {
            let req = sweep.request(x)?;
            let implicit = match n_prime_implicit(&req) {
                Ok(v) => Some(v),
                Err(JlError::Infeasible { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                value: x,
                explicit: n_prime_explicit(&req),
                implicit,
                dg_n_prime: dg_n_prime(req.m(), req.delta())?,
                dg_repetitions: dg_repetitions(req.m(), req.epsilon())?,
            })
        })
        .collect()
}

/// Header plus string rows, ready for CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

/// Rounds up to `decimals` places; the comparison tables print their ratio
/// this way. The `1e-9` keeps exact multiples from stepping up.
fn ceil_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s - 1e-9).ceil() / s
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn sweep_of_table(i: u8) -> Result<Sweep> {
    match i {
        1..=8 => Ok(Sweep::ALL[((i - 1) % 4) as usize]),
        _ => Err(domain(format!("tables are numbered 1 to 8, got {i}"))),
    }
}

pub fn table(i: u8) -> Result<CsvTable> {
    let sweep = sweep_of_table(i)?;
    let rows = sweep_rows(sweep)?;
    let mut header: Vec<String> = vec![
        sweep.column().into(),
        "n' explicit".into(),
        "n' implicit".into(),
    ];
    if i <= 4 {
        header.push("explicit/implicit".into());
    } else {
        header.extend(["Gupta n'", "Their Repetitions", "Our n' to their n'"].map(String::from));
    }
    let rows = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                sweep.format_value(r.value),
                r.explicit.to_string(),
                opt(r.implicit),
            ];
            if i <= 4 {
                row.push(opt(r.explicit_over_implicit().map(|x| round_to(x, 2))));
            } else {
                row.push(r.dg_n_prime.to_string());
                row.push(r.dg_repetitions.to_string());
                row.push(opt(r.ours_over_theirs().map(|x| ceil_to(x, 1))));
            }
            row
        })
        .collect();
    Ok(CsvTable { header, rows })
}

pub fn sweep_figure(sweep: Sweep) -> Result<CsvTable> {
    let rows = sweep_rows(sweep)?
        .iter()
        .map(|r| {
            vec![
                sweep.format_value(r.value),
                r.explicit.to_string(),
                opt(r.implicit),
            ]
        })
        .collect();
    Ok(CsvTable {
        header: vec![
            sweep.column().into(),
            "n' explicit".into(),
            "n' implicit".into(),
        ],
        rows,
    })
}

pub const GAP_CURVE_P: [f64; 3] = [0.5, 1.0, 2.0];
pub const GAP_CURVE_STEPS: usize = 100;

/// `gap_delta_bound(g, p)` on `g = 2i/steps`, `i = 1..=steps`.
pub fn gap_figure() -> Result<CsvTable> {
    let mut rows = Vec::with_capacity(GAP_CURVE_P.len() * GAP_CURVE_STEPS);
    for &p in &GAP_CURVE_P {
        for i in 1..=GAP_CURVE_STEPS {
            let g = 2.0 * i as f64 / GAP_CURVE_STEPS as f64;
            rows.push(vec![
                g.to_string(),
                p.to_string(),
                gap_delta_bound(g, p)?.to_string(),
            ]);
        }
    }
    Ok(CsvTable {
        header: vec!["g".into(), "p".into(), "delta".into()],
        rows,
    })
}

/// One seeded projection of standard normal points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionConfig {
    pub m: usize,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Overrides the explicit bound.
    pub n_prime: Option<usize>,
    /// Drives both the points and the operator.
    pub seed: u64,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self {
            m: 5000,
            n: 5000,
            epsilon: 0.1,
            delta: 0.2,
            n_prime: None,
            seed: 7,
        }
    }
}

impl DistortionConfig {
    pub fn resolved_n_prime(&self) -> Result<usize> {
        let np = match self.n_prime {
            Some(np) => np,
            None => n_prime_explicit(&DimensionRequest::new(
                self.m as u64,
                self.epsilon,
                self.delta,
                None,
            )?) as usize,
        };
        if np == 0 || np >= self.n {
            return Err(domain(format!(
                "need 0 < n' < n, got n'={np}, n={}",
                self.n
            )));
        }
        Ok(np)
    }

    fn pairwise(&self) -> Result<(PairwiseDistances, PairwiseDistances, f64)> {
        let n_prime = self.resolved_n_prime()?;
        let data = gaussian_points(self.m, self.n, self.seed)?;
        let op = ProjectionOperator::build(self.n, n_prime, self.seed)?;
        let projected = op.project(&data)?;
        Ok((
            PairwiseDistances::compute(data.points().view()),
            PairwiseDistances::compute(projected.points().view()),
            op.squared_scale(),
        ))
    }

    pub fn report(&self) -> Result<DistortionReport> {
        let (orig, proj, scale) = self.pairwise()?;
        DistortionReport::from_pairwise(&orig, &proj, scale, self.delta)
    }

    /// Like [`Self::report`] without keeping the quotients.
    pub fn summary(&self) -> Result<DistortionSummary> {
        let (orig, proj, scale) = self.pairwise()?;
        DistortionSummary::from_pairwise(&orig, &proj, scale, self.delta)
    }
}

pub fn distortion_figure(config: &DistortionConfig) -> Result<CsvTable> {
    let report = config.report()?;
    let rows = report
        .histogram(report.default_bin_width())
        .iter()
        .map(|b| vec![b.lo.to_string(), b.hi.to_string(), b.count.to_string()])
        .collect();
    Ok(CsvTable {
        header: vec!["bin_lo".into(), "bin_hi".into(), "count".into()],
        rows,
    })
}

/// Regenerates `target` with its default parameters.
pub fn reproduce(target: Target) -> Result<CsvTable> {
    match target {
        Target::Table(i) => table(i),
        Target::Figure(s) => sweep_figure(s),
        Target::FigDistortion => distortion_figure(&DistortionConfig::default()),
        Target::FigGap => gap_figure(),
    }
}
