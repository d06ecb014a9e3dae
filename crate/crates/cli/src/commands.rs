//! One function per subcommand. Each prints its resolved configuration to
//! stderr before doing any work, so stdout stays clean for CSV.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use jlkit::clusterability::{check_perturbation_robustness, measure_params, TransportReport};
use jlkit::datagen::{generate, MixtureSpec};
use jlkit::dimension::{
    dg_n_prime_with, dg_repetitions, n_prime_explicit, n_prime_implicit, DgDenominator,
    DimensionRequest,
};
use jlkit::geometry::{distortion_report, estimate_failure_rate, write_histogram_csv};
use jlkit::harness::{
    run_fixed_point, run_instance_compare, run_perturbation, run_sandwich, run_transport,
    Direction, FixedPointConfig, GapReading, HarnessOutcome, InstanceCompareConfig,
    PerturbationConfig, SandwichConfig, TransportHarnessConfig,
};
use jlkit::io::{read_dataset, read_partition, write_dataset, write_partition};
use jlkit::projection::OperatorSpec;
use jlkit::reproduce::{
    distortion_figure, reproduce as regenerate, CsvTable, DistortionConfig, Target,
};
use jlkit::JlError;

use crate::{
    Bound, ClusterabilityArgs, DimArgs, GenArgs, KmeansCompareArgs, ProjectArgs, ReproduceArgs,
    VerifyArgs,
};

fn config(name: &str, fields: &[(&str, String)]) {
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("config: {name} {}", body.join(" "));
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref()
        .map(|v| v.to_string())
        .unwrap_or_else(|| "-".into())
}

fn path(p: &Path) -> String {
    p.display().to_string()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn outcome_line(o: &HarnessOutcome) {
    if o.rate.trials == 0 {
        println!("{}: no eligible trials", o.label);
    } else {
        println!("{o}");
    }
}

pub fn dim(a: &DimArgs) -> Result<()> {
    config(
        "dim",
        &[
            ("m", a.m.to_string()),
            ("epsilon", a.epsilon.to_string()),
            ("delta", a.delta.to_string()),
            ("n", opt(&a.n)),
            ("dg", a.dg.to_string()),
            ("dg_original", a.dg_original.to_string()),
        ],
    );
    let req = DimensionRequest::new(a.m, a.epsilon, a.delta, a.n)?;
    let explicit = n_prime_explicit(&req);
    println!("n' explicit: {explicit}");
    if a.n.is_some() {
        match n_prime_implicit(&req) {
            Ok(implicit) => {
                println!("n' implicit: {implicit}");
                println!("ratio: {:.2}", explicit as f64 / implicit as f64);
            }
            Err(e @ JlError::Infeasible { .. }) => println!("n' implicit: none ({e})"),
            Err(e) => return Err(e.into()),
        }
    }
    if a.dg {
        let variant = if a.dg_original {
            DgDenominator::Original
        } else {
            DgDenominator::Transcribed
        };
        println!("dg n': {}", dg_n_prime_with(a.m, a.delta, variant)?);
        println!("dg repetitions: {}", dg_repetitions(a.m, a.epsilon)?);
    }
    Ok(())
}

fn emit(table: &CsvTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

pub fn reproduce(a: &ReproduceArgs) -> Result<()> {
    config(
        "reproduce",
        &[
            ("id", a.id.clone()),
            ("out", a.out.as_deref().map(path).unwrap_or("-".into())),
            ("seed", a.seed.to_string()),
        ],
    );
    let produce = |t: Target| -> Result<CsvTable> {
        Ok(match t {
            Target::FigDistortion => distortion_figure(&DistortionConfig {
                seed: a.seed,
                ..Default::default()
            })?,
            other => regenerate(other)?,
        })
    };
    if a.id == "all" {
        let Some(dir) = a.out.as_deref() else {
            bail!(JlError::Domain("`reproduce all` needs --out DIR".into()));
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in Target::all() {
            let file = dir.join(format!("{}.csv", t.id()));
            emit(&produce(t)?, Some(&file))?;
            println!("wrote {}", file.display());
        }
        return Ok(());
    }
    let target: Target = a.id.parse()?;
    emit(&produce(target)?, a.out.as_deref())
}

struct Resolved {
    n_prime: usize,
    source: &'static str,
    orthogonalize: bool,
}

struct DimChoice {
    nprime: Option<usize>,
    bound: Bound,
    epsilon: f64,
    delta: f64,
    orthogonalize: bool,
}

impl From<&ProjectArgs> for DimChoice {
    fn from(a: &ProjectArgs) -> Self {
        Self {
            nprime: a.nprime,
            bound: a.bound,
            epsilon: a.epsilon,
            delta: a.delta,
            orthogonalize: a.orthogonalize,
        }
    }
}

impl From<&KmeansCompareArgs> for DimChoice {
    fn from(a: &KmeansCompareArgs) -> Self {
        Self {
            nprime: a.nprime,
            bound: a.bound,
            epsilon: a.epsilon,
            delta: a.delta,
            orthogonalize: a.orthogonalize,
        }
    }
}

fn resolve_n_prime(a: &DimChoice, m: usize, n: usize) -> Result<Resolved> {
    if let Some(np) = a.nprime {
        return Ok(Resolved {
            n_prime: np,
            source: "flag",
            orthogonalize: a.orthogonalize,
        });
    }
    let req = DimensionRequest::new(m as u64, a.epsilon, a.delta, Some(n as u64))?;
    let explicit = n_prime_explicit(&req);
    let fits = |np: u64| (np as usize) < n;
    let use_explicit = match a.bound {
        Bound::Explicit => true,
        Bound::Implicit => false,
        Bound::Auto => fits(explicit),
    };
    let (np, source) = if use_explicit {
        (explicit, "explicit")
    } else {
        (n_prime_implicit(&req)?, "implicit")
    };
    if !fits(np) {
        bail!(JlError::Domain(format!(
            "the {source} bound gives n'={np}, which is not below n={n}"
        )));
    }
    Ok(Resolved {
        n_prime: np as usize,
        source,
        orthogonalize: a.orthogonalize || !use_explicit,
    })
}

pub fn project(a: &ProjectArgs) -> Result<()> {
    let data = read_dataset(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let r = resolve_n_prime(&a.into(), data.len(), data.dim())?;
    let spec = OperatorSpec {
        n: data.dim(),
        n_prime: r.n_prime,
        seed: a.seed,
        orthogonalize: r.orthogonalize,
    };
    config(
        "project",
        &[
            ("input", path(&a.input)),
            ("out", path(&a.out)),
            ("m", data.len().to_string()),
            ("n", data.dim().to_string()),
            ("n_prime", r.n_prime.to_string()),
            ("n_prime_source", r.source.to_string()),
            ("epsilon", a.epsilon.to_string()),
            ("delta", a.delta.to_string()),
            ("seed", a.seed.to_string()),
            ("orthogonalize", r.orthogonalize.to_string()),
        ],
    );
    let projected = spec.build()?.project(&data)?;
    write_dataset(&projected, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let sidecar = a.out.with_extension("operator");
    fs::write(&sidecar, spec.to_text())
        .with_context(|| format!("writing {}", sidecar.display()))?;
    println!(
        "wrote {} ({} x {})",
        a.out.display(),
        projected.len(),
        projected.dim()
    );
    println!("operator {}", sidecar.display());
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Result<()> {
    config(
        "verify",
        &[
            ("original", path(&a.original)),
            ("projected", path(&a.projected)),
            ("delta", a.delta.to_string()),
            (
                "histogram",
                a.histogram.as_deref().map(path).unwrap_or("-".into()),
            ),
            ("bin_width", opt(&a.bin_width)),
            ("failure_trials", opt(&a.failure_trials)),
            ("seed", a.seed.to_string()),
        ],
    );
    let original =
        read_dataset(&a.original).with_context(|| format!("reading {}", a.original.display()))?;
    let projected =
        read_dataset(&a.projected).with_context(|| format!("reading {}", a.projected.display()))?;
    let report = distortion_report(&original, &projected, a.delta)?;
    println!("pairs: {}", report.pair_count);
    println!("coincident pairs: {}", report.coincident_pairs);
    println!("band: [{}, {}]", report.band.0, report.band.1);
    println!("violations: {}", report.violations);
    println!("min quotient: {}", report.min_quotient());
    println!("max quotient: {}", report.max_quotient());
    println!("success={}", report.success);
    if let Some(h) = &a.histogram {
        let width = a.bin_width.unwrap_or_else(|| report.default_bin_width());
        if width.is_nan() || width <= 0.0 {
            bail!(JlError::Domain(format!(
                "bin width must be positive, got {width}"
            )));
        }
        let mut w = create(h)?;
        write_histogram_csv(&report.histogram(width), &mut w)?;
        w.flush()?;
        println!("histogram {}", h.display());
    }
    if let Some(trials) = a.failure_trials {
        let est = estimate_failure_rate(&original, projected.dim(), a.delta, trials, a.seed)?;
        println!(
            "failure rate: {}/{} = {:.4} (95% interval [{:.4}, {:.4}])",
            est.failures, est.trials, est.rate, est.wilson_interval.0, est.wilson_interval.1
        );
    }
    Ok(())
}

pub fn kmeans_compare(a: &KmeansCompareArgs) -> Result<()> {
    match &a.input {
        Some(input) => kmeans_compare_instance(a, input),
        None => kmeans_compare_harness(a),
    }
}

fn kmeans_compare_instance(a: &KmeansCompareArgs, input: &Path) -> Result<()> {
    let data = read_dataset(input).with_context(|| format!("reading {}", input.display()))?;
    let init = match &a.partition {
        Some(p) => {
            let (ids, partition) =
                read_partition(p).with_context(|| format!("reading {}", p.display()))?;
            if ids != data.ids() {
                bail!(JlError::MismatchedIds);
            }
            Some(partition)
        }
        None => None,
    };
    let k = match (a.k, &init) {
        (Some(k), Some(p)) if k != p.k() => {
            bail!(JlError::Domain(format!(
                "--k {k} disagrees with the partition's {} clusters",
                p.k()
            )))
        }
        (Some(k), _) => k,
        (None, Some(p)) => p.k(),
        (None, None) => bail!(JlError::Domain("give --k or --partition".into())),
    };
    let dim = resolve_n_prime(&a.into(), data.len(), data.dim())?;
    let cfg = InstanceCompareConfig {
        k,
        epsilon: a.epsilon,
        delta: a.delta,
        n_prime: Some(dim.n_prime),
        random_partitions: a.random_partitions,
        trials: a.trials,
        base_seed: a.seed,
        orthogonalize: dim.orthogonalize,
    };
    config(
        "kmeans-compare",
        &[
            ("input", path(input)),
            (
                "partition",
                a.partition.as_deref().map(path).unwrap_or("-".into()),
            ),
            ("k", k.to_string()),
            ("epsilon", a.epsilon.to_string()),
            ("delta", a.delta.to_string()),
            ("n_prime", dim.n_prime.to_string()),
            ("n_prime_source", dim.source.to_string()),
            ("orthogonalize", dim.orthogonalize.to_string()),
            ("random_partitions", a.random_partitions.to_string()),
            ("trials", a.trials.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    let r = run_instance_compare(&data, init, &cfg)?;
    println!("n' = {}", r.n_prime);
    println!("gap g = {:.6}, balance p = {:.6}", r.g, r.p);
    for (reading, bound) in GapReading::ALL.iter().zip(r.bounds) {
        println!(
            "admissible delta ({} reading): {:.6}",
            reading.name(),
            bound
        );
    }
    outcome_line(&r.sandwich);
    for (_, o) in &r.fixed_point_outcomes {
        outcome_line(o);
    }
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        r.write_csv(&mut w)?;
        w.flush()?;
        println!("trials {}", out.display());
    }
    Ok(())
}

fn kmeans_compare_harness(a: &KmeansCompareArgs) -> Result<()> {
    let sandwich = SandwichConfig {
        epsilon: a.epsilon,
        delta: a.delta,
        n_prime: a.nprime,
        random_partitions: a.random_partitions,
        trials: a.trials,
        base_seed: a.seed,
        ..Default::default()
    };
    let fixed = FixedPointConfig {
        epsilon: a.epsilon,
        delta: a.delta,
        n_prime: a.nprime,
        trials: a.trials,
        base_seed: a.seed,
        ..Default::default()
    };
    config(
        "kmeans-compare",
        &[
            ("mode", "harness".into()),
            ("sandwich_mixture", format!("{:?}", sandwich.mixture)),
            ("fixed_point_mixture", format!("{:?}", fixed.mixture)),
            ("epsilon", a.epsilon.to_string()),
            ("delta", a.delta.to_string()),
            ("n_prime", opt(&a.nprime)),
            ("random_partitions", a.random_partitions.to_string()),
            ("trials", a.trials.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let s = run_sandwich(&sandwich)?;
    println!("cost sandwich n' = {}", s.n_prime);
    outcome_line(&s.outcome);
    let forward = run_fixed_point(&fixed, Direction::Forward)?;
    let converse = run_fixed_point(&fixed, Direction::Converse)?;
    println!("fixed point n' = {}", forward.n_prime);
    for r in [&forward, &converse] {
        for (_, o) in &r.outcomes {
            outcome_line(o);
        }
    }
    if let Some(dir) = &a.out {
        let mut w = create(&dir.join("sandwich.csv"))?;
        s.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("fixed_point.csv"))?;
        forward.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("converse.csv"))?;
        converse.write_csv(&mut w)?;
        w.flush()?;
        println!("trials in {}", dir.display());
    }
    Ok(())
}

pub fn clusterability(a: &ClusterabilityArgs) -> Result<()> {
    match &a.input {
        Some(input) => clusterability_instance(a, input),
        None => clusterability_harness(a),
    }
}

fn clusterability_instance(a: &ClusterabilityArgs, input: &Path) -> Result<()> {
    let data = read_dataset(input).with_context(|| format!("reading {}", input.display()))?;
    let n_prime = match a.nprime {
        Some(np) => np,
        None => {
            let req = DimensionRequest::new(
                data.len() as u64,
                a.epsilon,
                a.delta,
                Some(data.dim() as u64),
            )?;
            match n_prime_implicit(&req) {
                Ok(v) => v as usize,
                Err(JlError::Infeasible { .. }) => n_prime_explicit(&req) as usize,
                Err(e) => return Err(e.into()),
            }
        }
    };
    config(
        "clusterability",
        &[
            ("input", path(input)),
            ("m", data.len().to_string()),
            ("n", data.dim().to_string()),
            ("k", a.k.to_string()),
            ("epsilon", a.epsilon.to_string()),
            ("delta", a.delta.to_string()),
            ("n_prime", n_prime.to_string()),
            ("s", opt(&a.s)),
            ("perturbations", a.perturbations.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    let op = OperatorSpec {
        n: data.dim(),
        n_prime,
        seed: a.seed,
        orthogonalize: false,
    }
    .build()?;
    let projected = op.project(&data)?;
    let mut before = measure_params(&data, a.k)?;
    let mut after = measure_params(&projected, a.k)?;
    if let Some(s) = a.s {
        let robust = check_perturbation_robustness(&data, a.k, s, a.perturbations, a.seed)?;
        println!("original robust at s={s}: {robust}");
        if robust {
            before.mult_perturb_s = Some(s);
        }
    }
    let report = TransportReport::new(before, Some(after), a.delta, a.epsilon)?;
    if let Some(s_p) = report.predicted_after.mult_perturb_s.filter(|&s| s < 1.0) {
        let robust = check_perturbation_robustness(
            &projected,
            a.k,
            s_p,
            a.perturbations,
            a.seed.wrapping_add(1),
        )?;
        println!("projected robust at s'={s_p:.6}: {robust}");
        if robust {
            after.mult_perturb_s = Some(s_p);
        }
    }
    let report = TransportReport {
        measured_after: Some(after),
        ..report
    };
    print_transport(&report);
    if report.degraded.any() {
        println!("note: some transported parameters fall outside their definition range");
    }
    if let Some(out) = &a.out {
        let mut w = create(out)?;
        report.write_csv(&mut w)?;
        w.flush()?;
        println!("report {}", out.display());
    }
    Ok(())
}

fn print_transport(report: &TransportReport) {
    let f = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
    println!(
        "{:<24} {:>12} {:>12} {:>12}  bound",
        "parameter", "before", "predicted", "measured"
    );
    for r in report.rows() {
        let ok = match r.bound_satisfied {
            Some(true) => "holds",
            Some(false) => "violated",
            None => "-",
        };
        println!(
            "{:<24} {:>12} {:>12} {:>12}  {ok}",
            r.parameter,
            f(r.before),
            f(r.predicted_after),
            f(r.measured_after)
        );
    }
}

fn clusterability_harness(a: &ClusterabilityArgs) -> Result<()> {
    let transport_cfg = TransportHarnessConfig {
        epsilon: a.epsilon,
        delta: a.delta,
        n_prime: a.nprime,
        trials: a.trials,
        base_seed: a.seed,
        ..Default::default()
    };
    let defaults = PerturbationConfig::default();
    let perturb_cfg = PerturbationConfig {
        epsilon: a.epsilon,
        delta: a.delta,
        s: a.s.unwrap_or(defaults.s),
        n_prime: a.nprime,
        perturbations: a.perturbations,
        trials: a.trials,
        base_seed: a.seed,
        ..defaults
    };
    config(
        "clusterability",
        &[
            ("mode", "harness".into()),
            ("transport_mixture", format!("{:?}", transport_cfg.mixture)),
            ("perturbation_mixture", format!("{:?}", perturb_cfg.mixture)),
            ("epsilon", a.epsilon.to_string()),
            ("delta", a.delta.to_string()),
            ("n_prime", opt(&a.nprime)),
            ("s", perturb_cfg.s.to_string()),
            ("perturbations", a.perturbations.to_string()),
            ("trials", a.trials.to_string()),
            ("seed", a.seed.to_string()),
        ],
    );
    let t = run_transport(&transport_cfg)?;
    println!("transport n' = {}", t.n_prime);
    for o in &t.outcomes {
        outcome_line(o);
    }
    let p = run_perturbation(&perturb_cfg)?;
    println!("perturbation n' = {}, s' = {:.6}", p.n_prime, p.s_projected);
    outcome_line(&p.outcome);
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut w = create(&dir.join("transport.csv"))?;
        t.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&dir.join("perturbation.csv"))?;
        p.write_csv(&mut w)?;
        w.flush()?;
        println!("trials in {}", dir.display());
    }
    Ok(())
}

pub fn gen(a: &GenArgs) -> Result<()> {
    let spec = MixtureSpec {
        k: a.k,
        sizes: a.sizes.clone(),
        dim: a.dim,
        centre_distance: a.centre_distance,
        cluster_sigma: a.sigma,
        target_gap: a.gap,
        seed: a.seed,
    };
    config(
        "gen",
        &[
            ("k", a.k.to_string()),
            (
                "sizes",
                a.sizes
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("dim", a.dim.to_string()),
            ("gap", a.gap.to_string()),
            ("centre_distance", a.centre_distance.to_string()),
            ("sigma", a.sigma.to_string()),
            ("seed", a.seed.to_string()),
            ("out", path(&a.out)),
            ("partition_out", path(&a.partition_out)),
        ],
    );
    let mix = generate(&spec)?;
    write_dataset(&mix.data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_partition(&a.partition_out, mix.data.ids(), &mix.truth)
        .with_context(|| format!("writing {}", a.partition_out.display()))?;
    if mix.seed_used != a.seed {
        println!(
            "seed {} missed the gap or fixed-point check; used {}",
            a.seed, mix.seed_used
        );
    }
    println!(
        "wrote {} ({} x {})",
        a.out.display(),
        mix.data.len(),
        mix.data.dim()
    );
    println!("partition {}", a.partition_out.display());
    Ok(())
}
