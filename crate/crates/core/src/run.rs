//! Executes a [`RunConfig`] and collects its artifacts.
//!
//! Hard contracts (invariants with fixed tolerances) that fail are listed in
//! [`RunOutput::failures`]; empirical constants and witnesses are reported
//! but never fail a run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_grid, Command, DatumName, KernelMethodName, PathName, RunConfig, SCHEMA_VERSION};
use crate::discrete::{build_discrete_l, spectrum, GridKind};
use crate::error::{Error, Result};
use crate::hermite::{MultiIndex, SpectralFunction};
use crate::inequalities::{
    calderon_zygmund_constant, drift_bound_suite, hardy_suite, higher_rellich_reports, interpolation_suite,
    rayleigh_sweep, rellich_constant, rellich_suite, reports_to_csv, sweep_to_csv, InequalityReport, RadialTrial,
    Trial, RELLICH_EPSILONS,
};
use crate::kernels::{biou_kernel_spectral, biou_kernel_subordination, KernelSource, SubordinationOptions};
use crate::measures::{audit, AuditGrid, Measure};
use crate::positivity::{
    default_time_grid, negativity_search, positivity_scan, Datum, EvolutionPath, Region, ScanOptions,
};
use crate::semigroup::{asymptotic_projection, evolve_a};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub contract: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub command: Command,
    /// The first artifact is the one printed when no output directory is set.
    pub artifacts: Vec<Artifact>,
    pub failures: Vec<Failure>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }

    pub fn failure_record(&self) -> String {
        pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command.name(),
            "status": "contract_violation",
            "failures": self.failures,
        }))
    }
}

/// Exit status for an error raised before or during a run: 2 for
/// configuration and precondition problems, 1 otherwise.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Misuse(_)
        | Error::Rejected(_)
        | Error::DimensionMismatch { .. }
        | Error::NegativeTime(_) => 2,
        _ => 1,
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

struct Collector {
    failures: Vec<Failure>,
}

impl Collector {
    fn check(&mut self, ok: bool, contract: &str, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(Failure { contract: contract.into(), detail: detail() });
        }
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut c = Collector { failures: Vec::new() };
    let artifacts = match config.command {
        Command::Evolve => run_evolve(config, &mut c)?,
        Command::Kernel => run_kernel(config, &mut c)?,
        Command::Verify => run_verify(config, &mut c)?,
        Command::Sharpness => run_sharpness(config)?,
        Command::Hypotheses => run_hypotheses(config)?,
        Command::Positivity => run_positivity(config, &mut c)?,
        Command::Spectrum => run_spectrum(config, &mut c)?,
    };
    Ok(RunOutput { command: config.command, artifacts, failures: c.failures })
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact { name: name.into(), contents }
}

fn gaussian_only(m: &Measure, what: &str) -> Result<()> {
    if !m.is_gaussian() {
        return Err(Error::Config(format!("{what} runs on the gaussian measure only")));
    }
    Ok(())
}

/// Seeded random expansion with coefficients in (−1, 1).
pub fn random_function(dimension: usize, max_degree: u32, rng: &mut ChaCha8Rng) -> Result<SpectralFunction> {
    let entries: Vec<(MultiIndex, f64)> =
        MultiIndex::enumerate(dimension, max_degree).into_iter().map(|a| (a, rng.gen_range(-1.0..1.0))).collect();
    SpectralFunction::from_entries(dimension, max_degree, entries)
}

fn run_evolve(config: &RunConfig, c: &mut Collector) -> Result<Vec<Artifact>> {
    let k = &config.knobs;
    let m = config.measure(config.command.default_dimension())?;
    gaussian_only(&m, "evolve")?;
    let f = match &k.input {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let f: SpectralFunction = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if f.dimension() != m.dimension() {
                return Err(Error::DimensionMismatch { expected: m.dimension(), got: f.dimension() });
            }
            f
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            random_function(m.dimension(), k.max_degree.unwrap_or(6), &mut rng)?
        }
    };
    let times = k.times.clone().unwrap_or_else(|| vec![0.0, 0.1, 0.5, 1.0, 5.0, 10.0]);
    let mean = asymptotic_projection(&f);
    let spread = f.sub(&mean)?.norm();
    let mut rows = Vec::new();
    let mut csv = String::from("t,mean,norm,deviation,gap_bound\n");
    for &t in &times {
        let r = evolve_a(&f, t)?;
        let deviation = r.state.sub(&mean)?.norm();
        let bound = (-t).exp() * spread;
        c.check((r.conserved_mean - f.mean()).abs() <= 1e-12 * f.mean().abs().max(1.0), "mean_conservation", || {
            format!("t = {t}: mean {} vs {}", r.conserved_mean, f.mean())
        });
        c.check(r.state.norm() <= f.norm() * (1.0 + 1e-12), "contraction", || format!("t = {t}"));
        c.check(deviation <= bound * (1.0 + 1e-12) + 1e-300, "spectral_gap_bound", || {
            format!("t = {t}: {deviation} > {bound}")
        });
        csv.push_str(&format!("{t:e},{:e},{:e},{deviation:e},{bound:e}\n", r.conserved_mean, r.state.norm()));
        rows.push(json!({
            "t": t, "mean": r.conserved_mean, "norm": r.state.norm(),
            "deviation": deviation, "gap_bound": bound, "state": r.state,
        }));
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION, "command": "evolve", "seed": config.seed,
        "initial": f, "results": rows,
    });
    Ok(vec![artifact("evolve.json", pretty(&doc)), artifact("evolve.csv", csv)])
}

fn tensor_points(axis: &[f64], dimension: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dimension {
        out = out.into_iter().flat_map(|p| axis.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    out
}

fn join(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn run_kernel(config: &RunConfig, c: &mut Collector) -> Result<Vec<Artifact>> {
    let k = &config.knobs;
    let m = config.measure(config.command.default_dimension())?;
    gaussian_only(&m, "kernel")?;
    let times = k.times.clone().unwrap_or_else(|| vec![1.0]);
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Config(format!("kernel times must be positive, got {t}")));
    }
    let axis = parse_grid(k.grid.as_deref().unwrap_or("-1:1:3"))?;
    let points = tensor_points(&axis, m.dimension());
    let methods = k.methods.clone().unwrap_or_else(|| vec![KernelMethodName::Subordination, KernelMethodName::Spectral]);
    if methods.is_empty() {
        return Err(Error::Config("no kernel methods selected".into()));
    }
    let max_degree = k.max_degree.unwrap_or(40);
    let opts = SubordinationOptions { epsilon: k.epsilon.unwrap_or(1e-3), ..Default::default() };
    let mut tuples = Vec::new();
    for &t in &times {
        for x in &points {
            for y in &points {
                tuples.push((t, x.clone(), y.clone()));
            }
        }
    }
    use rayon::prelude::*;
    let rows: Vec<Vec<(f64, f64)>> = tuples
        .par_iter()
        .map(|(t, x, y)| {
            methods
                .iter()
                .map(|meth| {
                    let v = match meth {
                        KernelMethodName::Subordination => biou_kernel_subordination(*t, x, y, opts)?,
                        KernelMethodName::Spectral => biou_kernel_spectral(*t, x, y, max_degree)?,
                    };
                    Ok((v.value, v.error_estimate))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let names: Vec<&str> = methods
        .iter()
        .map(|m| match m {
            KernelMethodName::Subordination => "subordination",
            KernelMethodName::Spectral => "spectral",
        })
        .collect();
    let n = m.dimension();
    let mut csv = String::from("t");
    for i in 1..=n {
        csv.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        csv.push_str(&format!(",y{i}"));
    }
    csv.push_str(",value,method,error_estimate,agreement\n");
    let mut records = Vec::new();
    for ((t, x, y), vals) in tuples.iter().zip(&rows) {
        let mut record = json!({"t": t, "x": x, "y": y});
        for (name, (v, e)) in names.iter().zip(vals) {
            record[*name] = json!({"value": v, "error_estimate": e});
        }
        // Agreement compares the first two methods.
        let agree = if vals.len() >= 2 {
            let diff = (vals[0].0 - vals[1].0).abs();
            let ok = diff <= vals[0].1 + vals[1].1;
            c.check(ok, "kernel_agreement", || format!("t = {t}, x = {x:?}, y = {y:?}: difference {diff:e}"));
            record["difference"] = json!(diff);
            record["agreement"] = json!(ok);
            ok.to_string()
        } else {
            String::new()
        };
        for (name, (v, e)) in names.iter().zip(vals) {
            csv.push_str(&format!("{t:e},{},{},{v:e},{name},{e:e},{agree}\n", join(x), join(y)));
        }
        records.push(record);
    }
    let doc = json!({"schema_version": SCHEMA_VERSION, "command": "kernel", "values": records});
    Ok(vec![artifact("kernel.csv", csv), artifact("kernel.json", pretty(&doc))])
}

fn spectral_trials(dimension: usize, extra: usize, seed: u64) -> Result<Vec<Trial>> {
    let degree = if dimension <= 3 { 4 } else { 3 };
    let mut out: Vec<Trial> = MultiIndex::enumerate(dimension, degree)
        .into_iter()
        .map(|a| Trial::Spectral { name: format!("H{:?}", a.entries()), function: SpectralFunction::mode(a) })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..extra {
        out.push(Trial::Spectral { name: format!("random{i}"), function: random_function(dimension, 4, &mut rng)? });
    }
    Ok(out)
}

fn run_verify(config: &RunConfig, c: &mut Collector) -> Result<Vec<Artifact>> {
    let k = &config.knobs;
    let m = config.measure(config.command.default_dimension())?;
    let n = m.dimension();
    if n < 3 {
        return Err(Error::Config(format!("verify needs N >= 3, got {n}")));
    }
    let epsilons = k.epsilons.clone().unwrap_or_else(|| RELLICH_EPSILONS.to_vec());
    let suite = RadialTrial::suite();
    let mut reports: Vec<InequalityReport> = Vec::new();
    let mut empirical = serde_json::Map::new();
    if n >= 5 {
        let r = rellich_suite(&m, &suite, &epsilons)?;
        empirical.insert("c1".into(), json!(r.c1));
        reports.extend(r.hardy.reports);
        reports.extend(r.reports);
        reports.extend(r.epsilon_reports);
        let higher = higher_rellich_reports(&m, &suite)?;
        empirical.insert(
            "higher".into(),
            json!(higher.iter().map(|o| json!({"name": o.reports[0].name, "c": o.constant})).collect::<Vec<_>>()),
        );
        reports.extend(higher.into_iter().flat_map(|o| o.reports));
    } else {
        let h = hardy_suite(&m, &suite)?;
        empirical.insert("c1".into(), json!(h.constant));
        reports.extend(h.reports);
    }
    let mut trials: Vec<Trial> = suite.iter().cloned().map(Trial::from).collect();
    if m.is_gaussian() {
        trials.extend(spectral_trials(n, k.random_trials.unwrap_or(20), config.seed)?);
    }
    let interp = interpolation_suite(&m, &trials, &epsilons)?;
    empirical.insert(
        "c_epsilon".into(),
        json!(epsilons.iter().zip(&interp).map(|(e, o)| json!({"epsilon": e, "c": o.constant})).collect::<Vec<_>>()),
    );
    reports.extend(interp.into_iter().flat_map(|o| o.reports));
    let drift = drift_bound_suite(&m, &trials)?;
    empirical.insert("drift_bound".into(), json!(drift.constant));
    reports.extend(drift.reports);
    empirical.insert("calderon_zygmund".into(), json!(calderon_zygmund_constant(&m, &trials)?));
    if n >= 5 {
        empirical.insert("rellich_constant".into(), json!(rellich_constant(n)));
    }
    for r in &reports {
        c.check(r.passed, "inequality_report", || format!("{} on {}: margin {:e}", r.name, r.trial, r.margin));
    }
    let doc = json!({
        "schema_version": SCHEMA_VERSION, "command": "verify", "measure": m.label(), "dimension": n,
        "seed": config.seed, "empirical": empirical, "reports": reports,
    });
    Ok(vec![artifact("verify.json", pretty(&doc)), artifact("verify.csv", reports_to_csv(&reports))])
}

fn run_sharpness(config: &RunConfig) -> Result<Vec<Artifact>> {
    let k = &config.knobs;
    let m = config.measure(config.command.default_dimension())?;
    let n = m.dimension() as f64;
    let gamma = k.gamma.unwrap_or(2.0 - n / 2.0);
    let gamma1 = k.gamma1.unwrap_or((2.0 - n / 2.0) / 2.0);
    let factor = k.c_factor.unwrap_or(1.05);
    let cval = factor * rellich_constant(m.dimension());
    let ns = k.ns.clone().unwrap_or_else(|| vec![10, 100, 1000, 10000]);
    if ns.is_empty() {
        return Err(Error::Config("empty n list".into()));
    }
    let probes = rayleigh_sweep(&m, cval, gamma, gamma1, &ns)?;
    let values: Vec<f64> = probes.iter().map(|p| p.lambda1_estimate).collect();
    let non_increasing = values.windows(2).all(|w| w[1] <= w[0]);
    let doc = json!({
        "schema_version": SCHEMA_VERSION, "command": "sharpness", "measure": m.label(),
        "dimension": m.dimension(), "c": cval, "c_factor": factor,
        "rellich_constant": rellich_constant(m.dimension()),
        "finding": {"non_increasing": non_increasing, "drop": values[0] - values[values.len() - 1]},
        "probes": probes,
    });
    Ok(vec![artifact("sharpness.json", pretty(&doc)), artifact("sharpness.csv", sweep_to_csv(&probes))])
}

fn run_hypotheses(config: &RunConfig) -> Result<Vec<Artifact>> {
    let k = &config.knobs;
    let m = config.measure(config.command.default_dimension())?;
    let epsilons = k.epsilons.clone().unwrap_or_else(|| vec![1.0, 0.1, 0.01]);
    let report = audit(&m, k.r0.unwrap_or(0.5), &epsilons, &AuditGrid::default())?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION, "command": "hypotheses", "all_passed": report.all_passed(),
        "report": report,
    });
    Ok(vec![artifact("hypotheses.json", pretty(&doc)), artifact("hypotheses.txt", report.to_table())])
}

fn run_positivity(config: &RunConfig, c: &mut Collector) -> Result<Vec<Artifact>> {
    let k = &config.knobs;
    let m = config.measure(config.command.default_dimension())?;
    gaussian_only(&m, "positivity")?;
    let n = m.dimension();
    let region = Region::Box { lo: vec![k.lo.unwrap_or(-1.0); n], hi: vec![k.hi.unwrap_or(1.0); n] };
    let datum = match k.datum.unwrap_or(DatumName::Indicator) {
        DatumName::Indicator => Datum::indicator(&region),
        DatumName::Constant => Datum::constant(1.0),
        DatumName::Bump => Datum::bump(vec![0.0; n], 0.5 * (k.hi.unwrap_or(1.0) - k.lo.unwrap_or(-1.0))),
    };
    let max_degree = k.max_degree.unwrap_or(40);
    let path = match k.path.unwrap_or(PathName::Spectral) {
        PathName::Spectral => EvolutionPath::Spectral { max_degree },
        PathName::Kernel => EvolutionPath::Kernel { source: KernelSource::Spectral { max_degree }, panels: 8, order: 16 },
    };
    let default_samples = if n == 1 { 201 } else { 41 };
    let opts = ScanOptions { samples_per_axis: k.samples_per_axis.unwrap_or(default_samples), path, ..Default::default() };
    let times = k.times.clone().unwrap_or_else(default_time_grid);
    let scan = positivity_scan(&datum, &region, &times, &opts)?;
    let t_final = *times.last().unwrap();
    let last = *scan.minima.last().unwrap();
    c.check((last - scan.floor).abs() <= 10.0 * (-t_final).exp(), "asymptotic_floor", || {
        format!("min {last} at t = {t_final} vs floor {}", scan.floor)
    });
    let line: Vec<Vec<f64>> = (0..=240)
        .map(|i| {
            let mut x = vec![0.0; n];
            x[0] = -6.0 + 0.05 * i as f64;
            x
        })
        .collect();
    let spec_opts = ScanOptions { path: EvolutionPath::Spectral { max_degree }, ..opts };
    let witness = negativity_search(&datum, &region, &[0.005, 0.01, 0.02], &line, &spec_opts)?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION, "command": "positivity",
        "summary": {"t0": scan.t0, "floor": scan.floor, "negative_witness": scan.negative_witness},
        "negativity_search": witness,
        "monotone_tail": scan.monotone_tail,
        "scan": scan,
    });
    Ok(vec![artifact("positivity.json", pretty(&doc)), artifact("positivity.csv", scan.to_csv())])
}

fn run_spectrum(config: &RunConfig, c: &mut Collector) -> Result<Vec<Artifact>> {
    let k = &config.knobs;
    let m = config.measure(config.command.default_dimension())?;
    let kind = k.grid_kind.unwrap_or(if m.dimension() == 1 { GridKind::Line } else { GridKind::Radial });
    let op = build_discrete_l(&m, kind, k.r_max.unwrap_or(8.0), k.h.unwrap_or(0.01)).map_err(|e| match e {
        Error::Misuse(s) => Error::Config(s),
        other => other,
    })?;
    let pairs = spectrum(&op, k.k.unwrap_or(6))?;
    let zero_dev = pairs.vectors[0].iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    c.check(pairs.values[0].abs() < 1e-8, "zero_eigenvalue", || format!("lambda_0 = {:e}", pairs.values[0]));
    c.check(zero_dev < 1e-8, "constant_ground_state", || format!("deviation {zero_dev:e}"));
    let ones = vec![1.0; op.len()];
    let row = op.apply(&ones)?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    c.check(row == 0.0, "row_sum_zero", || format!("max |L_h 1| = {row:e}"));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let u: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let a = op.inner(&op.apply(&u)?, &v);
    let b = op.inner(&u, &op.apply(&v)?);
    c.check((a - b).abs() <= 1e-12 * a.abs().max(1.0), "weighted_symmetry", || format!("{a:e} vs {b:e}"));
    let doc = json!({
        "schema_version": SCHEMA_VERSION, "command": "spectrum", "measure": m.label(),
        "grid": {"kind": kind, "r_max": k.r_max.unwrap_or(8.0), "h": op.h(), "nodes": op.len()},
        "eigenvalues": pairs.values, "gap": pairs.values[1] - pairs.values[0],
    });
    Ok(vec![artifact("spectrum.json", pretty(&doc)), artifact("spectrum.csv", pairs.to_csv())])
}
