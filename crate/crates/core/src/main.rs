use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use biko::config::{Command, DatumName, KernelMethodName, Knobs, PathName, RunConfig};
use biko::discrete::GridKind;
use biko::measures::{FamilyName, MeasureConfig};
use biko::run::{exit_code_for, run, RunOutput};
use biko::Error;

#[derive(Parser)]
#[command(name = "biko", version, about = "Kolmogorov and bi-Kolmogorov operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve a seeded spectral expansion under e^{-tA}.
    Evolve(Flags),
    /// Tabulate the e^{-tA} kernel by subordination and by spectral sum.
    Kernel(Flags),
    /// Check the Hardy, Rellich and interpolation inequalities.
    Verify(Flags),
    /// Rayleigh quotient sweep near the Rellich constant.
    Sharpness(Flags),
    /// Audit a measure against the structural hypotheses.
    Hypotheses(Flags),
    /// Scan minima of e^{-tA}f on a compact set.
    Positivity(Flags),
    /// Low spectrum of the discretized operator.
    Spectrum(Flags),
    /// Execute a JSON run config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gaussian,
    Power,
    Rational,
    SquaredPower,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Subordination,
    Spectral,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatumArg {
    Indicator,
    Constant,
    Bump,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Spectral,
    Kernel,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Line,
    Radial,
}

#[derive(Args)]
struct Flags {
    #[arg(long, value_enum)]
    measure: Option<Family>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    /// Measure config file, instead of the flags above.
    #[arg(long)]
    measure_config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_degree: Option<u32>,
    #[arg(long = "t", value_delimiter = ',', allow_hyphen_values = true)]
    times: Option<Vec<f64>>,
    /// start:stop:count
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    c_factor: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma1: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<u64>>,
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    datum: Option<DatumArg>,
    #[arg(long, value_enum)]
    path: Option<PathArg>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    grid_kind: Option<GridArg>,
    #[arg(long)]
    random_trials: Option<usize>,
    /// Spectral coefficients JSON for evolve.
    #[arg(long)]
    input: Option<PathBuf>,
}

impl Flags {
    fn into_config(self, command: Command) -> Result<RunConfig, Error> {
        let mut params = serde_json::Map::new();
        let mut put = |key: &str, v: Option<f64>| {
            if let Some(v) = v {
                params.insert(key.into(), serde_json::json!(v));
            }
        };
        put("m", self.m);
        put("alpha", self.alpha);
        put("beta", self.beta);
        put("c1", self.c1);
        put("c2", self.c2);
        let measure = match (self.measure, self.dim) {
            (None, None) if params.is_empty() => None,
            (family, dim) => Some(MeasureConfig {
                family: match family.unwrap_or(Family::Gaussian) {
                    Family::Gaussian => FamilyName::Gaussian,
                    Family::Power => FamilyName::Power,
                    Family::Rational => FamilyName::Rational,
                    Family::SquaredPower => FamilyName::SquaredPower,
                },
                params,
                dimension: dim.unwrap_or(command.default_dimension()),
            }),
        };
        if measure.is_some() && self.measure_config.is_some() {
            return Err(Error::Config("--measure-config excludes the measure flags".into()));
        }
        let knobs = Knobs {
            max_degree: self.max_degree,
            times: self.times,
            grid: self.grid,
            methods: self.methods.map(|v| {
                v.into_iter()
                    .map(|m| match m {
                        Method::Subordination => KernelMethodName::Subordination,
                        Method::Spectral => KernelMethodName::Spectral,
                    })
                    .collect()
            }),
            epsilon: self.epsilon,
            r0: self.r0,
            epsilons: self.epsilons,
            c_factor: self.c_factor,
            gamma: self.gamma,
            gamma1: self.gamma1,
            ns: self.ns,
            lo: self.lo,
            hi: self.hi,
            samples_per_axis: self.samples,
            datum: self.datum.map(|d| match d {
                DatumArg::Indicator => DatumName::Indicator,
                DatumArg::Constant => DatumName::Constant,
                DatumArg::Bump => DatumName::Bump,
            }),
            path: self.path.map(|p| match p {
                PathArg::Spectral => PathName::Spectral,
                PathArg::Kernel => PathName::Kernel,
            }),
            r_max: self.r_max,
            h: self.h,
            k: self.k,
            grid_kind: self.grid_kind.map(|g| match g {
                GridArg::Line => GridKind::Line,
                GridArg::Radial => GridKind::Radial,
            }),
            random_trials: self.random_trials,
            input: self.input,
        };
        let mut config = RunConfig::new(command);
        config.measure = measure;
        config.measure_path = self.measure_config;
        config.output_dir = self.out;
        config.seed = self.seed;
        config.knobs = knobs;
        Ok(config)
    }
}

fn configure_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("BIKO_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("BIKO_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))
}

fn write_artifacts(dir: &Path, output: &RunOutput) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    for a in &output.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    let failure = dir.join("failure.json");
    if output.failures.is_empty() {
        if failure.exists() {
            std::fs::remove_file(failure)?;
        }
    } else {
        std::fs::write(failure, output.failure_record())?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<RunOutput, Error> {
    configure_threads()?;
    let config = match cli.command {
        Sub::Evolve(f) => f.into_config(Command::Evolve)?,
        Sub::Kernel(f) => f.into_config(Command::Kernel)?,
        Sub::Verify(f) => f.into_config(Command::Verify)?,
        Sub::Sharpness(f) => f.into_config(Command::Sharpness)?,
        Sub::Hypotheses(f) => f.into_config(Command::Hypotheses)?,
        Sub::Positivity(f) => f.into_config(Command::Positivity)?,
        Sub::Spectrum(f) => f.into_config(Command::Spectrum)?,
        Sub::Run { config, out } => {
            let mut c = RunConfig::load(&config)?;
            if out.is_some() {
                c.output_dir = out;
            }
            c
        }
    };
    let output = run(&config)?;
    match &config.output_dir {
        Some(dir) => write_artifacts(dir, &output)?,
        None => print!("{}", output.artifacts[0].contents),
    }
    if !output.failures.is_empty() {
        eprint!("{}", output.failure_record());
    }
    Ok(output)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(output) => ExitCode::from(output.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
