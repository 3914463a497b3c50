mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use citest_core::generators::{ci_coupling, discrete_alt, discrete_null, AdversarialContinuousSpec, AdversarialDiscreteSpec, ContinuousAlt, ContinuousNull, CouplingSpec};
use citest_core::harness::{self, preset_experiments, read_dataset_path, run_experiment, write_dataset, ExperimentSpec, GeneratorSpec, Preset, SizePowerTable};
use citest_core::smoothness::{empirical_lipschitz, ConditionalLaw, DiscreteLaw, GridLaw, SmoothnessClass};
use citest_core::{rng, run_test, CiError};

use config::{FileConfig, TestFlags};

#[derive(Parser, Debug)]
#[command(name = "citest", version, about = "Binned U-statistic tests of conditional independence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one test on a CSV dataset and print the JSON report.
    Test {
        data: PathBuf,
        #[command(flatten)]
        flags: TestFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replicated size/power study; writes a CSV table and a JSON metadata file.
    Simulate {
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        generator: GeneratorFlags,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        flags: TestFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset as CSV.
    Generate {
        #[command(flatten)]
        generator: GeneratorFlags,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate a Lipschitz constant of a generator family.
    Smoothness {
        #[command(flatten)]
        generator: GeneratorFlags,
        #[arg(long, default_value = "tv")]
        class: String,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// Cells per axis when discretizing continuous families.
        #[arg(long, default_value_t = 64)]
        cells: usize,
        /// Seed for the random signs of adversarial families.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replace a dataset by its conditionally independent coupling.
    Couple {
        data: PathBuf,
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long = "big-m", default_value_t = 1.0)]
        big_m: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default, Clone)]
struct GeneratorFlags {
    /// discrete-null, discrete-alt, continuous-null, continuous-alt,
    /// adversarial-discrete, adversarial-rate or adversarial-continuous.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    ell1: Option<usize>,
    #[arg(long)]
    ell2: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "d-prime")]
    d_prime: Option<usize>,
    /// Smoothness of the adversarial-continuous family.
    #[arg(long = "gen-s")]
    gen_s: Option<f64>,
    /// Distance scale of the adversarial-rate family.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<CiError> for Failure {
    fn from(e: CiError) -> Self {
        match e {
            CiError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn required<T>(v: Option<T>, flag: &str, family: &str) -> CliResult<T> {
    v.ok_or_else(|| Failure::Usage(format!("--{flag} is required for family {family}")))
}

impl GeneratorFlags {
    fn merged(&self, file: &FileConfig) -> GeneratorFlags {
        GeneratorFlags {
            family: self.family.clone().or_else(|| file.family.clone()),
            ell1: self.ell1.or(file.ell1),
            ell2: self.ell2.or(file.ell2),
            rho: self.rho.or(file.rho),
            d: self.d.or(file.d),
            d_prime: self.d_prime.or(file.d_prime),
            gen_s: self.gen_s.or(file.gen_s),
            c: self.c.or(file.c),
        }
    }

    fn spec(&self) -> CliResult<GeneratorSpec> {
        let family = self.family.as_deref().ok_or_else(|| Failure::Usage("--family is required".into()))?;
        let (ell1, ell2) = (self.ell1.unwrap_or(2), self.ell2.unwrap_or(2));
        Ok(match family {
            "discrete-null" => GeneratorSpec::DiscreteNull,
            "discrete-alt" => GeneratorSpec::DiscreteAlt,
            "continuous-null" => GeneratorSpec::ContinuousNull,
            "continuous-alt" => GeneratorSpec::ContinuousAlt,
            "adversarial-discrete" => GeneratorSpec::AdversarialDiscrete {
                ell1,
                ell2,
                rho: required(self.rho, "rho", family)?,
                d: required(self.d, "d", family)?,
            },
            "adversarial-rate" => GeneratorSpec::AdversarialRate { ell1, ell2, c: required(self.c, "c", family)? },
            "adversarial-continuous" => GeneratorSpec::AdversarialContinuous {
                rho: required(self.rho, "rho", family)?,
                d: required(self.d, "d", family)?,
                d_prime: required(self.d_prime, "d-prime", family)?,
                s: self.gen_s.unwrap_or(1.0),
            },
            other => return Err(Failure::Usage(format!("unknown family '{other}'"))),
        })
    }
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Data(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Block<'a> {
    experiment: &'a ExperimentSpec,
    /// Half-open range of data rows in the CSV.
    rows: (usize, usize),
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    preset: Option<&'a str>,
    blocks: Vec<Block<'a>>,
}

fn simulate(
    preset: Option<String>,
    generator: GeneratorFlags,
    sizes: Option<Vec<usize>>,
    reps: Option<usize>,
    flags: TestFlags,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let file = flags.file_config()?;
    let preset = preset.or_else(|| file.preset.clone());
    let out = out.or_else(|| file.out.clone());
    let experiments = match &preset {
        Some(p) => {
            let p: Preset = p.parse()?;
            let seed = flags.seed.or(file.seed).unwrap_or(0);
            preset_experiments(p, seed)
        }
        None => {
            let config = flags.to_config(&file)?;
            let sizes = sizes.or_else(|| file.sizes.clone()).ok_or_else(|| Failure::Usage("--sizes or --preset is required".into()))?;
            vec![ExperimentSpec {
                generator: generator.merged(&file).spec()?,
                sizes,
                replications: reps.or(file.reps).unwrap_or(100),
                seed: config.seed,
                config,
            }]
        }
    };
    let mut table = SizePowerTable::default();
    let mut blocks = Vec::new();
    for e in &experiments {
        let t = run_experiment(e)?;
        let start = table.rows.len();
        table.rows.extend(t.rows);
        blocks.push(Block { experiment: e, rows: (start, table.rows.len()) });
    }
    let mut w = output(out.as_deref())?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let meta = SimulationMeta { preset: preset.as_deref(), blocks };
    match &out {
        Some(p) => emit_json(&meta, Some(&p.with_extension("json"))),
        None => {
            serde_json::to_writer_pretty(io::stderr().lock(), &meta).map_err(|e| Failure::Data(e.to_string()))?;
            eprintln!();
            Ok(())
        }
    }
}

fn smoothness(generator: GeneratorFlags, class: &str, grid: usize, cells: usize, seed: u64, out: Option<PathBuf>) -> CliResult<()> {
    let class: SmoothnessClass = class.parse()?;
    let spec = generator.spec()?;
    let mut r = rng::seeded(seed);
    let report = match spec {
        GeneratorSpec::DiscreteNull => empirical_lipschitz(&DiscreteLaw(&discrete_null()), class, grid)?,
        GeneratorSpec::DiscreteAlt => empirical_lipschitz(&DiscreteLaw(&discrete_alt()), class, grid)?,
        GeneratorSpec::ContinuousNull => empirical_lipschitz(&GridLaw { model: &ContinuousNull, cells }, class, grid)?,
        GeneratorSpec::ContinuousAlt => empirical_lipschitz(&GridLaw { model: &ContinuousAlt, cells }, class, grid)?,
        GeneratorSpec::AdversarialDiscrete { ell1, ell2, rho, d } => {
            let m = AdversarialDiscreteSpec::random(ell1, ell2, rho, d, &mut r)?;
            empirical_lipschitz(&DiscreteLaw(&m), class, grid)?
        }
        GeneratorSpec::AdversarialContinuous { rho, d, d_prime, s } => {
            let m = AdversarialContinuousSpec::random(rho, d, d_prime, s, &mut r)?;
            let law: &dyn ConditionalLaw = &GridLaw { model: &m, cells };
            empirical_lipschitz(law, class, grid)?
        }
        GeneratorSpec::AdversarialRate { .. } => {
            return Err(Failure::Usage("adversarial-rate depends on n; use adversarial-discrete".into()))
        }
    };
    emit_json(&report, out.as_deref())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Test { data, flags, out } => {
            let file = flags.file_config()?;
            let config = flags.to_config(&file)?;
            let data = read_dataset_path(&data)?;
            let report = run_test(&data, &config)?;
            emit_json(&report, out.or(file.out).as_deref())
        }
        Command::Simulate { preset, generator, sizes, reps, flags, out } => {
            simulate(preset, generator, sizes, reps, flags, out)
        }
        Command::Generate { generator, n, seed, out } => {
            let data = generator.spec()?.generate(n, &mut rng::seeded(seed))?;
            let mut w = output(out.as_deref())?;
            write_dataset(&mut w, &data)?;
            w.flush()?;
            Ok(())
        }
        Command::Smoothness { generator, class, grid, cells, seed, out } => {
            smoothness(generator, &class, grid, cells, seed, out)
        }
        Command::Couple { data, m, big_m, seed, out } => {
            let spec = CouplingSpec::new(m, big_m)?;
            let data = read_dataset_path(&data)?;
            let coupled = ci_coupling(&data, &spec, &mut rng::seeded(seed))?;
            let mut w = output(out.as_deref())?;
            write_dataset(&mut w, &coupled)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var("CITEST_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("CITEST_THREADS must be a positive integer, got '{v}'"))),
        _ => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = threads_from_env()
        .and_then(|t| harness::init_thread_pool(t).map_err(Failure::from))
        .and_then(|_| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

