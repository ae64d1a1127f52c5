use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use riemann_newton::Algorithm;
use rnewton_bench::profile::robustness_csv;
use rnewton_bench::{
    performance_profile, read_records, robustness_table, run_suite, write_records, Metric,
    SolverSpec, Suite, SuiteConfig,
};

#[derive(Parser)]
#[command(name = "rnewton", about = "Riemannian Newton benchmarks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark suite and write one CSV record per run
    Bench {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[command(flatten)]
        opts: BenchOpts,
    },
    /// Performance profile (tau, solver, rho) from a records file
    Profile {
        records: PathBuf,
        #[arg(long, default_value = "cpu_seconds")]
        metric: Metric,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Percentage of solved problems per solver and epsilon
    Robustness {
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    SphereNc,
    Rayleigh,
    Tsvd,
    Spd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    F1,
    F2,
}

#[derive(Args)]
struct BenchOpts {
    /// Algorithms to run (1 pure, 2 damped, 3 modified damped)
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    algorithm: Vec<Algorithm>,
    /// Retractions to run; defaults to every retraction of the manifold
    #[arg(long, value_delimiter = ',')]
    retraction: Vec<String>,
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    #[arg(long, default_value_t = 1e-3)]
    sigma: f64,
    /// Seeds, one instance per seed (and family / epsilon)
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seed: Vec<u64>,
    /// Dimensions: `n` entries, or `mxnxp` for tsvd
    #[arg(long, value_delimiter = ',')]
    dims: Vec<String>,
    /// Matrix families for rayleigh and spd
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    families: Vec<u8>,
    /// Perturbation scale of the tsvd starting points
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Sweep epsilon over 1e-4, 1e-3, ..., 1e3 (tsvd)
    #[arg(long)]
    epsilon_sweep: bool,
    /// Objective for the spd suite
    #[arg(long, value_enum, default_value = "f1")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Paper-scale default dimensions
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_dims(items: &[String]) -> Result<Vec<Vec<usize>>> {
    items
        .iter()
        .map(|s| {
            s.split('x')
                .map(|x| {
                    x.trim()
                        .parse::<usize>()
                        .with_context(|| format!("bad dimension '{s}'"))
                })
                .collect()
        })
        .collect()
}

fn bench(suite: SuiteArg, opts: BenchOpts) -> Result<()> {
    let suite = match (suite, opts.objective) {
        (SuiteArg::SphereNc, _) => Suite::SphereNc,
        (SuiteArg::Rayleigh, _) => Suite::Rayleigh,
        (SuiteArg::Tsvd, _) => Suite::Tsvd,
        (SuiteArg::Spd, ObjectiveArg::F1) => Suite::SpdF1,
        (SuiteArg::Spd, ObjectiveArg::F2) => Suite::SpdF2,
    };
    let mut config = SuiteConfig::new(suite);
    config.dims = if opts.dims.is_empty() {
        suite.default_dims(opts.paper_scale)
    } else {
        parse_dims(&opts.dims)?
    };
    config.seeds = opts.seed;
    config.families = opts.families;
    config.epsilons = vec![opts.epsilon];
    if opts.epsilon_sweep {
        config = config.with_epsilon_sweep();
    }
    config.max_iter = opts.max_iter;
    let retractions = if opts.retraction.is_empty() {
        suite.retractions()
    } else {
        opts.retraction
    };
    if opts.algorithm.is_empty() {
        bail!("no algorithm selected");
    }
    for &algorithm in &opts.algorithm {
        for r in &retractions {
            let mut spec = SolverSpec::new(algorithm, r.clone(), opts.theta);
            spec.sigma = opts.sigma;
            config.solvers.push(spec);
        }
    }
    let records = run_suite(&config)?;
    let mut out = output(&opts.out)?;
    write_records(&mut out, &config.describe(), &records)?;
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bench { suite, opts } => bench(suite, opts),
        Command::Profile {
            records,
            metric,
            out,
        } => {
            let (config, rows) = read_records(
                File::open(&records).with_context(|| format!("opening {}", records.display()))?,
            )?;
            let profile = performance_profile(&rows, metric, None)?;
            let mut w = output(&out)?;
            writeln!(
                w,
                "# profile metric={metric} source={} {config}",
                records.display()
            )?;
            w.write_all(profile.to_csv().as_bytes())?;
            w.flush()?;
            Ok(())
        }
        Command::Robustness { records, out } => {
            let (config, rows) = read_records(
                File::open(&records).with_context(|| format!("opening {}", records.display()))?,
            )?;
            let table = robustness_table(&rows)?;
            let mut w = output(&out)?;
            writeln!(w, "# robustness source={} {config}", records.display())?;
            w.write_all(robustness_csv(&table).as_bytes())?;
            w.flush()?;
            Ok(())
        }
    }
}
