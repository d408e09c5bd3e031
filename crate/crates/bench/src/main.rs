use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use symscale::bench::{
    performance_profile, reliability, run_linear, run_suite, LinearCase, Metric, ResultsTable, RunConfig,
};
use symscale::controller::{PolicyKind, Scaler};
use symscale::kkt::problems::{ill_scaled_family, toy_problems};
use symscale::kkt::{NlpProblem, QpProblem};
use symscale::sparsemat::load_matrix_market;

#[derive(Parser)]
#[command(name = "bench", about = "Scaling benchmarks for sparse symmetric indefinite solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Interior-point runs on NLP problems.
    Nlp,
    /// One factorization and solve per Matrix Market file.
    Linear,
}

#[derive(Subcommand)]
enum Command {
    /// Run problems under every requested scaler.
    Run {
        /// Comma-separated sources: `toy`, `ill-scaled`, directories, or
        /// files (`.json` problems, `.mtx` matrices).
        #[arg(long, value_delimiter = ',', default_value = "toy")]
        problems: Vec<String>,
        /// Comma-separated scalers; `none` runs unscaled.
        #[arg(long, value_delimiter = ',', default_value = "none,matching")]
        scalers: Vec<String>,
        #[arg(long, default_value = "odhdr")]
        policy: String,
        #[arg(long, default_value_t = 1e-8)]
        u: f64,
        #[arg(long, default_value_t = 0.05)]
        delay_fraction: f64,
        /// Seconds per run.
        #[arg(long, default_value_t = 1000.0)]
        time_limit: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale the first factorization regardless of the policy triggers.
        #[arg(long)]
        force_first: bool,
        #[arg(long, value_enum, default_value = "nlp")]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// CSV output; also writes a JSON mirror next to it.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Performance profile series (`config,tau,rho`) from a results file.
    Profile {
        #[arg(long, default_value = "time")]
        metric: String,
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solved percentage per config.
    Reliability { results: PathBuf },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            problems,
            scalers,
            policy,
            u,
            delay_fraction,
            time_limit,
            seed,
            force_first,
            mode,
            jobs,
            out,
        } => {
            if !(time_limit.is_finite() && time_limit > 0.0) {
                bail!("--time-limit must be a positive number of seconds");
            }
            let policy: PolicyKind = policy.parse()?;
            let configs = scalers
                .iter()
                .map(|s| {
                    let scaler = if s.eq_ignore_ascii_case("none") { None } else { Some(s.parse::<Scaler>()?) };
                    let cfg = RunConfig {
                        u_init: u,
                        delay_fraction,
                        time_limit: Duration::from_secs_f64(time_limit),
                        seed,
                        force_first,
                        ..RunConfig::new(scaler, policy)
                    };
                    cfg.validate()?;
                    Ok(cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            let table = match mode {
                Mode::Nlp => run_suite(&load_problems(&problems)?, &configs, jobs)?,
                Mode::Linear => run_linear(&load_matrices(&problems)?, &configs)?,
            };
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            table.write_csv(file)?;
            fs::write(out.with_extension("json"), table.to_json()?)?;
            for r in reliability(&table)? {
                println!("{r}");
            }
        }
        Command::Profile { metric, results, out } => {
            let metric: Metric = metric.parse()?;
            let table = ResultsTable::load(&results).with_context(|| format!("reading {}", results.display()))?;
            let curves = performance_profile(&table, metric)?;
            let csv = curves.to_csv()?;
            match out {
                Some(path) => {
                    fs::write(&path, &csv)?;
                    fs::write(path.with_extension("json"), serde_json::to_string_pretty(&curves)?)?;
                }
                None => print!("{csv}"),
            }
        }
        Command::Reliability { results } => {
            let table = ResultsTable::load(&results).with_context(|| format!("reading {}", results.display()))?;
            for r in reliability(&table)? {
                println!("{r}");
            }
        }
    }
    Ok(())
}

fn files_in(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn load_problems(sources: &[String]) -> Result<Vec<Box<dyn NlpProblem>>> {
    let mut out: Vec<Box<dyn NlpProblem>> = Vec::new();
    for src in sources {
        match src.as_str() {
            "toy" => out.extend(toy_problems()),
            "ill-scaled" => out.extend(ill_scaled_family(10)),
            path => {
                let path = Path::new(path);
                let files = if path.is_dir() { files_in(path, "json")? } else { vec![path.to_path_buf()] };
                for f in files {
                    let p = QpProblem::load(&f).with_context(|| format!("loading {}", f.display()))?;
                    out.push(Box::new(p));
                }
            }
        }
    }
    if out.is_empty() {
        bail!("no problems found");
    }
    Ok(out)
}

fn load_matrices(sources: &[String]) -> Result<Vec<LinearCase>> {
    let mut out = Vec::new();
    for src in sources {
        let path = Path::new(src);
        let files = if path.is_dir() { files_in(path, "mtx")? } else { vec![path.to_path_buf()] };
        for f in files {
            let matrix = load_matrix_market(&f).with_context(|| format!("loading {}", f.display()))?;
            let name = f.file_stem().map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned());
            out.push(LinearCase { name, matrix });
        }
    }
    if out.is_empty() {
        bail!("no matrices found");
    }
    Ok(out)
}
