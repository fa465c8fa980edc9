use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loopsched::core::eval::render_regret_table;
use loopsched::core::simulator::simulate_executions;
use loopsched::core::Schedule;
use loopsched::dataset::{save_dataset, ConfigSnapshot, LoopDatasetFile};
use loopsched::error::{Error, ExitStatus};
use loopsched::tuner::{report, suggest, tune_sim, ConfigOverrides};
use loopsched::workload::load_workload_spec;

#[derive(Parser)]
#[command(name = "loopsched", version, about = "Offline tuner for self-scheduled parallel loops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct TuneArgs {
    /// Model each execution separately (locality-aware surrogate).
    #[arg(long)]
    locality: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of BO iterations after the warm-up.
    #[arg(long)]
    iters: Option<usize>,
    /// Number of warm-up (Sobol) points.
    #[arg(long)]
    init: Option<usize>,
}

impl From<TuneArgs> for ConfigOverrides {
    fn from(a: TuneArgs) -> Self {
        ConfigOverrides {
            locality: a.locality,
            seed: a.seed,
            n_iters: a.iters,
            n_init: a.init,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty dataset for a loop.
    Init {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        loop_id: String,
        /// Iteration count of the loop, if known.
        #[arg(long)]
        tasks: Option<u64>,
        #[command(flatten)]
        tune: TuneArgs,
    },
    /// Propose the FSS parameter for the next run of a loop.
    Suggest {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        tune: TuneArgs,
    },
    /// Tune FSS against a simulated workload.
    TuneSim {
        #[arg(long)]
        workload: PathBuf,
        #[command(flatten)]
        tune: TuneArgs,
        /// Write the evaluation trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Summarize a dataset.
    Report {
        #[arg(long)]
        data: PathBuf,
        /// Emit `iter,x,theta,total_s,best_s` rows instead.
        #[arg(long)]
        csv: bool,
    },
    /// Simulate one schedule on a workload.
    Sim {
        #[arg(long)]
        workload: PathBuf,
        #[arg(long)]
        schedule: String,
        /// Print only execution ℓ.
        #[arg(long)]
        ell: Option<usize>,
    },
    /// Build a regret table from a cost matrix (CSV or JSON).
    Regret {
        #[arg(long = "in")]
        input: PathBuf,
        /// Markdown output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn write(path: &PathBuf, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Init { data, loop_id, tasks, tune } => {
            if data.exists() {
                return Err(Error::Usage(format!("{} already exists", data.display())));
            }
            let config = ConfigOverrides::from(tune).apply(ConfigSnapshot::default().to_config());
            config.validate()?;
            save_dataset(&data, &LoopDatasetFile::new(loop_id, tasks, ConfigSnapshot::from(&config)))?;
        }
        Command::Suggest { data, tune } => {
            let s = suggest(&data, &tune.into())?;
            if let Some(f) = &s.fallback {
                log::warn!("locality-aware surrogate unavailable ({f}); used the plain model");
            }
            println!("{}", s.summary_line());
        }
        Command::TuneSim { workload, tune, trace } => {
            let spec = load_workload_spec(&workload)?;
            let config = ConfigOverrides::from(tune).apply(Default::default());
            let r = tune_sim(&spec, &config)?;
            if let Some(p) = trace {
                write(&p, &r.trace_csv())?;
            }
            print!("{}", r.summary());
        }
        Command::Report { data, csv } => print!("{}", report(&data, csv)?),
        Command::Sim { workload, schedule, ell } => {
            let spec = load_workload_spec(&workload)?;
            let schedule: Schedule = schedule.parse().map_err(|e| Error::Usage(format!("{e}")))?;
            let w = spec.build()?;
            let times = simulate_executions(&w, &schedule, None)?;
            match ell {
                Some(l) if l == 0 || l > times.len() => {
                    return Err(Error::Usage(format!("--ell must be in 1..={}", times.len())));
                }
                Some(l) => println!("ell={l} tau_s={:.9e}", times[l - 1]),
                None => {
                    for (i, t) in times.iter().enumerate() {
                        println!("ell={} tau_s={t:.9e}", i + 1);
                    }
                    println!("total_s={:.9e}", times.iter().sum::<f64>());
                }
            }
        }
        Command::Regret { input, out, csv } => {
            let m = loopsched::costs::load_cost_matrix(&input)?;
            let (md, table_csv) = render_regret_table(&m).map_err(|e| Error::Usage(e.to_string()))?;
            match out {
                Some(p) => write(&p, &md)?,
                None => print!("{md}"),
            }
            if let Some(p) = csv {
                write(&p, &table_csv)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(ExitStatus::Ok as u8),
        Err(e) => {
            eprintln!("loopsched: {e}");
            ExitCode::from(e.status() as u8)
        }
    }
}
