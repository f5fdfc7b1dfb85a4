use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use boostlab::dataset::Dataset;
use boostlab::engine::BoostConfig;
use boostlab::error::Error;
use boostlab::fmt::format_real;
use boostlab::harness::{self, ExperimentConfig, ExperimentName, SUMMARY_COLUMNS};
use boostlab::verify;

/// Boosting laboratory: fit AdaBoost or penalized functional gradient descent
/// and run the overfitting experiments E1-E6.
#[derive(Parser)]
#[command(name = "boostlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one boosting configuration; writes curves.csv, ensemble.json and run.json.
    Fit {
        /// Training data (header f1,...,fq,label[,true_prob]).
        #[arg(long)]
        data: PathBuf,
        /// Hold-out data in the same schema.
        #[arg(long)]
        holdout: Option<PathBuf>,
        /// Boosting configuration as JSON; unspecified fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run a named experiment; writes per-replication curves and summary.csv.
    Experiment {
        /// E1..E6, or the long form such as E4_ProbDivergence.
        #[arg(long)]
        name: Option<String>,
        /// JSON overrides merged onto the experiment defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to out_dir from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the oracle property suite; exits 0 iff every check passes.
    Verify,
}

fn read_text(path: &PathBuf) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Fit {
            data,
            holdout,
            config,
            out_dir,
        } => {
            let cfg: BoostConfig = match &config {
                Some(path) => serde_json::from_str(&read_text(path)?)?,
                None => BoostConfig::default(),
            };
            cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
            let train = harness::load_dataset(&data)?;
            let hold = match &holdout {
                Some(path) => harness::load_dataset(path)?,
                None => Dataset::empty(train.n_features()),
            };
            if !hold.is_empty() && hold.n_features() != train.n_features() {
                return Err(Error::Config("train and hold-out differ in feature count".into()));
            }
            let (ensemble, curves) = harness::fit(&train, &hold, &cfg, &out_dir)?;
            println!(
                "fitted {} terms; {} curve rows written to {}",
                ensemble.terms().len(),
                curves.len(),
                out_dir.display()
            );
            Ok(true)
        }
        Command::Experiment {
            name,
            config,
            out_dir,
        } => {
            let name = name.map(|n| n.parse::<ExperimentName>()).transpose()?;
            let cfg = match (&config, name) {
                (Some(path), _) => ExperimentConfig::from_json(&read_text(path)?, name)?,
                (None, Some(n)) => ExperimentConfig::defaults(n),
                (None, None) => return Err(Error::Config("give --name or --config".into())),
            };
            let dir = out_dir
                .or_else(|| cfg.out_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: give --out-dir".into()))?;
            let result = harness::run_experiment(&cfg, Some(&dir))?;
            println!("{} -> {}", cfg.name.long_name(), dir.display());
            for s in &result.summary {
                let mut line = format!("  {}", s.arm);
                for (col, st) in SUMMARY_COLUMNS.iter().zip(&s.stats) {
                    if let Some(m) = st {
                        line.push_str(&format!(" {col}={}±{}", format_real(m.mean), format_real(m.sd)));
                    }
                }
                println!("{line}");
            }
            Ok(true)
        }
        Command::Verify => {
            let checks = verify::run_all();
            for c in &checks {
                println!("{}", c.line());
            }
            Ok(checks.iter().all(|c| c.passed()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
