use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowshap::Error;

mod commands;

/// Flow-feature anomaly detection with tree ensembles and SHAP explanations.
#[derive(Debug, Parser)]
#[command(name = "flowshap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the pipeline commands; flags win over the config file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed (required here or in the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: config output_dir, else "out"].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Model kind, replacing the config's model section if the kind differs.
    #[arg(long, value_parser = ["gbt", "rf", "iforest"])]
    pub model: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, drop or impute missing values, select features; writes cleaned.csv.
    Preprocess {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a model; writes bundle.json, train_log.json and (holdout) test.csv.
    Train {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score a labelled CSV with a bundle; writes metrics.json.
    Evaluate {
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        bundle: PathBuf,
        /// Decision threshold [default: the bundle's].
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// k-fold cross-validation; writes crossval.json.
    Crossval {
        input: PathBuf,
        /// Number of folds [default: config, else 10].
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// SHAP values, case-study report and plot data for a CSV.
    Explain {
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        bundle: PathBuf,
        /// Features listed per flagged instance in the case-study report.
        #[arg(long, default_value_t = 3)]
        top_k: usize,
        /// Feature for the dependence plot [default: top-ranked].
        #[arg(long)]
        feature: Option<String>,
        /// Row (0-based) for the force plot [default: highest score].
        #[arg(long)]
        instance: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Rank features by mean |SHAP| from a SHAP CSV; writes ranking.json.
    Rank {
        shap_csv: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Generate a planted-anomaly dataset; writes synthetic.csv.
    Synth {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 0.05)]
        contamination: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Contract(_) => 3,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Preprocess { input, common } => commands::preprocess(&input, &common),
        Command::Train { input, common } => commands::train(&input, &common),
        Command::Evaluate {
            input,
            bundle,
            threshold,
            out,
        } => commands::evaluate(&input, &bundle, threshold, out),
        Command::Crossval { input, k, common } => commands::crossval(&input, k, &common),
        Command::Explain {
            input,
            bundle,
            top_k,
            feature,
            instance,
            out,
        } => commands::explain(&input, &bundle, top_k, feature, instance, out),
        Command::Rank { shap_csv, out } => commands::rank(&shap_csv, out),
        Command::Synth {
            n,
            d,
            contamination,
            seed,
            out,
        } => commands::synth(n, d, contamination, seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
