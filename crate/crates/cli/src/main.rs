use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kkmeans_cli::{
    cmd_cluster, cmd_nystrom_embed, cmd_rad_check, cmd_risk_scan, cmd_spectrum, CliError, ExperimentConfig, Outcome,
    Overrides,
};

#[derive(Parser)]
#[command(
    name = "kkmeans",
    version,
    about = "Kernel k-means, Nystrom landmarks and the clustering risk lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; beats KKMEANS_OUTPUT_DIR and the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the configured data set.
    Cluster {
        #[command(flatten)]
        common: Common,
        /// lloyd, brute_force, approx_erm or nystrom
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        /// Fixed landmark count for the nystrom method.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Write the landmark embedding of the data.
    NystromEmbed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Verify the Rademacher lower-bound construction over a (k, n) grid.
    RadCheck {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo draws for cells too large to enumerate.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Excess-risk sweep over n, k and methods.
    RiskScan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: exact, nystrom, approx
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Eigenvalues, effective dimension and landmark counts.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
    },
}

type Runner = fn(&ExperimentConfig, &Overrides) -> Result<Outcome, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, ov, run): (Common, Overrides, Runner) = match cli.command {
        Command::Cluster { common, method, k, m } => (
            common,
            Overrides {
                method,
                k,
                m,
                ..Default::default()
            },
            cmd_cluster,
        ),
        Command::NystromEmbed { common, k, m } => (
            common,
            Overrides {
                k,
                m,
                ..Default::default()
            },
            cmd_nystrom_embed,
        ),
        Command::RadCheck { common, trials } => (
            common,
            Overrides {
                trials,
                ..Default::default()
            },
            cmd_rad_check,
        ),
        Command::RiskScan {
            common,
            methods,
            reps,
            m,
        } => (
            common,
            Overrides {
                methods,
                reps,
                m,
                ..Default::default()
            },
            cmd_risk_scan,
        ),
        Command::Spectrum { common, k } => (
            common,
            Overrides {
                k,
                ..Default::default()
            },
            cmd_spectrum,
        ),
    };
    let ov = Overrides {
        output_dir: common.output_dir,
        threads: common.threads,
        ..ov
    };
    let result = ExperimentConfig::load(&common.config).and_then(|cfg| run(&cfg, &ov));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.report);
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
