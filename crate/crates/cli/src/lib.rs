//! Command-line front end: regularizer values, certificates, weight extraction,
//! multichannel norms and training sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod source;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use convreg_core::ToleranceConfig;

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "convreg", version, about = "Induced regularizers of two-layer linear convolutional networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalOpts,
}

#[derive(Debug, Args, Clone)]
pub struct GlobalOpts {
    /// Directory for written files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Seed for randomized steps (oracle restarts, training initialization).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long = "tol-feas", global = true, value_name = "X")]
    pub tol_feas: Option<f64>,
    #[arg(long = "tol-gap", global = true, value_name = "X")]
    pub tol_gap: Option<f64>,
    #[arg(long = "tol-cert", global = true, value_name = "X")]
    pub tol_cert: Option<f64>,
    #[arg(long = "tol-symmetry", global = true, value_name = "X")]
    pub tol_symmetry: Option<f64>,
    #[arg(long = "tol-rank", global = true, value_name = "X")]
    pub tol_rank: Option<f64>,
    #[arg(long = "tol-cluster", global = true, value_name = "X")]
    pub tol_cluster: Option<f64>,
    #[arg(long = "tol-max-iter", global = true, value_name = "N")]
    pub tol_max_iter: Option<usize>,
}

impl GlobalOpts {
    pub fn tolerances(&self) -> Result<ToleranceConfig> {
        let mut t = ToleranceConfig::default();
        let set = |slot: &mut f64, v: Option<f64>, name: &str| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(CliError::Input(format!("--tol-{name} must be positive")))
                }
                Some(x) => {
                    *slot = x;
                    Ok(())
                }
                None => Ok(()),
            }
        };
        set(&mut t.feas, self.tol_feas, "feas")?;
        set(&mut t.gap, self.tol_gap, "gap")?;
        set(&mut t.cert, self.tol_cert, "cert")?;
        set(&mut t.symmetry, self.tol_symmetry, "symmetry")?;
        set(&mut t.rank, self.tol_rank, "rank")?;
        set(&mut t.cluster, self.tol_cluster, "cluster")?;
        if let Some(n) = self.tol_max_iter {
            t.max_iterations = n;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodChoice {
    /// Closed form when available, otherwise the SDP.
    Auto,
    Closed,
    Sdp,
    Oracle,
}

#[derive(Debug, Args, Clone)]
pub struct SignalArgs {
    /// delta | ones | random:SEED | pattern:P1,P2,..xREPS | inline list | file
    #[arg(long)]
    pub w: String,
    /// Signal length, required for generated signals.
    #[arg(long)]
    pub d: Option<usize>,
    /// Kernel size.
    #[arg(long)]
    pub k: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value of the induced regularizer.
    Reg {
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long, value_enum, default_value_t = MethodChoice::Auto)]
        method: MethodChoice,
        /// Write the SDP constraint triplets to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Channels used by the oracle.
        #[arg(long, default_value_t = 1)]
        channels: usize,
    },
    /// Extract single-channel weights attaining the regularizer.
    Rank1 {
        #[command(flatten)]
        signal: SignalArgs,
    },
    /// Multichannel regularizer of a D×R map.
    Multi {
        /// CSV file with D rows and R columns, or random:SEED:DxR.
        #[arg(long = "W")]
        w: String,
        #[arg(long)]
        k: usize,
        /// Output channels used for realizability and the oracle.
        #[arg(long)]
        channels: Option<usize>,
        /// Also run the weight-space oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Check a dual certificate and the lower bound it gives.
    Certify {
        #[command(flatten)]
        signal: SignalArgs,
        /// File with one `re,im` pair per frequency; defaults to the aligned
        /// certificate built from the spectrum.
        #[arg(long)]
        lambda: Option<PathBuf>,
    },
    /// Train a grid of networks described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Write zero wall times so repeated runs are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
}

/// Runs a parsed command and returns the text report.
pub fn run(cli: &Cli) -> Result<String> {
    let g = &cli.global;
    let tol = g.tolerances()?;
    match &cli.command {
        Command::Reg { signal, method, dump, channels } => {
            commands::cmd_reg(signal, *method, dump.as_deref(), *channels, g, &tol)
        }
        Command::Rank1 { signal } => commands::cmd_rank1(signal, g, &tol),
        Command::Multi { w, k, channels, oracle } => {
            commands::cmd_multi(w, *k, *channels, *oracle, g, &tol)
        }
        Command::Certify { signal, lambda } => commands::cmd_certify(signal, lambda.as_deref(), &tol),
        Command::Sweep { config, no_timing } => commands::cmd_sweep(config, !*no_timing, g),
    }
}
