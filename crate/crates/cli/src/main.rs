//! `cbnorm` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::output::Format;

#[derive(Parser, Debug)]
#[command(name = "cbnorm", version, about = "Certified norms and query-error bounds for hypercube forms")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

/// Shared run configuration. Precedence: flag, then `CBNORM_*` variable, then default.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "CBNORM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Target primal-dual gap for iterative bounds.
    #[arg(long, global = true, env = "CBNORM_TOL", default_value_t = 5e-3)]
    pub tol: f64,
    /// Largest number of variables enumerated over the hypercube.
    #[arg(long = "cap-enum", global = true, env = "CBNORM_CAP_ENUM", default_value_t = cbnorm::poly::ENUM_CAP)]
    pub cap_enum: usize,
    #[arg(long, global = true, env = "CBNORM_FORMAT", value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, global = true, env = "CBNORM_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ‖p‖_∞, ‖p‖_1 and cb-norm bounds of a polynomial.
    Norms(PolyArgs),
    /// Certified ‖p‖_{∞,*} and ‖p‖_{cb,*}.
    DualNorms {
        #[command(flatten)]
        poly: PolyArgs,
        /// Certificate JSON offered as an extra ‖·‖_{cb,*} upper bound.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Certified interval for E(p,1) of the bilinear form xᵀAy.
    QueryError {
        /// JSON matrix: `[[..],..]` or `{"matrix": [[..],..]}`.
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Ratios ‖A‖_cb/‖A‖_{∞→1} on seeded random matrices.
    KgBounds {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Ratio table of the Möbius witness family.
    Witness {
        /// Comma-separated odd values of n.
        #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
        n: Vec<usize>,
        /// Write the order-4 certificate of the (single) n to this file.
        #[arg(long = "dump-cert")]
        dump_cert: Option<PathBuf>,
    },
    /// Compare E(p,1) with ‖p‖_∞(1 - 1/‖p‖_cb) on random bounded forms.
    ProbeOpenQuestion {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Check a dual-program instance and report its objective.
    VerifySdp2 {
        /// JSON with `certificate`, `r`, `p` and `partition`.
        #[arg(long)]
        instance: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct PolyArgs {
    /// Polynomial JSON file.
    #[arg(long)]
    pub poly: PathBuf,
    /// Parts as 1-based variables, e.g. `1,2;3,4`. Defaults to one part with every variable.
    #[arg(long)]
    pub partition: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Norms(p) => commands::norms(&cli.config, &p),
        Command::DualNorms { poly, cert } => commands::dual_norms(&cli.config, &poly, cert.as_deref()),
        Command::QueryError { matrix } => commands::query_error(&cli.config, &matrix),
        Command::KgBounds { k, samples } => commands::kg_bounds(&cli.config, k, samples),
        Command::Witness { n, dump_cert } => commands::witness(&cli.config, &n, dump_cert.as_deref()),
        Command::ProbeOpenQuestion { k, samples } => commands::probe(&cli.config, k, samples),
        Command::VerifySdp2 { instance } => commands::verify_sdp2(&cli.config, &instance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
