//! `cpcca` — coarse-grain row-stochastic transition matrices into fuzzy
//! Markov state models, with support for complex (non-reversible)
//! dominant spectra.
//!
//! Subcommands: `cluster`, `spectrum`, `generate`, `bench`, `fixtures`.
//! Errors are reported as a single-line JSON object on stderr with a
//! stable `code` field and a nonzero exit status. Output files are
//! byte-stable for fixed inputs and seeds; wall-clock timings live in
//! clearly separated keys (`timing`, `timing_mean`, `timing_std`) and in
//! the benchmark CSV's `seconds` column.

mod commands;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cpcca",
    version,
    about = "Fuzzy spectral coarse-graining of non-reversible Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a transition matrix into a fuzzy Markov state model.
    Cluster(ClusterArgs),
    /// Report the dominant spectrum under both selection modes.
    Spectrum(SpectrumArgs),
    /// Generate a structured test matrix and write it to a file.
    Generate(GenerateArgs),
    /// Time the clustering pipeline over generated matrix families.
    Bench(BenchArgs),
    /// List or export the built-in example matrices.
    Fixtures(FixturesArgs),
}

/// Where the input matrix comes from: a file, a named fixture, or an
/// inline generator spec. Exactly one source must be given.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// Read the matrix from a file (.csv dense; anything else is
    /// treated as matrix-market coordinate text).
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Use a built-in fixture (see `fixtures --list` for names).
    #[arg(long, value_name = "NAME")]
    fixture: Option<String>,
    /// Generate the input inline:
    /// circular:<blocks>:<block-size>:<eps>[:<seed>] or
    /// uncoupled:<blocks>:<block-size>:<coupling>[:<seed>].
    #[arg(long = "generate", value_name = "SPEC")]
    generate: Option<String>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of clusters (mutually exclusive with --scan).
    #[arg(long = "n-clusters", value_name = "K", group = "cluster_count")]
    n_clusters: Option<usize>,
    /// Scan cluster counts lo:hi and keep the crispest feasible one.
    #[arg(long, value_name = "LO:HI", group = "cluster_count")]
    scan: Option<String>,
    /// Eigenvalue selection mode: magnitude or real.
    #[arg(long, default_value = "magnitude")]
    mode: String,
    /// Inner-product weighting: uniform or stationary.
    #[arg(long, default_value = "uniform")]
    weight: String,
    /// Optimizer: nelder-mead, gauss-newton, or levenberg-marquardt.
    #[arg(long, default_value = "nelder-mead")]
    optimizer: String,
    /// Optimizer iteration budget override.
    #[arg(long = "max-iterations", value_name = "N")]
    max_iterations: Option<usize>,
    /// Optimizer convergence tolerance override.
    #[arg(long, value_name = "TOL")]
    tolerance: Option<f64>,
    /// Directory receiving membership.csv, coarse.csv, and report.json.
    #[arg(long = "out-dir", value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: InputArgs,
    /// How many dominant eigenvalues to report per mode.
    #[arg(long, default_value_t = 3)]
    count: usize,
    /// Check that the spectrum sits on the roots of unity of a cyclic
    /// block structure. The block count is inferred from an inline
    /// circular spec; pass a value to check against a different count.
    #[arg(long = "check-circular", value_name = "BLOCKS", num_args = 0..=1)]
    check_circular: Option<Option<usize>>,
    /// Output JSON path.
    #[arg(long, value_name = "PATH", default_value = "spectrum.json")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    family: GenerateFamily,
}

#[derive(Subcommand)]
enum GenerateFamily {
    /// Block-circulant chain: blocks map cyclically k -> k+1.
    Circular {
        /// Number of cyclic blocks.
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        /// States per block.
        #[arg(long = "block-size", default_value_t = 10)]
        block_size: usize,
        /// Dense perturbation strength in [0, 1).
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Generator seed (default: CPCCA_SEED or 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Output path (.csv writes dense CSV, otherwise coordinate text).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Nearly uncoupled chain: block-diagonal plus weak coupling.
    Uncoupled {
        /// Number of diagonal blocks.
        #[arg(long, default_value_t = 3)]
        blocks: usize,
        /// States per block.
        #[arg(long = "block-size", default_value_t = 10)]
        block_size: usize,
        /// Total off-block mass per row, in [0, 1).
        #[arg(long, default_value_t = 0.05)]
        coupling: f64,
        /// Generator seed (default: CPCCA_SEED or 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Output path (.csv writes dense CSV, otherwise coordinate text).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Read the full benchmark plan from a JSON file instead of flags.
    #[arg(long, value_name = "PATH", conflicts_with_all = [
        "sizes", "trials", "gen", "blocks", "eps", "coupling",
        "n_clusters", "mode", "weight", "optimizer", "seed", "pairwise",
    ])]
    plan: Option<PathBuf>,
    /// Comma-separated matrix dimensions, strictly increasing.
    #[arg(long, value_name = "N,N,...", required_unless_present = "plan")]
    sizes: Option<String>,
    /// Recorded trials per size.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Matrix family: circular or uncoupled.
    #[arg(long = "gen", default_value = "circular")]
    gen: String,
    /// Blocks per generated matrix (must divide every size).
    #[arg(long, default_value_t = 3)]
    blocks: usize,
    /// Perturbation strength for the circular family.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Coupling strength for the uncoupled family.
    #[arg(long, default_value_t = 0.05)]
    coupling: f64,
    /// Cluster count (default: the block count).
    #[arg(long = "n-clusters", value_name = "K")]
    n_clusters: Option<usize>,
    /// Eigenvalue selection mode: magnitude or real.
    #[arg(long, default_value = "magnitude")]
    mode: String,
    /// Inner-product weighting: uniform or stationary.
    #[arg(long, default_value = "uniform")]
    weight: String,
    /// Optimizer: nelder-mead, gauss-newton, or levenberg-marquardt.
    #[arg(long, default_value = "nelder-mead")]
    optimizer: String,
    /// Seed base (default: CPCCA_SEED or 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel trials; 1 keeps timings low-noise.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record permutation-aligned pairwise coarse-matrix distances.
    #[arg(long)]
    pairwise: bool,
    /// Per-stage timing CSV output path.
    #[arg(long = "out-csv", value_name = "PATH", default_value = "bench.csv")]
    out_csv: PathBuf,
    /// Summary JSON output path.
    #[arg(long = "out-json", value_name = "PATH", default_value = "bench.json")]
    out_json: PathBuf,
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("action").required(true).args(["list", "export"])
))]
struct FixturesArgs {
    /// Print the available fixture names, one per line.
    #[arg(long)]
    list: bool,
    /// Export the named fixture to --out.
    #[arg(long, value_name = "NAME")]
    export: Option<String>,
    /// Output path for --export (.csv dense, otherwise coordinate text).
    #[arg(long, value_name = "PATH", requires = "export")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Cluster(args) => commands::cmd_cluster(args),
        Command::Spectrum(args) => commands::cmd_spectrum(args),
        Command::Generate(args) => commands::cmd_generate(args),
        Command::Bench(args) => commands::cmd_bench(args),
        Command::Fixtures(args) => commands::cmd_fixtures(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::FAILURE
        }
    }
}

/// A command failure carrying a stable machine-readable code.
pub struct Failure {
    pub code: String,
    pub message: String,
}

impl Failure {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn to_json(&self) -> String {
        serde_json::json!({
            "error": {"code": self.code, "message": self.message}
        })
        .to_string()
    }
}

impl From<cpcca::Error> for Failure {
    fn from(e: cpcca::Error) -> Self {
        Failure::new(e.code(), e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::from(cpcca::Error::from(e))
    }
}
