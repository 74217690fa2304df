mod bench;
mod error;
mod files;
mod pipeline;
mod provenance;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::provenance::Provenance;
use crate::render::View;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MANIFOLD_ICP_OUT_DIR";

#[derive(Parser)]
#[command(name = "manifold-icp", version, about = "Manipulability transfer between robot arms by manifold-aware ICP")]
struct Cli {
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample manipulabilities of an arm into a dataset file.
    GenData(GenDataArgs),
    /// Build the nearest-neighbour transfer map used as a baseline.
    BuildMap(BuildMapArgs),
    /// Register a teacher dataset onto a student dataset.
    Fit(FitArgs),
    /// Apply a fitted transform to a dataset.
    Transfer(TransferArgs),
    /// Score predicted manipulabilities against a reference.
    Eval(EvalArgs),
    /// Draw datasets as projected ellipses.
    Render(RenderArgs),
    /// Recover planted transforms on synthetic data.
    ToyBench(ToyBenchArgs),
    /// Run a grid of transfer experiments and tabulate the results.
    Sweep(SweepArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["random", "trajectory"]))]
pub struct GenDataArgs {
    /// Built-in model name or model JSON file.
    #[arg(long)]
    pub model: String,
    /// Number of uniformly sampled joint configurations.
    #[arg(long)]
    pub random: Option<usize>,
    /// `planar_sweep:<fixed>x<steps>`, `planar_eval:<steps>`,
    /// `arm_train:<steps>` or `arm_eval:<steps>`.
    #[arg(long)]
    pub trajectory: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildMapArgs {
    #[arg(long)]
    pub teacher: String,
    #[arg(long)]
    pub student: String,
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct FitFlags {
    /// Initialize by parallel transport (default).
    #[arg(long, overrides_with = "no_pt")]
    pub pt: bool,
    #[arg(long)]
    pub no_pt: bool,
    #[arg(long = "weight-exp", default_value_t = 3)]
    pub weight_exp: u32,
    /// Optimizer starts per ICP iteration, the identity included.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// ICP iteration limit.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl FitFlags {
    pub fn config(&self) -> manifold_icp::FitConfig {
        let base = manifold_icp::FitConfig::default();
        manifold_icp::FitConfig {
            use_pt: !self.no_pt,
            weight_exponent: self.weight_exp,
            icp_max_iter: self.max_iter,
            rotation: manifold_icp::rotation::RotationConfig {
                restarts: self.restarts,
                ..base.rotation
            },
            seed: self.seed,
            ..base
        }
    }
}

#[derive(Args)]
pub struct FitArgs {
    /// Teacher dataset (the domain being transferred).
    #[arg(long)]
    pub teacher: PathBuf,
    /// Student dataset (the domain transferred into).
    #[arg(long)]
    pub student: PathBuf,
    #[command(flatten)]
    pub flags: FitFlags,
    #[arg(long)]
    pub allow_unequal: bool,
    /// Maximum-weight one-to-one matching instead of per-point argmax.
    #[arg(long)]
    pub one_to_one: bool,
    /// Transform output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit report output path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub transform: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Nearest-neighbour map; adds a baseline column scored on `--source`.
    #[arg(long, requires = "source")]
    pub baseline: Option<PathBuf>,
    /// Untransferred teacher data fed to the baseline.
    #[arg(long, requires = "baseline")]
    pub source: Option<PathBuf>,
    #[arg(long, default_value = "eval")]
    pub experiment: String,
    #[arg(long, default_value = "-")]
    pub variant: String,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RenderArgs {
    /// Dataset to draw; repeat for overlays (at most three).
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "top")]
    pub view: View,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubsetArg {
    Paired,
    Independent,
}

#[derive(Args)]
pub struct ToyBenchArgs {
    #[arg(long, default_value = "panda7")]
    pub model: String,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub heldout: usize,
    /// Repetitions; repetition `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 20)]
    pub reps: u64,
    /// Fit on only the most singular training points.
    #[arg(long)]
    pub singular_subset: Option<usize>,
    #[arg(long, value_enum, default_value = "paired")]
    pub subset_selection: SubsetArg,
    #[command(flatten)]
    pub flags: FitFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepExperiment {
    /// Planar horizontal → vertical arm, three held-out trajectories.
    Planar,
    /// 7-DoF teacher → panda7, scored against the nearest-neighbour baseline.
    Arm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Trajectory,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Pt,
    Icp,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "planar")]
    pub experiment: SweepExperiment,
    #[arg(long, value_enum, default_value = "trajectory")]
    pub kind: KindArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pt,icp")]
    pub variants: Vec<VariantArg>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub weight_exps: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "400,200,100,50,25")]
    pub sample_counts: Vec<usize>,
    /// Seeds per cell, starting at `--seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Nearest-neighbour map size for the arm experiment.
    #[arg(long, default_value_t = 5000)]
    pub baseline_samples: usize,
}

pub struct Ctx {
    pub out_dir: PathBuf,
    pub provenance: Provenance,
}

impl Ctx {
    pub fn output(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(default_name))
    }
}

fn run(cli: Cli, ctx: &Ctx) -> CliResult<()> {
    match cli.command {
        Command::GenData(a) => pipeline::gen_data(&a, ctx),
        Command::BuildMap(a) => pipeline::build_map(&a, ctx),
        Command::Fit(a) => pipeline::fit(&a, ctx),
        Command::Transfer(a) => pipeline::transfer(&a, ctx),
        Command::Eval(a) => pipeline::eval(&a, ctx),
        Command::Render(a) => pipeline::render(&a, ctx),
        Command::ToyBench(a) => bench::toy_bench(&a, ctx),
        Command::Sweep(a) => bench::sweep(&a, ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    let ctx = Ctx {
        out_dir: cli.out_dir.clone(),
        provenance: Provenance::new(std::env::args().skip(1).collect()),
    };
    match run(cli, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
