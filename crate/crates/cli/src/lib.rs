//! `gradcell` command-line pipeline: argument definitions and subcommands.

mod commands;

pub use commands::{run, CliError};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Graded TPMS lattice design: dataset, inverse model, macro optimization, assembly.
#[derive(Debug, Parser)]
#[command(name = "gradcell", version, about)]
pub struct Cli {
    /// Worker threads; 1 makes every output bit-reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample, screen and homogenize unit cells into a property database.
    GenDataset(GenDatasetArgs),
    /// Effective E and ν of one cell or a CSV of cells.
    Homogenize(HomogenizeArgs),
    /// Train the conditional generator with discriminator and regressor.
    Train(TrainArgs),
    /// Generate cells for held-out conditions and measure property errors.
    Eval(EvalArgs),
    /// Optimize an (E, ν) field on a macro problem.
    Optimize(OptimizeArgs),
    /// Fill an optimized field with generated cells and export the structure.
    Synthesize(SynthesizeArgs),
    /// Summarize the outputs found in a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Number of records to produce.
    #[arg(long, default_value_t = 924)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Voxels per cell edge.
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    /// Candidates sampled per requested record.
    #[arg(long, default_value_t = 2.0)]
    oversample: f64,
    /// Existing output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HomogenizeArgs {
    /// Family weights, comma separated (P, D, F-RD).
    #[arg(long, value_delimiter = ',', required_unless_present_any = ["csv", "solid"])]
    alpha: Option<Vec<f64>>,
    /// Level offsets, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0,0")]
    t: Vec<f64>,
    /// CSV with columns alpha1,alpha2,alpha3,t1,t2,t3.
    #[arg(long, conflicts_with_all = ["alpha", "solid"])]
    csv: Option<PathBuf>,
    /// Output CSV for `--csv` input (default: stdout).
    #[arg(long, requires = "csv")]
    out: Option<PathBuf>,
    /// Homogenize a fully solid grid instead of a TPMS cell.
    #[arg(long)]
    solid: bool,
    #[arg(long, default_value_t = 40)]
    resolution: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// JSON training configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train without the auxiliary regressor.
    #[arg(long)]
    no_regressor: bool,
    /// Fraction of records used for training; the rest form test.csv.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 7)]
    split_seed: u64,
    /// Existing output directory for weights.json, losses.csv, train.csv, test.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Held-out records (test.csv written by `train`).
    #[arg(long)]
    test: PathBuf,
    /// Also retrain without the regressor on these records and compare.
    #[arg(long)]
    no_regressor: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    resolution: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the noise study (conditions × draws) to noise_report.csv.
    #[arg(long)]
    noise_report: bool,
    #[arg(long, default_value_t = 50)]
    conditions: usize,
    #[arg(long, default_value_t = 50)]
    draws: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Problem file (see crates/cli/examples).
    #[arg(long)]
    problem: PathBuf,
    /// Property hull written by `gen-dataset`.
    #[arg(long)]
    hull: PathBuf,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeshFormat {
    Stl,
    Vtk,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Directory holding field_E.csv and field_nu.csv.
    #[arg(long)]
    fields: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    /// Property hull; conditions outside it are reported.
    #[arg(long)]
    hull: Option<PathBuf>,
    /// Candidates generated per element.
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Voxels per cell edge for candidate screening and overlap sampling.
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    /// Samples per cell edge for the exported structure.
    #[arg(long, default_value_t = 20)]
    mesh_resolution: usize,
    #[arg(long, value_enum, default_value_t = MeshFormat::Stl)]
    format: MeshFormat,
    /// Re-solve the macro problem with the homogenized properties of the chosen cells.
    #[arg(long, requires = "problem")]
    recheck: bool,
    /// Problem file for `--recheck`.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Homogenization resolution for `--recheck` (default: `--resolution`).
    #[arg(long)]
    recheck_resolution: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory to summarize.
    dir: PathBuf,
}
