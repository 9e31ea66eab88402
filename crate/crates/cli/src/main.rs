//! `sketchkit`: sketch, inspect, adapt and analyze weight matrices.

mod commands;
mod manifest;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parse::{CalibSource, EtaGrid, Shape};

#[derive(Parser, Debug)]
#[command(name = "sketchkit", version, about = "Learned sketching of dense weight matrices")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic matrix as MAT1.
    Gen(GenArgs),
    /// Sketch a MAT1 weight matrix into an SKT1 model.
    Sketch(SketchArgs),
    /// Expand an SKT1 model back into a dense MAT1 matrix.
    Reconstruct(ReconstructArgs),
    /// Print shapes, widths and parameter counts.
    Info(InfoArgs),
    /// Fit the sketched parameters to a teacher matrix with the mapping frozen.
    Finetune(FinetuneArgs),
    /// Compare low-rank and sketch approximation errors of a weight update.
    AnalyzeDelta(AnalyzeArgs),
    /// Power-law spectra: closed forms and random-fold Monte-Carlo.
    Theory(TheoryArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct ThreadArgs {
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "SKETCHKIT_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Distribution {
    Gaussian,
    #[value(name = "powerlaw-spectrum")]
    PowerlawSpectrum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DtypeArg {
    F64,
    F32,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Matrix shape as ROWSxCOLS.
    #[arg(long)]
    shape: Shape,
    #[arg(long, value_enum, default_value_t = Distribution::Gaussian)]
    dist: Distribution,
    /// Power-law coefficient for `powerlaw-spectrum`.
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
    dtype: DtypeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct LearnArgs {
    /// Calibration: a MAT1 file (features x samples) or `synth:gaussian:m=256`.
    #[arg(long)]
    calib: CalibSource,
    /// Outlier exponent in the k-means weights.
    #[arg(long = "s", default_value_t = 3.0)]
    exponent_s: f64,
    #[arg(long, default_value_t = sketchkit::calibration::DEFAULT_DAMP)]
    damp: f64,
    /// Compensation block size.
    #[arg(long, default_value_t = 128)]
    block: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct SketchArgs {
    #[arg(long)]
    input: PathBuf,
    /// Index width; k = 2^bits centers per group.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
    bits: u8,
    /// Groups per row.
    #[arg(long, default_value_t = 1)]
    gpr: usize,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = DtypeArg::F64)]
    dtype: DtypeArg,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    #[value(name = "llama2-7b")]
    Llama2_7b,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["model", "preset"])))]
struct InfoArgs {
    /// One or more SKT1 files; counts are summed.
    #[arg(long, num_args = 1..)]
    model: Vec<PathBuf>,
    /// Count for a known architecture instead of files.
    #[arg(long, value_enum, requires_all = ["gpr", "bits"])]
    preset: Option<Preset>,
    #[arg(long)]
    gpr: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
    bits: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OptArg {
    Sgd,
    Adam,
}

#[derive(Args, Debug)]
struct FinetuneArgs {
    #[arg(long)]
    model: PathBuf,
    /// Target weights (rows x cols).
    #[arg(long)]
    teacher: PathBuf,
    /// Inputs (cols x samples).
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = OptArg::Adam)]
    opt: OptArg,
    #[arg(long)]
    out: PathBuf,
    /// Per-step loss CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    threads: ThreadArgs,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    tuned: PathBuf,
    /// Compression ratios, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    ratios: Vec<f64>,
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TheoryArgs {
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    alpha: usize,
    /// START:STOP:STEP, inclusive.
    #[arg(long, default_value = "0:0.95:0.05")]
    eta_grid: EtaGrid,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    threads: ThreadArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
