use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridscreen::bench::Mode;
use gridscreen::opfsolve::{Form, DEFAULT_SEGMENTS};

#[derive(Parser, Debug)]
#[command(name = "gridscreen", version, about = "Flow-bound screening for DC OPF and unit commitment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Screen every flow bound for each load variation and write reports.
    Screen(RunArgs),
    /// Solve full and optionally reduced problems at nominal or sampled loads.
    Solve(SolveArgs),
    /// Check screening and commitment results against brute-force oracles.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Theta,
    Ptdf,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Form {
        match f {
            FormArg::Theta => Form::Theta,
            FormArg::Ptdf => Form::Ptdf,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Opf,
    Uc,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Opf => Mode::Opf,
            ModeArg::Uc => Mode::Uc,
        }
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("`{s}` must be a finite value >= 0"));
    }
    Ok(v)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_fraction(s)?;
    if v == 0.0 {
        return Err("must be positive".into());
    }
    Ok(v)
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// MATPOWER case file.
    #[arg(long = "case", value_name = "PATH")]
    pub case: PathBuf,

    /// Load variation fractions.
    #[arg(long = "v", value_name = "LIST", value_delimiter = ',', value_parser = parse_fraction,
          default_value = "0,0.25,0.5,0.75,1")]
    pub v: Vec<f64>,

    /// Raise every generator's p_min to this fraction of p_max.
    #[arg(long, value_name = "F", value_parser = parse_fraction, default_value_t = 0.1)]
    pub pmin_floor: f64,

    /// Relax p_min to zero in the screening problems.
    #[arg(long, value_enum, default_value = "on")]
    pub relax_pmin: Switch,

    #[arg(long, env = "GRIDSCREEN_WORKERS", value_parser = clap::value_parser!(u32).range(1..), default_value_t = 1)]
    pub workers: u32,

    #[arg(long, value_enum, default_value = "ptdf")]
    pub form: FormArg,

    /// Piecewise-linear cost segments per generator.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), default_value_t = DEFAULT_SEGMENTS as u32)]
    pub segments: u32,

    /// Seed for load sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,

    /// Margin scale: a bound is redundant when its extreme flow stays at
    /// least EPS * max(1, f_max) inside the limit.
    #[arg(long, value_name = "EPS", value_parser = parse_positive)]
    pub margin: Option<f64>,

    /// Write every LP in fixed-width text form under DIR/lp.
    #[arg(long)]
    pub dump_lp: bool,

    /// Write the PTDF matrix as CSV.
    #[arg(long)]
    pub dump_ptdf: bool,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(value_enum)]
    pub mode: ModeArg,

    #[command(flatten)]
    pub run: RunArgs,

    /// Also solve with the bounds from a prior screening run removed.
    #[arg(long)]
    pub reduced: bool,

    /// Number of sampled loads per v; nominal load when absent.
    #[arg(long, value_name = "N")]
    pub sample: Option<usize>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Grid points per load dimension.
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u32).range(2..))]
    pub resolution: u32,

    /// Sampled loads for the commitment oracle.
    #[arg(long, default_value_t = 20)]
    pub uc_samples: usize,
}
