//! Command-line interface over the truncated-law toolkit: smoothness
//! factors, characterizing-equation solutions, the machine-fault model,
//! and the birth-death simulator, rendered as reproducible JSON or CSV.

mod commands;
mod envelope;

use std::error::Error;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use truncnb::distributions::DistParams;

#[derive(Debug, Parser)]
#[command(
    name = "truncnb",
    version,
    about = "Truncated negative binomial and Poisson approximation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format
    #[arg(
        long,
        global = true,
        value_enum,
        env = "TRUNCNB_FORMAT",
        default_value_t = Format::Json
    )]
    format: Format,

    /// Write the rendered output to this file instead of standard output
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Largest first difference of indicator solutions over a window
    Factor(FactorArgs),
    /// Solve the characterizing equation for an indicator test function
    Solve(SolveArgs),
    /// Machine-fault count law and its approximation error bounds
    Fault(FaultArgs),
    /// Simulate the birth-death chain that keeps the window law stationary
    Simulate(SimulateArgs),
}

/// Distribution choice shared by several commands.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct LawArgs {
    /// Negative binomial size and success probability, written as "r,p"
    #[arg(long, value_name = "R,P")]
    nb: Option<String>,

    /// Poisson rate
    #[arg(long, value_name = "RATE")]
    poisson: Option<f64>,
}

impl LawArgs {
    /// Parses the law and records it in an output parameter map.
    fn resolve(&self) -> Result<(DistParams, Map<String, Value>), Box<dyn Error>> {
        let mut map = Map::new();
        match (&self.nb, self.poisson) {
            (Some(pair), None) => {
                let (r, p) = commands::parse_pair(pair)?;
                map.insert("law".into(), "negative-binomial".into());
                map.insert("r".into(), r.into());
                map.insert("p".into(), p.into());
                Ok((DistParams::neg_binomial(r, p)?, map))
            }
            (None, Some(rate)) => {
                map.insert("law".into(), "poisson".into());
                map.insert("rate".into(), rate.into());
                Ok((DistParams::poisson(rate)?, map))
            }
            _ => unreachable!("the parser accepts exactly one distribution"),
        }
    }
}

#[derive(Debug, Args)]
struct FactorArgs {
    #[command(flatten)]
    law: LawArgs,

    /// Window upper end
    #[arg(long, required_unless_present = "sweep_n")]
    n: Option<usize>,

    /// Also run the exhaustive search over indicator sets (n at most 20)
    #[arg(long)]
    brute_force: bool,

    /// Report the closed form for every window 0..=MAX instead
    #[arg(long, value_name = "MAX", conflicts_with = "brute_force")]
    sweep_n: Option<usize>,

    /// Gap to the Poisson factor along these success probabilities, at
    /// matched mean RATE/p (needs --poisson and --n)
    #[arg(
        long,
        value_name = "P1,P2,...",
        conflicts_with_all = ["brute_force", "sweep_n"],
        requires = "n"
    )]
    limit_p_sweep: Option<String>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    law: LawArgs,

    /// Window upper end
    #[arg(long)]
    n: usize,

    /// Indicator set as comma-separated states; pass "" for the empty set
    #[arg(long, value_name = "I1,I2,...")]
    set: String,
}

#[derive(Debug, Args)]
struct FaultArgs {
    /// Number of working days
    #[arg(long)]
    days: usize,

    /// Repair time in days
    #[arg(long)]
    repair: usize,

    /// Daily fault probability
    #[arg(long, required_unless_present = "p_sweep", conflicts_with = "p_sweep")]
    prob: Option<f64>,

    /// Sweep these daily fault probabilities instead
    #[arg(long, value_name = "P1,P2,...")]
    p_sweep: Option<String>,

    /// What the fault day itself does to the machine
    #[arg(long, value_enum, default_value_t = ConventionArg::FaultDayCounts)]
    convention: ConventionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    /// The fault day is the first blocked day
    FaultDayCounts,
    /// The machine finishes the fault day and blocks afterwards
    StartsNextDay,
}

#[derive(Debug, Args)]
#[command(group = ArgGroup::new("mode").required(true).multiple(false))]
struct SimulateArgs {
    #[command(flatten)]
    law: LawArgs,

    /// Window upper end
    #[arg(long)]
    n: usize,

    /// Estimate the occupation-fraction law over the window
    #[arg(long, group = "mode")]
    stationary: bool,

    /// Estimate the mean first transition time out of state 0
    #[arg(long, group = "mode")]
    tau01: bool,

    /// Estimate one first difference of the equation solution by coupled
    /// long-run integrals
    #[arg(long, group = "mode", requires_all = ["set", "state"])]
    h_diff: bool,

    /// Emit one sampled trajectory
    #[arg(long, group = "mode")]
    path: bool,

    /// Run each replication until this time
    #[arg(long, conflicts_with = "events")]
    horizon: Option<f64>,

    /// Run each replication for this many jumps
    #[arg(long)]
    events: Option<u64>,

    /// Number of replications (defaults: 1 for --stationary and --path,
    /// 10000 for --tau01 and --h-diff)
    #[arg(long)]
    reps: Option<usize>,

    /// Seed for the random number generator
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Starting state for --stationary and --path
    #[arg(long, default_value_t = 0)]
    initial: usize,

    /// Indicator set for --h-diff, comma-separated states; "" is empty
    #[arg(long, value_name = "I1,I2,...")]
    set: Option<String>,

    /// State whose outgoing solution difference --h-diff estimates
    #[arg(long)]
    state: Option<usize>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<(), Box<dyn Error>> {
    let cli = Cli::parse();
    let text = match &cli.command {
        Command::Factor(args) => commands::factor(args, cli.format)?,
        Command::Solve(args) => commands::solve(args, cli.format)?,
        Command::Fault(args) => commands::fault(args, cli.format)?,
        Command::Simulate(args) => commands::simulate(args, cli.format)?,
    };
    match &cli.output {
        Some(path) => fs::write(path, &text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
