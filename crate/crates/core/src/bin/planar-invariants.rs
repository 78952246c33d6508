use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use planar_invariants::config::ExperimentConfig;
use planar_invariants::Error;

#[derive(Parser)]
#[command(
    name = "planar-invariants",
    version,
    about = "Conformal invariants of planar domains and their boundary asymptotics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; overrides the configuration's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form oracle values and identities.
    Oracle(Common),
    /// Boundary samples of a domain.
    Domain(Common),
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    Metric {
        #[command(subcommand)]
        action: MetricAction,
    },
    Curvature {
        #[command(subcommand)]
        action: CurvatureAction,
    },
    Scale {
        #[command(subcommand)]
        action: ScaleAction,
    },
    Rigidity {
        #[command(subcommand)]
        action: SweepAction,
    },
    Heins {
        #[command(subcommand)]
        action: HeinsAction,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// S, L and f at points.
    Eval(Common),
    /// Solver against the disk formula.
    Check(Common),
}

#[derive(Subcommand)]
enum MetricAction {
    /// Boundary sweep of q·δ or η·δ.
    Sweep(Common),
    /// Bilipschitz envelope of η on a point set.
    Check(Common),
    /// Modulus-of-continuity table of η.
    Continuity(Common),
    /// Carathéodory, hyperbolic, Sugawa and Hurwitz densities side by side.
    Identity(Common),
    /// L¹ norms of the extremal differentials along a scaling sequence.
    L1(Common),
    /// L¹ norm of an oracle domain's extremal differential.
    L1Norm(Common),
}

#[derive(Subcommand)]
enum CurvatureAction {
    /// κ_n along an inner normal.
    Sweep(Common),
    /// κ_n at points.
    Grid(Common),
}

#[derive(Subcommand)]
enum SweepAction {
    Sweep(Common),
}

#[derive(Subcommand)]
enum ScaleAction {
    Report(Common),
}

#[derive(Subcommand)]
enum HeinsAction {
    Sweep(Common),
    /// T(ρ, a, r) for an oracle density.
    Value(Common),
    /// Randomized affine-invariance suite.
    Invariance(Common),
}

impl Command {
    /// Expected experiment kinds and the shared arguments.
    fn parts(&self) -> (&'static [&'static str], &Common) {
        match self {
            Command::Oracle(c) => (&["oracle"], c),
            Command::Domain(c) => (&["domain"], c),
            Command::Kernel { action } => match action {
                KernelAction::Eval(c) => (&["kernel"], c),
                KernelAction::Check(c) => (&["kernel_check"], c),
            },
            Command::Metric { action } => match action {
                MetricAction::Sweep(c) => (&["metric_sweep"], c),
                MetricAction::Check(c) => (&["metric_check"], c),
                MetricAction::Continuity(c) => (&["continuity_probe"], c),
                MetricAction::Identity(c) => (&["four_metric"], c),
                MetricAction::L1(c) => (&["l1_sweep"], c),
                MetricAction::L1Norm(c) => (&["l1_norm"], c),
            },
            Command::Curvature { action } => match action {
                CurvatureAction::Sweep(c) => (&["curvature_sweep"], c),
                CurvatureAction::Grid(c) => (&["curvature_grid"], c),
            },
            Command::Scale {
                action: ScaleAction::Report(c),
            } => (&["scale_report"], c),
            Command::Rigidity {
                action: SweepAction::Sweep(c),
            } => (&["rigidity_sweep"], c),
            Command::Heins { action } => match action {
                HeinsAction::Sweep(c) => (&["heins_sweep"], c),
                HeinsAction::Value(c) => (&["heins_value"], c),
                HeinsAction::Invariance(c) => (&["heins_invariance"], c),
            },
        }
    }
}

fn execute(cmd: &Command) -> Result<(), Error> {
    let (kinds, common) = cmd.parts();
    let mut cfg = ExperimentConfig::load(&common.config)?;
    let kind = cfg.experiment.name();
    if !kinds.contains(&kind) {
        return Err(Error::Config(format!(
            "configuration describes a `{kind}` experiment; this subcommand runs `{}`",
            kinds.join("`, `")
        )));
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    let table = planar_invariants::config::run(&cfg)?;
    if cfg.out.is_none() {
        // a closed downstream pipe is not an error
        let mut stdout = std::io::stdout().lock();
        if let Err(e) = stdout
            .write_all(table.to_csv().as_bytes())
            .and_then(|_| stdout.flush())
        {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(e.into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for a failed mathematical invariant, 1 for every other error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvariantViolation(_) => 2,
        _ => 1,
    }
}
