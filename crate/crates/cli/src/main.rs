//! `mvlab`: identity verification suites, projections, torus flows and
//! special-connection diagnostics from the command line.
//!
//! Exit codes: 0 pass, 1 check failure, 2 usage or input error,
//! 3 numerical divergence.

mod cmd;
mod config;
mod json;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "mvlab", version, about = "Mirror-volume geometry laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads [default: available cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a randomized identity suite and write a JSON report
    Verify(VerifyArgs),
    /// Split a form into structure components
    Project(ProjectArgs),
    /// Structure forms and projector data
    Structure {
        #[command(subcommand)]
        action: StructureAction,
    },
    /// Run the line bundle mean curvature flow on a torus
    Flow(FlowArgs),
    /// dDT / dHYM residual norms and the energy bound of a field
    Residuals(ResidualArgs),
    /// Compare mean curvature with the angle-function expression
    DazordCheck(DazordArgs),
    /// Newton search for a constant dDT / dHYM curvature
    NewtonConstant(NewtonArgs),
    /// Pull a field back along the circle projection
    Pullback(PullbackArgs),
    /// Merge JSON reports and CSV traces into one summary
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
enum StructureAction {
    /// Print structure forms and projector ranks as JSON
    Dump(DumpArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// spin7 | g2 | sl2 | sl3 | sl4 | det | lemmas
    #[arg(long)]
    context: Option<String>,
    /// Number of random samples [default: 10000]
    #[arg(long)]
    samples: Option<usize>,
    /// Sample stream seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Coefficients are uniform in [-range, range) [default: 2]
    #[arg(long)]
    range: Option<f64>,
    /// Relative residual tolerance [default: 1e-9]
    #[arg(long)]
    tolerance: Option<f64>,
    /// Report path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// g2 | spin7 | su2 | su3 | su4
    #[arg(long)]
    structure: Option<String>,
    /// Form degree [default: 2]
    #[arg(long)]
    degree: Option<usize>,
    /// Comma-separated coefficients in lexicographic basis order; random if omitted
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Option<Vec<f64>>,
    /// Seed for a random form [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Single projector label; all components of the degree if omitted
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DumpArgs {
    /// g2 | spin7 | su2 | su3 | su4
    #[arg(long)]
    structure: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct FlowArgs {
    /// Initial field (CFLD); otherwise a seeded random potential is generated
    #[arg(long)]
    input: Option<PathBuf>,
    /// Structure for generated fields: g2 | spin7 | su3 | su4 | none [default: g2]
    #[arg(long)]
    structure: Option<String>,
    /// Grid shape for generated fields, comma separated [default: 8 per axis]
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    /// Amplitude of the generated potential [default: 0.01]
    #[arg(long)]
    amplitude: Option<f64>,
    /// Constant background 2-form coefficients [default: 0]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    background: Option<Vec<f64>>,
    /// Seed of the generated potential [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Euler steps [default: 100]
    #[arg(long)]
    steps: Option<usize>,
    /// Fixed time step; overrides --dt-factor
    #[arg(long)]
    dt: Option<f64>,
    /// dt = factor * min h^2 [default: 0.1]
    #[arg(long)]
    dt_factor: Option<f64>,
    /// Add the DeTurck term [default: false]
    #[arg(long)]
    deturck: Option<bool>,
    /// Residual columns every n steps, 0 for none [default: 10]
    #[arg(long)]
    record_every: Option<usize>,
    /// dHYM phase [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Trace CSV path [default: trace.csv]
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Final field CFLD path [default: final.cfld]
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Summary JSON path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ResidualArgs {
    /// Field (CFLD)
    #[arg(long)]
    input: Option<PathBuf>,
    /// spin7 | g2 | dhym [default: from the field structure]
    #[arg(long)]
    kind: Option<String>,
    /// dHYM phase [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Solution tolerance on the norms [default: 1e-10]
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct DazordArgs {
    /// Field (CFLD) with an SU structure; otherwise an analytic test field
    #[arg(long)]
    input: Option<PathBuf>,
    /// Points per varying axis of the analytic field [default: 16]
    #[arg(long)]
    size: Option<usize>,
    /// Amplitude of the analytic field [default: 0.5]
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct NewtonArgs {
    /// spin7 | g2 | dhym
    #[arg(long)]
    kind: Option<String>,
    /// Complex dimension for dhym [default: 3]
    #[arg(long)]
    nc: Option<usize>,
    /// dHYM phase [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// First seed tried [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Seeds tried before giving up [default: 10]
    #[arg(long)]
    attempts: Option<usize>,
    /// Also write the solution as a constant field on this grid
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    /// CFLD path for --shape [default: constant.cfld]
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PullbackArgs {
    /// Field on T^7 (G2) or T^6 (SU3)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output field path [default: pullback.cfld]
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Grid points on the new circle [default: 4]
    #[arg(long)]
    circle_points: Option<usize>,
    /// dHYM phase of the base residual for SU3 inputs [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report files or directories
    inputs: Vec<PathBuf>,
    /// Summary JSON path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Long-format CSV (source,key,index,value)
    #[arg(long)]
    long_csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Diverged,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Diverged => 3,
        }
    }
}

fn flags(command: &Command) -> (RunConfig, Common) {
    let name = |s: &str| Some(s.to_string());
    match command {
        Command::Verify(a) => (
            RunConfig {
                command: name("verify"),
                context: a.context.clone(),
                samples: a.samples,
                seed: a.seed,
                range: a.range,
                tolerance: a.tolerance,
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::Project(a) => (
            RunConfig {
                command: name("project"),
                structure: a.structure.clone(),
                degree: a.degree,
                coeffs: a.coeffs.clone(),
                seed: a.seed,
                label: a.label.clone(),
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::Structure {
            action: StructureAction::Dump(a),
        } => (
            RunConfig {
                command: name("structure dump"),
                structure: a.structure.clone(),
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::Flow(a) => (
            RunConfig {
                command: name("flow"),
                input: a.input.clone(),
                structure: a.structure.clone(),
                shape: a.shape.clone(),
                amplitude: a.amplitude,
                background: a.background.clone(),
                seed: a.seed,
                steps: a.steps,
                dt: a.dt,
                dt_factor: a.dt_factor,
                deturck: a.deturck,
                record_every: a.record_every,
                theta: a.theta,
                trace: a.trace.clone(),
                snapshot: a.snapshot.clone(),
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::Residuals(a) => (
            RunConfig {
                command: name("residuals"),
                input: a.input.clone(),
                kind: a.kind.clone(),
                theta: a.theta,
                tolerance: a.tolerance,
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::DazordCheck(a) => (
            RunConfig {
                command: name("dazord-check"),
                input: a.input.clone(),
                size: a.size,
                amplitude: a.amplitude,
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::NewtonConstant(a) => (
            RunConfig {
                command: name("newton-constant"),
                kind: a.kind.clone(),
                nc: a.nc,
                theta: a.theta,
                seed: a.seed,
                attempts: a.attempts,
                shape: a.shape.clone(),
                snapshot: a.snapshot.clone(),
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::Pullback(a) => (
            RunConfig {
                command: name("pullback"),
                input: a.input.clone(),
                snapshot: a.snapshot.clone(),
                circle_points: a.circle_points,
                theta: a.theta,
                out: a.out.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
        Command::Report(a) => (
            RunConfig {
                command: name("report"),
                inputs: (!a.inputs.is_empty()).then(|| a.inputs.clone()),
                out: a.out.clone(),
                long_csv: a.long_csv.clone(),
                ..Default::default()
            },
            a.common.clone(),
        ),
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let (flag_cfg, common) = flags(&cli.command);
    let mut cfg = RunConfig::load(common.config.as_deref())?.overlay(flag_cfg);
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    if let Some(t) = cfg.threads {
        anyhow::ensure!(t >= 1, "--threads must be at least 1");
        mvlab_core::exec::configure_threads(t)?;
    }
    match cli.command {
        Command::Verify(_) => cmd::verify(cfg),
        Command::Project(_) => cmd::project(cfg),
        Command::Structure { .. } => cmd::structure_dump(cfg),
        Command::Flow(_) => cmd::flow(cfg),
        Command::Residuals(_) => cmd::residuals(cfg),
        Command::DazordCheck(_) => cmd::dazord_check(cfg),
        Command::NewtonConstant(_) => cmd::newton_constant(cfg),
        Command::Pullback(_) => cmd::pullback(cfg),
        Command::Report(_) => report::run(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
