//! Command-line surface. Every knob is optional at the parser level: the
//! resolved value comes from the flag if given, else from the matching
//! key of the command's section in the JSON config file, else from the
//! built-in default.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "wildarc",
    version,
    about = "Wild-arc dynamics: build, certify, and export the models",
    subcommand_required = true,
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub shared: SharedArgs,
}

/// Flags accepted by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct SharedArgs {
    /// JSON config file with one flat section per command.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory artifacts are written into.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Sampling seed; recorded in every artifact.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Ambient dimension, 3 or 4.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Scaling levels per side (arc assembly), or axial levels (surgery
    /// cylinder witnesses).
    #[arg(long, global = true)]
    pub levels: Option<u32>,
    /// Integrator step for the flow commands.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build the generator, certify all arc conditions, export the arc
    /// polyline and the spanning disk.
    BuildArc(BuildArcArgs),
    /// Re-run the condition verifier across sampling densities 32/64/128
    /// and check the crossing counts are density-independent.
    VerifyArc(VerifyArcArgs),
    /// Sample the model vector field on a grid inside the solid cylinder.
    FlowField(FlowFieldArgs),
    /// Classify the axis equilibria of the time-one map.
    FixedPoints(FixedPointsArgs),
    /// Integrate one flow trajectory and export it step by step.
    Orbit(OrbitArgs),
    /// Trace a separatrix of the time-one map's saddle.
    Separatrix(SeparatrixArgs),
    /// Build the Pixton sphere diffeomorphism: census, separatrices,
    /// basin statistics, optional orbit and tube mesh.
    Pixton(PixtonArgs),
    /// Build a glued 4-sphere diffeomorphism and certify its census,
    /// gluing residuals, and heteroclinic witnesses.
    Surgery(SurgeryArgs),
    /// Export geometry artifacts (arc, knot, disk, tube) for plotting.
    Export(ExportArgs),
}

#[derive(Args, Debug, Default)]
pub struct BuildArcArgs {
    /// Segments per generator piece (`b` gets twice as many).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Relative tube radius for the embedding diagnostics.
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Swap in a deliberately failing middle curve: "chord" or "flat".
    #[arg(long, value_name = "KIND")]
    pub negative_control: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct VerifyArcArgs {
    /// Relative tube radius for the embedding diagnostics.
    #[arg(long)]
    pub theta0: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct FlowFieldArgs {
    /// Grid points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Half-width of the sampled box.
    #[arg(long)]
    pub extent: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct FixedPointsArgs {}

#[derive(Args, Debug, Default)]
pub struct OrbitArgs {
    /// Start point as comma-separated coordinates; random inside the
    /// cylinder when omitted.
    #[arg(long, value_name = "X1,X2,…")]
    pub x0: Option<String>,
    /// Total integration time.
    #[arg(long)]
    pub duration: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct SeparatrixArgs {
    /// "unstable" (forward map) or "stable" (inverse map).
    #[arg(long)]
    pub direction: Option<String>,
    /// Which side of the saddle to seed: "plus" or "minus".
    #[arg(long)]
    pub side: Option<String>,
    /// Map iterations to trace.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Distance of the seed from the saddle along the eigenvector.
    #[arg(long)]
    pub seed_dist: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct PixtonArgs {
    /// Also export one orbit from a random start until it settles.
    #[arg(long)]
    pub orbit: bool,
    /// Also export an OBJ tube mesh around the arc.
    #[arg(long)]
    pub export_tube: bool,
    /// Random starts for the basin census.
    #[arg(long)]
    pub basin_samples: Option<usize>,
    /// Cross-section sides of the exported tube mesh.
    #[arg(long)]
    pub sides: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct SurgeryArgs {
    /// Which gluing: "arc" (wild-arc heteroclinic) or "cylinder"
    /// (tube-boundary heteroclinic).
    #[arg(long)]
    pub variant: Option<String>,
    /// Arc-variant witness count.
    #[arg(long)]
    pub witnesses: Option<usize>,
    /// Cylinder-variant samples per axial level.
    #[arg(long)]
    pub around: Option<usize>,
    /// Random control points expected to fail the witness test
    /// (0 skips the control run).
    #[arg(long)]
    pub controls: Option<usize>,
    /// Collar samples for the equivariance residual.
    #[arg(long)]
    pub equi_samples: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct ExportArgs {
    /// Comma-separated list out of: arc, knot, delta, tube.
    #[arg(long)]
    pub what: Option<String>,
    /// Segments per generator piece.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Relative tube radius of the exported tube mesh.
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Cross-section sides of the exported tube mesh.
    #[arg(long)]
    pub sides: Option<usize>,
}
