use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ricci-lab", version, about = "Rotationally symmetric Ricci flow on S³: verification and simulation")]
pub struct Cli {
    /// Directory for the summary and CSV outputs.
    #[arg(long, global = true, default_value = "ricci-out")]
    pub out: PathBuf,
    /// `key = value` file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print nothing; rely on the exit code.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print the summary JSON only.
    #[arg(long, global = true, conflicts_with = "quiet")]
    pub json_only: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the steady soliton ODE and check its constants.
    Bryant(BryantArgs),
    /// Build tip barriers and check the supersolution inequality.
    Barrier(BarrierArgs),
    /// Hermite identities and neutral-mode projections.
    Spectral(SpectralArgs),
    /// Evolve a fixture under the rescaled flow.
    Flow(FlowArgs),
    /// Residuals of the matched ansatz along a τ ladder.
    Residual(ResidualArgs),
    /// Leading-order curvature and diameter near the singular time.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct BryantArgs {
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BarrierArgs {
    /// Comma-separated barrier parameters.
    #[arg(long, value_delimiter = ',')]
    pub a: Vec<f64>,
    /// Width of the inspection window.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SpectralArgs {
    #[arg(long)]
    pub identities: bool,
    /// Project the parabolic ansatz at these τ (sign is ignored).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau: Vec<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct FlowArgs {
    /// sphere, capped_cylinder or dumbbell.
    #[arg(long)]
    pub fixture: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub neck: Option<f64>,
    #[arg(long)]
    pub bulb: Option<f64>,
    #[arg(long)]
    pub n_sigma: Option<usize>,
    #[arg(long)]
    pub dtau: Option<f64>,
    #[arg(long)]
    pub tau_end: Option<f64>,
    #[arg(long)]
    pub symmetry: Option<bool>,
    #[arg(long)]
    pub output_every: Option<usize>,
    /// Skip the extinction-time estimate and use this value.
    #[arg(long)]
    pub t_extinction: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ResidualArgs {
    /// parabolic, intermediate or tip.
    #[arg(long)]
    pub region: Option<String>,
    /// Comma-separated |τ| values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau_ladder: Vec<f64>,
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub seam_tolerance: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Use κ = |τ| + c ln|τ| instead of κ = |τ|.
    #[arg(long)]
    pub kappa_log: Option<f64>,
    /// Fail when the fitted exponent falls below this.
    #[arg(long)]
    pub min_exponent: Option<f64>,
    /// Also run the tip consistency checks at this τ.
    #[arg(long)]
    pub tip_tau: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PredictArgs {
    /// Comma-separated times before the singularity.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub t: Vec<f64>,
}
