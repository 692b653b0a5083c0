use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Clone, Parser)]
#[command(name = "boussinesq", version, about = "Boussinesq flow with nonmonotone friction and heat-flux boundary laws")]
pub struct Cli {
    /// JSON config file; overrides --scenario.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Named preset: heated-cavity-slip, stokes-check, manufactured.
    #[arg(long, global = true)]
    pub scenario: Option<String>,

    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// Worker threads for study levels; a single run is always sequential.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run one simulation and write fields, monitors and the energy verdict.
    Run,
    /// Law constants, Clarke intervals, the H0 report and the skew-form identities.
    CheckLaws {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Refinement study over one knob.
    Study {
        /// dt, m or mesh.
        #[arg(long, default_value = "dt")]
        knob: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Convergence rates against the manufactured smooth solution.
    Manufactured {
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Cells per side on the coarsest mesh.
        #[arg(long, default_value_t = 4)]
        nx: usize,
        /// Time steps of the spatial runs.
        #[arg(long, default_value_t = 256)]
        steps: usize,
        /// Also run a time-step study with this many halvings on the finest mesh.
        #[arg(long, default_value_t = 0)]
        temporal: usize,
        /// Minimum observed spatial order for u and theta.
        #[arg(long, default_value_t = 1.8)]
        min_order: f64,
    },
    /// Mesh, DOF and trace-constant summary.
    MeshInfo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::CheckLaws { .. } => "check-laws",
            Command::Study { .. } => "study",
            Command::Manufactured { .. } => "manufactured",
            Command::MeshInfo => "mesh-info",
        }
    }
}
