use std::collections::BTreeMap;
use std::path::Path;

use boussinesq_core::harness::EnergyReport;
use boussinesq_core::integrator::RunConstants;
use boussinesq_core::laws::InequalityCheck;
use boussinesq_core::spaces::DiscreteSpaces;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDescriptor {
    pub nx: usize,
    pub ny: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
    pub temperature_dofs: usize,
    pub contact_length: f64,
}

impl MeshDescriptor {
    pub fn of(spaces: &DiscreteSpaces) -> Self {
        let m = &spaces.mesh;
        MeshDescriptor {
            nx: m.nx,
            ny: m.ny,
            vertices: m.n_vertices(),
            triangles: m.n_triangles(),
            velocity_dofs: spaces.n_velocity(),
            pressure_dofs: spaces.n_pressure(),
            temperature_dofs: spaces.n_temperature(),
            contact_length: m.contact_length(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl From<InequalityCheck> for Inequality {
    fn from(c: InequalityCheck) -> Self {
        Inequality {
            lhs: c.lhs,
            rhs: c.rhs,
            pass: c.pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H0Summary {
    pub velocity: Inequality,
    pub temperature: Inequality,
    pub pass: bool,
    pub c0: f64,
    /// `None` when a downward jump makes the law not relaxed monotone.
    pub m1: Option<f64>,
    pub c1: f64,
    pub gamma_s: f64,
    pub gamma: f64,
    pub notes: Vec<String>,
}

impl H0Summary {
    pub fn of(c: &RunConstants) -> Self {
        H0Summary {
            velocity: c.h0.velocity.into(),
            temperature: c.h0.temperature.into(),
            pass: c.h0.passes(),
            c0: c.friction.growth,
            m1: Some(c.friction.relaxed_monotonicity).filter(|v| v.is_finite()),
            c1: c.heat_flux.growth,
            gamma_s: c.trace.gamma_s_norm,
            gamma: c.trace.gamma_norm,
            notes: c.h0.notes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub verdict: String,
    pub steps: usize,
    pub worst_step: usize,
    pub worst_relative_slack: f64,
    pub energy_total: f64,
    pub max_divergence: f64,
}

impl From<&EnergyReport> for EnergySummary {
    fn from(r: &EnergyReport) -> Self {
        EnergySummary {
            verdict: r.verdict.to_string(),
            steps: r.steps,
            worst_step: r.worst_step,
            worst_relative_slack: r.worst_relative_slack,
            energy_total: r.energy_total,
            max_divergence: r.max_divergence,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: String,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub mesh: Option<MeshDescriptor>,
    pub h0: Option<H0Summary>,
    pub energy: Option<EnergySummary>,
    /// Files written by the command, relative to the output directory.
    pub outputs: Vec<String>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            status: "running".into(),
            ..Default::default()
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    pub fn read(out_dir: &Path) -> Result<RunManifest, CliError> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(&path, std::io::Error::other(e)))
    }
}
