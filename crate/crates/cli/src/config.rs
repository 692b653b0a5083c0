//! JSON run configuration.
//!
//! Every section is optional; missing values take the documented defaults and
//! the fully resolved file is echoed next to the outputs. Unknown keys are
//! rejected with the path to the offending key and the closest known name.

use std::path::Path;
use std::sync::Arc;

use boussinesq_core::integrator::{ScalarSource, SimConfig, VectorSource};
use boussinesq_core::laws::{
    catalog, BuoyancySpec, ConductivityLaw, ConductivitySpec, PiecewiseLaw,
};
use boussinesq_core::mesh::{BoundaryTag, Rect, Side, SideTags};
use boussinesq_core::scenario::{
    self, cavity_initial_temperature, exact, manufactured_body_force, manufactured_heat_source, MeshSpec, Scenario,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub name: String,
    pub mesh: MeshConfig,
    pub physics: PhysicsConfig,
    pub laws: LawsConfig,
    pub time: TimeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    /// Sides carrying the friction and heat-flux laws; the rest is clamped.
    pub gamma1_sides: Vec<Side>,
    pub domain: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub alpha: f64,
    pub conductivity: ConductivityConfig,
    pub buoyancy: BuoyancySpec,
    pub source_g: SourceConfig,
    pub initial_temperature: SourceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductivityConfig {
    pub law: ConductivityLaw,
    /// Declared lower bound of `k`.
    pub delta: f64,
}

/// Scalar data fields. `manufactured` switches the whole run to the smooth
/// manufactured solution: it sets the body force, heat source and initial
/// data together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Zero,
    Constant { value: f64 },
    /// `sin(pi x) (1 - y)`, the cavity presets' initial temperature.
    Cavity,
    Manufactured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LawsConfig {
    pub friction: LawConfig,
    pub heat_flux: LawConfig,
    pub mollification_m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawConfig {
    Zero,
    Abs,
    Quadratic,
    StickSlipJump { mu_s: f64, mu_k: f64, s0: f64 },
    StickSlipRamp { mu_s: f64, mu_k: f64, s1: f64, s2: f64 },
    SlipWeakening { mu_s: f64, mu_k: f64, c: f64 },
    NonmonotoneFlux { scale: f64 },
    /// Arbitrary piecewise-smooth `j'`.
    Piecewise(PiecewiseLaw),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub lag: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linear_tol: f64,
    pub regularizer: bool,
    pub enforce_h0: bool,
    pub law_range: f64,
    pub law_grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Csv,
    Vtu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub fields: Vec<FieldFormat>,
    pub monitors: bool,
    /// Write a field snapshot every this many steps; 0 keeps only the final state.
    pub snapshot_every: usize,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            name: "custom".into(),
            mesh: MeshConfig::default(),
            physics: PhysicsConfig::default(),
            laws: LawsConfig::default(),
            time: TimeConfig::default(),
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            nx: 8,
            ny: 8,
            gamma1_sides: vec![],
            domain: Rect::unit(),
        }
    }
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let d = SimConfig::default();
        PhysicsConfig {
            alpha: d.alpha,
            conductivity: ConductivityConfig {
                law: d.conductivity.law,
                delta: d.conductivity.delta,
            },
            buoyancy: d.buoyancy,
            source_g: SourceConfig::Zero,
            initial_temperature: SourceConfig::Zero,
        }
    }
}

impl Default for LawsConfig {
    fn default() -> Self {
        LawsConfig {
            friction: LawConfig::Zero,
            heat_flux: LawConfig::Zero,
            mollification_m: SimConfig::default().mollification_m,
        }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        let d = SimConfig::default();
        TimeConfig {
            t_final: d.t_final,
            dt: d.dt,
            lag: d.lag,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SimConfig::default();
        SolverConfig {
            picard_tol: d.picard_tol,
            picard_max: d.picard_max,
            linear_tol: d.linear_tol,
            regularizer: d.regularizer,
            enforce_h0: d.enforce_h0,
            law_range: d.law_range,
            law_grid: d.law_grid,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            fields: vec![FieldFormat::Csv, FieldFormat::Vtu],
            monitors: true,
            snapshot_every: 0,
        }
    }
}

impl LawConfig {
    pub fn build(&self) -> Result<PiecewiseLaw, CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("law parameter `{name}` must be positive, got {v}")))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("law parameter `{name}` must be finite")))
            }
        };
        let law = match *self {
            LawConfig::Zero => catalog::zero(),
            LawConfig::Abs => catalog::abs(),
            LawConfig::Quadratic => catalog::quadratic(),
            LawConfig::StickSlipJump { mu_s, mu_k, s0 } => {
                finite("mu_s", mu_s)?;
                finite("mu_k", mu_k)?;
                positive("s0", s0)?;
                catalog::stick_slip_jump(mu_s, mu_k, s0)
            }
            LawConfig::StickSlipRamp { mu_s, mu_k, s1, s2 } => {
                finite("mu_s", mu_s)?;
                finite("mu_k", mu_k)?;
                positive("s1", s1)?;
                positive("s2 - s1", s2 - s1)?;
                catalog::stick_slip_ramp(mu_s, mu_k, s1, s2)
            }
            LawConfig::SlipWeakening { mu_s, mu_k, c } => {
                finite("mu_s", mu_s)?;
                finite("mu_k", mu_k)?;
                finite("c", c)?;
                catalog::slip_weakening(mu_s, mu_k, c)
            }
            LawConfig::NonmonotoneFlux { scale } => {
                finite("scale", scale)?;
                catalog::nonmonotone_flux(scale)
            }
            LawConfig::Piecewise(ref law) => law.clone(),
        };
        law.validate()?;
        Ok(law)
    }

    /// Inverse of [`LawConfig::build`] for the catalog laws; anything else is
    /// kept as an explicit piecewise description.
    pub fn describe(law: &PiecewiseLaw) -> LawConfig {
        let c = |k: usize| match &law.pieces[k] {
            boussinesq_core::laws::Piece::Poly { coeffs } => coeffs.clone(),
            _ => vec![],
        };
        let guess = match law.name.as_str() {
            "zero" => Some(LawConfig::Zero),
            "abs" => Some(LawConfig::Abs),
            "quadratic" => Some(LawConfig::Quadratic),
            "stick-slip-jump" if law.breakpoints.len() == 1 => Some(LawConfig::StickSlipJump {
                mu_s: c(0)[0],
                mu_k: c(1)[0],
                s0: law.breakpoints[0],
            }),
            "stick-slip-ramp" if law.breakpoints.len() == 2 => Some(LawConfig::StickSlipRamp {
                mu_s: c(0)[0],
                mu_k: c(2)[0],
                s1: law.breakpoints[0],
                s2: law.breakpoints[1],
            }),
            "slip-weakening" => match law.pieces[0] {
                boussinesq_core::laws::Piece::Exp { a, b, c } => Some(LawConfig::SlipWeakening {
                    mu_s: a + b,
                    mu_k: a,
                    c,
                }),
                _ => None,
            },
            "nonmonotone-flux" => Some(LawConfig::NonmonotoneFlux { scale: c(0)[1] }),
            _ => None,
        };
        // only trust the guess when it rebuilds the same law
        match guess {
            Some(g) if g.build().is_ok_and(|b| b == *law) => g,
            _ => LawConfig::Piecewise(law.clone()),
        }
    }
}

impl SourceConfig {
    fn scalar(&self) -> ScalarSource {
        match *self {
            SourceConfig::Zero => ScalarSource::Zero,
            SourceConfig::Constant { value } => ScalarSource::Constant(value),
            SourceConfig::Cavity => cavity_initial_temperature(),
            SourceConfig::Manufactured => ScalarSource::Field(Arc::new(|x, _| exact::temperature(x, 0.0))),
        }
    }
}

impl ConfigFile {
    /// Config equivalent to one of the named presets.
    pub fn preset(name: &str) -> Result<ConfigFile, CliError> {
        let s = scenario::preset(name).ok_or_else(|| {
            CliError::config(format!(
                "unknown scenario `{name}`{}; presets are {}",
                suggest(name, &scenario::PRESETS),
                scenario::PRESETS.join(", ")
            ))
        })?;
        let (source_g, initial) = match name {
            "manufactured" => (SourceConfig::Manufactured, SourceConfig::Manufactured),
            _ => match s.config.source_g {
                ScalarSource::Constant(value) => (SourceConfig::Constant { value }, SourceConfig::Cavity),
                _ => (SourceConfig::Zero, SourceConfig::Cavity),
            },
        };
        let cfg = &s.config;
        Ok(ConfigFile {
            name: s.name.clone(),
            mesh: MeshConfig {
                nx: s.mesh.nx,
                ny: s.mesh.ny,
                gamma1_sides: s.mesh.tags.contact_sides(),
                domain: s.mesh.domain,
            },
            physics: PhysicsConfig {
                alpha: cfg.alpha,
                conductivity: ConductivityConfig {
                    law: cfg.conductivity.law.clone(),
                    delta: cfg.conductivity.delta,
                },
                buoyancy: cfg.buoyancy,
                source_g,
                initial_temperature: initial,
            },
            laws: LawsConfig {
                friction: LawConfig::describe(&cfg.friction),
                heat_flux: LawConfig::describe(&cfg.heat_flux),
                mollification_m: cfg.mollification_m,
            },
            time: TimeConfig {
                t_final: cfg.t_final,
                dt: cfg.dt,
                lag: cfg.lag,
            },
            solver: SolverConfig {
                picard_tol: cfg.picard_tol,
                picard_max: cfg.picard_max,
                linear_tol: cfg.linear_tol,
                regularizer: cfg.regularizer,
                enforce_h0: cfg.enforce_h0,
                law_range: cfg.law_range,
                law_grid: cfg.law_grid,
            },
            output: OutputConfig::default(),
        })
    }

    pub fn is_manufactured(&self) -> bool {
        self.physics.source_g == SourceConfig::Manufactured
    }

    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let mut tags = SideTags::all_dirichlet();
        for &side in &self.mesh.gamma1_sides {
            tags.set(side, BoundaryTag::Contact);
        }
        if Side::ALL.iter().all(|&s| tags.get(s) == BoundaryTag::Contact) {
            return Err(CliError::config(
                "mesh.gamma1_sides covers the whole boundary; Gamma_0 must be nonempty".into(),
            ));
        }
        let p = &self.physics;
        let conductivity = ConductivitySpec {
            law: p.conductivity.law.clone(),
            delta: p.conductivity.delta,
        };
        let manufactured = self.is_manufactured();
        if (p.initial_temperature == SourceConfig::Manufactured) != manufactured {
            return Err(CliError::config(
                "physics.source_g and physics.initial_temperature must both be `manufactured` or neither".into(),
            ));
        }
        let mut cfg = SimConfig {
            alpha: p.alpha,
            conductivity: conductivity.clone(),
            buoyancy: p.buoyancy,
            source_g: p.source_g.scalar(),
            friction: self.laws.friction.build()?,
            heat_flux: self.laws.heat_flux.build()?,
            mollification_m: self.laws.mollification_m,
            t_final: self.time.t_final,
            dt: self.time.dt,
            lag: self.time.lag,
            picard_tol: self.solver.picard_tol,
            picard_max: self.solver.picard_max,
            linear_tol: self.solver.linear_tol,
            regularizer: self.solver.regularizer,
            initial_temperature: p.initial_temperature.scalar(),
            law_range: self.solver.law_range,
            law_grid: self.solver.law_grid,
            enforce_h0: self.solver.enforce_h0,
            ..SimConfig::default()
        };
        if manufactured {
            if !self.mesh.gamma1_sides.is_empty() {
                return Err(CliError::config(
                    "the manufactured solution needs an empty Gamma_1 (mesh.gamma1_sides = [])".into(),
                ));
            }
            if self.mesh.domain != Rect::unit() {
                return Err(CliError::config("the manufactured solution lives on the unit square".into()));
            }
            cfg.source_g = manufactured_heat_source(conductivity);
            cfg.body_force = manufactured_body_force(p.alpha, p.buoyancy);
            cfg.initial_velocity = VectorSource::Field(Arc::new(|x, _| exact::velocity(x, 0.0)));
        }
        cfg.validate()?;
        Ok(Scenario {
            name: self.name.clone(),
            mesh: MeshSpec {
                nx: self.mesh.nx,
                ny: self.mesh.ny,
                domain: self.mesh.domain,
                tags,
            },
            config: cfg,
        })
    }

    /// Canonical JSON with every default filled in.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of [`ConfigFile::resolved_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.resolved_json().as_bytes()))
    }
}

/// Parses a config from JSON text.
pub fn parse_config_str(text: &str) -> Result<ConfigFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        CliError::config(format!("at `{path}`: {msg}{}", unknown_key_hint(&msg)))
    })?;
    cfg.to_scenario()?;
    Ok(cfg)
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// serde reports unknown keys as "unknown field `x`, expected one of `a`, `b`";
/// turn the list into a single suggestion.
fn unknown_key_hint(msg: &str) -> String {
    if !(msg.starts_with("unknown field") || msg.starts_with("unknown variant")) {
        return String::new();
    }
    let ticked: Vec<&str> = msg.split('`').skip(1).step_by(2).collect();
    match ticked.split_first() {
        Some((bad, known)) if !known.is_empty() => suggest(bad, known),
        _ => String::new(),
    }
}

fn suggest(bad: &str, known: &[&str]) -> String {
    known
        .iter()
        .map(|k| (strsim::jaro_winkler(bad, k), *k))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| format!(" (did you mean `{k}`?)"))
        .unwrap_or_default()
}
