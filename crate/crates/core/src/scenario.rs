//! Ready-made problem setups and the manufactured smooth solution.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::integrator::{ScalarSource, SimConfig, VectorSource};
use crate::laws::{catalog, BuoyancySpec, ConductivityLaw, ConductivitySpec};
use crate::mesh::{build_rect_mesh, Mesh, Rect, Side, SideTags};
use crate::spaces::{build_spaces, DiscreteSpaces};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    pub tags: SideTags,
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        build_rect_mesh(self.domain, self.nx, self.ny, self.tags)
    }

    pub fn spaces(&self) -> Result<DiscreteSpaces> {
        build_spaces(&self.build()?)
    }

    pub fn refined(&self, factor: usize) -> MeshSpec {
        MeshSpec {
            nx: self.nx * factor,
            ny: self.ny * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub mesh: MeshSpec,
    pub config: SimConfig,
}

pub const PRESETS: [&str; 3] = ["heated-cavity-slip", "stokes-check", "manufactured"];

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "heated-cavity-slip" => Some(heated_cavity_slip()),
        "stokes-check" => Some(stokes_check()),
        "manufactured" => Some(manufactured(8, 1.0 / 64.0, 0.25)),
        _ => None,
    }
}

/// Initial temperature of the cavity presets: warm along the slip floor,
/// zero on the other walls.
pub fn cavity_initial_temperature() -> ScalarSource {
    ScalarSource::Field(Arc::new(|x, _| (PI * x[0]).sin() * (1.0 - x[1])))
}

/// Unit cavity with a frictional slip floor (bounded-descent stick-slip),
/// nonmonotone floor heat flux, upward buoyancy and uniform heating. The
/// buoyancy is strong enough for the floor slip to reach the descending
/// part of the friction law.
pub fn heated_cavity_slip() -> Scenario {
    let config = SimConfig {
        alpha: 1.0,
        conductivity: ConductivitySpec {
            law: ConductivityLaw::Sinusoidal {
                base: 1.5,
                amplitude: 0.5,
                frequency: 1.0,
            },
            delta: 1.0,
        },
        buoyancy: BuoyancySpec { e: [0.0, 1.0], beta: 400.0 },
        source_g: ScalarSource::Constant(2.0),
        friction: catalog::stick_slip_ramp(0.5, 0.3, 0.2, 0.6),
        heat_flux: catalog::nonmonotone_flux(0.2),
        mollification_m: 8,
        t_final: 0.5,
        dt: 0.5 / 64.0,
        initial_temperature: cavity_initial_temperature(),
        ..SimConfig::default()
    };
    Scenario {
        name: "heated-cavity-slip".into(),
        mesh: MeshSpec {
            nx: 16,
            ny: 16,
            domain: Rect::unit(),
            tags: SideTags::with_contact(&[Side::Bottom]),
        },
        config,
    }
}

/// Same cavity without boundary laws: a pure slip-floor Stokes/heat check.
pub fn stokes_check() -> Scenario {
    let mut s = heated_cavity_slip();
    s.name = "stokes-check".into();
    s.config.friction = catalog::zero();
    s.config.heat_flux = catalog::zero();
    s
}

/// Smooth solution on the unit square with `Gamma_1` empty.
pub mod exact {
    use super::PI;

    /// `e^{-t} curl(sin^2(pi x) sin^2(pi y))`
    pub fn velocity(x: [f64; 2], t: f64) -> [f64; 2] {
        let (a, b) = (PI * x[0], PI * x[1]);
        let e = (-t).exp();
        [
            e * PI * a.sin().powi(2) * (2.0 * b).sin(),
            -e * PI * (2.0 * a).sin() * b.sin().powi(2),
        ]
    }

    /// Rows are components, columns derivatives: `grad[i][j] = d u_i / d x_j`.
    pub fn velocity_gradient(x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let (a, b) = (PI * x[0], PI * x[1]);
        let e = (-t).exp();
        let p2 = PI * PI;
        [
            [
                e * p2 * (2.0 * a).sin() * (2.0 * b).sin(),
                e * 2.0 * p2 * a.sin().powi(2) * (2.0 * b).cos(),
            ],
            [
                -e * 2.0 * p2 * (2.0 * a).cos() * b.sin().powi(2),
                -e * p2 * (2.0 * a).sin() * (2.0 * b).sin(),
            ],
        ]
    }

    pub fn velocity_laplacian(x: [f64; 2], t: f64) -> [f64; 2] {
        let (a, b) = (PI * x[0], PI * x[1]);
        let e = (-t).exp();
        let p3 = PI * PI * PI;
        [
            e * (2.0 * p3 * (2.0 * a).cos() * (2.0 * b).sin() - 4.0 * p3 * a.sin().powi(2) * (2.0 * b).sin()),
            e * (4.0 * p3 * (2.0 * a).sin() * b.sin().powi(2) - 2.0 * p3 * (2.0 * a).sin() * (2.0 * b).cos()),
        ]
    }

    /// Zero-mean pressure `e^{-t} cos(pi x) cos(pi y)`.
    pub fn pressure(x: [f64; 2], t: f64) -> f64 {
        (-t).exp() * (PI * x[0]).cos() * (PI * x[1]).cos()
    }

    pub fn pressure_gradient(x: [f64; 2], t: f64) -> [f64; 2] {
        let (a, b) = (PI * x[0], PI * x[1]);
        let e = (-t).exp();
        [-e * PI * a.sin() * b.cos(), -e * PI * a.cos() * b.sin()]
    }

    pub fn temperature(x: [f64; 2], t: f64) -> f64 {
        (-t).exp() * (PI * x[0]).sin() * (PI * x[1]).sin()
    }

    pub fn temperature_gradient(x: [f64; 2], t: f64) -> [f64; 2] {
        let (a, b) = (PI * x[0], PI * x[1]);
        let e = (-t).exp();
        [e * PI * a.cos() * b.sin(), e * PI * a.sin() * b.cos()]
    }

    pub fn temperature_laplacian(x: [f64; 2], t: f64) -> f64 {
        -2.0 * PI * PI * temperature(x, t)
    }
}

/// Momentum source making [`exact`] solve the flow equations:
/// `f = u_t - alpha lap u + (u . grad) u + grad p - beta theta e`.
pub fn manufactured_body_force(alpha: f64, buoyancy: BuoyancySpec) -> VectorSource {
    VectorSource::Field(Arc::new(move |x, t| {
        let u = exact::velocity(x, t);
        let gu = exact::velocity_gradient(x, t);
        let lap = exact::velocity_laplacian(x, t);
        let gp = exact::pressure_gradient(x, t);
        let fb = buoyancy.force(exact::temperature(x, t));
        let mut f = [0.0; 2];
        for i in 0..2 {
            let conv = u[0] * gu[i][0] + u[1] * gu[i][1];
            // u_t = -u for the e^{-t} profile
            f[i] = -u[i] - alpha * lap[i] + conv + gp[i] - fb[i];
        }
        f
    }))
}

/// Heat source making [`exact`] solve
/// `theta_t - div(k(theta) grad theta) + u . grad theta = g`.
pub fn manufactured_heat_source(k: ConductivitySpec) -> ScalarSource {
    ScalarSource::Field(Arc::new(move |x, t| {
        let th = exact::temperature(x, t);
        let g = exact::temperature_gradient(x, t);
        let u = exact::velocity(x, t);
        let grad_sq = g[0] * g[0] + g[1] * g[1];
        -th - k.derivative(th) * grad_sq - k.eval(th) * exact::temperature_laplacian(x, t) + u[0] * g[0] + u[1] * g[1]
    }))
}

/// Manufactured configuration on an `n x n` mesh of the unit square, all
/// walls `Gamma_0`, laws zero.
pub fn manufactured(n: usize, dt: f64, t_final: f64) -> Scenario {
    let alpha = 1.0;
    let buoyancy = BuoyancySpec { e: [0.0, 1.0], beta: 1.0 };
    let conductivity = ConductivitySpec {
        law: ConductivityLaw::Sinusoidal {
            base: 1.0,
            amplitude: 0.25,
            frequency: 1.0,
        },
        delta: 0.75,
    };
    let config = SimConfig {
        alpha,
        conductivity: conductivity.clone(),
        buoyancy,
        source_g: manufactured_heat_source(conductivity),
        body_force: manufactured_body_force(alpha, buoyancy),
        friction: catalog::zero(),
        heat_flux: catalog::zero(),
        t_final,
        dt,
        initial_velocity: VectorSource::Field(Arc::new(|x, _| exact::velocity(x, 0.0))),
        initial_temperature: ScalarSource::Field(Arc::new(|x, _| exact::temperature(x, 0.0))),
        ..SimConfig::default()
    };
    Scenario {
        name: "manufactured".into(),
        mesh: MeshSpec {
            nx: n,
            ny: n,
            domain: Rect::unit(),
            tags: SideTags::all_dirichlet(),
        },
        config,
    }
}
