//! Time-retarded, mollified and regularized stepping of the coupled system.
//!
//! Each step first solves the velocity saddle system (backward Euler,
//! convection frozen at the previous step, buoyancy from the retarded
//! temperature), then the temperature system with retarded conductivity and
//! convection. The mollified boundary terms are the only nonlinearity and are
//! resolved by Picard iteration on a once-factored matrix.

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::forms::{self, BoundaryResidual, SparseOperatorSet, TraceKind};
use crate::laws::{
    check_h0, estimate_constants, mollify, BoundaryLaw, BuoyancySpec, ConductivitySpec, H0Report, LawConstants,
    PiecewiseLaw,
};
use crate::linalg::{self, LuSolver, SparseMatrix, SymbolicCache};
use crate::spaces::{korn_mass_constant, trace_norms, DiscreteSpaces, TraceNorms};

pub type ScalarFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Space-time scalar data (temperature source, initial temperature).
#[derive(Clone)]
pub enum ScalarSource {
    Zero,
    Constant(f64),
    Field(ScalarFn),
}

impl ScalarSource {
    pub fn eval(&self, x: [f64; 2], t: f64) -> f64 {
        match self {
            ScalarSource::Zero => 0.0,
            ScalarSource::Constant(c) => *c,
            ScalarSource::Field(f) => f(x, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarSource::Zero) || matches!(self, ScalarSource::Constant(c) if *c == 0.0)
    }
}

impl fmt::Debug for ScalarSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarSource::Zero => f.write_str("Zero"),
            ScalarSource::Constant(c) => write!(f, "Constant({c})"),
            ScalarSource::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// Space-time vector data (body force, initial velocity).
#[derive(Clone)]
pub enum VectorSource {
    Zero,
    Field(VectorFn),
}

impl VectorSource {
    pub fn eval(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        match self {
            VectorSource::Zero => [0.0, 0.0],
            VectorSource::Field(f) => f(x, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, VectorSource::Zero)
    }
}

impl fmt::Debug for VectorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorSource::Zero => f.write_str("Zero"),
            VectorSource::Field(_) => f.write_str("Field(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub alpha: f64,
    pub conductivity: ConductivitySpec,
    pub buoyancy: BuoyancySpec,
    pub source_g: ScalarSource,
    /// Momentum source; zero in the physical model, used by manufactured solutions.
    pub body_force: VectorSource,
    pub friction: PiecewiseLaw,
    pub heat_flux: PiecewiseLaw,
    pub mollification_m: u32,
    pub t_final: f64,
    pub dt: f64,
    /// Retardation lag in steps; `h = lag * dt`.
    pub lag: usize,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub linear_tol: f64,
    /// Adds `h G(theta_lag)` to the temperature operator.
    pub regularizer: bool,
    pub initial_velocity: VectorSource,
    pub initial_temperature: ScalarSource,
    /// Law constants are certified on `[-law_range, law_range]`.
    pub law_range: f64,
    pub law_grid: usize,
    /// Refuse to run when H0 fails.
    pub enforce_h0: bool,
    /// Keep every state (needed by refinement studies).
    pub keep_trajectory: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            alpha: 1.0,
            conductivity: ConductivitySpec::constant(1.0),
            buoyancy: BuoyancySpec::none(),
            source_g: ScalarSource::Zero,
            body_force: VectorSource::Zero,
            friction: crate::laws::catalog::zero(),
            heat_flux: crate::laws::catalog::zero(),
            mollification_m: 8,
            t_final: 1.0,
            dt: 1.0 / 64.0,
            lag: 1,
            picard_tol: 1e-8,
            picard_max: 100,
            linear_tol: 1e-10,
            regularizer: true,
            initial_velocity: VectorSource::Zero,
            initial_temperature: ScalarSource::Zero,
            law_range: 10.0,
            law_grid: 2001,
            enforce_h0: true,
            keep_trajectory: false,
        }
    }
}

impl SimConfig {
    pub fn retardation(&self) -> f64 {
        self.lag as f64 * self.dt
    }

    pub fn n_steps(&self) -> Result<usize> {
        let n = (self.t_final / self.dt).round();
        if !(n >= 1.0) || (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("T = {} must be a positive multiple of dt = {}", self.t_final, self.dt),
            });
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let param = |name: &'static str, ok: bool, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason })
            }
        };
        param("alpha", self.alpha > 0.0 && self.alpha.is_finite(), format!("must be positive, got {}", self.alpha))?;
        param("dt", self.dt > 0.0 && self.dt.is_finite(), format!("must be positive, got {}", self.dt))?;
        param("T", self.t_final >= self.dt, format!("T = {} must be at least dt = {}", self.t_final, self.dt))?;
        param("lag", self.lag >= 1, "must be at least 1".into())?;
        param("mollification_m", self.mollification_m >= 1, "must be at least 1".into())?;
        param("picard_tol", self.picard_tol > 0.0, format!("must be positive, got {}", self.picard_tol))?;
        param("picard_max", self.picard_max >= 1, "must be at least 1".into())?;
        param("linear_tol", self.linear_tol > 0.0, format!("must be positive, got {}", self.linear_tol))?;
        self.n_steps()?;
        self.conductivity.verify()?;
        self.buoyancy.verify()?;
        self.friction.validate()?;
        self.heat_flux.validate()?;
        Ok(())
    }
}

/// Unknowns at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub step: usize,
    pub t: f64,
    /// Free velocity coefficients.
    pub u: Vec<f64>,
    /// Pressure at the vertices, zero mean.
    pub p: Vec<f64>,
    /// Free temperature coefficients.
    pub theta: Vec<f64>,
    /// Friction multiplier at the Gamma_1 quadrature points.
    pub xi: Vec<f64>,
    /// Heat-flux multiplier at the Gamma_1 quadrature points.
    pub xi1: Vec<f64>,
}

impl FieldState {
    pub fn zeros(spaces: &DiscreteSpaces) -> Self {
        let nb = spaces.boundary_points.len();
        FieldState {
            step: 0,
            t: 0.0,
            u: vec![0.0; spaces.n_velocity()],
            p: vec![0.0; spaces.n_pressure()],
            theta: vec![0.0; spaces.n_temperature()],
            xi: vec![0.0; nb],
            xi1: vec![0.0; nb],
        }
    }
}

/// Initial state plus a ring of the most recent states.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    initial: FieldState,
    ring: VecDeque<FieldState>,
    capacity: usize,
}

impl HistoryBuffer {
    /// Keeps enough states for lagged access with lag `lag`.
    pub fn new(initial: FieldState, lag: usize) -> Self {
        HistoryBuffer {
            ring: VecDeque::with_capacity(lag + 1),
            capacity: lag + 1,
            initial,
        }
    }

    pub fn initial(&self) -> &FieldState {
        &self.initial
    }

    /// Index of the newest stored state.
    pub fn latest_step(&self) -> usize {
        self.ring.back().map_or(self.initial.step, |s| s.step)
    }

    pub fn latest(&self) -> &FieldState {
        self.ring.back().unwrap_or(&self.initial)
    }

    pub fn push(&mut self, state: FieldState) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(state);
    }

    pub fn get(&self, step: usize) -> Result<&FieldState> {
        if step == self.initial.step {
            return Ok(&self.initial);
        }
        self.ring
            .iter()
            .find(|s| s.step == step)
            .ok_or(Error::HistoryEvicted(step))
    }
}

/// State at index `max(n - lag, 0)`.
pub fn retard(buffer: &HistoryBuffer, n: usize, lag: usize) -> Result<&FieldState> {
    buffer.get(n.saturating_sub(lag))
}

/// Constants fixed for a run on one mesh.
#[derive(Debug, Clone)]
pub struct RunConstants {
    pub friction: LawConstants,
    pub heat_flux: LawConstants,
    pub trace: TraceNorms,
    /// Korn-vs-mass coercivity constant (infinite when unused).
    pub kappa: f64,
    /// Buoyancy constant `beta^2 |e|^2 / (alpha kappa)`.
    pub c_f: f64,
    pub contact_length: f64,
    pub h0: H0Report,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitorRecord {
    pub step: usize,
    pub t: f64,
    pub kinetic: f64,
    pub viscous: f64,
    pub thermal: f64,
    pub thermal_dissipation: f64,
    pub regularizer: f64,
    pub friction_work: f64,
    pub heat_flux_work: f64,
    pub picard_u: usize,
    pub picard_theta: usize,
    pub slack_u: f64,
    pub scale_u: f64,
    pub slack_theta: f64,
    pub scale_theta: f64,
    pub convection_u: f64,
    pub convection_theta: f64,
    pub divergence: f64,
    pub xi_growth: f64,
    pub xi1_growth: f64,
    pub xi_l2_sq: f64,
    pub xi1_l2_sq: f64,
    pub w14: f64,
}

impl MonitorRecord {
    pub const HEADER: [&'static str; 23] = [
        "step",
        "t",
        "kinetic",
        "viscous",
        "thermal",
        "thermal_dissipation",
        "regularizer",
        "friction_work",
        "heat_flux_work",
        "picard_u",
        "picard_theta",
        "slack_u",
        "scale_u",
        "slack_theta",
        "scale_theta",
        "convection_u",
        "convection_theta",
        "divergence",
        "xi_growth",
        "xi1_growth",
        "xi_l2_sq",
        "xi1_l2_sq",
        "w14",
    ];

    pub fn values(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.17e}");
        vec![
            self.step.to_string(),
            f(self.t),
            f(self.kinetic),
            f(self.viscous),
            f(self.thermal),
            f(self.thermal_dissipation),
            f(self.regularizer),
            f(self.friction_work),
            f(self.heat_flux_work),
            self.picard_u.to_string(),
            self.picard_theta.to_string(),
            f(self.slack_u),
            f(self.scale_u),
            f(self.slack_theta),
            f(self.scale_theta),
            f(self.convection_u),
            f(self.convection_theta),
            f(self.divergence),
            f(self.xi_growth),
            f(self.xi1_growth),
            f(self.xi_l2_sq),
            f(self.xi1_l2_sq),
            f(self.w14),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    /// `sup 1/2|u|^2 + sum dt |u|_E^2 + sup 1/2|theta|^2 + sum dt |grad theta|^2 + regularizer`.
    pub energy_total: f64,
    /// `dt * sum h theta^T G theta`.
    pub regularizer_sum: f64,
    pub xi_sum: f64,
    pub xi1_sum: f64,
    pub max_divergence: f64,
    pub max_picard_u: usize,
    pub max_picard_theta: usize,
    pub min_relative_slack: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: FieldState,
    /// All states from step 0 when `keep_trajectory` is set, otherwise empty.
    pub trajectory: Vec<FieldState>,
    pub monitors: Vec<MonitorRecord>,
    pub constants: RunConstants,
    pub summary: RunSummary,
    pub warnings: Vec<String>,
}

/// Result of one velocity step.
#[derive(Debug, Clone)]
pub struct VelocityStep {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub xi: Vec<f64>,
    /// Multiplier the accepted solve actually used.
    pub xi_used: Vec<f64>,
    pub trace_used: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TemperatureStep {
    pub theta: Vec<f64>,
    pub xi1: Vec<f64>,
    pub xi1_used: Vec<f64>,
    pub trace_used: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub operator_b0: SparseMatrix,
    pub operator_g: SparseMatrix,
    pub convection: SparseMatrix,
}

/// A configured run on a fixed mesh.
pub struct Simulation<'a> {
    pub cfg: &'a SimConfig,
    pub spaces: &'a DiscreteSpaces,
    pub ops: &'a SparseOperatorSet,
    pub friction: BoundaryLaw,
    pub heat_flux: BoundaryLaw,
    pub constants: RunConstants,
    pub warnings: Vec<String>,
    // step matrices keep their sparsity pattern for the whole run
    velocity_lu: Mutex<SymbolicCache>,
    temperature_lu: Mutex<SymbolicCache>,
}

fn boundary_law(law: &PiecewiseLaw, m: u32, contact: bool) -> Result<BoundaryLaw> {
    if !contact || law.is_zero() {
        Ok(BoundaryLaw::Zero)
    } else {
        Ok(BoundaryLaw::Mollified(mollify(law, m)?))
    }
}

pub fn run_constants(cfg: &SimConfig, spaces: &DiscreteSpaces) -> Result<RunConstants> {
    let friction = estimate_constants(&cfg.friction, cfg.law_range, cfg.law_grid)?;
    let heat_flux = estimate_constants(&cfg.heat_flux, cfg.law_range, cfg.law_grid)?;
    let trace = trace_norms(spaces)?;
    let beta_e = cfg.buoyancy.operator_norm();
    let kappa = if beta_e > 0.0 { korn_mass_constant(spaces)? } else { f64::INFINITY };
    let c_f = if beta_e > 0.0 { beta_e * beta_e / (cfg.alpha * kappa) } else { 0.0 };
    let h0 = check_h0(&friction, &heat_flux, cfg.alpha, &cfg.conductivity, trace.gamma_s_norm, trace.gamma_norm);
    Ok(RunConstants {
        friction,
        heat_flux,
        trace,
        kappa,
        c_f,
        contact_length: spaces.mesh.contact_length(),
        h0,
    })
}

/// Saddle matrix `[A C^T 0; C 0 m; 0 m^T 0]` for the velocity block `A`.
pub fn saddle_matrix(a: &SparseMatrix, c: &SparseMatrix, mean: &[f64]) -> SparseMatrix {
    let nu = a.nrows;
    let np = c.nrows;
    let n = nu + np + 1;
    let ct = c.transpose();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(a.nnz() + 2 * c.nnz() + 2 * np);
    let mut values = Vec::with_capacity(indices.capacity());
    indptr.push(0);
    // column ranges of the blocks are disjoint, so rows are concatenations
    for i in 0..nu {
        for k in a.indptr[i]..a.indptr[i + 1] {
            indices.push(a.indices[k]);
            values.push(a.values[k]);
        }
        for k in ct.indptr[i]..ct.indptr[i + 1] {
            indices.push(nu + ct.indices[k]);
            values.push(ct.values[k]);
        }
        indptr.push(indices.len());
    }
    for q in 0..np {
        for k in c.indptr[q]..c.indptr[q + 1] {
            indices.push(c.indices[k]);
            values.push(c.values[k]);
        }
        indices.push(nu + np);
        values.push(mean[q]);
        indptr.push(indices.len());
    }
    for (q, &m) in mean.iter().enumerate() {
        indices.push(nu + q);
        values.push(m);
    }
    indptr.push(indices.len());
    SparseMatrix {
        nrows: n,
        ncols: n,
        indptr,
        indices,
        values,
    }
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a SimConfig, spaces: &'a DiscreteSpaces, ops: &'a SparseOperatorSet) -> Result<Self> {
        cfg.validate()?;
        let contact = spaces.has_contact();
        let constants = run_constants(cfg, spaces)?;
        let mut warnings: Vec<String> = constants.trace.warnings.clone();
        if !constants.h0.passes() {
            let msg = format!(
                "H0 violated: alpha = {} vs {:.6e}, delta = {} vs {:.6e}",
                constants.h0.velocity.lhs, constants.h0.velocity.rhs, constants.h0.temperature.lhs, constants.h0.temperature.rhs
            );
            if cfg.enforce_h0 {
                return Err(Error::H0Violated(msg));
            }
            log::warn!("{msg}; continuing because enforcement is off");
            warnings.push(msg);
        }
        Ok(Simulation {
            friction: boundary_law(&cfg.friction, cfg.mollification_m, contact)?,
            heat_flux: boundary_law(&cfg.heat_flux, cfg.mollification_m, contact)?,
            cfg,
            spaces,
            ops,
            constants,
            warnings,
            velocity_lu: Mutex::default(),
            temperature_lu: Mutex::default(),
        })
    }

    /// L2 projection of the configured initial velocity onto the discretely
    /// divergence-free constrained space, and nodal interpolation of the
    /// initial temperature.
    pub fn initial_state(&self) -> Result<FieldState> {
        let sp = self.spaces;
        let mut state = FieldState::zeros(sp);
        if !self.cfg.initial_velocity.is_zero() {
            let u0 = &self.cfg.initial_velocity;
            let load = forms::velocity_load(sp, |x| u0.eval(x, 0.0));
            let k = saddle_matrix(&self.ops.mass_u, &self.ops.c, &self.ops.pressure_mean);
            let lu = LuSolver::factor(&k)?;
            let mut rhs = load;
            rhs.resize(k.nrows, 0.0);
            let x = linalg::solve_checked(&k, &lu, &rhs, self.cfg.linear_tol)?;
            state.u = x[..sp.n_velocity()].to_vec();
        }
        if !self.cfg.initial_temperature.is_zero() {
            let th0 = &self.cfg.initial_temperature;
            state.theta = sp.interpolate_temperature(|x| th0.eval(x, 0.0));
        }
        let nodal_u = sp.expand_velocity(&state.u);
        state.xi = self
            .friction_residual(&sp.tangential_trace(&nodal_u))?
            .multiplier;
        let nodal_t = sp.expand_temperature(&state.theta);
        state.xi1 = self.heat_residual(&sp.temperature_trace(&nodal_t))?.multiplier;
        Ok(state)
    }

    fn friction_residual(&self, trace: &[f64]) -> Result<BoundaryResidual> {
        forms::boundary_nonsmooth_residual(self.spaces, &self.friction, trace, TraceKind::Velocity)
    }

    fn heat_residual(&self, trace: &[f64]) -> Result<BoundaryResidual> {
        forms::boundary_nonsmooth_residual(self.spaces, &self.heat_flux, trace, TraceKind::Temperature)
    }

    /// Solves for `u^{n+1}`, `p^{n+1}` given the previous state and the
    /// retarded temperature (free coefficients).
    pub fn step_velocity(&self, state: &FieldState, theta_lag: &[f64], t_next: f64) -> Result<VelocityStep> {
        let sp = self.spaces;
        let ops = self.ops;
        let cfg = self.cfg;
        let nu = sp.n_velocity();
        let np = sp.n_pressure();
        let dt = cfg.dt;

        let w = sp.expand_velocity(&state.u);
        let conv = forms::assemble_a1_skew(sp, &w)?;
        let a = ops.mass_u.add(1.0 / dt, &ops.a0, 1.0).add(1.0, &conv, 1.0);
        let k = saddle_matrix(&a, &ops.c, &ops.pressure_mean);
        let lu = self.velocity_lu.lock().expect("velocity LU cache").factor(&k)?;

        let mut base = ops.mass_u.matvec(&state.u);
        base.iter_mut().for_each(|v| *v /= dt);
        let theta_nodal = sp.expand_temperature(theta_lag);
        let buoy = ops.buoyancy.matvec(&theta_nodal);
        linalg::axpy(1.0, &buoy, &mut base);
        if !cfg.body_force.is_zero() {
            let f = &cfg.body_force;
            let load = forms::velocity_load(sp, |x| f.eval(x, t_next));
            linalg::axpy(1.0, &load, &mut base);
        }

        let solve = |residual: Option<&[f64]>| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut rhs = base.clone();
            if let Some(r) = residual {
                linalg::axpy(-1.0, r, &mut rhs);
            }
            rhs.resize(nu + np + 1, 0.0);
            let x = linalg::solve_checked(&k, &lu, &rhs, cfg.linear_tol)?;
            Ok((x[..nu].to_vec(), x[nu..nu + np].to_vec()))
        };

        let zero_trace = vec![0.0; sp.boundary_points.len()];
        if matches!(self.friction, BoundaryLaw::Zero) {
            let (u, p) = solve(None)?;
            return Ok(VelocityStep {
                u,
                p,
                xi: zero_trace.clone(),
                xi_used: zero_trace.clone(),
                trace_used: sp.tangential_trace(&sp.expand_velocity(&state.u)),
                iterations: 1,
                history: vec![],
            });
        }

        let mut current = state.u.clone();
        let mut history = Vec::new();
        for it in 1..=cfg.picard_max {
            let trace = sp.tangential_trace(&sp.expand_velocity(&current));
            let r = self.friction_residual(&trace)?;
            let (u_new, p_new) = solve(Some(&r.residual))?;
            let diff: Vec<f64> = u_new.iter().zip(&current).map(|(a, b)| a - b).collect();
            let change = ops.mass_u.quad(&diff).max(0.0).sqrt();
            let size = ops.mass_u.quad(&u_new).max(0.0).sqrt();
            history.push(change);
            if change <= cfg.picard_tol * size.max(1.0) {
                let nodal = sp.expand_velocity(&u_new);
                let xi = self.friction_residual(&sp.tangential_trace(&nodal))?.multiplier;
                return Ok(VelocityStep {
                    u: u_new,
                    p: p_new,
                    xi,
                    xi_used: r.multiplier,
                    trace_used: trace,
                    iterations: it,
                    history,
                });
            }
            if it > 10 {
                // stalled: damped update
                for (c, n) in current.iter_mut().zip(&u_new) {
                    *c += 0.5 * (n - *c);
                }
            } else {
                current = u_new;
            }
        }
        Err(Error::PicardDivergence {
            step: state.step + 1,
            field: "velocity",
            iterations: cfg.picard_max,
            history,
        })
    }

    /// Solves for `theta^{n+1}` given the previous state and the retarded
    /// velocity and temperature.
    pub fn step_temperature(
        &self,
        state: &FieldState,
        u_lag: &[f64],
        theta_lag: &[f64],
        t_next: f64,
    ) -> Result<TemperatureStep> {
        let sp = self.spaces;
        let ops = self.ops;
        let cfg = self.cfg;
        let dt = cfg.dt;
        let h = cfg.retardation();

        let theta_lag_nodal = sp.expand_temperature(theta_lag);
        let b0 = forms::assemble_b0(sp, &cfg.conductivity, &theta_lag_nodal)?;
        let conv = forms::assemble_b1_skew(sp, &sp.expand_velocity(u_lag))?;
        let g = if cfg.regularizer {
            forms::assemble_g(sp, &theta_lag_nodal)?
        } else {
            SparseMatrix::zeros(sp.n_temperature(), sp.n_temperature())
        };
        let a = ops
            .mass_theta
            .add(1.0 / dt, &b0, 1.0)
            .add(1.0, &conv, 1.0)
            .add(1.0, &g, h);
        let lu = self.temperature_lu.lock().expect("temperature LU cache").factor(&a)?;

        let mut base = ops.mass_theta.matvec(&state.theta);
        base.iter_mut().for_each(|v| *v /= dt);
        if !cfg.source_g.is_zero() {
            let src = &cfg.source_g;
            let load = forms::temperature_load(sp, |x| src.eval(x, t_next));
            linalg::axpy(1.0, &load, &mut base);
        }
        let solve = |residual: Option<&[f64]>| -> Result<Vec<f64>> {
            let mut rhs = base.clone();
            if let Some(r) = residual {
                linalg::axpy(-1.0, r, &mut rhs);
            }
            linalg::solve_checked(&a, &lu, &rhs, cfg.linear_tol)
        };

        let zero_trace = vec![0.0; sp.boundary_points.len()];
        if matches!(self.heat_flux, BoundaryLaw::Zero) {
            let theta = solve(None)?;
            return Ok(TemperatureStep {
                theta,
                xi1: zero_trace.clone(),
                xi1_used: zero_trace.clone(),
                trace_used: sp.temperature_trace(&sp.expand_temperature(&state.theta)),
                iterations: 1,
                history: vec![],
                operator_b0: b0,
                operator_g: g,
                convection: conv,
            });
        }

        let mut current = state.theta.clone();
        let mut history = Vec::new();
        for it in 1..=cfg.picard_max {
            let trace = sp.temperature_trace(&sp.expand_temperature(&current));
            let r = self.heat_residual(&trace)?;
            let new = solve(Some(&r.residual))?;
            let diff: Vec<f64> = new.iter().zip(&current).map(|(a, b)| a - b).collect();
            let change = ops.mass_theta.quad(&diff).max(0.0).sqrt();
            let size = ops.mass_theta.quad(&new).max(0.0).sqrt();
            history.push(change);
            if change <= cfg.picard_tol * size.max(1.0) {
                let xi1 = self
                    .heat_residual(&sp.temperature_trace(&sp.expand_temperature(&new)))?
                    .multiplier;
                return Ok(TemperatureStep {
                    theta: new,
                    xi1,
                    xi1_used: r.multiplier,
                    trace_used: trace,
                    iterations: it,
                    history,
                    operator_b0: b0,
                    operator_g: g,
                    convection: conv,
                });
            }
            if it > 10 {
                for (c, n) in current.iter_mut().zip(&new) {
                    *c += 0.5 * (n - *c);
                }
            } else {
                current = new;
            }
        }
        Err(Error::PicardDivergence {
            step: state.step + 1,
            field: "temperature",
            iterations: cfg.picard_max,
            history,
        })
    }

    /// Advances from `t = 0` to `T`.
    pub fn run(mut self) -> Result<RunOutput> {
        let cfg = self.cfg;
        let sp = self.spaces;
        let ops = self.ops;
        let n_steps = cfg.n_steps()?;
        let dt = cfg.dt;
        let h = cfg.retardation();
        let m_inv = 1.0 / cfg.mollification_m as f64;
        let c = &self.constants;
        let (c0, c1) = (c.friction.growth, c.heat_flux.growth);
        let (gs, g) = (c.trace.gamma_s_norm, c.trace.gamma_norm);
        let root_len = c.contact_length.sqrt();
        let h1 = ops.stiffness_theta.add(1.0, &ops.mass_theta, 1.0);

        let initial = self.initial_state()?;
        let mut buffer = HistoryBuffer::new(initial.clone(), cfg.lag);
        let mut trajectory = Vec::new();
        if cfg.keep_trajectory {
            trajectory.reserve(n_steps + 1);
            trajectory.push(initial.clone());
        }

        let mut monitors = Vec::with_capacity(n_steps);
        let mut summary = RunSummary {
            min_relative_slack: f64::INFINITY,
            ..Default::default()
        };
        let mut sup_kinetic = 0.5 * ops.mass_u.quad(&initial.u);
        let mut sup_thermal = 0.5 * ops.mass_theta.quad(&initial.theta);
        let mut sum_viscous = 0.0;
        let mut sum_conduction = 0.0;
        let mut max_trace: f64 = 0.0;

        for n in 0..n_steps {
            let t_next = (n + 1) as f64 * dt;
            let prev = buffer.latest().clone();
            let lagged = retard(&buffer, n + 1, cfg.lag)?.clone();

            let vs = self.step_velocity(&prev, &lagged.theta, t_next)?;
            let ts = self.step_temperature(&prev, &lagged.u, &lagged.theta, t_next)?;

            // velocity energy balance
            let kin_new = 0.5 * ops.mass_u.quad(&vs.u);
            let kin_old = 0.5 * ops.mass_u.quad(&prev.u);
            let a0u = ops.a0.quad(&vs.u);
            let norm_e = (a0u / cfg.alpha).max(0.0).sqrt();
            // |s_used|_Gamma bounds the growth part of the multiplier actually used
            let trace_used_u = sp.boundary_l2(&vs.trace_used);
            let theta_lag_sq = ops.mass_theta.quad(&lagged.theta);
            let lhs_u = kin_new - kin_old + dt * 0.75 * a0u;
            let rhs_u = dt
                * (c.c_f * theta_lag_sq
                    + c0 * (1.0 + m_inv) * root_len * gs * norm_e
                    + c0 * gs * trace_used_u * norm_e);
            let body = if cfg.body_force.is_zero() {
                0.0
            } else {
                let f = &cfg.body_force;
                let load = forms::velocity_load(sp, |x| f.eval(x, t_next));
                dt * linalg::dot(&load, &vs.u)
            };
            let rhs_u = rhs_u + body;
            let scale_u = kin_new.abs().max(kin_old.abs()).max(dt * a0u).max(rhs_u.abs()).max(f64::MIN_POSITIVE);
            let slack_u = rhs_u - lhs_u;

            // temperature energy balance
            let th_new = 0.5 * ops.mass_theta.quad(&ts.theta);
            let th_old = 0.5 * ops.mass_theta.quad(&prev.theta);
            let b0q = ts.operator_b0.quad(&ts.theta);
            let gq = ts.operator_g.quad(&ts.theta);
            let norm_v = h1.quad(&ts.theta).max(0.0).sqrt();
            let trace_used_norm = sp.boundary_l2(&ts.trace_used);
            let src = if cfg.source_g.is_zero() {
                0.0
            } else {
                let s = &cfg.source_g;
                linalg::dot(&forms::temperature_load(sp, |x| s.eval(x, t_next)), &ts.theta)
            };
            let reg = if cfg.regularizer { h * gq } else { 0.0 };
            let lhs_t = th_new - th_old + dt * (b0q + reg);
            let rhs_t = dt * (src + c1 * (1.0 + m_inv) * root_len * g * norm_v + c1 * g * trace_used_norm * norm_v);
            let scale_t = th_new.abs().max(th_old.abs()).max(dt * b0q).max(rhs_t.abs()).max(f64::MIN_POSITIVE);
            let slack_t = rhs_t - lhs_t;

            let nodal_new = sp.expand_velocity(&vs.u);
            let trace_u = sp.tangential_trace(&nodal_new);
            let trace_t = sp.temperature_trace(&sp.expand_temperature(&ts.theta));
            max_trace = trace_u.iter().chain(&trace_t).fold(max_trace, |m, v| m.max(v.abs()));
            let growth = |xi: &[f64], s: &[f64]| {
                xi.iter().zip(s).fold(0.0f64, |m, (x, s)| m.max(x.abs() / (1.0 + s.abs())))
            };
            let conv_u = forms::assemble_a1_skew(sp, &sp.expand_velocity(&prev.u))?.quad(&vs.u);
            let div = linalg::norm2(&ops.c.matvec(&vs.u));
            let xi_sq = sp.boundary_l2(&vs.xi).powi(2);
            let xi1_sq = sp.boundary_l2(&ts.xi1).powi(2);

            let rec = MonitorRecord {
                step: n + 1,
                t: t_next,
                kinetic: kin_new,
                viscous: dt * a0u,
                thermal: th_new,
                thermal_dissipation: dt * b0q,
                regularizer: dt * reg,
                friction_work: dt * sp
                    .boundary_points
                    .iter()
                    .zip(vs.xi_used.iter().zip(&trace_u))
                    .map(|(bp, (x, s))| bp.weight * x * s)
                    .sum::<f64>(),
                heat_flux_work: dt * sp
                    .boundary_points
                    .iter()
                    .zip(ts.xi1_used.iter().zip(&trace_t))
                    .map(|(bp, (x, s))| bp.weight * x * s)
                    .sum::<f64>(),
                picard_u: vs.iterations,
                picard_theta: ts.iterations,
                slack_u,
                scale_u,
                slack_theta: slack_t,
                scale_theta: scale_t,
                convection_u: conv_u,
                convection_theta: ts.convection.quad(&ts.theta),
                divergence: div,
                xi_growth: growth(&vs.xi, &trace_u),
                xi1_growth: growth(&ts.xi1, &trace_t),
                xi_l2_sq: xi_sq,
                xi1_l2_sq: xi1_sq,
                w14: forms::w14_seminorm(sp, &sp.expand_temperature(&ts.theta)),
            };

            sup_kinetic = sup_kinetic.max(kin_new);
            sup_thermal = sup_thermal.max(th_new);
            sum_viscous += dt * a0u / cfg.alpha;
            sum_conduction += dt * ops.stiffness_theta.quad(&ts.theta);
            summary.regularizer_sum += dt * reg;
            summary.xi_sum += dt * xi_sq;
            summary.xi1_sum += dt * xi1_sq;
            summary.max_divergence = summary.max_divergence.max(div);
            summary.max_picard_u = summary.max_picard_u.max(vs.iterations);
            summary.max_picard_theta = summary.max_picard_theta.max(ts.iterations);
            summary.min_relative_slack = summary
                .min_relative_slack
                .min(slack_u / scale_u)
                .min(slack_t / scale_t);
            if vs.iterations > 10 || ts.iterations > 10 {
                let msg = format!(
                    "step {}: Picard needed {} (velocity) / {} (temperature) iterations; consider a smaller dt",
                    n + 1,
                    vs.iterations,
                    ts.iterations
                );
                log::warn!("{msg}");
                self.warnings.push(msg);
            }
            monitors.push(rec);

            let next = FieldState {
                step: n + 1,
                t: t_next,
                u: vs.u,
                p: vs.p,
                theta: ts.theta,
                xi: vs.xi,
                xi1: ts.xi1,
            };
            if cfg.keep_trajectory {
                trajectory.push(next.clone());
            }
            buffer.push(next);
        }

        if max_trace + m_inv > cfg.law_range {
            self.warnings.push(format!(
                "boundary traces reached {max_trace:.3e}, beyond the certified law range {}",
                cfg.law_range
            ));
        }
        summary.energy_total = sup_kinetic + sum_viscous + sup_thermal + sum_conduction + summary.regularizer_sum;
        Ok(RunOutput {
            final_state: buffer.latest().clone(),
            trajectory,
            monitors,
            constants: self.constants,
            summary,
            warnings: self.warnings,
        })
    }
}

/// Builds operators and runs `cfg` on `spaces`.
pub fn run(cfg: &SimConfig, spaces: &DiscreteSpaces, ops: &SparseOperatorSet) -> Result<RunOutput> {
    Simulation::new(cfg, spaces, ops)?.run()
}

/// Convenience: assemble the fixed operators for `cfg` and run.
pub fn simulate(cfg: &SimConfig, spaces: &DiscreteSpaces) -> Result<RunOutput> {
    let ops = SparseOperatorSet::build(spaces, cfg.alpha, &cfg.buoyancy)?;
    run(cfg, spaces, &ops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(step: usize) -> FieldState {
        FieldState {
            step,
            t: step as f64,
            u: vec![step as f64],
            p: vec![],
            theta: vec![],
            xi: vec![],
            xi1: vec![],
        }
    }

    #[test]
    fn retard_clamps_and_lags() {
        let mut b = HistoryBuffer::new(state(0), 1);
        assert_eq!(retard(&b, 0, 1).unwrap().step, 0);
        for k in 1..=5 {
            b.push(state(k));
        }
        assert_eq!(retard(&b, 5, 1).unwrap().step, 4);
        assert_eq!(retard(&b, 6, 1).unwrap().step, 5);
        assert!(matches!(retard(&b, 5, 3), Err(Error::HistoryEvicted(2))));

        let mut b = HistoryBuffer::new(state(0), 5);
        for k in 1..=3 {
            b.push(state(k));
        }
        assert_eq!(retard(&b, 3, 5).unwrap().step, 0);
    }
}
