//! Executable checks: discrete skew identities, the per-step energy
//! inequality, refinement studies and manufactured-solution errors.

use std::fmt;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{self, frame, SparseOperatorSet};
use crate::integrator::{run, FieldState, RunOutput, SimConfig};
use crate::scenario::{exact, Scenario};
use crate::spaces::DiscreteSpaces;

pub use crate::integrator::MonitorRecord;

pub const IDENTITY_TOL: f64 = 1e-11;
pub const SLACK_TOL: f64 = 1e-9;
pub const STUDY_RATIO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub trials: usize,
    /// `max |a~1(w,v,z) + a~1(w,z,v)|`, relative.
    pub a1_antisymmetry: f64,
    /// `max |a~1(w,z,z)|`, relative.
    pub a1_diagonal: f64,
    /// `max |b~1(w,zeta,zeta)|`, relative.
    pub b1_diagonal: f64,
    /// Negative control: `max |a1(w,z,z)|` of the plain form, relative.
    pub plain_a1_diagonal: f64,
    pub plain_b1_diagonal: f64,
    pub pass: bool,
}

fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn relative(value: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        value.abs()
    } else {
        value.abs() / scale
    }
}

/// Checks the skew identities on `trials` random coefficient vectors.
/// Values are relative to `sum |N_ij z_i v_j|`.
pub fn identity_tests(spaces: &DiscreteSpaces, trials: usize, seed: u64) -> Result<IdentityReport> {
    let mut rng = StdRng::seed_from_u64(seed);
    let (nu, nt) = (spaces.n_velocity(), spaces.n_temperature());
    let mut rep = IdentityReport {
        trials,
        a1_antisymmetry: 0.0,
        a1_diagonal: 0.0,
        b1_diagonal: 0.0,
        plain_a1_diagonal: 0.0,
        plain_b1_diagonal: 0.0,
        pass: false,
    };
    for _ in 0..trials {
        let w = spaces.expand_velocity(&random_vec(&mut rng, nu));
        let v = random_vec(&mut rng, nu);
        let z = random_vec(&mut rng, nu);
        let zeta = random_vec(&mut rng, nt);

        let n = forms::assemble_a1_skew(spaces, &w)?;
        let sum = n.bilinear(&z, &v) + n.bilinear(&v, &z);
        rep.a1_antisymmetry = rep.a1_antisymmetry.max(relative(sum, n.abs_bilinear(&z, &v)));
        rep.a1_diagonal = rep.a1_diagonal.max(relative(n.quad(&z), n.abs_bilinear(&z, &z)));

        let b = forms::assemble_b1_skew(spaces, &w)?;
        rep.b1_diagonal = rep.b1_diagonal.max(relative(b.quad(&zeta), b.abs_bilinear(&zeta, &zeta)));

        let plain = forms::assemble_a1_plain(spaces, &w)?;
        rep.plain_a1_diagonal = rep.plain_a1_diagonal.max(relative(plain.quad(&z), plain.abs_bilinear(&z, &z)));
        let plain_b = forms::assemble_b1_plain(spaces, &w)?;
        rep.plain_b1_diagonal = rep
            .plain_b1_diagonal
            .max(relative(plain_b.quad(&zeta), plain_b.abs_bilinear(&zeta, &zeta)));
    }
    rep.pass = rep.a1_antisymmetry <= IDENTITY_TOL && rep.a1_diagonal <= IDENTITY_TOL && rep.b1_diagonal <= IDENTITY_TOL;
    Ok(rep)
}

/// `|a1(w, v, z) - a~1(w, v, z)|` for interpolants of smooth fields; shrinks
/// with the mesh when `w` is divergence free.
pub fn plain_skew_discrepancy(
    spaces: &DiscreteSpaces,
    w: impl Fn([f64; 2]) -> [f64; 2],
    v: impl Fn([f64; 2]) -> [f64; 2],
    z: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<f64> {
    let wn: Vec<[f64; 2]> = spaces.p2_nodes.iter().map(|&x| w(x)).collect();
    let vv = spaces.interpolate_velocity(v);
    let zz = spaces.interpolate_velocity(z);
    let plain = forms::assemble_a1_plain(spaces, &wn)?.bilinear(&zz, &vv);
    let skew = forms::assemble_a1_skew(spaces, &wn)?.bilinear(&zz, &vv);
    Ok((plain - skew).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// The inequality failed while H0 holds.
    Bug,
    /// The inequality failed on a run that violates H0.
    H0Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Bug => "bug",
            Verdict::H0Violated => "H0 violated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub verdict: Verdict,
    pub steps: usize,
    /// Step with the smallest relative slack (0 when there are no steps).
    pub worst_step: usize,
    pub worst_relative_slack: f64,
    pub energy_total: f64,
    pub max_convection_relative: f64,
    pub max_divergence: f64,
    pub h0_pass: bool,
}

/// Checks the per-step energy inequality recorded in the monitors.
pub fn energy_report(output: &RunOutput) -> EnergyReport {
    let mut worst = (0usize, f64::INFINITY);
    let mut conv: f64 = 0.0;
    let mut div: f64 = 0.0;
    for r in &output.monitors {
        for rel in [r.slack_u / r.scale_u, r.slack_theta / r.scale_theta] {
            if rel < worst.1 {
                worst = (r.step, rel);
            }
        }
        let ku = r.kinetic.max(f64::MIN_POSITIVE);
        conv = conv.max((r.convection_u / (2.0 * ku)).abs());
        div = div.max(r.divergence);
    }
    if output.monitors.is_empty() {
        worst.1 = 0.0;
    }
    let h0_pass = output.constants.h0.passes();
    let verdict = if worst.1 >= -SLACK_TOL {
        Verdict::Pass
    } else if h0_pass {
        Verdict::Bug
    } else {
        Verdict::H0Violated
    };
    EnergyReport {
        verdict,
        steps: output.monitors.len(),
        worst_step: worst.0,
        worst_relative_slack: worst.1,
        energy_total: output.summary.energy_total,
        max_convection_relative: conv,
        max_divergence: div,
        h0_pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knob {
    TimeStep,
    Mollification,
    Mesh,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Knob::TimeStep => "dt",
            Knob::Mollification => "m",
            Knob::Mesh => "mesh",
        }
    }

    pub fn parse(s: &str) -> Option<Knob> {
        match s {
            "dt" | "h" | "time" => Some(Knob::TimeStep),
            "m" | "mollification" => Some(Knob::Mollification),
            "mesh" | "space" => Some(Knob::Mesh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub nx: usize,
    pub dt: f64,
    pub m: u32,
    pub steps: usize,
    pub energy_total: f64,
    pub regularizer_sum: f64,
    pub xi_sum: f64,
    pub xi1_sum: f64,
    pub min_relative_slack: f64,
    pub max_picard: usize,
    pub max_divergence: f64,
    pub max_xi_growth: f64,
    pub max_xi1_growth: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub knob: Knob,
    pub levels: Vec<LevelSummary>,
    /// Difference norms between consecutive levels.
    pub diff_u: Vec<f64>,
    pub diff_theta: Vec<f64>,
    pub pass: bool,
}

impl StudyResult {
    pub fn ratios(d: &[f64]) -> Vec<f64> {
        d.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn orders(d: &[f64]) -> Vec<f64> {
        d.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
    }

    /// Monotone decrease with last ratio at most 0.75.
    pub fn cauchy_pass(d: &[f64]) -> bool {
        let r = Self::ratios(d);
        !r.is_empty() && r.iter().all(|&x| x < 1.0) && r.last().map_or(false, |&x| x <= STUDY_RATIO)
    }
}

/// Output of one study level.
pub struct LevelRun {
    pub spaces: DiscreteSpaces,
    pub ops: SparseOperatorSet,
    pub output: RunOutput,
    pub summary: LevelSummary,
}

pub fn level_scenario(base: &Scenario, knob: Knob, level: usize) -> Scenario {
    let mut s = base.clone();
    let f = 1usize << level;
    match knob {
        Knob::TimeStep => s.config.dt = base.config.dt / f as f64,
        Knob::Mollification => s.config.mollification_m = base.config.mollification_m * f as u32,
        Knob::Mesh => s.mesh = base.mesh.refined(f),
    }
    s
}

pub fn run_level(s: &Scenario, level: usize, keep_trajectory: bool) -> Result<LevelRun> {
    let start = Instant::now();
    let spaces = s.mesh.spaces()?;
    let mut cfg: SimConfig = s.config.clone();
    cfg.keep_trajectory = keep_trajectory;
    let ops = SparseOperatorSet::build(&spaces, cfg.alpha, &cfg.buoyancy)?;
    let output = run(&cfg, &spaces, &ops)?;
    let sm = &output.summary;
    let summary = LevelSummary {
        level,
        nx: s.mesh.nx,
        dt: cfg.dt,
        m: cfg.mollification_m,
        steps: output.monitors.len(),
        energy_total: sm.energy_total,
        regularizer_sum: sm.regularizer_sum,
        xi_sum: sm.xi_sum,
        xi1_sum: sm.xi1_sum,
        min_relative_slack: sm.min_relative_slack,
        max_picard: sm.max_picard_u.max(sm.max_picard_theta),
        max_divergence: sm.max_divergence,
        max_xi_growth: output.monitors.iter().map(|r| r.xi_growth).fold(0.0, f64::max),
        max_xi1_growth: output.monitors.iter().map(|r| r.xi1_growth).fold(0.0, f64::max),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(LevelRun {
        spaces,
        ops,
        output,
        summary,
    })
}

/// Runs `levels` nested refinements of `knob` and compares consecutive
/// trajectories in the discrete `L2(0,T;L2)` norms on the coarser time grid.
pub fn convergence_study(base: &Scenario, knob: Knob, levels: usize) -> Result<(StudyResult, Vec<LevelRun>)> {
    if levels < 3 {
        return Err(Error::Study(format!("a study needs at least 3 levels, got {levels}")));
    }
    if knob == Knob::Mesh && (base.mesh.nx % 2 != 0 || base.mesh.ny % 2 != 0) {
        return Err(Error::Study("mesh studies need even cell counts for nested refinement".into()));
    }
    let runs: Vec<Result<LevelRun>> = (0..levels)
        .into_par_iter()
        .map(|l| run_level(&level_scenario(base, knob, l), l, true))
        .collect();
    let runs: Vec<LevelRun> = runs
        .into_iter()
        .enumerate()
        .map(|(l, r)| r.map_err(|e| Error::Study(format!("level {l}: {e}"))))
        .collect::<Result<_>>()?;

    let mut diff_u = Vec::with_capacity(levels - 1);
    let mut diff_theta = Vec::with_capacity(levels - 1);
    for pair in runs.windows(2) {
        let (du, dt) = trajectory_difference(&pair[0], &pair[1], knob);
        diff_u.push(du);
        diff_theta.push(dt);
    }
    let pass = StudyResult::cauchy_pass(&diff_u) && StudyResult::cauchy_pass(&diff_theta);
    let result = StudyResult {
        knob,
        levels: runs.iter().map(|r| r.summary.clone()).collect(),
        diff_u,
        diff_theta,
        pass,
    };
    Ok((result, runs))
}

fn trajectory_difference(coarse: &LevelRun, fine: &LevelRun, knob: Knob) -> (f64, f64) {
    let tc = &coarse.output.trajectory;
    let tf = &fine.output.trajectory;
    let dt = coarse.summary.dt;
    let stride = match knob {
        Knob::TimeStep => 2,
        _ => 1,
    };
    let mut su = 0.0;
    let mut st = 0.0;
    for i in 1..tc.len() {
        let (a, b) = (&tc[i], &tf[i * stride]);
        let (du, dth) = match knob {
            Knob::Mesh => cross_mesh_difference(&coarse.spaces, a, &fine.spaces, b),
            _ => same_mesh_difference(&coarse.ops, a, b),
        };
        su += dt * du;
        st += dt * dth;
    }
    (su.sqrt(), st.sqrt())
}

fn same_mesh_difference(ops: &SparseOperatorSet, a: &FieldState, b: &FieldState) -> (f64, f64) {
    let du: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
    let dt: Vec<f64> = a.theta.iter().zip(&b.theta).map(|(x, y)| x - y).collect();
    (ops.mass_u.quad(&du), ops.mass_theta.quad(&dt))
}

/// Squared L2 differences of velocity and temperature between a coarse and
/// a nested fine mesh, integrated on the fine mesh.
fn cross_mesh_difference(
    cs: &DiscreteSpaces,
    a: &FieldState,
    fs: &DiscreteSpaces,
    b: &FieldState,
) -> (f64, f64) {
    let cu = cs.expand_velocity(&a.u);
    let ct = cs.expand_temperature(&a.theta);
    let fu = fs.expand_velocity(&b.u);
    let ft = fs.expand_temperature(&b.theta);
    let mut su = 0.0;
    let mut st = 0.0;
    for t in 0..fs.mesh.n_triangles() {
        let f = frame(fs, t);
        let nodes = fs.element_p2[t];
        let tri = fs.mesh.triangles[t];
        for q in 0..f.jw.len() {
            let mut u = [0.0; 2];
            for k in 0..6 {
                u[0] += f.p2[q][k] * fu[nodes[k]][0];
                u[1] += f.p2[q][k] * fu[nodes[k]][1];
            }
            let th: f64 = (0..3).map(|r| f.p1[q][r] * ft[tri[r]]).sum();
            let x = f.points[q];
            let uc = cs.eval_velocity(&cu, x).unwrap_or([0.0, 0.0]);
            let tc = cs.eval_p1(&ct, x).unwrap_or(0.0);
            su += ((u[0] - uc[0]).powi(2) + (u[1] - uc[1]).powi(2)) * f.jw[q];
            st += (th - tc).powi(2) * f.jw[q];
        }
    }
    (su, st)
}

#[derive(Debug, Clone)]
pub struct ManufacturedRow {
    pub nx: usize,
    pub dt: f64,
    pub err_u: f64,
    pub err_theta: f64,
    pub err_p: f64,
    pub seconds: f64,
    pub final_state: FieldState,
}

#[derive(Debug, Clone)]
pub struct ManufacturedTable {
    pub rows: Vec<ManufacturedRow>,
}

impl ManufacturedTable {
    pub fn ratios_u(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].err_u / w[1].err_u).collect()
    }

    pub fn ratios_theta(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].err_theta / w[1].err_theta).collect()
    }

    pub fn orders_u(&self) -> Vec<f64> {
        self.ratios_u().iter().map(|r| r.log2()).collect()
    }

    pub fn orders_theta(&self) -> Vec<f64> {
        self.ratios_theta().iter().map(|r| r.log2()).collect()
    }
}

fn check_manufactured(s: &Scenario) -> Result<()> {
    if !s.mesh.tags.contact_sides().is_empty() {
        return Err(Error::Study("manufactured solutions need Gamma_1 empty".into()));
    }
    if !(s.config.friction.is_zero() && s.config.heat_flux.is_zero()) {
        return Err(Error::Study("manufactured solutions need zero boundary laws".into()));
    }
    Ok(())
}

/// Errors of the final state against the exact solution.
pub fn final_errors(spaces: &DiscreteSpaces, state: &FieldState) -> (f64, f64, f64) {
    let t = state.t;
    let eu = forms::velocity_l2_error(spaces, &spaces.expand_velocity(&state.u), |x| exact::velocity(x, t));
    let et = forms::scalar_l2_error(spaces, &spaces.expand_temperature(&state.theta), |x| exact::temperature(x, t));
    let ep = forms::scalar_l2_error(spaces, &state.p, |x| exact::pressure(x, t));
    (eu, et, ep)
}

/// Runs the manufactured scenario at each `(cells, dt)` level and reports the
/// final-time L2 errors.
pub fn manufactured_solution_error(base: &Scenario, levels: &[(usize, f64)]) -> Result<ManufacturedTable> {
    check_manufactured(base)?;
    let rows: Vec<Result<ManufacturedRow>> = levels
        .par_iter()
        .map(|&(n, dt)| {
            let start = Instant::now();
            let mut s = base.clone();
            s.mesh.nx = n;
            s.mesh.ny = n;
            s.config.dt = dt;
            s.config.keep_trajectory = false;
            let spaces = s.mesh.spaces()?;
            let out = crate::integrator::simulate(&s.config, &spaces)?;
            let (err_u, err_theta, err_p) = final_errors(&spaces, &out.final_state);
            Ok(ManufacturedRow {
                nx: n,
                dt,
                err_u,
                err_theta,
                err_p,
                seconds: start.elapsed().as_secs_f64(),
                final_state: out.final_state,
            })
        })
        .collect();
    Ok(ManufacturedTable {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalRow {
    pub dt: f64,
    /// Final-time distance to the reference run on the same mesh.
    pub diff_u: f64,
    pub diff_theta: f64,
    /// Final-time errors against the exact solution.
    pub err_u: f64,
    pub err_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalTable {
    pub nx: usize,
    pub reference_dt: f64,
    pub rows: Vec<TemporalRow>,
}

impl TemporalTable {
    pub fn ratios_u(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].diff_u / w[1].diff_u).collect()
    }

    pub fn ratios_theta(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].diff_theta / w[1].diff_theta).collect()
    }
}

/// Time-step refinement on one mesh. Differences are taken against a
/// reference run with a much smaller step on the same mesh, which removes
/// the spatial error from the comparison.
pub fn manufactured_temporal_error(
    base: &Scenario,
    nx: usize,
    dts: &[f64],
    reference: &ManufacturedRow,
) -> Result<TemporalTable> {
    check_manufactured(base)?;
    if reference.nx != nx {
        return Err(Error::Study(format!("reference run is on a {}-cell mesh, not {nx}", reference.nx)));
    }
    let mut s = base.clone();
    s.mesh.nx = nx;
    s.mesh.ny = nx;
    let spaces = s.mesh.spaces()?;
    let ops = SparseOperatorSet::build(&spaces, s.config.alpha, &s.config.buoyancy)?;
    let rows: Vec<Result<TemporalRow>> = dts
        .par_iter()
        .map(|&dt| {
            let mut cfg = s.config.clone();
            cfg.dt = dt;
            cfg.keep_trajectory = false;
            let out = run(&cfg, &spaces, &ops)?;
            let (du, dth) = same_mesh_difference(&ops, &out.final_state, &reference.final_state);
            let (err_u, err_theta, _) = final_errors(&spaces, &out.final_state);
            Ok(TemporalRow {
                dt,
                diff_u: du.max(0.0).sqrt(),
                diff_theta: dth.max(0.0).sqrt(),
                err_u,
                err_theta,
            })
        })
        .collect();
    Ok(TemporalTable {
        nx,
        reference_dt: reference.dt,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// Errors of the initial state (projected velocity, interpolated temperature).
pub fn manufactured_initial_error(base: &Scenario) -> Result<(f64, f64)> {
    check_manufactured(base)?;
    let spaces = base.mesh.spaces()?;
    let ops = SparseOperatorSet::build(&spaces, base.config.alpha, &base.config.buoyancy)?;
    let sim = crate::integrator::Simulation::new(&base.config, &spaces, &ops)?;
    let s0 = sim.initial_state()?;
    let (eu, et, _) = final_errors(&spaces, &s0);
    Ok((eu, et))
}
