//! Assembly of the discrete operators on the free DOFs.
//!
//! Element integrals use the degree-6 triangle rule (exact for the P2
//! convection and mass integrands). Velocity element matrices are built in
//! Cartesian components and rotated into the free (node, direction) basis
//! before scattering, so skew operators come out exactly antisymmetric.

use std::sync::OnceLock;

use crate::element::{p1_ref_gradients, p1_values, p2_ref_gradients, p2_values};
use crate::error::{Error, Result};
use crate::laws::{BoundaryLaw, BuoyancySpec, ConductivitySpec};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::quadrature::TriangleRule;
use crate::spaces::DiscreteSpaces;

struct RefTables {
    rule: TriangleRule,
    p2: Vec<[f64; 6]>,
    p2_grad: Vec<[[f64; 2]; 6]>,
    p1: Vec<[f64; 3]>,
}

fn tables() -> &'static RefTables {
    static T: OnceLock<RefTables> = OnceLock::new();
    T.get_or_init(|| {
        let rule = TriangleRule::degree6();
        RefTables {
            p2: rule.points.iter().map(|&x| p2_values(x)).collect(),
            p2_grad: rule.points.iter().map(|&x| p2_ref_gradients(x)).collect(),
            p1: rule.points.iter().map(|&x| p1_values(x)).collect(),
            rule,
        }
    })
}

/// Geometry of one element at the quadrature points.
pub(crate) struct ElementFrame {
    /// `weight * |det J|` per quadrature point.
    pub jw: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub p2: &'static [[f64; 6]],
    pub p2_grad: Vec<[[f64; 2]; 6]>,
    pub p1: &'static [[f64; 3]],
    pub p1_grad: [[f64; 2]; 3],
}

pub(crate) fn frame(spaces: &DiscreteSpaces, t: usize) -> ElementFrame {
    let tb = tables();
    let map = spaces.element_map(t);
    let det = map.det.abs();
    ElementFrame {
        jw: tb.rule.weights.iter().map(|w| w * det).collect(),
        points: tb.rule.points.iter().map(|&x| map.to_physical(x)).collect(),
        p2: &tb.p2,
        p2_grad: tb
            .p2_grad
            .iter()
            .map(|g| g.map(|gi| map.grad(gi)))
            .collect(),
        p1: &tb.p1,
        p1_grad: p1_ref_gradients().map(|g| map.grad(g)),
    }
}

/// Free velocity DOFs touching element `t`: (free index, local node, direction).
fn velocity_local(spaces: &DiscreteSpaces, t: usize) -> Vec<(usize, usize, [f64; 2])> {
    let nodes = spaces.element_p2[t];
    let mut out = Vec::with_capacity(12);
    for (a, &n) in nodes.iter().enumerate() {
        for &k in &spaces.velocity_node_dofs[n] {
            out.push((k, a, spaces.velocity_free[k].dir));
        }
    }
    out
}

/// Free temperature DOFs touching element `t`: (free index, local vertex).
fn temperature_local(spaces: &DiscreteSpaces, t: usize) -> Vec<(usize, usize)> {
    spaces.mesh.triangles[t]
        .iter()
        .enumerate()
        .filter_map(|(a, &v)| spaces.temperature_index[v].map(|k| (k, a)))
        .collect()
}

/// Rotates a Cartesian 6x6x2x2 element block into free DOFs and scatters it.
fn scatter_velocity(
    b: &mut TripletBuilder,
    dofs: &[(usize, usize, [f64; 2])],
    block: &[[[[f64; 2]; 2]; 6]; 6],
    skew: bool,
) {
    for &(i, a, di) in dofs {
        for &(j, bb, dj) in dofs {
            let m = &block[a][bb];
            let v = di[0] * (m[0][0] * dj[0] + m[0][1] * dj[1]) + di[1] * (m[1][0] * dj[0] + m[1][1] * dj[1]);
            if skew {
                b.push(i, j, 0.5 * v);
                b.push(j, i, -0.5 * v);
            } else {
                b.push(i, j, v);
            }
        }
    }
}

fn scatter_scalar(b: &mut TripletBuilder, dofs: &[(usize, usize)], block: &[[f64; 3]; 3], skew: bool) {
    for &(i, a) in dofs {
        for &(j, bb) in dofs {
            let v = block[a][bb];
            if skew {
                b.push(i, j, 0.5 * v);
                b.push(j, i, -0.5 * v);
            } else {
                b.push(i, j, v);
            }
        }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn velocity_matrix(
    spaces: &DiscreteSpaces,
    skew: bool,
    mut element: impl FnMut(usize, &ElementFrame, &mut [[[[f64; 2]; 2]; 6]; 6]),
) -> SparseMatrix {
    let n = spaces.n_velocity();
    let mut b = TripletBuilder::with_capacity(n, n, spaces.mesh.n_triangles() * 144 * if skew { 2 } else { 1 });
    for t in 0..spaces.mesh.n_triangles() {
        let dofs = velocity_local(spaces, t);
        if dofs.is_empty() {
            continue;
        }
        let f = frame(spaces, t);
        let mut block = [[[[0.0; 2]; 2]; 6]; 6];
        element(t, &f, &mut block);
        scatter_velocity(&mut b, &dofs, &block, skew);
    }
    b.build()
}

fn temperature_matrix(
    spaces: &DiscreteSpaces,
    skew: bool,
    mut element: impl FnMut(usize, &ElementFrame, &mut [[f64; 3]; 3]),
) -> SparseMatrix {
    let n = spaces.n_temperature();
    let mut b = TripletBuilder::with_capacity(n, n, spaces.mesh.n_triangles() * 9 * if skew { 2 } else { 1 });
    for t in 0..spaces.mesh.n_triangles() {
        let dofs = temperature_local(spaces, t);
        if dofs.is_empty() {
            continue;
        }
        let f = frame(spaces, t);
        let mut block = [[0.0; 3]; 3];
        element(t, &f, &mut block);
        scatter_scalar(&mut b, &dofs, &block, skew);
    }
    b.build()
}

/// `2 int eps(u) : eps(v)`, the viscous form with unit viscosity.
pub fn korn_matrix(spaces: &DiscreteSpaces) -> SparseMatrix {
    velocity_matrix(spaces, false, |_, f, blk| {
        for q in 0..f.jw.len() {
            let g = &f.p2_grad[q];
            for a in 0..6 {
                for b in 0..6 {
                    let gg = dot(g[a], g[b]) * f.jw[q];
                    for c in 0..2 {
                        for d in 0..2 {
                            let delta = if c == d { gg } else { 0.0 };
                            blk[a][b][c][d] += delta + g[a][d] * g[b][c] * f.jw[q];
                        }
                    }
                }
            }
        }
    })
}

/// `a0(u, v) = 2 alpha int eps(u) : eps(v)`.
pub fn assemble_a0(spaces: &DiscreteSpaces, alpha: f64) -> Result<SparseMatrix> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("viscosity must be positive, got {alpha}"),
        });
    }
    Ok(korn_matrix(spaces).scaled(alpha))
}

pub fn mass_velocity(spaces: &DiscreteSpaces) -> SparseMatrix {
    velocity_matrix(spaces, false, |_, f, blk| {
        for q in 0..f.jw.len() {
            let phi = &f.p2[q];
            for a in 0..6 {
                for b in 0..6 {
                    let v = phi[a] * phi[b] * f.jw[q];
                    blk[a][b][0][0] += v;
                    blk[a][b][1][1] += v;
                }
            }
        }
    })
}

fn convection_velocity(spaces: &DiscreteSpaces, w: &[[f64; 2]], skew: bool) -> SparseMatrix {
    velocity_matrix(spaces, skew, |t, f, blk| {
        let nodes = spaces.element_p2[t];
        for q in 0..f.jw.len() {
            let phi = &f.p2[q];
            let g = &f.p2_grad[q];
            let mut wq = [0.0; 2];
            for a in 0..6 {
                wq[0] += phi[a] * w[nodes[a]][0];
                wq[1] += phi[a] * w[nodes[a]][1];
            }
            for a in 0..6 {
                for b in 0..6 {
                    let v = phi[a] * dot(wq, g[b]) * f.jw[q];
                    blk[a][b][0][0] += v;
                    blk[a][b][1][1] += v;
                }
            }
        }
    })
}

/// Plain convection: `z^T K v = a1(w, v, z) = int ((w . grad) v) . z`.
pub fn assemble_a1_plain(spaces: &DiscreteSpaces, w: &[[f64; 2]]) -> Result<SparseMatrix> {
    check_len("convection field", spaces.n_p2(), w.len())?;
    Ok(convection_velocity(spaces, w, false))
}

/// Skew convection `(K - K^T) / 2`, exactly antisymmetric.
pub fn assemble_a1_skew(spaces: &DiscreteSpaces, w: &[[f64; 2]]) -> Result<SparseMatrix> {
    check_len("convection field", spaces.n_p2(), w.len())?;
    Ok(convection_velocity(spaces, w, true))
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// `c(v, q) = -int div(v) q`; rows are pressure vertices, columns free velocity DOFs.
pub fn assemble_c(spaces: &DiscreteSpaces) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(spaces.n_pressure(), spaces.n_velocity(), spaces.mesh.n_triangles() * 36);
    for t in 0..spaces.mesh.n_triangles() {
        let dofs = velocity_local(spaces, t);
        let f = frame(spaces, t);
        let tri = spaces.mesh.triangles[t];
        let mut blk = [[[0.0; 2]; 6]; 3];
        for q in 0..f.jw.len() {
            for r in 0..3 {
                for a in 0..6 {
                    for c in 0..2 {
                        blk[r][a][c] -= f.p1[q][r] * f.p2_grad[q][a][c] * f.jw[q];
                    }
                }
            }
        }
        for r in 0..3 {
            for &(j, a, d) in &dofs {
                b.push(tri[r], j, blk[r][a][0] * d[0] + blk[r][a][1] * d[1]);
            }
        }
    }
    b.build()
}

/// `int q` per pressure vertex; pairs with the zero-mean constraint.
pub fn pressure_mean_vector(spaces: &DiscreteSpaces) -> Vec<f64> {
    let mut out = vec![0.0; spaces.n_pressure()];
    for t in 0..spaces.mesh.n_triangles() {
        let area = spaces.mesh.triangle_area(t);
        for &v in &spaces.mesh.triangles[t] {
            out[v] += area / 3.0;
        }
    }
    out
}

/// P1 mass on all vertices (pressure norms and means).
pub fn mass_p1_all(spaces: &DiscreteSpaces) -> SparseMatrix {
    let n = spaces.mesh.n_vertices();
    let mut b = TripletBuilder::with_capacity(n, n, spaces.mesh.n_triangles() * 9);
    for t in 0..spaces.mesh.n_triangles() {
        let area = spaces.mesh.triangle_area(t);
        let tri = spaces.mesh.triangles[t];
        for a in 0..3 {
            for c in 0..3 {
                b.push(tri[a], tri[c], if a == c { area / 6.0 } else { area / 12.0 });
            }
        }
    }
    b.build()
}

/// Buoyancy coupling: `(F theta, v) = beta int theta (e . v)`, rows free
/// velocity DOFs, columns temperature vertices.
pub fn assemble_buoyancy(spaces: &DiscreteSpaces, buoyancy: &BuoyancySpec) -> SparseMatrix {
    let mut b = TripletBuilder::with_capacity(spaces.n_velocity(), spaces.mesh.n_vertices(), spaces.mesh.n_triangles() * 36);
    for t in 0..spaces.mesh.n_triangles() {
        let dofs = velocity_local(spaces, t);
        let f = frame(spaces, t);
        let tri = spaces.mesh.triangles[t];
        let mut blk = [[0.0; 3]; 6];
        for q in 0..f.jw.len() {
            for a in 0..6 {
                for r in 0..3 {
                    blk[a][r] += f.p2[q][a] * f.p1[q][r] * f.jw[q];
                }
            }
        }
        for &(i, a, d) in &dofs {
            let ed = buoyancy.beta * dot(buoyancy.e, d);
            if ed == 0.0 {
                continue;
            }
            for r in 0..3 {
                b.push(i, tri[r], ed * blk[a][r]);
            }
        }
    }
    b.build()
}

/// `int f(x) . v` for every free velocity DOF.
pub fn velocity_load(spaces: &DiscreteSpaces, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; spaces.n_velocity()];
    for t in 0..spaces.mesh.n_triangles() {
        let dofs = velocity_local(spaces, t);
        if dofs.is_empty() {
            continue;
        }
        let fr = frame(spaces, t);
        for q in 0..fr.jw.len() {
            let fq = f(fr.points[q]);
            for &(i, a, d) in &dofs {
                out[i] += fr.p2[q][a] * dot(fq, d) * fr.jw[q];
            }
        }
    }
    out
}

/// `int g(x) zeta` for every free temperature DOF.
pub fn temperature_load(spaces: &DiscreteSpaces, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; spaces.n_temperature()];
    for t in 0..spaces.mesh.n_triangles() {
        let dofs = temperature_local(spaces, t);
        if dofs.is_empty() {
            continue;
        }
        let fr = frame(spaces, t);
        for q in 0..fr.jw.len() {
            let gq = g(fr.points[q]);
            for &(i, a) in &dofs {
                out[i] += fr.p1[q][a] * gq * fr.jw[q];
            }
        }
    }
    out
}

pub fn mass_temperature(spaces: &DiscreteSpaces) -> SparseMatrix {
    temperature_matrix(spaces, false, |_, f, blk| {
        for q in 0..f.jw.len() {
            for a in 0..3 {
                for b in 0..3 {
                    blk[a][b] += f.p1[q][a] * f.p1[q][b] * f.jw[q];
                }
            }
        }
    })
}

pub fn stiffness_temperature(spaces: &DiscreteSpaces) -> SparseMatrix {
    temperature_matrix(spaces, false, |_, f, blk| {
        let area: f64 = f.jw.iter().sum();
        for a in 0..3 {
            for b in 0..3 {
                blk[a][b] += dot(f.p1_grad[a], f.p1_grad[b]) * area;
            }
        }
    })
}

/// `b0(mu, eta, zeta) = int k(mu) grad eta . grad zeta`; `mu` holds vertex values.
pub fn assemble_b0(spaces: &DiscreteSpaces, k: &ConductivitySpec, mu: &[f64]) -> Result<SparseMatrix> {
    check_len("conductivity argument", spaces.mesh.n_vertices(), mu.len())?;
    Ok(temperature_matrix(spaces, false, |t, f, blk| {
        let tri = spaces.mesh.triangles[t];
        let mut kw = 0.0;
        for q in 0..f.jw.len() {
            let mq: f64 = (0..3).map(|r| f.p1[q][r] * mu[tri[r]]).sum();
            kw += k.eval(mq) * f.jw[q];
        }
        for a in 0..3 {
            for b in 0..3 {
                blk[a][b] += kw * dot(f.p1_grad[a], f.p1_grad[b]);
            }
        }
    }))
}

fn convection_temperature(spaces: &DiscreteSpaces, w: &[[f64; 2]], skew: bool) -> SparseMatrix {
    temperature_matrix(spaces, skew, |t, f, blk| {
        let nodes = spaces.element_p2[t];
        for q in 0..f.jw.len() {
            let mut wq = [0.0; 2];
            for a in 0..6 {
                wq[0] += f.p2[q][a] * w[nodes[a]][0];
                wq[1] += f.p2[q][a] * w[nodes[a]][1];
            }
            for a in 0..3 {
                for b in 0..3 {
                    blk[a][b] += f.p1[q][a] * dot(wq, f.p1_grad[b]) * f.jw[q];
                }
            }
        }
    })
}

/// Plain `b1(w, eta, zeta) = int (w . grad eta) zeta`, as `zeta^T K eta`.
pub fn assemble_b1_plain(spaces: &DiscreteSpaces, w: &[[f64; 2]]) -> Result<SparseMatrix> {
    check_len("convection field", spaces.n_p2(), w.len())?;
    Ok(convection_temperature(spaces, w, false))
}

pub fn assemble_b1_skew(spaces: &DiscreteSpaces, w: &[[f64; 2]]) -> Result<SparseMatrix> {
    check_len("convection field", spaces.n_p2(), w.len())?;
    Ok(convection_temperature(spaces, w, true))
}

/// Lagged p-Laplacian: `int |grad theta_lag|^2 grad phi_i . grad phi_j`.
pub fn assemble_g(spaces: &DiscreteSpaces, theta_lag: &[f64]) -> Result<SparseMatrix> {
    check_len("regularizer argument", spaces.mesh.n_vertices(), theta_lag.len())?;
    Ok(temperature_matrix(spaces, false, |t, f, blk| {
        let tri = spaces.mesh.triangles[t];
        let mut g = [0.0; 2];
        for r in 0..3 {
            g[0] += theta_lag[tri[r]] * f.p1_grad[r][0];
            g[1] += theta_lag[tri[r]] * f.p1_grad[r][1];
        }
        let area: f64 = f.jw.iter().sum();
        let coeff = dot(g, g) * area;
        for a in 0..3 {
            for b in 0..3 {
                blk[a][b] += coeff * dot(f.p1_grad[a], f.p1_grad[b]);
            }
        }
    }))
}

/// `int_{Gamma_1} (phi_i . tau)(phi_j . tau)` on free velocity DOFs.
pub fn boundary_gram_velocity(spaces: &DiscreteSpaces) -> SparseMatrix {
    let n = spaces.n_velocity();
    let mut b = TripletBuilder::new(n, n);
    for bp in &spaces.boundary_points {
        let local = velocity_trace_basis(spaces, bp);
        for &(i, vi) in &local {
            for &(j, vj) in &local {
                b.push(i, j, bp.weight * vi * vj);
            }
        }
    }
    b.build()
}

/// `int_{Gamma_1} phi_i phi_j` on free temperature DOFs.
pub fn boundary_gram_temperature(spaces: &DiscreteSpaces) -> SparseMatrix {
    let n = spaces.n_temperature();
    let mut b = TripletBuilder::new(n, n);
    for bp in &spaces.boundary_points {
        let local = temperature_trace_basis(spaces, bp);
        for &(i, vi) in &local {
            for &(j, vj) in &local {
                b.push(i, j, bp.weight * vi * vj);
            }
        }
    }
    b.build()
}

/// Tangential traces `phi_k . tau` of the free DOFs living on the edge of `bp`.
fn velocity_trace_basis(spaces: &DiscreteSpaces, bp: &crate::spaces::BoundaryPoint) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(3);
    for a in 0..3 {
        for &k in &spaces.velocity_node_dofs[bp.p2_nodes[a]] {
            out.push((k, bp.p2_values[a] * dot(spaces.velocity_free[k].dir, bp.tangent)));
        }
    }
    out
}

fn temperature_trace_basis(spaces: &DiscreteSpaces, bp: &crate::spaces::BoundaryPoint) -> Vec<(usize, f64)> {
    (0..2)
        .filter_map(|a| spaces.temperature_index[bp.p1_nodes[a]].map(|k| (k, bp.p1_values[a])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Velocity,
    Temperature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryResidual {
    /// `int_{Gamma_1} Dj_m(s) v` per free DOF.
    pub residual: Vec<f64>,
    /// `Dj_m(s)` at each Gamma_1 quadrature point.
    pub multiplier: Vec<f64>,
}

/// Boundary term of the mollified law for the given trace values (one per
/// Gamma_1 quadrature point).
pub fn boundary_nonsmooth_residual(
    spaces: &DiscreteSpaces,
    law: &BoundaryLaw,
    trace: &[f64],
    which: TraceKind,
) -> Result<BoundaryResidual> {
    check_len("boundary trace", spaces.boundary_points.len(), trace.len())?;
    let n = match which {
        TraceKind::Velocity => spaces.n_velocity(),
        TraceKind::Temperature => spaces.n_temperature(),
    };
    let mut residual = vec![0.0; n];
    let mut multiplier = Vec::with_capacity(trace.len());
    for (bp, &s) in spaces.boundary_points.iter().zip(trace) {
        let xi = law.derivative(s)?;
        multiplier.push(xi);
        if xi == 0.0 {
            continue;
        }
        let basis = match which {
            TraceKind::Velocity => velocity_trace_basis(spaces, bp),
            TraceKind::Temperature => temperature_trace_basis(spaces, bp),
        };
        for (k, v) in basis {
            residual[k] += bp.weight * xi * v;
        }
    }
    Ok(BoundaryResidual { residual, multiplier })
}

/// L2 norm of `u_h - exact` with `u_h` given by nodal Cartesian velocity values.
pub fn velocity_l2_error(
    spaces: &DiscreteSpaces,
    nodal: &[[f64; 2]],
    exact: impl Fn([f64; 2]) -> [f64; 2],
) -> f64 {
    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let f = frame(spaces, t);
        let nodes = spaces.element_p2[t];
        for q in 0..f.jw.len() {
            let mut u = [0.0; 2];
            for a in 0..6 {
                u[0] += f.p2[q][a] * nodal[nodes[a]][0];
                u[1] += f.p2[q][a] * nodal[nodes[a]][1];
            }
            let e = exact(f.points[q]);
            acc += ((u[0] - e[0]).powi(2) + (u[1] - e[1]).powi(2)) * f.jw[q];
        }
    }
    acc.sqrt()
}

/// L2 norm of `theta_h - exact` with `theta_h` given by vertex values.
pub fn scalar_l2_error(spaces: &DiscreteSpaces, nodal: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let f = frame(spaces, t);
        let tri = spaces.mesh.triangles[t];
        for q in 0..f.jw.len() {
            let v: f64 = (0..3).map(|r| f.p1[q][r] * nodal[tri[r]]).sum();
            acc += (v - exact(f.points[q])).powi(2) * f.jw[q];
        }
    }
    acc.sqrt()
}

/// Discrete `W^{1,4}` seminorm `(int |grad theta|^4)^{1/4}` of a P1 field.
pub fn w14_seminorm(spaces: &DiscreteSpaces, nodal: &[f64]) -> f64 {
    let mut acc = 0.0;
    for t in 0..spaces.mesh.n_triangles() {
        let tri = spaces.mesh.triangles[t];
        let map = spaces.element_map(t);
        let mut g = [0.0; 2];
        for (r, rg) in p1_ref_gradients().iter().enumerate() {
            let pg = map.grad(*rg);
            g[0] += nodal[tri[r]] * pg[0];
            g[1] += nodal[tri[r]] * pg[1];
        }
        acc += dot(g, g).powi(2) * spaces.mesh.triangle_area(t);
    }
    acc.powf(0.25)
}

/// Everything the time stepper needs that does not change between steps.
#[derive(Debug, Clone)]
pub struct SparseOperatorSet {
    pub a0: SparseMatrix,
    pub korn: SparseMatrix,
    pub c: SparseMatrix,
    pub mass_u: SparseMatrix,
    pub mass_theta: SparseMatrix,
    pub stiffness_theta: SparseMatrix,
    pub buoyancy: SparseMatrix,
    pub pressure_mean: Vec<f64>,
    pub mass_p: SparseMatrix,
}

impl SparseOperatorSet {
    pub fn build(spaces: &DiscreteSpaces, alpha: f64, buoyancy: &BuoyancySpec) -> Result<Self> {
        let korn = korn_matrix(spaces);
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("viscosity must be positive, got {alpha}"),
            });
        }
        Ok(SparseOperatorSet {
            a0: korn.scaled(alpha),
            korn,
            c: assemble_c(spaces),
            mass_u: mass_velocity(spaces),
            mass_theta: mass_temperature(spaces),
            stiffness_theta: stiffness_temperature(spaces),
            buoyancy: assemble_buoyancy(spaces, buoyancy),
            pressure_mean: pressure_mean_vector(spaces),
            mass_p: mass_p1_all(spaces),
        })
    }
}
