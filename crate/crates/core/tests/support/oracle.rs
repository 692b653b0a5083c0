//! Independent evaluation of the assembled operators: hand-written P2/P1
//! bases on the physical triangle and a collapsed Gauss-Legendre rule applied
//! on the four children of every element. Every check returns the relative
//! deviation of the assembled operator from the oracle.

use boussinesq_core::forms::{self, TraceKind};
use boussinesq_core::laws::{catalog, mollify, BoundaryLaw, ConductivityLaw, ConductivitySpec};
use boussinesq_core::linalg::SparseMatrix;
use boussinesq_core::mesh::{build_rect_mesh, Rect, Side, SideTags};
use boussinesq_core::spaces::{build_spaces, DiscreteSpaces};
use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;


/// Quadrature on a triangle: Duffy collapse of an `n x n` Gauss rule, applied
/// to the four midpoint children.
fn triangle_rule(v: [[f64; 2]; 3], n: usize) -> Vec<([f64; 2], f64)> {
    let gl = GaussLegendre::new(std::num::NonZeroUsize::new(n).unwrap());
    let pts: Vec<(f64, f64)> = gl.nodes().zip(gl.weights()).map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0)).collect();
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let (m01, m12, m20) = (mid(v[0], v[1]), mid(v[1], v[2]), mid(v[2], v[0]));
    let children = [[v[0], m01, m20], [m01, v[1], m12], [m20, m12, v[2]], [m12, m20, m01]];
    let mut out = Vec::new();
    for c in children {
        let area = ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1])).abs() / 2.0;
        for &(xi, wi) in &pts {
            for &(eta, wj) in &pts {
                // (xi, eta) in the square -> (r, s) = (xi, eta (1 - xi)) in the triangle
                let (r, s) = (xi, eta * (1.0 - xi));
                let w = wi * wj * (1.0 - xi) * 2.0 * area;
                let x = [
                    c[0][0] + r * (c[1][0] - c[0][0]) + s * (c[2][0] - c[0][0]),
                    c[0][1] + r * (c[1][1] - c[0][1]) + s * (c[2][1] - c[0][1]),
                ];
                out.push((x, w));
            }
        }
    }
    out
}

struct Tri {
    v: [[f64; 2]; 3],
    grad: [[f64; 2]; 3],
}

impl Tri {
    fn new(v: [[f64; 2]; 3]) -> Tri {
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let mut grad = [[0.0; 2]; 3];
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            grad[a] = [(v[b][1] - v[c][1]) / det, (v[c][0] - v[b][0]) / det];
        }
        Tri { v, grad }
    }

    fn lambda(&self, x: [f64; 2]) -> [f64; 3] {
        let mut l = [0.0; 3];
        for a in 0..3 {
            l[a] = 1.0 / 3.0 + self.grad[a][0] * (x[0] - (self.v[0][0] + self.v[1][0] + self.v[2][0]) / 3.0)
                + self.grad[a][1] * (x[1] - (self.v[0][1] + self.v[1][1] + self.v[2][1]) / 3.0);
        }
        l
    }

    /// P2 values and gradients: vertices, then midpoints of 01, 12, 20.
    fn p2(&self, x: [f64; 2]) -> ([f64; 6], [[f64; 2]; 6]) {
        let l = self.lambda(x);
        let g = self.grad;
        let mut val = [0.0; 6];
        let mut grd = [[0.0; 2]; 6];
        for a in 0..3 {
            val[a] = l[a] * (2.0 * l[a] - 1.0);
            for d in 0..2 {
                grd[a][d] = (4.0 * l[a] - 1.0) * g[a][d];
            }
        }
        for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
            val[3 + k] = 4.0 * l[a] * l[b];
            for d in 0..2 {
                grd[3 + k][d] = 4.0 * (l[a] * g[b][d] + l[b] * g[a][d]);
            }
        }
        (val, grd)
    }
}

pub fn spaces(n: usize, contact: &[Side]) -> DiscreteSpaces {
    let tags = if contact.is_empty() { SideTags::all_dirichlet() } else { SideTags::with_contact(contact) };
    build_spaces(&build_rect_mesh(Rect::unit(), n, n, tags).unwrap()).unwrap()
}

fn tri_of(sp: &DiscreteSpaces, t: usize) -> Tri {
    Tri::new(sp.mesh.triangles[t].map(|v| sp.mesh.vertices[v]))
}

/// Free velocity DOFs of element `t`: (global index, local node, direction).
fn vdofs(sp: &DiscreteSpaces, t: usize) -> Vec<(usize, usize, [f64; 2])> {
    let mut out = Vec::new();
    for (a, &node) in sp.element_p2[t].iter().enumerate() {
        for &k in &sp.velocity_node_dofs[node] {
            out.push((k, a, sp.velocity_free[k].dir));
        }
    }
    out
}

fn tdofs(sp: &DiscreteSpaces, t: usize) -> Vec<(usize, usize)> {
    sp.mesh.triangles[t]
        .iter()
        .enumerate()
        .filter_map(|(a, &v)| sp.temperature_index[v].map(|k| (k, a)))
        .collect()
}

fn deviation(name: &str, assembled: &SparseMatrix, oracle: &[Vec<f64>]) -> f64 {
    let dense = assembled.to_dense();
    let scale = oracle.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0, "{name}: empty oracle");
    let mut err: f64 = 0.0;
    for (i, row) in oracle.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            err = err.max((dense[(i, j)] - v).abs());
        }
    }
    err / scale
}

fn sym_grad(g: [f64; 2], d: [f64; 2]) -> [[f64; 2]; 2] {
    // eps(phi d) for scalar gradient g
    let mut e = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            e[i][j] = 0.5 * (d[i] * g[j] + d[j] * g[i]);
        }
    }
    e
}

pub fn viscous_form() -> f64 {
    let mut worst: f64 = 0.0;
    for contact in [&[][..], &[Side::Bottom, Side::Right][..]] {
        let sp = spaces(4, contact);
        let alpha = 1.7;
        let n = sp.n_velocity();
        let mut o = vec![vec![0.0; n]; n];
        for t in 0..sp.mesh.n_triangles() {
            let tri = tri_of(&sp, t);
            let dofs = vdofs(&sp, t);
            for (x, w) in triangle_rule(tri.v, 5) {
                let (_, g) = tri.p2(x);
                for &(i, a, di) in &dofs {
                    let ei = sym_grad(g[a], di);
                    for &(j, b, dj) in &dofs {
                        let ej = sym_grad(g[b], dj);
                        let mut s = 0.0;
                        for r in 0..2 {
                            for c in 0..2 {
                                s += ei[r][c] * ej[r][c];
                            }
                        }
                        o[i][j] += 2.0 * alpha * s * w;
                    }
                }
            }
        }
        worst = worst.max(deviation("A0", &forms::assemble_a0(&sp, alpha).unwrap(), &o));
    }
    worst
}

pub fn divergence_form() -> f64 {
    let sp = spaces(4, &[Side::Top]);
    let (np, n) = (sp.n_pressure(), sp.n_velocity());
    let mut o = vec![vec![0.0; n]; np];
    for t in 0..sp.mesh.n_triangles() {
        let tri = tri_of(&sp, t);
        let verts = sp.mesh.triangles[t];
        for (x, w) in triangle_rule(tri.v, 5) {
            let (_, g) = tri.p2(x);
            let l = tri.lambda(x);
            for &(j, b, dj) in &vdofs(&sp, t) {
                let div = g[b][0] * dj[0] + g[b][1] * dj[1];
                for r in 0..3 {
                    o[verts[r]][j] -= div * l[r] * w;
                }
            }
        }
    }
    deviation("C", &forms::assemble_c(&sp), &o)
}

pub fn conductivity_form() -> f64 {
    let sp = spaces(4, &[Side::Bottom]);
    // cubic conductivity, far from its clipping bounds on the sampled range
    let k = ConductivitySpec {
        law: ConductivityLaw::ClippedPoly {
            coeffs: vec![2.0, 0.3, -0.2, 0.05],
            lower: 0.5,
            upper: 10.0,
        },
        delta: 0.5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mu: Vec<f64> = (0..sp.mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = sp.n_temperature();
    let mut o = vec![vec![0.0; n]; n];
    for t in 0..sp.mesh.n_triangles() {
        let tri = tri_of(&sp, t);
        let verts = sp.mesh.triangles[t];
        for (x, w) in triangle_rule(tri.v, 5) {
            let l = tri.lambda(x);
            let m: f64 = (0..3).map(|a| l[a] * mu[verts[a]]).sum();
            let kv = 2.0 + 0.3 * m - 0.2 * m * m + 0.05 * m * m * m;
            for &(i, a) in &tdofs(&sp, t) {
                for &(j, b) in &tdofs(&sp, t) {
                    let gg = tri.grad[a][0] * tri.grad[b][0] + tri.grad[a][1] * tri.grad[b][1];
                    o[i][j] += kv * gg * w;
                }
            }
        }
    }
    deviation("B0", &forms::assemble_b0(&sp, &k, &mu).unwrap(), &o)
}

pub fn p_laplacian_form() -> f64 {
    let sp = spaces(4, &[Side::Left]);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let lag: Vec<f64> = (0..sp.mesh.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = sp.n_temperature();
    let mut o = vec![vec![0.0; n]; n];
    for t in 0..sp.mesh.n_triangles() {
        let tri = tri_of(&sp, t);
        let verts = sp.mesh.triangles[t];
        for (_, w) in triangle_rule(tri.v, 3) {
            let mut gl = [0.0; 2];
            for a in 0..3 {
                gl[0] += lag[verts[a]] * tri.grad[a][0];
                gl[1] += lag[verts[a]] * tri.grad[a][1];
            }
            let s = gl[0] * gl[0] + gl[1] * gl[1];
            for &(i, a) in &tdofs(&sp, t) {
                for &(j, b) in &tdofs(&sp, t) {
                    o[i][j] += s * (tri.grad[a][0] * tri.grad[b][0] + tri.grad[a][1] * tri.grad[b][1]) * w;
                }
            }
        }
    }
    deviation("G", &forms::assemble_g(&sp, &lag).unwrap(), &o)
}

/// 1D Gauss rule on [0, 1] with two panels.
fn edge_rule(n: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(std::num::NonZeroUsize::new(n).unwrap());
    let mut out = Vec::new();
    for panel in 0..2 {
        for (x, w) in gl.nodes().zip(gl.weights()) {
            out.push((0.5 * panel as f64 + (x + 1.0) / 4.0, w / 4.0));
        }
    }
    out
}

fn residual_scale(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Velocity and temperature residuals of the quadratic law.
pub fn boundary_residual_linear() -> (f64, f64) {
    // quadratic potential: Dj_m(s) = s exactly, so the integrand is polynomial
    let sp = spaces(4, &[Side::Bottom, Side::Right]);
    let law = BoundaryLaw::Mollified(mollify(&catalog::quadratic(), 8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let u: Vec<f64> = (0..sp.n_velocity()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nodal = sp.expand_velocity(&u);
    let got = forms::boundary_nonsmooth_residual(&sp, &law, &sp.tangential_trace(&nodal), TraceKind::Velocity).unwrap();

    let mut o = vec![0.0; sp.n_velocity()];
    for seg in sp.mesh.contact_segments() {
        let [a, b] = seg.edge;
        let mid = sp.element_p2[seg.triangle]
            .iter()
            .copied()
            .find(|&k| {
                let p = sp.p2_nodes[k];
                let c = [(sp.mesh.vertices[a][0] + sp.mesh.vertices[b][0]) / 2.0, (sp.mesh.vertices[a][1] + sp.mesh.vertices[b][1]) / 2.0];
                (p[0] - c[0]).abs() < 1e-12 && (p[1] - c[1]).abs() < 1e-12
            })
            .unwrap();
        let tau = seg.tangent;
        for (r, w) in edge_rule(4) {
            let phi = [(1.0 - r) * (1.0 - 2.0 * r), r * (2.0 * r - 1.0), 4.0 * r * (1.0 - r)];
            let nodes = [a, b, mid];
            let s: f64 = (0..3).map(|k| phi[k] * (nodal[nodes[k]][0] * tau[0] + nodal[nodes[k]][1] * tau[1])).sum();
            for k in 0..3 {
                for &d in &sp.velocity_node_dofs[nodes[k]] {
                    let dir = sp.velocity_free[d].dir;
                    o[d] += w * seg.length * s * phi[k] * (dir[0] * tau[0] + dir[1] * tau[1]);
                }
            }
        }
    }
    let scale = residual_scale(&o);
    let err = o.iter().zip(&got.residual).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let velocity = err / scale;

    // temperature trace
    let th: Vec<f64> = (0..sp.n_temperature()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let thn = sp.expand_temperature(&th);
    let got = forms::boundary_nonsmooth_residual(&sp, &law, &sp.temperature_trace(&thn), TraceKind::Temperature).unwrap();
    let mut o = vec![0.0; sp.n_temperature()];
    for seg in sp.mesh.contact_segments() {
        let [a, b] = seg.edge;
        for (r, w) in edge_rule(4) {
            let s = (1.0 - r) * thn[a] + r * thn[b];
            for (v, phi) in [(a, 1.0 - r), (b, r)] {
                if let Some(k) = sp.temperature_index[v] {
                    o[k] += w * seg.length * s * phi;
                }
            }
        }
    }
    let scale = residual_scale(&o);
    let err = o.iter().zip(&got.residual).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (velocity, err / scale)
}

/// Residual of a nonsmooth law at a constant trace; infinite when the
/// multiplier is not that single value.
pub fn boundary_residual_constant() -> f64 {
    // Nonsmooth law with a constant trace: the multiplier is one number
    let sp = spaces(4, &[Side::Bottom]);
    let mol = mollify(&catalog::stick_slip_ramp(0.5, 0.3, 0.2, 0.6), 8).unwrap();
    let s = 0.35;
    let xi = mol.derivative(s);
    let law = BoundaryLaw::Mollified(mol);
    let trace = vec![s; sp.boundary_points.len()];
    let got = forms::boundary_nonsmooth_residual(&sp, &law, &trace, TraceKind::Temperature).unwrap();
    let mut o = vec![0.0; sp.n_temperature()];
    for seg in sp.mesh.contact_segments() {
        for (r, w) in edge_rule(3) {
            for (v, phi) in [(seg.edge[0], 1.0 - r), (seg.edge[1], r)] {
                if let Some(k) = sp.temperature_index[v] {
                    o[k] += w * seg.length * xi * phi;
                }
            }
        }
    }
    let err = o.iter().zip(&got.residual).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if got.multiplier.iter().all(|&m| m == xi) {
        err / residual_scale(&o)
    } else {
        f64::INFINITY
    }
}
