//! Discrete velocity (P2 vector), pressure (P1) and temperature (P1) spaces
//! with the essential constraints built in.
//!
//! Velocity nodes are the mesh vertices followed by the edge midpoints. A
//! free velocity DOF is a pair (node, direction): interior nodes carry the two
//! Cartesian directions, slip nodes on Gamma_1 carry only the tangent, nodes on
//! Gamma_0 (including Gamma_0/Gamma_1 corners) and corners between two slip
//! sides carry none.

use std::collections::BTreeMap;

use crate::element::AffineMap;
use crate::error::{Error, Result};
use crate::forms;
use crate::linalg::{self, SparseMatrix, TripletBuilder};
use crate::mesh::{validate_mesh, BoundaryTag, Mesh};
use crate::quadrature::gauss_legendre_unit;

/// Gauss points per Gamma_1 edge.
pub const BOUNDARY_POINTS_PER_EDGE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityDof {
    pub node: usize,
    /// Unit direction of the basis function `phi_node * dir`.
    pub dir: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityConstraint {
    /// `u = 0` at the node.
    Zero,
    /// `u . normal = 0` at the node.
    Normal([f64; 2]),
}

/// One quadrature point on Gamma_1.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    pub point: [f64; 2],
    /// Gauss weight times edge length.
    pub weight: f64,
    pub segment: usize,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    /// Velocity nodes along the edge: start vertex, end vertex, midpoint.
    pub p2_nodes: [usize; 3],
    pub p2_values: [f64; 3],
    pub p1_nodes: [usize; 2],
    pub p1_values: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct DiscreteSpaces {
    pub mesh: Mesh,
    /// Coordinates of all velocity nodes.
    pub p2_nodes: Vec<[f64; 2]>,
    /// Per triangle: the six velocity nodes (vertices, then midpoints of edges 01, 12, 20).
    pub element_p2: Vec<[usize; 6]>,
    pub velocity_free: Vec<VelocityDof>,
    /// Free DOFs attached to each velocity node.
    pub velocity_node_dofs: Vec<Vec<usize>>,
    pub velocity_constraints: Vec<(usize, VelocityConstraint)>,
    pub temperature_free: Vec<usize>,
    pub temperature_constrained: Vec<usize>,
    pub temperature_index: Vec<Option<usize>>,
    pub boundary_points: Vec<BoundaryPoint>,
}

impl DiscreteSpaces {
    pub fn n_p2(&self) -> usize {
        self.p2_nodes.len()
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity_free.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn n_temperature(&self) -> usize {
        self.temperature_free.len()
    }

    pub fn has_contact(&self) -> bool {
        !self.boundary_points.is_empty()
    }

    /// Free velocity coefficients to nodal Cartesian values `[u1, u2]` per node.
    pub fn expand_velocity(&self, free: &[f64]) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.n_p2()];
        for (k, dof) in self.velocity_free.iter().enumerate() {
            out[dof.node][0] += free[k] * dof.dir[0];
            out[dof.node][1] += free[k] * dof.dir[1];
        }
        out
    }

    /// Transpose of [`Self::expand_velocity`]: projects nodal Cartesian loads
    /// onto the free DOFs.
    pub fn restrict_velocity(&self, nodal: &[[f64; 2]]) -> Vec<f64> {
        self.velocity_free
            .iter()
            .map(|d| nodal[d.node][0] * d.dir[0] + nodal[d.node][1] * d.dir[1])
            .collect()
    }

    /// Free temperature coefficients to vertex values (zero on Gamma_0).
    pub fn expand_temperature(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.n_vertices()];
        for (k, &v) in self.temperature_free.iter().enumerate() {
            out[v] = free[k];
        }
        out
    }

    pub fn restrict_temperature(&self, nodal: &[f64]) -> Vec<f64> {
        self.temperature_free.iter().map(|&v| nodal[v]).collect()
    }

    /// Nodal interpolant of `f` onto the free velocity DOFs. Constrained
    /// components are dropped.
    pub fn interpolate_velocity(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let nodal: Vec<[f64; 2]> = self.p2_nodes.iter().map(|&x| f(x)).collect();
        self.restrict_velocity(&nodal)
    }

    pub fn interpolate_temperature(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.temperature_free
            .iter()
            .map(|&v| f(self.mesh.vertices[v]))
            .collect()
    }

    pub fn element_map(&self, t: usize) -> AffineMap {
        AffineMap::new(self.mesh.triangles[t].map(|v| self.mesh.vertices[v]))
    }

    /// Velocity at a point given nodal Cartesian values.
    pub fn eval_velocity(&self, nodal: &[[f64; 2]], p: [f64; 2]) -> Option<[f64; 2]> {
        let (t, bary) = self.mesh.locate(p)?;
        let phi = crate::element::p2_values([bary[1], bary[2]]);
        let nodes = self.element_p2[t];
        let mut u = [0.0; 2];
        for a in 0..6 {
            u[0] += phi[a] * nodal[nodes[a]][0];
            u[1] += phi[a] * nodal[nodes[a]][1];
        }
        Some(u)
    }

    /// Scalar P1 field at a point given vertex values.
    pub fn eval_p1(&self, nodal: &[f64], p: [f64; 2]) -> Option<f64> {
        let (t, bary) = self.mesh.locate(p)?;
        let tri = self.mesh.triangles[t];
        Some((0..3).map(|a| bary[a] * nodal[tri[a]]).sum())
    }

    /// Tangential velocity `u . tau` at every Gamma_1 quadrature point.
    pub fn tangential_trace(&self, nodal: &[[f64; 2]]) -> Vec<f64> {
        self.boundary_points
            .iter()
            .map(|bp| {
                (0..3)
                    .map(|a| {
                        let u = nodal[bp.p2_nodes[a]];
                        bp.p2_values[a] * (u[0] * bp.tangent[0] + u[1] * bp.tangent[1])
                    })
                    .sum()
            })
            .collect()
    }

    /// Temperature at every Gamma_1 quadrature point.
    pub fn temperature_trace(&self, nodal: &[f64]) -> Vec<f64> {
        self.boundary_points
            .iter()
            .map(|bp| (0..2).map(|a| bp.p1_values[a] * nodal[bp.p1_nodes[a]]).sum())
            .collect()
    }

    /// `(sum_q w_q s_q^2)^{1/2}` over the Gamma_1 quadrature.
    pub fn boundary_l2(&self, values: &[f64]) -> f64 {
        self.boundary_points
            .iter()
            .zip(values)
            .map(|(bp, v)| bp.weight * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Restriction matrix from free velocity DOFs to nodal Cartesian
    /// coefficients (row `2 * node + c`).
    pub fn velocity_prolongation(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(2 * self.n_p2(), self.n_velocity(), 2 * self.n_velocity());
        for (k, d) in self.velocity_free.iter().enumerate() {
            for c in 0..2 {
                if d.dir[c] != 0.0 {
                    b.push(2 * d.node + c, k, d.dir[c]);
                }
            }
        }
        b.build()
    }
}

fn is_zero_vec(v: [f64; 2]) -> bool {
    v[0] == 0.0 && v[1] == 0.0
}

pub fn build_spaces(mesh: &Mesh) -> Result<DiscreteSpaces> {
    let issues = validate_mesh(mesh);
    if let Some(issue) = issues.first() {
        if issues.iter().any(|i| matches!(i, crate::mesh::MeshIssue::EmptyDirichlet)) {
            return Err(Error::EmptyDirichletBoundary);
        }
        return Err(Error::InvalidMesh(format!("{issue} ({} issue(s) total)", issues.len())));
    }

    let nv = mesh.n_vertices();
    let edges = mesh.edges();
    let edge_index: BTreeMap<(usize, usize), usize> = edges
        .iter()
        .enumerate()
        .map(|(k, e)| ((e[0], e[1]), k))
        .collect();
    let midpoint_node = |a: usize, b: usize| nv + edge_index[&(a.min(b), a.max(b))];

    let mut p2_nodes = mesh.vertices.clone();
    for e in &edges {
        let (pa, pb) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
        p2_nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
    }
    let element_p2: Vec<[usize; 6]> = mesh
        .triangles
        .iter()
        .map(|t| {
            [
                t[0],
                t[1],
                t[2],
                midpoint_node(t[0], t[1]),
                midpoint_node(t[1], t[2]),
                midpoint_node(t[2], t[0]),
            ]
        })
        .collect();

    // boundary incidence per velocity node: (tag, normal)
    let n_p2 = p2_nodes.len();
    let mut incident: Vec<Vec<(BoundaryTag, [f64; 2])>> = vec![Vec::new(); n_p2];
    for s in &mesh.boundary {
        let mid = midpoint_node(s.edge[0], s.edge[1]);
        for node in [s.edge[0], s.edge[1], mid] {
            incident[node].push((s.tag, s.normal));
        }
    }

    let mut velocity_free = Vec::new();
    let mut velocity_node_dofs = vec![Vec::new(); n_p2];
    let mut velocity_constraints = Vec::new();
    for node in 0..n_p2 {
        let inc = &incident[node];
        if inc.is_empty() {
            for dir in [[1.0, 0.0], [0.0, 1.0]] {
                velocity_node_dofs[node].push(velocity_free.len());
                velocity_free.push(VelocityDof { node, dir });
            }
            continue;
        }
        if inc.iter().any(|(tag, _)| *tag == BoundaryTag::Dirichlet) {
            velocity_constraints.push((node, VelocityConstraint::Zero));
            continue;
        }
        let n0 = inc[0].1;
        let single_normal = inc.iter().all(|(_, n)| {
            let d = [n[0] - n0[0], n[1] - n0[1]];
            is_zero_vec(d)
        });
        if single_normal {
            velocity_constraints.push((node, VelocityConstraint::Normal(n0)));
            velocity_node_dofs[node].push(velocity_free.len());
            velocity_free.push(VelocityDof {
                node,
                dir: crate::mesh::tangent_of(n0),
            });
        } else {
            // two slip sides meet: both components are pinned
            velocity_constraints.push((node, VelocityConstraint::Zero));
        }
    }

    let mut dirichlet_vertex = vec![false; nv];
    for s in &mesh.boundary {
        if s.tag == BoundaryTag::Dirichlet {
            dirichlet_vertex[s.edge[0]] = true;
            dirichlet_vertex[s.edge[1]] = true;
        }
    }
    let mut temperature_free = Vec::new();
    let mut temperature_constrained = Vec::new();
    let mut temperature_index = vec![None; nv];
    for v in 0..nv {
        if dirichlet_vertex[v] {
            temperature_constrained.push(v);
        } else {
            temperature_index[v] = Some(temperature_free.len());
            temperature_free.push(v);
        }
    }

    let gauss = gauss_legendre_unit(BOUNDARY_POINTS_PER_EDGE);
    let mut boundary_points = Vec::new();
    for (si, s) in mesh.boundary.iter().enumerate() {
        if s.tag != BoundaryTag::Contact {
            continue;
        }
        let (a, b) = (s.edge[0], s.edge[1]);
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let mid = midpoint_node(a, b);
        for &(r, w) in &gauss {
            boundary_points.push(BoundaryPoint {
                point: [pa[0] + r * (pb[0] - pa[0]), pa[1] + r * (pb[1] - pa[1])],
                weight: w * s.length,
                segment: si,
                normal: s.normal,
                tangent: s.tangent,
                p2_nodes: [a, b, mid],
                p2_values: [(1.0 - r) * (1.0 - 2.0 * r), r * (2.0 * r - 1.0), 4.0 * r * (1.0 - r)],
                p1_nodes: [a, b],
                p1_values: [1.0 - r, r],
            });
        }
    }

    Ok(DiscreteSpaces {
        mesh: mesh.clone(),
        p2_nodes,
        element_p2,
        velocity_free,
        velocity_node_dofs,
        velocity_constraints,
        temperature_free,
        temperature_constrained,
        temperature_index,
        boundary_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceField {
    Velocity,
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Dense,
    Power,
    /// Dense below [`DENSE_LIMIT`] unknowns, power iteration above.
    Auto,
}

pub const DENSE_LIMIT: usize = 1200;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceNormEstimate {
    pub value: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceNorms {
    pub gamma_s_norm: f64,
    pub gamma_norm: f64,
    pub warnings: Vec<String>,
}

pub fn estimate_trace_norm(spaces: &DiscreteSpaces, which: TraceField) -> Result<TraceNormEstimate> {
    estimate_trace_norm_with(spaces, which, EigenMethod::Auto)
}

pub fn estimate_trace_norm_with(
    spaces: &DiscreteSpaces,
    which: TraceField,
    method: EigenMethod,
) -> Result<TraceNormEstimate> {
    if !spaces.has_contact() {
        return Ok(TraceNormEstimate {
            value: 0.0,
            warning: Some("Gamma_1 is empty: trace norm undefined, reported as 0".into()),
        });
    }
    let (num, den) = match which {
        TraceField::Velocity => (forms::boundary_gram_velocity(spaces), forms::korn_matrix(spaces)),
        TraceField::Temperature => (
            forms::boundary_gram_temperature(spaces),
            forms::stiffness_temperature(spaces).add(1.0, &forms::mass_temperature(spaces), 1.0),
        ),
    };
    let n = num.nrows;
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Power => false,
        EigenMethod::Auto => n <= DENSE_LIMIT,
    };
    let lambda = if dense {
        linalg::generalized_eigenvalues_dense(&num, &den)?
            .last()
            .copied()
            .unwrap_or(0.0)
    } else {
        linalg::largest_generalized_eigenvalue_power(&num, &den, 1e-12, 20_000)?
    };
    Ok(TraceNormEstimate {
        value: lambda.max(0.0).sqrt(),
        warning: None,
    })
}

pub fn trace_norms(spaces: &DiscreteSpaces) -> Result<TraceNorms> {
    let v = estimate_trace_norm(spaces, TraceField::Velocity)?;
    let t = estimate_trace_norm(spaces, TraceField::Temperature)?;
    let warnings = v.warning.into_iter().chain(t.warning).collect();
    Ok(TraceNorms {
        gamma_s_norm: v.value,
        gamma_norm: t.value,
        warnings,
    })
}

/// Smallest constant `kappa` with `a0(w, w) / alpha >= kappa |w|^2_{L2}` on
/// the free velocity space.
pub fn korn_mass_constant(spaces: &DiscreteSpaces) -> Result<f64> {
    let korn = forms::korn_matrix(spaces);
    let mass = forms::mass_velocity(spaces);
    if korn.nrows == 0 {
        return Ok(f64::INFINITY);
    }
    if korn.nrows <= DENSE_LIMIT {
        let ev = linalg::generalized_eigenvalues_dense(&korn, &mass)?;
        Ok(ev[0])
    } else {
        let mu = linalg::largest_generalized_eigenvalue_power(&mass, &korn, 1e-10, 20_000)?;
        // power iteration underestimates mu, so shrink kappa slightly
        Ok(1.0 / (mu * (1.0 + 1e-6)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, Rect, Side, SideTags};

    #[test]
    fn full_dirichlet_counts() {
        let m = build_rect_mesh(Rect::unit(), 2, 2, SideTags::all_dirichlet()).unwrap();
        let s = build_spaces(&m).unwrap();
        // 25 P2 nodes, 16 on the boundary
        assert_eq!(s.n_p2(), 25);
        assert_eq!(s.n_velocity(), 2 * 9);
        assert_eq!(s.velocity_constraints.len(), 16);
        assert_eq!(s.n_temperature(), 1);
        assert_eq!(s.temperature_constrained.len(), 8);
        assert!(!s.has_contact());
    }

    #[test]
    fn slip_bottom_frees_tangent_only() {
        let m = build_rect_mesh(Rect::unit(), 2, 2, SideTags::with_contact(&[Side::Bottom])).unwrap();
        let s = build_spaces(&m).unwrap();
        // bottom nodes strictly inside the side: x = 0.25, 0.5, 0.75
        let mut slip = 0;
        for (node, c) in &s.velocity_constraints {
            if let VelocityConstraint::Normal(n) = c {
                assert_eq!(*n, [0.0, -1.0]);
                assert_eq!(s.p2_nodes[*node][1], 0.0);
                assert_eq!(s.velocity_node_dofs[*node].len(), 1);
                let d = s.velocity_free[s.velocity_node_dofs[*node][0]].dir;
                assert_eq!(d[1], 0.0);
                slip += 1;
            }
        }
        assert_eq!(slip, 3);
        assert_eq!(s.boundary_points.len(), 2 * BOUNDARY_POINTS_PER_EDGE);
        // temperature: interior vertex + bottom middle vertex
        assert_eq!(s.n_temperature(), 2);
    }

    #[test]
    fn partition_of_components() {
        let m = build_rect_mesh(Rect::unit(), 3, 2, SideTags::with_contact(&[Side::Bottom, Side::Right])).unwrap();
        let s = build_spaces(&m).unwrap();
        let mut slots = vec![0usize; s.n_p2()];
        for d in &s.velocity_free {
            slots[d.node] += 1;
        }
        for (node, c) in &s.velocity_constraints {
            slots[*node] += match c {
                VelocityConstraint::Zero => 2,
                VelocityConstraint::Normal(_) => 1,
            };
        }
        assert!(slots.iter().all(|&k| k == 2));
        assert_eq!(s.n_temperature() + s.temperature_constrained.len(), m.n_vertices());
    }

    #[test]
    fn empty_contact_trace_norm_warns() {
        let m = build_rect_mesh(Rect::unit(), 2, 2, SideTags::all_dirichlet()).unwrap();
        let s = build_spaces(&m).unwrap();
        let e = estimate_trace_norm(&s, TraceField::Velocity).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.warning.is_some());
    }
}
