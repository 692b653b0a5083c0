#![allow(dead_code)]

use boussinesq_core::mesh::{build_rect_mesh, Rect, Side, SideTags};
use boussinesq_core::spaces::{build_spaces, DiscreteSpaces, VelocityDof};

pub fn spaces(n: usize, contact: &[Side]) -> DiscreteSpaces {
    let tags = if contact.is_empty() { SideTags::all_dirichlet() } else { SideTags::with_contact(contact) };
    build_spaces(&build_rect_mesh(Rect::unit(), n, n, tags).unwrap()).unwrap()
}

/// Same mesh with every velocity node and every vertex free, so fields
/// that do not vanish on the boundary are representable.
pub fn unconstrained(sp: &DiscreteSpaces) -> DiscreteSpaces {
    let mut s = sp.clone();
    s.velocity_free.clear();
    s.velocity_constraints.clear();
    for node in 0..s.n_p2() {
        s.velocity_node_dofs[node].clear();
        for dir in [[1.0, 0.0], [0.0, 1.0]] {
            s.velocity_node_dofs[node].push(s.velocity_free.len());
            s.velocity_free.push(VelocityDof { node, dir });
        }
    }
    let nv = s.mesh.n_vertices();
    s.temperature_free = (0..nv).collect();
    s.temperature_constrained.clear();
    s.temperature_index = (0..nv).map(Some).collect();
    s
}
