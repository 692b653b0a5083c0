//! Lagrange P1 and P2 shape functions on the reference triangle and the
//! affine map to physical triangles.
//!
//! P2 local node order: the three vertices, then the midpoints of edges
//! (0,1), (1,2), (2,0).

pub const P2_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

pub fn p1_values(xi: [f64; 2]) -> [f64; 3] {
    [1.0 - xi[0] - xi[1], xi[0], xi[1]]
}

pub fn p1_ref_gradients() -> [[f64; 2]; 3] {
    [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
}

pub fn p2_values(xi: [f64; 2]) -> [f64; 6] {
    let l = p1_values(xi);
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

pub fn p2_ref_gradients(xi: [f64; 2]) -> [[f64; 2]; 6] {
    let l = p1_values(xi);
    let g = p1_ref_gradients();
    let scale = |a: f64, v: [f64; 2]| [a * v[0], a * v[1]];
    let add = |a: [f64; 2], b: [f64; 2]| [a[0] + b[0], a[1] + b[1]];
    [
        scale(4.0 * l[0] - 1.0, g[0]),
        scale(4.0 * l[1] - 1.0, g[1]),
        scale(4.0 * l[2] - 1.0, g[2]),
        add(scale(4.0 * l[1], g[0]), scale(4.0 * l[0], g[1])),
        add(scale(4.0 * l[2], g[1]), scale(4.0 * l[1], g[2])),
        add(scale(4.0 * l[0], g[2]), scale(4.0 * l[2], g[0])),
    ]
}

/// Affine map `x = origin + J xi` of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// Transposed inverse Jacobian: physical gradient = inv_t * reference gradient.
    pub inv_t: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(v: [[f64; 2]; 3]) -> Self {
        let jac = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        AffineMap {
            origin: v[0],
            jac,
            det,
            inv_t,
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }

    /// Reference coordinates of a physical point.
    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        // J^{-1} = inv_t^T
        [
            self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1],
            self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_is_nodal() {
        let nodes = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.0, 0.5],
        ];
        for (i, &x) in nodes.iter().enumerate() {
            let v = p2_values(x);
            for (j, &vj) in v.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vj - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let x = [0.21, 0.33];
        let g = p2_ref_gradients(x);
        let h = 1e-6;
        for k in 0..6 {
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                let fd = (p2_values(xp)[k] - p2_values(xm)[k]) / (2.0 * h);
                assert!((fd - g[k][d]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn affine_round_trip() {
        let m = AffineMap::new([[0.2, 0.1], [0.7, 0.3], [0.1, 0.9]]);
        let xi = [0.3, 0.4];
        let back = m.to_reference(m.to_physical(xi));
        assert!((back[0] - xi[0]).abs() < 1e-14 && (back[1] - xi[1]).abs() < 1e-14);
    }
}
