//! Quadrature rules on the reference triangle `{(x, y): x, y >= 0, x + y <= 1}`
//! and on `[0, 1]`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    /// Weights sum to 1/2, the reference area.
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// 12-point symmetric rule, exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        const FAMILIES3: [(f64, f64); 2] = [
            (0.249286745170910, 0.116786275726379),
            (0.063089014491502, 0.050844906370207),
        ];
        const FAMILY6: (f64, f64, f64) = (0.053145049844817, 0.310352451033784, 0.082851075618374);
        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        for (a, w) in FAMILIES3 {
            let b = 1.0 - 2.0 * a;
            for p in [[a, a], [b, a], [a, b]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        let (a, b, w) = FAMILY6;
        let c = 1.0 - a - b;
        for p in [[a, b], [b, a], [b, c], [c, b], [c, a], [a, c]] {
            points.push(p);
            weights.push(0.5 * w);
        }
        TriangleRule { points, weights }
    }

    /// Collapsed (Duffy) Gauss-Legendre product rule with `n * n` points,
    /// exact for total degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let line = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for &(u, wu) in &line {
            for &(v, wv) in &line {
                points.push([u, v * (1.0 - u)]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        TriangleRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("rule size must be positive"));
    let mut out: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre_unit(n)
        .into_iter()
        .map(|(x, w)| (2.0 * x - 1.0, 2.0 * w))
        .collect()
}

/// Adaptive Gauss-Legendre integration of `f` over `[a, b]`.
///
/// Each panel is compared against its bisection; panels are accepted once the
/// two agree to `tol` (absolute, scaled by the panel share of `b - a`).
pub struct AdaptiveGauss {
    nodes: Vec<(f64, f64)>,
    pub tol: f64,
    pub max_depth: u32,
}

impl AdaptiveGauss {
    pub fn new(order: usize, tol: f64) -> Self {
        AdaptiveGauss {
            nodes: gauss_legendre(order),
            tol,
            max_depth: 30,
        }
    }

    fn panel(&self, a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .map(|&(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let whole = self.panel(a, b, &mut f);
        self.refine(a, b, whole, self.tol, 0, &mut f)
    }

    fn refine(&self, a: f64, b: f64, whole: f64, tol: f64, depth: u32, f: &mut impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.panel(a, mid, f);
        let right = self.panel(mid, b, f);
        let split = left + right;
        if (split - whole).abs() <= tol || depth >= self.max_depth {
            return split;
        }
        self.refine(a, mid, left, 0.5 * tol, depth + 1, f)
            + self.refine(mid, b, right, 0.5 * tol, depth + 1, f)
    }
}
