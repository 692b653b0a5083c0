//! Locally Lipschitz boundary potentials (friction `j`, heat flux `j1`),
//! their Clarke subdifferentials and mollified derivatives, together with the
//! structural hypotheses on conductivity and buoyancy.
//!
//! A law is described by its a.e. derivative `j'`: a sorted list of
//! breakpoints and one smooth piece per interval. With `odd = true` the
//! pieces describe `s >= 0` and `j'(-s) = -j'(s)`, i.e. `j` is even and the
//! friction opposes sliding in either direction.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::AdaptiveGauss;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Piece {
    /// `sum_k coeffs[k] * s^k`
    Poly { coeffs: Vec<f64> },
    /// `a + b * exp(-c * s)`
    Exp { a: f64, b: f64, c: f64 },
}

impl Piece {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Piece::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c),
            Piece::Exp { a, b, c } => a + b * (-c * s).exp(),
        }
    }

    pub fn slope(&self, s: f64) -> f64 {
        match self {
            Piece::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * s + k as f64 * c),
            Piece::Exp { b, c, .. } => -b * c * (-c * s).exp(),
        }
    }

    /// Antiderivative vanishing at `s = 0`.
    pub fn primitive(&self, s: f64) -> f64 {
        match self {
            Piece::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c * s.powi(k as i32 + 1) / (k + 1) as f64)
                .sum(),
            Piece::Exp { a, b, c } => {
                if *c == 0.0 {
                    (a + b) * s
                } else {
                    a * s + b / c * (1.0 - (-c * s).exp())
                }
            }
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Piece::Poly { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            Piece::Exp { a, b, c } => a.is_finite() && b.is_finite() && c.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    /// Declared growth constant (`c0` or `c1`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
    /// Declared maximal descent slope; makes downward jumps admissible by
    /// treating them as steep segments with at most this slope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_descent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseLaw {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Piece>,
    #[serde(default)]
    pub odd: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared: Option<DeclaredConstants>,
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn hull(a: f64, b: f64) -> Self {
        Interval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

impl PiecewiseLaw {
    pub fn new(name: &str, breakpoints: Vec<f64>, pieces: Vec<Piece>, odd: bool) -> Result<Self> {
        let law = PiecewiseLaw {
            name: name.to_string(),
            breakpoints,
            pieces,
            odd,
            declared: None,
        };
        law.validate()?;
        Ok(law)
    }

    pub fn with_declared(mut self, declared: DeclaredConstants) -> Self {
        self.declared = Some(declared);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidLaw(format!("{}: {m}", self.display_name())));
        if self.pieces.len() != self.breakpoints.len() + 1 {
            return err(format!(
                "{} breakpoints need {} pieces, got {}",
                self.breakpoints.len(),
                self.breakpoints.len() + 1,
                self.pieces.len()
            ));
        }
        if self.breakpoints.iter().any(|b| !b.is_finite()) || self.pieces.iter().any(|p| !p.is_finite()) {
            return err("non-finite breakpoint or coefficient".into());
        }
        if self.breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return err("breakpoints must be strictly increasing".into());
        }
        if self.odd && self.breakpoints.first().map_or(false, |&b| b <= 0.0) {
            return err("odd laws describe s >= 0; breakpoints must be positive".into());
        }
        if let Some(d) = &self.declared {
            if d.growth.map_or(false, |g| !(g > 0.0)) || d.max_descent.map_or(false, |m| !(m >= 0.0)) {
                return err("declared constants must be positive".into());
            }
        }
        Ok(())
    }

    pub fn display_name(&self) -> &str {
        if self.name.is_empty() {
            "<unnamed law>"
        } else {
            &self.name
        }
    }

    /// All points where `j'` may fail to be smooth, ascending.
    pub fn kinks(&self) -> Vec<f64> {
        if self.odd {
            let mut k: Vec<f64> = self.breakpoints.iter().rev().map(|b| -b).collect();
            k.push(0.0);
            k.extend(self.breakpoints.iter().copied());
            k
        } else {
            self.breakpoints.clone()
        }
    }

    fn piece_left(&self, s: f64) -> (&Piece, f64) {
        let idx = self.breakpoints.partition_point(|&b| b < s);
        (&self.pieces[idx], s)
    }

    fn piece_right(&self, s: f64) -> (&Piece, f64) {
        let idx = self.breakpoints.partition_point(|&b| b <= s);
        (&self.pieces[idx], s)
    }

    /// One-sided limits `(j'(s-), j'(s+))`.
    pub fn one_sided(&self, s: f64) -> (f64, f64) {
        if !self.odd {
            let (pl, _) = self.piece_left(s);
            let (pr, _) = self.piece_right(s);
            return (pl.value(s), pr.value(s));
        }
        if s > 0.0 {
            let (pl, _) = self.piece_left(s);
            let (pr, _) = self.piece_right(s);
            (pl.value(s), pr.value(s))
        } else if s < 0.0 {
            let m = -s;
            let (pl, _) = self.piece_left(m);
            let (pr, _) = self.piece_right(m);
            (-pr.value(m), -pl.value(m))
        } else {
            let v = self.pieces[0].value(0.0);
            (-v, v)
        }
    }

    /// A selection of the a.e. derivative (right limit).
    pub fn derivative(&self, s: f64) -> f64 {
        self.one_sided(s).1
    }

    /// Derivative of the smooth piece active just right of `s`.
    pub fn second_derivative(&self, s: f64) -> f64 {
        if self.odd && s < 0.0 {
            let (p, _) = self.piece_left(-s);
            p.slope(-s)
        } else {
            let (p, _) = self.piece_right(s);
            p.slope(s)
        }
    }

    /// Potential `j(s)` normalized by `j(0) = 0`.
    pub fn potential(&self, s: f64) -> f64 {
        let (t, even) = if self.odd { (s.abs(), true) } else { (s, false) };
        let _ = even;
        // integrate piecewise from 0 to t
        let mut nodes = vec![0.0];
        for &b in &self.breakpoints {
            if (b > 0.0 && b < t) || (b < 0.0 && b > t) {
                nodes.push(b);
            }
        }
        nodes.push(t);
        if t < 0.0 {
            nodes[1..].sort_by(|a, b| b.total_cmp(a));
        } else {
            nodes.sort_by(|a, b| a.total_cmp(b));
        }
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let (p, _) = self.piece_right(mid);
            acc += p.primitive(w[1]) - p.primitive(w[0]);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| match p {
            Piece::Poly { coeffs } => coeffs.iter().all(|&c| c == 0.0),
            Piece::Exp { a, b, .. } => *a == 0.0 && *b == 0.0,
        })
    }
}

/// Clarke generalized gradient of a scalar piecewise-C1 law: the hull of the
/// one-sided derivative limits.
pub fn eval_clarke(law: &PiecewiseLaw, s: f64) -> Interval {
    let (l, r) = law.one_sided(s);
    Interval::hull(l, r)
}

/// Normalized bump `rho(t) = exp(-1 / (1 - t^2)) / Z` on `(-1, 1)`.
pub fn bump(t: f64) -> f64 {
    bump_unnormalized(t) / bump_normalization()
}

fn bump_unnormalized(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn mollifier_quadrature() -> AdaptiveGauss {
    AdaptiveGauss::new(12, 1e-14)
}

pub fn bump_normalization() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| mollifier_quadrature().integrate(-1.0, 1.0, bump_unnormalized))
}

/// Law smoothed by convolution with `rho_m(x) = m rho(m x)`.
#[derive(Debug, Clone)]
pub struct MollifiedLaw {
    pub base: PiecewiseLaw,
    pub level: u32,
}

pub fn mollify(law: &PiecewiseLaw, m: u32) -> Result<MollifiedLaw> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "mollification_m",
            reason: "level must be at least 1".into(),
        });
    }
    law.validate()?;
    Ok(MollifiedLaw {
        base: law.clone(),
        level: m,
    })
}

impl MollifiedLaw {
    pub fn radius(&self) -> f64 {
        1.0 / self.level as f64
    }

    /// `D j_m(s) = int rho(t) j'(s - t/m) dt`, split at the kinks of `j'`.
    pub fn derivative(&self, s: f64) -> f64 {
        self.convolve(s, |law, x| law.derivative(x))
    }

    /// `int rho_m` over the same panels used by [`Self::derivative`].
    pub fn mass(&self, s: f64) -> f64 {
        self.convolve(s, |_, _| 1.0)
    }

    fn convolve(&self, s: f64, f: impl Fn(&PiecewiseLaw, f64) -> f64) -> f64 {
        let m = self.level as f64;
        // fold t and -t together: odd derivatives then cancel exactly at s = 0
        // and mirrored arguments give bit-identical magnitudes
        let mut cuts = vec![0.0];
        // s -+ t/m = k  <=>  t = |m (s - k)|
        let mut inner: Vec<f64> = self
            .base
            .kinks()
            .into_iter()
            .map(|k| (m * (s - k)).abs())
            .filter(|&t| t > 0.0 && t < 1.0)
            .collect();
        inner.sort_by(|a, b| a.total_cmp(b));
        inner.dedup();
        cuts.extend(inner);
        cuts.push(1.0);
        let quad = mollifier_quadrature();
        let z = bump_normalization();
        cuts.windows(2)
            .map(|w| {
                quad.integrate(w[0], w[1], |t| {
                    let r = bump_unnormalized(t);
                    if r == 0.0 {
                        0.0
                    } else {
                        r * (f(&self.base, s - t / m) + f(&self.base, s + t / m))
                    }
                })
            })
            .sum::<f64>()
            / z
    }
}

/// Boundary term handed to the assembly: either absent, or a single-valued
/// mollified law. Raw laws are rejected because their subdifferential is
/// set-valued at breakpoints.
#[derive(Debug, Clone)]
pub enum BoundaryLaw {
    Zero,
    Mollified(MollifiedLaw),
    Raw(PiecewiseLaw),
}

impl BoundaryLaw {
    pub fn derivative(&self, s: f64) -> Result<f64> {
        match self {
            BoundaryLaw::Zero => Ok(0.0),
            BoundaryLaw::Mollified(l) => Ok(l.derivative(s)),
            BoundaryLaw::Raw(l) => Err(Error::SetValuedLaw(l.display_name().to_string())),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BoundaryLaw::Zero => true,
            BoundaryLaw::Mollified(l) => l.base.is_zero(),
            BoundaryLaw::Raw(l) => l.is_zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawConstants {
    /// Growth constant: `|eta| <= growth (1 + |s|)` for `eta` in the Clarke gradient.
    pub growth: f64,
    /// Relaxed-monotonicity constant; `+inf` when an undeclared downward jump exists.
    pub relaxed_monotonicity: f64,
    /// Constants are certified on `[-range, range]` only.
    pub range: f64,
    pub grid: usize,
    pub downward_jump: bool,
}

pub fn estimate_constants(law: &PiecewiseLaw, range: f64, grid: usize) -> Result<LawConstants> {
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::InvalidParameter {
            name: "range",
            reason: format!("must be positive and finite, got {range}"),
        });
    }
    if grid < 100 {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!("need at least 100 points, got {grid}"),
        });
    }
    law.validate()?;

    let mut points: Vec<f64> = (0..grid)
        .map(|i| -range + 2.0 * range * i as f64 / (grid - 1) as f64)
        .collect();
    let kinks: Vec<f64> = law
        .kinks()
        .into_iter()
        .filter(|k| k.abs() <= range)
        .collect();
    points.extend(kinks.iter().copied());

    let mut growth: f64 = 0.0;
    for &s in &points {
        let (l, r) = law.one_sided(s);
        growth = growth.max(l.abs().max(r.abs()) / (1.0 + s.abs()));
    }

    // descent slopes of the smooth pieces, sampled including piece ends
    let mut descent: f64 = 0.0;
    for &s in &points {
        descent = descent.max(-law.second_derivative(s));
        // left-side piece at kinks
        let eps = 1e-12 * (1.0 + s.abs());
        descent = descent.max(-law.second_derivative(s - eps));
    }

    let mut downward_jump = false;
    for &k in &kinks {
        let (l, r) = law.one_sided(k);
        if r < l - 1e-14 * (1.0 + l.abs()) {
            downward_jump = true;
        }
    }
    let declared = law.declared.as_ref().and_then(|d| d.max_descent);
    let relaxed_monotonicity = match (downward_jump, declared) {
        (true, None) => f64::INFINITY,
        (true, Some(d)) => descent.max(d),
        (false, _) => descent.max(0.0),
    };

    Ok(LawConstants {
        growth,
        relaxed_monotonicity,
        range,
        grid,
        downward_jump,
    })
}

/// Conductivity `k(r)`, bounded and Lipschitz with `k >= delta > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConductivityLaw {
    Constant { value: f64 },
    Sinusoidal { base: f64, amplitude: f64, frequency: f64 },
    /// `clamp(sum coeffs[k] r^k, lower, upper)`
    ClippedPoly { coeffs: Vec<f64>, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductivitySpec {
    pub law: ConductivityLaw,
    /// Declared lower bound.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductivityBounds {
    pub lower: f64,
    pub upper: f64,
    pub lipschitz: f64,
}

impl ConductivitySpec {
    pub fn constant(value: f64) -> Self {
        ConductivitySpec {
            law: ConductivityLaw::Constant { value },
            delta: value,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.law {
            ConductivityLaw::Constant { value } => *value,
            ConductivityLaw::Sinusoidal { base, amplitude, frequency } => base + amplitude * (frequency * r).sin(),
            ConductivityLaw::ClippedPoly { coeffs, lower, upper } => {
                poly(coeffs, r).clamp(*lower, *upper)
            }
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match &self.law {
            ConductivityLaw::Constant { .. } => 0.0,
            ConductivityLaw::Sinusoidal { amplitude, frequency, .. } => amplitude * frequency * (frequency * r).cos(),
            ConductivityLaw::ClippedPoly { coeffs, lower, upper } => {
                let v = poly(coeffs, r);
                if v <= *lower || v >= *upper {
                    0.0
                } else {
                    Piece::Poly { coeffs: coeffs.clone() }.slope(r)
                }
            }
        }
    }

    /// Bounds from the law's closed form, cross-checked by sampling.
    pub fn bounds(&self) -> ConductivityBounds {
        match &self.law {
            ConductivityLaw::Constant { value } => ConductivityBounds {
                lower: *value,
                upper: *value,
                lipschitz: 0.0,
            },
            ConductivityLaw::Sinusoidal { base, amplitude, frequency } => ConductivityBounds {
                lower: base - amplitude.abs(),
                upper: base + amplitude.abs(),
                lipschitz: (amplitude * frequency).abs(),
            },
            ConductivityLaw::ClippedPoly { lower, upper, .. } => {
                let samples = 20_001;
                let (mut lo, mut hi, mut lip) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
                for i in 0..samples {
                    let r = -100.0 + 200.0 * i as f64 / (samples - 1) as f64;
                    let v = self.eval(r);
                    lo = lo.min(v);
                    hi = hi.max(v);
                    lip = lip.max(self.derivative(r).abs());
                }
                ConductivityBounds {
                    lower: lo.max(*lower),
                    upper: hi.min(*upper),
                    lipschitz: lip,
                }
            }
        }
    }

    /// Checks H(k): bounded, Lipschitz, `k(r) >= delta > 0`.
    pub fn verify(&self) -> Result<ConductivityBounds> {
        if !(self.delta > 0.0) {
            return Err(Error::Conductivity(format!(
                "\"k(r) > delta\" needs delta > 0, got delta = {}",
                self.delta
            )));
        }
        if let ConductivityLaw::ClippedPoly { lower, upper, .. } = &self.law {
            if !(lower <= upper) || !upper.is_finite() {
                return Err(Error::Conductivity(format!(
                    "clip interval [{lower}, {upper}] must be finite and ordered"
                )));
            }
        }
        let b = self.bounds();
        if !(b.upper.is_finite() && b.lipschitz.is_finite()) {
            return Err(Error::Conductivity("k must be bounded and Lipschitz".into()));
        }
        if b.lower < self.delta {
            return Err(Error::Conductivity(format!(
                "\"k(r) > delta\" fails: inf k = {} < delta = {}",
                b.lower, self.delta
            )));
        }
        for i in 0..2001 {
            let r = -50.0 + 0.05 * i as f64;
            if self.eval(r) < self.delta {
                return Err(Error::Conductivity(format!(
                    "k({r}) = {} < delta = {}",
                    self.eval(r),
                    self.delta
                )));
            }
        }
        Ok(b)
    }
}

fn poly(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

/// Linear buoyancy `F(theta) = beta * theta * e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuoyancySpec {
    pub e: [f64; 2],
    pub beta: f64,
}

impl BuoyancySpec {
    pub fn none() -> Self {
        BuoyancySpec { e: [0.0, 1.0], beta: 0.0 }
    }

    pub fn force(&self, theta: f64) -> [f64; 2] {
        [self.beta * theta * self.e[0], self.beta * theta * self.e[1]]
    }

    /// Norm of `F` as a map `R -> R^2`.
    pub fn operator_norm(&self) -> f64 {
        self.beta.abs() * (self.e[0] * self.e[0] + self.e[1] * self.e[1]).sqrt()
    }

    pub fn verify(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.e.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "buoyancy",
                reason: "H(F): F must be linear and continuous (finite coefficients)".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl InequalityCheck {
    /// Strict `lhs > rhs`.
    fn strict(lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            lhs,
            rhs,
            pass: lhs > rhs,
        }
    }

    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct H0Report {
    /// `alpha > max(2 sqrt 2 c0, m1) |gamma_s|^2`
    pub velocity: InequalityCheck,
    /// `delta > 2 sqrt 2 c1 |gamma|^2`
    pub temperature: InequalityCheck,
    pub notes: Vec<String>,
}

impl H0Report {
    pub fn passes(&self) -> bool {
        self.velocity.pass && self.temperature.pass
    }
}

/// Smallness condition on viscosity and conductivity, from the law constants
/// and the squared trace norms.
pub fn check_h0_values(
    c0: f64,
    m1: f64,
    c1: f64,
    alpha: f64,
    delta: f64,
    gamma_s_sq: f64,
    gamma_sq: f64,
) -> H0Report {
    let two_root_two = 2.0 * std::f64::consts::SQRT_2;
    let velocity = InequalityCheck::strict(alpha, (two_root_two * c0).max(m1) * gamma_s_sq);
    let temperature = InequalityCheck::strict(delta, two_root_two * c1 * gamma_sq);
    H0Report {
        velocity,
        temperature,
        notes: vec!["the constant `m` of the viscosity bound is read as the relaxed-monotonicity constant m1".into()],
    }
}

pub fn check_h0(
    friction: &LawConstants,
    heat_flux: &LawConstants,
    alpha: f64,
    conductivity: &ConductivitySpec,
    gamma_s_norm: f64,
    gamma_norm: f64,
) -> H0Report {
    let mut report = check_h0_values(
        friction.growth,
        friction.relaxed_monotonicity,
        heat_flux.growth,
        alpha,
        conductivity.delta,
        gamma_s_norm * gamma_s_norm,
        gamma_norm * gamma_norm,
    );
    report.notes.push(format!(
        "law constants certified on |s| <= {} (friction) and |r| <= {} (heat flux)",
        friction.range, heat_flux.range
    ));
    report
}

/// Ready-made laws used by the presets and tests.
pub mod catalog {
    use super::*;

    pub fn zero() -> PiecewiseLaw {
        PiecewiseLaw::new("zero", vec![], vec![Piece::Poly { coeffs: vec![0.0] }], false).unwrap()
    }

    /// `j(s) = |s|`
    pub fn abs() -> PiecewiseLaw {
        PiecewiseLaw::new("abs", vec![], vec![Piece::Poly { coeffs: vec![1.0] }], true).unwrap()
    }

    /// `j(s) = s^2 / 2`
    pub fn quadratic() -> PiecewiseLaw {
        PiecewiseLaw::new("quadratic", vec![], vec![Piece::Poly { coeffs: vec![0.0, 1.0] }], false).unwrap()
    }

    /// Static coefficient `mu_s` up to slip `s0`, then kinetic `mu_k < mu_s`
    /// with a genuine jump (unbounded descent).
    pub fn stick_slip_jump(mu_s: f64, mu_k: f64, s0: f64) -> PiecewiseLaw {
        PiecewiseLaw::new(
            "stick-slip-jump",
            vec![s0],
            vec![Piece::Poly { coeffs: vec![mu_s] }, Piece::Poly { coeffs: vec![mu_k] }],
            true,
        )
        .unwrap()
    }

    /// Stick-slip with a linear drop from `mu_s` to `mu_k` over `[s1, s2]`.
    pub fn stick_slip_ramp(mu_s: f64, mu_k: f64, s1: f64, s2: f64) -> PiecewiseLaw {
        let slope = (mu_s - mu_k) / (s2 - s1);
        PiecewiseLaw::new(
            "stick-slip-ramp",
            vec![s1, s2],
            vec![
                Piece::Poly { coeffs: vec![mu_s] },
                Piece::Poly { coeffs: vec![mu_s + slope * s1, -slope] },
                Piece::Poly { coeffs: vec![mu_k] },
            ],
            true,
        )
        .unwrap()
    }

    /// Slip weakening `mu_k + (mu_s - mu_k) exp(-c s)`; descent slope `c (mu_s - mu_k)`.
    pub fn slip_weakening(mu_s: f64, mu_k: f64, c: f64) -> PiecewiseLaw {
        PiecewiseLaw::new(
            "slip-weakening",
            vec![],
            vec![Piece::Exp { a: mu_k, b: mu_s - mu_k, c }],
            true,
        )
        .unwrap()
    }

    /// Nonmonotone heat flux: `scale * r` for `|r| <= 1`, decaying to
    /// `scale / 2` on `[1, 2]`, constant beyond.
    pub fn nonmonotone_flux(scale: f64) -> PiecewiseLaw {
        PiecewiseLaw::new(
            "nonmonotone-flux",
            vec![1.0, 2.0],
            vec![
                Piece::Poly { coeffs: vec![0.0, scale] },
                Piece::Poly { coeffs: vec![1.5 * scale, -0.5 * scale] },
                Piece::Poly { coeffs: vec![0.5 * scale] },
            ],
            true,
        )
        .unwrap()
    }

    pub fn by_name(name: &str) -> Option<PiecewiseLaw> {
        Some(match name {
            "zero" => zero(),
            "abs" => abs(),
            "quadratic" => quadratic(),
            "stick-slip-jump" => stick_slip_jump(0.5, 0.3, 0.5),
            "stick-slip-ramp" => stick_slip_ramp(0.5, 0.3, 0.2, 0.6),
            "slip-weakening" => slip_weakening(0.5, 0.3, 2.0),
            "nonmonotone-flux" => nonmonotone_flux(0.1),
            _ => return None,
        })
    }

    pub const NAMES: [&str; 7] = [
        "zero",
        "abs",
        "quadratic",
        "stick-slip-jump",
        "stick-slip-ramp",
        "slip-weakening",
        "nonmonotone-flux",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clarke_of_abs() {
        let j = catalog::abs();
        assert_eq!(eval_clarke(&j, 0.0), Interval { lo: -1.0, hi: 1.0 });
        assert_eq!(eval_clarke(&j, 2.0), Interval::point(1.0));
        assert_eq!(eval_clarke(&j, -3.0), Interval::point(-1.0));
    }

    #[test]
    fn clarke_at_stick_slip_breakpoint() {
        let j = catalog::stick_slip_jump(0.6, 0.4, 0.5);
        let i = eval_clarke(&j, 0.5);
        assert_eq!(i, Interval { lo: 0.4, hi: 0.6 });
        let i = eval_clarke(&j, -0.5);
        assert_eq!(i, Interval { lo: -0.6, hi: -0.4 });
    }

    #[test]
    fn potential_matches_primitive() {
        let j = catalog::abs();
        assert!((j.potential(-2.5) - 2.5).abs() < 1e-14);
        let q = catalog::quadratic();
        assert!((q.potential(3.0) - 4.5).abs() < 1e-14);
        let r = catalog::stick_slip_ramp(0.5, 0.3, 0.2, 0.6);
        // 0.5*0.2 + trapezoid 0.4*(0.5+0.3)/2 + 0.3*0.4
        assert!((r.potential(1.0) - (0.1 + 0.16 + 0.12)).abs() < 1e-14);
        assert!((r.potential(-1.0) - r.potential(1.0)).abs() < 1e-14);
    }

    #[test]
    fn mollified_abs() {
        let j = mollify(&catalog::abs(), 8).unwrap();
        assert!(j.derivative(0.0).abs() < 1e-14);
        assert!((j.derivative(0.125) - 1.0).abs() < 1e-10);
        assert!((j.derivative(3.0) - 1.0).abs() < 1e-10);
        let mid = j.derivative(0.05);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn mollifier_has_unit_mass() {
        for m in [1, 3, 16] {
            let j = mollify(&catalog::stick_slip_ramp(0.5, 0.3, 0.2, 0.6), m).unwrap();
            for s in [0.0, 0.1, 0.3, -0.55] {
                assert!((j.mass(s) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constants_of_catalog_laws() {
        let c = estimate_constants(&catalog::abs(), 10.0, 1001).unwrap();
        assert!((c.growth - 1.0).abs() < 1e-15);
        assert_eq!(c.relaxed_monotonicity, 0.0);

        let c = estimate_constants(&catalog::quadratic(), 10.0, 1001).unwrap();
        assert!((c.growth - 10.0 / 11.0).abs() < 1e-14);
        assert_eq!(c.relaxed_monotonicity, 0.0);

        let c = estimate_constants(&catalog::stick_slip_jump(0.6, 0.4, 0.5), 5.0, 1001).unwrap();
        assert!(c.downward_jump);
        assert!(c.relaxed_monotonicity.is_infinite());

        let declared = catalog::stick_slip_jump(0.6, 0.4, 0.5).with_declared(DeclaredConstants {
            growth: None,
            max_descent: Some(3.0),
        });
        let c = estimate_constants(&declared, 5.0, 1001).unwrap();
        assert_eq!(c.relaxed_monotonicity, 3.0);

        let c = estimate_constants(&catalog::stick_slip_ramp(0.5, 0.3, 0.2, 0.6), 5.0, 1001).unwrap();
        assert!((c.relaxed_monotonicity - 0.5).abs() < 1e-12);
        assert!(!c.downward_jump);

        let c = estimate_constants(&catalog::slip_weakening(0.5, 0.3, 2.0), 5.0, 1001).unwrap();
        assert!((c.relaxed_monotonicity - 0.4).abs() < 1e-12);
        assert!((c.growth - 0.5).abs() < 1e-12);
    }

    #[test]
    fn estimator_rejects_bad_grid() {
        assert!(estimate_constants(&catalog::abs(), 1.0, 10).is_err());
        assert!(estimate_constants(&catalog::abs(), 0.0, 200).is_err());
    }

    #[test]
    fn h0_arithmetic() {
        let r = check_h0_values(1.0, 0.0, 1.0, 10.0, 5.0, 1.0, 1.0);
        assert!(r.velocity.pass);
        assert!((r.velocity.margin() - (10.0 - 2.0 * 2f64.sqrt())).abs() < 1e-15);

        let r = check_h0_values(1.0, 0.0, 1.0, 10.0, 0.1, 1.0, 1.0);
        assert!(!r.temperature.pass);

        let alpha = 2.0 * 2f64.sqrt() * 0.7 * 1.3;
        let r = check_h0_values(0.7, 0.0, 1.0, alpha, 5.0, 1.3, 1.0);
        assert!(!r.velocity.pass);
    }

    #[test]
    fn conductivity_checks() {
        let k = ConductivitySpec {
            law: ConductivityLaw::Sinusoidal { base: 2.0, amplitude: 1.0, frequency: 1.0 },
            delta: 0.5,
        };
        let b = k.verify().unwrap();
        assert_eq!(b.lower, 1.0);
        assert_eq!(k.eval(0.0), 2.0);

        let bad = ConductivitySpec { law: ConductivityLaw::Constant { value: 1.0 }, delta: 0.0 };
        assert!(matches!(bad.verify(), Err(Error::Conductivity(_))));

        let clipped = ConductivitySpec {
            law: ConductivityLaw::ClippedPoly { coeffs: vec![1.0, 0.0, 1.0], lower: 0.5, upper: 4.0 },
            delta: 0.5,
        };
        let b = clipped.verify().unwrap();
        assert!((b.upper - 4.0).abs() < 1e-12 && (b.lower - 1.0).abs() < 1e-12);
        assert!((b.lipschitz - 2.0 * 3f64.sqrt()).abs() < 1e-2);
    }

    #[test]
    fn raw_law_is_rejected_as_boundary_term() {
        let raw = BoundaryLaw::Raw(catalog::abs());
        assert!(matches!(raw.derivative(0.3), Err(Error::SetValuedLaw(_))));
    }

    #[test]
    fn law_json_round_trip_shape() {
        let law = catalog::slip_weakening(0.5, 0.3, 2.0);
        law.validate().unwrap();
        let bad = PiecewiseLaw {
            name: "bad".into(),
            breakpoints: vec![1.0],
            pieces: vec![Piece::Poly { coeffs: vec![1.0] }],
            odd: false,
            declared: None,
        };
        assert!(bad.validate().is_err());
    }
}
