//! Structured triangulations of axis-aligned rectangles.
//!
//! Each cell is split along the diagonal that points towards the domain
//! centre ("union jack" pattern). Every triangle then owns at least one
//! interior vertex as soon as `nx, ny >= 2`, which keeps the Taylor-Hood pair
//! stable in the corners, and refinement by an even factor stays nested.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary part an edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Gamma_0: adhesion for the velocity, zero temperature.
    Dirichlet,
    /// Gamma_1: slip with nonmonotone friction and heat flux.
    Contact,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryTag::Dirichlet => f.write_str("G0"),
            BoundaryTag::Contact => f.write_str("G1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }
}

/// Assignment of the four rectangle sides to Gamma_0 / Gamma_1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideTags {
    pub bottom: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub left: BoundaryTag,
}

impl SideTags {
    pub fn all_dirichlet() -> Self {
        SideTags {
            bottom: BoundaryTag::Dirichlet,
            right: BoundaryTag::Dirichlet,
            top: BoundaryTag::Dirichlet,
            left: BoundaryTag::Dirichlet,
        }
    }

    /// The listed sides are Gamma_1, the rest Gamma_0.
    pub fn with_contact(sides: &[Side]) -> Self {
        let mut tags = Self::all_dirichlet();
        for &side in sides {
            tags.set(side, BoundaryTag::Contact);
        }
        tags
    }

    pub fn get(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Bottom => self.bottom,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Left => self.left,
        }
    }

    pub fn set(&mut self, side: Side, tag: BoundaryTag) {
        match side {
            Side::Bottom => self.bottom = tag,
            Side::Right => self.right = tag,
            Side::Top => self.top = tag,
            Side::Left => self.left = tag,
        }
    }

    pub fn contact_sides(&self) -> Vec<Side> {
        Side::ALL
            .into_iter()
            .filter(|&s| self.get(s) == BoundaryTag::Contact)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn unit() -> Self {
        Rect {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Maps a physical point to `[0,1]^2`.
    pub fn normalized(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.x0) / self.width(),
            (p[1] - self.y0) / self.height(),
        ]
    }
}

impl Default for Rect {
    fn default() -> Self {
        Rect::unit()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    /// Vertex indices, ordered counter-clockwise along the boundary.
    pub edge: [usize; 2],
    pub tag: BoundaryTag,
    pub side: Side,
    pub normal: [f64; 2],
    /// `(nu_2, -nu_1)`.
    pub tangent: [f64; 2],
    pub length: f64,
    /// Triangle owning this edge.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundarySegment>,
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
}

pub fn tangent_of(normal: [f64; 2]) -> [f64; 2] {
    [normal[1], -normal[0]]
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Structured mesh of `domain` with `nx * ny` cells split into two triangles each.
pub fn build_rect_mesh(domain: Rect, nx: usize, ny: usize, tagging: SideTags) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh(format!(
            "cell counts must be positive (nx = {nx}, ny = {ny})"
        )));
    }
    if !(domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(Error::InvalidMesh(format!(
            "degenerate domain {:?}",
            domain
        )));
    }
    if Side::ALL
        .iter()
        .all(|&s| tagging.get(s) != BoundaryTag::Dirichlet)
    {
        return Err(Error::EmptyDirichletBoundary);
    }

    let hx = domain.width() / nx as f64;
    let hy = domain.height() / ny as f64;
    let vid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // pin the last row/column to the exact extents
            let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
            let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
            vertices.push([x, y]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            // diagonal towards the centre: cell-centre quadrant decides
            let left = 2 * i + 1 < nx;
            let lower = 2 * j + 1 < ny;
            if left == lower {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }

    // owner triangle of each boundary edge
    let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            owner.insert((a.min(b), a.max(b)), t);
        }
    }

    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    let mut push = |a: usize, b: usize, side: Side| {
        let pa: [f64; 2] = vertices[a];
        let pb: [f64; 2] = vertices[b];
        let length = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let normal = side.outward_normal();
        boundary.push(BoundarySegment {
            edge: [a, b],
            tag: tagging.get(side),
            side,
            normal,
            tangent: tangent_of(normal),
            length,
            triangle: owner[&(a.min(b), a.max(b))],
        });
    };
    for i in 0..nx {
        push(vid(i, 0), vid(i + 1, 0), Side::Bottom);
    }
    for j in 0..ny {
        push(vid(nx, j), vid(nx, j + 1), Side::Right);
    }
    for i in (0..nx).rev() {
        push(vid(i + 1, ny), vid(i, ny), Side::Top);
    }
    for j in (0..ny).rev() {
        push(vid(0, j + 1), vid(0, j), Side::Left);
    }

    Ok(Mesh {
        vertices,
        triangles,
        boundary,
        domain,
        nx,
        ny,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshIssue {
    NonPositiveArea { triangle: usize, area: f64 },
    /// A topological boundary edge has no tagged segment.
    IncompletePartition { edge: [usize; 2] },
    /// A segment does not lie on the topological boundary, or appears twice.
    SpuriousSegment { edge: [usize; 2] },
    OpenBoundaryLoop,
    BadFrame { segment: usize, detail: String },
    EmptyDirichlet,
    EulerCharacteristic { value: i64 },
    AreaMismatch { total: f64, expected: f64 },
}

impl fmt::Display for MeshIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshIssue::NonPositiveArea { triangle, area } => {
                write!(f, "triangle {triangle} has non-positive signed area {area:e}")
            }
            MeshIssue::IncompletePartition { edge } => write!(
                f,
                "boundary edge ({}, {}) carries no tag: incomplete Gamma_0/Gamma_1 partition",
                edge[0], edge[1]
            ),
            MeshIssue::SpuriousSegment { edge } => write!(
                f,
                "segment ({}, {}) is not a boundary edge or is listed twice",
                edge[0], edge[1]
            ),
            MeshIssue::OpenBoundaryLoop => f.write_str("boundary segments do not form one closed loop"),
            MeshIssue::BadFrame { segment, detail } => {
                write!(f, "segment {segment}: {detail}")
            }
            MeshIssue::EmptyDirichlet => f.write_str("Gamma_0 is empty"),
            MeshIssue::EulerCharacteristic { value } => {
                write!(f, "Euler characteristic V - E + F = {value}, expected 1")
            }
            MeshIssue::AreaMismatch { total, expected } => {
                write!(f, "triangle areas sum to {total}, domain area is {expected}")
            }
        }
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn contact_segments(&self) -> impl Iterator<Item = &BoundarySegment> {
        self.boundary.iter().filter(|s| s.tag == BoundaryTag::Contact)
    }

    pub fn contact_length(&self) -> f64 {
        self.contact_segments().map(|s| s.length).sum()
    }

    pub fn has_contact(&self) -> bool {
        self.contact_segments().next().is_some()
    }

    /// Unique undirected edges in first-seen order over triangles.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = BTreeMap::new();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if seen.insert(key, out.len()).is_none() {
                    out.push([key.0, key.1]);
                }
            }
        }
        out
    }

    pub fn cell_size(&self) -> [f64; 2] {
        [
            self.domain.width() / self.nx as f64,
            self.domain.height() / self.ny as f64,
        ]
    }

    /// Locates `p` and returns the containing triangle with barycentric
    /// coordinates. Points slightly outside the domain are clamped to it.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let [hx, hy] = self.cell_size();
        let d = &self.domain;
        let tol = 1e-10 * (d.width() + d.height());
        if p[0] < d.x0 - tol || p[0] > d.x1 + tol || p[1] < d.y0 - tol || p[1] > d.y1 + tol {
            return None;
        }
        let i = (((p[0] - d.x0) / hx).floor().max(0.0) as usize).min(self.nx - 1);
        let j = (((p[1] - d.y0) / hy).floor().max(0.0) as usize).min(self.ny - 1);
        let cell = j * self.nx + i;
        let mut best = None;
        let mut best_min = f64::NEG_INFINITY;
        for t in [2 * cell, 2 * cell + 1] {
            let bary = self.barycentric(t, p);
            let m = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if m > best_min {
                best_min = m;
                best = Some((t, bary));
            }
        }
        best
    }

    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let area = signed_area(a, b, c);
        let l0 = signed_area(p, b, c) / area;
        let l1 = signed_area(a, p, c) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Plain-text listing: one record per line, index based.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# mesh nx={} ny={} vertices={} triangles={} boundary_edges={}",
            self.nx,
            self.ny,
            self.n_vertices(),
            self.n_triangles(),
            self.boundary.len()
        );
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "node {i} {:.17e} {:.17e}", v[0], v[1]);
        }
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "element {i} {} {} {}", t[0], t[1], t[2]);
        }
        for (i, s) in self.boundary.iter().enumerate() {
            let _ = writeln!(
                out,
                "edge {i} {} {} {} {}",
                s.edge[0],
                s.edge[1],
                s.tag,
                s.side.name()
            );
        }
        out
    }
}

/// Checks every mesh invariant; an empty report means the mesh is valid.
pub fn validate_mesh(mesh: &Mesh) -> Vec<MeshIssue> {
    let mut issues = Vec::new();

    let mut total_area = 0.0;
    for t in 0..mesh.n_triangles() {
        let area = mesh.triangle_area(t);
        total_area += area;
        if !(area > 0.0) {
            issues.push(MeshIssue::NonPositiveArea { triangle: t, area });
        }
    }
    let expected = mesh.domain.area();
    if (total_area - expected).abs() > 1e-12 * expected {
        issues.push(MeshIssue::AreaMismatch {
            total: total_area,
            expected,
        });
    }

    // topological boundary: edges used by exactly one triangle
    let mut count: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let e = count.entry((a.min(b), a.max(b))).or_insert((0, t));
            e.0 += 1;
        }
    }
    let n_edges = count.len() as i64;
    let chi = mesh.n_vertices() as i64 - n_edges + mesh.n_triangles() as i64;
    if chi != 1 {
        issues.push(MeshIssue::EulerCharacteristic { value: chi });
    }

    let mut listed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in &mesh.boundary {
        let key = (s.edge[0].min(s.edge[1]), s.edge[0].max(s.edge[1]));
        *listed.entry(key).or_insert(0) += 1;
    }
    for (&(a, b), &(n, _)) in &count {
        if n == 1 && !listed.contains_key(&(a, b)) {
            issues.push(MeshIssue::IncompletePartition { edge: [a, b] });
        }
    }
    for (&(a, b), &n) in &listed {
        let on_boundary = count.get(&(a, b)).map_or(false, |&(c, _)| c == 1);
        if n > 1 || !on_boundary {
            issues.push(MeshIssue::SpuriousSegment { edge: [a, b] });
        }
    }

    // closed loop: each segment ends where the next one starts
    let segs = &mesh.boundary;
    let closed = !segs.is_empty()
        && (0..segs.len()).all(|i| segs[i].edge[1] == segs[(i + 1) % segs.len()].edge[0]);
    if !closed {
        issues.push(MeshIssue::OpenBoundaryLoop);
    }

    for (i, s) in segs.iter().enumerate() {
        let n = s.normal;
        let t = s.tangent;
        let nn = (n[0] * n[0] + n[1] * n[1]).sqrt();
        let tt = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let dot = n[0] * t[0] + n[1] * t[1];
        if (nn - 1.0).abs() > 1e-14 || (tt - 1.0).abs() > 1e-14 || dot.abs() > 1e-14 {
            issues.push(MeshIssue::BadFrame {
                segment: i,
                detail: format!("|nu| = {nn}, |tau| = {tt}, nu.tau = {dot:e}"),
            });
            continue;
        }
        if t != tangent_of(n) {
            issues.push(MeshIssue::BadFrame {
                segment: i,
                detail: "tangent is not (nu_2, -nu_1)".into(),
            });
        }
        if s.triangle >= mesh.n_triangles() {
            issues.push(MeshIssue::BadFrame {
                segment: i,
                detail: "owner triangle out of range".into(),
            });
            continue;
        }
        // outward: the opposite vertex lies on the inner side
        let tri = mesh.triangles[s.triangle];
        let [a, b] = s.edge.map(|v| mesh.vertices[v]);
        if let Some(&opp) = tri.iter().find(|&&v| v != s.edge[0] && v != s.edge[1]) {
            let c = mesh.vertices[opp];
            let mid = [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
            let out = (mid[0] - c[0]) * n[0] + (mid[1] - c[1]) * n[1];
            if !(out > 0.0) {
                issues.push(MeshIssue::BadFrame {
                    segment: i,
                    detail: "normal points into the domain".into(),
                });
            }
        }
    }

    if !segs.iter().any(|s| s.tag == BoundaryTag::Dirichlet) {
        issues.push(MeshIssue::EmptyDirichlet);
    }
    issues
}
