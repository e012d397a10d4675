//! Structured, boundary-fitted triangulations of the limit rectangle, the
//! perturbed domain and the truncated cell strip.
//!
//! Every mesh here is a logically rectangular grid of `nx × ny` quads. The
//! lowest `layer_rows` rows follow the wall, `y = b(x)(1 − t)`, and the rows
//! above sit on flat levels. Quad diagonals are mirrored about the centre of
//! each period so the discrete problems keep the reflection symmetry exactly.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum BoundaryTag {
    GammaEps,
    Gamma0,
    Gamma1,
    Gamma2Eps,
    Gamma3Eps,
    StripBottom,
    StripTop,
    StripSideL,
    StripSideR,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 9] = [
        BoundaryTag::GammaEps,
        BoundaryTag::Gamma0,
        BoundaryTag::Gamma1,
        BoundaryTag::Gamma2Eps,
        BoundaryTag::Gamma3Eps,
        BoundaryTag::StripBottom,
        BoundaryTag::StripTop,
        BoundaryTag::StripSideL,
        BoundaryTag::StripSideR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::GammaEps => "GammaEps",
            BoundaryTag::Gamma0 => "Gamma0",
            BoundaryTag::Gamma1 => "Gamma1",
            BoundaryTag::Gamma2Eps => "Gamma2eps",
            BoundaryTag::Gamma3Eps => "Gamma3eps",
            BoundaryTag::StripBottom => "StripBottom",
            BoundaryTag::StripTop => "StripTop",
            BoundaryTag::StripSideL => "StripSideL",
            BoundaryTag::StripSideR => "StripSideR",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BoundaryTag::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidMesh(format!("unknown tag {s:?}")))
    }
}

/// `ε = 1/(2N+1)`; the only way an ε is ever made.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpsilonParam {
    pub n: u32,
    pub eps: f64,
}

impl EpsilonParam {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        Ok(EpsilonParam { n, eps: 1.0 / (2 * n + 1) as f64 })
    }

    pub fn periods(&self) -> u32 {
        2 * self.n + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Grid metadata kept by the structured generators for point location.
#[derive(Debug, Clone)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub dx: f64,
    pub layer_rows: usize,
    /// `true` when quad column `i` is split along `(i,j)–(i+1,j+1)`.
    pub slash: Vec<bool>,
}

impl GridInfo {
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub grid: Option<GridInfo>,
}

/// Knobs for the perturbed-domain mesh.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LayerMeshSpec {
    pub cells_per_half_period: usize,
    pub h_bulk: f64,
    pub grading: f64,
    /// Rows in the curved layer; `0` means `cells_per_half_period`.
    pub layer_rows: usize,
    /// Number of uniform midpoint refinements applied on top.
    pub refine: u32,
}

impl Default for LayerMeshSpec {
    fn default() -> Self {
        LayerMeshSpec { cells_per_half_period: 8, h_bulk: 0.025, grading: 1.15, layer_rows: 0, refine: 0 }
    }
}

impl LayerMeshSpec {
    pub fn rows_in_layer(&self) -> usize {
        if self.layer_rows == 0 {
            self.cells_per_half_period
        } else {
            self.layer_rows
        }
    }

    pub fn refined(&self) -> Self {
        LayerMeshSpec { refine: self.refine + 1, ..*self }
    }
}

/// Knobs for the truncated strip.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct StripSpec {
    pub cells_per_half_period: usize,
    pub grading: f64,
    /// Cap on the vertical spacing; `0` means `1/cells_per_half_period`.
    pub h_max: f64,
    pub layer_rows: usize,
    pub refine: u32,
}

impl Default for StripSpec {
    fn default() -> Self {
        StripSpec { cells_per_half_period: 8, grading: 1.15, h_max: 0.0, layer_rows: 0, refine: 0 }
    }
}

impl StripSpec {
    fn rows_in_layer(&self) -> usize {
        if self.layer_rows == 0 {
            self.cells_per_half_period
        } else {
            self.layer_rows
        }
    }

    fn cap(&self) -> f64 {
        if self.h_max > 0.0 {
            self.h_max
        } else {
            1.0 / self.cells_per_half_period as f64
        }
    }

    pub fn refined(&self) -> Self {
        StripSpec { refine: self.refine + 1, ..*self }
    }
}

/// Levels from 0 to `top`: first step `s0`, growing by `grading`, capped at
/// `h_max`. Only the last interval is adjusted to land on `top`.
pub fn graded_levels(s0: f64, grading: f64, h_max: f64, top: f64) -> Vec<f64> {
    let mut levels = vec![0.0];
    let mut s = s0.min(h_max);
    loop {
        let y = *levels.last().unwrap();
        if top - y <= 1.5 * s {
            levels.push(top);
            return levels;
        }
        levels.push(y + s);
        s = (s * grading).min(h_max);
    }
}

/// Insert `2^r − 1` equally spaced points in every interval.
pub fn subdivide(levels: &[f64], r: u32) -> Vec<f64> {
    let m = 1usize << r;
    let mut out = Vec::with_capacity((levels.len() - 1) * m + 1);
    for w in levels.windows(2) {
        for q in 0..m {
            let t = q as f64 / m as f64;
            out.push(if q == 0 { w[0] } else { w[0] + t * (w[1] - w[0]) });
        }
    }
    out.push(*levels.last().unwrap());
    out
}

struct Tags {
    bottom: BoundaryTag,
    top: BoundaryTag,
    left: BoundaryTag,
    right: BoundaryTag,
}

fn structured(
    nx: usize,
    bottom: &dyn Fn(f64) -> f64,
    layer_rows: usize,
    levels: &[f64],
    slash: &dyn Fn(f64) -> bool,
    tags: Tags,
) -> Result<Mesh> {
    let ny = layer_rows + levels.len() - 1;
    // Columns span (−½, ½); this form is exactly antisymmetric.
    let xs: Vec<f64> = (0..=nx)
        .map(|i| (2.0 * i as f64 - nx as f64) / (2.0 * nx as f64))
        .collect();
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for &x in &xs {
            let y = if j < layer_rows {
                let t = j as f64 / layer_rows as f64;
                bottom(x) * (1.0 - t)
            } else {
                levels[j - layer_rows]
            };
            vertices.push([x, y]);
        }
    }
    let slash: Vec<bool> = (0..nx).map(|i| slash(0.5 * (xs[i] + xs[i + 1]))).collect();
    let grid = GridInfo { nx, ny, x0: -0.5, dx: 1.0 / nx as f64, layer_rows, slash };
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = grid.node(i, j);
            let b = grid.node(i + 1, j);
            let c = grid.node(i + 1, j + 1);
            let d = grid.node(i, j + 1);
            if grid.slash[i] {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge { nodes: [grid.node(i, 0), grid.node(i + 1, 0)], tag: tags.bottom });
        boundary_edges.push(BoundaryEdge { nodes: [grid.node(i, ny), grid.node(i + 1, ny)], tag: tags.top });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge { nodes: [grid.node(0, j), grid.node(0, j + 1)], tag: tags.left });
        boundary_edges.push(BoundaryEdge { nodes: [grid.node(nx, j), grid.node(nx, j + 1)], tag: tags.right });
    }
    let mesh = Mesh { vertices, triangles, boundary_edges, grid: Some(grid) };
    if let Some((t, a)) = mesh.min_area() {
        if a <= 0.0 {
            return Err(Error::InvalidMesh(format!("triangle {t} has nonpositive area {a:e}")));
        }
    }
    Ok(mesh)
}

/// Uniform triangulation of `Ω = (−½,½)×(0,1)` with about `1/h` cells per side.
pub fn mesh_limit_domain(h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h <= 0.5) {
        return Err(Error::InvalidArgument(format!("mesh size {h} outside (0, 1/2]")));
    }
    let n = (1.0 / h - 1e-9).ceil() as usize;
    let levels: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    structured(
        n,
        &|_| 0.0,
        0,
        &levels,
        &|xc| xc < 0.0,
        Tags {
            bottom: BoundaryTag::Gamma0,
            top: BoundaryTag::Gamma1,
            left: BoundaryTag::Gamma2Eps,
            right: BoundaryTag::Gamma3Eps,
        },
    )
}

fn period_slash(xi_center: f64) -> bool {
    xi_center - xi_center.round() < 0.0
}

/// Flat levels of the perturbed-domain mesh above `x₂ = 0`.
pub fn perturbed_bulk_levels(p: &Profile, eps: EpsilonParam, spec: &LayerMeshSpec) -> Vec<f64> {
    let s0 = eps.eps * p.max_depth() / spec.rows_in_layer() as f64;
    let coarse = graded_levels(s0, spec.grading, spec.h_bulk, 1.0);
    subdivide(&coarse, spec.refine)
}

/// Triangulation of `Ω^ε`: the rectangle plus the layer down to `εF(x₁/ε)`.
pub fn mesh_perturbed(p: &Profile, eps: EpsilonParam, spec: &LayerMeshSpec) -> Result<Mesh> {
    if spec.cells_per_half_period < 4 {
        return Err(Error::InvalidArgument("cells_per_half_period must be >= 4".into()));
    }
    if !(spec.h_bulk > 0.0) || !(spec.grading >= 1.0) {
        return Err(Error::InvalidArgument("h_bulk must be > 0 and grading >= 1".into()));
    }
    let e = eps.eps;
    let m = 1usize << spec.refine;
    let nx = eps.periods() as usize * 2 * spec.cells_per_half_period * m;
    let layer_rows = spec.rows_in_layer() * m;
    let levels = perturbed_bulk_levels(p, eps, spec);
    structured(
        nx,
        &|x| e * p.value(x / e),
        layer_rows,
        &levels,
        &|xc| period_slash(xc / e),
        Tags {
            bottom: BoundaryTag::GammaEps,
            top: BoundaryTag::Gamma1,
            left: BoundaryTag::Gamma2Eps,
            right: BoundaryTag::Gamma3Eps,
        },
    )
}

/// Convenience form with default grading and layer rows.
pub fn mesh_perturbed_domain(p: &Profile, eps: EpsilonParam, cells_per_half_period: usize, h_bulk: f64) -> Result<Mesh> {
    mesh_perturbed(p, eps, &LayerMeshSpec { cells_per_half_period, h_bulk, ..Default::default() })
}

/// Strip levels above `ξ₂ = 0` up to `t_top`.
pub fn strip_levels(p: &Profile, t_top: f64, spec: &StripSpec) -> Vec<f64> {
    let s0 = p.max_depth() / spec.rows_in_layer() as f64;
    let coarse = graded_levels(s0, spec.grading, spec.cap(), t_top);
    subdivide(&coarse, spec.refine)
}

/// One period of the cell strip, `F(ξ₁) < ξ₂ < T`.
pub fn mesh_strip_spec(p: &Profile, t_top: f64, spec: &StripSpec) -> Result<Mesh> {
    if !(t_top >= 3.0) {
        return Err(Error::InvalidArgument(format!("strip height {t_top} < 3")));
    }
    if !(spec.grading >= 1.0) || spec.cells_per_half_period < 1 {
        return Err(Error::InvalidArgument("grading must be >= 1".into()));
    }
    let levels = strip_levels(p, t_top, spec);
    let m = 1usize << spec.refine;
    mesh_strip_levels(p, 2 * spec.cells_per_half_period * m, spec.rows_in_layer() * m, &levels)
}

pub fn mesh_strip(p: &Profile, t_top: f64, cells_per_half_period: usize, grading: f64) -> Result<Mesh> {
    mesh_strip_spec(p, t_top, &StripSpec { cells_per_half_period, grading, ..Default::default() })
}

/// Strip with explicitly given flat levels (used to mirror a perturbed mesh
/// in cell coordinates).
pub fn mesh_strip_levels(p: &Profile, nx: usize, layer_rows: usize, levels: &[f64]) -> Result<Mesh> {
    if levels.len() < 2 || levels[0] != 0.0 {
        return Err(Error::InvalidArgument("strip levels must start at 0".into()));
    }
    structured(
        nx,
        &|x| p.value(x),
        layer_rows,
        levels,
        &period_slash,
        Tags {
            bottom: BoundaryTag::StripBottom,
            top: BoundaryTag::StripTop,
            left: BoundaryTag::StripSideL,
            right: BoundaryTag::StripSideR,
        },
    )
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    fn min_area(&self) -> Option<(usize, f64)> {
        (0..self.triangles.len())
            .map(|t| (t, self.triangle_area(t)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Vertices on edges carrying any of `tags`, sorted and unique.
    pub fn tagged_nodes(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| tags.contains(&e.tag))
            .flat_map(|e| e.nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Checks orientation, conformity and that tagged edges are exactly the
    /// topological boundary.
    pub fn validate(&self) -> Result<()> {
        if let Some((t, a)) = self.min_area() {
            if a <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} has area {a:e}")));
            }
        }
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some((e, c)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidMesh(format!("edge {e:?} shared by {c} triangles")));
        }
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary_edges {
            let [a, b] = e.nodes;
            *tagged.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        for (e, c) in &count {
            let t = tagged.get(e).copied().unwrap_or(0);
            if (*c == 1) != (t == 1) || t > 1 {
                return Err(Error::InvalidMesh(format!("edge {e:?}: {c} triangles, {t} tags")));
            }
        }
        if tagged.keys().any(|e| !count.contains_key(e)) {
            return Err(Error::InvalidMesh("tagged edge not in any triangle".into()));
        }
        Ok(())
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        match &self.grid {
            Some(g) => self.locate_grid(g, p),
            None => (0..self.triangles.len()).find_map(|t| {
                let b = self.barycentric(t, p);
                (b.iter().all(|&w| w >= -1e-12)).then_some((t, b))
            }),
        }
    }

    fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let area = signed_area(a, b, c);
        [signed_area(p, b, c) / area, signed_area(a, p, c) / area, signed_area(a, b, p) / area]
    }

    /// Like [`Mesh::locate`] on structured meshes, but points just outside the
    /// curved bottom or flat top go to the nearest row of their column, with
    /// barycentric coordinates extended linearly.
    pub fn locate_clamped(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let g = self.grid.as_ref()?;
        self.locate_grid_inner(g, p, true)
    }

    fn locate_grid(&self, g: &GridInfo, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        self.locate_grid_inner(g, p, false)
    }

    fn locate_grid_inner(&self, g: &GridInfo, p: [f64; 2], clamp: bool) -> Option<(usize, [f64; 3])> {
        let tol = 1e-12;
        let u = (p[0] - g.x0) / g.dx;
        if u < -tol || u > g.nx as f64 + tol {
            return None;
        }
        let i = (u.floor().max(0.0) as usize).min(g.nx - 1);
        let s = (u - i as f64).clamp(0.0, 1.0);
        let height = |j: usize| {
            (1.0 - s) * self.vertices[g.node(i, j)][1] + s * self.vertices[g.node(i + 1, j)][1]
        };
        let scale = 1.0 + height(g.ny).abs();
        if !clamp && (p[1] < height(0) - tol * scale || p[1] > height(g.ny) + tol * scale) {
            return None;
        }
        let (mut lo, mut hi) = (0usize, g.ny);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if height(mid) <= p[1] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let base = 2 * (lo * g.nx + i);
        let b0 = self.barycentric(base, p);
        let b1 = self.barycentric(base + 1, p);
        let worst = |b: &[f64; 3]| b.iter().copied().fold(f64::INFINITY, f64::min);
        if worst(&b0) >= worst(&b1) {
            Some((base, b0))
        } else {
            Some((base + 1, b1))
        }
    }

    /// P1 interpolation of nodal `values` at `p`; `None` outside the mesh.
    pub fn interpolate(&self, values: &[f64], p: [f64; 2]) -> Option<f64> {
        let (t, b) = self.locate(p)?;
        let tri = self.triangles[t];
        Some(b[0] * values[tri[0]] + b[1] * values[tri[1]] + b[2] * values[tri[2]])
    }

    pub fn to_text(&self) -> String {
        use fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "bedges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let nv = read_header(&mut lines, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f = read_fields(&mut lines, 2)?;
            vertices.push([parse_num::<f64>(f[0])?, parse_num::<f64>(f[1])?]);
        }
        let nt = read_header(&mut lines, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f = read_fields(&mut lines, 3)?;
            let t = [parse_num(f[0])?, parse_num(f[1])?, parse_num(f[2])?];
            if t.iter().any(|&i: &usize| i >= nv) {
                return Err(Error::InvalidMesh("triangle index out of range".into()));
            }
            triangles.push(t);
        }
        let nb = read_header(&mut lines, "bedges")?;
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let f = read_fields(&mut lines, 3)?;
            boundary_edges.push(BoundaryEdge { nodes: [parse_num(f[0])?, parse_num(f[1])?], tag: f[2].parse()? });
        }
        Ok(Mesh { vertices, triangles, boundary_edges, grid: None })
    }
}

fn read_header<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<usize> {
    let line = lines.next().ok_or_else(|| Error::InvalidMesh(format!("missing {name} header")))?;
    match line.split_once(' ') {
        Some((key, n)) if key == name => parse_num(n.trim()),
        _ => Err(Error::InvalidMesh(format!("expected {name} header, got {line:?}"))),
    }
}

fn read_fields<'a>(lines: &mut impl Iterator<Item = &'a str>, n: usize) -> Result<Vec<&'a str>> {
    let line = lines.next().ok_or_else(|| Error::InvalidMesh("unexpected end of input".into()))?;
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != n {
        return Err(Error::InvalidMesh(format!("expected {n} fields in {line:?}")));
    }
    Ok(f)
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::InvalidMesh(format!("bad number {s:?}")))
}
