use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Stiffness and mass matrices of P1 elements on a mesh.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub k: SparseSymMatrix,
    pub m: SparseSymMatrix,
}

/// Gradients of the three hat functions and the triangle area.
pub fn p1_gradients(v: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let [a, b, c] = v;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let area = 0.5 * det;
    let g = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    (g, area)
}

fn pattern(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut pat = vec![Vec::new(); mesh.n_vertices()];
    for t in &mesh.triangles {
        for &i in t {
            pat[i].extend_from_slice(t);
        }
    }
    for row in &mut pat {
        row.sort_unstable();
        row.dedup();
    }
    pat
}

/// Exact element integrals, accumulated triangle by triangle in mesh order.
pub fn assemble(mesh: &Mesh) -> Assembled {
    let pat = pattern(mesh);
    let mut k = SparseSymMatrix::with_pattern(&pat);
    let mut m = SparseSymMatrix::with_pattern(&pat);
    for tri in &mesh.triangles {
        let (g, area) = p1_gradients(tri.map(|i| mesh.vertices[i]));
        for a in 0..3 {
            for b in 0..3 {
                let kab = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                let mab = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                k.add(tri[a], tri[b], kab);
                m.add(tri[a], tri[b], mab);
            }
        }
    }
    Assembled { k, m }
}

/// Assembly over the triangles selected by `keep`.
pub fn assemble_subset(mesh: &Mesh, keep: impl Fn(usize) -> bool) -> Assembled {
    let sub = Mesh {
        vertices: mesh.vertices.clone(),
        triangles: (0..mesh.triangles.len()).filter(|&t| keep(t)).map(|t| mesh.triangles[t]).collect(),
        boundary_edges: Vec::new(),
        grid: None,
    };
    let mut pat = pattern(&sub);
    for (i, row) in pat.iter_mut().enumerate() {
        if row.is_empty() {
            row.push(i);
        }
    }
    let mut k = SparseSymMatrix::with_pattern(&pat);
    let mut m = SparseSymMatrix::with_pattern(&pat);
    for tri in &sub.triangles {
        let (g, area) = p1_gradients(tri.map(|i| mesh.vertices[i]));
        for a in 0..3 {
            for b in 0..3 {
                k.add(tri[a], tri[b], area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                m.add(tri[a], tri[b], area / 12.0 * if a == b { 2.0 } else { 1.0 });
            }
        }
    }
    Assembled { k, m }
}

/// `∫ f φ_i` for a P1 field `f` (exact: `M f`).
pub fn load_p1(asm: &Assembled, f: &[f64]) -> Vec<f64> {
    asm.m.mul_vec(f)
}

/// `∫ g φ_i` over the edges carrying `tag`, for a pointwise `g`, by Simpson's
/// rule per edge (exact for quadratic `g·φ`).
pub fn edge_load(mesh: &Mesh, tag: BoundaryTag, g: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for e in mesh.boundary_edges.iter().filter(|e| e.tag == tag) {
        let [a, b] = e.nodes;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let (ga, gm, gb) = (g(pa), g(mid), g(pb));
        out[a] += len / 6.0 * (ga + 2.0 * gm);
        out[b] += len / 6.0 * (gb + 2.0 * gm);
    }
    out
}

/// `∫ r φ_i` for a pointwise source, with the 3-point edge-midpoint rule
/// (exact for linear `r`).
pub fn source_load(mesh: &Mesh, r: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        let p = tri.map(|i| mesh.vertices[i]);
        let mid = |a: usize, b: usize| [0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1])];
        let mids = [mid(0, 1), mid(1, 2), mid(2, 0)];
        let vals = mids.map(&r);
        // φ_a is ½ at the two midpoints on its edges, 0 at the opposite one.
        out[tri[0]] += area / 3.0 * 0.5 * (vals[0] + vals[2]);
        out[tri[1]] += area / 3.0 * 0.5 * (vals[0] + vals[1]);
        out[tri[2]] += area / 3.0 * 0.5 * (vals[1] + vals[2]);
    }
    out
}

/// `∫ (∂f/∂x₁) φ_i` for a P1 field `f` (elementwise constant gradient).
pub fn dx1_load(mesh: &Mesh, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for tri in &mesh.triangles {
        let (g, area) = p1_gradients(tri.map(|i| mesh.vertices[i]));
        let d1: f64 = (0..3).map(|a| g[a][0] * f[tri[a]]).sum();
        for &i in tri {
            out[i] += d1 * area / 3.0;
        }
    }
    out
}

/// System with the nodes on Dirichlet edges removed.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub k: SparseSymMatrix,
    pub m: SparseSymMatrix,
    /// Reduced index → full index.
    pub free: Vec<usize>,
    /// Full index → reduced index.
    pub map: Vec<Option<usize>>,
}

impl ReducedSystem {
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.map.len()];
        for (r, &i) in self.free.iter().enumerate() {
            full[i] = reduced[r];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }
}

pub fn free_dofs(mesh: &Mesh, tags: &[BoundaryTag]) -> Result<(Vec<usize>, Vec<Option<usize>>)> {
    if tags.is_empty() {
        return Err(Error::InvalidArgument("no Dirichlet tags given".into()));
    }
    let fixed = mesh.tagged_nodes(tags);
    let mut is_fixed = vec![false; mesh.n_vertices()];
    for i in fixed {
        is_fixed[i] = true;
    }
    let free: Vec<usize> = (0..mesh.n_vertices()).filter(|&i| !is_fixed[i]).collect();
    if free.is_empty() {
        return Err(Error::EmptySystem);
    }
    let mut map = vec![None; mesh.n_vertices()];
    for (r, &i) in free.iter().enumerate() {
        map[i] = Some(r);
    }
    Ok((free, map))
}

pub fn apply_dirichlet(asm: &Assembled, mesh: &Mesh, tags: &[BoundaryTag]) -> Result<ReducedSystem> {
    let (free, map) = free_dofs(mesh, tags)?;
    Ok(ReducedSystem { k: asm.k.restrict(&free, &map), m: asm.m.restrict(&free, &map), free, map })
}
