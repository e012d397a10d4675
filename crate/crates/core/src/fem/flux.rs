use super::assemble::Assembled;
use super::ldl::solve_sparse;
use super::sparse::SparseSymMatrix;
use super::trace::BoundaryTrace;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// Nodes on `Γ₀`, ordered by `x₁`.
pub fn gamma0_nodes(mesh: &Mesh) -> Vec<usize> {
    let mut nodes = mesh.tagged_nodes(&[BoundaryTag::Gamma0]);
    nodes.sort_by(|&a, &b| mesh.vertices[a][0].total_cmp(&mesh.vertices[b][0]));
    nodes
}

/// One-dimensional P1 mass matrix on `Γ₀` in the order of `nodes`.
pub fn gamma0_mass(mesh: &Mesh, nodes: &[usize]) -> SparseSymMatrix {
    let mut local = vec![usize::MAX; mesh.n_vertices()];
    for (k, &i) in nodes.iter().enumerate() {
        local[i] = k;
    }
    let mut t = Vec::new();
    for e in mesh.boundary_edges.iter().filter(|e| e.tag == BoundaryTag::Gamma0) {
        let [a, b] = e.nodes.map(|i| local[i]);
        let len = (mesh.vertices[e.nodes[1]][0] - mesh.vertices[e.nodes[0]][0]).abs();
        t.extend([(a, a, len / 3.0), (b, b, len / 3.0), (a, b, len / 6.0), (b, a, len / 6.0)]);
    }
    SparseSymMatrix::from_triplets(nodes.len(), &t)
}

/// Variational recovery of `∂u/∂x₂` on `Γ₀` for `−Δu − λu = f`.
///
/// The weak residual `K u − λ M u − M f` tested against the boundary hat
/// functions equals `∫_{Γ₀} ∂u/∂ν ψ_i`, with `∂/∂ν = −∂/∂x₂` there.
pub fn boundary_flux_gamma0(
    mesh: &Mesh,
    asm: &Assembled,
    u: &[f64],
    lambda: f64,
    f: Option<&[f64]>,
) -> Result<BoundaryTrace> {
    let nodes = gamma0_nodes(mesh);
    if nodes.len() < 2 {
        return Err(Error::InvalidMesh("mesh has no Gamma0 boundary".into()));
    }
    let r = weak_residual(asm, u, lambda, f);
    let rhs: Vec<f64> = nodes.iter().map(|&i| r[i]).collect();
    let g = solve_sparse(&gamma0_mass(mesh, &nodes), &rhs)?;
    BoundaryTrace::new(nodes.iter().map(|&i| mesh.vertices[i][0]).collect(), g.iter().map(|v| -v).collect())
}

/// `K u − λ M u − M f`.
pub fn weak_residual(asm: &Assembled, u: &[f64], lambda: f64, f: Option<&[f64]>) -> Vec<f64> {
    let ku = asm.k.mul_vec(u);
    let mu = asm.m.mul_vec(u);
    let mf = f.map(|f| asm.m.mul_vec(f));
    (0..u.len())
        .map(|i| ku[i] - lambda * mu[i] - mf.as_ref().map_or(0.0, |v| v[i]))
        .collect()
}
