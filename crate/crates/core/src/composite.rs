//! Inner fields `v₁, v₂, v₃`, the composite approximation
//!
//! `ũ = (u₀ + εu₁ + ε²u₂) χ(x₂/ε^β) + (εv₁ + ε²v₂ + ε³v₃)(1 − χ(x₂/ε^β))`
//!
//! and the residual of `(ũ, λ̃)` on a mesh of `Ω^ε`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::cell::{solve_cell_problems_on, switch, CellField, CellSolution};
use crate::corrector::{correct, BranchCorrection, Corrections, LayerConstants, ModalBackend, ModalField, OuterBackend};
use crate::error::{Error, Result};
use crate::fem::assemble::{free_dofs, p1_gradients};
use crate::fem::{assemble, Assembled, CosineSeries};
use crate::mesh::{mesh_perturbed, mesh_strip_levels, perturbed_bulk_levels, BoundaryTag, EpsilonParam, LayerMeshSpec, Mesh};
use crate::model::Model;
use crate::profile::Profile;

/// Cut-off `χ` and its derivative.
pub fn cutoff(s: f64) -> (f64, f64) {
    let [v, d, _] = switch(s);
    (v, d)
}

/// Strip whose levels are those of the `Ω^ε` mesh divided by `ε`, cut at the
/// first level at or above `t_max`. Nodes and triangles of the layer then
/// coincide with the scaled `Ω^ε` mesh, period by period.
pub fn matched_strip(p: &Profile, eps: EpsilonParam, spec: &LayerMeshSpec, t_max: f64) -> Result<Mesh> {
    let levels = perturbed_bulk_levels(p, eps, spec);
    let mut xi: Vec<f64> = Vec::new();
    for l in levels {
        let y = l / eps.eps;
        xi.push(y);
        if y >= t_max.max(3.0) {
            break;
        }
    }
    let m = 1usize << spec.refine;
    mesh_strip_levels(p, 2 * spec.cells_per_half_period * m, spec.rows_in_layer() * m, &xi)
}

/// `λ₀ + Σ_{i≤order} εⁱλᵢ`.
pub fn predicted_lambda<F>(branch: &BranchCorrection<F>, eps: f64, order: usize) -> Result<f64> {
    if order > 3 {
        return Err(Error::InvalidArgument(format!("prediction order {order} > 3")));
    }
    Ok(branch.predict(eps, order))
}

/// One term `factor · a⁽ᵐ⁾(x₁) · W(ξ)` of an inner field.
struct Term<'a> {
    series: &'a CosineSeries,
    order: u32,
    factor: f64,
    field: &'a CellField,
}

/// Everything needed to evaluate `ũ` for one branch.
pub struct Composite<'a> {
    pub eps: f64,
    pub beta: f64,
    pub lambda0: f64,
    /// Order-3 eigenvalue prediction.
    pub lambda_pred: f64,
    outer: &'a ModalBackend,
    u: [ModalField; 3],
    du: [ModalField; 3],
    cell: &'a CellSolution,
    a01: CosineSeries,
    a11: CosineSeries,
    a21: CosineSeries,
}

impl<'a> Composite<'a> {
    /// Composite for branch index `l` (0 or 1).
    pub fn new(
        outer: &'a ModalBackend,
        corr: &Corrections<ModalField>,
        l: usize,
        cell: &'a CellSolution,
        eps: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!("beta = {beta} outside (0, 1)")));
        }
        let branch = corr
            .branches
            .get(l)
            .ok_or_else(|| Error::InvalidArgument(format!("branch index {l} (expected 0 or 1)")))?;
        let a01 = outer.traces()[l].clone();
        let u = [outer.basis(l), branch.u1.clone(), branch.u2.clone()];
        let du = [outer.dx2(&u[0]), outer.dx2(&u[1]), outer.dx2(&u[2])];
        Ok(Composite {
            eps,
            beta,
            lambda0: branch.lambda[0],
            lambda_pred: branch.predict(eps, 3),
            outer,
            u,
            du,
            cell,
            a01,
            a11: branch.alpha11.clone(),
            a21: branch.alpha21.clone(),
        })
    }

    fn terms(&self, i: usize) -> Vec<Term<'_>> {
        let c = self.cell;
        let t = |series, order, factor, field| Term { series, order, factor, field };
        match i {
            1 => vec![t(&self.a01, 0, 1.0, &c.x)],
            2 => vec![t(&self.a11, 0, 1.0, &c.x), t(&self.a01, 1, -2.0, &c.x_tilde)],
            _ => vec![
                t(&self.a21, 0, 1.0, &c.x),
                t(&self.a11, 1, -2.0, &c.x_tilde),
                t(&self.a01, 2, 4.0, &c.x_i),
                t(&self.a01, 2, -1.0, &c.x_ii),
                t(&self.a01, 0, -self.lambda0, &c.x_ii),
            ],
        }
    }

    /// `vᵢ(x/ε; x₁)` and its gradient in `x`.
    pub fn inner_v(&self, i: usize, x: [f64; 2]) -> (f64, [f64; 2]) {
        let xi = [x[0] / self.eps, x[1] / self.eps];
        let (mut v, mut g) = (0.0, [0.0; 2]);
        for t in self.terms(i) {
            let a = t.factor * t.series.eval_derivative(x[0], t.order);
            let da = t.factor * t.series.eval_derivative(x[0], t.order + 1);
            let (w, gw) = t.field.eval_grad(xi);
            v += a * w;
            g[0] += da * w + a * gw[0] / self.eps;
            g[1] += a * gw[1] / self.eps;
        }
        (v, g)
    }

    /// `u₀ + εu₁ + ε²u₂` and its gradient.
    pub fn outer_sum(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let (mut v, mut g, mut e) = (0.0, [0.0; 2], 1.0);
        for (u, du) in self.u.iter().zip(&self.du) {
            let (a, ga) = self.outer.eval_grad(u, du, x);
            v += e * a;
            g[0] += e * ga[0];
            g[1] += e * ga[1];
            e *= self.eps;
        }
        (v, g)
    }

    /// `εv₁ + ε²v₂ + ε³v₃` and its gradient.
    pub fn inner_sum(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let (mut v, mut g, mut e) = (0.0, [0.0; 2], self.eps);
        for i in 1..=3 {
            let (a, ga) = self.inner_v(i, x);
            v += e * a;
            g[0] += e * ga[0];
            g[1] += e * ga[1];
            e *= self.eps;
        }
        (v, g)
    }

    /// `ũ(x)` and its gradient.
    pub fn eval_grad(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let scale = self.eps.powf(self.beta);
        let (chi, dchi) = cutoff(x[1] / scale);
        let zero = (0.0, [0.0; 2]);
        let (o, go) = if chi > 0.0 { self.outer_sum(x) } else { zero };
        let (n, gn) = if chi < 1.0 { self.inner_sum(x) } else { zero };
        let v = chi * o + (1.0 - chi) * n;
        let g = [
            chi * go[0] + (1.0 - chi) * gn[0],
            chi * go[1] + (1.0 - chi) * gn[1] + dchi / scale * (o - n),
        ];
        (v, g)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.eval_grad(x).0
    }

    /// Composite value at `x`, rejecting points outside `Ω^ε`.
    pub fn composite_u(&self, p: &Profile, x: [f64; 2]) -> Result<f64> {
        let bottom = self.eps * p.value(x[0] / self.eps);
        if x[0].abs() > 0.5 + 1e-12 || x[1] > 1.0 + 1e-12 || x[1] < bottom - 1e-12 {
            return Err(Error::InvalidArgument(format!("point {x:?} outside the perturbed domain")));
        }
        Ok(self.eval(x))
    }
}

/// Seven-point rule, exact for degree 5: (barycentric, weight).
pub(crate) const DUNAVANT5: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W1: f64 = 0.132_394_152_788_506;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// How the residual tests the composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualMode {
    /// `∫∇ũ·∇φᵢ − λ̃ ũ φᵢ` by quadrature on the exact composite.
    #[default]
    Weak,
    /// `(K − λ̃M) I ũ` on the nodal interpolant.
    Interpolant,
}

/// `sqrt(Σ rᵢ² / mᵢ)` over nodes off `Γ_ε`, with `mᵢ` the lumped mass.
pub fn dual_norm(mesh: &Mesh, asm: &Assembled, r: &[f64]) -> Result<f64> {
    let (free, _) = free_dofs(mesh, &[BoundaryTag::GammaEps])?;
    let lumped = asm.m.row_sums();
    Ok(free.iter().map(|&i| r[i] * r[i] / lumped[i]).sum::<f64>().sqrt())
}

/// Discrete residual `(K − λM)u` of a nodal field.
pub fn discrete_residual_norm(mesh: &Mesh, asm: &Assembled, u: &[f64], lambda: f64) -> Result<f64> {
    let ku = asm.k.mul_vec(u);
    let mu = asm.m.mul_vec(u);
    let r: Vec<f64> = ku.iter().zip(&mu).map(|(a, b)| a - lambda * b).collect();
    dual_norm(mesh, asm, &r)
}

/// Residual of `(ũ, λ̃)` on `mesh` (a mesh of `Ω^ε`).
pub fn residual_norm(c: &Composite, mesh: &Mesh, asm: &Assembled, mode: ResidualMode) -> Result<f64> {
    match mode {
        ResidualMode::Interpolant => {
            let u: Vec<f64> = mesh.vertices.par_iter().map(|&x| c.eval(x)).collect();
            discrete_residual_norm(mesh, asm, &u, c.lambda_pred)
        }
        ResidualMode::Weak => {
            let local: Vec<[f64; 3]> = mesh
                .triangles
                .par_iter()
                .map(|tri| {
                    let v = tri.map(|i| mesh.vertices[i]);
                    let (g, area) = p1_gradients(v);
                    let mut out = [0.0; 3];
                    for (b, w) in DUNAVANT5 {
                        let x = [0, 1].map(|d| b[0] * v[0][d] + b[1] * v[1][d] + b[2] * v[2][d]);
                        let (u, gu) = c.eval_grad(x);
                        for a in 0..3 {
                            out[a] += w * area * (gu[0] * g[a][0] + gu[1] * g[a][1] - c.lambda_pred * u * b[a]);
                        }
                    }
                    out
                })
                .collect();
            let mut r = vec![0.0; mesh.n_vertices()];
            for (tri, l) in mesh.triangles.iter().zip(&local) {
                for a in 0..3 {
                    r[tri[a]] += l[a];
                }
            }
            dual_norm(mesh, asm, &r)
        }
    }
}

/// Settings for [`composite_residual`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ResidualOptions {
    pub mesh: LayerMeshSpec,
    /// Height (in `ξ₂`) of the matched strip.
    pub t_max: f64,
    pub mode: ResidualMode,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions { mesh: LayerMeshSpec::default(), t_max: 8.0, mode: ResidualMode::Weak }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResidualReport {
    pub eps: f64,
    pub beta: f64,
    pub norm: f64,
    pub branch: usize,
    pub lambda_pred: f64,
}

/// Cell fields on the matched strip, the corrector recurrence with the
/// strip's own constants, and the residual of branch index `l` on `Ω^ε`.
pub fn composite_residual(model: &Model, eps: EpsilonParam, l: usize, beta: f64, opts: &ResidualOptions) -> Result<ResidualReport> {
    let strip = Arc::new(matched_strip(&model.profile, eps, &opts.mesh, opts.t_max)?);
    let cell = solve_cell_problems_on(strip)?;
    let corr = correct(&model.backend, LayerConstants { c: cell.c, c_i: cell.c_i, c_ii: cell.c_ii })?;
    let comp = Composite::new(&model.backend, &corr, l, &cell, eps.eps, beta)?;
    let mesh = mesh_perturbed(&model.profile, eps, &opts.mesh)?;
    let asm = assemble(&mesh);
    let norm = residual_norm(&comp, &mesh, &asm, opts.mode)?;
    Ok(ResidualReport { eps: eps.eps, beta, norm, branch: l + 1, lambda_pred: comp.lambda_pred })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_limits() {
        assert_eq!(cutoff(0.5), (0.0, 0.0));
        assert_eq!(cutoff(2.5), (1.0, 0.0));
        assert!((cutoff(1.5).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadrature_degree() {
        let s: f64 = DUNAVANT5.iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-12);
        // ∫ λ₁⁵ over the reference triangle (area ½) = 2·5!/7! · ½.
        let q: f64 = DUNAVANT5.iter().map(|(b, w)| w * b[0].powi(5)).sum();
        assert!((q - 2.0 * 120.0 / 5040.0).abs() < 1e-12);
    }
}
