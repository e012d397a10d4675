//! Outer correctors `u₁, u₂` and eigenvalue coefficients `λ₁, λ₂, λ₃` per
//! branch of the double eigenvalue.
//!
//! Each outer problem reads `−Δw − λ₀w = f` in `Ω`, `w = g` on `Γ₀`,
//! Neumann elsewhere, with `w` orthogonal to both cluster eigenfunctions.
//! It is solvable iff `∫_Ω f u₀ᵐ + ∫_{Γ₀} g ∂u₀ᵐ/∂x₂ = 0` for `m = 1, 2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::cell::CellConstants;
use crate::error::{Error, Result};
use crate::fem::assemble::free_dofs;
use crate::fem::{boundary_flux_gamma0, Assembled, CosineSeries, LdlFactor, SparseSymMatrix};
use crate::limit::{cluster_modes, EigenCluster, TRACE_MODES};
use crate::mesh::BoundaryTag;

pub const SOLVABILITY_TOL: f64 = 1e-8;

/// The three far-field constants the corrector formulas need.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LayerConstants {
    pub c: f64,
    pub c_i: f64,
    pub c_ii: f64,
}

impl From<&CellConstants> for LayerConstants {
    fn from(k: &CellConstants) -> Self {
        LayerConstants { c: k.c, c_i: k.c_i, c_ii: k.c_ii }
    }
}

/// A solver for the outer problems around one cluster.
pub trait OuterBackend {
    type Field: Clone;

    fn lambda0(&self) -> f64;
    /// `∂u₀ᵐ/∂x₂` on `Γ₀`.
    fn traces(&self) -> &[CosineSeries; 2];
    fn basis(&self, m: usize) -> Self::Field;
    /// `a·x + b·y`.
    fn lin(&self, a: f64, x: &Self::Field, b: f64, y: &Self::Field) -> Self::Field;
    fn inner_basis(&self, f: &Self::Field, m: usize) -> f64;
    /// Returns the solution and its `∂/∂x₂` trace on `Γ₀`.
    fn solve_raw(&self, f: &Self::Field, g: &CosineSeries) -> Result<(Self::Field, CosineSeries)>;

    /// Checks solvability, then solves.
    fn solve(&self, f: &Self::Field, g: &CosineSeries) -> Result<Solved<Self::Field>> {
        let tr = self.traces();
        let residues: Vec<f64> = (0..2).map(|m| self.inner_basis(f, m) + g.inner(&tr[m])).collect();
        if residues.iter().any(|r| !(r.abs() <= SOLVABILITY_TOL)) {
            return Err(Error::SolvabilityViolated { residues, tol: SOLVABILITY_TOL });
        }
        let (u, trace) = self.solve_raw(f, g)?;
        Ok(Solved { u, trace, residues: [residues[0], residues[1]] })
    }
}

#[derive(Debug, Clone)]
pub struct Solved<F> {
    pub u: F,
    pub trace: CosineSeries,
    pub residues: [f64; 2],
}

/// Everything computed for one branch.
#[derive(Debug, Clone)]
pub struct BranchCorrection<F> {
    pub branch: usize,
    /// `λ₀, λ₁, λ₂, λ₃`.
    pub lambda: [f64; 4],
    pub kappa1: f64,
    pub kappa2: f64,
    pub u1_tilde: F,
    pub u2_tilde: F,
    pub u1: F,
    pub u2: F,
    pub alpha11_tilde: CosineSeries,
    pub alpha21_tilde: CosineSeries,
    /// Traces of `u₁ = ũ₁ + κ₁u₀*` and `u₂ = ũ₂ + κ₂u₀*`.
    pub alpha11: CosineSeries,
    pub alpha21: CosineSeries,
    /// Dirichlet data of `u₁, u₂, u₃` on `Γ₀`.
    pub alpha10: CosineSeries,
    pub alpha20: CosineSeries,
    pub alpha30: CosineSeries,
    pub max_residue: f64,
}

impl<F> BranchCorrection<F> {
    /// `Σ_{i≤order} λᵢ εⁱ`.
    pub fn predict(&self, eps: f64, order: usize) -> f64 {
        self.lambda.iter().take(order.min(3) + 1).rev().fold(0.0, |acc, l| acc * eps + l)
    }
}

#[derive(Debug, Clone)]
pub struct Corrections<F> {
    pub lambda0: f64,
    pub constants: LayerConstants,
    pub branches: [BranchCorrection<F>; 2],
}

impl<F> Corrections<F> {
    pub fn coefficients(&self) -> [[f64; 4]; 2] {
        [self.branches[0].lambda, self.branches[1].lambda]
    }
}

/// `λ₁ = −C G_ll`.
pub fn lambda1(c: f64, g_ll: f64) -> f64 {
    -c * g_ll
}

pub const GAP_TOL: f64 = 1e-3;

fn nerav(g: f64, go: f64) -> Result<()> {
    let gap = (g - go).abs() / (g + go).abs().max(f64::MIN_POSITIVE);
    if gap >= GAP_TOL {
        Ok(())
    } else {
        Err(Error::NeravViolated { gap, tol: GAP_TOL })
    }
}

/// `(κ₁, λ₂)` from the trace `α̃₁₁` of the first corrector.
pub fn kappa1_lambda2(c: f64, at11: &CosineSeries, a0: &CosineSeries, a0o: &CosineSeries) -> Result<(f64, f64)> {
    let (g, go) = (a0.inner(a0), a0o.inner(a0o));
    nerav(g, go)?;
    Ok((at11.inner(a0o) / (g - go), -c * at11.inner(a0)))
}

/// `(λ₃, κ₂)` from the trace `α̃₂₁` of the second corrector.
#[allow(clippy::too_many_arguments)]
pub fn lambda3_kappa2(
    k: LayerConstants,
    lambda0: f64,
    lambda2: f64,
    kappa1: f64,
    at21: &CosineSeries,
    a0: &CosineSeries,
    a0o: &CosineSeries,
) -> Result<(f64, f64)> {
    let (g, go) = (a0.inner(a0), a0o.inner(a0o));
    nerav(g, go)?;
    let d2 = a0.second_derivative();
    let w = k.c_ii - 4.0 * k.c_i;
    let l3 = -k.c * at21.inner(a0) + w * d2.inner(a0) + lambda0 * k.c_ii * g;
    // κ₂ (λ₁ − λ₁*) = rhs, with λ₁ − λ₁* = −C (G_ll − G_oo); at C = 0 every
    // term of rhs carries a layer constant, so κ₂ = 0 when they all vanish.
    let den = lambda1(k.c, g) - lambda1(k.c, go);
    let rhs = -lambda2 * kappa1 - k.c * at21.inner(a0o) + w * d2.inner(a0o);
    let k2 = if den != 0.0 {
        rhs / den
    } else if rhs == 0.0 {
        0.0
    } else {
        return Err(Error::NeravViolated { gap: 0.0, tol: GAP_TOL });
    };
    Ok((l3, k2))
}

/// Dirichlet data for `u₃`.
pub fn alpha30(k: LayerConstants, lambda0: f64, at21: &CosineSeries, kappa2: f64, a0: &CosineSeries, a0o: &CosineSeries) -> CosineSeries {
    let d2 = a0.second_derivative();
    at21.lin(k.c, a0o, k.c * kappa2)
        .lin(1.0, &d2, 4.0 * k.c_i - k.c_ii)
        .lin(1.0, a0, -k.c_ii * lambda0)
}

/// Runs the recurrence for both branches.
pub fn correct<B: OuterBackend>(backend: &B, k: LayerConstants) -> Result<Corrections<B::Field>> {
    let lambda0 = backend.lambda0();
    let tr = backend.traces().clone();
    let mut out = Vec::with_capacity(2);
    for l in 0..2 {
        let o = 1 - l;
        let (a0, a0o) = (&tr[l], &tr[o]);
        let u0 = backend.basis(l);
        let u0o = backend.basis(o);
        let l1 = lambda1(k.c, a0.inner(a0));

        let alpha10 = a0.scale(k.c);
        let s1 = backend.solve(&backend.lin(l1, &u0, 0.0, &u0), &alpha10)?;
        let (kappa1, l2) = kappa1_lambda2(k.c, &s1.trace, a0, a0o)?;
        let u1 = backend.lin(1.0, &s1.u, kappa1, &u0o);
        let alpha11 = s1.trace.lin(1.0, a0o, kappa1);

        let alpha20 = alpha11.scale(k.c);
        let f2 = backend.lin(l1, &u1, l2, &u0);
        let s2 = backend.solve(&f2, &alpha20)?;
        let (l3, kappa2) = lambda3_kappa2(k, lambda0, l2, kappa1, &s2.trace, a0, a0o)?;
        let u2 = backend.lin(1.0, &s2.u, kappa2, &u0o);
        let alpha30 = alpha30(k, lambda0, &s2.trace, kappa2, a0, a0o);
        let max_residue = s1.residues.iter().chain(&s2.residues).fold(0.0f64, |m, r| m.max(r.abs()));

        out.push(BranchCorrection {
            branch: l + 1,
            lambda: [lambda0, l1, l2, l3],
            kappa1,
            kappa2,
            u1_tilde: s1.u,
            u2_tilde: s2.u,
            u1,
            u2,
            alpha21: s2.trace.lin(1.0, a0o, kappa2),
            alpha11,
            alpha11_tilde: s1.trace,
            alpha21_tilde: s2.trace,
            alpha10,
            alpha20,
            alpha30,
            max_residue,
        });
    }
    let b1 = out.pop().unwrap();
    let b0 = out.pop().unwrap();
    Ok(Corrections { lambda0, constants: k, branches: [b0, b1] })
}

/// Bordered P1 solve on the mesh of the cluster.
pub struct FemBackend<'a> {
    cluster: &'a EigenCluster,
    asm: &'a Assembled,
    traces: [CosineSeries; 2],
    a: SparseSymMatrix,
    lu: LdlFactor,
    free: Vec<usize>,
    gamma0: Vec<usize>,
    /// `M u₀ᵐ`, full length.
    mb: [Vec<f64>; 2],
    /// `A⁻¹ (M u₀ᵐ)_free`.
    z: [Vec<f64>; 2],
    schur: nalgebra::Matrix2<f64>,
}

impl<'a> FemBackend<'a> {
    pub fn new(cluster: &'a EigenCluster, asm: &'a Assembled) -> Result<Self> {
        let traces = cluster.traces()?.clone();
        let mesh = &cluster.mesh;
        let (free, map) = free_dofs(mesh, &[BoundaryTag::Gamma0])?;
        let shifted = asm.k.combine(1.0, &asm.m, -cluster.lambda0);
        let a = shifted.restrict(&free, &map);
        let lu = LdlFactor::factor(&a)?;
        let mb = [asm.m.mul_vec(&cluster.basis[0]), asm.m.mul_vec(&cluster.basis[1])];
        let bf = |m: usize| -> Vec<f64> { free.iter().map(|&i| mb[m][i]).collect() };
        let (b0, b1) = (bf(0), bf(1));
        let z = [lu.solve_refined(&a, &b0), lu.solve_refined(&a, &b1)];
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let schur = nalgebra::Matrix2::new(dot(&b0, &z[0]), dot(&b0, &z[1]), dot(&b1, &z[0]), dot(&b1, &z[1]));
        let gamma0 = mesh.tagged_nodes(&[BoundaryTag::Gamma0]);
        Ok(FemBackend { cluster, asm, traces, a, lu, free, gamma0, mb, z, schur })
    }
}

impl OuterBackend for FemBackend<'_> {
    type Field = Vec<f64>;

    fn lambda0(&self) -> f64 {
        self.cluster.lambda0
    }

    fn traces(&self) -> &[CosineSeries; 2] {
        &self.traces
    }

    fn basis(&self, m: usize) -> Vec<f64> {
        self.cluster.basis[m].clone()
    }

    fn lin(&self, a: f64, x: &Vec<f64>, b: f64, y: &Vec<f64>) -> Vec<f64> {
        x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
    }

    fn inner_basis(&self, f: &Vec<f64>, m: usize) -> f64 {
        f.iter().zip(&self.mb[m]).map(|(p, q)| p * q).sum()
    }

    fn solve_raw(&self, f: &Vec<f64>, g: &CosineSeries) -> Result<(Vec<f64>, CosineSeries)> {
        let mesh = &self.cluster.mesh;
        let mut ud = vec![0.0; mesh.n_vertices()];
        for &i in &self.gamma0 {
            ud[i] = g.eval(mesh.vertices[i][0]);
        }
        let mf = self.asm.m.mul_vec(f);
        let aud = self.asm.k.mul_vec(&ud);
        let mud = self.asm.m.mul_vec(&ud);
        let lam = self.cluster.lambda0;
        let rhs: Vec<f64> = self.free.iter().map(|&i| mf[i] - aud[i] + lam * mud[i]).collect();
        let w0 = self.lu.solve_refined(&self.a, &rhs);
        // Bᵀw = −Bᵀu_D.
        let gap = nalgebra::Vector2::from_fn(|m, _| {
            let bw: f64 = self.free.iter().zip(&w0).map(|(&i, w)| self.mb[m][i] * w).sum();
            let bud: f64 = self.gamma0.iter().map(|&i| self.mb[m][i] * ud[i]).sum();
            bw + bud
        });
        let y = self
            .schur
            .lu()
            .solve(&gap)
            .ok_or_else(|| Error::InvalidArgument("singular constraint block".into()))?;
        let mut u = ud;
        for (r, &i) in self.free.iter().enumerate() {
            u[i] = w0[r] - self.z[0][r] * y[0] - self.z[1][r] * y[1];
        }
        let trace = boundary_flux_gamma0(mesh, self.asm, &u, lam, Some(f))?.to_cosine_series(TRACE_MODES);
        Ok((u, trace))
    }
}

/// Chebyshev collocation in `x₂` for each cosine mode in `x₁`.
///
/// Only valid for the analytic cluster, whose basis functions are single
/// separable modes; every field stays separable.
#[derive(Debug, Clone)]
pub struct ModalBackend {
    lambda0: f64,
    traces: [CosineSeries; 2],
    /// Points `x₂ ∈ [0, 1]`, `x[0] = 0`.
    pub x: Vec<f64>,
    weights: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    /// `(k, j)` of each basis function with its sign.
    modes: [(usize, usize, f64); 2],
}

/// Cosine-mode coefficients as functions of `x₂` on the Chebyshev points.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalField {
    pub modes: Vec<Vec<f64>>,
}

impl ModalField {
    fn zero(k: usize, n: usize) -> Self {
        ModalField { modes: vec![vec![0.0; n]; k] }
    }
}

/// Clenshaw–Curtis weights on `[−1, 1]` for `cos(iπ/n)`.
fn clenshaw_curtis(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        let th = i as f64 * PI / n as f64;
        let mut s = 1.0;
        for k in 1..=n / 2 {
            let b = if 2 * k == n { 1.0 } else { 2.0 };
            s -= b * (2.0 * k as f64 * th).cos() / (4.0 * (k * k) as f64 - 1.0);
        }
        let c = if i == 0 || i == n { 1.0 } else { 2.0 };
        *wi = c * s / n as f64;
    }
    w
}

/// Differentiation matrix on `t_i = cos(iπ/n)`.
fn cheb_diff(n: usize) -> DMatrix<f64> {
    let t: Vec<f64> = (0..=n).map(|i| (i as f64 * PI / n as f64).cos()).collect();
    let c = |i: usize| (if i == 0 || i == n { 2.0 } else { 1.0 }) * if i.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (t[i] - t[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    d
}

impl ModalBackend {
    pub fn new(cluster: &EigenCluster, points: usize) -> Result<Self> {
        let mix = cluster
            .mix
            .ok_or_else(|| Error::InvalidArgument("modal backend needs the analytic cluster".into()))?;
        let ref_modes = cluster_modes();
        let mut modes = [(0, 0, 1.0); 2];
        for l in 0..2 {
            let pick = (0..2).find(|&m| (mix[l][m].abs() - 1.0).abs() < 1e-12 && mix[l][1 - m].abs() < 1e-12);
            let m = pick.ok_or_else(|| Error::InvalidArgument("modal backend needs separable basis functions".into()))?;
            modes[l] = (ref_modes[m].k as usize, ref_modes[m].j as usize, mix[l][m].signum());
        }
        let n = points.max(8);
        let x: Vec<f64> = (0..=n).map(|i| 0.5 * (1.0 - (i as f64 * PI / n as f64).cos())).collect();
        let weights: Vec<f64> = clenshaw_curtis(n).iter().map(|w| 0.5 * w).collect();
        let d1 = cheb_diff(n) * -2.0;
        let d2 = &d1 * &d1;
        Ok(ModalBackend { lambda0: cluster.lambda0, traces: cluster.traces()?.clone(), x, weights, d1, d2, modes })
    }

    fn npts(&self) -> usize {
        self.x.len()
    }

    fn mode_profile(&self, j: usize) -> Vec<f64> {
        let mu = (j as f64 + 0.5) * PI;
        self.x.iter().map(|&x| (mu * x).sin()).collect()
    }

    fn ck(k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            std::f64::consts::SQRT_2
        }
    }

    fn mode_weight(k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            0.5
        }
    }

    /// Barycentric interpolation of mode `k` at `x₂`.
    fn interp(&self, v: &[f64], y: f64) -> f64 {
        let n = self.npts() - 1;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, (&xi, &vi)) in self.x.iter().zip(v).enumerate() {
            let d = y - xi;
            if d == 0.0 {
                return vi;
            }
            let w = (if i == 0 || i == n { 0.5 } else { 1.0 }) * if i % 2 == 0 { 1.0 } else { -1.0 };
            num += w / d * vi;
            den += w / d;
        }
        num / den
    }

    pub fn eval(&self, f: &ModalField, p: [f64; 2]) -> f64 {
        f.modes
            .iter()
            .enumerate()
            .filter(|(_, v)| v.iter().any(|&c| c != 0.0))
            .map(|(k, v)| (k as f64 * PI * (p[0] + 0.5)).cos() * self.interp(v, p[1]))
            .sum()
    }

    /// `∂f/∂x₂` on the same points.
    pub fn dx2(&self, f: &ModalField) -> ModalField {
        ModalField {
            modes: f
                .modes
                .iter()
                .map(|v| {
                    if v.iter().all(|&c| c == 0.0) {
                        v.clone()
                    } else {
                        (&self.d1 * DVector::from_column_slice(v)).iter().copied().collect()
                    }
                })
                .collect(),
        }
    }

    /// Value and gradient, given `df = dx2(f)`.
    pub fn eval_grad(&self, f: &ModalField, df: &ModalField, p: [f64; 2]) -> (f64, [f64; 2]) {
        let (mut v, mut g) = (0.0, [0.0; 2]);
        for (k, (m, dm)) in f.modes.iter().zip(&df.modes).enumerate() {
            if m.iter().all(|&c| c == 0.0) {
                continue;
            }
            let w = k as f64 * PI;
            let (c, s) = ((w * (p[0] + 0.5)).cos(), (w * (p[0] + 0.5)).sin());
            let a = self.interp(m, p[1]);
            v += c * a;
            g[0] -= w * s * a;
            g[1] += c * self.interp(dm, p[1]);
        }
        (v, g)
    }
}

impl OuterBackend for ModalBackend {
    type Field = ModalField;

    fn lambda0(&self) -> f64 {
        self.lambda0
    }

    fn traces(&self) -> &[CosineSeries; 2] {
        &self.traces
    }

    fn basis(&self, m: usize) -> ModalField {
        let (k, j, s) = self.modes[m];
        let mut f = ModalField::zero(TRACE_MODES.max(k + 1), self.npts());
        f.modes[k] = self.mode_profile(j).iter().map(|v| s * Self::ck(k) * std::f64::consts::SQRT_2 * v).collect();
        f
    }

    fn lin(&self, a: f64, x: &ModalField, b: f64, y: &ModalField) -> ModalField {
        ModalField {
            modes: x
                .modes
                .iter()
                .zip(&y.modes)
                .map(|(p, q)| p.iter().zip(q).map(|(s, t)| a * s + b * t).collect())
                .collect(),
        }
    }

    fn inner_basis(&self, f: &ModalField, m: usize) -> f64 {
        let b = self.basis(m);
        f.modes
            .iter()
            .zip(&b.modes)
            .enumerate()
            .map(|(k, (p, q))| {
                Self::mode_weight(k) * p.iter().zip(q).zip(&self.weights).map(|((s, t), w)| s * t * w).sum::<f64>()
            })
            .sum()
    }

    fn solve_raw(&self, f: &ModalField, g: &CosineSeries) -> Result<(ModalField, CosineSeries)> {
        let n = self.npts();
        let nm = f.modes.len().max(g.modes());
        let mut u = ModalField::zero(nm, n);
        let mut tr = CosineSeries::zero(nm);
        for k in 0..nm {
            let fk = f.modes.get(k);
            let gk = g.coeffs.get(k).copied().unwrap_or(0.0);
            if gk == 0.0 && fk.is_none_or(|v| v.iter().all(|&c| c == 0.0)) {
                continue;
            }
            let resonant: Vec<usize> = self.modes.iter().filter(|m| m.0 == k).map(|m| m.1).collect();
            let size = n + resonant.len();
            let mut a = DMatrix::zeros(size, size);
            let mut b = DVector::zeros(size);
            let shift = (k as f64 * PI).powi(2) - self.lambda0;
            for i in 1..n - 1 {
                for j in 0..n {
                    a[(i, j)] = -self.d2[(i, j)];
                }
                a[(i, i)] += shift;
                b[i] = fk.map_or(0.0, |v| v[i]);
            }
            a[(0, 0)] = 1.0;
            b[0] = gk;
            for j in 0..n {
                a[(n - 1, j)] = self.d1[(n - 1, j)];
            }
            for (r, &jm) in resonant.iter().enumerate() {
                let phi = self.mode_profile(jm);
                for i in 1..n - 1 {
                    a[(i, n + r)] = phi[i];
                }
                for j in 0..n {
                    a[(n + r, j)] = self.weights[j] * phi[j];
                }
            }
            let sol = a
                .lu()
                .solve(&b)
                .ok_or(Error::Factorization { index: k, pivot: 0.0 })?;
            let w: Vec<f64> = sol.iter().take(n).copied().collect();
            tr.coeffs[k] = (0..n).map(|j| self.d1[(0, j)] * w[j]).sum();
            u.modes[k] = w;
        }
        Ok((u, tr))
    }
}
