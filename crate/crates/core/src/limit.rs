//! The limit problem on `Ω = (−½,½)×(0,1)`: Dirichlet on `Γ₀ = {x₂ = 0}`,
//! Neumann elsewhere. Its eigenvalue `6.25π²` is double, carried by the modes
//! `(k, j) = (0, 2)` and `(2, 1)`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet, assemble, boundary_flux_gamma0, eigs_smallest_near, Assembled, CosineSeries, EigOptions,
    EigenPair,
};
use crate::mesh::{BoundaryTag, Mesh};

pub const TRACE_MODES: usize = 32;

/// `c_k cos(kπ(x₁+½)) √2 sin((j+½)πx₂)`, normalized in `L²(Ω)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnalyticMode {
    pub k: u32,
    pub j: u32,
    pub lambda: f64,
}

impl AnalyticMode {
    pub fn new(k: u32, j: u32) -> Self {
        let (kf, jf) = (k as f64, j as f64 + 0.5);
        AnalyticMode { k, j, lambda: (kf * kf + jf * jf) * PI * PI }
    }

    fn ck(&self) -> f64 {
        if self.k == 0 {
            1.0
        } else {
            SQRT_2
        }
    }

    /// Vertical wavenumber `(j+½)π`.
    pub fn mu(&self) -> f64 {
        (self.j as f64 + 0.5) * PI
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.ck() * (self.k as f64 * PI * (x[0] + 0.5)).cos() * SQRT_2 * (self.mu() * x[1]).sin()
    }

    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let w = self.k as f64 * PI;
        let c = self.ck() * SQRT_2;
        [
            -c * w * (w * (x[0] + 0.5)).sin() * (self.mu() * x[1]).sin(),
            c * (w * (x[0] + 0.5)).cos() * self.mu() * (self.mu() * x[1]).cos(),
        ]
    }

    /// `∂u/∂x₂` on `Γ₀` as a cosine series.
    pub fn trace(&self, modes: usize) -> CosineSeries {
        CosineSeries::single(modes, self.k as usize, self.ck() * SQRT_2 * self.mu())
    }
}

/// Closed-form spectrum for `k ≤ kmax`, `j ≤ jmax`, ascending.
pub fn analytic_rectangle_spectrum(kmax: u32, jmax: u32) -> Vec<AnalyticMode> {
    let mut v: Vec<AnalyticMode> =
        (0..=kmax).flat_map(|k| (0..=jmax).map(move |j| AnalyticMode::new(k, j))).collect();
    v.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.k.cmp(&b.k)));
    v
}

/// The pair realizing the double eigenvalue, ordered by boundary energy.
pub fn cluster_modes() -> [AnalyticMode; 2] {
    [AnalyticMode::new(0, 2), AnalyticMode::new(2, 1)]
}

pub fn lambda0_exact() -> f64 {
    6.25 * PI * PI
}

/// A double eigenvalue with an orthonormal basis of its eigenspace.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub mesh: Arc<Mesh>,
    pub lambda0: f64,
    /// The two discrete eigenvalues (both `λ₀` on the analytic backend).
    pub values: [f64; 2],
    /// Nodal values on `mesh`, `M`-orthonormal.
    pub basis: [Vec<f64>; 2],
    /// `∂u/∂x₂` on `Γ₀`.
    pub traces: Option<[CosineSeries; 2]>,
    pub gram: [[f64; 2]; 2],
    /// Accumulated orthogonal map: `basis = rotation · (input basis)`.
    pub rotation: [[f64; 2]; 2],
    pub diagonalized: bool,
    /// Set on the analytic backend: `basis_l = Σ_m mix[l][m] · cluster_modes()[m]`.
    pub mix: Option<[[f64; 2]; 2]>,
}

impl EigenCluster {
    /// Exact pair interpolated on `mesh`, Löwdin-orthonormalized against the
    /// discrete mass matrix, optionally rotated by `angle`.
    pub fn analytic(mesh: Arc<Mesh>, asm: &Assembled, angle: f64) -> Self {
        let modes = cluster_modes();
        let raw: Vec<Vec<f64>> = modes.iter().map(|md| mesh.vertices.iter().map(|&v| md.eval(v)).collect()).collect();
        let (c, s) = (angle.cos(), angle.sin());
        let mix = [[c, s], [-s, c]];
        let rotated: Vec<Vec<f64>> = (0..2)
            .map(|l| raw[0].iter().zip(&raw[1]).map(|(a, b)| mix[l][0] * a + mix[l][1] * b).collect())
            .collect();
        let basis = lowdin(asm, [rotated[0].clone(), rotated[1].clone()]);
        let tr: Vec<CosineSeries> = modes.iter().map(|md| md.trace(TRACE_MODES)).collect();
        let traces = [tr[0].lin(mix[0][0], &tr[1], mix[0][1]), tr[0].lin(mix[1][0], &tr[1], mix[1][1])];
        let gram = gram_of(&traces);
        let lam = lambda0_exact();
        EigenCluster {
            mesh,
            lambda0: lam,
            values: [lam, lam],
            basis,
            traces: Some(traces),
            gram,
            rotation: [[1.0, 0.0], [0.0, 1.0]],
            diagonalized: angle == 0.0,
            mix: Some(mix),
        }
    }

    /// `u₀⁽ˡ⁾(x)`: closed form when available, else P1 interpolation.
    pub fn eval_basis(&self, l: usize, x: [f64; 2]) -> f64 {
        match self.mix {
            Some(mix) => {
                let m = cluster_modes();
                mix[l][0] * m[0].eval(x) + mix[l][1] * m[1].eval(x)
            }
            None => self.mesh.interpolate(&self.basis[l], x).unwrap_or(0.0),
        }
    }

    pub fn traces(&self) -> Result<&[CosineSeries; 2]> {
        self.traces
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("cluster traces not computed".into()))
    }

    pub fn nerav_gap(&self) -> f64 {
        (self.gram[0][0] - self.gram[1][1]).abs() / (self.gram[0][0] + self.gram[1][1])
    }
}

fn gram_of(t: &[CosineSeries; 2]) -> [[f64; 2]; 2] {
    let g01 = t[0].inner(&t[1]);
    [[t[0].inner(&t[0]), g01], [g01, t[1].inner(&t[1])]]
}

/// Symmetric orthonormalization `B S^{-1/2}` in the `M` inner product.
fn lowdin(asm: &Assembled, b: [Vec<f64>; 2]) -> [Vec<f64>; 2] {
    let s = nalgebra::Matrix2::new(
        asm.m.inner(&b[0], &b[0]),
        asm.m.inner(&b[0], &b[1]),
        asm.m.inner(&b[1], &b[0]),
        asm.m.inner(&b[1], &b[1]),
    );
    let eig = nalgebra::SymmetricEigen::new(s);
    let d = nalgebra::Matrix2::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let w = eig.eigenvectors * d * eig.eigenvectors.transpose();
    let comb = |l: usize| -> Vec<f64> { b[0].iter().zip(&b[1]).map(|(x, y)| w[(0, l)] * x + w[(1, l)] * y).collect() };
    [comb(0), comb(1)]
}

/// Dirichlet on `Γ₀`, Neumann elsewhere; full-length nodal vectors.
pub fn solve_limit_eigen(mesh: &Mesh, target: f64, count: usize, opts: &EigOptions) -> Result<Vec<EigenPair>> {
    let asm = assemble(mesh);
    let red = apply_dirichlet(&asm, mesh, &[BoundaryTag::Gamma0])?;
    let pairs = eigs_smallest_near(&red.k, &red.m, target, count, opts)?;
    Ok(pairs
        .into_iter()
        .map(|p| EigenPair { vector: red.expand(&p.vector), ..p })
        .collect())
}

/// Picks the unique pair of values within `cluster_tol·(1+|λ|)` of each other
/// and at least ten times that from every other value.
pub fn find_double_cluster(mesh: Arc<Mesh>, asm: &Assembled, eigs: &[EigenPair], cluster_tol: f64) -> Result<EigenCluster> {
    let close = |a: f64, b: f64, f: f64| (a - b).abs() <= f * cluster_tol * (1.0 + a.abs().max(b.abs()));
    let mut found = Vec::new();
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            if !close(eigs[i].value, eigs[j].value, 1.0) {
                continue;
            }
            let isolated = (0..eigs.len())
                .filter(|&q| q != i && q != j)
                .all(|q| !close(eigs[q].value, eigs[i].value, 10.0) && !close(eigs[q].value, eigs[j].value, 10.0));
            if isolated {
                found.push((i, j));
            }
        }
    }
    let (i, j) = match found.as_slice() {
        [one] => *one,
        [] => return Err(Error::NoDoubleCluster(format!("no isolated pair among {} values", eigs.len()))),
        _ => return Err(Error::NoDoubleCluster(format!("{} candidate pairs", found.len()))),
    };
    let basis = lowdin(asm, [eigs[i].vector.clone(), eigs[j].vector.clone()]);
    Ok(EigenCluster {
        mesh,
        lambda0: 0.5 * (eigs[i].value + eigs[j].value),
        values: [eigs[i].value, eigs[j].value],
        basis,
        traces: None,
        gram: [[0.0; 2]; 2],
        rotation: [[1.0, 0.0], [0.0, 1.0]],
        diagonalized: false,
        mix: None,
    })
}

/// Fills the traces of a discrete cluster by variational flux recovery.
pub fn recover_traces(mut cluster: EigenCluster, asm: &Assembled) -> Result<EigenCluster> {
    let mut tr = Vec::with_capacity(2);
    for l in 0..2 {
        let g = boundary_flux_gamma0(&cluster.mesh, asm, &cluster.basis[l], cluster.values[l], None)?;
        tr.push(g.to_cosine_series(TRACE_MODES));
    }
    let traces = [tr[0].clone(), tr[1].clone()];
    cluster.gram = gram_of(&traces);
    cluster.traces = Some(traces);
    Ok(cluster)
}

/// Rotation `R` (rows are the new basis in terms of the old) with
/// `R G Rᵀ` diagonal, angle in `[−π/4, π/4]`, followed by the swap that puts
/// the larger diagonal entry first.
pub fn diagonalizing_rotation(g: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let theta = if g[0][1] == 0.0 {
        0.0
    } else if g[0][0] == g[1][1] {
        0.25 * PI * g[0][1].signum()
    } else {
        0.5 * (2.0 * g[0][1] / (g[0][0] - g[1][1])).atan()
    };
    let (c, s) = (theta.cos(), theta.sin());
    let r = [[c, s], [-s, c]];
    let d0 = c * c * g[0][0] + 2.0 * c * s * g[0][1] + s * s * g[1][1];
    let d1 = s * s * g[0][0] - 2.0 * c * s * g[0][1] + c * c * g[1][1];
    if d0 >= d1 {
        r
    } else {
        [r[1], r[0]]
    }
}

fn apply2(r: [[f64; 2]; 2], a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = r[i][0] * a[0][j] + r[i][1] * a[1][j];
        }
    }
    out
}

/// Rotates the cluster so the boundary form is diagonal, fixes branch order
/// and signs, and checks that the two diagonal entries are distinct.
pub fn diagonalize_boundary_form(mut cluster: EigenCluster, gap_tol: f64) -> Result<EigenCluster> {
    let traces = cluster.traces()?.clone();
    let r = diagonalizing_rotation(cluster.gram);
    let rot_series = |l: usize| traces[0].lin(r[l][0], &traces[1], r[l][1]);
    let mut new_traces = [rot_series(0), rot_series(1)];
    let rot_vec = |l: usize| -> Vec<f64> {
        cluster.basis[0].iter().zip(&cluster.basis[1]).map(|(a, b)| r[l][0] * a + r[l][1] * b).collect()
    };
    let mut basis = [rot_vec(0), rot_vec(1)];
    let mut values = [
        r[0][0].powi(2) * cluster.values[0] + r[0][1].powi(2) * cluster.values[1],
        r[1][0].powi(2) * cluster.values[0] + r[1][1].powi(2) * cluster.values[1],
    ];
    let mut rot = r;

    // Signs: positive overlap with the reference closed-form traces.
    let refs = cluster_modes().map(|m| m.trace(TRACE_MODES));
    for l in 0..2 {
        let s = new_traces[l].inner(&refs[l]);
        let s = if s != 0.0 { s } else { new_traces[l].coeffs.iter().copied().find(|c| *c != 0.0).unwrap_or(1.0) };
        if s < 0.0 {
            new_traces[l] = new_traces[l].scale(-1.0);
            basis[l].iter_mut().for_each(|v| *v = -*v);
            rot[l] = [-rot[l][0], -rot[l][1]];
        }
    }
    if values[0].is_nan() {
        values = cluster.values;
    }
    let gram = gram_of(&new_traces);
    cluster.rotation = apply2(rot, cluster.rotation);
    cluster.mix = cluster.mix.map(|m| apply2(rot, m));
    cluster.basis = basis;
    cluster.values = values;
    cluster.traces = Some(new_traces);
    cluster.gram = gram;
    cluster.diagonalized = true;
    let gap = cluster.nerav_gap();
    if !(gap >= gap_tol) {
        return Err(Error::NeravViolated { gap, tol: gap_tol });
    }
    Ok(cluster)
}

/// Analytic backend: exact eigenpair data on a mesh of `Ω`.
pub fn analytic_cluster(mesh: Arc<Mesh>, gap_tol: f64) -> Result<(EigenCluster, Assembled)> {
    let asm = assemble(&mesh);
    let c = EigenCluster::analytic(mesh, &asm, 0.0);
    let c = diagonalize_boundary_form(c, gap_tol)?;
    Ok((c, asm))
}

/// FEM backend: discrete eigenpairs, flux-recovered traces. The cluster
/// tolerance `10h²` isolates the pair for `h ≤ 1/32`.
pub fn fem_cluster(mesh: Arc<Mesh>, h: f64, gap_tol: f64, opts: &EigOptions) -> Result<(EigenCluster, Assembled)> {
    let asm = assemble(&mesh);
    let eigs = solve_limit_eigen(&mesh, lambda0_exact(), 4, opts)?;
    let c = find_double_cluster(mesh, &asm, &eigs, 10.0 * h * h)?;
    let c = recover_traces(c, &asm)?;
    let c = diagonalize_boundary_form(c, gap_tol)?;
    Ok((c, asm))
}
