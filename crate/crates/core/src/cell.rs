//! Boundary-layer problems on one period of the strip `F(ξ₁) < ξ₂ < T`.
//!
//! | field | equation        | bottom | sides     | top               |
//! |-------|-----------------|--------|-----------|-------------------|
//! | `X`   | `ΔX = 0`        | 0      | Neumann 0 | `∂X/∂ξ₂ = 1`      |
//! | `X̃`   | `ΔX̃ = ∂₁X`      | 0      | 0         | 0                 |
//! | `X̃̃_I` | `ΔY = ∂₁X̃`      | 0      | Neumann 0 | Neumann 0         |
//! | `Z`   | `ΔZ = X − h″`   | 0      | Neumann 0 | Neumann 0         |
//!
//! `X̃̃_II = Z + h` with `h = (ξ₂³/6 + Cξ₂²/2)s(ξ₂)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assemble::{dx1_load, edge_load, free_dofs, p1_gradients, source_load, Assembled};
use crate::fem::{assemble, LdlFactor, SparseSymMatrix};
use crate::mesh::{mesh_strip_spec, BoundaryTag, Mesh, StripSpec};
use crate::profile::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Behavior above the truncation height.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum FarField {
    /// `ξ₂ + c`
    Linear { c: f64 },
    Zero,
    Constant { c: f64 },
    /// `ξ₂³/6 + cξ₂²/2 + c2`
    Cubic { c: f64, c2: f64 },
}

impl FarField {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            FarField::Linear { c } => y + c,
            FarField::Zero => 0.0,
            FarField::Constant { c } => c,
            FarField::Cubic { c, c2 } => y * y * y / 6.0 + c * y * y / 2.0 + c2,
        }
    }

    pub fn slope(&self, y: f64) -> f64 {
        match *self {
            FarField::Linear { .. } => 1.0,
            FarField::Zero | FarField::Constant { .. } => 0.0,
            FarField::Cubic { c, .. } => y * y / 2.0 + c * y,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    pub parity: Parity,
    pub farfield: FarField,
}

impl CellField {
    /// Height of the strip top.
    pub fn top(&self) -> f64 {
        let g = self.mesh.grid.as_ref().expect("strip meshes are structured");
        self.mesh.vertices[g.node(0, g.ny)][1]
    }

    /// Periodic in `ξ₁`; the far-field model above the top.
    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        self.eval_grad(xi).0
    }

    /// Value and `ξ`-gradient; the P1 gradient of the containing triangle.
    /// Points between the polygonal mesh bottom and the true profile use the
    /// linear extension of the bottom triangle.
    pub fn eval_grad(&self, xi: [f64; 2]) -> (f64, [f64; 2]) {
        let x = xi[0] - xi[0].round();
        if xi[1] < self.top() {
            if let Some((t, b)) = self.mesh.locate_clamped([x, xi[1]]) {
                let tri = self.mesh.triangles[t];
                let (g, _) = p1_gradients(tri.map(|i| self.mesh.vertices[i]));
                let v = tri.map(|i| self.values[i]);
                let val = b[0] * v[0] + b[1] * v[1] + b[2] * v[2];
                let grad = [0, 1].map(|d| g[0][d] * v[0] + g[1][d] * v[1] + g[2][d] * v[2]);
                return (val, grad);
            }
        }
        (self.farfield.eval(xi[1]), [0.0, self.farfield.slope(xi[1])])
    }

    /// Trapezoidal mean over grid row `j` (exact for P1 on a uniform row).
    pub fn row_mean(&self, j: usize) -> f64 {
        row_mean(&self.mesh, &self.values, j)
    }

    pub fn top_mean(&self) -> f64 {
        let ny = self.mesh.grid.as_ref().map_or(0, |g| g.ny);
        self.row_mean(ny)
    }

    /// `max |f(ξ) ∓ f(−ξ)| / max |f|` over mirrored node pairs.
    pub fn parity_error(&self) -> f64 {
        parity_error(&self.mesh, &self.values, self.parity)
    }
}

fn row_mean(mesh: &Mesh, v: &[f64], j: usize) -> f64 {
    let g = mesh.grid.as_ref().expect("strip meshes are structured");
    let s: f64 = (0..=g.nx).map(|i| v[g.node(i, j)] * if i == 0 || i == g.nx { 0.5 } else { 1.0 }).sum();
    s / g.nx as f64
}

fn parity_error(mesh: &Mesh, v: &[f64], parity: Parity) -> f64 {
    let g = mesh.grid.as_ref().expect("strip meshes are structured");
    let sign = match parity {
        Parity::Even => -1.0,
        Parity::Odd => 1.0,
    };
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // Numerically zero fields (flat profile) have no parity to check.
    if scale < 1e-12 {
        return 0.0;
    }
    let mut err = 0.0f64;
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            err = err.max((v[g.node(i, j)] + sign * v[g.node(g.nx - i, j)]).abs());
        }
    }
    err / scale
}

/// Quintic smoothstep from 0 at `ξ₂ ≤ 1` to 1 at `ξ₂ ≥ 2`, with two derivatives.
pub fn switch(y: f64) -> [f64; 3] {
    let t = (y - 1.0).clamp(0.0, 1.0);
    if t == 0.0 || t == 1.0 {
        return [t, 0.0, 0.0];
    }
    let t2 = t * t;
    [
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - 2.0 * t + t2),
        60.0 * t * (1.0 - 3.0 * t + 2.0 * t2),
    ]
}

/// The lifting `h` and its second derivative.
pub fn lifting(y: f64, c: f64) -> (f64, f64) {
    let [s, s1, s2] = switch(y);
    let q = y * y * y / 6.0 + c * y * y / 2.0;
    let q1 = y * y / 2.0 + c * y;
    let q2 = y + c;
    (q * s, q2 * s + 2.0 * q1 * s1 + q * s2)
}

/// Exponential fit of the far-field remainder.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    /// `r²` of the log-linear fit.
    pub fit_quality: f64,
    pub heights: usize,
}

/// Fits `‖f − model − row mean‖(ξ₂) ≈ A e^{−rate ξ₂}` on rows in `[T/3, 2T/3]`.
///
/// Returns `Ok(None)` when the remainder sits below `1e−10` on every flat row.
pub fn estimate_decay(f: &CellField) -> Result<Option<DecayFit>> {
    let g = f.mesh.grid.as_ref().ok_or_else(|| Error::Decay("field mesh is not structured".into()))?;
    let t = f.top();
    let scale = f.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut pts = Vec::new();
    let mut peak = 0.0f64;
    for j in g.layer_rows..=g.ny {
        let y = f.mesh.vertices[g.node(0, j)][1];
        let mean = f.row_mean(j);
        let n2: f64 = (0..=g.nx)
            .map(|i| (f.values[g.node(i, j)] - mean).powi(2) * if i == 0 || i == g.nx { 0.5 } else { 1.0 })
            .sum::<f64>()
            / g.nx as f64;
        let n = n2.sqrt();
        peak = peak.max(n);
        let inside = y >= t / 3.0 - 1e-12 && y <= 2.0 * t / 3.0 + 1e-12;
        // Rows already at roundoff level carry no rate information.
        if inside && n > 1e-13 * scale.max(1.0) && pts.last().is_none_or(|p: &(f64, f64)| n.ln() < p.1) {
            pts.push((y, n.ln()));
        }
    }
    if peak <= 1e-10 * scale.max(1.0) {
        return Ok(None);
    }
    if pts.len() < 5 {
        return Err(Error::Decay(format!("{} usable heights, need 5", pts.len())));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(Some(DecayFit { rate: -slope, amplitude: (my - slope * mx).exp(), fit_quality: r2, heights: pts.len() }))
}

/// All four fields on one strip mesh.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub x: CellField,
    pub x_tilde: CellField,
    pub x_i: CellField,
    pub z: CellField,
    pub x_ii: CellField,
    pub c: f64,
    pub c_i: f64,
    pub c_ii: f64,
    /// Largest relative weak residual over the four solves.
    pub weak_residual: f64,
}

struct Block {
    a: SparseSymMatrix,
    lu: LdlFactor,
    free: Vec<usize>,
    n: usize,
}

impl Block {
    fn new(asm: &Assembled, mesh: &Mesh, tags: &[BoundaryTag]) -> Result<Self> {
        let (free, map) = free_dofs(mesh, tags)?;
        let a = asm.k.restrict(&free, &map);
        let lu = LdlFactor::factor(&a)?;
        Ok(Block { a, lu, free, n: mesh.n_vertices() })
    }

    /// `K u = b` with zero Dirichlet data; returns the solution and the
    /// relative residual of the reduced system.
    fn solve(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let rb: Vec<f64> = self.free.iter().map(|&i| b[i]).collect();
        let ru = self.lu.solve_refined(&self.a, &rb);
        let au = self.a.mul_vec(&ru);
        let num = au.iter().zip(&rb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let den = rb.iter().map(|q| q * q).sum::<f64>().sqrt();
        let mut u = vec![0.0; self.n];
        for (r, &i) in self.free.iter().enumerate() {
            u[i] = ru[r];
        }
        (u, if den > 0.0 { num / den } else { num })
    }
}

/// Solves the four problems on a strip mesh whose top is flat.
pub fn solve_cell_problems_on(mesh: Arc<Mesh>) -> Result<CellSolution> {
    let g = mesh.grid.clone().ok_or_else(|| Error::InvalidMesh("strip mesh must be structured".into()))?;
    let t = mesh.vertices[g.node(0, g.ny)][1];
    let asm = assemble(&mesh);
    let bottom = Block::new(&asm, &mesh, &[BoundaryTag::StripBottom])?;
    let all = Block::new(
        &asm,
        &mesh,
        &[BoundaryTag::StripBottom, BoundaryTag::StripTop, BoundaryTag::StripSideL, BoundaryTag::StripSideR],
    )?;
    let field = |values: Vec<f64>, parity, farfield| CellField { mesh: mesh.clone(), values, parity, farfield };

    let (xv, r1) = bottom.solve(&edge_load(&mesh, BoundaryTag::StripTop, |_| 1.0));
    let c = row_mean(&mesh, &xv, g.ny) - t;

    let rhs: Vec<f64> = dx1_load(&mesh, &xv).iter().map(|v| -v).collect();
    let (xt, r2) = all.solve(&rhs);

    let rhs: Vec<f64> = dx1_load(&mesh, &xt).iter().map(|v| -v).collect();
    let (yv, r3) = bottom.solve(&rhs);
    let c_i = row_mean(&mesh, &yv, g.ny);

    let mx = asm.m.mul_vec(&xv);
    let hload = source_load(&mesh, |p| lifting(p[1], c).1);
    let rhs: Vec<f64> = hload.iter().zip(&mx).map(|(h, m)| h - m).collect();
    let (zv, r4) = bottom.solve(&rhs);
    let c_ii = row_mean(&mesh, &zv, g.ny);
    let xii: Vec<f64> = zv.iter().zip(&mesh.vertices).map(|(z, p)| z + lifting(p[1], c).0).collect();

    Ok(CellSolution {
        x: field(xv, Parity::Even, FarField::Linear { c }),
        x_tilde: field(xt, Parity::Odd, FarField::Zero),
        x_i: field(yv, Parity::Even, FarField::Constant { c: c_i }),
        z: field(zv, Parity::Even, FarField::Constant { c: c_ii }),
        x_ii: field(xii, Parity::Even, FarField::Cubic { c, c2: c_ii }),
        c,
        c_i,
        c_ii,
        weak_residual: r1.max(r2).max(r3).max(r4),
    })
}

pub fn solve_cell_problems(p: &Profile, t_top: f64, spec: &StripSpec) -> Result<CellSolution> {
    solve_cell_problems_on(Arc::new(mesh_strip_spec(p, t_top, spec)?))
}

/// `(X, C)` alone.
pub fn solve_cell_x(p: &Profile, t_top: f64, spec: &StripSpec) -> Result<(CellField, f64)> {
    let s = solve_cell_problems(p, t_top, spec)?;
    Ok((s.x, s.c))
}

/// Strip resolution with optional Richardson extrapolation in `h`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CellResolution {
    pub strip: StripSpec,
    pub richardson: bool,
}

impl Default for CellResolution {
    fn default() -> Self {
        CellResolution { strip: StripSpec { cells_per_half_period: 64, ..Default::default() }, richardson: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CellChecks {
    pub parity_max_err: f64,
    pub weak_residual: f64,
    /// `|C_II − (top values of X̃̃_II − cubic)|` spread along the top.
    pub top_variance_ii: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CellConstants {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_I")]
    pub c_i: f64,
    #[serde(rename = "C_II")]
    pub c_ii: f64,
    /// `None` when the remainder vanishes (flat profile).
    pub decay_rate_x: Option<f64>,
    pub decay_rate_xtilde: Option<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    pub h_min: f64,
    pub extrapolated: bool,
    pub checks: CellChecks,
}

impl CellConstants {
    /// Exact values for a flat profile of depth `d`.
    pub fn flat(d: f64, t: f64) -> Self {
        CellConstants {
            c: d,
            c_i: 0.0,
            c_ii: -d * d * d / 3.0,
            decay_rate_x: None,
            decay_rate_xtilde: None,
            t,
            h_min: 0.0,
            extrapolated: false,
            checks: CellChecks { parity_max_err: 0.0, weak_residual: 0.0, top_variance_ii: 0.0 },
        }
    }

    /// Externally supplied constants, no diagnostics.
    pub fn given(c: f64, c_i: f64, c_ii: f64) -> Self {
        CellConstants { c, c_i, c_ii, t: f64::NAN, ..Self::flat(0.0, 0.0) }
    }
}

fn checks(s: &CellSolution) -> CellChecks {
    let parity = [&s.x, &s.x_tilde, &s.x_i, &s.z].iter().map(|f| f.parity_error()).fold(0.0, f64::max);
    let g = s.x_ii.mesh.grid.as_ref().expect("structured");
    let top = s.x_ii.top();
    let cubic = FarField::Cubic { c: s.c, c2: 0.0 }.eval(top);
    let vals: Vec<f64> = (0..=g.nx).map(|i| s.x_ii.values[g.node(i, g.ny)] - cubic).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    CellChecks { parity_max_err: parity, weak_residual: s.weak_residual, top_variance_ii: var }
}

fn h_min(mesh: &Mesh) -> f64 {
    mesh.triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| {
            let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Tall strips push the fit window below roundoff; the constants are still
/// valid there, so a missing fit is reported as `None`.
fn decay_rate(f: &CellField) -> Result<Option<f64>> {
    match estimate_decay(f) {
        Ok(fit) => Ok(fit.map(|d| d.rate)),
        Err(Error::Decay(msg)) => {
            log::warn!("decay fit skipped: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Constants with optional Richardson extrapolation `(4·fine − coarse)/3`.
pub fn cell_constants(p: &Profile, t_top: f64, res: &CellResolution) -> Result<CellConstants> {
    let coarse = solve_cell_problems(p, t_top, &res.strip)?;
    let dx = decay_rate(&coarse.x)?;
    let dxt = decay_rate(&coarse.x_tilde)?;
    let mut ch = checks(&coarse);
    let mut hm = h_min(&coarse.x.mesh);
    let (c, c_i, c_ii) = if res.richardson {
        let fine = solve_cell_problems(p, t_top, &res.strip.refined())?;
        let cf = checks(&fine);
        ch = CellChecks {
            parity_max_err: ch.parity_max_err.max(cf.parity_max_err),
            weak_residual: ch.weak_residual.max(cf.weak_residual),
            top_variance_ii: ch.top_variance_ii.max(cf.top_variance_ii),
        };
        hm = h_min(&fine.x.mesh);
        let r = |f: f64, c: f64| (4.0 * f - c) / 3.0;
        (r(fine.c, coarse.c), r(fine.c_i, coarse.c_i), r(fine.c_ii, coarse.c_ii))
    } else {
        (coarse.c, coarse.c_i, coarse.c_ii)
    };
    Ok(CellConstants {
        c,
        c_i,
        c_ii,
        decay_rate_x: dx,
        decay_rate_xtilde: dxt,
        t: t_top,
        h_min: hm,
        extrapolated: res.richardson,
        checks: ch,
    })
}
