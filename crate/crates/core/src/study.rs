//! Convergence studies over `ε = 1/(2N+1)`: FEM eigenvalues of `Ω^ε` against
//! the asymptotic branches, slope fits, CSV/JSON reports and a small cache.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell::{cell_constants, CellConstants, CellResolution};
use crate::composite::DUNAVANT5;
use crate::error::{Error, Result};
use crate::fem::assemble::p1_gradients;
use crate::fem::{assemble, apply_dirichlet, eigs_smallest_near, EigOptions};
use crate::mesh::{mesh_perturbed, BoundaryTag, EpsilonParam, LayerMeshSpec, Mesh, StripSpec};
use crate::model::Model;
use crate::profile::Profile;

pub const CSV_HEADER: &str = "N,eps,branch,lambda_eps,pred0,pred1,pred2,pred3,rem0,rem1,rem2,rem3,h1_err,cluster_gap";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub cells_per_half_period: usize,
    pub h_bulk: f64,
    pub grading: f64,
    pub layer_rows: usize,
    pub refine: u32,
    /// Extrapolate `λ_ε` from this mesh and one uniform refinement.
    pub richardson: bool,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let s = LayerMeshSpec::default();
        MeshConfig {
            cells_per_half_period: s.cells_per_half_period,
            h_bulk: s.h_bulk,
            grading: s.grading,
            layer_rows: s.layer_rows,
            refine: s.refine,
            richardson: true,
        }
    }
}

impl MeshConfig {
    pub fn spec(&self) -> LayerMeshSpec {
        LayerMeshSpec {
            cells_per_half_period: self.cells_per_half_period,
            h_bulk: self.h_bulk,
            grading: self.grading,
            layer_rows: self.layer_rows,
            refine: self.refine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub cells_per_half_period: usize,
    pub grading: f64,
    pub richardson: bool,
}

impl Default for StripConfig {
    fn default() -> Self {
        let r = CellResolution::default();
        StripConfig {
            t: 8.0,
            cells_per_half_period: r.strip.cells_per_half_period,
            grading: r.strip.grading,
            richardson: r.richardson,
        }
    }
}

impl StripConfig {
    pub fn resolution(&self) -> CellResolution {
        CellResolution {
            strip: StripSpec { cells_per_half_period: self.cells_per_half_period, grading: self.grading, ..Default::default() },
            richardson: self.richardson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Slopes with smaller `r²` are flagged.
    pub min_r2: f64,
    pub eig: EigOptions,
    /// Eigenpairs computed around the predicted cluster.
    pub eig_count: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { min_r2: 0.9, eig: EigOptions::default(), eig_count: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: String,
    pub json: String,
    pub slopes: String,
    /// Relative to `dir`; empty disables caching.
    pub cache: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            csv: "study.csv".into(),
            json: "study.json".into(),
            slopes: "slopes.json".into(),
            cache: "cache".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub profile: Profile,
    #[serde(rename = "N_list")]
    pub n_list: Vec<u32>,
    pub beta: f64,
    pub mesh: MeshConfig,
    pub strip: StripConfig,
    /// Remainder orders whose slopes are fitted.
    pub orders: Vec<usize>,
    pub tolerances: Tolerances,
    pub output: OutputConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            profile: Profile::cosine(1.0, 0.4).expect("valid default profile"),
            n_list: vec![3, 5, 7, 9, 11, 13],
            beta: 0.5,
            mesh: MeshConfig::default(),
            strip: StripConfig::default(),
            orders: vec![0, 1, 2, 3],
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 1) {
            return Err(Error::InvalidArgument("N_list must be nonempty with all N >= 1".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("N_list must be strictly increasing".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidArgument(format!("beta = {} outside (0, 1)", self.beta)));
        }
        if self.orders.iter().any(|&k| k > 3) {
            return Err(Error::InvalidArgument("orders must be <= 3".into()));
        }
        if self.tolerances.eig_count < 2 {
            return Err(Error::InvalidArgument("eig_count must be >= 2".into()));
        }
        if !(self.strip.t >= 3.0) {
            return Err(Error::InvalidArgument("strip T must be >= 3".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, hex.
    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

fn hash_json<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("config serializes");
    Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Least-squares line through `(log ε, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub r2: f64,
    pub intercept: f64,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("{} points, need at least 3", points.len())));
    }
    if let Some(&(e, v)) = points.iter().find(|&&(e, v)| !(e > 0.0) || !(v > 0.0)) {
        return Err(Error::Fit(format!("nonpositive point ({e}, {v})")));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|&(e, v)| (e.ln(), v.ln())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("all ε equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit { slope, r2, intercept: my - slope * mx })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    Identity,
    Swapped,
    Ambiguous,
}

/// Index-wise pairing of two ascending lists, checked against the swap.
pub fn pair_branches(fem: [f64; 2], pred: [f64; 2]) -> Pairing {
    let id = (fem[0] - pred[0]).abs() + (fem[1] - pred[1]).abs();
    let sw = (fem[0] - pred[1]).abs() + (fem[1] - pred[0]).abs();
    if (id - sw).abs() <= 1e-12 || (pred[0] - pred[1]).abs() <= 1e-12 {
        Pairing::Ambiguous
    } else if id < sw {
        Pairing::Identity
    } else {
        Pairing::Swapped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    #[serde(rename = "N")]
    pub n: u32,
    pub eps: f64,
    pub branch: usize,
    pub lambda_eps: f64,
    pub pred: [f64; 4],
    pub rem: [f64; 4],
    pub h1_err: f64,
    /// `λ_ε⁽²⁾ − λ_ε⁽¹⁾`.
    pub cluster_gap: f64,
    /// Eigenvalues before extrapolation: coarse, then fine if refined.
    pub lambda_meshes: Vec<f64>,
    /// `|⟨u_h, u₀⟩_M|` of the selected eigenvector.
    pub overlap: f64,
    pub pairing: Pairing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedN {
    #[serde(rename = "N")]
    pub n: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub branch: usize,
    pub quantity: String,
    pub fit: Option<SlopeFit>,
    pub points: usize,
    pub flagged: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config_hash: String,
    pub profile: String,
    pub constants: CellConstants,
    /// `[λ₀, λ₁, λ₂, λ₃]` per branch.
    pub coefficients: [[f64; 4]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub metadata: Metadata,
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub flagged: Vec<FlaggedN>,
    pub slopes: Vec<Slope>,
}

impl ConvergenceReport {
    pub fn rows_for(&self, branch: usize) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.branch == branch)
    }

    pub fn slope(&self, branch: usize, quantity: &str) -> Option<&Slope> {
        self.slopes.iter().find(|s| s.branch == branch && s.quantity == quantity)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{}", r.n, r.eps, r.branch, r.lambda_eps);
            for v in r.pred.iter().chain(&r.rem) {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{},{}", r.h1_err, r.cluster_gap);
        }
        s
    }

    /// Writes CSV, JSON and slopes into `dir`.
    pub fn write(&self, dir: &Path, out: &OutputConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(&out.csv), self.to_csv())?;
        std::fs::write(dir.join(&out.json), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join(&out.slopes), serde_json::to_string_pretty(&self.slopes)?)?;
        Ok(())
    }
}

/// `u₀⁽ˡ⁾` stretched from `Ω` onto `(−½,½)×(−εC, 1)`; exact for flat walls,
/// used only to recognize eigenvectors.
fn transplanted_u0(model: &Model, l: usize, eps: f64, x: [f64; 2]) -> f64 {
    let c = model.constants.c;
    model.u0(l, [x[0], (x[1] + eps * c) / (1.0 + eps * c)]).0
}

/// Eigenvalue and eigenvector of `Ω^ε` for both branches on one mesh.
struct MeshSolve {
    mesh: Mesh,
    values: [f64; 2],
    vectors: [Vec<f64>; 2],
    overlaps: [f64; 2],
}

/// Solves on `Ω^ε` (Dirichlet on `Γ_ε`) near `target` and picks, for each
/// branch, the eigenvector with the largest `M`-overlap with the stretched `u₀⁽ˡ⁾`.
fn solve_on_mesh(model: &Model, eps: EpsilonParam, spec: &LayerMeshSpec, target: f64, tol: &Tolerances) -> Result<MeshSolve> {
    let mesh = mesh_perturbed(&model.profile, eps, spec)?;
    let asm = assemble(&mesh);
    let red = apply_dirichlet(&asm, &mesh, &[BoundaryTag::GammaEps])?;
    let pairs = eigs_smallest_near(&red.k, &red.m, target, tol.eig_count, &tol.eig)?;
    let vectors: Vec<Vec<f64>> = pairs.iter().map(|p| red.expand(&p.vector)).collect();
    let mut pick = [0usize; 2];
    let mut overlaps = [0.0; 2];
    for l in 0..2 {
        let u0: Vec<f64> = mesh.vertices.iter().map(|&x| transplanted_u0(model, l, eps.eps, x)).collect();
        let m0 = asm.m.mul_vec(&u0);
        let scores: Vec<f64> = vectors.iter().map(|v| v.iter().zip(&m0).map(|(a, b)| a * b).sum::<f64>().abs()).collect();
        let best = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).expect("nonempty");
        pick[l] = best;
        overlaps[l] = scores[best];
    }
    if pick[0] == pick[1] {
        return Err(Error::NoDoubleCluster(format!(
            "both branches select eigenvalue {} at ε = {}",
            pairs[pick[0]].value, eps.eps
        )));
    }
    let mut vectors = vectors;
    let v1 = std::mem::take(&mut vectors[pick[1]]);
    let v0 = std::mem::take(&mut vectors[pick[0]]);
    Ok(MeshSolve {
        mesh,
        values: [pairs[pick[0]].value, pairs[pick[1]].value],
        vectors: [v0, v1],
        overlaps,
    })
}

/// `‖u_h − s·u₀‖_{H¹(Ω)}` over triangles with `x₂ ≥ 0`, with the sign `s`
/// chosen to match `u_h`.
pub fn h1_error_omega(mesh: &Mesh, u: &[f64], u0: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Sync) -> f64 {
    let parts: Vec<(f64, f64)> = mesh
        .triangles
        .par_iter()
        .filter(|t| t.iter().all(|&i| mesh.vertices[i][1] >= -1e-12))
        .map(|tri| {
            let v = tri.map(|i| mesh.vertices[i]);
            let (g, area) = p1_gradients(v);
            let uv = tri.map(|i| u[i]);
            let gu = [0, 1].map(|d| g[0][d] * uv[0] + g[1][d] * uv[1] + g[2][d] * uv[2]);
            let (mut plus, mut minus) = (0.0, 0.0);
            for (b, w) in DUNAVANT5 {
                let x = [0, 1].map(|d| b[0] * v[0][d] + b[1] * v[1][d] + b[2] * v[2][d]);
                let uh = b[0] * uv[0] + b[1] * uv[1] + b[2] * uv[2];
                let (a, ga) = u0(x);
                let e = |s: f64| (uh - s * a).powi(2) + (gu[0] - s * ga[0]).powi(2) + (gu[1] - s * ga[1]).powi(2);
                plus += w * area * e(1.0);
                minus += w * area * e(-1.0);
            }
            (plus, minus)
        })
        .collect();
    let (p, m) = parts.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    p.min(m).sqrt()
}

fn study_n(model: &Model, cfg: &StudyConfig, n: u32) -> Result<[StudyRow; 2]> {
    let eps = EpsilonParam::new(n)?;
    let e = eps.eps;
    let preds: Vec<[f64; 4]> = (0..2)
        .map(|l| {
            let mut p = [0.0; 4];
            for (k, v) in p.iter_mut().enumerate() {
                *v = model.corrections.branches[l].predict(e, k);
            }
            p
        })
        .collect();
    let target = 0.5 * (preds[0][2] + preds[1][2]);
    let spec = cfg.mesh.spec();
    let coarse = solve_on_mesh(model, eps, &spec, target, &cfg.tolerances)?;
    let (values, fine, meshes): ([f64; 2], MeshSolve, Vec<[f64; 2]>) = if cfg.mesh.richardson {
        let fine = solve_on_mesh(model, eps, &spec.refined(), target, &cfg.tolerances)?;
        let ext = [0, 1].map(|l| (4.0 * fine.values[l] - coarse.values[l]) / 3.0);
        let m = vec![coarse.values, fine.values];
        (ext, fine, m)
    } else {
        (coarse.values, coarse, vec![])
    };
    let meshes = if meshes.is_empty() { vec![values] } else { meshes };

    // Ascending FEM values against ascending predictions.
    let order = |v: [f64; 2]| if v[0] <= v[1] { [0, 1] } else { [1, 0] };
    let fo = order(values);
    let po = order([preds[0][2], preds[1][2]]);
    let pairing = pair_branches([values[fo[0]], values[fo[1]]], [preds[po[0]][2], preds[po[1]][2]]);
    let consistent = match pairing {
        Pairing::Identity => fo == po,
        Pairing::Swapped => fo != po,
        Pairing::Ambiguous => false,
    };
    if !consistent {
        log::warn!("N = {n}: eigenvector selection disagrees with the ordering of predictions ({pairing:?})");
    }
    let gap = values[1] - values[0];
    let rows = [0, 1].map(|l| {
        let lam = values[l];
        let h1 = h1_error_omega(&fine.mesh, &fine.vectors[l], |x| model.u0(l, x));
        StudyRow {
            n,
            eps: e,
            branch: l + 1,
            lambda_eps: lam,
            pred: preds[l],
            rem: preds[l].map(|p| (lam - p).abs()),
            h1_err: h1,
            cluster_gap: gap,
            lambda_meshes: meshes.iter().map(|m| m[l]).collect(),
            overlap: fine.overlaps[l],
            pairing,
        }
    });
    log::info!("N = {n}: λ = {:.8}, {:.8}", values[0], values[1]);
    Ok(rows)
}

fn fit_quantity(rows: &[&StudyRow], f: impl Fn(&StudyRow) -> f64, min_r2: f64) -> (Option<SlopeFit>, usize, bool, String) {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, f(r))).collect();
    match fit_slope(&pts) {
        Ok(fit) => {
            let flagged = !(fit.r2 >= min_r2);
            let note = if flagged { format!("r² = {:.4} < {min_r2}", fit.r2) } else { String::new() };
            (Some(fit), pts.len(), flagged, note)
        }
        Err(e) => (None, pts.len(), true, e.to_string()),
    }
}

pub fn fit_slopes(rows: &[StudyRow], orders: &[usize], min_r2: f64) -> Vec<Slope> {
    let mut out = Vec::new();
    for branch in 1..=2 {
        let rs: Vec<&StudyRow> = rows.iter().filter(|r| r.branch == branch).collect();
        let mut push = |quantity: String, f: &dyn Fn(&StudyRow) -> f64| {
            let (fit, points, flagged, note) = fit_quantity(&rs, f, min_r2);
            out.push(Slope { branch, quantity, fit, points, flagged, note });
        };
        for &k in orders {
            push(format!("rem{k}"), &|r: &StudyRow| r.rem[k]);
        }
        push("h1_err".into(), &|r: &StudyRow| r.h1_err);
    }
    out
}

fn cache_path(cfg: &StudyConfig) -> Option<PathBuf> {
    if cfg.output.cache.is_empty() {
        return None;
    }
    let key = hash_json(&(&cfg.profile, &cfg.strip));
    Some(cfg.output.dir.join(&cfg.output.cache).join(format!("{}.json", &key[..16])))
}

/// Cell constants, read from or written to the cache.
pub fn cached_constants(cfg: &StudyConfig) -> Result<CellConstants> {
    let path = cache_path(cfg);
    if let Some(p) = &path {
        if let Ok(text) = std::fs::read_to_string(p) {
            match serde_json::from_str::<CellConstants>(&text) {
                Ok(c) => {
                    log::info!("cell constants from cache {}", p.display());
                    return Ok(c);
                }
                Err(e) => log::warn!("ignoring unreadable cache {}: {e}", p.display()),
            }
        }
    }
    let c = cell_constants(&cfg.profile, cfg.strip.t, &cfg.strip.resolution())?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(p, serde_json::to_string_pretty(&c)?)?;
    }
    Ok(c)
}

/// Runs every `N` (in parallel) against an already built model.
pub fn run_study_with(model: &Model, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let results: Vec<(u32, Result<[StudyRow; 2]>)> =
        cfg.n_list.par_iter().map(|&n| (n, study_n(model, cfg, n))).collect();
    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (n, r) in results {
        match r {
            Ok(pair) => rows.extend(pair),
            Err(e) => {
                log::warn!("N = {n} flagged: {e}");
                flagged.push(FlaggedN { n, error: e.to_string() });
            }
        }
    }
    if 2 * flagged.len() > cfg.n_list.len() {
        return Err(Error::StudyFailed { flagged: flagged.len(), total: cfg.n_list.len() });
    }
    let slopes = fit_slopes(&rows, &cfg.orders, cfg.tolerances.min_r2);
    Ok(ConvergenceReport {
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.hash(),
            profile: model.profile.to_string(),
            constants: model.constants,
            coefficients: model.corrections.coefficients(),
        },
        config: cfg.clone(),
        rows,
        flagged,
        slopes,
    })
}

/// Builds the model (cell constants through the cache) and runs the study.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let constants = cached_constants(cfg)?;
    let model = Model::from_constants(cfg.profile.clone(), constants)?;
    run_study_with(&model, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_examples() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.02, 0.01].iter().map(|&e| (e, e * e)).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.02].iter().map(|&e: &f64| (e, 3.0 * e.powf(1.25))).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 1.25).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit_slope(&pts[..2]).is_err());
        assert!(fit_slope(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(pair_branches([44.0, 55.1], [44.06, 55.3]), Pairing::Identity);
        assert_eq!(pair_branches([44.0, 55.1], [50.0, 50.0]), Pairing::Ambiguous);
        assert_eq!(pair_branches([44.0, 55.1], [55.3, 44.06]), Pairing::Swapped);
    }

    #[test]
    fn config_validation() {
        let mut c = StudyConfig::default();
        assert!(c.validate().is_ok());
        c.n_list = vec![3, 3];
        assert!(c.validate().is_err());
        c.n_list = vec![0, 1];
        assert!(c.validate().is_err());
        let c = StudyConfig { beta: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_roundtrip_and_hash() {
        let c = StudyConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back = StudyConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let d = StudyConfig { beta: 0.4, ..Default::default() };
        assert_ne!(d.hash(), c.hash());
        let partial = StudyConfig::from_json(r#"{"profile": "flat:d=1", "N_list": [1, 2, 3]}"#).unwrap();
        assert_eq!(partial.n_list, vec![1, 2, 3]);
    }
}
