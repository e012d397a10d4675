//! Shift-and-invert block subspace iteration for `K u = λ M u`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ldl::LdlFactor;
use super::sparse::{dot, norm2, SparseSymMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub mass_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EigOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Guard vectors carried beyond `count`; `0` picks `max(count, 6)`.
    pub guard: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { tol: 1e-10, max_iter: 400, seed: 20240607, guard: 0 }
    }
}

/// `‖K u − λ M u‖₂ / ((1+|λ|)‖u‖_M)`.
pub fn relative_residual(k: &SparseSymMatrix, m: &SparseSymMatrix, value: f64, u: &[f64]) -> f64 {
    let ku = k.mul_vec(u);
    let mu = m.mul_vec(u);
    let r: Vec<f64> = ku.iter().zip(&mu).map(|(a, b)| a - value * b).collect();
    norm2(&r) / ((1.0 + value.abs()) * dot(u, &mu).sqrt())
}

fn m_orthonormalize(m: &SparseSymMatrix, cols: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    let n = m.dim();
    let mut i = 0;
    let mut retries = 0;
    while i < cols.len() {
        let before = dot(&cols[i], &m.mul_vec(&cols[i])).sqrt();
        for _ in 0..2 {
            let mc = m.mul_vec(&cols[i]);
            for j in 0..i {
                let c = dot(&cols[j], &mc);
                let (head, tail) = cols.split_at_mut(i);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= c * y;
                }
            }
        }
        let nrm = dot(&cols[i], &m.mul_vec(&cols[i])).sqrt();
        if !(nrm > 1e-10 * before) || nrm == 0.0 {
            // Direction lost to the previous ones; restart it at random.
            cols[i] = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            retries += 1;
            assert!(retries < 100, "cannot complete an M-orthonormal basis");
            continue;
        }
        cols[i].iter_mut().for_each(|x| *x /= nrm);
        i += 1;
    }
}

fn factor_shifted(k: &SparseSymMatrix, m: &SparseSymMatrix, target: f64) -> Result<(LdlFactor, f64)> {
    let mut shift = target;
    let mut last = None;
    for attempt in 0..6 {
        match LdlFactor::factor(&k.combine(1.0, m, -shift)) {
            Ok(f) => return Ok((f, shift)),
            Err(e) => {
                last = Some(e);
                shift = target + (attempt + 1) as f64 * 1e-7 * (1.0 + target.abs());
            }
        }
    }
    Err(last.unwrap())
}

/// The `count` eigenpairs of `K u = λ M u` closest to `target`, ascending.
pub fn eigs_smallest_near(
    k: &SparseSymMatrix,
    m: &SparseSymMatrix,
    target: f64,
    count: usize,
    opts: &EigOptions,
) -> Result<Vec<EigenPair>> {
    let n = k.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!("cannot compute {count} eigenpairs of a {n}-dimensional problem")));
    }
    let guard = if opts.guard == 0 { count.max(6) } else { opts.guard };
    let p = (count + guard).min(n);
    let (fac, shift) = factor_shifted(k, m, target)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut y: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    m_orthonormalize(m, &mut y, &mut rng);

    let mut worst = f64::INFINITY;
    for _iter in 0..opts.max_iter {
        let mut z: Vec<Vec<f64>> = y.iter().map(|v| fac.solve(&m.mul_vec(v))).collect();
        m_orthonormalize(m, &mut z, &mut rng);

        let kz: Vec<Vec<f64>> = z.iter().map(|v| k.mul_vec(v)).collect();
        let mz: Vec<Vec<f64>> = z.iter().map(|v| m.mul_vec(v)).collect();
        let kr = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&z[i], &kz[j]) + dot(&z[j], &kz[i])));
        let mr = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&z[i], &mz[j]) + dot(&z[j], &mz[i])));
        let chol = mr
            .clone()
            .cholesky()
            .ok_or(Error::NoConvergence { iterations: _iter, residual: f64::NAN })?;
        let l = chol.l();
        let linv = l.clone().try_inverse().expect("Cholesky factor is invertible");
        let c = &linv * &kr * linv.transpose();
        let c = 0.5 * (&c + c.transpose());
        let eig = SymmetricEigen::new(c);
        let s = linv.transpose() * &eig.eigenvectors;

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| {
            (eig.eigenvalues[a] - shift).abs().total_cmp(&(eig.eigenvalues[b] - shift).abs()).then(a.cmp(&b))
        });

        let combine = |basis: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (q, b) in basis.iter().enumerate() {
                let w = s[(q, col)];
                for (o, x) in out.iter_mut().zip(b) {
                    *o += w * x;
                }
            }
            out
        };

        let mut pairs = Vec::with_capacity(count);
        worst = 0.0;
        for &col in order.iter().take(count) {
            let theta = eig.eigenvalues[col];
            let u = combine(&z, col);
            let ku = combine(&kz, col);
            let mu = combine(&mz, col);
            let mass = dot(&u, &mu).sqrt();
            let r: Vec<f64> = ku.iter().zip(&mu).map(|(a, b)| a - theta * b).collect();
            let res = norm2(&r) / ((1.0 + theta.abs()) * mass);
            worst = worst.max(res);
            pairs.push(EigenPair { value: theta, vector: u, mass_norm: mass });
        }
        if worst <= opts.tol {
            pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
            for pr in &mut pairs {
                let s = pr.mass_norm;
                pr.vector.iter_mut().for_each(|x| *x /= s);
                pr.mass_norm = 1.0;
            }
            return Ok(pairs);
        }
        y = order.iter().map(|&col| combine(&z, col)).collect();
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble::{apply_dirichlet, assemble};
    use crate::mesh::{mesh_limit_domain, BoundaryTag};
    use std::f64::consts::PI;

    #[test]
    fn cluster_and_ground_state_on_rectangle() {
        let mesh = mesh_limit_domain(1.0 / 16.0).unwrap();
        let red = apply_dirichlet(&assemble(&mesh), &mesh, &[BoundaryTag::Gamma0]).unwrap();
        let opts = EigOptions::default();
        let pair = eigs_smallest_near(&red.k, &red.m, 6.25 * PI * PI, 2, &opts).unwrap();
        for p in &pair {
            assert!((p.value / (6.25 * PI * PI) - 1.0).abs() < 0.05, "{}", p.value);
            assert!(relative_residual(&red.k, &red.m, p.value, &p.vector) <= 1e-10);
        }
        let g = red.m.inner(&pair[0].vector, &pair[1].vector);
        assert!(g.abs() < 1e-10);
        assert!((red.m.inner(&pair[0].vector, &pair[0].vector) - 1.0).abs() < 1e-10);

        let low = eigs_smallest_near(&red.k, &red.m, -100.0, 1, &opts).unwrap();
        let exact = 0.25 * PI * PI;
        assert!(low[0].value >= exact && low[0].value < exact * 1.01);
    }
}
