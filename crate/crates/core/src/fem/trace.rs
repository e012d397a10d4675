//! Functions of `x₁ ∈ (−½, ½)` living on `Γ₀`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Piecewise-linear trace sampled at increasing nodes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundaryTrace {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::InvalidArgument("trace needs matching nodes/values, at least 2".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("trace nodes must increase strictly".into()));
        }
        Ok(BoundaryTrace { nodes, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => return self.values[k],
            Err(k) => k.clamp(1, self.nodes.len() - 1),
        };
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        let t = (x - x0) / (x1 - x0);
        (1.0 - t) * self.values[k - 1] + t * self.values[k]
    }

    /// `∫ g dx₁` of the piecewise-linear interpolant.
    pub fn integral(&self) -> f64 {
        self.nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
            .sum()
    }

    /// L² projection onto `cos(kπ(x₁+½))`, `k < modes`, integrating the
    /// piecewise-linear interpolant exactly.
    pub fn to_cosine_series(&self, modes: usize) -> CosineSeries {
        let mut coeffs = vec![0.0; modes];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let w = k as f64 * PI;
            let mut acc = 0.0;
            for (x, v) in self.nodes.windows(2).zip(self.values.windows(2)) {
                let (a, b) = (x[0] + 0.5, x[1] + 0.5);
                let (ga, gb) = (v[0], v[1]);
                if k == 0 {
                    acc += 0.5 * (b - a) * (ga + gb);
                } else {
                    // ∫ (p + q s) cos(ws) ds on [a, b].
                    let q = (gb - ga) / (b - a);
                    let prim = |s: f64| (ga + q * (s - a)) * (w * s).sin() / w + q * (w * s).cos() / (w * w);
                    acc += prim(b) - prim(a);
                }
            }
            *c = if k == 0 { acc } else { 2.0 * acc };
        }
        CosineSeries { coeffs }
    }
}

/// `Σ_k c_k cos(kπ(x₁+½))`: the natural basis for the mixed problem on `Ω`,
/// whose lateral sides carry homogeneous Neumann data.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CosineSeries {
    pub coeffs: Vec<f64>,
}

impl CosineSeries {
    pub fn zero(modes: usize) -> Self {
        CosineSeries { coeffs: vec![0.0; modes] }
    }

    pub fn single(modes: usize, k: usize, c: f64) -> Self {
        let mut s = Self::zero(modes.max(k + 1));
        s.coeffs[k] = c;
        s
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    /// `m`-th derivative at `x`.
    pub fn eval_derivative(&self, x: f64, m: u32) -> f64 {
        let s = x + 0.5;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if c == 0.0 || (k == 0 && m > 0) {
                    return 0.0;
                }
                let w = k as f64 * PI;
                let th = w * s;
                let base = match m % 4 {
                    0 => th.cos(),
                    1 => -th.sin(),
                    2 => -th.cos(),
                    _ => th.sin(),
                };
                c * w.powi(m as i32) * base
            })
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_derivative(x, 0)
    }

    pub fn second_derivative(&self) -> CosineSeries {
        CosineSeries {
            coeffs: self.coeffs.iter().enumerate().map(|(k, &c)| -(k as f64 * PI).powi(2) * c).collect(),
        }
    }

    /// `∫_{−½}^{½} f g dx₁`.
    pub fn inner(&self, other: &CosineSeries) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(k, (a, b))| if k == 0 { a * b } else { 0.5 * a * b })
            .sum()
    }

    /// `a·self + b·other`.
    pub fn lin(&self, a: f64, other: &CosineSeries, b: f64) -> CosineSeries {
        let n = self.modes().max(other.modes());
        let get = |s: &CosineSeries, k: usize| s.coeffs.get(k).copied().unwrap_or(0.0);
        CosineSeries { coeffs: (0..n).map(|k| a * get(self, k) + b * get(other, k)).collect() }
    }

    pub fn scale(&self, a: f64) -> CosineSeries {
        CosineSeries { coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn sample(&self, nodes: &[f64]) -> BoundaryTrace {
        BoundaryTrace { nodes: nodes.to_vec(), values: nodes.iter().map(|&x| self.eval(x)).collect() }
    }
}
