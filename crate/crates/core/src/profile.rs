//! Wall profiles `F`: even, 1-periodic, strictly negative cosine series.
//!
//! `F(ξ) = −d + Σ_k a_k cos(2πkξ)`. Flat and single-cosine profiles are the
//! special cases with no or one coefficient.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Flat,
    Cosine,
    Series,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    kind: ProfileKind,
    depth: f64,
    coeffs: Vec<f64>,
}

/// `sin(πx)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let n = (2.0 * x).round();
    let r = x - 0.5 * n;
    let s = (PI * r).sin();
    let c = (PI * r).cos();
    match (n as i64).rem_euclid(4) {
        0 => s,
        1 => c,
        2 => -s,
        _ => -c,
    }
}

/// `cos(πx)` with exact zeros at the half-integers.
pub fn cos_pi(x: f64) -> f64 {
    let n = (2.0 * x).round();
    let r = x - 0.5 * n;
    let s = (PI * r).sin();
    let c = (PI * r).cos();
    match (n as i64).rem_euclid(4) {
        0 => c,
        1 => -s,
        2 => -c,
        _ => s,
    }
}

impl Profile {
    pub fn flat(depth: f64) -> Result<Self> {
        Self::build(ProfileKind::Flat, depth, Vec::new())
    }

    pub fn cosine(depth: f64, amplitude: f64) -> Result<Self> {
        if !(amplitude >= 0.0) {
            return Err(Error::InvalidProfile(format!("amplitude must be >= 0, got {amplitude}")));
        }
        Self::build(ProfileKind::Cosine, depth, vec![amplitude])
    }

    pub fn series(depth: f64, coeffs: Vec<f64>) -> Result<Self> {
        Self::build(ProfileKind::Series, depth, coeffs)
    }

    /// Generic constructor mirroring the descriptor kinds; `params[0]` is the
    /// mean depth, the rest are cosine coefficients.
    pub fn make(kind: ProfileKind, params: &[f64]) -> Result<Self> {
        let (&d, rest) = params
            .split_first()
            .ok_or_else(|| Error::InvalidProfile("missing depth".into()))?;
        match kind {
            ProfileKind::Flat if rest.is_empty() => Self::flat(d),
            ProfileKind::Cosine if rest.len() == 1 => Self::cosine(d, rest[0]),
            ProfileKind::Series => Self::series(d, rest.to_vec()),
            _ => Err(Error::InvalidProfile(format!(
                "wrong parameter count {} for {kind:?}",
                params.len()
            ))),
        }
    }

    fn build(kind: ProfileKind, depth: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::InvalidProfile(format!("depth must be > 0, got {depth}")));
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidProfile("non-finite coefficient".into()));
        }
        let p = Profile { kind, depth, coeffs };
        let bound: f64 = p.coeffs.iter().map(|a| a.abs()).sum();
        if depth - bound <= 0.0 {
            let max = p.sampled_max();
            if max >= 0.0 {
                return Err(Error::ProfileNotNegative { max });
            }
        }
        Ok(p)
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Mean depth `d = −∫F`.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_flat(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0.0)
    }

    /// `(F(ξ), F′(ξ))`.
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        let mut f = -self.depth;
        let mut df = 0.0;
        for (i, &a) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            let arg = 2.0 * k * xi;
            f += a * cos_pi(arg);
            df -= 2.0 * PI * k * a * sin_pi(arg);
        }
        (f, df)
    }

    pub fn value(&self, xi: f64) -> f64 {
        self.eval(xi).0
    }

    fn sampled_max(&self) -> f64 {
        (0..=SAMPLES)
            .map(|i| self.value(i as f64 / SAMPLES as f64 - 0.5))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |F|` over one period, sampled (exact for flat and cosine).
    pub fn max_depth(&self) -> f64 {
        match self.kind {
            ProfileKind::Flat => self.depth,
            ProfileKind::Cosine => self.depth + self.coeffs[0].abs(),
            ProfileKind::Series => (0..=SAMPLES)
                .map(|i| -self.value(i as f64 / SAMPLES as f64 - 0.5))
                .fold(0.0, f64::max),
        }
    }

    /// `min |F|` over one period, sampled.
    pub fn min_depth(&self) -> f64 {
        -self.sampled_max()
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ProfileKind::Flat => write!(f, "flat:d={}", self.depth),
            ProfileKind::Cosine => write!(f, "cosine:d={},a={}", self.depth, self.coeffs[0]),
            ProfileKind::Series => {
                write!(f, "series:d={}", self.depth)?;
                for (i, a) in self.coeffs.iter().enumerate() {
                    write!(f, ",a{}={}", i + 1, a)?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidProfile(format!("{m} in {s:?}"));
        let (kind, body) = s.trim().split_once(':').ok_or_else(|| bad("missing ':'"))?;
        let mut depth = None;
        let mut amp = None;
        let mut series: Vec<(usize, f64)> = Vec::new();
        for item in body.split(',').filter(|t| !t.trim().is_empty()) {
            let (key, val) = item.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let key = key.trim();
            let val: f64 = val.trim().parse().map_err(|_| bad("bad number"))?;
            match key {
                "d" => depth = Some(val),
                "a" => amp = Some(val),
                _ => {
                    let idx = key
                        .strip_prefix('a')
                        .and_then(|k| k.parse::<usize>().ok())
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| bad("unknown key"))?;
                    series.push((idx, val));
                }
            }
        }
        let d = depth.ok_or_else(|| bad("missing d"))?;
        match kind.trim() {
            "flat" if amp.is_none() && series.is_empty() => Profile::flat(d),
            "cosine" if series.is_empty() => {
                Profile::cosine(d, amp.ok_or_else(|| bad("missing a"))?)
            }
            "series" if amp.is_none() => {
                let n = series.iter().map(|&(k, _)| k).max().unwrap_or(0);
                let mut coeffs = vec![0.0; n];
                for (k, v) in series {
                    coeffs[k - 1] = v;
                }
                Profile::series(d, coeffs)
            }
            _ => Err(bad("unknown kind or stray keys")),
        }
    }
}

impl serde::Serialize for Profile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Profile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
