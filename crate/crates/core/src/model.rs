//! The asymptotic model of one profile: cell constants, the limit pair and
//! the corrector recurrence.

use std::sync::Arc;

use crate::cell::{cell_constants, CellConstants, CellResolution};
use crate::corrector::{correct, Corrections, LayerConstants, ModalBackend, ModalField, GAP_TOL};
use crate::error::{Error, Result};
use crate::limit::{analytic_cluster, cluster_modes, EigenCluster};
use crate::mesh::mesh_limit_domain;
use crate::profile::Profile;

/// Chebyshev points per outer solve.
pub const MODAL_POINTS: usize = 48;

/// Asymptotic data for one profile: cell constants, the limit pair and the
/// corrector recurrence on the modal backend.
pub struct Model {
    pub profile: Profile,
    pub constants: CellConstants,
    pub cluster: EigenCluster,
    pub backend: ModalBackend,
    pub corrections: Corrections<ModalField>,
}

impl Model {
    pub fn build(profile: Profile, t_top: f64, res: &CellResolution) -> Result<Self> {
        let constants = cell_constants(&profile, t_top, res)?;
        Self::from_constants(profile, constants)
    }

    pub fn from_constants(profile: Profile, constants: CellConstants) -> Result<Self> {
        let mesh = Arc::new(mesh_limit_domain(1.0 / 16.0)?);
        let (cluster, _) = analytic_cluster(mesh, GAP_TOL)?;
        let backend = ModalBackend::new(&cluster, MODAL_POINTS)?;
        let corrections = correct(&backend, LayerConstants::from(&constants))?;
        Ok(Model { profile, constants, cluster, backend, corrections })
    }

    /// `λ₀ + Σ_{i≤order} εⁱλᵢ` for branch index `l`.
    pub fn predict(&self, l: usize, eps: f64, order: usize) -> Result<f64> {
        let b = self.corrections.branches.get(l).ok_or_else(|| Error::InvalidArgument(format!("branch {}", l + 1)))?;
        crate::composite::predicted_lambda(b, eps, order)
    }

    /// `u₀⁽ˡ⁾` and its gradient in closed form.
    pub fn u0(&self, l: usize, x: [f64; 2]) -> (f64, [f64; 2]) {
        let mix = self.cluster.mix.expect("analytic cluster");
        let m = cluster_modes();
        let (g0, g1) = (m[0].grad(x), m[1].grad(x));
        (
            mix[l][0] * m[0].eval(x) + mix[l][1] * m[1].eval(x),
            [mix[l][0] * g0[0] + mix[l][1] * g1[0], mix[l][0] * g0[1] + mix[l][1] * g1[1]],
        )
    }
}
