#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Eigenvalue asymptotics for the Laplacian on a domain whose lower wall
//! oscillates with period `ε`, in the case of a double limit eigenvalue.

pub mod cell;
pub mod composite;
pub mod corrector;
pub mod error;
pub mod fem;
pub mod limit;
pub mod model;
pub mod mesh;
pub mod profile;
pub mod study;

pub use error::{Error, Result};
