//! Conformal invariants of smooth bounded planar domains and their behaviour
//! near the boundary.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod curvature;
pub mod density;
pub mod error;
pub mod geometry;
pub mod heins;
pub mod hurwitz;
mod nearest;
pub mod oracles;
pub mod rigidity;
pub mod scaling;
pub mod sugawa;
pub mod sweep;
pub mod szego;

pub use error::{Error, Result};
