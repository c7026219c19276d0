//! Discrete laboratory for ρ-variation of singular integrals and quantitative
//! rectifiability coefficients on weighted point clouds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod lattice;
pub mod measure;
pub mod numeric;
pub mod operators;
pub mod variation;

pub use error::{Error, Result};
pub use geometry::Plane;
pub use kernels::{KernelSpec, TruncationProfile};
pub use lattice::{Cube, CubeId, Lattice, LatticeKind};
pub use measure::{DiscreteMeasure, GraphFrame, SignedMeasure};
pub use operators::{FamilyEvaluation, ScaleGrid};
pub use variation::{VariationMode, VariationResult};
