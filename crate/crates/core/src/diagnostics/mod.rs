//! Constructive diagnostics: CZ decomposition, rectifiability detector, flatness, basic estimate, corona.

pub mod basic;
pub mod corona;
pub mod cz;
pub mod detector;
pub mod flatness;

pub use basic::{basic_estimate_check, BasicEstimate, BasicOptions};
pub use corona::{
    corona_build_and_validate, validate_corona, CoronaParams, CoronaStructure, CoronaValidation,
};
pub use cz::{cz_decompose, verify_cz, CzDecomposition};
pub use detector::{
    build_bad_sets, high_sm_search, tree_top, wgl_detect, CubeDiagnostic, DetectorConfig,
    DiagnosticReport, SmField, TreeTop, Verdict,
};
pub use flatness::{flatness_bound_check, FlatnessCheck};
