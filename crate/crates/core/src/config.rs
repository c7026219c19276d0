//! Experiment configuration, validation and provenance hashing.

use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{CoronaParams, DetectorConfig};
use crate::error::{Error, Result};
use crate::geometry::CoefficientOptions;
use crate::io::read_measure;
use crate::kernels::{KernelSpec, TruncationProfile};
use crate::lattice::{LatticeKind, ShiftSpec};
use crate::measure::{
    generate_circle_arc, generate_four_corner_cantor, generate_lipschitz_graph, generate_segment,
    DiscreteMeasure, GraphSpec,
};
use crate::operators::{outer_scale, GridSpec, ScaleGrid};
use crate::variation::{TestFunction, VariationMode};

/// Source of the measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Segment {
        d: usize,
        resolution: usize,
    },
    Arc {
        d: usize,
        radius: f64,
        angle: f64,
        resolution: usize,
    },
    Graph {
        spec: GraphSpec,
    },
    Cantor {
        generations: u32,
        d: usize,
    },
    /// Measure CSV with its JSON sidecar.
    File {
        path: PathBuf,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<DiscreteMeasure> {
        match self {
            MeasureSpec::Segment { d, resolution } => generate_segment(*d, *resolution),
            MeasureSpec::Arc {
                d,
                radius,
                angle,
                resolution,
            } => generate_circle_arc(*d, *radius, *angle, *resolution),
            MeasureSpec::Graph { spec } => generate_lipschitz_graph(spec),
            MeasureSpec::Cantor { generations, d } => generate_four_corner_cantor(*generations, *d),
            MeasureSpec::File { path } => read_measure(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub j_min: i32,
    /// Finest generation; defaults to the finest admissible one.
    pub j_max: Option<i32>,
    pub kind: LatticeKind,
    pub shift: ShiftSpec,
    /// Draws the shift from the run seed instead of `shift`.
    pub random_shift: bool,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            j_min: 0,
            j_max: None,
            kind: LatticeKind::Ambient,
            shift: ShiftSpec::default(),
            random_shift: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum GridPolicyName {
    /// `R` points per octave between `eps_max` and `eps_min`.
    Dyadic,
    /// All pairwise distances of the measure, shared by every point.
    Breakpoints,
    /// Each point's own distances; sharp profile only.
    PointBreakpoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub policy: GridPolicyName,
    pub per_octave: u32,
    /// Defaults to twice the diameter.
    pub eps_max: Option<f64>,
    /// Defaults to the minimal spacing.
    pub eps_min: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            policy: GridPolicyName::Dyadic,
            per_octave: 8,
            eps_max: None,
            eps_min: None,
        }
    }
}

impl GridConfig {
    pub fn build(&self, mu: &DiscreteMeasure) -> Result<GridSpec> {
        Ok(match self.policy {
            GridPolicyName::Dyadic => GridSpec::Shared(ScaleGrid::dyadic(
                self.eps_max.unwrap_or_else(|| outer_scale(mu)),
                self.eps_min.unwrap_or_else(|| {
                    let s = mu.min_spacing();
                    if s.is_finite() {
                        s
                    } else {
                        outer_scale(mu) / 2.0
                    }
                }),
                self.per_octave,
            )?),
            GridPolicyName::Breakpoints => GridSpec::Shared(ScaleGrid::breakpoints(mu)?),
            GridPolicyName::PointBreakpoints => GridSpec::PointBreakpoints,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: MeasureSpec,
    #[serde(default)]
    pub lattice: LatticeConfig,
    /// `riesz`, `riesz_component:<index>`, `cauchy_re`, `cauchy_im` or `zero`.
    #[serde(default = "default_kernel")]
    pub kernel: String,
    /// `sharp`, `smooth` or `graph_projected`.
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_mode")]
    pub variation_mode: VariationMode,
    /// Interval sequence for the oscillation mode; defaults to dyadic intervals covering the grid.
    #[serde(default)]
    pub oscillation_intervals: Option<Vec<f64>>,
    /// Test functions for the norm-ratio probe run by `variation`.
    #[serde(default)]
    pub probe: Vec<TestFunction>,
    #[serde(default)]
    pub coefficients: CoefficientOptions,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub corona: CoronaParams,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_kernel() -> String {
    "riesz".into()
}

fn default_profile() -> String {
    "smooth".into()
}

fn default_rho() -> Vec<f64> {
    vec![3.0]
}

fn default_mode() -> VariationMode {
    VariationMode::Full
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks value ranges that the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.rho.is_empty() || self.rho.iter().any(|r| !(*r >= 1.0)) {
            return Err(Error::Config(
                "rho must be a nonempty list of values >= 1".into(),
            ));
        }
        if self.grid.per_octave == 0 {
            return Err(Error::Config("grid.per_octave must be at least 1".into()));
        }
        TruncationProfile::by_name(&self.profile).map_err(|e| Error::Config(e.to_string()))?;
        if self.kernel.is_empty() {
            return Err(Error::Config("kernel name is empty".into()));
        }
        Ok(())
    }

    pub fn kernel_spec(&self, n: usize, d: usize) -> Result<KernelSpec> {
        KernelSpec::by_name(&self.kernel, n, d).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn truncation_profile(&self) -> Result<TruncationProfile> {
        TruncationProfile::by_name(&self.profile).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn shift(&self) -> ShiftSpec {
        if self.lattice.random_shift {
            ShiftSpec::Seed(self.seed)
        } else {
            self.lattice.shift.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// JSON schema of [`ExperimentConfig`].
pub fn config_schema() -> String {
    let schema = schemars::schema_for!(ExperimentConfig);
    serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
}
