//! Weighted point-cloud measures, canonical generators and regularity estimates.

use std::sync::OnceLock;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, distance, distance_squared};

/// Rotation taking the support to a graph over the first `n` coordinates.
/// Stored row-major; `graph_coords(x) = rotation · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFrame {
    d: usize,
    rotation: Vec<f64>,
}

impl GraphFrame {
    pub fn identity(d: usize) -> Self {
        let mut rotation = vec![0.0; d * d];
        for i in 0..d {
            rotation[i * d + i] = 1.0;
        }
        Self { d, rotation }
    }

    /// Builds a frame from a row-major orthogonal matrix.
    pub fn from_rotation(d: usize, rotation: Vec<f64>) -> Result<Self> {
        if rotation.len() != d * d {
            return Err(Error::InvalidArgument(format!(
                "rotation has {} entries, expected {}",
                rotation.len(),
                d * d
            )));
        }
        for i in 0..d {
            for k in 0..d {
                let inner: f64 = (0..d)
                    .map(|c| rotation[i * d + c] * rotation[k * d + c])
                    .sum();
                let target = if i == k { 1.0 } else { 0.0 };
                if (inner - target).abs() > 1e-10 {
                    return Err(Error::InvalidArgument(
                        "frame rotation is not orthogonal".into(),
                    ));
                }
            }
        }
        Ok(Self { d, rotation })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Row-major rotation matrix.
    pub fn rotation(&self) -> &[f64] {
        &self.rotation
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.d)
    }

    /// Coordinate `axis` of the rotated vector.
    #[inline]
    pub fn coordinate(&self, v: &[f64], axis: usize) -> f64 {
        let row = &self.rotation[axis * self.d..(axis + 1) * self.d];
        row.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Ambient vector whose rotated coordinates are `graph`.
    pub fn to_ambient(&self, graph: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|c| {
                (0..self.d)
                    .map(|axis| self.rotation[axis * self.d + c] * graph[axis])
                    .sum()
            })
            .collect()
    }

    /// Euclidean norm of the first `n` rotated coordinates.
    #[inline]
    pub fn projected_norm(&self, v: &[f64], n: usize) -> f64 {
        (0..n)
            .map(|axis| {
                let c = self.coordinate(v, axis);
                c * c
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Finite positive measure `Σ w_i δ_{p_i}` approximating an `n`-dimensional set in ℝ^d.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    d: usize,
    n: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    label: String,
    frame: Option<GraphFrame>,
    min_spacing: OnceLock<f64>,
    diameter: OnceLock<f64>,
}

impl DiscreteMeasure {
    pub fn new(
        n: usize,
        d: usize,
        coords: Vec<f64>,
        weights: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if n < 1 || n >= d {
            return Err(Error::InvalidArgument(format!(
                "dimensions must satisfy 1 <= n < d, got n={n}, d={d}"
            )));
        }
        if coords.len() != weights.len() * d {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not match {} weights in dimension {d}",
                coords.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidArgument("measure has no points".into()));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weight {bad} is not a positive finite number"
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(Self {
            d,
            n,
            coords,
            weights,
            label: label.into(),
            frame: None,
            min_spacing: OnceLock::new(),
            diameter: OnceLock::new(),
        })
    }

    pub fn with_frame(mut self, frame: GraphFrame) -> Result<Self> {
        if frame.dim() != self.d {
            return Err(Error::InvalidArgument(
                "frame dimension does not match the measure".into(),
            ));
        }
        self.frame = Some(frame);
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn target_dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn frame(&self) -> Option<&GraphFrame> {
        self.frame.as_ref()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// Mass of the closed ball `|p - center| <= radius`.
    pub fn ball_mass(&self, center: &[f64], radius: f64) -> f64 {
        let r2 = radius * radius;
        compensated_sum(
            (0..self.len())
                .filter(|&i| distance_squared(self.point(i), center) <= r2)
                .map(|i| self.weights[i]),
        )
    }

    /// Smallest distance between two distinct support points (`+∞` for one point).
    pub fn min_spacing(&self) -> f64 {
        *self.min_spacing.get_or_init(|| {
            let mut best = f64::INFINITY;
            for i in 0..self.len() {
                for k in (i + 1)..self.len() {
                    let d2 = distance_squared(self.point(i), self.point(k));
                    if d2 > 0.0 && d2 < best {
                        best = d2;
                    }
                }
            }
            best.sqrt()
        })
    }

    pub fn diameter(&self) -> f64 {
        *self.diameter.get_or_init(|| {
            let mut best = 0.0f64;
            for i in 0..self.len() {
                for k in (i + 1)..self.len() {
                    best = best.max(distance_squared(self.point(i), self.point(k)));
                }
            }
            best.sqrt()
        })
    }

    /// Weighted centroid of the given member indices.
    pub fn centroid(&self, members: &[usize]) -> Vec<f64> {
        let mass = compensated_sum(members.iter().map(|&i| self.weights[i]));
        (0..self.d)
            .map(|axis| {
                compensated_sum(
                    members
                        .iter()
                        .map(|&i| self.weights[i] * self.point(i)[axis]),
                ) / mass
            })
            .collect()
    }

    /// Sub-measure of the points accepted by `keep`, preserving order and frame.
    pub fn restrict<F: Fn(&[f64]) -> bool>(&self, keep: F) -> Result<Self> {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for i in 0..self.len() {
            if keep(self.point(i)) {
                coords.extend_from_slice(self.point(i));
                weights.push(self.weights[i]);
            }
        }
        let mut out = Self::new(self.n, self.d, coords, weights, self.label.clone())?;
        out.frame = self.frame.clone();
        Ok(out)
    }

    /// Same support with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = Self::new(
            self.n,
            self.d,
            self.coords.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
            self.label.clone(),
        )?;
        out.frame = self.frame.clone();
        Ok(out)
    }

    pub fn to_signed(&self) -> SignedMeasure {
        SignedMeasure {
            d: self.d,
            coords: self.coords.clone(),
            weights: self.weights.clone(),
        }
    }
}

/// Finite signed measure `Σ w_i δ_{p_i}`; weights may be negative or zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    d: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(d: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if coords.len() != weights.len() * d {
            return Err(Error::InvalidArgument(
                "coordinates do not match weights".into(),
            ));
        }
        if coords.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite entry in signed measure".into(),
            ));
        }
        Ok(Self { d, coords, weights })
    }

    pub fn zero(d: usize) -> Self {
        Self {
            d,
            coords: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn total_variation(&self) -> f64 {
        compensated_sum(self.weights.iter().map(|w| w.abs()))
    }

    /// `self - other` as a concatenated atom list.
    pub fn difference(&self, other: &SignedMeasure) -> Result<SignedMeasure> {
        if self.d != other.d {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let mut weights = self.weights.clone();
        weights.extend(other.weights.iter().map(|w| -w));
        Ok(SignedMeasure {
            d: self.d,
            coords,
            weights,
        })
    }

    pub fn scaled(&self, factor: f64) -> SignedMeasure {
        SignedMeasure {
            d: self.d,
            coords: self.coords.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }
}

/// One-dimensional waveform used as the first graph component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `amplitude · sin(2π · frequency · t)`.
    Sine {
        amplitude: f64,
        frequency: f64,
    },
    /// Triangle wave rising from 0 to `amplitude` over half a period.
    Sawtooth {
        amplitude: f64,
        period: f64,
    },
    /// `amplitude · (1 - s²)²` with `s = (t - center)/width`, zero for `|s| >= 1`.
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

const BUMP_SLOPE_FACTOR: f64 = 1.539_600_717_839_002; // 8 / (3√3)

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Sine {
                amplitude,
                frequency,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * t).sin(),
            Profile::Sawtooth { amplitude, period } => {
                let u = (t / period).rem_euclid(1.0);
                let tri = if u < 0.5 { 2.0 * u } else { 2.0 - 2.0 * u };
                amplitude * tri
            }
            Profile::Bump {
                amplitude,
                center,
                width,
            } => {
                let s = (t - center) / width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - s * s).powi(2)
                }
            }
        }
    }

    pub fn slope(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Sine {
                amplitude,
                frequency,
            } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                amplitude * w * (w * t).cos()
            }
            Profile::Sawtooth { amplitude, period } => {
                let u = (t / period).rem_euclid(1.0);
                let s = 2.0 * amplitude / period;
                if u < 0.5 {
                    s
                } else {
                    -s
                }
            }
            Profile::Bump {
                amplitude,
                center,
                width,
            } => {
                let s = (t - center) / width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    -4.0 * amplitude * s * (1.0 - s * s) / width
                }
            }
        }
    }

    /// Analytic supremum of `|slope|`.
    pub fn max_slope(&self) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Sine {
                amplitude,
                frequency,
            } => (amplitude * 2.0 * std::f64::consts::PI * frequency).abs(),
            Profile::Sawtooth { amplitude, period } => (2.0 * amplitude / period).abs(),
            Profile::Bump {
                amplitude, width, ..
            } => (amplitude / width).abs() * BUMP_SLOPE_FACTOR,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Profile::Zero => true,
            Profile::Sine {
                amplitude,
                frequency,
            } => amplitude.is_finite() && frequency.is_finite(),
            Profile::Sawtooth { amplitude, period } => {
                amplitude.is_finite() && period.is_finite() && period > 0.0
            }
            Profile::Bump {
                amplitude,
                center,
                width,
            } => amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid profile parameters {self:?}"
            )))
        }
    }
}

/// Parameters of a Lipschitz graph `y ↦ (y, A(y))` over `[0,1]^n`, optionally padded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    pub d: usize,
    pub profile: Profile,
    pub lip_bound: f64,
    pub resolution: usize,
    /// Extra samples per side, as a fraction of the unit interval; the profile vanishes there.
    #[serde(default)]
    pub padding: f64,
}

impl GraphSpec {
    pub fn new(n: usize, d: usize, profile: Profile, lip_bound: f64, resolution: usize) -> Self {
        Self {
            n,
            d,
            profile,
            lip_bound,
            resolution,
            padding: 0.0,
        }
    }

    pub fn with_padding(mut self, padding: f64) -> Self {
        self.padding = padding;
        self
    }

    /// Number of padding cells on each side of the unit interval.
    pub fn padding_cells(&self) -> usize {
        (self.padding * self.resolution as f64).round() as usize
    }

    /// Graph height function `A(y) = (p(y_1), 0, …)`, with `p` switched off outside `[0,1]`.
    pub fn height(&self, y: &[f64]) -> f64 {
        if (0.0..=1.0).contains(&y[0]) {
            self.profile.value(y[0])
        } else {
            0.0
        }
    }

    fn gradient_norm(&self, y: &[f64]) -> f64 {
        if (0.0..=1.0).contains(&y[0]) {
            self.profile.slope(y[0]).abs()
        } else {
            0.0
        }
    }
}

pub fn generate_lipschitz_graph(spec: &GraphSpec) -> Result<DiscreteMeasure> {
    let GraphSpec {
        n,
        d,
        lip_bound,
        resolution,
        ..
    } = *spec;
    if n < 1 || n >= d {
        return Err(Error::InvalidArgument(format!(
            "dimensions must satisfy 1 <= n < d, got n={n}, d={d}"
        )));
    }
    if !(lip_bound >= 0.0) || resolution < 1 || !(spec.padding >= 0.0) {
        return Err(Error::InvalidArgument(
            "lip_bound and padding must be nonnegative, resolution at least 1".into(),
        ));
    }
    spec.profile.validate()?;
    let slope = spec.profile.max_slope();
    if slope > lip_bound * (1.0 + 1e-12) {
        return Err(Error::SlopeViolation {
            slope,
            bound: lip_bound,
        });
    }
    let pad = spec.padding_cells();
    let per_axis = resolution + 2 * pad;
    let count = per_axis
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidArgument("graph too large".into()))?;
    let cell = 1.0 / resolution as f64;
    let cell_volume = cell.powi(n as i32);
    let mut coords = Vec::with_capacity(count * d);
    let mut weights = Vec::with_capacity(count);
    let mut y = vec![0.0; n];
    for flat in 0..count {
        let mut rest = flat;
        for axis in (0..n).rev() {
            let k = rest % per_axis;
            rest /= per_axis;
            y[axis] = (k as f64 - pad as f64 + 0.5) * cell;
        }
        let grad = spec.gradient_norm(&y);
        coords.extend_from_slice(&y);
        coords.push(spec.height(&y));
        coords.extend(std::iter::repeat(0.0).take(d - n - 1));
        weights.push((1.0 + grad * grad).sqrt() * cell_volume);
    }
    let label = format!(
        "graph(n={n},d={d},{:?},res={resolution},pad={})",
        spec.profile, spec.padding
    );
    DiscreteMeasure::new(n, d, coords, weights, label)?.with_frame(GraphFrame::identity(d))
}

/// Unit segment `[0,1] × {0}` sampled at cell midpoints, as a flat graph.
pub fn generate_segment(d: usize, resolution: usize) -> Result<DiscreteMeasure> {
    let m = generate_lipschitz_graph(&GraphSpec::new(1, d, Profile::Zero, 0.0, resolution))?;
    Ok(m.with_label(format!("segment(d={d},res={resolution})")))
}

/// Arc of the circle of given radius centred at the origin, angles in `[0, angle]`.
pub fn generate_circle_arc(
    d: usize,
    radius: f64,
    angle: f64,
    resolution: usize,
) -> Result<DiscreteMeasure> {
    if d < 2
        || !(radius > 0.0)
        || !(angle > 0.0)
        || angle > 2.0 * std::f64::consts::PI
        || resolution < 1
    {
        return Err(Error::InvalidArgument(
            "arc needs d >= 2, radius > 0, angle in (0, 2π], resolution >= 1".into(),
        ));
    }
    let mut coords = Vec::with_capacity(resolution * d);
    for i in 0..resolution {
        let theta = (i as f64 + 0.5) / resolution as f64 * angle;
        coords.push(radius * theta.cos());
        coords.push(radius * theta.sin());
        coords.extend(std::iter::repeat(0.0).take(d - 2));
    }
    let weights = vec![radius * angle / resolution as f64; resolution];
    DiscreteMeasure::new(
        1,
        d,
        coords,
        weights,
        format!("arc(d={d},r={radius},angle={angle},res={resolution})"),
    )
}

/// Centres of the generation-`g` squares of the four-corner Cantor construction in `[0,1]²`.
pub fn generate_four_corner_cantor(generations: u32, d: usize) -> Result<DiscreteMeasure> {
    if generations < 1 || d < 2 {
        return Err(Error::InvalidArgument(
            "Cantor set needs generations >= 1 and d >= 2".into(),
        ));
    }
    if generations > 10 {
        return Err(Error::InvalidArgument(
            "Cantor generation above 10 exceeds desk scale".into(),
        ));
    }
    let count = 4usize.pow(generations);
    let side = 0.25f64.powi(generations as i32);
    let mut coords = Vec::with_capacity(count * d);
    for index in 0..count {
        let (mut x, mut y) = (0.0, 0.0);
        let mut scale = 1.0;
        let mut digits = index;
        for _ in 0..generations {
            let corner = digits % 4;
            digits /= 4;
            scale *= 0.25;
            x += (corner & 1) as f64 * 3.0 * scale;
            y += (corner >> 1) as f64 * 3.0 * scale;
        }
        coords.push(x + side / 2.0);
        coords.push(y + side / 2.0);
        coords.extend(std::iter::repeat(0.0).take(d - 2));
    }
    let weights = vec![side; count];
    DiscreteMeasure::new(
        1,
        d,
        coords,
        weights,
        format!("cantor(g={generations},d={d})"),
    )
}

/// Which support points serve as ball centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterPolicy {
    All,
    Indices { indices: Vec<usize> },
    Sample { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityEstimate {
    pub c_lo: f64,
    pub c_hi: f64,
    pub samples: usize,
    pub excluded_radii: Vec<f64>,
}

/// Extremes of `μ(B(x,r))/r^n` over sampled centres and admissible radii.
pub fn ad_regularity(
    mu: &DiscreteMeasure,
    radii: &[f64],
    centers: &CenterPolicy,
) -> Result<RegularityEstimate> {
    if mu.is_empty() {
        return Err(Error::UndefinedRegularity("empty measure".into()));
    }
    let single = mu.len() == 1;
    let floor = 4.0 * mu.min_spacing();
    let diam = mu.diameter();
    let mut admissible = Vec::new();
    let mut excluded = Vec::new();
    for &r in radii {
        let ok = r > 0.0 && (single || (r >= floor * (1.0 - 1e-12) && r <= diam * (1.0 + 1e-12)));
        if ok {
            admissible.push(r);
        } else {
            warn!("radius {r} outside [{floor}, {diam}] excluded from regularity estimate");
            excluded.push(r);
        }
    }
    if admissible.is_empty() {
        return Err(Error::UndefinedRegularity("no admissible radius".into()));
    }
    let indices: Vec<usize> = match centers {
        CenterPolicy::All => (0..mu.len()).collect(),
        CenterPolicy::Indices { indices } => {
            if let Some(bad) = indices.iter().find(|&&i| i >= mu.len()) {
                return Err(Error::InvalidArgument(format!(
                    "centre index {bad} out of range"
                )));
            }
            indices.clone()
        }
        CenterPolicy::Sample { count, seed } => {
            let mut all: Vec<usize> = (0..mu.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            all.shuffle(&mut rng);
            all.truncate((*count).max(1));
            all.sort_unstable();
            all
        }
    };
    if indices.is_empty() {
        return Err(Error::UndefinedRegularity("no centres sampled".into()));
    }
    let n = mu.target_dim() as i32;
    let mut c_lo = f64::INFINITY;
    let mut c_hi = 0.0f64;
    for &i in &indices {
        for &r in &admissible {
            let ratio = mu.ball_mass(mu.point(i), r) / r.powi(n);
            c_lo = c_lo.min(ratio);
            c_hi = c_hi.max(ratio);
        }
    }
    Ok(RegularityEstimate {
        c_lo,
        c_hi,
        samples: indices.len() * admissible.len(),
        excluded_radii: excluded,
    })
}

/// Mass of the closed annulus `a <= |p - z| <= b`.
pub fn annulus_mass(mu: &DiscreteMeasure, z: &[f64], a: f64, b: f64) -> Result<f64> {
    if !(a <= b) || a < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "annulus radii must satisfy 0 <= a <= b, got ({a}, {b})"
        )));
    }
    if z.len() != mu.ambient_dim() {
        return Err(Error::InvalidArgument("centre dimension mismatch".into()));
    }
    Ok(compensated_sum((0..mu.len()).filter_map(|i| {
        let r = distance(mu.point(i), z);
        (a <= r && r <= b).then(|| mu.weight(i))
    })))
}
