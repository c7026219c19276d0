//! Odd Calderón–Zygmund kernels and truncation profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::GraphFrame;

/// Evaluation rule of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelRule {
    /// `x / |x|^{n+1}`, vector valued.
    Riesz,
    /// One component of the Riesz kernel.
    RieszComponent(usize),
    /// Real part `x1/|x|²` of the Cauchy kernel `(x1, -x2)/|x|²`.
    CauchyRe,
    /// Imaginary part `-x2/|x|²`.
    CauchyIm,
    /// Identically zero kernel, useful as a stub.
    Zero,
}

/// An odd kernel together with its CZ constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: String,
    pub rule: KernelRule,
    /// Homogeneity dimension.
    pub n: usize,
    /// Ambient dimension.
    pub d: usize,
    /// Constants of `|K| <= C0|x|^{-n}`, `|∇K| <= C1|x|^{-n-1}`, `|∇²K| <= C2|x|^{-n-2}`.
    pub constants: [f64; 3],
}

impl KernelSpec {
    pub fn riesz(n: usize, d: usize) -> Self {
        let nf = n as f64;
        Self {
            name: "riesz".into(),
            rule: KernelRule::Riesz,
            n,
            d,
            constants: [1.0, nf + 2.0, (nf + 1.0) * (nf + 6.0)],
        }
    }

    pub fn riesz_component(n: usize, d: usize, component: usize) -> Result<Self> {
        if component >= d {
            return Err(Error::InvalidArgument(format!(
                "component {component} out of range for d={d}"
            )));
        }
        let mut spec = Self::riesz(n, d);
        spec.name = format!("riesz_component:{component}");
        spec.rule = KernelRule::RieszComponent(component);
        Ok(spec)
    }

    pub fn cauchy_re(d: usize) -> Self {
        Self {
            name: "cauchy_re".into(),
            rule: KernelRule::CauchyRe,
            n: 1,
            d,
            constants: [1.0, 3.0, 14.0],
        }
    }

    pub fn cauchy_im(d: usize) -> Self {
        Self {
            name: "cauchy_im".into(),
            rule: KernelRule::CauchyIm,
            n: 1,
            d,
            constants: [1.0, 3.0, 14.0],
        }
    }

    pub fn zero(n: usize, d: usize) -> Self {
        Self {
            name: "zero".into(),
            rule: KernelRule::Zero,
            n,
            d,
            constants: [0.0; 3],
        }
    }

    /// Looks a kernel up by registry name.
    pub fn by_name(name: &str, n: usize, d: usize) -> Result<Self> {
        match name {
            "riesz" => Ok(Self::riesz(n, d)),
            "cauchy_re" if n == 1 && d >= 2 => Ok(Self::cauchy_re(d)),
            "cauchy_im" if n == 1 && d >= 2 => Ok(Self::cauchy_im(d)),
            "cauchy_re" | "cauchy_im" => Err(Error::InvalidArgument(
                "Cauchy kernels need n = 1, d >= 2".into(),
            )),
            "zero" => Ok(Self::zero(n, d)),
            other => match other.strip_prefix("riesz_component:") {
                Some(index) => {
                    let component = index.parse::<usize>().map_err(|_| {
                        Error::InvalidArgument(format!("bad component index in {other:?}"))
                    })?;
                    Self::riesz_component(n, d, component)
                }
                None => Err(Error::InvalidArgument(format!("unknown kernel {other:?}"))),
            },
        }
    }

    /// Number of output components.
    pub fn arity(&self) -> usize {
        match self.rule {
            KernelRule::Riesz => self.d,
            _ => 1,
        }
    }

    /// Writes `K(x)` into `out` (length `arity()`).
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return Err(Error::Singularity);
        }
        self.eval_nonzero(x, r2, out);
        Ok(())
    }

    /// `K(x)` given precomputed `|x|² > 0`.
    #[inline]
    pub fn eval_nonzero(&self, x: &[f64], r2: f64, out: &mut [f64]) {
        match self.rule {
            KernelRule::Riesz => {
                let scale = riesz_scale(r2, self.n);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v * scale;
                }
            }
            KernelRule::RieszComponent(c) => out[0] = x[c] * riesz_scale(r2, self.n),
            KernelRule::CauchyRe => out[0] = x[0] / r2,
            KernelRule::CauchyIm => out[0] = -x[1] / r2,
            KernelRule::Zero => out[0] = 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.arity()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

/// `|x|^{-(n+1)}` from `|x|²`.
#[inline]
fn riesz_scale(r2: f64, n: usize) -> f64 {
    let r = r2.sqrt();
    1.0 / (r2.powi(((n + 1) / 2) as i32) * if (n + 1) % 2 == 1 { r } else { 1.0 })
}

/// Quintic smoothstep rising on `[1/4, 4]`.
#[inline]
pub fn phi_r(t: f64) -> f64 {
    let u = ((t - 0.25) / 3.75).clamp(0.0, 1.0);
    u * u * u * (u * (6.0 * u - 15.0) + 10.0)
}

/// Derivative of [`phi_r`].
#[inline]
pub fn phi_r_derivative(t: f64) -> f64 {
    let u = (t - 0.25) / 3.75;
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    30.0 * u * u * (u - 1.0) * (u - 1.0) / 3.75
}

/// Minimum of `phi_r'` over `[1/3, 3]`, attained at the left endpoint.
pub const PHI_R_DERIVATIVE_FLOOR: f64 = 15488.0 / 4100625.0;

/// Truncation profile kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationProfile {
    /// `1` iff `|x| >= ε`.
    Sharp,
    /// `phi_r(|x|²/ε²)`.
    Smooth,
    /// Smooth profile applied to the first `n` coordinates in the graph frame.
    GraphProjected,
}

impl TruncationProfile {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sharp" => Ok(Self::Sharp),
            "smooth" => Ok(Self::Smooth),
            "graph_projected" => Ok(Self::GraphProjected),
            other => Err(Error::InvalidArgument(format!("unknown profile {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sharp => "sharp",
            Self::Smooth => "smooth",
            Self::GraphProjected => "graph_projected",
        }
    }
}

/// A profile bound to the data it needs for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ProfileEvaluator<'a> {
    kind: TruncationProfile,
    frame: Option<&'a GraphFrame>,
    n: usize,
}

impl<'a> ProfileEvaluator<'a> {
    pub fn new(kind: TruncationProfile, frame: Option<&'a GraphFrame>, n: usize) -> Result<Self> {
        if kind == TruncationProfile::GraphProjected && frame.is_none() {
            return Err(Error::InvalidArgument(
                "graph-projected profile needs a graph frame".into(),
            ));
        }
        Ok(Self { kind, frame, n })
    }

    pub fn kind(&self) -> TruncationProfile {
        self.kind
    }

    /// Squared radius the profile sees: `|x|²` or `|x̃|²`.
    #[inline]
    pub fn profile_radius_squared(&self, x: &[f64], r2: f64) -> f64 {
        match self.kind {
            TruncationProfile::GraphProjected => {
                let frame = self.frame.expect("checked at construction");
                (0..self.n)
                    .map(|axis| {
                        let c = frame.coordinate(x, axis);
                        c * c
                    })
                    .sum()
            }
            _ => r2,
        }
    }

    /// Profile weight given `s2`, the squared radius returned by [`profile_radius_squared`].
    #[inline]
    pub fn weight_from_radius_squared(&self, s2: f64, eps: f64) -> f64 {
        match self.kind {
            TruncationProfile::Sharp => {
                // Compared as radii so that a scale equal to a computed distance includes it.
                if s2.sqrt() >= eps {
                    1.0
                } else {
                    0.0
                }
            }
            _ => phi_r(s2 / (eps * eps)),
        }
    }

    pub fn eval(&self, eps: f64, x: &[f64]) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale must be positive, got {eps}"
            )));
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Ok(self.weight_from_radius_squared(self.profile_radius_squared(x, r2), eps))
    }

    /// Banded profile `φ_ε - φ_δ` for `0 < ε <= δ`.
    pub fn eval_banded(&self, eps: f64, delta: f64, x: &[f64]) -> Result<f64> {
        if !(eps > 0.0 && eps <= delta) {
            return Err(Error::InvalidArgument(format!(
                "banded profile needs 0 < ε <= δ, got ({eps}, {delta})"
            )));
        }
        Ok(self.eval(eps, x)? - self.eval(delta, x)?)
    }
}

/// Convenience wrapper for [`ProfileEvaluator::eval`].
pub fn profile_eval(
    kind: TruncationProfile,
    eps: f64,
    x: &[f64],
    frame: Option<&GraphFrame>,
    n: usize,
) -> Result<f64> {
    ProfileEvaluator::new(kind, frame, n)?.eval(eps, x)
}
