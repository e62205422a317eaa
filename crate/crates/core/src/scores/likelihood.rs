use crate::error::{Error, Result};
use crate::grid::PixelScoreMap;

pub const DEFAULT_SOFTMIN_TAU: f64 = 0.1;

/// Temperature of the soft minimum. Small values approach the minimum pixel
/// score, large values approach the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftminParams {
    tau: f64,
}

impl SoftminParams {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Validation(format!("softmin temperature must be > 0, got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Default for SoftminParams {
    fn default() -> Self {
        Self {
            tau: DEFAULT_SOFTMIN_TAU,
        }
    }
}

/// Mean annotated-class likelihood.
pub fn cil(scores: &PixelScoreMap) -> f64 {
    let s = scores.as_slice();
    s.iter().sum::<f64>() / s.len() as f64
}

/// Exponentially weighted mean of pixel scores with weights
/// `exp((1 - s) / tau)`, normalized over the image.
pub fn softmin(scores: &PixelScoreMap, params: SoftminParams) -> f64 {
    let s = scores.as_slice();
    // Largest exponent belongs to the smallest score; shift by it so every
    // weight is in (0, 1].
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let (weighted, total) = s.iter().fold((0.0, 0.0), |(num, den), &v| {
        let w = ((min - v) / params.tau).exp();
        (num + v * w, den + w)
    });
    // Rounding can push the ratio a few ulps past either bound.
    (weighted / total).clamp(min, cil(scores).max(min))
}
