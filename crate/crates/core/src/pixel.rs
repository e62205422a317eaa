//! Per-pixel objects every image score is built from.

use crate::error::Result;
use crate::grid::{argmax, ensure_same_dims, AnnotatedMask, PixelScoreMap, PredictedMask, ProbabilityMap};

/// Argmax class per pixel, ties to the lowest class index.
pub fn predicted_mask(probs: &ProbabilityMap) -> PredictedMask {
    let data = probs.rows().map(|row| argmax(row) as u8).collect();
    PredictedMask::new(probs.height(), probs.width(), data).expect("dimensions come from a valid map")
}

/// Self-confidence: the predicted probability of each pixel's annotated class.
pub fn self_confidence(probs: &ProbabilityMap, labels: &AnnotatedMask) -> Result<PixelScoreMap> {
    ensure_same_dims(probs.dims(), labels.dims(), "probabilities vs labels")?;
    labels.check_classes(probs.classes())?;
    let data = probs
        .rows()
        .zip(labels.as_slice())
        .map(|(row, &l)| row[l as usize].clamp(0.0, 1.0))
        .collect();
    PixelScoreMap::new(probs.height(), probs.width(), data)
}
