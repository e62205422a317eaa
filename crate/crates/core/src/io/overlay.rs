use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, FlagMask, PixelScoreMap};

pub const MARKED: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlayInfo {
    pub image_id: String,
    pub marked_pixels: usize,
}

/// Writes a grayscale PNG marking (255) every pixel whose score is below
/// `threshold` or whose confident-learning flag is 0.
pub fn emit_overlay(
    image_id: &str,
    scores: &PixelScoreMap,
    flags: &FlagMask,
    threshold: f64,
    path: &Path,
) -> Result<OverlayInfo> {
    ensure_same_dims(scores.dims(), flags.dims(), "scores vs flags")?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Validation(format!("overlay threshold {threshold} outside [0, 1]")));
    }
    let data: Vec<u8> = scores
        .as_slice()
        .iter()
        .zip(flags.as_slice())
        .map(|(&s, &b)| if s < threshold || b == 0 { MARKED } else { 0 })
        .collect();
    let marked_pixels = data.iter().filter(|&&v| v == MARKED).count();
    super::mask::write_gray_png(path, scores.width(), scores.height(), data)?;
    Ok(OverlayInfo {
        image_id: image_id.to_string(),
        marked_pixels,
    })
}
