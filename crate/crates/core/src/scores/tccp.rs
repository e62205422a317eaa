use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, AnnotatedMask, ProbabilityMap};

/// How a per-class accuracy is counted for a candidate threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TccpMode {
    /// Fraction of pixels where "annotated as k" and "p_k above threshold"
    /// agree. Threshold choice matters under this reading.
    #[default]
    MembershipAgreement,
    /// Fraction of pixels that are annotated k *and* have p_k above the
    /// threshold. The smallest threshold always wins.
    Literal,
}

/// Candidate thresholds, strictly increasing and inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TccpParams {
    thresholds: Vec<f64>,
    mode: TccpMode,
}

impl TccpParams {
    pub fn new(thresholds: Vec<f64>, mode: TccpMode) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Validation("TCCP needs at least one threshold".into()));
        }
        if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Validation(format!("TCCP threshold {t} outside (0, 1)")));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("TCCP thresholds must be strictly increasing".into()));
        }
        Ok(Self { thresholds, mode })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn mode(&self) -> TccpMode {
        self.mode
    }
}

impl Default for TccpParams {
    /// 0.05, 0.10, ..., 0.95
    fn default() -> Self {
        let thresholds = (1..=19).map(|i| i as f64 * 0.05).collect();
        Self {
            thresholds,
            mode: TccpMode::default(),
        }
    }
}

/// Thresholded correctly-classified-pixels: for each class pick the threshold
/// maximizing that class's accuracy on this image (ties to the smaller
/// threshold), then average the maxima over all classes.
pub fn tccp(probs: &ProbabilityMap, labels: &AnnotatedMask, params: &TccpParams) -> Result<f64> {
    ensure_same_dims(probs.dims(), labels.dims(), "probabilities vs labels")?;
    labels.check_classes(probs.classes())?;
    let classes = probs.classes();
    let thresholds = params.thresholds();
    // hits[k * T + t] counts pixels that agree for class k at threshold t
    let mut hits = vec![0usize; classes * thresholds.len()];
    for (row, &label) in probs.rows().zip(labels.as_slice()) {
        for (k, &pk) in row.iter().enumerate() {
            let annotated = label as usize == k;
            let counts = &mut hits[k * thresholds.len()..(k + 1) * thresholds.len()];
            for (count, &tau) in counts.iter_mut().zip(thresholds) {
                let above = pk > tau;
                let hit = match params.mode() {
                    TccpMode::MembershipAgreement => annotated == above,
                    TccpMode::Literal => annotated && above,
                };
                *count += hit as usize;
            }
        }
    }
    let pixels = labels.len() as f64;
    let total: f64 = hits
        .chunks_exact(thresholds.len())
        .map(|per_threshold| {
            // first maximum, i.e. the smallest maximizing threshold
            let best = per_threshold
                .iter()
                .copied()
                .reduce(|a, b| if b > a { b } else { a })
                .unwrap_or(0);
            best as f64 / pixels
        })
        .sum();
    Ok(total / classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pixel_case() -> (ProbabilityMap, AnnotatedMask) {
        let p = ProbabilityMap::new(2, 1, 2, vec![0.6, 0.4, 0.4, 0.6]).unwrap();
        let l = AnnotatedMask::new(2, 1, vec![0, 1]).unwrap();
        (p, l)
    }

    #[test]
    fn one_hot_agreement_scores_one() {
        let l = AnnotatedMask::from_rows(&[[0u8, 1, 2], [2, 2, 1]]).unwrap();
        let p = ProbabilityMap::one_hot(&l, 3).unwrap();
        assert_eq!(tccp(&p, &l, &TccpParams::default()).unwrap(), 1.0);
    }

    #[test]
    fn threshold_half_separates_both_classes() {
        let (p, l) = two_pixel_case();
        let params = TccpParams::new(vec![0.5], TccpMode::MembershipAgreement).unwrap();
        assert_eq!(tccp(&p, &l, &params).unwrap(), 1.0);
    }

    #[test]
    fn threshold_point_seven_misses_annotated_pixels() {
        let (p, l) = two_pixel_case();
        let params = TccpParams::new(vec![0.7], TccpMode::MembershipAgreement).unwrap();
        assert_eq!(tccp(&p, &l, &params).unwrap(), 0.5);
    }

    #[test]
    fn best_threshold_is_selected_per_class() {
        let (p, l) = two_pixel_case();
        let params = TccpParams::new(vec![0.5, 0.7], TccpMode::MembershipAgreement).unwrap();
        assert_eq!(tccp(&p, &l, &params).unwrap(), 1.0);
    }

    #[test]
    fn literal_mode_counts_annotated_and_confident() {
        let (p, l) = two_pixel_case();
        // class 0: pixel 0 (0.6 > 0.5) -> 1/2; class 1: pixel 1 -> 1/2
        let params = TccpParams::new(vec![0.5, 0.7], TccpMode::Literal).unwrap();
        assert_eq!(tccp(&p, &l, &params).unwrap(), 0.5);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        assert!(TccpParams::new(vec![], TccpMode::Literal).is_err());
        assert!(TccpParams::new(vec![0.0, 0.5], TccpMode::Literal).is_err());
        assert!(TccpParams::new(vec![0.5, 0.5], TccpMode::Literal).is_err());
        assert!(TccpParams::new(vec![0.6, 0.5], TccpMode::Literal).is_err());
        assert!(TccpParams::new(vec![0.5, 1.0], TccpMode::Literal).is_err());
    }

    #[test]
    fn default_grid_has_nineteen_steps() {
        let params = TccpParams::default();
        assert_eq!(params.thresholds().len(), 19);
        assert!((params.thresholds()[0] - 0.05).abs() < 1e-12);
        assert!((params.thresholds()[18] - 0.95).abs() < 1e-12);
    }
}
