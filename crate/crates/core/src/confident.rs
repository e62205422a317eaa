//! Pixel-level confident learning over pooled maps and the CLC image score.
//!
//! Thresholds are population statistics: pass one accumulates, per class, the
//! mean self-confidence of every pooled pixel annotated with that class across
//! the whole dataset. Pass two flags a pooled pixel when some other class is
//! confidently predicted, i.e. its probability reaches that class's threshold
//! and it is the most probable such class.

use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, AnnotatedMask, FlagMask, ProbabilityMap};

pub const DEFAULT_DOWNSAMPLE_FACTOR: usize = 4;

/// Mean-pools probabilities and majority-votes labels over `factor x factor`
/// windows. Edge windows pool whatever pixels they cover.
pub fn downsample(
    probs: &ProbabilityMap,
    labels: &AnnotatedMask,
    factor: usize,
) -> Result<(ProbabilityMap, AnnotatedMask)> {
    ensure_same_dims(probs.dims(), labels.dims(), "probabilities vs labels")?;
    if factor == 0 {
        return Err(Error::Validation("downsample factor must be >= 1".into()));
    }
    labels.check_classes(probs.classes())?;
    if factor == 1 {
        return Ok((probs.clone(), labels.clone()));
    }
    let (h, w) = probs.dims();
    let classes = probs.classes();
    let (ph, pw) = (h.div_ceil(factor), w.div_ceil(factor));
    let mut pooled = vec![0.0; ph * pw * classes];
    let mut votes = vec![0u8; ph * pw];
    let mut counts = [0u32; 256];
    for pi in 0..ph {
        for pj in 0..pw {
            let out = &mut pooled[(pi * pw + pj) * classes..(pi * pw + pj + 1) * classes];
            counts.fill(0);
            let mut n = 0usize;
            for i in pi * factor..((pi + 1) * factor).min(h) {
                for j in pj * factor..((pj + 1) * factor).min(w) {
                    for (acc, &v) in out.iter_mut().zip(probs.pixel(i, j)) {
                        *acc += v;
                    }
                    counts[labels.get(i, j) as usize] += 1;
                    n += 1;
                }
            }
            out.iter_mut().for_each(|v| *v /= n as f64);
            // max_by_key keeps the last maximum, so scan in reverse for the lowest class
            votes[pi * pw + pj] = (0..classes).rev().max_by_key(|&c| counts[c]).unwrap_or(0) as u8;
        }
    }
    Ok((
        ProbabilityMap::new(ph, pw, classes, pooled)?,
        AnnotatedMask::new(ph, pw, votes)?,
    ))
}

/// Per-class confident-learning thresholds. A class that was never annotated
/// anywhere in the population has no threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassThresholds {
    thresholds: Vec<Option<f64>>,
}

impl ClassThresholds {
    pub fn new(thresholds: Vec<Option<f64>>) -> Result<Self> {
        if let Some(t) = thresholds.iter().flatten().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Validation(format!("class threshold {t} outside [0, 1]")));
        }
        Ok(Self { thresholds })
    }

    pub fn classes(&self) -> usize {
        self.thresholds.len()
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.thresholds.get(class).copied().flatten()
    }

    pub fn is_defined(&self, class: usize) -> bool {
        self.get(class).is_some()
    }

    pub fn as_slice(&self) -> &[Option<f64>] {
        &self.thresholds
    }
}

/// Running per-class sums of self-confidence. Merging accumulators in a fixed
/// order gives bit-identical thresholds regardless of how images were split
/// across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdAccumulator {
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl ThresholdAccumulator {
    pub fn new(classes: usize) -> Self {
        Self {
            sums: vec![0.0; classes],
            counts: vec![0; classes],
        }
    }

    /// Adds every pooled pixel of one image.
    pub fn add_image(&mut self, probs: &ProbabilityMap, labels: &AnnotatedMask) -> Result<()> {
        ensure_same_dims(probs.dims(), labels.dims(), "probabilities vs labels")?;
        if probs.classes() != self.sums.len() {
            return Err(Error::Shape(format!(
                "image has {} classes, accumulator {}",
                probs.classes(),
                self.sums.len()
            )));
        }
        labels.check_classes(probs.classes())?;
        for (row, &l) in probs.rows().zip(labels.as_slice()) {
            self.sums[l as usize] += row[l as usize];
            self.counts[l as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ThresholdAccumulator) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn finish(&self) -> ClassThresholds {
        let thresholds = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(&sum, &n)| (n > 0).then(|| (sum / n as f64).clamp(0.0, 1.0)))
            .collect();
        ClassThresholds { thresholds }
    }
}

/// Thresholds over a whole population of pooled `(probabilities, labels)` pairs.
pub fn class_thresholds<'a, I>(dataset: I) -> Result<ClassThresholds>
where
    I: IntoIterator<Item = (&'a ProbabilityMap, &'a AnnotatedMask)>,
{
    let mut iter = dataset.into_iter().peekable();
    let classes = iter
        .peek()
        .map(|(p, _)| p.classes())
        .ok_or_else(|| Error::Validation("threshold population is empty".into()))?;
    let mut acc = ThresholdAccumulator::new(classes);
    for (p, l) in iter {
        acc.add_image(p, l)?;
    }
    Ok(acc.finish())
}

/// Flags pooled pixels whose confidently predicted class differs from the
/// annotation.
pub fn flag_mask(
    probs: &ProbabilityMap,
    labels: &AnnotatedMask,
    thresholds: &ClassThresholds,
) -> Result<FlagMask> {
    ensure_same_dims(probs.dims(), labels.dims(), "probabilities vs labels")?;
    if thresholds.classes() != probs.classes() {
        return Err(Error::Shape(format!(
            "{} thresholds for {} classes",
            thresholds.classes(),
            probs.classes()
        )));
    }
    labels.check_classes(probs.classes())?;
    let data = probs
        .rows()
        .zip(labels.as_slice())
        .map(|(row, &l)| match confident_class(row, thresholds) {
            Some(k) if k != l as usize => 0,
            _ => 1,
        })
        .collect();
    FlagMask::new(probs.height(), probs.width(), data)
}

/// The most probable class among those at or above their threshold.
fn confident_class(row: &[f64], thresholds: &ClassThresholds) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &pk) in row.iter().enumerate() {
        let confident = thresholds.get(k).is_some_and(|t| pk >= t);
        if confident && best.is_none_or(|b| pk > row[b]) {
            best = Some(k);
        }
    }
    best
}

/// Fraction of pooled pixels that were not flagged.
pub fn clc_score(flags: &FlagMask) -> f64 {
    let kept = flags.as_slice().iter().filter(|&&b| b == 1).count();
    kept as f64 / flags.len() as f64
}
