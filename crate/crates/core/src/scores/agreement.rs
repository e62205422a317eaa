use crate::error::Result;
use crate::grid::{ensure_same_dims, AnnotatedMask, PredictedMask};

/// Fraction of pixels whose predicted class equals the annotated class.
pub fn ccp(predicted: &PredictedMask, labels: &AnnotatedMask) -> Result<f64> {
    ensure_same_dims(predicted.dims(), labels.dims(), "predicted vs annotated")?;
    let agree = predicted
        .as_slice()
        .iter()
        .zip(labels.as_slice())
        .filter(|(p, l)| p == l)
        .count();
    Ok(agree as f64 / labels.len() as f64)
}

/// Mean per-class Jaccard index between the predicted and annotated masks,
/// averaged over the classes that occur in at least one of them.
pub fn iou(predicted: &PredictedMask, labels: &AnnotatedMask, classes: usize) -> Result<f64> {
    ensure_same_dims(predicted.dims(), labels.dims(), "predicted vs annotated")?;
    predicted.check_classes(classes)?;
    labels.check_classes(classes)?;
    let mut intersection = vec![0usize; classes];
    let mut union = vec![0usize; classes];
    for (&p, &l) in predicted.as_slice().iter().zip(labels.as_slice()) {
        if p == l {
            intersection[p as usize] += 1;
            union[p as usize] += 1;
        } else {
            union[p as usize] += 1;
            union[l as usize] += 1;
        }
    }
    let (sum, present) = intersection
        .iter()
        .zip(&union)
        .filter(|(_, &u)| u > 0)
        .fold((0.0, 0usize), |(sum, n), (&i, &u)| (sum + i as f64 / u as f64, n + 1));
    Ok(sum / present as f64)
}
