//! Pixel grids shared by every scorer: probabilities, label masks, per-pixel
//! scores and confident-learning flags. All grids are row-major.

use crate::error::{Error, Result};

/// Allowed deviation of a pixel's probability row sum from 1 before renormalization.
pub const SIMPLEX_TOLERANCE: f64 = 1e-3;

/// Predicted class probabilities for one image, laid out `height x width x classes`.
///
/// Every row is on the probability simplex: entries in `[0, 1]` summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    classes: usize,
    data: Vec<f64>,
}

impl ProbabilityMap {
    /// Validates each pixel row against the simplex (entries finite and in
    /// `[0, 1]`, sum within [`SIMPLEX_TOLERANCE`] of 1) and renormalizes it.
    pub fn new(height: usize, width: usize, classes: usize, mut data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("empty grid {height}x{width}")));
        }
        if classes < 2 {
            return Err(Error::Shape(format!("need at least 2 classes, got {classes}")));
        }
        if data.len() != height * width * classes {
            return Err(Error::Shape(format!(
                "{} values cannot fill {height}x{width}x{classes}",
                data.len()
            )));
        }
        for (idx, row) in data.chunks_exact_mut(classes).enumerate() {
            let (i, j) = (idx / width, idx % width);
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
                return Err(Error::Validation(format!(
                    "pixel ({i}, {j}) has probability {v} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::Validation(format!(
                    "pixel ({i}, {j}) probabilities sum to {sum}"
                )));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(Self {
            height,
            width,
            classes,
            data,
        })
    }

    /// Builds a map from per-pixel one-hot rows.
    pub fn one_hot(mask: &AnnotatedMask, classes: usize) -> Result<Self> {
        mask.check_classes(classes)?;
        let mut data = vec![0.0; mask.len() * classes];
        for (idx, &label) in mask.as_slice().iter().enumerate() {
            data[idx * classes + label as usize] = 1.0;
        }
        Self::new(mask.height(), mask.width(), classes, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Class probabilities of the pixel at `(i, j)`.
    pub fn pixel(&self, i: usize, j: usize) -> &[f64] {
        self.row(i * self.width + j)
    }

    /// Class probabilities of the pixel at flat index `idx`.
    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.classes..(idx + 1) * self.classes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

macro_rules! class_grid {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash)]
        pub struct $name {
            height: usize,
            width: usize,
            data: Vec<u8>,
        }

        impl $name {
            pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
                if height == 0 || width == 0 {
                    return Err(Error::Shape(format!("empty grid {height}x{width}")));
                }
                if data.len() != height * width {
                    return Err(Error::Shape(format!(
                        "{} labels cannot fill {height}x{width}",
                        data.len()
                    )));
                }
                Ok(Self { height, width, data })
            }

            /// Builds a grid from nested rows; all rows must share a length.
            pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
                let width = rows.first().map_or(0, |r| r.as_ref().len());
                if rows.iter().any(|r| r.as_ref().len() != width) {
                    return Err(Error::Shape("ragged rows".into()));
                }
                let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
                Self::new(rows.len(), width, data)
            }

            pub fn filled(height: usize, width: usize, class: u8) -> Result<Self> {
                Self::new(height, width, vec![class; height * width])
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn dims(&self) -> (usize, usize) {
                (self.height, self.width)
            }

            pub fn len(&self) -> usize {
                self.data.len()
            }

            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            pub fn get(&self, i: usize, j: usize) -> u8 {
                self.data[i * self.width + j]
            }

            pub fn as_slice(&self) -> &[u8] {
                &self.data
            }

            pub fn into_vec(self) -> Vec<u8> {
                self.data
            }

            /// Fails when any entry is not a valid index for `classes` classes.
            pub fn check_classes(&self, classes: usize) -> Result<()> {
                match self.data.iter().position(|&c| c as usize >= classes) {
                    Some(idx) => Err(Error::Validation(format!(
                        "pixel ({}, {}) has class {} but only {classes} classes exist",
                        idx / self.width,
                        idx % self.width,
                        self.data[idx]
                    ))),
                    None => Ok(()),
                }
            }

            /// Per-class pixel counts, indexed by class.
            pub fn histogram(&self) -> [usize; 256] {
                let mut counts = [0usize; 256];
                for &c in &self.data {
                    counts[c as usize] += 1;
                }
                counts
            }

            /// Distinct classes present, ascending.
            pub fn classes_present(&self) -> Vec<u8> {
                let counts = self.histogram();
                (0..=255u8).filter(|&c| counts[c as usize] > 0).collect()
            }

            pub fn contains(&self, class: u8) -> bool {
                self.data.contains(&class)
            }
        }
    };
}

class_grid!(
    /// Annotated class label per pixel.
    AnnotatedMask
);
class_grid!(
    /// Argmax class per pixel of a [`ProbabilityMap`].
    PredictedMask
);

/// Annotated-class likelihood per pixel, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelScoreMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl PixelScoreMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::Shape(format!(
                "{} scores cannot fill {height}x{width}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("pixel score {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Confident-learning verdict per pixel: 1 keeps the label, 0 flags it as
/// potentially mislabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl FlagMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::Shape(format!(
                "{} flags cannot fill {height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|&b| b > 1) {
            return Err(Error::Validation("flag values must be 0 or 1".into()));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// A mask with nothing flagged.
    pub fn clear(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![1; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.width + j]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn flagged_count(&self) -> usize {
        self.data.iter().filter(|&&b| b == 0).count()
    }

    /// Expands a pooled mask back to full resolution: pixel `(i, j)` takes the
    /// flag of cell `(i / factor, j / factor)`.
    pub fn upsample(&self, factor: usize, height: usize, width: usize) -> Result<Self> {
        if factor == 0 || height.div_ceil(factor) != self.height || width.div_ceil(factor) != self.width {
            return Err(Error::Shape(format!(
                "{}x{} flags do not pool {height}x{width} by {factor}",
                self.height, self.width
            )));
        }
        let data = (0..height)
            .flat_map(|i| (0..width).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i / factor, j / factor))
            .collect();
        Ok(Self {
            height,
            width,
            data,
        })
    }
}

pub(crate) fn ensure_same_dims(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}
