//! Label quality scoring for semantic segmentation datasets.
//!
//! Every image is scored from out-of-sample predicted class probabilities and
//! its annotated mask. Low scores mark images whose annotation is likely wrong.
//! The crate also injects synthetic annotation errors (drop, swap, shift) and
//! evaluates how well a score ranks the corrupted images first.

pub mod components;
pub mod confident;
pub mod error;
pub mod grid;
pub mod inject;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pixel;
pub mod registry;
pub mod scores;
pub mod synthetic;

pub use error::{Error, Result};
pub use grid::{AnnotatedMask, FlagMask, PixelScoreMap, PredictedMask, ProbabilityMap};
pub use registry::{ImageContext, ImageScorer, Method, ScorerRegistry, ScoringOptions};
