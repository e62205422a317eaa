//! Image scorers behind a common trait, registered by name and picked at run time.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::components::{coco_score, CocoParams};
use crate::confident::{clc_score, downsample, flag_mask, ClassThresholds, DEFAULT_DOWNSAMPLE_FACTOR};
use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, AnnotatedMask, FlagMask, PixelScoreMap, PredictedMask, ProbabilityMap};
use crate::pixel::{predicted_mask, self_confidence};
use crate::scores::{ccp, cil, iou, softmin, tccp, SoftminParams, TccpParams};

/// The label quality scores this crate ships. Declaration order is the
/// canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Ccp,
    Tccp,
    Cil,
    Softmin,
    Clc,
    Iou,
    Coco,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ccp,
        Method::Tccp,
        Method::Cil,
        Method::Softmin,
        Method::Clc,
        Method::Iou,
        Method::Coco,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ccp => "CCP",
            Method::Tccp => "TCCP",
            Method::Cil => "CIL",
            Method::Softmin => "SOFTMIN",
            Method::Clc => "CLC",
            Method::Iou => "IOU",
            Method::Coco => "COCO",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Validation(format!("unknown scoring method {s:?}")))
    }
}

struct Pooled {
    probs: ProbabilityMap,
    labels: AnnotatedMask,
    predicted: PredictedMask,
}

/// One image's inputs plus lazily derived objects shared between scorers, so
/// argmax tie-breaking and pooling happen once per image.
pub struct ImageContext<'a> {
    probs: &'a ProbabilityMap,
    labels: &'a AnnotatedMask,
    factor: usize,
    thresholds: Option<&'a ClassThresholds>,
    predicted: OnceLock<PredictedMask>,
    pixel_scores: OnceLock<PixelScoreMap>,
    pooled: OnceLock<Pooled>,
}

impl<'a> ImageContext<'a> {
    pub fn new(probs: &'a ProbabilityMap, labels: &'a AnnotatedMask, factor: usize) -> Result<Self> {
        ensure_same_dims(probs.dims(), labels.dims(), "probabilities vs labels")?;
        labels.check_classes(probs.classes())?;
        if factor == 0 {
            return Err(Error::Validation("downsample factor must be >= 1".into()));
        }
        Ok(Self {
            probs,
            labels,
            factor,
            thresholds: None,
            predicted: OnceLock::new(),
            pixel_scores: OnceLock::new(),
            pooled: OnceLock::new(),
        })
    }

    /// Attaches frozen dataset-level confident-learning thresholds.
    pub fn with_thresholds(mut self, thresholds: &'a ClassThresholds) -> Self {
        self.thresholds = Some(thresholds);
        self
    }

    pub fn probs(&self) -> &ProbabilityMap {
        self.probs
    }

    pub fn labels(&self) -> &AnnotatedMask {
        self.labels
    }

    pub fn classes(&self) -> usize {
        self.probs.classes()
    }

    pub fn downsample_factor(&self) -> usize {
        self.factor
    }

    pub fn thresholds(&self) -> Option<&ClassThresholds> {
        self.thresholds
    }

    pub fn predicted(&self) -> &PredictedMask {
        self.predicted.get_or_init(|| predicted_mask(self.probs))
    }

    pub fn pixel_scores(&self) -> &PixelScoreMap {
        self.pixel_scores.get_or_init(|| {
            self_confidence(self.probs, self.labels).expect("dimensions and classes checked in new")
        })
    }

    fn pooled(&self) -> &Pooled {
        self.pooled.get_or_init(|| {
            let (probs, labels) =
                downsample(self.probs, self.labels, self.factor).expect("inputs checked in new");
            let predicted = predicted_mask(&probs);
            Pooled {
                probs,
                labels,
                predicted,
            }
        })
    }

    pub fn pooled_probs(&self) -> &ProbabilityMap {
        &self.pooled().probs
    }

    pub fn pooled_labels(&self) -> &AnnotatedMask {
        &self.pooled().labels
    }

    pub fn pooled_predicted(&self) -> &PredictedMask {
        &self.pooled().predicted
    }

    /// Confident-learning flags on the pooled grid.
    pub fn flags(&self) -> Result<FlagMask> {
        let thresholds = self
            .thresholds
            .ok_or_else(|| Error::Validation("confident-learning thresholds were not computed".into()))?;
        flag_mask(self.pooled_probs(), self.pooled_labels(), thresholds)
    }
}

/// A per-image label quality score.
pub trait ImageScorer: Send + Sync {
    fn method(&self) -> Method;

    /// Whether the score depends on dataset-wide confident-learning thresholds,
    /// which must then be attached to every [`ImageContext`].
    fn needs_class_thresholds(&self) -> bool {
        false
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64>;
}

pub struct CcpScorer;

impl ImageScorer for CcpScorer {
    fn method(&self) -> Method {
        Method::Ccp
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64> {
        ccp(image.predicted(), image.labels())
    }
}

pub struct TccpScorer(pub TccpParams);

impl ImageScorer for TccpScorer {
    fn method(&self) -> Method {
        Method::Tccp
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64> {
        tccp(image.probs(), image.labels(), &self.0)
    }
}

pub struct CilScorer;

impl ImageScorer for CilScorer {
    fn method(&self) -> Method {
        Method::Cil
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64> {
        Ok(cil(image.pixel_scores()))
    }
}

pub struct SoftminScorer(pub SoftminParams);

impl ImageScorer for SoftminScorer {
    fn method(&self) -> Method {
        Method::Softmin
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64> {
        Ok(softmin(image.pixel_scores(), self.0))
    }
}

pub struct ClcScorer;

impl ImageScorer for ClcScorer {
    fn method(&self) -> Method {
        Method::Clc
    }

    fn needs_class_thresholds(&self) -> bool {
        true
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64> {
        Ok(clc_score(&image.flags()?))
    }
}

pub struct IouScorer;

impl ImageScorer for IouScorer {
    fn method(&self) -> Method {
        Method::Iou
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64> {
        iou(image.predicted(), image.labels(), image.classes())
    }
}

pub struct CocoScorer(pub CocoParams);

impl ImageScorer for CocoScorer {
    fn method(&self) -> Method {
        Method::Coco
    }

    fn score(&self, image: &ImageContext<'_>) -> Result<f64> {
        coco_score(
            image.pooled_probs(),
            image.pooled_predicted(),
            image.pooled_labels(),
            self.0,
        )
    }
}

/// Knobs of the built-in scorers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringOptions {
    pub softmin: SoftminParams,
    pub tccp: TccpParams,
    pub coco: CocoParams,
    pub downsample_factor: usize,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            softmin: SoftminParams::default(),
            tccp: TccpParams::default(),
            coco: CocoParams::default(),
            downsample_factor: DEFAULT_DOWNSAMPLE_FACTOR,
        }
    }
}

/// Scorers keyed by method name.
#[derive(Default)]
pub struct ScorerRegistry {
    scorers: BTreeMap<Method, Box<dyn ImageScorer>>,
}

impl ScorerRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// All seven built-in scorers configured from `options`.
    pub fn with_builtins(options: &ScoringOptions) -> Self {
        let mut registry = Self::new();
        registry.register(Box::new(CcpScorer));
        registry.register(Box::new(TccpScorer(options.tccp.clone())));
        registry.register(Box::new(CilScorer));
        registry.register(Box::new(SoftminScorer(options.softmin)));
        registry.register(Box::new(ClcScorer));
        registry.register(Box::new(IouScorer));
        registry.register(Box::new(CocoScorer(options.coco)));
        registry
    }

    /// Adds a scorer, replacing any earlier one for the same method.
    pub fn register(&mut self, scorer: Box<dyn ImageScorer>) -> Option<Box<dyn ImageScorer>> {
        self.scorers.insert(scorer.method(), scorer)
    }

    pub fn get(&self, name: &str) -> Option<&dyn ImageScorer> {
        let method = name.parse::<Method>().ok()?;
        self.scorers.get(&method).map(|s| s.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.scorers.keys().map(|m| m.name())
    }

    pub fn len(&self) -> usize {
        self.scorers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scorers.is_empty()
    }

    /// Looks up scorers by name (case-insensitive, `"all"` for every
    /// registered scorer). The result is deduplicated and in canonical order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<&dyn ImageScorer>> {
        if names.is_empty() {
            return Err(Error::Validation("no scoring methods requested".into()));
        }
        let mut wanted = std::collections::BTreeSet::new();
        for name in names {
            let name = name.as_ref();
            if name.trim().eq_ignore_ascii_case("all") {
                wanted.extend(self.scorers.keys().copied());
                continue;
            }
            let method: Method = name.parse()?;
            if !self.scorers.contains_key(&method) {
                return Err(Error::Validation(format!("method {method} is not registered")));
            }
            wanted.insert(method);
        }
        Ok(wanted.iter().map(|m| self.scorers[m].as_ref()).collect())
    }
}
