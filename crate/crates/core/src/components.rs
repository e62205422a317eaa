//! Connected components of the joint (predicted, annotated) class pair and
//! the CoCo image score built from them.

use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, AnnotatedMask, PredictedMask, ProbabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    /// Edge neighbours only.
    #[default]
    Four,
    /// Edge and corner neighbours.
    Eight,
}

/// How per-component scores are pooled into an image score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CocoPooling {
    /// Unweighted mean over all components.
    #[default]
    Flat,
    /// Mean over components of each annotated class, then mean over those classes.
    ClassMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CocoParams {
    pub connectivity: Connectivity,
    pub pooling: CocoPooling,
}

/// Pixels of one maximal connected region with constant (predicted, annotated) classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub pixels: Vec<(usize, usize)>,
    pub annotated_class: u8,
    pub predicted_class: u8,
}

/// A region with its mean class probabilities and label likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub region: Region,
    /// Mean predicted probability vector over the region's pixels.
    pub mean_probs: Vec<f64>,
    /// `mean_probs[annotated_class]`
    pub score: f64,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Partitions the grid into maximal connected regions of constant
/// (predicted, annotated) pair. Regions are ordered by their first pixel in
/// row-major scan order, and pixels within a region are in scan order.
pub fn extract_components(
    predicted: &PredictedMask,
    labels: &AnnotatedMask,
    connectivity: Connectivity,
) -> Result<Vec<Region>> {
    ensure_same_dims(predicted.dims(), labels.dims(), "predicted vs annotated")?;
    let (h, w) = labels.dims();
    let key = |idx: usize| (predicted.as_slice()[idx], labels.as_slice()[idx]);
    let mut sets = DisjointSet::new(h * w);
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            if j > 0 && key(idx - 1) == key(idx) {
                sets.union(idx, idx - 1);
            }
            if i > 0 {
                if key(idx - w) == key(idx) {
                    sets.union(idx, idx - w);
                }
                if connectivity == Connectivity::Eight {
                    if j > 0 && key(idx - w - 1) == key(idx) {
                        sets.union(idx, idx - w - 1);
                    }
                    if j + 1 < w && key(idx - w + 1) == key(idx) {
                        sets.union(idx, idx - w + 1);
                    }
                }
            }
        }
    }
    let mut region_of_root = vec![usize::MAX; h * w];
    let mut regions: Vec<Region> = Vec::new();
    for idx in 0..h * w {
        let root = sets.find(idx);
        if region_of_root[root] == usize::MAX {
            region_of_root[root] = regions.len();
            let (p, l) = key(idx);
            regions.push(Region {
                pixels: Vec::new(),
                annotated_class: l,
                predicted_class: p,
            });
        }
        regions[region_of_root[root]].pixels.push((idx / w, idx % w));
    }
    Ok(regions)
}

/// Regions with their mean probability vectors and component scores.
pub fn components(
    probs: &ProbabilityMap,
    predicted: &PredictedMask,
    labels: &AnnotatedMask,
    connectivity: Connectivity,
) -> Result<Vec<Component>> {
    ensure_same_dims(probs.dims(), labels.dims(), "probabilities vs labels")?;
    labels.check_classes(probs.classes())?;
    let regions = extract_components(predicted, labels, connectivity)?;
    Ok(regions
        .into_iter()
        .map(|region| {
            let mut mean_probs = vec![0.0; probs.classes()];
            for &(i, j) in &region.pixels {
                for (acc, &v) in mean_probs.iter_mut().zip(probs.pixel(i, j)) {
                    *acc += v;
                }
            }
            let n = region.pixels.len() as f64;
            mean_probs.iter_mut().for_each(|v| *v /= n);
            let score = mean_probs[region.annotated_class as usize].clamp(0.0, 1.0);
            Component {
                region,
                mean_probs,
                score,
            }
        })
        .collect())
}

/// CoCo score: pooled component likelihoods of the annotated class.
///
/// Inputs are expected on the pooled grid, with `predicted` the argmax of `probs`.
pub fn coco_score(
    probs: &ProbabilityMap,
    predicted: &PredictedMask,
    labels: &AnnotatedMask,
    params: CocoParams,
) -> Result<f64> {
    let comps = components(probs, predicted, labels, params.connectivity)?;
    if comps.is_empty() {
        return Err(Error::Shape("no components on an empty grid".into()));
    }
    let score = match params.pooling {
        CocoPooling::Flat => comps.iter().map(|c| c.score).sum::<f64>() / comps.len() as f64,
        CocoPooling::ClassMean => {
            let mut sums = vec![(0.0, 0usize); probs.classes()];
            for c in &comps {
                let slot = &mut sums[c.region.annotated_class as usize];
                slot.0 += c.score;
                slot.1 += 1;
            }
            let per_class: Vec<f64> = sums
                .iter()
                .filter(|(_, n)| *n > 0)
                .map(|(s, n)| s / *n as f64)
                .collect();
            per_class.iter().sum::<f64>() / per_class.len() as f64
        }
    };
    Ok(score)
}
