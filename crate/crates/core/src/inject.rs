//! Synthetic annotation errors for benchmarking detectors.
//!
//! * Drop: every pixel of one class becomes the unlabeled class.
//! * Swap: two classes trade places across the whole mask.
//! * Shift: one class's region is eroded or dilated by a disc.
//!
//! Dataset corruption is seeded with ChaCha8. Stream 0 picks the order in
//! which images are considered; image `i` draws its own parameters from
//! stream `i + 1`, so the outcome for an image does not depend on which
//! worker handled it.

use std::collections::VecDeque;
use std::sync::Mutex;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AnnotatedMask;

/// Name of the generator recorded in error-log headers.
pub const GENERATOR: &str = "ChaCha8Rng";
pub const DEFAULT_SHIFT_RADIUS_RANGE: (usize, usize) = (3, 25);
const SHIFT_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ErrorType {
    Drop,
    Swap,
    Shift,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftOp {
    Erode,
    Dilate,
}

impl ShiftOp {
    pub fn name(self) -> &'static str {
        match self {
            ShiftOp::Erode => "erode",
            ShiftOp::Dilate => "dilate",
        }
    }
}

/// What was done to a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "error_type", content = "params", rename_all = "UPPERCASE")]
pub enum InjectedError {
    Drop { dropped_class: u8 },
    Swap { class_a: u8, class_b: u8 },
    Shift { class: u8, op: ShiftOp, radius: usize },
    None,
}

impl InjectedError {
    pub fn error_type(&self) -> ErrorType {
        match self {
            InjectedError::Drop { .. } => ErrorType::Drop,
            InjectedError::Swap { .. } => ErrorType::Swap,
            InjectedError::Shift { .. } => ErrorType::Shift,
            InjectedError::None => ErrorType::None,
        }
    }
}

/// Ground-truth record for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorLog {
    pub image_id: String,
    #[serde(flatten)]
    pub error: InjectedError,
    pub pixels_changed: usize,
}

impl ErrorLog {
    pub fn clean(image_id: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            error: InjectedError::None,
            pixels_changed: 0,
        }
    }

    pub fn error_type(&self) -> ErrorType {
        self.error.error_type()
    }

    pub fn is_error(&self) -> bool {
        self.error != InjectedError::None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub error: InjectedError,
    pub pixels_changed: usize,
}

fn require_present(mask: &AnnotatedMask, class: u8) -> Result<()> {
    if mask.contains(class) {
        Ok(())
    } else {
        Err(Error::ClassNotPresent { class })
    }
}

fn changed(before: &AnnotatedMask, after: &[u8]) -> usize {
    before.as_slice().iter().zip(after).filter(|(a, b)| a != b).count()
}

/// Relabels every pixel of `class` as `unlabeled`.
pub fn inject_drop(mask: &AnnotatedMask, class: u8, unlabeled: u8) -> Result<(AnnotatedMask, Injection)> {
    if class == unlabeled {
        return Err(Error::Validation("cannot drop the unlabeled class".into()));
    }
    require_present(mask, class)?;
    let data: Vec<u8> = mask
        .as_slice()
        .iter()
        .map(|&c| if c == class { unlabeled } else { c })
        .collect();
    let pixels_changed = changed(mask, &data);
    Ok((
        AnnotatedMask::new(mask.height(), mask.width(), data)?,
        Injection {
            error: InjectedError::Drop { dropped_class: class },
            pixels_changed,
        },
    ))
}

/// Exchanges two classes everywhere. Applying it twice restores the mask.
pub fn inject_swap(mask: &AnnotatedMask, class_a: u8, class_b: u8) -> Result<(AnnotatedMask, Injection)> {
    if class_a == class_b {
        return Err(Error::Validation("swap needs two distinct classes".into()));
    }
    require_present(mask, class_a)?;
    require_present(mask, class_b)?;
    let data: Vec<u8> = mask
        .as_slice()
        .iter()
        .map(|&c| match c {
            c if c == class_a => class_b,
            c if c == class_b => class_a,
            c => c,
        })
        .collect();
    let pixels_changed = changed(mask, &data);
    Ok((
        AnnotatedMask::new(mask.height(), mask.width(), data)?,
        Injection {
            error: InjectedError::Swap { class_a, class_b },
            pixels_changed,
        },
    ))
}

/// Half-widths of a digital disc: row offset `d` spans columns `-hw[d]..=hw[d]`.
fn disc_half_widths(radius: usize) -> Vec<usize> {
    let r2 = radius * radius;
    (0..=radius)
        .map(|d| {
            let rem = r2 - d * d;
            let mut hw = (rem as f64).sqrt() as usize;
            while hw * hw > rem {
                hw -= 1;
            }
            while (hw + 1) * (hw + 1) <= rem {
                hw += 1;
            }
            hw
        })
        .collect()
}

/// Binary erosion or dilation of `member` by a disc. Pixels outside the grid
/// count as members for erosion and non-members for dilation, so a region
/// touching the border is not eaten away from outside.
fn morph(member: &[bool], height: usize, width: usize, op: ShiftOp, radius: usize) -> Vec<bool> {
    // prefix[i * (width + 1) + j] = members among row i, columns < j
    let mut prefix = vec![0u32; height * (width + 1)];
    for i in 0..height {
        for j in 0..width {
            prefix[i * (width + 1) + j + 1] = prefix[i * (width + 1) + j] + member[i * width + j] as u32;
        }
    }
    let half_widths = disc_half_widths(radius);
    let mut out = member.to_vec();
    for i in 0..height {
        for j in 0..width {
            let idx = i * width + j;
            let relevant = match op {
                ShiftOp::Dilate => !member[idx],
                ShiftOp::Erode => member[idx],
            };
            if !relevant {
                continue;
            }
            let lo_i = i.saturating_sub(radius);
            let hi_i = (i + radius).min(height - 1);
            let hit = (lo_i..=hi_i).any(|ii| {
                let hw = half_widths[ii.abs_diff(i)];
                let lo = j.saturating_sub(hw);
                let hi = (j + hw).min(width - 1);
                let row = ii * (width + 1);
                let count = (prefix[row + hi + 1] - prefix[row + lo]) as usize;
                match op {
                    ShiftOp::Dilate => count > 0,
                    ShiftOp::Erode => count < hi + 1 - lo,
                }
            });
            if hit {
                out[idx] = op == ShiftOp::Dilate;
            }
        }
    }
    out
}

/// Erodes or dilates the region of `class` with a disc of `radius`.
///
/// Dilation overwrites neighbouring classes. Pixels exposed by erosion take
/// the majority label of their nearest non-`class` neighbours, found by a
/// breadth-first sweep outward from the surviving labels.
pub fn inject_shift(
    mask: &AnnotatedMask,
    class: u8,
    op: ShiftOp,
    radius: usize,
) -> Result<(AnnotatedMask, Injection)> {
    if radius == 0 {
        return Err(Error::Validation("shift radius must be >= 1".into()));
    }
    require_present(mask, class)?;
    let (h, w) = mask.dims();
    let member: Vec<bool> = mask.as_slice().iter().map(|&c| c == class).collect();
    let shifted = morph(&member, h, w, op, radius);
    let mut data = mask.as_slice().to_vec();
    match op {
        ShiftOp::Dilate => {
            for (d, &m) in data.iter_mut().zip(&shifted) {
                if m {
                    *d = class;
                }
            }
        }
        ShiftOp::Erode => {
            let exposed: Vec<bool> = member.iter().zip(&shifted).map(|(&a, &b)| a && !b).collect();
            fill_exposed(&mut data, &exposed, h, w);
        }
    }
    let pixels_changed = changed(mask, &data);
    if pixels_changed == 0 {
        return Err(Error::DegenerateShift {
            class,
            op: op.name(),
            radius,
        });
    }
    Ok((
        AnnotatedMask::new(h, w, data)?,
        Injection {
            error: InjectedError::Shift { class, op, radius },
            pixels_changed,
        },
    ))
}

fn majority(counts: &[u32; 256]) -> Option<u8> {
    // lowest class wins ties
    (0..=255u8)
        .filter(|&c| counts[c as usize] > 0)
        .max_by(|&a, &b| counts[a as usize].cmp(&counts[b as usize]).then(b.cmp(&a)))
}

fn fill_exposed(labels: &mut [u8], exposed: &[bool], h: usize, w: usize) {
    const UNSET: usize = usize::MAX;
    let mut dist: Vec<usize> = exposed.iter().map(|&e| if e { UNSET } else { 0 }).collect();
    let mut queue: VecDeque<usize> = VecDeque::new();
    let neighbours = |idx: usize| {
        let (i, j) = (idx / w, idx % w);
        [
            (i > 0).then(|| idx - w),
            (i + 1 < h).then(|| idx + w),
            (j > 0).then(|| idx - 1),
            (j + 1 < w).then(|| idx + 1),
        ]
        .into_iter()
        .flatten()
    };
    // seeds: exposed pixels touching a surviving label
    for idx in 0..labels.len() {
        if exposed[idx] && neighbours(idx).any(|n| !exposed[n]) {
            dist[idx] = 1;
            queue.push_back(idx);
        }
    }
    let mut order = Vec::new();
    while let Some(idx) = queue.pop_front() {
        order.push(idx);
        for n in neighbours(idx) {
            if dist[n] == UNSET {
                dist[n] = dist[idx] + 1;
                queue.push_back(n);
            }
        }
    }
    // BFS order is nondecreasing in distance, so every closer neighbour is final
    for &idx in &order {
        let mut counts = [0u32; 256];
        for n in neighbours(idx) {
            if dist[n] < dist[idx] {
                counts[labels[n] as usize] += 1;
            }
        }
        if let Some(c) = majority(&counts) {
            labels[idx] = c;
        }
    }
    if order.len() < exposed.iter().filter(|&&e| e).count() {
        let mut counts = [0u32; 256];
        for (idx, &l) in labels.iter().enumerate() {
            if !exposed[idx] {
                counts[l as usize] += 1;
            }
        }
        if let Some(c) = majority(&counts) {
            for (idx, l) in labels.iter_mut().enumerate() {
                if exposed[idx] && dist[idx] == UNSET {
                    *l = c;
                }
            }
        }
    }
}

/// How to corrupt a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub error_type: ErrorType,
    pub proportion: f64,
    pub seed: u64,
    pub shift_radius_range: (usize, usize),
}

impl CorruptionPlan {
    pub fn new(error_type: ErrorType, proportion: f64, seed: u64) -> Self {
        Self {
            error_type,
            proportion,
            seed,
            shift_radius_range: DEFAULT_SHIFT_RADIUS_RANGE,
        }
    }

    /// Number of images to corrupt out of `n`: `proportion * n`, rounded half up.
    pub fn target_count(&self, n: usize) -> usize {
        // snap away float noise such as 0.3 * 5 = 1.4999999999999998
        let exact = (self.proportion * n as f64 * 1e9).round() / 1e9;
        (exact + 0.5).floor() as usize
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.error_type == ErrorType::None {
            return Err(Error::Validation("plan must name an error type".into()));
        }
        if !(self.proportion > 0.0 && self.proportion <= 1.0) {
            return Err(Error::Validation(format!("proportion {} outside (0, 1]", self.proportion)));
        }
        let (lo, hi) = self.shift_radius_range;
        if lo == 0 || lo > hi {
            return Err(Error::Validation(format!("bad shift radius range ({lo}, {hi})")));
        }
        if self.target_count(n) == 0 {
            return Err(Error::Validation(format!(
                "proportion {} of {n} images rounds to zero",
                self.proportion
            )));
        }
        Ok(())
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Draws an error for image `index` from its own stream, or `None` when
    /// the image has no eligible classes.
    pub fn try_inject(&self, index: usize, mask: &AnnotatedMask, unlabeled: u8) -> Option<(AnnotatedMask, Injection)> {
        let mut rng = self.stream(index as u64 + 1);
        let eligible: Vec<u8> = mask.classes_present().into_iter().filter(|&c| c != unlabeled).collect();
        match self.error_type {
            ErrorType::Drop => {
                let class = *eligible.get(rng.random_range(0..eligible.len().max(1)))?;
                inject_drop(mask, class, unlabeled).ok()
            }
            ErrorType::Swap => {
                if eligible.len() < 2 {
                    return None;
                }
                let picked: Vec<u8> = eligible.choose_multiple(&mut rng, 2).copied().collect();
                inject_swap(mask, picked[0], picked[1]).ok()
            }
            ErrorType::Shift => {
                if eligible.is_empty() {
                    return None;
                }
                let (lo, hi) = self.shift_radius_range;
                (0..SHIFT_ATTEMPTS).find_map(|_| {
                    let class = eligible[rng.random_range(0..eligible.len())];
                    let op = if rng.random_bool(0.5) { ShiftOp::Erode } else { ShiftOp::Dilate };
                    let radius = rng.random_range(lo..=hi);
                    inject_shift(mask, class, op, radius).ok()
                })
            }
            ErrorType::None => None,
        }
    }
}

/// Corrupts `round(proportion * n)` images.
///
/// Images are considered in a seeded random order; one that cannot take the
/// error (too few eligible classes, or every shift attempt degenerate) is
/// skipped for the next. `load` supplies image `i`'s clean mask and `store`
/// receives each corrupted mask. Both may run concurrently on the current
/// rayon pool, and the result is the same for any pool size.
///
/// Returns one log per image, in input order.
pub fn corrupt_with<L, S>(
    image_ids: &[String],
    plan: &CorruptionPlan,
    unlabeled: u8,
    load: L,
    store: S,
) -> Result<Vec<ErrorLog>>
where
    L: Fn(usize) -> Result<AnnotatedMask> + Sync,
    S: Fn(usize, &AnnotatedMask) -> Result<()> + Sync,
{
    let n = image_ids.len();
    plan.validate(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut plan.stream(0));

    let mut logs: Vec<ErrorLog> = image_ids.iter().map(ErrorLog::clean).collect();
    let mut needed = plan.target_count(n);
    let mut next = 0;
    while needed > 0 {
        if next >= n {
            return Err(Error::InfeasiblePlan(format!(
                "only {} of {} requested {:?} errors could be placed",
                plan.target_count(n) - needed,
                plan.target_count(n),
                plan.error_type
            )));
        }
        let batch = &order[next..(next + needed).min(n)];
        next += batch.len();
        let outcomes: Vec<Option<Injection>> = batch
            .par_iter()
            .map(|&idx| -> Result<Option<Injection>> {
                let mask = load(idx).map_err(|e| e.in_image(&image_ids[idx]))?;
                match plan.try_inject(idx, &mask, unlabeled) {
                    Some((corrupted, injection)) => {
                        store(idx, &corrupted).map_err(|e| e.in_image(&image_ids[idx]))?;
                        Ok(Some(injection))
                    }
                    None => Ok(None),
                }
            })
            .collect::<Result<_>>()?;
        for (&idx, outcome) in batch.iter().zip(outcomes) {
            if let Some(injection) = outcome {
                logs[idx].error = injection.error;
                logs[idx].pixels_changed = injection.pixels_changed;
                needed -= 1;
            }
        }
    }
    Ok(logs)
}

/// In-memory corruption. Returns the corrupted mask (or `None` when untouched)
/// and the log for every image.
pub fn corrupt_masks(
    images: &[(String, AnnotatedMask)],
    plan: &CorruptionPlan,
    unlabeled: u8,
) -> Result<Vec<(Option<AnnotatedMask>, ErrorLog)>> {
    let ids: Vec<String> = images.iter().map(|(id, _)| id.clone()).collect();
    let slots: Vec<Mutex<Option<AnnotatedMask>>> = images.iter().map(|_| Mutex::new(None)).collect();
    let logs = corrupt_with(
        &ids,
        plan,
        unlabeled,
        |i| Ok(images[i].1.clone()),
        |i, m| {
            *slots[i].lock().expect("slot lock") = Some(m.clone());
            Ok(())
        },
    )?;
    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock"))
        .zip(logs)
        .collect())
}
