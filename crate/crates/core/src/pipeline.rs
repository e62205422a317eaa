//! Dataset-level drivers: scoring every image, corrupting a dataset on disk,
//! and emitting review overlays.
//!
//! Images are processed in chunks on a rayon pool so that at most a chunk of
//! images is in memory at once. Results are gathered in manifest order, which
//! makes every output independent of the pool size.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};
use std::path::{Component, Path, PathBuf};

use rayon::prelude::*;

use crate::confident::{ClassThresholds, ThresholdAccumulator};
use crate::error::{Error, Result};
use crate::grid::{AnnotatedMask, ProbabilityMap};
use crate::inject::{corrupt_with, CorruptionPlan, ErrorLog};
use crate::io::{self, DatasetManifest, ErrorLogHeader, OverlayInfo, ScoreRecord};
use crate::registry::{ImageContext, ImageScorer};

type Loaded<'a> = (Cow<'a, ProbabilityMap>, Cow<'a, AnnotatedMask>);

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Validation(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn chunk_len() -> usize {
    (rayon::current_num_threads() * 2).max(2)
}

/// Pass one of confident learning: pooled per-class mean self-confidence
/// over every image.
fn thresholds_with<'a, F>(n: usize, classes: usize, factor: usize, load: &F) -> Result<ClassThresholds>
where
    F: Fn(usize) -> Result<Loaded<'a>> + Sync,
{
    let mut total = ThresholdAccumulator::new(classes);
    for start in (0..n).step_by(chunk_len()) {
        let end = (start + chunk_len()).min(n);
        let partials: Vec<ThresholdAccumulator> = (start..end)
            .into_par_iter()
            .map(|i| {
                let (probs, labels) = load(i)?;
                let ctx = ImageContext::new(&probs, &labels, factor)?;
                let mut acc = ThresholdAccumulator::new(classes);
                acc.add_image(ctx.pooled_probs(), ctx.pooled_labels())?;
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        for p in &partials {
            total.merge(p);
        }
    }
    Ok(total.finish())
}

fn score_with<'a, F>(
    ids: &[String],
    classes: usize,
    scorers: &[&dyn ImageScorer],
    factor: usize,
    load: F,
) -> Result<Vec<ScoreRecord>>
where
    F: Fn(usize) -> Result<Loaded<'a>> + Sync,
{
    if scorers.is_empty() {
        return Err(Error::Validation("no scoring methods requested".into()));
    }
    if ids.is_empty() {
        return Err(Error::Validation("dataset has no images".into()));
    }
    let n = ids.len();
    let load = |i: usize| load(i).map_err(|e| e.in_image(&ids[i]));
    let thresholds = if scorers.iter().any(|s| s.needs_class_thresholds()) {
        Some(thresholds_with(n, classes, factor, &load)?)
    } else {
        None
    };
    let mut per_image: Vec<Vec<f64>> = Vec::with_capacity(n);
    for start in (0..n).step_by(chunk_len()) {
        let end = (start + chunk_len()).min(n);
        let chunk: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let (probs, labels) = load(i)?;
                let mut ctx = ImageContext::new(&probs, &labels, factor).map_err(|e| e.in_image(&ids[i]))?;
                if let Some(t) = &thresholds {
                    ctx = ctx.with_thresholds(t);
                }
                scorers
                    .iter()
                    .map(|s| s.score(&ctx).map_err(|e| e.in_image(&ids[i])))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        per_image.extend(chunk);
    }
    let mut records = Vec::with_capacity(n * scorers.len());
    for (m, scorer) in scorers.iter().enumerate() {
        let scores = ids.iter().cloned().zip(per_image.iter().map(|s| s[m])).collect();
        records.extend(io::rank_scores(scorer.method(), scores));
    }
    records.sort_by_key(|r| (r.method, r.rank));
    Ok(records)
}

/// Scores in-memory images. All images must share a class count.
pub fn score_images(
    images: &[(String, ProbabilityMap, AnnotatedMask)],
    scorers: &[&dyn ImageScorer],
    factor: usize,
) -> Result<Vec<ScoreRecord>> {
    let classes = images.first().map_or(2, |(_, p, _)| p.classes());
    if let Some((id, _, _)) = images.iter().find(|(_, p, _)| p.classes() != classes) {
        return Err(Error::Shape(format!("image {id} has a different class count")));
    }
    let ids: Vec<String> = images.iter().map(|(id, _, _)| id.clone()).collect();
    score_with(&ids, classes, scorers, factor, |i| {
        Ok((Cow::Borrowed(&images[i].1), Cow::Borrowed(&images[i].2)))
    })
}

/// Scores every manifest entry with every scorer. When a scorer needs
/// confident-learning thresholds the dataset is read twice.
pub fn score_dataset(
    manifest: &DatasetManifest,
    scorers: &[&dyn ImageScorer],
    factor: usize,
) -> Result<Vec<ScoreRecord>> {
    let ids: Vec<String> = manifest.entries.iter().map(|e| e.image_id.clone()).collect();
    score_with(&ids, manifest.num_classes, scorers, factor, |i| {
        let (p, l) = manifest.load_image(&manifest.entries[i])?;
        Ok((Cow::Owned(p), Cow::Owned(l)))
    })
}

/// Confident-learning thresholds of a whole manifest.
pub fn dataset_thresholds(manifest: &DatasetManifest, factor: usize) -> Result<ClassThresholds> {
    let ids: Vec<String> = manifest.entries.iter().map(|e| e.image_id.clone()).collect();
    if ids.is_empty() {
        return Err(Error::Validation("dataset has no images".into()));
    }
    thresholds_with(ids.len(), manifest.num_classes, factor, &|i| {
        let (p, l) = manifest
            .load_image(&manifest.entries[i])
            .map_err(|e| e.in_image(&ids[i]))?;
        Ok((Cow::Owned(p), Cow::Owned(l)))
    })
}

/// File-system-safe, collision-free file stems for image ids.
fn file_stems(ids: &[String]) -> Vec<String> {
    let sanitized: Vec<String> = ids
        .iter()
        .map(|id| {
            id.chars()
                .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
                .collect()
        })
        .collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &sanitized {
        *counts.entry(s.as_str()).or_default() += 1;
    }
    sanitized
        .iter()
        .enumerate()
        .map(|(i, s)| if counts[s.as_str()] > 1 { format!("{s}_{i}") } else { s.clone() })
        .collect()
}

/// Path of `target` relative to directory `base`; both must exist.
fn relative_path(base: &Path, target: &Path) -> Result<PathBuf> {
    let base = base.canonicalize().map_err(|e| Error::io(base, e))?;
    let target = target.canonicalize().map_err(|e| Error::io(target, e))?;
    let b: Vec<Component> = base.components().collect();
    let t: Vec<Component> = target.components().collect();
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c);
    }
    Ok(rel)
}

/// Output locations of [`corrupt_dataset`], relative to its output directory.
pub const CORRUPTED_MANIFEST: &str = "manifest.json";
pub const ERROR_LOG: &str = "errors.jsonl";
pub const MASK_DIR: &str = "masks";

/// Corrupts a dataset on disk.
///
/// Writes corrupted masks under `out_dir/masks/`, then a manifest pointing at
/// them (clean images keep their original masks, referenced relatively) and
/// the JSON-lines error log. The manifest and log are written last, each
/// atomically.
pub fn corrupt_dataset(
    manifest: &DatasetManifest,
    plan: &CorruptionPlan,
    out_dir: &Path,
) -> Result<(DatasetManifest, Vec<ErrorLog>)> {
    plan.validate(manifest.len())?;
    let ids: Vec<String> = manifest.entries.iter().map(|e| e.image_id.clone()).collect();
    let stems = file_stems(&ids);
    let mask_dir = out_dir.join(MASK_DIR);
    std::fs::create_dir_all(&mask_dir).map_err(|e| Error::io(&mask_dir, e))?;

    let logs = corrupt_with(
        &ids,
        plan,
        manifest.unlabeled_class,
        |i| manifest.load_mask(&manifest.entries[i]),
        |i, mask| io::write_mask(&mask_dir.join(format!("{}.png", stems[i])), mask),
    )?;

    let mut out = manifest.clone();
    for ((entry, log), stem) in out.entries.iter_mut().zip(&logs).zip(&stems) {
        entry.prob_path = relative_path(out_dir, &manifest.resolve(&entry.prob_path))?;
        entry.label_path = if log.is_error() {
            Path::new(MASK_DIR).join(format!("{stem}.png"))
        } else {
            relative_path(out_dir, &manifest.resolve(&entry.label_path))?
        };
    }
    out.set_base_dir(out_dir);
    out.save(&out_dir.join(CORRUPTED_MANIFEST))?;
    io::write_error_log(&out_dir.join(ERROR_LOG), &ErrorLogHeader::new(*plan, &logs), &logs)?;
    Ok((out, logs))
}

/// Writes a review overlay for each requested image: pixels whose annotated
/// class likelihood is below `threshold`, or whose pooled cell is flagged by
/// confident learning, are marked.
pub fn emit_overlays(
    manifest: &DatasetManifest,
    image_ids: &[String],
    threshold: f64,
    factor: usize,
    out_dir: &Path,
) -> Result<Vec<OverlayInfo>> {
    let known: HashSet<&str> = manifest.entries.iter().map(|e| e.image_id.as_str()).collect();
    let mut missing: Vec<String> = image_ids.iter().filter(|id| !known.contains(id.as_str())).cloned().collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::Join { missing });
    }
    let wanted: HashSet<&str> = image_ids.iter().map(String::as_str).collect();
    let thresholds = dataset_thresholds(manifest, factor)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ids: Vec<String> = manifest.entries.iter().map(|e| e.image_id.clone()).collect();
    let stems = file_stems(&ids);
    let selected: Vec<usize> = (0..ids.len()).filter(|&i| wanted.contains(ids[i].as_str())).collect();
    selected
        .par_iter()
        .map(|&i| {
            let entry = &manifest.entries[i];
            let (probs, labels) = manifest.load_image(entry)?;
            let ctx = ImageContext::new(&probs, &labels, factor)?.with_thresholds(&thresholds);
            let flags = ctx.flags()?.upsample(factor, probs.height(), probs.width())?;
            io::emit_overlay(
                &entry.image_id,
                ctx.pixel_scores(),
                &flags,
                threshold,
                &out_dir.join(format!("{}.png", stems[i])),
            )
            .map_err(|e| e.in_image(&entry.image_id))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_sanitized_and_unique() {
        let ids = vec!["a/b".to_string(), "a_b".to_string(), "ok-1.x".to_string()];
        assert_eq!(file_stems(&ids), vec!["a_b_0", "a_b_1", "ok-1.x"]);
    }

    #[test]
    fn relative_paths_climb_out() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let out = dir.path().join("runs/one");
        std::fs::create_dir_all(&data).unwrap();
        std::fs::create_dir_all(&out).unwrap();
        std::fs::write(data.join("x.npy"), b"").unwrap();
        assert_eq!(
            relative_path(&out, &data.join("x.npy")).unwrap(),
            PathBuf::from("../../data/x.npy")
        );
    }
}
