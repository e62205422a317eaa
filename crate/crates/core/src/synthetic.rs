//! Seeded synthetic segmentation data: blob-shaped ground-truth masks and the
//! probabilities of a simulated, reasonably calibrated model of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{AnnotatedMask, ProbabilityMap};
use crate::io::{self, DatasetManifest, ManifestEntry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub height: usize,
    pub width: usize,
    /// Class count; class 0 is the unlabeled class.
    pub classes: usize,
    /// Weight of per-pixel random simplex noise mixed into the one-hot truth.
    pub noise_weight: f64,
    /// Box-filter radius used to smooth the simulated probabilities.
    pub smoothing_radius: usize,
    /// Chance that an image contains a region the model is unsure about.
    pub confusion_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            classes: 5,
            noise_weight: 0.2,
            smoothing_radius: 1,
            confusion_rate: 0.5,
            seed: 0,
        }
    }
}

/// One generated image: the true mask and the simulated model output.
#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub image_id: String,
    pub truth: AnnotatedMask,
    pub probs: ProbabilityMap,
}

struct Ellipse {
    ci: f64,
    cj: f64,
    ri: f64,
    rj: f64,
}

impl Ellipse {
    fn random(rng: &mut ChaCha8Rng, h: usize, w: usize, min_r: f64, max_r: f64) -> Self {
        Self {
            ci: rng.random_range(0.0..h as f64),
            cj: rng.random_range(0.0..w as f64),
            ri: rng.random_range(min_r..max_r),
            rj: rng.random_range(min_r..max_r),
        }
    }

    fn contains(&self, i: usize, j: usize) -> bool {
        let di = (i as f64 + 0.5 - self.ci) / self.ri;
        let dj = (j as f64 + 0.5 - self.cj) / self.rj;
        di * di + dj * dj <= 1.0
    }
}

/// Background of class 1 with several elliptical objects of random classes;
/// sometimes a small patch of class 0 (unlabeled).
pub fn blob_mask(rng: &mut ChaCha8Rng, height: usize, width: usize, classes: usize) -> Result<AnnotatedMask> {
    let mut data = vec![1u8; height * width];
    let scale = height.min(width) as f64;
    let blobs = rng.random_range(3..=6);
    for _ in 0..blobs {
        let class = rng.random_range(1..classes) as u8;
        let e = Ellipse::random(rng, height, width, scale * 0.08, scale * 0.25);
        paint(&mut data, width, &e, class);
    }
    if rng.random_bool(0.3) {
        let e = Ellipse::random(rng, height, width, scale * 0.03, scale * 0.08);
        paint(&mut data, width, &e, 0);
    }
    AnnotatedMask::new(height, width, data)
}

fn paint(data: &mut [u8], width: usize, e: &Ellipse, class: u8) {
    for (idx, v) in data.iter_mut().enumerate() {
        if e.contains(idx / width, idx % width) {
            *v = class;
        }
    }
}

/// Mixes the one-hot truth with Dirichlet(1) noise, optionally blends a
/// confusion region toward a wrong class, then box-smooths the map.
pub fn simulate_probs(
    rng: &mut ChaCha8Rng,
    truth: &AnnotatedMask,
    config: &SyntheticConfig,
) -> Result<ProbabilityMap> {
    let (h, w) = truth.dims();
    let k = config.classes;
    let mut data = vec![0.0; h * w * k];
    for (idx, &label) in truth.as_slice().iter().enumerate() {
        let row = &mut data[idx * k..(idx + 1) * k];
        let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = draws.iter().sum();
        for (v, d) in row.iter_mut().zip(&draws) {
            *v = config.noise_weight * d / total;
        }
        row[label as usize] += 1.0 - config.noise_weight;
    }
    if rng.random_bool(config.confusion_rate) {
        let scale = h.min(w) as f64;
        let e = Ellipse::random(rng, h, w, scale * 0.05, scale * 0.15);
        let wrong = rng.random_range(0..k);
        let strength = rng.random_range(0.2..0.6);
        for i in 0..h {
            for j in 0..w {
                if e.contains(i, j) {
                    let row = &mut data[(i * w + j) * k..(i * w + j + 1) * k];
                    row.iter_mut().for_each(|v| *v *= 1.0 - strength);
                    row[wrong] += strength;
                }
            }
        }
    }
    let smoothed = box_smooth(&data, h, w, k, config.smoothing_radius);
    ProbabilityMap::new(h, w, k, smoothed)
}

/// Mean over the `(2r+1)^2` window clipped to the grid; keeps rows on the simplex.
fn box_smooth(data: &[f64], h: usize, w: usize, k: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return data.to_vec();
    }
    let mut out = vec![0.0; data.len()];
    for i in 0..h {
        for j in 0..w {
            let dst = &mut out[(i * w + j) * k..(i * w + j + 1) * k];
            let mut n = 0.0;
            for ii in i.saturating_sub(r)..=(i + r).min(h - 1) {
                for jj in j.saturating_sub(r)..=(j + r).min(w - 1) {
                    for (d, s) in dst.iter_mut().zip(&data[(ii * w + jj) * k..(ii * w + jj + 1) * k]) {
                        *d += s;
                    }
                    n += 1.0;
                }
            }
            dst.iter_mut().for_each(|v| *v /= n);
        }
    }
    out
}

/// `n` images; image `i` draws from its own ChaCha8 stream of `config.seed`.
pub fn generate(n: usize, config: &SyntheticConfig) -> Result<Vec<SyntheticImage>> {
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let truth = blob_mask(&mut rng, config.height, config.width, config.classes)?;
            let probs = simulate_probs(&mut rng, &truth, config)?;
            Ok(SyntheticImage {
                image_id: format!("img_{i:05}"),
                truth,
                probs,
            })
        })
        .collect()
}

/// Writes images as `<id>.npy` / `<id>.png` under `dir` plus a `manifest.json`
/// referencing them, using the true masks as annotations.
pub fn write_dataset(dir: &Path, images: &[SyntheticImage], classes: usize) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(images.len());
    for img in images {
        let prob_path = PathBuf::from(format!("{}.npy", img.image_id));
        let label_path = PathBuf::from(format!("{}.png", img.image_id));
        io::write_tensor(&dir.join(&prob_path), &img.probs)?;
        io::write_mask(&dir.join(&label_path), &img.truth)?;
        entries.push(ManifestEntry {
            image_id: img.image_id.clone(),
            prob_path,
            label_path,
            height: img.truth.height(),
            width: img.truth.width(),
        });
    }
    let mut manifest = DatasetManifest::new(classes, 0, entries)?;
    manifest.set_base_dir(dir);
    manifest.save(&dir.join("manifest.json"))?;
    Ok(manifest)
}
