//! Naive references for every score, written as direct loops over the
//! definitions and sharing no code with the library's scoring paths, plus
//! seeded random instances to compare them on.

#![allow(dead_code, clippy::needless_range_loop, clippy::manual_div_ceil)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segaudit_core::{AnnotatedMask, ProbabilityMap};

pub struct Instance {
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub probs: ProbabilityMap,
    pub labels: AnnotatedMask,
}

impl Instance {
    pub fn p(&self, i: usize, j: usize, k: usize) -> f64 {
        self.probs.pixel(i, j)[k]
    }

    pub fn l(&self, i: usize, j: usize) -> usize {
        self.labels.get(i, j) as usize
    }
}

/// Blocky labels with random flips, and probabilities that mostly but not
/// always favour the label, so every score takes nontrivial values.
pub fn random_instance(rng: &mut ChaCha8Rng, min_side: usize, max_side: usize, classes: std::ops::RangeInclusive<usize>) -> Instance {
    let h = rng.random_range(min_side..=max_side);
    let w = rng.random_range(min_side..=max_side);
    let k = rng.random_range(classes);
    let block = rng.random_range(2..=6);
    let block_classes: Vec<u8> = (0..h.div_ceil(block) * w.div_ceil(block))
        .map(|_| rng.random_range(0..k) as u8)
        .collect();
    let mut labels = vec![0u8; h * w];
    for i in 0..h {
        for j in 0..w {
            labels[i * w + j] = if rng.random_bool(0.15) {
                rng.random_range(0..k) as u8
            } else {
                block_classes[(i / block) * w.div_ceil(block) + j / block]
            };
        }
    }
    let sharp = rng.random_range(0.5..4.0);
    let mut probs = vec![0.0; h * w * k];
    for idx in 0..h * w {
        let favoured = if rng.random_bool(0.8) { labels[idx] as usize } else { rng.random_range(0..k) };
        let row = &mut probs[idx * k..(idx + 1) * k];
        for (c, v) in row.iter_mut().enumerate() {
            *v = rng.random::<f64>() + if c == favoured { sharp } else { 0.0 };
        }
        if rng.random_bool(0.05) {
            // exact ties exercise the lowest-index rule
            row.iter_mut().for_each(|v| *v = 1.0);
        }
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    Instance {
        h,
        w,
        k,
        probs: ProbabilityMap::new(h, w, k, probs).unwrap(),
        labels: AnnotatedMask::new(h, w, labels).unwrap(),
    }
}

pub fn naive_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for c in 0..values.len() {
        if values[c] > values[best] {
            best = c;
        }
    }
    best
}

pub fn ref_predicted(x: &Instance) -> Vec<Vec<usize>> {
    (0..x.h)
        .map(|i| (0..x.w).map(|j| naive_argmax(x.probs.pixel(i, j))).collect())
        .collect()
}

pub fn ref_ccp(x: &Instance) -> f64 {
    let pred = ref_predicted(x);
    let mut hits = 0.0;
    for i in 0..x.h {
        for j in 0..x.w {
            if pred[i][j] == x.l(i, j) {
                hits += 1.0;
            }
        }
    }
    hits / (x.h * x.w) as f64
}

pub fn ref_tccp(x: &Instance, thresholds: &[f64], membership: bool) -> f64 {
    let mut total = 0.0;
    for k in 0..x.k {
        let mut best = f64::NEG_INFINITY;
        for &tau in thresholds {
            let mut count = 0.0;
            for i in 0..x.h {
                for j in 0..x.w {
                    let annotated = x.l(i, j) == k;
                    let above = x.p(i, j, k) > tau;
                    let hit = if membership { annotated == above } else { annotated && above };
                    if hit {
                        count += 1.0;
                    }
                }
            }
            let acc = count / (x.h * x.w) as f64;
            if acc > best {
                best = acc;
            }
        }
        total += best;
    }
    total / x.k as f64
}

pub fn ref_self_confidence(x: &Instance) -> Vec<f64> {
    let mut s = Vec::new();
    for i in 0..x.h {
        for j in 0..x.w {
            s.push(x.p(i, j, x.l(i, j)));
        }
    }
    s
}

pub fn ref_cil(x: &Instance) -> f64 {
    let s = ref_self_confidence(x);
    s.iter().sum::<f64>() / s.len() as f64
}

/// The weighted sum exactly as written, no max shift.
pub fn ref_softmin_values(s: &[f64], tau: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &v in s {
        let e = ((1.0 - v) / tau).exp();
        num += v * e;
        den += e;
    }
    num / den
}

pub fn ref_softmin(x: &Instance, tau: f64) -> f64 {
    ref_softmin_values(&ref_self_confidence(x), tau)
}

pub fn ref_iou(x: &Instance) -> f64 {
    let pred = ref_predicted(x);
    let mut sum = 0.0;
    let mut present = 0.0;
    for k in 0..x.k {
        let mut inter = 0usize;
        let mut union = 0usize;
        for i in 0..x.h {
            for j in 0..x.w {
                let a = pred[i][j] == k;
                let b = x.l(i, j) == k;
                if a && b {
                    inter += 1;
                }
                if a || b {
                    union += 1;
                }
            }
        }
        if union > 0 {
            sum += inter as f64 / union as f64;
            present += 1.0;
        }
    }
    sum / present
}

/// Pooled probabilities (mean then renormalized) and majority labels.
pub struct RefPooled {
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub p: Vec<Vec<Vec<f64>>>,
    pub l: Vec<Vec<usize>>,
}

pub fn ref_downsample(x: &Instance, f: usize) -> RefPooled {
    let ph = (x.h + f - 1) / f;
    let pw = (x.w + f - 1) / f;
    let mut p = vec![vec![vec![0.0; x.k]; pw]; ph];
    let mut l = vec![vec![0usize; pw]; ph];
    for bi in 0..ph {
        for bj in 0..pw {
            let mut votes = vec![0usize; x.k];
            let mut n = 0.0;
            for i in bi * f..x.h.min(bi * f + f) {
                for j in bj * f..x.w.min(bj * f + f) {
                    for c in 0..x.k {
                        p[bi][bj][c] += x.p(i, j, c);
                    }
                    votes[x.l(i, j)] += 1;
                    n += 1.0;
                }
            }
            for c in 0..x.k {
                p[bi][bj][c] /= n;
            }
            let total: f64 = p[bi][bj].iter().sum();
            for c in 0..x.k {
                p[bi][bj][c] /= total;
            }
            let mut best = 0;
            for c in 0..x.k {
                if votes[c] > votes[best] {
                    best = c;
                }
            }
            l[bi][bj] = best;
        }
    }
    RefPooled { h: ph, w: pw, k: x.k, p, l }
}

/// Confident learning over a single-image population: mean self-confidence
/// thresholds, then the off-diagonal rule pixel by pixel.
pub fn ref_clc(x: &Instance, f: usize) -> f64 {
    let d = ref_downsample(x, f);
    let mut sums = vec![0.0; d.k];
    let mut counts = vec![0usize; d.k];
    for i in 0..d.h {
        for j in 0..d.w {
            sums[d.l[i][j]] += d.p[i][j][d.l[i][j]];
            counts[d.l[i][j]] += 1;
        }
    }
    let mut kept = 0.0;
    for i in 0..d.h {
        for j in 0..d.w {
            let mut confident: Option<usize> = None;
            for c in 0..d.k {
                if counts[c] == 0 {
                    continue;
                }
                let t = sums[c] / counts[c] as f64;
                if d.p[i][j][c] >= t {
                    match confident {
                        Some(b) if d.p[i][j][b] >= d.p[i][j][c] => {}
                        _ => confident = Some(c),
                    }
                }
            }
            let flagged = matches!(confident, Some(c) if c != d.l[i][j]);
            if !flagged {
                kept += 1.0;
            }
        }
    }
    kept / (d.h * d.w) as f64
}

/// Flood-fill components of constant (argmax, label) on the pooled grid.
pub fn ref_components(d: &RefPooled, eight: bool) -> Vec<Vec<(usize, usize)>> {
    let pred: Vec<Vec<usize>> = d.p.iter().map(|r| r.iter().map(|v| naive_argmax(v)).collect()).collect();
    let mut seen = vec![vec![false; d.w]; d.h];
    let mut comps = Vec::new();
    for si in 0..d.h {
        for sj in 0..d.w {
            if seen[si][sj] {
                continue;
            }
            let key = (pred[si][sj], d.l[si][sj]);
            let mut stack = vec![(si, sj)];
            seen[si][sj] = true;
            let mut pixels = Vec::new();
            while let Some((i, j)) = stack.pop() {
                pixels.push((i, j));
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if (di == 0 && dj == 0) || (!eight && di != 0 && dj != 0) {
                            continue;
                        }
                        let (ni, nj) = (i as i64 + di, j as i64 + dj);
                        if ni < 0 || nj < 0 || ni >= d.h as i64 || nj >= d.w as i64 {
                            continue;
                        }
                        let (ni, nj) = (ni as usize, nj as usize);
                        if !seen[ni][nj] && (pred[ni][nj], d.l[ni][nj]) == key {
                            seen[ni][nj] = true;
                            stack.push((ni, nj));
                        }
                    }
                }
            }
            pixels.sort();
            comps.push(pixels);
        }
    }
    comps
}

pub fn ref_coco(x: &Instance, f: usize) -> f64 {
    let d = ref_downsample(x, f);
    let comps = ref_components(&d, false);
    let mut total = 0.0;
    for comp in &comps {
        let (i0, j0) = comp[0];
        let k = d.l[i0][j0];
        let mut mean = 0.0;
        for &(i, j) in comp {
            mean += d.p[i][j][k];
        }
        total += mean / comp.len() as f64;
    }
    total / comps.len() as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
