//! Whole-clip translation and reference-style extraction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::networks::{encode_styles, map_latent, translate_deltas, EmotionLabel, ManipulatorParams};
use crate::sequence::{ExpressionSequence, ExpressionTrack, StyleVector, EXPR_DIM, LATENT_DIM};

/// Windows translated per forward batch.
const CHUNK: usize = 256;

/// Gaussian weights over the positions of a window.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeKernel {
    weights: Vec<f64>,
}

impl MergeKernel {
    /// Kernel of length `n` centred at `(n-1)/2` with standard deviation `sigma`.
    pub fn new(n: usize, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid!("kernel length must be positive"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid!("kernel sigma must be positive, got {sigma}"));
        }
        let c = (n as f64 - 1.0) / 2.0;
        let weights = (0..n)
            .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect::<Vec<_>>();
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(invalid!("sigma {sigma} too small: kernel weights underflow"));
        }
        Ok(Self { weights })
    }

    /// `σ = n / 4`.
    pub fn default_for(n: usize) -> Result<Self> {
        Self::new(n, n as f64 / 4.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// For frame `t` of a `track_len`-frame clip: `(window start, offset, normalized weight)`
    /// of every stride-1 window covering it.
    pub fn frame_weights(&self, track_len: usize, t: usize) -> Vec<(usize, usize, f64)> {
        let n = self.len();
        let first = t.saturating_sub(n - 1);
        let last = t.min(track_len - n);
        let raw: Vec<(usize, usize, f64)> = (first..=last).map(|s| (s, t - s, self.weights[t - s])).collect();
        let total: f64 = raw.iter().map(|r| r.2).sum();
        raw.into_iter().map(|(s, o, w)| (s, o, w / total)).collect()
    }
}

/// Blends overlapping stride-1 windows (window `w` starts at frame `w`) into one track.
pub fn merge_windows(windows: &[ExpressionSequence], kernel: &MergeKernel) -> Result<ExpressionTrack> {
    let n = kernel.len();
    if windows.is_empty() || windows.iter().any(|w| w.len() != n) {
        return Err(invalid!("merge needs at least one window of exactly {n} frames"));
    }
    let t_len = windows.len() + n - 1;
    let mut out = vec![0.0f32; t_len * EXPR_DIM];
    for t in 0..t_len {
        let mut acc = [0.0f64; EXPR_DIM];
        for (s, o, a) in kernel.frame_weights(t_len, t) {
            for (k, v) in windows[s].frame(o).iter().enumerate() {
                acc[k] += a * *v as f64;
            }
        }
        for k in 0..EXPR_DIM {
            out[t * EXPR_DIM + k] = acc[k] as f32;
        }
    }
    ExpressionTrack::new(out)
}

/// Translates a clip of any length `T ≥ N` by translating every stride-1 window
/// and averaging the overlaps with the kernel weights renormalized per frame.
pub fn translate_track(
    params: &ManipulatorParams,
    track: &ExpressionTrack,
    d: &StyleVector,
    kernel: &MergeKernel,
) -> Result<ExpressionTrack> {
    let n = kernel.len();
    let t_len = track.len();
    let windows = track.windows(n)?;
    let mut deltas = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(CHUNK) {
        let refs: Vec<&ExpressionSequence> = chunk.iter().collect();
        deltas.extend(translate_deltas(params, &refs, d)?);
    }
    // The translation of window s at offset o is x[s+o] + delta; every window
    // covering frame t shares x[t], so only the deltas need blending.
    let mut out = track.data().to_vec();
    for t in 0..t_len {
        let mut acc = [0.0f64; EXPR_DIM];
        for (s, o, a) in kernel.frame_weights(t_len, t) {
            let row = &deltas[s][o * EXPR_DIM..(o + 1) * EXPR_DIM];
            for k in 0..EXPR_DIM {
                acc[k] += a * row[k] as f64;
            }
        }
        for k in 0..EXPR_DIM {
            out[t * EXPR_DIM + k] += acc[k] as f32;
        }
    }
    ExpressionTrack::new(out)
}

pub const WEISZFELD_TOL: f64 = 1e-8;
pub const WEISZFELD_MAX_ITERS: usize = 1000;
const COINCIDENT: f64 = 1e-12;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Sum of Euclidean distances from `x` to every point.
pub fn median_objective(points: &[Vec<f64>], x: &[f64]) -> f64 {
    points.iter().map(|p| distance(p, x)).sum()
}

/// Result of [`geometric_median_trace`].
#[derive(Clone, Debug)]
pub struct MedianTrace {
    pub point: Vec<f64>,
    /// Objective at the start point and after every accepted iteration.
    pub objective: Vec<f64>,
}

/// Weiszfeld iteration from the coordinate-wise median, keeping the objective history.
pub fn geometric_median_trace(points: &[Vec<f64>]) -> Result<MedianTrace> {
    let dim = points.first().ok_or_else(|| invalid!("geometric median of an empty set"))?.len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(invalid!("points must share a positive dimension"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid!("points must be finite"));
    }
    let mut x: Vec<f64> = (0..dim)
        .map(|k| {
            let mut col: Vec<f64> = points.iter().map(|p| p[k]).collect();
            col.sort_by(f64::total_cmp);
            let m = col.len();
            if m % 2 == 1 {
                col[m / 2]
            } else {
                0.5 * (col[m / 2 - 1] + col[m / 2])
            }
        })
        .collect();
    let mut objective = vec![median_objective(points, &x)];
    for _ in 0..WEISZFELD_MAX_ITERS {
        // Points at the current estimate are left out of the weighted mean and
        // handled by the Vardi-Zhang correction, so data points are never sticky.
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        let mut coincident = 0.0;
        for p in points {
            let d = distance(p, &x);
            if d < COINCIDENT {
                coincident += 1.0;
                continue;
            }
            den += 1.0 / d;
            for (n, v) in num.iter_mut().zip(p) {
                *n += v / d;
            }
        }
        if den == 0.0 {
            break;
        }
        let mean: Vec<f64> = num.iter().map(|n| n / den).collect();
        let next: Vec<f64> = if coincident == 0.0 {
            mean
        } else {
            // `pull` is the descent direction's length; below the coincident mass the estimate is optimal.
            let pull = mean.iter().zip(&x).map(|(m, v)| (m - v).powi(2)).sum::<f64>().sqrt() * den;
            if pull <= coincident {
                break;
            }
            let keep = coincident / pull;
            mean.iter().zip(&x).map(|(m, v)| (1.0 - keep) * m + keep * v).collect()
        };
        let step = distance(&next, &x);
        let f = median_objective(points, &next);
        let current = *objective.last().unwrap();
        if f > current {
            break;
        }
        x = next;
        objective.push(f);
        if step < WEISZFELD_TOL {
            break;
        }
    }
    Ok(MedianTrace { point: x, objective })
}

/// Point minimizing the sum of Euclidean distances to `points`.
pub fn geometric_median(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(geometric_median_trace(points)?.point)
}

/// Latent code `z ~ N(0, I)` drawn from `seed`.
pub fn sample_latent(seed: u64) -> [f32; LATENT_DIM] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| StandardNormal.sample(&mut rng))
}

/// Target style for `label` from the mapping network, with `z` drawn from `seed`.
pub fn label_style(params: &ManipulatorParams, label: EmotionLabel, seed: u64) -> Result<StyleVector> {
    map_latent(params, &sample_latent(seed), label)
}

/// Style of a reference clip: geometric median of the encodings of all its stride-1 windows.
pub fn extract_style(params: &ManipulatorParams, reference: &ExpressionTrack, n: usize) -> Result<StyleVector> {
    let windows = reference.windows(n)?;
    let mut codes = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(CHUNK) {
        let refs: Vec<&ExpressionSequence> = chunk.iter().collect();
        codes.extend(encode_styles(params, &refs)?);
    }
    let points: Vec<Vec<f64>> = codes
        .iter()
        .map(|c| c.as_slice().iter().map(|&v| v as f64).collect())
        .collect();
    let m = geometric_median(&points)?;
    StyleVector::from_slice(&m.iter().map(|&v| v as f32).collect::<Vec<_>>())
}
