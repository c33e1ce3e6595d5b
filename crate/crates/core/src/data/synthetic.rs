//! Synthetic emotion domains with a known generative model.
//!
//! Every clip carries a content signal `c_t ∈ R⁵¹`: channel 0 is a "speech"
//! signal, channels 1–8 are mouth channels drawing from the same frequency band,
//! and the remaining channels oscillate at their own frequencies. A domain `y`
//! renders content as `ε_t = A_y·c_t + b_y + noise`, with `A_y` diagonally
//! dominant and a positive jaw gain. Because the content model is known, the
//! domain of any clip can be recovered by [`oracle_classify`].

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::manifest::{ClipEntry, DatasetManifest, MANIFEST_VERSION};
use super::track_csv::write_track;
use crate::error::{invalid, Result};
use crate::networks::{EmotionLabel, Normalization, NUM_EMOTIONS};
use crate::sequence::{ExpressionTrack, EXPR_DIM, JAW};

const MOUTH_CHANNELS: usize = 8;
const SPEECH_BAND: (f64, f64) = (0.5, 1.1);
const OTHER_BAND: (f64, f64) = (0.15, 1.2);
const AMPLITUDE: (f64, f64) = (0.3, 1.0);

/// Affine rendering of content into one emotion domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainMap {
    /// 51×51 row-major.
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl DomainMap {
    pub fn jaw_gain(&self) -> f64 {
        self.matrix[JAW * EXPR_DIM + JAW]
    }

    fn apply(&self, c: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[r * EXPR_DIM..(r + 1) * EXPR_DIM];
            *o = row.iter().zip(c).map(|(a, x)| a * x).sum::<f64>() + self.offset[r];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub seed: u64,
    /// Standard deviation of i.i.d. per-entry noise.
    pub noise: f64,
    /// Angular frequencies (radians per frame) of each content channel.
    pub freqs: Vec<Vec<f64>>,
    /// One map per emotion label, in label order.
    pub domains: Vec<DomainMap>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl DomainSpec {
    /// The default seven-domain construction, a pure function of `seed`.
    pub fn synthetic(seed: u64) -> Self {
        let mut rng = rng_for(seed, 0);
        let speech: Vec<f64> = (0..4).map(|_| rng.random_range(SPEECH_BAND.0..SPEECH_BAND.1)).collect();
        let mut freqs = vec![speech.clone()];
        for k in 1..EXPR_DIM {
            let count = rng.random_range(2..=4usize);
            let f: Vec<f64> = if k <= MOUTH_CHANNELS {
                let mut pool = speech.clone();
                (0..count.min(pool.len()))
                    .map(|_| pool.swap_remove(rng.random_range(0..pool.len())))
                    .collect()
            } else {
                (0..count).map(|_| rng.random_range(OTHER_BAND.0..OTHER_BAND.1)).collect()
            };
            freqs.push(f);
        }

        let domains = (0..NUM_EMOTIONS)
            .map(|_| {
                let mut a = vec![0.0; EXPR_DIM * EXPR_DIM];
                a[JAW * EXPR_DIM + JAW] = rng.random_range(0.6..1.5);
                let mouth = rng.random_range(1..=MOUTH_CHANNELS);
                a[JAW * EXPR_DIM + mouth] = rng.random_range(-0.15..0.15);
                for r in 1..EXPR_DIM {
                    let diag = rng.random_range(0.7..1.3);
                    a[r * EXPR_DIM + r] = diag;
                    for _ in 0..2 {
                        let mut c = rng.random_range(1..EXPR_DIM);
                        if c == r {
                            c = if r + 1 < EXPR_DIM { r + 1 } else { 1 };
                        }
                        a[r * EXPR_DIM + c] += (0.2 * normal(&mut rng)).clamp(-0.35 * diag, 0.35 * diag);
                    }
                }
                let offset = (0..EXPR_DIM)
                    .map(|k| if k == JAW { 0.3 } else { 0.6 } * normal(&mut rng))
                    .collect();
                DomainMap { matrix: a, offset }
            })
            .collect();

        Self {
            seed,
            noise: 0.05,
            freqs,
            domains,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.len() < 2 || self.domains.len() > NUM_EMOTIONS {
            return Err(invalid!("domain spec needs 2..=7 domains, has {}", self.domains.len()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(invalid!("noise scale must be finite and non-negative"));
        }
        if self.freqs.len() != EXPR_DIM || self.freqs.iter().any(|f| f.is_empty() || f.iter().any(|w| !w.is_finite())) {
            return Err(invalid!("every one of the {EXPR_DIM} channels needs at least one finite frequency"));
        }
        for (y, d) in self.domains.iter().enumerate() {
            if d.matrix.len() != EXPR_DIM * EXPR_DIM || d.offset.len() != EXPR_DIM {
                return Err(invalid!("domain {y}: wrong matrix or offset size"));
            }
            if d.matrix.iter().chain(&d.offset).any(|v| !v.is_finite()) {
                return Err(invalid!("domain {y}: non-finite entries"));
            }
            if d.jaw_gain() <= 0.0 {
                return Err(invalid!("domain {y}: jaw gain must be positive"));
            }
            if invert(&d.matrix).is_none() {
                return Err(invalid!("domain {y}: matrix is singular"));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let spec: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Content signal of `length` frames for content stream `index` of `seed`.
    pub fn content(&self, seed: u64, index: u64, length: usize) -> Vec<f64> {
        let mut rng = rng_for(seed, (1 << 40) | index);
        let mut out = vec![0.0; length * EXPR_DIM];
        for (k, freqs) in self.freqs.iter().enumerate() {
            for &w in freqs {
                let amp = rng.random_range(AMPLITUDE.0..AMPLITUDE.1);
                let phase = rng.random_range(0.0..2.0 * PI);
                for t in 0..length {
                    out[t * EXPR_DIM + k] += amp * (w * t as f64 + phase).sin();
                }
            }
        }
        out
    }

    /// Renders a content signal into domain `label`, adding noise from stream `(seed, label, index)`.
    pub fn render(&self, content: &[f64], label: usize, seed: u64, index: u64) -> Result<ExpressionTrack> {
        let map = self
            .domains
            .get(label)
            .ok_or_else(|| invalid!("label {label} has no domain map"))?;
        let mut rng = rng_for(seed, (2 << 40) | ((label as u64) << 32) | index);
        let mut frame = vec![0.0; EXPR_DIM];
        let mut data = Vec::with_capacity(content.len());
        for c in content.chunks_exact(EXPR_DIM) {
            map.apply(c, &mut frame);
            for v in &frame {
                let noise = if self.noise > 0.0 { self.noise * normal(&mut rng) } else { 0.0 };
                data.push((v + noise) as f32);
            }
        }
        ExpressionTrack::new(data)
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedClip {
    pub label: EmotionLabel,
    /// Content stream shared by the clips of every domain with the same index.
    pub content_index: u64,
    pub track: ExpressionTrack,
}

/// Generates `clips_per_domain` clips of `length` frames per domain, in memory.
pub fn generate_clips(spec: &DomainSpec, clips_per_domain: usize, length: usize, seed: u64) -> Result<Vec<GeneratedClip>> {
    spec.validate()?;
    if clips_per_domain == 0 || length < 2 {
        return Err(invalid!("need at least one clip of at least 2 frames"));
    }
    let mut clips = Vec::with_capacity(clips_per_domain * spec.domains.len());
    for i in 0..clips_per_domain as u64 {
        let content = spec.content(seed, i, length);
        for y in 0..spec.domains.len() {
            clips.push(GeneratedClip {
                label: EmotionLabel::from_index(y)?,
                content_index: i,
                track: spec.render(&content, y, seed, i)?,
            });
        }
    }
    clips.sort_by_key(|c| (c.label, c.content_index));
    Ok(clips)
}

/// Writes a generated dataset under `out_dir` (`clips/*.csv`, `domain_spec.json`,
/// `manifest.json`) and returns the manifest.
pub fn generate_dataset(
    spec: &DomainSpec,
    clips_per_domain: usize,
    length: usize,
    n_window: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    if n_window == 0 || length < n_window {
        return Err(invalid!("clip length {length} must be at least the window length {n_window}"));
    }
    let clips = generate_clips(spec, clips_per_domain, length, seed)?;
    fs::create_dir_all(out_dir.join("clips"))?;
    let mut entries = Vec::with_capacity(clips.len());
    for c in &clips {
        let rel = format!("clips/{}_{:04}.csv", c.label, c.content_index);
        write_track(&out_dir.join(&rel), &c.track)?;
        entries.push(ClipEntry {
            path: rel,
            label: c.label,
            length,
        });
    }
    let norm = Normalization::fit(clips.iter().flat_map(|c| c.track.frames()))?;
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        n_window,
        seed,
        clips: entries,
        norm,
    };
    spec.write(&out_dir.join("domain_spec.json"))?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Gauss–Jordan inverse with partial pivoting.
fn invert(a: &[f64]) -> Option<Vec<f64>> {
    let n = EXPR_DIM;
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))?;
        if m[pivot * n + col].abs() < 1e-12 {
            return None;
        }
        for k in 0..n {
            m.swap(col * n + k, pivot * n + k);
            inv.swap(col * n + k, pivot * n + k);
        }
        let p = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        m[r * n + k] -= f * m[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Residual sum of squares of `r` after a least-squares fit on the sinusoid basis of `freqs`.
fn sinusoid_rss(r: &[f64], freqs: &[f64]) -> f64 {
    let k = 2 * freqs.len();
    let basis = |j: usize, t: usize| {
        let w = freqs[j / 2] * t as f64;
        if j.is_multiple_of(2) {
            w.sin()
        } else {
            w.cos()
        }
    };
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for (t, &rt) in r.iter().enumerate() {
        for i in 0..k {
            let bi = basis(i, t);
            rhs[i] += bi * rt;
            for j in 0..k {
                gram[i * k + j] += bi * basis(j, t);
            }
        }
    }
    for i in 0..k {
        gram[i * k + i] += 1e-9;
    }
    // Cholesky solve of gram · x = rhs
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let s = gram[i * k + j] - (0..j).map(|p| l[i * k + p] * l[j * k + p]).sum::<f64>();
            l[i * k + j] = if i == j { s.max(1e-300).sqrt() } else { s / l[j * k + j] };
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        y[i] = (rhs[i] - (0..i).map(|p| l[i * k + p] * y[p]).sum::<f64>()) / l[i * k + i];
    }
    let explained: f64 = y.iter().map(|v| v * v).sum();
    let total: f64 = r.iter().map(|v| v * v).sum();
    (total - explained).max(0.0)
}

/// Content-model fit residual of `track` under every domain of `spec`.
pub fn oracle_residuals(track: &ExpressionTrack, spec: &DomainSpec) -> Result<Vec<f64>> {
    let t_len = track.len();
    spec.domains
        .iter()
        .enumerate()
        .map(|(y, d)| {
            let inv = invert(&d.matrix).ok_or_else(|| invalid!("domain {y}: matrix is singular"))?;
            let mut content = vec![vec![0.0; t_len]; EXPR_DIM];
            for (t, f) in track.frames().enumerate() {
                let centered: Vec<f64> = f.iter().zip(&d.offset).map(|(&v, b)| v as f64 - b).collect();
                for (k, ch) in content.iter_mut().enumerate() {
                    let row = &inv[k * EXPR_DIM..(k + 1) * EXPR_DIM];
                    ch[t] = row.iter().zip(&centered).map(|(a, x)| a * x).sum();
                }
            }
            Ok(content
                .iter()
                .zip(&spec.freqs)
                .map(|(ch, freqs)| sinusoid_rss(ch, freqs))
                .sum())
        })
        .collect()
}

/// The domain whose inverse rendering best fits the content model; ties go to
/// the lowest label index.
pub fn oracle_classify(track: &ExpressionTrack, spec: &DomainSpec) -> Result<EmotionLabel> {
    let res = oracle_residuals(track, spec)?;
    let mut best = 0;
    for (y, &r) in res.iter().enumerate() {
        if r < res[best] {
            best = y;
        }
    }
    EmotionLabel::from_index(best)
}
