//! Pixel-distance metrics on images and jaw correlation on expression tracks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{oracle_classify, DomainSpec, GeneratedClip};
use crate::error::{invalid, Result};
use crate::geometry::{ImageBuffer, MaskBuffer};
use crate::inference::{label_style, translate_track, MergeKernel};
use crate::networks::{EmotionLabel, ManipulatorParams};
use crate::objectives::pcc;
use crate::sequence::ExpressionTrack;

/// Side of the square mouth crop used by [`mapd`].
pub const MOUTH_CROP: usize = 72;
/// Mask values at or above this count as foreground.
pub const MASK_THRESHOLD: f32 = 0.5;

fn level(v: f32) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() as f64
}

/// Mean RGB Euclidean distance, in 8-bit levels, over the pixels selected by `keep`.
fn mean_distance(gen: &ImageBuffer, gt: &ImageBuffer, keep: impl Fn(usize, usize) -> bool) -> Result<f64> {
    gen.require_size(gt, "generated and ground-truth images differ")?;
    if gen.channels() != 3 || gt.channels() != 3 {
        return Err(invalid!("pixel distances need RGB images"));
    }
    let (mut total, mut count) = (0.0, 0usize);
    for y in 0..gen.height() {
        for x in 0..gen.width() {
            if !keep(x, y) {
                continue;
            }
            let d2: f64 = gen
                .pixel(x, y)
                .iter()
                .zip(gt.pixel(x, y))
                .map(|(&a, &b)| (level(a) - level(b)).powi(2))
                .sum();
            total += d2.sqrt();
            count += 1;
        }
    }
    if count == 0 {
        return Err(invalid!("no pixels selected"));
    }
    Ok(total / count as f64)
}

/// Face-area pixel distance: mean over mask pixels of `‖rgb_gen − rgb_gt‖₂` on the 0–255 scale.
/// Values are quantized to 8-bit levels first.
pub fn fapd(gen: &ImageBuffer, gt: &ImageBuffer, mask: &MaskBuffer) -> Result<f64> {
    gen.require_size(mask, "mask and image differ")?;
    if mask.channels() != 1 {
        return Err(invalid!("mask must have one channel"));
    }
    if !mask.data().iter().any(|&m| m >= MASK_THRESHOLD) {
        return Err(invalid!("mask has no foreground pixels"));
    }
    mean_distance(gen, gt, |x, y| mask.get(x, y, 0) >= MASK_THRESHOLD)
}

/// Whole-image pixel distance.
pub fn apd(gen: &ImageBuffer, gt: &ImageBuffer) -> Result<f64> {
    mean_distance(gen, gt, |_, _| true)
}

/// Top-left corner and size of the mouth crop along one axis, clamped inside `[0, len)`.
fn crop_span(center: f64, len: usize) -> (usize, usize) {
    let size = MOUTH_CROP.min(len);
    let start = (center - MOUTH_CROP as f64 / 2.0).round().clamp(0.0, (len - size) as f64);
    (start as usize, size)
}

/// Pixel distance restricted to a 72×72 crop centred on the mouth, shifted to stay inside the image.
pub fn mapd(gen: &ImageBuffer, gt: &ImageBuffer, mouth_center: [f64; 2]) -> Result<f64> {
    if !mouth_center.iter().all(|v| v.is_finite()) {
        return Err(invalid!("mouth centre must be finite"));
    }
    let (x0, w) = crop_span(mouth_center[0], gen.width());
    let (y0, h) = crop_span(mouth_center[1], gen.height());
    mean_distance(gen, gt, |x, y| (x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y))
}

/// Correlation of the jaw channel over two whole tracks.
pub fn track_jaw_pcc(input: &ExpressionTrack, output: &ExpressionTrack) -> Result<f64> {
    if input.len() != output.len() {
        return Err(invalid!("tracks have {} and {} frames", input.len(), output.len()));
    }
    Ok(pcc(&input.jaw(), &output.jaw())? as f64)
}

/// Per-frame values of one metric and their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

impl MetricSeries {
    pub fn new(per_frame: Vec<f64>) -> Self {
        let mean = if per_frame.is_empty() {
            0.0
        } else {
            per_frame.iter().sum::<f64>() / per_frame.len() as f64
        };
        Self { per_frame, mean }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Frame identifiers, in the order of every `per_frame` list.
    pub frames: Vec<String>,
    pub metrics: BTreeMap<String, MetricSeries>,
    /// Whole-sequence values with no per-frame breakdown.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aggregate: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn new(frames: Vec<String>) -> Self {
        Self {
            frames,
            ..Self::default()
        }
    }

    pub fn insert(&mut self, name: &str, per_frame: Vec<f64>) -> Result<()> {
        if per_frame.len() != self.frames.len() {
            return Err(invalid!("{name}: {} values for {} frames", per_frame.len(), self.frames.len()));
        }
        self.metrics.insert(name.to_string(), MetricSeries::new(per_frame));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Outcome of translating held-out synthetic clips toward every domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationEval {
    /// Fraction of translations the oracle assigns to their target domain.
    pub accuracy: f64,
    /// Accuracy per target domain, indexed by label.
    pub per_target: Vec<f64>,
    /// Mean whole-clip jaw correlation between input and translation.
    pub mean_jaw_pcc: f64,
    pub translations: usize,
}

/// Translates every clip toward every domain of `spec` with mapping-network styles
/// (latent codes drawn from `seed`) and scores the results with the oracle.
pub fn evaluate_translation(
    params: &ManipulatorParams,
    spec: &DomainSpec,
    clips: &[GeneratedClip],
    seed: u64,
) -> Result<TranslationEval> {
    if clips.is_empty() {
        return Err(invalid!("no clips to evaluate"));
    }
    let kernel = MergeKernel::default_for(params.window)?;
    let domains = spec.domains.len();
    let mut hits = vec![0usize; domains];
    let mut per = vec![0usize; domains];
    let mut jaw = 0.0;
    let mut draw = 0u64;
    for clip in clips {
        for y in 0..domains {
            let target = EmotionLabel::from_index(y)?;
            let style = label_style(params, target, seed.wrapping_add(draw))?;
            draw += 1;
            let out = translate_track(params, &clip.track, &style, &kernel)?;
            per[y] += 1;
            if oracle_classify(&out, spec)? == target {
                hits[y] += 1;
            }
            jaw += track_jaw_pcc(&clip.track, &out)?;
        }
    }
    let n: usize = per.iter().sum();
    Ok(TranslationEval {
        accuracy: hits.iter().sum::<usize>() as f64 / n as f64,
        per_target: hits.iter().zip(&per).map(|(&h, &p)| h as f64 / p as f64).collect(),
        mean_jaw_pcc: jaw / n as f64,
        translations: n,
    })
}
