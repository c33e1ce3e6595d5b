//! Training losses.
//!
//! Each loss exists twice: a plain function over slices (used for reporting,
//! metrics and tests) and a batched graph builder on the autodiff [`Tape`]
//! (used for training). The batch expectation is the mean over rows; the L1
//! norms are sums over vector entries.

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{invalid, Result};
use crate::sequence::{ExpressionSequence, JAW};

/// Below this product of standard deviations a correlation is reported as 0.
pub const PCC_DEGENERATE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub sty: f32,
    pub cyc: f32,
    pub mouth: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            sty: 1.0,
            cyc: 1.0,
            mouth: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.sty, self.cyc, self.mouth].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid!("loss weights must be finite and non-negative: {self:?}"));
        }
        Ok(())
    }
}

/// Loss values of one update step.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct LossReport {
    pub adv_d: f32,
    pub adv_g: f32,
    pub sty: f32,
    pub cyc: f32,
    pub mouth: f32,
    pub total_gem: f32,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.adv_d, self.adv_g, self.sty, self.cyc, self.mouth, self.total_gem]
            .iter()
            .all(|v| v.is_finite())
    }

    /// One training-log row: `step,adv_d,adv_g,sty,cyc,mouth,total`.
    pub fn csv_row(&self, step: u64) -> String {
        format!(
            "{step},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.adv_d, self.adv_g, self.sty, self.cyc, self.mouth, self.total_gem
        )
    }
}

pub const LOG_HEADER: &str = "step,adv_d,adv_g,sty,cyc,mouth,total";

fn mean(v: impl Iterator<Item = f32>) -> f32 {
    let (s, n) = v.fold((0.0f64, 0usize), |(s, n), x| (s + x as f64, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64) as f32
    }
}

/// Least-squares discriminator loss with real target 1 and fake target 0.
pub fn adv_loss_d(real_scores: &[f32], fake_scores: &[f32]) -> f32 {
    0.5 * mean(real_scores.iter().map(|r| (r - 1.0).powi(2))) + 0.5 * mean(fake_scores.iter().map(|f| f * f))
}

/// Least-squares translator loss: fakes should score 1.
pub fn adv_loss_g(fake_scores: &[f32]) -> f32 {
    0.5 * mean(fake_scores.iter().map(|f| (f - 1.0).powi(2)))
}

fn l1(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(invalid!("L1 distance of lengths {} and {}", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() as f32)
}

/// `‖d_target − d_recovered‖₁`.
pub fn style_recon_loss(d_target: &[f32], d_recovered: &[f32]) -> Result<f32> {
    l1(d_target, d_recovered)
}

/// L1 distance over every entry of two sequences.
pub fn cycle_loss(s: &ExpressionSequence, s_cycled: &ExpressionSequence) -> Result<f32> {
    l1(s.data(), s_cycled.data())
}

/// Pearson correlation with arithmetic means over the series. Degenerate
/// (near-constant) series give 0.
pub fn pcc(x: &[f32], y: &[f32]) -> Result<f32> {
    if x.len() != y.len() {
        return Err(invalid!("correlation of series with lengths {} and {}", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(invalid!("correlation needs at least 2 samples, got {}", x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().map(|&v| v as f64).sum::<f64>() / n;
    let my = y.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a as f64 - mx, b as f64 - my);
        cov += a * b;
        vx += a * a;
        vy += b * b;
    }
    let denom = (vx / n).sqrt() * (vy / n).sqrt();
    if denom < PCC_DEGENERATE {
        return Ok(0.0);
    }
    Ok(((cov / n) / denom).clamp(-1.0, 1.0) as f32)
}

/// Negative sum of the input/translated and translated/cycled jaw correlations.
pub fn speech_loss(jaw_in: &[f32], jaw_translated: &[f32], jaw_cycled: &[f32]) -> Result<f32> {
    Ok(-(pcc(jaw_in, jaw_translated)? + pcc(jaw_translated, jaw_cycled)?))
}

/// Individual translator-side loss terms before weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GemParts {
    pub adv_g: f32,
    pub sty: f32,
    pub cyc: f32,
    pub mouth: f32,
}

/// Objective of the translator, style encoder and mapping network.
pub fn total_gem_loss(parts: GemParts, w: &LossWeights) -> f32 {
    parts.adv_g + w.sty * parts.sty + w.cyc * parts.cyc + w.mouth * parts.mouth
}

// ---- batched graph versions ----

fn scalar_const(tape: &mut Tape, like: NodeId, value: f32) -> NodeId {
    let dims = tape.value(like).dims().to_vec();
    tape.constant(Tensor::filled(&dims, value))
}

/// `½·mean((real − 1)²) + ½·mean(fake²)` on score columns.
pub fn adv_loss_d_node(tape: &mut Tape, real: NodeId, fake: NodeId) -> Result<NodeId> {
    let one = scalar_const(tape, real, 1.0);
    let r = tape.sub(real, one)?;
    let r = tape.square(r)?;
    let r = tape.mean_all(r)?;
    let f = tape.square(fake)?;
    let f = tape.mean_all(f)?;
    let sum = tape.add(r, f)?;
    tape.scale(sum, 0.5)
}

pub fn adv_loss_g_node(tape: &mut Tape, fake: NodeId) -> Result<NodeId> {
    let one = scalar_const(tape, fake, 1.0);
    let f = tape.sub(fake, one)?;
    let f = tape.square(f)?;
    let f = tape.mean_all(f)?;
    tape.scale(f, 0.5)
}

/// Batch mean of row-wise L1 distances between two `[B, k]` nodes.
pub fn l1_rows_node(tape: &mut Tape, a: NodeId, b: NodeId) -> Result<NodeId> {
    let batch = tape.value(a).rows() as f32;
    let d = tape.sub(a, b)?;
    let d = tape.abs(d)?;
    let s = tape.sum_all(d)?;
    tape.scale(s, 1.0 / batch)
}

/// Batch mean of the L1 distance between two step lists (each step `[B, 51]`).
pub fn cycle_loss_node(tape: &mut Tape, a: &[NodeId], b: &[NodeId]) -> Result<NodeId> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid!("cycle loss over {} and {} steps", a.len(), b.len()));
    }
    let mut total = None;
    for (&x, &y) in a.iter().zip(b) {
        let d = tape.sub(x, y)?;
        let d = tape.abs(d)?;
        let s = tape.sum_all(d)?;
        total = Some(match total {
            None => s,
            Some(t) => tape.add(t, s)?,
        });
    }
    let batch = tape.value(a[0]).rows() as f32;
    tape.scale(total.unwrap(), 1.0 / batch)
}

/// `[B, N]` jaw series gathered from per-step `[B, 51]` nodes.
pub fn jaw_series_node(tape: &mut Tape, steps: &[NodeId]) -> Result<NodeId> {
    let cols: Vec<NodeId> = steps
        .iter()
        .map(|&s| tape.slice(s, JAW, JAW + 1))
        .collect::<Result<_>>()?;
    tape.concat(&cols)
}

fn row_mean(tape: &mut Tape, x: NodeId, ones_col: NodeId, n: usize) -> Result<NodeId> {
    let s = tape.matmul(x, ones_col)?;
    tape.scale(s, 1.0 / n as f32)
}

/// Row-wise Pearson correlation of two `[B, N]` nodes → `[B, 1]`.
///
/// Rows whose standard-deviation product falls below the degeneracy threshold
/// are masked to 0 with zero gradient.
pub fn pcc_rows_node(tape: &mut Tape, x: NodeId, y: NodeId) -> Result<NodeId> {
    let (rows, n) = (tape.value(x).rows(), tape.value(x).cols());
    if tape.value(y).dims() != tape.value(x).dims() {
        return Err(invalid!("correlation of {:?} and {:?}", tape.value(x).dims(), tape.value(y).dims()));
    }
    let ones_col = tape.constant(Tensor::filled(&[n, 1], 1.0));
    let ones_row = tape.constant(Tensor::filled(&[1, n], 1.0));
    let mx = row_mean(tape, x, ones_col, n)?;
    let my = row_mean(tape, y, ones_col, n)?;
    let mx = tape.matmul(mx, ones_row)?;
    let my = tape.matmul(my, ones_row)?;
    let xc = tape.sub(x, mx)?;
    let yc = tape.sub(y, my)?;
    let xy = tape.mul(xc, yc)?;
    let cov = row_mean(tape, xy, ones_col, n)?;
    let xx = tape.square(xc)?;
    let vx = row_mean(tape, xx, ones_col, n)?;
    let yy = tape.square(yc)?;
    let vy = row_mean(tape, yy, ones_col, n)?;
    let prod = tape.mul(vx, vy)?;

    let keep: Vec<f32> = tape
        .value(prod)
        .data()
        .iter()
        .map(|&p| if (p as f64).sqrt() < PCC_DEGENERATE { 0.0 } else { 1.0 })
        .collect();
    let pad: Vec<f32> = keep.iter().map(|k| 1.0 - k).collect();
    let keep = tape.constant(Tensor::matrix(rows, 1, keep)?);
    let pad = tape.constant(Tensor::matrix(rows, 1, pad)?);
    let safe = tape.add(prod, pad)?;
    let denom = tape.sqrt(safe)?;
    let num = tape.mul(cov, keep)?;
    tape.div(num, denom)
}

/// `−mean_b(pcc(in, tr) + pcc(tr, cyc))` on `[B, N]` jaw series.
pub fn speech_loss_node(tape: &mut Tape, jaw_in: NodeId, jaw_tr: NodeId, jaw_cyc: NodeId) -> Result<NodeId> {
    let a = pcc_rows_node(tape, jaw_in, jaw_tr)?;
    let b = pcc_rows_node(tape, jaw_tr, jaw_cyc)?;
    let s = tape.add(a, b)?;
    let m = tape.mean_all(s)?;
    tape.scale(m, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::EXPR_DIM;

    #[test]
    fn adversarial_identities() {
        assert_eq!(adv_loss_d(&[1.0], &[0.0]), 0.0);
        assert_eq!(adv_loss_d(&[0.0], &[1.0]), 1.0);
        assert_eq!(adv_loss_d(&[0.5], &[0.5]), 0.25);
        assert_eq!(adv_loss_g(&[1.0]), 0.0);
        assert_eq!(adv_loss_g(&[0.0]), 0.5);
        assert_eq!(adv_loss_g(&[-1.0]), 2.0);
    }

    #[test]
    fn style_l1_sums() {
        let z = [0.0; 16];
        assert_eq!(style_recon_loss(&z, &z).unwrap(), 0.0);
        assert_eq!(style_recon_loss(&z, &[1.0; 16]).unwrap(), 16.0);
        let mut one = [0.0; 16];
        one[5] = 0.5;
        assert_eq!(style_recon_loss(&z, &one).unwrap(), 0.5);
    }

    #[test]
    fn cycle_l1_sums() {
        let a = ExpressionSequence::new(vec![0.2; 10 * EXPR_DIM]).unwrap();
        let b = ExpressionSequence::new(vec![0.21; 10 * EXPR_DIM]).unwrap();
        assert_eq!(cycle_loss(&a, &a).unwrap(), 0.0);
        assert!((cycle_loss(&a, &b).unwrap() - 5.1).abs() < 1e-4);
    }

    #[test]
    fn correlation_cases() {
        assert!((pcc(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-7);
        let x = [0.3, -1.0, 2.5, 0.7];
        let nx: Vec<f32> = x.iter().map(|v| -v).collect();
        assert!((pcc(&x, &nx).unwrap() + 1.0).abs() < 1e-7);
        assert_eq!(pcc(&[2.0; 5], &[1.0, 5.0, 2.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!(pcc(&[1.0, 2.0], &[1.0]).is_err());
        assert!(pcc(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn speech_extremes() {
        let x = [0.1, 0.5, 0.2, 0.9, 0.4];
        assert!((speech_loss(&x, &x, &x).unwrap() + 2.0).abs() < 1e-6);
        let nx: Vec<f32> = x.iter().map(|v| -v).collect();
        assert!((speech_loss(&x, &nx, &x).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn gem_total() {
        let w = LossWeights::default();
        assert_eq!(total_gem_loss(GemParts::default(), &w), 0.0);
        let parts = GemParts {
            adv_g: 0.5,
            sty: 0.2,
            cyc: 0.1,
            mouth: -1.0,
        };
        assert!((total_gem_loss(parts, &w) + 0.2).abs() < 1e-6);
        let zero = LossWeights {
            sty: 0.0,
            cyc: 0.0,
            mouth: 0.0,
        };
        assert_eq!(total_gem_loss(parts, &zero), 0.5);
    }

    #[test]
    fn graph_pcc_matches_plain() {
        let x = [0.3f32, -1.0, 2.5, 0.7, 0.1];
        let y = [1.0f32, 0.2, 2.0, -0.4, 0.9];
        let mut tape = Tape::new();
        let xs = tape.constant(Tensor::from_rows(&[x, [3.0; 5]]).unwrap());
        let ys = tape.constant(Tensor::from_rows(&[y, y]).unwrap());
        let r = pcc_rows_node(&mut tape, xs, ys).unwrap();
        let v = tape.value(r).data();
        assert!((v[0] - pcc(&x, &y).unwrap()).abs() < 1e-6);
        assert_eq!(v[1], 0.0);
    }

    #[test]
    fn graph_losses_match_plain() {
        let real = [0.3f32, 1.2, -0.5];
        let fake = [0.9f32, 0.1, 0.4];
        let mut tape = Tape::new();
        let r = tape.constant(Tensor::matrix(3, 1, real.to_vec()).unwrap());
        let f = tape.constant(Tensor::matrix(3, 1, fake.to_vec()).unwrap());
        let d = adv_loss_d_node(&mut tape, r, f).unwrap();
        let g = adv_loss_g_node(&mut tape, f).unwrap();
        assert!((tape.value(d).item() - adv_loss_d(&real, &fake)).abs() < 1e-6);
        assert!((tape.value(g).item() - adv_loss_g(&fake)).abs() < 1e-6);
    }
}
