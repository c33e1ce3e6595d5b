//! Gaussian and Laplacian pyramids with the 5-tap binomial kernel, and multi-band blending.
//!
//! Level `i + 1` has dims `ceil(w_i / 2) × ceil(h_i / 2)`. All sampling outside a
//! raster is clamped to its edge. Upsampling is zero insertion followed by the
//! same blur scaled by 4; with edge clamping applied on the coarse grid this keeps
//! constant images exactly constant up to rounding.

use super::raster::{ImageBuffer, MaskBuffer, Raster};
use crate::error::{invalid, Result};

pub const KERNEL: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Gaussian and Laplacian pyramids, finest level first.
#[derive(Clone, Debug)]
pub struct Pyramids {
    pub gaussian: Vec<Raster>,
    pub laplacian: Vec<Raster>,
}

/// Largest level count whose coarsest level still satisfies `min(w, h) ≥ 2^(levels-1)`.
pub fn max_levels(width: usize, height: usize) -> usize {
    (usize::BITS - width.min(height).leading_zeros()) as usize
}

/// `floor(log2(min(w, h))) - 2`, at least 3, capped at [`max_levels`].
pub fn default_levels(width: usize, height: usize) -> usize {
    let floor_log2 = max_levels(width, height).saturating_sub(1);
    floor_log2.saturating_sub(2).max(3).min(max_levels(width, height))
}

fn check_levels(img: &Raster, levels: usize) -> Result<()> {
    let max = max_levels(img.width(), img.height());
    if levels == 0 || levels > max {
        return Err(invalid!(
            "{levels} pyramid levels requested; a {}x{} image allows 1..={max}",
            img.width(),
            img.height()
        ));
    }
    Ok(())
}

/// Separable blur along one axis with edge clamping.
fn blur_axis(img: &Raster, horizontal: bool) -> Raster {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let last = if horizontal { w - 1 } else { h - 1 };
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let pos = if horizontal { x } else { y };
            for c in 0..ch {
                let mut acc = 0.0f32;
                for (k, wk) in KERNEL.iter().enumerate() {
                    let q = (pos as isize + k as isize - 2).clamp(0, last as isize) as usize;
                    let v = if horizontal { img.get(q, y, c) } else { img.get(x, q, c) };
                    acc += wk * v;
                }
                out.set(x, y, c, acc);
            }
        }
    }
    out
}

pub fn blur(img: &Raster) -> Raster {
    blur_axis(&blur_axis(img, true), false)
}

/// Blur then keep every second sample.
pub fn downsample(img: &Raster) -> Raster {
    let b = blur(img);
    let (w, h) = (img.width().div_ceil(2), img.height().div_ceil(2));
    Raster::from_fn(w, h, img.channels(), |x, y, c| b.get(2 * x, 2 * y, c)).expect("non-empty")
}

/// 1-D expand of `src` (length `n`) to length `out_len`: zero insertion then
/// binomial blur ×2, coarse indices clamped to `[0, n)`.
fn expand_taps(out_len: usize, n: usize) -> Vec<Vec<(usize, f32)>> {
    (0..out_len)
        .map(|x| {
            let mut taps: Vec<(usize, f32)> = Vec::with_capacity(3);
            for (k, wk) in KERNEL.iter().enumerate() {
                let fine = x as isize + 2 - k as isize;
                if fine.rem_euclid(2) == 0 {
                    let coarse = (fine / 2).clamp(0, n as isize - 1) as usize;
                    taps.push((coarse, 2.0 * wk));
                }
            }
            taps
        })
        .collect()
}

/// Expands `img` to `width × height`, the dims of the next finer level.
pub fn upsample(img: &Raster, width: usize, height: usize) -> Raster {
    let ch = img.channels();
    let tx = expand_taps(width, img.width());
    let ty = expand_taps(height, img.height());
    let rows = Raster::from_fn(width, img.height(), ch, |x, y, c| {
        tx[x].iter().map(|&(q, wq)| wq * img.get(q, y, c)).sum()
    })
    .expect("non-empty");
    Raster::from_fn(width, height, ch, |x, y, c| {
        ty[y].iter().map(|&(q, wq)| wq * rows.get(x, q, c)).sum()
    })
    .expect("non-empty")
}

fn sub(a: &Raster, b: &Raster) -> Raster {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    Raster::new(a.width(), a.height(), a.channels(), data).expect("same dims")
}

fn add(a: &Raster, b: &Raster) -> Raster {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Raster::new(a.width(), a.height(), a.channels(), data).expect("same dims")
}

pub fn gaussian_pyramid(img: &Raster, levels: usize) -> Result<Vec<Raster>> {
    check_levels(img, levels)?;
    let mut g = vec![img.clone()];
    for _ in 1..levels {
        let next = downsample(g.last().unwrap());
        g.push(next);
    }
    Ok(g)
}

pub fn build_pyramids(img: &Raster, levels: usize) -> Result<Pyramids> {
    let gaussian = gaussian_pyramid(img, levels)?;
    let mut laplacian: Vec<Raster> = gaussian
        .windows(2)
        .map(|p| sub(&p[0], &upsample(&p[1], p[0].width(), p[0].height())))
        .collect();
    laplacian.push(gaussian.last().unwrap().clone());
    Ok(Pyramids { gaussian, laplacian })
}

/// Inverse of the Laplacian construction.
pub fn collapse(laplacian: &[Raster]) -> Result<Raster> {
    let mut acc = laplacian.last().ok_or_else(|| invalid!("empty pyramid"))?.clone();
    for level in laplacian.iter().rev().skip(1) {
        acc = add(level, &upsample(&acc, level.width(), level.height()));
    }
    Ok(acc)
}

/// Per-level `G(mask)·L(fg) + (1 − G(mask))·L(bg)`, collapsed and clamped to `[0, 1]`.
pub fn multiband_blend(fg: &ImageBuffer, bg: &ImageBuffer, mask: &MaskBuffer, levels: usize) -> Result<ImageBuffer> {
    fg.require_size(bg, "foreground and background differ")?;
    fg.require_size(mask, "mask and image differ")?;
    if fg.channels() != bg.channels() || mask.channels() != 1 {
        return Err(invalid!("blend needs equal image channels and a 1-channel mask"));
    }
    let lf = build_pyramids(fg, levels)?.laplacian;
    let lb = build_pyramids(bg, levels)?.laplacian;
    let gm = gaussian_pyramid(mask, levels)?;
    let ch = fg.channels();
    let blended: Vec<Raster> = (0..levels)
        .map(|i| {
            let (f, b, m) = (&lf[i], &lb[i], &gm[i]);
            Raster::from_fn(f.width(), f.height(), ch, |x, y, c| {
                let a = m.get(x, y, 0);
                a * f.get(x, y, c) + (1.0 - a) * b.get(x, y, c)
            })
            .expect("non-empty")
        })
        .collect();
    Ok(collapse(&blended)?.clamped())
}
