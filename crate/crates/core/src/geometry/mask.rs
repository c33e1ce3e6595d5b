use super::raster::MaskBuffer;
use crate::error::{invalid, Result};

/// Default erosion radius in pixels, sized for 256×256 face crops.
pub const DEFAULT_ERODE_RADIUS: f64 = 8.0;

/// Grayscale erosion with a disk of `radius` pixels; neighbours outside the mask are ignored.
pub fn erode(mask: &MaskBuffer, radius: f64) -> Result<MaskBuffer> {
    check(mask, radius)?;
    let r = radius.floor() as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= radius * radius)
        .collect();
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    MaskBuffer::from_fn(mask.width(), mask.height(), 1, |x, y, _| {
        offsets
            .iter()
            .filter_map(|&(dx, dy)| {
                let (u, v) = (x as isize + dx, y as isize + dy);
                (u >= 0 && v >= 0 && u < w && v < h).then(|| mask.get(u as usize, v as usize, 0))
            })
            .fold(f32::INFINITY, f32::min)
    })
}

/// Normalized Gaussian kernel truncated at `3σ`.
fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let half = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-half..=half).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| (v / total) as f32).collect()
}

/// Separable Gaussian blur with edge clamping.
pub fn gaussian_blur(mask: &MaskBuffer, sigma: f64) -> Result<MaskBuffer> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid!("blur sigma must be positive, got {sigma}"));
    }
    let k = gaussian_kernel(sigma);
    let half = (k.len() / 2) as isize;
    let (w, h, ch) = (mask.width(), mask.height(), mask.channels());
    let pass = |src: &MaskBuffer, horizontal: bool| {
        MaskBuffer::from_fn(w, h, ch, |x, y, c| {
            let last = if horizontal { w - 1 } else { h - 1 } as isize;
            let pos = if horizontal { x } else { y } as isize;
            k.iter()
                .enumerate()
                .map(|(i, wk)| {
                    let q = (pos + i as isize - half).clamp(0, last) as usize;
                    wk * if horizontal { src.get(q, y, c) } else { src.get(x, q, c) }
                })
                .sum()
        })
    };
    pass(&pass(mask, true)?, false)
}

/// Disk erosion of `radius` pixels followed by a Gaussian blur with `σ = radius / 2`.
/// A zero radius returns the mask unchanged.
pub fn erode_soft(mask: &MaskBuffer, radius: f64) -> Result<MaskBuffer> {
    check(mask, radius)?;
    if radius == 0.0 {
        return Ok(mask.clone());
    }
    gaussian_blur(&erode(mask, radius)?, radius / 2.0)
}

fn check(mask: &MaskBuffer, radius: f64) -> Result<()> {
    if mask.channels() != 1 {
        return Err(invalid!("masks have one channel, got {}", mask.channels()));
    }
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(invalid!("erosion radius must be non-negative, got {radius}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(size: usize, r: f64) -> MaskBuffer {
        let c = (size as f64 - 1.0) / 2.0;
        MaskBuffer::from_fn(size, size, 1, |x, y, _| {
            let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            if d <= r {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_radius_is_identity() {
        let m = disk(21, 6.0);
        assert_eq!(erode_soft(&m, 0.0).unwrap(), m);
        assert!(erode_soft(&m, -1.0).is_err());
    }

    #[test]
    fn ones_stay_ones() {
        let m = MaskBuffer::filled(30, 20, 1, 1.0).unwrap();
        let out = erode_soft(&m, 4.0).unwrap();
        assert!(out.data().iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn erosion_shrinks_disk_support() {
        let out = erode(&disk(61, 20.0), 6.0).unwrap();
        let area = out.data().iter().filter(|&&v| v > 0.5).count() as f64;
        let radius = (area / std::f64::consts::PI).sqrt();
        assert!((radius - 14.0).abs() < 1.0, "support radius {radius}");
    }

    #[test]
    fn blur_preserves_mass_in_interior() {
        let mut m = MaskBuffer::filled(41, 41, 1, 0.0).unwrap();
        m.set(20, 20, 0, 1.0);
        let out = gaussian_blur(&m, 2.0).unwrap();
        let total: f32 = out.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-5);
        assert!(out.get(20, 20, 0) > out.get(22, 20, 0));
    }
}
