use std::path::Path;

use serde::{Deserialize, Serialize};

use super::raster::ImageBuffer;
use crate::error::{invalid, Result};

pub const NUM_LANDMARKS: usize = 68;

/// 68 facial landmarks in pixel coordinates. Serialized as a JSON array of `[x, y]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Landmarks68(Vec<[f64; 2]>);

impl TryFrom<Vec<[f64; 2]>> for Landmarks68 {
    type Error = crate::Error;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<Landmarks68> for Vec<[f64; 2]> {
    fn from(l: Landmarks68) -> Self {
        l.0
    }
}

impl Landmarks68 {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(invalid!("expected {NUM_LANDMARKS} landmarks, got {}", points.len()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid!("landmarks must be finite"));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.0
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    /// Centroid of the mouth points (landmarks 49 to 68 in one-based numbering).
    pub fn mouth_center(&self) -> [f64; 2] {
        let mouth = &self.0[48..];
        let n = mouth.len() as f64;
        let (x, y) = mouth.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [x / n, y / n]
    }

    pub fn transformed(&self, t: &SimilarityTransform2D) -> Self {
        Self(self.0.iter().map(|&p| t.apply(p)).collect())
    }
}

/// `x' = s·R(θ)·x + t` with `s > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform2D {
    pub scale: f64,
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
}

impl SimilarityTransform2D {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        rotation: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(scale: f64, rotation: f64, tx: f64, ty: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || ![rotation, tx, ty].iter().all(|v| v.is_finite()) {
            return Err(invalid!("similarity needs finite values and positive scale"));
        }
        Ok(Self {
            scale,
            rotation,
            tx,
            ty,
        })
    }

    /// Linear part `s·R(θ)` as `[[a, -b], [b, a]]`.
    pub fn linear(&self) -> [[f64; 2]; 2] {
        let (sin, cos) = self.rotation.sin_cos();
        let (a, b) = (self.scale * cos, self.scale * sin);
        [[a, -b], [b, a]]
    }

    pub fn determinant(&self) -> f64 {
        let m = self.linear();
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = self.linear();
        [
            m[0][0] * p[0] + m[0][1] * p[1] + self.tx,
            m[1][0] * p[0] + m[1][1] * p[1] + self.ty,
        ]
    }

    pub fn inverse(&self) -> Self {
        let r = Self {
            scale: 1.0 / self.scale,
            rotation: -self.rotation,
            tx: 0.0,
            ty: 0.0,
        };
        let t = r.apply([self.tx, self.ty]);
        Self {
            tx: -t[0],
            ty: -t[1],
            ..r
        }
    }
}

/// Least-squares similarity (no reflection) taking `src` onto `dst`.
pub fn estimate_similarity(src: &Landmarks68, dst: &Landmarks68) -> Result<SimilarityTransform2D> {
    estimate_similarity_points(src.points(), dst.points())
}

/// [`estimate_similarity`] for any number of paired points.
pub fn estimate_similarity_points(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<SimilarityTransform2D> {
    if src.len() != dst.len() || src.len() < 2 {
        return Err(invalid!("need two equally sized point sets of at least 2 points"));
    }
    let n = src.len() as f64;
    let centroid = |ps: &[[f64; 2]]| {
        let (x, y) = ps.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [x / n, y / n]
    };
    let (cs, cd) = (centroid(src), centroid(dst));
    let (mut a, mut b, mut var_s, mut var_d, mut mag) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, q) in src.iter().zip(dst) {
        let (x0, x1) = (p[0] - cs[0], p[1] - cs[1]);
        let (y0, y1) = (q[0] - cd[0], q[1] - cd[1]);
        a += x0 * y0 + x1 * y1;
        b += x0 * y1 - x1 * y0;
        var_s += x0 * x0 + x1 * x1;
        var_d += y0 * y0 + y1 * y1;
        mag += p[0] * p[0] + p[1] * p[1] + q[0] * q[0] + q[1] * q[1];
    }
    let tiny = 1e-24 * (mag + 1.0);
    if !(var_s > tiny && var_d > tiny) {
        return Err(invalid!("landmark sets have zero spread"));
    }
    let scale = (a * a + b * b).sqrt() / var_s;
    if scale.is_nan() || scale <= 0.0 {
        return Err(invalid!("point sets are uncorrelated; no similarity with positive scale"));
    }
    let rotation = b.atan2(a);
    let mut t = SimilarityTransform2D::new(scale, rotation, 0.0, 0.0)?;
    let moved = t.apply(cs);
    t.tx = cd[0] - moved[0];
    t.ty = cd[1] - moved[1];
    Ok(t)
}

/// Coordinate-wise mean of landmark sets already mapped to a common frame.
pub fn smooth_landmarks(sets: &[Landmarks68]) -> Result<Landmarks68> {
    let first = sets.first().ok_or_else(|| invalid!("no landmark sets to average"))?;
    // Running mean, so identical sets come back bit-for-bit.
    let mut points = first.0.clone();
    for (i, set) in sets.iter().enumerate().skip(1) {
        let k = (i + 1) as f64;
        for (m, p) in points.iter_mut().zip(&set.0) {
            m[0] += (p[0] - m[0]) / k;
            m[1] += (p[1] - m[1]) / k;
        }
    }
    Landmarks68::new(points)
}

/// Resamples `image` so that output pixel `p` shows input point `T⁻¹(p)`.
/// Bilinear interpolation; samples outside the input are black.
pub fn warp(
    image: &ImageBuffer,
    transform: &SimilarityTransform2D,
    out_width: usize,
    out_height: usize,
) -> Result<ImageBuffer> {
    let inv = transform.inverse();
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    const EDGE: f64 = 1e-9;
    let mut out = ImageBuffer::filled(out_width, out_height, ch, 0.0)?;
    for y in 0..out_height {
        for x in 0..out_width {
            let [sx, sy] = inv.apply([x as f64, y as f64]);
            if !(sx >= -EDGE && sy >= -EDGE && sx <= (w - 1) as f64 + EDGE && sy <= (h - 1) as f64 + EDGE) {
                continue;
            }
            let (sx, sy) = (sx.clamp(0.0, (w - 1) as f64), sy.clamp(0.0, (h - 1) as f64));
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            for c in 0..ch {
                let top = image.get(x0, y0, c) as f64 * (1.0 - fx) + image.get(x1, y0, c) as f64 * fx;
                let bottom = image.get(x0, y1, c) as f64 * (1.0 - fx) + image.get(x1, y1, c) as f64 * fx;
                out.set(x, y, c, (top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Ok(out)
}
