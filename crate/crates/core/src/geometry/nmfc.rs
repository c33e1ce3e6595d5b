use crate::error::{invalid, Result};

/// A posed face mesh and the mean-face mesh with the same vertex order.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshVertices {
    pub posed: Vec<[f64; 3]>,
    pub mean: Vec<[f64; 3]>,
}

impl MeshVertices {
    pub fn new(posed: Vec<[f64; 3]>, mean: Vec<[f64; 3]>) -> Result<Self> {
        if posed.len() != mean.len() {
            return Err(invalid!("{} posed vertices but {} mean vertices", posed.len(), mean.len()));
        }
        if posed.iter().chain(&mean).flatten().any(|v| !v.is_finite()) {
            return Err(invalid!("mesh vertices must be finite"));
        }
        Ok(Self { posed, mean })
    }
}

/// Colour of each vertex: its mean-mesh position rescaled per axis to `[0, 1]`
/// over the mean-mesh bounding box. Independent of the posed mesh.
pub fn nmfc_colorize(mesh: &MeshVertices) -> Result<Vec<[f64; 3]>> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &mesh.mean {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    for a in 0..3 {
        if (hi[a] - lo[a]).is_nan() || hi[a] - lo[a] <= 0.0 {
            return Err(invalid!("mean mesh is flat along axis {a}"));
        }
    }
    Ok(mesh
        .mean
        .iter()
        .map(|p| std::array::from_fn(|a| (p[a] - lo[a]) / (hi[a] - lo[a])))
        .collect())
}
