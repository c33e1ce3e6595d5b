//! Expression vectors, sequences and style codes.

use crate::error::{invalid, Result};

/// Jaw opening followed by the 50 expression coefficients.
pub const EXPR_DIM: usize = 51;
pub const STYLE_DIM: usize = 16;
pub const LATENT_DIM: usize = 4;
/// Default window length consumed by the networks.
pub const DEFAULT_WINDOW: usize = 10;
/// Column holding the jaw opening.
pub const JAW: usize = 0;

/// Temporally ordered expression vectors stored row-major (`len × 51`).
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionTrack {
    data: Vec<f32>,
}

/// A fixed-length window of a track; the unit the networks consume.
pub type ExpressionSequence = ExpressionTrack;

impl ExpressionTrack {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if data.is_empty() || !data.len().is_multiple_of(EXPR_DIM) {
            return Err(invalid!(
                "expression data length {} is not a positive multiple of {EXPR_DIM}",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid!("non-finite value at frame {}", i / EXPR_DIM));
        }
        Ok(Self { data })
    }

    pub fn from_frames<F: AsRef<[f32]>>(frames: &[F]) -> Result<Self> {
        let mut data = Vec::with_capacity(frames.len() * EXPR_DIM);
        for (t, f) in frames.iter().enumerate() {
            let f = f.as_ref();
            if f.len() != EXPR_DIM {
                return Err(invalid!("frame {t} has {} values, expected {EXPR_DIM}", f.len()));
            }
            data.extend_from_slice(f);
        }
        Self::new(data)
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.data.len() / EXPR_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * EXPR_DIM..(t + 1) * EXPR_DIM]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(EXPR_DIM)
    }

    /// Frames `start..start + n`.
    pub fn window(&self, start: usize, n: usize) -> Result<ExpressionSequence> {
        if n == 0 || start + n > self.len() {
            return Err(invalid!("window {start}..{} outside track of {} frames", start + n, self.len()));
        }
        Ok(Self {
            data: self.data[start * EXPR_DIM..(start + n) * EXPR_DIM].to_vec(),
        })
    }

    /// All stride-1 windows of length `n`.
    pub fn windows(&self, n: usize) -> Result<Vec<ExpressionSequence>> {
        if n == 0 || self.len() < n {
            return Err(invalid!("track of {} frames is shorter than the window length {n}", self.len()));
        }
        (0..=self.len() - n).map(|s| self.window(s, n)).collect()
    }

    /// The jaw-opening channel over time.
    pub fn jaw(&self) -> Vec<f32> {
        self.frames().map(|f| f[JAW]).collect()
    }
}

/// A 16-dimensional speaking-style code.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StyleVector(pub [f32; STYLE_DIM]);

impl StyleVector {
    pub fn from_slice(v: &[f32]) -> Result<Self> {
        let arr: [f32; STYLE_DIM] = v
            .try_into()
            .map_err(|_| invalid!("style vector needs {STYLE_DIM} values, got {}", v.len()))?;
        if arr.iter().any(|x| !x.is_finite()) {
            return Err(invalid!("style vector contains non-finite values"));
        }
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}
