//! Expression-level emotion manipulation.
//!
//! A sequence-to-sequence translation GAN over 51-dimensional facial expression
//! vectors (jaw opening plus 50 expression coefficients), trained with
//! least-squares adversarial, style reconstruction, cycle and speech-preserving
//! correlation losses, plus the image-side support procedures used when
//! compositing a re-rendered face: landmark alignment, multi-band blending,
//! mean-face colour coding and pixel-distance metrics.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod metrics;
pub mod networks;
pub mod objectives;
pub mod sequence;
pub mod trainer;

pub use error::{Error, Result};
