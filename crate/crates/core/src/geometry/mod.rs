//! Image-side support for compositing a re-rendered face back into its frame:
//! landmark alignment, resampling, pyramid blending, soft masks and mean-face colour coding.

mod align;
mod raster;
mod mask;
mod nmfc;
mod pyramid;

pub use align::{
    estimate_similarity, estimate_similarity_points, smooth_landmarks, warp, Landmarks68, SimilarityTransform2D,
    NUM_LANDMARKS,
};
pub use raster::{ImageBuffer, MaskBuffer, Raster};
pub use mask::{erode, erode_soft, gaussian_blur, DEFAULT_ERODE_RADIUS};
pub use nmfc::{nmfc_colorize, MeshVertices};
pub use pyramid::{
    blur, build_pyramids, collapse, default_levels, downsample, gaussian_pyramid, max_levels, multiband_blend, upsample,
    Pyramids, KERNEL,
};
