//! Tensor storage, keyed randomness, and the image-space primitives shared
//! by every other module.

mod filter;
mod interp;
mod mask;
mod rng;
mod tensor;

pub use filter::{gaussian_blur_5x5, gaussian_kernel_5x5};
pub use interp::{bicubic_upsample, cubic_kernel, source_coord, CubicConfig};
pub use mask::{
    apply_deletion, bounding_box, fraction_count, mask_from_ranking, percentile,
    percentile_threshold_mask, rank_pixels, top_fraction_mask, BoundingBox, PercentileMethod,
    PixelMask,
};
pub use rng::Rng;
pub use tensor::Tensor;
