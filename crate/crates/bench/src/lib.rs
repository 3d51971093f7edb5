//! Shared inputs for the benchmarks.

use bmi_core::mask::{generate, MaskSpec};
use bmi_core::{Image, Mask};

/// Deterministic textured image and seeded half-density mask.
pub fn scene(height: usize, width: usize, seed: u64) -> (Image, Mask) {
    let image = Image::from_fn(height, width, |r, c| {
        let v = ((r * 31 + c * 17) ^ (r * c)) % 251;
        v as f32 / 250.0
    })
    .expect("nonzero size");
    let mask = generate(&MaskSpec::new(height, width, 0.5, seed)).expect("valid spec");
    (image, mask)
}
