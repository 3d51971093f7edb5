#![allow(dead_code)]

use bmi_core::{BlockGrid, Image, Mask};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, h: usize, w: usize) -> Image {
    Image::new(h, w, (0..h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, h: usize, w: usize, density: f64) -> Mask {
    Mask::new(h, w, (0..h * w).map(|_| u8::from(rng.random_bool(density))).collect()).unwrap()
}

/// Φ as an explicit (h·w) × (N·h·w) matrix, built straight from the mask
/// geometry: column (i, j) is 1 in row j when block i has its mask bit set
/// at within-block position j.
pub fn dense_phi(mask: &Mask, grid: BlockGrid) -> DMatrix<f64> {
    let (bh, bw) = (mask.height() / grid.rows(), mask.width() / grid.cols());
    let len = bh * bw;
    let mut phi = DMatrix::zeros(len, grid.count() * len);
    for br in 0..grid.rows() {
        for bc in 0..grid.cols() {
            let i = br * grid.cols() + bc;
            for lr in 0..bh {
                for lc in 0..bw {
                    let bit = mask.get(br * bh + lr, bc * bw + lc);
                    let j = lr * bw + lc;
                    phi[(j, i * len + j)] = f64::from(bit);
                }
            }
        }
    }
    phi
}

pub fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/camera_center64.pgm")
}
