//! Deterministic photomask generation.
//!
//! Masks are drawn bit by bit in row-major order from xoshiro256++ seeded
//! through SplitMix64 (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`).
//! Each bit takes one 64-bit output `r` and is 1 iff
//! `(r >> 11) as f64 * 2^-53 < density as f64`. The same `(height, width,
//! density, seed)` therefore yields the same bits on every platform. This
//! generator is recorded as PRNG id [`PRNG_XOSHIRO256PP`] in mask files.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{BmiError, Result};
use crate::types::{BlockGrid, Mask};

/// PRNG id for masks that did not come from a generator (hardware, imported).
pub const PRNG_EXTERNAL: u16 = 0;
/// PRNG id for the generator documented at module level.
pub const PRNG_XOSHIRO256PP: u16 = 1;

pub const DEFAULT_DENSITY: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub height: usize,
    pub width: usize,
    /// Target fraction of 1 bits, strictly inside (0, 1).
    pub density: f32,
    pub seed: u64,
}

impl MaskSpec {
    pub fn new(height: usize, width: usize, density: f32, seed: u64) -> Self {
        Self {
            height,
            width,
            density,
            seed,
        }
    }
}

pub fn validate_density(density: f32) -> Result<()> {
    if density > 0.0 && density < 1.0 {
        Ok(())
    } else {
        Err(BmiError::InvalidParameter {
            field: "density",
            reason: format!("{density} is not in (0, 1)"),
        })
    }
}

/// Draws an i.i.d. Bernoulli(`density`) mask.
pub fn generate(spec: &MaskSpec) -> Result<Mask> {
    if spec.height == 0 || spec.width == 0 {
        return Err(BmiError::ZeroArea {
            height: spec.height,
            width: spec.width,
        });
    }
    validate_density(spec.density)?;
    let threshold = f64::from(spec.density);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    let bits = (0..spec.height * spec.width)
        .map(|_| u8::from(unit_f64(rng.next_u64()) < threshold))
        .collect();
    Mask::new(spec.height, spec.width, bits)
}

#[inline]
fn unit_f64(r: u64) -> f64 {
    (r >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// For each within-block position, the number of blocks whose mask bit is
/// set there. This is the diagonal of ΦΦᵀ.
pub fn coverage_per_position(mask: &Mask, grid: BlockGrid) -> Result<Vec<u32>> {
    let (bh, bw) = grid.block_shape(mask.height(), mask.width())?;
    let mut coverage = vec![0u32; bh * bw];
    for r in 0..mask.height() {
        let lr = r % bh;
        let out = &mut coverage[lr * bw..(lr + 1) * bw];
        for (c, &bit) in mask.row(r).iter().enumerate() {
            out[c % bw] += u32::from(bit);
        }
    }
    Ok(coverage)
}
