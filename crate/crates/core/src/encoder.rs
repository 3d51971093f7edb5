//! Forward encoding: modulate by the mask, cut into blocks, sum the blocks.
//!
//! Blocks are taken in row-major order over the grid. [`BlockAccumulator`]
//! consumes the image one row at a time, so for every within-block position
//! the blocks are accumulated in exactly that order without materializing
//! the modulated image.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{BmiError, Result};
use crate::mask::{self, MaskSpec};
use crate::types::{validate_pair, BlockGrid, Image, Mask, MaskProvenance, Measurement};

/// Z = M ⊙ X.
pub fn modulate(image: &Image, mask: &Mask) -> Result<Image> {
    check_same_shape(image, mask)?;
    let data = image
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&x, &m)| if m == 1 { x } else { 0.0 })
        .collect();
    Image::new(image.height(), image.width(), data)
}

fn check_same_shape(image: &Image, mask: &Mask) -> Result<()> {
    if image.shape() != mask.shape() {
        return Err(BmiError::DimensionMismatch {
            what: "mask",
            got_h: mask.height(),
            got_w: mask.width(),
            want_h: image.height(),
            want_w: image.width(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accumulation {
    /// Plain 32-bit running sums.
    #[default]
    F32,
    /// Running sums in 64-bit, rounded to 32-bit once at the end.
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncodeOptions {
    /// Zero-pad the bottom/right edges when the grid does not divide the image.
    pub pad: bool,
    pub accumulation: Accumulation,
}

/// Row-streaming block summation.
#[derive(Debug)]
pub struct BlockAccumulator {
    grid: BlockGrid,
    width: usize,
    block_height: usize,
    block_width: usize,
    next_row: usize,
    sums: Sums,
}

#[derive(Debug)]
enum Sums {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl BlockAccumulator {
    /// Accumulator for an image `width` pixels wide cut into blocks of
    /// `block_height × block_width`.
    pub fn new(
        grid: BlockGrid,
        width: usize,
        block_height: usize,
        block_width: usize,
        accumulation: Accumulation,
    ) -> Self {
        let len = block_height * block_width;
        let sums = match accumulation {
            Accumulation::F32 => Sums::F32(vec![0.0; len]),
            Accumulation::F64 => Sums::F64(vec![0.0; len]),
        };
        Self {
            grid,
            width,
            block_height,
            block_width,
            next_row: 0,
            sums,
        }
    }

    /// Adds one image row, modulated by the matching mask row.
    pub fn push_row(&mut self, pixels: &[f32], mask: &[u8]) -> Result<()> {
        if pixels.len() != self.width || mask.len() != self.width {
            return Err(BmiError::ShapeMismatch(format!(
                "row of {} pixels / {} mask bits, expected {}",
                pixels.len(),
                mask.len(),
                self.width
            )));
        }
        if self.next_row >= self.block_height * self.grid.rows() {
            return Err(BmiError::ShapeMismatch("too many rows".into()));
        }
        let bw = self.block_width;
        let lr = self.next_row % self.block_height;
        let range = lr * bw..(lr + 1) * bw;
        match &mut self.sums {
            Sums::F32(s) => accumulate_row(&mut s[range], pixels, mask, bw, |x| x),
            Sums::F64(s) => accumulate_row(&mut s[range], pixels, mask, bw, f64::from),
        }
        self.next_row += 1;
        Ok(())
    }

    pub fn rows_seen(&self) -> usize {
        self.next_row
    }

    /// Returns the summed block. Rows never pushed count as zeros.
    pub fn finish(self) -> Vec<f32> {
        match self.sums {
            Sums::F32(s) => s,
            Sums::F64(s) => s.into_iter().map(|v| v as f32).collect(),
        }
    }
}

#[inline]
fn accumulate_row<T: Copy + std::ops::AddAssign>(
    out: &mut [T],
    pixels: &[f32],
    mask: &[u8],
    block_width: usize,
    conv: impl Fn(f32) -> T,
) {
    for (px, mk) in pixels.chunks(block_width).zip(mask.chunks(block_width)) {
        for ((acc, &x), &m) in out.iter_mut().zip(px).zip(mk) {
            if m == 1 {
                *acc += conv(x);
            }
        }
    }
}

/// Encodes `image` under `mask`, recording `provenance` in the result.
pub fn encode_with(
    image: &Image,
    mask: &Mask,
    grid: BlockGrid,
    provenance: MaskProvenance,
    opts: EncodeOptions,
) -> Result<Measurement> {
    let (h, w) = image.shape();
    let (bh, bw) = if opts.pad {
        check_same_shape(image, mask)?;
        grid.padded_block_shape(h, w)
    } else {
        validate_pair(image, mask, grid)?;
        grid.block_shape(h, w)?
    };
    let mut acc = BlockAccumulator::new(grid, bw * grid.cols(), bh, bw, opts.accumulation);
    if bw * grid.cols() == w {
        for r in 0..h {
            acc.push_row(image.row(r), mask.row(r))?;
        }
    } else {
        let padded_w = bw * grid.cols();
        let mut px = vec![0.0f32; padded_w];
        let mut mk = vec![0u8; padded_w];
        for r in 0..h {
            px[..w].copy_from_slice(image.row(r));
            mk[..w].copy_from_slice(mask.row(r));
            acc.push_row(&px, &mk)?;
        }
    }
    Measurement::new(grid, h, w, bh, bw, provenance, acc.finish())
}

/// Encodes with the mask embedded in the measurement.
pub fn encode(image: &Image, mask: &Mask, grid: BlockGrid) -> Result<Measurement> {
    encode_with(
        image,
        mask,
        grid,
        MaskProvenance::Embedded(mask.clone()),
        EncodeOptions::default(),
    )
}

/// Timing statistics for one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub height: usize,
    pub width: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

impl BenchRow {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

pub const BENCH_CSV_HEADER: &str = "resolution,pixels,mean_ms,stddev_ms";

/// Times [`encode_with`] on random images and Bernoulli(0.5) masks.
///
/// Inputs are generated once per resolution from `seed`; each timed run is
/// single-threaded. The first encode of each resolution is an untimed
/// warm-up. `stddev_ms` is the sample standard deviation (0 for one run).
pub fn bench_encode(
    resolutions: &[(usize, usize)],
    grid: BlockGrid,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(BmiError::InvalidParameter {
            field: "repeats",
            reason: "must be at least 1".into(),
        });
    }
    let mut rows = Vec::with_capacity(resolutions.len());
    for (k, &(h, w)) in resolutions.iter().enumerate() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(k as u64));
        let image = Image::new(h, w, (0..h * w).map(|_| rng.random::<f32>()).collect())?;
        let mask = mask::generate(&MaskSpec::new(h, w, mask::DEFAULT_DENSITY, seed))?;
        let prov = MaskProvenance::Seeded {
            seed,
            density: mask::DEFAULT_DENSITY,
        };
        let opts = EncodeOptions::default();
        std::hint::black_box(encode_with(&image, &mask, grid, prov.clone(), opts)?);
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            let m = encode_with(&image, &mask, grid, prov.clone(), opts)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(m);
        }
        let mean = times.iter().sum::<f64>() / repeats as f64;
        let stddev = if repeats > 1 {
            (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
        } else {
            0.0
        };
        rows.push(BenchRow {
            height: h,
            width: w,
            mean_ms: mean,
            stddev_ms: stddev,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{}x{},{},{:.6},{:.6}\n",
            r.height,
            r.width,
            r.pixels(),
            r.mean_ms,
            r.stddev_ms
        ));
    }
    out
}
