//! Shared domain types: images, masks, block grids, measurements and the
//! N×h×w data cube the decoders operate on.

use std::fmt;
use std::str::FromStr;

use crate::error::{BmiError, Result};

/// Single-channel image with row-major intensities.
///
/// Values loaded from files are normalized to `[0, 1]`; values produced
/// in memory (solver iterates, linear combinations) may leave that range.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(BmiError::ZeroArea { height, width });
        }
        if data.len() != height * width {
            return Err(BmiError::ShapeMismatch(format!(
                "image data has {} values, expected {}x{}",
                data.len(),
                height,
                width
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0.0; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.width..(row + 1) * self.width]
    }

    /// True when every value lies in `[0, 1]`.
    pub fn is_normalized(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Binary photomask. A 1 lets light through, a 0 blocks it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<u8>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(BmiError::ZeroArea { height, width });
        }
        if bits.len() != height * width {
            return Err(BmiError::ShapeMismatch(format!(
                "mask has {} bits, expected {}x{}",
                bits.len(),
                height,
                width
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(BmiError::InvariantViolation {
                field: "mask",
                reason: format!("bit {pos} has value {}", bits[pos]),
            });
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![1; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.bits[row * self.width..(row + 1) * self.width]
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Extends the mask with opaque (0) pixels on the bottom and right edges.
    pub fn pad_to(&self, height: usize, width: usize) -> Result<Mask> {
        if height < self.height || width < self.width {
            return Err(BmiError::DimensionMismatch {
                what: "padded mask",
                got_h: height,
                got_w: width,
                want_h: self.height,
                want_w: self.width,
            });
        }
        let mut bits = vec![0u8; height * width];
        for r in 0..self.height {
            bits[r * width..r * width + self.width].copy_from_slice(self.row(r));
        }
        Mask::new(height, width, bits)
    }
}

/// Partition of an image into `rows × cols` equal blocks. The block count
/// `N = rows × cols` is the compression ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockGrid {
    rows: usize,
    cols: usize,
}

impl BlockGrid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > u16::MAX as usize || cols > u16::MAX as usize {
            return Err(BmiError::InvalidGrid { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of blocks, i.e. the compression ratio.
    pub fn count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn divides(&self, height: usize, width: usize) -> bool {
        height.is_multiple_of(self.rows) && width.is_multiple_of(self.cols)
    }

    /// Block shape for an image the grid divides exactly.
    pub fn block_shape(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if !self.divides(height, width) {
            return Err(BmiError::IndivisibleGrid {
                height,
                width,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok((height / self.rows, width / self.cols))
    }

    /// Block shape after zero-padding the bottom and right edges up to the
    /// next multiple of the grid.
    pub fn padded_block_shape(&self, height: usize, width: usize) -> (usize, usize) {
        (height.div_ceil(self.rows), width.div_ceil(self.cols))
    }
}

impl fmt::Display for BlockGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for BlockGrid {
    type Err = BmiError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || BmiError::InvalidParameter {
            field: "grid",
            reason: format!("expected RxC, got {s:?}"),
        };
        let (r, c) = s
            .trim()
            .split_once(['x', 'X'])
            .ok_or_else(bad)?;
        let rows = r.trim().parse().map_err(|_| bad())?;
        let cols = c.trim().parse().map_err(|_| bad())?;
        BlockGrid::new(rows, cols)
    }
}

/// Checks that `image` and `mask` agree in shape and that `grid` divides it.
/// Depends on shapes only.
pub fn validate_pair(image: &Image, mask: &Mask, grid: BlockGrid) -> Result<()> {
    if image.shape() != mask.shape() {
        return Err(BmiError::DimensionMismatch {
            what: "mask",
            got_h: mask.height(),
            got_w: mask.width(),
            want_h: image.height(),
            want_w: image.width(),
        });
    }
    grid.block_shape(image.height(), image.width()).map(|_| ())
}

/// Where the decoder gets the mask from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskProvenance {
    /// Regenerate with the pinned PRNG at the original image size.
    Seeded { seed: u64, density: f32 },
    /// Mask travels with the measurement.
    Embedded(Mask),
}

/// The compressed representation: one summed block plus what is needed to
/// undo the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    grid: BlockGrid,
    original_height: usize,
    original_width: usize,
    block_height: usize,
    block_width: usize,
    mask: MaskProvenance,
    data: Vec<f32>,
}

impl Measurement {
    pub fn new(
        grid: BlockGrid,
        original_height: usize,
        original_width: usize,
        block_height: usize,
        block_width: usize,
        mask: MaskProvenance,
        data: Vec<f32>,
    ) -> Result<Self> {
        if original_height == 0 || original_width == 0 {
            return Err(BmiError::ZeroArea {
                height: original_height,
                width: original_width,
            });
        }
        let (bh, bw) = grid.padded_block_shape(original_height, original_width);
        if (block_height, block_width) != (bh, bw) {
            return Err(BmiError::InvariantViolation {
                field: "block_shape",
                reason: format!(
                    "block {block_height}x{block_width} with grid {grid} does not tile \
                     {original_height}x{original_width} (expected {bh}x{bw})"
                ),
            });
        }
        if data.len() != block_height * block_width {
            return Err(BmiError::InvariantViolation {
                field: "data",
                reason: format!(
                    "{} values for a {block_height}x{block_width} block",
                    data.len()
                ),
            });
        }
        if let MaskProvenance::Embedded(m) = &mask {
            if m.shape() != (original_height, original_width) {
                return Err(BmiError::InvariantViolation {
                    field: "mask",
                    reason: format!(
                        "embedded mask is {}x{}, image is {original_height}x{original_width}",
                        m.height(),
                        m.width()
                    ),
                });
            }
        }
        Ok(Self {
            grid,
            original_height,
            original_width,
            block_height,
            block_width,
            mask,
            data,
        })
    }

    pub fn grid(&self) -> BlockGrid {
        self.grid
    }

    pub fn original_shape(&self) -> (usize, usize) {
        (self.original_height, self.original_width)
    }

    pub fn block_shape(&self) -> (usize, usize) {
        (self.block_height, self.block_width)
    }

    pub fn padded_shape(&self) -> (usize, usize) {
        (
            self.block_height * self.grid.rows(),
            self.block_width * self.grid.cols(),
        )
    }

    pub fn is_padded(&self) -> bool {
        self.padded_shape() != self.original_shape()
    }

    pub fn mask_provenance(&self) -> &MaskProvenance {
        &self.mask
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Checks `0 <= y <= N` for every value, which holds for any encoding
    /// of a normalized image.
    pub fn check_range(&self) -> Result<()> {
        let n = self.grid.count() as f32;
        match self
            .data
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0 && *v <= n))
        {
            None => Ok(()),
            Some(pos) => Err(BmiError::InvariantViolation {
                field: "data",
                reason: format!(
                    "value {} at position {pos} outside [0, {n}]",
                    self.data[pos]
                ),
            }),
        }
    }
}

/// Stack of `n` blocks of `h × w` values, block-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube<T = f32> {
    n: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Cube<T> {
    pub fn zeros(n: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            h,
            w,
            data: vec![T::default(); n * h * w],
        }
    }

    pub fn from_vec(n: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * h * w {
            return Err(BmiError::ShapeMismatch(format!(
                "cube data has {} values, expected {n}x{h}x{w}",
                data.len()
            )));
        }
        Ok(Self { n, h, w, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n, self.h, self.w)
    }

    pub fn blocks(&self) -> usize {
        self.n
    }

    pub fn block_len(&self) -> usize {
        self.h * self.w
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn block(&self, i: usize) -> &[T] {
        let len = self.block_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [T] {
        let len = self.block_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> Cube<U> {
        Cube {
            n: self.n,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl Cube<f32> {
    /// Cuts an image into the blocks of `grid`, in row-major block order.
    /// Pixels past the image edge (when the grid does not divide it) are 0.
    pub fn from_image(image: &Image, grid: BlockGrid) -> Cube<f32> {
        let (bh, bw) = grid.padded_block_shape(image.height(), image.width());
        let mut cube = Cube::zeros(grid.count(), bh, bw);
        for r in 0..image.height() {
            let (br, lr) = (r / bh, r % bh);
            for (c, &v) in image.row(r).iter().enumerate() {
                let (bc, lc) = (c / bw, c % bw);
                let i = br * grid.cols() + bc;
                cube.data[(i * bh + lr) * bw + lc] = v;
            }
        }
        cube
    }

    /// Inverse of [`Cube::from_image`], cropping to `height × width`.
    pub fn assemble(&self, grid: BlockGrid, height: usize, width: usize) -> Result<Image> {
        let (bh, bw) = grid.padded_block_shape(height, width);
        if (self.n, self.h, self.w) != (grid.count(), bh, bw) {
            return Err(BmiError::ShapeMismatch(format!(
                "cube {}x{}x{} cannot be assembled into {height}x{width} with grid {grid}",
                self.n, self.h, self.w
            )));
        }
        Image::from_fn(height, width, |r, c| {
            let i = (r / bh) * grid.cols() + c / bw;
            self.data[(i * bh + r % bh) * bw + c % bw]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Mutable state of an iterative reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconState {
    /// Current estimate x⁽ᵏ⁾.
    pub x: Cube<f32>,
    /// Auxiliary variable v⁽ᵏ⁾ produced by the projection.
    pub v: Cube<f32>,
    pub stage: usize,
    pub eta: f32,
    /// ‖y − Φx‖₂ for the current estimate.
    pub residual_norm: f64,
}

impl ReconState {
    pub fn new(x: Cube<f32>) -> Self {
        Self {
            v: x.clone(),
            x,
            stage: 0,
            eta: 0.0,
            residual_norm: f64::NAN,
        }
    }
}
