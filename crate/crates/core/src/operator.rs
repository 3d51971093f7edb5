//! The block-diagonal sensing operator Φ = [D₁, …, D_N] with
//! Dᵢ = diag(vec(Mᵢ)), Mᵢ the i-th block of the mask.
//!
//! Φ maps an N×h×w cube to one h×w block. Because every Dᵢ is a diagonal
//! 0/1 matrix, ΦΦᵀ is diagonal with entries equal to the per-position mask
//! coverage, so (ΦΦᵀ + η I)⁻¹ is an elementwise division. Nothing here ever
//! builds an (h·w)×(N·h·w) matrix.

use num_traits::Float;

use crate::error::{BmiError, Result};
use crate::mask::coverage_per_position;
use crate::types::{BlockGrid, Cube, Mask};

/// Floor used for η at unobserved positions in tolerant mode.
pub const TOLERANT_ETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingOperator {
    grid: BlockGrid,
    block_height: usize,
    block_width: usize,
    /// N blocks of 0/1 values, block-major.
    mask_blocks: Vec<u8>,
    gram_diag: Vec<u32>,
}

/// How the projection treats positions no block observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroCoverage {
    /// η = 0 at an unobserved position is an error.
    #[default]
    Strict,
    /// Replace η by `max(η, 1e-6)` at unobserved positions.
    Tolerant,
}

impl SensingOperator {
    /// Operator for a mask the grid divides exactly.
    pub fn new(mask: &Mask, grid: BlockGrid) -> Result<Self> {
        let (bh, bw) = grid.block_shape(mask.height(), mask.width())?;
        let gram_diag = coverage_per_position(mask, grid)?;
        let mut mask_blocks = vec![0u8; grid.count() * bh * bw];
        for r in 0..mask.height() {
            let (br, lr) = (r / bh, r % bh);
            for (c, &bit) in mask.row(r).iter().enumerate() {
                let i = br * grid.cols() + c / bw;
                mask_blocks[(i * bh + lr) * bw + c % bw] = bit;
            }
        }
        Ok(Self {
            grid,
            block_height: bh,
            block_width: bw,
            mask_blocks,
            gram_diag,
        })
    }

    /// Operator for a mask of the original (unpadded) image size; the mask
    /// is extended with zeros to the next multiple of the grid.
    pub fn new_padded(mask: &Mask, grid: BlockGrid) -> Result<Self> {
        let (bh, bw) = grid.padded_block_shape(mask.height(), mask.width());
        let (ph, pw) = (bh * grid.rows(), bw * grid.cols());
        if (ph, pw) == mask.shape() {
            Self::new(mask, grid)
        } else {
            Self::new(&mask.pad_to(ph, pw)?, grid)
        }
    }

    pub fn grid(&self) -> BlockGrid {
        self.grid
    }

    pub fn blocks(&self) -> usize {
        self.grid.count()
    }

    pub fn block_shape(&self) -> (usize, usize) {
        (self.block_height, self.block_width)
    }

    pub fn block_len(&self) -> usize {
        self.block_height * self.block_width
    }

    pub fn cube_shape(&self) -> (usize, usize, usize) {
        (self.blocks(), self.block_height, self.block_width)
    }

    pub fn mask_block(&self, i: usize) -> &[u8] {
        let len = self.block_len();
        &self.mask_blocks[i * len..(i + 1) * len]
    }

    /// Diagonal of ΦΦᵀ.
    pub fn gram_diag(&self) -> &[u32] {
        &self.gram_diag
    }

    fn check_cube<T: Copy + Default>(&self, x: &Cube<T>) -> Result<()> {
        if x.shape() != self.cube_shape() {
            let (n, h, w) = x.shape();
            let (en, eh, ew) = self.cube_shape();
            return Err(BmiError::ShapeMismatch(format!(
                "cube {n}x{h}x{w}, operator expects {en}x{eh}x{ew}"
            )));
        }
        Ok(())
    }

    fn check_block<T>(&self, y: &[T]) -> Result<()> {
        if y.len() != self.block_len() {
            return Err(BmiError::ShapeMismatch(format!(
                "block of {} values, operator expects {}x{}",
                y.len(),
                self.block_height,
                self.block_width
            )));
        }
        Ok(())
    }

    /// (Φx)[j] = Σᵢ Mᵢ[j]·xᵢ[j], summed in block order.
    pub fn forward<T: Float + Default>(&self, x: &Cube<T>) -> Result<Vec<T>> {
        self.check_cube(x)?;
        let mut y = vec![T::zero(); self.block_len()];
        for i in 0..self.blocks() {
            for ((acc, &xv), &m) in y.iter_mut().zip(x.block(i)).zip(self.mask_block(i)) {
                if m == 1 {
                    *acc = *acc + xv;
                }
            }
        }
        Ok(y)
    }

    /// (Φᵀy)ᵢ[j] = Mᵢ[j]·y[j].
    pub fn adjoint<T: Float + Default>(&self, y: &[T]) -> Result<Cube<T>> {
        self.check_block(y)?;
        let (n, h, w) = self.cube_shape();
        let mut out = Cube::zeros(n, h, w);
        for i in 0..n {
            for ((o, &yv), &m) in out.block_mut(i).iter_mut().zip(y).zip(self.mask_block(i)) {
                if m == 1 {
                    *o = yv;
                }
            }
        }
        Ok(out)
    }

    /// y − Φx.
    pub fn residual<T: Float + Default>(&self, x: &Cube<T>, y: &[T]) -> Result<Vec<T>> {
        self.check_block(y)?;
        let fx = self.forward(x)?;
        Ok(y.iter().zip(fx).map(|(&a, b)| a - b).collect())
    }

    /// Per-position weights 1 / (gram + η).
    fn inverse_gram<T: Float>(&self, eta: T, zero: ZeroCoverage) -> Result<Vec<T>> {
        if !(eta >= T::zero()) {
            return Err(BmiError::InvalidParameter {
                field: "eta",
                reason: "must be a non-negative number".into(),
            });
        }
        let floor = T::from(TOLERANT_ETA_FLOOR).unwrap();
        self.gram_diag
            .iter()
            .enumerate()
            .map(|(j, &g)| {
                let mut e = eta;
                if g == 0 {
                    match zero {
                        ZeroCoverage::Strict if eta == T::zero() => {
                            return Err(BmiError::SingularProjection { position: j })
                        }
                        ZeroCoverage::Tolerant => e = e.max(floor),
                        ZeroCoverage::Strict => {}
                    }
                }
                Ok(T::one() / (T::from(g).unwrap() + e))
            })
            .collect()
    }

    /// v = x + Φᵀ(ΦΦᵀ + ηI)⁻¹(y − Φx).
    pub fn project<T: Float + Default>(
        &self,
        x: &Cube<T>,
        y: &[T],
        eta: T,
        zero: ZeroCoverage,
    ) -> Result<Cube<T>> {
        let weights = self.inverse_gram(eta, zero)?;
        let mut corr = self.residual(x, y)?;
        for (c, w) in corr.iter_mut().zip(&weights) {
            *c = *c * *w;
        }
        let mut v = x.clone();
        for i in 0..self.blocks() {
            let m = self.mask_block(i);
            for ((vv, &c), &bit) in v.block_mut(i).iter_mut().zip(&corr).zip(m) {
                if bit == 1 {
                    *vv = *vv + c;
                }
            }
        }
        Ok(v)
    }

    /// Runs one projection on `state`, storing the result in `state.v`.
    pub fn projection_step(
        &self,
        state: &mut crate::types::ReconState,
        y: &[f32],
        eta: f32,
        zero: ZeroCoverage,
    ) -> Result<()> {
        state.v = self.project(&state.x, y, eta, zero)?;
        state.eta = eta;
        Ok(())
    }

    /// x⁽⁰⁾ᵢ[j] = Mᵢ[j]·y[j] / max(gram[j], 1).
    pub fn init_estimate<T: Float + Default>(&self, y: &[T]) -> Result<Cube<T>> {
        self.check_block(y)?;
        let scaled: Vec<T> = y
            .iter()
            .zip(&self.gram_diag)
            .map(|(&v, &g)| v / T::from(g.max(1)).unwrap())
            .collect();
        self.adjoint(&scaled)
    }
}
