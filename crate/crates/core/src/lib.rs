//! Block modulated imaging.
//!
//! An image is multiplied by a binary photomask, cut into `N = rows × cols`
//! equal blocks, and the blocks are summed into one block-sized
//! measurement. Decoding inverts that with plug-and-play iterations that
//! alternate an exact data-consistency projection (cheap, because the
//! sensing operator's Gram matrix is diagonal) with a denoiser.
//!
//! - [`mask`]: deterministic mask generation and coverage
//! - [`encoder`]: modulation, block summation, throughput benchmark
//! - [`operator`]: the sensing operator, its adjoint and the projection
//! - [`solvers`]: GAP and ADMM loops and the TV denoiser
//! - [`metrics`]: PSNR and SSIM
//! - [`io`]: PGM/PPM, raw float, `BMIM` and `BMIK` files

pub mod encoder;
pub mod error;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod operator;
pub mod solvers;
pub mod types;

pub use error::{BmiError, Result};
pub use operator::{SensingOperator, ZeroCoverage};
pub use types::{validate_pair, BlockGrid, Cube, Image, Mask, MaskProvenance, Measurement, ReconState};
