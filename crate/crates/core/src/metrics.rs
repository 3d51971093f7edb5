//! PSNR and SSIM for images normalized to `[0, 1]`.
//!
//! SSIM uses the usual defaults: an 11×11 Gaussian window with σ = 1.5
//! (weights normalized to sum 1), K₁ = 0.01, K₂ = 0.03, dynamic range
//! L = 1. The window is applied at every position where it fits entirely
//! inside the image ("valid" filtering, no padding) and the score is the
//! mean of the resulting SSIM map.

use crate::error::{BmiError, Result};
use crate::types::Image;

/// Returned by [`psnr`] for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(BmiError::DimensionMismatch {
            what: "test image",
            got_h: b.height(),
            got_w: b.width(),
            want_h: a.height(),
            want_w: a.width(),
        });
    }
    Ok(())
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    check_shapes(reference, test)?;
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum();
    Ok(sum / reference.data().len() as f64)
}

/// 10·log₁₀(1 / MSE), capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    let mse = mse(reference, test)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable valid-mode filtering with the 1-D kernel `k` along both axes.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for c in 0..ow {
            tmp[r * ow + c] = row[c..c + n].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|i| tmp[(r + i) * ow + c] * k[i]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean structural similarity.
pub fn ssim(reference: &Image, test: &Image) -> Result<f64> {
    check_shapes(reference, test)?;
    let (h, w) = reference.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(BmiError::TooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let k = gaussian_window();
    let x: Vec<f64> = reference.data().iter().map(|&v| f64::from(v)).collect();
    let y: Vec<f64> = test.data().iter().map(|&v| f64::from(v)).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();

    let (mu_x, _, _) = filter_valid(&x, h, w, &k);
    let (mu_y, _, _) = filter_valid(&y, h, w, &k);
    let (e_xx, _, _) = filter_valid(&xx, h, w, &k);
    let (e_yy, _, _) = filter_valid(&yy, h, w, &k);
    let (e_xy, _, _) = filter_valid(&xy, h, w, &k);

    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}
