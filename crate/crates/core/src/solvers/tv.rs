//! Isotropic total-variation denoising with Chambolle's dual projection
//! iteration, applied to each block of a cube independently.
//!
//! For a block `f` and weight `λ` the iteration approximates
//! `argmin_u ½‖u − f‖² + λ·TV(u)`:
//!
//! ```text
//! g   = div p − f/λ
//! p  ← (p + τ∇g) / (1 + τ|∇g|)
//! u   = f − λ div p
//! ```
//!
//! with forward differences for ∇ (zero on the last row/column), `div = −∇ᵀ`,
//! `p⁰ = 0` and step `τ = 0.25`.

use crate::types::Cube;

use super::Denoiser;

pub const TV_STEP: f32 = 0.25;

/// TV denoiser for the solver loop; the solver passes λ as `strength`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TvDenoiser {
    pub inner_iters: usize,
}

impl Denoiser for TvDenoiser {
    fn denoise(&self, cube: &Cube<f32>, strength: f32) -> Cube<f32> {
        tv_denoise(cube, strength, self.inner_iters)
    }
}

pub fn tv_denoise(cube: &Cube<f32>, weight: f32, inner_iters: usize) -> Cube<f32> {
    if weight <= 0.0 || inner_iters == 0 {
        return cube.clone();
    }
    let (n, h, w) = cube.shape();
    let mut out = cube.clone();
    let mut work = Workspace::new(h, w);
    for i in 0..n {
        work.denoise_block(cube.block(i), out.block_mut(i), weight, inner_iters);
    }
    out
}

struct Workspace {
    h: usize,
    w: usize,
    px: Vec<f32>,
    py: Vec<f32>,
    div: Vec<f32>,
    g: Vec<f32>,
}

impl Workspace {
    fn new(h: usize, w: usize) -> Self {
        let len = h * w;
        Self {
            h,
            w,
            px: vec![0.0; len],
            py: vec![0.0; len],
            div: vec![0.0; len],
            g: vec![0.0; len],
        }
    }

    fn denoise_block(&mut self, f: &[f32], out: &mut [f32], weight: f32, iters: usize) {
        self.px.fill(0.0);
        self.py.fill(0.0);
        self.div.fill(0.0);
        let inv = 1.0 / weight;
        let (h, w) = (self.h, self.w);
        for _ in 0..iters {
            for ((g, &d), &fv) in self.g.iter_mut().zip(&self.div).zip(f) {
                *g = d - fv * inv;
            }
            for r in 0..h {
                for c in 0..w {
                    let k = r * w + c;
                    let gx = if c + 1 < w { self.g[k + 1] - self.g[k] } else { 0.0 };
                    let gy = if r + 1 < h { self.g[k + w] - self.g[k] } else { 0.0 };
                    let norm = (gx * gx + gy * gy).sqrt();
                    let denom = 1.0 + TV_STEP * norm;
                    self.px[k] = (self.px[k] + TV_STEP * gx) / denom;
                    self.py[k] = (self.py[k] + TV_STEP * gy) / denom;
                }
            }
            divergence(&self.px, &self.py, h, w, &mut self.div);
        }
        for ((o, &fv), &d) in out.iter_mut().zip(f).zip(&self.div) {
            *o = fv - weight * d;
        }
    }
}

/// div p = −∇ᵀp for the forward-difference gradient above.
fn divergence(px: &[f32], py: &[f32], h: usize, w: usize, out: &mut [f32]) {
    for r in 0..h {
        for c in 0..w {
            let k = r * w + c;
            let mut d = 0.0;
            if c + 1 < w {
                d += px[k];
            }
            if c > 0 {
                d -= px[k - 1];
            }
            if r + 1 < h {
                d += py[k];
            }
            if r > 0 {
                d -= py[k - w];
            }
            out[k] = d;
        }
    }
}

/// Isotropic total variation of one `h × w` block.
pub fn total_variation(block: &[f32], h: usize, w: usize) -> f64 {
    let mut tv = 0.0f64;
    for r in 0..h {
        for c in 0..w {
            let k = r * w + c;
            let gx = if c + 1 < w { block[k + 1] - block[k] } else { 0.0 };
            let gy = if r + 1 < h { block[k + w] - block[k] } else { 0.0 };
            tv += f64::from(gx * gx + gy * gy).sqrt();
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_cube(h: usize, w: usize, f: impl Fn(usize, usize) -> f32) -> Cube<f32> {
        let data = (0..h * w).map(|k| f(k / w, k % w)).collect();
        Cube::from_vec(1, h, w, data).unwrap()
    }

    #[test]
    fn zero_weight_is_identity() {
        let c = block_cube(5, 6, |r, c| ((r * 13 + c * 7) % 11) as f32 / 10.0);
        assert_eq!(tv_denoise(&c, 0.0, 5), c);
    }

    #[test]
    fn constant_block_unchanged() {
        let c = block_cube(7, 4, |_, _| 0.42);
        assert_eq!(tv_denoise(&c, 0.3, 10), c);
    }

    #[test]
    fn impulse_is_flattened_and_mass_kept() {
        let c = block_cube(8, 8, |r, c| if (r, c) == (4, 4) { 1.0 } else { 0.0 });
        let d = tv_denoise(&c, 0.1, 5);
        let peak = d.data()[4 * 8 + 4];
        assert!(peak < 1.0);
        assert!((peak - IMPULSE_PEAK).abs() < 1e-4, "peak {peak}");
        let mass: f32 = d.data().iter().sum();
        assert!((mass - 1.0).abs() < 1e-3);
    }

    // Frozen from the reference implementation in
    // crates/core/tests/oracle/dense_gap_tv.py.
    const IMPULSE_PEAK: f32 = 0.660_354_1;

    #[test]
    fn divergence_is_negative_adjoint_of_gradient() {
        let (h, w) = (4, 5);
        let u: Vec<f32> = (0..h * w).map(|k| ((k * 7) % 5) as f32 - 2.0).collect();
        let px: Vec<f32> = (0..h * w).map(|k| ((k * 3) % 7) as f32 * 0.5).collect();
        let py: Vec<f32> = (0..h * w).map(|k| ((k * 5) % 3) as f32 - 1.0).collect();
        let mut div = vec![0.0; h * w];
        divergence(&px, &py, h, w, &mut div);
        let mut lhs = 0.0;
        for r in 0..h {
            for c in 0..w {
                let k = r * w + c;
                let gx = if c + 1 < w { u[k + 1] - u[k] } else { 0.0 };
                let gy = if r + 1 < h { u[k + w] - u[k] } else { 0.0 };
                lhs += gx * px[k] + gy * py[k];
            }
        }
        let rhs: f32 = -u.iter().zip(&div).map(|(a, b)| a * b).sum::<f32>();
        assert!((lhs - rhs).abs() < 1e-4);
    }
}
