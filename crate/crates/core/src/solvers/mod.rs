//! Plug-and-play reconstruction: alternate the data-consistency projection
//! with a denoiser, either as GAP or as scaled-form ADMM.

mod tv;

use std::fmt::Write as _;

pub use tv::{total_variation, tv_denoise, TvDenoiser, TV_STEP};

use crate::error::{BmiError, Result};
use crate::operator::{SensingOperator, ZeroCoverage};
use crate::types::{Cube, Image, Measurement, ReconState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Gap,
    Admm,
}

impl std::str::FromStr for Algorithm {
    type Err = BmiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gap" => Ok(Algorithm::Gap),
            "admm" => Ok(Algorithm::Admm),
            _ => Err(BmiError::InvalidParameter {
                field: "algorithm",
                reason: format!("{s:?} is neither gap nor admm"),
            }),
        }
    }
}

/// η per GAP iteration. A list shorter than the run repeats its last value.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaSchedule {
    Constant(f32),
    PerIteration(Vec<f32>),
}

impl EtaSchedule {
    pub fn at(&self, iteration: usize) -> f32 {
        match self {
            EtaSchedule::Constant(e) => *e,
            EtaSchedule::PerIteration(v) => v
                .get(iteration)
                .or(v.last())
                .copied()
                .unwrap_or(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |e: &f32| e.is_finite() && *e >= 0.0;
        let valid = match self {
            EtaSchedule::Constant(e) => ok(e),
            EtaSchedule::PerIteration(v) => !v.is_empty() && v.iter().all(ok),
        };
        if valid {
            Ok(())
        } else {
            Err(BmiError::InvalidParameter {
                field: "eta",
                reason: format!("{self:?} must be non-empty and non-negative"),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub eta_schedule: EtaSchedule,
    /// ADMM penalty, also the η of the ADMM x-update.
    pub rho: f32,
    /// λ of the TV prior.
    pub tv_weight: f32,
    pub tv_inner_iters: usize,
    /// Stop once ‖xₖ − xₖ₋₁‖ / ‖xₖ₋₁‖ drops below this.
    pub stop_tol: f64,
    pub clamp_final: bool,
    /// Tolerant by default: with N blocks each position goes unobserved
    /// with probability (1 − density)ᴺ, which is not negligible.
    pub zero_coverage: ZeroCoverage,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Gap,
            max_iters: 60,
            eta_schedule: EtaSchedule::Constant(0.0),
            rho: 0.01,
            tv_weight: 0.1,
            tv_inner_iters: 5,
            stop_tol: 1e-5,
            clamp_final: true,
            zero_coverage: ZeroCoverage::Tolerant,
        }
    }
}

impl SolverConfig {
    /// Ten fixed stages without early stopping, mirroring a ten-stage
    /// unrolled network.
    pub fn stages10() -> Self {
        Self {
            max_iters: 10,
            stop_tol: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(BmiError::InvalidParameter {
                field: "max_iters",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.tv_weight >= 0.0 && self.tv_weight.is_finite()) {
            return Err(BmiError::InvalidParameter {
                field: "tv_weight",
                reason: format!("{} is negative or non-finite", self.tv_weight),
            });
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(BmiError::InvalidParameter {
                field: "rho",
                reason: format!("{} is not positive", self.rho),
            });
        }
        if !(self.stop_tol >= 0.0) {
            return Err(BmiError::InvalidParameter {
                field: "stop_tol",
                reason: format!("{} is negative", self.stop_tol),
            });
        }
        self.eta_schedule.validate()
    }

    pub fn tv_denoiser(&self) -> TvDenoiser {
        TvDenoiser {
            inner_iters: self.tv_inner_iters,
        }
    }
}

/// Prior step of the plug-and-play loop. Must preserve the cube shape and
/// be deterministic for a fixed input and strength.
pub trait Denoiser {
    fn denoise(&self, cube: &Cube<f32>, strength: f32) -> Cube<f32>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&self, cube: &Cube<f32>, _strength: f32) -> Cube<f32> {
        cube.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// ‖y − Φx‖₂ for the iterate at the end of the iteration.
    pub residual_l2: f64,
    /// Relative change of the iterate.
    pub change_l2: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_CSV_HEADER: &str = "iter,residual_l2,change_l2";

impl Trace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{:e},{:e}", r.iter, r.residual_l2, r.change_l2);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: Image,
    pub cube: Cube<f32>,
    pub trace: Trace,
}

fn l2(v: impl Iterator<Item = f32>) -> f64 {
    v.map(|x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

fn relative_change(new: &Cube<f32>, old: &Cube<f32>) -> f64 {
    let diff = l2(new.data().iter().zip(old.data()).map(|(a, b)| a - b));
    let base = l2(old.data().iter().copied());
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

fn residual_norm(op: &SensingOperator, x: &Cube<f32>, y: &[f32]) -> Result<f64> {
    Ok(l2(op.residual(x, y)?.into_iter()))
}

fn ensure_finite(c: &Cube<f32>, iteration: usize) -> Result<()> {
    if c.is_finite() {
        Ok(())
    } else {
        Err(BmiError::NonFiniteState { iteration })
    }
}

/// GAP iterations from `x0`: vₖ = project(xₖ₋₁, ηₖ), xₖ = D(vₖ).
pub fn gap_iterate(
    y: &[f32],
    op: &SensingOperator,
    cfg: &SolverConfig,
    denoiser: &dyn Denoiser,
    x0: Cube<f32>,
) -> Result<(ReconState, Trace)> {
    cfg.validate()?;
    let mut state = ReconState::new(x0);
    let mut trace = Trace::default();
    for k in 0..cfg.max_iters {
        op.projection_step(&mut state, y, cfg.eta_schedule.at(k), cfg.zero_coverage)?;
        ensure_finite(&state.v, k + 1)?;
        let x = denoiser.denoise(&state.v, cfg.tv_weight);
        ensure_finite(&x, k + 1)?;
        let change = relative_change(&x, &state.x);
        state.x = x;
        state.stage = k + 1;
        state.residual_norm = residual_norm(op, &state.x, y)?;
        trace.rows.push(TraceRow {
            iter: k + 1,
            residual_l2: state.residual_norm,
            change_l2: change,
        });
        if change < cfg.stop_tol {
            break;
        }
    }
    Ok((state, trace))
}

/// Scaled-form ADMM variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// Data-consistent iterate (projection output).
    pub x: Cube<f32>,
    /// Denoised iterate; this is the reconstruction.
    pub z: Cube<f32>,
    /// Scaled dual variable.
    pub u: Cube<f32>,
    pub stage: usize,
}

/// ADMM iterations starting from z = `x0`, u = 0:
/// x = project(z − u, ρ), z = D(x + u), u ← u + x − z.
pub fn admm_iterate(
    y: &[f32],
    op: &SensingOperator,
    cfg: &SolverConfig,
    denoiser: &dyn Denoiser,
    x0: Cube<f32>,
) -> Result<(AdmmState, Trace)> {
    cfg.validate()?;
    let (n, h, w) = x0.shape();
    let mut st = AdmmState {
        x: x0.clone(),
        z: x0,
        u: Cube::zeros(n, h, w),
        stage: 0,
    };
    let mut trace = Trace::default();
    for k in 0..cfg.max_iters {
        let mut target = st.z.clone();
        for (t, &u) in target.data_mut().iter_mut().zip(st.u.data()) {
            *t -= u;
        }
        st.x = op.project(&target, y, cfg.rho, cfg.zero_coverage)?;
        ensure_finite(&st.x, k + 1)?;

        let mut shifted = st.x.clone();
        for (s, &u) in shifted.data_mut().iter_mut().zip(st.u.data()) {
            *s += u;
        }
        let z = denoiser.denoise(&shifted, cfg.tv_weight);
        ensure_finite(&z, k + 1)?;
        for ((u, &x), &zv) in st.u.data_mut().iter_mut().zip(st.x.data()).zip(z.data()) {
            *u += x - zv;
        }
        let change = relative_change(&z, &st.z);
        st.z = z;
        st.stage = k + 1;
        trace.rows.push(TraceRow {
            iter: k + 1,
            residual_l2: residual_norm(op, &st.z, y)?,
            change_l2: change,
        });
        if change < cfg.stop_tol {
            break;
        }
    }
    Ok((st, trace))
}

fn finish(m: &Measurement, cube: Cube<f32>, trace: Trace, cfg: &SolverConfig) -> Result<Reconstruction> {
    let (h, w) = m.original_shape();
    let mut image = cube.assemble(m.grid(), h, w)?;
    if cfg.clamp_final {
        image.clamp_unit();
    }
    Ok(Reconstruction { image, cube, trace })
}

fn check_operator(m: &Measurement, op: &SensingOperator) -> Result<()> {
    if op.grid() != m.grid() || op.block_shape() != m.block_shape() {
        let (bh, bw) = op.block_shape();
        let (mh, mw) = m.block_shape();
        return Err(BmiError::ShapeMismatch(format!(
            "operator {} with {bh}x{bw} blocks, measurement {} with {mh}x{mw} blocks",
            op.grid(),
            m.grid()
        )));
    }
    Ok(())
}

/// GAP reconstruction of the full image from a measurement.
pub fn gap_solve(
    m: &Measurement,
    op: &SensingOperator,
    cfg: &SolverConfig,
    denoiser: &dyn Denoiser,
) -> Result<Reconstruction> {
    check_operator(m, op)?;
    let x0 = op.init_estimate(m.data())?;
    let (state, trace) = gap_iterate(m.data(), op, cfg, denoiser, x0)?;
    finish(m, state.x, trace, cfg)
}

/// ADMM reconstruction of the full image from a measurement.
pub fn admm_solve(
    m: &Measurement,
    op: &SensingOperator,
    cfg: &SolverConfig,
    denoiser: &dyn Denoiser,
) -> Result<Reconstruction> {
    check_operator(m, op)?;
    let x0 = op.init_estimate(m.data())?;
    let (state, trace) = admm_iterate(m.data(), op, cfg, denoiser, x0)?;
    finish(m, state.z, trace, cfg)
}

/// Dispatches on `cfg.algorithm`.
pub fn solve(
    m: &Measurement,
    op: &SensingOperator,
    cfg: &SolverConfig,
    denoiser: &dyn Denoiser,
) -> Result<Reconstruction> {
    match cfg.algorithm {
        Algorithm::Gap => gap_solve(m, op, cfg, denoiser),
        Algorithm::Admm => admm_solve(m, op, cfg, denoiser),
    }
}
