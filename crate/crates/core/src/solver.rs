//! Alternating optimization of precoder and RIS phases.
//!
//! Each outer iteration performs one surrogate-maximizing precoder update
//! followed by a phase update, so the objective `g_MSE` never decreases.
//! The starting point is the AO solution of the same system without
//! transceiver impairments and CSI errors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{c, dominant_right_singular_vectors};
use crate::model::{SystemConfig, CONTINUOUS_BITS};
use crate::mse::{
    effective_channel, g_mse, wiener_equalizer, Equalizer, PhaseVector, Precoder, Problem,
};
use crate::precoder_opt::precoder_step;
use crate::ris_mm::{mm_phase_optimize, MM_INNER_MAX_ITER, MM_INNER_TOL};
use crate::ris_rga::{rga_optimize, RgaConfig};

/// Outer iterations granted to the impairment-free initialization.
pub const IDEAL_INIT_MAX_OUTER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RisMethod {
    /// Repeated closed-form MM steps.
    #[default]
    Mm,
    /// Riemannian gradient ascent with codebook retraction.
    Rga,
    /// Phases held at their initial value; only the precoder is optimized.
    Fixed,
}

impl FromStr for RisMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mm" => Ok(Self::Mm),
            "rga" => Ok(Self::Rga),
            "fixed" => Ok(Self::Fixed),
            other => Err(Error::Parse(format!(
                "unknown RIS method `{other}` (expected mm, rga or fixed)"
            ))),
        }
    }
}

impl fmt::Display for RisMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mm => "mm",
            Self::Rga => "rga",
            Self::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub method: RisMethod,
    /// Absolute tolerance on the change of `g_MSE` between outer iterations.
    pub tol: f64,
    pub max_outer: usize,
    pub mm_tol: f64,
    pub mm_max_iter: usize,
    pub rga: RgaConfig,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: RisMethod::Mm,
            tol: 1e-4,
            max_outer: 100,
            mm_tol: MM_INNER_TOL,
            mm_max_iter: MM_INNER_MAX_ITER,
            rga: RgaConfig::default(),
        }
    }
}

impl SolverOptions {
    pub fn with_method(method: RisMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(self) -> Result<Self> {
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_outer == 0 {
            return Err(Error::InvalidConfig(
                "tol and max_outer must be positive".into(),
            ));
        }
        self.rga.clone().validate()?;
        Ok(self)
    }
}

#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    pub w: Precoder,
    pub theta: PhaseVector,
    pub c: Equalizer,
    /// Final `g_MSE`.
    pub objective: f64,
    /// `f_MSE / d = (d − g_MSE)/d`.
    pub anmse: f64,
    /// `g_MSE` at the starting point and after every outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Whether the tolerance was met before `max_outer`.
    pub converged: bool,
    pub ris_method: RisMethod,
}

impl BeamformingSolution {
    /// Largest decrease between consecutive trace entries (0 if monotone).
    pub fn max_trace_drop(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// `√(budget/d)` times the top-`d` right singular vectors of the effective
/// channel at `theta`.
pub fn svd_precoder(p: &Problem, theta: &PhaseVector) -> Precoder {
    let h = effective_channel(&p.est, theta, &p.consts);
    let v = dominant_right_singular_vectors(&h, p.n_streams());
    Precoder::new(v * c((p.power_budget() / p.n_streams() as f64).sqrt()))
}

/// The same system with ideal transceivers, perfect CSI, and the original
/// codebook and phase-noise constants.
pub fn idealized_problem(p: &Problem) -> Result<Problem> {
    Ok(Problem::new(p.est.with_perfect_csi(), p.cfg.idealized())?
        .with_consts(p.consts)
        .with_receiver_distortion(p.rx))
}

/// The idealized system with a near-continuous codebook.
pub fn relaxed_problem(p: &Problem) -> Result<Problem> {
    let cfg = SystemConfig {
        bits: CONTINUOUS_BITS,
        ..p.cfg.idealized()
    };
    Ok(Problem::new(p.est.with_perfect_csi(), cfg)?.with_receiver_distortion(p.rx))
}

/// Initial point for the impaired problem.
///
/// The discrete phase updates rarely leave the quantization cell of their
/// starting point, so the start matters. The idealized system is first
/// solved with near-continuous phases from identity phases, the result is
/// quantized onto the real codebook under the best common rotation, and AO
/// on the idealized system with the real codebook is run from there. The
/// precoder is finally rescaled to be feasible for the impaired system.
pub fn ideal_init(p: &Problem, method: RisMethod) -> Result<(Precoder, PhaseVector)> {
    let identity = PhaseVector::identity(p.n_ris(), &p.codebook);
    if method == RisMethod::Fixed {
        return ideal_init_from(p, method, &identity);
    }
    let relaxed = relaxed_problem(p)?;
    let start = PhaseVector::identity(p.n_ris(), &relaxed.codebook);
    let w0 = svd_precoder(&relaxed, &start);
    let cont = ao_iterate(&relaxed, &SolverOptions::with_method(method), w0, start)?;
    let ideal = idealized_problem(p)?;
    let theta0 = quantize_rotated(&ideal, &cont.w, cont.theta.phases())?;
    let opts = SolverOptions {
        max_outer: IDEAL_INIT_MAX_OUTER,
        ..SolverOptions::with_method(method)
    };
    let sol = ao_iterate(&ideal, &opts, cont.w, theta0)?;
    Ok((sol.w.rescaled_into(&p.cfg), sol.theta))
}

/// The rotated quantization of `angles` with the largest `g_MSE` at `w`.
/// Without a direct link the objective ignores a common phase rotation,
/// while the rounding loss does not, so plain rounding can be far off.
pub fn quantize_rotated(p: &Problem, w: &Precoder, angles: &[f64]) -> Result<PhaseVector> {
    let mut best: Option<(PhaseVector, f64)> = None;
    for t in PhaseVector::rotated_quantizations(angles, &p.codebook) {
        let g = g_mse(p, w, &t)?;
        if best.as_ref().is_none_or(|(_, b)| g > *b) {
            best = Some((t, g));
        }
    }
    best.map(|(t, _)| t)
        .ok_or_else(|| Error::Internal("no quantization candidates".into()))
}

/// Idealized-system AO from `theta0` and its SVD precoder, without the
/// continuous warm start of [`ideal_init`].
pub fn ideal_init_from(
    p: &Problem,
    method: RisMethod,
    theta0: &PhaseVector,
) -> Result<(Precoder, PhaseVector)> {
    let ideal = idealized_problem(p)?;
    let opts = SolverOptions {
        max_outer: IDEAL_INIT_MAX_OUTER,
        ..SolverOptions::with_method(method)
    };
    let w0 = svd_precoder(&ideal, theta0);
    let sol = ao_iterate(&ideal, &opts, w0, theta0.clone())?;
    Ok((sol.w.rescaled_into(&p.cfg), sol.theta))
}

/// Runs AO from `init`, or from [`ideal_init`] when none is given.
pub fn ao_solve(
    p: &Problem,
    opts: &SolverOptions,
    init: Option<(Precoder, PhaseVector)>,
) -> Result<BeamformingSolution> {
    let (w0, theta0) = match init {
        Some(x) => x,
        None => ideal_init(p, opts.method)?,
    };
    ao_iterate(p, opts, w0, theta0)
}

/// Precoder-only AO with the phases fixed at `theta`, started from the
/// SVD precoder.
pub fn optimize_precoder(
    p: &Problem,
    theta: &PhaseVector,
    opts: &SolverOptions,
) -> Result<BeamformingSolution> {
    let opts = SolverOptions {
        method: RisMethod::Fixed,
        ..opts.clone()
    };
    let w0 = svd_precoder(p, theta).rescaled_into(&p.cfg);
    ao_iterate(p, &opts, w0, theta.clone())
}

fn ao_iterate(
    p: &Problem,
    opts: &SolverOptions,
    w0: Precoder,
    theta0: PhaseVector,
) -> Result<BeamformingSolution> {
    if theta0.len() != p.n_ris() || w0.w.shape() != (p.n_tx(), p.n_streams()) {
        return Err(Error::Dimension(
            "initial point does not match the problem".into(),
        ));
    }
    if !theta0.is_on_codebook(&p.codebook) {
        return Err(Error::Domain(
            "initial phases are not on the codebook".into(),
        ));
    }
    let mut w = w0.rescaled_into(&p.cfg);
    let mut theta = theta0;
    let mut g = g_mse(p, &w, &theta)?;
    let mut trace = vec![g];
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_outer {
        iterations = it;
        w = precoder_step(p, &w, &theta)?;
        theta = match opts.method {
            RisMethod::Mm => mm_phase_optimize(p, &w, &theta, opts.mm_tol, opts.mm_max_iter)?.theta,
            RisMethod::Rga => rga_optimize(p, &w, &theta, &opts.rga)?.theta,
            RisMethod::Fixed => theta,
        };
        let g_next = g_mse(p, &w, &theta)?;
        trace.push(g_next);
        let delta = g_next - g;
        g = g_next;
        if delta.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    let c = wiener_equalizer(p, &w, &theta)?;
    let d = p.n_streams() as f64;
    Ok(BeamformingSolution {
        w,
        theta,
        c,
        objective: g,
        anmse: (d - g) / d,
        trace,
        iterations,
        converged,
        ris_method: opts.method,
    })
}
