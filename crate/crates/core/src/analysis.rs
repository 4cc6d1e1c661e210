//! Closed-form results: the pure-LoS optimum, the MISO lower bound and MSE
//! floor, and the floors of the three isolated impairment classes.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channels::{ChannelEstimate, LoSAngles};
use crate::error::{Error, Result};
use crate::linalg::{c, diag_part, hermitian_eigen, identity, lambda_max, CMat, CVec};
use crate::model::{distortion_constants, DistortionConstants, PhaseCodebook, SystemConfig};
use crate::mse::{PhaseVector, Precoder};

/// Relative eigenvalue threshold below which `Q` is treated as singular.
const SINGULAR_REL: f64 = 1e-14;

/// Pure-LoS estimate: no direct link, `Ḡ_m = ν_m a_RX a_TXᴴ`, error
/// variances taken from `cfg`.
pub fn los_estimate(cfg: &SystemConfig, angles: &LoSAngles) -> Result<ChannelEstimate> {
    if angles.n_ris() != cfg.n_ris {
        return Err(Error::Dimension(format!(
            "LoS angles describe {} RIS elements, config has {}",
            angles.n_ris(),
            cfg.n_ris
        )));
    }
    ChannelEstimate::new(
        CMat::zeros(cfg.n_rx, cfg.n_tx),
        angles.compound_channels(cfg.n_tx, cfg.n_rx),
        cfg.sigma_d_sq,
        cfg.sigma_m_sq,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosCoefficients {
    /// `(1−ε_b)|ν_r|²|ν_I|²|a_RDᴴΘa_RA|²`.
    pub c1: f64,
    /// `(1+β_R²)σ²`.
    pub c2: f64,
    /// `(1+β_T²+β_R²)(σ_d² + Σσ_m²)`.
    pub c3: f64,
    pub nu_m_list: Vec<Complex64>,
}

impl LosCoefficients {
    pub fn new(
        cfg: &SystemConfig,
        angles: &LoSAngles,
        consts: &DistortionConstants,
        theta: &PhaseVector,
    ) -> Self {
        let nu = angles.nu();
        let s: Complex64 = nu
            .iter()
            .zip(theta.theta().iter())
            .map(|(n, t)| n * t)
            .sum();
        let (bt, br) = (cfg.beta_t.powi(2), cfg.beta_r.powi(2));
        let sigma_tot = cfg.sigma_d_sq + cfg.n_ris as f64 * cfg.sigma_m_sq;
        Self {
            c1: (1.0 - consts.eps_b) * s.norm_sqr(),
            c2: (1.0 + br) * cfg.noise_var,
            c3: (1.0 + bt + br) * sigma_tot,
            nu_m_list: nu,
        }
    }

    /// `g_MSE` at the full-power matched precoder:
    /// `c1 / (κ(1 + β_T²/N_T + β_R²/N_R) + c2(1+β_T²)/P + c3)` with
    /// `κ = c1 + ε_b Σ|ν_m|²`. The `1/N` factors come from the unit-norm
    /// steering vectors, whose diagonal parts are `I/N`.
    pub fn objective(&self, cfg: &SystemConfig, consts: &DistortionConstants) -> f64 {
        let spread: f64 = self.nu_m_list.iter().map(|n| n.norm_sqr()).sum();
        let kappa = self.c1 + consts.eps_b * spread;
        let (bt, br) = (cfg.beta_t.powi(2), cfg.beta_r.powi(2));
        let denom = kappa * (1.0 + bt / cfg.n_tx as f64 + br / cfg.n_rx as f64)
            + self.c2 * (1.0 + bt) / cfg.power
            + self.c3;
        if self.c1 == 0.0 {
            0.0
        } else {
            self.c1 / denom
        }
    }
}

#[derive(Debug, Clone)]
pub struct LosSolution {
    pub w_star: Precoder,
    pub theta_star: PhaseVector,
    pub g_star: f64,
    pub coefficients: LosCoefficients,
}

/// Codebook vector maximizing `|Σ_m θ_m z_m|`.
///
/// At the optimum every `θ_m` is the phase nearest to `c − ∠z_m` for a
/// common rotation `c`, so the rotated quantizations of `−∠z` contain a
/// maximizer. The unrotated candidate comes first and is kept on ties.
pub fn best_coherent_phases(z: &[Complex64], codebook: &PhaseCodebook) -> PhaseVector {
    let angles: Vec<f64> = z.iter().map(|zm| -zm.arg()).collect();
    let score = |t: &PhaseVector| {
        z.iter()
            .zip(t.theta().iter())
            .map(|(zm, tm)| zm * tm)
            .sum::<Complex64>()
            .norm()
    };
    let mut best: Option<(PhaseVector, f64)> = None;
    for t in PhaseVector::rotated_quantizations(&angles, codebook) {
        let s = score(&t);
        if best.as_ref().is_none_or(|(_, b)| s > b * (1.0 + 1e-14)) {
            best = Some((t, s));
        }
    }
    best.map(|(t, _)| t)
        .unwrap_or_else(|| PhaseVector::quantize(&angles, codebook))
}

/// Closed-form optimum of the single-stream pure-LoS problem.
///
/// The precoder is the full-power matched filter of `a_TX`; the phases
/// maximize `|a_RDᴴΘa_RA|`, on which the objective is increasing.
pub fn los_optimal(
    cfg: &SystemConfig,
    angles: &LoSAngles,
    consts: &DistortionConstants,
    codebook: &PhaseCodebook,
) -> Result<LosSolution> {
    if cfg.n_streams != 1 {
        return Err(Error::Dimension(format!(
            "the LoS channel has rank one, got {} streams",
            cfg.n_streams
        )));
    }
    if angles.n_ris() != cfg.n_ris {
        return Err(Error::Dimension(
            "LoS angles do not match the RIS size".into(),
        ));
    }
    let a_tx = angles.a_tx(cfg.n_tx);
    let scale = (cfg.power / (1.0 + cfg.beta_t.powi(2))).sqrt() / a_tx.norm();
    let w_star = Precoder::new(CMat::from_column_slice(
        cfg.n_tx,
        1,
        (a_tx * c(scale)).as_slice(),
    ));
    let (ra, rd) = (angles.a_ra(), angles.a_rd());
    let z: Vec<Complex64> = (0..cfg.n_ris).map(|m| rd[m].conj() * ra[m]).collect();
    let theta_star = best_coherent_phases(&z, codebook);
    let coefficients = LosCoefficients::new(cfg, angles, consts, &theta_star);
    Ok(LosSolution {
        g_star: coefficients.objective(cfg, consts),
        w_star,
        theta_star,
        coefficients,
    })
}

/// `H̃_cat = [h̄_d, ω_b ḡ_1, …, ω_b ḡ_M]` (`N_T × (M+1)`) and the
/// impairment matrix `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoBoundInputs {
    pub h_tilde_cat: CMat,
    pub q: CMat,
}

fn require_miso(est: &ChannelEstimate) -> Result<()> {
    if est.n_rx() != 1 {
        return Err(Error::Dimension(format!(
            "expected a single receive antenna, got {}",
            est.n_rx()
        )));
    }
    Ok(())
}

/// Column-vector channels `h̄_d = H̄_dᴴ`, `ḡ_m = Ḡ_mᴴ`.
fn miso_columns(est: &ChannelEstimate) -> (CVec, Vec<CVec>) {
    let col = |m: &CMat| CVec::from_iterator(m.ncols(), m.row(0).iter().map(|z| z.conj()));
    (col(&est.h_d_bar), est.g_bars.iter().map(col).collect())
}

pub fn miso_bound_inputs(
    est: &ChannelEstimate,
    cfg: &SystemConfig,
    consts: &DistortionConstants,
) -> Result<MisoBoundInputs> {
    require_miso(est)?;
    let n = est.n_tx();
    let (h_d, g) = miso_columns(est);
    let (bt, br) = (cfg.beta_t.powi(2), cfg.beta_r.powi(2));
    let mut h_tilde_cat = CMat::zeros(n, g.len() + 1);
    h_tilde_cat.set_column(0, &h_d);
    let mut q = identity(n) * c((1.0 + bt + br) * est.sigma_total());
    for (m, gm) in g.iter().enumerate() {
        h_tilde_cat.set_column(m + 1, &(gm * c(consts.omega_b)));
        let gg = gm * gm.adjoint();
        q += (&gg * c(1.0 + br) + diag_part(&gg) * c(bt)) * c(consts.eps_b);
    }
    Ok(MisoBoundInputs { h_tilde_cat, q })
}

/// `λ_max(H̃ᴴ A⁻¹ H̃)` for Hermitian `A`, or `None` if `A` is singular.
/// The eigenproblem is solved on whichever of the two Gram sides is smaller.
fn whitened_lambda_max(h: &CMat, a: &CMat) -> Option<f64> {
    let (vals, vecs) = hermitian_eigen(a);
    let top = vals.last().copied().unwrap_or(0.0);
    if top.is_nan() || top <= 0.0 || vals[0] <= SINGULAR_REL * top {
        return None;
    }
    let mut b = vecs.adjoint() * h;
    for (i, &v) in vals.iter().enumerate() {
        let s = c(1.0 / v.sqrt());
        b.row_mut(i).iter_mut().for_each(|z| *z *= s);
    }
    let gram = if b.ncols() < b.nrows() {
        b.adjoint() * &b
    } else {
        &b * b.adjoint()
    };
    Some(lambda_max(&gram))
}

fn bound_from_lambda(lambda: f64, m_plus_1: f64, beta_r: f64) -> f64 {
    let x = m_plus_1 * lambda;
    1.0 - x / (1.0 + (1.0 + beta_r.powi(2)) * x)
}

/// Lower bound on the single-antenna-receiver `f_MSE` over all feasible
/// precoders and phase vectors:
/// `1 − (M+1)λ / (1 + (1+β_R²)(M+1)λ)` with
/// `λ = λ_max(H̃ᴴ(Q + (1+β_T²)(σ²/P)I)⁻¹H̃)`.
pub fn miso_lower_bound(
    est: &ChannelEstimate,
    cfg: &SystemConfig,
    consts: &DistortionConstants,
) -> Result<f64> {
    let inp = miso_bound_inputs(est, cfg, consts)?;
    let n = est.n_tx();
    let a = &inp.q + identity(n) * c((1.0 + cfg.beta_t.powi(2)) * cfg.noise_var / cfg.power);
    let lambda =
        whitened_lambda_max(&inp.h_tilde_cat, &a).ok_or_else(|| Error::IllConditioned {
            cond: f64::INFINITY,
            limit: 1.0 / SINGULAR_REL,
        })?;
    Ok(bound_from_lambda(
        lambda,
        (est.n_ris() + 1) as f64,
        cfg.beta_r,
    ))
}

/// High-SNR limit of [`miso_lower_bound`], with `Q⁻¹` in place of the
/// noise-regularized inverse.
///
/// A singular `Q` (no CSI error, and phase noise that does not span the
/// transmit space) makes `λ` unbounded; the limit `β_R²/(1+β_R²)` is then
/// returned, which is 0 for an impairment-free system.
pub fn miso_floor(
    est: &ChannelEstimate,
    cfg: &SystemConfig,
    consts: &DistortionConstants,
) -> Result<f64> {
    let inp = miso_bound_inputs(est, cfg, consts)?;
    let br = cfg.beta_r.powi(2);
    Ok(match whitened_lambda_max(&inp.h_tilde_cat, &inp.q) {
        Some(lambda) => bound_from_lambda(lambda, (est.n_ris() + 1) as f64, cfg.beta_r),
        None => br / (1.0 + br),
    })
}

/// Floor with transceiver distortion only:
/// `1 − N_T/(β_T² + (1+β_R²)N_T)`.
pub fn floor_hwi(n_tx: usize, beta_t: f64, beta_r: f64) -> Result<f64> {
    if n_tx == 0 {
        return Err(Error::Domain("n_tx must be at least 1".into()));
    }
    let n = n_tx as f64;
    Ok(1.0 - n / (beta_t.powi(2) + (1.0 + beta_r.powi(2)) * n))
}

/// `h̄_d + Ḡθ` without phase-noise shrinkage.
fn cascaded_column(h_d: &CVec, g: &[CVec], theta: &PhaseVector, omega: f64) -> CVec {
    g.iter()
        .zip(theta.theta().iter())
        .fold(h_d.clone(), |acc, (gm, t)| acc + gm * (t * omega))
}

fn check_theta(est: &ChannelEstimate, theta: &PhaseVector) -> Result<()> {
    if theta.len() != est.n_ris() {
        return Err(Error::Dimension(format!(
            "{} phases for {} RIS elements",
            theta.len(),
            est.n_ris()
        )));
    }
    Ok(())
}

/// Floor with CSI error only, for the given phases:
/// `σ_tot / (σ_tot + ‖h̄_d + Ḡθ‖²)`.
pub fn floor_csi(
    est: &ChannelEstimate,
    theta: &PhaseVector,
    sigma_d_sq: f64,
    sigma_m_sq_total: f64,
) -> Result<f64> {
    require_miso(est)?;
    check_theta(est, theta)?;
    let sigma = sigma_d_sq + sigma_m_sq_total;
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::Domain("error variances must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let (h_d, g) = miso_columns(est);
    let h = cascaded_column(&h_d, &g, theta, 1.0);
    Ok(sigma / (sigma + h.norm_squared()))
}

/// `ḠḠᴴ` as a Cholesky-ready matrix, erroring when it is rank deficient.
fn gram_factor(g: &[CVec], n: usize) -> Result<(Vec<f64>, CMat)> {
    let gg = g
        .iter()
        .fold(CMat::zeros(n, n), |acc, gm| acc + gm * gm.adjoint());
    let (vals, vecs) = hermitian_eigen(&gg);
    let top = vals.last().copied().unwrap_or(0.0);
    if g.len() < n || top.is_nan() || top <= 0.0 || vals[0] <= 1e-12 * top {
        return Err(Error::RankDeficient(format!(
            "ḠḠᴴ is singular ({} RIS elements, {} transmit antennas)",
            g.len(),
            n
        )));
    }
    Ok((vals, vecs))
}

fn inv_quad(vals: &[f64], vecs: &CMat, x: &CVec, y: &CVec) -> Complex64 {
    let (ux, uy) = (vecs.adjoint() * x, vecs.adjoint() * y);
    ux.iter()
        .zip(uy.iter())
        .zip(vals)
        .map(|((a, b), v)| a.conj() * b / v)
        .sum()
}

/// Floor with RIS phase noise only, for the given phases:
/// `ε_b / (ε_b + h̄ᴴ(ḠḠᴴ)⁻¹h̄)` with `h̄ = h̄_d + ω_b Ḡθ`.
pub fn floor_phase_noise(est: &ChannelEstimate, theta: &PhaseVector, bits: u32) -> Result<f64> {
    require_miso(est)?;
    check_theta(est, theta)?;
    let consts = distortion_constants(bits)?;
    let (h_d, g) = miso_columns(est);
    let (vals, vecs) = gram_factor(&g, est.n_tx())?;
    let h = cascaded_column(&h_d, &g, theta, consts.omega_b);
    let quad = inv_quad(&vals, &vecs, &h, &h).re;
    Ok(consts.eps_b / (consts.eps_b + quad))
}

/// The same floor written term by term with `Ḡ† = Ḡᴴ(ḠḠᴴ)⁻¹`:
/// `(1−ω²) / ((1−ω²) + ω²θᴴḠ†Ḡθ + 2ωRe{θᴴḠ†h̄_d} + h̄_dᴴ(ḠḠᴴ)⁻¹h̄_d)`.
pub fn floor_phase_noise_expanded(
    est: &ChannelEstimate,
    theta: &PhaseVector,
    bits: u32,
) -> Result<f64> {
    require_miso(est)?;
    check_theta(est, theta)?;
    let x = PI / (1u64 << bits) as f64;
    let omega = x.sin() / x;
    let (h_d, g) = miso_columns(est);
    let n = est.n_tx();
    gram_factor(&g, n)?;
    let mut gmat = CMat::zeros(n, g.len());
    for (m, gm) in g.iter().enumerate() {
        gmat.set_column(m, gm);
    }
    let gg_inv = (&gmat * gmat.adjoint())
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("ḠḠᴴ is singular".into()))?;
    let pinv = gmat.adjoint() * &gg_inv;
    let t = theta.theta();
    let eps = 1.0 - omega * omega;
    let t1 = (t.adjoint() * &pinv * &gmat * t)[(0, 0)].re;
    let t2 = (t.adjoint() * &pinv * &h_d)[(0, 0)].re;
    let t3 = (h_d.adjoint() * &gg_inv * &h_d)[(0, 0)].re;
    Ok(eps / (eps + omega * omega * t1 + 2.0 * omega * t2 + t3))
}
