//! The MSE objective kernel: effective channel, received-signal covariance,
//! the closed-form total average MSE, the Wiener equalizer, the
//! post-equalizer objective `g_MSE`, and a Monte-Carlo oracle that samples the
//! per-realization MSE matrix.
//!
//! Hardware distortion follows the usual additive model. The transmitter
//! adds noise with covariance `β_T²·diag(WWᴴ)`; the receiver adds noise
//! with covariance `β_R²·diag(E[yyᴴ])`, thermal noise included. By default the receiver term ignores
//! the small `β_R²β_T²` cross product ([`ReceiverDistortion::Approximate`]);
//! the exact form is available for sensitivity checks and is carried
//! consistently through every surrogate.

use num_complex::Complex64;
use rand::Rng;

use crate::channels::{sample_true_channel, ChannelEstimate, TrueChannelSample};
use crate::error::{Error, Result};
use crate::linalg::{
    c, cis, diag_part, fro_norm_sq, hermitian_part, identity, inner_re, trace, CMat, CVec,
    HermitianFactor,
};
use crate::model::{
    distortion_constants, phase_codebook, DistortionConstants, PhaseCodebook, SystemConfig,
};

/// Which receiver-distortion covariance is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReceiverDistortion {
    /// `β_R²·diag(H WWᴴ Hᴴ)`, dropping the `β_R²β_T²` term.
    #[default]
    Approximate,
    /// `β_R²·diag(H (WWᴴ + β_T² diag(WWᴴ)) Hᴴ)`.
    Exact,
}

/// A channel estimate together with its system configuration, distortion
/// constants and codebook. Everything an objective evaluation needs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub est: ChannelEstimate,
    pub cfg: SystemConfig,
    pub consts: DistortionConstants,
    pub codebook: PhaseCodebook,
    pub rx: ReceiverDistortion,
}

impl Problem {
    pub fn new(est: ChannelEstimate, cfg: SystemConfig) -> Result<Self> {
        let cfg = cfg.validate()?;
        est.check_against(&cfg)?;
        Ok(Self {
            consts: distortion_constants(cfg.bits)?,
            codebook: phase_codebook(cfg.bits)?,
            est,
            cfg,
            rx: ReceiverDistortion::default(),
        })
    }

    /// Overrides the phase-noise constants, e.g. with
    /// [`DistortionConstants::ideal`] for the continuous-phase limit.
    pub fn with_consts(mut self, consts: DistortionConstants) -> Self {
        self.consts = consts;
        self
    }

    pub fn with_receiver_distortion(mut self, rx: ReceiverDistortion) -> Self {
        self.rx = rx;
        self
    }

    pub fn n_tx(&self) -> usize {
        self.cfg.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.cfg.n_rx
    }

    pub fn n_streams(&self) -> usize {
        self.cfg.n_streams
    }

    pub fn n_ris(&self) -> usize {
        self.cfg.n_ris
    }

    /// Bound on `Tr(WWᴴ)` implied by `(1+β_T²)·Tr(WWᴴ) ≤ P`.
    pub fn power_budget(&self) -> f64 {
        self.cfg.power / (1.0 + self.cfg.beta_t.powi(2))
    }

    /// Transmit covariance `S = WWᴴ + β_T²·diag(WWᴴ)`.
    pub(crate) fn tx_cov(&self, ww: &CMat) -> CMat {
        ww + diag_part(ww) * c(self.cfg.beta_t.powi(2))
    }

    /// The matrix whose channel image feeds the receiver distortion.
    pub(crate) fn rx_source<'m>(&self, ww: &'m CMat, s: &'m CMat) -> &'m CMat {
        match self.rx {
            ReceiverDistortion::Approximate => ww,
            ReceiverDistortion::Exact => s,
        }
    }

    /// Coefficient of `Tr(WWᴴ)·σ_tot` in the CSI-error covariance.
    pub(crate) fn si_coeff(&self) -> f64 {
        let (bt, br) = (self.cfg.beta_t.powi(2), self.cfg.beta_r.powi(2));
        match self.rx {
            ReceiverDistortion::Approximate => 1.0 + bt + br,
            ReceiverDistortion::Exact => (1.0 + bt) * (1.0 + br),
        }
    }

    /// `B S Bᴴ + β_R²·diag(B R Bᴴ)` for one channel block.
    pub(crate) fn block_cov(&self, b: &CMat, s: &CMat, r: &CMat) -> CMat {
        let bs = b * s * b.adjoint();
        let br = b * r * b.adjoint();
        bs + diag_part(&br) * c(self.cfg.beta_r.powi(2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub w: CMat,
}

impl Precoder {
    pub fn new(w: CMat) -> Self {
        Self { w }
    }

    /// `Tr(WWᴴ)`.
    pub fn power(&self) -> f64 {
        fro_norm_sq(&self.w)
    }

    /// `(1+β_T²)·Tr(WWᴴ) ≤ P·(1 + rel_tol)`.
    pub fn is_feasible(&self, cfg: &SystemConfig, rel_tol: f64) -> bool {
        (1.0 + cfg.beta_t.powi(2)) * self.power() <= cfg.power * (1.0 + rel_tol)
    }

    /// Scaled down (never up) until feasible for `cfg`.
    pub fn rescaled_into(self, cfg: &SystemConfig) -> Self {
        let budget = cfg.power / (1.0 + cfg.beta_t.powi(2));
        let p = self.power();
        if p > budget {
            Self {
                w: self.w * c((budget / p).sqrt()),
            }
        } else {
            self
        }
    }
}

/// Unit-modulus RIS reflection coefficients restricted to a codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    phases: Vec<f64>,
    theta: CVec,
}

impl PhaseVector {
    fn from_exact(phases: Vec<f64>) -> Self {
        let theta = CVec::from_iterator(phases.len(), phases.iter().map(|&p| cis(p)));
        Self { phases, theta }
    }

    /// Accepts phases that are codebook members up to `1e-9` rad and snaps
    /// them to the exact grid values.
    pub fn from_phases(phases: &[f64], codebook: &PhaseCodebook) -> Result<Self> {
        let mut snapped = Vec::with_capacity(phases.len());
        for (m, &p) in phases.iter().enumerate() {
            if !codebook.contains(p, 1e-9) {
                return Err(Error::Domain(format!(
                    "phase {p} of element {m} is not in the {}-bit codebook",
                    codebook.bits()
                )));
            }
            snapped.push(codebook.nearest(p));
        }
        Ok(Self::from_exact(snapped))
    }

    pub fn from_indices(indices: &[usize], codebook: &PhaseCodebook) -> Self {
        Self::from_exact(indices.iter().map(|&k| codebook.phases()[k]).collect())
    }

    /// Each angle mapped to its circularly nearest codebook phase.
    pub fn quantize(angles: &[f64], codebook: &PhaseCodebook) -> Self {
        Self::from_exact(angles.iter().map(|&a| codebook.nearest(a)).collect())
    }

    /// All elements at the codebook phase nearest to 0 (which is 0 itself).
    /// Every distinct quantization of `angles + c` over common rotations
    /// `c` in one codebook step, starting with `c = 0`. The assignment only
    /// changes where some `angles_m + c` crosses a cell boundary, so one
    /// rotation per boundary interval covers all of them.
    pub fn rotated_quantizations(angles: &[f64], codebook: &PhaseCodebook) -> Vec<Self> {
        let step = codebook.step();
        let at = |rot: f64| {
            let shifted: Vec<f64> = angles.iter().map(|a| a + rot).collect();
            Self::quantize(&shifted, codebook)
        };
        let mut cuts: Vec<f64> = angles
            .iter()
            .map(|a| (0.5 * step - a).rem_euclid(step))
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = vec![at(0.0)];
        for (i, &lo) in cuts.iter().enumerate() {
            let hi = cuts.get(i + 1).copied().unwrap_or(cuts[0] + step);
            let cand = at(0.5 * (lo + hi));
            if !out.contains(&cand) {
                out.push(cand);
            }
        }
        out
    }

    pub fn identity(m: usize, codebook: &PhaseCodebook) -> Self {
        Self::quantize(&vec![0.0; m], codebook)
    }

    /// Independent uniform draws from the codebook.
    pub fn random<R: Rng + ?Sized>(m: usize, codebook: &PhaseCodebook, rng: &mut R) -> Self {
        let n = codebook.len();
        let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
        Self::from_indices(&idx, codebook)
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn theta(&self) -> &CVec {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn is_on_codebook(&self, codebook: &PhaseCodebook) -> bool {
        self.phases.iter().all(|&p| codebook.contains(p, 1e-12))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalizer {
    pub c: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBundle {
    pub h_bar_theta: CMat,
    pub t_cas: CMat,
    pub t_com: CMat,
    pub t_si: CMat,
    pub y_total: CMat,
}

/// `H_d + Σ_m coeff_m·G_m`.
pub(crate) fn combine(
    h_d: &CMat,
    g_list: &[CMat],
    coeffs: impl IntoIterator<Item = Complex64>,
) -> CMat {
    let mut h = h_d.clone();
    for (g, a) in g_list.iter().zip(coeffs) {
        h += g * a;
    }
    h
}

/// `H̄_θ = H̄_d + ω_b·Σ_m θ_m·Ḡ_m`.
pub fn effective_channel(
    est: &ChannelEstimate,
    theta: &PhaseVector,
    consts: &DistortionConstants,
) -> CMat {
    let w = c(consts.omega_b);
    combine(
        &est.h_d_bar,
        &est.g_bars,
        theta.theta().iter().map(|&t| t * w),
    )
}

/// The received-signal covariance terms of the averaged MSE.
pub fn received_covariance(p: &Problem, w: &Precoder, theta: &PhaseVector) -> CovarianceBundle {
    let h = effective_channel(&p.est, theta, &p.consts);
    let ww = &w.w * w.w.adjoint();
    let s = p.tx_cov(&ww);
    let r = p.rx_source(&ww, &s);
    let t_cas = hermitian_part(&p.block_cov(&h, &s, r));
    let n = p.n_rx();
    let mut t_com = CMat::zeros(n, n);
    for g in &p.est.g_bars {
        t_com += p.block_cov(g, &s, r);
    }
    let t_com = hermitian_part(&t_com);
    let si = (1.0 + p.cfg.beta_r.powi(2)) * p.cfg.noise_var
        + p.si_coeff() * w.power() * p.est.sigma_total();
    let t_si = identity(n) * c(si);
    let y_total = &t_cas + &t_com * c(p.consts.eps_b) + &t_si;
    CovarianceBundle {
        h_bar_theta: h,
        t_cas,
        t_com,
        t_si,
        y_total,
    }
}

/// The Wiener filter `C* = WᴴH̄_θᴴ·Y⁻¹`.
pub fn wiener_equalizer(p: &Problem, w: &Precoder, theta: &PhaseVector) -> Result<Equalizer> {
    let cov = received_covariance(p, w, theta);
    let x = &cov.h_bar_theta * &w.w;
    let f = HermitianFactor::new(&cov.y_total)?;
    Ok(Equalizer {
        c: f.solve(&x).adjoint(),
    })
}

/// `f_MSE = Tr(I − CH̄_θW − (CH̄_θW)ᴴ + CYCᴴ)`.
pub fn total_average_mse(p: &Problem, eq: &Equalizer, w: &Precoder, theta: &PhaseVector) -> f64 {
    let cov = received_covariance(p, w, theta);
    let chw = &eq.c * &cov.h_bar_theta * &w.w;
    let cyc = &eq.c * &cov.y_total * eq.c.adjoint();
    p.n_streams() as f64 - 2.0 * trace(&chw).re + trace(&cyc).re
}

/// `g_MSE = Tr(WᴴH̄_θᴴ Y⁻¹ H̄_θW)`, the MSE reduction under the Wiener filter.
pub fn g_mse(p: &Problem, w: &Precoder, theta: &PhaseVector) -> Result<f64> {
    let cov = received_covariance(p, w, theta);
    let x = &cov.h_bar_theta * &w.w;
    let f = HermitianFactor::new(&cov.y_total)?;
    Ok(inner_re(&x, &f.solve(&x)))
}

/// The MSE matrix conditioned on one realization of the true channels and
/// RIS phase errors, averaged over symbols, distortion and thermal noise.
pub fn mse_matrix_sample(
    p: &Problem,
    eq: &Equalizer,
    w: &Precoder,
    sample: &TrueChannelSample,
    theta: &PhaseVector,
) -> CMat {
    let coeffs = theta
        .theta()
        .iter()
        .zip(&sample.phase_noise)
        .map(|(&t, &dp)| t * cis(dp));
    let h = combine(&sample.h_d, &sample.g_list, coeffs);
    let ww = &w.w * w.w.adjoint();
    let s = p.tx_cov(&ww);
    let r = p.rx_source(&ww, &s);
    let d = p.n_streams();
    let err = &eq.c * &h * &w.w - identity(d);
    let tx = diag_part(&ww) * c(p.cfg.beta_t.powi(2));
    let rx_noise = diag_part(&(&h * r * h.adjoint())) * c(p.cfg.beta_r.powi(2))
        + identity(p.n_rx()) * c((1.0 + p.cfg.beta_r.powi(2)) * p.cfg.noise_var);
    let e = &err * err.adjoint() + &eq.c * (&h * tx * h.adjoint() + rx_noise) * eq.c.adjoint();
    hermitian_part(&e)
}

/// Sample mean and standard error of `Tr(MSE)` over `n_samples` draws of the
/// CSI errors and RIS phase noise.
pub fn mc_average_mse<R: Rng + ?Sized>(
    p: &Problem,
    eq: &Equalizer,
    w: &Precoder,
    theta: &PhaseVector,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    // Welford accumulation keeps the variance exact for constant samples
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..n_samples {
        let sample = sample_true_channel(&p.est, &p.cfg, rng);
        let v = trace(&mse_matrix_sample(p, eq, w, &sample, theta)).re;
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let n = n_samples as f64;
    let var = if n_samples > 1 { m2 / (n - 1.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::{cscg_matrix, hermitian_eigenvalues, max_abs_diff};
    use crate::model::SystemConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) use crate::selftest::{random_instance, small_cfg};

    #[test]
    fn rotated_quantizations_cover_every_rotation() {
        let cb = phase_codebook(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let angles: Vec<f64> = (0..5)
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let cands = PhaseVector::rotated_quantizations(&angles, &cb);
        assert_eq!(cands[0], PhaseVector::quantize(&angles, &cb));
        assert!(cands.len() <= angles.len() + 1);
        for k in 0..2000 {
            let rot = cb.step() * k as f64 / 2000.0;
            let shifted: Vec<f64> = angles.iter().map(|a| a + rot).collect();
            assert!(cands.contains(&PhaseVector::quantize(&shifted, &cb)));
        }
    }

    #[test]
    fn effective_channel_cases() {
        let cfg = small_cfg(2, 2, 2, 2, 1);
        let (mut p, _, theta) = random_instance(&cfg, 1);
        // independent elementwise evaluation
        let h = effective_channel(&p.est, &theta, &p.consts);
        let om = p.consts.omega_b;
        for i in 0..2 {
            for j in 0..2 {
                let mut v = p.est.h_d_bar[(i, j)];
                for m in 0..2 {
                    v += c(om) * theta.theta()[m] * p.est.g_bars[m][(i, j)];
                }
                assert!((v - h[(i, j)]).norm() < 1e-14);
            }
        }
        for g in &mut p.est.g_bars {
            g.fill(c(0.0));
        }
        assert_eq!(effective_channel(&p.est, &theta, &p.consts), p.est.h_d_bar);
    }

    #[test]
    fn continuous_limit_single_element() {
        let cfg = small_cfg(2, 2, 2, 1, 1);
        let (p, _, _) = random_instance(&cfg, 2);
        let cb = phase_codebook(1).unwrap();
        let theta = PhaseVector::identity(1, &cb);
        let h = effective_channel(&p.est, &theta, &DistortionConstants::ideal());
        assert!(max_abs_diff(&h, &(&p.est.h_d_bar + &p.est.g_bars[0])) < 1e-15);
    }

    #[test]
    fn ideal_covariance_reduction() {
        let cfg = SystemConfig {
            beta_t: 0.0,
            beta_r: 0.0,
            sigma_d_sq: 0.0,
            sigma_m_sq: 0.0,
            ..small_cfg(3, 2, 2, 3, 2)
        };
        let (p, w, theta) = random_instance(&cfg, 3);
        let p = p.with_consts(DistortionConstants::ideal());
        let cov = received_covariance(&p, &w, &theta);
        let h = &cov.h_bar_theta;
        let expect = h * &w.w * w.w.adjoint() * h.adjoint() + identity(2) * c(cfg.noise_var);
        assert!(max_abs_diff(&cov.y_total, &expect) < 1e-12);
    }

    #[test]
    fn covariance_term_by_term() {
        let cfg = SystemConfig {
            beta_t: 0.2,
            beta_r: 0.3,
            sigma_d_sq: 0.05,
            sigma_m_sq: 0.02,
            ..small_cfg(2, 2, 2, 2, 1)
        };
        let (p, w, theta) = random_instance(&cfg, 4);
        let cov = received_covariance(&p, &w, &theta);
        // scalar, entry-by-entry re-evaluation
        let (bt, br) = (0.04, 0.09);
        let ww = &w.w * w.w.adjoint();
        let mut s = ww.clone();
        for j in 0..2 {
            s[(j, j)] *= 1.0 + bt;
        }
        let h = &cov.h_bar_theta;
        let block = |b: &CMat| {
            let mut out = CMat::zeros(2, 2);
            for i in 0..2 {
                for k in 0..2 {
                    let mut v = c(0.0);
                    for a in 0..2 {
                        for e in 0..2 {
                            v += b[(i, a)] * s[(a, e)] * b[(k, e)].conj();
                        }
                    }
                    out[(i, k)] = v;
                }
                let mut dg = c(0.0);
                for a in 0..2 {
                    for e in 0..2 {
                        dg += b[(i, a)] * ww[(a, e)] * b[(i, e)].conj();
                    }
                }
                out[(i, i)] += dg * br;
            }
            out
        };
        assert!(max_abs_diff(&cov.t_cas, &block(h)) < 1e-12);
        let com = block(&p.est.g_bars[0]) + block(&p.est.g_bars[1]);
        assert!(max_abs_diff(&cov.t_com, &com) < 1e-12);
        let tr_ww = ww[(0, 0)].re + ww[(1, 1)].re;
        let si = (1.0 + br) * cfg.noise_var + (1.0 + bt + br) * tr_ww * (0.05 + 2.0 * 0.02);
        assert!(max_abs_diff(&cov.t_si, &(identity(2) * c(si))) < 1e-14);
        let y = &com * c(p.consts.eps_b) + block(h) + identity(2) * c(si);
        assert!(max_abs_diff(&cov.y_total, &y) < 1e-12);
    }

    #[test]
    fn y_total_bounded_below() {
        for seed in 0..20 {
            let cfg = small_cfg(3, 3, 2, 4, 2);
            let (p, w, theta) = random_instance(&cfg, seed);
            let y = received_covariance(&p, &w, &theta).y_total;
            assert!(max_abs_diff(&y, &y.adjoint()) < 1e-14);
            let lo = hermitian_eigenvalues(&y)[0];
            assert!(lo >= (1.0 + 0.0064) * cfg.noise_var - 1e-10);
        }
    }

    fn scalar_problem() -> (Problem, Precoder, PhaseVector) {
        let cfg = SystemConfig {
            n_tx: 1,
            n_rx: 1,
            n_streams: 1,
            n_ris: 1,
            bits: 1,
            power: 1.0,
            noise_var: 1.0,
            beta_t: 0.0,
            beta_r: 0.0,
            sigma_d_sq: 0.0,
            sigma_m_sq: 0.0,
        };
        let est = ChannelEstimate::new(
            CMat::from_element(1, 1, c(1.0)),
            vec![CMat::zeros(1, 1)],
            0.0,
            0.0,
        )
        .unwrap();
        let p = Problem::new(est, cfg).unwrap();
        let theta = PhaseVector::identity(1, &p.codebook);
        (p, Precoder::new(CMat::from_element(1, 1, c(1.0))), theta)
    }

    #[test]
    fn scalar_wiener() {
        let (p, w, theta) = scalar_problem();
        let eq = wiener_equalizer(&p, &w, &theta).unwrap();
        assert!((eq.c[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!((g_mse(&p, &w, &theta).unwrap() - 0.5).abs() < 1e-15);
        assert!((total_average_mse(&p, &eq, &w, &theta) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ideal_wiener_is_textbook_mmse() {
        let cfg = SystemConfig {
            beta_t: 0.0,
            beta_r: 0.0,
            sigma_d_sq: 0.0,
            sigma_m_sq: 0.0,
            ..small_cfg(3, 3, 2, 2, 2)
        };
        let (p, w, theta) = random_instance(&cfg, 5);
        let p = p.with_consts(DistortionConstants::ideal());
        let h = effective_channel(&p.est, &theta, &p.consts);
        let hw = &h * &w.w;
        let y = &hw * hw.adjoint() + identity(3) * c(cfg.noise_var);
        let expect = hw.adjoint() * y.try_inverse().unwrap();
        let eq = wiener_equalizer(&p, &w, &theta).unwrap();
        assert!(max_abs_diff(&eq.c, &expect) < 1e-10);
    }

    #[test]
    fn zero_equalizer_and_zero_precoder() {
        let cfg = small_cfg(3, 2, 2, 3, 2);
        let (p, w, theta) = random_instance(&cfg, 6);
        let zero = Equalizer {
            c: CMat::zeros(2, 2),
        };
        assert!((total_average_mse(&p, &zero, &w, &theta) - 2.0).abs() < 1e-15);
        let w0 = Precoder::new(CMat::zeros(3, 2));
        assert_eq!(g_mse(&p, &w0, &theta).unwrap(), 0.0);
    }

    #[test]
    fn wiener_identity_and_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..20 {
            let cfg = small_cfg(3, 3, 2, 4, 2);
            let (p, w, theta) = random_instance(&cfg, 100 + seed);
            let eq = wiener_equalizer(&p, &w, &theta).unwrap();
            let f = total_average_mse(&p, &eq, &w, &theta);
            let g = g_mse(&p, &w, &theta).unwrap();
            assert!((f - (2.0 - g)).abs() < 1e-10, "{f} vs {}", 2.0 - g);
            assert!((0.0..2.0).contains(&g));
            for _ in 0..10 {
                let mut dc = cscg_matrix(2, 3, 1.0, &mut rng);
                dc *= c(1e-4 / fro_norm_sq(&dc).sqrt());
                let pert = Equalizer { c: &eq.c + dc };
                assert!(total_average_mse(&p, &pert, &w, &theta) >= f - 1e-9);
            }
        }
    }

    #[test]
    fn g_invariant_under_global_rotation() {
        let cfg = small_cfg(3, 3, 2, 4, 2);
        let (p, w, theta) = random_instance(&cfg, 8);
        let g = g_mse(&p, &w, &theta).unwrap();
        let rot = Precoder::new(&w.w * cis(1.234));
        assert!((g - g_mse(&p, &rot, &theta).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ill_conditioned_y_is_reported() {
        let cfg = SystemConfig {
            noise_var: 1e-30,
            power: 1e10,
            beta_t: 0.0,
            beta_r: 0.0,
            sigma_d_sq: 0.0,
            sigma_m_sq: 0.0,
            ..small_cfg(2, 3, 1, 1, 1)
        };
        let (p, w, theta) = random_instance(&cfg, 9);
        assert!(matches!(
            wiener_equalizer(&p, &w, &theta),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn sample_without_impairments_is_ideal_only() {
        let cfg = SystemConfig {
            beta_t: 0.0,
            beta_r: 0.0,
            ..small_cfg(3, 3, 2, 2, 2)
        };
        let (p, w, theta) = random_instance(&cfg, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = sample_true_channel(&p.est, &p.cfg, &mut rng);
        let eq = wiener_equalizer(&p, &w, &theta).unwrap();
        let coeffs = theta
            .theta()
            .iter()
            .zip(&s.phase_noise)
            .map(|(&t, &dp)| t * cis(dp));
        let h = combine(&s.h_d, &s.g_list, coeffs);
        let e = &eq.c * &h * &w.w - identity(2);
        let ideal = &e * e.adjoint() + &eq.c * eq.c.adjoint() * c(cfg.noise_var);
        assert!(max_abs_diff(&mse_matrix_sample(&p, &eq, &w, &s, &theta), &ideal) < 1e-12);
    }

    #[test]
    fn sample_matrix_is_psd_and_classical_at_sample_wiener() {
        let cfg = small_cfg(3, 3, 2, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..10 {
            let (p, w, theta) = random_instance(&cfg, 200 + seed);
            let eq = wiener_equalizer(&p, &w, &theta).unwrap();
            let s = sample_true_channel(&p.est, &p.cfg, &mut rng);
            let e = mse_matrix_sample(&p, &eq, &w, &s, &theta);
            assert!(hermitian_eigenvalues(&e)[0] >= -1e-10);
        }
        // impairments zero, C = per-sample Wiener
        let cfg0 = SystemConfig {
            beta_t: 0.0,
            beta_r: 0.0,
            ..cfg
        };
        let (p, w, theta) = random_instance(&cfg0, 300);
        let s = sample_true_channel(&p.est, &p.cfg, &mut rng);
        let coeffs = theta
            .theta()
            .iter()
            .zip(&s.phase_noise)
            .map(|(&t, &dp)| t * cis(dp));
        let h = combine(&s.h_d, &s.g_list, coeffs);
        let hw = &h * &w.w;
        let y = &hw * hw.adjoint() + identity(3) * c(cfg0.noise_var);
        let yinv = y.try_inverse().unwrap();
        let eq = Equalizer {
            c: hw.adjoint() * &yinv,
        };
        let expect = 2.0 - trace(&(hw.adjoint() * &yinv * &hw)).re;
        let got = trace(&mse_matrix_sample(&p, &eq, &w, &s, &theta)).re;
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn mc_degenerate_case_is_exact() {
        // no CSI error and no reflected path: nothing random remains
        let cfg = small_cfg(2, 2, 2, 2, 16);
        let (mut p, w, theta) = random_instance(&cfg, 12);
        p.est.sigma_d_sq = 0.0;
        p.est.sigma_m_sq = 0.0;
        for g in &mut p.est.g_bars {
            g.fill(c(0.0));
        }
        let eq = wiener_equalizer(&p, &w, &theta).unwrap();
        let f = total_average_mse(&p, &eq, &w, &theta);
        let (mean, se) =
            mc_average_mse(&p, &eq, &w, &theta, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((mean - f).abs() < 1e-10, "{mean} vs {f}");
        assert!(se < 1e-10);
    }

    #[test]
    fn mc_fine_phases_without_csi_error() {
        let cfg = small_cfg(2, 2, 2, 2, 16);
        let (mut p, w, theta) = random_instance(&cfg, 13);
        p.est.sigma_d_sq = 0.0;
        p.est.sigma_m_sq = 0.0;
        let eq = wiener_equalizer(&p, &w, &theta).unwrap();
        let f = total_average_mse(&p, &eq, &w, &theta);
        let (mean, _) =
            mc_average_mse(&p, &eq, &w, &theta, 200, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!((mean - f).abs() < 1e-6 * f, "{mean} vs {f}");
    }

    #[test]
    fn mc_matches_closed_form() {
        for rx in [ReceiverDistortion::Approximate, ReceiverDistortion::Exact] {
            let cfg = small_cfg(2, 2, 2, 4, 2);
            let (p, w, theta) = random_instance(&cfg, 14);
            let p = p.with_receiver_distortion(rx);
            let eq = wiener_equalizer(&p, &w, &theta).unwrap();
            let f = total_average_mse(&p, &eq, &w, &theta);
            let (mean, se) = mc_average_mse(
                &p,
                &eq,
                &w,
                &theta,
                20_000,
                &mut ChaCha8Rng::seed_from_u64(3),
            )
            .unwrap();
            assert!(
                (mean - f).abs() <= (3.0 * se).max(0.01 * f),
                "{rx:?}: {mean} ± {se} vs {f}"
            );
        }
    }

    #[test]
    fn mc_standard_error_scaling() {
        let cfg = small_cfg(2, 2, 2, 4, 2);
        let (p, w, theta) = random_instance(&cfg, 15);
        let eq = wiener_equalizer(&p, &w, &theta).unwrap();
        let (_, se1) = mc_average_mse(
            &p,
            &eq,
            &w,
            &theta,
            8_000,
            &mut ChaCha8Rng::seed_from_u64(4),
        )
        .unwrap();
        let (_, se2) = mc_average_mse(
            &p,
            &eq,
            &w,
            &theta,
            16_000,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let ratio = se2 / se1;
        assert!(
            (ratio - 1.0 / 2f64.sqrt()).abs() < 0.2 / 2f64.sqrt(),
            "{ratio}"
        );
    }

    #[test]
    fn phase_vector_membership() {
        let cb = phase_codebook(2).unwrap();
        assert!(PhaseVector::from_phases(&[0.1], &cb).is_err());
        let v = PhaseVector::from_phases(&[std::f64::consts::FRAC_PI_2 + 1e-12], &cb).unwrap();
        assert_eq!(v.phases()[0], std::f64::consts::FRAC_PI_2);
        let id = PhaseVector::identity(3, &cb);
        assert!(id.theta().iter().all(|z| (z - c(1.0)).norm() == 0.0));
        let r = PhaseVector::random(50, &cb, &mut ChaCha8Rng::seed_from_u64(6));
        assert!(r.is_on_codebook(&cb));
        assert!(r.theta().iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rescale_restores_feasibility() {
        let cfg = small_cfg(2, 2, 2, 1, 1);
        let w = Precoder::new(CMat::from_element(2, 2, c(3.0)));
        assert!(!w.is_feasible(&cfg, 0.0));
        let r = w.rescaled_into(&cfg);
        assert!(r.is_feasible(&cfg, 1e-12));
        assert!(((1.0 + 0.0064) * r.power() - 1.0).abs() < 1e-12);
    }
}
