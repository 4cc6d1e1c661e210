//! Two-tier minorize-maximize update of the discrete RIS phases.
//!
//! With the precoder fixed, `g_MSE` is bounded below by a quadratic in the
//! extended vector `θ̃ = [1, θᵀ]ᵀ`:
//! `g_low(θ) = 2Re{θᴴ(ξ̄₂ − k̄₂)} − θᴴK̄₃θ + const`. The quadratic term is in
//! turn minorized with the Lipschitz constant `λ_max(K̄₃)`, leaving a linear
//! objective that every element maximizes on its own by picking the codebook
//! phase closest to `∠b_m`.
//!
//! The `(M+1)×(M+1)` reduced matrix is assembled from block inner products
//! rather than from the `(M+1)N_T²`-sized Kronecker form.

use num_complex::Complex64;

use crate::channels::ChannelEstimate;
use crate::error::Result;
use crate::linalg::{
    c, diag_part, hermitian_part, inner, inner_re, lambda_max, trace, CMat, CVec, HermitianFactor,
};
use crate::model::{DistortionConstants, PhaseCodebook};
use crate::mse::{received_covariance, PhaseVector, Precoder, Problem};

/// `H_cat = [H̄_d, ω_b Ḡ_1, …, ω_b Ḡ_M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatenatedChannel {
    pub h_cat: CMat,
    n_tx: usize,
}

impl ConcatenatedChannel {
    pub fn n_blocks(&self) -> usize {
        self.h_cat.ncols() / self.n_tx
    }

    /// Block `p` (0 is the direct channel).
    pub fn block(&self, p: usize) -> CMat {
        self.h_cat.columns(p * self.n_tx, self.n_tx).into_owned()
    }
}

pub fn concatenated_channel(
    est: &ChannelEstimate,
    consts: &DistortionConstants,
) -> ConcatenatedChannel {
    let nt = est.n_tx();
    let mut h_cat = CMat::zeros(est.n_rx(), (est.n_ris() + 1) * nt);
    h_cat.columns_mut(0, nt).copy_from(&est.h_d_bar);
    for (m, g) in est.g_bars.iter().enumerate() {
        h_cat
            .columns_mut((m + 1) * nt, nt)
            .copy_from(&(g * c(consts.omega_b)));
    }
    ConcatenatedChannel { h_cat, n_tx: nt }
}

#[derive(Debug, Clone)]
pub struct QuadraticSurrogate {
    /// Full reduced linear term ξ̄ (length M+1).
    pub xi_bar: CVec,
    /// Full reduced quadratic term K̄ ((M+1)×(M+1)).
    pub k_bar: CMat,
    pub xi_bar_2: CVec,
    pub k_bar_2: CVec,
    pub k_bar_3: CMat,
    /// `λ_max(K̄₃)`.
    pub lip: f64,
    pub const_term: f64,
    /// `g_MSE` at the expansion point, where the surrogate is tight.
    pub g_at_expansion: f64,
}

impl QuadraticSurrogate {
    /// `g_low(θ; θ_t)`.
    pub fn value(&self, theta: &CVec) -> f64 {
        let lin = &self.xi_bar_2 - &self.k_bar_2;
        let quad = (theta.adjoint() * &self.k_bar_3 * theta)[(0, 0)].re;
        2.0 * theta.dotc(&lin).re - quad + self.const_term
    }

    /// `g_low` written directly in the extended vector `θ̃`.
    pub fn value_extended(&self, theta: &CVec) -> f64 {
        let ext = extend(theta);
        let quad = (ext.adjoint() * &self.k_bar * &ext)[(0, 0)].re;
        let k1 = self.k_bar[(0, 0)].re;
        let xi1 = self.xi_bar[0].re;
        2.0 * ext.dotc(&self.xi_bar).re - quad + self.const_term - 2.0 * xi1 + k1
    }

    /// Euclidean gradient of `g_low` with respect to `θ*`, times two:
    /// `2(ξ̄₂ − k̄₂ − K̄₃θ)`.
    pub fn euclidean_gradient(&self, theta: &CVec) -> CVec {
        (&self.xi_bar_2 - &self.k_bar_2 - &self.k_bar_3 * theta) * c(2.0)
    }
}

pub(crate) fn extend(theta: &CVec) -> CVec {
    let mut ext = CVec::zeros(theta.len() + 1);
    ext[0] = c(1.0);
    ext.rows_mut(1, theta.len()).copy_from(theta);
    ext
}

pub fn build_quadratic(
    p: &Problem,
    w: &Precoder,
    theta_t: &PhaseVector,
) -> Result<QuadraticSurrogate> {
    let cov = received_covariance(p, w, theta_t);
    let x = &cov.h_bar_theta * &w.w;
    let f = HermitianFactor::new(&cov.y_total)?;
    let y_inv_x = f.solve(&x);
    let g_t = inner_re(&x, &y_inv_x);
    let a = &y_inv_x * y_inv_x.adjoint();
    let a_diag = diag_part(&a);
    let ff = &y_inv_x * w.w.adjoint();

    let ww = &w.w * w.w.adjoint();
    let s = p.tx_cov(&ww);
    let r = p.rx_source(&ww, &s);
    let br = c(p.cfg.beta_r.powi(2));

    let cat = concatenated_channel(&p.est, &p.consts);
    let n_blocks = cat.n_blocks();
    let len = p.n_rx() * p.n_tx();
    let mut b_mat = CMat::zeros(len, n_blocks);
    let mut q_mat = CMat::zeros(len, n_blocks);
    let mut xi_bar = CVec::zeros(n_blocks);
    for q in 0..n_blocks {
        let b = cat.block(q);
        let qq = &a * &b * &s + &a_diag * &b * r * br;
        xi_bar[q] = inner(&b, &ff);
        b_mat.column_mut(q).copy_from_slice(b.as_slice());
        q_mat.column_mut(q).copy_from_slice(qq.as_slice());
    }
    let k_bar = hermitian_part(&(b_mat.adjoint() * q_mat));

    let m = n_blocks - 1;
    let k_bar_3 = k_bar.view((1, 1), (m, m)).into_owned();
    let k_bar_2 = k_bar.view((1, 0), (m, 1)).column(0).into_owned();
    let xi_bar_2 = xi_bar.rows(1, m).into_owned();
    let rest = &cov.t_com * c(p.consts.eps_b) + &cov.t_si;
    let const_term = 2.0 * xi_bar[0].re - k_bar[(0, 0)].re - trace(&(&a * rest)).re;
    Ok(QuadraticSurrogate {
        lip: lambda_max(&k_bar_3),
        xi_bar,
        k_bar,
        xi_bar_2,
        k_bar_2,
        k_bar_3,
        const_term,
        g_at_expansion: g_t,
    })
}

/// One majorized update: `b = λ_max θ_t − K̄₃θ_t + ξ̄₂ − k̄₂`, then each
/// element independently snaps to the codebook phase nearest `∠b_m`.
pub fn mm_phase_step(
    theta_t: &PhaseVector,
    q: &QuadraticSurrogate,
    codebook: &PhaseCodebook,
) -> PhaseVector {
    let th = theta_t.theta();
    let b = th * c(q.lip) - &q.k_bar_3 * th + &q.xi_bar_2 - &q.k_bar_2;
    let angles: Vec<f64> = b
        .iter()
        .zip(theta_t.phases())
        .map(|(bm, &prev)| {
            if *bm == Complex64::new(0.0, 0.0) {
                prev
            } else {
                bm.arg()
            }
        })
        .collect();
    PhaseVector::quantize(&angles, codebook)
}

/// Result of an iterative phase update.
#[derive(Debug, Clone)]
pub struct PhaseOutcome {
    pub theta: PhaseVector,
    pub iterations: usize,
    /// `g_MSE` after each accepted step, starting from the input point.
    pub trace: Vec<f64>,
}

pub const MM_INNER_TOL: f64 = 1e-6;
pub const MM_INNER_MAX_ITER: usize = 50;

/// Repeats rebuild-and-step until the relative change of the objective drops
/// below `tol` or `max_iter` steps were taken.
pub fn mm_phase_optimize(
    p: &Problem,
    w: &Precoder,
    theta_0: &PhaseVector,
    tol: f64,
    max_iter: usize,
) -> Result<PhaseOutcome> {
    let mut theta = theta_0.clone();
    let mut q = build_quadratic(p, w, &theta)?;
    let mut trace = vec![q.g_at_expansion];
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let next = mm_phase_step(&theta, &q, &p.codebook);
        if next == theta {
            break;
        }
        let qn = build_quadratic(p, w, &next)?;
        let delta = qn.g_at_expansion - q.g_at_expansion;
        theta = next;
        q = qn;
        trace.push(q.g_at_expansion);
        if delta.abs() <= tol * q.g_at_expansion.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(PhaseOutcome {
        theta,
        iterations,
        trace,
    })
}
