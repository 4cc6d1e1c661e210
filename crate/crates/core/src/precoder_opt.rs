//! One minorize-maximize step for the transmit precoder.
//!
//! At the current point `W_t` the objective `g_MSE(W) = Tr(XᴴY⁻¹X)` is bounded
//! from below by the concave quadratic
//! `g_low(W) = 2Re Tr(rhsᴴW) − Tr(Z WWᴴ) − const`, tight at `W_t`. Its
//! maximizer under the power constraint is `(Z + λI)⁻¹·rhs`, with the
//! multiplier found by bisection on the monotone power curve.

use crate::error::{Error, Result};
use crate::linalg::{
    c, diag_part, fro_norm_sq, hermitian_eigen, hermitian_part, identity, inner_re, trace, CMat,
    HermitianFactor,
};
use crate::model::SystemConfig;
use crate::mse::{received_covariance, PhaseVector, Precoder, Problem, ReceiverDistortion};

#[derive(Debug, Clone)]
pub struct PrecoderSurrogate {
    /// `Ŵ_t = X_tᴴ Y_t⁻¹` (d×N_R).
    pub w_hat: CMat,
    /// `Z = Z^cas + ε_b·Z^com + Z^SI` (N_T×N_T, Hermitian PSD).
    pub z: CMat,
    /// `H̄_θᴴ Ŵ_tᴴ` (N_T×d).
    pub rhs: CMat,
    /// `(1+β_R²)σ²·Tr(Ŵ_tᴴŴ_t)`, the W-independent part.
    pub const_term: f64,
}

impl PrecoderSurrogate {
    /// `g_low(W; W_t)`.
    pub fn value(&self, w: &Precoder) -> f64 {
        2.0 * inner_re(&self.rhs, &w.w) - inner_re(&w.w, &(&self.z * &w.w)) - self.const_term
    }
}

/// `BᴴAB + β_T²·diag(BᴴAB) + β_R²·Bᴴdiag(A)B`, plus the cross term in the
/// exact receiver-distortion model.
fn z_block(p: &Problem, b: &CMat, a: &CMat, a_diag: &CMat) -> CMat {
    let (bt, br) = (p.cfg.beta_t.powi(2), p.cfg.beta_r.powi(2));
    let m1 = b.adjoint() * a * b;
    let m2 = b.adjoint() * a_diag * b;
    let mut z = &m1 + diag_part(&m1) * c(bt) + &m2 * c(br);
    if p.rx == ReceiverDistortion::Exact {
        z += diag_part(&m2) * c(bt * br);
    }
    z
}

pub fn build_surrogate(
    p: &Problem,
    w_t: &Precoder,
    theta: &PhaseVector,
) -> Result<PrecoderSurrogate> {
    let cov = received_covariance(p, w_t, theta);
    let h = &cov.h_bar_theta;
    let x = h * &w_t.w;
    let f = HermitianFactor::new(&cov.y_total)?;
    let w_hat = f.solve(&x).adjoint();
    let a = w_hat.adjoint() * &w_hat;
    let a_diag = diag_part(&a);
    let tr_a = trace(&a).re;

    let mut z_com = CMat::zeros(p.n_tx(), p.n_tx());
    for g in &p.est.g_bars {
        z_com += z_block(p, g, &a, &a_diag);
    }
    let z_si = identity(p.n_tx()) * c(p.si_coeff() * p.est.sigma_total() * tr_a);
    let z = z_block(p, h, &a, &a_diag) + z_com * c(p.consts.eps_b) + z_si;

    Ok(PrecoderSurrogate {
        rhs: h.adjoint() * w_hat.adjoint(),
        z: hermitian_part(&z),
        const_term: (1.0 + p.cfg.beta_r.powi(2)) * p.cfg.noise_var * tr_a,
        w_hat,
    })
}

/// `W* = (Z + λI)⁻¹·rhs` by a Hermitian solve.
pub fn optimal_precoder(s: &PrecoderSurrogate, lambda: f64) -> Result<Precoder> {
    let n = s.z.nrows();
    let f = HermitianFactor::new(&(&s.z + identity(n) * c(lambda)))?;
    Ok(Precoder::new(f.solve(&s.rhs)))
}

/// Eigen-decomposition of `Z` projected onto `rhs`, enough to evaluate the
/// power curve `Tr(W(λ)W(λ)ᴴ)` for any λ without further solves.
struct PowerCurve {
    eigenvalues: Vec<f64>,
    u: CMat,
    /// `[Uᴴ rhs rhsᴴ U]_ii`.
    weights: Vec<f64>,
}

impl PowerCurve {
    fn new(s: &PrecoderSurrogate) -> Self {
        let (vals, u) = hermitian_eigen(&s.z);
        let proj = u.adjoint() * &s.rhs;
        let weights = (0..proj.nrows())
            .map(|i| proj.row(i).norm_squared())
            .collect();
        Self {
            eigenvalues: vals.into_iter().map(|v| v.max(0.0)).collect(),
            u,
            weights,
        }
    }

    fn power(&self, lambda: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .map(|(&l, &wt)| wt / (l + lambda).powi(2))
            .sum()
    }

    fn precoder(&self, s: &PrecoderSurrogate, lambda: f64) -> Precoder {
        let proj = self.u.adjoint() * &s.rhs;
        let mut scaled = proj;
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            let k = c(1.0 / (l + lambda));
            scaled.row_mut(i).iter_mut().for_each(|z| *z *= k);
        }
        Precoder::new(&self.u * scaled)
    }

    fn is_invertible(&self) -> bool {
        let hi = self.eigenvalues.last().copied().unwrap_or(0.0);
        self.eigenvalues[0] > 1e-12 * hi
    }
}

/// Left-hand side of the power equation, `Σ_i [Uᴴ rhs rhsᴴ U]_ii / (λ_i + λ)²`.
pub fn power_equation_lhs(s: &PrecoderSurrogate, lambda: f64) -> f64 {
    PowerCurve::new(s).power(lambda)
}

/// The constrained maximizer of the surrogate: `λ* = 0` when the
/// unconstrained solution is feasible, otherwise the λ making the power
/// constraint active.
pub fn solve_lambda(s: &PrecoderSurrogate, cfg: &SystemConfig) -> Result<(f64, Precoder)> {
    let target = cfg.power / (1.0 + cfg.beta_t.powi(2));
    let rhs_norm_sq = fro_norm_sq(&s.rhs);
    if rhs_norm_sq == 0.0 {
        return Ok((
            0.0,
            Precoder::new(CMat::zeros(s.rhs.nrows(), s.rhs.ncols())),
        ));
    }
    let curve = PowerCurve::new(s);
    if curve.is_invertible() && curve.power(0.0) <= target {
        return Ok((0.0, curve.precoder(s, 0.0)));
    }

    // power(λ) ≤ ‖rhs‖²/λ², so this bracket is feasible
    let mut hi = (rhs_norm_sq / target).sqrt();
    let mut doublings = 0;
    while curve.power(hi) > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Internal(
                "no feasible multiplier bracket found".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if curve.power(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if target - curve.power(hi) <= 1e-13 * target {
            break;
        }
    }
    Ok((hi, curve.precoder(s, hi)))
}

/// Builds the surrogate at `w_t` and returns its constrained maximizer.
pub fn precoder_step(p: &Problem, w_t: &Precoder, theta: &PhaseVector) -> Result<Precoder> {
    let s = build_surrogate(p, w_t, theta)?;
    Ok(solve_lambda(&s, &p.cfg)?.1)
}
