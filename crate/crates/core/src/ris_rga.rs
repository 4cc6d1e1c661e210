//! Modified Riemannian gradient ascent over the discrete phase set.
//!
//! The Euclidean gradient of the phase surrogate is projected onto the
//! tangent space of the unit-modulus manifold, a step is taken, and the
//! result is retracted element-wise onto the codebook. A backtracking line
//! search keeps the surrogate monotone.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::model::PhaseCodebook;
use crate::mse::{PhaseVector, Precoder, Problem};
use crate::ris_mm::{build_quadratic, PhaseOutcome, QuadraticSurrogate};

#[derive(Debug, Clone, PartialEq)]
pub struct RgaConfig {
    /// Initial step size. `None` uses the inverse Lipschitz constant
    /// `1/λ_max(K̄₃)` of the surrogate being maximized.
    pub rho_0: Option<f64>,
    pub shrink: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl Default for RgaConfig {
    fn default() -> Self {
        Self {
            rho_0: None,
            shrink: 0.5,
            tol: 1e-6,
            max_iter: 100,
            max_backtracks: 30,
        }
    }
}

impl RgaConfig {
    pub fn validate(self) -> Result<Self> {
        if let Some(r) = self.rho_0 {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "rho_0 must be positive, got {r}"
                )));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iter == 0 || self.max_backtracks == 0 {
            return Err(Error::InvalidConfig(
                "max_iter and max_backtracks must be positive".into(),
            ));
        }
        Ok(self)
    }
}

/// `euclid − Re{euclid ⊙ θ*} ⊙ θ` with `euclid = 2(ξ̄₂ − k̄₂ − K̄₃θ)`.
pub fn riemannian_gradient(theta: &CVec, q: &QuadraticSurrogate) -> CVec {
    let euclid = q.euclidean_gradient(theta);
    tangent_projection(&euclid, theta)
}

pub(crate) fn tangent_projection(v: &CVec, theta: &CVec) -> CVec {
    CVec::from_iterator(
        v.len(),
        v.iter()
            .zip(theta.iter())
            .map(|(&e, &t)| e - t * c((e * t.conj()).re)),
    )
}

/// Element-wise projection onto the codebook by circular distance.
pub fn retract(theta_prime: &CVec, codebook: &PhaseCodebook) -> Result<PhaseVector> {
    if let Some(index) = theta_prime
        .iter()
        .position(|z| *z == Complex64::new(0.0, 0.0))
    {
        return Err(Error::DegenerateDirection { index });
    }
    let angles: Vec<f64> = theta_prime.iter().map(|z| z.arg()).collect();
    Ok(PhaseVector::quantize(&angles, codebook))
}

/// Like [`retract`], but a zero entry keeps its previous phase.
fn guarded_retract(
    theta_prime: &CVec,
    prev: &PhaseVector,
    codebook: &PhaseCodebook,
) -> PhaseVector {
    let angles: Vec<f64> = theta_prime
        .iter()
        .zip(prev.phases())
        .map(|(z, &p)| {
            if *z == Complex64::new(0.0, 0.0) {
                p
            } else {
                z.arg()
            }
        })
        .collect();
    PhaseVector::quantize(&angles, codebook)
}

/// Gradient ascent on the surrogate built once at `theta_0`.
pub fn rga_optimize(
    p: &Problem,
    w: &Precoder,
    theta_0: &PhaseVector,
    rga: &RgaConfig,
) -> Result<PhaseOutcome> {
    let q = build_quadratic(p, w, theta_0)?;
    Ok(rga_on_surrogate(&q, theta_0, &p.codebook, rga))
}

/// The inner loop on a fixed surrogate; `trace` holds surrogate values.
pub fn rga_on_surrogate(
    q: &QuadraticSurrogate,
    theta_0: &PhaseVector,
    codebook: &PhaseCodebook,
    rga: &RgaConfig,
) -> PhaseOutcome {
    let rho_0 = rga
        .rho_0
        .unwrap_or_else(|| if q.lip > 0.0 { 1.0 / q.lip } else { 1.0 });
    let mut theta = theta_0.clone();
    let mut value = q.value(theta.theta());
    let mut trace = vec![value];
    let mut iterations = 0;
    for it in 1..=rga.max_iter {
        iterations = it;
        let grad = riemannian_gradient(theta.theta(), q);
        if grad.iter().all(|z| z.norm() == 0.0) {
            break;
        }
        let mut rho = rho_0;
        let mut accepted = None;
        for _ in 0..rga.max_backtracks {
            let tentative = theta.theta() + &grad * c(rho);
            let cand = guarded_retract(&tentative, &theta, codebook);
            if cand != theta {
                let v = q.value(cand.theta());
                if v > value {
                    accepted = Some((cand, v));
                    break;
                }
            }
            rho *= rga.shrink;
        }
        let Some((cand, v)) = accepted else { break };
        let delta = v - value;
        theta = cand;
        value = v;
        trace.push(value);
        if delta < rga.tol {
            break;
        }
    }
    PhaseOutcome {
        theta,
        iterations,
        trace,
    }
}
