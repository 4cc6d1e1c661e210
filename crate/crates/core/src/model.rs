//! System configuration, discrete phase codebooks and the RIS phase-noise
//! constants ε_b and ω_b.
//!
//! All quantities here are linear scale (watts, not dBm). Conversion happens
//! once at the configuration-file boundary through [`dbm_to_watts`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of quantization bits.
pub const MAX_BITS: u32 = 16;

/// Resolution used to emulate continuous phases (spacing below 4e-4 rad).
pub const CONTINUOUS_BITS: u32 = 14;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas.
    pub n_tx: usize,
    /// User antennas.
    pub n_rx: usize,
    /// Data streams.
    pub n_streams: usize,
    /// RIS elements.
    pub n_ris: usize,
    /// Phase quantization bits.
    pub bits: u32,
    /// Transmit power budget in watts.
    pub power: f64,
    /// Noise variance in watts.
    pub noise_var: f64,
    pub beta_t: f64,
    pub beta_r: f64,
    pub sigma_d_sq: f64,
    pub sigma_m_sq: f64,
}

impl SystemConfig {
    /// The full-size operating point: 8×8 MIMO, 8 streams, 64 RIS elements,
    /// 2-bit phases, 20 dBm power, −100 dBm noise, β = 0.08, σ² = 0.01.
    pub fn paper_default() -> Self {
        Self {
            n_tx: 8,
            n_rx: 8,
            n_streams: 8,
            n_ris: 64,
            bits: 2,
            power: dbm_to_watts(20.0),
            noise_var: dbm_to_watts(-100.0),
            beta_t: 0.08,
            beta_r: 0.08,
            sigma_d_sq: 0.01,
            sigma_m_sq: 0.01,
        }
    }

    /// Scaled-down default used for quick sweeps: 4×4, 4 streams, M = 16.
    pub fn desk_default() -> Self {
        Self {
            n_tx: 4,
            n_rx: 4,
            n_streams: 4,
            n_ris: 16,
            ..Self::paper_default()
        }
    }

    /// Same configuration with ideal transceivers and perfect CSI.
    pub fn idealized(&self) -> Self {
        Self {
            beta_t: 0.0,
            beta_r: 0.0,
            sigma_d_sq: 0.0,
            sigma_m_sq: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(self) -> Result<Self> {
        validate_config(self)
    }
}

/// Checks every invariant of a [`SystemConfig`], returning it unchanged.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig> {
    let bad = |msg: String| Err(Error::InvalidConfig(msg));
    for (name, v) in [
        ("n_tx", cfg.n_tx),
        ("n_rx", cfg.n_rx),
        ("n_streams", cfg.n_streams),
        ("n_ris", cfg.n_ris),
    ] {
        if v == 0 {
            return bad(format!("{name} must be positive"));
        }
    }
    if cfg.n_streams > cfg.n_tx.min(cfg.n_rx) {
        return bad(format!(
            "n_streams ({}) exceeds min(n_tx, n_rx) = {}",
            cfg.n_streams,
            cfg.n_tx.min(cfg.n_rx)
        ));
    }
    check_bits(cfg.bits)?;
    if !(cfg.power.is_finite() && cfg.power > 0.0) {
        return bad(format!("power must be positive, got {}", cfg.power));
    }
    if !(cfg.noise_var.is_finite() && cfg.noise_var > 0.0) {
        return bad(format!("noise_var must be positive, got {}", cfg.noise_var));
    }
    for (name, v) in [("beta_t", cfg.beta_t), ("beta_r", cfg.beta_r)] {
        if !(0.0..=1.0).contains(&v) {
            return bad(format!("{name} must lie in [0, 1], got {v}"));
        }
    }
    for (name, v) in [
        ("sigma_d_sq", cfg.sigma_d_sq),
        ("sigma_m_sq", cfg.sigma_m_sq),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return bad(format!("{name} must be non-negative, got {v}"));
        }
    }
    Ok(cfg)
}

fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::InvalidConfig(format!(
            "bits must lie in 1..={MAX_BITS}, got {bits}"
        )));
    }
    Ok(())
}

/// The feasible phase set `{−π + k·2π/2^b}` of a b-bit RIS element.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCodebook {
    bits: u32,
    phases: Vec<f64>,
}

pub fn phase_codebook(bits: u32) -> Result<PhaseCodebook> {
    check_bits(bits)?;
    let n = 1usize << bits;
    let step = 2.0 * PI / n as f64;
    let phases = (0..n).map(|k| -PI + k as f64 * step).collect();
    Ok(PhaseCodebook { bits, phases })
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Shortest angular distance on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

impl PhaseCodebook {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.phases.len() as f64
    }

    /// Index of the codebook phase closest to `angle` in circular distance.
    /// Exact ties go to the smaller phase value.
    pub fn nearest_index(&self, angle: f64) -> usize {
        let n = self.phases.len();
        let x = (wrap_angle(angle) + PI) / self.step();
        let lo = (x.floor() as usize).min(n - 1);
        let hi = (lo + 1) % n;
        let d_lo = circular_distance(angle, self.phases[lo]);
        let d_hi = circular_distance(angle, self.phases[hi]);
        if d_lo < d_hi {
            lo
        } else if d_hi < d_lo {
            hi
        } else if self.phases[lo] <= self.phases[hi] {
            lo
        } else {
            hi
        }
    }

    pub fn nearest(&self, angle: f64) -> f64 {
        self.phases[self.nearest_index(angle)]
    }

    /// Whether `phase` is a member up to `tol` radians.
    pub fn contains(&self, phase: f64, tol: f64) -> bool {
        circular_distance(phase, self.nearest(phase)) <= tol
    }
}

/// The average phase distortion level ε_b and the shrinkage factor ω_b of
/// uniform quantization noise on `[−π/2^b, π/2^b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionConstants {
    pub eps_b: f64,
    pub omega_b: f64,
}

pub fn distortion_constants(bits: u32) -> Result<DistortionConstants> {
    check_bits(bits)?;
    let x = PI / (1u64 << bits) as f64;
    let omega_b = x.sin() / x;
    let four_b = 4f64.powi(bits as i32);
    let eps_b = 1.0 - four_b / (PI * PI) * x.sin().powi(2);
    Ok(DistortionConstants { eps_b, omega_b })
}

impl DistortionConstants {
    /// Constants of an ideal (continuous, noiseless) RIS.
    pub fn ideal() -> Self {
        Self {
            eps_b: 0.0,
            omega_b: 1.0,
        }
    }
}
