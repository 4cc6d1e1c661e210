//! Channel generation: log-distance path loss with log-normal shadowing,
//! ULA/UPA steering vectors, Rayleigh direct and Rician compound channel
//! estimates, and sampling of true channels under statistical CSI error and
//! RIS phase quantization noise.
//!
//! Every generator takes an explicit random source; given the same seed the
//! output is bit-identical.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cis, cscg_matrix, CMat, CVec};
use crate::model::SystemConfig;

/// Rician factor of the compound channels.
pub const RICIAN_FACTOR: f64 = 0.75;

/// Element spacing over wavelength used when none is given.
pub const DEFAULT_SPACING_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_pos: [f64; 3],
    pub ris_pos: [f64; 3],
    pub user_pos: [f64; 3],
    pub pl0_db: f64,
    pub alpha_bu: f64,
    pub alpha_br: f64,
    pub alpha_ru: f64,
    pub shadow_std_db: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs_pos: [0.0, 0.0, 5.0],
            ris_pos: [0.0, 85.0, 10.0],
            user_pos: [5.0, 120.0, 1.5],
            pl0_db: 30.0,
            alpha_bu: 3.75,
            alpha_br: 2.2,
            alpha_ru: 2.2,
            shadow_std_db: 3.0,
        }
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl Geometry {
    pub fn validate(self) -> Result<Self> {
        for (name, v) in [
            ("alpha_bu", self.alpha_bu),
            ("alpha_br", self.alpha_br),
            ("alpha_ru", self.alpha_ru),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.shadow_std_db.is_finite() && self.shadow_std_db >= 0.0) {
            return Err(Error::InvalidConfig(
                "shadow_std_db must be non-negative".into(),
            ));
        }
        for (name, d) in [
            ("BS-user", self.d_bu()),
            ("BS-RIS", self.d_br()),
            ("RIS-user", self.d_ru()),
        ] {
            if d == 0.0 {
                return Err(Error::InvalidConfig(format!("{name} positions coincide")));
            }
        }
        Ok(self)
    }

    pub fn d_bu(&self) -> f64 {
        distance(&self.bs_pos, &self.user_pos)
    }

    pub fn d_br(&self) -> f64 {
        distance(&self.bs_pos, &self.ris_pos)
    }

    pub fn d_ru(&self) -> f64 {
        distance(&self.ris_pos, &self.user_pos)
    }
}

/// `PL₀ + 10·α·log₁₀(d) + X_σ` in dB, `X_σ ~ N(0, σ²)`.
pub fn path_loss_db<R: Rng + ?Sized>(
    pl0_db: f64,
    distance_m: f64,
    exponent: f64,
    shadow_std_db: f64,
    rng: &mut R,
) -> Result<f64> {
    if distance_m.is_nan() || distance_m < 1.0 {
        return Err(Error::Domain(format!(
            "distance {distance_m} m is below the 1 m reference distance"
        )));
    }
    let shadow = if shadow_std_db > 0.0 {
        Normal::new(0.0, shadow_std_db)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(rng)
    } else {
        0.0
    };
    Ok(pl0_db + 10.0 * exponent * distance_m.log10() + shadow)
}

pub fn db_to_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Uniform linear array response, `(1/√n)·exp(j2π·r·k·sin ψ)`.
pub fn ula_steering(n: usize, psi: f64, spacing_ratio: f64) -> CVec {
    let norm = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |k, _| {
        cis(2.0 * PI * spacing_ratio * k as f64 * psi.sin()) * c(norm)
    })
}

/// Uniform planar array response with row-major flattening `p·m_y + q`.
pub fn upa_steering(psi: f64, theta: f64, m_x: usize, m_y: usize, spacing_ratio: f64) -> CVec {
    let m = m_x * m_y;
    let norm = 1.0 / (m as f64).sqrt();
    CVec::from_fn(m, |idx, _| {
        let (p, q) = ((idx / m_y) as f64, (idx % m_y) as f64);
        let phase = 2.0 * PI * spacing_ratio * (p * psi.sin() * theta.sin() + q * theta.sin());
        cis(phase) * c(norm)
    })
}

/// Near-square factorization `m_x · m_y = m` with `m_x ≤ m_y`.
pub fn upa_dims(m: usize) -> (usize, usize) {
    let mut best = 1;
    let mut k = 1;
    while k * k <= m {
        if m.is_multiple_of(k) {
            best = k;
        }
        k += 1;
    }
    (best, m / best)
}

/// Angles and gains of the single-path (LoS) BS→RIS→user geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LoSAngles {
    pub psi_tx: f64,
    pub psi_rx: f64,
    pub psi_a: f64,
    pub theta_a: f64,
    pub psi_d: f64,
    pub theta_d: f64,
    pub nu_i: num_complex::Complex64,
    pub nu_r: num_complex::Complex64,
    pub spacing_ratio: f64,
    pub m_x: usize,
    pub m_y: usize,
}

impl LoSAngles {
    /// Azimuths uniform on `[−π/2, π/2]`, elevations on `[0, π/2]`, unit
    /// gains with uniform phase.
    pub fn random<R: Rng + ?Sized>(n_ris: usize, rng: &mut R) -> Self {
        let az = Uniform::new_inclusive(-PI / 2.0, PI / 2.0).unwrap();
        let el = Uniform::new_inclusive(0.0, PI / 2.0).unwrap();
        let ph = Uniform::new(-PI, PI).unwrap();
        let (m_x, m_y) = upa_dims(n_ris);
        Self {
            psi_tx: az.sample(rng),
            psi_rx: az.sample(rng),
            psi_a: az.sample(rng),
            theta_a: el.sample(rng),
            psi_d: az.sample(rng),
            theta_d: el.sample(rng),
            nu_i: cis(ph.sample(rng)),
            nu_r: cis(ph.sample(rng)),
            spacing_ratio: DEFAULT_SPACING_RATIO,
            m_x,
            m_y,
        }
    }

    pub fn n_ris(&self) -> usize {
        self.m_x * self.m_y
    }

    pub fn a_tx(&self, n_tx: usize) -> CVec {
        ula_steering(n_tx, self.psi_tx, self.spacing_ratio)
    }

    pub fn a_rx(&self, n_rx: usize) -> CVec {
        ula_steering(n_rx, self.psi_rx, self.spacing_ratio)
    }

    /// RIS response toward the BS (arrival).
    pub fn a_ra(&self) -> CVec {
        upa_steering(
            self.psi_a,
            self.theta_a,
            self.m_x,
            self.m_y,
            self.spacing_ratio,
        )
    }

    /// RIS response toward the user (departure).
    pub fn a_rd(&self) -> CVec {
        upa_steering(
            self.psi_d,
            self.theta_d,
            self.m_x,
            self.m_y,
            self.spacing_ratio,
        )
    }

    /// Per-element LoS gains `ν_m = ν_r ν_I* [a_RD]_m* [a_RA]_m`.
    pub fn nu(&self) -> Vec<num_complex::Complex64> {
        let (ra, rd) = (self.a_ra(), self.a_rd());
        (0..self.n_ris())
            .map(|m| self.nu_r * self.nu_i.conj() * rd[m].conj() * ra[m])
            .collect()
    }

    /// Pure-LoS compound channels `ν_m a_RX a_TXᴴ`.
    pub fn compound_channels(&self, n_tx: usize, n_rx: usize) -> Vec<CMat> {
        let outer = self.a_rx(n_rx) * self.a_tx(n_tx).adjoint();
        self.nu().into_iter().map(|nu| &outer * nu).collect()
    }
}

/// How configured CSI-error variances map to the variances of an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorScaling {
    /// Variances are fractions of the link's large-scale path gain.
    #[default]
    RelativeToPathGain,
    /// Variances are used as given.
    Absolute,
}

/// Estimated direct channel, estimated per-element compound channels and
/// the (absolute) variances of their estimation errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_d_bar: CMat,
    pub g_bars: Vec<CMat>,
    pub sigma_d_sq: f64,
    pub sigma_m_sq: f64,
}

impl ChannelEstimate {
    pub fn new(h_d_bar: CMat, g_bars: Vec<CMat>, sigma_d_sq: f64, sigma_m_sq: f64) -> Result<Self> {
        let est = Self {
            h_d_bar,
            g_bars,
            sigma_d_sq,
            sigma_m_sq,
        };
        est.check_shapes()?;
        Ok(est)
    }

    pub fn n_rx(&self) -> usize {
        self.h_d_bar.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h_d_bar.ncols()
    }

    pub fn n_ris(&self) -> usize {
        self.g_bars.len()
    }

    /// `σ_d² + Σ_m σ_m²`.
    pub fn sigma_total(&self) -> f64 {
        self.sigma_d_sq + self.n_ris() as f64 * self.sigma_m_sq
    }

    pub fn with_perfect_csi(&self) -> Self {
        Self {
            sigma_d_sq: 0.0,
            sigma_m_sq: 0.0,
            ..self.clone()
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let shape = self.h_d_bar.shape();
        if let Some((m, g)) = self
            .g_bars
            .iter()
            .enumerate()
            .find(|(_, g)| g.shape() != shape)
        {
            return Err(Error::Dimension(format!(
                "compound channel {m} is {:?}, direct channel is {:?}",
                g.shape(),
                shape
            )));
        }
        if !(self.sigma_d_sq >= 0.0 && self.sigma_m_sq >= 0.0) {
            return Err(Error::InvalidConfig(
                "error variances must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Checks the estimate against the antenna counts of `cfg`.
    pub fn check_against(&self, cfg: &SystemConfig) -> Result<()> {
        self.check_shapes()?;
        if self.n_rx() != cfg.n_rx || self.n_tx() != cfg.n_tx || self.n_ris() != cfg.n_ris {
            return Err(Error::Dimension(format!(
                "estimate is {}x{} with {} RIS channels, config expects {}x{} with {}",
                self.n_rx(),
                self.n_tx(),
                self.n_ris(),
                cfg.n_rx,
                cfg.n_tx,
                cfg.n_ris
            )));
        }
        Ok(())
    }
}

/// Large-scale gains of one channel realization (shadowing included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    pub bu: f64,
    pub br: f64,
    pub ru: f64,
}

impl LinkGains {
    pub fn sample<R: Rng + ?Sized>(geometry: &Geometry, rng: &mut R) -> Result<Self> {
        let g = geometry;
        Ok(Self {
            bu: db_to_gain(path_loss_db(
                g.pl0_db,
                g.d_bu(),
                g.alpha_bu,
                g.shadow_std_db,
                rng,
            )?),
            br: db_to_gain(path_loss_db(
                g.pl0_db,
                g.d_br(),
                g.alpha_br,
                g.shadow_std_db,
                rng,
            )?),
            ru: db_to_gain(path_loss_db(
                g.pl0_db,
                g.d_ru(),
                g.alpha_ru,
                g.shadow_std_db,
                rng,
            )?),
        })
    }

    pub fn compound(&self) -> f64 {
        self.br * self.ru
    }
}

/// Rayleigh direct channel with per-entry variance equal to the BS→user gain.
pub fn gen_direct_estimate<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    geometry: &Geometry,
    rng: &mut R,
) -> Result<CMat> {
    let gains = LinkGains::sample(geometry, rng)?;
    Ok(direct_from_gain(cfg, gains.bu, rng))
}

fn direct_from_gain<R: Rng + ?Sized>(cfg: &SystemConfig, gain: f64, rng: &mut R) -> CMat {
    cscg_matrix(cfg.n_rx, cfg.n_tx, gain, rng)
}

/// Rician compound channels `√(κ/(1+κ))·LoS + √(1/(1+κ))·NLoS`, scaled by the
/// product of the BS→RIS and RIS→user gains.
pub fn gen_compound_estimates<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    geometry: &Geometry,
    angles: &LoSAngles,
    rng: &mut R,
) -> Result<Vec<CMat>> {
    let gains = LinkGains::sample(geometry, rng)?;
    compound_from_gain(cfg, angles, RICIAN_FACTOR, gains.compound(), rng)
}

/// Compound channels with an explicit Rician factor and large-scale gain.
pub fn compound_from_gain<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    angles: &LoSAngles,
    kappa: f64,
    gain: f64,
    rng: &mut R,
) -> Result<Vec<CMat>> {
    if angles.n_ris() != cfg.n_ris {
        return Err(Error::Dimension(format!(
            "LoS angles describe {} RIS elements, config has {}",
            angles.n_ris(),
            cfg.n_ris
        )));
    }
    let los_w = (kappa / (1.0 + kappa)).sqrt();
    let nlos_w = (1.0 / (1.0 + kappa)).sqrt();
    let scale = gain.sqrt();
    // unit-modulus LoS entries: |M·ν_m|·√(N_R N_T)·|[a_RX]_i [a_TX]_j| = 1
    let los_scale = (cfg.n_ris as f64) * ((cfg.n_rx * cfg.n_tx) as f64).sqrt();
    let los = angles.compound_channels(cfg.n_tx, cfg.n_rx);
    Ok(los
        .into_iter()
        .map(|l| {
            let nlos = cscg_matrix(cfg.n_rx, cfg.n_tx, 1.0, rng);
            (l * c(los_w * los_scale) + nlos * c(nlos_w)) * c(scale)
        })
        .collect())
}

/// Full channel estimate for one Monte-Carlo trial: fresh shadowing, fresh
/// small-scale fading, error variances per `scaling`.
pub fn gen_channel_estimate<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    geometry: &Geometry,
    angles: &LoSAngles,
    scaling: ErrorScaling,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    let gains = LinkGains::sample(geometry, rng)?;
    let h_d_bar = direct_from_gain(cfg, gains.bu, rng);
    let g_bars = compound_from_gain(cfg, angles, RICIAN_FACTOR, gains.compound(), rng)?;
    let (sd, sm) = match scaling {
        ErrorScaling::Absolute => (cfg.sigma_d_sq, cfg.sigma_m_sq),
        ErrorScaling::RelativeToPathGain => {
            (cfg.sigma_d_sq * gains.bu, cfg.sigma_m_sq * gains.compound())
        }
    };
    ChannelEstimate::new(h_d_bar, g_bars, sd, sm)
}

/// One draw of the true channels and the RIS phase errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueChannelSample {
    pub h_d: CMat,
    pub g_list: Vec<CMat>,
    pub phase_noise: Vec<f64>,
}

pub fn sample_true_channel<R: Rng + ?Sized>(
    est: &ChannelEstimate,
    cfg: &SystemConfig,
    rng: &mut R,
) -> TrueChannelSample {
    let (nr, nt) = (est.n_rx(), est.n_tx());
    let perturb = |base: &CMat, var: f64, rng: &mut R| {
        if var > 0.0 {
            base + cscg_matrix(nr, nt, var, rng)
        } else {
            base.clone()
        }
    };
    let h_d = perturb(&est.h_d_bar, est.sigma_d_sq, rng);
    let g_list = est
        .g_bars
        .iter()
        .map(|g| perturb(g, est.sigma_m_sq, rng))
        .collect();
    let half_width = PI / (1u64 << cfg.bits) as f64;
    let dist = Uniform::new_inclusive(-half_width, half_width).unwrap();
    let phase_noise = (0..est.n_ris()).map(|_| dist.sample(rng)).collect();
    TrueChannelSample {
        h_d,
        g_list,
        phase_noise,
    }
}
