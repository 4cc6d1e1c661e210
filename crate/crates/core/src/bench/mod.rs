//! Benchmark schemes and the Monte-Carlo experiment harness.
//!
//! A scheme turns one channel estimate into a [`BeamformingSolution`] whose
//! `anmse` is measured in the world the scheme is evaluated in: robust
//! schemes are designed and evaluated under the impairments, the two bounds
//! in their idealized worlds, and the nonrobust baseline is designed ideal
//! but evaluated impaired.

pub mod config;
pub mod csv;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::channels::ChannelEstimate;
use crate::error::{Error, Result};
use crate::model::{SystemConfig, CONTINUOUS_BITS};
use crate::mse::{g_mse, wiener_equalizer, PhaseVector, Problem};
use crate::solver::{
    ao_solve, optimize_precoder, relaxed_problem, BeamformingSolution, RisMethod, SolverOptions,
};

pub use config::{load_config, parse_config, FileConfig};
pub use csv::{emit_csv, parse_csv, to_csv_string};
pub use sweep::{
    run_sweep, SweepOptions, SweepReport, SweepRow, SweepSpec, SweepVariable, TrialCount,
    TrialOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    AoMm,
    AoRga,
    PerfectHardware,
    PerfectCsi,
    RandomPhase,
    IdentityPhase,
    Nonrobust,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::AoMm,
        Scheme::AoRga,
        Scheme::PerfectHardware,
        Scheme::PerfectCsi,
        Scheme::RandomPhase,
        Scheme::IdentityPhase,
        Scheme::Nonrobust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::AoMm => "ao_mm",
            Scheme::AoRga => "ao_rga",
            Scheme::PerfectHardware => "perfect_hardware",
            Scheme::PerfectCsi => "perfect_csi",
            Scheme::RandomPhase => "random_phase",
            Scheme::IdentityPhase => "identity_phase",
            Scheme::Nonrobust => "nonrobust",
        }
    }

    /// Position in [`Scheme::ALL`], used to derive per-scheme random streams.
    pub fn index(self) -> usize {
        Scheme::ALL.iter().position(|&s| s == self).unwrap_or(0)
    }

    /// Parses a comma-separated list; `all` selects every scheme.
    pub fn parse_list(s: &str) -> Result<Vec<Scheme>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Scheme::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let scheme: Scheme = part.parse()?;
            if !out.contains(&scheme) {
                out.push(scheme);
            }
        }
        if out.is_empty() {
            return Err(Error::Parse("empty scheme list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().replace('_', "") == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Scheme::ALL.iter().map(|s| s.name()).collect();
                Error::Parse(format!(
                    "unknown scheme `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Transceiver-ideal design and evaluation world with near-continuous phases.
fn perfect_hardware_problem(est: &ChannelEstimate, cfg: &SystemConfig) -> Result<Problem> {
    let cfg = SystemConfig {
        beta_t: 0.0,
        beta_r: 0.0,
        bits: CONTINUOUS_BITS,
        ..cfg.clone()
    };
    Problem::new(est.clone(), cfg)
}

fn perfect_csi_problem(est: &ChannelEstimate, cfg: &SystemConfig) -> Result<Problem> {
    let cfg = SystemConfig {
        sigma_d_sq: 0.0,
        sigma_m_sq: 0.0,
        ..cfg.clone()
    };
    Problem::new(est.with_perfect_csi(), cfg)
}

/// Solves one channel estimate with `scheme`. `rng` is consumed only by
/// [`Scheme::RandomPhase`].
pub fn run_scheme<R: Rng + ?Sized>(
    scheme: Scheme,
    est: &ChannelEstimate,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<BeamformingSolution> {
    let with = |method| SolverOptions {
        method,
        ..opts.clone()
    };
    match scheme {
        Scheme::AoMm => ao_solve(
            &Problem::new(est.clone(), cfg.clone())?,
            &with(RisMethod::Mm),
            None,
        ),
        Scheme::AoRga => ao_solve(
            &Problem::new(est.clone(), cfg.clone())?,
            &with(RisMethod::Rga),
            None,
        ),
        Scheme::PerfectHardware => ao_solve(
            &perfect_hardware_problem(est, cfg)?,
            &with(opts.method),
            None,
        ),
        Scheme::PerfectCsi => ao_solve(&perfect_csi_problem(est, cfg)?, &with(opts.method), None),
        Scheme::RandomPhase => {
            let p = Problem::new(est.clone(), cfg.clone())?;
            let theta = PhaseVector::random(p.n_ris(), &p.codebook, rng);
            optimize_precoder(&p, &theta, opts)
        }
        Scheme::IdentityPhase => {
            let p = Problem::new(est.clone(), cfg.clone())?;
            let theta = PhaseVector::identity(p.n_ris(), &p.codebook);
            optimize_precoder(&p, &theta, opts)
        }
        Scheme::Nonrobust => nonrobust(est, cfg, opts),
    }
}

/// Designs for the idealized, continuous-phase system, rounds the phases to
/// the real codebook, rescales the precoder and scores the result with the
/// impaired objective and its Wiener receiver.
fn nonrobust(
    est: &ChannelEstimate,
    cfg: &SystemConfig,
    opts: &SolverOptions,
) -> Result<BeamformingSolution> {
    let p = Problem::new(est.clone(), cfg.clone())?;
    let design = ao_solve(&relaxed_problem(&p)?, opts, None)?;
    let theta = PhaseVector::quantize(design.theta.phases(), &p.codebook);
    let w = design.w.rescaled_into(cfg);
    let objective = g_mse(&p, &w, &theta)?;
    let d = p.n_streams() as f64;
    Ok(BeamformingSolution {
        c: wiener_equalizer(&p, &w, &theta)?,
        w,
        theta,
        objective,
        anmse: (d - objective) / d,
        ..design
    })
}
