//! Monte-Carlo sweeps over one system parameter.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv::round_significant;
use super::{run_scheme, Scheme};
use crate::channels::{gen_channel_estimate, ErrorScaling, Geometry, LoSAngles};
use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, SystemConfig, MAX_BITS};
use crate::solver::SolverOptions;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RRB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PowerDbm,
    BetaR,
    BetaT,
    SigmaMSq,
    Bits,
    NRis,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        SweepVariable::PowerDbm,
        SweepVariable::BetaR,
        SweepVariable::BetaT,
        SweepVariable::SigmaMSq,
        SweepVariable::Bits,
        SweepVariable::NRis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::PowerDbm => "power_dbm",
            SweepVariable::BetaR => "beta_r",
            SweepVariable::BetaT => "beta_t",
            SweepVariable::SigmaMSq => "sigma_m_sq",
            SweepVariable::Bits => "bits",
            SweepVariable::NRis => "n_ris",
        }
    }

    /// `base` with this variable set to `value`, validated.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        match self {
            SweepVariable::PowerDbm => cfg.power = dbm_to_watts(value),
            SweepVariable::BetaR => cfg.beta_r = value,
            SweepVariable::BetaT => cfg.beta_t = value,
            SweepVariable::SigmaMSq => cfg.sigma_m_sq = value,
            SweepVariable::Bits => cfg.bits = as_count(self, value, MAX_BITS as usize)? as u32,
            SweepVariable::NRis => cfg.n_ris = as_count(self, value, usize::MAX)?,
        }
        cfg.validate()
    }
}

fn as_count(var: SweepVariable, value: f64, max: usize) -> Result<usize> {
    if value.fract() != 0.0 || value < 1.0 || value > max as f64 {
        return Err(Error::InvalidConfig(format!(
            "{} must be an integer in [1, {max}], got {value}",
            var.name()
        )));
    }
    Ok(value as usize)
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        SweepVariable::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sweep variable `{s}`")))
    }
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(self) -> Result<Self> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep values must be non-empty".into(),
            ));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("sweep values must be finite".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.values.len() >= 1 << 24 || self.trials as u64 >= 1 << 32 {
            return Err(Error::InvalidConfig(
                "sweep too large for the seeding scheme".into(),
            ));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub scheme: Scheme,
    pub anmse_mean: f64,
    pub anmse_std: f64,
    pub mean_iterations: f64,
    pub mean_wallclock_s: f64,
}

/// How many requested trials of a row produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialCount {
    pub succeeded: usize,
    pub failed: usize,
}

/// Rows are already rounded to the precision written by
/// [`emit_csv`](super::emit_csv), so a report survives a CSV round trip.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Parallel to `rows`.
    pub counts: Vec<TrialCount>,
}

/// Knobs that do not affect the numbers, except `solver`.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    /// Record wall-clock time per solve. Off by default so that output is
    /// reproducible byte for byte.
    pub timing: bool,
    /// Worker count; `None` reads [`THREADS_ENV`], then uses all cores.
    pub threads: Option<usize>,
}

/// The per-trial stream: the channel draw uses tag 0, scheme `k` of
/// [`Scheme::ALL`] uses tag `k + 1`, so results do not depend on which
/// schemes are selected. [`run_sweep`] draws channels with value index 0,
/// so every sweep point sees the same channels.
pub fn trial_rng(seed: u64, value_index: usize, trial_index: usize, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((value_index as u64) << 40) | ((trial_index as u64) << 8) | tag);
    rng
}

/// One successful solve within a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub anmse: f64,
    pub iterations: usize,
    pub wallclock_s: f64,
}

fn run_trial(
    cfg: &SystemConfig,
    geometry: &Geometry,
    schemes: &[Scheme],
    seed: u64,
    vi: usize,
    ti: usize,
    opts: &SweepOptions,
) -> Vec<Option<TrialOutcome>> {
    let mut rng = trial_rng(seed, 0, ti, 0);
    let angles = LoSAngles::random(cfg.n_ris, &mut rng);
    let est = match gen_channel_estimate(cfg, geometry, &angles, ErrorScaling::default(), &mut rng)
    {
        Ok(est) => est,
        Err(e) => {
            log::warn!("value #{vi}, trial {ti}: channel generation failed: {e}");
            return schemes.iter().map(|_| None).collect();
        }
    };
    schemes
        .iter()
        .map(|&scheme| {
            let mut rng = trial_rng(seed, vi, ti, scheme.index() as u64 + 1);
            let start = opts.timing.then(Instant::now);
            match run_scheme(scheme, &est, cfg, &opts.solver, &mut rng) {
                Ok(sol) => Some(TrialOutcome {
                    anmse: sol.anmse,
                    iterations: sol.iterations,
                    wallclock_s: start.map_or(0.0, |t| t.elapsed().as_secs_f64()),
                }),
                Err(e) => {
                    log::warn!("value #{vi}, trial {ti}, {scheme}: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Solves `trials` fresh draws at sweep point `value_index` on the current
/// rayon pool. Indexed `[trial][scheme]`; `None` marks a failed solve.
pub fn trial_outcomes(
    cfg: &SystemConfig,
    geometry: &Geometry,
    schemes: &[Scheme],
    seed: u64,
    value_index: usize,
    trials: usize,
    opts: &SweepOptions,
) -> Vec<Vec<Option<TrialOutcome>>> {
    (0..trials)
        .into_par_iter()
        .map(|ti| run_trial(cfg, geometry, schemes, seed, value_index, ti, opts))
        .collect()
}

fn worker_count(opts: &SweepOptions) -> usize {
    opts.threads
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|s| s.trim().parse().ok())
        })
        .filter(|&n| n > 0)
        .unwrap_or(0)
}

/// Runs every scheme on `spec.trials` fresh channel draws per sweep value.
/// Trials run in parallel; results are gathered in trial order and reduced
/// sequentially, so the report depends only on the inputs.
pub fn run_sweep(
    spec: &SweepSpec,
    base_cfg: &SystemConfig,
    geometry: &Geometry,
    schemes: &[Scheme],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let spec = spec.clone().validate()?;
    let geometry = geometry.clone().validate()?;
    let cfgs = spec
        .values
        .iter()
        .map(|&v| spec.variable.apply(base_cfg, v))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(opts))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;

    let mut report = SweepReport::default();
    for (vi, cfg) in cfgs.iter().enumerate() {
        let per_trial = pool
            .install(|| trial_outcomes(cfg, &geometry, schemes, spec.seed, vi, spec.trials, opts));
        for (si, &scheme) in schemes.iter().enumerate() {
            let done: Vec<&TrialOutcome> =
                per_trial.iter().filter_map(|t| t[si].as_ref()).collect();
            report
                .rows
                .push(aggregate(spec.variable, spec.values[vi], scheme, &done));
            report.counts.push(TrialCount {
                succeeded: done.len(),
                failed: spec.trials - done.len(),
            });
        }
    }
    Ok(report)
}

fn aggregate(
    variable: SweepVariable,
    value: f64,
    scheme: Scheme,
    done: &[&TrialOutcome],
) -> SweepRow {
    let n = done.len();
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| done.iter().map(|o| f(o)).sum::<f64>() / n as f64;
    let anmse_mean = mean(&|o| o.anmse);
    let anmse_std = if n > 1 {
        (done
            .iter()
            .map(|o| (o.anmse - anmse_mean).powi(2))
            .sum::<f64>()
            / (n - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    SweepRow {
        variable,
        value: round_significant(value),
        scheme,
        anmse_mean: round_significant(anmse_mean),
        anmse_std: round_significant(anmse_std),
        mean_iterations: round_significant(mean(&|o| o.iterations as f64)),
        mean_wallclock_s: round_significant(mean(&|o| o.wallclock_s)),
    }
}
