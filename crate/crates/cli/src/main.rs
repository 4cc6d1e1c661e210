//! `rrb`: solve single instances, run Monte-Carlo sweeps, evaluate MSE
//! floors and run the oracle self-checks.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rrb_core::analysis::{floor_csi, floor_hwi, floor_phase_noise, miso_floor, miso_lower_bound};
use rrb_core::bench::sweep::trial_rng;
use rrb_core::bench::{
    emit_csv, load_config, run_scheme, run_sweep, to_csv_string, FileConfig, Scheme, SweepOptions,
    SweepSpec, SweepVariable,
};
use rrb_core::channels::{gen_channel_estimate, ChannelEstimate, ErrorScaling, LoSAngles};
use rrb_core::model::{distortion_constants, watts_to_dbm, SystemConfig};
use rrb_core::mse::Problem;
use rrb_core::selftest::run_selftest;
use rrb_core::solver::{ao_solve, RisMethod, SolverOptions};

const DESK_TRIALS: usize = 100;
const PAPER_TRIALS: usize = 500;

#[derive(Parser, Debug)]
#[command(
    name = "rrb",
    version,
    about = "Robust MIMO transceiver and discrete RIS phase design"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML file with optional [system], [geometry] and [sweep] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from the full-size setup (8x8, 8 streams, M = 64, 500 trials).
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Seed for channel draws and randomized schemes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Phase update used by the robust solver.
    #[arg(long, global = true, value_parser = parse_method)]
    ris_method: Option<RisMethod>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one channel draw and print a summary.
    Solve {
        #[arg(long, default_value = "ao_mm")]
        scheme: Scheme,
    },
    /// Run a Monte-Carlo sweep and write CSV.
    Sweep {
        /// Comma-separated scheme names, or `all`.
        #[arg(long, default_value = "all")]
        scheme: String,
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides the sweep variable of the config file.
        #[arg(long)]
        variable: Option<SweepVariable>,
        /// Comma-separated sweep values; overrides the config file.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record per-solve wall-clock time (output is then not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate distortion constants, MSE floors and bounds.
    Analyze,
    /// Run the oracle self-checks.
    Selftest,
}

fn parse_method(s: &str) -> Result<RisMethod, String> {
    match s.parse::<RisMethod>() {
        Ok(RisMethod::Fixed) => Err("the robust solver needs mm or rga".into()),
        Ok(m) => Ok(m),
        Err(e) => Err(e.to_string()),
    }
}

struct Setup {
    file: FileConfig,
    seed: u64,
    solver: SolverOptions,
    default_trials: usize,
}

fn setup(common: &Common) -> Result<Setup> {
    let base = if common.paper_scale {
        log::warn!(
            "paper scale selected: expect runs hundreds of times slower than the desk default"
        );
        eprintln!("warning: --paper-scale uses 8x8 MIMO, M = 64 and {PAPER_TRIALS} trials per point; runs are slow");
        SystemConfig::paper_default()
    } else {
        SystemConfig::desk_default()
    };
    let file = match &common.config {
        Some(path) => {
            load_config(path, &base).with_context(|| format!("loading {}", path.display()))?
        }
        None => FileConfig {
            system: base.validate()?,
            geometry: Default::default(),
            sweep: None,
        },
    };
    let seed = common
        .seed
        .or(file.sweep.as_ref().map(|s| s.seed))
        .unwrap_or(0);
    let solver = SolverOptions::with_method(common.ris_method.unwrap_or_default()).validate()?;
    let default_trials = if common.paper_scale {
        PAPER_TRIALS
    } else {
        DESK_TRIALS
    };
    Ok(Setup {
        file,
        seed,
        solver,
        default_trials,
    })
}

fn draw_estimate(s: &Setup) -> Result<ChannelEstimate> {
    let mut rng = trial_rng(s.seed, 0, 0, 0);
    let cfg = &s.file.system;
    let angles = LoSAngles::random(cfg.n_ris, &mut rng);
    Ok(gen_channel_estimate(
        cfg,
        &s.file.geometry,
        &angles,
        ErrorScaling::default(),
        &mut rng,
    )?)
}

fn print_config(out: &mut impl Write, cfg: &SystemConfig) -> Result<()> {
    writeln!(
        out,
        "system: N_T={} N_R={} d={} M={} b={} P={:.1} dBm noise={:.1} dBm beta_T={} beta_R={} sigma_d^2={} sigma_m^2={}",
        cfg.n_tx,
        cfg.n_rx,
        cfg.n_streams,
        cfg.n_ris,
        cfg.bits,
        watts_to_dbm(cfg.power),
        watts_to_dbm(cfg.noise_var),
        cfg.beta_t,
        cfg.beta_r,
        cfg.sigma_d_sq,
        cfg.sigma_m_sq
    )?;
    Ok(())
}

fn solve(s: &Setup, scheme: Scheme, out: &mut impl Write) -> Result<()> {
    let cfg = &s.file.system;
    let est = draw_estimate(s)?;
    let mut rng = trial_rng(s.seed, 0, 0, scheme.index() as u64 + 1);
    let sol = run_scheme(scheme, &est, cfg, &s.solver, &mut rng)?;
    print_config(out, cfg)?;
    writeln!(out, "scheme: {scheme}")?;
    writeln!(out, "seed: {}", s.seed)?;
    writeln!(out, "anmse: {:.6}", sol.anmse)?;
    writeln!(out, "g_mse: {:.6}", sol.objective)?;
    writeln!(
        out,
        "iterations: {} (converged: {})",
        sol.iterations, sol.converged
    )?;
    writeln!(
        out,
        "transmit power: {:.3} dBm",
        watts_to_dbm(sol.w.power())
    )?;
    let phases: Vec<String> = sol
        .theta
        .phases()
        .iter()
        .map(|p| format!("{p:.4}"))
        .collect();
    writeln!(out, "phases (rad): [{}]", phases.join(", "))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    s: &Setup,
    schemes: &str,
    trials: Option<usize>,
    variable: Option<SweepVariable>,
    values: Option<Vec<f64>>,
    out_path: Option<&PathBuf>,
    timing: bool,
    out: &mut impl Write,
) -> Result<()> {
    let schemes = Scheme::parse_list(schemes)?;
    let file_spec = s.file.sweep.clone();
    let variable = variable
        .or(file_spec.as_ref().map(|f| f.variable))
        .context("no sweep variable: pass --variable or add a [sweep] table")?;
    let values = values
        .or(file_spec.as_ref().map(|f| f.values.clone()))
        .context("no sweep values: pass --values or add a [sweep] table")?;
    let trials = trials
        .or(file_spec.as_ref().map(|f| f.trials))
        .unwrap_or(s.default_trials);
    let spec = SweepSpec {
        variable,
        values,
        trials,
        seed: s.seed,
    }
    .validate()?;
    let opts = SweepOptions {
        solver: s.solver.clone(),
        timing,
        threads: None,
    };
    let report = run_sweep(&spec, &s.file.system, &s.file.geometry, &schemes, &opts)?;
    for (row, count) in report.rows.iter().zip(&report.counts) {
        if count.failed > 0 {
            log::warn!(
                "{}={} {}: {} of {} trials failed",
                row.variable,
                row.value,
                row.scheme,
                count.failed,
                trials
            );
        }
    }
    match out_path {
        Some(path) => {
            emit_csv(&report, path)?;
            eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
        }
        None => out.write_all(to_csv_string(&report).as_bytes())?,
    }
    Ok(())
}

fn analyze(s: &Setup, out: &mut impl Write) -> Result<()> {
    let cfg = &s.file.system;
    print_config(out, cfg)?;
    let k = distortion_constants(cfg.bits)?;
    writeln!(
        out,
        "phase noise: omega_b = {:.12}, eps_b = {:.12}",
        k.omega_b, k.eps_b
    )?;
    writeln!(
        out,
        "transceiver-distortion floor: {:.6e}",
        floor_hwi(cfg.n_tx, cfg.beta_t, cfg.beta_r)?
    )?;
    let est = draw_estimate(s)?;
    let p = Problem::new(est.clone(), cfg.clone())?;
    let sol = ao_solve(&p, &s.solver, None)?;
    writeln!(out, "solver anmse (seed {}): {:.6}", s.seed, sol.anmse)?;
    if cfg.n_rx != 1 || cfg.n_streams != 1 {
        writeln!(
            out,
            "MISO bound and floors skipped: they need n_rx = 1 and n_streams = 1"
        )?;
        return Ok(());
    }
    writeln!(
        out,
        "MISO lower bound: {:.6e}",
        miso_lower_bound(&est, cfg, &p.consts)?
    )?;
    writeln!(
        out,
        "MISO high-power floor: {:.6e}",
        miso_floor(&est, cfg, &p.consts)?
    )?;
    writeln!(
        out,
        "CSI-error floor at solver phases: {:.6e}",
        floor_csi(
            &est,
            &sol.theta,
            est.sigma_d_sq,
            est.n_ris() as f64 * est.sigma_m_sq
        )?
    )?;
    match floor_phase_noise(&est, &sol.theta, cfg.bits) {
        Ok(f) => writeln!(out, "phase-noise floor at solver phases: {f:.6e}")?,
        Err(e) => writeln!(out, "phase-noise floor unavailable: {e}")?,
    }
    Ok(())
}

fn selftest(out: &mut impl Write) -> Result<bool> {
    let checks = run_selftest();
    for c in &checks {
        writeln!(
            out,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    writeln!(out, "{passed}/{} checks passed", checks.len())?;
    Ok(passed == checks.len())
}

fn run(cli: Cli) -> Result<bool> {
    let mut out = std::io::stdout().lock();
    if let Command::Selftest = cli.command {
        return selftest(&mut out);
    }
    let s = setup(&cli.common)?;
    match cli.command {
        Command::Solve { scheme } => solve(&s, scheme, &mut out)?,
        Command::Sweep {
            scheme,
            trials,
            variable,
            values,
            out: path,
            timing,
        } => {
            if trials == Some(0) {
                bail!("--trials must be at least 1");
            }
            sweep(
                &s,
                &scheme,
                trials,
                variable,
                values,
                path.as_ref(),
                timing,
                &mut out,
            )?
        }
        Command::Analyze => analyze(&s, &mut out)?,
        Command::Selftest => unreachable!("handled above"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
