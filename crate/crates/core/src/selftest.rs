//! Brute-force oracles and a quick self-check suite.
//!
//! The oracles recompute quantities the solver obtains in reduced or
//! iterative form (the Kronecker-form phase quadratic, exhaustive search
//! over the codebook) and are meant for tiny instances only.
//! [`run_selftest`] combines them with the closed-form special cases into a
//! suite that finishes in seconds.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{floor_hwi, los_estimate, los_optimal, LosSolution};
use crate::channels::{ChannelEstimate, LoSAngles};
use crate::error::Result;
use crate::linalg::{c, cscg_matrix, diag_part, max_abs_diff, CMat, CVec};
use crate::model::{distortion_constants, PhaseCodebook, SystemConfig};
use crate::mse::{
    g_mse, mc_average_mse, received_covariance, wiener_equalizer, PhaseVector, Precoder, Problem,
};
use crate::precoder_opt::build_surrogate;
use crate::ris_mm::{build_quadratic, concatenated_channel};
use crate::solver::{ao_solve, optimize_precoder, RisMethod, SolverOptions};

/// Unit-scale configuration: P = 1, σ² = 0.1, β = 0.08, σ_err² = 0.01.
pub fn small_cfg(n_tx: usize, n_rx: usize, d: usize, m: usize, bits: u32) -> SystemConfig {
    SystemConfig {
        n_tx,
        n_rx,
        n_streams: d,
        n_ris: m,
        bits,
        power: 1.0,
        noise_var: 0.1,
        beta_t: 0.08,
        beta_r: 0.08,
        sigma_d_sq: 0.01,
        sigma_m_sq: 0.01,
    }
}

/// Unit-scale random instance with a random feasible precoder and random
/// codebook phases. Direct entries have variance 1, compound ones 0.5.
pub fn random_instance(cfg: &SystemConfig, seed: u64) -> (Problem, Precoder, PhaseVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = ChannelEstimate::new(
        cscg_matrix(cfg.n_rx, cfg.n_tx, 1.0, &mut rng),
        (0..cfg.n_ris)
            .map(|_| cscg_matrix(cfg.n_rx, cfg.n_tx, 0.5, &mut rng))
            .collect(),
        cfg.sigma_d_sq,
        cfg.sigma_m_sq,
    )
    .expect("shapes agree by construction");
    let p = Problem::new(est, cfg.clone()).expect("small_cfg is valid");
    let w = Precoder::new(cscg_matrix(cfg.n_tx, cfg.n_streams, 1.0, &mut rng));
    let w = Precoder::new(&w.w * c((p.power_budget() / w.power()).sqrt() * 0.9));
    let theta = PhaseVector::random(cfg.n_ris, &p.codebook, &mut rng);
    (p, w, theta)
}

/// Every codebook vector of length `m`, in lexicographic index order with
/// the first element varying fastest.
pub fn all_vectors(m: usize, cb: &PhaseCodebook) -> Vec<PhaseVector> {
    let n = cb.len();
    (0..n.pow(m as u32))
        .map(|mut k| {
            let idx: Vec<usize> = (0..m)
                .map(|_| {
                    let i = k % n;
                    k /= n;
                    i
                })
                .collect();
            PhaseVector::from_indices(&idx, cb)
        })
        .collect()
}

/// Brute-force `(ξ̄, K̄)`: the full Kronecker-form quadratic in
/// `vec(θ̃ ⊗ I)`, reduced by the selection matrix that maps `θ̃` there.
pub fn kronecker_oracle(p: &Problem, w: &Precoder, theta: &PhaseVector) -> Result<(CVec, CMat)> {
    let cov = received_covariance(p, w, theta);
    let x = &cov.h_bar_theta * &w.w;
    let y_inv = crate::linalg::HermitianFactor::new(&cov.y_total)?.inverse();
    let n_mat = &y_inv * &x;
    let a = &n_mat * n_mat.adjoint();
    let h_cat = concatenated_channel(&p.est, &p.consts).h_cat;
    let ww = &w.w * w.w.adjoint();
    let s = p.tx_cov(&ww);
    let r = p.rx_source(&ww, &s).clone();
    let left = h_cat.adjoint() * &a * &h_cat;
    let right = h_cat.adjoint() * diag_part(&a) * &h_cat * c(p.cfg.beta_r.powi(2));
    let k = s.transpose().kronecker(&left) + r.transpose().kronecker(&right);
    let xi_mat = h_cat.adjoint() * &n_mat * w.w.adjoint();
    let xi = CVec::from_column_slice(xi_mat.as_slice());
    let (nt, nb) = (p.n_tx(), p.n_ris() + 1);
    let mut e = CMat::zeros(nt * nb * nt, nb);
    for j in 0..nt {
        for q in 0..nb {
            e[(j * nb * nt + q * nt + j, q)] = c(1.0);
        }
    }
    Ok((e.transpose() * xi, e.transpose() * k * e))
}

/// Options under which precoder-only AO runs to numerical convergence.
pub fn tight_options() -> SolverOptions {
    SolverOptions {
        tol: 1e-11,
        max_outer: 5000,
        ..SolverOptions::default()
    }
}

/// The codebook vector with the largest converged precoder-only objective,
/// found by enumerating all `2^(bM)` vectors.
pub fn exhaustive_optimum(p: &Problem) -> Result<(PhaseVector, f64)> {
    let opts = tight_options();
    let mut best: Option<(PhaseVector, f64)> = None;
    for theta in all_vectors(p.n_ris(), &p.codebook) {
        let g = optimize_precoder(p, &theta, &opts)?.objective;
        if best.as_ref().is_none_or(|(_, b)| g > *b) {
            best = Some((theta, g));
        }
    }
    Ok(best.expect("the codebook is non-empty"))
}

/// Outcome of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn check_distortion_constants() -> Result<Check> {
    let e1 = distortion_constants(1)?.eps_b;
    let e2 = distortion_constants(2)?.eps_b;
    let err = (e1 - (1.0 - 4.0 / (PI * PI)))
        .abs()
        .max((e2 - (1.0 - 8.0 / (PI * PI))).abs());
    Ok(check(
        "distortion constants",
        err <= 1e-12,
        format!("max error {err:.1e}"),
    ))
}

fn check_kronecker(instances: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let (p, w, theta) = random_instance(&small_cfg(2, 2, 2, 2, 2), 1000 + seed);
        let q = build_quadratic(&p, &w, &theta)?;
        let (xi, k) = kronecker_oracle(&p, &w, &theta)?;
        let scale_k = k.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale_x = xi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dx = (&q.xi_bar - &xi)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        worst = worst
            .max(max_abs_diff(&q.k_bar, &k) / scale_k)
            .max(dx / scale_x);
    }
    Ok(check(
        "reduced phase quadratic vs Kronecker form",
        worst <= 1e-8,
        format!("max relative error {worst:.1e}"),
    ))
}

fn check_surrogates(instances: u64) -> Result<Check> {
    let (mut tight, mut slack): (f64, f64) = (0.0, f64::INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..instances {
        let (p, w, theta) = random_instance(&small_cfg(3, 3, 2, 4, 2), 2000 + seed);
        let g = g_mse(&p, &w, &theta)?;
        let s = build_surrogate(&p, &w, &theta)?;
        let q = build_quadratic(&p, &w, &theta)?;
        tight = tight
            .max((s.value(&w) - g).abs())
            .max((q.value(theta.theta()) - g).abs());
        let w2 = Precoder::new(cscg_matrix(3, 2, 1.0, &mut rng));
        slack = slack.min(g_mse(&p, &w2, &theta)? - s.value(&w2));
        let t2 = PhaseVector::random(4, &p.codebook, &mut rng);
        slack = slack.min(g_mse(&p, &w, &t2)? - q.value(t2.theta()));
    }
    Ok(check(
        "surrogates are tight and minorize",
        tight <= 1e-9 && slack >= -1e-9,
        format!("max gap at expansion point {tight:.1e}, min slack {slack:.1e}"),
    ))
}

fn check_monte_carlo(draws: usize) -> Result<Check> {
    let (p, w, theta) = random_instance(&small_cfg(2, 2, 2, 4, 2), 3000);
    let eq = wiener_equalizer(&p, &w, &theta)?;
    let analytic = crate::mse::total_average_mse(&p, &eq, &w, &theta);
    let mut rng = ChaCha8Rng::seed_from_u64(3001);
    let (mean, se) = mc_average_mse(&p, &eq, &w, &theta, draws, &mut rng)?;
    let tol = (4.0 * se).max(0.02 * analytic);
    Ok(check(
        "closed-form MSE vs Monte Carlo",
        (mean - analytic).abs() <= tol,
        format!("analytic {analytic:.6}, sampled {mean:.6} ± {se:.1e}"),
    ))
}

fn check_los() -> Result<Check> {
    let cfg = SystemConfig {
        n_streams: 1,
        ..small_cfg(3, 3, 1, 6, 2)
    };
    let consts = distortion_constants(cfg.bits)?;
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let angles = LoSAngles::random(cfg.n_ris, &mut ChaCha8Rng::seed_from_u64(4000 + seed));
        let p = Problem::new(los_estimate(&cfg, &angles)?, cfg.clone())?;
        let LosSolution {
            w_star,
            theta_star,
            g_star,
            ..
        } = los_optimal(&cfg, &angles, &consts, &p.codebook)?;
        worst = worst.max(rel_diff(g_mse(&p, &w_star, &theta_star)?, g_star));
    }
    Ok(check(
        "line-of-sight closed form vs objective",
        worst <= 1e-10,
        format!("max relative error {worst:.1e}"),
    ))
}

fn check_hwi_floor() -> Result<Check> {
    let v = floor_hwi(8, 0.08, 0.08)?;
    let expect = 1.0 - 8.0 / (0.0064 + 1.0064 * 8.0);
    let err = (v - expect).abs();
    Ok(check(
        "hardware-impairment MSE floor",
        err <= 1e-12,
        format!("{v:.12} (error {err:.1e})"),
    ))
}

fn check_monotone_ao(solves: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for seed in 0..solves {
        for method in [RisMethod::Mm, RisMethod::Rga] {
            let (p, _, _) =
                random_instance(&small_cfg(3, 3, 2, 6, (seed % 3 + 1) as u32), 5000 + seed);
            let sol = ao_solve(&p, &SolverOptions::with_method(method), None)?;
            worst = worst.max(sol.max_trace_drop());
        }
    }
    Ok(check(
        "alternating optimization is monotone",
        worst <= 1e-9,
        format!("largest drop {worst:.1e}"),
    ))
}

/// Runs the quick suite. Numerical errors inside a check are reported as
/// a failed check rather than aborting the suite.
pub fn run_selftest() -> Vec<Check> {
    type Job = (&'static str, fn() -> Result<Check>);
    let jobs: [Job; 7] = [
        ("distortion constants", check_distortion_constants),
        ("reduced phase quadratic vs Kronecker form", || {
            check_kronecker(20)
        }),
        ("surrogates are tight and minorize", || check_surrogates(20)),
        ("closed-form MSE vs Monte Carlo", || {
            check_monte_carlo(20_000)
        }),
        ("line-of-sight closed form vs objective", check_los),
        ("hardware-impairment MSE floor", check_hwi_floor),
        ("alternating optimization is monotone", || {
            check_monotone_ao(10)
        }),
    ];
    jobs.into_iter()
        .map(|(name, job)| job().unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect()
}
