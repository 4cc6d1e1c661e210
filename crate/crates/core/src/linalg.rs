//! Small dense complex linear-algebra helpers shared by the optimizers.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex64`. The
//! matrices in this problem are tiny (a few tens of rows), so clarity wins
//! over blocking or in-place tricks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Condition-number ceiling above which a Hermitian solve is refused.
pub const COND_LIMIT: f64 = 1e12;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `\widetilde{diag}`: keeps the diagonal, zeroes everything else.
pub fn diag_part(m: &CMat) -> CMat {
    let n = m.nrows().min(m.ncols());
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for i in 0..n {
        out[(i, i)] = m[(i, i)];
    }
    out
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Real part of `Tr(Aᴴ B)`, i.e. the Frobenius inner product `<A, B>`.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `Tr(Aᴴ B)` as a complex number.
pub fn inner(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn fro_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = hermitian_part(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigen-decomposition `m = U Λ Uᴴ`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Largest eigenvalue of a Hermitian PSD matrix. Falls back to power
/// iteration for large matrices where a full eigensolve is wasteful.
pub fn lambda_max(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.nrows() > 256 {
        return power_iteration(m, 1e-12, 10_000);
    }
    hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
}

fn power_iteration(m: &CMat, tol: f64, max_iter: usize) -> f64 {
    let n = m.nrows();
    let mut v = CVec::from_element(n, c(1.0 / (n as f64).sqrt()));
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let mv = m * &v;
        let norm = mv.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = (v.adjoint() * &mv)[(0, 0)].re;
        v = mv / c(norm);
        if (next - lambda).abs() <= tol * next.abs().max(1e-300) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Cholesky factor of a Hermitian positive-definite matrix whose condition
/// number has been checked against [`COND_LIMIT`].
pub struct HermitianFactor {
    chol: Cholesky<Complex64, Dyn>,
    cond: f64,
}

impl HermitianFactor {
    pub fn new(m: &CMat) -> Result<Self> {
        let h = hermitian_part(m);
        let ev = hermitian_eigenvalues(&h);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        // a negative eigenvalue within roundoff of zero is a conditioning
        // problem, not indefiniteness
        if hi <= 0.0 || lo < -1e-10 * hi {
            return Err(Error::NotPositiveDefinite);
        }
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > COND_LIMIT {
            return Err(Error::IllConditioned {
                cond,
                limit: COND_LIMIT,
            });
        }
        let chol = Cholesky::new(h).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { chol, cond })
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> CMat {
        hermitian_part(&self.chol.inverse())
    }

    /// Lower-triangular factor `L` with `m = L Lᴴ`.
    pub fn l(&self) -> CMat {
        self.chol.l()
    }
}

/// Circularly-symmetric complex Gaussian matrix with per-entry variance `var`.
pub fn cscg_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, var: f64, rng: &mut R) -> CMat {
    let s = (var / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    })
}

/// The `n` dominant right singular vectors of `h`, as columns.
pub fn dominant_right_singular_vectors(h: &CMat, n: usize) -> CMat {
    let gram = h.adjoint() * h;
    let (_, u) = hermitian_eigen(&gram);
    let cols = u.ncols();
    let mut out = CMat::zeros(u.nrows(), n);
    for k in 0..n.min(cols) {
        out.set_column(k, &u.column(cols - 1 - k));
    }
    out
}
