//! Small dense complex linear-algebra helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::MeasureError;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-9;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Real part of `Tr[a b]`.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat), MeasureError> {
    if !is_hermitian(m, HERMITIAN_TOL) {
        return Err(MeasureError::InvalidOperator("matrix is not Hermitian".into()));
    }
    let eig = hermitize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat, MeasureError> {
    let (values, vectors) = hermitian_eigen(m)?;
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = c(f(v));
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    Ok(scaled * vectors.adjoint())
}

/// Schatten 1-norm of a Hermitian matrix.
pub fn trace_norm(m: &CMat) -> Result<f64, MeasureError> {
    Ok(hermitian_eigen(m)?.0.iter().map(|v| v.abs()).sum())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// `I ⊗ op ⊗ I` with `op` acting on register `reg` of a system with `dims`.
pub fn embed(op: &CMat, dims: &[usize], reg: usize) -> CMat {
    let before: usize = dims[..reg].iter().product();
    let after: usize = dims[reg + 1..].iter().product();
    kron(&kron(&identity(before), op), &identity(after))
}

/// Traces out the first register of a `(d1*d2)`-dimensional operator.
pub fn partial_trace_first(m: &CMat, d1: usize, d2: usize) -> CMat {
    let mut out = CMat::zeros(d2, d2);
    for i in 0..d1 {
        for j in 0..d2 {
            for k in 0..d2 {
                out[(j, k)] += m[(i * d2 + j, i * d2 + k)];
            }
        }
    }
    out
}

pub fn gaussian_matrix<R: RngCore + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Haar-distributed unitary via QR with phase correction.
pub fn random_unitary<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let qr = gaussian_matrix(n, n, rng).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// Projector onto a uniformly random `rank`-dimensional subspace.
pub fn random_projector<R: RngCore + ?Sized>(n: usize, rank: usize, rng: &mut R) -> CMat {
    let u = random_unitary(n, rng);
    let cols = u.columns(0, rank);
    &cols * cols.adjoint()
}

/// Projector onto the span of selected columns of a unitary.
pub fn column_projector(u: &CMat, cols: &[usize]) -> CMat {
    let n = u.nrows();
    let mut p = CMat::zeros(n, n);
    for &j in cols {
        let v = u.column(j);
        p += &v * v.adjoint();
    }
    p
}

pub fn random_unit_vector<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let g = gaussian_matrix(n, 1, rng);
    let norm = g.norm();
    CVec::from_iterator(n, g.iter().map(|z| z / norm))
}
