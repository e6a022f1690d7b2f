//! Small dense complex linear algebra: Hermitian eigendecomposition, traces,
//! quadratic forms and spectrally regularized inversion.
//!
//! Everything here targets the matrix orders that spatial covariance work
//! actually produces (N <= 64, typically 8 or 16), so the eigensolver is a
//! cyclic Jacobi sweep rather than anything blocked or pivoted.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance used when validating Hermitian symmetry.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Off-diagonal / on-diagonal Frobenius ratio at which the Jacobi sweep stops.
const JACOBI_TOL: f64 = 1e-12;

/// Maximum number of full Jacobi sweeps before giving up.
const JACOBI_MAX_SWEEPS: usize = 100;

static EIG_INVOCATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of Hermitian eigendecompositions performed by this process so far.
///
/// Exposed so tests can assert that cheap spectral estimators never fall back
/// to an eigensolve.
pub fn eig_invocations() -> u64 {
    EIG_INVOCATIONS.load(Ordering::Relaxed)
}

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(
                "matrix must have at least one row and one column".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Copy of column `col`.
    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }
}

/// Hermitian matrix of order N, stored dense row-major.
///
/// Construction validates self-adjointness (within [`HERMITIAN_TOL`] relative
/// to the largest entry magnitude) and then canonicalizes the storage so that
/// `entry(i,j) == conj(entry(j,i))` holds exactly and the diagonal is real.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn new(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("matrix order must be >= 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "order-{n} Hermitian matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let scale = entries
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let tol = HERMITIAN_TOL * scale;

        let mut worst = (0usize, 0usize, 0.0_f64);
        for i in 0..n {
            for j in i..n {
                let upper = entries[i * n + j];
                let lower = entries[j * n + i];
                let deviation = if i == j {
                    upper.im.abs()
                } else {
                    (upper - lower.conj()).norm()
                };
                if deviation > worst.2 {
                    worst = (i, j, deviation);
                }
            }
        }
        if worst.2 > tol {
            let (i, j) = (worst.0, worst.1);
            return Err(Error::NotHermitian {
                row: i,
                col: j,
                found: format!("{}", entries[i * n + j]),
                expected: format!("{}", entries[j * n + i].conj()),
                deviation: worst.2,
                tolerance: tol,
            });
        }
        Ok(Self::from_raw_symmetrize(n, entries))
    }

    /// Canonicalize entries that are Hermitian by construction (averaging the
    /// two triangles, zeroing the diagonal imaginary parts). No tolerance check.
    pub(crate) fn from_raw_symmetrize(n: usize, mut entries: Vec<Complex64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        for i in 0..n {
            entries[i * n + i] = Complex64::new(entries[i * n + i].re, 0.0);
            for j in (i + 1)..n {
                let avg = 0.5 * (entries[i * n + j] + entries[j * n + i].conj());
                entries[i * n + j] = avg;
                entries[j * n + i] = avg.conj();
            }
        }
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            entries[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Self { n, entries }
    }

    /// `scale * v v^H` for a column vector `v`.
    pub fn from_outer_product(v: &[Complex64], scale: f64) -> Self {
        let n = v.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = scale * v[i] * v[j].conj();
            }
        }
        Self::from_raw_symmetrize(n, entries)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.n + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    /// Sum of diagonal elements (real by canonicalization).
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.entries[i * self.n + i].re).sum()
    }

    /// Real part of `v^H M v`; the imaginary residue is structurally zero and
    /// is discarded.
    pub fn quadratic_form(&self, v: &[Complex64]) -> Result<f64> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} does not match matrix order {}",
                v.len(),
                self.n
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            let row = self.row(i);
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..self.n {
                s += row[j] * v[j];
            }
            acc += v[i].conj() * s;
        }
        Ok(acc.re)
    }

    /// `M + other`, entrywise.
    pub fn add(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "cannot add order-{} and order-{} matrices",
                self.n, other.n
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(HermitianMatrix { n: self.n, entries })
    }

    /// `scale * M`, entrywise.
    pub fn scale(&self, scale: f64) -> HermitianMatrix {
        HermitianMatrix {
            n: self.n,
            entries: self.entries.iter().map(|z| scale * z).collect(),
        }
    }

    /// Inverse of `M + load*I`, computed spectrally as
    /// `U diag(1/(lambda_i + load)) U^H`.
    ///
    /// Fails when the shifted spectrum spans more than twelve orders of
    /// magnitude (which also covers non-positive shifted eigenvalues).
    pub fn regularized_inverse(&self, load: f64) -> Result<HermitianMatrix> {
        if load < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "diagonal load must be >= 0, got {load}"
            )));
        }
        let eig = hermitian_eig(self)?;
        let largest = eig.eigenvalues[0] + load;
        let smallest = eig.eigenvalues[self.n - 1] + load;
        if smallest < 1e-12 * largest || smallest <= 0.0 {
            return Err(Error::IllConditioned { smallest, largest });
        }
        let inverted: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / (l + load)).collect();
        Ok(eig.recompose_with(&inverted))
    }

    /// Eigendecomposition; alias for [`hermitian_eig`].
    pub fn eig(&self) -> Result<EigenSystem> {
        hermitian_eig(self)
    }
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues in descending
/// order and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Copy of eigenvector `i`.
    pub fn eigenvector(&self, i: usize) -> Vec<Complex64> {
        self.eigenvectors.column(i)
    }

    /// `U diag(values) U^H` over this system's eigenbasis.
    pub fn recompose_with(&self, values: &[f64]) -> HermitianMatrix {
        let n = self.order();
        debug_assert_eq!(values.len(), n);
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for (k, &v) in values.iter().enumerate() {
            for i in 0..n {
                let ui = self.eigenvectors.get(i, k);
                for j in 0..n {
                    entries[i * n + j] += v * ui * self.eigenvectors.get(j, k).conj();
                }
            }
        }
        HermitianMatrix::from_raw_symmetrize(n, entries)
    }

    /// Projector `U_sub U_sub^H` onto the span of eigenvectors
    /// `first..order` (by descending-eigenvalue index).
    pub fn subspace_projector(&self, first: usize) -> HermitianMatrix {
        let n = self.order();
        let values: Vec<f64> = (0..n).map(|i| if i >= first { 1.0 } else { 0.0 }).collect();
        self.recompose_with(&values)
    }
}

/// Cyclic-Jacobi Hermitian eigendecomposition.
///
/// Deterministic: fixed (row-major) pivot order and a fixed phase convention
/// (the first nonzero component of every eigenvector is real positive), so
/// identical inputs give bit-identical outputs.
pub fn hermitian_eig(m: &HermitianMatrix) -> Result<EigenSystem> {
    EIG_INVOCATIONS.fetch_add(1, Ordering::Relaxed);
    let n = m.order();
    let mut a = m.entries.clone();
    let mut v = ComplexMatrix::identity(n);

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let on = on_diagonal_norm(&a, n);
        let residual = off_diagonal_norm(&a, n);
        if residual <= JACOBI_TOL * on {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, n, p, q);
            }
        }
    }
    if !converged {
        let on = on_diagonal_norm(&a, n);
        let residual = off_diagonal_norm(&a, n);
        if residual > JACOBI_TOL * on {
            return Err(Error::NoConvergence {
                sweeps: JACOBI_MAX_SWEEPS,
                residual,
            });
        }
    }

    // Sort descending; stable so degenerate clusters keep the sweep's order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .re
            .partial_cmp(&a[i * n + i].re)
            .expect("eigenvalues are finite")
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        // Phase convention: rotate so the first nonzero component is real
        // positive. Columns are unit norm, so 1e-12 separates zero from signal.
        let mut phase = Complex64::new(1.0, 0.0);
        for r in 0..n {
            let z = v.get(r, src);
            if z.norm() > 1e-12 {
                phase = z.conj() / z.norm();
                break;
            }
        }
        for r in 0..n {
            vectors.set(r, dst, v.get(r, src) * phase);
        }
    }

    Ok(EigenSystem {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn off_diagonal_norm(a: &[Complex64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

fn on_diagonal_norm(a: &[Complex64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        sum += a[i * n + i].norm_sqr();
    }
    sum.sqrt()
}

/// One two-sided rotation `A <- J^H A J`, `V <- V J` chosen to annihilate
/// `A[p][q]`.
fn jacobi_rotate(a: &mut [Complex64], v: &mut ComplexMatrix, n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let abs = apq.norm();
    if abs == 0.0 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;
    let phase = apq / abs;

    // tan(2 theta) = 2|apq| / (aqq - app), stable small-root form.
    let tau = (aqq - app) / (2.0 * abs);
    let t = tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let w = s * phase;

    // Rows p,q of A (J^H from the left).
    for k in 0..n {
        let rp = a[p * n + k];
        let rq = a[q * n + k];
        a[p * n + k] = c * rp - w * rq;
        a[q * n + k] = w.conj() * rp + c * rq;
    }
    // Columns p,q of A (J from the right).
    for k in 0..n {
        let cp = a[k * n + p];
        let cq = a[k * n + q];
        a[k * n + p] = c * cp - w.conj() * cq;
        a[k * n + q] = w * cp + c * cq;
    }
    // Clean the pivot pair and diagonal roundoff.
    a[p * n + q] = Complex64::new(0.0, 0.0);
    a[q * n + p] = Complex64::new(0.0, 0.0);
    a[p * n + p] = Complex64::new(a[p * n + p].re, 0.0);
    a[q * n + q] = Complex64::new(a[q * n + q].re, 0.0);

    // Accumulate eigenvectors.
    for k in 0..n {
        let vp = v.get(k, p);
        let vq = v.get(k, q);
        v.set(k, p, c * vp - w.conj() * vq);
        v.set(k, q, w * vp + c * vq);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_hermitian, random_psd};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reconstruction_error(m: &HermitianMatrix, eig: &EigenSystem) -> f64 {
        let rebuilt = eig.recompose_with(&eig.eigenvalues);
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in rebuilt.entries().iter().zip(m.entries()) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }

    /// Independent rank-1 oracle: power iteration on the raw entries.
    fn power_iteration_top(m: &HermitianMatrix, iters: usize) -> (f64, Vec<Complex64>) {
        let n = m.order();
        let matvec = |v: &[Complex64]| -> Vec<Complex64> {
            (0..n)
                .map(|i| (0..n).map(|j| m.get(i, j) * v[j]).sum())
                .collect()
        };
        let mut v: Vec<Complex64> = (0..n).map(|i| c(1.0 + i as f64 * 0.1, 0.0)).collect();
        for _ in 0..iters {
            let mut next = matvec(&v);
            let norm = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut next {
                *z /= norm;
            }
            v = next;
        }
        let mv = matvec(&v);
        let lambda: Complex64 = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
        (lambda.re, v)
    }

    /// Independent inversion oracle: complex Gauss-Jordan with partial pivoting.
    fn gauss_jordan_inverse(m: &HermitianMatrix, load: f64) -> Vec<Complex64> {
        let n = m.order();
        let mut aug = vec![c(0.0, 0.0); n * 2 * n];
        for i in 0..n {
            for j in 0..n {
                aug[i * 2 * n + j] = m.get(i, j);
            }
            aug[i * 2 * n + i] += load;
            aug[i * 2 * n + n + i] = c(1.0, 0.0);
        }
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&a, &b| {
                    aug[a * 2 * n + col]
                        .norm()
                        .partial_cmp(&aug[b * 2 * n + col].norm())
                        .unwrap()
                })
                .unwrap();
            if pivot_row != col {
                for j in 0..2 * n {
                    aug.swap(col * 2 * n + j, pivot_row * 2 * n + j);
                }
            }
            let pivot = aug[col * 2 * n + col];
            for j in 0..2 * n {
                aug[col * 2 * n + j] /= pivot;
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let factor = aug[row * 2 * n + col];
                for j in 0..2 * n {
                    let x = aug[col * 2 * n + j];
                    aug[row * 2 * n + j] -= factor * x;
                }
            }
        }
        let mut inv = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                inv[i * n + j] = aug[i * 2 * n + n + j];
            }
        }
        inv
    }

    #[test]
    fn identity_eigensystem() {
        let m = HermitianMatrix::identity(4);
        let eig = hermitian_eig(&m).unwrap();
        for l in &eig.eigenvalues {
            assert!((l - 1.0).abs() < 1e-14);
        }
        assert!(reconstruction_error(&m, &eig) < 1e-12);
    }

    #[test]
    fn rank_one_all_ones_matches_power_iteration() {
        let ones = vec![c(1.0, 0.0); 4];
        let m = HermitianMatrix::from_outer_product(&ones, 1.0);
        let eig = hermitian_eig(&m).unwrap();

        let (oracle_lambda, oracle_vec) = power_iteration_top(&m, 50);
        assert!((oracle_lambda - 4.0).abs() < 1e-10);
        assert!((eig.eigenvalues[0] - oracle_lambda).abs() < 1e-10);
        for l in &eig.eigenvalues[1..] {
            assert!(l.abs() < 1e-12);
        }
        // Top eigenvector proportional to all-ones / 2, compared to the oracle.
        let top = eig.eigenvector(0);
        let overlap: Complex64 = top.iter().zip(&oracle_vec).map(|(a, b)| a.conj() * b).sum();
        assert!(overlap.norm() > 1.0 - 1e-10);
        for z in &top {
            assert!((z.norm() - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn seeded_random_reconstruction_and_trace() {
        let m = random_hermitian(8, 0x5eed);
        let eig = hermitian_eig(&m).unwrap();
        assert!(reconstruction_error(&m, &eig) < 1e-8);
        let eigsum: f64 = eig.eigenvalues.iter().sum();
        assert!((eigsum - m.trace()).abs() <= 1e-9 * m.trace().abs().max(1.0));
    }

    #[test]
    fn eigenvectors_orthonormal_per_entry() {
        let m = random_hermitian(8, 99);
        let eig = hermitian_eig(&m).unwrap();
        let n = m.order();
        for i in 0..n {
            for j in 0..n {
                let mut dot = c(0.0, 0.0);
                for r in 0..n {
                    dot += eig.eigenvectors.get(r, i).conj() * eig.eigenvectors.get(r, j);
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (dot - expected).norm() < 1e-9,
                    "U^H U [{i}][{j}] = {dot} deviates"
                );
            }
        }
    }

    #[test]
    fn eig_is_deterministic_bit_for_bit() {
        let m = random_hermitian(12, 7);
        let a = hermitian_eig(&m).unwrap();
        let b = hermitian_eig(&m).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors.entries(), b.eigenvectors.entries());
    }

    #[test]
    fn non_hermitian_rejected_with_worst_pair() {
        let mut entries = vec![c(0.0, 0.0); 9];
        entries[0] = c(1.0, 0.0);
        entries[4] = c(1.0, 0.0);
        entries[8] = c(1.0, 0.0);
        entries[1] = c(0.5, 0.2);
        entries[3] = c(0.5, 0.2); // should be the conjugate
        let err = HermitianMatrix::new(3, entries).unwrap_err();
        match err {
            Error::NotHermitian { row, col, .. } => {
                assert_eq!((row, col), (0, 1));
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn trace_examples() {
        assert!((HermitianMatrix::identity(8).trace() - 8.0).abs() < 1e-15);

        let m = HermitianMatrix::identity(8).scale(1.1);
        assert!((m.trace() - 8.8).abs() < 1e-12);

        // P_s a a^H + sigma^2 I with N = 8, P_s = 1, sigma^2 = 0.1: trace 8.8.
        let a: Vec<Complex64> = (0..8)
            .map(|k| Complex64::from_polar(1.0, 0.3 * k as f64))
            .collect();
        let m = HermitianMatrix::from_outer_product(&a, 1.0)
            .add(&HermitianMatrix::identity(8).scale(0.1))
            .unwrap();
        assert!((m.trace() - 8.8).abs() < 1e-12);
    }

    #[test]
    fn quadratic_form_examples() {
        let id = HermitianMatrix::identity(5);
        let mut v = vec![c(0.0, 0.0); 5];
        v[2] = c(0.6, 0.8); // unit norm
        assert!((id.quadratic_form(&v).unwrap() - 1.0).abs() < 1e-14);

        let a: Vec<Complex64> = (0..8)
            .map(|k| Complex64::from_polar(1.0, -0.4 * k as f64))
            .collect();
        let m = HermitianMatrix::from_outer_product(&a, 1.0);
        // a^H (a a^H) a = |a^H a|^2 = N^2 = 64.
        assert!((m.quadratic_form(&a).unwrap() - 64.0).abs() < 1e-10);

        // Null-space direction of eigenvalues {0,4,4,4}: 4(I - u u^H) at u.
        let u = vec![c(0.5, 0.0); 4];
        let m = HermitianMatrix::identity(4)
            .scale(4.0)
            .add(&HermitianMatrix::from_outer_product(&u, -4.0))
            .unwrap();
        assert!(m.quadratic_form(&u).unwrap().abs() < 1e-12);

        assert!(matches!(
            id.quadratic_form(&v[..3]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn regularized_inverse_examples() {
        let id = HermitianMatrix::identity(3);
        let inv = id.regularized_inverse(0.0).unwrap();
        for (a, b) in inv.entries().iter().zip(id.entries()) {
            assert!((a - b).norm() < 1e-12);
        }

        let m = HermitianMatrix::new(2, vec![c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
            .unwrap();
        let inv = m.regularized_inverse(1.0).unwrap();
        assert!((inv.get(0, 0).re - 0.25).abs() < 1e-12);
        assert!((inv.get(1, 1).re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn regularized_inverse_rank_one_spectral_map() {
        let ones = vec![c(1.0, 0.0); 4];
        let m = HermitianMatrix::from_outer_product(&ones, 1.0); // eigenvalues {4,0,0,0}
        let load = 1e-4;
        let inv = m.regularized_inverse(load).unwrap();

        let eig = hermitian_eig(&inv).unwrap();
        // Spectral map: {1/(4+1e-4), 1e4, 1e4, 1e4} sorted descending.
        assert!((eig.eigenvalues[0] - 1e4).abs() / 1e4 < 1e-9);
        assert!((eig.eigenvalues[2] - 1e4).abs() / 1e4 < 1e-9);
        assert!((eig.eigenvalues[3] - 1.0 / 4.0001).abs() < 1e-12);

        // Entrywise against the brute-force inverse.
        let oracle = gauss_jordan_inverse(&m, load);
        for (a, b) in inv.entries().iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-7 * 1e4);
        }

        // Product with (m + load I) is the identity within 1e-7 per entry.
        let shifted = m.add(&HermitianMatrix::identity(4).scale(load)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = c(0.0, 0.0);
                for k in 0..4 {
                    s += inv.get(i, k) * shifted.get(k, j);
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((s - expected).norm() < 1e-7, "product[{i}][{j}] = {s}");
            }
        }
    }

    #[test]
    fn regularized_inverse_rejects_singular() {
        let ones = vec![c(1.0, 0.0); 4];
        let m = HermitianMatrix::from_outer_product(&ones, 1.0);
        assert!(matches!(
            m.regularized_inverse(0.0),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn inverse_commutes_with_input() {
        let m = random_psd(6, 6, 1234);
        let inv = m.regularized_inverse(0.5).unwrap();
        let n = m.order();
        let mut frob = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut ab = c(0.0, 0.0);
                let mut ba = c(0.0, 0.0);
                for k in 0..n {
                    ab += m.get(i, k) * inv.get(k, j);
                    ba += inv.get(i, k) * m.get(k, j);
                }
                frob += (ab - ba).norm_sqr();
                scale += ab.norm_sqr();
            }
        }
        assert!((frob / scale).sqrt() < 1e-8);
    }

    #[test]
    fn eig_counter_increments() {
        let before = eig_invocations();
        let _ = hermitian_eig(&HermitianMatrix::identity(4)).unwrap();
        assert!(eig_invocations() > before);
    }

    mod proptests {
        use super::*;
        use crate::test_util::random_cvec;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn eigenvalue_sum_equals_trace(seed in 0u64..1_000_000, n in 2usize..=16) {
                let m = random_hermitian(n, seed);
                let eig = hermitian_eig(&m).unwrap();
                let eigsum: f64 = eig.eigenvalues.iter().sum();
                let scale = m.trace().abs().max(1.0);
                prop_assert!((eigsum - m.trace()).abs() <= 1e-9 * scale);
            }

            #[test]
            fn quadratic_form_matches_spectral_expansion(seed in 0u64..1_000_000, n in 2usize..=16) {
                let m = random_hermitian(n, seed);
                let eig = hermitian_eig(&m).unwrap();
                let v = random_cvec(n, seed ^ 0xabcd);
                let direct = m.quadratic_form(&v).unwrap();
                let mut spectral = 0.0;
                for i in 0..n {
                    let u = eig.eigenvector(i);
                    let dot: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    spectral += eig.eigenvalues[i] * dot.norm_sqr();
                }
                let scale = direct.abs().max(1.0);
                prop_assert!((direct - spectral).abs() <= 1e-9 * scale);
            }
        }
    }
}
