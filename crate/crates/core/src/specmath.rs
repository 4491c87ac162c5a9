//! Dense complex linear algebra for desk-scale block models: Fourier bases,
//! circulants, Vandermonde inverses and Hermitian eigenvalues.
//!
//! Everything here is written for matrices of dimension at most a few dozen;
//! clarity and exactness win over speed. The Fourier convention is fixed once:
//! [`dft_matrix`] returns the unitary `Q` with `Q[p][q] = exp(+2*pi*j*p*q/n)/sqrt(n)`,
//! chosen so that a circulant with first row `c` factors as `Q * diag(s) * Q^H`
//! with `s[k] = sum_m c[m] * exp(+2*pi*j*k*m/n)`. For a channel first row
//! `[h0, 0, .., 0, h_nu, .., h1]` this spectrum is exactly
//! `sum_l h_l * exp(-2*pi*j*k*l/n)`, the frequency-domain taps.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest dimension the eigen solver accepts.
pub const MAX_EIGEN_DIM: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Build from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidDimension("non-finite entry".into()));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// C = self * other. Panics on inner-dimension mismatch.
    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "matrix multiply dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// New matrix keeping the listed rows, in the given order.
    pub fn keep_rows(&self, rows: &[usize]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..self.cols {
                out.set(i, j, self.get(r, j));
            }
        }
        out
    }

    /// New matrix keeping the first `n` columns.
    pub fn keep_first_cols(&self, n: usize) -> ComplexMatrix {
        assert!(n <= self.cols);
        let mut out = ComplexMatrix::zeros(self.rows, n);
        for i in 0..self.rows {
            for j in 0..n {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Max entry deviation from the Hermitian property A = A^H.
    pub fn hermitian_deviation(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    /// Determinant via LU with partial pivoting.
    pub fn determinant(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = a[col * n + col].norm_sqr();
            for r in col + 1..n {
                let mag = a[r * n + col].norm_sqr();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
                det = -det;
            }
            let pivot = a[col * n + col];
            det *= pivot;
            for r in col + 1..n {
                let factor = a[r * n + col] / pivot;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j] * factor;
                    a[r * n + j] -= v;
                }
            }
        }
        det
    }

    /// Inverse via Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<ComplexMatrix> {
        assert_eq!(self.rows, self.cols, "inverse needs a square matrix");
        let n = self.rows;
        let mut aug = ComplexMatrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, n + i, Complex64::new(1.0, 0.0));
        }
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = aug.get(col, col).norm_sqr();
            for r in col + 1..n {
                let mag = aug.get(r, col).norm_sqr();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag < 1e-300 {
                return Err(Error::SingularMatrix(format!(
                    "pivot collapsed at column {col}"
                )));
            }
            if pivot_row != col {
                for j in 0..2 * n {
                    let tmp = aug.get(col, j);
                    aug.set(col, j, aug.get(pivot_row, j));
                    aug.set(pivot_row, j, tmp);
                }
            }
            let inv_pivot = Complex64::new(1.0, 0.0) / aug.get(col, col);
            for j in 0..2 * n {
                let v = aug.get(col, j) * inv_pivot;
                aug.set(col, j, v);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = aug.get(r, col);
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..2 * n {
                    let v = aug.get(r, j) - factor * aug.get(col, j);
                    aug.set(r, j, v);
                }
            }
        }
        let mut inv = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv.set(i, j, aug.get(i, n + j));
            }
        }
        Ok(inv)
    }
}

/// Unitary Fourier basis: `Q[p][q] = exp(+2*pi*j*p*q/n) / sqrt(n)`.
///
/// Circulant matrices factor as `Q * diag(spectrum) * Q^H` in this basis; see
/// the module docs for the spectrum convention.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("DFT order must be >= 1".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |p, q| {
        // Reduce p*q mod n before the trig call to keep angles small.
        let k = (p * q) % n;
        let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        Complex64::from_polar(scale, angle)
    }))
}

/// Circulant matrix with the given first row: entry `(i, j)` is
/// `first_row[(j - i) mod n]`, so each row is the previous one rotated right.
pub fn circulant(first_row: &[Complex64]) -> Result<ComplexMatrix> {
    let n = first_row.len();
    if n == 0 {
        return Err(Error::InvalidDimension(
            "circulant needs a non-empty first row".into(),
        ));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        first_row[(j + n - i) % n]
    }))
}

/// Row norms `sum_i |a_{l,i}|^2` of `A = V^{-1}` for the Vandermonde matrix
/// `V[i][m] = theta^(k_i * m)`, `theta = exp(-2*pi*j/t_s)`, built on the given
/// distinct frequency indices.
pub fn vandermonde_inverse_row_norms(indices: &[usize], t_s: usize) -> Result<Vec<f64>> {
    let n = indices.len();
    if n == 0 {
        return Err(Error::InvalidDimension(
            "need at least one frequency index".into(),
        ));
    }
    if n > t_s {
        return Err(Error::InvalidDimension(format!(
            "{n} indices exceed block length {t_s}"
        )));
    }
    for (i, &k) in indices.iter().enumerate() {
        if k >= t_s {
            return Err(Error::InvalidIndex(format!(
                "frequency index {k} >= block length {t_s}"
            )));
        }
        if indices[..i].contains(&k) {
            return Err(Error::SingularMatrix(format!(
                "duplicate frequency index {k} makes the Vandermonde matrix singular"
            )));
        }
    }
    let v = ComplexMatrix::from_fn(n, n, |i, m| {
        let k = (indices[i] * m) % t_s;
        let angle = -2.0 * std::f64::consts::PI * k as f64 / t_s as f64;
        Complex64::from_polar(1.0, angle)
    });
    let a = v.inverse()?;
    Ok((0..n)
        .map(|l| (0..n).map(|i| a.get(l, i).norm_sqr()).sum())
        .collect())
}

/// Spectrum of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenReport {
    /// Eigenvalues sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Jacobi sweeps used.
    pub iteration_count: usize,
    /// `||A - U D U^H||_F / ||A||_F` (0 for the zero matrix).
    pub residual: f64,
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// `tol` bounds both the accepted Hermitian asymmetry of the input (relative
/// to its largest entry) and the relative off-diagonal mass at convergence.
pub fn hermitian_eigenvalues(a: &ComplexMatrix, tol: f64) -> Result<EigenReport> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidDimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n > MAX_EIGEN_DIM {
        return Err(Error::DeskScaleLimit(format!(
            "eigen solver capped at dimension {MAX_EIGEN_DIM}, got {n}"
        )));
    }
    let scale = a.max_abs();
    let deviation = a.hermitian_deviation();
    if deviation > tol * scale.max(1.0) {
        return Err(Error::NotHermitian {
            deviation,
            tol: tol * scale.max(1.0),
        });
    }

    let norm = a.frobenius_norm();
    let mut work = a.clone();
    // Force exact Hermitian symmetry before iterating.
    for i in 0..n {
        let d = work.get(i, i);
        work.set(i, i, Complex64::new(d.re, 0.0));
        for j in i + 1..n {
            let avg = (work.get(i, j) + work.get(j, i).conj()) * 0.5;
            work.set(i, j, avg);
            work.set(j, i, avg.conj());
        }
    }
    let mut u = ComplexMatrix::identity(n);

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j).norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&work) > tol * norm.max(f64::MIN_POSITIVE) && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = work.get(p, q);
                let r = apq.norm();
                if r <= tol * norm.max(f64::MIN_POSITIVE) / (n as f64) {
                    continue;
                }
                let phase = apq / r;
                let app = work.get(p, p).re;
                let aqq = work.get(q, q).re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_phase = phase * s;

                // Columns: B <- B * U with U[:,p] = (c, -s e^{-j phi}),
                // U[:,q] = (s e^{j phi}, c) in the (p, q) plane.
                for i in 0..n {
                    let bip = work.get(i, p);
                    let biq = work.get(i, q);
                    work.set(i, p, bip * c - biq * s_phase.conj());
                    work.set(i, q, bip * s_phase + biq * c);
                }
                // Rows: B <- U^H * B.
                for j in 0..n {
                    let bpj = work.get(p, j);
                    let bqj = work.get(q, j);
                    work.set(p, j, bpj * c - bqj * s_phase);
                    work.set(q, j, bpj * s_phase.conj() + bqj * c);
                }
                // The pivot is zero by construction; pin it against drift.
                work.set(p, q, Complex64::new(0.0, 0.0));
                work.set(q, p, Complex64::new(0.0, 0.0));
                let dp = work.get(p, p);
                let dq = work.get(q, q);
                work.set(p, p, Complex64::new(dp.re, 0.0));
                work.set(q, q, Complex64::new(dq.re, 0.0));

                for i in 0..n {
                    let uip = u.get(i, p);
                    let uiq = u.get(i, q);
                    u.set(i, p, uip * c - uiq * s_phase.conj());
                    u.set(i, q, uip * s_phase + uiq * c);
                }
            }
        }
    }

    let final_off = off_norm(&work);
    if final_off > tol * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps; off-diagonal residual {:.3e}",
            final_off / norm.max(f64::MIN_POSITIVE)
        )));
    }

    let mut eigenvalues: Vec<f64> = (0..n).map(|i| work.get(i, i).re).collect();
    // Reconstruction residual against the ORIGINAL input.
    let mut recon = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += u.get(i, k) * eigenvalues[k] * u.get(j, k).conj();
            }
            recon.set(i, j, acc);
        }
    }
    let residual = if norm > 0.0 {
        a.sub(&recon).frobenius_norm() / norm
    } else {
        0.0
    };
    eigenvalues.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));

    Ok(EigenReport {
        eigenvalues,
        iteration_count: sweeps,
        residual,
    })
}
