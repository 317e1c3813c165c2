//! Dense complex matrices, Hermitian eigenvalues and Haar unitaries.
//!
//! Storage is row-major with separate real and imaginary planes so the
//! inner loops of products and rank-2 updates vectorize.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            re: vec![0.0; rows * cols],
            im: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.re[i * n + i] = x;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = f(i, j);
                m.re[i * cols + j] = z.re;
                m.im[i * cols + j] = z.im;
            }
        }
        m
    }

    /// Entries i.i.d. standard complex Gaussian, `E|z|² = 1`.
    pub fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = Self::zeros(rows, cols);
        for k in 0..rows * cols {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            m.re[k] = s * a;
            m.im[k] = s * b;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.cols + j;
        Complex64::new(self.re[k], self.im[k])
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        let k = i * self.cols + j;
        self.re[k] = z.re;
        self.im[k] = z.im;
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.re[j * self.rows + i] = self.re[i * self.cols + j];
                t.im[j * self.rows + i] = -self.im[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.re.iter_mut().chain(self.im.iter_mut()).for_each(|x| *x *= s);
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            re: self.re.iter().zip(&other.re).map(|(a, b)| a + b).collect(),
            im: self.im.iter().zip(&other.im).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        assert!(self.rows == self.cols && d.len() == self.rows);
        for (i, x) in d.iter().enumerate() {
            self.re[i * self.cols + i] += x;
        }
    }

    /// Multiply column `j` by `d[j]`.
    pub fn scale_columns(&mut self, d: &[Complex64]) {
        assert_eq!(d.len(), self.cols);
        for i in 0..self.rows {
            for (j, s) in d.iter().enumerate() {
                let k = i * self.cols + j;
                let (a, b) = (self.re[k], self.im[k]);
                self.re[k] = a * s.re - b * s.im;
                self.im[k] = a * s.im + b * s.re;
            }
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, m) = (self.rows, other.cols);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            let (ore, oim) = (&mut out.re[i * m..(i + 1) * m], &mut out.im[i * m..(i + 1) * m]);
            for k in 0..self.cols {
                let (ar, ai) = (self.re[i * self.cols + k], self.im[i * self.cols + k]);
                if ar == 0.0 && ai == 0.0 {
                    continue;
                }
                let (bre, bim) = (&other.re[k * m..(k + 1) * m], &other.im[k * m..(k + 1) * m]);
                for j in 0..m {
                    ore[j] += ar * bre[j] - ai * bim[j];
                    oim[j] += ar * bim[j] + ai * bre[j];
                }
            }
        }
        out
    }

    /// `U M U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        u.matmul(self).matmul(&u.adjoint())
    }

    pub fn frobenius(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.re.len())
            .map(|k| self.re[k].hypot(self.im[k]))
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.re[i * self.cols + i]).collect()
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                let d = self.get(i, j) - self.get(j, i).conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// `|det|` through Householder QR.
    pub fn abs_det(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let (_, r_diag) = householder_qr(self.clone());
        r_diag.iter().map(|r| r.norm()).product()
    }
}

/// Hermitian matrix, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

/// Entrywise symmetry tolerance, relative to the largest entry.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::validation(format!("matrix is {}x{}, not square", m.rows(), m.cols())));
        }
        let defect = m.hermitian_defect();
        if defect > HERMITIAN_TOLERANCE * m.max_abs().max(1.0) {
            return Err(Error::validation(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(HermitianMatrix(m))
    }

    /// Trusted constructor for matrices Hermitian by construction; the
    /// diagonal is made exactly real and the halves exactly conjugate.
    pub(crate) fn symmetrized(mut m: CMatrix) -> Self {
        let n = m.rows;
        for i in 0..n {
            m.im[i * n + i] = 0.0;
            for j in 0..i {
                let a = 0.5 * (m.get(i, j) + m.get(j, i).conj());
                m.set(i, j, a);
                m.set(j, i, a.conj());
            }
        }
        HermitianMatrix(m)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        HermitianMatrix(CMatrix::from_diagonal(d))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0.get(i, j)
    }

    pub fn add(&self, other: &Self) -> Self {
        HermitianMatrix(self.0.add(&other.0))
    }

    /// `U M U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::symmetrized(self.0.conjugate_by(u))
    }

    /// `F† M F`.
    pub fn compress(&self, f: &CMatrix) -> Self {
        Self::symmetrized(f.adjoint().matmul(&self.0).matmul(f))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.0.diagonal()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(self)
    }
}

/// Sweeps allowed per eigenvalue in the QL iteration.
const QL_MAX_SWEEPS: usize = 50;

/// Reduce to real symmetric tridiagonal form `(d, e)` by Householder
/// reflections; `e[k]` couples `k` and `k+1`. With `vectors`, also returns
/// the unitary `Q` with `A = Q T Q†` for the real `T`.
fn tridiagonalize(m: &HermitianMatrix, vectors: bool) -> (Vec<f64>, Vec<f64>, Option<CMatrix>) {
    let n = m.dim();
    let mut a = m.0.clone();
    let mut q = vectors.then(|| CMatrix::identity(n));
    let mut offdiag = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
    let mut vr = vec![0.0; n];
    let mut vi = vec![0.0; n];
    let mut pr = vec![0.0; n];
    let mut pi = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        // Column k below the diagonal.
        let lo = k + 1;
        let x0 = a.get(lo, k);
        let mut norm2 = 0.0;
        for i in lo..n {
            let z = a.get(i, k);
            norm2 += z.norm_sqr();
        }
        let norm = norm2.sqrt();
        let tail = norm2 - x0.norm_sqr();
        if tail <= f64::MIN_POSITIVE * 16.0 {
            offdiag[k] = x0;
            continue;
        }
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        // v = x − α e₁, H = I − 2 v v†/(v†v).
        for i in lo..n {
            let z = a.get(i, k);
            vr[i] = z.re;
            vi[i] = z.im;
        }
        vr[lo] -= alpha.re;
        vi[lo] -= alpha.im;
        let vnorm2: f64 = (lo..n).map(|i| vr[i] * vr[i] + vi[i] * vi[i]).sum();
        let tau = 2.0 / vnorm2;
        // p = τ A v on the trailing block.
        for i in lo..n {
            let (row_r, row_i) = (&a.re[i * n + lo..i * n + n], &a.im[i * n + lo..i * n + n]);
            let (xr, xi) = (&vr[lo..n], &vi[lo..n]);
            let (mut sr, mut si) = (0.0, 0.0);
            for j in 0..row_r.len() {
                sr += row_r[j] * xr[j] - row_i[j] * xi[j];
                si += row_r[j] * xi[j] + row_i[j] * xr[j];
            }
            pr[i] = tau * sr;
            pi[i] = tau * si;
        }
        // w = p − (τ/2)(v†p) v
        let (mut cr, mut ci) = (0.0, 0.0);
        for i in lo..n {
            cr += vr[i] * pr[i] + vi[i] * pi[i];
            ci += vr[i] * pi[i] - vi[i] * pr[i];
        }
        let (kr, ki) = (0.5 * tau * cr, 0.5 * tau * ci);
        for i in lo..n {
            let (a_, b_) = (vr[i], vi[i]);
            pr[i] -= kr * a_ - ki * b_;
            pi[i] -= kr * b_ + ki * a_;
        }
        // A ← A − v w† − w v†
        for i in lo..n {
            let (v_r, v_i, w_r, w_i) = (vr[i], vi[i], pr[i], pi[i]);
            let row_r = &mut a.re[i * n + lo..i * n + n];
            let row_i = &mut a.im[i * n + lo..i * n + n];
            let (xr, xi, yr, yi) = (&vr[lo..n], &vi[lo..n], &pr[lo..n], &pi[lo..n]);
            for j in 0..row_r.len() {
                row_r[j] -= v_r * yr[j] + v_i * yi[j] + w_r * xr[j] + w_i * xi[j];
                row_i[j] -= v_i * yr[j] - v_r * yi[j] + w_i * xr[j] - w_r * xi[j];
            }
        }
        offdiag[k] = alpha;
        for i in lo..n {
            a.set(i, k, Complex64::new(0.0, 0.0));
            a.set(k, i, Complex64::new(0.0, 0.0));
        }
        a.set(lo, k, alpha);
        a.set(k, lo, alpha.conj());
        if let Some(q) = q.as_mut() {
            // Q ← Q H
            for r in 0..n {
                let (mut sr, mut si) = (0.0, 0.0);
                for i in lo..n {
                    let (qr, qi) = (q.re[r * n + i], q.im[r * n + i]);
                    sr += qr * vr[i] - qi * vi[i];
                    si += qr * vi[i] + qi * vr[i];
                }
                let (sr, si) = (tau * sr, tau * si);
                for i in lo..n {
                    q.re[r * n + i] -= sr * vr[i] + si * vi[i];
                    q.im[r * n + i] -= si * vr[i] - sr * vi[i];
                }
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a.re[i * n + i]).collect();
    let e: Vec<f64> = offdiag.iter().map(|z| z.norm()).collect();
    if let Some(q) = q.as_mut() {
        // Column phases that make the off-diagonal real and nonnegative.
        let mut phases = vec![Complex64::new(1.0, 0.0); n];
        for k in 0..n.saturating_sub(1) {
            let b = offdiag[k];
            phases[k + 1] = if b.norm() > 0.0 { phases[k] * b / b.norm() } else { phases[k] };
        }
        q.scale_columns(&phases);
    }
    (d, e, q)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. Eigenvalues are
/// left in `d`; rotations are applied to the columns of `z` if given.
fn tridiagonal_ql(d: &mut [f64], e_in: &[f64], mut z: Option<&mut CMatrix>) -> Result<()> {
    let n = d.len();
    let mut e = e_in.to_vec();
    e.push(0.0);
    // Deflation is judged against the matrix norm as well as the local
    // diagonal, otherwise clusters of zero eigenvalues never split off.
    let norm = d.iter().chain(&e).fold(0.0f64, |m, x| m.max(x.abs()));
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd.max(norm) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_SWEEPS {
                return Err(Error::Numeric(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} after {QL_MAX_SWEEPS} sweeps"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let cols = z.cols;
                    for k in 0..z.rows {
                        let (a_r, a_i) = (z.re[k * cols + i + 1], z.im[k * cols + i + 1]);
                        let (b_r, b_i) = (z.re[k * cols + i], z.im[k * cols + i]);
                        z.re[k * cols + i + 1] = s * b_r + c * a_r;
                        z.im[k * cols + i + 1] = s * b_i + c * a_i;
                        z.re[k * cols + i] = c * b_r - s * a_r;
                        z.im[k * cols + i] = c * b_i - s * a_i;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// All eigenvalues, ascending: Householder tridiagonalization followed by
/// implicit-shift QL.
pub fn hermitian_eigenvalues(m: &HermitianMatrix) -> Result<Vec<f64>> {
    let (mut d, e, _) = tridiagonalize(m, false);
    tridiagonal_ql(&mut d, &e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Eigenvalues ascending and the unitary whose columns are the matching
/// eigenvectors.
pub fn hermitian_eigen(m: &HermitianMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (mut d, e, q) = tridiagonalize(m, true);
    let mut q = q.expect("vectors requested");
    tridiagonal_ql(&mut d, &e, Some(&mut q))?;
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let n = d.len();
    let vecs = CMatrix::from_fn(n, n, |i, j| q.get(i, order[j]));
    Ok((order.iter().map(|&k| d[k]).collect(), vecs))
}

/// Householder QR in place. Returns the explicit `Q` and the diagonal of
/// `R`.
fn householder_qr(mut a: CMatrix) -> (CMatrix, Vec<Complex64>) {
    let (rows, cols) = (a.rows, a.cols);
    let steps = rows.min(cols);
    let mut reflectors: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(steps);
    let mut r_diag = Vec::with_capacity(steps);
    for k in 0..steps {
        let x0 = a.get(k, k);
        let norm = (k..rows).map(|i| a.get(i, k).norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push((vec![0.0; rows], vec![0.0; rows], 0.0));
            r_diag.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -phase * norm;
        let mut vr = vec![0.0; rows];
        let mut vi = vec![0.0; rows];
        for i in k..rows {
            let z = a.get(i, k);
            vr[i] = z.re;
            vi[i] = z.im;
        }
        vr[k] -= alpha.re;
        vi[k] -= alpha.im;
        let vnorm2: f64 = (k..rows).map(|i| vr[i] * vr[i] + vi[i] * vi[i]).sum();
        let tau = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };
        // A ← H A on columns k..: row-oriented accumulation of v† A.
        let mut sr = vec![0.0; cols];
        let mut si = vec![0.0; cols];
        for i in k..rows {
            let (v_r, v_i) = (vr[i], vi[i]);
            let (row_r, row_i) = (&a.re[i * cols..(i + 1) * cols], &a.im[i * cols..(i + 1) * cols]);
            for j in k..cols {
                sr[j] += v_r * row_r[j] + v_i * row_i[j];
                si[j] += v_r * row_i[j] - v_i * row_r[j];
            }
        }
        for i in k..rows {
            let (v_r, v_i) = (tau * vr[i], tau * vi[i]);
            let row_r = &mut a.re[i * cols..(i + 1) * cols];
            let row_i = &mut a.im[i * cols..(i + 1) * cols];
            for j in k..cols {
                row_r[j] -= v_r * sr[j] - v_i * si[j];
                row_i[j] -= v_r * si[j] + v_i * sr[j];
            }
        }
        r_diag.push(alpha);
        reflectors.push((vr, vi, tau));
    }
    // Q = H₀ H₁ … applied to the identity, last reflector first.
    let mut q = CMatrix::identity(rows);
    for (k, (vr, vi, tau)) in reflectors.iter().enumerate().rev() {
        if *tau == 0.0 {
            continue;
        }
        let mut sr = vec![0.0; rows];
        let mut si = vec![0.0; rows];
        for i in k..rows {
            let (v_r, v_i) = (vr[i], vi[i]);
            let (row_r, row_i) = (&q.re[i * rows..(i + 1) * rows], &q.im[i * rows..(i + 1) * rows]);
            for j in k..rows {
                sr[j] += v_r * row_r[j] + v_i * row_i[j];
                si[j] += v_r * row_i[j] - v_i * row_r[j];
            }
        }
        for i in k..rows {
            let (v_r, v_i) = (tau * vr[i], tau * vi[i]);
            let row_r = &mut q.re[i * rows..(i + 1) * rows];
            let row_i = &mut q.im[i * rows..(i + 1) * rows];
            for j in k..rows {
                row_r[j] -= v_r * sr[j] - v_i * si[j];
                row_i[j] -= v_r * si[j] + v_i * sr[j];
            }
        }
    }
    (q, r_diag)
}

/// Haar-distributed unitary: QR of a standard complex Gaussian matrix with
/// the phases fixed so that `R` has a positive real diagonal.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::gaussian(n, n, rng);
    let (mut q, r_diag) = householder_qr(g);
    let phases: Vec<Complex64> = r_diag
        .iter()
        .map(|r| if r.norm() > 0.0 { r / r.norm() } else { Complex64::new(1.0, 0.0) })
        .collect();
    q.scale_columns(&phases);
    q
}
