//! Small dense linear algebra: column-major matrices, thin QR, one-sided
//! Jacobi SVD, symmetric Jacobi eigenvalues, and a warm-started block
//! subspace SVD used by the completion solver.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from row-major values.
    pub fn from_row_major(rows: usize, cols: usize, values: &[S]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: rows * cols,
            });
        }
        Ok(Self::from_fn(rows, cols, |i, j| values[i * cols + j]))
    }

    pub fn to_row_major(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    /// Independent standard normal entries.
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| S::standard_normal(rng)).collect();
        Self { rows, cols, data }
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[S] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [S] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    /// Column-major backing slice.
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Leading `k` columns.
    pub fn leading_cols(&self, k: usize) -> Self {
        let k = k.min(self.cols);
        Self {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for k in 0..other.cols {
            let dst = out.col_mut(k);
            for j in 0..self.cols {
                let w = other[(j, k)];
                if w == S::zero() {
                    continue;
                }
                axpy(w, self.col(j), dst);
            }
        }
        out
    }

    /// `self^H * other`.
    pub fn adjoint_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "adjoint_matmul shape mismatch");
        Self::from_fn(self.cols, other.cols, |i, j| dotc(self.col(i), other.col(j)))
    }

    /// `self * other^H`.
    pub fn matmul_adjoint(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "matmul_adjoint shape mismatch");
        let mut out = Self::zeros(self.rows, other.rows);
        for k in 0..self.cols {
            let a = self.col(k);
            for j in 0..other.rows {
                let w = other[(j, k)].conj();
                if w == S::zero() {
                    continue;
                }
                axpy(w, a, out.col_mut(j));
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x.abs_sqr()).sum::<f64>())
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        libm::sqrt(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (*a - *b).abs_sqr())
                .sum::<f64>(),
        )
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.scale(k)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "add shape mismatch");
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += *b);
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

impl DenseMatrix<f64> {
    /// Lift a real matrix into another scalar field.
    pub fn to_scalar<T: Scalar>(&self) -> DenseMatrix<T> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| T::from_real(x)).collect(),
        }
    }
}

impl<S> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl<S> IndexMut<(usize, usize)> for DenseMatrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

/// `y += a * x`
#[inline]
pub fn axpy<S: Scalar>(a: S, x: &[S], y: &mut [S]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

/// `x^H y`
#[inline]
pub fn dotc<S: Scalar>(x: &[S], y: &[S]) -> S {
    // Four partial sums so the loop vectorizes.
    let mut acc = [S::zero(); 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            acc[k] += a[k].conj() * b[k];
        }
    }
    let mut tail = S::zero();
    for (a, b) in xr.iter().zip(yr) {
        tail += a.conj() * *b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm2<S: Scalar>(x: &[S]) -> f64 {
    libm::sqrt(x.iter().map(|v| v.abs_sqr()).sum::<f64>())
}

/// Thin QR by modified Gram-Schmidt with one reorthogonalization pass.
///
/// Columns that vanish after projection get `R[j][j] = 0` and are replaced
/// by a unit vector orthogonal to the previous columns, so `Q` always has
/// orthonormal columns. Requires `rows >= cols`.
pub fn qr_thin<S: Scalar>(a: &DenseMatrix<S>) -> (DenseMatrix<S>, DenseMatrix<S>) {
    let (n, k) = a.shape();
    assert!(n >= k, "qr_thin needs a tall matrix");
    let mut q = a.clone();
    let mut r = DenseMatrix::zeros(k, k);
    for j in 0..k {
        let original = norm2(q.col(j));
        for _pass in 0..2 {
            for i in 0..j {
                let (left, right) = q.as_mut_slice().split_at_mut(j * n);
                let qi = &left[i * n..(i + 1) * n];
                let qj = &mut right[..n];
                let c = dotc(qi, qj);
                r[(i, j)] += c;
                axpy(-c, qi, qj);
            }
        }
        let nrm = norm2(q.col(j));
        if nrm > 1e-13 * original && nrm > f64::MIN_POSITIVE {
            r[(j, j)] = S::from_real(nrm);
            let inv = 1.0 / nrm;
            q.col_mut(j).iter_mut().for_each(|x| *x = x.scale(inv));
        } else {
            r[(j, j)] = S::zero();
            fill_orthogonal_unit(&mut q, j);
        }
    }
    (q, r)
}

/// Overwrite column `j` with a unit vector orthogonal to columns `0..j`.
fn fill_orthogonal_unit<S: Scalar>(q: &mut DenseMatrix<S>, j: usize) {
    let n = q.rows();
    for e in 0..n {
        let mut v = vec![S::zero(); n];
        v[e] = S::one();
        for _pass in 0..2 {
            for i in 0..j {
                let c = dotc(q.col(i), &v);
                axpy(-c, q.col(i), &mut v);
            }
        }
        let nrm = norm2(&v);
        if nrm > 1e-6 {
            let inv = 1.0 / nrm;
            for (dst, x) in q.col_mut(j).iter_mut().zip(&v) {
                *dst = x.scale(inv);
            }
            return;
        }
    }
    unreachable!("no orthogonal complement for column {j} of a {n}-row matrix");
}

/// Singular value decomposition `A = U diag(s) V^H` with `s` descending.
#[derive(Debug, Clone)]
pub struct Svd<S> {
    pub u: DenseMatrix<S>,
    pub s: Vec<f64>,
    pub v: DenseMatrix<S>,
}

const JACOBI_EPS: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Accurate to working precision for every singular value, including tiny
/// ones, which Gram-matrix approaches lose.
pub fn svd_jacobi<S: Scalar>(a: &DenseMatrix<S>) -> Svd<S> {
    if a.rows() < a.cols() {
        let t = svd_jacobi(&a.adjoint());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DenseMatrix::<S>::identity(n);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.col(p).iter().map(|x| x.abs_sqr()).sum::<f64>();
                let beta = w.col(q).iter().map(|x| x.abs_sqr()).sum::<f64>();
                let gamma = dotc(w.col(p), w.col(q));
                let g = gamma.abs();
                if g <= JACOBI_EPS * libm::sqrt(alpha * beta) || g == 0.0 {
                    continue;
                }
                rotated = true;
                // Rotate column q by the conjugate phase of gamma so the
                // inner product becomes real and positive.
                let phase = gamma.scale(1.0 / g).conj();
                w.col_mut(q).iter_mut().for_each(|x| *x *= phase);
                v.col_mut(q).iter_mut().for_each(|x| *x *= phase);

                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_cols(&mut w, p, q, c, s);
                rotate_cols(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut s: Vec<f64> = (0..n).map(|j| norm2(w.col(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

    let mut u = DenseMatrix::<S>::zeros(m, n);
    let mut v_sorted = DenseMatrix::<S>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = s[src];
        if sigma > 0.0 {
            let inv = 1.0 / sigma;
            for (o, x) in u.col_mut(dst).iter_mut().zip(w.col(src)) {
                *o = x.scale(inv);
            }
        }
        v_sorted.col_mut(dst).copy_from_slice(v.col(src));
    }
    // Zero singular values leave empty U columns; complete the basis.
    for j in 0..n {
        if s[order[j]] == 0.0 {
            fill_orthogonal_unit(&mut u, j);
        }
    }
    let sorted: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    s = sorted;
    Svd { u, s, v: v_sorted }
}

/// Columns `p, q` <- `(c*a_p - s*a_q, s*a_p + c*a_q)`.
fn rotate_cols<S: Scalar>(a: &mut DenseMatrix<S>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    let (left, right) = a.as_mut_slice().split_at_mut(q * n);
    let cp = &mut left[p * n..(p + 1) * n];
    let cq = &mut right[..n];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = xp.scale(c) - yq.scale(s);
        *y = xp.scale(s) + yq.scale(c);
    }
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi, descending.
pub fn symmetric_eigenvalues(a: &DenseMatrix<f64>) -> Vec<f64> {
    assert_eq!(a.rows(), a.cols(), "symmetric_eigenvalues needs a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if libm::sqrt(off) <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if libm::fabs(apq) <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// Leading singular triplets of `w` from one block subspace step started at
/// the orthonormal columns of `start` (`cols x b`).
///
/// Returns the Rayleigh-Ritz approximation `w ~ U diag(s) V^H` restricted to
/// the block; `V` doubles as the warm start for the next call.
pub fn subspace_svd<S: Scalar>(w: &DenseMatrix<S>, start: &DenseMatrix<S>) -> Svd<S> {
    assert_eq!(w.cols(), start.rows());
    subspace_svd_with(|x| w.matmul(x), |q| w.adjoint_matmul(q), start)
}

/// [`subspace_svd`] for an operator given by its products `W X` and `W^H Q`.
pub fn subspace_svd_with<S, F, G>(apply: F, apply_adjoint: G, start: &DenseMatrix<S>) -> Svd<S>
where
    S: Scalar,
    F: Fn(&DenseMatrix<S>) -> DenseMatrix<S>,
    G: Fn(&DenseMatrix<S>) -> DenseMatrix<S>,
{
    let y = apply(start);
    let (q, _) = qr_thin(&y);
    // W^H q = (q^H W)^H, a tall cols x b matrix.
    let bh = apply_adjoint(&q);
    let (q2, r) = qr_thin(&bh);
    // bh = q2 r and r = Ur S Vr^H, so W ~ q bh^H = (q Vr) S (q2 Ur)^H.
    let small = svd_jacobi(&r);
    Svd {
        u: q.matmul(&small.v),
        s: small.s,
        v: q2.matmul(&small.u),
    }
}

/// `b` orthonormal random columns of length `n`.
pub fn random_orthonormal<S: Scalar, R: Rng + ?Sized>(n: usize, b: usize, rng: &mut R) -> DenseMatrix<S> {
    let g = DenseMatrix::<S>::random_normal(n, b, rng);
    qr_thin(&g).0
}
