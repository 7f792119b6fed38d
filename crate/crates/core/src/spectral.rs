//! Top singular values of sampling masks, the SG ratio, and bipartite
//! connectivity.
//!
//! σ₁ comes from Golub-Kahan-Lanczos bidiagonalization with full
//! reorthogonalization on the sparse 0/1 operator. σ₂ is the top singular
//! value of the implicitly deflated operator `M - σ₁ u₁ v₁ᵀ`, found by a
//! second run. A single Krylov run cannot resolve a repeated top value (the
//! identity mask, disconnected equal blocks), which the deflated run handles
//! without special cases.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{dotc, norm2, svd_jacobi, symmetric_eigenvalues, DenseMatrix};
use crate::error::{Error, Result};
use crate::mask::SamplingMask;
use crate::scalar::Scalar;

/// Fixed seed of the random part of the start vectors.
const START_SEED: u64 = 0x5347_5f52_4154_494f;

/// Largest `n * m` accepted by [`dense_svd_oracle`].
pub const DENSE_ORACLE_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Relative tolerance on σ₁ and σ₂.
    pub tol: f64,
    /// Iteration cap per Lanczos run; `None` means `10 * min(n, m) + 500`.
    pub max_iter: Option<usize>,
    /// Drop all-zero rows and columns first. Nonzero singular values are
    /// unchanged; the operator just gets smaller.
    pub trim_empty: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            trim_empty: false,
        }
    }
}

/// σ₁, σ₂ and their ratio for one mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSummary {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sg_ratio: f64,
    /// Lanczos steps over both runs.
    pub iterations: usize,
    pub converged: bool,
}

/// Real linear operator with its transpose.
trait Operator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn apply_transpose(&self, y: &[f64], x: &mut [f64]);
}

impl Operator for SamplingMask {
    fn rows(&self) -> usize {
        SamplingMask::rows(self)
    }
    fn cols(&self) -> usize {
        SamplingMask::cols(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        SamplingMask::apply(self, x, y)
    }
    fn apply_transpose(&self, y: &[f64], x: &mut [f64]) {
        SamplingMask::apply_transpose(self, y, x)
    }
}

/// `M - s u vᵀ`, never materialized.
struct Deflated<'a> {
    mask: &'a SamplingMask,
    s: f64,
    u: &'a [f64],
    v: &'a [f64],
}

impl Operator for Deflated<'_> {
    fn rows(&self) -> usize {
        self.mask.rows()
    }
    fn cols(&self) -> usize {
        self.mask.cols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mask.apply(x, y);
        let c = self.s * dotc(self.v, x);
        y.iter_mut().zip(self.u).for_each(|(yi, ui)| *yi -= c * ui);
    }
    fn apply_transpose(&self, y: &[f64], x: &mut [f64]) {
        self.mask.apply_transpose(y, x);
        let c = self.s * dotc(self.u, y);
        x.iter_mut().zip(self.v).for_each(|(xi, vi)| *xi -= c * vi);
    }
}

/// Top Ritz triple of a Lanczos run.
struct TopTriple {
    sigma: f64,
    u: Vec<f64>,
    v: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Remove the components along `basis` from `x`, twice for stability.
fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dotc(b, x);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= c * bi);
        }
    }
}

/// Golub-Kahan-Lanczos for the largest singular value of `op`.
///
/// Stops once the residual bound `beta_k |e_kᵀ x|` of the top Ritz value
/// falls below `rel_tol * theta + abs_tol`, on breakdown (invariant Krylov
/// subspace), or when the Krylov space is exhausted.
fn lanczos_top(op: &dyn Operator, start: Vec<f64>, rel_tol: f64, abs_tol: f64, max_iter: usize) -> TopTriple {
    let (n, m) = (op.rows(), op.cols());
    // One step past min(n, m) lets an exhausted left space show up as a
    // zero alpha, which keeps the final beta in the bidiagonal.
    let kmax = max_iter.min(n.min(m) + 1).max(1);
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(kmax + 1);
    let mut us: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    let mut alphas: Vec<f64> = Vec::with_capacity(kmax);
    let mut betas: Vec<f64> = Vec::with_capacity(kmax);

    let nrm = norm2(&start);
    if nrm == 0.0 {
        return TopTriple {
            sigma: 0.0,
            u: vec![0.0; n],
            v: vec![0.0; m],
            iterations: 0,
            converged: true,
        };
    }
    vs.push(start.iter().map(|x| x / nrm).collect());

    let mut converged = false;
    let mut theta;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    loop {
        let k = alphas.len();
        op.apply(&vs[k], &mut u);
        if let (Some(&b), Some(prev)) = (betas.last(), us.last()) {
            u.iter_mut().zip(prev).for_each(|(ui, pi)| *ui -= b * pi);
        }
        orthogonalize(&mut u, &us);
        let alpha = norm2(&u);
        let mut breakdown = alpha <= abs_tol;
        if breakdown {
            alphas.push(0.0);
            us.push(vec![0.0; n]);
        } else {
            alphas.push(alpha);
            us.push(u.iter().map(|x| x / alpha).collect());
        }

        let mut beta = 0.0;
        if !breakdown {
            op.apply_transpose(&us[k], &mut v);
            v.iter_mut().zip(&vs[k]).for_each(|(vi, pi)| *vi -= alpha * pi);
            orthogonalize(&mut v, &vs);
            beta = norm2(&v);
            if beta <= abs_tol {
                breakdown = true;
                beta = 0.0;
            }
        }
        betas.push(beta);
        let steps = alphas.len();

        let (top, last) = top_ritz(&alphas, &betas[..steps - 1]);
        theta = top;
        let residual = beta * last.abs();
        let exhausted = steps >= kmax;
        if breakdown || (steps >= 2 && residual <= rel_tol * theta + abs_tol) {
            converged = true;
        }
        if converged || exhausted {
            break;
        }
        vs.push(v.iter().map(|x| x / beta).collect());
    }

    // Ritz vectors from the small bidiagonal problem.
    let k = alphas.len();
    let b = DenseMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    let svd = svd_jacobi(&b);
    let mut u1 = vec![0.0; n];
    let mut v1 = vec![0.0; m];
    for i in 0..k {
        let (cx, cy) = (svd.u[(i, 0)], svd.v[(i, 0)]);
        u1.iter_mut().zip(&us[i]).for_each(|(a, b)| *a += cx * b);
        v1.iter_mut().zip(&vs[i]).for_each(|(a, b)| *a += cy * b);
    }
    let sigma = if svd.s[0] > 0.0 { svd.s[0] } else { theta };
    TopTriple {
        sigma,
        u: unit(u1),
        v: unit(v1),
        iterations: k,
        converged,
    }
}

fn unit(mut x: Vec<f64>) -> Vec<f64> {
    let n = norm2(&x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    x
}

/// Largest singular value of the upper bidiagonal `B` and the last entry of
/// its left singular vector, via the tridiagonal `B Bᵀ`.
fn top_ritz(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let k = alphas.len();
    let mut d: Vec<f64> = (0..k)
        .map(|i| alphas[i] * alphas[i] + if i + 1 < k { betas[i] * betas[i] } else { 0.0 })
        .collect();
    let mut e: Vec<f64> = (0..k)
        .map(|i| if i + 1 < k { betas[i] * alphas[i + 1] } else { 0.0 })
        .collect();
    let z = tridiagonal_eig_last_row(&mut d, &mut e);
    let (idx, &lam) = d
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    (libm::sqrt(lam.max(0.0)), z[idx])
}

/// Implicit QL on a symmetric tridiagonal matrix (diagonal `d`, superdiagonal
/// `e[0..n-1]`). Overwrites `d` with eigenvalues and returns the last row of
/// the eigenvector matrix.
fn tridiagonal_eig_last_row(d: &mut [f64], e: &mut [f64]) -> Vec<f64> {
    let n = d.len();
    let mut z = vec![0.0; n];
    z[n - 1] = 1.0;
    if n == 1 {
        return z;
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
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
                let f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    z
}

fn start_vector(m: usize, rng: &mut ChaCha8Rng, with_ones: bool) -> Vec<f64> {
    let g = unit((0..m).map(|_| f64::standard_normal(rng)).collect());
    if !with_ones {
        return g;
    }
    let w = 1.0 / libm::sqrt(m as f64);
    g.iter().map(|x| w + 0.5 * x).collect()
}

/// σ₁ and σ₂ of a non-empty mask treated as a real 0/1 matrix.
///
/// Values come back even when a run hits its iteration cap; `converged`
/// reports it.
pub fn top_two_singular_values(mask: &SamplingMask, opts: &SpectralOptions) -> Result<SpectralSummary> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("spectral tol must be positive".into()));
    }
    if opts.trim_empty {
        let trimmed = mask.trim_empty()?;
        return top_two_untrimmed(&trimmed.mask, opts);
    }
    top_two_untrimmed(mask, opts)
}

fn top_two_untrimmed(mask: &SamplingMask, opts: &SpectralOptions) -> Result<SpectralSummary> {
    let (n, m) = mask.shape();
    let max_iter = opts.max_iter.unwrap_or(10 * n.min(m) + 500);
    // Rounding floor on the operator scale, ||M||_F.
    let abs_tol = 64.0 * f64::EPSILON * libm::sqrt(mask.len() as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);

    let first_tol = (opts.tol * 1e-2).max(1e-14);
    let top = lanczos_top(mask, start_vector(m, &mut rng, true), first_tol, abs_tol, max_iter);

    let deflated = Deflated {
        mask,
        s: top.sigma,
        u: &top.u,
        v: &top.v,
    };
    let mut start = start_vector(m, &mut rng, false);
    orthogonalize(&mut start, core::slice::from_ref(&top.v));
    let second = lanczos_top(&deflated, start, opts.tol, abs_tol, max_iter);

    let sigma1 = top.sigma;
    let sigma2 = second.sigma.min(sigma1);
    Ok(SpectralSummary {
        sigma1,
        sigma2,
        sg_ratio: sigma2 / sigma1,
        iterations: top.iterations + second.iterations,
        converged: top.converged && second.converged,
    })
}

/// SG ratio σ₂/σ₁ with default options.
pub fn sg_ratio(mask: &SamplingMask) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::ZeroSigma1);
    }
    Ok(top_two_singular_values(mask, &SpectralOptions::default())?.sg_ratio)
}

/// All `min(n, m)` singular values, descending, from the eigenvalues of the
/// Gram matrix of the smaller side. Independent of the Lanczos path.
pub fn dense_svd_oracle(mask: &SamplingMask) -> Result<Vec<f64>> {
    let (n, m) = mask.shape();
    let size = n.saturating_mul(m);
    if size > DENSE_ORACLE_LIMIT {
        return Err(Error::SizeGuard {
            size,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let d: DenseMatrix<f64> = mask.to_dense();
    let gram = if n <= m {
        d.matmul_adjoint(&d)
    } else {
        d.adjoint_matmul(&d)
    };
    Ok(symmetric_eigenvalues(&gram)
        .into_iter()
        .map(|l| libm::sqrt(l.max(0.0)))
        .collect())
}

/// Connectivity of the bipartite graph with rows and columns as vertices
/// and observed entries as edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Connectivity {
    /// Components among vertices with at least one edge.
    pub components: usize,
    pub isolated_rows: usize,
    pub isolated_cols: usize,
}

pub fn connected_components(mask: &SamplingMask) -> Connectivity {
    let (n, m) = mask.shape();
    let mut parent: Vec<usize> = (0..n + m).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in mask.entries() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, n + j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let rows = mask.row_counts();
    let cols = mask.col_counts();
    let mut components = 0;
    for x in 0..n + m {
        let degree = if x < n { rows[x] } else { cols[x - n] };
        if degree > 0 && find(&mut parent, x) == x {
            components += 1;
        }
    }
    Connectivity {
        components,
        isolated_rows: rows.iter().filter(|&&c| c == 0).count(),
        isolated_cols: cols.iter().filter(|&&c| c == 0).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn summary(mask: &SamplingMask) -> SpectralSummary {
        top_two_singular_values(mask, &SpectralOptions::default()).unwrap()
    }

    fn block_diagonal(blocks: &[(usize, usize)]) -> SamplingMask {
        let (mut r0, mut c0) = (0, 0);
        let mut coords = Vec::new();
        for &(h, w) in blocks {
            for i in 0..h {
                for j in 0..w {
                    coords.push((r0 + i, c0 + j));
                }
            }
            r0 += h;
            c0 += w;
        }
        SamplingMask::from_coords(r0, c0, &coords).unwrap().0
    }

    fn random_mask(n: usize, m: usize, density: f64, seed: u64) -> SamplingMask {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<_> = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|_| rng.random::<f64>() < density)
            .collect();
        SamplingMask::from_coords(n, m, &coords).unwrap().0
    }

    #[test]
    fn identity_has_ratio_one() {
        let s = summary(&SamplingMask::identity(4).unwrap());
        assert!((s.sigma1 - 1.0).abs() < 1e-12);
        assert!((s.sigma2 - 1.0).abs() < 1e-12);
        assert!(s.converged);
    }

    #[test]
    fn all_ones_has_ratio_zero() {
        let s = summary(&SamplingMask::full(3, 5).unwrap());
        assert!((s.sigma1 - libm::sqrt(15.0)).abs() < 1e-12);
        assert!(s.sigma2 < 1e-12);
        assert!(s.sg_ratio < 1e-12);
    }

    #[test]
    fn equal_blocks_have_ratio_one() {
        let s = summary(&block_diagonal(&[(3, 4), (4, 3)]));
        assert!((s.sg_ratio - 1.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn single_entry_and_vectors() {
        let m = SamplingMask::from_coords(1, 1, &[(0, 0)]).unwrap().0;
        let s = summary(&m);
        assert_eq!((s.sigma1, s.sigma2), (1.0, 0.0));
        let row = SamplingMask::full(1, 7).unwrap();
        let s = summary(&row);
        assert!((s.sigma1 - libm::sqrt(7.0)).abs() < 1e-12 && s.sigma2 == 0.0, "{s:?}");
    }

    #[test]
    fn empty_mask_errors() {
        let e = SamplingMask::empty(3, 3).unwrap();
        assert_eq!(
            top_two_singular_values(&e, &SpectralOptions::default()),
            Err(Error::EmptyMask)
        );
        assert_eq!(sg_ratio(&e), Err(Error::ZeroSigma1));
    }

    #[test]
    fn oracle_small_examples() {
        let s = dense_svd_oracle(&SamplingMask::full(2, 2).unwrap()).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-14 && s[1].abs() < 1e-7);
        let s = dense_svd_oracle(&SamplingMask::identity(3).unwrap()).unwrap();
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-14));
        // MᵀM = [[2,1],[1,1]], eigenvalues (3 ± √5)/2.
        let m = SamplingMask::from_coords(2, 2, &[(0, 0), (0, 1), (1, 0)]).unwrap().0;
        let s = dense_svd_oracle(&m).unwrap();
        let r5 = libm::sqrt(5.0);
        assert!((s[0] - libm::sqrt((3.0 + r5) / 2.0)).abs() < 1e-14);
        assert!((s[1] - libm::sqrt((3.0 - r5) / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn oracle_size_guard() {
        let m = SamplingMask::identity(2001).unwrap();
        assert!(matches!(dense_svd_oracle(&m), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn random_mask_matches_oracle() {
        let mask = random_mask(200, 150, 0.3, 11);
        let s = summary(&mask);
        let o = dense_svd_oracle(&mask).unwrap();
        assert!((s.sigma1 - o[0]).abs() <= 1e-8 * o[0]);
        assert!((s.sigma2 - o[1]).abs() <= 1e-8 * o[1], "{} vs {}", s.sigma2, o[1]);
    }

    #[test]
    fn trim_empty_is_spectrally_neutral() {
        let mask = SamplingMask::from_coords(6, 5, &[(0, 0), (0, 3), (2, 3), (5, 0), (5, 1)])
            .unwrap()
            .0;
        let a = summary(&mask);
        let b = top_two_singular_values(
            &mask,
            &SpectralOptions {
                trim_empty: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a.sigma1 - b.sigma1).abs() < 1e-12 && (a.sigma2 - b.sigma2).abs() < 1e-12);
    }

    #[test]
    fn connectivity_examples() {
        let c = connected_components(&SamplingMask::full(3, 3).unwrap());
        assert_eq!((c.components, c.isolated_rows, c.isolated_cols), (1, 0, 0));
        assert_eq!(connected_components(&SamplingMask::identity(3).unwrap()).components, 3);
        assert_eq!(connected_components(&block_diagonal(&[(2, 2), (3, 1)])).components, 2);
        let c = connected_components(&SamplingMask::empty(2, 3).unwrap());
        assert_eq!((c.components, c.isolated_rows, c.isolated_cols), (0, 2, 3));
    }

    #[test]
    fn tridiagonal_last_row_matches_dense() {
        // T = [[2,1,0],[1,3,1],[0,1,4]]
        let mut d = vec![2.0, 3.0, 4.0];
        let mut e = vec![1.0, 1.0, 0.0];
        let z = tridiagonal_eig_last_row(&mut d, &mut e);
        let t = DenseMatrix::from_row_major(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]).unwrap();
        let mut sorted = d.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let ev = symmetric_eigenvalues(&t);
        for (a, b) in sorted.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-12);
        }
        // Last components of a full eigenvector basis have unit norm.
        assert!((z.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
