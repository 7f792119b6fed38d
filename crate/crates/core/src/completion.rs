//! Low-rank test data, nuclear-norm completion, and recovery metrics.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{qr_thin, random_orthonormal, subspace_svd_with, svd_jacobi, DenseMatrix, Svd};
use crate::error::{Error, Result};
use crate::mask::SamplingMask;
use crate::scalar::Scalar;
use crate::seed::RngSeed;
use crate::spectral::{top_two_singular_values, SpectralOptions};

/// Value returned by [`snr`] for an exact reconstruction.
pub const SNR_CAP_DB: f64 = 300.0;

/// Rank-`r` matrix `X = U Vᴴ` kept in factored form.
#[derive(Debug, Clone)]
pub struct LowRankModel<S> {
    u: DenseMatrix<S>,
    v: DenseMatrix<S>,
}

impl<S: Scalar> LowRankModel<S> {
    /// `u` is `n x r`, `v` is `m x r`.
    pub fn from_factors(u: DenseMatrix<S>, v: DenseMatrix<S>) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::ShapeMismatch {
                left: u.shape(),
                right: v.shape(),
            });
        }
        let r = u.cols();
        if r == 0 || r > u.rows().min(v.rows()) {
            return Err(Error::RankOutOfRange {
                rank: r,
                rows: u.rows(),
                cols: v.rows(),
            });
        }
        Ok(Self { u, v })
    }

    /// Gaussian factors with orthonormalized columns.
    pub fn generate_incoherent(n: usize, m: usize, r: usize, seed: &RngSeed) -> Result<Self> {
        if r == 0 || r > n.min(m) {
            return Err(Error::RankOutOfRange {
                rank: r,
                rows: n,
                cols: m,
            });
        }
        let mut rng = seed.rng_for("model");
        let u = qr_thin(&DenseMatrix::random_normal(n, r, &mut rng)).0;
        let v = qr_thin(&DenseMatrix::random_normal(m, r, &mut rng)).0;
        Ok(Self { u, v })
    }

    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn left(&self) -> &DenseMatrix<S> {
        &self.u
    }

    pub fn right(&self) -> &DenseMatrix<S> {
        &self.v
    }

    pub fn to_dense(&self) -> DenseMatrix<S> {
        self.u.matmul_adjoint(&self.v)
    }

    /// Entry `X[i, j]` without forming `X`.
    pub fn entry(&self, i: usize, j: usize) -> S {
        let mut acc = S::zero();
        for k in 0..self.rank() {
            acc += self.u[(i, k)] * self.v[(j, k)].conj();
        }
        acc
    }
}

/// Coherence proxy `max((n/r) max_i |U_i|², (m/r) max_j |V_j|²)` over the
/// orthonormalized factors.
///
/// This is the standard leverage-score coherence, a stand-in for the strong
/// incoherence parameter of the sample bound; 1 is perfectly flat and
/// `max(n, m) / r` maximally spiky.
pub fn incoherence<S: Scalar>(model: &LowRankModel<S>) -> Result<f64> {
    let r = model.rank();
    let lev = |f: &DenseMatrix<S>| -> Result<f64> {
        let (q, rr) = qr_thin(f);
        let scale = (0..r).map(|k| rr[(k, k)].abs()).fold(0.0, f64::max);
        if (0..r).any(|k| rr[(k, k)].abs() <= 1e-12 * scale) || scale == 0.0 {
            return Err(Error::RankDeficient);
        }
        let n = f.rows();
        let best = (0..n)
            .map(|i| (0..r).map(|k| q[(i, k)].abs_sqr()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(best * n as f64 / r as f64)
    };
    Ok(lev(&model.u)?.max(lev(&model.v)?))
}

/// Outcome of the sample-size check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremBound {
    /// `ceil(36 (σ₂²/σ₁) μ² max(n, m) r²)`.
    pub required: u64,
    pub observed: usize,
    pub satisfied: bool,
    /// All row sums equal and all column sums equal; the bound presumes it.
    pub regular: bool,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Advisory check of the sample bound for exact recovery.
///
/// `mu` is the coherence proxy from [`incoherence`], not the strong
/// incoherence parameter the bound is stated for, and the constant 36 is not
/// claimed tight.
pub fn theorem_bound(mask: &SamplingMask, mu: f64, r: usize) -> Result<TheoremBound> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !(mu >= 1.0) || r == 0 {
        return Err(Error::InvalidParameter("theorem bound needs mu >= 1 and r >= 1".into()));
    }
    let s = top_two_singular_values(mask, &SpectralOptions::default())?;
    let big = mask.rows().max(mask.cols()) as f64;
    let raw = 36.0 * (s.sigma2 * s.sigma2 / s.sigma1) * mu * mu * big * (r * r) as f64;
    // Lanczos rounding must not push an integer requirement to the next one.
    let required = libm::ceil(raw * (1.0 - 1e-9) - 1e-9).max(0.0) as u64;
    Ok(TheoremBound {
        required,
        observed: mask.len(),
        satisfied: mask.len() as u64 >= required,
        regular: mask.is_regular(),
        sigma1: s.sigma1,
        sigma2: s.sigma2,
    })
}

/// Observations `B = P_Ω(X) + E` with noise budget `eta >= ||E||_F`.
#[derive(Debug, Clone)]
pub struct ObservedData<S> {
    mask: SamplingMask,
    values: Vec<S>,
    eta: f64,
}

impl<S: Scalar> ObservedData<S> {
    /// `values` align with `mask.entries()`.
    pub fn new(mask: SamplingMask, values: Vec<S>, eta: f64) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: mask.len(),
            });
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter("eta must be finite and non-negative".into()));
        }
        Ok(Self { mask, values, eta })
    }

    /// Noise-free samples of a dense matrix.
    pub fn sample(mask: SamplingMask, truth: &DenseMatrix<S>) -> Result<Self> {
        if truth.shape() != mask.shape() {
            return Err(Error::ShapeMismatch {
                left: truth.shape(),
                right: mask.shape(),
            });
        }
        let values = mask.entries().iter().map(|&(i, j)| truth[(i, j)]).collect();
        Self::new(mask, values, 0.0)
    }

    /// Noise-free samples of a factored model.
    pub fn sample_model(mask: SamplingMask, model: &LowRankModel<S>) -> Result<Self> {
        if (model.rows(), model.cols()) != mask.shape() {
            return Err(Error::ShapeMismatch {
                left: (model.rows(), model.cols()),
                right: mask.shape(),
            });
        }
        let values = mask.entries().iter().map(|&(i, j)| model.entry(i, j)).collect();
        Self::new(mask, values, 0.0)
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `P_Ω(B)` as a dense matrix.
    pub fn to_dense(&self) -> DenseMatrix<S> {
        let mut d = DenseMatrix::zeros(self.mask.rows(), self.mask.cols());
        for (&(i, j), &b) in self.mask.entries().iter().zip(&self.values) {
            d[(i, j)] = b;
        }
        d
    }

    /// `||P_Ω(Z) - B||_F`
    pub fn residual(&self, z: &DenseMatrix<S>) -> f64 {
        libm::sqrt(
            self.mask
                .entries()
                .iter()
                .zip(&self.values)
                .map(|(&(i, j), &b)| (z[(i, j)] - b).abs_sqr())
                .sum::<f64>(),
        )
    }

    /// Largest `|Z_ij - B_ij|` over observed entries.
    pub fn max_observed_deviation(&self, z: &DenseMatrix<S>) -> f64 {
        self.mask
            .entries()
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), &b)| (z[(i, j)] - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Singular value thresholding on the nuclear-norm program.
    Svt,
    /// Fixed-rank alternating least squares.
    Als,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    /// Relative iterate change fell below `tol` at the final threshold.
    Stalled,
    /// `||P_Ω(Z) - B||_F <= max(eta, abs_tol)`.
    ResidualBelowBudget,
    MaxIterations,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Stalled => "stalled",
            StopReason::ResidualBelowBudget => "residual_below_budget",
            StopReason::MaxIterations => "max_iterations",
        }
    }
}

/// Options of [`solve_nuclear_norm`].
///
/// The threshold starts at `tau0_rel * σ₁(P_Ω B)` and, with continuation,
/// shrinks by `tau_decay` each time one step moves the iterate by less than
/// `inner_tol * tau` in Frobenius norm, down to `tau_floor_rel * σ₁(P_Ω B)`.
/// Without continuation the threshold stays at its start value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Gradient step; the iteration converges for `0 < delta < 2`.
    pub delta: f64,
    pub tau0_rel: f64,
    pub tau_decay: f64,
    pub tau_floor_rel: f64,
    pub continuation: bool,
    pub inner_tol: f64,
    /// Relative iterate change that ends the solve at the final threshold.
    pub tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Consecutive residual increases treated as divergence once the
    /// residual has also doubled.
    pub divergence_window: usize,
    /// Extra columns kept beyond the current rank in the partial SVD.
    pub oversample: usize,
    pub record_history: bool,
    /// Seed of the random partial-SVD start block.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            delta: 1.2,
            tau0_rel: 0.5,
            tau_decay: 0.5,
            tau_floor_rel: 1e-6,
            continuation: true,
            inner_tol: 1e-3,
            tol: 1e-10,
            abs_tol: 1e-10,
            max_iter: 5000,
            divergence_window: 50,
            oversample: 8,
            record_history: false,
            seed: 0,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(alloc::format!("solver option {what}")));
        // Steps of 2 or more are allowed; they diverge and are reported.
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if !(self.tau0_rel > 0.0) || !(self.tau_floor_rel > 0.0) || self.tau_floor_rel > self.tau0_rel {
            return bad("needs 0 < tau_floor_rel <= tau0_rel");
        }
        if !(self.tau_decay > 0.0 && self.tau_decay < 1.0) {
            return bad("tau_decay must be in (0, 1)");
        }
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iter == 0 || self.divergence_window == 0 || self.oversample == 0 {
            return bad("max_iter, divergence_window and oversample must be positive");
        }
        Ok(())
    }
}

/// One solver iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub tau: f64,
    /// `||Z||_*`
    pub nuclear_norm: f64,
    /// `(tau / delta) ||Z||_* + ½ ||P_Ω(Z) - B||²_F`, the objective the
    /// proximal step decreases at fixed `tau`.
    pub penalized: f64,
    pub residual: f64,
    pub change: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport<S> {
    pub estimate: DenseMatrix<S>,
    /// Nuclear norm of the estimate (factor-based bound for ALS).
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub solver: SolverKind,
    pub rank: usize,
    pub history: Vec<IterationRecord>,
}

/// Iterate kept as `Z = us vᴴ` with orthonormal `v` and `us = U diag(s - tau)`.
struct Factored<S> {
    us: DenseMatrix<S>,
    v: DenseMatrix<S>,
}

impl<S: Scalar> Factored<S> {
    fn zero(n: usize, m: usize) -> Self {
        Factored {
            us: DenseMatrix::zeros(n, 0),
            v: DenseMatrix::zeros(m, 0),
        }
    }

    fn shrink(svd: &Svd<S>, r: usize, tau: f64) -> Self {
        let mut us = svd.u.leading_cols(r);
        for k in 0..r {
            let w = svd.s[k] - tau;
            us.col_mut(k).iter_mut().for_each(|x| *x = x.scale(w));
        }
        Factored {
            us,
            v: svd.v.leading_cols(r),
        }
    }

    fn rank(&self) -> usize {
        self.us.cols()
    }

    fn entry(&self, i: usize, j: usize) -> S {
        let mut acc = S::zero();
        for k in 0..self.rank() {
            acc += self.us[(i, k)] * self.v[(j, k)].conj();
        }
        acc
    }

    fn to_dense(&self) -> DenseMatrix<S> {
        if self.rank() == 0 {
            return DenseMatrix::zeros(self.us.rows(), self.v.rows());
        }
        self.us.matmul_adjoint(&self.v)
    }

    /// `||self - other||_F` from the small triangular factors of the stacked
    /// factors, so tiny changes are resolved to working precision.
    fn distance(&self, other: &Self) -> f64 {
        let (n, m) = (self.us.rows(), self.v.rows());
        let k = self.rank() + other.rank();
        if k == 0 {
            return 0.0;
        }
        if k > n.min(m) {
            return self.to_dense().distance(&other.to_dense());
        }
        let mut left = DenseMatrix::zeros(n, k);
        let mut right = DenseMatrix::zeros(m, k);
        for c in 0..self.rank() {
            left.col_mut(c).copy_from_slice(self.us.col(c));
            right.col_mut(c).copy_from_slice(self.v.col(c));
        }
        for c in 0..other.rank() {
            let d = self.rank() + c;
            left.col_mut(d)
                .iter_mut()
                .zip(other.us.col(c))
                .for_each(|(x, y)| *x = -*y);
            right.col_mut(d).copy_from_slice(other.v.col(c));
        }
        let rl = qr_thin(&left).1;
        let rr = qr_thin(&right).1;
        rl.matmul_adjoint(&rr).frobenius_norm()
    }
}

/// `Y X` for the sparse matrix with `vals` on the mask entries.
fn sparse_mul<S: Scalar>(mask: &SamplingMask, vals: &[S], x: &DenseMatrix<S>) -> DenseMatrix<S> {
    let mut out = DenseMatrix::zeros(mask.rows(), x.cols());
    for k in 0..x.cols() {
        let src = x.col(k);
        let dst = out.col_mut(k);
        for (&(i, j), &y) in mask.entries().iter().zip(vals) {
            dst[i] += y * src[j];
        }
    }
    out
}

/// `Yᴴ Q` for the sparse matrix with `vals` on the mask entries.
fn sparse_adjoint_mul<S: Scalar>(mask: &SamplingMask, vals: &[S], q: &DenseMatrix<S>) -> DenseMatrix<S> {
    let mut out = DenseMatrix::zeros(mask.cols(), q.cols());
    for k in 0..q.cols() {
        let src = q.col(k);
        let dst = out.col_mut(k);
        for (&(i, j), &y) in mask.entries().iter().zip(vals) {
            dst[j] += y.conj() * src[i];
        }
    }
    out
}

/// One subspace step on `W = Z + Y` with `Z` low rank and `Y` sparse.
fn step_svd<S: Scalar>(z: &Factored<S>, mask: &SamplingMask, y: &[S], start: &DenseMatrix<S>) -> Svd<S> {
    subspace_svd_with(
        |x| {
            let mut out = sparse_mul(mask, y, x);
            if z.rank() > 0 {
                out.add_assign(&z.us.matmul(&z.v.adjoint_matmul(x)));
            }
            out
        },
        |q| {
            let mut out = sparse_adjoint_mul(mask, y, q);
            if z.rank() > 0 {
                out.add_assign(&z.v.matmul(&z.us.adjoint_matmul(q)));
            }
            out
        },
        start,
    )
}

/// Approximately solve `min ||Z||_* s.t. ||P_Ω(Z) - B||_F <= eta` by
/// singular value thresholding: `Z <- SVT_tau(Z + delta P_Ω(B - Z))`.
///
/// Each iteration takes one warm-started block subspace step for the
/// leading singular triplets, widening the block while every computed value
/// exceeds the threshold. The iterate is never formed densely.
pub fn solve_nuclear_norm<S: Scalar>(data: &ObservedData<S>, opts: &SolveOptions) -> Result<SolveReport<S>> {
    opts.validate()?;
    let mask = data.mask();
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (n, m) = mask.shape();
    // Every entry observed and no slack: the constraint alone fixes Z.
    if mask.len() == n * m && data.eta() == 0.0 {
        let estimate = data.to_dense();
        let s = svd_jacobi(&estimate).s;
        let cut = s.first().copied().unwrap_or(0.0) * 1e-12;
        return Ok(SolveReport {
            objective: s.iter().sum(),
            estimate,
            residual: 0.0,
            iterations: 0,
            converged: true,
            stop_reason: StopReason::ResidualBelowBudget,
            solver: SolverKind::Svt,
            rank: s.iter().filter(|&&x| x > cut).count(),
            history: Vec::new(),
        });
    }
    let full_width = n.min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let values = data.values();
    let mut width = (opts.oversample + 1).min(full_width);
    let mut basis: DenseMatrix<S> = random_orthonormal(m, width, &mut rng);
    let empty = Factored::zero(n, m);
    // A few subspace steps for σ₁(P_Ω B), which sets the threshold scale.
    let mut est = step_svd(&empty, mask, values, &basis);
    for _ in 0..4 {
        est = step_svd(&empty, mask, values, &est.v);
    }
    let sigma1 = est.s[0];
    basis = est.v;
    if sigma1 == 0.0 {
        return Ok(SolveReport {
            estimate: DenseMatrix::zeros(n, m),
            objective: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
            stop_reason: StopReason::ResidualBelowBudget,
            solver: SolverKind::Svt,
            rank: 0,
            history: Vec::new(),
        });
    }

    let mut tau = opts.tau0_rel * sigma1;
    let tau_min = if opts.continuation {
        opts.tau_floor_rel * sigma1
    } else {
        tau
    };
    let budget = data.eta().max(opts.abs_tol);

    let mut z = empty;
    // P_Ω(B - Z) on the mask entries.
    let mut resid: Vec<S> = values.to_vec();
    let mut y: Vec<S> = vec![S::zero(); values.len()];
    let mut history = Vec::new();
    let mut rising = 0usize;
    let mut rise_start = f64::INFINITY;
    let mut prev_residual = f64::INFINITY;
    let mut nuclear = 0.0;
    let mut residual = norm(&resid);
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        for (yk, rk) in y.iter_mut().zip(&resid) {
            *yk = rk.scale(opts.delta);
        }

        let mut svd = step_svd(&z, mask, &y, &basis);
        let mut r = svd.s.iter().take_while(|&&s| s > tau).count();
        while r == width && width < full_width {
            width = (width + opts.oversample).min(full_width);
            let extra: DenseMatrix<S> = random_orthonormal(m, width - r, &mut rng);
            let mut grown = DenseMatrix::zeros(m, width);
            for k in 0..r {
                grown.col_mut(k).copy_from_slice(svd.v.col(k));
            }
            for k in r..width {
                grown.col_mut(k).copy_from_slice(extra.col(k - r));
            }
            let start = qr_thin(&grown).0;
            svd = step_svd(&z, mask, &y, &start);
            svd = step_svd(&z, mask, &y, &svd.v);
            r = svd.s.iter().take_while(|&&s| s > tau).count();
        }
        width = (r + opts.oversample).min(full_width).max(1);
        basis = svd.v.leading_cols(width);

        let z_new = Factored::shrink(&svd, r, tau);
        let norm_new = libm::sqrt(svd.s[..r].iter().map(|s| (s - tau) * (s - tau)).sum::<f64>());
        let change = if norm_new > 0.0 {
            z_new.distance(&z) / norm_new
        } else if z.rank() == 0 {
            0.0
        } else {
            1.0
        };
        z = z_new;
        nuclear = svd.s[..r].iter().map(|s| s - tau).sum();
        for ((rk, &(i, j)), &b) in resid.iter_mut().zip(mask.entries()).zip(values) {
            *rk = b - z.entry(i, j);
        }
        residual = norm(&resid);

        if opts.record_history {
            history.push(IterationRecord {
                tau,
                nuclear_norm: nuclear,
                penalized: tau / opts.delta * nuclear + 0.5 * residual * residual,
                residual,
                change,
                rank: r,
            });
        }

        if !residual.is_finite() {
            return Err(Error::Divergence {
                iteration: iterations,
                window: 0,
                start_residual: prev_residual,
                residual,
            });
        }
        // Rises at rounding level near a stall do not count.
        if residual > prev_residual * (1.0 + 1e-9) {
            if rising == 0 {
                rise_start = prev_residual;
            }
            rising += 1;
            if rising >= opts.divergence_window && residual >= 2.0 * rise_start {
                return Err(Error::Divergence {
                    iteration: iterations,
                    window: opts.divergence_window,
                    start_residual: rise_start,
                    residual,
                });
            }
        } else {
            rising = 0;
        }
        prev_residual = residual;

        if residual <= budget {
            stop = StopReason::ResidualBelowBudget;
            break;
        }
        if tau > tau_min {
            // A stale component moves the iterate by about tau per step, so
            // the stage ends only once steps are small against tau.
            if change * norm_new < opts.inner_tol * tau {
                tau = (tau * opts.tau_decay).max(tau_min);
            }
        } else if change < opts.tol {
            stop = StopReason::Stalled;
            break;
        }
    }

    Ok(SolveReport {
        estimate: z.to_dense(),
        objective: nuclear,
        residual,
        iterations,
        converged: stop != StopReason::MaxIterations,
        stop_reason: stop,
        solver: SolverKind::Svt,
        rank: z.rank(),
        history,
    })
}

fn norm<S: Scalar>(xs: &[S]) -> f64 {
    libm::sqrt(xs.iter().map(|x| x.abs_sqr()).sum::<f64>())
}

/// Options of the fixed-rank alternating least squares fast path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    pub rank: usize,
    /// Ridge weight keeping the small normal equations well posed.
    pub lambda: f64,
    /// Relative residual change that ends the solve.
    pub tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl AlsOptions {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            lambda: 1e-9,
            tol: 1e-10,
            abs_tol: 1e-10,
            max_iter: 500,
            seed: 0,
        }
    }
}

/// Solve `(A + lambda I) x = b` for a small Hermitian positive system by
/// Gaussian elimination with partial pivoting. `a` is row-major `r x r`.
fn solve_small<S: Scalar>(a: &mut [S], b: &mut [S], r: usize) -> Result<()> {
    for col in 0..r {
        let piv = (col..r)
            .max_by(|&x, &y| a[x * r + col].abs().total_cmp(&a[y * r + col].abs()))
            .expect("nonempty");
        if a[piv * r + col].abs() == 0.0 {
            return Err(Error::RankDeficient);
        }
        if piv != col {
            for k in 0..r {
                a.swap(piv * r + k, col * r + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * r + col];
        for row in col + 1..r {
            let f = a[row * r + col] / d;
            if f == S::zero() {
                continue;
            }
            for k in col..r {
                let t = a[col * r + k];
                a[row * r + k] -= f * t;
            }
            let t = b[col];
            b[row] -= f * t;
        }
    }
    for col in (0..r).rev() {
        let mut acc = b[col];
        for k in col + 1..r {
            acc -= a[col * r + k] * b[k];
        }
        b[col] = acc / a[col * r + col];
    }
    Ok(())
}

/// Fixed-rank factorized completion `X ~ U Vᴴ` by alternating ridge least
/// squares over the observed entries. Much cheaper than the nuclear-norm
/// solve; the rank must be supplied.
pub fn solve_als<S: Scalar>(data: &ObservedData<S>, opts: &AlsOptions) -> Result<SolveReport<S>> {
    let mask = data.mask();
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (n, m) = mask.shape();
    let r = opts.rank;
    if r == 0 || r > n.min(m) {
        return Err(Error::RankOutOfRange {
            rank: r,
            rows: n,
            cols: m,
        });
    }
    if !(opts.lambda >= 0.0) || !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "ALS needs lambda >= 0, tol > 0, max_iter >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // Observed entries grouped by row and by column.
    let mut by_row: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    let mut by_col: Vec<Vec<(usize, S)>> = vec![Vec::new(); m];
    for (&(i, j), &b) in mask.entries().iter().zip(data.values()) {
        by_row[i].push((j, b));
        by_col[j].push((i, b));
    }

    let mut u: DenseMatrix<S> = DenseMatrix::zeros(n, r);
    let mut v: DenseMatrix<S> = random_orthonormal(m, r, &mut rng);
    let budget = data.eta().max(opts.abs_tol);
    let mut residual = f64::INFINITY;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut a = vec![S::zero(); r * r];
    let mut rhs = vec![S::zero(); r];

    // Row i: B_ij = sum_k U_ik conj(V_jk), normal matrix sum_j V_j V_jᴴ.
    // Column j: conj(B_ij) = sum_k conj(U_ik) V_jk, normal matrix sum_i U_i U_iᴴ.
    let update = |target: &mut DenseMatrix<S>,
                  other: &DenseMatrix<S>,
                  groups: &[Vec<(usize, S)>],
                  conj_data: bool,
                  a: &mut [S],
                  rhs: &mut [S]|
     -> Result<()> {
        for (i, obs) in groups.iter().enumerate() {
            if obs.is_empty() {
                (0..r).for_each(|p| target[(i, p)] = S::zero());
                continue;
            }
            a.iter_mut().for_each(|x| *x = S::zero());
            rhs.iter_mut().for_each(|x| *x = S::zero());
            for &(j, b) in obs {
                let b = if conj_data { b.conj() } else { b };
                for p in 0..r {
                    let op = other[(j, p)];
                    for q in 0..r {
                        a[p * r + q] += op * other[(j, q)].conj();
                    }
                    rhs[p] += op * b;
                }
            }
            for p in 0..r {
                a[p * r + p] += S::from_real(opts.lambda);
            }
            solve_small(a, rhs, r)?;
            for p in 0..r {
                target[(i, p)] = rhs[p];
            }
        }
        Ok(())
    };

    while iterations < opts.max_iter {
        iterations += 1;
        update(&mut u, &v, &by_row, false, &mut a, &mut rhs)?;
        update(&mut v, &u, &by_col, true, &mut a, &mut rhs)?;

        let new_residual = libm::sqrt(
            mask.entries()
                .iter()
                .zip(data.values())
                .map(|(&(i, j), &b)| {
                    let mut acc = S::zero();
                    for k in 0..r {
                        acc += u[(i, k)] * v[(j, k)].conj();
                    }
                    (acc - b).abs_sqr()
                })
                .sum::<f64>(),
        );
        if !new_residual.is_finite() {
            return Err(Error::Divergence {
                iteration: iterations,
                window: 0,
                start_residual: residual,
                residual: new_residual,
            });
        }
        let rel_change = if residual.is_finite() {
            (residual - new_residual).abs() / residual.max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        };
        residual = new_residual;
        if residual <= budget {
            stop = StopReason::ResidualBelowBudget;
            break;
        }
        if rel_change < opts.tol {
            stop = StopReason::Stalled;
            break;
        }
    }

    let estimate = u.matmul_adjoint(&v);
    let objective = svd_jacobi(&estimate_core(&u, &v)).s.iter().sum();
    Ok(SolveReport {
        estimate,
        objective,
        residual,
        iterations,
        converged: stop != StopReason::MaxIterations,
        stop_reason: stop,
        solver: SolverKind::Als,
        rank: r,
        history: Vec::new(),
    })
}

/// `r x r` core whose singular values equal those of `U Vᴴ`.
fn estimate_core<S: Scalar>(u: &DenseMatrix<S>, v: &DenseMatrix<S>) -> DenseMatrix<S> {
    let (_, ru) = qr_thin(u);
    let (_, rv) = qr_thin(v);
    ru.matmul_adjoint(&rv)
}

/// Reconstruction quality `-20 log10(||estimate - truth||_F / ||truth||_F)`
/// in dB, capped at [`SNR_CAP_DB`].
pub fn snr<S: Scalar>(estimate: &DenseMatrix<S>, truth: &DenseMatrix<S>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::ShapeMismatch {
            left: estimate.shape(),
            right: truth.shape(),
        });
    }
    let norm = truth.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNormTruth);
    }
    let err = estimate.distance(truth);
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((-20.0 * libm::log10(err / norm)).min(SNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::uniform_random_selection;
    use num_complex::Complex64;

    fn uniform_mask(n: usize, m: usize, frac: f64, seed: u64) -> SamplingMask {
        let count = (frac * (n * m) as f64) as usize;
        let idx = uniform_random_selection(n * m, count, &RngSeed::new(seed, 0)).unwrap();
        let coords: Vec<_> = idx.iter().map(|&k| (k / m, k % m)).collect();
        SamplingMask::from_coords(n, m, &coords).unwrap().0
    }

    #[test]
    fn generated_model_has_exact_rank() {
        let model = LowRankModel::<f64>::generate_incoherent(64, 64, 3, &RngSeed::new(1, 0)).unwrap();
        let s = svd_jacobi(&model.to_dense()).s;
        assert!((s[2] - 1.0).abs() < 1e-12);
        assert!(s[3] < 1e-13);
        assert!(LowRankModel::<f64>::generate_incoherent(4, 4, 5, &RngSeed::default()).is_err());
    }

    #[test]
    fn incoherence_examples() {
        let ones = DenseMatrix::from_fn(8, 1, |_, _| 1.0 / libm::sqrt(8.0));
        let flat = LowRankModel::from_factors(ones.clone(), ones.clone()).unwrap();
        assert!((incoherence(&flat).unwrap() - 1.0).abs() < 1e-12);

        let spike = DenseMatrix::from_fn(8, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let m = LowRankModel::from_factors(spike, ones).unwrap();
        assert!((incoherence(&m).unwrap() - 8.0).abs() < 1e-12);

        let zero = DenseMatrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 + i as f64 } else { 2.0 + 2.0 * i as f64 });
        let other = DenseMatrix::from_fn(8, 2, |i, j| (i + j) as f64);
        let bad = LowRankModel::from_factors(zero, other).unwrap();
        assert_eq!(incoherence(&bad), Err(Error::RankDeficient));
    }

    #[test]
    fn theorem_bound_examples() {
        let b = theorem_bound(&SamplingMask::full(6, 4).unwrap(), 1.0, 2).unwrap();
        assert_eq!(b.required, 0);
        assert!(b.satisfied && b.regular);

        let b = theorem_bound(&SamplingMask::identity(8).unwrap(), 1.0, 1).unwrap();
        assert_eq!(b.required, 288);
        assert!(!b.satisfied);
        assert!(theorem_bound(&SamplingMask::empty(2, 2).unwrap(), 1.0, 1).is_err());
    }

    #[test]
    fn snr_examples() {
        let x = DenseMatrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 + 1.0);
        assert_eq!(snr(&x, &x).unwrap(), SNR_CAP_DB);
        assert!(snr(&DenseMatrix::zeros(3, 2), &x).unwrap().abs() < 1e-12);
        let e = DenseMatrix::from_fn(3, 2, |i, j| {
            if (i, j) == (0, 0) {
                0.1 * x.frobenius_norm()
            } else {
                0.0
            }
        });
        assert!((snr(&x.add(&e), &x).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(snr(&x, &DenseMatrix::zeros(3, 2)), Err(Error::ZeroNormTruth));
        assert!(matches!(
            snr(&x, &DenseMatrix::zeros(2, 3)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn full_observation_recovers_exactly() {
        let model = LowRankModel::<f64>::generate_incoherent(20, 15, 2, &RngSeed::new(2, 0)).unwrap();
        let x = model.to_dense();
        let data = ObservedData::sample(SamplingMask::full(20, 15).unwrap(), &x).unwrap();
        let rep = solve_nuclear_norm(&data, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert_eq!((rep.iterations, rep.rank), (0, 2));
        assert_eq!(rep.stop_reason, StopReason::ResidualBelowBudget);
        assert_eq!(snr(&rep.estimate, &x).unwrap(), SNR_CAP_DB);

        // With slack the solver runs and still meets the budget.
        let noisy = ObservedData::new(data.mask().clone(), data.values().to_vec(), 1e-8).unwrap();
        let opts = SolveOptions {
            tau_floor_rel: 1e-14,
            ..Default::default()
        };
        let rep = solve_nuclear_norm(&noisy, &opts).unwrap();
        assert_eq!(rep.stop_reason, StopReason::ResidualBelowBudget);
        assert!(rep.iterations > 0 && rep.residual <= 1e-8);
    }

    #[test]
    fn recovers_rank3_from_40_percent() {
        let model = LowRankModel::<f64>::generate_incoherent(64, 64, 3, &RngSeed::new(3, 0)).unwrap();
        let x = model.to_dense();
        let data = ObservedData::sample(uniform_mask(64, 64, 0.4, 5), &x).unwrap();
        let rep = solve_nuclear_norm(&data, &SolveOptions::default()).unwrap();
        let db = snr(&rep.estimate, &x).unwrap();
        assert!(
            db >= 60.0,
            "snr {db} after {} its ({:?})",
            rep.iterations,
            rep.stop_reason
        );
    }

    #[test]
    fn identity_mask_fails_to_recover() {
        let model = LowRankModel::<f64>::generate_incoherent(64, 64, 3, &RngSeed::new(3, 0)).unwrap();
        let x = model.to_dense();
        let data = ObservedData::sample(SamplingMask::identity(64).unwrap(), &x).unwrap();
        let rep = solve_nuclear_norm(&data, &SolveOptions::default()).unwrap();
        assert!(snr(&rep.estimate, &x).unwrap() <= 3.0);
    }

    #[test]
    fn complex_model_recovers() {
        let model = LowRankModel::<Complex64>::generate_incoherent(30, 30, 2, &RngSeed::new(4, 0)).unwrap();
        let x = model.to_dense();
        let data = ObservedData::sample(uniform_mask(30, 30, 0.5, 9), &x).unwrap();
        let rep = solve_nuclear_norm(&data, &SolveOptions::default()).unwrap();
        assert!(snr(&rep.estimate, &x).unwrap() >= 60.0);
    }

    #[test]
    fn penalized_objective_is_monotone_at_fixed_tau() {
        let model = LowRankModel::<f64>::generate_incoherent(12, 10, 2, &RngSeed::new(6, 0)).unwrap();
        let data = ObservedData::sample(uniform_mask(12, 10, 0.6, 2), &model.to_dense()).unwrap();
        let opts = SolveOptions {
            continuation: false,
            tau0_rel: 0.05,
            tau_floor_rel: 0.05,
            oversample: 10,
            record_history: true,
            max_iter: 300,
            ..Default::default()
        };
        let rep = solve_nuclear_norm(&data, &opts).unwrap();
        for w in rep.history.windows(2) {
            assert!(w[1].penalized <= w[0].penalized * (1.0 + 1e-10) + 1e-12, "{:?}", w);
        }
    }

    #[test]
    fn als_recovers_low_rank() {
        let model = LowRankModel::<f64>::generate_incoherent(40, 30, 2, &RngSeed::new(8, 0)).unwrap();
        let x = model.to_dense();
        let data = ObservedData::sample(uniform_mask(40, 30, 0.5, 3), &x).unwrap();
        let rep = solve_als(&data, &AlsOptions::new(2)).unwrap();
        assert_eq!(rep.solver, SolverKind::Als);
        assert!(snr(&rep.estimate, &x).unwrap() >= 60.0, "{:?}", rep.stop_reason);

        let cm = LowRankModel::<Complex64>::generate_incoherent(30, 30, 2, &RngSeed::new(8, 1)).unwrap();
        let cx = cm.to_dense();
        let cdata = ObservedData::sample(uniform_mask(30, 30, 0.5, 4), &cx).unwrap();
        let rep = solve_als(&cdata, &AlsOptions::new(2)).unwrap();
        assert!(snr(&rep.estimate, &cx).unwrap() >= 60.0);
    }

    #[test]
    fn observed_data_validation() {
        let mask = SamplingMask::identity(3).unwrap();
        assert!(ObservedData::new(mask.clone(), vec![1.0; 2], 0.0).is_err());
        assert!(ObservedData::new(mask.clone(), vec![1.0; 3], -1.0).is_err());
        let empty = ObservedData::<f64>::new(SamplingMask::empty(2, 2).unwrap(), vec![], 0.0).unwrap();
        assert_eq!(
            solve_nuclear_norm(&empty, &SolveOptions::default()).unwrap_err(),
            Error::EmptyMask
        );
    }

    #[test]
    fn oversized_step_reports_divergence() {
        let model = LowRankModel::<f64>::generate_incoherent(20, 20, 2, &RngSeed::new(6, 0)).unwrap();
        let data = ObservedData::sample_model(uniform_mask(20, 20, 0.5, 6), &model).unwrap();
        let opts = SolveOptions {
            delta: 3.0,
            continuation: false,
            divergence_window: 10,
            ..Default::default()
        };
        assert!(matches!(
            solve_nuclear_norm(&data, &opts),
            Err(Error::Divergence { .. })
        ));
        let bad = SolveOptions {
            delta: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            solve_nuclear_norm(&data, &bad),
            Err(Error::InvalidParameter(_))
        ));
    }
}
