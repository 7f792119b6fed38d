//! Spectral-gap evaluation of seismic sampling designs.
//!
//! A sampling mask is a binary `n x m` matrix marking which entries of a
//! densely sampled data matrix were observed. The ratio of its two largest
//! singular values (the SG ratio) predicts how well low-rank matrix
//! completion will recover data sampled through it: small ratio, good design.
//!
//! The crate is `no_std` with `alloc`. It provides:
//!
//! * [`mask`]: canonical masks, src-rec matricization, sampling statistics.
//! * [`spectral`]: top-two singular values, SG ratio, bipartite connectivity,
//!   and a dense oracle for verification.
//! * [`designs`]: periodic, staggered, relocated, jittered, uniform random,
//!   and binned off-grid sampling designs.
//! * [`completion`]: incoherent low-rank models, the singular value
//!   thresholding solver, a factorized fast path, SNR, and the sample bound.
//! * [`experiments`]: the relocation, jitter, and grid-density sweeps as pure
//!   per-trial cells plus deterministic aggregation.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod completion;
pub mod dense;
pub mod designs;
pub mod error;
pub mod experiments;
pub mod mask;
pub mod scalar;
pub mod seed;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use mask::{GapStats, GridAxis, GridSpec, MatricizationMap, SamplingMask};
pub use seed::RngSeed;
pub use spectral::{SpectralOptions, SpectralSummary};
