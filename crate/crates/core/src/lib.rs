//! Simulation library for layered (diversity-embedded) transmission over
//! quasi-static Rayleigh ISI channels with a single spatial degree of freedom.
//!
//! The crate is organized along the signal path:
//!
//! - [`specmath`]: dense complex linear algebra (Fourier bases, circulants,
//!   Vandermonde inverses, Hermitian eigenvalues).
//! - [`channel`]: channel draws, frequency-domain taps, tap classification and
//!   analytic outage probabilities.
//! - [`codec`]: QAM constellations, layered superposition codewords and the
//!   codebook constraint checker.
//! - [`link`]: transmit/receive chain, selection-matrix front end, per-layer
//!   maximum-likelihood decoding and pairwise error bounds.
//! - [`experiments`]: Monte Carlo SNR sweeps, diversity-slope fits, reference
//!   trade-off curves and the broadcast rate region.
//!
//! All randomness is counter-based ([`rng`]), so any run is reproducible from
//! its seed alone, independent of worker count or scheduling.

pub mod channel;
pub mod codec;
pub mod error;
pub mod experiments;
pub mod link;
pub mod rng;
pub mod specmath;

pub use error::{Error, Result};
