//! Multiuser downlink beamforming for partially-connected mmWave massive MIMO.
//!
//! The crate is organised around the processing chain of a simulation trial:
//!
//! - [`array_channel`]: ULA steering vectors and seeded Saleh-Valenzuela channels.
//! - [`pwmmse`]: phase-aligned analog stage plus WMMSE digital stage (perfect CSI).
//! - [`amm`]: beam sweeping and majorization-minimization beam nulling for an
//!   analog-only beamformer (imperfect CSI).
//! - [`baselines`]: fully digital WMMSE and sweep-plus-zero-forcing hybrid.
//! - [`metrics`]: achievable rates, approximate SINR and beam patterns.
//! - [`harness`]: experiment configs, seeded Monte Carlo runs and CSV output.
//!
//! Throughout, channels enter received signals as `h^H x` and the analog
//! beamformer is block diagonal with one constant-modulus vector per RF chain.

pub mod amm;
pub mod array_channel;
pub mod baselines;
pub mod error;
pub mod harness;
pub(crate) mod linalg;
pub mod metrics;
pub mod pwmmse;

pub use error::{Error, Result};

/// Complex baseband sample type used everywhere in the crate.
pub type C64 = num_complex::Complex<f64>;
