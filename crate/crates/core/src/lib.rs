//! Certified lower bounds on the BB84 secret-key rate when the two threshold
//! detectors have different efficiencies (1 and `eta`) and Bob's input may
//! carry any number of photons.
//!
//! The crate is organised bottom-up:
//!
//! - [`scalarmath`]: binary entropy, the mismatch factor `theta_n`, and the
//!   minimal mean double-click probability for `n >= 3` photons.
//! - [`fock`]: per-photon-number sector linear algebra (number bases, basis
//!   change, detection POVMs, attenuation, decoherence, entropies).
//! - [`keyrate`]: the key-rate engine over the two-photon detection share.
//! - [`decoy`]: signal + two-decoy estimators feeding the engine.
//! - [`simulate`]: observables of the depolarizing channel and of arbitrary
//!   block-diagonal states, plus the efficiency sweep.
//! - [`oracles`]: randomized brute-force checks of the supporting bounds.
//! - [`cli`]: the `mismatch-qkd` command-line front end.

// `!(x >= lo)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod decoy;
pub mod error;
pub mod fock;
pub mod keyrate;
pub mod oracles;
pub mod scalarmath;
pub mod simulate;

pub use error::{Error, Result};
pub use keyrate::{KeyRateResult, Observables, Status};
pub use scalarmath::{MismatchEta, Probability};
