//! Model-regularized deep Q-learning.
//!
//! A DQN whose network, the *transcoder*, also predicts the next frame, the
//! clipped reward and the terminal flag of every transition. The prediction
//! errors are added to the Bellman loss as regularizers, giving the shared
//! encoder a training signal at every step even when rewards are sparse.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! configuration parsing and the command line live in the `transq` crate.
//!
//! Module map:
//!
//! - [`nn`]: tensors, a reverse-mode tape, conv/deconv/linear layers, Glorot
//!   initialization, Adam and global-norm gradient clipping.
//! - [`transcoder`]: the network, its compound loss and multi-step unrolls.
//! - [`env`]: the environment contract, frame-skip/stack wrapper and the two
//!   built-in pixel games `catch` and `seek`.
//! - [`replay`]: frame-once experience memory with trajectory sampling.
//! - [`trainer`]: the interaction/update loop.
//! - [`eval`]: offline evaluation, score normalization and sample efficiency.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod codec;
pub mod env;
pub mod error;
pub mod eval;
pub mod nn;
pub mod replay;
pub mod rng;
pub mod scalar;
pub mod trainer;
pub mod transcoder;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;
