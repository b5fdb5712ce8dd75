//! Green-list watermarking laboratory: a synthetic language model, a
//! Kirchenbauer-style green/red watermark with z-test detection, a
//! mixed-integer-programming substrate for stealing green lists under
//! several knowledge settings, and token-substitution watermark removal.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the optional
//! `std` and `parallel` features enable standard-library conveniences
//! and deterministic multi-threaded solving.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod detector;
pub mod error;
pub mod mip;
pub mod removal;
pub mod rng;
pub mod stealer;
pub mod vocab;
pub mod watermark;

pub use error::{CoreError, Result};
