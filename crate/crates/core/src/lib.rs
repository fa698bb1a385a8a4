//! # ubound
//!
//! Moment and tail bounds for normalized multi-index sums
//!
//! ```text
//! S_L[f] = |L|^{-1} Σ_{k ∈ L} f(ξ_{k(1)}(1), …, ξ_{k(d)}(d))
//! ```
//!
//! with a nonnegative kernel `f` and independent coordinates, together with
//! the engines that check every bound against exact enumeration or Monte Carlo.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`bell`] | Poisson moments `B(p,β) = E τ^p` and their upper and lower envelopes |
//! | [`onedim`] | Triangle, Rosenthal–Bell and Schechtman bounds, the Θ bound for sample means |
//! | [`kernels`] | Grid kernels, nonnegative degenerate representations, NMF and spectral truncation |
//! | [`multisum`] | Composite moment bound `W_L(p)` for boxes and arbitrary index sets |
//! | [`gls`] | Generating functions ψ, Young–Fenchel transform, exponential tail bounds |
//! | [`verify`] | Exact enumeration, reproducible parallel Monte Carlo, dominance reports |
//! | [`cli`] | The `ubound` command-line front end |
//!
//! ## Quick start
//!
//! ```rust
//! use ubound::bell::{bell_root, upper_g, BellEvalConfig};
//!
//! let cfg = BellEvalConfig::default();
//! let root = bell_root(2.0, 1.0, &cfg).unwrap(); // √2
//! let envelope = upper_g(2.0, 1.0).unwrap();
//! assert!(root <= envelope);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bell;
pub mod cli;
mod error;
pub mod gls;
pub mod kernels;
pub mod multisum;
pub mod onedim;
pub mod optimize;
pub mod special;
pub mod verify;

pub use error::{Error, Result};

/// Schema tag embedded in every JSON report.
pub const SCHEMA_VERSION: &str = "ubound/1";
