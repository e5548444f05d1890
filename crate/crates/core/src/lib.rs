//! Pseudo-spectral simulation of high-friction relaxation systems (Euler with
//! friction, Euler–Poisson, Euler–Korteweg) and their gradient-flow limits
//! (porous medium, Keller–Segel, Cahn–Hilliard) on periodic domains, with
//! relative-energy diagnostics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod elliptic;
pub mod energetics;
pub mod error;
pub mod field;
pub mod harness;
pub mod relent;

pub use error::{Error, Result};
