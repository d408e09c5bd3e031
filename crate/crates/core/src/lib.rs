//! Scaling, factorization and dynamic-scaling heuristics for the sparse
//! symmetric indefinite systems that arise inside interior-point methods.
//!
//! The pipeline runs bottom-up:
//!
//! * [`sparsemat`]: lower-triangle storage, Matrix Market I/O, `SAS` algebra.
//! * [`scaling`]: Curtis-Reid, Ruiz equilibration and matching-based scalings.
//! * [`ordering`]: minimum degree and matching-based compressed orderings.
//! * [`ldlt`]: threshold-pivoted `LDL^T` with 1x1/2x2 pivots, delayed pivots,
//!   inertia and iterative refinement.
//! * [`controller`]: the on-demand / high-delay scaling heuristics.
//! * [`kkt`]: augmented-system assembly, inertia correction and a small
//!   barrier interior-point driver.
//! * [`bench`]: suite runner, performance profiles and reliability tables.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod controller;
pub mod error;
pub mod kkt;
pub mod ldlt;
pub mod ordering;
pub mod scaling;
pub mod sparsemat;

pub use error::{Error, Result};
