//! Numerical convex analysis and entropy–transport toolkit.
//!
//! Legendre transforms of sampled and max-affine convex functions, Santaló
//! products, twisted log-Laplace functionals, entropies and Fisher
//! information of log-concave densities, exact discrete optimal transport,
//! moment-measure solving, and a harness of inequality checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod conjugate;
pub mod density;
pub mod error;
pub mod extended;
pub mod functionals;
pub mod grid;
pub mod hull;
pub mod lp;
pub mod maxaffine;
pub mod measure;
pub mod moment;
pub mod quadrature;
pub mod regularize;
pub mod report;
pub mod spec;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Axis, GridFunction, Symmetry};
