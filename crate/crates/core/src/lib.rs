//! Structured stochastic quasi-Newton optimisation.
//!
//! The curvature model is split into a cheap *base* matrix built directly from
//! the model (subsampled Hessian, Gauss-Newton, empirical Fisher, or a
//! Kronecker-factored layer block) and a quasi-Newton *refinement* fitted to
//! structured secant pairs. Directions are computed in closed form through
//! the structure of the sum.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod linalg;
pub mod parallel;
pub mod dataio;
pub mod models;
pub mod curvature;
pub mod seed;
pub mod refinement;
pub mod solver;
pub mod schedule;
pub mod engine;
pub mod experiment;
pub mod validation;
