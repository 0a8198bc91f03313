//! Numerical laboratory for two-phase elliptic transmission problems with
//! independently periodic coefficients.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: coefficient tensors, ellipticity checks, Hölder estimates.
//! * [`mesh`]: interface-fitted triangulations and integration regions.
//! * [`sparse`]: CSR matrices and preconditioned conjugate gradients.
//! * [`fem`]: P1 assembly of transmission problems, Dirichlet solves, norms.
//! * [`cell`]: periodic correctors, homogenized tensors, flux correctors.
//! * [`piecewise_linear`]: the piecewise linear solutions of a flat
//!   interface and best fits against them.
//! * [`solver`]: oscillating and homogenized solves, rate sweeps.
//! * [`twoscale`]: smoothing, boundary-layer cutoffs, the first-order
//!   two-scale approximant.
//! * [`excess`]: excess functionals, decay sweeps, gradient profiles and
//!   interface stability.
//!
//! Conventions: the interface is the graph `x_2 = ψ(x_1)`, the phase above
//! it is `Phase::Plus`, and its normal points from the lower phase into the
//! upper one. The jump condition reads `[n·A∇u] = g` with
//! `[v] = v_+ − v_-`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell;
pub mod error;
pub mod excess;
pub mod fem;
pub mod mesh;
pub mod piecewise_linear;
pub mod solver;
pub mod sparse;
pub mod tensor;
pub mod twoscale;

pub use error::{Error, Result};
pub use nalgebra;
