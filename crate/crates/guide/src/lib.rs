//! The chapters of the book in `book/src`, one module each, so that
//! `cargo test --doc -p twophase-guide` runs every code block.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/tensors.md")]
pub mod tensors {}
#[doc = include_str!("../../../book/src/meshes.md")]
pub mod meshes {}
#[doc = include_str!("../../../book/src/transmission.md")]
pub mod transmission {}
#[doc = include_str!("../../../book/src/cell_problems.md")]
pub mod cell_problems {}
#[doc = include_str!("../../../book/src/piecewise_linear.md")]
pub mod piecewise_linear {}
#[doc = include_str!("../../../book/src/convergence.md")]
pub mod convergence {}
#[doc = include_str!("../../../book/src/expansion.md")]
pub mod expansion {}
#[doc = include_str!("../../../book/src/excess.md")]
pub mod excess {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
