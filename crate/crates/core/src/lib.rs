//! Dunkl harmonic analysis on truncated grids.
//!
//! A finite reflection group acting on `R^n` defines a weighted measure and a
//! Dunkl Laplacian. This crate discretizes both on a box, builds the heat and
//! Poisson semigroups by spectral calculus, and on top of them the
//! Littlewood-Paley differences `D_k`, Triebel-Lizorkin norms and a discrete
//! Calderon reproducing codec.
//!
//! ```
//! use dunkl::grid::{GridSpec, WeightedGrid};
//! use dunkl::group::DunklStructure;
//! use dunkl::lp::{LittlewoodPaley, ScaleWindow, TLParams};
//!
//! let s = DunklStructure::preset("z2", 0.5)?;
//! let grid = WeightedGrid::new(GridSpec::new(4.0, 32, 1), s)?;
//! let lp = LittlewoodPaley::build(&grid, ScaleWindow::new(-1, 2, 1)?)?;
//! let f = dunkl::grid::GridFunction::from_fn(&grid, |x| (-x[0] * x[0]).exp())?;
//! let norm = lp.tl_norm(&f, &TLParams::new(0.0, 2.0, 2.0))?;
//! assert!(norm > 0.0);
//! # Ok::<(), dunkl::error::Error>(())
//! ```
//!
//! The guide in `book/` walks through each module; its code blocks are
//! compiled as doc-tests of this crate.

pub mod error;
pub mod grid;
pub mod group;
pub mod operator;
pub mod quadrature;
pub mod hankel;
pub mod lp;
pub mod frame;
pub mod verify;
pub mod config;
pub mod io;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec, WeightedGrid};
pub use group::DunklStructure;

// Book chapters run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/groups.md")]
    mod groups {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/semigroups.md")]
    mod semigroups {}
    #[doc = include_str!("../../../book/src/littlewood_paley.md")]
    mod littlewood_paley {}
    #[doc = include_str!("../../../book/src/codec.md")]
    mod codec {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
