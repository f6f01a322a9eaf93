//! Dense numerics: arrays, reverse-mode autodiff, Adam, and the banded and
//! symmetric solvers used by the data pipeline and the metrics.

mod adam;
mod array;
mod banded;
mod eigen;
mod graph;
pub mod kernels;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use array::Array;
pub use banded::{hp_bands, pentadiagonal_solve, solve_symmetric_penta, solve_tridiagonal};
pub use eigen::{psd_sqrt, symmetric_eigen, symmetric_sqrt_product};
pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamStore};
