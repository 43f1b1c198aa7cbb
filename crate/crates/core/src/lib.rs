//! Rank-based estimation of the quantile dependence function.
//!
//! The crate turns a paired sample into randomized ranks, evaluates the
//! bilinear (checkerboard) interpolation of the empirical copula, and
//! standardizes it into the quantile dependence surface
//! `q̄ₙ(u,v) = (C̄ₙ(u,v) − uv) / √(uv(1−u)(1−v))`.
//!
//! On top of the surface it provides
//!
//! * decile-cell dependence diagrams with Monte Carlo calibrated barriers
//!   ([`diagram`]),
//! * the global independence statistics `Vₙ` and `Tₙ` with Monte Carlo
//!   null distributions ([`global_test`]),
//! * depth-2 binary expansion symmetry statistics ([`bet`]),
//! * seeded generators for benchmark alternatives and a power harness
//!   ([`models`]).
//!
//! Every Monte Carlo routine is a pure function of its inputs and a 64-bit
//! master seed; see [`rng`] for how sub-streams are derived.

pub mod bet;
pub mod cli;
pub mod cache;
pub mod copula;
pub mod dependence;
pub mod diagram;
pub mod error;
pub mod io;
pub mod models;
pub mod montecarlo;
pub mod ranks;
pub mod render;
pub mod rng;

pub use copula::{CheckerboardCopula, NullMoments};
pub use dependence::{DyadicGrid, QSurface};
pub use diagram::{BarrierTable, CellClass, CellIndex, DependenceDiagram};
pub use error::{QdepError, Result};
pub use global_test::{NullSample, StatisticKind, TestConfig, TestResult};
pub use ranks::{PseudoSample, Sample};
