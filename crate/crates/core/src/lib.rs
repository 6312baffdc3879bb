//! Numerical toolkit for the planar Beltrami equation `f_zbar = mu f_z`.
//!
//! * [`field`]: grids, sampled fields, Wirtinger calculus, chordal geometry.
//! * [`transforms`]: discrete Cauchy and Beurling transforms.
//! * [`beltrami`]: principal solutions, inverse maps, geometric diagnostics.
//! * [`admissibility`]: set constraints, `Q_M`, FMO and divergence diagnostics.
//! * [`dirichlet`]: Dirichlet problem on the unit disk via `f = F o G`.
//! * [`compactness`]: sampled families, equicontinuity and convergence reports.

pub mod admissibility;
pub mod beltrami;
pub mod compactness;
pub mod dirichlet;
pub mod error;
pub mod field;
pub mod inverse;
pub mod io;
pub mod mobius;
pub mod report;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
