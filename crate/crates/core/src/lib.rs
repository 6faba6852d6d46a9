//! Non-Hermitian three-sublattice lattices with tunable real-energy flat bands.
//!
//! * [`lattice`]: model descriptions and the built-in zoo (Lieb, Tasaki, dice, kagome).
//! * [`bloch`]: Bloch matrices, exact and numeric band solvers, symmetry checks.
//! * [`analysis`]: Brillouin-zone scans, flatness, discriminant, EP/DP classification.
//! * [`realspace`]: finite lattices, compact localized states and time evolution.
//! * [`io`]: CSV/JSON export formats shared by the CLI and the C API.

pub mod analysis;
pub mod bloch;
pub mod cli;
pub mod cubic;
pub mod error;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod phase;
pub mod realspace;

pub use error::{Error, Result};
pub use lattice::{LatticeModel, ModelKind, Params};
pub use phase::Phase;
