//! Exact feasibility, interior points, dimension and redundancy detection for
//! linear inequality systems with at most two variables per inequality.
//!
//! Everything is computed over exact rationals. The main entry points are
//! [`hochbaum_naor::hn_solve`], [`hochbaum_naor::dimension`] and
//! [`clarkson::detect_redundancies`].

pub mod aspvall_shiloach;
pub mod clarkson;
pub mod envelope;
pub mod fourier_motzkin;
pub mod generate;
pub mod hochbaum_naor;
pub mod io;
pub mod numeric;
pub mod par;
pub mod system;

pub use numeric::{ExtScalar, InfScalar, NumericError, Scalar};
pub use system::{AffineSubst, CheckMode, Constraint, Li2System, RowId, SystemError, Var};
