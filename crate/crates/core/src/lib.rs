pub mod cli;
pub mod curvature;
pub mod error;
pub mod functionals;
pub mod gamma;
pub mod multidim;
pub mod numeric;
mod ode;
pub mod pmf;
pub mod random;
pub mod semigroup;
pub mod tail;

pub use error::{Error, Result};
pub use pmf::TruncatedPmf;
pub use semigroup::{GeneratorMatrix, GridFunction};
