//! Exact verification kernel for finite DG-categories, the A∞-functor
//! categories `F_n(A) = A∞Fun°(k[n], A)`, their matching objects, and the
//! explicit lifts showing that the matching maps are Dwyer–Kan fibrations.
pub mod ainfty;
pub mod dg;
pub mod error;
pub mod gen;
pub mod io;
pub mod linalg;
pub mod pretr;
pub mod reedy;
pub mod suite;

pub use error::{Error, Result};
