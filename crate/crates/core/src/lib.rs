//! Taylor-Hood finite elements for Stokes flow on the unit square.
//!
//! The library solves three related boundary value problems on (0,1)^2 with
//! the boundary split into two nonempty parts Gamma1 (no-slip) and Gamma2:
//!
//! * `s1`: Stokes in symmetric-gradient form with a traction condition on
//!   Gamma2,
//! * `s2`: Stokes in curl-curl form with a prescribed pressure and vanishing
//!   tangential velocity on Gamma2,
//! * `pp`: a decoupled pressure-Poisson reformulation that first solves a
//!   scalar Poisson problem for the pressure and then recovers the velocity.
//!
//! On top of the solvers sits a verification harness ([`verify`]) that
//! measures how perturbations of the boundary data propagate into the
//! solutions, using discrete fractional boundary norms built from boundary
//! eigenexpansions ([`norms`]).

pub mod assembly;
pub mod error;
pub mod field;
pub mod ldl;
pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod solvers;
pub mod spaces;
pub mod verify;
pub mod vtk;

pub use error::{Error, Result};
pub use field::{ScalarField, TensorField, VectorField};
pub use mesh::{BcLayout, Marker, Mesh};
pub use norms::{BoundaryFunctional, TraceSet, TraceSpectrum};
pub use spaces::{ConstraintKind, ConstraintSet, FeSpace, SpaceKind};

/// Dense coefficient vector over the degrees of freedom of one [`FeSpace`].
pub type CoeffVec = nalgebra::DVector<f64>;

/// Write a text file atomically: the content goes to a sibling temp file
/// which is renamed over the target, so readers never observe a half-written
/// file.
pub fn atomic_write(path: &std::path::Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| std::path::Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
