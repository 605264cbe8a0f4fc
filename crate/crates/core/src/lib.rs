//! Fefferman defining densities, boundary affine invariants, GJMS operators,
//! Q-curvature and renormalized volume for strictly convex hypersurfaces.

#![allow(clippy::needless_range_loop)]

pub mod ambient;
pub mod blaschke;
pub mod error;
pub mod field;
pub mod gjms;
pub mod hypersurface;
pub mod io;
pub mod jet;
pub mod ma_solver;
pub mod poly;
pub mod qcurvature;
pub mod sphere;
pub mod surface;
pub mod tangent;
pub mod variation;

pub use error::{Error, Result};
pub use field::{Collar, Field, HomogeneousField};
pub use jet::{Jet, Series};
pub use poly::Poly;
pub use sphere::SphereGrid;
pub use surface::{GridConfig, Harmonic, SurfaceKind, SurfaceSpec};
