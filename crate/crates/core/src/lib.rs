//! Exponentially fitted mimetic finite differences for scalar and vector
//! convection-diffusion problems on two-dimensional Delaunay-Voronoi meshes.

pub mod analyze;
pub mod assembly;
pub mod dualmesh;
pub mod error;
pub mod expfit;
pub mod fem;
pub mod io;
pub mod mimetic;
pub mod presets;
pub mod solve;
pub mod sparse;

pub use error::{MfdError, Result};
