//! Spectral shape differences.
//!
//! Triangle meshes are represented relative to a base shape by small
//! operator matrices (area, conformal and extrinsic shape differences)
//! built on truncated Laplace–Beltrami eigenbases. The crate builds those
//! operators, recovers embeddings from the Gram operator, interpolates and
//! combines operators algebraically, and trains a small decoder network
//! that maps operators back to vertex coordinates.

pub mod algebra;
pub mod align;
pub mod cli;
pub mod decoder;
pub mod error;
pub mod extrinsic;
pub mod fmap;
pub mod linalg;
pub mod meshio;
pub mod shapediff;
pub mod shapes;
pub mod spectral;

pub use error::{Error, Result};
pub use meshio::TriMesh;
pub use shapediff::{DiffKind, ShapeDifference};
pub use spectral::SpectralBasis;
