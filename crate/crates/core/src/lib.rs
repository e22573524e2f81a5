pub mod decompose;
pub mod diffops;
pub mod direction;
pub mod error;
pub mod fbp;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pdhg;
pub mod phantom;
pub mod projector;
pub mod recon;
pub mod split;
mod vecops;

pub use error::{Error, Result};
pub use geometry::{Geometry, Image, Sinogram};
