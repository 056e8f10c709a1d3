//! Geodesic ray transforms of tensor sources on a Riemannian ball, the
//! kinetic equation they satisfy, its Fourier transform in the first
//! direction component, and pointwise recovery of the source from the jump
//! of the transformed solution at zero frequency.

pub mod error;
pub mod chart;
pub mod geodesic;
pub mod harness;
pub mod metric;
pub mod numerics;
pub mod ray;
#[cfg(feature = "recovery")]
pub mod recovery;
pub mod source;
pub mod spectral;

pub use error::{GeoError, Result};
