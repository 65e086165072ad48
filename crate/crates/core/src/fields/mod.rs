//! Uniform-grid scalar fields, finite-difference operators, polar ring
//! sampling, and disc/ring quadrature.

mod grid;
mod interp;
mod quad;
mod ring;
mod stencil;

pub use grid::{Grid2D, NodeClass, ScalarField2D};
pub use interp::bicubic;
pub use quad::{circle_rect_overlap, disc_integral, disc_integral_weighted};
pub use ring::{polar_ring_sample, ring_integral, DerivativeFields, PointJet, PolarRing};
pub use stencil::{bilaplacian, gradient, hessian, laplacian};
