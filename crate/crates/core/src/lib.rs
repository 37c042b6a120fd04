//! Divergence-free Stokes flow in 2D via a C0 interior-penalty stream
//! function discretization, with robust-IPG penalty weights, variable
//! viscosity, thermal convection benchmarks and passive tracer advection.
//!
//! The velocity is the curl of a continuous degree-`p` scalar field, so mass
//! conservation and the impermeability of enclosed domains hold pointwise by
//! construction; continuity of the velocity itself is enforced weakly across
//! mesh facets.

pub mod analysis;
pub mod driver;
pub mod element;
pub mod error;
pub mod heat;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod space;
pub mod stokes;
pub mod tracers;

pub use error::Error;
