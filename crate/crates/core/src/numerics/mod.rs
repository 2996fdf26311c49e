//! Generic numerical kernels used by the physics modules.

pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod spline;
pub mod tridiag;
