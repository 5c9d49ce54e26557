//! Conformal-Fuchsian pipeline for systems of semilinear wave equations
//! ḡ^{αβ}∇̄_α∇̄_β ū^K = ā^{Kαβ}_{IJ}∇̄_α ū^I ∇̄_β ū^J near future null infinity.
//!
//! The modules follow the pipeline order:
//!
//! * [`geometry`]: compactification map, conformal factor and metric.
//! * [`coefficients`]: Cartesian coefficients, spherical expansion, null form and
//!   compactified components.
//! * [`symmetrizer`]: symmetric hyperbolic system blocks, cutoff extension,
//!   boundary forms and run constants.
//! * [`asymptotic_flow`]: the singular asymptotic ODE, its flow and Jacobian.
//! * [`initial_data`]: physical Cauchy data to first-order data on the torus.
//! * [`evolution`]: extended-system evolution, second-order oracle, manufactured
//!   solutions.
//! * [`diagnostics`]: composite Fuchsian variables, energies, decay fits,
//!   derived-system residuals and reconstruction of ū.

pub mod asymptotic_flow;
pub mod coefficients;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod geometry;
pub mod initial_data;
pub mod linalg;
pub mod symmetrizer;

pub use error::{Error, Result};
