//! Discretization and time integration of the cutoff-extended Fuchsian system,
//! the independent second-order solver and manufactured solutions.

pub mod fd;
pub mod grid;
pub mod mms;
pub mod oracle;
pub mod second_order;
pub mod source;
pub mod stepper;
pub mod system;

pub use grid::{Grid, GridMode, StateField};
pub use stepper::{evolve, EvolveOptions, EvolveResult, RunStatus, StepObserver};
pub use system::{rhs, Problem};
