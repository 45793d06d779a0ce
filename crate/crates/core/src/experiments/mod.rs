//! Validation oracles and experiment drivers: the quadrature-error test,
//! the soliton convergence test, stability scans and boundary-layer
//! statistics.

pub mod contours;
pub mod convergence;
pub mod fit;
pub mod layer;
pub mod soliton;
pub mod stability;
pub mod testfunc;

pub use soliton::Soliton;
pub use testfunc::{quadrature_error, quadrature_error_test, test_function, TestFunctionSample};
pub use convergence::{convergence_test, ConvergenceRow, ConvergenceSetup, Verdict};
pub use fit::{fit_exponential, fit_line, fit_power_law, LineFit};
pub use contours::{contour_export, ContourExport, ScaledFrame};
pub use layer::{boundary_layer_profile, layer_run, LayerProfile, LayerRunSetup, ProfileAccumulator};
pub use stability::{stability_scan, StabilityMap, StabilityPoint, StabilitySetup};
