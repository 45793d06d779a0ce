//! Green's-function time stepping for the Kuramoto-Sivashinsky equation
//! `u_t + u u_x + u_xx + ν u_xxxx = 0` on `[-1, 1]` with
//! `u(-1) = l`, `u(1) = r`, `u_xx(±1) = 0`.
//!
//! Each semi-implicit step is a pair of dense matrix-vector products with
//! precomputed convolution operators; no differentiation matrices and no
//! linear solves are involved.

pub mod builder;
pub mod cheb;
pub mod error;
pub mod experiments;
pub mod greens;
pub mod io;
pub mod sbdf;

pub use cheb::{clenshaw_curtis_row, interpolation_matrix, ChebyshevGrid, InterpolationMatrix, QuadratureRow};
pub use error::{Error, Result};
pub use greens::{eigen_sum_oracle, green_aux, GreenAux, ProblemParams, Side};
pub use builder::{
    build_operators, merge_partitions, ConvolutionOperators, OperatorBlock, OperatorBuilder, SubgridMode,
    SubgridPolicy,
};
pub use sbdf::{sbdf_scheme, seed, SbdfScheme, SeedMethod, SeedSetup, Seeded, SimState};
