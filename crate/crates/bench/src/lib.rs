//! Shared fixtures for the benchmarks.

use ksgreen::sbdf::{default_random_seed, step_params};
use ksgreen::{sbdf_scheme, seed, ProblemParams, SeedMethod, SeedSetup, SimState, SubgridPolicy};

/// Parameters of the quadrature-error experiment.
pub fn quad_params() -> ProblemParams {
    ProblemParams::new(2e-4, 1e-5, 0.0, 0.0).expect("valid parameters")
}

/// An order-`order` state seeded with random eigenmodes at `ν = 1e-3`.
pub fn chaotic_state(order: usize, n: usize) -> SimState {
    let nu = 1e-3;
    let setup = SeedSetup {
        nu,
        h: 0.5 * nu,
        l: 0.0,
        r: 0.0,
        n,
        order,
        policy: SubgridPolicy::default(),
        workers: 1,
        allow_expensive: false,
    };
    seed(
        &SeedMethod::EigenmodeGrowth {
            amplitudes: default_random_seed(nu, 7),
        },
        &setup,
    )
    .expect("seeding succeeds")
    .state
}

pub fn chaotic_params(order: usize) -> ProblemParams {
    let nu = 1e-3;
    step_params(&sbdf_scheme(order).expect("valid order"), nu, 0.5 * nu, 0.0, 0.0).expect("valid parameters")
}
