//! Stability scans over viscosity and step size, seeded by small random
//! eigenmode perturbations.

use rayon::prelude::*;

use crate::builder::{OperatorBuilder, SubgridPolicy};
use crate::error::{Error, Result};
use crate::experiments::convergence::Verdict;
use crate::sbdf::{default_random_seed, random_amplitudes, sbdf_scheme, seed, step_params, SeedMethod, SeedSetup};

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySetup {
    pub order: usize,
    pub n: usize,
    pub l: f64,
    pub r: f64,
    /// Integration horizon in units of ν.
    pub horizon_over_nu: f64,
    /// Perturbation amplitude; `None` selects `10⁻⁴/√ν`.
    pub amplitude: Option<f64>,
    pub rng_seed: u64,
    pub policy: SubgridPolicy,
    pub workers: usize,
}

impl StabilitySetup {
    pub fn new(order: usize, n: usize) -> Self {
        StabilitySetup {
            order,
            n,
            l: 0.0,
            r: 0.0,
            horizon_over_nu: 150.0,
            amplitude: None,
            rng_seed: 1,
            policy: SubgridPolicy::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPoint {
    pub nu: f64,
    pub h: f64,
    pub s: f64,
    pub steps: u64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub order: usize,
    pub n: usize,
    pub nu_grid: Vec<f64>,
    pub h_grid: Vec<f64>,
    /// `verdicts[i][j]` belongs to `nu_grid[i]`, `h_grid[j]`.
    pub verdicts: Vec<Vec<StabilityPoint>>,
}

impl StabilityMap {
    pub fn points(&self) -> impl Iterator<Item = &StabilityPoint> {
        self.verdicts.iter().flatten()
    }
}

/// Step size at which the roots of the linear operator turn real, `S = 1`.
pub fn real_root_step(order: usize, nu: f64, slope: f64) -> Result<f64> {
    let scheme = sbdf_scheme(order)?;
    let denom = 1.0 - 4.0 * nu * slope;
    if denom <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(4.0 * nu / denom / scheme.delta(1.0))
}

/// Viscosity at which `√ν = 2/n`.
pub fn resolution_viscosity(n: usize) -> f64 {
    let s = 2.0 / n as f64;
    s * s
}

pub fn stability_point(setup: &StabilitySetup, nu: f64, h: f64) -> Result<StabilityPoint> {
    let scheme = sbdf_scheme(setup.order)?;
    let params = step_params(&scheme, nu, h, setup.l, setup.r)?;
    let steps = (setup.horizon_over_nu * nu / h).ceil() as u64;
    let mut point = StabilityPoint {
        nu,
        h,
        s: params.s_param(),
        steps,
        verdict: Verdict::Refused,
    };
    let builder = match OperatorBuilder::new(params, setup.n, setup.policy) {
        Ok(b) => b,
        Err(Error::RealRoots { .. }) => return Ok(point),
        Err(e) => return Err(e),
    };
    let ops = builder.build(setup.workers)?;
    let amplitudes = match setup.amplitude {
        Some(eps) => random_amplitudes((2.0 / nu.sqrt()).ceil() as usize, eps, setup.rng_seed),
        None => default_random_seed(nu, setup.rng_seed),
    };
    let seed_setup = SeedSetup {
        nu,
        h,
        l: setup.l,
        r: setup.r,
        n: setup.n,
        order: setup.order,
        policy: setup.policy,
        workers: setup.workers,
        allow_expensive: false,
    };
    let mut state = seed(&SeedMethod::EigenmodeGrowth { amplitudes }, &seed_setup)?.state;
    for _ in 0..steps {
        match state.step(&ops) {
            Ok(()) => {}
            Err(Error::BlowUp { step }) => {
                point.verdict = Verdict::BlownUp { step };
                return Ok(point);
            }
            Err(e) => return Err(e),
        }
    }
    point.verdict = Verdict::Completed;
    Ok(point)
}

/// Scans the grid of `(ν, h)`; points run concurrently on `workers`
/// threads, each point single-threaded.
pub fn stability_scan(setup: &StabilitySetup, nu_list: &[f64], h_list: &[f64]) -> Result<StabilityMap> {
    if nu_list.is_empty() || h_list.is_empty() {
        return Err(Error::invalid("the viscosity and step-size lists must be non-empty"));
    }
    let inner = StabilitySetup {
        workers: 1,
        ..setup.clone()
    };
    let pairs: Vec<(f64, f64)> = nu_list
        .iter()
        .flat_map(|&nu| h_list.iter().map(move |&h| (nu, h)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(setup.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let flat = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(nu, h)| stability_point(&inner, nu, h))
            .collect::<Result<Vec<_>>>()
    })?;
    let verdicts = flat.chunks(h_list.len()).map(|c| c.to_vec()).collect();
    Ok(StabilityMap {
        order: setup.order,
        n: setup.n,
        nu_grid: nu_list.to_vec(),
        h_grid: h_list.to_vec(),
        verdicts,
    })
}
