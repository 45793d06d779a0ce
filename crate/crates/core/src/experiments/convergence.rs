//! Temporal convergence of the SBDF schemes against the travelling-wave
//! solution.

use crate::builder::{OperatorBuilder, SubgridPolicy};
use crate::cheb::ChebyshevGrid;
use crate::error::{Error, Result};
use crate::experiments::fit::fit_power_law;
use crate::experiments::soliton::Soliton;
use crate::sbdf::{seed, step_params, sbdf_scheme, SeedMethod, SeedSetup};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSetup {
    pub order: usize,
    pub nu: f64,
    pub c: f64,
    pub x0: f64,
    pub n: usize,
    /// Final time (not scaled by ν).
    pub horizon: f64,
    pub policy: SubgridPolicy,
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Completed,
    BlownUp { step: u64 },
    Refused,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Completed => "stable",
            Verdict::BlownUp { .. } => "blown_up",
            Verdict::Refused => "refused",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub order: usize,
    pub h: f64,
    pub steps: u64,
    /// `max|u - w| / max|w|` at the final time.
    pub error: Option<f64>,
    pub verdict: Verdict,
}

/// Relative sup-norm distance between `u` and the soliton at time `t`.
pub fn soliton_error(grid: &ChebyshevGrid, u: &[f64], sol: &Soliton, t: f64) -> f64 {
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (&x, &ux) in grid.nodes().iter().zip(u) {
        let w = sol.value(x, t);
        diff = diff.max((ux - w).abs());
        scale = scale.max(w.abs());
    }
    diff / scale
}

/// Integrates the soliton for one step size.
pub fn convergence_point(setup: &ConvergenceSetup, h: f64) -> Result<ConvergenceRow> {
    if !(h > 0.0) || !(setup.horizon > 0.0) {
        return Err(Error::invalid("step size and horizon must be positive"));
    }
    let steps = (setup.horizon / h).round().max(1.0) as u64;
    let sol = Soliton::new(setup.nu, setup.c, setup.x0)?;
    let (l, r) = sol.limits();
    let scheme = sbdf_scheme(setup.order)?;
    let mut row = ConvergenceRow {
        order: setup.order,
        h,
        steps,
        error: None,
        verdict: Verdict::Refused,
    };
    let params = step_params(&scheme, setup.nu, h, l, r)?;
    let builder = match OperatorBuilder::new(params, setup.n, setup.policy) {
        Ok(b) => b,
        Err(Error::RealRoots { .. }) => return Ok(row),
        Err(e) => return Err(e),
    };
    let ops = builder.build(setup.workers)?;
    let seed_setup = SeedSetup {
        nu: setup.nu,
        h,
        l,
        r,
        n: setup.n,
        order: setup.order,
        policy: setup.policy,
        workers: setup.workers,
        allow_expensive: false,
    };
    let mut state = seed(&SeedMethod::ExactSoliton { c: setup.c, x0: setup.x0 }, &seed_setup)?.state;
    for _ in 0..steps {
        match state.step(&ops) {
            Ok(()) => {}
            Err(Error::BlowUp { step }) => {
                row.verdict = Verdict::BlownUp { step };
                return Ok(row);
            }
            Err(e) => return Err(e),
        }
    }
    let grid = ChebyshevGrid::canonical(setup.n)?;
    row.error = Some(soliton_error(&grid, &state.solution(), &sol, state.time()));
    row.verdict = Verdict::Completed;
    Ok(row)
}

pub fn convergence_test(setup: &ConvergenceSetup, h_list: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if h_list.is_empty() {
        return Err(Error::invalid("the step-size list is empty"));
    }
    h_list.iter().map(|&h| convergence_point(setup, h)).collect()
}

/// Fitted order of convergence over rows with `h` in `[h_min, h_max]`.
pub fn fitted_order(rows: &[ConvergenceRow], h_min: f64, h_max: f64) -> Result<f64> {
    let (hs, es): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.h >= h_min && r.h <= h_max)
        .filter_map(|r| r.error.map(|e| (r.h, e)))
        .unzip();
    Ok(fit_power_law(&hs, &es)?.slope)
}
