//! Semi-implicit backward differentiation (SBDF) time stepping of orders
//! 1 to 4, and the strategies for seeding the multistep history.
//!
//! The state is the deviation `v = u - (l + R(x+1))` on the global
//! Chebyshev grid; `v` and `v_xx` vanish at both ends. One step is
//! `v_{k+1} = M I₁ + N I₂ + J` with
//! `I₁ = Σ (α_s + β_s ΔR) v_{k+1-s}` and
//! `I₂ = Δ Σ β_s (v²/2 + (l + R(x+1)) v)_{k+1-s}`.

use std::collections::{HashMap, VecDeque};

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::builder::{ConvolutionOperators, OperatorBuilder, SubgridPolicy};
use crate::cheb::ChebyshevGrid;
use crate::error::{Error, Result};
use crate::greens::{green_aux, ProblemParams};
use crate::experiments::Soliton;

/// A step is declared blown up once `|v|` passes this multiple of
/// `max(1, |l|, |r|)`.
pub const BLOW_UP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbdfScheme {
    order: usize,
    delta_factor: Rational64,
    alpha: Vec<Rational64>,
    beta: Vec<Rational64>,
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

pub fn sbdf_scheme(order: usize) -> Result<SbdfScheme> {
    let (delta_factor, alpha, beta) = match order {
        1 => (r(1, 1), vec![r(1, 1)], vec![r(1, 1)]),
        2 => (r(2, 3), vec![r(4, 3), r(-1, 3)], vec![r(2, 1), r(-1, 1)]),
        3 => (
            r(6, 11),
            vec![r(18, 11), r(-9, 11), r(2, 11)],
            vec![r(3, 1), r(-3, 1), r(1, 1)],
        ),
        4 => (
            r(12, 25),
            vec![r(48, 25), r(-36, 25), r(16, 25), r(-3, 25)],
            vec![r(4, 1), r(-6, 1), r(4, 1), r(-1, 1)],
        ),
        _ => {
            return Err(Error::invalid(format!(
                "SBDF order must be between 1 and 4, got {order}"
            )))
        }
    };
    Ok(SbdfScheme {
        order,
        delta_factor,
        alpha,
        beta,
    })
}

fn to_f64(q: Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

impl SbdfScheme {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Δ/h as an exact rational.
    pub fn delta_factor(&self) -> Rational64 {
        self.delta_factor
    }

    pub fn alpha(&self) -> &[Rational64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[Rational64] {
        &self.beta
    }

    /// The constant Δ for step size `h`.
    pub fn delta(&self, h: f64) -> f64 {
        to_f64(self.delta_factor) * h
    }

    /// `α_s` for `s = 1..=order` as floating point.
    pub fn alpha_f64(&self) -> Vec<f64> {
        self.alpha.iter().copied().map(to_f64).collect()
    }

    pub fn beta_f64(&self) -> Vec<f64> {
        self.beta.iter().copied().map(to_f64).collect()
    }
}

/// Parameters of the linear problem solved by each step of `scheme` with
/// step size `h`.
pub fn step_params(scheme: &SbdfScheme, nu: f64, h: f64, l: f64, r: f64) -> Result<ProblemParams> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("step size must be positive, got {h}")));
    }
    ProblemParams::new(nu, scheme.delta(h), l, r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    history: VecDeque<Vec<f64>>,
    step_index: u64,
    params: ProblemParams,
    scheme: SbdfScheme,
    h: f64,
    nu: f64,
    profile: Vec<f64>,
}

impl SimState {
    /// `history` is oldest first; its length must equal the scheme order and
    /// every vector must vanish exactly at both ends.
    pub fn new(
        scheme: SbdfScheme,
        nu: f64,
        h: f64,
        l: f64,
        r: f64,
        history: Vec<Vec<f64>>,
        step_index: u64,
    ) -> Result<Self> {
        let params = step_params(&scheme, nu, h, l, r)?;
        if history.len() != scheme.order() {
            return Err(Error::invalid(format!(
                "order {} needs {} history vectors, got {}",
                scheme.order(),
                scheme.order(),
                history.len()
            )));
        }
        let dim = history[0].len();
        if dim < 3 {
            return Err(Error::invalid("grid needs at least three points"));
        }
        for v in &history {
            if v.len() != dim {
                return Err(Error::invalid("history vectors differ in length"));
            }
            if v[0] != 0.0 || v[dim - 1] != 0.0 {
                return Err(Error::invalid("history vectors must vanish at x = ±1"));
            }
        }
        let grid = ChebyshevGrid::canonical(dim - 1)?;
        let profile = grid.nodes().iter().map(|&x| params.phi_profile(x)).collect();
        Ok(SimState {
            history: history.into(),
            step_index,
            params,
            scheme,
            h,
            nu,
            profile,
        })
    }

    pub fn order(&self) -> usize {
        self.dim() - 1
    }

    pub fn dim(&self) -> usize {
        self.profile.len()
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn scheme(&self) -> &SbdfScheme {
        &self.scheme
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.h
    }

    /// History, oldest first.
    pub fn history(&self) -> impl ExactSizeIterator<Item = &Vec<f64>> {
        self.history.iter()
    }

    /// Newest deviation `v`.
    pub fn current(&self) -> &[f64] {
        self.history.back().expect("history is never empty")
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    /// Physical solution `u = v + l + R(x+1)` at the newest time.
    pub fn solution(&self) -> Vec<f64> {
        self.current()
            .iter()
            .zip(&self.profile)
            .map(|(v, p)| v + p)
            .collect()
    }

    fn blow_up_limit(&self) -> f64 {
        BLOW_UP_FACTOR * 1f64.max(self.params.l.abs()).max(self.params.r.abs())
    }

    /// Checks that `ops` were built for this state's `(ν, Δ, l, r, n)`.
    pub fn check_operators(&self, ops: &ConvolutionOperators) -> Result<()> {
        let p = ops.params();
        if ops.dim() != self.dim() {
            return Err(Error::Mismatch(format!(
                "operators have order {}, state has {}",
                ops.order(),
                self.order()
            )));
        }
        if p != &self.params {
            return Err(Error::Mismatch(format!(
                "operators built for {p:?}, state needs {:?}",
                self.params
            )));
        }
        Ok(())
    }

    /// The candidate `v_{k+1}` without modifying the state.
    pub fn propose(&self, ops: &ConvolutionOperators) -> Result<Vec<f64>> {
        self.check_operators(ops)?;
        let (i1, i2) = integrands(self);
        let mut next = vec![0.0; self.dim()];
        ops.apply_step(&i1, &i2, &mut next);
        let last = next.len() - 1;
        next[0] = 0.0;
        next[last] = 0.0;
        Ok(next)
    }

    /// Appends `next` to the history unless it has blown up.
    pub fn accept(&mut self, next: Vec<f64>) -> Result<()> {
        if next.len() != self.dim() {
            return Err(Error::Mismatch(format!(
                "step result has {} values, state has {}",
                next.len(),
                self.dim()
            )));
        }
        if next[0] != 0.0 || next[next.len() - 1] != 0.0 {
            return Err(Error::invalid("step result must vanish at x = ±1"));
        }
        let limit = self.blow_up_limit();
        if next.iter().any(|v| !v.is_finite() || v.abs() > limit) {
            return Err(Error::BlowUp {
                step: self.step_index + 1,
            });
        }
        self.history.pop_front();
        self.history.push_back(next);
        self.step_index += 1;
        Ok(())
    }

    /// Advances one step. On blow-up the state is left unchanged.
    pub fn step(&mut self, ops: &ConvolutionOperators) -> Result<()> {
        let next = self.propose(ops)?;
        self.accept(next)
    }

    /// Runs `steps` steps, calling `observe` after each one.
    pub fn run<F>(&mut self, ops: &ConvolutionOperators, steps: u64, mut observe: F) -> Result<()>
    where
        F: FnMut(&SimState),
    {
        for _ in 0..steps {
            self.step(ops)?;
            observe(self);
        }
        Ok(())
    }
}

/// The pointwise integrands `(I₁, I₂)` for the next step.
pub fn integrands(state: &SimState) -> (Vec<f64>, Vec<f64>) {
    let o = state.scheme.order();
    let alpha = state.scheme.alpha_f64();
    let beta = state.scheme.beta_f64();
    let delta = state.params.delta;
    let slope = state.params.big_r();
    let dim = state.dim();
    let mut i1 = vec![0.0; dim];
    let mut i2 = vec![0.0; dim];
    for s in 1..=o {
        let v = &state.history[o - s];
        let c1 = alpha[s - 1] + beta[s - 1] * delta * slope;
        let c2 = delta * beta[s - 1];
        for (((a, b), &vv), &p) in i1.iter_mut().zip(i2.iter_mut()).zip(v).zip(&state.profile) {
            *a += c1 * vv;
            *b += c2 * (0.5 * vv * vv + p * vv);
        }
    }
    (i1, i2)
}

/// Common setup for the seeding strategies.
#[derive(Debug, Clone)]
pub struct SeedSetup {
    pub nu: f64,
    pub h: f64,
    pub l: f64,
    pub r: f64,
    pub n: usize,
    pub order: usize,
    pub policy: SubgridPolicy,
    pub workers: usize,
    /// Permits strategies that build extra operator sets.
    pub allow_expensive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedMethod {
    /// Order-1 steps of size `h / substeps` from `initial` fill the history.
    SmallStepOrder1 { initial: Vec<f64>, substeps: usize },
    /// Each history point is a polynomial extrapolation of order-1 results
    /// with `1, 2, ..., o` substeps.
    Richardson { initial: Vec<f64> },
    /// Samples of the travelling-wave solution at `t = 0, -h, ...`.
    ExactSoliton { c: f64, x0: f64 },
    /// Linear eigenmodes with the given amplitudes on the oldest history
    /// level, propagated forwards under the linearised flow. Mode `j ≥ 1` has wavenumber
    /// `jπ/2`; odd `j` is `cos(jπx/2)`, even `j` is `sin(jπx/2)`.
    EigenmodeGrowth { amplitudes: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Seeded {
    pub state: SimState,
    pub warnings: Vec<String>,
}

/// Largest boundary variation of the soliton seed above which a warning is
/// attached.
pub const SOLITON_BOUNDARY_WARN: f64 = 1e-20;

pub fn seed(method: &SeedMethod, setup: &SeedSetup) -> Result<Seeded> {
    let scheme = sbdf_scheme(setup.order)?;
    let grid = ChebyshevGrid::canonical(setup.n)?;
    let o = scheme.order();
    let mut warnings = Vec::new();
    let state = match method {
        SeedMethod::ExactSoliton { c, x0 } => {
            let sol = Soliton::new(setup.nu, *c, *x0)?;
            let (l, r) = sol.limits();
            let mut history = Vec::with_capacity(o);
            for back in (0..o).rev() {
                let t = -(back as f64) * setup.h;
                let variation = sol.boundary_variation(t);
                if variation > SOLITON_BOUNDARY_WARN {
                    warnings.push(format!(
                        "soliton departs from its limits by {variation:e} at x = ±1, t = {t:e}"
                    ));
                }
                let params = ProblemParams { nu: setup.nu, delta: 1.0, l, r };
                history.push(deviation(&grid, |x| sol.value(x, t), &params));
            }
            SimState::new(scheme, setup.nu, setup.h, l, r, history, 0)?
        }
        SeedMethod::EigenmodeGrowth { amplitudes } => {
            let slope = (setup.r - setup.l) / 2.0;
            let mut history = Vec::with_capacity(o);
            for level in 0..o {
                let t = level as f64 * setup.h;
                let mut v: Vec<f64> = grid
                    .nodes()
                    .iter()
                    .map(|&x| eigenmode_field(amplitudes, setup.nu, slope, x, t))
                    .collect();
                v[0] = 0.0;
                v[setup.n] = 0.0;
                history.push(v);
            }
            SimState::new(scheme, setup.nu, setup.h, setup.l, setup.r, history, o as u64 - 1)?
        }
        SeedMethod::SmallStepOrder1 { initial, substeps } => {
            seed_small_steps(setup, &scheme, &grid, initial, (*substeps).max(1))?
        }
        SeedMethod::Richardson { initial } => {
            if !setup.allow_expensive {
                return Err(Error::invalid(
                    "Richardson seeding builds one operator set per substep count; \
                     enable it explicitly",
                ));
            }
            seed_richardson(setup, &scheme, initial)?
        }
    };
    Ok(Seeded { state, warnings })
}

fn deviation(grid: &ChebyshevGrid, u: impl Fn(f64) -> f64, params: &ProblemParams) -> Vec<f64> {
    let n = grid.order();
    let mut v: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| u(x) - params.phi_profile(x))
        .collect();
    v[0] = 0.0;
    v[n] = 0.0;
    v
}

/// Wavenumber of eigenmode `j` (1-based).
pub fn mode_wavenumber(j: usize) -> f64 {
    j as f64 * std::f64::consts::FRAC_PI_2
}

/// Eigenmode `j` evaluated at `x`.
pub fn mode_shape(j: usize, x: f64) -> f64 {
    let k = mode_wavenumber(j);
    if j % 2 == 1 {
        (k * x).cos()
    } else {
        (k * x).sin()
    }
}

/// Linear growth rate `κ² - νκ⁴ - R` of a mode with wavenumber `κ`.
pub fn growth_rate(nu: f64, slope: f64, wavenumber: f64) -> f64 {
    let k2 = wavenumber * wavenumber;
    k2 - nu * k2 * k2 - slope
}

fn eigenmode_field(amplitudes: &[f64], nu: f64, slope: f64, x: f64, t: f64) -> f64 {
    amplitudes
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(idx, &a)| {
            let j = idx + 1;
            a * (growth_rate(nu, slope, mode_wavenumber(j)) * t).exp() * mode_shape(j, x)
        })
        .sum()
}

/// Uniform amplitudes in `[-eps, eps]` for the first `count` modes.
pub fn random_amplitudes(count: usize, eps: f64, rng_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..count).map(|_| rng.gen_range(-eps..=eps)).collect()
}

/// The default perturbation: `ε = 10⁻⁴/√ν` on the first `⌈2/√ν⌉` modes.
pub fn default_random_seed(nu: f64, rng_seed: u64) -> Vec<f64> {
    let count = (2.0 / nu.sqrt()).ceil() as usize;
    random_amplitudes(count, 1e-4 / nu.sqrt(), rng_seed)
}

fn check_initial(initial: &[f64], n: usize) -> Result<Vec<f64>> {
    if initial.len() != n + 1 {
        return Err(Error::invalid(format!(
            "initial vector has {} values, grid has {}",
            initial.len(),
            n + 1
        )));
    }
    let mut v = initial.to_vec();
    v[0] = 0.0;
    v[n] = 0.0;
    Ok(v)
}

fn seed_small_steps(
    setup: &SeedSetup,
    scheme: &SbdfScheme,
    grid: &ChebyshevGrid,
    initial: &[f64],
    substeps: usize,
) -> Result<SimState> {
    let n = grid.order();
    let v0 = check_initial(initial, n)?;
    let o = scheme.order();
    if o == 1 {
        return SimState::new(scheme.clone(), setup.nu, setup.h, setup.l, setup.r, vec![v0], 0);
    }
    let first = sbdf_scheme(1)?;
    let small_h = setup.h / substeps as f64;
    let params = step_params(&first, setup.nu, small_h, setup.l, setup.r)?;
    let aux = green_aux(&params)?;
    let spacing = setup.policy.max_endpoint_spacing(n);
    if 1.0 / aux.b < spacing {
        return Err(Error::SeedingUnstable(format!(
            "kernel width 1/b = {:e} is below the sub-grid end spacing {spacing:e}; \
             use fewer substeps",
            1.0 / aux.b
        )));
    }
    let ops = OperatorBuilder::new(params, n, setup.policy)?.build(setup.workers)?;
    let mut fine = SimState::new(first, setup.nu, small_h, setup.l, setup.r, vec![v0.clone()], 0)?;
    let mut history = vec![v0];
    for _ in 1..o {
        for _ in 0..substeps {
            fine.step(&ops)?;
        }
        history.push(fine.current().to_vec());
    }
    SimState::new(
        scheme.clone(),
        setup.nu,
        setup.h,
        setup.l,
        setup.r,
        history,
        (o - 1) as u64,
    )
}

/// Weights of polynomial extrapolation to `η = 0` through `η_m = 1/m`,
/// `m = 1..=levels`.
pub fn richardson_weights(levels: usize) -> Vec<f64> {
    (1..=levels)
        .map(|m| {
            let eta_m = 1.0 / m as f64;
            (1..=levels)
                .filter(|&j| j != m)
                .map(|j| {
                    let eta_j = 1.0 / j as f64;
                    (0.0 - eta_j) / (eta_m - eta_j)
                })
                .product()
        })
        .collect()
}

fn seed_richardson(setup: &SeedSetup, scheme: &SbdfScheme, initial: &[f64]) -> Result<SimState> {
    let n = setup.n;
    let v0 = check_initial(initial, n)?;
    let o = scheme.order();
    let levels = o;
    let weights = richardson_weights(levels);
    let first = sbdf_scheme(1)?;
    let mut cache: HashMap<usize, ConvolutionOperators> = HashMap::new();
    let mut history = vec![v0];
    for _ in 1..o {
        let start = history.last().expect("non-empty").clone();
        let mut combined = vec![0.0; n + 1];
        for (m, w) in (1..=levels).zip(&weights) {
            let sub_h = setup.h / m as f64;
            let ops = match cache.get(&m) {
                Some(ops) => ops,
                None => {
                    let params = step_params(&first, setup.nu, sub_h, setup.l, setup.r)?;
                    let ops = OperatorBuilder::new(params, n, setup.policy)?.build(setup.workers)?;
                    cache.entry(m).or_insert(ops)
                }
            };
            let mut fine =
                SimState::new(first.clone(), setup.nu, sub_h, setup.l, setup.r, vec![start.clone()], 0)?;
            for _ in 0..m {
                fine.step(ops)?;
            }
            for (c, v) in combined.iter_mut().zip(fine.current()) {
                *c += w * v;
            }
        }
        combined[0] = 0.0;
        combined[n] = 0.0;
        history.push(combined);
    }
    SimState::new(
        scheme.clone(),
        setup.nu,
        setup.h,
        setup.l,
        setup.r,
        history,
        (o - 1) as u64,
    )
}
