//! Green's function of the time-discretised linear operator
//! `L = 1 + ΔR + Δ∂xx + Δν∂xxxx` on `[-1, 1]` with `v = v_xx = 0` at both ends.
//!
//! Evaluation uses a form free of exponentially large factors. Every term
//! has the shape `e^{-bu} sin(au + ζ)` with `u ∈ [0, 4]`, where `p₊ = a + ib`
//! is the root of the factorised spectrum in the first quadrant and
//! `ζ = φ - 2a` is the reduced phase. Close to `x = 1` (within `1/b`) the
//! terms are regrouped around `sin(p₊(1-x))` so that the O(1) cancellation
//! at the boundary never happens in floating point.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Physical and discretisation parameters of one linear boundary value
/// problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub nu: f64,
    pub delta: f64,
    pub l: f64,
    pub r: f64,
}

impl ProblemParams {
    pub fn new(nu: f64, delta: f64, l: f64, r: f64) -> Result<Self> {
        let p = ProblemParams { nu, delta, l, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::invalid(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("Δ must be positive, got {}", self.delta)));
        }
        if !self.l.is_finite() || !self.r.is_finite() {
            return Err(Error::invalid("boundary values must be finite"));
        }
        if !(1.0 + self.delta * self.big_r() > 0.0) {
            return Err(Error::invalid("1 + ΔR must be positive"));
        }
        Ok(())
    }

    /// Slope of the linear profile, `(r - l) / 2`.
    pub fn big_r(&self) -> f64 {
        (self.r - self.l) / 2.0
    }

    /// The linear profile `l + R(x+1)` that carries the boundary values.
    pub fn phi_profile(&self, x: f64) -> f64 {
        self.l + self.big_r() * (x + 1.0)
    }

    /// `S = Δ / (4ν(1 + ΔR))`; the closed form needs `0 < S < 1`.
    pub fn s_param(&self) -> f64 {
        self.delta / (4.0 * self.nu * (1.0 + self.delta * self.big_r()))
    }
}

/// Which one-sided limit to take for `∂G/∂y` on the diagonal `y = x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `y → x` from below (left sub-interval).
    Below,
    /// `y → x` from above (right sub-interval).
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenAux {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// The phase φ = Arg(1/(p₊ sin 2p₊)).
    pub phase_phi: f64,
    /// Amplitude of every term.
    pub q: f64,
    pub p_plus_sq: Complex64,
    pub p_minus_sq: Complex64,
    /// φ - 2a, computed without forming 2a.
    zeta: f64,
}

pub fn green_aux(params: &ProblemParams) -> Result<GreenAux> {
    params.validate()?;
    let ProblemParams { nu, delta, .. } = *params;
    let eps = 1.0 + delta * params.big_r();
    let s = params.s_param();
    if !(s < 1.0) {
        return Err(Error::RealRoots { s });
    }
    let sqrt_s = s.sqrt();
    let scale = s.powf(-0.25) / (2.0 * nu.sqrt());
    let a = scale * (1.0 + sqrt_s).sqrt();
    let b = scale * (1.0 - sqrt_s).sqrt();
    let theta = ((1.0 - sqrt_s) / (1.0 + sqrt_s)).sqrt().atan();

    // arctan(sin 4a / (e^{4b} - cos 4a)) written with e^{-4b} to avoid overflow
    let e4 = (-4.0 * b).exp();
    let correction = (e4 * (4.0 * a).sin()).atan2(1.0 - e4 * (4.0 * a).cos());
    let zeta = -theta - FRAC_PI_2 + correction;
    let phase_phi = 2.0 * a + zeta;

    let modulus = (1.0 - 2.0 * e4 * (4.0 * a).cos() + e4 * e4).sqrt();
    let q = nu.sqrt() / delta * (2.0 * s * sqrt_s / (1.0 - s)).sqrt() / modulus;

    let re = 1.0 / (2.0 * nu);
    let im = (4.0 * delta * nu * eps - delta * delta).sqrt() / (2.0 * delta * nu);
    Ok(GreenAux {
        s,
        a,
        b,
        theta,
        phase_phi,
        q,
        p_plus_sq: Complex64::new(re, im),
        p_minus_sq: Complex64::new(re, -im),
        zeta,
    })
}

#[derive(Debug, Clone, Copy)]
struct Kernel {
    g: f64,
    gx: f64,
    gy: f64,
    max_term: f64,
}

impl GreenAux {
    /// `G(x, y)` for `x, y ∈ [-1, 1]`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_with_deriv(x, y, Side::Below).0
    }

    /// `∂G/∂y (x, y)`, taking the limit from `y < x` on the diagonal.
    pub fn deriv_y(&self, x: f64, y: f64) -> f64 {
        self.eval_with_deriv(x, y, Side::Below).1
    }

    pub fn deriv_y_side(&self, x: f64, y: f64, side: Side) -> f64 {
        self.eval_with_deriv(x, y, side).1
    }

    /// `(G, ∂G/∂y)` at one point.
    pub fn eval_with_deriv(&self, x: f64, y: f64, side: Side) -> (f64, f64) {
        let below = y < x || (y == x && side == Side::Below);
        if below {
            let k = self.ordered(x, y);
            (k.g, k.gy)
        } else {
            // G(x, y) = G(y, x), so ∂_y G(x, y) = ∂_1 G(y, x)
            let k = self.ordered(y, x);
            (k.g, k.gx)
        }
    }

    /// Largest magnitude of any summand formed while evaluating `G(x, y)`.
    pub fn max_term(&self, x: f64, y: f64) -> f64 {
        if y <= x {
            self.ordered(x, y).max_term
        } else {
            self.ordered(y, x).max_term
        }
    }

    /// Kernel for `hi ≥ lo`, reduced by `G(x, y) = G(-y, -x)` to the wedge
    /// `hi ≥ |lo|`.
    fn ordered(&self, hi: f64, lo: f64) -> Kernel {
        debug_assert!(hi >= lo);
        if hi + lo < 0.0 {
            let k = self.wedge(-lo, -hi);
            Kernel {
                g: k.g,
                gx: -k.gy,
                gy: -k.gx,
                max_term: k.max_term,
            }
        } else {
            self.wedge(hi, lo)
        }
    }

    fn wedge(&self, x: f64, y: f64) -> Kernel {
        if (1.0 - x) * self.b < 1.0 {
            self.near_right_boundary(x, y)
        } else {
            self.interior(x, y)
        }
    }

    /// `e^{-bu} (sin(au+ζ), cos(au+ζ))`.
    #[inline]
    fn damped(&self, u: f64) -> (f64, f64) {
        let e = (-self.b * u).exp();
        let (s, c) = (self.a * u + self.zeta).sin_cos();
        (e * s, e * c)
    }

    /// d/du of `e^{-bu} sin(au+ζ)` from the pair returned by [`damped`].
    #[inline]
    fn damped_sin_slope(&self, (es, ec): (f64, f64)) -> f64 {
        self.a * ec - self.b * es
    }

    /// d/du of `e^{-bu} cos(au+ζ)`.
    #[inline]
    fn damped_cos_slope(&self, (es, ec): (f64, f64)) -> f64 {
        -self.b * ec - self.a * es
    }

    /// `G = Q [E(2-s) + E(2+s) - E(d) - E(4-d)]` with `d = x - y`, `s = x + y`.
    fn interior(&self, x: f64, y: f64) -> Kernel {
        let d = x - y;
        let s = x + y;
        let t1 = self.damped(2.0 - s);
        let t2 = self.damped(2.0 + s);
        let t3 = self.damped(d);
        let t4 = self.damped(4.0 - d);
        let g = self.q * (t1.0 + t2.0 - t3.0 - t4.0);
        let (s1, s2, s3, s4) = (
            self.damped_sin_slope(t1),
            self.damped_sin_slope(t2),
            self.damped_sin_slope(t3),
            self.damped_sin_slope(t4),
        );
        let gy = self.q * (-s1 + s2 + s3 - s4);
        let gx = self.q * (-s1 + s2 - s3 + s4);
        let max_term = self.q * t1.0.abs().max(t2.0.abs()).max(t3.0.abs()).max(t4.0.abs());
        Kernel { g, gx, gy, max_term }
    }

    /// Same function regrouped around `ξ = 1 - x`:
    /// `G = 2Q [sin(aξ)cosh(bξ) (C(u₁) - C(u₂)) - cos(aξ)sinh(bξ) (E(u₁) - E(u₂))]`
    /// with `u₁ = 1 - y`, `u₂ = 3 + y`. Only used for `bξ < 1`.
    fn near_right_boundary(&self, x: f64, y: f64) -> Kernel {
        let xi = 1.0 - x;
        let (sa, ca) = (self.a * xi).sin_cos();
        let (sh, ch) = ((self.b * xi).sinh(), (self.b * xi).cosh());
        let w1 = self.damped(1.0 - y);
        let w2 = self.damped(3.0 + y);

        let cos_diff = w1.1 - w2.1;
        let sin_diff = w1.0 - w2.0;
        let even = sa * ch;
        let odd = ca * sh;
        let two_q = 2.0 * self.q;
        let g = two_q * (even * cos_diff - odd * sin_diff);

        // ∂/∂y: u₁' = -1, u₂' = +1
        let dcos = -self.damped_cos_slope(w1) - self.damped_cos_slope(w2);
        let dsin = -self.damped_sin_slope(w1) - self.damped_sin_slope(w2);
        let gy = two_q * (even * dcos - odd * dsin);

        // ∂/∂x = -∂/∂ξ
        let deven = self.a * ca * ch + self.b * sa * sh;
        let dodd = -self.a * sa * sh + self.b * ca * ch;
        let gx = -two_q * (deven * cos_diff - dodd * sin_diff);

        let max_term = two_q
            * (even * w1.1)
                .abs()
                .max((even * w2.1).abs())
                .max((odd * w1.0).abs())
                .max((odd * w2.0).abs());
        Kernel { g, gx, gy, max_term }
    }
}

/// Eigenvalue of `L` on `sin(kπx)` (odd) or `cos((k-½)πx)` (even).
pub fn eigenvalue(params: &ProblemParams, wavenumber: f64) -> f64 {
    let q2 = wavenumber * wavenumber;
    1.0 + params.delta * params.big_r() - params.delta * q2 + params.delta * params.nu * q2 * q2
}

/// Partial sum over `k = 1..=terms` of the eigenfunction expansion
/// `Σ sin(kπx)sin(kπy)/λᵒ_k + cos((k-½)πx)cos((k-½)πy)/λᵉ_k`.
///
/// Summation runs from the smallest terms up with compensation, so the
/// partial sum is accurate to round-off for large `terms`.
pub fn eigen_sum_oracle(params: &ProblemParams, x: f64, y: f64, terms: usize) -> Result<f64> {
    if terms == 0 {
        return Err(Error::invalid("at least one eigenmode is required"));
    }
    let mut sum = NeumaierSum::default();
    for k in (1..=terms).rev() {
        let kf = k as f64;
        let odd_wn = PI * kf;
        let even_wn = PI * (kf - 0.5);
        let lo = eigenvalue(params, odd_wn);
        let le = eigenvalue(params, even_wn);
        if lo == 0.0 || le == 0.0 {
            return Err(Error::DegenerateSpectrum { index: k });
        }
        sum.add((odd_wn * x).sin() * (odd_wn * y).sin() / lo);
        sum.add((even_wn * x).cos() * (even_wn * y).cos() / le);
    }
    Ok(sum.total())
}

/// Upper bound on the tail of [`eigen_sum_oracle`] beyond `terms`:
/// `2 / (3Δνπ⁴(K-½)³(1-c))` with `c = 1/(νπ²(K-½)²)`, infinite while `c ≥ 1`.
pub fn eigen_sum_tail_bound(params: &ProblemParams, terms: usize) -> f64 {
    let k = terms as f64 - 0.5;
    let c = 1.0 / (params.nu * PI * PI * k * k);
    if c >= 1.0 {
        return f64::INFINITY;
    }
    2.0 / (3.0 * params.delta * params.nu * PI.powi(4) * k.powi(3) * (1.0 - c))
}

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
