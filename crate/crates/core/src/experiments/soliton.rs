//! The travelling-wave solution
//! `w = c + A (11 T³ - 9 T)`, `T = tanh(q (x - c t - x₀) / √ν)`,
//! `A = (15/19) √(11 / (19 ν))`, `q = √(11/76)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Soliton {
    pub nu: f64,
    pub c: f64,
    pub x0: f64,
}

/// Inverse width factor of the soliton.
pub fn soliton_q() -> f64 {
    (11.0f64 / 76.0).sqrt()
}

impl Soliton {
    pub fn new(nu: f64, c: f64, x0: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::invalid(format!("viscosity must be positive, got {nu}")));
        }
        if !c.is_finite() || !x0.is_finite() {
            return Err(Error::invalid("soliton speed and position must be finite"));
        }
        Ok(Soliton { nu, c, x0 })
    }

    pub fn amplitude(&self) -> f64 {
        15.0 / 19.0 * (11.0 / (19.0 * self.nu)).sqrt()
    }

    fn argument(&self, x: f64, t: f64) -> f64 {
        soliton_q() * (x - self.c * t - self.x0) / self.nu.sqrt()
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        let th = self.argument(x, t).tanh();
        self.c + self.amplitude() * (11.0 * th * th * th - 9.0 * th)
    }

    /// Limits as `x → -∞` and `x → +∞`.
    pub fn limits(&self) -> (f64, f64) {
        let jump = 2.0 * self.amplitude();
        (self.c - jump, self.c + jump)
    }

    /// Departure from the limit at one end, computed without cancellation
    /// when the soliton lies well inside the domain.
    fn end_departure(&self, x: f64, t: f64, sign: f64) -> f64 {
        let z = self.argument(x, t);
        let amp = self.amplitude();
        if z * sign > 0.0 {
            let tau = 2.0 / ((2.0 * z.abs()).exp() + 1.0);
            amp * tau * (24.0 - 33.0 * tau + 11.0 * tau * tau).abs()
        } else {
            let th = z.tanh();
            amp * (11.0 * th * th * th - 9.0 * th - 2.0 * sign).abs()
        }
    }

    /// Largest of `|w(±1, t) - limit|` and `|w_xx(±1, t)|`.
    pub fn boundary_variation(&self, t: f64) -> f64 {
        let left = self.end_departure(-1.0, t, -1.0);
        let right = self.end_departure(1.0, t, 1.0);
        let curvature = self.curvature(-1.0, t).abs().max(self.curvature(1.0, t).abs());
        left.max(right).max(curvature)
    }

    /// `w_xx`, written in terms of `1 - T²` so that it decays cleanly.
    pub fn curvature(&self, x: f64, t: f64) -> f64 {
        let z = self.argument(x, t);
        let th = z.tanh();
        let sech2 = if z.abs() > 1.0 {
            let e = (-2.0 * z.abs()).exp();
            4.0 * e / ((1.0 + e) * (1.0 + e))
        } else {
            1.0 - th * th
        };
        // d/dz (11T³ - 9T) = (33T² - 9) sech², d²/dz² = sech² (66T sech² - 2T(33T² - 9))
        let second = sech2 * (66.0 * th * sech2 - 2.0 * th * (33.0 * th * th - 9.0));
        let k = soliton_q() / self.nu.sqrt();
        self.amplitude() * k * k * second
    }
}
