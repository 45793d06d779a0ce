//! Resampling of Chebyshev-grid frames onto an even grid in the scaled
//! coordinate `x̄ = (x+1)/√ν`, with `ū = √ν u`.

use crate::cheb::ChebyshevGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFrame {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourExport {
    pub nu: f64,
    /// Even grid in `x̄` covering `[0, 2/√ν]`.
    pub xbar: Vec<f64>,
    pub frames: Vec<ScaledFrame>,
}

/// Even `x̄` grid with `points` nodes over the whole domain.
pub fn scaled_grid(nu: f64, points: usize) -> Vec<f64> {
    let length = 2.0 / nu.sqrt();
    let last = (points - 1) as f64;
    (0..points).map(|j| length * j as f64 / last).collect()
}

/// Exports every `stride`-th frame with `t` in `t_window` on `points`
/// evenly spaced `x̄` nodes.
pub fn contour_export<'a, I>(
    frames: I,
    grid: &ChebyshevGrid,
    nu: f64,
    t_window: (f64, f64),
    stride: usize,
    points: usize,
) -> Result<ContourExport>
where
    I: IntoIterator<Item = (f64, &'a [f64])>,
{
    if stride == 0 || points < 2 {
        return Err(Error::invalid("stride must be positive and at least two points are needed"));
    }
    let sqrt_nu = nu.sqrt();
    let xbar = scaled_grid(nu, points);
    let targets: Vec<f64> = xbar
        .iter()
        .map(|&xb| (xb * sqrt_nu - 1.0).clamp(-1.0, 1.0))
        .collect();
    let interp = crate::cheb::interpolation_matrix(grid, &targets, crate::cheb::DEFAULT_SNAP_TOL)?;
    let mut out = Vec::new();
    let mut seen = 0usize;
    for (t, u) in frames {
        if t < t_window.0 || t > t_window.1 {
            continue;
        }
        if seen % stride == 0 {
            let values = interp.apply(u).into_iter().map(|v| sqrt_nu * v).collect();
            out.push(ScaledFrame { t, values });
        }
        seen += 1;
    }
    Ok(ContourExport { nu, xbar, frames: out })
}

/// Local Lagrange interpolation of evenly spaced samples at `x`, using
/// `width` points centred on `x`.
pub fn interpolate_even(xs: &[f64], values: &[f64], x: f64, width: usize) -> f64 {
    let n = xs.len();
    let dx = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let pos = (x - xs[0]) / dx;
    let width = width.min(n);
    let start = (pos.floor() as isize - (width as isize / 2 - 1)).clamp(0, (n - width) as isize) as usize;
    let mut acc = 0.0;
    for j in start..start + width {
        let mut basis = 1.0;
        for m in start..start + width {
            if m != j {
                basis *= (x - xs[m]) / (xs[j] - xs[m]);
            }
        }
        acc += basis * values[j];
    }
    acc
}
