//! Least-squares fits on log-transformed data.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Fits `y = slope·x + intercept` by ordinary least squares.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Statistics(format!(
            "{} abscissae but {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Statistics("a line fit needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 || !sxx.is_finite() || !sxy.is_finite() {
        return Err(Error::Statistics("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Slope of `ln y` against `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let (lx, ly) = logs(xs, ys, true)?;
    fit_line(&lx, &ly)
}

/// Fits `y = C exp(slope·x)`; the returned slope is the exponential rate.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let (lx, ly) = logs(xs, ys, false)?;
    fit_line(&lx, &ly)
}

fn logs(xs: &[f64], ys: &[f64], log_x: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(ys.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if !(y > 0.0) || (log_x && !(x > 0.0)) {
            return Err(Error::Statistics(format!("cannot take logarithm of ({x}, {y})")));
        }
        lx.push(if log_x { x.ln() } else { x });
        ly.push(y.ln());
    }
    Ok((lx, ly))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [1e-3, 2e-3, 4e-3, 8e-3];
        let ys: Vec<f64> = xs.iter().map(|x| 7.0 * x * x * x).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn exact_exponential() {
        let xs = [20.0f64, 40.0, 60.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-0.28 * x).exp()).collect();
        assert!((fit_exponential(&xs, &ys).unwrap().slope + 0.28).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
