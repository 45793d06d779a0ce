//! The analytic test function
//! `ξ(x) = 1/(1 + sin²(πkx)) - cos(2πkx)/2 - 1/2` and the quadrature-error
//! measurement `‖ξ - M Lξ‖_∞`.

use std::f64::consts::PI;

use crate::builder::{ConvolutionOperators, OperatorBuilder, SubgridPolicy};
use crate::cheb::ChebyshevGrid;
use crate::error::{Error, Result};
use crate::greens::ProblemParams;

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSample {
    pub k: u32,
    pub values: Vec<f64>,
    pub d2: Vec<f64>,
    pub d4: Vec<f64>,
}

/// `(ξ, ξ'', ξ'''')` at `x`.
pub fn test_function(k: u32, x: f64) -> (f64, f64, f64) {
    let omega = 2.0 * PI * k as f64;
    let phi = omega * x;
    let (s, c) = phi.sin_cos();
    // f = 2/g with g = 3 - cos φ; derivatives in φ
    let g = 3.0 - c;
    let g1 = s;
    let g2 = c;
    let g3 = -s;
    let g4 = -c;
    let inv = 1.0 / g;
    let inv2 = inv * inv;
    let inv3 = inv2 * inv;
    let inv4 = inv3 * inv;
    let inv5 = inv4 * inv;
    let f = 2.0 * inv;
    let f2 = -2.0 * g2 * inv2 + 4.0 * g1 * g1 * inv3;
    let f4 = -2.0 * g4 * inv2 + (16.0 * g1 * g3 + 12.0 * g2 * g2) * inv3
        - 72.0 * g1 * g1 * g2 * inv4
        + 48.0 * g1 * g1 * g1 * g1 * inv5;
    let w2 = omega * omega;
    let value = f - 0.5 * c - 0.5;
    let d2 = w2 * (f2 + 0.5 * c);
    let d4 = w2 * w2 * (f4 - 0.5 * c);
    (value, d2, d4)
}

pub fn sample_test_function(k: u32, grid: &ChebyshevGrid) -> TestFunctionSample {
    let n = grid.len();
    let mut sample = TestFunctionSample {
        k,
        values: Vec::with_capacity(n),
        d2: Vec::with_capacity(n),
        d4: Vec::with_capacity(n),
    };
    for &x in grid.nodes() {
        let (v, d2, d4) = test_function(k, x);
        sample.values.push(v);
        sample.d2.push(d2);
        sample.d4.push(d4);
    }
    sample
}

/// `Lξ = (1 + ΔR) ξ + Δ ξ'' + Δν ξ''''` pointwise.
pub fn apply_linear_operator(params: &ProblemParams, sample: &TestFunctionSample) -> Vec<f64> {
    let c0 = 1.0 + params.delta * params.big_r();
    let c2 = params.delta;
    let c4 = params.delta * params.nu;
    sample
        .values
        .iter()
        .zip(&sample.d2)
        .zip(&sample.d4)
        .map(|((v, d2), d4)| c0 * v + c2 * d2 + c4 * d4)
        .collect()
}

/// `‖ξ - M Lξ‖_∞` for prebuilt operators.
pub fn quadrature_error(ops: &ConvolutionOperators, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("the test function needs k >= 1"));
    }
    let grid = ChebyshevGrid::canonical(ops.order())?;
    let sample = sample_test_function(k, &grid);
    let omega = apply_linear_operator(ops.params(), &sample);
    let recovered = ops.apply_m(&omega);
    Ok(sample
        .values
        .iter()
        .zip(&recovered)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

pub fn quadrature_error_test(
    params: &ProblemParams,
    n: usize,
    k: u32,
    policy: SubgridPolicy,
    workers: usize,
) -> Result<f64> {
    let ops = OperatorBuilder::new(*params, n, policy)?.build(workers)?;
    quadrature_error(&ops, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_at_ends_and_centre() {
        for k in 1..8 {
            for &x in &[-1.0, 0.0, 1.0] {
                let (v, d2, _) = test_function(k, x);
                assert!(v.abs() < 1e-15, "k={k} x={x} v={v}");
                if x != 0.0 {
                    assert!(d2.abs() < 1e-10 * (k * k) as f64, "k={k} x={x} d2={d2}");
                }
            }
        }
    }

    fn fd8(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let c = [-1.0 / 560.0, 8.0 / 315.0, -1.0 / 5.0, 8.0 / 5.0];
        let mut acc = -205.0 / 72.0 * f(x);
        for (j, cj) in c.iter().enumerate() {
            let off = (4 - j) as f64 * h;
            acc += cj * (f(x + off) + f(x - off));
        }
        acc / (h * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = 2;
        let h = 2e-3;
        for &x in &[-0.71, -0.2, 0.05, 0.33, 0.9] {
            let (_, d2, d4) = test_function(k, x);
            let fd2 = fd8(|y| test_function(k, y).0, x, h);
            let fd4 = fd8(|y| test_function(k, y).1, x, h);
            let scale2 = d2.abs().max(1.0);
            let scale4 = d4.abs().max(1.0);
            assert!((fd2 - d2).abs() < 1e-7 * scale2.max(100.0), "x={x}: {fd2} vs {d2}");
            assert!((fd4 - d4).abs() < 1e-7 * scale4.max(1e4), "x={x}: {fd4} vs {d4}");
        }
    }
}
