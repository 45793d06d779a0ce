//! Chebyshev grids of the second kind, barycentric interpolation and
//! Clenshaw-Curtis quadrature.
//!
//! Nodes are always stored in descending order, `nodes[0] = hi` and
//! `nodes[n] = lo`, matching `cos(jπ/n)` on the canonical interval.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Coincidence threshold below which a target point is treated as equal to a
/// source node and its interpolation row collapses to a unit row.
pub const DEFAULT_SNAP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevGrid {
    order: usize,
    nodes: Vec<f64>,
    bary_weights: Vec<f64>,
    interval: (f64, f64),
}

impl ChebyshevGrid {
    /// Grid of order `n` (n+1 points) on `[lo, hi]`.
    pub fn new(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Chebyshev grid order must be at least 1"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("degenerate interval [{lo}, {hi}]")));
        }
        let canonical = canonical_nodes(n);
        let nodes = if lo == -1.0 && hi == 1.0 {
            canonical
        } else {
            let half = 0.5 * (hi - lo);
            let mut nodes: Vec<f64> = canonical.iter().map(|&t| lo + half * (t + 1.0)).collect();
            nodes[0] = hi;
            nodes[n] = lo;
            nodes
        };
        Ok(ChebyshevGrid {
            order: n,
            nodes,
            bary_weights: bary_weights(n),
            interval: (lo, hi),
        })
    }

    pub fn canonical(n: usize) -> Result<Self> {
        Self::new(n, -1.0, 1.0)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn bary_weights(&self) -> &[f64] {
        &self.bary_weights
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    /// Index of a node within `tol` of `y`, if any. Uses the inverse cosine
    /// map to locate the neighbourhood in O(1).
    pub fn coincident_node(&self, y: f64, tol: f64) -> Option<usize> {
        let (lo, hi) = self.interval;
        let t = ((2.0 * y - lo - hi) / (hi - lo)).clamp(-1.0, 1.0);
        let guess = (self.order as f64 * t.acos() / PI).round() as isize;
        let first = (guess - 1).max(0) as usize;
        let last = ((guess + 1) as usize).min(self.order);
        (first..=last)
            .filter(|&j| (self.nodes[j] - y).abs() <= tol)
            .min_by(|&i, &j| {
                let di = (self.nodes[i] - y).abs();
                let dj = (self.nodes[j] - y).abs();
                di.total_cmp(&dj)
            })
    }

    /// Writes the unnormalised barycentric terms `w_j / (y - x_j)` into
    /// `buf` and reports how the interpolation row at `y` is formed.
    pub(crate) fn barycentric_terms(&self, y: f64, snap_tol: f64, buf: &mut [f64]) -> BaryRow {
        debug_assert_eq!(buf.len(), self.len());
        if let Some(q) = self.coincident_node(y, snap_tol) {
            return BaryRow::Unit(q);
        }
        let mut denom = 0.0;
        for ((t, &x), &w) in buf.iter_mut().zip(&self.nodes).zip(&self.bary_weights) {
            *t = w / (y - x);
            denom += *t;
        }
        BaryRow::Scaled(1.0 / denom)
    }

    /// Evaluates the polynomial interpolant of `values` (sampled on this grid)
    /// at `y`.
    pub fn interpolate(&self, values: &[f64], y: f64) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                self.len(),
                values.len()
            )));
        }
        self.check_inside(y)?;
        if let Some(q) = self.coincident_node(y, 0.0) {
            return Ok(values[q]);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&x, &w), &f) in self.nodes.iter().zip(&self.bary_weights).zip(values) {
            let t = w / (y - x);
            num += t * f;
            den += t;
        }
        Ok(num / den)
    }

    fn check_inside(&self, y: f64) -> Result<()> {
        let (lo, hi) = self.interval;
        if y < lo || y > hi || y.is_nan() {
            return Err(Error::OutOfRange { x: y, lo, hi });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BaryRow {
    Unit(usize),
    /// Multiply the buffered terms by this factor to get the row.
    Scaled(f64),
}

/// `cos(jπ/n)` for `j = 0..=n`, exactly antisymmetric about the midpoint.
fn canonical_nodes(n: usize) -> Vec<f64> {
    let mut nodes = vec![0.0; n + 1];
    for j in 0..=n / 2 {
        // sin(π(n-2j)/(2n)) is cos(jπ/n) without the loss near the centre
        let x = (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin();
        nodes[j] = x;
        nodes[n - j] = -x;
    }
    if n % 2 == 0 {
        nodes[n / 2] = 0.0;
    }
    nodes
}

fn bary_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|q| {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            if q == 0 || q == n {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect()
}

/// Dense interpolation matrix from a source grid onto target points.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl InterpolationMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.entries[p * self.cols..(p + 1) * self.cols]
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.entries[p * self.cols + q]
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.cols);
        (0..self.rows)
            .map(|p| self.row(p).iter().zip(values).map(|(b, v)| b * v).sum())
            .collect()
    }
}

/// Barycentric interpolation matrix `B[p][q]` mapping samples on `source`
/// to values at `targets`. Targets within `snap_tol` of a source node give
/// the corresponding unit row.
pub fn interpolation_matrix(
    source: &ChebyshevGrid,
    targets: &[f64],
    snap_tol: f64,
) -> Result<InterpolationMatrix> {
    if !(snap_tol >= 0.0) {
        return Err(Error::invalid("snap tolerance must be non-negative"));
    }
    let cols = source.len();
    let mut entries = vec![0.0; targets.len() * cols];
    for (row, &y) in entries.chunks_exact_mut(cols).zip(targets) {
        source.check_inside(y)?;
        match source.barycentric_terms(y, snap_tol, row) {
            BaryRow::Unit(q) => {
                row.fill(0.0);
                row[q] = 1.0;
            }
            BaryRow::Scaled(s) => row.iter_mut().for_each(|b| *b *= s),
        }
    }
    Ok(InterpolationMatrix {
        rows: targets.len(),
        cols,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRow {
    weights: Vec<f64>,
    interval_length: f64,
}

impl QuadratureRow {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval_length(&self) -> f64 {
        self.interval_length
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Pairs the weights with samples taken on the matching mapped grid.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        assert_eq!(samples.len(), self.weights.len());
        self.weights.iter().zip(samples).map(|(w, f)| w * f).sum()
    }
}

/// Clenshaw-Curtis weights for `m+1` Chebyshev points on an interval of the
/// given length.
pub fn clenshaw_curtis_row(m: usize, interval_length: f64) -> Result<QuadratureRow> {
    if m == 0 {
        return Err(Error::invalid("Clenshaw-Curtis order must be at least 1"));
    }
    if !(interval_length > 0.0) || !interval_length.is_finite() {
        return Err(Error::invalid("interval length must be positive"));
    }
    let weights = clenshaw_curtis_unit(m)
        .into_iter()
        .map(|w| interval_length * w)
        .collect();
    Ok(QuadratureRow {
        weights,
        interval_length,
    })
}

/// Weights for an interval of unit length:
/// `a_p Σ_k c_k cos(kpπ/m) / m` with the trapezoidal halving `a_p`
/// at both ends and `c_k` the integrals of `T_k` over `[-1, 1]` halved.
pub(crate) fn clenshaw_curtis_unit(m: usize) -> Vec<f64> {
    assert!(m >= 1);
    let two_m = 2 * m;
    // cos(jπ/m) for j in 0..2m; kp is reduced mod 2m before lookup
    let cos_table: Vec<f64> = (0..two_m)
        .map(|j| (PI * j as f64 / m as f64).cos())
        .collect();
    let coef: Vec<(usize, f64)> = (0..=m)
        .step_by(2)
        .map(|k| {
            let kf = k as f64;
            let c = if k == 0 { 1.0 } else { 2.0 / (1.0 - kf * kf) };
            // the last Chebyshev coefficient carries half weight
            let c = if k == m { 0.5 * c } else { c };
            (k, c)
        })
        .collect();
    let mf = m as f64;
    let mut weights = vec![0.0; m + 1];
    for p in 0..=m / 2 {
        let mut acc = 0.0;
        for &(k, c) in &coef {
            acc += c * cos_table[(k * p) % two_m];
        }
        let a = if p == 0 || p == m { 0.5 } else { 1.0 };
        let w = a * acc / mf;
        weights[p] = w;
        weights[m - p] = w;
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn small_canonical_grids() {
        let g = ChebyshevGrid::canonical(2).unwrap();
        assert_eq!(g.nodes(), &[1.0, 0.0, -1.0]);
        let g = ChebyshevGrid::canonical(4).unwrap();
        let h = 0.5f64.sqrt();
        for (x, e) in g.nodes().iter().zip([1.0, h, 0.0, -h, -1.0]) {
            assert_close(*x, e, 4e-16);
        }
    }

    #[test]
    fn mapped_left_subgrid() {
        let g = ChebyshevGrid::new(2, -1.0, 0.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, -0.5, -1.0]);
    }

    #[test]
    fn node_symmetry_is_exact() {
        for n in [1, 2, 7, 64, 1001] {
            let g = ChebyshevGrid::canonical(n).unwrap();
            for i in 0..=n {
                assert_eq!(g.nodes()[i], -g.nodes()[n - i]);
                assert_close(g.nodes()[i], (i as f64 * PI / n as f64).cos(), 4e-16);
            }
        }
    }

    #[test]
    fn weight_pattern() {
        let g = ChebyshevGrid::canonical(5).unwrap();
        assert_eq!(g.bary_weights(), &[0.5, -1.0, 1.0, -1.0, 1.0, -0.5]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            ChebyshevGrid::canonical(0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(ChebyshevGrid::new(4, 1.0, 1.0).is_err());
        assert!(clenshaw_curtis_row(0, 1.0).is_err());
        let g = ChebyshevGrid::canonical(4).unwrap();
        assert!(matches!(
            interpolation_matrix(&g, &[1.5], DEFAULT_SNAP_TOL),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn identity_on_own_nodes() {
        let g = ChebyshevGrid::canonical(9).unwrap();
        let b = interpolation_matrix(&g, g.nodes(), DEFAULT_SNAP_TOL).unwrap();
        for p in 0..10 {
            for q in 0..10 {
                assert_eq!(b.get(p, q), if p == q { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn polynomial_onto_subgrid() {
        let p = |x: f64| x.powi(5) - 3.0 * x * x + 1.0;
        let src = ChebyshevGrid::canonical(16).unwrap();
        let sub = ChebyshevGrid::new(8, -1.0, 0.3).unwrap();
        let b = interpolation_matrix(&src, sub.nodes(), DEFAULT_SNAP_TOL).unwrap();
        let samples: Vec<f64> = src.nodes().iter().map(|&x| p(x)).collect();
        for (v, &y) in b.apply(&samples).iter().zip(sub.nodes()) {
            assert_close(*v, p(y), 1e-13);
        }
        for r in 0..b.rows() {
            assert_close(b.row(r).iter().sum::<f64>(), 1.0, 1e-12);
        }
    }

    #[test]
    fn near_coincident_target_snaps() {
        let g = ChebyshevGrid::canonical(20).unwrap();
        let y = g.nodes()[7] + 5e-14;
        let b = interpolation_matrix(&g, &[y], DEFAULT_SNAP_TOL).unwrap();
        assert_eq!(b.get(0, 7), 1.0);
        assert_eq!(b.row(0).iter().filter(|&&v| v != 0.0).count(), 1);
        // no snapping with a zero tolerance: still a valid row
        let b = interpolation_matrix(&g, &[y], 0.0).unwrap();
        assert_close(b.row(0).iter().sum::<f64>(), 1.0, 1e-12);
    }

    #[test]
    fn clenshaw_curtis_three_point_rule() {
        let q = clenshaw_curtis_row(2, 2.0).unwrap();
        for (w, e) in q.weights().iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert_close(*w, e, 1e-15);
        }
    }

    #[test]
    fn clenshaw_curtis_constants_and_quadratics() {
        for m in [1, 2, 3, 8, 33, 200] {
            let q = clenshaw_curtis_row(m, 0.7).unwrap();
            let total: f64 = q.weights().iter().sum();
            assert_close(total, 0.7, 1e-13 * m as f64);
        }
        let g = ChebyshevGrid::canonical(8).unwrap();
        let q = clenshaw_curtis_row(8, 2.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        assert_close(q.integrate(&f), 2.0 / 3.0, 1e-14);
    }

    #[test]
    fn clenshaw_curtis_exact_to_degree_m() {
        // ∫_{-1}^{1} x^d dx, for every degree up to the rule order
        for m in [4, 5, 12, 13] {
            let g = ChebyshevGrid::canonical(m).unwrap();
            let q = clenshaw_curtis_row(m, 2.0).unwrap();
            for d in 0..=m as i32 {
                let f: Vec<f64> = g.nodes().iter().map(|x| x.powi(d)).collect();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert_close(q.integrate(&f), exact, 1e-14);
            }
        }
    }

    #[test]
    fn interpolate_matches_matrix_route() {
        let g = ChebyshevGrid::new(12, -0.4, 0.9).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).sin()).collect();
        let y = 0.123;
        let b = interpolation_matrix(&g, &[y], DEFAULT_SNAP_TOL).unwrap();
        assert_close(g.interpolate(&f, y).unwrap(), b.apply(&f)[0], 1e-15);
        assert_close(g.interpolate(&f, y).unwrap(), (3.0 * y).sin(), 1e-9);
    }
}
