//! Assembly of the dense convolution operators `M` (convolution with `G`),
//! `N` (convolution with `∂G/∂y`) and the constant vector `J`.
//!
//! Row `i` integrates separately over `[-1, x_i]` and `[x_i, 1]`, where the
//! kernel is smooth. Each side gets its own Chebyshev sub-grid: the global
//! samples are interpolated onto it barycentrically, weighted by the kernel
//! and summed with Clenshaw-Curtis weights. Folding the three factors
//! together gives the row directly, without forming the interpolation matrix.

use std::ops::Range;

use rayon::prelude::*;

use crate::cheb::{clenshaw_curtis_unit, BaryRow, ChebyshevGrid, DEFAULT_SNAP_TOL};
use crate::error::{Error, Result};
use crate::greens::{green_aux, GreenAux, ProblemParams, Side};

/// Coefficients below this fraction of the largest one in a row are dropped;
/// their contribution is far under the round-off of the row sums.
const NEGLIGIBLE: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgridMode {
    /// Order of each sub-grid is the number of global nodes it spans plus a
    /// margin.
    SpannedPlusMargin,
    /// Every sub-grid has order `n + 1`.
    Full,
}

impl SubgridMode {
    pub fn as_u8(self) -> u8 {
        match self {
            SubgridMode::SpannedPlusMargin => 0,
            SubgridMode::Full => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(SubgridMode::SpannedPlusMargin),
            1 => Some(SubgridMode::Full),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SubgridMode::SpannedPlusMargin => "spanned_plus_margin",
            SubgridMode::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubgridPolicy {
    pub mode: SubgridMode,
    pub margin: usize,
    pub min_order: usize,
}

impl Default for SubgridPolicy {
    fn default() -> Self {
        SubgridPolicy {
            mode: SubgridMode::SpannedPlusMargin,
            margin: 8,
            min_order: 8,
        }
    }
}

impl SubgridPolicy {
    pub fn full() -> Self {
        SubgridPolicy {
            mode: SubgridMode::Full,
            ..Default::default()
        }
    }

    /// Orders of the left and right sub-grids for global row `i`.
    pub fn orders(&self, n: usize, i: usize) -> (usize, usize) {
        match self.mode {
            SubgridMode::Full => (n + 1, n + 1),
            SubgridMode::SpannedPlusMargin => {
                let min = self.min_order.max(1);
                let left = (n + 1 - i + self.margin).max(min);
                let right = (i + 1 + self.margin).max(min);
                (left, right)
            }
        }
    }

    /// Largest spacing between the first two nodes of any sub-grid; the
    /// kernel width `1/b` must stay above it for the sub-grids to resolve
    /// the peak of `G` at `x_i`.
    pub fn max_endpoint_spacing(&self, n: usize) -> f64 {
        let grid = chebyshev_nodes_canonical(n);
        (1..n)
            .map(|i| {
                let (ml, mr) = self.orders(n, i);
                let gap = |m: usize| 1.0 - (std::f64::consts::PI / m as f64).cos();
                let left = 0.5 * (grid[i] + 1.0) * gap(ml);
                let right = 0.5 * (1.0 - grid[i]) * gap(mr);
                left.max(right)
            })
            .fold(0.0, f64::max)
    }
}

fn chebyshev_nodes_canonical(n: usize) -> Vec<f64> {
    ChebyshevGrid::canonical(n)
        .map(|g| g.nodes().to_vec())
        .unwrap_or_default()
}

/// Bytes held by a full operator set of global order `n`.
pub fn required_bytes(n: usize) -> u64 {
    let dim = (n + 1) as u64;
    8 * (2 * dim * dim + dim)
}

/// Refuses builds whose dense storage exceeds `limit` bytes.
pub fn check_memory(n: usize, limit: u64) -> Result<()> {
    let required = required_bytes(n);
    if required > limit {
        return Err(Error::Resource { required, limit });
    }
    Ok(())
}

/// Rows `rows` of `M`, `N` and `J`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorBlock {
    pub n: usize,
    pub params: ProblemParams,
    pub policy: SubgridPolicy,
    pub rows: Range<usize>,
    pub m: Vec<f64>,
    pub nm: Vec<f64>,
    pub j: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionOperators {
    n: usize,
    params: ProblemParams,
    policy: SubgridPolicy,
    m: Vec<f64>,
    nm: Vec<f64>,
    j: Vec<f64>,
    partition: Vec<Range<usize>>,
}

impl ConvolutionOperators {
    /// Reassembles operators from raw storage, e.g. a cache file.
    pub fn from_parts(
        n: usize,
        params: ProblemParams,
        policy: SubgridPolicy,
        m: Vec<f64>,
        nm: Vec<f64>,
        j: Vec<f64>,
    ) -> Result<Self> {
        let dim = n + 1;
        if m.len() != dim * dim || nm.len() != dim * dim || j.len() != dim {
            return Err(Error::Format(format!("operator storage does not match n = {n}")));
        }
        Ok(ConvolutionOperators {
            n,
            params,
            policy,
            m,
            nm,
            j,
            partition: vec![0..dim],
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn policy(&self) -> &SubgridPolicy {
        &self.policy
    }

    pub fn partition(&self) -> &[Range<usize>] {
        &self.partition
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn n_mat(&self) -> &[f64] {
        &self.nm
    }

    pub fn j(&self) -> &[f64] {
        &self.j
    }

    pub fn m_row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.m[i * d..(i + 1) * d]
    }

    pub fn n_row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.nm[i * d..(i + 1) * d]
    }

    /// `M a`, row-parallel.
    pub fn apply_m(&self, a: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(a.len(), d);
        self.m.par_chunks_exact(d).map(|row| dot(row, a)).collect()
    }

    /// `out = M i1 + N i2 + J`, row-parallel. Each row is a fixed-order
    /// reduction, so the result does not depend on the number of workers.
    pub fn apply_step(&self, i1: &[f64], i2: &[f64], out: &mut [f64]) {
        let d = self.dim();
        assert!(i1.len() == d && i2.len() == d && out.len() == d);
        out.par_iter_mut()
            .zip(self.m.par_chunks_exact(d))
            .zip(self.nm.par_chunks_exact(d))
            .zip(self.j.par_iter())
            .for_each(|(((o, mr), nr), &jj)| {
                *o = dot(mr, i1) + dot(nr, i2) + jj;
            });
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (self.m, self.nm, self.j)
    }
}

/// Four-lane dot product with a fixed reduction order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (ra, rb) = (chunks_a.remainder(), chunks_b.remainder());
    for (x, y) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Shared state for building any subset of operator rows.
pub struct OperatorBuilder {
    params: ProblemParams,
    aux: GreenAux,
    n: usize,
    policy: SubgridPolicy,
    snap_tol: f64,
    grid: ChebyshevGrid,
}

impl OperatorBuilder {
    pub fn new(params: ProblemParams, n: usize, policy: SubgridPolicy) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("global grid order must be at least 2"));
        }
        let aux = green_aux(&params)?;
        Ok(OperatorBuilder {
            params,
            aux,
            n,
            policy,
            snap_tol: DEFAULT_SNAP_TOL,
            grid: ChebyshevGrid::canonical(n)?,
        })
    }

    pub fn with_snap_tol(mut self, snap_tol: f64) -> Result<Self> {
        if !(snap_tol >= 0.0) {
            return Err(Error::invalid("snap tolerance must be non-negative"));
        }
        self.snap_tol = snap_tol;
        Ok(self)
    }

    pub fn aux(&self) -> &GreenAux {
        &self.aux
    }

    pub fn grid(&self) -> &ChebyshevGrid {
        &self.grid
    }

    /// Clenshaw-Curtis weights (unit interval) for every sub-grid order used
    /// by `rows`, indexed by order.
    fn quadrature_table(&self, rows: &Range<usize>) -> Vec<Option<Vec<f64>>> {
        let mut needed: Vec<usize> = rows
            .clone()
            .filter(|&i| i > 0 && i < self.n)
            .flat_map(|i| {
                let (l, r) = self.policy.orders(self.n, i);
                [l, r]
            })
            .collect();
        needed.sort_unstable();
        needed.dedup();
        let max = needed.last().copied().unwrap_or(0);
        let computed: Vec<(usize, Vec<f64>)> = needed
            .into_par_iter()
            .map(|m| (m, clenshaw_curtis_unit(m)))
            .collect();
        let mut table = vec![None; max + 1];
        for (m, w) in computed {
            table[m] = Some(w);
        }
        table
    }

    /// Builds rows `rows` of the operators.
    pub fn build_rows(&self, rows: Range<usize>) -> Result<OperatorBlock> {
        let table = self.quadrature_table(&rows);
        self.build_rows_with(rows, &table)
    }

    fn build_rows_with(
        &self,
        rows: Range<usize>,
        table: &[Option<Vec<f64>>],
    ) -> Result<OperatorBlock> {
        if rows.start > rows.end || rows.end > self.n + 1 {
            return Err(Error::partition(&rows, "outside the global grid"));
        }
        let dim = self.n + 1;
        let count = rows.len();
        let mut m = vec![0.0; count * dim];
        let mut nm = vec![0.0; count * dim];
        let mut j = vec![0.0; count];
        let mut scratch = RowScratch::new(dim);
        let slope = self.params.big_r();
        let profile: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .map(|&x| self.params.phi_profile(x))
            .collect();
        for (local, i) in rows.clone().enumerate() {
            if i == 0 || i == self.n {
                // G(±1, y) = 0, so these rows vanish identically
                continue;
            }
            let m_row = &mut m[local * dim..(local + 1) * dim];
            let n_row = &mut nm[local * dim..(local + 1) * dim];
            self.assemble_row(i, table, &mut scratch, m_row, n_row)?;
            if slope != 0.0 {
                j[local] = -self.params.delta * slope * dot(m_row, &profile);
            }
        }
        Ok(OperatorBlock {
            n: self.n,
            params: self.params,
            policy: self.policy,
            rows,
            m,
            nm,
            j,
        })
    }

    fn assemble_row(
        &self,
        i: usize,
        table: &[Option<Vec<f64>>],
        scratch: &mut RowScratch,
        m_row: &mut [f64],
        n_row: &mut [f64],
    ) -> Result<()> {
        let xi = self.grid.nodes()[i];
        let (ml, mr) = self.policy.orders(self.n, i);
        let left = ChebyshevGrid::new(ml, -1.0, xi)?;
        let right = ChebyshevGrid::new(mr, xi, 1.0)?;

        scratch.points.clear();
        for (sub, side, m) in [(&left, Side::Below, ml), (&right, Side::Above, mr)] {
            let unit = table[m]
                .as_ref()
                .expect("quadrature table covers every sub-grid order");
            let len = sub.length();
            for (&y, &w) in sub.nodes().iter().zip(unit) {
                let c = len * w;
                let (g, gy) = self.aux.eval_with_deriv(xi, y, side);
                scratch.points.push((y, c * g, c * gy));
            }
        }

        let max_a = scratch.points.iter().fold(0.0f64, |acc, p| acc.max(p.1.abs()));
        let max_b = scratch.points.iter().fold(0.0f64, |acc, p| acc.max(p.2.abs()));
        let (tiny_a, tiny_b) = (NEGLIGIBLE * max_a, NEGLIGIBLE * max_b);

        let RowScratch { points, terms } = scratch;
        for &(y, a, b) in points.iter() {
            if a.abs() <= tiny_a && b.abs() <= tiny_b {
                continue;
            }
            match self.grid.barycentric_terms(y, self.snap_tol, terms) {
                BaryRow::Unit(q) => {
                    m_row[q] += a;
                    n_row[q] += b;
                }
                BaryRow::Scaled(s) => {
                    let (fa, fb) = (a * s, b * s);
                    for ((mv, nv), &t) in m_row.iter_mut().zip(n_row.iter_mut()).zip(terms.iter()) {
                        *mv += fa * t;
                        *nv += fb * t;
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds all rows on `workers` threads and merges the blocks.
    pub fn build(&self, workers: usize) -> Result<ConvolutionOperators> {
        let dim = self.n + 1;
        let workers = workers.max(1);
        let run = || -> Result<ConvolutionOperators> {
            let table = self.quadrature_table(&(0..dim));
            let chunk = dim.div_ceil(workers * 4).max(1);
            let ranges: Vec<Range<usize>> = (0..dim)
                .step_by(chunk)
                .map(|s| s..(s + chunk).min(dim))
                .collect();
            let blocks = ranges
                .into_par_iter()
                .map(|r| self.build_rows_with(r, &table))
                .collect::<Result<Vec<_>>>()?;
            merge_partitions(blocks)
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(run)
    }
}

struct RowScratch {
    points: Vec<(f64, f64, f64)>,
    terms: Vec<f64>,
}

impl RowScratch {
    fn new(dim: usize) -> Self {
        RowScratch {
            points: Vec::with_capacity(2 * dim + 64),
            terms: vec![0.0; dim],
        }
    }
}

/// Rows `row_range` of the operators for `params` on the order-`n` grid.
pub fn build_operators(
    params: &ProblemParams,
    n: usize,
    policy: &SubgridPolicy,
    row_range: Range<usize>,
) -> Result<OperatorBlock> {
    OperatorBuilder::new(*params, n, *policy)?.build_rows(row_range)
}

/// Concatenates blocks that cover `0..=n` exactly once.
pub fn merge_partitions(mut parts: Vec<OperatorBlock>) -> Result<ConvolutionOperators> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Partition("no blocks to merge".into()))?;
    let (n, params, policy) = (first.n, first.params, first.policy);
    let dim = n + 1;
    parts.sort_by_key(|b| b.rows.start);
    let mut expected = 0;
    for block in &parts {
        if block.n != n || block.params != params || block.policy != policy {
            return Err(Error::partition(&block.rows, "metadata differs from first block"));
        }
        if block.rows.start != expected {
            let msg = if block.rows.start < expected {
                "overlaps the previous block"
            } else {
                "leaves a gap before it"
            };
            return Err(Error::partition(&block.rows, msg));
        }
        expected = block.rows.end;
    }
    if expected != dim {
        return Err(Error::Partition(format!(
            "rows {expected}..{dim} are not covered"
        )));
    }
    let partition: Vec<Range<usize>> = parts.iter().map(|b| b.rows.clone()).collect();
    let (m, nm, j) = if parts.len() == 1 {
        let b = parts.pop().expect("one block");
        (b.m, b.nm, b.j)
    } else {
        let mut m = Vec::with_capacity(dim * dim);
        let mut nm = Vec::with_capacity(dim * dim);
        let mut j = Vec::with_capacity(dim);
        for b in parts {
            m.extend_from_slice(&b.m);
            nm.extend_from_slice(&b.nm);
            j.extend_from_slice(&b.j);
        }
        (m, nm, j)
    };
    Ok(ConvolutionOperators {
        n,
        params,
        policy,
        m,
        nm,
        j,
        partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64, r: f64) -> ProblemParams {
        ProblemParams::new(2e-3, 1e-4, l, r).unwrap()
    }

    #[test]
    fn policy_orders() {
        let p = SubgridPolicy::default();
        assert_eq!(p.orders(100, 1), (108, 10));
        assert_eq!(p.orders(100, 99), (10, 108));
        assert_eq!(SubgridPolicy::full().orders(100, 40), (101, 101));
        let tight = SubgridPolicy {
            margin: 0,
            min_order: 30,
            ..Default::default()
        };
        assert_eq!(tight.orders(100, 99), (30, 100));
    }

    #[test]
    fn boundary_rows_are_zero() {
        let ops = OperatorBuilder::new(params(0.3, -0.5), 40, SubgridPolicy::default())
            .unwrap()
            .build(1)
            .unwrap();
        for i in [0, 40] {
            assert!(ops.m_row(i).iter().all(|&v| v == 0.0));
            assert!(ops.n_row(i).iter().all(|&v| v == 0.0));
            assert_eq!(ops.j()[i], 0.0);
        }
    }

    #[test]
    fn equal_boundary_values_give_zero_constant_term() {
        let ops = OperatorBuilder::new(params(0.7, 0.7), 30, SubgridPolicy::default())
            .unwrap()
            .build(1)
            .unwrap();
        assert!(ops.j().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn merge_rejects_gaps_and_overlaps() {
        let b = OperatorBuilder::new(params(0.0, 0.0), 20, SubgridPolicy::default()).unwrap();
        let gap = vec![b.build_rows(0..19).unwrap()];
        assert!(matches!(merge_partitions(gap), Err(Error::Partition(_))));
        let overlap = vec![b.build_rows(0..12).unwrap(), b.build_rows(10..21).unwrap()];
        assert!(matches!(merge_partitions(overlap), Err(Error::Partition(_))));
        let hole = vec![b.build_rows(0..8).unwrap(), b.build_rows(10..21).unwrap()];
        assert!(matches!(merge_partitions(hole), Err(Error::Partition(_))));
        assert!(matches!(merge_partitions(vec![]), Err(Error::Partition(_))));
    }

    #[test]
    fn single_block_merge_is_identity() {
        let b = OperatorBuilder::new(params(0.1, 0.2), 16, SubgridPolicy::default()).unwrap();
        let block = b.build_rows(0..17).unwrap();
        let merged = merge_partitions(vec![block.clone()]).unwrap();
        assert_eq!(merged.m(), &block.m[..]);
        assert_eq!(merged.n_mat(), &block.nm[..]);
        assert_eq!(merged.j(), &block.j[..]);
    }

    #[test]
    fn memory_guard() {
        assert_eq!(required_bytes(1), 8 * (2 * 4 + 2));
        assert!(check_memory(1000, 1 << 30).is_ok());
        match check_memory(60_000, 4 << 30) {
            Err(Error::Resource { required, .. }) => assert!(required > 57_000_000_000),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn real_roots_propagate() {
        let p = ProblemParams::new(1e-4, 1e-3, 0.0, 0.0).unwrap();
        assert!(matches!(
            OperatorBuilder::new(p, 10, SubgridPolicy::default()),
            Err(Error::RealRoots { .. })
        ));
    }

    #[test]
    fn fixed_order_dot() {
        let a: Vec<f64> = (0..11).map(|v| v as f64).collect();
        assert_eq!(dot(&a, &a), (0..11).map(|v| (v * v) as f64).sum::<f64>());
    }
}
