//! Boundary-layer statistics in the scaled variables `x̄ = (x+1)/√ν`,
//! `ū = √ν u`.

use crate::builder::{OperatorBuilder, SubgridPolicy};
use crate::cheb::ChebyshevGrid;
use crate::error::{Error, Result};
use crate::sbdf::{default_random_seed, random_amplitudes, seed, step_params, sbdf_scheme, SeedMethod, SeedSetup};

/// Running per-node mean and variance (Welford), fed one frame at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAccumulator {
    nodes: Vec<f64>,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ProfileAccumulator {
    /// `nodes` are the grid coordinates the frames are sampled on.
    pub fn new(nodes: &[f64]) -> Self {
        ProfileAccumulator {
            nodes: nodes.to_vec(),
            count: 0,
            mean: vec![0.0; nodes.len()],
            m2: vec![0.0; nodes.len()],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, u: &[f64]) -> Result<()> {
        if u.len() != self.nodes.len() {
            return Err(Error::Statistics(format!(
                "frame has {} values, grid has {}",
                u.len(),
                self.nodes.len()
            )));
        }
        self.count += 1;
        let k = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(u) {
            let d = x - *m;
            *m += d / k;
            *s += d * (x - *m);
        }
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance per node.
    pub fn variance(&self) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::Statistics(format!(
                "need at least two frames, have {}",
                self.count
            )));
        }
        let k = self.count as f64;
        Ok(self.m2.iter().map(|s| s / k).collect())
    }

    /// Scaled rms profile, averaged over the two mirrored boundary layers.
    pub fn profile(&self, nu: f64) -> Result<LayerProfile> {
        let var = self.variance()?;
        let n = var.len() - 1;
        let sqrt_nu = nu.sqrt();
        // nodes are descending; walk from x = -1 upwards
        let mut xbar = Vec::with_capacity(n + 1);
        let mut rms = Vec::with_capacity(n + 1);
        for idx in (0..=n).rev() {
            let mirror = n - idx;
            let v = 0.5 * (var[idx] + var[mirror]);
            xbar.push((self.nodes[idx] + 1.0) / sqrt_nu);
            rms.push(sqrt_nu * v.max(0.0).sqrt());
        }
        Ok(LayerProfile { nu, xbar, rms })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerProfile {
    pub nu: f64,
    /// Ascending distance from the wall in units of `√ν`.
    pub xbar: Vec<f64>,
    /// `rms(√ν (u - ⟨u⟩))` at each `xbar`.
    pub rms: Vec<f64>,
}

/// Fraction of the plateau that defines the layer edge.
pub const THICKNESS_FRACTION: f64 = 0.9;

impl LayerProfile {
    /// Mean rms over the central half of the domain, `|x| ≤ 1/2`.
    pub fn plateau(&self) -> Result<f64> {
        let sqrt_nu = self.nu.sqrt();
        let (sum, count) = self
            .xbar
            .iter()
            .zip(&self.rms)
            .filter(|(&xb, _)| (xb * sqrt_nu - 1.0).abs() <= 0.5)
            .fold((0.0, 0usize), |(s, c), (_, &r)| (s + r, c + 1));
        if count == 0 {
            return Err(Error::Statistics("no grid points in the central region".into()));
        }
        Ok(sum / count as f64)
    }

    /// First `x̄` at which the rms reaches 90% of the plateau, linearly
    /// interpolated between nodes.
    pub fn thickness(&self) -> Result<f64> {
        let plateau = self.plateau()?;
        if !(plateau > 0.0) {
            return Err(Error::Statistics("rms plateau is zero".into()));
        }
        let target = THICKNESS_FRACTION * plateau;
        for k in 1..self.rms.len() {
            if self.rms[k] >= target {
                let (x0, x1) = (self.xbar[k - 1], self.xbar[k]);
                let (r0, r1) = (self.rms[k - 1], self.rms[k]);
                return Ok(x0 + (target - r0) / (r1 - r0) * (x1 - x0));
            }
        }
        Err(Error::Statistics("rms never reaches the plateau".into()))
    }

    /// Linear interpolation of the rms at `xbar`.
    pub fn rms_at(&self, xbar: f64) -> Result<f64> {
        let last = self.xbar.len() - 1;
        if xbar < self.xbar[0] || xbar > self.xbar[last] {
            return Err(Error::OutOfRange {
                x: xbar,
                lo: self.xbar[0],
                hi: self.xbar[last],
            });
        }
        let k = self.xbar.partition_point(|&x| x < xbar).clamp(1, last);
        let (x0, x1) = (self.xbar[k - 1], self.xbar[k]);
        let t = if x1 > x0 { (xbar - x0) / (x1 - x0) } else { 0.0 };
        Ok(self.rms[k - 1] + t * (self.rms[k] - self.rms[k - 1]))
    }
}

/// Profile from frames `(t, u)` restricted to `t_range`.
pub fn boundary_layer_profile<'a, I>(frames: I, nodes: &[f64], nu: f64, t_range: (f64, f64)) -> Result<LayerProfile>
where
    I: IntoIterator<Item = (f64, &'a [f64])>,
{
    let mut acc = ProfileAccumulator::new(nodes);
    for (t, u) in frames {
        if t >= t_range.0 && t <= t_range.1 {
            acc.push(u)?;
        }
    }
    acc.profile(nu)
}

/// Largest relative pointwise gap `|a - b| / max(a, b)` between two profiles
/// sampled at `samples` evenly spaced points of `[0, xbar_max]`.
pub fn profile_mismatch(a: &LayerProfile, b: &LayerProfile, xbar_max: f64, samples: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..=samples {
        let xb = xbar_max * j as f64 / samples as f64;
        let ra = a.rms_at(xb)?;
        let rb = b.rms_at(xb)?;
        let scale = ra.max(rb);
        if scale > 0.0 {
            worst = worst.max((ra - rb).abs() / scale);
        }
    }
    Ok(worst)
}

/// A chaotic run from small random eigenmodes, sampled for statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRunSetup {
    pub nu: f64,
    pub h: f64,
    pub n: usize,
    pub order: usize,
    pub l: f64,
    pub r: f64,
    pub t_start_over_nu: f64,
    pub t_end_over_nu: f64,
    /// Steps between sampled frames.
    pub sample_every: u64,
    /// `None` selects `10⁻⁴/√ν`.
    pub amplitude: Option<f64>,
    pub rng_seed: u64,
    pub policy: SubgridPolicy,
    pub workers: usize,
}

impl LayerRunSetup {
    pub fn new(nu: f64, h: f64, n: usize) -> Self {
        LayerRunSetup {
            nu,
            h,
            n,
            order: 4,
            l: 0.0,
            r: 0.0,
            t_start_over_nu: 200.0,
            t_end_over_nu: 2000.0,
            sample_every: 1,
            amplitude: None,
            rng_seed: 1,
            policy: SubgridPolicy::default(),
            workers: 1,
        }
    }
}

/// Integrates to `t_end` and accumulates the rms profile over the window.
pub fn layer_run(setup: &LayerRunSetup) -> Result<(LayerProfile, u64)> {
    if setup.sample_every == 0 {
        return Err(Error::invalid("sample_every must be positive"));
    }
    let scheme = sbdf_scheme(setup.order)?;
    let params = step_params(&scheme, setup.nu, setup.h, setup.l, setup.r)?;
    let ops = OperatorBuilder::new(params, setup.n, setup.policy)?.build(setup.workers)?;
    let amplitudes = match setup.amplitude {
        Some(eps) => random_amplitudes((2.0 / setup.nu.sqrt()).ceil() as usize, eps, setup.rng_seed),
        None => default_random_seed(setup.nu, setup.rng_seed),
    };
    let seed_setup = SeedSetup {
        nu: setup.nu,
        h: setup.h,
        l: setup.l,
        r: setup.r,
        n: setup.n,
        order: setup.order,
        policy: setup.policy,
        workers: setup.workers,
        allow_expensive: false,
    };
    let mut state = seed(&SeedMethod::EigenmodeGrowth { amplitudes }, &seed_setup)?.state;
    let grid = ChebyshevGrid::canonical(setup.n)?;
    let mut acc = ProfileAccumulator::new(grid.nodes());
    let t_start = setup.t_start_over_nu * setup.nu;
    let steps = (setup.t_end_over_nu * setup.nu / setup.h).round() as u64;
    for _ in 0..steps {
        state.step(&ops)?;
        if state.step_index() % setup.sample_every == 0 && state.time() >= t_start {
            acc.push(&state.solution())?;
        }
    }
    let count = acc.count();
    Ok((acc.profile(setup.nu)?, count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::ChebyshevGrid;

    #[test]
    fn constant_field_has_zero_rms() {
        let grid = ChebyshevGrid::canonical(20).unwrap();
        let u = vec![0.7; 21];
        let frames: Vec<(f64, &[f64])> = (0..5).map(|k| (k as f64, u.as_slice())).collect();
        let prof = boundary_layer_profile(frames, grid.nodes(), 1e-2, (0.0, 10.0)).unwrap();
        assert!(prof.rms.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn too_few_frames() {
        let grid = ChebyshevGrid::canonical(4).unwrap();
        let u = vec![0.0; 5];
        let frames = vec![(0.0, u.as_slice())];
        assert!(matches!(
            boundary_layer_profile(frames, grid.nodes(), 1e-2, (0.0, 1.0)),
            Err(Error::Statistics(_))
        ));
    }

    #[test]
    fn welford_matches_two_pass() {
        let nodes = [1.0, 0.0, -1.0];
        let data = [[0.0, 1.0, 0.0], [0.0, 3.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.5, 0.0]];
        let mut acc = ProfileAccumulator::new(&nodes);
        for d in &data {
            acc.push(d).unwrap();
        }
        let mean = 2.5 / 4.0;
        let var: f64 = data.iter().map(|d| (d[1] - mean) * (d[1] - mean)).sum::<f64>() / 4.0;
        assert!((acc.variance().unwrap()[1] - var).abs() < 1e-14);
    }

    #[test]
    fn thickness_of_ramp() {
        let nu: f64 = 1e-2;
        let xbar: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let rms: Vec<f64> = xbar.iter().map(|&x| (x / 5.0).min(1.0)).collect();
        let prof = LayerProfile { nu, xbar, rms };
        assert!((prof.plateau().unwrap() - 1.0).abs() < 1e-12);
        assert!((prof.thickness().unwrap() - 4.5).abs() < 1e-9);
    }
}
