//! Run configuration from `key = value` text with `KSGREEN_` environment
//! overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::builder::{SubgridMode, SubgridPolicy};
use crate::cheb::DEFAULT_SNAP_TOL;
use crate::error::{Error, Result};
use crate::greens::green_aux;
use crate::sbdf::{sbdf_scheme, step_params};

pub const ENV_PREFIX: &str = "KSGREEN_";

/// Default memory ceiling for dense operators, 8 GiB.
pub const DEFAULT_MEMORY_LIMIT: u64 = 8 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedKind {
    Eigenmode,
    Soliton,
    SmallStep,
    Richardson,
}

impl FromStr for SeedKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "eigenmode_growth" | "eigenmode" => Ok(SeedKind::Eigenmode),
            "exact_soliton" | "soliton" => Ok(SeedKind::Soliton),
            "small_step_order1" | "small_step" => Ok(SeedKind::SmallStep),
            "richardson" => Ok(SeedKind::Richardson),
            _ => Err(format!(
                "unknown seed method `{s}` (expected eigenmode_growth, exact_soliton, \
                 small_step_order1 or richardson)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nu: f64,
    pub h: f64,
    pub l: f64,
    pub r: f64,
    pub n: usize,
    pub order: usize,
    pub seed_method: SeedKind,
    pub soliton_c: f64,
    pub soliton_x0: f64,
    /// `None` selects `10⁻⁴/√ν`.
    pub seed_amplitude: Option<f64>,
    pub substeps: usize,
    pub allow_expensive: bool,
    pub rng_seed: u64,
    pub total_steps: u64,
    pub output_every: u64,
    /// Zero disables checkpoints.
    pub checkpoint_every: u64,
    pub policy: SubgridPolicy,
    pub snap_tol: f64,
    pub workers: usize,
    pub memory_limit: u64,
    pub cache_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub restart_from: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
    pub series_path: Option<PathBuf>,
    pub k: u32,
    pub n_list: Vec<usize>,
    pub h_list: Vec<f64>,
    /// `h_list` entries are multiples of each scanned viscosity.
    pub h_relative: bool,
    pub nu_list: Vec<f64>,
    pub horizon_over_nu: f64,
    pub t_start_over_nu: f64,
    pub t_end_over_nu: f64,
    pub contour_points: usize,
    pub contour_stride: usize,
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("nu", "viscosity (required)"),
    ("h", "time step (required)"),
    ("n", "global Chebyshev order (required)"),
    ("order", "SBDF order 1..4 (required)"),
    ("l", "boundary value at x = -1"),
    ("r", "boundary value at x = 1"),
    ("seed_method", "eigenmode_growth | exact_soliton | small_step_order1 | richardson"),
    ("soliton_c", "soliton speed"),
    ("soliton_x0", "soliton initial position"),
    ("seed_amplitude", "eigenmode amplitude bound (default 1e-4/sqrt(nu))"),
    ("substeps", "substeps per step for small_step_order1"),
    ("allow_expensive", "permit richardson seeding"),
    ("rng_seed", "seed of the perturbation generator"),
    ("total_steps", "steps to integrate"),
    ("output_every", "steps between output frames"),
    ("checkpoint_every", "steps between checkpoints, 0 disables"),
    ("subgrid_mode", "spanned_plus_margin | full"),
    ("margin", "sub-grid order margin"),
    ("min_order", "minimum sub-grid order"),
    ("snap_tol", "node coincidence tolerance"),
    ("workers", "worker threads"),
    ("memory_limit", "byte limit for dense operators"),
    ("cache_path", "operator cache file"),
    ("checkpoint_path", "checkpoint file"),
    ("restart_from", "checkpoint to resume from"),
    ("output_path", "time-series output file"),
    ("csv_path", "experiment table output"),
    ("series_path", "input time series for blayer and export-contours"),
    ("k", "test-function oscillation count"),
    ("n_list", "comma-separated grid orders"),
    ("h_list", "comma-separated step sizes"),
    ("h_relative", "read h_list as multiples of nu in stabscan"),
    ("nu_list", "comma-separated viscosities"),
    ("horizon_over_nu", "integration horizon in units of nu"),
    ("t_start_over_nu", "start of the averaging window in units of nu"),
    ("t_end_over_nu", "end of the averaging window in units of nu"),
    ("contour_points", "even grid points of exported frames"),
    ("contour_stride", "frame stride of exported frames"),
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim().to_string();
        if !known(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
    }
    Ok(map)
}

/// Applies `KSGREEN_<KEY>` variables for known keys; others are ignored.
pub fn apply_env<I, K, V>(map: &mut BTreeMap<String, String>, vars: I)
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    for (k, v) in vars {
        if let Some(rest) = k.as_ref().strip_prefix(ENV_PREFIX) {
            let key = rest.to_ascii_lowercase();
            if known(&key) {
                map.insert(key, v.as_ref().trim().to_string());
            }
        }
    }
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::config(key, "required key is missing"))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(Vec::new()),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|e| Error::config(key, format!("cannot parse `{}`: {e}", s.trim())))
                })
                .collect(),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.0.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl RunConfig {
    /// Parses and validates a configuration without environment overrides.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(parse_pairs(text)?)
    }

    /// Parses `text`, then applies overrides from `vars`.
    pub fn parse_with_env<I, K, V>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut map = parse_pairs(text)?;
        apply_env(&mut map, vars);
        Self::from_map(map)
    }

    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let f = Fields(map);
        let order: usize = f.required("order")?;
        if !(1..=4).contains(&order) {
            return Err(Error::config("order", format!("SBDF order must be 1, 2, 3 or 4, got {order}")));
        }
        let nu = positive("nu", f.required("nu")?)?;
        let h = positive("h", f.required("h")?)?;
        let n: usize = f.required("n")?;
        if n < 2 {
            return Err(Error::config("n", "grid order must be at least 2"));
        }
        let mode = match f.0.get("subgrid_mode").map(String::as_str) {
            None | Some("spanned_plus_margin") => SubgridMode::SpannedPlusMargin,
            Some("full") => SubgridMode::Full,
            Some(other) => {
                return Err(Error::config(
                    "subgrid_mode",
                    format!("expected spanned_plus_margin or full, got `{other}`"),
                ))
            }
        };
        let defaults = SubgridPolicy::default();
        let policy = SubgridPolicy {
            mode,
            margin: f.or("margin", defaults.margin)?,
            min_order: f.or("min_order", defaults.min_order)?,
        };
        if policy.min_order == 0 {
            return Err(Error::config("min_order", "must be positive"));
        }
        let seed_method = f.or("seed_method", SeedKind::Eigenmode)?;
        let cfg = RunConfig {
            nu,
            h,
            l: f.or("l", 0.0)?,
            r: f.or("r", 0.0)?,
            n,
            order,
            seed_method,
            soliton_c: f.or("soliton_c", 1000.0)?,
            soliton_x0: f.or("soliton_x0", -0.2)?,
            seed_amplitude: f.get("seed_amplitude")?,
            substeps: f.or("substeps", 10)?,
            allow_expensive: f.or("allow_expensive", false)?,
            rng_seed: f.or("rng_seed", 1)?,
            total_steps: f.or("total_steps", 100)?,
            output_every: f.or("output_every", 1)?,
            checkpoint_every: f.or("checkpoint_every", 0)?,
            policy,
            snap_tol: f.or("snap_tol", DEFAULT_SNAP_TOL)?,
            workers: f.or("workers", default_workers())?.max(1),
            memory_limit: f.or("memory_limit", DEFAULT_MEMORY_LIMIT)?,
            cache_path: f.path("cache_path"),
            checkpoint_path: f.path("checkpoint_path"),
            restart_from: f.path("restart_from"),
            output_path: f.path("output_path"),
            csv_path: f.path("csv_path"),
            series_path: f.path("series_path"),
            k: f.or("k", 6)?,
            n_list: f.list("n_list")?,
            h_list: f.list("h_list")?,
            h_relative: f.or("h_relative", false)?,
            nu_list: f.list("nu_list")?,
            horizon_over_nu: positive("horizon_over_nu", f.or("horizon_over_nu", 150.0)?)?,
            t_start_over_nu: f.or("t_start_over_nu", 200.0)?,
            t_end_over_nu: f.or("t_end_over_nu", 2000.0)?,
            contour_points: f.or("contour_points", 1000)?,
            contour_stride: f.or("contour_stride", 1)?,
        };
        if cfg.output_every == 0 {
            return Err(Error::config("output_every", "must be at least 1"));
        }
        if cfg.substeps == 0 {
            return Err(Error::config("substeps", "must be at least 1"));
        }
        if cfg.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if !(cfg.snap_tol >= 0.0) {
            return Err(Error::config("snap_tol", "must be non-negative"));
        }
        if let Some(a) = cfg.seed_amplitude {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::config("seed_amplitude", "must be finite and non-negative"));
            }
        }
        cfg.check_real_roots()?;
        Ok(cfg)
    }

    /// Fails fast when the configured `(ν, h, order)` lie in the real-root
    /// regime.
    pub fn check_real_roots(&self) -> Result<()> {
        let scheme = sbdf_scheme(self.order)?;
        let params = step_params(&scheme, self.nu, self.h, self.l, self.r)
            .map_err(|e| Error::config("h", e.to_string()))?;
        green_aux(&params)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "nu = 1e-3\nh = 1e-4\nn = 64\norder = 2\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.l, 0.0);
        assert_eq!(cfg.seed_method, SeedKind::Eigenmode);
        assert_eq!(cfg.policy, SubgridPolicy::default());
        assert_eq!(cfg.output_every, 1);
        assert_eq!(cfg.snap_tol, 1e-13);
    }

    #[test]
    fn order_five_is_rejected() {
        let text = MINIMAL.replace("order = 2", "order = 5");
        match RunConfig::parse(&text) {
            Err(Error::Config { key, msg }) => {
                assert_eq!(key, "order");
                assert!(msg.contains('4'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn real_roots_fail_fast() {
        let text = "nu = 2e-4\norder = 1\nh = 1e-3\nn = 32\n";
        match RunConfig::parse(text) {
            Err(Error::RealRoots { s }) => assert!((s - 1.25).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(matches!(
            RunConfig::parse(&format!("{MINIMAL}viscosity = 1\n")),
            Err(Error::Config { key, .. }) if key == "viscosity"
        ));
        assert!(matches!(
            RunConfig::parse(&format!("{MINIMAL}n = 3\n")),
            Err(Error::Config { key, .. }) if key == "n"
        ));
    }

    #[test]
    fn missing_and_malformed() {
        assert!(matches!(
            RunConfig::parse("nu = 1e-3\nh = 1e-4\norder = 1\n"),
            Err(Error::Config { key, .. }) if key == "n"
        ));
        assert!(matches!(
            RunConfig::parse(&MINIMAL.replace("n = 64", "n = many")),
            Err(Error::Config { key, .. }) if key == "n"
        ));
    }

    #[test]
    fn env_overrides() {
        let vars = [("KSGREEN_N", "128"), ("KSGREEN_UNRELATED_FLAG", "1"), ("PATH", "/bin")];
        let cfg = RunConfig::parse_with_env(MINIMAL, vars).unwrap();
        assert_eq!(cfg.n, 128);
    }

    #[test]
    fn lists_and_comments() {
        let text = format!("{MINIMAL}h_list = 1e-5, 2e-5 # two sizes\nseed_method = exact_soliton\n");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.h_list, vec![1e-5, 2e-5]);
        assert_eq!(cfg.seed_method, SeedKind::Soliton);
    }
}
