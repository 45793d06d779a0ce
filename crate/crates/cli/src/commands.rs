use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use ksgreen::builder::{check_memory, required_bytes};
use ksgreen::experiments::convergence::{convergence_point, fitted_order, ConvergenceSetup, Verdict};
use ksgreen::experiments::layer::{boundary_layer_profile, layer_run, LayerProfile, LayerRunSetup};
use ksgreen::experiments::stability::{real_root_step, resolution_viscosity, stability_scan, StabilitySetup};
use ksgreen::experiments::{contour_export, fit_exponential, quadrature_error};
use ksgreen::io::{
    load_checkpoint, load_operators, read_frames, read_frames_csv, save_checkpoint, save_operators, write_frame,
    write_frame_csv, Cell, Frame, RunConfig, SeedKind, Table,
};
use ksgreen::sbdf::{default_random_seed, random_amplitudes, step_params};
use ksgreen::{
    green_aux, sbdf_scheme, seed, ChebyshevGrid, ConvolutionOperators, Error, OperatorBuilder, ProblemParams,
    Result, SeedMethod, SeedSetup, SimState,
};

use crate::Common;

fn config_params(cfg: &RunConfig) -> Result<ProblemParams> {
    step_params(&sbdf_scheme(cfg.order)?, cfg.nu, cfg.h, cfg.l, cfg.r)
}

fn mib(bytes: u64) -> f64 {
    bytes as f64 / (1024.0 * 1024.0)
}

pub fn dry_run(cfg: &RunConfig, command: &str) -> Result<()> {
    match command {
        "quadtest" => {
            require_list("n_list", cfg.n_list.len())?;
            for n in &cfg.n_list {
                println!("n={n} k={} n/k={:.2} nu={:e} h={:e}", cfg.k, *n as f64 / cfg.k as f64, cfg.nu, cfg.h);
            }
        }
        "convtest" => {
            require_list("h_list", cfg.h_list.len())?;
            for h in &cfg.h_list {
                let steps = (cfg.horizon_over_nu * cfg.nu / h).round();
                println!("o={} h={h:e} h/nu={:e} steps={steps}", cfg.order, h / cfg.nu);
            }
        }
        "stabscan" => {
            require_list("nu_list", cfg.nu_list.len())?;
            require_list("h_list", cfg.h_list.len())?;
            for nu in &cfg.nu_list {
                for h in &scan_steps(cfg, *nu) {
                    let s = step_params(&sbdf_scheme(cfg.order)?, *nu, *h, cfg.l, cfg.r)?.s_param();
                    println!("o={} n={} nu={nu:e} h={h:e} S={s:.4}", cfg.order, cfg.n);
                }
            }
        }
        _ => {
            let params = config_params(cfg)?;
            println!(
                "delta={:e} S={:.6} operator_bytes={} ({:.1} MiB)",
                params.delta,
                params.s_param(),
                required_bytes(cfg.n),
                mib(required_bytes(cfg.n))
            );
        }
    }
    Ok(())
}

fn require_list(key: &str, len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::Config {
            key: key.to_string(),
            msg: "list is empty".to_string(),
        });
    }
    Ok(())
}

/// Loads a matching cache or builds (and caches) the operators.
fn operators(cfg: &RunConfig, common: &Common, params: &ProblemParams) -> Result<ConvolutionOperators> {
    check_memory(cfg.n, cfg.memory_limit)?;
    if let Some(path) = &cfg.cache_path {
        if path.exists() && !common.force {
            let ops = load_operators(path, cfg.n, params, &cfg.policy)?;
            eprintln!("reusing operator cache {}", path.display());
            return Ok(ops);
        }
    }
    let start = Instant::now();
    let ops = OperatorBuilder::new(*params, cfg.n, cfg.policy)?
        .with_snap_tol(cfg.snap_tol)?
        .build(cfg.workers)?;
    eprintln!(
        "built operators n={} in {:.2} s with {} workers, {:.1} MiB",
        cfg.n,
        start.elapsed().as_secs_f64(),
        cfg.workers,
        mib(required_bytes(cfg.n))
    );
    if let Some(path) = &cfg.cache_path {
        save_operators(path, &ops)?;
        eprintln!("wrote operator cache {}", path.display());
    }
    Ok(ops)
}

pub fn build(cfg: &RunConfig, common: &Common) -> Result<()> {
    let params = config_params(cfg)?;
    let aux = green_aux(&params)?;
    println!("S={:.6} a={:.6e} b={:.6e} Q={:.6e}", aux.s, aux.a, aux.b, aux.q);
    operators(cfg, common, &params)?;
    Ok(())
}

fn amplitudes(cfg: &RunConfig) -> Vec<f64> {
    match cfg.seed_amplitude {
        Some(eps) => random_amplitudes((2.0 / cfg.nu.sqrt()).ceil() as usize, eps, cfg.rng_seed),
        None => default_random_seed(cfg.nu, cfg.rng_seed),
    }
}

fn seed_setup(cfg: &RunConfig, order: usize) -> SeedSetup {
    SeedSetup {
        nu: cfg.nu,
        h: cfg.h,
        l: cfg.l,
        r: cfg.r,
        n: cfg.n,
        order,
        policy: cfg.policy,
        workers: cfg.workers,
        allow_expensive: cfg.allow_expensive,
    }
}

fn initial_state(cfg: &RunConfig) -> Result<SimState> {
    if let Some(path) = &cfg.restart_from {
        let state = load_checkpoint(path)?;
        let p = state.params();
        let same = state.order() == cfg.n
            && state.scheme().order() == cfg.order
            && state.h().to_bits() == cfg.h.to_bits()
            && state.nu().to_bits() == cfg.nu.to_bits();
        let soliton = cfg.seed_method == SeedKind::Soliton;
        if !same || (!soliton && (p.l.to_bits() != cfg.l.to_bits() || p.r.to_bits() != cfg.r.to_bits())) {
            return Err(Error::Mismatch(format!(
                "checkpoint {} does not match the configuration",
                path.display()
            )));
        }
        return Ok(state);
    }
    let method = match cfg.seed_method {
        SeedKind::Eigenmode => SeedMethod::EigenmodeGrowth {
            amplitudes: amplitudes(cfg),
        },
        SeedKind::Soliton => SeedMethod::ExactSoliton {
            c: cfg.soliton_c,
            x0: cfg.soliton_x0,
        },
        SeedKind::SmallStep | SeedKind::Richardson => {
            let first = seed(
                &SeedMethod::EigenmodeGrowth {
                    amplitudes: amplitudes(cfg),
                },
                &seed_setup(cfg, 1),
            )?;
            let initial = first.state.current().to_vec();
            if cfg.seed_method == SeedKind::SmallStep {
                SeedMethod::SmallStepOrder1 {
                    initial,
                    substeps: cfg.substeps,
                }
            } else {
                SeedMethod::Richardson { initial }
            }
        }
    };
    let seeded = seed(&method, &seed_setup(cfg, cfg.order))?;
    for w in &seeded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(seeded.state)
}

struct FrameSink {
    out: Option<BufWriter<File>>,
    csv: bool,
}

impl FrameSink {
    fn open(path: Option<&Path>, csv: bool) -> Result<Self> {
        let out = match path {
            Some(p) => Some(BufWriter::new(File::create(p)?)),
            None => None,
        };
        Ok(FrameSink { out, csv })
    }

    fn write(&mut self, t: f64, u: &[f64]) -> Result<()> {
        if let Some(w) = self.out.as_mut() {
            if self.csv {
                write_frame_csv(w, t, u)?;
            } else {
                write_frame(w, t, u)?;
            }
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(w) = self.out.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

pub fn run(cfg: &RunConfig, common: &Common) -> Result<()> {
    if cfg.checkpoint_every > 0 && cfg.checkpoint_path.is_none() {
        return Err(Error::Config {
            key: "checkpoint_path".into(),
            msg: "required when checkpoint_every > 0".into(),
        });
    }
    let restarting = cfg.restart_from.is_some();
    let mut state = initial_state(cfg)?;
    let ops = operators(cfg, common, &state.params().clone())?;
    let mut sink = FrameSink::open(cfg.output_path.as_deref(), common.csv)?;
    if !restarting && state.step_index() % cfg.output_every == 0 {
        sink.write(state.time(), &state.solution())?;
    }
    let start = Instant::now();
    for _ in 0..cfg.total_steps {
        let next = state.propose(&ops)?;
        let candidate = next.clone();
        if let Err(e) = state.accept(next) {
            if let Error::BlowUp { step } = e {
                let u: Vec<f64> = candidate.iter().zip(state.profile()).map(|(v, p)| v + p).collect();
                sink.write(step as f64 * state.h(), &u)?;
                sink.finish()?;
            }
            return Err(e);
        }
        let k = state.step_index();
        if k % cfg.output_every == 0 {
            sink.write(state.time(), &state.solution())?;
        }
        if cfg.checkpoint_every > 0 && k % cfg.checkpoint_every == 0 {
            if let Some(path) = &cfg.checkpoint_path {
                save_checkpoint(path, &state)?;
            }
        }
    }
    sink.finish()?;
    if let Some(path) = &cfg.checkpoint_path {
        save_checkpoint(path, &state)?;
    }
    let u = state.solution();
    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "steps={} t={:e} t/nu={:.4} max|u|={:e} elapsed={:.2}s",
        state.step_index(),
        state.time(),
        state.time() / cfg.nu,
        umax,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn emit(cfg: &RunConfig, table: &Table) -> Result<()> {
    match &cfg.csv_path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(&mut w)?;
            w.flush()?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

pub fn quadtest(cfg: &RunConfig, _common: &Common) -> Result<()> {
    require_list("n_list", cfg.n_list.len())?;
    let params = config_params(cfg)?;
    green_aux(&params)?;
    let mut table = Table::new(&["n", "k", "nu", "h", "o", "e_q"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &n in &cfg.n_list {
        check_memory(n, cfg.memory_limit)?;
        let ops = OperatorBuilder::new(params, n, cfg.policy)?
            .with_snap_tol(cfg.snap_tol)?
            .build(cfg.workers)?;
        let e = quadrature_error(&ops, cfg.k)?;
        let ratio = n as f64 / cfg.k as f64;
        if (20.0..=100.0).contains(&ratio) {
            xs.push(ratio);
            ys.push(e);
        }
        table.push(vec![
            Cell::from(n),
            Cell::Int(cfg.k as i64),
            Cell::from(cfg.nu),
            Cell::from(cfg.h),
            Cell::from(cfg.order),
            Cell::from(e),
        ])?;
    }
    if xs.len() >= 2 {
        let fit = fit_exponential(&xs, &ys)?;
        eprintln!("decay rate over n/k in [20, 100]: alpha = {:.4}", -fit.slope);
    }
    emit(cfg, &table)
}

pub fn convtest(cfg: &RunConfig, _common: &Common) -> Result<()> {
    require_list("h_list", cfg.h_list.len())?;
    let setup = ConvergenceSetup {
        order: cfg.order,
        nu: cfg.nu,
        c: cfg.soliton_c,
        x0: cfg.soliton_x0,
        n: cfg.n,
        horizon: cfg.horizon_over_nu * cfg.nu,
        policy: cfg.policy,
        workers: cfg.workers,
    };
    let mut table = Table::new(&["o", "h", "steps", "error", "verdict"]);
    let mut rows = Vec::new();
    for &h in &cfg.h_list {
        let row = convergence_point(&setup, h)?;
        table.push(vec![
            Cell::from(row.order),
            Cell::from(row.h),
            Cell::from(row.steps),
            Cell::from(row.error),
            Cell::from(row.verdict.name()),
        ])?;
        rows.push(row);
    }
    let completed = rows.iter().filter(|r| r.error.is_some()).count();
    if completed >= 2 {
        let order = fitted_order(&rows, 0.0, f64::INFINITY)?;
        eprintln!("fitted order over all completed step sizes: {order:.3}");
    }
    emit(cfg, &table)
}

pub fn stabscan(cfg: &RunConfig, _common: &Common) -> Result<()> {
    require_list("nu_list", cfg.nu_list.len())?;
    require_list("h_list", cfg.h_list.len())?;
    let setup = StabilitySetup {
        order: cfg.order,
        n: cfg.n,
        l: cfg.l,
        r: cfg.r,
        horizon_over_nu: cfg.horizon_over_nu,
        amplitude: cfg.seed_amplitude,
        rng_seed: cfg.rng_seed,
        policy: cfg.policy,
        workers: cfg.workers,
    };
    let maps = if cfg.h_relative {
        cfg.nu_list
            .iter()
            .map(|&nu| stability_scan(&setup, &[nu], &scan_steps(cfg, nu)))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![stability_scan(&setup, &cfg.nu_list, &cfg.h_list)?]
    };
    let slope = (cfg.r - cfg.l) / 2.0;
    let mut table = Table::new(&[
        "nu", "h", "o", "n", "s", "steps", "verdict", "blowup_step", "h_real_root", "nu_resolution",
    ]);
    for (map, p) in maps.iter().flat_map(|m| m.points().map(move |p| (m, p))) {
        let blow = match p.verdict {
            Verdict::BlownUp { step } => Cell::from(step),
            _ => Cell::Text(String::new()),
        };
        table.push(vec![
            Cell::from(p.nu),
            Cell::from(p.h),
            Cell::from(map.order),
            Cell::from(map.n),
            Cell::from(p.s),
            Cell::from(p.steps),
            Cell::from(p.verdict.name()),
            blow,
            Cell::from(real_root_step(map.order, p.nu, slope)?),
            Cell::from(resolution_viscosity(map.n)),
        ])?;
    }
    emit(cfg, &table)
}

fn scan_steps(cfg: &RunConfig, nu: f64) -> Vec<f64> {
    if cfg.h_relative {
        cfg.h_list.iter().map(|f| f * nu).collect()
    } else {
        cfg.h_list.clone()
    }
}

fn read_series(cfg: &RunConfig, csv: bool) -> Result<Vec<Frame>> {
    let path = cfg.series_path.as_ref().ok_or_else(|| Error::Config {
        key: "series_path".into(),
        msg: "required for this command".into(),
    })?;
    let file = File::open(path)?;
    if csv {
        read_frames_csv(BufReader::new(file))
    } else {
        read_frames(&mut BufReader::new(file), cfg.n)
    }
}

fn window(cfg: &RunConfig) -> (f64, f64) {
    (cfg.t_start_over_nu * cfg.nu, cfg.t_end_over_nu * cfg.nu)
}

pub fn blayer(cfg: &RunConfig, common: &Common) -> Result<()> {
    let profile: LayerProfile = if cfg.series_path.is_some() {
        let frames = read_series(cfg, common.csv)?;
        let grid = ChebyshevGrid::canonical(cfg.n)?;
        boundary_layer_profile(
            frames.iter().map(|f| (f.t, f.u.as_slice())),
            grid.nodes(),
            cfg.nu,
            window(cfg),
        )?
    } else {
        check_memory(cfg.n, cfg.memory_limit)?;
        let setup = LayerRunSetup {
            nu: cfg.nu,
            h: cfg.h,
            n: cfg.n,
            order: cfg.order,
            l: cfg.l,
            r: cfg.r,
            t_start_over_nu: cfg.t_start_over_nu,
            t_end_over_nu: cfg.t_end_over_nu,
            sample_every: cfg.output_every,
            amplitude: cfg.seed_amplitude,
            rng_seed: cfg.rng_seed,
            policy: cfg.policy,
            workers: cfg.workers,
        };
        let (profile, frames) = layer_run(&setup)?;
        eprintln!("averaged {frames} frames");
        profile
    };
    let thickness = profile.thickness()?;
    eprintln!("layer thickness {thickness:.3} (scaled units)");
    let mut table = Table::new(&["nu", "xbar", "rms", "thickness"]);
    for (xb, r) in profile.xbar.iter().zip(&profile.rms) {
        table.push(vec![
            Cell::from(cfg.nu),
            Cell::from(*xb),
            Cell::from(*r),
            Cell::from(thickness),
        ])?;
    }
    emit(cfg, &table)
}

pub fn export_contours(cfg: &RunConfig, common: &Common) -> Result<()> {
    let frames = read_series(cfg, common.csv)?;
    let grid = ChebyshevGrid::canonical(cfg.n)?;
    let export = contour_export(
        frames.iter().map(|f| (f.t, f.u.as_slice())),
        &grid,
        cfg.nu,
        window(cfg),
        cfg.contour_stride,
        cfg.contour_points,
    )?;
    let spacing = export.xbar[1] - export.xbar[0];
    eprintln!(
        "{} frames on {} points, xbar spacing {spacing:e}",
        export.frames.len(),
        export.xbar.len()
    );
    let mut sink = FrameSink::open(cfg.output_path.as_deref(), common.csv)?;
    if cfg.output_path.is_none() {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        for f in &export.frames {
            write_frame_csv(&mut lock, f.t, &f.values)?;
        }
        return Ok(());
    }
    for f in &export.frames {
        sink.write(f.t, &f.values)?;
    }
    sink.finish()
}
