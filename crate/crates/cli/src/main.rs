//! Antiplane-shear peridynamic fracture driver.
//!
//! One TOML config per invocation, no positional physics parameters; each
//! subcommand reads the sections it needs and writes text tables with
//! header rows into --out. The fully resolved config is echoed next to the
//! outputs, and re-running from the echo reproduces them byte for byte.
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 energy
//! bound breach.

mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{Config, TimeSection};
use perifrac::diagnostics::{
    concentration_measure, unstable_centroids, EnergyReport, UnstableLevel,
};
use perifrac::dynamics::{
    make_initial_data, run, stable_dt, ModelSpec, RunConfig,
};
use perifrac::kernels::calibrate;
use perifrac::lattice::{DomainSpec, NeighborTable, ParticleGrid};
use perifrac::nucleation::most_unstable_direction;
use perifrac::reference::{
    convergence_sweep, gamma_limit_check, wave_solve, GammaField, MediumSpec,
    SweepSpec, WaveConfig,
};
use perifrac::{Error, Result};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "perifrac", version, about = "Antiplane-shear peridynamic \
fracture: explicit bond dynamics, instability diagnostics, and small-horizon \
verification harnesses")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-step one configuration; writes energy.csv, snap_<step>.csv, and
    /// unstable_<eps>.csv.
    Run(Common),
    /// Print the macroscopic shear modulus and fracture toughness of the
    /// configured bond model.
    Calibrate(Common),
    /// Scan jump directions at the [nucleate] probe point and report the
    /// most unstable one.
    Nucleate(Common),
    /// Run the [sweep] horizons against the local wave reference; writes
    /// sweep_summary.txt, energy.csv, unstable_<eps>.csv, concentration.csv.
    Sweep(Common),
    /// Solve the local wave reference alone; writes snap_<k>.csv per sample.
    Wave(Common),
    /// Compare static bond energies against the local limit functional over
    /// the [gamma] horizons; writes sweep_summary.txt.
    Gamma(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweep sub-runs (overrides [sweep] threads).
    #[arg(long)]
    threads: Option<usize>,
    /// Recording interval in steps (overrides [time] stride).
    #[arg(long)]
    stride: Option<usize>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Calibrate(a) => cmd_calibrate(a),
        Cmd::Nucleate(a) => cmd_nucleate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Wave(a) => cmd_wave(a),
        Cmd::Gamma(a) => cmd_gamma(a),
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Error::invalid(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

/// Echoed before any heavy work so a failed run still leaves its exact
/// inputs next to whatever it produced.
fn write_resolved(dir: &Path, cfg: &Config) -> Result<()> {
    let text = toml::to_string_pretty(cfg).map_err(|e| {
        Error::invalid(format!("cannot serialize resolved config: {e}"))
    })?;
    output::write_text(dir, "resolved_config.txt", &text)?;
    Ok(())
}

fn build_medium(
    cfg: &Config,
) -> Result<(ParticleGrid, NeighborTable, ModelSpec)> {
    let domain = DomainSpec::new(
        cfg.bounds(),
        cfg.domain.horizon,
        cfg.domain.spacing,
        cfg.domain.collar,
    )?;
    let grid = ParticleGrid::build(&domain)?;
    let influence = cfg.influence();
    let table = NeighborTable::build(&grid, &influence)?;
    let model = ModelSpec::new(domain, cfg.potential()?, influence, cfg.material.rho)?;
    Ok((grid, table, model))
}

fn medium_spec(cfg: &Config) -> Result<MediumSpec> {
    Ok(MediumSpec {
        bounds: cfg.bounds(),
        m_h: cfg.domain.horizon / cfg.domain.spacing,
        potential: cfg.potential()?,
        influence: cfg.influence(),
        rho: cfg.material.rho,
    })
}

fn require_time(cfg: &Config, cmd: &str) -> Result<TimeSection> {
    cfg.time.ok_or_else(|| {
        Error::invalid(format!("{cmd} needs a [time] section with t_final"))
    })
}

fn cmd_calibrate(a: &Common) -> Result<()> {
    let cfg = config::parse_config(&a.config)?;
    let calib = calibrate(&cfg.potential()?, &cfg.influence());
    println!("mu = {}", calib.mu);
    println!("G_c = {}", calib.gc);
    Ok(())
}

fn cmd_run(a: &Common) -> Result<()> {
    let mut cfg = config::parse_config(&a.config)?;
    let time = require_time(&cfg, "run")?;
    ensure_out(&a.out)?;
    let (grid, table, model) = build_medium(&cfg)?;
    let dt = match time.dt {
        Some(dt) => dt,
        None => 0.5 * stable_dt(&grid, &table, &model),
    };
    let n_est = (time.t_final / dt * (1.0 + 1e-9)).floor() as usize;
    let stride = a
        .stride
        .or(time.stride)
        .unwrap_or_else(|| n_est.div_ceil(10).max(1));
    cfg.time = Some(TimeSection {
        t_final: time.t_final,
        dt: Some(dt),
        stride: Some(stride),
    });
    write_resolved(&a.out, &cfg)?;

    let state =
        make_initial_data(&grid, &cfg.u0(), &cfg.v0(), &cfg.crack_segments())?;
    let run_cfg = RunConfig::new(dt, time.t_final, stride)?;
    let forcing = cfg.body_force();
    let mut snaps = output::SnapWriter::new(&a.out, &grid);
    let outcome =
        run(&grid, &table, &model, state, &forcing, &run_cfg, &mut snaps)?;
    let written = snaps.finish()?;
    output::write_energy(
        &a.out,
        &[(model.domain.horizon, outcome.log.reports.as_slice())],
    )?;
    let survey = unstable_centroids(&outcome.state, &table, &model);
    let level = UnstableLevel::from_report(&grid, &survey);
    output::write_unstable(&a.out, &survey, &level)?;
    println!("steps = {}", outcome.steps);
    println!("dt = {dt}");
    println!("snapshots = {written}");
    println!("flagged = {}", survey.flagged.len());
    println!("measure = {}", survey.measure);
    Ok(())
}

fn cmd_nucleate(a: &Common) -> Result<()> {
    let cfg = config::parse_config(&a.config)?;
    let nuc = cfg.nucleate.ok_or_else(|| {
        Error::invalid("nucleate needs a [nucleate] section with x and y")
    })?;
    ensure_out(&a.out)?;
    write_resolved(&a.out, &cfg)?;
    let (grid, table, model) = build_medium(&cfg)?;
    let state =
        make_initial_data(&grid, &cfg.u0(), &cfg.v0(), &cfg.crack_segments())?;
    let h = grid.spec.spacing;
    let ix = ((nuc.x - grid.spec.bounds.x0) / h - 0.5).round() as i32;
    let iy = ((nuc.y - grid.spec.bounds.y0) / h - 0.5).round() as i32;
    let idx = grid
        .index_at(ix, iy)
        .filter(|&i| grid.interior[i as usize])
        .ok_or_else(|| {
            Error::invalid(format!(
                "nucleate point ({}, {}) does not hit an interior particle",
                nuc.x, nuc.y
            ))
        })?;
    let res =
        most_unstable_direction(&state, &grid, &table, &model, idx, nuc.n_dir)?;
    println!("point = {},{}", res.point.x, res.point.y);
    println!("theta,a");
    for (theta, val) in res.thetas.iter().zip(&res.a) {
        println!("{theta},{val}");
    }
    println!("a_star = {}", res.a_star);
    println!("theta_star = {}", res.theta_star);
    println!("nu_star = {},{}", res.nu_star.x, res.nu_star.y);
    println!("unstable = {}", if res.unstable { "yes" } else { "no" });
    match res.growth_rate {
        Some(g) => println!("growth_rate = {g}"),
        None => println!("growth_rate = none"),
    }
    Ok(())
}

fn cmd_sweep(a: &Common) -> Result<()> {
    let mut cfg = config::parse_config(&a.config)?;
    let sw = cfg.sweep.clone().ok_or_else(|| {
        Error::invalid("sweep needs a [sweep] section with horizons")
    })?;
    let time = require_time(&cfg, "sweep")?;
    let threads = a.threads.unwrap_or(sw.threads);
    ensure_out(&a.out)?;
    cfg.sweep = Some(config::SweepSection { threads, ..sw.clone() });
    write_resolved(&a.out, &cfg)?;

    let spec = SweepSpec {
        medium: medium_spec(&cfg)?,
        horizons: sw.horizons.clone(),
        t_final: time.t_final,
        samples: sw.samples,
        u0: cfg.u0(),
        v0: cfg.v0(),
        forcing: cfg.body_force(),
        cracks: cfg.crack_segments(),
        threads,
    };
    let report = convergence_sweep(&spec)?;

    // Initial sup-norm for the boundedness assertion, off the coarsest grid
    // (the presets and crack jumps set it, so any member of the family do).
    let (coarse_grid, _, _) = spec.medium.build(spec.horizons[0])?;
    let init = make_initial_data(&coarse_grid, &spec.u0, &spec.v0, &spec.cracks)?;
    let init_sup = init.u.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    let groups: Vec<(f64, &[EnergyReport])> = report
        .reports
        .iter()
        .map(|r| (r.horizon, r.energy.as_slice()))
        .collect();
    output::write_energy(&a.out, &groups)?;
    for r in &report.reports {
        output::write_unstable(&a.out, &r.unstable, &r.level)?;
    }
    // delta grid at twice each horizon, so every union set has the three
    // finer-than-delta levels the measure needs.
    let mut exponent = None;
    if report.reports.len() >= 3 {
        let levels: Vec<UnstableLevel> =
            report.reports.iter().map(|r| r.level.clone()).collect();
        let deltas: Vec<f64> =
            report.reports.iter().map(|r| 2.0 * r.horizon).collect();
        let conc = concentration_measure(&levels, &deltas)?;
        output::write_concentration(&a.out, &conc)?;
        exponent = conc.exponent;
    }
    let summary = output::render_sweep_summary(&report, init_sup, exponent);
    output::write_text(&a.out, "sweep_summary.txt", &summary)?;
    print!("{summary}");
    if let Some((eps, err)) = report.failures.first() {
        eprintln!("sweep sub-run at horizon {eps} failed");
        return Err(err.clone());
    }
    Ok(())
}

fn cmd_wave(a: &Common) -> Result<()> {
    let cfg = config::parse_config(&a.config)?;
    let wave = cfg.wave.ok_or_else(|| {
        Error::invalid("wave needs a [wave] section with spacing")
    })?;
    let time = require_time(&cfg, "wave")?;
    ensure_out(&a.out)?;
    write_resolved(&a.out, &cfg)?;
    let calib = calibrate(&cfg.potential()?, &cfg.influence());
    let sol = wave_solve(&WaveConfig {
        rho: cfg.material.rho,
        mu: calib.mu,
        bounds: cfg.bounds(),
        spacing: wave.spacing,
        dt: time.dt,
        t_final: time.t_final,
        samples: wave.samples,
        u0: cfg.u0(),
        v0: cfg.v0(),
        forcing: cfg.body_force(),
    })?;
    let written = output::write_wave_snapshots(&a.out, &sol)?;
    println!("dt = {}", sol.dt);
    println!("snapshots = {written}");
    println!("sample,t,l2");
    for k in 0..sol.times.len() {
        println!("{k},{},{}", sol.times[k], sol.l2_norm(k));
    }
    Ok(())
}

fn cmd_gamma(a: &Common) -> Result<()> {
    let cfg = config::parse_config(&a.config)?;
    let gamma = cfg.gamma.clone().ok_or_else(|| {
        Error::invalid("gamma needs a [gamma] section with horizons")
    })?;
    ensure_out(&a.out)?;
    write_resolved(&a.out, &cfg)?;
    let field =
        GammaField { smooth: cfg.u0(), cracks: cfg.crack_segments() };
    let report =
        gamma_limit_check(&medium_spec(&cfg)?, &field, &gamma.horizons)?;
    let summary = output::render_gamma_summary(&report);
    output::write_text(&a.out, "sweep_summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}
