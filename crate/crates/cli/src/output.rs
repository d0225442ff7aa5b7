//! Text artifacts: CSV tables with header rows and the key-value summary.
//! Floats are written with shortest round-trip formatting, so identical
//! configs produce bit-identical files.

use perifrac::diagnostics::{
    balance_residual, ConcentrationReport, EnergyReport, UnstableLevel,
    UnstableReport,
};
use perifrac::dynamics::{Observer, State};
use perifrac::lattice::ParticleGrid;
use perifrac::reference::{GammaReport, SweepReport, WaveSolution};
use perifrac::{Error, Result};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

fn cannot_write(path: &Path, e: std::io::Error) -> Error {
    Error::invalid(format!("cannot write {}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| cannot_write(path, e))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| cannot_write(&path, e))?;
    Ok(path)
}

/// energy.csv: one row per record, grouped by horizon so a sweep fits the
/// same table as a single run. The residual column is recomputed over each
/// group's trajectory.
pub fn write_energy(
    dir: &Path,
    groups: &[(f64, &[EnergyReport])],
) -> Result<PathBuf> {
    let path = dir.join("energy.csv");
    let mut w = create(&path)?;
    (|| {
        writeln!(
            w,
            "horizon,t,kinetic,pd,work,epd,work_rate,balance_residual"
        )?;
        for (eps, reports) in groups {
            let resid = balance_residual(reports);
            for (r, d) in reports.iter().zip(&resid) {
                writeln!(
                    w,
                    "{eps},{},{},{},{},{},{},{d}",
                    r.t, r.kinetic, r.pd, r.work, r.epd, r.work_rate
                )?;
            }
        }
        w.flush()
    })()
    .map_err(|e| cannot_write(&path, e))?;
    Ok(path)
}

/// Observer that writes snap_<step>.csv at every record: displacement and
/// velocity of the interior particles in index order. I/O errors are
/// stashed and surfaced by `finish`, since observer hooks cannot fail.
pub struct SnapWriter<'a> {
    dir: &'a Path,
    grid: &'a ParticleGrid,
    written: usize,
    err: Option<Error>,
}

impl<'a> SnapWriter<'a> {
    pub fn new(dir: &'a Path, grid: &'a ParticleGrid) -> Self {
        SnapWriter { dir, grid, written: 0, err: None }
    }

    fn write_snap(&mut self, step: usize, state: &State) -> Result<()> {
        let path = self.dir.join(format!("snap_{step}.csv"));
        let mut w = create(&path)?;
        (|| {
            writeln!(w, "x,y,u,v")?;
            for i in 0..self.grid.len() {
                if !self.grid.interior[i] {
                    continue;
                }
                let p = self.grid.positions[i];
                writeln!(w, "{},{},{},{}", p.x, p.y, state.u[i], state.v[i])?;
            }
            w.flush()
        })()
        .map_err(|e| cannot_write(&path, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<usize> {
        match self.err {
            Some(e) => Err(e),
            None => Ok(self.written),
        }
    }
}

impl Observer for SnapWriter<'_> {
    fn on_record(&mut self, step: usize, state: &State, _: &EnergyReport) {
        if self.err.is_some() {
            return;
        }
        if let Err(e) = self.write_snap(step, state) {
            self.err = Some(e);
        }
    }
}

/// unstable_<eps>.csv: position and supercritical bond fraction of every
/// flagged particle. Positions are rebuilt from the lattice level so sweep
/// results, whose grids are gone, share the run code path.
pub fn write_unstable(
    dir: &Path,
    rep: &UnstableReport,
    level: &UnstableLevel,
) -> Result<PathBuf> {
    let path = dir.join(format!("unstable_{}.csv", rep.horizon));
    let mut w = create(&path)?;
    (|| {
        writeln!(w, "x,y,fraction")?;
        for ((_, frac), (cx, cy)) in rep.flagged.iter().zip(&level.coords) {
            let x = level.origin.x + (*cx as f64 + 0.5) * level.cell;
            let y = level.origin.y + (*cy as f64 + 0.5) * level.cell;
            writeln!(w, "{x},{y},{frac}")?;
        }
        w.flush()
    })()
    .map_err(|e| cannot_write(&path, e))?;
    Ok(path)
}

pub fn write_concentration(
    dir: &Path,
    rep: &ConcentrationReport,
) -> Result<PathBuf> {
    let path = dir.join("concentration.csv");
    let mut w = create(&path)?;
    (|| {
        writeln!(w, "delta,measure,sqrt_ratio")?;
        for k in 0..rep.deltas.len() {
            writeln!(
                w,
                "{},{},{}",
                rep.deltas[k], rep.measures[k], rep.sqrt_ratios[k]
            )?;
        }
        w.flush()
    })()
    .map_err(|e| cannot_write(&path, e))?;
    Ok(path)
}

/// snap_<k>.csv per captured sample of the reference solve: the vertex grid
/// with its displacement, row-major with x fastest.
pub fn write_wave_snapshots(dir: &Path, sol: &WaveSolution) -> Result<usize> {
    for (k, field) in sol.fields.iter().enumerate() {
        let path = dir.join(format!("snap_{k}.csv"));
        let mut w = create(&path)?;
        (|| {
            writeln!(w, "x,y,u")?;
            for j in 0..=sol.ny {
                for i in 0..=sol.nx {
                    let x = sol.bounds.x0 + i as f64 * sol.spacing;
                    let y = sol.bounds.y0 + j as f64 * sol.spacing;
                    writeln!(w, "{x},{y},{}", field[j * (sol.nx + 1) + i])?;
                }
            }
            w.flush()
        })()
        .map_err(|e| cannot_write(&path, e))?;
    }
    Ok(sol.fields.len())
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Per-horizon table plus key-value lines, one pass/fail per assertion:
/// all sub-runs finished, errors strictly decreasing (ties allowed only at
/// zero), and sup |u| within 10x the initial sup when that is nonzero.
pub fn render_sweep_summary(
    rep: &SweepReport,
    init_sup: f64,
    exponent: Option<f64>,
) -> String {
    let mut s = String::new();
    s += "horizon,spacing,dt,steps,max_error,sup_u,flagged,measure\n";
    for r in &rep.reports {
        s += &format!(
            "{},{},{},{},{},{},{},{}\n",
            r.horizon,
            r.spacing,
            r.dt,
            r.steps,
            r.max_error,
            r.sup_u,
            r.unstable.flagged.len(),
            r.unstable.measure
        );
    }
    s += &format!("ref_norm={}\n", rep.ref_norm);
    s += &format!("init_sup={init_sup}\n");
    if let Some(w) = rep.omega_target {
        s += &format!("omega_target={w}\n");
    }
    if let Some(w) = rep.omega_measured {
        s += &format!("omega_measured={w}\n");
    }
    if let Some(x) = exponent {
        s += &format!("concentration_exponent={x}\n");
    }
    for (eps, err) in &rep.failures {
        s += &format!("failure_{eps}={err}\n");
    }
    let decreasing = rep.reports.len() >= 2
        && rep.reports.windows(2).all(|w| {
            w[1].max_error < w[0].max_error
                || (w[0].max_error == 0.0 && w[1].max_error == 0.0)
        });
    s += &format!("assert.complete={}\n", pass_fail(rep.complete));
    s += &format!("assert.errors_decreasing={}\n", pass_fail(decreasing));
    let sup = if init_sup > 0.0 {
        pass_fail(rep.reports.iter().all(|r| r.sup_u <= 10.0 * init_sup))
    } else {
        "skip"
    };
    s += &format!("assert.sup_bounded={sup}\n");
    s
}

/// Static energies per horizon against the limit functional, then the
/// upper-bound and trend assertions over the rows.
pub fn render_gamma_summary(rep: &GammaReport) -> String {
    let mut s = String::new();
    s += "horizon,pd,target,rel_err\n";
    for r in &rep.rows {
        s += &format!("{},{},{},{}\n", r.horizon, r.pd, r.target, r.rel_err);
    }
    let upper = rep.rows.iter().all(|r| {
        r.pd <= r.target + 1e-9 * r.target.abs() + 1e-12
    });
    let trend = rep.rows.len() < 2
        || rep.rows.windows(2).all(|w| {
            w[1].rel_err.abs() <= w[0].rel_err.abs() + 1e-15
        });
    s += &format!("assert.upper_bound={}\n", pass_fail(upper));
    s += &format!("assert.trend_decreasing={}\n", pass_fail(trend));
    s
}
