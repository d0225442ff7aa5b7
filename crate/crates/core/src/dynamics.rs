//! Initial data, force assembly, and the explicit time integrator.
//!
//! The semidiscrete equation of motion at an interior particle x is
//!
//!   rho * u_tt(x) = F(x) + b(t, x),
//!
//! where F is minus the gradient of the discrete bond energy with respect to
//! the h^2-weighted inner product. Collar particles are pinned to zero at
//! every step (nonlocal Dirichlet data). Time integration is velocity
//! Verlet, so with b = 0 the discrete energy is conserved to O(dt^2) and the
//! flow is exactly time-reversible.

use crate::diagnostics::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::geom::{Rect, Segment, Vec2};
use crate::kernels::{
    bond_force_density, bond_stiffness_density, InfluenceSpec, PotentialSpec,
};
use crate::lattice::{DomainSpec, NeighborTable, ParticleGrid};
use crate::pairwise_sum;

/// Safety factor applied to the spectral stability estimate.
pub const STABILITY_SAFETY: f64 = 0.5;

/// Physics of one problem: geometry, bond law, influence, density.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub domain: DomainSpec,
    pub potential: PotentialSpec,
    pub influence: InfluenceSpec,
    pub rho: f64,
}

impl ModelSpec {
    pub fn new(
        domain: DomainSpec,
        potential: PotentialSpec,
        influence: InfluenceSpec,
        rho: f64,
    ) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid(format!(
                "mass density must be finite and positive, got {rho}"
            )));
        }
        Ok(ModelSpec { domain, potential, influence, rho })
    }
}

/// Displacement and velocity per particle at time t. Fields are public so
/// diagnostics can be probed on hand-crafted states; the evolution enforces
/// the collar condition itself.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn zero(n: usize) -> State {
        State { t: 0.0, u: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// Smooth field presets for initial data and forcing shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldPreset {
    Zero,
    Uniform { value: f64 },
    /// amplitude * sin(kx pi (x - x0)/W) * sin(ky pi (y - y0)/H):
    /// a Dirichlet eigenmode of the rectangle.
    Mode { amplitude: f64, kx: u32, ky: u32 },
}

impl FieldPreset {
    pub fn eval(&self, bounds: &Rect, p: Vec2) -> f64 {
        match *self {
            FieldPreset::Zero => 0.0,
            FieldPreset::Uniform { value } => value,
            FieldPreset::Mode { amplitude, kx, ky } => {
                amplitude
                    * mode_shape(bounds, kx, ky, p)
            }
        }
    }

    /// Analytic gradient of the preset; zero for the piecewise-constant
    /// presets.
    pub fn gradient(&self, bounds: &Rect, p: Vec2) -> Vec2 {
        match *self {
            FieldPreset::Zero | FieldPreset::Uniform { .. } => {
                Vec2::new(0.0, 0.0)
            }
            FieldPreset::Mode { amplitude, kx, ky } => {
                mode_shape_gradient(bounds, kx, ky, p) * amplitude
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            FieldPreset::Zero => Ok(()),
            FieldPreset::Uniform { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("uniform preset value must be finite"))
                }
            }
            FieldPreset::Mode { amplitude, kx, ky } => {
                if !amplitude.is_finite() {
                    return Err(Error::invalid(
                        "mode preset amplitude must be finite",
                    ));
                }
                if kx == 0 || ky == 0 {
                    return Err(Error::invalid(
                        "mode preset indices must be at least 1",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Dirichlet eigenmode of the rectangle, unit amplitude.
pub fn mode_shape(bounds: &Rect, kx: u32, ky: u32, p: Vec2) -> f64 {
    let sx = (kx as f64 * std::f64::consts::PI * (p.x - bounds.x0)
        / bounds.width())
    .sin();
    let sy = (ky as f64 * std::f64::consts::PI * (p.y - bounds.y0)
        / bounds.height())
    .sin();
    sx * sy
}

/// Gradient of [`mode_shape`].
pub fn mode_shape_gradient(bounds: &Rect, kx: u32, ky: u32, p: Vec2) -> Vec2 {
    let ax = kx as f64 * std::f64::consts::PI / bounds.width();
    let ay = ky as f64 * std::f64::consts::PI / bounds.height();
    let tx = ax * (p.x - bounds.x0);
    let ty = ay * (p.y - bounds.y0);
    Vec2::new(ax * tx.cos() * ty.sin(), ay * tx.sin() * ty.cos())
}

/// Straight crack: a displacement jump of the given height across the
/// segment, split evenly between the two sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackSegment {
    pub seg: Segment,
    pub jump: f64,
}

impl CrackSegment {
    fn validate(&self, bounds: &Rect) -> Result<()> {
        if !(self.jump.is_finite()) {
            return Err(Error::invalid("crack jump height must be finite"));
        }
        if !(self.seg.length() > 0.0 && self.seg.length().is_finite()) {
            return Err(Error::invalid("crack segment must have positive length"));
        }
        if !bounds.contains_strict(self.seg.a)
            || !bounds.contains_strict(self.seg.b)
        {
            return Err(Error::invalid(
                "crack endpoints must lie strictly inside the domain \
                 (cracks may not touch the collar)",
            ));
        }
        Ok(())
    }

    /// Jump contribution at p: +-jump/2 on either side of the segment line,
    /// inside the perpendicular band of the segment; zero on the line itself
    /// and outside the band.
    fn offset(&self, p: Vec2) -> f64 {
        let t = self.seg.project_param(p);
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let s = self.seg.side(p);
        if s > 0.0 {
            0.5 * self.jump
        } else if s < 0.0 {
            -0.5 * self.jump
        } else {
            0.0
        }
    }
}

/// Builds the initial state: smooth preset plus crack jumps for u, preset
/// for v, zero on the collar.
pub fn make_initial_data(
    grid: &ParticleGrid,
    u0: &FieldPreset,
    v0: &FieldPreset,
    cracks: &[CrackSegment],
) -> Result<State> {
    u0.validate()?;
    v0.validate()?;
    let bounds = grid.spec.bounds;
    for c in cracks {
        c.validate(&bounds)?;
    }
    let mut state = State::zero(grid.len());
    for i in 0..grid.len() {
        if !grid.interior[i] {
            continue;
        }
        let p = grid.positions[i];
        let mut u = u0.eval(&bounds, p);
        for c in cracks {
            u += c.offset(p);
        }
        state.u[i] = u;
        state.v[i] = v0.eval(&bounds, p);
    }
    Ok(state)
}

/// Body force density b(t, x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyForce {
    Zero,
    /// Constant in time and space.
    Uniform { amplitude: f64 },
    /// amplitude * mode_shape(kx, ky) * cos(omega t).
    Mode { amplitude: f64, kx: u32, ky: u32, omega: f64 },
}

impl BodyForce {
    pub fn is_zero(&self) -> bool {
        matches!(self, BodyForce::Zero)
    }

    pub fn eval(&self, bounds: &Rect, p: Vec2, t: f64) -> f64 {
        match *self {
            BodyForce::Zero => 0.0,
            BodyForce::Uniform { amplitude } => amplitude,
            BodyForce::Mode { amplitude, kx, ky, omega } => {
                amplitude * mode_shape(bounds, kx, ky, p) * (omega * t).cos()
            }
        }
    }

    /// Time derivative of b at fixed x; drives the energy-balance residual.
    pub fn eval_dt(&self, bounds: &Rect, p: Vec2, t: f64) -> f64 {
        match *self {
            BodyForce::Zero | BodyForce::Uniform { .. } => 0.0,
            BodyForce::Mode { amplitude, kx, ky, omega } => {
                -amplitude
                    * omega
                    * mode_shape(bounds, kx, ky, p)
                    * (omega * t).sin()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BodyForce::Zero => Ok(()),
            BodyForce::Uniform { amplitude } => {
                if amplitude.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("body force amplitude must be finite"))
                }
            }
            BodyForce::Mode { amplitude, omega, kx, ky } => {
                if !(amplitude.is_finite() && omega.is_finite()) {
                    return Err(Error::invalid(
                        "body force amplitude and frequency must be finite",
                    ));
                }
                if kx == 0 || ky == 0 {
                    return Err(Error::invalid(
                        "body force mode indices must be at least 1",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Bond force density summed over each interior particle's neighborhood:
///
///   F(x) = h^2 * sum_y kappa_y * dW/d(eta)(u(y) - u(x)),
///
/// kappa_y = 2 for interior y, 1 for collar y. This is exactly minus the
/// gradient of the discrete bond energy in the h^2-weighted inner product
/// (the doubled interior weight accounts for the bond appearing in both
/// particles' neighborhoods), and for smooth u it converges to
/// 2 mu * div grad u in the bulk. Collar entries of `out` are set to zero.
pub fn assemble_force(
    u: &[f64],
    grid: &ParticleGrid,
    table: &NeighborTable,
    model: &ModelSpec,
    out: &mut [f64],
) -> Result<()> {
    if !table.complete {
        return Err(Error::invalid(
            "force assembly requires a neighbor table covering every \
             interior particle",
        ));
    }
    if u.len() != grid.len() || out.len() != grid.len() {
        return Err(Error::invalid(format!(
            "field length {} does not match particle count {}",
            u.len(),
            grid.len()
        )));
    }
    if grid.spec != model.domain {
        return Err(Error::invalid(
            "particle grid was built for a different domain than the model",
        ));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric {
            what: "non-finite displacement passed to force assembly".into(),
            residual: 0.0,
        });
    }
    let eps = model.domain.horizon;
    let h2 = grid.cell_area();
    let pot = &model.potential;
    out.fill(0.0);
    for (c, row) in table.iter_rows() {
        let uc = u[c as usize];
        let mut acc = 0.0;
        for e in row {
            let eta = u[e.index as usize] - uc;
            let kappa = if grid.interior[e.index as usize] { 2.0 } else { 1.0 };
            acc += kappa
                * bond_force_density(pot, e.influence, eps, e.xi_norm, eta);
        }
        out[c as usize] = h2 * acc;
    }
    Ok(())
}

/// Largest stable time step of velocity Verlet on the linearization at
/// u = 0, times the safety factor: dt = safety * 2 / sqrt(L / rho), with L
/// the maximum absolute row sum of the stiffness matrix over the table's
/// rows (Gershgorin bound on the spectrum).
pub fn stable_dt(
    grid: &ParticleGrid,
    table: &NeighborTable,
    model: &ModelSpec,
) -> f64 {
    let eps = model.domain.horizon;
    let h2 = grid.cell_area();
    let pot = &model.potential;
    let mut l_max: f64 = 0.0;
    for (_, row) in table.iter_rows() {
        // Diagonal magnitude sum(kappa k) plus off-diagonal sum over
        // interior neighbors 2k; bonds to the collar damp the diagonal only.
        let mut diag = 0.0;
        let mut off = 0.0;
        for e in row {
            let k = bond_stiffness_density(
                pot, e.influence, eps, e.xi_norm, 0.0,
            );
            if grid.interior[e.index as usize] {
                diag += 2.0 * k;
                off += 2.0 * k;
            } else {
                diag += k;
            }
        }
        l_max = l_max.max(h2 * (diag + off));
    }
    STABILITY_SAFETY * 2.0 / (l_max / model.rho).sqrt()
}

/// Per-step hooks for a run. `on_step` fires after every completed step;
/// `on_record` fires at the observer stride with the energy report.
pub trait Observer {
    fn on_step(&mut self, _step: usize, _state: &State) {}
    fn on_record(
        &mut self,
        _step: usize,
        _state: &State,
        _report: &EnergyReport,
    ) {
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {}

/// Time-integration parameters. `stride` is the recording interval in steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
}

impl RunConfig {
    pub fn new(dt: f64, t_final: f64, stride: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!(
                "time step must be finite and positive, got {dt}"
            )));
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::invalid(format!(
                "final time must be finite and nonnegative, got {t_final}"
            )));
        }
        if stride == 0 {
            return Err(Error::invalid("observer stride must be at least 1"));
        }
        Ok(RunConfig { dt, t_final, stride })
    }
}

/// Energy reports collected at the observer stride.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    pub reports: Vec<EnergyReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: State,
    pub steps: usize,
    pub log: TrajectoryLog,
}

/// Advances the state from t = 0 to t_final with velocity Verlet.
///
/// Records (energy report + observer callback) happen at steps divisible by
/// the stride, giving floor(t_final / (stride * dt)) + 1 records. Throughout
/// the run the total energy is held to the a-priori bound
///
///   kinetic + pd <= 2 * exp(t) * (E(0) + (1/(2 rho)) * int_0^t ||b||^2),
///
/// where E(0) is the initial total energy. When dt is within the stability
/// limit a breach is an assertion failure (the scheme was trusted and the
/// physics went wrong); with an oversized dt the same breach is reported as
/// a numerical failure naming the step at which the integration diverged,
/// since the bond force is bounded and an unstable scheme grows the energy
/// without ever overflowing to infinity. Non-finite fields abort either way.
pub fn run(
    grid: &ParticleGrid,
    table: &NeighborTable,
    model: &ModelSpec,
    mut state: State,
    forcing: &BodyForce,
    cfg: &RunConfig,
    obs: &mut dyn Observer,
) -> Result<RunOutcome> {
    let n = grid.len();
    if state.u.len() != n || state.v.len() != n {
        return Err(Error::invalid(format!(
            "state length {} does not match particle count {}",
            state.u.len(),
            n
        )));
    }
    forcing.validate()?;
    for i in 0..n {
        if !grid.interior[i] {
            state.u[i] = 0.0;
            state.v[i] = 0.0;
        }
    }
    if state
        .u
        .iter()
        .chain(state.v.iter())
        .any(|x| !x.is_finite())
    {
        return Err(Error::Numeric {
            what: "non-finite initial state".into(),
            residual: 0.0,
        });
    }
    state.t = 0.0;

    let dt = cfg.dt;
    let rho = model.rho;
    let bounds = model.domain.bounds;
    let h2 = grid.cell_area();
    let n_steps = (cfg.t_final / dt * (1.0 + 1e-9)).floor() as usize;
    let stable = stable_dt(grid, table, model);
    let trusted = dt <= stable * (1.0 + 1e-12);

    let interior = grid.interior_indices();
    let mut force = vec![0.0; n];
    let mut b_now = vec![0.0; n];
    let mut scratch = vec![0.0; interior.len()];
    let zero_b = forcing.is_zero();

    let fill_body = |buf: &mut Vec<f64>, t: f64| {
        for &i in &interior {
            buf[i as usize] =
                forcing.eval(&bounds, grid.positions[i as usize], t);
        }
    };
    if !zero_b {
        fill_body(&mut b_now, 0.0);
    }
    assemble_force(&state.u, grid, table, model, &mut force)?;

    let mut report = energy_report(&state, grid, table, model, forcing);
    let e0 = report.kinetic + report.pd;
    let epd0 = report.epd;
    report.balance_residual = 0.0;
    let mut log = TrajectoryLog { reports: vec![report] };
    obs.on_record(0, &state, &log.reports[0]);
    let mut prev_rec_t = 0.0;
    let mut prev_rec_rate = log.reports[0].work_rate;
    let mut rate_integral = 0.0;

    // Running trapezoid of the squared L2 norm of b, for the energy bound.
    let mut body_integral = 0.0;
    let mut body_norm_prev = if zero_b {
        0.0
    } else {
        for (j, &i) in interior.iter().enumerate() {
            scratch[j] = b_now[i as usize] * b_now[i as usize];
        }
        h2 * pairwise_sum(&scratch)
    };

    let half = 0.5 * dt;
    for k in 1..=n_steps {
        for &i in &interior {
            let i = i as usize;
            state.v[i] += half * (force[i] + b_now[i]) / rho;
            state.u[i] += dt * state.v[i];
        }
        state.t = k as f64 * dt;
        if !zero_b {
            fill_body(&mut b_now, state.t);
        }
        assemble_force(&state.u, grid, table, model, &mut force)?;
        for &i in &interior {
            let i = i as usize;
            state.v[i] += half * (force[i] + b_now[i]) / rho;
        }

        for &i in &interior {
            let i = i as usize;
            if !(state.u[i].is_finite() && state.v[i].is_finite()) {
                return Err(Error::NonFinite { step: k });
            }
        }

        if !zero_b {
            for (j, &i) in interior.iter().enumerate() {
                scratch[j] = b_now[i as usize] * b_now[i as usize];
            }
            let bn = h2 * pairwise_sum(&scratch);
            body_integral += half * (body_norm_prev + bn);
            body_norm_prev = bn;
        }

        let bound = 2.0
            * state.t.exp()
            * (e0 + body_integral / (2.0 * rho));
        for (j, &i) in interior.iter().enumerate() {
            let v = state.v[i as usize];
            scratch[j] = v * v;
        }
        let kinetic = 0.5 * rho * h2 * pairwise_sum(&scratch);
        if kinetic > bound {
            return Err(energy_breach(k, kinetic, bound, dt, stable, trusted));
        }

        obs.on_step(k, &state);

        if k % cfg.stride == 0 {
            let mut rep = energy_report(&state, grid, table, model, forcing);
            let total = rep.kinetic + rep.pd;
            if total > bound {
                return Err(energy_breach(
                    k, total, bound, dt, stable, trusted,
                ));
            }
            rate_integral += 0.5
                * (rep.t - prev_rec_t)
                * (rep.work_rate + prev_rec_rate);
            rep.balance_residual = rep.epd - epd0 + rate_integral;
            prev_rec_t = rep.t;
            prev_rec_rate = rep.work_rate;
            obs.on_record(k, &state, &rep);
            log.reports.push(rep);
        }
    }

    Ok(RunOutcome { state, steps: n_steps, log })
}

fn energy_breach(
    step: usize,
    energy: f64,
    bound: f64,
    dt: f64,
    stable: f64,
    trusted: bool,
) -> Error {
    if trusted {
        Error::EnergyBound { step, energy, bound }
    } else {
        Error::Numeric {
            what: format!(
                "time step {dt:e} exceeds the stability limit {stable:e}; \
                 energy diverged at step {step}"
            ),
            residual: energy - bound,
        }
    }
}
