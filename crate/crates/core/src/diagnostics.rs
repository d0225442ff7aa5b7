//! Read-only probes of a state: energy accounting, bond-instability
//! fractions, unstable-neighborhood centroid sets and their concentration
//! across a horizon sweep, and the elastic/fracture energy of explicitly
//! parameterized comparison fields.

use std::collections::HashSet;

use crate::dynamics::{BodyForce, CrackSegment, ModelSpec, State};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::kernels::{bond_potential_density, critical_stretch, Calibration};
use crate::lattice::{NeighborTable, ParticleGrid};
use crate::pairwise_sum;

/// Energy snapshot at one instant. `epd = kinetic + pd - work` is the
/// quantity conserved (up to the residual) along an evolution;
/// `balance_residual` is filled in over a trajectory and is zero for a
/// standalone report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub pd: f64,
    pub work: f64,
    pub epd: f64,
    /// Instantaneous integrand of the balance correction, integral of
    /// (d/dt b) * u over the domain.
    pub work_rate: f64,
    pub balance_residual: f64,
}

/// Bond energy, kinetic energy, and body-force work of one state.
///
/// pd is the double sum h^4 * sum_x sum_y W(u(y) - u(x)) over interior
/// centers x and their full neighborhoods, the midpoint quadrature of the
/// energy double integral. Panics if the table is not complete or the
/// dimensions disagree (programmer error, not input validation).
pub fn energy_report(
    state: &State,
    grid: &ParticleGrid,
    table: &NeighborTable,
    model: &ModelSpec,
    forcing: &BodyForce,
) -> EnergyReport {
    assert!(table.complete, "energy accounting needs every interior row");
    assert_eq!(state.u.len(), grid.len());
    assert_eq!(state.v.len(), grid.len());
    let eps = model.domain.horizon;
    let h2 = grid.cell_area();
    let bounds = model.domain.bounds;
    let pot = &model.potential;

    let mut pd_rows = Vec::with_capacity(table.row_count());
    for (c, row) in table.iter_rows() {
        let uc = state.u[c as usize];
        let mut acc = 0.0;
        for e in row {
            let eta = state.u[e.index as usize] - uc;
            acc += bond_potential_density(
                pot, e.influence, eps, e.xi_norm, eta,
            );
        }
        pd_rows.push(acc);
    }
    let pd = h2 * h2 * pairwise_sum(&pd_rows);

    let mut kin_terms = Vec::with_capacity(table.row_count());
    let mut work_terms = Vec::with_capacity(table.row_count());
    let mut rate_terms = Vec::with_capacity(table.row_count());
    for i in 0..grid.len() {
        if !grid.interior[i] {
            continue;
        }
        let v = state.v[i];
        kin_terms.push(v * v);
        if !forcing.is_zero() {
            let p = grid.positions[i];
            let b = forcing.eval(&bounds, p, state.t);
            let bt = forcing.eval_dt(&bounds, p, state.t);
            work_terms.push(b * state.u[i]);
            rate_terms.push(bt * state.u[i]);
        }
    }
    let kinetic = 0.5 * model.rho * h2 * pairwise_sum(&kin_terms);
    let work = h2 * pairwise_sum(&work_terms);
    let work_rate = h2 * pairwise_sum(&rate_terms);

    EnergyReport {
        t: state.t,
        kinetic,
        pd,
        work,
        epd: kinetic + pd - work,
        work_rate,
        balance_residual: 0.0,
    }
}

/// Energy-balance defect at each record:
/// epd(t) - epd(0) + integral_0^t of work_rate, trapezoid over the records.
/// Zero for the exact flow; O(dt^2) for velocity Verlet.
pub fn balance_residual(reports: &[EnergyReport]) -> Vec<f64> {
    let mut out = Vec::with_capacity(reports.len());
    if reports.is_empty() {
        return out;
    }
    let epd0 = reports[0].epd;
    let mut acc = 0.0;
    out.push(0.0);
    for w in reports.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (w[1].work_rate + w[0].work_rate);
        out.push(w[1].epd - epd0 + acc);
    }
    out
}

/// Ceiling on pd from the bounded profile: every bond's energy density is at
/// most f_inf J / eps^3, which integrates to
/// (f_inf / eps) * |D| * 2 pi * (first moment of J), up to O(h) quadrature.
pub fn saturation_ceiling(model: &ModelSpec) -> f64 {
    let m1 = model.influence.first_moment();
    model.potential.f_inf / model.domain.horizon
        * model.domain.bounds.area()
        * 2.0
        * std::f64::consts::PI
        * m1
}

/// Weighted fraction of particle x's bonds stretched past critical:
///
///   P(x) = sum_{|eta| > eta_bar} xi J(xi) / sum_all xi J(xi),
///
/// with eta_bar = sqrt(|y - x|) * r_bar. Equals 0 on the undeformed state
/// and exactly 1 when every bond is supercritical. Panics if the table has
/// no row for x.
pub fn unstable_fraction(
    state: &State,
    table: &NeighborTable,
    model: &ModelSpec,
    x: u32,
) -> f64 {
    let row = table
        .neighbors(x)
        .expect("unstable_fraction requires a table row for x");
    let eps = model.domain.horizon;
    let pot = &model.potential;
    let uc = state.u[x as usize];
    let mut num = Vec::with_capacity(row.len());
    let mut den = Vec::with_capacity(row.len());
    for e in row {
        let w = e.xi_norm * e.influence;
        let eta = state.u[e.index as usize] - uc;
        let eta_bar = critical_stretch(pot, eps, e.xi_norm);
        num.push(if eta.abs() > eta_bar { w } else { 0.0 });
        den.push(w);
    }
    pairwise_sum(&num) / pairwise_sum(&den)
}

/// Interior particles whose neighborhoods are unstable at one instant:
/// those with P(x) > sqrt(eps).
#[derive(Debug, Clone)]
pub struct UnstableReport {
    pub t: f64,
    pub horizon: f64,
    /// Flagging threshold, sqrt(horizon).
    pub threshold: f64,
    /// (particle, P) for every flagged particle, in table row order.
    pub flagged: Vec<(u32, f64)>,
    /// cell_area * flagged count.
    pub measure: f64,
}

pub fn unstable_centroids(
    state: &State,
    table: &NeighborTable,
    model: &ModelSpec,
) -> UnstableReport {
    let eps = model.domain.horizon;
    let threshold = eps.sqrt();
    let mut flagged = Vec::new();
    for (c, _) in table.iter_rows() {
        let p = unstable_fraction(state, table, model, c);
        if p > threshold {
            flagged.push((c, p));
        }
    }
    let h = model.domain.spacing;
    let measure = h * h * flagged.len() as f64;
    UnstableReport { t: state.t, horizon: eps, threshold, flagged, measure }
}

/// One horizon level of a concentration analysis: the flagged cells of an
/// unstable-centroid report, in lattice coordinates of its own grid.
#[derive(Debug, Clone)]
pub struct UnstableLevel {
    pub horizon: f64,
    pub cell: f64,
    pub origin: Vec2,
    pub coords: Vec<(i32, i32)>,
}

impl UnstableLevel {
    pub fn from_report(
        grid: &ParticleGrid,
        report: &UnstableReport,
    ) -> UnstableLevel {
        UnstableLevel {
            horizon: report.horizon,
            cell: grid.spec.spacing,
            origin: Vec2::new(grid.spec.bounds.x0, grid.spec.bounds.y0),
            coords: report
                .flagged
                .iter()
                .map(|&(i, _)| grid.coords[i as usize])
                .collect(),
        }
    }
}

/// Measures of the union sets C_delta = union of levels with horizon < delta,
/// rasterized onto the finest level's grid. Deltas are reported ascending;
/// the union construction makes the sets nested by construction.
#[derive(Debug, Clone)]
pub struct ConcentrationReport {
    pub deltas: Vec<f64>,
    pub measures: Vec<f64>,
    /// measure / sqrt(delta), the boundedness diagnostic.
    pub sqrt_ratios: Vec<f64>,
    /// Least-squares slope of log measure vs log delta over nonempty levels;
    /// None when fewer than two distinct deltas have nonempty sets.
    pub exponent: Option<f64>,
    /// Fine-grid cells of C_delta per delta, sorted; exposes the exact sets
    /// so callers can assert inclusion.
    pub cells: Vec<Vec<(i64, i64)>>,
}

/// Rasterizes one coarse cell onto the fine partition by cell-center
/// containment: fine cell k is covered when its center falls in
/// [i*ratio - 0.5, (i+1)*ratio - 0.5) along each axis.
fn raster_range(i: i32, ratio: f64) -> (i64, i64) {
    let lo = (i as f64 * ratio - 0.5 - 1e-9).ceil() as i64;
    let hi = ((i as f64 + 1.0) * ratio - 0.5 - 1e-9).ceil() as i64;
    (lo, hi)
}

pub fn concentration_measure(
    levels: &[UnstableLevel],
    deltas: &[f64],
) -> Result<ConcentrationReport> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d.is_finite() && d > 0.0))
    {
        return Err(Error::invalid(
            "concentration deltas must be positive and finite",
        ));
    }
    let max_delta = deltas.iter().cloned().fold(f64::MIN, f64::max);
    let mut eps_seen: Vec<f64> = levels
        .iter()
        .map(|l| l.horizon)
        .filter(|&e| e < max_delta)
        .collect();
    eps_seen.sort_by(f64::total_cmp);
    eps_seen.dedup();
    if eps_seen.len() < 3 {
        return Err(Error::invalid(format!(
            "concentration analysis needs at least 3 distinct horizons below \
             the largest delta, got {}",
            eps_seen.len()
        )));
    }
    let finest = levels
        .iter()
        .map(|l| l.cell)
        .fold(f64::INFINITY, f64::min);
    if !(finest.is_finite() && finest > 0.0) {
        return Err(Error::invalid("level cell sizes must be positive"));
    }
    let origin = levels[0].origin;
    for l in levels {
        if (l.origin - origin).norm() > 1e-12 {
            return Err(Error::invalid(
                "concentration levels must share a common grid origin",
            ));
        }
    }

    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].horizon.total_cmp(&levels[b].horizon));
    let mut sorted_deltas = deltas.to_vec();
    sorted_deltas.sort_by(f64::total_cmp);

    let mut union: HashSet<(i64, i64)> = HashSet::new();
    let mut next_level = 0;
    let mut measures = Vec::with_capacity(sorted_deltas.len());
    let mut cells = Vec::with_capacity(sorted_deltas.len());
    for &delta in &sorted_deltas {
        while next_level < order.len()
            && levels[order[next_level]].horizon < delta
        {
            let l = &levels[order[next_level]];
            let ratio = l.cell / finest;
            for &(ix, iy) in &l.coords {
                let (x0, x1) = raster_range(ix, ratio);
                let (y0, y1) = raster_range(iy, ratio);
                for ky in y0..y1 {
                    for kx in x0..x1 {
                        union.insert((kx, ky));
                    }
                }
            }
            next_level += 1;
        }
        measures.push(finest * finest * union.len() as f64);
        let mut snapshot: Vec<(i64, i64)> = union.iter().cloned().collect();
        snapshot.sort_unstable();
        cells.push(snapshot);
    }

    let sqrt_ratios: Vec<f64> = sorted_deltas
        .iter()
        .zip(&measures)
        .map(|(&d, &m)| m / d.sqrt())
        .collect();

    let pts: Vec<(f64, f64)> = sorted_deltas
        .iter()
        .zip(&measures)
        .filter(|&(_, &m)| m > 0.0)
        .map(|(&d, &m)| (d.ln(), m.ln()))
        .collect();
    let exponent = fit_slope(&pts);

    Ok(ConcentrationReport {
        deltas: sorted_deltas,
        measures,
        sqrt_ratios,
        exponent,
        cells,
    })
}

pub(crate) fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Elastic plus fracture energy of an explicitly parameterized field:
/// mu * integral of |grad|^2 over the domain (midpoint quadrature of the
/// supplied analytic gradient) plus G_c times the total crack length.
/// Collinear segments with overlapping spans would double-count length and
/// are rejected.
pub fn lefm_energy(
    grid: &ParticleGrid,
    grad: impl Fn(Vec2) -> Vec2,
    cracks: &[CrackSegment],
    calib: &Calibration,
) -> Result<f64> {
    for i in 0..cracks.len() {
        for j in (i + 1)..cracks.len() {
            if segments_overlap(&cracks[i], &cracks[j]) {
                return Err(Error::invalid(format!(
                    "crack segments {i} and {j} overlap along a common line"
                )));
            }
        }
    }
    let mut bulk_terms = Vec::new();
    for i in 0..grid.len() {
        if grid.interior[i] {
            bulk_terms.push(grad(grid.positions[i]).norm_sq());
        }
    }
    let bulk = calib.mu * grid.cell_area() * pairwise_sum(&bulk_terms);
    let surface: f64 =
        calib.gc * cracks.iter().map(|c| c.seg.length()).sum::<f64>();
    Ok(bulk + surface)
}

fn segments_overlap(a: &CrackSegment, b: &CrackSegment) -> bool {
    let la = a.seg.length();
    let scale = la.max(b.seg.length());
    // Collinear iff both endpoints of b sit on a's supporting line.
    if a.seg.side(b.seg.a).abs() > 1e-9 * la * scale
        || a.seg.side(b.seg.b).abs() > 1e-9 * la * scale
    {
        return false;
    }
    let t0 = a.seg.project_param(b.seg.a);
    let t1 = a.seg.project_param(b.seg.b);
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    (hi.min(1.0) - lo.max(0.0)) * la > 1e-9 * scale
}
