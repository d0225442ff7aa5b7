//! Directional stability analysis of a state at a particle: the half-disk
//! stiffness coefficient A_nu whose sign change marks the onset of a growing
//! jump across the line through x with tangent nu, and the scan over
//! directions for the most unstable one.

use crate::dynamics::{ModelSpec, State};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::kernels::bond_stiffness_density;
use crate::lattice::{NeighborTable, ParticleGrid};
use crate::pairwise_sum;

/// Half-disk stability coefficient
///
///   A_nu = -(1/2) [ sum_{d.perp(nu) > 0} h^2 W''(u(x+d) - u(x))
///                 + sum_{d.perp(nu) <= 0} h^2 W''(u(x) - u(x-d)) ],
///
/// the midpoint quadrature of the two half-disk integrals of the jump
/// evolution's stiffness. Ties on the split line go to the mirrored set.
/// Entries whose mirrored offset leaves the grid are skipped and the
/// mirrored sum is renormalized by the included influence weight; with the
/// collar at least eps + h wide every mirror of an interior particle exists,
/// so the renormalization is a boundary safeguard, not the common path.
///
/// A_nu < 0 means bond stiffness resists a jump across that line; A_nu > 0
/// means a perturbation jump grows like exp(t sqrt(A_nu / rho)).
pub fn stability_coefficient(
    state: &State,
    grid: &ParticleGrid,
    table: &NeighborTable,
    model: &ModelSpec,
    x: u32,
    nu: Vec2,
) -> Result<f64> {
    if (nu.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "direction must be a unit vector, |nu| = {}",
            nu.norm()
        )));
    }
    let row = table.neighbors(x).ok_or_else(|| {
        Error::invalid("stability point must have a neighbor row")
    })?;
    let eps = model.domain.horizon;
    let h2 = grid.cell_area();
    let pot = &model.potential;
    let perp = nu.perp();
    let (cx, cy) = grid.coords[x as usize];
    let px = grid.positions[x as usize];
    let ux = state.u[x as usize];

    let mut fwd = Vec::with_capacity(row.len());
    let mut bwd = Vec::with_capacity(row.len());
    let mut bwd_weight = Vec::with_capacity(row.len());
    let mut bwd_included = Vec::with_capacity(row.len());
    for e in row {
        let y = e.index as usize;
        let d = grid.positions[y] - px;
        let stiff = |eta: f64| {
            bond_stiffness_density(pot, e.influence, eps, e.xi_norm, eta)
        };
        if d.dot(perp) > 0.0 {
            fwd.push(stiff(state.u[y] - ux));
        } else {
            let (dx, dy) = grid.coords[y];
            let mirror = grid.index_at(2 * cx - dx, 2 * cy - dy);
            let w = e.xi_norm * e.influence;
            bwd_weight.push(w);
            if let Some(m) = mirror {
                bwd.push(stiff(ux - state.u[m as usize]));
                bwd_included.push(w);
            }
        }
    }
    let mut bwd_sum = pairwise_sum(&bwd);
    if bwd.len() != bwd_weight.len() {
        let included = pairwise_sum(&bwd_included);
        if included <= 0.0 {
            return Err(Error::invalid(
                "every mirrored bond of the stability point left the grid",
            ));
        }
        bwd_sum *= pairwise_sum(&bwd_weight) / included;
    }
    Ok(-0.5 * h2 * (pairwise_sum(&fwd) + bwd_sum))
}

/// Directional scan at one particle.
#[derive(Debug, Clone)]
pub struct NucleationResult {
    pub point: Vec2,
    /// Scan angles theta_k = k pi / n_dir (directions and their negatives
    /// split the same line, so half a turn suffices).
    pub thetas: Vec<f64>,
    /// A_nu at each angle.
    pub a: Vec<f64>,
    pub a_star: f64,
    pub theta_star: f64,
    pub nu_star: Vec2,
    pub unstable: bool,
    /// sqrt(A_star / rho) when positive: the linearized jump's growth rate.
    pub growth_rate: Option<f64>,
}

pub const DEFAULT_N_DIR: usize = 64;

pub fn most_unstable_direction(
    state: &State,
    grid: &ParticleGrid,
    table: &NeighborTable,
    model: &ModelSpec,
    x: u32,
    n_dir: usize,
) -> Result<NucleationResult> {
    if n_dir < 8 {
        return Err(Error::invalid(format!(
            "direction scan needs at least 8 angles, got {n_dir}"
        )));
    }
    let mut thetas = Vec::with_capacity(n_dir);
    let mut a = Vec::with_capacity(n_dir);
    let mut best = usize::MAX;
    for k in 0..n_dir {
        let theta = k as f64 * std::f64::consts::PI / n_dir as f64;
        let nu = Vec2::new(theta.cos(), theta.sin());
        let val = stability_coefficient(state, grid, table, model, x, nu)?;
        // Strict comparison keeps the smallest angle on ties.
        if best == usize::MAX || val > a[best] {
            best = k;
        }
        thetas.push(theta);
        a.push(val);
    }
    let a_star = a[best];
    let theta_star = thetas[best];
    Ok(NucleationResult {
        point: grid.positions[x as usize],
        thetas,
        a,
        a_star,
        theta_star,
        nu_star: Vec2::new(theta_star.cos(), theta_star.sin()),
        unstable: a_star > 0.0,
        growth_rate: if a_star > 0.0 {
            Some((a_star / model.rho).sqrt())
        } else {
            None
        },
    })
}
