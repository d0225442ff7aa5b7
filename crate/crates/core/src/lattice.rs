//! Uniform particle lattice over a rectangle with a zero-displacement collar,
//! and the per-particle neighbor tables the dynamics and diagnostics run on.
//!
//! Particles sit at cell centers of a square grid of spacing h. The grid
//! covers the open rectangle D plus a collar of width `collar` around it;
//! collar particles carry boundary data (displacement pinned to zero by the
//! evolution) while interior particles carry degrees of freedom. The collar
//! is at least one horizon plus one cell wide, so every interior particle
//! sees a full horizon disk of neighbors and boundary effects enter only
//! through the pinned values.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use crate::kernels::InfluenceSpec;

/// Geometry of a discretized problem: domain rectangle, horizon radius,
/// lattice spacing, collar width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub bounds: Rect,
    pub horizon: f64,
    pub spacing: f64,
    pub collar: f64,
}

impl DomainSpec {
    /// Validates the geometry. `collar` defaults to (ceil(horizon/spacing) + 2)
    /// cells, a whole number of cells one cell beyond the minimum; an explicit
    /// value must be at least horizon + spacing.
    pub fn new(
        bounds: Rect,
        horizon: f64,
        spacing: f64,
        collar: Option<f64>,
    ) -> Result<Self> {
        let finite = [bounds.x0, bounds.x1, bounds.y0, bounds.y1]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bounds.width() <= 0.0 || bounds.height() <= 0.0 {
            return Err(Error::invalid(format!(
                "domain rectangle must be nonempty, got [{}, {}] x [{}, {}]",
                bounds.x0, bounds.x1, bounds.y0, bounds.y1
            )));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!(
                "lattice spacing must be finite and positive, got {spacing}"
            )));
        }
        if horizon / spacing < 3.0 - 1e-9 {
            return Err(Error::invalid(format!(
                "horizon must span at least 3 cells, got horizon/spacing = {}",
                horizon / spacing
            )));
        }
        if horizon >= bounds.width().min(bounds.height()) {
            return Err(Error::invalid(format!(
                "horizon {horizon} must be smaller than the domain extent"
            )));
        }
        let collar = match collar {
            Some(a) => {
                if !(a.is_finite() && a >= horizon + spacing - 1e-12) {
                    return Err(Error::invalid(format!(
                        "collar width {a} must be at least horizon + spacing = {}",
                        horizon + spacing
                    )));
                }
                a
            }
            None => ((horizon / spacing - 1e-9).ceil() + 2.0) * spacing,
        };
        Ok(DomainSpec { bounds, horizon, spacing, collar })
    }

    /// Cells per horizon, horizon / spacing.
    pub fn ratio(&self) -> f64 {
        self.horizon / self.spacing
    }
}

/// Particle positions and roles on the lattice covering domain + collar.
///
/// `index_map` inverts lattice coordinates to particle indices over the scan
/// box `[ix0, ix0+nx) x [iy0, iy0+ny)`, with `u32::MAX` marking cells whose
/// center falls outside the collar.
#[derive(Debug, Clone)]
pub struct ParticleGrid {
    pub spec: DomainSpec,
    pub positions: Vec<Vec2>,
    /// True for particles strictly inside the domain rectangle.
    pub interior: Vec<bool>,
    pub coords: Vec<(i32, i32)>,
    pub interior_count: usize,
    index_map: Vec<u32>,
    ix0: i32,
    iy0: i32,
    nx: usize,
    ny: usize,
}

impl ParticleGrid {
    pub fn build(spec: &DomainSpec) -> Result<ParticleGrid> {
        let h = spec.spacing;
        let b = spec.bounds;
        // Scan box padded by one cell past the collar; the distance test
        // below decides actual membership.
        let ix0 = (-(spec.collar / h) - 1.5).floor() as i32;
        let ix1 = ((b.width() + spec.collar) / h + 0.5).ceil() as i32;
        let iy0 = ix0;
        let iy1 = ((b.height() + spec.collar) / h + 0.5).ceil() as i32;
        let nx = (ix1 - ix0 + 1) as usize;
        let ny = (iy1 - iy0 + 1) as usize;
        if nx.saturating_mul(ny) > (u32::MAX as usize) / 2 {
            return Err(Error::invalid(
                "lattice too fine: particle count exceeds index range",
            ));
        }

        let mut positions = Vec::new();
        let mut interior = Vec::new();
        let mut coords = Vec::new();
        let mut index_map = vec![u32::MAX; nx * ny];
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let p = Vec2::new(
                    b.x0 + (ix as f64 + 0.5) * h,
                    b.y0 + (iy as f64 + 0.5) * h,
                );
                if b.distance(p) < spec.collar {
                    let idx = positions.len() as u32;
                    index_map[(iy - iy0) as usize * nx + (ix - ix0) as usize] =
                        idx;
                    positions.push(p);
                    interior.push(b.contains_strict(p));
                    coords.push((ix, iy));
                }
            }
        }
        let interior_count = interior.iter().filter(|&&b| b).count();
        if interior_count == 0 {
            return Err(Error::invalid(
                "no interior particles: spacing too coarse for the domain",
            ));
        }
        Ok(ParticleGrid {
            spec: *spec,
            positions,
            interior,
            coords,
            interior_count,
            index_map,
            ix0,
            iy0,
            nx,
            ny,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Quadrature weight of one particle, h^2.
    pub fn cell_area(&self) -> f64 {
        self.spec.spacing * self.spec.spacing
    }

    /// Particle index at lattice coordinates, if a particle exists there.
    pub fn index_at(&self, ix: i32, iy: i32) -> Option<u32> {
        if ix < self.ix0 || iy < self.iy0 {
            return None;
        }
        let (ux, uy) = ((ix - self.ix0) as usize, (iy - self.iy0) as usize);
        if ux >= self.nx || uy >= self.ny {
            return None;
        }
        match self.index_map[uy * self.nx + ux] {
            u32::MAX => None,
            idx => Some(idx),
        }
    }

    /// Indices of interior particles in storage order.
    pub fn interior_indices(&self) -> Vec<u32> {
        (0..self.len() as u32)
            .filter(|&i| self.interior[i as usize])
            .collect()
    }
}

/// One bond: target particle, rescaled length |y - x| / horizon in (0, 1],
/// and the influence weight J at that length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub index: u32,
    pub xi_norm: f64,
    pub influence: f64,
}

/// CSR neighbor lists for a set of center particles, with the per-center
/// discrete kernel mass
///
///   m(x) = (h^2 / eps^2) * sum_bonds xi * J(xi),
///
/// the lattice approximation of the unit-disk integral of |xi| J(|xi|)
/// (a fixed constant, 2 pi times the second moment of J). `complete` marks
/// tables holding a row for every interior particle; the evolution requires
/// one, diagnostics accept subsets.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    rows: Vec<u32>,
    offsets: Vec<usize>,
    entries: Vec<NeighborEntry>,
    row_index: Vec<u32>,
    pub m_discrete: Vec<f64>,
    pub horizon: f64,
    pub complete: bool,
}

impl NeighborTable {
    /// Table with a row for every interior particle.
    pub fn build(grid: &ParticleGrid, inf: &InfluenceSpec) -> Result<Self> {
        let centers = grid.interior_indices();
        let mut t = Self::build_rows(grid, inf, &centers)?;
        t.complete = true;
        Ok(t)
    }

    /// Table restricted to the given interior particles. Rows appear in the
    /// order given.
    pub fn build_for(
        grid: &ParticleGrid,
        inf: &InfluenceSpec,
        centers: &[u32],
    ) -> Result<Self> {
        Self::build_rows(grid, inf, centers)
    }

    fn build_rows(
        grid: &ParticleGrid,
        inf: &InfluenceSpec,
        centers: &[u32],
    ) -> Result<Self> {
        let eps = grid.spec.horizon;
        let h = grid.spec.spacing;
        let reach = (eps / h * (1.0 + 1e-9)).ceil() as i32;
        let cutoff = eps * (1.0 + 1e-9);

        let mut rows = Vec::with_capacity(centers.len());
        let mut offsets = Vec::with_capacity(centers.len() + 1);
        let mut entries = Vec::new();
        let mut m_discrete = Vec::with_capacity(centers.len());
        let mut row_index = vec![u32::MAX; grid.len()];
        let mut mass_terms = Vec::new();

        offsets.push(0usize);
        for (r, &c) in centers.iter().enumerate() {
            let ci = c as usize;
            if ci >= grid.len() || !grid.interior[ci] {
                return Err(Error::invalid(format!(
                    "neighbor table center {c} is not an interior particle"
                )));
            }
            if row_index[ci] != u32::MAX {
                return Err(Error::invalid(format!(
                    "neighbor table center {c} listed twice"
                )));
            }
            row_index[ci] = r as u32;
            let p = grid.positions[ci];
            let (cx, cy) = grid.coords[ci];
            mass_terms.clear();
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let Some(y) = grid.index_at(cx + dx, cy + dy) else {
                        continue;
                    };
                    let d = (grid.positions[y as usize] - p).norm();
                    if d <= 0.0 || d > cutoff {
                        continue;
                    }
                    let xi_norm = (d / eps).min(1.0);
                    let influence = inf.eval(xi_norm);
                    entries.push(NeighborEntry { index: y, xi_norm, influence });
                    mass_terms.push(xi_norm * influence);
                }
            }
            if entries.len() == *offsets.last().unwrap() {
                return Err(Error::invalid(format!(
                    "interior particle {c} has no neighbors inside the horizon"
                )));
            }
            offsets.push(entries.len());
            m_discrete
                .push(h * h / (eps * eps) * crate::pairwise_sum(&mass_terms));
            rows.push(c);
        }
        Ok(NeighborTable {
            rows,
            offsets,
            entries,
            row_index,
            m_discrete,
            horizon: eps,
            complete: false,
        })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Bonds of the given center particle, if this table has its row.
    pub fn neighbors(&self, particle: u32) -> Option<&[NeighborEntry]> {
        let r = *self.row_index.get(particle as usize)?;
        if r == u32::MAX {
            return None;
        }
        let r = r as usize;
        Some(&self.entries[self.offsets[r]..self.offsets[r + 1]])
    }

    /// Row position of the given center in this table's ordering.
    pub fn row_of(&self, particle: u32) -> Option<usize> {
        match *self.row_index.get(particle as usize)? {
            u32::MAX => None,
            r => Some(r as usize),
        }
    }

    /// Iterates (center particle, bonds) in row order.
    pub fn iter_rows(
        &self,
    ) -> impl Iterator<Item = (u32, &[NeighborEntry])> + '_ {
        self.rows.iter().enumerate().map(move |(r, &c)| {
            (c, &self.entries[self.offsets[r]..self.offsets[r + 1]])
        })
    }
}
