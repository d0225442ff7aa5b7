//! Antiplane-shear peridynamics on a 2D rectangle.
//!
//! Out-of-plane displacement u(x) interacts through bonds inside a horizon
//! disk of radius `eps`. Each bond carries a convex-concave potential: the
//! force density rises linearly for small relative displacement, peaks at a
//! critical stretch proportional to sqrt(eps * |y - x|), and softens beyond
//! it, so fracture emerges from the constitutive law instead of a separate
//! failure rule. As `eps -> 0` the model recovers linear elastodynamics with
//! shear modulus `mu` away from cracks and pays `G_c` per unit crack length,
//! with both constants set by the potential profile and the influence
//! function (see [`kernels::calibrate`]).
//!
//! Module map:
//! - [`kernels`]: bond potential/force/stiffness densities, calibration
//! - [`lattice`]: particle grid with collar, neighbor tables
//! - [`dynamics`]: initial data, force assembly, velocity-Verlet evolution
//! - [`diagnostics`]: energy reports, unstable-bond fractions, centroid sets
//! - [`nucleation`]: directional stability coefficients A_nu
//! - [`reference`]: finite-difference wave solver and horizon-sweep checks

pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod geom;
pub mod kernels;
pub mod lattice;
pub mod nucleation;
pub mod reference;

pub use error::{Error, Result};

/// Sums a slice by recursive halving. Deterministic for a fixed input order
/// and accurate to O(log n) rounding growth; every energy/norm reduction in
/// the crate funnels through here so reruns and thread counts can't change
/// results.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::pairwise_sum;

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.5];
        assert_eq!(pairwise_sum(&xs), 15.5);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[7.25]), 7.25);
    }

    #[test]
    fn pairwise_sum_is_exact_on_binary_fractions() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64) * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), 0.5 * (999.0 * 1000.0) / 2.0);
    }
}
