//! Bond constitutive law and its macroscopic calibration.
//!
//! A bond between x and y = x + eps*xi (|xi| <= 1) with relative displacement
//! eta stores the energy density
//!
//!   W(eta) = eps^-3 * J(|xi|) * f(eta^2 / (eps * |xi|)),
//!
//! where f is a bounded concave profile with f(0) = 0. The composition
//! r -> f(r^2) is convex near zero and concave past the inflection radius
//! `r_bar`, so the bond force peaks at the critical stretch
//! sqrt(eps * |xi|) * r_bar and decays beyond it: stretched far enough, a
//! bond sheds load instead of carrying more.

use crate::error::{Error, Result};

/// Shape of the profile f. Only the exponential saturation profile
/// f(r) = f_inf * (1 - exp(-(f'(0)/f_inf) r)) is implemented; the enum leaves
/// room for other bounded concave profiles without an API break.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Exponential,
}

/// Profile parameters: slope at the origin and the saturation plateau.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub f_prime0: f64,
    pub f_inf: f64,
    pub profile: Profile,
}

impl PotentialSpec {
    pub fn exponential(f_prime0: f64, f_inf: f64) -> Result<Self> {
        if !(f_prime0.is_finite() && f_prime0 > 0.0) {
            return Err(Error::invalid(format!(
                "profile slope f'(0) must be finite and positive, got {f_prime0}"
            )));
        }
        if !(f_inf.is_finite() && f_inf > 0.0) {
            return Err(Error::invalid(format!(
                "profile plateau f_inf must be finite and positive, got {f_inf}"
            )));
        }
        Ok(PotentialSpec { f_prime0, f_inf, profile: Profile::Exponential })
    }

    /// Decay rate a = f'(0) / f_inf.
    fn rate(&self) -> f64 {
        self.f_prime0 / self.f_inf
    }

    pub fn f(&self, r: f64) -> f64 {
        self.f_inf * (1.0 - (-self.rate() * r).exp())
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        self.f_prime0 * (-self.rate() * r).exp()
    }

    pub fn f_second(&self, r: f64) -> f64 {
        -self.rate() * self.f_prime0 * (-self.rate() * r).exp()
    }

    /// Inflection radius r_bar of r -> f(r^2): the root of f'(s) + 2s f''(s)
    /// at s = r_bar^2. For the exponential profile r_bar = sqrt(f_inf / (2 f'(0))).
    pub fn inflection_radius(&self) -> f64 {
        (self.f_inf / (2.0 * self.f_prime0)).sqrt()
    }
}

/// Radial influence weight J on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum InfluenceKind {
    /// J = 1.
    Constant,
    /// J = 1 - r.
    LinearTaper,
    /// J(r) = sum_k c_k r^k.
    Polynomial(Vec<f64>),
}

/// Influence function with its declared sup bound. Construction checks
/// 0 <= J <= bound on a sample of [0, 1] and that the second moment is
/// positive, so downstream code can assume a nondegenerate kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceSpec {
    kind: InfluenceKind,
    bound: f64,
}

impl InfluenceSpec {
    pub fn new(kind: InfluenceKind, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::invalid(format!(
                "influence bound must be finite and positive, got {bound}"
            )));
        }
        let spec = InfluenceSpec { kind, bound };
        for k in 0..=1000 {
            let r = k as f64 / 1000.0;
            let j = spec.eval(r);
            if !j.is_finite() || j < 0.0 {
                return Err(Error::invalid(format!(
                    "influence function must be nonnegative on [0,1]; J({r}) = {j}"
                )));
            }
            if j > bound {
                return Err(Error::invalid(format!(
                    "influence function exceeds its bound {bound}: J({r}) = {j}"
                )));
            }
        }
        if spec.moment() <= 0.0 {
            return Err(Error::invalid(
                "influence function has nonpositive second moment",
            ));
        }
        Ok(spec)
    }

    pub fn constant() -> Self {
        InfluenceSpec { kind: InfluenceKind::Constant, bound: 1.0 }
    }

    pub fn linear_taper() -> Self {
        InfluenceSpec { kind: InfluenceKind::LinearTaper, bound: 1.0 }
    }

    pub fn kind(&self) -> &InfluenceKind {
        &self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.kind {
            InfluenceKind::Constant => 1.0,
            InfluenceKind::LinearTaper => 1.0 - r,
            InfluenceKind::Polynomial(c) => {
                // Horner, highest degree first.
                c.iter().rev().fold(0.0, |acc, &ck| acc * r + ck)
            }
        }
    }

    /// Second moment integral of r^2 J(r) over [0, 1], in closed form.
    pub fn moment(&self) -> f64 {
        match &self.kind {
            InfluenceKind::Constant => 1.0 / 3.0,
            InfluenceKind::LinearTaper => 1.0 / 12.0,
            InfluenceKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .map(|(k, &ck)| ck / (k as f64 + 3.0))
                .sum(),
        }
    }

    /// First moment integral of r J(r) over [0, 1], in closed form.
    pub fn first_moment(&self) -> f64 {
        match &self.kind {
            InfluenceKind::Constant => 1.0 / 2.0,
            InfluenceKind::LinearTaper => 1.0 / 6.0,
            InfluenceKind::Polynomial(c) => c
                .iter()
                .enumerate()
                .map(|(k, &ck)| ck / (k as f64 + 2.0))
                .sum(),
        }
    }

    /// Second moment by 64-point Gauss-Legendre, cross-checked against the
    /// 32-point rule; disagreement beyond 1e-10 reports a numerical failure.
    pub fn moment_quadrature(&self) -> Result<f64> {
        let g = |r: f64| r * r * self.eval(r);
        let q64 = quadrature::integrate(g, 0.0, 1.0, 64);
        let q32 = quadrature::integrate(g, 0.0, 1.0, 32);
        let residual = (q64 - q32).abs();
        if residual > 1e-10 * q64.abs().max(1.0) {
            return Err(Error::Numeric {
                what: "influence moment quadrature failed to converge".into(),
                residual,
            });
        }
        Ok(q64)
    }
}

/// Macroscopic constants recovered in the small-horizon limit: shear modulus
/// of the elastic regime and fracture energy per unit crack length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub mu: f64,
    pub gc: f64,
}

/// mu = pi f'(0) m2 and G_c = 2 pi f_inf m2 with m2 the second moment of J.
pub fn calibrate(pot: &PotentialSpec, inf: &InfluenceSpec) -> Calibration {
    let m2 = inf.moment();
    Calibration {
        mu: std::f64::consts::PI * pot.f_prime0 * m2,
        gc: 2.0 * std::f64::consts::PI * pot.f_inf * m2,
    }
}

#[inline]
fn debug_check_bond(eps: f64, xi_norm: f64) {
    debug_assert!(eps > 0.0, "horizon must be positive");
    debug_assert!(
        xi_norm > 0.0 && xi_norm <= 1.0 + 1e-9,
        "rescaled bond length must lie in (0, 1], got {xi_norm}"
    );
}

/// Energy density of one bond: j = J(|xi|) precomputed by the caller.
#[inline]
pub fn bond_potential_density(
    pot: &PotentialSpec,
    j: f64,
    eps: f64,
    xi_norm: f64,
    eta: f64,
) -> f64 {
    debug_check_bond(eps, xi_norm);
    let s = eta * eta / (eps * xi_norm);
    j / (eps * eps * eps) * pot.f(s)
}

/// dW/d(eta): the force density one bond exerts per unit squared measure.
#[inline]
pub fn bond_force_density(
    pot: &PotentialSpec,
    j: f64,
    eps: f64,
    xi_norm: f64,
    eta: f64,
) -> f64 {
    debug_check_bond(eps, xi_norm);
    let e4 = eps * eps * eps * eps;
    let s = eta * eta / (eps * xi_norm);
    2.0 * eta * j * pot.f_prime(s) / (e4 * xi_norm)
}

/// d2W/d(eta)^2. Positive while the bond hardens, negative past the critical
/// stretch; its maximum over eta sits at eta = 0.
#[inline]
pub fn bond_stiffness_density(
    pot: &PotentialSpec,
    j: f64,
    eps: f64,
    xi_norm: f64,
    eta: f64,
) -> f64 {
    debug_check_bond(eps, xi_norm);
    let e4 = eps * eps * eps * eps;
    let s = eta * eta / (eps * xi_norm);
    2.0 * j * (pot.f_prime(s) + 2.0 * s * pot.f_second(s)) / (e4 * xi_norm)
}

/// Relative displacement at which the bond force peaks:
/// sqrt(eps |xi|) * r_bar = sqrt(|y - x|) * r_bar.
#[inline]
pub fn critical_stretch(pot: &PotentialSpec, eps: f64, xi_norm: f64) -> f64 {
    debug_check_bond(eps, xi_norm);
    (eps * xi_norm).sqrt() * pot.inflection_radius()
}

pub mod quadrature {
    //! Gauss-Legendre rules on arbitrary intervals.

    /// Nodes and weights of the n-point rule on [-1, 1]. Newton iteration on
    /// the Legendre recurrence from the Chebyshev-like initial guess; each
    /// root converges in a handful of steps for the sizes used here.
    pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75)
                / (n as f64 + 0.5))
                .cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // P_n(x) and P_n'(x) by upward recurrence.
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 =
                        ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        nodes.reverse();
        weights.reverse();
        (nodes, weights)
    }

    /// Integral of f over [a, b] with the n-point rule.
    pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let (nodes, weights) = gauss_legendre(n);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let terms: Vec<f64> = nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .collect();
        half * crate::pairwise_sum(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_pot() -> PotentialSpec {
        PotentialSpec::exponential(1.0, 1.0).unwrap()
    }

    #[test]
    fn calibration_constants_for_unit_kernel() {
        let cal = calibrate(&unit_pot(), &InfluenceSpec::constant());
        assert_relative_eq!(
            cal.mu,
            std::f64::consts::PI / 3.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            cal.gc,
            2.0 * std::f64::consts::PI / 3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn moments_in_closed_form() {
        let taper = InfluenceSpec::linear_taper();
        assert_relative_eq!(taper.moment(), 1.0 / 12.0, max_relative = 1e-14);
        assert_relative_eq!(
            taper.first_moment(),
            1.0 / 6.0,
            max_relative = 1e-14
        );
        let poly = InfluenceSpec::new(
            InfluenceKind::Polynomial(vec![1.0, 2.0]),
            3.0,
        )
        .unwrap();
        assert_relative_eq!(poly.moment(), 5.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(
            poly.first_moment(),
            7.0 / 6.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn quadrature_moment_matches_closed_form() {
        for inf in [
            InfluenceSpec::constant(),
            InfluenceSpec::linear_taper(),
            InfluenceSpec::new(
                InfluenceKind::Polynomial(vec![0.5, 0.0, 1.5]),
                2.0,
            )
            .unwrap(),
        ] {
            let q = inf.moment_quadrature().unwrap();
            assert_relative_eq!(q, inf.moment(), max_relative = 1e-12);
        }
    }

    #[test]
    fn influence_validation_rejects_bad_functions() {
        // Negative on part of [0, 1].
        let r = InfluenceSpec::new(
            InfluenceKind::Polynomial(vec![0.5, -1.0]),
            1.0,
        );
        assert!(r.is_err());
        // Exceeds its declared bound.
        let r = InfluenceSpec::new(
            InfluenceKind::Polynomial(vec![0.0, 2.0]),
            1.5,
        );
        assert!(r.is_err());
        // Degenerate: identically zero.
        let r = InfluenceSpec::new(InfluenceKind::Polynomial(vec![]), 1.0);
        assert!(r.is_err());
        assert!(InfluenceSpec::new(InfluenceKind::Constant, 0.0).is_err());
    }

    #[test]
    fn potential_validation_rejects_nonpositive_parameters() {
        assert!(PotentialSpec::exponential(0.0, 1.0).is_err());
        assert!(PotentialSpec::exponential(1.0, -2.0).is_err());
        assert!(PotentialSpec::exponential(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn bond_densities_at_reference_points() {
        let pot = unit_pot();
        // s = 1 at eta = 1, eps = 1, |xi| = 1: W = f(1) = 1 - 1/e.
        let w = bond_potential_density(&pot, 1.0, 1.0, 1.0, 1.0);
        assert_relative_eq!(
            w,
            0.6321205588285577,
            max_relative = 1e-15
        );
        // Undeformed stiffness: 2 J f'(0) / (eps^4 |xi|) = 2.
        let k = bond_stiffness_density(&pot, 1.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(k, 2.0, max_relative = 1e-15);
        assert_eq!(bond_force_density(&pot, 1.0, 1.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn critical_stretch_closed_form() {
        let pot = unit_pot();
        assert_relative_eq!(
            pot.inflection_radius(),
            0.5_f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            critical_stretch(&pot, 0.1, 1.0),
            (0.05_f64).sqrt(),
            max_relative = 1e-15
        );
        // Stiffness changes sign exactly across the critical stretch.
        let eta_c = critical_stretch(&pot, 0.1, 0.7);
        let below = bond_stiffness_density(&pot, 1.0, 0.1, 0.7, eta_c * 0.999);
        let above = bond_stiffness_density(&pot, 1.0, 0.1, 0.7, eta_c * 1.001);
        assert!(below > 0.0 && above < 0.0);
    }

    #[test]
    fn stiffness_is_maximal_at_zero_displacement() {
        let pot = PotentialSpec::exponential(2.5, 0.8).unwrap();
        let k0 = bond_stiffness_density(&pot, 1.0, 0.2, 0.6, 0.0);
        for i in 1..200 {
            let eta = i as f64 * 0.01;
            assert!(bond_stiffness_density(&pot, 1.0, 0.2, 0.6, eta) <= k0);
        }
    }

    #[test]
    fn gauss_legendre_reference_integrals() {
        // Polynomial of degree 2n-1 is exact.
        let q = quadrature::integrate(|x| x.powi(10), 0.0, 1.0, 6);
        assert_relative_eq!(q, 1.0 / 11.0, max_relative = 1e-14);
        let q = quadrature::integrate(f64::exp, 0.0, 1.0, 32);
        assert_relative_eq!(
            q,
            std::f64::consts::E - 1.0,
            max_relative = 1e-14
        );
        // Weights sum to the interval length.
        let (_, w) = quadrature::gauss_legendre(64);
        assert_relative_eq!(
            crate::pairwise_sum(&w),
            2.0,
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn force_is_derivative_of_potential(
            fp0 in 0.3f64..3.0,
            finf in 0.3f64..3.0,
            eps in 0.05f64..1.0,
            xi in 0.05f64..1.0,
            eta in -1.0f64..1.0,
        ) {
            let pot = PotentialSpec::exponential(fp0, finf).unwrap();
            let d = 1e-6 * eps.sqrt();
            let wp = bond_potential_density(&pot, 1.0, eps, xi, eta + d);
            let wm = bond_potential_density(&pot, 1.0, eps, xi, eta - d);
            let fd = (wp - wm) / (2.0 * d);
            let f = bond_force_density(&pot, 1.0, eps, xi, eta);
            let scale = f.abs().max(1.0 / (eps * eps * eps));
            prop_assert!((fd - f).abs() <= 1e-4 * scale);
        }

        #[test]
        fn stiffness_is_derivative_of_force(
            eps in 0.05f64..1.0,
            xi in 0.05f64..1.0,
            eta in -1.0f64..1.0,
        ) {
            let pot = PotentialSpec::exponential(1.0, 1.0).unwrap();
            let d = 1e-6 * eps.sqrt();
            let fp = bond_force_density(&pot, 1.0, eps, xi, eta + d);
            let fm = bond_force_density(&pot, 1.0, eps, xi, eta - d);
            let fd = (fp - fm) / (2.0 * d);
            let k = bond_stiffness_density(&pot, 1.0, eps, xi, eta);
            let scale = k.abs().max(1.0 / eps.powi(4));
            prop_assert!((fd - k).abs() <= 1e-4 * scale);
        }

        #[test]
        fn profile_is_bounded_monotone(
            fp0 in 0.1f64..5.0,
            finf in 0.1f64..5.0,
            r in 0.0f64..50.0,
        ) {
            let pot = PotentialSpec::exponential(fp0, finf).unwrap();
            // Bounds are non-strict: exp underflows to zero once the
            // profile saturates.
            prop_assert!(pot.f(r) >= 0.0);
            prop_assert!(pot.f(r) <= finf);
            prop_assert!(pot.f_prime(r) >= 0.0);
            prop_assert!(pot.f(r + 0.1) >= pot.f(r));
        }

        #[test]
        fn force_has_sign_of_displacement_and_saturates(
            eta in 0.01f64..10.0,
        ) {
            let pot = PotentialSpec::exponential(1.0, 1.0).unwrap();
            let f = bond_force_density(&pot, 1.0, 0.5, 0.5, eta);
            prop_assert!(f > 0.0);
            prop_assert!(bond_force_density(&pot, 1.0, 0.5, 0.5, -eta) == -f);
            // Past saturation the transmitted force density collapses.
            let far = bond_force_density(&pot, 1.0, 0.5, 0.5, 100.0);
            prop_assert!(far.abs() < 1e-10);
        }
    }
}
