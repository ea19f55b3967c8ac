//! Planar three-layer cavity: a gap of width d and permittivity ε₂ centred
//! on z = 0, bounded by ε₁ below (z < −d/2) and ε₃ above (z > d/2).
//!
//! Three routes to the Green's function inside the gap are provided: the
//! Bessel-integral representation evaluated by [`hankel_integral`], the
//! image series obtained by expanding the multiple-reflection denominator,
//! and the large-separation asymptotic for conducting walls. Internally all
//! lengths are measured in units of d.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::hankel_integral;
use crate::types::{GreensValue, Permittivity, QuadratureSpec};

const MODULE: &str = "multilayer";

/// Reflection coefficients of the lower (ε₁) and upper (ε₃) walls as seen
/// from the gap, R = (ε − ε₂)/(ε + ε₂). A conducting wall has R = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityCoeffs {
    pub r1: f64,
    pub r3: f64,
}

impl CavityCoeffs {
    pub fn product(&self) -> f64 {
        self.r1 * self.r3
    }

    fn swapped(self) -> Self {
        CavityCoeffs {
            r1: self.r3,
            r3: self.r1,
        }
    }
}

pub fn reflection_coeffs(eps1: Permittivity, eps2: f64, eps3: Permittivity) -> CavityCoeffs {
    CavityCoeffs {
        r1: eps1.reflection_against(eps2),
        r3: eps3.reflection_against(eps2),
    }
}

fn check_gap(d: f64, eps2: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid(MODULE, format!("gap width d = {d} must be positive")));
    }
    if !(eps2 >= 1.0 && eps2.is_finite()) {
        return Err(Error::invalid(MODULE, format!("eps2 = {eps2} must be finite and >= 1")));
    }
    Ok(())
}

/// 1 − R·e^{−x} written as (1 − R) + R·(1 − e^{−x}) so that R = 1 keeps
/// full precision as x → 0.
#[inline]
fn one_minus_reflected(r: f64, x: f64) -> f64 {
    (1.0 - r) + r * -(-x).exp_m1()
}

/// Midpoint integrand minus its k → ∞ limit 1, in units of d:
/// (1 − e^{−k}R₁)(1 − e^{−k}R₃)/(1 − e^{−2k}R₁R₃) − 1.
fn midpoint_integrand_minus_one(k: f64, c: CavityCoeffs) -> f64 {
    let num = one_minus_reflected(c.r1, k) * one_minus_reflected(c.r3, k);
    let den = one_minus_reflected(c.product(), 2.0 * k);
    if den == 0.0 {
        // Only reached at k = 0 with R₁R₃ = 1, where the limit is −1.
        return -1.0;
    }
    num / den - 1.0
}

/// Green's function between two points on the midplane z = z′ = 0 at
/// lateral separation `rho`:
///
/// ```text
/// g = (1/4πε₂) ∫₀^∞ dk (1 − e^{−kd}R₁)(1 − e^{−kd}R₃)/(1 − e^{−2kd}R₁R₃) J₀(kρ)
/// ```
///
/// The non-decaying part of the integrand is integrated exactly (∫J₀(kρ)dk = 1/ρ);
/// the remainder decays like e^{−kd} and goes through [`hankel_integral`].
pub fn cavity_g_midpoint(
    rho: f64,
    d: f64,
    eps1: Permittivity,
    eps2: f64,
    eps3: Permittivity,
    spec: &QuadratureSpec,
) -> Result<GreensValue> {
    check_gap(d, eps2)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(MODULE, format!("rho = {rho} must be positive")));
    }
    let coeffs = reflection_coeffs(eps1, eps2, eps3);
    let rho_n = rho / d;
    let prefactor = 1.0 / (4.0 * PI * eps2 * d);
    let scaled = scaled_spec(spec, prefactor);
    let rest = hankel_integral(|k| midpoint_integrand_minus_one(k, coeffs), rho_n, &scaled)?;
    Ok(GreensValue::new(1.0 / rho_n + rest.value, rest.abs_err).scale(prefactor))
}

/// Convert an absolute tolerance on the physical result into one on the
/// dimensionless integral.
fn scaled_spec(spec: &QuadratureSpec, prefactor: f64) -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: spec.abs_tol / prefactor,
        ..*spec
    }
}

// n-th derivative of 1/sqrt(x² + ρ²) is (−1)ⁿ n! Pₙ(x/r)/r^{n+1}.
fn inverse_distance_derivative(order: u32, x: f64, rho: f64) -> f64 {
    let r = x.hypot(rho);
    let c = x / r;
    let (p, fact) = match order {
        1 => (c, 1.0),
        3 => (0.5 * (5.0 * c * c * c - 3.0 * c), 6.0),
        5 => ((63.0 * c.powi(5) - 70.0 * c.powi(3) + 15.0 * c) / 8.0, 120.0),
        _ => unreachable!("only odd orders up to 5 are used"),
    };
    let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
    sign * fact * p / r.powi(order as i32 + 1)
}

/// Σ_{j≥0} (−1)^j f(a + j) for f(x) = 1/sqrt(x² + ρ²), by Boole summation
/// truncated after f'''. Returns (sum, remainder bound).
fn alternating_tail(a: f64, rho: f64) -> (f64, f64) {
    let f0 = 1.0 / a.hypot(rho);
    let f1 = inverse_distance_derivative(1, a, rho);
    let f3 = inverse_distance_derivative(3, a, rho);
    let f5 = inverse_distance_derivative(5, a, rho);
    (0.5 * f0 - 0.25 * f1 + f3 / 48.0, 2.0 * f5.abs() / 480.0)
}

/// Image-series form of the midpoint Green's function truncated after
/// `n_max` reflection orders:
///
/// ```text
/// 4πε₂ g = 1/ρ + Σ_{n=1}^{N} 2(R₁R₃)ⁿ/√((2nd)² + ρ²) − Σ_{n=0}^{N−1} (R₁R₃)ⁿ(R₁+R₃)/√(((2n+1)d)² + ρ²)
/// ```
///
/// For |R₁R₃| < 1 the reported error is the geometric bound on the dropped
/// terms. For conducting walls (R₁ = R₃ = 1) the series alternates with
/// algebraically decaying terms; the dropped tail is then summed with the
/// Boole formula and `abs_err` bounds what that leaves out.
pub fn cavity_g_series(
    rho: f64,
    d: f64,
    coeffs: CavityCoeffs,
    eps2: f64,
    n_max: usize,
) -> Result<GreensValue> {
    check_gap(d, eps2)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(MODULE, format!("rho = {rho} must be positive")));
    }
    if n_max < 1 {
        return Err(Error::invalid(MODULE, "n_max must be >= 1"));
    }
    let p = coeffs.product();
    if p.abs() > 1.0 + 1e-15 {
        return Err(Error::invalid(MODULE, format!("|R1 R3| = {} exceeds 1", p.abs())));
    }
    let rho_n = rho / d;
    let inv = |x: f64| 1.0 / x.hypot(rho_n);
    let sum_r = coeffs.r1 + coeffs.r3;

    let mut even = 0.0;
    let mut odd = 0.0;
    let mut pn = 1.0;
    for n in 0..n_max {
        odd += pn * inv((2 * n + 1) as f64);
        pn *= p;
        even += pn * inv((2 * (n + 1)) as f64);
    }
    let mut value = 1.0 / rho_n + 2.0 * even - sum_r * odd;

    let abs_err = if p == 1.0 {
        // R₁ = R₃ = 1: the remaining images alternate −, +, −, … from order 2N+1.
        let (tail, bound) = alternating_tail((2 * n_max + 1) as f64, rho_n);
        value -= 2.0 * tail;
        2.0 * bound
    } else {
        let q = p.abs();
        let n = n_max as f64;
        (2.0 * q.powf(n + 1.0) * inv(2.0 * n + 2.0) + sum_r.abs() * q.powf(n) * inv(2.0 * n + 1.0))
            / (1.0 - q)
    };
    let prefactor = 1.0 / (4.0 * PI * eps2 * d);
    Ok(GreensValue::new(value, abs_err).scale(prefactor))
}

/// Smallest reflection order at which [`cavity_g_series`] meets the
/// tolerance of `spec`, capped at ten million.
pub fn cavity_series_order(rho: f64, d: f64, coeffs: CavityCoeffs, eps2: f64, spec: &QuadratureSpec) -> Result<usize> {
    let mut n = 8usize;
    loop {
        let v = cavity_g_series(rho, d, coeffs, eps2, n)?;
        if v.abs_err <= spec.tolerance_for(v.value) || n >= 10_000_000 {
            return Ok(n);
        }
        n *= 2;
    }
}

fn check_in_gap(z: f64, d: f64) -> Result<()> {
    if !(z.abs() < 0.5 * d) {
        return Err(Error::OutOfRegion { module: MODULE, z });
    }
    Ok(())
}

/// Scattering integrand for field height `zf ≥ zs` (both in units of d):
/// e^{−k(zf−zs)}·[(1 − e^{−k(1+2zs)}R₁)(1 − e^{−k(1−2zf)}R₃) − (1 − e^{−2k}R₁R₃)]/(1 − e^{−2k}R₁R₃).
fn scattering_integrand(k: f64, zf: f64, zs: f64, c: CavityCoeffs) -> f64 {
    let gap = zf - zs;
    let p = c.product();
    // Expanded numerator with every 1 − e^{−x} kept as −expm1(−x).
    let e_low = -(-k * (1.0 + 2.0 * zs)).exp_m1();
    let e_high = -(-k * (1.0 - 2.0 * zf)).exp_m1();
    let e_both = -(-k * (2.0 - 2.0 * gap)).exp_m1();
    let e_round = -(-2.0 * k).exp_m1();
    let num = (2.0 * p - c.r1 - c.r3) + c.r1 * e_low + c.r3 * e_high - p * (e_both + e_round);
    let den = (1.0 - p) + p * e_round;
    if den == 0.0 {
        return 0.0;
    }
    (-k * gap).exp() * num / den
}

/// Scattering part g − 1/(4πε₂|r − r′|) for two points inside the gap at
/// heights `z` (field) and `z0` (source) and lateral separation `rho`.
///
/// Finite at coincident points, which is what the self-energy needs. Uses
/// reciprocity to order the heights so the integrand decays.
pub fn cavity_g1_general(
    z: f64,
    z0: f64,
    rho: f64,
    d: f64,
    eps1: Permittivity,
    eps2: f64,
    eps3: Permittivity,
    spec: &QuadratureSpec,
) -> Result<GreensValue> {
    check_gap(d, eps2)?;
    check_in_gap(z, d)?;
    check_in_gap(z0, d)?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid(MODULE, format!("rho = {rho} must be >= 0")));
    }
    let coeffs = reflection_coeffs(eps1, eps2, eps3);
    let (zf, zs) = if z >= z0 { (z / d, z0 / d) } else { (z0 / d, z / d) };
    let prefactor = 1.0 / (4.0 * PI * eps2 * d);
    let scaled = scaled_spec(spec, prefactor);
    let v = hankel_integral(|k| scattering_integrand(k, zf, zs, coeffs), rho / d, &scaled)?;
    Ok(v.scale(prefactor))
}

/// Full Green's function inside the gap: free part 1/(4πε₂|r − r′|) plus
/// [`cavity_g1_general`].
pub fn cavity_g_general(
    z: f64,
    z0: f64,
    rho: f64,
    d: f64,
    eps1: Permittivity,
    eps2: f64,
    eps3: Permittivity,
    spec: &QuadratureSpec,
) -> Result<GreensValue> {
    check_gap(d, eps2)?;
    check_in_gap(z, d)?;
    check_in_gap(z0, d)?;
    let sep = rho.hypot(z - z0);
    if sep == 0.0 {
        return Err(Error::CoincidentPoints { module: MODULE });
    }
    let free = GreensValue::exact(1.0 / (4.0 * PI * eps2 * sep));
    Ok(free + cavity_g1_general(z, z0, rho, d, eps1, eps2, eps3, spec)?)
}

/// Mirror-image cavity: swapping ε₁ and ε₃ and reflecting both heights
/// leaves g unchanged. Exposed for property tests.
pub fn mirrored_coeffs(c: CavityCoeffs) -> CavityCoeffs {
    c.swapped()
}

/// Large-separation form for conducting walls on the midplane,
/// g ≈ (1/4πε₂)·sqrt(8/(ρd))·e^{−πρ/d}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityAsymptotic {
    pub g: GreensValue,
    /// Set when ρ < 3d, where the leading term is not yet accurate.
    pub outside_validity: bool,
}

pub fn cavity_asymptotic(rho: f64, d: f64, eps2: f64) -> Result<CavityAsymptotic> {
    check_gap(d, eps2)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(MODULE, format!("rho = {rho} must be positive")));
    }
    let value = (8.0 / (rho * d)).sqrt() * (-PI * rho / d).exp() / (4.0 * PI * eps2);
    Ok(CavityAsymptotic {
        g: GreensValue::exact(value),
        outside_validity: rho < 3.0 * d,
    })
}

/// Lateral force on charge A from charge B on the midplane between
/// conducting walls, from the large-separation asymptotic, optionally
/// multiplied by a local-field factor. Positive values are repulsive.
///
/// F = (q_A q_B/4πε₀ε₂)·factor·√2/(ρd)^{3/2}·e^{−πρ/d}·(d + 2πρ)
pub fn cavity_asymptotic_force(q_a: f64, q_b: f64, rho: f64, d: f64, eps2: f64, factor: f64) -> Result<f64> {
    check_gap(d, eps2)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(MODULE, format!("rho = {rho} must be positive")));
    }
    let coulomb = q_a * q_b / (4.0 * PI * crate::types::EPSILON_0 * eps2);
    Ok(coulomb * factor * std::f64::consts::SQRT_2 / (rho * d).powf(1.5) * (-PI * rho / d).exp() * (d + 2.0 * PI * rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_semi_infinite;

    const C: Permittivity = Permittivity::PerfectConductor;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    // K₀(x) = ∫₀^∞ e^{−x cosh t} dt, used for the waveguide-mode oracle.
    fn bessel_k0(x: f64) -> f64 {
        integrate_semi_infinite(|t| (-x * t.cosh()).exp(), 0.0, 1.0, &QuadratureSpec::default().with_rel_tol(1e-13))
            .unwrap()
            .value
    }

    // Between conducting walls the midplane Green's function is also the sum
    // over odd guided modes (1/πε₂d)·Σ K₀((2n+1)πρ/d).
    fn modal_midpoint(rho: f64, d: f64) -> f64 {
        let mut s = 0.0;
        for n in 0..50 {
            let term = bessel_k0((2 * n + 1) as f64 * PI * rho / d);
            s += term;
            if term < 1e-30 {
                break;
            }
        }
        s / (PI * d)
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(reflection_coeffs(1.0.into(), 1.0, 1.0.into()), CavityCoeffs { r1: 0.0, r3: 0.0 });
        assert_eq!(reflection_coeffs(C, 1.0, C), CavityCoeffs { r1: 1.0, r3: 1.0 });
        assert_eq!(reflection_coeffs(3.0.into(), 1.0, 1.0.into()).r1, 0.5);
    }

    #[test]
    fn midpoint_without_walls_is_free() {
        let g = cavity_g_midpoint(0.7, 1.0, 2.0.into(), 2.0, 2.0.into(), &spec()).unwrap();
        assert!((g.value - 1.0 / (4.0 * PI * 2.0 * 0.7)).abs() < 1e-14);
    }

    #[test]
    fn midpoint_matches_modal_oracle_for_conductors() {
        for rho in [0.3, 1.0, 2.5, 5.0] {
            let g = cavity_g_midpoint(rho, 1.0, C, 1.0, C, &spec()).unwrap();
            let oracle = modal_midpoint(rho, 1.0);
            assert!((g.value - oracle).abs() < 1e-12 + 1e-9 * oracle, "rho {rho}: {} vs {oracle}", g.value);
        }
    }

    #[test]
    fn midpoint_matches_series_for_conductors() {
        let q = cavity_g_midpoint(1.0, 1.0, C, 1.0, C, &spec()).unwrap();
        let s = cavity_g_series(1.0, 1.0, CavityCoeffs { r1: 1.0, r3: 1.0 }, 1.0, 50).unwrap();
        assert!((q.value - s.value).abs() < 1e-9, "{q:?} {s:?}");
    }

    #[test]
    fn series_without_walls_is_exact_coulomb() {
        let g = cavity_g_series(1.3, 0.4, CavityCoeffs { r1: 0.0, r3: 0.0 }, 3.0, 7).unwrap();
        assert_eq!(g.value, 1.0 / (4.0 * PI * 3.0 * 1.3));
        assert_eq!(g.abs_err, 0.0);
    }

    #[test]
    fn series_single_wall_collapses_to_one_image() {
        let (rho, d, eps2) = (0.8, 1.5, 1.0);
        let g = cavity_g_series(rho, d, CavityCoeffs { r1: 1.0, r3: 0.0 }, eps2, 5).unwrap();
        let expected = (1.0 / rho - 1.0 / d.hypot(rho)) / (4.0 * PI * eps2);
        assert!((g.value - expected).abs() < 1e-15);
        // Same configuration seen as a conducting half-space with both points
        // a distance d/2 above the wall.
        use crate::analytic::half_space_g;
        use crate::types::Point3;
        let hs = half_space_g(Point3::new(rho, 0.0, d / 2.0), Point3::on_axis(d / 2.0), 1.0.into(), C).unwrap();
        assert!((g.value - hs.value).abs() < 1e-15);
    }

    #[test]
    fn conductor_series_converges_with_tail_correction() {
        let c = CavityCoeffs { r1: 1.0, r3: 1.0 };
        let a = cavity_g_series(1.0, 1.0, c, 1.0, 50).unwrap();
        let b = cavity_g_series(1.0, 1.0, c, 1.0, 100).unwrap();
        assert!((a.value - b.value).abs() < 1e-10);
        assert!(a.abs_err < 1e-10);
    }

    #[test]
    fn series_tail_bound_is_honest() {
        let c = CavityCoeffs { r1: 0.8, r3: 0.9 };
        let reference = cavity_g_series(0.6, 1.0, c, 1.0, 400).unwrap();
        for n in [2, 5, 10, 20] {
            let g = cavity_g_series(0.6, 1.0, c, 1.0, n).unwrap();
            assert!((g.value - reference.value).abs() <= g.abs_err + reference.abs_err);
        }
    }

    #[test]
    fn general_reduces_to_midpoint() {
        let (e1, e3) = (Permittivity::Finite(4.0), Permittivity::Finite(9.0));
        let mid = cavity_g_midpoint(0.9, 1.0, e1, 2.0, e3, &spec()).unwrap();
        let gen = cavity_g_general(0.0, 0.0, 0.9, 1.0, e1, 2.0, e3, &spec()).unwrap();
        assert!((mid.value - gen.value).abs() < 1e-11, "{mid:?} {gen:?}");
    }

    #[test]
    fn general_without_contrast_is_free() {
        let e = Permittivity::Finite(2.5);
        let g = cavity_g_general(0.2, -0.3, 0.4, 1.0, e, 2.5, e, &spec()).unwrap();
        let free = 1.0 / (4.0 * PI * 2.5 * 0.4f64.hypot(0.5));
        assert!((g.value - free).abs() < 1e-14);
    }

    #[test]
    fn general_symmetries() {
        let (e1, e3) = (Permittivity::Finite(4.0), C);
        let a = cavity_g_general(0.3, -0.1, 0.5, 1.0, e1, 1.5, e3, &spec()).unwrap();
        let b = cavity_g_general(-0.3, 0.1, 0.5, 1.0, e3, 1.5, e1, &spec()).unwrap();
        assert!((a.value - b.value).abs() < 1e-10 * a.value.abs());
        let c = cavity_g_general(-0.1, 0.3, 0.5, 1.0, e1, 1.5, e3, &spec()).unwrap();
        assert!((a.value - c.value).abs() < 1e-10 * a.value.abs());
    }

    #[test]
    fn general_rejects_points_outside_gap() {
        let e = Permittivity::Finite(2.0);
        let err = cavity_g_general(0.6, 0.0, 0.3, 1.0, e, 1.0, e, &spec()).unwrap_err();
        assert!(matches!(err, Error::OutOfRegion { .. }));
    }

    #[test]
    fn self_scattering_matches_image_sum() {
        // Conductor below, vacuum above: a single image at distance 2(z + d/2).
        let z = 0.1;
        let g1 = cavity_g1_general(z, z, 0.0, 1.0, C, 1.0, 1.0.into(), &spec()).unwrap();
        let expected = -1.0 / (4.0 * PI * 2.0 * (z + 0.5));
        assert!((g1.value - expected).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_examples() {
        let a = cavity_asymptotic(8.0, 1.0, 1.0).unwrap();
        assert!((a.g.value * 4.0 * PI - (-8.0 * PI).exp()).abs() < 1e-24);
        assert!(!a.outside_validity);
        assert!(cavity_asymptotic(2.0, 1.0, 1.0).unwrap().outside_validity);
        let b = cavity_asymptotic(16.0, 1.0, 1.0).unwrap();
        let ratio = b.g.value / a.g.value;
        assert!((ratio - (0.5f64).sqrt() * (-8.0 * PI).exp()).abs() < 1e-12 * ratio);
    }

    #[test]
    fn asymptotic_close_to_quadrature_at_five_gaps() {
        let q = cavity_g_midpoint(5.0, 1.0, C, 1.0, C, &spec()).unwrap();
        let a = cavity_asymptotic(5.0, 1.0, 1.0).unwrap();
        let ratio = a.g.value / q.value;
        assert!((0.97..=1.03).contains(&ratio), "{ratio}");
    }

    #[test]
    fn asymptotic_force_is_minus_gradient_of_energy() {
        use crate::types::EPSILON_0;
        let (d, eps2) = (1.0, 1.0);
        let energy = |rho: f64| cavity_asymptotic(rho, d, eps2).unwrap().g.value / EPSILON_0;
        let rho = 4.0;
        let h = 1e-4;
        let fd = -(energy(rho + h) - energy(rho - h)) / (2.0 * h);
        let f = cavity_asymptotic_force(1.0, 1.0, rho, d, eps2, 1.0).unwrap();
        assert!(((f - fd) / fd).abs() < 1e-6, "{f} vs {fd}");
    }
}
