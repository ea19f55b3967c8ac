//! Physical observables from the Green's functions: self-energies, pair
//! energies and forces, with the optional real-cavity local-field factor.
//!
//! Energies are U(r_A) = q_A²/(2ε₀)·g1(r_A, r_A) for a single charge and
//! U(r_A, r_B) = q_A q_B/ε₀·g(r_A, r_B) for a pair.

use std::f64::consts::PI;

use serde::Serialize;

use crate::analytic::{free_space_g, half_space_g_any, plate_hole_g, plate_hole_self_g1};
use crate::born::born_scattering_g1;
use crate::error::{Error, Result};
use crate::multilayer::{
    cavity_g1_general, cavity_g_general, cavity_g_midpoint, cavity_g_series, cavity_series_order, reflection_coeffs,
};
use crate::nonlocal::{screened_g, screened_potential_derivative};
use crate::types::{distance, Charge, Geometry, GreensValue, Permittivity, Point3, QuadratureSpec, EPSILON_0};

const MODULE: &str = "interactions";
const MAX_SERIES_ORDER: usize = 1 << 17;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InteractionResult {
    /// Energy in joules.
    pub energy: f64,
    /// Energy relative to the reference interaction; `None` where undefined.
    pub ratio_to_free: Option<f64>,
    /// Absolute error estimate in joules.
    pub abs_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForceResult {
    /// Force on A in newtons.
    pub force: Point3,
    /// Multiplier applied to −∇U (1 when the correction is off).
    pub local_field_factor_applied: f64,
    /// Estimated absolute error of each component, in newtons.
    pub abs_err: f64,
}

/// Real-cavity enhancement 3ε/(2ε + 1).
pub fn local_field_factor(eps_host: f64) -> f64 {
    3.0 * eps_host / (2.0 * eps_host + 1.0)
}

/// Relative permittivity of the medium at `p`, or `None` inside a conductor.
pub fn host_permittivity(geom: &Geometry, p: Point3) -> Option<f64> {
    match geom {
        Geometry::FreeSpace { eps } => Some(*eps),
        Geometry::HalfSpace { eps1, eps2 } => {
            if p.z > 0.0 {
                eps1.finite()
            } else if p.z < 0.0 {
                eps2.finite()
            } else {
                None
            }
        }
        Geometry::ThreeLayerCavity { eps2, .. } => Some(*eps2),
        Geometry::PlateWithHole { .. } => Some(1.0),
        Geometry::NonlocalBulk { drude } => Some(drude.eps_b()),
        Geometry::DiluteBody(body) => Some(body.background_eps),
    }
}

/// Distance from `p` to the nearest material boundary (∞ for bulk media).
pub fn distance_to_surface(geom: &Geometry, p: Point3) -> f64 {
    match geom {
        Geometry::FreeSpace { .. } | Geometry::NonlocalBulk { .. } => f64::INFINITY,
        Geometry::HalfSpace { .. } => p.z.abs(),
        Geometry::ThreeLayerCavity { d, .. } => (0.5 * d - p.z.abs()).max(0.0),
        Geometry::PlateWithHole { radius } => {
            let rho = p.rho();
            if rho >= *radius {
                p.z.abs()
            } else {
                (radius - rho).hypot(p.z)
            }
        }
        Geometry::DiluteBody(body) => body.distance_to_surface(p),
    }
}

fn check_charge(geom: &Geometry, c: &Charge) -> Result<()> {
    if !c.q.is_finite() || !c.position.is_finite() {
        return Err(Error::invalid(MODULE, "charge and position must be finite"));
    }
    match geom {
        Geometry::HalfSpace { eps1, eps2 } => {
            if c.position.z == 0.0 {
                return Err(Error::OnSurface { z: 0.0 });
            }
            let side = if c.position.z > 0.0 { eps1 } else { eps2 };
            if side.is_conductor() {
                return Err(Error::OutOfRegion {
                    module: MODULE,
                    z: c.position.z,
                });
            }
        }
        Geometry::ThreeLayerCavity { d, .. } => {
            if c.position.z.abs() >= 0.5 * d {
                return Err(Error::OutOfRegion {
                    module: MODULE,
                    z: c.position.z,
                });
            }
        }
        _ => {}
    }
    Ok(())
}

/// Full Green's function g(r, r′) of the geometry.
pub fn greens(geom: &Geometry, r: Point3, r_src: Point3, spec: &QuadratureSpec) -> Result<GreensValue> {
    geom.validate()?;
    match geom {
        Geometry::FreeSpace { eps } => free_space_g(r, r_src, *eps),
        Geometry::HalfSpace { eps1, eps2 } => half_space_g_any(r, r_src, *eps1, *eps2),
        Geometry::ThreeLayerCavity { eps1, eps2, eps3, d } => {
            let rho = (r.x - r_src.x).hypot(r.y - r_src.y);
            if r.z == 0.0 && r_src.z == 0.0 && rho > 0.0 {
                // The image series keeps full relative accuracy far into the
                // exponential tail, where the transform loses it to cancellation.
                let coeffs = reflection_coeffs(*eps1, *eps2, *eps3);
                let n = cavity_series_order(rho, *d, coeffs, *eps2, spec)?;
                if n <= MAX_SERIES_ORDER {
                    let v = cavity_g_series(rho, *d, coeffs, *eps2, n)?;
                    if v.abs_err <= spec.tolerance_for(v.value) {
                        return Ok(v);
                    }
                }
                cavity_g_midpoint(rho, *d, *eps1, *eps2, *eps3, spec)
            } else {
                cavity_g_general(r.z, r_src.z, rho, *d, *eps1, *eps2, *eps3, spec)
            }
        }
        Geometry::PlateWithHole { radius } => plate_hole_g(r, r_src, *radius),
        Geometry::NonlocalBulk { drude } => Ok(GreensValue::exact(screened_g(distance(r, r_src), drude)?)),
        Geometry::DiluteBody(body) => {
            let g0 = free_space_g(r, r_src, body.background_eps)?;
            Ok(g0 + born_scattering_g1(r, r_src, body, spec)?)
        }
    }
}

/// Scattering part g1(r, r) at coincident points.
pub fn scattering_at_coincidence(geom: &Geometry, r: Point3, spec: &QuadratureSpec) -> Result<GreensValue> {
    geom.validate()?;
    match geom {
        Geometry::FreeSpace { .. } => Ok(GreensValue::exact(0.0)),
        Geometry::HalfSpace { eps1, eps2 } => {
            let (own, other) = if r.z > 0.0 { (eps1, eps2) } else { (eps2, eps1) };
            let e = own.finite().ok_or(Error::OutOfRegion { module: MODULE, z: r.z })?;
            if r.z == 0.0 {
                return Err(Error::OnSurface { z: 0.0 });
            }
            // Image of strength (ε − ε′)/(ε + ε′) at distance 2|z|.
            let refl = -other.reflection_against(e);
            Ok(GreensValue::exact(refl / (4.0 * PI * e * 2.0 * r.z.abs())))
        }
        Geometry::ThreeLayerCavity { eps1, eps2, eps3, d } => {
            cavity_g1_general(r.z, r.z, 0.0, *d, *eps1, *eps2, *eps3, spec)
        }
        Geometry::PlateWithHole { radius } => plate_hole_self_g1(r, *radius),
        Geometry::NonlocalBulk { .. } => Err(Error::UnsupportedGeometry {
            operation: "self_energy",
            geometry: "nonlocal_bulk",
        }),
        Geometry::DiluteBody(body) => born_scattering_g1(r, r, body, spec),
    }
}

/// U(r_A) = q²/(2ε₀)·g1(r_A, r_A).
///
/// For the half-space and the plate the ratio is taken against the image
/// energy of an unperforated grounded plane at the same height,
/// −q²/(16πε₀ε|z|). Other geometries report no ratio.
pub fn self_energy(geom: &Geometry, a: &Charge, spec: &QuadratureSpec) -> Result<InteractionResult> {
    check_charge(geom, a)?;
    let g1 = scattering_at_coincidence(geom, a.position, spec)?;
    let pref = a.q * a.q / (2.0 * EPSILON_0);
    let energy = pref * g1.value;
    let ratio_to_free = match geom {
        Geometry::HalfSpace { .. } | Geometry::PlateWithHole { .. } if a.position.z != 0.0 && a.q != 0.0 => {
            let eps = host_permittivity(geom, a.position).unwrap_or(1.0);
            let reference = -a.q * a.q / (16.0 * PI * EPSILON_0 * eps * a.position.z.abs());
            Some(energy / reference)
        }
        _ => None,
    };
    Ok(InteractionResult {
        energy,
        ratio_to_free,
        abs_err: pref * g1.abs_err,
    })
}

/// U(r_A, r_B) = q_A q_B/ε₀·g(r_A, r_B).
///
/// The ratio divides by the bulk Coulomb energy q_A q_B/(4πε₀ε|r_A − r_B|)
/// in the medium holding both charges, and is absent when they sit in
/// different media.
pub fn pair_energy(geom: &Geometry, a: &Charge, b: &Charge, spec: &QuadratureSpec) -> Result<InteractionResult> {
    check_charge(geom, a)?;
    check_charge(geom, b)?;
    if a.position == b.position {
        return Err(Error::CoincidentPoints { module: MODULE });
    }
    let g = greens(geom, a.position, b.position, spec)?;
    let pref = a.q * b.q / EPSILON_0;
    let energy = pref * g.value;
    let ratio_to_free = match (host_permittivity(geom, a.position), host_permittivity(geom, b.position)) {
        (Some(ea), Some(eb)) if ea == eb && same_medium(geom, a.position, b.position) && a.q * b.q != 0.0 => {
            let reference = a.q * b.q / (4.0 * PI * EPSILON_0 * ea * distance(a.position, b.position));
            Some(energy / reference)
        }
        _ => None,
    };
    Ok(InteractionResult {
        energy,
        ratio_to_free,
        abs_err: pref.abs() * g.abs_err,
    })
}

fn same_medium(geom: &Geometry, a: Point3, b: Point3) -> bool {
    match geom {
        Geometry::HalfSpace { .. } => a.z.signum() == b.z.signum(),
        _ => true,
    }
}

/// Image decomposition of the half-space Green's function seen from a
/// source at `src`: g(r) = Σ c·1/(4π|r − s|).
fn half_space_images(r: Point3, src: Point3, eps1: Permittivity, eps2: Permittivity) -> Vec<(f64, Point3)> {
    let (own, other) = if src.z > 0.0 { (eps1, eps2) } else { (eps2, eps1) };
    let e = match own.finite() {
        Some(e) => e,
        None => return Vec::new(),
    };
    if r.z.signum() == src.z.signum() {
        let refl = -other.reflection_against(e);
        vec![(1.0 / e, src), (refl / e, crate::types::mirror_z(src))]
    } else {
        match other {
            Permittivity::Finite(o) => vec![(2.0 / (e + o), src)],
            Permittivity::PerfectConductor => Vec::new(),
        }
    }
}

/// ∇_r of 1/(4π|r − s|).
fn kernel_gradient(r: Point3, s: Point3) -> Point3 {
    let u = r - s;
    let n = u.norm();
    u.scale(-1.0 / (4.0 * PI * n * n * n))
}

/// Closed-form −∇_A U where one exists.
fn analytic_force(geom: &Geometry, a: &Charge, b: Option<&Charge>) -> Result<Option<Point3>> {
    let force = match (geom, b) {
        (Geometry::FreeSpace { eps }, Some(b)) => {
            let g = kernel_gradient(a.position, b.position).scale(1.0 / eps);
            Some(g.scale(-a.q * b.q / EPSILON_0))
        }
        (Geometry::FreeSpace { .. }, None) => Some(Point3::ORIGIN),
        (Geometry::HalfSpace { eps1, eps2 }, Some(b)) => {
            let grad = half_space_images(a.position, b.position, *eps1, *eps2)
                .into_iter()
                .fold(Point3::ORIGIN, |acc, (c, s)| acc + kernel_gradient(a.position, s).scale(c));
            Some(grad.scale(-a.q * b.q / EPSILON_0))
        }
        (Geometry::HalfSpace { .. }, None) => {
            // U = q²c/(16πε₀|z|) with c the image strength over ε; dU/dz = −U/z.
            let u = self_energy(geom, a, &QuadratureSpec::default())?.energy;
            Some(Point3::new(0.0, 0.0, u / a.position.z))
        }
        (Geometry::NonlocalBulk { drude }, Some(b)) => {
            let sep = a.position - b.position;
            let r = sep.norm();
            let du = screened_potential_derivative(r, a.q, b.q, drude)?;
            Some(sep.scale(-du / r))
        }
        _ => None,
    };
    Ok(force)
}

fn energy_at(geom: &Geometry, a: &Charge, b: Option<&Charge>, spec: &QuadratureSpec) -> Result<InteractionResult> {
    match b {
        Some(b) => pair_energy(geom, a, b, spec),
        None => self_energy(geom, a, spec),
    }
}

fn uses_quadrature(geom: &Geometry) -> bool {
    matches!(geom, Geometry::ThreeLayerCavity { .. } | Geometry::DiluteBody(_))
}

/// Default finite-difference step: a fixed fraction of the distance to the
/// nearest surface or partner charge. Quadrature-backed energies get a
/// larger fraction so the step stays above their noise floor.
pub fn default_step(geom: &Geometry, a: &Charge, b: Option<&Charge>) -> f64 {
    let mut scale = distance_to_surface(geom, a.position);
    if let Some(b) = b {
        scale = scale.min(distance(a.position, b.position));
    }
    if !scale.is_finite() {
        scale = a.position.norm().max(1.0);
    }
    let fraction = if uses_quadrature(geom) { 1e-3 } else { 1e-5 };
    fraction * scale
}

/// Fourth-order central difference of the energy along each axis, with the
/// error estimated by comparison against the same stencil at step 2h.
fn fd_force(geom: &Geometry, a: &Charge, b: Option<&Charge>, h: f64, spec: &QuadratureSpec) -> Result<(Point3, f64, f64)> {
    let mut force = [0.0; 3];
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (axis, slot) in force.iter_mut().enumerate() {
        let at = |offset: f64| -> Result<(f64, f64)> {
            let shifted = Charge::new(a.q, a.position.with_component(axis, a.position.component(axis) + offset));
            let u = energy_at(geom, &shifted, b, spec)?;
            Ok((u.energy, u.abs_err))
        };
        let (p1, e1) = at(h)?;
        let (m1, e2) = at(-h)?;
        let (p2, e3) = at(2.0 * h)?;
        let (m2, e4) = at(-2.0 * h)?;
        let (p4, _) = at(4.0 * h)?;
        let (m4, _) = at(-4.0 * h)?;
        let d_h = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let d_2h = (-p4 + 8.0 * p2 - 8.0 * m2 + m4) / (24.0 * h);
        let noise = 1.5 * (e1 + e2 + e3 + e4) / h;
        *slot = -d_h;
        err = err.max((d_h - d_2h).abs() / 15.0 + noise);
        scale = scale.max(p1.abs().max(m1.abs()));
    }
    Ok((Point3::from(force), err, scale))
}

/// F_A = −∇_A U, where U is the self-energy of A (no `b`) or the pair
/// energy with B. Closed-form gradients are used for free space, the
/// half-space and the screened bulk; other geometries use fourth-order
/// central differences with step `h` (default [`default_step`]).
///
/// With `apply_local_field` the force is multiplied by 3ε/(2ε + 1) with ε
/// the permittivity at r_A.
#[allow(non_snake_case)]
pub fn force_on_A(
    geom: &Geometry,
    a: &Charge,
    b: Option<&Charge>,
    apply_local_field: bool,
    h: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<ForceResult> {
    geom.validate()?;
    check_charge(geom, a)?;
    if let Some(b) = b {
        check_charge(geom, b)?;
        if a.position == b.position {
            return Err(Error::CoincidentPoints { module: MODULE });
        }
    }
    let surface = distance_to_surface(geom, a.position);
    if surface == 0.0 {
        return Err(Error::OnSurface { z: a.position.z });
    }
    let factor = if apply_local_field {
        local_field_factor(host_permittivity(geom, a.position).unwrap_or(1.0))
    } else {
        1.0
    };
    let (force, abs_err) = match (analytic_force(geom, a, b)?, h) {
        (Some(f), None) => (f, 0.0),
        _ => {
            let step = h.unwrap_or_else(|| default_step(geom, a, b));
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid(MODULE, format!("finite-difference step h = {step} must be positive")));
            }
            let (f, err, energy_scale) = fd_force(geom, a, b, step, spec)?;
            let magnitude = f.norm();
            // Components that vanish by symmetry are judged against the
            // natural force scale U/ℓ instead of |F|.
            let reach = surface.min(b.map_or(f64::INFINITY, |b| distance(a.position, b.position)));
            let floor = if reach.is_finite() { 1e-8 * energy_scale / reach } else { 0.0 };
            if err > 0.01 * magnitude + floor {
                return Err(Error::StepTooLarge { estimate: err, magnitude });
            }
            (f, err)
        }
    };
    Ok(ForceResult {
        force: force.scale(factor),
        local_field_factor_applied: factor,
        abs_err: abs_err * factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ELEMENTARY_CHARGE as E;
    use proptest::prelude::*;

    const C: Permittivity = Permittivity::PerfectConductor;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn local_field_examples() {
        assert_eq!(local_field_factor(1.0), 1.0);
        assert!((local_field_factor(80.0) - 240.0 / 161.0).abs() < 1e-15);
        assert!((local_field_factor(1e12) - 1.5).abs() < 1e-11);
    }

    #[test]
    fn free_space_pair() {
        let geom = Geometry::FreeSpace { eps: 1.0 };
        let a = Charge::new(E, Point3::ORIGIN);
        let b = Charge::new(-E, Point3::on_axis(1.0));
        let u = pair_energy(&geom, &a, &b, &spec()).unwrap();
        assert!((u.energy + E * E / (4.0 * PI * EPSILON_0)).abs() < 1e-15 * u.energy.abs());
        assert_eq!(u.ratio_to_free, Some(1.0));
    }

    #[test]
    fn conductor_half_space_self_energy() {
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: C };
        let h = 2e-9;
        let u = self_energy(&geom, &Charge::new(E, Point3::on_axis(h)), &spec()).unwrap();
        let expected = -E * E / (16.0 * PI * EPSILON_0 * h);
        assert!((u.energy - expected).abs() < 1e-14 * expected.abs());
        assert_eq!(u.ratio_to_free, Some(1.0));
    }

    #[test]
    fn opposite_sides_of_conductor_do_not_interact() {
        let geom = Geometry::HalfSpace { eps1: C, eps2: 1.0.into() };
        let a = Charge::new(E, Point3::on_axis(-1.0));
        let b = Charge::new(E, Point3::new(0.3, 0.0, -2.0));
        // Both below in vacuum: ordinary image interaction.
        assert!(pair_energy(&geom, &a, &b, &spec()).unwrap().energy != 0.0);
        // A charge inside the conductor is rejected.
        let inside = Charge::new(E, Point3::on_axis(1.0));
        assert!(matches!(pair_energy(&geom, &a, &inside, &spec()), Err(Error::OutOfRegion { .. })));
        let across = Geometry::HalfSpace { eps1: 1.0.into(), eps2: C };
        let u = pair_energy(&across, &Charge::new(E, Point3::on_axis(1.0)), &Charge::new(E, Point3::on_axis(-1.0)), &spec());
        assert!(matches!(u, Err(Error::OutOfRegion { .. })));
    }

    #[test]
    fn opposite_sides_dielectric_have_no_ratio() {
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: 4.0.into() };
        let u = pair_energy(&geom, &Charge::new(E, Point3::on_axis(1.0)), &Charge::new(E, Point3::on_axis(-1.0)), &spec()).unwrap();
        assert!(u.ratio_to_free.is_none());
        let expected = E * E / EPSILON_0 * 2.0 / 5.0 / (4.0 * PI * 2.0);
        assert!((u.energy - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn plate_self_energy_uses_full_limit() {
        let geom = Geometry::PlateWithHole { radius: 1.0 };
        let u = self_energy(&geom, &Charge::new(1.0, Point3::on_axis(1e-6)), &spec()).unwrap();
        let expected = 1.0 / (2.0 * EPSILON_0) * (-1.0 / (2.0 * PI * PI));
        assert!(((u.energy - expected) / expected).abs() < 1e-5);
    }

    #[test]
    fn cavity_midpoint_force_vanishes() {
        let geom = Geometry::ThreeLayerCavity { eps1: 4.0.into(), eps2: 1.0, eps3: 4.0.into(), d: 1e-8 };
        let f = force_on_A(&geom, &Charge::new(E, Point3::ORIGIN), None, false, None, &spec()).unwrap();
        let scale = E * E / (4.0 * PI * EPSILON_0 * 1e-16);
        assert!(f.force.norm() < 1e-8 * scale, "{:?}", f.force);
    }

    #[test]
    fn half_space_self_force_matches_corrected_display() {
        let (e1, e2) = (2.0, 5.0);
        let geom = Geometry::HalfSpace { eps1: e1.into(), eps2: e2.into() };
        let z = 3e-9;
        let a = Charge::new(E, Point3::on_axis(z));
        let f = force_on_A(&geom, &a, None, true, None, &spec()).unwrap();
        let expected = -(E * E / (16.0 * PI * EPSILON_0 * e1)) * ((e2 - e1) / (e2 + e1)) * (3.0 * e1 / (2.0 * e1 + 1.0)) / (z * z);
        assert!((f.force.z - expected).abs() < 1e-13 * expected.abs());
        let fd = force_on_A(&geom, &a, None, true, Some(1e-4 * z), &spec()).unwrap();
        assert!(((fd.force.z - f.force.z) / f.force.z).abs() < 1e-6);
    }

    #[test]
    fn half_space_pair_force_matches_fd() {
        let geom = Geometry::HalfSpace { eps1: 1.5.into(), eps2: 6.0.into() };
        let a = Charge::new(E, Point3::new(0.2e-9, -0.1e-9, 1e-9));
        for bz in [2e-9, -1.5e-9] {
            let b = Charge::new(-2.0 * E, Point3::new(-0.5e-9, 0.4e-9, bz));
            let exact = force_on_A(&geom, &a, Some(&b), false, None, &spec()).unwrap().force;
            let fd = force_on_A(&geom, &a, Some(&b), false, Some(1e-13), &spec()).unwrap().force;
            assert!((exact - fd).norm() < 1e-7 * exact.norm());
        }
    }

    #[test]
    fn nonlocal_action_reaction() {
        let geom = Geometry::NonlocalBulk { drude: crate::nonlocal::DrudeStatic::new(1e15, 1e15, 2e15, 1e6) };
        let a = Charge::new(E, Point3::new(0.1e-9, 0.0, 0.0));
        let b = Charge::new(3.0 * E, Point3::new(0.0, 0.5e-9, 0.7e-9));
        let fa = force_on_A(&geom, &a, Some(&b), false, None, &spec()).unwrap().force;
        let fb = force_on_A(&geom, &b, Some(&a), false, None, &spec()).unwrap().force;
        assert!((fa + fb).norm() <= 1e-10 * fa.norm());
        assert!(self_energy(&geom, &a, &spec()).is_err());
    }

    #[test]
    fn charge_on_interface_is_rejected() {
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: 2.0.into() };
        let err = force_on_A(&geom, &Charge::new(E, Point3::ORIGIN), None, false, None, &spec()).unwrap_err();
        assert!(matches!(err, Error::OnSurface { .. }));
    }

    #[test]
    fn receding_interfaces_give_free_ratio() {
        let a = Charge::new(E, Point3::ORIGIN);
        let b = Charge::new(E, Point3::new(1.0, 0.0, 0.0));
        let far = 1e6;
        let geoms = [
            Geometry::HalfSpace { eps1: 1.0.into(), eps2: C },
            Geometry::ThreeLayerCavity { eps1: C, eps2: 1.0, eps3: C, d: far },
            Geometry::PlateWithHole { radius: far },
        ];
        for geom in geoms {
            let (a, b) = match geom {
                Geometry::HalfSpace { .. } => (
                    Charge::new(E, Point3::on_axis(far)),
                    Charge::new(E, Point3::new(1.0, 0.0, far)),
                ),
                _ => (a, b),
            };
            let r = pair_energy(&geom, &a, &b, &spec()).unwrap().ratio_to_free.unwrap();
            assert!((r - 1.0).abs() < 1e-4, "{}: {r}", geom.name());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pair_energy_is_bilinear(qa in -5.0f64..5.0, qb in -5.0f64..5.0, z in 0.2f64..3.0, x in -2.0f64..2.0) {
            let geom = Geometry::HalfSpace { eps1: 2.0.into(), eps2: 7.0.into() };
            let pa = Point3::on_axis(z);
            let pb = Point3::new(x, 0.3, 0.5);
            let unit = pair_energy(&geom, &Charge::new(1.0, pa), &Charge::new(1.0, pb), &spec()).unwrap().energy;
            let u = pair_energy(&geom, &Charge::new(qa, pa), &Charge::new(qb, pb), &spec()).unwrap().energy;
            prop_assert!((u - qa * qb * unit).abs() <= 4.0 * f64::EPSILON * u.abs());
            let s1 = self_energy(&geom, &Charge::new(1.0, pa), &spec()).unwrap().energy;
            let s = self_energy(&geom, &Charge::new(qa, pa), &spec()).unwrap().energy;
            prop_assert!((s - qa * qa * s1).abs() <= 1e-15 * s.abs());
        }

        #[test]
        fn free_space_action_reaction(ax in -1.0f64..1.0, ay in -1.0f64..1.0, bz in 0.5f64..2.0, qb in 0.1f64..3.0) {
            let geom = Geometry::FreeSpace { eps: 2.5 };
            let a = Charge::new(1.0, Point3::new(ax, ay, 0.0));
            let b = Charge::new(qb, Point3::new(0.0, 0.0, bz));
            let fa = force_on_A(&geom, &a, Some(&b), false, None, &spec()).unwrap().force;
            let fb = force_on_A(&geom, &b, Some(&a), false, None, &spec()).unwrap().force;
            prop_assert!((fa + fb).norm() <= 1e-10 * fa.norm());
        }
    }
}
