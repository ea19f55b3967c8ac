//! Closed-form static Green's functions: homogeneous bulk, a planar
//! dielectric interface, and a grounded plate pierced by a circular hole.
//!
//! All functions return the full Green's function `g(r, r′)` in 1/m, defined
//! by ∇·(ε∇g) = −δ(r − r′), unless the name says `g1` (scattering part,
//! free kernel removed).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::{distance, mirror_z, GreensValue, Permittivity, Point3};

const MODULE: &str = "analytic";

/// Unit-permittivity Coulomb kernel 1/(4π|r − r′|).
pub(crate) fn coulomb_kernel(r: Point3, r_src: Point3) -> f64 {
    1.0 / (4.0 * PI * distance(r, r_src))
}

fn check_distinct(r: Point3, r_src: Point3) -> Result<()> {
    if r == r_src {
        return Err(Error::CoincidentPoints { module: MODULE });
    }
    Ok(())
}

/// Green's function of a homogeneous medium, 1/(4πε|r − r′|).
pub fn free_space_g(r: Point3, r_src: Point3, eps: f64) -> Result<GreensValue> {
    check_distinct(r, r_src)?;
    Ok(GreensValue::exact(coulomb_kernel(r, r_src) / eps))
}

/// Green's function of two half-spaces joined at z = 0, medium 1 at z > 0.
///
/// The source must sit in medium 1 (`r_src.z > 0`). For a source below the
/// interface swap the media and reflect both points first; [`half_space_g_any`]
/// does that for you.
pub fn half_space_g(
    r: Point3,
    r_src: Point3,
    eps1: Permittivity,
    eps2: Permittivity,
) -> Result<GreensValue> {
    if !(r_src.z > 0.0) {
        return Err(Error::OutOfRegion {
            module: MODULE,
            z: r_src.z,
        });
    }
    check_distinct(r, r_src)?;
    let value = match (eps1, eps2) {
        // A source embedded in a conductor has no field outside its own point.
        (Permittivity::PerfectConductor, _) => 0.0,
        (Permittivity::Finite(e1), Permittivity::PerfectConductor) => {
            if r.z >= 0.0 {
                (coulomb_kernel(r, r_src) - coulomb_kernel(r, mirror_z(r_src))) / e1
            } else {
                0.0
            }
        }
        (Permittivity::Finite(e1), Permittivity::Finite(e2)) => {
            if r.z >= 0.0 {
                let refl = (e1 - e2) / (e1 + e2);
                (coulomb_kernel(r, r_src) + refl * coulomb_kernel(r, mirror_z(r_src))) / e1
            } else {
                2.0 / (e1 + e2) * coulomb_kernel(r, r_src)
            }
        }
    };
    Ok(GreensValue::exact(value))
}

/// [`half_space_g`] for a source on either side of the interface.
pub fn half_space_g_any(
    r: Point3,
    r_src: Point3,
    eps1: Permittivity,
    eps2: Permittivity,
) -> Result<GreensValue> {
    if r_src.z > 0.0 {
        half_space_g(r, r_src, eps1, eps2)
    } else if r_src.z < 0.0 {
        half_space_g(mirror_z(r), mirror_z(r_src), eps2, eps1)
    } else {
        Err(Error::OutOfRegion {
            module: MODULE,
            z: r_src.z,
        })
    }
}

/// Scattering part of the half-space Green's function for field and source
/// both in medium 1: the image term ((ε₁−ε₂)/(ε₁+ε₂))/(4πε₁|r − r′*|).
pub fn half_space_g1(r: Point3, r_src: Point3, eps1: Permittivity, eps2: Permittivity) -> Result<GreensValue> {
    if !(r_src.z > 0.0 && r.z > 0.0) {
        return Err(Error::OutOfRegion {
            module: MODULE,
            z: r.z.min(r_src.z),
        });
    }
    let e1 = match eps1 {
        Permittivity::Finite(e) => e,
        Permittivity::PerfectConductor => return Ok(GreensValue::exact(0.0)),
    };
    // eps2 reflection uses the conductor limit −1 when needed.
    let refl = -eps2.reflection_against(e1);
    Ok(GreensValue::exact(refl * coulomb_kernel(r, mirror_z(r_src)) / e1))
}

/// Auxiliary quantities of the plate-with-hole Green's function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HoleAux {
    pub f_plus: f64,
    pub f_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn on_plate(p: Point3, radius: f64) -> bool {
    p.z == 0.0 && p.rho() >= radius
}

/// F±, D±, λ± for field point `r` (z ≥ 0) and source `r_src` (z′ ≠ 0).
///
/// With A = ρ² + z² − R² and P = (z² + (ρ−R)²)(z² + (ρ+R)²) = A² + 4R²z²,
///
/// ```text
/// F± = (1/(√2 R)) · sqrt( A·A′ ∓ 4R²·z·z′ + √P·√P′ )
/// D± = sqrt( ρ² + ρ′² − 2ρρ′cos(φ−φ′) + (z ± z′)² )
/// ```
///
/// λ+ = sgn[z′A + zA′], λ− = 1 for z′ > 0; λ+ = −1, λ− = sgn[z′A − zA′]
/// for z′ < 0. The radicand is non-negative by Cauchy–Schwarz; it is
/// clamped at zero against rounding.
pub fn plate_hole_aux(r: Point3, r_src: Point3, radius: f64) -> Result<HoleAux> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(MODULE, format!("hole radius R = {radius} must be > 0")));
    }
    if on_plate(r, radius) {
        return Err(Error::OnPlate { rho: r.rho(), z: r.z });
    }
    if on_plate(r_src, radius) {
        return Err(Error::OnPlate {
            rho: r_src.rho(),
            z: r_src.z,
        });
    }
    if r.z < 0.0 || r_src.z == 0.0 {
        return Err(Error::OutOfRegion {
            module: MODULE,
            z: if r.z < 0.0 { r.z } else { r_src.z },
        });
    }
    let (z, zp) = (r.z, r_src.z);
    let r2 = radius * radius;
    let a = r.x * r.x + r.y * r.y + z * z - r2;
    let ap = r_src.x * r_src.x + r_src.y * r_src.y + zp * zp - r2;
    let root_p = a.hypot(2.0 * radius * z);
    let root_pp = ap.hypot(2.0 * radius * zp);
    let cross = 4.0 * r2 * z * zp;
    let base = a * ap + root_p * root_pp;
    let pref = 1.0 / (std::f64::consts::SQRT_2 * radius);
    let f_plus = pref * (base - cross).max(0.0).sqrt();
    let f_minus = pref * (base + cross).max(0.0).sqrt();

    let dx = r.x - r_src.x;
    let dy = r.y - r_src.y;
    let lateral = dx * dx + dy * dy;
    let d_minus = (lateral + (z - zp) * (z - zp)).sqrt();
    let d_plus = (lateral + (z + zp) * (z + zp)).sqrt();

    let (lambda_plus, lambda_minus) = if zp > 0.0 {
        (sign(zp * a + z * ap), 1.0)
    } else {
        (-1.0, sign(zp * a - z * ap))
    };
    Ok(HoleAux {
        f_plus,
        f_minus,
        d_plus,
        d_minus,
        lambda_plus,
        lambda_minus,
    })
}

/// (1/D)·[1 + (2λ/π)·arctan(F/D)], with F/D saturating to +∞ when D → 0.
fn hole_bracket(f: f64, d: f64, lambda: f64) -> f64 {
    let ratio = if d > 0.0 { f / d } else { f64::INFINITY };
    (1.0 + 2.0 * lambda / PI * ratio.atan()) / d
}

/// Green's function of a grounded, infinitely thin plate at z = 0 with a
/// circular hole of radius `radius` about the z axis.
///
/// Field points below the plate are handled with the z → −z symmetry of the
/// geometry. `radius = 0` gives the unperforated plate.
pub fn plate_hole_g(r: Point3, r_src: Point3, radius: f64) -> Result<GreensValue> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid(MODULE, format!("hole radius R = {radius} must be >= 0")));
    }
    if on_plate(r, radius) {
        return Err(Error::OnPlate { rho: r.rho(), z: r.z });
    }
    if on_plate(r_src, radius) {
        return Err(Error::OnPlate {
            rho: r_src.rho(),
            z: r_src.z,
        });
    }
    check_distinct(r, r_src)?;
    let (r, r_src) = if r.z < 0.0 || (r.z == 0.0 && r_src.z < 0.0) {
        (mirror_z(r), mirror_z(r_src))
    } else {
        (r, r_src)
    };
    if radius == 0.0 {
        // Solid plate: image charge on the same side, full screening across.
        let value = if r_src.z > 0.0 {
            coulomb_kernel(r, r_src) - coulomb_kernel(r, mirror_z(r_src))
        } else {
            0.0
        };
        return Ok(GreensValue::exact(value));
    }
    if r_src.z == 0.0 {
        if r.z == 0.0 {
            // Both points in the opening. g is even in the source height
            // there, so a tiny lift changes it only at second order.
            let lift = 1e-6 * (radius - r_src.rho()).min(distance(r, r_src));
            return plate_hole_g(r, Point3::new(r_src.x, r_src.y, lift), radius);
        }
        // Source inside the hole opening: evaluate by reciprocity.
        return plate_hole_g(r_src, r, radius);
    }
    let aux = plate_hole_aux(r, r_src, radius)?;
    let value = (hole_bracket(aux.f_minus, aux.d_minus, aux.lambda_minus)
        - hole_bracket(aux.f_plus, aux.d_plus, aux.lambda_plus))
        / (8.0 * PI);
    Ok(GreensValue::exact(value))
}

/// Closed-form on-axis scattering part at coincident points,
///
/// ```text
/// g1(z) = −1/(16π|z|) + arctan[R/(2|z|) − |z|/(2R)] / (8π²|z|)
/// ```
///
/// This is the image-branch (D+) contribution of [`plate_hole_g`] on the
/// axis. It tends to −1/(4π²R) as z → 0 and to the solid-plate value
/// −1/(8π|z|) as R → 0. The regular part of the direct (D−) branch,
/// −R/(4π²(z² + R²)), is not included; [`plate_hole_self_g1`] returns the
/// complete coincident limit.
pub fn plate_hole_onaxis_self_g1(z: f64, radius: f64) -> Result<GreensValue> {
    if z == 0.0 || !z.is_finite() {
        return Err(Error::invalid(MODULE, format!("on-axis height z = {z} must be non-zero")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(MODULE, format!("hole radius R = {radius} must be > 0")));
    }
    let z = z.abs();
    let arg = radius / (2.0 * z) - z / (2.0 * radius);
    Ok(GreensValue::exact(
        -1.0 / (16.0 * PI * z) + arg.atan() / (8.0 * PI * PI * z),
    ))
}

/// Coincident-point limit of g − 1/(4π|r − r′|) for the plate with a hole,
/// at any point off the plate.
///
/// As D− → 0 the direct bracket behaves like 2/D− − 2/(πF−), so the limit is
///
/// ```text
/// g1(r, r) = −1/(4π²F−) − (1/(8πD+))·[1 + (2λ+/π)·arctan(F+/D+)]
/// ```
///
/// evaluated with r′ = r. On the axis this equals
/// [`plate_hole_onaxis_self_g1`] − R/(4π²(z² + R²)).
pub fn plate_hole_self_g1(r: Point3, radius: f64) -> Result<GreensValue> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid(MODULE, format!("hole radius R = {radius} must be >= 0")));
    }
    if on_plate(r, radius) {
        return Err(Error::OnPlate { rho: r.rho(), z: r.z });
    }
    let r = if r.z < 0.0 { mirror_z(r) } else { r };
    if radius == 0.0 {
        return Ok(GreensValue::exact(-1.0 / (8.0 * PI * r.z)));
    }
    if r.z == 0.0 {
        // Centre plane of the opening: the image branch is regular here and
        // the limit is reached from z → 0⁺.
        let z = f64::EPSILON.sqrt() * radius;
        return plate_hole_self_g1(Point3::new(r.x, r.y, z), radius);
    }
    let aux = plate_hole_aux(r, r, radius)?;
    let direct = -1.0 / (4.0 * PI * PI * aux.f_minus);
    let image = hole_bracket(aux.f_plus, aux.d_plus, aux.lambda_plus) / (8.0 * PI);
    Ok(GreensValue::exact(direct - image))
}
