//! Shared value types: points, charges, permittivities, geometries and
//! numerical settings.
//!
//! Everything here is SI. Lengths are meters, charges coulombs, and Green's
//! functions carry units of 1/m (the potential of a unit charge is
//! `g / eps0`).

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::born::{DiluteBody, DENSITY_MODULE};
use crate::error::{Error, Result};
use crate::nonlocal::DrudeStatic;

/// Vacuum permittivity in F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge in C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

const MODULE: &str = "core";

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    /// Point on the z axis.
    pub const fn on_axis(z: f64) -> Self {
        Point3 { x: 0.0, y: 0.0, z }
    }

    /// Point from cylindrical coordinates (ρ, φ, z).
    pub fn from_cylindrical(rho: f64, phi: f64, z: f64) -> Self {
        Point3 {
            x: rho * phi.cos(),
            y: rho * phi.sin(),
            z,
        }
    }

    /// Distance from the z axis.
    pub fn rho(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Copy with one Cartesian component replaced (0 = x, 1 = y, 2 = z).
    pub fn with_component(mut self, axis: usize, value: f64) -> Point3 {
        match axis {
            0 => self.x = value,
            1 => self.y = value,
            _ => self.z = value,
        }
        self
    }

    pub fn component(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Point3, b: Point3) -> f64 {
    (a - b).norm()
}

/// Mirror image through the plane z = 0.
pub fn mirror_z(p: Point3) -> Point3 {
    Point3::new(p.x, p.y, -p.z)
}

/// A point charge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    /// Charge in coulombs.
    pub q: f64,
    pub position: Point3,
}

impl Charge {
    pub fn new(q: f64, position: Point3) -> Self {
        Charge { q, position }
    }

    /// Charge given in units of the elementary charge.
    pub fn elementary(n: f64, position: Point3) -> Self {
        Charge {
            q: n * ELEMENTARY_CHARGE,
            position,
        }
    }
}

/// Relative static permittivity of a region, or an ideal conductor.
///
/// Conductors are kept as a separate state so formulas can take the exact
/// limit instead of working with a very large finite number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Permittivity {
    Finite(f64),
    PerfectConductor,
}

impl Permittivity {
    pub fn finite(self) -> Option<f64> {
        match self {
            Permittivity::Finite(e) => Some(e),
            Permittivity::PerfectConductor => None,
        }
    }

    pub fn is_conductor(self) -> bool {
        matches!(self, Permittivity::PerfectConductor)
    }

    /// Reflection coefficient (ε − host)/(ε + host); exactly 1 for a conductor.
    pub fn reflection_against(self, host: f64) -> f64 {
        match self {
            Permittivity::Finite(e) => (e - host) / (e + host),
            Permittivity::PerfectConductor => 1.0,
        }
    }

    /// 1/ε, with the conductor limit 0.
    pub fn inverse(self) -> f64 {
        match self {
            Permittivity::Finite(e) => 1.0 / e,
            Permittivity::PerfectConductor => 0.0,
        }
    }

    pub fn validate(self, name: &str) -> Result<()> {
        match self {
            Permittivity::Finite(e) if !e.is_finite() || e < 1.0 => Err(Error::InvalidGeometry {
                module: MODULE,
                reason: format!("{name} = {e} must be finite and >= 1"),
            }),
            _ => Ok(()),
        }
    }

    /// Multiply a finite permittivity by `c`; conductors stay conductors.
    pub fn scaled(self, c: f64) -> Permittivity {
        match self {
            Permittivity::Finite(e) => Permittivity::Finite(e * c),
            Permittivity::PerfectConductor => Permittivity::PerfectConductor,
        }
    }
}

impl From<f64> for Permittivity {
    fn from(e: f64) -> Self {
        Permittivity::Finite(e)
    }
}

impl fmt::Display for Permittivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Permittivity::Finite(e) => write!(f, "{e}"),
            Permittivity::PerfectConductor => f.write_str("conductor"),
        }
    }
}

// Serialized as a plain number, or the string "conductor".
impl Serialize for Permittivity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Permittivity::Finite(e) => s.serialize_f64(*e),
            Permittivity::PerfectConductor => s.serialize_str("conductor"),
        }
    }
}

impl<'de> Deserialize<'de> for Permittivity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PermVisitor;

        impl Visitor<'_> for PermVisitor {
            type Value = Permittivity;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a relative permittivity >= 1 or the string \"conductor\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Permittivity, E> {
                Ok(Permittivity::Finite(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Permittivity, E> {
                Ok(Permittivity::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Permittivity, E> {
                Ok(Permittivity::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Permittivity, E> {
                match v {
                    "conductor" | "perfect_conductor" | "PerfectConductor" => {
                        Ok(Permittivity::PerfectConductor)
                    }
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        d.deserialize_any(PermVisitor)
    }
}

/// The electromagnetic environment surrounding the charges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    /// Homogeneous bulk of relative permittivity `eps`.
    FreeSpace { eps: f64 },
    /// Planar interface at z = 0; medium 1 fills z > 0, medium 2 fills z < 0.
    HalfSpace {
        eps1: Permittivity,
        eps2: Permittivity,
    },
    /// Gap of width `d` with permittivity `eps2`, bounded by `eps1` for
    /// z < −d/2 and `eps3` for z > d/2.
    ThreeLayerCavity {
        eps1: Permittivity,
        eps2: f64,
        eps3: Permittivity,
        d: f64,
    },
    /// Infinitely thin grounded plate at z = 0 with a circular hole of
    /// radius `radius` centred on the z axis.
    PlateWithHole {
        #[serde(alias = "R")]
        radius: f64,
    },
    /// Translation-invariant spatially dispersive medium.
    NonlocalBulk { drude: DrudeStatic },
    /// Dilute polarizable body treated to first Born order.
    DiluteBody(DiluteBody),
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::FreeSpace { .. } => "free_space",
            Geometry::HalfSpace { .. } => "half_space",
            Geometry::ThreeLayerCavity { .. } => "three_layer_cavity",
            Geometry::PlateWithHole { .. } => "plate_with_hole",
            Geometry::NonlocalBulk { .. } => "nonlocal_bulk",
            Geometry::DiluteBody(_) => "dilute_body",
        }
    }

    /// Reject permittivities below 1, non-positive gaps and negative radii.
    pub fn validate(&self) -> Result<()> {
        match self {
            Geometry::FreeSpace { eps } => Permittivity::Finite(*eps).validate("eps"),
            Geometry::HalfSpace { eps1, eps2 } => {
                eps1.validate("eps1")?;
                eps2.validate("eps2")
            }
            Geometry::ThreeLayerCavity { eps1, eps2, eps3, d } => {
                eps1.validate("eps1")?;
                Permittivity::Finite(*eps2).validate("eps2")?;
                eps3.validate("eps3")?;
                if !(d.is_finite() && *d > 0.0) {
                    return Err(Error::InvalidGeometry {
                        module: MODULE,
                        reason: format!("gap width d = {d} must be positive"),
                    });
                }
                Ok(())
            }
            Geometry::PlateWithHole { radius } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(Error::InvalidGeometry {
                        module: MODULE,
                        reason: format!("hole radius R = {radius} must be >= 0"),
                    });
                }
                Ok(())
            }
            Geometry::NonlocalBulk { drude } => drude.validate(),
            Geometry::DiluteBody(body) => body.validate().map_err(|e| match e {
                Error::InvalidParameter { reason, .. } => Error::InvalidGeometry {
                    module: DENSITY_MODULE,
                    reason,
                },
                other => other,
            }),
        }
    }

    /// True when the Green's function depends only on r − r′.
    pub fn is_translation_invariant(&self) -> bool {
        matches!(self, Geometry::FreeSpace { .. } | Geometry::NonlocalBulk { .. })
    }
}

/// A Green's-function value with an estimate of its absolute numerical error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GreensValue {
    /// Value in 1/m.
    pub value: f64,
    /// Absolute error estimate in 1/m; zero for closed forms.
    pub abs_err: f64,
}

impl GreensValue {
    pub fn exact(value: f64) -> Self {
        GreensValue {
            value,
            abs_err: 0.0,
        }
    }

    pub fn new(value: f64, abs_err: f64) -> Self {
        GreensValue {
            value,
            abs_err: abs_err.abs(),
        }
    }

    pub fn scale(self, s: f64) -> Self {
        GreensValue {
            value: self.value * s,
            abs_err: self.abs_err * s.abs(),
        }
    }
}

impl std::ops::Add for GreensValue {
    type Output = GreensValue;
    fn add(self, o: GreensValue) -> GreensValue {
        GreensValue {
            value: self.value + o.value,
            abs_err: self.abs_err + o.abs_err,
        }
    }
}

impl std::ops::Sub for GreensValue {
    type Output = GreensValue;
    fn sub(self, o: GreensValue) -> GreensValue {
        GreensValue {
            value: self.value - o.value,
            abs_err: self.abs_err + o.abs_err,
        }
    }
}

/// Tolerances and limits for the adaptive quadrature routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    /// Absolute tolerance in the units of the integral being computed.
    pub abs_tol: f64,
    /// Maximum number of panels (oscillation half-periods or refinement
    /// cells) before giving up.
    pub max_panels: usize,
    /// Depth of the series-acceleration table.
    pub accel_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-11,
            abs_tol: 1e-16,
            max_panels: 4000,
            accel_order: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(MODULE, format!("rel_tol = {} must be > 0", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid(MODULE, format!("abs_tol = {} must be >= 0", self.abs_tol)));
        }
        if self.max_panels < 8 {
            return Err(Error::invalid(
                MODULE,
                format!("max_panels = {} must be >= 8", self.max_panels),
            ));
        }
        if self.accel_order < 2 {
            return Err(Error::invalid(
                MODULE,
                format!("accel_order = {} must be >= 2", self.accel_order),
            ));
        }
        Ok(())
    }

    pub(crate) fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Point3::ORIGIN, Point3::on_axis(1.0)), 1.0);
        assert_eq!(distance(Point3::new(1.0, 2.0, 2.0), Point3::ORIGIN), 3.0);
    }

    #[test]
    fn mirror_examples() {
        assert_eq!(mirror_z(Point3::new(1.0, 2.0, 3.0)), Point3::new(1.0, 2.0, -3.0));
        assert_eq!(mirror_z(Point3::ORIGIN), Point3::ORIGIN);
    }

    #[test]
    fn cylindrical_helpers() {
        let p = Point3::from_cylindrical(2.0, 0.5, -1.0);
        assert!((p.rho() - 2.0).abs() < 1e-15);
        assert!((p.phi() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn geometry_validation_rejects_bad_values() {
        assert!(Geometry::FreeSpace { eps: 0.5 }.validate().is_err());
        assert!(Geometry::HalfSpace {
            eps1: 1.0.into(),
            eps2: Permittivity::Finite(0.9)
        }
        .validate()
        .is_err());
        let cavity = |d: f64| Geometry::ThreeLayerCavity {
            eps1: Permittivity::PerfectConductor,
            eps2: 1.0,
            eps3: 2.0.into(),
            d,
        };
        assert!(cavity(0.0).validate().is_err());
        assert!(cavity(-1.0).validate().is_err());
        assert!(cavity(1.0).validate().is_ok());
        assert!(Geometry::PlateWithHole { radius: -1.0 }.validate().is_err());
        assert!(Geometry::PlateWithHole { radius: 0.0 }.validate().is_ok());
    }

    #[test]
    fn permittivity_json() {
        let p: Permittivity = serde_json::from_str("\"conductor\"").unwrap();
        assert_eq!(p, Permittivity::PerfectConductor);
        let p: Permittivity = serde_json::from_str("4").unwrap();
        assert_eq!(p, Permittivity::Finite(4.0));
        assert!(serde_json::from_str::<Permittivity>("\"metal\"").is_err());
        assert_eq!(serde_json::to_string(&Permittivity::PerfectConductor).unwrap(), "\"conductor\"");
    }

    #[test]
    fn conductor_reflection_is_exact() {
        assert_eq!(Permittivity::PerfectConductor.reflection_against(7.0), 1.0);
        assert_eq!(Permittivity::PerfectConductor.inverse(), 0.0);
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let bad = QuadratureSpec {
            max_panels: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(QuadratureSpec::default().with_rel_tol(0.0).validate().is_err());
    }

    fn point() -> impl Strategy<Value = Point3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in point(), b in point(), c in point()) {
            let ab = distance(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, distance(b, a));
            prop_assert!(distance(a, c) <= ab + distance(b, c) + 1e-12);
        }

        #[test]
        fn mirror_is_an_involution(p in point()) {
            prop_assert_eq!(mirror_z(mirror_z(p)), p);
        }
    }
}
