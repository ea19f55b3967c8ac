//! First-order Born expansion for a dilute polarizable body.
//!
//! A body is a number density η(r) of identical molecules with static
//! polarizability α, embedded in a uniform background of permittivity
//! `background_eps`. To first order in ηα the scattering Green's function is
//!
//! ```text
//! g1(r, r') = −(1/ε₀) ∫ d³r_B η(r_B) ∇_B g0(r, r_B)·α·∇_B g0(r_B, r')
//! ```
//!
//! and the self-energy of a charge is the volume integral of the pairwise
//! charge–molecule potential. Volumes are integrated with a deterministic
//! adaptive tensor Gauss rule; the half-space is covered in spherical
//! coordinates with an algebraic radial map onto a finite interval.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_10, Estimate};
use crate::types::{Charge, GreensValue, Point3, QuadratureSpec, EPSILON_0};

const MODULE: &str = "born";
/// Module name reported for invalid density declarations.
pub const DENSITY_MODULE: &str = "born";

/// Symmetric, positive semi-definite 3×3 static polarizability (C·m²/V).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolarizabilityTensor(pub [[f64; 3]; 3]);

impl PolarizabilityTensor {
    pub fn isotropic(alpha: f64) -> Self {
        Self::diagonal(alpha, alpha, alpha)
    }

    pub fn diagonal(ax: f64, ay: f64, az: f64) -> Self {
        PolarizabilityTensor([[ax, 0.0, 0.0], [0.0, ay, 0.0], [0.0, 0.0, az]])
    }

    /// u·α·v
    /// Largest entry magnitude, used to normalise integrands.
    pub fn scale(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        PolarizabilityTensor(self.0.map(|row| row.map(|x| x * c)))
    }

    pub fn contract(&self, u: Point3, v: Point3) -> f64 {
        let a = &self.0;
        let u = u.to_array();
        let v = v.to_array();
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += u[i] * a[i][j] * v[j];
            }
        }
        s
    }

    /// Checks finiteness, symmetry to 1e-12 relative, and positive
    /// semi-definiteness through the principal minors.
    pub fn validate(&self) -> Result<()> {
        let a = &self.0;
        let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        if a.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid(MODULE, "polarizability has non-finite entries"));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(MODULE, format!("polarizability is not symmetric at ({i}, {j})")));
                }
            }
        }
        let tol = 1e-12;
        let minor2 = |i: usize, j: usize| a[i][i] * a[j][j] - a[i][j] * a[j][i];
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        let psd = (0..3).all(|i| a[i][i] >= -tol * scale)
            && [(0, 1), (0, 2), (1, 2)].iter().all(|&(i, j)| minor2(i, j) >= -tol * scale * scale)
            && det >= -tol * scale * scale * scale;
        if !psd {
            return Err(Error::invalid(MODULE, "polarizability is not positive semi-definite"));
        }
        Ok(())
    }
}

/// Support of one constant-density piece.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionShape {
    /// Axis-aligned box.
    Box { min: Point3, max: Point3 },
    /// Everything below the plane z = `z_top`.
    HalfSpace { z_top: f64 },
    /// A small cell treated as a single quadrature node at its centre.
    Cell { center: Point3, volume: f64 },
}

impl RegionShape {
    /// True when `p` lies in the closed region (for a cell: at its centre).
    pub fn contains(&self, p: Point3) -> bool {
        match *self {
            RegionShape::Box { min, max } => {
                (min.x..=max.x).contains(&p.x) && (min.y..=max.y).contains(&p.y) && (min.z..=max.z).contains(&p.z)
            }
            RegionShape::HalfSpace { z_top } => p.z <= z_top,
            RegionShape::Cell { center, .. } => p == center,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityRegion {
    pub shape: RegionShape,
    /// Number density in 1/m³.
    pub eta: f64,
}

/// A dilute body: η(r) is the sum of the region densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiluteBody {
    pub density: Vec<DensityRegion>,
    pub alpha: PolarizabilityTensor,
    #[serde(default = "unit")]
    pub background_eps: f64,
}

fn unit() -> f64 {
    1.0
}

impl DiluteBody {
    pub fn new(density: Vec<DensityRegion>, alpha: PolarizabilityTensor) -> Self {
        DiluteBody {
            density,
            alpha,
            background_eps: 1.0,
        }
    }

    /// Uniform density filling z < z_top.
    pub fn half_space(z_top: f64, eta: f64, alpha: PolarizabilityTensor) -> Self {
        Self::new(
            vec![DensityRegion {
                shape: RegionShape::HalfSpace { z_top },
                eta,
            }],
            alpha,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        if !(self.background_eps >= 1.0 && self.background_eps.is_finite()) {
            return Err(Error::invalid(MODULE, format!("background_eps = {} must be >= 1", self.background_eps)));
        }
        for (i, region) in self.density.iter().enumerate() {
            if !(region.eta >= 0.0 && region.eta.is_finite()) {
                return Err(Error::invalid(MODULE, format!("region {i}: eta = {} must be >= 0", region.eta)));
            }
            let ok = match region.shape {
                RegionShape::Box { min, max } => {
                    min.is_finite() && max.is_finite() && max.x > min.x && max.y > min.y && max.z > min.z
                }
                RegionShape::HalfSpace { z_top } => z_top.is_finite(),
                RegionShape::Cell { center, volume } => center.is_finite() && volume > 0.0 && volume.is_finite(),
            };
            if !ok {
                return Err(Error::invalid(MODULE, format!("region {i} has a degenerate shape")));
            }
        }
        Ok(())
    }

    fn check_outside(&self, p: Point3) -> Result<()> {
        let inside = self.density.iter().any(|r| r.eta != 0.0 && r.shape.contains(p));
        if inside {
            return Err(Error::PointInsideBody { x: p.x, y: p.y, z: p.z });
        }
        Ok(())
    }

    /// Distance from `p` to the nearest occupied region (0 if inside).
    pub fn distance_to_surface(&self, p: Point3) -> f64 {
        self.density
            .iter()
            .filter(|r| r.eta != 0.0)
            .map(|r| match r.shape {
                RegionShape::Box { min, max } => {
                    let d = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi).max(0.0);
                    let (dx, dy, dz) = (d(p.x, min.x, max.x), d(p.y, min.y, max.y), d(p.z, min.z, max.z));
                    (dx * dx + dy * dy + dz * dz).sqrt()
                }
                RegionShape::HalfSpace { z_top } => (p.z - z_top).max(0.0),
                RegionShape::Cell { center, .. } => crate::types::distance(p, center),
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Charge–molecule energy −q²(r·α·r)/(32π²ε₀² r⁶) with r = r_A − r_B.
pub fn charge_molecule_potential(q_a: f64, r_a: Point3, r_b: Point3, alpha: &PolarizabilityTensor) -> Result<f64> {
    let r = r_a - r_b;
    let r2 = r.dot(&r);
    if r2 == 0.0 {
        return Err(Error::CoincidentPoints { module: MODULE });
    }
    Ok(-q_a * q_a * alpha.contract(r, r) / (32.0 * PI * PI * EPSILON_0 * EPSILON_0 * r2 * r2 * r2))
}

/// Gauss–Legendre rule of order n on [−1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Map from the parameter box to physical space with its Jacobian.
#[derive(Clone, Copy)]
enum VolumeMap {
    Box { min: Point3, max: Point3 },
    /// Spherical coordinates about (cx, cy, z_top) restricted to the lower
    /// hemisphere: R = L·u/(1 − u), cos θ ∈ [−1, 0], φ ∈ [0, 2π].
    HalfSpace { cx: f64, cy: f64, z_top: f64, scale: f64 },
}

impl VolumeMap {
    fn param_box(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            VolumeMap::Box { .. } => ([0.0; 3], [1.0; 3]),
            VolumeMap::HalfSpace { .. } => ([0.0, -1.0, 0.0], [1.0, 0.0, 2.0 * PI]),
        }
    }

    fn apply(&self, t: [f64; 3]) -> Option<(Point3, f64)> {
        match *self {
            VolumeMap::Box { min, max } => {
                let e = max - min;
                Some((
                    Point3::new(min.x + e.x * t[0], min.y + e.y * t[1], min.z + e.z * t[2]),
                    e.x * e.y * e.z,
                ))
            }
            VolumeMap::HalfSpace { cx, cy, z_top, scale } => {
                let w = 1.0 - t[0];
                if w <= 0.0 {
                    return None;
                }
                let radius = scale * t[0] / w;
                let cos_t = t[1];
                let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                let (sin_p, cos_p) = t[2].sin_cos();
                let p = Point3::new(
                    cx + radius * sin_t * cos_p,
                    cy + radius * sin_t * sin_p,
                    z_top + radius * cos_t,
                );
                Some((p, radius * radius * scale / (w * w)))
            }
        }
    }
}

struct Cell {
    lo: [f64; 3],
    hi: [f64; 3],
    value: f64,
    err: f64,
    id: usize,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then_with(|| other.id.cmp(&self.id))
    }
}

struct Cubature<'a, F> {
    f: F,
    map: VolumeMap,
    hi_rule: &'a [(f64, f64)],
    lo_rule: &'a [(f64, f64)],
}

impl<F: FnMut(Point3) -> f64> Cubature<'_, F> {
    fn tensor(&mut self, rule: &[(f64, f64)], lo: [f64; 3], hi: [f64; 3]) -> f64 {
        let half = [0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1]), 0.5 * (hi[2] - lo[2])];
        let mid = [0.5 * (hi[0] + lo[0]), 0.5 * (hi[1] + lo[1]), 0.5 * (hi[2] + lo[2])];
        let mut sum = 0.0;
        for &(a, wa) in rule {
            for &(b, wb) in rule {
                for &(c, wc) in rule {
                    let t = [mid[0] + half[0] * a, mid[1] + half[1] * b, mid[2] + half[2] * c];
                    if let Some((p, jac)) = self.map.apply(t) {
                        let v = (self.f)(p) * jac;
                        if v.is_finite() {
                            sum += wa * wb * wc * v;
                        }
                    }
                }
            }
        }
        sum * half[0] * half[1] * half[2]
    }

    fn cell(&mut self, lo: [f64; 3], hi: [f64; 3], id: usize) -> Cell {
        let value = self.tensor(self.hi_rule, lo, hi);
        let coarse = self.tensor(self.lo_rule, lo, hi);
        Cell {
            lo,
            hi,
            value,
            err: (value - coarse).abs(),
            id,
        }
    }
}

/// Adaptive cubature over the image of the parameter box. Cells with the
/// largest error estimate are bisected in all three directions until the
/// summed estimate meets the tolerance or `max_panels` splits are spent.
fn integrate_mapped<F: FnMut(Point3) -> f64>(f: F, map: VolumeMap, spec: &QuadratureSpec) -> Result<Estimate> {
    let hi_rule = gauss_legendre_10();
    let lo_rule = gauss_legendre(6);
    let mut cub = Cubature {
        f,
        map,
        hi_rule: &hi_rule,
        lo_rule: &lo_rule,
    };
    let (lo, hi) = map.param_box();
    let mut next_id = 0usize;
    let mut heap = BinaryHeap::new();
    heap.push(cub.cell(lo, hi, next_id));
    next_id += 1;
    let mut splits = 0usize;
    loop {
        let (value, err) = totals(&heap);
        if err <= spec.tolerance_for(value) {
            return Ok(Estimate {
                value,
                abs_err: err,
                panels: heap.len(),
            });
        }
        if splits >= spec.max_panels {
            return Err(Error::NoConvergence {
                module: MODULE,
                panels: heap.len(),
                estimate: value,
                abs_err: err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = [
            0.5 * (worst.lo[0] + worst.hi[0]),
            0.5 * (worst.lo[1] + worst.hi[1]),
            0.5 * (worst.lo[2] + worst.hi[2]),
        ];
        for octant in 0..8 {
            let mut clo = worst.lo;
            let mut chi = worst.hi;
            for axis in 0..3 {
                if octant >> axis & 1 == 0 {
                    chi[axis] = mid[axis];
                } else {
                    clo[axis] = mid[axis];
                }
            }
            heap.push(cub.cell(clo, chi, next_id));
            next_id += 1;
        }
        splits += 1;
    }
}

/// Sums in cell-creation order so the result does not depend on heap layout.
fn totals(heap: &BinaryHeap<Cell>) -> (f64, f64) {
    let mut cells: Vec<&Cell> = heap.iter().collect();
    cells.sort_by_key(|c| c.id);
    cells.iter().fold((0.0, 0.0), |(v, e), c| (v + c.value, e + c.err))
}

/// ∫ f d³r over one region. `focus` lists the points where the integrand
/// peaks; for unbounded regions they set the centre and length scale of the
/// coordinate map.
pub fn integrate_over_region<F: FnMut(Point3) -> f64>(
    shape: &RegionShape,
    focus: &[Point3],
    mut f: F,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    spec.validate()?;
    match *shape {
        RegionShape::Cell { center, volume } => Ok(Estimate {
            value: f(center) * volume,
            abs_err: 0.0,
            panels: 1,
        }),
        RegionShape::Box { min, max } => integrate_mapped(f, VolumeMap::Box { min, max }, spec),
        RegionShape::HalfSpace { z_top } => {
            let n = focus.len().max(1) as f64;
            let cx = focus.iter().map(|p| p.x).sum::<f64>() / n;
            let cy = focus.iter().map(|p| p.y).sum::<f64>() / n;
            let height = focus.iter().map(|p| (p.z - z_top).abs()).fold(f64::INFINITY, f64::min);
            let spread = focus
                .iter()
                .flat_map(|a| focus.iter().map(move |b| crate::types::distance(*a, *b)))
                .fold(0.0, f64::max);
            let mut scale = height.max(spread);
            if !(scale > 0.0 && scale.is_finite()) {
                scale = 1.0;
            }
            integrate_mapped(f, VolumeMap::HalfSpace { cx, cy, z_top, scale }, spec)
        }
    }
}

fn integrate_body<F: FnMut(Point3) -> f64>(
    body: &DiluteBody,
    focus: &[Point3],
    mut f: F,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let mut total = Estimate {
        value: 0.0,
        abs_err: 0.0,
        panels: 0,
    };
    for region in body.density.iter().filter(|r| r.eta != 0.0) {
        let per_region = QuadratureSpec {
            abs_tol: spec.abs_tol / region.eta,
            ..*spec
        };
        let part = integrate_over_region(&region.shape, focus, &mut f, &per_region)?;
        total.value += region.eta * part.value;
        total.abs_err += region.eta * part.abs_err;
        total.panels += part.panels;
    }
    Ok(total)
}

/// First Born approximation to the scattering Green's function of the body,
/// with the background kernel 1/(4π ε_b |·|).
pub fn born_scattering_g1(r: Point3, r_src: Point3, body: &DiluteBody, spec: &QuadratureSpec) -> Result<GreensValue> {
    body.validate()?;
    body.check_outside(r)?;
    body.check_outside(r_src)?;
    let eb = body.background_eps;
    let alpha_scale = body.alpha.scale();
    if alpha_scale == 0.0 {
        return Ok(GreensValue::exact(0.0));
    }
    let prefactor = -alpha_scale / (EPSILON_0 * 16.0 * PI * PI * eb * eb);
    let scaled = QuadratureSpec {
        abs_tol: spec.abs_tol / prefactor.abs(),
        ..*spec
    };
    let alpha = body.alpha.scaled(1.0 / alpha_scale);
    let kernel = |p: Point3| {
        let u = r - p;
        let v = r_src - p;
        let nu = u.norm();
        let nv = v.norm();
        alpha.contract(u, v) / (nu * nu * nu * nv * nv * nv)
    };
    let est = integrate_body(body, &[r, r_src], kernel, &scaled)?;
    Ok(GreensValue::new(est.value, est.abs_err).scale(prefactor))
}

/// Self-energy of a charge near the body as the volume integral of
/// [`charge_molecule_potential`], divided by ε_b². Returns joules.
pub fn charge_body_energy(a: &Charge, body: &DiluteBody, spec: &QuadratureSpec) -> Result<Estimate> {
    body.validate()?;
    body.check_outside(a.position)?;
    let eb2 = body.background_eps * body.background_eps;
    // Integrate the unit-charge, unit-α-scale potential and rescale afterwards.
    // `abs_tol` is read in units of g1 (1/m), as for the Green's-function route.
    let alpha_scale = body.alpha.scale();
    if alpha_scale == 0.0 || a.q == 0.0 {
        return Ok(Estimate { value: 0.0, abs_err: 0.0, panels: 0 });
    }
    let unit = 32.0 * PI * PI * EPSILON_0 * EPSILON_0;
    let prefactor = a.q * a.q * alpha_scale / (unit * eb2);
    let scaled = QuadratureSpec {
        abs_tol: spec.abs_tol * a.q * a.q / (2.0 * EPSILON_0 * prefactor.abs()),
        ..*spec
    };
    let ra = a.position;
    let alpha = body.alpha.scaled(1.0 / alpha_scale);
    let kernel = |p: Point3| charge_molecule_potential(1.0, ra, p, &alpha).map(|u| u * unit).unwrap_or(0.0);
    let est = integrate_body(body, &[ra], kernel, &scaled)?;
    Ok(Estimate {
        value: est.value * prefactor,
        abs_err: est.abs_err * prefactor.abs(),
        panels: est.panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ELEMENTARY_CHARGE;
    use proptest::prelude::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default().with_rel_tol(1e-8)
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = gauss_legendre(6);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-15);
        let ten: f64 = gauss_legendre(10).iter().map(|(x, w)| w * x.powi(18)).sum();
        assert!((ten - 2.0 / 19.0).abs() < 1e-15);
    }

    #[test]
    fn isotropic_molecule_potential() {
        let alpha = 2e-40;
        let r = 3e-10;
        let u = charge_molecule_potential(1.6e-19, Point3::on_axis(r), Point3::ORIGIN, &PolarizabilityTensor::isotropic(alpha)).unwrap();
        let expected = -(1.6e-19f64).powi(2) * alpha / (32.0 * PI * PI * EPSILON_0 * EPSILON_0 * r.powi(4));
        assert!((u - expected).abs() < 1e-14 * expected.abs());
    }

    #[test]
    fn anisotropic_molecule_potential() {
        let a = PolarizabilityTensor::diagonal(1e-40, 0.0, 0.0);
        let along_x = charge_molecule_potential(1.0, Point3::new(2.0, 0.0, 0.0), Point3::ORIGIN, &a).unwrap();
        let expected = -1e-40 / (32.0 * PI * PI * EPSILON_0 * EPSILON_0 * 16.0);
        assert!((along_x - expected).abs() < 1e-14 * expected.abs());
        let along_y = charge_molecule_potential(1.0, Point3::new(0.0, 2.0, 0.0), Point3::ORIGIN, &a).unwrap();
        assert_eq!(along_y, 0.0);
    }

    #[test]
    fn tensor_validation() {
        assert!(PolarizabilityTensor::isotropic(1.0).validate().is_ok());
        let asym = PolarizabilityTensor([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(asym.validate().is_err());
        let indefinite = PolarizabilityTensor([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(indefinite.validate().is_err());
        assert!(PolarizabilityTensor::diagonal(1.0, 0.0, 0.0).validate().is_ok());
    }

    #[test]
    fn empty_body_scatters_nothing() {
        let body = DiluteBody::half_space(0.0, 0.0, PolarizabilityTensor::isotropic(1e-40));
        let g = born_scattering_g1(Point3::on_axis(1.0), Point3::on_axis(2.0), &body, &spec()).unwrap();
        assert_eq!(g.value, 0.0);
        let u = charge_body_energy(&Charge::new(1.0, Point3::on_axis(1.0)), &body, &spec()).unwrap();
        assert_eq!(u.value, 0.0);
    }

    #[test]
    fn single_cell_is_one_node() {
        let alpha = PolarizabilityTensor::diagonal(1e-40, 2e-40, 3e-40);
        let center = Point3::new(0.1, -0.2, 0.3);
        let body = DiluteBody::new(
            vec![DensityRegion {
                shape: RegionShape::Cell { center, volume: 1e-3 },
                eta: 1e25,
            }],
            alpha,
        );
        let (r, s) = (Point3::new(1.0, 0.5, 2.0), Point3::new(-0.5, 1.0, 1.0));
        let g = born_scattering_g1(r, s, &body, &spec()).unwrap();
        let u = r - center;
        let v = s - center;
        let grad = |w: Point3| w.scale(1.0 / (4.0 * PI * w.norm().powi(3)));
        let expected = -(1e25 * 1e-3 / EPSILON_0) * alpha.contract(grad(u), grad(v));
        assert!((g.value - expected).abs() < 1e-14 * expected.abs());
        let a = Charge::new(2.0, r);
        let e = charge_body_energy(&a, &body, &spec()).unwrap();
        let single = 1e25 * 1e-3 * charge_molecule_potential(2.0, r, center, &alpha).unwrap();
        assert!((e.value - single).abs() < 1e-14 * single.abs());
    }

    #[test]
    fn half_space_volume_identity() {
        let h = 0.7;
        let est = integrate_over_region(
            &RegionShape::HalfSpace { z_top: 0.0 },
            &[Point3::on_axis(h)],
            |p| (p - Point3::on_axis(h)).norm().powi(-4),
            &QuadratureSpec::default().with_rel_tol(1e-9),
        )
        .unwrap();
        assert!((est.value - PI / h).abs() < 1e-8 * PI / h, "{est:?}");
    }

    #[test]
    fn box_integral_of_constant_is_volume() {
        let shape = RegionShape::Box {
            min: Point3::new(0.0, 0.0, 0.0),
            max: Point3::new(1.0, 2.0, 3.0),
        };
        let est = integrate_over_region(&shape, &[], |_| 1.0, &spec()).unwrap();
        assert!((est.value - 6.0).abs() < 1e-13);
    }

    #[test]
    fn half_space_body_self_energy() {
        let (h, eta, alpha) = (1e-9, 1e28, 1e-40);
        let body = DiluteBody::half_space(0.0, eta, PolarizabilityTensor::isotropic(alpha));
        let q = 1.602176634e-19;
        let expected = -q * q * eta * alpha / (32.0 * PI * EPSILON_0 * EPSILON_0 * h);
        let r = Point3::on_axis(h);
        let g1 = born_scattering_g1(r, r, &body, &spec()).unwrap();
        let via_g = q * q / (2.0 * EPSILON_0) * g1.value;
        assert!(((via_g - expected) / expected).abs() < 1e-6);
        let direct = charge_body_energy(&Charge::new(q, r), &body, &spec()).unwrap();
        assert!(((direct.value - expected) / expected).abs() < 1e-6);
    }

    #[test]
    fn tolerance_is_relative_for_realistic_magnitudes() {
        // SI polarizabilities are ~1e-40; the error must still track rel_tol.
        let body = DiluteBody::half_space(0.0, 1e27, PolarizabilityTensor::diagonal(1e-40, 2e-40, 3e-40));
        let strict = QuadratureSpec::default();
        let a = Charge::new(ELEMENTARY_CHARGE, Point3::new(0.1, 0.0, 0.5));
        let u = charge_body_energy(&a, &body, &strict).unwrap();
        assert!(u.abs_err <= 1e-10 * u.value.abs(), "{u:?}");
        let g = born_scattering_g1(a.position, a.position, &body, &strict).unwrap();
        assert!(g.abs_err <= 1e-10 * g.value.abs(), "{g:?}");
    }

    #[test]
    fn rejects_points_inside() {
        let body = DiluteBody::half_space(0.0, 1e28, PolarizabilityTensor::isotropic(1e-40));
        let err = born_scattering_g1(Point3::on_axis(-1.0), Point3::on_axis(1.0), &body, &spec()).unwrap_err();
        assert!(matches!(err, Error::PointInsideBody { .. }));
    }

    #[test]
    fn body_schema_round_trip() {
        let json = r#"{"density":[{"shape":{"kind":"box","min":[0,0,-2],"max":[1,1,-1]},"eta":1e27}],"alpha":[[1e-40,0,0],[0,1e-40,0],[0,0,1e-40]]}"#;
        let body: DiluteBody = serde_json::from_str(json).unwrap();
        assert_eq!(body.background_eps, 1.0);
        assert!(body.validate().is_ok());
        let back: DiluteBody = serde_json::from_str(&serde_json::to_string(&body).unwrap()).unwrap();
        assert_eq!(back, body);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn molecule_potential_is_even_and_attractive(
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in 0.1f64..3.0,
            a in 0.0f64..2.0, b in 0.0f64..2.0, c in 0.0f64..2.0,
        ) {
            let alpha = PolarizabilityTensor::diagonal(a * 1e-40, b * 1e-40, c * 1e-40);
            let r = Point3::new(x, y, z);
            let plus = charge_molecule_potential(1.0, r, Point3::ORIGIN, &alpha).unwrap();
            let minus = charge_molecule_potential(1.0, -r, Point3::ORIGIN, &alpha).unwrap();
            prop_assert_eq!(plus, minus);
            prop_assert!(plus <= 0.0);
        }

        #[test]
        fn two_routes_agree_for_boxes(
            zc in 0.3f64..2.0, xs in -1.0f64..1.0, ys in -1.0f64..1.0, a in 0.2f64..2.0,
        ) {
            let body = DiluteBody::new(
                vec![DensityRegion {
                    shape: RegionShape::Box { min: Point3::new(-1.0, -0.5, -1.0), max: Point3::new(0.5, 1.0, 0.0) },
                    eta: 1e26,
                }],
                PolarizabilityTensor::diagonal(a * 1e-40, 1e-40, 0.5e-40),
            );
            let r = Point3::new(xs, ys, zc);
            let g1 = born_scattering_g1(r, r, &body, &spec()).unwrap();
            let via_g = 1.0 / (2.0 * EPSILON_0) * g1.value;
            let direct = charge_body_energy(&Charge::new(1.0, r), &body, &spec()).unwrap();
            prop_assert!(((via_g - direct.value) / direct.value).abs() < 1e-4);
        }
    }
}
