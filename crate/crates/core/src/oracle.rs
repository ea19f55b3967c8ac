//! Finite-volume Poisson solver for axisymmetric layered media, used as an
//! independent check of the analytic and quadrature Green's functions.
//!
//! The unknown is the scattering part u = g − g_f/ε_s, where g_f is the
//! unit-permittivity Coulomb kernel of an on-axis source and ε_s the
//! permittivity around it. u is smooth at the source; its equation is driven
//! only by faces where the permittivity differs from ε_s, and by conducting
//! walls where g = 0. Interfaces coincide with cell faces, face conductances
//! use the series (harmonic) combination of the two half-cells, and u = 0
//! on the outer boundary of a strongly stretched grid.

use std::io::Write;

use crate::error::{Error, Result};
use crate::types::{Geometry, Permittivity, Point3};

const MODULE: &str = "oracle";
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Grid layout. A uniform core of cell size `h` holds three quarters of the
/// cells in each direction; the rest grow geometrically out to the domain
/// edges. Halving `h` while doubling the counts refines the same mapping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n_rho: usize,
    pub n_z: usize,
    pub rho_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Relative residual at which the linear solve stops.
    pub tol: f64,
    /// Core cell size.
    pub h: f64,
    /// Height the z core is centred on.
    pub z_center: f64,
}

impl GridSpec {
    /// Grid for a half-space source at height `height`, with the domain
    /// reaching 10⁵ source heights.
    pub fn for_half_space(height: f64, n: usize) -> Self {
        let h = 12.0 * height.abs() / n as f64;
        let reach = 1e5 * height.abs();
        GridSpec {
            n_rho: n,
            n_z: n,
            rho_max: reach,
            z_min: -reach,
            z_max: reach,
            tol: 1e-10,
            h,
            z_center: 0.0,
        }
    }

    /// Grid for a cavity of width `d`, with the core cell size an integer
    /// fraction of d.
    pub fn for_cavity(d: f64, n: usize) -> Self {
        let per_gap = (n / 8).max(4);
        let h = d / per_gap as f64;
        let reach = 1e4 * d;
        GridSpec {
            n_rho: n,
            n_z: n,
            rho_max: reach,
            z_min: -reach,
            z_max: reach,
            tol: 1e-10,
            h,
            z_center: 0.0,
        }
    }

    /// Same mapping with half the core cell size.
    pub fn refined(&self) -> Self {
        GridSpec {
            n_rho: 2 * self.n_rho,
            n_z: 2 * self.n_z,
            h: 0.5 * self.h,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid(MODULE, reason));
        if self.n_rho < 32 || self.n_z < 32 {
            return bad(format!("grid {}x{} must be at least 32x32", self.n_rho, self.n_z));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("core cell size h = {} must be positive", self.h));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("solver tolerance {} must lie in (0, 1)", self.tol));
        }
        let core_rho = self.h * core_cells(self.n_rho) as f64;
        let half_core_z = 0.5 * self.h * core_cells(self.n_z) as f64;
        if !(self.rho_max > core_rho) {
            return bad(format!("rho_max = {} must exceed the core extent {core_rho}", self.rho_max));
        }
        if !(self.z_min < self.z_center - half_core_z - self.h && self.z_max > self.z_center + half_core_z + self.h) {
            return bad("z range must enclose the uniform core".to_string());
        }
        Ok(())
    }
}

fn core_cells(n: usize) -> usize {
    (3 * n / 4) & !1
}

/// Face positions growing geometrically from spacing `h` over `count` cells
/// to cover `length`.
fn stretched(h: f64, length: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let total = |r: f64| (1..=count).map(|j| h * r.powi(j as i32)).sum::<f64>();
    if total(1.0) >= length {
        return Err(Error::invalid(MODULE, "domain too small for the stretched layer"));
    }
    let (mut lo, mut hi) = (1.0, 2.0);
    while total(hi) < length {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let mut x = 0.0;
    let mut faces = Vec::with_capacity(count);
    for j in 1..=count {
        x += h * r.powi(j as i32);
        faces.push(x);
    }
    // Land exactly on the boundary.
    *faces.last_mut().expect("count > 0") = length;
    Ok(faces)
}

struct Layers {
    /// (upper interface position, permittivity below it); the last entry has +∞.
    slabs: Vec<(f64, Permittivity)>,
}

impl Layers {
    fn from_geometry(geom: &Geometry) -> Result<Self> {
        let slabs = match geom {
            Geometry::FreeSpace { eps } => vec![(f64::INFINITY, Permittivity::Finite(*eps))],
            Geometry::HalfSpace { eps1, eps2 } => vec![(0.0, *eps2), (f64::INFINITY, *eps1)],
            Geometry::ThreeLayerCavity { eps1, eps2, eps3, d } => vec![
                (-0.5 * d, *eps1),
                (0.5 * d, Permittivity::Finite(*eps2)),
                (f64::INFINITY, *eps3),
            ],
            other => {
                return Err(Error::UnsupportedGeometry {
                    operation: "oracle",
                    geometry: other.name(),
                })
            }
        };
        Ok(Layers { slabs })
    }

    fn at(&self, z: f64) -> Permittivity {
        self.slabs
            .iter()
            .find(|(top, _)| z < *top)
            .map(|s| s.1)
            .unwrap_or(self.slabs[self.slabs.len() - 1].1)
    }

    fn interfaces(&self) -> impl Iterator<Item = f64> + '_ {
        self.slabs.iter().map(|s| s.0).filter(|z| z.is_finite())
    }
}

/// Solved scattering field on the grid.
#[derive(Clone, Debug)]
pub struct ScatteringField {
    /// Radial faces, length n_rho + 1, starting at 0.
    pub rho_faces: Vec<f64>,
    /// Axial faces, length n_z + 1.
    pub z_faces: Vec<f64>,
    /// u at cell centres, row-major in z (index j·n_rho + i); NaN inside conductors.
    pub values: Vec<f64>,
    pub source: Point3,
    pub eps_source: f64,
    pub iterations: usize,
    pub residual: f64,
    eps_cells: Vec<Option<f64>>,
}

fn centres(faces: &[f64]) -> Vec<f64> {
    faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn free_kernel(rho: f64, z: f64, src_z: f64) -> f64 {
    1.0 / (FOUR_PI * rho.hypot(z - src_z))
}

/// Solves for g1 = g − g_f/ε_s around an on-axis source in a layered medium.
pub fn solve_scattering_g1(geom: &Geometry, src: Point3, grid: &GridSpec) -> Result<ScatteringField> {
    geom.validate()?;
    grid.validate()?;
    if src.rho() != 0.0 {
        return Err(Error::invalid(MODULE, "the oracle handles on-axis sources only"));
    }
    let layers = Layers::from_geometry(geom)?;
    if layers.interfaces().any(|z| z == src.z) {
        return Err(Error::SourceOnInterface { z: src.z });
    }
    let eps_s = layers.at(src.z).finite().ok_or(Error::OutOfRegion { module: MODULE, z: src.z })?;

    // Radial faces.
    let n_core_r = core_cells(grid.n_rho);
    let mut rho_faces: Vec<f64> = (0..=n_core_r).map(|i| i as f64 * grid.h).collect();
    let core_r = rho_faces[n_core_r];
    for x in stretched(grid.h, grid.rho_max - core_r, grid.n_rho - n_core_r)? {
        rho_faces.push(core_r + x);
    }

    // Axial faces, anchored so that interfaces fall on faces.
    let anchor = layers.interfaces().next().unwrap_or(0.0);
    for z in layers.interfaces() {
        let k = (z - anchor) / grid.h;
        if (k - k.round()).abs() > 1e-9 {
            return Err(Error::invalid(MODULE, format!("interface at z = {z} is not on a grid face")));
        }
    }
    let n_core_z = core_cells(grid.n_z);
    let k0 = ((grid.z_center - anchor) / grid.h).round() as i64 - (n_core_z / 2) as i64;
    let core: Vec<f64> = (0..=n_core_z as i64).map(|k| anchor + (k0 + k) as f64 * grid.h).collect();
    let (core_lo, core_hi) = (core[0], core[n_core_z]);
    let n_low = (grid.n_z - n_core_z) / 2;
    let n_high = grid.n_z - n_core_z - n_low;
    if !(grid.z_min < core_lo && grid.z_max > core_hi) {
        return Err(Error::invalid(MODULE, "z range must enclose the uniform core"));
    }
    let mut z_faces: Vec<f64> = stretched(grid.h, core_lo - grid.z_min, n_low)?
        .into_iter()
        .rev()
        .map(|x| core_lo - x)
        .collect();
    z_faces.extend_from_slice(&core);
    z_faces.extend(stretched(grid.h, grid.z_max - core_hi, n_high)?.into_iter().map(|x| core_hi + x));
    for z in layers.interfaces() {
        if z > core_lo && z < core_hi {
            continue;
        }
        if z_faces.iter().all(|f| (f - z).abs() > 1e-12 * grid.h.max(z.abs())) {
            return Err(Error::invalid(MODULE, format!("interface at z = {z} lies outside the uniform core")));
        }
    }
    let margin = 10.0 * grid.h;
    if src.z - margin < core_lo || src.z + margin > core_hi || core_r < margin {
        return Err(Error::invalid(MODULE, "source must sit at least 10 cells inside the uniform core"));
    }

    let rc = centres(&rho_faces);
    let zc = centres(&z_faces);
    let (nr, nz) = (rc.len(), zc.len());
    let eps_cells: Vec<Option<f64>> = (0..nz)
        .flat_map(|j| {
            let e = layers.at(zc[j]).finite();
            std::iter::repeat(e).take(nr)
        })
        .collect();

    let system = assemble(&rho_faces, &z_faces, &rc, &zc, &eps_cells, eps_s, src.z);
    let (values, iterations, residual) = pcg(&system, nr, nz, grid.tol)?;
    let values = values
        .into_iter()
        .zip(&eps_cells)
        .map(|(v, e)| if e.is_some() { v } else { f64::NAN })
        .collect();
    Ok(ScatteringField {
        rho_faces,
        z_faces,
        values,
        source: src,
        eps_source: eps_s,
        iterations,
        residual,
        eps_cells,
    })
}

/// Five-point system A u = b with A symmetric positive definite.
struct System {
    diag: Vec<f64>,
    /// Coupling to i + 1 (stored positive; the matrix entry is −east).
    east: Vec<f64>,
    /// Coupling to j + 1.
    north: Vec<f64>,
    rhs: Vec<f64>,
}

/// Conductance of a face of area `area` between half-cell lengths d1 (ε1)
/// and d2 (ε2).
fn conductance(area: f64, d1: f64, e1: f64, d2: f64, e2: f64) -> f64 {
    area / (d1 / e1 + d2 / e2)
}

fn assemble(rho_faces: &[f64], z_faces: &[f64], rc: &[f64], zc: &[f64], eps: &[Option<f64>], eps_s: f64, src_z: f64) -> System {
    let (nr, nz) = (rc.len(), zc.len());
    let n = nr * nz;
    let mut sys = System {
        diag: vec![0.0; n],
        east: vec![0.0; n],
        north: vec![0.0; n],
        rhs: vec![0.0; n],
    };
    let gf = |rho: f64, z: f64| free_kernel(rho, z, src_z);
    for j in 0..nz {
        let dz = z_faces[j + 1] - z_faces[j];
        for i in 0..nr {
            let k = j * nr + i;
            let e = match eps[k] {
                Some(e) => e,
                None => {
                    sys.diag[k] = 1.0;
                    continue;
                }
            };
            let dr = rho_faces[i + 1] - rho_faces[i];
            let area_r = rho_faces[i + 1] * dz;
            let area_z = 0.5 * (rho_faces[i + 1].powi(2) - rho_faces[i].powi(2));
            let g_here = gf(rc[i], zc[j]);

            // Each face: (neighbour index or None, area, own half-length,
            // neighbour half-length, face point, neighbour centre).
            let mut faces: Vec<(Option<usize>, f64, f64, f64, (f64, f64), (f64, f64))> = Vec::with_capacity(4);
            // East.
            if i + 1 < nr {
                let dn = rho_faces[i + 2] - rho_faces[i + 1];
                faces.push((Some(k + 1), area_r, 0.5 * dr, 0.5 * dn, (rho_faces[i + 1], zc[j]), (rc[i + 1], zc[j])));
            } else {
                faces.push((None, area_r, 0.5 * dr, 0.0, (rho_faces[i + 1], zc[j]), (rho_faces[i + 1], zc[j])));
            }
            // West: the axis carries no flux.
            if i > 0 {
                let dn = rho_faces[i] - rho_faces[i - 1];
                faces.push((Some(k - 1), rho_faces[i] * dz, 0.5 * dr, 0.5 * dn, (rho_faces[i], zc[j]), (rc[i - 1], zc[j])));
            }
            // North.
            if j + 1 < nz {
                let dn = z_faces[j + 2] - z_faces[j + 1];
                faces.push((Some(k + nr), area_z, 0.5 * dz, 0.5 * dn, (rc[i], z_faces[j + 1]), (rc[i], zc[j + 1])));
            } else {
                faces.push((None, area_z, 0.5 * dz, 0.0, (rc[i], z_faces[j + 1]), (rc[i], z_faces[j + 1])));
            }
            // South.
            if j > 0 {
                let dn = z_faces[j] - z_faces[j - 1];
                faces.push((Some(k - nr), area_z, 0.5 * dz, 0.5 * dn, (rc[i], z_faces[j]), (rc[i], zc[j - 1])));
            } else {
                faces.push((None, area_z, 0.5 * dz, 0.0, (rc[i], z_faces[j]), (rc[i], z_faces[j])));
            }

            for (nb, area, d_own, d_nb, face_pt, nb_pt) in faces {
                match nb.map(|m| (m, eps[m])) {
                    Some((m, Some(e_nb))) => {
                        let c = conductance(area, d_own, e, d_nb, e_nb);
                        sys.diag[k] += c;
                        if m == k + 1 {
                            sys.east[k] = c;
                        } else if m == k + nr {
                            sys.north[k] = c;
                        }
                        if e != eps_s || e_nb != eps_s {
                            let c_s = conductance(area, d_own, eps_s, d_nb, eps_s);
                            let g_nb = gf(nb_pt.0, nb_pt.1);
                            sys.rhs[k] += (c - c_s) * (g_nb - g_here) / eps_s;
                        }
                    }
                    Some((_, None)) => {
                        // Grounded conductor: g = 0 on the face.
                        let c = area * e / d_own;
                        let g_face = gf(face_pt.0, face_pt.1);
                        sys.diag[k] += c;
                        sys.rhs[k] -= c * g_face / eps_s;
                        if e != eps_s {
                            let c_s = area * eps_s / d_own;
                            sys.rhs[k] += (c - c_s) * (g_face - g_here) / eps_s;
                        }
                    }
                    None => {
                        // Outer boundary, u = 0.
                        let c = area * e / d_own;
                        sys.diag[k] += c;
                        if e != eps_s {
                            let c_s = area * eps_s / d_own;
                            let g_face = gf(face_pt.0, face_pt.1);
                            sys.rhs[k] += (c - c_s) * (g_face - g_here) / eps_s;
                        }
                    }
                }
            }
        }
    }
    sys
}

fn apply(sys: &System, nr: usize, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for k in 0..n {
        let mut v = sys.diag[k] * x[k];
        if k + 1 < n && (k + 1) % nr != 0 {
            v -= sys.east[k] * x[k + 1];
        }
        if k % nr != 0 {
            v -= sys.east[k - 1] * x[k - 1];
        }
        if k + nr < n {
            v -= sys.north[k] * x[k + nr];
        }
        if k >= nr {
            v -= sys.north[k - nr] * x[k - nr];
        }
        out[k] = v;
    }
}

/// Incomplete Cholesky pivots for the five-point matrix.
fn ic0(sys: &System, nr: usize) -> Vec<f64> {
    let n = sys.diag.len();
    let mut d = vec![0.0; n];
    for k in 0..n {
        let mut v = sys.diag[k];
        if k % nr != 0 {
            v -= sys.east[k - 1].powi(2) / d[k - 1];
        }
        if k >= nr {
            v -= sys.north[k - nr].powi(2) / d[k - nr];
        }
        d[k] = v;
    }
    d
}

fn precondition(sys: &System, d: &[f64], nr: usize, r: &[f64], z: &mut [f64]) {
    let n = r.len();
    for k in 0..n {
        let mut v = r[k];
        if k % nr != 0 {
            v += sys.east[k - 1] * z[k - 1];
        }
        if k >= nr {
            v += sys.north[k - nr] * z[k - nr];
        }
        z[k] = v / d[k];
    }
    for k in (0..n).rev() {
        let mut v = 0.0;
        if k + 1 < n && (k + 1) % nr != 0 {
            v += sys.east[k] * z[k + 1];
        }
        if k + nr < n {
            v += sys.north[k] * z[k + nr];
        }
        z[k] += v / d[k];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients; stops at ‖r‖ ≤ tol·‖b‖.
fn pcg(sys: &System, nr: usize, nz: usize, tol: f64) -> Result<(Vec<f64>, usize, f64)> {
    let n = nr * nz;
    let b = &sys.rhs;
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let d = ic0(sys, nr);
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    precondition(sys, &d, nr, &r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n.max(1000);
    let mut rel = 1.0;
    for it in 1..=max_iter {
        apply(sys, nr, &p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverDiverged { iterations: it, residual: rel });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if !rel.is_finite() {
            return Err(Error::SolverDiverged { iterations: it, residual: rel });
        }
        if rel <= tol {
            return Ok((x, it, rel));
        }
        precondition(sys, &d, nr, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverDiverged { iterations: max_iter, residual: rel })
}

/// Three-point Lagrange weights for `x` from nodes `xs`.
fn lagrange3(xs: [f64; 3], x: f64) -> [f64; 3] {
    let [a, b, c] = xs;
    [
        (x - b) * (x - c) / ((a - b) * (a - c)),
        (x - a) * (x - c) / ((b - a) * (b - c)),
        (x - a) * (x - b) / ((c - a) * (c - b)),
    ]
}

/// Index of the first of three consecutive centres nearest to `x`.
fn stencil_start(centres: &[f64], x: f64) -> usize {
    let nearest = match centres.binary_search_by(|c| c.total_cmp(&x)) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i == centres.len() || (x - centres[i - 1]) < (centres[i] - x) {
                i - 1
            } else {
                i
            }
        }
    };
    nearest.saturating_sub(1).min(centres.len() - 3)
}

impl ScatteringField {
    pub fn n_rho(&self) -> usize {
        self.rho_faces.len() - 1
    }

    pub fn n_z(&self) -> usize {
        self.z_faces.len() - 1
    }

    pub fn rho_centres(&self) -> Vec<f64> {
        centres(&self.rho_faces)
    }

    pub fn z_centres(&self) -> Vec<f64> {
        centres(&self.z_faces)
    }

    /// g1 at (ρ, z): quadratic interpolation in ρ² and in z over the nearest
    /// 3×3 cell centres. On the axis this extrapolates the even expansion
    /// a + bρ² + cρ⁴.
    pub fn sample(&self, rho: f64, z: f64) -> Result<f64> {
        let rc = self.rho_centres();
        let zc = self.z_centres();
        if !(rho >= 0.0 && rho < rc[rc.len() - 1] && z > zc[0] && z < zc[zc.len() - 1]) {
            return Err(Error::OutOfRegion { module: MODULE, z });
        }
        let i0 = stencil_start(&rc, rho);
        let j0 = stencil_start(&zc, z);
        let wr = lagrange3([rc[i0].powi(2), rc[i0 + 1].powi(2), rc[i0 + 2].powi(2)], rho * rho);
        let wz = lagrange3([zc[j0], zc[j0 + 1], zc[j0 + 2]], z);
        let nr = self.n_rho();
        let mut v = 0.0;
        for (b, wzb) in wz.iter().enumerate() {
            for (a, wra) in wr.iter().enumerate() {
                let u = self.values[(j0 + b) * nr + i0 + a];
                if u.is_nan() {
                    return Err(Error::OutOfRegion { module: MODULE, z });
                }
                v += wra * wzb * u;
            }
        }
        Ok(v)
    }

    /// g1 at the source point.
    pub fn at_source(&self) -> Result<f64> {
        self.sample(0.0, self.source.z)
    }

    /// Full g = g1 + g_f/ε_s at (ρ, z).
    pub fn full_g(&self, rho: f64, z: f64) -> Result<f64> {
        Ok(self.sample(rho, z)? + free_kernel(rho, z, self.source.z) / self.eps_source)
    }

    /// Outward flux of −ε∇g through the boundary of the cell block
    /// i < i_max, j_lo ≤ j < j_hi, with the same face conductances as the
    /// solver and the full 2π azimuth. Gauss's law makes this 1 for a block around the source.
    pub fn enclosed_flux(&self, i_max: usize, j_lo: usize, j_hi: usize) -> Result<f64> {
        let (nr, nz) = (self.n_rho(), self.n_z());
        if !(i_max > 0 && i_max < nr && j_lo > 0 && j_lo < j_hi && j_hi < nz) {
            return Err(Error::invalid(MODULE, "flux contour must lie strictly inside the grid"));
        }
        let rc = self.rho_centres();
        let zc = self.z_centres();
        let g = |i: usize, j: usize| -> Option<(f64, f64)> {
            let e = self.eps_cells[j * nr + i]?;
            let u = self.values[j * nr + i];
            Some((u + free_kernel(rc[i], zc[j], self.source.z) / self.eps_source, e))
        };
        let mut flux = 0.0;
        // Side at ρ = rho_faces[i_max].
        for j in j_lo..j_hi {
            let dz = self.z_faces[j + 1] - self.z_faces[j];
            let area = self.rho_faces[i_max] * dz;
            let d_in = self.rho_faces[i_max] - rc[i_max - 1];
            let d_out = rc[i_max] - self.rho_faces[i_max];
            if let (Some((gi, ei)), Some((go, eo))) = (g(i_max - 1, j), g(i_max, j)) {
                flux += conductance(area, d_in, ei, d_out, eo) * (gi - go);
            }
        }
        // Bottom and top.
        for (inside, outside, face) in [(j_lo, j_lo - 1, j_lo), (j_hi - 1, j_hi, j_hi)] {
            for i in 0..i_max {
                let area = 0.5 * (self.rho_faces[i + 1].powi(2) - self.rho_faces[i].powi(2));
                let d_in = (zc[inside] - self.z_faces[face]).abs();
                let d_out = (zc[outside] - self.z_faces[face]).abs();
                match (g(i, inside), g(i, outside)) {
                    (Some((gi, ei)), Some((go, eo))) => flux += conductance(area, d_in, ei, d_out, eo) * (gi - go),
                    (Some((gi, ei)), None) => flux += area * ei / d_in * gi,
                    _ => {}
                }
            }
        }
        Ok(2.0 * std::f64::consts::PI * flux)
    }

    /// Writes `rho,z,g1` rows for every dielectric cell.
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rho", "z", "g1"])?;
        let rc = self.rho_centres();
        let zc = self.z_centres();
        let nr = self.n_rho();
        for (j, z) in zc.iter().enumerate() {
            for (i, rho) in rc.iter().enumerate() {
                let u = self.values[j * nr + i];
                if u.is_finite() {
                    w.write_record([rho.to_string(), z.to_string(), u.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::half_space_g1;
    use crate::multilayer::{cavity_g_general, cavity_g_midpoint};
    use crate::types::QuadratureSpec;

    #[test]
    fn stretched_faces_reach_the_boundary() {
        let f = stretched(0.1, 100.0, 20).unwrap();
        assert_eq!(f.len(), 20);
        assert_eq!(*f.last().unwrap(), 100.0);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        assert!((f[0] - 0.1).abs() < 0.1);
    }

    #[test]
    fn uniform_medium_has_no_scattering() {
        let geom = Geometry::FreeSpace { eps: 3.0 };
        let grid = GridSpec::for_half_space(1.0, 64);
        let field = solve_scattering_g1(&geom, Point3::on_axis(1.0), &grid).unwrap();
        assert!(field.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn half_space_source_value() {
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: 4.0.into() };
        let src = Point3::on_axis(1.0);
        let field = solve_scattering_g1(&geom, src, &GridSpec::for_half_space(1.0, 128)).unwrap();
        let exact = half_space_g1(src, src, 1.0.into(), 4.0.into()).unwrap().value;
        let got = field.at_source().unwrap();
        assert!(((got - exact) / exact).abs() < 0.02, "{got} vs {exact}");
    }

    #[test]
    fn cavity_midplane_matches_quadrature() {
        let spec = QuadratureSpec::default();
        let geom = Geometry::ThreeLayerCavity { eps1: 8.0.into(), eps2: 1.0, eps3: 8.0.into(), d: 1.0 };
        let field = solve_scattering_g1(&geom, Point3::ORIGIN, &GridSpec::for_cavity(1.0, 256)).unwrap();
        let exact = cavity_g_midpoint(1.0, 1.0, 8.0.into(), 1.0, 8.0.into(), &spec).unwrap().value;
        let got = field.full_g(1.0, 0.0).unwrap();
        assert!(((got - exact) / exact).abs() < 0.02, "{got} vs {exact}");
    }

    #[test]
    fn asymmetric_cavity_off_midplane() {
        let spec = QuadratureSpec::default();
        let (e1, e3) = (Permittivity::Finite(4.0), Permittivity::PerfectConductor);
        let geom = Geometry::ThreeLayerCavity { eps1: e1, eps2: 1.0, eps3: e3, d: 1.0 };
        let z0 = 0.2;
        let grid = GridSpec { z_center: z0, ..GridSpec::for_cavity(1.0, 256) };
        let field = solve_scattering_g1(&geom, Point3::on_axis(z0), &grid).unwrap();
        let exact = cavity_g_general(z0, z0, 0.5, 1.0, e1, 1.0, e3, &spec).unwrap().value;
        let got = field.full_g(0.5, z0).unwrap();
        assert!(((got - exact) / exact).abs() < 0.02, "{got} vs {exact}");
    }

    #[test]
    fn second_order_convergence() {
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: 4.0.into() };
        let src = Point3::on_axis(1.0);
        let exact = half_space_g1(src, src, 1.0.into(), 4.0.into()).unwrap().value;
        let coarse = GridSpec::for_half_space(1.0, 64);
        let e1 = solve_scattering_g1(&geom, src, &coarse).unwrap().at_source().unwrap() - exact;
        let e2 = solve_scattering_g1(&geom, src, &coarse.refined()).unwrap().at_source().unwrap() - exact;
        assert!((e1 / e2).abs() >= 3.0, "{e1} {e2}");
    }

    #[test]
    fn permittivity_scaling() {
        let src = Point3::on_axis(1.0);
        let grid = GridSpec::for_half_space(1.0, 64);
        let a = solve_scattering_g1(&Geometry::HalfSpace { eps1: 1.0.into(), eps2: 3.0.into() }, src, &grid).unwrap();
        let b = solve_scattering_g1(&Geometry::HalfSpace { eps1: 2.5.into(), eps2: 7.5.into() }, src, &grid).unwrap();
        let (ga, gb) = (a.at_source().unwrap(), b.at_source().unwrap());
        assert!((gb - ga / 2.5).abs() < 1e-8 * ga.abs(), "{ga} {gb}");
    }

    #[test]
    fn gauss_law_holds() {
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: 4.0.into() };
        let grid = GridSpec::for_half_space(1.0, 96);
        let field = solve_scattering_g1(&geom, Point3::on_axis(1.0), &grid).unwrap();
        let zc = field.z_centres();
        let j_lo = zc.iter().position(|z| *z > -2.0).unwrap();
        let j_hi = zc.iter().position(|z| *z > 3.0).unwrap();
        let i_max = field.rho_centres().iter().position(|r| *r > 3.0).unwrap();
        let flux = field.enclosed_flux(i_max, j_lo, j_hi).unwrap();
        assert!((flux - 1.0).abs() < 1e-2, "{flux}");
    }

    #[test]
    fn rejects_source_on_interface_and_other_geometries() {
        let grid = GridSpec::for_half_space(1.0, 64);
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: 4.0.into() };
        assert!(matches!(solve_scattering_g1(&geom, Point3::ORIGIN, &grid), Err(Error::SourceOnInterface { .. })));
        let plate = Geometry::PlateWithHole { radius: 1.0 };
        assert!(matches!(
            solve_scattering_g1(&plate, Point3::on_axis(1.0), &grid),
            Err(Error::UnsupportedGeometry { .. })
        ));
        let small = GridSpec { n_rho: 16, ..grid };
        assert!(small.validate().is_err());
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let geom = Geometry::HalfSpace { eps1: 1.0.into(), eps2: Permittivity::PerfectConductor };
        let field = solve_scattering_g1(&geom, Point3::on_axis(1.0), &GridSpec::for_half_space(1.0, 64)).unwrap();
        let mut buf = Vec::new();
        field.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rho,z,g1\n"));
        // Conductor cells are skipped.
        assert_eq!(text.lines().count(), 1 + 64 * 32);
    }
}
