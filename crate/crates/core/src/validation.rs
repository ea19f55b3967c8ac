//! Acceptance suite. Each criterion bundles a handful of numeric checks,
//! each with a measured value, the expected value and a tolerance, so that
//! the command line and the test harness report the same numbers.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{plate_hole_g, plate_hole_onaxis_self_g1, plate_hole_self_g1};
use crate::born::{integrate_over_region, DiluteBody, PolarizabilityTensor, RegionShape};
use crate::error::Result;
use crate::interactions::{force_on_A, greens, local_field_factor, pair_energy, self_energy};
use crate::multilayer::{cavity_asymptotic, cavity_g_general, cavity_g_midpoint, cavity_g_series, cavity_series_order, reflection_coeffs};
use crate::nonlocal::{screened_potential, screened_potential_numeric, DrudeStatic};
use crate::oracle::{solve_scattering_g1, GridSpec};
use crate::quadrature::hankel_integral;
use crate::scene::{run_sweep, write_sweep_csv, ChargeSpec, ChargeUnit, Scene, SceneOptions, SweepAxis, SweepRow};
use crate::types::{distance, Charge, Geometry, Permittivity, Point3, QuadratureSpec, ELEMENTARY_CHARGE, EPSILON_0};

const C: Permittivity = Permittivity::PerfectConductor;
const INV_4PI: f64 = 0.25 / PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Limits,
    Oracle,
    Quadrature,
    All,
}

/// One numeric comparison. `passed` is decided by the criterion, which
/// knows whether the tolerance is absolute, relative or a bound.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn within(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        let passed = (measured - expected).abs() <= tolerance;
        Check { name: name.into(), measured, expected, tolerance, passed }
    }

    fn relative(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        let err = ((measured - expected) / expected).abs();
        Check { name: name.into(), measured, expected, tolerance, passed: err <= tolerance }
    }

    /// `measured` must not exceed `bound`.
    fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, expected: 0.0, tolerance: bound, passed: measured <= bound }
    }

    /// `measured` must be at least `bound`.
    fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check { name: name.into(), measured, expected: bound, tolerance: 0.0, passed: measured >= bound }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Check { name: name.into(), measured: v, expected: 1.0, tolerance: 0.0, passed: ok }
    }

    fn failed(name: impl Into<String>, err: impl fmt::Display) -> Self {
        Check { name: format!("{}: {err}", name.into()), measured: f64::NAN, expected: f64::NAN, tolerance: 0.0, passed: false }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e}, expected {:.6e}, tol {:.1e}",
            if self.passed { "ok  " } else { "FAIL" },
            self.name,
            self.measured,
            self.expected,
            self.tolerance
        )
    }
}

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Values worth printing that do not gate the result.
    pub notes: Vec<String>,
}

impl CriterionReport {
    fn new(id: u8, title: &'static str) -> Self {
        CriterionReport { id, title, checks: Vec::new(), notes: Vec::new() }
    }

    fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Records `r` as a check, turning an error into a failed check.
    fn attempt(&mut self, name: &str, r: Result<Check>) {
        self.checks.push(r.unwrap_or_else(|e| Check::failed(name, e)));
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// One-line summary.
    pub fn summary(&self) -> String {
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        format!(
            "[{}] criterion {}: {} ({} checks, {} failed)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.checks.len(),
            failed
        )
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.summary())?;
        for c in &self.checks {
            writeln!(f, "    {c}")?;
        }
        for n in &self.notes {
            writeln!(f, "    note: {n}")?;
        }
        Ok(())
    }
}

/// Criteria run by each suite, in report order.
pub fn criteria_for(suite: Suite) -> Vec<u8> {
    match suite {
        Suite::Limits => vec![1, 2, 8],
        Suite::Quadrature => vec![3, 4, 5, 7],
        Suite::Oracle => vec![6],
        Suite::All => (1..=8).collect(),
    }
}

pub fn run_criterion(id: u8) -> CriterionReport {
    match id {
        1 => local_field(),
        2 => plate_pinch_points(),
        3 => cavity_triple(),
        4 => screened_bulk(),
        5 => born_half_space(),
        6 => oracle_equivalence(),
        7 => property_suites(),
        8 => figure_reproduction(),
        other => {
            let mut r = CriterionReport::new(other, "unknown criterion");
            r.push(Check::failed("lookup", format!("no criterion {other}")));
            r
        }
    }
}

/// Runs a suite. The quadrature suite is preceded by the Hankel identity
/// checks it is named after.
pub fn run_suite(suite: Suite) -> Vec<CriterionReport> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Quadrature | Suite::All) {
        out.push(hankel_identities());
    }
    out.extend(criteria_for(suite).into_iter().map(run_criterion));
    out
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

/// Criterion 0: closed-form Bessel transforms through the quadrature engine.
pub fn hankel_identities() -> CriterionReport {
    let mut r = CriterionReport::new(0, "Hankel transform identities");
    let spec = spec();
    for (a, rho) in [(1.0, 0.5), (0.3, 2.0), (2.0, 7.0), (0.05, 1.0)] {
        let name = format!("∫e^(-ka)J0(kρ)dk = 1/√(a²+ρ²), a = {a}, ρ = {rho}");
        let exact = 1.0 / f64::hypot(a, rho);
        let got = hankel_integral(|k| (-k * a).exp(), rho, &spec);
        r.attempt(&name, got.map(|v| Check::relative(&name, v.value, exact, 1e-10)));

        let name = format!("∫k e^(-ka)J0(kρ)dk = a/(a²+ρ²)^(3/2), a = {a}, ρ = {rho}");
        let exact = a / (a * a + rho * rho).powf(1.5);
        let got = hankel_integral(|k| k * (-k * a).exp(), rho, &spec);
        r.attempt(&name, got.map(|v| Check::relative(&name, v.value, exact, 1e-10)));
    }
    r
}

pub fn local_field() -> CriterionReport {
    let mut r = CriterionReport::new(1, "local-field factor 3ε/(2ε+1) at ε = 80");
    r.push(Check::within("local_field_factor(80)", local_field_factor(80.0), 1.4907, 5e-4));
    r
}

pub fn plate_pinch_points() -> CriterionReport {
    let mut r = CriterionReport::new(2, "plate-with-hole pinch points");
    let radius = 1.0;

    // (a) linear extrapolation of the on-axis self term to z = 0.
    let target = -1.0 / (4.0 * PI * PI * radius);
    let extrap = (|| -> Result<f64> {
        let (z1, z2) = (1e-3 * radius, 1e-4 * radius);
        let g1 = plate_hole_onaxis_self_g1(z1, radius)?.value;
        let g2 = plate_hole_onaxis_self_g1(z2, radius)?.value;
        Ok(g2 - z2 * (g1 - g2) / (z1 - z2))
    })();
    r.attempt(
        "(a) on-axis U(z→0)·8π²ε₀R/q²",
        extrap.map(|g| Check::relative("(a) on-axis U(z→0)·8π²ε₀R/q²", g / target * -1.0, -1.0, 1e-4)),
    );
    if let Ok(full) = plate_hole_self_g1(Point3::on_axis(1e-4 * radius), radius) {
        r.notes.push(format!(
            "complete coincident limit of g at z = 1e-4 R gives U·8π²ε₀R/q² = {:.6}; the on-axis closed form omits the regular part of the direct branch",
            full.value / -target
        ));
    }

    // (b) tiny hole, same side: conductor image formula.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let small = 1e-5;
    let mut worst = 0.0f64;
    let mut error = None;
    for _ in 0..100 {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let a = random_point(&mut rng, side);
        let b = random_point(&mut rng, side);
        let image = INV_4PI * (1.0 / distance(a, b) - 1.0 / distance(a, Point3::new(b.x, b.y, -b.z)));
        match plate_hole_g(a, b, small) {
            Ok(g) => worst = worst.max(rel(g.value, image)),
            Err(e) => error = Some(e),
        }
    }
    match error {
        Some(e) => r.push(Check::failed("(b) same side, R→0", e)),
        None => r.push(Check::at_most("(b) same side, R = 1e-5: max rel. deviation from image formula", worst, 1e-4)),
    }

    // (c) opposite sides: transmission vanishes with the hole.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<(Point3, Point3)> = (0..100)
        .map(|_| (random_point(&mut rng, 1.0), random_point(&mut rng, -1.0)))
        .collect();
    let mut by_radius = Vec::new();
    for radius in [1e-3, 1e-4, 1e-5] {
        let worst = pairs.iter().try_fold(0.0f64, |acc, (a, b)| {
            plate_hole_g(*a, *b, radius).map(|g| acc.max(g.value.abs() * distance(*a, *b)))
        });
        match worst {
            Ok(w) => by_radius.push(w),
            Err(e) => {
                r.push(Check::failed("(c) opposite sides", e));
                return r;
            }
        }
    }
    r.push(Check::flag(
        "(c) max |g|·D₋ decreases as R shrinks (1e-3, 1e-4, 1e-5)",
        by_radius.windows(2).all(|w| w[1] < w[0]),
    ));
    r.push(Check::at_most("(c) opposite sides, R = 1e-5: max |g|·D₋", by_radius[2], 1e-6));
    r
}

fn random_point(rng: &mut ChaCha8Rng, side: f64) -> Point3 {
    let rho = rng.gen_range(0.0..2.0);
    let phi = rng.gen_range(0.0..2.0 * PI);
    let z = side * rng.gen_range(0.2..2.0);
    Point3::from_cylindrical(rho, phi, z)
}

pub fn cavity_triple() -> CriterionReport {
    let mut r = CriterionReport::new(3, "cavity: quadrature, image series and asymptotic agree");
    let spec = spec();
    let d = 1.0;
    let eps2 = 1.0;
    let walls = [
        ("conductors", C, C),
        ("ε = 8|1|8", Permittivity::Finite(8.0), Permittivity::Finite(8.0)),
        ("ε = 4|1|conductor", Permittivity::Finite(4.0), C),
    ];
    for (label, e1, e3) in walls {
        let coeffs = reflection_coeffs(e1, eps2, e3);
        let mut worst_gap = 0.0f64;
        let mut worst_err = 0.0f64;
        let outcome = [0.3, 1.0, 2.0, 5.0].iter().try_for_each(|&rho| -> Result<()> {
            let q = cavity_g_midpoint(rho, d, e1, eps2, e3, &spec)?;
            let n = cavity_series_order(rho, d, coeffs, eps2, &spec)?;
            let s = cavity_g_series(rho, d, coeffs, eps2, n)?;
            // In units of the bare Coulomb value, 1/(4πε₂d).
            let unit = 4.0 * PI * eps2 * d;
            worst_gap = worst_gap.max((q.value - s.value).abs() / (q.abs_err + s.abs_err));
            worst_err = worst_err.max((q.abs_err + s.abs_err) * unit * rho / d);
            Ok(())
        });
        match outcome {
            Ok(()) => {
                r.push(Check::at_most(format!("{label}: |quad − series| / combined abs_err"), worst_gap, 1.0));
                r.push(Check::at_most(format!("{label}: combined abs_err·4πε₂ρ"), worst_err, 1e-9));
            }
            Err(e) => r.push(Check::failed(label, e)),
        }
    }

    // Asymptotic form for conducting walls.
    let coeffs = reflection_coeffs(C, eps2, C);
    let series = |rho: f64| -> Result<f64> {
        let n = cavity_series_order(rho, d, coeffs, eps2, &spec)?;
        Ok(cavity_g_series(rho, d, coeffs, eps2, n)?.value)
    };
    let asym_err: Result<Vec<f64>> = [5.0, 6.0, 7.0, 8.0]
        .iter()
        .map(|&rho| Ok(rel(cavity_asymptotic(rho, d, eps2)?.g.value, series(rho)?)))
        .collect();
    match asym_err {
        Ok(errs) => {
            r.push(Check::at_most("asymptotic vs series at ρ = 5d (relative)", errs[0], 0.10));
            r.push(Check::flag(
                "asymptotic error decreases over ρ/d = 5, 6, 7, 8",
                errs.windows(2).all(|w| w[1] < w[0]),
            ));
            r.notes.push(format!("asymptotic relative errors at ρ/d = 5..8: {errs:?}"));
        }
        Err(e) => r.push(Check::failed("asymptotic", e)),
    }

    // Decay rate on ρ/d ∈ [3, 8].
    let samples: Result<Vec<(f64, f64)>> = (0..=20)
        .map(|i| {
            let rho = 3.0 + 0.25 * i as f64;
            Ok((rho, series(rho)?))
        })
        .collect();
    match samples {
        Ok(s) => {
            let raw = fit_slope(s.iter().map(|&(x, g)| (x, g.ln())));
            let reduced = fit_slope(s.iter().map(|&(x, g)| (x, (g * x.sqrt()).ln())));
            r.push(Check::relative("log-slope of g·√ρ on ρ/d ∈ [3, 8] (units 1/d)", reduced, -PI / d, 0.02));
            r.notes.push(format!(
                "slope of ln g itself is {raw:.4}, {:.1}% from −π/d; the ρ^(-1/2) prefactor adds −1/(2ρ)",
                100.0 * rel(raw, -PI / d)
            ));
        }
        Err(e) => r.push(Check::failed("log-slope", e)),
    }
    r
}

fn fit_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<(f64, f64)> = points.collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn screened_bulk() -> CriterionReport {
    let mut r = CriterionReport::new(4, "screened bulk: closed form vs sine-transform quadrature");
    let spec = spec();
    let dist = 1e-9;
    let q = ELEMENTARY_CHARGE;
    let omega_0 = 1e15;
    let mut worst = 0.0f64;
    let mut tf_exact = true;
    let mut failure = None;
    for wp in [0.0, 0.25e15, 0.5e15, 1e15, 2e15] {
        for beta in [0.5e6, 0.75e6, 1e6, 1.5e6, 2e6] {
            for bound_ratio in [0.0, 0.5, 1.0, 2.0, 4.0] {
                let p = DrudeStatic::new(wp, bound_ratio * omega_0, omega_0, beta);
                let outcome = (|| -> Result<f64> {
                    let exact = screened_potential(dist, q, q, &p)?;
                    let (num, _) = screened_potential_numeric(dist, q, q, &p, &spec)?;
                    Ok(rel(num, exact))
                })();
                match outcome {
                    Ok(e) => worst = worst.max(e),
                    Err(e) => failure = Some(e),
                }
                if bound_ratio == 0.0 {
                    tf_exact &= p.k_s() == wp / beta;
                }
            }
        }
    }
    match failure {
        Some(e) => r.push(Check::failed("125-point grid", e)),
        None => r.push(Check::at_most("125-point grid: max rel. deviation", worst, 1e-8)),
    }
    r.push(Check::flag("Thomas-Fermi k_s = ω_p/β bit-exact when ω̃_p = 0", tf_exact));
    r
}

pub fn born_half_space() -> CriterionReport {
    let mut r = CriterionReport::new(5, "Born route vs half-space image result");
    let spec = spec();
    let h = 1e-9;
    let top = Point3::on_axis(h);
    r.attempt(
        "∫_{z<0} d³r/|r − hẑ|⁴ · h/π",
        integrate_over_region(&RegionShape::HalfSpace { z_top: 0.0 }, &[top], |p| distance(p, top).powi(-4), &spec)
            .map(|v| Check::relative("∫_{z<0} d³r/|r − hẑ|⁴ · h/π", v.value * h / PI, 1.0, 1e-4)),
    );

    let chi = 1e-3;
    let alpha = 1e-40;
    let eta = chi * EPSILON_0 / alpha;
    let body = Geometry::DiluteBody(DiluteBody::half_space(0.0, eta, PolarizabilityTensor::isotropic(alpha)));
    let charge = Charge::elementary(1.0, top);
    let q2 = charge.q * charge.q;
    let closed = -q2 * eta * alpha / (32.0 * PI * EPSILON_0 * EPSILON_0 * h);
    let born = self_energy(&body, &charge, &spec);
    r.attempt("U_Born / (−q²ηα/32πε₀²h)", born.clone().map(|u| Check::relative("U_Born / (−q²ηα/32πε₀²h)", u.energy / closed, 1.0, 1e-4)));
    let image = self_energy(&Geometry::HalfSpace { eps1: 1.0.into(), eps2: (1.0 + chi).into() }, &charge, &spec);
    match (born, image) {
        (Ok(b), Ok(i)) => {
            r.push(Check::relative("U_Born / U_image at ηα/ε₀ = 1e-3", b.energy / i.energy, 1.0, 1e-3));
        }
        (Err(e), _) | (_, Err(e)) => r.push(Check::failed("U_Born vs image", e)),
    }
    r
}

pub fn oracle_equivalence() -> CriterionReport {
    let mut r = CriterionReport::new(6, "finite-volume oracle vs analytic values");
    let spec = spec();
    let half = Geometry::HalfSpace { eps1: 1.0.into(), eps2: 4.0.into() };
    let src = Point3::on_axis(1.0);
    let exact_half = scattering_exact(&half, src, &spec);
    let coarse = GridSpec::for_half_space(1.0, 128);
    let fine = coarse.refined();
    let errs = (|| -> Result<(f64, f64, f64)> {
        let exact = exact_half.clone()?;
        let field_c = solve_scattering_g1(&half, src, &coarse)?;
        let field_f = solve_scattering_g1(&half, src, &fine)?;
        let zc = field_f.z_centres();
        let rc = field_f.rho_centres();
        let j_lo = zc.iter().position(|z| *z > -2.0).unwrap_or(1);
        let j_hi = zc.iter().position(|z| *z > 3.0).unwrap_or(zc.len() - 2);
        let i_max = rc.iter().position(|x| *x > 3.0).unwrap_or(rc.len() - 2);
        let flux = field_f.enclosed_flux(i_max, j_lo, j_hi)?;
        Ok((field_c.at_source()? - exact, field_f.at_source()? - exact, flux))
    })();
    match (errs, exact_half) {
        (Ok((ec, ef, flux)), Ok(exact)) => {
            r.push(Check::at_most("half-space 1|4, g1 at source, 256×256 (relative)", (ef / exact).abs(), 0.02));
            r.push(Check::at_least("half-space error ratio 128 → 256", (ec / ef).abs(), 3.0));
            r.push(Check::within("Gauss-law flux around the source", flux, 1.0, 1e-2));
        }
        (Err(e), _) | (_, Err(e)) => r.push(Check::failed("half-space", e)),
    }

    let sym = Geometry::ThreeLayerCavity { eps1: 8.0.into(), eps2: 1.0, eps3: 8.0.into(), d: 1.0 };
    r.attempt(
        "cavity 8|1|8, midpoint source, g at ρ = d (relative)",
        (|| {
            let field = solve_scattering_g1(&sym, Point3::ORIGIN, &GridSpec::for_cavity(1.0, 256))?;
            let exact = cavity_g_midpoint(1.0, 1.0, 8.0.into(), 1.0, 8.0.into(), &spec)?.value;
            Ok(Check::at_most("cavity 8|1|8, midpoint source, g at ρ = d (relative)", rel(field.full_g(1.0, 0.0)?, exact), 0.02))
        })(),
    );

    let asym = Geometry::ThreeLayerCavity { eps1: 4.0.into(), eps2: 1.0, eps3: C, d: 1.0 };
    let z0 = 0.2;
    let src = Point3::on_axis(z0);
    let grid = GridSpec { z_center: z0, ..GridSpec::for_cavity(1.0, 256) };
    r.attempt(
        "cavity 4|1|conductor, z₀ = 0.2d, g at ρ = 0.5d (relative)",
        (|| {
            let exact = cavity_g_general(z0, z0, 0.5, 1.0, 4.0.into(), 1.0, C, &spec)?.value;
            let field = solve_scattering_g1(&asym, src, &grid)?;
            Ok(Check::at_most("cavity 4|1|conductor, z₀ = 0.2d, g at ρ = 0.5d (relative)", rel(field.full_g(0.5, z0)?, exact), 0.02))
        })(),
    );
    r.attempt(
        "cavity 4|1|conductor, z₀ = 0.2d, g1 at the source (relative)",
        (|| {
            let exact = scattering_exact(&asym, src, &spec)?;
            let field = solve_scattering_g1(&asym, src, &grid)?;
            Ok(Check::at_most("cavity 4|1|conductor, z₀ = 0.2d, g1 at the source (relative)", rel(field.at_source()?, exact), 0.02))
        })(),
    );
    // The wall sits 0.3d from this source; on coarse grids the error
    // components still cancel irregularly, so the sequence is reported but
    // the order check above uses the half-space.
    let seq: Result<Vec<f64>> = (|| {
        let exact = scattering_exact(&asym, src, &spec)?;
        let mut g = GridSpec { z_center: z0, ..GridSpec::for_cavity(1.0, 64) };
        let mut out = Vec::new();
        for _ in 0..3 {
            out.push((solve_scattering_g1(&asym, src, &g)?.at_source()? - exact).abs());
            g = g.refined();
        }
        Ok(out)
    })();
    if let Ok(e) = seq {
        r.notes.push(format!(
            "cavity g1 error at the source for h = d/8, d/16, d/32: {:.2e}, {:.2e}, {:.2e}",
            e[0], e[1], e[2]
        ));
    }
    r
}

fn scattering_exact(geom: &Geometry, src: Point3, spec: &QuadratureSpec) -> Result<f64> {
    crate::interactions::scattering_at_coincidence(geom, src, spec).map(|v| v.value)
}

pub fn property_suites() -> CriterionReport {
    let mut r = CriterionReport::new(7, "reciprocity, force consistency, action-reaction, bilinearity");
    reciprocity(&mut r);
    force_consistency(&mut r);
    action_reaction(&mut r);
    bilinearity(&mut r);
    r
}

fn sample_geometries() -> Vec<Geometry> {
    vec![
        Geometry::FreeSpace { eps: 2.5 },
        Geometry::HalfSpace { eps1: 2.0.into(), eps2: 7.0.into() },
        Geometry::HalfSpace { eps1: 1.0.into(), eps2: C },
        Geometry::ThreeLayerCavity { eps1: 6.0.into(), eps2: 2.0, eps3: C, d: 1.0 },
        Geometry::PlateWithHole { radius: 0.8 },
        Geometry::NonlocalBulk { drude: DrudeStatic::new(1.0, 0.5, 1.0, 1.0) },
    ]
}

fn random_pair(geom: &Geometry, rng: &mut ChaCha8Rng) -> (Point3, Point3) {
    let mut pick = |allow_negative: bool| {
        let z = match geom {
            Geometry::ThreeLayerCavity { d, .. } => rng.gen_range(-0.45 * d..0.45 * d),
            Geometry::HalfSpace { eps2, .. } => {
                let below = allow_negative && !eps2.is_conductor() && rng.gen_bool(0.5);
                let z = rng.gen_range(0.1..2.0);
                if below {
                    -z
                } else {
                    z
                }
            }
            _ => {
                let z = rng.gen_range(0.1..2.0);
                if rng.gen_bool(0.5) {
                    -z
                } else {
                    z
                }
            }
        };
        Point3::from_cylindrical(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0 * PI), z)
    };
    (pick(true), pick(true))
}

fn reciprocity(r: &mut CriterionReport) {
    let spec = spec();
    let geoms = sample_geometries();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    for i in 0..1000 {
        let geom = &geoms[i % geoms.len()];
        let (a, b) = random_pair(geom, &mut rng);
        let (ab, ba) = match (greens(geom, a, b, &spec), greens(geom, b, a, &spec)) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => {
                r.push(Check::failed(format!("reciprocity ({})", geom.name()), e));
                return;
            }
        };
        let allowed = ab.abs_err + ba.abs_err + 1e-12 * ab.value.abs();
        worst = worst.max((ab.value - ba.value).abs() / allowed);
        count += 1;
    }
    r.push(Check::at_most(
        format!("reciprocity over {count} configurations: |g(r,r′) − g(r′,r)| / (abs_err + 1e-12|g|)"),
        worst,
        1.0,
    ));
}

/// Five-point central-difference gradient of the energy, independent of the
/// stepping used inside the force routine.
fn energy_gradient(geom: &Geometry, a: &Charge, b: Option<&Charge>, h: f64, spec: &QuadratureSpec) -> Result<Point3> {
    let energy = |p: Point3| -> Result<f64> {
        let moved = Charge::new(a.q, p);
        match b {
            Some(b) => pair_energy(geom, &moved, b, spec).map(|u| u.energy),
            None => self_energy(geom, &moved, spec).map(|u| u.energy),
        }
    };
    let mut grad = [0.0; 3];
    for (axis, g) in grad.iter_mut().enumerate() {
        let at = |k: f64| energy(a.position.with_component(axis, a.position.component(axis) + k * h));
        *g = (at(-2.0)? - 8.0 * at(-1.0)? + 8.0 * at(1.0)? - at(2.0)?) / (12.0 * h);
    }
    Ok(Point3::from(grad))
}

fn force_consistency(r: &mut CriterionReport) {
    let spec = spec();
    let q = ELEMENTARY_CHARGE;
    let a_pos = Point3::new(0.1, -0.05, 0.2);
    let b_pos = Point3::new(0.5, 0.3, -0.1);
    let dilute = Geometry::DiluteBody(DiluteBody::half_space(-0.3, 1e27, PolarizabilityTensor::diagonal(1e-40, 2e-40, 3e-40)));
    let mut cases: Vec<(Geometry, Option<Point3>)> = sample_geometries().into_iter().map(|g| (g, Some(b_pos))).collect();
    cases.retain(|(g, _)| !matches!(g, Geometry::HalfSpace { eps2, .. } if eps2.is_conductor()));
    cases.push((Geometry::HalfSpace { eps1: 1.0.into(), eps2: C }, None));
    cases.push((Geometry::PlateWithHole { radius: 0.8 }, None));
    cases.push((Geometry::ThreeLayerCavity { eps1: 6.0.into(), eps2: 2.0, eps3: C, d: 1.0 }, None));
    cases.push((dilute, None));
    let mut worst = 0.0f64;
    for (geom, b) in &cases {
        let a = Charge::new(q, a_pos);
        let b = b.map(|p| Charge::new(-2.0 * q, p));
        let outcome = (|| -> Result<f64> {
            let f = force_on_A(geom, &a, b.as_ref(), false, None, &spec)?.force;
            let scale = crate::interactions::distance_to_surface(geom, a_pos).min(b.map_or(f64::INFINITY, |b| distance(a_pos, b.position))).min(1.0);
            let grad = energy_gradient(geom, &a, b.as_ref(), 3e-3 * scale, &spec)?;
            Ok((f + grad).norm() / f.norm())
        })();
        match outcome {
            Ok(e) => worst = worst.max(e),
            Err(e) => {
                r.push(Check::failed(format!("force = −∇U ({})", geom.name()), e));
                return;
            }
        }
    }
    r.push(Check::at_most(format!("force = −∇U over {} cases (relative)", cases.len()), worst, 1e-4));
}

fn action_reaction(r: &mut CriterionReport) {
    let spec = spec();
    let q = ELEMENTARY_CHARGE;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for geom in sample_geometries().into_iter().filter(Geometry::is_translation_invariant) {
        for _ in 0..50 {
            let (pa, pb) = random_pair(&geom, &mut rng);
            let a = Charge::new(q, pa);
            let b = Charge::new(-3.0 * q, pb);
            match (
                force_on_A(&geom, &a, Some(&b), false, None, &spec),
                force_on_A(&geom, &b, Some(&a), false, None, &spec),
            ) {
                (Ok(fa), Ok(fb)) => worst = worst.max((fa.force + fb.force).norm() / fa.force.norm()),
                (Err(e), _) | (_, Err(e)) => {
                    r.push(Check::failed("action-reaction", e));
                    return;
                }
            }
        }
    }
    r.push(Check::at_most("action-reaction in translation-invariant media: |F_A + F_B|/|F_A|", worst, 1e-10));
}

fn bilinearity(r: &mut CriterionReport) {
    let spec = spec();
    let q = ELEMENTARY_CHARGE;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst_pair = 0.0f64;
    let mut worst_self = 0.0f64;
    for geom in sample_geometries() {
        for _ in 0..10 {
            let (pa, pb) = random_pair(&geom, &mut rng);
            let a = Charge::new(q, pa);
            let b = Charge::new(q, pb);
            let outcome = (|| -> Result<(f64, f64)> {
                let base = pair_energy(&geom, &a, &b, &spec)?.energy;
                let scaled = pair_energy(&geom, &Charge::new(-3.0 * q, pa), &Charge::new(0.5 * q, pb), &spec)?.energy;
                let pair_err = rel(scaled, -1.5 * base);
                let self_err = match geom {
                    Geometry::NonlocalBulk { .. } => 0.0,
                    _ => {
                        let s1 = self_energy(&geom, &a, &spec)?.energy;
                        let s3 = self_energy(&geom, &Charge::new(3.0 * q, pa), &spec)?.energy;
                        if s1 == 0.0 {
                            s3.abs()
                        } else {
                            rel(s3, 9.0 * s1)
                        }
                    }
                };
                Ok((pair_err, self_err))
            })();
            match outcome {
                Ok((p, s)) => {
                    worst_pair = worst_pair.max(p);
                    worst_self = worst_self.max(s);
                }
                Err(e) => {
                    r.push(Check::failed(format!("bilinearity ({})", geom.name()), e));
                    return;
                }
            }
        }
    }
    r.push(Check::at_most("pair energy bilinear in (q_A, q_B): max rel. deviation", worst_pair, 4.0 * f64::EPSILON));
    r.push(Check::at_most("self-energy quadratic in q: max rel. deviation", worst_self, 4.0 * f64::EPSILON));
}

/// Scene with elementary charges at the given positions.
pub fn scene_with(geometry: Geometry, positions: &[Point3]) -> Scene {
    Scene {
        geometry,
        charges: positions
            .iter()
            .map(|&position| ChargeSpec { q: 1.0, unit: ChargeUnit::Elementary, position })
            .collect(),
        options: SceneOptions::default(),
    }
}

/// A figure as a scene plus sweep axes.
pub struct FigureSweep {
    pub name: String,
    pub scene: Scene,
    pub axis: SweepAxis,
    pub axis2: Option<SweepAxis>,
}

impl FigureSweep {
    pub fn run(&self) -> std::result::Result<Vec<SweepRow>, crate::scene::SceneError> {
        run_sweep(&self.scene, &self.axis, self.axis2.as_ref())
    }

    pub fn csv(&self, rows: &[SweepRow]) -> std::result::Result<Vec<u8>, crate::scene::SceneError> {
        let mut buf = Vec::new();
        write_sweep_csv(rows, self.axis2.is_some(), &mut buf)?;
        Ok(buf)
    }
}

/// Sweeps regenerating the on-axis self-energy curve, the two-charge
/// curves for three hole radii, the cross-section near the hole edge and
/// the cavity crossover. Lengths are in units of the hole radius, of z_A or
/// of the gap width.
pub fn figure_sweeps() -> Vec<FigureSweep> {
    let mut out = vec![FigureSweep {
        name: "plate_self_energy".into(),
        scene: scene_with(Geometry::PlateWithHole { radius: 1.0 }, &[Point3::on_axis(1.0)]),
        axis: SweepAxis::new("charges.0.position.z", 0.05, 10.0, 200),
        axis2: None,
    }];
    for radius in [0.0, 1.0, 10.0] {
        out.push(FigureSweep {
            name: format!("plate_pair_R{radius}"),
            scene: scene_with(Geometry::PlateWithHole { radius }, &[Point3::on_axis(1.0), Point3::on_axis(-1.0)]),
            axis: SweepAxis::new("charges.1.position.z", -5.0, 5.0, 40),
            axis2: None,
        });
    }
    out.push(FigureSweep {
        name: "plate_cross_section".into(),
        scene: scene_with(Geometry::PlateWithHole { radius: 1.0 }, &[Point3::new(0.5, 0.0, 0.5), Point3::new(1.0, 0.0, -0.15)]),
        axis: SweepAxis::new("charges.0.position.x", -3.0, 3.0, 24),
        axis2: Some(SweepAxis::new("charges.0.position.z", -3.0, 3.0, 24)),
    });
    out.push(FigureSweep {
        name: "cavity_crossover".into(),
        scene: scene_with(
            Geometry::ThreeLayerCavity { eps1: C, eps2: 1.0, eps3: C, d: 1.0 },
            &[Point3::new(1.0, 0.0, 0.0), Point3::ORIGIN],
        ),
        axis: SweepAxis::new("charges.0.position.x", 0.1, 8.0, 80),
        axis2: None,
    });
    out
}

pub fn figure_reproduction() -> CriterionReport {
    let mut r = CriterionReport::new(8, "figure sweeps: documented limits and shapes");
    for fig in figure_sweeps() {
        let rows = match fig.run() {
            Ok(rows) => rows,
            Err(e) => {
                r.push(Check::failed(&fig.name, e));
                continue;
            }
        };
        let again = fig.run().ok().and_then(|rr| fig.csv(&rr).ok());
        r.push(Check::flag(format!("{}: CSV identical across runs", fig.name), again.is_some() && again == fig.csv(&rows).ok()));
        let ratios: Vec<(f64, f64)> = rows.iter().filter_map(|row| row.ratio_to_free.map(|x| (row.param, x))).collect();
        match fig.name.as_str() {
            "plate_self_energy" => {
                r.push(Check::flag(
                    "self-energy attractive on the whole axis",
                    rows.iter().all(|row| row.energy < 0.0),
                ));
                let far: Vec<f64> = [10.0, 100.0, 1000.0]
                    .iter()
                    .filter_map(|&z| {
                        fig.scene.with_param("charges.0.position.z", z).ok()?.self_energy().ok()?.ratio_to_free
                    })
                    .collect();
                let gaps: Vec<f64> = far.iter().map(|x| (x - 1.0).abs()).collect();
                r.push(Check::flag(
                    "|ratio − 1| shrinks over z/R = 10, 100, 1000",
                    gaps.len() == 3 && gaps.windows(2).all(|w| w[1] < w[0]),
                ));
                r.push(Check::at_most("|ratio − 1| at z/R = 1000", gaps.last().copied().unwrap_or(f64::NAN), 1e-2));
            }
            name if name.starts_with("plate_pair_R") => {
                let below: Vec<f64> = ratios.iter().filter(|(z, _)| *z < 0.0).map(|p| p.1).collect();
                if name == "plate_pair_R0" {
                    let worst = below.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    r.push(Check::at_most("R = 0: |ratio| for z_B < 0", worst, 1e-12));
                } else {
                    r.push(Check::flag(
                        format!("{name}: 0 < ratio < 1 for all z_B < 0"),
                        !below.is_empty() && below.iter().all(|x| *x > 0.0 && *x < 1.0),
                    ));
                }
                r.push(Check::flag(format!("{name}: ratio defined at every sample"), ratios.len() == rows.len()));
            }
            "plate_cross_section" => {
                r.push(Check::flag(
                    "cross-section: 0 ≤ ratio ≤ 1 everywhere off the plate",
                    ratios.len() == rows.len() && ratios.iter().all(|(_, x)| (0.0..=1.0).contains(x)),
                ));
            }
            "cavity_crossover" => {
                r.push(Check::flag(
                    "crossover: ratio decreases monotonically in ρ",
                    ratios.windows(2).all(|w| w[1].1 < w[0].1),
                ));
                if let (Some(first), Some(last)) = (ratios.first(), ratios.last()) {
                    r.push(Check::relative("crossover: (1 − ratio)/ρ at ρ = 0.1d vs 2 ln 2", (1.0 - first.1) / first.0, 2.0 * LN_2, 0.02));
                    let rho = last.0;
                    let asym = (8.0 / rho).sqrt() * rho * (-PI * rho).exp();
                    r.push(Check::relative("crossover: ratio at ρ = 8d vs √(8/ρd)·ρ·e^(−πρ/d)", last.1, asym, 0.02));
                }
            }
            _ => {}
        }
    }
    r
}
