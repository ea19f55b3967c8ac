//! One-dimensional quadrature: adaptive Gauss–Kronrod on finite intervals,
//! algebraic mapping for half-lines, and the oscillatory engine used for
//! Bessel (Hankel) and sine transforms.
//!
//! The oscillatory engine integrates panel by panel between consecutive
//! zeros of the oscillating kernel and hands the partial sums to Wynn's
//! epsilon algorithm. The reported error combines the extrapolation
//! residual with the per-panel quadrature errors.

use crate::error::{Error, Result};
use crate::types::{GreensValue, QuadratureSpec};

/// Result of a numerical integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
    /// Number of panels or subintervals consumed.
    pub panels: usize,
}

impl From<Estimate> for GreensValue {
    fn from(e: Estimate) -> Self {
        GreensValue::new(e.value, e.abs_err)
    }
}

// 21-point Kronrod abscissae; odd entries are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_567_838_180,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Ten-point Gauss–Legendre rule on [−1, 1] as (node, weight) pairs.
pub fn gauss_legendre_10() -> [(f64, f64); 10] {
    let mut out = [(0.0, 0.0); 10];
    for (i, w) in WG.iter().enumerate() {
        let x = XGK[2 * i + 1];
        out[2 * i] = (-x, *w);
        out[2 * i + 1] = (x, *w);
    }
    out
}

/// Single 21-point Gauss–Kronrod evaluation on [a, b]; returns (value, error).
pub fn gauss_kronrod_21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

/// Globally adaptive Gauss–Kronrod integration of `f` over [a, b].
///
/// Bisects the interval with the largest error until the summed error drops
/// below `max(abs_tol, rel_tol·|I|)` or `max_subdiv` intervals are in use.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdiv: usize,
) -> Result<Estimate> {
    let (v, e) = gauss_kronrod_21(f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut total = v;
    let mut total_err = e;
    loop {
        let tol = abs_tol.max(rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if intervals.len() >= max_subdiv {
            // Roundoff-limited integrands stall here; accept when the error is
            // at the floating-point floor of the summed magnitudes.
            let floor = 1e3 * f64::EPSILON * intervals.iter().map(|iv| iv.2.abs()).sum::<f64>();
            if total_err <= floor.max(tol * 10.0) {
                break;
            }
            return Err(Error::NoConvergence {
                module: "quadrature",
                panels: intervals.len(),
                estimate: total,
                abs_err: total_err,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty interval list");
        let (lo, hi, v_old, e_old) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // Cannot split any further in floating point.
            intervals.push((lo, hi, v_old, e_old));
            let floor = intervals.iter().map(|iv| iv.3).sum::<f64>();
            return Ok(Estimate {
                value: total,
                abs_err: floor,
                panels: intervals.len(),
            });
        }
        let (v1, e1) = gauss_kronrod_21(f, lo, mid);
        let (v2, e2) = gauss_kronrod_21(f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        total += v1 + v2 - v_old;
        total_err += e1 + e2 - e_old;
        if intervals.len() % 64 == 0 {
            // Re-sum to shed accumulated cancellation error.
            total = intervals.iter().map(|iv| iv.2).sum();
            total_err = intervals.iter().map(|iv| iv.3).sum();
        }
    }
    let value: f64 = intervals.iter().map(|iv| iv.2).sum();
    let abs_err: f64 = intervals.iter().map(|iv| iv.3).sum();
    Ok(Estimate {
        value,
        abs_err,
        panels: intervals.len(),
    })
}

/// ∫_a^∞ f(k) dk via the map k = a + s·t/(1 − t), t ∈ [0, 1).
///
/// `scale` should be of the order of the decay length of `f` in k.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let mut g = |t: f64| {
        let one_minus = 1.0 - t;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let k = a + scale * t / one_minus;
        let v = f(k) * scale / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_adaptive(&mut g, 0.0, 1.0, spec.abs_tol, spec.rel_tol, spec.max_panels)
}

/// Wynn's epsilon algorithm applied to a window of partial sums.
///
/// Returns the highest-order even-column estimate and the spread between the
/// two best estimates in the table, which serves as an error indicator.
pub fn wynn_epsilon(sums: &[f64]) -> (f64, f64) {
    let n = sums.len();
    if n == 0 {
        return (0.0, f64::INFINITY);
    }
    if n < 3 {
        let last = sums[n - 1];
        let spread = if n == 2 { (sums[1] - sums[0]).abs() } else { f64::INFINITY };
        return (last, spread);
    }
    // prev = column k−1, cur = column k; column 0 holds the sums.
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = sums.to_vec();
    let mut best = sums[n - 1];
    let mut best_prev = sums[n - 2];
    let mut col = 0usize;
    while cur.len() >= 2 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        let mut broke = false;
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 || !diff.is_finite() {
                broke = true;
                break;
            }
            next.push(prev[i + 1] + 1.0 / diff);
        }
        if broke {
            break;
        }
        prev = cur;
        cur = next;
        col += 1;
        if col % 2 == 0 && !cur.is_empty() {
            let candidate = cur[cur.len() - 1];
            if !candidate.is_finite() {
                break;
            }
            best_prev = if cur.len() >= 2 { cur[cur.len() - 2] } else { best };
            best = candidate;
        }
    }
    (best, (best - best_prev).abs())
}

/// Integrates f over [b₀, b₁] ∪ [b₁, b₂] ∪ … where the breakpoints are
/// consecutive zeros of an oscillating factor already folded into `f`.
///
/// Partial sums are extrapolated with Wynn's epsilon algorithm over a window
/// of `2·accel_order + 1` terms. Convergence requires three consecutive
/// extrapolations to agree within tolerance.
pub fn integrate_oscillatory<F, B>(
    mut f: F,
    mut breakpoints: B,
    spec: &QuadratureSpec,
    module: &'static str,
) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
    B: Iterator<Item = f64>,
{
    let window = 2 * spec.accel_order + 1;
    let mut lo = breakpoints.next().unwrap_or(0.0);
    let mut sums: Vec<f64> = Vec::new();
    let mut partial = 0.0;
    let mut quad_err = 0.0;
    let mut extrapolated: Vec<f64> = Vec::new();
    let mut largest_term: f64 = 0.0;
    for (panel, hi) in breakpoints.enumerate() {
        if panel >= spec.max_panels {
            break;
        }
        let panel_tol = 0.01 * spec.abs_tol.max(spec.rel_tol * largest_term);
        let est = integrate_adaptive(&mut f, lo, hi, panel_tol, 0.01 * spec.rel_tol, 400)?;
        lo = hi;
        largest_term = largest_term.max(est.value.abs());
        partial += est.value;
        quad_err += est.abs_err;
        sums.push(partial);

        let start = sums.len().saturating_sub(window);
        let (ext, spread) = wynn_epsilon(&sums[start..]);
        extrapolated.push(ext);

        // Plain convergence: the tail is already negligible.
        let tol = spec.tolerance_for(partial);
        if panel >= 4 && est.value.abs() <= 0.01 * tol && sums.len() >= 2 {
            let prev_term = sums[sums.len() - 1] - sums[sums.len() - 2];
            if prev_term.abs() <= 0.01 * tol {
                return Ok(Estimate {
                    value: partial,
                    abs_err: quad_err + est.value.abs() + prev_term.abs(),
                    panels: panel + 1,
                });
            }
        }

        let m = extrapolated.len();
        if m >= 4 && sums.len() >= 6 {
            let d1 = (extrapolated[m - 1] - extrapolated[m - 2]).abs();
            let d2 = (extrapolated[m - 2] - extrapolated[m - 3]).abs();
            let tol = spec.tolerance_for(ext);
            if d1 <= tol && d2 <= tol {
                let resid = d1.max(d2).max(spread.min(tol));
                return Ok(Estimate {
                    value: ext,
                    abs_err: resid + quad_err,
                    panels: panel + 1,
                });
            }
        }
    }
    let m = extrapolated.len();
    let (value, abs_err) = if m >= 2 {
        (
            extrapolated[m - 1],
            (extrapolated[m - 1] - extrapolated[m - 2]).abs() + quad_err,
        )
    } else {
        (partial, f64::INFINITY)
    };
    Err(Error::NoConvergence {
        module,
        panels: sums.len(),
        estimate: value,
        abs_err,
    })
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// n-th positive zero of J₀ (n ≥ 1), McMahon's expansion polished by Newton.
pub fn bessel_j0_zero(n: usize) -> f64 {
    assert!(n >= 1, "zeros are numbered from 1");
    let beta = (n as f64 - 0.25) * std::f64::consts::PI;
    let b8 = 8.0 * beta;
    let mut x = beta + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3)) + 120_928.0 / (15.0 * b8.powi(5));
    for _ in 0..4 {
        let step = bessel_j0(x) / bessel_j1(x);
        x += step;
        if step.abs() <= 1e-16 * x {
            break;
        }
    }
    x
}

/// Iterator over 0, j₀,₁/ρ, j₀,₂/ρ, …
fn j0_breakpoints(rho: f64) -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((1..).map(move |n| bessel_j0_zero(n) / rho))
}

/// ∫₀^∞ f(k) J₀(kρ) dk.
///
/// For ρ > 0 the half-line is cut at the zeros of J₀(kρ) and the partial
/// sums are accelerated. For ρ = 0 the kernel is 1 and the integral is
/// evaluated on the mapped half-line with unit k-scale, so `f` must decay.
pub fn hankel_integral<F: FnMut(f64) -> f64>(
    mut f: F,
    rho: f64,
    spec: &QuadratureSpec,
) -> Result<GreensValue> {
    spec.validate()?;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid("quadrature", format!("rho = {rho} must be >= 0")));
    }
    if rho == 0.0 {
        return integrate_semi_infinite(f, 0.0, 1.0, spec).map(GreensValue::from);
    }
    let integrand = move |k: f64| f(k) * bessel_j0(k * rho);
    integrate_oscillatory(integrand, j0_breakpoints(rho), spec, "quadrature").map(GreensValue::from)
}

/// ∫₀^∞ f(k) sin(kr) dk for r > 0, panels cut at the zeros kπ/r.
pub fn sine_transform<F: FnMut(f64) -> f64>(mut f: F, r: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    spec.validate()?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("quadrature", format!("r = {r} must be > 0")));
    }
    let step = std::f64::consts::PI / r;
    let integrand = move |k: f64| f(k) * (k * r).sin();
    integrate_oscillatory(integrand, (0..).map(move |n| n as f64 * step), spec, "quadrature")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_polynomials() {
        // K21 integrates degree ≤ 31 exactly; the embedded G10 degree ≤ 19.
        for deg in 0..=31 {
            let mut f = |x: f64| x.powi(deg);
            let (v, _) = gauss_kronrod_21(&mut f, -1.0, 1.0);
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((v - exact).abs() < 1e-14, "degree {deg}: {v} vs {exact}");
        }
        let gl = gauss_legendre_10();
        for deg in 0..=19 {
            let v: f64 = gl.iter().map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((v - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let mut f = |x: f64| 1.0 / x.sqrt();
        let est = integrate_adaptive(&mut f, 0.0, 1.0, 1e-12, 1e-12, 500).unwrap();
        assert!((est.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn semi_infinite_exponential() {
        let spec = QuadratureSpec::default();
        let est = integrate_semi_infinite(|k| (-3.0 * k).exp(), 0.0, 1.0, &spec).unwrap();
        assert!((est.value - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn wynn_sums_alternating_harmonic_series() {
        let mut s = 0.0;
        let sums: Vec<f64> = (1..=20)
            .map(|n| {
                s += if n % 2 == 1 { 1.0 } else { -1.0 } / n as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&sums);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12, "{v}");
    }

    #[test]
    fn j0_zeros_are_zeros() {
        let known = [2.404_825_557_695_773, 5.520_078_110_286_311, 8.653_727_912_911_012];
        for (n, z) in known.iter().enumerate() {
            assert!((bessel_j0_zero(n + 1) - z).abs() < 1e-13);
        }
        for n in [10, 50, 200, 1000] {
            let z = bessel_j0_zero(n);
            assert!(bessel_j0(z).abs() < 1e-14, "n = {n}");
            assert!(z > bessel_j0_zero(n - 1));
        }
    }

    #[test]
    fn hankel_laplace_identity() {
        let spec = QuadratureSpec::default();
        let v = hankel_integral(|k| (-k).exp(), 1.0, &spec).unwrap();
        assert!((v.value - 0.5f64.sqrt()).abs() < 1e-10, "{v:?}");
        assert!(v.abs_err < 1e-9);
    }

    #[test]
    fn hankel_closure_identity() {
        let spec = QuadratureSpec::default();
        let v = hankel_integral(|_| 1.0, 2.0, &spec).unwrap();
        assert!((v.value - 0.5).abs() < 1e-10, "{v:?}");
    }

    #[test]
    fn hankel_rejects_negative_rho() {
        assert!(hankel_integral(|_| 1.0, -1.0, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn hankel_reports_non_convergence() {
        let spec = QuadratureSpec {
            max_panels: 8,
            ..Default::default()
        };
        let err = hankel_integral(|k| k.sqrt(), 1.0, &spec).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn dirichlet_integral() {
        let spec = QuadratureSpec::default();
        let v = sine_transform(|k| 1.0 / k, 3.0, &spec).unwrap();
        assert!((v.value - std::f64::consts::FRAC_PI_2).abs() < 1e-10, "{v:?}");
    }
}
