//! Homogeneous spatially dispersive bulk described by the static limit of
//! the hydrodynamic Drude model.
//!
//! At zero frequency the longitudinal permittivity is
//! ε∥(k) = eps_b + ω_p²/(β²k²) with eps_b = 1 + ω̃_p²/ω₀², and the Coulomb
//! interaction becomes a Yukawa potential with wavenumber
//! k_s = ω_p/(β√eps_b).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::sine_transform;
use crate::types::{QuadratureSpec, EPSILON_0};

const MODULE: &str = "nonlocal";

/// Static hydrodynamic Drude parameters.
///
/// `gamma_free` and `gamma_bound` are damping rates; they drop out at zero
/// frequency and are only carried so scene files can hold a full parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrudeStatic {
    /// Free-carrier plasma frequency ω_p (rad/s).
    pub omega_p: f64,
    /// Bound-electron plasma frequency ω̃_p (rad/s).
    pub omega_p_bound: f64,
    /// Bound transition frequency ω₀ (rad/s).
    pub omega_0: f64,
    /// Hydrodynamic velocity β (m/s).
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_free: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_bound: Option<f64>,
}

impl DrudeStatic {
    pub fn new(omega_p: f64, omega_p_bound: f64, omega_0: f64, beta: f64) -> Self {
        DrudeStatic {
            omega_p,
            omega_p_bound,
            omega_0,
            beta,
            gamma_free: None,
            gamma_bound: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidParameter { module: MODULE, reason });
        if !(self.omega_p >= 0.0 && self.omega_p.is_finite()) {
            return bad(format!("omega_p = {} must be >= 0", self.omega_p));
        }
        if !(self.omega_p_bound >= 0.0 && self.omega_p_bound.is_finite()) {
            return bad(format!("omega_p_bound = {} must be >= 0", self.omega_p_bound));
        }
        if !(self.omega_0 > 0.0 && self.omega_0.is_finite()) {
            return bad(format!("omega_0 = {} must be > 0", self.omega_0));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be > 0", self.beta));
        }
        for (name, g) in [("gamma_free", self.gamma_free), ("gamma_bound", self.gamma_bound)] {
            if let Some(g) = g {
                if !(g >= 0.0 && g.is_finite()) {
                    return bad(format!("{name} = {g} must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Bound-electron background permittivity 1 + ω̃_p²/ω₀².
    pub fn eps_b(&self) -> f64 {
        let ratio = self.omega_p_bound / self.omega_0;
        1.0 + ratio * ratio
    }

    /// Screening wavenumber ω_p/(β√eps_b) in 1/m.
    pub fn k_s(&self) -> f64 {
        self.omega_p / (self.beta * self.eps_b().sqrt())
    }

    /// ω_p/β, the free-carrier wavenumber entering ε∥.
    fn k_free(&self) -> f64 {
        self.omega_p / self.beta
    }
}

/// ε∥(k, ω = 0) = eps_b + ω_p²/(β²k²).
pub fn eps_longitudinal_static(k: f64, p: &DrudeStatic) -> Result<f64> {
    if !(k > 0.0) || k.is_nan() {
        return Err(Error::NonPositiveWavenumber(k));
    }
    p.validate()?;
    let kf = p.k_free() / k;
    Ok(p.eps_b() + kf * kf)
}

fn check_distance(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::NonPositiveDistance(r));
    }
    Ok(())
}

/// U = q_A q_B e^{−k_s r}/(4πε₀ eps_b r) in joules.
pub fn screened_potential(r: f64, q_a: f64, q_b: f64, p: &DrudeStatic) -> Result<f64> {
    check_distance(r)?;
    p.validate()?;
    Ok(q_a * q_b * (-p.k_s() * r).exp() / (4.0 * PI * EPSILON_0 * p.eps_b() * r))
}

/// dU/dr of [`screened_potential`].
pub fn screened_potential_derivative(r: f64, q_a: f64, q_b: f64, p: &DrudeStatic) -> Result<f64> {
    let u = screened_potential(r, q_a, q_b, p)?;
    Ok(-u * (p.k_s() + 1.0 / r))
}

/// Green's function of the screened bulk, e^{−k_s r}/(4π eps_b r), in 1/m.
pub fn screened_g(r: f64, p: &DrudeStatic) -> Result<f64> {
    check_distance(r)?;
    p.validate()?;
    Ok((-p.k_s() * r).exp() / (4.0 * PI * p.eps_b() * r))
}

/// Energy (J, with error estimate) from direct quadrature of the Fourier
/// representation, (q_A q_B/4πε₀)·(2/π)∫₀^∞ sin(kr)/(k r ε∥(k)) dk.
///
/// In x = kr the integrand is x·sin x/(eps_b x² + a²) with a = r ω_p/β.
/// Its 1/(eps_b x) tail is integrated exactly (∫ sin x/x = π/2), leaving
/// −a² sin x/(eps_b x(eps_b x² + a²)) for the oscillatory engine.
pub fn screened_potential_numeric(
    r: f64,
    q_a: f64,
    q_b: f64,
    p: &DrudeStatic,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    check_distance(r)?;
    p.validate()?;
    spec.validate()?;
    let eps_b = p.eps_b();
    let a = r * p.k_free();
    let a2 = a * a;
    let (integral, err) = if a2 == 0.0 {
        (PI / (2.0 * eps_b), 0.0)
    } else {
        // The bracket is (π/2)e^{−k_s r}/eps_b while the remainder integral is
        // O(1/(eps_b a²)); tighten the inner tolerance by their ratio.
        let shrink = (-p.k_s() * r).exp();
        let inner = QuadratureSpec {
            rel_tol: (spec.rel_tol * shrink).max(1e-15),
            abs_tol: spec.abs_tol * eps_b / a2,
            ..*spec
        };
        let rest = sine_transform(|x| if x == 0.0 { 0.0 } else { 1.0 / (eps_b * x * (eps_b * x * x + a2)) }, 1.0, &inner)
            .map_err(|e| relabel(e))?;
        (PI / (2.0 * eps_b) - a2 * rest.value, a2 * rest.abs_err)
    };
    let prefactor = q_a * q_b / (4.0 * PI * EPSILON_0 * r) * (2.0 / PI);
    Ok((prefactor * integral, (prefactor * err).abs()))
}

fn relabel(e: Error) -> Error {
    match e {
        Error::NoConvergence {
            panels,
            estimate,
            abs_err,
            ..
        } => Error::NoConvergence {
            module: MODULE,
            panels,
            estimate,
            abs_err,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn copper_like() -> DrudeStatic {
        DrudeStatic::new(1.0e15, 0.5e15, 1.0e15, 1.0e6)
    }

    #[test]
    fn longitudinal_permittivity_examples() {
        let p = DrudeStatic::new(0.0, 2.0e15, 1.0e15, 1.0e6);
        for k in [1e3, 1e9, 1e15] {
            assert_eq!(eps_longitudinal_static(k, &p).unwrap(), 5.0);
        }
        let tf = DrudeStatic::new(1.0e15, 0.0, 1.0e15, 1.0e6);
        assert!((eps_longitudinal_static(1e9, &tf).unwrap() - 2.0).abs() < 1e-15);
        assert!((eps_longitudinal_static(1e20, &tf).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(eps_longitudinal_static(0.0, &tf), Err(Error::NonPositiveWavenumber(_))));
    }

    #[test]
    fn unscreened_and_thomas_fermi_limits() {
        let q = crate::types::ELEMENTARY_CHARGE;
        let p = DrudeStatic::new(0.0, 1.0e15, 1.0e15, 1.0e6);
        let u = screened_potential(1e-9, q, q, &p).unwrap();
        assert!((u - q * q / (4.0 * PI * EPSILON_0 * 2.0 * 1e-9)).abs() < 1e-15 * u);
        let tf = DrudeStatic::new(3.0e15, 0.0, 1.0e15, 1.5e6);
        assert_eq!(tf.eps_b(), 1.0);
        assert_eq!(tf.k_s(), 3.0e15 / 1.5e6);
    }

    #[test]
    fn numeric_without_carriers_is_bulk_coulomb() {
        let q = crate::types::ELEMENTARY_CHARGE;
        let p = DrudeStatic::new(0.0, 0.0, 1.0e15, 1.0e6);
        let (u, _) = screened_potential_numeric(2e-9, q, -q, &p, &QuadratureSpec::default()).unwrap();
        assert!((u + q * q / (4.0 * PI * EPSILON_0 * 2e-9)).abs() < 1e-14 * u.abs());
    }

    #[test]
    fn numeric_matches_closed_form() {
        let p = copper_like();
        for r in [0.3e-9, 1e-9, 3e-9] {
            let exact = screened_potential(r, 1.0, 1.0, &p).unwrap();
            let (num, err) = screened_potential_numeric(r, 1.0, 1.0, &p, &QuadratureSpec::default()).unwrap();
            assert!(((num - exact) / exact).abs() < 1e-9, "r {r}: {num} vs {exact}");
            assert!(err < 1e-8 * exact.abs());
        }
    }

    #[test]
    fn numeric_log_slope_recovers_k_s() {
        let p = DrudeStatic::new(0.5e15, 0.0, 1.0e15, 1.0e6);
        let ratio = |r: f64| {
            let (u, _) = screened_potential_numeric(r, 1.0, 1.0, &p, &QuadratureSpec::default()).unwrap();
            u * 4.0 * PI * EPSILON_0 * r
        };
        let (r1, r2) = (2e-9, 6e-9);
        let slope = (ratio(r2).ln() - ratio(r1).ln()) / (r2 - r1);
        assert!(((slope + p.k_s()) / p.k_s()).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(screened_potential(0.0, 1.0, 1.0, &copper_like()), Err(Error::NonPositiveDistance(_))));
        let bad = DrudeStatic::new(1.0, 0.0, 0.0, 1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn damping_fields_are_accepted_and_ignored() {
        let json = r#"{"omega_p":1e15,"omega_p_bound":0,"omega_0":1e15,"beta":1e6,"gamma_free":1e13}"#;
        let p: DrudeStatic = serde_json::from_str(json).unwrap();
        assert_eq!(p.k_s(), 1e9);
        let unknown = r#"{"omega_p":1e15,"omega_p_bound":0,"omega_0":1e15,"beta":1e6,"nope":1}"#;
        assert!(serde_json::from_str::<DrudeStatic>(unknown).is_err());
    }

    proptest! {
        #[test]
        fn yukawa_structure(wp in 0.0f64..3e15, wb in 0.0f64..3e15, beta in 3e5f64..3e6, r in 1e-10f64..5e-9) {
            let p = DrudeStatic::new(wp, wb, 1.0e15, beta);
            let u = screened_potential(r, 1.0, 1.0, &p).unwrap();
            prop_assert!(u > 0.0);
            prop_assert!(screened_potential_derivative(r, 1.0, 1.0, &p).unwrap() < 0.0);
            let invariant = u * r * (p.k_s() * r).exp() * 4.0 * PI * EPSILON_0 * p.eps_b();
            prop_assert!((invariant - 1.0).abs() < 1e-10);
            prop_assert!(p.eps_b() >= 1.0);
        }
    }
}
