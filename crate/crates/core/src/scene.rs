//! JSON scene files and parameter sweeps.
//!
//! A scene names one geometry, one or two charges and a few evaluation
//! options. Sweeps rewrite a numeric field addressed by a dotted path
//! (`geometry.radius`, `charges.1.position.z`) and evaluate every sample
//! independently, in parallel, returning rows in ascending parameter order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::interactions::{force_on_A, pair_energy, self_energy, ForceResult, InteractionResult};
use crate::types::{Charge, Geometry, Point3, QuadratureSpec, ELEMENTARY_CHARGE};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargeUnit {
    #[default]
    Coulomb,
    Elementary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeSpec {
    pub q: f64,
    #[serde(default)]
    pub unit: ChargeUnit,
    pub position: Point3,
}

impl ChargeSpec {
    pub fn to_charge(&self) -> Charge {
        match self.unit {
            ChargeUnit::Coulomb => Charge::new(self.q, self.position),
            ChargeUnit::Elementary => Charge::new(self.q * ELEMENTARY_CHARGE, self.position),
        }
    }
}

/// How single-record results are reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Si,
    Ratio,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneOptions {
    pub local_field: bool,
    pub units: Units,
    pub quadrature: QuadratureSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub geometry: Geometry,
    pub charges: Vec<ChargeSpec>,
    #[serde(default)]
    pub options: SceneOptions,
}

/// Failures of the scene layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("[cli] scene schema error: {0}")]
    Schema(String),
    #[error("[cli] bad parameter path '{path}': {reason}")]
    Path { path: String, reason: String },
    #[error("[cli] {0}")]
    Io(String),
    #[error("{0}")]
    Eval(#[from] Error),
}

impl SceneError {
    /// 3 for numerical non-convergence, 2 for everything the user must fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            SceneError::Eval(e) if e.is_numerical() || matches!(e, Error::StepTooLarge { .. }) => 3,
            _ => 2,
        }
    }
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| SceneError::Schema(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Scene, SceneError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SceneError::Io(format!("cannot read scene {}: {e}", path.display())))?;
        Scene::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(1..=2).contains(&self.charges.len()) {
            return Err(SceneError::Schema(format!(
                "scene must hold 1 or 2 charges, found {}",
                self.charges.len()
            )));
        }
        for c in &self.charges {
            if !c.q.is_finite() || !c.position.is_finite() {
                return Err(SceneError::Schema("charge values must be finite".into()));
            }
        }
        self.geometry.validate().map_err(|e| SceneError::Schema(e.to_string()))?;
        self.options.quadrature.validate().map_err(|e| SceneError::Schema(e.to_string()))?;
        Ok(())
    }

    pub fn charges(&self) -> Vec<Charge> {
        self.charges.iter().map(ChargeSpec::to_charge).collect()
    }

    /// Pair energy for two charges, self-energy for one.
    pub fn energy(&self) -> Result<InteractionResult, SceneError> {
        let c = self.charges();
        let spec = &self.options.quadrature;
        Ok(match c.as_slice() {
            [a, b] => pair_energy(&self.geometry, a, b, spec)?,
            [a] => self_energy(&self.geometry, a, spec)?,
            _ => unreachable!("validated charge count"),
        })
    }

    pub fn pair_energy(&self) -> Result<InteractionResult, SceneError> {
        if self.charges.len() != 2 {
            return Err(SceneError::Schema("pair-energy needs exactly 2 charges".into()));
        }
        self.energy()
    }

    pub fn self_energy(&self) -> Result<InteractionResult, SceneError> {
        if self.charges.len() != 1 {
            return Err(SceneError::Schema("self-energy needs exactly 1 charge".into()));
        }
        self.energy()
    }

    /// Force on the first charge.
    pub fn force(&self) -> Result<ForceResult, SceneError> {
        let c = self.charges();
        let b = c.get(1);
        Ok(force_on_A(
            &self.geometry,
            &c[0],
            b,
            self.options.local_field,
            None,
            &self.options.quadrature,
        )?)
    }

    /// Copy of the scene with the numeric field at `path` set to `value`.
    pub fn with_param(&self, path: &str, value: f64) -> Result<Scene, SceneError> {
        let mut doc = serde_json::to_value(self).map_err(|e| SceneError::Schema(e.to_string()))?;
        *numeric_slot(&mut doc, path)? = Value::from(value);
        let scene: Scene = serde_json::from_value(doc).map_err(|e| SceneError::Path {
            path: path.to_string(),
            reason: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    /// Reads the numeric field at `path`.
    pub fn param(&self, path: &str) -> Result<f64, SceneError> {
        let mut doc = serde_json::to_value(self).map_err(|e| SceneError::Schema(e.to_string()))?;
        let slot = numeric_slot(&mut doc, path)?;
        Ok(slot.as_f64().expect("checked numeric"))
    }
}

fn numeric_slot<'a>(doc: &'a mut Value, path: &str) -> Result<&'a mut Value, SceneError> {
    let bad = |reason: String| SceneError::Path {
        path: path.to_string(),
        reason,
    };
    if path.is_empty() {
        return Err(bad("empty path".into()));
    }
    let mut cur = doc;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(seg).ok_or_else(|| bad(format!("no field '{seg}'")))?,
            Value::Array(items) => {
                let idx = match seg {
                    "x" if items.len() == 3 => 0,
                    "y" if items.len() == 3 => 1,
                    "z" if items.len() == 3 => 2,
                    _ => seg.parse::<usize>().map_err(|_| bad(format!("'{seg}' is not an index")))?,
                };
                let len = items.len();
                items.get_mut(idx).ok_or_else(|| bad(format!("index {idx} out of range (len {len})")))?
            }
            _ => return Err(bad(format!("cannot descend into a scalar at '{seg}'"))),
        };
    }
    if !cur.is_number() {
        return Err(bad("field is not numeric".into()));
    }
    Ok(cur)
}

/// One swept axis: `n` evenly spaced values between `start` and `stop`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub path: String,
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl SweepAxis {
    pub fn new(path: impl Into<String>, start: f64, stop: f64, n: usize) -> Self {
        SweepAxis {
            path: path.into(),
            start,
            stop,
            n,
        }
    }

    /// Sample values in ascending order.
    pub fn values(&self) -> Result<Vec<f64>, SceneError> {
        if self.n == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(SceneError::Path {
                path: self.path.clone(),
                reason: format!("range [{}, {}] with {} points is invalid", self.start, self.stop, self.n),
            });
        }
        let (lo, hi) = if self.start <= self.stop {
            (self.start, self.stop)
        } else {
            (self.stop, self.start)
        };
        if self.n == 1 {
            return Ok(vec![lo]);
        }
        let step = (hi - lo) / (self.n - 1) as f64;
        Ok((0..self.n)
            .map(|i| if i == self.n - 1 { hi } else { lo + step * i as f64 })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub param2: Option<f64>,
    pub energy: f64,
    pub ratio_to_free: Option<f64>,
    pub abs_err: f64,
}

/// Evaluates the scene energy over one axis, or over the product of two
/// (outer loop on the first).
pub fn run_sweep(scene: &Scene, axis: &SweepAxis, axis2: Option<&SweepAxis>) -> Result<Vec<SweepRow>, SceneError> {
    let first = axis.values()?;
    let second = match axis2 {
        Some(a) => a.values()?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    // Reject bad paths before spending time on evaluations.
    scene.param(&axis.path)?;
    if let Some(a) = axis2 {
        scene.param(&a.path)?;
    }
    let points: Vec<(f64, Option<f64>)> = first
        .iter()
        .flat_map(|&p| second.iter().map(move |&p2| (p, p2)))
        .collect();
    points
        .par_iter()
        .map(|&(p, p2)| {
            let mut s = scene.with_param(&axis.path, p)?;
            if let (Some(a), Some(v)) = (axis2, p2) {
                s = s.with_param(&a.path, v)?;
            }
            let r = s.energy()?;
            Ok(SweepRow {
                param: p,
                param2: p2,
                energy: r.energy,
                ratio_to_free: r.ratio_to_free,
                abs_err: r.abs_err,
            })
        })
        .collect()
}

/// Writes sweep rows as CSV with a header. Numbers use the shortest
/// round-trip representation, so output is byte-identical across runs.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], two_axes: bool, out: W) -> Result<(), SceneError> {
    let io = |e: csv::Error| SceneError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["param"];
    if two_axes {
        header.push("param2");
    }
    header.extend(["U", "ratio_to_free", "abs_err"]);
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec = vec![r.param.to_string()];
        if two_axes {
            rec.push(r.param2.map(|v| v.to_string()).unwrap_or_default());
        }
        rec.push(r.energy.to_string());
        rec.push(r.ratio_to_free.map(|v| v.to_string()).unwrap_or_default());
        rec.push(r.abs_err.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| SceneError::Io(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"{
        "geometry": {"kind": "free_space", "eps": 1},
        "charges": [
            {"q": 1, "unit": "elementary", "position": [0, 0, 0]},
            {"q": -1, "unit": "elementary", "position": [0, 0, 1]}
        ]
    }"#;

    #[test]
    fn parses_and_evaluates_pair_scene() {
        let scene = Scene::from_json(PAIR).unwrap();
        let r = scene.pair_energy().unwrap();
        assert!((r.energy + 2.307e-28).abs() < 1e-31, "{}", r.energy);
        assert!((r.ratio_to_free.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_counts() {
        let extra = PAIR.replacen("\"geometry\"", "\"colour\": 1, \"geometry\"", 1);
        assert!(matches!(Scene::from_json(&extra), Err(SceneError::Schema(_))));
        let none = r#"{"geometry": {"kind": "free_space", "eps": 1}, "charges": []}"#;
        assert!(matches!(Scene::from_json(none), Err(SceneError::Schema(_))));
        let geom = PAIR.replace("\"eps\": 1", "\"eps\": 1, \"tint\": 2");
        assert!(Scene::from_json(&geom).is_err());
        let opts = PAIR.replacen("\"charges\"", "\"options\": {\"units\": \"furlongs\"}, \"charges\"", 1);
        assert!(Scene::from_json(&opts).is_err());
    }

    #[test]
    fn param_paths() {
        let scene = Scene::from_json(PAIR).unwrap();
        assert_eq!(scene.param("charges.1.position.z").unwrap(), 1.0);
        assert_eq!(scene.param("charges.1.position.2").unwrap(), 1.0);
        let moved = scene.with_param("charges.1.position.z", 2.0).unwrap();
        assert_eq!(moved.charges[1].position.z, 2.0);
        for bad in ["", "charges.5.q", "geometry.kind", "geometry.nope", "charges.1.q.x"] {
            let err = scene.param(bad).unwrap_err();
            assert!(matches!(err, SceneError::Path { .. }), "{bad}: {err}");
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn sweep_rows_are_ascending_and_match_single_evaluation() {
        let scene = Scene::from_json(PAIR).unwrap();
        let rows = run_sweep(&scene, &SweepAxis::new("charges.1.position.z", 3.0, 1.0, 5), None).unwrap();
        assert!(rows.windows(2).all(|w| w[0].param < w[1].param));
        let single = run_sweep(&scene, &SweepAxis::new("charges.1.position.z", 1.0, 1.0, 1), None).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].energy, scene.pair_energy().unwrap().energy);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_sweep_csv(&rows, false, &mut a).unwrap();
        write_sweep_csv(&run_sweep(&scene, &SweepAxis::new("charges.1.position.z", 3.0, 1.0, 5), None).unwrap(), false, &mut b).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("param,U,ratio_to_free,abs_err\n"));
    }

    #[test]
    fn evaluation_errors_map_to_exit_codes() {
        let on_surface = r#"{"geometry": {"kind": "half_space", "eps1": 1, "eps2": 4},
            "charges": [{"q": 1, "position": [0, 0, 0]}]}"#;
        let err = Scene::from_json(on_surface).unwrap().self_energy().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let stalled = SceneError::Eval(Error::NoConvergence { module: "multilayer", panels: 1, estimate: 0.0, abs_err: 1.0 });
        assert_eq!(stalled.exit_code(), 3);
        assert!(stalled.to_string().contains("multilayer"));
    }
}
