//! Strict JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Abscissa, DtPolicy, LadderKind, Metric, ReferencePolicy, SweepPlan};
use crate::initial_data::{BaseFlow, Preparation, RegimePreset, Theorem};
use crate::relax::ScalingLaw;
use crate::spectral::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: f64,
    /// Relaxation (or reference, for `run-ns`) step; derived from the sweep
    /// step policy when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "one")]
    pub sample_every: usize,
    #[serde(default = "yes")]
    pub layer_sampling: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling_law: Option<ScalingLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Strictly decreasing `delta` values of a sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    pub theorem: Theorem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default)]
    pub preparation: Preparation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub base_flow: BaseFlow,
    #[serde(default = "unit")]
    pub amplitude_scale: f64,
}

impl Default for InitialDataConfig {
    fn default() -> Self {
        InitialDataConfig {
            theorem: Theorem::Thm21,
            a: None,
            preparation: Preparation::default(),
            seed: 0,
            base_flow: BaseFlow::default(),
            amplitude_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "yes")]
    pub energies: bool,
    #[serde(default)]
    pub identity: bool,
    #[serde(default = "yes")]
    pub bounds: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            energies: true,
            identity: false,
            bounds: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub abscissa: Abscissa,
    #[serde(default)]
    pub kind: LadderKind,
    #[serde(default)]
    pub dt: DtPolicy,
    #[serde(default)]
    pub check_refinement: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            metrics: default_metrics(),
            abscissa: Abscissa::default(),
            kind: LadderKind::default(),
            dt: DtPolicy::default(),
            check_refinement: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    /// Binary final-state snapshots.
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Not echoed into recorded configs, so manifests do not depend on it.
    #[serde(default = "default_directory", skip_serializing)]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub initial_data: InitialDataConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub reference: ReferencePolicy,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::UH1]
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

fn bad<T>(why: impl Into<String>) -> Result<T> {
    Err(Error::Config(why.into()))
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        bad(format!("{name} must be positive and finite, got {x}"))
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Config> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn grid(&self) -> Result<GridConfig> {
        let g = self.grid.ok_or_else(|| Error::Config("grid is required".into()))?;
        if !(g.dim == 2 || g.dim == 3) {
            return bad(format!("grid.dim must be 2 or 3, got {}", g.dim));
        }
        if g.n < 4 || g.n % 2 != 0 {
            return bad(format!("grid.n must be even and at least 4, got {}", g.n));
        }
        Ok(g)
    }

    pub fn time(&self) -> Result<TimeConfig> {
        let t = self.time.ok_or_else(|| Error::Config("time is required".into()))?;
        positive("time.T", t.horizon)?;
        if let Some(dt) = t.dt {
            positive("time.dt", dt)?;
        }
        if t.sample_every == 0 {
            return bad("time.sample_every must be at least 1");
        }
        Ok(t)
    }

    pub fn make_grid(&self) -> Result<std::sync::Arc<Grid>> {
        let g = self.grid()?;
        Grid::new(g.dim, g.n).map_err(|e| Error::Config(e.to_string()))
    }

    fn check_reference(&self) -> Result<()> {
        positive("reference.dt", self.reference.dt)?;
        if self.reference.sample_every == 0 {
            return bad("reference.sample_every must be at least 1");
        }
        Ok(())
    }

    fn check_output(&self) -> Result<()> {
        if self.output.formats.is_empty() {
            return bad("output.formats must not be empty");
        }
        Ok(())
    }

    /// Preset at `delta`, with an explicit `epsilon` turned into the
    /// equivalent `eps = mu delta` law unless the preset already implies it.
    pub fn preset_at(&self, delta: f64) -> Result<RegimePreset> {
        let d = &self.initial_data;
        let ph = &self.physics;
        let mut p = RegimePreset {
            theorem: d.theorem,
            delta,
            a: d.a,
            mu: ph.mu,
            scaling_law: ph.scaling_law,
            preparation: d.preparation,
            seed: d.seed,
            base_flow: d.base_flow,
            amplitude_scale: d.amplitude_scale,
        };
        if let Some(eps) = ph.epsilon {
            positive("physics.epsilon", eps)?;
            if ph.ladder.is_some() {
                return bad("physics.epsilon is fixed by the scaling law in a sweep; drop it");
            }
            let implied = p.params().ok().map(|x| x.epsilon);
            let same = implied.is_some_and(|e| (e - eps).abs() <= 1e-12 * eps);
            if !same {
                if ph.scaling_law.is_some() || ph.mu.is_some() {
                    return bad("physics.epsilon conflicts with scaling_law or mu");
                }
                p.scaling_law = Some(ScalingLaw::EpsEqMuDelta { mu: eps / delta });
            }
        }
        p.validate()?;
        if let (Some(req), Some(g)) = (p.theorem.dimension(), self.grid) {
            if req != g.dim {
                return bad(format!("{} needs a {req}D grid, got {}D", p.theorem.name(), g.dim));
            }
        }
        Ok(p)
    }

    /// Preset of a single run.
    pub fn preset(&self) -> Result<RegimePreset> {
        if self.physics.ladder.is_some() {
            return bad("physics.ladder is only used by sweep");
        }
        let delta = self
            .physics
            .delta
            .ok_or_else(|| Error::Config("physics.delta is required".into()))?;
        positive("physics.delta", delta)?;
        self.preset_at(delta)
    }

    /// Validates everything a single relaxation run needs.
    pub fn validate_run(&self) -> Result<RegimePreset> {
        self.grid()?;
        self.time()?;
        self.check_reference()?;
        self.check_output()?;
        self.preset()
    }

    /// Validates everything a reference run needs.
    pub fn validate_ns(&self) -> Result<()> {
        self.grid()?;
        self.time()?;
        self.check_reference()?;
        self.check_output()
    }

    /// Sweep plan; the ladder must have at least two strictly decreasing entries.
    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        let g = self.grid()?;
        let t = self.time()?;
        self.check_reference()?;
        self.check_output()?;
        if self.physics.delta.is_some() {
            return bad("physics.delta is replaced by physics.ladder in a sweep");
        }
        let ladder = self
            .physics
            .ladder
            .clone()
            .ok_or_else(|| Error::Config("physics.ladder is required".into()))?;
        if ladder.len() < 2 {
            return bad(format!("physics.ladder needs at least 2 values, got {}", ladder.len()));
        }
        if self.sweep.metrics.is_empty() {
            return bad("sweep.metrics must not be empty");
        }
        let preset = self.preset_at(ladder[0])?;
        let mut plan = SweepPlan::new(preset, ladder, g.dim, g.n, t.horizon, self.sweep.metrics.clone());
        plan.dt = self.sweep.dt;
        if let Some(dt) = t.dt {
            plan.dt.max = dt;
        }
        plan.sample_every = t.sample_every;
        plan.layer_sampling = t.layer_sampling;
        plan.abscissa = self.sweep.abscissa;
        plan.kind = self.sweep.kind;
        plan.reference = self.reference;
        plan.check_refinement = self.sweep.check_refinement;
        plan.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUN: &str = r#"{
        "grid": {"dim": 3, "n": 16},
        "time": {"T": 0.1, "dt": 0.001},
        "physics": {"delta": 0.04},
        "initial_data": {"theorem": "thm25"}
    }"#;

    #[test]
    fn parses_and_validates_a_run() {
        let c = Config::from_json(RUN).unwrap();
        let p = c.validate_run().unwrap();
        assert_eq!(p.theorem, Theorem::Thm25);
        assert!((p.params().unwrap().epsilon - 1.6e-3).abs() < 1e-15);
        assert!(c.output.wants(Format::Csv) && !c.output.wants(Format::Snapshot));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            Config::from_json(r#"{"grid": {"dim": 2, "n": 16, "m": 1}}"#),
            Err(Error::Config(_))
        ));
        assert!(Config::from_json(r#"{"physcs": {}}"#).is_err());
        let mut c = Config::from_json(RUN).unwrap();
        c.grid = Some(GridConfig { dim: 3, n: 15 });
        assert!(c.validate_run().is_err());
        let mut c = Config::from_json(RUN).unwrap();
        c.grid = Some(GridConfig { dim: 2, n: 16 });
        assert!(c.validate_run().is_err(), "thm25 on a 2D grid");
        let mut c = Config::from_json(RUN).unwrap();
        c.time.as_mut().unwrap().horizon = -1.0;
        assert!(c.validate_run().is_err());
    }

    #[test]
    fn explicit_epsilon() {
        let mut c = Config::from_json(RUN).unwrap();
        c.physics.epsilon = Some(0.04 * 0.04);
        assert!(c.validate_run().is_ok(), "matches eps = delta^2");
        c.physics.epsilon = Some(1e-3);
        assert!(c.validate_run().is_err(), "thm25 rejects other laws");
        c.initial_data.theorem = Theorem::Thm21;
        let p = c.validate_run().unwrap();
        assert!((p.params().unwrap().epsilon - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn sweep_ladder_guards() {
        let text = r#"{
            "grid": {"dim": 2, "n": 16},
            "time": {"T": 0.05},
            "physics": {"ladder": [0.01, 0.001]},
            "initial_data": {"theorem": "thm21"},
            "sweep": {"metrics": ["u_h1"], "kind": "monitor"}
        }"#;
        let c = Config::from_json(text).unwrap();
        assert_eq!(c.sweep_plan().unwrap().ladder.len(), 2);
        let mut one = c.clone();
        one.physics.ladder = Some(vec![0.01]);
        assert!(matches!(one.sweep_plan(), Err(Error::Config(_))));
        let mut up = c.clone();
        up.physics.ladder = Some(vec![0.001, 0.01]);
        assert!(matches!(up.sweep_plan(), Err(Error::Config(_))));
    }
}
