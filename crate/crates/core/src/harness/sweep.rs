//! Parameter sweeps along a scaling law against one shared reference run.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{bound_names, bound_ratios, trend_flatness, BoundMonitor, BoundTrend, TREND_FACTOR};
use super::fit::{fit_rate, RateFit};
use crate::diagnostics::{EnergyOptions, EnergyRecord, Recorder};
use crate::error::{Error, Result};
use crate::initial_data::{build_regime, Certificate, RegimePreset, Theorem};
use crate::ns::{run_ns, NsOptions, NsTrajectory};
use crate::relax::{run_relax, RelaxParams, RunOptions, ScalingLaw};
use crate::spectral::norms::linf_norm;
use crate::spectral::{Field, Grid};

/// Minimum R^2 for a reported slope.
pub const MIN_R_SQUARED: f64 = 0.95;
/// Minimum number of valid points for a reported slope.
pub const MIN_RATE_POINTS: usize = 4;
/// Minimum span of a rate ladder, in decades.
pub const MIN_RATE_DECADES: f64 = 1.5;
/// Slopes above the proven one by more than this are flagged.
pub const FASTER_MARGIN: f64 = 0.3;

/// Sup-in-time error metric. Squared norms unless named otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `||u - u_ref||^2_{L^2}`
    UL2,
    /// `||u - u_ref||^2_{H^1}`
    UH1,
    /// `sqrt(eps) ||p - p_ref||_{H^1}`
    PH1Scaled,
    /// `||p - p_ref||_{H^1}`
    PH1,
    /// `||curl (u - u_ref)||^2_{L^2}`
    CurlL2,
    /// `delta ||curl (u - u_ref)||^2_{H^1}`
    CurlH1Scaled,
    /// `||div u||^2_{L^2}`
    DivL2,
    /// `delta ||div u||^2_{H^1}`
    DivH1Scaled,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::UL2,
        Metric::UH1,
        Metric::PH1Scaled,
        Metric::PH1,
        Metric::CurlL2,
        Metric::CurlH1Scaled,
        Metric::DivL2,
        Metric::DivH1Scaled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::UL2 => "u_l2",
            Metric::UH1 => "u_h1",
            Metric::PH1Scaled => "p_h1_scaled",
            Metric::PH1 => "p_h1",
            Metric::CurlL2 => "curl_l2",
            Metric::CurlH1Scaled => "curl_h1_scaled",
            Metric::DivL2 => "div_l2",
            Metric::DivH1Scaled => "div_h1_scaled",
        }
    }

    pub fn value(self, r: &EnergyRecord, params: &RelaxParams) -> f64 {
        let n = &r.norms;
        match self {
            Metric::UL2 => n.v_l2 * n.v_l2,
            Metric::UH1 => n.v_h1 * n.v_h1,
            Metric::PH1Scaled => n.p_h1_scaled,
            Metric::PH1 => n.p_h1,
            Metric::CurlL2 => n.curl_v_l2 * n.curl_v_l2,
            Metric::CurlH1Scaled => params.delta * n.curl_v_h1 * n.curl_v_h1,
            Metric::DivL2 => n.div_l2 * n.div_l2,
            Metric::DivH1Scaled => params.delta * n.div_h1 * n.div_h1,
        }
    }

    /// Exponents `(b, e, f)` of the proven bound `delta^b eps^e (eps + delta)^f`.
    fn bound_exponents(self, theorem: Theorem) -> Option<(f64, f64, f64)> {
        use Metric::*;
        use Theorem::*;
        match (theorem, self) {
            (Thm21, UH1 | UL2) | (Cor22, UL2) => Some((0.0, 0.0, 1.0)),
            (Thm23, UH1 | UL2) => Some((0.0, 0.0, 2.0)),
            (Thm23, PH1Scaled) => Some((0.0, 0.0, 1.0)),
            (Thm23, PH1) => Some((0.0, -0.5, 1.0)),
            (Thm25, UL2) => Some((1.5, 0.0, 0.0)),
            (Thm26, UL2) => Some((0.5, 0.0, 0.0)),
            (Thm25 | Thm26, CurlL2 | CurlH1Scaled) => Some((0.5, 0.0, 0.0)),
            (Thm25 | Thm26, DivL2 | DivH1Scaled) => Some((-0.5, 1.0, 0.0)),
            (Thm27TwoD, UL2) => Some((1.0, 0.0, 0.0)),
            (Thm27TwoD, DivL2 | DivH1Scaled) => Some((-1.0, 1.0, 0.0)),
            _ => None,
        }
    }
}

/// Ladder coordinate used as the abscissa of rate fits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    #[default]
    EpsPlusDelta,
    Delta,
    Epsilon,
}

impl Abscissa {
    pub fn value(self, p: &RelaxParams) -> f64 {
        match self {
            Abscissa::EpsPlusDelta => p.epsilon + p.delta,
            Abscissa::Delta => p.delta,
            Abscissa::Epsilon => p.epsilon,
        }
    }
}

fn law_power(law: ScalingLaw) -> f64 {
    match law {
        ScalingLaw::EpsEqDelta | ScalingLaw::EpsEqMuDelta { .. } => 1.0,
        ScalingLaw::EpsEqDeltaSq | ScalingLaw::DeltaEqSqrtEps => 2.0,
    }
}

/// Slope of the proven bound of `metric` against `abscissa` along `law`.
pub fn predicted_slope(theorem: Theorem, metric: Metric, law: ScalingLaw, abscissa: Abscissa) -> Option<f64> {
    let (b, e, f) = metric.bound_exponents(theorem)?;
    let m = law_power(law);
    let in_delta = b + m * e + f * m.min(1.0);
    Some(match abscissa {
        Abscissa::Delta => in_delta,
        Abscissa::Epsilon => in_delta / m,
        Abscissa::EpsPlusDelta => in_delta / m.min(1.0),
    })
}

/// Whether the ladder must support a rate fit or only bound monitoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderKind {
    /// At least 4 points spanning at least 1.5 decades.
    #[default]
    Rate,
    /// At least 2 points; slopes are never reported as clean.
    Monitor,
}

/// `dt = min(max, delta_fraction * delta, cfl * h / |u0|_inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtPolicy {
    #[serde(default = "DtPolicy::default_max")]
    pub max: f64,
    #[serde(default = "DtPolicy::default_fraction")]
    pub delta_fraction: f64,
    #[serde(default = "DtPolicy::default_fraction")]
    pub cfl: f64,
}

impl DtPolicy {
    fn default_max() -> f64 {
        2.5e-3
    }

    fn default_fraction() -> f64 {
        0.4
    }

    pub fn dt(&self, grid: &Grid, params: &RelaxParams, u0: &Field) -> f64 {
        let u_inf = linf_norm(u0);
        let adv = if u_inf > 0.0 {
            self.cfl * grid.spacing() / u_inf
        } else {
            f64::INFINITY
        };
        self.max.min(self.delta_fraction * params.delta).min(adv)
    }
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy {
            max: Self::default_max(),
            delta_fraction: Self::default_fraction(),
            cfl: Self::default_fraction(),
        }
    }
}

/// Reference integration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePolicy {
    #[serde(default = "ReferencePolicy::default_dt")]
    pub dt: f64,
    #[serde(default = "ReferencePolicy::default_every")]
    pub sample_every: usize,
}

impl ReferencePolicy {
    fn default_dt() -> f64 {
        2.5e-4
    }

    fn default_every() -> usize {
        4
    }
}

impl Default for ReferencePolicy {
    fn default() -> Self {
        ReferencePolicy {
            dt: Self::default_dt(),
            sample_every: Self::default_every(),
        }
    }
}

fn default_sample_every() -> usize {
    4
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    /// Template; `delta` is replaced by each ladder value.
    pub preset: RegimePreset,
    /// Values of `delta`, strictly decreasing.
    pub ladder: Vec<f64>,
    pub dim: usize,
    pub n: usize,
    pub horizon: f64,
    #[serde(default)]
    pub dt: DtPolicy,
    /// Main-phase steps between samples.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "yes")]
    pub layer_sampling: bool,
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub abscissa: Abscissa,
    #[serde(default)]
    pub kind: LadderKind,
    #[serde(default)]
    pub reference: ReferencePolicy,
    /// Repeat the smallest ladder point at half the step.
    #[serde(default)]
    pub check_refinement: bool,
}

impl SweepPlan {
    pub fn new(
        preset: RegimePreset,
        ladder: Vec<f64>,
        dim: usize,
        n: usize,
        horizon: f64,
        metrics: Vec<Metric>,
    ) -> SweepPlan {
        SweepPlan {
            preset,
            ladder,
            dim,
            n,
            horizon,
            dt: DtPolicy::default(),
            sample_every: default_sample_every(),
            layer_sampling: true,
            metrics,
            abscissa: Abscissa::default(),
            kind: LadderKind::default(),
            reference: ReferencePolicy::default(),
            check_refinement: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Config(format!("sweep plan: {why}")));
        let l = &self.ladder;
        let min_points = match self.kind {
            LadderKind::Rate => MIN_RATE_POINTS,
            LadderKind::Monitor => 2,
        };
        if l.len() < min_points {
            return bad(format!("ladder needs at least {min_points} points, got {}", l.len()));
        }
        if l.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return bad("ladder values must lie in (0, 1]".into());
        }
        if l.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("ladder must be strictly decreasing".into());
        }
        let decades = (l[0] / l[l.len() - 1]).log10();
        if self.kind == LadderKind::Rate && decades < MIN_RATE_DECADES - 1e-9 {
            return bad(format!(
                "rate ladder spans {decades:.2} decades, needs {MIN_RATE_DECADES}"
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.metrics.is_empty() {
            return bad("no metrics requested".into());
        }
        if self.sample_every == 0 || self.reference.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        let dt = &self.dt;
        if !(dt.max > 0.0 && dt.delta_fraction > 0.0 && dt.cfl > 0.0 && self.reference.dt > 0.0) {
            return bad("step sizes and fractions must be positive".into());
        }
        Grid::new(self.dim, self.n).map_err(|e| Error::Config(e.to_string()))?;
        for &d in l {
            self.preset.with_delta(d).validate()?;
        }
        Ok(())
    }

    /// Preset at ladder value `delta`.
    pub fn preset_at(&self, delta: f64) -> RegimePreset {
        self.preset.with_delta(delta)
    }
}

/// Reference trajectory shared by every point of a sweep.
pub struct SharedReference {
    pub grid: Arc<Grid>,
    pub base: Field,
    pub trajectory: NsTrajectory,
    pub fingerprint: String,
}

impl SharedReference {
    pub fn compute(plan: &SweepPlan) -> Result<SharedReference> {
        let grid = Grid::new(plan.dim, plan.n)?;
        let base = plan.preset.base_flow.build(&grid);
        let opts = NsOptions {
            dt: plan.reference.dt,
            sample_every: plan.reference.sample_every,
            ..NsOptions::default()
        };
        let trajectory = run_ns(&base, plan.horizon, &opts)?;
        let fingerprint = trajectory.fingerprint();
        Ok(SharedReference {
            grid,
            base,
            trajectory,
            fingerprint,
        })
    }

    fn matches(&self, plan: &SweepPlan) -> Result<()> {
        let g = &self.grid;
        if g.dim() != plan.dim || g.n() != plan.n || (self.trajectory.t_end() - plan.horizon).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "reference ({}D, n = {}, T = {}) does not match the plan ({}D, n = {}, T = {})",
                g.dim(),
                g.n(),
                self.trajectory.t_end(),
                plan.dim,
                plan.n,
                plan.horizon
            )));
        }
        Ok(())
    }
}

/// Outcome of one ladder point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub delta: f64,
    pub epsilon: f64,
    pub abscissa: f64,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    pub valid: bool,
    pub diverged: Option<String>,
    /// Sup over samples of each requested metric.
    pub sup: BTreeMap<Metric, f64>,
    /// Sup over samples of each bound ratio.
    pub bound_sup: BTreeMap<String, f64>,
    pub mean_drift_u: f64,
    pub mean_drift_p: f64,
    pub certificate: Certificate,
    pub reference_fingerprint: String,
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Clean,
    NoCleanRate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRate {
    pub metric: Metric,
    /// `(ln abscissa, ln sup error)` of valid points.
    pub points: Vec<(f64, f64)>,
    /// Least-squares fit of all valid points, whatever its quality.
    pub fit: Option<RateFit>,
    /// Reported slope; only for clean fits.
    pub slope: Option<f64>,
    pub status: RateStatus,
    pub reason: Option<String>,
    pub predicted: Option<f64>,
    pub faster_than_proven: bool,
}

/// Sup-in-time changes when the smallest ladder point is rerun at half the step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub delta: f64,
    pub dt: f64,
    pub relative_change: BTreeMap<Metric, f64>,
    pub max_change: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub plan: SweepPlan,
    pub reference_fingerprint: String,
    pub points: Vec<PointResult>,
    pub rates: Vec<MetricRate>,
    pub bounds: Vec<BoundTrend>,
    pub refinement: Option<Refinement>,
}

impl RateReport {
    pub fn rate(&self, m: Metric) -> Option<&MetricRate> {
        self.rates.iter().find(|r| r.metric == m)
    }

    pub fn bound(&self, name: &str) -> Option<&BoundTrend> {
        self.bounds.iter().find(|b| b.name == name)
    }

    /// Copy with wall times zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> RateReport {
        let mut r = self.clone();
        for p in &mut r.points {
            p.wall_time = 0.0;
        }
        r
    }
}

fn run_point(plan: &SweepPlan, reference: &SharedReference, delta: f64, dt_scale: f64) -> Result<PointResult> {
    let start = Instant::now();
    let preset = plan.preset_at(delta);
    let params = preset.params()?;
    let (init, certificate) = build_regime(&preset, &reference.base)?;
    let dt = plan.dt.dt(&reference.grid, &params, &init.u) * dt_scale;
    let opts = RunOptions {
        sample_every: plan.sample_every,
        layer_sampling: plan.layer_sampling,
        ..RunOptions::default()
    };
    let energy = EnergyOptions {
        exponent: preset.exponent(),
    };
    let mut recorder = Recorder::new(&params, &reference.trajectory, energy, true, false);
    let mut monitor = BoundMonitor::new(preset.theorem);
    let summary = run_relax(&init, &params, plan.horizon, dt, &opts, |s, _| {
        recorder.observe(s)?;
        let rec = recorder.energies.last().expect("just recorded");
        monitor.push(s.t, &bound_ratios(preset.theorem, &params, s, rec)?);
        Ok(())
    })?;
    let mut sup = BTreeMap::new();
    for &m in &plan.metrics {
        let values: Vec<f64> = recorder.energies.iter().map(|r| m.value(r, &params)).collect();
        let s = if values.iter().all(|x| x.is_finite()) {
            values.iter().copied().fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        sup.insert(m, s);
    }
    let bound_sup: BTreeMap<String, f64> = monitor.names.iter().cloned().zip(monitor.sup()).collect();
    let valid =
        summary.diverged.is_none() && sup.values().all(|x| x.is_finite()) && bound_sup.values().all(|x| x.is_finite());
    Ok(PointResult {
        delta,
        epsilon: params.epsilon,
        abscissa: plan.abscissa.value(&params),
        dt,
        steps: summary.steps,
        samples: summary.samples,
        valid,
        diverged: summary.diverged,
        sup,
        bound_sup,
        mean_drift_u: summary.mean_drift_u,
        mean_drift_p: summary.mean_drift_p,
        certificate,
        reference_fingerprint: reference.fingerprint.clone(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn metric_rate(plan: &SweepPlan, law: ScalingLaw, points: &[PointResult], m: Metric) -> MetricRate {
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.valid)
        .map(|p| (p.abscissa, p.sup[&m]))
        .collect();
    let predicted = predicted_slope(plan.preset.theorem, m, law, plan.abscissa);
    let fit = fit_rate(&pairs).ok();
    let reason = if plan.kind == LadderKind::Monitor {
        Some("monitor ladder".to_string())
    } else if pairs.len() < MIN_RATE_POINTS {
        Some(format!("{} valid points, need {MIN_RATE_POINTS}", pairs.len()))
    } else {
        match fit {
            None => Some("fit failed (non-positive errors)".to_string()),
            Some(f) if f.r_squared < MIN_R_SQUARED => Some(format!("R^2 = {:.3} < {MIN_R_SQUARED}", f.r_squared)),
            Some(_) => None,
        }
    };
    let slope = if reason.is_none() { fit.map(|f| f.slope) } else { None };
    MetricRate {
        metric: m,
        points: pairs.iter().map(|&(x, y)| (x.ln(), y.ln())).collect(),
        fit,
        slope,
        status: if slope.is_some() {
            RateStatus::Clean
        } else {
            RateStatus::NoCleanRate
        },
        reason,
        predicted,
        faster_than_proven: match (slope, predicted) {
            (Some(s), Some(p)) => s > p + FASTER_MARGIN,
            _ => false,
        },
    }
}

/// Runs every ladder point against `reference` (in parallel on the current
/// rayon pool) and assembles the report. Fails if fewer than the required
/// number of points are valid.
pub fn run_sweep_with(plan: &SweepPlan, reference: &SharedReference) -> Result<RateReport> {
    plan.validate()?;
    reference.matches(plan)?;
    if reference.trajectory.fingerprint() != reference.fingerprint {
        return Err(Error::InvalidArgument(
            "reference trajectory changed since it was hashed".into(),
        ));
    }
    let law = plan.preset.law()?;
    let points: Vec<PointResult> = plan
        .ladder
        .par_iter()
        .map(|&d| run_point(plan, reference, d, 1.0))
        .collect::<Result<_>>()?;
    if points.iter().any(|p| p.reference_fingerprint != reference.fingerprint) {
        return Err(Error::InvalidArgument("ladder points used different references".into()));
    }
    let valid = points.iter().filter(|p| p.valid).count();
    let need = match plan.kind {
        LadderKind::Rate => MIN_RATE_POINTS,
        LadderKind::Monitor => 2,
    };
    if valid < need {
        let bad: Vec<String> = points
            .iter()
            .filter(|p| !p.valid)
            .map(|p| {
                format!(
                    "delta = {}: {}",
                    p.delta,
                    p.diverged.as_deref().unwrap_or("non-finite metric")
                )
            })
            .collect();
        return Err(Error::Diverged(format!(
            "{valid} of {} ladder points valid, need {need}; {}",
            points.len(),
            bad.join("; ")
        )));
    }
    let rates = plan
        .metrics
        .iter()
        .map(|&m| metric_rate(plan, law, &points, m))
        .collect();
    let bounds = bound_names(plan.preset.theorem)
        .iter()
        .map(|name| {
            let sups: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| p.valid)
                .map(|p| (p.delta, p.bound_sup[*name]))
                .collect();
            trend_flatness(name, &sups, TREND_FACTOR)
        })
        .collect();
    let refinement = if plan.check_refinement {
        let last = points.last().expect("validated ladder");
        let half = run_point(plan, reference, last.delta, 0.5)?;
        let mut relative_change = BTreeMap::new();
        for &m in &plan.metrics {
            let (a, b) = (last.sup[&m], half.sup[&m]);
            let scale = a.abs().max(b.abs());
            relative_change.insert(m, if scale > 0.0 { (a - b).abs() / scale } else { 0.0 });
        }
        let max_change = relative_change.values().copied().fold(0.0, f64::max);
        Some(Refinement {
            delta: last.delta,
            dt: half.dt,
            relative_change,
            max_change,
            ok: half.valid && max_change < 0.1,
        })
    } else {
        None
    };
    Ok(RateReport {
        plan: plan.clone(),
        reference_fingerprint: reference.fingerprint.clone(),
        points,
        rates,
        bounds,
        refinement,
    })
}

/// Computes the reference once and runs the sweep.
pub fn run_sweep(plan: &SweepPlan) -> Result<RateReport> {
    plan.validate()?;
    let reference = SharedReference::compute(plan)?;
    run_sweep_with(plan, &reference)
}
