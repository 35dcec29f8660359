//! Subcommand implementations. Each writes its artifacts through an
//! [`OutputDir`] and returns a timing record kept out of the manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::check::{run_checks, CheckReport};
use super::config::{Config, Format, GridConfig};
use super::output::OutputDir;
use crate::diagnostics::energy::{summarize, write_energy_csv, SeriesSummary};
use crate::diagnostics::{check_identity, EnergyOptions, IdentityReport, Recorder};
use crate::error::{Error, Result};
use crate::harness::{bound_ratios, emit_plots, run_sweep, BoundMonitor, RateReport};
use crate::initial_data::build_regime;
use crate::ns::{run_ns, NsOptions, NsStats, NsTrajectory};
use crate::relax::affine::ReferenceForcing;
use crate::relax::{run_affine, run_relax, RelaxParams, RelaxState, RunOptions, RunSummary};
use crate::spectral::norms::{l2_norm, linf_norm};
use crate::spectral::ops::divergence;
use crate::spectral::snapshot::Snapshot;
use crate::spectral::Field;

pub const TRAJECTORY_CSV_HEADER: &str = "t,in_layer,u_l2,p_l2,stress_l2,div_u_l2,u_linf";

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub command: String,
    pub wall_time: f64,
    pub threads: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub points: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxRunReport {
    pub command: String,
    pub grid: GridConfig,
    pub params: RelaxParams,
    pub dt: f64,
    pub horizon: f64,
    pub run: RunSummary,
    pub reference: NsStats,
    pub reference_fingerprint: String,
    pub bound_sup: BTreeMap<String, f64>,
    pub energies: BTreeMap<String, SeriesSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity: Option<IdentityReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NsRunReport {
    pub grid: GridConfig,
    pub horizon: f64,
    pub dt: f64,
    pub samples: usize,
    pub stats: NsStats,
    pub fingerprint: String,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn snapshot_bytes(f: &Field, t: f64) -> Result<Vec<u8>> {
    csv_bytes(|b| Snapshot::from_field(f, t).write_binary(b))
}

fn reference_run(cfg: &Config, base: &Field, horizon: f64) -> Result<NsTrajectory> {
    run_ns(
        base,
        horizon,
        &NsOptions {
            dt: cfg.reference.dt,
            sample_every: cfg.reference.sample_every,
            ..NsOptions::default()
        },
    )
}

fn trajectory_row(s: &RelaxState, in_layer: bool, out: &mut String) -> Result<()> {
    let div = l2_norm(&divergence(&s.u)?);
    let _ = writeln!(
        out,
        "{:e},{},{:e},{:e},{:e},{:e},{:e}",
        s.t,
        u8::from(in_layer),
        l2_norm(&s.u),
        l2_norm(&s.p),
        l2_norm(&s.stress),
        div,
        linf_norm(&s.u)
    );
    Ok(())
}

/// Relaxation (`affine = false`) or affine run against the configured reference.
pub fn cmd_run_relax(cfg: &Config, out: &mut OutputDir, affine: bool) -> Result<()> {
    let command = if affine { "run-affine" } else { "run-relax" };
    let preset = cfg.validate_run()?;
    if affine && cfg.diagnostics.identity {
        return Err(Error::Config(
            "diagnostics.identity applies to the full relaxation system only".into(),
        ));
    }
    let grid_cfg = cfg.grid()?;
    let time = cfg.time()?;
    let grid = cfg.make_grid()?;
    let params = preset.params()?;
    let base = preset.base_flow.build(&grid);
    let (init, certificate) = build_regime(&preset, &base)?;
    let dt = time.dt.unwrap_or_else(|| cfg.sweep.dt.dt(&grid, &params, &init.u));
    let reference = reference_run(cfg, &base, time.horizon)?;
    let opts = RunOptions {
        sample_every: time.sample_every,
        layer_sampling: time.layer_sampling,
        ..RunOptions::default()
    };
    let d = cfg.diagnostics;
    let record = d.energies || d.bounds || d.identity;
    let energy = EnergyOptions {
        exponent: preset.exponent(),
    };
    let mut recorder = Recorder::new(&params, &reference, energy, !affine, d.identity);
    let mut monitor = BoundMonitor::new(preset.theorem);
    let mut rows = format!("{TRAJECTORY_CSV_HEADER}\n");
    let mut observer = |s: &RelaxState, info: &crate::relax::step::SampleInfo| -> Result<()> {
        trajectory_row(s, info.in_layer, &mut rows)?;
        if record {
            recorder.observe(s)?;
        }
        if d.bounds {
            let rec = recorder.energies.last().expect("recorded above");
            monitor.push(s.t, &bound_ratios(preset.theorem, &params, s, rec)?);
        }
        Ok(())
    };
    let summary = if affine {
        let forcing = ReferenceForcing { reference: &reference };
        run_affine(&init, &params, &forcing, time.horizon, dt, &opts, &mut observer)?
    } else {
        run_relax(&init, &params, time.horizon, dt, &opts, &mut observer)?
    };
    let identity = if d.identity && recorder.identity.len() >= 3 {
        Some(check_identity(&recorder.identity)?)
    } else {
        None
    };
    let report = RelaxRunReport {
        command: command.to_string(),
        grid: grid_cfg,
        params,
        dt,
        horizon: time.horizon,
        reference: reference.stats.clone(),
        reference_fingerprint: reference.fingerprint(),
        bound_sup: monitor.names.iter().cloned().zip(monitor.sup()).collect(),
        energies: if d.energies {
            summarize(&recorder.energies)
        } else {
            BTreeMap::new()
        },
        identity,
        run: summary.clone(),
    };
    let o = &cfg.output;
    out.write_json("config.json", cfg)?;
    if o.wants(Format::Csv) {
        out.write("trajectory.csv", rows.as_bytes())?;
        out.write("reference.csv", &csv_bytes(|b| reference.write_csv(b))?)?;
        if d.energies {
            out.write("energy.csv", &csv_bytes(|b| write_energy_csv(&recorder.energies, b))?)?;
        }
    }
    if o.wants(Format::Json) {
        out.write_json("certificate.json", &certificate)?;
        out.write_json("summary.json", &report)?;
        if d.bounds {
            out.write_json("bounds.json", &monitor)?;
        }
    }
    if o.wants(Format::Snapshot) {
        if let Some(fin) = &summary.final_state {
            out.write("final_p.bin", &snapshot_bytes(&fin.p, fin.t)?)?;
            out.write("final_u.bin", &snapshot_bytes(&fin.u, fin.t)?)?;
            out.write("final_stress.bin", &snapshot_bytes(&fin.stress, fin.t)?)?;
        }
    }
    match summary.diverged {
        Some(reason) => Err(Error::Diverged(format!(
            "delta = {}, epsilon = {}: {reason}",
            params.delta, params.epsilon
        ))),
        None => Ok(()),
    }
}

/// Reference Navier-Stokes run from the configured base flow.
pub fn cmd_run_ns(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    cfg.validate_ns()?;
    let grid_cfg = cfg.grid()?;
    let time = cfg.time()?;
    let grid = cfg.make_grid()?;
    let base = cfg.initial_data.base_flow.build(&grid);
    let dt = time.dt.unwrap_or(cfg.reference.dt);
    let traj = run_ns(
        &base,
        time.horizon,
        &NsOptions {
            dt,
            sample_every: time.sample_every,
            ..NsOptions::default()
        },
    )?;
    out.write_json("config.json", cfg)?;
    if cfg.output.wants(Format::Csv) {
        out.write("ns_trajectory.csv", &csv_bytes(|b| traj.write_csv(b))?)?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_json(
            "ns_summary.json",
            &NsRunReport {
                grid: grid_cfg,
                horizon: time.horizon,
                dt: traj.stats.dt,
                samples: traj.samples.len(),
                stats: traj.stats.clone(),
                fingerprint: traj.fingerprint(),
            },
        )?;
    }
    if cfg.output.wants(Format::Snapshot) {
        let fin = traj.final_state();
        out.write("final_u.bin", &snapshot_bytes(&fin.u, fin.t)?)?;
    }
    Ok(())
}

/// Parameter sweep; returns per-point wall times.
pub fn cmd_sweep(cfg: &Config, out: &mut OutputDir) -> Result<BTreeMap<String, f64>> {
    let plan = cfg.sweep_plan()?;
    let report = run_sweep(&plan)?;
    out.write_json("config.json", cfg)?;
    out.write_json("report.json", &report.without_timings())?;
    if cfg.output.wants(Format::Csv) {
        for path in emit_plots(&report, out.root())? {
            out.adopt(&path)?;
        }
    }
    Ok(report
        .points
        .iter()
        .map(|p| (format!("delta={}", p.delta), p.wall_time))
        .collect())
}

/// Invariant self-tests; fails if any suite fails.
pub fn cmd_check(out: &mut OutputDir) -> Result<CheckReport> {
    let report = run_checks()?;
    out.write_json("check.json", &report)?;
    if report.passed {
        Ok(report)
    } else {
        let failed: Vec<String> = report
            .suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| format!("{} (worst {:e} > {:e})", s.name, s.worst, s.tolerance))
            .collect();
        Err(Error::CheckFailed(failed.join(", ")))
    }
}

/// CSV data and a gnuplot script for a stored sweep report.
pub fn cmd_emit_plots(report_path: &Path, out: &mut OutputDir) -> Result<()> {
    let text = std::fs::read_to_string(report_path)?;
    let report: RateReport =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", report_path.display())))?;
    for path in emit_plots(&report, out.root())? {
        out.adopt(&path)?;
    }
    Ok(())
}
