//! Exponential time differencing (ETDRK2) for the relaxation system and the
//! affine system, plus the sampled run driver.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::params::RelaxParams;
use super::propagator::{PropagatorCache, Source};
use super::state::{flux, RelaxState};
use crate::error::{Error, Result};
use crate::spectral::norms::linf_norm;
use crate::spectral::{Field, Grid};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepOptions {
    /// Include the `u ⊗ u / delta` source; off gives the exact linear flow.
    pub nonlinear: bool,
    /// Guard `dt <= step_safety * min(delta, h / |u|_inf)` for nonlinear steps.
    pub step_safety: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            nonlinear: true,
            step_safety: 0.5,
        }
    }
}

/// Step bound of the accuracy guard.
pub fn step_bound(grid: &Grid, params: &RelaxParams, u_inf: f64, safety: f64) -> f64 {
    let adv = if u_inf > 0.0 {
        grid.spacing() / u_inf
    } else {
        f64::INFINITY
    };
    safety * params.delta.min(adv)
}

/// Fixed-step integrator bound to one propagator cache.
pub struct Stepper {
    cache: PropagatorCache,
    opts: StepOptions,
}

impl Stepper {
    pub fn new(grid: &Arc<Grid>, params: &RelaxParams, h: f64, opts: StepOptions) -> Result<Stepper> {
        Ok(Stepper {
            cache: PropagatorCache::new(grid, params, h)?,
            opts,
        })
    }

    pub fn h(&self) -> f64 {
        self.cache.h()
    }

    pub fn params(&self) -> &RelaxParams {
        self.cache.params()
    }

    pub fn options(&self) -> &StepOptions {
        &self.opts
    }

    fn finish(&self, s: &RelaxState, out: Vec<Complex64>) -> Result<RelaxState> {
        let next = RelaxState::unpack(s.grid(), out, s.t + self.h())?;
        if !next.is_finite() {
            let g = s.grid();
            let len = g.len();
            let packed = next.pack();
            let bad = packed
                .iter()
                .position(|c| !(c.re.is_finite() && c.im.is_finite()))
                .map_or(0, |i| i % len);
            let before: f64 = s.pack().chunks(len).map(|b| b[bad].norm_sqr()).sum::<f64>().sqrt();
            return Err(Error::NonFinite {
                t: next.t,
                detail: format!(
                    "mode k = {:?} became non-finite (mode norm before step {before:e})",
                    &g.freq(bad)[..g.dim()]
                ),
            });
        }
        Ok(next)
    }

    /// One step of the relaxation system. Returns the new state and `|u|_inf`
    /// of the input state.
    pub fn step(&self, s: &RelaxState) -> Result<(RelaxState, f64)> {
        let y = s.pack();
        if !self.opts.nonlinear {
            let out = self.cache.apply(&y, true, None);
            return Ok((self.finish(s, out)?, linf_norm(&s.u)));
        }
        let (wn, u_inf) = flux(&s.u)?;
        let bound = step_bound(s.grid(), self.params(), u_inf, self.opts.step_safety);
        if self.h() > bound * (1.0 + 1e-12) {
            return Err(Error::StepGuard { dt: self.h(), bound });
        }
        let a = self.cache.apply(&y, true, Some((wn.coeffs(), Source::P1)));
        let a_state = RelaxState::unpack(s.grid(), a.clone(), s.t + self.h())?;
        let (wa, _) = flux(&a_state.u)?;
        let dw = wa.sub(&wn)?;
        let out = self.cache.apply(&a, false, Some((dw.coeffs(), Source::P2)));
        Ok((self.finish(s, out)?, u_inf))
    }

    /// One step of the affine system with exogenous flux `f0` at the start and
    /// `f1` at the end of the step (linear in between).
    pub fn step_affine(&self, s: &RelaxState, f0: &Field, f1: &Field) -> Result<RelaxState> {
        let y = s.pack();
        let a = self.cache.apply(&y, true, Some((f0.coeffs(), Source::P1)));
        let df = f1.sub(f0)?;
        let out = self.cache.apply(&a, false, Some((df.coeffs(), Source::P2)));
        self.finish(s, out)
    }
}

/// Single nonlinear step with a freshly built cache.
pub fn relax_step(s: &RelaxState, params: &RelaxParams, dt: f64) -> Result<RelaxState> {
    Ok(Stepper::new(s.grid(), params, dt, StepOptions::default())?.step(s)?.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunOptions {
    pub step: StepOptions,
    /// Main-phase steps between samples.
    pub sample_every: usize,
    /// Step and sample the first `layer_span * delta` at `delta / layer_divisor`.
    pub layer_sampling: bool,
    pub layer_span: f64,
    pub layer_divisor: f64,
    /// `|u|_inf` above which the run stops and is marked diverged.
    pub blowup_threshold: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            step: StepOptions::default(),
            sample_every: 1,
            layer_sampling: true,
            layer_span: 10.0,
            layer_divisor: 20.0,
            blowup_threshold: 1e6,
        }
    }
}

/// Passed to run observers with each sample.
#[derive(Clone, Copy, Debug)]
pub struct SampleInfo {
    pub index: usize,
    pub in_layer: bool,
}

/// Outcome of a sampled run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub samples: usize,
    pub t_final: f64,
    /// `None` when the run reached the horizon.
    pub diverged: Option<String>,
    pub mean_drift_u: f64,
    pub mean_drift_p: f64,
    pub max_u_inf: f64,
    /// Step sizes used by the layer and main phases.
    pub phases: Vec<(f64, usize)>,
    #[serde(skip)]
    pub final_state: Option<RelaxState>,
}

struct Phase {
    h: f64,
    steps: usize,
    sample_every: usize,
    layer: bool,
}

fn schedule(t_end: f64, dt: f64, delta: f64, opts: &RunOptions) -> Result<Vec<Phase>> {
    if !(dt > 0.0) || !(t_end >= 0.0) || opts.sample_every == 0 {
        return Err(Error::InvalidArgument(
            "run needs dt > 0, T >= 0 and sample_every >= 1".into(),
        ));
    }
    let mut phases = Vec::new();
    let mut t0 = 0.0;
    let fit = |span: f64, h: f64| {
        let n = (span / h - 1e-9).ceil().max(1.0) as usize;
        (span / n as f64, n)
    };
    if t_end == 0.0 {
        return Ok(phases);
    }
    if opts.layer_sampling {
        let span = (opts.layer_span * delta).min(t_end);
        let (h, n) = fit(span, dt.min(delta / opts.layer_divisor));
        phases.push(Phase {
            h,
            steps: n,
            sample_every: 1,
            layer: true,
        });
        t0 = span;
    }
    let rest = t_end - t0;
    if rest > 1e-12 * t_end {
        let (h, n) = fit(rest, dt);
        phases.push(Phase {
            h,
            steps: n,
            sample_every: opts.sample_every,
            layer: false,
        });
    }
    Ok(phases)
}

fn drift(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs the relaxation system to `t_end`, calling `observer` at `t = 0` and at
/// each sample. Blow-up (non-finite state, `|u|_inf` above the threshold, or a
/// step-guard violation after the start) stops the run and is reported in
/// [`RunSummary::diverged`] rather than as an error.
pub fn run_relax(
    init: &RelaxState,
    params: &RelaxParams,
    t_end: f64,
    dt: f64,
    opts: &RunOptions,
    mut observer: impl FnMut(&RelaxState, &SampleInfo) -> Result<()>,
) -> Result<RunSummary> {
    params.validate()?;
    let phases = schedule(t_end, dt, params.delta, opts)?;
    let grid = init.grid().clone();
    let mut state = init.clone();
    state.t = 0.0;
    let mean_u0 = state.u.means();
    let mean_p0 = state.p.mean(0);
    let mut summary = RunSummary {
        steps: 0,
        samples: 1,
        t_final: 0.0,
        diverged: None,
        mean_drift_u: 0.0,
        mean_drift_p: 0.0,
        max_u_inf: linf_norm(&state.u),
        phases: phases.iter().map(|p| (p.h, p.steps)).collect(),
        final_state: None,
    };
    observer(
        &state,
        &SampleInfo {
            index: 0,
            in_layer: opts.layer_sampling,
        },
    )?;
    let mut t_base = 0.0;
    'outer: for phase in &phases {
        let stepper = Stepper::new(&grid, params, phase.h, opts.step)?;
        for i in 1..=phase.steps {
            let result = stepper.step(&state);
            let (mut next, u_inf) = match result {
                Ok(v) => v,
                Err(e @ Error::StepGuard { .. }) if summary.steps == 0 => return Err(e),
                Err(e @ (Error::StepGuard { .. } | Error::NonFinite { .. })) => {
                    summary.diverged = Some(e.to_string());
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            summary.max_u_inf = summary.max_u_inf.max(u_inf);
            if u_inf > opts.blowup_threshold {
                summary.diverged = Some(format!(
                    "|u|_inf = {u_inf:e} exceeds blow-up threshold {:e} at t = {:e}",
                    opts.blowup_threshold, state.t
                ));
                break 'outer;
            }
            next.t = t_base + phase.h * i as f64;
            state = next;
            summary.steps += 1;
            summary.mean_drift_u = summary.mean_drift_u.max(drift(&state.u.means(), &mean_u0));
            summary.mean_drift_p = summary.mean_drift_p.max((state.p.mean(0) - mean_p0).abs());
            if i % phase.sample_every == 0 || i == phase.steps {
                observer(
                    &state,
                    &SampleInfo {
                        index: summary.samples,
                        in_layer: phase.layer,
                    },
                )?;
                summary.samples += 1;
            }
        }
        t_base += phase.h * phase.steps as f64;
    }
    if summary.diverged.is_none() {
        let u_inf = linf_norm(&state.u);
        summary.max_u_inf = summary.max_u_inf.max(u_inf);
        if !(u_inf <= opts.blowup_threshold) {
            summary.diverged = Some(format!(
                "|u|_inf = {u_inf:e} exceeds blow-up threshold {:e} at t = {:e}",
                opts.blowup_threshold, state.t
            ));
        }
    }
    summary.t_final = state.t;
    summary.final_state = Some(state);
    Ok(summary)
}

/// Exogenous momentum flux for the affine system.
pub trait Forcing {
    /// Flux (tensor field, already dealiased) at time `t`.
    fn flux_at(&self, t: f64) -> Result<Field>;
}

/// Runs the affine system with the same sampling schedule as [`run_relax`].
pub fn run_affine(
    init: &RelaxState,
    params: &RelaxParams,
    forcing: &dyn Forcing,
    t_end: f64,
    dt: f64,
    opts: &RunOptions,
    mut observer: impl FnMut(&RelaxState, &SampleInfo) -> Result<()>,
) -> Result<RunSummary> {
    params.validate()?;
    let phases = schedule(t_end, dt, params.delta, opts)?;
    let grid = init.grid().clone();
    let mut state = init.clone();
    state.t = 0.0;
    let mean_u0 = state.u.means();
    let mean_p0 = state.p.mean(0);
    let mut summary = RunSummary {
        steps: 0,
        samples: 1,
        t_final: 0.0,
        diverged: None,
        mean_drift_u: 0.0,
        mean_drift_p: 0.0,
        max_u_inf: linf_norm(&state.u),
        phases: phases.iter().map(|p| (p.h, p.steps)).collect(),
        final_state: None,
    };
    observer(
        &state,
        &SampleInfo {
            index: 0,
            in_layer: opts.layer_sampling,
        },
    )?;
    let mut t_base = 0.0;
    let mut f0 = forcing.flux_at(0.0)?;
    for phase in &phases {
        let stepper = Stepper::new(&grid, params, phase.h, opts.step)?;
        for i in 1..=phase.steps {
            let t1 = t_base + phase.h * i as f64;
            let f1 = forcing.flux_at(t1)?;
            let mut next = stepper.step_affine(&state, &f0, &f1)?;
            next.t = t1;
            f0 = f1;
            state = next;
            summary.steps += 1;
            summary.mean_drift_u = summary.mean_drift_u.max(drift(&state.u.means(), &mean_u0));
            summary.mean_drift_p = summary.mean_drift_p.max((state.p.mean(0) - mean_p0).abs());
            if i % phase.sample_every == 0 || i == phase.steps {
                summary.max_u_inf = summary.max_u_inf.max(linf_norm(&state.u));
                observer(
                    &state,
                    &SampleInfo {
                        index: summary.samples,
                        in_layer: phase.layer,
                    },
                )?;
                summary.samples += 1;
            }
        }
        t_base += phase.h * phase.steps as f64;
    }
    summary.t_final = state.t;
    summary.final_state = Some(state);
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relax::affine::ZeroForcing;
    use crate::relax::propagator::linear_propagator;
    use crate::relax::state::Rates;
    use crate::spectral::norms::l2_norm;
    use crate::spectral::random::band_limited;
    use crate::spectral::Rank;
    use std::f64::consts::PI;

    fn sample_state(grid: &Arc<Grid>, amp: f64, seed: u64) -> RelaxState {
        let tp = 2.0 * PI;
        let tg = Field::from_fn(grid, Rank::Vector, |c, x| {
            let v = (tp * x[0]).sin() * (tp * x[1]).cos();
            if c == 0 {
                v
            } else if c == 1 {
                -(tp * x[0]).cos() * (tp * x[1]).sin()
            } else {
                0.0
            }
        });
        RelaxState {
            p: band_limited(grid, Rank::Scalar, 3, 1.0, seed).scale(amp),
            u: tg
                .add(&band_limited(grid, Rank::Vector, 3, 1.0, seed + 1).scale(amp))
                .unwrap(),
            stress: band_limited(grid, Rank::Tensor, 3, 1.0, seed + 2).scale(amp),
            t: 0.0,
        }
    }

    fn distance(a: &RelaxState, b: &RelaxState) -> f64 {
        let d = a.axpy(-1.0, b).unwrap();
        (d.p.energy() + d.u.energy() + d.stress.energy()).sqrt()
    }

    fn rk4_reference(s: &RelaxState, p: &RelaxParams, t: f64, h: f64) -> RelaxState {
        let n = (t / h).round() as usize;
        let f = |y: &RelaxState| -> RelaxState {
            let Rates { dp, du, dstress } = y.rates(p).unwrap();
            RelaxState {
                p: dp,
                u: du,
                stress: dstress,
                t: 0.0,
            }
        };
        let mut y = s.clone();
        for _ in 0..n {
            let k1 = f(&y);
            let k2 = f(&y.axpy(h / 2.0, &k1).unwrap());
            let k3 = f(&y.axpy(h / 2.0, &k2).unwrap());
            let k4 = f(&y.axpy(h, &k3).unwrap());
            let incr = k1
                .axpy(2.0, &k2)
                .unwrap()
                .axpy(2.0, &k3)
                .unwrap()
                .axpy(1.0, &k4)
                .unwrap();
            y = y.axpy(h / 6.0, &incr).unwrap();
        }
        y
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::new(2, 16).unwrap();
        let p = RelaxParams::new(0.01, 0.05).unwrap();
        let next = relax_step(&RelaxState::zeros(&g), &p, 0.005).unwrap();
        assert_eq!(distance(&next, &RelaxState::zeros(&g)), 0.0);
    }

    #[test]
    fn linear_run_equals_single_propagator() {
        let g = Grid::new(2, 16).unwrap();
        let params = RelaxParams::new(1e-3, 0.02).unwrap();
        let s = sample_state(&g, 0.3, 1);
        let opts = StepOptions {
            nonlinear: false,
            step_safety: 0.5,
        };
        let stepper = Stepper::new(&g, &params, 0.004, opts).unwrap();
        let mut y = s.clone();
        for _ in 0..25 {
            y = stepper.step(&y).unwrap().0;
        }
        let len = g.len();
        let packed = s.pack();
        let got = y.pack();
        for idx in 0..len {
            let k = &g.wavevector(idx)[..2];
            let e = linear_propagator(k, &params, 0.1).unwrap();
            let ym: Vec<_> = (0..7).map(|c| packed[c * len + idx]).collect();
            let want = e.matvec(&ym);
            for c in 0..7 {
                assert!((want[c] - got[c * len + idx]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn nonlinear_steps_converge_at_second_order() {
        let g = Grid::new(2, 16).unwrap();
        let params = RelaxParams::new(0.05, 0.05).unwrap();
        let s = sample_state(&g, 0.1, 3);
        let oracle = rk4_reference(&s, &params, 0.025, 1e-3 / 8.0);
        let errs: Vec<f64> = [10usize, 20, 40]
            .iter()
            .map(|&n| {
                let stepper = Stepper::new(&g, &params, 0.025 / n as f64, StepOptions::default()).unwrap();
                let mut y = s.clone();
                for _ in 0..n {
                    y = stepper.step(&y).unwrap().0;
                }
                distance(&y, &oracle)
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
        assert!(errs[2] < 2e-5, "errors {errs:?}");
    }

    #[test]
    fn run_conserves_means_and_samples_layer() {
        let g = Grid::new(2, 16).unwrap();
        let params = RelaxParams::new(0.01, 0.02).unwrap();
        let mut s = sample_state(&g, 0.2, 5);
        s.u.component_mut(0)[0] += 0.3;
        s.p.component_mut(0)[0] += 0.7;
        let mut times = Vec::new();
        let opts = RunOptions {
            sample_every: 5,
            ..RunOptions::default()
        };
        let summary = run_relax(&s, &params, 0.3, 0.002, &opts, |st, _| {
            times.push(st.t);
            Ok(())
        })
        .unwrap();
        assert!(summary.diverged.is_none());
        assert!(summary.mean_drift_u <= 1e-12);
        assert!(summary.mean_drift_p <= 1e-12);
        // layer: 0.2 at spacing 1e-3, then 0.1 at 0.002 sampled every 5 steps
        assert_eq!(times.len(), 1 + 200 + 10);
        assert!((times[1] - 1e-3).abs() < 1e-15);
        assert!((summary.t_final - 0.3).abs() < 1e-14);
    }

    #[test]
    fn zero_horizon_and_blowup() {
        let g = Grid::new(2, 16).unwrap();
        let params = RelaxParams::new(0.01, 0.02).unwrap();
        let s = sample_state(&g, 0.2, 5);
        let mut count = 0;
        let summary = run_relax(&s, &params, 0.0, 0.002, &RunOptions::default(), |_, _| {
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count, 1);
        assert_eq!(summary.steps, 0);
        let opts = RunOptions {
            blowup_threshold: 0.5,
            ..RunOptions::default()
        };
        let summary = run_relax(&s, &params, 0.1, 0.002, &opts, |_, _| Ok(())).unwrap();
        assert!(summary.diverged.is_some());
    }

    #[test]
    fn step_guard_rejects_large_steps() {
        let g = Grid::new(2, 16).unwrap();
        let params = RelaxParams::new(0.01, 0.02).unwrap();
        let s = sample_state(&g, 0.2, 5);
        match relax_step(&s, &params, 0.05) {
            Err(Error::StepGuard { .. }) => {}
            other => panic!("expected step guard, got {other:?}"),
        }
    }

    #[test]
    fn affine_zero_and_superposition() {
        let g = Grid::new(2, 16).unwrap();
        let params = RelaxParams::new(0.01, 0.02).unwrap();
        let zero = ZeroForcing { grid: g.clone() };
        let opts = RunOptions::default();
        let out = run_affine(&RelaxState::zeros(&g), &params, &zero, 0.1, 0.002, &opts, |_, _| Ok(())).unwrap();
        assert_eq!(l2_norm(&out.final_state.unwrap().u), 0.0);

        let a = sample_state(&g, 0.2, 11);
        let b = sample_state(&g, 0.3, 21);
        let fa = band_limited(&g, Rank::Tensor, 4, 1.0, 31);
        let fb = band_limited(&g, Rank::Tensor, 4, 1.0, 41);
        let run = |s: &RelaxState, f: Field| {
            let forcing = crate::relax::affine::FnForcing(move |t: f64| Ok(f.scale(1.0 + t)));
            run_affine(s, &params, &forcing, 0.1, 0.002, &opts, |_, _| Ok(()))
                .unwrap()
                .final_state
                .unwrap()
        };
        let ra = run(&a, fa.clone());
        let rb = run(&b, fb.clone());
        let rab = run(&a.axpy(1.0, &b).unwrap(), fa.add(&fb).unwrap());
        let sum = ra.axpy(1.0, &rb).unwrap();
        assert!(distance(&rab, &sum) < 1e-10 * (1.0 + distance(&sum, &RelaxState::zeros(&g))));
    }
}
