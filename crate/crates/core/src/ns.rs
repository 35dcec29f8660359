//! Reference incompressible Navier-Stokes solver (unit viscosity).
//!
//! The velocity is advanced with an integrating factor for the Laplacian and
//! classical RK4 for the projected, dealiased advection. Pressure and stress are
//! reconstructed on demand.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::norms::{grad_sq, h1_norm, l2_norm, linf_norm};
use crate::spectral::ops::{divergence, gradient, leray_project, project, self_outer};
use crate::spectral::{Field, Rank};

/// `p = -lap^-1 div div (u ⊗ u)` with zero mean.
pub fn pressure_from_velocity(u: &Field) -> Result<Field> {
    u.expect_rank(Rank::Vector)?;
    pressure_from_flux(&self_outer(u)?)
}

/// Mean-zero pressure balancing the divergence of a momentum flux `w`.
pub fn pressure_from_flux(w: &Field) -> Result<Field> {
    w.expect_rank(Rank::Tensor)?;
    let g = w.grid().clone();
    let d = g.dim();
    let mut p = Field::zeros(&g, Rank::Scalar);
    let dst = p.component_mut(0);
    for (idx, out) in dst.iter_mut().enumerate() {
        let k2 = g.wavenumber_sq(idx);
        if k2 == 0.0 {
            continue;
        }
        let k = g.wavevector(idx);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += k[i] * k[j] * w.component(i * d + j)[idx];
            }
        }
        *out = -acc / k2;
    }
    Ok(p)
}

/// Stress-like tensor `u ⊗ u - grad u`, product dealiased.
pub fn stress_tensor(u: &Field) -> Result<Field> {
    self_outer(u)?.sub(&gradient(u)?)
}

/// `-P div (u ⊗ u)` with the product dealiased.
pub fn advection(u: &Field) -> Result<Field> {
    Ok(project(&divergence(&self_outer(u)?)?)?.scale(-1.0))
}

/// Full right-hand side `lap u - P div (u ⊗ u)`.
pub fn velocity_rate(u: &Field) -> Result<Field> {
    let mut r = advection(u)?;
    let g = u.grid().clone();
    for c in 0..u.n_components() {
        let src = u.component(c).to_vec();
        for (idx, x) in r.component_mut(c).iter_mut().enumerate() {
            *x -= g.wavenumber_sq(idx) * src[idx];
        }
    }
    Ok(r)
}

/// Reference state. Pressure and stress are derived from `u`.
#[derive(Clone, Debug)]
pub struct NsState {
    pub u: Field,
    pub t: f64,
}

impl NsState {
    pub fn new(u: Field, t: f64) -> Result<NsState> {
        u.expect_rank(Rank::Vector)?;
        Ok(NsState { u, t })
    }

    pub fn pressure(&self) -> Result<Field> {
        pressure_from_velocity(&self.u)
    }

    pub fn stress(&self) -> Result<Field> {
        stress_tensor(&self.u)
    }
}

/// Largest step allowed by the advective CFL guard.
pub fn cfl_bound(u: &Field, cfl_safety: f64) -> f64 {
    cfl_safety * u.grid().spacing() / linf_norm(u).max(1.0)
}

fn decay(u: &Field, h: f64) -> Vec<f64> {
    let g = u.grid();
    (0..g.len()).map(|idx| (-g.wavenumber_sq(idx) * h).exp()).collect()
}

fn apply(f: &Field, m: &[f64]) -> Field {
    let mut out = f.clone();
    for c in 0..f.n_components() {
        for (x, w) in out.component_mut(c).iter_mut().zip(m) {
            *x *= *w;
        }
    }
    out
}

/// One integrating-factor RK4 step. Fails if `dt` exceeds the CFL bound.
pub fn ns_step(s: &NsState, dt: f64, cfl_safety: f64) -> Result<NsState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let bound = cfl_bound(&s.u, cfl_safety);
    if dt > bound {
        return Err(Error::Cfl { dt, bound });
    }
    let u = &s.u;
    let e_full = decay(u, dt);
    let e_half = decay(u, dt / 2.0);
    let k1 = advection(u)?;
    let a = apply(&u.axpy(dt / 2.0, &k1)?, &e_half);
    let k2 = advection(&a)?;
    let eu_half = apply(u, &e_half);
    let b = eu_half.axpy(dt / 2.0, &k2)?;
    let k3 = advection(&b)?;
    let c = apply(u, &e_full).axpy(dt, &apply(&k3, &e_half))?;
    let k4 = advection(&c)?;
    let mut mid = k2.add(&k3)?;
    mid = apply(&mid, &e_half);
    let mut incr = apply(&k1, &e_full);
    incr.axpy_in_place(2.0, &mid)?;
    incr.axpy_in_place(1.0, &k4)?;
    let next = apply(u, &e_full).axpy(dt / 6.0, &incr)?;
    if !next.is_finite() {
        return Err(Error::NonFinite {
            t: s.t + dt,
            detail: format!(
                "velocity became non-finite (max coefficient before step {:e})",
                u.max_abs_coeff()
            ),
        });
    }
    Ok(NsState { u: next, t: s.t + dt })
}

/// Stored reference sample: velocity and its time derivative.
#[derive(Clone, Debug)]
pub struct NsSample {
    pub t: f64,
    pub u: Field,
    pub udot: Field,
}

/// One row of the trajectory CSV.
#[derive(Clone, Debug, Serialize)]
pub struct NsRecord {
    pub t: f64,
    pub u_l2: f64,
    pub u_h1: f64,
    pub grad_u_l2: f64,
    pub p_h1: f64,
}

pub const NS_CSV_HEADER: &str = "t,u_l2,u_h1,grad_u_l2,p_h1";

#[derive(Clone, Copy, Debug)]
pub struct NsOptions {
    pub dt: f64,
    /// Steps between stored samples.
    pub sample_every: usize,
    pub cfl_safety: f64,
}

impl Default for NsOptions {
    fn default() -> Self {
        NsOptions {
            dt: 1e-3,
            sample_every: 1,
            cfl_safety: 1.0,
        }
    }
}

/// Reference run summary statistics.
#[derive(Clone, Debug, Serialize)]
pub struct NsStats {
    /// `||u0 - P u0||` removed on intake.
    pub projection_removed: f64,
    pub steps: usize,
    pub dt: f64,
    /// Max over samples of `||div u|| / ||grad u||`.
    pub max_div_ratio: f64,
    /// Max over samples and components of `|mean(u)(t) - mean(u)(0)|`.
    pub mean_drift: f64,
    /// `| ||u||^2 + 2 int ||grad u||^2 - ||u0||^2 | / ||u0||^2`.
    pub energy_balance_error: f64,
}

/// Sampled reference trajectory with cubic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct NsTrajectory {
    pub samples: Vec<NsSample>,
    pub records: Vec<NsRecord>,
    pub stats: NsStats,
}

fn record(u: &Field, t: f64) -> Result<NsRecord> {
    Ok(NsRecord {
        t,
        u_l2: l2_norm(u),
        u_h1: h1_norm(u),
        grad_u_l2: grad_sq(u).sqrt(),
        p_h1: h1_norm(&pressure_from_velocity(u)?),
    })
}

/// `d/dt ||grad u||^2` from the velocity rate.
fn dissipation_rate(u: &Field, udot: &Field) -> f64 {
    let g = u.grid();
    let mut acc = 0.0;
    for c in 0..u.n_components() {
        for (idx, (a, b)) in u.component(c).iter().zip(udot.component(c)).enumerate() {
            acc += g.wavenumber_sq(idx) * (a.conj() * b).re;
        }
    }
    2.0 * acc
}

/// Runs the reference from `u0` (Leray-projected on intake) to `t_end`.
/// The step is shortened uniformly so that the run ends exactly at `t_end`.
pub fn run_ns(u0: &Field, t_end: f64, opts: &NsOptions) -> Result<NsTrajectory> {
    u0.expect_rank(Rank::Vector)?;
    if !(t_end >= 0.0) || !(opts.dt > 0.0) || opts.sample_every == 0 {
        return Err(Error::InvalidArgument(
            "run_ns needs t_end >= 0, dt > 0, sample_every >= 1".into(),
        ));
    }
    let (u, grad_part) = leray_project(u0)?;
    let steps = if t_end == 0.0 {
        0
    } else {
        (t_end / opts.dt - 1e-9).ceil().max(1.0) as usize
    };
    let dt = if steps == 0 { opts.dt } else { t_end / steps as f64 };
    let mean0 = u.means();
    let e0 = u.energy();
    let mut state = NsState::new(u, 0.0)?;
    let mut udot = velocity_rate(&state.u)?;
    let mut samples = vec![NsSample {
        t: 0.0,
        u: state.u.clone(),
        udot: udot.clone(),
    }];
    let mut records = vec![record(&state.u, 0.0)?];
    let mut max_div_ratio: f64 = 0.0;
    let mut mean_drift: f64 = 0.0;
    let mut dissipated = 0.0;
    let mut diss = grad_sq(&state.u);
    let mut diss_rate = dissipation_rate(&state.u, &udot);
    for step in 1..=steps {
        let t = if step == steps { t_end } else { step as f64 * dt };
        let mut next = ns_step(&state, dt, opts.cfl_safety)?;
        next.t = t;
        let next_udot = velocity_rate(&next.u)?;
        let next_diss = grad_sq(&next.u);
        let next_rate = dissipation_rate(&next.u, &next_udot);
        // endpoint-corrected trapezoid
        dissipated += dt / 2.0 * (diss + next_diss) + dt * dt / 12.0 * (diss_rate - next_rate);
        diss = next_diss;
        diss_rate = next_rate;
        state = next;
        udot = next_udot;
        if step % opts.sample_every == 0 || step == steps {
            let g = grad_sq(&state.u).sqrt();
            if g > 0.0 {
                max_div_ratio = max_div_ratio.max(l2_norm(&divergence(&state.u)?) / g);
            }
            for (m, m0) in state.u.means().iter().zip(&mean0) {
                mean_drift = mean_drift.max((m - m0).abs());
            }
            samples.push(NsSample {
                t: state.t,
                u: state.u.clone(),
                udot: udot.clone(),
            });
            records.push(record(&state.u, state.t)?);
        }
    }
    let balance = state.u.energy() + 2.0 * dissipated - e0;
    Ok(NsTrajectory {
        samples,
        records,
        stats: NsStats {
            projection_removed: l2_norm(&grad_part),
            steps,
            dt,
            max_div_ratio,
            mean_drift,
            energy_balance_error: if e0 > 0.0 { balance.abs() / e0 } else { balance.abs() },
        },
    })
}

/// Reference velocity and rate at an arbitrary time.
#[derive(Clone, Debug)]
pub struct Interpolated {
    pub u: Field,
    pub udot: Field,
    /// `||hermite - linear||`, a conservative bound on the interpolation error.
    pub error_bound: f64,
}

impl NsTrajectory {
    pub fn t_start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn final_state(&self) -> NsState {
        let s = self.samples.last().expect("trajectory has a sample");
        NsState { u: s.u.clone(), t: s.t }
    }

    /// Cubic Hermite interpolation from stored velocities and rates.
    pub fn at(&self, t: f64) -> Result<Interpolated> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-12 * t1.abs().max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::TimeWindow { t, start: t0, end: t1 });
        }
        let t = t.clamp(t0, t1);
        let i = match self.samples.binary_search_by(|s| s.t.total_cmp(&t)) {
            Ok(i) => {
                let s = &self.samples[i];
                return Ok(Interpolated {
                    u: s.u.clone(),
                    udot: s.udot.clone(),
                    error_bound: 0.0,
                });
            }
            Err(i) => i - 1,
        };
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let mut u = a.u.scale(h00);
        u.axpy_in_place(h10 * h, &a.udot)?;
        u.axpy_in_place(h01, &b.u)?;
        u.axpy_in_place(h11 * h, &b.udot)?;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let mut udot = a.u.scale(d00);
        udot.axpy_in_place(d10, &a.udot)?;
        udot.axpy_in_place(d01, &b.u)?;
        udot.axpy_in_place(d11, &b.udot)?;
        let mut linear = a.u.scale(1.0 - s);
        linear.axpy_in_place(s, &b.u)?;
        let error_bound = l2_norm(&u.sub(&linear)?);
        Ok(Interpolated { u, udot, error_bound })
    }

    /// SHA-256 over sample times and coefficients; identifies the trajectory.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update(s.t.to_le_bytes());
            for c in s.u.coeffs() {
                h.update(c.re.to_le_bytes());
                h.update(c.im.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{NS_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", r.t, r.u_l2, r.u_h1, r.grad_u_l2, r.p_h1)?;
        }
        Ok(())
    }
}
