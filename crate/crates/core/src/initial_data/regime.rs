//! Initial data saturating the hypotheses of a targeted convergence result,
//! with a certificate of every hypothesis norm against its allowed bound.
//!
//! Perturbations of the base velocity are single modes: a solenoidal mode at
//! `kp` and, where the divergence budget is a separate hypothesis, a gradient
//! mode at `kg`. Amplitudes start from the nominal scalings and are then
//! rescaled jointly so that the largest primary (perturbation) ratio is one.
//! Hypotheses on the pressure and stress use constants derived from the base
//! flow with headroom two, plus the leading perturbation coefficient.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::preset::{Preparation, RegimePreset, Theorem};
use super::{oriented_mode, Orientation, PerturbationKind};
use crate::error::{Error, Result};
use crate::ns::{pressure_from_velocity, stress_tensor};
use crate::relax::{RelaxParams, RelaxState};
use crate::spectral::norms::{grad_sq, h1_sq, hess_sq, l2_norm, l2_sq, linf_norm, sobolev_sq};
use crate::spectral::ops::{curl, divergence};
use crate::spectral::random::band_limited;
use crate::spectral::{Field, Grid, Rank};

/// Roundoff slack when checking ratios against one.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// `2 pi`, the derivative factor of a unit wavenumber.
const K1: f64 = 2.0 * PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub name: String,
    pub measured: f64,
    /// Constant times the parameter scaling.
    pub bound: f64,
    pub ratio: f64,
    /// Part of the saturated perturbation budget.
    pub primary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub theorem: Theorem,
    pub preparation: Preparation,
    pub seed: u64,
    pub delta: f64,
    pub epsilon: f64,
    /// Solenoidal wavenumber, `max(1, round(delta^-1/2))` for high-frequency presets.
    pub kp: usize,
    /// Gradient wavenumber (0 when no gradient part is used).
    pub kg: usize,
    pub amplitude_solenoidal: f64,
    pub amplitude_gradient: f64,
    pub amplitude_pressure: f64,
    pub amplitude_stress: f64,
    pub perturbation_l2: f64,
    pub perturbation_linf: f64,
    pub entries: Vec<CertificateEntry>,
    pub max_ratio: f64,
    /// Largest primary ratio.
    pub saturation: f64,
}

impl Certificate {
    pub fn entry(&self, name: &str) -> Option<&CertificateEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

struct Limit {
    u: Field,
    p: Field,
    stress: Field,
}

struct Data {
    u: Field,
    p: Field,
    stress: Field,
    v: Field,
}

struct Hyp {
    name: &'static str,
    primary: bool,
    measured: f64,
    bound: f64,
}

fn hyp(name: &'static str, primary: bool, measured: f64, constant: f64, scaling: f64) -> Hyp {
    Hyp {
        name,
        primary,
        measured,
        bound: constant * scaling,
    }
}

fn div_sq(u: &Field) -> Result<(f64, f64)> {
    let d = divergence(u)?;
    Ok((l2_sq(&d), h1_sq(&d)))
}

fn curl_sq(u: &Field) -> Result<(f64, f64)> {
    let c = curl(u)?;
    Ok((l2_sq(&c), h1_sq(&c)))
}

/// Hypotheses of each result evaluated on `x`; constants from the limit data.
fn hypotheses(th: Theorem, params: &RelaxParams, a: f64, x: &Data, base: &Limit) -> Result<Vec<Hyp>> {
    let (eps, delta) = (params.epsilon, params.delta);
    let s = eps + delta;
    let k2 = K1 * K1;
    let h2 = |f: &Field| sobolev_sq(f, 2);
    let mut out = Vec::new();
    match th {
        Theorem::Thm21 | Theorem::Cor22 => {
            let (low_v, low_p, low_u, low_p0, low_u0, name_v, name_ps, pert) = if th == Theorem::Thm21 {
                (
                    h1_sq(&x.v),
                    h1_sq(&x.p),
                    h1_sq(&x.stress),
                    h1_sq(&base.p),
                    h1_sq(&base.stress),
                    "velocity_h1",
                    "pressure_stress_h1",
                    1.0 + k2,
                )
            } else {
                (
                    l2_sq(&x.v),
                    l2_sq(&x.p),
                    l2_sq(&x.stress),
                    l2_sq(&base.p),
                    l2_sq(&base.stress),
                    "velocity_l2",
                    "pressure_stress_l2",
                    1.0,
                )
            };
            let c1 = pert + k2 * k2;
            out.push(hyp(name_v, true, low_v + s.powf(a) * hess_sq(&x.v), c1, s));
            let b = low_p0 + low_u0 + hess_sq(&base.p) + hess_sq(&base.stress);
            let c2 = 2.0 * (b + k2 * c1);
            let m = low_p + low_u + s.powf(a) * (hess_sq(&x.p) + hess_sq(&x.stress));
            out.push(hyp(name_ps, false, m, c2, 1.0));
        }
        Theorem::Thm23 => {
            out.push(hyp("scaling", false, delta, 1.0, eps.sqrt()));
            let dp = x.p.sub(&base.p)?;
            let du = x.stress.sub(&base.stress)?;
            let m = h1_sq(&x.v).sqrt() + eps.sqrt() * h1_sq(&dp).sqrt() + delta.sqrt() * h1_sq(&du).sqrt();
            out.push(hyp("initial_error", true, m, 2.0 * (1.0 + k2).sqrt(), s));
            let grad_div = |f: &Field| -> Result<f64> { Ok(grad_sq(&divergence(f)?).sqrt()) };
            let m = grad_div(&x.u)? + delta * (hess_sq(&x.p).sqrt() + grad_div(&x.stress)?);
            let b = hess_sq(&base.p).sqrt() + grad_div(&base.stress)?;
            out.push(hyp("divergence_gradient", false, m, 2.0 * (b + K1.powi(3)), s));
            let m = hess_sq(&x.u).sqrt() + eps.sqrt() * hess_sq(&x.p).sqrt() + delta.sqrt() * hess_sq(&x.stress).sqrt();
            let b = hess_sq(&base.u).sqrt() + hess_sq(&base.p).sqrt() + hess_sq(&base.stress).sqrt();
            out.push(hyp(
                "second_derivatives",
                false,
                m,
                2.0 * (b + k2 + K1.powi(3)),
                s.powf(-a),
            ));
        }
        Theorem::Thm25 | Theorem::Thm26 => {
            let l2_scaling = if th == Theorem::Thm25 {
                delta.powf(1.5)
            } else {
                delta.sqrt()
            };
            if th == Theorem::Thm25 {
                out.push(hyp("scaling", false, eps, 1.0, delta * delta));
            }
            out.push(hyp("velocity_l2", true, l2_sq(&x.v), 1.0, l2_scaling));
            let (c_l2, c_h1) = curl_sq(&x.v)?;
            out.push(hyp("curl_l2", true, c_l2, k2, delta.sqrt()));
            out.push(hyp("curl_h1", true, delta * c_h1, k2 * (1.0 + k2), delta.sqrt()));
            let (d_l2, d_h1) = div_sq(&x.u)?;
            let div_scaling = eps / delta.sqrt();
            out.push(hyp("div_l2", true, d_l2, 1.0, div_scaling));
            out.push(hyp("div_h1", true, delta * d_h1, 1.0 + k2, div_scaling));
            let b = h1_sq(&base.p) + h2(&base.p)?;
            out.push(hyp(
                "pressure",
                false,
                h1_sq(&x.p) + delta * h2(&x.p)?,
                2.0 * b,
                delta.powf(-0.5),
            ));
            let b = h1_sq(&base.stress) + h1_sq(&divergence(&base.stress)?);
            let m = h1_sq(&x.stress) + delta * h1_sq(&divergence(&x.stress)?);
            let c = 2.0 * (b + k2 * (1.0 + k2) + k2 * k2 * k2);
            out.push(hyp("stress", false, m, c, delta.powf(-0.5)));
        }
        Theorem::Thm27TwoD => {
            out.push(hyp("velocity_l2", true, l2_sq(&x.v), 2.0, delta));
            let (c_l2, c_h1) = curl_sq(&x.u)?;
            let (b_l2, b_h1) = curl_sq(&base.u)?;
            let c = 2.0 * (b_l2 + b_h1 + 2.0 * k2 * (1.0 + k2));
            out.push(hyp("curl", false, c_l2 + delta * c_h1, c, 1.0));
            let (d_l2, d_h1) = div_sq(&x.u)?;
            out.push(hyp("div_l2", true, d_l2, 2.0, eps / delta));
            out.push(hyp("div_h1", true, delta * d_h1, 2.0 * (1.0 + k2), eps / delta));
            let b = l2_sq(&base.p) + h1_sq(&base.p) + h2(&base.p)?;
            let m = eps * l2_sq(&x.p) + delta * delta * h1_sq(&x.p) + delta.powi(3) * h2(&x.p)?;
            out.push(hyp("pressure", false, m, 2.0 * b, delta));
            let b = l2_sq(&base.stress) + h1_sq(&base.stress) + h1_sq(&divergence(&base.stress)?);
            let m = l2_sq(&x.stress) + delta * h1_sq(&x.stress) + delta * delta * h1_sq(&divergence(&x.stress)?);
            let c = 2.0 * (b + 2.0 * k2 * (1.0 + k2) + 2.0 * k2 * k2 * k2);
            out.push(hyp("stress", false, m, c, 1.0));
        }
    }
    Ok(out)
}

fn ratio(h: &Hyp) -> f64 {
    if h.bound > 0.0 {
        h.measured / h.bound
    } else if h.measured == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn max_primary(hs: &[Hyp]) -> f64 {
    hs.iter().filter(|h| h.primary).map(ratio).fold(0.0, f64::max)
}

/// Wavenumbers and nominal amplitudes `(kp, alpha, kg, alpha_g)`.
fn nominal(th: Theorem, params: &RelaxParams) -> (usize, f64, usize, f64) {
    let (eps, delta) = (params.epsilon, params.delta);
    let s = eps + delta;
    let high = (delta.powf(-0.5).round() as usize).max(1);
    let kk = |k: usize| K1 * k as f64;
    match th {
        Theorem::Thm21 | Theorem::Cor22 => (1, s.sqrt(), 0, 0.0),
        Theorem::Thm23 => (1, s, 0, 0.0),
        Theorem::Thm25 => (high, delta.powf(0.75), high, (eps / delta.sqrt()).sqrt() / kk(high)),
        Theorem::Thm26 => (1, delta.powf(0.25), 1, (eps / delta.sqrt()).sqrt() / kk(1)),
        Theorem::Thm27TwoD => (high, (2.0 * delta).sqrt(), high, (2.0 * eps / delta).sqrt() / kk(high)),
    }
}

fn orientations(dim: usize, seed: u64) -> (Orientation, Orientation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = rng.gen_range(0..dim);
    let polarization = (axis + rng.gen_range(1..dim)) % dim;
    fn sign(rng: &mut ChaCha8Rng) -> i8 {
        if rng.gen_bool(0.5) {
            1
        } else {
            -1
        }
    }
    let sol = Orientation {
        axis,
        polarization,
        sign: sign(&mut rng),
    };
    let g_axis = rng.gen_range(0..dim);
    let grad = Orientation {
        axis: g_axis,
        polarization: g_axis,
        sign: sign(&mut rng),
    };
    (sol, grad)
}

struct Builder<'a> {
    th: Theorem,
    params: RelaxParams,
    a: f64,
    base: &'a Limit,
    sol: Field,
    grad: Field,
}

impl Builder<'_> {
    fn assemble(&self, sigma: f64, extra_p: Option<&Field>, extra_u: Option<&Field>) -> Result<Data> {
        let mut v = self.sol.scale(sigma);
        v.axpy_in_place(sigma, &self.grad)?;
        let u = self.base.u.add(&v)?;
        let mut p = pressure_from_velocity(&u)?;
        let mut stress = stress_tensor(&u)?;
        if let Some(e) = extra_p {
            p.axpy_in_place(1.0, e)?;
        }
        if let Some(e) = extra_u {
            stress.axpy_in_place(1.0, e)?;
        }
        Ok(Data { u, p, stress, v })
    }

    fn check(&self, x: &Data) -> Result<Vec<Hyp>> {
        hypotheses(self.th, &self.params, self.a, x, self.base)
    }

    /// Scale factor giving the largest primary ratio `target`.
    fn saturate(&self, target: f64) -> Result<f64> {
        let power = if self.th == Theorem::Thm23 { 1.0 } else { 2.0 };
        let mut sigma = 1.0;
        for _ in 0..8 {
            let r = max_primary(&self.check(&self.assemble(sigma, None, None)?)?);
            if r == 0.0 {
                return Ok(sigma);
            }
            if (r / target - 1.0).abs() < 1e-13 {
                break;
            }
            sigma *= (target / r).powf(1.0 / power);
        }
        Ok(sigma)
    }
}

fn unit(f: Field) -> Field {
    let n = l2_norm(&f);
    if n > 0.0 {
        f.scale(1.0 / n)
    } else {
        f
    }
}

/// Builds initial data for `preset` around the divergence-free `base`.
pub fn build_regime(preset: &RegimePreset, base: &Field) -> Result<(RelaxState, Certificate)> {
    preset.validate()?;
    base.expect_rank(Rank::Vector)?;
    let grid: Arc<Grid> = base.grid().clone();
    let th = preset.theorem;
    if let Some(d) = th.dimension() {
        if grid.dim() != d {
            return Err(Error::Config(format!(
                "{} needs a {d}D grid, got {}D",
                th.name(),
                grid.dim()
            )));
        }
    }
    let div0 = l2_norm(&divergence(base)?);
    if div0 > 1e-10 * grad_sq(base).sqrt().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "base flow is not divergence-free (||div|| = {div0:e})"
        )));
    }
    let params = preset.params()?;
    let (kp, alpha0, kg, alpha_g0) = nominal(th, &params);
    if kp.max(kg) > grid.dealias_cutoff() {
        let need = 3 * kp.max(kg) + 1;
        return Err(Error::Config(format!(
            "{} at delta = {} needs wavenumber {} but n = {} resolves at most {}; use n >= {}",
            th.name(),
            preset.delta,
            kp.max(kg),
            grid.n(),
            grid.dealias_cutoff(),
            need + need % 2
        )));
    }
    let limit = Limit {
        u: base.clone(),
        p: pressure_from_velocity(base)?,
        stress: stress_tensor(base)?,
    };
    let (o_sol, o_grad) = orientations(grid.dim(), preset.seed);
    let scale = preset.amplitude_scale;
    let sol = oriented_mode(&grid, alpha0 * scale, kp, PerturbationKind::Solenoidal, o_sol)?;
    let grad = if kg > 0 {
        oriented_mode(&grid, alpha_g0 * scale, kg, PerturbationKind::Gradient, o_grad)?
    } else {
        Field::zeros(&grid, Rank::Vector)
    };
    let b = Builder {
        th,
        params,
        a: preset.exponent(),
        base: &limit,
        sol,
        grad,
    };
    let ill = preset.preparation == Preparation::IllPrepared;
    let sigma = if scale == 0.0 {
        0.0
    } else if th == Theorem::Thm23 && ill {
        b.saturate(1.0 / 3.0)? * scale
    } else {
        b.saturate(1.0)? * scale
    };

    let (mut extra_p, mut extra_u) = (None, None);
    if ill && scale > 0.0 {
        let kmax = grid.dealias_cutoff().min(kp.max(2));
        let phi = unit(band_limited(&grid, Rank::Scalar, kmax, 1.0, preset.seed ^ 0x9e37_79b9));
        let tau = unit(band_limited(&grid, Rank::Tensor, kmax, 1.0, preset.seed ^ 0x7f4a_7c15));
        let well = b.assemble(sigma, None, None)?;
        let (bp, bu) = if th == Theorem::Thm23 {
            // each of the three error terms gets a third of the budget
            let budget = b.check(&well)?.iter().find(|h| h.primary).map_or(0.0, |h| h.bound) / 3.0;
            (
                scale * budget / (params.epsilon.sqrt() * h1_sq(&phi).sqrt()),
                scale * budget / (params.delta.sqrt() * h1_sq(&tau).sqrt()),
            )
        } else {
            let hs = b.check(&well)?;
            let zero_v = Field::zeros(&grid, Rank::Vector);
            let probe = |p: Field, u: Field| -> Result<Vec<Hyp>> {
                b.check(&Data {
                    u: zero_v.clone(),
                    p,
                    stress: u,
                    v: zero_v.clone(),
                })
            };
            let pure_p = probe(phi.clone(), Field::zeros(&grid, Rank::Tensor))?;
            let pure_u = probe(Field::zeros(&grid, Rank::Scalar), tau.clone())?;
            let amp = |pure: &[Hyp]| -> f64 {
                // quarter of the remaining budget of every hypothesis the probe touches
                hs.iter()
                    .zip(pure)
                    .filter(|(_, q)| !q.primary && q.name != "scaling" && q.measured > 0.0)
                    .map(|(h, q)| ((h.bound - h.measured).max(0.0) / 4.0 / q.measured).sqrt())
                    .fold(f64::INFINITY, f64::min)
            };
            let (ap, au) = (amp(&pure_p), amp(&pure_u));
            (
                scale * if ap.is_finite() { ap } else { 0.0 },
                scale * if au.is_finite() { au } else { 0.0 },
            )
        };
        extra_p = Some((phi, bp));
        extra_u = Some((tau, bu));
    }

    let mut shrink = 1.0;
    for _ in 0..40 {
        let ep = extra_p.as_ref().map(|(f, a)| f.scale(a * shrink));
        let eu = extra_u.as_ref().map(|(f, a)| f.scale(a * shrink));
        let data = b.assemble(sigma, ep.as_ref(), eu.as_ref())?;
        let hs = b.check(&data)?;
        let worst = hs.iter().map(ratio).fold(0.0, f64::max);
        if worst <= 1.0 + CERTIFICATE_TOL {
            let entries: Vec<CertificateEntry> = hs
                .iter()
                .map(|h| CertificateEntry {
                    name: h.name.to_string(),
                    measured: h.measured,
                    bound: h.bound,
                    ratio: ratio(h),
                    primary: h.primary,
                })
                .collect();
            let cert = Certificate {
                theorem: th,
                preparation: preset.preparation,
                seed: preset.seed,
                delta: params.delta,
                epsilon: params.epsilon,
                kp,
                kg,
                amplitude_solenoidal: alpha0 * scale * sigma,
                amplitude_gradient: if kg > 0 { alpha_g0 * scale * sigma } else { 0.0 },
                amplitude_pressure: extra_p.as_ref().map_or(0.0, |(_, a)| a * shrink),
                amplitude_stress: extra_u.as_ref().map_or(0.0, |(_, a)| a * shrink),
                perturbation_l2: l2_norm(&data.v),
                perturbation_linf: linf_norm(&data.v),
                max_ratio: worst,
                saturation: max_primary(&hs),
                entries,
            };
            let state = RelaxState::new(data.p, data.u, data.stress, 0.0)?;
            return Ok((state, cert));
        }
        if extra_p.is_none() || max_primary(&hs) > 1.0 + CERTIFICATE_TOL {
            let bad: Vec<String> = hs
                .iter()
                .filter(|h| ratio(h) > 1.0 + CERTIFICATE_TOL)
                .map(|h| format!("{} ratio {:.4}", h.name, ratio(h)))
                .collect();
            return Err(Error::Certificate(format!(
                "{} data at delta = {} violates: {}",
                th.name(),
                preset.delta,
                bad.join(", ")
            )));
        }
        shrink *= 0.5;
    }
    Err(Error::Certificate(format!(
        "{}: could not fit the ill-prepared perturbation into the hypotheses",
        th.name()
    )))
}
