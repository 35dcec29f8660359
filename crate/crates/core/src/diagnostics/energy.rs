//! Residual energies, vorticity energies and the norm table.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::residuals::{residuals_with_rates, InitialLayer, ReferenceSample};
use super::vorticity::vorticity_rate;
use crate::error::Result;
use crate::relax::state::Rates;
use crate::relax::{RelaxParams, RelaxState};
use crate::spectral::norms::{grad_sq, h1_norm, h1_sq, hess_sq, l2_norm, l2_sq};
use crate::spectral::ops::{curl, divergence};
use crate::spectral::Field;

/// Exponent `a` of the higher-order weight `(eps + delta)^a` in the
/// small-perturbation energies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyOptions {
    #[serde(default)]
    pub exponent: f64,
}

/// Norms of the velocity error, the divergence and the pressure error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub v_l2: f64,
    pub v_h1: f64,
    pub curl_v_l2: f64,
    pub curl_v_h1: f64,
    pub div_l2: f64,
    pub div_h1: f64,
    /// `sqrt(eps) ||p - p_ref||_{H^1}`.
    pub p_h1_scaled: f64,
    /// `||p - p_ref||_{H^1}`.
    pub p_h1: f64,
}

/// Every energy functional at one sample time. `g_2d` is absent in 3D.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub e_thm21: f64,
    pub e_cor22: f64,
    pub e_thm23: f64,
    pub fbar: f64,
    pub f: f64,
    pub e_boot: f64,
    pub e_inhomo: f64,
    pub g_2d: Option<f64>,
    #[serde(flatten)]
    pub norms: NormTable,
    pub interp_error: f64,
}

pub const ENERGY_CSV_HEADER: &str = "t,e_thm21,e_cor22,e_thm23,fbar,f,e_boot,e_inhomo,g_2d,\
v_l2,v_h1,curl_v_l2,curl_v_h1,div_l2,div_h1,p_h1_scaled,p_h1,interp_error";

impl EnergyRecord {
    /// Named values in CSV column order (`g_2d` as NaN when absent).
    pub fn columns(&self) -> [(&'static str, f64); 17] {
        let n = &self.norms;
        [
            ("e_thm21", self.e_thm21),
            ("e_cor22", self.e_cor22),
            ("e_thm23", self.e_thm23),
            ("fbar", self.fbar),
            ("f", self.f),
            ("e_boot", self.e_boot),
            ("e_inhomo", self.e_inhomo),
            ("g_2d", self.g_2d.unwrap_or(f64::NAN)),
            ("v_l2", n.v_l2),
            ("v_h1", n.v_h1),
            ("curl_v_l2", n.curl_v_l2),
            ("curl_v_h1", n.curl_v_h1),
            ("div_l2", n.div_l2),
            ("div_h1", n.div_h1),
            ("p_h1_scaled", n.p_h1_scaled),
            ("p_h1", n.p_h1),
            ("interp_error", self.interp_error),
        ]
    }

    pub fn is_valid(&self) -> bool {
        self.columns()
            .iter()
            .all(|&(name, x)| (name == "g_2d" && self.g_2d.is_none()) || (x.is_finite() && x >= 0.0))
    }
}

fn sum(parts: &[&Field], f: impl Fn(&Field) -> f64) -> f64 {
    parts.iter().map(|p| f(p)).sum()
}

/// `||w + dw||^2 + ||dw||^2 + 2 delta ||grad omega||^2` with `dw = delta d omega/dt`
/// and `w` either the vorticity or its difference from the reference vorticity.
fn vorticity_energy(w: &Field, omega: &Field, delta_rate: &Field, delta: f64) -> Result<f64> {
    Ok(l2_sq(&w.add(delta_rate)?) + l2_sq(delta_rate) + 2.0 * delta * grad_sq(omega))
}

/// Vorticity energy of the relaxation state.
pub fn energy_fbar(relax: &RelaxState, params: &RelaxParams) -> Result<f64> {
    let omega = curl(&relax.u)?;
    let dw = vorticity_rate(&relax.stress)?.scale(params.delta);
    vorticity_energy(&omega, &omega, &dw, params.delta)
}

/// Modulated vorticity energy relative to the reference.
pub fn energy_f(relax: &RelaxState, reference: &ReferenceSample, params: &RelaxParams) -> Result<f64> {
    let omega = curl(&relax.u)?;
    let diff = omega.sub(&curl(&reference.u)?)?;
    let dw = vorticity_rate(&relax.stress)?.scale(params.delta);
    vorticity_energy(&diff, &omega, &dw, params.delta)
}

/// All energies of `relax` against `reference`, with time derivatives taken
/// from the right-hand sides.
pub fn bootstrap_energies(
    relax: &RelaxState,
    reference: &ReferenceSample,
    params: &RelaxParams,
    layer: &InitialLayer,
    opts: &EnergyOptions,
) -> Result<EnergyRecord> {
    let rates = relax.rates(params)?;
    energies_with_rates(relax, &rates, reference, params, layer, opts)
}

pub fn energies_with_rates(
    relax: &RelaxState,
    rates: &Rates,
    reference: &ReferenceSample,
    params: &RelaxParams,
    layer: &InitialLayer,
    opts: &EnergyOptions,
) -> Result<EnergyRecord> {
    let (eps, delta) = (params.epsilon, params.delta);
    let r = residuals_with_rates(relax, rates, reference, params, layer)?;
    let w = [&r.q, &r.v, &r.stress];
    let small = eps + delta;
    let hess = sum(&w, hess_sq);
    let l2 = sum(&w, l2_sq);
    let h1 = sum(&w, h1_sq);
    let e_thm21 = h1 + small.powf(opts.exponent) * hess;
    let e_cor22 = l2 + small.powf(opts.exponent) * hess;
    let e_thm23 = h1 + small.powf(2.0 * opts.exponent + 2.0) * hess;

    // rates of (u, sqrt(eps) p, sqrt(delta) U)
    let dp = rates.dp.scale(eps.sqrt());
    let ds = rates.dstress.scale(delta.sqrt());
    let u1 = r.rate_corrected.scale(delta.sqrt());
    let first_corrected = l2_sq(&rates.du) + l2_sq(&dp) + l2_sq(&u1);
    let first = l2_sq(&rates.du) + l2_sq(&dp) + l2_sq(&ds);
    let grads = grad_sq(&rates.du) + grad_sq(&dp) + grad_sq(&ds);
    let w1 = l2_sq(&r.q) + l2_sq(&r.v) + l2_sq(&r.stress_corrected);
    let e_boot = w1 + delta * delta * first_corrected + delta.powi(3) * grads;
    let e_inhomo = first_corrected + delta * grads;
    let g_2d = (relax.u.dim() == 2).then_some(first + delta * grads);

    let omega = curl(&relax.u)?;
    let dw = vorticity_rate(&relax.stress)?.scale(delta);
    let fbar = vorticity_energy(&omega, &omega, &dw, delta)?;
    let curl_v = omega.sub(&curl(&reference.u)?)?;
    let f = vorticity_energy(&curl_v, &omega, &dw, delta)?;

    let div = divergence(&relax.u)?;
    let p_err = relax.p.sub(&reference.p)?;
    let norms = NormTable {
        v_l2: l2_norm(&r.v),
        v_h1: h1_norm(&r.v),
        curl_v_l2: l2_norm(&curl_v),
        curl_v_h1: h1_norm(&curl_v),
        div_l2: l2_norm(&div),
        div_h1: h1_norm(&div),
        p_h1_scaled: h1_norm(&r.q),
        p_h1: h1_norm(&p_err),
    };
    Ok(EnergyRecord {
        t: relax.t,
        e_thm21,
        e_cor22,
        e_thm23,
        fbar,
        f,
        e_boot,
        e_inhomo,
        g_2d,
        norms,
        interp_error: r.interp_error,
    })
}

pub fn write_energy_csv(records: &[EnergyRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{ENERGY_CSV_HEADER}")?;
    for r in records {
        let mut line = format!("{:e}", r.t);
        for (_, x) in r.columns() {
            line.push_str(&format!(",{x:e}"));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Max, mean and final value of one functional over a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub max: f64,
    pub mean: f64,
    #[serde(rename = "final")]
    pub last: f64,
}

impl SeriesSummary {
    pub fn of(values: &[f64]) -> Option<SeriesSummary> {
        let last = *values.last()?;
        Some(SeriesSummary {
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            last,
        })
    }
}

/// Per-functional summary keyed by CSV column name; absent columns skipped.
pub fn summarize(records: &[EnergyRecord]) -> BTreeMap<String, SeriesSummary> {
    let mut out = BTreeMap::new();
    let Some(first) = records.first() else {
        return out;
    };
    for (c, (name, _)) in first.columns().iter().enumerate() {
        let values: Vec<f64> = records
            .iter()
            .map(|r| r.columns()[c].1)
            .filter(|x| x.is_finite())
            .collect();
        if let Some(s) = SeriesSummary::of(&values) {
            out.insert(name.to_string(), s);
        }
    }
    out
}
