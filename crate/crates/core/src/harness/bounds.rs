//! Ratios of measured error norms to the parameter scalings of the proven
//! bounds, and the trend-flatness test across a ladder.

use serde::{Deserialize, Serialize};

use crate::diagnostics::EnergyRecord;
use crate::error::Result;
use crate::initial_data::Theorem;
use crate::relax::{RelaxParams, RelaxState};
use crate::spectral::norms::{h1_sq, l2_sq};
use crate::spectral::ops::curl;

/// Default trend-flatness factor.
pub const TREND_FACTOR: f64 = 3.0;

/// Names of the bounds monitored for `theorem`, in report order.
pub fn bound_names(theorem: Theorem) -> &'static [&'static str] {
    match theorem {
        Theorem::Thm21 => &["velocity_h1"],
        Theorem::Cor22 => &["velocity_l2"],
        Theorem::Thm23 => &["velocity_pressure_h1"],
        Theorem::Thm25 | Theorem::Thm26 => &["velocity_l2", "curl", "div"],
        Theorem::Thm27TwoD => &["velocity_l2", "curl_u", "div"],
    }
}

/// Measured value over scaling for every bound of `theorem` at one sample.
pub fn bound_ratios(
    theorem: Theorem,
    params: &RelaxParams,
    state: &RelaxState,
    record: &EnergyRecord,
) -> Result<Vec<f64>> {
    let (eps, delta) = (params.epsilon, params.delta);
    let s = eps + delta;
    let n = &record.norms;
    let sq = |x: f64| x * x;
    let curl_v = sq(n.curl_v_l2) + delta * sq(n.curl_v_h1);
    let div = sq(n.div_l2) + delta * sq(n.div_h1);
    Ok(match theorem {
        Theorem::Thm21 => vec![sq(n.v_h1) / s],
        Theorem::Cor22 => vec![sq(n.v_l2) / s],
        Theorem::Thm23 => vec![(n.v_h1 + n.p_h1_scaled) / s],
        Theorem::Thm25 => vec![
            sq(n.v_l2) / delta.powf(1.5),
            curl_v / delta.sqrt(),
            div / (eps / delta.sqrt()),
        ],
        Theorem::Thm26 => vec![
            sq(n.v_l2) / delta.sqrt(),
            curl_v / delta.sqrt(),
            div / (eps / delta.sqrt()),
        ],
        Theorem::Thm27TwoD => {
            let w = curl(&state.u)?;
            vec![sq(n.v_l2) / delta, l2_sq(&w) + delta * h1_sq(&w), div / (eps / delta)]
        }
    })
}

/// Bound-ratio time series of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundMonitor {
    pub names: Vec<String>,
    pub t: Vec<f64>,
    /// `series[i][k]`: bound `i` at sample `k`.
    pub series: Vec<Vec<f64>>,
}

impl BoundMonitor {
    pub fn new(theorem: Theorem) -> BoundMonitor {
        let names: Vec<String> = bound_names(theorem).iter().map(|s| s.to_string()).collect();
        BoundMonitor {
            series: vec![Vec::new(); names.len()],
            names,
            t: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, ratios: &[f64]) {
        self.t.push(t);
        for (s, &r) in self.series.iter_mut().zip(ratios) {
            s.push(r);
        }
    }

    /// Sup over samples of each bound (NaN if any sample is non-finite).
    pub fn sup(&self) -> Vec<f64> {
        self.series
            .iter()
            .map(|s| {
                if s.iter().all(|x| x.is_finite()) {
                    s.iter().copied().fold(0.0, f64::max)
                } else {
                    f64::NAN
                }
            })
            .collect()
    }
}

/// Bound-ratio series for a stored run.
pub fn monitor_bounds(
    theorem: Theorem,
    params: &RelaxParams,
    samples: &[(RelaxState, EnergyRecord)],
) -> Result<BoundMonitor> {
    let mut m = BoundMonitor::new(theorem);
    for (state, record) in samples {
        m.push(record.t, &bound_ratios(theorem, params, state, record)?);
    }
    Ok(m)
}

/// Sup ratios of one bound across a ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTrend {
    pub name: String,
    /// `(delta, sup ratio)` for each valid ladder point, in ladder order.
    pub sups: Vec<(f64, f64)>,
    /// Sup ratio at the smallest delta over that at the largest.
    pub growth: f64,
    pub factor: f64,
    pub flat: bool,
}

/// "No growth trend": the sup ratio at the smallest delta is at most
/// `factor` times the one at the largest delta.
pub fn trend_flatness(name: &str, sups: &[(f64, f64)], factor: f64) -> BoundTrend {
    let largest = sups.iter().copied().max_by(|a, b| a.0.total_cmp(&b.0));
    let smallest = sups.iter().copied().min_by(|a, b| a.0.total_cmp(&b.0));
    let (growth, flat) = match (largest, smallest) {
        (Some((_, hi)), Some((_, lo))) if hi.is_finite() && lo.is_finite() => {
            if lo == 0.0 {
                (0.0, true)
            } else if hi == 0.0 {
                (f64::INFINITY, false)
            } else {
                (lo / hi, lo <= factor * hi)
            }
        }
        _ => (f64::NAN, false),
    };
    BoundTrend {
        name: name.to_string(),
        sups: sups.to_vec(),
        growth,
        factor,
        flat,
    }
}
