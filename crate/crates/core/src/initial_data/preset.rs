//! Regime presets: which convergence result the data targets and at which
//! parameter point.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::taylor_green;
use crate::error::{Error, Result};
use crate::relax::{RelaxParams, ScalingLaw};
use crate::spectral::{Field, Grid};

/// Targeted convergence result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// `H^1` convergence for small perturbations.
    #[serde(rename = "thm21")]
    Thm21,
    /// `L^2` variant of the small-perturbation result.
    #[serde(rename = "cor22")]
    Cor22,
    /// Pressure convergence, `delta <= sqrt(eps)`.
    #[serde(rename = "thm23")]
    Thm23,
    /// 3D order-one perturbations, `eps = delta^2`.
    #[serde(rename = "thm25")]
    Thm25,
    /// 3D order-one perturbations, `eps = mu delta`.
    #[serde(rename = "thm26")]
    Thm26,
    /// 2D order-one perturbations, `eps = mu delta`.
    #[serde(rename = "thm27_2d")]
    Thm27TwoD,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Theorem::Thm21 => "thm21",
            Theorem::Cor22 => "cor22",
            Theorem::Thm23 => "thm23",
            Theorem::Thm25 => "thm25",
            Theorem::Thm26 => "thm26",
            Theorem::Thm27TwoD => "thm27_2d",
        }
    }

    /// Admissible range of the exponent `a`, for the results that have one.
    fn exponent_range(self) -> Option<(f64, f64)> {
        match self {
            Theorem::Thm21 => Some((0.0, 2.0)),
            Theorem::Cor22 => Some((0.0, 4.0 / 3.0)),
            Theorem::Thm23 => Some((0.0, 1.0)),
            _ => None,
        }
    }

    /// Required grid dimension, if any.
    pub fn dimension(self) -> Option<usize> {
        match self {
            Theorem::Thm25 | Theorem::Thm26 => Some(3),
            Theorem::Thm27TwoD => Some(2),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preparation {
    /// `U_0 = u_0 ⊗ u_0 - grad u_0`, `p_0` balancing the flux.
    #[default]
    WellPrepared,
    /// Well-prepared data plus bounded pressure and stress perturbations.
    IllPrepared,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum BaseFlow {
    TaylorGreen { amplitude: f64 },
}

impl Default for BaseFlow {
    fn default() -> Self {
        BaseFlow::TaylorGreen { amplitude: 1.0 }
    }
}

impl BaseFlow {
    pub fn build(&self, grid: &Arc<Grid>) -> Field {
        match *self {
            BaseFlow::TaylorGreen { amplitude } => taylor_green(grid, amplitude),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Preset file contents. `epsilon` is derived from `delta` via the scaling law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimePreset {
    pub theorem: Theorem,
    pub delta: f64,
    /// Exponent `a` of thm21, cor22 and thm23 (default 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Ratio `eps / delta` of thm26 and thm27_2d.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Overrides the default `eps = delta` of thm21, cor22 and thm23.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling_law: Option<ScalingLaw>,
    #[serde(default)]
    pub preparation: Preparation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub base_flow: BaseFlow,
    /// Multiplies every perturbation; 0 gives the unperturbed limit data.
    #[serde(default = "one")]
    pub amplitude_scale: f64,
}

impl RegimePreset {
    pub fn new(theorem: Theorem, delta: f64) -> RegimePreset {
        RegimePreset {
            theorem,
            delta,
            a: None,
            mu: None,
            scaling_law: None,
            preparation: Preparation::WellPrepared,
            seed: 0,
            base_flow: BaseFlow::default(),
            amplitude_scale: 1.0,
        }
    }

    pub fn with_delta(&self, delta: f64) -> RegimePreset {
        RegimePreset { delta, ..self.clone() }
    }

    pub fn exponent(&self) -> f64 {
        self.a.unwrap_or(0.0)
    }

    pub fn law(&self) -> Result<ScalingLaw> {
        let bad = |why: String| Err(Error::Config(format!("{}: {why}", self.theorem.name())));
        match self.theorem {
            Theorem::Thm21 | Theorem::Cor22 | Theorem::Thm23 => {
                if self.mu.is_some() {
                    return bad("mu is not used; set scaling_law instead".into());
                }
                Ok(self.scaling_law.unwrap_or(ScalingLaw::EpsEqDelta))
            }
            Theorem::Thm25 => {
                if self.mu.is_some() {
                    return bad("mu is not used (eps = delta^2)".into());
                }
                match self.scaling_law {
                    None | Some(ScalingLaw::EpsEqDeltaSq) | Some(ScalingLaw::DeltaEqSqrtEps) => {
                        Ok(ScalingLaw::EpsEqDeltaSq)
                    }
                    Some(other) => bad(format!("needs eps = delta^2, got {other:?}")),
                }
            }
            Theorem::Thm26 | Theorem::Thm27TwoD => {
                let from_law = match self.scaling_law {
                    None => None,
                    Some(ScalingLaw::EpsEqMuDelta { mu }) => Some(mu),
                    Some(other) => return bad(format!("needs eps = mu delta, got {other:?}")),
                };
                match (self.mu, from_law) {
                    (Some(a), Some(b)) if a != b => bad(format!("mu = {a} conflicts with scaling law mu = {b}")),
                    (Some(mu), _) | (None, Some(mu)) => Ok(ScalingLaw::EpsEqMuDelta { mu }),
                    (None, None) => bad("mu is required".into()),
                }
            }
        }
    }

    pub fn params(&self) -> Result<RelaxParams> {
        let law = self.law()?;
        RelaxParams::from_law(law, self.delta).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::Config(format!("{}: {why}", self.theorem.name())));
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must be in (0, 1], got {}", self.delta));
        }
        match (self.theorem.exponent_range(), self.a) {
            (Some((lo, hi)), Some(a)) if !(a >= lo && a < hi) => {
                return bad(format!("a = {a} outside [{lo}, {hi})"));
            }
            (None, Some(_)) => return bad("exponent a is not used".into()),
            _ => {}
        }
        if !(self.amplitude_scale >= 0.0 && self.amplitude_scale.is_finite()) {
            return bad(format!("amplitude_scale must be >= 0, got {}", self.amplitude_scale));
        }
        let BaseFlow::TaylorGreen { amplitude } = self.base_flow;
        if !amplitude.is_finite() {
            return bad("base flow amplitude must be finite".into());
        }
        let p = self.params()?;
        if self.theorem == Theorem::Thm23 && p.delta > p.epsilon.sqrt() * (1.0 + 1e-12) {
            return bad(format!(
                "needs delta <= sqrt(eps), got delta = {}, eps = {}",
                p.delta, p.epsilon
            ));
        }
        Ok(())
    }
}
