use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relation between the two small parameters used by parameter sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law", deny_unknown_fields)]
pub enum ScalingLaw {
    /// `epsilon = delta`
    EpsEqDelta,
    /// `delta = sqrt(epsilon)`, i.e. `epsilon = delta^2`
    DeltaEqSqrtEps,
    /// `epsilon = delta^2`
    EpsEqDeltaSq,
    /// `epsilon = mu * delta`
    EpsEqMuDelta { mu: f64 },
}

impl ScalingLaw {
    pub fn epsilon(&self, delta: f64) -> f64 {
        match *self {
            ScalingLaw::EpsEqDelta => delta,
            ScalingLaw::DeltaEqSqrtEps | ScalingLaw::EpsEqDeltaSq => delta * delta,
            ScalingLaw::EpsEqMuDelta { mu } => mu * delta,
        }
    }
}

/// Artificial compressibility `epsilon` and stress relaxation time `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxParams {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling_law: Option<ScalingLaw>,
}

impl RelaxParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<RelaxParams> {
        let p = RelaxParams {
            epsilon,
            delta,
            scaling_law: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_law(law: ScalingLaw, delta: f64) -> Result<RelaxParams> {
        let p = RelaxParams {
            epsilon: law.epsilon(delta),
            delta,
            scaling_law: Some(law),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x <= 1.0;
        if !ok(self.epsilon) || !ok(self.delta) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < epsilon, delta <= 1, got epsilon = {:e}, delta = {:e}",
                self.epsilon, self.delta
            )));
        }
        if let Some(ScalingLaw::EpsEqMuDelta { mu }) = self.scaling_law {
            if !(mu > 0.0) {
                return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laws() {
        assert_eq!(ScalingLaw::EpsEqDelta.epsilon(0.1), 0.1);
        assert!((ScalingLaw::EpsEqDeltaSq.epsilon(0.1) - 0.01).abs() < 1e-16);
        assert!((ScalingLaw::EpsEqMuDelta { mu: 0.05 }.epsilon(0.02) - 1e-3).abs() < 1e-16);
        let p = RelaxParams::from_law(ScalingLaw::DeltaEqSqrtEps, 0.01).unwrap();
        assert!((p.epsilon - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn validation() {
        assert!(RelaxParams::new(0.0, 0.1).is_err());
        assert!(RelaxParams::new(0.5, 1.5).is_err());
        assert!(RelaxParams::new(1.0, 1.0).is_ok());
        assert!(RelaxParams::from_law(ScalingLaw::EpsEqMuDelta { mu: -1.0 }, 0.1).is_err());
    }

    #[test]
    fn law_json() {
        let s = serde_json::to_string(&ScalingLaw::EpsEqMuDelta { mu: 0.05 }).unwrap();
        assert_eq!(s, r#"{"law":"eps_eq_mu_delta","mu":0.05}"#);
        let back: ScalingLaw = serde_json::from_str(r#"{"law":"eps_eq_delta"}"#).unwrap();
        assert_eq!(back, ScalingLaw::EpsEqDelta);
    }
}
