use serde::{Deserialize, Serialize};

/// Tunable constants of the scoring scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreParams {
    /// Width multiplier on sigma in the distribution score.
    pub alpha: f64,
    /// Scaling factor of the pairwise agreement score.
    pub beta: f64,
    /// Score used when no reference range or no formula applies.
    pub default_score: f64,
    /// Fields whose final score falls below this are sent to review.
    pub review_threshold: f64,
    pub n_samples: usize,
    pub temperature: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            alpha: 6.0,
            beta: 2.0,
            default_score: 0.7,
            review_threshold: 0.7,
            n_samples: 3,
            temperature: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid score parameter: {0}")]
pub struct ParamError(pub String);

impl ScoreParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ParamError(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ParamError(format!("beta must be > 0, got {}", self.beta)));
        }
        for (name, v) in [
            ("default_score", self.default_score),
            ("review_threshold", self.review_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ParamError(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.n_samples == 0 {
            return Err(ParamError("n_samples must be at least 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ParamError(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let p = ScoreParams::default();
        assert_eq!((p.alpha, p.beta, p.default_score, p.review_threshold), (6.0, 2.0, 0.7, 0.7));
        assert_eq!((p.n_samples, p.temperature), (3, 0.3));
        p.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ScoreParams { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(ScoreParams { beta: -1.0, ..Default::default() }.validate().is_err());
        assert!(ScoreParams { review_threshold: 1.5, ..Default::default() }.validate().is_err());
        assert!(ScoreParams { default_score: -0.1, ..Default::default() }.validate().is_err());
    }
}
