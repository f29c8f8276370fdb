use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Accept,
}

impl Decision {
    /// Closed-inequality rule: reject iff `statistic >= threshold`.
    pub fn from_threshold(statistic: f64, threshold: f64) -> Self {
        if statistic >= threshold {
            Decision::Reject
        } else {
            Decision::Accept
        }
    }

    pub fn is_reject(self) -> bool {
        self == Decision::Reject
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    EffectiveDimension,
    Permutation,
    Aggregated,
}

/// Parameters a test was run with. Fields that do not apply stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    pub lambda: Option<f64>,
    pub bandwidth: Option<f64>,
    pub permutations: Option<usize>,
    pub n: usize,
    pub m: usize,
    pub reference_size: Option<usize>,
    pub seed: Option<u64>,
    /// Per-test level after multiplicity correction.
    pub corrected_level: Option<f64>,
}

/// Result of a single goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
    /// Present only for single-statistic permutation calibration.
    pub p_value: Option<f64>,
    pub calibration: Calibration,
    pub nuisance: Nuisance,
}

impl GofOutcome {
    pub fn rejects(&self) -> bool {
        self.decision.is_reject()
    }
}
