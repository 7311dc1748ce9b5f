//! Detection outcomes and their classical classification.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fock::{FockPattern, PureState, TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessTag {
    BellPhi,
    BellPsi,
    Cluster,
    /// Cluster state up to a known Pauli correction.
    ClusterPauliFrame,
    Fused,
    SameParity,
    OppositeParity,
    XPlus,
    XMinus,
    ZZero,
    ZOne,
    /// Blocking-switch Z measurement without a click.
    ZeroOrLost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureTag {
    NonstandardEncoding,
    /// Correct click count but the heralded state is not maximally entangled.
    PartialEntanglement,
    ZeroOrTwoPhotons,
    NoHerald,
    ComputationalBasis,
    Lost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "tag", rename_all = "kebab-case")]
pub enum Classification {
    Success(SuccessTag),
    Failure(FailureTag),
    Invalid,
}

impl Classification {
    pub fn is_success(&self) -> bool {
        matches!(self, Classification::Success(_))
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        match v.get("tag").and_then(|t| t.as_str()) {
            Some(tag) => write!(f, "{}({tag})", v["kind"].as_str().unwrap_or("")),
            None => write!(f, "invalid"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeraldOutcome {
    /// Counts on the detector modes, in register order.
    pub pattern: FockPattern,
    pub classification: Classification,
    pub probability: f64,
    pub post_state: PureState,
    /// Node or rail index where the deciding click landed, when meaningful.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub site: Option<usize>,
    /// Sign of the heralded correction (+1 or −1), when meaningful.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sign: Option<i8>,
}

impl HeraldOutcome {
    pub fn new(pattern: FockPattern, classification: Classification, probability: f64, post_state: PureState) -> Self {
        HeraldOutcome { pattern, classification, probability, post_state, site: None, sign: None }
    }
}

/// Sum of probabilities over outcomes passing `pred`.
pub fn probability_where(outcomes: &[HeraldOutcome], pred: impl Fn(&HeraldOutcome) -> bool) -> f64 {
    outcomes.iter().filter(|o| pred(o)).map(|o| o.probability).sum()
}

pub fn success_probability(outcomes: &[HeraldOutcome]) -> f64 {
    probability_where(outcomes, |o| o.classification.is_success())
}

pub fn total_probability(outcomes: &[HeraldOutcome]) -> f64 {
    outcomes.iter().map(|o| o.probability).sum()
}

/// True when the outcome list is complete and every post state is normalized.
pub fn is_complete(outcomes: &[HeraldOutcome]) -> bool {
    (total_probability(outcomes) - 1.0).abs() <= TOLERANCE
        && outcomes.iter().all(|o| (o.post_state.norm_sqr() - 1.0).abs() <= TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_serialize_kebab() {
        let c = Classification::Success(SuccessTag::BellPhi);
        assert_eq!(serde_json::to_value(c).unwrap(), serde_json::json!({"kind": "success", "tag": "bell-phi"}));
        assert_eq!(c.to_string(), "success(bell-phi)");
        assert_eq!(Classification::Failure(FailureTag::ZeroOrTwoPhotons).to_string(), "failure(zero-or-two-photons)");
        assert_eq!(Classification::Invalid.to_string(), "invalid");
    }
}
