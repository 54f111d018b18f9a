use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AggregationError;

/// How a vote profile is turned into a single selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AggregationRule {
    Union,
    Intersection,
    /// Threshold `⌊(k+1)/2⌋`.
    Median,
    FixedThreshold(usize),
    /// Complexity-ratio threshold over `[1, c0]`.
    Adages,
    /// Minimizer of `c·|S_(c)|` over `[1, c0]`.
    AdagesModified,
}

impl AggregationRule {
    pub const NAMED: [AggregationRule; 5] = [
        AggregationRule::Union,
        AggregationRule::Intersection,
        AggregationRule::Median,
        AggregationRule::Adages,
        AggregationRule::AdagesModified,
    ];

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for AggregationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggregationRule::Union => f.write_str("union"),
            AggregationRule::Intersection => f.write_str("intersection"),
            AggregationRule::Median => f.write_str("median"),
            AggregationRule::FixedThreshold(c) => write!(f, "threshold:{c}"),
            AggregationRule::Adages => f.write_str("adages"),
            AggregationRule::AdagesModified => f.write_str("adages_m"),
        }
    }
}

impl FromStr for AggregationRule {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rule = match s.trim().to_ascii_lowercase().as_str() {
            "union" => AggregationRule::Union,
            "intersection" => AggregationRule::Intersection,
            "median" => AggregationRule::Median,
            "adages" => AggregationRule::Adages,
            "adages_m" | "adages-m" | "adages_modified" => AggregationRule::AdagesModified,
            other => {
                let c = other
                    .strip_prefix("threshold:")
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| AggregationError::UnknownRule(s.to_string()))?;
                if c == 0 {
                    return Err(AggregationError::ThresholdOutOfRange { c, k: 0 });
                }
                AggregationRule::FixedThreshold(c)
            }
        };
        Ok(rule)
    }
}

impl TryFrom<String> for AggregationRule {
    type Error = AggregationError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<AggregationRule> for String {
    fn from(rule: AggregationRule) -> Self {
        rule.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for rule in AggregationRule::NAMED
            .into_iter()
            .chain([AggregationRule::FixedThreshold(3)])
        {
            assert_eq!(rule.name().parse::<AggregationRule>().unwrap(), rule);
        }
        assert!("threshold:0".parse::<AggregationRule>().is_err());
        assert!("majority".parse::<AggregationRule>().is_err());
        assert_eq!(
            serde_json::to_string(&AggregationRule::AdagesModified).unwrap(),
            "\"adages_m\""
        );
    }
}
