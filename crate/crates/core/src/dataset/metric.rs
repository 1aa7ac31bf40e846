use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One of the 21 object-oriented source code metrics.
///
/// The declaration order is the canonical order used for tie-breaking and
/// for canonicalized output everywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Dit,
    Noc,
    Noa,
    Nod,
    Cbo,
    Rfc,
    Lcom,
    Lcom3,
    Cam,
    Camc,
    Ich,
    Mpc,
    Dac,
    Mfa,
    Dam,
    Npm,
    Ic,
    Cbm,
    SlocL,
    Loc,
    SlocP,
}

impl Metric {
    pub const COUNT: usize = 21;

    pub const ALL: [Metric; Metric::COUNT] = [
        Metric::Dit,
        Metric::Noc,
        Metric::Noa,
        Metric::Nod,
        Metric::Cbo,
        Metric::Rfc,
        Metric::Lcom,
        Metric::Lcom3,
        Metric::Cam,
        Metric::Camc,
        Metric::Ich,
        Metric::Mpc,
        Metric::Dac,
        Metric::Mfa,
        Metric::Dam,
        Metric::Npm,
        Metric::Ic,
        Metric::Cbm,
        Metric::SlocL,
        Metric::Loc,
        Metric::SlocP,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Dit => "DIT",
            Metric::Noc => "NOC",
            Metric::Noa => "NOA",
            Metric::Nod => "NOD",
            Metric::Cbo => "CBO",
            Metric::Rfc => "RFC",
            Metric::Lcom => "LCOM",
            Metric::Lcom3 => "LCOM3",
            Metric::Cam => "CAM",
            Metric::Camc => "CAMC",
            Metric::Ich => "ICH",
            Metric::Mpc => "MPC",
            Metric::Dac => "DAC",
            Metric::Mfa => "MFA",
            Metric::Dam => "DAM",
            Metric::Npm => "NPM",
            Metric::Ic => "IC",
            Metric::Cbm => "CBM",
            Metric::SlocL => "SLOC-L",
            Metric::Loc => "LOC",
            Metric::SlocP => "SLOC-P",
        }
    }

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Sorts and deduplicates a list into canonical order.
    pub fn canonicalize(metrics: &mut Vec<Metric>) {
        metrics.sort();
        metrics.dedup();
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown metric name `{0}`")]
pub struct UnknownMetric(pub String);

impl FromStr for Metric {
    type Err = UnknownMetric;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.as_str().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| UnknownMetric(trimmed.to_string()))
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated metric list such as `"LOC,cbo, RFC"`.
pub fn parse_metric_list(s: &str) -> Result<Vec<Metric>, UnknownMetric> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_one_distinct_names() {
        let mut names: Vec<_> = Metric::ALL.iter().map(|m| m.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 21);
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!("sloc-l".parse::<Metric>().unwrap(), Metric::SlocL);
        assert_eq!("Lcom3".parse::<Metric>().unwrap(), Metric::Lcom3);
        assert!("SLOC_L".parse::<Metric>().is_err());
        assert!("CLOC-L".parse::<Metric>().is_err());
    }

    #[test]
    fn index_matches_canonical_order() {
        for (i, m) in Metric::ALL.iter().enumerate() {
            assert_eq!(m.index(), i);
        }
    }

    #[test]
    fn metric_list_parsing() {
        let got = parse_metric_list("LOC, cbo,,RFC").unwrap();
        assert_eq!(got, vec![Metric::Loc, Metric::Cbo, Metric::Rfc]);
    }
}
