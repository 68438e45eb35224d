use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::TwoColorField;
use crate::scalar::Real;

/// Photon multiset absorbed by a channel, keyed by color label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelSpec {
    counts: BTreeMap<String, u32>,
}

impl ChannelSpec {
    pub fn new<I, S>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (label, n) in counts {
            let label = label.into();
            if label.is_empty() {
                return Err(Error::config("empty color label in channel"));
            }
            if n > 0 {
                *map.entry(label).or_insert(0) += n;
            }
        }
        let spec = ChannelSpec { counts: map };
        if spec.total_order() == 0 {
            return Err(Error::config("channel must absorb at least one photon"));
        }
        Ok(spec)
    }

    pub fn single(label: &str, photons: u32) -> Result<Self> {
        Self::new([(label, photons)])
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    pub fn count(&self, label: &str) -> u32 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn total_order(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn colors(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    /// Every referenced color must exist in the field.
    pub fn validate_against<T: Real>(&self, field: &TwoColorField<T>) -> Result<()> {
        for c in self.colors() {
            if field.get(c).is_none() {
                return Err(Error::config(format!(
                    "channel `{self}` references color `{c}` absent from the field"
                )));
            }
        }
        Ok(())
    }

    /// Accumulated delay and carrier phase `Σ_c n_c (ω_c τ_c − φ_c)` carried by
    /// pure-absorption paths.
    pub fn delay_phase<T: Real>(&self, field: &TwoColorField<T>) -> Result<T> {
        self.validate_against(field)?;
        Ok(self
            .counts
            .iter()
            .map(|(label, &n)| {
                let p = field.get(label).expect("validated");
                T::from_usize_lossy(n as usize) * (p.omega() * p.delay - p.carrier_phase)
            })
            .sum())
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (label, n) in &self.counts {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{label}:{n}")?;
        }
        Ok(())
    }
}

impl FromStr for ChannelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut counts = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (label, n) = part
                .split_once(':')
                .ok_or_else(|| Error::config(format!("channel entry `{part}` is not color:count")))?;
            let n: u32 = n
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad photon count in `{part}`")))?;
            counts.push((label.trim().to_string(), n));
        }
        ChannelSpec::new(counts)
    }
}

impl TryFrom<String> for ChannelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChannelSpec> for String {
    fn from(c: ChannelSpec) -> String {
        c.to_string()
    }
}

/// Every distinct time ordering of the channel's photons, in lexicographic
/// order of the color labels.
pub fn enumerate_orderings(channel: &ChannelSpec) -> Vec<Vec<String>> {
    let mut seq: Vec<&str> = Vec::new();
    for (label, &n) in channel.counts() {
        seq.extend(std::iter::repeat_n(label.as_str(), n as usize));
    }
    let mut out = vec![seq.iter().map(|s| s.to_string()).collect()];
    while next_permutation(&mut seq) {
        out.push(seq.iter().map(|s| s.to_string()).collect());
    }
    out
}

fn next_permutation<T: Ord>(v: &mut [T]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Dimensionless (relative-unit) transition amplitude of one channel into one
/// final level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelAmplitude<T> {
    pub channel: ChannelSpec,
    pub final_index: usize,
    pub value: Complex<T>,
}

impl<T: Real> ChannelAmplitude<T> {
    pub fn probability(&self) -> T {
        self.value.norm_sqr()
    }

    /// `|C|² > 1`: outside the perturbative regime. Flagged, never clamped.
    pub fn exceeds_unit_probability(&self) -> bool {
        self.probability() > T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multinomial(counts: &[u32]) -> usize {
        let fact = |n: u32| (1..=n as usize).product::<usize>();
        fact(counts.iter().sum()) / counts.iter().map(|&c| fact(c)).product::<usize>()
    }

    #[test]
    fn parse_and_display() {
        let c: ChannelSpec = "two_omega:1, omega:2".parse().unwrap();
        assert_eq!(c.to_string(), "omega:2,two_omega:1");
        assert_eq!(c.total_order(), 3);
        assert_eq!(c.count("omega"), 2);
        assert!("omega".parse::<ChannelSpec>().is_err());
        assert!("omega:0".parse::<ChannelSpec>().is_err());
        assert!("omega:x".parse::<ChannelSpec>().is_err());
    }

    #[test]
    fn orderings_examples() {
        let c: ChannelSpec = "omega:2,two_omega:1".parse().unwrap();
        let o = enumerate_orderings(&c);
        assert_eq!(o.len(), 3);
        assert_eq!(o[0], ["omega", "omega", "two_omega"]);
        assert_eq!(o[1], ["omega", "two_omega", "omega"]);
        assert_eq!(o[2], ["two_omega", "omega", "omega"]);
        assert_eq!(enumerate_orderings(&ChannelSpec::single("omega", 4).unwrap()).len(), 1);
        let c: ChannelSpec = "omega:2,two_omega:2".parse().unwrap();
        assert_eq!(enumerate_orderings(&c).len(), 6);
    }

    #[test]
    fn orderings_complete_up_to_order_six() {
        let labels = ["a", "b", "c"];
        for a in 0..=6u32 {
            for b in 0..=(6 - a) {
                for c in 0..=(6 - a - b) {
                    if a + b + c == 0 {
                        continue;
                    }
                    let spec = ChannelSpec::new(labels.iter().copied().zip([a, b, c])).unwrap();
                    let o = enumerate_orderings(&spec);
                    assert_eq!(o.len(), multinomial(&[a, b, c]), "{spec}");
                    let mut sorted = o.clone();
                    sorted.sort();
                    sorted.dedup();
                    assert_eq!(sorted, o, "orderings must be distinct and lexicographic");
                }
            }
        }
    }

    #[test]
    fn serde_as_string() {
        let c: ChannelSpec = "omega:4".parse().unwrap();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, "\"omega:4\"");
        let back: ChannelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
