//! Disorder laws and periodic configurations.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign pattern of the support endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// `s₋ < 0 < s₊`.
    Signed,
    /// `0 ≤ s₋ < s₊`.
    Nonneg,
}

/// Finite support of the single-site law with sampling weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    s_minus: f64,
    s_plus: f64,
    support: Vec<f64>,
    weights: Vec<f64>,
    alternative: Alternative,
}

impl DisorderSpec {
    /// Sorts and deduplicates `support`; `weights` follow the caller's order
    /// and default to uniform.
    pub fn new(support: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if support.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("support values must be finite".into()));
        }
        let uniform = vec![1.0; support.len()];
        let weights = weights.unwrap_or(&uniform);
        if weights.len() != support.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} support points",
                weights.len(),
                support.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be strictly positive".into()));
        }
        let mut pairs: Vec<(f64, f64)> = support.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        if pairs.len() < 2 {
            return Err(Error::InvalidInput(
                "disorder must be non-trivial: the support needs two distinct values".into(),
            ));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let s_minus = pairs[0].0;
        let s_plus = pairs[pairs.len() - 1].0;
        let alternative = if s_minus < 0.0 && s_plus > 0.0 {
            Alternative::Signed
        } else if s_minus >= 0.0 {
            Alternative::Nonneg
        } else {
            return Err(Error::InvalidInput(format!(
                "support [{s_minus}, {s_plus}] fits neither s- < 0 < s+ nor 0 <= s- < s+"
            )));
        };
        Ok(Self {
            s_minus,
            s_plus,
            support: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
            alternative,
        })
    }

    /// Two-point law on the endpoints.
    pub fn endpoints(s_minus: f64, s_plus: f64) -> Result<Self> {
        Self::new(&[s_minus, s_plus], None)
    }

    pub fn s_minus(&self) -> f64 {
        self.s_minus
    }

    pub fn s_plus(&self) -> f64 {
        self.s_plus
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alternative(&self) -> Alternative {
        self.alternative
    }

    pub fn max_abs(&self) -> f64 {
        self.s_minus.abs().max(self.s_plus.abs())
    }

    /// Index of `s` in the support, if present.
    pub fn index_of(&self, s: f64) -> Option<usize> {
        self.support.iter().position(|v| *v == s)
    }
}

/// One period `ξ₀ … ξ_{P−1}` of a periodic configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    values: Vec<f64>,
}

impl Configuration {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("a configuration needs period >= 1".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(s: f64) -> Self {
        Self { values: vec![s] }
    }

    /// Checks every value lies in the support.
    pub fn in_support(values: Vec<f64>, disorder: &DisorderSpec) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| disorder.index_of(**v).is_none()) {
            return Err(Error::InvalidInput(format!("value {v} is not in the support")));
        }
        Self::new(values)
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    /// Space-separated values, used as a CSV field.
    pub fn label(&self) -> String {
        self.values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
    }
}

/// Reproducible categorical draws of `count` configurations of period `p`.
pub fn sample_configurations(disorder: &DisorderSpec, p: usize, count: usize, seed: u64) -> Result<Vec<Configuration>> {
    if count == 0 || p == 0 {
        return Err(Error::InvalidInput("count and period must be at least 1".into()));
    }
    let dist = WeightedIndex::new(disorder.weights()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| Configuration {
            values: (0..p).map(|_| disorder.support()[dist.sample(&mut rng)]).collect(),
        })
        .collect())
}

/// Continues the first `2^levels` sample values periodically.
pub fn periodize(sample: &[f64], levels: u32) -> Result<Configuration> {
    let p = 1usize
        .checked_shl(levels)
        .filter(|p| *p <= sample.len())
        .ok_or_else(|| Error::InvalidInput(format!("sample of length {} is shorter than 2^{levels}", sample.len())))?;
    Configuration::new(sample[..p].to_vec())
}

/// Representatives of all configurations over `alphabet` with period at most
/// `max_period`, one per cyclic-shift class, each of exact primitive period
/// (shorter periods are listed at their own length). Lexicographically least
/// rotation, ordered by period then value.
pub fn necklaces(alphabet_len: usize, max_period: usize, cap: u128) -> Result<Vec<Vec<usize>>> {
    let k = alphabet_len as u128;
    let count: u128 = (1..=max_period as u32).map(|p| k.saturating_pow(p)).fold(0u128, |a, b| a.saturating_add(b));
    if count > cap {
        return Err(Error::CombinatorialBlowup { count, cap });
    }
    let mut out = Vec::new();
    for p in 1..=max_period {
        let mut word = vec![0usize; p];
        loop {
            if is_primitive_min_rotation(&word) {
                out.push(word.clone());
            }
            let Some(i) = (0..p).rev().find(|&i| word[i] + 1 < alphabet_len) else {
                break;
            };
            word[i] += 1;
            word[i + 1..].iter_mut().for_each(|w| *w = 0);
        }
    }
    Ok(out)
}

fn is_primitive_min_rotation(w: &[usize]) -> bool {
    let p = w.len();
    (1..p).all(|r| {
        let rotated = w[r..].iter().chain(&w[..r]);
        // strictly greater rotation: minimal and primitive
        rotated.cmp(w.iter()) == std::cmp::Ordering::Greater
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternatives() {
        assert_eq!(DisorderSpec::endpoints(-1.0, 1.0).unwrap().alternative(), Alternative::Signed);
        assert_eq!(DisorderSpec::endpoints(0.2, 0.8).unwrap().alternative(), Alternative::Nonneg);
        assert!(DisorderSpec::endpoints(1.0, 1.0).is_err());
        assert!(DisorderSpec::endpoints(-1.0, -0.5).is_err());
    }

    #[test]
    fn weights_normalized() {
        let d = DisorderSpec::new(&[1.0, -1.0, 0.0], Some(&[2.0, 1.0, 1.0])).unwrap();
        assert_eq!(d.support(), &[-1.0, 0.0, 1.0]);
        assert_eq!(d.weights(), &[0.25, 0.25, 0.5]);
        assert!(DisorderSpec::new(&[-1.0, 1.0], Some(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = DisorderSpec::endpoints(-1.0, 1.0).unwrap();
        let a = sample_configurations(&d, 4, 8, 7).unwrap();
        let b = sample_configurations(&d, 4, 8, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        assert!(a.iter().all(|c| c.period() == 4 && c.values().iter().all(|v| v.abs() == 1.0)));
    }

    #[test]
    fn necklace_counts() {
        // primitive binary necklaces: 2, 1, 2, 3
        let n = necklaces(2, 4, 1000).unwrap();
        let by_len: Vec<usize> = (1..=4).map(|p| n.iter().filter(|w| w.len() == p).count()).collect();
        assert_eq!(by_len, vec![2, 1, 2, 3]);
        let t = necklaces(3, 3, 1000).unwrap();
        assert_eq!(t.len(), 3 + 3 + 8);
        assert!(matches!(necklaces(10, 4, 100), Err(Error::CombinatorialBlowup { .. })));
    }

    #[test]
    fn periodization() {
        let c = periodize(&[1.0, -1.0, 1.0, 1.0], 1).unwrap();
        assert_eq!(c.values(), &[1.0, -1.0]);
        let c = periodize(&[0.5; 8], 3).unwrap();
        assert_eq!(c.values(), &[0.5; 8]);
        assert!(periodize(&[1.0, 2.0], 2).is_err());
    }
}
