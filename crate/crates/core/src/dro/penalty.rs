//! Transport distance to a sample and the demand-box vertex patterns.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("demand vectors differ in length ({left} vs {right})")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

/// L1 distance `Σ_k |b_k − b_ref_k|`.
pub fn wasserstein_penalty(b: &[f64], b_ref: &[f64]) -> Result<f64, DimensionMismatch> {
    if b.len() != b_ref.len() {
        return Err(DimensionMismatch {
            left: b.len(),
            right: b_ref.len(),
        });
    }
    Ok(b.iter().zip(b_ref).map(|(x, y)| (x - y).abs()).sum())
}

/// Where one pair's demand sits in the worst case. The declaration order is
/// also the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexState {
    /// At the sample value.
    Zero,
    /// At the upper bound.
    Plus,
    /// At the lower bound.
    Minus,
}

impl VertexState {
    pub const ALL: [VertexState; 3] = [VertexState::Zero, VertexState::Plus, VertexState::Minus];

    /// The `(δ⁺, δ⁻)` indicator pair.
    pub fn indicators(self) -> (u8, u8) {
        match self {
            VertexState::Zero => (0, 0),
            VertexState::Plus => (1, 0),
            VertexState::Minus => (0, 1),
        }
    }
}

impl fmt::Display for VertexState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VertexState::Zero => "sample",
            VertexState::Plus => "upper",
            VertexState::Minus => "lower",
        })
    }
}

/// One state per origin-destination pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexPattern(pub Vec<VertexState>);

impl VertexPattern {
    pub fn zero(k: usize) -> Self {
        VertexPattern(vec![VertexState::Zero; k])
    }

    /// Decodes `index` in base 3 over the listed pairs, first pair most
    /// significant, so increasing indices follow the lexicographic order.
    pub fn from_index(k: usize, pairs: &[usize], mut index: usize) -> Self {
        let mut states = vec![VertexState::Zero; k];
        for &p in pairs.iter().rev() {
            states[p] = VertexState::ALL[index % 3];
            index /= 3;
        }
        VertexPattern(states)
    }

    /// The demand vector this pattern selects.
    pub fn demand(&self, b_ref: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
        self.0
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                VertexState::Zero => b_ref[k],
                VertexState::Plus => upper[k],
                VertexState::Minus => lower[k],
            })
            .collect()
    }

    /// `Σ_k ((W⁺_k − b_k)δ⁺_k − (W⁻_k − b_k)δ⁻_k)`, the sign-free form of the
    /// distance between the pattern's demand and the sample.
    pub fn linearized_penalty(&self, b_ref: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let (dp, dm) = s.indicators();
                (upper[k] - b_ref[k]) * f64::from(dp) - (lower[k] - b_ref[k]) * f64::from(dm)
            })
            .sum()
    }
}

impl fmt::Display for VertexPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn penalty_examples() {
        assert_eq!(wasserstein_penalty(&[1.0, 2.0], &[1.0, 2.0]), Ok(0.0));
        assert_eq!(wasserstein_penalty(&[5.0, 3.0], &[2.0, 7.0]), Ok(7.0));
        assert!(wasserstein_penalty(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn index_decoding_is_lexicographic() {
        let pats: Vec<VertexPattern> = (0..9).map(|i| VertexPattern::from_index(2, &[0, 1], i)).collect();
        let mut sorted = pats.clone();
        sorted.sort();
        assert_eq!(pats, sorted);
        assert_eq!(pats[1].0, vec![VertexState::Zero, VertexState::Plus]);
    }

    proptest! {
        #[test]
        fn penalty_is_symmetric(a in proptest::collection::vec(-50.0f64..50.0, 4), b in proptest::collection::vec(-50.0f64..50.0, 4)) {
            prop_assert_eq!(wasserstein_penalty(&a, &b), wasserstein_penalty(&b, &a));
            prop_assert!(wasserstein_penalty(&a, &b).unwrap() >= 0.0);
        }

        #[test]
        fn linearization_matches_absolute_value(
            raw in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0), 1..5),
            idx in 0usize..243,
        ) {
            let k = raw.len();
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            let mut sample = Vec::new();
            for (a, b, c) in raw {
                let mut v = [a, b, c];
                v.sort_by(f64::total_cmp);
                lower.push(v[0]);
                sample.push(v[1]);
                upper.push(v[2]);
            }
            let pairs: Vec<usize> = (0..k).collect();
            let pat = VertexPattern::from_index(k, &pairs, idx % 3usize.pow(k as u32));
            let demand = pat.demand(&sample, &lower, &upper);
            let abs = wasserstein_penalty(&demand, &sample).unwrap();
            let lin = pat.linearized_penalty(&sample, &lower, &upper);
            prop_assert_eq!(abs, lin);
        }
    }
}
