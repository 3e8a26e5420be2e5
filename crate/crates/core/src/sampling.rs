//! Synthetic demand: censored Gaussian draws on `[max(0, m − 3s), m + 3s]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Parameters of one pair's demand distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianDemand {
    pub mean: f64,
    pub sd: f64,
}

impl GaussianDemand {
    pub fn bounds(&self) -> (f64, f64) {
        ((self.mean - 3.0 * self.sd).max(0.0), self.mean + 3.0 * self.sd)
    }
}

/// Draws `n` demand vectors, one entry per pair, clamping every draw into
/// the pair's bounds. Deterministic for a given seed.
pub fn censored_gaussian_samples(pairs: &[GaussianDemand], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Option<Normal<f64>>> = pairs
        .iter()
        .map(|p| (p.sd > 0.0).then(|| Normal::new(p.mean, p.sd).expect("finite positive sd")))
        .collect();
    (0..n)
        .map(|_| {
            pairs
                .iter()
                .zip(&dists)
                .map(|(p, d)| {
                    let (lo, hi) = p.bounds();
                    match d {
                        Some(d) => d.sample(&mut rng).clamp(lo, hi),
                        None => p.mean.clamp(lo, hi),
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_seed_same_draws() {
        let p = [GaussianDemand { mean: 50.0, sd: 10.0 }];
        assert_eq!(censored_gaussian_samples(&p, 5, 7), censored_gaussian_samples(&p, 5, 7));
        assert_ne!(censored_gaussian_samples(&p, 5, 7), censored_gaussian_samples(&p, 5, 8));
    }

    proptest! {
        #[test]
        fn draws_stay_in_bounds(mean in 0.0f64..500.0, sd in 0.0f64..200.0, seed in any::<u64>()) {
            let p = GaussianDemand { mean, sd };
            let (lo, hi) = p.bounds();
            for s in censored_gaussian_samples(&[p], 50, seed) {
                prop_assert!(s[0] >= lo && s[0] <= hi);
            }
        }
    }
}
