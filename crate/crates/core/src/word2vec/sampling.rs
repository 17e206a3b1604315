use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Every center uses the full window.
    Fixed,
    /// Each center draws its window width uniformly from `1..=window`.
    Dynamic,
}

/// Skip-gram `(center, context)` pairs for one sentence of vocabulary indices.
/// Pairs are emitted center by center, nearest context first on each side.
pub fn training_pairs<R: Rng + ?Sized>(
    tokens: &[usize],
    window: usize,
    mode: WindowMode,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let n = tokens.len();
    if n < 2 || window == 0 {
        return pairs;
    }
    for t in 0..n {
        let w = match mode {
            WindowMode::Fixed => window,
            WindowMode::Dynamic => rng.random_range(1..=window),
        };
        let lo = t.saturating_sub(w);
        let hi = (t + w).min(n - 1);
        for c in lo..=hi {
            if c != t {
                pairs.push((tokens[t], tokens[c]));
            }
        }
    }
    pairs
}

/// Draws noise words from the unigram distribution raised to the 3/4 power.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
    probs: Vec<f64>,
}

impl NegativeSampler {
    pub const POWER: f64 = 0.75;

    pub fn new(counts: &[u64]) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::Config(format!(
                "negative sampling needs at least 2 vocabulary entries, got {}",
                counts.len()
            )));
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64).powf(Self::POWER))
            .collect();
        let total: f64 = weights.iter().sum();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Config(format!("bad sampling weights: {e}")))?;
        Ok(Self {
            dist,
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Theoretical probability of drawing each index (before exclusion).
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `k` draws, resampling whenever `exclude` comes up.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, exclude: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        self.sample_into(rng, k, exclude, &mut out);
        out
    }

    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        k: usize,
        exclude: usize,
        out: &mut Vec<usize>,
    ) {
        out.clear();
        while out.len() < k {
            let i = self.dist.sample(rng);
            if i != exclude {
                out.push(i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn window_one_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pairs: BTreeSet<_> = training_pairs(&[0, 1, 2], 1, WindowMode::Dynamic, &mut rng)
            .into_iter()
            .collect();
        let expected: BTreeSet<_> = [(0, 1), (1, 0), (1, 2), (2, 1)].into_iter().collect();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn single_token_has_no_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(training_pairs(&[3], 5, WindowMode::Fixed, &mut rng).is_empty());
        assert!(training_pairs(&[], 5, WindowMode::Fixed, &mut rng).is_empty());
    }

    /// Independent enumeration of clipped `(t, t±k)` pairs.
    fn enumerate_fixed(n: usize, window: usize) -> usize {
        let mut count = 0;
        for t in 0..n as i64 {
            for k in 1..=window as i64 {
                for c in [t - k, t + k] {
                    if c >= 0 && c < n as i64 {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn fixed_window_counts_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(enumerate_fixed(4, 2), 10);
        assert_eq!(
            training_pairs(&[0, 1, 2, 3], 2, WindowMode::Fixed, &mut rng).len(),
            10
        );
        for n in 0..12 {
            for w in 1..6 {
                let toks: Vec<usize> = (0..n).collect();
                assert_eq!(
                    training_pairs(&toks, w, WindowMode::Fixed, &mut rng).len(),
                    enumerate_fixed(n, w)
                );
            }
        }
    }

    #[test]
    fn dynamic_window_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let toks: Vec<usize> = (0..50).collect();
        let pairs = training_pairs(&toks, 3, WindowMode::Dynamic, &mut rng);
        assert!(pairs.iter().all(|&(c, o)| c != o && c.abs_diff(o) <= 3));
        assert!(pairs.len() < enumerate_fixed(50, 3));
    }

    #[test]
    fn two_word_vocab_always_returns_the_other() {
        let s = NegativeSampler::new(&[1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(s.sample(&mut rng, 100, 0).iter().all(|&i| i == 1));
        assert!(NegativeSampler::new(&[5]).is_err());
    }

    #[test]
    fn empirical_frequencies_match_uniform() {
        let v = 10;
        let s = NegativeSampler::new(&vec![7; v]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut hist = vec![0usize; v];
        for i in s.sample(&mut rng, draws, usize::MAX) {
            hist[i] += 1;
        }
        for h in hist {
            let p = h as f64 / draws as f64;
            assert!((p - 0.1).abs() / 0.1 < 0.02, "p = {p}");
        }
    }

    #[test]
    fn empirical_frequencies_follow_three_quarter_power() {
        let counts = [1u64, 10, 100, 1000];
        let s = NegativeSampler::new(&counts).unwrap();
        let w: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = w.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 200_000;
        let mut hist = [0usize; 4];
        let excluded = 0;
        for i in s.sample(&mut rng, draws, excluded) {
            hist[i] += 1;
        }
        assert_eq!(hist[0], 0);
        let kept: f64 = total - w[0];
        // chi-square with 2 degrees of freedom; 13.8 is the 0.999 quantile
        let chi2: f64 = (1..4)
            .map(|i| {
                let e = draws as f64 * w[i] / kept;
                (hist[i] as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 13.8, "chi2 = {chi2}");
    }
}
