//! Count histograms, tail sums and resampling.
//!
//! A [`FrequencyHistogram`] maps a multiplicity `j` to the number `N_j` of
//! species seen exactly `j` times. The text format is two whitespace
//! separated integer columns, `j count`, one pair per line. Lines starting
//! with `#` are comments and blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistogramError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate multiplicity {multiplicity}")]
    Duplicate { line: usize, multiplicity: u64 },
    #[error("histogram has no entries")]
    Empty,
    #[error("input is not valid UTF-8")]
    Encoding,
}

/// Sparse histogram `j -> N_j`. Zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyHistogram {
    entries: BTreeMap<u64, u64>,
}

impl FrequencyHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a histogram from `(j, N_j)` pairs. Zero counts are dropped and
    /// repeated multiplicities are summed.
    ///
    /// Panics if any multiplicity is zero.
    pub fn from_pairs<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Self {
        let mut hist = Self::new();
        for (j, n) in pairs {
            hist.add(j, n);
        }
        hist
    }

    /// Histogram whose tail sums are exactly `tail` (non-increasing,
    /// non-negative). Species counted in the last entry are all placed at
    /// multiplicity `tail.len()`, which leaves `S_1..S_J` unchanged.
    pub fn from_tail_sums(tail: &[u64]) -> Option<Self> {
        if tail.windows(2).any(|w| w[0] < w[1]) {
            return None;
        }
        let mut hist = Self::new();
        for (i, &s) in tail.iter().enumerate() {
            let next = tail.get(i + 1).copied().unwrap_or(0);
            hist.add(i as u64 + 1, s - next);
        }
        Some(hist)
    }

    pub fn add(&mut self, multiplicity: u64, count: u64) {
        assert!(multiplicity >= 1, "multiplicity must be positive");
        if count > 0 {
            *self.entries.entry(multiplicity).or_insert(0) += count;
        }
    }

    /// `N_j`, zero when absent.
    pub fn count(&self, multiplicity: u64) -> u64 {
        self.entries.get(&multiplicity).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.entries.iter().map(|(&j, &n)| (j, n))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct multiplicities stored.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Observed species, `S_1 = sum N_j`.
    pub fn species(&self) -> u64 {
        self.entries.values().sum()
    }

    /// Observed individuals, `N = sum j N_j`.
    pub fn individuals(&self) -> u64 {
        self.entries.iter().map(|(&j, &n)| j * n).sum()
    }

    /// Largest observed multiplicity, 0 for an empty histogram.
    pub fn max_multiplicity(&self) -> u64 {
        self.entries.keys().next_back().copied().unwrap_or(0)
    }

    /// Parses the two-column text format.
    pub fn parse(text: &str) -> Result<Self, HistogramError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let (Some(j), Some(n), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(HistogramError::Malformed {
                    line,
                    reason: format!("expected two columns, got {trimmed:?}"),
                });
            };
            let j: i128 = j.parse().map_err(|_| HistogramError::Malformed {
                line,
                reason: format!("multiplicity {j:?} is not an integer"),
            })?;
            let n: i128 = n.parse().map_err(|_| HistogramError::Malformed {
                line,
                reason: format!("count {n:?} is not an integer"),
            })?;
            if j < 1 || j > u64::MAX as i128 {
                return Err(HistogramError::Malformed {
                    line,
                    reason: format!("multiplicity {j} must be at least 1"),
                });
            }
            if n < 0 || n > u64::MAX as i128 {
                return Err(HistogramError::Malformed {
                    line,
                    reason: format!("count {n} must be non-negative"),
                });
            }
            let j = j as u64;
            if entries.insert(j, n as u64).is_some() {
                return Err(HistogramError::Duplicate {
                    line,
                    multiplicity: j,
                });
            }
        }
        if entries.is_empty() {
            return Err(HistogramError::Empty);
        }
        entries.retain(|_, n| *n > 0);
        Ok(Self { entries })
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Self, HistogramError> {
        let text = std::str::from_utf8(bytes).map_err(|_| HistogramError::Encoding)?;
        Self::parse(text)
    }
}

/// Text serialization, readable by [`FrequencyHistogram::parse`].
impl fmt::Display for FrequencyHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, n) in self.iter() {
            writeln!(f, "{j}\t{n}")?;
        }
        Ok(())
    }
}

/// Reads a histogram from its text form.
pub fn load_histogram(bytes: &[u8]) -> Result<FrequencyHistogram, HistogramError> {
    FrequencyHistogram::parse_bytes(bytes)
}

/// Tail sums `S_r = sum_{j >= r} N_j` for `r = 1..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSums {
    values: Vec<f64>,
}

impl TailSums {
    /// Wraps precomputed tail sums. Returns `None` unless the values are
    /// finite, non-negative and non-increasing.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        let ok = values.iter().all(|v| v.is_finite() && *v >= 0.0)
            && values.windows(2).all(|w| w[0] >= w[1]);
        ok.then_some(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `S_r`, 1-based. Zero outside `1..=J`.
    pub fn get(&self, r: usize) -> f64 {
        if r == 0 {
            return 0.0;
        }
        self.values.get(r - 1).copied().unwrap_or(0.0)
    }

    /// Index of the last strictly positive entry (1-based), 0 if none.
    pub fn last_positive(&self) -> usize {
        self.values.iter().rposition(|&v| v > 0.0).map_or(0, |i| i + 1)
    }
}

/// Tail sums computed in integer arithmetic, converted to `f64` at the end.
pub fn tail_sums(hist: &FrequencyHistogram, len: usize) -> TailSums {
    assert!(len >= 1, "tail sums need at least one entry");
    let mut exact = vec![0u64; len];
    for (j, n) in hist.iter() {
        let top = (j as usize).min(len);
        for s in exact.iter_mut().take(top) {
            *s += n;
        }
    }
    TailSums {
        values: exact.into_iter().map(|s| s as f64).collect(),
    }
}

/// Seedable generator used by every stochastic routine in the crate.
///
/// The stream is ChaCha8 keyed by the 64-bit seed through
/// `SeedableRng::seed_from_u64`; independent sub-streams for parallel work
/// are selected with the ChaCha stream counter, so replicate `i` of seed `s`
/// always sees the same numbers no matter which thread runs it.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for replicate `index` of this seed.
    pub fn substream(&self, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index.wrapping_add(1));
        Self {
            seed: self.seed,
            rng,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Draws `n` trials over `weights` by sequential conditional binomials.
pub(crate) fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; weights.len()];
    let mut remaining = n;
    let mut mass: f64 = weights.iter().sum();
    for (i, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == weights.len() || w >= mass {
            out[i] = remaining;
            break;
        }
        let p = (w / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, p)
            .expect("probability in [0, 1]")
            .sample(rng);
        out[i] = k;
        remaining -= k;
        mass -= w;
    }
    out
}

/// Multinomial bootstrap of a histogram: `S_1` species are redistributed
/// over the observed multiplicities with probabilities proportional to
/// `N_j`.
pub fn bootstrap_resample(
    hist: &FrequencyHistogram,
    rng: &mut RandomSource,
) -> Result<FrequencyHistogram, HistogramError> {
    if hist.is_empty() {
        return Err(HistogramError::Empty);
    }
    let keys: Vec<u64> = hist.entries.keys().copied().collect();
    let weights: Vec<f64> = hist.entries.values().map(|&n| n as f64).collect();
    let draws = multinomial(rng.rng(), hist.species(), &weights);
    Ok(FrequencyHistogram::from_pairs(keys.into_iter().zip(draws)))
}

/// Thins every individual independently with retention probability
/// `fraction`. Species left with no individuals disappear.
///
/// Panics unless `0 < fraction <= 1`.
pub fn binomial_subsample(
    hist: &FrequencyHistogram,
    fraction: f64,
    rng: &mut RandomSource,
) -> FrequencyHistogram {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "fraction must lie in (0, 1], got {fraction}"
    );
    if fraction == 1.0 {
        return hist.clone();
    }
    let mut out = FrequencyHistogram::new();
    for (j, n) in hist.iter() {
        let thin = Binomial::new(j, fraction).expect("valid binomial");
        for _ in 0..n {
            let kept = thin.sample(rng.rng());
            if kept > 0 {
                out.add(kept, 1);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn hist(pairs: &[(u64, u64)]) -> FrequencyHistogram {
        FrequencyHistogram::from_pairs(pairs.iter().copied())
    }

    #[test]
    fn parses_shakespeare_head() {
        let h = load_histogram(b"1 14376\n2 4343").unwrap();
        assert_eq!(h, hist(&[(1, 14376), (2, 4343)]));
    }

    #[test]
    fn skips_comments_and_blanks() {
        let h = load_histogram(b"# c\n\n3 1").unwrap();
        assert_eq!(h, hist(&[(3, 1)]));
    }

    #[test]
    fn rejects_duplicates() {
        assert_eq!(
            load_histogram(b"1 2\n1 3"),
            Err(HistogramError::Duplicate {
                line: 2,
                multiplicity: 1
            })
        );
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            load_histogram(b"0 5"),
            Err(HistogramError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            load_histogram(b"1 -5"),
            Err(HistogramError::Malformed { .. })
        ));
        assert!(matches!(
            load_histogram(b"1 2.5"),
            Err(HistogramError::Malformed { .. })
        ));
        assert!(matches!(
            load_histogram(b"1 2 3"),
            Err(HistogramError::Malformed { .. })
        ));
        assert_eq!(load_histogram(b"# only\n\n"), Err(HistogramError::Empty));
        assert_eq!(load_histogram(b""), Err(HistogramError::Empty));
    }

    #[test]
    fn zero_counts_are_dropped() {
        let h = load_histogram(b"1 4\n2 0\n5 1").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.count(2), 0);
    }

    #[test]
    fn display_round_trips() {
        let h = hist(&[(1, 3), (2, 2), (7, 1)]);
        assert_eq!(load_histogram(h.to_string().as_bytes()).unwrap(), h);
    }

    #[test]
    fn tail_sum_examples() {
        let h = hist(&[(1, 3), (2, 2), (3, 1)]);
        assert_eq!(tail_sums(&h, 4).values(), &[6.0, 3.0, 1.0, 0.0]);
        assert_eq!(tail_sums(&hist(&[(5, 7)]), 5).values(), &[7.0; 5]);
    }

    #[test]
    fn from_tail_sums_inverts() {
        let s = [31534u64, 17158, 12815, 10523];
        let h = FrequencyHistogram::from_tail_sums(&s).unwrap();
        assert_eq!(h.count(1), 14376);
        assert_eq!(h.count(2), 4343);
        let back = tail_sums(&h, 4);
        assert_eq!(back.values(), &[31534.0, 17158.0, 12815.0, 10523.0]);
        assert!(FrequencyHistogram::from_tail_sums(&[1, 2]).is_none());
    }

    #[test]
    fn bootstrap_degenerate_single_category() {
        let h = hist(&[(1, 1)]);
        for seed in 0..20 {
            let b = bootstrap_resample(&h, &mut RandomSource::new(seed)).unwrap();
            assert_eq!(b, h);
        }
        assert_eq!(
            bootstrap_resample(&FrequencyHistogram::new(), &mut RandomSource::new(0)),
            Err(HistogramError::Empty)
        );
    }

    #[test]
    fn bootstrap_mean_matches_multinomial_moments() {
        // N_1* ~ Binomial(10000, 0.9): mean 9000, sd 30.
        let h = hist(&[(1, 9000), (2, 1000)]);
        let mut rng = RandomSource::new(11);
        let reps = 1000;
        let mean = (0..reps)
            .map(|_| bootstrap_resample(&h, &mut rng).unwrap().count(1) as f64)
            .sum::<f64>()
            / reps as f64;
        let se = (10000.0 * 0.9 * 0.1f64).sqrt() / (reps as f64).sqrt();
        assert!((mean - 9000.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn subsample_identity_at_one() {
        let h = hist(&[(1, 5), (4, 2)]);
        assert_eq!(binomial_subsample(&h, 1.0, &mut RandomSource::new(3)), h);
    }

    #[test]
    fn subsample_singletons_binomial() {
        let k = 400u64;
        let p = 0.3;
        let h = hist(&[(1, k)]);
        let mut rng = RandomSource::new(5);
        let reps = 400;
        let mean = (0..reps)
            .map(|_| binomial_subsample(&h, p, &mut rng).species() as f64)
            .sum::<f64>()
            / reps as f64;
        let se = (k as f64 * p * (1.0 - p)).sqrt() / (reps as f64).sqrt();
        assert!((mean - k as f64 * p).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn subsample_doubleton_distribution() {
        // Binomial(2, 0.5): lose the species 1/4, keep one read 1/2, keep both 1/4.
        let h = hist(&[(2, 1)]);
        let mut rng = RandomSource::new(9);
        let reps = 4000;
        let mut tally = [0usize; 3];
        for _ in 0..reps {
            let s = binomial_subsample(&h, 0.5, &mut rng);
            let k = if s.is_empty() { 0 } else { s.max_multiplicity() as usize };
            tally[k] += 1;
        }
        for (k, p) in [(0usize, 0.25), (1, 0.5), (2, 0.25)] {
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            let freq = tally[k] as f64 / reps as f64;
            assert!((freq - p).abs() < 3.0 * se, "k={k} freq={freq}");
        }
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let base = RandomSource::new(42);
        let a: u64 = base.substream(3).rng().random();
        let b: u64 = base.substream(3).rng().random();
        let c: u64 = base.substream(4).rng().random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn arb_hist() -> impl Strategy<Value = FrequencyHistogram> {
        proptest::collection::btree_map(1u64..60, 1u64..500, 1..20)
            .prop_map(|m| FrequencyHistogram::from_pairs(m))
    }

    proptest! {
        #[test]
        fn tail_sums_non_increasing_and_invertible(h in arb_hist()) {
            let len = h.max_multiplicity() as usize + 1;
            let s = tail_sums(&h, len);
            prop_assert!(s.values().windows(2).all(|w| w[0] >= w[1]));
            prop_assert_eq!(s.get(1), h.species() as f64);
            for j in 1..len {
                prop_assert_eq!((s.get(j) - s.get(j + 1)) as u64, h.count(j as u64));
            }
        }

        #[test]
        fn bootstrap_preserves_species(h in arb_hist(), seed in any::<u64>()) {
            let b = bootstrap_resample(&h, &mut RandomSource::new(seed)).unwrap();
            prop_assert_eq!(b.species(), h.species());
            prop_assert!(b.iter().all(|(j, _)| h.count(j) > 0));
        }
    }
}
