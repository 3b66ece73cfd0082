//! Evaluation quantities computed from completion records.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::engine::CompletionRecord;
use crate::scalar::Scalar;
use crate::workload::{JobId, Provenance};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no completion records")]
    Empty,
    #[error("{records} records cannot fill {bins} bins; use at most {records} bins")]
    TooFewForBins { records: usize, bins: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance; correlation undefined")]
    ZeroVariance,
    #[error("record sets cover different jobs; comparison is not paired")]
    Unpaired,
}

type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Mean sojourn time.
pub fn mean_sojourn<T: Scalar>(records: &[CompletionRecord<T>]) -> Result<T> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: T = records.iter().map(|r| r.completion - r.arrival).sum();
    Ok(total / T::from_count(records.len()))
}

/// Per-job slowdown (sojourn / size), in record order.
pub fn slowdowns<T: Scalar>(records: &[CompletionRecord<T>]) -> Vec<T> {
    records.iter().map(|r| r.sojourn / r.size).collect()
}

/// One run, summarized.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary<T> {
    pub policy: String,
    pub provenance: Provenance,
    pub njobs: usize,
    pub mst: T,
    pub slowdowns: Vec<T>,
}

impl<T: Scalar> RunSummary<T> {
    pub fn new(
        policy: impl Into<String>,
        provenance: Provenance,
        records: &[CompletionRecord<T>],
    ) -> Result<Self> {
        Ok(RunSummary {
            policy: policy.into(),
            provenance,
            njobs: records.len(),
            mst: mean_sojourn(records)?,
            slowdowns: slowdowns(records),
        })
    }
}

/// Mean size and mean slowdown of one size class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlowdownBin<T> {
    pub count: usize,
    pub mean_size: T,
    pub mean_slowdown: T,
}

/// Mean conditional slowdown: jobs sorted by size, split into classes of
/// (nearly) equal count.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedSlowdown<T> {
    pub bins: Vec<SlowdownBin<T>>,
}

/// Sorts records by size and splits them into `nbins` contiguous classes;
/// with `n = q * nbins + r` the first `r` classes hold `q + 1` jobs.
pub fn mean_conditional_slowdown<T: Scalar>(
    records: &[CompletionRecord<T>],
    nbins: usize,
) -> Result<BinnedSlowdown<T>> {
    if nbins == 0 || records.len() < nbins {
        return Err(MetricsError::TooFewForBins {
            records: records.len(),
            bins: nbins,
        });
    }
    let mut pairs: Vec<(T, T)> = records.iter().map(|r| (r.size, r.sojourn / r.size)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN size"));
    let (q, r) = (pairs.len() / nbins, pairs.len() % nbins);
    let mut bins = Vec::with_capacity(nbins);
    let mut start = 0;
    for b in 0..nbins {
        let count = q + usize::from(b < r);
        let chunk = &pairs[start..start + count];
        start += count;
        let n = T::from_count(count);
        bins.push(SlowdownBin {
            count,
            mean_size: chunk.iter().map(|p| p.0).sum::<T>() / n,
            mean_slowdown: chunk.iter().map(|p| p.1).sum::<T>() / n,
        });
    }
    Ok(BinnedSlowdown { bins })
}

/// Empirical distribution function of a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf<T> {
    sorted: Vec<T>,
}

impl<T: Scalar> EmpiricalCdf<T> {
    pub fn new(mut values: Vec<T>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).expect("NaN value"));
        EmpiricalCdf { sorted: values }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `(value, i / n)` for the i-th smallest value, 1-based.
    pub fn points(&self) -> Vec<(T, T)> {
        let n = T::from_count(self.sorted.len());
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, T::from_count(i + 1) / n))
            .collect()
    }

    /// Fraction of values strictly above `threshold`.
    pub fn fraction_above(&self, threshold: T) -> T {
        if self.sorted.is_empty() {
            return T::zero();
        }
        let at_or_below = self.sorted.partition_point(|&v| v <= threshold);
        T::from_count(self.sorted.len() - at_or_below) / T::from_count(self.sorted.len())
    }
}

/// Sample Pearson correlation on raw values.
pub fn pearson_correlation<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(MetricsError::ZeroVariance);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

/// Mean and 95% half-width under the normal approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceInterval<T> {
    pub mean: T,
    pub halfwidth: T,
}

impl<T: Scalar> ConfidenceInterval<T> {
    pub fn lower(&self) -> T {
        self.mean - self.halfwidth
    }

    pub fn upper(&self) -> T {
        self.mean + self.halfwidth
    }
}

/// `mean ± 1.96 s / sqrt(n)` with `s` the sample standard deviation.
pub fn ci95<T: Scalar>(samples: &[T]) -> Result<ConfidenceInterval<T>> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = T::from_count(samples.len());
    let mean = samples.iter().copied().sum::<T>() / n;
    let ss: T = samples.iter().map(|&x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (n - T::one())).sqrt();
    Ok(ConfidenceInterval {
        mean,
        halfwidth: T::of(1.96) * sd / n.sqrt(),
    })
}

/// MST of `policy` divided by MST of `baseline`; both must cover the same
/// jobs.
pub fn normalized_mst<T: Scalar>(
    policy: &[CompletionRecord<T>],
    baseline: &[CompletionRecord<T>],
) -> Result<T> {
    let ids = |rs: &[CompletionRecord<T>]| rs.iter().map(|r| r.id).collect::<BTreeSet<JobId>>();
    if policy.len() != baseline.len() || ids(policy) != ids(baseline) {
        return Err(MetricsError::Unpaired);
    }
    Ok(mean_sojourn(policy)? / mean_sojourn(baseline)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rec(id: usize, arrival: f64, size: f64, completion: f64) -> CompletionRecord<f64> {
        CompletionRecord {
            id: JobId(id),
            arrival,
            size,
            estimate: size,
            completion,
            sojourn: completion - arrival,
            slowdown: (completion - arrival) / size,
        }
    }

    #[test]
    fn mst_cases() {
        assert_eq!(mean_sojourn(&[rec(0, 0.0, 5.0, 5.0)]).unwrap(), 5.0);
        assert_eq!(
            mean_sojourn(&[rec(0, 1.0, 1.0, 3.0), rec(1, 0.0, 1.0, 4.0)]).unwrap(),
            3.0
        );
        // Processor-sharing pair: completions 4 and 6.
        let ps = [rec(1, 0.0, 2.0, 4.0), rec(0, 0.0, 4.0, 6.0)];
        assert_eq!(mean_sojourn(&ps).unwrap(), 5.0);
        assert_eq!(mean_sojourn::<f64>(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn slowdown_cases() {
        assert_eq!(slowdowns(&[rec(0, 0.0, 2.0, 2.0)]), vec![1.0]);
        assert_eq!(slowdowns(&[rec(0, 0.0, 2.0, 6.0)]), vec![3.0]);
        let ps = [rec(0, 0.0, 4.0, 4.0), rec(1, 0.0, 2.0, 6.0)];
        assert_eq!(slowdowns(&ps), vec![1.0, 3.0]);
    }

    #[test]
    fn conditional_slowdown_identical_jobs() {
        let records: Vec<_> = (0..200).map(|i| rec(i, 0.0, 2.0, 2.0)).collect();
        let b = mean_conditional_slowdown(&records, 100).unwrap();
        assert_eq!(b.bins.len(), 100);
        assert!(b.bins.iter().all(|x| x.count == 2 && x.mean_slowdown == 1.0 && x.mean_size == 2.0));
    }

    #[test]
    fn conditional_slowdown_one_per_bin() {
        let records: Vec<_> = (0..100)
            .map(|i| rec(i, 0.0, (100 - i) as f64, 3.0 * (100 - i) as f64))
            .collect();
        let b = mean_conditional_slowdown(&records, 100).unwrap();
        for (k, bin) in b.bins.iter().enumerate() {
            assert_eq!(bin.count, 1);
            assert_eq!(bin.mean_size, (k + 1) as f64);
            assert_eq!(bin.mean_slowdown, 3.0);
        }
    }

    #[test]
    fn conditional_slowdown_remainder_goes_first() {
        let records: Vec<_> = (0..101).map(|i| rec(i, 0.0, 1.0 + i as f64, 2.0 + i as f64)).collect();
        let b = mean_conditional_slowdown(&records, 100).unwrap();
        assert_eq!(b.bins[0].count, 2);
        assert!(b.bins[1..].iter().all(|x| x.count == 1));
        assert_eq!(b.bins[0].mean_size, 1.5);
        assert!(matches!(
            mean_conditional_slowdown(&records[..50], 100),
            Err(MetricsError::TooFewForBins { records: 50, bins: 100 })
        ));
    }

    #[test]
    fn cdf_cases() {
        let cdf = EmpiricalCdf::new(vec![3.0, 1.0, 1.0]);
        assert_relative_eq!(cdf.fraction_above(2.0), 1.0 / 3.0);
        assert_eq!(cdf.points().last(), Some(&(3.0, 1.0)));
        assert!(EmpiricalCdf::<f64>::new(vec![]).points().is_empty());
        assert_eq!(EmpiricalCdf::new(vec![1.0, 2.0, 3.0, 4.0]).fraction_above(100.0), 0.0);
    }

    #[test]
    fn pearson_cases() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        assert_relative_eq!(pearson_correlation(&xs, &xs).unwrap(), 1.0);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_relative_eq!(pearson_correlation(&xs, &neg).unwrap(), -1.0);
        assert_eq!(
            pearson_correlation(&xs, &[1.0; 4]),
            Err(MetricsError::ZeroVariance)
        );
        assert!(pearson_correlation(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ci_cases() {
        let ci = ci95(&[3.0; 5]).unwrap();
        assert_eq!((ci.mean, ci.halfwidth), (3.0, 0.0));
        let ci = ci95(&[0.0, 2.0]).unwrap();
        assert_relative_eq!(ci.mean, 1.0);
        assert_relative_eq!(ci.halfwidth, 1.96, epsilon = 1e-12);
        assert!(ci95(&[1.0]).is_err());
    }

    #[test]
    fn ci_of_standard_normal_draws() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ci = ci95(&xs).unwrap();
        assert!((ci.halfwidth - 0.0196).abs() < 0.001, "{}", ci.halfwidth);
    }

    #[test]
    fn normalized_cases() {
        let a = [rec(0, 0.0, 1.0, 6.0)];
        let b = [rec(0, 0.0, 1.0, 3.0)];
        assert_eq!(normalized_mst(&a, &a).unwrap(), 1.0);
        assert_eq!(normalized_mst(&a, &b).unwrap(), 2.0);
        assert_eq!(
            normalized_mst(&a, &[rec(1, 0.0, 1.0, 3.0)]),
            Err(MetricsError::Unpaired)
        );
    }

    #[test]
    fn run_summary_fields() {
        let records = [rec(0, 0.0, 2.0, 2.0), rec(1, 0.0, 2.0, 6.0)];
        let s = RunSummary::new("ps", Provenance::Trace { path: "x".into(), target_load: None }, &records)
            .unwrap();
        assert_eq!(s.mst, 4.0);
        assert_eq!(s.slowdowns, vec![1.0, 3.0]);
        assert_eq!(s.njobs, 2);
    }
}
