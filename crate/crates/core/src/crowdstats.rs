//! Wisdom-of-crowds accuracy analysis.
//!
//! Accuracy at subset size `k` is the probability that the aggregate of a
//! uniformly drawn `k`-subset (without replacement) of the response
//! population lands inside the acceptance range. When the number of subsets
//! is small it is computed exactly by enumeration; otherwise it is estimated
//! by seeded resampling.
//!
//! Values are sorted before any sampling, so results do not depend on the
//! order responses were collected in.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TRIALS: usize = 1_000;
pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 100_000;
pub const DEFAULT_EPSILON: f64 = 0.005;
pub const DEFAULT_GRID_POINTS: usize = 28;

// absorbs rounding in `max - epsilon`
const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no values to aggregate")]
    EmptyInput,
    #[error("subset size {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("trim fraction {0} is outside [0, 0.5)")]
    InvalidTrim(f64),
    #[error("curve has no points")]
    EmptyCurve,
    #[error("epsilon {0} must be a non-negative number")]
    InvalidEpsilon(f64),
    #[error("invalid acceptance range: lo={lo} true={true_value} hi={hi}")]
    InvalidRange { lo: f64, hi: f64, true_value: f64 },
    #[error("grid is empty")]
    EmptyGrid,
}

/// Closed interval of accepted answers around the true distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRange {
    pub lo: f64,
    pub hi: f64,
    pub true_value: f64,
}

impl Default for AcceptanceRange {
    fn default() -> Self {
        Self {
            lo: 1411.0,
            hi: 1441.0,
            true_value: 1426.0,
        }
    }
}

impl AcceptanceRange {
    pub fn new(lo: f64, hi: f64, true_value: f64) -> Result<Self, StatsError> {
        let r = Self { lo, hi, true_value };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.lo <= self.true_value && self.true_value <= self.hi {
            Ok(())
        } else {
            Err(StatsError::InvalidRange {
                lo: self.lo,
                hi: self.hi,
                true_value: self.true_value,
            })
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        in_range(v, self)
    }
}

/// Both ends inclusive.
pub fn in_range(v: f64, range: &AcceptanceRange) -> bool {
    range.lo <= v && v <= range.hi
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Aggregator {
    #[default]
    Mean,
    Median,
    /// Drops `floor(alpha * n)` values from each tail.
    TrimmedMean(f64),
}

impl Aggregator {
    pub fn validate(&self) -> Result<(), StatsError> {
        match *self {
            Aggregator::TrimmedMean(a) if !(0.0..0.5).contains(&a) => Err(StatsError::InvalidTrim(a)),
            _ => Ok(()),
        }
    }

    fn trim_count(&self, n: usize) -> usize {
        match *self {
            Aggregator::TrimmedMean(a) => (a * n as f64).floor() as usize,
            _ => 0,
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregator::Mean => f.write_str("mean"),
            Aggregator::Median => f.write_str("median"),
            Aggregator::TrimmedMean(a) => write!(f, "trimmed_mean({a})"),
        }
    }
}

impl FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "mean" => return Ok(Aggregator::Mean),
            "median" => return Ok(Aggregator::Median),
            _ => {}
        }
        let alpha = s
            .strip_prefix("trimmed_mean(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("unknown aggregator {s:?} (mean, median, trimmed_mean(alpha))"))?;
        let alpha: f64 = alpha
            .trim()
            .parse()
            .map_err(|_| format!("bad trim fraction in {s:?}"))?;
        let agg = Aggregator::TrimmedMean(alpha);
        agg.validate().map_err(|e| e.to_string())?;
        Ok(agg)
    }
}

impl Serialize for Aggregator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Aggregator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Mean, median (average of the middle pair for even counts) or symmetric
/// trimmed mean.
pub fn aggregate(values: &[f64], method: Aggregator) -> Result<f64, StatsError> {
    method.validate()?;
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let n = values.len();
    match method {
        Aggregator::Mean => Ok(values.iter().sum::<f64>() / n as f64),
        _ => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            Ok(sorted_aggregate(n, method, |j| sorted[j], |a, b| sorted[a..=b].iter().sum()))
        }
    }
}

/// Aggregates a sorted sequence of length `n` given rank access and a
/// rank-range sum (`sum(a, b)` covers ranks `a..=b`).
fn sorted_aggregate(
    n: usize,
    method: Aggregator,
    at: impl Fn(usize) -> f64,
    sum: impl Fn(usize, usize) -> f64,
) -> f64 {
    match method {
        Aggregator::Mean => sum(0, n - 1) / n as f64,
        Aggregator::Median => {
            if n % 2 == 1 {
                at(n / 2)
            } else {
                (at(n / 2 - 1) + at(n / 2)) / 2.0
            }
        }
        Aggregator::TrimmedMean(_) => {
            let g = method.trim_count(n);
            let kept = n - 2 * g;
            sum(g, n - g - 1) / kept as f64
        }
    }
}

/// Fraction of individual responses inside the range.
pub fn response_level_accuracy(values: &[f64], range: &AcceptanceRange) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().filter(|&&v| in_range(v, range)).count() as f64 / values.len() as f64)
}

/// `C(n, k)` if it does not exceed `cap`.
pub fn binomial_capped(n: usize, k: usize, cap: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let m = k.min(n - k) as u128;
    let n = n as u128;
    let mut c: u128 = 1;
    for i in 0..m {
        // C(n, i+1) = C(n, i) * (n - i) / (i + 1), exact at every step
        c = c.checked_mul(n - i)? / (i + 1);
        if c > cap as u128 {
            return None;
        }
    }
    Some(c as u64)
}

/// Knobs shared by [`accuracy_at_size`] and [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub trials: usize,
    pub seed: u64,
    pub aggregator: Aggregator,
    pub range: AcceptanceRange,
    /// Enumerate every subset when there are at most this many.
    pub exhaustive_cap: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            seed: 0,
            aggregator: Aggregator::Mean,
            range: AcceptanceRange::default(),
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeAccuracy {
    pub accuracy: f64,
    pub stderr: f64,
    pub exhaustive: bool,
    /// Subsets evaluated: all of them when exhaustive, else the trial count.
    pub trials: u64,
}

/// Sorted population with prefix sums, evaluating subsets given as sorted
/// rank lists, either directly or as the complement of a removed set.
struct Population {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
}

impl Population {
    fn new(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &sorted {
            acc += v;
            prefix.push(acc);
        }
        Self { sorted, prefix }
    }

    fn len(&self) -> usize {
        self.sorted.len()
    }

    /// Aggregate over the ranks in `chosen` (sorted ascending unless mean).
    fn chosen(&self, chosen: &[usize], method: Aggregator) -> f64 {
        let k = chosen.len();
        if method == Aggregator::Mean {
            return chosen.iter().map(|&i| self.sorted[i]).sum::<f64>() / k as f64;
        }
        sorted_aggregate(
            k,
            method,
            |j| self.sorted[chosen[j]],
            |a, b| chosen[a..=b].iter().map(|&i| self.sorted[i]).sum(),
        )
    }

    /// Aggregate over everything except the ranks in `removed` (sorted
    /// ascending unless mean).
    fn complement(&self, removed: &[usize], method: Aggregator) -> f64 {
        let n = self.len();
        let k = n - removed.len();
        if method == Aggregator::Mean {
            let gone: f64 = removed.iter().map(|&i| self.sorted[i]).sum();
            return (self.prefix[n] - gone) / k as f64;
        }
        // rank j among survivors -> position in `sorted`
        let position = |j: usize| {
            let mut p = j;
            for &r in removed {
                if r <= p {
                    p += 1;
                } else {
                    break;
                }
            }
            p
        };
        sorted_aggregate(
            k,
            method,
            |j| self.sorted[position(j)],
            |a, b| {
                let (lo, hi) = (position(a), position(b));
                let gone: f64 = removed
                    .iter()
                    .filter(|&&r| lo <= r && r <= hi)
                    .map(|&r| self.sorted[r])
                    .sum();
                self.prefix[hi + 1] - self.prefix[lo] - gone
            },
        )
    }

    /// Aggregate of a subset of size `k` described by `picked` ranks: the
    /// subset itself when `picked.len() == k`, otherwise its complement.
    fn evaluate(&self, picked: &mut [usize], k: usize, method: Aggregator) -> f64 {
        if method != Aggregator::Mean {
            picked.sort_unstable();
        }
        if picked.len() == k {
            self.chosen(picked, method)
        } else {
            self.complement(picked, method)
        }
    }
}

/// Advances `combo` (strictly increasing ranks below `n`) to the next
/// combination in lexicographic order; false when exhausted.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let m = combo.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if combo[i] < n - m + i {
            combo[i] += 1;
            for j in i + 1..m {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn point_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

fn accuracy_on(pop: &Population, k: usize, opts: &SamplingOptions) -> Result<SizeAccuracy, StatsError> {
    let n = pop.len();
    if k == 0 || k > n {
        return Err(StatsError::InvalidK { k, n });
    }
    if opts.trials == 0 {
        return Err(StatsError::ZeroTrials);
    }
    opts.aggregator.validate()?;
    let m = k.min(n - k);

    if let Some(total) = binomial_capped(n, k, opts.exhaustive_cap) {
        let mut combo: Vec<usize> = (0..m).collect();
        let mut scratch = combo.clone();
        let mut hits: u64 = 0;
        loop {
            scratch.copy_from_slice(&combo);
            if opts.range.contains(pop.evaluate(&mut scratch, k, opts.aggregator)) {
                hits += 1;
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
        return Ok(SizeAccuracy {
            accuracy: hits as f64 / total as f64,
            stderr: 0.0,
            exhaustive: true,
            trials: total,
        });
    }

    let mut rng = point_rng(opts.seed, k);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut scratch = vec![0usize; m];
    let mut hits: u64 = 0;
    for _ in 0..opts.trials {
        // partial Fisher-Yates: perm[..m] becomes a uniform m-subset
        for i in 0..m {
            let j = rng.random_range(i..n);
            perm.swap(i, j);
        }
        scratch.copy_from_slice(&perm[..m]);
        if opts.range.contains(pop.evaluate(&mut scratch, k, opts.aggregator)) {
            hits += 1;
        }
    }
    let p = hits as f64 / opts.trials as f64;
    Ok(SizeAccuracy {
        accuracy: p,
        stderr: (p * (1.0 - p) / opts.trials as f64).sqrt(),
        exhaustive: false,
        trials: opts.trials as u64,
    })
}

/// Accuracy of `k`-subset aggregates; exact when `C(n, k)` is at most
/// `opts.exhaustive_cap`, otherwise estimated from `opts.trials` draws.
pub fn accuracy_at_size(values: &[f64], k: usize, opts: &SamplingOptions) -> Result<SizeAccuracy, StatsError> {
    accuracy_on(&Population::new(values), k, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub accuracy: f64,
    pub trials: u64,
    pub stderr: f64,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub aggregator: Aggregator,
    pub seed: u64,
    pub population: usize,
    pub range: AcceptanceRange,
    pub trials: usize,
    pub exhaustive_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub points: Vec<CurvePoint>,
    pub meta: CurveMeta,
}

impl AccuracyCurve {
    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.accuracy)
    }
}

/// `points` evenly spaced multiples of `floor(n / points)`; every size
/// `1..=n` when the population is smaller than `points`.
pub fn default_grid(n: usize) -> Vec<usize> {
    grid_with_points(n, DEFAULT_GRID_POINTS)
}

pub fn grid_with_points(n: usize, points: usize) -> Vec<usize> {
    let step = n.checked_div(points).unwrap_or(0);
    if step == 0 {
        return (1..=n).collect();
    }
    (1..=points).map(|m| step * m).collect()
}

/// One curve point per grid size. Each point draws from its own stream
/// derived from `(seed, k)`, so points are evaluated in parallel without
/// affecting results.
pub fn sweep(values: &[f64], grid: &[usize], opts: &SamplingOptions) -> Result<AccuracyCurve, StatsError> {
    if grid.is_empty() {
        return Err(StatsError::EmptyGrid);
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let pop = Population::new(values);
    let points = grid
        .par_iter()
        .map(|&k| {
            accuracy_on(&pop, k, opts).map(|a| CurvePoint {
                k,
                accuracy: a.accuracy,
                trials: a.trials,
                stderr: a.stderr,
                exhaustive: a.exhaustive,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AccuracyCurve {
        points,
        meta: CurveMeta {
            aggregator: opts.aggregator,
            seed: opts.seed,
            population: values.len(),
            range: opts.range,
            trials: opts.trials,
            exhaustive_cap: opts.exhaustive_cap,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSubsetResult {
    pub k_star: usize,
    pub accuracy_at_k_star: f64,
    pub max_accuracy: f64,
    pub epsilon: f64,
}

/// Smallest grid size whose accuracy is within `epsilon` of the maximum.
pub fn find_optimal(curve: &AccuracyCurve, epsilon: f64) -> Result<OptimalSubsetResult, StatsError> {
    if !(epsilon >= 0.0) {
        return Err(StatsError::InvalidEpsilon(epsilon));
    }
    let max_accuracy = curve
        .points
        .iter()
        .map(|p| p.accuracy)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))))
        .ok_or(StatsError::EmptyCurve)?;
    let threshold = max_accuracy - epsilon - THRESHOLD_SLACK;
    let best = curve
        .points
        .iter()
        .filter(|p| p.accuracy >= threshold)
        .min_by_key(|p| p.k)
        .expect("the maximum itself meets the threshold");
    Ok(OptimalSubsetResult {
        k_star: best.k,
        accuracy_at_k_star: best.accuracy,
        max_accuracy,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SamplingOptions {
        SamplingOptions::default()
    }

    fn curve(points: &[(usize, f64)]) -> AccuracyCurve {
        AccuracyCurve {
            points: points
                .iter()
                .map(|&(k, accuracy)| CurvePoint {
                    k,
                    accuracy,
                    trials: 1,
                    stderr: 0.0,
                    exhaustive: true,
                })
                .collect(),
            meta: CurveMeta {
                aggregator: Aggregator::Mean,
                seed: 0,
                population: 40,
                range: AcceptanceRange::default(),
                trials: 1,
                exhaustive_cap: 0,
            },
        }
    }

    #[test]
    fn range_is_closed() {
        let r = AcceptanceRange::default();
        assert!(in_range(1426.0, &r));
        assert!(in_range(1411.0, &r));
        assert!(in_range(1441.0, &r));
        assert!(!in_range(1410.99, &r));
        assert!(!in_range(1441.01, &r));
        assert!(AcceptanceRange::new(1500.0, 1600.0, 1426.0).is_err());
    }

    #[test]
    fn aggregates() {
        assert_eq!(aggregate(&[1420.0, 1430.0], Aggregator::Mean).unwrap(), 1425.0);
        assert_eq!(aggregate(&[1420.0, 1e6, 1426.0], Aggregator::Median).unwrap(), 1426.0);
        assert_eq!(aggregate(&[1.0, 4.0, 2.0, 3.0], Aggregator::Median).unwrap(), 2.5);
        assert_eq!(
            aggregate(&[1000.0, 1420.0, 1430.0, 9999.0], Aggregator::TrimmedMean(0.25)).unwrap(),
            1425.0
        );
        assert_eq!(aggregate(&[7.0], Aggregator::TrimmedMean(0.49)).unwrap(), 7.0);
        assert_eq!(aggregate(&[], Aggregator::Mean), Err(StatsError::EmptyInput));
        assert_eq!(
            aggregate(&[1.0], Aggregator::TrimmedMean(0.5)),
            Err(StatsError::InvalidTrim(0.5))
        );
    }

    #[test]
    fn aggregator_text_round_trip() {
        for a in [Aggregator::Mean, Aggregator::Median, Aggregator::TrimmedMean(0.1)] {
            assert_eq!(a.to_string().parse::<Aggregator>().unwrap(), a);
        }
        assert!("trimmed_mean(0.7)".parse::<Aggregator>().is_err());
        assert!("mode".parse::<Aggregator>().is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_capped(12, 6, u64::MAX), Some(924));
        assert_eq!(binomial_capped(5, 0, 10), Some(1));
        assert_eq!(binomial_capped(5, 5, 10), Some(1));
        assert_eq!(binomial_capped(2000, 900, DEFAULT_EXHAUSTIVE_CAP), None);
        assert_eq!(binomial_capped(100_000, 99_999, DEFAULT_EXHAUSTIVE_CAP), Some(100_000));
    }

    #[test]
    fn degenerate_population_is_always_accurate() {
        let values = vec![1426.0; 10];
        for k in 1..=10 {
            let a = accuracy_at_size(&values, k, &opts()).unwrap();
            assert_eq!(a.accuracy, 1.0);
        }
    }

    #[test]
    fn three_value_examples() {
        let values = [1420.0, 1430.0, 1500.0];
        let a = accuracy_at_size(&values, 2, &opts()).unwrap();
        assert!((a.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert!(a.exhaustive);
        assert_eq!(a.stderr, 0.0);
        assert_eq!(a.trials, 3);
        assert_eq!(accuracy_at_size(&values, 3, &opts()).unwrap().accuracy, 0.0);
        assert_eq!(
            accuracy_at_size(&values, 4, &opts()),
            Err(StatsError::InvalidK { k: 4, n: 3 })
        );
        assert_eq!(
            accuracy_at_size(&values, 0, &opts()),
            Err(StatsError::InvalidK { k: 0, n: 3 })
        );
    }

    #[test]
    fn complement_paths_match_direct_aggregation() {
        let values: Vec<f64> = (0..9).map(|i| 1400.0 + (i * i) as f64 * 1.7).collect();
        let pop = Population::new(&values);
        for method in [Aggregator::Mean, Aggregator::Median, Aggregator::TrimmedMean(0.2)] {
            let removed = [1usize, 4, 7];
            let kept: Vec<f64> = (0..9)
                .filter(|i| !removed.contains(i))
                .map(|i| pop.sorted[i])
                .collect();
            let want = aggregate(&kept, method).unwrap();
            let got = pop.complement(&removed, method);
            assert!((want - got).abs() < 1e-9, "{method}: {want} vs {got}");
            let chosen = [0usize, 2, 3, 5, 6, 8];
            let direct: Vec<f64> = chosen.iter().map(|&i| pop.sorted[i]).collect();
            assert!((aggregate(&direct, method).unwrap() - pop.chosen(&chosen, method)).abs() < 1e-9);
        }
    }

    #[test]
    fn full_population_point_is_exact() {
        let values = [1400.0, 1430.0, 1460.0, 1390.0, 1500.0];
        let a = accuracy_at_size(&values, 5, &opts()).unwrap();
        let expected = in_range(aggregate(&values, Aggregator::Mean).unwrap(), &AcceptanceRange::default());
        assert_eq!(a.accuracy, if expected { 1.0 } else { 0.0 });
        assert!(a.exhaustive);
    }

    #[test]
    fn monte_carlo_reports_binomial_stderr() {
        let values: Vec<f64> = (0..40).map(|i| 1380.0 + 2.5 * i as f64).collect();
        let o = SamplingOptions {
            exhaustive_cap: 0,
            trials: 400,
            seed: 3,
            ..opts()
        };
        let a = accuracy_at_size(&values, 10, &o).unwrap();
        assert!(!a.exhaustive);
        let p = a.accuracy;
        assert_eq!(a.stderr, (p * (1.0 - p) / 400.0).sqrt());
        assert_eq!(a, accuracy_at_size(&values, 10, &o).unwrap());
    }

    #[test]
    fn default_grid_shapes() {
        let g = default_grid(15_064);
        assert_eq!(g.len(), 28);
        assert_eq!(g[0], 538);
        assert_eq!(g[1], 1076);
        assert_eq!(g[27], 15_064);
        assert!(g.iter().all(|k| k % 538 == 0));
        assert_eq!(default_grid(10), (1..=10).collect::<Vec<_>>());
        assert_eq!(default_grid(2000)[0], 71);
        assert!(default_grid(0).is_empty());
    }

    #[test]
    fn single_full_subset_grid() {
        let values: Vec<f64> = (0..30).map(|i| 1410.0 + i as f64).collect();
        let c = sweep(&values, &[30], &opts()).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!(c.points[0].accuracy == 0.0 || c.points[0].accuracy == 1.0);
        assert_eq!(sweep(&values, &[], &opts()), Err(StatsError::EmptyGrid));
        assert!(matches!(sweep(&values, &[31], &opts()), Err(StatsError::InvalidK { .. })));
    }

    #[test]
    fn optimal_subset_examples() {
        let c = curve(&[(10, 0.50), (20, 0.90), (30, 0.91), (40, 0.91)]);
        assert_eq!(find_optimal(&c, 0.01).unwrap().k_star, 20);
        let strict = find_optimal(&c, 0.0).unwrap();
        assert_eq!(strict.k_star, 30);
        assert_eq!(strict.max_accuracy, 0.91);
        let single = find_optimal(&curve(&[(538, 0.37)]), 0.005).unwrap();
        assert_eq!(single.k_star, 538);
        assert_eq!(single.accuracy_at_k_star, 0.37);
        assert_eq!(find_optimal(&curve(&[]), 0.01), Err(StatsError::EmptyCurve));
        assert!(find_optimal(&c, -1.0).is_err());
    }

    #[test]
    fn response_level() {
        let r = AcceptanceRange::default();
        assert_eq!(response_level_accuracy(&[1426.0, 1000.0], &r), Some(0.5));
        assert_eq!(response_level_accuracy(&[], &r), None);
    }
}
