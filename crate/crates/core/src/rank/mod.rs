//! Entropy metrics, validation order and ranking analyses.

pub mod simulation;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assemble::{CandidateStatus, PatchCandidate};
use crate::model::GenerationResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("entropy of an empty generation is undefined")]
pub struct EmptyGeneration;

/// `-(1/n) * sum(log p)` over the generated tokens.
pub fn mean_entropy(gen: &GenerationResult) -> Result<f64, EmptyGeneration> {
    let n = gen.tokens.len();
    if n == 0 {
        return Err(EmptyGeneration);
    }
    Ok(sum_entropy(gen)? / n as f64)
}

/// `-sum(log p)` over the generated tokens.
pub fn sum_entropy(gen: &GenerationResult) -> Result<f64, EmptyGeneration> {
    if gen.tokens.is_empty() {
        return Err(EmptyGeneration);
    }
    Ok(-gen.logprobs().sum::<f64>())
}

/// Fills both entropy fields; left empty for empty generations.
pub fn score_entropies(candidate: &mut PatchCandidate) {
    candidate.mean_entropy = mean_entropy(&candidate.generated).ok();
    candidate.sum_entropy = sum_entropy(&candidate.generated).ok();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    MeanEntropy,
    SumEntropy,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::Random,
        StrategyKind::MeanEntropy,
        StrategyKind::SumEntropy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::MeanEntropy => "mean_entropy",
            StrategyKind::SumEntropy => "sum_entropy",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown ranking strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingStrategy {
    pub kind: StrategyKind,
    /// Used by the random strategy only.
    pub seed: u64,
}

impl RankingStrategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        RankingStrategy { kind, seed }
    }

    /// Same strategy with the seed mixed with `key`, so each bug gets its own
    /// shuffle.
    pub fn keyed(&self, key: &str) -> Self {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in key.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        RankingStrategy {
            kind: self.kind,
            seed: self.seed ^ h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RankError {
    #[error("candidate {sample_index} has no {kind} value")]
    MissingEntropy { sample_index: usize, kind: StrategyKind },
}

/// Orders candidates for validation: ascending entropy with ties kept in
/// sample order, or a seeded shuffle of the sample order.
pub fn rank_patches(
    mut candidates: Vec<PatchCandidate>,
    strategy: RankingStrategy,
) -> Result<Vec<PatchCandidate>, RankError> {
    candidates.sort_by_key(|c| c.sample_index);
    let key = |c: &PatchCandidate| match strategy.kind {
        StrategyKind::MeanEntropy => c.mean_entropy,
        StrategyKind::SumEntropy => c.sum_entropy,
        StrategyKind::Random => Some(0.0),
    };
    if let Some(c) = candidates.iter().find(|c| key(c).is_none()) {
        return Err(RankError::MissingEntropy {
            sample_index: c.sample_index,
            kind: strategy.kind,
        });
    }
    match strategy.kind {
        StrategyKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
            candidates.shuffle(&mut rng);
        }
        _ => candidates.sort_by(|a, b| {
            key(a)
                .expect("checked")
                .total_cmp(&key(b).expect("checked"))
        }),
    }
    Ok(candidates)
}

/// Sample indices in validation order: candidates with an entropy value
/// ranked by `strategy`, then empty generations in sample order.
pub fn validation_order(candidates: &[PatchCandidate], strategy: RankingStrategy) -> Vec<usize> {
    let (scored, unscored): (Vec<PatchCandidate>, Vec<PatchCandidate>) = candidates
        .iter()
        .cloned()
        .partition(|c| c.mean_entropy.is_some() && c.sum_entropy.is_some());
    let ranked = rank_patches(scored, strategy).expect("partitioned on entropy presence");
    let mut tail: Vec<usize> = unscored.iter().map(|c| c.sample_index).collect();
    tail.sort_unstable();
    ranked.iter().map(|c| c.sample_index).chain(tail).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("the oracle has no entry for bug {0}")]
pub struct MissingOracle(pub String);

/// For every budget `k`, the number of bugs whose first `k` ranked candidates
/// include a correct one. Budgets larger than a bug's list are clamped.
pub fn budget_curve(
    rankings: &[(String, Vec<usize>)],
    oracle: &HashMap<String, HashSet<usize>>,
    budgets: &[usize],
) -> Result<Vec<(usize, usize)>, MissingOracle> {
    let mut first_hit: Vec<Option<usize>> = Vec::with_capacity(rankings.len());
    for (bug, order) in rankings {
        let correct = oracle.get(bug).ok_or_else(|| MissingOracle(bug.clone()))?;
        first_hit.push(order.iter().position(|i| correct.contains(i)).map(|p| p + 1));
    }
    Ok(budgets
        .iter()
        .map(|&k| {
            let fixed = first_hit.iter().filter(|h| h.is_some_and(|h| h <= k)).count();
            (k, fixed)
        })
        .collect())
}

/// 1-based position of the first correct candidate, per bug that has one.
pub fn first_correct_ranks(
    rankings: &[(String, Vec<usize>)],
    oracle: &HashMap<String, HashSet<usize>>,
) -> Vec<usize> {
    rankings
        .iter()
        .filter_map(|(bug, order)| {
            let correct = oracle.get(bug)?;
            order.iter().position(|i| correct.contains(i)).map(|p| p + 1)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntropyGroup {
    /// Correct patches.
    C,
    /// Plausible but not known to be correct.
    P,
    /// Everything else.
    NP,
}

impl EntropyGroup {
    pub fn of(status: CandidateStatus) -> Self {
        match status {
            CandidateStatus::Correct => EntropyGroup::C,
            CandidateStatus::Plausible | CandidateStatus::NeedsReview => EntropyGroup::P,
            _ => EntropyGroup::NP,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntropyGroup::C => "C",
            EntropyGroup::P => "P",
            EntropyGroup::NP => "NP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntropy {
    pub count: usize,
    pub mean_entropy: f64,
    pub sum_entropy: f64,
}

/// Average entropies per group. Groups with no scored candidates are absent.
pub type EntropyTable = BTreeMap<EntropyGroup, GroupEntropy>;

pub fn entropy_report(candidates: &[PatchCandidate]) -> EntropyTable {
    let mut acc: BTreeMap<EntropyGroup, (usize, f64, f64)> = BTreeMap::new();
    for c in candidates {
        let (Some(mean), Some(sum)) = (c.mean_entropy, c.sum_entropy) else {
            continue;
        };
        let entry = acc.entry(EntropyGroup::of(c.status)).or_default();
        entry.0 += 1;
        entry.1 += mean;
        entry.2 += sum;
    }
    acc.into_iter()
        .map(|(g, (n, mean, sum))| {
            (
                g,
                GroupEntropy {
                    count: n,
                    mean_entropy: mean / n as f64,
                    sum_entropy: sum / n as f64,
                },
            )
        })
        .collect()
}

/// Sum-entropy threshold separating correct from plausible-but-incorrect
/// patches. The score is `threshold - sum_entropy`: positive values lean
/// towards correct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessScorer {
    pub threshold: f64,
}

impl CorrectnessScorer {
    /// Picks the threshold maximising true-positive rate minus false-positive
    /// rate over labelled `(sum_entropy, is_correct)` pairs. Candidate
    /// thresholds are midpoints between consecutive distinct values.
    pub fn calibrate(samples: &[(f64, bool)]) -> Option<Self> {
        let positives = samples.iter().filter(|s| s.1).count();
        let negatives = samples.len() - positives;
        if positives == 0 || negatives == 0 {
            return None;
        }
        let mut sorted: Vec<(f64, bool)> = samples.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = (f64::NEG_INFINITY, sorted[0].0 - 1.0);
        let (mut tp, mut fp) = (0usize, 0usize);
        for i in 0..sorted.len() {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            let next = sorted.get(i + 1).map(|s| s.0);
            if next == Some(sorted[i].0) {
                continue;
            }
            let threshold = match next {
                Some(n) => (sorted[i].0 + n) / 2.0,
                None => sorted[i].0,
            };
            let j = tp as f64 / positives as f64 - fp as f64 / negatives as f64;
            if j > best.0 {
                best = (j, threshold);
            }
        }
        Some(CorrectnessScorer { threshold: best.1 })
    }

    /// Threshold calibrated on the built-in synthetic held-out set.
    pub fn default_calibrated() -> Self {
        let samples = simulation::calibration_samples(simulation::CALIBRATION_SEED);
        CorrectnessScorer::calibrate(&samples).expect("calibration set has both classes")
    }

    pub fn score(&self, candidate: &PatchCandidate) -> Option<f64> {
        candidate.sum_entropy.map(|s| self.threshold - s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::SampleKey;
    use crate::model::{FinishReason, Token};
    use crate::prompt::RepairSetting;
    use proptest::prelude::*;

    fn gen(lps: &[f64]) -> GenerationResult {
        GenerationResult::from_tokens(
            lps.iter()
                .map(|&l| Token {
                    text: "t".into(),
                    logprob: l,
                })
                .collect(),
            FinishReason::Stop,
        )
    }

    fn cand(i: usize, lps: &[f64]) -> PatchCandidate {
        let mut c = PatchCandidate::new(
            SampleKey {
                bug_id: "b".into(),
                setting: RepairSetting::Infill,
                sample_index: i,
            },
            gen(lps),
            format!("f{i}"),
        );
        score_entropies(&mut c);
        c
    }

    fn order(cs: &[PatchCandidate]) -> Vec<usize> {
        cs.iter().map(|c| c.sample_index).collect()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(mean_entropy(&gen(&[0.0])), Ok(0.0));
        assert_eq!(mean_entropy(&gen(&[-0.5, -1.5])), Ok(1.0));
        assert_eq!(sum_entropy(&gen(&[-0.5, -1.5])), Ok(2.0));
        assert_eq!(sum_entropy(&gen(&[0.0; 7])), Ok(0.0));
        assert_eq!(mean_entropy(&gen(&[])), Err(EmptyGeneration));
        assert!(sum_entropy(&gen(&[-0.2])).unwrap() < sum_entropy(&gen(&[-0.2, -0.1])).unwrap());
    }

    #[test]
    fn lower_entropy_first_and_ties_keep_sample_order() {
        let cs = vec![cand(0, &[-2.0]), cand(1, &[-1.0]), cand(2, &[-1.0])];
        let s = RankingStrategy::new(StrategyKind::SumEntropy, 0);
        assert_eq!(order(&rank_patches(cs, s).unwrap()), vec![1, 2, 0]);
    }

    #[test]
    fn sum_and_mean_disagree_on_length() {
        // two tokens at 1.0 each versus ten tokens at 0.3 each
        let cs = vec![cand(0, &[-1.0, -1.0]), cand(1, &[-0.3; 10])];
        let by_sum = rank_patches(cs.clone(), RankingStrategy::new(StrategyKind::SumEntropy, 0)).unwrap();
        let by_mean = rank_patches(cs, RankingStrategy::new(StrategyKind::MeanEntropy, 0)).unwrap();
        assert_eq!(order(&by_sum), vec![0, 1]);
        assert_eq!(order(&by_mean), vec![1, 0]);
    }

    #[test]
    fn seeded_random_is_reproducible() {
        let cs: Vec<_> = (0..30).map(|i| cand(i, &[-1.0])).collect();
        let s = RankingStrategy::new(StrategyKind::Random, 7);
        let a = order(&rank_patches(cs.clone(), s).unwrap());
        let b = order(&rank_patches(cs.into_iter().rev().collect(), s).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn missing_entropy_is_an_error() {
        let mut c = cand(4, &[-1.0]);
        c.sum_entropy = None;
        assert_eq!(
            rank_patches(vec![c], RankingStrategy::new(StrategyKind::SumEntropy, 0)),
            Err(RankError::MissingEntropy {
                sample_index: 4,
                kind: StrategyKind::SumEntropy
            })
        );
    }

    #[test]
    fn curves() {
        let rankings = vec![
            ("a".to_string(), vec![3, 1, 2]),
            ("b".to_string(), vec![0, 5]),
            ("c".to_string(), vec![9]),
        ];
        let oracle: HashMap<String, HashSet<usize>> = [
            ("a".to_string(), HashSet::from([2])),
            ("b".to_string(), HashSet::from([0])),
            ("c".to_string(), HashSet::new()),
        ]
        .into();
        let curve = budget_curve(&rankings, &oracle, &[1, 2, 3, 100]).unwrap();
        assert_eq!(curve, vec![(1, 1), (2, 1), (3, 2), (100, 2)]);
        assert_eq!(first_correct_ranks(&rankings, &oracle), vec![3, 1]);
        let mut partial = oracle.clone();
        partial.remove("c");
        assert!(budget_curve(&rankings, &partial, &[1]).is_err());
    }

    #[test]
    fn entropy_table_groups() {
        let mut a = cand(0, &[-1.0]);
        a.status = CandidateStatus::Correct;
        let mut b = cand(1, &[-3.0, -1.0]);
        b.status = CandidateStatus::Correct;
        let table = entropy_report(&[a.clone(), b]);
        assert_eq!(table.len(), 1);
        let c = &table[&EntropyGroup::C];
        assert_eq!((c.count, c.mean_entropy, c.sum_entropy), (2, 1.5, 2.5));

        let mut n = cand(2, &[-4.0]);
        n.status = CandidateStatus::SyntaxError;
        let mut p = cand(3, &[-2.0]);
        p.status = CandidateStatus::NeedsReview;
        let table = entropy_report(&[a, n, p]);
        assert_eq!(table.keys().copied().collect::<Vec<_>>(), vec![EntropyGroup::C, EntropyGroup::P, EntropyGroup::NP]);
    }

    #[test]
    fn calibration_separates_classes() {
        let samples = [(1.0, true), (2.0, true), (5.0, false), (6.0, false)];
        let s = CorrectnessScorer::calibrate(&samples).unwrap();
        assert_eq!(s.threshold, 3.5);
        assert!(CorrectnessScorer::calibrate(&[(1.0, true)]).is_none());
        let d = CorrectnessScorer::default_calibrated();
        assert!(d.threshold.is_finite() && d.threshold > 0.0);
    }

    proptest! {
        #[test]
        fn mean_times_n_is_sum(lps in proptest::collection::vec(-20.0f64..=0.0, 1..300)) {
            let g = gen(&lps);
            let mean = mean_entropy(&g).unwrap();
            let sum = sum_entropy(&g).unwrap();
            let lhs = mean * lps.len() as f64;
            prop_assert!((lhs - sum).abs() <= 1e-12 * sum.abs().max(f64::MIN_POSITIVE));
            prop_assert!(mean >= 0.0 && sum >= 0.0);
        }

        #[test]
        fn ranking_is_a_permutation(
            lps in proptest::collection::vec(proptest::collection::vec(-5.0f64..=0.0, 1..6), 0..25),
            kind in prop::sample::select(StrategyKind::ALL.to_vec()),
            seed in any::<u64>(),
        ) {
            let cs: Vec<_> = lps.iter().enumerate().map(|(i, l)| cand(i, l)).collect();
            let mut out = order(&rank_patches(cs.clone(), RankingStrategy::new(kind, seed)).unwrap());
            out.sort();
            prop_assert_eq!(out, order(&cs));
        }

        #[test]
        fn scaling_logprobs_keeps_the_order(
            lps in proptest::collection::vec(proptest::collection::vec(-5.0f64..=0.0, 1..6), 1..20),
            factor in 0.1f64..10.0,
        ) {
            let cs: Vec<_> = lps.iter().enumerate().map(|(i, l)| cand(i, l)).collect();
            let scaled: Vec<_> = lps.iter().enumerate()
                .map(|(i, l)| cand(i, &l.iter().map(|x| x * factor).collect::<Vec<_>>()))
                .collect();
            for kind in [StrategyKind::MeanEntropy, StrategyKind::SumEntropy] {
                let s = RankingStrategy::new(kind, 0);
                let a = rank_patches(cs.clone(), s).unwrap();
                let b = rank_patches(scaled.clone(), s).unwrap();
                // orders agree wherever the unscaled keys are strictly ordered
                let key = |c: &PatchCandidate| match kind {
                    StrategyKind::MeanEntropy => c.mean_entropy.unwrap(),
                    _ => c.sum_entropy.unwrap(),
                };
                let pos_b: HashMap<usize, usize> = b.iter().enumerate().map(|(p, c)| (c.sample_index, p)).collect();
                for w in a.windows(2) {
                    if key(&w[1]) - key(&w[0]) > 1e-9 * key(&w[1]).abs().max(1.0) {
                        prop_assert!(pos_b[&w[0].sample_index] < pos_b[&w[1].sample_index]);
                    }
                }
            }
        }

        #[test]
        fn curve_is_monotone(
            orders in proptest::collection::vec(proptest::collection::vec(0usize..20, 0..20), 1..10),
        ) {
            let rankings: Vec<(String, Vec<usize>)> = orders.iter().enumerate().map(|(i, o)| (i.to_string(), o.clone())).collect();
            let oracle: HashMap<String, HashSet<usize>> = rankings.iter().map(|(b, _)| (b.clone(), HashSet::from([3, 7]))).collect();
            let budgets: Vec<usize> = (0..25).collect();
            let curve = budget_curve(&rankings, &oracle, &budgets).unwrap();
            for w in curve.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
        }
    }
}
