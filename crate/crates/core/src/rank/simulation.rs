//! Synthetic candidate sets where correct patches are sampled with lower
//! per-token entropy than the rest.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::score_entropies;
use crate::assemble::{CandidateStatus, PatchCandidate, SampleKey};
use crate::model::{FinishReason, GenerationResult, Token};
use crate::prompt::RepairSetting;

pub const CALIBRATION_SEED: u64 = 0x5eed_ca1b;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationParams {
    pub bugs: usize,
    pub candidates_per_bug: usize,
    /// Mean per-token entropy (nats) of correct, plausible and other patches.
    pub correct_entropy: f64,
    pub plausible_entropy: f64,
    pub other_entropy: f64,
    /// Fraction of bugs that have at least one correct candidate.
    pub fixable_fraction: f64,
    pub max_correct: usize,
    pub max_plausible: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
}

impl Default for SimulationParams {
    fn default() -> Self {
        SimulationParams {
            bugs: 20,
            candidates_per_bug: 50,
            correct_entropy: 0.2,
            plausible_entropy: 0.5,
            other_entropy: 1.0,
            fixable_fraction: 0.75,
            max_correct: 3,
            max_plausible: 3,
            min_tokens: 8,
            max_tokens: 24,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedBug {
    pub id: String,
    pub candidates: Vec<PatchCandidate>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub bugs: Vec<SimulatedBug>,
}

impl Simulation {
    pub fn oracle(&self) -> HashMap<String, HashSet<usize>> {
        self.bugs
            .iter()
            .map(|b| {
                let correct = b
                    .candidates
                    .iter()
                    .filter(|c| c.status == CandidateStatus::Correct)
                    .map(|c| c.sample_index)
                    .collect();
                (b.id.clone(), correct)
            })
            .collect()
    }

    pub fn all_candidates(&self) -> Vec<PatchCandidate> {
        self.bugs.iter().flat_map(|b| b.candidates.clone()).collect()
    }
}

fn exponential(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    -mean * (1.0 - rng.random::<f64>()).ln()
}

fn candidate(
    rng: &mut ChaCha8Rng,
    bug: &str,
    index: usize,
    status: CandidateStatus,
    per_token: f64,
    params: &SimulationParams,
) -> PatchCandidate {
    let len = rng.random_range(params.min_tokens..=params.max_tokens);
    let tokens = (0..len)
        .map(|t| Token {
            text: format!("t{t} "),
            logprob: -exponential(rng, per_token),
        })
        .collect();
    let generated = GenerationResult::from_tokens(tokens, FinishReason::Stop);
    let mut c = PatchCandidate::new(
        SampleKey {
            bug_id: bug.to_string(),
            setting: RepairSetting::Infill,
            sample_index: index,
        },
        generated,
        format!("patch {bug} {index}\n"),
    );
    c.status = status;
    score_entropies(&mut c);
    c
}

pub fn simulate(seed: u64, params: &SimulationParams) -> Simulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bugs = (0..params.bugs)
        .map(|b| {
            let id = format!("sim-{b:03}");
            let n = params.candidates_per_bug;
            let correct = if rng.random::<f64>() < params.fixable_fraction {
                rng.random_range(1..=params.max_correct.min(n))
            } else {
                0
            };
            let plausible = rng.random_range(0..=params.max_plausible.min(n - correct));
            let mut statuses = vec![CandidateStatus::TestFail; n];
            for s in statuses.iter_mut().take(correct) {
                *s = CandidateStatus::Correct;
            }
            for s in statuses.iter_mut().skip(correct).take(plausible) {
                *s = CandidateStatus::NeedsReview;
            }
            // place the planted patches at random sample positions
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                statuses.swap(i, j);
            }
            let candidates = statuses
                .into_iter()
                .enumerate()
                .map(|(i, status)| {
                    let per_token = match status {
                        CandidateStatus::Correct => params.correct_entropy,
                        CandidateStatus::NeedsReview => params.plausible_entropy,
                        _ => params.other_entropy,
                    };
                    candidate(&mut rng, &id, i, status, per_token, params)
                })
                .collect();
            SimulatedBug { id, candidates }
        })
        .collect();
    Simulation { bugs }
}

/// Labelled `(sum_entropy, is_correct)` pairs of plausible candidates, for
/// calibrating the correctness score.
pub fn calibration_samples(seed: u64) -> Vec<(f64, bool)> {
    let params = SimulationParams {
        bugs: 200,
        ..SimulationParams::default()
    };
    simulate(seed, &params)
        .all_candidates()
        .into_iter()
        .filter(|c| c.status.is_plausible())
        .map(|c| {
            (
                c.sum_entropy.expect("simulated generations are non-empty"),
                c.status == CandidateStatus::Correct,
            )
        })
        .collect()
}
