//! The iterative robust collaborative learner and the independent-learning
//! baseline.
//!
//! Each round draws a training set from every active user, searches the
//! subsets holding at least 9/10 of the active users for one whose pooled
//! data is consistent with some class member, and then validates that
//! candidate on fresh samples. Users on which the candidate looks accurate
//! receive it and leave; the rest stay active. Once the adversaries could
//! make up more than a tenth of the active set, every remaining user is
//! learned on its own.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{
    ceil_count, check_eps_delta, error_rate, pac_sample_size, Hypothesis, LabeledExample,
};
use crate::oracle::{adversary_budget, Instance, OracleSet, SampleLedger};

/// Constants standing in for the asymptotic budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConstants {
    pub c_pac: f64,
    pub c_cand: f64,
    pub c_test: f64,
    pub c_bins: f64,
    pub c_final: f64,
    /// Largest active set the exhaustive subset search accepts.
    pub max_candidate_group: usize,
    /// Rounds after which the loop hands the remaining users to the final phase.
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
}

fn default_max_rounds() -> usize {
    64
}

impl Default for LearnerConstants {
    fn default() -> Self {
        Self {
            c_pac: 1.0,
            c_cand: 1.0,
            c_test: 1.0,
            c_bins: 1.0,
            c_final: 1.0,
            max_candidate_group: 25,
            max_rounds: default_max_rounds(),
        }
    }
}

/// The frozen constants ledger shipped with the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub learner: LearnerConstants,
    /// Fraction of `(⌊ηn⌋ + 1) · pac_sample_size` the lower-bound instance must cost.
    pub lower_bound_gamma: f64,
    pub notes: Vec<String>,
}

const CONSTANTS_JSON: &str = include_str!("../constants.json");

impl ConstantsLedger {
    pub fn load() -> Self {
        serde_json::from_str(CONSTANTS_JSON).expect("constants.json is valid")
    }
}

impl LearnerConstants {
    /// Calibrated values from `constants.json`.
    pub fn calibrated() -> Self {
        ConstantsLedger::load().learner
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_pac", self.c_pac),
            ("c_cand", self.c_cand),
            ("c_test", self.c_test),
            ("c_bins", self.c_bins),
            ("c_final", self.c_final),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.max_candidate_group == 0 {
            return Err(Error::param("max_candidate_group", "must be at least 1"));
        }
        if self.max_rounds == 0 {
            return Err(Error::param("max_rounds", "must be at least 1"));
        }
        Ok(())
    }
}

/// `δ / (5 r²)`.
pub fn delta_schedule(round: usize, delta: f64) -> Result<f64> {
    if round == 0 {
        return Err(Error::param("round", "rounds are numbered from 1"));
    }
    Ok(delta / (5.0 * (round * round) as f64))
}

/// Smallest subset size searched by the candidate step: `⌈9|G|/10⌉`.
pub fn min_subset_size(group_size: usize) -> usize {
    (9 * group_size).div_ceil(10)
}

/// Number of subsets the candidate step may examine for a group of `group_size`.
pub fn candidate_family_size(group_size: usize) -> u128 {
    (min_subset_size(group_size)..=group_size)
        .map(|k| binomial(group_size, k))
        .sum()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Pooled budget `M` of the candidate step and the per-user share `⌈4M/|G|⌉`.
pub fn candidate_budget(
    group_size: usize,
    d: usize,
    eps: f64,
    delta: f64,
    c_cand: f64,
) -> (u64, u64) {
    let g = group_size as f64;
    let pooled = (d as f64 * (1.0 / eps).ln() + g * std::f64::consts::LN_2 + (1.0 / delta).ln())
        / eps
        + g * (g / delta).ln();
    let m = ceil_count(c_cand * pooled);
    (m, ceil_count(4.0 * m as f64 / g))
}

/// Per-user validation samples `⌈c_test · ln(|G|/δ) / ε⌉`.
pub fn test_budget(group_size: usize, eps: f64, delta: f64, c_test: f64) -> u64 {
    ceil_count(c_test * (group_size as f64 / delta).ln() / eps)
}

/// Per-user samples in the final phase `⌈c_final · (d ln(1/ε) + ln(n/δ)) / ε⌉`.
pub fn final_budget(d: usize, n: usize, eps: f64, delta: f64, c_final: f64) -> u64 {
    ceil_count(c_final * (d as f64 * (1.0 / eps).ln() + (n as f64 / delta).ln()) / eps)
}

/// Whether validation keeps a user active: `θ > 3ε/4`, strictly.
pub fn retains(mistakes: u64, samples: u64, eps: f64) -> bool {
    4.0 * mistakes as f64 > 3.0 * eps * samples as f64
}

fn draw<O: OracleSet>(oracles: &mut O, user: usize, count: u64) -> Vec<LabeledExample> {
    (0..count).map(|_| oracles.query(user)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateOutcome {
    pub hypothesis: Hypothesis,
    /// The subset `H` whose pooled data produced the hypothesis.
    pub chosen: Vec<usize>,
    /// Training sets, aligned with the input group.
    pub datasets: Vec<Vec<LabeledExample>>,
    pub pooled_budget: u64,
    pub per_user: u64,
    pub subsets_checked: usize,
}

/// Finds a classifier consistent with the pooled data of a large subgroup.
///
/// Subsets are examined largest first and lexicographically (by position in
/// `group`) within a size; the first consistent one wins.
pub fn candidate<O: OracleSet>(
    oracles: &mut O,
    group: &[usize],
    eps: f64,
    delta: f64,
    constants: &LearnerConstants,
) -> Result<CandidateOutcome> {
    check_eps_delta(eps, delta)?;
    if group.is_empty() {
        return Err(Error::param("group", "candidate needs at least one user"));
    }
    if group.len() > constants.max_candidate_group {
        return Err(Error::SearchCap {
            group_size: group.len(),
            cap: constants.max_candidate_group,
        });
    }
    let d = oracles.class().vc_dimension();
    let (pooled_budget, per_user) = candidate_budget(group.len(), d, eps, delta, constants.c_cand);
    let datasets: Vec<Vec<LabeledExample>> =
        group.iter().map(|&i| draw(oracles, i, per_user)).collect();

    let class = oracles.class();
    let min_size = min_subset_size(group.len());
    let mut subsets_checked = 0;
    for size in (min_size..=group.len()).rev() {
        for subset in (0..group.len()).combinations(size) {
            subsets_checked += 1;
            let pooled = subset.iter().map(|&j| datasets[j].as_slice());
            if let Some(hypothesis) = class.consistent_union(pooled)? {
                return Ok(CandidateOutcome {
                    hypothesis,
                    chosen: subset.iter().map(|&j| group[j]).collect(),
                    datasets,
                    pooled_budget,
                    per_user,
                    subsets_checked,
                });
            }
        }
    }
    Err(Error::NoConsistentGroup {
        group_size: group.len(),
        min_size,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestOutcome {
    pub retained: Vec<usize>,
    /// Empirical disagreement `θ_i`, aligned with the input group.
    pub disagreement: Vec<f64>,
    pub per_user: u64,
}

/// Validates `hypothesis` on fresh samples from each user in `group` and
/// returns the users it does not yet serve.
pub fn test_candidate<O: OracleSet>(
    oracles: &mut O,
    group: &[usize],
    hypothesis: &Hypothesis,
    eps: f64,
    delta: f64,
    constants: &LearnerConstants,
) -> Result<TestOutcome> {
    check_eps_delta(eps, delta)?;
    let per_user = test_budget(group.len().max(1), eps, delta, constants.c_test);
    let mut retained = Vec::new();
    let mut disagreement = Vec::with_capacity(group.len());
    for &i in group {
        let mistakes = (0..per_user)
            .filter(|_| {
                let ex = oracles.query(i);
                hypothesis.label_unchecked(ex.point) != ex.label
            })
            .count() as u64;
        disagreement.push(mistakes as f64 / per_user as f64);
        if retains(mistakes, per_user, eps) {
            retained.push(i);
        }
    }
    Ok(TestOutcome {
        retained,
        disagreement,
        per_user,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub active: Vec<usize>,
    pub delta_r: f64,
    pub candidate: Hypothesis,
    pub chosen_subset: Vec<usize>,
    pub subsets_checked: usize,
    pub pooled_budget: u64,
    pub candidate_per_user: u64,
    pub test_per_user: u64,
    pub disagreement: Vec<f64>,
    pub retained: Vec<usize>,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: String,
    pub params: RunParams,
    pub constants: LearnerConstants,
    pub outputs: Vec<Hypothesis>,
    /// Round in which each user received its output; `None` for the final phase.
    pub assigned_round: Vec<Option<usize>>,
    pub ledger: SampleLedger,
    pub trace: Vec<RoundTrace>,
    pub rounds_used: usize,
    pub final_phase_users: Vec<usize>,
    pub final_per_user: u64,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Whether the loop may run another round with `active` users.
pub fn loop_guard(eta: f64, n: usize, active: usize) -> bool {
    10 * adversary_budget(eta, n) <= active
}

/// The iterative robust collaborative learner.
pub fn run_robust_collaborative<O: OracleSet>(
    oracles: &mut O,
    params: &RunParams,
    constants: &LearnerConstants,
) -> Result<RunResult> {
    let RunParams { eps, delta, eta } = *params;
    check_eps_delta(eps, delta)?;
    constants.validate()?;
    let n = oracles.n();
    let d = oracles.class().vc_dimension();
    let start = oracles.ledger().clone();

    let mut outputs: Vec<Option<Hypothesis>> = vec![None; n];
    let mut assigned_round = vec![None; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut round = 1;

    while !active.is_empty() && loop_guard(eta, n, active.len()) && round <= constants.max_rounds {
        let before = oracles.ledger().total;
        let delta_r = delta_schedule(round, delta)?;
        let cand = candidate(oracles, &active, eps, delta_r, constants)?;
        let test = test_candidate(oracles, &active, &cand.hypothesis, eps, delta_r, constants)?;
        for &i in &active {
            if !test.retained.contains(&i) {
                outputs[i] = Some(cand.hypothesis.clone());
                assigned_round[i] = Some(round);
            }
        }
        trace.push(RoundTrace {
            round,
            active: active.clone(),
            delta_r,
            candidate: cand.hypothesis,
            chosen_subset: cand.chosen,
            subsets_checked: cand.subsets_checked,
            pooled_budget: cand.pooled_budget,
            candidate_per_user: cand.per_user,
            test_per_user: test.per_user,
            disagreement: test.disagreement,
            retained: test.retained.clone(),
            samples: oracles.ledger().total - before,
        });
        active = test.retained;
        round += 1;
    }

    let final_per_user = final_budget(d, n, eps, delta, constants.c_final);
    for &i in &active {
        let samples = draw(oracles, i, final_per_user);
        let class = oracles.class();
        outputs[i] = Some(
            class
                .consistent(&samples)?
                .unwrap_or_else(|| class.default_hypothesis()),
        );
    }

    Ok(RunResult {
        algorithm: "robust-collaborative".into(),
        params: params.clone(),
        constants: constants.clone(),
        outputs: outputs
            .into_iter()
            .map(|o| o.expect("every user is assigned"))
            .collect(),
        assigned_round,
        ledger: oracles.ledger().since(&start),
        rounds_used: trace.len(),
        trace,
        final_per_user: if active.is_empty() { 0 } else { final_per_user },
        final_phase_users: active,
    })
}

/// Learns every user independently with `pac_sample_size(d, ε, δ/n)` samples.
pub fn run_naive_baseline<O: OracleSet>(
    oracles: &mut O,
    eps: f64,
    delta: f64,
    constants: &LearnerConstants,
) -> Result<RunResult> {
    check_eps_delta(eps, delta)?;
    constants.validate()?;
    let n = oracles.n();
    let d = oracles.class().vc_dimension();
    let per_user = pac_sample_size(d, eps, delta / n as f64, constants.c_pac)?;
    let start = oracles.ledger().clone();
    let mut outputs = Vec::with_capacity(n);
    for i in 0..n {
        let samples = draw(oracles, i, per_user);
        let class = oracles.class();
        outputs.push(
            class
                .consistent(&samples)?
                .unwrap_or_else(|| class.default_hypothesis()),
        );
    }
    Ok(RunResult {
        algorithm: "naive".into(),
        params: RunParams {
            eps,
            delta,
            eta: oracles.eta(),
        },
        constants: constants.clone(),
        outputs,
        assigned_round: vec![None; n],
        ledger: oracles.ledger().since(&start),
        trace: Vec::new(),
        rounds_used: 0,
        final_phase_users: (0..n).collect(),
        final_per_user: per_user,
    })
}

/// Exact per-user errors of a run against the hidden target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    /// `err_{D_i}(f_i)` for truthful users, `None` for adversaries.
    pub errors: Vec<Option<f64>>,
    /// `err < ε` per truthful user.
    pub accurate: Vec<Option<bool>>,
    /// Every truthful user is ε-accurate.
    pub success: bool,
}

pub fn assess(instance: &Instance, outputs: &[Hypothesis], eps: f64) -> Result<Assessment> {
    let mut errors = Vec::with_capacity(outputs.len());
    for (i, f) in outputs.iter().enumerate() {
        errors.push(match instance.mode(i).distribution() {
            Some(dist) => Some(error_rate(f, instance.target(), dist)?),
            None => None,
        });
    }
    let accurate: Vec<Option<bool>> = errors.iter().map(|e| e.map(|e| e < eps)).collect();
    let success = accurate.iter().all(|a| a.unwrap_or(true));
    Ok(Assessment {
        errors,
        accurate,
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::HypothesisClass;
    use crate::oracle::{
        make_lower_bound_instance, make_random_instance, DistributionFamily, PretenderKind,
        RandomInstanceConfig,
    };

    #[test]
    fn delta_schedule_examples() {
        assert!((delta_schedule(1, 0.1).unwrap() - 0.02).abs() < 1e-15);
        assert!((delta_schedule(3, 0.1).unwrap() - 0.1 / 45.0).abs() < 1e-15);
        assert!(delta_schedule(0, 0.1).is_err());
        // 2 Σ δ_r + δ/3 ≤ δ.
        let tail: f64 = (1..100_000)
            .map(|r| 2.0 * delta_schedule(r, 1.0).unwrap())
            .sum();
        assert!(tail + 1.0 / 3.0 <= 1.0);
        assert!(tail < 2.0 * std::f64::consts::PI.powi(2) / 30.0);
    }

    #[test]
    fn candidate_family_counts() {
        assert_eq!(min_subset_size(10), 9);
        assert_eq!(candidate_family_size(10), 11);
        assert_eq!(min_subset_size(25), 23);
        assert_eq!(candidate_family_size(25), 326);
        assert_eq!(min_subset_size(1), 1);
        assert_eq!(min_subset_size(16), 15);
    }

    #[test]
    fn retention_boundary() {
        // θ = 0.08 > 0.075 is kept, θ = 0.075 is not.
        assert!(retains(8, 100, 0.1));
        assert!(!retains(3, 40, 0.1));
        assert!(!retains(0, 50, 0.1));
    }

    #[test]
    fn loop_guard_arithmetic() {
        assert!(!loop_guard(0.2, 10, 10));
        assert!(loop_guard(0.05, 100, 100));
        assert!(loop_guard(0.05, 100, 50));
        assert!(!loop_guard(0.05, 100, 49));
        assert!(loop_guard(0.0, 16, 1));
    }

    #[test]
    fn guard_blocks_loop_on_lower_bound_instance() {
        let mut inst = make_lower_bound_instance(10, 4, 0.25, 0.2, 1).unwrap();
        let params = RunParams {
            eps: 0.25,
            delta: 0.1,
            eta: 0.2,
        };
        let constants = LearnerConstants::default();
        let result = run_robust_collaborative(&mut inst, &params, &constants).unwrap();
        assert_eq!(result.rounds_used, 0);
        assert_eq!(result.final_phase_users, (0..10).collect::<Vec<_>>());
        let per_user = final_budget(4, 10, 0.25, 0.1, 1.0);
        assert_eq!(result.ledger.total, 10 * per_user);
    }

    #[test]
    fn candidate_search_cap() {
        let config = RandomInstanceConfig {
            class: HypothesisClass::threshold(8).unwrap(),
            n: 30,
            eta: 0.0,
            adversaries: None,
            family: DistributionFamily::Uniform,
            pretender: PretenderKind::Random,
        };
        let mut inst = make_random_instance(&config, 0).unwrap();
        let group: Vec<usize> = (0..30).collect();
        let err = candidate(&mut inst, &group, 0.1, 0.1, &LearnerConstants::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::SearchCap {
                group_size: 30,
                cap: 25
            }
        ));
    }

    #[test]
    fn naive_ledger_identity() {
        let config = RandomInstanceConfig {
            class: HypothesisClass::threshold(8).unwrap(),
            n: 7,
            eta: 0.0,
            adversaries: None,
            family: DistributionFamily::RandomWeights,
            pretender: PretenderKind::Random,
        };
        let mut inst = make_random_instance(&config, 2).unwrap();
        let constants = LearnerConstants::default();
        let r = run_naive_baseline(&mut inst, 0.1, 0.1, &constants).unwrap();
        let per_user = pac_sample_size(1, 0.1, 0.1 / 7.0, 1.0).unwrap();
        assert_eq!(r.ledger.total, 7 * per_user);
        assert!(r.ledger.per_oracle.iter().all(|&c| c == per_user));

        let single = RandomInstanceConfig { n: 1, ..config };
        let mut inst = make_random_instance(&single, 2).unwrap();
        let r = run_naive_baseline(&mut inst, 0.1, 0.1, &constants).unwrap();
        assert_eq!(r.ledger.total, pac_sample_size(1, 0.1, 0.1, 1.0).unwrap());
    }
}
