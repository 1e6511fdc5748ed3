//! Monte Carlo and exhaustive checks of the learner's guarantees.
//!
//! Every statistical check runs seeded, independent trials in parallel and
//! folds them in trial order, so a report depends only on its config and
//! seed. Unless a check pins an explicit pass threshold, it passes when the
//! empirical success rate is at least `target - 3 * SE`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{
    ceil_count, check_eps_delta, error_rate, pac_sample_size, Distribution, Hypothesis,
    HypothesisClass, Point,
};
use crate::learner::{
    assess, candidate, delta_schedule, run_naive_baseline, run_robust_collaborative,
    test_candidate, LearnerConstants, RunParams,
};
use crate::oracle::{
    adversary_budget, make_centralized_impossibility_instance, make_lower_bound_instance,
    make_random_instance, two_point_class, DistributionFamily, Evaluation, ImpossibilityCase,
    Instance, InstanceSpec, OracleMode, OracleSet, PretenderKind, RandomInstanceConfig,
};
use crate::rng::{derive_seed, stream_rng};

/// Header of the one-line CSV rows emitted by [`TrialReport::csv_row`].
pub const TRIAL_CSV_HEADER: &str = "check,trials,successes,rate,std_error,target,threshold,passed";

/// How a report turns its empirical rate into a verdict.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassRule {
    /// `rate >= target - 3 * SE`.
    ThreeSigma,
    /// `rate >= threshold`.
    AtLeast(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub check: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub std_error: f64,
    pub target: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Samples drawn per trial, when the check draws from oracles.
    pub ledger_totals: Vec<u64>,
}

impl TrialReport {
    pub fn from_outcomes<C: Serialize>(
        check: &str,
        config: &C,
        seed: u64,
        outcomes: &[bool],
        ledger_totals: Vec<u64>,
        target: f64,
        rule: PassRule,
    ) -> Result<Self> {
        let trials = outcomes.len();
        let successes = outcomes.iter().filter(|&&s| s).count();
        let rate = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        let std_error = if trials == 0 {
            0.0
        } else {
            (rate * (1.0 - rate) / trials as f64).sqrt()
        };
        let threshold = match rule {
            PassRule::ThreeSigma => target - 3.0 * std_error,
            PassRule::AtLeast(t) => t,
        };
        Ok(Self {
            check: check.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            trials,
            successes,
            rate,
            std_error,
            target,
            threshold,
            passed: trials > 0 && rate >= threshold,
            ledger_totals,
        })
    }

    pub fn mean_samples(&self) -> f64 {
        if self.ledger_totals.is_empty() {
            return 0.0;
        }
        self.ledger_totals.iter().sum::<u64>() as f64 / self.ledger_totals.len() as f64
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            self.check,
            self.trials,
            self.successes,
            self.rate,
            self.std_error,
            self.target,
            self.threshold,
            self.passed
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {}/{} = {:.4} ± {:.4} (target {:.4}, threshold {:.4}) {}",
            self.check,
            self.successes,
            self.trials,
            self.rate,
            self.std_error,
            self.target,
            self.threshold,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

fn check_trials(trials: usize, min: usize) -> Result<()> {
    if trials < min {
        return Err(Error::param(
            "trials",
            format!("need at least {min}, got {trials}"),
        ));
    }
    Ok(())
}

fn run_trials<T, F>(trials: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|t| f(derive_seed(seed, t)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallsInBinsConfig {
    pub bins: usize,
    pub c_bins: f64,
    pub delta: f64,
    /// Multiplies the ball count; below 1 gives an under-budgeted control.
    pub budget_scale: f64,
}

impl BallsInBinsConfig {
    pub fn balls(&self) -> u64 {
        let n = self.bins as f64;
        ceil_count(self.budget_scale * self.c_bins * n * (n / self.delta).ln())
    }
}

/// Throws `m = ⌈c_bins · n · ln(n/δ)⌉` balls into `n` bins per trial; a trial
/// succeeds when no bin holds more than `2m/n` balls.
pub fn check_balls_in_bins(
    config: &BallsInBinsConfig,
    trials: usize,
    seed: u64,
) -> Result<TrialReport> {
    check_trials(trials, 100)?;
    if config.bins == 0 {
        return Err(Error::param("n", "need at least one bin"));
    }
    check_eps_delta(1.0, config.delta)?;
    let bins = config.bins;
    let balls = config.balls();
    let outcomes = run_trials(trials, seed, |s| {
        let mut rng = stream_rng(s, 0);
        let mut load = vec![0u64; bins];
        for _ in 0..balls {
            load[rng.gen_range(0..bins)] += 1;
        }
        let max = load.into_iter().max().unwrap_or(0);
        Ok(max * bins as u64 <= 2 * balls)
    })?;
    TrialReport::from_outcomes(
        "balls-in-bins",
        config,
        seed,
        &outcomes,
        Vec::new(),
        1.0 - config.delta,
        PassRule::ThreeSigma,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLemmaConfig {
    pub class: HypothesisClass,
    pub group_size: usize,
    pub adversaries: usize,
    pub family: DistributionFamily,
    pub pretender: PretenderKind,
    pub eps: f64,
    pub delta: f64,
    /// The candidate step runs at `δ_r = δ / (5 r²)`.
    pub round: usize,
    pub constants: LearnerConstants,
}

/// Runs the candidate step on a fresh group per trial. A trial succeeds when
/// at least half of the group are truthful users on whom the candidate has
/// exact error at most `ε/2`. Target `1 - δ_r`.
pub fn check_candidate_lemma(
    config: &CandidateLemmaConfig,
    trials: usize,
    seed: u64,
) -> Result<TrialReport> {
    check_trials(trials, 1)?;
    check_eps_delta(config.eps, config.delta)?;
    let g = config.group_size;
    if g == 0 || 10 * config.adversaries > g {
        return Err(Error::param(
            "adversaries",
            format!(
                "{} adversaries exceed a tenth of a group of {g}",
                config.adversaries
            ),
        ));
    }
    let delta_r = delta_schedule(config.round, config.delta)?;
    let instance_config = RandomInstanceConfig {
        class: config.class.clone(),
        n: g,
        eta: config.adversaries as f64 / g as f64,
        adversaries: Some(config.adversaries),
        family: config.family,
        pretender: config.pretender,
    };
    let group: Vec<usize> = (0..g).collect();
    let results = run_trials(trials, seed, |s| {
        let mut inst = make_random_instance(&instance_config, s)?;
        let cand = candidate(&mut inst, &group, config.eps, delta_r, &config.constants)?;
        let mut good = 0;
        for i in 0..g {
            if let Some(dist) = inst.mode(i).distribution() {
                if error_rate(&cand.hypothesis, inst.target(), dist)? <= config.eps / 2.0 {
                    good += 1;
                }
            }
        }
        Ok((2 * good >= g, inst.ledger().total))
    })?;
    let (outcomes, totals): (Vec<bool>, Vec<u64>) = results.into_iter().unzip();
    TrialReport::from_outcomes(
        "candidate-lemma",
        config,
        seed,
        &outcomes,
        totals,
        1.0 - delta_r,
        PassRule::ThreeSigma,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestLemmaConfig {
    /// Exact error of the planted candidate on each user.
    pub planted_errors: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub constants: LearnerConstants,
}

/// A two-point powerset world in which the planted candidate has exactly the
/// requested error on each user: the candidate labels `x0` with 1, the target
/// with 0, and user `i` puts mass `errors[i]` on `x0`, the rest on ⊥.
pub fn planted_error_instance(errors: &[f64], seed: u64) -> Result<(Instance, Hypothesis)> {
    let class = HypothesisClass::powerset(1)?;
    let bottom = class.bottom().expect("powerset has ⊥");
    let oracles = errors
        .iter()
        .map(|&e| {
            let support = if e >= 1.0 {
                vec![(Point(0), 1.0)]
            } else if e <= 0.0 {
                vec![(bottom, 1.0)]
            } else {
                vec![(Point(0), e), (bottom, 1.0 - e)]
            };
            Ok(OracleMode::Truthful {
                dist: Distribution::new(support)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = InstanceSpec {
        generator: "planted-error".into(),
        seed,
        eta: 0.0,
        target: class.default_hypothesis(),
        evaluation: Evaluation {
            truthful_mask: vec![true; errors.len()],
        },
        class,
        oracles,
    };
    Ok((
        Instance::new(spec)?,
        Hypothesis::explicit(vec![true, false]),
    ))
}

/// Runs the validation step against a planted candidate. A trial succeeds
/// when every user with error above `ε` is kept and every user with error at
/// most `ε/2` is dropped; errors in between are unconstrained. Target `1 - δ`.
pub fn check_test_lemma(config: &TestLemmaConfig, trials: usize, seed: u64) -> Result<TrialReport> {
    check_trials(trials, 1)?;
    check_eps_delta(config.eps, config.delta)?;
    if config.planted_errors.is_empty() {
        return Err(Error::param("planted_errors", "need at least one user"));
    }
    let group: Vec<usize> = (0..config.planted_errors.len()).collect();
    let results = run_trials(trials, seed, |s| {
        let (mut inst, planted) = planted_error_instance(&config.planted_errors, s)?;
        let outcome = test_candidate(
            &mut inst,
            &group,
            &planted,
            config.eps,
            config.delta,
            &config.constants,
        )?;
        let ok = config.planted_errors.iter().enumerate().all(|(i, &e)| {
            let kept = outcome.retained.contains(&i);
            if e > config.eps {
                kept
            } else if e <= config.eps / 2.0 {
                !kept
            } else {
                true
            }
        });
        Ok((ok, inst.ledger().total))
    })?;
    let (outcomes, totals): (Vec<bool>, Vec<u64>) = results.into_iter().unzip();
    TrialReport::from_outcomes(
        "test-lemma",
        config,
        seed,
        &outcomes,
        totals,
        1.0 - config.delta,
        PassRule::ThreeSigma,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacConfig {
    pub class: HypothesisClass,
    pub family: DistributionFamily,
    pub eps: f64,
    pub delta: f64,
    pub c_pac: f64,
}

/// Single-distribution learning with `pac_sample_size` samples and the
/// consistency oracle; a trial succeeds when the output has error below `ε`.
pub fn check_pac_sample_size(config: &PacConfig, trials: usize, seed: u64) -> Result<TrialReport> {
    check_trials(trials, 1)?;
    let d = config.class.vc_dimension();
    let m = pac_sample_size(d, config.eps, config.delta, config.c_pac)?;
    let instance_config = RandomInstanceConfig {
        class: config.class.clone(),
        n: 1,
        eta: 0.0,
        adversaries: None,
        family: config.family,
        pretender: PretenderKind::Random,
    };
    let results = run_trials(trials, seed, |s| {
        let mut inst = make_random_instance(&instance_config, s)?;
        let sample: Vec<_> = (0..m).map(|_| inst.query(0)).collect();
        let f = inst
            .class()
            .consistent(&sample)?
            .expect("truthful samples are realizable");
        let dist = inst.mode(0).distribution().expect("single truthful user");
        Ok((error_rate(&f, inst.target(), dist)? < config.eps, m))
    })?;
    let (outcomes, totals): (Vec<bool>, Vec<u64>) = results.into_iter().unzip();
    TrialReport::from_outcomes(
        "pac",
        config,
        seed,
        &outcomes,
        totals,
        1.0 - config.delta,
        PassRule::ThreeSigma,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollaborativeConfig {
    pub class: HypothesisClass,
    pub n: usize,
    pub eta: f64,
    pub family: DistributionFamily,
    pub pretender: PretenderKind,
    pub eps: f64,
    pub delta: f64,
    pub constants: LearnerConstants,
}

impl CollaborativeConfig {
    fn instance_config(&self) -> RandomInstanceConfig {
        RandomInstanceConfig {
            class: self.class.clone(),
            n: self.n,
            eta: self.eta,
            adversaries: None,
            family: self.family,
            pretender: self.pretender,
        }
    }
}

/// End-to-end run of the iterative learner. A trial succeeds when every
/// truthful user's output has error below `ε`.
pub fn check_collaborative(
    config: &CollaborativeConfig,
    trials: usize,
    seed: u64,
    rule: PassRule,
) -> Result<TrialReport> {
    let (report, _) = collaborative_trials(config, trials, seed, rule)?;
    Ok(report)
}

/// Like [`check_collaborative`], also returning the rounds used per trial.
pub fn collaborative_trials(
    config: &CollaborativeConfig,
    trials: usize,
    seed: u64,
    rule: PassRule,
) -> Result<(TrialReport, Vec<usize>)> {
    check_trials(trials, 1)?;
    let instance_config = config.instance_config();
    let params = RunParams {
        eps: config.eps,
        delta: config.delta,
        eta: config.eta,
    };
    let results = run_trials(trials, seed, |s| {
        let mut inst = make_random_instance(&instance_config, s)?;
        let run = run_robust_collaborative(&mut inst, &params, &config.constants)?;
        let a = assess(&inst, &run.outputs, config.eps)?;
        Ok((a.success, run.ledger.total, run.rounds_used))
    })?;
    let outcomes: Vec<bool> = results.iter().map(|r| r.0).collect();
    let totals = results.iter().map(|r| r.1).collect();
    let rounds = results.iter().map(|r| r.2).collect();
    let report = TrialReport::from_outcomes(
        "collaborative",
        config,
        seed,
        &outcomes,
        totals,
        1.0 - config.delta,
        rule,
    )?;
    Ok((report, rounds))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityRow {
    /// Labels of `(x0, x1)`.
    pub classifier: String,
    /// Worst truthful-user error in each of the two worlds.
    pub worst_error: [f64; 2],
    pub fails_some_case: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpossibilityVerdict {
    pub n: usize,
    /// Every oracle returned identical answers in both worlds.
    pub indistinguishable: bool,
    pub rows: Vec<ImpossibilityRow>,
    pub passed: bool,
}

impl ImpossibilityVerdict {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn csv_row(&self) -> String {
        let failing = self.rows.iter().filter(|r| r.fails_some_case).count();
        format!(
            "centralized-impossibility,{},{},{:.6},0.000000,1.000000,1.000000,{}",
            self.rows.len(),
            failing,
            failing as f64 / self.rows.len() as f64,
            self.passed
        )
    }
}

/// Exhaustive check that no single shared classifier serves every truthful
/// user in both indistinguishable worlds.
pub fn check_centralized_impossibility(n: usize) -> Result<ImpossibilityVerdict> {
    let mut worlds = [
        make_centralized_impossibility_instance(n, ImpossibilityCase::ZeroTarget)?,
        make_centralized_impossibility_instance(n, ImpossibilityCase::OneTarget)?,
    ];
    let mut indistinguishable = true;
    for i in 0..n {
        for _ in 0..8 {
            let a = worlds[0].query(i);
            let b = worlds[1].query(i);
            indistinguishable &= a == b;
        }
    }
    let mut rows = Vec::new();
    for f in two_point_class().members() {
        let mut worst = [0.0f64; 2];
        for (w, world) in worlds.iter().enumerate() {
            for i in 0..n {
                if let Some(dist) = world.mode(i).distribution() {
                    worst[w] = worst[w].max(error_rate(&f, world.target(), dist)?);
                }
            }
        }
        let labels: String = f
            .labels()
            .iter()
            .map(|&l| if l { '1' } else { '0' })
            .collect();
        rows.push(ImpossibilityRow {
            classifier: labels,
            worst_error: worst,
            fails_some_case: worst.iter().any(|&e| e >= 1.0),
        });
    }
    let passed = indistinguishable && rows.len() == 4 && rows.iter().all(|r| r.fails_some_case);
    Ok(ImpossibilityVerdict {
        n,
        indistinguishable,
        rows,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
}

pub const OVERHEAD_CSV_HEADER: &str =
    "n,d,eta,trials,mean_total,se_total,single_user,ratio,ratio_se,baseline_ratio,predicted_budget,success_rate";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadEstimate {
    pub n: usize,
    pub d: usize,
    pub eta: f64,
    pub trials: usize,
    /// Mean samples drawn by the iterative learner.
    pub mean_total: f64,
    pub se_total: f64,
    /// Mean samples of single-user PAC learning at the same `(d, ε, δ)`.
    pub single_user: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    /// Independent learning on all `n` users, over the same normalizer.
    pub baseline_ratio: f64,
    /// `d ln(1/ε)/ε · (ηn + ln n) + n ln(n/δ)/ε`, without constants.
    pub predicted_budget: f64,
    pub success_rate: f64,
}

impl OverheadEstimate {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.3},{:.3},{:.3},{:.6},{:.6},{:.6},{:.3},{:.6}",
            self.n,
            self.d,
            self.eta,
            self.trials,
            self.mean_total,
            self.se_total,
            self.single_user,
            self.ratio,
            self.ratio_se,
            self.baseline_ratio,
            self.predicted_budget,
            self.success_rate
        )
    }
}

/// Overhead accuracy and confidence, fixed at 0.1 each.
pub const OVERHEAD_EPS: f64 = 0.1;
pub const OVERHEAD_DELTA: f64 = 0.1;

fn mean_and_se(xs: &[u64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<u64>() as f64 / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Measures the sample overhead of the iterative learner on powerset
/// classes with random heterogeneous users and `⌊ηn⌋` random pretenders.
pub fn measure_overhead(
    sweep: &[SweepPoint],
    trials: usize,
    seed: u64,
    constants: &LearnerConstants,
) -> Result<Vec<OverheadEstimate>> {
    check_trials(trials, 1)?;
    let (eps, delta) = (OVERHEAD_EPS, OVERHEAD_DELTA);
    sweep
        .iter()
        .enumerate()
        .map(|(k, point)| {
            let class = HypothesisClass::powerset(point.d)?;
            let config = CollaborativeConfig {
                class: class.clone(),
                n: point.n,
                eta: point.eta,
                family: DistributionFamily::RandomWeights,
                pretender: PretenderKind::Random,
                eps,
                delta,
                constants: constants.clone(),
            };
            let point_seed = derive_seed(seed, k as u64);
            let (report, _) =
                collaborative_trials(&config, trials, point_seed, PassRule::ThreeSigma)?;
            let (mean_total, se_total) = mean_and_se(&report.ledger_totals);

            let single_config = RandomInstanceConfig {
                n: 1,
                eta: 0.0,
                ..config.instance_config()
            };
            let mut single = make_random_instance(&single_config, point_seed)?;
            let single_user = run_naive_baseline(&mut single, eps, delta, constants)?
                .ledger
                .total as f64;
            let mut all = make_random_instance(&config.instance_config(), point_seed)?;
            let baseline_total = run_naive_baseline(&mut all, eps, delta, constants)?
                .ledger
                .total as f64;

            let (n, d) = (point.n as f64, point.d as f64);
            let predicted_budget = d * (1.0 / eps).ln() / eps
                * (adversary_budget(point.eta, point.n) as f64 + n.ln())
                + n * (n / delta).ln() / eps;
            Ok(OverheadEstimate {
                n: point.n,
                d: point.d,
                eta: point.eta,
                trials,
                mean_total,
                se_total,
                single_user,
                ratio: mean_total / single_user,
                ratio_se: se_total / single_user,
                baseline_ratio: baseline_total / single_user,
                predicted_budget,
                success_rate: report.rate,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundConfig {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub constants: LearnerConstants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub config: LowerBoundConfig,
    pub seed: u64,
    pub trials: usize,
    pub mean_total: f64,
    pub se_total: f64,
    /// `(⌊ηn⌋ + 1) · γ · pac_sample_size(d, ε, δ, c_pac)`.
    pub bound: f64,
    pub success_rate: f64,
    pub passed: bool,
}

impl LowerBoundReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Mean cost of the iterative learner on the lower-bound instance, compared
/// with `(⌊ηn⌋ + 1)` single-user PAC budgets scaled by `γ`.
pub fn check_lower_bound_cost(
    config: &LowerBoundConfig,
    trials: usize,
    seed: u64,
) -> Result<LowerBoundReport> {
    check_trials(trials, 1)?;
    let params = RunParams {
        eps: config.eps,
        delta: config.delta,
        eta: config.eta,
    };
    let results = run_trials(trials, seed, |s| {
        let mut inst = make_lower_bound_instance(config.n, config.d, config.eps, config.eta, s)?;
        let run = run_robust_collaborative(&mut inst, &params, &config.constants)?;
        Ok((
            run.ledger.total,
            assess(&inst, &run.outputs, config.eps)?.success,
        ))
    })?;
    let totals: Vec<u64> = results.iter().map(|r| r.0).collect();
    let (mean_total, se_total) = mean_and_se(&totals);
    let pac = pac_sample_size(config.d, config.eps, config.delta, config.constants.c_pac)? as f64;
    let bound = (adversary_budget(config.eta, config.n) + 1) as f64 * config.gamma * pac;
    let success_rate = results.iter().filter(|r| r.1).count() as f64 / trials as f64;
    Ok(LowerBoundReport {
        config: config.clone(),
        seed,
        trials,
        mean_total,
        se_total,
        bound,
        success_rate,
        passed: mean_total >= bound,
    })
}
