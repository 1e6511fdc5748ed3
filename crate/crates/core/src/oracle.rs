//! User oracles, sample metering and instance construction.
//!
//! An [`Instance`] owns the hypothesis class, the hidden target and one oracle
//! per user. Learners only see it through the [`OracleSet`] trait: the class,
//! the number of users, the declared adversary fraction and a metered
//! `query`. The target and the truthful mask stay on the evaluation side.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{
    Distribution, Hypothesis, HypothesisClass, LabeledExample, Point, Sampler,
};
use crate::rng::{derive_seed, stream_rng};

const GENERATOR_TAG: u64 = 0x0067_656e;
const ORACLE_TAG: u64 = 0x006f_7261;

/// `⌊η n⌋`, the number of adversaries an instance may contain.
///
/// A small slack absorbs products such as `0.1 * 20` landing just below an integer.
pub fn adversary_budget(eta: f64, n: usize) -> usize {
    (eta * n as f64 + 1e-9).floor().max(0.0) as usize
}

/// How an adversarial oracle answers queries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    /// Imitates a truthful user whose target is `fake_target`.
    Pretender {
        fake_target: Hypothesis,
        dist: Distribution,
    },
    /// Returns the same example on every query.
    FixedExample { example: LabeledExample },
    /// Draws from `dist` and flips the true label with probability `label_flip_prob`.
    RandomNoise {
        dist: Distribution,
        label_flip_prob: f64,
    },
    /// Returns the class's null point (⊥ when present) with its true label.
    Silent,
    /// Replays the latest truthful sample with its label flipped. Reads the
    /// shared query transcript.
    Echo,
}

impl AdversaryStrategy {
    pub fn needs_transcript(&self) -> bool {
        matches!(self, AdversaryStrategy::Echo)
    }

    fn validate(&self, class: &HypothesisClass) -> Result<()> {
        let domain_size = class.domain_size();
        match self {
            AdversaryStrategy::Pretender { fake_target, dist } => {
                if fake_target.domain_size() != domain_size {
                    return Err(Error::DomainMismatch {
                        expected: domain_size,
                        found: fake_target.domain_size(),
                    });
                }
                dist.check_domain(domain_size)
            }
            AdversaryStrategy::FixedExample { example } => class.check_point(example.point),
            AdversaryStrategy::RandomNoise {
                dist,
                label_flip_prob,
            } => {
                if !(0.0..=1.0).contains(label_flip_prob) {
                    return Err(Error::param(
                        "label_flip_prob",
                        format!("must lie in [0, 1], got {label_flip_prob}"),
                    ));
                }
                dist.check_domain(domain_size)
            }
            AdversaryStrategy::Silent | AdversaryStrategy::Echo => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OracleMode {
    Truthful { dist: Distribution },
    Adversarial { strategy: AdversaryStrategy },
}

impl OracleMode {
    pub fn is_truthful(&self) -> bool {
        matches!(self, OracleMode::Truthful { .. })
    }

    /// The distribution a truthful oracle samples from.
    pub fn distribution(&self) -> Option<&Distribution> {
        match self {
            OracleMode::Truthful { dist } => Some(dist),
            OracleMode::Adversarial { .. } => None,
        }
    }
}

/// Ground truth for evaluators. Never consulted by learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub truthful_mask: Vec<bool>,
}

/// Serializable description of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub generator: String,
    pub seed: u64,
    pub eta: f64,
    pub class: HypothesisClass,
    pub target: Hypothesis,
    pub oracles: Vec<OracleMode>,
    /// Derived from `oracles`; documented as hidden from learners.
    pub evaluation: Evaluation,
}

/// Per-oracle query counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLedger {
    pub per_oracle: Vec<u64>,
    pub total: u64,
}

impl SampleLedger {
    pub fn new(n: usize) -> Self {
        Self {
            per_oracle: vec![0; n],
            total: 0,
        }
    }

    pub fn record(&mut self, oracle: usize) {
        self.per_oracle[oracle] += 1;
        self.total += 1;
    }

    /// Counts accumulated since `earlier`.
    pub fn since(&self, earlier: &SampleLedger) -> SampleLedger {
        let per_oracle: Vec<u64> = self
            .per_oracle
            .iter()
            .zip(&earlier.per_oracle)
            .map(|(now, then)| now - then)
            .collect();
        SampleLedger {
            total: per_oracle.iter().sum(),
            per_oracle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub oracle: usize,
    pub example: LabeledExample,
}

/// What a learner may do with an instance.
pub trait OracleSet {
    fn class(&self) -> &HypothesisClass;
    fn n(&self) -> usize;
    /// Declared bound on the adversary fraction.
    fn eta(&self) -> f64;
    fn query(&mut self, oracle: usize) -> LabeledExample;
    fn ledger(&self) -> &SampleLedger;
}

#[derive(Clone, Debug)]
struct OracleState {
    rng: ChaCha8Rng,
    sampler: Option<Sampler>,
}

/// A live instance: its `InstanceSpec` plus per-oracle RNG streams, the ledger and the
/// shared transcript.
#[derive(Clone, Debug)]
pub struct Instance {
    spec: InstanceSpec,
    states: Vec<OracleState>,
    ledger: SampleLedger,
    transcript: Option<Vec<TranscriptEntry>>,
}

impl Instance {
    pub fn new(spec: InstanceSpec) -> Result<Self> {
        let n = spec.oracles.len();
        if n == 0 {
            return Err(Error::Instance(
                "an instance needs at least one oracle".into(),
            ));
        }
        if !(0.0..=1.0).contains(&spec.eta) {
            return Err(Error::param(
                "eta",
                format!("must lie in [0, 1], got {}", spec.eta),
            ));
        }
        if !spec.class.contains(&spec.target) {
            return Err(Error::Instance(
                "target is not a member of the class".into(),
            ));
        }
        let domain_size = spec.class.domain_size();
        for mode in &spec.oracles {
            match mode {
                OracleMode::Truthful { dist } => dist.check_domain(domain_size)?,
                OracleMode::Adversarial { strategy } => strategy.validate(&spec.class)?,
            }
        }
        let adversaries = spec.oracles.iter().filter(|m| !m.is_truthful()).count();
        let budget = adversary_budget(spec.eta, n);
        if adversaries > budget {
            return Err(Error::Instance(format!(
                "{adversaries} adversarial oracles exceed floor(eta * n) = {budget}"
            )));
        }
        let mask: Vec<bool> = spec.oracles.iter().map(OracleMode::is_truthful).collect();
        if spec.evaluation.truthful_mask != mask {
            return Err(Error::Instance(
                "truthful_mask disagrees with oracle modes".into(),
            ));
        }

        let oracle_seed = derive_seed(spec.seed, ORACLE_TAG);
        let states = spec
            .oracles
            .iter()
            .enumerate()
            .map(|(i, mode)| OracleState {
                rng: stream_rng(oracle_seed, i as u64),
                sampler: match mode {
                    OracleMode::Truthful { dist }
                    | OracleMode::Adversarial {
                        strategy: AdversaryStrategy::Pretender { dist, .. },
                    }
                    | OracleMode::Adversarial {
                        strategy: AdversaryStrategy::RandomNoise { dist, .. },
                    } => Some(dist.sampler()),
                    _ => None,
                },
            })
            .collect();
        let transcript = spec
            .oracles
            .iter()
            .any(|m| matches!(m, OracleMode::Adversarial { strategy } if strategy.needs_transcript()))
            .then(Vec::new);
        Ok(Self {
            ledger: SampleLedger::new(n),
            spec,
            states,
            transcript,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: InstanceSpec = serde_json::from_str(text)?;
        Self::new(spec)
    }

    pub fn spec(&self) -> &InstanceSpec {
        &self.spec
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }

    pub fn target(&self) -> &Hypothesis {
        &self.spec.target
    }

    pub fn truthful_mask(&self) -> &[bool] {
        &self.spec.evaluation.truthful_mask
    }

    pub fn mode(&self, oracle: usize) -> &OracleMode {
        &self.spec.oracles[oracle]
    }

    pub fn adversary_count(&self) -> usize {
        self.truthful_mask().iter().filter(|t| !**t).count()
    }

    /// Read access granted to colluding adversaries.
    pub fn transcript(&self) -> Option<&[TranscriptEntry]> {
        self.transcript.as_deref()
    }

    fn answer(&mut self, oracle: usize) -> LabeledExample {
        let target = &self.spec.target;
        let state = &mut self.states[oracle];
        match &self.spec.oracles[oracle] {
            OracleMode::Truthful { .. } => {
                let x = state
                    .sampler
                    .as_ref()
                    .expect("truthful sampler")
                    .sample(&mut state.rng);
                LabeledExample {
                    point: x,
                    label: target.label_unchecked(x),
                }
            }
            OracleMode::Adversarial { strategy } => match strategy {
                AdversaryStrategy::Pretender { fake_target, .. } => {
                    let x = state
                        .sampler
                        .as_ref()
                        .expect("pretender sampler")
                        .sample(&mut state.rng);
                    LabeledExample {
                        point: x,
                        label: fake_target.label_unchecked(x),
                    }
                }
                AdversaryStrategy::FixedExample { example } => *example,
                AdversaryStrategy::RandomNoise {
                    label_flip_prob, ..
                } => {
                    let x = state
                        .sampler
                        .as_ref()
                        .expect("noise sampler")
                        .sample(&mut state.rng);
                    let flip = state.rng.gen_bool(*label_flip_prob);
                    LabeledExample {
                        point: x,
                        label: target.label_unchecked(x) ^ flip,
                    }
                }
                AdversaryStrategy::Silent => {
                    let x = self.spec.class.null_point();
                    LabeledExample {
                        point: x,
                        label: target.label_unchecked(x),
                    }
                }
                AdversaryStrategy::Echo => {
                    let mask = &self.spec.evaluation.truthful_mask;
                    let last = self
                        .transcript
                        .as_ref()
                        .and_then(|t| t.iter().rev().find(|e| mask[e.oracle]));
                    match last {
                        Some(e) => LabeledExample {
                            point: e.example.point,
                            label: !e.example.label,
                        },
                        None => {
                            let x = self.spec.class.null_point();
                            LabeledExample {
                                point: x,
                                label: !target.label_unchecked(x),
                            }
                        }
                    }
                }
            },
        }
    }
}

impl OracleSet for Instance {
    fn class(&self) -> &HypothesisClass {
        &self.spec.class
    }

    fn n(&self) -> usize {
        self.spec.oracles.len()
    }

    fn eta(&self) -> f64 {
        self.spec.eta
    }

    fn query(&mut self, oracle: usize) -> LabeledExample {
        let example = self.answer(oracle);
        self.ledger.record(oracle);
        if let Some(t) = self.transcript.as_mut() {
            t.push(TranscriptEntry { oracle, example });
        }
        example
    }

    fn ledger(&self) -> &SampleLedger {
        &self.ledger
    }
}

fn assemble(
    generator: &str,
    seed: u64,
    eta: f64,
    class: HypothesisClass,
    target: Hypothesis,
    oracles: Vec<OracleMode>,
) -> Result<Instance> {
    let truthful_mask = oracles.iter().map(OracleMode::is_truthful).collect();
    Instance::new(InstanceSpec {
        generator: generator.to_string(),
        seed,
        eta,
        class,
        target,
        oracles,
        evaluation: Evaluation { truthful_mask },
    })
}

/// The hard instance for the `Ω(η n d / ε)` lower bound.
///
/// Powerset class on `[d] ∪ {⊥}` with a uniformly random target. One truthful
/// user `i*` puts mass `2ε/d` on each point of `[d]` and `1 - 2ε` on ⊥; the
/// other truthful users only ever see ⊥. Each of the `⌊η n⌋` adversaries
/// samples from `i*`'s distribution but labels with its own uniformly random
/// member of the class. User positions are shuffled.
pub fn make_lower_bound_instance(
    n: usize,
    d: usize,
    eps: f64,
    eta: f64,
    seed: u64,
) -> Result<Instance> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::param(
            "eps",
            format!("must lie in (0, 1/2], got {eps}"),
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param(
            "eta",
            format!("must lie in [0, 1], got {eta}"),
        ));
    }
    let adversaries = adversary_budget(eta, n);
    if adversaries == 0 || adversaries >= n {
        return Err(Error::param(
            "eta",
            format!("floor(eta * n) = {adversaries} must lie in [1, n - 1] for n = {n}"),
        ));
    }
    let class = HypothesisClass::powerset(d)?;
    let bottom = class.bottom().expect("powerset has ⊥");
    let mut rng = stream_rng(derive_seed(seed, GENERATOR_TAG), 0);
    let target = class.random_member(&mut rng);

    let mut support: Vec<(Point, f64)> = (0..d).map(|i| (Point(i), 2.0 * eps / d as f64)).collect();
    support.push((bottom, 1.0 - 2.0 * eps));
    let informative = Distribution::new(support)?;

    let mut oracles = Vec::with_capacity(n);
    for _ in 0..n - adversaries - 1 {
        oracles.push(OracleMode::Truthful {
            dist: Distribution::point_mass(bottom),
        });
    }
    oracles.push(OracleMode::Truthful {
        dist: informative.clone(),
    });
    for _ in 0..adversaries {
        oracles.push(OracleMode::Adversarial {
            strategy: AdversaryStrategy::Pretender {
                fake_target: class.random_member(&mut rng),
                dist: informative.clone(),
            },
        });
    }
    oracles.shuffle(&mut rng);
    assemble("lower-bound", seed, eta, class, target, oracles)
}

/// Which of the two indistinguishable worlds to build.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImpossibilityCase {
    /// Target labels both points 0; oracle 0 lies with `(x1, 1)`.
    ZeroTarget,
    /// Target labels `x1` with 1; oracle 1 lies with `(x1, 0)`.
    OneTarget,
}

impl ImpossibilityCase {
    pub fn from_index(case: u8) -> Result<Self> {
        match case {
            0 => Ok(Self::ZeroTarget),
            1 => Ok(Self::OneTarget),
            other => Err(Error::param("case", format!("must be 0 or 1, got {other}"))),
        }
    }
}

/// The class of all four functions on `{x0, x1}` (VC dimension 2).
pub fn two_point_class() -> HypothesisClass {
    HypothesisClass::finite_explicit(
        2,
        vec![
            vec![false, false],
            vec![true, false],
            vec![false, true],
            vec![true, true],
        ],
        2,
    )
    .expect("valid two-point class")
}

/// Two worlds no learner can tell apart, for the centralized setting.
///
/// Users 0 and 1 put all their mass on `x1`, every other user on `x0`. In
/// each case exactly one of the first two users is adversarial and reports
/// the label the other world's target would give, so every oracle's answer
/// is the same constant in both worlds. `η` is declared as `1/n`.
pub fn make_centralized_impossibility_instance(
    n: usize,
    case: ImpossibilityCase,
) -> Result<Instance> {
    if n < 2 {
        return Err(Error::param("n", format!("must be at least 2, got {n}")));
    }
    let class = two_point_class();
    let (x0, x1) = (Point(0), Point(1));
    let (target, liar, lie) = match case {
        ImpossibilityCase::ZeroTarget => (Hypothesis::explicit(vec![false, false]), 0, true),
        ImpossibilityCase::OneTarget => (Hypothesis::explicit(vec![false, true]), 1, false),
    };
    let oracles = (0..n)
        .map(|i| {
            if i == liar {
                OracleMode::Adversarial {
                    strategy: AdversaryStrategy::FixedExample {
                        example: LabeledExample {
                            point: x1,
                            label: lie,
                        },
                    },
                }
            } else if i < 2 {
                OracleMode::Truthful {
                    dist: Distribution::point_mass(x1),
                }
            } else {
                OracleMode::Truthful {
                    dist: Distribution::point_mass(x0),
                }
            }
        })
        .collect();
    assemble("impossibility", 0, 1.0 / n as f64, class, target, oracles)
}

/// Shape of truthful users' distributions in [`make_random_instance`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionFamily {
    /// Every user is uniform over the whole domain.
    Uniform,
    /// Independent Uniform(0,1) weights per point, normalized, per user.
    RandomWeights,
}

/// How far a pretender's fake target sits from the true one.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PretenderKind {
    /// Uniformly random member of the class.
    Random,
    /// A member differing from the target at a single point (powerset) or
    /// by one step (threshold).
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceConfig {
    pub class: HypothesisClass,
    pub n: usize,
    pub eta: f64,
    /// Number of pretenders; `None` fills the whole budget `⌊η n⌋`.
    pub adversaries: Option<usize>,
    pub family: DistributionFamily,
    pub pretender: PretenderKind,
}

fn close_member<R: Rng + ?Sized>(
    class: &HypothesisClass,
    target: &Hypothesis,
    rng: &mut R,
) -> Hypothesis {
    use crate::hypothesis::ClassKind;
    match class.kind() {
        ClassKind::Powerset { d } => {
            let mut labels = target.labels();
            let flip = rng.gen_range(0..*d);
            labels[flip] = !labels[flip];
            Hypothesis::explicit(labels)
        }
        ClassKind::Threshold { m } => {
            let t = match target {
                Hypothesis::Threshold { threshold, .. } => *threshold,
                other => other.labels().iter().position(|&l| l).unwrap_or(*m),
            };
            let next = if t == 0 || (t < *m && rng.gen_bool(0.5)) {
                t + 1
            } else {
                t - 1
            };
            Hypothesis::threshold(next, *m)
        }
        ClassKind::FiniteExplicit { .. } => {
            let labels = target.labels();
            class
                .members()
                .filter(|f| f.labels() != labels)
                .min_by_key(|f| {
                    f.labels()
                        .iter()
                        .zip(&labels)
                        .filter(|(a, b)| a != b)
                        .count()
                })
                .unwrap_or_else(|| target.clone())
        }
    }
}

/// A random instance: uniformly random target, truthful users drawn from
/// `family`, and pretenders that copy a random truthful user's distribution
/// and label it with a fake target. Adversary positions are shuffled.
pub fn make_random_instance(config: &RandomInstanceConfig, seed: u64) -> Result<Instance> {
    let n = config.n;
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let budget = adversary_budget(config.eta, n);
    let adversaries = config.adversaries.unwrap_or(budget);
    if adversaries > budget || adversaries >= n {
        return Err(Error::param(
            "adversaries",
            format!("{adversaries} adversaries with floor(eta * n) = {budget}, n = {n}"),
        ));
    }
    let class = config.class.clone();
    let domain_size = class.domain_size();
    let mut rng = stream_rng(derive_seed(seed, GENERATOR_TAG), 0);
    let target = class.random_member(&mut rng);

    let draw_dist = |rng: &mut ChaCha8Rng| -> Result<Distribution> {
        match config.family {
            DistributionFamily::Uniform => {
                Distribution::uniform(&(0..domain_size).map(Point).collect::<Vec<_>>())
            }
            DistributionFamily::RandomWeights => {
                let w: Vec<f64> = (0..domain_size).map(|_| rng.gen::<f64>() + 1e-12).collect();
                Distribution::from_weights(&w)
            }
        }
    };
    let truthful: Vec<Distribution> = (0..n - adversaries)
        .map(|_| draw_dist(&mut rng))
        .collect::<Result<_>>()?;
    let mut oracles: Vec<OracleMode> = truthful
        .iter()
        .cloned()
        .map(|dist| OracleMode::Truthful { dist })
        .collect();
    for _ in 0..adversaries {
        let dist = truthful[rng.gen_range(0..truthful.len())].clone();
        let fake_target = match config.pretender {
            PretenderKind::Random => class.random_member(&mut rng),
            PretenderKind::Close => close_member(&class, &target, &mut rng),
        };
        oracles.push(OracleMode::Adversarial {
            strategy: AdversaryStrategy::Pretender { fake_target, dist },
        });
    }
    oracles.shuffle(&mut rng);
    assemble("random", seed, config.eta, class, target, oracles)
}
