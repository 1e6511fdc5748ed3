//! Domain points, hypotheses, hypothesis classes with a consistency oracle,
//! finite-support distributions and exact error rates.

use std::sync::Arc;

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`Distribution`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Index of an element of a finite domain.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub usize);

impl Point {
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub point: Point,
    #[serde(with = "label01")]
    pub label: bool,
}

impl LabeledExample {
    pub fn new(point: usize, label: bool) -> Self {
        Self {
            point: Point(point),
            label,
        }
    }
}

/// Labels travel as `0`/`1` in JSON.
mod label01 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(label: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*label))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!(
                "label must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// Label vectors travel as `"0110..."` strings.
mod bitstring {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(labels: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let text: String = labels.iter().map(|&b| if b { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(D::Error::custom(format!(
                    "invalid label character {other:?}"
                ))),
            })
            .collect()
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(members: &[Vec<bool>], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(members.len()))?;
            for m in members {
                let text: String = m.iter().map(|&b| if b { '1' } else { '0' }).collect();
                seq.serialize_element(&text)?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<bool>>, D::Error> {
            let texts = Vec::<String>::deserialize(d)?;
            texts
                .into_iter()
                .map(|t| {
                    t.chars()
                        .map(|c| match c {
                            '0' => Ok(false),
                            '1' => Ok(true),
                            other => Err(serde::de::Error::custom(format!(
                                "invalid label character {other:?}"
                            ))),
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// A total binary function on a finite domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hypothesis {
    /// One label per domain point.
    Explicit {
        #[serde(with = "bitstring")]
        labels: Vec<bool>,
    },
    /// Label 1 iff `index >= threshold`.
    Threshold {
        threshold: usize,
        domain_size: usize,
    },
}

impl Hypothesis {
    pub fn explicit(labels: Vec<bool>) -> Self {
        Hypothesis::Explicit { labels }
    }

    pub fn threshold(threshold: usize, domain_size: usize) -> Self {
        Hypothesis::Threshold {
            threshold,
            domain_size,
        }
    }

    pub fn domain_size(&self) -> usize {
        match self {
            Hypothesis::Explicit { labels } => labels.len(),
            Hypothesis::Threshold { domain_size, .. } => *domain_size,
        }
    }

    pub fn evaluate(&self, x: Point) -> Result<bool> {
        let domain_size = self.domain_size();
        if x.0 >= domain_size {
            return Err(Error::Domain {
                point: x.0,
                domain_size,
            });
        }
        Ok(self.label_unchecked(x))
    }

    #[inline]
    pub(crate) fn label_unchecked(&self, x: Point) -> bool {
        match self {
            Hypothesis::Explicit { labels } => labels[x.0],
            Hypothesis::Threshold { threshold, .. } => x.0 >= *threshold,
        }
    }

    /// The hypothesis as an explicit label vector.
    pub fn labels(&self) -> Vec<bool> {
        (0..self.domain_size())
            .map(|i| self.label_unchecked(Point(i)))
            .collect()
    }

    pub fn agrees_with(&self, examples: &[LabeledExample]) -> Result<bool> {
        for ex in examples {
            if self.evaluate(ex.point)? != ex.label {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The three built-in class families.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassKind {
    /// All functions on `[d] ∪ {⊥}` mapping ⊥ to 0. ⊥ is the point with index `d`.
    Powerset { d: usize },
    /// Thresholds `t ∈ 0..=m` over the points `0..m`.
    Threshold { m: usize },
    /// An explicit list of members.
    FiniteExplicit {
        domain_size: usize,
        vc_dimension: usize,
        #[serde(with = "bitstring::vec")]
        members: Vec<Vec<bool>>,
    },
}

/// Per-point member bitsets for a finite explicit class.
#[derive(Debug)]
struct MemberIndex {
    words: usize,
    /// `ones[p]` has bit `j` set iff member `j` labels point `p` with 1.
    ones: Vec<Vec<u64>>,
    len: usize,
}

impl MemberIndex {
    fn build(domain_size: usize, members: &[Vec<bool>]) -> Self {
        let words = members.len().div_ceil(64);
        let mut ones = vec![vec![0u64; words]; domain_size];
        for (j, m) in members.iter().enumerate() {
            for (p, &label) in m.iter().enumerate() {
                if label {
                    ones[p][j / 64] |= 1 << (j % 64);
                }
            }
        }
        Self {
            words,
            ones,
            len: members.len(),
        }
    }

    fn first_consistent(&self, examples: &[LabeledExample]) -> Option<usize> {
        let mut alive = vec![u64::MAX; self.words];
        if !self.len.is_multiple_of(64) {
            if let Some(last) = alive.last_mut() {
                *last = (1u64 << (self.len % 64)) - 1;
            }
        }
        for ex in examples {
            let row = &self.ones[ex.point.0];
            let mut any = 0;
            for (a, &r) in alive.iter_mut().zip(row) {
                *a &= if ex.label { r } else { !r };
                any |= *a;
            }
            if any == 0 {
                return None;
            }
        }
        alive
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
}

/// A hypothesis class over a finite domain together with its consistency oracle.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ClassKind", into = "ClassKind")]
pub struct HypothesisClass {
    kind: ClassKind,
    index: Option<Arc<MemberIndex>>,
}

impl PartialEq for HypothesisClass {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl TryFrom<ClassKind> for HypothesisClass {
    type Error = Error;

    fn try_from(kind: ClassKind) -> Result<Self> {
        match kind {
            ClassKind::Powerset { d } => Self::powerset(d),
            ClassKind::Threshold { m } => Self::threshold(m),
            ClassKind::FiniteExplicit {
                domain_size,
                vc_dimension,
                members,
            } => Self::finite_explicit(domain_size, members, vc_dimension),
        }
    }
}

impl From<HypothesisClass> for ClassKind {
    fn from(c: HypothesisClass) -> Self {
        c.kind
    }
}

impl HypothesisClass {
    pub fn powerset(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Class("powerset class needs d >= 1".into()));
        }
        Ok(Self {
            kind: ClassKind::Powerset { d },
            index: None,
        })
    }

    pub fn threshold(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Class("threshold class needs m >= 1 points".into()));
        }
        Ok(Self {
            kind: ClassKind::Threshold { m },
            index: None,
        })
    }

    /// Builds an explicit class. The declared VC dimension must not exceed
    /// `log2(|members|)`, and every member must be a total function on the domain.
    pub fn finite_explicit(
        domain_size: usize,
        members: Vec<Vec<bool>>,
        vc_dimension: usize,
    ) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::Class("empty domain".into()));
        }
        if members.is_empty() {
            return Err(Error::Class(
                "finite class needs at least one member".into(),
            ));
        }
        if let Some(bad) = members.iter().position(|m| m.len() != domain_size) {
            return Err(Error::Class(format!(
                "member {bad} has {} labels, domain has {domain_size} points",
                members[bad].len()
            )));
        }
        let log2_size = usize::BITS as usize - 1 - members.len().leading_zeros() as usize;
        if vc_dimension > log2_size {
            return Err(Error::Class(format!(
                "declared VC dimension {vc_dimension} exceeds log2(|F|) = {log2_size}"
            )));
        }
        let index = Arc::new(MemberIndex::build(domain_size, &members));
        Ok(Self {
            kind: ClassKind::FiniteExplicit {
                domain_size,
                vc_dimension,
                members,
            },
            index: Some(index),
        })
    }

    pub fn kind(&self) -> &ClassKind {
        &self.kind
    }

    pub fn domain_size(&self) -> usize {
        match &self.kind {
            ClassKind::Powerset { d } => d + 1,
            ClassKind::Threshold { m } => *m,
            ClassKind::FiniteExplicit { domain_size, .. } => *domain_size,
        }
    }

    pub fn vc_dimension(&self) -> usize {
        match &self.kind {
            ClassKind::Powerset { d } => *d,
            ClassKind::Threshold { .. } => 1,
            ClassKind::FiniteExplicit { vc_dimension, .. } => *vc_dimension,
        }
    }

    /// The reserved ⊥ point, for classes that have one.
    pub fn bottom(&self) -> Option<Point> {
        match &self.kind {
            ClassKind::Powerset { d } => Some(Point(*d)),
            _ => None,
        }
    }

    /// ⊥ where it exists, otherwise the first point.
    pub fn null_point(&self) -> Point {
        self.bottom().unwrap_or(Point(0))
    }

    pub fn check_point(&self, x: Point) -> Result<()> {
        let domain_size = self.domain_size();
        if x.0 < domain_size {
            Ok(())
        } else {
            Err(Error::Domain {
                point: x.0,
                domain_size,
            })
        }
    }

    /// Number of members, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        match &self.kind {
            ClassKind::Powerset { d } => 1u128.checked_shl(*d as u32).unwrap_or(u128::MAX),
            ClassKind::Threshold { m } => *m as u128 + 1,
            ClassKind::FiniteExplicit { members, .. } => members.len() as u128,
        }
    }

    pub fn contains(&self, f: &Hypothesis) -> bool {
        if f.domain_size() != self.domain_size() {
            return false;
        }
        match &self.kind {
            ClassKind::Powerset { d } => !f.label_unchecked(Point(*d)),
            ClassKind::Threshold { m } => match f {
                Hypothesis::Threshold { threshold, .. } => threshold <= m,
                Hypothesis::Explicit { labels } => labels.windows(2).all(|w| w[0] <= w[1]),
            },
            ClassKind::FiniteExplicit { members, .. } => {
                let labels = f.labels();
                members.contains(&labels)
            }
        }
    }

    /// Enumerates every member. Intended for small classes and exhaustive checks.
    pub fn members(&self) -> Box<dyn Iterator<Item = Hypothesis> + '_> {
        match &self.kind {
            ClassKind::Powerset { d } => {
                let d = *d;
                assert!(d < 64, "powerset enumeration limited to d < 64");
                Box::new((0..1u64 << d).map(move |mask| {
                    let mut labels: Vec<bool> = (0..d).map(|i| mask >> i & 1 == 1).collect();
                    labels.push(false);
                    Hypothesis::explicit(labels)
                }))
            }
            ClassKind::Threshold { m } => {
                let m = *m;
                Box::new((0..=m).map(move |t| Hypothesis::threshold(t, m)))
            }
            ClassKind::FiniteExplicit { members, .. } => {
                Box::new(members.iter().cloned().map(Hypothesis::explicit))
            }
        }
    }

    /// A member drawn uniformly at random.
    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Hypothesis {
        match &self.kind {
            ClassKind::Powerset { d } => {
                let mut labels: Vec<bool> = (0..*d).map(|_| rng.gen()).collect();
                labels.push(false);
                Hypothesis::explicit(labels)
            }
            ClassKind::Threshold { m } => Hypothesis::threshold(rng.gen_range(0..=*m), *m),
            ClassKind::FiniteExplicit { members, .. } => {
                Hypothesis::explicit(members[rng.gen_range(0..members.len())].clone())
            }
        }
    }

    /// The consistency oracle. Returns a member agreeing with every example,
    /// or `None` when the class has no such member.
    ///
    /// Ties are broken deterministically: powerset members label every
    /// unconstrained point 0, thresholds take the smallest consistent `t`, and
    /// explicit classes return the first consistent member in declaration order.
    pub fn consistent(&self, examples: &[LabeledExample]) -> Result<Option<Hypothesis>> {
        for ex in examples {
            self.check_point(ex.point)?;
        }
        Ok(self.consistent_unchecked(examples.iter()))
    }

    /// Consistency over the concatenation of several datasets.
    pub fn consistent_union<'a, I>(&self, datasets: I) -> Result<Option<Hypothesis>>
    where
        I: IntoIterator<Item = &'a [LabeledExample]> + Clone,
    {
        for ex in datasets.clone().into_iter().flatten() {
            self.check_point(ex.point)?;
        }
        Ok(self.consistent_unchecked(datasets.into_iter().flatten()))
    }

    fn consistent_unchecked<'a>(
        &self,
        examples: impl Iterator<Item = &'a LabeledExample>,
    ) -> Option<Hypothesis> {
        match &self.kind {
            ClassKind::Powerset { d } => {
                let mut seen: Vec<Option<bool>> = vec![None; d + 1];
                seen[*d] = Some(false);
                for ex in examples {
                    match seen[ex.point.0] {
                        Some(l) if l != ex.label => return None,
                        _ => seen[ex.point.0] = Some(ex.label),
                    }
                }
                Some(Hypothesis::explicit(
                    seen.into_iter().map(|l| l.unwrap_or(false)).collect(),
                ))
            }
            ClassKind::Threshold { m } => {
                // Consistent thresholds form the interval (max zero, min one].
                let mut lo = 0usize;
                let mut hi = *m;
                for ex in examples {
                    if ex.label {
                        hi = hi.min(ex.point.0);
                    } else {
                        lo = lo.max(ex.point.0 + 1);
                    }
                }
                (lo <= hi).then(|| Hypothesis::threshold(lo, *m))
            }
            ClassKind::FiniteExplicit { members, .. } => {
                let examples: Vec<LabeledExample> = examples.copied().collect();
                let index = self
                    .index
                    .as_ref()
                    .expect("explicit class carries an index");
                index
                    .first_consistent(&examples)
                    .map(|j| Hypothesis::explicit(members[j].clone()))
            }
        }
    }

    /// The tie-break minimal member, i.e. the oracle's answer on no data.
    pub fn default_hypothesis(&self) -> Hypothesis {
        self.consistent_unchecked(std::iter::empty())
            .expect("a non-empty class is consistent with the empty sample")
    }
}

/// A probability distribution with finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct Distribution {
    support: Vec<(Point, f64)>,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    support: Vec<(Point, f64)>,
}

impl TryFrom<DistributionRepr> for Distribution {
    type Error = Error;
    fn try_from(r: DistributionRepr) -> Result<Self> {
        Distribution::new(r.support)
    }
}

impl From<Distribution> for DistributionRepr {
    fn from(d: Distribution) -> Self {
        DistributionRepr { support: d.support }
    }
}

impl Distribution {
    pub fn new(support: Vec<(Point, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Distribution("empty support".into()));
        }
        if let Some((p, m)) = support.iter().find(|(_, m)| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Distribution(format!(
                "mass {m} at {p} is not a probability"
            )));
        }
        let total: f64 = support.iter().map(|(_, m)| m).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Distribution(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { support })
    }

    pub fn point_mass(x: Point) -> Self {
        Self {
            support: vec![(x, 1.0)],
        }
    }

    pub fn uniform(points: &[Point]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Distribution("empty support".into()));
        }
        let m = 1.0 / points.len() as f64;
        Self::new(points.iter().map(|&p| (p, m)).collect())
    }

    /// Normalizes non-negative weights over the points `0..weights.len()`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Distribution(
                "weights must have positive finite sum".into(),
            ));
        }
        Self::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| (Point(i), w / total))
                .collect(),
        )
    }

    pub fn support(&self) -> &[(Point, f64)] {
        &self.support
    }

    pub fn mass(&self, x: Point) -> f64 {
        self.support
            .iter()
            .filter(|(p, _)| *p == x)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn check_domain(&self, domain_size: usize) -> Result<()> {
        match self.support.iter().find(|(p, _)| p.0 >= domain_size) {
            Some((p, _)) => Err(Error::Domain {
                point: p.0,
                domain_size,
            }),
            None => Ok(()),
        }
    }

    pub fn sampler(&self) -> Sampler {
        Sampler {
            points: self.support.iter().map(|(p, _)| *p).collect(),
            index: WeightedIndex::new(self.support.iter().map(|(_, m)| *m))
                .expect("validated distribution has positive total mass"),
        }
    }
}

/// Draws points from a [`Distribution`].
#[derive(Clone, Debug)]
pub struct Sampler {
    points: Vec<Point>,
    index: WeightedIndex<f64>,
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.points[self.index.sample(rng)]
    }
}

/// `Pr_{x ~ dist}[f(x) != target(x)]`, computed exactly over the support.
pub fn error_rate(f: &Hypothesis, target: &Hypothesis, dist: &Distribution) -> Result<f64> {
    if f.domain_size() != target.domain_size() {
        return Err(Error::DomainMismatch {
            expected: target.domain_size(),
            found: f.domain_size(),
        });
    }
    dist.check_domain(target.domain_size())?;
    let err: f64 = dist
        .support
        .iter()
        .filter(|(x, _)| f.label_unchecked(*x) != target.label_unchecked(*x))
        .map(|(_, m)| m)
        .sum();
    Ok(err.clamp(0.0, 1.0))
}

/// Rounds a budget up to an integer sample count of at least one.
pub(crate) fn ceil_count(x: f64) -> u64 {
    // Absorb float noise so exact integers are not bumped by one.
    let c = (x - 1e-9).ceil();
    if c < 1.0 {
        1
    } else {
        c as u64
    }
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in (0, 1], got {p}")))
    }
}

pub(crate) fn check_eps_delta(eps: f64, delta: f64) -> Result<()> {
    check_prob("eps", eps)?;
    check_prob("delta", delta)
}

/// Realizable PAC sample size `ceil(c_pac * (d ln(1/eps) + ln(1/delta)) / eps)`,
/// clamped to at least one sample.
pub fn pac_sample_size(d: usize, eps: f64, delta: f64, c_pac: f64) -> Result<u64> {
    check_eps_delta(eps, delta)?;
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    if !(c_pac > 0.0 && c_pac.is_finite()) {
        return Err(Error::param(
            "c_pac",
            format!("must be positive, got {c_pac}"),
        ));
    }
    let raw = c_pac * (d as f64 * (1.0 / eps).ln() + (1.0 / delta).ln()) / eps;
    Ok(ceil_count(raw))
}
