//! Scenario spaces, event algebras, quote systems, gambles, markets and
//! probability vectors.
//!
//! Everything here is immutable once constructed. Constructors validate
//! their invariants and return [`Error::Input`] otherwise.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::CoherenceVerdict;
use crate::rational::{self, Rational};

/// Largest number of atoms an algebra may have (2^20 events).
pub const MAX_ATOMS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpace {
    labels: Vec<String>,
}

impl ScenarioSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Input("scenario space needs at least one scenario".into()));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Input(format!("duplicate scenario label '{l}'")));
            }
        }
        Ok(Self { labels })
    }

    /// Scenarios labelled `w1..wn`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| format!("w{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn full(&self) -> Event {
        Event::full(self.len())
    }

    pub fn empty(&self) -> Event {
        Event::empty(self.len())
    }

    pub fn event<S: AsRef<str>>(&self, labels: &[S]) -> Result<Event> {
        let idx = labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref()).ok_or_else(|| Error::Input(format!("unknown scenario '{}'", l.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Event::from_indices(self.len(), idx)
    }
}

/// A subset of scenario indices, stored as a bit-set.
///
/// Ordering is by cardinality first, then lexicographic on the sorted
/// member list.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Event {
    n: usize,
    words: Vec<u64>,
}

impl Event {
    pub fn empty(n: usize) -> Self {
        Self { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn full(n: usize) -> Self {
        let mut e = Self::empty(n);
        for i in 0..n {
            e.insert(i);
        }
        e
    }

    pub fn from_indices(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut e = Self::empty(n);
        for i in members {
            if i >= n {
                return Err(Error::Input(format!("scenario index {i} out of range for a space of {n} scenarios")));
            }
            e.insert(i);
        }
        Ok(e)
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn space_size(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| self.contains(i))
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn complement(&self) -> Self {
        let mut out = Self::full(self.n);
        for (o, w) in out.words.iter_mut().zip(&self.words) {
            *o &= !w;
        }
        out
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_words(other, |a, b| a & b)
    }

    fn zip_words(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.n, other.n, "events over different spaces");
        Self { n: self.n, words: self.words.iter().zip(&other.words).map(|(a, b)| op(*a, *b)).collect() }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.intersection(other).is_empty()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Indicator vector 𝟏_A as rationals.
    pub fn indicator(&self) -> Vec<Rational> {
        (0..self.n).map(|i| if self.contains(i) { Rational::one() } else { Rational::zero() }).collect()
    }

    pub fn describe(&self, space: &ScenarioSpace) -> String {
        let names: Vec<&str> = self.members().map(|i| space.labels[i].as_str()).collect();
        format!("{{{}}}", names.join(","))
    }
}

impl fmt::Debug for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then(self.len().cmp(&other.len())).then_with(|| self.members().cmp(other.members()))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for Event {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            n: usize,
            members: Vec<usize>,
        }
        Repr { n: self.n, members: self.members().collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            n: usize,
            members: Vec<usize>,
        }
        let r = Repr::deserialize(d)?;
        Event::from_indices(r.n, r.members).map_err(serde::de::Error::custom)
    }
}

/// A finite algebra of events, stored through its atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventAlgebra {
    space: ScenarioSpace,
    atoms: Vec<Event>,
    events: Vec<Event>,
}

impl EventAlgebra {
    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    /// Events in canonical order (cardinality, then lexicographic).
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Minimal non-empty events; they partition the space.
    pub fn atoms(&self) -> &[Event] {
        &self.atoms
    }

    pub fn position(&self, event: &Event) -> Option<usize> {
        self.events.binary_search(event).ok()
    }

    pub fn contains(&self, event: &Event) -> bool {
        self.position(event).is_some()
    }
}

/// Smallest algebra over `space` containing every generator.
///
/// Scenarios sharing the same membership pattern across all generators form
/// one atom; the algebra is the set of all unions of atoms.
pub fn generate_algebra(space: &ScenarioSpace, generators: &[Event]) -> Result<EventAlgebra> {
    let n = space.len();
    for g in generators {
        if g.space_size() != n {
            return Err(Error::Input(format!(
                "generator {g:?} is defined over {} scenarios, space has {n}",
                g.space_size()
            )));
        }
    }
    let mut classes: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for w in 0..n {
        let signature: Vec<bool> = generators.iter().map(|g| g.contains(w)).collect();
        classes.entry(signature).or_default().push(w);
    }
    let mut atoms: Vec<Event> =
        classes.into_values().map(|members| Event::from_indices(n, members)).collect::<Result<_>>()?;
    atoms.sort();
    if atoms.len() > MAX_ATOMS {
        return Err(Error::Input(format!(
            "algebra would have {} atoms; at most {MAX_ATOMS} are supported",
            atoms.len()
        )));
    }
    let mut events: Vec<Event> = (0u64..1 << atoms.len())
        .map(|mask| {
            atoms
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .fold(Event::empty(n), |acc, (_, a)| acc.union(a))
        })
        .collect();
    events.sort();
    Ok(EventAlgebra { space: space.clone(), atoms, events })
}

/// A bookmaker's quotes 𝔭(A), one per event of the algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventQuoteSystem {
    algebra: EventAlgebra,
    quotes: Vec<Rational>,
}

impl EventQuoteSystem {
    /// Quotes must cover every event of `algebra` exactly once.
    pub fn new(algebra: EventAlgebra, quotes: impl IntoIterator<Item = (Event, Rational)>) -> Result<Self> {
        let mut slots: Vec<Option<Rational>> = vec![None; algebra.events.len()];
        for (e, q) in quotes {
            let i = algebra
                .position(&e)
                .ok_or_else(|| Error::Input(format!("event {} is not in the algebra", e.describe(&algebra.space))))?;
            if slots[i].replace(q).is_some() {
                return Err(Error::Input(format!("event {} is quoted twice", e.describe(&algebra.space))));
            }
        }
        let quotes = slots
            .into_iter()
            .zip(&algebra.events)
            .map(|(q, e)| q.ok_or_else(|| Error::Input(format!("event {} has no quote", e.describe(&algebra.space)))))
            .collect::<Result<_>>()?;
        Ok(Self { algebra, quotes })
    }

    /// Builds the algebra generated by the quoted events and requires every
    /// event of it to be quoted.
    pub fn from_quotes(space: &ScenarioSpace, quotes: Vec<(Event, Rational)>) -> Result<Self> {
        let generators: Vec<Event> = quotes.iter().map(|(e, _)| e.clone()).collect();
        let algebra = generate_algebra(space, &generators)?;
        Self::new(algebra, quotes)
    }

    pub fn algebra(&self) -> &EventAlgebra {
        &self.algebra
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.algebra.space
    }

    pub fn quote(&self, event: &Event) -> Option<&Rational> {
        self.algebra.position(event).map(|i| &self.quotes[i])
    }

    /// (event, quote) pairs in canonical event order.
    pub fn iter(&self) -> impl Iterator<Item = (&Event, &Rational)> {
        self.algebra.events.iter().zip(&self.quotes)
    }

    pub fn validate_measure_axioms(&self) -> AxiomReport {
        validate_measure_axioms(self)
    }
}

/// One violated instance of the finitely additive probability axioms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxiomViolation {
    /// 𝔭(A) < 0.
    Negative {
        event: Event,
        #[serde(with = "rational::serde_str")]
        quote: Rational,
    },
    /// 𝔭(Ω) ≠ 1.
    Normalization {
        #[serde(with = "rational::serde_str")]
        quote: Rational,
    },
    /// 𝔭(A∪B) ≠ 𝔭(A) + 𝔭(B) for disjoint A, B.
    Additivity {
        a: Event,
        b: Event,
        #[serde(with = "rational::serde_str")]
        quote_a: Rational,
        #[serde(with = "rational::serde_str")]
        quote_b: Rational,
        #[serde(with = "rational::serde_str")]
        quote_union: Rational,
    },
}

impl AxiomViolation {
    /// |𝔭(A)|, |1 − 𝔭(Ω)| or |𝔭(A∪B) − 𝔭(A) − 𝔭(B)|.
    pub fn magnitude(&self) -> Rational {
        match self {
            Self::Negative { quote, .. } => quote.abs(),
            Self::Normalization { quote } => (Rational::one() - quote).abs(),
            Self::Additivity { quote_a, quote_b, quote_union, .. } => (quote_union - quote_a - quote_b).abs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every violated axiom instance: negative quotes, 𝔭(Ω) ≠ 1, and every
/// unordered disjoint pair (including A = B = ∅) whose quotes are not additive.
pub fn validate_measure_axioms(q: &EventQuoteSystem) -> AxiomReport {
    let mut violations = Vec::new();
    for (e, p) in q.iter() {
        if p.is_negative() {
            violations.push(AxiomViolation::Negative { event: e.clone(), quote: p.clone() });
        }
    }
    let omega = q.space().full();
    let p_omega = q.quote(&omega).expect("algebra contains the full event");
    if !p_omega.is_one() {
        violations.push(AxiomViolation::Normalization { quote: p_omega.clone() });
    }
    let events = q.algebra.events();
    for i in 0..events.len() {
        for j in i..events.len() {
            let (a, b) = (&events[i], &events[j]);
            if !a.is_disjoint(b) {
                continue;
            }
            let union = a.union(b);
            let pu = q.quote(&union).expect("algebra is closed under union");
            let (pa, pb) = (&q.quotes[i], &q.quotes[j]);
            if *pu != pa + pb {
                violations.push(AxiomViolation::Additivity {
                    a: a.clone(),
                    b: b.clone(),
                    quote_a: pa.clone(),
                    quote_b: pb.clone(),
                    quote_union: pu.clone(),
                });
            }
        }
    }
    AxiomReport { violations }
}

/// A payoff vector, one value per scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gamble {
    pub name: String,
    #[serde(with = "rational::serde_vec")]
    pub payoffs: Vec<Rational>,
}

impl Gamble {
    pub fn new(name: impl Into<String>, payoffs: Vec<Rational>) -> Self {
        Self { name: name.into(), payoffs }
    }

    pub fn constant(name: impl Into<String>, n: usize, value: Rational) -> Self {
        Self::new(name, vec![value; n])
    }

    pub fn is_constant_one(&self) -> bool {
        self.payoffs.iter().all(One::is_one)
    }

    pub fn inf(&self) -> Rational {
        rational::min_of(&self.payoffs).unwrap_or_else(Rational::zero)
    }

    pub fn sup(&self) -> Rational {
        rational::max_of(&self.payoffs).unwrap_or_else(Rational::zero)
    }
}

/// A family of gambles ℋ with previsions π, containing the unit gamble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Market {
    space: ScenarioSpace,
    gambles: Vec<Gamble>,
    #[serde(with = "rational::serde_vec")]
    previsions: Vec<Rational>,
    #[serde(skip)]
    pub(crate) verdict: OnceLock<CoherenceVerdict>,
}

impl PartialEq for Market {
    fn eq(&self, other: &Self) -> bool {
        self.space == other.space && self.gambles == other.gambles && self.previsions == other.previsions
    }
}

impl Market {
    pub fn new(space: ScenarioSpace, priced: Vec<(Gamble, Rational)>) -> Result<Self> {
        let n = space.len();
        let mut names = BTreeSet::new();
        for (g, _) in &priced {
            if g.payoffs.len() != n {
                return Err(Error::Input(format!(
                    "gamble '{}' has {} payoffs, space has {n} scenarios",
                    g.name,
                    g.payoffs.len()
                )));
            }
            if !names.insert(g.name.as_str()) {
                return Err(Error::Input(format!("duplicate gamble name '{}'", g.name)));
            }
        }
        if !priced.iter().any(|(g, _)| g.is_constant_one()) {
            return Err(Error::Input("market must contain the constant-one gamble".into()));
        }
        let (gambles, previsions) = priced.into_iter().unzip();
        Ok(Self { space, gambles, previsions, verdict: OnceLock::new() })
    }

    /// Convenience constructor: prepends a unit gamble named `"one"` priced 1.
    pub fn with_unit(space: ScenarioSpace, priced: Vec<(Gamble, Rational)>) -> Result<Self> {
        let n = space.len();
        let mut all = vec![(Gamble::constant("one", n, Rational::one()), Rational::one())];
        all.extend(priced);
        Self::new(space, all)
    }

    pub fn space(&self) -> &ScenarioSpace {
        &self.space
    }

    pub fn gambles(&self) -> &[Gamble] {
        &self.gambles
    }

    pub fn previsions(&self) -> &[Rational] {
        &self.previsions
    }

    pub fn len(&self) -> usize {
        self.gambles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gambles.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.gambles.iter().position(|g| g.name == name)
    }

    pub fn prevision(&self, name: &str) -> Option<&Rational> {
        self.index_of(name).map(|i| &self.previsions[i])
    }

    /// A new market with `g` added at price `price`.
    pub fn extended(&self, g: Gamble, price: Rational) -> Result<Self> {
        let mut priced: Vec<(Gamble, Rational)> =
            self.gambles.iter().cloned().zip(self.previsions.iter().cloned()).collect();
        priced.push((g, price));
        Self::new(self.space.clone(), priced)
    }
}

/// A probability vector over scenarios (q ≥ 0, Σq = 1 exactly).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct PricingMeasure {
    weights: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    #[serde(with = "rational::serde_vec")]
    weights: Vec<Rational>,
}

impl TryFrom<MeasureRepr> for PricingMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        Self::new(r.weights)
    }
}

impl From<PricingMeasure> for MeasureRepr {
    fn from(m: PricingMeasure) -> Self {
        Self { weights: m.weights }
    }
}

impl PricingMeasure {
    pub fn new(weights: Vec<Rational>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Input("measure needs at least one weight".into()));
        }
        if let Some(w) = weights.iter().find(|w| w.is_negative()) {
            return Err(Error::Input(format!("negative weight {w}")));
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::Input(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("measure needs at least one weight".into()));
        }
        Self::new(vec![rational::ratio(1, n as i64); n])
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn has_full_support(&self) -> bool {
        self.weights.iter().all(Signed::is_positive)
    }

    /// Indices with strictly positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&j| self.weights[j].is_positive()).collect()
    }

    /// Σ q(ω)·values(ω), exact.
    pub fn integrate(&self, values: &[Rational]) -> Result<Rational> {
        if values.len() != self.weights.len() {
            return Err(Error::Input(format!(
                "dimension mismatch: measure has {} weights, payoff has {} entries",
                self.weights.len(),
                values.len()
            )));
        }
        Ok(rational::dot(&self.weights, values))
    }

    /// Measure of an event.
    pub fn of(&self, event: &Event) -> Rational {
        event.members().map(|i| &self.weights[i]).sum()
    }
}

/// The reference probability ℙ used for ℙ-arbitrage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReferenceMeasure(pub PricingMeasure);

impl ReferenceMeasure {
    pub fn new(weights: Vec<Rational>) -> Result<Self> {
        PricingMeasure::new(weights).map(Self)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        PricingMeasure::uniform(n).map(Self)
    }

    pub fn weights(&self) -> &[Rational] {
        self.0.weights()
    }
}

/// Exact expectation E_q[f] = Σⱼ qⱼ·f(ωⱼ).
pub fn expectation(q: &PricingMeasure, f: &Gamble) -> Result<Rational> {
    q.integrate(&f.payoffs)
}

/// Payoff vector Σ cᵢ·fᵢ for a list of (gamble, coefficient) pairs.
pub(crate) fn combine_payoffs<'a>(
    n: usize,
    terms: impl IntoIterator<Item = (&'a [Rational], &'a Rational)>,
) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); n];
    for (payoffs, c) in terms {
        for (o, p) in out.iter_mut().zip(payoffs) {
            *o += c * p;
        }
    }
    out
}

/// Helper used by the CLI and tests: maps gamble names to indices.
pub fn name_index(market: &Market) -> HashMap<String, usize> {
    market.gambles.iter().enumerate().map(|(i, g)| (g.name.clone(), i)).collect()
}
