//! Coherence of betting quotes on events.
//!
//! A bookmaker quoting 𝔭(A) accepts any stake α on any event: selling
//! (α > 0) or buying (α < 0) the bet that pays α if A occurs, for the amount
//! α·𝔭(A). A *book* is a finite combination of such bets whose payoff to the
//! bookmaker's opponent, Σ αᵢ(𝔭(Aᵢ) − 𝟏_{Aᵢ}(ω)), is at least some ε > 0 in
//! every scenario. Quotes are coherent exactly when no book exists, which in
//! turn holds exactly when 𝔭 is a finitely additive probability. Both routes
//! are implemented and cross-checked by [`check_coherence_events`].

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpOutcome, Relation};
use crate::model::{AxiomViolation, Event, EventQuoteSystem, Market, PricingMeasure};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Event(Event),
    Gamble(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub instrument: Instrument,
    #[serde(with = "rational::serde_str")]
    pub coefficient: Rational,
}

/// A certificate of incoherence or arbitrage.
///
/// `payoff_evidence[ω] = Σ legs cᵢ·(price(i) − payoff_i(ω))`. When `epsilon`
/// is positive every evidence entry is at least `epsilon`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Book {
    pub legs: Vec<Leg>,
    #[serde(with = "rational::serde_str")]
    pub epsilon: Rational,
    #[serde(with = "rational::serde_vec")]
    pub payoff_evidence: Vec<Rational>,
}

impl Book {
    pub fn min_payoff(&self) -> Rational {
        rational::min_of(&self.payoff_evidence).unwrap_or_else(Rational::zero)
    }

    fn evidence_ok(&self, recomputed: Vec<Rational>) -> bool {
        recomputed == self.payoff_evidence
            && !self.epsilon.is_negative()
            && self.payoff_evidence.iter().all(|p| *p >= self.epsilon)
    }

    /// Recomputes the payoff from the quotes and checks the ε floor.
    pub fn verify_events(&self, q: &EventQuoteSystem) -> bool {
        let n = q.space().len();
        let mut payoff = vec![Rational::zero(); n];
        for leg in &self.legs {
            let Instrument::Event(e) = &leg.instrument else { return false };
            let Some(price) = q.quote(e) else { return false };
            for (w, p) in payoff.iter_mut().enumerate() {
                let hit = if e.contains(w) { Rational::one() } else { Rational::zero() };
                *p += &leg.coefficient * (price - hit);
            }
        }
        self.evidence_ok(payoff)
    }

    /// Recomputes the payoff from the market previsions and checks the ε floor.
    pub fn verify_market(&self, m: &Market) -> bool {
        self.market_payoff(m).is_some_and(|p| self.evidence_ok(p))
    }

    /// True when the legs reproduce `payoff_evidence` on `m`, whatever its sign.
    pub fn matches_market(&self, m: &Market) -> bool {
        self.market_payoff(m).is_some_and(|p| p == self.payoff_evidence)
    }

    fn market_payoff(&self, m: &Market) -> Option<Vec<Rational>> {
        let n = m.space().len();
        let mut payoff = vec![Rational::zero(); n];
        for leg in &self.legs {
            let Instrument::Gamble(name) = &leg.instrument else { return None };
            let i = m.index_of(name)?;
            let (g, price) = (&m.gambles()[i], &m.previsions()[i]);
            for (p, x) in payoff.iter_mut().zip(&g.payoffs) {
                *p += &leg.coefficient * (price - x);
            }
        }
        Some(payoff)
    }

    /// Positive on every scenario.
    pub fn is_strictly_positive(&self) -> bool {
        self.payoff_evidence.iter().all(Signed::is_positive)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "witness", rename_all = "snake_case")]
pub enum CoherenceVerdict {
    Coherent(PricingMeasure),
    Incoherent(Book),
}

impl CoherenceVerdict {
    pub fn is_coherent(&self) -> bool {
        matches!(self, Self::Coherent(_))
    }

    pub fn measure(&self) -> Option<&PricingMeasure> {
        match self {
            Self::Coherent(m) => Some(m),
            Self::Incoherent(_) => None,
        }
    }

    pub fn book(&self) -> Option<&Book> {
        match self {
            Self::Coherent(_) => None,
            Self::Incoherent(b) => Some(b),
        }
    }
}

/// Per-instrument net payoff to the opponent in each scenario:
/// `price − payoff(ω)`.
pub(crate) struct BetColumn {
    pub net: Vec<Rational>,
}

impl BetColumn {
    pub fn new(price: &Rational, payoffs: &[Rational]) -> Self {
        Self { net: payoffs.iter().map(|x| price - x).collect() }
    }
}

/// Maximizes the uniform margin ε over Σ|cᵢ| ≤ 1.
///
/// Variables are the split stakes c⁺, c⁻ ≥ 0 followed by ε. Returns the
/// stakes and ε when ε > 0.
pub(crate) fn max_margin(n: usize, columns: &[BetColumn]) -> Result<Option<(Vec<Rational>, Rational)>> {
    let k = columns.len();
    let width = 2 * k + 1;
    let mut objective = vec![Rational::zero(); width];
    objective[2 * k] = Rational::one();
    let mut lp = LinearProgram::maximize(objective);
    for w in 0..n {
        let mut row = vec![Rational::zero(); width];
        for (i, c) in columns.iter().enumerate() {
            row[2 * i] = c.net[w].clone();
            row[2 * i + 1] = -&c.net[w];
        }
        row[2 * k] = -Rational::one();
        lp.constrain(row, Relation::Ge, Rational::zero());
    }
    let mut norm = vec![Rational::one(); width];
    norm[2 * k] = Rational::zero();
    lp.constrain(norm, Relation::Le, Rational::one());
    for v in 0..2 * k {
        lp.nonnegative(v);
    }
    match lp::solve(&lp)? {
        LpOutcome::Optimal { value, primal, .. } => {
            if !value.is_positive() {
                return Ok(None);
            }
            let stakes = (0..k).map(|i| &primal[2 * i] - &primal[2 * i + 1]).collect();
            Ok(Some((stakes, value)))
        }
        other => Err(Error::EngineDefect(format!("margin LP must be bounded and feasible, got {other:?}"))),
    }
}

/// Payoff Σ cᵢ·netᵢ(ω) for a stake vector.
pub(crate) fn strategy_payoff(n: usize, columns: &[BetColumn], stakes: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); n];
    for (c, s) in columns.iter().zip(stakes) {
        if s.is_zero() {
            continue;
        }
        for (o, v) in out.iter_mut().zip(&c.net) {
            *o += s * v;
        }
    }
    out
}

/// Searches for a book maximizing the uniform margin under Σ|αᵢ| ≤ 1.
///
/// With `relevant_only`, only events quoted strictly positive may carry a
/// stake.
pub fn find_book_events(q: &EventQuoteSystem, relevant_only: bool) -> Result<Option<Book>> {
    let n = q.space().len();
    let admissible: Vec<(&Event, &Rational)> = q.iter().filter(|(_, p)| !relevant_only || p.is_positive()).collect();
    let columns: Vec<BetColumn> = admissible.iter().map(|(e, p)| BetColumn::new(p, &e.indicator())).collect();
    let Some((stakes, epsilon)) = max_margin(n, &columns)? else { return Ok(None) };
    let payoff_evidence = strategy_payoff(n, &columns, &stakes);
    let legs = admissible
        .iter()
        .zip(stakes)
        .filter(|(_, s)| !s.is_zero())
        .map(|((e, _), s)| Leg { instrument: Instrument::Event((*e).clone()), coefficient: s })
        .collect();
    let book = Book { legs, epsilon, payoff_evidence };
    if !book.verify_events(q) {
        return Err(Error::EngineDefect(format!("event book failed verification: {book:?}")));
    }
    Ok(Some(book))
}

/// Decides coherence by both the axiom check and the book LP, and insists
/// they agree.
///
/// The measure witness puts 𝔭(atom) on the first scenario of each atom.
pub fn check_coherence_events(q: &EventQuoteSystem) -> Result<CoherenceVerdict> {
    let axioms_hold = q.validate_measure_axioms().is_empty();
    let book = find_book_events(q, false)?;
    match (axioms_hold, book) {
        (true, None) => {
            let n = q.space().len();
            let mut weights = vec![Rational::zero(); n];
            for atom in q.algebra().atoms() {
                let first = atom.members().next().expect("atoms are non-empty");
                weights[first] = q.quote(atom).expect("atoms belong to the algebra").clone();
            }
            let measure = PricingMeasure::new(weights)
                .map_err(|e| Error::EngineDefect(format!("atom weights are not a probability: {e}")))?;
            if let Some((e, _)) = q.iter().find(|(e, p)| measure.of(e) != **p) {
                return Err(Error::EngineDefect(format!("measure witness misprices event {e:?}")));
            }
            Ok(CoherenceVerdict::Coherent(measure))
        }
        (false, Some(book)) => Ok(CoherenceVerdict::Incoherent(book)),
        (true, Some(book)) => {
            Err(Error::EngineDefect(format!("quotes satisfy the probability axioms but a book exists: {book:?}")))
        }
        (false, None) => Err(Error::EngineDefect("quotes violate the probability axioms but no book was found".into())),
    }
}

/// Builds the explicit book that exploits one axiom violation.
///
/// * negative quote on A: buy 𝟏_A (α = −1);
/// * 𝔭(Ω) ≠ 1: one leg on Ω, bought when 𝔭(Ω) < 1 and sold when 𝔭(Ω) > 1;
/// * 𝔭(A∪B) > 𝔭(A) + 𝔭(B): buy A, buy B, sell A∪B (signs reversed for <).
///
/// Legs on the same event are merged and zero legs dropped.
pub fn construct_book_from_violation(q: &EventQuoteSystem, violation: &AxiomViolation) -> Result<Book> {
    let recorded = |e: &Event, claimed: &Rational| -> Result<()> {
        match q.quote(e) {
            Some(p) if p == claimed => Ok(()),
            _ => Err(Error::Input(format!("violation refers to a quote for {e:?} that q does not have"))),
        }
    };
    let omega = q.space().full();
    let raw: Vec<(Event, Rational)> = match violation {
        AxiomViolation::Negative { event, quote } => {
            recorded(event, quote)?;
            if !quote.is_negative() {
                return Err(Error::Input(format!("quote {quote} is not negative")));
            }
            vec![(event.clone(), -Rational::one())]
        }
        AxiomViolation::Normalization { quote } => {
            recorded(&omega, quote)?;
            let gap = Rational::one() - quote;
            if gap.is_zero() {
                return Err(Error::Input("𝔭(Ω) = 1; there is no normalization violation".into()));
            }
            vec![(omega, -rational::int(rational::sign(&gap).into()))]
        }
        AxiomViolation::Additivity { a, b, quote_a, quote_b, quote_union } => {
            recorded(a, quote_a)?;
            recorded(b, quote_b)?;
            let union = a.union(b);
            recorded(&union, quote_union)?;
            if !a.is_disjoint(b) {
                return Err(Error::Input("additivity violation needs disjoint events".into()));
            }
            let gap = quote_union - quote_a - quote_b;
            if gap.is_zero() {
                return Err(Error::Input("quotes are additive on this pair".into()));
            }
            let s = rational::int(rational::sign(&gap).into());
            vec![(a.clone(), -&s), (b.clone(), -&s), (union, s)]
        }
    };
    let mut merged: Vec<(Event, Rational)> = Vec::new();
    for (e, c) in raw {
        match merged.iter_mut().find(|(m, _)| *m == e) {
            Some((_, acc)) => *acc += c,
            None => merged.push((e, c)),
        }
    }
    merged.retain(|(_, c)| !c.is_zero());
    let n = q.space().len();
    let columns: Vec<BetColumn> =
        merged.iter().map(|(e, _)| BetColumn::new(q.quote(e).expect("checked above"), &e.indicator())).collect();
    let stakes: Vec<Rational> = merged.iter().map(|(_, c)| c.clone()).collect();
    let payoff_evidence = strategy_payoff(n, &columns, &stakes);
    let epsilon = rational::min_of(&payoff_evidence).unwrap_or_else(Rational::zero);
    let legs = merged.into_iter().map(|(e, c)| Leg { instrument: Instrument::Event(e), coefficient: c }).collect();
    let book = Book { legs, epsilon, payoff_evidence };
    if !book.epsilon.is_positive() || !book.verify_events(q) {
        return Err(Error::EngineDefect(format!("constructed book does not verify: {book:?}")));
    }
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_algebra, ScenarioSpace};
    use crate::rational::{int, ratio};

    fn ab() -> ScenarioSpace {
        ScenarioSpace::new(["a", "b"]).unwrap()
    }

    fn quotes_ab(pa: Rational, pb: Rational, pomega: Rational) -> EventQuoteSystem {
        let s = ab();
        EventQuoteSystem::from_quotes(
            &s,
            vec![
                (s.empty(), int(0)),
                (s.event(&["a"]).unwrap(), pa),
                (s.event(&["b"]).unwrap(), pb),
                (s.full(), pomega),
            ],
        )
        .unwrap()
    }

    #[test]
    fn uniform_probability_admits_no_book() {
        assert!(find_book_events(&quotes_ab(ratio(1, 2), ratio(1, 2), int(1)), false).unwrap().is_none());
    }

    #[test]
    fn underpriced_certain_event() {
        let s = ab();
        let alg = generate_algebra(&s, &[]).unwrap();
        let q = EventQuoteSystem::new(alg, vec![(s.empty(), int(0)), (s.full(), ratio(9, 10))]).unwrap();
        let book = find_book_events(&q, false).unwrap().unwrap();
        assert_eq!(book.legs, vec![Leg { instrument: Instrument::Event(s.full()), coefficient: int(-1) }]);
        assert_eq!(book.epsilon, ratio(1, 10));
        assert_eq!(book.payoff_evidence, vec![ratio(1, 10), ratio(1, 10)]);
    }

    #[test]
    fn superadditive_quotes_give_a_book() {
        let q = quotes_ab(ratio(1, 2), ratio(1, 2), ratio(6, 5));
        let book = find_book_events(&q, false).unwrap().unwrap();
        assert!(book.epsilon.is_positive());
        assert!(book.verify_events(&q));
        // The proof's strategy, before normalization, pays 1/5 everywhere.
        let s = ab();
        let manual = Book {
            legs: vec![
                Leg { instrument: Instrument::Event(s.event(&["a"]).unwrap()), coefficient: int(-1) },
                Leg { instrument: Instrument::Event(s.event(&["b"]).unwrap()), coefficient: int(-1) },
                Leg { instrument: Instrument::Event(s.full()), coefficient: int(1) },
            ],
            epsilon: ratio(1, 5),
            payoff_evidence: vec![ratio(1, 5), ratio(1, 5)],
        };
        assert!(manual.verify_events(&q));
    }

    #[test]
    fn verdicts_and_witnesses() {
        let v = check_coherence_events(&quotes_ab(ratio(3, 10), ratio(7, 10), int(1))).unwrap();
        assert_eq!(v, CoherenceVerdict::Coherent(PricingMeasure::new(vec![ratio(3, 10), ratio(7, 10)]).unwrap()));

        let v = check_coherence_events(&quotes_ab(ratio(3, 10), ratio(6, 10), ratio(9, 10))).unwrap();
        assert!(!v.is_coherent());

        let q = quotes_ab(ratio(-1, 10), ratio(11, 10), int(1));
        let v = check_coherence_events(&q).unwrap();
        let book = v.book().unwrap();
        assert!(book.epsilon.is_positive() && book.verify_events(&q));
    }

    #[test]
    fn witness_extends_by_zero_inside_atoms() {
        let s = ScenarioSpace::new(["a", "b", "c"]).unwrap();
        let a = s.event(&["a"]).unwrap();
        let bc = s.event(&["b", "c"]).unwrap();
        let q = EventQuoteSystem::from_quotes(
            &s,
            vec![(s.empty(), int(0)), (a, ratio(1, 4)), (bc, ratio(3, 4)), (s.full(), int(1))],
        )
        .unwrap();
        let v = check_coherence_events(&q).unwrap();
        assert_eq!(v.measure().unwrap().weights(), &[ratio(1, 4), ratio(3, 4), int(0)]);
    }

    #[test]
    fn relevant_only_ignores_nonpositive_quotes() {
        // 𝔭({a}) < 0 is only exploitable by betting on {a} itself.
        let s = ab();
        let a = s.event(&["a"]).unwrap();
        let alg = generate_algebra(&s, std::slice::from_ref(&a)).unwrap();
        let q = EventQuoteSystem::new(
            alg,
            vec![
                (s.empty(), int(0)),
                (a, ratio(-1, 10)),
                (s.event(&["b"]).unwrap(), ratio(11, 10)),
                (s.full(), int(1)),
            ],
        )
        .unwrap();
        assert!(find_book_events(&q, false).unwrap().is_some());
        // {b} at 11/10 > 1 remains exploitable among relevant events.
        assert!(find_book_events(&q, true).unwrap().is_some());

        let q2 = EventQuoteSystem::new(
            generate_algebra(&s, &[s.event(&["a"]).unwrap()]).unwrap(),
            vec![
                (s.empty(), int(0)),
                (s.event(&["a"]).unwrap(), ratio(-1, 10)),
                (s.event(&["b"]).unwrap(), int(1)),
                (s.full(), int(1)),
            ],
        )
        .unwrap();
        assert!(find_book_events(&q2, false).unwrap().is_some());
        assert!(find_book_events(&q2, true).unwrap().is_none());
    }

    #[test]
    fn book_from_additivity_violation() {
        let q = quotes_ab(ratio(1, 2), ratio(1, 2), ratio(6, 5));
        let v = q
            .validate_measure_axioms()
            .violations
            .into_iter()
            .find(|v| matches!(v, AxiomViolation::Additivity { a, b, .. } if a.len() == 1 && b.len() == 1))
            .unwrap();
        let book = construct_book_from_violation(&q, &v).unwrap();
        assert_eq!(book.payoff_evidence, vec![ratio(1, 5), ratio(1, 5)]);
        assert_eq!(book.epsilon, v.magnitude());
    }

    #[test]
    fn book_from_negative_quote() {
        let q = quotes_ab(ratio(-1, 10), ratio(11, 10), int(1));
        let s = ab();
        let v = AxiomViolation::Negative { event: s.event(&["a"]).unwrap(), quote: ratio(-1, 10) };
        let book = construct_book_from_violation(&q, &v).unwrap();
        assert_eq!(book.payoff_evidence, vec![ratio(11, 10), ratio(1, 10)]);
        assert_eq!(book.epsilon, ratio(1, 10));
    }

    #[test]
    fn normalization_without_violation_is_rejected() {
        let q = quotes_ab(ratio(1, 2), ratio(1, 2), int(1));
        let v = AxiomViolation::Normalization { quote: int(1) };
        assert!(matches!(construct_book_from_violation(&q, &v), Err(Error::Input(_))));
    }

    #[test]
    fn overpriced_certain_event_is_sold() {
        let q = quotes_ab(ratio(1, 2), ratio(1, 2), ratio(5, 4));
        let v = AxiomViolation::Normalization { quote: ratio(5, 4) };
        let book = construct_book_from_violation(&q, &v).unwrap();
        assert_eq!(book.legs[0].coefficient, int(1));
        assert_eq!(book.epsilon, ratio(1, 4));
    }
}
