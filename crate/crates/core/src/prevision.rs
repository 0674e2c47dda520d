//! Coherence of previsions on general gambles, pricing measures, and the
//! linear pricing functional on span(ℋ).

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{max_margin, strategy_payoff, BetColumn, Book, CoherenceVerdict, Instrument, Leg};
use crate::lp::{self, LinearProgram, LpOutcome, Relation};
use crate::model::{self, Market, PricingMeasure};
use crate::rational::{self, Rational};

/// Σ cᵢ·fᵢ over named market gambles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearCombination {
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub gamble: String,
    #[serde(with = "rational::serde_str")]
    pub coefficient: Rational,
}

impl LinearCombination {
    pub fn new<S: Into<String>>(terms: impl IntoIterator<Item = (S, Rational)>) -> Self {
        Self { terms: terms.into_iter().map(|(g, c)| Term { gamble: g.into(), coefficient: c }).collect() }
    }

    /// Builds a combination from a coefficient per market gamble, dropping
    /// zero terms.
    pub fn from_coefficients(m: &Market, coefficients: &[Rational]) -> Self {
        Self::new(
            m.gambles()
                .iter()
                .zip(coefficients)
                .filter(|(_, c)| !c.is_zero())
                .map(|(g, c)| (g.name.clone(), c.clone())),
        )
    }

    fn resolve<'a>(&'a self, m: &Market) -> Result<Vec<(usize, &'a Rational)>> {
        self.terms
            .iter()
            .map(|t| {
                m.index_of(&t.gamble)
                    .map(|i| (i, &t.coefficient))
                    .ok_or_else(|| Error::Input(format!("unknown gamble '{}'", t.gamble)))
            })
            .collect()
    }

    /// Pointwise payoff vector of the combination.
    pub fn payoff(&self, m: &Market) -> Result<Vec<Rational>> {
        let resolved = self.resolve(m)?;
        Ok(model::combine_payoffs(
            m.space().len(),
            resolved.into_iter().map(|(i, c)| (m.gambles()[i].payoffs.as_slice(), c)),
        ))
    }

    /// Σ cᵢ·π(fᵢ), without any coherence check.
    pub fn nominal_price(&self, m: &Market) -> Result<Rational> {
        Ok(self.resolve(m)?.into_iter().map(|(i, c)| c * &m.previsions()[i]).sum())
    }
}

fn market_columns(m: &Market) -> Vec<BetColumn> {
    m.gambles().iter().zip(m.previsions()).map(|(g, p)| BetColumn::new(p, &g.payoffs)).collect()
}

/// Assembles a book over market gambles from a stake per gamble.
pub(crate) fn market_book(m: &Market, stakes: &[Rational], epsilon: Rational) -> Book {
    let columns = market_columns(m);
    let payoff_evidence = strategy_payoff(m.space().len(), &columns, stakes);
    let legs = m
        .gambles()
        .iter()
        .zip(stakes)
        .filter(|(_, s)| !s.is_zero())
        .map(|(g, s)| Leg { instrument: Instrument::Gamble(g.name.clone()), coefficient: s.clone() })
        .collect();
    Book { legs, epsilon, payoff_evidence }
}

/// Searches for a book maximizing the uniform margin under Σ|βᵢ| ≤ 1.
pub fn find_book(m: &Market) -> Result<Option<Book>> {
    let columns = market_columns(m);
    let Some((stakes, epsilon)) = max_margin(m.space().len(), &columns)? else { return Ok(None) };
    let book = market_book(m, &stakes, epsilon);
    if !book.verify_market(m) {
        return Err(Error::EngineDefect(format!("market book failed verification: {book:?}")));
    }
    Ok(Some(book))
}

/// Adds `q ≥ 0`, `Σq = 1` and `E_q[h] = π(h)` for every market gamble to an
/// LP whose first `n` variables are the scenario weights.
pub(crate) fn add_pricing_constraints(lp: &mut LinearProgram, m: &Market) {
    let n = m.space().len();
    let width = lp.num_vars();
    let pad = |mut v: Vec<Rational>| {
        v.resize(width, Rational::zero());
        v
    };
    for j in 0..n {
        lp.nonnegative(j);
    }
    lp.constrain(pad(vec![Rational::one(); n]), Relation::Eq, Rational::one());
    for (g, p) in m.gambles().iter().zip(m.previsions()) {
        lp.constrain(pad(g.payoffs.clone()), Relation::Eq, p.clone());
    }
}

/// Solves the pricing feasibility problem; `None` when no probability
/// vector reproduces every prevision.
pub fn find_pricing_measure(m: &Market) -> Result<Option<PricingMeasure>> {
    let n = m.space().len();
    let mut lp = LinearProgram::maximize(vec![Rational::zero(); n]);
    add_pricing_constraints(&mut lp, m);
    match lp::solve(&lp)? {
        LpOutcome::Optimal { primal, .. } => {
            let q = PricingMeasure::new(primal)
                .map_err(|e| Error::EngineDefect(format!("pricing LP returned a non-probability: {e}")))?;
            Ok(Some(q))
        }
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded { .. } => Err(Error::EngineDefect("zero-objective LP reported unbounded".into())),
    }
}

/// Coherence verdict for the market, computed once and cached.
///
/// The book LP and the pricing-measure LP must agree.
pub fn coherence_verdict(m: &Market) -> Result<&CoherenceVerdict> {
    if let Some(v) = m.verdict.get() {
        return Ok(v);
    }
    let verdict = match (find_book(m)?, find_pricing_measure(m)?) {
        (None, Some(q)) => {
            check_measure_prices(m, &q)?;
            CoherenceVerdict::Coherent(q)
        }
        (Some(book), None) => CoherenceVerdict::Incoherent(book),
        (Some(book), Some(q)) => {
            return Err(Error::EngineDefect(format!("market has both a book {book:?} and a pricing measure {q:?}")))
        }
        (None, None) => return Err(Error::EngineDefect("market has neither a book nor a pricing measure".into())),
    };
    let _ = m.verdict.set(verdict);
    Ok(m.verdict.get().expect("just set"))
}

pub(crate) fn check_measure_prices(m: &Market, q: &PricingMeasure) -> Result<()> {
    for (g, p) in m.gambles().iter().zip(m.previsions()) {
        if model::expectation(q, g)? != *p {
            return Err(Error::EngineDefect(format!("measure misprices gamble '{}'", g.name)));
        }
    }
    Ok(())
}

/// Fails with [`Error::Incoherent`] unless the market is coherent.
pub fn require_coherent(m: &Market) -> Result<&PricingMeasure> {
    match coherence_verdict(m)? {
        CoherenceVerdict::Coherent(q) => Ok(q),
        CoherenceVerdict::Incoherent(book) => Err(Error::Incoherent(Box::new(book.clone()))),
    }
}

/// L(Σ cᵢfᵢ) = Σ cᵢπ(fᵢ) on a coherent market.
///
/// Also checks that the value does not depend on the representation: over
/// all γ with Σ γᵢfᵢ equal to the combination's payoff, Σ γᵢπ(fᵢ) is both
/// maximized and minimized, and both must equal the nominal price.
pub fn linear_extension_price(m: &Market, combo: &LinearCombination) -> Result<Rational> {
    require_coherent(m)?;
    let price = combo.nominal_price(m)?;
    let payoff = combo.payoff(m)?;
    for sense in [lp::Sense::Maximize, lp::Sense::Minimize] {
        let mut program = LinearProgram::new(sense, m.previsions().to_vec());
        for (w, target) in payoff.iter().enumerate() {
            let row = m.gambles().iter().map(|g| g.payoffs[w].clone()).collect();
            program.constrain(row, Relation::Eq, target.clone());
        }
        match lp::solve(&program)? {
            LpOutcome::Optimal { value, .. } if value == price => {}
            other => {
                return Err(Error::EngineDefect(format!(
                    "price of the combination depends on its representation: nominal {price}, {sense:?} gives {other:?}"
                )))
            }
        }
    }
    Ok(price)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gamble, ScenarioSpace};
    use crate::rational::{int, ratio};

    fn binomial(price: Rational) -> Market {
        Market::with_unit(
            ScenarioSpace::new(["up", "down"]).unwrap(),
            vec![(Gamble::new("S", vec![int(2), int(0)]), price)],
        )
        .unwrap()
    }

    #[test]
    fn unit_bet_alone_is_coherent() {
        let m = Market::with_unit(ScenarioSpace::numbered(3).unwrap(), vec![]).unwrap();
        assert!(find_book(&m).unwrap().is_none());
        let q = find_pricing_measure(&m).unwrap().unwrap();
        assert_eq!(q.len(), 3);
    }

    #[test]
    fn overpriced_asset_is_sold() {
        let m = binomial(int(3));
        let book = find_book(&m).unwrap().unwrap();
        assert_eq!(book.legs.len(), 1);
        assert_eq!(book.legs[0].instrument, Instrument::Gamble("S".into()));
        assert!(book.legs[0].coefficient > Rational::zero());
        // Unnormalized: selling one unit pays π(S) − S = (1, 3).
        let manual = market_book(&m, &[int(0), int(1)], int(1));
        assert_eq!(manual.payoff_evidence, vec![int(1), int(3)]);
        assert!(manual.verify_market(&m));
        assert!(find_pricing_measure(&m).unwrap().is_none());
    }

    #[test]
    fn fairly_priced_asset() {
        let m = binomial(int(1));
        assert!(find_book(&m).unwrap().is_none());
        let q = find_pricing_measure(&m).unwrap().unwrap();
        assert_eq!(q.weights(), &[ratio(1, 2), ratio(1, 2)]);
        assert!(coherence_verdict(&m).unwrap().is_coherent());
    }

    #[test]
    fn extension_prices() {
        let m = binomial(int(1));
        assert_eq!(linear_extension_price(&m, &LinearCombination::new([("one", int(1))])).unwrap(), int(1));
        assert_eq!(linear_extension_price(&m, &LinearCombination::new([("S", int(2))])).unwrap(), int(2));
    }

    #[test]
    fn duplicated_payoffs_price_alike() {
        let m = Market::with_unit(
            ScenarioSpace::numbered(2).unwrap(),
            vec![(Gamble::new("f", vec![int(1), int(1)]), int(1))],
        )
        .unwrap();
        let a = linear_extension_price(&m, &LinearCombination::new([("f", int(1))])).unwrap();
        let b = linear_extension_price(&m, &LinearCombination::new([("one", int(1))])).unwrap();
        assert_eq!(a, int(1));
        assert_eq!(a, b);
    }

    #[test]
    fn incoherent_market_refuses_pricing() {
        let m = binomial(int(3));
        let err = linear_extension_price(&m, &LinearCombination::new([("S", int(1))])).unwrap_err();
        assert!(matches!(err, Error::Incoherent(_)));
    }

    #[test]
    fn unknown_gamble_in_combination() {
        let m = binomial(int(1));
        assert!(matches!(linear_extension_price(&m, &LinearCombination::new([("T", int(1))])), Err(Error::Input(_))));
    }
}
