//! Arbitrage taxonomy for finite markets.
//!
//! For a strategy β the payoff is `Σ βᵢ(π(fᵢ) − fᵢ(ω))`. It is
//!
//! * a *uniformly strong* arbitrage when the payoff is ≥ ε > 0 everywhere
//!   (the same thing as a book),
//! * a *strong* arbitrage when the payoff is > 0 everywhere,
//! * a *ℙ-arbitrage* when the payoff is ≥ 0 ℙ-a.s. and > 0 with positive
//!   ℙ-probability.
//!
//! On a finite scenario space the first two coincide, since a minimum over
//! finitely many scenarios is attained. Each level is decided by an LP whose
//! optimum is compared with zero exactly.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::Book;
use crate::lp::{self, LinearProgram, LpOutcome, Relation};
use crate::model::{Market, PricingMeasure, ReferenceMeasure};
use crate::prevision::{add_pricing_constraints, check_measure_prices, find_book, market_book};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PArbitrage {
    /// Stakes and payoff; ε is 0 and the payoff may be negative off supp(ℙ).
    pub book: Book,
    /// E_ℙ of the strategy payoff; strictly positive.
    #[serde(with = "rational::serde_str")]
    pub expected_gain: Rational,
    pub reference: ReferenceMeasure,
}

impl PArbitrage {
    pub fn verify(&self, m: &Market) -> bool {
        let p = self.reference.weights();
        self.book.matches_market(m)
            && self.book.epsilon.is_zero()
            && self.book.payoff_evidence.len() == p.len()
            && p.iter().zip(&self.book.payoff_evidence).all(|(w, x)| w.is_zero() || !x.is_negative())
            && rational::dot(p, &self.book.payoff_evidence) == self.expected_gain
            && self.expected_gain.is_positive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbitrageReport {
    pub uniformly_strong: Option<Book>,
    pub strong: Option<Book>,
    pub p_arbitrage: Option<PArbitrage>,
    /// Scenarios on which some strategy with nonnegative payoff everywhere
    /// pays strictly positive.
    pub positive_support: Vec<usize>,
    pub notes: Vec<String>,
}

impl ArbitrageReport {
    pub fn any(&self) -> bool {
        self.uniformly_strong.is_some() || self.strong.is_some() || self.p_arbitrage.is_some()
    }

    /// uniformly strong ⟹ strong ⟹ ℙ-arbitrage.
    pub fn implication_chain_holds(&self) -> bool {
        (self.uniformly_strong.is_none() || self.strong.is_some())
            && (self.strong.is_none() || self.p_arbitrage.is_some())
    }
}

/// Maximizes Σ weight(ω)·payoff(ω) over Σ|βᵢ| ≤ 1 with payoff ≥ 0 on
/// `nonneg_on`. Returns the optimum and the stakes.
fn weighted_gain(m: &Market, weights: &[Rational], nonneg_on: &[usize]) -> Result<(Rational, Vec<Rational>)> {
    let k = m.len();
    let width = 2 * k;
    let net = |w: usize| -> Vec<Rational> {
        let mut row = vec![Rational::zero(); width];
        for (i, (g, p)) in m.gambles().iter().zip(m.previsions()).enumerate() {
            let v = p - &g.payoffs[w];
            row[2 * i + 1] = -&v;
            row[2 * i] = v;
        }
        row
    };
    let mut objective = vec![Rational::zero(); width];
    for (w, weight) in weights.iter().enumerate() {
        if weight.is_zero() {
            continue;
        }
        for (o, v) in objective.iter_mut().zip(net(w)) {
            *o += weight * v;
        }
    }
    let mut program = LinearProgram::maximize(objective);
    for &w in nonneg_on {
        program.constrain(net(w), Relation::Ge, Rational::zero());
    }
    program.constrain(vec![Rational::one(); width], Relation::Le, Rational::one());
    for v in 0..width {
        program.nonnegative(v);
    }
    match lp::solve(&program)? {
        LpOutcome::Optimal { value, primal, .. } => {
            let stakes = (0..k).map(|i| &primal[2 * i] - &primal[2 * i + 1]).collect();
            Ok((value, stakes))
        }
        other => Err(Error::EngineDefect(format!("gain LP must have an optimum, got {other:?}"))),
    }
}

/// Classifies the market. Without a reference measure the uniform one is
/// used and a note records that.
pub fn classify(m: &Market, reference: Option<&ReferenceMeasure>) -> Result<ArbitrageReport> {
    let n = m.space().len();
    let mut notes = Vec::new();
    let reference = match reference {
        Some(r) => {
            if r.weights().len() != n {
                return Err(Error::Input(format!(
                    "reference measure has {} weights, space has {n} scenarios",
                    r.weights().len()
                )));
            }
            r.clone()
        }
        None => {
            notes.push("no reference measure supplied; using the uniform measure".to_string());
            ReferenceMeasure::uniform(n)?
        }
    };

    let uniformly_strong = find_book(m)?;

    let everywhere: Vec<usize> = (0..n).collect();
    let mut combined = vec![Rational::zero(); m.len()];
    let mut positive_support = Vec::new();
    for w in 0..n {
        let mut unit = vec![Rational::zero(); n];
        unit[w] = Rational::one();
        let (gain, stakes) = weighted_gain(m, &unit, &everywhere)?;
        if gain.is_positive() {
            positive_support.push(w);
            for (c, s) in combined.iter_mut().zip(stakes) {
                *c += s;
            }
        }
    }
    let strong = if positive_support.len() == n {
        let probe = market_book(m, &combined, Rational::zero());
        let floor = probe.min_payoff();
        let book = market_book(m, &combined, floor);
        if !book.is_strictly_positive() || !book.verify_market(m) {
            return Err(Error::EngineDefect(format!("combined strong-arbitrage strategy fails: {book:?}")));
        }
        Some(book)
    } else {
        None
    };
    if strong.is_some() != uniformly_strong.is_some() {
        return Err(Error::EngineDefect(
            "strong and uniformly strong arbitrage disagree on a finite scenario space".into(),
        ));
    }

    let support = reference.0.support();
    let (gain, stakes) = weighted_gain(m, reference.weights(), &support)?;
    let p_arbitrage = if gain.is_positive() {
        let cert = PArbitrage {
            book: market_book(m, &stakes, Rational::zero()),
            expected_gain: gain,
            reference: reference.clone(),
        };
        if !cert.verify(m) {
            return Err(Error::EngineDefect(format!("ℙ-arbitrage certificate fails: {cert:?}")));
        }
        Some(cert)
    } else {
        None
    };
    if !reference.0.has_full_support() {
        notes.push(format!(
            "reference measure ignores scenarios {:?} (ℙ-null)",
            (0..n).filter(|j| !support.contains(j)).collect::<Vec<_>>()
        ));
    }

    let report = ArbitrageReport { uniformly_strong, strong, p_arbitrage, positive_support, notes };
    if !report.implication_chain_holds() {
        return Err(Error::EngineDefect(format!("arbitrage implication chain broken: {report:?}")));
    }
    Ok(report)
}

/// A pricing measure with every weight ≥ `min_weight` > 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullSupportMeasure {
    pub measure: PricingMeasure,
    #[serde(with = "rational::serde_str")]
    pub min_weight: Rational,
}

/// Maximizes the smallest scenario weight over all pricing measures.
/// Returns the measure iff that optimum is positive.
pub fn find_full_support_measure(m: &Market) -> Result<Option<FullSupportMeasure>> {
    let n = m.space().len();
    let mut objective = vec![Rational::zero(); n + 1];
    objective[n] = Rational::one();
    let mut program = LinearProgram::maximize(objective);
    add_pricing_constraints(&mut program, m);
    for j in 0..n {
        let mut row = vec![Rational::zero(); n + 1];
        row[j] = Rational::one();
        row[n] = -Rational::one();
        program.constrain(row, Relation::Ge, Rational::zero());
    }
    match lp::solve(&program)? {
        LpOutcome::Optimal { value, mut primal, .. } => {
            if !value.is_positive() {
                return Ok(None);
            }
            primal.truncate(n);
            let measure = PricingMeasure::new(primal)
                .map_err(|e| Error::EngineDefect(format!("max-min LP returned a non-probability: {e}")))?;
            check_measure_prices(m, &measure)?;
            Ok(Some(FullSupportMeasure { measure, min_weight: value }))
        }
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded { .. } => Err(Error::EngineDefect("max-min weight LP unbounded".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Gamble, ScenarioSpace};
    use crate::rational::{int, ratio};

    fn two_state(payoffs: [i64; 2], price: Rational) -> Market {
        Market::with_unit(
            ScenarioSpace::numbered(2).unwrap(),
            vec![(Gamble::new("S", payoffs.iter().map(|&v| int(v)).collect()), price)],
        )
        .unwrap()
    }

    fn half() -> ReferenceMeasure {
        ReferenceMeasure::new(vec![ratio(1, 2), ratio(1, 2)]).unwrap()
    }

    #[test]
    fn overpriced_binomial_has_every_kind() {
        let r = classify(&two_state([2, 0], int(3)), Some(&half())).unwrap();
        assert!(r.uniformly_strong.is_some() && r.strong.is_some() && r.p_arbitrage.is_some());
    }

    #[test]
    fn fair_binomial_has_none() {
        let m = two_state([2, 0], int(1));
        let r = classify(&m, Some(&half())).unwrap();
        assert!(!r.any());
        assert!(r.positive_support.is_empty());
        let fs = find_full_support_measure(&m).unwrap().unwrap();
        assert_eq!(fs.measure.weights(), &[ratio(1, 2), ratio(1, 2)]);
        assert_eq!(fs.min_weight, ratio(1, 2));
    }

    #[test]
    fn reference_support_matters() {
        let m = two_state([1, 0], int(1));
        let point = ReferenceMeasure::new(vec![int(1), int(0)]).unwrap();
        let r = classify(&m, Some(&point)).unwrap();
        assert!(!r.any());
        let r = classify(&m, Some(&half())).unwrap();
        assert!(r.uniformly_strong.is_none() && r.strong.is_none());
        let p = r.p_arbitrage.unwrap();
        assert!(p.verify(&m));
        assert_eq!(r.positive_support, vec![1]);
    }

    #[test]
    fn p_arbitrage_may_lose_on_null_scenarios() {
        let m = Market::with_unit(
            ScenarioSpace::numbered(3).unwrap(),
            vec![(Gamble::new("S", vec![int(0), int(1), int(1)]), ratio(1, 2))],
        )
        .unwrap();
        let p = ReferenceMeasure::new(vec![int(0), ratio(1, 2), ratio(1, 2)]).unwrap();
        let r = classify(&m, Some(&p)).unwrap();
        assert!(r.uniformly_strong.is_none());
        let cert = r.p_arbitrage.unwrap();
        assert!(cert.book.payoff_evidence[0].is_negative());
        assert!(cert.verify(&m));
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn unit_only_full_support() {
        let m = Market::with_unit(ScenarioSpace::numbered(2).unwrap(), vec![]).unwrap();
        let fs = find_full_support_measure(&m).unwrap().unwrap();
        assert_eq!(fs.measure.weights(), &[ratio(1, 2), ratio(1, 2)]);
        assert_eq!(fs.min_weight, ratio(1, 2));
    }

    #[test]
    fn boundary_price_has_no_full_support_measure() {
        let m = two_state([2, 0], int(2));
        assert!(find_full_support_measure(&m).unwrap().is_none());
    }

    #[test]
    fn default_reference_is_uniform_with_note() {
        let r = classify(&two_state([2, 0], int(1)), None).unwrap();
        assert_eq!(r.notes.len(), 1);
    }

    #[test]
    fn mismatched_reference_rejected() {
        let bad = ReferenceMeasure::new(vec![int(1)]).unwrap();
        assert!(matches!(classify(&two_state([2, 0], int(1)), Some(&bad)), Err(Error::Input(_))));
    }
}
