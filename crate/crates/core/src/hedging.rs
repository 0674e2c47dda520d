//! Superhedging and subhedging prices, their dual measure range, and the
//! coherent price interval for a gamble outside the market.
//!
//! The primal side optimizes over combinations of market gambles that
//! dominate (or are dominated by) the query; the dual side optimizes the
//! expectation over all pricing measures. The two are solved as separate
//! LPs and [`price_interval`] requires them to coincide exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::CoherenceVerdict;
use crate::lp::{self, LinearProgram, LpOutcome, Relation, Sense};
use crate::model::{self, Gamble, Market, PricingMeasure};
use crate::prevision::{
    add_pricing_constraints, check_measure_prices, coherence_verdict, require_coherent, LinearCombination,
};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceInterval {
    #[serde(with = "rational::serde_str")]
    pub lower: Rational,
    #[serde(with = "rational::serde_str")]
    pub upper: Rational,
    pub lower_hedge: LinearCombination,
    pub upper_hedge: LinearCombination,
    pub lower_measure: PricingMeasure,
    pub upper_measure: PricingMeasure,
}

impl PriceInterval {
    pub fn contains(&self, price: &Rational) -> bool {
        self.lower <= *price && *price <= self.upper
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    /// Re-checks every certificate against the market and the query.
    pub fn verify(&self, m: &Market, g: &Gamble) -> bool {
        let check = || -> Result<bool> {
            let up = self.upper_hedge.payoff(m)?;
            let down = self.lower_hedge.payoff(m)?;
            let hedges = up.iter().zip(&g.payoffs).all(|(h, x)| h >= x)
                && down.iter().zip(&g.payoffs).all(|(h, x)| h <= x)
                && self.upper_hedge.nominal_price(m)? == self.upper
                && self.lower_hedge.nominal_price(m)? == self.lower;
            let measures = model::expectation(&self.upper_measure, g)? == self.upper
                && model::expectation(&self.lower_measure, g)? == self.lower
                && check_measure_prices(m, &self.upper_measure).is_ok()
                && check_measure_prices(m, &self.lower_measure).is_ok();
            Ok(self.lower <= self.upper && hedges && measures)
        };
        check().unwrap_or(false)
    }
}

fn check_query(m: &Market, g: &Gamble) -> Result<()> {
    if g.payoffs.len() != m.space().len() {
        return Err(Error::Input(format!(
            "query gamble '{}' has {} payoffs, space has {} scenarios",
            g.name,
            g.payoffs.len(),
            m.space().len()
        )));
    }
    Ok(())
}

fn hedge(m: &Market, g: &Gamble, sense: Sense) -> Result<(Rational, LinearCombination)> {
    check_query(m, g)?;
    require_coherent(m)?;
    let relation = match sense {
        Sense::Minimize => Relation::Ge,
        Sense::Maximize => Relation::Le,
    };
    let mut program = LinearProgram::new(sense, m.previsions().to_vec());
    for (w, target) in g.payoffs.iter().enumerate() {
        let row = m.gambles().iter().map(|f| f.payoffs[w].clone()).collect();
        program.constrain(row, relation, target.clone());
    }
    match lp::solve(&program)? {
        LpOutcome::Optimal { value, primal, .. } => Ok((value, LinearCombination::from_coefficients(m, &primal))),
        other => {
            Err(Error::EngineDefect(format!("hedging LP on a coherent market must have an optimum, got {other:?}")))
        }
    }
}

/// π̄(g): the cheapest market combination dominating g pointwise.
pub fn superhedge(m: &Market, g: &Gamble) -> Result<(Rational, LinearCombination)> {
    hedge(m, g, Sense::Minimize)
}

/// π̲(g): the dearest market combination dominated by g pointwise.
pub fn subhedge(m: &Market, g: &Gamble) -> Result<(Rational, LinearCombination)> {
    hedge(m, g, Sense::Maximize)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureRange {
    #[serde(with = "rational::serde_str")]
    pub inf: Rational,
    #[serde(with = "rational::serde_str")]
    pub sup: Rational,
    pub inf_measure: PricingMeasure,
    pub sup_measure: PricingMeasure,
}

/// inf and sup of E_q[g] over pricing measures q, with attaining measures.
pub fn measure_range(m: &Market, g: &Gamble) -> Result<MeasureRange> {
    check_query(m, g)?;
    require_coherent(m)?;
    let n = m.space().len();
    let solve_side = |sense: Sense| -> Result<(Rational, PricingMeasure)> {
        let mut program = LinearProgram::new(sense, g.payoffs.clone());
        add_pricing_constraints(&mut program, m);
        match lp::solve(&program)? {
            LpOutcome::Optimal { value, primal, .. } => {
                debug_assert_eq!(primal.len(), n);
                let q = PricingMeasure::new(primal)
                    .map_err(|e| Error::EngineDefect(format!("measure-range LP returned a non-probability: {e}")))?;
                Ok((value, q))
            }
            other => Err(Error::EngineDefect(format!("measure-range LP has no optimum: {other:?}"))),
        }
    };
    let (inf, inf_measure) = solve_side(Sense::Minimize)?;
    let (sup, sup_measure) = solve_side(Sense::Maximize)?;
    Ok(MeasureRange { inf, sup, inf_measure, sup_measure })
}

/// Hedging prices and measure range for g, with a zero duality gap check.
pub fn price_interval(m: &Market, g: &Gamble) -> Result<PriceInterval> {
    let (upper, upper_hedge) = superhedge(m, g)?;
    let (lower, lower_hedge) = subhedge(m, g)?;
    let range = measure_range(m, g)?;
    if upper != range.sup || lower != range.inf {
        return Err(Error::EngineDefect(format!(
            "duality gap: hedging [{lower}, {upper}] vs measures [{}, {}]",
            range.inf, range.sup
        )));
    }
    let interval = PriceInterval {
        lower,
        upper,
        lower_hedge,
        upper_hedge,
        lower_measure: range.inf_measure,
        upper_measure: range.sup_measure,
    };
    if !interval.verify(m, g) {
        return Err(Error::EngineDefect(format!("price interval certificates fail: {interval:?}")));
    }
    Ok(interval)
}

/// Decides whether pricing g at `price` keeps the extended market coherent,
/// and checks that the answer matches membership in the closed interval.
pub fn check_extension_coherence(m: &Market, g: &Gamble, price: &Rational) -> Result<CoherenceVerdict> {
    let interval = price_interval(m, g)?;
    let extended = m.extended(g.clone(), price.clone())?;
    let verdict = coherence_verdict(&extended)?.clone();
    if verdict.is_coherent() != interval.contains(price) {
        return Err(Error::EngineDefect(format!(
            "extension at {price} is {} but the interval is [{}, {}]",
            if verdict.is_coherent() { "coherent" } else { "incoherent" },
            interval.lower,
            interval.upper
        )));
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScenarioSpace;
    use crate::rational::{int, ratio};

    fn three_state() -> Market {
        Market::with_unit(
            ScenarioSpace::new(["u", "m", "d"]).unwrap(),
            vec![(Gamble::new("S", vec![int(2), int(1), int(0)]), int(1))],
        )
        .unwrap()
    }

    fn call() -> Gamble {
        Gamble::new("call", vec![int(1), int(0), int(0)])
    }

    #[test]
    fn replication_of_unit_and_asset() {
        let m = three_state();
        let one = Gamble::constant("g", 3, int(1));
        assert_eq!(superhedge(&m, &one).unwrap().0, int(1));
        assert_eq!(subhedge(&m, &one).unwrap().0, int(1));
        let s = Gamble::new("g", vec![int(2), int(1), int(0)]);
        assert_eq!(superhedge(&m, &s).unwrap().0, int(1));
        assert_eq!(subhedge(&m, &s).unwrap().0, int(1));
        let range = measure_range(&m, &s).unwrap();
        assert_eq!((range.inf, range.sup), (int(1), int(1)));
    }

    #[test]
    fn call_hedges() {
        let m = three_state();
        let (up, hedge) = superhedge(&m, &call()).unwrap();
        assert_eq!(up, ratio(1, 2));
        assert_eq!(hedge, LinearCombination::new([("S", ratio(1, 2))]));
        assert_eq!(subhedge(&m, &call()).unwrap().0, int(0));
    }

    #[test]
    fn call_measure_range() {
        let r = measure_range(&three_state(), &call()).unwrap();
        assert_eq!((r.inf.clone(), r.sup.clone()), (int(0), ratio(1, 2)));
        assert_eq!(r.inf_measure.weights(), &[int(0), int(1), int(0)]);
        assert_eq!(r.sup_measure.weights(), &[ratio(1, 2), int(0), ratio(1, 2)]);
    }

    #[test]
    fn unit_only_market_interval() {
        let m = Market::with_unit(ScenarioSpace::numbered(2).unwrap(), vec![]).unwrap();
        let i = price_interval(&m, &Gamble::new("g", vec![int(2), int(0)])).unwrap();
        assert_eq!((i.lower, i.upper), (int(0), int(2)));
    }

    #[test]
    fn extension_coherence_at_inside_endpoint_outside() {
        let m = three_state();
        assert!(check_extension_coherence(&m, &call(), &ratio(1, 4)).unwrap().is_coherent());
        assert!(check_extension_coherence(&m, &call(), &ratio(1, 2)).unwrap().is_coherent());
        assert!(check_extension_coherence(&m, &call(), &int(0)).unwrap().is_coherent());
        let v = check_extension_coherence(&m, &call(), &ratio(3, 4)).unwrap();
        let ext = m.extended(call(), ratio(3, 4)).unwrap();
        assert!(v.book().unwrap().verify_market(&ext));
    }

    #[test]
    fn incoherent_base_market_is_a_contract_error() {
        let m = Market::with_unit(
            ScenarioSpace::numbered(2).unwrap(),
            vec![(Gamble::new("S", vec![int(2), int(0)]), int(3))],
        )
        .unwrap();
        assert!(matches!(superhedge(&m, &Gamble::new("g", vec![int(1), int(0)])), Err(Error::Incoherent(_))));
    }
}
