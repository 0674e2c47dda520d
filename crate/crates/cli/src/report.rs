//! Report documents and their independent re-verification.

use coherence::arbitrage::{ArbitrageReport, FullSupportMeasure};
use coherence::interval::{Diagnosis, GridComparison, IntervalBook, IntervalMarket};
use coherence::rational::{self, Rational};
use coherence::{model, Book, CoherenceVerdict, EventQuoteSystem, Market, PriceInterval, PricingMeasure};
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::input::{Body, FiniteMarket, Input};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    #[serde(with = "rational::serde_str")]
    pub price: Rational,
    pub verdict: CoherenceVerdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub certificates: usize,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub mode: String,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub book: Option<Book>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_book: Option<IntervalBook>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<PricingMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_support: Option<FullSupportMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbitrage: Option<ArbitrageReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_interval: Option<PriceInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<Diagnosis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridComparison>,
    #[serde(default)]
    pub self_check: SelfCheck,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_us: Option<u64>,
}

type Check = Result<(), String>;

fn require(ok: bool, what: &str) -> Check {
    if ok {
        Ok(())
    } else {
        Err(format!("{what} does not verify"))
    }
}

fn book_on_events(b: &Book, q: &EventQuoteSystem) -> Check {
    require(b.verify_events(q) && b.epsilon.is_positive(), "book")
}

fn book_on_market(b: &Book, m: &Market) -> Check {
    require(b.verify_market(m) && b.epsilon.is_positive(), "book")
}

fn prices_market(q: &PricingMeasure, m: &Market) -> bool {
    m.gambles().iter().zip(m.previsions()).all(|(g, p)| model::expectation(q, g).is_ok_and(|e| e == *p))
}

fn interval_book(b: &IntervalBook, m: &IntervalMarket, what: &str) -> Check {
    require(b.verify(m) && b.is_strictly_positive(), what)
}

/// Re-checks every certificate in `r` against the input, using only the
/// certificate data and the raw prices. Returns how many were checked.
pub fn verify(input: &Input, r: &Report) -> Result<usize, String> {
    let mut count = 0;
    let mut tick = |c: Check| c.map(|_| count += 1);
    match &input.body {
        Body::Events(q) => {
            if let Some(b) = &r.book {
                tick(book_on_events(b, q))?;
            }
            if let Some(m) = &r.measure {
                tick(require(q.iter().all(|(e, p)| m.of(e) == *p), "measure"))?;
            }
            if r.interval_book.is_some() || r.arbitrage.is_some() || r.price_interval.is_some() || r.diagnosis.is_some()
            {
                return Err("certificate kind does not apply to events mode".into());
            }
        }
        Body::Gambles(f) => verify_finite(f, r, &mut tick)?,
        Body::Interval(m) => {
            if let Some(b) = &r.interval_book {
                tick(interval_book(b, m, "interval book"))?;
                tick(require(b.epsilon.is_positive(), "interval book floor"))?;
            }
            if let Some(d) = &r.diagnosis {
                if let Some(b) = &d.book {
                    tick(interval_book(b, m, "diagnosis book"))?;
                }
                if let Some(s) = &d.strong_arbitrage {
                    tick(interval_book(s, m, "strong arbitrage"))?;
                }
                if let Some(w) = &d.countably_additive_witness {
                    tick(require(w.prices(m), "countably additive witness"))?;
                }
                tick(require(
                    !(d.strong_arbitrage.is_some() && d.countably_additive_witness.is_some()),
                    "diagnosis consistency",
                ))?;
            }
            if let Some(g) = &r.grid {
                if let Some(b) = &g.finite_book {
                    let finite = m.restrict_to_grid(g.grid_size).map_err(|e| e.to_string())?;
                    tick(book_on_market(b, &finite))?;
                }
            }
            if r.book.is_some() || r.measure.is_some() || r.arbitrage.is_some() {
                return Err("certificate kind does not apply to interval mode".into());
            }
        }
    }
    Ok(count)
}

fn verify_finite(f: &FiniteMarket, r: &Report, tick: &mut impl FnMut(Check) -> Check) -> Check {
    let m = &f.market;
    if let Some(b) = &r.book {
        tick(book_on_market(b, m))?;
    }
    if let Some(q) = &r.measure {
        tick(require(prices_market(q, m), "measure"))?;
    }
    if let Some(fs) = &r.full_support {
        let w = fs.measure.weights();
        tick(require(
            prices_market(&fs.measure, m)
                && fs.min_weight.is_positive()
                && rational::min_of(w).as_ref() == Some(&fs.min_weight),
            "full-support measure",
        ))?;
    }
    if let Some(a) = &r.arbitrage {
        if let Some(b) = &a.uniformly_strong {
            tick(book_on_market(b, m))?;
        }
        if let Some(b) = &a.strong {
            tick(require(b.verify_market(m) && b.is_strictly_positive(), "strong arbitrage"))?;
        }
        if let Some(p) = &a.p_arbitrage {
            tick(require(p.verify(m), "ℙ-arbitrage"))?;
        }
        tick(require(a.implication_chain_holds(), "arbitrage implication chain"))?;
    }
    if r.price_interval.is_some() || r.extension.is_some() {
        let g = f.query.as_ref().ok_or("report has hedging certificates but the input has no query")?;
        if let Some(i) = &r.price_interval {
            tick(require(i.verify(m, g), "price interval"))?;
        }
        if let Some(x) = &r.extension {
            let extended = m.extended(g.clone(), x.price.clone()).map_err(|e| e.to_string())?;
            match &x.verdict {
                CoherenceVerdict::Coherent(q) => tick(require(prices_market(q, &extended), "extension measure"))?,
                CoherenceVerdict::Incoherent(b) => tick(book_on_market(b, &extended))?,
            }
            if let Some(i) = &r.price_interval {
                tick(require(i.contains(&x.price) == x.verdict.is_coherent(), "extension verdict vs interval"))?;
            }
        }
    }
    if r.interval_book.is_some() || r.diagnosis.is_some() || r.grid.is_some() {
        return Err("certificate kind does not apply to gambles mode".into());
    }
    Ok(())
}

/// Fills in `self_check` by running [`verify`] on the finished report.
pub fn self_check(input: &Input, r: &mut Report) {
    r.self_check = match verify(input, r) {
        Ok(n) => SelfCheck { certificates: n, verified: true, failure: None },
        Err(e) => SelfCheck { certificates: 0, verified: false, failure: Some(e) },
    };
}

pub fn describe_weights(w: &[Rational]) -> String {
    let parts: Vec<String> = w.iter().map(rational::format).collect();
    format!("({})", parts.join(", "))
}
