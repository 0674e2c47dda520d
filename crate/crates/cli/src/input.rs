//! Market description files.

use std::fmt;
use std::path::Path;

use coherence::interval::{Affine, IntervalMarket, PiecewiseLinearGamble};
use coherence::rational::{self, Rational};
use coherence::{Event, EventQuoteSystem, Gamble, Market, ReferenceMeasure, ScenarioSpace};
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

/// Problem with the input, reported on stderr with exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn at(field: impl fmt::Display, msg: impl fmt::Display) -> InputError {
    InputError(format!("{field}: {msg}"))
}

/// A rational given either as a string ("3/4", "0.25", "1e-2") or as a
/// JSON number, converted exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Num(pub Rational);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = match Value::deserialize(d)? {
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            other => {
                return Err(D::Error::custom(format!("expected a rational such as \"3/4\" or 0.75, found {other}")))
            }
        };
        rational::parse(&text).map(Num).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Events,
    Gambles,
    Interval,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Events => "events",
            Mode::Gambles => "gambles",
            Mode::Interval => "interval",
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub mode: Mode,
    #[serde(default)]
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub events: Vec<EventQuote>,
    #[serde(default)]
    pub gambles: Vec<GambleSpec>,
    #[serde(default)]
    pub reference_measure: Option<Vec<Num>>,
    #[serde(default)]
    pub query: Option<QuerySpec>,
    #[serde(default)]
    pub price: Option<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventQuote {
    pub members: Vec<String>,
    pub quote: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GambleSpec {
    pub name: String,
    #[serde(default)]
    pub payoffs: Option<Vec<Num>>,
    #[serde(default)]
    pub pieces: Option<Vec<PieceSpec>>,
    pub prevision: Num,
}

/// Affine piece `slope·ω + intercept` on (previous end, end].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub end: Num,
    pub slope: Num,
    pub intercept: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    #[serde(default = "default_query_name")]
    pub name: String,
    pub payoffs: Vec<Num>,
}

fn default_query_name() -> String {
    "query".into()
}

#[derive(Debug, Clone)]
pub struct FiniteMarket {
    pub market: Market,
    pub reference: Option<ReferenceMeasure>,
    pub query: Option<Gamble>,
    pub price: Option<Rational>,
}

#[derive(Debug, Clone)]
pub enum Body {
    Events(EventQuoteSystem),
    Gambles(Box<FiniteMarket>),
    Interval(IntervalMarket),
}

#[derive(Debug, Clone)]
pub struct Input {
    pub body: Body,
    pub notes: Vec<String>,
}

impl Input {
    pub fn mode(&self) -> Mode {
        match self.body {
            Body::Events(_) => Mode::Events,
            Body::Gambles(_) => Mode::Gambles,
            Body::Interval(_) => Mode::Interval,
        }
    }
}

/// Parses JSON, reporting line, column and the offending field path.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, InputError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." { String::new() } else { format!(" at `{path}`") };
        InputError(format!("line {} column {}{field}: {inner}", inner.line(), inner.column()))
    })
}

pub fn load(path: &Path) -> Result<Input, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

pub fn parse(text: &str) -> Result<Input, InputError> {
    build(parse_json(text)?)
}

fn values(nums: &[Num]) -> Vec<Rational> {
    nums.iter().map(|n| n.0.clone()).collect()
}

fn finite_space(file: &MarketFile) -> Result<ScenarioSpace, InputError> {
    if file.scenarios.is_empty() {
        return Err(at("scenarios", "at least one scenario is required"));
    }
    ScenarioSpace::new(file.scenarios.iter().cloned()).map_err(|e| at("scenarios", e))
}

fn reject(file: &MarketFile, field: &str, present: bool) -> Result<(), InputError> {
    if present {
        Err(at(field, format!("not used in {} mode", file.mode)))
    } else {
        Ok(())
    }
}

pub fn build(file: MarketFile) -> Result<Input, InputError> {
    let mut notes = Vec::new();
    let body = match file.mode {
        Mode::Events => {
            reject(&file, "gambles", !file.gambles.is_empty())?;
            reject(&file, "query", file.query.is_some())?;
            reject(&file, "reference_measure", file.reference_measure.is_some())?;
            let space = finite_space(&file)?;
            let mut quotes = Vec::new();
            for (i, e) in file.events.iter().enumerate() {
                let event: Event = space.event(&e.members).map_err(|err| at(format!("events[{i}].members"), err))?;
                quotes.push((event, e.quote.0.clone()));
            }
            if quotes.is_empty() {
                return Err(at("events", "at least one quoted event is required"));
            }
            Body::Events(EventQuoteSystem::from_quotes(&space, quotes).map_err(|e| at("events", e))?)
        }
        Mode::Gambles => {
            reject(&file, "events", !file.events.is_empty())?;
            let space = finite_space(&file)?;
            let n = space.len();
            let vector = |field: String, nums: &[Num]| {
                if nums.len() == n {
                    Ok(values(nums))
                } else {
                    Err(at(field, format!("expected {n} payoffs, one per scenario, got {}", nums.len())))
                }
            };
            let mut priced = Vec::new();
            for (i, g) in file.gambles.iter().enumerate() {
                reject(&file, &format!("gambles[{i}].pieces"), g.pieces.is_some())?;
                let payoffs = g.payoffs.as_deref().ok_or_else(|| at(format!("gambles[{i}].payoffs"), "missing"))?;
                priced.push((
                    Gamble::new(g.name.clone(), vector(format!("gambles[{i}].payoffs"), payoffs)?),
                    g.prevision.0.clone(),
                ));
            }
            let has_unit = priced.iter().any(|(g, _)| g.is_constant_one());
            let market = if has_unit {
                Market::new(space, priced)
            } else {
                notes.push("no constant-one gamble given; added \"one\" priced 1".into());
                Market::with_unit(space, priced)
            }
            .map_err(|e| at("gambles", e))?;
            let reference = match &file.reference_measure {
                Some(w) => Some(
                    ReferenceMeasure::new(vector("reference_measure".into(), w)?)
                        .map_err(|e| at("reference_measure", e))?,
                ),
                None => None,
            };
            let query = match &file.query {
                Some(q) => Some(Gamble::new(q.name.clone(), vector("query.payoffs".into(), &q.payoffs)?)),
                None => None,
            };
            let price = file.price.as_ref().map(|p| p.0.clone());
            if price.is_some() && query.is_none() {
                return Err(at("price", "a candidate price needs a query gamble"));
            }
            Body::Gambles(Box::new(FiniteMarket { market, reference, query, price }))
        }
        Mode::Interval => {
            reject(&file, "scenarios", !file.scenarios.is_empty())?;
            reject(&file, "events", !file.events.is_empty())?;
            reject(&file, "query", file.query.is_some())?;
            reject(&file, "reference_measure", file.reference_measure.is_some())?;
            let mut priced = Vec::new();
            for (i, g) in file.gambles.iter().enumerate() {
                reject(&file, &format!("gambles[{i}].payoffs"), g.payoffs.is_some())?;
                let pieces = g.pieces.as_deref().ok_or_else(|| at(format!("gambles[{i}].pieces"), "missing"))?;
                let mut breakpoints = vec![Rational::zero()];
                breakpoints.extend(pieces.iter().map(|p| p.end.0.clone()));
                let affine = pieces.iter().map(|p| Affine::new(p.slope.0.clone(), p.intercept.0.clone())).collect();
                let f = PiecewiseLinearGamble::new(breakpoints, affine)
                    .map_err(|e| at(format!("gambles[{i}].pieces"), e))?;
                priced.push((g.name.clone(), f, g.prevision.0.clone()));
            }
            let has_unit = priced.iter().any(|(_, f, _)| f.is_constant_one());
            let market = if has_unit {
                IntervalMarket::new(priced)
            } else {
                notes.push("no constant-one gamble given; added \"one\" priced 1".into());
                IntervalMarket::with_unit(priced)
            }
            .map_err(|e| at("gambles", e))?;
            if market.unit_mispriced {
                notes.push("the constant-one gamble is not priced 1".into());
            }
            Body::Interval(market)
        }
    };
    Ok(Input { body, notes })
}

/// Reference measure file: either a bare weight array or an object with a
/// `reference_measure` array.
pub fn load_reference(path: &Path, n: usize) -> Result<ReferenceMeasure, InputError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Shape {
        Bare(Vec<Num>),
        Wrapped { reference_measure: Vec<Num> },
    }
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let weights = match parse_json::<Shape>(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))? {
        Shape::Bare(w) | Shape::Wrapped { reference_measure: w } => values(&w),
    };
    if weights.len() != n {
        return Err(InputError(format!("{}: expected {n} weights, got {}", path.display(), weights.len())));
    }
    ReferenceMeasure::new(weights).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

/// `true` when every weight equals 1/n.
pub fn is_uniform(r: &ReferenceMeasure) -> bool {
    let n = r.weights().len() as i64;
    r.weights().iter().all(|w| w * rational::int(n) == Rational::one())
}
