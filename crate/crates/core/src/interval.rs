//! Markets on the scenario space Ω = (0, 1].
//!
//! Gambles are piecewise affine with rational breakpoints. Every piece is
//! left-open and right-closed, `(bᵢ, bᵢ₊₁]`, so the point 0 never belongs to
//! the domain and an infimum approached as ω → bᵢ⁺ need not be attained.
//! This is exactly what separates a book (payoff ≥ ε > 0) from a strong
//! arbitrage (payoff > 0 with infimum possibly 0), a distinction that cannot
//! arise on finite scenario spaces.
//!
//! All decisions reduce to finite LPs: a strategy's payoff is affine on each
//! piece of the common refinement, so its infimum is the minimum of its
//! values at right endpoints (attained) and its limits at left endpoints
//! (not attained).

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{max_margin, BetColumn, Book, Instrument, Leg};
use crate::lp::{self, LinearProgram, LpOutcome, Relation};
use crate::model::{Gamble, Market, ScenarioSpace};
use crate::prevision::find_book;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    #[serde(with = "rational::serde_str")]
    pub slope: Rational,
    #[serde(with = "rational::serde_str")]
    pub intercept: Rational,
}

impl Affine {
    pub fn new(slope: Rational, intercept: Rational) -> Self {
        Self { slope, intercept }
    }

    pub fn at(&self, x: &Rational) -> Rational {
        &self.slope * x + &self.intercept
    }
}

/// A piecewise affine function on (0, 1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseRepr", into = "PiecewiseRepr")]
pub struct PiecewiseLinearGamble {
    breakpoints: Vec<Rational>,
    pieces: Vec<Affine>,
}

#[derive(Serialize, Deserialize)]
struct PiecewiseRepr {
    #[serde(with = "rational::serde_vec")]
    breakpoints: Vec<Rational>,
    pieces: Vec<Affine>,
}

impl TryFrom<PiecewiseRepr> for PiecewiseLinearGamble {
    type Error = Error;
    fn try_from(r: PiecewiseRepr) -> Result<Self> {
        Self::new(r.breakpoints, r.pieces)
    }
}

impl From<PiecewiseLinearGamble> for PiecewiseRepr {
    fn from(g: PiecewiseLinearGamble) -> Self {
        Self { breakpoints: g.breakpoints, pieces: g.pieces }
    }
}

impl PiecewiseLinearGamble {
    /// `breakpoints` must run strictly upward from 0 to 1, with one affine
    /// piece per gap.
    pub fn new(breakpoints: Vec<Rational>, pieces: Vec<Affine>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() != breakpoints.len() - 1 {
            return Err(Error::Input(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                pieces.len()
            )));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(Error::Input("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints, pieces })
    }

    pub fn affine(slope: Rational, intercept: Rational) -> Self {
        Self { breakpoints: vec![Rational::zero(), Rational::one()], pieces: vec![Affine::new(slope, intercept)] }
    }

    pub fn constant(value: Rational) -> Self {
        Self::affine(Rational::zero(), value)
    }

    /// f(ω) = ω.
    pub fn identity() -> Self {
        Self::affine(Rational::one(), Rational::zero())
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Affine] {
        &self.pieces
    }

    pub fn is_constant_one(&self) -> bool {
        self.pieces.iter().all(|p| p.slope.is_zero() && p.intercept.is_one())
    }

    fn piece_index(&self, x: &Rational) -> Option<usize> {
        if !x.is_positive() || *x > Rational::one() {
            return None;
        }
        self.breakpoints[1..].iter().position(|b| x <= b)
    }

    /// Value at ω ∈ (0, 1]; `None` outside the domain.
    pub fn eval(&self, x: &Rational) -> Option<Rational> {
        self.piece_index(x).map(|i| self.pieces[i].at(x))
    }

    /// Pieces re-expressed on a finer grid containing all own breakpoints.
    fn refine(&self, grid: &[Rational]) -> Vec<Affine> {
        grid.windows(2).map(|w| self.pieces[self.piece_index(&w[1]).expect("grid lies in (0,1]")].clone()).collect()
    }

    /// Σ cᵢ·fᵢ on the common refinement.
    pub fn combination<'a>(terms: impl IntoIterator<Item = (&'a Rational, &'a PiecewiseLinearGamble)>) -> Self {
        let terms: Vec<_> = terms.into_iter().collect();
        let grid = common_grid(terms.iter().map(|(_, g)| *g));
        let mut pieces = vec![Affine::new(Rational::zero(), Rational::zero()); grid.len() - 1];
        for (c, g) in &terms {
            for (acc, p) in pieces.iter_mut().zip(g.refine(&grid)) {
                acc.slope += *c * &p.slope;
                acc.intercept += *c * &p.intercept;
            }
        }
        Self { breakpoints: grid, pieces }
    }

    /// Same function on (0, 1], regardless of how it is cut into pieces.
    pub fn same_function(&self, other: &Self) -> bool {
        let grid = common_grid([self, other]);
        self.refine(&grid) == other.refine(&grid)
    }

    /// Restriction to the points 1/N, 2/N, …, 1.
    pub fn sample_grid(&self, n: usize) -> Vec<Rational> {
        (1..=n as i64).map(|k| self.eval(&rational::ratio(k, n as i64)).expect("grid point in domain")).collect()
    }
}

fn common_grid<'a>(gambles: impl IntoIterator<Item = &'a PiecewiseLinearGamble>) -> Vec<Rational> {
    let mut grid: Vec<Rational> = gambles.into_iter().flat_map(|g| g.breakpoints.iter().cloned()).collect();
    if grid.is_empty() {
        grid = vec![Rational::zero(), Rational::one()];
    }
    grid.sort();
    grid.dedup();
    grid
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfResult {
    #[serde(with = "rational::serde_str")]
    pub value: Rational,
    pub attained: bool,
    /// An attaining point, or the limit point approached from the right.
    #[serde(with = "rational::serde_str")]
    pub location: Rational,
}

/// Exact infimum over (0, 1].
pub fn exact_inf(f: &PiecewiseLinearGamble) -> InfResult {
    let mut attained: Option<(Rational, Rational)> = None;
    let mut limit: Option<(Rational, Rational)> = None;
    for (w, p) in f.breakpoints.windows(2).zip(&f.pieces) {
        let left = p.at(&w[0]);
        if limit.as_ref().is_none_or(|(v, _)| left < *v) {
            limit = Some((left, w[0].clone()));
        }
        let right = p.at(&w[1]);
        if attained.as_ref().is_none_or(|(v, _)| right < *v) {
            attained = Some((right, w[1].clone()));
        }
    }
    let (av, ax) = attained.expect("at least one piece");
    let (lv, lx) = limit.expect("at least one piece");
    if av <= lv {
        InfResult { value: av, attained: true, location: ax }
    } else {
        InfResult { value: lv, attained: false, location: lx }
    }
}

/// Gambles on (0, 1] with previsions; must include the constant one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalMarket {
    names: Vec<String>,
    gambles: Vec<PiecewiseLinearGamble>,
    #[serde(with = "rational::serde_vec")]
    previsions: Vec<Rational>,
    /// Set when the constant-one gamble is not priced at 1.
    pub unit_mispriced: bool,
}

impl IntervalMarket {
    pub fn new(priced: Vec<(String, PiecewiseLinearGamble, Rational)>) -> Result<Self> {
        let mut names = Vec::new();
        let mut gambles = Vec::new();
        let mut previsions = Vec::new();
        for (name, g, p) in priced {
            if names.contains(&name) {
                return Err(Error::Input(format!("duplicate gamble name '{name}'")));
            }
            names.push(name);
            gambles.push(g);
            previsions.push(p);
        }
        let unit: Vec<usize> = (0..gambles.len()).filter(|&i| gambles[i].is_constant_one()).collect();
        if unit.is_empty() {
            return Err(Error::Input("interval market must contain the constant-one gamble".into()));
        }
        let unit_mispriced = unit.iter().any(|&i| !previsions[i].is_one());
        Ok(Self { names, gambles, previsions, unit_mispriced })
    }

    /// Prepends a unit gamble named `"one"` priced 1.
    pub fn with_unit(priced: Vec<(String, PiecewiseLinearGamble, Rational)>) -> Result<Self> {
        let mut all = vec![("one".to_string(), PiecewiseLinearGamble::constant(Rational::one()), Rational::one())];
        all.extend(priced);
        Self::new(all)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn gambles(&self) -> &[PiecewiseLinearGamble] {
        &self.gambles
    }

    pub fn previsions(&self) -> &[Rational] {
        &self.previsions
    }

    fn grid(&self) -> Vec<Rational> {
        common_grid(&self.gambles)
    }

    /// Σ βᵢ(π(fᵢ) − fᵢ) as a piecewise affine function.
    pub fn strategy_payoff(&self, stakes: &[Rational]) -> PiecewiseLinearGamble {
        let grid = self.grid();
        let mut pieces = vec![Affine::new(Rational::zero(), Rational::zero()); grid.len() - 1];
        for ((g, p), b) in self.gambles.iter().zip(&self.previsions).zip(stakes) {
            for (acc, piece) in pieces.iter_mut().zip(g.refine(&grid)) {
                acc.slope -= b * &piece.slope;
                acc.intercept += b * (p - &piece.intercept);
            }
        }
        PiecewiseLinearGamble { breakpoints: grid, pieces }
    }

    /// Net values `π(fᵢ) − fᵢ` at the right endpoint and the left limit of
    /// each refined piece, as one column per gamble.
    fn candidate_columns(&self) -> (Vec<BetColumn>, Vec<BetColumn>) {
        let grid = self.grid();
        let mut rights = Vec::new();
        let mut lefts = Vec::new();
        for (g, p) in self.gambles.iter().zip(&self.previsions) {
            let refined = g.refine(&grid);
            let right: Vec<Rational> = refined.iter().zip(grid.windows(2)).map(|(a, w)| a.at(&w[1])).collect();
            let left: Vec<Rational> = refined.iter().zip(grid.windows(2)).map(|(a, w)| a.at(&w[0])).collect();
            rights.push(BetColumn::new(p, &right));
            lefts.push(BetColumn::new(p, &left));
        }
        (rights, lefts)
    }

    fn certificate(&self, stakes: &[Rational], strict_only: bool) -> IntervalBook {
        let payoff = self.strategy_payoff(stakes);
        let infimum = exact_inf(&payoff);
        let epsilon =
            if strict_only && !infimum.value.is_positive() { Rational::zero() } else { infimum.value.clone() };
        let legs = self
            .names
            .iter()
            .zip(stakes)
            .filter(|(_, s)| !s.is_zero())
            .map(|(n, s)| Leg { instrument: Instrument::Gamble(n.clone()), coefficient: s.clone() })
            .collect();
        IntervalBook { legs, epsilon, payoff, infimum }
    }

    /// Finite market obtained by evaluating every gamble at 1/N, …, 1.
    pub fn restrict_to_grid(&self, n: usize) -> Result<Market> {
        if n == 0 {
            return Err(Error::Input("grid size must be positive".into()));
        }
        let space = ScenarioSpace::new((1..=n).map(|k| format!("{k}/{n}")))?;
        let priced = self
            .names
            .iter()
            .zip(&self.gambles)
            .zip(&self.previsions)
            .map(|((name, g), p)| (Gamble::new(name.clone(), g.sample_grid(n)), p.clone()))
            .collect();
        Market::new(space, priced)
    }
}

/// A strategy on an interval market together with its payoff function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalBook {
    pub legs: Vec<Leg>,
    /// Uniform floor of the payoff; 0 for a strong arbitrage whose infimum
    /// 0 is not attained.
    #[serde(with = "rational::serde_str")]
    pub epsilon: Rational,
    pub payoff: PiecewiseLinearGamble,
    pub infimum: InfResult,
}

impl IntervalBook {
    /// Payoff > 0 at every ω ∈ (0, 1].
    pub fn is_strictly_positive(&self) -> bool {
        self.infimum.value.is_positive() || (self.infimum.value.is_zero() && !self.infimum.attained)
    }

    /// Recomputes payoff and infimum from the legs and checks the floor.
    pub fn verify(&self, m: &IntervalMarket) -> bool {
        let mut stakes = vec![Rational::zero(); m.names.len()];
        for leg in &self.legs {
            let Instrument::Gamble(name) = &leg.instrument else { return false };
            let Some(i) = m.names.iter().position(|n| n == name) else { return false };
            stakes[i] += &leg.coefficient;
        }
        let payoff = m.strategy_payoff(&stakes);
        payoff.same_function(&self.payoff)
            && exact_inf(&payoff) == self.infimum
            && !self.epsilon.is_negative()
            && self.infimum.value >= self.epsilon
    }
}

/// Looks for β with inf_ω Σ βᵢ(π(fᵢ) − fᵢ(ω)) > 0, maximizing that
/// infimum under Σ|βᵢ| ≤ 1.
pub fn find_book_interval(m: &IntervalMarket) -> Result<Option<IntervalBook>> {
    let (mut columns, lefts) = m.candidate_columns();
    for (c, l) in columns.iter_mut().zip(lefts) {
        c.net.extend(l.net);
    }
    let candidates = columns.first().map_or(0, |c| c.net.len());
    let Some((stakes, epsilon)) = max_margin(candidates, &columns)? else { return Ok(None) };
    let book = m.certificate(&stakes, false);
    if book.epsilon != epsilon || !book.verify(m) || !book.is_strictly_positive() {
        return Err(Error::EngineDefect(format!("interval book fails verification: {book:?}")));
    }
    Ok(Some(book))
}

/// Looks for β whose payoff is strictly positive on all of (0, 1].
///
/// On a piece (l, r] an affine payoff is positive throughout iff it is
/// positive at r and its limit at l⁺ is nonnegative. The LP maximizes the
/// smallest right-endpoint value δ subject to nonnegative left limits and
/// Σ|βᵢ| ≤ 1; a strong arbitrage exists iff δ > 0.
pub fn strong_arbitrage_interval(m: &IntervalMarket) -> Result<Option<IntervalBook>> {
    let (rights, lefts) = m.candidate_columns();
    let k = rights.len();
    let width = 2 * k + 1;
    let pieces = rights.first().map_or(0, |c| c.net.len());
    let mut objective = vec![Rational::zero(); width];
    objective[2 * k] = Rational::one();
    let mut program = LinearProgram::maximize(objective);
    let row = |cols: &[BetColumn], j: usize, delta: bool| {
        let mut r = vec![Rational::zero(); width];
        for (i, c) in cols.iter().enumerate() {
            r[2 * i] = c.net[j].clone();
            r[2 * i + 1] = -&c.net[j];
        }
        if delta {
            r[2 * k] = -Rational::one();
        }
        r
    };
    for j in 0..pieces {
        program.constrain(row(&rights, j, true), Relation::Ge, Rational::zero());
        program.constrain(row(&lefts, j, false), Relation::Ge, Rational::zero());
    }
    let mut norm = vec![Rational::one(); width];
    norm[2 * k] = Rational::zero();
    program.constrain(norm, Relation::Le, Rational::one());
    for v in 0..2 * k {
        program.nonnegative(v);
    }
    let (value, primal) = match lp::solve(&program)? {
        LpOutcome::Optimal { value, primal, .. } => (value, primal),
        other => return Err(Error::EngineDefect(format!("strong-arbitrage LP has no optimum: {other:?}"))),
    };
    if !value.is_positive() {
        return Ok(None);
    }
    let stakes: Vec<Rational> = (0..k).map(|i| &primal[2 * i] - &primal[2 * i + 1]).collect();
    let book = m.certificate(&stakes, true);
    if !book.verify(m) || !book.is_strictly_positive() {
        return Err(Error::EngineDefect(format!("strong arbitrage fails verification: {book:?}")));
    }
    Ok(Some(book))
}

/// Finitely many point masses in (0, 1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(with = "rational::serde_str")]
    pub point: Rational,
    #[serde(with = "rational::serde_str")]
    pub weight: Rational,
}

impl DiscreteMeasure {
    pub fn expectation(&self, f: &PiecewiseLinearGamble) -> Option<Rational> {
        self.atoms.iter().map(|a| f.eval(&a.point).map(|v| v * &a.weight)).sum()
    }

    /// Probability on (0, 1] that reproduces every prevision.
    pub fn prices(&self, m: &IntervalMarket) -> bool {
        let total: Rational = self.atoms.iter().map(|a| a.weight.clone()).sum();
        total.is_one()
            && self.atoms.iter().all(|a| !a.weight.is_negative())
            && m.gambles.iter().zip(&m.previsions).all(|(g, p)| self.expectation(g).as_ref() == Some(p))
    }
}

/// Decides whether some countably additive probability on (0, 1] prices the
/// market, and returns a finitely supported one when it does.
///
/// A countably additive Q enters only through its mass wₖ and first moment
/// μₖ on each refined piece (lₖ, rₖ], with lₖwₖ < μₖ ≤ rₖwₖ whenever
/// wₖ > 0. The strict side is handled by shrinking the set of pieces allowed
/// to carry mass until every allowed piece can have positive slack
/// μₖ − lₖwₖ; averaging those slack-maximizing solutions yields one point
/// mass μₖ/wₖ per piece.
pub fn find_countably_additive_measure(m: &IntervalMarket) -> Result<Option<DiscreteMeasure>> {
    let grid = m.grid();
    let k = grid.len() - 1;
    let refined: Vec<Vec<Affine>> = m.gambles.iter().map(|g| g.refine(&grid)).collect();
    let mut allowed: Vec<usize> = (0..k).collect();
    loop {
        if allowed.is_empty() {
            return Ok(None);
        }
        let base = |objective: Vec<Rational>| {
            // Variables: w₀, μ₀, w₁, μ₁, …
            let mut p = LinearProgram::maximize(objective);
            let unit = |i: usize, v: Rational| {
                let mut r = vec![Rational::zero(); 2 * k];
                r[i] = v;
                r
            };
            for j in 0..k {
                p.nonnegative(2 * j);
                if !allowed.contains(&j) {
                    p.set_upper(2 * j, Rational::zero());
                }
                let mut lo = unit(2 * j + 1, Rational::one());
                lo[2 * j] = -&grid[j];
                p.constrain(lo, Relation::Ge, Rational::zero());
                let mut hi = unit(2 * j, grid[j + 1].clone());
                hi[2 * j + 1] = -Rational::one();
                p.constrain(hi, Relation::Ge, Rational::zero());
            }
            let mut mass = vec![Rational::zero(); 2 * k];
            for j in 0..k {
                mass[2 * j] = Rational::one();
            }
            p.constrain(mass, Relation::Eq, Rational::one());
            for (pieces, price) in refined.iter().zip(&m.previsions) {
                let mut r = vec![Rational::zero(); 2 * k];
                for (j, a) in pieces.iter().enumerate() {
                    r[2 * j] = a.intercept.clone();
                    r[2 * j + 1] = a.slope.clone();
                }
                p.constrain(r, Relation::Eq, price.clone());
            }
            p
        };
        let mut kept = Vec::new();
        let mut solutions = Vec::new();
        for &j in &allowed {
            let mut objective = vec![Rational::zero(); 2 * k];
            objective[2 * j + 1] = Rational::one();
            objective[2 * j] = -&grid[j];
            match lp::solve(&base(objective))? {
                LpOutcome::Optimal { value, primal, .. } => {
                    if value.is_positive() {
                        kept.push(j);
                        solutions.push(primal);
                    }
                }
                LpOutcome::Infeasible { .. } => return Ok(None),
                other => return Err(Error::EngineDefect(format!("moment LP unbounded: {other:?}"))),
            }
        }
        if kept.len() < allowed.len() {
            allowed = kept;
            continue;
        }
        let count = rational::int(solutions.len() as i64);
        let mut average = vec![Rational::zero(); 2 * k];
        for s in &solutions {
            for (a, v) in average.iter_mut().zip(s) {
                *a += v;
            }
        }
        for a in average.iter_mut() {
            *a /= &count;
        }
        let atoms = (0..k)
            .filter(|&j| average[2 * j].is_positive())
            .map(|j| Atom { point: &average[2 * j + 1] / &average[2 * j], weight: average[2 * j].clone() })
            .collect();
        let measure = DiscreteMeasure { atoms };
        if !measure.prices(m) || measure.atoms.iter().any(|a| !a.point.is_positive() || a.point > Rational::one()) {
            return Err(Error::EngineDefect(format!("countably additive witness misprices: {measure:?}")));
        }
        return Ok(Some(measure));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub coherent: bool,
    pub book: Option<IntervalBook>,
    pub strong_arbitrage: Option<IntervalBook>,
    pub countably_additive_measure_exists: Option<bool>,
    pub countably_additive_witness: Option<DiscreteMeasure>,
    /// Where finitely additive pricing mass must concentrate: the limit point
    /// of the strong arbitrage's non-attained zero infimum.
    #[serde(with = "rational::serde_opt")]
    pub mass_concentration: Option<Rational>,
    pub notes: Vec<String>,
}

/// Coherence, strong arbitrage and countable additivity in one report.
pub fn countable_additivity_diagnosis(m: &IntervalMarket) -> Result<Diagnosis> {
    if let Some(book) = find_book_interval(m)? {
        return Ok(Diagnosis {
            coherent: false,
            book: Some(book),
            strong_arbitrage: None,
            countably_additive_measure_exists: None,
            countably_additive_witness: None,
            mass_concentration: None,
            notes: vec!["Market is incoherent; no pricing measure of any kind exists".into()],
        });
    }
    let strong = strong_arbitrage_interval(m)?;
    let witness = find_countably_additive_measure(m)?;
    if strong.is_some() && witness.is_some() {
        return Err(Error::EngineDefect("strong arbitrage coexists with a countably additive pricing measure".into()));
    }
    let mut notes = vec!["Market is coherent; a finitely additive pricing measure exists".to_string()];
    let mass_concentration = strong.as_ref().map(|s| {
        let loc = rational::format(&s.infimum.location);
        notes.push(format!(
            "Strong arbitrage: the payoff is positive everywhere with infimum {} not attained, approached as ω → {loc}⁺",
            rational::format(&s.infimum.value)
        ));
        notes.push(format!(
            "Every pricing measure gives mass 1 to sets A on which the strategy payoff has infimum 0, i.e. it concentrates at {loc}⁺; it cannot be countably additive"
        ));
        s.infimum.location.clone()
    });
    if strong.is_none() {
        notes.push(match &witness {
            Some(_) => "A countably additive pricing measure exists (finitely supported witness attached)".into(),
            None => "No strong arbitrage, yet no countably additive measure prices the market".into(),
        });
    }
    Ok(Diagnosis {
        coherent: true,
        book: None,
        countably_additive_measure_exists: Some(witness.is_some()),
        countably_additive_witness: witness,
        strong_arbitrage: strong,
        mass_concentration,
        notes,
    })
}

/// Finite-grid restriction next to the interval verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridComparison {
    pub grid_size: usize,
    pub interval_coherent: bool,
    pub finite_book: Option<Book>,
}

pub fn grid_comparison(m: &IntervalMarket, n: usize) -> Result<GridComparison> {
    let finite = m.restrict_to_grid(n)?;
    Ok(GridComparison {
        grid_size: n,
        interval_coherent: find_book_interval(m)?.is_none(),
        finite_book: find_book(&finite)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn example(price: Rational) -> IntervalMarket {
        IntervalMarket::with_unit(vec![("f".into(), PiecewiseLinearGamble::identity(), price)]).unwrap()
    }

    fn abs_half() -> PiecewiseLinearGamble {
        PiecewiseLinearGamble::new(
            vec![int(0), ratio(1, 2), int(1)],
            vec![Affine::new(int(-1), ratio(1, 2)), Affine::new(int(1), ratio(-1, 2))],
        )
        .unwrap()
    }

    /// ∫₀¹ f(ω) dω piece by piece.
    fn uniform_integral(f: &PiecewiseLinearGamble) -> Rational {
        f.breakpoints()
            .windows(2)
            .zip(f.pieces())
            .map(|(w, p)| &p.slope * (&w[1] * &w[1] - &w[0] * &w[0]) / int(2) + &p.intercept * (&w[1] - &w[0]))
            .sum()
    }

    #[test]
    fn rejects_bad_breakpoints() {
        let a = Affine::new(int(0), int(1));
        assert!(PiecewiseLinearGamble::new(vec![int(0), ratio(1, 2)], vec![a.clone()]).is_err());
        assert!(PiecewiseLinearGamble::new(vec![int(0), int(1), int(1)], vec![a.clone(), a.clone()]).is_err());
        assert!(PiecewiseLinearGamble::new(vec![int(0), int(1)], vec![]).is_err());
    }

    #[test]
    fn eval_uses_half_open_pieces() {
        let step = PiecewiseLinearGamble::new(
            vec![int(0), ratio(1, 2), int(1)],
            vec![Affine::new(int(0), int(1)), Affine::new(int(0), int(2))],
        )
        .unwrap();
        assert_eq!(step.eval(&ratio(1, 2)), Some(int(1)));
        assert_eq!(step.eval(&ratio(3, 4)), Some(int(2)));
        assert_eq!(step.eval(&int(0)), None);
    }

    #[test]
    fn infimum_examples() {
        let r = exact_inf(&PiecewiseLinearGamble::identity());
        assert_eq!(r, InfResult { value: int(0), attained: false, location: int(0) });
        let r = exact_inf(&PiecewiseLinearGamble::constant(int(1)));
        assert_eq!((r.value, r.attained), (int(1), true));
        let r = exact_inf(&abs_half());
        assert_eq!(r, InfResult { value: int(0), attained: true, location: ratio(1, 2) });
    }

    #[test]
    fn jump_infimum_is_not_attained() {
        // 1 on (0, 1/2], ω − 1/2 on (1/2, 1]: infimum 0 approached at 1/2⁺.
        let f = PiecewiseLinearGamble::new(
            vec![int(0), ratio(1, 2), int(1)],
            vec![Affine::new(int(0), int(1)), Affine::new(int(1), ratio(-1, 2))],
        )
        .unwrap();
        assert_eq!(exact_inf(&f), InfResult { value: int(0), attained: false, location: ratio(1, 2) });
    }

    #[test]
    fn paper_example_is_coherent_with_strong_arbitrage() {
        let m = example(int(0));
        assert!(find_book_interval(&m).unwrap().is_none());
        let s = strong_arbitrage_interval(&m).unwrap().unwrap();
        assert_eq!(s.epsilon, int(0));
        assert_eq!(s.infimum, InfResult { value: int(0), attained: false, location: int(0) });
        assert!(s.legs.iter().all(|l| l.instrument == Instrument::Gamble("f".into())));
        assert!(s.legs[0].coefficient.is_negative());
    }

    #[test]
    fn underpriced_identity_gives_a_book() {
        let m = example(ratio(-1, 10));
        let b = find_book_interval(&m).unwrap().unwrap();
        assert!(b.epsilon.is_positive());
        assert!(b.verify(&m));
        let manual = m.certificate(&[int(0), int(-1)], false);
        assert_eq!(manual.infimum.value, ratio(1, 10));
        assert!(!manual.infimum.attained);
    }

    #[test]
    fn unit_only_market() {
        let m = IntervalMarket::with_unit(vec![]).unwrap();
        assert!(find_book_interval(&m).unwrap().is_none());
        assert!(strong_arbitrage_interval(&m).unwrap().is_none());
    }

    #[test]
    fn fair_identity_has_no_strong_arbitrage() {
        let m = example(ratio(1, 2));
        assert!(strong_arbitrage_interval(&m).unwrap().is_none());
        assert_eq!(uniform_integral(&PiecewiseLinearGamble::identity()), ratio(1, 2));
        let d = countable_additivity_diagnosis(&m).unwrap();
        assert!(d.coherent && d.strong_arbitrage.is_none());
        assert_eq!(d.countably_additive_measure_exists, Some(true));
        assert!(d.countably_additive_witness.unwrap().prices(&m));
    }

    #[test]
    fn diagnosis_of_the_example() {
        let d = countable_additivity_diagnosis(&example(int(0))).unwrap();
        assert!(d.coherent);
        assert!(d.strong_arbitrage.is_some());
        assert_eq!(d.countably_additive_measure_exists, Some(false));
        assert_eq!(d.mass_concentration, Some(int(0)));
    }

    #[test]
    fn diagnosis_stops_when_incoherent() {
        let d = countable_additivity_diagnosis(&example(int(2))).unwrap();
        assert!(!d.coherent && d.book.is_some());
        assert!(d.strong_arbitrage.is_none() && d.countably_additive_measure_exists.is_none());
    }

    #[test]
    fn grid_restriction_of_the_example_is_incoherent() {
        for n in [1, 2, 5, 17] {
            let c = grid_comparison(&example(int(0)), n).unwrap();
            assert!(c.interval_coherent);
            assert!(c.finite_book.is_some(), "grid {n}");
        }
    }

    #[test]
    fn combination_matches_pointwise() {
        let f = abs_half();
        let g = PiecewiseLinearGamble::identity();
        let (a, b) = (int(2), ratio(-1, 3));
        let h = PiecewiseLinearGamble::combination([(&a, &f), (&b, &g)]);
        for k in 1..=12 {
            let x = ratio(k, 12);
            assert_eq!(h.eval(&x).unwrap(), &a * f.eval(&x).unwrap() + &b * g.eval(&x).unwrap());
        }
    }
}
