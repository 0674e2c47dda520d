//! Random instance generators and brute-force oracles shared by the
//! integration tests.

#![allow(dead_code)]

use coherence::lp::{LinearProgram, Relation, Sense};
use coherence::rational::{int, ratio};
use coherence::{Event, EventQuoteSystem, Gamble, Market, PricingMeasure, Rational, ScenarioSpace};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn small_rational<R: Rng>(rng: &mut R, lo: i64, hi: i64, den: i64) -> Rational {
    ratio(rng.gen_range(lo * den..=hi * den), den)
}

/// A probability vector with small denominators.
pub fn random_probability<R: Rng>(rng: &mut R, n: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
    let total: i64 = raw.iter().sum();
    if total == 0 {
        let mut v = vec![Rational::zero(); n];
        v[rng.gen_range(0..n)] = Rational::one();
        return v;
    }
    raw.into_iter().map(|r| ratio(r, total)).collect()
}

/// Scenarios split into `atoms` nonempty blocks; the blocks generate the
/// algebra.
pub fn random_partition<R: Rng>(rng: &mut R, atoms: usize, scenarios: usize) -> (ScenarioSpace, Vec<Event>) {
    let mut owner: Vec<usize> = (0..atoms).collect();
    while owner.len() < scenarios {
        owner.push(rng.gen_range(0..atoms));
    }
    owner.shuffle(rng);
    let blocks = (0..atoms)
        .map(|a| Event::from_indices(scenarios, (0..scenarios).filter(|&w| owner[w] == a)).unwrap())
        .collect();
    (ScenarioSpace::numbered(scenarios).unwrap(), blocks)
}

/// Every union of the given blocks, paired with a quote.
pub fn all_unions(blocks: &[Event], mut quote: impl FnMut(&[usize]) -> Rational) -> Vec<(Event, Rational)> {
    let n = blocks[0].space_size();
    (0..1usize << blocks.len())
        .map(|mask| {
            let chosen: Vec<usize> = (0..blocks.len()).filter(|b| mask >> b & 1 == 1).collect();
            let e = chosen.iter().fold(Event::empty(n), |acc, &b| acc.union(&blocks[b]));
            (e, quote(&chosen))
        })
        .collect()
}

/// Quote systems on 2–4 atoms: a third additive, a third additive with one
/// quote moved, a third arbitrary, all quotes in [−1/2, 3/2].
pub fn random_quote_system<R: Rng>(rng: &mut R) -> EventQuoteSystem {
    let atoms = rng.gen_range(2..=4);
    let scenarios = rng.gen_range(atoms..=atoms + 2);
    let (space, blocks) = random_partition(rng, atoms, scenarios);
    let kind = rng.gen_range(0..3);
    let quotes = if kind == 2 {
        all_unions(&blocks, |_| small_rational(rng, 0, 1, 4) * int(2) - ratio(1, 2))
    } else {
        let p = random_probability(rng, atoms);
        let mut q = all_unions(&blocks, |chosen| chosen.iter().map(|&b| p[b].clone()).sum());
        if kind == 1 {
            let k = rng.gen_range(0..q.len());
            q[k].1 = ratio(rng.gen_range(-2..=6), 4);
        }
        q
    };
    EventQuoteSystem::from_quotes(&space, quotes).unwrap()
}

pub fn random_gamble<R: Rng>(rng: &mut R, name: &str, n: usize) -> Gamble {
    Gamble::new(name, (0..n).map(|_| int(rng.gen_range(-3..=3))).collect())
}

/// Markets with ≤ 6 scenarios and ≤ 4 gambles (unit included). Half are
/// priced by a random measure, the rest by arbitrary small rationals.
pub fn random_market<R: Rng>(rng: &mut R) -> Market {
    let n = rng.gen_range(1..=6);
    let k = rng.gen_range(0..=3);
    let gambles: Vec<Gamble> = (0..k).map(|i| random_gamble(rng, &format!("g{i}"), n)).collect();
    let priced = if rng.gen_bool(0.5) {
        let q = PricingMeasure::new(random_probability(rng, n)).unwrap();
        gambles
            .into_iter()
            .map(|g| {
                let p = q.integrate(&g.payoffs).unwrap();
                (g, p)
            })
            .collect()
    } else {
        gambles.into_iter().map(|g| (g, small_rational(rng, -3, 3, 2))).collect()
    };
    Market::with_unit(ScenarioSpace::numbered(n).unwrap(), priced).unwrap()
}

/// LPs with ≤ 4 variables and ≤ 6 constraints. When `boxed`, every
/// variable gets finite bounds in [−3, 3].
pub fn random_lp<R: Rng>(rng: &mut R, boxed: bool) -> LinearProgram {
    let vars = rng.gen_range(1..=4);
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut lp = LinearProgram::new(sense, (0..vars).map(|_| int(rng.gen_range(-3..=3))).collect());
    for _ in 0..rng.gen_range(0..=6) {
        let coeffs = (0..vars).map(|_| int(rng.gen_range(-3..=3))).collect();
        let relation = [Relation::Le, Relation::Ge, Relation::Eq, Relation::Le][rng.gen_range(0..4)];
        lp.constrain(coeffs, relation, int(rng.gen_range(-4..=4)));
    }
    for v in 0..vars {
        if boxed {
            let lo = rng.gen_range(-3..=1);
            lp.set_lower(v, int(lo));
            lp.set_upper(v, int(rng.gen_range(lo..=3)));
        } else {
            match rng.gen_range(0..3) {
                0 => {
                    lp.nonnegative(v);
                }
                1 => {
                    lp.set_upper(v, int(rng.gen_range(-2..=3)));
                }
                _ => {}
            }
        }
    }
    lp
}

/// Solves a square system exactly; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                let pivot_row = a[col].clone();
                for (x, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *x -= &f * p;
                }
                let d = &f * &b[col];
                b[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Optimum of a bounded LP by enumerating every vertex of its feasible
/// polytope; `None` when the polytope is empty.
pub fn brute_force_optimum(lp: &LinearProgram) -> Option<Rational> {
    let rows = lp.rows();
    let d = lp.num_vars();
    let mut best: Option<Rational> = None;
    let mut pick = vec![0usize; d];
    fn choose(
        start: usize,
        depth: usize,
        pick: &mut Vec<usize>,
        rows: &[coherence::lp::Row],
        lp: &LinearProgram,
        best: &mut Option<Rational>,
    ) {
        if depth == pick.len() {
            let a = pick.iter().map(|&r| rows[r].coeffs.clone()).collect();
            let b = pick.iter().map(|&r| rows[r].rhs.clone()).collect();
            if let Some(x) = solve_square(a, b) {
                if lp.is_feasible(&x) {
                    let v = lp.objective_value(&x);
                    let better = match (&best, lp.sense) {
                        (None, _) => true,
                        (Some(b), Sense::Maximize) => v > *b,
                        (Some(b), Sense::Minimize) => v < *b,
                    };
                    if better {
                        *best = Some(v);
                    }
                }
            }
            return;
        }
        for r in start..rows.len() {
            pick[depth] = r;
            choose(r + 1, depth + 1, pick, rows, lp, best);
        }
    }
    choose(0, 0, &mut pick, &rows, lp, &mut best);
    best
}
