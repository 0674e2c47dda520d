mod common;

use coherence::interval::{
    exact_inf, find_book_interval, grid_comparison, strong_arbitrage_interval, Affine, IntervalMarket,
    PiecewiseLinearGamble,
};
use coherence::rational::{int, ratio};
use coherence::{
    check_coherence_events, find_book, linear_extension_price, price_interval, require_coherent, Event, Gamble,
    LinearCombination, Rational,
};
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small() -> impl Strategy<Value = Rational> {
    (-12i64..=12, 1i64..=4).prop_map(|(n, d)| ratio(n, d))
}

fn piecewise() -> impl Strategy<Value = PiecewiseLinearGamble> {
    (prop::collection::btree_set(1i64..12, 0..3), prop::collection::vec((small(), small()), 4)).prop_map(
        |(cuts, coeffs)| {
            let mut breakpoints = vec![int(0)];
            breakpoints.extend(cuts.into_iter().map(|c| ratio(c, 12)));
            breakpoints.push(int(1));
            let pieces = coeffs.into_iter().take(breakpoints.len() - 1).map(|(s, i)| Affine::new(s, i)).collect();
            PiecewiseLinearGamble::new(breakpoints, pieces).unwrap()
        },
    )
}

fn interval_market() -> impl Strategy<Value = IntervalMarket> {
    prop::collection::vec((piecewise(), small()), 0..3).prop_map(|gs| {
        IntervalMarket::with_unit(gs.into_iter().enumerate().map(|(i, (g, p))| (format!("f{i}"), g, p)).collect())
            .unwrap()
    })
}

/// Brute-force lower bound on the infimum: values at a fine grid and at
/// points just right of each breakpoint.
fn sampled_min(f: &PiecewiseLinearGamble) -> Rational {
    let mut points: Vec<Rational> = (1..=240).map(|k| ratio(k, 240)).collect();
    for b in f.breakpoints() {
        if *b < int(1) {
            points.push(b + ratio(1, 100_000));
        }
    }
    points.iter().map(|x| f.eval(x).unwrap()).min().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn infimum_is_a_lower_bound_and_attained_when_claimed(f in piecewise()) {
        let r = exact_inf(&f);
        prop_assert!(r.value <= sampled_min(&f));
        if r.attained {
            prop_assert_eq!(f.eval(&r.location), Some(r.value.clone()));
        } else {
            prop_assert!(r.location < int(1));
        }
    }

    #[test]
    fn infimum_is_superadditive(f in piecewise(), g in piecewise(), a in 0i64..4, b in 0i64..4) {
        let (a, b) = (int(a), int(b));
        let sum = PiecewiseLinearGamble::combination([(&a, &f), (&b, &g)]);
        prop_assert!(exact_inf(&sum).value >= &a * exact_inf(&f).value + &b * exact_inf(&g).value);
    }

    #[test]
    fn interval_books_are_strong_arbitrages(m in interval_market()) {
        if let Some(book) = find_book_interval(&m).unwrap() {
            prop_assert!(book.is_strictly_positive());
            prop_assert!(book.verify(&m));
            prop_assert!(strong_arbitrage_interval(&m).unwrap().is_some());
        }
    }

    #[test]
    fn grid_restrictions_catch_uniform_books(m in interval_market(), n in 1usize..30) {
        if let Some(s) = strong_arbitrage_interval(&m).unwrap() {
            if s.infimum.value.is_positive() {
                prop_assert!(grid_comparison(&m, n).unwrap().finite_book.is_some());
            }
        }
    }

    #[test]
    fn event_verdict_witness_reprices(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = common::random_quote_system(&mut rng);
        match check_coherence_events(&q).unwrap() {
            coherence::CoherenceVerdict::Coherent(measure) => {
                for (e, p) in q.iter() {
                    prop_assert_eq!(&measure.of(e), p);
                }
            }
            coherence::CoherenceVerdict::Incoherent(book) => prop_assert!(book.verify_events(&q)),
        }
    }

    #[test]
    fn linear_extension_matches_expectation(seed in any::<u64>(), coeffs in prop::collection::vec(-3i64..=3, 4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_market(&mut rng);
        if find_book(&m).unwrap().is_none() {
            let q = require_coherent(&m).unwrap().clone();
            let stakes: Vec<Rational> = coeffs.iter().take(m.len()).map(|&c| int(c)).collect();
            let combo = LinearCombination::from_coefficients(&m, &stakes);
            let price = linear_extension_price(&m, &combo).unwrap();
            prop_assert_eq!(q.integrate(&combo.payoff(&m).unwrap()).unwrap(), price);
        }
    }

    #[test]
    fn price_interval_sandwiches_every_market_measure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_market(&mut rng);
        if find_book(&m).unwrap().is_none() {
            let g = common::random_gamble(&mut rng, "query", m.space().len());
            let i = price_interval(&m, &g).unwrap();
            let q = require_coherent(&m).unwrap();
            let e = q.integrate(&g.payoffs).unwrap();
            prop_assert!(i.contains(&e));
            prop_assert!(g.inf() <= i.lower && i.upper <= g.sup());
        }
    }

    #[test]
    fn constant_shift_moves_the_interval(seed in any::<u64>(), bump in 0i64..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_market(&mut rng);
        if find_book(&m).unwrap().is_none() {
            let g = common::random_gamble(&mut rng, "g", m.space().len());
            let h = Gamble::new("h", g.payoffs.iter().map(|x| x + int(bump)).collect());
            let (ig, ih) = (price_interval(&m, &g).unwrap(), price_interval(&m, &h).unwrap());
            prop_assert_eq!(&ig.lower + int(bump), ih.lower);
            prop_assert_eq!(&ig.upper + int(bump), ih.upper);
        }
    }
}

#[test]
fn empty_event_must_be_quoted_zero() {
    let space = coherence::ScenarioSpace::numbered(2).unwrap();
    let blocks = vec![Event::from_indices(2, [0]).unwrap(), Event::from_indices(2, [1]).unwrap()];
    let quotes = common::all_unions(&blocks, |c| if c.is_empty() { ratio(1, 10) } else { ratio(c.len() as i64, 2) });
    let q = coherence::EventQuoteSystem::from_quotes(&space, quotes).unwrap();
    let verdict = check_coherence_events(&q).unwrap();
    let book = verdict.book().unwrap();
    assert!(book.verify_events(&q));
    assert!(!book.epsilon.is_zero());
}
