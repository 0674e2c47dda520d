//! Exact coherence checking for betting quotes and market previsions.
//!
//! Every number is a `BigRational`; every decision is an LP solved exactly
//! and returned with a certificate that can be re-checked independently:
//! a book (a strategy with a guaranteed positive payoff) when prices are
//! incoherent, a pricing measure when they are coherent.
//!
//! * [`events`] handles quotes on events of a finite scenario space.
//! * [`prevision`] handles previsions on arbitrary gambles.
//! * [`arbitrage`] separates uniformly strong, strong and ℙ-arbitrage.
//! * [`hedging`] computes coherent price intervals for new gambles.
//! * [`interval`] works on Ω = (0, 1] with piecewise affine gambles.

pub mod arbitrage;
pub mod error;
pub mod events;
pub mod hedging;
pub mod interval;
pub mod lp;
pub mod model;
pub mod prevision;
pub mod rational;

pub use arbitrage::{classify, find_full_support_measure, ArbitrageReport, FullSupportMeasure, PArbitrage};
pub use error::{Error, Result};
pub use events::{
    check_coherence_events, construct_book_from_violation, find_book_events, Book, CoherenceVerdict, Instrument, Leg,
};
pub use hedging::{
    check_extension_coherence, measure_range, price_interval, subhedge, superhedge, MeasureRange, PriceInterval,
};
pub use interval::{
    countable_additivity_diagnosis, exact_inf, find_book_interval, strong_arbitrage_interval, Diagnosis, IntervalBook,
    IntervalMarket, PiecewiseLinearGamble,
};
pub use model::{
    generate_algebra, AxiomReport, AxiomViolation, Event, EventAlgebra, EventQuoteSystem, Gamble, Market,
    PricingMeasure, ReferenceMeasure, ScenarioSpace,
};
pub use prevision::{
    coherence_verdict, find_book, find_pricing_measure, linear_extension_price, require_coherent, LinearCombination,
};
pub use rational::Rational;
