use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use coherence::interval::{countable_additivity_diagnosis, find_book_interval, grid_comparison};
use coherence::rational::{self, Rational};
use coherence::{
    check_coherence_events, check_extension_coherence, classify, coherence_verdict, find_book, find_book_events,
    find_full_support_measure, find_pricing_measure, price_interval, Book, CoherenceVerdict, Error, Instrument,
    PricingMeasure, ReferenceMeasure,
};

use crate::input::{self, Body, FiniteMarket, Input, InputError, Mode};
use crate::report::{self, describe_weights, Extension, Report};

#[derive(Debug, Parser)]
#[command(name = "coherence", version, about = "Exact coherence, arbitrage and price-bound checks for betting markets")]
pub struct Cli {
    /// Add a prose `summary` field to the report.
    #[arg(long, global = true)]
    pub summary: bool,
    /// Add the engine time in microseconds as `elapsed_us`.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coherence verdict with a book or a pricing measure as witness.
    Check {
        file: PathBuf,
        /// Events mode: only bet on events quoted strictly positive.
        #[arg(long)]
        relevant_only: bool,
    },
    /// Search for a book only.
    Book {
        file: PathBuf,
        #[arg(long)]
        relevant_only: bool,
    },
    /// Pricing measure, or one with every weight positive.
    Measure {
        file: PathBuf,
        #[arg(long)]
        full_support: bool,
    },
    /// Uniformly strong, strong and ℙ-arbitrage (gambles mode).
    Classify {
        file: PathBuf,
        /// JSON file holding the reference measure ℙ; uniform when absent.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Coherent price interval for the file's query gamble (gambles mode).
    Bounds { file: PathBuf },
    /// Countable-additivity diagnosis (interval mode).
    Diagnose {
        file: PathBuf,
        /// Also run the finite check on the grid 1/N, …, 1.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Re-verify every certificate of a saved report against its input.
    Verify { file: PathBuf, report: PathBuf },
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Engine(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Input(m) => Failure::Input(m),
            other => Failure::Engine(other.to_string()),
        }
    }
}

fn unsupported(command: &str, mode: Mode) -> Failure {
    Failure::Input(format!("`{command}` is not available in {mode} mode"))
}

fn finite<'a>(input: &'a Input, command: &str) -> Result<&'a FiniteMarket, Failure> {
    match &input.body {
        Body::Gambles(f) => Ok(f),
        _ => Err(unsupported(command, input.mode())),
    }
}

fn fmt(x: &Rational) -> String {
    rational::format(x)
}

fn describe_book(b: &Book, input: &Input) -> String {
    let legs: Vec<String> = b
        .legs
        .iter()
        .map(|l| {
            let name = match (&l.instrument, &input.body) {
                (Instrument::Event(e), Body::Events(q)) => e.describe(q.space()),
                (Instrument::Event(e), _) => format!("{e:?}"),
                (Instrument::Gamble(g), _) => g.clone(),
            };
            format!("{} on {name}", fmt(&l.coefficient))
        })
        .collect();
    format!("stakes [{}] (positive = sell at the quoted price)", legs.join(", "))
}

struct Outcome {
    report: Report,
    code: u8,
}

fn outcome(command: &str, input: &Input, verdict: &str, code: u8) -> Outcome {
    Outcome {
        report: Report {
            command: command.into(),
            mode: input.mode().to_string(),
            verdict: verdict.into(),
            notes: input.notes.clone(),
            ..Report::default()
        },
        code,
    }
}

fn split(v: CoherenceVerdict) -> (Option<PricingMeasure>, Option<Book>) {
    match v {
        CoherenceVerdict::Coherent(m) => (Some(m), None),
        CoherenceVerdict::Incoherent(b) => (None, Some(b)),
    }
}

fn check(input: &Input, relevant_only: bool, search_only: bool) -> Result<Outcome, Failure> {
    let name = if search_only { "book" } else { "check" };
    if relevant_only && input.mode() != Mode::Events {
        return Err(Failure::Input("--relevant-only applies to events mode only".into()));
    }
    let mut o;
    match &input.body {
        Body::Events(q) if search_only || relevant_only => {
            let found = find_book_events(q, relevant_only)?;
            let verdict = match (&found, search_only) {
                (Some(_), true) => "book_found",
                (None, true) => "no_book",
                (Some(_), false) => "incoherent",
                (None, false) => "coherent_on_relevant_events",
            };
            o = outcome(name, input, verdict, u8::from(found.is_some()));
            if let Some(b) = &found {
                o.report.summary = Some(format!(
                    "A book exists: {} pays at least {} in every scenario.",
                    describe_book(b, input),
                    fmt(&b.epsilon)
                ));
            } else if !search_only {
                match check_coherence_events(q)? {
                    CoherenceVerdict::Coherent(m) => o.report.measure = Some(m),
                    CoherenceVerdict::Incoherent(_) => o.report.notes.push(
                        "no book on relevant events, but the quotes are not a probability: the violation involves events quoted at most 0".into(),
                    ),
                }
            }
            if relevant_only {
                o.report.notes.push("bets restricted to events with positive quotes".into());
            }
            o.report.book = found;
        }
        Body::Events(_) | Body::Gambles(_) => {
            let (measure, book) = match &input.body {
                Body::Gambles(f) if search_only => (None, find_book(&f.market)?),
                Body::Gambles(f) => split(coherence_verdict(&f.market)?.clone()),
                Body::Events(q) => split(check_coherence_events(q)?),
                Body::Interval(_) => unreachable!("handled below"),
            };
            let verdict = match (&book, search_only) {
                (Some(_), true) => "book_found",
                (None, true) => "no_book",
                (Some(_), false) => "incoherent",
                (None, false) => "coherent",
            };
            o = outcome(name, input, verdict, u8::from(book.is_some()));
            o.report.summary = Some(match (&book, &measure) {
                (Some(b), _) => format!(
                    "Incoherent: {} pays at least {} in every scenario.",
                    describe_book(b, input),
                    fmt(&b.epsilon)
                ),
                (None, Some(m)) => format!(
                    "Coherent: the probability {} reproduces every quoted price.",
                    describe_weights(m.weights())
                ),
                (None, None) => "No book exists.".into(),
            });
            o.report.book = book;
            o.report.measure = measure;
        }
        Body::Interval(m) => {
            let found = find_book_interval(m)?;
            let verdict = match (&found, search_only) {
                (Some(_), true) => "book_found",
                (None, true) => "no_book",
                (Some(_), false) => "incoherent",
                (None, false) => "coherent",
            };
            o = outcome(name, input, verdict, u8::from(found.is_some()));
            o.report.summary = Some(match &found {
                Some(b) => format!("A strategy pays at least {} everywhere on (0, 1].", fmt(&b.epsilon)),
                None => "No strategy has a positive infimum payoff; a finitely additive pricing measure exists.".into(),
            });
            if found.is_none() && !search_only {
                o.report.notes.push("run `diagnose` to test for a countably additive pricing measure".into());
            }
            o.report.interval_book = found;
        }
    }
    Ok(o)
}

fn measure(input: &Input, full_support: bool) -> Result<Outcome, Failure> {
    match &input.body {
        Body::Events(_) if full_support => Err(Failure::Input("--full-support applies to gambles mode only".into())),
        Body::Events(_) => {
            let mut o = check(input, false, false)?;
            o.report.command = "measure".into();
            o.report.verdict = if o.code == 0 { "measure_found" } else { "no_measure" }.into();
            Ok(o)
        }
        Body::Gambles(f) if full_support => match find_full_support_measure(&f.market)? {
            Some(fs) => {
                let mut o = outcome("measure", input, "full_support_measure_found", 0);
                o.report.summary = Some(format!(
                    "The pricing measure {} gives every scenario weight at least {}.",
                    describe_weights(fs.measure.weights()),
                    fmt(&fs.min_weight)
                ));
                o.report.full_support = Some(fs);
                Ok(o)
            }
            None => {
                let mut o = outcome("measure", input, "no_full_support_measure", 1);
                let arb = classify(&f.market, None)?;
                o.report.summary = Some(
                    "No pricing measure charges every scenario; the attached ℙ-arbitrage under the uniform ℙ never loses and sometimes gains."
                        .into(),
                );
                o.report.arbitrage = Some(arb);
                Ok(o)
            }
        },
        Body::Gambles(f) => match find_pricing_measure(&f.market)? {
            Some(q) => {
                let mut o = outcome("measure", input, "measure_found", 0);
                o.report.summary = Some(format!("Pricing measure {}.", describe_weights(q.weights())));
                o.report.measure = Some(q);
                Ok(o)
            }
            None => {
                let mut o = outcome("measure", input, "no_measure", 1);
                o.report.book = find_book(&f.market)?;
                o.report.summary = Some("No pricing measure exists; the attached book is the witness.".into());
                Ok(o)
            }
        },
        Body::Interval(_) => Err(unsupported("measure", Mode::Interval)),
    }
}

fn run_classify(input: &Input, reference: Option<&Path>) -> Result<Outcome, Failure> {
    let f = finite(input, "classify")?;
    let reference: Option<ReferenceMeasure> = match reference {
        Some(path) => Some(input::load_reference(path, f.market.space().len())?),
        None => f.reference.clone(),
    };
    let arb = classify(&f.market, reference.as_ref())?;
    let mut o = outcome("classify", input, if arb.any() { "arbitrage" } else { "no_arbitrage" }, u8::from(arb.any()));
    let mut found = Vec::new();
    if arb.uniformly_strong.is_some() {
        found.push("uniformly strong");
    }
    if arb.strong.is_some() {
        found.push("strong");
    }
    if arb.p_arbitrage.is_some() {
        found.push("ℙ-arbitrage");
    }
    o.report.summary = Some(if found.is_empty() {
        "No arbitrage of any kind.".into()
    } else {
        format!("Present: {}.", found.join(", "))
    });
    if reference.as_ref().is_some_and(input::is_uniform) {
        o.report.notes.push("reference measure is uniform".into());
    }
    o.report.arbitrage = Some(arb);
    Ok(o)
}

fn bounds(input: &Input) -> Result<Outcome, Failure> {
    let f = finite(input, "bounds")?;
    let g = f.query.as_ref().ok_or_else(|| Failure::Input("`bounds` needs a `query` gamble in the file".into()))?;
    if let CoherenceVerdict::Incoherent(b) = coherence_verdict(&f.market)? {
        let mut o = outcome("bounds", input, "incoherent_market", 1);
        o.report.summary = Some("The market itself is incoherent, so no price for the query is coherent.".into());
        o.report.book = Some(b.clone());
        return Ok(o);
    }
    let interval = price_interval(&f.market, g)?;
    let mut o = match &f.price {
        None => outcome("bounds", input, "interval", 0),
        Some(price) => {
            let verdict = check_extension_coherence(&f.market, g, price)?;
            let coherent = verdict.is_coherent();
            let mut o = outcome(
                "bounds",
                input,
                if coherent { "extension_coherent" } else { "extension_incoherent" },
                u8::from(!coherent),
            );
            o.report.extension = Some(Extension { price: price.clone(), verdict });
            o
        }
    };
    let mut text = format!(
        "Coherent prices for {} form [{}, {}]: {} is the subhedging price and {} the superhedging price.",
        g.name,
        fmt(&interval.lower),
        fmt(&interval.upper),
        fmt(&interval.lower),
        fmt(&interval.upper)
    );
    if let Some(x) = &o.report.extension {
        text.push_str(&format!(
            " Pricing it at {} is {}.",
            fmt(&x.price),
            if x.verdict.is_coherent() { "coherent" } else { "incoherent" }
        ));
    }
    o.report.summary = Some(text);
    o.report.price_interval = Some(interval);
    Ok(o)
}

fn diagnose(input: &Input, grid: Option<usize>) -> Result<Outcome, Failure> {
    let Body::Interval(m) = &input.body else { return Err(unsupported("diagnose", input.mode())) };
    let d = countable_additivity_diagnosis(m)?;
    let (verdict, code) = if !d.coherent {
        ("incoherent", 1)
    } else if d.strong_arbitrage.is_some() {
        ("strong_arbitrage", 1)
    } else if d.countably_additive_measure_exists == Some(true) {
        ("countably_additive", 0)
    } else {
        ("finitely_additive_only", 0)
    };
    let mut o = outcome("diagnose", input, verdict, code);
    o.report.summary = Some(d.notes.join(". ") + ".");
    if let Some(n) = grid {
        let c = grid_comparison(m, n)?;
        o.report.notes.push(format!(
            "on the grid 1/{n}, …, 1 the finite market is {}",
            if c.finite_book.is_some() { "incoherent" } else { "coherent" }
        ));
        o.report.grid = Some(c);
    }
    o.report.diagnosis = Some(d);
    Ok(o)
}

fn verify_saved(input: &Input, path: &Path) -> Result<Outcome, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let saved: Report = input::parse_json(&text).map_err(|e| Failure::Input(format!("{}: {}", path.display(), e.0)))?;
    if saved.mode != input.mode().to_string() {
        return Err(Failure::Input(format!("report is for {} mode, input is {} mode", saved.mode, input.mode())));
    }
    let mut o = outcome("verify", input, "verified", 0);
    o.report.notes.clear();
    match report::verify(input, &saved) {
        Ok(n) => o.report.summary = Some(format!("All {n} certificates verify.")),
        Err(e) => {
            o.report.verdict = "rejected".into();
            o.report.summary = Some(format!("Rejected: {e}."));
            o.code = 1;
        }
    }
    o.report.self_check = match report::verify(input, &saved) {
        Ok(n) => report::SelfCheck { certificates: n, verified: true, failure: None },
        Err(e) => report::SelfCheck { certificates: 0, verified: false, failure: Some(e) },
    };
    Ok(o)
}

/// Runs one command; returns the report and the exit code.
pub fn run(cli: &Cli) -> Result<(Report, u8), Failure> {
    let file = match &cli.command {
        Command::Check { file, .. }
        | Command::Book { file, .. }
        | Command::Measure { file, .. }
        | Command::Classify { file, .. }
        | Command::Bounds { file }
        | Command::Diagnose { file, .. }
        | Command::Verify { file, .. } => file,
    };
    let input = input::load(file)?;
    let start = Instant::now();
    let mut o = match &cli.command {
        Command::Check { relevant_only, .. } => check(&input, *relevant_only, false)?,
        Command::Book { relevant_only, .. } => check(&input, *relevant_only, true)?,
        Command::Measure { full_support, .. } => measure(&input, *full_support)?,
        Command::Classify { reference, .. } => run_classify(&input, reference.as_deref())?,
        Command::Bounds { .. } => bounds(&input)?,
        Command::Diagnose { grid, .. } => {
            if *grid == Some(0) {
                return Err(Failure::Input("--grid must be at least 1".into()));
            }
            diagnose(&input, *grid)?
        }
        Command::Verify { report, .. } => verify_saved(&input, report)?,
    };
    if !matches!(cli.command, Command::Verify { .. }) {
        report::self_check(&input, &mut o.report);
        if !o.report.self_check.verified {
            return Err(Failure::Engine(format!(
                "report failed its own verification: {}",
                o.report.self_check.failure.clone().unwrap_or_default()
            )));
        }
    }
    if cli.timing {
        o.report.elapsed_us = Some(start.elapsed().as_micros() as u64);
    }
    if !cli.summary {
        o.report.summary = None;
    }
    Ok((o.report, o.code))
}
