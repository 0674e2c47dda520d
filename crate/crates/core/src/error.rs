use thiserror::Error;

use crate::events::Book;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed or inconsistent input.
    #[error("input error: {0}")]
    Input(String),

    /// The operation requires a coherent market; the attached book proves
    /// that it is not.
    #[error("market is incoherent (book with margin {})", crate::rational::format(&.0.epsilon))]
    Incoherent(Box<Book>),

    /// Two independent routes disagreed, or a certificate failed to verify.
    /// Never expected; surfaced loudly so tests catch it.
    #[error("engine defect: {0}")]
    EngineDefect(String),
}

pub type Result<T> = std::result::Result<T, Error>;
