//! Automata data model, exact rationals, text formats and structural
//! utilities shared by every decision procedure.

mod dot;
mod nfa;
mod parse;
mod scc;

pub use dot::nfa_to_dot;
pub use nfa::{Nfa, Run, Transition, Word};
pub use parse::{parse_automaton, ParsedAutomaton};
pub use scc::{scc_decompose, SccDecomposition};

/// Exact rational number; all probabilities, thresholds and certificates use
/// this type. Always in lowest terms with a positive denominator.
pub type Rational = num::BigRational;

use num::{BigInt, One, Zero};

/// Shorthand constructor for a rational from two machine integers.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `p/q` or a bare integer `p` into a rational.
pub fn parse_rational(s: &str) -> Result<Rational, CoreError> {
    let bad = || CoreError::BadRational(s.to_string());
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt = n.trim().parse().map_err(|_| bad())?;
    let d: BigInt = d.trim().parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// Renders a rational as `p/q`, or `p` when the denominator is one.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Errors raised by the data model and the text format parser.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: duplicate state name `{name}`")]
    DuplicateState { line: usize, name: String },
    #[error("line {line}: duplicate alphabet symbol `{name}`")]
    DuplicateSymbol { line: usize, name: String },
    #[error("line {line}: unknown symbol `{name}`")]
    UnknownSymbol { line: usize, name: String },
    #[error("line {line}: unknown state `{name}`")]
    UnknownState { line: usize, name: String },
    #[error("line {line}: duplicate transition")]
    DuplicateTransition { line: usize },
    #[error("probabilities for state `{state}` on `{symbol}` sum to {sum}, expected 1")]
    RowNotStochastic {
        state: String,
        symbol: String,
        sum: String,
    },
    #[error("not a valid rational: `{0}`")]
    BadRational(String),
    #[error("automaton has no initial state")]
    NoInitialState,
    #[error("automaton has more than one initial state")]
    MultipleInitialStates,
    #[error("{0}")]
    Invalid(String),
}
