//! Deciding positive resolvability and λ-resolvability of nondeterministic
//! finite automata with stochastic resolvers.
//!
//! A memoryless stochastic resolver assigns probabilities to the transitions
//! of an NFA, turning it into a probabilistic automaton. The automaton is
//! λ-resolvable when some resolver accepts every word of the language with
//! probability at least λ, and positively resolvable when this holds for some
//! λ > 0. This crate implements the exact decision procedures for unary,
//! unambiguous and finitely-ambiguous automata, together with generators for
//! the hardness and spectrum constructions used as fixtures, Monte Carlo and
//! exact evaluation of acceptance probabilities, and export of the
//! λ-constraint systems in a native line format and SMT-LIB2.
//!
//! All probability values are exact rationals ([`Rational`]); floating point
//! appears only inside the numerical maximizer and every result it reports is
//! re-verified exactly before being certified.

pub mod ambiguity;
pub mod core;
pub mod fnfa;
pub mod gens;
pub mod lambda;
pub mod langops;
pub mod pfa;
pub mod runaut;
pub mod ufa;
pub mod unary;

pub use crate::core::{Nfa, Rational, Run, Word};
pub use crate::langops::Support;
pub use crate::pfa::{Pfa, Resolver};
