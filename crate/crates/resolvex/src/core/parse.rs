use std::collections::BTreeSet;

use num::{One, Zero};

use super::{format_rational, parse_rational, CoreError, Nfa, Rational, Transition};

/// Result of parsing the automaton text format: an NFA, plus per-transition
/// probabilities when the file declared a `pfa`.
#[derive(Debug, Clone)]
pub struct ParsedAutomaton {
    pub nfa: Nfa,
    /// Aligned with `nfa.transitions()`; `Some` iff the header said `pfa`.
    pub weights: Option<Vec<Rational>>,
}

impl ParsedAutomaton {
    pub fn is_pfa(&self) -> bool {
        self.weights.is_some()
    }
    pub fn into_nfa(self) -> Nfa {
        self.nfa
    }
}

/// Parses the line-oriented automaton format:
///
/// ```text
/// nfa <name>            # or: pfa <name>
/// alphabet s1 s2 ...
/// state <name> [init] [accept]
/// trans <src> <sym> <dst> [<p/q>]
/// end
/// ```
///
/// `#` starts a comment. The probability is mandatory for `pfa` files and
/// forbidden for `nfa` files; every declared (state, letter) row of a PFA
/// must sum to exactly one.
pub fn parse_automaton(text: &str) -> Result<ParsedAutomaton, CoreError> {
    let mut name = None;
    let mut is_pfa = false;
    let mut alphabet: Vec<String> = Vec::new();
    let mut states: Vec<String> = Vec::new();
    let mut initial: Option<usize> = None;
    let mut accepting: BTreeSet<usize> = BTreeSet::new();
    let mut transitions: Vec<Transition> = Vec::new();
    let mut weights: Vec<Rational> = Vec::new();
    let mut seen_trans: BTreeSet<Transition> = BTreeSet::new();
    let mut ended = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() || ended {
            continue;
        }
        let mut it = content.split_whitespace();
        let kw = it.next().unwrap();
        let syntax = |msg: &str| CoreError::Syntax {
            line,
            msg: msg.to_string(),
        };
        match kw {
            "nfa" | "pfa" => {
                if name.is_some() {
                    return Err(syntax("duplicate header"));
                }
                is_pfa = kw == "pfa";
                name = Some(
                    it.next()
                        .ok_or_else(|| syntax("missing automaton name"))?
                        .to_string(),
                );
            }
            "alphabet" => {
                if name.is_none() {
                    return Err(syntax("alphabet before header"));
                }
                for sym in it.by_ref() {
                    if alphabet.iter().any(|s| s == sym) {
                        return Err(CoreError::DuplicateSymbol {
                            line,
                            name: sym.to_string(),
                        });
                    }
                    alphabet.push(sym.to_string());
                }
            }
            "state" => {
                let sname = it.next().ok_or_else(|| syntax("missing state name"))?;
                if states.iter().any(|s| s == sname) {
                    return Err(CoreError::DuplicateState {
                        line,
                        name: sname.to_string(),
                    });
                }
                let idx = states.len();
                states.push(sname.to_string());
                for flag in it.by_ref() {
                    match flag {
                        "init" => {
                            if initial.is_some() {
                                return Err(CoreError::MultipleInitialStates);
                            }
                            initial = Some(idx);
                        }
                        "accept" => {
                            accepting.insert(idx);
                        }
                        other => return Err(syntax(&format!("unknown state flag `{other}`"))),
                    }
                }
            }
            "trans" => {
                let src = it.next().ok_or_else(|| syntax("missing source state"))?;
                let sym = it.next().ok_or_else(|| syntax("missing symbol"))?;
                let dst = it.next().ok_or_else(|| syntax("missing target state"))?;
                let prob = it.next();
                if it.next().is_some() {
                    return Err(syntax("trailing tokens after transition"));
                }
                let src = states.iter().position(|s| s == src).ok_or_else(|| {
                    CoreError::UnknownState {
                        line,
                        name: src.to_string(),
                    }
                })?;
                let dst = states.iter().position(|s| s == dst).ok_or_else(|| {
                    CoreError::UnknownState {
                        line,
                        name: dst.to_string(),
                    }
                })?;
                let sym = alphabet.iter().position(|s| s == sym).ok_or_else(|| {
                    CoreError::UnknownSymbol {
                        line,
                        name: sym.to_string(),
                    }
                })?;
                let t = Transition {
                    source: src,
                    symbol: sym,
                    target: dst,
                };
                if !seen_trans.insert(t) {
                    return Err(CoreError::DuplicateTransition { line });
                }
                match (is_pfa, prob) {
                    (true, Some(p)) => weights.push(parse_rational(p)?),
                    (true, None) => return Err(syntax("pfa transition requires a probability")),
                    (false, Some(_)) => {
                        return Err(syntax("nfa transition must not carry a probability"))
                    }
                    (false, None) => {}
                }
                transitions.push(t);
            }
            "end" => ended = true,
            other => return Err(syntax(&format!("unknown keyword `{other}`"))),
        }
    }

    let name = name.ok_or(CoreError::Syntax {
        line: 0,
        msg: "missing `nfa`/`pfa` header".into(),
    })?;
    let initial = initial.ok_or(CoreError::NoInitialState)?;
    let nfa = Nfa::new(name, alphabet, states, initial, accepting, transitions)?;

    if is_pfa {
        // check stochasticity per declared (state, letter) row
        for q in 0..nfa.num_states() {
            for a in 0..nfa.alphabet().len() {
                let row = nfa.row(q, a);
                if row.is_empty() {
                    continue;
                }
                let sum: Rational = row.iter().map(|&ti| weights[ti].clone()).sum();
                if !sum.is_one() {
                    return Err(CoreError::RowNotStochastic {
                        state: nfa.states()[q].clone(),
                        symbol: nfa.alphabet()[a].clone(),
                        sum: format_rational(&sum),
                    });
                }
                if row.iter().any(|&ti| {
                    weights[ti] <= Rational::zero() || weights[ti] > Rational::one()
                }) {
                    return Err(CoreError::Invalid(format!(
                        "probability out of (0,1] on row ({}, {})",
                        nfa.states()[q],
                        nfa.alphabet()[a]
                    )));
                }
            }
        }
        Ok(ParsedAutomaton {
            nfa,
            weights: Some(weights),
        })
    } else {
        Ok(ParsedAutomaton { nfa, weights: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::rat;

    #[test]
    fn parses_fig1a_fixture() {
        let parsed = parse_automaton(include_str!("../../fixtures/fig1a.nfa")).unwrap();
        let a = parsed.into_nfa();
        assert_eq!(a.num_states(), 4);
        assert_eq!(a.transitions().len(), 4);
        assert_eq!(a.states()[a.initial()], "q0");
        let w = a.parse_word("ab").unwrap();
        assert!(a.accepts(&w));
        assert!(a.accepts(&a.parse_word("ac").unwrap()));
        assert!(!a.accepts(&a.parse_word("aa").unwrap()));
    }

    #[test]
    fn epsilon_only_automaton() {
        let a = parse_automaton("nfa eps\nalphabet a\nstate q init accept\nend")
            .unwrap()
            .into_nfa();
        assert!(a.accepts(&Word(vec![])));
        assert!(!a.accepts(&Word(vec![0])));
    }

    #[test]
    fn undeclared_state_is_reported_by_name() {
        let err = parse_automaton("nfa bad\nalphabet a\nstate q0 init accept\ntrans q0 a qX\nend")
            .unwrap_err();
        match err {
            CoreError::UnknownState { name, .. } => assert_eq!(name, "qX"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pfa_row_must_sum_to_one() {
        let err = parse_automaton(
            "pfa p\nalphabet a\nstate q init accept\ntrans q a q 1/3\nend",
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::RowNotStochastic { .. }));
        let ok = parse_automaton(
            "pfa p\nalphabet a\nstate q init accept\nstate r accept\n\
             trans q a q 1/3\ntrans q a r 2/3\nend",
        )
        .unwrap();
        assert_eq!(ok.weights.as_ref().unwrap()[0], rat(1, 3));
    }

    #[test]
    fn round_trip_up_to_renaming() {
        let text = include_str!("../../fixtures/fnfa4.nfa");
        let a = parse_automaton(text).unwrap().into_nfa();
        let b = parse_automaton(&a.to_text()).unwrap().into_nfa();
        assert_eq!(a, b);
    }

    use crate::core::Word;
}
