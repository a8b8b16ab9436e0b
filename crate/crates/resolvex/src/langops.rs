//! Language-level decision procedures (emptiness, universality, inclusion,
//! equivalence) via on-the-fly subset construction, and enumeration of the
//! language-preserving supports of an automaton.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::core::{Nfa, Transition, Word};

/// A set of transitions given positive probability by some resolver.
///
/// Every (state, letter) pair that has at least one transition in the host
/// keeps at least one in the support; this is the stochasticity requirement
/// of resolvers, whose row sums must be one wherever a row exists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Support {
    included: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("alphabet mismatch: {0:?} vs {1:?}")]
    AlphabetMismatch(Vec<String>, Vec<String>),
    #[error("support invalid: {0}")]
    BadSupport(String),
}

impl Support {
    /// The full support of `a`.
    pub fn full(a: &Nfa) -> Support {
        Support {
            included: (0..a.transitions().len()).collect(),
        }
    }

    /// Builds a support from transition indices, checking the row-coverage
    /// invariant against the host.
    pub fn new(a: &Nfa, included: BTreeSet<usize>) -> Result<Support, LangError> {
        if included.iter().any(|&i| i >= a.transitions().len()) {
            return Err(LangError::BadSupport("transition index out of range".into()));
        }
        for q in 0..a.num_states() {
            for s in 0..a.alphabet().len() {
                let row = a.row(q, s);
                if !row.is_empty() && !row.iter().any(|i| included.contains(i)) {
                    return Err(LangError::BadSupport(format!(
                        "row ({}, {}) left uncovered",
                        a.states()[q],
                        a.alphabet()[s]
                    )));
                }
            }
        }
        Ok(Support { included })
    }

    pub fn contains(&self, ti: usize) -> bool {
        self.included.contains(&ti)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.included.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn is_full(&self, a: &Nfa) -> bool {
        self.included.len() == a.transitions().len()
    }

    /// The sub-automaton of `a` restricted to this support. State set and
    /// indices are unchanged, only transitions are filtered.
    pub fn restrict(&self, a: &Nfa) -> Nfa {
        let transitions: Vec<Transition> = a
            .transitions()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.included.contains(i))
            .map(|(_, t)| *t)
            .collect();
        Nfa::new(
            a.name.clone(),
            a.alphabet().to_vec(),
            a.states().to_vec(),
            a.initial(),
            a.accepting().clone(),
            transitions,
        )
        .expect("restriction of a valid automaton is valid")
    }

    /// Indices of host transitions excluded from the support.
    pub fn excluded(&self, a: &Nfa) -> Vec<usize> {
        (0..a.transitions().len())
            .filter(|i| !self.included.contains(i))
            .collect()
    }

    /// A transition is nondeterministic in the support when its (state,
    /// letter) row retains two or more transitions.
    pub fn nondet_mask(&self, a: &Nfa) -> Vec<bool> {
        let mut mask = vec![false; a.transitions().len()];
        for q in 0..a.num_states() {
            for s in 0..a.alphabet().len() {
                let kept: Vec<usize> = a
                    .row(q, s)
                    .iter()
                    .copied()
                    .filter(|i| self.included.contains(i))
                    .collect();
                if kept.len() >= 2 {
                    for i in kept {
                        mask[i] = true;
                    }
                }
            }
        }
        mask
    }
}

/// Query mode for [`language_relation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationMode {
    /// Is L(a) empty? (b ignored)
    Empty,
    /// Is L(a) = Σ*? (b ignored)
    Universal,
    /// Is L(a) ⊆ L(b)?
    Includes,
    /// Is L(a) = L(b)?
    Equivalent,
}

/// Outcome of a language query; `counterexample` is a shortest witness when
/// the answer is negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationAnswer {
    pub holds: bool,
    pub counterexample: Option<Word>,
}

fn answer(holds: bool, cex: Option<Word>) -> RelationAnswer {
    RelationAnswer {
        holds,
        counterexample: cex,
    }
}

/// Decides the language relation by breadth-first subset construction over
/// the product of the two subset automata; counterexamples are shortest.
pub fn language_relation(
    a: &Nfa,
    b: Option<&Nfa>,
    mode: RelationMode,
) -> Result<RelationAnswer, LangError> {
    match mode {
        RelationMode::Empty => {
            let reach = a.reachable();
            let hit = reach.iter().any(|&q| a.is_accepting(q));
            if !hit {
                return Ok(answer(true, None));
            }
            // shortest accepted word as the counterexample to emptiness
            let cex = shortest_word(a, |set| set.iter().any(|&q| a.is_accepting(q)));
            Ok(answer(false, cex))
        }
        RelationMode::Universal => {
            let cex = shortest_word(a, |set| !set.iter().any(|&q| a.is_accepting(q)));
            Ok(answer(cex.is_none(), cex))
        }
        RelationMode::Includes | RelationMode::Equivalent => {
            let b = b.expect("binary mode needs a second automaton");
            if a.alphabet() != b.alphabet() {
                return Err(LangError::AlphabetMismatch(
                    a.alphabet().to_vec(),
                    b.alphabet().to_vec(),
                ));
            }
            let bad = |sa: &BTreeSet<usize>, sb: &BTreeSet<usize>| {
                let acc_a = sa.iter().any(|&q| a.is_accepting(q));
                let acc_b = sb.iter().any(|&q| b.is_accepting(q));
                match mode {
                    RelationMode::Includes => acc_a && !acc_b,
                    RelationMode::Equivalent => acc_a != acc_b,
                    _ => unreachable!(),
                }
            };
            let cex = shortest_word_product(a, b, bad);
            Ok(answer(cex.is_none(), cex))
        }
    }
}

/// BFS over the subset automaton of `a`; returns the shortest word whose
/// reached subset satisfies `pred`.
fn shortest_word(a: &Nfa, pred: impl Fn(&BTreeSet<usize>) -> bool) -> Option<Word> {
    let start: BTreeSet<usize> = [a.initial()].into();
    let mut seen: HashMap<BTreeSet<usize>, ()> = HashMap::new();
    let mut queue: VecDeque<(BTreeSet<usize>, Vec<usize>)> = VecDeque::new();
    seen.insert(start.clone(), ());
    queue.push_back((start, Vec::new()));
    while let Some((set, word)) = queue.pop_front() {
        if pred(&set) {
            return Some(Word(word));
        }
        for s in 0..a.alphabet().len() {
            let next = a.step(&set, s);
            if !seen.contains_key(&next) {
                seen.insert(next.clone(), ());
                let mut w = word.clone();
                w.push(s);
                queue.push_back((next, w));
            }
        }
    }
    None
}

fn shortest_word_product(
    a: &Nfa,
    b: &Nfa,
    pred: impl Fn(&BTreeSet<usize>, &BTreeSet<usize>) -> bool,
) -> Option<Word> {
    let start = (
        BTreeSet::from([a.initial()]),
        BTreeSet::from([b.initial()]),
    );
    let mut seen: HashMap<(BTreeSet<usize>, BTreeSet<usize>), ()> = HashMap::new();
    let mut queue: VecDeque<((BTreeSet<usize>, BTreeSet<usize>), Vec<usize>)> = VecDeque::new();
    seen.insert(start.clone(), ());
    queue.push_back((start, Vec::new()));
    while let Some(((sa, sb), word)) = queue.pop_front() {
        if pred(&sa, &sb) {
            return Some(Word(word));
        }
        for s in 0..a.alphabet().len() {
            let next = (a.step(&sa, s), b.step(&sb, s));
            if !seen.contains_key(&next) {
                seen.insert(next.clone(), ());
                let mut w = word.clone();
                w.push(s);
                queue.push_back((next, w));
            }
        }
    }
    None
}

/// Enumerates the supports of a trim automaton whose restriction preserves
/// the language. Iterates per-(state, letter) nonempty subsets of each choice
/// row rather than all of 2^Δ; the full support comes first and the order is
/// deterministic.
pub fn enumerate_supports(a: &Nfa) -> Vec<Support> {
    // rows with a choice, in (state, symbol) order
    let mut choice_rows: Vec<Vec<usize>> = Vec::new();
    let mut forced: BTreeSet<usize> = BTreeSet::new();
    for q in 0..a.num_states() {
        for s in 0..a.alphabet().len() {
            let row = a.row(q, s);
            match row.len() {
                0 => {}
                1 => {
                    forced.insert(row[0]);
                }
                _ => choice_rows.push(row.to_vec()),
            }
        }
    }

    // nonempty subsets per row, full subset first, then by descending size
    // and ascending content for determinism
    let row_subsets: Vec<Vec<Vec<usize>>> = choice_rows
        .iter()
        .map(|row| {
            let mut subsets: Vec<Vec<usize>> = Vec::new();
            let n = row.len();
            for mask in 1..(1u32 << n) {
                let subset: Vec<usize> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| row[i])
                    .collect();
                subsets.push(subset);
            }
            subsets.sort_by(|x, y| y.len().cmp(&x.len()).then(x.cmp(y)));
            subsets
        })
        .collect();

    let mut out = Vec::new();
    let mut pick = vec![0usize; row_subsets.len()];
    loop {
        let mut included = forced.clone();
        for (r, &p) in pick.iter().enumerate() {
            included.extend(row_subsets[r][p].iter().copied());
        }
        let support = Support { included };
        let sub = support.restrict(a);
        if language_relation(&sub, Some(a), RelationMode::Equivalent)
            .expect("same alphabet")
            .holds
        {
            out.push(support);
        }
        // odometer over subset choices
        let mut r = 0;
        loop {
            if r == pick.len() {
                return out;
            }
            pick[r] += 1;
            if pick[r] < row_subsets[r].len() {
                break;
            }
            pick[r] = 0;
            r += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::parse_automaton;

    fn fixture(text: &str) -> Nfa {
        parse_automaton(text).unwrap().into_nfa()
    }

    fn fig1a() -> Nfa {
        fixture(include_str!("../fixtures/fig1a.nfa"))
    }
    fn fig1b() -> Nfa {
        fixture(include_str!("../fixtures/fig1b.nfa"))
    }
    fn fnfa4() -> Nfa {
        fixture(include_str!("../fixtures/fnfa4.nfa"))
    }

    #[test]
    fn fig1b_not_universal_shortest_witness() {
        let ans = language_relation(&fig1b(), None, RelationMode::Universal).unwrap();
        assert!(!ans.holds);
        // the empty word is the shortest witness: q0 is not accepting
        let cex = ans.counterexample.unwrap();
        assert_eq!(cex, Word(vec![]));
        assert!(!fig1b().accepts(&cex));
    }

    #[test]
    fn dropped_branch_breaks_equivalence_with_witness_ac() {
        let a = fig1a();
        // support missing q0 -a-> q: index lookup
        let drop = a
            .transitions()
            .iter()
            .position(|t| {
                a.states()[t.source] == "q0"
                    && a.alphabet()[t.symbol] == "a"
                    && a.states()[t.target] == "q"
            })
            .unwrap();
        let included: BTreeSet<usize> =
            (0..a.transitions().len()).filter(|&i| i != drop).collect();
        let support = Support::new(&a, included).unwrap();
        let sub = support.restrict(&a);
        let ans = language_relation(&sub, Some(&a), RelationMode::Equivalent).unwrap();
        assert!(!ans.holds);
        assert_eq!(a.format_word(&ans.counterexample.unwrap()), "ac");
    }

    #[test]
    fn equivalence_is_reflexive() {
        for a in [fig1a(), fig1b(), fnfa4()] {
            let ans = language_relation(&a, Some(&a), RelationMode::Equivalent).unwrap();
            assert!(ans.holds);
        }
    }

    #[test]
    fn inclusion_both_ways_iff_equivalent() {
        let a = fig1a();
        let drop = a
            .transitions()
            .iter()
            .position(|t| a.states()[t.target] == "q")
            .unwrap();
        let included: BTreeSet<usize> =
            (0..a.transitions().len()).filter(|&i| i != drop).collect();
        let sub = Support::new(&a, included).unwrap().restrict(&a);
        let fwd = language_relation(&sub, Some(&a), RelationMode::Includes)
            .unwrap()
            .holds;
        let bwd = language_relation(&a, Some(&sub), RelationMode::Includes)
            .unwrap()
            .holds;
        let eq = language_relation(&a, Some(&sub), RelationMode::Equivalent)
            .unwrap()
            .holds;
        assert!(fwd);
        assert!(!bwd);
        assert_eq!(fwd && bwd, eq);
    }

    #[test]
    fn alphabet_mismatch_is_an_error() {
        let err = language_relation(&fig1a(), Some(&fig1b()), RelationMode::Equivalent);
        assert!(matches!(err, Err(LangError::AlphabetMismatch(_, _))));
    }

    #[test]
    fn fig1a_only_full_support() {
        let sups = enumerate_supports(&fig1a());
        assert_eq!(sups.len(), 1);
        assert!(sups[0].is_full(&fig1a()));
    }

    #[test]
    fn fnfa4_supports_include_the_q2_excluding_one() {
        let a = fnfa4();
        let sups = enumerate_supports(&a);
        // full, drop s-a->q2, drop q6-a->qf (covered by the q1/q4 branch),
        // drop both
        assert_eq!(sups.len(), 4);
        assert!(sups[0].is_full(&a));
        let descr: Vec<Vec<String>> = sups
            .iter()
            .map(|s| {
                s.excluded(&a)
                    .iter()
                    .map(|&i| {
                        let t = a.transition(i);
                        format!(
                            "{}-{}->{}",
                            a.states()[t.source],
                            a.alphabet()[t.symbol],
                            a.states()[t.target]
                        )
                    })
                    .collect()
            })
            .collect();
        assert!(descr.contains(&vec!["s-a->q2".to_string()]));
        assert!(descr.contains(&vec!["q6-a->qf".to_string()]));
        assert!(descr.contains(&vec!["s-a->q2".to_string(), "q6-a->qf".to_string()]));
    }

    #[test]
    fn dfa_has_only_full_support() {
        let dfa = fixture(
            "nfa d\nalphabet a b\nstate x init accept\nstate y\n\
             trans x a y\ntrans y b x\nend",
        );
        let sups = enumerate_supports(&dfa);
        assert_eq!(sups.len(), 1);
        assert!(sups[0].is_full(&dfa));
    }

    #[test]
    fn support_must_cover_every_nonempty_row() {
        let a = fig1b();
        // dropping both b-transitions of q0 uncovers the row
        let only_a: BTreeSet<usize> = a
            .transitions()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.symbol == a.symbol_index("a").unwrap())
            .map(|(i, _)| i)
            .collect();
        assert!(Support::new(&a, only_a).is_err());
    }
}
