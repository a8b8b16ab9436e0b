//! Classify an NFA as unambiguous, k-ambiguous with exact degree, or
//! infinitely ambiguous.

use std::collections::{HashSet, VecDeque};

use crate::core::Nfa;

/// Ambiguity classification; `Finite(1)` is reported as `Unambiguous`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbiguityClass {
    Unambiguous,
    Finite(usize),
    Infinite,
}

impl AmbiguityClass {
    /// The degree bound for finitely ambiguous automata; 1 for unambiguous.
    pub fn degree(&self) -> Option<usize> {
        match self {
            AmbiguityClass::Unambiguous => Some(1),
            AmbiguityClass::Finite(k) => Some(*k),
            AmbiguityClass::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AmbiguityError {
    #[error("finite ambiguity degree exceeds the cap {0}")]
    DegreeCapExceeded(usize),
}

pub const DEFAULT_DEGREE_CAP: usize = 8;

/// Classifies the ambiguity of a trim automaton.
///
/// Infinite degree uses the criterion: useful states p ≠ q and a word v with
/// loops p→v→p, p→v→q, q→v→q, detected on the triple product. Unambiguity is
/// the reachable-and-coreachable distinct-pair search on the self-product.
/// The exact finite degree grows an m-fold product with a pairwise-divergence
/// bitmask; it terminates because the infinite case was excluded first.
pub fn classify_ambiguity(a: &Nfa, degree_cap: usize) -> Result<AmbiguityClass, AmbiguityError> {
    let a = a.trim();
    if a.transitions().is_empty() {
        return Ok(AmbiguityClass::Unambiguous);
    }
    if has_infinite_degree(&a) {
        return Ok(AmbiguityClass::Infinite);
    }
    if !has_divergent_tuple(&a, 2) {
        return Ok(AmbiguityClass::Unambiguous);
    }
    let mut degree = 2;
    loop {
        if degree + 1 > degree_cap {
            if has_divergent_tuple(&a, degree + 1) {
                return Err(AmbiguityError::DegreeCapExceeded(degree_cap));
            }
            return Ok(AmbiguityClass::Finite(degree));
        }
        if has_divergent_tuple(&a, degree + 1) {
            degree += 1;
        } else {
            return Ok(AmbiguityClass::Finite(degree));
        }
    }
}

/// Infinite-degree criterion on the triple product: a path from (p, p, q) to
/// (p, q, q) for useful p ≠ q closes the three loops on the same word.
fn has_infinite_degree(a: &Nfa) -> bool {
    let n = a.num_states();
    // all states of a trim automaton are useful
    let mut starts = Vec::new();
    for p in 0..n {
        for q in 0..n {
            if p != q {
                starts.push((p, p, q));
            }
        }
    }
    // forward BFS in the triple product from each candidate start
    for &(p1, p2, q1) in &starts {
        let goal = (p1, q1, q1);
        let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert((p1, p2, q1));
        queue.push_back((p1, p2, q1));
        while let Some((x, y, z)) = queue.pop_front() {
            if (x, y, z) == goal {
                return true;
            }
            for s in 0..a.alphabet().len() {
                for &t1 in a.row(x, s) {
                    for &t2 in a.row(y, s) {
                        for &t3 in a.row(z, s) {
                            let next = (
                                a.transition(t1).target,
                                a.transition(t2).target,
                                a.transition(t3).target,
                            );
                            if seen.insert(next) {
                                queue.push_back(next);
                            }
                        }
                    }
                }
            }
        }
    }
    false
}

/// Does some word admit `m` pairwise-distinct accepting runs? Tracked as an
/// m-tuple of states plus a divergence bit per run pair; tuples are
/// canonicalized by sorting runs by state, breaking ties on the bitmask so
/// permutation-equivalent search states coincide.
fn has_divergent_tuple(a: &Nfa, m: usize) -> bool {
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let full_mask: u64 = (1u64 << pairs.len()) - 1;
    let pair_bit = |i: usize, j: usize| -> u64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let idx = pairs.iter().position(|&p| p == (i, j)).unwrap();
        1u64 << idx
    };

    let canonical = |tuple: &[usize], mask: u64| -> (Vec<usize>, u64) {
        // sort run indices by (state, divergence row); stable under equal keys
        let rows: Vec<u64> = (0..m)
            .map(|i| {
                let mut row = 0u64;
                for j in 0..m {
                    if i != j {
                        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                        let idx = pairs.iter().position(|&p| p == (lo, hi)).unwrap();
                        if mask & (1 << idx) != 0 {
                            row |= 1 << j;
                        }
                    }
                }
                row
            })
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| (tuple[i], rows[i]));
        let new_tuple: Vec<usize> = order.iter().map(|&i| tuple[i]).collect();
        let mut new_mask = 0u64;
        for (ni, &oi) in order.iter().enumerate() {
            for (nj, &oj) in order.iter().enumerate().skip(ni + 1) {
                if mask & pair_bit(oi, oj) != 0 {
                    new_mask |= pair_bit(ni, nj);
                }
            }
        }
        (new_tuple, new_mask)
    };

    let start = canonical(&vec![a.initial(); m], 0);
    let mut seen: HashSet<(Vec<usize>, u64)> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    while let Some((tuple, mask)) = queue.pop_front() {
        if mask == full_mask && tuple.iter().all(|&q| a.is_accepting(q)) {
            return true;
        }
        for s in 0..a.alphabet().len() {
            // per-run transition choices on this letter
            let choices: Vec<&[usize]> = tuple.iter().map(|&q| a.row(q, s)).collect();
            if choices.iter().any(|c| c.is_empty()) {
                continue;
            }
            let mut pick = vec![0usize; m];
            'assign: loop {
                let trans: Vec<usize> = (0..m).map(|i| choices[i][pick[i]]).collect();
                let targets: Vec<usize> = trans.iter().map(|&t| a.transition(t).target).collect();
                let mut new_mask = mask;
                for (pi, &(i, j)) in pairs.iter().enumerate() {
                    if trans[i] != trans[j] {
                        new_mask |= 1 << pi;
                    }
                }
                let state = canonical(&targets, new_mask);
                if seen.insert(state.clone()) {
                    queue.push_back(state);
                }
                let mut r = 0;
                loop {
                    if r == m {
                        break 'assign;
                    }
                    pick[r] += 1;
                    if pick[r] < choices[r].len() {
                        break;
                    }
                    pick[r] = 0;
                    r += 1;
                }
            }
        }
    }
    false
}

/// Brute-force maximum accepting-run count over all words up to `max_len`;
/// the independent oracle used by the tests.
pub fn brute_force_max_runs(a: &Nfa, max_len: usize) -> u128 {
    let mut best = 0u128;
    let mut words: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..=max_len {
        let mut next = Vec::new();
        for w in &words {
            best = best.max(a.count_accepting_runs(&crate::core::Word(w.clone())));
            if w.len() < max_len {
                for s in 0..a.alphabet().len() {
                    let mut v = w.clone();
                    v.push(s);
                    next.push(v);
                }
            }
        }
        words = next;
        if words.is_empty() {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::parse_automaton;

    fn fixture(text: &str) -> Nfa {
        parse_automaton(text).unwrap().into_nfa()
    }

    #[test]
    fn fig1a_unambiguous() {
        let a = fixture(include_str!("../fixtures/fig1a.nfa"));
        assert_eq!(
            classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap(),
            AmbiguityClass::Unambiguous
        );
    }

    #[test]
    fn fig1b_unambiguous() {
        let a = fixture(include_str!("../fixtures/fig1b.nfa"));
        assert_eq!(
            classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap(),
            AmbiguityClass::Unambiguous
        );
    }

    #[test]
    fn fnfa4_is_four_ambiguous() {
        let a = fixture(include_str!("../fixtures/fnfa4.nfa"));
        assert_eq!(
            classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap(),
            AmbiguityClass::Finite(4)
        );
    }

    #[test]
    fn pump2_is_two_ambiguous() {
        let a = fixture(include_str!("../fixtures/pump2.nfa"));
        assert_eq!(
            classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap(),
            AmbiguityClass::Finite(2)
        );
    }

    #[test]
    fn infamb_is_infinite() {
        let a = fixture(include_str!("../fixtures/infamb.nfa"));
        assert_eq!(
            classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap(),
            AmbiguityClass::Infinite
        );
    }

    #[test]
    fn degree_cap_exceeded_reported() {
        let a = fixture(include_str!("../fixtures/fnfa4.nfa"));
        assert_eq!(
            classify_ambiguity(&a, 3),
            Err(AmbiguityError::DegreeCapExceeded(3))
        );
    }

    #[test]
    fn agrees_with_brute_force_on_fixtures() {
        for (text, len) in [
            (include_str!("../fixtures/fig1a.nfa"), 6),
            (include_str!("../fixtures/fnfa4.nfa"), 8),
            (include_str!("../fixtures/pump2.nfa"), 8),
        ] {
            let a = fixture(text);
            let class = classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap();
            let brute = brute_force_max_runs(&a, len);
            match class {
                AmbiguityClass::Unambiguous => assert!(brute <= 1),
                AmbiguityClass::Finite(k) => assert_eq!(brute, k as u128),
                AmbiguityClass::Infinite => unreachable!(),
            }
        }
    }
}
