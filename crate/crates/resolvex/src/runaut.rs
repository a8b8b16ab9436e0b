//! The run automaton Γ of a supported automaton: states are (k-tuple of run
//! states, rejected-reachable set R) pairs, canonical nice runs of words, and
//! detection of diminishable run components.
//!
//! Only the nice-run-consistent sub-automaton is built: R' on an edge is
//! exactly the set of newly reachable states outside the successor tuple, and
//! successors of R-states may never re-enter the tuple. Each edge carries the
//! per-component transition assignment, the permutation into the sorted
//! successor tuple, and the per-component nondeterminism flags, so cycles can
//! be threaded component-wise.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::core::{Nfa, Run, Word};
use crate::langops::Support;

/// A state of Γ: a sorted k-tuple of automaton states together with the set
/// of reachable states that admit no accepting continuation. Tuple states and
/// R are disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GammaState {
    pub tuple: Vec<usize>,
    pub rejected: BTreeSet<usize>,
}

/// An edge of Γ. `assign[i]` is the sub-automaton transition taken by the
/// component at position `i` of the source tuple, `perm[i]` its position in
/// the (sorted) target tuple, and `nondet[i]` whether that transition is
/// nondeterministic in the support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaEdge {
    pub from: usize,
    pub symbol: usize,
    pub to: usize,
    pub assign: Vec<usize>,
    pub perm: Vec<usize>,
    pub nondet: Vec<bool>,
}

/// The reachable, co-accessible part of the run automaton.
#[derive(Debug, Clone)]
pub struct RunAutomaton {
    /// The supported sub-automaton Γ was built for.
    pub sub: Nfa,
    pub k: usize,
    pub states: Vec<GammaState>,
    pub edges: Vec<GammaEdge>,
    pub out: Vec<Vec<usize>>,
    pub initial: usize,
    pub accepting: Vec<bool>,
    // per state, the tuple positions on some nondeterministic Γ-cycle
    diminishable: Vec<BTreeSet<usize>>,
}

/// A word's canonical trace through Γ. Runs are the accepting runs of the
/// word in the sub-automaton, sorted by state sequence and padded to k by
/// duplicating the least; `positions[i][j]` is the tuple position of run `j`
/// in `states[i]`.
#[derive(Debug, Clone)]
pub struct NiceRun {
    pub word: Word,
    pub states: Vec<GammaState>,
    pub runs: Vec<Run>,
    pub distinct_runs: usize,
    pub positions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunautError {
    #[error("run automaton exceeds the state budget of {0}")]
    StateBudgetExceeded(usize),
}

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

/// Builds the reachable nice-run-consistent Γ for `a` restricted to `s`,
/// tracking k run components. The caller is responsible for k being the
/// ambiguity degree of the restriction.
pub fn build_run_automaton(
    a: &Nfa,
    s: &Support,
    k: usize,
    state_budget: usize,
) -> Result<RunAutomaton, RunautError> {
    let sub = s.restrict(a);
    let nondet_mask: Vec<bool> = (0..sub.transitions().len())
        .map(|ti| {
            let t = sub.transition(ti);
            sub.row_is_nondet(t.source, t.symbol)
        })
        .collect();

    let init = GammaState {
        tuple: vec![sub.initial(); k],
        rejected: BTreeSet::new(),
    };
    let mut states: Vec<GammaState> = vec![init.clone()];
    let mut index: HashMap<GammaState, usize> = HashMap::from([(init, 0)]);
    let mut edges: Vec<GammaEdge> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::from([0]);

    while let Some(si) = queue.pop_front() {
        let state = states[si].clone();
        let tuple_set: BTreeSet<usize> = state.tuple.iter().copied().collect();
        let reach: BTreeSet<usize> = tuple_set.union(&state.rejected).copied().collect();
        for sym in 0..sub.alphabet().len() {
            let choices: Vec<Vec<usize>> = state
                .tuple
                .iter()
                .map(|&q| sub.row(q, sym).to_vec())
                .collect();
            if choices.iter().any(|c| c.is_empty()) {
                continue;
            }
            let reach_next = sub.step(&reach, sym);
            let rejected_next_base = sub.step(&state.rejected, sym);
            let mut pick = vec![0usize; k];
            'assign: loop {
                let assign: Vec<usize> = (0..k).map(|i| choices[i][pick[i]]).collect();
                let targets: Vec<usize> =
                    assign.iter().map(|&ti| sub.transition(ti).target).collect();
                let target_set: BTreeSet<usize> = targets.iter().copied().collect();
                // successors of dead states must stay dead
                if rejected_next_base.intersection(&target_set).next().is_none() {
                    let mut order: Vec<usize> = (0..k).collect();
                    order.sort_by_key(|&i| (targets[i], i));
                    let mut perm = vec![0usize; k];
                    for (rank, &i) in order.iter().enumerate() {
                        perm[i] = rank;
                    }
                    let sorted_tuple: Vec<usize> = order.iter().map(|&i| targets[i]).collect();
                    let rejected: BTreeSet<usize> = reach_next
                        .iter()
                        .copied()
                        .filter(|q| !target_set.contains(q))
                        .collect();
                    let gs = GammaState {
                        tuple: sorted_tuple,
                        rejected,
                    };
                    let to = match index.get(&gs) {
                        Some(&i) => i,
                        None => {
                            let i = states.len();
                            if i >= state_budget {
                                return Err(RunautError::StateBudgetExceeded(state_budget));
                            }
                            states.push(gs.clone());
                            index.insert(gs, i);
                            queue.push_back(i);
                            i
                        }
                    };
                    edges.push(GammaEdge {
                        from: si,
                        symbol: sym,
                        to,
                        nondet: assign.iter().map(|&ti| nondet_mask[ti]).collect(),
                        assign,
                        perm,
                    });
                }
                let mut r = 0;
                loop {
                    if r == k {
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

    let accepting: Vec<bool> = states
        .iter()
        .map(|g| {
            g.tuple.iter().all(|&q| sub.is_accepting(q))
                && g.rejected.iter().all(|&q| !sub.is_accepting(q))
        })
        .collect();

    // keep only states co-accessible from an accepting Γ-state
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
    for e in &edges {
        rev[e.to].push(e.from);
    }
    let mut keep: Vec<bool> = accepting.clone();
    let mut stack: Vec<usize> = (0..states.len()).filter(|&i| keep[i]).collect();
    while let Some(i) = stack.pop() {
        for &p in &rev[i] {
            if !keep[p] {
                keep[p] = true;
                stack.push(p);
            }
        }
    }
    keep[0] = true; // initial state always stays

    let mut remap = vec![usize::MAX; states.len()];
    let mut new_states = Vec::new();
    let mut new_accepting = Vec::new();
    for (i, g) in states.iter().enumerate() {
        if keep[i] {
            remap[i] = new_states.len();
            new_states.push(g.clone());
            new_accepting.push(accepting[i]);
        }
    }
    let new_edges: Vec<GammaEdge> = edges
        .into_iter()
        .filter(|e| keep[e.from] && keep[e.to])
        .map(|mut e| {
            e.from = remap[e.from];
            e.to = remap[e.to];
            e
        })
        .collect();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); new_states.len()];
    for (i, e) in new_edges.iter().enumerate() {
        out[e.from].push(i);
    }

    let mut ra = RunAutomaton {
        sub,
        k,
        states: new_states,
        edges: new_edges,
        out,
        initial: 0,
        accepting: new_accepting,
        diminishable: Vec::new(),
    };
    ra.diminishable = compute_diminishable(&ra);
    Ok(ra)
}

/// Component positions on nondeterministic cycles, via the position graph:
/// node (γ-state, position), edge ((from, i) -> (to, perm[i])) flagged when
/// the component step is nondeterministic. A position is diminishable when
/// its position-graph SCC contains a flagged edge.
fn compute_diminishable(ra: &RunAutomaton) -> Vec<BTreeSet<usize>> {
    let k = ra.k;
    let n = ra.states.len() * k;
    let node = |state: usize, pos: usize| state * k + pos;
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &ra.edges {
        for i in 0..k {
            graph[node(e.from, i)].push(node(e.to, e.perm[i]));
        }
    }
    let comp_of = tarjan_components(&graph);
    let num_comps = comp_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut comp_flag = vec![false; num_comps];
    for e in &ra.edges {
        for i in 0..k {
            let (u, v) = (node(e.from, i), node(e.to, e.perm[i]));
            if e.nondet[i] && comp_of[u] == comp_of[v] {
                comp_flag[comp_of[u]] = true;
            }
        }
    }
    (0..ra.states.len())
        .map(|s| {
            (0..k)
                .filter(|&p| comp_flag[comp_of[node(s, p)]])
                .collect()
        })
        .collect()
}

fn tarjan_components(graph: &[Vec<usize>]) -> Vec<usize> {
    let n = graph.len();
    let mut idx = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp_of = vec![usize::MAX; n];
    let mut counter = 0usize;
    let mut ncomp = 0usize;

    for start in 0..n {
        if idx[start] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        idx[start] = counter;
        low[start] = counter;
        counter += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&mut (v, ref mut ci)) = call.last_mut() {
            if *ci < graph[v].len() {
                let w = graph[v][*ci];
                *ci += 1;
                if idx[w] == usize::MAX {
                    idx[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(idx[w]);
                }
            } else {
                call.pop();
                let vlow = low[v];
                if let Some(&mut (p, _)) = call.last_mut() {
                    low[p] = low[p].min(vlow);
                }
                if vlow == idx[v] {
                    loop {
                        let w = stack.pop().expect("stack underflow");
                        on_stack[w] = false;
                        comp_of[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp_of
}

impl RunAutomaton {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn find_state(&self, g: &GammaState) -> Option<usize> {
        self.states.iter().position(|s| s == g)
    }

    /// Component positions diminishable at a Γ-state.
    pub fn diminishable_components(&self, state: usize) -> &BTreeSet<usize> {
        &self.diminishable[state]
    }

    /// DOT rendering with tuple/R labels.
    pub fn to_dot(&self) -> String {
        let name = |g: &GammaState| {
            let tuple: Vec<&str> = g
                .tuple
                .iter()
                .map(|&q| self.sub.states()[q].as_str())
                .collect();
            let rej: Vec<&str> = g
                .rejected
                .iter()
                .map(|&q| self.sub.states()[q].as_str())
                .collect();
            format!("(({}),{{{}}})", tuple.join(","), rej.join(","))
        };
        let mut outp = String::new();
        outp.push_str(&format!("digraph \"gamma_{}\" {{\n", self.sub.name));
        outp.push_str("  rankdir=LR;\n  node [shape=box];\n  __init [shape=point];\n");
        for (i, g) in self.states.iter().enumerate() {
            let style = if self.accepting[i] { ",peripheries=2" } else { "" };
            outp.push_str(&format!("  n{i} [label=\"{}\"{style}];\n", name(g)));
        }
        outp.push_str(&format!("  __init -> n{};\n", self.initial));
        let mut seen: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
        for e in &self.edges {
            if seen.insert((e.from, e.to, e.symbol)) {
                outp.push_str(&format!(
                    "  n{} -> n{} [label=\"{}\"];\n",
                    e.from,
                    e.to,
                    self.sub.alphabet()[e.symbol]
                ));
            }
        }
        outp.push_str("}\n");
        outp
    }
}

/// The canonical nice run of `w` in Γ_{a_S}: accepting runs enumerated and
/// sorted by state sequence, padded to `k` by duplicating the least, with R
/// at step i exactly the reachable states lacking an accepting continuation
/// on the remaining suffix. `None` iff the restriction rejects `w`.
pub fn nice_run(a: &Nfa, s: &Support, k: usize, w: &Word) -> Option<NiceRun> {
    let sub = s.restrict(a);
    let mut runs = sub.accepting_runs(w);
    if runs.is_empty() {
        return None;
    }
    let state_seq = |r: &Run| -> Vec<usize> {
        let mut seq = vec![sub.initial()];
        for &ti in &r.0 {
            seq.push(sub.transition(ti).target);
        }
        seq
    };
    runs.sort_by_key(&state_seq);
    let distinct = runs.len();
    assert!(
        distinct <= k,
        "word has {distinct} accepting runs but k = {k}"
    );
    let mut padded = vec![runs[0].clone(); k - distinct];
    padded.extend(runs);
    let runs = padded;

    let seqs: Vec<Vec<usize>> = runs.iter().map(&state_seq).collect();
    let co = sub.co_accepting_profile(w);
    let mut fwd: BTreeSet<usize> = [sub.initial()].into();
    let mut states = Vec::with_capacity(w.len() + 1);
    let mut positions = Vec::with_capacity(w.len() + 1);
    for i in 0..=w.len() {
        if i > 0 {
            fwd = sub.step(&fwd, w.0[i - 1]);
        }
        let here: Vec<usize> = seqs.iter().map(|s| s[i]).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&j| (here[j], j));
        let mut pos = vec![0usize; k];
        for (rank, &j) in order.iter().enumerate() {
            pos[j] = rank;
        }
        let tuple: Vec<usize> = order.iter().map(|&j| here[j]).collect();
        let rejected: BTreeSet<usize> = fwd
            .iter()
            .copied()
            .filter(|q| !co[i].contains(q))
            .collect();
        states.push(GammaState { tuple, rejected });
        positions.push(pos);
    }
    Some(NiceRun {
        word: w.clone(),
        states,
        runs,
        distinct_runs: distinct,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::parse_automaton;

    fn fixture(text: &str) -> Nfa {
        parse_automaton(text).unwrap().into_nfa()
    }

    fn gamma(a: &Nfa, k: usize) -> RunAutomaton {
        build_run_automaton(a, &Support::full(a), k, DEFAULT_STATE_BUDGET).unwrap()
    }

    fn gstate(a: &Nfa, tuple: &[&str], rejected: &[&str]) -> GammaState {
        GammaState {
            tuple: tuple.iter().map(|n| a.state_index(n).unwrap()).collect(),
            rejected: rejected.iter().map(|n| a.state_index(n).unwrap()).collect(),
        }
    }

    #[test]
    fn fig1a_gamma_has_four_states_acyclic() {
        let a = fixture(include_str!("../fixtures/fig1a.nfa"));
        let ra = gamma(&a, 1);
        assert_eq!(ra.num_states(), 4);
        for i in 0..ra.num_states() {
            assert!(ra.diminishable_components(i).is_empty());
        }
    }

    #[test]
    fn fig1b_gamma_three_states_and_diminishability() {
        let a = fixture(include_str!("../fixtures/fig1b.nfa"));
        let ra = gamma(&a, 1);
        assert_eq!(ra.num_states(), 3);
        let g0 = ra.find_state(&gstate(&a, &["q0"], &[])).unwrap();
        let g1 = ra.find_state(&gstate(&a, &["q0"], &["qf"])).unwrap();
        let gf = ra.find_state(&gstate(&a, &["qf"], &["q0"])).unwrap();
        assert!(ra.accepting[gf]);
        // the b-self-loop at ((q0),{qf}) uses the nondeterministic q0-b->q0
        assert_eq!(ra.diminishable_components(g1), &BTreeSet::from([0usize]));
        // ((q0),{}) lies on the 2-cycle through ((q0),{qf}) closed by the
        // a-step that drops the dead qf; the word family (ba)^j b realizes
        // it, so component 0 is diminishable here as well
        assert_eq!(ra.diminishable_components(g0), &BTreeSet::from([0usize]));
    }

    #[test]
    fn dfa_gamma_has_no_diminishable_components() {
        let a = fixture(
            "nfa d\nalphabet a b\nstate x init accept\nstate y accept\n\
             trans x a y\ntrans y b x\ntrans y a y\nend",
        );
        let ra = gamma(&a, 1);
        for i in 0..ra.num_states() {
            assert!(ra.diminishable_components(i).is_empty());
        }
    }

    #[test]
    fn fnfa4_gamma_contains_loop_states_with_b_self_loops() {
        let a = fixture(include_str!("../fixtures/fnfa4.nfa"));
        let ra = gamma(&a, 4);
        let g1 = ra
            .find_state(&gstate(&a, &["q1", "q1", "q3", "q3"], &["qf"]))
            .expect("loop state 1 present");
        let g2 = ra
            .find_state(&gstate(&a, &["q4", "q4", "q6", "q6"], &["qf"]))
            .expect("loop state 2 present");
        let b = a.symbol_index("b").unwrap();
        for g in [g1, g2] {
            assert!(
                ra.out[g]
                    .iter()
                    .any(|&e| ra.edges[e].to == g && ra.edges[e].symbol == b),
                "expected a b-self-loop"
            );
        }
        // q1 components loop nondeterministically at g1, q6 components at g2
        assert_eq!(ra.diminishable_components(g1), &BTreeSet::from([0, 1]));
        assert_eq!(ra.diminishable_components(g2), &BTreeSet::from([2, 3]));
    }

    #[test]
    fn nice_run_fnfa4_rejected_sequence() {
        let a = fixture(include_str!("../fixtures/fnfa4.nfa"));
        let w = a.parse_word("abbabbac").unwrap();
        let nr = nice_run(&a, &Support::full(&a), 4, &w).unwrap();
        let qf = a.state_index("qf").unwrap();
        let rejected: Vec<Vec<usize>> = nr
            .states
            .iter()
            .map(|g| g.rejected.iter().copied().collect())
            .collect();
        let expect: Vec<Vec<usize>> = vec![
            vec![],
            vec![],
            vec![qf],
            vec![qf],
            vec![],
            vec![qf],
            vec![qf],
            vec![],
            vec![],
        ];
        assert_eq!(rejected, expect);
    }

    #[test]
    fn nice_run_fig1a_ab_rejects_q() {
        let a = fixture(include_str!("../fixtures/fig1a.nfa"));
        let w = a.parse_word("ab").unwrap();
        let nr = nice_run(&a, &Support::full(&a), 1, &w).unwrap();
        assert_eq!(nr.states[1], gstate(&a, &["p"], &["q"]));
    }

    #[test]
    fn nice_run_fig1b_b() {
        let a = fixture(include_str!("../fixtures/fig1b.nfa"));
        let w = a.parse_word("b").unwrap();
        let nr = nice_run(&a, &Support::full(&a), 1, &w).unwrap();
        assert_eq!(nr.states[0], gstate(&a, &["q0"], &[]));
        assert_eq!(nr.states[1], gstate(&a, &["qf"], &["q0"]));
        assert!(nice_run(&a, &Support::full(&a), 1, &a.parse_word("ba").unwrap()).is_none());
    }

    #[test]
    fn nice_run_is_a_path_in_gamma() {
        let a = fixture(include_str!("../fixtures/fnfa4.nfa"));
        let ra = gamma(&a, 4);
        for wtext in ["abbabbac", "ababac", "ab", "aabc"] {
            let w = a.parse_word(wtext).unwrap();
            let nr = nice_run(&a, &Support::full(&a), 4, &w).unwrap();
            let mut cur = ra.initial;
            assert_eq!(ra.states[cur], nr.states[0]);
            for (i, &sym) in w.0.iter().enumerate() {
                let next = ra.out[cur]
                    .iter()
                    .copied()
                    .find(|&e| {
                        ra.edges[e].symbol == sym && ra.states[ra.edges[e].to] == nr.states[i + 1]
                    })
                    .unwrap_or_else(|| panic!("no edge at step {i} of {wtext}"));
                cur = ra.edges[next].to;
            }
            assert!(ra.accepting[cur], "nice run of {wtext} must end accepting");
        }
    }

    #[test]
    fn state_budget_is_enforced() {
        let a = fixture(include_str!("../fixtures/fnfa4.nfa"));
        let err = build_run_automaton(&a, &Support::full(&a), 4, 3).unwrap_err();
        assert_eq!(err, RunautError::StateBudgetExceeded(3));
    }
}
