//! Positive resolvability for finitely-ambiguous automata: bad-word search
//! via the branching/looping set abstraction, certificate verification
//! against the bad-word conditions, and an explicit run-automaton lasso
//! search used as the independent oracle.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::ambiguity::{classify_ambiguity, AmbiguityClass, AmbiguityError, DEFAULT_DEGREE_CAP};
use crate::core::{Nfa, Word};
use crate::langops::{enumerate_supports, Support};
use crate::pfa::Resolver;
use crate::runaut::{build_run_automaton, RunautError, DEFAULT_STATE_BUDGET};

/// Certificate that a support is bad: a word x0 y1 x1 … yl xl whose loop
/// blocks y_i pump every accepting run down, with the per-phase state sets
/// and pivots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadWordWitness {
    /// x0, x1, …, xl
    pub x_blocks: Vec<Word>,
    /// y1, …, yl (nonempty)
    pub y_blocks: Vec<Word>,
    /// Q1, …, Ql
    pub q_sets: Vec<BTreeSet<usize>>,
    /// q1, …, ql with q_i ∈ Q_i
    pub pivots: Vec<usize>,
    /// R1, …, Rl
    pub r_sets: Vec<BTreeSet<usize>>,
}

impl BadWordWitness {
    /// The witnessing word x0 y1 x1 … yl xl.
    pub fn word(&self) -> Word {
        let mut w = self.x_blocks[0].0.clone();
        for i in 0..self.y_blocks.len() {
            w.extend(&self.y_blocks[i].0);
            w.extend(&self.x_blocks[i + 1].0);
        }
        Word(w)
    }

    /// The word with every y-block pumped `j` times.
    pub fn pumped(&self, j: usize) -> Word {
        let mut w = self.x_blocks[0].0.clone();
        for i in 0..self.y_blocks.len() {
            for _ in 0..j {
                w.extend(&self.y_blocks[i].0);
            }
            w.extend(&self.x_blocks[i + 1].0);
        }
        Word(w)
    }

    pub fn num_loops(&self) -> usize {
        self.y_blocks.len()
    }

    /// Block-structured text rendering, accepted back by [`parse_witness`].
    pub fn to_text(&self, a: &Nfa) -> String {
        let mut parts = vec![format!("x0={}", a.format_word(&self.x_blocks[0]))];
        for i in 0..self.y_blocks.len() {
            parts.push(format!("y{}={}", i + 1, a.format_word(&self.y_blocks[i])));
            parts.push(format!("x{}={}", i + 1, a.format_word(&self.x_blocks[i + 1])));
        }
        let mut out = parts.join(" ");
        out.push(';');
        for i in 0..self.y_blocks.len() {
            let set = |s: &BTreeSet<usize>| {
                let names: Vec<&str> = s.iter().map(|&q| a.states()[q].as_str()).collect();
                format!("{{{}}}", names.join(","))
            };
            out.push_str(&format!(
                " Q{i1}={} p{i1}={} R{i1}={}",
                set(&self.q_sets[i]),
                a.states()[self.pivots[i]],
                set(&self.r_sets[i]),
                i1 = i + 1
            ));
        }
        out
    }
}

/// Parses the block-structured witness text.
pub fn parse_witness(a: &Nfa, text: &str) -> Result<BadWordWitness, FnfaError> {
    let bad = |msg: &str| FnfaError::BadWitnessText(msg.to_string());
    let (words_part, sets_part) = match text.split_once(';') {
        Some((w, s)) => (w, s),
        None => (text, ""),
    };
    let mut x_blocks = Vec::new();
    let mut y_blocks = Vec::new();
    for tok in words_part.split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let w = a
            .parse_word(val)
            .map_err(|e| bad(&format!("bad word `{val}`: {e}")))?;
        if let Some(rest) = key.strip_prefix('x') {
            let idx: usize = rest.parse().map_err(|_| bad("bad x index"))?;
            if idx != x_blocks.len() {
                return Err(bad("x blocks out of order"));
            }
            x_blocks.push(w);
        } else if let Some(rest) = key.strip_prefix('y') {
            let idx: usize = rest.parse().map_err(|_| bad("bad y index"))?;
            if idx != y_blocks.len() + 1 {
                return Err(bad("y blocks out of order"));
            }
            y_blocks.push(w);
        } else {
            return Err(bad(&format!("unknown block `{key}`")));
        }
    }
    if x_blocks.len() != y_blocks.len() + 1 {
        return Err(bad("expected one more x block than y blocks"));
    }
    let mut q_sets = vec![BTreeSet::new(); y_blocks.len()];
    let mut pivots = vec![usize::MAX; y_blocks.len()];
    let mut r_sets = vec![BTreeSet::new(); y_blocks.len()];
    let parse_set = |val: &str| -> Result<BTreeSet<usize>, FnfaError> {
        let inner = val
            .strip_prefix('{')
            .and_then(|v| v.strip_suffix('}'))
            .ok_or_else(|| bad("expected {..} set"))?;
        inner
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                a.state_index(s.trim())
                    .ok_or_else(|| bad(&format!("unknown state `{s}`")))
            })
            .collect()
    };
    for tok in sets_part.split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        let idx_of = |rest: &str| -> Result<usize, FnfaError> {
            let i: usize = rest.parse().map_err(|_| bad("bad set index"))?;
            if i == 0 || i > y_blocks.len() {
                return Err(bad("set index out of range"));
            }
            Ok(i - 1)
        };
        if let Some(rest) = key.strip_prefix('Q') {
            q_sets[idx_of(rest)?] = parse_set(val)?;
        } else if let Some(rest) = key.strip_prefix('R') {
            r_sets[idx_of(rest)?] = parse_set(val)?;
        } else if let Some(rest) = key.strip_prefix('p') {
            pivots[idx_of(rest)?] = a
                .state_index(val)
                .ok_or_else(|| bad(&format!("unknown state `{val}`")))?;
        } else {
            return Err(bad(&format!("unknown set `{key}`")));
        }
    }
    if pivots.iter().any(|&p| p == usize::MAX) {
        return Err(bad("missing pivot"));
    }
    Ok(BadWordWitness {
        x_blocks,
        y_blocks,
        q_sets,
        pivots,
        r_sets,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FnfaError {
    #[error("automaton is not finitely ambiguous")]
    InfiniteAmbiguity,
    #[error("ambiguity must be classified before the search")]
    AmbiguityUnknown,
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
    #[error(transparent)]
    Runaut(#[from] RunautError),
    #[error("bad witness text: {0}")]
    BadWitnessText(String),
}

/// One verified check of the bad-word conditions, with diagnostics per
/// failed condition.
#[derive(Debug, Clone)]
pub struct WitnessCheck {
    pub ok: bool,
    pub failures: Vec<String>,
}

/// Checks the four bad-word conditions directly with run enumeration and
/// reachability over the supported sub-automaton.
pub fn verify_bad_word(a: &Nfa, s: &Support, w: &BadWordWitness) -> WitnessCheck {
    let sub = s.restrict(a);
    let mut failures = Vec::new();
    let ell = w.y_blocks.len();
    if ell == 0 {
        return WitnessCheck {
            ok: false,
            failures: vec!["no y block: a bad word needs at least one loop".into()],
        };
    }
    if w.y_blocks.iter().any(|y| y.is_empty()) {
        failures.push("empty y block".into());
    }
    let word = w.word();
    let runs = sub.accepting_runs(&word);
    if runs.is_empty() {
        failures.push("word is not accepted by the supported automaton".into());
        return WitnessCheck {
            ok: false,
            failures,
        };
    }
    // positions: p[i] = start of y_{i+1}, e[i] = end of y_{i+1}
    let mut p = Vec::with_capacity(ell);
    let mut e = Vec::with_capacity(ell);
    let mut pos = w.x_blocks[0].len();
    for i in 0..ell {
        p.push(pos);
        pos += w.y_blocks[i].len();
        e.push(pos);
        pos += w.x_blocks[i + 1].len();
    }
    let co = sub.co_accepting_profile(&word);
    let init: BTreeSet<usize> = [sub.initial()].into();
    let mut fwd_sets = Vec::with_capacity(word.len() + 1);
    let mut fwd = init;
    fwd_sets.push(fwd.clone());
    for &sym in &word.0 {
        fwd = sub.step(&fwd, sym);
        fwd_sets.push(fwd.clone());
    }
    let state_at = |run: &crate::core::Run, i: usize| -> usize {
        if i == 0 {
            sub.initial()
        } else {
            sub.transition(run.0[i - 1]).target
        }
    };
    let nondet = |ti: usize| {
        let t = sub.transition(ti);
        sub.row_is_nondet(t.source, t.symbol)
    };

    for i in 0..ell {
        let live: BTreeSet<usize> = fwd_sets[p[i]]
            .intersection(&co[p[i]])
            .copied()
            .collect();
        if live != w.q_sets[i] {
            failures.push(format!(
                "condition 1 fails at block {}: accepting runs end in {live:?}, witness says {:?}",
                i + 1,
                w.q_sets[i]
            ));
        }
        if !w.q_sets[i].contains(&w.pivots[i]) {
            failures.push(format!("pivot {} not in Q{}", i + 1, i + 1));
        }
        let dead_before: BTreeSet<usize> = fwd_sets[p[i]]
            .difference(&co[p[i]])
            .copied()
            .collect();
        let dead_after: BTreeSet<usize> = fwd_sets[e[i]]
            .difference(&co[e[i]])
            .copied()
            .collect();
        if dead_before != w.r_sets[i] || dead_after != w.r_sets[i] {
            failures.push(format!(
                "condition 4 fails at block {}: R before/after the loop is {dead_before:?}/{dead_after:?}, witness says {:?}",
                i + 1,
                w.r_sets[i]
            ));
        }
        // condition 3: every run returns to its entry state over y_i; the
        // pivot loop must contain a nondeterministic transition
        for run in &runs {
            let before = state_at(run, p[i]);
            let after = state_at(run, e[i]);
            if before != after {
                failures.push(format!(
                    "condition 3 fails at block {}: a run moves {} -> {} over y{}",
                    i + 1,
                    sub.states()[before],
                    sub.states()[after],
                    i + 1
                ));
            }
            if before == w.pivots[i] && !run.0[p[i]..e[i]].iter().any(|&ti| nondet(ti)) {
                failures.push(format!(
                    "condition 3 fails at block {}: the pivot loop over y{} is fully deterministic",
                    i + 1,
                    i + 1
                ));
            }
        }
    }
    // condition 2: every run sits on some pivot right after its y_i
    for (ri, run) in runs.iter().enumerate() {
        let covered = (0..ell).any(|i| state_at(run, e[i]) == w.pivots[i]);
        if !covered {
            failures.push(format!("condition 2 fails: run {ri} is on no pivot"));
        }
    }
    WitnessCheck {
        ok: failures.is_empty(),
        failures,
    }
}

// ---------------------------------------------------------------------------
// abstraction search

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct LoopData {
    entries: Vec<usize>,
    threads: Vec<usize>,
    pivot: usize,
    flag: bool,
    r0: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct AbsState {
    a_set: Vec<usize>,
    g_set: Vec<usize>,
    r_set: Vec<usize>,
    looping: Option<LoopData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Letter(usize),
    Enter(usize),
    Exit,
}

/// Options for the bad-word search.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Cap on the length of the guessed word; `None` means the search runs
    /// until the abstraction graph is exhausted.
    pub max_word_len: Option<usize>,
    /// Cap on visited abstraction states.
    pub node_budget: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_word_len: None,
            node_budget: 500_000,
        }
    }
}

/// Result of the abstraction search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub witness: Option<BadWordWitness>,
    /// Set when the search hit a cap before exhausting the graph; a `None`
    /// witness is then inconclusive.
    pub truncated: bool,
}

fn set_vec(s: &BTreeSet<usize>) -> Vec<usize> {
    s.iter().copied().collect()
}

/// Searches for a bad word for `s` by breadth-first exploration of the
/// branching/looping abstraction. The ambiguity classification of the host
/// must be supplied (and finite); every decoded candidate is re-verified
/// against the bad-word conditions before being returned.
pub fn fnfa_find_bad_word(
    a: &Nfa,
    s: &Support,
    ambiguity: &AmbiguityClass,
    opts: SearchOptions,
) -> Result<SearchOutcome, FnfaError> {
    if matches!(ambiguity, AmbiguityClass::Infinite) {
        return Err(FnfaError::InfiniteAmbiguity);
    }
    let sub = s.restrict(a);
    let alpha = sub.alphabet().len();
    let nondet_row = |q: usize, sym: usize| sub.row_is_nondet(q, sym);

    let start = AbsState {
        a_set: vec![sub.initial()],
        g_set: vec![sub.initial()],
        r_set: Vec::new(),
        looping: None,
    };
    let mut ids: HashMap<AbsState, usize> = HashMap::new();
    let mut parents: Vec<Option<(usize, Action)>> = Vec::new();
    let mut depth: Vec<usize> = Vec::new();
    let mut states: Vec<AbsState> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    ids.insert(start.clone(), 0);
    states.push(start);
    parents.push(None);
    depth.push(0);
    queue.push_back(0);
    let mut truncated = false;

    while let Some(si) = queue.pop_front() {
        let st = states[si].clone();
        let cur_depth = depth[si];
        // acceptance in branching mode
        if st.looping.is_none()
            && !st.a_set.is_empty()
            && st.g_set.is_empty()
            && st.a_set.iter().all(|&q| sub.is_accepting(q))
            && st.r_set.iter().all(|&q| !sub.is_accepting(q))
        {
            if let Some(w) = decode(&states, &parents, si) {
                let check = verify_bad_word(a, s, &w);
                if check.ok {
                    return Ok(SearchOutcome {
                        witness: Some(w),
                        truncated,
                    });
                }
            }
            continue;
        }
        let push = |states: &mut Vec<AbsState>,
                        parents: &mut Vec<Option<(usize, Action)>>,
                        depth: &mut Vec<usize>,
                        ids: &mut HashMap<AbsState, usize>,
                        queue: &mut VecDeque<usize>,
                        truncated: &mut bool,
                        next: AbsState,
                        act: Action,
                        d: usize| {
            if ids.contains_key(&next) {
                return;
            }
            if states.len() >= opts.node_budget {
                *truncated = true;
                return;
            }
            let id = states.len();
            ids.insert(next.clone(), id);
            states.push(next);
            parents.push(Some((si, act)));
            depth.push(d);
            queue.push_back(id);
        };

        match &st.looping {
            None => {
                // mode switch: enter a loop at any pivot from G
                for &pivot in &st.g_set {
                    let next = AbsState {
                        a_set: st.a_set.clone(),
                        g_set: st.g_set.clone(),
                        r_set: st.r_set.clone(),
                        looping: Some(LoopData {
                            entries: st.a_set.clone(),
                            threads: st.a_set.clone(),
                            pivot,
                            flag: false,
                            r0: st.r_set.clone(),
                        }),
                    };
                    push(
                        &mut states,
                        &mut parents,
                        &mut depth,
                        &mut ids,
                        &mut queue,
                        &mut truncated,
                        next,
                        Action::Enter(pivot),
                        cur_depth,
                    );
                }
                // letter steps
                if opts.max_word_len.is_some_and(|cap| cur_depth >= cap) {
                    truncated = true;
                    continue;
                }
                let a_bts: BTreeSet<usize> = st.a_set.iter().copied().collect();
                let r_bts: BTreeSet<usize> = st.r_set.iter().copied().collect();
                for sym in 0..alpha {
                    let succ_a = sub.step(&a_bts, sym);
                    let succ_r = sub.step(&r_bts, sym);
                    let reach: BTreeSet<usize> = succ_a.union(&succ_r).copied().collect();
                    // candidate live states: successors of A not forced dead
                    let pool: Vec<usize> = succ_a.difference(&succ_r).copied().collect();
                    if pool.is_empty() {
                        continue;
                    }
                    for mask in 1u32..(1 << pool.len()) {
                        let a_next: BTreeSet<usize> = pool
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| mask & (1 << i) != 0)
                            .map(|(_, &q)| q)
                            .collect();
                        // every live state keeps a live continuation
                        if !st.a_set.iter().all(|&q| {
                            sub.row(q, sym)
                                .iter()
                                .any(|&ti| a_next.contains(&sub.transition(ti).target))
                        }) {
                            continue;
                        }
                        let r_next: Vec<usize> =
                            reach.difference(&a_next).copied().collect();
                        // G' subsets of δ(G) ∩ A' with every G-state covered
                        let g_bts: BTreeSet<usize> = st.g_set.iter().copied().collect();
                        let g_pool: Vec<usize> = sub
                            .step(&g_bts, sym)
                            .intersection(&a_next)
                            .copied()
                            .collect();
                        let g_masks: Vec<u32> = if st.g_set.is_empty() {
                            vec![0]
                        } else {
                            (0u32..(1 << g_pool.len())).collect()
                        };
                        for gm in g_masks {
                            let g_next: Vec<usize> = g_pool
                                .iter()
                                .enumerate()
                                .filter(|(i, _)| gm & (1 << i) != 0)
                                .map(|(_, &q)| q)
                                .collect();
                            if !st.g_set.iter().all(|&q| {
                                sub.row(q, sym).iter().any(|&ti| {
                                    g_next.contains(&sub.transition(ti).target)
                                })
                            }) {
                                continue;
                            }
                            let next = AbsState {
                                a_set: set_vec(&a_next),
                                g_set: g_next,
                                r_set: r_next.clone(),
                                looping: None,
                            };
                            push(
                                &mut states,
                                &mut parents,
                                &mut depth,
                                &mut ids,
                                &mut queue,
                                &mut truncated,
                                next,
                                Action::Letter(sym),
                                cur_depth + 1,
                            );
                        }
                    }
                }
            }
            Some(ld) => {
                // mode switch back when the loop closed with a nondet step
                if ld.flag && ld.threads == ld.entries && ld.r0 == st.r_set {
                    let g_next: Vec<usize> = st
                        .g_set
                        .iter()
                        .copied()
                        .filter(|&q| q != ld.pivot)
                        .collect();
                    let next = AbsState {
                        a_set: st.a_set.clone(),
                        g_set: g_next,
                        r_set: st.r_set.clone(),
                        looping: None,
                    };
                    push(
                        &mut states,
                        &mut parents,
                        &mut depth,
                        &mut ids,
                        &mut queue,
                        &mut truncated,
                        next,
                        Action::Exit,
                        cur_depth,
                    );
                }
                if opts.max_word_len.is_some_and(|cap| cur_depth >= cap) {
                    truncated = true;
                    continue;
                }
                let r_bts: BTreeSet<usize> = st.r_set.iter().copied().collect();
                let pivot_idx = ld.entries.iter().position(|&q| q == ld.pivot).unwrap();
                for sym in 0..alpha {
                    let succ_r = sub.step(&r_bts, sym);
                    let choices: Vec<Vec<usize>> = ld
                        .threads
                        .iter()
                        .map(|&q| sub.row(q, sym).to_vec())
                        .collect();
                    if choices.iter().any(|c| c.is_empty()) {
                        continue;
                    }
                    let mut pick = vec![0usize; choices.len()];
                    'assign: loop {
                        let trans: Vec<usize> =
                            (0..choices.len()).map(|i| choices[i][pick[i]]).collect();
                        let targets: Vec<usize> =
                            trans.iter().map(|&ti| sub.transition(ti).target).collect();
                        let tset: BTreeSet<usize> = targets.iter().copied().collect();
                        // threads stay a bijection and never touch dead mass
                        if tset.len() == targets.len()
                            && succ_r.intersection(&tset).next().is_none()
                        {
                            let a_bts: BTreeSet<usize> = st.a_set.iter().copied().collect();
                            let reach: BTreeSet<usize> =
                                sub.step(&a_bts, sym).union(&succ_r).copied().collect();
                            let r_next: Vec<usize> =
                                reach.difference(&tset).copied().collect();
                            // G' = images of threads currently on G-states
                            let g_next: BTreeSet<usize> = ld
                                .threads
                                .iter()
                                .zip(&targets)
                                .filter(|(&cur, _)| st.g_set.contains(&cur))
                                .map(|(_, &t)| t)
                                .collect();
                            let flag = ld.flag || {
                                let t = sub.transition(trans[pivot_idx]);
                                nondet_row(t.source, t.symbol)
                            };
                            let next = AbsState {
                                a_set: set_vec(&tset),
                                g_set: set_vec(&g_next),
                                r_set: r_next,
                                looping: Some(LoopData {
                                    entries: ld.entries.clone(),
                                    threads: targets.clone(),
                                    pivot: ld.pivot,
                                    flag,
                                    r0: ld.r0.clone(),
                                }),
                            };
                            push(
                                &mut states,
                                &mut parents,
                                &mut depth,
                                &mut ids,
                                &mut queue,
                                &mut truncated,
                                next,
                                Action::Letter(sym),
                                cur_depth + 1,
                            );
                        }
                        let mut r = 0;
                        loop {
                            if r == choices.len() {
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
        }
    }
    Ok(SearchOutcome {
        witness: None,
        truncated,
    })
}

fn decode(
    states: &[AbsState],
    parents: &[Option<(usize, Action)>],
    accept: usize,
) -> Option<BadWordWitness> {
    let mut actions = Vec::new();
    let mut cur = accept;
    let mut trail = vec![accept];
    while let Some((p, act)) = parents[cur] {
        actions.push((act, cur));
        cur = p;
        trail.push(p);
    }
    actions.reverse();
    trail.reverse();

    let mut x_blocks: Vec<Word> = vec![Word(Vec::new())];
    let mut y_blocks: Vec<Word> = Vec::new();
    let mut q_sets = Vec::new();
    let mut pivots = Vec::new();
    let mut r_sets = Vec::new();
    let mut in_loop = false;
    for (act, target) in actions {
        match act {
            Action::Letter(sym) => {
                if in_loop {
                    y_blocks.last_mut().unwrap().0.push(sym);
                } else {
                    x_blocks.last_mut().unwrap().0.push(sym);
                }
            }
            Action::Enter(pivot) => {
                let ld = states[target].looping.as_ref().unwrap();
                q_sets.push(ld.entries.iter().copied().collect());
                r_sets.push(ld.r0.iter().copied().collect());
                pivots.push(pivot);
                y_blocks.push(Word(Vec::new()));
                in_loop = true;
            }
            Action::Exit => {
                x_blocks.push(Word(Vec::new()));
                in_loop = false;
            }
        }
    }
    if in_loop || y_blocks.is_empty() || y_blocks.iter().any(|y| y.is_empty()) {
        return None;
    }
    Some(BadWordWitness {
        x_blocks,
        y_blocks,
        q_sets,
        pivots,
        r_sets,
    })
}

// ---------------------------------------------------------------------------
// explicit run-automaton lasso oracle

/// Independent oracle: searches the explicit run automaton for an accepting
/// path along which every component position becomes diminishable at some
/// visited state. Returns such a word when the support is bad.
pub fn gamma_lasso_bad_word(
    a: &Nfa,
    s: &Support,
    ambiguity: &AmbiguityClass,
) -> Result<Option<Word>, FnfaError> {
    let k = match ambiguity.degree() {
        Some(k) => k,
        None => return Err(FnfaError::InfiniteAmbiguity),
    };
    let sub_class = classify_ambiguity(&s.restrict(a), k.max(DEFAULT_DEGREE_CAP))?;
    let k_sub = sub_class.degree().ok_or(FnfaError::InfiniteAmbiguity)?;
    let ra = build_run_automaton(a, s, k_sub, DEFAULT_STATE_BUDGET)?;
    let full: u64 = (1u64 << k_sub) - 1;
    let dim_mask = |state: usize| -> u64 {
        ra.diminishable_components(state)
            .iter()
            .fold(0u64, |m, &p| m | 1 << p)
    };
    let start = (ra.initial, dim_mask(ra.initial));
    let mut seen: HashMap<(usize, u64), ()> = HashMap::new();
    let mut queue: VecDeque<((usize, u64), Vec<usize>)> = VecDeque::new();
    seen.insert(start, ());
    queue.push_back((start, Vec::new()));
    while let Some(((g, d), word)) = queue.pop_front() {
        if ra.accepting[g] && d == full {
            return Ok(Some(Word(word)));
        }
        for &ei in &ra.out[g] {
            let e = &ra.edges[ei];
            let mut d_next = 0u64;
            for p in 0..k_sub {
                if d & (1 << p) != 0 {
                    d_next |= 1 << e.perm[p];
                }
            }
            d_next |= dim_mask(e.to);
            let key = (e.to, d_next);
            if !seen.contains_key(&key) {
                seen.insert(key, ());
                let mut w = word.clone();
                w.push(e.symbol);
                queue.push_back((key, w));
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// the decision procedure

/// Verdict for one support.
#[derive(Debug, Clone)]
pub struct SupportVerdict {
    pub support: Support,
    pub witness: Option<BadWordWitness>,
    pub truncated: bool,
}

/// Positive-resolvability report for a finitely-ambiguous automaton.
#[derive(Debug, Clone)]
pub struct FnfaPrReport {
    pub ambiguity: AmbiguityClass,
    pub resolvable: bool,
    pub verdicts: Vec<SupportVerdict>,
    /// A good support with a uniform resolver over it, when one exists; any
    /// resolver over a good support works.
    pub good: Option<(Support, Resolver)>,
}

/// Decides positive resolvability of a trim finitely-ambiguous automaton:
/// enumerate language-preserving supports, search each for a bad word, and
/// report the first good support with a uniform resolver. `jobs` > 1 runs
/// per-support searches on that many threads.
pub fn fnfa_check_pr(a: &Nfa, opts: SearchOptions, jobs: usize) -> Result<FnfaPrReport, FnfaError> {
    let ambiguity =
        classify_ambiguity(a, DEFAULT_DEGREE_CAP).map_err(FnfaError::Ambiguity)?;
    if matches!(ambiguity, AmbiguityClass::Infinite) {
        return Err(FnfaError::InfiniteAmbiguity);
    }
    let supports = enumerate_supports(a);
    let outcomes: Vec<SearchOutcome> = if jobs <= 1 || supports.len() <= 1 {
        supports
            .iter()
            .map(|s| fnfa_find_bad_word(a, s, &ambiguity, opts))
            .collect::<Result<_, _>>()?
    } else {
        let mut results: Vec<Option<Result<SearchOutcome, FnfaError>>> =
            (0..supports.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunks = results.chunks_mut(1).zip(supports.iter()).enumerate();
            let mut handles = Vec::new();
            for (i, (slot, support)) in chunks {
                if handles.len() >= jobs {
                    // simple throttle: join the oldest
                    let h: std::thread::ScopedJoinHandle<()> = handles.remove(0);
                    h.join().expect("search thread panicked");
                }
                let ambiguity = &ambiguity;
                let _ = i;
                handles.push(scope.spawn(move || {
                    slot[0] = Some(fnfa_find_bad_word(a, support, ambiguity, opts));
                }));
            }
        });
        results
            .into_iter()
            .map(|r| r.expect("thread filled the slot"))
            .collect::<Result<_, _>>()?
    };
    let verdicts: Vec<SupportVerdict> = supports
        .into_iter()
        .zip(outcomes)
        .map(|(support, o)| SupportVerdict {
            support,
            witness: o.witness,
            truncated: o.truncated,
        })
        .collect();
    let good = verdicts
        .iter()
        .find(|v| v.witness.is_none() && !v.truncated)
        .map(|v| {
            let r = Resolver::uniform(a, &v.support);
            (v.support.clone(), r)
        });
    Ok(FnfaPrReport {
        ambiguity,
        resolvable: good.is_some(),
        verdicts,
        good,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::parse_automaton;

    fn fixture(text: &str) -> Nfa {
        parse_automaton(text).unwrap().into_nfa()
    }

    fn fnfa4() -> Nfa {
        fixture(include_str!("../fixtures/fnfa4.nfa"))
    }

    fn paper_witness(a: &Nfa) -> BadWordWitness {
        parse_witness(
            a,
            "x0=ab y1=b x1=ab y2=b x2=ac; Q1={q1,q3} p1=q1 R1={qf} Q2={q4,q6} p2=q6 R2={qf}",
        )
        .unwrap()
    }

    #[test]
    fn paper_witness_verifies_on_both_named_supports() {
        let a = fnfa4();
        let w = paper_witness(&a);
        assert_eq!(a.format_word(&w.word()), "abbabbac");
        let full = Support::full(&a);
        let check = verify_bad_word(&a, &full, &w);
        assert!(check.ok, "{:?}", check.failures);
        // the support dropping the branch into q2
        let drop = a
            .transitions()
            .iter()
            .position(|t| a.states()[t.target] == "q2")
            .unwrap();
        let s2 = Support::new(
            &a,
            (0..a.transitions().len()).filter(|&i| i != drop).collect(),
        )
        .unwrap();
        let check2 = verify_bad_word(&a, &s2, &w);
        assert!(check2.ok, "{:?}", check2.failures);
    }

    #[test]
    fn wrong_y_block_fails_condition_3() {
        let a = fnfa4();
        let mut w = paper_witness(&a);
        w.y_blocks[0] = a.parse_word("a").unwrap();
        let check = verify_bad_word(&a, &Support::full(&a), &w);
        assert!(!check.ok);
        assert!(check
            .failures
            .iter()
            .any(|f| f.contains("condition 3") || f.contains("not accepted")));
    }

    #[test]
    fn degenerate_witness_without_loops_fails() {
        let a = fnfa4();
        let w = BadWordWitness {
            x_blocks: vec![a.parse_word("ab").unwrap()],
            y_blocks: vec![],
            q_sets: vec![],
            pivots: vec![],
            r_sets: vec![],
        };
        assert!(!verify_bad_word(&a, &Support::full(&a), &w).ok);
    }

    #[test]
    fn witness_text_round_trip() {
        let a = fnfa4();
        let w = paper_witness(&a);
        let text = w.to_text(&a);
        let back = parse_witness(&a, &text).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn fnfa4_full_support_has_a_verified_bad_word() {
        let a = fnfa4();
        let ambiguity = classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap();
        let out =
            fnfa_find_bad_word(&a, &Support::full(&a), &ambiguity, SearchOptions::default())
                .unwrap();
        let w = out.witness.expect("full support is bad");
        assert!(verify_bad_word(&a, &Support::full(&a), &w).ok);
        assert!(!out.truncated);
    }

    #[test]
    fn fig1a_and_dfa_have_no_bad_word() {
        for text in [
            include_str!("../fixtures/fig1a.nfa"),
            "nfa d\nalphabet a b\nstate x init accept\nstate y accept\ntrans x a y\ntrans y b x\ntrans y a y\nend",
        ] {
            let a = fixture(text);
            let ambiguity = classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap();
            let out =
                fnfa_find_bad_word(&a, &Support::full(&a), &ambiguity, SearchOptions::default())
                    .unwrap();
            assert!(out.witness.is_none());
            assert!(!out.truncated);
        }
    }

    #[test]
    fn fnfa4_not_resolvable_all_supports_bad() {
        let a = fnfa4();
        let report = fnfa_check_pr(&a, SearchOptions::default(), 1).unwrap();
        assert!(!report.resolvable);
        assert_eq!(report.verdicts.len(), 4);
        for v in &report.verdicts {
            let w = v.witness.as_ref().expect("every support is bad");
            assert!(verify_bad_word(&a, &v.support, w).ok);
        }
    }

    #[test]
    fn fig1b_not_resolvable_via_fnfa_path() {
        let a = fixture(include_str!("../fixtures/fig1b.nfa"));
        let report = fnfa_check_pr(&a, SearchOptions::default(), 1).unwrap();
        assert!(!report.resolvable);
    }

    #[test]
    fn infinite_ambiguity_is_an_error() {
        let a = fixture(include_str!("../fixtures/infamb.nfa"));
        assert!(matches!(
            fnfa_check_pr(&a, SearchOptions::default(), 1),
            Err(FnfaError::InfiniteAmbiguity)
        ));
    }

    #[test]
    fn lasso_oracle_agrees_on_fixtures() {
        for (text, expect_bad) in [
            (include_str!("../fixtures/fnfa4.nfa"), true),
            (include_str!("../fixtures/fig1a.nfa"), false),
            (include_str!("../fixtures/fig1b.nfa"), true),
            // pump2's f2-branch catches every pumped word, so its full
            // support is good even though naive pumping suggests otherwise
            (include_str!("../fixtures/pump2.nfa"), false),
        ] {
            let a = fixture(text);
            let ambiguity = classify_ambiguity(&a, DEFAULT_DEGREE_CAP).unwrap();
            let full = Support::full(&a);
            let lasso = gamma_lasso_bad_word(&a, &full, &ambiguity).unwrap();
            let search =
                fnfa_find_bad_word(&a, &full, &ambiguity, SearchOptions::default()).unwrap();
            assert_eq!(
                lasso.is_some(),
                search.witness.is_some(),
                "oracle disagreement on {}",
                a.name
            );
            assert_eq!(lasso.is_some(), expect_bad, "wrong verdict on {}", a.name);
        }
    }

    #[test]
    fn pumped_witness_preserves_run_count() {
        let a = fnfa4();
        let w = paper_witness(&a);
        let base = a.count_accepting_runs(&w.word());
        for j in 2..=4 {
            assert_eq!(a.count_accepting_runs(&w.pumped(j)), base);
        }
    }
}
