use std::collections::BTreeSet;
use std::fmt;

use super::CoreError;

/// A transition `source --symbol--> target`, all by dense index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub source: usize,
    pub symbol: usize,
    pub target: usize,
}

/// A word as a sequence of symbol indices of the host alphabet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A run as a sequence of transition indices; consecutive transitions chain
/// and the labels spell the word the run is claimed for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Run(pub Vec<usize>);

/// A nondeterministic finite automaton over a named alphabet and state set.
///
/// State and symbol identity is by declared name; all processing uses the
/// dense indices. Missing (state, letter) rows are treated as an implicit
/// rejecting sink which is never materialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nfa {
    pub name: String,
    alphabet: Vec<String>,
    states: Vec<String>,
    initial: usize,
    accepting: BTreeSet<usize>,
    transitions: Vec<Transition>,
    // row index: state * |alphabet| + symbol -> transition indices
    rows: Vec<Vec<usize>>,
}

impl Nfa {
    pub fn new(
        name: impl Into<String>,
        alphabet: Vec<String>,
        states: Vec<String>,
        initial: usize,
        accepting: BTreeSet<usize>,
        transitions: Vec<Transition>,
    ) -> Result<Self, CoreError> {
        let mut seen = BTreeSet::new();
        for s in &alphabet {
            if !seen.insert(s.clone()) {
                return Err(CoreError::Invalid(format!("duplicate symbol `{s}`")));
            }
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if !seen.insert(s.clone()) {
                return Err(CoreError::Invalid(format!("duplicate state `{s}`")));
            }
        }
        if initial >= states.len() {
            return Err(CoreError::Invalid("initial state out of range".into()));
        }
        if accepting.iter().any(|&q| q >= states.len()) {
            return Err(CoreError::Invalid("accepting state out of range".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &transitions {
            if t.source >= states.len() || t.target >= states.len() {
                return Err(CoreError::Invalid("transition state out of range".into()));
            }
            if t.symbol >= alphabet.len() {
                return Err(CoreError::Invalid("transition symbol out of range".into()));
            }
            if !seen.insert(*t) {
                return Err(CoreError::Invalid("duplicate transition".into()));
            }
        }
        let mut rows = vec![Vec::new(); states.len() * alphabet.len()];
        for (i, t) in transitions.iter().enumerate() {
            rows[t.source * alphabet.len() + t.symbol].push(i);
        }
        Ok(Nfa {
            name: name.into(),
            alphabet,
            states,
            initial,
            accepting,
            transitions,
            rows,
        })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }
    pub fn states(&self) -> &[String] {
        &self.states
    }
    pub fn num_states(&self) -> usize {
        self.states.len()
    }
    pub fn initial(&self) -> usize {
        self.initial
    }
    pub fn accepting(&self) -> &BTreeSet<usize> {
        &self.accepting
    }
    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting.contains(&q)
    }
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }
    pub fn transition(&self, i: usize) -> Transition {
        self.transitions[i]
    }

    pub fn symbol_index(&self, sym: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == sym)
    }
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// Transition indices of the (state, symbol) row.
    pub fn row(&self, state: usize, symbol: usize) -> &[usize] {
        &self.rows[state * self.alphabet.len() + symbol]
    }

    /// True when the row holds at least two transitions, i.e. the choice on
    /// this (state, letter) pair is nondeterministic.
    pub fn row_is_nondet(&self, state: usize, symbol: usize) -> bool {
        self.row(state, symbol).len() >= 2
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.len() <= 1)
    }

    pub fn is_unary(&self) -> bool {
        self.alphabet.len() == 1
    }

    /// Successor states of `set` on `symbol`, as a sorted set.
    pub fn step(&self, set: &BTreeSet<usize>, symbol: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &q in set {
            for &ti in self.row(q, symbol) {
                out.insert(self.transitions[ti].target);
            }
        }
        out
    }

    /// States reachable from `set` on the word `w`.
    pub fn delta(&self, set: &BTreeSet<usize>, w: &Word) -> BTreeSet<usize> {
        let mut cur = set.clone();
        for &a in &w.0 {
            cur = self.step(&cur, a);
        }
        cur
    }

    pub fn accepts(&self, w: &Word) -> bool {
        let init: BTreeSet<usize> = [self.initial].into();
        self.delta(&init, w)
            .iter()
            .any(|q| self.accepting.contains(q))
    }

    /// States reachable from the initial state.
    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = [self.initial].into();
        let mut stack = vec![self.initial];
        while let Some(q) = stack.pop() {
            for a in 0..self.alphabet.len() {
                for &ti in self.row(q, a) {
                    let t = self.transitions[ti].target;
                    if seen.insert(t) {
                        stack.push(t);
                    }
                }
            }
        }
        seen
    }

    /// States that can reach an accepting state.
    pub fn productive(&self) -> BTreeSet<usize> {
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); self.states.len()];
        for t in &self.transitions {
            pred[t.target].push(t.source);
        }
        let mut seen: BTreeSet<usize> = self.accepting.clone();
        let mut stack: Vec<usize> = self.accepting.iter().copied().collect();
        while let Some(q) = stack.pop() {
            for &p in &pred[q] {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Per-position sets of states co-accepting for each suffix of `w`:
    /// entry `i` holds the states from which `w[i..]` can reach acceptance.
    pub fn co_accepting_profile(&self, w: &Word) -> Vec<BTreeSet<usize>> {
        let mut out = vec![BTreeSet::new(); w.len() + 1];
        out[w.len()] = self.accepting.clone();
        for i in (0..w.len()).rev() {
            let a = w.0[i];
            let next = out[i + 1].clone();
            let mut cur = BTreeSet::new();
            for q in 0..self.states.len() {
                if self
                    .row(q, a)
                    .iter()
                    .any(|&ti| next.contains(&self.transitions[ti].target))
                {
                    cur.insert(q);
                }
            }
            out[i] = cur;
        }
        out
    }

    /// Keeps exactly the states that are reachable and productive. The
    /// language is preserved; when it is empty the result is a single dead
    /// initial state.
    pub fn trim(&self) -> Nfa {
        let reach = self.reachable();
        let prod = self.productive();
        let keep: Vec<usize> = (0..self.states.len())
            .filter(|q| reach.contains(q) && prod.contains(q))
            .collect();
        if !keep.contains(&self.initial) {
            // empty language: only the initial state survives, no transitions
            return Nfa::new(
                self.name.clone(),
                self.alphabet.clone(),
                vec![self.states[self.initial].clone()],
                0,
                BTreeSet::new(),
                Vec::new(),
            )
            .expect("single-state automaton is valid");
        }
        let mut remap = vec![usize::MAX; self.states.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let states: Vec<String> = keep.iter().map(|&q| self.states[q].clone()).collect();
        let accepting: BTreeSet<usize> = self
            .accepting
            .iter()
            .filter(|q| remap[**q] != usize::MAX)
            .map(|&q| remap[q])
            .collect();
        let transitions: Vec<Transition> = self
            .transitions
            .iter()
            .filter(|t| remap[t.source] != usize::MAX && remap[t.target] != usize::MAX)
            .map(|t| Transition {
                source: remap[t.source],
                symbol: t.symbol,
                target: remap[t.target],
            })
            .collect();
        Nfa::new(
            self.name.clone(),
            self.alphabet.clone(),
            states,
            remap[self.initial],
            accepting,
            transitions,
        )
        .expect("trimmed automaton is valid")
    }

    pub fn is_trim(&self) -> bool {
        let reach = self.reachable();
        let prod = self.productive();
        (0..self.states.len()).all(|q| reach.contains(&q) && prod.contains(&q))
    }

    /// All accepting runs of `w`, in lexicographic order of their transition
    /// index sequences. Dead branches are pruned with the co-accepting
    /// profile, so enumeration is proportional to the surviving runs.
    pub fn accepting_runs(&self, w: &Word) -> Vec<Run> {
        let co = self.co_accepting_profile(w);
        if !co[0].contains(&self.initial) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut prefix = Vec::with_capacity(w.len());
        self.runs_rec(self.initial, w, 0, &co, &mut prefix, &mut out);
        out
    }

    fn runs_rec(
        &self,
        q: usize,
        w: &Word,
        i: usize,
        co: &[BTreeSet<usize>],
        prefix: &mut Vec<usize>,
        out: &mut Vec<Run>,
    ) {
        if i == w.len() {
            if self.accepting.contains(&q) {
                out.push(Run(prefix.clone()));
            }
            return;
        }
        for &ti in self.row(q, w.0[i]) {
            let t = self.transitions[ti].target;
            if co[i + 1].contains(&t) {
                prefix.push(ti);
                self.runs_rec(t, w, i + 1, co, prefix, out);
                prefix.pop();
            }
        }
    }

    /// Number of accepting runs of `w` by forward dynamic programming; equals
    /// `accepting_runs(w).len()` and serves as its independent cross-check.
    pub fn count_accepting_runs(&self, w: &Word) -> u128 {
        let mut counts = vec![0u128; self.states.len()];
        counts[self.initial] = 1;
        for &a in &w.0 {
            let mut next = vec![0u128; self.states.len()];
            for q in 0..self.states.len() {
                if counts[q] == 0 {
                    continue;
                }
                for &ti in self.row(q, a) {
                    next[self.transitions[ti].target] += counts[q];
                }
            }
            counts = next;
        }
        self.accepting.iter().map(|&q| counts[q]).sum()
    }

    /// Checks the run-chaining invariant and that `run` spells `w`.
    pub fn run_is_valid(&self, run: &Run, w: &Word) -> bool {
        if run.0.len() != w.len() {
            return false;
        }
        let mut cur = self.initial;
        for (i, &ti) in run.0.iter().enumerate() {
            let t = match self.transitions.get(ti) {
                Some(t) => *t,
                None => return false,
            };
            if t.source != cur || t.symbol != w.0[i] {
                return false;
            }
            cur = t.target;
        }
        self.accepting.contains(&cur)
    }

    /// Renders a word over this automaton's alphabet. Single-character
    /// alphabets concatenate; otherwise symbols are joined with dots.
    pub fn format_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "ε".to_string();
        }
        if self.alphabet.iter().all(|s| s.chars().count() == 1) {
            w.0.iter().map(|&a| self.alphabet[a].clone()).collect()
        } else {
            w.0.iter()
                .map(|&a| self.alphabet[a].clone())
                .collect::<Vec<_>>()
                .join(".")
        }
    }

    /// Parses a word in the syntax produced by [`Nfa::format_word`]: either
    /// dot/whitespace separated symbols, or one character per symbol when the
    /// alphabet is single-character. `ε` or the empty string is the empty word.
    pub fn parse_word(&self, s: &str) -> Result<Word, CoreError> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "eps" {
            return Ok(Word(Vec::new()));
        }
        let tokens: Vec<&str> = s
            .split(|c: char| c.is_whitespace() || c == '.')
            .filter(|t| !t.is_empty())
            .collect();
        let lookup = |tok: &str| {
            self.symbol_index(tok)
                .ok_or_else(|| CoreError::UnknownSymbol {
                    line: 0,
                    name: tok.to_string(),
                })
        };
        if tokens.len() > 1 || self.symbol_index(tokens[0]).is_some() {
            return Ok(Word(tokens
                .iter()
                .map(|t| lookup(t))
                .collect::<Result<_, _>>()?));
        }
        // compact form: one character per symbol
        s.chars()
            .map(|c| lookup(&c.to_string()))
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }

    /// Serializes in the line-oriented text format; parsing the result yields
    /// the same automaton up to index renaming.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("nfa {}\n", self.name));
        out.push_str(&format!("alphabet {}\n", self.alphabet.join(" ")));
        for (i, s) in self.states.iter().enumerate() {
            let mut line = format!("state {s}");
            if i == self.initial {
                line.push_str(" init");
            }
            if self.accepting.contains(&i) {
                line.push_str(" accept");
            }
            out.push_str(&line);
            out.push('\n');
        }
        for t in &self.transitions {
            out.push_str(&format!(
                "trans {} {} {}\n",
                self.states[t.source], self.alphabet[t.symbol], self.states[t.target]
            ));
        }
        out.push_str("end\n");
        out
    }
}

impl fmt::Display for Nfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}
