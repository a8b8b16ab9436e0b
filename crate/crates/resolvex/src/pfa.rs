//! Resolvers, probabilistic automata, exact and Monte Carlo evaluation of
//! acceptance probabilities, and the minimum-nondeterministic-step statistic
//! b(w).

use std::collections::BTreeMap;

use num::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::core::{format_rational, CoreError, Nfa, Rational, Word};
use crate::langops::Support;

/// A memoryless stochastic resolver: a weight in (0,1] per supported
/// transition of the host, summing to one on every nonempty (state, letter)
/// row. Transitions absent from the map have weight zero and form the
/// complement of the support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolver {
    weights: BTreeMap<usize, Rational>,
}

/// A probabilistic finite automaton: an NFA together with a total stochastic
/// weight assignment per resolver rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pfa {
    nfa: Nfa,
    resolver: Resolver,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PfaError {
    #[error("weight for transition {0} out of (0,1]")]
    WeightOutOfRange(usize),
    #[error("row ({state}, {symbol}) sums to {sum}, expected 1")]
    RowNotStochastic {
        state: String,
        symbol: String,
        sum: String,
    },
    #[error("resolver references unknown transition index {0}")]
    UnknownTransition(usize),
    #[error("resolver header names `{0}`, automaton is `{1}`")]
    NameMismatch(String, String),
    #[error(transparent)]
    Parse(#[from] CoreError),
}

impl Resolver {
    /// Validates weights against the host: positive weights in (0,1], every
    /// nonempty row covered and summing to exactly one.
    pub fn new(a: &Nfa, weights: BTreeMap<usize, Rational>) -> Result<Resolver, PfaError> {
        for (&ti, w) in &weights {
            if ti >= a.transitions().len() {
                return Err(PfaError::UnknownTransition(ti));
            }
            if *w <= Rational::zero() || *w > Rational::one() {
                return Err(PfaError::WeightOutOfRange(ti));
            }
        }
        for q in 0..a.num_states() {
            for s in 0..a.alphabet().len() {
                let row = a.row(q, s);
                if row.is_empty() {
                    continue;
                }
                let sum: Rational = row
                    .iter()
                    .filter_map(|ti| weights.get(ti))
                    .cloned()
                    .sum();
                if !sum.is_one() {
                    return Err(PfaError::RowNotStochastic {
                        state: a.states()[q].clone(),
                        symbol: a.alphabet()[s].clone(),
                        sum: format_rational(&sum),
                    });
                }
            }
        }
        Ok(Resolver { weights })
    }

    /// The uniform resolver over a support: every kept transition of a row
    /// gets equal weight.
    pub fn uniform(a: &Nfa, support: &Support) -> Resolver {
        let mut weights = BTreeMap::new();
        for q in 0..a.num_states() {
            for s in 0..a.alphabet().len() {
                let kept: Vec<usize> = a
                    .row(q, s)
                    .iter()
                    .copied()
                    .filter(|ti| support.contains(*ti))
                    .collect();
                let n = kept.len();
                for ti in kept {
                    weights.insert(ti, Rational::new(1.into(), (n as i64).into()));
                }
            }
        }
        Resolver { weights }
    }

    pub fn weight(&self, ti: usize) -> Rational {
        self.weights.get(&ti).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn weights(&self) -> &BTreeMap<usize, Rational> {
        &self.weights
    }

    /// The support of this resolver (positive-weight transitions).
    pub fn support(&self, a: &Nfa) -> Support {
        Support::new(a, self.weights.keys().copied().collect())
            .expect("validated resolver covers every row")
    }

    /// Serializes in the resolver text format.
    pub fn to_text(&self, a: &Nfa) -> String {
        let mut out = format!("resolver for {}\n", a.name);
        for (&ti, w) in &self.weights {
            let t = a.transition(ti);
            out.push_str(&format!(
                "resolve {} {} {} {}\n",
                a.states()[t.source],
                a.alphabet()[t.symbol],
                a.states()[t.target],
                format_rational(w)
            ));
        }
        out.push_str("end\n");
        out
    }

    /// Parses the resolver text format against its host automaton:
    /// `resolver for <name>` / `resolve <src> <sym> <dst> <p/q>` / `end`.
    pub fn parse(a: &Nfa, text: &str) -> Result<Resolver, PfaError> {
        let mut weights: BTreeMap<usize, Rational> = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            match toks[0] {
                "resolver" => {
                    if toks.len() != 3 || toks[1] != "for" {
                        return Err(CoreError::Syntax {
                            line,
                            msg: "expected `resolver for <name>`".into(),
                        }
                        .into());
                    }
                    if toks[2] != a.name {
                        return Err(PfaError::NameMismatch(toks[2].into(), a.name.clone()));
                    }
                }
                "resolve" => {
                    if toks.len() != 5 {
                        return Err(CoreError::Syntax {
                            line,
                            msg: "expected `resolve <src> <sym> <dst> <p/q>`".into(),
                        }
                        .into());
                    }
                    let src = a.state_index(toks[1]).ok_or(CoreError::UnknownState {
                        line,
                        name: toks[1].into(),
                    })?;
                    let sym = a.symbol_index(toks[2]).ok_or(CoreError::UnknownSymbol {
                        line,
                        name: toks[2].into(),
                    })?;
                    let dst = a.state_index(toks[3]).ok_or(CoreError::UnknownState {
                        line,
                        name: toks[3].into(),
                    })?;
                    let ti = a
                        .row(src, sym)
                        .iter()
                        .copied()
                        .find(|&i| a.transition(i).target == dst)
                        .ok_or(CoreError::Syntax {
                            line,
                            msg: "no such transition in the host automaton".into(),
                        })?;
                    weights.insert(ti, crate::core::parse_rational(toks[4])?);
                }
                "end" => break,
                other => {
                    return Err(CoreError::Syntax {
                        line,
                        msg: format!("unknown keyword `{other}`"),
                    }
                    .into())
                }
            }
        }
        Resolver::new(a, weights)
    }
}

impl Pfa {
    /// Turns an NFA and a resolver into a PFA.
    pub fn new(nfa: Nfa, resolver: Resolver) -> Pfa {
        Pfa { nfa, resolver }
    }

    /// Builds a PFA from a parsed `pfa` file (weights aligned with
    /// transitions).
    pub fn from_parsed(nfa: Nfa, weights: Vec<Rational>) -> Result<Pfa, PfaError> {
        let map: BTreeMap<usize, Rational> = weights.into_iter().enumerate().collect();
        let resolver = Resolver::new(&nfa, map)?;
        Ok(Pfa { nfa, resolver })
    }

    pub fn nfa(&self) -> &Nfa {
        &self.nfa
    }
    pub fn resolver(&self) -> &Resolver {
        &self.resolver
    }
    pub fn weight(&self, ti: usize) -> Rational {
        self.resolver.weight(ti)
    }

    /// All weights in {1/2, 1}.
    pub fn is_simple(&self) -> bool {
        let half = Rational::new(1.into(), 2.into());
        self.resolver
            .weights
            .values()
            .all(|w| w.is_one() || *w == half)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("pfa {}\n", self.nfa.name));
        out.push_str(&format!("alphabet {}\n", self.nfa.alphabet().join(" ")));
        for (i, s) in self.nfa.states().iter().enumerate() {
            let mut line = format!("state {s}");
            if i == self.nfa.initial() {
                line.push_str(" init");
            }
            if self.nfa.is_accepting(i) {
                line.push_str(" accept");
            }
            out.push_str(&line);
            out.push('\n');
        }
        for (i, t) in self.nfa.transitions().iter().enumerate() {
            let w = self.resolver.weight(i);
            if w.is_zero() {
                continue;
            }
            out.push_str(&format!(
                "trans {} {} {} {}\n",
                self.nfa.states()[t.source],
                self.nfa.alphabet()[t.symbol],
                self.nfa.states()[t.target],
                format_rational(&w)
            ));
        }
        out.push_str("end\n");
        out
    }
}

/// Exact acceptance probability of `w`: the sum over accepting runs of the
/// product of transition weights, computed by forward propagation of the
/// state distribution. Missing rows drop their mass into the implicit
/// rejecting sink.
pub fn eval_exact(p: &Pfa, w: &Word) -> Rational {
    let a = p.nfa();
    let mut dist: Vec<Rational> = vec![Rational::zero(); a.num_states()];
    dist[a.initial()] = Rational::one();
    for &s in &w.0 {
        let mut next = vec![Rational::zero(); a.num_states()];
        for q in 0..a.num_states() {
            if dist[q].is_zero() {
                continue;
            }
            for &ti in a.row(q, s) {
                let wgt = p.weight(ti);
                if wgt.is_zero() {
                    continue;
                }
                let t = a.transition(ti).target;
                next[t] += &dist[q] * wgt;
            }
        }
        dist = next;
    }
    a.accepting().iter().map(|&q| dist[q].clone()).sum()
}

/// The explicit run-sum Σ_π Π Θ(τ) over accepting runs; the independent
/// oracle for [`eval_exact`].
pub fn eval_by_run_sum(p: &Pfa, w: &Word) -> Rational {
    p.nfa()
        .accepting_runs(w)
        .iter()
        .map(|run| {
            run.0
                .iter()
                .map(|&ti| p.weight(ti))
                .fold(Rational::one(), |acc, x| acc * x)
        })
        .sum()
}

/// A Monte Carlo acceptance estimate with its half-width at 95% confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub half_width: f64,
    pub samples: u64,
}

/// Empirical acceptance frequency over seeded pseudo-random runs;
/// deterministic for a fixed seed.
pub fn eval_monte_carlo(p: &Pfa, w: &Word, samples: u64, seed: u64) -> MonteCarloEstimate {
    assert!(samples >= 1, "need at least one sample");
    let a = p.nfa();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // per-row cumulative weights as f64 thresholds
    let mut accepted = 0u64;
    'outer: for _ in 0..samples {
        let mut q = a.initial();
        for &s in &w.0 {
            let row = a.row(q, s);
            let mut x: f64 = rng.gen();
            let mut chosen = None;
            for &ti in row {
                let wt = p.weight(ti);
                if wt.is_zero() {
                    continue;
                }
                let wf = wt.to_f64().expect("weight fits in f64");
                if x < wf {
                    chosen = Some(a.transition(ti).target);
                    break;
                }
                x -= wf;
            }
            match chosen {
                Some(t) => q = t,
                // numeric leftovers fall to the last positive transition;
                // a truly missing row rejects via the implicit sink
                None => {
                    let last = row
                        .iter()
                        .rev()
                        .find(|&&ti| !p.weight(ti).is_zero())
                        .copied();
                    match last {
                        Some(ti) => q = a.transition(ti).target,
                        None => continue 'outer,
                    }
                }
            }
        }
        if a.is_accepting(q) {
            accepted += 1;
        }
    }
    let est = accepted as f64 / samples as f64;
    let half = 1.96 * (est * (1.0 - est) / samples as f64).sqrt();
    MonteCarloEstimate {
        estimate: est,
        half_width: half,
        samples,
    }
}

/// b(w): the minimum over accepting runs of `a_S` of the number of run
/// transitions that are nondeterministic in S; `None` when w ∉ L(a_S).
///
/// Computed by min-plus dynamic programming over word positions with weight
/// one on nondeterministic transitions, restricted to co-accepting states.
pub fn min_nondet_count(a: &Nfa, support: &Support, w: &Word) -> Option<usize> {
    let sub = support.restrict(a);
    let nondet = sub_nondet_by_sub_index(&sub);
    let co = sub.co_accepting_profile(w);
    const INF: usize = usize::MAX;
    let mut cost = vec![INF; sub.num_states()];
    if !co[0].contains(&sub.initial()) {
        return None;
    }
    cost[sub.initial()] = 0;
    for (i, &s) in w.0.iter().enumerate() {
        let mut next = vec![INF; sub.num_states()];
        for q in 0..sub.num_states() {
            if cost[q] == INF {
                continue;
            }
            for &ti in sub.row(q, s) {
                let t = sub.transition(ti).target;
                if !co[i + 1].contains(&t) {
                    continue;
                }
                let step = cost[q] + usize::from(nondet[ti]);
                if step < next[t] {
                    next[t] = step;
                }
            }
        }
        cost = next;
    }
    sub.accepting()
        .iter()
        .map(|&q| cost[q])
        .min()
        .filter(|&c| c != INF)
}

/// Run-enumeration oracle for [`min_nondet_count`].
pub fn min_nondet_count_by_runs(a: &Nfa, support: &Support, w: &Word) -> Option<usize> {
    let sub = support.restrict(a);
    let nondet = sub_nondet_by_sub_index(&sub);
    sub.accepting_runs(w)
        .iter()
        .map(|run| run.0.iter().filter(|&&ti| nondet[ti]).count())
        .min()
}

fn sub_nondet_by_sub_index(sub: &Nfa) -> Vec<bool> {
    (0..sub.transitions().len())
        .map(|ti| {
            let t = sub.transition(ti);
            sub.row_is_nondet(t.source, t.symbol)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{parse_automaton, rat};

    fn fixture(text: &str) -> Nfa {
        parse_automaton(text).unwrap().into_nfa()
    }

    fn fig1a_uniform() -> Pfa {
        let a = fixture(include_str!("../fixtures/fig1a.nfa"));
        let r = Resolver::uniform(&a, &Support::full(&a));
        Pfa::new(a, r)
    }

    #[test]
    fn fig1a_uniform_ab_is_half() {
        let p = fig1a_uniform();
        let w = p.nfa().parse_word("ab").unwrap();
        assert_eq!(eval_exact(&p, &w), rat(1, 2));
        assert_eq!(eval_by_run_sum(&p, &w), rat(1, 2));
    }

    #[test]
    fn rejected_word_has_probability_zero() {
        let p = fig1a_uniform();
        let w = p.nfa().parse_word("aa").unwrap();
        assert_eq!(eval_exact(&p, &w), rat(0, 1));
    }

    #[test]
    fn fig1b_weighted_bbbb() {
        let a = fixture(include_str!("../fixtures/fig1b.nfa"));
        let mut weights = BTreeMap::new();
        for (i, t) in a.transitions().iter().enumerate() {
            let w = if a.alphabet()[t.symbol] == "a" {
                rat(1, 1)
            } else {
                rat(1, 2)
            };
            weights.insert(i, w);
        }
        let p = Pfa::new(a, Resolver::new(&fixture(include_str!("../fixtures/fig1b.nfa")), weights).unwrap());
        let w = p.nfa().parse_word("bbbb").unwrap();
        let exact = eval_exact(&p, &w);
        assert_eq!(exact, rat(1, 16));
        assert_eq!(eval_by_run_sum(&p, &w), rat(1, 16));
    }

    #[test]
    fn monte_carlo_brackets_exact() {
        let p = fig1a_uniform();
        let w = p.nfa().parse_word("ab").unwrap();
        let mc = eval_monte_carlo(&p, &w, 100_000, 7);
        assert!((mc.estimate - 0.5).abs() < 0.01);
        assert!((mc.estimate - 0.5).abs() <= 5.0 * mc.half_width);
        // determinism for a fixed seed
        let mc2 = eval_monte_carlo(&p, &w, 100_000, 7);
        assert_eq!(mc.estimate, mc2.estimate);
    }

    #[test]
    fn monte_carlo_deterministic_pfa_is_exact_one() {
        let a = fixture("nfa d\nalphabet a\nstate x init\nstate y accept\ntrans x a y\nend");
        let p = Pfa::new(a.clone(), Resolver::uniform(&a, &Support::full(&a)));
        let w = a.parse_word("a").unwrap();
        let mc = eval_monte_carlo(&p, &w, 1000, 1);
        assert_eq!(mc.estimate, 1.0);
    }

    #[test]
    fn pump2_min_nondet_counts() {
        let a = fixture(include_str!("../fixtures/pump2.nfa"));
        let full = Support::full(&a);
        let abb = a.parse_word("abb").unwrap();
        let abbbb = a.parse_word("abbbb").unwrap();
        assert_eq!(min_nondet_count(&a, &full, &abb), Some(3));
        assert_eq!(min_nondet_count(&a, &full, &abbbb), Some(1));
        assert_eq!(min_nondet_count_by_runs(&a, &full, &abb), Some(3));
        assert_eq!(min_nondet_count_by_runs(&a, &full, &abbbb), Some(1));
    }

    #[test]
    fn dfa_b_is_zero_and_rejected_is_none() {
        let a = fixture("nfa d\nalphabet a\nstate x init accept\ntrans x a x\nend");
        let full = Support::full(&a);
        assert_eq!(min_nondet_count(&a, &full, &a.parse_word("aaa").unwrap()), Some(0));
        let b = fixture(include_str!("../fixtures/fig1a.nfa"));
        assert_eq!(
            min_nondet_count(&b, &Support::full(&b), &b.parse_word("aa").unwrap()),
            None
        );
    }

    #[test]
    fn resolver_round_trip_through_text() {
        let a = fixture(include_str!("../fixtures/fig1a.nfa"));
        let r = Resolver::uniform(&a, &Support::full(&a));
        let text = r.to_text(&a);
        let back = Resolver::parse(&a, &text).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn resolver_rejects_bad_rows() {
        let a = fixture(include_str!("../fixtures/fig1a.nfa"));
        let mut w = BTreeMap::new();
        w.insert(0usize, rat(1, 2));
        // row (q0, a) sums to 1/2 only
        for (i, t) in a.transitions().iter().enumerate().skip(1) {
            if a.row(t.source, t.symbol).len() == 1 {
                w.insert(i, rat(1, 1));
            }
        }
        assert!(matches!(
            Resolver::new(&a, w),
            Err(PfaError::RowNotStochastic { .. })
        ));
    }
}
