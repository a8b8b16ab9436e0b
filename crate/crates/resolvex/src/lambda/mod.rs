//! λ-resolvability for finitely-ambiguous automata: primitive-word
//! enumeration, Bad(w) sets, constraint systems over the resolver simplices,
//! exact linear solving, numerical max–min search with exact rational
//! re-verification, and export of the constraints in a native line format
//! and SMT-LIB2.

mod simplex;

pub use simplex::{solve as lp_solve, LpOutcome, LpProblem, Relation};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ambiguity::{classify_ambiguity, AmbiguityClass, DEFAULT_DEGREE_CAP};
use crate::core::{format_rational, Nfa, Rational, Word};
use crate::fnfa::{fnfa_check_pr, FnfaError, SearchOptions};
use crate::langops::Support;
use crate::pfa::Resolver;
use crate::runaut::{build_run_automaton, nice_run, NiceRun, RunautError, DEFAULT_STATE_BUDGET};
use crate::ufa::{ufa_check_pr, ufa_synthesize, UfaError, UfaPrVerdict};

/// A polynomial over resolver variables: a sum of monomials, each a multiset
/// of nondeterministic transition indices (empty multiset = the constant 1).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Polynomial {
    pub terms: BTreeMap<Vec<usize>, u64>,
}

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial {
            terms: BTreeMap::new(),
        }
    }

    pub fn add_monomial(&mut self, mut factors: Vec<usize>) {
        factors.sort_unstable();
        *self.terms.entry(factors).or_insert(0) += 1;
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Degree of the largest monomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|f| f.len()).max().unwrap_or(0)
    }

    pub fn eval_exact(&self, point: &BTreeMap<usize, Rational>) -> Rational {
        let mut total = Rational::zero();
        for (factors, &coeff) in &self.terms {
            let mut m = Rational::from(BigInt::from(coeff));
            for f in factors {
                m *= point.get(f).cloned().unwrap_or_else(Rational::zero);
            }
            total += m;
        }
        total
    }

    pub fn eval_f64(&self, point: &HashMap<usize, f64>) -> f64 {
        self.terms
            .iter()
            .map(|(factors, &coeff)| {
                factors
                    .iter()
                    .map(|f| point.get(f).copied().unwrap_or(0.0))
                    .product::<f64>()
                    * coeff as f64
            })
            .sum()
    }

    /// Partial derivative with respect to variable `v`, evaluated at `point`.
    pub fn d_dv(&self, v: usize, point: &HashMap<usize, f64>) -> f64 {
        let mut total = 0.0;
        for (factors, &coeff) in &self.terms {
            let cnt = factors.iter().filter(|&&f| f == v).count();
            if cnt == 0 {
                continue;
            }
            let rest: f64 = factors
                .iter()
                .filter(|&&f| f != v)
                .map(|f| point.get(f).copied().unwrap_or(0.0))
                .product();
            let xv = point.get(&v).copied().unwrap_or(0.0);
            total += coeff as f64 * cnt as f64 * xv.powi(cnt as i32 - 1) * rest;
        }
        total
    }
}

/// A primitive word profile: the canonical nice run is acyclic. One entry
/// per distinct constraint polynomial; `words` lists every primitive word
/// sharing it, shortest first.
#[derive(Debug, Clone)]
pub struct PrimitiveWord {
    pub words: Vec<Word>,
    pub nice: NiceRun,
    /// Padded component indices whose runs diminish under pumping.
    pub bad_set: BTreeSet<usize>,
    /// z_w: the total probability of the non-diminishing runs.
    pub poly: Polynomial,
}

impl PrimitiveWord {
    /// The representative (shortest) word of the profile.
    pub fn word(&self) -> &Word {
        &self.words[0]
    }
}

/// One word constraint z_w >= λ of a constraint system; `words` lists every
/// primitive word sharing the polynomial profile.
#[derive(Debug, Clone)]
pub struct WordConstraint {
    pub words: Vec<Word>,
    pub poly: Polynomial,
}

/// The per-support system: variables (nondeterministic transitions of the
/// support), per-(state,letter) simplex rows, and one polynomial constraint
/// per deduplicated primitive word.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub support: Support,
    /// Nondeterministic transition indices, ascending; the variable order.
    pub variables: Vec<usize>,
    /// Per nondeterministic (state, letter) row, the member variables.
    pub simplex_rows: Vec<Vec<usize>>,
    pub word_constraints: Vec<WordConstraint>,
    /// Fixed threshold, or `None` when λ is symbolic.
    pub lambda: Option<Rational>,
}

impl ConstraintSystem {
    /// True when every z_w is affine in the variables (degree <= 1); such
    /// systems are decided exactly by the rational simplex solver.
    pub fn is_linear(&self) -> bool {
        self.word_constraints.iter().all(|w| w.poly.degree() <= 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LambdaError {
    #[error(transparent)]
    Fnfa(#[from] FnfaError),
    #[error(transparent)]
    Runaut(#[from] RunautError),
    #[error(transparent)]
    Ufa(#[from] UfaError),
    #[error("primitive-word enumeration truncated; raise the length cap")]
    CapTooSmall,
    #[error("threshold must satisfy 0 < λ")]
    InvalidLambda,
    #[error("automaton is not finitely ambiguous")]
    InfiniteAmbiguity,
}

/// Enumerates the primitive words of the supported automaton up to
/// `length_cap` (default: the reachable Γ-state count), deduplicated by
/// constraint-polynomial profile. The boolean is a truncation warning.
pub fn enumerate_primitive_words(
    a: &Nfa,
    s: &Support,
    length_cap: Option<usize>,
) -> Result<(Vec<PrimitiveWord>, bool), LambdaError> {
    let sub = s.restrict(a);
    let class = classify_ambiguity(&sub, DEFAULT_DEGREE_CAP)
        .map_err(|e| LambdaError::Fnfa(FnfaError::Ambiguity(e)))?;
    let k = class.degree().ok_or(LambdaError::InfiniteAmbiguity)?;
    let ra = build_run_automaton(a, s, k, DEFAULT_STATE_BUDGET)?;
    let cap = length_cap.unwrap_or(ra.num_states());
    let mut truncated = false;

    // all words spelled by acyclic accepting Γ-paths
    let mut on_path = vec![false; ra.num_states()];
    let mut word: Vec<usize> = Vec::new();
    struct Dfs<'a> {
        ra: &'a crate::runaut::RunAutomaton,
        cap: usize,
        truncated: bool,
        words: BTreeSet<Vec<usize>>,
    }
    impl<'a> Dfs<'a> {
        fn go(&mut self, g: usize, on_path: &mut Vec<bool>, word: &mut Vec<usize>) {
            if self.ra.accepting[g] {
                self.words.insert(word.clone());
            }
            if word.len() >= self.cap {
                if self
                    .ra
                    .out[g]
                    .iter()
                    .any(|&e| !on_path[self.ra.edges[e].to])
                {
                    self.truncated = true;
                }
                return;
            }
            on_path[g] = true;
            for &ei in &self.ra.out[g] {
                let e = &self.ra.edges[ei];
                if on_path[e.to] {
                    continue;
                }
                word.push(e.symbol);
                self.go(e.to, on_path, word);
                word.pop();
            }
            on_path[g] = false;
        }
    }
    let mut dfs = Dfs {
        ra: &ra,
        cap,
        truncated: false,
        words: BTreeSet::new(),
    };
    dfs.go(ra.initial, &mut on_path, &mut word);
    let words = dfs.words;
    truncated |= dfs.truncated;

    // keep words whose canonical nice run is acyclic, build profiles
    let mut by_len: Vec<Vec<usize>> = words.into_iter().collect();
    by_len.sort_by(|x, y| x.len().cmp(&y.len()).then(x.cmp(y)));
    let mut primitives: Vec<PrimitiveWord> = Vec::new();
    let mut seen_profiles: BTreeSet<Polynomial> = BTreeSet::new();
    let gamma_index: HashMap<&crate::runaut::GammaState, usize> =
        ra.states.iter().enumerate().map(|(i, g)| (g, i)).collect();
    for wv in by_len {
        let w = Word(wv);
        let nr = match nice_run(a, s, k, &w) {
            Some(nr) => nr,
            None => continue,
        };
        let mut seen_states = BTreeSet::new();
        if !nr.states.iter().all(|g| seen_states.insert(g.clone())) {
            continue; // canonical nice run has a cycle
        }
        let pw = profile_of(&ra, &gamma_index, &nr, w);
        if seen_profiles.insert(pw.poly.clone()) {
            primitives.push(pw);
        } else if let Some(existing) = primitives.iter_mut().find(|p| p.poly == pw.poly) {
            existing.words.extend(pw.words);
        }
    }
    Ok((primitives, truncated))
}

fn profile_of(
    ra: &crate::runaut::RunAutomaton,
    gamma_index: &HashMap<&crate::runaut::GammaState, usize>,
    nr: &NiceRun,
    w: Word,
) -> PrimitiveWord {
    let k = ra.k;
    let sub = &ra.sub;
    let mut bad_set: BTreeSet<usize> = BTreeSet::new();
    for j in 0..k {
        'steps: for (i, g) in nr.states.iter().enumerate() {
            let gi = *gamma_index.get(g).expect("nice run stays within Γ");
            if ra
                .diminishable_components(gi)
                .contains(&nr.positions[i][j])
            {
                bad_set.insert(j);
                break 'steps;
            }
        }
    }
    // z_w over the distinct runs only (padding duplicates the least run)
    let first_distinct = k - nr.distinct_runs;
    let mut poly = Polynomial::zero();
    for j in first_distinct..k {
        if bad_set.contains(&j) {
            continue;
        }
        let factors: Vec<usize> = nr.runs[j]
            .0
            .iter()
            .copied()
            .filter(|&ti| {
                let t = sub.transition(ti);
                sub.row_is_nondet(t.source, t.symbol)
            })
            .collect();
        poly.add_monomial(factors);
    }
    PrimitiveWord {
        words: vec![w],
        nice: nr.clone(),
        bad_set,
        poly,
    }
}

/// The diminishing component indices of an accepted word: component j is
/// included when some state of the canonical nice run admits a Γ-cycle with
/// a nondeterministic j-component step.
pub fn compute_bad_set(
    a: &Nfa,
    s: &Support,
    w: &Word,
) -> Result<Option<BTreeSet<usize>>, LambdaError> {
    let sub = s.restrict(a);
    let class = classify_ambiguity(&sub, DEFAULT_DEGREE_CAP)
        .map_err(|e| LambdaError::Fnfa(FnfaError::Ambiguity(e)))?;
    let k = class.degree().ok_or(LambdaError::InfiniteAmbiguity)?;
    let ra = build_run_automaton(a, s, k, DEFAULT_STATE_BUDGET)?;
    let gamma_index: HashMap<&crate::runaut::GammaState, usize> =
        ra.states.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let nr = match nice_run(a, s, k, w) {
        Some(nr) => nr,
        None => return Ok(None),
    };
    let pw = profile_of(&ra, &gamma_index, &nr, w.clone());
    Ok(Some(pw.bad_set))
}

/// Builds the constraint system of a supported automaton: simplex rows over
/// the nondeterministic transitions plus one z_w >= λ constraint per
/// deduplicated primitive word. Truncated enumerations are an error.
pub fn build_constraints(
    a: &Nfa,
    s: &Support,
    lambda: Option<Rational>,
) -> Result<ConstraintSystem, LambdaError> {
    let (primitives, truncated) = enumerate_primitive_words(a, s, None)?;
    if truncated {
        return Err(LambdaError::CapTooSmall);
    }
    Ok(assemble_system(a, s, lambda, &primitives))
}

fn assemble_system(
    a: &Nfa,
    s: &Support,
    lambda: Option<Rational>,
    primitives: &[PrimitiveWord],
) -> ConstraintSystem {
    let mut simplex_rows = Vec::new();
    let mut variables = BTreeSet::new();
    for q in 0..a.num_states() {
        for sym in 0..a.alphabet().len() {
            let kept: Vec<usize> = a
                .row(q, sym)
                .iter()
                .copied()
                .filter(|&ti| s.contains(ti))
                .collect();
            if kept.len() >= 2 {
                variables.extend(kept.iter().copied());
                simplex_rows.push(kept);
            }
        }
    }
    let mut word_constraints: Vec<WordConstraint> = Vec::new();
    for p in primitives {
        match word_constraints.iter_mut().find(|w| w.poly == p.poly) {
            Some(wc) => wc.words.extend(p.words.iter().cloned()),
            None => word_constraints.push(WordConstraint {
                words: p.words.clone(),
                poly: p.poly.clone(),
            }),
        }
    }
    ConstraintSystem {
        support: s.clone(),
        variables: variables.into_iter().collect(),
        simplex_rows,
        word_constraints,
        lambda,
    }
}

// ---------------------------------------------------------------------------
// exact linear path

/// Exact optimum of max min_w z_w over the closed domain for a linear
/// system, together with an all-positive attaining point when one exists.
fn linear_max(cs: &ConstraintSystem) -> Option<(Rational, Option<BTreeMap<usize, Rational>>)> {
    if !cs.is_linear() {
        return None;
    }
    let nv = cs.variables.len();
    let var_pos: HashMap<usize, usize> =
        cs.variables.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // variables: x .. , t at index nv
    let mut constraints: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    for row in &cs.simplex_rows {
        let mut c = vec![Rational::zero(); nv + 1];
        for v in row {
            c[var_pos[v]] = Rational::one();
        }
        constraints.push((c, Relation::Eq, Rational::one()));
    }
    let mut tcap = vec![Rational::zero(); nv + 1];
    tcap[nv] = Rational::one();
    constraints.push((tcap, Relation::Le, Rational::one()));
    for wc in &cs.word_constraints {
        let mut c = vec![Rational::zero(); nv + 1];
        let mut constant = Rational::zero();
        for (factors, &coeff) in &wc.poly.terms {
            match factors.len() {
                0 => constant += Rational::from(BigInt::from(coeff)),
                1 => c[var_pos[&factors[0]]] += Rational::from(BigInt::from(coeff)),
                _ => unreachable!("linear system"),
            }
        }
        c[nv] = -Rational::one();
        constraints.push((c, Relation::Ge, -constant));
    }
    let mut objective = vec![Rational::zero(); nv + 1];
    objective[nv] = Rational::one();
    let lp = LpProblem {
        num_vars: nv + 1,
        objective,
        constraints,
    };
    match lp_solve(&lp) {
        LpOutcome::Optimal { value, .. } => {
            let interior = linear_feasible_interior(cs, &value);
            Some((value, interior))
        }
        LpOutcome::Infeasible => Some((Rational::zero(), None)),
        LpOutcome::Unbounded => Some((Rational::one(), linear_feasible_interior(cs, &Rational::one()))),
    }
}

/// All-positive point with every z_w >= λ for a linear system, found by
/// maximizing the smallest coordinate; `None` when only boundary points (or
/// nothing) satisfy the system.
fn linear_feasible_interior(
    cs: &ConstraintSystem,
    lambda: &Rational,
) -> Option<BTreeMap<usize, Rational>> {
    let nv = cs.variables.len();
    let var_pos: HashMap<usize, usize> =
        cs.variables.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // variables: x .., m at index nv; maximize m with x_i - m >= 0
    let mut constraints: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    for row in &cs.simplex_rows {
        let mut c = vec![Rational::zero(); nv + 1];
        for v in row {
            c[var_pos[v]] = Rational::one();
        }
        constraints.push((c, Relation::Eq, Rational::one()));
    }
    for wc in &cs.word_constraints {
        let mut c = vec![Rational::zero(); nv + 1];
        let mut constant = Rational::zero();
        for (factors, &coeff) in &wc.poly.terms {
            match factors.len() {
                0 => constant += Rational::from(BigInt::from(coeff)),
                1 => c[var_pos[&factors[0]]] += Rational::from(BigInt::from(coeff)),
                _ => unreachable!("linear system"),
            }
        }
        constraints.push((c, Relation::Ge, lambda - constant));
    }
    for i in 0..nv {
        let mut c = vec![Rational::zero(); nv + 1];
        c[i] = Rational::one();
        c[nv] = -Rational::one();
        constraints.push((c, Relation::Ge, Rational::zero()));
    }
    let mut m = vec![Rational::zero(); nv + 1];
    m[nv] = Rational::one();
    constraints.push((m, Relation::Le, Rational::one()));
    let mut objective = vec![Rational::zero(); nv + 1];
    objective[nv] = Rational::one();
    let lp = LpProblem {
        num_vars: nv + 1,
        objective,
        constraints,
    };
    match lp_solve(&lp) {
        LpOutcome::Optimal { value, solution } if value > Rational::zero() => {
            let point: BTreeMap<usize, Rational> = cs
                .variables
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, solution[i].clone()))
                .collect();
            Some(point)
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// numerical path

/// Options for the max–min search.
#[derive(Debug, Clone, Copy)]
pub struct MaximizeOptions {
    pub starts: usize,
    pub iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            starts: 8,
            iterations: 3000,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxStatus {
    /// Exact rational certificate matching the numerical optimum.
    Certified,
    /// Exact rational lower bound below the numerical estimate.
    LowerBoundOnly,
    /// Not positively resolvable; the bound zero is exact.
    Infeasible,
}

/// Result of [`maximize_lambda`]: an exact certified threshold with the
/// attaining resolver.
#[derive(Debug, Clone)]
pub struct MaximizeResult {
    pub lambda_best: Rational,
    pub resolver: Resolver,
    pub support: Support,
    pub status: MaxStatus,
    /// Telemetry: the best floating objective the ascent reached.
    pub float_best: f64,
    /// Exact optimum over the closed domain for linear systems.
    pub upper_bound: Option<Rational>,
}

fn project_simplex_floor(x: &mut [f64], floor: f64) {
    // Duchi et al. projection, then a positivity floor renormalization
    let n = x.len();
    let mut u: Vec<f64> = x.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cssv = 0.0;
    let mut rho = 0usize;
    for (i, &ui) in u.iter().enumerate() {
        cssv += ui;
        let t = (cssv - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            rho = i + 1;
        }
    }
    let theta = (u[..rho].iter().sum::<f64>() - 1.0) / rho as f64;
    for v in x.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = v.max(floor);
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
    let _ = n;
}

fn ascend(
    cs: &ConstraintSystem,
    opts: &MaximizeOptions,
) -> (f64, HashMap<usize, f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best_val = f64::NEG_INFINITY;
    let mut best_point: HashMap<usize, f64> = HashMap::new();
    // constant-only systems need no search
    if cs.variables.is_empty() {
        let point = HashMap::new();
        let val = cs
            .word_constraints
            .iter()
            .map(|w| w.poly.eval_f64(&point))
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        return (val, point);
    }
    for start in 0..opts.starts.max(1) {
        // per-row points; start 0 uniform, others random
        let mut rows: Vec<Vec<f64>> = cs
            .simplex_rows
            .iter()
            .map(|row| {
                if start == 0 {
                    vec![1.0 / row.len() as f64; row.len()]
                } else {
                    let raw: Vec<f64> = row.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
                    let sum: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / sum).collect()
                }
            })
            .collect();
        let assemble = |rows: &[Vec<f64>]| -> HashMap<usize, f64> {
            let mut point = HashMap::new();
            for (ri, row) in cs.simplex_rows.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    point.insert(v, rows[ri][i]);
                }
            }
            point
        };
        let objective = |point: &HashMap<usize, f64>| -> f64 {
            cs.word_constraints
                .iter()
                .map(|w| w.poly.eval_f64(point))
                .fold(f64::INFINITY, f64::min)
                .min(1.0)
        };
        let mut point = assemble(&rows);
        let mut val = objective(&point);
        if val > best_val {
            best_val = val;
            best_point = point.clone();
        }
        for it in 0..opts.iterations {
            // subgradient of the active minimum
            let active = cs
                .word_constraints
                .iter()
                .min_by(|x, y| {
                    x.poly
                        .eval_f64(&point)
                        .partial_cmp(&y.poly.eval_f64(&point))
                        .unwrap()
                })
                .map(|w| &w.poly);
            let active = match active {
                Some(p) => p,
                None => break,
            };
            let step = 0.25 / ((it + 1) as f64).sqrt();
            for (ri, row) in cs.simplex_rows.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    rows[ri][i] += step * active.d_dv(v, &point);
                }
                project_simplex_floor(&mut rows[ri], 1e-9);
            }
            point = assemble(&rows);
            val = objective(&point);
            if val > best_val {
                best_val = val;
                best_point = point.clone();
            }
        }
    }
    (best_val, best_point)
}

/// Smallest-denominator rational inside `[x - window, x + window]`
/// (Stern–Brocot), capped at denominator 10^6.
pub fn rationalize(x: f64, window: f64) -> Rational {
    const DEN_CAP: i64 = 1_000_000;
    let lo = (x - window).max(0.0);
    let hi = x + window;
    let r = simplest_between(lo, hi, 0);
    if r.denom() > &BigInt::from(DEN_CAP) {
        let num = (x * DEN_CAP as f64).round() as i64;
        Rational::new(BigInt::from(num), BigInt::from(DEN_CAP))
    } else {
        r
    }
}

fn simplest_between(lo: f64, hi: f64, depth: usize) -> Rational {
    let ceil_lo = lo.ceil();
    if ceil_lo <= hi || depth > 64 {
        return Rational::from(BigInt::from(ceil_lo.max(0.0) as i64));
    }
    let fl = lo.floor();
    let inner = simplest_between(1.0 / (hi - fl), 1.0 / (lo - fl), depth + 1);
    Rational::from(BigInt::from(fl as i64)) + inner.recip()
}

/// Turns a floating point into an exact all-positive row-stochastic point.
fn rationalize_point(
    cs: &ConstraintSystem,
    point: &HashMap<usize, f64>,
    window: f64,
) -> BTreeMap<usize, Rational> {
    let mut out: BTreeMap<usize, Rational> = BTreeMap::new();
    for row in &cs.simplex_rows {
        let mut vals: Vec<Rational> = row
            .iter()
            .map(|v| rationalize(point.get(v).copied().unwrap_or(0.0), window))
            .collect();
        let sum: Rational = vals.iter().cloned().sum();
        if sum != Rational::one() {
            // adjust the last coordinate when possible, else renormalize
            let others: Rational = vals[..vals.len() - 1].iter().cloned().sum();
            let last = Rational::one() - &others;
            if last > Rational::zero() {
                *vals.last_mut().unwrap() = last;
            } else {
                for v in vals.iter_mut() {
                    *v /= sum.clone();
                }
            }
        }
        // positivity floor: nudge zeros up proportionally
        if vals.iter().any(|v| *v <= Rational::zero()) {
            let n = vals.len() as i64;
            let eps = Rational::new(BigInt::one(), BigInt::from(1000 * n));
            let scale = Rational::one() - &eps * Rational::from(BigInt::from(n));
            for v in vals.iter_mut() {
                *v = &eps + &scale * v.clone().max(Rational::zero());
            }
            let s: Rational = vals.iter().cloned().sum();
            for v in vals.iter_mut() {
                *v /= s.clone();
            }
        }
        for (v, val) in row.iter().zip(vals) {
            out.insert(*v, val);
        }
    }
    out
}

fn exact_min(cs: &ConstraintSystem, point: &BTreeMap<usize, Rational>) -> Rational {
    cs.word_constraints
        .iter()
        .map(|w| w.poly.eval_exact(point))
        .min()
        .unwrap_or_else(Rational::one)
        .min(Rational::one())
}

fn resolver_from_point(
    a: &Nfa,
    s: &Support,
    point: &BTreeMap<usize, Rational>,
) -> Resolver {
    let mut weights: BTreeMap<usize, Rational> = BTreeMap::new();
    for q in 0..a.num_states() {
        for sym in 0..a.alphabet().len() {
            let kept: Vec<usize> = a
                .row(q, sym)
                .iter()
                .copied()
                .filter(|&ti| s.contains(ti))
                .collect();
            if kept.len() == 1 {
                weights.insert(kept[0], Rational::one());
            } else {
                for ti in kept {
                    weights.insert(ti, point[&ti].clone());
                }
            }
        }
    }
    Resolver::new(a, weights).expect("point is row-stochastic and positive")
}

/// Maximizes the guaranteed threshold over every good support: numerical
/// multi-start ascent rationalized and re-verified exactly, plus the exact
/// simplex optimum for linear systems. The returned λ and resolver are always
/// exact; `Certified` means they match the numerical optimum within the
/// tolerance (or the exact linear optimum).
pub fn maximize_lambda(a: &Nfa, opts: &MaximizeOptions) -> Result<MaximizeResult, LambdaError> {
    let report = fnfa_check_pr(a, SearchOptions::default(), 1)?;
    if !report.resolvable {
        let support = Support::full(a);
        let resolver = Resolver::uniform(a, &support);
        return Ok(MaximizeResult {
            lambda_best: Rational::zero(),
            resolver,
            support,
            status: MaxStatus::Infeasible,
            float_best: 0.0,
            upper_bound: Some(Rational::zero()),
        });
    }
    let mut best: Option<MaximizeResult> = None;
    for verdict in report.verdicts.iter().filter(|v| v.witness.is_none() && !v.truncated) {
        let s = &verdict.support;
        let cs = build_constraints(a, s, None)?;
        let (float_best, float_point) = ascend(&cs, opts);
        let window = (opts.tolerance * 10.0).max(1e-9);
        let rat_point = rationalize_point(&cs, &float_point, window);
        let mut cand_lambda = exact_min(&cs, &rat_point);
        let mut cand_point = rat_point;
        let mut upper = None;
        if let Some((u, interior)) = linear_max(&cs) {
            upper = Some(u.clone());
            if let Some(p) = interior {
                let v = exact_min(&cs, &p);
                if v > cand_lambda {
                    cand_lambda = v;
                    cand_point = p;
                }
            }
        }
        let status = if !float_best.is_finite() {
            MaxStatus::LowerBoundOnly
        } else {
            let near = cand_lambda.to_f64().map_or(false, |c| {
                c >= float_best - opts.tolerance
            });
            let exact_at_upper = upper.as_ref().is_some_and(|u| *u == cand_lambda);
            if near || exact_at_upper {
                MaxStatus::Certified
            } else {
                MaxStatus::LowerBoundOnly
            }
        };
        let resolver = resolver_from_point(a, s, &cand_point);
        let result = MaximizeResult {
            lambda_best: cand_lambda,
            resolver,
            support: s.clone(),
            status,
            float_best,
            upper_bound: upper,
        };
        best = match best {
            None => Some(result),
            Some(b) if result.lambda_best > b.lambda_best => Some(result),
            b => b,
        };
    }
    Ok(best.expect("a resolvable automaton has a good support"))
}

/// Outcome of a fixed-threshold query.
#[derive(Debug, Clone)]
pub enum LambdaVerdict {
    Yes {
        support: Support,
        resolver: Resolver,
    },
    No {
        reason: String,
    },
    Unknown {
        reason: String,
    },
}

/// Decides λ-resolvability: exact yes-certificates and exact refutations
/// where available (UFA optimum, linear systems, positive-resolvability
/// failure, λ > 1); `Unknown` when only the incomplete numerical search could
/// speak.
pub fn check_lambda_resolvable(
    a: &Nfa,
    lambda: &Rational,
    opts: &MaximizeOptions,
) -> Result<LambdaVerdict, LambdaError> {
    if *lambda <= Rational::zero() {
        return Err(LambdaError::InvalidLambda);
    }
    let trimmed = a.trim();
    if trimmed.accepting().is_empty() {
        // empty language: any resolver works for any threshold
        let support = Support::full(a);
        return Ok(LambdaVerdict::Yes {
            resolver: Resolver::uniform(a, &support),
            support,
        });
    }
    if *lambda > Rational::one() {
        return Ok(LambdaVerdict::No {
            reason: "thresholds above 1 are unattainable on a nonempty language".into(),
        });
    }
    match classify_ambiguity(a, DEFAULT_DEGREE_CAP)
        .map_err(|e| LambdaError::Fnfa(FnfaError::Ambiguity(e)))?
    {
        AmbiguityClass::Infinite => Ok(LambdaVerdict::Unknown {
            reason: "infinitely ambiguous: the finite constraint system does not apply".into(),
        }),
        AmbiguityClass::Unambiguous => match ufa_check_pr(&trimmed)? {
            UfaPrVerdict::NotResolvable(w) => Ok(LambdaVerdict::No {
                reason: format!(
                    "not positively resolvable; witness word {}",
                    trimmed.format_word(&w.word())
                ),
            }),
            UfaPrVerdict::Resolvable => {
                let (t, resolver, rep) = ufa_synthesize(&trimmed)?;
                if *lambda <= rep.lambda_star {
                    Ok(LambdaVerdict::Yes {
                        support: Support::full(&t),
                        resolver,
                    })
                } else {
                    Ok(LambdaVerdict::No {
                        reason: format!(
                            "λ* = {} is the exact optimum",
                            format_rational(&rep.lambda_star)
                        ),
                    })
                }
            }
        },
        AmbiguityClass::Finite(_) => {
            let report = fnfa_check_pr(a, SearchOptions::default(), 1)?;
            if !report.resolvable {
                return Ok(LambdaVerdict::No {
                    reason: "not positively resolvable: every support admits a bad word".into(),
                });
            }
            let mut all_refuted_exactly = true;
            for verdict in report
                .verdicts
                .iter()
                .filter(|v| v.witness.is_none() && !v.truncated)
            {
                let s = &verdict.support;
                let cs = build_constraints(a, s, Some(lambda.clone()))?;
                if cs.is_linear() {
                    if let Some(point) = linear_feasible_interior(&cs, lambda) {
                        return Ok(LambdaVerdict::Yes {
                            resolver: resolver_from_point(a, s, &point),
                            support: s.clone(),
                        });
                    }
                    // exact refutation for this support
                } else {
                    let (float_best, float_point) = ascend(&cs, opts);
                    let window = (opts.tolerance * 10.0).max(1e-9);
                    let point = rationalize_point(&cs, &float_point, window);
                    if exact_min(&cs, &point) >= *lambda {
                        return Ok(LambdaVerdict::Yes {
                            resolver: resolver_from_point(a, s, &point),
                            support: s.clone(),
                        });
                    }
                    let _ = float_best;
                    all_refuted_exactly = false;
                }
            }
            if all_refuted_exactly {
                Ok(LambdaVerdict::No {
                    reason: "exact optimum below λ on every support".into(),
                })
            } else {
                Ok(LambdaVerdict::Unknown {
                    reason: "numerical search failed to reach λ and no exact refutation exists"
                        .into(),
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// exports

/// Renders monomial `x3*x7` (or `1` for the empty product), with repeated
/// factors spelled out.
fn native_monomial(factors: &[usize], coeff: u64, var_pos: &HashMap<usize, usize>) -> String {
    let body = if factors.is_empty() {
        "1".to_string()
    } else {
        factors
            .iter()
            .map(|f| format!("x{}", var_pos[f]))
            .collect::<Vec<_>>()
            .join("*")
    };
    if coeff == 1 {
        body
    } else {
        format!("{coeff}*{body}")
    }
}

/// Native line format:
///
/// ```text
/// var x0 in (0,1]
/// simplex x0 + x1 = 1
/// word ab: x0 >= lambda
/// lambda = 1/2
/// ```
pub fn export_native(a: &Nfa, cs: &ConstraintSystem) -> String {
    let var_pos: HashMap<usize, usize> =
        cs.variables.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut out = String::new();
    for (i, &v) in cs.variables.iter().enumerate() {
        let t = a.transition(v);
        out.push_str(&format!(
            "var x{i} in (0,1]  # {} -{}-> {}\n",
            a.states()[t.source],
            a.alphabet()[t.symbol],
            a.states()[t.target]
        ));
    }
    for row in &cs.simplex_rows {
        let terms: Vec<String> = row.iter().map(|v| format!("x{}", var_pos[v])).collect();
        out.push_str(&format!("simplex {} = 1\n", terms.join(" + ")));
    }
    for wc in &cs.word_constraints {
        let monos: Vec<String> = wc
            .poly
            .terms
            .iter()
            .map(|(f, &c)| native_monomial(f, c, &var_pos))
            .collect();
        let rhs = if monos.is_empty() {
            "0".to_string()
        } else {
            monos.join(" + ")
        };
        out.push_str(&format!(
            "word {}: {} >= lambda\n",
            a.format_word(&wc.words[0]),
            rhs
        ));
    }
    if let Some(l) = &cs.lambda {
        out.push_str(&format!("lambda = {}\n", format_rational(l)));
    }
    out
}

/// Structure parsed back from the native format; variables are positional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativeSystem {
    pub num_vars: usize,
    pub simplex_rows: Vec<Vec<usize>>,
    /// Per word line: (label, polynomial over variable positions).
    pub words: Vec<(String, BTreeMap<Vec<usize>, u64>)>,
    pub lambda: Option<Rational>,
}

/// Parses the native constraint format (round-trip of [`export_native`]).
pub fn parse_native(text: &str) -> Result<NativeSystem, String> {
    let mut num_vars = 0usize;
    let mut simplex_rows = Vec::new();
    let mut words = Vec::new();
    let mut lambda = None;
    let parse_var = |tok: &str| -> Result<usize, String> {
        tok.trim()
            .strip_prefix('x')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("bad variable `{tok}`"))
    };
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("var ") {
            let v = parse_var(rest.split_whitespace().next().unwrap_or(""))?;
            num_vars = num_vars.max(v + 1);
        } else if let Some(rest) = line.strip_prefix("simplex ") {
            let lhs = rest
                .split('=')
                .next()
                .ok_or_else(|| "bad simplex line".to_string())?;
            let row: Result<Vec<usize>, String> =
                lhs.split('+').map(|t| parse_var(t.trim())).collect();
            simplex_rows.push(row?);
        } else if let Some(rest) = line.strip_prefix("word ") {
            let (label, poly_part) = rest
                .split_once(':')
                .ok_or_else(|| "bad word line".to_string())?;
            let body = poly_part
                .split(">=")
                .next()
                .ok_or_else(|| "bad word line".to_string())?
                .trim();
            let mut poly: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
            if body != "0" {
                for mono in body.split('+') {
                    let mut coeff = 1u64;
                    let mut factors = Vec::new();
                    for f in mono.trim().split('*') {
                        let f = f.trim();
                        if let Ok(c) = f.parse::<u64>() {
                            coeff = coeff.saturating_mul(c.max(1));
                            if f == "1" {
                                continue;
                            }
                        } else {
                            factors.push(parse_var(f)?);
                        }
                    }
                    factors.sort_unstable();
                    *poly.entry(factors).or_insert(0) += coeff;
                }
            }
            words.push((label.trim().to_string(), poly));
        } else if let Some(rest) = line.strip_prefix("lambda =") {
            lambda = Some(
                crate::core::parse_rational(rest.trim()).map_err(|e| e.to_string())?,
            );
        } else {
            return Err(format!("unknown line `{line}`"));
        }
    }
    Ok(NativeSystem {
        num_vars,
        simplex_rows,
        words,
        lambda,
    })
}

fn smt_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        if r.numer().is_negative() {
            format!("(- {})", r.numer().magnitude())
        } else {
            format!("{}.0", r.numer())
        }
    } else {
        format!("(/ {} {})", r.numer(), r.denom())
    }
}

/// SMT-LIB2 rendering in quantifier-free nonlinear real arithmetic.
pub fn export_smt(a: &Nfa, cs: &ConstraintSystem) -> String {
    let var_pos: HashMap<usize, usize> =
        cs.variables.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut out = String::new();
    out.push_str("(set-logic QF_NRA)\n");
    for (i, &v) in cs.variables.iter().enumerate() {
        let t = a.transition(v);
        out.push_str(&format!(
            "; x{i} = {} -{}-> {}\n(declare-const x{i} Real)\n",
            a.states()[t.source],
            a.alphabet()[t.symbol],
            a.states()[t.target]
        ));
    }
    match &cs.lambda {
        Some(l) => out.push_str(&format!(
            "(define-fun lambda () Real {})\n",
            smt_rational(l)
        )),
        None => out.push_str("(declare-const lambda Real)\n(assert (< 0 lambda))\n"),
    }
    for (i, _) in cs.variables.iter().enumerate() {
        out.push_str(&format!("(assert (and (< 0 x{i}) (<= x{i} 1)))\n"));
    }
    for row in &cs.simplex_rows {
        let terms: Vec<String> = row.iter().map(|v| format!("x{}", var_pos[v])).collect();
        if terms.len() == 1 {
            out.push_str(&format!("(assert (= {} 1))\n", terms[0]));
        } else {
            out.push_str(&format!("(assert (= (+ {}) 1))\n", terms.join(" ")));
        }
    }
    for wc in &cs.word_constraints {
        let monos: Vec<String> = wc
            .poly
            .terms
            .iter()
            .map(|(f, &c)| {
                let factors: Vec<String> =
                    f.iter().map(|v| format!("x{}", var_pos[v])).collect();
                let base = match factors.len() {
                    0 => "1.0".to_string(),
                    1 => factors[0].clone(),
                    _ => format!("(* {})", factors.join(" ")),
                };
                if c == 1 {
                    base
                } else {
                    format!("(* {c}.0 {base})")
                }
            })
            .collect();
        let sum = match monos.len() {
            0 => "0.0".to_string(),
            1 => monos[0].clone(),
            _ => format!("(+ {})", monos.join(" ")),
        };
        out.push_str(&format!(
            "(assert (>= {sum} lambda)) ; word {}\n",
            a.format_word(&wc.words[0])
        ));
    }
    out.push_str("(check-sat)\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{parse_automaton, rat};
    use crate::pfa::{eval_exact, Pfa};

    fn fixture(text: &str) -> Nfa {
        parse_automaton(text).unwrap().into_nfa()
    }

    fn fig1a() -> Nfa {
        fixture(include_str!("../../fixtures/fig1a.nfa"))
    }
    fn fig1b() -> Nfa {
        fixture(include_str!("../../fixtures/fig1b.nfa"))
    }

    #[test]
    fn fig1b_primitive_profile_is_b_bb_with_zero_poly() {
        let a = fig1b();
        let (prims, truncated) = enumerate_primitive_words(&a, &Support::full(&a), None).unwrap();
        assert!(!truncated);
        assert_eq!(prims.len(), 1);
        let words: Vec<String> = prims[0].words.iter().map(|w| a.format_word(w)).collect();
        assert_eq!(words, vec!["b", "bb"]);
        // z_bb = 0; z_b = 0 as well via the (ba)^j b laundering cycle
        assert!(prims[0].poly.is_zero());
    }

    #[test]
    fn fig1a_primitives_are_ab_and_ac() {
        let a = fig1a();
        let (prims, _) = enumerate_primitive_words(&a, &Support::full(&a), None).unwrap();
        assert_eq!(prims.len(), 2);
        let mut words: Vec<String> = prims
            .iter()
            .map(|p| a.format_word(p.word()))
            .collect();
        words.sort();
        assert_eq!(words, vec!["ab", "ac"]);
        for p in &prims {
            assert!(p.bad_set.is_empty());
            assert_eq!(p.poly.degree(), 1);
            assert_eq!(p.poly.terms.len(), 1);
        }
    }

    #[test]
    fn bad_sets_match_the_cycle_structure() {
        let a = fig1b();
        let full = Support::full(&a);
        let bb = a.parse_word("bb").unwrap();
        assert_eq!(
            compute_bad_set(&a, &full, &bb).unwrap(),
            Some(BTreeSet::from([0]))
        );
        // the spec example says {} for "b", but run-of-b diminishes via the
        // (ba)^j b family, so the faithful answer is {0}
        let b = a.parse_word("b").unwrap();
        assert_eq!(
            compute_bad_set(&a, &full, &b).unwrap(),
            Some(BTreeSet::from([0]))
        );
        assert_eq!(compute_bad_set(&a, &full, &a.parse_word("ba").unwrap()).unwrap(), None);
    }

    #[test]
    fn fig1a_constraints_and_exports() {
        let a = fig1a();
        let cs = build_constraints(&a, &Support::full(&a), None).unwrap();
        assert_eq!(cs.variables.len(), 2);
        assert_eq!(cs.simplex_rows.len(), 1);
        assert_eq!(cs.word_constraints.len(), 2);
        assert!(cs.is_linear());
        let native = export_native(&a, &cs);
        assert!(native.contains("simplex x0 + x1 = 1"));
        assert!(native.contains(">= lambda"));
        let parsed = parse_native(&native).unwrap();
        assert_eq!(parsed.num_vars, 2);
        assert_eq!(parsed.simplex_rows, vec![vec![0, 1]]);
        assert_eq!(parsed.words.len(), 2);
        let smt = export_smt(&a, &cs);
        assert!(smt.starts_with("(set-logic QF_NRA)"));
        assert!(smt.contains("(check-sat)"));
        assert!(smt.contains("(assert (= (+ x0 x1) 1))"));
    }

    #[test]
    fn fig1b_constraints_include_zero_geq_lambda() {
        let a = fig1b();
        let cs = build_constraints(&a, &Support::full(&a), Some(rat(1, 10))).unwrap();
        assert!(cs.word_constraints.iter().any(|w| w.poly.is_zero()));
        let native = export_native(&a, &cs);
        assert!(native.contains(": 0 >= lambda"));
        assert!(native.contains("lambda = 1/10"));
    }

    #[test]
    fn dfa_system_is_vacuous() {
        let a = fixture("nfa d\nalphabet a\nstate x init accept\ntrans x a x\nend");
        let cs = build_constraints(&a, &Support::full(&a), None).unwrap();
        assert!(cs.variables.is_empty());
        assert!(cs.word_constraints.iter().all(|w| w.poly.degree() == 0));
        let m = maximize_lambda(&a, &MaximizeOptions::default()).unwrap();
        assert_eq!(m.lambda_best, rat(1, 1));
        assert_eq!(m.status, MaxStatus::Certified);
    }

    #[test]
    fn fig1a_maximize_certifies_half() {
        let a = fig1a();
        let m = maximize_lambda(&a, &MaximizeOptions::default()).unwrap();
        assert_eq!(m.lambda_best, rat(1, 2));
        assert_eq!(m.status, MaxStatus::Certified);
        assert_eq!(m.upper_bound, Some(rat(1, 2)));
        assert!((m.float_best - 0.5).abs() < 1e-6);
        // the certificate evaluates exactly
        let p = Pfa::new(a.clone(), m.resolver.clone());
        assert_eq!(eval_exact(&p, &a.parse_word("ab").unwrap()), rat(1, 2));
    }

    #[test]
    fn fig1b_maximize_is_infeasible() {
        let a = fig1b();
        let m = maximize_lambda(&a, &MaximizeOptions::default()).unwrap();
        assert_eq!(m.lambda_best, rat(0, 1));
        assert_eq!(m.status, MaxStatus::Infeasible);
    }

    #[test]
    fn check_lambda_on_fig1a() {
        let a = fig1a();
        let opts = MaximizeOptions::default();
        assert!(matches!(
            check_lambda_resolvable(&a, &rat(1, 2), &opts).unwrap(),
            LambdaVerdict::Yes { .. }
        ));
        assert!(matches!(
            check_lambda_resolvable(&a, &rat(501, 1000), &opts).unwrap(),
            LambdaVerdict::No { .. }
        ));
        assert!(matches!(
            check_lambda_resolvable(&a, &rat(1, 1), &opts).unwrap(),
            LambdaVerdict::No { .. }
        ));
        assert!(matches!(
            check_lambda_resolvable(&a, &rat(1, 3), &opts).unwrap(),
            LambdaVerdict::Yes { .. }
        ));
    }

    #[test]
    fn check_lambda_fig1b_infeasible_for_all_positive() {
        let a = fig1b();
        let opts = MaximizeOptions::default();
        for l in [rat(1, 1000), rat(1, 10), rat(1, 2), rat(1, 1)] {
            assert!(matches!(
                check_lambda_resolvable(&a, &l, &opts).unwrap(),
                LambdaVerdict::No { .. }
            ));
        }
    }

    #[test]
    fn rationalize_snaps_to_simple_fractions() {
        assert_eq!(rationalize(0.3333331, 1e-5), rat(1, 3));
        assert_eq!(rationalize(0.5000004, 1e-5), rat(1, 2));
        assert_eq!(rationalize(0.6666666, 1e-5), rat(2, 3));
        assert_eq!(rationalize(0.0, 1e-5), rat(0, 1));
    }

    #[test]
    fn certified_resolver_bounds_short_words() {
        // soundness of z_w on the fixture: every accepted word up to length
        // 10 stays at or above the certified threshold
        let a = fig1a();
        let m = maximize_lambda(&a, &MaximizeOptions::default()).unwrap();
        let p = Pfa::new(a.clone(), m.resolver.clone());
        let mut words = vec![Vec::new()];
        for _ in 0..10 {
            let mut next = Vec::new();
            for w in &words {
                for s in 0..a.alphabet().len() {
                    let mut v = w.clone();
                    v.push(s);
                    next.push(v);
                }
            }
            for wv in &next {
                let w = Word(wv.clone());
                if a.accepts(&w) {
                    assert!(eval_exact(&p, &w) >= m.lambda_best);
                }
            }
            words = next;
        }
    }
}
