//! A small exact simplex solver over rationals, used to decide linear
//! constraint systems exactly. Two-phase method with Bland's rule.

use num::{One, Zero};

use crate::core::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Ge,
    Le,
}

/// Maximize `objective · x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<Rational>,
    pub constraints: Vec<(Vec<Rational>, Relation, Rational)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        value: Rational,
        solution: Vec<Rational>,
    },
    Infeasible,
    Unbounded,
}

struct Tableau {
    // rows x cols; last column is the rhs, last row the objective
    data: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let factor = self.data[row][col].clone();
        for v in self.data[row].iter_mut() {
            *v /= factor.clone();
        }
        for r in 0..self.data.len() {
            if r == row || self.data[r][col].is_zero() {
                continue;
            }
            let f = self.data[r][col].clone();
            for c in 0..self.ncols {
                let delta = &f * &self.data[row][c];
                self.data[r][c] -= delta;
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering = lowest-index column with positive reduced
    /// cost, leaving = lowest-index basic variable among the tightest rows.
    fn run(&mut self, nvars: usize) -> bool {
        let obj_row = self.data.len() - 1;
        loop {
            let rhs_col = self.ncols - 1;
            let mut enter = None;
            for c in 0..nvars {
                if self.data[obj_row][c] > Rational::zero() {
                    enter = Some(c);
                    break;
                }
            }
            let enter = match enter {
                Some(c) => c,
                None => return true, // optimal
            };
            let mut leave: Option<(usize, Rational)> = None;
            for r in 0..obj_row {
                if self.data[r][enter] > Rational::zero() {
                    let ratio = &self.data[r][rhs_col] / &self.data[r][enter];
                    let better = match &leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < *lratio
                                || (ratio == *lratio && self.basis[r] < self.basis[*lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return false, // unbounded
            }
        }
    }
}

/// Solves the linear program exactly.
pub fn solve(p: &LpProblem) -> LpOutcome {
    let n = p.num_vars;
    // assemble equalities with slack variables, rhs >= 0
    let mut rows: Vec<(Vec<Rational>, Rational)> = Vec::new();
    let mut num_slack = 0usize;
    let mut slack_of_row: Vec<Option<(usize, Rational)>> = Vec::new();
    for (coeffs, rel, rhs) in &p.constraints {
        let mut c = coeffs.clone();
        c.resize(n, Rational::zero());
        let mut rhs = rhs.clone();
        let mut slack_sign = match rel {
            Relation::Eq => None,
            Relation::Le => Some(Rational::one()),
            Relation::Ge => Some(-Rational::one()),
        };
        if rhs < Rational::zero() {
            for v in c.iter_mut() {
                *v = -v.clone();
            }
            rhs = -rhs;
            slack_sign = slack_sign.map(|s| -s);
        }
        match slack_sign {
            Some(s) => {
                slack_of_row.push(Some((num_slack, s)));
                num_slack += 1;
            }
            None => slack_of_row.push(None),
        }
        rows.push((c, rhs));
    }
    let m = rows.len();
    let total = n + num_slack + m; // + artificials
    let ncols = total + 1;

    let mut data: Vec<Vec<Rational>> = Vec::with_capacity(m + 1);
    let mut basis = Vec::with_capacity(m);
    for (i, (c, rhs)) in rows.iter().enumerate() {
        let mut row = vec![Rational::zero(); ncols];
        row[..n].clone_from_slice(&c[..n]);
        if let Some((si, sign)) = &slack_of_row[i] {
            row[n + si] = sign.clone();
        }
        row[n + num_slack + i] = Rational::one();
        row[ncols - 1] = rhs.clone();
        data.push(row);
        basis.push(n + num_slack + i);
    }
    // phase 1: maximize -(sum of artificials); with the artificials basic the
    // reduced-cost row is +(sum of constraint rows) on the remaining columns
    // and the rhs cell stores -(objective value) = +(sum of b)
    let mut obj = vec![Rational::zero(); ncols];
    for i in 0..m {
        for c in 0..ncols {
            let d = data[i][c].clone();
            obj[c] += d;
        }
    }
    for a in 0..m {
        obj[n + num_slack + a] = Rational::zero();
    }
    data.push(obj);
    let mut t = Tableau {
        data,
        basis,
        ncols,
    };
    if !t.run(n + num_slack) {
        return LpOutcome::Infeasible; // phase 1 unbounded cannot happen
    }
    let obj_row = t.data.len() - 1;
    if t.data[obj_row][ncols - 1] > Rational::zero() {
        return LpOutcome::Infeasible;
    }
    // drive artificials out of the basis where possible
    for r in 0..obj_row {
        if t.basis[r] >= n + num_slack {
            if let Some(c) = (0..n + num_slack).find(|&c| !t.data[r][c].is_zero()) {
                t.pivot(r, c);
            }
        }
    }
    // phase 2 objective
    let mut obj = vec![Rational::zero(); ncols];
    obj[..n].clone_from_slice(&p.objective[..n.min(p.objective.len())]);
    // express in terms of the current basis
    for r in 0..obj_row {
        let b = t.basis[r];
        if b < n && !obj[b].is_zero() {
            let f = obj[b].clone();
            for c in 0..ncols {
                let delta = &f * &t.data[r][c];
                obj[c] -= delta;
            }
        }
    }
    // the rhs cell of the objective row accumulates -value
    t.data[obj_row] = obj;
    if !t.run(n + num_slack) {
        return LpOutcome::Unbounded;
    }
    let mut solution = vec![Rational::zero(); n];
    for r in 0..obj_row {
        if t.basis[r] < n {
            solution[t.basis[r]] = t.data[r][ncols - 1].clone();
        }
    }
    let value = p
        .objective
        .iter()
        .zip(&solution)
        .map(|(c, x)| c * x)
        .sum();
    LpOutcome::Optimal { value, solution }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::rat;

    fn r(n: i64, d: i64) -> Rational {
        rat(n, d)
    }

    #[test]
    fn max_min_over_three_branch_simplex() {
        // max t s.t. x1+x2 >= t, x1+x3 >= t, x2+x3 >= t, x1+x2+x3 = 1
        // optimum 2/3 at the uniform point
        let p = LpProblem {
            num_vars: 4, // x1 x2 x3 t
            objective: vec![r(0, 1), r(0, 1), r(0, 1), r(1, 1)],
            constraints: vec![
                (vec![r(1, 1), r(1, 1), r(0, 1), r(-1, 1)], Relation::Ge, r(0, 1)),
                (vec![r(1, 1), r(0, 1), r(1, 1), r(-1, 1)], Relation::Ge, r(0, 1)),
                (vec![r(0, 1), r(1, 1), r(1, 1), r(-1, 1)], Relation::Ge, r(0, 1)),
                (vec![r(1, 1), r(1, 1), r(1, 1), r(0, 1)], Relation::Eq, r(1, 1)),
            ],
        };
        match solve(&p) {
            LpOutcome::Optimal { value, solution } => {
                assert_eq!(value, r(2, 3));
                assert_eq!(solution[0], r(1, 3));
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn infeasible_detected() {
        // x1 >= 1, x1 >= 1... with x1 + x2 = 1 and x2 >= 1 -> infeasible
        let p = LpProblem {
            num_vars: 2,
            objective: vec![r(1, 1), r(0, 1)],
            constraints: vec![
                (vec![r(1, 1), r(1, 1)], Relation::Eq, r(1, 1)),
                (vec![r(1, 1), r(0, 1)], Relation::Ge, r(1, 1)),
                (vec![r(0, 1), r(1, 1)], Relation::Ge, r(1, 1)),
            ],
        };
        assert_eq!(solve(&p), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let p = LpProblem {
            num_vars: 1,
            objective: vec![r(1, 1)],
            constraints: vec![(vec![r(1, 1)], Relation::Ge, r(0, 1))],
        };
        assert_eq!(solve(&p), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_equalities() {
        // x = 1/2 twice over, maximize x
        let p = LpProblem {
            num_vars: 1,
            objective: vec![r(1, 1)],
            constraints: vec![
                (vec![r(1, 1)], Relation::Eq, r(1, 2)),
                (vec![r(2, 1)], Relation::Eq, r(1, 1)),
            ],
        };
        match solve(&p) {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, r(1, 2)),
            o => panic!("unexpected {o:?}"),
        }
    }
}
