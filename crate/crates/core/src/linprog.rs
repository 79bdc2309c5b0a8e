//! Exact rational linear feasibility over non-negative variables.
//!
//! Phase-1 simplex with Bland's rule; no floating point, so feasibility
//! answers are exact. Used for XOS membership, supporting-price synthesis,
//! and conditional-equilibrium existence on explicit bundle tables.

use num_traits::{Signed, Zero};

use crate::rational::{rat_int, Rat};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Rel {
    Le,
    Ge,
    Eq,
}

pub struct Feasibility {
    n_vars: usize,
    rows: Vec<(Vec<Rat>, Rel, Rat)>,
}

impl Feasibility {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            rows: Vec::new(),
        }
    }

    pub fn le(&mut self, coeffs: Vec<Rat>, rhs: Rat) {
        assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, Rel::Le, rhs));
    }

    pub fn ge(&mut self, coeffs: Vec<Rat>, rhs: Rat) {
        assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, Rel::Ge, rhs));
    }

    pub fn eq(&mut self, coeffs: Vec<Rat>, rhs: Rat) {
        assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, Rel::Eq, rhs));
    }

    /// A feasible point with all variables >= 0, or None if the system is
    /// infeasible.
    pub fn solve(&self) -> Option<Vec<Rat>> {
        let n = self.n_vars;
        if self.rows.is_empty() {
            return Some(vec![rat_int(0); n]);
        }
        let m = self.rows.len();

        // Normalize to rhs >= 0, attach slack/surplus, then one artificial
        // per row that lacks an identity column.
        let n_slack = self
            .rows
            .iter()
            .filter(|(_, rel, _)| *rel != Rel::Eq)
            .count();
        let mut needs_artificial = vec![false; m];
        let mut slack_col_of_row = vec![usize::MAX; m];
        let mut next_slack = 0usize;
        for (i, (_, rel, rhs)) in self.rows.iter().enumerate() {
            let flipped = rhs.is_negative();
            let rel = match (rel, flipped) {
                (Rel::Eq, _) => Rel::Eq,
                (Rel::Le, false) | (Rel::Ge, true) => Rel::Le,
                (Rel::Le, true) | (Rel::Ge, false) => Rel::Ge,
            };
            if rel != Rel::Eq {
                slack_col_of_row[i] = n + next_slack;
                next_slack += 1;
            }
            // A "<=" row with non-negative rhs starts feasible on its slack.
            needs_artificial[i] = rel != Rel::Le;
        }
        let n_art: usize = needs_artificial.iter().filter(|&&a| a).count();
        let total = n + n_slack + n_art;

        let mut tab: Vec<Vec<Rat>> = Vec::with_capacity(m);
        let mut basis = vec![0usize; m];
        let mut next_art = 0usize;
        for (i, (coeffs, rel, rhs)) in self.rows.iter().enumerate() {
            let mut row = vec![rat_int(0); total + 1];
            let flip = rhs.is_negative();
            for (j, c) in coeffs.iter().enumerate() {
                row[j] = if flip { -c.clone() } else { c.clone() };
            }
            row[total] = if flip { -rhs.clone() } else { rhs.clone() };
            if *rel != Rel::Eq {
                // Slack sign follows the post-flip relation.
                let effective_le = (*rel == Rel::Le) != flip;
                row[slack_col_of_row[i]] = if effective_le { rat_int(1) } else { rat_int(-1) };
            }
            if needs_artificial[i] {
                let col = n + n_slack + next_art;
                next_art += 1;
                row[col] = rat_int(1);
                basis[i] = col;
            } else {
                basis[i] = slack_col_of_row[i];
            }
            tab.push(row);
        }

        // Phase-1 objective: minimize the artificial sum. Start from the
        // raw costs (1 on artificials), then zero out the basic columns by
        // subtracting their rows.
        let mut cost = vec![rat_int(0); total + 1];
        for c in cost.iter_mut().take(total).skip(n + n_slack) {
            *c = rat_int(1);
        }
        for (i, row) in tab.iter().enumerate() {
            if basis[i] >= n + n_slack {
                for (c, v) in cost.iter_mut().zip(row.iter()) {
                    *c -= v;
                }
            }
        }

        loop {
            // Bland: entering column = smallest index with negative reduced cost.
            let Some(enter) = (0..total).find(|&j| cost[j].is_negative()) else {
                break;
            };
            // Leaving row: minimum ratio, ties by smallest basis index.
            let mut leave: Option<usize> = None;
            for i in 0..m {
                if !tab[i][enter].is_positive() {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let cur = &tab[i][total] * &tab[l][enter];
                        let best = &tab[l][total] * &tab[i][enter];
                        match cur.cmp(&best) {
                            std::cmp::Ordering::Less => true,
                            std::cmp::Ordering::Equal => basis[i] < basis[l],
                            std::cmp::Ordering::Greater => false,
                        }
                    }
                };
                if better {
                    leave = Some(i);
                }
            }
            let Some(leave) = leave else {
                // Unbounded phase-1 objective cannot happen (bounded below by 0),
                // but guard against it rather than loop.
                return None;
            };

            let pivot = tab[leave][enter].clone();
            for v in tab[leave].iter_mut() {
                *v /= &pivot;
            }
            let pivot_row = tab[leave].clone();
            for (i, row) in tab.iter_mut().enumerate() {
                if i == leave || row[enter].is_zero() {
                    continue;
                }
                let factor = row[enter].clone();
                for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= &factor * p;
                }
            }
            if !cost[enter].is_zero() {
                let factor = cost[enter].clone();
                for (c, p) in cost.iter_mut().zip(pivot_row.iter()) {
                    *c -= &factor * p;
                }
            }
            basis[leave] = enter;
        }

        // cost[total] holds minus the objective value.
        if !cost[total].is_zero() {
            return None;
        }
        let mut x = vec![rat_int(0); n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] = tab[i][total].clone();
            }
        }
        Some(x)
    }
}
