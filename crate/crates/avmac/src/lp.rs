//! Self-contained dense linear programming: a two-phase full-tableau
//! simplex with Bland's rule.
//!
//! The symmetrizability checks reduce to minimax feasibility programs with
//! a handful of variables, so a dense tableau is the right tool; Bland's
//! rule guarantees termination on the heavily degenerate systems that
//! arise there (many zero right-hand sides).

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;
const MAX_PIVOTS: usize = 20_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("pivot limit exceeded without convergence")]
    IterationLimit,
    #[error("malformed problem: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

/// Minimize `objective . x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: usize,
    cols: usize, // structural + slack + artificial
    a: Vec<f64>, // rows x (cols + 1), last column is the rhs
    basis: Vec<usize>,
    num_structural: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.a[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let inv = 1.0 / self.at(row, col);
        for c in 0..width {
            self.a[row * width + c] *= inv;
        }
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let factor = self.at(r, col);
            if factor == 0.0 {
                continue;
            }
            for c in 0..width {
                let v = self.a[row * width + c];
                self.a[r * width + c] -= factor * v;
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations for the cost vector `costs` (indexed over
    /// all columns). Columns in `banned` never enter the basis.
    fn optimize(&mut self, costs: &[f64], banned: &[bool]) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            // Reduced costs priced against the current basis.
            let mut entering = None;
            for j in 0..self.cols {
                if banned[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = costs[j];
                for (r, &b) in self.basis.iter().enumerate() {
                    let cb = costs[b];
                    if cb != 0.0 {
                        rc -= cb * self.at(r, j);
                    }
                }
                if rc < -PIVOT_EPS {
                    entering = Some(j); // Bland: smallest index
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, col);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    match leaving {
                        None => leaving = Some((r, ratio)),
                        Some((best_r, best)) => {
                            // Bland tie-break: smallest basic variable index.
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[r] < self.basis[best_r])
                            {
                                leaving = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::IterationLimit)
    }

    fn objective_value(&self, costs: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| costs[b] * self.rhs(r))
            .sum()
    }
}

/// Solves the program with a phase-1/phase-2 simplex.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    if lp.objective.len() != lp.num_vars {
        return Err(LpError::Malformed(format!(
            "objective has {} coefficients for {} variables",
            lp.objective.len(),
            lp.num_vars
        )));
    }
    for c in &lp.constraints {
        if c.coeffs.len() != lp.num_vars {
            return Err(LpError::Malformed(format!(
                "constraint has {} coefficients for {} variables",
                c.coeffs.len(),
                lp.num_vars
            )));
        }
    }

    let rows = lp.constraints.len();
    let num_slack = lp
        .constraints
        .iter()
        .filter(|c| matches!(c.cmp, Cmp::Le))
        .count();
    let num_structural = lp.num_vars;
    let first_slack = num_structural;
    let first_artificial = num_structural + num_slack;
    // Worst case one artificial per row.
    let cols = first_artificial + rows;
    let width = cols + 1;

    let mut t = Tableau {
        rows,
        cols,
        a: vec![0.0; rows * width],
        basis: vec![usize::MAX; rows],
        num_structural,
    };

    let mut slack_idx = first_slack;
    let mut art_idx = first_artificial;
    for (r, c) in lp.constraints.iter().enumerate() {
        let flip = c.rhs < 0.0;
        let sign = if flip { -1.0 } else { 1.0 };
        for (j, &v) in c.coeffs.iter().enumerate() {
            *t.at_mut(r, j) = sign * v;
        }
        *t.at_mut(r, cols) = sign * c.rhs;
        match c.cmp {
            Cmp::Le => {
                *t.at_mut(r, slack_idx) = sign;
                if !flip {
                    // Slack can serve as the initial basic variable.
                    t.basis[r] = slack_idx;
                }
                slack_idx += 1;
            }
            Cmp::Eq => {}
        }
        if t.basis[r] == usize::MAX {
            *t.at_mut(r, art_idx) = 1.0;
            t.basis[r] = art_idx;
            art_idx += 1;
        }
    }

    let mut banned = vec![false; cols];
    for j in art_idx..cols {
        banned[j] = true; // unused artificial slots
    }

    // Phase 1: minimize the sum of artificials.
    if art_idx > first_artificial {
        let mut phase1 = vec![0.0; cols];
        for cost in phase1.iter_mut().take(art_idx).skip(first_artificial) {
            *cost = 1.0;
        }
        t.optimize(&phase1, &banned)?;
        if t.objective_value(&phase1) > FEAS_EPS {
            return Err(LpError::Infeasible);
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..rows {
            if t.basis[r] >= first_artificial {
                let col = (0..first_artificial).find(|&j| t.at(r, j).abs() > PIVOT_EPS);
                if let Some(col) = col {
                    t.pivot(r, col);
                }
                // Otherwise the row is redundant; the artificial stays
                // basic at level zero and its column never re-enters.
            }
        }
    }
    for j in first_artificial..cols {
        banned[j] = true;
    }

    // Phase 2: the real objective.
    let mut costs = vec![0.0; cols];
    costs[..num_structural].copy_from_slice(&lp.objective);
    t.optimize(&costs, &banned)?;

    let mut x = vec![0.0; num_structural];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < t.num_structural {
            x[b] = t.rhs(r);
        }
    }
    let objective = t.objective_value(&costs);
    Ok(LpSolution { x, objective })
}
