//! Dense two-phase tableau simplex.
//!
//! Solves `min c'x` subject to linear rows and `x >= 0`. Intended for the
//! small, dense problems the estimator produces; there is no sparse LU or
//! basis reuse between solves.

use crate::error::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            relation: Relation::Ge,
            rhs,
        }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            relation: Relation::Eq,
            rhs,
        }
    }
}

/// `min objective'x` subject to `constraints`, `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Lowest-index entering and leaving variables. Never cycles.
    #[default]
    Bland,
    /// Most negative reduced cost; falls back to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub rule: PivotRule,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            tolerance: 1e-9,
            rule: PivotRule::Bland,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per input constraint, such that
    /// `objective == sum(duals[i] * rhs[i])` at an optimum.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

struct Tableau {
    rows: usize,
    cols: usize,
    // Row-major, `cols + 1` entries per row; the last entry is the rhs.
    a: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    opts: SimplexOptions,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let p = self.a[pr * w + pc];
        for v in &mut self.a[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(&mut self.obj);
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Runs the simplex loop on the current objective row. Columns with
    /// `allowed[c] == false` never enter.
    fn optimize(&mut self, allowed: &[bool]) -> Result<(), LpError> {
        let tol = self.opts.tolerance;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(LpError::IterationLimit {
                    iterations: self.iterations,
                });
            }
            let use_bland = match self.opts.rule {
                PivotRule::Bland => true,
                PivotRule::Dantzig => degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND,
            };
            let entering = if use_bland {
                (0..self.cols).find(|&c| allowed[c] && self.obj[c] < -tol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..self.cols {
                    let d = self.obj[c];
                    if allowed[c] && d < -tol && best.is_none_or(|(_, b)| d < b) {
                        best = Some((c, d));
                    }
                }
                best.map(|(c, _)| c)
            };
            let Some(pc) = entering else {
                return Ok(());
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let coef = self.at(r, pc);
                if coef > tol {
                    let ratio = self.rhs(r) / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - tol
                                || (ratio <= bratio + tol && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio.abs() <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
        }
    }

    fn objective_value(&self) -> f64 {
        -self.obj[self.cols]
    }
}

/// Solves `lp` with the two-phase method.
pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    let nv = lp.objective.len();
    let m = lp.constraints.len();
    for c in &lp.constraints {
        if c.coeffs.len() != nv {
            return Err(LpError::Shape {
                expected: nv,
                got: c.coeffs.len(),
            });
        }
    }

    // Flip rows with negative rhs so the initial basis is non-negative.
    let mut sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut r = c.relation;
        if c.rhs < 0.0 {
            sign[i] = -1.0;
            r = match r {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rel.push(r);
    }

    // Column layout: structural | slack/surplus | artificial.
    let mut slack_col = vec![None; m];
    let mut art_col = vec![None; m];
    let mut next = nv;
    for i in 0..m {
        if rel[i] != Relation::Eq {
            slack_col[i] = Some(next);
            next += 1;
        }
    }
    let first_art = next;
    for i in 0..m {
        if rel[i] != Relation::Le {
            art_col[i] = Some(next);
            next += 1;
        }
    }
    let cols = next;
    let w = cols + 1;

    let mut a = vec![0.0; m * w];
    let mut basis = vec![0; m];
    for (i, c) in lp.constraints.iter().enumerate() {
        let row = &mut a[i * w..(i + 1) * w];
        for (j, &v) in c.coeffs.iter().enumerate() {
            row[j] = sign[i] * v;
        }
        row[cols] = sign[i] * c.rhs;
        if let Some(s) = slack_col[i] {
            row[s] = if rel[i] == Relation::Le { 1.0 } else { -1.0 };
        }
        if let Some(ac) = art_col[i] {
            row[ac] = 1.0;
            basis[i] = ac;
        } else {
            basis[i] = slack_col[i].expect("le rows carry a slack");
        }
    }

    let mut tab = Tableau {
        rows: m,
        cols,
        a,
        obj: vec![0.0; w],
        basis,
        iterations: 0,
        opts: *opts,
    };

    // Phase 1: minimize the sum of artificials.
    if first_art < cols {
        for i in 0..m {
            if art_col[i].is_some() {
                for c in 0..w {
                    tab.obj[c] -= tab.a[i * w + c];
                }
            }
        }
        for ac in first_art..cols {
            tab.obj[ac] = 0.0;
        }
        let allowed = vec![true; cols];
        tab.optimize(&allowed)?;
        let infeas = tab.objective_value();
        let scale = 1.0
            + lp.constraints
                .iter()
                .map(|c| c.rhs.abs())
                .fold(0.0, f64::max);
        if infeas > opts.tolerance * scale * 10.0 {
            return Err(LpError::Infeasible);
        }
        // Drive remaining artificials out of the basis.
        for r in 0..m {
            if tab.basis[r] >= first_art {
                if let Some(pc) = (0..first_art).find(|&c| tab.at(r, c).abs() > opts.tolerance) {
                    tab.pivot(r, pc);
                }
                // Otherwise the row is redundant; its artificial stays basic at zero.
            }
        }
    }

    // Phase 2.
    tab.obj.iter_mut().for_each(|v| *v = 0.0);
    tab.obj[..nv].copy_from_slice(&lp.objective);
    for r in 0..m {
        let b = tab.basis[r];
        let cb = if b < nv { lp.objective[b] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..w {
                tab.obj[c] -= cb * tab.a[r * w + c];
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|c| c < first_art).collect();
    tab.optimize(&allowed)?;

    let mut x = vec![0.0; nv];
    for r in 0..m {
        let b = tab.basis[r];
        if b < nv {
            x[b] = tab.rhs(r);
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    // Reduced cost of a unit column e_i equals -y_i for the flipped row.
    let duals = (0..m)
        .map(|i| {
            let y = if let Some(s) = slack_col[i] {
                let d = tab.obj[s];
                if rel[i] == Relation::Le {
                    -d
                } else {
                    d
                }
            } else {
                -tab.obj[art_col[i].expect("eq rows carry an artificial")]
            };
            sign[i] * y
        })
        .collect();

    Ok(LpSolution {
        x,
        objective,
        duals,
        iterations: tab.iterations,
    })
}
