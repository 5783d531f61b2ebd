//! Small dense two-phase simplex for the linear subproblems of the allocation
//! solvers (box-bounded variables, a few hundred rows at most).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

impl LinearProgram {
    /// Maximize `objective · x` with every variable in `[0, +inf)` until bounds are set.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, rows: Vec::new(), lower: vec![0.0; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn bounds(&mut self, j: usize, lo: f64, hi: f64) -> &mut Self {
        self.lower[j] = lo;
        self.upper[j] = hi;
        self
    }

    pub fn constraint(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width");
        self.rows.push((coeffs, cmp, rhs));
        self
    }

    pub fn truncate_rows(&mut self, keep: usize) {
        self.rows.truncate(keep);
    }

    pub fn retain_rows(&mut self, mut keep: impl FnMut(usize) -> bool) {
        let mut idx = 0;
        self.rows.retain(|_| {
            let k = keep(idx);
            idx += 1;
            k
        });
    }

    pub fn row(&self, i: usize) -> (&[f64], Cmp, f64) {
        let (a, c, b) = &self.rows[i];
        (a, *c, *b)
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let n = self.objective.len();
        for j in 0..n {
            if !self.lower[j].is_finite() || self.upper[j] < self.lower[j] - EPS {
                return Err(Error::Solver(format!("bad bounds on LP variable {j}")));
            }
        }
        // Shift to y = x - lower, then collect rows including finite upper bounds.
        let mut rows: Vec<(Vec<f64>, Cmp, f64)> = Vec::with_capacity(self.rows.len() + n);
        for (a, cmp, b) in &self.rows {
            let shift: f64 = a.iter().zip(&self.lower).map(|(x, l)| x * l).sum();
            rows.push((a.clone(), *cmp, b - shift));
        }
        for j in 0..n {
            if self.upper[j].is_finite() {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                rows.push((a, Cmp::Le, (self.upper[j] - self.lower[j]).max(0.0)));
            }
        }
        for (a, cmp, b) in rows.iter_mut() {
            let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if scale > 0.0 {
                a.iter_mut().for_each(|x| *x /= scale);
                *b /= scale;
            } else if match cmp {
                Cmp::Le => *b < -1e-9,
                Cmp::Ge => *b > 1e-9,
                Cmp::Eq => b.abs() > 1e-9,
            } {
                return Ok(LpOutcome::Infeasible);
            }
            if *b < 0.0 {
                a.iter_mut().for_each(|x| *x = -*x);
                *b = -*b;
                *cmp = match cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
            }
        }
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Cmp::Le).count();
        let art_start = n + n_slack;
        let width = art_start + n_art;
        let mut t = Tableau::new(m, width);
        let mut basis = vec![0usize; m];
        let (mut s_col, mut a_col) = (n, art_start);
        for (i, (a, cmp, b)) in rows.iter().enumerate() {
            t.at_mut(i, ..n).copy_from_slice(a);
            *t.rhs_mut(i) = *b;
            match cmp {
                Cmp::Le => {
                    *t.get_mut(i, s_col) = 1.0;
                    basis[i] = s_col;
                    s_col += 1;
                }
                Cmp::Ge => {
                    *t.get_mut(i, s_col) = -1.0;
                    s_col += 1;
                    *t.get_mut(i, a_col) = 1.0;
                    basis[i] = a_col;
                    a_col += 1;
                }
                Cmp::Eq => {
                    *t.get_mut(i, a_col) = 1.0;
                    basis[i] = a_col;
                    a_col += 1;
                }
            }
        }

        // Phase 1: maximize -sum(artificials).
        if n_art > 0 {
            let mut cost = vec![0.0; width];
            cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
            t.set_objective(&cost, &basis);
            match t.run(&mut basis, width)? {
                Phase::Optimal => {}
                Phase::Unbounded => return Err(Error::Solver("phase-one LP unbounded".into())),
            }
            let infeas = -t.objective_value();
            let rhs_scale = (0..m).map(|i| t.rhs(i).abs()).fold(1.0, f64::max);
            if infeas > 1e-9 * rhs_scale {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive remaining artificials out of the basis.
            let mut i = 0;
            while i < t.rows {
                if basis[i] >= art_start {
                    let col = (0..art_start).find(|&j| t.get(i, j).abs() > 1e-9);
                    match col {
                        Some(j) => {
                            t.pivot(i, j);
                            basis[i] = j;
                            i += 1;
                        }
                        None => {
                            t.remove_row(i);
                            basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }

        // Phase 2 on the structural + slack columns only.
        let mut cost = vec![0.0; width];
        cost[..n].copy_from_slice(&self.objective);
        t.set_objective(&cost, &basis);
        match t.run(&mut basis, art_start)? {
            Phase::Optimal => {}
            Phase::Unbounded => return Ok(LpOutcome::Unbounded),
        }
        let mut x = self.lower.clone();
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] += t.rhs(i).max(0.0);
            }
        }
        for j in 0..n {
            if self.upper[j].is_finite() {
                x[j] = x[j].min(self.upper[j]);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

/// Row-major tableau; the last row holds reduced costs, the last column the rhs.
struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tableau {
    fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; (rows + 1) * (cols + 1)] }
    }
    fn stride(&self) -> usize {
        self.cols + 1
    }
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.stride() + j]
    }
    fn get_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let s = self.stride();
        &mut self.data[i * s + j]
    }
    fn at_mut(&mut self, i: usize, r: std::ops::RangeTo<usize>) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[i * s..i * s + r.end]
    }
    fn rhs(&self, i: usize) -> f64 {
        self.get(i, self.cols)
    }
    fn rhs_mut(&mut self, i: usize) -> &mut f64 {
        let c = self.cols;
        self.get_mut(i, c)
    }
    fn objective_value(&self) -> f64 {
        // The objective row stores -z in the rhs slot.
        -self.get(self.rows, self.cols)
    }

    fn set_objective(&mut self, cost: &[f64], basis: &[usize]) {
        let s = self.stride();
        let obj = self.rows * s;
        for j in 0..self.cols {
            self.data[obj + j] = cost[j];
        }
        self.data[obj + self.cols] = 0.0;
        for (i, &b) in basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for j in 0..=self.cols {
                    self.data[obj + j] -= cb * self.data[i * s + j];
                }
            }
        }
    }

    fn remove_row(&mut self, i: usize) {
        let s = self.stride();
        self.data.drain(i * s..(i + 1) * s);
        self.rows -= 1;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let s = self.stride();
        let p = self.data[r * s + c];
        for j in 0..s {
            self.data[r * s + j] /= p;
        }
        let prow: Vec<f64> = self.data[r * s..(r + 1) * s].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * s + c];
            if f != 0.0 {
                let row = &mut self.data[i * s..(i + 1) * s];
                for (x, pj) in row.iter_mut().zip(&prow) {
                    *x -= f * pj;
                }
                row[c] = 0.0;
            }
        }
    }

    fn run(&mut self, basis: &mut [usize], active_cols: usize) -> Result<Phase> {
        let s = self.stride();
        let obj = self.rows * s;
        let mut degenerate_streak = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate_streak > 50;
            let mut enter = None;
            let mut best = EPS;
            for j in 0..active_cols {
                let d = self.data[obj + j];
                if d > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.data[i * s + c];
                if a > 1e-12 {
                    let q = self.data[i * s + self.cols].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => q < ratio - 1e-14 || (q <= ratio + 1e-14 && basis[i] < basis[l]),
                    };
                    if better {
                        ratio = q;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(Phase::Unbounded);
            };
            if ratio <= 1e-14 {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, c);
            basis[r] = c;
        }
        Err(Error::Solver("simplex pivot limit reached".into()))
    }
}
