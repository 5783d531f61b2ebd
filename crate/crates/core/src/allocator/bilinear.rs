//! Bilinear formulation `diag(z) k_bar d <= d`, `sum d = 1`, `d >= 0`.
//!
//! For a fixed direction `d` the best admissible `z` is `z_i = d_i / (k_bar d)_i`,
//! so the problem is solved in `d` alone: maximize `sum c_i d_i / (k_bar d)_i`
//! over the polytope `z_lo_i (k_bar d)_i <= d_i <= z_max_i (k_bar d)_i`. The
//! objective is smooth but not concave; it is climbed by sequential linear
//! programming with a trust region, restarted from random vertices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problem::{AllocationProblem, AllocationResult, SolverPath, SolverStats};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{Cmp, LinearProgram, LpOutcome};

#[derive(Debug, Clone, Copy)]
pub struct BilinearOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for BilinearOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-8, restarts: 3, seed: 0x5eed }
    }
}

/// Current point of the bilinear search.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearIterate {
    pub v: Vec<f64>,
    pub d: Vec<f64>,
}

struct Reduced {
    active: Vec<usize>,
    k: DMatrix<f64>,
    zlo: DVector<f64>,
    zmax: DVector<f64>,
    c: DVector<f64>,
}

impl Reduced {
    fn new(prob: &AllocationProblem) -> Self {
        let active: Vec<usize> = (0..prob.len()).filter(|&i| prob.ceiling[i] > 0.0).collect();
        let m = active.len();
        let k = DMatrix::from_fn(m, m, |a, b| prob.k_bar[(active[a], active[b])]);
        let lo = prob.u_lower();
        let w = prob.u_weights();
        let zlo = DVector::from_iterator(m, active.iter().map(|&i| lo[i]));
        let zmax = DVector::from_iterator(m, active.iter().map(|&i| prob.ceiling[i]));
        let c = DVector::from_iterator(m, active.iter().map(|&i| w[i] * prob.ceiling[i]));
        let cmax = c.amax();
        let c = if cmax > 0.0 { c / cmax } else { c };
        // Objective in units of y = z / z_max so every term is O(1).
        Self { active, k, zlo, zmax, c }
    }

    fn z_of(&self, d: &DVector<f64>) -> DVector<f64> {
        let kd = &self.k * d;
        DVector::from_fn(d.len(), |i, _| {
            if kd[i] > 0.0 {
                (d[i] / kd[i]).clamp(self.zlo[i], self.zmax[i])
            } else {
                self.zmax[i]
            }
        })
    }

    fn value(&self, d: &DVector<f64>) -> f64 {
        let z = self.z_of(d);
        (0..d.len()).map(|i| self.c[i] * z[i] / self.zmax[i]).sum()
    }

    fn gradient(&self, d: &DVector<f64>) -> DVector<f64> {
        let m = d.len();
        let kd = &self.k * d;
        let mut g = DVector::zeros(m);
        for i in 0..m {
            if kd[i] <= 0.0 {
                continue;
            }
            let wi = self.c[i] / self.zmax[i];
            g[i] += wi / kd[i];
            let f = wi * d[i] / (kd[i] * kd[i]);
            for j in 0..m {
                g[j] -= f * self.k[(i, j)];
            }
        }
        g
    }

    /// LP over the polytope with an optional box around `center`.
    fn lp(&self, objective: &DVector<f64>, center: Option<(&DVector<f64>, f64)>) -> Result<Option<DVector<f64>>> {
        let m = self.active.len();
        let mut lp = LinearProgram::maximize(objective.iter().copied().collect());
        for j in 0..m {
            match center {
                Some((d, delta)) => lp.bounds(j, (d[j] - delta).max(0.0), (d[j] + delta).min(1.0)),
                None => lp.bounds(j, 0.0, 1.0),
            };
        }
        lp.constraint(vec![1.0; m], Cmp::Eq, 1.0);
        for i in 0..m {
            // d_i - zmax_i (K d)_i <= 0
            let mut row: Vec<f64> = (0..m).map(|j| -self.zmax[i] * self.k[(i, j)]).collect();
            row[i] += 1.0;
            lp.constraint(row, Cmp::Le, 0.0);
            // zlo_i (K d)_i - d_i <= 0
            if self.zlo[i] > 0.0 {
                let mut row: Vec<f64> = (0..m).map(|j| self.zlo[i] * self.k[(i, j)]).collect();
                row[i] -= 1.0;
                lp.constraint(row, Cmp::Le, 0.0);
            }
        }
        match lp.solve()? {
            LpOutcome::Optimal { x, .. } => {
                let d = DVector::from_vec(x);
                let s = d.sum();
                Ok(Some(d / s))
            }
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::Solver("polytope LP unbounded".into())),
        }
    }

    fn climb(&self, start: DVector<f64>, opts: &BilinearOptions) -> Result<(DVector<f64>, f64, usize, f64)> {
        let mut d = start;
        let mut fd = self.value(&d);
        let mut delta = 0.25;
        let mut last_gain = f64::INFINITY;
        let mut stall = 0;
        let mut it = 0;
        while it < opts.max_iter {
            it += 1;
            let g = self.gradient(&d);
            let Some(cand) = self.lp(&g, Some((&d, delta)))? else {
                break;
            };
            let step = &cand - &d;
            let pred = g.dot(&step);
            if pred <= 1e-15 * fd.abs().max(1.0) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let trial = &d + &step * t;
                let ft = self.value(&trial);
                if ft - fd >= 1e-4 * t * pred {
                    let gain = ft - fd;
                    last_gain = gain / fd.abs().max(1e-300);
                    d = trial;
                    fd = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            let step_len = step.amax();
            if !accepted {
                delta = 0.25 * step_len.min(delta);
                last_gain = 0.0;
            } else if t == 1.0 && step_len >= 0.99 * delta {
                delta = (2.0 * delta).min(1.0);
            } else if t < 1.0 {
                delta = (t * step_len).max(1e-16);
            }
            if last_gain < opts.tol * 1e-3 {
                stall += 1;
            } else {
                stall = 0;
            }
            if delta < 1e-13 || stall >= 8 {
                break;
            }
        }
        Ok((d, fd, it, last_gain))
    }
}

fn radius(k: &DMatrix<f64>, z: &DVector<f64>) -> Result<f64> {
    let m = z.len();
    linalg::spectral_radius(&DMatrix::from_fn(m, m, |i, j| z[i] * k[(i, j)]))
}

pub fn solve_bilinear(prob: &AllocationProblem) -> Result<AllocationResult> {
    solve_bilinear_with(prob, None, BilinearOptions::default())
}

pub fn solve_bilinear_with(
    prob: &AllocationProblem,
    init: Option<&BilinearIterate>,
    opts: BilinearOptions,
) -> Result<AllocationResult> {
    prob.validate()?;
    let red = Reduced::new(prob);
    let m = red.active.len();
    let mut u = prob.ceiling.clone();
    let trivial = SolverStats { path: SolverPath::Trivial, iterations: 0, gap: 0.0, radius: 0.0 };
    if m == 0 || radius(&red.k, &red.zmax)? <= 1.0 {
        return prob.result_from_u(&u, trivial);
    }
    if radius(&red.k, &red.zlo)? > 1.0 + 1e-10 {
        return Err(Error::Infeasible { alpha: prob.alpha });
    }
    if !is_irreducible(&red.k) {
        // The radius of a reducible matrix is the max over its diagonal blocks,
        // so the strongly connected components are independent problems.
        for comp in components(&red.k) {
            let idx: Vec<usize> = comp.iter().map(|&a| red.active[a]).collect();
            let sub = solve_bilinear_with(&restrict(prob, &idx), None, opts)?;
            for (a, &i) in idx.iter().enumerate() {
                u[i] = sub.u[a];
            }
        }
        return prob.result_from_u(&u, SolverStats { path: SolverPath::Bilinear, iterations: 0, gap: 0.0, radius: 0.0 });
    }

    let mut starts: Vec<DVector<f64>> = Vec::new();
    if let Some(it) = init {
        let d = DVector::from_iterator(m, red.active.iter().map(|&i| it.d[i].max(0.0)));
        if d.sum() > 0.0 {
            starts.push(&d / d.sum());
        }
    }
    let uniform = DVector::from_element(m, 1.0 / m as f64);
    if let Some(d) = red.lp(&red.gradient(&uniform), None)? {
        starts.push(d);
    }
    if let Ok((_, p)) = linalg::perron(&DMatrix::from_fn(m, m, |i, j| red.zlo[i] * red.k[(i, j)])) {
        if let Some(d) = red.lp(&(red.gradient(&p)), Some((&p, 0.05)))? {
            starts.push(d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let dir = DVector::from_fn(m, |_, _| rng.random::<f64>() + 0.05);
        if let Some(d) = red.lp(&dir, None)? {
            starts.push(d);
        }
    }
    if starts.is_empty() {
        return Err(Error::Infeasible { alpha: prob.alpha });
    }

    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut total_iter = 0;
    let mut last_gain = 0.0;
    for s in starts {
        let (d, f, it, gain) = red.climb(s, &opts)?;
        total_iter += it;
        if best.as_ref().is_none_or(|b| f > b.1) {
            best = Some((d, f));
            last_gain = gain;
        }
    }
    let (d, _) = best.expect("at least one start");
    let mut z = red.z_of(&d);
    // Guard against a reducible coupling or rounding pushing the radius over 1.
    if radius(&red.k, &z)? > 1.0 + 1e-12 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let zt = &red.zlo + (&z - &red.zlo) * mid;
            if radius(&red.k, &zt)? <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        z = &red.zlo + (&z - &red.zlo) * lo;
    }
    for (a, &i) in red.active.iter().enumerate() {
        u[i] = z[a];
    }
    prob.result_from_u(
        &u,
        SolverStats { path: SolverPath::Bilinear, iterations: total_iter, gap: last_gain, radius: 0.0 },
    )
}

/// Perron direction of `diag(z) k_bar` for the allocation `v`, as a warm start.
pub fn perron_iterate(prob: &AllocationProblem, v: &[f64]) -> Result<BilinearIterate> {
    let z = prob.u_from_v(v);
    let n = prob.len();
    let m = DMatrix::from_fn(n, n, |i, j| z[i] * prob.k_bar[(i, j)]);
    let (_, d) = linalg::perron(&m)?;
    Ok(BilinearIterate { v: v.to_vec(), d: d.iter().copied().collect() })
}

fn restrict(prob: &AllocationProblem, idx: &[usize]) -> AllocationProblem {
    let pick = |x: &[f64]| idx.iter().map(|&i| x[i]).collect::<Vec<f64>>();
    AllocationProblem {
        k_bar: DMatrix::from_fn(idx.len(), idx.len(), |a, b| prob.k_bar[(idx[a], idx[b])]),
        b1: pick(&prob.b1),
        s: pick(&prob.s),
        population: pick(&prob.population),
        psi: prob.psi,
        alpha: prob.alpha,
        ceiling: pick(&prob.ceiling),
        slope: pick(&prob.slope),
        cap: pick(&prob.cap),
        cost: pick(&prob.cost),
    }
}

/// Strongly connected components of the support graph of `k`.
fn components(k: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = k.nrows();
    let reach = |start: usize, forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let e = if forward { k[(i, j)] } else { k[(j, i)] };
                if e > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let (f, b) = (reach(i, true), reach(i, false));
        let comp: Vec<usize> = (0..n).filter(|&j| f[j] && b[j]).collect();
        for &j in &comp {
            assigned[j] = true;
        }
        out.push(comp);
    }
    out
}

fn is_irreducible(k: &DMatrix<f64>) -> bool {
    let n = k.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let e = if forward { k[(i, j)] } else { k[(j, i)] };
                if e > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    n == 0 || (reach(true) && reach(false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(k_bar: DMatrix<f64>, ceiling: Vec<f64>, slope: Vec<f64>, cost: Vec<f64>) -> AllocationProblem {
        let n = ceiling.len();
        AllocationProblem {
            k_bar,
            b1: vec![1.0; n],
            s: vec![1.0; n],
            population: vec![1.0; n],
            psi: 1.0,
            alpha: 0.0,
            ceiling,
            slope,
            cap: vec![1.0; n],
            cost,
        }
    }

    #[test]
    fn diagonal_case_is_exact() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]));
        let r = solve_bilinear(&problem(k, vec![10.0, 10.0], vec![10.0, 10.0], vec![1.0, 1.0])).unwrap();
        assert!((r.u[0] - 2.0).abs() < 1e-6 && (r.u[1] - 4.0).abs() < 1e-6, "{:?}", r.u);
        assert!(r.stats.radius <= 1.0 + 1e-9);
    }

    #[test]
    fn full_vaccination_is_feasible() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 0.2, 1.0]);
        let p = problem(k, vec![4.0, 4.0], vec![4.0, 4.0], vec![1.0, 1.0]);
        let r = solve_bilinear(&p).unwrap();
        assert!(r.total_doses <= 2.0 + 1e-12);
        assert!(r.stats.radius <= 1.0 + 1e-9);
    }

    #[test]
    fn reports_infeasible() {
        let k = DMatrix::identity(2, 2);
        let p = problem(k, vec![4.0, 4.0], vec![1.0, 1.0], vec![1.0, 1.0]);
        assert!(matches!(solve_bilinear(&p), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn irreducibility() {
        assert!(is_irreducible(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])));
        assert!(!is_irreducible(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])));
    }
}
