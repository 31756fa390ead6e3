//! Linear relaxation of the reduced rows, solved by a bounded-variable
//! phase-one simplex with a dense basis inverse.
//!
//! Every row `r` gets a slack `s_r = Σ x_j` bounded by the row range, so
//! the system reads `A x − s = 0`. Only feasibility matters: the simplex
//! minimizes the total bound violation of the basic variables.

use super::presolve::Row;

const FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Feasible,
    Infeasible,
    /// Iteration limit or numerical trouble; nothing can be concluded.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
}

pub(crate) struct Lp {
    m: usize,
    n: usize,
    /// Rows containing each structural column (coefficients are 1).
    cols: Vec<Vec<u32>>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    /// Variable basic in each row.
    basis: Vec<usize>,
    /// Row-major `m × m` inverse of the basis matrix.
    binv: Vec<f64>,
    /// Column preference for pricing ties; lower wins.
    priority: Vec<u32>,
    pivots_since_refactor: usize,
}

impl Lp {
    /// Relaxation over `n` structural variables with the given bounds.
    /// `priority` orders pricing ties and must have `n + rows.len()`
    /// entries.
    pub fn new(n: usize, rows: &[Row], lb: &[i64], ub: &[i64], priority: Vec<u32>) -> Self {
        let m = rows.len();
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            for &v in &row.vars {
                cols[v as usize].push(r as u32);
            }
        }
        let mut lbs: Vec<f64> = lb.iter().map(|&v| v as f64).collect();
        let mut ubs: Vec<f64> = ub.iter().map(|&v| v as f64).collect();
        lbs.extend(rows.iter().map(|r| r.lo as f64));
        ubs.extend(rows.iter().map(|r| r.hi as f64));
        let mut state = vec![State::Lower; n + m];
        for r in 0..m {
            state[n + r] = State::Basic(r);
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = -1.0;
        }
        let mut lp = Lp {
            m,
            n,
            cols,
            x: lbs.clone(),
            lb: lbs,
            ub: ubs,
            state,
            basis: (n..n + m).collect(),
            binv,
            priority,
            pivots_since_refactor: 0,
        };
        lp.recompute_basics();
        lp
    }

    pub fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    /// Changes the bounds of structural variable `j`.
    pub fn set_bounds(&mut self, j: usize, lb: i64, ub: i64) {
        let (l, u) = (lb as f64, ub as f64);
        if self.lb[j] == l && self.ub[j] == u {
            return;
        }
        self.lb[j] = l;
        self.ub[j] = u;
        match self.state[j] {
            State::Lower => self.x[j] = l,
            State::Upper => self.x[j] = u,
            State::Basic(_) => {}
        }
    }

    /// Nonbasic values times their columns, negated: the right-hand side
    /// `B x_B = −N x_N`.
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut v = vec![0.0; m];
        for j in 0..self.n {
            if !matches!(self.state[j], State::Basic(_)) && self.x[j] != 0.0 {
                for &r in &self.cols[j] {
                    v[r as usize] -= self.x[j];
                }
            }
        }
        for r in 0..m {
            let j = self.n + r;
            if !matches!(self.state[j], State::Basic(_)) {
                v[r] += self.x[j];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.x[self.basis[i]] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize, out: &mut [f64]) {
        let m = self.m;
        if j < self.n {
            out.iter_mut().for_each(|o| *o = 0.0);
            for &r in &self.cols[j] {
                let r = r as usize;
                for i in 0..m {
                    out[i] += self.binv[i * m + r];
                }
            }
        } else {
            let r = j - self.n;
            for i in 0..m {
                out[i] = -self.binv[i * m + r];
            }
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            -self.cols[j].iter().map(|&r| y[r as usize]).sum::<f64>()
        } else {
            y[j - self.n]
        }
    }

    /// Rebuilds the inverse from the basis columns by Gauss-Jordan
    /// elimination. False if the basis is singular.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut b = vec![0.0f64; m * m];
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                for &r in &self.cols[j] {
                    b[r as usize * m + i] = 1.0;
                }
            } else {
                b[(j - self.n) * m + i] = -1.0;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b2| b[a * m + c].abs().total_cmp(&b[b2 * m + c].abs()))
                .unwrap();
            if b[p * m + c].abs() < 1e-12 {
                return false;
            }
            if p != c {
                for k in 0..m {
                    b.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                let f = b[r * m + c];
                if r != c && f != 0.0 {
                    for k in 0..m {
                        b[r * m + k] -= f * b[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        true
    }

    fn reset_to_slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.state[j] = State::Lower;
            self.x[j] = self.lb[j];
        }
        for r in 0..m {
            self.state[n + r] = State::Basic(r);
            self.basis[r] = n + r;
        }
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..m {
            self.binv[r * m + r] = -1.0;
        }
        self.pivots_since_refactor = 0;
    }

    fn pivot(&mut self, row: usize, alpha: &[f64]) {
        let m = self.m;
        let a = alpha[row];
        for k in 0..m {
            self.binv[row * m + k] /= a;
        }
        let (before, rest) = self.binv.split_at_mut(row * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, chunk) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let i = if i < row { i } else { i + 1 };
            let f = alpha[i];
            if f != 0.0 {
                for (c, p) in chunk.iter_mut().zip(prow.iter()) {
                    *c -= f * p;
                }
            }
        }
        self.pivots_since_refactor += 1;
    }

    /// Phase-one simplex from the current basis.
    pub fn solve(&mut self, max_iter: usize) -> LpStatus {
        let (n, m) = (self.n, self.m);
        self.recompute_basics();
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            // Infeasibility costs of the basic variables.
            let mut any = false;
            y.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                let j = self.basis[i];
                let c = if self.x[j] < self.lb[j] - FEAS_TOL {
                    -1.0
                } else if self.x[j] > self.ub[j] + FEAS_TOL {
                    1.0
                } else {
                    continue;
                };
                any = true;
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    y[k] += c * row[k];
                }
            }
            if !any {
                return LpStatus::Feasible;
            }

            // Pricing: steepest reduced cost, Bland's rule when stalling.
            let bland = degenerate > 50;
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..n + m {
                let dir = match self.state[j] {
                    State::Basic(_) => continue,
                    _ if self.ub[j] - self.lb[j] < FEAS_TOL => continue,
                    State::Lower => 1.0,
                    State::Upper => -1.0,
                };
                let d = self.reduced_cost(j, &y) * dir;
                if d >= -FEAS_TOL {
                    continue;
                }
                let better = match enter {
                    None => true,
                    Some(_) if bland => false,
                    Some((bj, bd, _)) => d < bd - 1e-12 || (d <= bd + 1e-12 && self.priority[j] < self.priority[bj]),
                };
                if better {
                    enter = Some((j, d, dir));
                }
            }
            let Some((q, _, dir)) = enter else {
                return LpStatus::Infeasible;
            };

            self.ftran(q, &mut alpha);
            // Ratio test. Basic i moves at rate −α_i·dir per unit step.
            let mut theta = self.ub[q] - self.lb[q];
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let rate = -alpha[i] * dir;
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.basis[i];
                let (x, l, u) = (self.x[j], self.lb[j], self.ub[j]);
                let (limit, bound) = if rate > 0.0 {
                    if x < l - FEAS_TOL {
                        ((l - x) / rate, l)
                    } else if x <= u + FEAS_TOL {
                        ((u - x).max(0.0) / rate, u)
                    } else {
                        continue;
                    }
                } else if x > u + FEAS_TOL {
                    ((x - u) / -rate, u)
                } else if x >= l - FEAS_TOL {
                    ((x - l).max(0.0) / -rate, l)
                } else {
                    continue;
                };
                let better = limit < theta - 1e-12
                    || (limit <= theta + 1e-12
                        && leave.is_some_and(|(li, _)| {
                            if bland {
                                j < self.basis[li]
                            } else {
                                alpha[i].abs() > alpha[li].abs()
                            }
                        }));
                if better {
                    theta = limit;
                    leave = Some((i, bound));
                }
            }
            degenerate = if theta < 1e-12 { degenerate + 1 } else { 0 };

            self.x[q] += dir * theta;
            for i in 0..m {
                let j = self.basis[i];
                self.x[j] -= alpha[i] * dir * theta;
            }
            match leave {
                None => {
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                }
                Some((row, bound)) => {
                    let out = self.basis[row];
                    self.state[out] = if bound == self.lb[out] {
                        State::Lower
                    } else {
                        State::Upper
                    };
                    self.x[out] = bound;
                    self.pivot(row, &alpha);
                    self.basis[row] = q;
                    self.state[q] = State::Basic(row);
                    if self.pivots_since_refactor >= REFACTOR_EVERY {
                        if !self.refactor() {
                            self.reset_to_slack_basis();
                        }
                        self.recompute_basics();
                    }
                }
            }
        }
        LpStatus::Unknown
    }
}
