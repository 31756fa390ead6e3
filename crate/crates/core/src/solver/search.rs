//! Bounds propagation plus seeded depth-first search, with a linear
//! relaxation checked at every node to prune and to order values.

use std::collections::VecDeque;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use std::rc::Rc;

use super::lp::{Lp, LpStatus};
use super::presolve::{fill, reduce, Reduced, Row};
use super::{Assignment, FeasibilityProblem, SolverLimits};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Feasible(Assignment),
    Infeasible,
    /// A node or time limit was hit before the search finished.
    Unknown,
}

impl SolveOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveOutcome::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, SolveOutcome::Infeasible)
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            SolveOutcome::Feasible(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
}

/// Finds a feasible assignment, proves there is none, or gives up at the
/// limits. Branching order depends on `seed`, so different seeds tend to
/// reach different solutions. Values from `hint` are tried first.
pub fn solve(p: &FeasibilityProblem, seed: u64, hint: Option<&[u32]>, limits: &SolverLimits) -> SolveOutcome {
    solve_with_stats(p, seed, hint, limits).0
}

pub fn solve_with_stats(
    p: &FeasibilityProblem,
    seed: u64,
    hint: Option<&[u32]>,
    limits: &SolverLimits,
) -> (SolveOutcome, SolveStats) {
    let mut s = Search::new(p, seed, hint, limits);
    let out = s.run();
    if let SolveOutcome::Feasible(a) = &out {
        debug_assert!(p.is_satisfied_by(a));
    }
    (out, SolveStats { nodes: s.nodes })
}

/// Result of repeated solving.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Enumeration {
    /// Feasible solutions in discovery order (not deduplicated).
    pub solutions: Vec<Assignment>,
    /// The problem was proven infeasible.
    pub infeasible: bool,
    /// Runs that ended at a limit.
    pub unknown: usize,
}

/// Up to `k` feasible solutions from independently seeded runs.
///
/// Stops at the first infeasibility proof: no later run can succeed.
pub fn enumerate_solutions(
    p: &FeasibilityProblem,
    k: usize,
    seed: u64,
    hint: Option<&[u32]>,
    limits: &SolverLimits,
) -> Enumeration {
    let mut out = Enumeration::default();
    for i in 0..k {
        match solve(p, seed::derive(seed, &[i as u64]), hint, limits) {
            SolveOutcome::Feasible(a) => out.solutions.push(a),
            SolveOutcome::Infeasible => {
                out.infeasible = true;
                break;
            }
            SolveOutcome::Unknown => out.unknown += 1,
        }
    }
    out
}

struct Frame {
    var: usize,
    values: Vec<i64>,
    next: usize,
    mark: usize,
}

struct Search<'a> {
    p: &'a FeasibilityProblem,
    red: Reduced,
    // Reduced rows, variables sorted by initial width.
    rows: Rc<Vec<Row>>,
    lb: Vec<i64>,
    ub: Vec<i64>,
    sum_lb: Vec<i64>,
    sum_ub: Vec<i64>,
    // CSR: rows containing each variable.
    var_off: Vec<usize>,
    var_rows: Vec<u32>,
    trail: Vec<(u32, i64, i64)>,
    queue: VecDeque<u32>,
    queued: Vec<bool>,
    // Initial domain widths. Row variables are sorted by them, widest
    // first, so a scan can stop once the slack covers the width.
    width0: Vec<i64>,
    // Conflicts per variable, summed over its rows.
    wdeg: Vec<u64>,
    failures: u64,
    priority: Vec<u32>,
    initial_order: Vec<u32>,
    // Relaxation over the reduced rows; `lp_valid` when its last solve
    // reached a feasible point for the current bounds.
    lp: Lp,
    lp_valid: bool,
    hint: Option<&'a [u32]>,
    rng: seed::Rng,
    limits: SolverLimits,
    start: Instant,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn new(p: &'a FeasibilityProblem, seed: u64, hint: Option<&'a [u32]>, limits: &SolverLimits) -> Self {
        let n = p.variable_count();
        let red = reduce(p);
        let mut rows = red.rows.clone();
        let lb: Vec<i64> = p.lower.iter().map(|&v| i64::from(v)).collect();
        let ub: Vec<i64> = p.upper.iter().map(|&v| i64::from(v)).collect();
        let width0: Vec<i64> = lb.iter().zip(&ub).map(|(l, u)| u - l).collect();
        for r in &mut rows {
            r.vars.sort_by_key(|&v| std::cmp::Reverse(width0[v as usize]));
        }
        let m = rows.len();

        let mut var_off = vec![0usize; n + 1];
        for r in &rows {
            for &v in &r.vars {
                var_off[v as usize + 1] += 1;
            }
        }
        for i in 0..n {
            var_off[i + 1] += var_off[i];
        }
        let mut fill_at = var_off.clone();
        let mut var_rows = vec![0u32; var_off[n]];
        let mut sum_lb = vec![0i64; m];
        let mut sum_ub = vec![0i64; m];
        for (ri, r) in rows.iter().enumerate() {
            for &v in &r.vars {
                let v = v as usize;
                var_rows[fill_at[v]] = ri as u32;
                fill_at[v] += 1;
                sum_lb[ri] += lb[v];
                sum_ub[ri] += ub[v];
            }
        }

        let wdeg = (0..n).map(|v| (var_off[v + 1] - var_off[v]) as u64).collect();
        let mut rng = seed::rng(seed);
        let mut priority: Vec<u32> = (0..n as u32).collect();
        priority.shuffle(&mut rng);
        let mut initial_order: Vec<u32> = (0..m as u32).collect();
        initial_order.shuffle(&mut rng);
        let mut lp_priority: Vec<u32> = (0..(n + red.rows.len()) as u32).collect();
        lp_priority.shuffle(&mut rng);
        let lp = Lp::new(n, &red.rows, &lb, &ub, lp_priority);

        Search {
            p,
            red,
            rows: Rc::new(rows),
            lb,
            ub,
            sum_lb,
            sum_ub,
            var_off,
            var_rows,
            trail: Vec::new(),
            queue: VecDeque::new(),
            queued: vec![false; m],
            width0,
            wdeg,
            failures: 0,
            priority,
            initial_order,
            lp,
            lp_valid: false,
            hint,
            rng,
            limits: *limits,
            start: Instant::now(),
            nodes: 0,
        }
    }

    fn enqueue(&mut self, r: u32) {
        if !self.queued[r as usize] {
            self.queued[r as usize] = true;
            self.queue.push_back(r);
        }
    }

    fn set_bounds(&mut self, v: usize, nl: i64, nu: i64) {
        let (ol, ou) = (self.lb[v], self.ub[v]);
        if ol == nl && ou == nu {
            return;
        }
        self.trail.push((v as u32, ol, ou));
        self.lb[v] = nl;
        self.ub[v] = nu;
        for k in self.var_off[v]..self.var_off[v + 1] {
            let r = self.var_rows[k];
            self.sum_lb[r as usize] += nl - ol;
            self.sum_ub[r as usize] += nu - ou;
            self.enqueue(r);
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, ol, ou) = self.trail.pop().unwrap();
            let v = v as usize;
            let (cl, cu) = (self.lb[v], self.ub[v]);
            for k in self.var_off[v]..self.var_off[v + 1] {
                let r = self.var_rows[k] as usize;
                self.sum_lb[r] += ol - cl;
                self.sum_ub[r] += ou - cu;
            }
            self.lb[v] = ol;
            self.ub[v] = ou;
        }
    }

    fn conflict(&mut self, r: usize) {
        while let Some(q) = self.queue.pop_front() {
            self.queued[q as usize] = false;
        }
        self.failures += 1;
        let rows = Rc::clone(&self.rows);
        for &v in &rows[r].vars {
            self.wdeg[v as usize] += 1;
        }
    }

    /// Runs the queue to a fixpoint; false on a wipe-out.
    fn propagate(&mut self) -> bool {
        let rows = Rc::clone(&self.rows);
        while let Some(r) = self.queue.pop_front() {
            let ri = r as usize;
            self.queued[ri] = false;
            let (lo, hi) = (rows[ri].lo, rows[ri].hi);
            if self.sum_lb[ri] > hi || self.sum_ub[ri] < lo {
                self.conflict(ri);
                return false;
            }
            for &v in &rows[ri].vars {
                let v = v as usize;
                let (room_up, room_down) = (hi - self.sum_lb[ri], self.sum_ub[ri] - lo);
                if self.width0[v] <= room_up.min(room_down) {
                    break;
                }
                let (l, u) = (self.lb[v], self.ub[v]);
                if l == u {
                    continue;
                }
                let nu = u.min(l + room_up);
                let nl = l.max(u - room_down);
                if nl > nu {
                    self.conflict(ri);
                    return false;
                }
                self.set_bounds(v, nl, nu);
            }
        }
        true
    }

    /// Relaxation value of `v` when it is fractional.
    fn fractional(&self, v: usize) -> Option<f64> {
        if !self.lp_valid {
            return None;
        }
        let x = self.lp.value(v).clamp(self.lb[v] as f64, self.ub[v] as f64);
        ((x - x.round()).abs() > INT_TOL).then_some(x)
    }

    /// Open searched variable with the smallest domain per conflict weight,
    /// among those the relaxation leaves fractional if there are any;
    /// seeded tie-break.
    fn select(&self) -> Option<usize> {
        let mut best: Option<(bool, u64, u64, u32, usize)> = None;
        for v in 0..self.lb.len() {
            let size = (self.ub[v] - self.lb[v]) as u64;
            if size == 0 || !self.red.searched[v] {
                continue;
            }
            let frac = self.fractional(v).is_some();
            let w = self.wdeg[v].max(1);
            let better = match best {
                None => true,
                Some((bf, bs, bw, bp, _)) => {
                    let (a, b) = ((size + 1) * bw, (bs + 1) * w);
                    (frac && !bf) || (frac == bf && (a < b || (a == b && self.priority[v] < bp)))
                }
            };
            if better {
                best = Some((frac, size, w, self.priority[v], v));
            }
        }
        best.map(|b| b.4)
    }

    /// Whether the relaxation point is integral on every open variable.
    fn relaxation_integral(&self) -> bool {
        self.lp_valid
            && (0..self.lb.len())
                .all(|v| !self.red.searched[v] || self.lb[v] == self.ub[v] || self.fractional(v).is_none())
    }

    /// Syncs the relaxation with the current bounds and solves it. False
    /// when it is infeasible.
    fn relax(&mut self) -> bool {
        for v in 0..self.lb.len() {
            if self.red.searched[v] {
                self.lp.set_bounds(v, self.lb[v], self.ub[v]);
            }
        }
        match self.lp.solve(LP_MAX_ITER) {
            LpStatus::Feasible => {
                self.lp_valid = true;
                true
            }
            LpStatus::Unknown => {
                self.lp_valid = false;
                true
            }
            LpStatus::Infeasible => {
                self.lp_valid = false;
                self.failures += 1;
                false
            }
        }
    }

    /// Fixes every open variable to its integral relaxation value. True
    /// when that completes the search; otherwise the state is restored.
    fn commit_relaxation(&mut self) -> bool {
        let mark = self.trail.len();
        for v in 0..self.lb.len() {
            if self.red.searched[v] && self.lb[v] < self.ub[v] {
                let x = self.lp.value(v).round() as i64;
                self.set_bounds(v, x, x);
            }
        }
        if self.propagate() {
            return true;
        }
        self.undo(mark);
        false
    }

    /// Hint first, then the relaxation value rounded either way (the
    /// nearer side more likely first), then the lower bound, then the rest
    /// shuffled.
    fn candidates(&mut self, v: usize) -> Vec<i64> {
        let (l, u) = (self.lb[v], self.ub[v]);
        let mut out = Vec::with_capacity((u - l + 1) as usize);
        if let Some(h) = self.hint.and_then(|h| h.get(v)).map(|&h| i64::from(h)) {
            if (l..=u).contains(&h) {
                out.push(h);
            }
        }
        if self.lp_valid {
            let x = self.lp.value(v).clamp(l as f64, u as f64);
            let (down, up) = (x.floor() as i64, x.ceil() as i64);
            let pair = if self.rng.gen_bool((x - x.floor()).clamp(0.0, 1.0)) {
                [up, down]
            } else {
                [down, up]
            };
            for c in pair {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        if !out.contains(&l) {
            out.push(l);
        }
        let mut rest: Vec<i64> = (l..=u).filter(|x| !out.contains(x)).collect();
        rest.shuffle(&mut self.rng);
        out.extend(rest);
        out
    }

    fn out_of_budget(&self) -> bool {
        self.nodes > self.limits.max_nodes || (self.nodes % 256 == 0 && self.start.elapsed() > self.limits.max_time)
    }

    fn run(&mut self) -> SolveOutcome {
        if self.lb.iter().zip(&self.ub).any(|(l, u)| l > u) {
            return SolveOutcome::Infeasible;
        }
        for i in 0..self.initial_order.len() {
            let r = self.initial_order[i];
            self.enqueue(r);
        }
        if !self.propagate() || !self.relax() {
            return SolveOutcome::Infeasible;
        }
        let root = self.trail.len();
        for run in 1.. {
            let cutoff = self.failures + luby(run) * RESTART_FAILURES;
            if let Some(out) = self.dive(cutoff) {
                return out;
            }
            self.undo(root);
            self.relax();
        }
        unreachable!()
    }

    /// Depth-first search from the root state. `None` when `cutoff`
    /// failures are reached first.
    fn dive(&mut self, cutoff: u64) -> Option<SolveOutcome> {
        let mut stack: Vec<Frame> = Vec::new();
        loop {
            if self.hint.is_none() && self.relaxation_integral() && self.select().is_some() {
                self.nodes += 1;
                self.commit_relaxation();
            }
            let Some(var) = self.select() else {
                let mut values = self.lb.clone();
                if fill(&self.red, self.p, &mut values, self.hint, &mut self.rng) {
                    let values = values.into_iter().map(|v| v as u32).collect();
                    return Some(SolveOutcome::Feasible(Assignment { values }));
                }
                // Row ranges guarantee the fill; reaching here is a bug.
                unreachable!("eliminated variables could not be filled");
            };
            let values = self.candidates(var);
            stack.push(Frame {
                var,
                values,
                next: 0,
                mark: self.trail.len(),
            });
            loop {
                let Some(f) = stack.last_mut() else {
                    return Some(SolveOutcome::Infeasible);
                };
                let mark = f.mark;
                if f.next == f.values.len() {
                    stack.pop();
                    self.undo(mark);
                    continue;
                }
                let (var, val) = (f.var, f.values[f.next]);
                f.next += 1;
                self.undo(mark);
                self.nodes += 1;
                if self.out_of_budget() {
                    return Some(SolveOutcome::Unknown);
                }
                if self.failures >= cutoff {
                    return None;
                }
                self.set_bounds(var, val, val);
                if self.propagate() {
                    if self.relax() {
                        break;
                    }
                    self.wdeg[var] += 1;
                }
            }
        }
    }
}

/// Simplex iterations per relaxation solve.
const LP_MAX_ITER: usize = 5000;

/// Distance from an integer below which a relaxation value counts as one.
const INT_TOL: f64 = 1e-6;

/// Failures allowed in the first run; later runs scale by the Luby sequence.
const RESTART_FAILURES: u64 = 100;

/// The Luby sequence 1, 1, 2, 1, 1, 2, 4, ... (1-based).
fn luby(i: u64) -> u64 {
    let mut k = 1;
    while (1u64 << k) - 1 < i {
        k += 1;
    }
    if (1u64 << k) - 1 == i {
        1 << (k - 1)
    } else {
        luby(i - ((1u64 << (k - 1)) - 1))
    }
}
