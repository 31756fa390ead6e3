//! Problem reduction applied before search.
//!
//! Variables occurring in a single constraint are taken out and the
//! constraint becomes a range on the remaining variables; their values are
//! filled in once the rest is assigned. Wide uncovered cells otherwise make
//! bounds propagation crawl one unit at a time.

use rand::seq::SliceRandom;
use rand::Rng;

use super::FeasibilityProblem;

/// `lo ≤ Σ vars ≤ hi`, variables sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Row {
    pub vars: Vec<u32>,
    pub lo: i64,
    pub hi: i64,
}

/// Variables taken out of one original constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Eliminated {
    pub target: i64,
    pub kept: Vec<u32>,
    pub vars: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Reduced {
    pub rows: Vec<Row>,
    pub eliminated: Vec<Eliminated>,
    /// Variables in no constraint.
    pub free: Vec<u32>,
    /// Whether the search must branch on each variable.
    pub searched: Vec<bool>,
}

pub(crate) fn reduce(p: &FeasibilityProblem) -> Reduced {
    let n = p.variable_count();
    let mut count = vec![0usize; n];
    for c in &p.constraints {
        for &v in &c.vars {
            count[v as usize] += 1;
        }
    }
    let open = |v: usize| p.lower[v] < p.upper[v];
    let searched: Vec<bool> = (0..n).map(|v| count[v] > 1 || (count[v] == 1 && !open(v))).collect();
    let free = (0..n as u32).filter(|&v| count[v as usize] == 0).collect();
    let mut rows = Vec::with_capacity(p.constraints.len());
    let mut eliminated = Vec::new();
    for c in &p.constraints {
        let (mut kept, mut out): (Vec<u32>, Vec<u32>) = c.vars.iter().partition(|&&v| searched[v as usize]);
        kept.sort_unstable();
        out.sort_unstable();
        let lo_sum: i64 = out.iter().map(|&v| i64::from(p.lower[v as usize])).sum();
        let hi_sum: i64 = out.iter().map(|&v| i64::from(p.upper[v as usize])).sum();
        rows.push(Row {
            vars: kept.clone(),
            lo: c.target - hi_sum,
            hi: c.target - lo_sum,
        });
        if !out.is_empty() {
            eliminated.push(Eliminated {
                target: c.target,
                kept,
                vars: out,
            });
        }
    }
    Reduced {
        rows,
        eliminated,
        free,
        searched,
    }
}

/// Fills eliminated and free variables of `values` given the searched
/// ones. Starts from the hint where one is given and spreads the remainder
/// uniformly at random. False when some residual cannot be met.
pub(crate) fn fill<R: Rng>(
    red: &Reduced,
    p: &FeasibilityProblem,
    values: &mut [i64],
    hint: Option<&[u32]>,
    rng: &mut R,
) -> bool {
    let start = |v: usize| {
        let h = hint.and_then(|h| h.get(v)).map_or(p.lower[v], |&h| h);
        i64::from(h.clamp(p.lower[v], p.upper[v]))
    };
    for &v in &red.free {
        values[v as usize] = start(v as usize);
    }
    for e in &red.eliminated {
        let residual = e.target - e.kept.iter().map(|&v| values[v as usize]).sum::<i64>();
        let mut total = 0;
        for &v in &e.vars {
            values[v as usize] = start(v as usize);
            total += values[v as usize];
        }
        let mut order = e.vars.clone();
        while total != residual {
            let up = total < residual;
            order.retain(|&v| {
                let v = v as usize;
                if up {
                    values[v] < i64::from(p.upper[v])
                } else {
                    values[v] > i64::from(p.lower[v])
                }
            });
            let Some(&v) = order.choose(rng) else {
                return false;
            };
            let v = v as usize;
            if up {
                values[v] += 1;
                total += 1;
            } else {
                values[v] -= 1;
                total -= 1;
            }
        }
    }
    true
}
