//! The deterministic module: find a feasible sensitive value (or membership)
//! for the target, then try to rule out every alternative.

use serde::{Deserialize, Serialize};

use crate::aggregates::{AggregateQuery, QueryRelease, ValueSet};
use crate::baselines::{rap_reconstruct_with, RapConfig};
use crate::error::Result;
use crate::model::{Code, Record, TargetUser};
use crate::seed;
use crate::solver::{build_problem, solve, tighten_domains, FeasibilityProblem, SolveOutcome, SolverLimits};

/// How the candidate value is found.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finder {
    #[default]
    Solver,
    /// Read off one RAP-style synthetic reconstruction.
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeterministicOptions {
    pub finder: Finder,
    /// Require exactly one record with the target's known values.
    pub uniqueness: bool,
    /// Prove the candidate is the only feasible value.
    pub verification: bool,
    pub limits: SolverLimits,
    pub rap: RapConfig,
}

impl Default for DeterministicOptions {
    fn default() -> Self {
        DeterministicOptions {
            finder: Finder::Solver,
            uniqueness: true,
            verification: true,
            limits: SolverLimits::default(),
            rap: RapConfig::default(),
        }
    }
}

/// Candidate from the finder and whether it survived verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probe<T> {
    pub found: Option<T>,
    pub verified: bool,
}

impl<T> Probe<T> {
    fn none() -> Self {
        Probe {
            found: None,
            verified: false,
        }
    }
}

/// The release's feasibility problem with tightened domains.
pub fn prepare_problem(rel: &QueryRelease) -> Result<FeasibilityProblem> {
    Ok(tighten_domains(&build_problem(rel)?, rel))
}

/// The target's sensitive value when every dataset consistent with the
/// release (and with the target being unique on its known values) agrees
/// on it. `None` when two values are feasible, nothing is, or a search
/// limit was hit.
pub fn deterministic_aia(
    rel: &QueryRelease,
    target: &TargetUser,
    limits: &SolverLimits,
    seed: u64,
) -> Result<Option<Code>> {
    let opts = DeterministicOptions {
        limits: *limits,
        ..Default::default()
    };
    let base = prepare_problem(rel)?;
    let probe = probe_aia(&base, rel, target, &opts, seed)?;
    Ok(probe.found.filter(|_| probe.verified))
}

/// Finder and optional verification against a prepared base problem.
pub fn probe_aia(
    base: &FeasibilityProblem,
    rel: &QueryRelease,
    target: &TargetUser,
    opts: &DeterministicOptions,
    seed: u64,
) -> Result<Probe<Code>> {
    let schema = base.schema();
    let k = schema.sensitive_size();
    let first = schema.completion_cell(&target.partial, 0);
    let completions: Vec<u32> = (first..first + k).map(|c| c as u32).collect();
    let p = if opts.uniqueness {
        base.add_sum_constraint(completions.clone(), 1)?
    } else {
        base.clone()
    };

    let counts: Vec<u32> = match opts.finder {
        Finder::Solver => match solve(&p, seed::derive(seed, &[0]), None, &opts.limits) {
            SolveOutcome::Feasible(a) => completions.iter().map(|&v| a.get(v as usize)).collect(),
            _ => return Ok(Probe::none()),
        },
        Finder::Synthetic => {
            let mut queries = rel.queries.clone();
            let mut targets: Vec<f64> = rel.answers.iter().map(|&a| a as f64).collect();
            if opts.uniqueness {
                let mut subsets: Vec<ValueSet> = target.partial.values().iter().map(|&v| ValueSet::single(v)).collect();
                subsets.push(ValueSet::All);
                queries.push(AggregateQuery::new(subsets));
                targets.push(1.0);
            }
            let recon = rap_reconstruct_with(
                rel.schema.clone(),
                rel.dataset_size,
                &queries,
                &targets,
                1,
                None,
                seed::derive(seed, &[0]),
                &opts.rap,
            );
            let Some(d) = recon.datasets.first() else {
                return Ok(Probe::none());
            };
            let mut counts = vec![0u32; k];
            for r in d.records() {
                if target.partial.hamming(r.values()) == 0 {
                    counts[r.sensitive() as usize] += 1;
                }
            }
            counts
        }
    };
    // Most frequent completion, lowest value on ties.
    let mut best = 0;
    for v in 1..k {
        if counts[v] > counts[best] {
            best = v;
        }
    }
    if counts[best] == 0 {
        return Ok(Probe::none());
    }
    let found = best as Code;
    if !opts.verification {
        return Ok(Probe {
            found: Some(found),
            verified: false,
        });
    }
    let null = p.fix_variable(completions[best] as usize, 0)?;
    let verified = solve(&null, seed::derive(seed, &[1]), None, &opts.limits).is_infeasible();
    Ok(Probe {
        found: Some(found),
        verified,
    })
}

/// Membership of the full target record when every consistent dataset
/// agrees on it: 1 when it always appears, 0 when it never does.
pub fn deterministic_mia(rel: &QueryRelease, target: &Record, limits: &SolverLimits, seed: u64) -> Result<Option<u8>> {
    let base = prepare_problem(rel)?;
    let probe = probe_mia(&base, target, true, limits, seed)?;
    Ok(probe.found.filter(|_| probe.verified))
}

/// Tentative membership from one solution, then a search for a solution
/// with the opposite membership. Multiplicities above 1 count as members,
/// so the opposite of "absent" is `x ≥ 1`.
pub fn probe_mia(
    base: &FeasibilityProblem,
    target: &Record,
    verification: bool,
    limits: &SolverLimits,
    seed: u64,
) -> Result<Probe<u8>> {
    let var = base.schema().cell_of(target.values());
    let found = match solve(base, seed::derive(seed, &[0]), None, limits) {
        SolveOutcome::Feasible(a) => u8::from(a.get(var) > 0),
        _ => return Ok(Probe::none()),
    };
    if !verification {
        return Ok(Probe {
            found: Some(found),
            verified: false,
        });
    }
    let (lo, hi) = base.bounds(var);
    let flipped = if found == 1 {
        if lo > 0 {
            None
        } else {
            Some(base.fix_variable(var, 0)?)
        }
    } else if hi == 0 {
        None
    } else {
        Some(base.restrict_variable(var, 1, hi)?)
    };
    let verified = match flipped {
        None => true,
        Some(p) => solve(&p, seed::derive(seed, &[1]), None, limits).is_infeasible(),
    };
    Ok(Probe {
        found: Some(found),
        verified,
    })
}
