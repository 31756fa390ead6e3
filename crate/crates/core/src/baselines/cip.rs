//! Reconstruction by repeatedly solving the release's feasibility problem.

use super::ReconstructionSet;
use crate::aggregates::QueryRelease;
use crate::error::Result;
use crate::model::Dataset;
use crate::seed;
use crate::solver::{
    assignment_to_dataset, build_problem, solve, tighten_domains, FeasibilityProblem, SolveOutcome, SolverLimits,
};

/// Auxiliary multiplicities scaled by `s / |aux|`, rounded half up and
/// clipped to the variable domains.
pub fn cip_hint(p: &FeasibilityProblem, aux: &Dataset) -> Vec<u32> {
    let scale = p.dataset_size() as f64 / aux.len().max(1) as f64;
    aux.multiplicities()
        .into_iter()
        .enumerate()
        .map(|(v, c)| {
            let (lo, hi) = p.bounds(v);
            ((f64::from(c) * scale + 0.5).floor() as u32).clamp(lo, hi)
        })
        .collect()
}

/// Up to `k` datasets consistent with the release, one per derived seed.
/// With `init`, values from the scaled auxiliary multiplicities are tried
/// first. Stops early once the release is proven infeasible.
pub fn cip_reconstruct(
    rel: &QueryRelease,
    k: usize,
    init: Option<&Dataset>,
    seed: u64,
    limits: &SolverLimits,
) -> Result<ReconstructionSet> {
    let p = tighten_domains(&build_problem(rel)?, rel);
    let hint = init.map(|aux| cip_hint(&p, aux));
    let mut out = ReconstructionSet {
        method: if init.is_some() { "cip-init" } else { "cip-rand" }.into(),
        datasets: Vec::new(),
        seeds: Vec::new(),
        diagnostics: p.warnings().to_vec(),
    };
    for i in 0..k {
        let s = seed::derive(seed, &[i as u64]);
        match solve(&p, s, hint.as_deref(), limits) {
            SolveOutcome::Feasible(a) => {
                out.datasets.push(assignment_to_dataset(rel.schema.clone(), &a));
                out.seeds.push(s);
            }
            SolveOutcome::Infeasible => {
                out.diagnostics.push("release constraints are infeasible".into());
                break;
            }
            SolveOutcome::Unknown => out.diagnostics.push(format!("seed {s}: search limit reached")),
        }
    }
    Ok(out)
}
