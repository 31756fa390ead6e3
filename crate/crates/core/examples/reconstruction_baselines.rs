//! Reconstruct candidate datasets from a release with the solver (CIP) and
//! by gradient descent on a relaxed dataset (RAP-style), then vote on a
//! target's sensitive value from each.
//!
//! cargo run --release --example reconstruction_baselines

use std::sync::Arc;

use desia::aggregates::{evaluate_all, make_marginal_queries, release};
use desia::baselines::{aia_vote, cip_reconstruct, rap_reconstruct, RapConfig, ReconstructionSet};
use desia::model::{find_unique_targets, generate_synthetic, randomize_sensitive, AttributeSchema, Skew};
use desia::solver::SolverLimits;

fn error(rel: &desia::aggregates::QueryRelease, set: &ReconstructionSet) -> f64 {
    let mut worst: f64 = 0.0;
    for d in &set.datasets {
        for (a, b) in evaluate_all(&rel.queries, d).iter().zip(&rel.answers) {
            worst = worst.max((*a as f64 - *b as f64).abs());
        }
    }
    worst
}

fn main() -> desia::Result<()> {
    let schema = Arc::new(AttributeSchema::from_sizes(&[("age", 8), ("zip", 5), ("s", 2)])?);
    let data = randomize_sensitive(&generate_synthetic(schema.clone(), 100, 1, &Skew::new())?, 2);
    let queries = make_marginal_queries(&schema, &[0, 1, 2], 2, &[])?;
    let rel = release(&queries, &data);

    let cip = cip_reconstruct(&rel, 10, None, 3, &SolverLimits::nodes(200_000))?;
    let rap = rap_reconstruct(&rel, 10, None, 4, &RapConfig::default());
    println!(
        "CIP: {} datasets, largest answer error {}",
        cip.len(),
        error(&rel, &cip)
    );
    println!(
        "RAP: {} datasets, largest answer error {}",
        rap.len(),
        error(&rel, &rap)
    );

    for t in find_unique_targets(&data).iter().take(5) {
        let truth = data
            .records()
            .iter()
            .find(|r| r.project() == t.partial)
            .unwrap()
            .sensitive();
        let (c, cs) = aia_vote(t, &cip, 0);
        let (r, rs) = aia_vote(t, &rap, 0);
        println!("target {:<6} truth {truth}  CIP {c} ({cs:.2})  RAP {r} ({rs:.2})", t.id);
    }
    Ok(())
}
