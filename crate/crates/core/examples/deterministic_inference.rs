//! Which unique users have a sensitive value that the release pins down?
//!
//! cargo run --release --example deterministic_inference

use std::sync::Arc;

use desia::aggregates::{make_marginal_queries, release, sample_queries};
use desia::desia::deterministic_aia;
use desia::model::{find_unique_targets, generate_synthetic, randomize_sensitive, AttributeSchema, Skew};
use desia::solver::SolverLimits;

fn main() -> desia::Result<()> {
    let schema = Arc::new(AttributeSchema::from_sizes(&[("age", 6), ("zip", 4), ("s", 2)])?);
    let data = randomize_sensitive(&generate_synthetic(schema.clone(), 40, 11, &Skew::new())?, 12);
    // All 2-way marginals plus a random quarter of the full 3-way table.
    let mut queries = make_marginal_queries(&schema, &[0, 1, 2], 2, &[])?;
    let full = make_marginal_queries(&schema, &[0, 1, 2], 3, &[])?;
    queries.extend(sample_queries(&full, full.len() / 4, 13)?);
    let rel = release(&queries, &data);

    let limits = SolverLimits::nodes(200_000);
    let targets = find_unique_targets(&data);
    let mut found = 0;
    for t in &targets {
        let truth = data
            .records()
            .iter()
            .find(|r| r.project() == t.partial)
            .map(|r| r.sensitive())
            .expect("target is in the data");
        if let Some(v) = deterministic_aia(&rel, t, &limits, 5)? {
            found += 1;
            println!("target {}: sensitive value {v} for certain (truth {truth})", t.id);
        }
    }
    println!(
        "{found} of {} unique targets are deterministically vulnerable",
        targets.len()
    );
    Ok(())
}
