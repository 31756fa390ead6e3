//! Turn a release into a counting feasibility problem and solve it.
//!
//! Each variable counts the records in one cell of the attribute domain;
//! each released answer is a sum constraint over the cells its query covers.
//!
//! cargo run --release --example feasibility_solver

use std::sync::Arc;

use desia::aggregates::{make_marginal_queries, release};
use desia::model::{generate_synthetic, AttributeSchema, Skew};
use desia::solver::{assignment_to_dataset, build_problem, solve, SolveOutcome, SolverLimits};

fn main() -> desia::Result<()> {
    let schema = Arc::new(AttributeSchema::from_sizes(&[("a", 3), ("b", 3), ("s", 2)])?);
    let data = generate_synthetic(schema.clone(), 30, 3, &Skew::new())?;
    let queries = make_marginal_queries(&schema, &[0, 1, 2], 2, &[])?;
    let rel = release(&queries, &data);
    let problem = build_problem(&rel)?;
    println!(
        "{} variables, {} constraints",
        problem.variable_count(),
        problem.constraints().len()
    );

    for seed in 0..3 {
        match solve(&problem, seed, None, &SolverLimits::nodes(100_000)) {
            SolveOutcome::Feasible(a) => {
                let d = assignment_to_dataset(schema.clone(), &a);
                println!(
                    "seed {seed}: consistent dataset of {} records, same as the original: {}",
                    d.len(),
                    d.same_multiset(&data)
                );
            }
            other => println!("seed {seed}: {other:?}"),
        }
    }

    // A contradictory extra constraint makes the problem infeasible.
    let all: Vec<u32> = (0..problem.variable_count() as u32).collect();
    let broken = problem.add_sum_constraint(all, 31)?;
    println!(
        "with total 31: {:?}",
        solve(&broken, 0, None, &SolverLimits::nodes(100_000))
    );
    Ok(())
}
