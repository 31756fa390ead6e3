//! Answer a handful of marginal queries exactly, then with Laplace noise.
//!
//! cargo run --release --example release_and_noise

use std::sync::Arc;

use desia::aggregates::{add_laplace_noise, make_marginal_queries, release};
use desia::model::{generate_synthetic, AttributeSchema, Skew};

fn main() -> desia::Result<()> {
    let schema = Arc::new(AttributeSchema::from_sizes(&[("age", 4), ("zip", 3), ("income", 2)])?);
    let data = generate_synthetic(schema.clone(), 50, 7, &Skew::new())?;
    // Every (age, zip) cell and every (zip, income) cell.
    let mut queries = make_marginal_queries(&schema, &[0, 1], 2, &[])?;
    queries.extend(make_marginal_queries(&schema, &[1, 2], 2, &[])?);

    let exact = release(&queries, &data);
    let noisy = add_laplace_noise(&exact, 1.0, 42)?;
    println!("{} queries over {} records", exact.len(), exact.dataset_size);
    println!("{:>6} {:>6}", "exact", "eps=1");
    for (e, n) in exact.answers.iter().zip(&noisy.answers).take(8) {
        println!("{e:>6} {n:>6}");
    }
    println!("release file:\n{}", &exact.to_json(None)[..200]);
    Ok(())
}
