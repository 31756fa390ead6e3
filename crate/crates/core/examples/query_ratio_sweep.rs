//! AUC of the attack as more queries are released.
//!
//! cargo run --release --example query_ratio_sweep

use desia::config::RunConfig;
use desia::harness::{mean_auc, sweep_query_ratio};

fn main() -> desia::Result<()> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/census/config.toml"))?;
    let schema = cfg.load_schema()?;
    let (private, aux) = cfg.build_datasets(&schema)?;
    let queries = cfg.build_queries(&schema)?;

    let points = sweep_query_ratio(&private, &aux, &queries, &cfg.sweep.ratios, &cfg.game_config())?;
    println!("{:>6} {:>8} {:>8} {:>6}", "m/s", "queries", "certain", "AUC");
    for p in &points {
        let run = &p.runs[0];
        let certain = run.results.iter().filter(|r| r.deterministic).count();
        println!(
            "{:>6} {:>8} {:>8} {:>6.3}",
            p.value,
            run.meta.queries,
            certain,
            mean_auc(p).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
