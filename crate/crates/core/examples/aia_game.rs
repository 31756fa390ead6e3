//! Attribute inference game on the census-like fixture.
//!
//! cargo run --release --example aia_game [method]

use desia::config::{Overrides, RunConfig};
use desia::harness::run_aia_game;
use desia::metrics::summarize;

fn main() -> desia::Result<()> {
    let method = std::env::args().nth(1).unwrap_or_else(|| "desia".into());
    let mut cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/census/config.toml"))?;
    cfg.apply(&Overrides {
        method: Some(method),
        ..Default::default()
    })?;
    cfg.game.reconstructions = 20;

    let schema = cfg.load_schema()?;
    let (private, aux) = cfg.build_datasets(&schema)?;
    let queries = cfg.build_queries(&schema)?;
    let g = cfg.game_config();
    println!(
        "{} private records, {} auxiliary, {} of {} queries released",
        private.len(),
        aux.len(),
        g.query_count(private.len()),
        queries.len()
    );

    let run = run_aia_game(&private, &aux, &queries, &g)?;
    let report = summarize(&run.results, &cfg.report.ks);
    let m = &report.overall;
    println!("method      {}", g.method_tag());
    println!("targets     {}", m.count);
    println!("accuracy    {:.3}", m.accuracy.unwrap_or(f64::NAN));
    println!("AUC         {:.3}", m.auc.unwrap_or(f64::NAN));
    println!(
        "certain     {:.1}% (accuracy {:?})",
        100.0 * m.deterministic_coverage,
        m.deterministic_accuracy
    );
    for (k, tpr) in &m.tpr_at_fpr {
        println!("TPR@{k:<7} {tpr:.3}");
    }
    println!("{:.1}s", run.wall_time);
    Ok(())
}
