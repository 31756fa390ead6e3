//! Membership inference game: each target is either removed or kept while
//! another record goes, and the attack guesses which.
//!
//! cargo run --release --example mia_game

use desia::config::{Overrides, RunConfig};
use desia::harness::{run_mia_game, select_mia_targets};
use desia::metrics::summarize;

fn main() -> desia::Result<()> {
    let mut cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/census/config.toml"))?;
    cfg.apply(&Overrides {
        ratio: Some(1.0),
        ..Default::default()
    })?;
    let schema = cfg.load_schema()?;
    let (private, aux) = cfg.build_datasets(&schema)?;
    let queries = cfg.build_queries(&schema)?;
    let g = cfg.game_config();

    let targets = select_mia_targets(&private, 30, 9);
    let run = run_mia_game(&private, &aux, &queries, &g, &targets)?;
    for r in run.results.iter().take(5) {
        println!(
            "{:<20} guess {} truth {:?} score {:.3}{}",
            r.target,
            r.prediction,
            r.truth,
            r.score,
            if r.deterministic { " (certain)" } else { "" }
        );
    }
    let m = summarize(&run.results, &[]).overall;
    println!(
        "{} targets: accuracy {:.3}, AUC {:.3}, certain {:.1}%",
        m.count,
        m.accuracy.unwrap_or(f64::NAN),
        m.auc.unwrap_or(f64::NAN),
        100.0 * m.deterministic_coverage
    );
    Ok(())
}
