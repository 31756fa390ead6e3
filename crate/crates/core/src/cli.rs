//! The `desia` command-line frontend.
//!
//! Every stage reads its inputs from and writes its outputs to the output
//! directory, so the stages chain:
//!
//! ```text
//! gen-data      -> private.csv, aux.csv, data.meta.json
//! make-queries  -> queries.json
//! release       -> release.json
//! attack        -> results.jsonl, results.meta.json
//! sweep         -> sweep/<setting>/results.jsonl, sweep/summary.json
//! report        -> report/report.json, report/roc*.csv
//! ```

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::aggregates::{load_query_spec, AggregateQuery, QueryFile, RawQuery};
use crate::config::{GameKind, Overrides, RunConfig};
use crate::error::{Error, Result};
use crate::harness::{
    mean_auc, prepare_aia, read_results, run_aia_game, run_mia_game, select_mia_targets, sweep_noise,
    sweep_query_ratio, SweepPoint,
};
use crate::metrics::{summarize, write_report};
use crate::model::{load_dataset_csv, AttributeSchema, Dataset};
use crate::seed;

const PRIVATE_CSV: &str = "private.csv";
const AUX_CSV: &str = "aux.csv";
const QUERIES_JSON: &str = "queries.json";

#[derive(Debug, Parser)]
#[command(
    name = "desia",
    version,
    about = "Inference attacks against fixed aggregate releases"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// TOML manifest; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Attack: desia[-synthetic][-nouniq][-noverify][-nostoch], cip-rand,
    /// cip-init, rap-rand, rap-init, likelihood or random.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Released queries per record.
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    /// Laplace noise level; `inf` for exact answers.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Maximum number of attacked targets.
    #[arg(long, global = true)]
    pub targets: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Ratio,
    Epsilon,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a dataset (or draw a synthetic one) into private and auxiliary parts.
    GenData,
    /// Write the query pool.
    MakeQueries,
    /// Publish the release the attribute game would attack.
    Release,
    /// Play the configured privacy game.
    Attack,
    /// Sweep the query ratio and/or the noise level.
    Sweep {
        #[arg(long, value_enum, default_value = "both")]
        axis: Axis,
    },
    /// Summarize results files; defaults to the attack output.
    Report { results: Vec<PathBuf> },
}

/// Exit status for an error: 1 for bad input, 2 for failures while running.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::DegenerateFit(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn resolve_config(flags: &Flags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: flags.seed,
        method: flags.method.clone(),
        ratio: flags.ratio,
        epsilon: flags.epsilon,
        targets: flags.targets,
        workers: flags.workers,
        out: flags.out.clone(),
    })?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(&cli.flags)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::GenData => cmd_gen_data(&cfg),
        Command::MakeQueries => cmd_make_queries(&cfg),
        Command::Release => cmd_release(&cfg),
        Command::Attack => cmd_attack(&cfg),
        Command::Sweep { axis } => cmd_sweep(&cfg, *axis),
        Command::Report { results } => {
            let paths = if results.is_empty() {
                vec![cfg.out.join("results.jsonl")]
            } else {
                results.clone()
            };
            cmd_report(&cfg, &paths)
        }
    })
}

use crate::config::require;

fn schema(cfg: &RunConfig) -> Result<Arc<AttributeSchema>> {
    cfg.load_schema()
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

/// Provenance attached to every output.
fn header(cfg: &RunConfig, command: &str) -> serde_json::Value {
    let g = cfg.game_config();
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": cfg.hash(),
        "seeds": {
            "master": cfg.seed,
            "data": cfg.data_seed(),
            "game": g.game_seed,
            "attack": g.attack_seed,
        },
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cmd_gen_data(cfg: &RunConfig) -> Result<()> {
    let schema = schema(cfg)?;
    let (private, aux) = cfg.build_datasets(&schema)?;
    let out = out_dir(cfg)?;
    private.save_csv(out.join(PRIVATE_CSV))?;
    aux.save_csv(out.join(AUX_CSV))?;
    let mut meta = header(cfg, "gen-data");
    meta["schema_hash"] = json!(schema.hash());
    meta["private"] = json!({"records": private.len(), "hash": private.content_hash()});
    meta["aux"] = json!({"records": aux.len(), "hash": aux.content_hash()});
    write_json(&out.join("data.meta.json"), &meta)?;
    log::info!("wrote {} private and {} auxiliary records", private.len(), aux.len());
    Ok(())
}

pub fn cmd_make_queries(cfg: &RunConfig) -> Result<()> {
    let schema = schema(cfg)?;
    let queries = cfg.build_queries(&schema)?;
    let mut meta = header(cfg, "make-queries");
    meta["count"] = json!(queries.len());
    let file = QueryFile {
        meta: Some(meta),
        schema_hash: Some(schema.hash()),
        queries: queries.iter().map(|q| RawQuery::encode(&schema, q)).collect(),
    };
    let path = out_dir(cfg)?.join(QUERIES_JSON);
    let text = serde_json::to_string_pretty(&file)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    log::info!("wrote {} queries", queries.len());
    Ok(())
}

struct Inputs {
    private: Dataset,
    aux: Dataset,
    queries: Vec<AggregateQuery>,
}

fn inputs(cfg: &RunConfig) -> Result<Inputs> {
    let schema = schema(cfg)?;
    let paths = [PRIVATE_CSV, AUX_CSV, QUERIES_JSON].map(|f| cfg.out.join(f));
    for p in &paths {
        require(p)?;
    }
    Ok(Inputs {
        private: load_dataset_csv(&paths[0], schema.clone())?,
        aux: load_dataset_csv(&paths[1], schema.clone())?,
        queries: load_query_spec(&paths[2], &schema)?,
    })
}

pub fn cmd_release(cfg: &RunConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    let setup = prepare_aia(&inp.private, &inp.queries, &cfg.game_config())?;
    let mut meta = header(cfg, "release");
    meta["targets"] = json!(setup.targets.len());
    setup.release.save(cfg.out.join("release.json"), Some(meta))
}

pub fn cmd_attack(cfg: &RunConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    let g = cfg.game_config();
    let run = match cfg.game.game {
        GameKind::Aia => run_aia_game(&inp.private, &inp.aux, &inp.queries, &g)?,
        GameKind::Mia => {
            let targets = select_mia_targets(
                &inp.private,
                g.max_targets,
                seed::derive(g.game_seed, &[seed::tag("mia-targets")]),
            );
            run_mia_game(&inp.private, &inp.aux, &inp.queries, &g, &targets)?
        }
    };
    run.save(&cfg.out, "results")?;
    log::info!("attacked {} targets in {:.1}s", run.results.len(), run.wall_time);
    Ok(())
}

fn setting_name(axis: &str, value: f64) -> String {
    if value.is_infinite() {
        format!("{axis}-inf")
    } else {
        format!("{axis}-{value}")
    }
}

fn save_points(dir: &Path, axis: &str, points: &[SweepPoint]) -> Result<serde_json::Value> {
    let mut rows = Vec::new();
    for p in points {
        let name = setting_name(axis, p.value);
        for (rep, run) in p.runs.iter().enumerate() {
            run.save(dir.join(&name), &format!("results-{rep}"))?;
        }
        let value = if p.value.is_infinite() {
            json!("inf")
        } else {
            json!(p.value)
        };
        rows.push(json!({"value": value, "runs": p.runs.len(), "mean_auc": mean_auc(p)}));
    }
    Ok(json!(rows))
}

pub fn cmd_sweep(cfg: &RunConfig, axis: Axis) -> Result<()> {
    let inp = inputs(cfg)?;
    let g = cfg.game_config();
    let dir = out_dir(cfg)?.join("sweep");
    let mut summary = header(cfg, "sweep");
    if matches!(axis, Axis::Ratio | Axis::Both) {
        let points = sweep_query_ratio(&inp.private, &inp.aux, &inp.queries, &cfg.sweep.ratios, &g)?;
        summary["ratio"] = save_points(&dir, "ratio", &points)?;
    }
    if matches!(axis, Axis::Epsilon | Axis::Both) {
        let points = sweep_noise(
            &inp.private,
            &inp.aux,
            &inp.queries,
            &cfg.sweep.epsilons,
            cfg.sweep.repeats,
            &g,
        )?;
        summary["epsilon"] = save_points(&dir, "epsilon", &points)?;
    }
    write_json(&dir.join("summary.json"), &summary)
}

pub fn cmd_report(cfg: &RunConfig, results: &[PathBuf]) -> Result<()> {
    let mut all = Vec::new();
    for p in results {
        require(p)?;
        all.extend(read_results(p)?);
    }
    let report = summarize(&all, &cfg.report.ks);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut meta = header(cfg, "report");
    meta["inputs"] = json!(results.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
    write_report(&report, meta, out_dir(cfg)?.join("report"))
}
