//! Privacy games and experiment sweeps.
//!
//! The defender side (randomizing, releasing, removing records) and the
//! attacker side are kept apart: attacks only ever see the release, the
//! auxiliary data and the target.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregates::{add_laplace_noise, release, sample_queries, AggregateQuery, QueryRelease};
use crate::baselines::{aia_vote, cip_reconstruct, likelihood_attack, mia_vote, rap_reconstruct, ReconstructionSet};
use crate::desia::{record_id, AttackContext, AttackResult, DesiaConfig};
use crate::error::{Error, Result};
use crate::model::{find_unique_targets, randomize_sensitive, Code, Dataset, PartialRecord, Record, TargetUser};
use crate::seed;

/// Attack run in a game.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Desia,
    CipRand,
    CipInit,
    RapRand,
    RapInit,
    Likelihood,
    Random,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Desia,
        Method::CipRand,
        Method::CipInit,
        Method::RapRand,
        Method::RapInit,
        Method::Likelihood,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Desia => "desia",
            Method::CipRand => "cip-rand",
            Method::CipInit => "cip-init",
            Method::RapRand => "rap-rand",
            Method::RapInit => "rap-init",
            Method::Likelihood => "likelihood",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub method: Method,
    /// Released queries as a fraction of the dataset size; ignored when `m`
    /// is set.
    pub ratio: f64,
    pub m: Option<usize>,
    /// Laplace noise level; absent for exact answers.
    pub epsilon: Option<f64>,
    pub game_seed: u64,
    pub attack_seed: u64,
    /// Reconstructions per release for the CIP and RAP-style baselines.
    pub reconstructions: usize,
    pub max_targets: usize,
    /// DeSIA settings. The solver limits, RAP settings and shadow count
    /// also drive the baselines.
    pub desia: DesiaConfig,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            method: Method::Desia,
            ratio: 0.25,
            m: None,
            epsilon: None,
            game_seed: 0,
            attack_seed: 1,
            reconstructions: 100,
            max_targets: 200,
            desia: DesiaConfig::default(),
        }
    }
}

impl GameConfig {
    /// Number of released queries for a dataset of size `s`.
    pub fn query_count(&self, s: usize) -> usize {
        self.m.unwrap_or_else(|| (self.ratio * s as f64).round() as usize)
    }

    pub fn method_tag(&self) -> String {
        match self.method {
            Method::Desia => self.desia.tag(),
            m => m.name().to_string(),
        }
    }

    fn validate(&self, available: usize, s: usize) -> Result<usize> {
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(Error::Parameter(format!("epsilon must be positive, got {eps}")));
            }
        }
        if !(self.ratio >= 0.0) {
            return Err(Error::Parameter(format!(
                "ratio must be non-negative, got {}",
                self.ratio
            )));
        }
        let m = self.query_count(s);
        if m > available {
            return Err(Error::Parameter(format!(
                "{m} queries requested but only {available} available"
            )));
        }
        Ok(m)
    }

    /// Short hex digest of the configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub game: String,
    pub config: GameConfig,
    pub config_hash: String,
    pub schema_hash: String,
    pub private_hash: String,
    pub aux_hash: String,
    pub dataset_size: usize,
    pub queries: usize,
    pub targets: usize,
    pub epsilon: Option<f64>,
    pub notes: Vec<String>,
}

/// Results of one game with truths filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRun {
    pub results: Vec<AttackResult>,
    pub meta: RunMeta,
    /// Seconds; not persisted.
    pub wall_time: f64,
}

impl GameRun {
    /// One JSON object per result, newline-terminated.
    pub fn results_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            out.push_str(&serde_json::to_string(r).expect("result serializes"));
            out.push('\n');
        }
        out
    }

    /// `<stem>.jsonl` plus `<stem>.meta.json` in `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{stem}.jsonl"));
        std::fs::write(&path, self.results_jsonl()).map_err(|e| Error::io(&path, e))?;
        let path = dir.join(format!("{stem}.meta.json"));
        let meta = serde_json::to_string_pretty(&self.meta)? + "\n";
        std::fs::write(&path, meta).map_err(|e| Error::io(&path, e))
    }
}

/// Reads a results file written by [`GameRun::save`].
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<AttackResult>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_results(results: &[AttackResult], mut w: impl Write) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io("<results>", e))?;
    }
    Ok(())
}

/// Seeds for the defender's random choices.
#[derive(Clone, Copy, Debug)]
struct Plan {
    randomize: u64,
    queries: u64,
    noise: u64,
    targets: u64,
}

impl Plan {
    fn new(cfg: &GameConfig) -> Self {
        let g = cfg.game_seed;
        Plan {
            randomize: seed::derive(g, &[seed::tag("randomize")]),
            queries: seed::derive(g, &[seed::tag("queries")]),
            noise: seed::derive(g, &[seed::tag("noise")]),
            targets: seed::derive(g, &[seed::tag("targets")]),
        }
    }
}

fn subsample<T: Clone>(items: Vec<T>, cap: usize, seed: u64) -> Vec<T> {
    if items.len() <= cap {
        return items;
    }
    let mut picks = index::sample(&mut seed::rng(seed), items.len(), cap).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| items[i].clone()).collect()
}

fn check_schemas(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.schema().as_ref() != b.schema().as_ref() {
        return Err(Error::SchemaMismatch(
            "private and auxiliary datasets use different schemas".into(),
        ));
    }
    Ok(())
}

fn meta(
    game: &str,
    cfg: &GameConfig,
    private: &Dataset,
    aux: &Dataset,
    rel: Option<&QueryRelease>,
    targets: usize,
    notes: Vec<String>,
) -> RunMeta {
    RunMeta {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        game: game.into(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        schema_hash: private.schema().hash(),
        private_hash: private.content_hash(),
        aux_hash: aux.content_hash(),
        dataset_size: rel.map_or(private.len(), |r| r.dataset_size),
        queries: rel.map_or(0, |r| r.len()),
        targets,
        epsilon: cfg.epsilon,
        notes,
    }
}

/// Attribute inference game: randomize the sensitive attribute, release
/// the sampled queries once, attack every unique target (up to the cap).
pub fn run_aia_game(
    d_private: &Dataset,
    d_aux: &Dataset,
    queries: &[AggregateQuery],
    cfg: &GameConfig,
) -> Result<GameRun> {
    run_aia_planned(d_private, d_aux, queries, cfg, Plan::new(cfg))
}

/// The defender's side of the attribute game: the published release, the
/// attacked targets and their randomized sensitive values.
#[derive(Clone, Debug, PartialEq)]
pub struct AiaSetup {
    pub release: QueryRelease,
    pub targets: Vec<TargetUser>,
    pub truths: Vec<Code>,
}

/// Randomizes the sensitive attribute, samples and answers the queries
/// (with noise when configured) and selects the targets.
pub fn prepare_aia(d_private: &Dataset, queries: &[AggregateQuery], cfg: &GameConfig) -> Result<AiaSetup> {
    prepare_aia_planned(d_private, queries, cfg, Plan::new(cfg))
}

fn prepare_aia_planned(
    d_private: &Dataset,
    queries: &[AggregateQuery],
    cfg: &GameConfig,
    plan: Plan,
) -> Result<AiaSetup> {
    let m = cfg.validate(queries.len(), d_private.len())?;
    let qs = sample_queries(queries, m, plan.queries)?;
    let d = randomize_sensitive(d_private, plan.randomize);
    let truth: HashMap<PartialRecord, Code> = d.records().iter().map(|r| (r.project(), r.sensitive())).collect();
    let targets = subsample(find_unique_targets(&d), cfg.max_targets, plan.targets);
    let truths = targets.iter().map(|t| truth[&t.partial]).collect();
    let mut rel = release(&qs, &d);
    if let Some(eps) = cfg.epsilon {
        rel = add_laplace_noise(&rel, eps, plan.noise)?;
    }
    Ok(AiaSetup {
        release: rel,
        targets,
        truths,
    })
}

fn run_aia_planned(
    d_private: &Dataset,
    d_aux: &Dataset,
    queries: &[AggregateQuery],
    cfg: &GameConfig,
    plan: Plan,
) -> Result<GameRun> {
    let start = Instant::now();
    check_schemas(d_private, d_aux)?;
    let setup = prepare_aia_planned(d_private, queries, cfg, plan)?;
    let mut notes = vec!["one randomization and release shared by all targets".to_string()];
    if setup.targets.is_empty() {
        log::warn!("no unique targets in the private dataset");
        notes.push("no unique targets".into());
    }
    let mut results = attack_aia_targets(&setup.release, d_aux, &setup.targets, cfg)?;
    for (r, &t) in results.iter_mut().zip(&setup.truths) {
        r.truth = Some(t);
    }
    Ok(GameRun {
        meta: meta(
            "aia",
            cfg,
            d_private,
            d_aux,
            Some(&setup.release),
            setup.targets.len(),
            notes,
        ),
        results,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn target_seed(master: u64, id: &str) -> u64 {
    seed::derive(master, &[seed::tag(id)])
}

/// The attacker's side of the attribute game. It sees only the public
/// release, the auxiliary data and the targets' known values.
pub fn attack_aia_targets(
    rel: &QueryRelease,
    aux: &Dataset,
    targets: &[TargetUser],
    cfg: &GameConfig,
) -> Result<Vec<AttackResult>> {
    let tag = cfg.method_tag();
    let a = cfg.attack_seed;
    let plain = |t: &TargetUser, (prediction, score): (Code, f64)| AttackResult {
        target: t.id.clone(),
        method: tag.clone(),
        prediction,
        score,
        deterministic: false,
        truth: None,
    };
    let voted = |set: ReconstructionSet| -> Vec<AttackResult> {
        for d in &set.diagnostics {
            log::info!("{}: {d}", set.method);
        }
        targets
            .par_iter()
            .map(|t| plain(t, aia_vote(t, &set, target_seed(a, &t.id))))
            .collect()
    };
    let init = matches!(cfg.method, Method::CipInit | Method::RapInit).then_some(aux);
    Ok(match cfg.method {
        Method::Desia => {
            let ctx = AttackContext::new(rel, aux)?;
            targets
                .par_iter()
                .map(|t| ctx.attack_aia(t, &cfg.desia, target_seed(a, &t.id)))
                .collect::<Result<_>>()?
        }
        Method::CipRand | Method::CipInit => voted(cip_reconstruct(
            rel,
            cfg.reconstructions,
            init,
            seed::derive(a, &[seed::tag("cip")]),
            &cfg.desia.limits,
        )?),
        Method::RapRand | Method::RapInit => voted(rap_reconstruct(
            rel,
            cfg.reconstructions,
            init,
            seed::derive(a, &[seed::tag("rap")]),
            &cfg.desia.rap,
        )),
        Method::Likelihood => {
            let ctx = AttackContext::new(rel, aux)?;
            targets
                .par_iter()
                .map(|t| {
                    let s = target_seed(a, &t.id);
                    let batch = ctx.shadows_aia(t, cfg.desia.shadows, s)?;
                    Ok(plain(t, likelihood_attack(rel, t, &batch, seed::derive(s, &[1]))))
                })
                .collect::<Result<_>>()?
        }
        Method::Random => {
            let k = rel.schema.sensitive_size() as Code;
            targets
                .iter()
                .map(|t| plain(t, (seed::rng(target_seed(a, &t.id)).gen_range(0..k), 0.5)))
                .collect()
        }
    })
}

/// Records occurring exactly once, in dataset order.
pub fn unique_records(d: &Dataset) -> Vec<Record> {
    let mut counts: HashMap<&Record, usize> = HashMap::new();
    for r in d.records() {
        *counts.entry(r).or_default() += 1;
    }
    let mut seen = std::collections::HashSet::new();
    d.records()
        .iter()
        .filter(|r| counts[r] == 1 && seen.insert(*r))
        .cloned()
        .collect()
}

/// Up to `cap` unique records of `d`, chosen with `seed`.
pub fn select_mia_targets(d: &Dataset, cap: usize, seed: u64) -> Vec<Record> {
    subsample(unique_records(d), cap, seed)
}

/// Membership game. Per target a bit is drawn: 0 removes the target, 1
/// removes another uniformly chosen record. The size `s − 1` dataset is
/// released and attacked.
pub fn run_mia_game(
    d_private: &Dataset,
    d_aux: &Dataset,
    queries: &[AggregateQuery],
    cfg: &GameConfig,
    targets: &[Record],
) -> Result<GameRun> {
    let start = Instant::now();
    check_schemas(d_private, d_aux)?;
    let s = d_private.len();
    if s < 2 {
        return Err(Error::Parameter(format!(
            "membership game needs at least 2 records, got {s}"
        )));
    }
    let plan = Plan::new(cfg);
    let m = cfg.validate(queries.len(), s - 1)?;
    let qs = sample_queries(queries, m, plan.queries)?;
    let positions: Vec<usize> = targets
        .iter()
        .map(|t| {
            d_private
                .records()
                .iter()
                .position(|r| r == t)
                .ok_or_else(|| Error::Parameter(format!("target {} is not in the private dataset", record_id(t))))
        })
        .collect::<Result<_>>()?;

    let results = targets
        .par_iter()
        .zip(positions.par_iter())
        .enumerate()
        .map(|(i, (t, &pos))| {
            let mut rng = seed::derived_rng(cfg.game_seed, &[seed::tag("mia"), i as u64]);
            let b: Code = rng.gen_range(0..2);
            let removed = if b == 0 {
                pos
            } else {
                let j = rng.gen_range(0..s - 1);
                if j >= pos {
                    j + 1
                } else {
                    j
                }
            };
            let mut rel = release(&qs, &d_private.without(removed));
            if let Some(eps) = cfg.epsilon {
                rel = add_laplace_noise(&rel, eps, seed::derive(plan.noise, &[i as u64]))?;
            }
            let mut r = attack_mia_target(&rel, d_aux, t, cfg, seed::derive(cfg.attack_seed, &[i as u64]))?;
            r.truth = Some(b);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let notes = vec![
        "b = 1 removes a uniformly random record other than the target".to_string(),
        "one release per target".to_string(),
    ];
    Ok(GameRun {
        meta: meta("mia", cfg, d_private, d_aux, None, targets.len(), notes),
        results,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// The attacker's side of the membership game for one target record.
pub fn attack_mia_target(
    rel: &QueryRelease,
    aux: &Dataset,
    target: &Record,
    cfg: &GameConfig,
    seed: u64,
) -> Result<AttackResult> {
    let plain = |(bit, score): (u8, f64)| AttackResult {
        target: record_id(target),
        method: cfg.method_tag(),
        prediction: Code::from(bit),
        score,
        deterministic: false,
        truth: None,
    };
    let init = matches!(cfg.method, Method::CipInit | Method::RapInit).then_some(aux);
    Ok(match cfg.method {
        Method::Desia => AttackContext::new(rel, aux)?.attack_mia(target, &cfg.desia, seed)?,
        Method::CipRand | Method::CipInit => {
            let set = cip_reconstruct(rel, cfg.reconstructions, init, seed, &cfg.desia.limits)?;
            plain(mia_vote(target, &set))
        }
        Method::RapRand | Method::RapInit => {
            let set = rap_reconstruct(rel, cfg.reconstructions, init, seed, &cfg.desia.rap);
            plain(mia_vote(target, &set))
        }
        Method::Likelihood => {
            return Err(Error::Parameter(
                "the likelihood attack targets attribute inference only".into(),
            ))
        }
        Method::Random => plain((seed::rng(seed).gen_range(0..2), 0.5)),
    })
}

/// Runs of one sweep setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub runs: Vec<GameRun>,
}

/// One run per ratio on the same randomized dataset, with the queries
/// re-sampled per ratio.
pub fn sweep_query_ratio(
    d_private: &Dataset,
    d_aux: &Dataset,
    queries: &[AggregateQuery],
    ratios: &[f64],
    cfg: &GameConfig,
) -> Result<Vec<SweepPoint>> {
    let base = Plan::new(cfg);
    ratios
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let c = GameConfig {
                ratio,
                m: None,
                ..cfg.clone()
            };
            let plan = Plan {
                queries: seed::derive(base.queries, &[i as u64]),
                ..base
            };
            Ok(SweepPoint {
                value: ratio,
                runs: vec![run_aia_planned(d_private, d_aux, queries, &c, plan)?],
            })
        })
        .collect()
}

/// `repeats` independent noisy releases per ε over the same dataset and
/// queries. `f64::INFINITY` stands for the exact release and runs once.
pub fn sweep_noise(
    d_private: &Dataset,
    d_aux: &Dataset,
    queries: &[AggregateQuery],
    epsilons: &[f64],
    repeats: usize,
    cfg: &GameConfig,
) -> Result<Vec<SweepPoint>> {
    let base = Plan::new(cfg);
    epsilons
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::Parameter(format!("epsilon must be positive, got {eps}")));
            }
            let runs = if eps.is_infinite() {
                let c = GameConfig {
                    epsilon: None,
                    ..cfg.clone()
                };
                vec![run_aia_planned(d_private, d_aux, queries, &c, base)?]
            } else {
                (0..repeats)
                    .map(|rep| {
                        let c = GameConfig {
                            epsilon: Some(eps),
                            ..cfg.clone()
                        };
                        let plan = Plan {
                            noise: seed::derive(base.noise, &[eps.to_bits(), rep as u64]),
                            ..base
                        };
                        run_aia_planned(d_private, d_aux, queries, &c, plan)
                    })
                    .collect::<Result<_>>()?
            };
            Ok(SweepPoint { value: eps, runs })
        })
        .collect()
}

/// Mean AUC over the runs of a sweep point; `None` if any run has no AUC.
pub fn mean_auc(point: &SweepPoint) -> Option<f64> {
    let aucs: Option<Vec<f64>> = point
        .runs
        .iter()
        .map(|r| crate::metrics::summarize(&r.results, &[]).overall.auc)
        .collect();
    let aucs = aucs?;
    (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
}
