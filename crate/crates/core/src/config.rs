//! Experiment manifests: TOML files with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregates::{load_query_spec, make_marginal_queries, AggregateQuery};
use crate::desia::DesiaConfig;
use crate::error::{Error, Result};
use crate::harness::{GameConfig, Method};
use crate::model::{generate_synthetic, load_dataset_csv, AttributeSchema, Dataset, Skew};
use crate::seed;

/// Config error naming `path` when it is not a readable file.
pub(crate) fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("missing input file {}", path.display())))
    }
}

/// Which privacy game `attack` plays.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    #[default]
    Aia,
    Mia,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Existing dataset to split; synthetic records are drawn when absent.
    pub source: Option<PathBuf>,
    pub private_size: usize,
    pub aux_size: usize,
    /// Auxiliary share when splitting `source`.
    pub aux_fraction: f64,
    /// Categorical weights per attribute name for synthetic data.
    pub skew: BTreeMap<String, Vec<f64>>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: None,
            private_size: 500,
            aux_size: 4500,
            aux_fraction: 0.9,
            skew: BTreeMap::new(),
        }
    }
}

/// One family of marginal queries, attributes named as in the schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSpec {
    pub attributes: Vec<String>,
    pub way: usize,
    #[serde(default)]
    pub buckets: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueriesSection {
    /// Existing query spec; `marginals` are built when absent.
    pub spec: Option<PathBuf>,
    pub marginals: Vec<MarginalSpec>,
}

/// Game settings as written in a manifest. Seeds come from the top-level
/// master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSection {
    pub game: GameKind,
    pub method: Method,
    pub ratio: f64,
    pub m: Option<usize>,
    pub epsilon: Option<f64>,
    pub reconstructions: usize,
    pub max_targets: usize,
    pub desia: DesiaConfig,
}

impl Default for GameSection {
    fn default() -> Self {
        let g = GameConfig::default();
        GameSection {
            game: GameKind::Aia,
            method: g.method,
            ratio: g.ratio,
            m: g.m,
            epsilon: g.epsilon,
            reconstructions: g.reconstructions,
            max_targets: g.max_targets,
            desia: g.desia,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub ratios: Vec<f64>,
    /// Noise levels; `inf` stands for the exact release.
    pub epsilons: Vec<f64>,
    pub repeats: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            ratios: vec![0.05, 0.1, 0.25, 0.5, 1.0],
            epsilons: vec![f64::INFINITY, 10.0, 1.0, 0.1],
            repeats: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// FPR levels for TPR@FPR.
    pub ks: Vec<f64>,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            ks: vec![1e-3, 1e-2, 1e-1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
    pub data: DataSection,
    pub queries: QueriesSection,
    pub game: GameSection,
    pub sweep: SweepSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: PathBuf::from("schema.json"),
            out: PathBuf::from("out"),
            seed: 0,
            workers: None,
            data: DataSection::default(),
            queries: QueriesSection::default(),
            game: GameSection::default(),
            sweep: SweepSection::default(),
            report: ReportSection::default(),
        }
    }
}

/// Command-line values that replace manifest entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub ratio: Option<f64>,
    pub epsilon: Option<f64>,
    pub targets: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a manifest; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.schema);
        fix(&mut cfg.out);
        if let Some(p) = cfg.data.source.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.queries.spec.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = &o.method {
            self.apply_method(m)?;
        }
        if let Some(r) = o.ratio {
            self.game.ratio = r;
            self.game.m = None;
        }
        if let Some(e) = o.epsilon {
            self.game.epsilon = if e.is_infinite() { None } else { Some(e) };
        }
        if let Some(t) = o.targets {
            self.game.max_targets = t;
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        self.validate()
    }

    /// Accepts a method name or a DeSIA ablation tag such as
    /// `desia-noverify`.
    fn apply_method(&mut self, name: &str) -> Result<()> {
        if let Some(rest) = name.strip_prefix("desia") {
            self.game.method = Method::Desia;
            for flag in rest.split('-').filter(|f| !f.is_empty()) {
                match flag {
                    "synthetic" => self.game.desia.finder = crate::desia::Finder::Synthetic,
                    "nouniq" => self.game.desia.uniqueness = false,
                    "noverify" => self.game.desia.verification = false,
                    "nostoch" => self.game.desia.stochastic = false,
                    _ => return Err(Error::Config(format!("unknown method '{name}'"))),
                }
            }
            return Ok(());
        }
        self.game.method = name.parse()?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.game;
        if let Some(e) = g.epsilon {
            if !(e > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {e}")));
            }
        }
        if !(g.ratio >= 0.0 && g.ratio.is_finite()) {
            return Err(Error::Config(format!(
                "ratio must be a non-negative number, got {}",
                g.ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.data.aux_fraction) {
            return Err(Error::Config("data.aux_fraction must lie in [0, 1]".into()));
        }
        if self.data.source.is_none() && self.data.private_size + self.data.aux_size == 0 {
            return Err(Error::Config("data sizes are both zero".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.sweep.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("sweep epsilons must be positive".into()));
        }
        if self.report.ks.iter().any(|k| !(*k > 0.0 && *k < 1.0)) {
            return Err(Error::Config("report ks must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Game settings with seeds derived from the master seed.
    pub fn game_config(&self) -> GameConfig {
        let g = &self.game;
        GameConfig {
            method: g.method,
            ratio: g.ratio,
            m: g.m,
            epsilon: g.epsilon,
            game_seed: seed::derive(self.seed, &[seed::tag("game")]),
            attack_seed: seed::derive(self.seed, &[seed::tag("attack")]),
            reconstructions: g.reconstructions,
            max_targets: g.max_targets,
            desia: g.desia.clone(),
        }
    }

    pub fn data_seed(&self) -> u64 {
        seed::derive(self.seed, &[seed::tag("data")])
    }

    pub fn load_schema(&self) -> Result<Arc<AttributeSchema>> {
        require(&self.schema)?;
        Ok(Arc::new(AttributeSchema::load(&self.schema)?))
    }

    /// Private and auxiliary datasets: `data.source` split by
    /// `aux_fraction`, or synthetic records split by the configured sizes.
    pub fn build_datasets(&self, schema: &Arc<AttributeSchema>) -> Result<(Dataset, Dataset)> {
        let seed = self.data_seed();
        let all = match &self.data.source {
            Some(p) => {
                require(p)?;
                load_dataset_csv(p, schema.clone())?
            }
            None => {
                let skew: Skew = self.data.skew.clone().into_iter().collect();
                let total = self.data.private_size + self.data.aux_size;
                generate_synthetic(schema.clone(), total, seed::derive(seed, &[0]), &skew)?
            }
        };
        if all.len() < 2 {
            return Err(Error::Config(format!("need at least 2 records, got {}", all.len())));
        }
        let aux_fraction = match &self.data.source {
            Some(_) => self.data.aux_fraction,
            None => self.data.aux_size as f64 / (self.data.private_size + self.data.aux_size) as f64,
        };
        let (aux, private) = all.split(aux_fraction, seed::derive(seed, &[1]))?;
        Ok((private, aux))
    }

    /// The query pool: the spec file when given, otherwise the marginals.
    pub fn build_queries(&self, schema: &AttributeSchema) -> Result<Vec<AggregateQuery>> {
        if let Some(p) = &self.queries.spec {
            require(p)?;
            return load_query_spec(p, schema);
        }
        if self.queries.marginals.is_empty() {
            return Err(Error::Config("no query spec and no marginals configured".into()));
        }
        let mut qs = Vec::new();
        for spec in &self.queries.marginals {
            let index = |name: &String| {
                schema
                    .index_of(name)
                    .ok_or_else(|| Error::Config(format!("unknown attribute `{name}`")))
            };
            let attrs = spec.attributes.iter().map(index).collect::<Result<Vec<_>>>()?;
            let buckets = spec
                .buckets
                .iter()
                .map(|(n, &w)| Ok((index(n)?, w)))
                .collect::<Result<Vec<_>>>()?;
            qs.extend(make_marginal_queries(schema, &attrs, spec.way, &buckets)?);
        }
        Ok(qs)
    }

    /// Short hex digest of the resolved configuration, leaving out where
    /// outputs go and how many workers run.
    pub fn hash(&self) -> String {
        let normalized = RunConfig {
            out: PathBuf::new(),
            workers: None,
            ..self.clone()
        };
        let text = serde_json::to_string(&normalized).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}
