//! The combined attack: deterministic module first, meta-classifier
//! otherwise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::deterministic::{prepare_problem, probe_aia, probe_mia, DeterministicOptions, Finder};
use super::logistic::{select_and_fit, MetaClassifier, DEFAULT_LAMBDA_GRID};
use super::shadow::{shadow_aia_compiled, shadow_mia_compiled, ShadowBatch};
use crate::aggregates::{CompiledQueries, QueryRelease};
use crate::baselines::RapConfig;
use crate::error::Result;
use crate::model::{Code, Dataset, Record, TargetUser};
use crate::seed;
use crate::solver::{FeasibilityProblem, SolverLimits};

/// One attacked target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub target: String,
    pub method: String,
    pub prediction: Code,
    /// Attacker probability that the positive class (value or bit 1) holds.
    pub score: f64,
    pub deterministic: bool,
    pub truth: Option<Code>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesiaConfig {
    pub finder: Finder,
    pub uniqueness: bool,
    pub verification: bool,
    pub stochastic: bool,
    /// Shadow datasets per target.
    pub shadows: usize,
    pub lambda_grid: Vec<f64>,
    pub limits: SolverLimits,
    pub rap: RapConfig,
}

impl Default for DesiaConfig {
    fn default() -> Self {
        DesiaConfig {
            finder: Finder::Solver,
            uniqueness: true,
            verification: true,
            stochastic: true,
            shadows: 3000,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            limits: SolverLimits::default(),
            rap: RapConfig::default(),
        }
    }
}

impl DesiaConfig {
    /// `desia` followed by one suffix per disabled component.
    pub fn tag(&self) -> String {
        let mut t = String::from("desia");
        if self.finder == Finder::Synthetic {
            t.push_str("-synthetic");
        }
        if !self.uniqueness {
            t.push_str("-nouniq");
        }
        if !self.verification {
            t.push_str("-noverify");
        }
        if !self.stochastic {
            t.push_str("-nostoch");
        }
        t
    }

    fn deterministic(&self) -> DeterministicOptions {
        DeterministicOptions {
            finder: self.finder,
            uniqueness: self.uniqueness,
            verification: self.verification,
            limits: self.limits,
            rap: self.rap,
        }
    }
}

/// Trains the meta-classifier on `batch` and applies it to the released
/// answers.
pub fn train_meta_classifier(batch: &ShadowBatch, lambda_grid: &[f64]) -> Result<MetaClassifier> {
    select_and_fit(
        &batch.features,
        &batch.labels,
        &batch.train_rows(),
        &batch.validation_rows(),
        lambda_grid,
    )
}

/// Prediction (ties to the lower class) and probability of class 1 for the
/// release's answers.
pub fn stochastic_predict(model: &MetaClassifier, rel: &QueryRelease) -> Result<(Code, f64)> {
    let x: Vec<f64> = rel.answers.iter().map(|&a| a as f64).collect();
    model.predict(&x)
}

fn positive_score(v: Code) -> f64 {
    if v == 1 {
        1.0
    } else {
        0.0
    }
}

/// Everything the attacker derives once per release.
pub struct AttackContext<'a> {
    pub rel: &'a QueryRelease,
    pub aux: &'a Dataset,
    base: FeasibilityProblem,
    compiled: CompiledQueries,
}

impl<'a> AttackContext<'a> {
    pub fn new(rel: &'a QueryRelease, aux: &'a Dataset) -> Result<Self> {
        Ok(AttackContext {
            base: prepare_problem(rel)?,
            compiled: CompiledQueries::new(&rel.schema, &rel.queries),
            rel,
            aux,
        })
    }

    pub fn base_problem(&self) -> &FeasibilityProblem {
        &self.base
    }

    fn noisy(&self, mut batch: ShadowBatch, seed: u64) -> Result<ShadowBatch> {
        if let Some(noise) = &self.rel.noise {
            batch.add_noise(noise.epsilon, seed)?;
        }
        Ok(batch)
    }

    /// Shadow batch for an attribute target, noised like the release.
    pub fn shadows_aia(&self, target: &TargetUser, n: usize, seed: u64) -> Result<ShadowBatch> {
        let batch = shadow_aia_compiled(self.aux, target, &self.compiled, n, self.rel.dataset_size, seed)?;
        self.noisy(batch, seed::derive(seed, &[u64::MAX]))
    }

    /// Shadow batch for a membership target, noised like the release.
    pub fn shadows_mia(&self, target: &Record, n: usize, seed: u64) -> Result<ShadowBatch> {
        let batch = shadow_mia_compiled(self.aux, target, &self.compiled, n, self.rel.dataset_size, seed)?;
        self.noisy(batch, seed::derive(seed, &[u64::MAX]))
    }

    fn stochastic(&self, batch: Result<ShadowBatch>, cfg: &DesiaConfig) -> Result<(Code, f64)> {
        let model = train_meta_classifier(&batch?, &cfg.lambda_grid)?;
        stochastic_predict(&model, self.rel)
    }

    pub fn attack_aia(&self, target: &TargetUser, cfg: &DesiaConfig, seed: u64) -> Result<AttackResult> {
        let probe = probe_aia(
            &self.base,
            self.rel,
            target,
            &cfg.deterministic(),
            seed::derive(seed, &[0]),
        )?;
        let result = |prediction, score, deterministic| AttackResult {
            target: target.id.clone(),
            method: cfg.tag(),
            prediction,
            score,
            deterministic,
            truth: None,
        };
        if let Some(v) = probe.found {
            if probe.verified || !cfg.verification {
                return Ok(result(v, positive_score(v), true));
            }
        }
        if !cfg.stochastic {
            let k = self.rel.schema.sensitive_size() as Code;
            let guess = seed::derived_rng(seed, &[2]).gen_range(0..k);
            return Ok(result(guess, 0.5, false));
        }
        let batch = self.shadows_aia(target, cfg.shadows, seed::derive(seed, &[1]));
        let (v, score) = self.stochastic(batch, cfg)?;
        Ok(result(v, score, false))
    }

    pub fn attack_mia(&self, target: &Record, cfg: &DesiaConfig, seed: u64) -> Result<AttackResult> {
        let probe = probe_mia(
            &self.base,
            target,
            cfg.verification,
            &cfg.limits,
            seed::derive(seed, &[0]),
        )?;
        let result = |prediction, score, deterministic| AttackResult {
            target: record_id(target),
            method: cfg.tag(),
            prediction,
            score,
            deterministic,
            truth: None,
        };
        if let Some(b) = probe.found {
            if probe.verified || !cfg.verification {
                return Ok(result(Code::from(b), positive_score(Code::from(b)), true));
            }
        }
        if !cfg.stochastic {
            let guess = seed::derived_rng(seed, &[2]).gen_range(0..2);
            return Ok(result(guess, 0.5, false));
        }
        let batch = self.shadows_mia(target, cfg.shadows, seed::derive(seed, &[1]));
        let (b, score) = self.stochastic(batch, cfg)?;
        Ok(result(b, score, false))
    }
}

/// Codes of a full record joined with '-'.
pub fn record_id(r: &Record) -> String {
    r.values().iter().map(u32::to_string).collect::<Vec<_>>().join("-")
}

/// Attribute inference on one target.
pub fn desia_attack(
    rel: &QueryRelease,
    target: &TargetUser,
    aux: &Dataset,
    cfg: &DesiaConfig,
    seed: u64,
) -> Result<AttackResult> {
    AttackContext::new(rel, aux)?.attack_aia(target, cfg, seed)
}

/// Membership inference on one full record.
pub fn desia_attack_mia(
    rel: &QueryRelease,
    target: &Record,
    aux: &Dataset,
    cfg: &DesiaConfig,
    seed: u64,
) -> Result<AttackResult> {
    AttackContext::new(rel, aux)?.attack_mia(target, cfg, seed)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::aggregates::{release, AggregateQuery, ValueSet};
    use crate::model::{generate_synthetic, AttributeSchema, PartialRecord, Skew};

    #[test]
    fn tags() {
        assert_eq!(DesiaConfig::default().tag(), "desia");
        let c = DesiaConfig {
            finder: Finder::Synthetic,
            uniqueness: false,
            verification: false,
            stochastic: false,
            ..Default::default()
        };
        assert_eq!(c.tag(), "desia-synthetic-nouniq-noverify-nostoch");
    }

    #[test]
    fn deterministic_and_stochastic_paths() {
        let s = Arc::new(AttributeSchema::from_sizes(&[("a", 2), ("s", 2)]).unwrap());
        let d = Dataset::new(s.clone(), vec![Record(vec![0, 1]), Record(vec![1, 0])]).unwrap();
        let q1 = AggregateQuery::with_conditions(&s, &[(0, ValueSet::single(0)), (1, ValueSet::single(1))]);
        let rel = release(&[q1, AggregateQuery::total(&s)], &d);
        let aux = generate_synthetic(s.clone(), 50, 1, &Skew::new()).unwrap();
        let cfg = DesiaConfig {
            shadows: 60,
            ..Default::default()
        };
        let t = TargetUser::new(&s, PartialRecord(vec![0]));
        let r = desia_attack(&rel, &t, &aux, &cfg, 3).unwrap();
        assert!(r.deterministic);
        assert_eq!((r.prediction, r.score), (1, 1.0));

        let bare = release(&[], &d);
        let r = desia_attack(&bare, &t, &aux, &cfg, 3).unwrap();
        assert!(!r.deterministic);
        assert!(r.score > 0.0 && r.score < 1.0);
    }
}
