use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeSchema, Dataset};
use crate::seed;

use super::builders::{check_hash, RawQuery};
use super::{evaluate_all, AggregateQuery};

/// Parameters of a noisy release.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    /// Per-aggregate budget; the noise scale is `1/epsilon`.
    pub epsilon: f64,
    pub seed: u64,
}

/// A fixed set of released aggregates: queries, answers and `|D|`.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRelease {
    pub schema: Arc<AttributeSchema>,
    pub queries: Vec<AggregateQuery>,
    /// May be negative or exceed `dataset_size` after noise.
    pub answers: Vec<i64>,
    pub dataset_size: usize,
    pub noise: Option<NoiseMeta>,
}

#[derive(Serialize, Deserialize)]
struct ReleaseFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
    schema_hash: String,
    dataset_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseMeta>,
    queries: Vec<RawQuery>,
    answers: Vec<i64>,
}

impl QueryRelease {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.noise.is_none()
    }

    pub fn to_json(&self, meta: Option<serde_json::Value>) -> String {
        let file = ReleaseFile {
            meta,
            schema_hash: self.schema.hash(),
            dataset_size: self.dataset_size,
            noise: self.noise,
            queries: self.queries.iter().map(|q| RawQuery::encode(&self.schema, q)).collect(),
            answers: self.answers.clone(),
        };
        serde_json::to_string_pretty(&file).expect("release serializes")
    }

    pub fn from_json(text: &str, schema: Arc<AttributeSchema>) -> Result<Self> {
        let file: ReleaseFile = serde_json::from_str(text)?;
        check_hash(Some(&file.schema_hash), &schema)?;
        if file.answers.len() != file.queries.len() {
            return Err(Error::Parameter(format!(
                "release has {} answers for {} queries",
                file.answers.len(),
                file.queries.len()
            )));
        }
        let queries = file
            .queries
            .iter()
            .enumerate()
            .map(|(i, q)| q.decode(&schema, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(QueryRelease {
            schema,
            queries,
            answers: file.answers,
            dataset_size: file.dataset_size,
            noise: file.noise,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, meta: Option<serde_json::Value>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json(meta) + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, schema: Arc<AttributeSchema>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, schema)
    }
}

/// Exact release of `queries` on `d`.
pub fn release(queries: &[AggregateQuery], d: &Dataset) -> QueryRelease {
    QueryRelease {
        schema: d.schema().clone(),
        queries: queries.to_vec(),
        answers: evaluate_all(queries, d).into_iter().map(|a| a as i64).collect(),
        dataset_size: d.len(),
        noise: None,
    }
}

/// One draw from Laplace(0, scale) by inversion.
pub fn laplace_sample<R: rand::Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// Adds Laplace(1/ε) noise to every answer and rounds to the nearest
/// integer. Answers are published as-is, including negative ones.
pub fn add_laplace_noise(rel: &QueryRelease, epsilon: f64, seed: u64) -> Result<QueryRelease> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Parameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if rel.noise.is_some() {
        return Err(Error::Parameter("release is already noisy".into()));
    }
    let mut rng = seed::rng(seed);
    let scale = 1.0 / epsilon;
    let answers = rel
        .answers
        .iter()
        .map(|&a| (a as f64 + laplace_sample(&mut rng, scale)).round() as i64)
        .collect();
    Ok(QueryRelease {
        answers,
        noise: Some(NoiseMeta { epsilon, seed }),
        ..rel.clone()
    })
}
