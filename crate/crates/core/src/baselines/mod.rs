//! Reconstruction baselines and the attacks built on top of them.

mod cip;
mod likelihood;
mod rap;
mod vote;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeSchema, Dataset};

pub use cip::{cip_hint, cip_reconstruct};
pub use likelihood::{likelihood_attack, likelihood_vote_set, GaussianGroup};
pub(crate) use rap::rap_reconstruct_with;
pub use rap::{rap_fit, rap_loss_grad, rap_reconstruct, rap_relaxed_eval, Hardening, RapConfig, RapFit, SoftDataset};
pub use vote::{aia_vote, l_neighborhood, mia_vote};

/// Tentative reconstructed datasets from one method.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionSet {
    pub method: String,
    pub datasets: Vec<Dataset>,
    pub seeds: Vec<u64>,
    /// Runs that produced no dataset, and why.
    pub diagnostics: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    method: String,
    seeds: Vec<u64>,
    diagnostics: Vec<String>,
    files: Vec<String>,
}

impl ReconstructionSet {
    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Writes `dataset_<k>.csv` files and a `manifest.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for (k, d) in self.datasets.iter().enumerate() {
            let name = format!("dataset_{k}.csv");
            d.save_csv(dir.join(&name))?;
            files.push(name);
        }
        let manifest = Manifest {
            method: self.method.clone(),
            seeds: self.seeds.clone(),
            diagnostics: self.diagnostics.clone(),
            files,
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>, schema: std::sync::Arc<AttributeSchema>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        let datasets = m
            .files
            .iter()
            .map(|f| crate::model::load_dataset_csv(dir.join(f), schema.clone()))
            .collect::<Result<_>>()?;
        Ok(ReconstructionSet {
            method: m.method,
            datasets,
            seeds: m.seeds,
            diagnostics: m.diagnostics,
        })
    }
}
