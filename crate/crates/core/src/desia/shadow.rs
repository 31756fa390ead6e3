//! Shadow datasets: auxiliary records around a planted target, labelled
//! with the target's sensitive value or membership bit.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::logistic::FeatureMatrix;
use crate::aggregates::{laplace_sample, AggregateQuery, CompiledQueries};
use crate::error::{Error, Result};
use crate::model::{AttributeSchema, Code, Dataset, Record, TargetUser};
use crate::seed;

/// Query answers of `N` shadow datasets and their labels. The first
/// `train_len` rows form the training split.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowBatch {
    pub features: FeatureMatrix,
    pub labels: Vec<Code>,
    pub train_len: usize,
}

impl ShadowBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn train_rows(&self) -> Vec<usize> {
        (0..self.train_len).collect()
    }

    pub fn validation_rows(&self) -> Vec<usize> {
        (self.train_len..self.len()).collect()
    }

    /// Adds independent Laplace(1/ε) noise to every feature, mirroring a
    /// noisy release.
    pub fn add_noise(&mut self, epsilon: f64, seed: u64) -> Result<()> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Parameter(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        let cols = self.features.cols;
        self.features
            .data
            .par_chunks_mut(cols.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                let mut rng = seed::derived_rng(seed, &[i as u64]);
                for v in row {
                    *v = (*v + laplace_sample(&mut rng, 1.0 / epsilon)).round();
                }
            });
        Ok(())
    }
}

fn train_len(n: usize) -> usize {
    2 * n / 3
}

/// Cell of `r` with its sensitive value set to 0.
fn base_cell(schema: &AttributeSchema, r: &Record) -> usize {
    schema.cell_of(r.values()) - r.sensitive() as usize
}

fn check(aux: &Dataset, needed: usize, n: usize) -> Result<()> {
    if aux.len() < needed {
        return Err(Error::Parameter(format!(
            "auxiliary dataset has {} records, {needed} needed per shadow dataset",
            aux.len()
        )));
    }
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 shadow datasets, got {n}")));
    }
    Ok(())
}

/// AIA shadows of size `dataset_size`: `dataset_size − 1` auxiliary records
/// with fresh uniform sensitive values plus the target completed with a
/// uniform label.
pub fn sample_shadow_datasets_aia(
    aux: &Dataset,
    target: &TargetUser,
    queries: &[AggregateQuery],
    n: usize,
    dataset_size: usize,
    seed: u64,
) -> Result<ShadowBatch> {
    let compiled = CompiledQueries::new(aux.schema(), queries);
    shadow_aia_compiled(aux, target, &compiled, n, dataset_size, seed)
}

pub(crate) fn shadow_aia_compiled(
    aux: &Dataset,
    target: &TargetUser,
    compiled: &CompiledQueries,
    n: usize,
    dataset_size: usize,
    seed: u64,
) -> Result<ShadowBatch> {
    let others = dataset_size
        .checked_sub(1)
        .ok_or_else(|| Error::Parameter("dataset size must be at least 1".into()))?;
    check(aux, others, n)?;
    let schema = aux.schema();
    let k = schema.sensitive_size() as u32;
    let bases: Vec<usize> = aux.records().iter().map(|r| base_cell(schema, r)).collect();
    let target_base = schema.completion_cell(&target.partial, 0);
    let m = compiled.query_count();

    let rows: Vec<(Vec<f64>, Code)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::derived_rng(seed, &[i as u64]);
            let mut counts = vec![0u32; m];
            for j in index::sample(&mut rng, bases.len(), others) {
                let z: u32 = rng.gen_range(0..k);
                compiled.add_cell(bases[j] + z as usize, &mut counts);
            }
            let label: u32 = rng.gen_range(0..k);
            compiled.add_cell(target_base + label as usize, &mut counts);
            (counts.into_iter().map(f64::from).collect(), label)
        })
        .collect();
    Ok(assemble(rows, m))
}

/// MIA shadows, all of size `dataset_size`: with label 1 the target plus
/// `dataset_size − 1` auxiliary records, with label 0 `dataset_size`
/// auxiliary records. Auxiliary records keep their own values.
pub fn sample_shadow_datasets_mia(
    aux: &Dataset,
    target: &Record,
    queries: &[AggregateQuery],
    n: usize,
    dataset_size: usize,
    seed: u64,
) -> Result<ShadowBatch> {
    let compiled = CompiledQueries::new(aux.schema(), queries);
    shadow_mia_compiled(aux, target, &compiled, n, dataset_size, seed)
}

pub(crate) fn shadow_mia_compiled(
    aux: &Dataset,
    target: &Record,
    compiled: &CompiledQueries,
    n: usize,
    dataset_size: usize,
    seed: u64,
) -> Result<ShadowBatch> {
    if dataset_size == 0 {
        return Err(Error::Parameter("dataset size must be at least 1".into()));
    }
    check(aux, dataset_size, n)?;
    let schema = aux.schema();
    let cells: Vec<usize> = aux.records().iter().map(|r| schema.cell_of(r.values())).collect();
    let target_cell = schema.cell_of(target.values());
    let m = compiled.query_count();

    let rows: Vec<(Vec<f64>, Code)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::derived_rng(seed, &[i as u64]);
            let b: u32 = rng.gen_range(0..2);
            let mut counts = vec![0u32; m];
            let from_aux = dataset_size - b as usize;
            for j in index::sample(&mut rng, cells.len(), from_aux) {
                compiled.add_cell(cells[j], &mut counts);
            }
            if b == 1 {
                compiled.add_cell(target_cell, &mut counts);
            }
            (counts.into_iter().map(f64::from).collect(), b)
        })
        .collect();
    Ok(assemble(rows, m))
}

fn assemble(rows: Vec<(Vec<f64>, Code)>, m: usize) -> ShadowBatch {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for (f, l) in rows {
        data.extend(f);
        labels.push(l);
    }
    ShadowBatch {
        features: FeatureMatrix { rows: n, cols: m, data },
        labels,
        train_len: train_len(n),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::aggregates::{evaluate_all, ValueSet};
    use crate::model::{generate_synthetic, PartialRecord, Skew};

    fn setup() -> (Dataset, Vec<AggregateQuery>) {
        let schema = Arc::new(AttributeSchema::from_sizes(&[("a", 5), ("b", 4), ("s", 2)]).unwrap());
        let aux = generate_synthetic(schema.clone(), 300, 1, &Skew::new()).unwrap();
        let mut qs = vec![AggregateQuery::total(&schema)];
        for a in 0..5 {
            qs.push(AggregateQuery::with_conditions(&schema, &[(0, ValueSet::single(a))]));
            qs.push(AggregateQuery::with_conditions(
                &schema,
                &[(0, ValueSet::single(a)), (2, ValueSet::single(1))],
            ));
        }
        (aux, qs)
    }

    #[test]
    fn aia_shadow_sizes_and_labels() {
        let (aux, qs) = setup();
        let target = TargetUser::new(aux.schema(), PartialRecord(vec![2, 3]));
        let b = sample_shadow_datasets_aia(&aux, &target, &qs, 30, 40, 7).unwrap();
        assert_eq!(b.len(), 30);
        assert_eq!(b.features.cols, qs.len());
        assert_eq!(b.train_len, 20);
        for i in 0..30 {
            // The total-count query sees exactly the shadow size.
            assert_eq!(b.features.row(i)[0], 40.0);
            // Query a=2 ∧ s=1 includes the target exactly when its label is 1.
            let with = b.features.row(i)[6] as i64;
            let without_target = b.features.row(i)[5] as i64;
            assert!(with <= without_target);
        }
        assert!(sample_shadow_datasets_aia(&aux, &target, &qs, 30, 302, 7).is_err());
        assert!(sample_shadow_datasets_aia(&aux, &target, &qs, 1, 40, 7).is_err());
    }

    #[test]
    fn aia_shadow_matches_explicit_construction() {
        let (aux, qs) = setup();
        let schema = aux.schema().clone();
        let target = TargetUser::new(&schema, PartialRecord(vec![4, 0]));
        let b = sample_shadow_datasets_aia(&aux, &target, &qs, 5, 12, 3).unwrap();
        for i in 0..5 {
            let mut rng = seed::derived_rng(3, &[i as u64]);
            let mut recs = Vec::new();
            for j in index::sample(&mut rng, aux.len(), 11) {
                let z: u32 = rng.gen_range(0..2);
                let mut v = aux.records()[j].0.clone();
                v[2] = z;
                recs.push(Record(v));
            }
            let label: u32 = rng.gen_range(0..2);
            recs.push(target.partial.complete(label));
            let d = Dataset::new(schema.clone(), recs).unwrap();
            let expect: Vec<f64> = evaluate_all(&qs, &d).into_iter().map(|v| v as f64).collect();
            assert_eq!(b.features.row(i), &expect[..]);
            assert_eq!(b.labels[i], label);
        }
    }

    #[test]
    fn aia_label_balance() {
        let (aux, qs) = setup();
        let target = TargetUser::new(aux.schema(), PartialRecord(vec![0, 0]));
        let b = sample_shadow_datasets_aia(&aux, &target, &qs, 10_000, 5, 11).unwrap();
        let ones = b.labels.iter().filter(|&&l| l == 1).count() as f64 / 1e4;
        assert!((ones - 0.5).abs() < 0.02, "{ones}");
    }

    #[test]
    fn mia_shadow_sizes_and_membership() {
        let (aux, qs) = setup();
        let target = Record(vec![1, 1, 1]);
        let b = sample_shadow_datasets_mia(&aux, &target, &qs, 2000, 25, 5).unwrap();
        let mut ones = 0;
        for i in 0..b.len() {
            assert_eq!(b.features.row(i)[0], 25.0);
            ones += b.labels[i] as usize;
        }
        let frac = ones as f64 / 2000.0;
        assert!((frac - 0.5).abs() < 0.04, "{frac}");
    }

    #[test]
    fn worker_count_does_not_matter() {
        let (aux, qs) = setup();
        let target = TargetUser::new(aux.schema(), PartialRecord(vec![1, 2]));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| sample_shadow_datasets_aia(&aux, &target, &qs, 50, 30, 2).unwrap());
        let b = three.install(|| sample_shadow_datasets_aia(&aux, &target, &qs, 50, 30, 2).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn feature_noise_is_seeded() {
        let (aux, qs) = setup();
        let target = TargetUser::new(aux.schema(), PartialRecord(vec![1, 2]));
        let clean = sample_shadow_datasets_aia(&aux, &target, &qs, 20, 30, 2).unwrap();
        let mut a = clean.clone();
        let mut b = clean.clone();
        a.add_noise(0.5, 9).unwrap();
        b.add_noise(0.5, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, clean);
        assert!(a.clone().add_noise(0.0, 1).is_err());
    }
}
