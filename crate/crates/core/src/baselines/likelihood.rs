//! Per-query Gaussian likelihood votes over shadow answers.

use rand::Rng;

use crate::aggregates::{AggregateQuery, QueryRelease};
use crate::desia::ShadowBatch;
use crate::model::{Code, TargetUser};
use crate::seed;

/// Mean and standard deviation of each query answer among the shadow
/// datasets whose target carries `value`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGroup {
    pub value: Code,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl GaussianGroup {
    /// One group per label present in `batch`, by ascending label.
    pub fn from_batch(batch: &ShadowBatch) -> Vec<GaussianGroup> {
        let mut values = batch.labels.clone();
        values.sort_unstable();
        values.dedup();
        let cols = batch.features.cols;
        values
            .into_iter()
            .map(|value| {
                let rows: Vec<usize> = (0..batch.len()).filter(|&i| batch.labels[i] == value).collect();
                let n = rows.len() as f64;
                let mut mean = vec![0.0; cols];
                for &i in &rows {
                    for (m, x) in mean.iter_mut().zip(batch.features.row(i)) {
                        *m += x / n;
                    }
                }
                let mut var = vec![0.0; cols];
                for &i in &rows {
                    for ((v, x), m) in var.iter_mut().zip(batch.features.row(i)).zip(&mean) {
                        *v += (x - m) * (x - m) / n;
                    }
                }
                GaussianGroup {
                    value,
                    mean,
                    std: var.into_iter().map(f64::sqrt).collect(),
                }
            })
            .collect()
    }

    /// Log density of `x` under query `q`; a zero deviation is a point mass.
    fn log_density(&self, q: usize, x: f64) -> f64 {
        let (m, s) = (self.mean[q], self.std[q]);
        if s == 0.0 {
            return if x == m { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        let z = (x - m) / s;
        -0.5 * z * z - s.ln()
    }
}

/// Indices of the queries that cover the target's known values and
/// condition on the sensitive attribute.
pub fn likelihood_vote_set(queries: &[AggregateQuery], target: &TargetUser) -> Vec<usize> {
    queries
        .iter()
        .enumerate()
        .filter(|(_, q)| q.conditions_sensitive() && q.covers_partial(&target.partial))
        .map(|(i, _)| i)
        .collect()
}

fn pick(tied: &[Code], rng: &mut seed::Rng) -> Code {
    tied[rng.gen_range(0..tied.len())]
}

/// Each query in the vote set votes for the group under which the released
/// answer is most likely; the majority wins with seeded uniform tie-breaks.
/// The score is the vote share of value 1. An empty vote set, or fewer
/// than two groups, gives a uniform guess with score 0.5.
pub fn likelihood_attack(rel: &QueryRelease, target: &TargetUser, batch: &ShadowBatch, seed: u64) -> (Code, f64) {
    let mut rng = seed::rng(seed);
    let k = rel.schema.sensitive_size() as Code;
    let groups = GaussianGroup::from_batch(batch);
    let votes_on = likelihood_vote_set(&rel.queries, target);
    if votes_on.is_empty() || groups.len() < 2 {
        return (rng.gen_range(0..k), 0.5);
    }
    let mut tally = vec![0usize; k as usize];
    for &q in &votes_on {
        let x = rel.answers[q] as f64;
        let dens: Vec<f64> = groups.iter().map(|g| g.log_density(q, x)).collect();
        let best = dens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<Code> = groups
            .iter()
            .zip(&dens)
            .filter(|(_, &d)| d == best)
            .map(|(g, _)| g.value)
            .collect();
        tally[pick(&tied, &mut rng) as usize] += 1;
    }
    let top = *tally.iter().max().unwrap();
    let tied: Vec<Code> = (0..k).filter(|&v| tally[v as usize] == top).collect();
    let value = pick(&tied, &mut rng);
    let ones = tally.get(1).copied().unwrap_or(0);
    (value, ones as f64 / votes_on.len() as f64)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::aggregates::ValueSet;
    use crate::desia::FeatureMatrix;
    use crate::model::{AttributeSchema, PartialRecord};

    fn schema() -> Arc<AttributeSchema> {
        Arc::new(AttributeSchema::from_sizes(&[("a", 3), ("s", 2)]).unwrap())
    }

    fn batch(rows: &[(f64, Code)]) -> ShadowBatch {
        ShadowBatch {
            features: FeatureMatrix::new(rows.len(), 1, rows.iter().map(|r| r.0).collect()).unwrap(),
            labels: rows.iter().map(|r| r.1).collect(),
            train_len: rows.len(),
        }
    }

    fn target() -> TargetUser {
        TargetUser {
            id: "1".into(),
            partial: PartialRecord(vec![1]),
        }
    }

    fn rel(q: AggregateQuery, answer: i64) -> QueryRelease {
        QueryRelease {
            schema: schema(),
            queries: vec![q],
            answers: vec![answer],
            dataset_size: 10,
            noise: None,
        }
    }

    #[test]
    fn density_comparison() {
        let s = schema();
        let q = AggregateQuery::with_conditions(&s, &[(0, ValueSet::single(1)), (1, ValueSet::single(1))]);
        // Group 0: {4, 6} (mean 5, sd 1); group 1: {6, 8} (mean 7, sd 1).
        let b = batch(&[(4.0, 0), (6.0, 0), (6.0, 1), (8.0, 1)]);
        assert_eq!(likelihood_attack(&rel(q.clone(), 7), &target(), &b, 0), (1, 1.0));
        assert_eq!(likelihood_attack(&rel(q, 5), &target(), &b, 0), (0, 0.0));
    }

    #[test]
    fn vote_set_membership() {
        let s = schema();
        let no_sensitive = AggregateQuery::with_conditions(&s, &[(0, ValueSet::single(1))]);
        let other_value = AggregateQuery::with_conditions(&s, &[(0, ValueSet::single(2)), (1, ValueSet::single(1))]);
        let good =
            AggregateQuery::with_conditions(&s, &[(0, ValueSet::Range { lo: 0, hi: 1 }), (1, ValueSet::single(0))]);
        let qs = vec![no_sensitive, other_value, good];
        assert_eq!(likelihood_vote_set(&qs, &target()), vec![2]);
        let (_, score) = likelihood_attack(&rel(qs[0].clone(), 3), &target(), &batch(&[(1.0, 0), (2.0, 1)]), 3);
        assert_eq!(score, 0.5);
    }

    #[test]
    fn point_masses() {
        let s = schema();
        let q = AggregateQuery::with_conditions(&s, &[(1, ValueSet::single(1))]);
        let b = batch(&[(3.0, 0), (3.0, 0), (4.0, 1), (4.0, 1)]);
        assert_eq!(likelihood_attack(&rel(q.clone(), 4), &target(), &b, 0).0, 1);
        assert_eq!(likelihood_attack(&rel(q.clone(), 3), &target(), &b, 0).0, 0);
        // Both groups are the same point mass: a seeded coin flip.
        let same = batch(&[(3.0, 0), (3.0, 1)]);
        let ones = (0..400)
            .filter(|&sd| likelihood_attack(&rel(q.clone(), 3), &target(), &same, sd).0 == 1)
            .count();
        assert!(ones > 150 && ones < 250, "{ones}");
    }
}
