//! Turning reconstructed datasets into attribute and membership guesses.

use rand::Rng;

use super::ReconstructionSet;
use crate::model::{Code, PartialRecord, Record, TargetUser};
use crate::seed;

/// Records from all datasets whose non-sensitive values differ from
/// `partial` in exactly `l` places, counted with multiplicity.
pub fn l_neighborhood(partial: &PartialRecord, recon: &ReconstructionSet, l: usize) -> Vec<Record> {
    recon
        .datasets
        .iter()
        .flat_map(|d| d.records())
        .filter(|r| partial.hamming(r.values()) == l)
        .cloned()
        .collect()
}

/// Majority sensitive value in the closest non-empty neighborhood of the
/// target, with a seeded uniform choice among tied values. The score is the
/// share of votes for value 1. No records at all gives a uniform guess with
/// score 0.5.
pub fn aia_vote(target: &TargetUser, recon: &ReconstructionSet, seed: u64) -> (Code, f64) {
    let mut rng = seed::rng(seed);
    let Some(schema) = recon.datasets.first().map(|d| d.schema().clone()) else {
        return (0, 0.5);
    };
    let k = schema.sensitive_size();
    let width = target.partial.values().len();
    for l in 0..=width {
        let hood = l_neighborhood(&target.partial, recon, l);
        if hood.is_empty() {
            continue;
        }
        let mut counts = vec![0usize; k];
        for r in &hood {
            counts[r.sensitive() as usize] += 1;
        }
        let top = *counts.iter().max().expect("non-empty domain");
        let tied: Vec<usize> = (0..k).filter(|&v| counts[v] == top).collect();
        let value = tied[rng.gen_range(0..tied.len())] as Code;
        let ones = counts.get(1).copied().unwrap_or(0);
        return (value, ones as f64 / hood.len() as f64);
    }
    (rng.gen_range(0..k) as Code, 0.5)
}

/// Member when the exact record appears in more than half of the datasets;
/// the score is the fraction of datasets containing it. An empty set gives
/// (0, 0.5).
pub fn mia_vote(target: &Record, recon: &ReconstructionSet) -> (u8, f64) {
    let k = recon.datasets.len();
    if k == 0 {
        return (0, 0.5);
    }
    let count = recon
        .datasets
        .iter()
        .filter(|d| d.records().iter().any(|r| r == target))
        .count();
    (u8::from(2 * count > k), count as f64 / k as f64)
}
