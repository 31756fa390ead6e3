//! RAP-style reconstruction: a relaxed dataset of per-row, per-attribute
//! categorical distributions fitted to the released answers by gradient
//! descent on softmax logits, then hardened row by row.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ReconstructionSet;
use crate::aggregates::{AggregateQuery, QueryRelease};
use crate::error::{Error, Result};
use crate::model::{AttributeSchema, Code, Dataset, Record};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hardening {
    /// Most probable value per attribute, ties to the lowest code.
    Argmax,
    /// One seeded draw from each row distribution.
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RapConfig {
    pub iterations: usize,
    pub step: f64,
    /// Logit given to the observed value when initializing from auxiliary
    /// records. `f64::INFINITY` gives exact one-hot rows.
    pub init_scale: f64,
    pub hardening: Hardening,
}

impl Default for RapConfig {
    fn default() -> Self {
        RapConfig {
            iterations: 1000,
            step: 0.1,
            init_scale: 3.0,
            hardening: Hardening::Argmax,
        }
    }
}

/// `rows` records, each a probability vector per attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftDataset {
    schema: Arc<AttributeSchema>,
    rows: usize,
    offsets: Vec<usize>,
    probs: Vec<f64>,
}

fn offsets(schema: &AttributeSchema) -> Vec<usize> {
    let mut out = vec![0];
    for a in schema.attributes() {
        out.push(out.last().unwrap() + a.size());
    }
    out
}

impl SoftDataset {
    /// Uniform distribution in every row.
    pub fn uniform(schema: Arc<AttributeSchema>, rows: usize) -> Self {
        let offsets = offsets(&schema);
        let width = *offsets.last().unwrap();
        let mut probs = vec![0.0; rows * width];
        for r in 0..rows {
            for i in 0..schema.len() {
                let n = schema.attribute(i).size();
                for v in offsets[i]..offsets[i + 1] {
                    probs[r * width + v] = 1.0 / n as f64;
                }
            }
        }
        SoftDataset {
            schema,
            rows,
            offsets,
            probs,
        }
    }

    /// Exact one-hot rows of `d`.
    pub fn one_hot(d: &Dataset) -> Self {
        let schema = d.schema().clone();
        let offsets = offsets(&schema);
        let width = *offsets.last().unwrap();
        let mut probs = vec![0.0; d.len() * width];
        for (r, rec) in d.records().iter().enumerate() {
            for (i, &v) in rec.values().iter().enumerate() {
                probs[r * width + offsets[i] + v as usize] = 1.0;
            }
        }
        SoftDataset {
            schema,
            rows: d.len(),
            offsets,
            probs,
        }
    }

    fn from_logits(schema: Arc<AttributeSchema>, rows: usize, logits: &[f64]) -> Self {
        let offsets = offsets(&schema);
        let mut probs = logits.to_vec();
        softmax_rows(&mut probs, &offsets, rows);
        SoftDataset {
            schema,
            rows,
            offsets,
            probs,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    fn width(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Distribution of attribute `i` in row `r`.
    pub fn distribution(&self, r: usize, i: usize) -> &[f64] {
        let w = self.width();
        &self.probs[r * w + self.offsets[i]..r * w + self.offsets[i + 1]]
    }

    /// Argmax per attribute, or one draw per attribute when sampling.
    pub fn harden(&self, mode: Hardening, seed: u64) -> Dataset {
        let mut rng = seed::rng(seed);
        let records = (0..self.rows)
            .map(|r| {
                Record(
                    (0..self.schema.len())
                        .map(|i| {
                            let p = self.distribution(r, i);
                            match mode {
                                Hardening::Argmax => argmax(p),
                                Hardening::Sample => draw(p, rng.gen()),
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        Dataset::new(self.schema.clone(), records).expect("hardened codes are in domain")
    }
}

fn argmax(p: &[f64]) -> Code {
    let mut best = 0;
    for k in 1..p.len() {
        if p[k] > p[best] {
            best = k;
        }
    }
    best as Code
}

fn draw(p: &[f64], u: f64) -> Code {
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k as Code;
        }
    }
    (p.len() - 1) as Code
}

fn softmax_rows(v: &mut [f64], offsets: &[usize], rows: usize) {
    let width = *offsets.last().unwrap();
    for r in 0..rows {
        for w in offsets.windows(2) {
            let seg = &mut v[r * width + w[0]..r * width + w[1]];
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in seg.iter_mut() {
                *x = if *x == max { 1.0 } else { (*x - max).exp() };
                sum += *x;
            }
            for x in seg.iter_mut() {
                *x /= sum;
            }
        }
    }
}

/// Expected count of `q` when rows draw attributes independently.
pub fn rap_relaxed_eval(soft: &SoftDataset, q: &AggregateQuery) -> f64 {
    let conds = conditions(&soft.schema, q);
    (0..soft.rows)
        .map(|r| {
            conds
                .iter()
                .map(|(i, codes)| {
                    let p = soft.distribution(r, *i);
                    codes.iter().map(|&c| p[c as usize]).sum::<f64>()
                })
                .product::<f64>()
        })
        .sum()
}

/// Non-trivial conditions of `q` as (attribute, codes).
fn conditions(schema: &AttributeSchema, q: &AggregateQuery) -> Vec<(usize, Vec<Code>)> {
    q.subsets
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_all())
        .map(|(i, s)| (i, s.codes(schema.attribute(i).size())))
        .collect()
}

/// Squared-error objective over relaxed answers.
pub(crate) struct RapObjective {
    rows: usize,
    offsets: Vec<usize>,
    conds: Vec<Vec<(usize, Vec<Code>)>>,
    targets: Vec<f64>,
}

impl RapObjective {
    pub(crate) fn new(schema: Arc<AttributeSchema>, rows: usize, queries: &[AggregateQuery], targets: &[f64]) -> Self {
        let conds = queries.iter().map(|q| conditions(&schema, q)).collect();
        RapObjective {
            offsets: offsets(&schema),
            rows,
            conds,
            targets: targets.to_vec(),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.rows * self.offsets.last().unwrap()
    }

    /// `Σ_q (relaxed_q − target_q)²`; gradient with respect to the logits
    /// into `grad`.
    pub(crate) fn eval(&self, logits: &[f64], grad: &mut [f64]) -> f64 {
        let width = *self.offsets.last().unwrap();
        let mut p = logits.to_vec();
        softmax_rows(&mut p, &self.offsets, self.rows);
        // dL/dp first; the answers are multilinear in the probabilities.
        let mut gp = vec![0.0; p.len()];
        let mut loss = 0.0;
        let mut factors = Vec::new();
        let mut prefix = Vec::new();
        for (conds, &t) in self.conds.iter().zip(&self.targets) {
            let nc = conds.len();
            factors.clear();
            let mut answer = 0.0;
            for r in 0..self.rows {
                let mut prod = 1.0;
                for (i, codes) in conds {
                    let base = r * width + self.offsets[*i];
                    let f = codes.iter().map(|&c| p[base + c as usize]).sum::<f64>();
                    factors.push(f);
                    prod *= f;
                }
                answer += prod;
            }
            let e = answer - t;
            loss += e * e;
            let coef = 2.0 * e;
            for r in 0..self.rows {
                let f = &factors[r * nc..(r + 1) * nc];
                // Product of the other factors via prefix and suffix products.
                prefix.clear();
                let mut acc = 1.0;
                for &x in f {
                    prefix.push(acc);
                    acc *= x;
                }
                let mut suffix = 1.0;
                for k in (0..nc).rev() {
                    let others = prefix[k] * suffix;
                    suffix *= f[k];
                    let (i, codes) = &conds[k];
                    let base = r * width + self.offsets[*i];
                    for &c in codes {
                        gp[base + c as usize] += coef * others;
                    }
                }
            }
        }
        // Chain through each softmax block.
        for r in 0..self.rows {
            for w in self.offsets.windows(2) {
                let range = r * width + w[0]..r * width + w[1];
                let inner: f64 = p[range.clone()]
                    .iter()
                    .zip(&gp[range.clone()])
                    .map(|(a, b)| a * b)
                    .sum();
                for k in range {
                    grad[k] = p[k] * (gp[k] - inner);
                }
            }
        }
        loss
    }
}

/// Squared error of the relaxed answers of `rows` soft records given as
/// per-attribute logits, and its gradient with respect to the logits.
pub fn rap_loss_grad(
    schema: Arc<AttributeSchema>,
    rows: usize,
    queries: &[AggregateQuery],
    targets: &[f64],
    logits: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let obj = RapObjective::new(schema, rows, queries, targets);
    if logits.len() != obj.dim() || queries.len() != targets.len() {
        return Err(Error::Parameter(format!(
            "expected {} logits and one target per query",
            obj.dim()
        )));
    }
    let mut g = vec![0.0; logits.len()];
    let loss = obj.eval(logits, &mut g);
    Ok((loss, g))
}

/// Initial logits: small noise around uniform, or scaled one-hot rows of an
/// auxiliary sample.
fn initial_logits(
    schema: &AttributeSchema,
    rows: usize,
    init: Option<&Dataset>,
    scale: f64,
    rng: &mut seed::Rng,
) -> Vec<f64> {
    let offsets = offsets(schema);
    let width = *offsets.last().unwrap();
    match init {
        Some(aux) if !aux.is_empty() => {
            let picks: Vec<usize> = if aux.len() >= rows {
                index::sample(rng, aux.len(), rows).into_vec()
            } else {
                (0..rows).map(|_| rng.gen_range(0..aux.len())).collect()
            };
            let mut logits = vec![0.0; rows * width];
            for (r, &j) in picks.iter().enumerate() {
                for (i, &v) in aux.records()[j].values().iter().enumerate() {
                    let base = r * width + offsets[i];
                    if scale.is_infinite() {
                        logits[base..base + schema.attribute(i).size()].fill(f64::NEG_INFINITY);
                        logits[base + v as usize] = 0.0;
                    } else {
                        logits[base + v as usize] = scale;
                    }
                }
            }
            logits
        }
        _ => (0..rows * width).map(|_| rng.gen_range(-0.1..0.1)).collect(),
    }
}

/// Outcome of one relaxed fit.
pub struct RapFit {
    pub soft: SoftDataset,
    pub losses: Vec<f64>,
}

/// Fits `rows` relaxed records to `(queries, targets)`.
///
/// Each step moves the logits against the gradient; a step that raises the
/// loss is undone and the step size halved, so the recorded losses never
/// increase.
pub fn rap_fit(
    schema: Arc<AttributeSchema>,
    rows: usize,
    queries: &[AggregateQuery],
    targets: &[f64],
    init: Option<&Dataset>,
    seed: u64,
    cfg: &RapConfig,
) -> Result<RapFit> {
    let mut rng = seed::rng(seed);
    let obj = RapObjective::new(schema.clone(), rows, queries, targets);
    let mut logits = initial_logits(&schema, rows, init, cfg.init_scale, &mut rng);
    let mut grad = vec![0.0; obj.dim()];
    let mut loss = obj.eval(&logits, &mut grad);
    let mut losses = vec![loss];
    let mut step = cfg.step;
    let mut trial = logits.clone();
    let mut trial_grad = vec![0.0; obj.dim()];
    for _ in 0..cfg.iterations {
        if !loss.is_finite() {
            return Err(Error::Parameter(format!("non-finite relaxed loss {loss}")));
        }
        if loss == 0.0 || step < 1e-12 {
            break;
        }
        for k in 0..logits.len() {
            trial[k] = logits[k] - step * grad[k];
        }
        let next = obj.eval(&trial, &mut trial_grad);
        if next <= loss {
            std::mem::swap(&mut logits, &mut trial);
            std::mem::swap(&mut grad, &mut trial_grad);
            loss = next;
        } else {
            step *= 0.5;
        }
        losses.push(loss);
    }
    if !loss.is_finite() {
        return Err(Error::Parameter(format!("non-finite relaxed loss {loss}")));
    }
    Ok(RapFit {
        soft: SoftDataset::from_logits(schema, rows, &logits),
        losses,
    })
}

/// `k` hardened RAP-style reconstructions of size `s` under derived seeds.
/// Runs with a non-finite loss are dropped and noted in the diagnostics.
pub fn rap_reconstruct(
    rel: &QueryRelease,
    k: usize,
    init: Option<&Dataset>,
    seed: u64,
    cfg: &RapConfig,
) -> ReconstructionSet {
    let targets: Vec<f64> = rel.answers.iter().map(|&a| a as f64).collect();
    rap_reconstruct_with(
        rel.schema.clone(),
        rel.dataset_size,
        &rel.queries,
        &targets,
        k,
        init,
        seed,
        cfg,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn rap_reconstruct_with(
    schema: Arc<AttributeSchema>,
    rows: usize,
    queries: &[AggregateQuery],
    targets: &[f64],
    k: usize,
    init: Option<&Dataset>,
    seed: u64,
    cfg: &RapConfig,
) -> ReconstructionSet {
    let seeds: Vec<u64> = (0..k as u64).map(|i| seed::derive(seed, &[i])).collect();
    let runs: Vec<std::result::Result<Dataset, String>> = seeds
        .par_iter()
        .map(|&s| {
            rap_fit(schema.clone(), rows, queries, targets, init, s, cfg)
                .map(|fit| fit.soft.harden(cfg.hardening, seed::derive(s, &[1])))
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut out = ReconstructionSet {
        method: if init.is_some() { "rap-init" } else { "rap-rand" }.into(),
        datasets: Vec::new(),
        seeds: Vec::new(),
        diagnostics: Vec::new(),
    };
    for (run, s) in runs.into_iter().zip(seeds) {
        match run {
            Ok(d) => {
                out.datasets.push(d);
                out.seeds.push(s);
            }
            Err(e) => out.diagnostics.push(format!("seed {s}: {e}")),
        }
    }
    out
}
