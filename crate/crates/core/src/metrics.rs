//! ROC curves, AUC, TPR at a fixed FPR, and run reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::desia::AttackResult;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores at or above this value are called positive.
    pub threshold: f64,
}

/// Operating points from (0, 0) to (1, 1), one per distinct score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// Threshold sweep over the distinct scores, highest first. Tied scores
/// move together.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Parameter(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Parameter(format!("score {bad} is not a number")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Parameter("ROC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: t,
        });
    }
    Ok(RocCurve { points })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Best TPR among operating points with FPR at most `k`; no interpolation.
pub fn tpr_at_fpr(curve: &RocCurve, k: f64) -> Result<f64> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Parameter(format!("k must lie in (0, 1), got {k}")));
    }
    Ok(curve
        .points
        .iter()
        .filter(|p| p.fpr <= k)
        .map(|p| p.tpr)
        .fold(0.0, f64::max))
}

/// Fraction of results whose prediction equals the truth; results without
/// truth are skipped.
pub fn accuracy(results: &[AttackResult]) -> Option<f64> {
    let judged: Vec<bool> = results
        .iter()
        .filter_map(|r| r.truth.map(|t| t == r.prediction))
        .collect();
    if judged.is_empty() {
        None
    } else {
        Some(judged.iter().filter(|&&b| b).count() as f64 / judged.len() as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub count: usize,
    pub accuracy: Option<f64>,
    /// Present when every truth is 0 or 1 and both occur.
    pub auc: Option<f64>,
    pub tpr_at_fpr: BTreeMap<String, f64>,
    pub deterministic_coverage: f64,
    /// Accuracy among deterministic results.
    pub deterministic_accuracy: Option<f64>,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(flatten)]
    pub overall: MethodReport,
    pub per_method: BTreeMap<String, MethodReport>,
    pub warnings: Vec<String>,
}

fn fpr_key(k: f64) -> String {
    format!("{k}")
}

fn method_report(results: &[&AttackResult], ks: &[f64]) -> MethodReport {
    let owned: Vec<AttackResult> = results.iter().map(|r| (*r).clone()).collect();
    let det: Vec<AttackResult> = owned.iter().filter(|r| r.deterministic).cloned().collect();
    let binary = owned.iter().all(|r| matches!(r.truth, Some(0) | Some(1)));
    let curve = if binary {
        let scores: Vec<f64> = owned.iter().map(|r| r.score).collect();
        let labels: Vec<bool> = owned.iter().map(|r| r.truth == Some(1)).collect();
        roc(&scores, &labels).ok()
    } else {
        None
    };
    let mut tpr = BTreeMap::new();
    if let Some(c) = &curve {
        for &k in ks {
            if let Ok(v) = tpr_at_fpr(c, k) {
                tpr.insert(fpr_key(k), v);
            }
        }
    }
    MethodReport {
        count: owned.len(),
        accuracy: accuracy(&owned),
        auc: curve.as_ref().map(auc),
        tpr_at_fpr: tpr,
        deterministic_coverage: if owned.is_empty() {
            0.0
        } else {
            det.len() as f64 / owned.len() as f64
        },
        deterministic_accuracy: accuracy(&det),
        roc: curve,
    }
}

/// Overall and per-method metrics.
pub fn summarize(results: &[AttackResult], ks: &[f64]) -> Report {
    let mut warnings = Vec::new();
    if results.is_empty() {
        warnings.push("no results to summarize".to_string());
        log::warn!("no results to summarize");
    }
    let all: Vec<&AttackResult> = results.iter().collect();
    let overall = method_report(&all, ks);
    if !results.is_empty() && overall.auc.is_none() {
        warnings.push("AUC not computed: truths are not binary with both classes present".into());
    }
    let mut groups: BTreeMap<String, Vec<&AttackResult>> = BTreeMap::new();
    for r in results {
        groups.entry(r.method.clone()).or_default().push(r);
    }
    let per_method = groups.into_iter().map(|(m, rs)| (m, method_report(&rs, ks))).collect();
    Report {
        overall,
        per_method,
        warnings,
    }
}

/// Writes `fpr,tpr,threshold` rows.
pub fn write_roc_csv(curve: &RocCurve, mut w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(&mut w);
    out.write_record(["fpr", "tpr", "threshold"])?;
    for p in &curve.points {
        out.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("<roc csv>", e))?;
    Ok(())
}

/// `report.json` plus `roc.csv` and `roc_<method>.csv` where defined.
pub fn write_report(report: &Report, meta: serde_json::Value, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut value = serde_json::to_value(report)?;
    value["meta"] = meta;
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&value)? + "\n").map_err(|e| Error::io(&path, e))?;
    let mut curves = vec![("roc.csv".to_string(), report.overall.roc.as_ref())];
    for (m, r) in &report.per_method {
        curves.push((format!("roc_{m}.csv"), r.roc.as_ref()));
    }
    for (name, curve) in curves {
        if let Some(c) = curve {
            let path = dir.join(name);
            let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_roc_csv(c, std::io::BufWriter::new(f))?;
        }
    }
    Ok(())
}
