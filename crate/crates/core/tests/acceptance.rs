//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.
//!
//! Criteria can be picked by number: `cargo test --test acceptance -- 1 9`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use desia::aggregates::{laplace_sample, release, AggregateQuery, QueryRelease, ValueSet};
use desia::baselines::{aia_vote, rap_loss_grad, ReconstructionSet};
use desia::config::{Overrides, RunConfig};
use desia::desia::{deterministic_aia, deterministic_mia, logistic_loss_grad, FeatureMatrix};
use desia::harness::{mean_auc, run_aia_game, sweep_noise, sweep_query_ratio, GameRun};
use desia::metrics::{auc, roc};
use desia::model::{randomize_sensitive, AttributeSchema, Code, Dataset, PartialRecord, Record, TargetUser};
use desia::seed;
use desia::solver::{solve, FeasibilityProblem, SolveOutcome, SolverLimits, SumConstraint};

const CENSUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/census/config.toml");

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Verdict); 11] = [
        (1, "deterministic AIA matches the brute-force oracle", aia_oracle),
        (2, "deterministic MIA matches the brute-force oracle", mia_oracle),
        (3, "solver verdicts match exhaustive enumeration", solver_oracle),
        (4, "deterministic results never contradict truth", deterministic_truth),
        (5, "DeSIA beats the reconstruction baselines", method_ordering),
        (6, "AUC grows with the query ratio", ratio_trend),
        (7, "AUC falls as the noise grows", noise_trend),
        (8, "ablation ordering", ablations),
        (9, "numerical kernels", kernels),
        (10, "mechanism statistics", mechanisms),
        (11, "CLI outputs are reproducible", cli_determinism),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !picked.is_empty() && !picked.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] criterion {n:>2}: {name} ({}; {:.1}s)",
            v.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Small random instances and their brute-force oracles.

const SMALL_SCHEMAS: &[&[usize]] = &[
    &[2, 2],
    &[3, 2],
    &[4, 2],
    &[2, 2, 2],
    &[2, 3],
    &[5, 3],
    &[3, 3],
    &[4, 4],
    &[2, 2, 4],
    &[2, 2, 2, 2],
    &[8, 2],
    &[2, 4, 2],
];

fn small_schema(sizes: &[usize]) -> Arc<AttributeSchema> {
    let names = ["a", "b", "c", "d"];
    let spec: Vec<(&str, usize)> = sizes.iter().enumerate().map(|(i, &k)| (names[i], k)).collect();
    Arc::new(AttributeSchema::from_sizes(&spec).unwrap())
}

fn random_record(schema: &AttributeSchema, rng: &mut seed::Rng) -> Record {
    Record(
        schema
            .domain_sizes()
            .iter()
            .map(|&k| rng.gen_range(0..k) as Code)
            .collect(),
    )
}

fn random_query(schema: &AttributeSchema, rng: &mut seed::Rng) -> AggregateQuery {
    let subsets = schema
        .domain_sizes()
        .iter()
        .map(|&k| {
            if rng.gen_bool(0.4) {
                return ValueSet::All;
            }
            let mut codes: Vec<Code> = (0..k as Code).filter(|_| rng.gen_bool(0.5)).collect();
            if codes.is_empty() {
                codes.push(rng.gen_range(0..k) as Code);
            }
            ValueSet::from_codes(codes, k).unwrap()
        })
        .collect();
    AggregateQuery::new(subsets)
}

struct Instance {
    schema: Arc<AttributeSchema>,
    data: Dataset,
    rel: QueryRelease,
}

fn small_instance(rng: &mut seed::Rng) -> Instance {
    let schema = small_schema(SMALL_SCHEMAS[rng.gen_range(0..SMALL_SCHEMAS.len())]);
    let s = rng.gen_range(1..=6);
    let records = (0..s).map(|_| random_record(&schema, rng)).collect();
    let data = Dataset::new(schema.clone(), records).unwrap();
    let m = rng.gen_range(0..=6);
    let queries: Vec<AggregateQuery> = (0..m).map(|_| random_query(&schema, rng)).collect();
    let rel = release(&queries, &data);
    Instance { schema, data, rel }
}

/// Calls `f` on the cell counts of every size-`s` multiset over `cells`.
fn for_each_multiset(cells: usize, s: u32, f: &mut impl FnMut(&[u32])) {
    fn go(counts: &mut Vec<u32>, i: usize, left: u32, f: &mut impl FnMut(&[u32])) {
        if i + 1 == counts.len() {
            counts[i] = left;
            f(counts);
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            go(counts, i + 1, left - c, f);
        }
    }
    go(&mut vec![0; cells], 0, s, f);
}

/// Cell counts of every dataset that gives the same answers as `rel`.
fn consistent_worlds(inst: &Instance) -> Vec<Vec<u32>> {
    let schema = &inst.schema;
    let members: Vec<Vec<usize>> = inst
        .rel
        .queries
        .iter()
        .map(|q| {
            (0..schema.cell_count())
                .filter(|&c| q.covers(&schema.record_of_cell(c)))
                .collect()
        })
        .collect();
    let mut worlds = Vec::new();
    for_each_multiset(schema.cell_count(), inst.rel.dataset_size as u32, &mut |counts| {
        let ok = members
            .iter()
            .zip(&inst.rel.answers)
            .all(|(cells, &a)| cells.iter().map(|&c| i64::from(counts[c])).sum::<i64>() == a);
        if ok {
            worlds.push(counts.to_vec());
        }
    });
    worlds
}

/// The value every world agrees on, if any world exists and they all agree.
fn agreed<T: PartialEq + Copy>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut it = values.into_iter();
    let first = it.next()?;
    it.all(|v| v == first).then_some(first)
}

fn aia_oracle() -> Verdict {
    let mut rng = seed::rng(101);
    let (mut instances, mut mismatches, mut determined) = (0, 0, 0);
    let limits = SolverLimits::nodes(1_000_000);
    while instances < 1000 {
        let inst = small_instance(&mut rng);
        let partial = if rng.gen_bool(0.8) {
            let i = rng.gen_range(0..inst.data.len());
            inst.data.records()[i].project()
        } else {
            random_record(&inst.schema, &mut rng).project()
        };
        let target = TargetUser::new(&inst.schema, partial.clone());
        let k = inst.schema.sensitive_size();
        let cells: Vec<usize> = (0..k)
            .map(|v| inst.schema.completion_cell(&partial, v as Code))
            .collect();
        let worlds = consistent_worlds(&inst);
        let expected = agreed(
            worlds
                .iter()
                .filter(|w| cells.iter().map(|&c| w[c]).sum::<u32>() == 1)
                .map(|w| (0..k).find(|&v| w[cells[v]] == 1).unwrap() as Code),
        );
        let got = deterministic_aia(&inst.rel, &target, &limits, instances).unwrap();
        determined += usize::from(expected.is_some());
        if got != expected {
            mismatches += 1;
            eprintln!("AIA mismatch on instance {instances}: expected {expected:?}, got {got:?}");
        }
        instances += 1;
    }
    verdict(
        mismatches == 0 && determined > 0,
        format!("{instances} instances, {determined} determined, {mismatches} mismatches"),
    )
}

fn mia_oracle() -> Verdict {
    let mut rng = seed::rng(202);
    let (mut instances, mut mismatches, mut determined) = (0, 0, 0);
    let limits = SolverLimits::nodes(1_000_000);
    while instances < 1000 {
        let inst = small_instance(&mut rng);
        let target = if rng.gen_bool(0.6) {
            inst.data.records()[rng.gen_range(0..inst.data.len())].clone()
        } else {
            random_record(&inst.schema, &mut rng)
        };
        let cell = inst.schema.cell_of(target.values());
        let worlds = consistent_worlds(&inst);
        let expected = agreed(worlds.iter().map(|w| u8::from(w[cell] > 0)));
        let got = deterministic_mia(&inst.rel, &target, &limits, instances).unwrap();
        determined += usize::from(expected.is_some());
        if got != expected {
            mismatches += 1;
            eprintln!("MIA mismatch on instance {instances}: expected {expected:?}, got {got:?}");
        }
        instances += 1;
    }
    verdict(
        mismatches == 0 && determined > 0,
        format!("{instances} instances, {determined} determined, {mismatches} mismatches"),
    )
}

fn solver_oracle() -> Verdict {
    let mut rng = seed::rng(303);
    let (mut instances, mut mismatches, mut invalid, mut feasible) = (0, 0, 0, 0);
    while instances < 1000 {
        let n = rng.gen_range(1..=10);
        let max_ub = if n > 7 { 2 } else { 3 };
        let schema = Arc::new(AttributeSchema::from_sizes(&[("a", n), ("s", 1)]).unwrap());
        let upper: Vec<u32> = (0..n).map(|_| rng.gen_range(0..=max_ub)).collect();
        let planted: Vec<u32> = upper.iter().map(|&u| rng.gen_range(0..=u)).collect();
        let plant = rng.gen_bool(0.5);
        let cons: Vec<SumConstraint> = (0..rng.gen_range(1..=6))
            .map(|_| {
                let vars: Vec<u32> = (0..n as u32).filter(|_| rng.gen_bool(0.5)).collect();
                let target = if plant {
                    vars.iter().map(|&v| i64::from(planted[v as usize])).sum()
                } else {
                    rng.gen_range(0..=vars.len() as i64 * i64::from(max_ub))
                };
                SumConstraint { vars, target }
            })
            .collect();
        let p = FeasibilityProblem::from_parts(schema, upper.clone(), cons.clone()).unwrap();

        let mut any = false;
        let mut x = vec![0u32; n];
        'outer: loop {
            if cons
                .iter()
                .all(|c| c.vars.iter().map(|&v| i64::from(x[v as usize])).sum::<i64>() == c.target)
            {
                any = true;
                break;
            }
            for i in 0..n {
                if x[i] < upper[i] {
                    x[i] += 1;
                    continue 'outer;
                }
                x[i] = 0;
            }
            break;
        }

        let out = solve(&p, instances, None, &SolverLimits::nodes(1_000_000));
        match &out {
            SolveOutcome::Feasible(a) => {
                feasible += 1;
                if !p.is_satisfied_by(a) {
                    invalid += 1;
                }
                if !any {
                    mismatches += 1;
                }
            }
            SolveOutcome::Infeasible => mismatches += usize::from(any),
            SolveOutcome::Unknown => mismatches += 1,
        }
        instances += 1;
    }
    verdict(
        mismatches == 0 && invalid == 0,
        format!("{instances} instances, {feasible} feasible, {mismatches} mismatches, {invalid} invalid assignments"),
    )
}

// ---------------------------------------------------------------------------
// Games on the census-like benchmark.

fn census(seed: u64, method: &str, shadows: usize) -> RunConfig {
    let mut cfg = RunConfig::load(CENSUS).unwrap();
    cfg.apply(&Overrides {
        seed: Some(seed),
        method: Some(method.into()),
        ..Default::default()
    })
    .unwrap();
    cfg.game.desia.shadows = shadows;
    cfg.game.reconstructions = 20;
    cfg.game.desia.rap.iterations = 200;
    cfg
}

fn run_auc(run: &GameRun) -> f64 {
    let scores: Vec<f64> = run.results.iter().map(|r| r.score).collect();
    let labels: Vec<bool> = run.results.iter().map(|r| r.truth == Some(1)).collect();
    auc(&roc(&scores, &labels).unwrap())
}

fn play(cfg: &RunConfig) -> GameRun {
    let schema = cfg.load_schema().unwrap();
    let (private, aux) = cfg.build_datasets(&schema).unwrap();
    let queries = cfg.build_queries(&schema).unwrap();
    run_aia_game(&private, &aux, &queries, &cfg.game_config()).unwrap()
}

fn deterministic_truth() -> Verdict {
    let (mut flagged, mut wrong, mut targets) = (0, 0, 0);
    for s in 0..50 {
        let mut cfg = census(1000 + s, "desia-nostoch", 0);
        cfg.data.private_size = 200;
        cfg.data.aux_size = 1800;
        let run = play(&cfg);
        targets += run.results.len();
        for r in run.results.iter().filter(|r| r.deterministic) {
            flagged += 1;
            wrong += usize::from(Some(r.prediction) != r.truth);
        }
    }
    verdict(
        wrong == 0 && flagged > 0,
        format!("50 runs, {targets} targets, {flagged} deterministic, {wrong} wrong"),
    )
}

const BENCH_SEEDS: u64 = 5;
const BENCH_SHADOWS: usize = 20_000;
/// Scores of targets sharing a release are correlated, so per-seed AUCs
/// near chance level spread widely; the ratio sweep averages many seeds.
const RATIO_SEEDS: u64 = 12;
const NOISE_SEEDS: u64 = 3;
const TREND_SHADOWS: usize = 2_000;
/// The noise sweep runs where the exact release leaks the most.
const NOISE_RATIO: f64 = 1.0;

/// Mean AUC per method over the benchmark seeds, computed once for the
/// method-ordering and ablation criteria.
fn benchmark() -> &'static BTreeMap<&'static str, (f64, f64)> {
    static CELL: std::sync::OnceLock<BTreeMap<&'static str, (f64, f64)>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let methods = [
            "desia",
            "desia-nostoch",
            "desia-noverify-nostoch",
            "desia-synthetic-nouniq-noverify-nostoch",
            "cip-rand",
            "rap-rand",
        ];
        methods
            .into_iter()
            .map(|m| {
                let start = Instant::now();
                let aucs: Vec<f64> = (0..BENCH_SEEDS)
                    .map(|s| run_auc(&play(&census(s, m, BENCH_SHADOWS))))
                    .collect();
                let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
                let secs = start.elapsed().as_secs_f64();
                println!("    {m:<42} mean AUC {mean:.4} over {aucs:.3?} ({secs:.0}s)");
                (m, (mean, secs))
            })
            .collect()
    })
}

fn method_ordering() -> Verdict {
    let b = benchmark();
    let (desia, cip, rap) = (b["desia"].0, b["cip-rand"].0, b["rap-rand"].0);
    let secs: f64 = ["desia", "cip-rand", "rap-rand"].iter().map(|m| b[m].1).sum();
    verdict(
        desia >= cip && desia >= rap && desia > 0.55 && secs < 7200.0,
        format!("DeSIA {desia:.4}, CIP-vote {cip:.4}, RAP-vote {rap:.4}, {secs:.0}s"),
    )
}

fn ablations() -> Verdict {
    let b = benchmark();
    let full = b["desia"].0;
    let nostoch = b["desia-nostoch"].0;
    let noverify = b["desia-noverify-nostoch"].0;
    let synthetic = b["desia-synthetic-nouniq-noverify-nostoch"].0;
    verdict(
        full > nostoch && nostoch > noverify && (synthetic - 0.5).abs() <= 0.05,
        format!("full {full:.4} > no-stochastic {nostoch:.4} > no-verification {noverify:.4}; synthetic no-uniqueness {synthetic:.4}"),
    )
}

/// Non-decreasing along `xs` up to one adjacent step down of at most `slack`.
fn monotone_with_one_inversion(xs: &[f64], slack: f64) -> bool {
    let drops: Vec<f64> = xs.windows(2).map(|w| w[0] - w[1]).filter(|&d| d > 0.0).collect();
    drops.len() <= 1 && drops.iter().all(|&d| d <= slack)
}

fn census_inputs(cfg: &RunConfig) -> (Dataset, Dataset, Vec<AggregateQuery>) {
    let schema = cfg.load_schema().unwrap();
    let (private, aux) = cfg.build_datasets(&schema).unwrap();
    let queries = cfg.build_queries(&schema).unwrap();
    (private, aux, queries)
}

fn ratio_trend() -> Verdict {
    let ratios = [0.05, 0.1, 0.25, 0.5, 1.0];
    let mut sums = vec![0.0; ratios.len()];
    for s in 0..RATIO_SEEDS {
        let cfg = census(s, "desia", TREND_SHADOWS);
        let (private, aux, queries) = census_inputs(&cfg);
        let points = sweep_query_ratio(&private, &aux, &queries, &ratios, &cfg.game_config()).unwrap();
        for (sum, p) in sums.iter_mut().zip(&points) {
            *sum += mean_auc(p).unwrap();
        }
    }
    let means: Vec<f64> = sums.iter().map(|x| x / RATIO_SEEDS as f64).collect();
    let gain = means[4] - means[0];
    verdict(
        monotone_with_one_inversion(&means, 0.02) && gain >= 0.05,
        format!("AUC by ratio {means:.4?}, gain {gain:.4}"),
    )
}

fn noise_trend() -> Verdict {
    let epsilons = [f64::INFINITY, 10.0, 1.0, 0.1];
    let mut sums = vec![0.0; epsilons.len()];
    for s in 0..NOISE_SEEDS {
        let mut cfg = census(s, "desia", TREND_SHADOWS);
        cfg.game.ratio = NOISE_RATIO;
        let (private, aux, queries) = census_inputs(&cfg);
        let points = sweep_noise(&private, &aux, &queries, &epsilons, 3, &cfg.game_config()).unwrap();
        for (sum, p) in sums.iter_mut().zip(&points) {
            *sum += mean_auc(p).unwrap();
        }
    }
    let means: Vec<f64> = sums.iter().map(|x| x / NOISE_SEEDS as f64).collect();
    let reversed: Vec<f64> = means.iter().rev().copied().collect();
    verdict(
        monotone_with_one_inversion(&reversed, 0.02),
        format!("AUC by epsilon (inf, 10, 1, 0.1) at ratio {NOISE_RATIO}: {means:.4?}"),
    )
}

// ---------------------------------------------------------------------------
// Kernels and mechanisms.

/// Largest componentwise relative gap between `g` and central differences of `f`.
fn gradient_error(w: &[f64], g: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut x = w.to_vec();
    for i in 0..w.len() {
        x[i] = w[i] + h;
        let up = f(&x);
        x[i] = w[i] - h;
        let down = f(&x);
        x[i] = w[i];
        let fd = (up - down) / (2.0 * h);
        let scale = g[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((g[i] - fd).abs() / scale);
    }
    worst
}

fn kernels() -> Verdict {
    let mut rng = seed::rng(909);

    let mut logistic: f64 = 0.0;
    for _ in 0..20 {
        let (rows, cols, classes) = (rng.gen_range(10..60), rng.gen_range(1..6), rng.gen_range(2..4));
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let x = FeatureMatrix::new(rows, cols, data).unwrap();
        let mut labels: Vec<Code> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
        labels[..classes as usize].copy_from_slice(&(0..classes).collect::<Vec<_>>());
        let lambda = [1e-3, 0.1, 1.0][rng.gen_range(0..3)];
        let dim = (classes as usize - 1) * (cols + 1);
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = logistic_loss_grad(&x, &labels, lambda, &w).unwrap();
        let e = gradient_error(&w, &g, 1e-5, |v| logistic_loss_grad(&x, &labels, lambda, v).unwrap().0);
        logistic = logistic.max(e);
    }

    let mut rap: f64 = 0.0;
    for _ in 0..20 {
        let schema = small_schema(SMALL_SCHEMAS[rng.gen_range(0..SMALL_SCHEMAS.len())]);
        let rows = rng.gen_range(1..6);
        let queries: Vec<AggregateQuery> = (0..rng.gen_range(1..8))
            .map(|_| random_query(&schema, &mut rng))
            .collect();
        let targets: Vec<f64> = queries.iter().map(|_| rng.gen_range(0..=rows) as f64).collect();
        let width: usize = schema.domain_sizes().iter().sum();
        let logits: Vec<f64> = (0..rows * width).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, g) = rap_loss_grad(schema.clone(), rows, &queries, &targets, &logits).unwrap();
        let e = gradient_error(&logits, &g, 1e-5, |v| {
            rap_loss_grad(schema.clone(), rows, &queries, &targets, v).unwrap().0
        });
        rap = rap.max(e);
    }

    let mut auc_gap: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.gen_range(2..=200);
        let ties = rng.gen_bool(0.5);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if ties {
                    rng.gen_range(0..5) as f64 / 4.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in (0..n).filter(|&i| labels[i]) {
            for j in (0..n).filter(|&j| !labels[j]) {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        let got = auc(&roc(&scores, &labels).unwrap());
        auc_gap = auc_gap.max((got - wins / pairs).abs());
    }

    verdict(
        logistic < 1e-5 && rap < 1e-4 && auc_gap < 1e-12,
        format!("logistic gradient {logistic:.2e}, RAP gradient {rap:.2e}, AUC gap {auc_gap:.2e}"),
    )
}

fn mechanisms() -> Verdict {
    let mut rng = seed::rng(1010);
    let (n, scale) = (100_000, 2.0);
    let draws: Vec<f64> = (0..n).map(|_| laplace_sample(&mut rng, scale)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let spread = draws.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
    let laplace_ok = mean.abs() <= 0.02 * scale && (spread / scale - 1.0).abs() <= 0.02;

    let schema = Arc::new(AttributeSchema::from_sizes(&[("a", 4), ("s", 2)]).unwrap());
    let d = Dataset::new(schema.clone(), (0..10_000).map(|i| Record(vec![i % 4, 0])).collect()).unwrap();
    let ones = randomize_sensitive(&d, 7)
        .records()
        .iter()
        .filter(|r| r.sensitive() == 1)
        .count();
    let balance = ones as f64 / d.len() as f64;
    let balance_ok = (balance - 0.5).abs() <= 0.02;

    // Two records one step away from the target, one per sensitive value.
    let tied = Dataset::new(schema.clone(), vec![Record(vec![1, 0]), Record(vec![1, 1])]).unwrap();
    let recon = ReconstructionSet {
        method: "fixture".into(),
        datasets: vec![tied],
        seeds: vec![0],
        diagnostics: vec![],
    };
    let target = TargetUser::new(&schema, PartialRecord(vec![0]));
    let zeros = (0..2000u64).filter(|&s| aia_vote(&target, &recon, s).0 == 0).count();
    let share = zeros as f64 / 2000.0;
    let vote_ok = (share - 0.5).abs() <= 0.03;

    verdict(
        laplace_ok && balance_ok && vote_ok,
        format!(
            "Laplace mean {mean:+.4} and mean |x| {spread:.4} at scale {scale}; sensitive share {balance:.4}; tie share {share:.4}"
        ),
    )
}

// ---------------------------------------------------------------------------
// Command-line reproducibility.

fn cli(dir: &Path, args: &[&str]) -> bool {
    let status = Command::new(env!("CARGO_BIN_EXE_desia"))
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .args(args)
        .status()
        .expect("binary runs");
    status.success()
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn pipeline(dir: &Path, workers: &str) -> Option<BTreeMap<PathBuf, Vec<u8>>> {
    let common = [
        "--config",
        CENSUS,
        "--seed",
        "11",
        "--targets",
        "8",
        "--workers",
        workers,
        "--out",
        "run",
    ];
    let steps: [&[&str]; 7] = [
        &["gen-data"],
        &["make-queries"],
        &["release", "--epsilon", "1"],
        &["attack"],
        &["attack", "--method", "cip-rand"],
        &["sweep", "--axis", "epsilon"],
        &["report"],
    ];
    for step in steps {
        let args: Vec<&str> = step.iter().chain(&common).copied().collect();
        if !cli(dir, &args) {
            eprintln!("`desia {}` failed", args.join(" "));
            return None;
        }
    }
    Some(files(&dir.join("run")))
}

fn cli_determinism() -> Verdict {
    let runs: Vec<_> = ["1", "1", "4"]
        .into_iter()
        .map(|w| {
            let dir = tempfile::tempdir().unwrap();
            pipeline(dir.path(), w)
        })
        .collect();
    let Some(first) = runs[0].as_ref() else {
        return verdict(false, "pipeline failed");
    };
    let same = runs.iter().all(|r| r.as_ref() == Some(first));
    verdict(
        same && !first.is_empty(),
        format!(
            "{} output files, identical across repeats and worker counts: {same}",
            first.len()
        ),
    )
}
