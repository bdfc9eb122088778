//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.
//!
//! Reference values come from oracles local to this file (direct enumeration
//! of label configurations, exhaustive subset search) rather than from the
//! library's own verification helpers.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use batchbald::acquisition::{acquire, AcquisitionRequest, Strategy};
use batchbald::estimators::{
    batchbald_score, bald_scores, exact_state, joint_entropy_exact, joint_entropy_sampled,
    sample_configurations, EstimatorConfig, EstimatorMode,
};
use batchbald::io::{decode_tensor, encode_tensor, read_tensor, write_tensor};
use batchbald::seed::{self, stream, Rng};
use batchbald::sim::{run_trials, AlTrace, LoopConfig, Scenario};
use batchbald::verify::random_tensor;
use batchbald::PosteriorTensor;
use rand::Rng as _;

const TOL: f64 = 1e-9;
const SEED: u64 = 20_190_000;

// ---------------------------------------------------------------- oracles

/// `-sum p ln p` over every label configuration of `subset`, where
/// `p(y) = (1/k) sum_j prod_i p(y_i | w_j)`.
fn oracle_joint_entropy(t: &PosteriorTensor, subset: &[usize]) -> f64 {
    let (k, c) = (t.k(), t.c());
    let mut labels = vec![0usize; subset.len()];
    let mut h = 0.0;
    loop {
        let mut p = 0.0;
        for j in 0..k {
            let mut prod = 1.0;
            for (&i, &y) in subset.iter().zip(&labels) {
                prod *= t.get(i, j, y);
            }
            p += prod;
        }
        p /= k as f64;
        if p > 0.0 {
            h -= p * p.ln();
        }
        // Odometer increment over the configuration.
        let mut pos = 0;
        while pos < labels.len() {
            labels[pos] += 1;
            if labels[pos] < c {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
        if pos == labels.len() {
            return h;
        }
    }
}

fn oracle_row_entropy(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

/// `(1/k) sum_j H[p(y_i | w_j)]` summed over the subset.
fn oracle_conditional_entropy(t: &PosteriorTensor, subset: &[usize]) -> f64 {
    subset
        .iter()
        .map(|&i| (0..t.k()).map(|j| oracle_row_entropy(t.row(i, j))).sum::<f64>() / t.k() as f64)
        .sum()
}

fn oracle_mi(t: &PosteriorTensor, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    oracle_joint_entropy(t, subset) - oracle_conditional_entropy(t, subset)
}

/// Best joint score over every size-`b` subset of the pool.
fn oracle_best_batch(t: &PosteriorTensor, b: usize) -> f64 {
    let n = t.n_pool();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != b {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        best = best.max(oracle_mi(t, &subset));
    }
    best
}

// ------------------------------------------------------------ harness

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn instance_rng(criterion: u64, trial: usize) -> Rng {
    seed::derived_rng(seed::derive(SEED, stream::INSTANCE, criterion), stream::TRIAL, trial as u64)
}

fn concentration(rng: &mut Rng) -> f64 {
    [0.1, 0.3, 1.0, 3.0][rng.random_range(0..4)]
}

fn distinct(rng: &mut Rng, n: usize, size: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = rng.random_range(i..n);
        all.swap(i, j);
    }
    all.truncate(size);
    all
}

fn exact_cfg() -> EstimatorConfig {
    EstimatorConfig {
        exact_limit: usize::MAX,
        ..EstimatorConfig::default()
    }
}

fn score(t: &PosteriorTensor, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    let b = batchbald_score(t, subset, &exact_cfg()).expect("valid subset");
    assert_eq!(b.mode, EstimatorMode::Exact);
    b.score
}

fn within_budget(elapsed: Duration, budget_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < budget_s, format!("{s:.2}s of {budget_s:.0}s"))
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// --------------------------------------------------------- criteria

fn size_one_equivalence() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut oracle_err: f64 = 0.0;
    for trial in 0..500 {
        let mut rng = instance_rng(1, trial);
        let n = rng.random_range(1..=50);
        let c = rng.random_range(2..=10);
        let k = rng.random_range(1..=32);
        let conc = concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let bb = acquire(&t, &AcquisitionRequest::new(Strategy::BatchBald, 1)).unwrap();
        let bald = acquire(&t, &AcquisitionRequest::new(Strategy::Bald, 1)).unwrap();
        if bb.indices != bald.indices || bb.scores[0].to_bits() != bald.scores[0].to_bits() {
            mismatches += 1;
        }
        oracle_err = oracle_err.max((bb.scores[0] - oracle_mi(&t, &bb.indices)).abs());
    }
    let (fast, time) = within_budget(start.elapsed(), 10.0);
    Outcome::new(
        mismatches == 0 && oracle_err <= TOL && fast,
        format!("500 tensors, {mismatches} mismatches, max |score - oracle| {oracle_err:.1e}, {time}"),
    )
}

fn upper_bound() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    let mut oracle_err: f64 = 0.0;
    for trial in 0..1000 {
        let mut rng = instance_rng(2, trial);
        let n_pool = rng.random_range(1..=6);
        let n = rng.random_range(1..=n_pool.min(4));
        let c = rng.random_range(2..=4);
        let k = rng.random_range(1..=8);
        let conc = concentration(&mut rng);
        let t = random_tensor(&mut rng, n_pool, k, c, conc);
        let subset = distinct(&mut rng, n_pool, n);
        let joint = batchbald_score(&t, &subset, &EstimatorConfig::default()).unwrap();
        if joint.mode != EstimatorMode::Exact {
            violations += 1;
        }
        let bald = bald_scores(&t);
        let sum: f64 = subset.iter().map(|&i| bald.scores[i]).sum();
        let gap = sum - joint.score;
        min_gap = min_gap.min(gap);
        if joint.score > sum + TOL {
            violations += 1;
        }
        oracle_err = oracle_err.max((joint.score - oracle_mi(&t, &subset)).abs());
    }
    let (fast, time) = within_budget(start.elapsed(), 30.0);
    Outcome::new(
        violations == 0 && oracle_err <= TOL && fast,
        format!(
            "1000 subsets, {violations} violations, min(sum BALD - BatchBALD) {min_gap:.2e}, \
             max |score - oracle| {oracle_err:.1e}, {time}"
        ),
    )
}

fn submodular_instance(trial: usize) -> (PosteriorTensor, Vec<usize>, usize, usize) {
    let mut rng = instance_rng(3, trial);
    let n = rng.random_range(3..=7);
    let c = rng.random_range(2..=4);
    let k = rng.random_range(1..=8);
    let a_size = rng.random_range(0..=(n - 2).min(2));
    let conc = concentration(&mut rng);
    let t = random_tensor(&mut rng, n, k, c, conc);
    let picked = distinct(&mut rng, n, a_size + 2);
    (t, picked[..a_size].to_vec(), picked[a_size], picked[a_size + 1])
}

fn submodularity() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for trial in 0..1000 {
        let (t, a, x, y) = submodular_instance(trial);
        let with = |extra: &[usize]| [a.as_slice(), extra].concat();
        let slack = score(&t, &with(&[x])) + score(&t, &with(&[y]))
            - score(&t, &with(&[x, y]))
            - score(&t, &a);
        min_slack = min_slack.min(slack);
        if slack < -TOL {
            violations += 1;
        }
    }
    let (fast, time) = within_budget(start.elapsed(), 60.0);
    Outcome::new(
        violations == 0 && fast,
        format!("1000 instances, {violations} violations, min slack {min_slack:.2e}, {time}"),
    )
}

fn monotone_gains() -> Outcome {
    let mut violations = 0;
    let mut min_gain = f64::INFINITY;
    for trial in 0..1000 {
        let (t, ..) = submodular_instance(trial);
        let b = t.n_pool().min(4);
        let req = AcquisitionRequest::new(Strategy::BatchBald, b).with_exact_limit(usize::MAX);
        let r = acquire(&t, &req).unwrap();
        let mut prev = 0.0;
        for &s in &r.scores {
            min_gain = min_gain.min(s - prev);
            if s - prev < -TOL {
                violations += 1;
            }
            prev = s;
        }
    }
    Outcome::new(
        violations == 0,
        format!("1000 greedy runs, {violations} negative gains, min gain {min_gain:.2e}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for trial in 0..500 {
        let mut rng = instance_rng(5, trial);
        let c: usize = rng.random_range(2..=8);
        let max_n = (1..=12).take_while(|&n| c.pow(n) <= 4096).last().unwrap() as usize;
        let n = rng.random_range(1..=max_n);
        let k = rng.random_range(1..=16);
        let conc = concentration(&mut rng);
        let t = random_tensor(&mut rng, n + 2, k, c, conc);
        let subset = distinct(&mut rng, n + 2, n);
        let state = exact_state(&t, &subset, usize::MAX).unwrap();
        let h = joint_entropy_exact(&state).unwrap();
        worst = worst.max((h - oracle_joint_entropy(&t, &subset)).abs());
    }
    Outcome::new(worst <= TOL, format!("500 instances, max abs error {worst:.2e}"))
}

fn mc_convergence() -> Outcome {
    const SIZES: [usize; 3] = [100, 1000, 10_000];
    const SEEDS: usize = 20;
    let start = Instant::now();
    let mut failures = 0;
    let mut worst_rel: f64 = 0.0;
    let mut worst_seed_rel: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut rel_by_m: Vec<Vec<f64>> = vec![Vec::new(); SIZES.len()];
    for trial in 0..50 {
        let mut rng = instance_rng(6, trial);
        let c: usize = rng.random_range(2..=4);
        let max_n = (2..=10).take_while(|&n| c.pow(n) <= 1024).last().unwrap() as usize;
        let n = rng.random_range(2..=max_n);
        let k = rng.random_range(2..=16);
        let conc = concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let subset: Vec<usize> = (0..n).collect();
        let exact = oracle_joint_entropy(&t, &subset);
        for (mi, &m) in SIZES.iter().enumerate() {
            let estimates: Vec<f64> = (0..SEEDS)
                .map(|s| {
                    let mut rng = seed::derived_rng(
                        seed::derive(SEED, stream::TRIAL, trial as u64),
                        stream::STEP,
                        (mi * SEEDS + s) as u64,
                    );
                    let ctx = sample_configurations(&t, &subset[..n - 1], m, &mut rng).unwrap();
                    joint_entropy_sampled(&ctx, &t, n - 1).unwrap()
                })
                .collect();
            let mut rel: Vec<f64> = estimates.iter().map(|e| (e - exact).abs() / exact).collect();
            let seed_worst = rel.iter().copied().fold(0.0, f64::max);
            rel_by_m[mi].push(median(&mut rel));
            if m == 10_000 {
                let mean = estimates.iter().sum::<f64>() / SEEDS as f64;
                let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                    / (SEEDS - 1) as f64;
                let se = (var / SEEDS as f64).sqrt();
                let err = (mean - exact).abs();
                let rel_mean = err / exact;
                let z = if se > 0.0 { err / se } else if err <= TOL { 0.0 } else { f64::INFINITY };
                worst_rel = worst_rel.max(rel_mean);
                worst_seed_rel = worst_seed_rel.max(seed_worst);
                worst_z = worst_z.max(z);
                if rel_mean > 0.02 || seed_worst > 0.02 || z > 4.0 {
                    failures += 1;
                }
            }
        }
    }
    let medians: Vec<f64> = rel_by_m.iter_mut().map(|v| median(v)).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let (fast, time) = within_budget(start.elapsed(), 300.0);
    Outcome::new(
        failures == 0 && decreasing && fast,
        format!(
            "50 instances x {SEEDS} seeds, m=10000: max rel err of mean {worst_rel:.2e}, \
             of any seed {worst_seed_rel:.2e}, max |err|/SE {worst_z:.2}; median rel err over \
             m {{100,1000,10000}} = [{:.2e}, {:.2e}, {:.2e}], {time}",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn greedy_near_optimality() -> Outcome {
    let bound = 1.0 - (-1.0f64).exp();
    let mut violations = 0;
    let mut ratios = Vec::new();
    for trial in 0..200 {
        let mut rng = instance_rng(7, trial);
        let n = rng.random_range(2..=8);
        let b = rng.random_range(1..=n.min(3));
        let c = rng.random_range(2..=3);
        let k = rng.random_range(1..=4);
        let conc = concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let greedy = acquire(&t, &AcquisitionRequest::new(Strategy::BatchBald, b))
            .unwrap()
            .total_score();
        let best = oracle_best_batch(&t, b);
        let exhaustive = acquire(&t, &AcquisitionRequest::new(Strategy::Exhaustive, b))
            .unwrap()
            .total_score();
        if greedy < bound * best - TOL || greedy > best + TOL || (exhaustive - best).abs() > TOL {
            violations += 1;
        }
        ratios.push(if best > TOL { greedy / best } else { 1.0 });
    }
    let optimal = ratios.iter().filter(|&&r| r >= 1.0 - 1e-12).count();
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let q10 = {
        let mut v = ratios.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 10]
    };
    Outcome::new(
        violations == 0,
        format!(
            "200 instances, {violations} below (1-1/e) x optimum; ratio min {min:.4}, \
             10th pct {q10:.4}, median {:.4}, optimal in {optimal}/200",
            median(&mut ratios)
        ),
    )
}

fn mean_accuracy(traces: &[AlTrace]) -> f64 {
    let per_trace: Vec<f64> = traces
        .iter()
        .map(|t| t.rounds.iter().map(|r| r.test_accuracy).sum::<f64>() / t.rounds.len() as f64)
        .collect();
    per_trace.iter().sum::<f64>() / per_trace.len() as f64
}

fn repeated_pool() -> Outcome {
    const TRIALS: usize = 11;
    let start = Instant::now();
    let scenario = Scenario::default();
    let template = LoopConfig::new(Strategy::Random);
    let strategies = [Strategy::BatchBald, Strategy::Random, Strategy::Bald];
    let run = run_trials(&scenario, &template, &strategies, TRIALS, 0).unwrap();
    let fin = |s| run.median_final_accuracy(s).unwrap();
    let (bb, rnd, bald) = (fin(Strategy::BatchBald), fin(Strategy::Random), fin(Strategy::Bald));
    let final_ok = bb >= rnd && rnd >= bald;

    let ent_bb = run.median_label_entropy(Strategy::BatchBald).unwrap();
    let ent_bald = run.median_label_entropy(Strategy::Bald).unwrap();
    let entropy_ok = ent_bb.iter().zip(&ent_bald).all(|(a, b)| a >= b);

    let mean = |s| mean_accuracy(run.traces_for(s).unwrap());
    let (m_bb, m_rnd, m_bald) = (mean(Strategy::BatchBald), mean(Strategy::Random), mean(Strategy::Bald));
    let mean_ok = m_bb > m_rnd && m_rnd > m_bald;

    // Threshold per trial: the test accuracy of the ground-truth hypothesis.
    let thresholds: Vec<f64> = (0..TRIALS)
        .map(|t| {
            scenario
                .build(seed::derive(0, stream::TRIAL, t as u64))
                .unwrap()
                .oracle_accuracy()
        })
        .collect();
    let mut labels_bald = Vec::new();
    let mut labels_bb = Vec::new();
    for r in [0usize, 1, 2, 4] {
        let sc = Scenario {
            repetitions: r,
            ..scenario
        };
        let run = run_trials(&sc, &template, &[Strategy::Bald, Strategy::BatchBald], TRIALS, 0).unwrap();
        let labels = |s| {
            let mut v: Vec<f64> = run
                .traces_for(s)
                .unwrap()
                .iter()
                .zip(&thresholds)
                .map(|(tr, &th)| tr.labels_to_accuracy(th).map_or(f64::INFINITY, |n| n as f64))
                .collect();
            median(&mut v)
        };
        labels_bald.push(labels(Strategy::Bald));
        labels_bb.push(labels(Strategy::BatchBald));
    }
    let ablation_ok = labels_bald.windows(2).all(|w| w[1] >= w[0]);
    let (fast, time) = within_budget(start.elapsed(), 600.0);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
    Outcome::new(
        final_ok && entropy_ok && mean_ok && ablation_ok && fast,
        format!(
            "{TRIALS} seeds, r=2: median final accuracy batchbald {bb:.3} >= random {rnd:.3} >= \
             bald {bald:.3} [{}]; mean accuracy over rounds {m_bb:.4} > {m_rnd:.4} > {m_bald:.4} \
             [{}]; label entropy per round batchbald [{}] vs bald [{}] [{}]; labels to oracle \
             accuracy over r=0,1,2,4: bald [{}] [{}], batchbald [{}]; {time}",
            ok(final_ok),
            ok(mean_ok),
            fmt(&ent_bb),
            fmt(&ent_bald),
            ok(entropy_ok),
            fmt(&labels_bald),
            ok(ablation_ok),
            fmt(&labels_bb),
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_batchbald"))
}

fn bench_ratios(extra: &[&str]) -> (Vec<f64>, Vec<String>) {
    let out = bin()
        .args(["bench", "--sizes", "2000,4000,8000", "--b", "4", "--classes", "4"])
        .args(["--k", "32", "--m", "1000", "--repeats", "3"])
        .args(extra)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    let ms: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    let modes = rows.iter().map(|r| r[5].clone()).collect();
    (ms.windows(2).map(|w| w[1] / w[0]).collect(), modes)
}

fn linear_scaling() -> Outcome {
    let (default_ratios, default_modes) = bench_ratios(&[]);
    let (sampled_ratios, sampled_modes) = bench_ratios(&["--exact-limit", "16"]);
    let pass = default_ratios.iter().chain(&sampled_ratios).all(|&r| r <= 2.5);
    Outcome::new(
        pass,
        format!(
            "n_pool 2000/4000/8000, b=4 c=4 k=32 m=1000: ratios {:.2?} ({}); with the sampled \
             estimator forced (exact limit 16): ratios {:.2?} ({})",
            default_ratios,
            default_modes.join("/"),
            sampled_ratios,
            sampled_modes.join("/"),
        ),
    )
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn format_stability() -> Outcome {
    let mut problems = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    for name in ["duplicate_pool.ptf1", "single.ptf1", "mixed.ptf1"] {
        let bytes = std::fs::read(fixture(name)).unwrap();
        let t = read_tensor(fixture(name)).unwrap();
        if encode_tensor(&t).unwrap() != bytes {
            problems.push(format!("{name}: re-encoding differs"));
        }
        if decode_tensor(&bytes).unwrap() != t {
            problems.push(format!("{name}: decode not stable"));
        }
        let copy = dir.path().join(name);
        write_tensor(&t, &copy).unwrap();
        if std::fs::read(&copy).unwrap() != bytes {
            problems.push(format!("{name}: written file differs"));
        }
    }
    let p = |path: &Path| path.to_str().unwrap().to_owned();
    let good = p(&fixture("duplicate_pool.ptf1"));
    let bad_magic = dir.path().join("magic.ptf1");
    std::fs::write(&bad_magic, b"PTF2\x01\x00\x00\x00\x01\x00\x00\x00\x02\x00\x00\x00").unwrap();
    let invalid = dir.path().join("invalid.ptf1");
    write_tensor(&PosteriorTensor::new(1, 1, 2, vec![0.9, 0.3]).unwrap(), &invalid).unwrap();
    let cex = dir.path().join("cex");
    let cases: [(&str, Vec<String>, i32); 5] = [
        ("success", vec!["score".into(), "--tensor".into(), good.clone()], 0),
        (
            "property violation",
            vec![
                "verify".into(),
                "--trials".into(),
                "5".into(),
                "--inject-fault".into(),
                "--out".into(),
                p(&dir.path().join("report.json")),
                "--counterexample-dir".into(),
                p(&cex),
            ],
            1,
        ),
        ("format error", vec!["score".into(), "--tensor".into(), p(&bad_magic)], 2),
        ("validation error", vec!["score".into(), "--tensor".into(), p(&invalid)], 3),
        (
            "domain error",
            vec!["acquire".into(), "--tensor".into(), good, "--b".into(), "4".into()],
            4,
        ),
    ];
    for (what, args, expected) in &cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let got = exit_code(&args);
        if got != *expected {
            problems.push(format!("{what}: exit {got}, expected {expected}"));
        }
    }
    let cex_files = std::fs::read_dir(&cex).map(|d| d.count()).unwrap_or(0);
    if cex_files == 0 {
        problems.push("no counterexample written".into());
    }
    Outcome::new(
        problems.is_empty(),
        if problems.is_empty() {
            format!("3 fixtures byte-identical; exit codes 0-4 as expected; {cex_files} counterexample file(s)")
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("size-1 equivalence", size_one_equivalence),
        ("upper bound", upper_bound),
        ("submodularity", submodularity),
        ("monotone gains", monotone_gains),
        ("oracle equivalence", oracle_equivalence),
        ("MC estimator convergence", mc_convergence),
        ("greedy near-optimality", greedy_near_optimality),
        ("repeated-pool pathology", repeated_pool),
        ("linear pool scaling", linear_scaling),
        ("format stability", format_stability),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:>2} {name} ({:.2}s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if !outcome.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
