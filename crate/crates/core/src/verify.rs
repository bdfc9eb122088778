//! Randomized property suite for the estimators and the greedy selector.
//!
//! Each property draws its own instances from a seed derived from the suite
//! seed, so a report is reproducible from `(seed, trials)`. Batch scores are
//! obtained through a [`Scorer`], which lets callers substitute a faulty
//! estimator to check that the harness catches it.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    acquire_bald, acquire_batchbald, acquire_exhaustive, AcquisitionRequest, Strategy,
};
use crate::estimators::{
    bald_scores, batchbald_score, exact_state, joint_entropy_exact, joint_entropy_sampled,
    sample_configurations, EstimatorConfig,
};
use crate::parallel;
use crate::seed::{self, stream, Rng};
use crate::sim::median;
use crate::tensor::PosteriorTensor;

/// Absolute slack for exact-arithmetic inequalities.
pub const TOLERANCE: f64 = 1e-9;

/// Tensor whose rows are symmetric-Dirichlet draws with `concentration`.
pub fn random_tensor(
    rng: &mut Rng,
    n_pool: usize,
    k: usize,
    c: usize,
    concentration: f64,
) -> PosteriorTensor {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    let mut probs = Vec::with_capacity(n_pool * k * c);
    let mut row = vec![0.0; c];
    for _ in 0..n_pool * k {
        loop {
            row.iter_mut().for_each(|v| *v = gamma.sample(rng));
            let total: f64 = row.iter().sum();
            if total > 0.0 && total.is_finite() {
                probs.extend(row.iter().map(|v| v / total));
                break;
            }
        }
    }
    PosteriorTensor::new(n_pool, k, c, probs).expect("shape")
}

fn random_concentration(rng: &mut Rng) -> f64 {
    [0.1, 0.3, 1.0, 3.0][rng.random_range(0..4)]
}

/// Joint entropy by direct enumeration: for every configuration average the
/// per-sample products, then take `-sum p ln p`. Independent of the cached
/// matrix recursion.
pub fn brute_force_joint_entropy(t: &PosteriorTensor, subset: &[usize]) -> f64 {
    let (k, c) = (t.k(), t.c());
    let total = c.pow(subset.len() as u32);
    let mut config = vec![0usize; subset.len()];
    let mut h = 0.0;
    for code in 0..total {
        let mut rest = code;
        for slot in config.iter_mut() {
            *slot = rest % c;
            rest /= c;
        }
        let mut p = 0.0;
        for j in 0..k {
            let mut prod = 1.0;
            for (&i, &y) in subset.iter().zip(&config) {
                prod *= t.get(i, j, y);
            }
            p += prod;
        }
        p /= k as f64;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Source of batch scores under test.
pub trait Scorer: Sync {
    fn score(&self, t: &PosteriorTensor, subset: &[usize]) -> f64;
}

/// Exact-mode BatchBALD.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactScorer;

impl Scorer for ExactScorer {
    fn score(&self, t: &PosteriorTensor, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            return 0.0;
        }
        let cfg = EstimatorConfig {
            exact_limit: usize::MAX,
            ..EstimatorConfig::default()
        };
        batchbald_score(t, subset, &cfg).expect("valid subset").score
    }
}

/// Test hook: exact BatchBALD plus `bias * n^2`, which breaks both the BALD
/// upper bound and diminishing returns.
#[derive(Debug, Clone, Copy)]
pub struct FaultyScorer {
    pub bias: f64,
}

impl Scorer for FaultyScorer {
    fn score(&self, t: &PosteriorTensor, subset: &[usize]) -> f64 {
        let n = subset.len() as f64;
        ExactScorer.score(t, subset) + self.bias * n * n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    SizeOneEquivalence,
    UpperBound,
    Submodularity,
    MonotoneGains,
    OracleEquivalence,
    McConvergence,
    GreedyBound,
}

impl Property {
    pub const ALL: [Property; 7] = [
        Property::SizeOneEquivalence,
        Property::UpperBound,
        Property::Submodularity,
        Property::MonotoneGains,
        Property::OracleEquivalence,
        Property::McConvergence,
        Property::GreedyBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::SizeOneEquivalence => "size_one_equivalence",
            Property::UpperBound => "upper_bound",
            Property::Submodularity => "submodularity",
            Property::MonotoneGains => "monotone_gains",
            Property::OracleEquivalence => "oracle_equivalence",
            Property::McConvergence => "mc_convergence",
            Property::GreedyBound => "greedy_bound",
        }
    }

    /// Trials run when no override is given.
    pub fn default_trials(self) -> usize {
        match self {
            Property::SizeOneEquivalence => 500,
            Property::UpperBound => 1000,
            Property::Submodularity => 1000,
            Property::MonotoneGains => 1000,
            Property::OracleEquivalence => 500,
            Property::McConvergence => 50,
            Property::GreedyBound => 200,
        }
    }

    fn id(self) -> u64 {
        self as u64
    }
}

/// Minimal reproduction of a failed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub property: String,
    pub trial: usize,
    pub n_pool: usize,
    pub k: usize,
    pub c: usize,
    pub probs: Vec<f64>,
    pub subsets: Vec<Vec<usize>>,
    pub values: Vec<f64>,
    pub note: String,
}

impl Counterexample {
    fn new(
        property: Property,
        trial: usize,
        t: &PosteriorTensor,
        subsets: Vec<Vec<usize>>,
        values: Vec<f64>,
        note: impl Into<String>,
    ) -> Self {
        Self {
            property: property.name().to_owned(),
            trial,
            n_pool: t.n_pool(),
            k: t.k(),
            c: t.c(),
            probs: t.as_slice().to_vec(),
            subsets,
            values,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub trials: usize,
    pub failures: usize,
    pub passed: bool,
    /// Largest violation of the property's inequality (0 when none).
    pub worst_violation: f64,
    /// Property-specific summary statistics.
    pub stats: serde_json::Value,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub all_passed: bool,
    pub properties: Vec<PropertyReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Overrides every property's default trial count.
    pub trials: Option<usize>,
}

struct TrialOutcome {
    violation: f64,
    counterexample: Option<Counterexample>,
    stat: f64,
}

impl TrialOutcome {
    fn ok(stat: f64) -> Self {
        Self {
            violation: 0.0,
            counterexample: None,
            stat,
        }
    }
}

fn collect(
    property: Property,
    outcomes: Vec<TrialOutcome>,
    stats: impl FnOnce(&mut Vec<f64>) -> serde_json::Value,
) -> PropertyReport {
    let trials = outcomes.len();
    let failures = outcomes.iter().filter(|o| o.counterexample.is_some()).count();
    let worst_violation = outcomes.iter().map(|o| o.violation).fold(0.0, f64::max);
    let mut values: Vec<f64> = outcomes.iter().map(|o| o.stat).collect();
    let counterexample = outcomes.into_iter().find_map(|o| o.counterexample);
    PropertyReport {
        property: property.name().to_owned(),
        trials,
        failures,
        passed: failures == 0,
        worst_violation,
        stats: stats(&mut values),
        counterexample,
    }
}

fn trial_rng(seed: u64, property: Property, trial: usize) -> Rng {
    seed::derived_rng(
        seed::derive(seed, stream::INSTANCE, property.id()),
        stream::TRIAL,
        trial as u64,
    )
}

/// Distinct random indices from `0..n`.
fn random_subset(rng: &mut Rng, n: usize, size: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, size).into_vec()
}

/// Greedy BatchBALD and top-1 BALD agree exactly at batch size one.
pub fn check_size_one(seed: u64, trials: usize) -> PropertyReport {
    let p = Property::SizeOneEquivalence;
    let outcomes = parallel::map_range(trials, |trial| {
        let mut rng = trial_rng(seed, p, trial);
        let (n, c, k) = (
            rng.random_range(1..=50),
            rng.random_range(2..=10),
            rng.random_range(1..=32),
        );
        let conc = random_concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let greedy = acquire_batchbald(&t, &AcquisitionRequest::new(Strategy::BatchBald, 1))
            .expect("valid request");
        let bald = acquire_bald(&t, &AcquisitionRequest::new(Strategy::Bald, 1)).expect("valid");
        if greedy.indices == bald.indices && greedy.scores[0].to_bits() == bald.scores[0].to_bits()
        {
            TrialOutcome::ok(0.0)
        } else {
            let diff = (greedy.scores[0] - bald.scores[0]).abs();
            TrialOutcome {
                violation: diff,
                stat: diff,
                counterexample: Some(Counterexample::new(
                    p,
                    trial,
                    &t,
                    vec![greedy.indices, bald.indices],
                    vec![greedy.scores[0], bald.scores[0]],
                    "greedy b=1 differs from top-1 BALD",
                )),
            }
        }
    });
    collect(p, outcomes, |_| serde_json::json!({}))
}

/// Batch score never exceeds the sum of the members' BALD scores.
pub fn check_upper_bound(scorer: &dyn Scorer, seed: u64, trials: usize) -> PropertyReport {
    let p = Property::UpperBound;
    let outcomes = parallel::map_range(trials, |trial| {
        let mut rng = trial_rng(seed, p, trial);
        let (n, c, k) = (
            rng.random_range(4..=8),
            rng.random_range(2..=4),
            rng.random_range(1..=8),
        );
        let size = rng.random_range(1..=4);
        let conc = random_concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let subset = random_subset(&mut rng, n, size);
        let batch = scorer.score(&t, &subset);
        let bald = bald_scores(&t);
        let bound: f64 = subset.iter().map(|&i| bald[i]).sum();
        let gap = bound - batch;
        if batch <= bound + TOLERANCE {
            TrialOutcome::ok(gap)
        } else {
            TrialOutcome {
                violation: batch - bound,
                stat: gap,
                counterexample: Some(Counterexample::new(
                    p,
                    trial,
                    &t,
                    vec![subset],
                    vec![batch, bound],
                    "batch score exceeds the sum of BALD scores",
                )),
            }
        }
    });
    collect(p, outcomes, |gaps| {
        serde_json::json!({ "min_gap": gaps.iter().copied().fold(f64::INFINITY, f64::min) })
    })
}

/// `f(A+x) + f(A+y) >= f(A+x+y) + f(A)`.
pub fn check_submodularity(scorer: &dyn Scorer, seed: u64, trials: usize) -> PropertyReport {
    let p = Property::Submodularity;
    let outcomes = parallel::map_range(trials, |trial| {
        let mut rng = trial_rng(seed, p, trial);
        let (n, c, k) = (
            rng.random_range(3..=7),
            rng.random_range(2..=4),
            rng.random_range(1..=8),
        );
        let a_size = rng.random_range(0..=(n - 2).min(2));
        let conc = random_concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let picked = random_subset(&mut rng, n, a_size + 2);
        let a = picked[..a_size].to_vec();
        let (x, y) = (picked[a_size], picked[a_size + 1]);
        let with = |extra: &[usize]| {
            let mut s = a.clone();
            s.extend_from_slice(extra);
            s
        };
        let f_a = scorer.score(&t, &a);
        let f_ax = scorer.score(&t, &with(&[x]));
        let f_ay = scorer.score(&t, &with(&[y]));
        let f_axy = scorer.score(&t, &with(&[x, y]));
        let slack = (f_ax + f_ay) - (f_axy + f_a);
        if slack >= -TOLERANCE {
            TrialOutcome::ok(slack)
        } else {
            TrialOutcome {
                violation: -slack,
                stat: slack,
                counterexample: Some(Counterexample::new(
                    p,
                    trial,
                    &t,
                    vec![a.clone(), with(&[x]), with(&[y]), with(&[x, y])],
                    vec![f_a, f_ax, f_ay, f_axy],
                    "f(A+x) + f(A+y) < f(A+x+y) + f(A)",
                )),
            }
        }
    });
    collect(p, outcomes, |s| {
        serde_json::json!({ "min_slack": s.iter().copied().fold(f64::INFINITY, f64::min) })
    })
}

/// Every greedy step's marginal gain is non-negative.
pub fn check_monotone_gains(seed: u64, trials: usize) -> PropertyReport {
    let p = Property::MonotoneGains;
    let outcomes = parallel::map_range(trials, |trial| {
        let mut rng = trial_rng(seed, p, trial);
        let (n, c, k) = (
            rng.random_range(2..=8),
            rng.random_range(2..=4),
            rng.random_range(1..=8),
        );
        let b = rng.random_range(1..=n.min(4));
        let conc = random_concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let req = AcquisitionRequest::new(Strategy::BatchBald, b).with_exact_limit(usize::MAX);
        let r = acquire_batchbald(&t, &req).expect("valid request");
        let mut prev = 0.0;
        let mut min_gain = f64::INFINITY;
        for &s in &r.scores {
            min_gain = min_gain.min(s - prev);
            prev = s;
        }
        if min_gain >= -TOLERANCE {
            TrialOutcome::ok(min_gain)
        } else {
            TrialOutcome {
                violation: -min_gain,
                stat: min_gain,
                counterexample: Some(Counterexample::new(
                    p,
                    trial,
                    &t,
                    vec![r.indices],
                    r.scores,
                    "greedy step decreased the batch score",
                )),
            }
        }
    });
    collect(p, outcomes, |g| {
        serde_json::json!({ "min_gain": g.iter().copied().fold(f64::INFINITY, f64::min) })
    })
}

/// Cached-matrix exact joint entropy equals direct enumeration.
pub fn check_oracle_equivalence(seed: u64, trials: usize) -> PropertyReport {
    let p = Property::OracleEquivalence;
    let outcomes = parallel::map_range(trials, |trial| {
        let mut rng = trial_rng(seed, p, trial);
        let c: usize = rng.random_range(2..=8);
        let max_n = (1..).take_while(|&n| c.pow(n as u32) <= 4096).last().unwrap_or(1);
        let n = rng.random_range(1..=max_n);
        let k = rng.random_range(1..=16);
        let conc = random_concentration(&mut rng);
        let t = random_tensor(&mut rng, n + 2, k, c, conc);
        let subset = random_subset(&mut rng, n + 2, n);
        let cached = joint_entropy_exact(&exact_state(&t, &subset, 4096).expect("within limit"))
            .expect("exact state");
        let oracle = brute_force_joint_entropy(&t, &subset);
        let err = (cached - oracle).abs();
        if err <= TOLERANCE {
            TrialOutcome::ok(err)
        } else {
            TrialOutcome {
                violation: err,
                stat: err,
                counterexample: Some(Counterexample::new(
                    p,
                    trial,
                    &t,
                    vec![subset],
                    vec![cached, oracle],
                    "cached joint entropy differs from enumeration",
                )),
            }
        }
    });
    collect(p, outcomes, |e| {
        serde_json::json!({ "max_abs_error": e.iter().copied().fold(0.0, f64::max) })
    })
}

/// Sample counts used by the convergence check.
pub const MC_SAMPLE_SIZES: [usize; 3] = [100, 1000, 10_000];
/// Independent seeds per instance and sample size.
pub const MC_SEEDS: usize = 20;
/// Relative error allowed at the largest sample size.
pub const MC_RELATIVE_TOLERANCE: f64 = 0.02;
/// Standard errors allowed between the seed mean and the exact value.
pub const MC_STANDARD_ERRORS: f64 = 4.0;

/// Outcome of one importance-sampling instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McInstance {
    pub exact: f64,
    /// Seed-mean estimate per sample size.
    pub mean: Vec<f64>,
    /// Standard error of the seed mean per sample size.
    pub standard_error: Vec<f64>,
    /// Median over seeds of the absolute relative error per sample size.
    pub median_relative_error: Vec<f64>,
}

/// Runs the importance-sampled estimator on a random instance with
/// `c^n <= 1024` against the exact joint entropy.
pub fn mc_instance(seed: u64, trial: usize) -> (PosteriorTensor, Vec<usize>, McInstance) {
    let mut rng = trial_rng(seed, Property::McConvergence, trial);
    let c: usize = rng.random_range(2..=4);
    let max_n = (1..).take_while(|&n| c.pow(n as u32) <= 1024).last().unwrap_or(2);
    let n = rng.random_range(2..=max_n);
    let k = rng.random_range(2..=16);
    let conc = random_concentration(&mut rng);
    let t = random_tensor(&mut rng, n, k, c, conc);
    let subset: Vec<usize> = (0..n).collect();
    let exact = brute_force_joint_entropy(&t, &subset);
    let (context, candidate) = subset.split_at(n - 1);
    let mut mean = Vec::new();
    let mut standard_error = Vec::new();
    let mut median_relative_error = Vec::new();
    for (mi, &m) in MC_SAMPLE_SIZES.iter().enumerate() {
        let estimates: Vec<f64> = (0..MC_SEEDS)
            .map(|s| {
                let mut rng = seed::derived_rng(
                    seed::derive(seed, stream::TRIAL, trial as u64),
                    stream::STEP,
                    (mi * MC_SEEDS + s) as u64,
                );
                let ctx = sample_configurations(&t, context, m, &mut rng).expect("valid");
                joint_entropy_sampled(&ctx, &t, candidate[0]).expect("sampled state")
            })
            .collect();
        let mu = estimates.iter().sum::<f64>() / MC_SEEDS as f64;
        let var = estimates.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / (MC_SEEDS - 1) as f64;
        mean.push(mu);
        standard_error.push((var / MC_SEEDS as f64).sqrt());
        let mut rel: Vec<f64> = estimates.iter().map(|e| (e - exact).abs() / exact).collect();
        median_relative_error.push(median(&mut rel));
    }
    (
        t,
        subset,
        McInstance {
            exact,
            mean,
            standard_error,
            median_relative_error,
        },
    )
}

/// Importance-sampled joint entropy converges to the exact value: at the
/// largest `m` within 2% relative error and 4 standard errors, and the median
/// error shrinks with `m`.
pub fn check_mc_convergence(seed: u64, trials: usize) -> PropertyReport {
    let p = Property::McConvergence;
    let last = MC_SAMPLE_SIZES.len() - 1;
    let instances = parallel::map_range(trials, |trial| mc_instance(seed, trial));
    let mut outcomes = Vec::with_capacity(trials);
    let mut per_m: Vec<Vec<f64>> = vec![Vec::new(); MC_SAMPLE_SIZES.len()];
    for (trial, (t, subset, inst)) in instances.into_iter().enumerate() {
        for (acc, &e) in per_m.iter_mut().zip(&inst.median_relative_error) {
            acc.push(e);
        }
        let err = (inst.mean[last] - inst.exact).abs();
        let rel = err / inst.exact;
        let se = inst.standard_error[last];
        let within_se = err <= MC_STANDARD_ERRORS * se || err <= TOLERANCE;
        if rel <= MC_RELATIVE_TOLERANCE && within_se {
            outcomes.push(TrialOutcome::ok(rel));
        } else {
            outcomes.push(TrialOutcome {
                violation: rel,
                stat: rel,
                counterexample: Some(Counterexample::new(
                    p,
                    trial,
                    &t,
                    vec![subset],
                    vec![inst.exact, inst.mean[last], se],
                    "sampled joint entropy outside tolerance at the largest m",
                )),
            });
        }
    }
    let medians: Vec<f64> = per_m.iter_mut().map(|v| median(v)).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let mut report = collect(p, outcomes, |rel| {
        serde_json::json!({
            "max_relative_error": rel.iter().copied().fold(0.0, f64::max),
        })
    });
    report.stats["m"] = serde_json::json!(MC_SAMPLE_SIZES);
    report.stats["median_relative_error"] = serde_json::json!(medians);
    report.stats["median_error_decreasing"] = serde_json::json!(decreasing);
    if !decreasing {
        report.passed = false;
        report.failures += 1;
    }
    report
}

/// `1 - 1/e`.
pub fn greedy_ratio_bound() -> f64 {
    1.0 - (-1.0f64).exp()
}

/// Greedy total score against the exhaustive optimum on small instances.
pub fn check_greedy_bound(seed: u64, trials: usize) -> PropertyReport {
    let p = Property::GreedyBound;
    let bound = greedy_ratio_bound();
    let outcomes = parallel::map_range(trials, |trial| {
        let mut rng = trial_rng(seed, p, trial);
        let (n, c, k) = (
            rng.random_range(2..=8),
            rng.random_range(2..=3),
            rng.random_range(1..=4),
        );
        let b = rng.random_range(1..=n.min(3));
        let conc = random_concentration(&mut rng);
        let t = random_tensor(&mut rng, n, k, c, conc);
        let greedy = acquire_batchbald(&t, &AcquisitionRequest::new(Strategy::BatchBald, b))
            .expect("valid")
            .total_score();
        let best = acquire_exhaustive(&t, &AcquisitionRequest::new(Strategy::Exhaustive, b))
            .expect("small instance")
            .total_score();
        let ratio = if best > TOLERANCE { greedy / best } else { 1.0 };
        if greedy >= bound * best - TOLERANCE && greedy <= best + TOLERANCE {
            TrialOutcome::ok(ratio)
        } else {
            TrialOutcome {
                violation: (bound * best - greedy).max(greedy - best),
                stat: ratio,
                counterexample: Some(Counterexample::new(
                    p,
                    trial,
                    &t,
                    vec![],
                    vec![greedy, best],
                    "greedy outside [(1 - 1/e) * optimum, optimum]",
                )),
            }
        }
    });
    collect(p, outcomes, |ratios| {
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let optimal = ratios.iter().filter(|&&r| r >= 1.0 - 1e-12).count();
        serde_json::json!({
            "min_ratio": min,
            "median_ratio": median(ratios),
            "optimal_fraction": optimal as f64 / ratios.len().max(1) as f64,
        })
    })
}

pub fn run_property(
    property: Property,
    scorer: &dyn Scorer,
    seed: u64,
    trials: usize,
) -> PropertyReport {
    match property {
        Property::SizeOneEquivalence => check_size_one(seed, trials),
        Property::UpperBound => check_upper_bound(scorer, seed, trials),
        Property::Submodularity => check_submodularity(scorer, seed, trials),
        Property::MonotoneGains => check_monotone_gains(seed, trials),
        Property::OracleEquivalence => check_oracle_equivalence(seed, trials),
        Property::McConvergence => check_mc_convergence(seed, trials),
        Property::GreedyBound => check_greedy_bound(seed, trials),
    }
}

/// Runs every property.
pub fn run_suite(cfg: &VerifyConfig, scorer: &dyn Scorer) -> VerifyReport {
    let properties: Vec<PropertyReport> = Property::ALL
        .into_iter()
        .map(|p| run_property(p, scorer, cfg.seed, cfg.trials.unwrap_or(p.default_trials())))
        .collect();
    VerifyReport {
        seed: cfg.seed,
        all_passed: properties.iter().all(|p| p.passed),
        properties,
    }
}
