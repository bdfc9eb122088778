//! Batch selection strategies.
//!
//! Greedy BatchBALD grows the batch one point at a time, scoring every
//! remaining pool point by the joint mutual information of the batch with
//! that point added. Ties are broken by the lowest pool index everywhere.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    self, batchbald_score, bald_scores, configuration_count, context_seed, extend_joint_exact,
    joint_entropy_exact_with, joint_entropy_sampled, point_conditional_entropies,
    sample_configurations, EstimatorConfig, EstimatorError, EstimatorMode, JointState,
};
use crate::io::ResultsDocument;
use crate::parallel;
use crate::seed::{self, stream};
use crate::tensor::{PosteriorTensor, ScoreVector};

/// Largest number of subsets the exhaustive oracle will enumerate.
pub const EXHAUSTIVE_MAX_SUBSETS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    BatchBald,
    Bald,
    Random,
    VarRatios,
    MeanStd,
    Exhaustive,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::BatchBald,
        Strategy::Bald,
        Strategy::Random,
        Strategy::VarRatios,
        Strategy::MeanStd,
        Strategy::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::BatchBald => "batchbald",
            Strategy::Bald => "bald",
            Strategy::Random => "random",
            Strategy::VarRatios => "varratios",
            Strategy::MeanStd => "meanstd",
            Strategy::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown strategy {0:?}")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| UnknownStrategy(s.to_owned()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AcquisitionError {
    #[error("batch size {b} exceeds the pool of {n_pool}")]
    BatchTooLarge { b: usize, n_pool: usize },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("m must be at least 1")]
    NoSamples,
    #[error("exact limit {exact_limit} is below the class count {c}")]
    ExactLimitTooSmall { exact_limit: usize, c: usize },
    #[error("exhaustive search needs {subsets} subsets of {configurations} configurations; too large")]
    InstanceTooLarge { subsets: u128, configurations: usize },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionRequest {
    pub strategy: Strategy,
    pub b: usize,
    pub m: usize,
    pub exact_limit: usize,
    pub seed: u64,
}

impl AcquisitionRequest {
    pub fn new(strategy: Strategy, b: usize) -> Self {
        Self {
            strategy,
            b,
            m: estimators::DEFAULT_SAMPLES,
            exact_limit: estimators::DEFAULT_EXACT_LIMIT,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_exact_limit(mut self, exact_limit: usize) -> Self {
        self.exact_limit = exact_limit;
        self
    }

    pub fn validate(&self, t: &PosteriorTensor) -> Result<(), AcquisitionError> {
        if self.b == 0 {
            return Err(AcquisitionError::EmptyBatch);
        }
        if self.b > t.n_pool() {
            return Err(AcquisitionError::BatchTooLarge {
                b: self.b,
                n_pool: t.n_pool(),
            });
        }
        if self.m == 0 {
            return Err(AcquisitionError::NoSamples);
        }
        if self.exact_limit < t.c() {
            return Err(AcquisitionError::ExactLimitTooSmall {
                exact_limit: self.exact_limit,
                c: t.c(),
            });
        }
        Ok(())
    }

    fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            exact_limit: self.exact_limit,
            m: self.m,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionResult {
    pub strategy: Strategy,
    /// Acquired pool indices in selection order.
    pub indices: Vec<usize>,
    /// Per-step scores. For BatchBALD and the exhaustive oracle this is the
    /// joint score of the batch so far; for the other strategies the score
    /// of the selected point.
    pub scores: Vec<f64>,
    pub modes: Vec<EstimatorMode>,
    pub step_ms: Vec<f64>,
}

impl AcquisitionResult {
    pub fn total_score(&self) -> f64 {
        self.scores.last().copied().unwrap_or(0.0)
    }

    pub fn to_document(&self, req: &AcquisitionRequest, k: usize) -> ResultsDocument {
        ResultsDocument {
            strategy: self.strategy.name().to_owned(),
            b: req.b,
            k,
            m: req.m,
            seed: req.seed,
            exact_limit: req.exact_limit,
            acquired: self.indices.clone(),
            scores: self.scores.clone(),
            step_ms: self.step_ms.clone(),
        }
    }
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    // No monotonic clock on wasm32-unknown-unknown.
    fn ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Runs the requested strategy.
pub fn acquire(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
) -> Result<AcquisitionResult, AcquisitionError> {
    match req.strategy {
        Strategy::BatchBald => acquire_batchbald(t, req),
        Strategy::Bald => acquire_bald(t, req),
        Strategy::Random => acquire_random(t, req),
        Strategy::VarRatios => acquire_varratios(t, req),
        Strategy::MeanStd => acquire_meanstd(t, req),
        Strategy::Exhaustive => acquire_exhaustive(t, req),
    }
}

/// First index of the largest score; NaN never wins.
fn argmax(candidates: &[usize], scores: &[f64]) -> (usize, f64) {
    let mut best = (candidates[0], f64::NEG_INFINITY);
    let mut found = false;
    for (&x, &s) in candidates.iter().zip(scores) {
        if !found && !s.is_nan() || s > best.1 {
            best = (x, s);
            found = true;
        }
    }
    best
}

/// Greedy BatchBALD. Exact enumeration while `c^n <= exact_limit` at step
/// `n`, importance sampling afterwards. In sampled steps every candidate is
/// scored against the same freshly drawn context of the batch so far.
pub fn acquire_batchbald(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
) -> Result<AcquisitionResult, AcquisitionError> {
    req.validate(t)?;
    let cond = point_conditional_entropies(t);
    let mut in_batch = vec![false; t.n_pool()];
    let mut result = AcquisitionResult {
        strategy: Strategy::BatchBald,
        indices: Vec::with_capacity(req.b),
        scores: Vec::with_capacity(req.b),
        modes: Vec::with_capacity(req.b),
        step_ms: Vec::with_capacity(req.b),
    };
    let mut exact = Some(JointState::empty_exact(t.k(), t.c()));
    let mut cond_sum = 0.0;

    for step in 1..=req.b {
        let clock = Stopwatch::start();
        let candidates: Vec<usize> = (0..t.n_pool()).filter(|&x| !in_batch[x]).collect();
        let use_exact = configuration_count(t.c(), step) <= req.exact_limit;
        let (scores, mode) = match exact.as_ref().filter(|_| use_exact) {
            Some(state) => (
                parallel::map_items(&candidates, |&x| {
                    joint_entropy_exact_with(state, t, x).map(|h| h - (cond_sum + cond[x]))
                }),
                EstimatorMode::Exact,
            ),
            None => {
                let mut rng = seed::rng(context_seed(req.seed, step));
                let context = sample_configurations(t, &result.indices, req.m, &mut rng)?;
                (
                    parallel::map_items(&candidates, |&x| {
                        joint_entropy_sampled(&context, t, x).map(|h| h - (cond_sum + cond[x]))
                    }),
                    EstimatorMode::Sampled,
                )
            }
        };
        let scores = scores.into_iter().collect::<Result<Vec<_>, _>>()?;
        let (chosen, score) = argmax(&candidates, &scores);

        in_batch[chosen] = true;
        cond_sum += cond[chosen];
        exact = match (exact, mode) {
            (Some(state), EstimatorMode::Exact) => {
                extend_joint_exact(&state, t, chosen, req.exact_limit).ok()
            }
            _ => None,
        };
        result.indices.push(chosen);
        result.scores.push(score);
        result.modes.push(mode);
        result.step_ms.push(clock.ms());
    }
    Ok(result)
}

fn acquire_top(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
    strategy: Strategy,
    score: impl FnOnce(&PosteriorTensor) -> ScoreVector,
) -> Result<AcquisitionResult, AcquisitionError> {
    req.validate(t)?;
    let clock = Stopwatch::start();
    let scores = score(t);
    let indices = scores.top(req.b);
    let per_step = clock.ms() / req.b as f64;
    Ok(AcquisitionResult {
        strategy,
        scores: indices.iter().map(|&i| scores[i]).collect(),
        modes: vec![EstimatorMode::Exact; req.b],
        step_ms: vec![per_step; req.b],
        indices,
    })
}

/// Top-`b` points by individual BALD score.
pub fn acquire_bald(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
) -> Result<AcquisitionResult, AcquisitionError> {
    acquire_top(t, req, Strategy::Bald, bald_scores)
}

/// `1 - max_y mean_j p(y | x, w_j)`.
pub fn varratios_scores(t: &PosteriorTensor) -> ScoreVector {
    let c = t.c();
    let k = t.k() as f64;
    ScoreVector {
        scores: parallel::map_range(t.n_pool(), |i| {
            let mut sums = vec![0.0; c];
            for row in t.point(i).chunks_exact(c) {
                for (acc, &p) in sums.iter_mut().zip(row) {
                    *acc += p;
                }
            }
            1.0 - sums.iter().fold(0.0f64, |m, &s| m.max(s / k))
        }),
    }
}

/// Class-averaged population standard deviation over the samples.
pub fn meanstd_scores(t: &PosteriorTensor) -> ScoreVector {
    let (c, k) = (t.c(), t.k());
    ScoreVector {
        scores: parallel::map_range(t.n_pool(), |i| {
            let point = t.point(i);
            let total: f64 = (0..c)
                .map(|y| {
                    let mean = (0..k).map(|j| point[j * c + y]).sum::<f64>() / k as f64;
                    let var = (0..k)
                        .map(|j| (point[j * c + y] - mean).powi(2))
                        .sum::<f64>()
                        / k as f64;
                    var.sqrt()
                })
                .sum();
            total / c as f64
        }),
    }
}

pub fn acquire_varratios(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
) -> Result<AcquisitionResult, AcquisitionError> {
    acquire_top(t, req, Strategy::VarRatios, varratios_scores)
}

pub fn acquire_meanstd(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
) -> Result<AcquisitionResult, AcquisitionError> {
    acquire_top(t, req, Strategy::MeanStd, meanstd_scores)
}

/// Uniform sample of `b` distinct indices. Scores are reported as zero.
pub fn acquire_random(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
) -> Result<AcquisitionResult, AcquisitionError> {
    req.validate(t)?;
    let clock = Stopwatch::start();
    let mut rng = seed::derived_rng(req.seed, stream::RANDOM_STRATEGY, 0);
    let indices = rand::seq::index::sample(&mut rng, t.n_pool(), req.b).into_vec();
    let per_step = clock.ms() / req.b as f64;
    Ok(AcquisitionResult {
        strategy: Strategy::Random,
        indices,
        scores: vec![0.0; req.b],
        modes: vec![EstimatorMode::Exact; req.b],
        step_ms: vec![per_step; req.b],
    })
}

/// `C(n, r)`, saturating.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r) as u128;
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul(n as u128 - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Advances `idx` to the next `r`-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Brute-force maximizer of the exact BatchBALD score over all `b`-subsets.
/// Ties go to the lexicographically smallest index tuple. Step scores are the
/// exact scores of the prefixes of the winning tuple.
pub fn acquire_exhaustive(
    t: &PosteriorTensor,
    req: &AcquisitionRequest,
) -> Result<AcquisitionResult, AcquisitionError> {
    req.validate(t)?;
    let subsets = binomial(t.n_pool(), req.b);
    let configurations = configuration_count(t.c(), req.b);
    if subsets > EXHAUSTIVE_MAX_SUBSETS || configurations > req.exact_limit {
        return Err(AcquisitionError::InstanceTooLarge {
            subsets,
            configurations,
        });
    }
    let clock = Stopwatch::start();
    let cfg = req.estimator_config();
    let mut idx: Vec<usize> = (0..req.b).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let s = batchbald_score(t, &idx, &cfg)?.score;
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((idx.clone(), s));
        }
        if !next_combination(&mut idx, t.n_pool()) {
            break;
        }
    }
    let (indices, _) = best.expect("at least one subset");
    let scores = (1..=req.b)
        .map(|n| batchbald_score(t, &indices[..n], &cfg).map(|b| b.score))
        .collect::<Result<Vec<_>, _>>()?;
    let mut step_ms = vec![0.0; req.b];
    step_ms[req.b - 1] = clock.ms();
    Ok(AcquisitionResult {
        strategy: Strategy::Exhaustive,
        indices,
        scores,
        modes: vec![EstimatorMode::Exact; req.b],
        step_ms,
    })
}
