//! Entropy and mutual-information estimators over a [`PosteriorTensor`].
//!
//! The joint entropy of a batch of labels is computed from a [`JointState`]
//! that caches `p(y_1..y_n | w_j)` for every configuration row and parameter
//! sample. In exact mode the rows enumerate all `c^n` configurations; in
//! sampled mode they hold `m` configurations drawn from `p(y_1..y_n)` and the
//! entropy of one more label is estimated by importance weighting.
//!
//! All quantities are in nats and use `0 ln 0 = 0`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parallel;
use crate::seed::{self, stream, Rng};
use crate::tensor::{PosteriorTensor, ScoreVector};

/// Default cap on the number of enumerated configurations `c^n`.
pub const DEFAULT_EXACT_LIMIT: usize = 10_000;
/// Default number of sampled configurations.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Floor applied to the importance-weight denominator.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EstimatorError {
    #[error("pool index {index} out of range for a pool of {n_pool}")]
    IndexOutOfRange { index: usize, n_pool: usize },
    #[error("pool index {index} appears more than once in the subset")]
    DuplicateIndex { index: usize },
    #[error("subset is empty")]
    EmptySubset,
    #[error("exact enumeration needs {rows} configurations, above the limit of {limit}")]
    ExactLimitExceeded { rows: usize, limit: usize },
    #[error("operation requires a {expected:?} joint state")]
    WrongMode { expected: EstimatorMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    Exact,
    Sampled,
}

impl EstimatorMode {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorMode::Exact => "exact",
            EstimatorMode::Sampled => "sampled",
        }
    }
}

/// Knobs shared by the joint-entropy estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Largest `c^n` evaluated by enumeration.
    pub exact_limit: usize,
    /// Sampled configurations per estimate.
    pub m: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            exact_limit: DEFAULT_EXACT_LIMIT,
            m: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

#[inline]
fn neg_xlogx(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Entropy of a categorical distribution.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().map(|&v| neg_xlogx(v)).sum()
}

/// Entropy of the distribution `sums / k`. Shared by every path that turns
/// accumulated sample sums into an entropy, which keeps the size-1 BatchBALD
/// score bit-identical to BALD.
#[inline]
fn entropy_of_sums(sums: &[f64], k: usize) -> f64 {
    let inv_k = 1.0 / k as f64;
    sums.iter().map(|&s| neg_xlogx(s * inv_k)).sum()
}

fn check_index(t: &PosteriorTensor, index: usize) -> Result<(), EstimatorError> {
    if index >= t.n_pool() {
        Err(EstimatorError::IndexOutOfRange {
            index,
            n_pool: t.n_pool(),
        })
    } else {
        Ok(())
    }
}

fn check_subset(t: &PosteriorTensor, subset: &[usize]) -> Result<(), EstimatorError> {
    if subset.is_empty() {
        return Err(EstimatorError::EmptySubset);
    }
    for (pos, &i) in subset.iter().enumerate() {
        check_index(t, i)?;
        if subset[..pos].contains(&i) {
            return Err(EstimatorError::DuplicateIndex { index: i });
        }
    }
    Ok(())
}

/// `(1/k) sum_j H[y_i | w_j]` for a single point.
pub fn point_conditional_entropy(t: &PosteriorTensor, i: usize) -> f64 {
    let total: f64 = (0..t.k()).map(|j| entropy(t.row(i, j))).sum();
    total / t.k() as f64
}

pub fn point_conditional_entropies(t: &PosteriorTensor) -> Vec<f64> {
    parallel::map_range(t.n_pool(), |i| point_conditional_entropy(t, i))
}

/// Expected conditional entropy of the labels of `subset`; additive over points
/// because labels are independent given the parameters.
pub fn conditional_entropy(t: &PosteriorTensor, subset: &[usize]) -> Result<f64, EstimatorError> {
    let mut total = 0.0;
    for &i in subset {
        check_index(t, i)?;
        total += point_conditional_entropy(t, i);
    }
    Ok(total)
}

/// Entropy of the sample-averaged predictive distribution of one point.
pub fn marginal_entropy(t: &PosteriorTensor, i: usize) -> f64 {
    let c = t.c();
    let mut sums = vec![0.0; c];
    for row in t.point(i).chunks_exact(c) {
        for (acc, &p) in sums.iter_mut().zip(row) {
            *acc += p;
        }
    }
    entropy_of_sums(&sums, t.k())
}

/// Per-point mutual information between the label and the parameters.
pub fn bald_scores(t: &PosteriorTensor) -> ScoreVector {
    ScoreVector {
        scores: parallel::map_range(t.n_pool(), |i| {
            marginal_entropy(t, i) - point_conditional_entropy(t, i)
        }),
    }
}

/// Cached per-configuration, per-sample joint probabilities.
///
/// `probs` is `rows x k` row-major. Exact rows are indexed in mixed radix
/// with the most recently folded point as the least significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    mode: EstimatorMode,
    k: usize,
    c: usize,
    rows: usize,
    probs: Vec<f64>,
    points: Vec<usize>,
    /// Sampled mode: `rows x n` labels.
    configs: Vec<u32>,
    /// Sampled mode: `p(config_r) = mean_j probs[r][j]`.
    self_prob: Vec<f64>,
}

impl JointState {
    /// The `n = 0` state: one all-ones row.
    pub fn empty_exact(k: usize, c: usize) -> Self {
        Self {
            mode: EstimatorMode::Exact,
            k,
            c,
            rows: 1,
            probs: vec![1.0; k],
            points: Vec::new(),
            configs: Vec::new(),
            self_prob: Vec::new(),
        }
    }

    /// `m` empty configurations, each with probability one.
    pub fn empty_sampled(k: usize, c: usize, m: usize) -> Self {
        Self {
            mode: EstimatorMode::Sampled,
            k,
            c,
            rows: m,
            probs: vec![1.0; m * k],
            points: Vec::new(),
            configs: Vec::new(),
            self_prob: vec![1.0; m],
        }
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of points folded in so far.
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.probs[r * self.k..(r + 1) * self.k]
    }

    pub fn self_prob(&self) -> &[f64] {
        &self.self_prob
    }

    /// Labels of configuration `r`, in folding order.
    pub fn config(&self, r: usize) -> Vec<usize> {
        let n = self.n();
        match self.mode {
            EstimatorMode::Sampled => self.configs[r * n..(r + 1) * n]
                .iter()
                .map(|&y| y as usize)
                .collect(),
            EstimatorMode::Exact => {
                let mut labels = vec![0; n];
                let mut rest = r;
                for slot in labels.iter_mut().rev() {
                    *slot = rest % self.c;
                    rest /= self.c;
                }
                labels
            }
        }
    }

    fn require(&self, expected: EstimatorMode) -> Result<(), EstimatorError> {
        if self.mode == expected {
            Ok(())
        } else {
            Err(EstimatorError::WrongMode { expected })
        }
    }
}

/// `c^n`, saturating.
pub fn configuration_count(c: usize, n: usize) -> usize {
    u32::try_from(n)
        .ok()
        .and_then(|n| c.checked_pow(n))
        .unwrap_or(usize::MAX)
}

/// Folds point `i` into an exact state: every row splits into `c` rows,
/// `P'[(r, y)][j] = P[r][j] * p(y | x_i, w_j)`.
pub fn extend_joint_exact(
    state: &JointState,
    t: &PosteriorTensor,
    i: usize,
    exact_limit: usize,
) -> Result<JointState, EstimatorError> {
    state.require(EstimatorMode::Exact)?;
    check_index(t, i)?;
    let (k, c) = (t.k(), t.c());
    let rows = state.rows.saturating_mul(c);
    if rows > exact_limit {
        return Err(EstimatorError::ExactLimitExceeded {
            rows,
            limit: exact_limit,
        });
    }
    let mut probs = vec![0.0; rows * k];
    for r in 0..state.rows {
        let prev = state.row(r);
        for j in 0..k {
            let w = prev[j];
            for (y, &p) in t.row(i, j).iter().enumerate() {
                probs[(r * c + y) * k + j] = w * p;
            }
        }
    }
    let mut points = state.points.clone();
    points.push(i);
    Ok(JointState {
        mode: EstimatorMode::Exact,
        k,
        c,
        rows,
        probs,
        points,
        configs: Vec::new(),
        self_prob: Vec::new(),
    })
}

/// Exact state for `subset`, folded in order.
pub fn exact_state(
    t: &PosteriorTensor,
    subset: &[usize],
    exact_limit: usize,
) -> Result<JointState, EstimatorError> {
    subset
        .iter()
        .try_fold(JointState::empty_exact(t.k(), t.c()), |s, &i| {
            extend_joint_exact(&s, t, i, exact_limit)
        })
}

/// `-sum_r pbar_r ln pbar_r` with `pbar_r = (1/k) sum_j P[r][j]`.
pub fn joint_entropy_exact(state: &JointState) -> Result<f64, EstimatorError> {
    state.require(EstimatorMode::Exact)?;
    let mut h = 0.0;
    for r in 0..state.rows {
        let s: f64 = state.row(r).iter().sum();
        h += entropy_of_sums(&[s], state.k);
    }
    Ok(h)
}

/// Exact joint entropy of the state's points plus candidate `i`, computed as
/// the product `P * P_i^T` without materializing the extended state.
pub fn joint_entropy_exact_with(
    state: &JointState,
    t: &PosteriorTensor,
    i: usize,
) -> Result<f64, EstimatorError> {
    state.require(EstimatorMode::Exact)?;
    check_index(t, i)?;
    let c = t.c();
    let point = t.point(i);
    let mut sums = vec![0.0; c];
    let mut h = 0.0;
    for r in 0..state.rows {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (&w, row) in state.row(r).iter().zip(point.chunks_exact(c)) {
            if w == 0.0 {
                continue;
            }
            for (acc, &p) in sums.iter_mut().zip(row) {
                *acc += w * p;
            }
        }
        h += entropy_of_sums(&sums, state.k);
    }
    Ok(h)
}

/// Draws one class from `weights` (not necessarily normalized); never returns
/// a zero-weight class.
fn sample_categorical(rng: &mut Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (y, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cum += w;
            last_positive = y;
            if u < cum {
                return y;
            }
        }
    }
    last_positive
}

/// Draws `m` configurations of `subset` from the sample mixture: pick `w_j`
/// uniformly, then each label from `p(y_i | w_j)`. The returned state holds
/// `p(config | w_j)` for every `j`.
pub fn sample_configurations(
    t: &PosteriorTensor,
    subset: &[usize],
    m: usize,
    rng: &mut Rng,
) -> Result<JointState, EstimatorError> {
    for &i in subset {
        check_index(t, i)?;
    }
    let (k, c, n) = (t.k(), t.c(), subset.len());
    let m = m.max(1);
    let mut state = JointState::empty_sampled(k, c, m);
    if n == 0 {
        return Ok(state);
    }
    state.configs = Vec::with_capacity(m * n);
    for _ in 0..m {
        let j = rng.random_range(0..k);
        for &i in subset {
            state.configs.push(sample_categorical(rng, t.row(i, j)) as u32);
        }
    }
    for r in 0..m {
        let config = &state.configs[r * n..(r + 1) * n];
        let row = &mut state.probs[r * k..(r + 1) * k];
        for (&i, &y) in subset.iter().zip(config) {
            let point = t.point(i);
            for (j, w) in row.iter_mut().enumerate() {
                *w *= point[j * c + y as usize];
            }
        }
        state.self_prob[r] = row.iter().sum::<f64>() / k as f64;
    }
    state.points = subset.to_vec();
    Ok(state)
}

/// Commits point `i` to a sampled context. Each configuration is extended by
/// a label drawn from `p(y_i | config)`, so the extended rows remain draws
/// from the joint predictive distribution.
pub fn extend_joint_sampled(
    state: &JointState,
    t: &PosteriorTensor,
    i: usize,
    rng: &mut Rng,
) -> Result<JointState, EstimatorError> {
    state.require(EstimatorMode::Sampled)?;
    check_index(t, i)?;
    let (k, c, n) = (t.k(), t.c(), state.n());
    let point = t.point(i);
    let mut next = JointState {
        mode: EstimatorMode::Sampled,
        k,
        c,
        rows: state.rows,
        probs: Vec::with_capacity(state.probs.len()),
        points: state.points.clone(),
        configs: Vec::with_capacity(state.rows * (n + 1)),
        self_prob: Vec::with_capacity(state.rows),
    };
    next.points.push(i);
    let mut weights = vec![0.0; c];
    for r in 0..state.rows {
        let row = state.row(r);
        weights.iter_mut().for_each(|w| *w = 0.0);
        for (&w, p_row) in row.iter().zip(point.chunks_exact(c)) {
            for (acc, &p) in weights.iter_mut().zip(p_row) {
                *acc += w * p;
            }
        }
        let y = sample_categorical(rng, &weights);
        next.configs.extend_from_slice(&state.configs[r * n..(r + 1) * n]);
        next.configs.push(y as u32);
        let start = next.probs.len();
        next.probs
            .extend(row.iter().enumerate().map(|(j, &w)| w * point[j * c + y]));
        next.self_prob
            .push(next.probs[start..].iter().sum::<f64>() / k as f64);
    }
    Ok(next)
}

/// Importance-sampled joint entropy of the context's points plus candidate
/// `i`:
///
/// `-(1/m) sum_r sum_y [(P P_i^T)_{r,y} / (P 1)_r] ln((1/k) (P P_i^T)_{r,y})`
pub fn joint_entropy_sampled(
    state: &JointState,
    t: &PosteriorTensor,
    i: usize,
) -> Result<f64, EstimatorError> {
    state.require(EstimatorMode::Sampled)?;
    check_index(t, i)?;
    let (k, c) = (t.k(), t.c());
    let inv_k = 1.0 / k as f64;
    let point = t.point(i);
    let mut sums = vec![0.0; c];
    let mut total = 0.0;
    for r in 0..state.rows {
        let row = state.row(r);
        sums.iter_mut().for_each(|s| *s = 0.0);
        let mut weight = 0.0;
        for (&w, p_row) in row.iter().zip(point.chunks_exact(c)) {
            weight += w;
            if w == 0.0 {
                continue;
            }
            for (acc, &p) in sums.iter_mut().zip(p_row) {
                *acc += w * p;
            }
        }
        let denom = weight.max(PROB_FLOOR);
        for &s in &sums {
            if s > 0.0 {
                total += (s / denom) * (s * inv_k).ln();
            }
        }
    }
    Ok(-total / state.rows as f64)
}

/// Joint entropy, conditional entropy and their difference for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyBreakdown {
    pub joint_entropy: f64,
    pub conditional_entropy: f64,
    pub score: f64,
    pub mode: EstimatorMode,
}

/// Seed of the sampled context used when scoring a batch of `n` points.
/// Greedy selection uses the same derivation at step `n`, so its step scores
/// are reproducible through [`batchbald_score`].
pub fn context_seed(seed: u64, n: usize) -> u64 {
    seed::derive(seed, stream::STEP, n as u64)
}

/// Mutual information between the joint labels of `subset` and the
/// parameters. Enumerates configurations while `c^|subset|` fits under the
/// exact limit, and falls back to importance sampling otherwise.
pub fn batchbald_score(
    t: &PosteriorTensor,
    subset: &[usize],
    config: &EstimatorConfig,
) -> Result<EntropyBreakdown, EstimatorError> {
    check_subset(t, subset)?;
    let n = subset.len();
    let (context, last) = subset.split_at(n - 1);
    let last = last[0];
    let (joint_entropy, mode) = if configuration_count(t.c(), n) <= config.exact_limit {
        let state = exact_state(t, context, config.exact_limit)?;
        (joint_entropy_exact_with(&state, t, last)?, EstimatorMode::Exact)
    } else {
        let mut rng = seed::rng(context_seed(config.seed, n));
        let state = sample_configurations(t, context, config.m, &mut rng)?;
        (joint_entropy_sampled(&state, t, last)?, EstimatorMode::Sampled)
    };
    let conditional_entropy = conditional_entropy(t, subset)?;
    Ok(EntropyBreakdown {
        joint_entropy,
        conditional_entropy,
        score: joint_entropy - conditional_entropy,
        mode,
    })
}
