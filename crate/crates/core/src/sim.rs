//! Exact-Bayes active-learning simulator.
//!
//! The model is a finite ensemble of hypotheses, each a table of class
//! distributions per discrete feature bucket. Posterior weights are updated
//! by Bayes' rule, so every information quantity can be computed exactly.
//! Pool points are feature ids; the repeated pool holds exact copies of each
//! prototype (same feature, same hidden label).

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{acquire, AcquisitionError, AcquisitionRequest, Strategy};
use crate::estimators::{self, entropy};
use crate::parallel;
use crate::seed::{self, stream, Rng};
use crate::tensor::PosteriorTensor;

/// Likelihood floor used by posterior updates.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("need at least 2 hypotheses, got {0}")]
    TooFewHypotheses(usize),
    #[error("need at least 1 feature bucket")]
    NoFeatures,
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("concentration must be positive and finite, got {0}")]
    BadConcentration(f64),
    #[error("feature {feature} out of range ({features} buckets)")]
    FeatureOutOfRange { feature: usize, features: usize },
    #[error("label {label} out of range ({classes} classes)")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("pool index {index} out of range for a pool of {len}")]
    PoolIndexOutOfRange { index: usize, len: usize },
    #[error("budget of {rounds} rounds x {b} exceeds the pool of {pool}")]
    BudgetExceedsPool { rounds: usize, b: usize, pool: usize },
    #[error("k must be at least 1")]
    NoSamples,
    #[error("trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
}

/// Finite set of parameter tables with normalized posterior log-weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisEnsemble {
    hypotheses: usize,
    features: usize,
    classes: usize,
    /// `hypotheses x features x classes`.
    tables: Vec<f64>,
    log_weights: Vec<f64>,
}

fn normalize_log_weights(log_weights: &mut [f64]) {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + log_weights.iter().map(|w| (w - max).exp()).sum::<f64>().ln();
    log_weights.iter_mut().for_each(|w| *w -= lse);
}

impl HypothesisEnsemble {
    /// Ensemble with a uniform prior over the given tables.
    pub fn new(
        hypotheses: usize,
        features: usize,
        classes: usize,
        tables: Vec<f64>,
    ) -> Result<Self, SimError> {
        if hypotheses < 2 {
            return Err(SimError::TooFewHypotheses(hypotheses));
        }
        if features == 0 {
            return Err(SimError::NoFeatures);
        }
        if classes < 2 {
            return Err(SimError::TooFewClasses(classes));
        }
        assert_eq!(tables.len(), hypotheses * features * classes, "table shape");
        Ok(Self {
            hypotheses,
            features,
            classes,
            tables,
            log_weights: vec![-(hypotheses as f64).ln(); hypotheses],
        })
    }

    pub fn hypotheses(&self) -> usize {
        self.hypotheses
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// `p(y | f, w_h)`.
    pub fn table(&self, h: usize, f: usize) -> &[f64] {
        let start = (h * self.features + f) * self.classes;
        &self.tables[start..start + self.classes]
    }

    /// Posterior predictive `sum_h w_h p(y | f, w_h)`.
    pub fn predictive(&self, f: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.classes];
        for (h, w) in self.weights().into_iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.table(h, f)) {
                *o += w * p;
            }
        }
        out
    }

    fn check(&self, f: usize, y: usize) -> Result<(), SimError> {
        if f >= self.features {
            return Err(SimError::FeatureOutOfRange {
                feature: f,
                features: self.features,
            });
        }
        if y >= self.classes {
            return Err(SimError::LabelOutOfRange {
                label: y,
                classes: self.classes,
            });
        }
        Ok(())
    }

    /// Bayes update on observing label `y` at feature `f`.
    pub fn posterior_update(&self, f: usize, y: usize) -> Result<Self, SimError> {
        self.posterior_update_many(&[(f, y)])
    }

    /// Applies several `(feature, label)` observations.
    pub fn posterior_update_many(&self, observations: &[(usize, usize)]) -> Result<Self, SimError> {
        let mut next = self.clone();
        for &(f, y) in observations {
            self.check(f, y)?;
            for h in 0..self.hypotheses {
                next.log_weights[h] += self.table(h, f)[y].max(LIKELIHOOD_FLOOR).ln();
            }
        }
        normalize_log_weights(&mut next.log_weights);
        Ok(next)
    }
}

/// Draws an ensemble whose table rows are symmetric-Dirichlet samples, with a
/// uniform prior. Returns the ensemble and the index of the ground-truth
/// hypothesis.
pub fn make_ensemble(
    hypotheses: usize,
    features: usize,
    classes: usize,
    concentration: f64,
    seed: u64,
) -> Result<(HypothesisEnsemble, usize), SimError> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(SimError::BadConcentration(concentration));
    }
    if classes < 2 {
        return Err(SimError::TooFewClasses(classes));
    }
    let gamma = Gamma::new(concentration, 1.0).map_err(|_| SimError::BadConcentration(concentration))?;
    let mut rng = seed::rng(seed);
    let mut tables = Vec::with_capacity(hypotheses * features * classes);
    let mut row = vec![0.0; classes];
    for _ in 0..hypotheses * features {
        loop {
            row.iter_mut().for_each(|v| *v = gamma.sample(&mut rng));
            let total: f64 = row.iter().sum();
            if total > 0.0 && total.is_finite() {
                tables.extend(row.iter().map(|v| v / total));
                break;
            }
        }
    }
    let ensemble = HypothesisEnsemble::new(hypotheses, features, classes, tables)?;
    let truth = rng.random_range(0..hypotheses);
    Ok((ensemble, truth))
}

/// Pool of feature ids with hidden labels. Each prototype appears
/// `repetitions + 1` times, shuffled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPool {
    pub points: Vec<usize>,
    pub true_labels: Vec<usize>,
    pub prototypes: usize,
    pub repetitions: usize,
}

impl SyntheticPool {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws a label from `p` with a uniform variate.
fn draw_label(rng: &mut Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (y, &v) in p.iter().enumerate() {
        cum += v;
        if u < cum {
            return y;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

/// `prototypes_per_feature` prototypes for every feature bucket, labels from
/// the ground truth, each replicated `repetitions` extra times.
pub fn make_pool(
    ensemble: &HypothesisEnsemble,
    truth: usize,
    prototypes_per_feature: usize,
    repetitions: usize,
    seed: u64,
) -> SyntheticPool {
    let mut rng = seed::rng(seed);
    let mut protos = Vec::with_capacity(ensemble.features * prototypes_per_feature);
    for f in 0..ensemble.features {
        for _ in 0..prototypes_per_feature {
            protos.push((f, draw_label(&mut rng, ensemble.table(truth, f))));
        }
    }
    let mut all: Vec<(usize, usize)> = protos
        .iter()
        .copied()
        .cycle()
        .take(protos.len() * (repetitions + 1))
        .collect();
    all.shuffle(&mut rng);
    SyntheticPool {
        points: all.iter().map(|p| p.0).collect(),
        true_labels: all.iter().map(|p| p.1).collect(),
        prototypes: protos.len(),
        repetitions,
    }
}

/// Held-out labelled points drawn from the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub features: Vec<usize>,
    pub labels: Vec<usize>,
}

pub fn make_test_set(
    ensemble: &HypothesisEnsemble,
    truth: usize,
    size: usize,
    seed: u64,
) -> TestSet {
    let mut rng = seed::rng(seed);
    let mut features = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for _ in 0..size {
        let f = rng.random_range(0..ensemble.features);
        features.push(f);
        labels.push(draw_label(&mut rng, ensemble.table(truth, f)));
    }
    TestSet { features, labels }
}

/// Accuracy of the predictive argmax classifier (lowest class on ties).
pub fn test_accuracy(ensemble: &HypothesisEnsemble, test: &TestSet) -> f64 {
    let predictions: Vec<usize> = (0..ensemble.features)
        .map(|f| argmax(&ensemble.predictive(f)))
        .collect();
    accuracy_of(&predictions, test)
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (y, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = y;
        }
    }
    best
}

fn accuracy_of(predictions: &[usize], test: &TestSet) -> f64 {
    if test.labels.is_empty() {
        return 0.0;
    }
    let correct = test
        .features
        .iter()
        .zip(&test.labels)
        .filter(|(&f, &y)| predictions[f] == y)
        .count();
    correct as f64 / test.labels.len() as f64
}

/// Draws `k` hypotheses from the posterior and tabulates their predictions
/// for every point. The same draws serve all points.
pub fn sample_posterior_tensor(
    ensemble: &HypothesisEnsemble,
    points: &[usize],
    k: usize,
    seed: u64,
) -> PosteriorTensor {
    let mut rng = seed::rng(seed);
    let weights = ensemble.weights();
    let draws: Vec<usize> = (0..k).map(|_| draw_label(&mut rng, &weights)).collect();
    let c = ensemble.classes;
    let mut probs = Vec::with_capacity(points.len() * k * c);
    for &f in points {
        for &h in &draws {
            probs.extend_from_slice(ensemble.table(h, f));
        }
    }
    PosteriorTensor::new(points.len(), k, c, probs).expect("shape matches")
}

/// `I[y; w | x_target, observed]` under the full weighted posterior, after
/// conditioning on `(pool index, label)` observations.
pub fn exact_conditional_mi(
    ensemble: &HypothesisEnsemble,
    pool: &SyntheticPool,
    target: usize,
    conditioning: &[(usize, usize)],
) -> Result<f64, SimError> {
    let feature_of = |i: usize| {
        pool.points
            .get(i)
            .copied()
            .ok_or(SimError::PoolIndexOutOfRange {
                index: i,
                len: pool.len(),
            })
    };
    let observations = conditioning
        .iter()
        .map(|&(i, y)| feature_of(i).map(|f| (f, y)))
        .collect::<Result<Vec<_>, _>>()?;
    let posterior = ensemble.posterior_update_many(&observations)?;
    Ok(exact_mi_at_feature(&posterior, feature_of(target)?))
}

/// `H[sum_h w_h p_h] - sum_h w_h H[p_h]` at feature `f`.
pub fn exact_mi_at_feature(ensemble: &HypothesisEnsemble, f: usize) -> f64 {
    let weights = ensemble.weights();
    let conditional: f64 = weights
        .iter()
        .enumerate()
        .map(|(h, w)| w * entropy(ensemble.table(h, f)))
        .sum();
    (entropy(&ensemble.predictive(f)) - conditional).max(0.0)
}

/// Synthetic world parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub hypotheses: usize,
    pub features: usize,
    pub classes: usize,
    pub prototypes_per_feature: usize,
    pub repetitions: usize,
    /// Symmetric Dirichlet concentration of the hypothesis tables.
    pub concentration: f64,
    pub test_size: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            hypotheses: 32,
            features: 16,
            classes: 4,
            prototypes_per_feature: 10,
            repetitions: 2,
            concentration: 0.3,
            test_size: 1000,
        }
    }
}

/// A concrete draw of a scenario: prior ensemble, truth, pool and test set.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub prior: HypothesisEnsemble,
    pub truth: usize,
    pub pool: SyntheticPool,
    pub test: TestSet,
}

impl Scenario {
    pub fn pool_size(&self) -> usize {
        self.features * self.prototypes_per_feature * (self.repetitions + 1)
    }

    /// Draws the world for one trial. The ensemble, truth and test set depend
    /// only on the seed, so worlds that differ only in `repetitions` share them.
    pub fn build(&self, seed: u64) -> Result<World, SimError> {
        let (prior, truth) = make_ensemble(
            self.hypotheses,
            self.features,
            self.classes,
            self.concentration,
            seed::derive(seed, stream::ENSEMBLE, 0),
        )?;
        let pool = make_pool(
            &prior,
            truth,
            self.prototypes_per_feature,
            self.repetitions,
            seed::derive(seed, stream::POOL, 0),
        );
        let test = make_test_set(
            &prior,
            truth,
            self.test_size,
            seed::derive(seed, stream::TEST_SET, 0),
        );
        Ok(World {
            prior,
            truth,
            pool,
            test,
        })
    }
}

impl World {
    /// Test accuracy of the ground-truth hypothesis itself.
    pub fn oracle_accuracy(&self) -> f64 {
        let predictions: Vec<usize> = (0..self.prior.features)
            .map(|f| argmax(self.prior.table(self.truth, f)))
            .collect();
        accuracy_of(&predictions, &self.test)
    }
}

/// Acquisition settings for one loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub strategy: Strategy,
    pub rounds: usize,
    pub b: usize,
    pub k: usize,
    pub m: usize,
    pub exact_limit: usize,
    pub seed: u64,
}

impl LoopConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            rounds: 10,
            b: 4,
            k: 64,
            m: estimators::DEFAULT_SAMPLES,
            exact_limit: estimators::DEFAULT_EXACT_LIMIT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub train_size: usize,
    pub test_accuracy: f64,
    /// Pool indices acquired this round.
    pub acquired: Vec<usize>,
    /// Entropy of all labels acquired so far.
    pub label_entropy: f64,
    /// Cumulative acquired labels per class.
    pub class_counts: Vec<usize>,
}

/// Per-round log of an active-learning loop; round 0 is the evaluation
/// before any acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlTrace {
    pub strategy: Strategy,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
}

impl AlTrace {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.test_accuracy)
    }

    /// Smallest training-set size whose accuracy reaches `threshold`.
    pub fn labels_to_accuracy(&self, threshold: f64) -> Option<usize> {
        self.rounds
            .iter()
            .find(|r| r.test_accuracy >= threshold)
            .map(|r| r.train_size)
    }
}

fn count_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let p: Vec<f64> = counts.iter().map(|&n| n as f64 / total as f64).collect();
    entropy(&p)
}

/// Runs one active-learning loop. Each round recomputes the posterior from
/// the prior and every label acquired so far, samples a fresh tensor over the
/// remaining pool, acquires a batch and reveals its labels.
pub fn run_al_loop(world: &World, cfg: &LoopConfig) -> Result<AlTrace, SimError> {
    let pool = &world.pool;
    if cfg.rounds.saturating_mul(cfg.b) > pool.len() {
        return Err(SimError::BudgetExceedsPool {
            rounds: cfg.rounds,
            b: cfg.b,
            pool: pool.len(),
        });
    }
    if cfg.k == 0 {
        return Err(SimError::NoSamples);
    }
    let classes = world.prior.classes;
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let mut observations: Vec<(usize, usize)> = Vec::new();
    let mut class_counts = vec![0; classes];
    let mut trace = AlTrace {
        strategy: cfg.strategy,
        seed: cfg.seed,
        rounds: vec![RoundRecord {
            round: 0,
            train_size: 0,
            test_accuracy: test_accuracy(&world.prior, &world.test),
            acquired: Vec::new(),
            label_entropy: 0.0,
            class_counts: class_counts.clone(),
        }],
    };
    for round in 1..=cfg.rounds {
        let posterior = world.prior.posterior_update_many(&observations)?;
        let features: Vec<usize> = remaining.iter().map(|&i| pool.points[i]).collect();
        let tensor = sample_posterior_tensor(
            &posterior,
            &features,
            cfg.k,
            seed::derive(cfg.seed, stream::ROUND_TENSOR, round as u64),
        );
        let req = AcquisitionRequest {
            strategy: cfg.strategy,
            b: cfg.b,
            m: cfg.m,
            exact_limit: cfg.exact_limit,
            seed: seed::derive(cfg.seed, stream::ROUND_ACQUIRE, round as u64),
        };
        let result = acquire(&tensor, &req)?;
        let acquired: Vec<usize> = result.indices.iter().map(|&r| remaining[r]).collect();
        for &i in &acquired {
            observations.push((pool.points[i], pool.true_labels[i]));
            class_counts[pool.true_labels[i]] += 1;
        }
        remaining.retain(|i| !acquired.contains(i));
        let posterior = world.prior.posterior_update_many(&observations)?;
        trace.rounds.push(RoundRecord {
            round,
            train_size: observations.len(),
            test_accuracy: test_accuracy(&posterior, &world.test),
            acquired,
            label_entropy: count_entropy(&class_counts),
            class_counts: class_counts.clone(),
        });
    }
    Ok(trace)
}

/// Acquired-label entropy per round and the final class histogram, sorted by
/// descending count (lowest class first on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDiversity {
    pub entropy: Vec<f64>,
    /// `(class, count)` pairs.
    pub histogram: Vec<(usize, usize)>,
}

pub fn label_diversity(trace: &AlTrace) -> Result<LabelDiversity, SimError> {
    let last = trace.rounds.last().ok_or(SimError::EmptyTrace)?;
    let mut histogram: Vec<(usize, usize)> = last.class_counts.iter().copied().enumerate().collect();
    histogram.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(LabelDiversity {
        entropy: trace
            .rounds
            .iter()
            .map(|r| count_entropy(&r.class_counts))
            .collect(),
        histogram,
    })
}

/// Traces of several strategies over independent trials of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub scenario: Scenario,
    pub seed: u64,
    /// One entry per strategy, each holding one trace per trial.
    pub traces: Vec<(Strategy, Vec<AlTrace>)>,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl SimulationRun {
    pub fn traces_for(&self, strategy: Strategy) -> Option<&[AlTrace]> {
        self.traces
            .iter()
            .find(|(s, _)| *s == strategy)
            .map(|(_, t)| t.as_slice())
    }

    pub fn median_final_accuracy(&self, strategy: Strategy) -> Option<f64> {
        let traces = self.traces_for(strategy)?;
        let mut acc: Vec<f64> = traces.iter().filter_map(AlTrace::final_accuracy).collect();
        Some(median(&mut acc))
    }

    /// Median over trials of the acquired-label entropy at each round.
    pub fn median_label_entropy(&self, strategy: Strategy) -> Option<Vec<f64>> {
        let traces = self.traces_for(strategy)?;
        let rounds = traces.iter().map(|t| t.rounds.len()).min()?;
        Some(
            (0..rounds)
                .map(|r| {
                    let mut v: Vec<f64> = traces.iter().map(|t| t.rounds[r].label_entropy).collect();
                    median(&mut v)
                })
                .collect(),
        )
    }
}

/// Runs every strategy on `trials` worlds. Trial `t` uses the world and loop
/// seed derived from `(seed, t)`, shared across strategies.
pub fn run_trials(
    scenario: &Scenario,
    template: &LoopConfig,
    strategies: &[Strategy],
    trials: usize,
    seed: u64,
) -> Result<SimulationRun, SimError> {
    if template.rounds.saturating_mul(template.b) > scenario.pool_size() {
        return Err(SimError::BudgetExceedsPool {
            rounds: template.rounds,
            b: template.b,
            pool: scenario.pool_size(),
        });
    }
    let jobs: Vec<(usize, usize)> = (0..strategies.len())
        .flat_map(|s| (0..trials).map(move |t| (s, t)))
        .collect();
    let results = parallel::map_items(&jobs, |&(s, t)| {
        let trial_seed = seed::derive(seed, stream::TRIAL, t as u64);
        let world = scenario.build(trial_seed)?;
        let cfg = LoopConfig {
            strategy: strategies[s],
            seed: trial_seed,
            ..*template
        };
        run_al_loop(&world, &cfg)
    });
    let mut traces: Vec<(Strategy, Vec<AlTrace>)> =
        strategies.iter().map(|&s| (s, Vec::with_capacity(trials))).collect();
    for (&(s, _), trace) in jobs.iter().zip(results) {
        traces[s].1.push(trace?);
    }
    Ok(SimulationRun {
        scenario: *scenario,
        seed,
        traces,
    })
}
