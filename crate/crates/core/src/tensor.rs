//! Posterior-prediction tensors and their validation.
//!
//! A [`PosteriorTensor`] holds `p(y | x_i, w_j)` for every pool point `i`,
//! parameter sample `w_j` and class `y`. It is stored row-major as
//! `(point, sample, class)` so that the estimator hot loops walk classes
//! innermost. The same `k` parameter samples are assumed to be shared by all
//! pool points; this cannot be checked from the data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the per-row sum of probabilities.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TensorError {
    #[error("dimensions {n_pool}x{k}x{c} overflow the addressable size")]
    DimensionOverflow { n_pool: usize, k: usize, c: usize },
    #[error("payload has {actual} values but dimensions {n_pool}x{k}x{c} require {expected}")]
    ShapeMismatch {
        n_pool: usize,
        k: usize,
        c: usize,
        expected: usize,
        actual: usize,
    },
}

/// Predictive probabilities for every (pool point, parameter sample, class).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTensor {
    n_pool: usize,
    k: usize,
    c: usize,
    probs: Vec<f64>,
}

impl PosteriorTensor {
    /// Wraps a row-major payload. Only the shape is checked here; use
    /// [`validate_tensor`] for the probabilistic invariants.
    pub fn new(n_pool: usize, k: usize, c: usize, probs: Vec<f64>) -> Result<Self, TensorError> {
        let expected = n_pool
            .checked_mul(k)
            .and_then(|v| v.checked_mul(c))
            .ok_or(TensorError::DimensionOverflow { n_pool, k, c })?;
        if probs.len() != expected {
            return Err(TensorError::ShapeMismatch {
                n_pool,
                k,
                c,
                expected,
                actual: probs.len(),
            });
        }
        Ok(Self { n_pool, k, c, probs })
    }

    /// Builds a tensor by evaluating `f(point, sample, class)`.
    pub fn from_fn(
        n_pool: usize,
        k: usize,
        c: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, TensorError> {
        let mut probs = Vec::with_capacity(n_pool.saturating_mul(k).saturating_mul(c));
        for i in 0..n_pool {
            for j in 0..k {
                for y in 0..c {
                    probs.push(f(i, j, y));
                }
            }
        }
        Self::new(n_pool, k, c, probs)
    }

    /// Stacks per-point `k x c` matrices.
    pub fn from_points(points: &[Vec<Vec<f64>>]) -> Result<Self, TensorError> {
        let n_pool = points.len();
        let k = points.first().map_or(0, Vec::len);
        let c = points.first().and_then(|p| p.first()).map_or(0, Vec::len);
        let probs: Vec<f64> = points.iter().flatten().flatten().copied().collect();
        Self::new(n_pool, k, c, probs)
    }

    pub fn n_pool(&self) -> usize {
        self.n_pool
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// The `k x c` block of point `i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let stride = self.k * self.c;
        &self.probs[i * stride..(i + 1) * stride]
    }

    /// The class distribution of point `i` under sample `j`.
    #[inline]
    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.k + j) * self.c;
        &self.probs[start..start + self.c]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, y: usize) -> f64 {
        self.probs[(i * self.k + j) * self.c + y]
    }

    /// Restricts the tensor to the given points, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut probs = Vec::with_capacity(indices.len() * self.k * self.c);
        for &i in indices {
            probs.extend_from_slice(self.point(i));
        }
        Self {
            n_pool: indices.len(),
            k: self.k,
            c: self.c,
            probs,
        }
    }
}

/// Which tensor invariant a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    /// `n_pool >= 1`, `k >= 1`, `c >= 2`.
    Dimensions,
    /// Every entry lies in `[0, 1]`.
    Range,
    /// Every `(point, sample)` row sums to one.
    Normalization,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::Dimensions => "dimensions",
            Invariant::Range => "range",
            Invariant::Normalization => "normalization",
        }
    }
}

/// Location of the first violation of an invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offense {
    pub point: usize,
    pub sample: usize,
    pub class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub invariant: Invariant,
    pub passed: bool,
    pub first_offense: Option<Offense>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<InvariantCheck>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, invariant: Invariant) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.invariant == invariant)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for check in &self.checks {
            let status = if check.passed { "ok" } else { "FAILED" };
            write!(f, "{}: {status}", check.invariant.name())?;
            if !check.detail.is_empty() {
                write!(f, " ({})", check.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Checks every tensor invariant and reports the first offending location of
/// each. Never panics, whatever the payload holds.
pub fn validate_tensor(t: &PosteriorTensor) -> ValidationReport {
    let dims_ok = t.n_pool >= 1 && t.k >= 1 && t.c >= 2;
    let dims = InvariantCheck {
        invariant: Invariant::Dimensions,
        passed: dims_ok,
        first_offense: None,
        detail: if dims_ok {
            String::new()
        } else {
            format!(
                "need n_pool >= 1, k >= 1, c >= 2; got {}x{}x{}",
                t.n_pool, t.k, t.c
            )
        },
    };

    let mut range_offense = None;
    let mut norm_offense = None;
    let mut range_detail = String::new();
    let mut norm_detail = String::new();
    if t.c > 0 {
        for (row_idx, row) in t.probs.chunks_exact(t.c).enumerate() {
            let point = row_idx / t.k.max(1);
            let sample = row_idx % t.k.max(1);
            if range_offense.is_none() {
                if let Some((y, v)) = row
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(0.0..=1.0).contains(*v))
                {
                    range_offense = Some(Offense {
                        point,
                        sample,
                        class: Some(y),
                    });
                    range_detail = format!("entry ({point}, {sample}, {y}) = {v}");
                }
            }
            if norm_offense.is_none() {
                let sum: f64 = row.iter().sum();
                // False for a NaN sum, which is then reported.
                let normalized = (sum - 1.0).abs() <= NORMALIZATION_TOLERANCE;
                if !normalized {
                    norm_offense = Some(Offense {
                        point,
                        sample,
                        class: None,
                    });
                    norm_detail = format!("row ({point}, {sample}) sums to {sum}");
                }
            }
            if range_offense.is_some() && norm_offense.is_some() {
                break;
            }
        }
    }

    ValidationReport {
        checks: vec![
            dims,
            InvariantCheck {
                invariant: Invariant::Range,
                passed: range_offense.is_none(),
                first_offense: range_offense,
                detail: range_detail,
            },
            InvariantCheck {
                invariant: Invariant::Normalization,
                passed: norm_offense.is_none(),
                first_offense: norm_offense,
                detail: norm_detail,
            },
        ],
    }
}

/// Per-point scores in nats (or the baseline's native unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the highest score, lowest index on ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            match best {
                Some((_, b)) if s <= b => {}
                _ => best = Some((i, s)),
            }
        }
        best.map(|(i, _)| i)
    }

    /// Indices of the `b` highest scores, descending, lowest index on ties.
    pub fn top(&self, b: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[b]
                .partial_cmp(&self.scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order.truncate(b);
        order
    }
}

impl std::ops::Index<usize> for ScoreVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.scores[i]
    }
}
