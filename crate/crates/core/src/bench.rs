//! Wall-clock scaling sweeps over pool size.

use serde::{Deserialize, Serialize};

use crate::acquisition::{acquire, AcquisitionError, AcquisitionRequest, Strategy};
use crate::estimators::EstimatorMode;
use crate::seed::{self, stream};
use crate::verify::random_tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub strategy: Strategy,
    pub b: usize,
    pub c: usize,
    pub k: usize,
    pub m: usize,
    pub exact_limit: usize,
    /// Timed runs per size; the minimum is reported.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![2000, 4000, 8000],
            strategy: Strategy::BatchBald,
            b: 4,
            c: 4,
            k: 32,
            m: 1000,
            exact_limit: crate::estimators::DEFAULT_EXACT_LIMIT,
            repeats: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_pool: usize,
    pub b: usize,
    pub c: usize,
    pub k: usize,
    pub m: usize,
    /// `exact`, `sampled` or `mixed` across the steps.
    pub mode: String,
    pub ms: f64,
}

pub const BENCH_CSV_HEADER: &str = "n_pool,b,c,k,m,mode,ms";

fn mode_label(modes: &[EstimatorMode]) -> &'static str {
    let exact = modes.iter().all(|&m| m == EstimatorMode::Exact);
    let sampled = modes.iter().all(|&m| m == EstimatorMode::Sampled);
    match (exact, sampled) {
        (true, _) => "exact",
        (_, true) => "sampled",
        _ => "mixed",
    }
}

/// Times one acquisition per size on a random tensor of that size.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>, AcquisitionError> {
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for (si, &n_pool) in cfg.sizes.iter().enumerate() {
        let mut rng = seed::derived_rng(cfg.seed, stream::INSTANCE, si as u64);
        let t = random_tensor(&mut rng, n_pool, cfg.k, cfg.c, 1.0);
        let req = AcquisitionRequest {
            strategy: cfg.strategy,
            b: cfg.b,
            m: cfg.m,
            exact_limit: cfg.exact_limit,
            seed: cfg.seed,
        };
        let mut best = f64::INFINITY;
        let mut mode = "exact";
        for _ in 0..cfg.repeats.max(1) {
            let start = std::time::Instant::now();
            let r = acquire(&t, &req)?;
            best = best.min(start.elapsed().as_secs_f64() * 1e3);
            mode = mode_label(&r.modes);
        }
        rows.push(BenchRow {
            n_pool,
            b: cfg.b,
            c: cfg.c,
            k: cfg.k,
            m: cfg.m,
            mode: mode.to_owned(),
            ms: best,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.3}\n",
            r.n_pool, r.b, r.c, r.k, r.m, r.mode, r.ms
        ));
    }
    out
}
