//! Browser bindings. Every entry point takes plain numbers and returns a JSON
//! string; errors come back as `{"error": "..."}`.

use batchbald::acquisition::{acquire, AcquisitionRequest, Strategy};
use batchbald::estimators::{
    exact_state, joint_entropy_exact, joint_entropy_sampled, sample_configurations,
};
use batchbald::seed::{self, stream};
use batchbald::sim::{run_trials, sample_posterior_tensor, LoopConfig, Scenario};
use batchbald::verify::random_tensor;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Scores one round on a repeated pool and returns what BALD and BatchBALD
/// pick. Each pick is reported with its feature bucket so duplicates show up.
#[wasm_bindgen]
pub fn repeated_pool_picks(repetitions: u32, b: u32, seed: u32) -> String {
    respond(picks(repetitions as usize, b as usize, seed as u64))
}

fn picks(repetitions: usize, b: usize, seed: u64) -> Result<Value, String> {
    let scenario = Scenario {
        hypotheses: 16,
        features: 6,
        prototypes_per_feature: 2,
        repetitions,
        test_size: 100,
        ..Scenario::default()
    };
    let world = scenario.build(seed).map_err(|e| e.to_string())?;
    let t = sample_posterior_tensor(&world.prior, &world.pool.points, 64, seed);
    let mut out = serde_json::Map::new();
    for strategy in [Strategy::Bald, Strategy::BatchBald] {
        let r = acquire(&t, &AcquisitionRequest::new(strategy, b).with_seed(seed))
            .map_err(|e| e.to_string())?;
        let features: Vec<usize> = r.indices.iter().map(|&i| world.pool.points[i]).collect();
        out.insert(
            strategy.name().into(),
            json!({ "indices": r.indices, "features": features, "scores": r.scores }),
        );
    }
    let bald = batchbald::bald_scores(&t);
    out.insert("pool_features".into(), json!(world.pool.points));
    out.insert("bald_scores".into(), json!(bald.scores));
    Ok(Value::Object(out))
}

/// Sampled joint entropy against the exact value for growing sample counts,
/// on a random instance of `n` points with `c` classes.
#[wasm_bindgen]
pub fn estimator_convergence(n: u32, c: u32, k: u32, seeds: u32, seed: u32) -> String {
    respond(convergence(n as usize, c as usize, k as usize, seeds as usize, seed as u64))
}

fn convergence(n: usize, c: usize, k: usize, seeds: usize, seed: u64) -> Result<Value, String> {
    if n < 2 || c < 2 || k == 0 || seeds == 0 {
        return Err("need n >= 2, c >= 2, k >= 1 and at least one seed".into());
    }
    if (c as f64).powi(n as i32) > 1e6 {
        return Err("c^n too large to enumerate".into());
    }
    let mut rng = seed::rng(seed);
    let t = random_tensor(&mut rng, n, k, c, 0.5);
    let subset: Vec<usize> = (0..n).collect();
    let exact = joint_entropy_exact(&exact_state(&t, &subset, usize::MAX).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let sizes = [10usize, 30, 100, 300, 1000, 3000, 10_000];
    let mut rows = Vec::new();
    for (mi, &m) in sizes.iter().enumerate() {
        let estimates: Vec<f64> = (0..seeds)
            .map(|s| {
                let mut rng = seed::derived_rng(seed, stream::STEP, (mi * seeds + s) as u64);
                let ctx = sample_configurations(&t, &subset[..n - 1], m, &mut rng)
                    .expect("indices in range");
                joint_entropy_sampled(&ctx, &t, n - 1).expect("sampled context")
            })
            .collect();
        rows.push(json!({ "m": m, "estimates": estimates }));
    }
    Ok(json!({ "exact": exact, "runs": rows }))
}

/// Mean test accuracy per round for BatchBALD, BALD and random acquisition
/// on the repeated-pool scenario.
#[wasm_bindgen]
pub fn learning_curves(trials: u32, repetitions: u32, rounds: u32, seed: u32) -> String {
    respond(curves(trials as usize, repetitions as usize, rounds as usize, seed as u64))
}

fn curves(trials: usize, repetitions: usize, rounds: usize, seed: u64) -> Result<Value, String> {
    if trials == 0 {
        return Err("need at least one trial".into());
    }
    let scenario = Scenario {
        repetitions,
        ..Scenario::default()
    };
    let template = LoopConfig {
        rounds,
        ..LoopConfig::new(Strategy::Random)
    };
    let strategies = [Strategy::BatchBald, Strategy::Bald, Strategy::Random];
    let run = run_trials(&scenario, &template, &strategies, trials, seed).map_err(|e| e.to_string())?;
    let mut out = serde_json::Map::new();
    for (strategy, traces) in &run.traces {
        let n = traces.len() as f64;
        let labels: Vec<usize> = traces[0].rounds.iter().map(|r| r.train_size).collect();
        let accuracy: Vec<f64> = (0..labels.len())
            .map(|r| traces.iter().map(|t| t.rounds[r].test_accuracy).sum::<f64>() / n)
            .collect();
        out.insert(
            strategy.name().into(),
            json!({
                "labels": labels,
                "accuracy": accuracy,
                "label_entropy": run.median_label_entropy(*strategy),
            }),
        );
    }
    Ok(Value::Object(out))
}
