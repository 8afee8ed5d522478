use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use unobstruct::agents::{run_agent, Agent, AgentOptions, NoiseSpec};
use unobstruct::gen::{generate_scenes, GenConfig};
use unobstruct::manifest::{Manifest, PredictionRecord};
use unobstruct::metrics::evaluate_dataset;
use unobstruct::rewards::{reward_batch, RewardConfig};
use unobstruct::trace::DEFAULT_RESOLVE_RADIUS;
use unobstruct::vqa::{synth_scene, Cues, VqaRecord};
use unobstruct::{Execution, Setting};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn dataset(scenes: u64) -> Manifest {
    let cfg = GenConfig::default();
    let scenes: Vec<_> = generate_scenes(&cfg, scenes, Execution::Parallel)
        .expect("scenes")
        .into_iter()
        .map(Arc::new)
        .collect();
    let mut records = Vec::new();
    for s in &scenes {
        let samples = synth_scene(
            s,
            &[Setting::OracleSom, Setting::Nlp],
            &cfg.geometry,
            &Cues::default(),
            64,
        )
        .expect("samples");
        records.extend(samples.into_iter().map(|x| VqaRecord::new(x, None)));
    }
    Manifest::from_vqa_in_memory(records, &scenes).expect("manifest")
}

fn noisy(manifest: &Manifest) -> Vec<PredictionRecord> {
    let noise = NoiseSpec {
        seed: 1,
        p_drop_path: 0.3,
        p_drop_answer: 0.3,
        p_swap: 0.3,
        p_break_format: 0.1,
    };
    run_agent(
        manifest,
        &Agent::Corrupted(noise),
        &AgentOptions::default(),
        Execution::Parallel,
    )
    .expect("preds")
}

fn generation(c: &mut Criterion) {
    let mut g = c.benchmark_group("generate_200_scenes");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_scenes(black_box(&GenConfig::default()), 200, exec).expect("scenes"))
        });
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let manifest = dataset(200);
    let preds = noisy(&manifest);
    let mut g = c.benchmark_group("evaluate_dataset");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                evaluate_dataset(black_box(&preds), &manifest, DEFAULT_RESOLVE_RADIUS, exec).expect("eval")
            })
        });
    }
    g.finish();

    let mut g = c.benchmark_group("reward_batch");
    g.sample_size(20);
    let cfg = RewardConfig::default();
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                reward_batch(black_box(&preds), &manifest, &cfg, DEFAULT_RESOLVE_RADIUS, exec)
                    .expect("rewards")
            })
        });
    }
    g.finish();
}

fn noise_sweep(c: &mut Criterion) {
    let manifest = dataset(50);
    let opts = AgentOptions::default();
    let mut g = c.benchmark_group("noise_sweep_20_seeds");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                for seed in 0..20 {
                    let agent = Agent::Corrupted(NoiseSpec {
                        seed,
                        p_swap: 0.5,
                        ..NoiseSpec::default()
                    });
                    let preds = run_agent(&manifest, &agent, &opts, exec).expect("preds");
                    black_box(
                        evaluate_dataset(&preds, &manifest, DEFAULT_RESOLVE_RADIUS, exec).expect("eval"),
                    );
                }
            })
        });
    }
    g.finish();
}

criterion_group!(benches, generation, evaluation, noise_sweep);
criterion_main!(benches);
