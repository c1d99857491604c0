use std::hint::black_box;

use avfuse_core::model::{Model, ModelConfig, ModelInput};
use avfuse_core::parallel::Execution;
use avfuse_core::tensor::Tensor;
use avfuse_core::training::{evaluate, Sample, TrainConfig, Trainer};
use avfuse_core::transformer::EncoderConfig;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config() -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            layers: 2,
            dim: 32,
            heads: 4,
            ..EncoderConfig::default()
        },
        ..ModelConfig::default()
    }
}

fn samples(cfg: &ModelConfig, n: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut noise = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0));
    let (s, f, c) = (cfg.image_size, cfg.frame_size, cfg.channels);
    (0..n)
        .map(|i| Sample {
            id: format!("bench_{i}"),
            label: i % cfg.num_classes,
            input: ModelInput {
                audio: vec![noise(&[s, s, 3])],
                video: noise(&[cfg.video_frames, f, f, c]),
            },
        })
        .collect()
}

fn epoch(c: &mut Criterion) {
    let cfg = config();
    let data = samples(&cfg, 32);
    let mut group = c.benchmark_group("train_epoch_32_samples");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let tc = TrainConfig {
            execution: exec,
            ..TrainConfig::default()
        };
        let trainer = Trainer::new(cfg.clone(), tc).unwrap();
        let fresh = trainer.init_state().unwrap();
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| {
                let mut state = fresh.clone();
                black_box(trainer.run_epoch(&mut state, &data, &[]).unwrap())
            })
        });
    }
    group.finish();
}

fn inference(c: &mut Criterion) {
    let cfg = config();
    let data = samples(&cfg, 64);
    let model = Model::new(cfg).unwrap();
    let params = model.init(0).unwrap();
    let mut group = c.benchmark_group("evaluate_64_samples");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| black_box(evaluate(&model, &params, &data, exec).unwrap().accuracy))
        });
    }
    group.finish();
}

criterion_group!(benches, epoch, inference);
criterion_main!(benches);
