use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;
use spikecoder::encoding::encode_batch;
use spikecoder::network::Trainer;
use spikecoder::rng::{stream, Stream};
use spikecoder::{
    BitMatrix, EligibilityTrace, LifLayer, LifLayerState, Matrix, NeuronConfig, SpikingNetwork,
    TrainConfig,
};

const BATCH: usize = 100;
const PIXELS: usize = 784;
const HIDDEN: usize = 196;

fn images(n: usize) -> Vec<Vec<f32>> {
    let mut rng = stream(1, Stream::Synthetic);
    (0..n)
        .map(|_| {
            (0..PIXELS)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        rng.gen::<f32>()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn frame(rows: usize, cols: usize, p: f64, seed: u64) -> BitMatrix {
    let mut rng = stream(seed, Stream::Synthetic);
    BitMatrix::from_fn(rows, cols, |_, _| rng.gen_bool(p))
}

fn bench_encoding(c: &mut Criterion) {
    let imgs = images(BATCH);
    c.bench_function("poisson_encode_batch100_t15", |b| {
        let mut rng = stream(2, Stream::Encoding);
        b.iter(|| encode_batch(black_box(&imgs), 15, 1.0, &mut rng).unwrap())
    });
}

fn bench_lif(c: &mut Criterion) {
    let neuron = NeuronConfig::new(0.1, 1.0).unwrap();
    let layer = LifLayer::random(PIXELS, HIDDEN, neuron, &mut stream(3, Stream::Init)).unwrap();
    let input = frame(BATCH, PIXELS, 0.1, 4);
    c.bench_function("lif_step_784x196_batch100", |b| {
        let mut state = LifLayerState::new(BATCH, HIDDEN);
        b.iter(|| layer.forward_step(&mut state, black_box(&input)).unwrap())
    });
}

fn bench_trace(c: &mut Criterion) {
    let input = frame(BATCH, PIXELS, 0.1, 5);
    let spiked = frame(BATCH, HIDDEN, 0.05, 6);
    let mut rng = stream(7, Stream::Synthetic);
    let delta = Matrix::from_fn(BATCH, HIDDEN, |_, _| rng.gen_range(-1.0..1.0));
    c.bench_function("trace_step_gradient_784x196_batch100_t15", |b| {
        b.iter_batched_ref(
            || {
                (
                    EligibilityTrace::zeros(BATCH, HIDDEN, PIXELS),
                    Matrix::zeros(HIDDEN, PIXELS),
                )
            },
            |(trace, grad)| {
                for _ in 0..15 {
                    trace
                        .step_gradient(0.1, &input, &delta, &spiked, grad)
                        .unwrap();
                }
            },
            BatchSize::LargeInput,
        )
    });

    // Audiocoder hidden layer: 3900 spectrogram inputs, 512 neurons, batch 50.
    let (batch, n_out, n_in) = (50, 512, 3900);
    let input = frame(batch, n_in, 0.2, 8);
    let spiked = frame(batch, n_out, 0.05, 9);
    let delta = Matrix::from_fn(batch, n_out, |_, _| rng.gen_range(-1.0..1.0));
    let mut group = c.benchmark_group("trace");
    group.sample_size(10);
    group.bench_function("step_gradient_3900x512_batch50_t10", |b| {
        b.iter_batched_ref(
            || {
                (
                    EligibilityTrace::zeros(batch, n_out, n_in),
                    Matrix::zeros(n_out, n_in),
                )
            },
            |(trace, grad)| {
                for _ in 0..10 {
                    trace
                        .step_gradient(0.1, &input, &delta, &spiked, grad)
                        .unwrap();
                }
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn bench_train_batch(c: &mut Criterion) {
    let cfg = TrainConfig::autoencoder();
    let neuron = cfg.neuron().unwrap();
    let net = SpikingNetwork::random(
        &[PIXELS, HIDDEN, PIXELS],
        neuron,
        &mut stream(8, Stream::Init),
    )
    .unwrap();
    let frames = encode_batch(
        &images(BATCH),
        cfg.steps,
        cfg.max_rate,
        &mut stream(9, Stream::Encoding),
    )
    .unwrap();
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("autoencoder_batch100_t15", |b| {
        let mut trainer = Trainer::new(&net, BATCH, cfg.hyperparams().unwrap(), true).unwrap();
        b.iter_batched_ref(
            || net.clone(),
            |n| {
                trainer
                    .train_batch(n, &frames, |t| &frames[t], 0, 0)
                    .unwrap()
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_encoding,
    bench_lif,
    bench_trace,
    bench_train_batch
);
criterion_main!(benches);
