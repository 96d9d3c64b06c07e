use proptest::prelude::*;
use rand::Rng;
use spikecoder::backprop::masked_loss;
use spikecoder::data::{
    decode_checkpoint, decode_idx, decode_spc1, encode_checkpoint, encode_idx, encode_spc1,
    synth_spectrograms, ImageSet, RawSpectrograms,
};
use spikecoder::encoding::encode_poisson;
use spikecoder::lif::{lif_forward_step, surrogate_derivative};
use spikecoder::metrics::{normalized_mse_values, zscore};
use spikecoder::network::extract_hidden_state;
use spikecoder::rng::{stream, Stream};
use spikecoder::{
    BitMatrix, LifLayer, LifLayerState, Matrix, NeuronConfig, SpikingNetwork, TrainConfig,
};

fn bits(rows: usize, cols: usize, seed: u64, p: f64) -> BitMatrix {
    let mut rng = stream(seed, Stream::Synthetic);
    BitMatrix::from_fn(rows, cols, |_, _| rng.gen_bool(p))
}

fn layer(n_in: usize, n_out: usize, alpha: f32, seed: u64) -> LifLayer {
    let neuron = NeuronConfig::new(alpha, 1.0).unwrap();
    let mut rng = stream(seed, Stream::Init);
    let w = Matrix::from_fn(n_out, n_in, |_, _| rng.gen_range(-0.3..0.8));
    LifLayer::new(w, neuron).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idx_round_trip(n in 1usize..6, h in 1usize..9, w in 1usize..9, seed: u64) {
        let mut rng = stream(seed, Stream::Synthetic);
        let pixels: Vec<u8> = (0..n * h * w).map(|_| rng.gen()).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..10)).collect();
        let set = ImageSet::from_parts(n, h, w, pixels, labels).unwrap();
        let (img, lab) = encode_idx(&set);
        prop_assert_eq!(decode_idx(&img, &lab).unwrap(), set);
    }

    #[test]
    fn spc1_round_trip(n in 0usize..5, ch in 1usize..7, fr in 1usize..7, seed: u64) {
        let mut rng = stream(seed, Stream::Synthetic);
        let values: Vec<f32> = (0..n * ch * fr).map(|_| rng.gen_range(-80.0..20.0)).collect();
        let raw = RawSpectrograms { n, n_channels: ch, n_frames: fr, global_min: -80.0, global_max: 20.0, values };
        prop_assert_eq!(decode_spc1(&encode_spc1(&raw)).unwrap(), raw);
    }

    #[test]
    fn checkpoint_round_trip(
        sizes in proptest::collection::vec(1usize..12, 2..5),
        alpha in 0.0f32..0.99,
        steps in 1usize..80,
        seed: u64,
        use_mask: bool,
    ) {
        let neuron = NeuronConfig::new(alpha, 1.0).unwrap();
        let net = SpikingNetwork::random(&sizes, neuron, &mut stream(seed, Stream::Init)).unwrap();
        let cfg = TrainConfig { alpha, steps, hidden_steps: steps, seed, use_mask, ..TrainConfig::autoencoder() };
        let (back, back_cfg) = decode_checkpoint(&encode_checkpoint(&net, &cfg)).unwrap();
        prop_assert_eq!(back, net);
        prop_assert_eq!(back_cfg, cfg);
    }

    #[test]
    fn spiking_neurons_reset_and_others_keep_potential(
        batch in 1usize..5, n_in in 1usize..20, n_out in 1usize..20, alpha in 0.0f32..0.9, seed: u64,
    ) {
        let l = layer(n_in, n_out, alpha, seed);
        let mut state = LifLayerState::new(batch, n_out);
        for t in 0..6 {
            let input = bits(batch, n_in, seed.wrapping_add(t), 0.4);
            let step = lif_forward_step(&l, &mut state, &input).unwrap();
            for b in 0..batch {
                for m in 0..n_out {
                    let v = step.v_pre.get(b, m);
                    prop_assert_eq!(step.spikes.get(b, m), v >= 1.0);
                    let expect = if v >= 1.0 { 0.0 } else { v };
                    prop_assert_eq!(state.v_mem.get(b, m), expect);
                }
            }
        }
    }

    #[test]
    fn silent_input_only_leaks(alpha in 0.0f32..0.9, seed: u64) {
        let l = layer(8, 6, alpha, seed);
        let mut state = LifLayerState::new(2, 6);
        lif_forward_step(&l, &mut state, &bits(2, 8, seed, 0.5)).unwrap();
        let silent = BitMatrix::zeros(2, 8);
        for _ in 0..10 {
            let before = state.v_mem.clone();
            let step = lif_forward_step(&l, &mut state, &silent).unwrap();
            for (i, (&a, &b)) in before.as_slice().iter().zip(step.v_pre.as_slice()).enumerate() {
                prop_assert!(b.abs() <= a.abs(), "entry {} grew from {} to {}", i, a, b);
                prop_assert!((b - (1.0 - alpha) * a).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn mask_zeroes_agreeing_positions(rows in 1usize..4, cols in 1usize..30, seed: u64) {
        let target = bits(rows, cols, seed, 0.5);
        let output = bits(rows, cols, seed ^ 1, 0.5);
        let mut rng = stream(seed, Stream::Encoding);
        let v = Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0));
        let loss = masked_loss(&target, &output, &v, 1.0).unwrap();
        let mut sq = 0.0f64;
        for r in 0..rows {
            for c in 0..cols {
                let e = loss.error.get(r, c);
                if target.get(r, c) == output.get(r, c) {
                    prop_assert_eq!(e, 0.0);
                } else {
                    let want = if target.get(r, c) { 1.0 } else { 0.0 } - v.get(r, c);
                    prop_assert!((e - want).abs() < 1e-6);
                }
                sq += (e as f64).powi(2);
            }
        }
        prop_assert!((loss.loss - 0.5 * sq / rows as f64).abs() < 1e-6 * (1.0 + loss.loss));
    }

    #[test]
    fn normalized_mse_ignores_affine_rescaling(
        a in proptest::collection::vec(0.0f32..1.0, 4..40), scale in 0.1f32..50.0, shift in -5.0f32..5.0, seed: u64,
    ) {
        let mut rng = stream(seed, Stream::Synthetic);
        let b: Vec<f32> = a.iter().map(|_| rng.gen_range(0.0..15.0)).collect();
        let moved: Vec<f32> = a.iter().map(|&x| x * scale + shift).collect();
        let base = normalized_mse_values(&a, &b).unwrap();
        prop_assert!((normalized_mse_values(&moved, &b).unwrap() - base).abs() < 1e-4 * (1.0 + base));
        let z = zscore(&moved);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        prop_assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn surrogate_is_symmetric_and_bounded(d in 0.0f32..20.0, v_th in 0.1f32..3.0) {
        let up = surrogate_derivative(v_th + d, v_th);
        let down = surrogate_derivative(v_th - d, v_th);
        prop_assert!((up - down).abs() <= 1e-7);
        prop_assert!((0.0..=0.25).contains(&up));
        prop_assert!(up <= surrogate_derivative(v_th, v_th));
    }

    #[test]
    fn hidden_state_is_a_prefix_of_the_full_run(th in 1usize..15, seed: u64) {
        let enc = layer(12, 9, 0.1, seed);
        let mut rng = stream(seed, Stream::Synthetic);
        let img: Vec<f32> = (0..12).map(|_| rng.gen()).collect();
        let full = extract_hidden_state(&enc, &img, 15, 15, 1.0, &mut stream(seed, Stream::Hidden)).unwrap();
        let short = extract_hidden_state(&enc, &img, 15, th, 1.0, &mut stream(seed, Stream::Hidden)).unwrap();
        prop_assert_eq!(short.raster, full.raster.prefix(th).unwrap());
    }

    #[test]
    fn poisson_encoding_is_seeded_and_respects_extremes(
        values in proptest::collection::vec(0.0f32..=1.0, 1..50), steps in 1usize..30, seed: u64,
    ) {
        let a = encode_poisson(&values, steps, 1.0, &mut stream(seed, Stream::Encoding)).unwrap();
        let b = encode_poisson(&values, steps, 1.0, &mut stream(seed, Stream::Encoding)).unwrap();
        prop_assert_eq!(&a, &b);
        let mut edges = values.clone();
        edges[0] = 0.0;
        let e = encode_poisson(&edges, steps, 1.0, &mut stream(seed, Stream::Encoding)).unwrap();
        prop_assert_eq!(e.counts()[0], 0);
        edges[0] = 1.0;
        let e = encode_poisson(&edges, steps, 1.0, &mut stream(seed, Stream::Encoding)).unwrap();
        prop_assert_eq!(e.counts()[0] as usize, steps);
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[test]
fn synthetic_samples_resemble_their_own_class() {
    let set = synth_spectrograms(10, 6, 20, 30, &mut stream(11, Stream::Synthetic));
    let (mut same, mut ns, mut diff, mut nd) = (0.0, 0, 0.0, 0);
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let c = cosine(set.sample(i), set.sample(j));
            if set.labels[i] == set.labels[j] {
                same += c;
                ns += 1;
            } else {
                diff += c;
                nd += 1;
            }
        }
    }
    let (same, diff) = (same / ns as f64, diff / nd as f64);
    assert!(
        same > diff + 0.05,
        "same-class cosine {same:.3} vs cross-class {diff:.3}"
    );
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let mut rng = stream(3, Stream::Synthetic);
    let imgs: Vec<Vec<f32>> = (0..40)
        .map(|_| (0..64).map(|_| rng.gen::<f32>() * 0.8).collect())
        .collect();
    let cfg = TrainConfig {
        batch_size: 10,
        seed: 21,
        ..TrainConfig::autoencoder()
    };
    let run = || spikecoder::network::train_autoencoder(&imgs, 16, &cfg, |_| {}).unwrap();
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
}
