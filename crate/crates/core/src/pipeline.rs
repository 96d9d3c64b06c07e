//! Audio-to-image experiment plumbing: pairing, hidden-state targets,
//! audiocoder training and test scoring.

use crate::data::{
    build_pairs, synth_spectrograms, ImageSet, PairedSample, PairingMode, SpectrogramSet,
};
use crate::error::{Error, Result};
use crate::metrics::{min_class_mse_counts, normalized_mse_values};
use crate::network::{
    extract_hidden_states, synthesize_batch, train_audiocoder, BatchLog, SpikingNetwork,
    TrainConfig,
};
use crate::raster::SpikeRaster;
use crate::rng::{stream, Stream};

/// Synthetic train and test splits drawn from one seeded stream, train first.
pub fn synthetic_audio_splits(
    seed: u64,
    train_per_class: usize,
    test_per_class: usize,
    n_channels: usize,
    n_frames: usize,
) -> (SpectrogramSet, SpectrogramSet) {
    let mut rng = stream(seed, Stream::Synthetic);
    let train = synth_spectrograms(10, train_per_class, n_channels, n_frames, &mut rng);
    let test = synth_spectrograms(10, test_per_class, n_channels, n_frames, &mut rng);
    (train, test)
}

/// Pairs train and test audio with images in a single pass, so mode A uses
/// the same class image in both splits.
pub fn pair_splits(
    train: &SpectrogramSet,
    test: &SpectrogramSet,
    images: &ImageSet,
    mode: PairingMode,
    seed: u64,
) -> Result<(Vec<PairedSample>, Vec<PairedSample>)> {
    if train.width() != test.width() {
        return Err(Error::shape(format!(
            "train spectrograms are {} wide, test {}",
            train.width(),
            test.width()
        )));
    }
    let mut all = train.clone();
    all.values.extend_from_slice(&test.values);
    all.labels.extend_from_slice(&test.labels);
    let mut pairs = build_pairs(&all, images, mode, &mut stream(seed, Stream::Pairing))?;
    let mut test_pairs = pairs.split_off(train.len());
    for p in &mut test_pairs {
        p.audio_index -= train.len();
    }
    Ok((pairs, test_pairs))
}

/// Test score of one synthesized image. Mode A compares against the class
/// image the sample was paired with; mode B, where every training sample had
/// its own image, takes the best match among all images of the label.
pub fn synthesis_mse(
    counts: &[f32],
    images: &ImageSet,
    mode: PairingMode,
    pair: &PairedSample,
) -> Result<f64> {
    match mode {
        PairingMode::A => normalized_mse_values(&images.scaled(pair.image_index), counts),
        PairingMode::B => min_class_mse_counts(counts, images, pair.label),
    }
}

/// Synthesizes every test sample and returns the mean [`synthesis_mse`]
/// together with the output rasters.
pub fn score_synthesis(
    audiocoder: &SpikingNetwork,
    decoder: &crate::lif::LifLayer,
    test: &SpectrogramSet,
    test_pairs: &[PairedSample],
    images: &ImageSet,
    mode: PairingMode,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<SpikeRaster>)> {
    if test.is_empty() {
        return Err(Error::Consistency("no test audio to score".into()));
    }
    let rasters = synthesize_batch(
        &test.samples(),
        audiocoder,
        decoder,
        cfg.steps,
        cfg.max_rate,
        &mut stream(cfg.seed, Stream::Evaluation),
    )?;
    let mut total = 0.0;
    for (r, pair) in rasters.iter().zip(test_pairs) {
        total += synthesis_mse(&r.counts_f32(), images, mode, pair)?;
    }
    Ok((total / rasters.len() as f64, rasters))
}

pub struct AudioRun {
    pub audiocoder: SpikingNetwork,
    pub log: Vec<BatchLog>,
    /// Test score after each epoch; empty unless tracking was requested.
    pub epoch_test_mse: Vec<f64>,
    pub final_test_mse: f64,
    pub test_pairs: Vec<PairedSample>,
    pub test_outputs: Vec<SpikeRaster>,
}

/// Full audio-to-image experiment on top of a trained autoencoder.
///
/// Paired training images are run through the encoder for `ae_steps` steps
/// and the first `cfg.hidden_steps` steps of hidden activity become the
/// audiocoder's targets.
#[allow(clippy::too_many_arguments)]
pub fn run_audio_experiment(
    ae: &SpikingNetwork,
    ae_steps: usize,
    images: &ImageSet,
    train: &SpectrogramSet,
    test: &SpectrogramSet,
    mode: PairingMode,
    hidden: usize,
    cfg: &TrainConfig,
    track_epochs: bool,
) -> Result<AudioRun> {
    if ae.layers().len() != 2 {
        return Err(Error::shape(format!(
            "expected a two-layer autoencoder, got topology {:?}",
            ae.topology()
        )));
    }
    cfg.validate()?;
    let (train_pairs, test_pairs) = pair_splits(train, test, images, mode, cfg.seed)?;
    let targets: Vec<Vec<f32>> = train_pairs
        .iter()
        .map(|p| images.scaled(p.image_index))
        .collect();
    let maps = extract_hidden_states(
        ae.layer(0),
        &targets,
        ae_steps,
        cfg.hidden_steps,
        cfg.max_rate,
        &mut stream(cfg.seed, Stream::Hidden),
    )?;
    let decoder = ae.layer(1);
    let mut epoch_test_mse = Vec::new();
    let (audiocoder, log) = train_audiocoder(&train.samples(), &maps, hidden, cfg, |_, net, _| {
        if track_epochs {
            epoch_test_mse
                .push(score_synthesis(net, decoder, test, &test_pairs, images, mode, cfg)?.0);
        }
        Ok(())
    })?;
    let (final_test_mse, test_outputs) =
        score_synthesis(&audiocoder, decoder, test, &test_pairs, images, mode, cfg)?;
    Ok(AudioRun {
        audiocoder,
        log,
        epoch_test_mse,
        final_test_mse,
        test_pairs,
        test_outputs,
    })
}

/// Label whose candidates give the lowest [`min_class_mse_counts`].
pub fn nearest_class(counts: &[f32], candidates: &ImageSet) -> Result<u8> {
    let mut best: Option<(u8, f64)> = None;
    for c in 0..crate::metrics::N_CLASSES as u8 {
        if !candidates.labels.contains(&c) {
            continue;
        }
        let m = min_class_mse_counts(counts, candidates, c)?;
        if best.is_none_or(|(_, b)| m < b) {
            best = Some((c, m));
        }
    }
    best.map(|(c, _)| c)
        .ok_or_else(|| Error::Consistency("no candidate images".into()))
}
