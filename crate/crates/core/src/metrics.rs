//! Reconstruction metrics.
//!
//! * Spike-MSE compares per-neuron spike counts of two rasters.
//! * Normalized MSE z-scores an image and a spike-count map and takes the
//!   mean squared difference; it is invariant to affine rescaling, which is
//!   what lets spike counts be compared with pixel intensities.

use crate::data::ImageSet;
use crate::error::{Error, Result};
use crate::network::{infer, SpikingNetwork};
use crate::raster::SpikeRaster;
use crate::rng::StreamRng;

pub const N_CLASSES: usize = 10;

/// Averages over an evaluated split.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub spike_mse: f64,
    pub pixel_mse: f64,
    /// Mean normalized MSE per label; NaN for labels absent from the split.
    pub per_class_mse: [f64; N_CLASSES],
    pub n_samples: usize,
}

pub fn spike_mse(input: &SpikeRaster, output: &SpikeRaster) -> Result<f64> {
    if input.n_neurons() != output.n_neurons() {
        return Err(Error::shape(format!(
            "rasters have {} and {} neurons",
            input.n_neurons(),
            output.n_neurons()
        )));
    }
    Ok(count_mse(&input.counts(), &output.counts()))
}

fn count_mse(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    sum / a.len() as f64
}

/// Zero-mean, unit-variance copy of `v` (population variance). A constant
/// vector maps to all zeros.
pub fn zscore(v: &[f32]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let n = v.len() as f64;
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|&x| (x as f64 - mean) / sd).collect()
}

/// Normalized MSE between two real vectors of equal width.
pub fn normalized_mse_values(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "widths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let (za, zb) = (zscore(a), zscore(b));
    Ok(za
        .iter()
        .zip(&zb)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.len() as f64)
}

/// Normalized MSE between an image in `[0, 1]` and a raster's spike counts.
pub fn normalized_mse(image: &[f32], output: &SpikeRaster) -> Result<f64> {
    normalized_mse_values(image, &output.counts_f32())
}

/// Lowest normalized MSE of `generated` against every candidate image that
/// carries `label`.
pub fn min_class_mse(generated: &SpikeRaster, candidates: &ImageSet, label: u8) -> Result<f64> {
    min_class_mse_counts(&generated.counts_f32(), candidates, label)
}

pub fn min_class_mse_counts(counts: &[f32], candidates: &ImageSet, label: u8) -> Result<f64> {
    let mut best: Option<f64> = None;
    for i in (0..candidates.len()).filter(|&i| candidates.labels[i] == label) {
        let mse = normalized_mse_values(&candidates.scaled(i), counts)?;
        best = Some(best.map_or(mse, |b| b.min(mse)));
    }
    best.ok_or_else(|| Error::Consistency(format!("no candidate image with label {label}")))
}

/// Runs an autoencoder over `images` and scores input rasters against output
/// rasters (Spike-MSE) and images against output counts (normalized MSE).
pub fn evaluate_autoencoder(
    net: &SpikingNetwork,
    images: &ImageSet,
    steps: usize,
    max_rate: f32,
    rng: &mut StreamRng,
) -> Result<EvalReport> {
    if images.is_empty() {
        return Err(Error::Consistency(
            "cannot evaluate on an empty dataset".into(),
        ));
    }
    if images.pixels_per_image() != net.n_in() || net.n_in() != net.n_out() {
        return Err(Error::shape(format!(
            "network {:?} does not fit {}-pixel images",
            net.topology(),
            images.pixels_per_image()
        )));
    }
    let scaled: Vec<Vec<f32>> = (0..images.len()).map(|i| images.scaled(i)).collect();
    let runs = infer(net, &scaled, steps, max_rate, rng)?;

    let (mut spike, mut pixel) = (0.0, 0.0);
    let mut class_sum = [0.0f64; N_CLASSES];
    let mut class_n = [0usize; N_CLASSES];
    for (i, run) in runs.iter().enumerate() {
        spike += count_mse(&run.input.counts(), &run.output.counts());
        let p = normalized_mse(&scaled[i], &run.output)?;
        pixel += p;
        let label = images.labels[i] as usize;
        if label < N_CLASSES {
            class_sum[label] += p;
            class_n[label] += 1;
        }
    }
    let n = runs.len() as f64;
    let mut per_class_mse = [f64::NAN; N_CLASSES];
    for c in 0..N_CLASSES {
        if class_n[c] > 0 {
            per_class_mse[c] = class_sum[c] / class_n[c] as f64;
        }
    }
    Ok(EvalReport {
        spike_mse: spike / n,
        pixel_mse: pixel / n,
        per_class_mse,
        n_samples: runs.len(),
    })
}
