//! Pixel scaling and Poisson rate encoding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::{BitMatrix, SpikeRaster};

/// Maps raw 8-bit intensities onto `[0, 1]`.
pub fn scale_pixels<T: Copy + Into<i64>>(raw: &[T]) -> Result<Vec<f32>> {
    raw.iter()
        .enumerate()
        .map(|(i, &v)| {
            let v: i64 = v.into();
            if !(0..=255).contains(&v) {
                return Err(Error::InputDomain(format!(
                    "pixel {i} is {v}, outside 0..=255"
                )));
            }
            Ok(v as f32 / 255.0)
        })
        .collect()
}

fn check_rate(max_rate: f32) -> Result<()> {
    if !(max_rate > 0.0 && max_rate <= 1.0) {
        return Err(Error::InputDomain(format!(
            "max_rate {max_rate} outside (0, 1]"
        )));
    }
    Ok(())
}

/// Poisson (Bernoulli-per-step) spike train for each value.
///
/// Neuron `i` fires at each step independently with probability
/// `values[i] * max_rate`. Draws are taken step-major, neuron-minor; entries
/// with zero probability consume no randomness.
pub fn encode_poisson<R: Rng + ?Sized>(
    values: &[f32],
    steps: usize,
    max_rate: f32,
    rng: &mut R,
) -> Result<SpikeRaster> {
    check_rate(max_rate)?;
    if steps == 0 {
        return Err(Error::Config(
            "encoding needs at least one time step".into(),
        ));
    }
    for (i, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InputDomain(format!(
                "value {i} is {v}, outside [0, 1]"
            )));
        }
    }
    let mut raster = SpikeRaster::zeros(values.len(), steps);
    let bits = raster.time_major_mut();
    for t in 0..steps {
        for (i, &v) in values.iter().enumerate() {
            let p = v * max_rate;
            if p > 0.0 && rng.gen::<f32>() < p {
                bits.set(t, i, true);
            }
        }
    }
    Ok(raster)
}

/// Encodes a batch sample-by-sample and regroups the result into per-step
/// frames (`batch x width` each).
///
/// Sample `b` sees exactly the random draws it would get from
/// [`encode_poisson`] if the samples were encoded one after another.
pub fn encode_batch<R: Rng + ?Sized, V: AsRef<[f32]>>(
    samples: &[V],
    steps: usize,
    max_rate: f32,
    rng: &mut R,
) -> Result<Vec<BitMatrix>> {
    let rasters = samples
        .iter()
        .map(|s| encode_poisson(s.as_ref(), steps, max_rate, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(rasters_to_frames(&rasters))
}

/// Regroups per-sample rasters (all the same shape) into per-step frames.
pub fn rasters_to_frames(rasters: &[SpikeRaster]) -> Vec<BitMatrix> {
    let Some(first) = rasters.first() else {
        return Vec::new();
    };
    let (width, steps) = (first.n_neurons(), first.steps());
    (0..steps)
        .map(|t| {
            let mut frame = BitMatrix::zeros(rasters.len(), width);
            for (b, r) in rasters.iter().enumerate() {
                frame.copy_row_from(b, r.time_major(), t);
            }
            frame
        })
        .collect()
}
