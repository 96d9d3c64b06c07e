use rand::seq::SliceRandom;
use rand::Rng;

use super::idx::ImageSet;
use super::spectrogram::SpectrogramSet;
use crate::error::{Error, Result};
use crate::metrics::N_CLASSES;

/// How audio samples are matched with target images.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairingMode {
    /// One fixed image per class.
    A,
    /// A different image for every audio sample.
    B,
}

impl std::str::FromStr for PairingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(PairingMode::A),
            "B" | "b" => Ok(PairingMode::B),
            other => Err(Error::Config(format!(
                "pairing mode {other:?} is not A or B"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairedSample {
    pub audio_index: usize,
    pub image_index: usize,
    pub label: u8,
}

/// Binds every audio sample to an image with the same label.
///
/// Mode A shuffles the image indices once and uses the first image of each
/// class. Mode B shuffles each class's images and hands them out in order,
/// wrapping around when a class has fewer images than audio samples.
pub fn build_pairs<R: Rng + ?Sized>(
    audio: &SpectrogramSet,
    images: &ImageSet,
    mode: PairingMode,
    rng: &mut R,
) -> Result<Vec<PairedSample>> {
    if audio.labels.len() != audio.len() {
        return Err(Error::Consistency(format!(
            "{} spectrograms but {} labels",
            audio.len(),
            audio.labels.len()
        )));
    }
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); N_CLASSES];
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.shuffle(rng);
    for &i in &order {
        pools[images.labels[i] as usize].push(i);
    }
    for &label in &audio.labels {
        if pools.get(label as usize).is_none_or(|p| p.is_empty()) {
            return Err(Error::Consistency(format!(
                "no image carries audio label {label}"
            )));
        }
    }

    let mut next = [0usize; N_CLASSES];
    Ok(audio
        .labels
        .iter()
        .enumerate()
        .map(|(audio_index, &label)| {
            let pool = &pools[label as usize];
            let image_index = match mode {
                PairingMode::A => pool[0],
                PairingMode::B => {
                    let k = &mut next[label as usize];
                    let i = pool[*k % pool.len()];
                    *k += 1;
                    i
                }
            };
            PairedSample {
                audio_index,
                image_index,
                label,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_spectrograms;
    use crate::rng::{stream, Stream};
    use std::collections::HashSet;

    fn images(per_class: usize) -> ImageSet {
        let n = per_class * 10;
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        ImageSet::from_parts(
            n,
            2,
            2,
            (0..n * 4).map(|i| (i % 256) as u8).collect(),
            labels,
        )
        .unwrap()
    }

    #[test]
    fn mode_a_uses_one_image_per_class() {
        let audio = synth_spectrograms(10, 4, 3, 5, &mut stream(1, Stream::Synthetic));
        let imgs = images(6);
        let pairs = build_pairs(
            &audio,
            &imgs,
            PairingMode::A,
            &mut stream(1, Stream::Pairing),
        )
        .unwrap();
        let distinct: HashSet<usize> = pairs.iter().map(|p| p.image_index).collect();
        assert_eq!(distinct.len(), 10);
        let threes: HashSet<usize> = pairs
            .iter()
            .filter(|p| p.label == 3)
            .map(|p| p.image_index)
            .collect();
        assert_eq!(threes.len(), 1);
        for p in &pairs {
            assert_eq!(imgs.labels[p.image_index], p.label);
            assert_eq!(audio.labels[p.audio_index], p.label);
        }
    }

    #[test]
    fn mode_b_spreads_images() {
        let audio = synth_spectrograms(10, 4, 3, 5, &mut stream(1, Stream::Synthetic));
        let imgs = images(6);
        let pairs = build_pairs(
            &audio,
            &imgs,
            PairingMode::B,
            &mut stream(1, Stream::Pairing),
        )
        .unwrap();
        let threes: HashSet<usize> = pairs
            .iter()
            .filter(|p| p.label == 3)
            .map(|p| p.image_index)
            .collect();
        assert_eq!(threes.len(), 4);
        assert!(pairs.iter().all(|p| imgs.labels[p.image_index] == p.label));
    }

    #[test]
    fn missing_class_is_rejected() {
        let audio = synth_spectrograms(10, 1, 3, 5, &mut stream(1, Stream::Synthetic));
        let imgs = images(1).select(&[0, 1, 2]);
        assert!(matches!(
            build_pairs(
                &audio,
                &imgs,
                PairingMode::A,
                &mut stream(1, Stream::Pairing)
            ),
            Err(Error::Consistency(_))
        ));
    }
}
