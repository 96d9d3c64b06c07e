use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::idx::{decode_labels, encode_labels};
use super::{read_file, write_file};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SPC1";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 3 + 4 * 2;

/// Spectrograms normalised to `[0, 1]`. Each sample is stored flattened
/// channel-major (`[channel][frame]`), `n_channels · n_frames` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrogramSet {
    pub n_channels: usize,
    pub n_frames: usize,
    pub values: Vec<f32>,
    /// One label per sample; empty when none were supplied.
    pub labels: Vec<u8>,
}

impl SpectrogramSet {
    pub fn len(&self) -> usize {
        if self.width() == 0 {
            0
        } else {
            self.values.len() / self.width()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.n_channels * self.n_frames
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn samples(&self) -> Vec<&[f32]> {
        (0..self.len()).map(|i| self.sample(i)).collect()
    }

    pub fn select(&self, indices: &[usize]) -> SpectrogramSet {
        let mut values = Vec::with_capacity(indices.len() * self.width());
        for &i in indices {
            values.extend_from_slice(self.sample(i));
        }
        SpectrogramSet {
            n_channels: self.n_channels,
            n_frames: self.n_frames,
            values,
            labels: if self.labels.is_empty() {
                Vec::new()
            } else {
                indices.iter().map(|&i| self.labels[i]).collect()
            },
        }
    }
}

/// Contents of an `SPC1` file exactly as stored.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSpectrograms {
    pub n: usize,
    pub n_channels: usize,
    pub n_frames: usize,
    pub global_min: f32,
    pub global_max: f32,
    pub values: Vec<f32>,
}

impl RawSpectrograms {
    /// Linear rescale onto `[0, 1]` by the stored min/max; a degenerate range
    /// maps everything to 0.
    pub fn normalized(&self) -> Vec<f32> {
        let range = self.global_max - self.global_min;
        if range.is_nan() || range <= 0.0 {
            return vec![0.0; self.values.len()];
        }
        self.values
            .iter()
            .map(|&v| ((v - self.global_min) / range).clamp(0.0, 1.0))
            .collect()
    }
}

fn header_err(e: std::io::Error) -> Error {
    Error::io("SPC1 header", e)
}

pub fn decode_spc1(bytes: &[u8]) -> Result<RawSpectrograms> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(header_err)?;
    if &magic != MAGIC {
        return Err(Error::Format {
            what: "SPC1 spectrogram file",
            detail: format!("magic {:?}", String::from_utf8_lossy(&magic)),
        });
    }
    let version = cur.read_u16::<LittleEndian>().map_err(header_err)?;
    if version != VERSION {
        return Err(Error::Format {
            what: "SPC1 spectrogram file",
            detail: format!("version {version}, expected {VERSION}"),
        });
    }
    let n = cur.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let n_channels = cur.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let n_frames = cur.read_u32::<LittleEndian>().map_err(header_err)? as usize;
    let global_min = cur.read_f32::<LittleEndian>().map_err(header_err)?;
    let global_max = cur.read_f32::<LittleEndian>().map_err(header_err)?;
    if global_min > global_max || !global_min.is_finite() || !global_max.is_finite() {
        return Err(Error::Format {
            what: "SPC1 spectrogram file",
            detail: format!("value range [{global_min}, {global_max}]"),
        });
    }
    let count = n * n_channels * n_frames;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 4 {
        return Err(Error::Consistency(format!(
            "SPC1 header promises {count} values, payload holds {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(RawSpectrograms {
        n,
        n_channels,
        n_frames,
        global_min,
        global_max,
        values,
    })
}

pub fn encode_spc1(raw: &RawSpectrograms) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + raw.values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(VERSION).unwrap();
    out.write_u32::<LittleEndian>(raw.n as u32).unwrap();
    out.write_u32::<LittleEndian>(raw.n_channels as u32)
        .unwrap();
    out.write_u32::<LittleEndian>(raw.n_frames as u32).unwrap();
    out.write_f32::<LittleEndian>(raw.global_min).unwrap();
    out.write_f32::<LittleEndian>(raw.global_max).unwrap();
    for &v in &raw.values {
        out.write_f32::<LittleEndian>(v).unwrap();
    }
    out
}

/// Labels for `path` live beside it in an IDX label file named
/// `<path>.labels`.
pub fn labels_path_for(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

/// Reads an `SPC1` file, normalises it, and picks up the sidecar labels if
/// present.
pub fn load_spectrograms(path: impl AsRef<Path>) -> Result<SpectrogramSet> {
    let path = path.as_ref();
    let raw = decode_spc1(&read_file(path)?)?;
    let label_path = labels_path_for(path);
    let labels = if label_path.exists() {
        let labels = decode_labels(&read_file(&label_path)?)?;
        if labels.len() != raw.n {
            return Err(Error::Consistency(format!(
                "{} spectrograms but {} labels in {}",
                raw.n,
                labels.len(),
                label_path.display()
            )));
        }
        labels
    } else {
        Vec::new()
    };
    Ok(SpectrogramSet {
        n_channels: raw.n_channels,
        n_frames: raw.n_frames,
        values: raw.normalized(),
        labels,
    })
}

/// Writes the set's values as an `SPC1` file (min/max taken from the data)
/// and its labels, if any, to the sidecar.
pub fn save_spectrograms(set: &SpectrogramSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (lo, hi) = set
        .values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if set.values.is_empty() {
        (0.0, 0.0)
    } else {
        (lo, hi)
    };
    let raw = RawSpectrograms {
        n: set.len(),
        n_channels: set.n_channels,
        n_frames: set.n_frames,
        global_min: lo,
        global_max: hi,
        values: set.values.clone(),
    };
    write_file(path, &encode_spc1(&raw))?;
    if !set.labels.is_empty() {
        write_file(&labels_path_for(path), &encode_labels(&set.labels))?;
    }
    Ok(())
}

const TEMPLATE_SEED: u64 = 0x5EC7_0C0D_E000_0000;
const CHANNELS_PER_CLASS: usize = 5;

struct Band {
    channel: usize,
    centre: f32,
    width: f32,
    amplitude: f32,
}

/// Fixed spectral signature of a class: a few active channels, each with a
/// Gaussian temporal envelope. Depends only on the class id and the shape.
fn class_template(class: usize, n_channels: usize, n_frames: usize) -> Vec<Band> {
    let mut rng = ChaCha8Rng::seed_from_u64(TEMPLATE_SEED ^ class as u64);
    let mut channels: Vec<usize> = (0..n_channels).collect();
    let k = CHANNELS_PER_CLASS.min(n_channels);
    for i in 0..k {
        let j = rng.gen_range(i..n_channels);
        channels.swap(i, j);
    }
    channels[..k]
        .iter()
        .map(|&channel| Band {
            channel,
            centre: rng.gen_range(0.2..0.8) * n_frames as f32,
            width: rng.gen_range(0.05..0.15) * n_frames as f32,
            amplitude: rng.gen_range(0.6..1.0),
        })
        .collect()
}

/// Synthetic spoken-digit stand-in: `per_class` noisy renditions of each
/// class template, interleaved by class (`sample k·n_classes + c` has label
/// `c`).
///
/// Each rendition scales every band by a random gain in `[0.8, 1.2]`, shifts
/// the whole utterance by up to ±5% of its length, adds uniform noise of
/// ±0.08 and clips to `[0, 1]`.
pub fn synth_spectrograms<R: Rng + ?Sized>(
    n_classes: usize,
    per_class: usize,
    n_channels: usize,
    n_frames: usize,
    rng: &mut R,
) -> SpectrogramSet {
    let templates: Vec<Vec<Band>> = (0..n_classes)
        .map(|c| class_template(c, n_channels, n_frames))
        .collect();
    let width = n_channels * n_frames;
    let n = n_classes * per_class;
    let mut values = Vec::with_capacity(n * width);
    let mut labels = Vec::with_capacity(n);
    let max_shift = 0.05 * n_frames as f32;
    for _ in 0..per_class {
        for (c, bands) in templates.iter().enumerate() {
            let shift = rng.gen_range(-max_shift..=max_shift);
            let mut sample = vec![0.05f32; width];
            for band in bands {
                let gain = rng.gen_range(0.8..1.2);
                let row = &mut sample[band.channel * n_frames..(band.channel + 1) * n_frames];
                for (f, v) in row.iter_mut().enumerate() {
                    let z = (f as f32 - band.centre - shift) / band.width;
                    *v += band.amplitude * gain * (-0.5 * z * z).exp();
                }
            }
            for v in &mut sample {
                *v = (*v + rng.gen_range(-0.08..0.08)).clamp(0.0, 1.0);
            }
            values.extend_from_slice(&sample);
            labels.push(c as u8);
        }
    }
    SpectrogramSet {
        n_channels,
        n_frames,
        values,
        labels,
    }
}
