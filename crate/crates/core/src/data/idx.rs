use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use super::{read_file, write_file};
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Labelled 8-bit grayscale images, `pixels` laid out `[n][height][width]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageSet {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn from_parts(
        n: usize,
        height: usize,
        width: usize,
        pixels: Vec<u8>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if pixels.len() != n * height * width {
            return Err(Error::Consistency(format!(
                "{} pixel bytes for {n} images of {height}x{width}",
                pixels.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::Consistency(format!(
                "{n} images but {} labels",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 9) {
            return Err(Error::Consistency(format!("label {bad} outside 0..=9")));
        }
        Ok(ImageSet {
            width,
            height,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.width * self.height
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let p = self.pixels_per_image();
        &self.pixels[i * p..(i + 1) * p]
    }

    /// Image `i` scaled to `[0, 1]`.
    pub fn scaled(&self, i: usize) -> Vec<f32> {
        self.image(i).iter().map(|&v| v as f32 / 255.0).collect()
    }

    pub fn scaled_all(&self) -> Vec<Vec<f32>> {
        (0..self.len()).map(|i| self.scaled(i)).collect()
    }

    /// The first `n` images (or all of them if fewer).
    pub fn take(&self, n: usize) -> ImageSet {
        self.select(&(0..n.min(self.len())).collect::<Vec<_>>())
    }

    pub fn select(&self, indices: &[usize]) -> ImageSet {
        let mut pixels = Vec::with_capacity(indices.len() * self.pixels_per_image());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        ImageSet {
            width: self.width,
            height: self.height,
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn eof(what: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(what.to_string(), e)
}

/// Parses an IDX image file and its label file from memory.
pub fn decode_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<ImageSet> {
    let mut img = Cursor::new(image_bytes);
    let magic = img
        .read_u32::<BigEndian>()
        .map_err(eof("image file header"))?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            what: "IDX image file",
            detail: format!("magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        });
    }
    let n = img
        .read_u32::<BigEndian>()
        .map_err(eof("image file header"))? as usize;
    let rows = img
        .read_u32::<BigEndian>()
        .map_err(eof("image file header"))? as usize;
    let cols = img
        .read_u32::<BigEndian>()
        .map_err(eof("image file header"))? as usize;

    let mut lab = Cursor::new(label_bytes);
    let lmagic = lab
        .read_u32::<BigEndian>()
        .map_err(eof("label file header"))?;
    if lmagic != LABEL_MAGIC {
        return Err(Error::Format {
            what: "IDX label file",
            detail: format!("magic {lmagic:#010x}, expected {LABEL_MAGIC:#010x}"),
        });
    }
    let ln = lab
        .read_u32::<BigEndian>()
        .map_err(eof("label file header"))? as usize;
    if ln != n {
        return Err(Error::Consistency(format!("{n} images but {ln} labels")));
    }

    let mut pixels = vec![0u8; n * rows * cols];
    img.read_exact(&mut pixels).map_err(eof("image data"))?;
    let mut labels = vec![0u8; n];
    lab.read_exact(&mut labels).map_err(eof("label data"))?;
    ImageSet::from_parts(n, rows, cols, pixels, labels)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<ImageSet> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let img = read_file(images_path)?;
    let lab = read_file(labels_path)?;
    decode_idx(&img, &lab).map_err(|e| match e {
        Error::Io { context, source } => Error::Io {
            context: format!(
                "{} / {}: {context}",
                images_path.display(),
                labels_path.display()
            ),
            source,
        },
        other => other,
    })
}

/// Serialises to the two IDX byte streams `(images, labels)`.
pub fn encode_idx(set: &ImageSet) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + set.pixels.len());
    img.write_u32::<BigEndian>(IMAGE_MAGIC).unwrap();
    img.write_u32::<BigEndian>(set.len() as u32).unwrap();
    img.write_u32::<BigEndian>(set.height as u32).unwrap();
    img.write_u32::<BigEndian>(set.width as u32).unwrap();
    img.extend_from_slice(&set.pixels);
    let mut lab = Vec::with_capacity(8 + set.len());
    lab.write_u32::<BigEndian>(LABEL_MAGIC).unwrap();
    lab.write_u32::<BigEndian>(set.len() as u32).unwrap();
    lab.extend_from_slice(&set.labels);
    (img, lab)
}

pub fn write_idx(
    set: &ImageSet,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let (img, lab) = encode_idx(set);
    write_file(images_path.as_ref(), &img)?;
    write_file(labels_path.as_ref(), &lab)
}

pub(crate) fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.write_u32::<BigEndian>(LABEL_MAGIC).unwrap();
    lab.write_u32::<BigEndian>(labels.len() as u32).unwrap();
    lab.extend_from_slice(labels);
    lab
}

pub(crate) fn decode_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut lab = Cursor::new(bytes);
    let magic = lab
        .read_u32::<BigEndian>()
        .map_err(eof("label file header"))?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            what: "IDX label file",
            detail: format!("magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        });
    }
    let n = lab
        .read_u32::<BigEndian>()
        .map_err(eof("label file header"))? as usize;
    let mut labels = vec![0u8; n];
    lab.read_exact(&mut labels).map_err(eof("label data"))?;
    Ok(labels)
}
