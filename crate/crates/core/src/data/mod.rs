//! Dataset ingestion, synthetic audio, pairing and on-disk formats.

mod checkpoint;
mod idx;
mod pairs;
mod pgm;
mod spectrogram;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use idx::{decode_idx, encode_idx, load_idx, write_idx, ImageSet};
pub use pairs::{build_pairs, PairedSample, PairingMode};
pub use pgm::{contact_sheet, counts_to_gray, encode_pgm, write_pgm};
pub use spectrogram::{
    decode_spc1, encode_spc1, labels_path_for, load_spectrograms, save_spectrograms,
    synth_spectrograms, RawSpectrograms, SpectrogramSet,
};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}
