use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spikecoder::data::{contact_sheet, counts_to_gray, write_pgm};
use spikecoder::network::BatchLog;

use crate::CliError;

pub const BATCH_LOG_HEADER: &str = "batch_index,spike_mse_loss,vmem_loss,mask_sparsity";

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn batch_log_csv(log: &[BatchLog]) -> String {
    let mut s = String::from(BATCH_LOG_HEADER);
    s.push('\n');
    for b in log {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            b.batch_index, b.spike_mse, b.vmem_loss, b.mask_sparsity
        );
    }
    s
}

/// `name.ext` when a run is alone, `name_<tag>.ext` when it is one of many.
pub fn run_file(dir: &Path, name: &str, ext: &str, tag: Option<&str>) -> PathBuf {
    match tag {
        Some(t) => dir.join(format!("{name}_{t}.{ext}")),
        None => dir.join(format!("{name}.{ext}")),
    }
}

/// Writes tiles of `side x side` gray pixels as a contact sheet.
pub fn write_sheet(
    path: &Path,
    tiles: &[Vec<u8>],
    side: usize,
    cols: usize,
) -> Result<(), CliError> {
    let (w, h, px) = contact_sheet(tiles, side, side, cols)?;
    write_pgm(path, w, h, &px)?;
    Ok(())
}

pub fn gray(counts: &[f32]) -> Vec<u8> {
    counts_to_gray(counts)
}
