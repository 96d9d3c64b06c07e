use std::path::Path;

use super::write_file;
use crate::error::{Error, Result};

/// Linear rescale of spike counts so the largest maps to 255. All-zero
/// counts give a black image.
pub fn counts_to_gray(counts: &[f32]) -> Vec<u8> {
    let max = counts.iter().cloned().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return vec![0; counts.len()];
    }
    counts
        .iter()
        .map(|&c| (c.max(0.0) / max * 255.0).round() as u8)
        .collect()
}

/// Binary (`P5`) PGM with maxval 255.
pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Result<Vec<u8>> {
    if gray.len() != width * height {
        return Err(Error::shape(format!(
            "{} gray values for a {width}x{height} image",
            gray.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    write_file(path.as_ref(), &encode_pgm(width, height, gray)?)
}

/// Tiles equally sized gray tiles into a `cols`-wide grid with a one-pixel
/// gutter. Returns `(width, height, pixels)`.
pub fn contact_sheet(
    tiles: &[Vec<u8>],
    tile_w: usize,
    tile_h: usize,
    cols: usize,
) -> Result<(usize, usize, Vec<u8>)> {
    if cols == 0 {
        return Err(Error::Config(
            "contact sheet needs at least one column".into(),
        ));
    }
    if let Some(t) = tiles.iter().find(|t| t.len() != tile_w * tile_h) {
        return Err(Error::shape(format!(
            "tile has {} pixels, expected {tile_w}x{tile_h}",
            t.len()
        )));
    }
    let rows = tiles.len().div_ceil(cols).max(1);
    let width = cols * (tile_w + 1) - 1;
    let height = rows * (tile_h + 1) - 1;
    let mut px = vec![0u8; width * height];
    for (k, tile) in tiles.iter().enumerate() {
        let (ox, oy) = ((k % cols) * (tile_w + 1), (k / cols) * (tile_h + 1));
        for y in 0..tile_h {
            let dst = (oy + y) * width + ox;
            px[dst..dst + tile_w].copy_from_slice(&tile[y * tile_w..(y + 1) * tile_w]);
        }
    }
    Ok((width, height, px))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_scaling() {
        assert_eq!(counts_to_gray(&[0.0, 0.0]), vec![0, 0]);
        assert_eq!(counts_to_gray(&[0.0, 5.0, 10.0]), vec![0, 128, 255]);
    }

    #[test]
    fn header_and_payload() {
        let bytes = encode_pgm(2, 1, &[7, 9]).unwrap();
        assert_eq!(&bytes[..], b"P5\n2 1\n255\n\x07\x09");
        assert!(encode_pgm(2, 2, &[0]).is_err());
    }

    #[test]
    fn sheet_layout() {
        let tiles = vec![vec![1u8; 4], vec![2; 4], vec![3; 4]];
        let (w, h, px) = contact_sheet(&tiles, 2, 2, 2).unwrap();
        assert_eq!((w, h), (5, 5));
        assert_eq!(px[0], 1);
        assert_eq!(px[3], 2);
        assert_eq!(px[2], 0);
        assert_eq!(px[3 * w], 3);
    }
}
