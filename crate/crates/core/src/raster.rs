use crate::error::{Error, Result};

/// Bit-packed binary matrix, each row stored as a run of `u64` words.
///
/// Used both for per-step spike frames (`batch x neurons`) and, inside
/// [`SpikeRaster`], for `time x neurons` activity maps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(64);
        BitMatrix {
            rows,
            cols,
            stride,
            words: vec![0; rows * stride],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        let mut m = BitMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, true);
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = BitMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from rows of 0/1 values. Any other value is rejected.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = BitMatrix::zeros(rows.len(), cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::shape(format!(
                    "row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(r, c, true),
                    other => {
                        return Err(Error::InputDomain(format!(
                            "binary entry ({r},{c}) is {other}"
                        )))
                    }
                }
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        (self.words[r * self.stride + c / 64] >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.words[r * self.stride + c / 64];
        let bit = 1u64 << (c % 64);
        if v {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.stride..(r + 1) * self.stride]
    }

    /// Indices of the set bits in row `r`, ascending.
    pub fn ones_in_row(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(r)
            .iter()
            .enumerate()
            .flat_map(|(wi, &word)| BitIter {
                word,
                base: wi * 64,
            })
    }

    pub fn count_row(&self, r: usize) -> usize {
        self.row_words(r)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    /// Expands row `r` into `out` as 0.0 / 1.0 values.
    pub fn row_to_f32(&self, r: usize, out: &mut [f32]) {
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for c in self.ones_in_row(r) {
            out[c] = 1.0;
        }
    }

    pub fn xor(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "cannot xor {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(BitMatrix {
            rows: self.rows,
            cols: self.cols,
            stride: self.stride,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    /// Copies row `src_row` of `src` into row `dst_row` of `self`.
    pub fn copy_row_from(&mut self, dst_row: usize, src: &BitMatrix, src_row: usize) {
        assert_eq!(self.cols, src.cols, "row width mismatch");
        let s = self.stride;
        self.words[dst_row * s..(dst_row + 1) * s].copy_from_slice(src.row_words(src_row));
    }
}

struct BitIter {
    word: u64,
    base: usize,
}

impl Iterator for BitIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.word == 0 {
            return None;
        }
        let tz = self.word.trailing_zeros() as usize;
        self.word &= self.word - 1;
        Some(self.base + tz)
    }
}

/// Binary neuron-by-time activity map.
///
/// Stored bit-packed along the neuron axis, one packed row per time step, so
/// a column of the logical `[n_neurons x steps]` map is one contiguous row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpikeRaster {
    bits: BitMatrix,
}

impl SpikeRaster {
    pub fn zeros(n_neurons: usize, steps: usize) -> Self {
        SpikeRaster {
            bits: BitMatrix::zeros(steps, n_neurons),
        }
    }

    /// Wraps a `steps x neurons` bit matrix.
    pub fn from_time_major(bits: BitMatrix) -> Self {
        SpikeRaster { bits }
    }

    /// Builds a raster from `[neuron][t]` rows of 0/1.
    pub fn from_neuron_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let steps = rows.first().map_or(0, |r| r.as_ref().len());
        let mut raster = SpikeRaster::zeros(n, steps);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != steps {
                return Err(Error::shape(format!(
                    "neuron {i} has {} steps, expected {steps}",
                    row.len()
                )));
            }
            for (t, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => raster.set(i, t, true),
                    other => {
                        return Err(Error::InputDomain(format!(
                            "raster entry ({i},{t}) is {other}"
                        )))
                    }
                }
            }
        }
        Ok(raster)
    }

    #[inline]
    pub fn n_neurons(&self) -> usize {
        self.bits.cols()
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.bits.rows()
    }

    #[inline]
    pub fn get(&self, neuron: usize, t: usize) -> bool {
        self.bits.get(t, neuron)
    }

    #[inline]
    pub fn set(&mut self, neuron: usize, t: usize, v: bool) {
        self.bits.set(t, neuron, v)
    }

    /// Neurons active at step `t`.
    pub fn active_at(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones_in_row(t)
    }

    /// Per-neuron spike counts summed over time.
    pub fn counts(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.n_neurons()];
        for t in 0..self.steps() {
            for i in self.bits.ones_in_row(t) {
                out[i] += 1;
            }
        }
        out
    }

    pub fn counts_f32(&self) -> Vec<f32> {
        self.counts().into_iter().map(|c| c as f32).collect()
    }

    pub fn total_spikes(&self) -> usize {
        self.bits.count_ones()
    }

    /// The first `steps` columns.
    pub fn prefix(&self, steps: usize) -> Result<SpikeRaster> {
        if steps > self.steps() {
            return Err(Error::Config(format!(
                "cannot take {steps} steps from a {}-step raster",
                self.steps()
            )));
        }
        let mut out = SpikeRaster::zeros(self.n_neurons(), steps);
        for t in 0..steps {
            out.bits.copy_row_from(t, &self.bits, t);
        }
        Ok(out)
    }

    /// The time-major backing matrix (`steps x neurons`).
    pub fn time_major(&self) -> &BitMatrix {
        &self.bits
    }

    pub(crate) fn time_major_mut(&mut self) -> &mut BitMatrix {
        &mut self.bits
    }
}
