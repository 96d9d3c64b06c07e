use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::BitMatrix;
use crate::tensor::Matrix;

const NEVER: u32 = u32::MAX;
const J_BLOCK: usize = 64;
const B_GROUP: usize = 4;

/// Per-sample eligibility trace `∂V_mem/∂W` of one layer, logically
/// `[batch x n_out x n_in]`.
///
/// The recursion `trace ← (1 − α)·trace + x`, zeroed when neuron `m` fires,
/// is linear in the input, so the trace is kept in closed form: one running
/// filter `s[b][j]` of the input that never resets, a snapshot of `s` at each
/// step where some neuron fired, and per `(b, m)` the snapshot of its last
/// reset and the decay accumulated since. Then
/// `trace[b][m][j] = s[b][j] − decay_since[b][m] · s_reset[b][j]`.
/// Everything is held in `f64`, so values match the recursion to rounding
/// error regardless of sequence length.
#[derive(Clone, Debug, PartialEq)]
pub struct EligibilityTrace {
    batch: usize,
    n_out: usize,
    n_in: usize,
    filter: Vec<f64>,
    snapshots: Vec<Vec<f64>>,
    /// Whether the newest snapshot equals the current filter.
    snapshot_fresh: bool,
    last_reset: Vec<u32>,
    decay_since: Vec<f64>,
}

impl EligibilityTrace {
    pub fn zeros(batch: usize, n_out: usize, n_in: usize) -> Self {
        EligibilityTrace {
            batch,
            n_out,
            n_in,
            filter: vec![0.0; batch * n_in],
            snapshots: Vec::new(),
            snapshot_fresh: false,
            last_reset: vec![NEVER; batch * n_out],
            decay_since: vec![0.0; batch * n_out],
        }
    }

    /// `(batch, n_out, n_in)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.n_out, self.n_in)
    }

    /// Bytes currently held; grows by `batch · n_in · 8` per step with a
    /// reset.
    pub fn memory_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        (self.filter.len() + self.snapshots.len() * self.batch * self.n_in + self.decay_since.len())
            * f
            + self.last_reset.len() * std::mem::size_of::<u32>()
    }

    #[inline]
    fn reset_term(&self, b: usize, m: usize) -> Option<(f64, &[f64])> {
        let k = b * self.n_out + m;
        match self.last_reset[k] {
            NEVER => None,
            r => {
                let snap = &self.snapshots[r as usize][b * self.n_in..(b + 1) * self.n_in];
                Some((self.decay_since[k], snap))
            }
        }
    }

    pub fn get(&self, b: usize, m: usize, j: usize) -> f64 {
        let s = self.filter[b * self.n_in + j];
        match self.reset_term(b, m) {
            None => s,
            Some((c, snap)) => s - c * snap[j],
        }
    }

    /// Trace of sample `b`, neuron `m` over all inputs.
    pub fn row(&self, b: usize, m: usize) -> Vec<f64> {
        (0..self.n_in).map(|j| self.get(b, m, j)).collect()
    }

    pub fn clear(&mut self) {
        self.filter.fill(0.0);
        self.snapshots.clear();
        self.snapshot_fresh = false;
        self.last_reset.fill(NEVER);
        self.decay_since.fill(0.0);
    }

    fn check_input(&self, input: &BitMatrix) -> Result<()> {
        if input.shape() != (self.batch, self.n_in) {
            return Err(Error::shape(format!(
                "trace expects {}x{} input spikes, got {}x{}",
                self.batch,
                self.n_in,
                input.rows(),
                input.cols()
            )));
        }
        Ok(())
    }

    fn check_outputs(&self, spiked: &BitMatrix) -> Result<()> {
        if spiked.shape() != (self.batch, self.n_out) {
            return Err(Error::shape(format!(
                "trace expects {}x{} output spikes, got {}x{}",
                self.batch,
                self.n_out,
                spiked.rows(),
                spiked.cols()
            )));
        }
        Ok(())
    }

    /// `trace ← decay · trace + input` for every output neuron.
    pub fn advance(&mut self, alpha: f32, input: &BitMatrix) -> Result<()> {
        self.check_input(input)?;
        let decay = 1.0 - alpha as f64;
        if decay != 1.0 {
            self.filter.iter_mut().for_each(|s| *s *= decay);
            self.decay_since.iter_mut().for_each(|c| *c *= decay);
        }
        for b in 0..self.batch {
            for j in input.ones_in_row(b) {
                self.filter[b * self.n_in + j] += 1.0;
            }
        }
        self.snapshot_fresh = false;
        Ok(())
    }

    /// Zeroes the traces of every (sample, neuron) that spiked.
    pub fn reset_spiked(&mut self, spiked: &BitMatrix) -> Result<()> {
        self.check_outputs(spiked)?;
        if !spiked.any() {
            return Ok(());
        }
        if !self.snapshot_fresh {
            self.snapshots.push(self.filter.clone());
            self.snapshot_fresh = true;
        }
        let r = (self.snapshots.len() - 1) as u32;
        for b in 0..self.batch {
            for m in spiked.ones_in_row(b) {
                let k = b * self.n_out + m;
                self.last_reset[k] = r;
                self.decay_since[k] = 1.0;
            }
        }
        Ok(())
    }

    /// Batch mean `grad[m][j] = mean_b delta[b][m] · trace[b][m][j]`,
    /// accumulated in `f64`.
    ///
    /// Work is split into column blocks of the inputs so the filter and
    /// snapshot slices a block reads stay in cache across all neurons.
    fn gradient_into(&self, delta: &Matrix, grad: &mut Matrix) {
        let (batch, n_out, n_in) = (self.batch, self.n_out, self.n_in);
        if batch == 0 || n_in == 0 {
            grad.fill(0.0);
            return;
        }
        let scale = 1.0 / batch as f64;
        let coef: Vec<f64> = delta.as_slice().iter().map(|&d| d as f64 * scale).collect();
        let starts: Vec<usize> = (0..n_in).step_by(J_BLOCK).collect();
        let zeros = [0.0f64; J_BLOCK];
        let blocks: Vec<Vec<f64>> = starts
            .par_iter()
            .map(|&j0| {
                let w = J_BLOCK.min(n_in - j0);
                let zero = &zeros[..w];
                let mut acc = vec![0.0f64; n_out * w];
                // Samples are taken four at a time so each accumulator row is
                // loaded once per group rather than once per sample.
                for b0 in (0..batch).step_by(B_GROUP) {
                    let rows: [Option<usize>; B_GROUP] =
                        std::array::from_fn(|i| Some(b0 + i).filter(|&b| b < batch));
                    let s: [&[f64]; B_GROUP] = std::array::from_fn(|i| match rows[i] {
                        Some(b) => &self.filter[b * n_in + j0..b * n_in + j0 + w],
                        None => zero,
                    });
                    for m in 0..n_out {
                        let mut d = [0.0f64; B_GROUP];
                        let mut c = [0.0f64; B_GROUP];
                        let mut q = [zero; B_GROUP];
                        for (i, row) in rows.iter().enumerate() {
                            let Some(b) = *row else { continue };
                            let k = b * n_out + m;
                            d[i] = coef[k];
                            if d[i] != 0.0 && self.last_reset[k] != NEVER {
                                c[i] = d[i] * self.decay_since[k];
                                let snap = &self.snapshots[self.last_reset[k] as usize];
                                q[i] = &snap[b * n_in + j0..b * n_in + j0 + w];
                            }
                        }
                        if d.iter().all(|&x| x == 0.0) {
                            continue;
                        }
                        let a = &mut acc[m * w..(m + 1) * w];
                        let (s0, s1, s2, s3) = (&s[0][..w], &s[1][..w], &s[2][..w], &s[3][..w]);
                        let (q0, q1, q2, q3) = (&q[0][..w], &q[1][..w], &q[2][..w], &q[3][..w]);
                        for j in 0..w {
                            a[j] += (d[0] * s0[j] - c[0] * q0[j] + d[1] * s1[j] - c[1] * q1[j])
                                + (d[2] * s2[j] - c[2] * q2[j] + d[3] * s3[j] - c[3] * q3[j]);
                        }
                    }
                }
                acc
            })
            .collect();
        for (&j0, acc) in starts.iter().zip(&blocks) {
            let w = J_BLOCK.min(n_in - j0);
            for m in 0..n_out {
                let dst = &mut grad.row_mut(m)[j0..j0 + w];
                for (g, &a) in dst.iter_mut().zip(&acc[m * w..(m + 1) * w]) {
                    *g = a as f32;
                }
            }
        }
    }

    /// One training step for this layer: advance with `input`, write the
    /// batch-mean gradient into `grad`, then reset the neurons that fired.
    ///
    /// Equivalent to [`advance`](Self::advance), [`trace_gradient`] and
    /// [`reset_spiked`](Self::reset_spiked) in that order.
    pub fn step_gradient(
        &mut self,
        alpha: f32,
        input: &BitMatrix,
        delta: &Matrix,
        spiked: &BitMatrix,
        grad: &mut Matrix,
    ) -> Result<()> {
        self.check_input(input)?;
        self.check_outputs(spiked)?;
        delta.expect_shape(self.batch, self.n_out, "delta")?;
        grad.expect_shape(self.n_out, self.n_in, "gradient")?;
        self.advance(alpha, input)?;
        self.gradient_into(delta, grad);
        self.reset_spiked(spiked)
    }
}

/// Advances the trace with this step's input, then resets the rows of the
/// neurons in `spiked`.
pub fn update_trace(
    trace: &mut EligibilityTrace,
    alpha: f32,
    input_spikes: &BitMatrix,
    spiked: &BitMatrix,
) -> Result<()> {
    trace.advance(alpha, input_spikes)?;
    trace.reset_spiked(spiked)
}

/// Batch mean of `delta[b][m] · trace[b][m][j]`.
pub fn trace_gradient(delta: &Matrix, trace: &EligibilityTrace) -> Result<Matrix> {
    let (batch, n_out, n_in) = trace.shape();
    delta.expect_shape(batch, n_out, "delta")?;
    let mut grad = Matrix::zeros(n_out, n_in);
    trace.gradient_into(delta, &mut grad);
    Ok(grad)
}

/// `∂L/∂W₂` from `δ₂ = −E` and the output trace advanced to this step.
pub fn output_layer_gradient(delta2: &Matrix, trace2: &EligibilityTrace) -> Result<Matrix> {
    trace_gradient(delta2, trace2)
}

/// `∂L/∂W₁` from the hidden delta and the hidden trace advanced to this step.
pub fn hidden_layer_gradient(delta_hidden: &Matrix, trace1: &EligibilityTrace) -> Result<Matrix> {
    trace_gradient(delta_hidden, trace1)
}
