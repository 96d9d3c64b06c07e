use crate::error::{Error, Result};
use crate::lif::surrogate_derivative;
use crate::raster::BitMatrix;
use crate::tensor::Matrix;

/// Masked potential error for one time step.
#[derive(Clone, Debug)]
pub struct StepLoss {
    /// `[batch x n_out]` masked error `E = mask ⊙ (v_th·target − V_out)`.
    pub error: Matrix,
    /// `½|E|²` per sample, averaged over the batch.
    pub loss: f64,
    /// Fraction of exactly-zero entries in `error`.
    pub mask_sparsity: f64,
}

/// Desired output potential: `v_th` where the target spikes, zero elsewhere.
pub fn target_potential(target_spikes: &BitMatrix, v_th: f32) -> Matrix {
    let (rows, cols) = target_spikes.shape();
    let mut out = Matrix::zeros(rows, cols);
    for b in 0..rows {
        let row = out.row_mut(b);
        for i in target_spikes.ones_in_row(b) {
            row[i] = v_th;
        }
    }
    out
}

/// Bits where target and output disagree.
pub fn compute_mask(target_spikes: &BitMatrix, output_spikes: &BitMatrix) -> Result<BitMatrix> {
    target_spikes.xor(output_spikes)
}

pub fn masked_loss(
    target_spikes: &BitMatrix,
    output_spikes: &BitMatrix,
    v_mem_out: &Matrix,
    v_th: f32,
) -> Result<StepLoss> {
    let mask = compute_mask(target_spikes, output_spikes)?;
    masked_loss_with_mask(&mask, target_spikes, v_mem_out, v_th)
}

/// Loss under an explicit mask. An all-ones mask disables masking.
pub fn masked_loss_with_mask(
    mask: &BitMatrix,
    target_spikes: &BitMatrix,
    v_mem_out: &Matrix,
    v_th: f32,
) -> Result<StepLoss> {
    let (batch, n) = target_spikes.shape();
    if mask.shape() != (batch, n) {
        return Err(Error::shape(format!(
            "mask is {}x{}, target is {batch}x{n}",
            mask.rows(),
            mask.cols()
        )));
    }
    v_mem_out.expect_shape(batch, n, "output potential")?;

    let mut error = Matrix::zeros(batch, n);
    let mut sum_sq = 0.0f64;
    for b in 0..batch {
        let v = v_mem_out.row(b);
        let e = error.row_mut(b);
        for i in mask.ones_in_row(b) {
            let target = if target_spikes.get(b, i) { v_th } else { 0.0 };
            let d = target - v[i];
            e[i] = d;
            sum_sq += (d as f64) * (d as f64);
        }
    }
    let zeros = error.as_slice().iter().filter(|&&e| e == 0.0).count();
    let total = (batch * n).max(1);
    Ok(StepLoss {
        error,
        loss: if batch == 0 {
            0.0
        } else {
            0.5 * sum_sq / batch as f64
        },
        mask_sparsity: zeros as f64 / total as f64,
    })
}

/// `δ₂ = ∂L/∂Z_out = −E`.
pub fn output_delta(step: &StepLoss) -> Matrix {
    step.error.map(|e| -e)
}

/// Hidden-layer local error: `(δ₂ · W₂) ⊙ σ'(V_hidden)`.
///
/// `v_mem_hidden` is the hidden layer's potential at this step before reset.
pub fn hidden_delta(
    delta2: &Matrix,
    w2: &Matrix,
    v_mem_hidden: &Matrix,
    v_th: f32,
) -> Result<Matrix> {
    let (batch, n_out) = delta2.shape();
    let n_hidden = w2.cols();
    w2.expect_shape(n_out, n_hidden, "output weights")?;
    v_mem_hidden.expect_shape(batch, n_hidden, "hidden potential")?;

    let mut out = Matrix::zeros(batch, n_hidden);
    let mut acc = vec![0.0f64; n_hidden];
    for b in 0..batch {
        acc.fill(0.0);
        // δ₂ is mostly zero under the mask; skip those rows of W₂.
        for (k, &d) in delta2.row(b).iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let d = d as f64;
            for (a, &w) in acc.iter_mut().zip(w2.row(k)) {
                *a += d * w as f64;
            }
        }
        let v = v_mem_hidden.row(b);
        for (m, o) in out.row_mut(b).iter_mut().enumerate() {
            *o = (acc[m] * surrogate_derivative(v[m], v_th) as f64) as f32;
        }
    }
    Ok(out)
}
