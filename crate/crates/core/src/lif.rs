//! Leaky integrate-and-fire layer dynamics.
//!
//! Each step integrates `Z = input · Wᵀ` into the membrane potential with
//! leak `(1 - alpha)`, fires wherever the potential reaches `v_th`, and resets
//! fired neurons to exactly zero after the spike has been recorded.

use rand::Rng;

use crate::backprop::EligibilityTrace;
use crate::error::{Error, Result};
use crate::raster::BitMatrix;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronConfig {
    /// Leak coefficient; `0` gives a non-leaky integrate-and-fire neuron.
    pub alpha: f32,
    pub v_th: f32,
}

impl NeuronConfig {
    pub fn new(alpha: f32, v_th: f32) -> Result<Self> {
        let cfg = NeuronConfig { alpha, v_th };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha {} outside [0, 1)",
                self.alpha
            )));
        }
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            return Err(Error::Config(format!(
                "v_th {} must be positive",
                self.v_th
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn decay(&self) -> f32 {
        1.0 - self.alpha
    }
}

/// Fully connected spiking layer: weights `[n_out x n_in]` plus its neuron
/// model.
#[derive(Clone, Debug, PartialEq)]
pub struct LifLayer {
    pub weights: Matrix,
    pub neuron: NeuronConfig,
}

impl LifLayer {
    pub fn new(weights: Matrix, neuron: NeuronConfig) -> Result<Self> {
        neuron.validate()?;
        Ok(LifLayer { weights, neuron })
    }

    /// Uniform fan-in initialisation in `[-1/sqrt(n_in), 1/sqrt(n_in)]`.
    pub fn random<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        neuron: NeuronConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::Config(format!(
                "layer {n_in}->{n_out} has a zero width"
            )));
        }
        let bound = 1.0 / (n_in as f32).sqrt();
        let weights = Matrix::from_fn(n_out, n_in, |_, _| rng.gen_range(-bound..=bound));
        LifLayer::new(weights, neuron)
    }

    #[inline]
    pub fn n_in(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn n_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward_step(&self, state: &mut LifLayerState, input: &BitMatrix) -> Result<LayerStep> {
        lif_forward_step(self, state, input)
    }
}

/// Per-run state of one layer: membrane potentials `[batch x n_out]` and,
/// when training, the eligibility trace `∂V_mem/∂W`.
#[derive(Clone, Debug)]
pub struct LifLayerState {
    pub v_mem: Matrix,
    pub trace: Option<EligibilityTrace>,
}

impl LifLayerState {
    /// Inference state: potentials only.
    pub fn new(batch: usize, n_out: usize) -> Self {
        LifLayerState {
            v_mem: Matrix::zeros(batch, n_out),
            trace: None,
        }
    }

    /// Training state with a zeroed trace of `batch * n_out * n_in` floats.
    pub fn with_trace(batch: usize, n_out: usize, n_in: usize) -> Self {
        LifLayerState {
            v_mem: Matrix::zeros(batch, n_out),
            trace: Some(EligibilityTrace::zeros(batch, n_out, n_in)),
        }
    }

    pub fn batch(&self) -> usize {
        self.v_mem.rows()
    }

    pub fn reset(&mut self) {
        self.v_mem.fill(0.0);
        if let Some(trace) = &mut self.trace {
            trace.clear();
        }
    }
}

/// Output of one layer at one time step.
#[derive(Clone, Debug)]
pub struct LayerStep {
    /// `[batch x n_out]` output spikes.
    pub spikes: BitMatrix,
    /// `[batch x n_out]` membrane potential after integration, before reset.
    pub v_pre: Matrix,
}

/// Advances one layer by one step, updating `state.v_mem` in place.
///
/// The trace (if any) is not touched here; the training loop advances it once
/// gradients for the step are known.
pub fn lif_forward_step(
    layer: &LifLayer,
    state: &mut LifLayerState,
    input: &BitMatrix,
) -> Result<LayerStep> {
    let (n_out, n_in) = layer.weights.shape();
    let batch = state.batch();
    if input.shape() != (batch, n_in) {
        return Err(Error::shape(format!(
            "layer expects {batch}x{n_in} input spikes, got {}x{}",
            input.rows(),
            input.cols()
        )));
    }
    state
        .v_mem
        .expect_shape(batch, n_out, "membrane potential")?;

    // Active inputs pick rows out of Wᵀ, so the accumulation below is a run
    // of contiguous adds.
    let wt = layer.weights.transpose();
    let decay = layer.neuron.decay();
    let v_th = layer.neuron.v_th;

    let mut spikes = BitMatrix::zeros(batch, n_out);
    let mut v_pre = Matrix::zeros(batch, n_out);
    let mut z = vec![0.0f32; n_out];
    for b in 0..batch {
        z.fill(0.0);
        for j in input.ones_in_row(b) {
            for (acc, &w) in z.iter_mut().zip(wt.row(j)) {
                *acc += w;
            }
        }
        let v = state.v_mem.row_mut(b);
        let pre = v_pre.row_mut(b);
        for m in 0..n_out {
            let vm = decay * v[m] + z[m];
            pre[m] = vm;
            if vm >= v_th {
                spikes.set(b, m, true);
                v[m] = 0.0;
            } else {
                v[m] = vm;
            }
        }
    }
    Ok(LayerStep { spikes, v_pre })
}

/// Derivative of the sigmoid centred on `v_th`, used in place of the
/// threshold's derivative during backpropagation.
///
/// Evaluated as `e / (1 + e)^2` with `e = exp(-|v - v_th|)`, which is the same
/// value by symmetry and never overflows.
#[inline]
pub fn surrogate_derivative(v: f32, v_th: f32) -> f32 {
    let e = (-(v - v_th).abs()).exp();
    let d = 1.0 + e;
    e / (d * d)
}

/// Elementwise [`surrogate_derivative`] over a matrix of potentials.
pub fn surrogate_derivative_matrix(v_mem: &Matrix, v_th: f32) -> Matrix {
    v_mem.map(|v| surrogate_derivative(v, v_th))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn single(w: f32, alpha: f32) -> LifLayer {
        LifLayer::new(
            Matrix::from_vec(1, 1, vec![w]).unwrap(),
            NeuronConfig::new(alpha, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn accumulates_to_threshold_then_resets() {
        let layer = single(0.5, 0.0);
        let mut st = LifLayerState::new(1, 1);
        let on = BitMatrix::ones(1, 1);
        let s1 = layer.forward_step(&mut st, &on).unwrap();
        assert!(!s1.spikes.get(0, 0));
        assert_eq!(s1.v_pre.get(0, 0), 0.5);
        let s2 = layer.forward_step(&mut st, &on).unwrap();
        assert!(s2.spikes.get(0, 0));
        assert_eq!(s2.v_pre.get(0, 0), 1.0);
        assert_eq!(st.v_mem.get(0, 0), 0.0);
    }

    #[test]
    fn pure_decay() {
        let layer = single(0.3, 0.1);
        let mut st = LifLayerState::new(1, 1);
        st.v_mem.set(0, 0, 0.5);
        layer
            .forward_step(&mut st, &BitMatrix::zeros(1, 1))
            .unwrap();
        assert!((st.v_mem.get(0, 0) - 0.45).abs() < 1e-7);
    }

    #[test]
    fn shape_mismatch_is_structural() {
        let layer = single(0.3, 0.1);
        let mut st = LifLayerState::new(1, 1);
        assert!(matches!(
            layer.forward_step(&mut st, &BitMatrix::zeros(1, 2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn matches_scalar_reference() {
        let mut rng = stream(11, Stream::Init);
        let neuron = NeuronConfig::new(0.15, 0.6).unwrap();
        let layer = LifLayer::random(4, 3, neuron, &mut rng).unwrap();
        let (batch, steps) = (2, 20);
        let inputs: Vec<BitMatrix> = (0..steps)
            .map(|_| BitMatrix::from_fn(batch, 4, |_, _| rng.gen_bool(0.6)))
            .collect();

        let mut st = LifLayerState::new(batch, 3);
        let got: Vec<BitMatrix> = inputs
            .iter()
            .map(|x| layer.forward_step(&mut st, x).unwrap().spikes)
            .collect();

        // Scalar replay of the LIF recursion.
        let mut v = vec![[0.0f32; 3]; batch];
        for (t, x) in inputs.iter().enumerate() {
            for (b, vb) in v.iter_mut().enumerate() {
                for (m, vm) in vb.iter_mut().enumerate() {
                    let mut z = 0.0f32;
                    for j in 0..4 {
                        if x.get(b, j) {
                            z += layer.weights.get(m, j);
                        }
                    }
                    *vm = (1.0 - neuron.alpha) * *vm + z;
                    let fired = *vm >= neuron.v_th;
                    assert_eq!(fired, got[t].get(b, m), "t={t} b={b} m={m}");
                    if fired {
                        *vm = 0.0;
                    }
                }
            }
        }
    }

    #[test]
    fn surrogate_values() {
        assert_eq!(surrogate_derivative(1.0, 1.0), 0.25);
        let far = surrogate_derivative(51.0, 1.0);
        assert!(far.is_finite() && (0.0..1e-20).contains(&far));
        let expected = (-1.0f64).exp() / (1.0 + (-1.0f64).exp()).powi(2);
        assert!((surrogate_derivative(2.0, 1.0) as f64 - expected).abs() < 1e-7);
        assert!((expected - 0.19661).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        assert!(NeuronConfig::new(1.0, 1.0).is_err());
        assert!(NeuronConfig::new(-0.1, 1.0).is_err());
        assert!(NeuronConfig::new(0.0, 0.0).is_err());
        assert!(NeuronConfig::new(0.0, 1.0).is_ok());
    }
}
