use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    pub lr: f32,
    pub weight_decay: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Hyperparams {
    pub fn new(lr: f32, weight_decay: f32) -> Result<Self> {
        let hp = Hyperparams {
            lr,
            weight_decay,
            ..Hyperparams::default()
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "invalid optimiser settings {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 5e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments accumulated over the time steps of one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamTimeState {
    pub m: Matrix,
    pub v: Matrix,
    pub step_count: u32,
}

impl AdamTimeState {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamTimeState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step_count: 0,
        }
    }

    /// Start of a new batch: moments and step count go back to zero.
    pub fn reset(&mut self) {
        self.m.fill(0.0);
        self.v.fill(0.0);
        self.step_count = 0;
    }
}

/// One Adam step with decoupled weight decay:
/// `W ← W − lr·(m̂/(√v̂ + ε) + weight_decay·W)`.
///
/// `layer` only labels the error when `grad` holds a non-finite entry; in that
/// case nothing is modified.
pub fn adam_timestep_update(
    w: &mut Matrix,
    grad: &Matrix,
    state: &mut AdamTimeState,
    hp: &Hyperparams,
    layer: usize,
) -> Result<()> {
    let (rows, cols) = w.shape();
    grad.expect_shape(rows, cols, "gradient")?;
    state.m.expect_shape(rows, cols, "first moment")?;
    state.v.expect_shape(rows, cols, "second moment")?;
    if let Some(bad) = grad.as_slice().iter().find(|g| !g.is_finite()) {
        return Err(Error::Numerical {
            layer,
            batch: None,
            step: None,
            detail: format!("gradient entry {bad}"),
        });
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    let (b1, b2) = (hp.beta1, hp.beta2);
    let (lr, wd, eps) = (hp.lr, hp.weight_decay, hp.epsilon);

    let ws = w.as_mut_slice();
    let ms = state.m.as_mut_slice();
    let vs = state.v.as_mut_slice();
    for (((wi, &g), mi), vi) in ws.iter_mut().zip(grad.as_slice()).zip(ms).zip(vs) {
        *mi = b1 * *mi + (1.0 - b1) * g;
        *vi = b2 * *vi + (1.0 - b2) * g * g;
        let m_hat = *mi / c1;
        let v_hat = *vi / c2;
        *wi -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *wi);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut w = Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let before = w.clone();
        let mut st = AdamTimeState::new(1, 3);
        let hp = Hyperparams::new(1e-2, 0.0).unwrap();
        adam_timestep_update(&mut w, &Matrix::zeros(1, 3), &mut st, &hp, 0).unwrap();
        assert_eq!(w, before);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let g = [0.3f32, -2.0, 1e-3];
        let mut w = Matrix::zeros(1, 3);
        let mut st = AdamTimeState::new(1, 3);
        let hp = Hyperparams::new(1e-3, 0.0).unwrap();
        adam_timestep_update(
            &mut w,
            &Matrix::from_vec(1, 3, g.to_vec()).unwrap(),
            &mut st,
            &hp,
            0,
        )
        .unwrap();
        for (i, &gi) in g.iter().enumerate() {
            // m̂ = g, v̂ = g², so the step is lr·g/(|g|+ε).
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((w.get(0, i) - expected).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn pure_weight_decay() {
        let mut w = Matrix::from_vec(1, 2, vec![1.0, -3.0]).unwrap();
        let mut st = AdamTimeState::new(1, 2);
        let hp = Hyperparams::new(0.5, 1e-4).unwrap();
        adam_timestep_update(&mut w, &Matrix::zeros(1, 2), &mut st, &hp, 0).unwrap();
        let f = 1.0 - 0.5 * 1e-4;
        assert!((w.get(0, 0) - f).abs() < 1e-7);
        assert!((w.get(0, 1) + 3.0 * f).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut w = Matrix::zeros(1, 2);
        let mut st = AdamTimeState::new(1, 2);
        let g = Matrix::from_vec(1, 2, vec![0.0, f32::NAN]).unwrap();
        let err =
            adam_timestep_update(&mut w, &g, &mut st, &Hyperparams::default(), 1).unwrap_err();
        assert!(matches!(err, Error::Numerical { layer: 1, .. }));
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn reset_clears_moments() {
        let mut w = Matrix::zeros(1, 1);
        let mut st = AdamTimeState::new(1, 1);
        let g = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        adam_timestep_update(&mut w, &g, &mut st, &Hyperparams::default(), 0).unwrap();
        assert!(st.v.get(0, 0) > 0.0);
        st.reset();
        assert_eq!(st, AdamTimeState::new(1, 1));
    }
}
