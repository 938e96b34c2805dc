use super::Tensor;
use crate::error::{Error, Result};

/// First and second moment estimates for a list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self::with_hyper(shapes, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(shapes: &[(usize, usize)], beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect();
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Number of completed steps.
    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is
/// non-finite or a shape disagrees with the state.
pub fn adam_step(params: &mut [&mut Tensor], grads: &[Tensor], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            (params.len(), grads.len()),
            (state.m.len(), state.m.len()),
        ));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient for parameter {i}")));
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((w, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::from_rows(&[&[1.0, -2.0]]);
        let mut st = AdamState::new(&[(1, 2)]);
        adam_step(&mut [&mut p], &[Tensor::zeros(1, 2)], &mut st, 0.1).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Tensor::from_rows(&[&[0.0, 0.0, 0.0]]);
        let mut st = AdamState::new(&[(1, 3)]);
        let g = Tensor::from_rows(&[&[0.3, -5.0, 1e-3]]);
        adam_step(&mut [&mut p], &[g], &mut st, 0.01).unwrap();
        // m_hat = g and v_hat = g^2 after one step, so each entry moves by
        // lr * |g| / (|g| + eps).
        for (w, gi) in p.data().iter().zip([0.3f64, -5.0, 1e-3]) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert_abs_diff_eq!(*w, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn moments_accumulate() {
        let mut p = Tensor::scalar(0.0);
        let mut st = AdamState::new(&[(1, 1)]);
        adam_step(&mut [&mut p], &[Tensor::scalar(1.0)], &mut st, 0.1).unwrap();
        adam_step(&mut [&mut p], &[Tensor::scalar(-1.0)], &mut st, 0.1).unwrap();
        let (b1, b2) = (0.9f64, 0.999f64);
        let m1 = 0.1;
        let v1 = 0.001;
        let m2 = b1 * m1 - 0.1;
        let v2 = b2 * v1 + 0.001;
        let step2 = (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + 1e-8);
        let expected = -0.1 * (1.0 / (1.0 + 1e-8)) - 0.1 * step2;
        assert_abs_diff_eq!(p.item(), expected, epsilon = 1e-14);
        assert_eq!(st.step(), 2);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut p = Tensor::from_rows(&[&[1.0, 2.0]]);
        let mut st = AdamState::new(&[(1, 2)]);
        let err = adam_step(&mut [&mut p], &[Tensor::from_rows(&[&[0.5, f64::NAN]])], &mut st, 0.1);
        assert!(matches!(err, Err(Error::Numeric(_))));
        assert_eq!(p.data(), &[1.0, 2.0]);
        assert_eq!(st.step(), 0);
    }
}
