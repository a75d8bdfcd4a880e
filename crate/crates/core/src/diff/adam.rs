use super::{DiffError, Tensor};

/// Optimizer state for Adam: per-parameter first/second moments plus the
/// step counter and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    /// Fresh state with zero moments, one slot per parameter shape.
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
            second: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place; increments the step counter.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
) -> Result<(), DiffError> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(DiffError::shape(
            "adam_step",
            format!(
                "{} params, {} grads, {} moment slots",
                params.len(),
                grads.len(),
                state.first.len()
            ),
        ));
    }
    for ((p, g), (m, v)) in params
        .iter()
        .zip(grads)
        .zip(state.first.iter().zip(&state.second))
    {
        if !p.same_shape(g) || !p.same_shape(m) || !p.same_shape(v) {
            return Err(DiffError::shape("adam_step", "parameter/gradient/moment shapes differ"));
        }
    }

    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);

    for ((param, grad), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        let pd = param.data_mut();
        for (i, &g) in grad.data().iter().enumerate() {
            let mi = state.beta1 * m.data()[i] + (1.0 - state.beta1) * g;
            let vi = state.beta2 * v.data()[i] + (1.0 - state.beta2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            pd[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
