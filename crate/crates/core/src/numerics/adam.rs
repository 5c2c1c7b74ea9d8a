use super::{Gradients, NetShape, NumericsError, Params, PolicyNet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Params,
    pub v: Params,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: &NetShape, config: AdamConfig) -> Self {
        Self {
            config,
            m: Params::zeros(shape),
            v: Params::zeros(shape),
            t: 0,
        }
    }
}

/// One bias-corrected Adam step. Nothing is modified when the gradient or the
/// result contains a non-finite value.
pub fn adam_step(net: &mut PolicyNet, grads: &Gradients, state: &mut AdamState) -> Result<(), NumericsError> {
    let shape = *net.shape();
    if !grads.matches(&shape) {
        return Err(NumericsError::ShapeMismatch("gradients"));
    }
    if !state.m.matches(&shape) || !state.v.matches(&shape) {
        return Err(NumericsError::ShapeMismatch("optimizer state"));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(NumericsError::NonFiniteGradient(grads.name_of(i)));
    }

    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.t + 1;
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);

    let mut m = state.m.clone();
    let mut v = state.v.clone();
    let mut params = net.params().clone();
    for (((p, g), m), v) in params.iter_mut().zip(grads.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(NumericsError::NonFiniteParameter(params.name_of(i)));
    }

    *net.params_mut() = params;
    state.m = m;
    state.v = v;
    state.t = t;
    Ok(())
}
