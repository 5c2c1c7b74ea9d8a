use rand::Rng;

use super::NumericsError;
use crate::advice::Distribution;
use crate::mdp::{EpisodeTrace, SimRng};

/// Lower bound on gated outputs of advised actions, and on probabilities fed to `ln`.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl NetShape {
    pub const DEFAULT_HIDDEN: usize = 100;

    pub fn new(input: usize, hidden: usize, actions: usize) -> Self {
        Self { input, hidden, actions }
    }

    /// Lengths of `w1`, `b1`, `w2`, `b2`.
    pub fn tensor_lens(&self) -> [usize; 4] {
        [
            self.hidden * self.input,
            self.hidden,
            self.actions * self.hidden,
            self.actions,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensor_lens().iter().sum()
    }
}

/// Weights and biases of both layers, row-major: `w1[j * input + k]` is the
/// weight from input `k` to hidden unit `j`, `w2[i * hidden + j]` from hidden
/// unit `j` to action `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients share the parameter layout.
pub type Gradients = Params;

impl Params {
    pub const NAMES: [&'static str; 4] = ["w1", "b1", "w2", "b2"];

    pub fn zeros(shape: &NetShape) -> Self {
        let [w1, b1, w2, b2] = shape.tensor_lens();
        Self {
            w1: vec![0.0; w1],
            b1: vec![0.0; b1],
            w2: vec![0.0; w2],
            b2: vec![0.0; b2],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn matches(&self, shape: &NetShape) -> bool {
        self.tensors().iter().map(|t| t.len()).eq(shape.tensor_lens())
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    /// Name like `w2[7]` of the flat parameter at `index`.
    pub fn name_of(&self, index: usize) -> String {
        let mut offset = index;
        for (name, t) in Self::NAMES.iter().zip(self.tensors()) {
            if offset < t.len() {
                return format!("{name}[{offset}]");
            }
            offset -= t.len();
        }
        format!("#{index}")
    }

    pub fn fill(&mut self, value: f64) {
        self.iter_mut().for_each(|x| *x = value);
    }
}

/// Two-layer advice-gated policy network.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    shape: NetShape,
    params: Params,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub advice: Vec<f64>,
    pub h1: Vec<f64>,
    /// Pre-sigmoid logits `W2 h1 + b2`.
    pub logits: Vec<f64>,
    pub sigmoid: Vec<f64>,
    /// Gated outputs ŷ after the floor.
    pub gated: Vec<f64>,
    /// Normalized output y.
    pub output: Vec<f64>,
}

impl ForwardTrace {
    pub fn distribution(&self) -> Distribution {
        Distribution::from_weights(self.output.clone()).expect("forward output is a distribution")
    }

    /// True where the floor, not the network, determined ŷ.
    pub fn is_floored(&self, action: usize) -> bool {
        self.advice[action] > 0.0 && self.sigmoid[action] * self.advice[action] < PROB_FLOOR
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<(), NumericsError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(NumericsError::NonFiniteInput { what, index }),
        None => Ok(()),
    }
}

impl PolicyNet {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(shape: NetShape, rng: &mut SimRng) -> Self {
        let mut params = Params::zeros(&shape);
        let b1 = 1.0 / (shape.input as f64).sqrt();
        params.w1.iter_mut().for_each(|w| *w = rng.random_range(-b1..b1));
        let b2 = 1.0 / (shape.hidden as f64).sqrt();
        params.w2.iter_mut().for_each(|w| *w = rng.random_range(-b2..b2));
        Self { shape, params }
    }

    pub fn zeros(shape: NetShape) -> Self {
        Self {
            params: Params::zeros(&shape),
            shape,
        }
    }

    pub fn from_params(shape: NetShape, params: Params) -> Result<Self, NumericsError> {
        if !params.matches(&shape) {
            return Err(NumericsError::ShapeMismatch("parameters"));
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFiniteParameter(params.name_of(i)));
        }
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Direct parameter access. Callers keep the values finite.
    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn forward(&self, state: &[f64], advice: &Distribution) -> Result<ForwardTrace, NumericsError> {
        self.forward_weights(state, advice.probs())
    }

    /// Forward pass with advice given as raw non-negative weights.
    pub fn forward_weights(&self, state: &[f64], advice: &[f64]) -> Result<ForwardTrace, NumericsError> {
        let NetShape { input, hidden, actions } = self.shape;
        if state.len() != input {
            return Err(NumericsError::Dimension {
                what: "state",
                expected: input,
                got: state.len(),
            });
        }
        if advice.len() != actions {
            return Err(NumericsError::Dimension {
                what: "advice",
                expected: actions,
                got: advice.len(),
            });
        }
        check_finite(state, "state")?;
        check_finite(advice, "advice")?;
        if advice.iter().any(|&a| a < 0.0) || !(advice.iter().sum::<f64>() > 0.0) {
            return Err(NumericsError::InvalidAdvice);
        }

        let p = &self.params;
        let mut h1 = p.b1.clone();
        // Inputs are mostly one-hot; skip the zeros.
        for (k, &s) in state.iter().enumerate() {
            if s != 0.0 {
                for (j, h) in h1.iter_mut().enumerate() {
                    *h += p.w1[j * input + k] * s;
                }
            }
        }
        h1.iter_mut().for_each(|h| *h = h.tanh());

        let logits: Vec<f64> = (0..actions)
            .map(|i| {
                let row = &p.w2[i * hidden..(i + 1) * hidden];
                p.b2[i] + row.iter().zip(&h1).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        let sig: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let gated: Vec<f64> = sig
            .iter()
            .zip(advice)
            .map(|(&s, &a)| if a > 0.0 { (s * a).max(PROB_FLOOR) } else { 0.0 })
            .collect();
        let total: f64 = gated.iter().sum();
        let output = gated.iter().map(|g| g / total).collect();

        Ok(ForwardTrace {
            input: state.to_vec(),
            advice: advice.to_vec(),
            h1,
            logits,
            sigmoid: sig,
            gated,
            output,
        })
    }

    /// The learner's own policy: the output under uniform advice.
    pub fn learned_policy(&self, state: &[f64]) -> Result<Distribution, NumericsError> {
        Ok(self
            .forward(state, &Distribution::uniform(self.shape.actions))?
            .distribution())
    }
}

/// Adds the gradient of `-weight * ln y(action)` for one decision to `grads`
/// and returns that loss term. Advice is a constant.
pub fn accumulate_step(
    net: &PolicyNet,
    state: &[f64],
    advice: &[f64],
    action: usize,
    weight: f64,
    grads: &mut Gradients,
) -> Result<f64, NumericsError> {
    let NetShape { input, hidden, actions } = *net.shape();
    if action >= actions {
        return Err(NumericsError::Action { action, actions });
    }
    if !grads.matches(net.shape()) {
        return Err(NumericsError::ShapeMismatch("gradients"));
    }
    let tr = net.forward_weights(state, advice)?;
    let y = tr.output[action];
    if y < PROB_FLOOR {
        // ln is taken on the floor, which does not depend on the parameters.
        return Ok(-weight * PROB_FLOOR.ln());
    }
    let loss = -weight * y.ln();
    if weight == 0.0 {
        return Ok(loss);
    }

    // dL/dz_i with z the logits: d ln y_a / d z_i = [i=a](1-σ_a) - y_i(1-σ_i),
    // restricted to entries where ŷ_i actually depends on z_i.
    let live = |i: usize| tr.advice[i] > 0.0 && !tr.is_floored(i);
    let dz: Vec<f64> = (0..actions)
        .map(|i| {
            let one_minus = sigmoid(-tr.logits[i]);
            let mut g = 0.0;
            if live(i) {
                g -= tr.output[i] * one_minus;
                if i == action {
                    g += one_minus;
                }
            }
            -weight * g
        })
        .collect();

    let p = net.params();
    let mut dh = vec![0.0; hidden];
    for (i, &g) in dz.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grads.b2[i] += g;
        let row = i * hidden;
        for j in 0..hidden {
            grads.w2[row + j] += g * tr.h1[j];
            dh[j] += p.w2[row + j] * g;
        }
    }
    let da: Vec<f64> = dh.iter().zip(&tr.h1).map(|(d, h)| d * (1.0 - h * h)).collect();
    for (j, &d) in da.iter().enumerate() {
        grads.b1[j] += d;
    }
    for (k, &s) in state.iter().enumerate() {
        if s != 0.0 {
            for (j, &d) in da.iter().enumerate() {
                grads.w1[j * input + k] += d * s;
            }
        }
    }
    Ok(loss)
}

/// Adds the gradient of `-Σ_t R_t ln y_t(a_t)` over one episode to `grads`
/// and returns the loss. Each step is evaluated at its recorded observation.
pub fn accumulate_gradient(
    net: &PolicyNet,
    trace: &EpisodeTrace,
    returns: &[f64],
    grads: &mut Gradients,
) -> Result<f64, NumericsError> {
    if trace.len() != returns.len() {
        return Err(NumericsError::ReturnsLength {
            trace: trace.len(),
            returns: returns.len(),
        });
    }
    let mut loss = 0.0;
    for (e, &ret) in trace.experiences.iter().zip(returns) {
        loss += accumulate_step(net, &e.observation, e.advice.probs(), e.action, ret, grads)?;
    }
    Ok(loss)
}

/// Fresh gradient of one episode, with its loss.
pub fn episode_gradient(
    net: &PolicyNet,
    trace: &EpisodeTrace,
    returns: &[f64],
) -> Result<(Gradients, f64), NumericsError> {
    let mut grads = Gradients::zeros(net.shape());
    let loss = accumulate_gradient(net, trace, returns, &mut grads)?;
    Ok((grads, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Experience;
    use rand::SeedableRng;

    fn random_net(shape: NetShape, seed: u64) -> PolicyNet {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut net = PolicyNet::new(shape, &mut rng);
        // Non-zero biases so every path of the gradient is exercised.
        let p = net.params_mut();
        for b in p.b1.iter_mut().chain(p.b2.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        net
    }

    /// Scalar re-implementation of the forward pass, one entry at a time.
    fn scalar_forward(net: &PolicyNet, s: &[f64], advice: &[f64]) -> Vec<f64> {
        let NetShape { input, hidden, actions } = *net.shape();
        let p = net.params();
        let mut h = vec![0.0; hidden];
        for j in 0..hidden {
            let mut acc = p.b1[j];
            for k in 0..input {
                acc += p.w1[j * input + k] * s[k];
            }
            h[j] = acc.tanh();
        }
        let mut yhat = vec![0.0; actions];
        for i in 0..actions {
            let mut z = p.b2[i];
            for j in 0..hidden {
                z += p.w2[i * hidden + j] * h[j];
            }
            yhat[i] = advice[i] / (1.0 + (-z).exp());
        }
        let total: f64 = yhat.iter().sum();
        yhat.iter().map(|v| v / total).collect()
    }

    #[test]
    fn zero_net_uniform_advice_is_uniform() {
        let net = PolicyNet::zeros(NetShape::new(3, 4, 5));
        let tr = net.forward(&[1.0, 0.0, 0.0], &Distribution::uniform(5)).unwrap();
        for y in &tr.output {
            assert!((y - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_advice_is_exact() {
        let net = random_net(NetShape::new(3, 4, 5), 1);
        let tr = net.forward(&[0.3, -1.0, 2.0], &Distribution::one_hot(5, 2)).unwrap();
        assert_eq!(tr.output, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_scalar_oracle() {
        let net = random_net(NetShape::new(6, 7, 5), 42);
        let s = [0.5, -0.25, 1.0, 0.0, 2.0, -1.5];
        let tr = net.forward(&s, &Distribution::uniform(5)).unwrap();
        let oracle = scalar_forward(&net, &s, &[0.2; 5]);
        assert!((tr.output.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in tr.output.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = PolicyNet::zeros(NetShape::new(2, 3, 2));
        let u = Distribution::uniform(2);
        assert!(matches!(net.forward(&[1.0], &u), Err(NumericsError::Dimension { .. })));
        assert!(matches!(
            net.forward(&[1.0, f64::NAN], &u),
            Err(NumericsError::NonFiniteInput {
                what: "state",
                index: 1
            })
        ));
        assert!(matches!(
            net.forward(&[1.0, 0.0], &Distribution::uniform(3)),
            Err(NumericsError::Dimension { what: "advice", .. })
        ));
        assert_eq!(
            net.forward_weights(&[1.0, 0.0], &[0.0, 0.0]),
            Err(NumericsError::InvalidAdvice)
        );
    }

    #[test]
    fn floor_keeps_advised_action_alive() {
        let mut net = PolicyNet::zeros(NetShape::new(1, 1, 2));
        net.params_mut().b2 = vec![-800.0, 0.0];
        let tr = net.forward(&[1.0], &Distribution::one_hot(2, 0)).unwrap();
        assert_eq!(tr.output, vec![1.0, 0.0]);
        assert!(tr.is_floored(0));
        let mut g = Gradients::zeros(net.shape());
        let loss = accumulate_step(&net, &[1.0], &[0.5, 0.5], 0, 1.0, &mut g).unwrap();
        assert!(loss.is_finite());
        assert!(g.iter().all(|v| v.is_finite()));
    }

    fn exp(state: usize, action: usize, advice: Distribution) -> Experience {
        let mut observation = vec![0.0; 3];
        observation[state] = 1.0;
        Experience {
            state,
            observation,
            action,
            reward: 0.0,
            human_reward: 0.0,
            next_state: state,
            done: false,
            advice,
            advised: false,
            steps: 1,
        }
    }

    #[test]
    fn zero_return_gives_zero_gradient() {
        let net = random_net(NetShape::new(3, 4, 2), 5);
        let trace = EpisodeTrace {
            seed: 0,
            experiences: vec![exp(1, 0, Distribution::uniform(2))],
        };
        let (g, loss) = episode_gradient(&net, &trace, &[0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn one_hot_advice_on_taken_action_gives_zero_gradient() {
        let net = random_net(NetShape::new(3, 4, 3), 6);
        let trace = EpisodeTrace {
            seed: 0,
            experiences: vec![exp(2, 1, Distribution::one_hot(3, 1))],
        };
        let (g, loss) = episode_gradient(&net, &trace, &[7.5]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn returns_length_checked() {
        let net = PolicyNet::zeros(NetShape::new(2, 2, 2));
        let trace = EpisodeTrace {
            seed: 0,
            experiences: vec![exp(0, 0, Distribution::uniform(2))],
        };
        assert!(matches!(
            episode_gradient(&net, &trace, &[1.0, 2.0]),
            Err(NumericsError::ReturnsLength { .. })
        ));
    }

    #[test]
    fn parameter_names() {
        let p = Params::zeros(&NetShape::new(3, 4, 2));
        assert_eq!(p.name_of(0), "w1[0]");
        assert_eq!(p.name_of(12), "b1[0]");
        assert_eq!(p.name_of(16), "w2[0]");
        assert_eq!(p.name_of(25), "b2[1]");
    }
}
