use super::{AgentError, Learner};
use crate::advice::{mix_policies, Distribution};
use crate::mdp::{EpisodeTrace, Experience, MdpError, Policy, SimRng};

/// How ε-greedy spreads its exploration mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exploration {
    /// ε spread over every action, the greedy one included.
    AllActions,
    /// ε spread over the non-greedy actions only, i.e. `{1-ε, ε}` with two actions.
    OtherActions,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TabularConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub exploration: Exploration,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 1.0,
            epsilon: 0.1,
            exploration: Exploration::AllActions,
        }
    }
}

/// Dense state x action value table, zero-initialized.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    states: usize,
    actions: usize,
    q: Vec<f64>,
    pub config: TabularConfig,
}

impl QTable {
    pub fn new(states: usize, actions: usize, config: TabularConfig) -> Result<Self, AgentError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(config.alpha) || !unit(config.gamma) || !unit(config.epsilon) {
            return Err(AgentError::Config(format!(
                "alpha, gamma and epsilon must lie in [0, 1], got {config:?}"
            )));
        }
        if states == 0 || actions == 0 {
            return Err(AgentError::Config("empty Q-table".into()));
        }
        Ok(Self {
            states,
            actions,
            q: vec![0.0; states * actions],
            config,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.q[state * self.actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        assert!(value.is_finite(), "Q-values must stay finite");
        self.q[state * self.actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.q[state * self.actions..(state + 1) * self.actions]
    }

    /// Highest-valued action, lowest id on ties.
    pub fn greedy(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn epsilon_greedy(&self, state: usize) -> Distribution {
        let eps = self.config.epsilon;
        let n = self.actions;
        let greedy = self.greedy(state);
        let probs = match self.config.exploration {
            Exploration::AllActions => (0..n)
                .map(|a| eps / n as f64 + if a == greedy { 1.0 - eps } else { 0.0 })
                .collect(),
            Exploration::OtherActions if n == 1 => vec![1.0],
            Exploration::OtherActions => (0..n)
                .map(|a| if a == greedy { 1.0 - eps } else { eps / (n - 1) as f64 })
                .collect(),
        };
        Distribution::from_weights(probs).expect("epsilon-greedy weights are valid")
    }

    fn check(&self, e: &Experience) -> Result<(), AgentError> {
        if e.state >= self.states || e.next_state >= self.states {
            return Err(AgentError::Config(format!("state out of range in {e:?}")));
        }
        if e.action >= self.actions {
            return Err(MdpError::InvalidAction {
                action: e.action,
                actions: self.actions,
            }
            .into());
        }
        Ok(())
    }

    fn nudge(&mut self, e: &Experience, bootstrap: f64) {
        let old = self.get(e.state, e.action);
        let target = e.total_reward() + self.config.gamma * bootstrap;
        self.set(e.state, e.action, old + self.config.alpha * (target - old));
    }

    /// `Q(s,a) += α (r + γ max_a' Q(s',a') - Q(s,a))`; terminal transitions bootstrap 0.
    pub fn q_update(&mut self, e: &Experience) -> Result<(), AgentError> {
        self.check(e)?;
        let bootstrap = if e.done {
            0.0
        } else {
            self.row(e.next_state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        self.nudge(e, bootstrap);
        Ok(())
    }

    /// `Q(s,a) += α (r + γ Q(s',a') - Q(s,a))` with `a'` the action actually
    /// executed next (after advice); `None` on terminal transitions.
    pub fn sarsa_update(&mut self, e: &Experience, next_action: Option<usize>) -> Result<(), AgentError> {
        self.check(e)?;
        let bootstrap = match (e.done, next_action) {
            (true, _) => 0.0,
            (false, Some(a)) if a < self.actions => self.get(e.next_state, a),
            (false, Some(a)) => {
                return Err(MdpError::InvalidAction {
                    action: a,
                    actions: self.actions,
                }
                .into())
            }
            (false, None) => return Err(AgentError::Config("SARSA needs the next action".into())),
        };
        self.nudge(e, bootstrap);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TabularKind {
    QLearning,
    Sarsa,
}

/// ε-greedy tabular learner. Deterministic advice is executed as is; other
/// advice is mixed with the ε-greedy distribution.
#[derive(Clone, Debug)]
pub struct TabularAgent {
    pub kind: TabularKind,
    pub table: QTable,
}

impl TabularAgent {
    pub fn new(kind: TabularKind, states: usize, actions: usize, config: TabularConfig) -> Result<Self, AgentError> {
        Ok(Self {
            kind,
            table: QTable::new(states, actions, config)?,
        })
    }

    /// Applies the update rule along a finished episode.
    pub fn learn(&mut self, trace: &EpisodeTrace) -> Result<(), AgentError> {
        let xs = &trace.experiences;
        for (t, e) in xs.iter().enumerate() {
            match self.kind {
                TabularKind::QLearning => self.table.q_update(e)?,
                TabularKind::Sarsa => {
                    let next = xs.get(t + 1).map(|n| n.action);
                    if !e.done && next.is_none() {
                        // Truncated episode: no executed successor action to bootstrap on.
                        continue;
                    }
                    self.table.sarsa_update(e, next)?;
                }
            }
        }
        Ok(())
    }
}

impl Policy for TabularAgent {
    fn choose(
        &mut self,
        state: usize,
        _observation: &[f64],
        advice: &Distribution,
        rng: &mut SimRng,
    ) -> Result<usize, MdpError> {
        if let Some(forced) = advice.as_one_hot() {
            return Ok(forced);
        }
        let own = self.table.epsilon_greedy(state);
        let mixed = mix_policies(&own, advice).map_err(|e| MdpError::Policy(e.to_string()))?;
        Ok(mixed.sample(rng))
    }
}

impl Learner for TabularAgent {
    fn end_episode(&mut self, trace: EpisodeTrace) -> Result<(), AgentError> {
        self.learn(&trace)
    }

    fn policy_at(&self, state: usize, _observation: &[f64]) -> Result<Distribution, AgentError> {
        Ok(self.table.epsilon_greedy(state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(state: usize, action: usize, reward: f64, next_state: usize, done: bool) -> Experience {
        Experience {
            state,
            observation: vec![0.0; 2],
            action,
            reward,
            human_reward: 0.0,
            next_state,
            done,
            advice: Distribution::uniform(2),
            advised: false,
            steps: 1,
        }
    }

    fn table(alpha: f64, epsilon: f64) -> QTable {
        QTable::new(
            2,
            2,
            TabularConfig {
                alpha,
                epsilon,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn epsilon_greedy_shapes() {
        let mut t = table(0.1, 0.0);
        t.set(0, 0, 1.0);
        assert_eq!(t.epsilon_greedy(0).as_one_hot(), Some(0));
        t.config.epsilon = 1.0;
        assert!(t.epsilon_greedy(0).is_uniform());
        t.config.epsilon = 0.1;
        let d = t.epsilon_greedy(0);
        assert!((d.prob(0) - 0.95).abs() < 1e-12 && (d.prob(1) - 0.05).abs() < 1e-12);
        t.config.exploration = Exploration::OtherActions;
        let d = t.epsilon_greedy(0);
        assert!((d.prob(0) - 0.9).abs() < 1e-12 && (d.prob(1) - 0.1).abs() < 1e-12);
        // Ties go to the lowest id.
        assert_eq!(table(0.1, 0.0).greedy(1), 0);
    }

    #[test]
    fn zero_alpha_leaves_table_unchanged() {
        let mut t = table(0.0, 0.1);
        t.set(0, 1, 3.0);
        let before = t.clone();
        t.q_update(&exp(0, 1, 5.0, 1, false)).unwrap();
        t.sarsa_update(&exp(0, 1, 5.0, 1, false), Some(0)).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn update_rules() {
        let mut t = table(0.5, 0.1);
        t.set(1, 0, 10.0);
        t.set(1, 1, -10.0);
        t.q_update(&exp(0, 1, 0.0, 1, false)).unwrap();
        assert_eq!(t.get(0, 1), 5.0);
        let mut s = table(0.5, 0.1);
        s.set(1, 0, 10.0);
        s.set(1, 1, -10.0);
        s.sarsa_update(&exp(0, 1, 0.0, 1, false), Some(1)).unwrap();
        assert_eq!(s.get(0, 1), -5.0);
        // Terminal bootstraps zero.
        s.sarsa_update(&exp(1, 0, 10.0, 1, true), None).unwrap();
        assert_eq!(s.get(1, 0), 10.0);
        assert!(s.sarsa_update(&exp(0, 0, 0.0, 1, false), None).is_err());
    }

    #[test]
    fn forced_advice_bypasses_exploration() {
        use rand::SeedableRng;
        let mut agent = TabularAgent::new(
            TabularKind::Sarsa,
            2,
            2,
            TabularConfig {
                epsilon: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        // Greedy is a1, yet one-hot advice on a2 is executed even with ε = 0.
        let a = agent
            .choose(0, &[1.0, 0.0], &Distribution::one_hot(2, 1), &mut rng)
            .unwrap();
        assert_eq!(a, 1);
    }
}
