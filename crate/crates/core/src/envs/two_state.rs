use crate::mdp::{Environment, MdpError, SimRng, Transition};

/// Two states, two actions.
///
/// | state | action | reward | next     |
/// |-------|--------|--------|----------|
/// | s1    | a1     | 1      | terminal |
/// | s1    | a2     | 0      | s2       |
/// | s2    | a1     | 10     | terminal |
/// | s2    | a2     | -10    | terminal |
///
/// States are `0` (s1) and `1` (s2); actions `0` (a1) and `1` (a2). The
/// terminal transitions report `next_state` equal to the state they left.
#[derive(Clone, Debug, Default)]
pub struct TwoStateEnv {
    state: usize,
    done: bool,
}

impl TwoStateEnv {
    pub const S1: usize = 0;
    pub const S2: usize = 1;
    pub const A1: usize = 0;
    pub const A2: usize = 1;

    pub fn new() -> Self {
        Self::default()
    }

    /// The full transition table as `(reward, next state or None if terminal)`.
    pub fn table(state: usize, action: usize) -> (f64, Option<usize>) {
        match (state, action) {
            (Self::S1, Self::A1) => (1.0, None),
            (Self::S1, Self::A2) => (0.0, Some(Self::S2)),
            (Self::S2, Self::A1) => (10.0, None),
            (Self::S2, Self::A2) => (-10.0, None),
            _ => unreachable!("two-state table queried with ({state}, {action})"),
        }
    }
}

impl Environment for TwoStateEnv {
    fn action_count(&self) -> usize {
        2
    }

    fn state_count(&self) -> usize {
        2
    }

    fn reset(&mut self, _rng: &mut SimRng) -> usize {
        self.state = Self::S1;
        self.done = false;
        self.state
    }

    fn step(&mut self, action: usize, _rng: &mut SimRng) -> Result<Transition, MdpError> {
        if self.done {
            return Err(MdpError::StepAfterTerminal);
        }
        if action >= 2 {
            return Err(MdpError::InvalidAction { action, actions: 2 });
        }
        let (reward, next) = Self::table(self.state, action);
        match next {
            Some(s) => self.state = s,
            None => self.done = true,
        }
        Ok(Transition {
            next_state: self.state,
            reward,
            done: self.done,
            steps: 1,
        })
    }
}
