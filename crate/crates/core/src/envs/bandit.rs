use crate::mdp::{Environment, MdpError, SimRng, Transition};

/// One state, two arms, one step per episode: a1 pays 1, a2 pays 0.
#[derive(Clone, Debug, Default)]
pub struct AdviceBandit {
    done: bool,
}

impl AdviceBandit {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Environment for AdviceBandit {
    fn action_count(&self) -> usize {
        2
    }

    fn state_count(&self) -> usize {
        1
    }

    fn reset(&mut self, _rng: &mut SimRng) -> usize {
        self.done = false;
        0
    }

    fn step(&mut self, action: usize, _rng: &mut SimRng) -> Result<Transition, MdpError> {
        if self.done {
            return Err(MdpError::StepAfterTerminal);
        }
        let reward = match action {
            0 => 1.0,
            1 => 0.0,
            _ => return Err(MdpError::InvalidAction { action, actions: 2 }),
        };
        self.done = true;
        Ok(Transition {
            next_state: 0,
            reward,
            done: true,
            steps: 1,
        })
    }
}
