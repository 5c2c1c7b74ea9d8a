use std::sync::Arc;

use rand::Rng;

use super::grid::{GridMap, Macro};
use crate::mdp::{one_hot, Environment, MdpError, SimRng, Transition};

/// Reward for every cell entered, the goal cell included.
pub const STEP_COST: f64 = -0.1;
/// Bonus for entering the goal cell.
pub const GOAL_REWARD: f64 = 100.0;
/// Primitive time-steps before an episode is cut off.
pub const MAX_EPISODE_STEPS: usize = 500;

/// How a cell is presented to the policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StateEncoding {
    /// One-hot over all cells.
    Cell,
    /// One-hot row followed by one-hot column; cells of a room share features.
    #[default]
    RowCol,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MacroOutcome {
    /// Cells entered, in order.
    pub cells: Vec<usize>,
    pub reward: f64,
    pub position: usize,
    pub done: bool,
}

/// Five Rooms over macro-actions. The state is the agent's cell index.
///
/// A macro that is defined where the agent stands walks the shortest in-room
/// path to its target; any other macro moves the agent to a uniformly random
/// non-wall neighbor. Every entered cell costs 0.1, entering the goal adds
/// 100, and the episode stops at the goal or after 500 primitive steps.
#[derive(Clone, Debug)]
pub struct FiveRoomsEnv {
    map: Arc<GridMap>,
    position: usize,
    steps: usize,
    done: bool,
    max_steps: usize,
    encoding: StateEncoding,
}

impl FiveRoomsEnv {
    pub fn new(map: Arc<GridMap>) -> Self {
        Self::with_encoding(map, StateEncoding::default())
    }

    pub fn with_encoding(map: Arc<GridMap>, encoding: StateEncoding) -> Self {
        let position = map.start();
        Self {
            map,
            position,
            steps: 0,
            done: false,
            max_steps: MAX_EPISODE_STEPS,
            encoding,
        }
    }

    pub fn encoding(&self) -> StateEncoding {
        self.encoding
    }

    pub fn map(&self) -> &Arc<GridMap> {
        &self.map
    }

    pub fn position(&self) -> usize {
        self.position
    }

    /// Primitive steps taken in this episode.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Places the agent on `cell` and clears the episode counters.
    pub fn teleport(&mut self, cell: usize) {
        assert!(!self.map.is_wall(cell), "cannot place the agent on a wall");
        self.position = cell;
        self.steps = 0;
        self.done = cell == self.map.goal();
    }

    pub fn macro_step(&mut self, m: Macro, rng: &mut SimRng) -> Result<MacroOutcome, MdpError> {
        if self.done {
            return Err(MdpError::StepAfterTerminal);
        }
        let planned = match self.map.macro_path(self.position, m) {
            Some(path) => path,
            None => {
                let options: Vec<usize> = self.map.neighbors(self.position).collect();
                vec![options[rng.random_range(0..options.len())]]
            }
        };
        let mut cells = Vec::with_capacity(planned.len());
        let mut reward = 0.0;
        for cell in planned {
            self.position = cell;
            self.steps += 1;
            cells.push(cell);
            if cell == self.map.goal() {
                reward += GOAL_REWARD;
                self.done = true;
                break;
            }
            if self.steps >= self.max_steps {
                self.done = true;
                break;
            }
        }
        // Summed as a count so that equal-length paths give bit-identical rewards.
        reward += cells.len() as f64 * STEP_COST;
        Ok(MacroOutcome {
            cells,
            reward,
            position: self.position,
            done: self.done,
        })
    }
}

impl Environment for FiveRoomsEnv {
    fn action_count(&self) -> usize {
        Macro::COUNT
    }

    fn state_count(&self) -> usize {
        self.map.cell_count()
    }

    fn observation_size(&self) -> usize {
        match self.encoding {
            StateEncoding::Cell => self.map.cell_count(),
            StateEncoding::RowCol => self.map.height() + self.map.width(),
        }
    }

    fn encode(&self, state: usize) -> Vec<f64> {
        match self.encoding {
            StateEncoding::Cell => one_hot(state, self.map.cell_count()),
            StateEncoding::RowCol => {
                let (row, col) = self.map.position(state);
                let h = self.map.height();
                let mut v = vec![0.0; h + self.map.width()];
                v[row] = 1.0;
                v[h + col] = 1.0;
                v
            }
        }
    }

    fn reset(&mut self, _rng: &mut SimRng) -> usize {
        self.position = self.map.start();
        self.steps = 0;
        self.done = false;
        self.position
    }

    fn step(&mut self, action: usize, rng: &mut SimRng) -> Result<Transition, MdpError> {
        let m = Macro::from_id(action).ok_or(MdpError::InvalidAction {
            action,
            actions: Macro::COUNT,
        })?;
        let out = self.macro_step(m, rng)?;
        Ok(Transition {
            next_state: out.position,
            reward: out.reward,
            done: out.done,
            steps: out.cells.len(),
        })
    }
}
