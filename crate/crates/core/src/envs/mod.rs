//! The two-state counterexample, the one-state advice bandit and Five Rooms.

mod bandit;
mod five_rooms;
mod grid;
mod two_state;

pub use bandit::AdviceBandit;
pub use five_rooms::{FiveRoomsEnv, MacroOutcome, StateEncoding, GOAL_REWARD, MAX_EPISODE_STEPS, STEP_COST};
pub use grid::{canonical_map, load_map, optimal_macro, CellKind, GridMap, Macro, MapError, MapOptions, CANONICAL_MAP};
pub use two_state::TwoStateEnv;
