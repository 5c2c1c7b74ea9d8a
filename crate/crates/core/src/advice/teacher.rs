use std::sync::Arc;

use rand::Rng;

use super::{AdviceError, AdviceEvent, AdviceLog, Distribution, EventKind};
use crate::envs::{optimal_macro, GridMap, Macro};
use crate::mdp::{Advice, AdviceSource, Decision, SimRng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdviceMode {
    /// One-hot advice; the agent must follow it.
    Deterministic,
    /// `mass` on the advised macro, the rest spread evenly.
    Stochastic { mass: f64 },
}

impl AdviceMode {
    pub const DEFAULT_STOCHASTIC_MASS: f64 = 0.99;
}

/// Simulated human teacher for Five Rooms.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherConfig {
    /// Probability that the teacher is present at a macro decision.
    pub availability: f64,
    /// Probability that a given piece of advice is correct.
    pub p_right: f64,
    /// Maximum number of advices over the whole run.
    pub budget: Option<u64>,
    pub mode: AdviceMode,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            availability: 0.05,
            p_right: 1.0,
            budget: None,
            mode: AdviceMode::Deterministic,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<(), AdviceError> {
        if !(0.0..=1.0).contains(&self.availability) {
            return Err(AdviceError::Config(format!(
                "availability must be in [0, 1], got {}",
                self.availability
            )));
        }
        if !(0.0..=1.0).contains(&self.p_right) {
            return Err(AdviceError::Config(format!(
                "p_right must be in [0, 1], got {}",
                self.p_right
            )));
        }
        if let AdviceMode::Stochastic { mass } = self.mode {
            if !(0.0..=1.0).contains(&mass) {
                return Err(AdviceError::Config(format!(
                    "stochastic advice mass must be in [0, 1], got {mass}"
                )));
            }
        }
        Ok(())
    }
}

/// Advises the optimal macro with probability `p_right`, otherwise the door
/// into the middle-left room, whatever room the agent is in.
#[derive(Clone, Debug)]
pub struct Teacher {
    config: TeacherConfig,
    map: Arc<GridMap>,
    wrong: Macro,
    remaining: Option<u64>,
    log: AdviceLog,
}

impl Teacher {
    pub fn new(config: TeacherConfig, map: Arc<GridMap>) -> Result<Self, AdviceError> {
        config.validate()?;
        let wrong = map
            .middle_left_door()
            .ok_or_else(|| AdviceError::Config("map has no door leading to a middle-left room".into()))?;
        Ok(Self {
            remaining: config.budget,
            config,
            map,
            wrong,
            log: AdviceLog::new(),
        })
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.config
    }

    /// Budget left, `None` for an unbudgeted teacher.
    pub fn remaining(&self) -> Option<u64> {
        self.remaining
    }

    pub fn log(&self) -> &AdviceLog {
        &self.log
    }

    /// The macro advised when the teacher is wrong.
    pub fn wrong_macro(&self) -> Macro {
        self.wrong
    }

    /// One teacher decision at the agent's cell `at.state`. Returns the uniform
    /// distribution when the teacher stays silent.
    pub fn teacher_advise(&mut self, at: &Decision, rng: &mut SimRng) -> Distribution {
        let actions = Macro::COUNT;
        let present = rng.random::<f64>() < self.config.availability;
        if !present || self.remaining == Some(0) {
            return Distribution::uniform(actions);
        }
        let advised = if rng.random::<f64>() < self.config.p_right {
            optimal_macro(&self.map, at.state)
        } else {
            self.wrong
        };
        if let Some(r) = self.remaining.as_mut() {
            *r -= 1;
        }
        self.log.push(AdviceEvent {
            episode: at.episode,
            step: at.step,
            kind: EventKind::Advice { action: advised.id() },
            remaining: self.remaining,
        });
        match self.config.mode {
            AdviceMode::Deterministic => Distribution::one_hot(actions, advised.id()),
            AdviceMode::Stochastic { mass } => {
                Distribution::smoothed(actions, advised.id(), mass).expect("mass validated with the config")
            }
        }
    }
}

impl AdviceSource for Teacher {
    fn advise(&mut self, at: &Decision, actions: usize, rng: &mut SimRng) -> Advice {
        debug_assert_eq!(actions, Macro::COUNT);
        let before = self.log.len();
        let dist = self.teacher_advise(at, rng);
        if self.log.len() > before {
            Advice::given(dist)
        } else {
            Advice::none(actions)
        }
    }

    fn interventions(&self) -> u64 {
        self.log.len() as u64
    }

    fn events(&self) -> &[AdviceEvent] {
        &self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::canonical_map;
    use rand::SeedableRng;

    fn teacher(cfg: TeacherConfig) -> Teacher {
        Teacher::new(cfg, Arc::new(canonical_map())).unwrap()
    }

    fn at(map: &GridMap, row: usize, col: usize) -> Decision {
        Decision {
            episode: 0,
            step: 0,
            state: map.index(row, col),
        }
    }

    #[test]
    fn absent_teacher_is_uniform_and_free() {
        let mut t = teacher(TeacherConfig {
            availability: 0.0,
            budget: Some(3),
            ..Default::default()
        });
        let map = canonical_map();
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..200 {
            assert!(t.teacher_advise(&at(&map, 1, 1), &mut rng).is_uniform());
        }
        assert_eq!(t.remaining(), Some(3));
        assert!(t.log().is_empty());
    }

    #[test]
    fn right_teacher_sends_goal_macro_in_bottom_room() {
        let mut t = teacher(TeacherConfig {
            availability: 1.0,
            ..Default::default()
        });
        let map = canonical_map();
        let mut rng = SimRng::seed_from_u64(2);
        let d = t.teacher_advise(&at(&map, 24, 5), &mut rng);
        assert_eq!(d.as_one_hot(), Some(Macro::Goal.id()));
    }

    #[test]
    fn wrong_teacher_points_to_middle_left_door() {
        let mut t = teacher(TeacherConfig {
            availability: 1.0,
            p_right: 0.0,
            ..Default::default()
        });
        let map = canonical_map();
        let mut rng = SimRng::seed_from_u64(3);
        for (r, c) in [(1, 1), (24, 5), (3, 20)] {
            let d = t.teacher_advise(&at(&map, r, c), &mut rng);
            assert_eq!(d.as_one_hot(), Some(Macro::Door2.id()));
        }
    }

    #[test]
    fn budget_caps_emissions() {
        let mut t = teacher(TeacherConfig {
            availability: 1.0,
            budget: Some(5),
            ..Default::default()
        });
        let map = canonical_map();
        let mut rng = SimRng::seed_from_u64(4);
        let advised = (0..50)
            .filter(|_| !t.teacher_advise(&at(&map, 1, 1), &mut rng).is_uniform())
            .count();
        assert_eq!(advised, 5);
        assert_eq!(t.remaining(), Some(0));
        assert_eq!(t.log().last().unwrap().remaining, Some(0));
    }

    #[test]
    fn stochastic_mode_smooths() {
        let mut t = teacher(TeacherConfig {
            availability: 1.0,
            mode: AdviceMode::Stochastic {
                mass: AdviceMode::DEFAULT_STOCHASTIC_MASS,
            },
            ..Default::default()
        });
        let map = canonical_map();
        let mut rng = SimRng::seed_from_u64(5);
        let d = t.teacher_advise(&at(&map, 1, 1), &mut rng);
        assert!((d.prob(Macro::Door1.id()) - 0.99).abs() < 1e-12);
        assert!((d.prob(Macro::Goal.id()) - 0.0025).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_config() {
        let bad = TeacherConfig {
            availability: 1.5,
            ..Default::default()
        };
        assert!(Teacher::new(bad, Arc::new(canonical_map())).is_err());
    }
}
