use std::fmt;

/// What a teacher delivered at one decision.
#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    /// Advice concentrated on `action` (one-hot, or the peak of a smoothed distribution).
    Advice { action: usize },
    /// Human reward added to the environment reward.
    Reward { value: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdviceEvent {
    pub episode: usize,
    pub step: usize,
    pub kind: EventKind,
    /// Budget left after this event; `None` when unbudgeted.
    pub remaining: Option<u64>,
}

impl fmt::Display for AdviceEvent {
    /// `episode,step,kind,value,remaining`, with `none` for an unlimited budget.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},", self.episode, self.step)?;
        match &self.kind {
            EventKind::Advice { action } => write!(f, "advice,{action},")?,
            EventKind::Reward { value } => write!(f, "reward,{value},")?,
        }
        match self.remaining {
            Some(r) => write!(f, "{r}"),
            None => write!(f, "none"),
        }
    }
}

pub type AdviceLog = Vec<AdviceEvent>;

/// Number of interventions in a log: every advice emission and every reward
/// or punishment delivered.
pub fn count_interventions(log: &[AdviceEvent]) -> usize {
    log.len()
}
