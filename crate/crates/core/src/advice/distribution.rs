use rand::Rng;

use super::AdviceError;
use crate::mdp::SimRng;

/// Tolerance on the total mass of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over a finite action set.
///
/// Used for the learned policy, the advisory policy and their mixture alike.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates an explicit probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self, AdviceError> {
        if probs.is_empty() {
            return Err(AdviceError::Empty);
        }
        if let Some((i, &p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(AdviceError::InvalidEntry { index: i, value: p });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(AdviceError::NotNormalized { sum });
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, AdviceError> {
        if weights.is_empty() {
            return Err(AdviceError::Empty);
        }
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(AdviceError::InvalidEntry { index: i, value: w });
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(AdviceError::ZeroMass);
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn uniform(actions: usize) -> Self {
        assert!(actions > 0, "distribution needs at least one action");
        Self(vec![1.0 / actions as f64; actions])
    }

    pub fn one_hot(actions: usize, action: usize) -> Self {
        assert!(action < actions, "action {action} out of range for {actions} actions");
        let mut probs = vec![0.0; actions];
        probs[action] = 1.0;
        Self(probs)
    }

    /// Puts `mass` on `action` and spreads the rest evenly over the other actions.
    pub fn smoothed(actions: usize, action: usize, mass: f64) -> Result<Self, AdviceError> {
        if !(0.0..=1.0).contains(&mass) {
            return Err(AdviceError::InvalidEntry {
                index: action,
                value: mass,
            });
        }
        if actions == 1 {
            return Ok(Self::one_hot(1, 0));
        }
        let rest = (1.0 - mass) / (actions - 1) as f64;
        let mut probs = vec![rest; actions];
        probs[action] = mass;
        Self::new(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.0[action]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// True when every entry carries the same mass, i.e. "no advice".
    pub fn is_uniform(&self) -> bool {
        let first = self.0[0];
        self.0.iter().all(|p| (p - first).abs() <= 1e-12)
    }

    /// The action if this is a deterministic (one-hot) distribution.
    pub fn as_one_hot(&self) -> Option<usize> {
        let mut hot = None;
        for (i, &p) in self.0.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if (p - 1.0).abs() > SUM_TOLERANCE || hot.is_some() {
                return None;
            }
            hot = Some(i);
        }
        hot
    }

    /// Most probable action, lowest id on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF sample. Zero-probability actions are never returned.
    pub fn sample(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

impl AsRef<[f64]> for Distribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(Distribution::new(vec![]), Err(AdviceError::Empty)));
        assert!(matches!(
            Distribution::new(vec![0.5, 0.6]),
            Err(AdviceError::NotNormalized { .. })
        ));
        assert!(matches!(
            Distribution::new(vec![1.5, -0.5]),
            Err(AdviceError::InvalidEntry { index: 1, .. })
        ));
        assert!(matches!(
            Distribution::from_weights(vec![0.0, 0.0]),
            Err(AdviceError::ZeroMass)
        ));
    }

    #[test]
    fn constructors() {
        let u = Distribution::uniform(4);
        assert!(u.is_uniform());
        assert_eq!(u.as_one_hot(), None);
        let h = Distribution::one_hot(5, 2);
        assert_eq!(h.as_one_hot(), Some(2));
        assert_eq!(h.argmax(), 2);
        let s = Distribution::smoothed(5, 4, 0.99).unwrap();
        assert!((s.prob(4) - 0.99).abs() < 1e-15);
        assert!((s.prob(0) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn one_hot_sampling_is_exact() {
        let mut rng = SimRng::seed_from_u64(3);
        let d = Distribution::one_hot(3, 1);
        assert!((0..1000).all(|_| d.sample(&mut rng) == 1));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(Distribution::new(vec![0.4, 0.4, 0.2]).unwrap().argmax(), 0);
    }
}
