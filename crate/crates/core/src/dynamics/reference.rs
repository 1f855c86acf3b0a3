//! Textbook single-agent POMDP: state estimation and the exact
//! finite-horizon optimal value. Used as reduction targets for the
//! multi-agent estimators.

use crate::domain::{ActionId, AgentId, DomainSpec, ObsId};

use super::DynamicsError;

#[derive(Debug, Clone, PartialEq)]
pub struct Pomdp {
    /// `transition[s][a][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `observation[a][o][s']`
    pub observation: Vec<Vec<Vec<f64>>>,
    /// `reward[a][s]`
    pub reward: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl Pomdp {
    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn n_actions(&self) -> usize {
        self.observation.len()
    }

    pub fn n_observations(&self) -> usize {
        self.observation.first().map_or(0, Vec::len)
    }

    /// Agent `g`'s own view of an undirected-only domain as a plain POMDP.
    /// Returns `None` when the domain has directed actions.
    pub fn from_undirected(spec: &DomainSpec, g: AgentId, reward: Vec<Vec<f64>>) -> Option<Self> {
        if spec.n_directed() > 0 {
            return None;
        }
        Some(Self {
            transition: spec.transitions[g.0].undirected.clone(),
            observation: spec.observation_models[g.0].probs.clone(),
            reward,
            gamma: spec.hyper.gamma,
        })
    }

    fn predict(&self, a: usize, b: &[f64]) -> Vec<f64> {
        let n = self.n_states();
        (0..n)
            .map(|s2| {
                let mut acc = 0.0;
                for s in 0..n {
                    acc += self.transition[s][a][s2] * b[s];
                }
                acc
            })
            .collect()
    }

    /// `P(o | a, b)` for every `o`.
    pub fn obs_prob(&self, a: usize, b: &[f64]) -> Vec<f64> {
        let predicted = self.predict(a, b);
        (0..self.n_observations())
            .map(|o| {
                (0..self.n_states())
                    .map(|s2| self.observation[a][o][s2] * predicted[s2])
                    .sum()
            })
            .collect()
    }

    pub fn expected_reward(&self, a: usize, b: &[f64]) -> f64 {
        self.reward[a].iter().zip(b).map(|(r, p)| r * p).sum()
    }
}

/// `SE(a, o, b)`.
pub fn reference_se(
    pomdp: &Pomdp,
    a: ActionId,
    o: ObsId,
    b: &[f64],
) -> Result<Vec<f64>, DynamicsError> {
    let predicted = pomdp.predict(a.0, b);
    let mut numer: Vec<f64> = (0..pomdp.n_states())
        .map(|s2| pomdp.observation[a.0][o.0][s2] * predicted[s2])
        .collect();
    let total: f64 = numer.iter().sum();
    if !(total > 0.0) {
        return Err(DynamicsError::ImpossibleObservation {
            agent: AgentId(0),
            obs: o,
        });
    }
    numer.iter_mut().for_each(|p| *p /= total);
    Ok(numer)
}

/// `V*(b, k)` by full expansion of the action/observation tree.
/// Zero-probability observations contribute nothing.
pub fn reference_v_star(pomdp: &Pomdp, b: &[f64], k: usize) -> f64 {
    assert!(k >= 1, "horizon must be at least 1");
    (0..pomdp.n_actions())
        .map(|a| {
            let mut q = pomdp.expected_reward(a, b);
            if k > 1 {
                let probs = pomdp.obs_prob(a, b);
                for (o, &p) in probs.iter().enumerate() {
                    if p > 0.0 {
                        let next = reference_se(pomdp, ActionId(a), ObsId(o), b).expect("p > 0");
                        q += pomdp.gamma * p * reference_v_star(pomdp, &next, k - 1);
                    }
                }
            }
            q
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
