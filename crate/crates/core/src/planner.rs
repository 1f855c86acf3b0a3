//! Expected impacts and the finite-horizon optimal-impact search.
//!
//! The planning objective replaces POMDP reward with the impact the network
//! is expected to have on the planning agent. [`oi`] runs an exact
//! expectimax over action/observation sequences; every child node carries
//! the learned action distributions, updated images and updated beliefs.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    validate_view, ActionDistribution, ActionId, AgentId, AgentView, BeliefMap, DomainSpec,
    RangeError, StateId, Violation,
};
use crate::dynamics::obs_prob;
use crate::reputation::rep_of;
use crate::view::{advance_with_images, next_images};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    pub agent: AgentId,
    pub horizon: usize,
    pub gamma: f64,
    pub count_nodes: bool,
}

impl PlanConfig {
    /// Horizon `k` for `agent`, discount taken from the spec.
    pub fn new(spec: &DomainSpec, agent: AgentId, horizon: usize) -> Self {
        Self {
            agent,
            horizon,
            gamma: spec.hyper.gamma,
            count_nodes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    pub best_action: ActionId,
    pub value: f64,
    /// Indexed by action.
    pub q_values: Vec<f64>,
    pub nodes_expanded: u64,
}

impl PlanResult {
    /// JSON payload with action names in place of indices.
    pub fn to_json(&self, spec: &DomainSpec) -> serde_json::Value {
        let q: serde_json::Map<String, serde_json::Value> = spec
            .actions
            .iter()
            .zip(&self.q_values)
            .map(|(a, q)| (a.name.clone(), serde_json::json!(q)))
            .collect();
        serde_json::json!({
            "best_action": spec.action(self.best_action).name,
            "value": self.value,
            "q_values": q,
            "nodes_expanded": self.nodes_expanded,
        })
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid plan configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid agent view: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidView(Vec<Violation>),
    #[error(transparent)]
    Range(#[from] RangeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("node count exceeds u64")]
pub struct OverflowError;

/// `Σ_a AD_g(h, s^h)(a) I(g, s^g, h, s^h, a)`.
pub fn expected_instant_impact(
    spec: &DomainSpec,
    g: AgentId,
    sg: StateId,
    h: AgentId,
    sh: StateId,
    ad: &ActionDistribution,
) -> f64 {
    ad.row(h, sh)
        .iter()
        .zip(spec.action_ids())
        .map(|(p, a)| p * spec.impact.get(g, sg, h, sh, a))
        .sum()
}

/// Expected impact of every other agent on `g` when `g` is in `sg`.
pub fn pin(
    spec: &DomainSpec,
    g: AgentId,
    sg: StateId,
    ad: &ActionDistribution,
    beliefs: &BeliefMap,
) -> f64 {
    spec.agent_ids()
        .filter(|&h| h != g)
        .map(|h| {
            spec.state_ids()
                .map(|sh| beliefs.of(h)[sh.0] * expected_instant_impact(spec, g, sg, h, sh, ad))
                .sum::<f64>()
        })
        .sum()
}

/// `PI_tot(g, a, B_g)`: network plus self impact, averaged over `|G|`.
pub fn pi_tot(
    spec: &DomainSpec,
    g: AgentId,
    a: ActionId,
    ad: &ActionDistribution,
    beliefs: &BeliefMap,
) -> f64 {
    pi_tot_all(spec, g, ad, beliefs)[a.0]
}

/// [`pi_tot`] for every action, sharing the neighbor term.
fn pi_tot_all(
    spec: &DomainSpec,
    g: AgentId,
    ad: &ActionDistribution,
    beliefs: &BeliefMap,
) -> Vec<f64> {
    let n = spec.n_agents() as f64;
    let bg = beliefs.of(g);
    let network: Vec<f64> = spec
        .state_ids()
        .map(|sg| pin(spec, g, sg, ad, beliefs))
        .collect();
    spec.action_ids()
        .map(|a| {
            spec.state_ids()
                .map(|sg| bg[sg.0] * (network[sg.0] + spec.impact.get(g, sg, g, sg, a)))
                .sum::<f64>()
                / n
        })
        .collect()
}

/// OI-invocation count of the unpruned tree: `1 + Σ_{ℓ=1}^{k-1} (|A||Ω|)^ℓ`.
pub fn expected_node_count(
    actions: u64,
    observations: u64,
    horizon: u32,
) -> Result<u64, OverflowError> {
    let branching = actions.checked_mul(observations).ok_or(OverflowError)?;
    let mut total: u64 = 1;
    let mut level: u64 = 1;
    for _ in 1..horizon {
        level = level.checked_mul(branching).ok_or(OverflowError)?;
        total = total.checked_add(level).ok_or(OverflowError)?;
    }
    Ok(total)
}

struct Search<'a> {
    spec: &'a DomainSpec,
    g: AgentId,
    gamma: f64,
}

impl Search<'_> {
    /// Q-value of `a` at a node with `k` steps to go, and the number of
    /// OI invocations below it.
    fn q(
        &self,
        view: &AgentView,
        pi: f64,
        a: ActionId,
        k: usize,
        img_next: &crate::domain::ImageProfile,
    ) -> Result<(f64, u64), RangeError> {
        if k == 1 {
            return Ok((pi, 0));
        }
        let spec = self.spec;
        let rep_self = rep_of(self.g, self.g, &view.img);
        let probs = obs_prob(spec, self.g, a, view.beliefs.of(self.g), rep_self)?;
        let mut future = 0.0;
        let mut nodes = 0;
        for o in spec.obs_ids() {
            let p = probs[o.0];
            if p <= 0.0 {
                continue;
            }
            let child = advance_with_images(spec, view, a, o, img_next.clone())?;
            let (v, n) = self.value(&child.view, k - 1)?;
            future += p * v;
            nodes += n;
        }
        Ok((pi + self.gamma * future, nodes))
    }

    fn q_values(
        &self,
        view: &AgentView,
        k: usize,
        parallel: bool,
    ) -> Result<(Vec<f64>, u64), RangeError> {
        let pis = pi_tot_all(self.spec, self.g, &view.ad, &view.beliefs);
        let img_next = if k > 1 {
            next_images(self.spec, view)
        } else {
            view.img.clone()
        };
        let per_action: Vec<Result<(f64, u64), RangeError>> = if parallel {
            self.spec
                .action_ids()
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|a| self.q(view, pis[a.0], a, k, &img_next))
                .collect()
        } else {
            self.spec
                .action_ids()
                .map(|a| self.q(view, pis[a.0], a, k, &img_next))
                .collect()
        };
        let mut q = Vec::with_capacity(per_action.len());
        let mut nodes = 1;
        for r in per_action {
            let (v, n) = r?;
            q.push(v);
            nodes += n;
        }
        Ok((q, nodes))
    }

    fn value(&self, view: &AgentView, k: usize) -> Result<(f64, u64), RangeError> {
        let (q, nodes) = self.q_values(view, k, false)?;
        Ok((q.into_iter().fold(f64::NEG_INFINITY, f64::max), nodes))
    }
}

/// Values closer than this to the maximum count as tied.
pub const TIE_EPSILON: f64 = 1e-12;

/// Lowest index among the entries within [`TIE_EPSILON`] of the maximum.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|v| *v >= max - TIE_EPSILON)
        .unwrap_or(0)
}

/// Optimal impact over the next `cfg.horizon` steps.
///
/// Observation branches with zero probability are pruned. Root actions are
/// evaluated in parallel; the result does not depend on evaluation order.
pub fn oi(spec: &DomainSpec, view: &AgentView, cfg: &PlanConfig) -> Result<PlanResult, PlanError> {
    if cfg.horizon < 1 {
        return Err(PlanError::InvalidConfig(
            "horizon must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.gamma) {
        return Err(PlanError::InvalidConfig(format!(
            "gamma {} out of [0,1]",
            cfg.gamma
        )));
    }
    if cfg.agent.0 >= spec.n_agents() {
        return Err(PlanError::InvalidConfig(format!(
            "unknown agent {}",
            cfg.agent
        )));
    }
    if view.owner != cfg.agent {
        return Err(PlanError::InvalidConfig(format!(
            "view belongs to agent {}, planning for {}",
            view.owner, cfg.agent
        )));
    }
    let violations = validate_view(spec, view);
    if !violations.is_empty() {
        return Err(PlanError::InvalidView(violations));
    }
    let search = Search {
        spec,
        g: cfg.agent,
        gamma: cfg.gamma,
    };
    let (q_values, nodes) = search.q_values(view, cfg.horizon, true)?;
    let best = argmax_lowest(&q_values);
    Ok(PlanResult {
        best_action: ActionId(best),
        value: q_values[best],
        q_values,
        nodes_expanded: if cfg.count_nodes { nodes } else { 0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::parse_spec;
    use crate::oracle::{enumerate_plan, naive};

    const NOISY: &str = include_str!("../../../domains/noisy_sensor.json");

    fn spec() -> DomainSpec {
        parse_spec(NOISY).unwrap()
    }

    #[test]
    fn instant_impact_cases() {
        let mut spec = spec();
        let g = AgentId(0);
        let h = AgentId(1);
        let (s0, s1) = (StateId(0), StateId(1));
        spec.impact.scale(0.0);
        let ad = ActionDistribution(vec![vec![vec![0.5, 0.5, 0.0]; 2]; 2]);
        assert_eq!(expected_instant_impact(&spec, g, s0, h, s1, &ad), 0.0);
        spec.impact.set(g, s0, h, s1, ActionId(0), 0.4);
        spec.impact.set(g, s0, h, s1, ActionId(1), -0.2);
        assert!((expected_instant_impact(&spec, g, s0, h, s1, &ad) - 0.1).abs() < 1e-15);
        let point = ActionDistribution(vec![vec![vec![0.0, 1.0, 0.0]; 2]; 2]);
        assert_eq!(expected_instant_impact(&spec, g, s0, h, s1, &point), -0.2);
    }

    #[test]
    fn pin_and_pi_tot_match_brute_force() {
        let spec = spec();
        for g in spec.agent_ids() {
            let v = &spec.initial_views[g.0];
            for sg in spec.state_ids() {
                let want: f64 = spec
                    .agent_ids()
                    .filter(|&h| h != g)
                    .flat_map(|h| spec.state_ids().map(move |sh| (h, sh)))
                    .flat_map(|(h, sh)| spec.action_ids().map(move |a| (h, sh, a)))
                    .map(|(h, sh, a)| {
                        v.beliefs.of(h)[sh.0]
                            * v.ad.prob(h, sh, a)
                            * spec.impact.get(g, sg, h, sh, a)
                    })
                    .sum();
                assert!((pin(&spec, g, sg, &v.ad, &v.beliefs) - want).abs() < 1e-15);
            }
            for a in spec.action_ids() {
                let got = pi_tot(&spec, g, a, &v.ad, &v.beliefs);
                let want = naive::pi_tot(&spec, g, a, &v.ad, &v.beliefs);
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_agent_pi_tot_is_self_impact() {
        let mut spec = crate::generate::single_agent_example();
        spec.impact.set(
            AgentId(0),
            StateId(1),
            AgentId(0),
            StateId(1),
            ActionId(0),
            0.7,
        );
        let beliefs = BeliefMap(vec![vec![0.0, 1.0]]);
        let ad = &spec.initial_views[0].ad;
        assert_eq!(pi_tot(&spec, AgentId(0), ActionId(0), ad, &beliefs), 0.7);
        assert_eq!(pin(&spec, AgentId(0), StateId(1), ad, &beliefs), 0.0);
    }

    #[test]
    fn horizon_one_is_myopic() {
        let spec = spec();
        let v = spec.initial_view(AgentId(0));
        let r = oi(&spec, v, &PlanConfig::new(&spec, AgentId(0), 1)).unwrap();
        assert_eq!(r.nodes_expanded, 1);
        for a in spec.action_ids() {
            assert_eq!(
                r.q_values[a.0],
                pi_tot(&spec, AgentId(0), a, &v.ad, &v.beliefs)
            );
        }
        assert_eq!(
            r.value,
            r.q_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
    }

    #[test]
    fn zero_discount_equals_horizon_one() {
        let mut spec = spec();
        spec.hyper.gamma = 0.0;
        let v = spec.initial_view(AgentId(1));
        let one = oi(&spec, v, &PlanConfig::new(&spec, AgentId(1), 1)).unwrap();
        for k in 2..4 {
            let r = oi(&spec, v, &PlanConfig::new(&spec, AgentId(1), k)).unwrap();
            assert_eq!(r.best_action, one.best_action);
            assert_eq!(r.value, one.value);
        }
    }

    #[test]
    fn matches_enumerator_at_depth_three() {
        let spec = spec();
        for g in spec.agent_ids() {
            let v = spec.initial_view(g);
            for k in 1..=3 {
                let r = oi(&spec, v, &PlanConfig::new(&spec, g, k)).unwrap();
                let e = enumerate_plan(&spec, v, k, spec.hyper.gamma, 10_000_000).unwrap();
                assert!(
                    (r.value - e.value).abs() < 1e-9,
                    "k={k}: {} vs {}",
                    r.value,
                    e.value
                );
                assert_eq!(r.best_action, e.best_action);
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax_lowest(&[0.1, 0.3, 0.3]), 1);
        assert_eq!(argmax_lowest(&[0.3 - 1e-13, 0.3]), 0);
        assert_eq!(argmax_lowest(&[0.3 - 1e-9, 0.3]), 1);
        assert_eq!(argmax_lowest(&[-2.0]), 0);
    }

    #[test]
    fn node_count_formula() {
        assert_eq!(expected_node_count(5, 7, 1).unwrap(), 1);
        assert_eq!(expected_node_count(2, 2, 3).unwrap(), 21);
        for k in 1..10 {
            assert_eq!(expected_node_count(1, 1, k).unwrap(), k as u64);
        }
        assert_eq!(expected_node_count(1000, 1000, 5), Err(OverflowError));
    }

    #[test]
    fn nodes_match_formula_with_positive_observations() {
        let spec = spec();
        // alice's sensor has no zero entries
        let v = spec.initial_view(AgentId(0));
        for k in 1..=3 {
            let r = oi(&spec, v, &PlanConfig::new(&spec, AgentId(0), k)).unwrap();
            assert_eq!(
                r.nodes_expanded,
                expected_node_count(3, 2, k as u32).unwrap()
            );
        }
    }

    #[test]
    fn rejects_bad_config() {
        let spec = spec();
        let v = spec.initial_view(AgentId(0));
        let mut cfg = PlanConfig::new(&spec, AgentId(0), 0);
        assert!(matches!(
            oi(&spec, v, &cfg),
            Err(PlanError::InvalidConfig(_))
        ));
        cfg.horizon = 2;
        cfg.agent = AgentId(1);
        assert!(matches!(
            oi(&spec, v, &cfg),
            Err(PlanError::InvalidConfig(_))
        ));
        let mut bad = v.clone();
        bad.img.0[0][0] = 2.0;
        cfg.agent = AgentId(0);
        assert!(matches!(
            oi(&spec, &bad, &cfg),
            Err(PlanError::InvalidView(_))
        ));
    }

    #[test]
    fn value_is_bounded() {
        let spec = spec();
        let gamma = spec.hyper.gamma;
        for k in 1..=3 {
            let r = oi(
                &spec,
                spec.initial_view(AgentId(1)),
                &PlanConfig::new(&spec, AgentId(1), k),
            )
            .unwrap();
            let bound: f64 = (0..k).map(|t| gamma.powi(t as i32)).sum();
            assert!(r.value.abs() <= bound);
        }
    }

    #[test]
    fn json_payload_keys() {
        let spec = spec();
        let r = oi(
            &spec,
            spec.initial_view(AgentId(0)),
            &PlanConfig::new(&spec, AgentId(0), 2),
        )
        .unwrap();
        let j = r.to_json(&spec);
        for key in ["best_action", "value", "q_values", "nodes_expanded"] {
            assert!(j.get(key).is_some());
        }
        assert_eq!(j["q_values"].as_object().unwrap().len(), 3);
    }
}
