//! Combined transition kernel and belief-state estimation.
//!
//! `t_du` dispatches between the undirected and reputation-binned directed
//! transition tensors. [`ose`] updates the estimator's belief about itself,
//! [`sse`] its belief about another agent (marginalizing over that agent's
//! believed action distribution), and [`bse`] does both for a whole
//! [`BeliefMap`].

pub mod reference;

use thiserror::Error;

use crate::domain::{
    rep_bin, ActionDistribution, ActionId, ActionKind, AgentId, AgentView, BeliefMap, DomainSpec,
    ObsId, RangeError, StateId,
};
use crate::reputation::rep_of;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("observation {obs} has zero probability in agent {agent}'s belief update")]
    ImpossibleObservation { agent: AgentId, obs: ObsId },
}

/// Who is estimating, whose action drives the transition, and the
/// reputation the estimator attributes to that actor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub estimator: AgentId,
    pub actor: AgentId,
    pub reputation_of_actor: f64,
}

/// The successor distribution row `T^du_g(s, a, ·)` for an actor whose
/// reputation is `rep_of_actor`. The reputation is ignored for undirected
/// actions.
pub fn transition_row(
    spec: &DomainSpec,
    g: AgentId,
    s: StateId,
    a: ActionId,
    rep_of_actor: f64,
) -> Result<&[f64], RangeError> {
    let action = spec.action(a);
    let model = &spec.transitions[g.0];
    match action.kind {
        ActionKind::Undirected => Ok(&model.undirected[s.0][action.slot]),
        ActionKind::Directed { .. } => {
            let bin = rep_bin(rep_of_actor, spec.hyper.reputation_bins)?;
            Ok(&model.directed[s.0][action.slot][bin])
        }
    }
}

pub fn t_du(
    spec: &DomainSpec,
    g: AgentId,
    s: StateId,
    a: ActionId,
    s2: StateId,
    rep_of_actor: f64,
) -> Result<f64, RangeError> {
    Ok(transition_row(spec, g, s, a, rep_of_actor)?[s2.0])
}

/// `Σ_s T^du_g(s, a, s') b(s)` for every `s'`.
fn predict(
    spec: &DomainSpec,
    g: AgentId,
    a: ActionId,
    b: &[f64],
    rep_of_actor: f64,
) -> Result<Vec<f64>, RangeError> {
    if spec.action(a).is_directed() {
        rep_bin(rep_of_actor, spec.hyper.reputation_bins)?;
    }
    let mut out = vec![0.0; spec.n_states()];
    for s2 in spec.state_ids() {
        let mut acc = 0.0;
        for s in spec.state_ids() {
            acc += transition_row(spec, g, s, a, rep_of_actor)?[s2.0] * b[s.0];
        }
        out[s2.0] = acc;
    }
    Ok(out)
}

fn normalize(
    mut unnormalized: Vec<f64>,
    agent: AgentId,
    obs: ObsId,
) -> Result<Vec<f64>, DynamicsError> {
    let total: f64 = unnormalized.iter().sum();
    if !(total > 0.0) {
        return Err(DynamicsError::ImpossibleObservation { agent, obs });
    }
    unnormalized.iter_mut().for_each(|p| *p /= total);
    Ok(unnormalized)
}

/// `P(o | a, b)` for every observation, with `g` as the actor.
pub fn obs_prob(
    spec: &DomainSpec,
    g: AgentId,
    a: ActionId,
    b: &[f64],
    rep_self: f64,
) -> Result<Vec<f64>, RangeError> {
    let predicted = predict(spec, g, a, b, rep_self)?;
    let om = &spec.observation_models[g.0];
    Ok(spec
        .obs_ids()
        .map(|o| {
            spec.state_ids()
                .map(|s2| om.prob(a, o, s2) * predicted[s2.0])
                .sum()
        })
        .collect())
}

/// Objective state estimation: `g`'s posterior over its own state after
/// executing `a` and perceiving `o`.
pub fn ose(
    spec: &DomainSpec,
    g: AgentId,
    a: ActionId,
    o: ObsId,
    b_cur: &[f64],
    rep_self: f64,
) -> Result<Vec<f64>, DynamicsError> {
    let predicted = predict(spec, g, a, b_cur, rep_self)?;
    let om = &spec.observation_models[g.0];
    let numer = spec
        .state_ids()
        .map(|s2| om.prob(a, o, s2) * predicted[s2.0])
        .collect();
    normalize(numer, g, o)
}

/// Subjective state estimation: `g`'s posterior over `h`'s state given
/// `g`'s observation `o`, marginalizing over the actions `g` believes `h`
/// takes.
#[allow(clippy::too_many_arguments)]
pub fn sse(
    spec: &DomainSpec,
    g: AgentId,
    h: AgentId,
    o: ObsId,
    b_cur: &[f64],
    ad_g: &ActionDistribution,
    rep_of_h: f64,
) -> Result<Vec<f64>, DynamicsError> {
    let om = &spec.observation_models[g.0];
    let mut numer = vec![0.0; spec.n_states()];
    for a in spec.action_ids() {
        for s in spec.state_ids() {
            let w = b_cur[s.0] * ad_g.prob(h, s, a);
            if w == 0.0 {
                continue;
            }
            let row = transition_row(spec, g, s, a, rep_of_h)?;
            for s2 in spec.state_ids() {
                numer[s2.0] += om.prob(a, o, s2) * row[s2.0] * w;
            }
        }
    }
    normalize(numer, h, o)
}

/// Belief-state estimation over the full map: `g` uses [`ose`] for itself
/// and [`sse`] for every other agent. Reputations fed to the kernel are
/// `RepOf_g(actor)` computed from `view.img`.
pub fn bse(
    spec: &DomainSpec,
    g: AgentId,
    a: ActionId,
    o: ObsId,
    view: &AgentView,
) -> Result<BeliefMap, DynamicsError> {
    let mut out = Vec::with_capacity(spec.n_agents());
    for h in spec.agent_ids() {
        out.push(estimate_one(spec, g, h, a, o, view)?);
    }
    Ok(BeliefMap(out))
}

fn estimate_one(
    spec: &DomainSpec,
    g: AgentId,
    h: AgentId,
    a: ActionId,
    o: ObsId,
    view: &AgentView,
) -> Result<Vec<f64>, DynamicsError> {
    let rep = rep_of(g, h, &view.img);
    if h == g {
        ose(spec, g, a, o, view.beliefs.of(g), rep)
    } else {
        sse(spec, g, h, o, view.beliefs.of(h), &view.ad, rep)
    }
}

/// Like [`bse`], but an agent whose update has a zero normalizer keeps its
/// prior belief instead of failing the whole map. Returns the agents that
/// kept their prior.
pub fn bse_tolerant(
    spec: &DomainSpec,
    g: AgentId,
    a: ActionId,
    o: ObsId,
    view: &AgentView,
) -> Result<(BeliefMap, Vec<AgentId>), RangeError> {
    let mut out = Vec::with_capacity(spec.n_agents());
    let mut stale = Vec::new();
    for h in spec.agent_ids() {
        match estimate_one(spec, g, h, a, o, view) {
            Ok(b) => out.push(b),
            Err(DynamicsError::ImpossibleObservation { .. }) => {
                stale.push(h);
                out.push(view.beliefs.of(h).to_vec());
            }
            Err(DynamicsError::Range(e)) => return Err(e),
        }
    }
    Ok((BeliefMap(out), stale))
}
