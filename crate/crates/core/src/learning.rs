//! Bayesian learning of other agents' action distributions.

use serde::Serialize;

use crate::domain::{
    ActionDistribution, AgentId, DomainSpec, ImageProfile, ObsId, RangeError, StateId,
};
use crate::dynamics::transition_row;
use crate::reputation::rep_of;

#[derive(Debug, Clone, PartialEq)]
pub struct AdeOutcome {
    pub ad: ActionDistribution,
    /// Rows where `o` had zero likelihood under every action with prior
    /// mass. Those rows keep their prior.
    pub zero_likelihood: Vec<ZeroLikelihood>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ZeroLikelihood {
    pub agent: AgentId,
    pub state: StateId,
}

/// `ADE(g, o, AD_g)`.
///
/// For every `(h, s)` row: `AD'(h,s)(a) ∝ [Σ_{s'} T^du_g(s,a,s') O_g(a,o,s')] · AD(h,s)(a)`,
/// with `h` as the actor at reputation `RepOf_g(h)`.
pub fn ade(
    spec: &DomainSpec,
    g: AgentId,
    o: ObsId,
    ad: &ActionDistribution,
    img: &ImageProfile,
) -> Result<AdeOutcome, RangeError> {
    let om = &spec.observation_models[g.0];
    let mut next = ad.clone();
    let mut zero_likelihood = Vec::new();
    for h in spec.agent_ids() {
        let rep = rep_of(g, h, img);
        for s in spec.state_ids() {
            let prior = ad.row(h, s);
            let mut posterior = vec![0.0; spec.n_actions()];
            for a in spec.action_ids() {
                if prior[a.0] == 0.0 {
                    continue;
                }
                let row = transition_row(spec, g, s, a, rep)?;
                let likelihood: f64 = spec
                    .state_ids()
                    .map(|s2| row[s2.0] * om.prob(a, o, s2))
                    .sum();
                posterior[a.0] = likelihood * prior[a.0];
            }
            let total: f64 = posterior.iter().sum();
            if total > 0.0 {
                posterior.iter_mut().for_each(|p| *p /= total);
                next.0[h.0][s.0] = posterior;
            } else {
                zero_likelihood.push(ZeroLikelihood { agent: h, state: s });
            }
        }
    }
    Ok(AdeOutcome {
        ad: next,
        zero_likelihood,
    })
}
