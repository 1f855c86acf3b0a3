//! Independent reference computations.
//!
//! [`naive`] re-derives every update straight from its defining sums over
//! joint index spaces, sharing no code with the production estimators.
//! [`enumerate_plan`] solves the planning problem a second way: it
//! materializes every action/observation history by replaying the naive
//! updates from the root, then maximizes over all deterministic policy
//! trees. The CLI's `plan --oracle` and the test suites compare against
//! these.

use std::collections::HashMap;

use thiserror::Error;

use crate::domain::{ActionId, AgentView, DomainSpec};

pub mod naive {
    //! Direct-summation versions of the model updates.

    use crate::domain::{
        ActionDistribution, ActionId, ActionKind, AgentId, AgentView, BeliefMap, DomainSpec,
        ImageProfile, ObsId, RangeError, StateId, UpdateVariant,
    };
    use crate::dynamics::DynamicsError;

    pub fn rep_of(g: AgentId, h: AgentId, img: &ImageProfile) -> f64 {
        let n = img.0.len();
        let mut total = 0.0;
        for i in 0..n {
            let weight = if i == g.0 { 1.0 } else { img.0[i][g.0] };
            total += img.0[h.0][i] * weight;
        }
        (total / n as f64).clamp(-1.0, 1.0)
    }

    pub fn t_du(
        spec: &DomainSpec,
        g: AgentId,
        s: StateId,
        a: ActionId,
        s2: StateId,
        rep: f64,
    ) -> Result<f64, RangeError> {
        let action = &spec.actions[a.0];
        match action.kind {
            ActionKind::Undirected => Ok(spec.transitions[g.0].undirected[s.0][action.slot][s2.0]),
            ActionKind::Directed { .. } => {
                if !(-1.0..=1.0).contains(&rep) {
                    return Err(RangeError {
                        what: "reputation",
                        value: rep,
                    });
                }
                let bins = spec.hyper.reputation_bins;
                let width = 2.0 / bins as f64;
                let mut bin = 0;
                while bin + 1 < bins && rep >= -1.0 + (bin + 1) as f64 * width {
                    bin += 1;
                }
                Ok(spec.transitions[g.0].directed[s.0][action.slot][bin][s2.0])
            }
        }
    }

    fn obs(spec: &DomainSpec, g: AgentId, a: ActionId, o: ObsId, s2: StateId) -> f64 {
        spec.observation_models[g.0].probs[a.0][o.0][s2.0]
    }

    pub fn obs_prob(
        spec: &DomainSpec,
        g: AgentId,
        a: ActionId,
        b: &[f64],
        rep: f64,
    ) -> Result<Vec<f64>, RangeError> {
        let mut out = vec![0.0; spec.n_observations()];
        for o in spec.obs_ids() {
            for s in spec.state_ids() {
                for s2 in spec.state_ids() {
                    out[o.0] += b[s.0] * t_du(spec, g, s, a, s2, rep)? * obs(spec, g, a, o, s2);
                }
            }
        }
        Ok(out)
    }

    fn marginalize(
        joint: Vec<Vec<f64>>,
        agent: AgentId,
        o: ObsId,
    ) -> Result<Vec<f64>, DynamicsError> {
        let total: f64 = joint.iter().flatten().sum();
        if total == 0.0 {
            return Err(DynamicsError::ImpossibleObservation { agent, obs: o });
        }
        let n = joint[0].len();
        Ok((0..n)
            .map(|s2| joint.iter().map(|row| row[s2]).sum::<f64>() / total)
            .collect())
    }

    pub fn ose(
        spec: &DomainSpec,
        g: AgentId,
        a: ActionId,
        o: ObsId,
        b: &[f64],
        rep: f64,
    ) -> Result<Vec<f64>, DynamicsError> {
        let n = spec.n_states();
        let mut joint = vec![vec![0.0; n]; n];
        for s in spec.state_ids() {
            for s2 in spec.state_ids() {
                joint[s.0][s2.0] = b[s.0] * t_du(spec, g, s, a, s2, rep)? * obs(spec, g, a, o, s2);
            }
        }
        marginalize(joint, g, o)
    }

    pub fn sse(
        spec: &DomainSpec,
        g: AgentId,
        h: AgentId,
        o: ObsId,
        b: &[f64],
        ad: &ActionDistribution,
        rep: f64,
    ) -> Result<Vec<f64>, DynamicsError> {
        let n = spec.n_states();
        // joint over (a, s) flattened, then s'
        let mut joint = Vec::new();
        for a in spec.action_ids() {
            for s in spec.state_ids() {
                let mut row = vec![0.0; n];
                for s2 in spec.state_ids() {
                    row[s2.0] = b[s.0]
                        * ad.0[h.0][s.0][a.0]
                        * t_du(spec, g, s, a, s2, rep)?
                        * obs(spec, g, a, o, s2);
                }
                joint.push(row);
            }
        }
        marginalize(joint, h, o)
    }

    pub fn bse(
        spec: &DomainSpec,
        g: AgentId,
        a: ActionId,
        o: ObsId,
        view: &AgentView,
    ) -> Result<BeliefMap, DynamicsError> {
        let mut map = Vec::new();
        for h in spec.agent_ids() {
            let rep = rep_of(g, h, &view.img);
            let b = &view.beliefs.0[h.0];
            map.push(if h == g {
                ose(spec, g, a, o, b, rep)?
            } else {
                sse(spec, g, h, o, b, &view.ad, rep)?
            });
        }
        Ok(BeliefMap(map))
    }

    /// Per-agent fallback: an impossible update keeps the prior.
    pub fn bse_keep_prior(
        spec: &DomainSpec,
        g: AgentId,
        a: ActionId,
        o: ObsId,
        view: &AgentView,
    ) -> Result<BeliefMap, RangeError> {
        let mut map = Vec::new();
        for h in spec.agent_ids() {
            let rep = rep_of(g, h, &view.img);
            let b = &view.beliefs.0[h.0];
            let r = if h == g {
                ose(spec, g, a, o, b, rep)
            } else {
                sse(spec, g, h, o, b, &view.ad, rep)
            };
            map.push(match r {
                Ok(x) => x,
                Err(DynamicsError::ImpossibleObservation { .. }) => b.clone(),
                Err(DynamicsError::Range(e)) => return Err(e),
            });
        }
        Ok(BeliefMap(map))
    }

    pub fn perceived_image(
        spec: &DomainSpec,
        h: AgentId,
        i: AgentId,
        beliefs: &BeliefMap,
        ad: &ActionDistribution,
        delta: f64,
    ) -> f64 {
        let mut total = 0.0;
        for sh in spec.state_ids() {
            for si in spec.state_ids() {
                for a in spec.action_ids() {
                    let w = beliefs.0[h.0][sh.0] * beliefs.0[i.0][si.0];
                    let on_h = ad.0[i.0][si.0][a.0] * spec.impact.get(h, sh, i, si, a);
                    let on_i = ad.0[h.0][sh.0][a.0] * spec.impact.get(i, si, h, sh, a);
                    total += w * (delta * on_h + (1.0 - delta) * on_i);
                }
            }
        }
        total
    }

    pub fn update(variant: UpdateVariant, alpha: f64, r: f64, i: f64) -> f64 {
        match variant {
            UpdateVariant::Difference => {
                let room = if i >= 0.0 { 1.0 - r } else { r + 1.0 };
                (r + alpha * room * i).clamp(-1.0, 1.0)
            }
            UpdateVariant::Saturation => {
                let x = r + alpha * i;
                if x > 1.0 {
                    1.0
                } else if x < -1.0 {
                    -1.0
                } else {
                    x
                }
            }
        }
    }

    pub fn image_expectation(
        spec: &DomainSpec,
        img: &ImageProfile,
        alpha: f64,
        beliefs: &BeliefMap,
        ad: &ActionDistribution,
    ) -> ImageProfile {
        let n = spec.n_agents();
        let mut out = vec![vec![0.0; n]; n];
        for h in spec.agent_ids() {
            for i in spec.agent_ids() {
                let p = perceived_image(spec, h, i, beliefs, ad, spec.hyper.delta).clamp(-1.0, 1.0);
                out[h.0][i.0] = update(spec.update_rule.variant, alpha, img.0[h.0][i.0], p);
            }
        }
        ImageProfile(out)
    }

    /// Posterior `P(a | o, h, s)` for every row; rows with zero evidence keep the prior.
    pub fn ade(
        spec: &DomainSpec,
        g: AgentId,
        o: ObsId,
        ad: &ActionDistribution,
        img: &ImageProfile,
    ) -> Result<ActionDistribution, RangeError> {
        let mut out = ad.clone();
        for h in spec.agent_ids() {
            let rep = rep_of(g, h, img);
            for s in spec.state_ids() {
                let mut evidence = 0.0;
                let mut joint = vec![0.0; spec.n_actions()];
                for a in spec.action_ids() {
                    for s2 in spec.state_ids() {
                        let x = t_du(spec, g, s, a, s2, rep)?
                            * obs(spec, g, a, o, s2)
                            * ad.0[h.0][s.0][a.0];
                        joint[a.0] += x;
                        evidence += x;
                    }
                }
                if evidence > 0.0 {
                    out.0[h.0][s.0] = joint.iter().map(|x| x / evidence).collect();
                }
            }
        }
        Ok(out)
    }

    pub fn pi_tot(
        spec: &DomainSpec,
        g: AgentId,
        a: ActionId,
        ad: &ActionDistribution,
        beliefs: &BeliefMap,
    ) -> f64 {
        let mut total = 0.0;
        for sg in spec.state_ids() {
            let bg = beliefs.0[g.0][sg.0];
            total += bg * spec.impact.get(g, sg, g, sg, a);
            for h in spec.agent_ids().filter(|&h| h != g) {
                for sh in spec.state_ids() {
                    for b in spec.action_ids() {
                        total += bg
                            * beliefs.0[h.0][sh.0]
                            * ad.0[h.0][sh.0][b.0]
                            * spec.impact.get(g, sg, h, sh, b);
                    }
                }
            }
        }
        total / spec.n_agents() as f64
    }

    /// Full model update after `g` executes `a` and perceives `o`.
    pub fn advance(
        spec: &DomainSpec,
        view: &AgentView,
        a: ActionId,
        o: ObsId,
    ) -> Result<AgentView, RangeError> {
        Ok(AgentView {
            owner: view.owner,
            beliefs: bse_keep_prior(spec, view.owner, a, o, view)?,
            img: image_expectation(
                spec,
                &view.img,
                spec.update_rule.alpha,
                &view.beliefs,
                &view.ad,
            ),
            ad: ade(spec, view.owner, o, &view.ad, &view.img)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_action: ActionId,
    pub value: f64,
    pub q_values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("policy space has more than {limit} trees")]
    TooLarge { limit: u64 },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Range(#[from] crate::domain::RangeError),
}

struct Node {
    /// `PI_tot` per action.
    pi: Vec<f64>,
    /// `P(o | a, B_g)` per action and observation.
    obs: Vec<Vec<f64>>,
}

type History = Vec<(usize, usize)>;

fn materialize(
    spec: &DomainSpec,
    root: &AgentView,
    history: &History,
) -> Result<Option<Node>, OracleError> {
    let g = root.owner;
    let mut view = root.clone();
    for &(a, o) in history {
        let rep = naive::rep_of(g, g, &view.img);
        let p = naive::obs_prob(spec, g, ActionId(a), &view.beliefs.0[g.0], rep)?;
        if p[o] <= 0.0 {
            return Ok(None);
        }
        view = naive::advance(spec, &view, ActionId(a), crate::domain::ObsId(o))?;
    }
    let rep = naive::rep_of(g, g, &view.img);
    let mut pi = Vec::new();
    let mut obs = Vec::new();
    for a in spec.action_ids() {
        pi.push(naive::pi_tot(spec, g, a, &view.ad, &view.beliefs));
        obs.push(naive::obs_prob(spec, g, a, &view.beliefs.0[g.0], rep)?);
    }
    Ok(Some(Node { pi, obs }))
}

/// Exhaustive planner: the best deterministic policy tree of depth
/// `horizon`, per root action. `limit` caps the number of trees examined.
pub fn enumerate_plan(
    spec: &DomainSpec,
    view: &AgentView,
    horizon: usize,
    gamma: f64,
    limit: u64,
) -> Result<OracleResult, OracleError> {
    if horizon == 0 {
        return Err(OracleError::ZeroHorizon);
    }
    let n_a = spec.n_actions();
    let n_o = spec.n_observations();

    // observation histories in breadth-first order; index 0 is the root
    let mut obs_histories: Vec<Vec<usize>> = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 1..horizon {
        let mut next = Vec::new();
        for h in &frontier {
            for o in 0..n_o {
                let mut x: Vec<usize> = h.clone();
                x.push(o);
                next.push(x);
            }
        }
        obs_histories.extend(next.iter().cloned());
        frontier = next;
    }
    let index: HashMap<Vec<usize>, usize> = obs_histories
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, h)| (h, i))
        .collect();
    let decisions = obs_histories.len();
    let within_limit = u32::try_from(decisions)
        .ok()
        .and_then(|d| (n_a as u64).checked_pow(d))
        .is_some_and(|t| t <= limit);
    if !within_limit {
        return Err(OracleError::TooLarge { limit });
    }

    // every reachable action/observation history, replayed from the root
    let mut nodes: HashMap<History, Node> = HashMap::new();
    let mut layer: Vec<History> = vec![vec![]];
    for depth in 0..horizon {
        let mut next = Vec::new();
        for hist in layer {
            if let Some(node) = materialize(spec, view, &hist)? {
                if depth + 1 < horizon {
                    for a in 0..n_a {
                        for o in 0..n_o {
                            if node.obs[a][o] > 0.0 {
                                let mut x = hist.clone();
                                x.push((a, o));
                                next.push(x);
                            }
                        }
                    }
                }
                nodes.insert(hist, node);
            }
        }
        layer = next;
    }

    let evaluate = |policy: &[usize]| -> f64 {
        let mut total = 0.0;
        // (observation history, action/observation history, probability, discount)
        let mut stack: Vec<(Vec<usize>, History, f64, f64)> = vec![(vec![], vec![], 1.0, 1.0)];
        while let Some((oh, ah, prob, disc)) = stack.pop() {
            let a = policy[index[&oh]];
            let node = &nodes[&ah];
            total += disc * prob * node.pi[a];
            if oh.len() + 1 < horizon {
                for o in 0..n_o {
                    let p = node.obs[a][o];
                    if p > 0.0 {
                        let mut oh2 = oh.clone();
                        oh2.push(o);
                        let mut ah2 = ah.clone();
                        ah2.push((a, o));
                        stack.push((oh2, ah2, prob * p, disc * gamma));
                    }
                }
            }
        }
        total
    };

    let mut q_values = vec![f64::NEG_INFINITY; n_a];
    let mut policy = vec![0usize; decisions];
    for (root, q) in q_values.iter_mut().enumerate() {
        policy.iter_mut().for_each(|x| *x = 0);
        policy[0] = root;
        loop {
            *q = q.max(evaluate(&policy));
            // odometer over the non-root decisions
            let mut pos = 1;
            while pos < decisions {
                policy[pos] += 1;
                if policy[pos] < n_a {
                    break;
                }
                policy[pos] = 0;
                pos += 1;
            }
            if pos >= decisions {
                break;
            }
        }
    }
    // ties within 1e-12 go to the lowest index
    let max = q_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = (0..n_a).find(|&a| q_values[a] >= max - 1e-12).unwrap_or(0);
    Ok(OracleResult {
        best_action: ActionId(best),
        value: q_values[best],
        q_values,
    })
}
