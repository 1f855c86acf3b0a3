//! Ground-truth synchronous stepping.
//!
//! Every step, all agents choose actions from their pre-step views, true
//! successor states and observations are sampled, and each agent updates
//! its own view from its own action and observation. Agents never see true
//! states or each other's views.
//!
//! Randomness comes from independent streams keyed by
//! `(seed, step, agent, purpose)`, so the draws of one agent never shift
//! those of another.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{
    validate_view, ActionId, ActionKind, AgentId, AgentView, DomainSpec, ObsId, RangeError,
    StateId, Violation, PROB_TOLERANCE,
};
use crate::dynamics::transition_row;
use crate::learning::ZeroLikelihood;
use crate::planner::{oi, PlanConfig, PlanError};
use crate::reputation::{rep_of, reputations};
use crate::view::advance;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Re-plan every step with the given horizon.
    Plan { horizon: usize },
    /// Scripted action per step.
    Fixed(Vec<ActionId>),
    /// Uniform over all actions.
    Random,
    /// `dist[s]` is the action distribution used when the agent's true state is `s`.
    Stationary(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub per_agent: Vec<Policy>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub true_state: Vec<StateId>,
    pub rng_seed: u64,
    pub step_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub agent: AgentId,
    pub action: ActionId,
    pub successor: StateId,
    pub observation: ObsId,
    /// Sum over all actors of the impact this agent received this step.
    pub realized_impact: f64,
    /// `RepOf_g(h)` for every `h`, from this agent's post-step images.
    pub reputations: Vec<f64>,
    pub zero_likelihood: Vec<ZeroLikelihood>,
    pub stale_beliefs: Vec<AgentId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step_index: u64,
    pub agents: Vec<AgentStep>,
}

#[derive(Debug, Error)]
pub enum FaultCause {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("updated view is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidView(Vec<Violation>),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation fault at step {step}, agent {agent}: {cause}")]
    Fault {
        step: u64,
        agent: String,
        cause: FaultCause,
    },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Action = 1,
    Transition = 2,
    Observation = 3,
    Initial = 4,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream(seed: u64, step: u64, agent: AgentId, purpose: Purpose) -> ChaCha8Rng {
    let key =
        splitmix64(seed ^ splitmix64(step ^ splitmix64(((agent.0 as u64) << 8) | purpose as u64)));
    ChaCha8Rng::seed_from_u64(key)
}

/// Inverse-CDF draw from `dist`. Never returns a zero-probability index.
fn sample(rng: &mut ChaCha8Rng, dist: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * dist.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in dist.iter().enumerate() {
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

impl PolicySpec {
    pub fn uniform(n_agents: usize, policy: Policy) -> Self {
        Self {
            per_agent: vec![policy; n_agents],
        }
    }

    /// Checks shapes against `spec` and that scripts cover `steps` steps.
    pub fn check(&self, spec: &DomainSpec, steps: u64) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidPolicy(m));
        if self.per_agent.len() != spec.n_agents() {
            return bad(format!(
                "{} policies for {} agents",
                self.per_agent.len(),
                spec.n_agents()
            ));
        }
        for (g, p) in self.per_agent.iter().enumerate() {
            let name = &spec.agents[g];
            match p {
                Policy::Plan { horizon } if *horizon < 1 => {
                    return bad(format!("{name}: horizon must be >= 1"))
                }
                Policy::Fixed(script) => {
                    if (script.len() as u64) < steps {
                        return bad(format!(
                            "{name}: script has {} actions for {steps} steps",
                            script.len()
                        ));
                    }
                    if script.iter().any(|a| a.0 >= spec.n_actions()) {
                        return bad(format!("{name}: script names an unknown action"));
                    }
                }
                Policy::Stationary(rows) => {
                    if rows.len() != spec.n_states() {
                        return bad(format!("{name}: need one distribution per state"));
                    }
                    for row in rows {
                        let sum: f64 = row.iter().sum();
                        if row.len() != spec.n_actions()
                            || row.iter().any(|p| !(*p >= 0.0))
                            || (sum - 1.0).abs() > PROB_TOLERANCE
                        {
                            return bad(format!(
                                "{name}: stationary rows must be distributions over actions"
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Initial true states, each agent's drawn from its own initial belief
/// about itself.
pub fn initial_truth(spec: &DomainSpec, seed: u64) -> GroundTruth {
    let true_state = spec
        .agent_ids()
        .map(|g| {
            let mut rng = stream(seed, 0, g, Purpose::Initial);
            StateId(sample(&mut rng, spec.initial_view(g).beliefs.of(g)))
        })
        .collect();
    GroundTruth {
        true_state,
        rng_seed: seed,
        step_index: 0,
    }
}

fn fault(spec: &DomainSpec, step: u64, g: AgentId, cause: impl Into<FaultCause>) -> SimError {
    SimError::Fault {
        step,
        agent: spec.agents[g.0].clone(),
        cause: cause.into(),
    }
}

/// Samples the true successor of `g` doing `a` in `s`. Directed actions use
/// the actor's reputation as computed by the target from the target's own
/// image profile.
pub fn sample_successor(
    spec: &DomainSpec,
    views: &[AgentView],
    g: AgentId,
    s: StateId,
    a: ActionId,
    rng: &mut ChaCha8Rng,
) -> Result<StateId, RangeError> {
    let rep = match spec.action(a).kind {
        ActionKind::Directed { target } => rep_of(target, g, &views[target.0].img),
        ActionKind::Undirected => 0.0,
    };
    let row = transition_row(spec, g, s, a, rep)?;
    Ok(StateId(sample(rng, row)))
}

/// One synchronous step.
pub fn step(
    spec: &DomainSpec,
    gt: &GroundTruth,
    views: &[AgentView],
    policies: &PolicySpec,
) -> Result<(GroundTruth, Vec<AgentView>, StepRecord), SimError> {
    let t = gt.step_index;
    let seed = gt.rng_seed;

    // actions, all from pre-step views
    let mut actions = Vec::with_capacity(spec.n_agents());
    for g in spec.agent_ids() {
        let a = match &policies.per_agent[g.0] {
            Policy::Plan { horizon } => {
                let cfg = PlanConfig::new(spec, g, *horizon);
                oi(spec, &views[g.0], &cfg)
                    .map_err(|e| fault(spec, t, g, e))?
                    .best_action
            }
            Policy::Fixed(script) => *script.get(t as usize).ok_or_else(|| {
                SimError::InvalidPolicy(format!("{}: script ended at step {t}", spec.agents[g.0]))
            })?,
            Policy::Random => {
                let mut rng = stream(seed, t, g, Purpose::Action);
                ActionId(rng.random_range(0..spec.n_actions()))
            }
            Policy::Stationary(rows) => {
                let mut rng = stream(seed, t, g, Purpose::Action);
                ActionId(sample(&mut rng, &rows[gt.true_state[g.0].0]))
            }
        };
        actions.push(a);
    }

    let mut successors = Vec::with_capacity(spec.n_agents());
    let mut observations = Vec::with_capacity(spec.n_agents());
    for g in spec.agent_ids() {
        let a = actions[g.0];
        let mut rng = stream(seed, t, g, Purpose::Transition);
        let s2 = sample_successor(spec, views, g, gt.true_state[g.0], a, &mut rng)
            .map_err(|e| fault(spec, t, g, e))?;
        let om = &spec.observation_models[g.0];
        let column: Vec<f64> = spec.obs_ids().map(|o| om.prob(a, o, s2)).collect();
        let mut rng = stream(seed, t, g, Purpose::Observation);
        successors.push(s2);
        observations.push(ObsId(sample(&mut rng, &column)));
    }

    let mut next_views = Vec::with_capacity(spec.n_agents());
    let mut records = Vec::with_capacity(spec.n_agents());
    for g in spec.agent_ids() {
        let updated = advance(spec, &views[g.0], actions[g.0], observations[g.0])
            .map_err(|e| fault(spec, t, g, e))?;
        let violations = validate_view(spec, &updated.view);
        if !violations.is_empty() {
            return Err(fault(spec, t, g, FaultCause::InvalidView(violations)));
        }
        let sg = gt.true_state[g.0];
        let realized_impact = spec
            .agent_ids()
            .map(|h| spec.impact.get(g, sg, h, gt.true_state[h.0], actions[h.0]))
            .sum();
        records.push(AgentStep {
            agent: g,
            action: actions[g.0],
            successor: successors[g.0],
            observation: observations[g.0],
            realized_impact,
            reputations: reputations(g, &updated.view.img),
            zero_likelihood: updated.zero_likelihood,
            stale_beliefs: updated.stale_beliefs,
        });
        next_views.push(updated.view);
    }

    let next = GroundTruth {
        true_state: successors,
        rng_seed: seed,
        step_index: t + 1,
    };
    Ok((
        next,
        next_views,
        StepRecord {
            step_index: t,
            agents: records,
        },
    ))
}

/// Runs `steps` steps from the spec's initial views.
pub fn run(
    spec: &DomainSpec,
    policies: &PolicySpec,
    steps: u64,
    seed: u64,
) -> Result<Vec<StepRecord>, SimError> {
    policies.check(spec, steps)?;
    let mut gt = initial_truth(spec, seed);
    let mut views = spec.initial_views.clone();
    let mut out = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let (next_gt, next_views, record) = step(spec, &gt, &views, policies)?;
        gt = next_gt;
        views = next_views;
        out.push(record);
    }
    Ok(out)
}

/// Cumulative realized impact per agent.
pub fn cumulative_impact(spec: &DomainSpec, records: &[StepRecord]) -> Vec<f64> {
    let mut total = vec![0.0; spec.n_agents()];
    for r in records {
        for a in &r.agents {
            total[a.agent.0] += a.realized_impact;
        }
    }
    total
}

impl StepRecord {
    /// One trace line, names resolved against `spec`.
    pub fn to_json_line(&self, spec: &DomainSpec) -> String {
        let agents: Vec<serde_json::Value> = self
            .agents
            .iter()
            .map(|a| {
                let reps: serde_json::Map<String, serde_json::Value> = spec
                    .agents
                    .iter()
                    .zip(&a.reputations)
                    .map(|(n, r)| (n.clone(), serde_json::json!(r)))
                    .collect();
                serde_json::json!({
                    "agent": spec.agents[a.agent.0],
                    "action": spec.action(a.action).name,
                    "state": spec.states[a.successor.0],
                    "observation": spec.observations[a.observation.0],
                    "impact": a.realized_impact,
                    "reputation": reps,
                    "zero_likelihood_rows": a.zero_likelihood.iter()
                        .map(|z| serde_json::json!([spec.agents[z.agent.0], spec.states[z.state.0]]))
                        .collect::<Vec<_>>(),
                    "stale_beliefs": a.stale_beliefs.iter().map(|h| spec.agents[h.0].clone()).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "v": TRACE_VERSION,
            "step": self.step_index,
            "agents": agents,
        })
        .to_string()
    }
}

/// Writes records as JSON Lines.
pub fn write_trace<W: Write>(
    spec: &DomainSpec,
    records: &[StepRecord],
    mut out: W,
) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line(spec))?;
    }
    out.flush()
}
