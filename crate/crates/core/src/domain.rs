//! Domain model: agents, states, actions, observations, the shared impact
//! table and update rule, and every agent's private models.
//!
//! A [`DomainSpec`] is immutable once loaded. The only per-agent state that
//! changes during planning or simulation is the [`AgentView`] (action
//! distributions, image profile and belief map).
//!
//! The on-disk format is JSON; see [`load_spec`] and [`save_spec`].

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for every probability-sum check.
pub const PROB_TOLERANCE: f64 = 1e-9;

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_newtype!(
    /// Dense index of an agent in declaration order.
    AgentId
);
index_newtype!(
    /// Dense index of a state.
    StateId
);
index_newtype!(
    /// Dense index of an action (directed and undirected share one index space).
    ActionId
);
index_newtype!(
    /// Dense index of an observation.
    ObsId
);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{what} out of range: {value}")]
pub struct RangeError {
    pub what: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Undirected,
    /// Aimed at `target`; its dynamics depend on the actor's reputation.
    Directed {
        target: AgentId,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    pub kind: ActionKind,
    /// Position of this action among the actions of the same kind. Indexes
    /// the second axis of the undirected or directed transition tensor.
    pub slot: usize,
}

impl Action {
    pub fn is_directed(&self) -> bool {
        matches!(self.kind, ActionKind::Directed { .. })
    }
}

/// Impact `I(g, s, h, s', a)` on `g` in `s` due to `h` in `s'` doing `a`.
///
/// Stored densely; entries that were never set read as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTable {
    agents: usize,
    states: usize,
    actions: usize,
    values: Vec<f64>,
}

impl ImpactTable {
    pub fn zeros(agents: usize, states: usize, actions: usize) -> Self {
        Self {
            agents,
            states,
            actions,
            values: vec![0.0; agents * states * agents * states * actions],
        }
    }

    #[inline]
    fn offset(&self, g: AgentId, s: StateId, h: AgentId, s2: StateId, a: ActionId) -> usize {
        (((g.0 * self.states + s.0) * self.agents + h.0) * self.states + s2.0) * self.actions + a.0
    }

    #[inline]
    pub fn get(&self, g: AgentId, s: StateId, h: AgentId, s2: StateId, a: ActionId) -> f64 {
        self.values[self.offset(g, s, h, s2, a)]
    }

    pub fn set(&mut self, g: AgentId, s: StateId, h: AgentId, s2: StateId, a: ActionId, v: f64) {
        let i = self.offset(g, s, h, s2, a);
        self.values[i] = v;
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.agents, self.states, self.actions)
    }

    /// Multiplies every entry by `c`.
    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// Every stored key with its value, zeros included, in index order.
    pub fn entries(
        &self,
    ) -> impl Iterator<Item = (AgentId, StateId, AgentId, StateId, ActionId, f64)> + '_ {
        let (n_g, n_s, n_a) = (self.agents, self.states, self.actions);
        self.values.iter().enumerate().map(move |(mut i, &v)| {
            let a = i % n_a;
            i /= n_a;
            let s2 = i % n_s;
            i /= n_s;
            let h = i % n_g;
            i /= n_g;
            let s = i % n_s;
            let g = i / n_s;
            (
                AgentId(g),
                StateId(s),
                AgentId(h),
                StateId(s2),
                ActionId(a),
                v,
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateVariant {
    Difference,
    Saturation,
}

/// Image update function `U` shared by every agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateRule {
    pub variant: UpdateVariant,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    /// Image trade-off between impacts received and impacts caused.
    pub delta: f64,
    pub gamma: f64,
    /// Number of uniform bins partitioning reputation `[-1, 1]` for directed dynamics.
    pub reputation_bins: usize,
}

/// One agent's model of the dynamics.
///
/// `undirected[s][u][s']` and `directed[s][d][bin][s']`, where `u`/`d` are
/// action slots within their kind.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionModel {
    pub undirected: Vec<Vec<Vec<f64>>>,
    pub directed: Vec<Vec<Vec<Vec<f64>>>>,
}

/// `O_g[a][o][s']`: probability that `o` is perceived after `a` lands in `s'`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationModel {
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl ObservationModel {
    #[inline]
    pub fn prob(&self, a: ActionId, o: ObsId, s2: StateId) -> f64 {
        self.probs[a.0][o.0][s2.0]
    }
}

/// `AD[h][s]`: distribution over actions agent `h` takes in state `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionDistribution(pub Vec<Vec<Vec<f64>>>);

impl ActionDistribution {
    #[inline]
    pub fn row(&self, h: AgentId, s: StateId) -> &[f64] {
        &self.0[h.0][s.0]
    }

    #[inline]
    pub fn prob(&self, h: AgentId, s: StateId, a: ActionId) -> f64 {
        self.0[h.0][s.0][a.0]
    }

    pub fn uniform(agents: usize, states: usize, actions: usize) -> Self {
        let p = 1.0 / actions as f64;
        Self(vec![vec![vec![p; actions]; states]; agents])
    }
}

/// `Img[h][i]`: agent `h`'s image of agent `i`, in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageProfile(pub Vec<Vec<f64>>);

impl ImageProfile {
    #[inline]
    pub fn get(&self, h: AgentId, i: AgentId) -> f64 {
        self.0[h.0][i.0]
    }

    pub fn set(&mut self, h: AgentId, i: AgentId, v: f64) {
        self.0[h.0][i.0] = v;
    }

    pub fn zeros(agents: usize) -> Self {
        Self(vec![vec![0.0; agents]; agents])
    }

    pub fn agents(&self) -> usize {
        self.0.len()
    }
}

/// `B[h]`: belief state over `S` for every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefMap(pub Vec<Vec<f64>>);

impl BeliefMap {
    #[inline]
    pub fn of(&self, h: AgentId) -> &[f64] {
        &self.0[h.0]
    }
}

/// The mutable epistemic state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView {
    pub owner: AgentId,
    pub ad: ActionDistribution,
    pub img: ImageProfile,
    pub beliefs: BeliefMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub agents: Vec<String>,
    pub states: Vec<String>,
    pub actions: Vec<Action>,
    pub observations: Vec<String>,
    pub impact: ImpactTable,
    pub update_rule: UpdateRule,
    pub hyper: HyperParams,
    pub transitions: Vec<TransitionModel>,
    pub observation_models: Vec<ObservationModel>,
    pub initial_views: Vec<AgentView>,
}

impl DomainSpec {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = AgentId> + Clone {
        (0..self.agents.len()).map(AgentId)
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> + Clone {
        (0..self.states.len()).map(StateId)
    }

    pub fn action_ids(&self) -> impl Iterator<Item = ActionId> + Clone {
        (0..self.actions.len()).map(ActionId)
    }

    pub fn obs_ids(&self) -> impl Iterator<Item = ObsId> + Clone {
        (0..self.observations.len()).map(ObsId)
    }

    pub fn action(&self, a: ActionId) -> &Action {
        &self.actions[a.0]
    }

    pub fn agent_by_name(&self, name: &str) -> Option<AgentId> {
        self.agents.iter().position(|n| n == name).map(AgentId)
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.actions
            .iter()
            .position(|a| a.name == name)
            .map(ActionId)
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|n| n == name).map(StateId)
    }

    pub fn n_undirected(&self) -> usize {
        self.actions.iter().filter(|a| !a.is_directed()).count()
    }

    pub fn n_directed(&self) -> usize {
        self.actions.iter().filter(|a| a.is_directed()).count()
    }

    pub fn initial_view(&self, g: AgentId) -> &AgentView {
        &self.initial_views[g.0]
    }

    /// Recomputes every action's slot from declaration order.
    pub fn assign_slots(&mut self) {
        let (mut u, mut d) = (0, 0);
        for action in &mut self.actions {
            if action.is_directed() {
                action.slot = d;
                d += 1;
            } else {
                action.slot = u;
                u += 1;
            }
        }
    }
}

/// Maps a reputation in `[-1, 1]` to one of `bins` uniform intervals.
/// `r = 1` falls in the last bin.
pub fn rep_bin(r: f64, bins: usize) -> Result<usize, RangeError> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(RangeError {
            what: "reputation",
            value: r,
        });
    }
    let raw = ((r + 1.0) / 2.0 * bins as f64).floor() as usize;
    Ok(raw.min(bins.saturating_sub(1)))
}

/// One failed invariant, located by a path such as `T[alice][idle][wait]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{} violation(s), first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Validation(Vec<Violation>),
}

struct Checker<'a> {
    spec: &'a DomainSpec,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn push(&mut self, path: String, message: impl Into<String>) {
        self.out.push(Violation {
            path,
            message: message.into(),
        });
    }

    fn agent(&self, g: usize) -> &str {
        self.spec.agents.get(g).map(String::as_str).unwrap_or("?")
    }

    fn state(&self, s: usize) -> &str {
        self.spec.states.get(s).map(String::as_str).unwrap_or("?")
    }

    fn action(&self, a: usize) -> &str {
        self.spec
            .actions
            .get(a)
            .map(|x| x.name.as_str())
            .unwrap_or("?")
    }

    fn len(&mut self, path: impl FnOnce() -> String, got: usize, want: usize) -> bool {
        if got != want {
            self.push(path(), format!("expected length {want}, found {got}"));
            false
        } else {
            true
        }
    }

    fn distribution(&mut self, path: impl FnOnce() -> String, row: &[f64]) {
        if let Some(bad) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
            self.push(
                path(),
                format!("probability must be finite and >= 0, found {bad}"),
            );
            return;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            self.push(path(), format!("row sums to {sum}, expected 1"));
        }
    }

    fn names(&mut self, kind: &str, names: &[&str]) {
        let mut seen = HashSet::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                self.push(format!("{kind}[{i}]"), "name must be non-empty");
            } else if !seen.insert(*n) {
                self.push(format!("{kind}[{i}]"), format!("duplicate name {n:?}"));
            }
        }
        if names.is_empty() {
            self.push(kind.to_string(), "must declare at least one entry");
        }
    }
}

/// Checks every invariant of `spec`. An empty result means the spec is valid.
pub fn validate(spec: &DomainSpec) -> Vec<Violation> {
    let mut c = Checker {
        spec,
        out: Vec::new(),
    };
    let n_g = spec.n_agents();
    let n_s = spec.n_states();
    let n_a = spec.n_actions();
    let n_o = spec.n_observations();

    c.names(
        "agents",
        &spec.agents.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    c.names(
        "states",
        &spec.states.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    c.names(
        "actions",
        &spec
            .actions
            .iter()
            .map(|a| a.name.as_str())
            .collect::<Vec<_>>(),
    );
    c.names(
        "observations",
        &spec
            .observations
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );

    let (mut u_slot, mut d_slot) = (0, 0);
    for (i, action) in spec.actions.iter().enumerate() {
        let expected = match action.kind {
            ActionKind::Directed { target } => {
                if target.0 >= n_g {
                    c.push(format!("actions[{i}].target"), "unknown target agent");
                }
                d_slot += 1;
                d_slot - 1
            }
            ActionKind::Undirected => {
                u_slot += 1;
                u_slot - 1
            }
        };
        if action.slot != expected {
            c.push(
                format!("actions[{i}].slot"),
                format!("slot {} should be {expected}", action.slot),
            );
        }
    }
    let (n_u, n_d) = (u_slot, d_slot);

    let rule = spec.update_rule;
    if !(0.0..=1.0).contains(&rule.alpha) {
        c.push(
            "update_rule.alpha".into(),
            format!("alpha {} out of [0,1]", rule.alpha),
        );
    }
    let hyper = spec.hyper;
    if !(0.0..=1.0).contains(&hyper.delta) {
        c.push(
            "hyper.delta".into(),
            format!("delta {} out of [0,1]", hyper.delta),
        );
    }
    if !(0.0..=1.0).contains(&hyper.gamma) {
        c.push(
            "hyper.gamma".into(),
            format!("gamma {} out of [0,1]", hyper.gamma),
        );
    }
    if hyper.reputation_bins < 1 {
        c.push("hyper.reputation_bins".into(), "must be >= 1");
    }
    let bins = hyper.reputation_bins;

    if spec.impact.dims() != (n_g, n_s, n_a) {
        c.push(
            "impact".into(),
            "impact table dimensions do not match the domain",
        );
    } else {
        for (g, s, h, s2, a, v) in spec.impact.entries() {
            if !(-1.0..=1.0).contains(&v) {
                let path = format!(
                    "impact[{},{},{},{},{}]",
                    c.agent(g.0),
                    c.state(s.0),
                    c.agent(h.0),
                    c.state(s2.0),
                    c.action(a.0)
                );
                c.push(path, format!("impact out of [-1,1]: {v}"));
            }
        }
    }

    let directed: Vec<usize> = (0..n_a)
        .filter(|&a| spec.actions[a].is_directed())
        .collect();
    let undirected: Vec<usize> = (0..n_a)
        .filter(|&a| !spec.actions[a].is_directed())
        .collect();

    let models_ok = c.len(|| "T".into(), spec.transitions.len(), n_g)
        & c.len(|| "O".into(), spec.observation_models.len(), n_g)
        & c.len(|| "views".into(), spec.initial_views.len(), n_g);
    if !models_ok {
        return c.out;
    }

    for g in 0..n_g {
        let gname = c.agent(g).to_string();
        let tm = &spec.transitions[g];
        if c.len(|| format!("T[{gname}]"), tm.undirected.len(), n_s) {
            for s in 0..n_s {
                let sname = c.state(s).to_string();
                if !c.len(
                    || format!("T[{gname}][{sname}]"),
                    tm.undirected[s].len(),
                    n_u,
                ) {
                    continue;
                }
                for (u, &a) in undirected.iter().enumerate() {
                    let aname = c.action(a).to_string();
                    let row = &tm.undirected[s][u];
                    let p = || format!("T[{gname}][{sname}][{aname}]");
                    if c.len(p, row.len(), n_s) {
                        c.distribution(|| format!("T[{gname}][{sname}][{aname}]"), row);
                    }
                }
            }
        }
        if c.len(|| format!("DT[{gname}]"), tm.directed.len(), n_s) {
            for s in 0..n_s {
                let sname = c.state(s).to_string();
                if !c.len(
                    || format!("DT[{gname}][{sname}]"),
                    tm.directed[s].len(),
                    n_d,
                ) {
                    continue;
                }
                for (d, &a) in directed.iter().enumerate() {
                    let aname = c.action(a).to_string();
                    let per_bin = &tm.directed[s][d];
                    if !c.len(
                        || format!("DT[{gname}][{sname}][{aname}]"),
                        per_bin.len(),
                        bins,
                    ) {
                        continue;
                    }
                    for (b, row) in per_bin.iter().enumerate() {
                        if c.len(
                            || format!("DT[{gname}][{sname}][{aname}][bin {b}]"),
                            row.len(),
                            n_s,
                        ) {
                            c.distribution(
                                || format!("DT[{gname}][{sname}][{aname}][bin {b}]"),
                                row,
                            );
                        }
                    }
                }
            }
        }

        let om = &spec.observation_models[g];
        let shape_ok = c.len(|| format!("O[{gname}]"), om.probs.len(), n_a)
            && (0..n_a)
                .all(|a| om.probs[a].len() == n_o && om.probs[a].iter().all(|r| r.len() == n_s));
        if !shape_ok {
            c.push(
                format!("O[{gname}]"),
                format!("expected shape [{n_a}][{n_o}][{n_s}]"),
            );
        } else {
            for a in 0..n_a {
                let aname = c.action(a).to_string();
                for s2 in 0..n_s {
                    let column: Vec<f64> = (0..n_o).map(|o| om.probs[a][o][s2]).collect();
                    let sname = c.state(s2).to_string();
                    c.distribution(|| format!("O[{gname}][{aname}][*][{sname}]"), &column);
                }
            }
        }

        let view = &spec.initial_views[g];
        check_view(&mut c, view, &format!("[{gname}]"), g, n_g, n_s, n_a);
    }
    c.out
}

/// Validity of a single view; used by the simulator to check that updates
/// preserve model invariants.
pub fn validate_view(spec: &DomainSpec, view: &AgentView) -> Vec<Violation> {
    let mut c = Checker {
        spec,
        out: Vec::new(),
    };
    let label = format!(
        "[{}]",
        spec.agents
            .get(view.owner.0)
            .map(String::as_str)
            .unwrap_or("?")
    );
    check_view(
        &mut c,
        view,
        &label,
        view.owner.0,
        spec.n_agents(),
        spec.n_states(),
        spec.n_actions(),
    );
    c.out
}

fn check_view(
    c: &mut Checker<'_>,
    view: &AgentView,
    label: &str,
    g: usize,
    n_g: usize,
    n_s: usize,
    n_a: usize,
) {
    if view.owner.0 != g {
        c.push(
            format!("views{label}.owner"),
            "owner does not match agent index",
        );
    }
    let ad = &view.ad.0;
    if c.len(|| format!("AD0{label}"), ad.len(), n_g) {
        for h in 0..n_g {
            let hname = c.agent(h).to_string();
            if !c.len(|| format!("AD0{label}[{hname}]"), ad[h].len(), n_s) {
                continue;
            }
            for s in 0..n_s {
                let sname = c.state(s).to_string();
                let row = &ad[h][s];
                if c.len(|| format!("AD0{label}[{hname}][{sname}]"), row.len(), n_a) {
                    c.distribution(|| format!("AD0{label}[{hname}][{sname}]"), row);
                }
            }
        }
    }
    let img = &view.img.0;
    if c.len(|| format!("Img0{label}"), img.len(), n_g) {
        for h in 0..n_g {
            let hname = c.agent(h).to_string();
            if !c.len(|| format!("Img0{label}[{hname}]"), img[h].len(), n_g) {
                continue;
            }
            for i in 0..n_g {
                let v = img[h][i];
                if !(-1.0..=1.0).contains(&v) {
                    let iname = c.agent(i).to_string();
                    c.push(
                        format!("Img0{label}[{hname}][{iname}]"),
                        format!("image out of [-1,1]: {v}"),
                    );
                }
            }
        }
    }
    let b = &view.beliefs.0;
    if c.len(|| format!("B0{label}"), b.len(), n_g) {
        for h in 0..n_g {
            let hname = c.agent(h).to_string();
            if c.len(|| format!("B0{label}[{hname}]"), b[h].len(), n_s) {
                c.distribution(|| format!("B0{label}[{hname}]"), &b[h]);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindDecl {
    Directed,
    Undirected,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionDecl {
    name: String,
    kind: KindDecl,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImpactRecord {
    agent: String,
    state: String,
    actor: String,
    actor_state: String,
    action: String,
    value: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    agents: Vec<String>,
    states: Vec<String>,
    actions: Vec<ActionDecl>,
    observations: Vec<String>,
    #[serde(default)]
    impact: Vec<ImpactRecord>,
    update_rule: UpdateRule,
    hyper: HyperParams,
    #[serde(rename = "T")]
    t: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "DT")]
    dt: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(rename = "O")]
    o: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "AD0")]
    ad0: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "Img0")]
    img0: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B0")]
    b0: Vec<Vec<Vec<f64>>>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn lookup(names: &[String], name: &str, path: String) -> Result<usize, SpecError> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| schema(path, format!("unknown name {name:?}")))
}

impl SpecFile {
    fn into_spec(self) -> Result<(DomainSpec, Vec<Violation>), SpecError> {
        let n_g = self.agents.len();
        let n_s = self.states.len();
        let n_a = self.actions.len();
        let mut extra = Vec::new();

        let mut actions = Vec::with_capacity(n_a);
        for (i, decl) in self.actions.iter().enumerate() {
            let kind = match (decl.kind, &decl.target) {
                (KindDecl::Undirected, None) => ActionKind::Undirected,
                (KindDecl::Undirected, Some(_)) => {
                    return Err(schema(
                        format!("actions[{i}].target"),
                        "undirected action cannot have a target",
                    ))
                }
                (KindDecl::Directed, None) => {
                    return Err(schema(
                        format!("actions[{i}].target"),
                        "directed action requires a target",
                    ))
                }
                (KindDecl::Directed, Some(t)) => ActionKind::Directed {
                    target: AgentId(lookup(&self.agents, t, format!("actions[{i}].target"))?),
                },
            };
            actions.push(Action {
                name: decl.name.clone(),
                kind,
                slot: 0,
            });
        }

        let mut impact = ImpactTable::zeros(n_g, n_s, n_a);
        let mut seen = HashSet::new();
        for (i, rec) in self.impact.iter().enumerate() {
            let p = |f: &str| format!("impact[{i}].{f}");
            let g = AgentId(lookup(&self.agents, &rec.agent, p("agent"))?);
            let s = StateId(lookup(&self.states, &rec.state, p("state"))?);
            let h = AgentId(lookup(&self.agents, &rec.actor, p("actor"))?);
            let s2 = StateId(lookup(&self.states, &rec.actor_state, p("actor_state"))?);
            let a = ActionId(
                actions
                    .iter()
                    .position(|x| x.name == rec.action)
                    .ok_or_else(|| schema(p("action"), format!("unknown name {:?}", rec.action)))?,
            );
            if !seen.insert((g, s, h, s2, a)) {
                extra.push(Violation {
                    path: format!("impact[{i}]"),
                    message: "duplicate impact record".into(),
                });
            }
            impact.set(g, s, h, s2, a, rec.value);
        }

        for (key, len) in [
            ("T", self.t.len()),
            ("DT", self.dt.len()),
            ("O", self.o.len()),
            ("AD0", self.ad0.len()),
            ("Img0", self.img0.len()),
            ("B0", self.b0.len()),
        ] {
            if len != n_g {
                return Err(schema(
                    key,
                    format!("expected one block per agent ({n_g}), found {len}"),
                ));
            }
        }

        let transitions = self
            .t
            .into_iter()
            .zip(self.dt)
            .map(|(undirected, directed)| TransitionModel {
                undirected,
                directed,
            })
            .collect();
        let observation_models = self
            .o
            .into_iter()
            .map(|probs| ObservationModel { probs })
            .collect();
        let initial_views = self
            .ad0
            .into_iter()
            .zip(self.img0)
            .zip(self.b0)
            .enumerate()
            .map(|(g, ((ad, img), b))| AgentView {
                owner: AgentId(g),
                ad: ActionDistribution(ad),
                img: ImageProfile(img),
                beliefs: BeliefMap(b),
            })
            .collect();

        let mut spec = DomainSpec {
            agents: self.agents,
            states: self.states,
            actions,
            observations: self.observations,
            impact,
            update_rule: self.update_rule,
            hyper: self.hyper,
            transitions,
            observation_models,
            initial_views,
        };
        spec.assign_slots();
        Ok((spec, extra))
    }

    fn from_spec(spec: &DomainSpec) -> Self {
        let actions = spec
            .actions
            .iter()
            .map(|a| match a.kind {
                ActionKind::Undirected => ActionDecl {
                    name: a.name.clone(),
                    kind: KindDecl::Undirected,
                    target: None,
                },
                ActionKind::Directed { target } => ActionDecl {
                    name: a.name.clone(),
                    kind: KindDecl::Directed,
                    target: Some(spec.agents[target.0].clone()),
                },
            })
            .collect();
        let impact = spec
            .impact
            .entries()
            .filter(|e| e.5 != 0.0)
            .map(|(g, s, h, s2, a, value)| ImpactRecord {
                agent: spec.agents[g.0].clone(),
                state: spec.states[s.0].clone(),
                actor: spec.agents[h.0].clone(),
                actor_state: spec.states[s2.0].clone(),
                action: spec.actions[a.0].name.clone(),
                value,
            })
            .collect();
        SpecFile {
            agents: spec.agents.clone(),
            states: spec.states.clone(),
            actions,
            observations: spec.observations.clone(),
            impact,
            update_rule: spec.update_rule,
            hyper: spec.hyper,
            t: spec
                .transitions
                .iter()
                .map(|m| m.undirected.clone())
                .collect(),
            dt: spec
                .transitions
                .iter()
                .map(|m| m.directed.clone())
                .collect(),
            o: spec
                .observation_models
                .iter()
                .map(|m| m.probs.clone())
                .collect(),
            ad0: spec.initial_views.iter().map(|v| v.ad.0.clone()).collect(),
            img0: spec.initial_views.iter().map(|v| v.img.0.clone()).collect(),
            b0: spec
                .initial_views
                .iter()
                .map(|v| v.beliefs.0.clone())
                .collect(),
        }
    }
}

/// Parses and validates a spec from JSON text.
pub fn parse_spec(text: &str) -> Result<DomainSpec, SpecError> {
    let file: SpecFile = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => schema(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        ),
        _ => SpecError::Parse(e.to_string()),
    })?;
    let (spec, mut violations) = file.into_spec()?;
    violations.extend(validate(&spec));
    if violations.is_empty() {
        Ok(spec)
    } else {
        Err(SpecError::Validation(violations))
    }
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<DomainSpec, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spec(&text)
}

pub fn spec_to_json(spec: &DomainSpec) -> String {
    serde_json::to_string_pretty(&SpecFile::from_spec(spec)).expect("spec serializes")
}

pub fn save_spec(spec: &DomainSpec, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, spec_to_json(spec))
}
