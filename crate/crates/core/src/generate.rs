//! Seeded generation of random valid domains, for property tests and
//! benchmarks.

use rand::Rng;

use crate::domain::{
    Action, ActionDistribution, ActionId, ActionKind, AgentId, AgentView, BeliefMap, DomainSpec,
    HyperParams, ImageProfile, ImpactTable, ObservationModel, StateId, TransitionModel, UpdateRule,
    UpdateVariant,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub agents: usize,
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    pub reputation_bins: usize,
    /// Probability that each action is directed.
    pub directed_fraction: f64,
    /// Probability that a transition or action-distribution entry is zero.
    pub sparsity: f64,
    /// When set, every observation probability is strictly positive.
    pub positive_observations: bool,
    /// Probability that an impact entry is non-zero.
    pub impact_density: f64,
}

impl GenConfig {
    pub fn new(agents: usize, states: usize, actions: usize, observations: usize) -> Self {
        Self {
            agents,
            states,
            actions,
            observations,
            reputation_bins: 3,
            directed_fraction: 0.4,
            sparsity: 0.0,
            positive_observations: true,
            impact_density: 0.6,
        }
    }
}

/// A probability vector of length `n`. Entries are zeroed with
/// probability `zero_prob`, keeping at least one positive entry.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, zero_prob: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < zero_prob {
                0.0
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        let i = rng.random_range(0..n);
        w[i] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

pub fn random_spec<R: Rng + ?Sized>(rng: &mut R, cfg: &GenConfig) -> DomainSpec {
    let (n_g, n_s, n_a, n_o) = (cfg.agents, cfg.states, cfg.actions, cfg.observations);
    let bins = cfg.reputation_bins.max(1);
    let actions: Vec<Action> = (0..n_a)
        .map(|i| {
            let kind = if rng.random::<f64>() < cfg.directed_fraction {
                ActionKind::Directed {
                    target: AgentId(rng.random_range(0..n_g)),
                }
            } else {
                ActionKind::Undirected
            };
            Action {
                name: format!("a{i}"),
                kind,
                slot: 0,
            }
        })
        .collect();
    let n_d = actions.iter().filter(|a| a.is_directed()).count();
    let n_u = n_a - n_d;

    let mut impact = ImpactTable::zeros(n_g, n_s, n_a);
    for g in 0..n_g {
        for s in 0..n_s {
            for h in 0..n_g {
                for s2 in 0..n_s {
                    for a in 0..n_a {
                        if rng.random::<f64>() < cfg.impact_density {
                            let v = rng.random_range(-1.0..=1.0);
                            impact.set(
                                AgentId(g),
                                StateId(s),
                                AgentId(h),
                                StateId(s2),
                                ActionId(a),
                                v,
                            );
                        }
                    }
                }
            }
        }
    }

    let obs_zero = if cfg.positive_observations {
        0.0
    } else {
        cfg.sparsity
    };
    let mut transitions = Vec::with_capacity(n_g);
    let mut observation_models = Vec::with_capacity(n_g);
    let mut initial_views = Vec::with_capacity(n_g);
    for g in 0..n_g {
        let undirected = (0..n_s)
            .map(|_| {
                (0..n_u)
                    .map(|_| random_distribution(rng, n_s, cfg.sparsity))
                    .collect()
            })
            .collect();
        let directed = (0..n_s)
            .map(|_| {
                (0..n_d)
                    .map(|_| {
                        (0..bins)
                            .map(|_| random_distribution(rng, n_s, cfg.sparsity))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        transitions.push(TransitionModel {
            undirected,
            directed,
        });

        // O[a][o][s'] with columns over o normalized
        let mut probs = vec![vec![vec![0.0; n_s]; n_o]; n_a];
        for per_a in probs.iter_mut() {
            for s2 in 0..n_s {
                let column = random_distribution(rng, n_o, obs_zero);
                for o in 0..n_o {
                    per_a[o][s2] = column[o];
                }
            }
        }
        observation_models.push(ObservationModel { probs });

        let ad = ActionDistribution(
            (0..n_g)
                .map(|_| {
                    (0..n_s)
                        .map(|_| random_distribution(rng, n_a, cfg.sparsity))
                        .collect()
                })
                .collect(),
        );
        let img = ImageProfile(
            (0..n_g)
                .map(|_| (0..n_g).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect(),
        );
        let beliefs = BeliefMap(
            (0..n_g)
                .map(|_| random_distribution(rng, n_s, cfg.sparsity))
                .collect(),
        );
        initial_views.push(AgentView {
            owner: AgentId(g),
            ad,
            img,
            beliefs,
        });
    }

    let mut spec = DomainSpec {
        agents: (0..n_g).map(|i| format!("g{i}")).collect(),
        states: (0..n_s).map(|i| format!("s{i}")).collect(),
        actions,
        observations: (0..n_o).map(|i| format!("o{i}")).collect(),
        impact,
        update_rule: UpdateRule {
            variant: if rng.random::<bool>() {
                UpdateVariant::Difference
            } else {
                UpdateVariant::Saturation
            },
            alpha: rng.random_range(0.0..=1.0),
        },
        hyper: HyperParams {
            delta: rng.random_range(0.0..=1.0),
            gamma: rng.random_range(0.0..=1.0),
            reputation_bins: bins,
        },
        transitions,
        observation_models,
        initial_views,
    };
    spec.assign_slots();
    spec
}

/// One agent, two states, two undirected actions, two observations.
pub fn single_agent_example() -> DomainSpec {
    let mut spec = DomainSpec {
        agents: vec!["solo".into()],
        states: vec!["low".into(), "high".into()],
        actions: vec![
            Action {
                name: "stay".into(),
                kind: ActionKind::Undirected,
                slot: 0,
            },
            Action {
                name: "climb".into(),
                kind: ActionKind::Undirected,
                slot: 1,
            },
        ],
        observations: vec!["see_low".into(), "see_high".into()],
        impact: ImpactTable::zeros(1, 2, 2),
        update_rule: UpdateRule {
            variant: UpdateVariant::Difference,
            alpha: 0.5,
        },
        hyper: HyperParams {
            delta: 0.5,
            gamma: 0.9,
            reputation_bins: 1,
        },
        transitions: vec![TransitionModel {
            undirected: vec![
                vec![vec![1.0, 0.0], vec![0.3, 0.7]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            ],
            directed: vec![vec![], vec![]],
        }],
        observation_models: vec![ObservationModel {
            probs: vec![
                vec![vec![0.8, 0.2], vec![0.2, 0.8]],
                vec![vec![0.8, 0.2], vec![0.2, 0.8]],
            ],
        }],
        initial_views: vec![AgentView {
            owner: AgentId(0),
            ad: ActionDistribution(vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]]),
            img: ImageProfile(vec![vec![0.2]]),
            beliefs: BeliefMap(vec![vec![0.6, 0.4]]),
        }],
    };
    spec.impact.set(
        AgentId(0),
        StateId(1),
        AgentId(0),
        StateId(1),
        ActionId(0),
        0.5,
    );
    spec.impact.set(
        AgentId(0),
        StateId(0),
        AgentId(0),
        StateId(0),
        ActionId(1),
        -0.1,
    );
    spec
}
