//! Planner node-count benchmarks over a grid of domain sizes.
//!
//! A grid is written as `G=2;S=2;A=1,2,3;O=1,2,3;k=1,2,3,4`: every key
//! takes a comma-separated list and all combinations are run on seeded
//! random specs with strictly positive observation models, so no branch is
//! ever pruned and the node count is exactly the predicted one.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::AgentId;
use crate::generate::{random_spec, GenConfig};
use crate::planner::{expected_node_count, oi, PlanConfig, PlanError};

pub const DEFAULT_NODE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub agents: usize,
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    pub horizon: usize,
    pub nodes_expanded: u64,
    pub wall_time_ns: u64,
    pub predicted_nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub agents: Vec<usize>,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
    pub horizons: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad grid: {0}")]
    Grid(String),
    #[error("configuration G={agents} S={states} A={actions} O={observations} k={horizon} predicts {predicted} nodes, above the cap of {cap}")]
    OverCap {
        agents: usize,
        states: usize,
        actions: usize,
        observations: usize,
        horizon: usize,
        predicted: String,
        cap: u64,
    },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl std::str::FromStr for Grid {
    type Err = BenchError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut grid = Grid {
            agents: vec![2],
            states: vec![2],
            actions: vec![],
            observations: vec![],
            horizons: vec![],
        };
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .ok_or_else(|| BenchError::Grid(format!("expected KEY=v1,v2,... in {part:?}")))?;
            let values = values
                .split(',')
                .map(|v| match v.trim().parse::<usize>() {
                    Ok(n) if n >= 1 => Ok(n),
                    _ => Err(BenchError::Grid(format!(
                        "{key}: {v:?} is not a positive integer"
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let slot = match key.trim() {
                "G" => &mut grid.agents,
                "S" => &mut grid.states,
                "A" => &mut grid.actions,
                "O" => &mut grid.observations,
                "k" => &mut grid.horizons,
                other => return Err(BenchError::Grid(format!("unknown key {other:?}"))),
            };
            *slot = values;
        }
        for (name, v) in [
            ("A", &grid.actions),
            ("O", &grid.observations),
            ("k", &grid.horizons),
        ] {
            if v.is_empty() {
                return Err(BenchError::Grid(format!("missing {name}")));
            }
        }
        Ok(grid)
    }
}

impl Grid {
    /// All combinations, horizon varying fastest.
    pub fn configurations(&self) -> Vec<[usize; 5]> {
        let mut out = Vec::new();
        for &g in &self.agents {
            for &s in &self.states {
                for &a in &self.actions {
                    for &o in &self.observations {
                        for &k in &self.horizons {
                            out.push([g, s, a, o, k]);
                        }
                    }
                }
            }
        }
        out
    }
}

fn config_seed(seed: u64, c: &[usize; 5]) -> u64 {
    // horizon excluded: rows differing only in k share a spec
    c[..4].iter().fold(seed, |acc, &x| {
        acc.rotate_left(13) ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    })
}

/// Runs every configuration. Fails before doing any work if one of them
/// predicts more nodes than `cap`.
pub fn run_grid(grid: &Grid, seed: u64, cap: u64) -> Result<Vec<BenchRow>, BenchError> {
    let configs = grid.configurations();
    let mut predicted = Vec::with_capacity(configs.len());
    for &[g, s, a, o, k] in &configs {
        let p = u32::try_from(k)
            .ok()
            .and_then(|k| expected_node_count(a as u64, o as u64, k).ok())
            .filter(|&p| p <= cap);
        match p {
            Some(p) => predicted.push(p),
            None => {
                return Err(BenchError::OverCap {
                    agents: g,
                    states: s,
                    actions: a,
                    observations: o,
                    horizon: k,
                    predicted: expected_node_count(
                        a as u64,
                        o as u64,
                        k.min(u32::MAX as usize) as u32,
                    )
                    .map_or_else(|_| "more than u64::MAX".to_string(), |p| p.to_string()),
                    cap,
                })
            }
        }
    }
    let mut rows = Vec::with_capacity(configs.len());
    for (c, predicted_nodes) in configs.iter().zip(predicted) {
        let [g, s, a, o, k] = *c;
        let mut rng = ChaCha8Rng::seed_from_u64(config_seed(seed, c));
        let spec = random_spec(&mut rng, &GenConfig::new(g, s, a, o));
        let cfg = PlanConfig::new(&spec, AgentId(0), k);
        let start = Instant::now();
        let result = oi(&spec, spec.initial_view(AgentId(0)), &cfg)?;
        let wall_time_ns = start.elapsed().as_nanos().min(u64::MAX as u128) as u64;
        rows.push(BenchRow {
            agents: g,
            states: s,
            actions: a,
            observations: o,
            horizon: k,
            nodes_expanded: result.nodes_expanded,
            wall_time_ns,
            predicted_nodes,
        });
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<BenchRow>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<BenchRow>, _>>()?)
}

/// One depth-level comparison between a row set at `|Ω|` and at `2|Ω|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoublingCheck {
    pub agents: usize,
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    pub depth: u32,
    /// Nodes at `depth` with `|Ω|` observations.
    pub base: u64,
    /// Nodes at `depth` with `2|Ω|` observations.
    pub doubled: u64,
}

impl DoublingCheck {
    /// `doubled == base * 2^depth`, in exact integer arithmetic.
    pub fn holds(&self) -> bool {
        2u64.checked_pow(self.depth)
            .and_then(|f| self.base.checked_mul(f))
            .is_some_and(|want| want == self.doubled)
    }
}

/// Nodes at depth `k-1` of a horizon-`k` tree, recovered as the difference
/// between the counts for horizons `k` and `k-1`.
fn level_counts(rows: &[BenchRow]) -> Vec<(usize, usize, usize, usize, u32, u64)> {
    let mut out = Vec::new();
    for r in rows {
        if r.horizon < 2 {
            continue;
        }
        let prev = rows.iter().find(|p| {
            (p.agents, p.states, p.actions, p.observations, p.horizon)
                == (r.agents, r.states, r.actions, r.observations, r.horizon - 1)
        });
        if let Some(p) = prev {
            if let Some(level) = r.nodes_expanded.checked_sub(p.nodes_expanded) {
                out.push((
                    r.agents,
                    r.states,
                    r.actions,
                    r.observations,
                    (r.horizon - 1) as u32,
                    level,
                ));
            }
        }
    }
    out
}

/// Every available `|Ω| → 2|Ω|` comparison in `rows`.
pub fn doubling_checks(rows: &[BenchRow]) -> Vec<DoublingCheck> {
    let levels = level_counts(rows);
    let mut out = Vec::new();
    for &(g, s, a, o, depth, base) in &levels {
        if let Some(&(.., doubled)) = levels
            .iter()
            .find(|l| (l.0, l.1, l.2, l.3, l.4) == (g, s, a, 2 * o, depth))
        {
            out.push(DoublingCheck {
                agents: g,
                states: s,
                actions: a,
                observations: o,
                depth,
                base,
                doubled,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: Grid = "G=2;S=2;A=1,2,3;O=1,2;k=1,2,3,4".parse().unwrap();
        assert_eq!(g.actions, vec![1, 2, 3]);
        assert_eq!(g.configurations().len(), 3 * 2 * 4);
        let g: Grid = "A=2;O=2;k=3".parse().unwrap();
        assert_eq!((g.agents.clone(), g.states.clone()), (vec![2], vec![2]));
        assert!("A=2;O=2".parse::<Grid>().is_err());
        assert!("A=0;O=2;k=1".parse::<Grid>().is_err());
        assert!("A=2;O=2;k=1;X=3".parse::<Grid>().is_err());
        assert!("A2".parse::<Grid>().is_err());
    }

    #[test]
    fn small_grid_matches_prediction() {
        let g: Grid = "G=2;S=2;A=2;O=1,2;k=1,2,3".parse().unwrap();
        let rows = run_grid(&g, 0, DEFAULT_NODE_CAP).unwrap();
        for r in &rows {
            assert_eq!(r.nodes_expanded, r.predicted_nodes, "{r:?}");
        }
        let r = rows
            .iter()
            .find(|r| (r.actions, r.observations, r.horizon) == (2, 2, 3))
            .unwrap();
        assert_eq!(r.nodes_expanded, 21);
        assert!(rows
            .iter()
            .filter(|r| r.horizon == 1)
            .all(|r| r.nodes_expanded == 1));
        let checks = doubling_checks(&rows);
        assert_eq!(checks.len(), 2);
        assert!(checks.iter().all(DoublingCheck::holds));
    }

    #[test]
    fn cap_is_enforced() {
        let g: Grid = "A=3;O=3;k=10".parse().unwrap();
        assert!(matches!(
            run_grid(&g, 0, DEFAULT_NODE_CAP),
            Err(BenchError::OverCap { .. })
        ));
        let g: Grid = "A=1000;O=1000;k=100".parse().unwrap();
        assert!(matches!(
            run_grid(&g, 0, u64::MAX),
            Err(BenchError::OverCap { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let g: Grid = "A=1,2;O=1;k=1,2".parse().unwrap();
        let rows = run_grid(&g, 5, DEFAULT_NODE_CAP).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("agents,states,actions,observations,horizon,nodes_expanded,wall_time_ns,predicted_nodes"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }
}
