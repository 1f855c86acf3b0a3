//! Multi-agent reputation networks as a POMDP: domain model, belief and
//! reputation dynamics, action-distribution learning, finite-horizon
//! optimal-impact planning and a seeded ground-truth simulator.

pub mod bench;
pub mod domain;
pub mod dynamics;
pub mod generate;
pub mod learning;
pub mod oracle;
pub mod planner;
pub mod reputation;
pub mod simulator;
pub mod view;

pub use domain::{load_spec, parse_spec, validate, DomainSpec, SpecError};
pub use planner::{oi, PlanConfig, PlanResult};
