//! Event-driven packet routing over LEO mega-constellations.
//!
//! The crate is organised bottom-up:
//!
//! - [`constellation`]: Walker-Delta geometry, circular orbit propagation,
//!   grid ISL neighbours and ground-station visibility.
//! - [`linkmodel`]: propagation, transmission and queuing delay formulas and
//!   the GSL/ISL rate models.
//! - [`netsim`]: the deterministic discrete-event simulator (FIFO output
//!   queues, Poisson traffic, drop accounting).
//! - [`routing`]: the router interface, shortest-path-first tables and a
//!   uniform random router.
//! - [`env`]: observations, per-hop rewards and costs, transition assembly.
//! - [`nn`]: small dense networks with hand-written reverse-mode gradients.
//! - [`learner`]: replay buffer, primal-dual soft actor-critic with expected
//!   or CVaR cost constraints, and the shaped-reward DQN baseline.
//! - [`harness`]: scenarios, training/evaluation loops, metrics and reports.

pub mod constellation;
pub mod env;
pub mod error;
pub mod harness;
pub mod learner;
pub mod linkmodel;
pub mod netsim;
pub mod nn;
pub mod routing;

pub use constellation::{Constellation, Direction, GroundStation, NodeId, WalkerConfig};
pub use error::{Error, Result};
pub use harness::{Algorithm, MetricsReport, Scenario};
pub use learner::{LagrangeState, LearnerConfig, ReplayBuffer, RiskMode};
pub use netsim::{Packet, SimTime, Simulator};
