//! Distributed minimax adaptive control for networked scalar systems whose
//! local dynamics are known only up to a finite candidate set.

pub mod bounds;
pub mod controllers;
pub mod disturbances;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod simulate;

pub use controllers::{ControlDecision, MinimaxController, MinimaxNodeState};
pub use disturbances::{DisturbanceKind, DisturbanceSpec};
pub use dynamics::{CandidateSet, TrueModelRule, UncertainNetwork, Violation};
pub use error::{Error, Result};
pub use graph::NetworkGraph;
pub use simulate::{ControllerKind, RunMetrics, SimulationTrace};
