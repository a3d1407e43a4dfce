//! Black-box adversarial node selection for graph neural networks.
//!
//! Nodes are scored by how much random-walk mass they receive
//! ([`walk::rwcs_scores`]) and picked greedily under a coverage-aware
//! correction ([`selector::gc_rwcs`]). A constant feature perturbation
//! ([`perturb`]) is then applied to the selected nodes and the damage
//! measured on a GCN victim ([`gcn`]).

pub mod centrality;
pub mod error;
pub mod experiment;
pub mod gcn;
pub mod graph;
pub mod io;
pub mod perturb;
pub mod selector;
pub mod synth;
pub mod theory;
pub mod walk;

pub use centrality::{Method, ScoreVector};
pub use error::{Error, Result};
pub use gcn::{GcnConfig, GcnModel, LossKind, Normalization, SplitSpec};
pub use graph::{Graph, NodeSet};
pub use perturb::{apply_tau, build_epsilon, Epsilon, FeatureMatrix};
pub use selector::{Selection, SelectionConstraints};
pub use walk::{rwcs_scores, BinaryWalkMatrix};
