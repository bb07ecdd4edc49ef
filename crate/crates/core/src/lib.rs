//! Attack-aware netlist hardening.
//!
//! This crate learns, from attack feedback, where and how to insert logic
//! locking key gates (and side-channel masking gadgets) into gate-level
//! netlists, explains the learned policy as human-readable rules, and can
//! re-apply those rules directly to fresh designs.
//!
//! The main pieces:
//!
//! * [`netlist`] — bench-format parsing, validation, bit-parallel simulation
//!   and equivalence checking.
//! * [`features`] — structural locality encodings and signal/transition
//!   probability propagation.
//! * [`locking`] — key-gate insertion, random locking and reversal.
//! * [`attack`] — the pluggable attack-oracle interface with two built-in
//!   desk-scale oracles.
//! * [`ml`] — in-repo tree learners, resampling, scaling and ensembling.
//! * [`explain`] — exact and kernel Shapley attribution plus rule distillation.
//! * [`rules`] — the rule grammar and direct rule-driven locking.
//! * [`sidechannel`] — simulated power traces, Welch-t leakage maps and
//!   masking gadgets.
//! * [`pipeline`] — the end-to-end knowledge-extraction and hardening flows.

pub mod attack;
pub mod error;
pub mod explain;
pub mod features;
pub mod locking;
pub mod ml;
pub mod netlist;
pub mod pipeline;
pub mod rules;
pub mod sidechannel;
pub mod util;

pub use error::{
    AttackError, ExplainError, MlError, NetlistError, ParseError, PipelineError, RuleError,
};
pub use features::{FeatureLayout, FeatureOrigin, StructuralFeature};
pub use locking::{KeyGateInsertion, DEFAULT_LOCK_DICT};
pub use ml::{Dataset, FitParams, ModelKind, TrainedModel};
pub use netlist::{DesignGraph, Gate, GateId, GateKind, KeyInput, Wire, WireId};
pub use pipeline::{LockOption, PipelineConfig, SizeSpec};
pub use rules::Rule;
pub use sidechannel::LeakageMap;
pub use util::mix_seed;
