//! Shared fixtures for the criterion benchmarks.

use gatesmith_core::attack::{train_structural_oracle, StructuralOracle};
use gatesmith_core::locking::DEFAULT_LOCK_DICT;
use gatesmith_core::ml::{fit, FitParams, ModelKind, TrainedModel};
use gatesmith_core::netlist::generate;
use gatesmith_core::pipeline::{knowledge_extraction_ll, PipelineConfig};
use gatesmith_core::DesignGraph;

pub fn bench_design(n_gates: usize) -> DesignGraph {
    generate::random_design("bench", 14, n_gates, 1234)
}

pub fn bench_oracle(references: &[DesignGraph]) -> StructuralOracle {
    train_structural_oracle(references, &DEFAULT_LOCK_DICT, 3, 4, 7).expect("oracle trains")
}

/// A small but realistic hardening model for the locking benchmarks.
pub fn bench_model() -> TrainedModel {
    let refs: Vec<DesignGraph> = (0..2)
        .map(|i| generate::random_design(&format!("ref{i}"), 10, 400, 40 + i))
        .collect();
    let oracle = bench_oracle(&refs);
    let config = PipelineConfig {
        key_size: 32,
        th_it: 3,
        seed: 5,
        ..PipelineConfig::default()
    };
    let (data, _) = knowledge_extraction_ll(&refs[0], &oracle, &config).expect("extraction runs");
    fit(
        ModelKind::RandomForest,
        &data,
        FitParams {
            n_trees: 40,
            ..FitParams::default()
        },
        5,
    )
    .expect("model fits")
}
