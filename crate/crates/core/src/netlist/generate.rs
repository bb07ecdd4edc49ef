//! Seeded netlist generators for tests, benchmarks and the bundled corpus.
//!
//! All generators are deterministic for a fixed seed and never depend on hash
//! iteration order, so generated designs are byte-stable across runs.

use super::{DesignGraph, Driver, GateKind, WireId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Random acyclic design over the full gate alphabet. Every gate reads wires
/// created before it, so the result is a DAG by construction; all dangling
/// wires become primary outputs.
pub fn random_design(name: &str, n_inputs: usize, n_gates: usize, seed: u64) -> DesignGraph {
    assert!(n_inputs >= 2 && n_gates >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = DesignGraph::empty(name);
    let mut pool: Vec<WireId> = (0..n_inputs)
        .map(|i| g.add_primary_input(format!("i{i}")))
        .collect();
    // Two-input kinds dominate; inverters appear occasionally, buffers rarely.
    let kinds = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buff,
    ];
    for i in 0..n_gates {
        let kind = *kinds.choose(&mut rng).unwrap();
        // Bias toward recent wires to get some depth instead of a flat fanout.
        let pick = |rng: &mut ChaCha12Rng, pool: &[WireId]| -> WireId {
            let n = pool.len();
            if n > 8 && rng.gen_bool(0.5) {
                pool[n - 1 - rng.gen_range(0..8)]
            } else {
                pool[rng.gen_range(0..n)]
            }
        };
        let inputs = if kind.arity() == 1 {
            vec![pick(&mut rng, &pool)]
        } else {
            let a = pick(&mut rng, &pool);
            let mut b = pick(&mut rng, &pool);
            if b == a {
                b = pool[rng.gen_range(0..pool.len())];
            }
            vec![a, b]
        };
        let out = g.add_wire(format!("n{i}"), Driver::PrimaryInput);
        g.add_gate(kind, inputs, out);
        pool.push(out);
    }
    promote_dangling_to_outputs(&mut g);
    g.recompute_topo().expect("generated design is acyclic");
    g.validate().expect("generated design is valid");
    g
}

/// Random fanout-free (tree) circuit: every wire feeds at most one gate, so
/// independence-based probability propagation is exact on the result.
pub fn fanout_free_tree(name: &str, n_inputs: usize, seed: u64) -> DesignGraph {
    assert!(n_inputs >= 2);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = DesignGraph::empty(name);
    let mut pool: Vec<WireId> = (0..n_inputs)
        .map(|i| g.add_primary_input(format!("i{i}")))
        .collect();
    let two_input = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
    ];
    let mut counter = 0usize;
    while pool.len() > 1 {
        let unary = rng.gen_bool(0.2);
        let out = g.add_wire(format!("t{counter}"), Driver::PrimaryInput);
        counter += 1;
        if unary {
            let idx = rng.gen_range(0..pool.len());
            let a = pool.swap_remove(idx);
            let kind = if rng.gen_bool(0.7) {
                GateKind::Not
            } else {
                GateKind::Buff
            };
            g.add_gate(kind, vec![a], out);
        } else {
            let ia = rng.gen_range(0..pool.len());
            let a = pool.swap_remove(ia);
            let ib = rng.gen_range(0..pool.len());
            let b = pool.swap_remove(ib);
            let kind = *two_input.choose(&mut rng).unwrap();
            g.add_gate(kind, vec![a, b], out);
        }
        pool.push(out);
    }
    g.push_primary_output(pool[0]);
    g.recompute_topo().unwrap();
    g.validate().unwrap();
    g
}

/// Demo design for leakage studies: a "secret" block of AND/NAND logic over
/// the data inputs (its toggles depend on what the data inputs do between a
/// vector pair) plus an optional "nonce" block of OR/NOR logic over
/// always-random mask inputs (its toggles are distribution-identical whether
/// the data inputs are fixed or random). The two blocks are structurally
/// distinct on purpose, so locality features carry signal about leakiness.
pub fn sidechannel_demo(
    name: &str,
    data_bits: usize,
    leaky_gates: usize,
    quiet_gates: usize,
    seed: u64,
) -> DesignGraph {
    assert!(data_bits >= 2 && leaky_gates >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = DesignGraph::empty(name);
    let data: Vec<WireId> = (0..data_bits)
        .map(|i| g.add_primary_input(format!("d{i}")))
        .collect();
    let n_nonce = if quiet_gates > 0 {
        (quiet_gates / 6).max(4)
    } else {
        0
    };
    let nonce: Vec<WireId> = (0..n_nonce).map(|_| g.add_mask_input()).collect();

    let grow = |rng: &mut ChaCha12Rng,
                g: &mut DesignGraph,
                pool: &mut Vec<WireId>,
                kinds: &[GateKind],
                count: usize,
                tag: &str| {
        for i in 0..count {
            let kind = *kinds.choose(rng).unwrap();
            let a = pool[rng.gen_range(0..pool.len())];
            let mut b = pool[rng.gen_range(0..pool.len())];
            if b == a && pool.len() > 1 {
                b = pool[rng.gen_range(0..pool.len())];
            }
            let name = g.fresh_name(&format!("{tag}{i}"));
            let out = g.add_wire(name, Driver::PrimaryInput);
            let inputs = if kind.arity() == 1 {
                vec![a]
            } else {
                vec![a, b]
            };
            g.add_gate(kind, inputs, out);
            pool.push(out);
        }
    };

    let mut data_pool = data;
    grow(
        &mut rng,
        &mut g,
        &mut data_pool,
        &[GateKind::And, GateKind::Nand, GateKind::And, GateKind::Not],
        leaky_gates,
        "s",
    );
    if quiet_gates > 0 {
        let mut nonce_pool = nonce;
        grow(
            &mut rng,
            &mut g,
            &mut nonce_pool,
            &[GateKind::Or, GateKind::Nor],
            quiet_gates,
            "q",
        );
    }
    promote_dangling_to_outputs(&mut g);
    g.recompute_topo().unwrap();
    g.validate().unwrap();
    g
}

/// Single layer of maskable gates over pairs of distinct data inputs. Every
/// gate's output toggles deterministically under a fixed vector pair while
/// toggling at a rate bounded away from 0 and 1 under random pairs, so each
/// one carries solid fixed-vs-random leakage.
pub fn leaky_layer(name: &str, data_bits: usize, n_gates: usize, seed: u64) -> DesignGraph {
    assert!(data_bits >= 2 && n_gates >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut g = DesignGraph::empty(name);
    let data: Vec<WireId> = (0..data_bits)
        .map(|i| g.add_primary_input(format!("d{i}")))
        .collect();
    let kinds = [GateKind::And, GateKind::Nand, GateKind::Or, GateKind::Nor];
    for i in 0..n_gates {
        let kind = *kinds.choose(&mut rng).unwrap();
        let a = rng.gen_range(0..data_bits);
        let mut b = rng.gen_range(0..data_bits);
        while b == a {
            b = rng.gen_range(0..data_bits);
        }
        let out = g.add_wire(format!("s{i}"), Driver::PrimaryInput);
        g.add_gate(kind, vec![data[a], data[b]], out);
    }
    promote_dangling_to_outputs(&mut g);
    g.recompute_topo().unwrap();
    g.validate().unwrap();
    g
}

fn promote_dangling_to_outputs(g: &mut DesignGraph) {
    let dangling: Vec<WireId> = g
        .live_wires()
        .filter(|(_, w)| w.sinks.is_empty())
        .map(|(id, _)| id)
        .collect();
    for id in dangling {
        g.push_primary_output(id);
    }
}
