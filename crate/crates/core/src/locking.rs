//! Key-gate constructs: insertion, random locking, and reversal.
//!
//! A key gate is a two-input gate spliced between a wire's driver and all of
//! its sinks, with a fresh key input on the second pin. The correct key bit
//! is the gate's identity element (XOR: 0, XNOR: 1, AND: 1, OR: 0), so the
//! locked design is equivalent to the original under the correct key.

use crate::error::NetlistError;
use crate::netlist::{DesignGraph, Driver, GateId, GateKind, WireId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// The four supported key-gate types, in the canonical dictionary order.
pub const DEFAULT_LOCK_DICT: [GateKind; 4] =
    [GateKind::Xor, GateKind::Xnor, GateKind::Or, GateKind::And];

/// Correct key bit for a lock-gate type: the identity element of the gate.
pub fn identity_key_bit(kind: GateKind) -> Option<bool> {
    match kind {
        GateKind::Xor | GateKind::Or => Some(false),
        GateKind::Xnor | GateKind::And => Some(true),
        _ => None,
    }
}

/// Record of one key-gate splice. `target` is the wire on the data pin (the
/// pre-key signal, and the origin for defender-side features); `locked_wire`
/// carries the keyed signal to the original sinks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyGateInsertion {
    pub key_gate: GateId,
    pub lock_type: GateKind,
    pub key_wire: WireId,
    pub correct_bit: bool,
    pub target: WireId,
    pub locked_wire: WireId,
}

/// Splice a key gate of `lock_type` onto `wire`. Returns the locked graph and
/// the insertion record; the input graph is untouched.
///
/// When `wire` is gate-driven the original name (and any output marker) stays
/// on the keyed side, so downstream consumers and primary-output names are
/// stable. When `wire` is an input, the keyed signal gets a fresh name and
/// takes over the sinks instead.
pub fn insert_key_gate(
    graph: &DesignGraph,
    wire: WireId,
    lock_type: GateKind,
) -> Result<(DesignGraph, KeyGateInsertion), NetlistError> {
    let mut g = graph.clone();
    let insertion = insert_key_gate_mut(&mut g, wire, lock_type)?;
    Ok((g, insertion))
}

pub(crate) fn insert_key_gate_mut(
    g: &mut DesignGraph,
    wire: WireId,
    lock_type: GateKind,
) -> Result<KeyGateInsertion, NetlistError> {
    let correct_bit = identity_key_bit(lock_type)
        .ok_or_else(|| NetlistError::NotInLockDict(lock_type.name().to_string()))?;
    let w = g.try_wire(wire)?;
    if w.driver == Driver::KeyInput {
        return Err(NetlistError::LockKeyWire {
            name: w.name.clone(),
        });
    }
    let driver = w.driver;
    let wire_name = w.name.clone();
    let (key_wire, _) = g.add_key_input(correct_bit);

    let (target, locked_wire) = match driver {
        Driver::Gate(driver_gate) => {
            // Move the driver onto a fresh pre-key wire; the key gate drives
            // the original wire, so its name and sinks stay put.
            let pre = g.add_wire(g.fresh_name(&format!("{wire_name}_pre")), driver);
            g.set_gate_output(driver_gate, pre);
            let kg = g.add_gate(lock_type, vec![pre, key_wire], wire);
            debug_assert_eq!(g.gate(kg).output, wire);
            (pre, wire)
        }
        _ => {
            // Input-driven wire: splice downstream under a fresh name.
            let post = g.add_wire(
                g.fresh_name(&format!("{wire_name}_lkd")),
                Driver::PrimaryInput,
            );
            let sinks: Vec<GateId> = g.wire(wire).sinks.clone();
            g.rewire_sinks(wire, post, Some(&sinks));
            g.swap_primary_output(wire, post);
            g.add_gate(lock_type, vec![wire, key_wire], post);
            (wire, post)
        }
    };
    let key_gate = match g.wire(locked_wire).driver {
        Driver::Gate(kg) => kg,
        _ => unreachable!("key gate drives the locked wire"),
    };
    g.recompute_topo()
        .expect("splicing a key gate cannot create a cycle");
    Ok(KeyGateInsertion {
        key_gate,
        lock_type,
        key_wire,
        correct_bit,
        target,
        locked_wire,
    })
}

/// Insert `key_size` key gates on distinct, uniformly sampled lockable wires
/// with uniformly sampled types from `lock_dict`. Deterministic under `seed`.
pub fn random_lock(
    graph: &DesignGraph,
    key_size: usize,
    lock_dict: &[GateKind],
    seed: u64,
) -> Result<(DesignGraph, Vec<KeyGateInsertion>), NetlistError> {
    let lockable = graph.lockable_wires();
    if key_size > lockable.len() {
        return Err(NetlistError::KeySizeTooLarge {
            requested: key_size,
            available: lockable.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let targets: Vec<WireId> = lockable
        .choose_multiple(&mut rng, key_size)
        .copied()
        .collect();
    let mut g = graph.clone();
    let mut insertions = Vec::with_capacity(key_size);
    for wire in targets {
        let lock_type = *lock_dict
            .get(rng.gen_range(0..lock_dict.len()))
            .expect("lock dictionary is nonempty");
        insertions.push(insert_key_gate_mut(&mut g, wire, lock_type)?);
    }
    Ok((g, insertions))
}

/// Revert a set of insertions. Returns the reverted graph and how many splices
/// were undone. Untouched key gates stay in place; reverting every insertion
/// reproduces a graph equivalent (and isomorphic by name) to the original.
pub fn remove_key_gates(
    graph: &DesignGraph,
    subset: &[KeyGateInsertion],
) -> Result<(DesignGraph, usize), NetlistError> {
    let mut g = graph.clone();
    // Newest first, so chained splices unwind from the outside in.
    let mut order: Vec<&KeyGateInsertion> = subset.iter().collect();
    order.sort_by_key(|ins| std::cmp::Reverse(ins.key_gate));
    for ins in &order {
        remove_one(&mut g, ins)?;
    }
    if !order.is_empty() {
        g.recompute_topo()
            .expect("reverting splices keeps the graph acyclic");
    }
    Ok((g, order.len()))
}

fn remove_one(g: &mut DesignGraph, ins: &KeyGateInsertion) -> Result<(), NetlistError> {
    let kg = g
        .try_gate(ins.key_gate)
        .map_err(|_| NetlistError::UnknownInsertion(ins.key_gate.index()))?;
    let valid = kg.kind == ins.lock_type
        && kg.inputs.len() == 2
        && kg.inputs[1] == ins.key_wire
        && g.try_wire(ins.key_wire).map(|w| w.driver) == Ok(Driver::KeyInput);
    if !valid {
        return Err(NetlistError::UnknownInsertion(ins.key_gate.index()));
    }
    let pre = kg.inputs[0];
    let post = kg.output;
    g.kill_gate(ins.key_gate);
    match g.wire(pre).driver {
        Driver::Gate(driver_gate) => {
            // The key gate had taken over the original wire; hand it back.
            g.set_gate_output(driver_gate, post);
            g.rewire_sinks(pre, post, None);
            g.kill_wire(pre);
        }
        _ => {
            // Downstream splice off an input wire; collapse it back.
            g.set_wire_driver(post, Driver::PrimaryInput);
            g.rewire_sinks(post, pre, None);
            g.swap_primary_output(post, pre);
            g.kill_wire(post);
        }
    }
    g.kill_wire(ins.key_wire);
    Ok(())
}

/// Sample `count` distinct wrong keys for a locked design (each differs from
/// the correct key in at least one bit). Deterministic under `seed`.
pub fn sample_wrong_keys(graph: &DesignGraph, count: usize, seed: u64) -> Vec<Vec<bool>> {
    let correct = graph.correct_key();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut keys = Vec::with_capacity(count);
    while keys.len() < count {
        let mut k: Vec<bool> = (0..correct.len()).map(|_| rng.gen()).collect();
        if k == correct {
            let flip = rng.gen_range(0..k.len());
            k[flip] = !k[flip];
        }
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys
}
