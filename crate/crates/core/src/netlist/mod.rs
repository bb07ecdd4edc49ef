//! Gate-level design graphs: parsing, validation, simulation and low-level edits.
//!
//! A [`DesignGraph`] is a hypergraph of two-input gates: every wire has exactly
//! one driver (a gate, or an input of some flavor) and any number of sinks.
//! Graphs are immutable from the outside; transforms clone and return a new
//! graph, so they are safe to drive from concurrent workers.

mod bench_format;
pub mod generate;
mod sim;

pub use bench_format::{
    canonical_text, key_sidecar_text, parse_design, parse_design_with_key, parse_key_sidecar,
    serialize_design,
};
pub use sim::{equivalence_check, CorruptionReport, EXHAUSTIVE_INPUT_LIMIT};

use crate::error::{NetlistError, ParseError};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::fmt;

/// The supported gate alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buff,
}

/// All gate kinds, in the canonical order used for one-hot encodings.
pub const GATE_ALPHABET: [GateKind; 8] = [
    GateKind::And,
    GateKind::Nand,
    GateKind::Or,
    GateKind::Nor,
    GateKind::Xor,
    GateKind::Xnor,
    GateKind::Not,
    GateKind::Buff,
];

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Not | GateKind::Buff => 1,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buff => "BUFF",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        match name.to_ascii_uppercase().as_str() {
            "AND" => Some(GateKind::And),
            "NAND" => Some(GateKind::Nand),
            "OR" => Some(GateKind::Or),
            "NOR" => Some(GateKind::Nor),
            "XOR" => Some(GateKind::Xor),
            "XNOR" => Some(GateKind::Xnor),
            "NOT" => Some(GateKind::Not),
            "BUF" | "BUFF" => Some(GateKind::Buff),
            _ => None,
        }
    }

    /// Index of this kind in [`GATE_ALPHABET`].
    pub fn alphabet_index(self) -> usize {
        GATE_ALPHABET.iter().position(|k| *k == self).unwrap()
    }

    /// Evaluate 64 independent vectors at once, one per bit lane.
    #[inline]
    pub fn eval64(self, a: u64, b: u64) -> u64 {
        match self {
            GateKind::And => a & b,
            GateKind::Nand => !(a & b),
            GateKind::Or => a | b,
            GateKind::Nor => !(a | b),
            GateKind::Xor => a ^ b,
            GateKind::Xnor => !(a ^ b),
            GateKind::Not => !a,
            GateKind::Buff => a,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WireId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GateId(pub u32);

impl WireId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl GateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// What drives a wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Driver {
    PrimaryInput,
    KeyInput,
    MaskInput,
    /// Pseudo-input produced by cutting a flip-flop (the register output).
    DffOutput,
    Gate(GateId),
}

impl Driver {
    pub fn is_input(self) -> bool {
        !matches!(self, Driver::Gate(_))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Wire {
    pub name: String,
    pub driver: Driver,
    pub sinks: Vec<GateId>,
    pub(crate) dead: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<WireId>,
    pub output: WireId,
    pub(crate) dead: bool,
}

/// A key input wire together with the bit that unlocks it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyInput {
    pub wire: WireId,
    pub correct_bit: bool,
}

/// An immutable gate-level design.
///
/// Gates and wires live in arenas with stable ids; removed elements are
/// tombstoned rather than renumbered so that handles held by callers stay
/// valid across transforms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignGraph {
    name: String,
    gates: Vec<Gate>,
    wires: Vec<Wire>,
    primary_inputs: Vec<WireId>,
    primary_outputs: Vec<WireId>,
    key_inputs: Vec<KeyInput>,
    mask_inputs: Vec<WireId>,
    /// Flip-flop cut points as (q pseudo-input, d pseudo-output) pairs.
    dff_pairs: Vec<(WireId, WireId)>,
    next_key_index: u32,
    next_mask_index: u32,
    topo: Vec<GateId>,
}

impl DesignGraph {
    pub(crate) fn empty(name: &str) -> Self {
        DesignGraph {
            name: name.to_string(),
            gates: Vec::new(),
            wires: Vec::new(),
            primary_inputs: Vec::new(),
            primary_outputs: Vec::new(),
            key_inputs: Vec::new(),
            mask_inputs: Vec::new(),
            dff_pairs: Vec::new(),
            next_key_index: 0,
            next_mask_index: 0,
            topo: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Same design under a different name (names tag reports and manifests).
    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Number of live gates.
    pub fn gate_count(&self) -> usize {
        self.gates.iter().filter(|g| !g.dead).count()
    }

    /// Number of live wires.
    pub fn wire_count(&self) -> usize {
        self.wires.iter().filter(|w| !w.dead).count()
    }

    pub fn primary_inputs(&self) -> &[WireId] {
        &self.primary_inputs
    }

    pub fn primary_outputs(&self) -> &[WireId] {
        &self.primary_outputs
    }

    pub fn key_inputs(&self) -> &[KeyInput] {
        &self.key_inputs
    }

    pub fn mask_inputs(&self) -> &[WireId] {
        &self.mask_inputs
    }

    pub fn dff_pairs(&self) -> &[(WireId, WireId)] {
        &self.dff_pairs
    }

    pub fn correct_key(&self) -> Vec<bool> {
        self.key_inputs.iter().map(|k| k.correct_bit).collect()
    }

    pub fn wire(&self, id: WireId) -> &Wire {
        &self.wires[id.index()]
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.index()]
    }

    pub fn try_wire(&self, id: WireId) -> Result<&Wire, NetlistError> {
        self.wires
            .get(id.index())
            .filter(|w| !w.dead)
            .ok_or(NetlistError::UnknownWire(id.index()))
    }

    pub fn try_gate(&self, id: GateId) -> Result<&Gate, NetlistError> {
        self.gates
            .get(id.index())
            .filter(|g| !g.dead)
            .ok_or(NetlistError::UnknownGate(id.index()))
    }

    pub fn live_gates(&self) -> impl Iterator<Item = (GateId, &Gate)> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.dead)
            .map(|(i, g)| (GateId(i as u32), g))
    }

    pub fn live_wires(&self) -> impl Iterator<Item = (WireId, &Wire)> {
        self.wires
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.dead)
            .map(|(i, w)| (WireId(i as u32), w))
    }

    pub fn find_wire(&self, name: &str) -> Option<WireId> {
        self.wires
            .iter()
            .position(|w| !w.dead && w.name == name)
            .map(|i| WireId(i as u32))
    }

    /// Gates in the canonical topological order (inputs before sinks,
    /// ties broken by ascending gate id).
    pub fn topo_order(&self) -> &[GateId] {
        &self.topo
    }

    /// Simulation input order: primary inputs, then key inputs, then mask inputs.
    pub fn input_wires(&self) -> Vec<WireId> {
        let mut v = self.primary_inputs.clone();
        v.extend(self.key_inputs.iter().map(|k| k.wire));
        v.extend(self.mask_inputs.iter().copied());
        v
    }

    pub fn input_count(&self) -> usize {
        self.primary_inputs.len() + self.key_inputs.len() + self.mask_inputs.len()
    }

    /// Wires eligible for key-gate insertion: every live wire that is not
    /// itself a key input, in ascending id order. Input wires that feed a
    /// primary output directly (pure feedthroughs) are excluded because no
    /// splice can keep both of their IO names stable.
    pub fn lockable_wires(&self) -> Vec<WireId> {
        self.live_wires()
            .filter(|(id, w)| {
                w.driver != Driver::KeyInput
                    && !(w.driver.is_input() && self.primary_outputs.contains(id))
            })
            .map(|(id, _)| id)
            .collect()
    }

    /// Gates eligible for mask-gadget substitution, in ascending id order.
    pub fn maskable_gates(&self) -> Vec<GateId> {
        self.live_gates()
            .filter(|(_, g)| {
                matches!(
                    g.kind,
                    GateKind::And | GateKind::Or | GateKind::Nand | GateKind::Nor
                )
            })
            .map(|(id, _)| id)
            .collect()
    }

    // ---- construction and mutation (crate-internal) ----

    pub(crate) fn add_wire(&mut self, name: String, driver: Driver) -> WireId {
        let id = WireId(self.wires.len() as u32);
        self.wires.push(Wire {
            name,
            driver,
            sinks: Vec::new(),
            dead: false,
        });
        id
    }

    pub(crate) fn add_primary_input(&mut self, name: String) -> WireId {
        let id = self.add_wire(name, Driver::PrimaryInput);
        self.primary_inputs.push(id);
        id
    }

    pub(crate) fn add_key_input(&mut self, correct_bit: bool) -> (WireId, usize) {
        let n = self.next_key_index;
        self.next_key_index += 1;
        let name = self.fresh_name(&format!("keyinput{n}"));
        let id = self.add_wire(name, Driver::KeyInput);
        self.key_inputs.push(KeyInput {
            wire: id,
            correct_bit,
        });
        (id, self.key_inputs.len() - 1)
    }

    pub(crate) fn add_mask_input(&mut self) -> WireId {
        let n = self.next_mask_index;
        self.next_mask_index += 1;
        let name = self.fresh_name(&format!("maskinput{n}"));
        let id = self.add_wire(name, Driver::MaskInput);
        self.mask_inputs.push(id);
        id
    }

    pub(crate) fn register_key_input(&mut self, wire: WireId, correct_bit: bool, index: u32) {
        self.key_inputs.push(KeyInput { wire, correct_bit });
        self.next_key_index = self.next_key_index.max(index + 1);
    }

    pub(crate) fn register_mask_input(&mut self, wire: WireId, index: u32) {
        self.mask_inputs.push(wire);
        self.next_mask_index = self.next_mask_index.max(index + 1);
    }

    pub(crate) fn push_primary_output(&mut self, wire: WireId) {
        self.primary_outputs.push(wire);
    }

    pub(crate) fn push_dff_pair(&mut self, q: WireId, d: WireId) {
        self.dff_pairs.push((q, d));
    }

    pub(crate) fn add_gate(
        &mut self,
        kind: GateKind,
        inputs: Vec<WireId>,
        output: WireId,
    ) -> GateId {
        debug_assert_eq!(inputs.len(), kind.arity());
        let id = GateId(self.gates.len() as u32);
        for &w in &inputs {
            // Sink lists stay duplicate-free even when a gate reads the same
            // wire on both pins.
            if !self.wires[w.index()].sinks.contains(&id) {
                self.wires[w.index()].sinks.push(id);
            }
        }
        self.wires[output.index()].driver = Driver::Gate(id);
        self.gates.push(Gate {
            kind,
            inputs,
            output,
            dead: false,
        });
        id
    }

    /// Allocate a wire name that is not in use by any live wire, starting
    /// from `base` and appending `_<n>` on collision.
    pub(crate) fn fresh_name(&self, base: &str) -> String {
        let taken = |n: &str| self.wires.iter().any(|w| !w.dead && w.name == n);
        if !taken(base) {
            return base.to_string();
        }
        let mut n = 1usize;
        loop {
            let cand = format!("{base}_{n}");
            if !taken(&cand) {
                return cand;
            }
            n += 1;
        }
    }

    /// Re-point a gate's output to a different wire. The old output wire's
    /// driver is left for the caller to fix up.
    pub(crate) fn set_gate_output(&mut self, gate: GateId, out: WireId) {
        self.gates[gate.index()].output = out;
        self.wires[out.index()].driver = Driver::Gate(gate);
    }

    pub(crate) fn set_wire_driver(&mut self, wire: WireId, driver: Driver) {
        self.wires[wire.index()].driver = driver;
    }

    /// Redirect every sink of `from` (optionally restricted to `only`) to read
    /// `to` instead. `only = None` moves all sinks.
    pub(crate) fn rewire_sinks(&mut self, from: WireId, to: WireId, only: Option<&[GateId]>) {
        let sinks: Vec<GateId> = match only {
            Some(set) => set.to_vec(),
            None => self.wires[from.index()].sinks.clone(),
        };
        for gid in sinks {
            let gate = &mut self.gates[gid.index()];
            for inp in gate.inputs.iter_mut() {
                if *inp == from {
                    *inp = to;
                }
            }
            self.wires[from.index()].sinks.retain(|s| *s != gid);
            if !self.wires[to.index()].sinks.contains(&gid) {
                self.wires[to.index()].sinks.push(gid);
            }
        }
    }

    /// Swap `old_wire` for `new_wire` in the primary output list, preserving order.
    pub(crate) fn swap_primary_output(&mut self, old_wire: WireId, new_wire: WireId) {
        for po in self.primary_outputs.iter_mut() {
            if *po == old_wire {
                *po = new_wire;
            }
        }
    }

    pub(crate) fn kill_gate(&mut self, id: GateId) {
        let inputs = self.gates[id.index()].inputs.clone();
        for w in inputs {
            self.wires[w.index()].sinks.retain(|s| *s != id);
        }
        self.gates[id.index()].dead = true;
    }

    pub(crate) fn kill_wire(&mut self, id: WireId) {
        debug_assert!(self.wires[id.index()].sinks.is_empty());
        self.wires[id.index()].dead = true;
        self.primary_outputs.retain(|w| *w != id);
        self.primary_inputs.retain(|w| *w != id);
        if let Some(pos) = self.key_inputs.iter().position(|k| k.wire == id) {
            self.key_inputs.remove(pos);
        }
        self.mask_inputs.retain(|w| *w != id);
    }

    /// Recompute the canonical topological order. Fails on a combinational cycle.
    pub(crate) fn recompute_topo(&mut self) -> Result<(), ParseError> {
        let mut pending: Vec<usize> = vec![0; self.gates.len()];
        // Min-heap on gate id for a canonical order.
        let mut ready: BinaryHeap<std::cmp::Reverse<u32>> = BinaryHeap::new();
        let mut live = 0usize;
        for (i, gate) in self.gates.iter().enumerate() {
            if gate.dead {
                continue;
            }
            live += 1;
            let deps = gate
                .inputs
                .iter()
                .filter(|w| matches!(self.wires[w.index()].driver, Driver::Gate(_)))
                .count();
            pending[i] = deps;
            if deps == 0 {
                ready.push(std::cmp::Reverse(i as u32));
            }
        }
        let mut order = Vec::with_capacity(live);
        while let Some(std::cmp::Reverse(i)) = ready.pop() {
            order.push(GateId(i));
            let out = self.gates[i as usize].output;
            for &sink in &self.wires[out.index()].sinks {
                // A gate may read the same wire twice; decrement once per use.
                let uses = self.gates[sink.index()]
                    .inputs
                    .iter()
                    .filter(|w| **w == out)
                    .count();
                let p = &mut pending[sink.index()];
                *p -= uses.min(*p);
                if *p == 0 && !self.gates[sink.index()].dead {
                    ready.push(std::cmp::Reverse(sink.0));
                }
            }
        }
        if order.len() != live {
            // Name some wire on a cycle for the report.
            let on_cycle = self
                .gates
                .iter()
                .enumerate()
                .find(|(i, g)| !g.dead && !order.contains(&GateId(*i as u32)))
                .map(|(_, g)| self.wires[g.output.index()].name.clone())
                .unwrap_or_default();
            return Err(ParseError::CombinationalCycle { name: on_cycle });
        }
        self.topo = order;
        Ok(())
    }

    /// Check every structural invariant. Cheap enough to run after transforms.
    pub fn validate(&self) -> Result<(), ParseError> {
        for (id, wire) in self.live_wires() {
            if let Driver::Gate(g) = wire.driver {
                let gate = &self.gates[g.index()];
                if gate.dead || gate.output != id {
                    return Err(ParseError::UndrivenWire {
                        name: wire.name.clone(),
                    });
                }
            }
            let is_po = self.primary_outputs.contains(&id);
            if wire.sinks.is_empty() && !is_po {
                // Dangling wires are legal only at outputs; parser callers
                // treat anything else as a defect.
                return Err(ParseError::UndrivenWire {
                    name: format!("{} (dangling)", wire.name),
                });
            }
        }
        for (_, gate) in self.live_gates() {
            assert_eq!(gate.inputs.len(), gate.kind.arity());
        }
        for k in &self.key_inputs {
            if self.primary_inputs.contains(&k.wire) {
                return Err(ParseError::MultipleDrivers {
                    name: self.wires[k.wire.index()].name.clone(),
                });
            }
        }
        let mut probe = self.clone();
        probe.recompute_topo()?;
        Ok(())
    }

    /// FNV-1a hash of the serialized form; used to tie artifacts to a design.
    pub fn content_hash(&self) -> u64 {
        fnv1a(serialize_design(self).as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
