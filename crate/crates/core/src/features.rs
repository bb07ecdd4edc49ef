//! Feature extraction: structural locality encodings and functional
//! (signal/transition probability) values.
//!
//! A locality is the `loc`-gate breadth-first neighborhood of a wire or gate.
//! Gates are named G1, G2, ... in BFS order walking the fanin direction; ties
//! among frontier siblings break by ascending gate id, and localities smaller
//! than `loc` are padded with a dedicated pad class.

use crate::error::NetlistError;
use crate::netlist::{DesignGraph, Driver, GateId, GateKind, WireId, GATE_ALPHABET};
use serde::{Deserialize, Serialize};

/// One-hot classes: the eight gate kinds plus a pad class for short localities.
pub const TYPE_CLASSES: usize = GATE_ALPHABET.len() + 1;
const PAD_CLASS: usize = GATE_ALPHABET.len();

/// Where a locality walk starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureOrigin {
    /// Start from the wire's driving gate (the view used when scoring a wire
    /// for locking). Input-driven wires yield an all-pad locality.
    Wire(WireId),
    /// Start from the gate itself (the view used when scoring a gate for
    /// masking, and by structural attackers looking at a key gate).
    Gate(GateId),
}

/// The ordered gates of a locality, G1 first. May be shorter than `loc`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Locality {
    pub gates: Vec<GateId>,
}

/// Deterministic fanin BFS naming from `origin`.
pub fn locality(
    graph: &DesignGraph,
    origin: FeatureOrigin,
    loc: usize,
) -> Result<Locality, NetlistError> {
    assert!(loc >= 1);
    let start = match origin {
        FeatureOrigin::Gate(g) => {
            graph.try_gate(g)?;
            Some(g)
        }
        FeatureOrigin::Wire(w) => match graph.try_wire(w)?.driver {
            Driver::Gate(g) => Some(g),
            _ => None,
        },
    };
    let mut order: Vec<GateId> = Vec::with_capacity(loc);
    let Some(start) = start else {
        return Ok(Locality { gates: order });
    };
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    let mut seen = vec![start];
    while let Some(gate_id) = queue.pop_front() {
        if order.len() == loc {
            break;
        }
        order.push(gate_id);
        let mut frontier: Vec<GateId> = graph
            .gate(gate_id)
            .inputs
            .iter()
            .filter_map(|w| match graph.wire(*w).driver {
                Driver::Gate(g) => Some(g),
                _ => None,
            })
            .filter(|g| !seen.contains(g))
            .collect();
        frontier.sort();
        frontier.dedup();
        for g in frontier {
            seen.push(g);
            queue.push_back(g);
        }
    }
    Ok(Locality { gates: order })
}

/// Structural features of one locality: per-slot gate-type one-hots and the
/// slot-to-slot adjacency matrix (`adjacency[i][j] = 1` iff G(j+1) feeds
/// G(i+1)). Pad slots use the pad class and an all-zero adjacency row/column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralFeature {
    pub loc: usize,
    /// loc × TYPE_CLASSES, row-major.
    pub type_onehots: Vec<f64>,
    /// loc × loc, row-major.
    pub adjacency: Vec<f64>,
}

impl StructuralFeature {
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.type_onehots.len() + self.adjacency.len());
        v.extend_from_slice(&self.type_onehots);
        v.extend_from_slice(&self.adjacency);
        v
    }
}

pub fn structural_features(
    graph: &DesignGraph,
    origin: FeatureOrigin,
    loc: usize,
) -> Result<StructuralFeature, NetlistError> {
    let names = locality(graph, origin, loc)?;
    Ok(encode_locality(graph, &names, loc, |kind| {
        kind.alphabet_index()
    }))
}

/// Shared encoder; `class_of` lets callers remap gate kinds to coarser
/// classes (the structural attacker uses this to model resynthesis hiding
/// inverted gate flavors).
pub(crate) fn encode_locality(
    graph: &DesignGraph,
    names: &Locality,
    loc: usize,
    class_of: impl Fn(GateKind) -> usize,
) -> StructuralFeature {
    let mut onehots = vec![0.0; loc * TYPE_CLASSES];
    let mut adjacency = vec![0.0; loc * loc];
    for slot in 0..loc {
        match names.gates.get(slot) {
            Some(gid) => {
                let class = class_of(graph.gate(*gid).kind);
                onehots[slot * TYPE_CLASSES + class] = 1.0;
            }
            None => onehots[slot * TYPE_CLASSES + PAD_CLASS] = 1.0,
        }
    }
    for (i, gi) in names.gates.iter().enumerate() {
        for (j, gj) in names.gates.iter().enumerate() {
            if i == j {
                continue;
            }
            let feeds = graph
                .gate(*gi)
                .inputs
                .iter()
                .any(|w| graph.wire(*w).driver == Driver::Gate(*gj));
            if feeds {
                adjacency[i * loc + j] = 1.0;
            }
        }
    }
    StructuralFeature {
        loc,
        type_onehots: onehots,
        adjacency,
    }
}

/// Signal probabilities (probability of logic-1) for every live wire, indexed
/// by wire id. Inputs of all flavors sit at 0.5; gates propagate in
/// topological order under the independence assumption.
pub fn static_probabilities(graph: &DesignGraph) -> Vec<f64> {
    let mut p = vec![f64::NAN; graph.wires_len()];
    for (id, wire) in graph.live_wires() {
        if wire.driver.is_input() {
            p[id.index()] = 0.5;
        }
    }
    for &gid in graph.topo_order() {
        let gate = graph.gate(gid);
        let a = p[gate.inputs[0].index()];
        let b = if gate.inputs.len() > 1 {
            p[gate.inputs[1].index()]
        } else {
            f64::NAN
        };
        p[gate.output.index()] = static_formula(gate.kind, a, b);
    }
    p
}

/// Per-gate signal-probability formulas. The two-input table covers AND/OR;
/// the inverted and XOR-family kinds come from composition under the same
/// independence assumption.
pub fn static_formula(kind: GateKind, a: f64, b: f64) -> f64 {
    match kind {
        GateKind::Not => 1.0 - a,
        GateKind::Buff => a,
        GateKind::And => a * b,
        GateKind::Nand => 1.0 - a * b,
        GateKind::Or => a + b - a * b,
        GateKind::Nor => (1.0 - a) * (1.0 - b),
        GateKind::Xor => a + b - 2.0 * a * b,
        GateKind::Xnor => 1.0 - (a + b - 2.0 * a * b),
    }
}

/// Transition probabilities (P(out=0) * P(out=1)) for every live wire,
/// indexed by wire id, with operand signal probabilities taken from
/// `static_probs`. Input wires sit at 0.5 by convention.
pub fn transition_probabilities(graph: &DesignGraph, static_probs: &[f64]) -> Vec<f64> {
    let mut t = vec![f64::NAN; graph.wires_len()];
    for (id, wire) in graph.live_wires() {
        if wire.driver.is_input() {
            t[id.index()] = 0.5;
        }
    }
    for &gid in graph.topo_order() {
        let gate = graph.gate(gid);
        let a = static_probs[gate.inputs[0].index()];
        let b = if gate.inputs.len() > 1 {
            static_probs[gate.inputs[1].index()]
        } else {
            f64::NAN
        };
        t[gate.output.index()] = transition_formula(gate.kind, a, b);
    }
    t
}

/// Per-gate transition formulas, each of the form P(out=0) * P(out=1).
/// NOT and BUFF (absent from the two-input table) use that defining product
/// directly: A * (1 - A).
pub fn transition_formula(kind: GateKind, a: f64, b: f64) -> f64 {
    match kind {
        GateKind::Not | GateKind::Buff => a * (1.0 - a),
        GateKind::And => (1.0 - a * b) * (a * b),
        GateKind::Nand => (a * b) * (1.0 - a * b),
        GateKind::Or => (1.0 - a) * (1.0 - b) * (1.0 - (1.0 - a) * (1.0 - b)),
        GateKind::Nor => (1.0 - (1.0 - a) * (1.0 - b)) * (1.0 - a) * (1.0 - b),
        GateKind::Xor | GateKind::Xnor => {
            let s = a + b - 2.0 * a * b;
            (1.0 - s) * s
        }
    }
}

/// One-hot encoding of a lock-gate type over the locking dictionary order.
pub fn encode_lock_type(kind: GateKind, dict: &[GateKind]) -> Result<Vec<f64>, NetlistError> {
    let pos = dict
        .iter()
        .position(|k| *k == kind)
        .ok_or_else(|| NetlistError::NotInLockDict(kind.name().to_string()))?;
    let mut v = vec![0.0; dict.len()];
    v[pos] = 1.0;
    Ok(v)
}

/// The fixed column layout of assembled feature rows: structural block,
/// then the functional pair, then the lock-type block. Widths are constant
/// for a fixed (loc, dictionary) so models can refuse mismatched rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub loc: usize,
    pub lock_dict: Vec<GateKind>,
    /// Whether rows carry the (static, transition) pair.
    pub functional: bool,
}

impl FeatureLayout {
    /// Layout used by the locking flows: structural + functional + lock type.
    pub fn locking(loc: usize, lock_dict: &[GateKind]) -> Self {
        FeatureLayout {
            loc,
            lock_dict: lock_dict.to_vec(),
            functional: true,
        }
    }

    /// Layout used by the masking flows: structural only.
    pub fn masking(loc: usize) -> Self {
        FeatureLayout {
            loc,
            lock_dict: Vec::new(),
            functional: false,
        }
    }

    pub fn width(&self) -> usize {
        self.loc * TYPE_CLASSES
            + self.loc * self.loc
            + if self.functional { 2 } else { 0 }
            + self.lock_dict.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for i in 1..=self.loc {
            for kind in GATE_ALPHABET {
                names.push(format!("g{i}_is_{}", kind.name()));
            }
            names.push(format!("g{i}_is_PAD"));
        }
        for i in 1..=self.loc {
            for j in 1..=self.loc {
                names.push(format!("adj_g{i}_g{j}"));
            }
        }
        if self.functional {
            names.push("static_prob".into());
            names.push("transition_prob".into());
        }
        for kind in &self.lock_dict {
            names.push(format!("lock_is_{}", kind.name()));
        }
        names
    }

    pub fn assemble(
        &self,
        structural: &StructuralFeature,
        functional: Option<(f64, f64)>,
        lock_onehot: Option<&[f64]>,
    ) -> Vec<f64> {
        debug_assert_eq!(structural.loc, self.loc);
        let mut row = structural.values();
        if self.functional {
            let (s, t) = functional.expect("layout requires functional features");
            row.push(s);
            row.push(t);
        }
        if !self.lock_dict.is_empty() {
            row.extend_from_slice(lock_onehot.expect("layout requires a lock-type block"));
        }
        debug_assert_eq!(row.len(), self.width());
        row
    }
}
