//! Simulated power traces, Welch's-t leakage estimation, and masked-gadget
//! substitution.
//!
//! The power model is a zero-delay toggle count: each trace applies a pair of
//! input vectors and a gate's sample is 1 when its output differs between the
//! two. The fixed class replays one designated vector pair (derived from the
//! design name and recorded); the random class draws a fresh uniform pair per
//! trace. Mask inputs are drawn fresh and uniform for every vector in both
//! classes, and key inputs sit at the recorded correct key in both classes.

use crate::error::NetlistError;
use crate::netlist::{fnv1a, DesignGraph, Driver, GateId, GateKind, WireId};
use crate::util::mix_seed;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceClass {
    Fixed,
    Random,
}

/// Per-gate toggle samples for one class, bit-packed 64 traces per word.
#[derive(Clone, Debug)]
pub struct TraceSet {
    pub class: TraceClass,
    pub n: usize,
    /// Dense slot -> gate id, ascending.
    pub gate_ids: Vec<GateId>,
    /// One bit-plane per slot, ceil(n / 64) words each.
    pub bits: Vec<Vec<u64>>,
    /// The designated vector pair of the fixed class (primary inputs only).
    pub fixed_pair: Option<(Vec<bool>, Vec<bool>)>,
}

impl TraceSet {
    pub fn width(&self) -> usize {
        self.gate_ids.len()
    }

    /// Number of traces in which the slot's gate toggled.
    pub fn ones(&self, slot: usize) -> usize {
        self.bits[slot]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Expand a slot to one f64 sample per trace (0.0 / 1.0).
    pub fn samples(&self, slot: usize) -> Vec<f64> {
        (0..self.n)
            .map(|t| ((self.bits[slot][t / 64] >> (t % 64)) & 1) as f64)
            .collect()
    }
}

/// Welch's t statistic between two sample sets, using sample standard
/// deviations. When both variances vanish the statistic is 0 for equal means
/// and an infinity sentinel (signed) otherwise.
pub fn tvla_t(q0: &[f64], q1: &[f64]) -> f64 {
    assert!(
        q0.len() >= 2 && q1.len() >= 2,
        "need at least 2 samples per set"
    );
    let n0 = q0.len() as f64;
    let n1 = q1.len() as f64;
    let m0 = q0.iter().sum::<f64>() / n0;
    let m1 = q1.iter().sum::<f64>() / n1;
    let v0 = q0.iter().map(|x| (x - m0) * (x - m0)).sum::<f64>() / (n0 - 1.0);
    let v1 = q1.iter().map(|x| (x - m1) * (x - m1)).sum::<f64>() / (n1 - 1.0);
    welch(m0, v0, n0, m1, v1, n1)
}

/// Welch's t from toggle counts (Bernoulli samples reduce to popcounts).
pub fn tvla_t_counts(n0: usize, ones0: usize, n1: usize, ones1: usize) -> f64 {
    let (n0f, n1f) = (n0 as f64, n1 as f64);
    let m0 = ones0 as f64 / n0f;
    let m1 = ones1 as f64 / n1f;
    // Sample variance of a 0/1 vector with k ones: n/(n-1) * p(1-p).
    let v0 = n0f / (n0f - 1.0) * m0 * (1.0 - m0);
    let v1 = n1f / (n1f - 1.0) * m1 * (1.0 - m1);
    welch(m0, v0, n0f, m1, v1, n1f)
}

fn welch(m0: f64, v0: f64, n0: f64, m1: f64, v1: f64, n1: f64) -> f64 {
    let denom = (v0 / n0 + v1 / n1).sqrt();
    if denom == 0.0 {
        if m0 == m1 {
            0.0
        } else if m0 > m1 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (m0 - m1) / denom
    }
}

/// Absolute per-gate t statistic between fixed- and random-class toggles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeakageMap {
    /// |t| by gate arena index; NaN for dead slots.
    values: Vec<f64>,
    pub n_traces: usize,
}

impl LeakageMap {
    pub fn get(&self, gate: GateId) -> f64 {
        self.values[gate.index()]
    }

    pub fn iter<'a>(&'a self, graph: &'a DesignGraph) -> impl Iterator<Item = (GateId, f64)> + 'a {
        graph.live_gates().map(|(id, _)| (id, self.get(id)))
    }

    /// CSV: gate output wire name, |t|.
    pub fn to_csv(&self, graph: &DesignGraph) -> String {
        let mut out = String::from("gate_output,abs_t\n");
        for (id, gate) in graph.live_gates() {
            out.push_str(&format!(
                "{},{}\n",
                graph.wire(gate.output).name,
                self.get(id)
            ));
        }
        out
    }
}

const TRACE_BATCH: usize = 64;

/// Simulate `n_traces` toggle traces per class. Batches of 64 traces are
/// generated in parallel shards with seeds derived from (`seed`, class,
/// batch index), so results are identical for any worker count.
pub fn simulate_power_traces(
    graph: &DesignGraph,
    n_traces: usize,
    seed: u64,
) -> Result<(TraceSet, TraceSet), NetlistError> {
    let fixed = simulate_class(graph, n_traces, seed, TraceClass::Fixed)?;
    let random = simulate_class(graph, n_traces, seed, TraceClass::Random)?;
    Ok((fixed, random))
}

/// The designated fixed-class vector pair for a design: derived from the
/// design name so reruns are reproducible, covering primary inputs only.
pub fn fixed_vector_pair(graph: &DesignGraph) -> (Vec<bool>, Vec<bool>) {
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(fnv1a(graph.name().as_bytes()), 0x46495845));
    let n = graph.primary_inputs().len();
    let a: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    let b: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    (a, b)
}

fn simulate_class(
    graph: &DesignGraph,
    n_traces: usize,
    seed: u64,
    class: TraceClass,
) -> Result<TraceSet, NetlistError> {
    let gate_ids: Vec<GateId> = graph.live_gates().map(|(id, _)| id).collect();
    let out_wires: Vec<usize> = gate_ids
        .iter()
        .map(|id| graph.gate(*id).output.index())
        .collect();
    let n_pis = graph.primary_inputs().len();
    let key_words: Vec<u64> = graph
        .correct_key()
        .iter()
        .map(|&b| if b { !0u64 } else { 0 })
        .collect();
    let n_masks = graph.mask_inputs().len();
    let fixed_pair = fixed_vector_pair(graph);
    let class_salt = match class {
        TraceClass::Fixed => 0xAAu64,
        TraceClass::Random => 0xBBu64,
    };

    let n_batches = n_traces.div_ceil(TRACE_BATCH);
    let batch_planes: Vec<Vec<u64>> = (0..n_batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(mix_seed(seed, class_salt << 32 | batch as u64));
            let mut w1 = vec![0u64; graph.input_count()];
            let mut w2 = vec![0u64; graph.input_count()];
            for i in 0..n_pis {
                match class {
                    TraceClass::Fixed => {
                        w1[i] = if fixed_pair.0[i] { !0 } else { 0 };
                        w2[i] = if fixed_pair.1[i] { !0 } else { 0 };
                    }
                    TraceClass::Random => {
                        w1[i] = rng.next_u64();
                        w2[i] = rng.next_u64();
                    }
                }
            }
            for (i, kw) in key_words.iter().enumerate() {
                w1[n_pis + i] = *kw;
                w2[n_pis + i] = *kw;
            }
            for i in 0..n_masks {
                // Fresh uniform masks for every vector of every trace.
                w1[n_pis + key_words.len() + i] = rng.next_u64();
                w2[n_pis + key_words.len() + i] = rng.next_u64();
            }
            let v1 = graph.eval64_wires(&w1).expect("input width is correct");
            let v2 = graph.eval64_wires(&w2).expect("input width is correct");
            out_wires.iter().map(|&w| v1[w] ^ v2[w]).collect()
        })
        .collect();

    let words_per_gate = n_batches;
    let mut bits: Vec<Vec<u64>> = vec![Vec::with_capacity(words_per_gate); gate_ids.len()];
    for plane in &batch_planes {
        for (slot, word) in plane.iter().enumerate() {
            bits[slot].push(*word);
        }
    }
    // Zero the padding lanes of the final partial batch.
    let tail = n_traces % TRACE_BATCH;
    if tail != 0 {
        let mask = (1u64 << tail) - 1;
        for plane in bits.iter_mut() {
            if let Some(last) = plane.last_mut() {
                *last &= mask;
            }
        }
    }
    Ok(TraceSet {
        class,
        n: n_traces,
        gate_ids,
        bits,
        fixed_pair: match class {
            TraceClass::Fixed => Some(fixed_pair),
            TraceClass::Random => None,
        },
    })
}

/// Per-gate |t| between the fixed and random toggle populations.
pub fn per_gate_leakage(
    graph: &DesignGraph,
    n_traces: usize,
    seed: u64,
) -> Result<LeakageMap, NetlistError> {
    let (fixed, random) = simulate_power_traces(graph, n_traces, seed)?;
    let max_idx = graph
        .live_gates()
        .map(|(id, _)| id.index() + 1)
        .max()
        .unwrap_or(0);
    let mut values = vec![f64::NAN; max_idx];
    for (slot, gate) in fixed.gate_ids.iter().enumerate() {
        let t = tvla_t_counts(fixed.n, fixed.ones(slot), random.n, random.ones(slot));
        values[gate.index()] = t.abs();
    }
    Ok(LeakageMap { values, n_traces })
}

/// Reporting convention for single-gate pass/fail: |t| below 4.5 is treated
/// as leakage-free at 10k traces.
pub const TVLA_THRESHOLD: f64 = 4.5;

/// Record of one masked-gadget substitution. `core_gate` produces the output
/// share and stands in for the original gate in before/after leakage
/// comparisons; `unmask_gate` is the boundary XOR that restores the plain
/// value so the masked design stays functionally equivalent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskInsertion {
    pub original_gate: GateId,
    pub kind: GateKind,
    pub output_wire: WireId,
    pub core_gate: GateId,
    pub unmask_gate: GateId,
    pub mask_wires: [WireId; 3],
}

/// Replace `gate` with a Boolean-masked gadget over fresh mask inputs
/// (m_a, m_b, r). Operands are split into XOR shares, the masked AND core
/// accumulates the four partial products onto r one at a time, and OR/NAND/
/// NOR come from De Morgan inversions in the share domain. A boundary XOR
/// unmasks the result so downstream logic is untouched.
pub fn apply_mask_gadget(
    graph: &DesignGraph,
    gate: GateId,
) -> Result<(DesignGraph, MaskInsertion), NetlistError> {
    let mut g = graph.clone();
    let ins = apply_mask_gadget_mut(&mut g, gate)?;
    Ok((g, ins))
}

pub(crate) fn apply_mask_gadget_mut(
    g: &mut DesignGraph,
    gate_id: GateId,
) -> Result<MaskInsertion, NetlistError> {
    let gate = g.try_gate(gate_id)?.clone();
    let kind = gate.kind;
    if !matches!(
        kind,
        GateKind::And | GateKind::Or | GateKind::Nand | GateKind::Nor
    ) {
        return Err(NetlistError::Unmaskable(kind.name().to_string()));
    }
    let (a, b) = (gate.inputs[0], gate.inputs[1]);
    let out = gate.output;
    let tag = g.mask_inputs().len();

    let m_a = g.add_mask_input();
    let m_b = g.add_mask_input();
    let r = g.add_mask_input();

    let wire = |g: &mut DesignGraph, role: &str| {
        let name = g.fresh_name(&format!("mg{tag}_{role}"));
        g.add_wire(name, Driver::PrimaryInput)
    };
    let gate2 = |g: &mut DesignGraph, kind: GateKind, x: WireId, y: WireId, role: &str| {
        let w = wire(g, role);
        g.add_gate(kind, vec![x, y], w);
        w
    };
    let gate1 = |g: &mut DesignGraph, kind: GateKind, x: WireId, role: &str| {
        let w = wire(g, role);
        g.add_gate(kind, vec![x], w);
        w
    };

    // Shares; OR/NOR compute on inverted operands (De Morgan).
    let am = gate2(g, GateKind::Xor, a, m_a, "am");
    let bm = gate2(g, GateKind::Xor, b, m_b, "bm");
    let invert_inputs = matches!(kind, GateKind::Or | GateKind::Nor);
    let (xa, xb) = if invert_inputs {
        (
            gate1(g, GateKind::Not, am, "amn"),
            gate1(g, GateKind::Not, bm, "bmn"),
        )
    } else {
        (am, bm)
    };

    // z = ((((r ^ xa·xb) ^ xa·m_b) ^ xb·m_a) ^ m_a·m_b); z ^ r = x AND y.
    let p0 = gate2(g, GateKind::And, xa, xb, "p0");
    let z0 = gate2(g, GateKind::Xor, r, p0, "z0");
    let p1 = gate2(g, GateKind::And, xa, m_b, "p1");
    let z1 = gate2(g, GateKind::Xor, z0, p1, "z1");
    let p2 = gate2(g, GateKind::And, xb, m_a, "p2");
    let z2 = gate2(g, GateKind::Xor, z1, p2, "z2");
    let p3 = gate2(g, GateKind::And, m_a, m_b, "p3");
    let z3 = gate2(g, GateKind::Xor, z2, p3, "z3");

    // Output-share inversion for the De Morgan complement.
    let invert_output = matches!(kind, GateKind::Or | GateKind::Nand);
    let zf = if invert_output {
        gate1(g, GateKind::Not, z3, "zn")
    } else {
        z3
    };
    let core_gate = match g.wire(zf).driver {
        Driver::Gate(id) => id,
        _ => unreachable!("share wire is gate-driven"),
    };

    // Boundary unmask takes over the original output wire.
    g.kill_gate(gate_id);
    let unmask_gate = g.add_gate(GateKind::Xor, vec![zf, r], out);
    g.recompute_topo()
        .expect("gadget insertion keeps the graph acyclic");
    Ok(MaskInsertion {
        original_gate: gate_id,
        kind,
        output_wire: out,
        core_gate,
        unmask_gate,
        mask_wires: [m_a, m_b, r],
    })
}

const TRACE_MAGIC: &[u8; 4] = b"GSTR";
const TRACE_VERSION: u32 = 1;

/// Columnar binary trace layout: header (magic, version, design hash, class,
/// n, width), then the gate-id table, then each gate's bit-plane.
pub fn write_trace_set(set: &TraceSet, design_hash: u64) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
    out.extend_from_slice(&design_hash.to_le_bytes());
    out.push(match set.class {
        TraceClass::Fixed => 0,
        TraceClass::Random => 1,
    });
    out.extend_from_slice(&(set.n as u32).to_le_bytes());
    out.extend_from_slice(&(set.width() as u32).to_le_bytes());
    for id in &set.gate_ids {
        out.extend_from_slice(&id.0.to_le_bytes());
    }
    for plane in &set.bits {
        for word in plane {
            out.extend_from_slice(&word.to_le_bytes());
        }
    }
    out
}

pub fn read_trace_set(bytes: &[u8]) -> Result<(TraceSet, u64), NetlistError> {
    let bad = || NetlistError::UnknownWire(0);
    if bytes.len() < 25 || &bytes[..4] != TRACE_MAGIC {
        return Err(bad());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != TRACE_VERSION {
        return Err(bad());
    }
    let design_hash = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let class = if bytes[16] == 0 {
        TraceClass::Fixed
    } else {
        TraceClass::Random
    };
    let n = u32::from_le_bytes(bytes[17..21].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[21..25].try_into().unwrap()) as usize;
    let mut at = 25;
    let mut gate_ids = Vec::with_capacity(width);
    for _ in 0..width {
        gate_ids.push(GateId(u32::from_le_bytes(
            bytes.get(at..at + 4).ok_or_else(bad)?.try_into().unwrap(),
        )));
        at += 4;
    }
    let words = n.div_ceil(64);
    let mut bits = Vec::with_capacity(width);
    for _ in 0..width {
        let mut plane = Vec::with_capacity(words);
        for _ in 0..words {
            plane.push(u64::from_le_bytes(
                bytes.get(at..at + 8).ok_or_else(bad)?.try_into().unwrap(),
            ));
            at += 8;
        }
        bits.push(plane);
    }
    Ok((
        TraceSet {
            class,
            n,
            gate_ids,
            bits,
            fixed_pair: None,
        },
        design_hash,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{equivalence_check, parse_design};

    #[test]
    fn t_is_zero_for_identical_sets() {
        let q: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        assert_eq!(tvla_t(&q, &q.clone()), 0.0);
    }

    #[test]
    fn t_equals_ten_for_unit_spread_means() {
        // 200 samples per set, sample std exactly 1, means 1 and 0:
        // t = (1 - 0) / sqrt(1/200 + 1/200) = 10.
        let d = (199.0f64 / 200.0).sqrt();
        let q0: Vec<f64> = (0..200)
            .map(|i| if i < 100 { 1.0 + d } else { 1.0 - d })
            .collect();
        let q1: Vec<f64> = (0..200).map(|i| if i < 100 { d } else { -d }).collect();
        let t = tvla_t(&q0, &q1);
        assert!((t - 10.0).abs() < 1e-9, "t = {t}");
    }

    #[test]
    fn zero_variance_sentinels() {
        let zeros = vec![0.0; 10];
        let ones = vec![1.0; 10];
        assert_eq!(tvla_t(&zeros, &zeros.clone()), 0.0);
        assert_eq!(tvla_t(&ones, &zeros.clone()), f64::INFINITY);
        assert_eq!(tvla_t(&zeros, &ones.clone()), f64::NEG_INFINITY);
    }

    #[test]
    fn antisymmetry_and_invariance() {
        let q0: Vec<f64> = (0..40).map(|i| ((i * 13) % 5) as f64).collect();
        let q1: Vec<f64> = (0..35).map(|i| ((i * 7) % 9) as f64 * 0.5).collect();
        let t = tvla_t(&q0, &q1);
        assert!((tvla_t(&q1, &q0) + t).abs() < 1e-12);
        let shift = |v: &[f64], c: f64| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let scale = |v: &[f64], k: f64| v.iter().map(|x| x * k).collect::<Vec<_>>();
        assert!((tvla_t(&shift(&q0, 3.5), &shift(&q1, 3.5)) - t).abs() < 1e-9);
        assert!((tvla_t(&scale(&q0, 2.25), &scale(&q1, 2.25)) - t).abs() < 1e-9);
    }

    #[test]
    fn counts_match_expanded_samples() {
        let t1 = tvla_t_counts(100, 37, 120, 64);
        let mut q0 = vec![1.0; 37];
        q0.extend(vec![0.0; 63]);
        let mut q1 = vec![1.0; 64];
        q1.extend(vec![0.0; 56]);
        let t2 = tvla_t(&q0, &q1);
        assert!((t1 - t2).abs() < 1e-12);
    }

    #[test]
    fn fixed_class_toggles_are_constant() {
        let g = parse_design(include_str!("../data/c17.bench")).unwrap();
        let (fixed, _) = simulate_power_traces(&g, 256, 11).unwrap();
        for slot in 0..fixed.width() {
            let ones = fixed.ones(slot);
            assert!(ones == 0 || ones == 256, "slot {slot} toggled {ones}/256");
        }
    }

    #[test]
    fn inverter_toggle_rate_near_half() {
        let g = parse_design("INPUT(a)\nOUTPUT(y)\ny = NOT(a)").unwrap();
        let (_, random) = simulate_power_traces(&g, 10000, 3).unwrap();
        let rate = random.ones(0) as f64 / 10000.0;
        assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn leakage_grows_with_trace_count() {
        // AND over two data inputs: the fixed pair toggles deterministically,
        // the random class toggles at ~3/8, so |t| grows like sqrt(n).
        let g = parse_design("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)").unwrap();
        let t1 = per_gate_leakage(&g, 1000, 5).unwrap().get(GateId(0));
        let t4 = per_gate_leakage(&g, 4000, 5).unwrap().get(GateId(0));
        assert!(t1 > TVLA_THRESHOLD);
        assert!(t4 > t1, "t4 {t4} <= t1 {t1}");
    }

    #[test]
    fn constant_gate_has_zero_t() {
        // y = AND(a, NOT(a)) == 0 regardless of input.
        let g = parse_design("INPUT(a)\nOUTPUT(y)\nn = NOT(a)\ny = AND(a, n)").unwrap();
        let y = g.find_wire("y").unwrap();
        let map = per_gate_leakage(&g, 2000, 9).unwrap();
        let gate = match g.wire(y).driver {
            Driver::Gate(id) => id,
            _ => unreachable!(),
        };
        assert_eq!(map.get(gate), 0.0);
    }

    #[test]
    fn masked_gadgets_stay_equivalent_exhaustively() {
        for kind in ["AND", "OR", "NAND", "NOR"] {
            let src = format!("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = {kind}(a, b)");
            let g = parse_design(&src).unwrap();
            let (masked, ins) = apply_mask_gadget(&g, GateId(0)).unwrap();
            assert_eq!(masked.mask_inputs().len(), 3);
            // 2 data bits x 3 mask bits = 32 exhaustive cases.
            let report = equivalence_check(&g, &masked, &[], 0, 0).unwrap();
            assert!(report.exhaustive);
            assert_eq!(report.n_vectors, 32);
            assert_eq!(report.mismatches, 0, "{kind} gadget broke equivalence");
            assert_ne!(ins.core_gate, ins.unmask_gate);
        }
    }

    #[test]
    fn masking_an_inverter_is_rejected() {
        let g = parse_design("INPUT(a)\nOUTPUT(y)\ny = NOT(a)").unwrap();
        let err = apply_mask_gadget(&g, GateId(0)).unwrap_err();
        assert_eq!(err, NetlistError::Unmaskable("NOT".into()));
    }

    #[test]
    fn gadget_internals_are_first_order_independent() {
        let g = parse_design("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NOR(a, b)").unwrap();
        let (masked, ins) = apply_mask_gadget(&g, GateId(0)).unwrap();
        // Internal wires: everything the gadget added except the unmasked
        // boundary output.
        let internal: Vec<WireId> = masked
            .live_wires()
            .map(|(id, _)| id)
            .filter(|id| {
                let w = masked.wire(*id);
                w.name.starts_with("mg0_") || w.driver == Driver::MaskInput
            })
            .collect();
        assert!(internal.len() >= 10);
        // Tabulate P(wire = 1 | a, b) over uniform masks; all four data cases
        // must agree exactly for every single internal wire.
        let mut counts: Vec<[u32; 4]> = vec![[0; 4]; masked.wires_len()];
        for data in 0..4u32 {
            for masks in 0..8u32 {
                let mut bits = Vec::new();
                bits.push(data & 1 == 1);
                bits.push(data & 2 == 2);
                for m in 0..3 {
                    bits.push(masks >> m & 1 == 1);
                }
                let words: Vec<u64> = bits.iter().map(|&b| if b { !0 } else { 0 }).collect();
                let values = masked.eval64_wires(&words).unwrap();
                for &w in &internal {
                    if values[w.index()] & 1 == 1 {
                        counts[w.index()][data as usize] += 1;
                    }
                }
            }
        }
        for &w in &internal {
            let c = counts[w.index()];
            assert!(
                c[1] == c[0] && c[2] == c[0] && c[3] == c[0],
                "wire {} distribution depends on data: {:?}",
                masked.wire(w).name,
                c
            );
        }
        let _ = ins;
    }

    #[test]
    fn masked_core_leakage_below_threshold() {
        let g = parse_design("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)").unwrap();
        let before = per_gate_leakage(&g, 10000, 21).unwrap().get(GateId(0));
        let (masked, ins) = apply_mask_gadget(&g, GateId(0)).unwrap();
        let map = per_gate_leakage(&masked, 10000, 21).unwrap();
        let core = map.get(ins.core_gate);
        assert!(before > TVLA_THRESHOLD, "before {before}");
        assert!(core < TVLA_THRESHOLD, "core {core}");
        // Every internal gadget gate is mask-randomized.
        for (id, gate) in masked.live_gates() {
            if id != ins.unmask_gate && masked.wire(gate.output).name.starts_with("mg0_") {
                assert!(map.get(id) < TVLA_THRESHOLD, "gate {id:?} leaks");
            }
        }
    }

    #[test]
    fn trace_files_roundtrip() {
        let g = parse_design(include_str!("../data/c17.bench")).unwrap();
        let (fixed, random) = simulate_power_traces(&g, 100, 2).unwrap();
        for set in [fixed, random] {
            let bytes = write_trace_set(&set, g.content_hash());
            let (back, hash) = read_trace_set(&bytes).unwrap();
            assert_eq!(hash, g.content_hash());
            assert_eq!(back.n, set.n);
            assert_eq!(back.gate_ids, set.gate_ids);
            assert_eq!(back.bits, set.bits);
        }
    }

    #[test]
    fn zero_traces_yield_empty_sets() {
        let g = parse_design(include_str!("../data/c17.bench")).unwrap();
        let (fixed, random) = simulate_power_traces(&g, 0, 0).unwrap();
        assert_eq!(fixed.n, 0);
        assert_eq!(random.ones(0), 0);
    }

    #[test]
    fn sharded_equals_unsharded() {
        // Same seed, different rayon pool sizes; byte-identical planes.
        let g = crate::netlist::generate::random_design("s", 8, 120, 4);
        let (f1, r1) = simulate_power_traces(&g, 1000, 77).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let (f2, r2) = pool.install(|| simulate_power_traces(&g, 1000, 77).unwrap());
        assert_eq!(f1.bits, f2.bits);
        assert_eq!(r1.bits, r2.bits);
    }
}
