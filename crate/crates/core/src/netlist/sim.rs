//! Bit-parallel simulation and random/exhaustive equivalence checking.
//!
//! Simulation packs 64 independent input vectors into one machine word per
//! wire, so a single topological sweep evaluates 64 vectors. Results are
//! bit-identical to one-at-a-time evaluation.

use super::{DesignGraph, GateId};
use crate::error::NetlistError;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::HashMap;

impl DesignGraph {
    /// Evaluate 64 vectors at once. `input_words[i]` carries the 64 values of
    /// the i-th wire of [`DesignGraph::input_wires`]; the result holds one
    /// word per primary output.
    pub fn simulate64(&self, input_words: &[u64]) -> Result<Vec<u64>, NetlistError> {
        let wires = self.eval64_wires(input_words)?;
        Ok(self
            .primary_outputs()
            .iter()
            .map(|po| wires[po.index()])
            .collect())
    }

    /// Evaluate a single vector; `bits` follows [`DesignGraph::input_wires`].
    pub fn simulate(&self, bits: &[bool]) -> Result<Vec<bool>, NetlistError> {
        let words: Vec<u64> = bits.iter().map(|&b| if b { !0u64 } else { 0 }).collect();
        let outs = self.simulate64(&words)?;
        Ok(outs.iter().map(|w| w & 1 == 1).collect())
    }

    /// Evaluate 64 vectors and return the value word of every live wire,
    /// indexed by wire id. Dead wires hold zero.
    pub fn eval64_wires(&self, input_words: &[u64]) -> Result<Vec<u64>, NetlistError> {
        let expected = self.input_count();
        if input_words.len() != expected {
            return Err(NetlistError::AssignmentWidth {
                provided: input_words.len(),
                expected,
            });
        }
        let mut values = vec![0u64; self.wires_len()];
        for (slot, wire) in self.input_wires().into_iter().enumerate() {
            values[wire.index()] = input_words[slot];
        }
        self.eval64_into(self.topo_order(), &mut values);
        Ok(values)
    }

    /// Evaluate along an explicit topological order (used to check that the
    /// result does not depend on the order chosen).
    pub(crate) fn eval64_into(&self, order: &[GateId], values: &mut [u64]) {
        for &gid in order {
            let gate = self.gate(gid);
            let a = values[gate.inputs[0].index()];
            let b = if gate.inputs.len() > 1 {
                values[gate.inputs[1].index()]
            } else {
                0
            };
            values[gate.output.index()] = gate.kind.eval64(a, b);
        }
    }

    /// Upper bound of live wire indices; sizes buffers indexed by wire id.
    pub fn wires_len(&self) -> usize {
        self.live_wires()
            .map(|(id, _)| id.index() + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Outcome of comparing a design against a (locked) variant under one key.
#[derive(Clone, Debug)]
pub struct CorruptionReport {
    pub n_vectors: usize,
    pub mismatches: usize,
    pub mismatch_fraction: f64,
    /// Primary-input assignment (in the reference design's input order) of the
    /// first vector whose outputs disagree.
    pub first_witness: Option<Vec<bool>>,
    pub exhaustive: bool,
}

/// At or below this many enumerated input bits the check walks the whole
/// input space (2^20 vectors) instead of sampling.
pub const EXHAUSTIVE_INPUT_LIMIT: usize = 20;

/// Compare `reference` against `candidate` with `candidate`'s key inputs tied
/// to `key` (the reference uses its own recorded key, if any). Inputs are
/// matched by name; the sweep is exhaustive when the combined primary-input
/// and mask-input count is at most [`EXHAUSTIVE_INPUT_LIMIT`], otherwise
/// `n_vectors` uniform vectors are drawn from `seed`.
pub fn equivalence_check(
    reference: &DesignGraph,
    candidate: &DesignGraph,
    key: &[bool],
    n_vectors: usize,
    seed: u64,
) -> Result<CorruptionReport, NetlistError> {
    if key.len() != candidate.key_inputs().len() {
        return Err(NetlistError::KeyWidth {
            provided: key.len(),
            expected: candidate.key_inputs().len(),
        });
    }
    let pi_names: Vec<&str> = reference
        .primary_inputs()
        .iter()
        .map(|w| reference.wire(*w).name.as_str())
        .collect();
    let cand_pi_names: HashMap<&str, usize> = candidate
        .primary_inputs()
        .iter()
        .enumerate()
        .map(|(i, w)| (candidate.wire(*w).name.as_str(), i))
        .collect();
    if pi_names.len() != cand_pi_names.len()
        || pi_names.iter().any(|n| !cand_pi_names.contains_key(n))
    {
        return Err(NetlistError::IoNameMismatch { kind: "input" });
    }
    let po_names: Vec<&str> = reference
        .primary_outputs()
        .iter()
        .map(|w| reference.wire(*w).name.as_str())
        .collect();
    let cand_po_names: HashMap<&str, usize> = candidate
        .primary_outputs()
        .iter()
        .enumerate()
        .map(|(i, w)| (candidate.wire(*w).name.as_str(), i))
        .collect();
    if po_names.len() != cand_po_names.len()
        || po_names.iter().any(|n| !cand_po_names.contains_key(n))
    {
        return Err(NetlistError::IoNameMismatch { kind: "output" });
    }

    // Enumerated bits: shared primary inputs, then each side's mask inputs.
    let n_pis = pi_names.len();
    let n_mask_a = reference.mask_inputs().len();
    let n_mask_b = candidate.mask_inputs().len();
    let enum_bits = n_pis + n_mask_a + n_mask_b;
    let exhaustive = enum_bits <= EXHAUSTIVE_INPUT_LIMIT;
    let total: usize = if exhaustive {
        1usize << enum_bits
    } else {
        n_vectors
    };

    let ref_inputs = reference.input_wires();
    let cand_inputs = candidate.input_wires();
    let ref_key = reference.correct_key();

    // Map each enumerated bit to its slot in each design's input-word array.
    // Slot layout per design: PIs, keys, masks (see input_wires()).
    let cand_pi_slot: Vec<usize> = pi_names.iter().map(|n| cand_pi_names[n]).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    let mut first_witness: Option<Vec<bool>> = None;
    let mut done = 0usize;
    while done < total {
        let lanes = (total - done).min(64);
        let mut ref_words = vec![0u64; ref_inputs.len()];
        let mut cand_words = vec![0u64; cand_inputs.len()];
        let mut pi_words = vec![0u64; n_pis];

        let mut bit_word = |bit_index: usize| -> u64 {
            if exhaustive {
                exhaustive_word(bit_index, done)
            } else {
                rng.next_u64()
            }
        };
        for (i, w) in pi_words.iter_mut().enumerate() {
            *w = bit_word(i);
        }
        let mask_a_words: Vec<u64> = (0..n_mask_a).map(|i| bit_word(n_pis + i)).collect();
        let mask_b_words: Vec<u64> = (0..n_mask_b)
            .map(|i| bit_word(n_pis + n_mask_a + i))
            .collect();

        for (i, &w) in pi_words.iter().enumerate() {
            ref_words[i] = w;
            cand_words[cand_pi_slot[i]] = w;
        }
        for (i, k) in ref_key.iter().enumerate() {
            ref_words[n_pis + i] = if *k { !0 } else { 0 };
        }
        for (i, k) in key.iter().enumerate() {
            cand_words[cand_pi_names.len() + i] = if *k { !0 } else { 0 };
        }
        for (i, &w) in mask_a_words.iter().enumerate() {
            ref_words[n_pis + ref_key.len() + i] = w;
        }
        for (i, &w) in mask_b_words.iter().enumerate() {
            cand_words[cand_pi_names.len() + key.len() + i] = w;
        }

        let ref_out = reference.simulate64(&ref_words)?;
        let cand_out = candidate.simulate64(&cand_words)?;
        let mut diff = 0u64;
        for (i, name) in po_names.iter().enumerate() {
            diff |= ref_out[i] ^ cand_out[cand_po_names[name]];
        }
        let lane_mask = if lanes == 64 {
            !0u64
        } else {
            (1u64 << lanes) - 1
        };
        diff &= lane_mask;
        mismatches += diff.count_ones() as usize;
        if diff != 0 && first_witness.is_none() {
            let lane = diff.trailing_zeros();
            first_witness = Some(
                pi_words
                    .iter()
                    .map(|w| (w >> lane) & 1 == 1)
                    .collect::<Vec<bool>>(),
            );
        }
        done += lanes;
    }

    Ok(CorruptionReport {
        n_vectors: total,
        mismatches,
        mismatch_fraction: if total == 0 {
            0.0
        } else {
            mismatches as f64 / total as f64
        },
        first_witness,
        exhaustive,
    })
}

/// Value word for enumerated bit `bit_index` covering vectors
/// `base..base + 64`, where vector `v` assigns bit `i` to `(v >> i) & 1`.
fn exhaustive_word(bit_index: usize, base: usize) -> u64 {
    if bit_index < 6 {
        // Repeating patterns within a word: 0xAAAA.., 0xCCCC.., ...
        match bit_index {
            0 => 0xAAAA_AAAA_AAAA_AAAA,
            1 => 0xCCCC_CCCC_CCCC_CCCC,
            2 => 0xF0F0_F0F0_F0F0_F0F0,
            3 => 0xFF00_FF00_FF00_FF00,
            4 => 0xFFFF_0000_FFFF_0000,
            _ => 0xFFFF_FFFF_0000_0000,
        }
    } else {
        let block = base >> 6;
        if (block >> (bit_index - 6)) & 1 == 1 {
            !0
        } else {
            0
        }
    }
}
