//! Pluggable attack oracles and the attack-result bookkeeping used by the
//! knowledge-extraction loop.
//!
//! An oracle sees a locked design and predicts a bit per key input. A key
//! insertion counts as vulnerable when the predicted bit equals the true bit
//! (exact match, no margin); the vulnerable/resilient sets always partition
//! the key set. Pipelines depend only on this contract, so third-party
//! attacks can be plugged in without touching pipeline code.

use crate::error::{AttackError, MlError, NetlistError};
use crate::features::{encode_locality, locality, FeatureOrigin, StructuralFeature};
use crate::locking::{random_lock, DEFAULT_LOCK_DICT};
use crate::ml::{fit, Dataset, FitParams, ModelKind, TrainedModel};
use crate::netlist::{fnv1a, DesignGraph, GateId, GateKind, WireId};
use crate::util::mix_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// One oracle guess for a key input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyPrediction {
    pub key_wire: WireId,
    pub bit: bool,
    /// 0 marks an abstention; the bit is then a deterministic fallback guess.
    pub confidence: f64,
}

/// Attack interface: one prediction per key input, in key-index order.
pub trait AttackOracle: Send + Sync {
    fn name(&self) -> &'static str;
    fn predict(&self, locked: &DesignGraph) -> Result<Vec<KeyPrediction>, AttackError>;
}

#[derive(Clone, Debug)]
pub struct AttackResult {
    pub predictions: Vec<KeyPrediction>,
    /// Key indices whose bit the oracle recovered.
    pub vulnerable: Vec<usize>,
    /// Key indices the oracle got wrong.
    pub resilient: Vec<usize>,
    pub accuracy: f64,
}

pub fn run_attack(
    oracle: &dyn AttackOracle,
    locked: &DesignGraph,
    true_key: &[bool],
) -> Result<AttackResult, AttackError> {
    if locked.key_inputs().is_empty() {
        return Err(AttackError::NoKeyInputs);
    }
    if true_key.len() != locked.key_inputs().len() {
        return Err(AttackError::Netlist(NetlistError::KeyWidth {
            provided: true_key.len(),
            expected: locked.key_inputs().len(),
        }));
    }
    let predictions = oracle.predict(locked)?;
    debug_assert_eq!(predictions.len(), true_key.len());
    let mut vulnerable = Vec::new();
    let mut resilient = Vec::new();
    for (i, (pred, truth)) in predictions.iter().zip(true_key).enumerate() {
        if pred.bit == *truth {
            vulnerable.push(i);
        } else {
            resilient.push(i);
        }
    }
    let accuracy = vulnerable.len() as f64 / true_key.len() as f64;
    Ok(AttackResult {
        predictions,
        vulnerable,
        resilient,
        accuracy,
    })
}

pub fn attack_accuracy(result: &AttackResult) -> f64 {
    result.accuracy
}

/// The key gate a key input feeds (its only sink).
fn key_gate_of(locked: &DesignGraph, key_wire: WireId) -> Result<GateId, AttackError> {
    locked
        .try_wire(key_wire)?
        .sinks
        .first()
        .copied()
        .ok_or(AttackError::NoKeyInputs)
}

/// Gate classes as a structural attacker sees them: resynthesis absorbs
/// output inverters, so the inverted flavor of each pair is indistinguishable
/// from its base gate (XNOR looks like XOR, NAND like AND, NOR like OR).
fn blurred_class(kind: GateKind) -> usize {
    match kind {
        GateKind::Xnor => GateKind::Xor.alphabet_index(),
        GateKind::Nand => GateKind::And.alphabet_index(),
        GateKind::Nor => GateKind::Or.alphabet_index(),
        other => other.alphabet_index(),
    }
}

fn attacker_features(
    locked: &DesignGraph,
    key_gate: GateId,
    loc: usize,
) -> Result<StructuralFeature, NetlistError> {
    let names = locality(locked, FeatureOrigin::Gate(key_gate), loc)?;
    Ok(encode_locality(locked, &names, loc, blurred_class))
}

/// What went into a trained oracle; stored inside the model file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleManifest {
    pub corpus: Vec<String>,
    pub lock_dict: Vec<GateKind>,
    pub loc: usize,
    pub n_rounds: usize,
    pub keys_per_round: usize,
    pub seed: u64,
    pub training_rows: usize,
}

/// Machine-learning structural attack: a classifier over blurred key-gate
/// localities, trained on random lockings of reference designs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructuralOracle {
    pub loc: usize,
    pub manifest: OracleManifest,
    model: TrainedModel,
}

pub fn train_structural_oracle(
    references: &[DesignGraph],
    lock_dict: &[GateKind],
    loc: usize,
    n_rounds: usize,
    seed: u64,
) -> Result<StructuralOracle, AttackError> {
    assert!(!references.is_empty() && n_rounds >= 1);
    let columns: Vec<String> = structural_columns(loc);
    let mut data = Dataset::new(columns);
    let mut keys_per_round = usize::MAX;
    for (d, design) in references.iter().enumerate() {
        let key_size = (design.lockable_wires().len() / 4).clamp(1, 64);
        keys_per_round = keys_per_round.min(key_size);
        for round in 0..n_rounds {
            let round_seed = mix_seed(seed, (d as u64) << 32 | round as u64);
            let (locked, insertions) = random_lock(design, key_size, lock_dict, round_seed)?;
            for ins in &insertions {
                let feats = attacker_features(&locked, ins.key_gate, loc)?;
                data.push_row(feats.values(), u8::from(ins.correct_bit))
                    .expect("row width is fixed");
            }
        }
    }
    let (zeros, ones) = data.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(AttackError::DegenerateTraining);
    }
    let params = FitParams {
        max_depth: Some(10),
        n_trees: 40,
        ..FitParams::default()
    };
    let model = fit(
        ModelKind::RandomForest,
        &data,
        params,
        mix_seed(seed, 0xf17),
    )
    .map_err(AttackError::Ml)?;
    Ok(StructuralOracle {
        loc,
        manifest: OracleManifest {
            corpus: references.iter().map(|d| d.name().to_string()).collect(),
            lock_dict: lock_dict.to_vec(),
            loc,
            n_rounds,
            keys_per_round,
            seed,
            training_rows: data.len(),
        },
        model,
    })
}

fn structural_columns(loc: usize) -> Vec<String> {
    crate::features::FeatureLayout::masking(loc).column_names()
}

impl AttackOracle for StructuralOracle {
    fn name(&self) -> &'static str {
        "structural"
    }

    fn predict(&self, locked: &DesignGraph) -> Result<Vec<KeyPrediction>, AttackError> {
        let mut out = Vec::with_capacity(locked.key_inputs().len());
        for key in locked.key_inputs() {
            let kg = key_gate_of(locked, key.wire)?;
            let feats = attacker_features(locked, kg, self.loc)?;
            let score = self.model.score(&feats.values()).map_err(AttackError::Ml)?;
            out.push(KeyPrediction {
                key_wire: key.wire,
                bit: score >= 0.5,
                confidence: (score - 0.5).abs() * 2.0,
            });
        }
        Ok(out)
    }
}

const ORACLE_MAGIC: &[u8; 4] = b"GSOR";
const ORACLE_VERSION: u32 = 1;

impl StructuralOracle {
    pub fn save(&self) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(ORACLE_MAGIC);
        bytes.extend_from_slice(&ORACLE_VERSION.to_le_bytes());
        bytes.extend_from_slice(&serde_json::to_vec(self).expect("oracle serializes"));
        bytes
    }

    pub fn load(bytes: &[u8]) -> Result<StructuralOracle, AttackError> {
        if bytes.len() < 8 || &bytes[..4] != ORACLE_MAGIC {
            return Err(AttackError::Ml(MlError::BadModelFile("bad magic".into())));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != ORACLE_VERSION {
            return Err(AttackError::Ml(MlError::BadModelFile(format!(
                "version {version}"
            ))));
        }
        serde_json::from_slice(&bytes[8..])
            .map_err(|e| AttackError::Ml(MlError::BadModelFile(e.to_string())))
    }

    /// Accuracy against the recorded correct key of `locked`.
    pub fn accuracy_on(&self, locked: &DesignGraph) -> Result<f64, AttackError> {
        let key = locked.correct_key();
        Ok(run_attack(self, locked, &key)?.accuracy)
    }
}

/// Constant-propagation heuristic in the spirit of resynthesis-free key
/// sweeping: for each key bit, both constant cofactors are propagated and the
/// oracle predicts the bit that keeps more of the design intact (the correct
/// key turns the key gate into plain wiring; the wrong one folds logic away).
/// Symmetric key gates (XOR/XNOR) tie: the oracle abstains with confidence 0
/// and falls back to a deterministic pseudorandom guess keyed by the design
/// and key index, since an attack must still emit a full key.
#[derive(Clone, Copy, Debug, Default)]
pub struct SweepHeuristic;

impl AttackOracle for SweepHeuristic {
    fn name(&self) -> &'static str {
        "sweep-heuristic"
    }

    fn predict(&self, locked: &DesignGraph) -> Result<Vec<KeyPrediction>, AttackError> {
        Ok(sweep_heuristic_oracle(locked))
    }
}

/// Per-key predictions; empty when the design has no key inputs.
pub fn sweep_heuristic_oracle(locked: &DesignGraph) -> Vec<KeyPrediction> {
    let tie_salt = fnv1a(locked.name().as_bytes());
    locked
        .key_inputs()
        .iter()
        .enumerate()
        .map(|(index, key)| {
            let e0 = folded_gate_count(locked, key.wire, false);
            let e1 = folded_gate_count(locked, key.wire, true);
            let (bit, diff) = if e0 == e1 {
                (
                    mix_seed(tie_salt, key.wire.0 as u64 ^ (index as u64) << 32) & 1 == 1,
                    0,
                )
            } else if e0 < e1 {
                (false, e1 - e0)
            } else {
                (true, e0 - e1)
            };
            KeyPrediction {
                key_wire: key.wire,
                bit,
                confidence: diff as f64 / (e0 + e1).max(1) as f64,
            }
        })
        .collect()
}

/// Number of gates a constant assignment to `key_wire` folds away: gates whose
/// output becomes a known constant, plus gates that reduce to plain wiring or
/// an inversion of a single unknown input.
fn folded_gate_count(g: &DesignGraph, key_wire: WireId, bit: bool) -> usize {
    // Ternary forward propagation; None = unknown.
    let mut value: Vec<Option<bool>> = vec![None; g.wires_len()];
    value[key_wire.index()] = Some(bit);
    let mut folded = 0usize;
    for &gid in g.topo_order() {
        let gate = g.gate(gid);
        let a = value[gate.inputs[0].index()];
        let b = gate.inputs.get(1).map(|w| value[w.index()]).unwrap_or(None);
        let (out, gone) = match gate.kind {
            GateKind::Not => (a.map(|v| !v), a.is_some()),
            GateKind::Buff => (a, a.is_some()),
            GateKind::And | GateKind::Nand => {
                let raw = match (a, b) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                };
                let inv = gate.kind == GateKind::Nand;
                (
                    raw.map(|v| v ^ inv),
                    raw.is_some() || a.is_some() || b.is_some(),
                )
            }
            GateKind::Or | GateKind::Nor => {
                let raw = match (a, b) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                };
                let inv = gate.kind == GateKind::Nor;
                (
                    raw.map(|v| v ^ inv),
                    raw.is_some() || a.is_some() || b.is_some(),
                )
            }
            GateKind::Xor | GateKind::Xnor => {
                let raw = match (a, b) {
                    (Some(x), Some(y)) => Some(x ^ y),
                    _ => None,
                };
                let inv = gate.kind == GateKind::Xnor;
                (
                    raw.map(|v| v ^ inv),
                    raw.is_some() || a.is_some() || b.is_some(),
                )
            }
        };
        value[gate.output.index()] = out;
        if gone {
            folded += 1;
        }
    }
    folded
}

/// Test stub: always recovers the recorded correct key.
#[derive(Clone, Copy, Debug, Default)]
pub struct PerfectOracle;

impl AttackOracle for PerfectOracle {
    fn name(&self) -> &'static str {
        "perfect"
    }

    fn predict(&self, locked: &DesignGraph) -> Result<Vec<KeyPrediction>, AttackError> {
        Ok(locked
            .key_inputs()
            .iter()
            .map(|k| KeyPrediction {
                key_wire: k.wire,
                bit: k.correct_bit,
                confidence: 1.0,
            })
            .collect())
    }
}

/// Test stub: always guesses the complement of the correct key.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlwaysWrongOracle;

impl AttackOracle for AlwaysWrongOracle {
    fn name(&self) -> &'static str {
        "always-wrong"
    }

    fn predict(&self, locked: &DesignGraph) -> Result<Vec<KeyPrediction>, AttackError> {
        Ok(locked
            .key_inputs()
            .iter()
            .map(|k| KeyPrediction {
                key_wire: k.wire,
                bit: !k.correct_bit,
                confidence: 1.0,
            })
            .collect())
    }
}

/// Test stub: seeded uniform guesses.
#[derive(Clone, Copy, Debug)]
pub struct CoinFlipOracle {
    pub seed: u64,
}

impl AttackOracle for CoinFlipOracle {
    fn name(&self) -> &'static str {
        "coin-flip"
    }

    fn predict(&self, locked: &DesignGraph) -> Result<Vec<KeyPrediction>, AttackError> {
        let mut rng =
            ChaCha12Rng::seed_from_u64(mix_seed(self.seed, fnv1a(locked.name().as_bytes())));
        Ok(locked
            .key_inputs()
            .iter()
            .map(|k| KeyPrediction {
                key_wire: k.wire,
                bit: rng.gen(),
                confidence: 0.0,
            })
            .collect())
    }
}

/// Default key dictionary re-exported for oracle training call sites.
pub const ORACLE_LOCK_DICT: [GateKind; 4] = DEFAULT_LOCK_DICT;
