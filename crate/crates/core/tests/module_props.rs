//! Cross-module invariants that need more machinery than unit tests:
//! corruption coverage of wrong keys, feature stability under gate
//! relabeling, and generator-driven round-trip properties.

use gatesmith_core::features::{structural_features, FeatureOrigin};
use gatesmith_core::locking::{random_lock, sample_wrong_keys, DEFAULT_LOCK_DICT};
use gatesmith_core::netlist::{
    canonical_text, equivalence_check, generate, parse_design, serialize_design,
};
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[test]
fn wrong_keys_corrupt_outputs() {
    let design = generate::random_design("corrupt", 16, 1500, 40);
    let (locked, _) = random_lock(&design, 128, &DEFAULT_LOCK_DICT, 9).unwrap();
    let wrong_keys = sample_wrong_keys(&locked, 40, 11);
    let corrupting = wrong_keys
        .iter()
        .filter(|key| {
            let report = equivalence_check(&design, &locked, key, 10_000, 3).unwrap();
            report.mismatch_fraction > 0.0
        })
        .count();
    let fraction = corrupting as f64 / wrong_keys.len() as f64;
    assert!(
        fraction >= 0.95,
        "only {corrupting}/{} wrong keys corrupted outputs",
        wrong_keys.len()
    );
}

#[test]
fn features_stable_under_gate_reordering() {
    // A pure chain has no BFS ties, so shuffling the definition order (which
    // permutes gate ids) must not change features at all.
    let chain = "INPUT(a)\nINPUT(b)\nOUTPUT(y)\n\
                 t1 = NOT(a)\nt2 = OR(t1, b)\nt3 = XOR(t2, a)\ny = AND(t3, b)";
    let reordered = "INPUT(a)\nINPUT(b)\nOUTPUT(y)\n\
                     y = AND(t3, b)\nt3 = XOR(t2, a)\nt2 = OR(t1, b)\nt1 = NOT(a)";
    let g1 = parse_design(chain).unwrap();
    let g2 = parse_design(reordered).unwrap();
    for loc in [1, 3, 5] {
        let f1 =
            structural_features(&g1, FeatureOrigin::Wire(g1.find_wire("y").unwrap()), loc).unwrap();
        let f2 =
            structural_features(&g2, FeatureOrigin::Wire(g2.find_wire("y").unwrap()), loc).unwrap();
        assert_eq!(f1, f2, "loc {loc}");
    }

    // With ties, the locality may be renamed by the id tie-break, but the
    // multiset of gate classes it contains is preserved.
    let tied = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\n\
                l = AND(a, b)\nr = OR(b, c)\ny = XOR(l, r)";
    let tied_reordered = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\n\
                          r = OR(b, c)\nl = AND(a, b)\ny = XOR(l, r)";
    let g3 = parse_design(tied).unwrap();
    let g4 = parse_design(tied_reordered).unwrap();
    let f3 = structural_features(&g3, FeatureOrigin::Wire(g3.find_wire("y").unwrap()), 3).unwrap();
    let f4 = structural_features(&g4, FeatureOrigin::Wire(g4.find_wire("y").unwrap()), 3).unwrap();
    let class_multiset = |f: &gatesmith_core::StructuralFeature| {
        let mut rows: Vec<Vec<u64>> = f
            .type_onehots
            .chunks(gatesmith_core::features::TYPE_CLASSES)
            .map(|row| row.iter().map(|v| *v as u64).collect())
            .collect();
        rows.sort();
        rows
    };
    assert_eq!(class_multiset(&f3), class_multiset(&f4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parse_serialize_identity(seed in 0u64..5000, n_gates in 10usize..200) {
        let g = generate::random_design("prop", 6, n_gates, seed);
        let back = parse_design(&serialize_design(&g)).unwrap();
        prop_assert_eq!(canonical_text(&g), canonical_text(&back));
    }

    #[test]
    fn bit_parallel_matches_scalar(seed in 0u64..5000) {
        let g = generate::random_design("prop", 8, 60, seed);
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xdead);
        let words: Vec<u64> = (0..g.input_count()).map(|_| rng.next_u64()).collect();
        let packed = g.simulate64(&words).unwrap();
        for lane in [0usize, 17, 63] {
            let bits: Vec<bool> = words.iter().map(|w| (w >> lane) & 1 == 1).collect();
            let single = g.simulate(&bits).unwrap();
            for (po, word) in packed.iter().enumerate() {
                prop_assert_eq!((word >> lane) & 1 == 1, single[po]);
            }
        }
    }

    #[test]
    fn locked_designs_roundtrip_with_keys(seed in 0u64..1000) {
        let g = generate::random_design("prop", 6, 80, seed);
        let (locked, _) = random_lock(&g, 8, &DEFAULT_LOCK_DICT, seed).unwrap();
        let text = serialize_design(&locked);
        let key = locked.correct_key();
        let back = gatesmith_core::netlist::parse_design_with_key(&text, &key).unwrap();
        prop_assert_eq!(canonical_text(&locked), canonical_text(&back));
        prop_assert_eq!(back.correct_key(), key);
    }
}
