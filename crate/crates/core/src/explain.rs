//! Shapley-value attribution for fitted models, and distillation of
//! per-sample attributions into bucketed human-readable locking rules.
//!
//! The value function is interventional: `val(S)` is the mean model score
//! with the features outside `S` replaced by background rows. The exact path
//! enumerates all coalitions (feature count capped); the kernel path solves a
//! weighted least squares over sampled coalitions with the efficiency
//! constraint eliminated exactly, so `base + sum(phi) = f(x)` holds by
//! construction. With every coalition enumerated once, the kernel solution
//! coincides with the exact one.

use crate::error::ExplainError;
use crate::features::FeatureLayout;
use crate::netlist::{GateKind, GATE_ALPHABET};
use crate::rules::{Bucket, Condition, ProbKind, Rule, RuleAction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Hard cap for exact enumeration (2^15 coalitions).
pub const EXACT_FEATURE_LIMIT: usize = 15;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapExplanation {
    /// Expected model score over the background set.
    pub base_value: f64,
    pub phi: Vec<f64>,
    /// Model score at the explained point.
    pub fx: f64,
    /// The explained point itself (kept for rule extraction).
    pub x: Vec<f64>,
}

impl ShapExplanation {
    pub fn efficiency_residual(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.fx).abs()
    }
}

fn check_inputs(background: &[Vec<f64>], x: &[f64]) -> Result<usize, ExplainError> {
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    let p = x.len();
    for row in background {
        if row.len() != p {
            return Err(ExplainError::WidthMismatch {
                provided: row.len(),
                expected: p,
            });
        }
    }
    Ok(p)
}

/// `val` for every coalition mask: mean score with features outside the mask
/// replaced by each background row in turn.
fn coalition_values(f: &dyn Fn(&[f64]) -> f64, background: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let p = x.len();
    let mut vals = vec![0.0; 1usize << p];
    let mut z = vec![0.0; p];
    for (mask, slot) in vals.iter_mut().enumerate() {
        let mut acc = 0.0;
        for row in background {
            for i in 0..p {
                z[i] = if mask >> i & 1 == 1 { x[i] } else { row[i] };
            }
            acc += f(&z);
        }
        *slot = acc / background.len() as f64;
    }
    vals
}

/// Exact Shapley attribution by full coalition enumeration.
pub fn shap_exact(
    f: &dyn Fn(&[f64]) -> f64,
    background: &[Vec<f64>],
    x: &[f64],
) -> Result<ShapExplanation, ExplainError> {
    let p = check_inputs(background, x)?;
    if p > EXACT_FEATURE_LIMIT {
        return Err(ExplainError::TooManyFeatures {
            max: EXACT_FEATURE_LIMIT,
            got: p,
        });
    }
    let vals = coalition_values(f, background, x);
    // factorial(n) is exact in f64 up to 15!.
    let mut fact = vec![1.0f64; p + 1];
    for i in 1..=p {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; p];
    for mask in 0..(1usize << p) {
        let s = (mask as u32).count_ones() as usize;
        for (i, slot) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                continue;
            }
            let weight = fact[s] * fact[p - s - 1] / fact[p];
            *slot += weight * (vals[mask | (1 << i)] - vals[mask]);
        }
    }
    Ok(ShapExplanation {
        base_value: vals[0],
        phi,
        fx: vals[(1 << p) - 1],
        x: x.to_vec(),
    })
}

/// Kernel approximation: weighted least squares over sampled coalitions with
/// Shapley kernel weights, constrained so efficiency holds exactly. When
/// `n_samples` covers every non-trivial coalition the enumeration is complete
/// and the result converges to [`shap_exact`].
pub fn shap_kernel(
    f: &dyn Fn(&[f64]) -> f64,
    background: &[Vec<f64>],
    x: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<ShapExplanation, ExplainError> {
    let p = check_inputs(background, x)?;
    let min = 2 * p + 2;
    if n_samples < min {
        return Err(ExplainError::TooFewSamples {
            min,
            got: n_samples,
        });
    }
    let base = background.iter().map(|row| f(row)).sum::<f64>() / background.len() as f64;
    let fx = f(x);
    if p == 1 {
        return Ok(ShapExplanation {
            base_value: base,
            phi: vec![fx - base],
            fx,
            x: x.to_vec(),
        });
    }

    let val_of = |mask: usize| -> f64 {
        let mut acc = 0.0;
        let mut z = vec![0.0; p];
        for row in background {
            for i in 0..p {
                z[i] = if mask >> i & 1 == 1 { x[i] } else { row[i] };
            }
            acc += f(&z);
        }
        acc / background.len() as f64
    };

    // Coalition weights, keyed by mask for deterministic iteration.
    let full = (1usize << p) - 1;
    let mut weighted: BTreeMap<usize, f64> = BTreeMap::new();
    let total_coalitions = (1usize << p) - 2;
    if n_samples >= total_coalitions && p <= 26 {
        // Full enumeration with exact Shapley kernel weights.
        for mask in 1..full {
            let s = (mask as u32).count_ones() as usize;
            let w = (p - 1) as f64 / (binom(p, s) * (s * (p - s)) as f64);
            weighted.insert(mask, w);
        }
    } else {
        // Sample sizes from the kernel size distribution, subsets uniformly.
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let size_weights: Vec<f64> = (1..p)
            .map(|s| (p - 1) as f64 / ((s * (p - s)) as f64))
            .collect();
        let total_w: f64 = size_weights.iter().sum();
        for _ in 0..n_samples {
            let mut pick = rng.gen::<f64>() * total_w;
            let mut size = 1usize;
            for (i, w) in size_weights.iter().enumerate() {
                if pick < *w {
                    size = i + 1;
                    break;
                }
                pick -= *w;
                size = i + 1;
            }
            let mut mask = 0usize;
            let mut chosen = 0usize;
            // Reservoir-free subset draw: shuffle-select `size` positions.
            let mut slots: Vec<usize> = (0..p).collect();
            for k in 0..size {
                let j = rng.gen_range(k..p);
                slots.swap(k, j);
                mask |= 1 << slots[k];
                chosen += 1;
            }
            debug_assert_eq!(chosen, size);
            *weighted.entry(mask).or_insert(0.0) += 1.0;
        }
    }

    // Eliminate phi_p via the efficiency constraint, then solve the normal
    // equations of the reduced weighted least squares.
    let q = p - 1;
    let mut ata = vec![vec![0.0f64; q]; q];
    let mut atb = vec![0.0f64; q];
    for (&mask, &w) in &weighted {
        let z_last = (mask >> (p - 1)) & 1;
        let y = val_of(mask) - base - z_last as f64 * (fx - base);
        let mut e = vec![0.0f64; q];
        for (i, slot) in e.iter_mut().enumerate() {
            *slot = ((mask >> i) & 1) as f64 - z_last as f64;
        }
        for i in 0..q {
            if e[i] == 0.0 {
                continue;
            }
            atb[i] += w * e[i] * y;
            for j in 0..q {
                if e[j] != 0.0 {
                    ata[i][j] += w * e[i] * e[j];
                }
            }
        }
    }
    let reduced = solve_symmetric(&mut ata, &mut atb);
    let mut phi = reduced;
    let last = (fx - base) - phi.iter().sum::<f64>();
    phi.push(last);
    Ok(ShapExplanation {
        base_value: base,
        phi,
        fx,
        x: x.to_vec(),
    })
}

fn binom(n: usize, k: usize) -> f64 {
    let mut out = 1.0f64;
    for i in 0..k.min(n - k) {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Gaussian elimination with partial pivoting; singular directions get 0.
#[allow(clippy::needless_range_loop)]
fn solve_symmetric(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            continue;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        perm.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        if a[col][col].abs() < 1e-12 {
            x[col] = 0.0;
            continue;
        }
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    x
}

/// Feature-importance summary over a sample of points: features ranked by
/// mean |phi|, with per-point signed values retained for export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImportanceSummary {
    /// (column index, mean |phi|), most important first.
    pub ranking: Vec<(usize, f64)>,
    /// One explanation per input point, in input order.
    pub explanations: Vec<ShapExplanation>,
}

pub fn summarize_importance(
    f: &dyn Fn(&[f64]) -> f64,
    background: &[Vec<f64>],
    points: &[Vec<f64>],
    seed: u64,
) -> Result<ImportanceSummary, ExplainError> {
    assert!(!points.is_empty(), "need at least one point to summarize");
    let p = points[0].len();
    let mut explanations = Vec::with_capacity(points.len());
    for (i, x) in points.iter().enumerate() {
        let e = if p <= EXACT_FEATURE_LIMIT {
            shap_exact(f, background, x)?
        } else {
            let budget = (2 * p + 2).max(2048);
            shap_kernel(f, background, x, budget, seed.wrapping_add(i as u64))?
        };
        explanations.push(e);
    }
    let mut ranking: Vec<(usize, f64)> = (0..p)
        .map(|j| {
            let mean_abs = explanations.iter().map(|e| e.phi[j].abs()).sum::<f64>()
                / explanations.len() as f64;
            (j, mean_abs)
        })
        .collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ImportanceSummary {
        ranking,
        explanations,
    })
}

/// Up to this many conditions per extracted rule.
pub const RULE_MAX_CONDITIONS: usize = 6;

/// Distill explanations of locking-feature rows into rules: the top
/// conditions by |phi| translate to gate-type identities, connectivity and
/// probability buckets; the row's lock type becomes the action, locking when
/// the score pushes positive (fx >= 0.5) and avoiding otherwise. Duplicate
/// rules collapse.
pub fn extract_rules(explanations: &[ShapExplanation], layout: &FeatureLayout) -> Vec<Rule> {
    let columns = layout.column_names();
    let mut rules: Vec<Rule> = Vec::new();
    for e in explanations {
        if let Some(rule) = rule_from_explanation(e, layout, &columns) {
            if !rules.contains(&rule) {
                rules.push(rule);
            }
        }
    }
    rules
}

fn rule_from_explanation(
    e: &ShapExplanation,
    layout: &FeatureLayout,
    columns: &[String],
) -> Option<Rule> {
    debug_assert_eq!(e.phi.len(), columns.len());
    // The hot lock-type bit names the action gate.
    let lock_block_at = columns.len() - layout.lock_dict.len();
    let lock_kind: GateKind = layout
        .lock_dict
        .iter()
        .enumerate()
        .find(|(j, _)| e.x[lock_block_at + j] == 1.0)
        .map(|(_, k)| *k)?;

    let mut order: Vec<usize> = (0..columns.len()).collect();
    order.sort_by(|&a, &b| e.phi[b].abs().total_cmp(&e.phi[a].abs()).then(a.cmp(&b)));

    let mut conditions: Vec<Condition> = Vec::new();
    for j in order {
        if conditions.len() == RULE_MAX_CONDITIONS {
            break;
        }
        if e.phi[j] == 0.0 || j >= lock_block_at {
            continue;
        }
        if let Some(cond) = condition_from_column(&columns[j], e.x[j]) {
            // A positive identity for a slot makes that slot's negated
            // conditions redundant; keep whichever carries more weight first.
            if let Condition::GateType { slot, negated, .. } = cond {
                let positive_exists = conditions.iter().any(|c| {
                    matches!(c, Condition::GateType { slot: s, negated: false, .. } if *s == slot)
                });
                if positive_exists {
                    continue;
                }
                if !negated {
                    conditions.retain(|c| {
                        !matches!(c, Condition::GateType { slot: s, negated: true, .. } if *s == slot)
                    });
                }
            }
            if !conditions.contains(&cond) {
                conditions.push(cond);
            }
        }
    }
    if conditions.is_empty() {
        return None;
    }
    let action = if e.fx >= 0.5 {
        RuleAction::Lock(vec![lock_kind])
    } else {
        RuleAction::Avoid(vec![lock_kind])
    };
    Some(Rule { conditions, action })
}

fn condition_from_column(name: &str, value: f64) -> Option<Condition> {
    if let Some(rest) = name.strip_prefix('g') {
        if let Some((slot_txt, kind_txt)) = rest.split_once("_is_") {
            if kind_txt == "PAD" {
                return None;
            }
            let slot: usize = slot_txt.parse().ok()?;
            let kind = GATE_ALPHABET.into_iter().find(|k| k.name() == kind_txt)?;
            return Some(Condition::GateType {
                slot,
                kind,
                negated: value == 0.0,
            });
        }
    }
    if let Some(rest) = name.strip_prefix("adj_g") {
        // Direction is known internally; exported rules use the undirected
        // phrasing, so only positive adjacency is sound to emit.
        if value != 1.0 {
            return None;
        }
        let (a_txt, b_txt) = rest.split_once("_g")?;
        return Some(Condition::Connected {
            a: a_txt.parse().ok()?,
            b: b_txt.parse().ok()?,
            negated: false,
        });
    }
    match name {
        "static_prob" => Some(Condition::Prob {
            which: ProbKind::Static,
            slot: 1,
            bucket: Bucket::of(value),
        }),
        "transition_prob" => Some(Condition::Prob {
            which: ProbKind::Transition,
            slot: 1,
            bucket: Bucket::of(value),
        }),
        _ => None,
    }
}

/// Numeric waterfall export for one explanation (plot-ready, no rendering).
pub fn waterfall_json(e: &ShapExplanation, columns: &[String]) -> serde_json::Value {
    let mut features: Vec<serde_json::Value> = columns
        .iter()
        .zip(&e.phi)
        .zip(&e.x)
        .map(|((name, phi), x)| serde_json::json!({ "feature": name, "phi": phi, "value": x }))
        .collect();
    features.sort_by(|a, b| {
        let pa = a["phi"].as_f64().unwrap().abs();
        let pb = b["phi"].as_f64().unwrap().abs();
        pb.total_cmp(&pa)
    });
    serde_json::json!({
        "base_value": e.base_value,
        "fx": e.fx,
        "features": features,
    })
}
