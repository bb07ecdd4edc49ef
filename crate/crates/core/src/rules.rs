//! Human-readable locking rules: a line-oriented grammar, first-match
//! evaluation against wire localities, and direct rule-driven locking.
//!
//! One rule per line:
//!
//! ```text
//! IF G1 = AND && static(G1) = low THEN AVOID AND XOR
//! IF G2 != AND && G1 != NOT && static(G2) = high THEN LOCK OR
//! IF transition(G2) = low && G2 = AND && G1 = NOT THEN AVOID *
//! IF static(G1) = low && G1 = AND && connected(G2, G3) THEN AVOID XOR
//! ```
//!
//! `G<i>` names the i-th gate of the BFS locality of the wire under
//! consideration. Probability buckets are low [0, 0.3), moderate [0.3, 0.5]
//! and high (0.5, 1]. `connected(Gi, Gj)` is true when either gate feeds the
//! other inside the locality. `AVOID *` forbids every lock type.

use crate::error::{NetlistError, RuleError};
use crate::features::{locality, static_probabilities, transition_probabilities, FeatureOrigin};
use crate::locking::insert_key_gate_mut;
use crate::netlist::{DesignGraph, GateKind, WireId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bucket {
    Low,
    Moderate,
    High,
}

impl Bucket {
    /// Bucket of a probability: low [0, 0.3), moderate [0.3, 0.5], high (0.5, 1].
    pub fn of(p: f64) -> Bucket {
        if p < 0.3 {
            Bucket::Low
        } else if p <= 0.5 {
            Bucket::Moderate
        } else {
            Bucket::High
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bucket::Low => "low",
            Bucket::Moderate => "moderate",
            Bucket::High => "high",
        }
    }

    fn parse(s: &str) -> Option<Bucket> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Some(Bucket::Low),
            "moderate" => Some(Bucket::Moderate),
            "high" => Some(Bucket::High),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbKind {
    Static,
    Transition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// `G<slot> = KIND` (or `!=` when negated). A missing locality gate fails
    /// the positive form and satisfies the negated form.
    GateType {
        slot: usize,
        kind: GateKind,
        negated: bool,
    },
    /// `static(G<slot>) = bucket` / `transition(G<slot>) = bucket`. Fails when
    /// the locality has no such gate.
    Prob {
        which: ProbKind,
        slot: usize,
        bucket: Bucket,
    },
    /// `connected(Gi, Gj)`: either gate feeds the other.
    Connected { a: usize, b: usize, negated: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleAction {
    Lock(Vec<GateKind>),
    Avoid(Vec<GateKind>),
    /// `AVOID *`
    AvoidAll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub action: RuleAction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Lock,
    Avoid,
    Neutral,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IF ")?;
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                write!(f, " && ")?;
            }
            match c {
                Condition::GateType {
                    slot,
                    kind,
                    negated,
                } => {
                    write!(f, "G{slot} {} {}", if *negated { "!=" } else { "=" }, kind)?;
                }
                Condition::Prob {
                    which,
                    slot,
                    bucket,
                } => {
                    let name = match which {
                        ProbKind::Static => "static",
                        ProbKind::Transition => "transition",
                    };
                    write!(f, "{name}(G{slot}) = {}", bucket.name())?;
                }
                Condition::Connected { a, b, negated } => {
                    write!(
                        f,
                        "{}connected(G{a}, G{b})",
                        if *negated { "!" } else { "" }
                    )?;
                }
            }
        }
        match &self.action {
            RuleAction::Lock(kinds) => write!(f, " THEN LOCK {}", join_kinds(kinds)),
            RuleAction::Avoid(kinds) => write!(f, " THEN AVOID {}", join_kinds(kinds)),
            RuleAction::AvoidAll => write!(f, " THEN AVOID *"),
        }
    }
}

fn join_kinds(kinds: &[GateKind]) -> String {
    kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(" ")
}

pub fn serialize_rules(rules: &[Rule]) -> String {
    let mut out = String::new();
    for r in rules {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// Parse a rule file. Blank lines and `#` comments are skipped.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, RuleError> {
    let mut rules = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        rules.push(parse_rule_line(line, lineno)?);
    }
    Ok(rules)
}

fn parse_rule_line(line: &str, lineno: usize) -> Result<Rule, RuleError> {
    let syntax = |msg: &str| RuleError::Syntax {
        line: lineno,
        message: msg.to_string(),
    };
    let rest = strip_keyword(line, "IF").ok_or_else(|| syntax("rule must start with IF"))?;
    let upper = rest.to_ascii_uppercase();
    let then_at = upper.find(" THEN ").ok_or_else(|| syntax("missing THEN"))?;
    let cond_text = &rest[..then_at];
    let action_text = rest[then_at + 6..].trim();

    let mut conditions = Vec::new();
    for part in cond_text.split("&&") {
        let part = part.trim();
        if part.is_empty() {
            return Err(syntax("empty condition"));
        }
        conditions.push(parse_condition(part, lineno)?);
    }
    if conditions.is_empty() {
        return Err(syntax("rule needs at least one condition"));
    }

    let (keyword, gates_text) = action_text
        .split_once(char::is_whitespace)
        .ok_or_else(|| syntax("action needs LOCK or AVOID plus gate types"))?;
    let gates_text = gates_text.trim();
    let action = match keyword.to_ascii_uppercase().as_str() {
        "LOCK" => RuleAction::Lock(parse_kinds(gates_text, lineno)?),
        "AVOID" if gates_text == "*" => RuleAction::AvoidAll,
        "AVOID" => RuleAction::Avoid(parse_kinds(gates_text, lineno)?),
        other => return Err(syntax(&format!("unknown action `{other}`"))),
    };
    Ok(Rule { conditions, action })
}

fn parse_kinds(text: &str, lineno: usize) -> Result<Vec<GateKind>, RuleError> {
    let mut kinds = Vec::new();
    for token in text.split(|c: char| c.is_whitespace() || c == '/' || c == ',') {
        if token.is_empty() {
            continue;
        }
        let kind = GateKind::from_name(token).ok_or_else(|| RuleError::UnknownFeature {
            line: lineno,
            name: token.to_string(),
        })?;
        kinds.push(kind);
    }
    if kinds.is_empty() {
        return Err(RuleError::Syntax {
            line: lineno,
            message: "action lists no gate types".into(),
        });
    }
    Ok(kinds)
}

fn parse_condition(text: &str, lineno: usize) -> Result<Condition, RuleError> {
    let syntax = |msg: String| RuleError::Syntax {
        line: lineno,
        message: msg,
    };
    // connected(Gi, Gj) / !connected(Gi, Gj)
    let (negated, body) = match text.strip_prefix('!') {
        Some(rest) => (true, rest.trim()),
        None => (false, text),
    };
    if let Some(args) = strip_call(body, "connected") {
        let (a, b) = args
            .split_once(',')
            .ok_or_else(|| syntax("connected(..) takes two gates".into()))?;
        return Ok(Condition::Connected {
            a: parse_gate_ref(a.trim(), lineno)?,
            b: parse_gate_ref(b.trim(), lineno)?,
            negated,
        });
    }
    if negated {
        return Err(syntax(format!(
            "`!` only applies to connected(..): `{text}`"
        )));
    }
    for (name, which) in [
        ("static", ProbKind::Static),
        ("transition", ProbKind::Transition),
    ] {
        if let Some(args) = strip_call_prefix(body, name) {
            let (gate_ref, bucket_text) = args;
            let bucket =
                Bucket::parse(bucket_text.trim()).ok_or_else(|| RuleError::UnknownBucket {
                    line: lineno,
                    name: bucket_text.trim().to_string(),
                })?;
            return Ok(Condition::Prob {
                which,
                slot: parse_gate_ref(gate_ref.trim(), lineno)?,
                bucket,
            });
        }
    }
    // G<i> =/==/!= KIND
    if let Some((lhs, rhs, negated)) = split_comparison(body) {
        let slot = parse_gate_ref(lhs.trim(), lineno)?;
        let kind = GateKind::from_name(rhs.trim()).ok_or_else(|| RuleError::UnknownFeature {
            line: lineno,
            name: rhs.trim().to_string(),
        })?;
        return Ok(Condition::GateType {
            slot,
            kind,
            negated,
        });
    }
    Err(RuleError::UnknownFeature {
        line: lineno,
        name: text.to_string(),
    })
}

/// `static(G2) = high` -> ("G2", "high")
fn strip_call_prefix<'a>(text: &'a str, name: &str) -> Option<(&'a str, &'a str)> {
    let lower = text.to_ascii_lowercase();
    if !lower.starts_with(name) {
        return None;
    }
    let rest = text[name.len()..].trim_start();
    let inner = rest.strip_prefix('(')?;
    let close = inner.find(')')?;
    let gate_ref = &inner[..close];
    let after = inner[close + 1..].trim_start();
    let value = after.strip_prefix('=')?.trim_start();
    let value = value.strip_prefix('=').unwrap_or(value);
    Some((gate_ref, value))
}

fn strip_call<'a>(text: &'a str, name: &str) -> Option<&'a str> {
    let lower = text.to_ascii_lowercase();
    if !lower.starts_with(name) {
        return None;
    }
    let rest = text[name.len()..].trim_start();
    rest.strip_prefix('(')?.strip_suffix(')')
}

fn split_comparison(text: &str) -> Option<(&str, &str, bool)> {
    if let Some(at) = text.find("!=") {
        return Some((&text[..at], &text[at + 2..], true));
    }
    if let Some(at) = text.find("==") {
        return Some((&text[..at], &text[at + 2..], false));
    }
    text.find('=')
        .map(|at| (&text[..at], &text[at + 1..], false))
}

fn parse_gate_ref(text: &str, lineno: usize) -> Result<usize, RuleError> {
    let err = || RuleError::UnknownFeature {
        line: lineno,
        name: text.to_string(),
    };
    let rest = text
        .strip_prefix('G')
        .or_else(|| text.strip_prefix('g'))
        .ok_or_else(err)?;
    let slot: usize = rest.parse().map_err(|_| err())?;
    if slot == 0 {
        return Err(err());
    }
    Ok(slot)
}

fn strip_keyword<'a>(line: &'a str, kw: &str) -> Option<&'a str> {
    let trimmed = line.trim_start();
    if trimmed.len() >= kw.len() && trimmed[..kw.len()].eq_ignore_ascii_case(kw) {
        Some(trimmed[kw.len()..].trim_start())
    } else {
        None
    }
}

/// Precomputed per-design context for rule evaluation.
pub struct RuleContext {
    static_probs: Vec<f64>,
    transition_probs: Vec<f64>,
    max_slot: usize,
}

impl RuleContext {
    pub fn new(graph: &DesignGraph, rules: &[Rule]) -> RuleContext {
        let static_probs = static_probabilities(graph);
        let transition_probs = transition_probabilities(graph, &static_probs);
        let max_slot = rules
            .iter()
            .flat_map(|r| r.conditions.iter())
            .map(|c| match c {
                Condition::GateType { slot, .. } | Condition::Prob { slot, .. } => *slot,
                Condition::Connected { a, b, .. } => (*a).max(*b),
            })
            .max()
            .unwrap_or(1);
        RuleContext {
            static_probs,
            transition_probs,
            max_slot,
        }
    }
}

/// Verdict for inserting `lock_type` on `wire`. Every rule whose conditions
/// match and whose action names the candidate type casts a vote; AVOID beats
/// LOCK when both match, and no applicable rule means neutral.
pub fn rule_match(
    graph: &DesignGraph,
    wire: WireId,
    lock_type: GateKind,
    rules: &[Rule],
    ctx: &RuleContext,
) -> Result<Verdict, NetlistError> {
    let names = locality(graph, FeatureOrigin::Wire(wire), ctx.max_slot)?;
    let mut verdict = Verdict::Neutral;
    for rule in rules {
        if !covers(&rule.action, lock_type) {
            continue;
        }
        if !rule
            .conditions
            .iter()
            .all(|c| condition_holds(graph, c, &names, ctx))
        {
            continue;
        }
        match rule.action {
            RuleAction::Avoid(_) | RuleAction::AvoidAll => return Ok(Verdict::Avoid),
            RuleAction::Lock(_) => {
                if verdict == Verdict::Neutral {
                    verdict = Verdict::Lock;
                }
            }
        }
    }
    Ok(verdict)
}

fn covers(action: &RuleAction, lock_type: GateKind) -> bool {
    match action {
        RuleAction::Lock(kinds) | RuleAction::Avoid(kinds) => kinds.contains(&lock_type),
        RuleAction::AvoidAll => true,
    }
}

fn condition_holds(
    graph: &DesignGraph,
    condition: &Condition,
    names: &crate::features::Locality,
    ctx: &RuleContext,
) -> bool {
    let gate_at = |slot: usize| names.gates.get(slot - 1).copied();
    match condition {
        Condition::GateType {
            slot,
            kind,
            negated,
        } => match gate_at(*slot) {
            Some(gid) => (graph.gate(gid).kind == *kind) != *negated,
            None => *negated,
        },
        Condition::Prob {
            which,
            slot,
            bucket,
        } => match gate_at(*slot) {
            Some(gid) => {
                let wire = graph.gate(gid).output.index();
                let p = match which {
                    ProbKind::Static => ctx.static_probs[wire],
                    ProbKind::Transition => ctx.transition_probs[wire],
                };
                Bucket::of(p) == *bucket
            }
            None => false,
        },
        Condition::Connected { a, b, negated } => {
            let linked = match (gate_at(*a), gate_at(*b)) {
                (Some(ga), Some(gb)) => feeds(graph, ga, gb) || feeds(graph, gb, ga),
                _ => false,
            };
            linked != *negated
        }
    }
}

fn feeds(graph: &DesignGraph, src: crate::netlist::GateId, dst: crate::netlist::GateId) -> bool {
    let out = graph.gate(src).output;
    graph.gate(dst).inputs.contains(&out)
}

/// Outcome bookkeeping for rule-driven locking.
#[derive(Clone, Debug)]
pub struct RuleLockReport {
    pub selected: Vec<(WireId, GateKind)>,
    pub lock_verdict_candidates: usize,
    pub filled_from_neutral: usize,
}

/// Lock `kl` (wire, type) pairs drawn from the rule-approved candidates,
/// sampling uniformly under `seed` when more than `kl` qualify. Pairs with an
/// avoid verdict are never inserted. If fewer than `kl` pairs are approved,
/// the shortfall is reported and filled from neutral candidates.
pub fn rule_lock(
    graph: &DesignGraph,
    rules: &[Rule],
    lock_dict: &[GateKind],
    kl: usize,
    seed: u64,
) -> Result<(DesignGraph, RuleLockReport), crate::error::PipelineError> {
    let ctx = RuleContext::new(graph, rules);
    let mut lock_cands = Vec::new();
    let mut neutral_cands = Vec::new();
    for wire in graph.lockable_wires() {
        for &lock_type in lock_dict {
            match rule_match(graph, wire, lock_type, rules, &ctx)
                .map_err(crate::error::PipelineError::Netlist)?
            {
                Verdict::Lock => lock_cands.push((wire, lock_type)),
                Verdict::Neutral => neutral_cands.push((wire, lock_type)),
                Verdict::Avoid => {}
            }
        }
    }
    if lock_cands.len() + neutral_cands.len() < kl {
        return Err(crate::error::PipelineError::TooFewCandidates {
            requested: kl,
            available: lock_cands.len() + neutral_cands.len(),
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let lock_verdict_candidates = lock_cands.len();
    let mut selected: Vec<(WireId, GateKind)> = if lock_cands.len() >= kl {
        lock_cands.choose_multiple(&mut rng, kl).copied().collect()
    } else {
        let mut take = lock_cands.clone();
        let fill = kl - take.len();
        take.extend(neutral_cands.choose_multiple(&mut rng, fill).copied());
        take
    };
    let filled_from_neutral = selected.len()
        - selected
            .iter()
            .filter(|pair| lock_cands.contains(pair))
            .count();
    // Deterministic application order.
    selected.sort_by_key(|(w, k)| (*w, k.alphabet_index()));
    let mut locked = graph.clone();
    for (wire, lock_type) in &selected {
        insert_key_gate_mut(&mut locked, *wire, *lock_type)
            .map_err(crate::error::PipelineError::Netlist)?;
    }
    Ok((
        locked,
        RuleLockReport {
            selected,
            lock_verdict_candidates,
            filled_from_neutral,
        },
    ))
}
