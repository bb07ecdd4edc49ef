//! ISCAS-89-style bench reader and writer.
//!
//! Accepted syntax: `INPUT(x)`, `OUTPUT(y)`, `y = GATE(a, b, ...)` and `#`
//! comments. Gates with more than two inputs are decomposed into
//! left-associative two-input trees at parse time. Flip-flops (`q = DFF(d)`)
//! are cut: `q` becomes a pseudo primary input and `d` a pseudo primary
//! output, and the pair is remembered so serialization restores the DFF line.
//!
//! Inputs named `keyinput<N>` are treated as key inputs; the unlock bits live
//! in a sidecar `.key` file (one `0`/`1` per line, in index order), keeping
//! the bench file itself consumable by third-party tools. Inputs named
//! `maskinput<N>` are treated as per-trace randomness for masking gadgets.

use super::{DesignGraph, Driver, GateKind, WireId};
use crate::error::ParseError;
use std::collections::HashMap;

/// Parse bench-format text into a validated design graph.
pub fn parse_design(text: &str) -> Result<DesignGraph, ParseError> {
    Parser::new(text).run()
}

/// Parse bench-format text and attach the unlock bits from a sidecar key file.
pub fn parse_design_with_key(text: &str, key_bits: &[bool]) -> Result<DesignGraph, ParseError> {
    let mut graph = parse_design(text)?;
    if key_bits.len() != graph.key_inputs.len() {
        return Err(ParseError::KeyLengthMismatch {
            provided: key_bits.len(),
            expected: graph.key_inputs.len(),
        });
    }
    for (slot, &bit) in graph.key_inputs.iter_mut().zip(key_bits) {
        slot.correct_bit = bit;
    }
    Ok(graph)
}

/// Render a graph back to bench text. Gate lines come out in topological
/// order, so `parse_design(serialize_design(g))` reproduces `g` up to
/// renumbering, with identical names.
pub fn serialize_design(graph: &DesignGraph) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", graph.name()));
    let dff_inputs: Vec<WireId> = graph.dff_pairs().iter().map(|(q, _)| *q).collect();
    let dff_outputs: Vec<WireId> = graph.dff_pairs().iter().map(|(_, d)| *d).collect();
    for &pi in graph.primary_inputs() {
        if !dff_inputs.contains(&pi) {
            out.push_str(&format!("INPUT({})\n", graph.wire(pi).name));
        }
    }
    for key in graph.key_inputs() {
        out.push_str(&format!("INPUT({})\n", graph.wire(key.wire).name));
    }
    for &mask in graph.mask_inputs() {
        out.push_str(&format!("INPUT({})\n", graph.wire(mask).name));
    }
    for &po in graph.primary_outputs() {
        if !dff_outputs.contains(&po) {
            out.push_str(&format!("OUTPUT({})\n", graph.wire(po).name));
        }
    }
    for &(q, d) in graph.dff_pairs() {
        out.push_str(&format!(
            "{} = DFF({})\n",
            graph.wire(q).name,
            graph.wire(d).name
        ));
    }
    for &gid in graph.topo_order() {
        let gate = graph.gate(gid);
        let args: Vec<&str> = gate
            .inputs
            .iter()
            .map(|w| graph.wire(*w).name.as_str())
            .collect();
        out.push_str(&format!(
            "{} = {}({})\n",
            graph.wire(gate.output).name,
            gate.kind.name(),
            args.join(", ")
        ));
    }
    out
}

/// Sidecar key file contents (one bit per line, key index order), or `None`
/// when the design has no key inputs.
pub fn key_sidecar_text(graph: &DesignGraph) -> Option<String> {
    if graph.key_inputs().is_empty() {
        return None;
    }
    let mut out = String::new();
    for key in graph.key_inputs() {
        out.push_str(if key.correct_bit { "1\n" } else { "0\n" });
    }
    Some(out)
}

/// Parse a sidecar key file.
pub fn parse_key_sidecar(text: &str) -> Result<Vec<bool>, ParseError> {
    let mut bits = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        match t {
            "0" => bits.push(false),
            "1" => bits.push(true),
            other => {
                return Err(ParseError::Syntax {
                    line: i + 1,
                    column: 1,
                    message: format!("expected 0 or 1 in key file, got `{other}`"),
                })
            }
        }
    }
    Ok(bits)
}

/// Bench text with input/output/gate lines sorted; two graphs that are
/// isomorphic with identical names canonicalize to equal text.
pub fn canonical_text(graph: &DesignGraph) -> String {
    let mut lines: Vec<String> = serialize_design(graph)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    lines.sort();
    lines.join("\n")
}

struct PendingGate {
    out: String,
    kind_name: String,
    args: Vec<String>,
    line: usize,
}

struct Parser<'a> {
    text: &'a str,
    inputs: Vec<(String, usize)>,
    outputs: Vec<(String, usize)>,
    gates: Vec<PendingGate>,
    dffs: Vec<(String, String)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            text,
            inputs: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
            dffs: Vec::new(),
        }
    }

    fn run(mut self) -> Result<DesignGraph, ParseError> {
        for (lineno, raw) in self.text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            if line.trim().is_empty() {
                continue;
            }
            self.parse_line(line, lineno)?;
        }
        self.build()
    }

    fn parse_line(&mut self, line: &str, lineno: usize) -> Result<(), ParseError> {
        let trimmed = line.trim_start();
        let upper = trimmed.to_ascii_uppercase();
        if upper.starts_with("INPUT") || upper.starts_with("OUTPUT") {
            let is_input = upper.starts_with("INPUT");
            let keyword_len = if is_input { 5 } else { 6 };
            let rest = trimmed[keyword_len..].trim();
            let name = parse_parenthesized(rest, lineno, line, trimmed, keyword_len)?;
            if is_input {
                self.inputs.push((name, lineno));
            } else {
                self.outputs.push((name, lineno));
            }
            return Ok(());
        }
        // Assignment form: out = GATE(args)
        let eq = trimmed.find('=').ok_or_else(|| ParseError::Syntax {
            line: lineno,
            column: column_of(line, trimmed, 0),
            message: "expected INPUT(..), OUTPUT(..) or `wire = GATE(..)`".into(),
        })?;
        let out = trimmed[..eq].trim();
        if out.is_empty() || !is_wire_name(out) {
            return Err(ParseError::Syntax {
                line: lineno,
                column: column_of(line, trimmed, 0),
                message: format!("bad wire name `{out}`"),
            });
        }
        let rhs = trimmed[eq + 1..].trim();
        let open = rhs.find('(').ok_or_else(|| ParseError::Syntax {
            line: lineno,
            column: column_of(line, trimmed, eq + 1),
            message: "expected GATE(arg, ...)".into(),
        })?;
        if !rhs.ends_with(')') {
            return Err(ParseError::Syntax {
                line: lineno,
                column: column_of(line, trimmed, trimmed.len().saturating_sub(1)),
                message: "missing closing `)`".into(),
            });
        }
        let kind_name = rhs[..open].trim().to_string();
        let body = &rhs[open + 1..rhs.len() - 1];
        let args: Vec<String> = body
            .split(',')
            .map(|a| a.trim().to_string())
            .filter(|a| !a.is_empty())
            .collect();
        if args.is_empty() {
            return Err(ParseError::Syntax {
                line: lineno,
                column: column_of(line, trimmed, eq + 1 + open),
                message: format!("gate `{kind_name}` has no arguments"),
            });
        }
        for a in &args {
            if !is_wire_name(a) {
                return Err(ParseError::Syntax {
                    line: lineno,
                    column: column_of(line, trimmed, eq + 1 + open),
                    message: format!("bad wire name `{a}`"),
                });
            }
        }
        if kind_name.eq_ignore_ascii_case("DFF") {
            if args.len() != 1 {
                return Err(ParseError::Syntax {
                    line: lineno,
                    column: column_of(line, trimmed, eq + 1 + open),
                    message: "DFF takes exactly one argument".into(),
                });
            }
            self.dffs.push((out.to_string(), args[0].clone()));
            return Ok(());
        }
        self.gates.push(PendingGate {
            out: out.to_string(),
            kind_name,
            args,
            line: lineno,
        });
        Ok(())
    }

    fn build(self) -> Result<DesignGraph, ParseError> {
        let mut graph = DesignGraph::empty("design");
        let mut by_name: HashMap<String, WireId> = HashMap::new();
        let mut keyed: Vec<(u32, WireId)> = Vec::new();
        let mut masked: Vec<(u32, WireId)> = Vec::new();

        for (name, _line) in &self.inputs {
            if by_name.contains_key(name) {
                return Err(ParseError::MultipleDrivers { name: name.clone() });
            }
            if let Some(n) = suffix_index(name, "keyinput") {
                let id = graph.add_wire(name.clone(), Driver::KeyInput);
                keyed.push((n, id));
                by_name.insert(name.clone(), id);
            } else if let Some(n) = suffix_index(name, "maskinput") {
                let id = graph.add_wire(name.clone(), Driver::MaskInput);
                masked.push((n, id));
                by_name.insert(name.clone(), id);
            } else {
                let id = graph.add_primary_input(name.clone());
                by_name.insert(name.clone(), id);
            }
        }
        keyed.sort_by_key(|(n, _)| *n);
        masked.sort_by_key(|(n, _)| *n);
        for (n, id) in keyed {
            graph.register_key_input(id, false, n);
        }
        for (n, id) in masked {
            graph.register_mask_input(id, n);
        }

        // DFF cut points: q is a pseudo input, d a pseudo output.
        for (q, _d) in &self.dffs {
            if by_name.contains_key(q) {
                return Err(ParseError::MultipleDrivers { name: q.clone() });
            }
            let qid = graph.add_wire(q.clone(), Driver::DffOutput);
            graph.primary_inputs.push(qid);
            by_name.insert(q.clone(), qid);
        }

        // Declare every gate output first so fanin can reference forward.
        let mut driven: HashMap<String, usize> = HashMap::new();
        for pending in &self.gates {
            if by_name.contains_key(&pending.out) || driven.contains_key(&pending.out) {
                return Err(ParseError::MultipleDrivers {
                    name: pending.out.clone(),
                });
            }
            driven.insert(pending.out.clone(), pending.line);
        }
        for pending in &self.gates {
            let id = graph.add_wire(pending.out.clone(), Driver::PrimaryInput);
            by_name.insert(pending.out.clone(), id);
        }

        for pending in &self.gates {
            let kind = GateKind::from_name(&pending.kind_name).ok_or_else(|| {
                ParseError::UnknownGateType {
                    line: pending.line,
                    name: pending.kind_name.clone(),
                }
            })?;
            let mut args = Vec::with_capacity(pending.args.len());
            for a in &pending.args {
                let id = *by_name
                    .get(a)
                    .ok_or_else(|| ParseError::UndrivenWire { name: a.clone() })?;
                args.push(id);
            }
            let out = by_name[&pending.out];
            if kind.arity() == 1 {
                if args.len() != 1 {
                    return Err(ParseError::Syntax {
                        line: pending.line,
                        column: 1,
                        message: format!("{} takes exactly one input", kind.name()),
                    });
                }
                graph.add_gate(kind, args, out);
            } else if args.len() == 1 {
                return Err(ParseError::Syntax {
                    line: pending.line,
                    column: 1,
                    message: format!("{} needs at least two inputs", kind.name()),
                });
            } else {
                build_reduction(&mut graph, kind, &args, out, &pending.out);
            }
        }

        for (name, _line) in &self.outputs {
            let id = *by_name
                .get(name)
                .ok_or_else(|| ParseError::UndrivenWire { name: name.clone() })?;
            graph.push_primary_output(id);
        }
        for (q, d) in &self.dffs {
            let did = *by_name
                .get(d)
                .ok_or_else(|| ParseError::UndrivenWire { name: d.clone() })?;
            let qid = by_name[q];
            graph.push_primary_output(did);
            graph.push_dff_pair(qid, did);
        }

        // Anything still marked as a primary-input driver but not declared is undriven.
        for (id, wire) in graph.live_wires() {
            if wire.driver == Driver::PrimaryInput && !graph.primary_inputs.contains(&id) {
                return Err(ParseError::UndrivenWire {
                    name: wire.name.clone(),
                });
            }
        }

        graph.recompute_topo()?;
        graph.validate()?;
        Ok(graph)
    }
}

/// Split a wide gate into a left-associative tree of two-input gates.
/// For the inverted kinds the inversion is applied only at the root, so
/// `NAND(a,b,c)` becomes `NAND(AND(a,b), c)`.
fn build_reduction(
    graph: &mut DesignGraph,
    kind: GateKind,
    args: &[WireId],
    out: WireId,
    out_name: &str,
) {
    let inner = match kind {
        GateKind::Nand => GateKind::And,
        GateKind::Nor => GateKind::Or,
        GateKind::Xnor => GateKind::Xor,
        other => other,
    };
    let mut acc = args[0];
    for (i, &next) in args[1..args.len() - 1].iter().enumerate() {
        let name = graph.fresh_name(&format!("{out_name}_x{}", i + 1));
        let mid = graph.add_wire(name, Driver::PrimaryInput);
        graph.add_gate(inner, vec![acc, next], mid);
        acc = mid;
    }
    graph.add_gate(kind, vec![acc, args[args.len() - 1]], out);
}

fn parse_parenthesized(
    rest: &str,
    lineno: usize,
    line: &str,
    trimmed: &str,
    offset: usize,
) -> Result<String, ParseError> {
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .map(str::trim)
        .filter(|n| !n.is_empty() && is_wire_name(n))
        .ok_or_else(|| ParseError::Syntax {
            line: lineno,
            column: column_of(line, trimmed, offset),
            message: "expected a single parenthesized wire name".into(),
        })?;
    Ok(inner.to_string())
}

fn is_wire_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '[' || c == ']')
}

fn column_of(line: &str, trimmed: &str, offset_in_trimmed: usize) -> usize {
    let leading = line.len() - trimmed.len();
    leading + offset_in_trimmed + 1
}

/// `suffix_index("keyinput12", "keyinput") == Some(12)`.
fn suffix_index(name: &str, prefix: &str) -> Option<u32> {
    name.strip_prefix(prefix)
        .filter(|rest| !rest.is_empty())
        .and_then(|rest| rest.parse().ok())
}
