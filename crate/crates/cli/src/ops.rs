//! Subcommand implementations.

use crate::manifest::Manifest;
use crate::{CliError, EXIT_MODEL, EXIT_USAGE};
use gatesmith_core::attack::{
    run_attack, train_structural_oracle, AttackOracle, StructuralOracle, SweepHeuristic,
};
use gatesmith_core::explain::{extract_rules, summarize_importance, waterfall_json};
use gatesmith_core::locking::random_lock;
use gatesmith_core::ml::{
    fit, load_model, save_model, scale_apply, scale_fit, smote_balance, Dataset, FitParams,
    ModelKind, ScaleMode, SMOTE_DEFAULT_K,
};
use gatesmith_core::netlist::{
    key_sidecar_text, parse_design, parse_design_with_key, parse_key_sidecar, serialize_design,
};
use gatesmith_core::pipeline::{
    guided_lock, guided_mask, knowledge_extraction_ll, knowledge_extraction_sc, MaskStrategy,
    PipelineConfig,
};
use gatesmith_core::rules::{parse_rules as parse_rule_text, rule_lock as rules_lock};
use gatesmith_core::{mix_seed, DesignGraph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::path::Path;

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(&format!("reading {}", path.display()), e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
}

fn design_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "design".into())
}

/// Load a bench file; if a sidecar `<stem>.key` exists (or an explicit key
/// path is given), attach the unlock bits.
fn load_design(path: &Path, key: Option<&Path>) -> Result<(DesignGraph, Vec<u8>), CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes).to_string();
    let sidecar = key
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| path.with_extension("key"));
    let graph = if sidecar.exists() {
        let key_text = String::from_utf8_lossy(&read(&sidecar)?).to_string();
        let bits = parse_key_sidecar(&key_text)?;
        parse_design_with_key(&text, &bits)?
    } else {
        parse_design(&text)?
    };
    Ok((graph.renamed(&design_name(path)), bytes))
}

/// Write a bench file plus its key sidecar when key inputs exist.
fn write_design(graph: &DesignGraph, path: &Path, manifest: &mut Manifest) -> Result<(), CliError> {
    let text = serialize_design(graph);
    write(path, text.as_bytes())?;
    manifest.record_output(path);
    if let Some(key_text) = key_sidecar_text(graph) {
        let key_path = path.with_extension("key");
        write(&key_path, key_text.as_bytes())?;
        manifest.record_output(&key_path);
    }
    Ok(())
}

fn finish_manifest(
    manifest: Manifest,
    explicit: Option<&Path>,
    primary: &Path,
) -> Result<(), CliError> {
    let path = explicit
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| Manifest::default_path(primary));
    manifest
        .write(&path)
        .map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
}

pub fn parse_check(path: &Path) -> Result<(), CliError> {
    let (graph, bytes) = load_design(path, None)?;
    graph.validate()?;
    let report = serde_json::json!({
        "design": graph.name(),
        "file": path.display().to_string(),
        "fnv64": format!("{:016x}", graph.content_hash()),
        "bytes": bytes.len(),
        "gates": graph.gate_count(),
        "wires": graph.wire_count(),
        "primary_inputs": graph.primary_inputs().len(),
        "primary_outputs": graph.primary_outputs().len(),
        "key_inputs": graph.key_inputs().len(),
        "mask_inputs": graph.mask_inputs().len(),
        "dff_cuts": graph.dff_pairs().len(),
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn extract_ll(
    config: &PipelineConfig,
    design_path: &Path,
    oracle_kind: &str,
    oracle_file: Option<&Path>,
    oracle_refs: &[std::path::PathBuf],
    save_oracle: Option<&Path>,
    out: &Path,
    audit_path: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("extract-ll", config);
    let (design, bytes) = load_design(design_path, None)?;
    manifest.record_input(design_path, &bytes);

    let oracle: Box<dyn AttackOracle> = match oracle_kind {
        "sweep" => Box::new(SweepHeuristic),
        "structural" => {
            if let Some(path) = oracle_file {
                let bytes = read(path)?;
                manifest.record_input(path, &bytes);
                Box::new(StructuralOracle::load(&bytes)?)
            } else if !oracle_refs.is_empty() {
                let mut refs = Vec::new();
                for p in oracle_refs {
                    let (g, b) = load_design(p, None)?;
                    manifest.record_input(p, &b);
                    refs.push(g);
                }
                let trained = train_structural_oracle(
                    &refs,
                    &config.lock_dict,
                    config.loc,
                    8,
                    mix_seed(config.seed, 0x0AC1),
                )?;
                if let Some(path) = save_oracle {
                    write(path, &trained.save())?;
                    manifest.record_output(path);
                }
                Box::new(trained)
            } else {
                return Err(CliError::usage(
                    "structural oracle needs --oracle-file or --oracle-refs",
                ));
            }
        }
        other => return Err(CliError::usage(format!("unknown oracle `{other}`"))),
    };

    let (data, audit) = knowledge_extraction_ll(&design, oracle.as_ref(), config)?;
    write(out, data.to_csv().as_bytes())?;
    manifest.record_output(out);
    if let Some(path) = audit_path {
        write(
            path,
            serde_json::to_string_pretty(&audit).unwrap().as_bytes(),
        )?;
        manifest.record_output(path);
    }
    manifest.extra = Some(serde_json::json!({
        "rows": data.len(),
        "iterations": audit.iterations.len(),
        "oracle": oracle.name(),
    }));
    finish_manifest(manifest, manifest_path, out)
}

pub fn extract_sc(
    config: &PipelineConfig,
    design_path: &Path,
    out: &Path,
    audit_path: Option<&Path>,
    traces_out: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("extract-sc", config);
    let (design, bytes) = load_design(design_path, None)?;
    manifest.record_input(design_path, &bytes);
    if let Some(prefix) = traces_out {
        let (fixed, random) = gatesmith_core::sidechannel::simulate_power_traces(
            &design,
            config.n_traces,
            gatesmith_core::mix_seed(config.seed, 0xB0),
        )?;
        let hash = design.content_hash();
        for (set, tag) in [(&fixed, "fixed"), (&random, "random")] {
            let path = prefix.with_extension(format!("{tag}.traces"));
            write(
                &path,
                &gatesmith_core::sidechannel::write_trace_set(set, hash),
            )?;
            manifest.record_output(&path);
        }
    }
    let (data, audit) = knowledge_extraction_sc(&design, config)?;
    write(out, data.to_csv().as_bytes())?;
    manifest.record_output(out);
    if let Some(path) = audit_path {
        write(
            path,
            serde_json::to_string_pretty(&audit).unwrap().as_bytes(),
        )?;
        manifest.record_output(path);
    }
    manifest.extra = Some(serde_json::json!({
        "rows": data.len(),
        "iterations": audit.iterations.len(),
    }));
    finish_manifest(manifest, manifest_path, out)
}

pub fn train(
    config: &PipelineConfig,
    data_paths: &[std::path::PathBuf],
    model_kind: &str,
    no_smote: bool,
    scale: Option<&str>,
    out: &Path,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    if data_paths.is_empty() {
        return Err(CliError::usage("train needs at least one --data file"));
    }
    let kind = ModelKind::parse(model_kind)
        .ok_or_else(|| CliError::usage(format!("unknown model kind `{model_kind}`")))?;
    let mut manifest = Manifest::new("train", config);
    let mut parts = Vec::new();
    for path in data_paths {
        let bytes = read(path)?;
        manifest.record_input(path, &bytes);
        parts.push(Dataset::from_csv(&String::from_utf8_lossy(&bytes))?);
    }
    let merged = Dataset::merged(&parts)?;
    let balanced = if no_smote {
        merged
    } else {
        smote_balance(&merged, SMOTE_DEFAULT_K, mix_seed(config.seed, 0x5307))?
    };
    let (final_data, scaler_note) = match scale {
        None => (balanced, serde_json::Value::Null),
        Some(mode_text) => {
            let mode = match mode_text {
                "standard" => ScaleMode::Standard,
                "minmax" => ScaleMode::MinMax,
                other => return Err(CliError::usage(format!("unknown scale mode `{other}`"))),
            };
            let scaler = scale_fit(&balanced, mode);
            (
                scale_apply(&scaler, &balanced),
                serde_json::json!(mode_text),
            )
        }
    };
    let params = FitParams::default();
    let model = fit(kind, &final_data, params, mix_seed(config.seed, 0xF17))?;
    write(out, &save_model(&model))?;
    manifest.record_output(out);
    let (zeros, ones) = final_data.class_counts();
    manifest.extra = Some(serde_json::json!({
        "model": kind.name(),
        "rows": final_data.len(),
        "class_counts": { "bad": zeros, "good": ones },
        "learning_rate": params.learning_rate,
        "n_trees": params.n_trees,
        "smote": !no_smote,
        "scale": scaler_note,
        "schema_hash": format!("{:016x}", model.schema_hash()),
    }));
    finish_manifest(manifest, manifest_path, out)
}

pub fn lock(
    config: &PipelineConfig,
    design_path: &Path,
    model_path: &Path,
    out: &Path,
    audit_path: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("lock", config);
    let (design, bytes) = load_design(design_path, None)?;
    manifest.record_input(design_path, &bytes);
    let model_bytes = read(model_path)?;
    manifest.record_input(model_path, &model_bytes);
    let model = load_model(&model_bytes)?;
    let (locked, audit) = guided_lock(&design, &model, config)?;
    write_design(&locked, out, &mut manifest)?;
    if let Some(path) = audit_path {
        write(
            path,
            serde_json::to_string_pretty(&audit).unwrap().as_bytes(),
        )?;
        manifest.record_output(path);
    }
    manifest.extra = Some(serde_json::json!({
        "kl": audit.kl,
        "scanned": audit.scanned,
        "full_enumeration": audit.full_enumeration,
        "elapsed_ms": audit.elapsed_ms,
    }));
    finish_manifest(manifest, manifest_path, out)
}

pub fn rule_lock(
    config: &PipelineConfig,
    design_path: &Path,
    rules_path: &Path,
    out: &Path,
    audit_path: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("rule-lock", config);
    let (design, bytes) = load_design(design_path, None)?;
    manifest.record_input(design_path, &bytes);
    let rule_bytes = read(rules_path)?;
    manifest.record_input(rules_path, &rule_bytes);
    let rules = parse_rule_text(&String::from_utf8_lossy(&rule_bytes))?;
    let kl = config.kl.resolve(design.gate_count());
    let (locked, report) = rules_lock(
        &design,
        &rules,
        &config.lock_dict,
        kl,
        mix_seed(config.seed, 0x41E),
    )?;
    write_design(&locked, out, &mut manifest)?;
    if report.filled_from_neutral > 0 {
        eprintln!(
            "gatesmith: rule shortfall: {} rule-approved candidates for kl={kl}; {} filled from neutral",
            report.lock_verdict_candidates, report.filled_from_neutral
        );
    }
    if let Some(path) = audit_path {
        let audit = serde_json::json!({
            "kl": kl,
            "rules": rules.len(),
            "lock_verdict_candidates": report.lock_verdict_candidates,
            "filled_from_neutral": report.filled_from_neutral,
            "selected": report
                .selected
                .iter()
                .map(|(w, k)| serde_json::json!({
                    "wire": design.wire(*w).name,
                    "lock_type": k.name(),
                }))
                .collect::<Vec<_>>(),
        });
        write(
            path,
            serde_json::to_string_pretty(&audit).unwrap().as_bytes(),
        )?;
        manifest.record_output(path);
    }
    finish_manifest(manifest, manifest_path, out)
}

pub fn attack(
    config: &PipelineConfig,
    design_path: &Path,
    key_path: Option<&Path>,
    oracle_kind: &str,
    oracle_file: Option<&Path>,
    out: &Path,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("attack", config);
    let (design, bytes) = load_design(design_path, key_path)?;
    manifest.record_input(design_path, &bytes);
    let oracle: Box<dyn AttackOracle> = match oracle_kind {
        "sweep" => Box::new(SweepHeuristic),
        "structural" => {
            let path = oracle_file
                .ok_or_else(|| CliError::usage("structural oracle needs --oracle-file"))?;
            let bytes = read(path)?;
            manifest.record_input(path, &bytes);
            Box::new(StructuralOracle::load(&bytes)?)
        }
        other => return Err(CliError::usage(format!("unknown oracle `{other}`"))),
    };
    let key = design.correct_key();
    let result = run_attack(oracle.as_ref(), &design, &key)?;
    let report = serde_json::json!({
        "design": design.name(),
        "oracle": oracle.name(),
        "keys": key.len(),
        "accuracy": result.accuracy,
        "vulnerable": result.vulnerable,
        "resilient": result.resilient,
        "predictions": result
            .predictions
            .iter()
            .zip(&key)
            .map(|(p, truth)| serde_json::json!({
                "key_wire": design.wire(p.key_wire).name,
                "predicted": p.bit as u8,
                "actual": *truth as u8,
                "confidence": p.confidence,
            }))
            .collect::<Vec<_>>(),
    });
    write(
        out,
        serde_json::to_string_pretty(&report).unwrap().as_bytes(),
    )?;
    manifest.record_output(out);
    finish_manifest(manifest, manifest_path, out)
}

#[allow(clippy::too_many_arguments)]
pub fn mask(
    config: &PipelineConfig,
    design_path: &Path,
    model_path: Option<&Path>,
    strategy: Option<&str>,
    leakage_csv: Option<&Path>,
    out: &Path,
    report_path: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("mask", config);
    let (design, bytes) = load_design(design_path, None)?;
    manifest.record_input(design_path, &bytes);
    if let Some(path) = leakage_csv {
        let map = gatesmith_core::pipeline::leakage_map(&design, config)?;
        write(path, map.to_csv(&design).as_bytes())?;
        manifest.record_output(path);
    }
    let model = match model_path {
        Some(path) => {
            let bytes = read(path)?;
            manifest.record_input(path, &bytes);
            Some(load_model(&bytes)?)
        }
        None => None,
    };
    let strategy = match (strategy, &model) {
        (Some("random"), _) => MaskStrategy::Random,
        (Some("model") | None, Some(m)) => MaskStrategy::Model(m),
        (Some("model"), None) => {
            return Err(CliError::usage("strategy `model` needs --model"));
        }
        (None, None) => MaskStrategy::Random,
        (Some(other), _) => {
            return Err(CliError::usage(format!("unknown strategy `{other}`")));
        }
    };
    let (masked, report) = guided_mask(&design, strategy, config)?;
    if report.clamped {
        eprintln!(
            "gatesmith: mask budget clamped to {} maskable gates",
            report.mod_size
        );
    }
    write_design(&masked, out, &mut manifest)?;
    if let Some(path) = report_path {
        write(
            path,
            serde_json::to_string_pretty(&report).unwrap().as_bytes(),
        )?;
        manifest.record_output(path);
    }
    manifest.extra = Some(serde_json::json!({
        "masked_gates": report.mod_size,
        "clamped": report.clamped,
        "mean_t_before": report.mean_t_before,
        "mean_t_after": report.mean_t_after,
        "reduction_percent": report.reduction_percent,
        "insertion_accuracy": report.insertion_accuracy,
    }));
    finish_manifest(manifest, manifest_path, out)
}

#[allow(clippy::too_many_arguments)]
pub fn explain(
    config: &PipelineConfig,
    model_path: &Path,
    data_path: &Path,
    points: usize,
    background: usize,
    samples: usize,
    out: &Path,
    rules_out: Option<&Path>,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("explain", config);
    let model_bytes = read(model_path)?;
    manifest.record_input(model_path, &model_bytes);
    let model = load_model(&model_bytes)?;
    let data_bytes = read(data_path)?;
    manifest.record_input(data_path, &data_bytes);
    let data = Dataset::from_csv(&String::from_utf8_lossy(&data_bytes))?;
    if model.ensure_schema(&data.columns).is_err() {
        return Err(CliError {
            code: EXIT_MODEL,
            message: "model schema does not match the dataset columns".into(),
        });
    }
    if data.is_empty() {
        return Err(CliError {
            code: EXIT_MODEL,
            message: "dataset is empty".into(),
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(config.seed, 0xE81));
    let mut indices: Vec<usize> = (0..data.len()).collect();
    indices.shuffle(&mut rng);
    let bg_rows: Vec<Vec<f64>> = indices
        .iter()
        .take(background.max(1).min(data.len()))
        .map(|&i| data.rows[i].clone())
        .collect();
    let point_rows: Vec<Vec<f64>> = indices
        .iter()
        .rev()
        .take(points.max(1).min(data.len()))
        .map(|&i| data.rows[i].clone())
        .collect();

    let score = |x: &[f64]| model.score(x).expect("schema checked above");
    let p = data.width();
    let summary = if p <= gatesmith_core::explain::EXACT_FEATURE_LIMIT {
        summarize_importance(&score, &bg_rows, &point_rows, mix_seed(config.seed, 0xE82))?
    } else {
        // Kernel path with an explicit coalition budget per point.
        let mut explanations = Vec::with_capacity(point_rows.len());
        for (i, x) in point_rows.iter().enumerate() {
            explanations.push(gatesmith_core::explain::shap_kernel(
                &score,
                &bg_rows,
                x,
                samples.max(2 * p + 2),
                mix_seed(config.seed, 0xE83 + i as u64),
            )?);
        }
        let mut ranking: Vec<(usize, f64)> = (0..p)
            .map(|j| {
                let mean = explanations.iter().map(|e| e.phi[j].abs()).sum::<f64>()
                    / explanations.len() as f64;
                (j, mean)
            })
            .collect();
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        gatesmith_core::explain::ImportanceSummary {
            ranking,
            explanations,
        }
    };

    let export = serde_json::json!({
        "model": model.kind.name(),
        "points": summary.explanations.len(),
        "background": bg_rows.len(),
        "ranking": summary
            .ranking
            .iter()
            .map(|(j, v)| serde_json::json!({ "feature": data.columns[*j], "mean_abs_phi": v }))
            .collect::<Vec<_>>(),
        "waterfalls": summary
            .explanations
            .iter()
            .map(|e| waterfall_json(e, &data.columns))
            .collect::<Vec<_>>(),
    });
    write(
        out,
        serde_json::to_string_pretty(&export).unwrap().as_bytes(),
    )?;
    manifest.record_output(out);

    if let Some(path) = rules_out {
        let layout = config.locking_layout();
        if layout.column_names() != data.columns {
            return Err(CliError {
                code: EXIT_USAGE,
                message: format!(
                    "dataset columns do not form a locking layout for loc={} (rule extraction \
                     needs extract-ll data; check --loc)",
                    config.loc
                ),
            });
        }
        let rules = extract_rules(&summary.explanations, &layout);
        write(
            path,
            gatesmith_core::rules::serialize_rules(&rules).as_bytes(),
        )?;
        manifest.record_output(path);
    }
    finish_manifest(manifest, manifest_path, out)
}

#[allow(clippy::too_many_arguments)]
pub fn report(
    config: &PipelineConfig,
    design_path: &Path,
    compare: &str,
    model_path: Option<&Path>,
    rules_path: Option<&Path>,
    oracle_file: Option<&Path>,
    sweep: bool,
    seeds: u64,
    out: &Path,
    manifest_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut manifest = Manifest::new("report", config);
    let (design, bytes) = load_design(design_path, None)?;
    manifest.record_input(design_path, &bytes);

    let structural = match oracle_file {
        Some(path) => {
            let bytes = read(path)?;
            manifest.record_input(path, &bytes);
            Some(StructuralOracle::load(&bytes)?)
        }
        None => None,
    };
    if structural.is_none() && !sweep {
        return Err(CliError::usage(
            "report needs an attack: --oracle-file and/or --sweep",
        ));
    }
    let model = match model_path {
        Some(path) => {
            let bytes = read(path)?;
            manifest.record_input(path, &bytes);
            Some(load_model(&bytes)?)
        }
        None => None,
    };
    let rule_set = match rules_path {
        Some(path) => {
            let bytes = read(path)?;
            manifest.record_input(path, &bytes);
            Some(parse_rule_text(&String::from_utf8_lossy(&bytes))?)
        }
        None => None,
    };

    let kl = config.kl.resolve(design.gate_count());
    let lockers: Vec<&str> = compare.split(',').map(str::trim).collect();
    let mut rows: Vec<serde_json::Value> = Vec::new();
    let mut means: Vec<(String, String, f64)> = Vec::new();
    for locker in &lockers {
        let mut per_oracle: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
        for seed in 0..seeds {
            let locked = match *locker {
                "random" => {
                    random_lock(
                        &design,
                        kl,
                        &config.lock_dict,
                        mix_seed(config.seed, 0xAA00 + seed),
                    )?
                    .0
                }
                "xdfs" => {
                    let model = model
                        .as_ref()
                        .ok_or_else(|| CliError::usage("locker `xdfs` needs --model"))?;
                    let cfg = PipelineConfig {
                        seed: mix_seed(config.seed, 0xBB00 + seed),
                        ..config.clone()
                    };
                    guided_lock(&design, model, &cfg)?.0
                }
                "rule" => {
                    let rules = rule_set
                        .as_ref()
                        .ok_or_else(|| CliError::usage("locker `rule` needs --rules"))?;
                    rules_lock(
                        &design,
                        rules,
                        &config.lock_dict,
                        kl,
                        mix_seed(config.seed, 0xCC00 + seed),
                    )?
                    .0
                }
                other => {
                    return Err(CliError::usage(format!("unknown locker `{other}`")));
                }
            };
            let key = locked.correct_key();
            if let Some(oracle) = &structural {
                let acc = run_attack(oracle, &locked, &key)?.accuracy;
                per_oracle.entry("structural".into()).or_default().push(acc);
                rows.push(serde_json::json!({
                    "design": design.name(), "locker": locker, "oracle": "structural",
                    "seed": seed, "kl": kl, "accuracy": acc,
                }));
            }
            if sweep {
                let acc = run_attack(&SweepHeuristic, &locked, &key)?.accuracy;
                per_oracle.entry("sweep".into()).or_default().push(acc);
                rows.push(serde_json::json!({
                    "design": design.name(), "locker": locker, "oracle": "sweep",
                    "seed": seed, "kl": kl, "accuracy": acc,
                }));
            }
        }
        for (oracle, accs) in per_oracle {
            means.push((
                locker.to_string(),
                oracle,
                accs.iter().sum::<f64>() / accs.len() as f64,
            ));
        }
    }

    // Wide CSV: one row per oracle, one column per locker (mean accuracy %).
    let mut csv = String::from("design,oracle");
    for locker in &lockers {
        csv.push_str(&format!(",{locker}"));
    }
    csv.push('\n');
    let oracles: Vec<String> = {
        let mut names: Vec<String> = means.iter().map(|(_, o, _)| o.clone()).collect();
        names.sort();
        names.dedup();
        names
    };
    for oracle in &oracles {
        csv.push_str(&format!("{},{oracle}", design.name()));
        for locker in &lockers {
            let mean = means
                .iter()
                .find(|(l, o, _)| l == locker && o == oracle)
                .map(|(_, _, m)| m * 100.0)
                .unwrap_or(f64::NAN);
            csv.push_str(&format!(",{mean:.2}"));
        }
        csv.push('\n');
    }
    write(out, csv.as_bytes())?;
    manifest.record_output(out);
    let json_path = out.with_extension("json");
    write(
        &json_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "design": design.name(),
            "kl": kl,
            "seeds": seeds,
            "rows": rows,
        }))
        .unwrap()
        .as_bytes(),
    )?;
    manifest.record_output(&json_path);
    finish_manifest(manifest, manifest_path, out)
}
