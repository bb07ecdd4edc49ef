//! Batch operator surface for the hardening flows.
//!
//! Every run loads an optional declarative JSON config (flags override it),
//! executes one subcommand, and writes a manifest recording the resolved
//! config, input hashes and outputs. Outputs are byte-stable for a fixed
//! manifest regardless of worker count.

mod manifest;
mod ops;

use clap::{Parser, Subcommand};
use gatesmith_core::pipeline::{PipelineConfig, SizeSpec};
use std::path::PathBuf;
use std::process::ExitCode;

/// Process exit codes, one per error class.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_NETLIST: u8 = 4;
pub const EXIT_IO: u8 = 5;
pub const EXIT_MODEL: u8 = 6;
pub const EXIT_PIPELINE: u8 = 7;
pub const EXIT_ATTACK: u8 = 8;

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: std::io::Error) -> CliError {
        CliError {
            code: EXIT_IO,
            message: format!("{context}: {err}"),
        }
    }
}

impl From<gatesmith_core::ParseError> for CliError {
    fn from(e: gatesmith_core::ParseError) -> Self {
        CliError {
            code: EXIT_PARSE,
            message: e.to_string(),
        }
    }
}

impl From<gatesmith_core::NetlistError> for CliError {
    fn from(e: gatesmith_core::NetlistError) -> Self {
        CliError {
            code: EXIT_NETLIST,
            message: e.to_string(),
        }
    }
}

impl From<gatesmith_core::MlError> for CliError {
    fn from(e: gatesmith_core::MlError) -> Self {
        CliError {
            code: EXIT_MODEL,
            message: e.to_string(),
        }
    }
}

impl From<gatesmith_core::RuleError> for CliError {
    fn from(e: gatesmith_core::RuleError) -> Self {
        CliError {
            code: EXIT_PARSE,
            message: e.to_string(),
        }
    }
}

impl From<gatesmith_core::ExplainError> for CliError {
    fn from(e: gatesmith_core::ExplainError) -> Self {
        CliError {
            code: EXIT_MODEL,
            message: e.to_string(),
        }
    }
}

impl From<gatesmith_core::AttackError> for CliError {
    fn from(e: gatesmith_core::AttackError) -> Self {
        CliError {
            code: EXIT_ATTACK,
            message: e.to_string(),
        }
    }
}

impl From<gatesmith_core::PipelineError> for CliError {
    fn from(e: gatesmith_core::PipelineError) -> Self {
        CliError {
            code: EXIT_PIPELINE,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "gatesmith", version, about = "Attack-aware netlist hardening")]
struct Cli {
    /// Declarative JSON config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (all derived randomness flows from it).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Manifest path; defaults to `<primary output>.manifest.json`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a bench netlist; print a JSON report.
    ParseCheck { design: PathBuf },
    /// Run the iterative lock/attack/label loop and emit a labeled dataset.
    ExtractLl {
        #[arg(long)]
        design: PathBuf,
        /// `sweep`, or `structural` (with --oracle-file or --oracle-refs).
        #[arg(long, default_value = "structural")]
        oracle: String,
        /// Load a previously trained structural oracle.
        #[arg(long)]
        oracle_file: Option<PathBuf>,
        /// Train a fresh structural oracle on these reference designs.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        oracle_refs: Vec<PathBuf>,
        /// Where to store a freshly trained oracle.
        #[arg(long)]
        save_oracle: Option<PathBuf>,
        #[arg(long)]
        key_size: Option<usize>,
        #[arg(long)]
        th_it: Option<usize>,
        #[arg(long)]
        loc: Option<usize>,
        /// Output dataset (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Audit log (JSON).
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Run the mask/measure/label loop and emit a labeled dataset.
    ExtractSc {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        mod_size: Option<String>,
        #[arg(long)]
        th_r: Option<f64>,
        #[arg(long)]
        th_it: Option<usize>,
        #[arg(long)]
        loc: Option<usize>,
        #[arg(long)]
        traces: Option<usize>,
        /// Also dump the design's fixed/random trace sets (columnar binary)
        /// as `<prefix>.fixed.traces` and `<prefix>.random.traces`.
        #[arg(long)]
        traces_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Fit a model on one or more datasets.
    Train {
        /// Dataset CSVs (merged; schemas must match).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        data: Vec<PathBuf>,
        /// decision-tree | random-forest | adaboost | gradient-boosting | ensemble
        #[arg(long, default_value = "random-forest")]
        model: String,
        /// Skip minority oversampling.
        #[arg(long)]
        no_smote: bool,
        /// Optional column scaling: standard | minmax.
        #[arg(long)]
        scale: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Model-guided locking.
    Lock {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Key length: absolute (`64`) or percent of gate count (`10%`).
        #[arg(long)]
        kl: String,
        /// Adaptive early stop.
        #[arg(long)]
        ada: bool,
        #[arg(long)]
        m: Option<usize>,
        /// Goodness threshold; required with --ada or --rn.
        #[arg(long)]
        thg: Option<f64>,
        /// Controlled randomness (shuffle the good candidates).
        #[arg(long)]
        rn: bool,
        /// Allow repeated wires (distinct wires are the default).
        #[arg(long)]
        no_unique: bool,
        #[arg(long)]
        loc: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Lock directly from a rule file, no model.
    RuleLock {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        kl: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Attack a locked design and report per-key recovery.
    Attack {
        #[arg(long)]
        design: PathBuf,
        /// Sidecar key file; defaults to `<design>.key`.
        #[arg(long)]
        key: Option<PathBuf>,
        /// `sweep` or `structural` (with --oracle-file).
        #[arg(long, default_value = "sweep")]
        oracle: String,
        #[arg(long)]
        oracle_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Model-guided (or random-baseline) masking.
    Mask {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// `model` (default when --model is given) or `random`.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        mod_size: Option<String>,
        #[arg(long)]
        th_r: Option<f64>,
        #[arg(long)]
        loc: Option<usize>,
        #[arg(long)]
        traces: Option<usize>,
        /// Also write the pre-mask per-gate leakage map as CSV.
        #[arg(long)]
        leakage_csv: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Shapley summaries, numeric waterfalls, and distilled rules.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Points to explain (sampled from the dataset).
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Background rows (sampled from the dataset).
        #[arg(long, default_value_t = 16)]
        background: usize,
        /// Coalition samples per point for the kernel path.
        #[arg(long, default_value_t = 512)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also distill and write locking rules.
        #[arg(long)]
        rules_out: Option<PathBuf>,
        #[arg(long)]
        loc: Option<usize>,
    },
    /// Compare lockers under attack and emit accuracy tables (CSV + JSON).
    Report {
        #[arg(long)]
        design: PathBuf,
        /// Comma-separated lockers: random, xdfs, rule.
        #[arg(long, default_value = "random,xdfs")]
        compare: String,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        oracle_file: Option<PathBuf>,
        /// Also report the sweep heuristic.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        kl: Option<String>,
        /// Seeds per locker.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
            serde_json::from_str::<PipelineConfig>(&text)
                .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate().map_err(CliError::usage)?;
    Ok(config)
}

fn parse_size(text: &str) -> Result<SizeSpec, CliError> {
    SizeSpec::parse(text)
        .ok_or_else(|| CliError::usage(format!("bad size `{text}` (use `64` or `10%`)")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("gatesmith: worker pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gatesmith: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli)?;
    let manifest_path = cli.manifest.clone();
    match cli.command {
        Command::ParseCheck { ref design } => ops::parse_check(design),
        Command::ExtractLl {
            ref design,
            ref oracle,
            ref oracle_file,
            ref oracle_refs,
            ref save_oracle,
            key_size,
            th_it,
            loc,
            ref out,
            ref audit,
        } => {
            let mut config = config;
            if let Some(v) = key_size {
                config.key_size = v;
            }
            if let Some(v) = th_it {
                config.th_it = v;
            }
            if let Some(v) = loc {
                config.loc = v;
            }
            config.validate().map_err(CliError::usage)?;
            ops::extract_ll(
                &config,
                design,
                oracle,
                oracle_file.as_deref(),
                oracle_refs,
                save_oracle.as_deref(),
                out,
                audit.as_deref(),
                manifest_path.as_deref(),
            )
        }
        Command::ExtractSc {
            ref design,
            ref mod_size,
            th_r,
            th_it,
            loc,
            traces,
            ref traces_out,
            ref out,
            ref audit,
        } => {
            let mut config = PipelineConfig { loc: 5, ..config };
            if let Some(t) = mod_size {
                config.mod_size = parse_size(t)?;
            }
            if let Some(v) = th_r {
                config.th_r = v;
            }
            if let Some(v) = th_it {
                config.th_it = v;
            }
            if let Some(v) = loc {
                config.loc = v;
            }
            if let Some(v) = traces {
                config.n_traces = v;
            }
            config.validate().map_err(CliError::usage)?;
            ops::extract_sc(
                &config,
                design,
                out,
                audit.as_deref(),
                traces_out.as_deref(),
                manifest_path.as_deref(),
            )
        }
        Command::Train {
            ref data,
            ref model,
            no_smote,
            ref scale,
            ref out,
        } => ops::train(
            &config,
            data,
            model,
            no_smote,
            scale.as_deref(),
            out,
            manifest_path.as_deref(),
        ),
        Command::Lock {
            ref design,
            ref model,
            ref kl,
            ada,
            m,
            thg,
            rn,
            no_unique,
            loc,
            ref out,
            ref audit,
        } => {
            let mut config = config;
            config.kl = parse_size(kl)?;
            config.ada = ada;
            config.rn = rn;
            config.unique_wires = !no_unique;
            if let Some(v) = m {
                config.m = v;
            }
            if let Some(v) = loc {
                config.loc = v;
            }
            match thg {
                Some(v) => config.th_g = v,
                None if ada || rn => {
                    // The good-candidate filter needs an explicit threshold.
                    return Err(CliError::usage(
                        "--ada/--rn select by goodness; pass --thg as well",
                    ));
                }
                None => {}
            }
            config.validate().map_err(CliError::usage)?;
            ops::lock(
                &config,
                design,
                model,
                out,
                audit.as_deref(),
                manifest_path.as_deref(),
            )
        }
        Command::RuleLock {
            ref design,
            ref rules,
            ref kl,
            ref out,
            ref audit,
        } => {
            let mut config = config;
            config.kl = parse_size(kl)?;
            ops::rule_lock(
                &config,
                design,
                rules,
                out,
                audit.as_deref(),
                manifest_path.as_deref(),
            )
        }
        Command::Attack {
            ref design,
            ref key,
            ref oracle,
            ref oracle_file,
            ref out,
        } => ops::attack(
            &config,
            design,
            key.as_deref(),
            oracle,
            oracle_file.as_deref(),
            out,
            manifest_path.as_deref(),
        ),
        Command::Mask {
            ref design,
            ref model,
            ref strategy,
            ref mod_size,
            th_r,
            loc,
            traces,
            ref leakage_csv,
            ref out,
            ref report,
        } => {
            let mut config = PipelineConfig { loc: 5, ..config };
            if let Some(t) = mod_size {
                config.mod_size = parse_size(t)?;
            }
            if let Some(v) = th_r {
                config.th_r = v;
            }
            if let Some(v) = loc {
                config.loc = v;
            }
            if let Some(v) = traces {
                config.n_traces = v;
            }
            config.validate().map_err(CliError::usage)?;
            ops::mask(
                &config,
                design,
                model.as_deref(),
                strategy.as_deref(),
                leakage_csv.as_deref(),
                out,
                report.as_deref(),
                manifest_path.as_deref(),
            )
        }
        Command::Explain {
            ref model,
            ref data,
            points,
            background,
            samples,
            ref out,
            ref rules_out,
            loc,
        } => {
            let mut config = config;
            if let Some(v) = loc {
                config.loc = v;
            }
            ops::explain(
                &config,
                model,
                data,
                points,
                background,
                samples,
                out,
                rules_out.as_deref(),
                manifest_path.as_deref(),
            )
        }
        Command::Report {
            ref design,
            ref compare,
            ref model,
            ref rules,
            ref oracle_file,
            sweep,
            ref kl,
            seeds,
            ref out,
        } => {
            let mut config = config;
            if let Some(t) = kl {
                config.kl = parse_size(t)?;
            }
            ops::report(
                &config,
                design,
                compare,
                model.as_deref(),
                rules.as_deref(),
                oracle_file.as_deref(),
                sweep,
                seeds,
                out,
                manifest_path.as_deref(),
            )
        }
    }
}
