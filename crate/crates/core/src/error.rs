use thiserror::Error;

/// Errors raised while reading or validating a bench-format netlist.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown gate type `{name}`")]
    UnknownGateType { line: usize, name: String },
    #[error("wire `{name}` is never driven")]
    UndrivenWire { name: String },
    #[error("wire `{name}` is driven more than once")]
    MultipleDrivers { name: String },
    #[error("combinational cycle through wire `{name}`")]
    CombinationalCycle { name: String },
    #[error("key sidecar has {provided} bits but the design declares {expected} key inputs")]
    KeyLengthMismatch { provided: usize, expected: usize },
}

/// Errors from netlist queries and transforms.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum NetlistError {
    #[error("unknown wire id {0}")]
    UnknownWire(usize),
    #[error("unknown gate id {0}")]
    UnknownGate(usize),
    #[error("assignment covers {provided} inputs but the design has {expected}")]
    AssignmentWidth { provided: usize, expected: usize },
    #[error("designs disagree on primary {kind} names")]
    IoNameMismatch { kind: &'static str },
    #[error("key vector has {provided} bits but the design has {expected} key inputs")]
    KeyWidth { provided: usize, expected: usize },
    #[error("cannot lock wire `{name}`: it is a key input")]
    LockKeyWire { name: String },
    #[error("requested {requested} key gates but only {available} wires are lockable")]
    KeySizeTooLarge { requested: usize, available: usize },
    #[error("unknown key insertion id {0}")]
    UnknownInsertion(usize),
    #[error("gate type {0} cannot be masked (gadgets exist for AND, OR, NAND, NOR)")]
    Unmaskable(String),
    #[error("lock type {0} is not in the locking dictionary")]
    NotInLockDict(String),
}

/// Errors from dataset handling and model training.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum MlError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("row width {provided} does not match schema width {expected}")]
    WidthMismatch { provided: usize, expected: usize },
    #[error("schema hash mismatch: model was fitted on a different column layout")]
    SchemaMismatch,
    #[error("csv parse error: {0}")]
    BadCsv(String),
    #[error("minority class has {0} members; at least 2 are required for resampling")]
    MinorityTooSmall(usize),
    #[error("ensemble needs at least 2 members, got {0}")]
    EnsembleTooSmall(usize),
    #[error("model file is corrupt or has an unsupported version: {0}")]
    BadModelFile(String),
}

/// Errors from Shapley attribution.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum ExplainError {
    #[error("exact attribution supports at most {max} features, got {got}")]
    TooManyFeatures { max: usize, got: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("kernel attribution needs at least {min} coalition samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("point width {provided} does not match model width {expected}")]
    WidthMismatch { provided: usize, expected: usize },
}

/// Errors from the rule grammar and rule-driven locking.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum RuleError {
    #[error("rule line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rule line {line}: unknown feature `{name}`")]
    UnknownFeature { line: usize, name: String },
    #[error("rule line {line}: unknown bucket `{name}` (expected low, moderate or high)")]
    UnknownBucket { line: usize, name: String },
}

/// Errors from attack oracles.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum AttackError {
    #[error("design has no key inputs to attack")]
    NoKeyInputs,
    #[error("oracle training set collapsed to a single key-bit class")]
    DegenerateTraining,
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Errors from the end-to-end pipelines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum PipelineError {
    #[error("design has no lockable wires")]
    EmptyDesign,
    #[error("design has no maskable gates")]
    NoMaskableGates,
    #[error("only {available} candidates remain after filtering, need {requested}")]
    TooFewCandidates { requested: usize, available: usize },
    #[error(
        "model feature width {model} does not match the configured feature layout width {expected}"
    )]
    SchemaMismatch { model: usize, expected: usize },
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}
