//! In-repo classical learners shared by the locking and masking flows:
//! decision tree, random forest, AdaBoost, gradient boosting, an equal-weight
//! ensemble, SMOTE resampling and column scalers.
//!
//! Everything is deterministic under an explicit seed and safe for concurrent
//! inference once fitted.

mod boost;
mod forest;
mod scale;
mod smote;
mod tree;

pub use boost::{AdaBoost, GradientBoosting};
pub use forest::Forest;
pub use scale::{scale_apply, scale_fit, ScaleMode, Scaler};
pub use smote::{interpolate, smote_balance, DEFAULT_K as SMOTE_DEFAULT_K};
pub use tree::{Tree, TreeParams};

use crate::error::MlError;
use crate::netlist::fnv1a;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Labeled feature rows with a fixed column schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(columns: Vec<String>) -> Self {
        Dataset {
            columns,
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row(&mut self, row: Vec<f64>, label: u8) -> Result<(), MlError> {
        if row.len() != self.width() {
            return Err(MlError::WidthMismatch {
                provided: row.len(),
                expected: self.width(),
            });
        }
        debug_assert!(label <= 1);
        self.rows.push(row);
        self.labels.push(label);
        Ok(())
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    pub fn schema_hash(&self) -> u64 {
        fnv1a(self.columns.join(",").as_bytes())
    }

    /// Concatenate datasets sharing one schema.
    pub fn merged(parts: &[Dataset]) -> Result<Dataset, MlError> {
        let first = parts.first().ok_or(MlError::EmptyDataset)?;
        let mut out = Dataset::new(first.columns.clone());
        for p in parts {
            if p.columns != first.columns {
                return Err(MlError::SchemaMismatch);
            }
            out.rows.extend(p.rows.iter().cloned());
            out.labels.extend_from_slice(&p.labels);
        }
        Ok(out)
    }

    /// CSV with a header line; the label is the last column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push_str(",label\n");
        for (row, label) in self.rows.iter().zip(&self.labels) {
            for v in row {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{label}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Dataset, MlError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(MlError::EmptyDataset)?;
        let mut columns: Vec<String> = header.split(',').map(str::to_string).collect();
        if columns.pop().as_deref() != Some("label") {
            return Err(MlError::BadCsv("missing trailing label column".into()));
        }
        let mut data = Dataset::new(columns);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields: Vec<&str> = line.split(',').collect();
            let label_txt = fields.pop().unwrap_or("");
            let label: u8 = label_txt
                .trim()
                .parse()
                .map_err(|_| MlError::BadCsv(format!("line {}: bad label `{label_txt}`", i + 2)))?;
            let row: Result<Vec<f64>, _> = fields.iter().map(|f| f.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| MlError::BadCsv(format!("line {}: {e}", i + 2)))?;
            data.push_row(row, label)?;
        }
        Ok(data)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    AdaBoost,
    GradientBoosting,
    /// Equal-weight blend of decision tree, random forest and AdaBoost.
    Ensemble,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "decision-tree" | "dt" => Some(ModelKind::DecisionTree),
            "random-forest" | "rf" => Some(ModelKind::RandomForest),
            "adaboost" | "adb" => Some(ModelKind::AdaBoost),
            "gradient-boosting" | "gbm" | "xgb" => Some(ModelKind::GradientBoosting),
            "ensemble" | "ensm" => Some(ModelKind::Ensemble),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "decision-tree",
            ModelKind::RandomForest => "random-forest",
            ModelKind::AdaBoost => "adaboost",
            ModelKind::GradientBoosting => "gradient-boosting",
            ModelKind::Ensemble => "ensemble",
        }
    }
}

/// Hyperparameters. Zero-valued round counts select the per-kind defaults
/// (forest: 100 trees; AdaBoost: 50 stumps; gradient boosting: 100 rounds,
/// depth 3). The boosting learning rate defaults to 0.01.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub max_depth: Option<usize>,
    pub n_trees: usize,
    pub n_rounds: usize,
    pub learning_rate: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            max_depth: None,
            n_trees: 100,
            n_rounds: 0,
            learning_rate: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum ModelCore {
    Tree(Tree),
    Forest(Forest),
    Ada(AdaBoost),
    Gbm(GradientBoosting),
    Blend(Vec<TrainedModel>),
}

/// A fitted predictor exposing a goodness score in [0, 1]. Inference is
/// deterministic and immutable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub columns: Vec<String>,
    pub params: FitParams,
    core: ModelCore,
}

impl TrainedModel {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn schema_hash(&self) -> u64 {
        fnv1a(self.columns.join(",").as_bytes())
    }

    pub fn ensure_schema(&self, columns: &[String]) -> Result<(), MlError> {
        if self.columns == columns {
            Ok(())
        } else {
            Err(MlError::SchemaMismatch)
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, MlError> {
        if x.len() != self.width() {
            return Err(MlError::WidthMismatch {
                provided: x.len(),
                expected: self.width(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        match &self.core {
            ModelCore::Tree(t) => t.score(x),
            ModelCore::Forest(f) => f.score(x),
            ModelCore::Ada(a) => a.score(x),
            ModelCore::Gbm(g) => g.score(x),
            ModelCore::Blend(members) => {
                members.iter().map(|m| m.score_unchecked(x)).sum::<f64>() / members.len() as f64
            }
        }
    }

    /// Test helper: a model that always returns `prob` for `columns`.
    pub fn constant(columns: Vec<String>, prob: f64) -> TrainedModel {
        TrainedModel {
            kind: ModelKind::DecisionTree,
            columns,
            params: FitParams::default(),
            core: ModelCore::Tree(Tree::constant(prob)),
        }
    }
}

pub fn fit(
    kind: ModelKind,
    data: &Dataset,
    params: FitParams,
    seed: u64,
) -> Result<TrainedModel, MlError> {
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let (zeros, ones) = data.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(MlError::SingleClass);
    }
    let core = match kind {
        ModelKind::DecisionTree => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let weights = vec![1.0; data.len()];
            ModelCore::Tree(Tree::fit(
                &data.rows,
                &data.labels,
                &weights,
                TreeParams {
                    max_depth: params.max_depth,
                    ..TreeParams::default()
                },
                &mut rng,
            ))
        }
        ModelKind::RandomForest => ModelCore::Forest(Forest::fit(
            &data.rows,
            &data.labels,
            params.n_trees,
            params.max_depth,
            seed,
        )),
        ModelKind::AdaBoost => {
            let rounds = if params.n_rounds == 0 {
                50
            } else {
                params.n_rounds
            };
            ModelCore::Ada(AdaBoost::fit(
                &data.rows,
                &data.labels,
                rounds,
                params.learning_rate,
                seed,
            ))
        }
        ModelKind::GradientBoosting => {
            let rounds = if params.n_rounds == 0 {
                100
            } else {
                params.n_rounds
            };
            ModelCore::Gbm(GradientBoosting::fit(
                &data.rows,
                &data.labels,
                rounds,
                params.max_depth.unwrap_or(3),
                params.learning_rate,
            ))
        }
        ModelKind::Ensemble => {
            let members = vec![
                fit(ModelKind::DecisionTree, data, params, seed)?,
                fit(ModelKind::RandomForest, data, params, seed.wrapping_add(1))?,
                fit(ModelKind::AdaBoost, data, params, seed.wrapping_add(2))?,
            ];
            ModelCore::Blend(members)
        }
    };
    Ok(TrainedModel {
        kind,
        columns: data.columns.clone(),
        params,
        core,
    })
}

/// Equal-weight blend of already fitted models sharing one schema.
pub fn ensemble(models: Vec<TrainedModel>) -> Result<TrainedModel, MlError> {
    if models.len() < 2 {
        return Err(MlError::EnsembleTooSmall(models.len()));
    }
    let columns = models[0].columns.clone();
    for m in &models[1..] {
        m.ensure_schema(&columns)?;
    }
    let params = models[0].params;
    Ok(TrainedModel {
        kind: ModelKind::Ensemble,
        columns,
        params,
        core: ModelCore::Blend(models),
    })
}

const MODEL_MAGIC: &[u8; 4] = b"GSML";
const MODEL_VERSION: u32 = 1;

/// Versioned binary model file: magic, version, JSON payload.
pub fn save_model(model: &TrainedModel) -> Vec<u8> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    bytes.extend_from_slice(
        serde_json::to_vec(model)
            .expect("models serialize")
            .as_slice(),
    );
    bytes
}

pub fn load_model(bytes: &[u8]) -> Result<TrainedModel, MlError> {
    if bytes.len() < 8 || &bytes[..4] != MODEL_MAGIC {
        return Err(MlError::BadModelFile("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(MlError::BadModelFile(format!("version {version}")));
    }
    serde_json::from_slice(&bytes[8..]).map_err(|e| MlError::BadModelFile(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Dataset {
        let mut d = Dataset::new(vec!["x".into(), "noise".into()]);
        for i in 0..50 {
            let v = i as f64 / 50.0;
            d.push_row(vec![v, ((i * 31) % 11) as f64], u8::from(v > 0.55))
                .unwrap();
        }
        d
    }

    #[test]
    fn decision_tree_fits_separable_set() {
        let data = separable();
        let model = fit(ModelKind::DecisionTree, &data, FitParams::default(), 0).unwrap();
        let correct = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(x, y)| u8::from(model.score(x).unwrap() >= 0.5) == **y)
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn adaboost_defaults_record_learning_rate() {
        let data = separable();
        let model = fit(ModelKind::AdaBoost, &data, FitParams::default(), 0).unwrap();
        assert_eq!(model.params.learning_rate, 0.01);
        match &model.core {
            ModelCore::Ada(a) => assert_eq!(a.learning_rate, 0.01),
            other => panic!("unexpected core {other:?}"),
        }
    }

    #[test]
    fn empty_and_single_class_rejected() {
        let empty = Dataset::new(vec!["x".into()]);
        assert_eq!(
            fit(ModelKind::DecisionTree, &empty, FitParams::default(), 0).unwrap_err(),
            MlError::EmptyDataset
        );
        let mut single = Dataset::new(vec!["x".into()]);
        single.push_row(vec![1.0], 1).unwrap();
        single.push_row(vec![2.0], 1).unwrap();
        assert_eq!(
            fit(ModelKind::DecisionTree, &single, FitParams::default(), 0).unwrap_err(),
            MlError::SingleClass
        );
    }

    #[test]
    fn ensemble_scores_average() {
        let cols = vec!["x".into()];
        let blend = ensemble(vec![
            TrainedModel::constant(cols.clone(), 1.0),
            TrainedModel::constant(cols.clone(), 0.0),
        ])
        .unwrap();
        assert_eq!(blend.score(&[0.0]).unwrap(), 0.5);
        let blend3 = ensemble(vec![
            TrainedModel::constant(cols.clone(), 0.9),
            TrainedModel::constant(cols.clone(), 0.9),
            TrainedModel::constant(cols.clone(), 0.0),
        ])
        .unwrap();
        assert!((blend3.score(&[0.0]).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(
            ensemble(vec![TrainedModel::constant(cols, 1.0)]).unwrap_err(),
            MlError::EnsembleTooSmall(1)
        );
    }

    #[test]
    fn deterministic_under_seed() {
        let data = separable();
        for kind in [
            ModelKind::DecisionTree,
            ModelKind::RandomForest,
            ModelKind::AdaBoost,
            ModelKind::GradientBoosting,
            ModelKind::Ensemble,
        ] {
            let a = fit(kind, &data, FitParams::default(), 42).unwrap();
            let b = fit(kind, &data, FitParams::default(), 42).unwrap();
            for i in 0..1000 {
                let x = vec![(i as f64) / 1000.0, (i % 13) as f64];
                assert_eq!(a.score(&x).unwrap(), b.score(&x).unwrap(), "{kind:?}");
            }
        }
    }

    #[test]
    fn score_rejects_width_mismatch() {
        let data = separable();
        let model = fit(ModelKind::RandomForest, &data, FitParams::default(), 0).unwrap();
        assert_eq!(
            model.score(&[1.0]).unwrap_err(),
            MlError::WidthMismatch {
                provided: 1,
                expected: 2
            }
        );
    }

    #[test]
    fn model_file_roundtrip() {
        let data = separable();
        let model = fit(ModelKind::GradientBoosting, &data, FitParams::default(), 3).unwrap();
        let bytes = save_model(&model);
        let back = load_model(&bytes).unwrap();
        for row in &data.rows {
            assert_eq!(model.score(row).unwrap(), back.score(row).unwrap());
        }
        assert!(load_model(b"nope").is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(
            load_model(&wrong_version).unwrap_err(),
            MlError::BadModelFile(_)
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let data = separable();
        let text = data.to_csv();
        let back = Dataset::from_csv(&text).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn scores_bounded_for_all_kinds() {
        let data = separable();
        for kind in [
            ModelKind::DecisionTree,
            ModelKind::RandomForest,
            ModelKind::AdaBoost,
            ModelKind::GradientBoosting,
            ModelKind::Ensemble,
        ] {
            let m = fit(kind, &data, FitParams::default(), 1).unwrap();
            for row in &data.rows {
                let s = m.score(row).unwrap();
                assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
