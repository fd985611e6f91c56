//! Regressors and the fitted-predictor container.
//!
//! One [`TrainedPredictor`] is fitted per (layer family, feature set,
//! encoding). The container carries the feature schema it was trained on and
//! rejects vectors built under any other schema.

pub mod forest;
pub mod gbdt;
pub mod linear;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{rmse, split_80_10_10, Dataset, Split, Standardizer};
use crate::domain::{Catalog, FeatureSet, HardwareEncoding, LayerFamily};
use crate::error::{Error, Result};
use crate::featurize::{assemble, schema, FeatureVector};

pub use forest::{fit_random_forest, FeatureFraction, ForestParams, RandomForest};
pub use gbdt::{fit_gbdt, Gbdt, GbdtParams};
pub use linear::{fit_linear, LinearModel};
pub use mlp::{fit_mlp, Mlp, MlpSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Linear,
    RandomForest,
    Gbdt,
    Mlp,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::Linear,
        LearnerKind::RandomForest,
        LearnerKind::Gbdt,
        LearnerKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Linear => "linear",
            LearnerKind::RandomForest => "rf",
            LearnerKind::Gbdt => "gbdt",
            LearnerKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lr" => Ok(LearnerKind::Linear),
            "rf" | "randomforest" | "random-forest" => Ok(LearnerKind::RandomForest),
            "gbdt" | "gbt" => Ok(LearnerKind::Gbdt),
            "mlp" => Ok(LearnerKind::Mlp),
            _ => Err(format!(
                "unknown learner `{s}` (valid: linear, rf, gbdt, mlp)"
            )),
        }
    }
}

/// Hyperparameters for every learner; only the chosen kind's entry is used.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default)]
    pub gbdt: GbdtParams,
    #[serde(default)]
    pub mlp: MlpSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Linear(LinearModel),
    RandomForest(RandomForest),
    Gbdt(Gbdt),
    Mlp(Mlp),
}

impl ModelParams {
    pub fn kind(&self) -> LearnerKind {
        match self {
            ModelParams::Linear(_) => LearnerKind::Linear,
            ModelParams::RandomForest(_) => LearnerKind::RandomForest,
            ModelParams::Gbdt(_) => LearnerKind::Gbdt,
            ModelParams::Mlp(_) => LearnerKind::Mlp,
        }
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            ModelParams::Linear(m) => m.predict(x),
            ModelParams::RandomForest(m) => m.predict(x),
            ModelParams::Gbdt(m) => m.predict(x),
            ModelParams::Mlp(m) => m.predict(x),
        }
    }
}

/// Fits the raw regressor for `kind`.
pub fn fit_raw(
    kind: LearnerKind,
    x: &[Vec<f64>],
    y: &[f64],
    hp: &Hyperparams,
    seed: u64,
) -> Result<ModelParams> {
    Ok(match kind {
        LearnerKind::Linear => ModelParams::Linear(fit_linear(x, y)?),
        LearnerKind::RandomForest => {
            ModelParams::RandomForest(fit_random_forest(x, y, hp.forest, seed)?)
        }
        LearnerKind::Gbdt => ModelParams::Gbdt(fit_gbdt(x, y, hp.gbdt, seed)?),
        LearnerKind::Mlp => ModelParams::Mlp(fit_mlp(x, y, hp.mlp.clone(), seed)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_rmse: f64,
    pub val_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPredictor {
    pub kind: LearnerKind,
    pub family: LayerFamily,
    pub feature_set: FeatureSet,
    pub encoding: HardwareEncoding,
    pub schema: Vec<String>,
    /// GPUs seen in training; defines one-hot positions in `Known` mode.
    pub catalog: Catalog,
    pub standardizer: Option<Standardizer>,
    pub parameters: ModelParams,
    pub train_seed: u64,
    pub metrics: Metrics,
}

impl TrainedPredictor {
    /// Checks `v` was built under this model's schema.
    pub fn check_schema(&self, names: &[String]) -> Result<()> {
        let n = self.schema.len().max(names.len());
        for i in 0..n {
            let expected = self.schema.get(i).map(String::as_str).unwrap_or("<end>");
            let found = names.get(i).map(String::as_str).unwrap_or("<end>");
            if expected != found {
                return Err(Error::SchemaMismatch {
                    position: i,
                    expected: expected.to_string(),
                    found: found.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Prediction on raw (unstandardized) values in schema order.
    pub fn predict_values(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.schema.len() {
            return Err(Error::LengthMismatch(values.len(), self.schema.len()));
        }
        let out = match &self.standardizer {
            Some(s) => self.parameters.predict_row(&s.apply(values)),
            None => self.parameters.predict_row(values),
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonFinite("prediction"))
        }
    }

    pub fn predict(&self, v: &FeatureVector) -> Result<f64> {
        self.check_schema(&v.schema)?;
        self.predict_values(&v.values)
    }
}

/// Feature vectors and targets for the records of one dataset.
pub fn design_matrix(
    dataset: &Dataset,
    catalog: &Catalog,
    feature_set: FeatureSet,
    encoding: HardwareEncoding,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut x = Vec::with_capacity(dataset.len());
    let mut y = Vec::with_capacity(dataset.len());
    for r in &dataset.records {
        x.push(assemble(r, catalog, feature_set, encoding)?.values);
        y.push(r.measured_ms);
    }
    Ok((x, y))
}

/// Everything needed to fit one family's predictor.
#[derive(Debug, Clone)]
pub struct TrainRequest<'a> {
    pub kind: LearnerKind,
    pub family: LayerFamily,
    pub feature_set: FeatureSet,
    pub encoding: HardwareEncoding,
    pub catalog: &'a Catalog,
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

/// Splits the family's records 80/10/10 under `seed`, fits on train and
/// reports train/val RMSE. Returns the predictor and the split it used.
pub fn train(dataset: &Dataset, req: &TrainRequest<'_>) -> Result<(TrainedPredictor, Split)> {
    let subset = dataset.family_subset(req.family).combine_passes();
    if subset.len() < 3 {
        return Err(Error::TooSmall(subset.len(), 3));
    }
    let split = split_80_10_10(&subset, req.seed)?;
    let (x, y) = design_matrix(&subset, req.catalog, req.feature_set, req.encoding)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            idx.iter().map(|&i| x[i].clone()).collect(),
            idx.iter().map(|&i| y[i]).collect(),
        )
    };
    let (x_train, y_train) = pick(&split.train);
    let names = schema(req.family, req.feature_set, req.encoding, req.catalog);
    let standardizer = match req.kind {
        LearnerKind::Mlp => Some(Standardizer::fit(&x_train, &names)?),
        _ => None,
    };
    let fit_rows: Vec<Vec<f64>> = match &standardizer {
        Some(s) => x_train.iter().map(|r| s.apply(r)).collect(),
        None => x_train.clone(),
    };
    let parameters = fit_raw(req.kind, &fit_rows, &y_train, &req.hyperparams, req.seed)?;
    let mut model = TrainedPredictor {
        kind: req.kind,
        family: req.family,
        feature_set: req.feature_set,
        encoding: req.encoding,
        schema: names,
        catalog: req.catalog.clone(),
        standardizer,
        parameters,
        train_seed: req.seed,
        metrics: Metrics {
            train_rmse: 0.0,
            val_rmse: None,
        },
    };
    let score = |xs: &[Vec<f64>], ys: &[f64]| -> Result<f64> {
        let p = xs
            .iter()
            .map(|r| model.predict_values(r))
            .collect::<Result<Vec<_>>>()?;
        rmse(&p, ys)
    };
    let train_rmse = score(&x_train, &y_train)?;
    let (x_val, y_val) = pick(&split.val);
    let val_rmse = if y_val.is_empty() {
        None
    } else {
        Some(score(&x_val, &y_val)?)
    };
    model.metrics = Metrics {
        train_rmse,
        val_rmse,
    };
    Ok((model, split))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_test: usize,
    pub test_rmse: f64,
    pub val_rmse: Option<f64>,
}

/// Rebuilds the model's split of `dataset` from its training seed and scores
/// the held-out parts.
pub fn evaluate(
    model: &TrainedPredictor,
    dataset: &Dataset,
    catalog: &Catalog,
) -> Result<Evaluation> {
    let subset = dataset.family_subset(model.family).combine_passes();
    let split = split_80_10_10(&subset, model.train_seed)?;
    let (x, y) = design_matrix(&subset, catalog, model.feature_set, model.encoding)?;
    let score = |idx: &[usize]| -> Result<Option<f64>> {
        if idx.is_empty() {
            return Ok(None);
        }
        let p = idx
            .iter()
            .map(|&i| model.predict_values(&x[i]))
            .collect::<Result<Vec<_>>>()?;
        let t: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        rmse(&p, &t).map(Some)
    };
    let names = schema(model.family, model.feature_set, model.encoding, catalog);
    model.check_schema(&names)?;
    Ok(Evaluation {
        n_test: split.test.len(),
        test_rmse: score(&split.test)?.unwrap_or(0.0),
        val_rmse: score(&split.val)?,
    })
}

pub const MODEL_MAGIC: &str = "LAYERTIME-MODEL";
pub const MODEL_VERSION: u32 = 1;

/// Serialized bytes: a magic/version line followed by the JSON body.
pub fn to_bytes(model: &TrainedPredictor) -> Result<Vec<u8>> {
    let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION}\n").into_bytes();
    serde_json::to_writer(&mut out, model)?;
    out.push(b'\n');
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedPredictor> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::ModelFormat("truncated file: no header".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::ModelFormat("bad magic".into()))?;
    let mut parts = header.split(' ');
    if parts.next() != Some(MODEL_MAGIC) {
        return Err(Error::ModelFormat("bad magic: not a model file".into()));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::ModelFormat("missing version".into()))?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "version mismatch: file has {version}, expected {MODEL_VERSION}"
        )));
    }
    serde_json::from_slice(&bytes[newline + 1..])
        .map_err(|e| Error::ModelFormat(format!("truncated or corrupt body: {e}")))
}

pub fn save_model(model: &TrainedPredictor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(model)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedPredictor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
