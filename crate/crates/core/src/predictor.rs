//! Whole-model timing: per-layer predictions from a registry of per-family
//! models, summed over layers and batches, and GPU ranking on top of that.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    check, FeatureSet, HardwareEncoding, HardwareProfile, LayerConfig, LayerFamily, LayerParams,
    TrainConfig,
};
use crate::error::{Error, Result};
use crate::featurize::assemble_layer;
use crate::learners::{load_model, save_model, TrainedPredictor};

/// Default number of samples per epoch for the builders.
pub const DEFAULT_DATASET_SIZE: u64 = 1024;
pub const DEFAULT_EPOCHS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawArchitecture")]
pub struct Architecture {
    pub name: String,
    pub batch_size: u64,
    pub dataset_size: u64,
    pub epochs: u64,
    pub layers: Vec<LayerConfig>,
}

/// On-disk form: layers may omit `batch_size`; the architecture's value wins
/// either way.
#[derive(Deserialize)]
struct RawArchitecture {
    name: String,
    batch_size: u64,
    dataset_size: u64,
    #[serde(default = "one")]
    epochs: u64,
    layers: Vec<RawLayer>,
}

fn one() -> u64 {
    1
}

#[derive(Deserialize)]
struct RawLayer {
    #[serde(flatten)]
    params: LayerParams,
    #[serde(flatten)]
    train: TrainConfig,
}

impl TryFrom<RawArchitecture> for Architecture {
    type Error = Error;

    fn try_from(raw: RawArchitecture) -> Result<Self> {
        let layers = raw
            .layers
            .into_iter()
            .map(|l| LayerConfig {
                batch_size: raw.batch_size,
                params: l.params,
                train: l.train,
            })
            .collect();
        Architecture::new(
            raw.name,
            raw.batch_size,
            raw.dataset_size,
            raw.epochs,
            layers,
        )
    }
}

impl Architecture {
    pub fn new(
        name: impl Into<String>,
        batch_size: u64,
        dataset_size: u64,
        epochs: u64,
        mut layers: Vec<LayerConfig>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Architecture("needs at least one layer".into()));
        }
        if batch_size < 1 || dataset_size < batch_size {
            return Err(Error::Architecture(format!(
                "need dataset_size >= batch_size >= 1, got {dataset_size} and {batch_size}"
            )));
        }
        if epochs < 1 {
            return Err(Error::Architecture("epochs must be >= 1".into()));
        }
        for (i, l) in layers.iter_mut().enumerate() {
            l.batch_size = batch_size;
            check(l).map_err(|e| Error::Architecture(format!("layer {i}: {e}")))?;
        }
        Ok(Architecture {
            name: name.into(),
            batch_size,
            dataset_size,
            epochs,
            layers,
        })
    }

    pub fn batches_per_epoch(&self) -> u64 {
        self.dataset_size.div_ceil(self.batch_size)
    }

    pub fn family_histogram(&self) -> BTreeMap<LayerFamily, usize> {
        let mut h = BTreeMap::new();
        for l in &self.layers {
            *h.entry(l.family()).or_insert(0) += 1;
        }
        h
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// VGG-16: thirteen 3x3 convolutions in five blocks, then three dense layers.
/// Pooling is not timed; it only halves the spatial size between blocks.
pub fn build_vgg16(batch_size: u64, image_size: u64, classes: u64) -> Result<Architecture> {
    if image_size < 32 {
        return Err(Error::Architecture(format!(
            "image_size must be >= 32, got {image_size}"
        )));
    }
    let blocks: [&[u64]; 5] = [
        &[64, 64],
        &[128, 128],
        &[256, 256, 256],
        &[512, 512, 512],
        &[512, 512, 512],
    ];
    let mut layers = Vec::new();
    let mut side = image_size;
    let mut c_in = 3;
    for block in blocks {
        for &c_out in block {
            layers.push(LayerConfig::new(
                batch_size,
                LayerParams::Conv2d {
                    height: side,
                    width: side,
                    c_in,
                    c_out,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                },
            ));
            c_in = c_out;
        }
        side /= 2;
    }
    let flat = c_in * side * side;
    for (d_in, d_out) in [(flat, 4096), (4096, 4096), (4096, classes)] {
        layers.push(LayerConfig::new(
            batch_size,
            LayerParams::Dense { d_in, d_out },
        ));
    }
    Architecture::new(
        "vgg16",
        batch_size,
        DEFAULT_DATASET_SIZE.max(batch_size),
        DEFAULT_EPOCHS,
        layers,
    )
}

/// Embedding followed by `n_blocks` encoder blocks of
/// attention, norm, two feed-forward dense layers, norm.
pub fn build_transformer_block(
    batch_size: u64,
    seq_len: u64,
    embed_dim: u64,
    heads: u64,
    vocab_size: u64,
    n_blocks: usize,
) -> Result<Architecture> {
    if n_blocks < 1 {
        return Err(Error::Architecture("n_blocks must be >= 1".into()));
    }
    let mut layers = vec![LayerConfig::new(
        batch_size,
        LayerParams::Embedding {
            vocab_size,
            embed_dim,
            seq_len,
        },
    )];
    for _ in 0..n_blocks {
        layers.push(LayerConfig::new(
            batch_size,
            LayerParams::Attention {
                seq_len,
                embed_dim,
                heads,
            },
        ));
        layers.push(LayerConfig::new(
            batch_size,
            LayerParams::LayerNorm { d_in: embed_dim },
        ));
        layers.push(LayerConfig::new(
            batch_size,
            LayerParams::Dense {
                d_in: embed_dim,
                d_out: 4 * embed_dim,
            },
        ));
        layers.push(LayerConfig::new(
            batch_size,
            LayerParams::Dense {
                d_in: 4 * embed_dim,
                d_out: embed_dim,
            },
        ));
        layers.push(LayerConfig::new(
            batch_size,
            LayerParams::LayerNorm { d_in: embed_dim },
        ));
    }
    Architecture::new(
        "transformer",
        batch_size,
        DEFAULT_DATASET_SIZE.max(batch_size),
        DEFAULT_EPOCHS,
        layers,
    )
}

/// Per-family predictors sharing one feature set and encoding.
#[derive(Debug, Clone)]
pub struct PredictorRegistry {
    models: BTreeMap<LayerFamily, TrainedPredictor>,
    feature_set: FeatureSet,
    encoding: HardwareEncoding,
}

pub const MODEL_EXTENSION: &str = "model";

impl PredictorRegistry {
    pub fn new(models: impl IntoIterator<Item = TrainedPredictor>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut tags = None;
        for m in models {
            let t = (m.feature_set, m.encoding);
            match tags {
                None => tags = Some(t),
                Some(prev) if prev != t => {
                    return Err(Error::Registry(format!(
                        "{} model uses {}/{}, others use {}/{}",
                        m.family, t.0, t.1, prev.0, prev.1
                    )))
                }
                _ => {}
            }
            if map.contains_key(&m.family) {
                return Err(Error::Registry(format!(
                    "two models for family {}",
                    m.family
                )));
            }
            map.insert(m.family, m);
        }
        let (feature_set, encoding) = tags.ok_or_else(|| Error::Registry("no models".into()))?;
        Ok(PredictorRegistry {
            models: map,
            feature_set,
            encoding,
        })
    }

    /// Loads every `*.model` file in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == MODEL_EXTENSION))
            .collect();
        paths.sort();
        let models = paths.iter().map(load_model).collect::<Result<Vec<_>>>()?;
        Self::new(models)
    }

    /// Writes one `<family>.model` per entry.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (family, m) in &self.models {
            save_model(m, dir.join(format!("{family}.{MODEL_EXTENSION}")))?;
        }
        Ok(())
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.feature_set
    }

    pub fn encoding(&self) -> HardwareEncoding {
        self.encoding
    }

    pub fn families(&self) -> impl Iterator<Item = LayerFamily> + '_ {
        self.models.keys().copied()
    }

    pub fn get(&self, family: LayerFamily) -> Result<&TrainedPredictor> {
        self.models.get(&family).ok_or(Error::MissingFamily(family))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerPrediction {
    pub ms: f64,
    /// Raw model output was negative and has been clamped to 0.
    pub clamped: bool,
}

/// Predicted time of one training step of `layer` on `hw`.
pub fn predict_layer(
    registry: &PredictorRegistry,
    layer: &LayerConfig,
    hw: &HardwareProfile,
) -> Result<LayerPrediction> {
    let model = registry.get(layer.family())?;
    let v = assemble_layer(
        layer,
        hw,
        &model.catalog,
        registry.feature_set,
        registry.encoding,
    )?;
    let raw = model.predict(&v)?;
    Ok(LayerPrediction {
        ms: raw.max(0.0),
        clamped: raw < 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyBreakdown {
    pub layers: usize,
    pub per_batch_ms: f64,
    pub epoch_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochEstimate {
    pub gpu_id: String,
    pub per_layer_ms: Vec<f64>,
    pub batches_per_epoch: u64,
    pub epoch_ms: f64,
    pub epochs: u64,
    pub total_ms: f64,
    pub breakdown_by_family: BTreeMap<LayerFamily, FamilyBreakdown>,
    pub clamped_layers: usize,
}

/// Every batch has the same configuration, so the sum over batches and
/// layers is `batches · Σ layer`. A final partial batch counts as full.
pub fn predict_epoch(
    registry: &PredictorRegistry,
    arch: &Architecture,
    hw: &HardwareProfile,
) -> Result<EpochEstimate> {
    let preds = arch
        .layers
        .iter()
        .map(|l| predict_layer(registry, l, hw))
        .collect::<Result<Vec<_>>>()?;
    let batches = arch.batches_per_epoch();
    let per_layer_ms: Vec<f64> = preds.iter().map(|p| p.ms).collect();
    let per_batch: f64 = per_layer_ms.iter().sum();
    let epoch_ms = batches as f64 * per_batch;
    let mut breakdown: BTreeMap<LayerFamily, FamilyBreakdown> = BTreeMap::new();
    for (l, &ms) in arch.layers.iter().zip(&per_layer_ms) {
        let e = breakdown.entry(l.family()).or_insert(FamilyBreakdown {
            layers: 0,
            per_batch_ms: 0.0,
            epoch_ms: 0.0,
        });
        e.layers += 1;
        e.per_batch_ms += ms;
    }
    for e in breakdown.values_mut() {
        e.epoch_ms = batches as f64 * e.per_batch_ms;
    }
    Ok(EpochEstimate {
        gpu_id: hw.id.clone(),
        per_layer_ms,
        batches_per_epoch: batches,
        epoch_ms,
        epochs: arch.epochs,
        total_ms: arch.epochs as f64 * epoch_ms,
        breakdown_by_family: breakdown,
        clamped_layers: preds.iter().filter(|p| p.clamped).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingRow {
    pub gpu_id: String,
    pub epoch_ms: f64,
    pub total_ms: f64,
    pub price_per_hour: Option<f64>,
    /// Total training cost; absent when the GPU has no price.
    pub cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    /// Ascending total time, ties by id.
    pub by_time: Vec<RankingRow>,
    /// Priced GPUs by ascending cost (ties by id), then unpriced ones by id.
    pub by_cost: Vec<RankingRow>,
}

const MS_PER_HOUR: f64 = 3_600_000.0;

pub fn compare_gpus(
    registry: &PredictorRegistry,
    arch: &Architecture,
    gpus: &[HardwareProfile],
) -> Result<Ranking> {
    let rows = gpus
        .par_iter()
        .map(|hw| {
            let est = predict_epoch(registry, arch, hw)?;
            Ok(RankingRow {
                gpu_id: hw.id.clone(),
                epoch_ms: est.epoch_ms,
                total_ms: est.total_ms,
                price_per_hour: hw.price_per_hour,
                cost: hw.price_per_hour.map(|p| est.total_ms / MS_PER_HOUR * p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_time = rows.clone();
    by_time.sort_by(|a, b| {
        a.total_ms
            .total_cmp(&b.total_ms)
            .then_with(|| a.gpu_id.cmp(&b.gpu_id))
    });
    let mut by_cost = rows;
    by_cost.sort_by(|a, b| match (a.cost, b.cost) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.gpu_id.cmp(&b.gpu_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.gpu_id.cmp(&b.gpu_id),
    });
    Ok(Ranking { by_time, by_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Catalog;
    use crate::featurize::schema;
    use crate::learners::{fit_random_forest, ForestParams, LearnerKind, Metrics, ModelParams};

    /// A forest fitted to one sample: predicts `ms` for everything.
    fn constant_model(
        family: LayerFamily,
        ms: f64,
        encoding: HardwareEncoding,
        catalog: &Catalog,
    ) -> TrainedPredictor {
        let names = schema(family, FeatureSet::CoCmCt, encoding, catalog);
        let x = vec![vec![0.0; names.len()]];
        let rf = fit_random_forest(&x, &[ms], ForestParams::default(), 0).unwrap();
        TrainedPredictor {
            kind: LearnerKind::RandomForest,
            family,
            feature_set: FeatureSet::CoCmCt,
            encoding,
            schema: names,
            catalog: catalog.clone(),
            standardizer: None,
            parameters: ModelParams::RandomForest(rf),
            train_seed: 0,
            metrics: Metrics {
                train_rmse: 0.0,
                val_rmse: None,
            },
        }
    }

    fn dense(d_in: u64, d_out: u64) -> LayerConfig {
        LayerConfig::new(1, LayerParams::Dense { d_in, d_out })
    }

    #[test]
    fn constant_dense_model() {
        let cat = Catalog::default_catalog();
        let reg = PredictorRegistry::new([constant_model(
            LayerFamily::Dense,
            0.5,
            HardwareEncoding::Known,
            &cat,
        )])
        .unwrap();
        let hw = cat.get("T4").unwrap();
        for (i, o) in [(1, 1), (4096, 3), (17, 900)] {
            assert_eq!(predict_layer(&reg, &dense(i, o), hw).unwrap().ms, 0.5);
        }
    }

    #[test]
    fn transfer_accepts_unseen_gpu_known_rejects() {
        let cat = Catalog::default_catalog();
        let mut unseen = cat.get("L4").unwrap().clone();
        unseen.id = "H100".into();
        let transfer = PredictorRegistry::new([constant_model(
            LayerFamily::Dense,
            1.0,
            HardwareEncoding::Transfer,
            &cat,
        )])
        .unwrap();
        assert!(predict_layer(&transfer, &dense(2, 2), &unseen).is_ok());
        let known = PredictorRegistry::new([constant_model(
            LayerFamily::Dense,
            1.0,
            HardwareEncoding::Known,
            &cat,
        )])
        .unwrap();
        assert!(matches!(
            predict_layer(&known, &dense(2, 2), &unseen),
            Err(Error::UnknownGpu(_))
        ));
    }

    #[test]
    fn missing_family() {
        let cat = Catalog::default_catalog();
        let reg = PredictorRegistry::new([constant_model(
            LayerFamily::Dense,
            1.0,
            HardwareEncoding::Known,
            &cat,
        )])
        .unwrap();
        let ln = LayerConfig::new(1, LayerParams::LayerNorm { d_in: 3 });
        assert!(matches!(
            predict_layer(&reg, &ln, cat.get("P4").unwrap()),
            Err(Error::MissingFamily(LayerFamily::LayerNorm))
        ));
    }

    #[test]
    fn mixed_registry_rejected() {
        let cat = Catalog::default_catalog();
        let r = PredictorRegistry::new([
            constant_model(LayerFamily::Dense, 1.0, HardwareEncoding::Known, &cat),
            constant_model(LayerFamily::Conv2d, 1.0, HardwareEncoding::Transfer, &cat),
        ]);
        assert!(matches!(r, Err(Error::Registry(_))));
    }

    #[test]
    fn epoch_examples() {
        let cat = Catalog::default_catalog();
        let reg = PredictorRegistry::new([constant_model(
            LayerFamily::Dense,
            1.0,
            HardwareEncoding::Known,
            &cat,
        )])
        .unwrap();
        let hw = cat.get("V100").unwrap();
        let arch = Architecture::new("two", 256, 1024, 1, vec![dense(8, 8), dense(8, 4)]).unwrap();
        let e = predict_epoch(&reg, &arch, hw).unwrap();
        assert_eq!(e.batches_per_epoch, 4);
        assert_eq!(e.epoch_ms, 8.0);

        let arch = Architecture::new("one", 64, 64, 1, vec![dense(8, 8)]).unwrap();
        let e = predict_epoch(&reg, &arch, hw).unwrap();
        assert_eq!((e.batches_per_epoch, e.epoch_ms), (1, 1.0));

        let arch = Architecture::new("ceil", 100, 1024, 3, vec![dense(8, 8)]).unwrap();
        let e = predict_epoch(&reg, &arch, hw).unwrap();
        assert_eq!(e.batches_per_epoch, 11);
        assert_eq!(e.total_ms, 3.0 * e.epoch_ms);
    }

    #[test]
    fn architecture_validation() {
        assert!(Architecture::new("e", 1, 1, 1, vec![]).is_err());
        assert!(Architecture::new("n", 8, 4, 1, vec![dense(1, 1)]).is_err());
        assert!(Architecture::new("z", 0, 4, 1, vec![dense(1, 1)]).is_err());
    }

    #[test]
    fn architecture_file_batch_override() {
        let text = r#"{"name":"m","batch_size":16,"dataset_size":64,"epochs":2,
            "layers":[{"type":"dense","d_in":4,"d_out":2,"batch_size":3},
                      {"type":"layernorm","d_in":2}]}"#;
        let a = Architecture::from_json(text).unwrap();
        assert!(a.layers.iter().all(|l| l.batch_size == 16));
        let back = Architecture::from_json(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn vgg16_shape() {
        let a = build_vgg16(32, 224, 1000).unwrap();
        let h = a.family_histogram();
        assert_eq!(h[&LayerFamily::Conv2d], 13);
        assert_eq!(h[&LayerFamily::Dense], 3);
        assert_eq!(a.dataset_size, 1024);
        match a.layers[0].params {
            LayerParams::Conv2d {
                c_in,
                c_out,
                height,
                width,
                ..
            } => {
                assert_eq!((c_in, c_out, height, width), (3, 64, 224, 224));
            }
            _ => panic!(),
        }
        assert_eq!(
            a.layers[13].params,
            LayerParams::Dense {
                d_in: 25088,
                d_out: 4096
            }
        );
        assert_eq!(
            a.layers[15].params,
            LayerParams::Dense {
                d_in: 4096,
                d_out: 1000
            }
        );
        assert!(build_vgg16(1, 31, 10).is_err());
        assert_eq!(
            build_vgg16(1, 32, 10).unwrap().layers[13].params,
            LayerParams::Dense {
                d_in: 512,
                d_out: 4096
            }
        );
    }

    #[test]
    fn transformer_shape() {
        let a = build_transformer_block(8, 512, 768, 12, 30522, 12).unwrap();
        assert_eq!(a.family_histogram()[&LayerFamily::Attention], 12);
        assert_eq!(a.layers.len(), 1 + 12 * 5);
        let a = build_transformer_block(1, 1, 1, 1, 1, 1).unwrap();
        assert_eq!(a.layers.len(), 6);
        assert_eq!(a.layers[0].family(), LayerFamily::Embedding);
        assert!(build_transformer_block(1, 1, 1, 1, 1, 0).is_err());
    }

    #[test]
    fn ranking_rules() {
        let mut cat = Catalog::default_catalog()
            .subset(&["P4", "T4", "V100"])
            .unwrap();
        let reg = PredictorRegistry::new([constant_model(
            LayerFamily::Dense,
            2.0,
            HardwareEncoding::Known,
            &cat,
        )])
        .unwrap();
        let arch = Architecture::new("a", 8, 64, 2, vec![dense(4, 4)]).unwrap();
        let mut gpus = cat.profiles().to_vec();
        gpus[0].price_per_hour = Some(3.0);
        gpus[2].price_per_hour = Some(1.0);
        let r = compare_gpus(&reg, &arch, &gpus).unwrap();
        // equal times: id order
        let ids: Vec<_> = r.by_time.iter().map(|x| x.gpu_id.as_str()).collect();
        assert_eq!(ids, ["P4", "T4", "V100"]);
        let ids: Vec<_> = r.by_cost.iter().map(|x| x.gpu_id.as_str()).collect();
        assert_eq!(ids, ["V100", "P4", "T4"]);
        assert!(r.by_cost[2].cost.is_none());
        // 8 batches * 2 ms * 2 epochs = 32 ms
        assert_eq!(r.by_time[0].total_ms, 32.0);
        assert!((r.by_cost[0].cost.unwrap() - 32.0 / 3.6e6).abs() < 1e-18);
        cat = Catalog::new(gpus.clone()).unwrap();
        assert_eq!(cat.len(), 3);
    }
}
