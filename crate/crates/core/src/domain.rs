//! Value types shared by every other module.
//!
//! Nothing here computes features or timings; the only logic is invariant
//! checking ([`validate`]) and catalog loading.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerFamily {
    Dense,
    Conv2d,
    Rnn,
    Lstm,
    Gru,
    Attention,
    Embedding,
    LayerNorm,
}

impl LayerFamily {
    pub const ALL: [LayerFamily; 8] = [
        LayerFamily::Dense,
        LayerFamily::Conv2d,
        LayerFamily::Rnn,
        LayerFamily::Lstm,
        LayerFamily::Gru,
        LayerFamily::Attention,
        LayerFamily::Embedding,
        LayerFamily::LayerNorm,
    ];

    /// The six benchmarked layer kinds, with LSTM standing in for the
    /// recurrent group.
    pub const DEFAULT_SIX: [LayerFamily; 6] = [
        LayerFamily::Dense,
        LayerFamily::Conv2d,
        LayerFamily::Lstm,
        LayerFamily::Attention,
        LayerFamily::Embedding,
        LayerFamily::LayerNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerFamily::Dense => "dense",
            LayerFamily::Conv2d => "conv2d",
            LayerFamily::Rnn => "rnn",
            LayerFamily::Lstm => "lstm",
            LayerFamily::Gru => "gru",
            LayerFamily::Attention => "attention",
            LayerFamily::Embedding => "embedding",
            LayerFamily::LayerNorm => "layernorm",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(
            self,
            LayerFamily::Rnn | LayerFamily::Lstm | LayerFamily::Gru
        )
    }

    /// Whether the training config's dropout rate is meaningful for this family.
    pub fn uses_dropout(self) -> bool {
        self.is_recurrent() || self == LayerFamily::Attention
    }
}

impl fmt::Display for LayerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        LayerFamily::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| {
                let names: Vec<_> = LayerFamily::ALL.iter().map(|f| f.name()).collect();
                format!(
                    "unknown layer family `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
    AdamW,
    RmsProp,
}

impl Optimizer {
    pub const ALL: [Optimizer; 4] = [
        Optimizer::Sgd,
        Optimizer::Adam,
        Optimizer::AdamW,
        Optimizer::RmsProp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
            Optimizer::AdamW => "adamw",
            Optimizer::RmsProp => "rmsprop",
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Optimizer::ALL
            .into_iter()
            .find(|o| o.name() == lower)
            .ok_or_else(|| {
                format!("unknown optimizer `{s}` (expected sgd, adam, adamw or rmsprop)")
            })
    }
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn default_optimizer() -> Optimizer {
    Optimizer::Adam
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub dropout_rate: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dropout_rate: 0.0,
            learning_rate: default_learning_rate(),
            optimizer: default_optimizer(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecurrentParams {
    pub seq_len: u64,
    pub hidden: u64,
    pub input_dim: u64,
    pub bidirectional: bool,
}

/// Family-specific shape parameters. The variant determines the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerParams {
    Dense {
        d_in: u64,
        d_out: u64,
    },
    Conv2d {
        height: u64,
        width: u64,
        c_in: u64,
        c_out: u64,
        kernel: u64,
        stride: u64,
        padding: u64,
    },
    Rnn(RecurrentParams),
    Lstm(RecurrentParams),
    Gru(RecurrentParams),
    Attention {
        seq_len: u64,
        embed_dim: u64,
        heads: u64,
    },
    Embedding {
        vocab_size: u64,
        embed_dim: u64,
        seq_len: u64,
    },
    LayerNorm {
        d_in: u64,
    },
}

impl LayerParams {
    pub fn family(&self) -> LayerFamily {
        match self {
            LayerParams::Dense { .. } => LayerFamily::Dense,
            LayerParams::Conv2d { .. } => LayerFamily::Conv2d,
            LayerParams::Rnn(_) => LayerFamily::Rnn,
            LayerParams::Lstm(_) => LayerFamily::Lstm,
            LayerParams::Gru(_) => LayerFamily::Gru,
            LayerParams::Attention { .. } => LayerFamily::Attention,
            LayerParams::Embedding { .. } => LayerFamily::Embedding,
            LayerParams::LayerNorm { .. } => LayerFamily::LayerNorm,
        }
    }

    pub fn recurrent(&self) -> Option<&RecurrentParams> {
        match self {
            LayerParams::Rnn(r) | LayerParams::Lstm(r) | LayerParams::Gru(r) => Some(r),
            _ => None,
        }
    }

    pub fn recurrent_of(family: LayerFamily, r: RecurrentParams) -> Option<LayerParams> {
        match family {
            LayerFamily::Rnn => Some(LayerParams::Rnn(r)),
            LayerFamily::Lstm => Some(LayerParams::Lstm(r)),
            LayerFamily::Gru => Some(LayerParams::Gru(r)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub batch_size: u64,
    #[serde(flatten)]
    pub params: LayerParams,
    #[serde(flatten)]
    pub train: TrainConfig,
}

impl LayerConfig {
    pub fn new(batch_size: u64, params: LayerParams) -> Self {
        LayerConfig {
            batch_size,
            params,
            train: TrainConfig::default(),
        }
    }

    pub fn with_train(mut self, train: TrainConfig) -> Self {
        self.train = train;
        self
    }

    pub fn family(&self) -> LayerFamily {
        self.params.family()
    }
}

/// Returns every violated invariant; an empty list means the config is valid.
pub fn validate(config: &LayerConfig) -> Vec<String> {
    let mut out = Vec::new();
    let mut positive = |name: &str, v: u64| {
        if v < 1 {
            out.push(format!("{name} must be >= 1"));
        }
    };
    positive("batch_size", config.batch_size);
    match config.params {
        LayerParams::Dense { d_in, d_out } => {
            positive("d_in", d_in);
            positive("d_out", d_out);
        }
        LayerParams::Conv2d {
            height,
            width,
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        } => {
            positive("height", height);
            positive("width", width);
            positive("c_in", c_in);
            positive("c_out", c_out);
            positive("kernel", kernel);
            if !(1..=2).contains(&stride) {
                out.push(format!("stride must be 1 or 2, got {stride}"));
            }
            if padding > 1 {
                out.push(format!("padding must be 0 or 1, got {padding}"));
            }
            if height + 2 * padding < kernel || width + 2 * padding < kernel {
                out.push(format!(
                    "output dim < 1: input {height}x{width} with padding {padding} is smaller than kernel {kernel}"
                ));
            }
        }
        LayerParams::Rnn(r) | LayerParams::Lstm(r) | LayerParams::Gru(r) => {
            positive("seq_len", r.seq_len);
            positive("hidden", r.hidden);
            positive("input_dim", r.input_dim);
        }
        LayerParams::Attention {
            seq_len,
            embed_dim,
            heads,
        } => {
            positive("seq_len", seq_len);
            positive("embed_dim", embed_dim);
            positive("heads", heads);
        }
        LayerParams::Embedding {
            vocab_size,
            embed_dim,
            seq_len,
        } => {
            positive("vocab_size", vocab_size);
            positive("embed_dim", embed_dim);
            positive("seq_len", seq_len);
        }
        LayerParams::LayerNorm { d_in } => positive("d_in", d_in),
    }
    let t = &config.train;
    if !(0.0..1.0).contains(&t.dropout_rate) {
        out.push(format!(
            "dropout_rate must be in [0, 1), got {}",
            t.dropout_rate
        ));
    }
    if !(t.learning_rate.is_finite() && t.learning_rate > 0.0) {
        out.push(format!(
            "learning_rate must be positive, got {}",
            t.learning_rate
        ));
    }
    out
}

/// [`validate`] as a `Result`.
pub fn check(config: &LayerConfig) -> Result<()> {
    let v = validate(config);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub id: String,
    pub boost_clock_mhz: f64,
    pub memory_gb: f64,
    pub memory_bandwidth_gbps: f64,
    pub cuda_cores: u64,
    /// Peak single-precision throughput.
    pub gflops: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_per_hour: Option<f64>,
}

impl HardwareProfile {
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut pos = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{}: {name} must be positive, got {v}", self.id));
            }
        };
        pos("gflops", self.gflops);
        pos("boost_clock_mhz", self.boost_clock_mhz);
        pos("memory_gb", self.memory_gb);
        pos("memory_bandwidth_gbps", self.memory_bandwidth_gbps);
        if self.cuda_cores == 0 {
            out.push(format!("{}: cuda_cores must be positive", self.id));
        }
        if let Some(p) = self.price_per_hour {
            if !(p.is_finite() && p >= 0.0) {
                out.push(format!(
                    "{}: price_per_hour must be non-negative, got {p}",
                    self.id
                ));
            }
        }
        out
    }
}

/// Ordered GPU list. Order defines one-hot positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HardwareProfile>", into = "Vec<HardwareProfile>")]
pub struct Catalog {
    profiles: Vec<HardwareProfile>,
}

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.json");

impl Catalog {
    pub fn new(profiles: Vec<HardwareProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Catalog("no profiles".into()));
        }
        let mut seen = HashSet::new();
        for p in &profiles {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::Catalog(format!("duplicate id `{}`", p.id)));
            }
            if p.gflops.is_nan() || p.gflops <= 0.0 {
                return Err(Error::NonPositiveGflops(p.gflops));
            }
            if let Some(problem) = p.problems().into_iter().next() {
                return Err(Error::Catalog(problem));
            }
        }
        Ok(Catalog { profiles })
    }

    /// The seven-GPU catalog shipped with the crate.
    pub fn default_catalog() -> Self {
        Self::parse(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Catalog("no profiles".into()));
        }
        let profiles: Vec<HardwareProfile> = serde_json::from_str(text)
            .map_err(|e| Error::Catalog(format!("malformed file: {e}")))?;
        Self::new(profiles)
    }

    pub fn profiles(&self) -> &[HardwareProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&HardwareProfile> {
        self.profiles.iter().find(|p| p.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.profiles.iter().map(|p| p.id.as_str())
    }

    /// Keeps only the listed ids, in the order given.
    pub fn subset(&self, ids: &[&str]) -> Result<Catalog> {
        let profiles = ids
            .iter()
            .map(|id| {
                self.get(id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownGpu(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Catalog::new(profiles)
    }
}

impl TryFrom<Vec<HardwareProfile>> for Catalog {
    type Error = Error;

    fn try_from(v: Vec<HardwareProfile>) -> Result<Self> {
        Catalog::new(v)
    }
}

impl From<Catalog> for Vec<HardwareProfile> {
    fn from(c: Catalog) -> Self {
        c.profiles
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Catalog::parse(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassKind {
    Forward,
    Backward,
    Step,
}

impl PassKind {
    pub fn name(self) -> &'static str {
        match self {
            PassKind::Forward => "forward",
            PassKind::Backward => "backward",
            PassKind::Step => "step",
        }
    }
}

impl FromStr for PassKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "forward" => Ok(PassKind::Forward),
            "backward" => Ok(PassKind::Backward),
            "step" => Ok(PassKind::Step),
            _ => Err(format!("unknown pass kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Median,
    Mean,
}

impl Aggregation {
    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Median => "median",
            Aggregation::Mean => "mean",
        }
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "median" => Ok(Aggregation::Median),
            "mean" => Ok(Aggregation::Mean),
            _ => Err(format!("unknown aggregation `{s}`")),
        }
    }
}

/// One timed layer configuration on one GPU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub layer: LayerConfig,
    pub gpu_id: String,
    pub pass_kind: PassKind,
    pub measured_ms: f64,
    pub repetitions: u32,
    pub aggregation: Aggregation,
}

/// Nested feature groups; later variants strictly contain earlier ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    Baseline,
    #[serde(rename = "CO")]
    Co,
    #[serde(rename = "COCM")]
    CoCm,
    #[serde(rename = "COCMCT")]
    CoCmCt,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 4] = [
        FeatureSet::Baseline,
        FeatureSet::Co,
        FeatureSet::CoCm,
        FeatureSet::CoCmCt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Baseline => "Baseline",
            FeatureSet::Co => "CO",
            FeatureSet::CoCm => "COCM",
            FeatureSet::CoCmCt => "COCMCT",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!("unknown feature set `{s}` (expected Baseline, CO, COCM or COCMCT)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HardwareEncoding {
    /// GPU identity one-hot over the catalog plus numeric specs.
    Known,
    /// Numeric specs only; works for GPUs outside the training catalog.
    Transfer,
}

impl HardwareEncoding {
    pub fn name(self) -> &'static str {
        match self {
            HardwareEncoding::Known => "known",
            HardwareEncoding::Transfer => "transfer",
        }
    }
}

impl fmt::Display for HardwareEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HardwareEncoding {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "known" | "knownhardware" | "known-hardware" => Ok(HardwareEncoding::Known),
            "transfer" => Ok(HardwareEncoding::Transfer),
            _ => Err(format!(
                "unknown encoding `{s}` (expected known or transfer)"
            )),
        }
    }
}
