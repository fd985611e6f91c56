//! Arithmetic, memory and compute-time features, and assembly of the
//! per-record feature vector.
//!
//! Operation counts are exact `u64` arithmetic; they become `f64` only when
//! a vector is assembled.

use serde::{Deserialize, Serialize};

use crate::domain::{
    check, BenchmarkRecord, Catalog, FeatureSet, HardwareEncoding, HardwareProfile, LayerConfig,
    LayerFamily, LayerParams, Optimizer,
};
use crate::error::{Error, Result};

/// Passes over the activations for layer norm: mean, variance, normalize,
/// scale, shift.
pub const LAYERNORM_OPS_PER_ELEMENT: u64 = 5;

fn mul(what: &'static str, factors: &[u64]) -> Result<u64> {
    factors
        .iter()
        .try_fold(1u64, |acc, &f| acc.checked_mul(f))
        .ok_or(Error::Overflow(what))
}

pub fn co_dense(b: u64, d_in: u64, d_out: u64) -> Result<u64> {
    mul("dense ops", &[b, d_in, d_out])
}

/// Output spatial dims under floor convolution arithmetic.
pub fn conv_out_dims(h: u64, w: u64, k: u64, stride: u64, pad: u64) -> Result<(u64, u64)> {
    if stride == 0 {
        return Err(Error::InvalidConfig(vec!["stride must be >= 1".into()]));
    }
    if h + 2 * pad < k || w + 2 * pad < k {
        return Err(Error::InvalidConfig(vec![format!(
            "output dim < 1: {h}x{w} padded by {pad} is smaller than kernel {k}"
        )]));
    }
    Ok((
        (h + 2 * pad - k) / stride + 1,
        (w + 2 * pad - k) / stride + 1,
    ))
}

#[allow(clippy::too_many_arguments)]
pub fn co_conv(
    b: u64,
    h: u64,
    w: u64,
    c_in: u64,
    c_out: u64,
    k: u64,
    stride: u64,
    pad: u64,
) -> Result<u64> {
    let (h_out, w_out) = conv_out_dims(h, w, k, stride, pad)?;
    mul("conv ops", &[b, h_out, w_out, k, k, c_in, c_out])
}

/// Gate multiplier: 2 for a plain RNN cell, 4 for LSTM, 3 for GRU.
pub fn gate_multiplier(family: LayerFamily) -> Option<u64> {
    match family {
        LayerFamily::Rnn => Some(2),
        LayerFamily::Lstm => Some(4),
        LayerFamily::Gru => Some(3),
        _ => None,
    }
}

pub fn co_recurrent(
    kind: LayerFamily,
    b: u64,
    s: u64,
    h: u64,
    d: u64,
    bidirectional: bool,
) -> Result<u64> {
    let g = gate_multiplier(kind)
        .ok_or_else(|| Error::InvalidConfig(vec![format!("{kind} is not a recurrent family")]))?;
    let hd = h.checked_add(d).ok_or(Error::Overflow("recurrent ops"))?;
    let dirs = if bidirectional { 2 } else { 1 };
    mul("recurrent ops", &[g, b, s, h, hd, dirs])
}

/// `heads · seq_len² · embed_dim`, using the full embedding dimension.
pub fn co_attention(heads: u64, seq_len: u64, embed_dim: u64) -> Result<u64> {
    mul("attention ops", &[heads, seq_len, seq_len, embed_dim])
}

pub fn co_embedding(b: u64, seq_len: u64, embed_dim: u64) -> Result<u64> {
    mul("embedding ops", &[b, seq_len, embed_dim])
}

pub fn co_layernorm(b: u64, d_in: u64) -> Result<u64> {
    mul("layernorm ops", &[LAYERNORM_OPS_PER_ELEMENT, b, d_in])
}

/// Operation count for any layer config.
pub fn co(config: &LayerConfig) -> Result<u64> {
    let b = config.batch_size;
    match config.params {
        LayerParams::Dense { d_in, d_out } => co_dense(b, d_in, d_out),
        LayerParams::Conv2d {
            height,
            width,
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        } => co_conv(b, height, width, c_in, c_out, kernel, stride, padding),
        LayerParams::Rnn(r) | LayerParams::Lstm(r) | LayerParams::Gru(r) => co_recurrent(
            config.family(),
            b,
            r.seq_len,
            r.hidden,
            r.input_dim,
            r.bidirectional,
        ),
        LayerParams::Attention {
            seq_len,
            embed_dim,
            heads,
        } => co_attention(heads, seq_len, embed_dim),
        LayerParams::Embedding {
            embed_dim, seq_len, ..
        } => co_embedding(b, seq_len, embed_dim),
        LayerParams::LayerNorm { d_in } => co_layernorm(b, d_in),
    }
}

/// Ideal compute-bound time: operations over peak operations per millisecond.
pub fn ct_ms(co: u64, gflops: f64) -> Result<f64> {
    if gflops.is_nan() || gflops <= 0.0 {
        return Err(Error::NonPositiveGflops(gflops));
    }
    Ok(co as f64 / (gflops * 1e6))
}

/// Element counts (not bytes) of the weight, input and output tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryFootprint {
    pub weights: u64,
    pub input: u64,
    pub output: u64,
}

impl MemoryFootprint {
    pub fn total(&self) -> u64 {
        self.weights
            .saturating_add(self.input)
            .saturating_add(self.output)
    }
}

/// Features a family does not carry are reported as 0.
pub fn memory_features(config: &LayerConfig) -> Result<MemoryFootprint> {
    check(config)?;
    let b = config.batch_size;
    let fp = match config.params {
        LayerParams::Dense { d_in, d_out } => MemoryFootprint {
            weights: mul("dense weights", &[d_in, d_out])?,
            input: mul("dense input", &[b, d_in])?,
            output: mul("dense output", &[b, d_out])?,
        },
        LayerParams::Conv2d {
            height,
            width,
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        } => {
            let (h_out, w_out) = conv_out_dims(height, width, kernel, stride, padding)?;
            MemoryFootprint {
                weights: mul("conv weights", &[kernel, kernel, c_in, c_out])?,
                input: mul("conv input", &[b, height, width, c_in])?,
                output: mul("conv output", &[b, h_out, w_out, c_out])?,
            }
        }
        LayerParams::Rnn(r) | LayerParams::Lstm(r) | LayerParams::Gru(r) => {
            let g = gate_multiplier(config.family()).expect("recurrent family");
            let dirs = if r.bidirectional { 2 } else { 1 };
            MemoryFootprint {
                weights: mul(
                    "recurrent weights",
                    &[g, r.hidden, r.hidden + r.input_dim, dirs],
                )?,
                input: mul("recurrent input", &[b, r.seq_len, r.input_dim])?,
                output: 0,
            }
        }
        LayerParams::Attention {
            seq_len, embed_dim, ..
        } => {
            let act = mul("attention activations", &[b, seq_len, embed_dim])?;
            MemoryFootprint {
                weights: 0,
                input: act,
                output: act,
            }
        }
        LayerParams::Embedding {
            embed_dim, seq_len, ..
        } => MemoryFootprint {
            weights: 0,
            input: mul("embedding input", &[b, seq_len])?,
            output: mul("embedding output", &[b, seq_len, embed_dim])?,
        },
        LayerParams::LayerNorm { d_in } => {
            let act = mul("layernorm activations", &[b, d_in])?;
            MemoryFootprint {
                weights: 0,
                input: act,
                output: act,
            }
        }
    };
    Ok(fp)
}

/// Numeric features for one record under a fixed schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: Vec<String>,
    pub layer_family: LayerFamily,
    pub feature_set: FeatureSet,
    pub encoding: HardwareEncoding,
}

pub const GPU_ONE_HOT_PREFIX: &str = "gpu=";
pub const OPTIMIZER_ONE_HOT_PREFIX: &str = "optimizer=";

/// Whether a schema column is a 0/1 indicator.
pub fn is_one_hot(name: &str) -> bool {
    name.starts_with(GPU_ONE_HOT_PREFIX) || name.starts_with(OPTIMIZER_ONE_HOT_PREFIX)
}

const HARDWARE_NUMERIC: [&str; 4] = [
    "memory_bandwidth_gbps",
    "boost_clock_mhz",
    "cuda_cores",
    "memory_gb",
];

pub const COMPUTED_FEATURES: [&str; 5] = ["co", "mem_weights", "mem_input", "mem_output", "ct_ms"];

fn layer_param_names(family: LayerFamily) -> &'static [&'static str] {
    match family {
        LayerFamily::Dense => &["batch_size", "d_in", "d_out"],
        LayerFamily::Conv2d => &[
            "batch_size",
            "height",
            "width",
            "c_in",
            "c_out",
            "kernel",
            "stride",
            "padding",
        ],
        LayerFamily::Rnn | LayerFamily::Lstm | LayerFamily::Gru => &[
            "batch_size",
            "seq_len",
            "hidden",
            "input_dim",
            "bidirectional",
        ],
        LayerFamily::Attention => &["batch_size", "seq_len", "embed_dim", "heads"],
        LayerFamily::Embedding => &["batch_size", "vocab_size", "embed_dim", "seq_len"],
        LayerFamily::LayerNorm => &["batch_size", "d_in"],
    }
}

fn layer_param_values(config: &LayerConfig) -> Vec<f64> {
    let b = config.batch_size as f64;
    match config.params {
        LayerParams::Dense { d_in, d_out } => vec![b, d_in as f64, d_out as f64],
        LayerParams::Conv2d {
            height,
            width,
            c_in,
            c_out,
            kernel,
            stride,
            padding,
        } => vec![
            b,
            height as f64,
            width as f64,
            c_in as f64,
            c_out as f64,
            kernel as f64,
            stride as f64,
            padding as f64,
        ],
        LayerParams::Rnn(r) | LayerParams::Lstm(r) | LayerParams::Gru(r) => vec![
            b,
            r.seq_len as f64,
            r.hidden as f64,
            r.input_dim as f64,
            if r.bidirectional { 1.0 } else { 0.0 },
        ],
        LayerParams::Attention {
            seq_len,
            embed_dim,
            heads,
        } => vec![b, seq_len as f64, embed_dim as f64, heads as f64],
        LayerParams::Embedding {
            vocab_size,
            embed_dim,
            seq_len,
        } => vec![b, vocab_size as f64, embed_dim as f64, seq_len as f64],
        LayerParams::LayerNorm { d_in } => vec![b, d_in as f64],
    }
}

/// Ordered feature names for a (family, feature set, encoding, catalog) tuple.
pub fn schema(
    family: LayerFamily,
    feature_set: FeatureSet,
    encoding: HardwareEncoding,
    catalog: &Catalog,
) -> Vec<String> {
    let mut names = Vec::new();
    if encoding == HardwareEncoding::Known {
        names.extend(catalog.ids().map(|id| format!("{GPU_ONE_HOT_PREFIX}{id}")));
    }
    names.extend(HARDWARE_NUMERIC.iter().map(|s| s.to_string()));
    names.extend(layer_param_names(family).iter().map(|s| s.to_string()));
    names.push("dropout_rate".into());
    names.push("learning_rate".into());
    names.extend(
        Optimizer::ALL
            .iter()
            .map(|o| format!("{OPTIMIZER_ONE_HOT_PREFIX}{}", o.name())),
    );
    let computed = match feature_set {
        FeatureSet::Baseline => 0,
        FeatureSet::Co => 1,
        FeatureSet::CoCm => 4,
        FeatureSet::CoCmCt => 5,
    };
    names.extend(COMPUTED_FEATURES[..computed].iter().map(|s| s.to_string()));
    names
}

/// Builds the vector for a layer on a concrete GPU. In `Known` mode the GPU
/// must be in `catalog`; in `Transfer` mode the catalog is not consulted.
pub fn assemble_layer(
    layer: &LayerConfig,
    hw: &HardwareProfile,
    catalog: &Catalog,
    feature_set: FeatureSet,
    encoding: HardwareEncoding,
) -> Result<FeatureVector> {
    check(layer)?;
    let family = layer.family();
    let mut values = Vec::new();
    if encoding == HardwareEncoding::Known {
        let pos = catalog
            .position(&hw.id)
            .ok_or_else(|| Error::UnknownGpu(hw.id.clone()))?;
        values.extend((0..catalog.len()).map(|i| if i == pos { 1.0 } else { 0.0 }));
    }
    values.extend([
        hw.memory_bandwidth_gbps,
        hw.boost_clock_mhz,
        hw.cuda_cores as f64,
        hw.memory_gb,
    ]);
    values.extend(layer_param_values(layer));
    let dropout = if family.uses_dropout() {
        layer.train.dropout_rate
    } else {
        0.0
    };
    values.push(dropout);
    values.push(layer.train.learning_rate);
    values.extend(
        Optimizer::ALL
            .iter()
            .map(|&o| if o == layer.train.optimizer { 1.0 } else { 0.0 }),
    );
    if feature_set >= FeatureSet::Co {
        let ops = co(layer)?;
        values.push(ops as f64);
        if feature_set >= FeatureSet::CoCm {
            let mem = memory_features(layer)?;
            values.extend([mem.weights as f64, mem.input as f64, mem.output as f64]);
        }
        if feature_set >= FeatureSet::CoCmCt {
            values.push(ct_ms(ops, hw.gflops)?);
        }
    }
    let schema = schema(family, feature_set, encoding, catalog);
    debug_assert_eq!(schema.len(), values.len());
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature vector"));
    }
    Ok(FeatureVector {
        values,
        schema,
        layer_family: family,
        feature_set,
        encoding,
    })
}

/// Builds the vector for a benchmark record. The record's GPU is looked up in
/// `catalog` in both modes, since its numeric specs are needed either way.
pub fn assemble(
    record: &BenchmarkRecord,
    catalog: &Catalog,
    feature_set: FeatureSet,
    encoding: HardwareEncoding,
) -> Result<FeatureVector> {
    let hw = catalog
        .get(&record.gpu_id)
        .ok_or_else(|| Error::UnknownGpu(record.gpu_id.clone()))?;
    assemble_layer(&record.layer, hw, catalog, feature_set, encoding)
}
