//! Random layer sampling over the benchmark parameter ranges and a
//! roofline-style synthetic timing oracle.
//!
//! All randomness comes from ChaCha streams derived from one seed: config
//! draws use a per-family stream and timing noise a per-(family, gpu)
//! stream, so generation order does not affect the output.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Provenance};
use crate::domain::{
    validate, Aggregation, BenchmarkRecord, Catalog, HardwareProfile, LayerConfig, LayerFamily,
    LayerParams, Optimizer, PassKind, RecurrentParams, TrainConfig,
};
use crate::error::{Error, Result};
use crate::featurize::{co, ct_ms, memory_features};

pub const BATCH_RANGE: (u64, u64) = (1, 64);
pub const DENSE_DIM_RANGE: (u64, u64) = (1, 4096);
pub const CONV_MATRIX_RANGE: (u64, u64) = (1, 512);
pub const CONV_CHANNEL_RANGE: (u64, u64) = (1, 512);
pub const CONV_KERNELS: [u64; 4] = [1, 3, 5, 7];
pub const ATTN_SEQ_RANGE: (u64, u64) = (64, 512);
pub const ATTN_EMBED_RANGE: (u64, u64) = (128, 1024);
pub const ATTN_HEADS_RANGE: (u64, u64) = (1, 16);
pub const EMB_VOCAB_RANGE: (u64, u64) = (10_000, 500_000);
pub const EMB_DIM_RANGE: (u64, u64) = (64, 1024);
pub const EMB_SEQ_RANGE: (u64, u64) = (64, 512);
pub const RNN_SEQ_RANGE: (u64, u64) = (1, 512);
pub const RNN_HIDDEN_RANGE: (u64, u64) = (128, 1024);
pub const RNN_INPUT_RANGE: (u64, u64) = (1, 1024);
pub const LAYERNORM_DIM_RANGE: (u64, u64) = (64, 1024);
pub const DROPOUT_RANGE: (f64, f64) = (0.0, 0.5);
pub const LEARNING_RATE_RANGE: (f64, f64) = (1e-4, 1e-2);

/// Rows per family in the desk-scale preset.
pub const DESK_SCALE_PER_FAMILY: usize = 2000;

fn uniform(rng: &mut impl Rng, (lo, hi): (u64, u64)) -> u64 {
    rng.random_range(lo..=hi)
}

fn sample_train(family: LayerFamily, rng: &mut impl Rng) -> TrainConfig {
    // Always draw dropout so every family consumes the same number of values.
    let dropout = rng.random_range(DROPOUT_RANGE.0..DROPOUT_RANGE.1);
    let (lo, hi) = (LEARNING_RATE_RANGE.0.ln(), LEARNING_RATE_RANGE.1.ln());
    let learning_rate = rng.random_range(lo..=hi).exp();
    let optimizer = Optimizer::ALL[rng.random_range(0..Optimizer::ALL.len())];
    TrainConfig {
        dropout_rate: if family.uses_dropout() { dropout } else { 0.0 },
        learning_rate,
        optimizer,
    }
}

/// Draws one valid config; each parameter is independent and uniform over its
/// range, with rejection for conv geometry that yields an empty output.
pub fn sample_config(family: LayerFamily, rng: &mut impl Rng) -> LayerConfig {
    loop {
        let batch = uniform(rng, BATCH_RANGE);
        let params = match family {
            LayerFamily::Dense => LayerParams::Dense {
                d_in: uniform(rng, DENSE_DIM_RANGE),
                d_out: uniform(rng, DENSE_DIM_RANGE),
            },
            LayerFamily::Conv2d => {
                let side = uniform(rng, CONV_MATRIX_RANGE);
                LayerParams::Conv2d {
                    height: side,
                    width: side,
                    c_in: uniform(rng, CONV_CHANNEL_RANGE),
                    c_out: uniform(rng, CONV_CHANNEL_RANGE),
                    kernel: CONV_KERNELS[rng.random_range(0..CONV_KERNELS.len())],
                    stride: rng.random_range(1..=2),
                    padding: rng.random_range(0..=1),
                }
            }
            LayerFamily::Rnn | LayerFamily::Lstm | LayerFamily::Gru => {
                let r = RecurrentParams {
                    seq_len: uniform(rng, RNN_SEQ_RANGE),
                    hidden: uniform(rng, RNN_HIDDEN_RANGE),
                    input_dim: uniform(rng, RNN_INPUT_RANGE),
                    bidirectional: rng.random_bool(0.5),
                };
                LayerParams::recurrent_of(family, r).expect("recurrent family")
            }
            LayerFamily::Attention => LayerParams::Attention {
                seq_len: uniform(rng, ATTN_SEQ_RANGE),
                embed_dim: uniform(rng, ATTN_EMBED_RANGE),
                heads: uniform(rng, ATTN_HEADS_RANGE),
            },
            LayerFamily::Embedding => LayerParams::Embedding {
                vocab_size: uniform(rng, EMB_VOCAB_RANGE),
                embed_dim: uniform(rng, EMB_DIM_RANGE),
                seq_len: uniform(rng, EMB_SEQ_RANGE),
            },
            LayerFamily::LayerNorm => LayerParams::LayerNorm {
                d_in: uniform(rng, LAYERNORM_DIM_RANGE),
            },
        };
        let config = LayerConfig {
            batch_size: batch,
            params,
            train: sample_train(family, rng),
        };
        if validate(&config).is_empty() {
            return config;
        }
    }
}

/// Deterministic sampler: `seed` and `family` fix the whole sequence.
pub fn config_stream(family: LayerFamily, seed: u64) -> impl Iterator<Item = LayerConfig> {
    let mut rng = derived_rng(seed, &[b"config", family.name().as_bytes()]);
    std::iter::repeat_with(move || sample_config(family, &mut rng))
}

/// FNV-1a over the labels; used to pick a ChaCha stream per label tuple.
fn stream_id(labels: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for label in labels {
        for &b in label.iter().chain(std::iter::once(&0xffu8)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub(crate) fn derived_rng(seed: u64, labels: &[&[u8]]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(labels));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpuOracle {
    /// Fraction of peak throughput achieved, in (0, 1].
    pub efficiency: f64,
    pub launch_overhead_ms: f64,
}

impl Default for GpuOracle {
    fn default() -> Self {
        GpuOracle {
            efficiency: 0.5,
            launch_overhead_ms: 0.02,
        }
    }
}

fn default_bytes_per_element() -> u64 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    #[serde(default)]
    pub default: GpuOracle,
    /// Overrides keyed by gpu id.
    #[serde(default)]
    pub gpus: BTreeMap<String, GpuOracle>,
    #[serde(default = "default_bytes_per_element")]
    pub bytes_per_element: u64,
    /// Relative standard deviation of the multiplicative noise.
    #[serde(default)]
    pub noise_sigma: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            default: GpuOracle::default(),
            gpus: BTreeMap::new(),
            bytes_per_element: default_bytes_per_element(),
            noise_sigma: 0.0,
        }
    }
}

impl OracleParams {
    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn for_gpu(&self, id: &str) -> GpuOracle {
        self.gpus.get(id).copied().unwrap_or(self.default)
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (id, g) in std::iter::once(("default", &self.default))
            .chain(self.gpus.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if !(g.efficiency > 0.0 && g.efficiency <= 1.0) {
                problems.push(format!(
                    "{id}: efficiency must be in (0, 1], got {}",
                    g.efficiency
                ));
            }
            if !(g.launch_overhead_ms >= 0.0 && g.launch_overhead_ms.is_finite()) {
                problems.push(format!("{id}: launch_overhead_ms must be >= 0"));
            }
        }
        if !(0.0..=0.5).contains(&self.noise_sigma) {
            problems.push(format!(
                "noise_sigma must be in [0, 0.5], got {}",
                self.noise_sigma
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Noise-free oracle time: the slower of the compute and memory-transfer
/// bounds, plus launch overhead.
pub fn roofline_ms(
    config: &LayerConfig,
    hw: &HardwareProfile,
    oracle: &OracleParams,
) -> Result<f64> {
    let gpu = oracle.for_gpu(&hw.id);
    let compute = ct_ms(co(config)?, hw.gflops)? / gpu.efficiency;
    let bytes = memory_features(config)?.total() as f64 * oracle.bytes_per_element as f64;
    let transfer = bytes / (hw.memory_bandwidth_gbps * 1e6);
    Ok(compute.max(transfer) + gpu.launch_overhead_ms)
}

/// Oracle time with multiplicative Gaussian noise drawn from `rng`.
pub fn synth_time_with(
    config: &LayerConfig,
    hw: &HardwareProfile,
    oracle: &OracleParams,
    rng: &mut impl Rng,
) -> Result<f64> {
    let t = roofline_ms(config, hw, oracle)?;
    if oracle.noise_sigma == 0.0 {
        return Ok(t);
    }
    let eps = Normal::new(0.0, oracle.noise_sigma)
        .map_err(|e| Error::InvalidConfig(vec![e.to_string()]))?
        .sample(rng);
    Ok((t * (1.0 + eps)).max(0.0))
}

pub fn synth_time_ms(
    config: &LayerConfig,
    hw: &HardwareProfile,
    oracle: &OracleParams,
    seed: u64,
) -> Result<f64> {
    let mut rng = derived_rng(seed, &[b"noise", hw.id.as_bytes()]);
    synth_time_with(config, hw, oracle, &mut rng)
}

/// Rounds to the 6 fractional digits the CSV format carries.
fn round_ms(ms: f64) -> f64 {
    (ms * 1e6).round() / 1e6
}

/// Samples `n_per_family` configs per family and times each on every GPU.
/// Output order is (family, gpu, draw index).
pub fn generate_dataset(
    families: &[LayerFamily],
    catalog: &Catalog,
    n_per_family: usize,
    oracle: &OracleParams,
    seed: u64,
) -> Result<Dataset> {
    if n_per_family == 0 {
        return Err(Error::TooSmall(0, 1));
    }
    oracle.check()?;
    let configs: Vec<Vec<LayerConfig>> = families
        .par_iter()
        .map(|&f| config_stream(f, seed).take(n_per_family).collect())
        .collect();
    let pairs: Vec<(usize, &HardwareProfile)> = (0..families.len())
        .flat_map(|fi| catalog.profiles().iter().map(move |hw| (fi, hw)))
        .collect();
    let blocks: Vec<Vec<BenchmarkRecord>> = pairs
        .par_iter()
        .map(|&(fi, hw)| {
            let family = families[fi];
            let mut rng = derived_rng(
                seed,
                &[b"noise", family.name().as_bytes(), hw.id.as_bytes()],
            );
            configs[fi]
                .iter()
                .map(|layer| {
                    let ms = synth_time_with(layer, hw, oracle, &mut rng)?;
                    Ok(BenchmarkRecord {
                        layer: *layer,
                        gpu_id: hw.id.clone(),
                        pass_kind: PassKind::Step,
                        measured_ms: round_ms(ms),
                        repetitions: 1,
                        aggregation: Aggregation::Median,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Dataset::new(
        blocks.into_iter().flatten().collect(),
        Provenance::Synthetic,
    ))
}

/// Seven parameterized GPUs spanning roughly a 5x throughput range. The specs
/// are internally consistent (peak = 2 FLOPs per core per cycle) so numeric
/// hardware features carry real signal.
pub fn synthetic_catalog() -> Catalog {
    let rows: [(&str, f64, u64, f64, f64); 7] = [
        // id, clock MHz, cores, bandwidth GB/s, memory GB
        ("SYN-A", 1200.0, 2560, 240.0, 8.0),
        ("SYN-B", 1400.0, 3072, 320.0, 12.0),
        ("SYN-C", 1500.0, 4096, 400.0, 16.0),
        ("SYN-D", 1600.0, 4608, 480.0, 16.0),
        ("SYN-E", 1700.0, 5632, 600.0, 20.0),
        ("SYN-F", 1800.0, 6144, 720.0, 24.0),
        ("SYN-G", 1900.0, 7168, 860.0, 24.0),
    ];
    let profiles = rows
        .iter()
        .map(|&(id, clock, cores, bw, mem)| HardwareProfile {
            id: id.to_string(),
            boost_clock_mhz: clock,
            memory_gb: mem,
            memory_bandwidth_gbps: bw,
            cuda_cores: cores,
            gflops: 2.0 * cores as f64 * clock / 1000.0,
            price_per_hour: None,
        })
        .collect();
    Catalog::new(profiles).expect("synthetic catalog is valid")
}
