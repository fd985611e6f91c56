//! Benchmark CSV I/O, deterministic 80/10/10 splits, z-score
//! standardization and RMSE.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::derived_rng;
use crate::domain::{
    check, Aggregation, BenchmarkRecord, LayerConfig, LayerFamily, LayerParams, PassKind,
    RecurrentParams, TrainConfig,
};
use crate::error::{Error, Result};
use crate::featurize::is_one_hot;

pub const SCHEMA_VERSION: u32 = 1;

/// CSV header, in write order.
pub const COLUMNS: [&str; 27] = [
    "schema_version",
    "family",
    "gpu_id",
    "pass_kind",
    "batch_size",
    "d_in",
    "d_out",
    "height",
    "width",
    "c_in",
    "c_out",
    "kernel",
    "stride",
    "padding",
    "seq_len",
    "hidden",
    "input_dim",
    "bidirectional",
    "embed_dim",
    "heads",
    "vocab_size",
    "dropout_rate",
    "learning_rate",
    "optimizer",
    "repetitions",
    "aggregation",
    "measured_ms",
];

const PARAM_COLUMNS: std::ops::Range<usize> = 5..21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<BenchmarkRecord>,
    pub provenance: Provenance,
    pub schema_version: u32,
}

impl Dataset {
    pub fn new(records: Vec<BenchmarkRecord>, provenance: Provenance) -> Self {
        Dataset {
            records,
            provenance,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records of one family, in file order.
    pub fn family_subset(&self, family: LayerFamily) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .filter(|r| r.layer.family() == family)
                .cloned()
                .collect(),
            provenance: self.provenance,
            schema_version: self.schema_version,
        }
    }

    pub fn families(&self) -> Vec<LayerFamily> {
        let mut fams: Vec<_> = self.records.iter().map(|r| r.layer.family()).collect();
        fams.sort();
        fams.dedup();
        fams
    }

    pub fn select(&self, indices: &[usize]) -> Vec<&BenchmarkRecord> {
        indices.iter().map(|&i| &self.records[i]).collect()
    }

    /// Merges forward/backward rows of the same layer on the same GPU into a
    /// single step row whose time is their sum. Step rows pass through.
    pub fn combine_passes(&self) -> Dataset {
        let mut out: Vec<BenchmarkRecord> = Vec::new();
        let mut pending: Vec<BenchmarkRecord> = Vec::new();
        for r in &self.records {
            if r.pass_kind == PassKind::Step {
                out.push(r.clone());
                continue;
            }
            if let Some(p) = pending
                .iter_mut()
                .find(|p| p.layer == r.layer && p.gpu_id == r.gpu_id && p.pass_kind != r.pass_kind)
            {
                p.measured_ms += r.measured_ms;
                p.pass_kind = PassKind::Step;
            } else {
                pending.push(r.clone());
            }
            if let Some(i) = pending.iter().position(|p| p.pass_kind == PassKind::Step) {
                out.push(pending.swap_remove(i));
            }
        }
        Dataset {
            records: out,
            provenance: self.provenance,
            schema_version: self.schema_version,
        }
    }
}

/// Path of the oracle-parameter sidecar written next to a synthetic CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("oracle.json")
}

fn param_cells(layer: &LayerConfig) -> [String; 16] {
    let mut cells: [String; 16] = Default::default();
    let mut set = |col: &str, v: String| {
        let i = COLUMNS
            .iter()
            .position(|c| *c == col)
            .expect("known column")
            - PARAM_COLUMNS.start;
        cells[i] = v;
    };
    match layer.params {
        LayerParams::Dense { d_in, d_out } => {
            set("d_in", d_in.to_string());
            set("d_out", d_out.to_string());
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
            set("height", height.to_string());
            set("width", width.to_string());
            set("c_in", c_in.to_string());
            set("c_out", c_out.to_string());
            set("kernel", kernel.to_string());
            set("stride", stride.to_string());
            set("padding", padding.to_string());
        }
        LayerParams::Rnn(r) | LayerParams::Lstm(r) | LayerParams::Gru(r) => {
            set("seq_len", r.seq_len.to_string());
            set("hidden", r.hidden.to_string());
            set("input_dim", r.input_dim.to_string());
            set("bidirectional", r.bidirectional.to_string());
        }
        LayerParams::Attention {
            seq_len,
            embed_dim,
            heads,
        } => {
            set("seq_len", seq_len.to_string());
            set("embed_dim", embed_dim.to_string());
            set("heads", heads.to_string());
        }
        LayerParams::Embedding {
            vocab_size,
            embed_dim,
            seq_len,
        } => {
            set("vocab_size", vocab_size.to_string());
            set("embed_dim", embed_dim.to_string());
            set("seq_len", seq_len.to_string());
        }
        LayerParams::LayerNorm { d_in } => set("d_in", d_in.to_string()),
    }
    cells
}

pub fn write_csv_to<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in &dataset.records {
        let mut row: Vec<String> = vec![
            dataset.schema_version.to_string(),
            r.layer.family().name().to_string(),
            r.gpu_id.clone(),
            r.pass_kind.name().to_string(),
            r.layer.batch_size.to_string(),
        ];
        row.extend(param_cells(&r.layer));
        row.push(r.layer.train.dropout_rate.to_string());
        row.push(r.layer.train.learning_rate.to_string());
        row.push(r.layer.train.optimizer.name().to_string());
        row.push(r.repetitions.to_string());
        row.push(r.aggregation.name().to_string());
        row.push(format!("{:.6}", r.measured_ms));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(dataset, std::io::BufWriter::new(file))
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    index: &'a [usize; 27],
    line: usize,
}

impl Row<'_> {
    fn raw(&self, col: &str) -> &str {
        let i = COLUMNS
            .iter()
            .position(|c| *c == col)
            .expect("known column");
        self.record.get(self.index[i]).unwrap_or("").trim()
    }

    fn cell_err(&self, col: &str, message: impl Into<String>) -> Error {
        Error::Cell {
            row: self.line,
            column: col.to_string(),
            message: message.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, col: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(col);
        if s.is_empty() {
            return Err(self.cell_err(col, "empty cell"));
        }
        s.parse::<T>()
            .map_err(|e| self.cell_err(col, format!("cannot parse `{s}`: {e}")))
    }
}

fn parse_row(row: &Row<'_>) -> Result<(u32, BenchmarkRecord)> {
    let version: u32 = row.parse("schema_version")?;
    let family: LayerFamily = row.parse("family")?;
    let u = |c: &str| row.parse::<u64>(c);
    let recurrent = || -> Result<RecurrentParams> {
        Ok(RecurrentParams {
            seq_len: u("seq_len")?,
            hidden: u("hidden")?,
            input_dim: u("input_dim")?,
            bidirectional: row.parse("bidirectional")?,
        })
    };
    let (params, used): (LayerParams, &[&str]) = match family {
        LayerFamily::Dense => (
            LayerParams::Dense {
                d_in: u("d_in")?,
                d_out: u("d_out")?,
            },
            &["d_in", "d_out"],
        ),
        LayerFamily::Conv2d => (
            LayerParams::Conv2d {
                height: u("height")?,
                width: u("width")?,
                c_in: u("c_in")?,
                c_out: u("c_out")?,
                kernel: u("kernel")?,
                stride: u("stride")?,
                padding: u("padding")?,
            },
            &[
                "height", "width", "c_in", "c_out", "kernel", "stride", "padding",
            ],
        ),
        LayerFamily::Rnn | LayerFamily::Lstm | LayerFamily::Gru => (
            LayerParams::recurrent_of(family, recurrent()?).expect("recurrent"),
            &["seq_len", "hidden", "input_dim", "bidirectional"],
        ),
        LayerFamily::Attention => (
            LayerParams::Attention {
                seq_len: u("seq_len")?,
                embed_dim: u("embed_dim")?,
                heads: u("heads")?,
            },
            &["seq_len", "embed_dim", "heads"],
        ),
        LayerFamily::Embedding => (
            LayerParams::Embedding {
                vocab_size: u("vocab_size")?,
                embed_dim: u("embed_dim")?,
                seq_len: u("seq_len")?,
            },
            &["vocab_size", "embed_dim", "seq_len"],
        ),
        LayerFamily::LayerNorm => (LayerParams::LayerNorm { d_in: u("d_in")? }, &["d_in"]),
    };
    for col in &COLUMNS[PARAM_COLUMNS] {
        if !used.contains(col) && !row.raw(col).is_empty() {
            return Err(row.cell_err(col, format!("not applicable to family {family}")));
        }
    }
    let layer = LayerConfig {
        batch_size: u("batch_size")?,
        params,
        train: TrainConfig {
            dropout_rate: row.parse("dropout_rate")?,
            learning_rate: row.parse("learning_rate")?,
            optimizer: row.parse("optimizer")?,
        },
    };
    check(&layer).map_err(|e| row.cell_err("family", e.to_string()))?;
    let measured_ms: f64 = row.parse("measured_ms")?;
    if !(measured_ms.is_finite() && measured_ms >= 0.0) {
        return Err(row.cell_err("measured_ms", "must be a non-negative number"));
    }
    let gpu_id = row.raw("gpu_id");
    if gpu_id.is_empty() {
        return Err(row.cell_err("gpu_id", "empty cell"));
    }
    Ok((
        version,
        BenchmarkRecord {
            layer,
            gpu_id: gpu_id.to_string(),
            pass_kind: row.parse("pass_kind")?,
            measured_ms,
            repetitions: row.parse("repetitions")?,
            aggregation: row.parse::<Aggregation>("aggregation")?,
        },
    ))
}

pub fn read_csv_from<R: Read>(reader: R, provenance: Provenance) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    for h in headers.iter() {
        if !COLUMNS.contains(&h.trim()) {
            return Err(Error::UnknownColumn(h.to_string()));
        }
    }
    let mut index = [0usize; 27];
    for (i, col) in COLUMNS.iter().enumerate() {
        index[i] = headers
            .iter()
            .position(|h| h.trim() == *col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))?;
    }
    let mut records = Vec::new();
    let mut version = None;
    for (n, result) in rdr.records().enumerate() {
        let line = n + 2;
        let rec = result.map_err(|e| Error::Csv(format!("line {line}: {e}")))?;
        let (v, record) = parse_row(&Row {
            record: &rec,
            index: &index,
            line,
        })?;
        match version {
            None => version = Some(v),
            Some(prev) if prev != v => {
                return Err(Error::Cell {
                    row: line,
                    column: "schema_version".into(),
                    message: format!("{v} differs from earlier rows ({prev})"),
                })
            }
            _ => {}
        }
        records.push(record);
    }
    Ok(Dataset {
        records,
        provenance,
        schema_version: version.unwrap_or(SCHEMA_VERSION),
    })
}

/// Reads a benchmark CSV. A file with an oracle sidecar next to it is
/// marked synthetic, anything else measured.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let provenance = if sidecar_path(path).exists() {
        Provenance::Synthetic
    } else {
        Provenance::Measured
    };
    read_csv_from(std::io::BufReader::new(file), provenance)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Sizes for an `n`-record split: floor(0.8n), floor(0.1n), remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let val = n / 10;
    (train, val, n - train - val)
}

/// Seeded shuffle of `0..n`, cut 80/10/10 with the remainder in test.
pub fn split_indices(n: usize, seed: u64) -> Result<Split> {
    if n < 3 {
        return Err(Error::TooSmall(n, 3));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut derived_rng(seed, &[b"split"]));
    let (n_train, n_val, _) = split_sizes(n);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    Ok(Split {
        train: idx,
        val,
        test,
    })
}

pub fn split_80_10_10(dataset: &Dataset, seed: u64) -> Result<Split> {
    split_indices(dataset.len(), seed)
}

/// Per-column z-scoring fitted on training vectors. Indicator columns and
/// columns with (near) zero spread are handled specially in [`apply`].
///
/// [`apply`]: Standardizer::apply
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub exempt: Vec<bool>,
}

pub const MIN_STD: f64 = 1e-12;

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], schema: &[String]) -> Result<Standardizer> {
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        if rows.len() < 2 {
            return Err(Error::TooSmall(rows.len(), 2));
        }
        let d = schema.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                let dx = r[j] - mean[j];
                var[j] += dx * dx;
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        Ok(Standardizer {
            mean,
            std,
            exempt: schema.iter().map(|s| is_one_hot(s)).collect(),
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.exempt[j] {
                    v
                } else if self.std[j] < MIN_STD {
                    0.0
                } else {
                    (v - self.mean[j]) / self.std[j]
                }
            })
            .collect()
    }
}

/// Root mean square error.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch(predictions.len(), targets.len()));
    }
    if predictions.is_empty() {
        return Err(Error::Empty);
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}
