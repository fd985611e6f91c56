//! Command-line front end. `run` parses arguments, dispatches, prints, and
//! returns the process exit code.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::datagen::{
    generate_dataset, sample_config, synthetic_catalog, OracleParams, DESK_SCALE_PER_FAMILY,
};
use crate::dataset::{read_csv, sidecar_path, write_csv};
use crate::domain::{
    load_catalog, Catalog, FeatureSet, HardwareEncoding, LayerConfig, LayerFamily,
};
use crate::error::Error;
use crate::featurize::assemble_layer;
use crate::learners::{
    evaluate, load_model, save_model, train, Hyperparams, LearnerKind, TrainRequest,
};
use crate::predictor::{
    build_transformer_block, build_vgg16, compare_gpus, predict_epoch, predict_layer, Architecture,
    PredictorRegistry,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCOMPATIBLE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "layertime",
    version,
    about = "Per-layer training-time prediction for neural networks"
)]
pub struct Cli {
    /// Hardware catalog: a JSON file, or `table2` (built-in) or `synthetic`
    #[arg(long, global = true)]
    pub catalog: Option<String>,

    /// Seed for every random choice (sampling, noise, splits, model fits)
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    /// Suppress progress messages on stderr
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the feature schema and values for one layer on one GPU
    Features {
        /// Layer family: dense, conv2d, rnn, lstm, gru, attention, embedding, layernorm
        #[arg(long)]
        family: LayerFamily,
        /// Layer hyperparameters as key=value (batch_size=64 d_in=4096 ...)
        #[arg(long, num_args = 1.., required = true)]
        params: Vec<String>,
        /// GPU id from the catalog
        #[arg(long)]
        gpu: String,
        /// Baseline, CO, COCM or COCMCT
        #[arg(long, default_value = "COCMCT")]
        feature_set: FeatureSet,
        /// known (GPU one-hots) or transfer (specs only)
        #[arg(long, default_value = "known")]
        encoding: HardwareEncoding,
    },
    /// Generate a synthetic benchmark CSV from the roofline oracle
    Synth {
        /// Configurations sampled per layer family
        #[arg(long, default_value_t = DESK_SCALE_PER_FAMILY)]
        n_per_family: usize,
        /// Oracle parameters as JSON (defaults when omitted)
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Overrides the oracle's relative noise level
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Comma-separated families (default: dense,conv2d,lstm,attention,embedding,layernorm)
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<LayerFamily>>,
        /// Output CSV path; the oracle sidecar is written next to it
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one family's predictor on the 80% training split
    Train {
        /// Benchmark CSV
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: LayerFamily,
        /// linear, rf, gbdt or mlp
        #[arg(long)]
        learner: LearnerKind,
        #[arg(long, default_value = "COCMCT")]
        feature_set: FeatureSet,
        #[arg(long, default_value = "known")]
        encoding: HardwareEncoding,
        /// Learner hyperparameters as JSON (defaults when omitted)
        #[arg(long)]
        hyperparams: Option<PathBuf>,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on the held-out split it was trained with
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict one layer's training-step time
    PredictLayer {
        #[arg(long)]
        model: PathBuf,
        /// Layer hyperparameters as key=value
        #[arg(long, num_args = 1.., required = true)]
        params: Vec<String>,
        #[arg(long)]
        gpu: String,
    },
    /// Predict per-epoch and total training time of an architecture
    PredictModel {
        /// Directory of per-family model files
        #[arg(long)]
        registry_dir: PathBuf,
        /// Architecture JSON
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        gpu: String,
    },
    /// Rank GPUs by predicted training time and cost
    Compare {
        #[arg(long)]
        registry_dir: PathBuf,
        #[arg(long)]
        arch: PathBuf,
        /// Comma-separated GPU ids (default: whole catalog)
        #[arg(long, value_delimiter = ',')]
        gpus: Option<Vec<String>>,
    },
    /// Write a built-in architecture as JSON
    Arch {
        #[command(subcommand)]
        which: ArchCommand,
        /// Output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ArchCommand {
    /// 13 conv + 3 dense layers
    Vgg16 {
        #[arg(long, default_value_t = 32)]
        batch_size: u64,
        #[arg(long, default_value_t = 224)]
        image_size: u64,
        #[arg(long, default_value_t = 1000)]
        classes: u64,
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        dataset_size: Option<u64>,
    },
    /// Embedding followed by encoder blocks
    Transformer {
        #[arg(long, default_value_t = 8)]
        batch_size: u64,
        #[arg(long, default_value_t = 512)]
        seq_len: u64,
        #[arg(long, default_value_t = 768)]
        embed_dim: u64,
        #[arg(long, default_value_t = 12)]
        heads: u64,
        #[arg(long, default_value_t = 30522)]
        vocab_size: u64,
        #[arg(long, default_value_t = 12)]
        blocks: usize,
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        dataset_size: Option<u64>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::UnknownGpu(_)
                | Error::Csv(_)
                | Error::MissingColumn(_)
                | Error::UnknownColumn(_)
                | Error::Cell { .. }
                | Error::LengthMismatch(..)
                | Error::NonFinite(_)
                | Error::SchemaMismatch { .. }
                | Error::ModelFormat(_)
                | Error::MissingFamily(_)
                | Error::Registry(_) => EXIT_INCOMPATIBLE,
                _ => EXIT_USAGE,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Rendered command output: a table for `table`/`csv`, a value for `json`.
struct Output {
    tables: Vec<Table>,
    json: Value,
}

struct Table {
    title: Option<String>,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(headers: &[&str]) -> Self {
        Table {
            title: None,
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn titled(mut self, title: &str) -> Self {
        self.title = Some(title.to_string());
        self
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render_text(&self, out: &mut String) {
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        if let Some(t) = &self.title {
            let _ = writeln!(out, "{t}");
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let _ = writeln!(out, "{}", line(&self.headers));
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", line(&rule));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
    }

    fn render_csv(&self, out: &mut Vec<u8>) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| CliError::Lib(Error::Csv(e.to_string()));
        w.write_record(&self.headers).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush()
            .map_err(|e| CliError::Lib(Error::Csv(e.to_string())))?;
        Ok(())
    }
}

fn render(output: &Output, format: Format) -> CliResult<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&output.json).map_err(Error::from)?;
            s.push('\n');
            s
        }
        Format::Table => {
            let mut s = String::new();
            for (i, t) in output.tables.iter().enumerate() {
                if i > 0 {
                    s.push('\n');
                }
                t.render_text(&mut s);
            }
            s
        }
        Format::Csv => {
            // CSV carries only the primary table.
            let mut buf = Vec::new();
            output.tables[0].render_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv output is utf-8")
        }
    })
}

/// Parses and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(out) => match render(&out, cli.format) {
            Ok(text) => {
                let mut stdout = std::io::stdout().lock();
                let _ = stdout.write_all(text.as_bytes());
                let _ = stdout.flush();
                EXIT_OK
            }
            Err(e) => report(&e),
        },
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn note(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn resolve_catalog(spec: Option<&str>) -> CliResult<Option<Catalog>> {
    Ok(match spec {
        None => None,
        Some("table2") => Some(Catalog::default_catalog()),
        Some("synthetic") => Some(synthetic_catalog()),
        Some(path) => Some(load_catalog(path)?),
    })
}

fn catalog_or_default(cli: &Cli) -> CliResult<Catalog> {
    Ok(resolve_catalog(cli.catalog.as_deref())?.unwrap_or_else(Catalog::default_catalog))
}

fn json_value<T: Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v).map_err(Error::from)?)
}

/// Keys accepted for a family: whatever its serialized config contains.
fn allowed_keys(family: LayerFamily) -> Vec<String> {
    let sample = sample_config(family, &mut ChaCha8Rng::seed_from_u64(0));
    match serde_json::to_value(sample) {
        Ok(Value::Object(m)) => m.keys().filter(|k| *k != "type").cloned().collect(),
        _ => Vec::new(),
    }
}

/// Builds a layer from `key=value` pairs.
pub fn parse_layer(family: LayerFamily, pairs: &[String]) -> Result<LayerConfig, String> {
    let allowed = allowed_keys(family);
    let mut obj = serde_json::Map::new();
    obj.insert("type".into(), Value::String(family.name().into()));
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{p}`"))?;
        let k = match k.trim() {
            "b" | "batch" => "batch_size",
            other => other,
        };
        if !allowed.iter().any(|a| a == k) {
            return Err(format!(
                "`{k}` is not a {family} parameter (valid: {})",
                allowed.join(", ")
            ));
        }
        let v = v.trim();
        let value = if k == "bidirectional" {
            match v {
                "true" | "1" => Value::Bool(true),
                "false" | "0" => Value::Bool(false),
                _ => return Err(format!("bidirectional must be true/false, got `{v}`")),
            }
        } else if k == "optimizer" {
            Value::String(v.to_ascii_lowercase())
        } else if let Ok(n) = v.parse::<u64>() {
            Value::from(n)
        } else if let Ok(x) = v.parse::<f64>() {
            Value::from(x)
        } else {
            return Err(format!("`{k}` expects a number, got `{v}`"));
        };
        obj.insert(k.to_string(), value);
    }
    let layer: LayerConfig =
        serde_json::from_value(Value::Object(obj)).map_err(|e| format!("{family} layer: {e}"))?;
    crate::domain::check(&layer).map_err(|e| e.to_string())?;
    Ok(layer)
}

fn execute(cli: &Cli) -> CliResult<Output> {
    match &cli.command {
        Command::Features {
            family,
            params,
            gpu,
            feature_set,
            encoding,
        } => cmd_features(cli, *family, params, gpu, *feature_set, *encoding),
        Command::Synth {
            n_per_family,
            oracle,
            noise_sigma,
            families,
            out,
        } => cmd_synth(
            cli,
            *n_per_family,
            oracle.as_deref(),
            *noise_sigma,
            families.as_deref(),
            out,
        ),
        Command::Train {
            data,
            family,
            learner,
            feature_set,
            encoding,
            hyperparams,
            out,
        } => cmd_train(
            cli,
            data,
            *family,
            *learner,
            *feature_set,
            *encoding,
            hyperparams.as_deref(),
            out,
        ),
        Command::Eval { model, data } => cmd_eval(cli, model, data),
        Command::PredictLayer { model, params, gpu } => cmd_predict_layer(cli, model, params, gpu),
        Command::PredictModel {
            registry_dir,
            arch,
            gpu,
        } => cmd_predict_model(cli, registry_dir, arch, gpu),
        Command::Compare {
            registry_dir,
            arch,
            gpus,
        } => cmd_compare(cli, registry_dir, arch, gpus.as_deref()),
        Command::Arch { which, out } => cmd_arch(cli, which, out.as_deref()),
    }
}

fn cmd_features(
    cli: &Cli,
    family: LayerFamily,
    params: &[String],
    gpu: &str,
    fs: FeatureSet,
    enc: HardwareEncoding,
) -> CliResult<Output> {
    let layer = parse_layer(family, params).map_err(CliError::Usage)?;
    let catalog = catalog_or_default(cli)?;
    let hw = catalog.get(gpu).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown gpu `{gpu}` (catalog has: {})",
            catalog.ids().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let v = assemble_layer(&layer, hw, &catalog, fs, enc)?;
    let mut table = Table::new(&v.schema.iter().map(String::as_str).collect::<Vec<_>>());
    table.push(v.values.iter().map(|x| x.to_string()).collect());
    let mut vertical = Table::new(&["feature", "value"]);
    for (n, x) in v.schema.iter().zip(&v.values) {
        vertical.push(vec![n.clone(), x.to_string()]);
    }
    let json = json!({
        "family": family,
        "gpu": gpu,
        "feature_set": fs,
        "encoding": enc,
        "schema": v.schema,
        "values": v.values,
    });
    Ok(match cli.format {
        Format::Table => Output {
            tables: vec![vertical],
            json,
        },
        _ => Output {
            tables: vec![table],
            json,
        },
    })
}

fn cmd_synth(
    cli: &Cli,
    n_per_family: usize,
    oracle_path: Option<&Path>,
    noise_sigma: Option<f64>,
    families: Option<&[LayerFamily]>,
    out: &Path,
) -> CliResult<Output> {
    let catalog = catalog_or_default(cli)?;
    let mut oracle = match oracle_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<OracleParams>(&text).map_err(Error::from)?
        }
        None => OracleParams::default(),
    };
    if let Some(s) = noise_sigma {
        oracle.noise_sigma = s;
    }
    let families = families.unwrap_or(&LayerFamily::DEFAULT_SIX);
    if families.is_empty() {
        return Err(CliError::Usage("no families given".into()));
    }
    let data = generate_dataset(families, &catalog, n_per_family, &oracle, cli.seed)?;
    write_csv(&data, out)?;
    let sidecar = sidecar_path(out);
    let meta = json!({
        "seed": cli.seed,
        "n_per_family": n_per_family,
        "families": families,
        "oracle": oracle,
        "catalog": catalog,
    });
    let text = serde_json::to_string_pretty(&meta).map_err(Error::from)? + "\n";
    std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    note(
        cli,
        format!("wrote {} rows to {}", data.len(), out.display()),
    );
    let mut t = Table::new(&["rows", "families", "gpus", "csv", "sidecar"]);
    t.push(vec![
        data.len().to_string(),
        families.len().to_string(),
        catalog.len().to_string(),
        out.display().to_string(),
        sidecar.display().to_string(),
    ]);
    Ok(Output {
        tables: vec![t],
        json: json!({
            "rows": data.len(),
            "families": families.len(),
            "gpus": catalog.len(),
            "csv": out.display().to_string(),
            "sidecar": sidecar.display().to_string(),
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    cli: &Cli,
    data: &Path,
    family: LayerFamily,
    kind: LearnerKind,
    fs: FeatureSet,
    enc: HardwareEncoding,
    hyperparams: Option<&Path>,
    out: &Path,
) -> CliResult<Output> {
    let catalog = catalog_or_default(cli)?;
    let hp = match hyperparams {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<Hyperparams>(&text).map_err(Error::from)?
        }
        None => Hyperparams::default(),
    };
    let dataset = read_csv(data)?;
    if dataset.family_subset(family).is_empty() {
        return Err(CliError::Usage(format!(
            "no {family} records in {}",
            data.display()
        )));
    }
    let req = TrainRequest {
        kind,
        family,
        feature_set: fs,
        encoding: enc,
        catalog: &catalog,
        hyperparams: hp,
        seed: cli.seed,
    };
    let (model, split) = train(&dataset, &req)?;
    save_model(&model, out)?;
    note(
        cli,
        format!("saved {kind} model for {family} to {}", out.display()),
    );
    let val = model.metrics.val_rmse;
    let mut t = Table::new(&[
        "family",
        "learner",
        "feature_set",
        "encoding",
        "n_train",
        "n_val",
        "n_test",
        "train_rmse",
        "val_rmse",
    ]);
    t.push(vec![
        family.to_string(),
        kind.to_string(),
        fs.to_string(),
        enc.to_string(),
        split.train.len().to_string(),
        split.val.len().to_string(),
        split.test.len().to_string(),
        model.metrics.train_rmse.to_string(),
        val.map(|v| v.to_string()).unwrap_or_default(),
    ]);
    Ok(Output {
        tables: vec![t],
        json: json!({
            "family": family,
            "learner": kind.name(),
            "feature_set": fs,
            "encoding": enc,
            "n_train": split.train.len(),
            "n_val": split.val.len(),
            "n_test": split.test.len(),
            "train_rmse": model.metrics.train_rmse,
            "val_rmse": val,
            "model": out.display().to_string(),
        }),
    })
}

fn cmd_eval(cli: &Cli, model_path: &Path, data: &Path) -> CliResult<Output> {
    let model = load_model(model_path)?;
    let catalog = resolve_catalog(cli.catalog.as_deref())?.unwrap_or_else(|| model.catalog.clone());
    let dataset = read_csv(data)?;
    let e = evaluate(&model, &dataset, &catalog)?;
    let mut t = Table::new(&["family", "learner", "n_test", "test_rmse", "val_rmse"]);
    t.push(vec![
        model.family.to_string(),
        model.kind.to_string(),
        e.n_test.to_string(),
        e.test_rmse.to_string(),
        e.val_rmse.map(|v| v.to_string()).unwrap_or_default(),
    ]);
    Ok(Output {
        tables: vec![t],
        json: json!({
            "family": model.family,
            "learner": model.kind.name(),
            "n_test": e.n_test,
            "test_rmse": e.test_rmse,
            "val_rmse": e.val_rmse,
            "recorded_val_rmse": model.metrics.val_rmse,
        }),
    })
}

fn lookup_gpu<'c>(catalog: &'c Catalog, id: &str) -> CliResult<&'c crate::domain::HardwareProfile> {
    catalog.get(id).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown gpu `{id}` (catalog has: {})",
            catalog.ids().collect::<Vec<_>>().join(", ")
        ))
    })
}

fn cmd_predict_layer(
    cli: &Cli,
    model_path: &Path,
    params: &[String],
    gpu: &str,
) -> CliResult<Output> {
    let model = load_model(model_path)?;
    let layer = parse_layer(model.family, params).map_err(CliError::Usage)?;
    let catalog = resolve_catalog(cli.catalog.as_deref())?.unwrap_or_else(|| model.catalog.clone());
    let hw = lookup_gpu(&catalog, gpu)?.clone();
    let family = model.family;
    let registry = PredictorRegistry::new([model])?;
    let p = predict_layer(&registry, &layer, &hw)?;
    if p.clamped {
        note(cli, "warning: negative raw prediction clamped to 0");
    }
    let mut t = Table::new(&["family", "gpu", "predicted_ms", "clamped"]);
    t.push(vec![
        family.to_string(),
        gpu.to_string(),
        p.ms.to_string(),
        p.clamped.to_string(),
    ]);
    Ok(Output {
        tables: vec![t],
        json: json!({
            "family": family,
            "gpu": gpu,
            "predicted_ms": p.ms,
            "clamped": p.clamped,
        }),
    })
}

fn registry_catalog(cli: &Cli, registry: &PredictorRegistry) -> CliResult<Catalog> {
    if let Some(c) = resolve_catalog(cli.catalog.as_deref())? {
        return Ok(c);
    }
    let first = registry.families().next().expect("registry is non-empty");
    Ok(registry.get(first)?.catalog.clone())
}

fn cmd_predict_model(cli: &Cli, dir: &Path, arch_path: &Path, gpu: &str) -> CliResult<Output> {
    let registry = PredictorRegistry::load_dir(dir)?;
    let arch = Architecture::load(arch_path)?;
    let catalog = registry_catalog(cli, &registry)?;
    let hw = lookup_gpu(&catalog, gpu)?;
    let est = predict_epoch(&registry, &arch, hw)?;
    if est.clamped_layers > 0 {
        note(
            cli,
            format!(
                "warning: {} layer predictions clamped to 0",
                est.clamped_layers
            ),
        );
    }
    let mut t = Table::new(&["family", "layers", "per_batch_ms", "epoch_ms"]);
    for (f, b) in &est.breakdown_by_family {
        t.push(vec![
            f.to_string(),
            b.layers.to_string(),
            b.per_batch_ms.to_string(),
            b.epoch_ms.to_string(),
        ]);
    }
    let mut totals = Table::new(&["gpu", "batches_per_epoch", "epoch_ms", "epochs", "total_ms"])
        .titled("totals");
    totals.push(vec![
        est.gpu_id.clone(),
        est.batches_per_epoch.to_string(),
        est.epoch_ms.to_string(),
        est.epochs.to_string(),
        est.total_ms.to_string(),
    ]);
    let mut json = json_value(&est)?;
    json["architecture"] = Value::String(arch.name.clone());
    Ok(Output {
        tables: vec![t, totals],
        json,
    })
}

fn cmd_compare(
    cli: &Cli,
    dir: &Path,
    arch_path: &Path,
    gpus: Option<&[String]>,
) -> CliResult<Output> {
    let registry = PredictorRegistry::load_dir(dir)?;
    let arch = Architecture::load(arch_path)?;
    let catalog = registry_catalog(cli, &registry)?;
    let profiles = match gpus {
        None => catalog.profiles().to_vec(),
        Some(ids) => ids
            .iter()
            .map(|id| lookup_gpu(&catalog, id).cloned())
            .collect::<CliResult<Vec<_>>>()?,
    };
    if profiles.is_empty() {
        return Err(CliError::Usage("no gpus to compare".into()));
    }
    let ranking = compare_gpus(&registry, &arch, &profiles)?;
    let headers = [
        "rank",
        "gpu",
        "epoch_ms",
        "total_ms",
        "price_per_hour",
        "cost",
    ];
    let fill = |rows: &[crate::predictor::RankingRow], title: &str| {
        let mut t = Table::new(&headers).titled(title);
        for (i, r) in rows.iter().enumerate() {
            t.push(vec![
                (i + 1).to_string(),
                r.gpu_id.clone(),
                r.epoch_ms.to_string(),
                r.total_ms.to_string(),
                r.price_per_hour.map(|p| p.to_string()).unwrap_or_default(),
                r.cost.map(|c| c.to_string()).unwrap_or_default(),
            ]);
        }
        t
    };
    let mut tables = vec![fill(&ranking.by_time, "by time")];
    if ranking.by_cost.iter().any(|r| r.cost.is_some()) {
        tables.push(fill(&ranking.by_cost, "by cost"));
    }
    if cli.format == Format::Csv {
        tables[0].title = None;
    }
    let mut json = json_value(&ranking)?;
    json["architecture"] = Value::String(arch.name.clone());
    Ok(Output { tables, json })
}

fn cmd_arch(cli: &Cli, which: &ArchCommand, out: Option<&Path>) -> CliResult<Output> {
    let (mut arch, epochs, dataset_size) = match *which {
        ArchCommand::Vgg16 {
            batch_size,
            image_size,
            classes,
            epochs,
            dataset_size,
        } => (
            build_vgg16(batch_size, image_size, classes)?,
            epochs,
            dataset_size,
        ),
        ArchCommand::Transformer {
            batch_size,
            seq_len,
            embed_dim,
            heads,
            vocab_size,
            blocks,
            epochs,
            dataset_size,
        } => (
            build_transformer_block(batch_size, seq_len, embed_dim, heads, vocab_size, blocks)?,
            epochs,
            dataset_size,
        ),
    };
    if epochs.is_some() || dataset_size.is_some() {
        arch = Architecture::new(
            arch.name,
            arch.batch_size,
            dataset_size.unwrap_or(arch.dataset_size),
            epochs.unwrap_or(arch.epochs),
            arch.layers,
        )?;
    }
    let json = json_value(&arch)?;
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(&arch).map_err(Error::from)? + "\n";
        std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        note(
            cli,
            format!(
                "wrote {} ({} layers) to {}",
                arch.name,
                arch.layers.len(),
                p.display()
            ),
        );
    }
    let mut t = Table::new(&["index", "family", "params"]);
    for (i, l) in arch.layers.iter().enumerate() {
        let mut params = json_value(&l.params)?;
        if let Value::Object(m) = &mut params {
            m.remove("type");
        }
        t.push(vec![
            i.to_string(),
            l.family().to_string(),
            params.to_string(),
        ]);
    }
    Ok(Output {
        tables: vec![t],
        json,
    })
}
