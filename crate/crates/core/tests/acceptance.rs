//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs as a plain binary so the lines are always visible.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

use layertime::datagen::{
    generate_dataset, roofline_ms, sample_config, synthetic_catalog, OracleParams,
};
use layertime::dataset::{
    rmse, split_80_10_10, split_indices, split_sizes, write_csv_to, Dataset, Provenance,
};
use layertime::domain::{
    Catalog, FeatureSet, HardwareEncoding, HardwareProfile, LayerConfig, LayerFamily,
};
use layertime::featurize::{co_attention, co_conv, co_dense, co_embedding, co_recurrent, ct_ms};
use layertime::learners::{
    design_matrix, evaluate, to_bytes, train, ForestParams, GbdtParams, Hyperparams, LearnerKind,
    Mlp, MlpSpec, TrainRequest, TrainedPredictor,
};
use layertime::predictor::{
    build_transformer_block, build_vgg16, compare_gpus, predict_epoch, predict_layer, Architecture,
    PredictorRegistry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("formula oracle suite", c1_formula_oracles),
        ("compute-time examples", c2_ct_examples),
        ("rmse examples", c3_rmse),
        ("epoch aggregation consistency", c4_epoch_consistency),
        ("synthetic learnability", c5_learnability),
        ("unseen-hardware transfer", c6_transfer),
        ("mlp recipe audit", c7_mlp_audit),
        ("determinism", c8_determinism),
        ("vgg16 builder", c9_vgg16),
        ("split rule", c10_split_rule),
        ("dominant-gpu ranking", c11_dominant_gpu),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}) [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}) [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

/// MACs of a convolution counted by walking every output position and
/// every kernel tap.
#[allow(clippy::too_many_arguments)]
fn brute_conv_macs(
    b: u64,
    h: u64,
    w: u64,
    c_in: u64,
    c_out: u64,
    k: u64,
    stride: u64,
    pad: u64,
) -> u64 {
    let mut count = 0;
    for _ in 0..b {
        let mut oy = 0;
        while oy * stride + k <= h + 2 * pad {
            let mut ox = 0;
            while ox * stride + k <= w + 2 * pad {
                for _ in 0..c_out {
                    for _ in 0..c_in {
                        for _ in 0..k {
                            for _ in 0..k {
                                count += 1;
                            }
                        }
                    }
                }
                ox += 1;
            }
            oy += 1;
        }
    }
    count
}

fn c1_formula_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut conv_checked = 0;
    while conv_checked < 200 {
        let (b, h, w) = (
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        );
        let (ci, co, k) = (
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        );
        let (s, p) = (rng.random_range(1..=2), rng.random_range(0..=1));
        if k > h + 2 * p || k > w + 2 * p {
            ensure(co_conv(b, h, w, ci, co, k, s, p).is_err(), || {
                "invalid geometry accepted".into()
            })?;
            continue;
        }
        let expected = brute_conv_macs(b, h, w, ci, co, k, s, p);
        let got = co_conv(b, h, w, ci, co, k, s, p).map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!("conv b={b} h={h} w={w} ci={ci} co={co} k={k} s={s} p={p}: {got} != {expected}")
        })?;
        conv_checked += 1;
    }
    for _ in 0..100 {
        let (b, i, o) = (
            rng.random_range(1..=64u64),
            rng.random_range(1..=4096u64),
            rng.random_range(1..=4096u64),
        );
        let expected = b as u128 * i as u128 * o as u128;
        ensure(
            co_dense(b, i, o).map_err(|e| e.to_string())? as u128 == expected,
            || "dense".into(),
        )?;

        let family =
            [LayerFamily::Rnn, LayerFamily::Lstm, LayerFamily::Gru][rng.random_range(0..3)];
        let gates = match family {
            LayerFamily::Rnn => 2u128,
            LayerFamily::Lstm => 4,
            _ => 3,
        };
        let (s, hd, d) = (
            rng.random_range(1..=512u64),
            rng.random_range(128..=1024u64),
            rng.random_range(1..=1024u64),
        );
        let bidir = rng.random_bool(0.5);
        let expected = gates
            * b as u128
            * s as u128
            * hd as u128
            * (hd as u128 + d as u128)
            * if bidir { 2 } else { 1 };
        let got = co_recurrent(family, b, s, hd, d, bidir).map_err(|e| e.to_string())?;
        ensure(got as u128 == expected, || {
            format!("{family}: {got} != {expected}")
        })?;

        let (heads, l, dm) = (
            rng.random_range(1..=16u64),
            rng.random_range(64..=512u64),
            rng.random_range(128..=1024u64),
        );
        let expected = heads as u128 * l as u128 * l as u128 * dm as u128;
        ensure(
            co_attention(heads, l, dm).map_err(|e| e.to_string())? as u128 == expected,
            || "attention".into(),
        )?;

        let expected = b as u128 * l as u128 * dm as u128;
        ensure(
            co_embedding(b, l, dm).map_err(|e| e.to_string())? as u128 == expected,
            || "embedding".into(),
        )?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "200 conv shapes match brute force, 4x100 closed forms exact, {secs:.3}s"
    ))
}

fn c2_ct_examples() -> Outcome {
    let a = ct_ms(5_700_000_000, 5700.0).map_err(|e| e.to_string())?;
    let b = ct_ms(82_580_000_000, 82580.0).map_err(|e| e.to_string())?;
    ensure((a - 1.0).abs() <= 1e-12 && (b - 1.0).abs() <= 1e-12, || {
        format!("{a}, {b}")
    })?;
    Ok(format!("{a} ms, {b} ms"))
}

fn c3_rmse() -> Outcome {
    let r = rmse(&[3.0, 4.0], &[1.0, 2.0]).map_err(|e| e.to_string())?;
    ensure((r - 2.0).abs() <= 1e-12, || {
        format!("rmse([3,4],[1,2]) = {r}")
    })?;
    let x = [0.1, -7.0, 1e9, 3.25];
    let z = rmse(&x, &x).map_err(|e| e.to_string())?;
    ensure(z == 0.0, || format!("rmse(x,x) = {z}"))?;
    Ok("rmse([3,4],[1,2]) = 2, rmse(x,x) = 0".into())
}

fn small_hyperparams() -> Hyperparams {
    Hyperparams {
        forest: ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        },
        gbdt: GbdtParams {
            n_rounds: 5,
            ..GbdtParams::default()
        },
        mlp: MlpSpec {
            hidden_sizes: vec![8, 8],
            epochs: 2,
            ..MlpSpec::default()
        },
    }
}

fn c4_epoch_consistency() -> Outcome {
    let catalog = synthetic_catalog();
    let oracle = OracleParams::default().with_noise(0.05);
    let kinds = [
        LearnerKind::Linear,
        LearnerKind::RandomForest,
        LearnerKind::Gbdt,
        LearnerKind::Mlp,
    ];
    let sets = [
        FeatureSet::Baseline,
        FeatureSet::Co,
        FeatureSet::CoCm,
        FeatureSet::CoCmCt,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for trial in 0..50u64 {
        let data = generate_dataset(&LayerFamily::ALL, &catalog, 4, &oracle, trial)
            .map_err(|e| e.to_string())?;
        let fs = sets[rng.random_range(0..4)];
        let enc = if rng.random_bool(0.5) {
            HardwareEncoding::Known
        } else {
            HardwareEncoding::Transfer
        };
        let models = LayerFamily::ALL
            .iter()
            .map(|&family| {
                let req = TrainRequest {
                    kind: kinds[rng.random_range(0..4)],
                    family,
                    feature_set: fs,
                    encoding: enc,
                    catalog: &catalog,
                    hyperparams: small_hyperparams(),
                    seed: trial,
                };
                train(&data, &req).map(|(m, _)| m)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let registry = PredictorRegistry::new(models).map_err(|e| e.to_string())?;
        let n_layers = rng.random_range(1..=12);
        let batch = rng.random_range(1..=64);
        let layers: Vec<LayerConfig> = (0..n_layers)
            .map(|_| sample_config(LayerFamily::ALL[rng.random_range(0..8)], &mut rng))
            .collect();
        let dataset_size = rng.random_range(batch..=5000);
        let arch = Architecture::new(
            "random",
            batch,
            dataset_size,
            rng.random_range(1..=5),
            layers,
        )
        .map_err(|e| e.to_string())?;
        let hw = &catalog.profiles()[rng.random_range(0..catalog.len())];
        let est = predict_epoch(&registry, &arch, hw).map_err(|e| e.to_string())?;
        let sum: f64 = arch
            .layers
            .iter()
            .map(|l| predict_layer(&registry, l, hw).map(|p| p.ms))
            .sum::<Result<f64, _>>()
            .map_err(|e| e.to_string())?;
        let expected = arch.batches_per_epoch() as f64 * sum;
        let rel = (est.epoch_ms - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        let rel = if expected == 0.0 && est.epoch_ms == 0.0 {
            0.0
        } else {
            rel
        };
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || {
            format!("trial {trial}: {} vs {expected}", est.epoch_ms)
        })?;
        ensure(est.total_ms == arch.epochs as f64 * est.epoch_ms, || {
            format!("trial {trial}: total")
        })?;
    }
    Ok(format!("50 registries, worst relative gap {worst:e}"))
}

const LEARN_SEED: u64 = 2024;
const NOISE_SIGMA: f64 = 0.03;

fn rf_model(
    data: &Dataset,
    family: LayerFamily,
    fs: FeatureSet,
    enc: HardwareEncoding,
    catalog: &Catalog,
) -> Result<TrainedPredictor, String> {
    let req = TrainRequest {
        kind: LearnerKind::RandomForest,
        family,
        feature_set: fs,
        encoding: enc,
        catalog,
        hyperparams: Hyperparams::default(),
        seed: LEARN_SEED,
    };
    train(data, &req).map(|(m, _)| m).map_err(|e| e.to_string())
}

fn c5_learnability() -> Outcome {
    let full = synthetic_catalog();
    let ids: Vec<&str> = full.ids().take(5).collect();
    let catalog = full.subset(&ids).map_err(|e| e.to_string())?;
    let oracle = OracleParams::default().with_noise(NOISE_SIGMA);
    let data = generate_dataset(
        &LayerFamily::DEFAULT_SIX,
        &catalog,
        2000,
        &oracle,
        LEARN_SEED,
    )
    .map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for family in LayerFamily::DEFAULT_SIX {
        let subset = data.family_subset(family);
        let split = split_80_10_10(&subset, LEARN_SEED).map_err(|e| e.to_string())?;
        let test: Vec<_> = split.test.iter().map(|&i| &subset.records[i]).collect();
        let mean = test.iter().map(|r| r.measured_ms).sum::<f64>() / test.len() as f64;
        let floor = NOISE_SIGMA * mean;
        // Error of the exact noise-free oracle: what a perfect model scores.
        let oracle_pred: Vec<f64> = test
            .iter()
            .map(|r| roofline_ms(&r.layer, catalog.get(&r.gpu_id).unwrap(), &oracle).unwrap())
            .collect();
        let targets: Vec<f64> = test.iter().map(|r| r.measured_ms).collect();
        let oracle_rmse = rmse(&oracle_pred, &targets).map_err(|e| e.to_string())?;

        let rich = rf_model(
            &data,
            family,
            FeatureSet::CoCmCt,
            HardwareEncoding::Known,
            &catalog,
        )?;
        let base = rf_model(
            &data,
            family,
            FeatureSet::Baseline,
            HardwareEncoding::Known,
            &catalog,
        )?;
        let rich_rmse = evaluate(&rich, &data, &catalog)
            .map_err(|e| e.to_string())?
            .test_rmse;
        let base_rmse = evaluate(&base, &data, &catalog)
            .map_err(|e| e.to_string())?
            .test_rmse;
        let ok_floor = rich_rmse <= 2.0 * floor;
        let ok_gain = rich_rmse < base_rmse;
        lines.push(format!(
            "{family}: COCMCT {rich_rmse:.6} Baseline {base_rmse:.6} bound {:.6} oracle {oracle_rmse:.6}",
            2.0 * floor
        ));
        if !ok_floor {
            failures.push(format!("{family} above 2x noise floor"));
        }
        if !ok_gain {
            failures.push(format!("{family} COCMCT not below Baseline"));
        }
    }
    let detail = lines.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{} | {detail}", failures.join(", ")))
    }
}

fn c6_transfer() -> Outcome {
    let catalog = synthetic_catalog();
    let held = ["SYN-C", "SYN-E"];
    let seen: Vec<&str> = catalog.ids().filter(|id| !held.contains(id)).collect();
    let train_catalog = catalog.subset(&seen).map_err(|e| e.to_string())?;
    let oracle = OracleParams::default().with_noise(NOISE_SIGMA);
    let data = generate_dataset(
        &LayerFamily::DEFAULT_SIX,
        &catalog,
        2000,
        &oracle,
        LEARN_SEED,
    )
    .map_err(|e| e.to_string())?;
    let by_gpu = |keep: &dyn Fn(&str) -> bool| {
        Dataset::new(
            data.records
                .iter()
                .filter(|r| keep(&r.gpu_id))
                .cloned()
                .collect(),
            Provenance::Synthetic,
        )
    };
    let seen_data = by_gpu(&|id| !held.contains(&id));
    let held_data = by_gpu(&|id| held.contains(&id));
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for family in LayerFamily::DEFAULT_SIX {
        let held_family = held_data.family_subset(family);
        let mut scores = Vec::new();
        for fs in [FeatureSet::CoCmCt, FeatureSet::Baseline] {
            let model = rf_model(
                &seen_data,
                family,
                fs,
                HardwareEncoding::Transfer,
                &train_catalog,
            )?;
            let (x, y) = design_matrix(&held_family, &catalog, fs, HardwareEncoding::Transfer)
                .map_err(|e| e.to_string())?;
            let p = x
                .iter()
                .map(|r| model.predict_values(r))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            scores.push(rmse(&p, &y).map_err(|e| e.to_string())?);
        }
        lines.push(format!(
            "{family}: COCMCT {:.4} Baseline {:.4}",
            scores[0], scores[1]
        ));
        if scores[0] >= scores[1] {
            failures.push(format!("{family}"));
        }
    }
    let detail = lines.join("; ");
    if failures.is_empty() {
        Ok(format!("held out {} | {detail}", held.join(",")))
    } else {
        Err(format!(
            "COCMCT not below Baseline for {} | {detail}",
            failures.join(",")
        ))
    }
}

fn c7_mlp_audit() -> Outcome {
    let catalog = synthetic_catalog();
    let data = generate_dataset(
        &[LayerFamily::Dense],
        &catalog,
        20,
        &OracleParams::default(),
        7,
    )
    .map_err(|e| e.to_string())?;
    let hp = Hyperparams {
        mlp: MlpSpec {
            epochs: 1,
            ..MlpSpec::default()
        },
        ..Hyperparams::default()
    };
    let req = TrainRequest {
        kind: LearnerKind::Mlp,
        family: LayerFamily::Dense,
        feature_set: FeatureSet::CoCmCt,
        encoding: HardwareEncoding::Known,
        catalog: &catalog,
        hyperparams: hp,
        seed: 7,
    };
    let (model, _) = train(&data, &req).map_err(|e| e.to_string())?;
    let n_in = model.schema.len();
    let net = match &model.parameters {
        layertime::learners::ModelParams::Mlp(m) => m.clone(),
        _ => return Err("trained model is not an mlp".into()),
    };
    let expected = vec![n_in, 32, 64, 128, 128, 128, 128, 1];
    ensure(net.widths() == expected, || {
        format!("widths {:?}", net.widths())
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let net = Mlp::init(n_in, MlpSpec::default(), &mut rng);
    let xs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let ts = [0.5, -1.0, 2.0];
    let (_, g) = net.loss_and_grad(&refs, &ts, None);
    let analytic = g.flatten();
    let p0 = net.flat_params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    let mut p = p0.clone();
    for k in 0..p0.len() {
        p[k] = p0[k] + h;
        probe.set_flat_params(&p);
        let up = probe.loss_and_grad(&refs, &ts, None).0;
        p[k] = p0[k] - h;
        probe.set_flat_params(&p);
        let down = probe.loss_and_grad(&refs, &ts, None).0;
        p[k] = p0[k];
        let numeric = (up - down) / (2.0 * h);
        // Relative error with a floor so exactly-zero gradients (dead ReLU
        // paths) compare absolutely.
        let rel = (numeric - analytic[k]).abs() / numeric.abs().max(analytic[k].abs()).max(1e-6);
        worst = worst.max(rel);
        ensure(rel <= 1e-4, || {
            format!("param {k}: analytic {} numeric {numeric}", analytic[k])
        })?;
    }
    Ok(format!(
        "widths {expected:?}; {} params, worst relative gradient error {worst:.2e}",
        p0.len()
    ))
}

fn run_cli(dir: &std::path::Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_layertime"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    Ok(out.stdout)
}

fn c8_determinism() -> Outcome {
    let catalog = synthetic_catalog();
    let oracle = OracleParams::default().with_noise(NOISE_SIGMA);
    let csv = |seed| -> Result<Vec<u8>, String> {
        let d = generate_dataset(&LayerFamily::ALL, &catalog, 30, &oracle, seed)
            .map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_csv_to(&d, &mut buf).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    ensure(csv(9)? == csv(9)?, || "synthetic csv differs".into())?;
    ensure(csv(9)? != csv(10)?, || "seed has no effect on csv".into())?;
    ensure(
        split_indices(1000, 5).map_err(|e| e.to_string())?
            == split_indices(1000, 5).map_err(|e| e.to_string())?,
        || "split differs".into(),
    )?;
    let data = generate_dataset(&[LayerFamily::Conv2d], &catalog, 60, &oracle, 9)
        .map_err(|e| e.to_string())?;
    for kind in [
        LearnerKind::RandomForest,
        LearnerKind::Gbdt,
        LearnerKind::Linear,
    ] {
        let fit = || -> Result<Vec<u8>, String> {
            let req = TrainRequest {
                kind,
                family: LayerFamily::Conv2d,
                feature_set: FeatureSet::CoCmCt,
                encoding: HardwareEncoding::Known,
                catalog: &catalog,
                hyperparams: Hyperparams::default(),
                seed: 3,
            };
            let (m, _) = train(&data, &req).map_err(|e| e.to_string())?;
            to_bytes(&m).map_err(|e| e.to_string())
        };
        ensure(fit()? == fit()?, || format!("{kind} model bytes differ"))?;
    }

    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut run = Vec::new();
        let common = [
            "--catalog",
            "synthetic",
            "--seed",
            "11",
            "--format",
            "json",
            "--quiet",
        ];
        let with = |extra: &[&str]| -> Vec<String> {
            common.iter().chain(extra).map(|s| s.to_string()).collect()
        };
        let steps: [Vec<String>; 5] = [
            with(&[
                "features",
                "--family",
                "dense",
                "--params",
                "b=64",
                "d_in=4096",
                "d_out=4096",
                "--gpu",
                "SYN-A",
            ]),
            with(&[
                "synth",
                "--n-per-family",
                "20",
                "--families",
                "dense,layernorm",
                "--noise-sigma",
                "0.03",
                "--out",
                "d.csv",
            ]),
            with(&[
                "train",
                "--data",
                "d.csv",
                "--family",
                "dense",
                "--learner",
                "rf",
                "--out",
                "dense.model",
            ]),
            with(&["eval", "--model", "dense.model", "--data", "d.csv"]),
            with(&[
                "predict-layer",
                "--model",
                "dense.model",
                "--params",
                "b=8",
                "d_in=100",
                "d_out=10",
                "--gpu",
                "SYN-B",
            ]),
        ];
        for s in &steps {
            let args: Vec<&str> = s.iter().map(String::as_str).collect();
            let stdout = run_cli(dir.path(), &args)?;
            serde_json::from_slice::<serde_json::Value>(&stdout)
                .map_err(|e| format!("{args:?}: invalid json: {e}"))?;
            run.push(stdout);
        }
        run.push(std::fs::read(dir.path().join("d.csv")).map_err(|e| e.to_string())?);
        run.push(std::fs::read(dir.path().join("dense.model")).map_err(|e| e.to_string())?);
        outputs.push(run);
    }
    ensure(outputs[0] == outputs[1], || {
        "cli outputs differ between runs".into()
    })?;
    Ok("csv, split, rf/gbdt/linear bytes and cli json identical across runs".into())
}

fn c9_vgg16() -> Outcome {
    let mut seen = BTreeSet::new();
    for (b, s, c) in [
        (16, 224, 1000),
        (32, 224, 1000),
        (64, 224, 1000),
        (1, 32, 10),
        (8, 512, 5),
    ] {
        let a = build_vgg16(b, s, c).map_err(|e| e.to_string())?;
        let h = a.family_histogram();
        ensure(
            h.len() == 2 && h[&LayerFamily::Conv2d] == 13 && h[&LayerFamily::Dense] == 3,
            || format!("{h:?}"),
        )?;
        ensure(a.dataset_size == 1024, || {
            format!("dataset_size {}", a.dataset_size)
        })?;
        seen.insert(a.layers.len());
    }
    Ok(format!(
        "{{conv2d: 13, dense: 3}}, dataset_size 1024, {} layers",
        seen.iter().next().unwrap()
    ))
}

fn c10_split_rule() -> Outcome {
    ensure(split_sizes(100) == (80, 10, 10), || {
        format!("{:?}", split_sizes(100))
    })?;
    let s = split_indices(100, 0).map_err(|e| e.to_string())?;
    ensure(
        (s.train.len(), s.val.len(), s.test.len()) == (80, 10, 10),
        || "N=100 sizes".into(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1000 {
        let n = rng.random_range(3..=3000usize);
        let seed: u64 = rng.random();
        let s = split_indices(n, seed).map_err(|e| e.to_string())?;
        let (a, b, c) = split_sizes(n);
        ensure(
            (s.train.len(), s.val.len(), s.test.len()) == (a, b, c),
            || format!("N={n} sizes"),
        )?;
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        ensure(all == (0..n).collect::<Vec<_>>(), || {
            format!("N={n} seed={seed}: not a partition")
        })?;
    }
    Ok("N=100 -> 80/10/10; partition holds for 1000 (N, seed) pairs".into())
}

fn c11_dominant_gpu() -> Outcome {
    let base = HardwareProfile {
        id: "SYN-BASE".into(),
        boost_clock_mhz: 1500.0,
        memory_gb: 16.0,
        memory_bandwidth_gbps: 400.0,
        cuda_cores: 4096,
        gflops: 2.0 * 4096.0 * 1500.0 / 1000.0,
        price_per_hour: None,
    };
    let fast = HardwareProfile {
        id: "SYN-FAST".into(),
        memory_bandwidth_gbps: 800.0,
        cuda_cores: 8192,
        gflops: 2.0 * base.gflops,
        ..base.clone()
    };
    let catalog = Catalog::new(vec![base.clone(), fast.clone()]).map_err(|e| e.to_string())?;
    let families = [
        LayerFamily::Dense,
        LayerFamily::Conv2d,
        LayerFamily::Attention,
        LayerFamily::Embedding,
        LayerFamily::LayerNorm,
    ];
    let oracle = OracleParams::default().with_noise(NOISE_SIGMA);
    let data = generate_dataset(&families, &catalog, 1000, &oracle, LEARN_SEED)
        .map_err(|e| e.to_string())?;
    let models = families
        .iter()
        .map(|&f| {
            rf_model(
                &data,
                f,
                FeatureSet::CoCmCt,
                HardwareEncoding::Known,
                &catalog,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let registry = PredictorRegistry::new(models).map_err(|e| e.to_string())?;
    let archs = [
        build_vgg16(32, 224, 1000).map_err(|e| e.to_string())?,
        build_transformer_block(16, 256, 512, 8, 30522, 4).map_err(|e| e.to_string())?,
    ];
    let mut lines = Vec::new();
    for arch in &archs {
        // Listed slow-first so id order alone would not put the fast GPU first.
        let ranking = compare_gpus(&registry, arch, &[base.clone(), fast.clone()])
            .map_err(|e| e.to_string())?;
        let top = &ranking.by_time[0];
        lines.push(format!(
            "{}: {} {:.1} ms vs {} {:.1} ms",
            arch.name,
            top.gpu_id,
            top.total_ms,
            ranking.by_time[1].gpu_id,
            ranking.by_time[1].total_ms
        ));
        ensure(top.gpu_id == fast.id, || lines.join("; "))?;
    }
    // Noise-free sanity: the oracle itself favours the fast GPU on every layer.
    for arch in &archs {
        for l in &arch.layers {
            let (s, f) = (
                roofline_ms(l, &base, &oracle).unwrap(),
                roofline_ms(l, &fast, &oracle).unwrap(),
            );
            ensure(f < s, || format!("oracle not faster on {:?}", l.params))?;
        }
    }
    Ok(lines.join("; "))
}
