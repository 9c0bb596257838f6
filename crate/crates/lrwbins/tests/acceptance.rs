//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `--nocapture`) before asserting.
//!
//! Criteria 1-3 and 5 train on the public datasets under `data/`; run
//! `scripts/fetch_data.sh` once to download them. Criteria 4, 6, and 7 are
//! self-contained.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use lrwbins::allocation::{
    evaluate_per_bin, filter_model, select_coverage, select_cutoff, sweep, MetricKind,
};
use lrwbins::binning::{combined_bin_index, fit_bins, FeatureBins};
use lrwbins::config_table::{
    export_first_stage, export_second_stage, import_first_stage, import_second_stage,
    FirstStageTable, TableImage,
};
use lrwbins::dataset::{
    fit_normalizer, load_csv, parse_schema_decl, split, Dataset, FeatureDef, FeatureKind,
    FeatureSchema,
};
use lrwbins::first_stage::{
    predict_first_stage, sigmoid, train_lr, train_lrwbins, LrParams,
};
use lrwbins::gbdt::{predict_gbdt, train_gbdt, GbdtParams};
use lrwbins::metrics::roc_auc;
use lrwbins::pipeline::{run_pipeline, PipelineParams};
use lrwbins::ranking::{rank_mrmr, FeatureRanking, RankMethod};
use lrwbins::rng::SplitMix64;
use lrwbins::rpc::{multistage_predict, serve, LatencyInjector, RpcClient, Stage};
use lrwbins::synth::{generate, SynthConfig};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

fn criterion(id: &str, pass: bool, detail: &str) {
    println!("[{}] criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn data_dir() -> PathBuf {
    match std::env::var("LRWB_DATA") {
        Ok(dir) => PathBuf::from(dir),
        Err(_) => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

fn load_public(name: &str, label: &str) -> Dataset {
    let dir = data_dir();
    let csv = dir.join(format!("{name}.csv"));
    let schema = dir.join(format!("{name}.schema"));
    if !csv.exists() || !schema.exists() {
        panic!(
            "dataset {name} not found under {}; run scripts/fetch_data.sh first",
            dir.display()
        );
    }
    let decls = parse_schema_decl(&std::fs::read_to_string(schema).unwrap()).unwrap();
    load_csv(csv, &decls, label).unwrap()
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lrwbins_accept_{}_{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct SeedMeans {
    lr_auc: f64,
    lrwbins_auc: f64,
    gbdt_auc: f64,
}

fn means_over_seeds(data: &Dataset, base: &PipelineParams, seeds: u64) -> SeedMeans {
    let mut sums = SeedMeans {
        lr_auc: 0.0,
        lrwbins_auc: 0.0,
        gbdt_auc: 0.0,
    };
    for seed in 0..seeds {
        let mut params = base.clone();
        params.seed = seed;
        let artifacts = run_pipeline(data, &params).unwrap();
        let report = artifacts.evaluate(&artifacts.test).unwrap();
        sums.lr_auc += report.model("lr").unwrap().roc_auc;
        sums.lrwbins_auc += report.model("lrwbins").unwrap().roc_auc;
        sums.gbdt_auc += report.model("gbdt").unwrap().roc_auc;
    }
    let k = seeds as f64;
    SeedMeans {
        lr_auc: sums.lr_auc / k,
        lrwbins_auc: sums.lrwbins_auc / k,
        gbdt_auc: sums.gbdt_auc / k,
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: ACI model quality
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_aci_model_quality() {
    let t0 = Instant::now();
    let data = load_public("aci", "income");
    assert_eq!(data.n_rows(), 32561);
    assert_eq!(data.n_features() + 1, 15);

    let means = means_over_seeds(&data, &PipelineParams::default(), 20);
    let elapsed = t0.elapsed();

    let pass = means.lr_auc >= 0.88
        && means.lrwbins_auc >= 0.88
        && means.lrwbins_auc >= means.lr_auc - 0.005
        && means.gbdt_auc >= 0.90
        && elapsed <= Duration::from_secs(600);
    criterion(
        "1 (ACI model quality)",
        pass,
        &format!(
            "20-seed mean test ROC AUC: lr {:.4}, lrwbins {:.4}, gbdt {:.4} ({elapsed:?})",
            means.lr_auc, means.lrwbins_auc, means.gbdt_auc
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: Banknote ordering
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_banknote_ordering() {
    let data = load_public("banknote", "label");
    // the reported regime uses the tuned low-feature setting: bins on the
    // top-2 features, inference on the top-1
    let params = PipelineParams {
        n: 2,
        m: 1,
        min_bin_rows: 20,
        ..Default::default()
    };
    let means = means_over_seeds(&data, &params, 20);

    let pass = means.lrwbins_auc >= means.lr_auc + 0.03 && means.gbdt_auc >= means.lrwbins_auc;
    criterion(
        "2 (Banknote ordering)",
        pass,
        &format!(
            "20-seed mean test ROC AUC: lr {:.4} -> lrwbins {:.4} -> gbdt {:.4}",
            means.lr_auc, means.lrwbins_auc, means.gbdt_auc
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: coverage at tolerance (ACI, Higgs)
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_aci_coverage_at_tolerance() {
    let data = load_public("aci", "income");
    let params = PipelineParams::default(); // accuracy tolerance 0.002
    let artifacts = run_pipeline(&data, &params).unwrap();

    // hybrid AUC vs the second stage, on the validation set the allocation
    // was chosen on and on the held-out test set
    let chosen = artifacts
        .curve
        .points
        .iter()
        .find(|p| p.cut_index == artifacts.allocation.first_stage_bins.len())
        .unwrap();
    let val_delta_auc = artifacts.curve.second_auc - chosen.hybrid_auc;
    let report = artifacts.evaluate(&artifacts.test).unwrap();

    // held-out routing matches the validation coverage the cut was chosen at
    let coverage_gap = (report.coverage - artifacts.allocation.coverage).abs();

    let pass = artifacts.allocation.coverage >= 0.30
        && val_delta_auc <= 0.01
        && report.delta_auc <= 0.01
        && coverage_gap <= 0.03;
    criterion(
        "3a (ACI coverage at accuracy tolerance 0.002)",
        pass,
        &format!(
            "coverage val {:.1}% / test {:.1}%, hybrid-vs-gbdt AUC delta: val {:.4}, test {:.4}",
            artifacts.allocation.coverage * 100.0,
            report.coverage * 100.0,
            val_delta_auc,
            report.delta_auc
        ),
    );
}

#[test]
fn criterion_3_higgs_coverage_at_tolerance() {
    let data = load_public("higgs", "label");
    // coarser bins than the ACI defaults: 98k rows over 3^7 cells would
    // leave too little data per bin to fit or evaluate local models
    let params = PipelineParams {
        n: 4,
        min_bin_rows: 300,
        tolerance: 0.005,
        ..Default::default()
    };
    let artifacts = run_pipeline(&data, &params).unwrap();

    let chosen = artifacts
        .curve
        .points
        .iter()
        .find(|p| p.cut_index == artifacts.allocation.first_stage_bins.len())
        .unwrap();
    let val_delta_acc = artifacts.curve.second_accuracy - chosen.hybrid_accuracy;

    let pass = artifacts.allocation.coverage >= 0.55 && val_delta_acc <= 0.005;
    criterion(
        "3b (Higgs coverage at accuracy tolerance 0.005)",
        pass,
        &format!(
            "coverage {:.1}%, hybrid-vs-gbdt accuracy delta on validation {:.4}",
            artifacts.allocation.coverage * 100.0,
            val_delta_acc
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: latency model
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_latency_model() {
    let t0 = Instant::now();
    let data = generate(&SynthConfig {
        rows: 3000,
        ..Default::default()
    });
    let params = PipelineParams {
        n: 3,
        m: 8,
        min_bin_rows: 20,
        gbdt: GbdtParams {
            num_trees: 25,
            max_depth: 4,
            ..Default::default()
        },
        ..Default::default()
    };
    let artifacts = run_pipeline(&data, &params).unwrap();

    // force the allocation to the sweep point nearest 50% coverage
    let fifty = select_coverage(&artifacts.curve, 0.5);
    assert!(
        (fifty.coverage - 0.5).abs() < 0.08,
        "no sweep point near 50% coverage (got {:.3})",
        fifty.coverage
    );
    let forced = filter_model(&artifacts.first_full, &fifty);

    let dir = scratch_dir("latency");
    let first_path = dir.join("model.lrwb");
    export_first_stage(&forced, &first_path).unwrap();
    let table = import_first_stage(&first_path).unwrap();

    let rows: Vec<Vec<f64>> = (0..artifacts.test.n_rows())
        .map(|r| artifacts.test.row(r).to_vec())
        .collect();

    // calibration pass: raw loopback cost without injection
    let floor = Duration::from_micros(300);
    let probe = serve(artifacts.second.clone(), "127.0.0.1:0", LatencyInjector::default()).unwrap();
    let mut client = RpcClient::connect(&probe.local_addr().to_string(), Duration::from_secs(1)).unwrap();
    let calib = lrwbins::bench::bench(
        &table,
        &mut client,
        &rows,
        &lrwbins::bench::BenchConfig {
            batch_sizes: vec![200],
            repetitions: 1,
            first_stage_floor: floor,
        },
    )
    .unwrap();
    let t1_ms = calib.batches[0].mean_first_ms;
    let t2_raw_ms = calib.batches[0].mean_second_ms;
    drop(client);
    probe.shutdown();

    // tune the server injection so pure-second ~= 5x pure-first
    let inject_ms = (5.0 * t1_ms - t2_raw_ms).max(0.0);
    let server = serve(
        artifacts.second.clone(),
        "127.0.0.1:0",
        LatencyInjector::fixed(Duration::from_secs_f64(inject_ms / 1e3)),
    )
    .unwrap();
    let mut client =
        RpcClient::connect(&server.local_addr().to_string(), Duration::from_secs(1)).unwrap();
    let report = lrwbins::bench::bench(
        &table,
        &mut client,
        &rows,
        &lrwbins::bench::BenchConfig {
            batch_sizes: vec![400],
            repetitions: 2,
            first_stage_floor: floor,
        },
    )
    .unwrap();
    let b = &report.batches[0];
    server.shutdown();

    let ratio = b.mean_second_ms / b.mean_first_ms;
    let point_seven_t2 = 0.7 * b.mean_second_ms;
    let vs_projected = (b.mean_multistage_ms - b.projected_multistage_ms).abs()
        / b.projected_multistage_ms;
    let vs_07t2 = (b.mean_multistage_ms - point_seven_t2).abs() / point_seven_t2;
    let elapsed = t0.elapsed();

    let pass = (3.5..=6.5).contains(&ratio)
        && vs_projected <= 0.15
        && vs_07t2 <= 0.15
        && b.speedup_vs_second >= 1.2
        && b.mean_multistage_ms >= b.mean_first_ms * 0.95
        && b.mean_multistage_ms <= (b.mean_first_ms + b.mean_second_ms) * 1.05
        && elapsed <= Duration::from_secs(120);
    criterion(
        "4 (latency model)",
        pass,
        &format!(
            "t1 {:.3}ms, t2 {:.3}ms (ratio {:.2}), multistage {:.3}ms vs projected {:.3}ms \
             ({:.1}% off; {:.1}% off 0.7*t2), speedup {:.2}, coverage {:.2} ({elapsed:?})",
            b.mean_first_ms,
            b.mean_second_ms,
            ratio,
            b.mean_multistage_ms,
            b.projected_multistage_ms,
            vs_projected * 100.0,
            vs_07t2 * 100.0,
            b.speedup_vs_second,
            b.coverage
        ),
    );
}

#[test]
fn criterion_4_routing_never_sends_covered_rows() {
    let data = generate(&SynthConfig {
        rows: 2000,
        seed: 21,
        ..Default::default()
    });
    let params = PipelineParams {
        n: 3,
        m: 8,
        min_bin_rows: 20,
        gbdt: GbdtParams {
            num_trees: 15,
            max_depth: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let artifacts = run_pipeline(&data, &params).unwrap();
    let fifty = select_coverage(&artifacts.curve, 0.5);
    let forced = filter_model(&artifacts.first_full, &fifty);
    let table = FirstStageTable::from_image(TableImage::from_model(&forced)).unwrap();

    let server = serve(artifacts.second.clone(), "127.0.0.1:0", LatencyInjector::default()).unwrap();
    let mut client =
        RpcClient::connect(&server.local_addr().to_string(), Duration::from_secs(1)).unwrap();

    let mut second_routed = 0u64;
    for r in 0..artifacts.test.n_rows() {
        let (_, stage) = multistage_predict(&table, &mut client, artifacts.test.row(r)).unwrap();
        if stage == Stage::Second {
            second_routed += 1;
        }
    }
    let wire = server.request_count();
    server.shutdown();
    criterion(
        "4 (routing: covered rows never hit the wire)",
        wire == second_routed,
        &format!("{wire} wire requests for {second_routed} second-routed rows"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: engine equivalence
// ---------------------------------------------------------------------------

fn engine_equivalence_on(data: &Dataset, tag: &str) -> (usize, usize, f64) {
    let (train, _val, _test) = split(data, (0.7, 0.15, 0.15), 1).unwrap();
    let normalizer = fit_normalizer(&train);
    let ranking = rank_mrmr(&train, 10).unwrap();
    let n = 4.min(train.n_features());
    let m = 10.min(train.n_features());
    let spec = fit_bins(&train, &ranking, n, 3).unwrap();
    let model = train_lrwbins(
        &train,
        spec,
        ranking.top(m),
        &normalizer,
        &LrParams::default(),
        30,
    )
    .unwrap();
    assert!(model.trained_bins() > 0, "{tag}: no trained bins to compare");

    let dir = scratch_dir("equiv");
    let path = dir.join(format!("{tag}.lrwb"));
    export_first_stage(&model, &path).unwrap();
    let table = import_first_stage(&path).unwrap();

    let mut hits = 0usize;
    let mut max_diff = 0.0f64;
    for r in 0..data.n_rows() {
        let row = data.row(r);
        let training_side = predict_first_stage(&model, row).score();
        let table_side = table.predict(row);
        match (training_side, table_side) {
            (Some(a), Some(b)) => {
                hits += 1;
                max_diff = max_diff.max((a - b).abs());
                assert!(
                    (a - b).abs() <= 1e-6,
                    "{tag} row {r}: training {a} vs table {b}"
                );
            }
            (None, None) => {}
            other => panic!("{tag} row {r}: routing disagreement {other:?}"),
        }
    }
    assert!(hits > 0, "{tag}: no first-stage hits to compare");
    (data.n_rows(), hits, max_diff)
}

#[test]
fn criterion_5_engine_equivalence() {
    let mut detail = String::new();
    let mut total_rows = 0usize;
    for (name, label) in [("aci", "income"), ("banknote", "label"), ("higgs", "label")] {
        let data = load_public(name, label);
        let (rows, hits, max_diff) = engine_equivalence_on(&data, name);
        total_rows += rows;
        detail.push_str(&format!("{name}: {hits} hits/{rows} rows, max |diff| {max_diff:.2e}; "));
    }
    let synth = generate(&SynthConfig {
        rows: 20_000,
        seed: 5,
        ..Default::default()
    });
    let (rows, hits, max_diff) = engine_equivalence_on(&synth, "synth");
    total_rows += rows;
    detail.push_str(&format!("synth: {hits} hits/{rows} rows, max |diff| {max_diff:.2e}"));

    criterion(
        "5 (engine equivalence within 1e-6)",
        true, // per-row asserts above enforce the bound on 100% of rows
        &format!("{total_rows} rows checked; {detail}"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: property suites (no datasets needed)
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_bin_partition_properties() {
    let mut rng = SplitMix64::new(606);
    let mut schemas = 0usize;
    for _ in 0..1000 {
        let f = 1 + rng.next_below(5) as usize;
        let n_rows = 10 + rng.next_below(50) as usize;
        let mut defs = Vec::new();
        for j in 0..f {
            let kind = match rng.next_below(3) {
                0 => FeatureKind::Numeric,
                1 => FeatureKind::Boolean,
                _ => FeatureKind::Categorical {
                    cardinality: 2 + rng.next_below(4) as usize,
                },
            };
            defs.push(FeatureDef {
                name: format!("f{j}"),
                kind,
            });
        }
        let schema = FeatureSchema::new(defs).unwrap();
        let mut rows = Vec::with_capacity(n_rows * f);
        for _ in 0..n_rows {
            for j in 0..f {
                let v = match schema.feature(j).kind {
                    FeatureKind::Numeric => ((rng.next_f64() * 20.0 - 10.0) * 100.0).round() / 100.0,
                    FeatureKind::Boolean => f64::from(rng.next_f64() < 0.5),
                    FeatureKind::Categorical { cardinality } => {
                        rng.next_below(cardinality as u64) as f64
                    }
                };
                rows.push(v);
            }
        }
        let labels: Vec<u8> = (0..n_rows).map(|_| (rng.next_u64() & 1) as u8).collect();
        let data = Dataset::from_parts(schema, rows, labels, vec![Vec::new(); f]).unwrap();

        let mut order: Vec<(usize, f64)> = (0..f).map(|j| (j, 0.0)).collect();
        rng.shuffle(&mut order);
        let ranking = FeatureRanking::new(RankMethod::Mrmr, order).unwrap();
        let n = 1 + rng.next_below(f as u64) as usize;
        let b = 2 + rng.next_below(4) as usize;
        let spec = fit_bins(&data, &ranking, n, b).unwrap();

        // partition: every row maps to exactly one in-range bin
        let mut counts = vec![0usize; spec.total_bins() as usize];
        for r in 0..data.n_rows() {
            let bin = combined_bin_index(data.row(r), &spec);
            assert!((bin.0 as u64) < spec.total_bins());
            counts[bin.0 as usize] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), data.n_rows());

        // edge tie rule: a value exactly on edge k belongs to cell k
        for bf in spec.features() {
            if let FeatureBins::Numeric { edges } = &bf.bins {
                for (k, &e) in edges.iter().enumerate() {
                    assert_eq!(bf.digit(e as f64), k, "edge value in lower cell");
                    assert_eq!(bf.digit(e as f64 + 1e-9), k + 1);
                }
            }
        }
        schemas += 1;
    }
    criterion(
        "6 (bin partition / index range / tie rule)",
        schemas == 1000,
        &format!("{schemas} random schemas checked"),
    );
}

#[test]
fn criterion_6_roc_auc_matches_pairwise_oracle() {
    fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
        wins / pairs
    }

    let mut max_err = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = SplitMix64::new(seed);
        let n = 4 + rng.next_below(197) as usize;
        // quantized scores so ties are common
        let scores: Vec<f64> = (0..n).map(|_| rng.next_below(12) as f64 / 12.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
        labels[0] = 0;
        labels[1] = 1;
        let got = roc_auc(&scores, &labels).unwrap();
        let expect = pairwise(&scores, &labels);
        max_err = max_err.max((got - expect).abs());
        assert!((got - expect).abs() <= 1e-12, "seed {seed}");
    }
    criterion(
        "6 (ROC AUC vs pairwise oracle)",
        true,
        &format!("100 tied fixtures, max |diff| {max_err:.2e}"),
    );
}

#[test]
fn criterion_6_gbdt_training_properties() {
    let mut checked = 0;
    for seed in 0..6u64 {
        let mut rng = SplitMix64::new(777 + seed);
        let n = 400;
        let f = 4;
        let schema = FeatureSchema::new(
            (0..f)
                .map(|j| FeatureDef {
                    name: format!("x{j}"),
                    kind: FeatureKind::Numeric,
                })
                .collect(),
        )
        .unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let vals: Vec<f64> = (0..f).map(|_| rng.next_normal()).collect();
            let z = 2.0 * vals[0] - vals[1] * vals[2];
            labels.push(u8::from(rng.next_f64() < sigmoid(z)));
            rows.extend(vals);
        }
        let data = Dataset::from_parts(schema, rows, labels, vec![Vec::new(); f]).unwrap();
        let params = GbdtParams {
            num_trees: 30,
            max_depth: 3,
            min_child_rows: 5,
            seed,
            ..Default::default()
        };
        let a = train_gbdt(&data, &params).unwrap();
        let b = train_gbdt(&data, &params).unwrap();

        // per-round loss monotone (subsample = 1)
        for w in a.train_losses().windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss increased: {} -> {}", w[0], w[1]);
        }
        // depth bound and determinism
        for (ta, tb) in a.trees().iter().zip(b.trees()) {
            assert!(ta.depth() <= 3);
            assert_eq!(ta, tb);
        }
        checked += 1;
    }
    criterion(
        "6 (GBDT loss monotonicity / depth bound / determinism)",
        checked == 6,
        &format!("{checked} seeded fixtures"),
    );
}

#[test]
fn criterion_6_lr_optimizer_properties() {
    // objective non-increasing across the iteration ladder
    let mut rng = SplitMix64::new(42);
    let n = 300;
    let x: Vec<f64> = (0..n * 2).map(|_| rng.next_normal()).collect();
    let labels: Vec<u8> = (0..n)
        .map(|r| u8::from(rng.next_f64() < sigmoid(x[r * 2] - 0.5 * x[r * 2 + 1])))
        .collect();
    let objective = |w: &lrwbins::first_stage::LRWeights| -> f64 {
        let mut obj = 0.0;
        for r in 0..n {
            let z = w.bias + w.weights[0] * x[r * 2] + w.weights[1] * x[r * 2 + 1];
            let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            obj += sp - f64::from(labels[r]) * z;
        }
        obj + 0.5 * w.weights.iter().map(|v| v * v).sum::<f64>()
    };
    let mut prev = f64::INFINITY;
    for max_iter in [1usize, 2, 4, 8, 16, 32, 64, 128, 256, 512] {
        let params = LrParams {
            max_iter,
            ..Default::default()
        };
        let w = train_lr(&x, 2, &labels, &params).unwrap();
        let obj = objective(&w);
        assert!(obj <= prev + 1e-9, "objective rose at max_iter {max_iter}");
        prev = obj;
    }

    // single-class closed form
    let w = train_lr(&[1.0, 2.0], 1, &[1, 1], &LrParams::default()).unwrap();
    let expect = (1.0f64 - 1e-6) / 1e-6;
    assert!((w.bias - expect.ln()).abs() < 1e-9);
    assert_eq!(w.weights, vec![0.0]);

    // parameter recovery vs the Newton oracle fixture (weight 1.5, bias -2)
    let mut rng = SplitMix64::new(2024);
    let mut xs = Vec::with_capacity(200);
    let mut ys = Vec::with_capacity(200);
    for _ in 0..200 {
        let xi = rng.next_f64() * 6.0 - 3.0;
        xs.push(xi);
        ys.push(u8::from(rng.next_f64() < sigmoid(1.5 * xi - 2.0)));
    }
    let fitted = train_lr(
        &xs,
        1,
        &ys,
        &LrParams {
            l2: 1e-4,
            max_iter: 2000,
            tol: 1e-9,
            ..Default::default()
        },
    )
    .unwrap();
    let w_err = (fitted.weights[0] - 1.5).abs();
    let b_err = (fitted.bias + 2.0).abs();
    criterion(
        "6 (LR optimizer: monotone objective / single-class / recovery)",
        w_err < 0.3 && b_err < 0.3,
        &format!("recovered ({:.3}, {:.3}) vs (1.5, -2.0)", fitted.weights[0], fitted.bias),
    );
}

#[test]
fn criterion_6_allocation_sweep_properties() {
    let data = generate(&SynthConfig {
        rows: 3000,
        seed: 66,
        ..Default::default()
    });
    let (train, val, _test) = split(&data, (0.7, 0.15, 0.15), 3).unwrap();
    let normalizer = fit_normalizer(&train);
    let second = train_gbdt(
        &train,
        &GbdtParams {
            num_trees: 20,
            max_depth: 3,
            ..Default::default()
        },
    )
    .unwrap();
    let ranking = lrwbins::ranking::ranking_from_model(&second).unwrap();
    let spec = fit_bins(&train, &ranking, 3, 3).unwrap();
    let first = train_lrwbins(
        &train,
        spec,
        ranking.top(8),
        &normalizer,
        &LrParams::default(),
        20,
    )
    .unwrap();

    let reports = evaluate_per_bin(&first, &second, &val, MetricKind::Accuracy).unwrap();
    let curve = sweep(&reports, &first, &second, &val, MetricKind::Accuracy).unwrap();

    // coverage monotone, prefix 0 equals the pure second stage
    for w in curve.points.windows(2) {
        assert!(w[1].coverage >= w[0].coverage);
    }
    assert_eq!(curve.points[0].hybrid_accuracy, curve.second_accuracy);
    assert_eq!(curve.points[0].hybrid_auc, curve.second_auc);
    assert_eq!(curve.points[0].coverage, 0.0);

    // tolerance monotonicity
    let mut prev = 0.0;
    for t in [0.0, 0.001, 0.002, 0.005, 0.01, 0.05, 1.0] {
        let alloc = select_cutoff(&curve, curve.second_metric(), t);
        assert!(alloc.coverage >= prev - 1e-12);
        prev = alloc.coverage;
    }
    criterion(
        "6 (allocation sweep: coverage monotone / prefix-0 / tolerance monotone)",
        true,
        &format!("{} sweep points", curve.points.len()),
    );
}

#[test]
fn criterion_6_config_table_roundtrip_and_checksum() {
    let data = generate(&SynthConfig {
        rows: 2500,
        seed: 31,
        ..Default::default()
    });
    let (train, _val, _test) = split(&data, (0.7, 0.15, 0.15), 9).unwrap();
    let normalizer = fit_normalizer(&train);
    let ranking = rank_mrmr(&train, 10).unwrap();
    let spec = fit_bins(&train, &ranking, 4, 3).unwrap();
    let model = train_lrwbins(
        &train,
        spec,
        ranking.top(8),
        &normalizer,
        &LrParams::default(),
        30,
    )
    .unwrap();

    // byte-identical re-encode
    let bytes = TableImage::from_model(&model).to_bytes();
    let re_encoded = TableImage::from_bytes(&bytes).unwrap().to_bytes();
    assert_eq!(bytes, re_encoded);

    // second stage too
    let second = train_gbdt(
        &train,
        &GbdtParams {
            num_trees: 12,
            max_depth: 3,
            ..Default::default()
        },
    )
    .unwrap();
    let dir = scratch_dir("roundtrip");
    let path = dir.join("second.gbdt");
    export_second_stage(&second, &path).unwrap();
    let back = import_second_stage(&path).unwrap();
    for r in 0..200 {
        assert_eq!(
            predict_gbdt(&second, train.row(r)).unwrap(),
            predict_gbdt(&back, train.row(r)).unwrap()
        );
    }

    // checksum catches every injected single-byte corruption
    let mut rng = SplitMix64::new(8);
    let mut caught = 0;
    for _ in 0..100 {
        let mut corrupted = bytes.clone();
        let at = rng.next_below(corrupted.len() as u64) as usize;
        let bit = 1u8 << rng.next_below(8);
        corrupted[at] ^= bit;
        if TableImage::from_bytes(&corrupted).is_err() {
            caught += 1;
        }
    }
    criterion(
        "6 (config table: byte-identical re-encode / checksum)",
        caught == 100,
        &format!("{caught}/100 corruptions detected, {} byte image", bytes.len()),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: scaling smoke test
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_scaling_smoke() {
    let params = PipelineParams {
        n: 5,
        m: 10,
        min_bin_rows: 100,
        tolerance: 0.005,
        lr: LrParams {
            max_iter: 120,
            ..Default::default()
        },
        gbdt: GbdtParams {
            num_trees: 30,
            max_depth: 5,
            ..Default::default()
        },
        ..Default::default()
    };

    let small = generate(&SynthConfig {
        rows: 100_000,
        ..Default::default()
    });
    let small_run = run_pipeline(&small, &params).unwrap();
    let small_coverage = small_run.allocation.coverage;
    drop(small_run);
    drop(small);

    let big = generate(&SynthConfig {
        rows: 1_000_000,
        ..Default::default()
    });
    let big_run = run_pipeline(&big, &params).unwrap();
    let big_coverage = big_run.allocation.coverage;

    let drift = (big_coverage - small_coverage).abs();
    criterion(
        "7 (1M-row scaling smoke)",
        drift <= 0.10,
        &format!(
            "coverage 100k {:.3} vs 1M {:.3} (drift {:.3})",
            small_coverage, big_coverage, drift
        ),
    );
}
