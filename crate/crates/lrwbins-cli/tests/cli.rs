//! End-to-end CLI contract tests against the built binary.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lrwbins"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lrwbins_cli_{}_{tag}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small deterministic dataset: two informative numerics, one boolean, one
/// categorical. The quadratic term keeps the second stage ahead of the
/// first so both routing outcomes occur.
fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut rng = 0x9E3779B97F4A7C15u64;
    let mut next = move || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut csv = String::from("x,y,flag,color,label\n");
    for _ in 0..2400 {
        let x = next() * 6.0 - 3.0;
        let y = next() * 6.0 - 3.0;
        let flag = u8::from(next() < 0.5);
        let color = ["red", "green", "blue"][(next() * 3.0) as usize % 3];
        let z = 1.5 * x - 2.5 * (y * y - 1.0) + f64::from(flag)
            + match color {
                "red" => 0.8,
                "green" => 0.0,
                _ => -0.8,
            };
        let label = u8::from(next() < 1.0 / (1.0 + (-z).exp()));
        csv.push_str(&format!("{x:.4},{y:.4},{flag},{color},{label}\n"));
    }
    let csv_path = dir.join("toy.csv");
    fs::write(&csv_path, csv).unwrap();
    let schema_path = dir.join("toy.schema");
    fs::write(
        &schema_path,
        "x=numeric\ny=numeric\nflag=boolean\ncolor=categorical\n",
    )
    .unwrap();
    (csv_path, schema_path)
}

fn train_fixture(dir: &Path, csv: &Path, schema: &Path) {
    let out = bin()
        .args([
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--label",
            "label",
            "--n",
            "2",
            "--m",
            "4",
            "--min-bin-rows",
            "20",
            "--trees",
            "60",
            "--max-depth",
            "5",
            "--tolerance",
            "0.01",
            "--out-dir",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "train failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("model.lrwb").exists());
    assert!(dir.join("model.gbdt").exists());
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["train", "--definitely-not-a-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_subcommand_exits_2() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_error_is_one_line_and_exit_1() {
    let out = bin()
        .args([
            "predict",
            "--first",
            "/definitely/missing.lrwb",
            "--schema",
            "/definitely/missing.schema",
            "--row",
            "1,2",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: "), "stderr: {stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1);
}

#[test]
fn train_predict_eval_roundtrip() {
    let dir = scratch("roundtrip");
    let (csv, schema) = write_fixture(&dir);
    train_fixture(&dir, &csv, &schema);

    // single row with a local fallback; unknown category maps to a miss or
    // a valid score, never an error
    let out = bin()
        .args([
            "predict",
            "--first",
            dir.join("model.lrwb").to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--second",
            dir.join("model.gbdt").to_str().unwrap(),
            "--row",
            "0.5,-1.0,1,turquoise",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "predict failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "probability,stage");
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    let p: f64 = fields[0].parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(fields[1] == "first" || fields[1] == "second");

    // csv input scores every row
    let out = bin()
        .args([
            "predict",
            "--first",
            dir.join("model.lrwb").to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--second",
            dir.join("model.gbdt").to_str().unwrap(),
            "--data",
            csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 2401); // header + 2400 rows
    let stages: Vec<&str> = stdout
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert!(stages.contains(&"first"));
    assert!(stages.contains(&"second"));

    // eval emits the report schema
    let out = bin()
        .args([
            "eval",
            "--data",
            csv.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--label",
            "label",
            "--n",
            "2",
            "--m",
            "4",
            "--min-bin-rows",
            "20",
            "--trees",
            "20",
            "--max-depth",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let header = stdout.lines().next().unwrap();
    assert_eq!(
        header,
        "model,roc_auc,accuracy,n_rows,coverage,delta_auc_vs_second,delta_acc_vs_second"
    );
    for name in ["lr,", "lrwbins,", "gbdt,", "hybrid,"] {
        assert!(stdout.contains(name), "missing {name} row");
    }
}

#[test]
fn corrupt_table_is_rejected() {
    let dir = scratch("corrupt");
    let (csv, schema) = write_fixture(&dir);
    train_fixture(&dir, &csv, &schema);

    let path = dir.join("model.lrwb");
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xFF;
    fs::write(&path, bytes).unwrap();

    let out = bin()
        .args([
            "predict",
            "--first",
            path.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--row",
            "0.5,-1.0,1,red",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = scratch("config");
    let (csv, schema) = write_fixture(&dir);
    let config = dir.join("run.conf");
    fs::write(&config, "n=2\nm=4\nmin_bin_rows=20\ntrees=20\nmax_depth=3\ntolerance=0.05\n").unwrap();

    let out = bin()
        .args([
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--label",
            "label",
            "--config",
            config.to_str().unwrap(),
            // flag overrides the config's 20 trees
            "--trees",
            "10",
            "--out-dir",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "train with config failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("model.gbdt").exists());
}

struct ServerGuard(Child);

impl Drop for ServerGuard {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_server(model: &Path, port: u16) -> ServerGuard {
    let mut child = bin()
        .args([
            "serve",
            "--model",
            model.to_str().unwrap(),
            "--listen",
            &format!("127.0.0.1:{port}"),
        ])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    // wait for the listening banner
    let stdout = child.stdout.take().unwrap();
    let mut reader = BufReader::new(stdout);
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(line.contains("listening"), "server banner: {line}");
    ServerGuard(child)
}

#[test]
fn serve_predict_and_bench_over_tcp() {
    let dir = scratch("tcp");
    let (csv, schema) = write_fixture(&dir);
    train_fixture(&dir, &csv, &schema);
    let _server = spawn_server(&dir.join("model.gbdt"), 17893);

    let out = bin()
        .args([
            "predict",
            "--first",
            dir.join("model.lrwb").to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--connect",
            "127.0.0.1:17893",
            "--data",
            csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "predict over tcp failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2401);

    let report = dir.join("bench.csv");
    let out = bin()
        .args([
            "bench",
            "--first",
            dir.join("model.lrwb").to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--data",
            csv.to_str().unwrap(),
            "--connect",
            "127.0.0.1:17893",
            "--batch-sizes",
            "10,50",
            "--repetitions",
            "2",
            "--out",
            report.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "bench failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv_text = fs::read_to_string(&report).unwrap();
    let mut lines = csv_text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "batch_size,mean_first_ms,mean_second_ms,mean_multistage_ms,projected_multistage_ms,speedup_vs_second,coverage"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn tune_and_allocate_emit_csv() {
    let dir = scratch("tune");
    let (csv, schema) = write_fixture(&dir);

    let grid = dir.join("grid.csv");
    let out = bin()
        .args([
            "tune",
            "--data",
            csv.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--label",
            "label",
            "--b-values",
            "2,3",
            "--n-values",
            "2",
            "--m-values",
            "2,all",
            "--min-bin-rows",
            "20",
            "--trees",
            "15",
            "--max-depth",
            "3",
            "--out",
            grid.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "tune failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&grid).unwrap();
    assert!(text.starts_with("b,n,m,status,"));
    assert_eq!(text.lines().count(), 5); // header + 2x1x2 cells
    assert!(text.contains("true"), "no winner marked");

    let curve = dir.join("curve.csv");
    let out = bin()
        .args([
            "allocate",
            "--data",
            csv.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--label",
            "label",
            "--n",
            "2",
            "--m",
            "4",
            "--min-bin-rows",
            "20",
            "--trees",
            "15",
            "--max-depth",
            "3",
            "--curve-out",
            curve.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "allocate failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("cut_index,coverage,hybrid_accuracy,hybrid_auc,"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn export_writes_ranking_text() {
    let dir = scratch("export");
    let (csv, schema) = write_fixture(&dir);
    let ranking = dir.join("ranking.txt");
    let out = bin()
        .args([
            "export",
            "--data",
            csv.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--label",
            "label",
            "--trees",
            "15",
            "--max-depth",
            "3",
            "--ranking-out",
            ranking.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "export failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&ranking).unwrap();
    assert_eq!(text.lines().next().unwrap(), "rank,index,name,score");
    assert_eq!(text.lines().count(), 5); // header + 4 features
}
