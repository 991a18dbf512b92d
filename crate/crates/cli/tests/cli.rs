use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dynloc::Encoder;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dynloc"));
    cmd.env_remove("DYNLOC_THREADS").env("RUST_LOG", "warn");
    cmd
}

fn dynloc(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn generate(dir: &Path, n: usize) -> PathBuf {
    let out = dynloc(
        &["generate", "--n", &n.to_string(), "--seed", "3", "--out", "data.csv"],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("data.csv")
}

#[test]
fn help_matches_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("DYNLOC_BLESS").is_some();
    for command in ["", "generate", "train", "benchmark", "ablate"] {
        let mut args: Vec<&str> = Vec::new();
        if !command.is_empty() {
            args.push(command);
        }
        args.push("--help");
        let out = bin().args(&args).output().unwrap();
        assert_eq!(code(&out), 0);
        let text = String::from_utf8(out.stdout).unwrap();
        let name = if command.is_empty() { "dynloc" } else { command };
        let path = golden.join(format!("{name}.txt"));
        if bless {
            fs::write(&path, &text).unwrap();
            continue;
        }
        let expected = fs::read_to_string(&path)
            .unwrap_or_else(|_| panic!("missing {}; rerun with DYNLOC_BLESS=1", path.display()));
        assert_eq!(text, expected, "help for `{name}` changed; rerun with DYNLOC_BLESS=1");
    }
}

#[test]
fn help_shows_every_default() {
    for command in ["generate", "train", "benchmark", "ablate"] {
        let out = bin().args([command, "--help"]).output().unwrap();
        let text = String::from_utf8(out.stdout).unwrap();
        for required in ["--config", "--force"] {
            assert!(text.contains(required), "{command} lacks {required}");
        }
        if command != "generate" {
            for flag in ["--epochs", "--lr", "--nn-final", "--kernel-sigma", "--temperature"] {
                assert!(text.contains(flag), "{command} lacks {flag}");
            }
            assert!(text.contains("[default: 0.0001]"));
        }
    }
}

#[test]
fn generate_writes_header_plus_rows_and_guards_overwrite() {
    let dir = TempDir::new().unwrap();
    let out = dynloc(
        &["generate", "--n", "500", "--seed", "7", "--out", "data.csv"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(text.lines().count(), 501);
    assert!(text.starts_with("id,y,f0,"));

    fs::write(dir.path().join("data.csv"), "sentinel").unwrap();
    let again = dynloc(
        &["generate", "--n", "500", "--seed", "7", "--out", "data.csv"],
        dir.path(),
    );
    assert_eq!(code(&again), 2);
    assert_eq!(fs::read_to_string(dir.path().join("data.csv")).unwrap(), "sentinel");

    let forced = dynloc(
        &["generate", "--n", "500", "--seed", "7", "--out", "data.csv", "--force"],
        dir.path(),
    );
    assert_eq!(code(&forced), 0);
    assert_eq!(fs::read_to_string(dir.path().join("data.csv")).unwrap(), text);
}

#[test]
fn usage_errors_exit_64() {
    let dir = TempDir::new().unwrap();
    let data = generate(dir.path(), 40);
    let data = data.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["generate", "--n", "0", "--out", "x.csv"],
        vec!["train", "--data", data, "--out-dir", "o", "--nn-final", "0"],
        vec!["train", "--data", data, "--out-dir", "o", "--loss", "triplet"],
        vec!["train", "--data", data, "--out-dir", "o", "--batch-size", "2"],
        vec!["train", "--data", data, "--out-dir", "o", "--temperature", "0"],
        vec!["benchmark", "--variants", ""],
        vec!["benchmark", "--seeds", "0", "--test-fraction", "1.5"],
        vec!["ablate", "--norms", "hamming"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let out = dynloc(&args, dir.path());
        assert_eq!(code(&out), 64, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_input_exits_66() {
    let dir = TempDir::new().unwrap();
    let out = dynloc(&["train", "--data", "absent.csv", "--out-dir", "o"], dir.path());
    assert_eq!(code(&out), 66);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
    let out = dynloc(&["benchmark", "--data", "absent.csv"], dir.path());
    assert_eq!(code(&out), 66);
}

#[test]
fn malformed_input_exits_65() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.csv"), "id,y,f0\na,1.0,2.0\nb,oops,3.0\n").unwrap();
    let out = dynloc(&["train", "--data", "bad.csv", "--out-dir", "o"], dir.path());
    assert_eq!(code(&out), 65);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn numerical_failure_exits_70_with_epoch() {
    let dir = TempDir::new().unwrap();
    generate(dir.path(), 40);
    let out = dynloc(
        &[
            "train",
            "--data",
            "data.csv",
            "--out-dir",
            "o",
            "--epochs",
            "2",
            "--temperature",
            "1e-300",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 70);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch 1"));
}

#[test]
fn train_writes_trace_checkpoint_and_exports() {
    let dir = TempDir::new().unwrap();
    generate(dir.path(), 70);
    let out = dynloc(
        &[
            "train",
            "--data",
            "data.csv",
            "--out-dir",
            "run",
            "--epochs",
            "6",
            "--loss",
            "dynlocrep",
            "--nn-final",
            "14",
            "--nn-step-size",
            "1",
            "--distance-norm",
            "manhattan",
            "--export-epochs",
            "0,1,6",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");

    let trace = fs::read_to_string(run.join("trace.jsonl")).unwrap();
    let records: Vec<Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 6);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["epoch"], i as u64 + 1);
        assert_eq!(r["lr"], 1e-4);
        assert!(r["nn_count"].as_u64().unwrap() >= 14);
        assert!(r["mean_loss"].as_f64().unwrap().is_finite());
    }
    assert_eq!(records[0]["nn_count"], 31);
    assert_eq!(records[5]["nn_count"], 14);

    let ckpt = fs::read(run.join("encoder.ckpt")).unwrap();
    let encoder = Encoder::read_checkpoint(&ckpt[..], "encoder.ckpt").unwrap();
    assert_eq!(encoder.input_dim(), 16);
    assert_eq!(encoder.output_dim(), 32);

    let emb = fs::read_to_string(run.join("embeddings.csv")).unwrap();
    let mut lines = emb.lines();
    assert!(lines.next().unwrap().starts_with("epoch,id,y,z0,"));
    let epochs: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(epochs.len(), 3 * 70);
    assert_eq!(epochs.iter().filter(|e| **e == "6").count(), 70);

    let again = dynloc(&["train", "--data", "data.csv", "--out-dir", "run"], dir.path());
    assert_eq!(code(&again), 2);
}

#[test]
fn train_is_reproducible_and_rnc_trace_has_no_neighbor_count() {
    let dir = TempDir::new().unwrap();
    generate(dir.path(), 50);
    let run = |out_dir: &str| {
        let out = dynloc(
            &[
                "train",
                "--data",
                "data.csv",
                "--out-dir",
                out_dir,
                "--epochs",
                "3",
                "--loss",
                "rnc",
                "--seed",
                "4",
            ],
            dir.path(),
        );
        assert_eq!(code(&out), 0);
        (
            fs::read(dir.path().join(out_dir).join("trace.jsonl")).unwrap(),
            fs::read(dir.path().join(out_dir).join("encoder.ckpt")).unwrap(),
        )
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let first: Value = serde_json::from_slice(a.0.split(|&b| b == b'\n').next().unwrap()).unwrap();
    assert!(first["nn_count"].is_null());
    assert!(!dir.path().join("a/embeddings.csv").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    generate(dir.path(), 50);
    fs::write(
        dir.path().join("run.conf"),
        "# shared settings\nepochs = 4\nbatch_size = 16\nloss = exponential   # baseline\nforce = true\n",
    )
    .unwrap();
    let out = dynloc(
        &[
            "train",
            "--config",
            "run.conf",
            "--data",
            "data.csv",
            "--out-dir",
            "o",
            "--epochs",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let trace = fs::read_to_string(dir.path().join("o/trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 2);
    assert!(trace.contains("\"nn_count\":null"));

    // `force = true` from the file lets the rerun overwrite.
    let out = dynloc(
        &["train", "--config", "run.conf", "--data", "data.csv", "--out-dir", "o"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read_to_string(dir.path().join("o/trace.jsonl"))
            .unwrap()
            .lines()
            .count(),
        4
    );

    fs::write(dir.path().join("bad.conf"), "epochs = 2\nlearning_rate = 0.1\n").unwrap();
    let out = dynloc(
        &["train", "--config", "bad.conf", "--data", "data.csv", "--out-dir", "p"],
        dir.path(),
    );
    assert_eq!(code(&out), 64);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `learning-rate`"));

    let out = dynloc(
        &["train", "--config", "nope.conf", "--data", "data.csv", "--out-dir", "p"],
        dir.path(),
    );
    assert_eq!(code(&out), 66);
}

#[test]
fn benchmark_subset_report_and_thread_env() {
    let dir = TempDir::new().unwrap();
    generate(dir.path(), 60);
    let args = [
        "benchmark",
        "--data",
        "data.csv",
        "--variants",
        "dynlocrep",
        "--seeds",
        "0,1",
        "--epochs",
        "3",
        "--out",
    ];
    let mut one = args.to_vec();
    one.push("one.json");
    assert_eq!(code(&dynloc(&one, dir.path())), 0);
    let mut two = args.to_vec();
    two.push("two.json");
    let out = bin()
        .args(&two)
        .env("DYNLOC_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);

    let load =
        |name: &str| -> Value { serde_json::from_str(&fs::read_to_string(dir.path().join(name)).unwrap()).unwrap() };
    let (mut a, mut b) = (load("one.json"), load("two.json"));
    assert_eq!(a["schema_version"], 1);
    let variants = a["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 1);
    assert_eq!(variants[0]["name"], "dynlocrep");
    assert_eq!(variants[0]["maes"].as_array().unwrap().len(), 2);
    assert_eq!(a["baselines"].as_array().unwrap().len(), 2);
    a.as_object_mut().unwrap().remove("timing");
    b.as_object_mut().unwrap().remove("timing");
    assert_eq!(a, b);

    let bad = bin()
        .args(&one)
        .arg("--force")
        .env("DYNLOC_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&bad), 64);
}

#[test]
fn ablate_single_norm_report() {
    let dir = TempDir::new().unwrap();
    generate(dir.path(), 60);
    let out = dynloc(
        &[
            "ablate",
            "--data",
            "data.csv",
            "--norms",
            "manhattan",
            "--seeds",
            "0",
            "--epochs",
            "2",
            "--out",
            "abl.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("abl.json")).unwrap()).unwrap();
    let norms = report["norms"].as_object().unwrap();
    assert_eq!(norms.len(), 1);
    let entry = &norms["manhattan"];
    assert_eq!(entry["maes"].as_array().unwrap().len(), 1);
    assert_eq!(entry["reference"]["mean"], 3.724);
    assert_eq!(entry["reference"]["paper_reference"], true);
}
