use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{
  "dataset": {"kind": "blobs", "num_classes": 4, "per_class": 60, "dim": 2, "spread": 0.5, "seed": 3},
  "forget_classes": [1],
  "train": {"epochs": 5},
  "unlearn": {"loss": {"method": "delete"}, "lr": 0.01, "epochs": 3},
  "mia": {"samples_per_side": 100, "iterations": 50},
  "out_dir": "out"
}"#;

fn bin(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_unlearn"));
    c.current_dir(dir).env_remove("ULCK_OUT");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin(dir).args(args).output().expect("spawn unlearn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn workspace(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

fn desk_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn pipeline_writes_every_artifact_and_reruns_identically() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    let steps: [&[&str]; 3] = [
        &["pretrain", "--config", "run.json"],
        &["retrain", "--config", "run.json"],
        &["unlearn", "--config", "run.json"],
    ];
    for s in steps {
        ok(d, s);
    }
    let out = d.join("out");
    let names = ["original.ulck", "retrain.ulck", "unlearned_delete.ulck", "report_delete.json", "train_log.jsonl"];
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();

    let report = read_json(&out.join("report_delete.json"));
    assert_eq!(report["method"], "delete");
    assert_eq!(report["uses_remain_data"], false);
    assert!(report["retrained_acc_ft"].is_number());
    assert_eq!(report["config"]["forget_classes"][0], 1);

    for s in steps {
        ok(d, s);
    }
    for (n, bytes) in names.iter().zip(&first) {
        assert_eq!(&fs::read(out.join(n)).unwrap(), bytes, "{n} changed on rerun");
    }

    let log = fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    let runs: Vec<String> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["run"].as_str().unwrap().to_owned())
        .collect();
    // Audit line plus one line per epoch.
    assert_eq!(runs.iter().filter(|r| *r == "pretrain").count(), 6);
    assert_eq!(runs.iter().filter(|r| *r == "unlearn:delete").count(), 4);
}

#[test]
fn malformed_config_exits_1_without_writing() {
    let (dir, _) = workspace(r#"{"dataset": {"kind": "blobs"}, "forget_classes": [0],"#);
    let o = run(dir.path(), &["pretrain", "--config", "run.json"]);
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("out").exists());
    assert!(!dir.path().join("runs").exists());

    let bad_field = SMALL.replace(r#""epochs": 5"#, r#""epochs": 5, "lr_schedule": "cosine""#);
    let (dir, _) = workspace(&bad_field);
    let o = run(dir.path(), &["pretrain", "--config", "run.json"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("lr_schedule"), "{err}");
    assert!(!dir.path().join("out/original.ulck").exists());

    let out_of_range = SMALL.replace(r#""forget_classes": [1]"#, r#""forget_classes": [4]"#);
    let (dir, _) = workspace(&out_of_range);
    assert_eq!(code(&run(dir.path(), &["pretrain", "--config", "run.json"])), 1);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &[])), 1);
    assert_eq!(code(&run(d.path(), &["pretrain"])), 1);
    assert_eq!(code(&run(d.path(), &["--help"])), 0);
    assert_eq!(code(&run(d.path(), &["--version"])), 0);
    let o = run(d.path(), &["unlearn", "--config", "x.json", "--method", "forget_harder"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("negative_gradient"));
}

#[test]
fn method_tags_name_the_outputs() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    ok(d, &["pretrain", "--config", "run.json"]);
    for m in ["random_label", "alpha_ablation", "temp_ablation"] {
        ok(d, &["unlearn", "--config", "run.json", "--method", m]);
        let report = read_json(&d.join(format!("out/report_{m}.json")));
        assert_eq!(report["method"], m);
        let ckpt = fs::read(d.join(format!("out/unlearned_{m}.ulck"))).unwrap();
        assert!(ckpt.windows(m.len()).any(|w| w == m.as_bytes()));
    }
}

#[test]
fn finetune_needs_the_remain_data_ack() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    ok(d, &["pretrain", "--config", "run.json"]);
    let o = run(d, &["unlearn", "--config", "run.json", "--method", "finetune"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--remain-data-ack"));
    assert!(!d.join("out/unlearned_finetune.ulck").exists());

    ok(d, &["unlearn", "--config", "run.json", "--method", "finetune", "--remain-data-ack"]);
    assert_eq!(read_json(&d.join("out/report_finetune.json"))["uses_remain_data"], true);
}

#[test]
fn missing_or_foreign_checkpoint_fails() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    let o = run(d, &["unlearn", "--config", "run.json"]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("original.ulck"));

    fs::write(d.join("junk.ulck"), b"not a checkpoint").unwrap();
    let o = run(d, &["unlearn", "--config", "run.json", "--checkpoint", "junk.ulck"]);
    assert_eq!(code(&o), 2);

    // A checkpoint trained on other data is refused.
    ok(d, &["pretrain", "--config", "run.json", "--out", "a"]);
    let other = SMALL.replace(r#""seed": 3"#, r#""seed": 4"#);
    fs::write(d.join("other.json"), other).unwrap();
    let o = run(d, &["unlearn", "--config", "other.json", "--checkpoint", "a/original.ulck"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fingerprint"));
}

#[test]
fn evaluate_scores_the_original_by_default() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    ok(d, &["pretrain", "--config", "run.json"]);
    ok(d, &["evaluate", "--config", "run.json"]);
    let r = read_json(&d.join("out/report_original.json"));
    assert_eq!(r["acc_ft"], r["original_acc_ft"]);
    assert_eq!(r["fingerprints"]["original"], r["fingerprints"]["unlearned"]);

    ok(d, &["unlearn", "--config", "run.json"]);
    fs::remove_file(d.join("out/report_delete.json")).unwrap();
    ok(d, &["evaluate", "--config", "run.json", "--checkpoint", "out/unlearned_delete.ulck"]);
    assert!(d.join("out/report_delete.json").exists());
}

#[test]
fn verify_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = ok(d.path(), &["verify"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 5, "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}

#[test]
fn compare_csv_round_trips_exactly() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    ok(d, &["pretrain", "--config", "run.json"]);
    ok(d, &["unlearn", "--config", "run.json"]);
    ok(d, &["unlearn", "--config", "run.json", "--method", "random_label"]);
    let o = ok(d, &["compare", "out/report_delete.json", "out/report_random_label.json"]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("H-Mean") && table.contains("random_label"), "{table}");

    let mut rdr = csv::Reader::from_path(d.join("out/compare.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let report = read_json(&d.join(format!("out/report_{}.json", &row[0])));
        for (i, key) in ["acc_f", "acc_r", "acc_ft", "acc_rt", "h_mean", "mia"].iter().enumerate() {
            let parsed: f64 = row[i + 1].parse().unwrap();
            assert_eq!(parsed.to_bits(), report[key].as_f64().unwrap().to_bits(), "{key}");
        }
    }

    assert_eq!(code(&run(d, &["compare"])), 1);
}

#[test]
fn compare_warns_on_mismatched_fingerprints() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    let other = SMALL.replace(r#""seed": 3"#, r#""seed": 4"#).replace(r#""out""#, r#""out2""#);
    fs::write(d.join("other.json"), other).unwrap();
    for cfg in ["run.json", "other.json"] {
        ok(d, &["pretrain", "--config", cfg]);
        ok(d, &["unlearn", "--config", cfg]);
    }
    let o = ok(d, &["compare", "out/report_delete.json", "out2/report_delete.json", "--out", "cmp"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert!(d.join("cmp/compare.csv").exists());
}

#[test]
fn out_flag_beats_env_beats_config() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    let status = bin(d).args(["pretrain", "--config", "run.json"]).env("ULCK_OUT", "from_env").status().unwrap();
    assert!(status.success());
    assert!(d.join("from_env/original.ulck").exists());
    assert!(!d.join("out").exists());

    let status = bin(d)
        .args(["pretrain", "--config", "run.json", "--out", "from_flag"])
        .env("ULCK_OUT", "from_env2")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(d.join("from_flag/original.ulck").exists());
    assert!(!d.join("from_env2").exists());

    ok(d, &["pretrain", "--config", "run.json"]);
    assert!(d.join("out/original.ulck").exists());
}

#[test]
fn seed_flag_changes_the_run() {
    let (dir, _) = workspace(SMALL);
    let d = dir.path();
    ok(d, &["pretrain", "--config", "run.json", "--out", "s0"]);
    ok(d, &["pretrain", "--config", "run.json", "--out", "s1", "--seed", "1"]);
    let a = fs::read(d.join("s0/original.ulck")).unwrap();
    let b = fs::read(d.join("s1/original.ulck")).unwrap();
    assert_ne!(a, b);
    assert_eq!(u64::from_le_bytes(b[28..36].try_into().unwrap()), 1);
}

#[test]
fn delete_forgets_on_the_desk_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = desk_config();
    let cfg = cfg.to_str().unwrap();
    let out = d.path().to_str().unwrap();
    ok(d.path(), &["pretrain", "--config", cfg, "--out", out]);
    ok(d.path(), &["unlearn", "--config", cfg, "--out", out]);
    let r = read_json(&d.path().join("report_delete.json"));
    let acc_ft = r["acc_ft"].as_f64().unwrap();
    assert!(acc_ft <= 1.0, "acc_ft {acc_ft}");
    assert!(r["acc_rt"].as_f64().unwrap() >= r["original_acc_rt"].as_f64().unwrap() - 2.0);
}
