use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reviewjudge::context::{corpus_digest_of_file, save_store, EmbeddingStore};
use serde_json::Value;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reviews20.csv")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reviewjudge"))
        .args(args)
        .current_dir(dir)
        .env_remove("REVIEWJUDGE_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "dataset_path = {:?}\noutput_dir = \"out\"\nseed = 5\n\
         [w2v]\ndim = 16\nepochs = 2\nworkers = 1\n\
         [model]\nhidden = 6\nhead_hidden = [8]\nmax_epochs = 2\nbatch_size = 4\n{extra}",
        fixture().display().to_string()
    );
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stats_prints_table_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = run(&["stats", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("Books_5"));
    let stats = read_json(&dir.path().join("out/stats.json"));
    assert_eq!(stats["fake_total"], 10);
    assert_eq!(stats["real_total"], 10);
    assert_eq!(stats["categories"]["Books_5"]["fake_count"], 3);

    let o = run(
        &["stats", "--json-only", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success());
    let printed: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(printed["fake_total"], 10);
    assert!(!stdout(&o).contains("Total"));
}

#[test]
fn missing_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stats", "--dataset", "nope.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dataset not found"), "{}", stderr(&o));
}

#[test]
fn unknown_config_field_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "bogus_knob = 3\n");
    let o = run(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus_knob"), "{}", stderr(&o));
}

#[test]
fn bad_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stats", "--length-unit", "furlongs"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn preprocess_and_train_w2v_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let o = run(
        &["preprocess", "--stage", "raw", "--top", "5", "--config", c],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let freq: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(freq.as_array().unwrap().len(), 5);
    let cleaned = fs::read_to_string(dir.path().join("out/cleaned.jsonl")).unwrap();
    assert_eq!(cleaned.lines().count(), 20);

    let o = run(
        &["train-w2v", "--config", c, "--text", "vectors.txt"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["dim"], 16);
    assert!(dir.path().join("out/word_vectors.w2v").is_file());
    assert!(dir.path().join("vectors.txt").is_file());
}

#[test]
fn train_evaluate_classify_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let o = run(&["train", "--config", c], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(out.join("model.siam").is_file());
    let report = read_json(&out.join("train_report.json"));
    assert_eq!(report["epochs"].as_array().unwrap().len(), 2);
    let first_report = fs::read(out.join("train_report.json")).unwrap();
    let first_model = fs::read(out.join("model.siam")).unwrap();

    // determinism: same config and seed
    let o = run(&["train", "--config", c], dir.path());
    assert!(o.status.success());
    assert_eq!(
        fs::read(out.join("train_report.json")).unwrap(),
        first_report
    );
    assert_eq!(fs::read(out.join("model.siam")).unwrap(), first_model);

    let o = run(&["evaluate", "--config", c], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = read_json(&out.join("metrics.json"));
    assert!(metrics.get("sigmoid").is_some() && metrics.get("fuzzy").is_some());
    assert_eq!(metrics["sigmoid"], report["best_validation"]);
    assert!(metrics["fuzzy"]["correct_count"].is_u64());
    assert!(metrics["fuzzy"]["confident_count"].is_u64());

    let o1 = run(
        &[
            "classify",
            "--config",
            c,
            "Great product, I love it so much!",
        ],
        dir.path(),
    );
    let o2 = run(
        &[
            "classify",
            "--config",
            c,
            "Great product, I love it so much!",
        ],
        dir.path(),
    );
    assert!(o1.status.success(), "{}", stderr(&o1));
    assert_eq!(o1.stdout, o2.stdout);
    let v: Value = serde_json::from_str(stdout(&o1).trim()).unwrap();
    assert!(v["sigmoid_score"].as_f64().unwrap() > 0.0);
    assert!(matches!(v["label"].as_str(), Some("CG") | Some("OG")));

    let o = Command::new(env!("CARGO_BIN_EXE_reviewjudge"))
        .args(["classify", "--config", c, "the and of it is"])
        .current_dir(dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stderr(&o).contains("zero-vector"), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["empty"], true);
    assert!(v["sigmoid_score"].is_f64());

    // architecture mismatch between checkpoint and config
    let other = small_config(dir.path(), "");
    let text = fs::read_to_string(&other)
        .unwrap()
        .replace("hidden = 6", "hidden = 7");
    fs::write(&other, text).unwrap();
    let o = run(
        &["evaluate", "--config", other.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hidden 6 vs 7"), "{}", stderr(&o));
}

#[test]
fn corrupt_and_missing_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let o = run(
        &[
            "classify",
            "--config",
            c,
            "--checkpoint",
            "none.siam",
            "hello",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checkpoint not found"));

    assert!(run(&["train", "--config", c], dir.path()).status.success());
    let bad = dir.path().join("bad.siam");
    let mut bytes = fs::read(dir.path().join("out/model.siam")).unwrap();
    bytes.truncate(bytes.len() / 2);
    fs::write(&bad, bytes).unwrap();
    let o = run(
        &[
            "evaluate",
            "--config",
            c,
            "--checkpoint",
            bad.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("truncated"), "{}", stderr(&o));
}

#[test]
fn seed_flag_and_env_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let train = |extra: &[&str], env_seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_reviewjudge"));
        cmd.args(["train", "--config", c])
            .args(extra)
            .current_dir(dir.path())
            .env("RUST_LOG", "warn");
        match env_seed {
            Some(s) => cmd.env("REVIEWJUDGE_SEED", s),
            None => cmd.env_remove("REVIEWJUDGE_SEED"),
        };
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(dir.path().join("out/model.siam")).unwrap()
    };
    let flag = train(&["--seed", "11"], None);
    let env = train(&[], Some("11"));
    let file = train(&[], None);
    assert_eq!(flag, env);
    assert_ne!(flag, file);
}

#[test]
fn shared_weights_flag_changes_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let c = cfg.to_str().unwrap();
    let o = run(&["train", "--shared-weights", "--config", c], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let model = reviewjudge::siamese::load_model(dir.path().join("out/model.siam")).unwrap();
    assert!(model.config.shared_weights);
    assert!(model.params.branch_b.is_none());
}

#[test]
fn training_reads_a_context_store() {
    let dir = tempfile::tempdir().unwrap();
    let digest = corpus_digest_of_file(fixture()).unwrap();
    let mut store = EmbeddingStore::new(16, digest);
    for id in 0..20u64 {
        let v: Vec<f32> = (0..16)
            .map(|k| ((id * 16 + k) as f32 * 0.1).sin())
            .collect();
        store.insert(id, v).unwrap();
    }
    let store_path = dir.path().join("ctx.bin");
    save_store(&store, &store_path).unwrap();
    let cfg = small_config(
        dir.path(),
        &format!(
            "[context]\nstore = {:?}\n",
            store_path.display().to_string()
        ),
    );
    let c = cfg.to_str().unwrap();
    let o = run(&["train", "--config", c], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["evaluate", "--config", c, "--split", "all"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = read_json(&dir.path().join("out/metrics.json"));
    assert_eq!(metrics["provider"], "store");
    assert_eq!(metrics["sigmoid"]["count"], 20);

    // a store of the wrong width is rejected at load
    let wide = EmbeddingStore::new(32, digest);
    save_store(&wide, &store_path).unwrap();
    let o = run(&["train", "--config", c], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("context stage"), "{}", stderr(&o));
}
