use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gleak_cli::config::ExperimentConfig;
use gleak_cli::report::{strip_timings, AuditReport};
use serde_json::Value;

const CONFIG: &str = r#"
name = "cli-test"
seeds = [3, 4]

[dataset]
source = "sbm"

[dataset.sbm]
block_sizes = [60, 60]
p_intra = 0.1
p_inter = 0.01
feature_dim = 8

[target.gnn]
epochs = 30

[target.walk]
walks_per_node = 4
walk_length = 15
window = 4
dim = 8
epochs = 1

[attacks.membership]
modes = ["confidence", "whitebox"]

[attacks.membership.shadow.classifier]
epochs = 30

[attacks.reconstruction]
source = "gae"

[attacks.reconstruction.autoencoder]
epochs = 20

[attacks.attribute]
null_shuffles = 2

[attacks.attribute.classifier]
epochs = 30
"#;

fn gleak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gleak"))
        .args(args)
        .output()
        .expect("gleak binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_without_timings(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    strip_timings(&mut v);
    v
}

#[test]
fn run_is_deterministic_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let o = gleak(&["--config", s(&cfg), "--out", s(out), "--jobs", jobs, "run"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ra = json_without_timings(&a.join("report.json"));
    let rb = json_without_timings(&b.join("report.json"));
    assert_eq!(ra, rb);
    let seeds: Vec<u64> = ra["seeds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![3, 4]);
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = gleak(&["--config", s(&cfg), "config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed = String::from_utf8(o.stdout).unwrap();
    let original = ExperimentConfig::load(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_toml(&echoed).unwrap(), original);
}

#[test]
fn train_then_attack_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run_dir = dir.path().join("run");
    let art_dir = dir.path().join("artifacts");
    let o = gleak(&["--config", s(&cfg), "--out", s(&run_dir), "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = gleak(&["--config", s(&cfg), "--out", s(&art_dir), "train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // The attack reads the configuration saved by `train`.
    let o = gleak(&[
        "--out",
        s(&art_dir),
        "attack",
        "membership",
        "--mode",
        "confidence",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let run = AuditReport::load(&run_dir.join("report.json")).unwrap();
    let attack = AuditReport::load(&art_dir.join("attack-membership-confidence.json")).unwrap();
    assert_eq!(run.seeds.len(), attack.seeds.len());
    for (r, a) in run.seeds.iter().zip(&attack.seeds) {
        let from_run: Vec<_> = r
            .membership
            .iter()
            .filter(|m| m.attack == "confidence")
            .collect();
        assert_eq!(from_run.len(), 1);
        assert_eq!(a.membership.len(), 1);
        assert_eq!(from_run[0], &a.membership[0]);
        assert_eq!(r.target, a.target);
    }

    let o = gleak(&["--out", s(&art_dir), "attack", "attribute"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let attack = AuditReport::load(&art_dir.join("attack-attribute-walk.json")).unwrap();
    for (r, a) in run.seeds.iter().zip(&attack.seeds) {
        assert_eq!(r.attribute, a.attribute);
        assert!(a.membership.is_empty() && a.reconstruction.is_none());
    }
}

#[test]
fn decoder_modes_are_recorded_separately() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = gleak(&["--config", s(&cfg), "--out", s(&out), "train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for decoder in ["inner-product", "bilinear"] {
        let o = gleak(&[
            "--out",
            s(&out),
            "attack",
            "reconstruct",
            "--decoder",
            decoder,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ip = AuditReport::load(&out.join("attack-reconstruction-gae-inner_product.json")).unwrap();
    let bl = AuditReport::load(&out.join("attack-reconstruction-gae-bilinear.json")).unwrap();
    let ip = ip.seeds[0].reconstruction.as_ref().unwrap();
    let bl = bl.seeds[0].reconstruction.as_ref().unwrap();
    assert_eq!(ip.decoder, "inner_product");
    assert_eq!(bl.decoder, "bilinear");
    assert_eq!(ip.decoder_parameters, 0);
    assert!(bl.decoder_parameters > 0);
    assert!(ip.auc.is_finite() && bl.auc.is_finite());
}

#[test]
fn report_aggregates_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut files = Vec::new();
    for seed in ["11", "12", "13"] {
        let out = dir.path().join(format!("seed{seed}"));
        let o = gleak(&["--config", s(&cfg), "--seed", seed, "--out", s(&out), "run"]);
        assert!(o.status.success(), "{}", stderr(&o));
        files.push(out.join("report.json"));
    }
    let summary_dir = dir.path().join("summary");
    let mut args = vec!["report", "--out", s(&summary_dir)];
    args.extend(files.iter().map(|f| s(f)));
    let o = gleak(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let values: Vec<f64> = files
        .iter()
        .map(|f| {
            let r = AuditReport::load(f).unwrap();
            r.seeds[0].flat_metrics()["membership/confidence/auc"]
        })
        .collect();
    let mean = values.iter().sum::<f64>() / 3.0;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2.0).sqrt();

    let csv = std::fs::read_to_string(summary_dir.join("summary.csv")).unwrap();
    let row = csv
        .lines()
        .find(|l| l.starts_with("membership/confidence/auc,"))
        .expect("auc row present");
    let cols: Vec<&str> = row.split(',').collect();
    assert!((cols[1].parse::<f64>().unwrap() - mean).abs() < 1e-12);
    assert!((cols[2].parse::<f64>().unwrap() - std).abs() < 1e-12);
    assert_eq!(cols[3], "3");

    let per_seed = std::fs::read_to_string(summary_dir.join("per_seed.csv")).unwrap();
    for seed in ["11", "12", "13"] {
        assert!(per_seed
            .lines()
            .any(|l| l.contains(&format!(",{seed},membership/confidence/auc,"))));
    }
}

#[test]
fn invalid_config_exits_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("p_intra = 0.1", "p_intra = 1.5"),
    );
    let o = gleak(&["--config", s(&cfg), "--out", s(dir.path()), "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dataset.sbm"), "{}", stderr(&o));

    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("null_shuffles = 2", "null_shufles = 2"),
    );
    let o = gleak(&["--config", s(&cfg), "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("attacks.attribute.null_shufles"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_artifact_names_file_and_producer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = gleak(&[
        "--config",
        s(&cfg),
        "--out",
        s(dir.path()),
        "attack",
        "membership",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("edges.txt"), "{err}");
    assert!(err.contains("gleak train"), "{err}");

    // Artifacts trained for the gae source carry no released walk embeddings.
    let o = gleak(&["--config", s(&cfg), "--out", s(dir.path()), "train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = gleak(&[
        "--out",
        s(dir.path()),
        "attack",
        "reconstruct",
        "--source",
        "walk",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("reconstruction_target.csv"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn failing_stage_is_recorded_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // Without edges the autoencoder has nothing to fit, while membership
    // inference still runs.
    let data = dir.path().join("edgeless");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join("edges.txt"), "").unwrap();
    let mut features = String::new();
    let mut labels = String::new();
    for i in 0..80 {
        let c = i % 2;
        features.push_str(&format!(
            "{},{},{}\n",
            c as f64 * 2.0 - 1.0,
            (i % 7) as f64 / 7.0,
            (i % 5) as f64 / 5.0
        ));
        labels.push_str(&format!("{i},{c}\n"));
    }
    std::fs::write(data.join("features.csv"), features).unwrap();
    std::fs::write(data.join("labels.csv"), labels).unwrap();
    let text = CONFIG.replace(
        "source = \"sbm\"",
        &format!("source = \"files\"\npath = {:?}", s(&data)),
    );
    let text = text.replace(
        "[attacks.attribute]\nnull_shuffles = 2\n\n[attacks.attribute.classifier]\nepochs = 30\n",
        "",
    );
    let cfg = write_config(dir.path(), &text);
    let o = gleak(&["--config", s(&cfg), "--out", s(dir.path()), "run"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let r = AuditReport::load(&dir.path().join("report.json"))
        .expect("report written despite stage failure");
    for seed in &r.seeds {
        assert_eq!(seed.edges, 0);
        assert!(
            seed.errors.iter().any(|e| e.stage == "reconstruction"),
            "{:?}",
            seed.errors
        );
        assert!(seed.reconstruction.is_none());
        assert_eq!(seed.membership.len(), 2);
    }
    assert!(stderr(&o).contains("reconstruction failed"));
}

#[test]
fn sweep_writes_a_table_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("seeds = [3, 4]", "seeds = [5]"));
    let out = dir.path().join("sweep");
    let o = gleak(&[
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "sweep",
        "layers",
        "2",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep-layers.csv")).unwrap();
    assert!(csv.starts_with("layers,metric,mean,std,n\n"));
    for l in ["2", "3"] {
        assert!(csv
            .lines()
            .any(|row| row.starts_with(&format!("{l},membership/confidence/auc,"))));
        let r = AuditReport::load(
            &out.join("sweep-layers")
                .join(format!("L{l}"))
                .join("report.json"),
        )
        .unwrap();
        assert_eq!(r.config.target.gnn.num_layers.to_string(), l);
        assert!(r.seeds[0].reconstruction.is_none());
    }
}
