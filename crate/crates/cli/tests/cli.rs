use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use decompkan_cli::config::{resolve, DataRef, FileConfig};
use decompkan_cli::output::RunManifest;

fn decompkan(out: &Path, args: &[&str]) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_decompkan"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn write_csv(path: &Path, rows: usize, channels: usize) {
    let mut s = String::from("date");
    for c in 0..channels {
        s.push_str(&format!(",c{c}"));
    }
    s.push('\n');
    for t in 0..rows {
        s.push_str(&format!("2020-01-01 {t}"));
        for c in 0..channels {
            let v = ((t as f64) * 0.1 + c as f64).sin() + 0.001 * t as f64;
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

fn only_run(root: &Path, command: &str) -> PathBuf {
    let dirs: Vec<PathBuf> = fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(&format!("{command}-")))
        .collect();
    assert_eq!(dirs.len(), 1, "one {command} run in {}", root.display());
    dirs.into_iter().next().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const TINY: &[&str] = &[
    "--lookback", "48", "--horizon", "12", "--embed-dim", "4", "--kan-hidden", "4", "--stats-hidden", "4", "--epochs", "1", "--max-batches", "2",
];

#[test]
fn weather_defaults_come_from_the_registry() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("weather.csv");
    write_csv(&csv, 1000, 21);
    let flags = FileConfig {
        data: decompkan_cli::config::DataOverrides {
            path: Some(csv),
            ..Default::default()
        },
        ..Default::default()
    };
    let r = resolve(None, &flags).unwrap();
    assert_eq!(r.spec.dataset, "Weather");
    assert_eq!(r.spec.train.lr, 1e-3);
    assert!(r.spec.train.bidirectional);
    assert_eq!((r.spec.model.lookback, r.spec.model.horizon, r.spec.model.channels), (336, 96, 21));
}

#[test]
fn flags_beat_the_file_which_beats_dataset_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "[data]\nsynthetic = \"periodic\"\n[model]\nlookback = 64\nhorizon = 16\n[train]\nlr = 0.01\nbatch_size = 8\n",
    )
    .unwrap();
    let mut flags = FileConfig::default();
    flags.train.lr = Some(0.002);
    let r = resolve(Some(&cfg), &flags).unwrap();
    assert_eq!(r.spec.train.lr, 0.002);
    assert_eq!(r.spec.train.batch_size, 8);
    assert_eq!((r.spec.model.lookback, r.spec.model.horizon), (64, 16));
    assert!(matches!(r.data, DataRef::Synthetic { .. }));
    assert_eq!(r.file.unwrap().path, cfg);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    assert_eq!(decompkan(root, &["--help"]).0, 0);
    assert_eq!(decompkan(root, &["--version"]).0, 0);
    assert_eq!(decompkan(root, &["train", "--no-such-flag"]).0, 1);
    assert_eq!(decompkan(root, &["train", "--revin", "maybe"]).0, 1);
    // no data source
    assert_eq!(decompkan(root, &["train"]).0, 1);
    // unknown dataset name without a split convention
    let odd = root.join("odd.csv");
    write_csv(&odd, 400, 2);
    assert_eq!(decompkan(root, &["train", "--data", odd.to_str().unwrap()]).0, 1);
    let missing = root.join("missing.csv");
    let (code, _, err) = decompkan(root, &["train", "--data", missing.to_str().unwrap(), "--convention", "70/10/20"]);
    assert_eq!(code, 2, "{err}");
    // registry channel count disagrees with the file
    let short = root.join("weather.csv");
    write_csv(&short, 1000, 3);
    assert_eq!(decompkan(root, &["train", "--data", short.to_str().unwrap()]).0, 2);
    let (code, out, _) = decompkan(root, &["params", "--L", "336", "--H", "96", "--channels", "7"]);
    assert_eq!(code, 0);
    assert!(out.contains("1896404"), "{out}");
    assert_eq!(decompkan(root, &["gradcheck", "--configs", "1", "--inject-fault"]).0, 3);
}

#[test]
fn manifest_records_the_resolved_run() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("runs");
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[data]\nsynthetic = \"trending\"\nsynthetic_seed = 7\n[train]\nseed = 5\n").unwrap();
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--revin", "off"];
    args.extend_from_slice(TINY);
    let (code, out, err) = decompkan(&root, &args);
    assert_eq!(code, 0, "{err}");
    let dir = only_run(&root, "train");
    assert!(out.contains(&dir.display().to_string()));
    let m = manifest(&dir);
    assert_eq!(m.command, "train");
    assert_eq!(m.output_dir, dir);
    assert_eq!(m.config_file.as_deref(), Some(cfg.as_path()));
    assert_eq!(m.config_hash.as_ref().map(String::len), Some(64));
    let model = m.model.unwrap();
    assert_eq!((model.lookback, model.horizon, model.use_revin), (48, 12, false));
    assert_eq!(m.train.unwrap().seed, 5);
    match m.data.unwrap() {
        DataRef::Synthetic { spec } => assert_eq!(spec.seed, 7),
        other => panic!("unexpected data {other:?}"),
    }
    for f in ["checkpoint.bin", "metrics.json", "metrics.md", "epochs.csv", "record.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn eval_refuses_a_changed_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("runs");
    let csv = tmp.path().join("series.csv");
    write_csv(&csv, 300, 2);
    let mut args = vec!["train", "--data", csv.to_str().unwrap(), "--convention", "70/10/20"];
    args.extend_from_slice(TINY);
    let (code, _, err) = decompkan(&root, &args);
    assert_eq!(code, 0, "{err}");
    let ck = only_run(&root, "train").join("checkpoint.bin");
    let ck = ck.to_str().unwrap();
    let (code, _, err) = decompkan(&root, &["eval", "--checkpoint", ck, "--split", "val"]);
    assert_eq!(code, 0, "{err}");
    let m = manifest(&only_run(&root, "eval"));
    assert!(matches!(m.data, Some(DataRef::Csv { .. })));
    write_csv(&csv, 301, 2);
    assert_eq!(decompkan(&root, &["eval", "--checkpoint", ck]).0, 2);
}
