use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dgpic::results::{mean_std, ResultTable, CSV_HEADER};

const TINY: &str = r#"
[benchmark]
seed = 11
train_per_task = 3
test_per_task = 2
n_points = 128

[benchmark.task_params]
sparse_count = 32

[model]
feature_dim = 16
patch_count = 8
patch_size = 16
n_blocks = 1
n_heads = 2
embed_hidden = 16
batch_size = 8
epochs = 2

[engine]
modes = ["none", "full"]

[run]
seeds = [1, 2]
out_dir = "out"
"#;

fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, format!("{TINY}{extra}")).unwrap();
    (dir, cfg)
}

fn dgpic(args: &[&str], cfg: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgpic"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .env("DGPIC_THREADS", "1")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cfg: &Path) -> String {
    let out = dgpic(args, cfg);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_pipeline_is_deterministic() {
    let (dir, cfg) = setup("");
    let out = dir.path().join("out");
    ok(&["gen-data"], &cfg);
    let corpus = read_tree(&out.join("data"));
    let manifests = corpus.iter().filter(|(p, _)| p.ends_with("manifest.jsonl")).count();
    assert_eq!(manifests, 3 * 2 + 1);
    let clouds = corpus.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "xyz")).count();
    // (3 sources x (3 train + 2 test) + 2 target test) per task, 3 tasks, 2 files per pair
    assert_eq!(clouds, (3 * 5 + 2) * 3 * 2);
    let refused = dgpic(&["gen-data"], &cfg);
    assert_eq!(code(&refused), 3);
    ok(&["gen-data", "--force"], &cfg);
    assert_eq!(read_tree(&out.join("data")), corpus, "regenerated corpus differs");

    ok(&["train"], &cfg);
    let loss = fs::read_to_string(out.join("seed-1/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 2);
    let ckpt = fs::read(out.join("seed-1/model.dgpm")).unwrap();
    assert_eq!(&ckpt[..4], b"DGPM");
    ok(&["train", "--seed", "1"], &cfg);
    assert_eq!(fs::read(out.join("seed-1/model.dgpm")).unwrap(), ckpt);
    assert_eq!(fs::read_to_string(out.join("seed-1/loss.csv")).unwrap(), loss);

    let est = ok(&["estimate-prototypes"], &cfg);
    assert!(est.contains("3 source domains, 9 prototypes"), "{est}");
    let store = fs::read(out.join("seed-2/prototypes.dgpc")).unwrap();
    assert_eq!(&store[..4], b"DGPC");

    let printed = ok(&["eval", "--self-check"], &cfg);
    assert!(printed.contains("self-check"));
    let first = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(first.starts_with(CSV_HEADER));
    let table = ResultTable::load(&out.join("results.csv")).unwrap();
    assert_eq!(table.rows.len(), 2 * 3 * 2);
    assert!(table.rows.iter().all(|r| r.mean_cd.is_finite() && r.mean_cd >= 0.0 && r.n_samples == 2));
    ok(&["eval"], &cfg);
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap(), first);
}

#[test]
fn ablation_covers_every_mode_and_aggregates_like_a_spreadsheet() {
    let (dir, cfg) = setup("");
    let out = dir.path().join("out");
    for cmd in ["gen-data", "train", "estimate-prototypes"] {
        ok(&[cmd], &cfg);
    }
    let printed = ok(&["ablate"], &cfg);
    assert!(printed.contains("ranking"));
    let text = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let table = ResultTable::load(&out.join("ablation.csv")).unwrap();
    assert_eq!(table.rows.len(), 9 * 3 * 2);
    assert!(text.lines().any(|l| l.starts_with("none,")));

    // recompute mean and sample std straight from the CSV text
    let mut cells: std::collections::BTreeMap<(String, String), Vec<f64>> = Default::default();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        cells.entry((f[0].into(), f[1].into())).or_default().push(f[3].parse().unwrap());
    }
    let agg = table.aggregate();
    assert_eq!(agg.len(), cells.len());
    for a in &agg {
        let v = &cells[&(a.mode.to_string(), a.task.as_str().to_string())];
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((a.mean - mean).abs() <= 1e-15 * mean.abs().max(1.0));
        assert!((a.std - std).abs() <= 1e-12 * std.max(1e-12));
        assert_eq!(mean_std(v).0, a.mean);
    }
}

#[test]
fn error_exit_codes() {
    let (dir, cfg) = setup("");
    // no corpus yet
    let missing = dgpic(&["train"], &cfg);
    assert_eq!(code(&missing), 3, "{}", String::from_utf8_lossy(&missing.stderr));
    let bad_mode = dgpic(&["eval", "--modes", "none,warp"], &cfg);
    assert_eq!(code(&bad_mode), 2);
    let msg = String::from_utf8_lossy(&bad_mode.stderr);
    assert!(msg.contains("dual-average-all") && msg.contains("macro-only"), "{msg}");
    let no_config = dgpic(&["eval"], &dir.path().join("nope.toml"));
    assert_eq!(code(&no_config), 2);
    let usage = Command::new(env!("CARGO_BIN_EXE_dgpic")).arg("train").output().unwrap();
    assert_eq!(code(&usage), 2);
    let (_d2, bad_cfg) = setup("\n[extra]\nx = 1\n");
    assert_eq!(code(&dgpic(&["gen-data"], &bad_cfg)), 2);
}

#[test]
fn stale_prototypes_are_refused() {
    let (dir, cfg) = setup("");
    for cmd in ["gen-data", "train", "estimate-prototypes"] {
        ok(&[cmd, "--seed", "1"], &cfg);
    }
    let store = dir.path().join("out/seed-1/prototypes.dgpc");
    // swap in a store produced by a different checkpoint
    let other = dir.path().join("other");
    fs::create_dir_all(&other).unwrap();
    fs::write(other.join("exp.toml"), TINY.replace("out_dir = \"out\"", "out_dir = \"o2\"")).unwrap();
    let cfg2 = other.join("exp.toml");
    for cmd in ["gen-data", "train", "estimate-prototypes"] {
        ok(&[cmd, "--seed", "2"], &cfg2);
    }
    fs::copy(other.join("o2/seed-2/prototypes.dgpc"), &store).unwrap();
    let stale = dgpic(&["estimate-prototypes", "--seed", "1"], &cfg);
    assert_eq!(code(&stale), 3);
    assert!(String::from_utf8_lossy(&stale.stderr).contains("stale"));
    assert_eq!(code(&dgpic(&["eval", "--seed", "1"], &cfg)), 3);
    ok(&["estimate-prototypes", "--seed", "1", "--force"], &cfg);
    ok(&["eval", "--seed", "1"], &cfg);

    let mut bytes = fs::read(&store).unwrap();
    bytes[50] ^= 0xff;
    fs::write(&store, bytes).unwrap();
    let corrupt = dgpic(&["eval", "--seed", "1"], &cfg);
    assert_eq!(code(&corrupt), 3);
    assert!(String::from_utf8_lossy(&corrupt.stderr).contains("checksum"));
}

#[test]
fn worker_count_does_not_change_training() {
    let (dir, cfg) = setup("");
    ok(&["gen-data"], &cfg);
    ok(&["train", "--seed", "1"], &cfg);
    let one = fs::read(dir.path().join("out/seed-1/model.dgpm")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dgpic"))
        .args(["train", "--seed", "1", "--config"])
        .arg(&cfg)
        .env("DGPIC_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(dir.path().join("out/seed-1/model.dgpm")).unwrap(), one);
}
