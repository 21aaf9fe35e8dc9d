use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn vologan(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vologan")).args(args).current_dir(cwd).output().expect("spawn vologan")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn vrgd_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(vrgd_files(&p));
        } else if p.extension().is_some_and(|x| x == "vrgd") {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn synth_writes_both_domains() {
    let dir = tempfile::tempdir().unwrap();
    let o = vologan(&["dataset-synth", "--out", "d", "--n", "8", "--size", "64", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(vrgd_files(&dir.path().join("d")).len(), 16);
    assert!(dir.path().join("d/synthetic.txt").is_file());
    assert!(dir.path().join("d/target.txt").is_file());
}

#[test]
fn synth_rejects_sizes_the_generator_cannot_halve() {
    let dir = tempfile::tempdir().unwrap();
    let o = vologan(&["dataset-synth", "--out", "d", "--n", "8", "--size", "60", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("multiple of"));
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = vologan(&["dataset-synth", "--out", out, "--n", "4", "--size", "32", "--seed", "7"], dir.path());
        assert_eq!(code(&o), 0);
    }
    let (a, b) = (vrgd_files(&dir.path().join("a")), vrgd_files(&dir.path().join("b")));
    assert_eq!(a.len(), 8);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let o = vologan(&["dataset-synth", "--out", "c", "--n", "4", "--size", "32", "--seed", "8"], dir.path());
    assert_eq!(code(&o), 0);
    let c = vrgd_files(&dir.path().join("c"));
    assert!(a.iter().zip(&c).any(|(x, y)| fs::read(x).unwrap() != fs::read(y).unwrap()));
}

#[test]
fn inspect_reports_counts_against_the_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = vologan(&["inspect", "--summary"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for n in ["39390917", "14276", "9385686", "5640", "37848917", "10779522"] {
        assert!(text.contains(n), "missing {n} in\n{text}");
    }
    let o = vologan(&["inspect", "--config", repo_config("toy.json").to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("layer"));
}

#[test]
fn gradcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = vologan(&["gradcheck", "--bits", "64", "--filter", "op."], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("0 failed"));
    assert_eq!(code(&vologan(&["gradcheck", "--bits", "32"], dir.path())), 1);
    assert_eq!(code(&vologan(&["gradcheck", "--filter", "no-such-case"], dir.path())), 1);
}

#[test]
fn usage_and_io_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&vologan(&["train", "--config", "x.json", "--frobnicate"], dir.path())), 1);
    assert_eq!(code(&vologan(&["train", "--config", "missing.json"], dir.path())), 2);
    assert_eq!(code(&vologan(&["--help"], dir.path())), 0);
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&vologan(&["train", "--config", "bad.json"], dir.path())), 1);
    let o = vologan(&["translate", "--checkpoint", "nowhere", "--input", "m.txt", "--out", "o"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn shipped_configs_load() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["toy.json", "full.json"] {
        let o = vologan(&["inspect", "--summary", "--config", repo_config(name).to_str().unwrap()], dir.path());
        assert_eq!(code(&o), 0, "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

/// The toy config shrunk to 32×32 and two epochs, with absolute paths.
fn tiny_config(root: &Path) -> Value {
    let mut cfg: Value = serde_json::from_str(&fs::read_to_string(repo_config("toy.json")).unwrap()).unwrap();
    cfg["generator"]["input_size"] = json!([32, 32]);
    cfg["generator"]["levels"] = json!(3);
    cfg["generator"]["base_channels"] = json!(4);
    cfg["discriminator"]["input_size"] = json!([32, 32]);
    cfg["discriminator"]["base_channels"] = json!(4);
    for s in ["gen_schedule", "disc_schedule"] {
        cfg[s]["warmup_epochs"] = json!(1);
        cfg[s]["total_epochs"] = json!(2);
    }
    cfg["loss"]["epoch_sw"] = json!(1);
    cfg["epochs"] = json!(2);
    cfg["checkpoint_every"] = json!(1);
    cfg["test_every"] = json!(1);
    cfg["data"]["synthetic"] = json!(root.join("d/synthetic.txt"));
    cfg["data"]["target"] = json!(root.join("d/target.txt"));
    cfg["run_dir"] = json!(root.join("run"));
    cfg
}

#[test]
fn train_translate_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let run = |args: &[&str]| {
        let o = vologan(args, root);
        assert_eq!(code(&o), 0, "{args:?}\n{}\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    run(&["dataset-synth", "--out", "d", "--n", "10", "--size", "32", "--seed", "3"]);
    fs::write(root.join("tiny.json"), serde_json::to_string_pretty(&tiny_config(root)).unwrap()).unwrap();

    let text = run(&["train", "--config", "tiny.json", "--epochs", "1"]);
    assert!(text.contains("epoch   1/1"), "{text}");
    let text = run(&["train", "--config", "tiny.json", "--resume"]);
    assert!(text.contains("resuming from"), "{text}");
    assert!(text.contains("epoch   2/2"), "{text}");
    assert!(!text.contains("epoch   1/2"), "{text}");
    let metrics = fs::read_to_string(root.join("run/metrics.csv")).unwrap();
    assert!(metrics.lines().count() > 2);

    // a changed seed is not a resumable config
    let o = vologan(&["train", "--config", "tiny.json", "--resume", "--seed", "9"], root);
    assert_eq!(code(&o), 1);

    run(&["translate", "--checkpoint", "run", "--input", "d/synthetic.txt", "--out", "tr"]);
    assert_eq!(vrgd_files(&root.join("tr/target")).len(), 10);
    assert!(root.join("tr/target.txt").is_file());
    let o = vologan(&["translate", "--checkpoint", "run", "--input", "d/target.txt", "--out", "tr2"], root);
    assert_eq!(code(&o), 1);

    let text = run(&["eval", "pca", "--run-dir", "run", "--n", "6", "--k", "3"]);
    for stage in ["untranslated", "before", "after"] {
        assert!(text.contains(&format!("domain_distance {stage}")), "{text}");
        assert!(root.join(format!("run/eval/pca_{stage}.csv")).is_file());
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(root.join("run/eval/pca.json")).unwrap()).unwrap();
    assert_eq!(summary["pca_fit"], "union");
    assert_eq!(summary["n_per_set"], 6);

    let text = run(&["eval", "hist", "--manifest", "d/target.txt", "--bins", "8"]);
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("bin,lo,hi,r,g,b,d\n"));
    run(&["eval", "pointcloud", "--manifest", "d/synthetic.txt", "--checkpoint", "run", "--out", "c.ply"]);
    assert!(fs::read_to_string(root.join("c.ply")).unwrap().starts_with("ply\n"));
    let text = run(&["eval", "layout", "--checkpoint", "run", "--manifest", "d/target.txt"]);
    assert!(text.starts_with("layout map"));
}
