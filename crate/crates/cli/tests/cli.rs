use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use linlight::image_io::write_pfm;
use linlight::tensor::Tensor;
use tempfile::TempDir;

const DATA_CFG: &str = "res = 16\nimage_size = 32\nidentities = 1\nposes = 2\ncameras = 2\nrig_lights = 30\nsubsurface = 0.3\nseed = 11\n";
const TRAIN_CFG: &str = "geo_width = 8\nframes = all\neval_every = 0\nprobe_frames = 2\nlr = 0.001\n";

fn linlight(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linlight"))
        .current_dir(dir)
        .env_remove("LL_SEED")
        .env_remove("LL_CONFIG")
        .env_remove("LL_MODE")
        .env_remove("LL_RES")
        .args(args)
        .output()
        .expect("spawn linlight")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = linlight(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_line(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with("error: ")).collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    lines[0].to_string()
}

fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("data.cfg"), DATA_CFG).unwrap();
    fs::write(dir.path().join("train.cfg"), TRAIN_CFG).unwrap();
    ok(dir.path(), &["--config", "data.cfg", "gen-data", "--out", "ds"]);
    dir
}

fn trained() -> TempDir {
    let dir = workspace();
    ok(
        dir.path(),
        &["--config", "train.cfg", "train", "--data", "ds", "--out", "net.ckpt", "--iterations", "5"],
    );
    dir
}

#[test]
fn gen_data_is_deterministic() {
    let dir = workspace();
    let p = dir.path();
    ok(p, &["--config", "data.cfg", "gen-data", "--out", "again"]);
    for entry in fs::read_dir(p.join("ds/id00")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(p.join("ds/id00").join(&name)).unwrap(),
            fs::read(p.join("again/id00").join(&name)).unwrap(),
            "{name:?}"
        );
    }
    assert_eq!(fs::read(p.join("ds/manifest.csv")).unwrap(), fs::read(p.join("again/manifest.csv")).unwrap());
}

#[test]
fn environment_variables_set_global_flags() {
    let dir = workspace();
    let p = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_linlight"))
        .current_dir(p)
        .env("LL_CONFIG", "data.cfg")
        .env("LL_SEED", "5")
        .args(["gen-data", "--out", "seeded"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(p.join("seeded/dataset.txt")).unwrap();
    assert!(text.lines().any(|l| l.replace(' ', "") == "seed=5"), "{text}");
    assert_ne!(
        fs::read(p.join("seeded/id00/p000_c00_full.pfm")).unwrap(),
        fs::read(p.join("ds/id00/p000_c00_full.pfm")).unwrap()
    );
}

#[test]
fn bad_config_key_is_named_in_one_error_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.cfg"), "res = 16\nbogus_key = 1\n").unwrap();
    let out = linlight(dir.path(), &["--config", "bad.cfg", "gen-data", "--out", "x"]);
    let line = error_line(&out);
    assert!(line.starts_with("error: command=gen-data message="), "{line}");
    assert!(line.contains("bogus_key"), "{line}");
    assert!(!dir.path().join("x").exists());
}

#[test]
fn train_resume_appends_metrics() {
    let dir = trained();
    let p = dir.path();
    ok(
        p,
        &[
            "--config", "train.cfg", "train", "--data", "ds", "--out", "net2.ckpt", "--metrics", "m.csv",
            "--resume", "net.ckpt", "--iterations", "8",
        ],
    );
    let csv = fs::read_to_string(p.join("m.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("iteration,lr,loss"));
    assert_eq!(lines.len(), 1 + 3);
    assert!(lines[1].starts_with("5,"));
}

#[test]
fn res_mismatch_is_rejected() {
    let dir = workspace();
    let out = linlight(dir.path(), &["--res", "32", "train", "--data", "ds", "--out", "n.ckpt", "--iterations", "1"]);
    assert!(error_line(&out).contains("resolution"));
}

#[test]
fn audit_render_and_eval() {
    let dir = trained();
    let p = dir.path();
    let audit = ok(p, &["audit-linear", "--checkpoint", "net.ckpt", "--trials", "20"]);
    assert!(audit.contains("PASS"), "{audit}");

    for branch in ["neural", "physical", "oracle"] {
        ok(
            p,
            &["render", "--checkpoint", "net.ckpt", "--data", "ds", "--frame", "p000_c00_full", "--branch", branch, "--out", "r.png"],
        );
        assert!(p.join("r.png").metadata().unwrap().len() > 0);
    }

    ok(p, &["eval", "--checkpoint", "net.ckpt", "--data", "ds", "--split", "heldout-pose", "--out", "a.csv"]);
    ok(p, &["eval", "--checkpoint", "net.ckpt", "--data", "ds", "--split", "heldout-pose", "--out", "b.csv"]);
    let a = fs::read_to_string(p.join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(p.join("b.csv")).unwrap());
    // 1 held-out pose x 2 cameras x 2 kinds
    assert_eq!(a.lines().count(), 1 + 4);
    assert!(a.lines().skip(1).all(|l| l.starts_with("p001_")));

    ok(p, &["eval", "--data", "ds", "--split", "all", "--predict", "ground-truth", "--out", "gt.csv"]);
    let gt = fs::read_to_string(p.join("gt.csv")).unwrap();
    for line in gt.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[5], "100.000000");
        assert_eq!(cols[6], "1.000000");
    }

    ok(p, &["--seed", "2", "eval", "--checkpoint", "net.ckpt", "--data", "ds", "--split", "all", "--samples", "3", "--out", "s.csv"]);
    assert_eq!(fs::read_to_string(p.join("s.csv")).unwrap().lines().count(), 4);

    let out = linlight(p, &["eval", "--data", "ds", "--split", "sideways", "--out", "x.csv"]);
    assert!(error_line(&out).contains("sideways"));
}

#[test]
fn relight_env_verifies_the_sum_of_lights() {
    let dir = trained();
    let p = dir.path();
    let (w, h) = (16, 8);
    let data = (0..3 * w * h).map(|i| 0.2 + (i % 7) as f32 * 0.1).collect();
    write_pfm(&p.join("env.pfm"), &Tensor::from_vec(&[3, h, w], data).unwrap()).unwrap();
    let out = ok(
        p,
        &["relight-env", "--checkpoint", "net.ckpt", "--data", "ds", "--env", "env.pfm", "--n", "32", "--verify", "--out", "e.pfm"],
    );
    assert!(out.contains("relative error"), "{out}");
    assert!(p.join("e.pfm").exists());
}

#[test]
fn refine_writes_material_maps() {
    let dir = trained();
    let p = dir.path();
    let out = ok(p, &["refine", "--data", "ds", "--checkpoint", "net.ckpt", "--iterations", "3", "--out", "mat"]);
    assert!(out.contains("roughness MAE"));
    for f in ["albedo.pfm", "roughness.pfm", "displacement.pfm"] {
        assert!(p.join("mat").join(f).exists(), "{f}");
    }
}

#[test]
fn bench_reports_each_stage() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["bench", "--res", "16", "--lights", "2", "--image-size", "32", "--repeats", "1"]);
    let stages: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    for s in ["visibility", "features", "network", "rasterize"] {
        assert!(stages.contains(&s), "{out}");
    }
}

#[test]
fn missing_checkpoint_fails_cleanly() {
    let dir = TempDir::new().unwrap();
    let out = linlight(dir.path(), &["audit-linear", "--checkpoint", "nope.ckpt"]);
    assert!(error_line(&out).starts_with("error: command=audit-linear"));
}
