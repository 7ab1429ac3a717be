use std::fs;
use std::path::Path;
use std::process::Command;

use dddm::checkpoint::Checkpoint;
use dddm::data::read_points_csv;
use dddm::micronet::{Architecture, ModelParams};
use dddm::sampler::initial_draws;
use dddm::trainer::TrainState;
use dddm::Schedule;

fn dddm(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_dddm")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "dddm {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, extra: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let text = format!(
        "dataset = mixture8\nn = 256\nhidden = 16,16\nembed_dim = 8\nsteps = 100\nbatch_size = 64\neval_count = 128\ncheckpoint_every = 2\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn zero_epochs_writes_initial_checkpoint_and_bare_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "c.txt", &format!("epochs = 0\nout_dir = {}\n", p(&out)));
    dddm(&["train", "--config", p(&cfg)]);
    let report = fs::read_to_string(out.join("train_report.csv")).unwrap();
    assert_eq!(report, "epoch,mean_loss,mean_drift,seconds,bank_bytes\n");
    let ck = Checkpoint::load(&out.join("checkpoint.bin")).unwrap();
    assert_eq!(ck.epoch(), 0);
    assert!(out.join("config.txt").exists());
    assert!(out.join("dataset.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let cfg = write_config(tmp.path(), &format!("{name}.txt"), &format!("epochs = 4\nout_dir = {}\n", p(&out)));
        dddm(&["train", "--config", p(&cfg)]);
        let ck = out.join("checkpoint.bin");
        let samples = out.join("samples.csv");
        dddm(&["sample", "--checkpoint", p(&ck), "--steps", "3", "--count", "50", "--seed", "4", "--out", p(&samples)]);
        dirs.push(out);
    }
    for f in ["train_report.csv", "checkpoint.bin", "checkpoint_00002.bin", "samples.csv", "dataset.csv", "heldout.csv"] {
        let a = fs::read(dirs[0].join(f)).unwrap();
        let b = fs::read(dirs[1].join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let report = fs::read_to_string(dirs[0].join("train_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 5);
}

#[test]
fn zero_checkpoint_samples_are_the_noise_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let arch = Architecture::new(2, 8, vec![8], 20).unwrap();
    let mut state = TrainState::new(arch.clone(), 4, 0, 0.9).unwrap();
    state.params = ModelParams::zeros(arch.clone());
    state.ema.shadow = ModelParams::zeros(arch);
    let ck = Checkpoint { schedule: Schedule::linear(20, 1e-4, 0.02).unwrap(), state };
    let path = tmp.path().join("zero.bin");
    ck.save(&path).unwrap();
    let out = tmp.path().join("s.csv");
    let traj = tmp.path().join("traj.csv");
    dddm(&["sample", "--checkpoint", p(&path), "--steps", "2", "--count", "30", "--seed", "9", "--out", p(&out), "--log-trajectory", p(&traj)]);
    let got = read_points_csv(&out).unwrap();
    let (_, noise) = initial_draws(9, 30, 2);
    assert_eq!(got, noise);

    let traj = fs::read_to_string(&traj).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("sample_id,iteration,x0,x1"));
    assert_eq!(lines.count(), 60);
}

#[test]
fn eval_of_identical_files_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let set = tmp.path().join("a.csv");
    fs::write(&set, "x0,x1\n0.5,1\n-2,3\n0.25,-0.75\n").unwrap();
    let report = tmp.path().join("r.json");
    dddm(&["eval", "--samples", p(&set), "--reference", p(&set), "--out", p(&report)]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["swd"].as_f64(), Some(0.0));
}

#[test]
fn train_sample_eval_oracle_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "c.txt", &format!("epochs = 3\nout_dir = {}\n", p(&out)));
    dddm(&["train", "--config", p(&cfg)]);
    let ck = out.join("checkpoint.bin");
    let samples = out.join("samples.csv");
    let svg = out.join("samples.svg");
    dddm(&["sample", "--checkpoint", p(&ck), "--count", "200", "--out", p(&samples), "--plot", p(&svg)]);
    let report = out.join("report.json");
    let stdout = dddm(&["eval", "--samples", p(&samples), "--reference", p(&out.join("heldout.csv")), "--out", p(&report), "--n-proj", "64"]);
    assert!(stdout.contains("swd"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["swd"].as_f64().unwrap().is_finite());
    assert!(json["mmd"].as_f64().unwrap().is_finite());
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let errors = out.join("errors.csv");
    let stdout = dddm(&["oracle-check", "--checkpoint", p(&ck), "--mu", "0,0", "--batch", "16", "--ode-steps", "20", "--out", p(&errors)]);
    assert!(stdout.starts_with("divergence"));
    assert_eq!(fs::read_to_string(&errors).unwrap().lines().count(), 17);
}

#[test]
fn help_lists_defaults() {
    let top = dddm(&["--help"]);
    for sub in ["train", "sample", "eval", "oracle-check"] {
        assert!(top.contains(sub));
    }
    let sample = dddm(&["sample", "--help"]);
    for flag in ["--steps", "--count", "--seed", "--out", "--log-trajectory"] {
        assert!(sample.contains(flag), "{flag}");
    }
    assert!(sample.contains("[default: 1]"));
    assert!(sample.contains("[default: 4096]"));
    let oracle = dddm(&["oracle-check", "--help"]);
    assert!(oracle.contains("[default: 2,0]"));
    assert!(oracle.contains("[default: 1024]"));
    assert!(oracle.contains("[default: 10]"));
    let eval = dddm(&["eval", "--help"]);
    assert!(eval.contains("[default: 256]"));
    assert!(eval.contains("[default: report.json]"));
}

#[test]
fn bad_config_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.txt");
    fs::write(&cfg, "epochs = many\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dddm")).args(["train", "--config", p(&cfg)]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}
