use std::path::Path;
use std::process::{Command, Output};

fn dtvct(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtvct")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dtvct(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    dtvct(dir, args).status.code().unwrap()
}

/// Small phantom, sinogram and noisy sinogram in `dir`.
fn setup(dir: &Path) {
    ok(dir, &["phantom", "--size", "48", "--seed", "3", "-o", "x.tim", "--mask", "crack.tim"]);
    ok(dir, &["project", "-i", "x.tim", "--nangles", "32", "-o", "b.tsg"]);
    ok(dir, &["noise", "-i", "b.tsg", "--level", "0.01", "--seed", "2", "-o", "bn.tsg"]);
}

#[test]
fn pipeline_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d);
    ok(d, &["fbp", "-i", "bn.tsg", "-o", "fbp.tim", "--truth", "x.tim", "--metrics", "m.csv"]);
    ok(d, &["reconstruct", "-i", "bn.tsg", "--reg", "dtv", "--lambda", "0.002", "-o", "dtv.tim", "--truth", "x.tim", "--metrics", "m.csv"]);
    ok(d, &["split", "-i", "bn.tsg", "--K", "6", "--out-u", "u.tim", "--out-v", "v.tim"]);
    ok(d, &["decompose", "-i", "bn.tsg", "--theta", "20", "--out-u", "du.tim", "--out-v", "dv.tim", "--out-sum", "ds.tim", "--pgm"]);
    for f in ["fbp.tim", "dtv.tim", "u.tim", "v.tim", "ds.tim", "ds.pgm", "dtv.tim.manifest"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(d.join("m.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "method,params,psnr_db,iterations,wall_seconds");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("dtv,"));
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["phantom", "--size", "40", "--angle", "33", "--seed", "9", "-o", "a.tim"]);
    ok(d, &["phantom", "--config", "a.tim.manifest", "-o", "b.tim"]);
    assert_eq!(std::fs::read(d.join("a.tim")).unwrap(), std::fs::read(d.join("b.tim")).unwrap());
    // command-line flags override the config
    ok(d, &["phantom", "--config", "a.tim.manifest", "--seed", "10", "-o", "c.tim"]);
    assert_ne!(std::fs::read(d.join("a.tim")).unwrap(), std::fs::read(d.join("c.tim")).unwrap());
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d);
    for out in ["r1.tim", "r2.tim"] {
        ok(d, &["reconstruct", "-i", "bn.tsg", "--reg", "tv", "--lambda", "0.002", "-o", out]);
    }
    assert_eq!(std::fs::read(d.join("r1.tim")).unwrap(), std::fs::read(d.join("r2.tim")).unwrap());
}

#[test]
fn direction_is_estimated_from_noisy_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["phantom", "--kind", "fibre", "--size", "128", "-o", "x.tim"]);
    ok(d, &["project", "-i", "x.tim", "-o", "b.tsg"]);
    ok(d, &["noise", "-i", "b.tsg", "--level", "0.01", "-o", "bn.tsg"]);
    let out = ok(d, &["estimate-direction", "-i", "bn.tsg", "--scores", "s.csv"]);
    assert!(out.contains("theta_deg = 20\n"), "{out}");
    assert_eq!(std::fs::read_to_string(d.join("s.csv")).unwrap().lines().count(), 172);
}

#[test]
fn errors_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d);
    std::fs::write(d.join("junk.tsg"), b"nope").unwrap();
    assert_eq!(code(d, &["decompose", "-i", "bn.tsg", "--alpha", "3", "--out-u", "u", "--out-v", "v", "--out-sum", "s"]), 2);
    assert_eq!(code(d, &["split", "-i", "bn.tsg", "--K", "5", "--out-u", "u", "--out-v", "v"]), 2);
    assert_eq!(code(d, &["fbp", "-i", "bn.tsg", "-o", "f.tim", "--metrics", "m.csv"]), 2);
    assert_eq!(code(d, &["reconstruct", "-i", "bn.tsg", "--reg", "warp", "--lambda", "1", "-o", "r"]), 2);
    assert_eq!(code(d, &["fbp", "-i", "missing.tsg", "-o", "f.tim"]), 3);
    assert_eq!(code(d, &["fbp", "-i", "junk.tsg", "-o", "f.tim"]), 3);
    assert_eq!(code(d, &["project", "-i", "b.tsg", "-o", "p.tsg"]), 3);
}

#[test]
fn help_lists_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["--help"]);
    for sub in ["phantom", "project", "noise", "estimate-direction", "fbp", "reconstruct", "split", "decompose", "sweep-alpha", "sweep-k", "sweep-noise"] {
        assert!(out.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn noise_sweep_writes_one_row_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["sweep-noise", "--size", "64", "--levels", "0,0.1", "--runs", "3", "-o", "n.csv"]);
    let text = std::fs::read_to_string(d.join("n.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("noise_level,"));
}
