use std::fs;
use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("surfwave-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const WORKED: &str = r#"
[state]
u0 = [0.3, 0.0, 0.0]
B0 = [1.0, 0.0, 0.0]
H0 = [0.0, 1.0, 0.0]
E3_0 = 0.5
nu = 0.01

[frequency]
p = 1
q = 0
l = 8

[solver]
J = 2
K = 8
dt = 2e-3
t_end = 0.02

[front]
modes = [[1, 0, 1, 0.05, 0.0], [0, 1, 1, 0.05, 0.0]]

[grids]
nx = 32
nz = 16
ls = [8, 16, 32]
snapshots = 4
"#;

fn write_config(dir: &PathBuf, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{body}\n[output]\ndirectory = {:?}\nsnapshot_every = 2\n", dir.join("out"))).unwrap();
    path
}

fn surfwave(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_surfwave")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn run_json(cmd: &str, cfg: &PathBuf) -> Value {
    let (code, stdout, stderr) = surfwave(&[cmd, "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{stderr}");
    serde_json::from_str(&stdout).unwrap()
}

#[test]
fn help_and_unknown_commands() {
    let (code, out, _) = surfwave(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["stability", "roots", "kernel-check", "solve", "reconstruct", "residual-sweep", "rectification"] {
        assert!(out.contains(cmd), "{cmd}");
    }
    assert_eq!(surfwave(&["frobnicate"]).0, 1);
    assert_eq!(surfwave(&["--threads", "0", "kernel-check"]).0, 1);
}

#[test]
fn missing_field_is_named() {
    let dir = workdir("missing");
    let cfg = write_config(&dir, &WORKED.replace("nu = 0.01\n", ""));
    let (code, _, err) = surfwave(&["stability", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("nu"), "{err}");
    let (code, _, err) = surfwave(&["roots", "--config", dir.join("absent.toml").to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("absent.toml"));
}

#[test]
fn stability_reports_the_worked_margin() {
    let dir = workdir("stability");
    let v = run_json("stability", &write_config(&dir, WORKED));
    assert_eq!(v["command"], "stability");
    let r = &v["result"];
    assert_eq!(r["h1"]["stable"], true);
    assert!((r["h1"]["margin"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert_eq!(r["h1star"]["stable"], true);
    assert_eq!(r["assumptions"]["h3"], true);
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(dir.join("out/stability.json")).unwrap()).unwrap();
    assert_eq!(on_disk, v);
}

#[test]
fn roots_in_the_static_limit() {
    let dir = workdir("roots");
    let body = WORKED.replace("u0 = [0.3, 0.0, 0.0]", "u0 = [0.0, 0.0, 0.0]").replace("nu = 0.01", "nu = 1e-8");
    let v = run_json("roots", &write_config(&dir, &body));
    let roots: Vec<f64> = v["result"]["tau_roots"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(roots.len(), 2);
    assert!((roots[0] + 0.75f64.sqrt()).abs() < 1e-6 && (roots[1] - 0.75f64.sqrt()).abs() < 1e-6);
    assert_eq!(v["result"]["selected_tau"].as_f64().unwrap(), roots[1]);
}

#[test]
fn unstable_state_is_refused() {
    let dir = workdir("unstable");
    let cfg = write_config(&dir, &WORKED.replace("H0 = [0.0, 1.0, 0.0]", "H0 = [1.0, 0.0, 0.0]"));
    let (code, _, err) = surfwave(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("margin"), "{err}");
}

#[test]
fn solve_writes_snapshots() {
    let dir = workdir("solve");
    let v = run_json("solve", &write_config(&dir, WORKED));
    let files = v["result"]["files"].as_array().unwrap();
    assert_eq!(files.len(), 6);
    let first = fs::read_to_string(dir.join("out").join(files[0].as_str().unwrap())).unwrap();
    assert!(first.starts_with("# j1 j2 k re im"));
    assert_eq!(first.lines().count(), 5);
    assert_eq!(v["result"]["steps"], 10);
}

#[test]
fn kernel_check_has_no_failures() {
    let (code, out, _) = surfwave(&["kernel-check"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    let r = &v["result"];
    for key in ["symmetry_failures", "reality_failures", "homogeneity_failures", "piecewise_rational_failures"] {
        assert_eq!(r[key], 0, "{key}");
    }
    assert!(r["direct_vs_exp_integral_rel_diff"].as_f64().unwrap() < 1e-10);
}

#[test]
fn manifests_repeat_byte_for_byte() {
    let dir = workdir("repeat");
    let cfg = write_config(&dir, WORKED);
    let c = cfg.to_str().unwrap();
    for cmd in ["reconstruct", "rectification"] {
        let (a, first, _) = surfwave(&[cmd, "--config", c]);
        let (b, second, _) = surfwave(&["--threads", "2", cmd, "--config", c]);
        assert_eq!((a, b), (0, 0));
        assert_eq!(first, second, "{cmd}");
    }
}

#[test]
fn library_entry_point_matches_the_binary() {
    assert_eq!(surfwave::cli::run(["surfwave", "--version"]), 0);
    assert_eq!(surfwave::cli::run(["surfwave", "solve"]), 1);
}
