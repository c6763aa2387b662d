use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stabsurv"));
    c.env_remove("STABSURV_SEED");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL_KERNEL: &str = r#"
name = "small-kernel"
theorem = "prop-1-4"
[process]
alpha = 1.0
dim = 1
[domain]
kind = "interval"
a = -1.0
b = 1.0
[mc]
n_paths = 20000
dt = 0.02
t_max = 2.0
seed = 4
[kernel]
times = [1.0, 2.0]
bins = 16
"#;

#[test]
fn inradius_bound_evaluates() {
    let (code, out, _) = run(bin().args([
        "bound", "--formula", "inradius-lower", "--d", "2", "--alpha", "1", "--r", "1", "--R", "1", "--units",
        "seminorm",
    ]));
    assert_eq!(code, 0);
    assert!(out.trim().starts_with("0.116355"), "{out}");
    let (code, _, err) = run(bin().args(["bound", "--formula", "inradius-lower", "--alpha", "1", "--r", "1"]));
    assert_eq!(code, 1);
    assert!(err.contains("--R is required"), "{err}");
}

#[test]
fn other_bounds_evaluate() {
    let (_, out, _) = run(bin().args(["bound", "--formula", "iteration-exponent", "--d", "1", "--alpha", "1"]));
    assert!((out.trim().parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let (_, out, _) = run(bin().args(["bound", "--formula", "free-kernel", "--alpha", "1", "--t", "1", "--dist", "2"]));
    assert_eq!(out.trim().parse::<f64>().unwrap(), 0.25);
}

#[test]
fn verify_writes_bundle_and_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let (code, stdout, err) = run(bin()
        .args(["verify", "--config"])
        .arg(configs().join("iteration.toml"))
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("verdict: pass"));
    for f in ["bundle.json", "report.md", "checks.csv", "timings.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }

    // Replay from the bundle's embedded config.
    let bundle: stabsurv::harness::ResultBundle =
        serde_json::from_str(&fs::read_to_string(out.join("bundle.json")).unwrap()).unwrap();
    let cfg_path = write_cfg(dir.path(), "replay.toml", &bundle.config.to_toml_string().unwrap());
    let out2 = dir.path().join("b");
    let (code, _, _) = run(bin().args(["verify", "--config"]).arg(&cfg_path).arg("--out").arg(&out2));
    assert_eq!(code, 0);
    assert_eq!(
        fs::read(out.join("bundle.json")).unwrap(),
        fs::read(out2.join("bundle.json")).unwrap()
    );

    let (code, text, _) = run(bin().args(["report", "--bundle"]).arg(out.join("bundle.json")).arg("--timings").arg(out.join("timings.csv")));
    assert_eq!(code, 0);
    assert!(text.contains("iteration-3-2: PASS") && text.contains("Runtimes"));
}

#[test]
fn monte_carlo_verification_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, err) = run(bin()
        .args(["verify", "--theorem", "thm-1-1", "--config"])
        .arg(configs().join("interval_a2.toml"))
        .args(["--set", "mc.n_paths=20000", "--set", "mc.dt=0.002", "--out"])
        .arg(dir.path()));
    assert_eq!(code, 0, "{stdout}{err}");
    let bundle = fs::read_to_string(dir.path().join("bundle.json")).unwrap();
    assert!(bundle.contains("\"n_paths\": 20000"));
    assert!(dir.path().join("curve_survival.csv").exists());
    assert!(dir.path().join("ladder_lambda.csv").exists());
}

#[test]
fn seed_environment_variable_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(bin()
        .env("STABSURV_SEED", "99")
        .args(["verify", "--config"])
        .arg(configs().join("iteration.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bundle.json")).unwrap()).unwrap();
    assert_eq!(b["seed_override"]["variable"], "STABSURV_SEED");
    assert_eq!(b["seed_override"]["value"], 99);
    assert_eq!(b["config"]["mc"]["seed"], 99);
}

#[test]
fn unbounded_horn_is_a_hypothesis_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(bin()
        .args(["verify", "--theorem", "thm-1-6", "--config"])
        .arg(configs().join("horn_cone.toml"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(code, 1);
    assert!(err.contains("hypothesis violation") && err.contains("unbounded"), "{err}");
}

#[test]
fn schema_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let base = fs::read_to_string(configs().join("iteration.toml")).unwrap();
    for (body, needle) in [
        (base.replace("alpha = 1.0", "alpha = 2.5"), "alpha must lie in (0, 2]"),
        (base.replace("seed = 1\n", ""), "seed"),
        (base.replace("seed = 1", "seed = 1\nsede = 2"), "sede"),
    ] {
        let p = write_cfg(dir.path(), "bad.toml", &body);
        let (code, _, err) = run(bin().args(["verify", "--config"]).arg(&p).arg("--out").arg(dir.path()));
        assert_eq!(code, 1, "{body}");
        assert!(err.contains("schema error") && err.contains(needle), "{err}");
    }
    let (code, _, err) = run(bin()
        .args(["verify", "--config"])
        .arg(configs().join("iteration.toml"))
        .args(["--set", "mc.n_paths=lots", "--out"])
        .arg(dir.path()));
    assert_eq!(code, 1);
    assert!(err.contains("n_paths"), "{err}");
}

#[test]
fn failed_and_inconclusive_verdicts_have_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_cfg(dir.path(), "kernel.toml", SMALL_KERNEL);
    // Spread of max ratios is at least 1, so a factor below 1 must fail.
    let (code, stdout, err) = run(bin()
        .args(["verify", "--config"])
        .arg(&p)
        .args(["--set", "fit.kernel_factor=0.5", "--out"])
        .arg(dir.path()));
    assert_eq!(code, 2, "{stdout}{err}");
    assert!(stdout.contains("verdict: fail"));
    // Two nearby times: ratios tie within noise, so a factor of exactly 1 is undecidable.
    let (code, stdout, err) = run(bin()
        .args(["verify", "--config"])
        .arg(&p)
        .args(["--set", "fit.kernel_factor=1.0", "--set", "kernel.times=[1.0, 1.04]", "--out"])
        .arg(dir.path()));
    assert_eq!(code, 3, "{stdout}{err}");
    assert!(stdout.contains("verdict: inconclusive"));
}

#[test]
fn sample_survival_meanexit_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_cfg(dir.path(), "k.toml", SMALL_KERNEL);
    let (code, _, err) = run(bin().args(["sample", "--paths", "3", "--config"]).arg(&p).arg("--out").arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let paths = fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert!(paths.starts_with("path,t,x1"));
    assert_eq!(paths.lines().count(), 1 + 3 * 101);

    let (code, out, err) = run(bin().args(["survival", "--config"]).arg(&p).arg("--out").arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("survival: rate"));

    let (code, out, err) = run(bin()
        .args(["meanexit", "--config"])
        .arg(&p)
        .args(["--set", "mc.probes=[[0.5]]", "--set", "mc.t_max=10.0", "--out"])
        .arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.matches("E[tau]").count(), 2);
    assert!(dir.path().join("meanexit.csv").exists());

    let (code, out, _) = run(bin().args(["spectrum", "--alpha", "1", "--ladder", "128,256,512"]));
    assert_eq!(code, 0);
    let v: f64 = out.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((v - 1.15777).abs() < 5e-3, "{out}");
    let (code, out, _) = run(bin().args(["spectrum", "--config"]).arg(configs().join("horn.toml")));
    assert_eq!(code, 0);
    assert!(out.contains("TubeIdentity"));
}
