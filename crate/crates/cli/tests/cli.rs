//! End-to-end tests of the `homcone` binary: exit codes, file outputs and
//! run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_homcone")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const LQ_MODEL: &str = r#"
p = 2.0
horizon = 1.0
m = 1
n = 1
regime = "CaseI"

[cone]
kind = "full_space"
m = 1

[regime_params]
delta = 4.0
l = 2.0

[coefficients]
family = "power_lq"
a_plus = 0.1
a_minus = 0.1
b_plus = [1.0]
b_minus = [1.0]
c = [0.2]
d = [[0.0]]
q = 1.0
r = [[1.0]]
g_plus = 1.0
g_minus = 1.0
"#;

const ZERO_DRIVER_MODEL: &str = r#"
p = 2.0
horizon = 1.0
m = 1
n = 1
regime = "CaseI"

[cone]
kind = "full_space"
m = 1

[regime_params]
delta = 1.0
l = 1.0

[coefficients]
family = "power_lq"
b_plus = [0.0]
b_minus = [0.0]
c = [0.0]
d = [[0.0]]
r = [[0.0]]
g_plus = 1.5
g_minus = 1.5
"#;

const PURE_DRIFT_MODEL: &str = r#"
p = 2.0
horizon = 1.0
m = 1
n = 1
regime = "CaseI"

[cone]
kind = "full_space"
m = 1

[regime_params]
delta = 1.0
l = 1.0

[coefficients]
family = "power_lq"
a_plus = 0.3
a_minus = 0.3
b_plus = [0.0]
b_minus = [0.0]
c = [0.0]
d = [[0.0]]
r = [[0.0]]
g_plus = 1.0
g_minus = 1.0
"#;

fn experiment(model: &str, extra: &str) -> String {
    format!(
        r#"
model = "{model}"

[grid]
n = 100

[simulation]
paths = 2000
seed = 7
x0 = [1.0, -1.0]

[outputs]
directory = "out"
formats = ["csv", "json"]
{extra}
"#
    )
}

fn setup(model_toml: &str, experiment_extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("model.toml"), model_toml);
    let exp = dir.path().join("exp.toml");
    write(&exp, &experiment("model.toml", experiment_extra));
    (dir, exp)
}

#[test]
fn solve_zero_driver_outputs_terminal_value_everywhere() {
    let (dir, _) = setup(ZERO_DRIVER_MODEL, "");
    let out = run(dir.path(), &["solve", "--config", "exp.toml"]);
    assert!(out.status.success(), "{out:?}");
    let csv = std::fs::read_to_string(dir.path().join("out/solution_plus.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let p: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(p, 1.5, "line {line}");
    }
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("exp.toml"), "this is not { toml");
    let out = run(dir.path(), &["solve", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // Missing model file also maps to a config error.
    write(&dir.path().join("exp2.toml"), &experiment("absent.toml", ""));
    let out = run(dir.path(), &["solve", "--config", "exp2.toml"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn case3_with_zero_terminal_weight_exits_4() {
    let model = LQ_MODEL
        .replace("regime = \"CaseI\"", "regime = \"CaseIII\"")
        .replace("g_plus = 1.0", "g_plus = 0.0")
        .replace("delta = 4.0", "delta = 0.2\neta = 0.5");
    let (dir, _) = setup(&model, "");
    let out = run(dir.path(), &["solve", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("η"), "stderr: {stderr}");
}

#[test]
fn verify_deterministic_model_passes() {
    // σ ≡ 0: every path is deterministic, stderr = 0, gap within allowance.
    let (dir, _) = setup(PURE_DRIFT_MODEL, "");
    let out = run(dir.path(), &["verify", "--config", "exp.toml"]);
    assert!(out.status.success(), "{out:?}");
    let report = std::fs::read_to_string(dir.path().join("out/verification.json")).unwrap();
    assert!(report.contains("\"pass\": true"));
}

#[test]
fn verify_noisy_lq_model_passes() {
    let (dir, _) = setup(LQ_MODEL, "");
    let out = run(dir.path(), &["verify", "--config", "exp.toml", "--paths", "20000"]);
    assert!(out.status.success(), "{out:?}");
}

#[test]
fn corrupted_optimal_control_exits_5() {
    let (dir, _) = setup(LQ_MODEL, "");
    let out = run(dir.path(), &["solve", "--config", "exp.toml"]);
    assert!(out.status.success(), "{out:?}");

    // Negate the v_hat column of both solution tables and ship the result as
    // the "optimal" control.
    for tag in ["plus", "minus"] {
        let path = dir.path().join(format!("out/solution_{tag}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().to_string();
        let mut corrupted = vec![header];
        for line in lines {
            let mut fields: Vec<String> = line.split(',').map(String::from).collect();
            let v: f64 = fields[4].parse().unwrap();
            fields[4] = format!("{}", -v);
            corrupted.push(fields.join(","));
        }
        write(
            &dir.path().join(format!("corrupt_{tag}.csv")),
            &(corrupted.join("\n") + "\n"),
        );
    }
    let extra = r#"
[control_override]
plus = "corrupt_plus.csv"
minus = "corrupt_minus.csv"
"#;
    write(&dir.path().join("exp_bad.toml"), &experiment("model.toml", extra));
    let out = run(dir.path(), &["verify", "--config", "exp_bad.toml"]);
    assert_eq!(out.status.code(), Some(5), "{out:?}");
}

#[test]
fn compare_without_competitors_exits_2() {
    let (dir, _) = setup(LQ_MODEL, "");
    let out = run(dir.path(), &["compare", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn compare_reports_positive_gap_for_zero_control() {
    let extra = "\n[[competitors]]\nkind = \"zero\"\n";
    let (dir, _) = setup(LQ_MODEL, extra);
    let out = run(dir.path(), &["compare", "--config", "exp.toml"]);
    assert!(out.status.success(), "{out:?}");
    let csv = std::fs::read_to_string(dir.path().join("out/competitors.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let gap: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!(gap > 0.0, "line {line}");
    }
}

#[test]
fn check_passes_good_model_and_flags_bad_constants() {
    let (dir, _) = setup(LQ_MODEL, "");
    let out = run(dir.path(), &["check", "--config", "exp.toml"]);
    assert!(out.status.success(), "{out:?}");

    // δ = 0 and tiny L cannot dominate |b|²: sampled CaseI check must fail.
    let bad = LQ_MODEL.replace("delta = 4.0\nl = 2.0", "delta = 0.0\nl = 0.001");
    write(&dir.path().join("model.toml"), &bad);
    let out = run(dir.path(), &["check", "--config", "exp.toml"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
}

#[test]
fn identical_runs_give_byte_identical_outputs() {
    let (dir, _) = setup(LQ_MODEL, "");
    for sub in ["a", "b"] {
        let out = run(
            dir.path(),
            &["verify", "--config", "exp.toml", "--out", sub],
        );
        assert!(out.status.success(), "{out:?}");
    }
    for file in ["verification.json", "solution_plus.csv", "solution_minus.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn grid_and_seed_overrides_change_outputs() {
    let (dir, _) = setup(LQ_MODEL, "");
    let base = run(dir.path(), &["solve", "--config", "exp.toml", "--out", "g100"]);
    assert!(base.status.success());
    let fine = run(
        dir.path(),
        &["solve", "--config", "exp.toml", "--grid", "200", "--out", "g200"],
    );
    assert!(fine.status.success());
    let a = std::fs::read_to_string(dir.path().join("g100/solution_plus.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("g200/solution_plus.csv")).unwrap();
    assert_eq!(a.lines().count(), 102);
    assert_eq!(b.lines().count(), 202);
}

#[test]
fn tree_mode_solve_runs() {
    let extra = "";
    let (dir, exp) = setup(LQ_MODEL, extra);
    let text = std::fs::read_to_string(&exp).unwrap();
    write(
        &exp,
        &text.replace("n = 100", "n = 100\nmode = \"tree\"\ntree_depth = 100"),
    );
    let out = run(dir.path(), &["solve", "--config", "exp.toml"]);
    assert!(out.status.success(), "{out:?}");
    // Tree layers: Σ(k+1) rows plus header.
    let csv = std::fs::read_to_string(dir.path().join("out/solution_plus.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + (101 * 102) / 2);
}
