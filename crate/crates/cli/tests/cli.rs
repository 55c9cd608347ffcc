use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use bono::frontapprox::FrontApproximation;
use bono::generator::ProblemInstance;
use bono::harness::{read_run_csv, TargetSet};

fn bono(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bono"))
        .args(args)
        .env_remove("BONO_SEED_OVERRIDE")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn generate_one(dir: &Path, class: &str) -> PathBuf {
    let file = dir.join(format!("{class}.json"));
    let o = bono(&[
        "generate",
        "--class",
        class,
        "--dim",
        "2",
        "--seed",
        "0",
        "--out",
        p(&file),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    file
}

fn approximate(dir: &Path, instance: &Path, indicator: &str) -> PathBuf {
    let out = dir.join(format!("front.{indicator}.json"));
    let o = bono(&[
        "approximate",
        "--instance",
        p(instance),
        "--indicator",
        indicator,
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    out
}

fn targets(dir: &Path, front: &Path, name: &str) -> PathBuf {
    let out = dir.join(format!("targets.{name}.json"));
    let o = bono(&["targets", "--front", p(front), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    out
}

#[test]
fn generate_single_and_batch() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate_one(dir.path(), "BONO1");
    let inst = ProblemInstance::from_json(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(inst.dimension(), 2);

    let o = bono(&["generate", "--class", "BONO99", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown class"), "{}", stderr(&o));

    let batch = dir.path().join("batch");
    let o = bono(&[
        "generate",
        "--class",
        "BONO3",
        "--seed",
        "0..14",
        "--out",
        p(&batch),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(&batch).unwrap().count(), 15);

    let o = Command::new(env!("CARGO_BIN_EXE_bono"))
        .args([
            "generate",
            "--class",
            "BONO3",
            "--seed",
            "0..14",
            "--out",
            p(&dir.path().join("ci")),
        ])
        .env("BONO_SEED_OVERRIDE", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<_> = std::fs::read_dir(dir.path().join("ci"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, vec![std::ffi::OsString::from("BONO3_d2_s4.json")]);

    assert_eq!(
        bono(&[
            "generate",
            "--class",
            "BONO1",
            "--dim",
            "1",
            "--out",
            p(dir.path())
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        bono(&["generate", "--out", p(dir.path())]).status.code(),
        Some(2)
    );
}

#[test]
fn approximate_defaults_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate_one(dir.path(), "BONO1");
    let start = Instant::now();
    let hv = approximate(dir.path(), &inst, "hv");
    let r2 = approximate(dir.path(), &inst, "r2");
    assert!(start.elapsed().as_secs_f64() < 5.0);
    let hv = FrontApproximation::from_json(&std::fs::read_to_string(hv).unwrap()).unwrap();
    let r2 = FrontApproximation::from_json(&std::fs::read_to_string(r2).unwrap()).unwrap();
    assert_eq!(hv.delta, 1e-5);
    assert_eq!(r2.delta, 1e-6);
    assert!(!hv.early_stopped && hv.epsilon_total_final <= 1e-5);

    let o = bono(&[
        "approximate",
        "--instance",
        p(&dir.path().join("missing.json")),
        "--out",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = bono(&[
        "approximate",
        "--instance",
        p(&inst),
        "--indicator",
        "igd",
        "--out",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));

    // an iteration cap that cannot be met: the file is written, exit code 3
    let multi = generate_one(dir.path(), "BONO9");
    let out = dir.path().join("capped.json");
    let o = bono(&[
        "approximate",
        "--instance",
        p(&multi),
        "--max-iter",
        "10",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let capped = FrontApproximation::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!(capped.early_stopped);
}

#[test]
fn run_writes_101_rows_per_indicator() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate_one(dir.path(), "BONO1");
    let t_hv = targets(dir.path(), &approximate(dir.path(), &inst, "hv"), "hv");
    let t_r2 = targets(dir.path(), &approximate(dir.path(), &inst, "r2"), "r2");
    let set = TargetSet::from_json(&std::fs::read_to_string(&t_r2).unwrap()).unwrap();
    assert_eq!((set.targets[0], set.targets[100]), (1e-5, 1.0));

    let csv = dir.path().join("rs.csv");
    let o = bono(&[
        "run",
        "--instance",
        p(&inst),
        "--targets",
        p(&t_hv),
        p(&t_r2),
        "--algorithm",
        "random_search",
        "--budget-mult",
        "1000",
        "--out",
        p(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 101);
    let records = read_run_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 2);
    assert!(records
        .iter()
        .all(|r| r.budget == 2000 && r.budget_used == 2000 && r.hits_consistent()));

    // same inputs, same bytes
    let again = dir.path().join("rs2.csv");
    bono(&[
        "run",
        "--instance",
        p(&inst),
        "--targets",
        p(&t_hv),
        p(&t_r2),
        "--budget-mult",
        "1000",
        "--out",
        p(&again),
    ]);
    assert_eq!(std::fs::read(&csv).unwrap(), std::fs::read(&again).unwrap());

    // targets of another instance are refused
    let other = generate_one(dir.path(), "BONO2");
    let o = bono(&[
        "run",
        "--instance",
        p(&other),
        "--targets",
        p(&t_hv),
        "--out",
        p(&again),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn external_solver_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = generate_one(dir.path(), "BONO1");
    let inst = ProblemInstance::from_json(&std::fs::read_to_string(&inst_path).unwrap()).unwrap();
    let t_hv = targets(dir.path(), &approximate(dir.path(), &inst_path, "hv"), "hv");
    let [x1, x2] = inst.problem().global_optima();
    let fmt = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    let echo = write_script(
        dir.path(),
        "echo.sh",
        &format!(
            "read init\nread lower\nread upper\necho \"EVAL {}\"\nread f1\necho \"EVAL {}\"\nread f2\necho QUIT\n",
            fmt(x1.as_slice()),
            fmt(x2.as_slice())
        ),
    );
    let csv = dir.path().join("echo.csv");
    let o = bono(&[
        "run",
        "--instance",
        p(&inst_path),
        "--targets",
        p(&t_hv),
        "--algorithm",
        "external",
        "--solver-cmd",
        &format!("sh {}", p(&echo)),
        "--solver-id",
        "echo",
        "--out",
        p(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = &read_run_csv(std::fs::read_to_string(&csv).unwrap().as_bytes()).unwrap()[0];
    assert_eq!(rec.algorithm, "echo");
    assert_eq!(rec.budget_used, 2);
    // the two endpoints leave a regret below the largest targets
    assert!(matches!(rec.hits[100], Some(1..=2)));
    assert!(rec.solved() >= 1);
    assert!(rec.hits_consistent());

    // a solver that keeps asking is stopped by the budget
    let greedy = write_script(dir.path(), "greedy.sh", "read a\nread b\nread c\nwhile true; do echo \"EVAL 0 0\"; read r || exit 0; [ \"$r\" = DONE ] && exit 0; done\n");
    let o = bono(&[
        "run",
        "--instance",
        p(&inst_path),
        "--targets",
        p(&t_hv),
        "--algorithm",
        "external",
        "--solver-cmd",
        &format!("sh {}", p(&greedy)),
        "--budget",
        "50",
        "--out",
        p(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = &read_run_csv(std::fs::read_to_string(&csv).unwrap().as_bytes()).unwrap()[0];
    assert_eq!(rec.budget_used, 50);
    assert!(rec.failure.is_none());

    // garbage is a protocol violation: the run is kept but marked failed
    let bad = write_script(dir.path(), "bad.sh", "read a\nread b\nread c\necho HELLO\n");
    let o = bono(&[
        "run",
        "--instance",
        p(&inst_path),
        "--targets",
        p(&t_hv),
        "--algorithm",
        "external",
        "--solver-cmd",
        &format!("sh {}", p(&bad)),
        "--out",
        p(&csv),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let rec = &read_run_csv(std::fs::read_to_string(&csv).unwrap().as_bytes()).unwrap()[0];
    assert!(rec
        .failure
        .as_deref()
        .unwrap()
        .contains("protocol violation"));
}

#[test]
fn profile_three_algorithms_plus_vbs() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate_one(dir.path(), "BONO2");
    let t = targets(dir.path(), &approximate(dir.path(), &inst, "r2"), "r2");
    let runs = dir.path().join("runs");
    for (alg, extra) in [
        ("random_search", vec![]),
        ("nsga2_lite", vec![]),
        ("nsga2_lite", vec!["--population-size", "20"]),
    ] {
        let name = format!("{alg}{}", extra.len());
        let out = runs.join(format!("{name}.csv"));
        let mut args = vec![
            "run",
            "--instance",
            p(&inst),
            "--targets",
            p(&t),
            "--algorithm",
            alg,
            "--budget-mult",
            "500",
            "--out",
            p(&out),
        ];
        args.extend(extra.iter().copied());
        let o = bono(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    // the third run gets its own algorithm id so there are three solvers
    let third = runs.join("nsga2_lite2.csv");
    let text = std::fs::read_to_string(&third)
        .unwrap()
        .replace("nsga2_lite,", "nsga2_small,");
    std::fs::write(&third, text).unwrap();

    let csv = dir.path().join("profile.csv");
    let svg = dir.path().join("profile.svg");
    let pattern = format!("{}/*.csv", p(&runs));
    let o = bono(&[
        "profile",
        "--runs",
        &pattern,
        "--csv",
        p(&csv),
        "--svg",
        p(&svg),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let curves = bono::profiles::read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    let algorithms: std::collections::BTreeSet<_> =
        curves.iter().map(|c| c.algorithm.clone()).collect();
    assert_eq!(algorithms.len(), 4, "{algorithms:?}");
    assert!(algorithms.contains("VBS"));
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg_text.matches("<polyline").count(), 4);

    let o = bono(&[
        "profile",
        "--runs",
        &format!("{}/none*.csv", p(&runs)),
        "--csv",
        p(&csv),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path, jobs: &str| {
        let o = bono(&[
            "pipeline",
            "--class",
            "BONO1,BONO4",
            "--dim",
            "2",
            "--seed",
            "0..1",
            "--budget-mult",
            "300",
            "--jobs",
            jobs,
            "--deterministic",
            "--out",
            p(out),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a, "1");
    run(&b, "4");
    let manifest = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(!manifest.contains("created_unix"));
    let value: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let entries = value["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for e in entries {
        for f in e["runs"].as_array().unwrap() {
            let rel = f.as_str().unwrap();
            assert_eq!(
                std::fs::read(a.join(rel)).unwrap(),
                std::fs::read(b.join(rel)).unwrap(),
                "{rel}"
            );
        }
        assert!(a.join(e["instance"].as_str().unwrap()).exists());
    }
    for f in ["manifest.json", "profile.csv", "profile.svg"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}
