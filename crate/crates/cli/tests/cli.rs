//! End-to-end checks of the command-line interface through the real binary.

use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crstokes"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const CSV_HEADER: &str = "case,path,solver,precond,level,h,dt,iters,time_s,errl2U,errl2P,converged";

#[test]
fn solve_writes_csv_and_markdown_reports() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = run_ok(bin().args([
        "solve",
        "--case",
        "constant-force",
        "--level",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert!(stdout.contains("constant-force"), "stdout:\n{stdout}");

    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let row = lines.next().unwrap();
    assert!(row.starts_with("constant-force,hybrid,lu,none,4,"), "row: {row}");
    assert!(row.ends_with(",true"), "row: {row}");
    assert!(lines.next().is_none());
    assert!(dir.path().join("results.md").exists());
}

#[test]
fn study_reports_ratios_on_refinement() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(bin().args([
        "study",
        "--case",
        "gt2d",
        "--levels",
        "2,4",
        "--re",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]));

    let csv = fs::read_to_string(dir.path().join("study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,h,dt,errl2U,ratioU,errl2P,ratioP");
    assert_eq!(lines.len(), 3);
    let first: Vec<&str> = lines[1].split(',').collect();
    let second: Vec<&str> = lines[2].split(',').collect();
    assert!(first[4].is_empty(), "no ratio on the coarsest level: {}", lines[1]);
    assert!(!second[4].is_empty(), "ratio expected: {}", lines[2]);
    assert!(dir.path().join("study.md").exists());
}

#[test]
fn bench_plan_records_failures_as_rows() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    fs::write(
        &plan,
        "# two direct runs, then CG on the indefinite coupled system\n\
         case = constant-force\nlevel = 3\npath = coupled\n\n\
         case = constant-force\nlevel = 3\npath = hybrid\n\n\
         case = constant-force\nlevel = 4\npath = coupled\nsolver = cg\n",
    )
    .unwrap();
    let stdout = run_ok(bin().args([
        "bench",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    assert!(stdout.contains("[3/3]"), "stdout:\n{stdout}");

    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(",true"), "{}", lines[1]);
    assert!(lines[2].ends_with(",true"), "{}", lines[2]);
    assert!(lines[3].ends_with(",false"), "CG on the saddle system: {}", lines[3]);
}

#[test]
fn config_file_fills_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "case = constant-force\nlevel = 8   # overridden below\npath = coupled\n")
        .unwrap();
    run_ok(bin().args([
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--level",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("constant-force,coupled,lu,none,3,"), "row: {row}");
}

#[test]
fn unknown_case_fails_with_a_clear_message() {
    let out = bin().args(["solve", "--case", "warp"]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown case"), "stderr:\n{stderr}");
}

#[test]
fn malformed_plan_aborts_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    fs::write(&plan, "case = constant-force\nwarp = 9\n").unwrap();
    let out = bin()
        .args(["bench", "--plan", plan.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown key"), "stderr:\n{stderr}");
}
