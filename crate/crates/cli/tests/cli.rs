use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn gasdsr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gasdsr"))
        .args(args)
        .current_dir(dir)
        .env_remove("GASDSR_THREADS")
        .output()
        .expect("binary runs")
}

fn three_node() -> String {
    data("three_node/network.json").display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eval_both_writes_region_trace_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasdsr(dir.path(), &["eval", "--network", &three_node(), "--mode", "both", "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let region: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("region.json")).unwrap()).unwrap();
    let lo = region["dynamic"]["dG_lower"].as_f64().unwrap();
    let hi = region["dynamic"]["dG_upper"].as_f64().unwrap();
    assert!(lo < 0.0 && hi > 0.0);
    assert!(region["steady"]["dG_upper"].as_f64().is_some());
    let trace: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.json")).unwrap()).unwrap();
    assert!(trace["dynamic"]["upper"]["trace"]["eta_min"].as_f64().is_some());
    let svg = std::fs::read_to_string(dir.path().join("region.svg")).unwrap();
    assert!(svg.contains(">DSR<") && svg.contains(">SSR<") && svg.contains("(kg/s)"));
    assert!(stdout(&o).contains("dynamic"));
}

#[test]
fn svg_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let o = gasdsr(dir.path(), &["eval", "--network", &three_node(), "--out", &format!("{name}.json"), "--trace", &format!("{name}_trace.json"), "--plot", &format!("{name}.svg")]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(dir.path().join(format!("{name}.svg"))).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn missing_network_exits_one_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasdsr(dir.path(), &["eval", "--network", "absent.json", "--plot"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_arguments_exit_one_and_bad_options_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gasdsr(dir.path(), &["eval", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(gasdsr(dir.path(), &["eval", "--network", &three_node(), "--samples", "2"]).status.code(), Some(2));
    assert_eq!(gasdsr(dir.path(), &["eval", "--network", &three_node(), "--dt", "-1"]).status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn thread_environment_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gasdsr"))
        .args(["eval", "--network", &three_node()])
        .current_dir(dir.path())
        .env("GASDSR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_dispatch_is_secure_and_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasdsr(dir.path(), &["simulate", "--network", &three_node(), "--dg", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "secure");
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,pipe,seg,rho,m"));
    // 4 time levels, two pipes of 7 and 9 points.
    assert_eq!(lines.count(), 4 * (7 + 9));
    let lp = std::fs::read_to_string(dir.path().join("trajectory_linepack.csv")).unwrap();
    assert_eq!(lp.lines().count(), 5);
}

#[test]
fn simulate_far_outside_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasdsr(dir.path(), &["simulate", "--network", &three_node(), "--dg", "150"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("insecure"));
    assert!(out.contains("density_bound"));
}

#[test]
fn simulate_rejects_wrong_withdrawal_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasdsr(dir.path(), &["simulate", "--network", &three_node(), "--withdrawals", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn raster_writes_one_row_per_cell_and_rejects_one_axis() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasdsr(dir.path(), &["raster", "--network", &three_node(), "--axes", "node:1,node:2", "--resolution", "10", "--svg", "raster.svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("raster.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(stdout(&o).contains("warnings 0"));
    assert!(dir.path().join("raster.svg").exists());
    let bad = gasdsr(dir.path(), &["raster", "--network", &three_node(), "--axes", "node:1", "--out", "x.csv"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn empty_secure_set_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let o = gasdsr(
        dir.path(),
        &["raster", "--network", &three_node(), "--axes", "node:1,node:2", "--resolution", "3", "--x-range", "400,500", "--y-range", "400,500"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("warnings 1"), "{}", stdout(&o));
}

#[test]
fn plot_rerenders_saved_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gasdsr(dir.path(), &["eval", "--network", &three_node(), "--mode", "both"]).status.code(), Some(0));
    assert_eq!(gasdsr(dir.path(), &["raster", "--network", &three_node(), "--axes", "node:1,node:2", "--resolution", "5"]).status.code(), Some(0));
    let o = gasdsr(dir.path(), &["plot", "--region", "region.json", "--raster", "raster.csv", "--out", "p.svg"]);
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("p.svg")).unwrap();
    assert!(svg.contains("secure cell") && svg.contains(">DSR<"));
    assert_eq!(gasdsr(dir.path(), &["plot"]).status.code(), Some(2));
}
