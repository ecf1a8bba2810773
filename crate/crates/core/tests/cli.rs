use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/data");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn bf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_balance-forge")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report_value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no {key} in report:\n{report}"))
        .to_string()
}

#[test]
fn evaluate_sample() {
    let g = data("sample.txt");
    let o = bf(&["evaluate", "--graph", &g, "--partition", &data("par1.txt"), "--cut"]);
    assert_eq!(stdout(&o), "4\n");
    let o = bf(&["evaluate", "--graph", &g, "--partition", &data("par3.txt"), "--triangle"]);
    assert_eq!(stdout(&o), "1\n");
    let o = bf(&["evaluate", "--graph", &g, "--partition", &data("par2.txt"), "--workload", &data("shortest_path.txt")]);
    assert_eq!(stdout(&o), "0\n");
    let o = bf(&["evaluate", "--graph", &g, "--partition", &data("par1.txt"), "--workload", &data("shortest_path.txt")]);
    assert_eq!(stdout(&o), "1\n");
}

#[test]
fn exact_examples() {
    let o = bf(&["exact", "--graph", &data("sample.txt"), "--k", "2", "--triangle"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1\n");
    let o = bf(&["exact", "--graph", &data("k4.txt"), "--k", "2", "--cut"]);
    assert_eq!(stdout(&o), "4\n");
    let o = bf(&["exact", "--graph", &data("path20.txt"), "--k", "2", "--cut"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("oracle: instance too large"), "{}", stderr(&o));
}

#[test]
fn exact_writes_partition_that_evaluates_to_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("best.txt");
    let out = out.to_str().unwrap();
    let o = bf(&["exact", "--graph", &data("sample.txt"), "--k", "2", "--workload", &data("shortest_path.txt"), "--out", out]);
    assert_eq!(stdout(&o), "0\n");
    assert!(std::fs::read_to_string(out).unwrap().ends_with("cost 0\n"));
    let o = bf(&["evaluate", "--graph", &data("sample.txt"), "--partition", out, "--workload", &data("shortest_path.txt")]);
    assert_eq!(stdout(&o), "0\n");
}

#[test]
fn partition_workload_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.txt");
    let rep = dir.path().join("r.txt");
    let (out, rep) = (out.to_str().unwrap(), rep.to_str().unwrap());
    let o = bf(&[
        "partition-workload",
        "--graph",
        &data("sample.txt"),
        "--workload",
        &data("shortest_path.txt"),
        "--k",
        "2",
        "--seed",
        "7",
        "--out",
        out,
        "--report",
        rep,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(rep).unwrap();
    assert!(report_value(&report, "sdpObjective").parse::<f64>().unwrap() <= 1e-4);
    let cost = report_value(&report, "finalCost");
    assert!(cost == "0" || cost == "1", "{cost}");
    for s in report_value(&report, "blockSizes").split(',') {
        assert!(s.parse::<usize>().unwrap() <= 10);
    }
    // the emitted file re-evaluates to the reported cost
    let o = bf(&["evaluate", "--graph", &data("sample.txt"), "--partition", out, "--workload", &data("shortest_path.txt")]);
    assert_eq!(stdout(&o).trim(), cost);
}

#[test]
fn partition_motif_sample() {
    let o = bf(&["partition-motif", "--graph", &data("sample.txt"), "--triangle", "--k", "2", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let report = stderr(&o);
    assert_eq!(report_value(&report, "occurrences"), "8");
    let cost: i64 = report_value(&report, "finalCost").parse().unwrap();
    assert!(cost <= 2, "{cost}");
    assert!(stdout(&o).starts_with("%k 2\n"));
}

#[test]
fn partition_motif_k3() {
    let o = bf(&["partition-motif", "--graph", &data("k3.txt"), "--triangle", "--k", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report_value(&stderr(&o), "finalCost"), "1");
}

#[test]
fn input_errors_name_the_stage() {
    let o = bf(&["partition-workload", "--graph", &data("sample.txt"), "--workload", &data("missing.txt"), "--k", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("workload-model: "), "{}", stderr(&o));
    let o = bf(&["partition-workload", "--graph", &data("sample.txt"), "--workload", &data("shortest_path.txt"), "--k", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = bf(&["partition-motif", "--graph", &data("sample.txt"), "--motif", &data("disconnected_motif.txt"), "--k", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("disconnected"));
    let o = bf(&["evaluate", "--graph", &data("missing.txt"), "--partition", &data("par1.txt"), "--cut"]);
    assert!(stderr(&o).starts_with("graph-core: "));
}

#[test]
fn generate_instances() {
    let o = bf(&["generate", "reduction", "--graph", &data("edge.txt")]);
    let text = stdout(&o);
    assert!(text.starts_with("%n 8\n"));
    assert_eq!(text.lines().count() - 1, 14);
    let o = bf(&["generate", "cliques", "--sizes", "3,3"]);
    let text = stdout(&o);
    assert!(text.starts_with("%n 6\n"));
    assert_eq!(text.lines().count() - 1, 6);
    let o = bf(&["generate", "cliques", "--sizes", ""]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn same_seed_same_bytes() {
    let args = |seed: &'static str| vec!["partition-motif", "--graph", "", "--triangle", "--k", "3", "--seed", seed];
    let g = data("sample.txt");
    let run = |seed| {
        let mut a = args(seed);
        a[2] = &g;
        bf(&a).stdout
    };
    assert_eq!(run("11"), run("11"));
}
