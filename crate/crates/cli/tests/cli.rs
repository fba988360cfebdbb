use std::path::PathBuf;
use std::process::{Command, Output};

fn nazone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nazone"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nazone-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> String {
    let p = scratch(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const CIRCUIT: &str = "qubits 4;\nh 0;\ncz 0 1;\ncz 2 3;\ncz 1 2;\nrz(0.5) 3;\ncz 0 3;\n";

#[test]
fn compile_writes_instructions_and_stats() {
    let c = write("a.qc", CIRCUIT);
    let emit = scratch("a.txt");
    let stats = scratch("a.toml");
    let out = nazone(&[
        "compile",
        &c,
        "--strategy",
        "ids",
        "--routing",
        "auto",
        "--emit-out",
        emit.to_str().unwrap(),
        "--stats-out",
        stats.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let program = std::fs::read_to_string(&emit).unwrap();
    assert!(program.starts_with("@0.000 INIT atoms=["));
    assert_eq!(program.matches("RYDBERG").count(), 2);
    let stats = std::fs::read_to_string(&stats).unwrap();
    assert!(stats.contains("[totals]"));
    assert!(stats.contains("[[transitions]]"));
    assert!(!stats.contains("wall_clock_s"));

    let check = nazone(&["validate", emit.to_str().unwrap()]);
    assert!(check.status.success());
}

#[test]
fn compile_is_deterministic() {
    let c = write("det.qc", CIRCUIT);
    let a = nazone(&["compile", &c]);
    let b = nazone(&["compile", &c]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn wall_clock_only_on_request() {
    let c = write("wall.qc", CIRCUIT);
    let stats = scratch("wall.toml");
    let out = nazone(&["compile", &c, "--include-wall-clock", "--stats-out", stats.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(&stats).unwrap().contains("wall_clock_s"));
}

#[test]
fn input_errors_exit_1() {
    let bad = write("bad.qc", "qubits 2;\ncz 0 5;\n");
    assert_eq!(nazone(&["compile", &bad]).status.code(), Some(1));
    assert_eq!(nazone(&["compile", "/nonexistent/file.qc"]).status.code(), Some(1));
    let arch = write("bad.toml", "name = 3");
    let c = write("ok.qc", CIRCUIT);
    assert_eq!(nazone(&["compile", &c, &arch]).status.code(), Some(1));
    let garbage = write("bad.txt", "@0 TELEPORT\n");
    assert_eq!(nazone(&["validate", &garbage]).status.code(), Some(1));
}

#[test]
fn capacity_and_budget_exit_2() {
    let mut text = String::from("qubits 620;\n");
    for i in 0..307 {
        text.push_str(&format!("cz {} {};\n", 2 * i, 2 * i + 1));
    }
    let c = write("wide.qc", &text);
    let out = nazone(&["compile", &c]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("306"));

    let mut text = String::from("qubits 40;\n");
    for i in 0..20 {
        text.push_str(&format!("cz {} {};\n", 2 * i, 2 * i + 1));
    }
    let c = write("astar.qc", &text);
    let out = nazone(&["compile", &c, "--strategy", "astar", "--max-nodes", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MemoryLimit"));
}

#[test]
fn violations_exit_3() {
    let seq = "@0 INIT atoms=[(0,111),(4,115),(4,111)]\n\
               @0 PICKUP rows=[111,115] cols=[0,4]\n\
               @15 MOVE map=[(0,111)->(1,0),(4,115)->(3,10)]\n\
               @300 DROP cols=[1,3]\n";
    let p = write("ghost.txt", seq);
    let out = nazone(&["validate", &p, "--json"]);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["violations"][0]["constraint"], "ghost_spot");
    assert_eq!(report["violations"][0]["index"], 1);
}

#[test]
fn bench_table_is_seeded() {
    let json = scratch("bench.json");
    let args = [
        "bench",
        "--family",
        "random-pairs",
        "--qubits",
        "30",
        "--parallelism",
        "8",
        "--layers",
        "3",
        "--seed",
        "5",
        "--instances",
        "2",
        "--max-nodes",
        "20000",
        "--json-out",
        json.to_str().unwrap(),
    ];
    let a = nazone(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = nazone(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    // Header plus 2 instances x 2 strategies x 3 routing modes.
    assert_eq!(text.lines().count(), 13);
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 12);
    for r in rows.as_array().unwrap() {
        if r["strategy"] == "ids" {
            assert_eq!(r["status"], "ok");
        } else {
            assert!(r["status"] == "ok" || r["status"] == "memorylimit", "{r}");
        }
    }
}

#[test]
fn bench_reports_capacity_per_instance() {
    let out = nazone(&[
        "bench",
        "--qubits",
        "700",
        "--parallelism",
        "310",
        "--layers",
        "1",
        "--strategies",
        "ids",
        "--routings",
        "auto",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("capacity"));
}

#[test]
fn bench_rejects_invalid_spec() {
    let out = nazone(&["bench", "--qubits", "10", "--parallelism", "6"]);
    assert_eq!(out.status.code(), Some(1));
}
