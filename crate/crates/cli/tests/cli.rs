use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn ggpu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ggpu"))
        .args(args)
        .env_remove("GGPU_PORT")
        .output()
        .expect("binary runs")
}

fn fx(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ggpu-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("json output")
}

#[test]
fn plan_single_cu_at_667_uses_71_blocks() {
    let out = tmp("plan1.json");
    let o = ggpu(&[
        "plan", "--cus", "1", "--target-mhz", "667", "--tech", &fx(""), "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&std::fs::read(&out).unwrap());
    assert_eq!(doc["ppa"]["memory_count"], 71);
    assert_eq!(doc["feasible"], true);
}

#[test]
fn plan_eight_cus_with_wires_is_infeasible() {
    let o = ggpu(&["plan", "--cus", "8", "--target-mhz", "667", "--wire"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible; best 600 MHz"));
    assert_eq!(json(&o.stdout)["feasible"], false);
}

#[test]
fn usage_errors_exit_2() {
    let o = ggpu(&["plan", "--cus", "9", "--target-mhz", "667"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(ggpu(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ggpu(&["plan", "--cus", "1"]).status.code(), Some(2));
    let bad_format = ggpu(&[
        "compare", "--benchmarks", &fx("table3.csv"), "--ppa", &fx("table1.csv"), "--riscv-area", "0.734",
        "--format", "yaml",
    ]);
    assert_eq!(bad_format.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_1() {
    let o = ggpu(&["plan", "--cus", "1", "--target-mhz", "590", "--tech", "/nonexistent/params.json"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ggpu(&["calibrate", "--table1", &fx("table3.csv")]);
    assert_eq!(o.status.code(), Some(1));
    let o = ggpu(&["plan", "--cus", "1", "--target-mhz", "590", "--max-area", "1.0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("area"));
}

#[test]
fn plan_output_is_deterministic() {
    let args = ["plan", "--cus", "2", "--target-mhz", "667"];
    assert_eq!(ggpu(&args).stdout, ggpu(&args).stdout);
}

#[test]
fn map_reads_a_planned_design_and_recommends() {
    let design = tmp("d590.json");
    let o = ggpu(&[
        "plan", "--cus", "1", "--target-mhz", "590", "-o", tmp("p590.json").to_str().unwrap(), "--design-out",
        design.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = ggpu(&["map", "--design", design.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&o.stdout);
    assert!(doc["fmax_mhz"].as_f64().unwrap() >= 590.0 - 1e-6);
    assert!(doc["recommendation"]["action"].is_object());

    let delays = tmp("delays.json");
    std::fs::write(&delays, r#"{"cu0.spm3.s0": 4.0}"#).unwrap();
    let o = ggpu(&["map", "--design", design.to_str().unwrap(), "--mem-delays", delays.to_str().unwrap()]);
    let doc = json(&o.stdout);
    assert_eq!(doc["recommendation"]["bottleneck"], "cu0.spm3.s0");

    let o = ggpu(&["map", "--design", design.to_str().unwrap(), "--report"]);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("from,to,net,delay_ns,cumulative_ns"));

    let broken = tmp("broken.json");
    std::fs::write(&broken, "{\"schema_version\": 1}").unwrap();
    assert_eq!(ggpu(&["map", "--design", broken.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn simulate_single_and_sweep() {
    let o = ggpu(&["simulate", "--kernel", &fx("kernels/mat_mul.json"), "--cus", "2", "--sim", &fx("sim/default.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json(&o.stdout)["cycles"].as_u64().unwrap() > 0);
    let o = ggpu(&[
        "simulate", "--kernel", &fx("kernels/xcorr_like.json"), "--cus", "1,2,4,8", "--sim", &fx("sim/contended.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    let bad = tmp("wg.json");
    std::fs::write(
        &bad,
        std::fs::read_to_string(fixtures().join("kernels/mat_mul.json")).unwrap().replace("256", "600"),
    )
    .unwrap();
    let o = ggpu(&["simulate", "--kernel", bad.to_str().unwrap(), "--cus", "1", "--sim", &fx("sim/default.json")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_writes_both_formats() {
    let out = tmp("speedups.json");
    let o = ggpu(&[
        "compare", "--benchmarks", &fx("table3.csv"), "--ppa", &fx("table1.csv"), "--riscv-area", "0.734", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&std::fs::read(&out).unwrap());
    assert_eq!(doc["cells"].as_array().unwrap().len(), 28);
    assert_eq!(doc["summary"]["max_raw"]["kernel"], "mat_mul");

    let areas = tmp("areas.csv");
    std::fs::write(&areas, "cus,total_area_mm2\n1,4.19\n2,7.45\n4,13.84\n8,26.51\n").unwrap();
    let o = ggpu(&[
        "compare", "--benchmarks", &fx("table3.csv"), "--ppa", areas.to_str().unwrap(), "--riscv-area", "0.734",
        "--format", "delimited",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("kernel,cus,raw,derated"));
    assert_eq!(text.lines().count(), 29);
}

#[test]
fn enumerate_prints_the_summary_table() {
    let o = ggpu(&["enumerate", "--cus", "1,2", "--freqs", "500,667"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().nth(4).unwrap().starts_with("2@667MHz"));
}
