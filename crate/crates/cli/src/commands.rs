use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ggpu_core::analysis::{emit_report, load_area_map, load_benchmarks, speedup_report};
use ggpu_core::calibration::calibrate;
use ggpu_core::design::{build_reference_design, read_design, validate_design, write_design, GGpuConfig, Variant};
use ggpu_core::planner::{check_spec, enumerate_candidates, optimize_to_target, recommend, summary_table, Spec};
use ggpu_core::sim::{build_workload, scaling_sweep, simulate, sweep_table, SimParams};
use ggpu_core::tech::{parse_table1, TechParams};
use ggpu_core::timing::{analyze, timing_report};
use ggpu_core::Error;
use serde::Serialize;

/// Failure of a command, split by the exit status it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(m) => Failure::Usage(m),
            e => Failure::Domain(e.to_string()),
        }
    }
}

pub type Outcome = std::result::Result<(), Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))
}

fn emit(doc: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => std::fs::write(p, doc).map_err(|e| Failure::Domain(format!("{}: {e}", p.display()))),
        None => {
            print!("{doc}");
            Ok(())
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("document serializes");
    s.push('\n');
    s
}

/// Technology parameters from a file, a directory holding `tech_params.json`,
/// or the shipped calibration when no path is given.
pub fn load_tech(path: Option<&Path>) -> std::result::Result<TechParams, Failure> {
    let Some(path) = path else {
        return Ok(TechParams::shipped());
    };
    let file: PathBuf = if path.is_dir() { path.join("tech_params.json") } else { path.to_path_buf() };
    let p = TechParams::from_document(&read(&file)?)?;
    p.check()?;
    Ok(p)
}

pub struct PlanArgs<'a> {
    pub cus: u32,
    pub target_mhz: f64,
    pub wire: bool,
    pub tech: Option<&'a Path>,
    pub max_area_mm2: Option<f64>,
    pub max_power_w: Option<f64>,
    pub out: Option<&'a Path>,
    pub design_out: Option<&'a Path>,
}

#[derive(Serialize)]
struct PlanDocument<'a> {
    num_cus: u32,
    target_freq_mhz: f64,
    achieved_fmax_mhz: f64,
    feasible: bool,
    iterations: u32,
    violated: &'a [String],
    transform_log: &'a [ggpu_core::transforms::Transform],
    ppa: &'a ggpu_core::tech::PpaEstimate,
}

pub fn plan(a: &PlanArgs) -> Outcome {
    let p = load_tech(a.tech)?;
    let spec = Spec {
        max_area_mm2: a.max_area_mm2,
        max_power_w: a.max_power_w,
        ..Spec::new(a.cus, a.target_mhz, a.wire)
    };
    spec.check()?;
    let base = build_reference_design(a.cus, Variant::Baseline)?;
    let r = optimize_to_target(&base, &p, &spec)?;
    let verdict = check_spec(&r, &spec);
    let doc = PlanDocument {
        num_cus: r.num_cus,
        target_freq_mhz: r.target_freq_mhz,
        achieved_fmax_mhz: r.achieved_fmax_mhz,
        feasible: r.feasible,
        iterations: r.iterations,
        violated: &verdict.violated,
        transform_log: &r.transform_log,
        ppa: &r.ppa,
    };
    emit(&pretty(&doc), a.out)?;
    if let Some(path) = a.design_out {
        emit(&write_design(&r.design), Some(path))?;
    }
    if !r.feasible {
        return Err(Failure::Domain(format!("infeasible; best {:.0} MHz", r.achieved_fmax_mhz)));
    }
    if !verdict.pass {
        return Err(Failure::Domain(format!("specification violated: {}", verdict.violated.join(", "))));
    }
    Ok(())
}

pub struct MapArgs<'a> {
    pub design: &'a Path,
    pub mem_delays: Option<&'a Path>,
    pub tech: Option<&'a Path>,
    pub wire: bool,
    pub target_mhz: Option<f64>,
    pub report: bool,
}

#[derive(Serialize)]
struct MapDocument {
    fmax_mhz: f64,
    critical_path: ggpu_core::timing::CriticalPath,
    recommendation: ggpu_core::planner::Recommendation,
}

pub fn map(a: &MapArgs) -> Outcome {
    let p = load_tech(a.tech)?;
    let d = read_design(&read(a.design)?)?;
    let v = validate_design(&d);
    if let Some(first) = v.violations.first() {
        return Err(Failure::Domain(format!(
            "design has {} violation(s); first: {} {}",
            v.violations.len(),
            first.subject,
            first.message
        )));
    }
    let delays: BTreeMap<String, f64> = match a.mem_delays {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?,
        None => BTreeMap::new(),
    };
    let analysis = analyze(&d, &p, a.wire, &delays)?;
    if a.report {
        return emit(&timing_report(&analysis.critical), None);
    }
    let rec = recommend(&d, &p, Some(&delays), a.wire, a.target_mhz)?;
    emit(
        &pretty(&MapDocument {
            fmax_mhz: analysis.fmax(),
            critical_path: analysis.critical,
            recommendation: rec,
        }),
        None,
    )
}

pub fn simulate_cmd(kernel: &Path, cus: &[u32], sim: &Path, seed: u64) -> Outcome {
    let w = build_workload(&read(kernel)?)?;
    let sp = SimParams::from_document(&read(sim)?)?;
    match cus {
        [c] => emit(&pretty(&simulate(&w, &GGpuConfig::new(*c)?, &sp, seed)?), None),
        list => emit(&sweep_table(&scaling_sweep(&w, list, &sp, seed)?), None),
    }
}

/// Area per CU count from either a `cus,total_area_mm2` table or a
/// synthesis table, in which case the 500 MHz rows are used.
fn area_map(doc: &str) -> std::result::Result<BTreeMap<u32, f64>, Failure> {
    if let Ok(rows) = parse_table1(doc) {
        return Ok(rows
            .iter()
            .filter(|r| r.variant().ok() == Some(Variant::Baseline))
            .map(|r| (r.cus, r.total_area_mm2))
            .collect());
    }
    Ok(load_area_map(doc)?)
}

pub fn compare(benchmarks: &Path, ppa: &Path, riscv_area: f64, format: &str, out: Option<&Path>) -> Outcome {
    let recs = load_benchmarks(&read(benchmarks)?)?;
    let areas = area_map(&read(ppa)?)?;
    let report = speedup_report(&recs, &areas, riscv_area)?;
    emit(&emit_report(&report, format)?, out)
}

pub fn calibrate_cmd(table1: &Path, out: Option<&Path>) -> Outcome {
    let rows = parse_table1(&read(table1)?)?;
    let report = calibrate(&rows)?;
    for r in &report.residuals {
        eprintln!(
            "{}@{}: area {:+.2}% dynamic {:+.2}%",
            r.cus,
            r.freq_mhz,
            100.0 * r.total_area_rel,
            100.0 * r.dynamic_rel
        );
    }
    emit(&report.params.to_document(), out)
}

pub fn enumerate(cus: &[u32], freqs: &[f64], wire: bool, tech: Option<&Path>, out: Option<&Path>) -> Outcome {
    let p = load_tech(tech)?;
    let results = enumerate_candidates(cus, freqs, &p, wire)?;
    emit(&summary_table(&results), out)
}
