//! Benchmark dataset, raw and area-derated speedups, and report emission.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar-core reference area (mm2).
pub const RISCV_AREA_MM2: f64 = 0.734;
pub const CU_COLUMNS: [u32; 4] = [1, 2, 4, 8];
pub const BENCHMARK_HEADER: [&str; 8] = [
    "Kernel",
    "Input RISC-V",
    "Input G-GPU",
    "RISC-V",
    "1CU",
    "2CU",
    "4CU",
    "8CU",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub kernel: String,
    pub input_riscv: f64,
    pub input_ggpu: f64,
    /// Kilo-cycles.
    pub cycles_riscv: f64,
    /// Kilo-cycles per CU count.
    pub cycles_ggpu: BTreeMap<u32, f64>,
}

pub fn load_benchmarks(doc: &str) -> Result<Vec<BenchmarkRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(doc.as_bytes());
    let header = rdr.headers().map_err(Error::from_csv)?.clone();
    let mut col = [0usize; 8];
    for (k, name) in BENCHMARK_HEADER.iter().enumerate() {
        col[k] = header.iter().position(|h| h == *name).ok_or_else(|| Error::Parse {
            line: 1,
            column: 0,
            message: format!("missing column `{name}`"),
        })?;
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(Error::from_csv)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |k: usize| -> Result<f64> {
            let raw = rec.get(col[k]).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                column: col[k] + 1,
                message: format!("`{}` = `{raw}` is not a number", BENCHMARK_HEADER[k]),
            })?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parse {
                    line,
                    column: col[k] + 1,
                    message: format!("`{}` must be positive", BENCHMARK_HEADER[k]),
                });
            }
            Ok(v)
        };
        let kernel = rec.get(col[0]).unwrap_or("").to_string();
        if kernel.is_empty() {
            return Err(Error::Parse {
                line,
                column: col[0] + 1,
                message: "empty kernel name".into(),
            });
        }
        let r = BenchmarkRecord {
            kernel,
            input_riscv: field(1)?,
            input_ggpu: field(2)?,
            cycles_riscv: field(3)?,
            cycles_ggpu: CU_COLUMNS
                .iter()
                .enumerate()
                .map(|(i, &c)| field(4 + i).map(|v| (c, v)))
                .collect::<Result<_>>()?,
        };
        if r.input_ggpu < r.input_riscv {
            return Err(Error::Parse {
                line,
                column: col[2] + 1,
                message: "G-GPU input smaller than the RISC-V input".into(),
            });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn shipped_benchmarks() -> Vec<BenchmarkRecord> {
    load_benchmarks(include_str!("../fixtures/table3.csv")).expect("shipped fixture parses")
}

pub fn raw_speedup(r: &BenchmarkRecord, cus: u32) -> Result<f64> {
    let g = r
        .cycles_ggpu
        .get(&cus)
        .ok_or_else(|| Error::Lookup(format!("{} has no {cus}-CU column", r.kernel)))?;
    Ok((r.cycles_riscv * r.input_ggpu / r.input_riscv) / g)
}

pub fn derated_speedup(r: &BenchmarkRecord, cus: u32, area_ggpu: f64, area_riscv: f64) -> Result<f64> {
    if !(area_ggpu > 0.0 && area_riscv > 0.0) {
        return Err(Error::Range("areas must be positive".into()));
    }
    Ok(raw_speedup(r, cus)? / (area_ggpu / area_riscv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupCell {
    pub kernel: String,
    pub cus: u32,
    pub raw: f64,
    pub derated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub kernel: String,
    pub cus: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max_raw: Extreme,
    pub min_raw: Extreme,
    pub max_derated: Extreme,
    pub min_derated: Extreme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSeries {
    pub kernel: String,
    pub cus: Vec<u32>,
    pub raw: Vec<f64>,
    pub derated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub cells: Vec<SpeedupCell>,
    pub area_ratio: BTreeMap<u32, f64>,
    pub summary: Summary,
    pub series: Vec<KernelSeries>,
}

impl SpeedupReport {
    pub fn cell(&self, kernel: &str, cus: u32) -> Option<&SpeedupCell> {
        self.cells.iter().find(|c| c.kernel == kernel && c.cus == cus)
    }
}

fn extreme(cells: &[SpeedupCell], value: impl Fn(&SpeedupCell) -> f64, max: bool) -> Extreme {
    let pick = cells
        .iter()
        .reduce(|a, b| {
            let (va, vb) = (value(a), value(b));
            if (max && vb > va) || (!max && vb < va) {
                b
            } else {
                a
            }
        })
        .expect("non-empty cells");
    Extreme {
        kernel: pick.kernel.clone(),
        cus: pick.cus,
        value: value(pick),
    }
}

pub fn speedup_report(
    records: &[BenchmarkRecord],
    ppa_by_cu: &BTreeMap<u32, f64>,
    area_riscv: f64,
) -> Result<SpeedupReport> {
    if records.is_empty() {
        return Err(Error::Lookup("no benchmark records".into()));
    }
    let mut area_ratio = BTreeMap::new();
    for c in CU_COLUMNS {
        let a = ppa_by_cu
            .get(&c)
            .ok_or_else(|| Error::Lookup(format!("no area for the {c}-CU configuration")))?;
        if !(*a > 0.0 && area_riscv > 0.0) {
            return Err(Error::Range("areas must be positive".into()));
        }
        area_ratio.insert(c, a / area_riscv);
    }
    let mut cells = Vec::new();
    let mut series = Vec::new();
    for r in records {
        let mut s = KernelSeries {
            kernel: r.kernel.clone(),
            cus: Vec::new(),
            raw: Vec::new(),
            derated: Vec::new(),
        };
        for c in CU_COLUMNS {
            let raw = raw_speedup(r, c)?;
            let derated = raw / area_ratio[&c];
            s.cus.push(c);
            s.raw.push(raw);
            s.derated.push(derated);
            cells.push(SpeedupCell {
                kernel: r.kernel.clone(),
                cus: c,
                raw,
                derated,
            });
        }
        series.push(s);
    }
    let summary = Summary {
        max_raw: extreme(&cells, |c| c.raw, true),
        min_raw: extreme(&cells, |c| c.raw, false),
        max_derated: extreme(&cells, |c| c.derated, true),
        min_derated: extreme(&cells, |c| c.derated, false),
    };
    Ok(SpeedupReport {
        cells,
        area_ratio,
        summary,
        series,
    })
}

/// Reads a `cus,total_area_mm2` table.
pub fn load_area_map(doc: &str) -> Result<BTreeMap<u32, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(doc.as_bytes());
    let mut out = BTreeMap::new();
    for rec in rdr.deserialize::<(u32, f64)>() {
        let (c, a) = rec.map_err(Error::from_csv)?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::parse(format!("area for {c} CUs must be positive")));
        }
        out.insert(c, a);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Delimited,
    Structured,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delimited" => Ok(ReportFormat::Delimited),
            "structured" => Ok(ReportFormat::Structured),
            _ => Err(Error::Usage(format!("unknown report format `{s}`"))),
        }
    }
}

pub fn emit_report(report: &SpeedupReport, format: &str) -> Result<String> {
    match format.parse()? {
        ReportFormat::Structured => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Delimited => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["kernel", "cus", "raw", "derated"]).expect("in-memory write");
            for c in &report.cells {
                w.write_record([c.kernel.clone(), c.cus.to_string(), c.raw.to_string(), c.derated.to_string()])
                    .expect("in-memory write");
            }
            Ok(String::from_utf8(w.into_inner().expect("flush")).expect("utf8"))
        }
    }
}

pub fn read_structured_report(doc: &str) -> Result<SpeedupReport> {
    serde_json::from_str(doc).map_err(Error::from_json)
}

pub fn read_delimited_report(doc: &str) -> Result<Vec<SpeedupCell>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(doc.as_bytes());
    rdr.deserialize::<SpeedupCell>()
        .map(|r| r.map_err(Error::from_csv))
        .collect()
}
