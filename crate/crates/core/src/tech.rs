//! Parametric memory and logic models and the first-order PPA estimator.

use serde::{Deserialize, Deserializer, Serialize};

use crate::design::{Design, MemBlockSpec, Variant};
use crate::error::{Error, Result};

/// Flip-flop to combinational-cell ratio shared by the area, leakage and
/// dynamic-power coefficients.
pub const FF_CELL_RATIO: f64 = 2.5;
/// Frequency at which dynamic coefficients are expressed.
pub const REF_MHZ: f64 = 1000.0;
/// Memory access activity assumed by the estimator.
pub const ESTIMATOR_ACCESS_RATE: f64 = 1.0;

fn unset() -> f64 {
    f64::NAN
}

fn nullable<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

macro_rules! tech_params {
    ($($(#[$doc:meta])* $field:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        pub struct TechParams {
            $(
                $(#[$doc])*
                #[serde(default = "unset", deserialize_with = "nullable")]
                pub $field: f64,
            )*
        }

        impl TechParams {
            pub fn uncalibrated() -> Self {
                TechParams { $($field: f64::NAN),* }
            }

            pub fn fields(&self) -> Vec<(&'static str, f64)> {
                vec![$((stringify!($field), self.$field)),*]
            }
        }
    };
}

tech_params! {
    /// Base access delay (ns).
    t0,
    /// Delay per doubling of the word count (ns).
    tw,
    /// Delay per data bit (ns).
    tb,
    /// Delay per MSB-mux level (ns).
    mux_step,
    /// Fixed area per memory block (mm2).
    a0,
    /// Area per stored bit (mm2).
    abit,
    /// Leakage per mm2 of memory (mW).
    leak_blk,
    leak_ff,
    leak_comb,
    /// Dynamic power per mm2 of memory at full activity and `REF_MHZ` (W).
    edyn_blk,
    edyn_ff,
    edyn_comb,
    /// Wire delay per mm of Manhattan distance (ns/mm).
    kappa,
    logic_area,
    ff_area,
}

impl TechParams {
    pub fn check(&self) -> Result<()> {
        for (name, v) in self.fields() {
            if v.is_nan() {
                return Err(Error::State(format!("tech parameter `{name}` is unset")));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Range(format!("tech parameter `{name}` = {v} must be finite and >= 0")));
            }
        }
        if self.a0 <= 0.0 {
            return Err(Error::Range("a0 must be strictly positive".into()));
        }
        Ok(())
    }

    pub fn is_calibrated(&self) -> bool {
        self.check().is_ok()
    }

    pub fn to_document(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("params serialize");
        s.push('\n');
        s
    }

    pub fn from_document(doc: &str) -> Result<Self> {
        serde_json::from_str(doc).map_err(Error::from_json)
    }

    /// Calibrated parameters shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_document(include_str!("../fixtures/tech_params.json")).expect("shipped fixture parses")
    }

    /// Area of one weighted logic unit (a comb cell; a flip-flop counts `FF_CELL_RATIO`).
    pub fn logic_units(ff: u64, comb: u64) -> f64 {
        FF_CELL_RATIO * ff as f64 + comb as f64
    }
}

pub fn mem_delay(spec: &MemBlockSpec, p: &TechParams) -> Result<f64> {
    spec.check_range()?;
    let doublings = (f64::from(spec.words) / 16.0).log2();
    Ok(p.t0 + p.tw * doublings + p.tb * f64::from(spec.word_bits))
}

pub fn mem_area(spec: &MemBlockSpec, p: &TechParams) -> Result<f64> {
    spec.check_range()?;
    Ok(p.a0 + p.abit * spec.bits() as f64)
}

/// Leakage (mW) and dynamic power (W) of one block at `freq_mhz`.
pub fn mem_power(spec: &MemBlockSpec, access_rate: f64, p: &TechParams, freq_mhz: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&access_rate) {
        return Err(Error::Range(format!("access rate {access_rate} outside [0, 1]")));
    }
    if !(freq_mhz >= 0.0 && freq_mhz.is_finite()) {
        return Err(Error::Range(format!("frequency {freq_mhz} MHz")));
    }
    let area = mem_area(spec, p)?;
    Ok((p.leak_blk * area, p.edyn_blk * area * access_rate * freq_mhz / REF_MHZ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpaEstimate {
    pub total_area_mm2: f64,
    pub memory_area_mm2: f64,
    pub ff_count: u64,
    pub comb_count: u64,
    pub memory_count: u32,
    pub leakage_mw: f64,
    pub dynamic_w: f64,
    pub total_w: f64,
    pub fmax_mhz: f64,
}

pub fn estimate_ppa(d: &Design, p: &TechParams, freq_mhz: f64) -> Result<PpaEstimate> {
    p.check()?;
    if !(freq_mhz > 0.0 && freq_mhz.is_finite()) {
        return Err(Error::Range(format!("frequency {freq_mhz} MHz must be positive")));
    }
    let mut memory_area = 0.0;
    for m in &d.memories {
        memory_area += mem_area(&m.spec, p)?;
    }
    let ff = d.ff_count();
    let comb = d.comb_count();
    let ff_f = ff as f64;
    let comb_f = comb as f64;
    let total_area = memory_area + p.ff_area * ff_f + p.logic_area * comb_f;
    let leakage_mw = p.leak_blk * memory_area + p.leak_ff * ff_f + p.leak_comb * comb_f;
    let dynamic_w = (p.edyn_blk * memory_area * ESTIMATOR_ACCESS_RATE + p.edyn_ff * ff_f + p.edyn_comb * comb_f)
        * freq_mhz
        / REF_MHZ;
    Ok(PpaEstimate {
        total_area_mm2: total_area,
        memory_area_mm2: memory_area,
        ff_count: ff,
        comb_count: comb,
        memory_count: d.memories.len() as u32,
        leakage_mw,
        dynamic_w,
        total_w: leakage_mw / 1000.0 + dynamic_w,
        fmax_mhz: freq_mhz,
    })
}

/// Area of the logic and memories placed in one partition.
pub fn partition_area(d: &Design, p: &TechParams, part: crate::design::Partition) -> Result<f64> {
    let mut area = 0.0;
    for m in d.memories.iter().filter(|m| m.partition == part) {
        area += mem_area(&m.spec, p)?;
    }
    let ff: u64 = d
        .registers
        .iter()
        .filter(|r| r.partition == part)
        .map(|r| u64::from(r.width))
        .chain(d.pipeline_regs.iter().filter(|r| r.partition == part).map(|r| u64::from(r.width)))
        .sum();
    let comb: u64 = d.stages.iter().filter(|s| s.partition == part).map(|s| s.cells).sum();
    Ok(area + p.ff_area * ff as f64 + p.logic_area * comb as f64)
}

/// One row of the synthesis results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub cus: u32,
    pub freq_mhz: f64,
    pub total_area_mm2: f64,
    pub memory_area_mm2: f64,
    pub ff: u64,
    pub comb: u64,
    pub memories: u32,
    pub leakage_mw: f64,
    pub dynamic_w: f64,
    pub total_w: f64,
}

impl Table1Row {
    pub fn variant(&self) -> Result<Variant> {
        Variant::from_mhz(self.freq_mhz).ok_or_else(|| {
            Error::Calibration(format!("no reference variant runs at {} MHz", self.freq_mhz))
        })
    }
}

pub const TABLE1_HEADER: [&str; 9] = [
    "#CU & Freq.",
    "Total Area (mm^2)",
    "Memory Area (mm^2)",
    "#FF",
    "#Comb.",
    "#Memory",
    "Leakage (mW)",
    "Dynamic (W)",
    "Total (W)",
];

fn parse_config_label(label: &str) -> Option<(u32, f64)> {
    let (cus, freq) = label.trim().split_once('@')?;
    let freq = freq.trim().strip_suffix("MHz")?;
    Some((cus.trim().parse().ok()?, freq.trim().parse().ok()?))
}

pub fn parse_table1(doc: &str) -> Result<Vec<Table1Row>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(doc.as_bytes());
    let header = rdr.headers().map_err(Error::from_csv)?.clone();
    if header.iter().collect::<Vec<_>>() != TABLE1_HEADER {
        return Err(Error::Parse {
            line: 1,
            column: 0,
            message: format!("header must be `{}`", TABLE1_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(Error::from_csv)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |col: usize, what: &str| Error::Parse {
            line,
            column: col + 1,
            message: format!("`{}`: {what}", TABLE1_HEADER[col]),
        };
        let num = |col: usize| -> Result<f64> {
            let v: f64 = rec[col].parse().map_err(|_| bad(col, "not a number"))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(col, "must be positive"));
            }
            Ok(v)
        };
        let int = |col: usize| -> Result<u64> {
            let v: u64 = rec[col].parse().map_err(|_| bad(col, "not an integer"))?;
            if v == 0 {
                return Err(bad(col, "must be positive"));
            }
            Ok(v)
        };
        let (cus, freq_mhz) = parse_config_label(&rec[0]).ok_or_else(|| bad(0, "expected N@FMHz"))?;
        rows.push(Table1Row {
            cus,
            freq_mhz,
            total_area_mm2: num(1)?,
            memory_area_mm2: num(2)?,
            ff: int(3)?,
            comb: int(4)?,
            memories: u32::try_from(int(5)?).map_err(|_| bad(5, "too large"))?,
            leakage_mw: num(6)?,
            dynamic_w: num(7)?,
            total_w: num(8)?,
        });
    }
    Ok(rows)
}

pub fn write_table1(rows: &[Table1Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE1_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            format!("{}@{}MHz", r.cus, r.freq_mhz),
            r.total_area_mm2.to_string(),
            r.memory_area_mm2.to_string(),
            r.ff.to_string(),
            r.comb.to_string(),
            r.memories.to_string(),
            r.leakage_mw.to_string(),
            r.dynamic_w.to_string(),
            r.total_w.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
