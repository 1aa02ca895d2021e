//! Fits tech parameters to the synthesis results table and to the frequency
//! ladder of the reference designs.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_reference_design, Design, Variant};
use crate::error::{Error, Result};
use crate::planner::{optimize_to_target, Spec};
use crate::tech::{estimate_ppa, mem_area, Table1Row, TechParams, FF_CELL_RATIO, REF_MHZ};
use crate::timing::{analyze, fmax_of};

/// Critical delay the baseline design is pinned to (ns).
pub const BASELINE_CP_NS: f64 = 2.0;
/// Best frequency of the eight-CU design once wire delay dominates (MHz).
pub const WIRE_CAP_MHZ: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Inventory {
    blocks: f64,
    bits: f64,
    logic_units: f64,
}

fn inventory(d: &Design) -> Inventory {
    Inventory {
        blocks: d.memories.len() as f64,
        bits: d.memories.iter().map(|m| m.spec.bits() as f64).sum(),
        logic_units: TechParams::logic_units(d.ff_count(), d.comb_count()),
    }
}

pub fn check_block_law(rows: &[Table1Row]) -> Result<()> {
    for r in rows {
        let v = r.variant()?;
        if !(1..=8).contains(&r.cus) {
            return Err(Error::Calibration(format!("row with {} CUs", r.cus)));
        }
        let want = v.block_count(r.cus);
        if r.memories != want {
            return Err(Error::Calibration(format!(
                "{}@{}MHz lists {} memories, reference inventory has {want}",
                r.cus, r.freq_mhz, r.memories
            )));
        }
    }
    Ok(())
}

/// Non-negative least squares for a handful of unknowns by exhaustive
/// active-set enumeration.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << n) {
        let cols: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let mut x = DVector::zeros(n);
        if !cols.is_empty() {
            let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])] / norms[cols[k]]);
            let sol = sub
                .svd(true, true)
                .solve(b, 1e-14)
                .map_err(|e| Error::Calibration(e.to_string()))?;
            if sol.iter().any(|v| *v < 0.0) {
                continue;
            }
            for (k, &j) in cols.iter().enumerate() {
                x[j] = sol[k] / norms[j];
            }
        }
        let r = (a * &x - b).norm_squared();
        if best.as_ref().is_none_or(|(br, _)| r < *br) {
            best = Some((r, x));
        }
    }
    best.map(|(_, x)| x).ok_or_else(|| Error::Calibration("no feasible solution".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpaCoefficients {
    pub a0: f64,
    pub abit: f64,
    pub logic_area: f64,
    pub leak_blk: f64,
    pub leak_comb: f64,
    pub edyn_blk: f64,
    pub edyn_comb: f64,
}

impl PpaCoefficients {
    pub fn apply(&self, p: &mut TechParams) {
        p.a0 = self.a0;
        p.abit = self.abit;
        p.logic_area = self.logic_area;
        p.ff_area = FF_CELL_RATIO * self.logic_area;
        p.leak_blk = self.leak_blk;
        p.leak_comb = self.leak_comb;
        p.leak_ff = FF_CELL_RATIO * self.leak_comb;
        p.edyn_blk = self.edyn_blk;
        p.edyn_comb = self.edyn_comb;
        p.edyn_ff = FF_CELL_RATIO * self.edyn_comb;
    }
}

/// Relative least-squares fit of area, leakage and dynamic power.
pub fn calibrate_ppa(rows: &[Table1Row]) -> Result<PpaCoefficients> {
    if rows.is_empty() {
        return Err(Error::Calibration("no rows".into()));
    }
    check_block_law(rows)?;
    let inv: Vec<Inventory> = rows
        .iter()
        .map(|r| build_reference_design(r.cus, r.variant()?).map(|d| inventory(&d)))
        .collect::<Result<_>>()?;

    let n = rows.len();
    let mut a = DMatrix::zeros(2 * n, 3);
    let mut b = DVector::zeros(2 * n);
    for (i, (r, v)) in rows.iter().zip(&inv).enumerate() {
        let t = r.total_area_mm2;
        let m = r.memory_area_mm2;
        a[(2 * i, 0)] = v.blocks / t;
        a[(2 * i, 1)] = v.bits / t;
        a[(2 * i, 2)] = v.logic_units / t;
        b[2 * i] = 1.0;
        a[(2 * i + 1, 0)] = v.blocks / m;
        a[(2 * i + 1, 1)] = v.bits / m;
        b[2 * i + 1] = 1.0;
    }
    let area = nnls(&a, &b)?;
    let (a0, abit, logic_area) = (area[0], area[1], area[2]);
    if a0 <= 0.0 {
        return Err(Error::Calibration("fit drove the per-block area to zero".into()));
    }

    let mem_areas: Vec<f64> = inv.iter().map(|v| a0 * v.blocks + abit * v.bits).collect();
    let fit2 = |target: &dyn Fn(&Table1Row) -> f64, scale: &dyn Fn(&Table1Row) -> f64| -> Result<(f64, f64)> {
        let mut a = DMatrix::zeros(n, 2);
        let b = DVector::from_element(n, 1.0);
        for (i, r) in rows.iter().enumerate() {
            let t = target(r);
            let s = scale(r);
            a[(i, 0)] = mem_areas[i] * s / t;
            a[(i, 1)] = inv[i].logic_units * s / t;
        }
        let x = nnls(&a, &b)?;
        Ok((x[0], x[1]))
    };
    let (leak_blk, leak_comb) = fit2(&|r| r.leakage_mw, &|_| 1.0)?;
    let (edyn_blk, edyn_comb) = fit2(&|r| r.dynamic_w, &|r| r.freq_mhz / REF_MHZ)?;
    Ok(PpaCoefficients {
        a0,
        abit,
        logic_area,
        leak_blk,
        leak_comb,
        edyn_blk,
        edyn_comb,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingFit {
    pub t0: f64,
    pub tw: f64,
    pub tb: f64,
    pub mux_step: f64,
    /// Smallest distance of any launch-point delay from a ladder period (ns).
    pub margin_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingGrid {
    pub tw: Vec<f64>,
    pub tb: Vec<f64>,
    pub mux_step: Vec<f64>,
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

impl Default for TimingGrid {
    fn default() -> Self {
        TimingGrid {
            tw: steps(0.0, 0.03, 0.0025),
            tb: steps(0.010, 0.018, 0.0005),
            mux_step: steps(0.001, 0.010, 0.001),
        }
    }
}

/// Base delay that pins the baseline critical path to `BASELINE_CP_NS`.
pub fn solve_t0(p: &TechParams) -> Result<f64> {
    let base = build_reference_design(1, Variant::Baseline)?;
    let probe = TechParams { t0: 0.0, ..*p };
    let a = analyze(&base, &probe, false, &Default::default())?;
    let g = &a.graph;
    let mut mem_max: f64 = 0.0;
    let mut logic_max: f64 = 0.0;
    for &s in &a.tails.sources {
        let t = a.tails.tail[s];
        if g.name(s).starts_with("mo:") {
            mem_max = mem_max.max(t);
        } else {
            logic_max = logic_max.max(t);
        }
    }
    if logic_max >= BASELINE_CP_NS {
        return Err(Error::Calibration("logic path exceeds the baseline period".into()));
    }
    let t0 = BASELINE_CP_NS - mem_max;
    if t0 < 0.0 {
        return Err(Error::Calibration("memory path exceeds the baseline period at t0 = 0".into()));
    }
    Ok(t0)
}

fn same_structure(a: &Design, b: &Design) -> bool {
    a.without_log() == b.without_log()
}

/// Ladder margin of one parameter point, or `None` when the 1-CU planner
/// does not land on the reference variants.
pub fn ladder_margin(p: &TechParams) -> Result<Option<f64>> {
    let base = build_reference_design(1, Variant::Baseline)?;
    let r590 = optimize_to_target(&base, p, &Spec::new(1, 590.0, false))?;
    if !r590.feasible || !same_structure(&r590.design, &build_reference_design(1, Variant::V590)?) {
        return Ok(None);
    }
    let r667 = optimize_to_target(&r590.design, p, &Spec::new(1, 667.0, false))?;
    if !r667.feasible || !same_structure(&r667.design, &build_reference_design(1, Variant::V667)?) {
        return Ok(None);
    }
    let periods = [fmax_of(590.0), fmax_of(667.0)];
    let mut margin = f64::INFINITY;
    for d in [&base, &r590.design, &r667.design] {
        let a = analyze(d, p, false, &Default::default())?;
        for &s in &a.tails.sources {
            for t in periods {
                margin = margin.min((a.tails.tail[s] - t).abs());
            }
        }
    }
    Ok(Some(margin))
}

/// Grid search for the delay coefficients with the widest ladder margin.
pub fn calibrate_timing(base: &TechParams, grid: &TimingGrid) -> Result<TimingFit> {
    let mut points = Vec::new();
    for &tw in &grid.tw {
        for &tb in &grid.tb {
            for &m in &grid.mux_step {
                points.push((tw, tb, m));
            }
        }
    }
    let fits: Vec<Option<TimingFit>> = points
        .par_iter()
        .map(|&(tw, tb, mux_step)| {
            let mut p = TechParams {
                t0: 0.0,
                tw,
                tb,
                mux_step,
                kappa: 0.0,
                ..*base
            };
            let Ok(t0) = solve_t0(&p) else { return Ok(None) };
            p.t0 = t0;
            Ok(ladder_margin(&p)?.map(|margin_ns| TimingFit {
                t0,
                tw,
                tb,
                mux_step,
                margin_ns,
            }))
        })
        .collect::<Result<_>>()?;
    fits.into_iter()
        .flatten()
        .fold(None, |best: Option<TimingFit>, f| match best {
            Some(b) if b.margin_ns >= f.margin_ns => Some(b),
            _ => Some(f),
        })
        .ok_or_else(|| Error::Calibration("no grid point reproduces the frequency ladder".into()))
}

/// Wire coefficient that caps the optimized eight-CU design at `WIRE_CAP_MHZ`.
pub fn calibrate_kappa(p: &TechParams) -> Result<f64> {
    let base = build_reference_design(8, Variant::Baseline)?;
    let target_ns = fmax_of(WIRE_CAP_MHZ);
    let cp_at = |d: &Design, kappa: f64| -> Result<f64> {
        let q = TechParams { kappa, ..*p };
        Ok(analyze(d, &q, true, &Default::default())?.critical.total_delay_ns)
    };
    let mut kappa = 0.0;
    for _ in 0..32 {
        let q = TechParams { kappa, ..*p };
        let stopped = optimize_to_target(&base, &q, &Spec::new(8, 667.0, true))?.design;
        let (mut lo, mut hi) = (0.0, 0.05);
        while cp_at(&stopped, hi)? < target_ns {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::Calibration("wire delay cannot reach the cap".into()));
            }
        }
        if cp_at(&stopped, lo)? > target_ns {
            return Err(Error::Calibration("design misses the cap without wires".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cp_at(&stopped, mid)? < target_ns {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let next = 0.5 * (lo + hi);
        if (next - kappa).abs() < 1e-12 {
            return Ok(next);
        }
        kappa = next;
    }
    Err(Error::Calibration("wire coefficient did not converge".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResidual {
    pub cus: u32,
    pub freq_mhz: f64,
    pub total_area_rel: f64,
    pub memory_area_rel: f64,
    pub leakage_rel: f64,
    pub dynamic_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub variant: Variant,
    pub metric: String,
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least-squares line through (x, y) points.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn linear_fits(rows: &[Table1Row]) -> Vec<LinearFit> {
    let mut out = Vec::new();
    for v in Variant::ALL {
        let sel: Vec<&Table1Row> = rows.iter().filter(|r| r.variant().ok() == Some(v)).collect();
        if sel.len() < 2 {
            continue;
        }
        let area: Vec<(f64, f64)> = sel.iter().map(|r| (f64::from(r.cus), r.total_area_mm2)).collect();
        let dynp: Vec<(f64, f64)> = sel.iter().map(|r| (f64::from(r.cus), r.dynamic_w)).collect();
        for (metric, pts) in [("total_area_mm2", area), ("dynamic_w", dynp)] {
            let (slope, intercept) = fit_line(&pts);
            out.push(LinearFit {
                variant: v,
                metric: metric.into(),
                slope,
                intercept,
            });
        }
    }
    out
}

pub fn residuals(rows: &[Table1Row], p: &TechParams) -> Result<Vec<RowResidual>> {
    rows.iter()
        .map(|r| {
            let d = build_reference_design(r.cus, r.variant()?)?;
            let e = estimate_ppa(&d, p, r.freq_mhz)?;
            Ok(RowResidual {
                cus: r.cus,
                freq_mhz: r.freq_mhz,
                total_area_rel: e.total_area_mm2 / r.total_area_mm2 - 1.0,
                memory_area_rel: e.memory_area_mm2 / r.memory_area_mm2 - 1.0,
                leakage_rel: e.leakage_mw / r.leakage_mw - 1.0,
                dynamic_rel: e.dynamic_w / r.dynamic_w - 1.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub params: TechParams,
    pub timing: TimingFit,
    pub residuals: Vec<RowResidual>,
    pub linear_fits: Vec<LinearFit>,
    pub mean_block_area_mm2: f64,
}

pub fn calibrate(rows: &[Table1Row]) -> Result<CalibrationReport> {
    calibrate_with_grid(rows, &TimingGrid::default())
}

pub fn calibrate_with_grid(rows: &[Table1Row], grid: &TimingGrid) -> Result<CalibrationReport> {
    let coeffs = calibrate_ppa(rows)?;
    let mut p = TechParams::uncalibrated();
    coeffs.apply(&mut p);
    let timing = calibrate_timing(&p, grid)?;
    p.t0 = timing.t0;
    p.tw = timing.tw;
    p.tb = timing.tb;
    p.mux_step = timing.mux_step;
    p.kappa = 0.0;
    p.kappa = calibrate_kappa(&p)?;
    p.check()?;
    let base = build_reference_design(1, Variant::Baseline)?;
    let mut area = 0.0;
    for m in &base.memories {
        area += mem_area(&m.spec, &p)?;
    }
    Ok(CalibrationReport {
        params: p,
        timing,
        residuals: residuals(rows, &p)?,
        linear_fits: linear_fits(rows),
        mean_block_area_mm2: area / base.memories.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaGrowth {
    pub cus: Vec<u32>,
    /// Percent growth per CU count, baseline to v590.
    pub to_590_pct: Vec<f64>,
    /// Percent growth per CU count, v590 to v667.
    pub to_667_pct: Vec<f64>,
    pub mean_to_590_pct: f64,
    pub mean_to_667_pct: f64,
}

/// Estimated total-area growth along the frequency ladder.
pub fn area_growth(p: &TechParams, cus: &[u32]) -> Result<AreaGrowth> {
    let mut to_590 = Vec::new();
    let mut to_667 = Vec::new();
    for &c in cus {
        let area = |v: Variant| -> Result<f64> {
            let d = build_reference_design(c, v)?;
            Ok(estimate_ppa(&d, p, v.target_mhz())?.total_area_mm2)
        };
        let (a5, a9, a6) = (area(Variant::Baseline)?, area(Variant::V590)?, area(Variant::V667)?);
        to_590.push(100.0 * (a9 / a5 - 1.0));
        to_667.push(100.0 * (a6 / a9 - 1.0));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(AreaGrowth {
        cus: cus.to_vec(),
        mean_to_590_pct: mean(&to_590),
        mean_to_667_pct: mean(&to_667),
        to_590_pct: to_590,
        to_667_pct: to_667,
    })
}
