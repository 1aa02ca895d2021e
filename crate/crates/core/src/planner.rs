//! Iterative frequency planning: recommendation, optimization loop,
//! candidate enumeration and specification checks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{build_reference_design, Design, Variant};
use crate::error::{Error, Result};
use crate::tech::{estimate_ppa, PpaEstimate, TechParams};
use crate::timing::{analyze, Analysis, DELAY_EPS};
use crate::transforms::{self, Transform, TransformKind};

pub const ITERATION_CAP: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spec {
    pub num_cus: u32,
    pub target_freq_mhz: f64,
    #[serde(default)]
    pub max_area_mm2: Option<f64>,
    #[serde(default)]
    pub max_power_w: Option<f64>,
    #[serde(default)]
    pub wire_model: bool,
}

impl Spec {
    pub fn new(num_cus: u32, target_freq_mhz: f64, wire_model: bool) -> Self {
        Spec {
            num_cus,
            target_freq_mhz,
            max_area_mm2: None,
            max_power_w: None,
            wire_model,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(1..=8).contains(&self.num_cus) {
            return Err(Error::Config(format!("num_cus {} outside 1..=8", self.num_cus)));
        }
        if !(self.target_freq_mhz > 0.0 && self.target_freq_mhz.is_finite()) {
            return Err(Error::Range(format!("target frequency {} MHz", self.target_freq_mhz)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub cp_ns: f64,
    pub critical_sources: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub num_cus: u32,
    pub target_freq_mhz: f64,
    pub achieved_fmax_mhz: f64,
    pub transform_log: Vec<Transform>,
    pub ppa: PpaEstimate,
    pub feasible: bool,
    pub iterations: u32,
    /// Critical delay and number of critical start points before each step.
    pub history: Vec<PlanStep>,
    pub design: Design,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub current_fmax: f64,
    pub bottleneck: Option<String>,
    pub action: Option<TransformKind>,
    pub predicted_fmax_after: f64,
    pub infeasible: bool,
}

fn retained_overrides(d: &Design, overrides: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    overrides
        .iter()
        .filter(|(k, _)| d.memory(k).is_some())
        .map(|(k, v)| (k.clone(), *v))
        .collect()
}

struct Choice {
    rec: Recommendation,
    next: Option<(Design, Analysis)>,
}

fn bank_ids(d: &Design, parent: &str) -> Vec<String> {
    d.memories
        .iter()
        .filter(|m| m.logical_parent.as_deref() == Some(parent))
        .map(|m| m.id.clone())
        .collect()
}

/// Worst path launched by any bank of a freshly split memory.
fn split_tail(d: &Design, a: &Analysis, parent: &str) -> f64 {
    bank_ids(d, parent)
        .iter()
        .filter_map(|b| a.memory_tail(b))
        .fold(0.0, f64::max)
}

fn choose(
    d: &Design,
    p: &TechParams,
    overrides: &BTreeMap<String, f64>,
    wire: bool,
    a: &Analysis,
    target: Option<f64>,
) -> Result<Choice> {
    let current = a.fmax();
    let cp = &a.critical;
    if target.is_some_and(|t| current >= t - DELAY_EPS) {
        return Ok(Choice {
            rec: Recommendation {
                current_fmax: current,
                bottleneck: cp.memory_ids.first().cloned(),
                action: None,
                predicted_fmax_after: current,
                infeasible: false,
            },
            next: None,
        });
    }

    let evaluate = |kind: TransformKind| -> Result<Option<(TransformKind, Design, Analysis)>> {
        let nd = match transforms::apply(d, &kind) {
            Ok(nd) => nd,
            Err(Error::Range(_)) | Err(Error::Legality(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let na = analyze(&nd, p, wire, &retained_overrides(&nd, overrides))?;
        Ok(Some((kind, nd, na)))
    };

    if let Some(mem) = cp.launching_memory() {
        let before = a.memory_tail(mem).unwrap_or(cp.total_delay_ns);
        let mut best: Option<(f64, TransformKind, Design, Analysis)> = None;
        let candidates = [
            TransformKind::SplitWords {
                mem_id: mem.to_string(),
                fan: 2,
            },
            TransformKind::SplitBits {
                mem_id: mem.to_string(),
                fan: 2,
            },
        ];
        for kind in candidates {
            if let Some((kind, nd, na)) = evaluate(kind)? {
                let reduction = before - split_tail(&nd, &na, mem);
                let score = reduction / p.a0;
                if reduction > DELAY_EPS && best.as_ref().is_none_or(|(s, ..)| score > s + DELAY_EPS) {
                    best = Some((score, kind, nd, na));
                }
            }
        }
        if let Some((_, kind, nd, na)) = best {
            return Ok(Choice {
                rec: Recommendation {
                    current_fmax: current,
                    bottleneck: Some(mem.to_string()),
                    action: Some(kind),
                    predicted_fmax_after: na.fmax(),
                    infeasible: false,
                },
                next: Some((nd, na)),
            });
        }
    }

    let mut arcs: Vec<(f64, usize, &str)> = cp
        .edges
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let net = e.net.as_deref()?;
            let legal = d.net(net).is_some_and(|n| !n.internal);
            legal.then_some((e.delay_ns, i, net))
        })
        .collect();
    arcs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    for (_, _, net) in arcs {
        if let Some((kind, nd, na)) = evaluate(TransformKind::Pipeline {
            net_id: net.to_string(),
        })? {
            return Ok(Choice {
                rec: Recommendation {
                    current_fmax: current,
                    bottleneck: Some(net.to_string()),
                    action: Some(kind),
                    predicted_fmax_after: na.fmax(),
                    infeasible: false,
                },
                next: Some((nd, na)),
            });
        }
    }

    Ok(Choice {
        rec: Recommendation {
            current_fmax: current,
            bottleneck: cp.memory_ids.first().cloned().or_else(|| cp.edges.first().and_then(|e| e.net.clone())),
            action: None,
            predicted_fmax_after: current,
            infeasible: true,
        },
        next: None,
    })
}

pub fn recommend_next(d: &Design, p: &TechParams, measured_delays: Option<&BTreeMap<String, f64>>) -> Result<Recommendation> {
    recommend(d, p, measured_delays, false, None)
}

/// Recommendation with the wire model switch and an optional frequency target
/// below which no action is proposed.
pub fn recommend(
    d: &Design,
    p: &TechParams,
    measured_delays: Option<&BTreeMap<String, f64>>,
    wire: bool,
    target_mhz: Option<f64>,
) -> Result<Recommendation> {
    let empty = BTreeMap::new();
    let overrides = measured_delays.unwrap_or(&empty);
    let a = analyze(d, p, wire, overrides)?;
    Ok(choose(d, p, overrides, wire, &a, target_mhz)?.rec)
}

fn progressed(before: &Analysis, after: &Analysis) -> bool {
    let (b, a) = (before.critical.total_delay_ns, after.critical.total_delay_ns);
    a < b - DELAY_EPS || ((a - b).abs() <= DELAY_EPS && after.critical_sources() < before.critical_sources())
}

pub fn optimize_to_target(d: &Design, p: &TechParams, spec: &Spec) -> Result<PlanResult> {
    spec.check()?;
    let none = BTreeMap::new();
    let start_log = d.transform_log.len();
    let mut cur = d.clone();
    let mut a = analyze(&cur, p, spec.wire_model, &none)?;
    let mut iterations = 0;
    let mut history = Vec::new();
    let feasible = loop {
        history.push(PlanStep {
            cp_ns: a.critical.total_delay_ns,
            critical_sources: a.critical_sources(),
        });
        if a.fmax() >= spec.target_freq_mhz - DELAY_EPS {
            break true;
        }
        if iterations >= ITERATION_CAP {
            break false;
        }
        let choice = choose(&cur, p, &none, spec.wire_model, &a, None)?;
        let Some((nd, na)) = choice.next else { break false };
        if !progressed(&a, &na) {
            break false;
        }
        cur = nd;
        a = na;
        iterations += 1;
    };
    let achieved = a.fmax();
    let freq = if feasible { spec.target_freq_mhz } else { achieved };
    let mut ppa = estimate_ppa(&cur, p, freq)?;
    ppa.fmax_mhz = achieved;
    Ok(PlanResult {
        num_cus: cur.config.num_cus,
        target_freq_mhz: spec.target_freq_mhz,
        achieved_fmax_mhz: achieved,
        transform_log: cur.transform_log[start_log..].to_vec(),
        ppa,
        feasible,
        iterations,
        history,
        design: cur,
    })
}

/// Plans every (CU count, frequency) pair from the baseline reference design.
pub fn enumerate_candidates(cus: &[u32], freqs: &[f64], p: &TechParams, wire: bool) -> Result<Vec<PlanResult>> {
    let mut pairs: Vec<(u32, f64)> = cus
        .iter()
        .flat_map(|&c| freqs.iter().map(move |&f| (c, f)))
        .collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs
        .par_iter()
        .map(|&(c, f)| {
            let base = build_reference_design(c, Variant::Baseline)?;
            optimize_to_target(&base, p, &Spec::new(c, f, wire))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub violated: Vec<String>,
}

pub fn check_spec(r: &PlanResult, spec: &Spec) -> Verdict {
    let mut violated = Vec::new();
    if r.achieved_fmax_mhz < spec.target_freq_mhz - DELAY_EPS {
        violated.push("frequency".to_string());
    }
    if spec.max_area_mm2.is_some_and(|cap| r.ppa.total_area_mm2 > cap) {
        violated.push("area".to_string());
    }
    if spec.max_power_w.is_some_and(|cap| r.ppa.total_w > cap) {
        violated.push("power".to_string());
    }
    Verdict {
        pass: violated.is_empty(),
        violated,
    }
}

/// Human-readable summary with the synthesis-table column set.
pub fn summary_table(results: &[PlanResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "#CU & Freq.",
        "Total Area (mm^2)",
        "Memory Area (mm^2)",
        "#FF",
        "#Comb.",
        "#Memory",
        "Leakage (mW)",
        "Dynamic (W)",
        "Total (W)",
        "fmax (MHz)",
        "feasible",
    ])
    .expect("in-memory write");
    for r in results {
        let q = &r.ppa;
        w.write_record([
            format!("{}@{}MHz", r.num_cus, r.target_freq_mhz),
            format!("{:.2}", q.total_area_mm2),
            format!("{:.2}", q.memory_area_mm2),
            q.ff_count.to_string(),
            q.comb_count.to_string(),
            q.memory_count.to_string(),
            format!("{:.2}", q.leakage_mw),
            format!("{:.2}", q.dynamic_w),
            format!("{:.3}", q.total_w),
            format!("{:.1}", r.achieved_fmax_mhz),
            r.feasible.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
