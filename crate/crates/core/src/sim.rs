//! Cycle-approximate discrete-event simulator of SIMT kernel execution.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::GGpuConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelWorkload {
    pub name: String,
    pub work_items: u64,
    pub instr_per_item: u32,
    pub mem_fraction: f64,
    pub hit_rate: f64,
    pub wg_size: u32,
    #[serde(default)]
    pub serial_prologue_cycles: u64,
}

impl KernelWorkload {
    pub fn check(&self, cfg: &GGpuConfig) -> Result<()> {
        if self.wg_size > cfg.max_workitems_per_cu {
            return Err(Error::Config(format!(
                "wg_size {} exceeds {} work-items per CU",
                self.wg_size, cfg.max_workitems_per_cu
            )));
        }
        if self.wg_size == 0 || !self.wg_size.is_multiple_of(cfg.wf_size) {
            return Err(Error::Config(format!(
                "wg_size {} is not a multiple of the wavefront size {}",
                self.wg_size, cfg.wf_size
            )));
        }
        for (name, v) in [("mem_fraction", self.mem_fraction), ("hit_rate", self.hit_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.work_items == 0 {
            return Err(Error::Range("work_items must be positive".into()));
        }
        if self.instr_per_item == 0 {
            return Err(Error::Range("instr_per_item must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WfIssue {
    #[default]
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub alu_latency: u64,
    pub pipeline_depth: u64,
    pub hit_latency: u64,
    pub miss_latency: u64,
    pub channels: u32,
    /// Requests served per cycle by one channel.
    pub channel_throughput: f64,
    /// Extra service cycles when a channel switches to a different CU's stream.
    #[serde(default)]
    pub switch_penalty_cycles: u64,
    #[serde(default)]
    pub wf_issue: WfIssue,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            alu_latency: 4,
            pipeline_depth: 6,
            hit_latency: 10,
            miss_latency: 100,
            channels: 4,
            channel_throughput: 0.5,
            switch_penalty_cycles: 0,
            wf_issue: WfIssue::RoundRobin,
        }
    }
}

impl SimParams {
    pub fn check(&self, cfg: &GGpuConfig) -> Result<()> {
        for (name, v) in [
            ("alu_latency", self.alu_latency),
            ("hit_latency", self.hit_latency),
            ("miss_latency", self.miss_latency),
        ] {
            if v < 1 {
                return Err(Error::Range(format!("{name} must be at least 1")));
            }
        }
        if self.channels < 1 || self.channels > cfg.data_channels {
            return Err(Error::Config(format!(
                "{} channels, configuration provides {}",
                self.channels, cfg.data_channels
            )));
        }
        if !(self.channel_throughput > 0.0 && self.channel_throughput.is_finite()) {
            return Err(Error::Range(format!(
                "channel_throughput {} must be positive",
                self.channel_throughput
            )));
        }
        Ok(())
    }

    pub fn from_document(doc: &str) -> Result<Self> {
        serde_json::from_str(doc).map_err(Error::from_json)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub cycles: u64,
    pub per_cu_busy: Vec<f64>,
    pub channel_occupancy: Vec<f64>,
    pub wf_stall_cycles: u64,
    pub work_item_instructions: u64,
    pub memory_requests: u64,
    pub issue_cycles: u64,
}

impl SimResult {
    /// Idle issue cycles per active CU cycle.
    pub fn stall_fraction(&self) -> f64 {
        let active = self.issue_cycles + self.wf_stall_cycles;
        if active == 0 {
            0.0
        } else {
            self.wf_stall_cycles as f64 / active as f64
        }
    }
}

pub fn build_workload(doc: &str) -> Result<KernelWorkload> {
    let w: KernelWorkload = serde_json::from_str(doc).map_err(Error::from_json)?;
    w.check(&GGpuConfig::new(1)?)?;
    Ok(w)
}

/// Lower bounds (compute, bandwidth) on the cycle count of a finished run.
pub fn lower_bounds(w: &KernelWorkload, cfg: &GGpuConfig, sp: &SimParams, misses: u64) -> (f64, f64) {
    let wfs = w.work_items.div_ceil(u64::from(cfg.wf_size));
    let compute = wfs.div_ceil(u64::from(cfg.num_cus)) * u64::from(w.instr_per_item) * cfg.issue_cycles();
    let bandwidth = misses as f64 / (f64::from(sp.channels) * sp.channel_throughput);
    (compute as f64, bandwidth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Ready,
    Port,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    cu: u32,
    wf: u32,
    kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, o: &Self) -> Ordering {
        o.time
            .total_cmp(&self.time)
            .then(o.cu.cmp(&self.cu))
            .then(o.wf.cmp(&self.wf))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

struct Wavefront {
    cu: u32,
    wg: usize,
    items: u64,
    remaining: u32,
    rng: ChaCha8Rng,
}

struct Cu {
    queue: VecDeque<usize>,
    free_slots: u32,
    ready: Vec<u32>,
    port_free: f64,
    port_pending: bool,
    last_issued: Option<u32>,
    busy: u64,
    first_dispatch: Option<f64>,
    last_issue_end: f64,
}

struct Channel {
    free: f64,
    busy: f64,
    last_cu: Option<u32>,
}

fn wf_seed(seed: u64, wf: u64) -> u64 {
    let mut z = seed ^ wf.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn simulate(w: &KernelWorkload, cfg: &GGpuConfig, sp: &SimParams, seed: u64) -> Result<SimResult> {
    cfg.check()?;
    w.check(cfg)?;
    sp.check(cfg)?;
    let wf_size = u64::from(cfg.wf_size);
    let issue = cfg.issue_cycles() as f64;
    let slots = cfg.wfs_per_cu();
    let service = 1.0 / sp.channel_throughput;
    let start = w.serial_prologue_cycles as f64;

    let wg_items = u64::from(w.wg_size);
    let num_wgs = w.work_items.div_ceil(wg_items) as usize;
    let mut wg_wfs: Vec<Vec<u32>> = Vec::with_capacity(num_wgs);
    let mut wg_left: Vec<u32> = Vec::with_capacity(num_wgs);
    let mut wfs: Vec<Wavefront> = Vec::new();
    let mut cus: Vec<Cu> = (0..cfg.num_cus)
        .map(|_| Cu {
            queue: VecDeque::new(),
            free_slots: slots,
            ready: Vec::new(),
            port_free: start,
            port_pending: false,
            last_issued: None,
            busy: 0,
            first_dispatch: None,
            last_issue_end: start,
        })
        .collect();
    for g in 0..num_wgs {
        let cu = (g % cfg.num_cus as usize) as u32;
        let items = wg_items.min(w.work_items - g as u64 * wg_items);
        let mut ids = Vec::new();
        for k in 0..items.div_ceil(wf_size) {
            let id = wfs.len() as u32;
            wfs.push(Wavefront {
                cu,
                wg: g,
                items: wf_size.min(items - k * wf_size),
                remaining: w.instr_per_item,
                rng: ChaCha8Rng::seed_from_u64(wf_seed(seed, u64::from(id))),
            });
            ids.push(id);
        }
        wg_left.push(ids.len() as u32);
        wg_wfs.push(ids);
        cus[cu as usize].queue.push_back(g);
    }

    let mut channels: Vec<Channel> = (0..sp.channels)
        .map(|_| Channel {
            free: start,
            busy: 0.0,
            last_cu: None,
        })
        .collect();
    let mut next_channel = 0usize;
    let mut heap = BinaryHeap::new();
    let mut end = start;
    let mut executed = 0u64;
    let mut misses = 0u64;

    let dispatch = |cu: &mut Cu, c: u32, t: f64, heap: &mut BinaryHeap<Event>, wg_wfs: &[Vec<u32>]| {
        while let Some(&g) = cu.queue.front() {
            let need = wg_wfs[g].len() as u32;
            if need > cu.free_slots {
                break;
            }
            cu.queue.pop_front();
            cu.free_slots -= need;
            cu.first_dispatch.get_or_insert(t);
            for &id in &wg_wfs[g] {
                heap.push(Event {
                    time: t,
                    cu: c,
                    wf: id,
                    kind: EventKind::Ready,
                });
            }
        }
    };
    for (c, cu) in cus.iter_mut().enumerate() {
        dispatch(cu, c as u32, start, &mut heap, &wg_wfs);
    }

    while let Some(ev) = heap.pop() {
        let t = ev.time;
        let c = ev.cu as usize;
        match ev.kind {
            EventKind::Ready => {
                cus[c].ready.push(ev.wf);
                if !cus[c].port_pending {
                    cus[c].port_pending = true;
                    heap.push(Event {
                        time: t.max(cus[c].port_free),
                        cu: ev.cu,
                        wf: u32::MAX,
                        kind: EventKind::Port,
                    });
                }
            }
            EventKind::Port => {
                let cu = &mut cus[c];
                cu.port_pending = false;
                if cu.ready.is_empty() {
                    continue;
                }
                let last = cu.last_issued;
                let pick = cu
                    .ready
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, &id)| match last {
                        Some(l) if id > l => (0, id),
                        Some(_) => (1, id),
                        None => (0, id),
                    })
                    .map(|(i, _)| i)
                    .expect("non-empty ready list");
                let id = cu.ready.swap_remove(pick);
                cu.last_issued = Some(id);
                cu.busy += cfg.issue_cycles();
                cu.port_free = t + issue;
                cu.last_issue_end = cu.port_free;
                if !cu.ready.is_empty() {
                    cu.port_pending = true;
                    heap.push(Event {
                        time: cu.port_free,
                        cu: ev.cu,
                        wf: u32::MAX,
                        kind: EventKind::Port,
                    });
                }

                let wf = &mut wfs[id as usize];
                executed += wf.items;
                wf.remaining -= 1;
                let issued = t + issue;
                let is_mem = wf.rng.random::<f64>() < w.mem_fraction;
                let done = if !is_mem {
                    issued + (sp.pipeline_depth + sp.alu_latency - 1) as f64
                } else if wf.rng.random::<f64>() < w.hit_rate {
                    issued + (sp.pipeline_depth + sp.hit_latency - 1) as f64
                } else {
                    misses += 1;
                    let ch = &mut channels[next_channel];
                    next_channel = (next_channel + 1) % sp.channels as usize;
                    let mut cost = service;
                    if ch.last_cu.is_some_and(|l| l != ev.cu) {
                        cost += sp.switch_penalty_cycles as f64;
                    }
                    ch.last_cu = Some(ev.cu);
                    let begin = issued.max(ch.free);
                    ch.free = begin + cost;
                    ch.busy += cost;
                    ch.free + (sp.pipeline_depth + sp.miss_latency - 1) as f64
                };
                end = end.max(done);
                if wf.remaining > 0 {
                    heap.push(Event {
                        time: done,
                        cu: ev.cu,
                        wf: id,
                        kind: EventKind::Ready,
                    });
                } else {
                    let g = wf.wg;
                    let home = wf.cu as usize;
                    wg_left[g] -= 1;
                    if wg_left[g] == 0 {
                        let cu = &mut cus[home];
                        cu.free_slots += wg_wfs[g].len() as u32;
                        dispatch(cu, home as u32, done, &mut heap, &wg_wfs);
                    }
                }
            }
        }
    }

    let cycles = end.ceil() as u64;
    let total = (cycles as f64).max(1.0);
    let stall: f64 = cus
        .iter()
        .filter_map(|cu| cu.first_dispatch.map(|f| (cu.last_issue_end - f - cu.busy as f64).max(0.0)))
        .sum();
    Ok(SimResult {
        cycles,
        per_cu_busy: cus.iter().map(|cu| cu.busy as f64 / total).collect(),
        channel_occupancy: channels.iter().map(|ch| ch.busy / total).collect(),
        wf_stall_cycles: stall.round() as u64,
        work_item_instructions: executed,
        memory_requests: misses,
        issue_cycles: cus.iter().map(|cu| cu.busy).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cus: u32,
    pub result: SimResult,
}

/// One simulation per CU count with a shared seed, ordered by CU count.
pub fn scaling_sweep(w: &KernelWorkload, cu_list: &[u32], sp: &SimParams, seed: u64) -> Result<Vec<SweepRow>> {
    let mut list = cu_list.to_vec();
    list.sort_unstable();
    list.dedup();
    list.par_iter()
        .map(|&c| {
            let cfg = GGpuConfig::new(c)?;
            Ok(SweepRow {
                cus: c,
                result: simulate(w, &cfg, sp, seed)?,
            })
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["cus", "cycles", "busy", "occupancy"]).expect("in-memory write");
    for r in rows {
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        w.write_record([
            r.cus.to_string(),
            r.result.cycles.to_string(),
            format!("{:.4}", mean(&r.result.per_cu_busy)),
            format!("{:.4}", mean(&r.result.channel_occupancy)),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
