//! Delay-annotated timing graph, longest-path search and partition floorplan.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::design::{find_cycle, Design, Endpoint, Partition};
use crate::error::{Error, Result};
use crate::tech::{mem_delay, partition_area, TechParams};

/// Tolerance used when comparing path delays for ties.
pub const DELAY_EPS: f64 = 1e-9;
pub const CU_DENSITY: f64 = 0.70;
pub const TOP_DENSITY: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub delay_ns: f64,
    #[serde(default)]
    pub net: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
}

impl TimingGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn add_edge(&mut self, from: &str, to: &str, delay_ns: f64, net: Option<String>) {
        let a = self.add_node(from);
        let b = self.add_node(to);
        self.edges.push(Edge {
            from: a,
            to: b,
            delay_ns,
            net,
        });
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<usize>) {
        let mut out = vec![Vec::new(); self.names.len()];
        let mut indeg = vec![0; self.names.len()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.from].push(i);
            indeg[e.to] += 1;
        }
        (out, indeg)
    }

    pub fn topo_order(&self) -> Result<Vec<usize>> {
        let (out, mut indeg) = self.adjacency();
        let mut queue: VecDeque<usize> = (0..self.names.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.names.len());
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &e in &out[v] {
                let w = self.edges[e].to;
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        if order.len() != self.names.len() {
            let stuck = (0..self.names.len())
                .filter(|&i| indeg[i] > 0)
                .map(|i| self.names[i].as_str())
                .min()
                .unwrap_or("?");
            return Err(Error::Structural(format!("combinational cycle through {stuck}")));
        }
        Ok(order)
    }

    /// Longest remaining delay from every node to any sink, with the edge
    /// that continues the lexicographically smallest such path.
    pub fn tails(&self) -> Result<Tails> {
        let order = self.topo_order()?;
        let (out, indeg) = self.adjacency();
        let n = self.names.len();
        let mut tail = vec![0.0f64; n];
        let mut next: Vec<Option<usize>> = vec![None; n];
        for &v in order.iter().rev() {
            for &e in &out[v] {
                let edge = &self.edges[e];
                let cand = edge.delay_ns + tail[edge.to];
                let better = match next[v] {
                    None => true,
                    Some(cur) => {
                        let cur_to = self.edges[cur].to;
                        if cand > tail[v] + DELAY_EPS {
                            true
                        } else if cand + DELAY_EPS < tail[v] {
                            false
                        } else {
                            self.names[edge.to] < self.names[cur_to]
                                || (edge.to == cur_to && edge.delay_ns > self.edges[cur].delay_ns)
                        }
                    }
                };
                if better {
                    tail[v] = cand;
                    next[v] = Some(e);
                }
            }
        }
        let sources = (0..n).filter(|&i| indeg[i] == 0).collect();
        Ok(Tails { tail, next, sources })
    }

    pub fn critical_path(&self) -> Result<CriticalPath> {
        self.tails()?.critical_path(self)
    }

    pub fn fmax(&self) -> Result<f64> {
        Ok(fmax_of(self.critical_path()?.total_delay_ns))
    }
}

#[derive(Debug, Clone)]
pub struct Tails {
    pub tail: Vec<f64>,
    pub next: Vec<Option<usize>>,
    pub sources: Vec<usize>,
}

impl Tails {
    pub fn critical_path(&self, g: &TimingGraph) -> Result<CriticalPath> {
        let start = self.worst_source(g).ok_or_else(|| Error::State("empty timing graph".into()))?;
        let mut nodes = vec![g.names[start].clone()];
        let mut edges = Vec::new();
        let mut v = start;
        let mut total = 0.0;
        while let Some(e) = self.next[v] {
            let edge = &g.edges[e];
            total += edge.delay_ns;
            edges.push(PathEdge {
                from: g.names[edge.from].clone(),
                to: g.names[edge.to].clone(),
                net: edge.net.clone(),
                delay_ns: edge.delay_ns,
            });
            v = edge.to;
            nodes.push(g.names[v].clone());
        }
        let mut memory_ids: Vec<String> = Vec::new();
        for n in &nodes {
            if let Some(id) = n.strip_prefix("mo:").or_else(|| n.strip_prefix("mi:")) {
                if !memory_ids.iter().any(|m| m == id) {
                    memory_ids.push(id.to_string());
                }
            }
        }
        Ok(CriticalPath {
            contains_memory: !memory_ids.is_empty(),
            memory_ids,
            nodes,
            edges,
            total_delay_ns: total,
        })
    }

    fn worst_source(&self, g: &TimingGraph) -> Option<usize> {
        let mut best: Option<usize> = None;
        for &s in &self.sources {
            best = match best {
                None => Some(s),
                Some(b) => {
                    let (ts, tb) = (self.tail[s], self.tail[b]);
                    if ts > tb + DELAY_EPS || ((ts - tb).abs() <= DELAY_EPS && g.names[s] < g.names[b]) {
                        Some(s)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    }

    pub fn max_delay(&self) -> f64 {
        self.sources.iter().map(|&s| self.tail[s]).fold(0.0, f64::max)
    }

    /// Number of path start points whose worst path is within tolerance of `delay`.
    pub fn critical_sources(&self, delay: f64) -> usize {
        self.sources.iter().filter(|&&s| self.tail[s] >= delay - DELAY_EPS).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEdge {
    pub from: String,
    pub to: String,
    pub net: Option<String>,
    pub delay_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPath {
    pub nodes: Vec<String>,
    pub edges: Vec<PathEdge>,
    pub total_delay_ns: f64,
    pub contains_memory: bool,
    pub memory_ids: Vec<String>,
}

impl CriticalPath {
    /// Memory whose read access launches the path.
    pub fn launching_memory(&self) -> Option<&str> {
        self.nodes.first().and_then(|n| n.strip_prefix("mo:"))
    }
}

pub fn fmax_of(cp_ns: f64) -> f64 {
    1000.0 / cp_ns
}

pub fn fmax(g: &TimingGraph) -> Result<f64> {
    g.fmax()
}

pub fn critical_path(g: &TimingGraph) -> Result<CriticalPath> {
    g.critical_path()
}

pub fn build_timing_graph(d: &Design, p: &TechParams, fp: Option<&Floorplan>) -> Result<TimingGraph> {
    build_timing_graph_with(d, p, fp, &BTreeMap::new())
}

/// As [`build_timing_graph`], with per-memory delay overrides in ns.
pub fn build_timing_graph_with(
    d: &Design,
    p: &TechParams,
    fp: Option<&Floorplan>,
    overrides: &BTreeMap<String, f64>,
) -> Result<TimingGraph> {
    p.check()?;
    if let Some(node) = find_cycle(d) {
        return Err(Error::Structural(format!("combinational cycle through {node}")));
    }
    for (id, v) in overrides {
        if d.memory(id).is_none() {
            return Err(Error::Lookup(format!("override for unknown memory `{id}`")));
        }
        if !(*v >= 0.0 && v.is_finite()) {
            return Err(Error::Range(format!("override for `{id}` must be a non-negative delay")));
        }
    }
    let partitions = d.partition_map();
    let stage_delay: HashMap<&str, f64> = d
        .stages
        .iter()
        .map(|s| (s.id.as_str(), s.delay_ns + p.mux_step * f64::from(s.mux_levels)))
        .collect();

    let mut g = TimingGraph::new();
    for n in &d.nets {
        let mut delay = match &n.from {
            Endpoint::Reg(_) => 0.0,
            Endpoint::Mem(id) => match overrides.get(id) {
                Some(v) => *v,
                None => {
                    let m = d
                        .memory(id)
                        .ok_or_else(|| Error::Lookup(format!("net {} reads missing memory {id}", n.id)))?;
                    mem_delay(&m.spec, p)?
                }
            },
            Endpoint::Stage(id) => *stage_delay
                .get(id.as_str())
                .ok_or_else(|| Error::Lookup(format!("net {} leaves missing stage {id}", n.id)))?,
        };
        if let Some(fp) = fp {
            let pa = partitions.get(&n.from);
            let pb = partitions.get(&n.to);
            if let (Some(&a), Some(&b)) = (pa, pb) {
                if a != b {
                    delay += p.kappa * fp.distance(a, b)?;
                }
            }
        }
        g.add_edge(&n.from.source_node(), &n.to.sink_node(), delay, Some(n.id.clone()));
    }
    Ok(g)
}

/// Timing report: ordered path listing with per-edge delays.
pub fn timing_report(cp: &CriticalPath) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["from", "to", "net", "delay_ns", "cumulative_ns"]).expect("in-memory write");
    let mut acc = 0.0;
    for e in &cp.edges {
        acc += e.delay_ns;
        w.write_record([
            e.from.as_str(),
            e.to.as_str(),
            e.net.as_deref().unwrap_or(""),
            &format!("{:.4}", e.delay_ns),
            &format!("{acc:.4}"),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub partition: Partition,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn centroid(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        let tol = 1e-9;
        self.x + tol < o.x + o.w && o.x + tol < self.x + self.w && self.y + tol < o.y + o.h && o.y + tol < self.y + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Floorplan {
    pub rects: Vec<Rect>,
}

impl Floorplan {
    pub fn rect(&self, p: Partition) -> Option<&Rect> {
        self.rects.iter().find(|r| r.partition == p)
    }

    pub fn distance(&self, a: Partition, b: Partition) -> Result<f64> {
        let ra = self.rect(a).ok_or_else(|| Error::Lookup(format!("no rectangle for {a}")))?;
        let rb = self.rect(b).ok_or_else(|| Error::Lookup(format!("no rectangle for {b}")))?;
        let (ax, ay) = ra.centroid();
        let (bx, by) = rb.centroid();
        Ok((ax - bx).abs() + (ay - by).abs())
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rects {
            if !(r.w > 0.0 && r.h > 0.0 && r.w.is_finite() && r.h.is_finite()) {
                return Err(Error::Structural(format!("degenerate rectangle for {}", r.partition)));
            }
        }
        for (i, a) in self.rects.iter().enumerate() {
            for b in &self.rects[i + 1..] {
                if a.overlaps(b) {
                    return Err(Error::Structural(format!("{} overlaps {}", a.partition, b.partition)));
                }
            }
        }
        Ok(())
    }
}

/// Column offset, in CU widths, of each CU around the controller.
const CU_COLUMNS: [i32; 8] = [0, 0, 1, 1, -1, -1, 2, 2];

pub fn layout_floorplan(d: &Design, p: &TechParams) -> Result<Floorplan> {
    p.check()?;
    let mut cu_area: f64 = 0.0;
    for k in 0..d.config.num_cus {
        cu_area = cu_area.max(partition_area(d, p, Partition::Cu(k))?);
    }
    let s = (cu_area / CU_DENSITY).sqrt();
    let m = (partition_area(d, p, Partition::MemController)? / CU_DENSITY).sqrt();

    let mut rects = vec![Rect {
        partition: Partition::MemController,
        x: -m / 2.0,
        y: -m / 2.0,
        w: m,
        h: m,
    }];
    for k in 0..d.config.num_cus {
        let col = CU_COLUMNS[k as usize % CU_COLUMNS.len()] as f64;
        let y = if k % 2 == 0 { m / 2.0 } else { -m / 2.0 - s };
        rects.push(Rect {
            partition: Partition::Cu(k),
            x: col * s - s / 2.0,
            y,
            w: s,
            h: s,
        });
    }
    let xmin = rects.iter().map(|r| r.x).fold(f64::INFINITY, f64::min);
    let ymin = rects.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
    let ymax = rects.iter().map(|r| r.y + r.h).fold(f64::NEG_INFINITY, f64::max);
    let h = ymax - ymin;
    let w = partition_area(d, p, Partition::Top)? / TOP_DENSITY / h;
    rects.push(Rect {
        partition: Partition::Top,
        x: xmin - w,
        y: ymin,
        w,
        h,
    });
    Ok(Floorplan { rects })
}

/// Graph, tails and critical path of a design in one pass.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub graph: TimingGraph,
    pub tails: Tails,
    pub critical: CriticalPath,
}

impl Analysis {
    pub fn fmax(&self) -> f64 {
        fmax_of(self.critical.total_delay_ns)
    }

    pub fn critical_sources(&self) -> usize {
        self.tails.critical_sources(self.critical.total_delay_ns)
    }

    /// Worst path delay launched by a memory read.
    pub fn memory_tail(&self, mem_id: &str) -> Option<f64> {
        self.graph.node(&format!("mo:{mem_id}")).map(|i| self.tails.tail[i])
    }
}

pub fn analyze(
    d: &Design,
    p: &TechParams,
    wire: bool,
    overrides: &BTreeMap<String, f64>,
) -> Result<Analysis> {
    let fp = if wire { Some(layout_floorplan(d, p)?) } else { None };
    let graph = build_timing_graph_with(d, p, fp.as_ref(), overrides)?;
    let tails = graph.tails()?;
    let critical = tails.critical_path(&graph)?;
    Ok(Analysis { graph, tails, critical })
}
