//! Architectural configuration and the structural design model.
//!
//! A [`Design`] is a flat list of registers, memory macros, lumped logic
//! stages and directed nets between them. Reference designs are generated
//! for any CU count in one of three optimization variants.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::transforms::{self, Transform, TransformKind};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_WORDS: u32 = 16;
pub const MAX_WORDS: u32 = 65536;
pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 144;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GGpuConfig {
    pub num_cus: u32,
    pub pes_per_cu: u32,
    pub wf_size: u32,
    pub max_workitems_per_cu: u32,
    pub data_channels: u32,
    pub control_channels: u32,
}

impl GGpuConfig {
    pub fn new(num_cus: u32) -> Result<Self> {
        let cfg = GGpuConfig {
            num_cus,
            pes_per_cu: 8,
            wf_size: 64,
            max_workitems_per_cu: 512,
            data_channels: 4,
            control_channels: 1,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if !(1..=8).contains(&self.num_cus) {
            return Err(Error::Config(format!("num_cus {} outside 1..=8", self.num_cus)));
        }
        if self.pes_per_cu != 8 {
            return Err(Error::Config(format!("pes_per_cu must be 8, got {}", self.pes_per_cu)));
        }
        if self.wf_size == 0
            || !self.max_workitems_per_cu.is_multiple_of(self.wf_size)
            || self.max_workitems_per_cu != 512
        {
            return Err(Error::Config(format!(
                "wavefront sizing {}x{} does not cover 512 work-items",
                self.wf_size, self.max_workitems_per_cu
            )));
        }
        if !(1..=4).contains(&self.data_channels) {
            return Err(Error::Config(format!(
                "data_channels {} outside 1..=4",
                self.data_channels
            )));
        }
        if self.control_channels != 1 {
            return Err(Error::Config("control_channels must be 1".into()));
        }
        Ok(())
    }

    /// Issue cycles taken by one wavefront instruction on the SIMD lanes.
    pub fn issue_cycles(&self) -> u64 {
        u64::from(self.wf_size / self.pes_per_cu)
    }

    pub fn wfs_per_cu(&self) -> u32 {
        self.max_workitems_per_cu / self.wf_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ports {
    Single,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MemBlockSpec {
    pub words: u32,
    pub word_bits: u32,
    pub ports: Ports,
}

impl MemBlockSpec {
    pub fn dual(words: u32, word_bits: u32) -> Self {
        MemBlockSpec {
            words,
            word_bits,
            ports: Ports::Dual,
        }
    }

    pub fn bits(&self) -> u64 {
        u64::from(self.words) * u64::from(self.word_bits)
    }

    pub fn addr_bits(&self) -> u32 {
        32 - (self.words.max(1) - 1).leading_zeros()
    }

    pub fn check_range(&self) -> Result<()> {
        if !(MIN_WORDS..=MAX_WORDS).contains(&self.words) {
            return Err(Error::Range(format!(
                "{} words outside {MIN_WORDS}..={MAX_WORDS}",
                self.words
            )));
        }
        if !(MIN_BITS..=MAX_BITS).contains(&self.word_bits) {
            return Err(Error::Range(format!(
                "{} bits outside {MIN_BITS}..={MAX_BITS}",
                self.word_bits
            )));
        }
        Ok(())
    }
}

impl fmt::Display for MemBlockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.words, self.word_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Cu(u32),
    MemController,
    Top,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Partition::Cu(i) => write!(f, "cu{i}"),
            Partition::MemController => f.write_str("mem_controller"),
            Partition::Top => f.write_str("top"),
        }
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mem_controller" => Ok(Partition::MemController),
            "top" => Ok(Partition::Top),
            _ => s
                .strip_prefix("cu")
                .and_then(|n| n.parse::<u32>().ok())
                .map(Partition::Cu)
                .ok_or_else(|| Error::parse(format!("unknown partition tag `{s}`"))),
        }
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitAxis {
    Words,
    Bits,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub axis: SplitAxis,
    pub fan: u32,
    pub bank_index: u32,
    pub parent_spec: MemBlockSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemBlockInstance {
    pub id: String,
    pub spec: MemBlockSpec,
    pub partition: Partition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logical_parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_meta: Option<SplitMeta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub id: String,
    pub partition: Partition,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicStage {
    pub id: String,
    pub partition: Partition,
    pub delay_ns: f64,
    /// Combinational cell count lumped into this stage.
    #[serde(default)]
    pub cells: u64,
    /// MSB-mux levels; a stage with levels > 0 is a bank-select mux.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub mux_levels: u32,
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Reg(String),
    Mem(String),
    Stage(String),
}

impl Endpoint {
    pub fn id(&self) -> &str {
        match self {
            Endpoint::Reg(s) | Endpoint::Mem(s) | Endpoint::Stage(s) => s,
        }
    }

    /// Timing-graph node this endpoint drives from.
    pub fn source_node(&self) -> String {
        match self {
            Endpoint::Reg(s) => format!("q:{s}"),
            Endpoint::Mem(s) => format!("mo:{s}"),
            Endpoint::Stage(s) => format!("s:{s}"),
        }
    }

    /// Timing-graph node this endpoint is driven at.
    pub fn sink_node(&self) -> String {
        match self {
            Endpoint::Reg(s) => format!("d:{s}"),
            Endpoint::Mem(s) => format!("mi:{s}"),
            Endpoint::Stage(s) => format!("s:{s}"),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Reg(s) => write!(f, "reg:{s}"),
            Endpoint::Mem(s) => write!(f, "mem:{s}"),
            Endpoint::Stage(s) => write!(f, "stage:{s}"),
        }
    }
}

impl FromStr for Endpoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, id) = s
            .split_once(':')
            .ok_or_else(|| Error::parse(format!("endpoint `{s}` lacks a kind prefix")))?;
        if id.is_empty() {
            return Err(Error::parse(format!("endpoint `{s}` has an empty id")));
        }
        match kind {
            "reg" => Ok(Endpoint::Reg(id.into())),
            "mem" => Ok(Endpoint::Mem(id.into())),
            "stage" => Ok(Endpoint::Stage(id.into())),
            _ => Err(Error::parse(format!("unknown endpoint kind `{kind}`"))),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub id: String,
    pub from: Endpoint,
    pub to: Endpoint,
    pub width: u32,
    /// Set on bank-to-mux arcs inside a split memory.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub internal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReg {
    pub id: String,
    pub net: String,
    pub width: u32,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub schema_version: u32,
    pub config: GGpuConfig,
    pub registers: Vec<Register>,
    pub memories: Vec<MemBlockInstance>,
    pub stages: Vec<LogicStage>,
    pub nets: Vec<Net>,
    #[serde(default)]
    pub pipeline_regs: Vec<PipelineReg>,
    #[serde(default)]
    pub transform_log: Vec<Transform>,
}

impl Design {
    pub fn memory(&self, id: &str) -> Option<&MemBlockInstance> {
        self.memories
            .binary_search_by(|m| m.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.memories[i])
            .or_else(|| self.memories.iter().find(|m| m.id == id))
    }

    pub fn net(&self, id: &str) -> Option<&Net> {
        self.nets
            .binary_search_by(|n| n.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.nets[i])
            .or_else(|| self.nets.iter().find(|n| n.id == id))
    }

    pub fn stage(&self, id: &str) -> Option<&LogicStage> {
        self.stages.iter().find(|s| s.id == id)
    }

    pub fn ff_count(&self) -> u64 {
        self.registers.iter().map(|r| u64::from(r.width)).sum::<u64>()
            + self.pipeline_regs.iter().map(|r| u64::from(r.width)).sum::<u64>()
    }

    pub fn comb_count(&self) -> u64 {
        self.stages.iter().map(|s| s.cells).sum()
    }

    /// Partition table for every endpoint id, keyed by the endpoint.
    pub fn partition_map(&self) -> HashMap<Endpoint, Partition> {
        let mut map = HashMap::with_capacity(
            self.registers.len() + self.pipeline_regs.len() + self.memories.len() + self.stages.len(),
        );
        for r in &self.registers {
            map.insert(Endpoint::Reg(r.id.clone()), r.partition);
        }
        for r in &self.pipeline_regs {
            map.insert(Endpoint::Reg(r.id.clone()), r.partition);
        }
        for m in &self.memories {
            map.insert(Endpoint::Mem(m.id.clone()), m.partition);
        }
        for s in &self.stages {
            map.insert(Endpoint::Stage(s.id.clone()), s.partition);
        }
        map
    }

    pub fn partitions(&self) -> Vec<Partition> {
        let mut v: Vec<Partition> = (0..self.config.num_cus).map(Partition::Cu).collect();
        v.push(Partition::MemController);
        v.push(Partition::Top);
        v
    }

    /// Sort every element list by id so that equal content compares equal.
    pub fn canonicalize(&mut self) {
        self.registers.sort_by(|a, b| a.id.cmp(&b.id));
        self.memories.sort_by(|a, b| a.id.cmp(&b.id));
        self.stages.sort_by(|a, b| a.id.cmp(&b.id));
        self.nets.sort_by(|a, b| a.id.cmp(&b.id));
        self.pipeline_regs.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn without_log(&self) -> Design {
        Design {
            transform_log: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    V590,
    V667,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::V590, Variant::V667];

    pub fn target_mhz(self) -> f64 {
        match self {
            Variant::Baseline => 500.0,
            Variant::V590 => 590.0,
            Variant::V667 => 667.0,
        }
    }

    pub fn from_mhz(mhz: f64) -> Option<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| (v.target_mhz() - mhz).abs() < 0.5)
    }

    /// (shared, per-CU) memory block counts.
    pub fn block_law(self) -> (u32, u32) {
        match self {
            Variant::Baseline => (9, 42),
            Variant::V590 => (16, 52),
            Variant::V667 => (19, 52),
        }
    }

    pub fn block_count(self, cus: u32) -> u32 {
        let (shared, per_cu) = self.block_law();
        shared + per_cu * cus
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Baseline => "baseline",
            Variant::V590 => "v590",
            Variant::V667 => "v667",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "v590" => Ok(Variant::V590),
            "v667" => Ok(Variant::V667),
            _ => Err(Error::Usage(format!("unknown variant `{s}`"))),
        }
    }
}

// Per-CU and shared logic inventory at the baseline variant.
pub const CU_FF: u64 = 104_617;
pub const CU_COMB: u64 = 83_776;
pub const SHARED_FF: u64 = 15_161;
pub const SHARED_COMB: u64 = 44_050;
const TOP_FF: u64 = 2_000;
const TOP_COMB: u64 = 7_300;

pub const PIPELINED_NET: &str = "top.dm_pack>top.axi_wmux";

struct Builder {
    d: Design,
}

impl Builder {
    fn reg(&mut self, id: &str, partition: Partition, width: u32) {
        self.d.registers.push(Register {
            id: id.into(),
            partition,
            width,
        });
    }

    fn stage(&mut self, id: &str, partition: Partition, delay_ns: f64, cells: u64) {
        self.d.stages.push(LogicStage {
            id: id.into(),
            partition,
            delay_ns,
            cells,
            mux_levels: 0,
        });
    }

    fn mem(&mut self, id: &str, partition: Partition, words: u32, bits: u32) {
        self.d.memories.push(MemBlockInstance {
            id: id.into(),
            spec: MemBlockSpec::dual(words, bits),
            partition,
            logical_parent: None,
            split_meta: None,
        });
    }

    fn net(&mut self, from: Endpoint, to: Endpoint, width: u32) {
        self.d.nets.push(Net {
            id: format!("{}>{}", from.id(), to.id()),
            from,
            to,
            width,
            internal: false,
        });
    }

    /// Memory with an address decoder feeding it and a read stage behind it.
    fn mem_path(&mut self, id: &str, partition: Partition, words: u32, bits: u32, dec: &str, read_ns: f64) {
        self.mem(id, partition, words, bits);
        let spec = MemBlockSpec::dual(words, bits);
        self.net(
            Endpoint::Stage(dec.into()),
            Endpoint::Mem(id.into()),
            spec.addr_bits() + bits,
        );
        let rd = format!("{id}.rd");
        let q = format!("{id}.rd_q");
        self.stage(&rd, partition, read_ns, 40 + u64::from(bits) * 4);
        self.reg(&q, partition, bits);
        self.net(Endpoint::Mem(id.into()), Endpoint::Stage(rd.clone()), bits);
        self.net(Endpoint::Stage(rd), Endpoint::Reg(q), bits);
    }

    fn decoder(&mut self, id: &str, partition: Partition, width: u32) {
        let q = format!("{id}_q");
        self.reg(&q, partition, width);
        self.stage(id, partition, 0.35, 300);
        self.net(Endpoint::Reg(q), Endpoint::Stage(id.into()), width);
    }

    fn ff_in(&self, filter: impl Fn(&Register) -> bool) -> u64 {
        self.d.registers.iter().filter(|r| filter(r)).map(|r| u64::from(r.width)).sum()
    }

    fn comb_in(&self, filter: impl Fn(&LogicStage) -> bool) -> u64 {
        self.d.stages.iter().filter(|s| filter(s)).map(|s| s.cells).sum()
    }

    /// Control loop that absorbs the remaining flip-flops and cells of a scope.
    fn residual_loop(&mut self, prefix: &str, partition: Partition, ff: u64, comb: u64, delay_ns: f64) -> Result<()> {
        let width = u32::try_from(ff)
            .map_err(|_| Error::Structural(format!("{prefix} residual width overflow")))?;
        let q = format!("{prefix}.ctl_q");
        let s = format!("{prefix}.ctl");
        self.reg(&q, partition, width);
        self.stage(&s, partition, delay_ns, comb);
        self.net(Endpoint::Reg(q.clone()), Endpoint::Stage(s.clone()), 64);
        self.net(Endpoint::Stage(s), Endpoint::Reg(q), 64);
        Ok(())
    }
}

const CACHE_DATA_READ_NS: [f64; 4] = [0.070, 0.060, 0.050, 0.040];
const CACHE_TAG_READ_NS: [f64; 2] = [1.179, 1.108];
const DM_BUF_READ_NS: [f64; 2] = [0.5685, 0.4185];
const RTM_READ_NS: f64 = 1.123;
const RF_READ_NS: f64 = 0.814;
const SPM_READ_NS: f64 = 1.135;
const IMEM_READ_NS: f64 = 1.096;

fn baseline_design(cus: u32) -> Result<Design> {
    let config = GGpuConfig::new(cus)?;
    let mut b = Builder {
        d: Design {
            schema_version: SCHEMA_VERSION,
            config,
            registers: Vec::new(),
            memories: Vec::new(),
            stages: Vec::new(),
            nets: Vec::new(),
            pipeline_regs: Vec::new(),
            transform_log: Vec::new(),
        },
    };

    let mc = Partition::MemController;
    let top = Partition::Top;

    b.decoder("mc.cd_dec", mc, 44);
    b.decoder("mc.ct_dec", mc, 43);
    b.decoder("mc.rtm_dec", mc, 42);
    b.decoder("mc.dm_dec", mc, 73);
    for (i, ns) in CACHE_DATA_READ_NS.iter().enumerate() {
        b.mem_path(&format!("mc.cache_data{i}"), mc, 1024, 128, "mc.cd_dec", *ns);
    }
    for (i, ns) in CACHE_TAG_READ_NS.iter().enumerate() {
        b.mem_path(&format!("mc.cache_tag{i}"), mc, 2048, 32, "mc.ct_dec", *ns);
    }
    b.mem_path("mc.rtm", mc, 1024, 32, "mc.rtm_dec", RTM_READ_NS);
    for (i, ns) in DM_BUF_READ_NS.iter().enumerate() {
        b.mem_path(&format!("mc.dm_buf{i}"), mc, 1024, 64, "mc.dm_dec", *ns);
    }

    b.reg("top.dm_wdata", top, 257);
    b.reg("top.axi_wdata", top, 257);
    b.stage("top.dm_pack", top, 0.95, 1500);
    b.stage("top.axi_wmux", top, 0.85, 800);
    b.net(Endpoint::Reg("top.dm_wdata".into()), Endpoint::Stage("top.dm_pack".into()), 257);
    b.net(Endpoint::Stage("top.dm_pack".into()), Endpoint::Stage("top.axi_wmux".into()), 257);
    b.net(Endpoint::Stage("top.axi_wmux".into()), Endpoint::Reg("top.axi_wdata".into()), 257);
    b.reg("top.axi_ctrl_q", top, 32);
    b.reg("mc.ctrl_q", mc, 32);
    b.stage("mc.ctrl_dec", mc, 0.40, 600);
    b.net(Endpoint::Reg("top.axi_ctrl_q".into()), Endpoint::Stage("mc.ctrl_dec".into()), 32);
    b.net(Endpoint::Stage("mc.ctrl_dec".into()), Endpoint::Reg("mc.ctrl_q".into()), 32);

    let top_ff = b.ff_in(|r| r.partition == top);
    let top_comb = b.comb_in(|s| s.partition == top);
    b.residual_loop("top", top, TOP_FF - top_ff, TOP_COMB - top_comb, 0.60)?;
    let shared_ff = b.ff_in(|_| true);
    let shared_comb = b.comb_in(|_| true);
    b.residual_loop("mc", mc, SHARED_FF - shared_ff, SHARED_COMB - shared_comb, 0.90)?;

    for k in 0..cus {
        let cu = Partition::Cu(k);
        let p = format!("cu{k}");
        let ff_before = b.ff_in(|_| true);
        let comb_before = b.comb_in(|_| true);

        b.decoder(&format!("{p}.rf_dec"), cu, 42);
        b.decoder(&format!("{p}.spm_dec"), cu, 41);
        b.decoder(&format!("{p}.imem_dec"), cu, 44);
        for i in 0..32 {
            b.mem_path(&format!("{p}.rf{i}"), cu, 1024, 32, &format!("{p}.rf_dec"), RF_READ_NS);
        }
        for i in 0..8 {
            b.mem_path(&format!("{p}.spm{i}"), cu, 512, 32, &format!("{p}.spm_dec"), SPM_READ_NS);
        }
        for i in 0..2 {
            b.mem_path(&format!("{p}.imem{i}"), cu, 4096, 32, &format!("{p}.imem_dec"), IMEM_READ_NS);
        }

        let op = format!("{p}.op_q");
        let alu = format!("{p}.alu");
        let res = format!("{p}.res_q");
        b.reg(&op, cu, 8 * 96);
        b.reg(&res, cu, 8 * 32);
        b.stage(&alu, cu, 1.20, 24_000);
        b.net(Endpoint::Reg(op), Endpoint::Stage(alu.clone()), 8 * 96);
        b.net(Endpoint::Stage(alu), Endpoint::Reg(res), 8 * 32);

        let lsu = format!("{p}.lsu_req");
        let arb = format!("mc.arb{k}");
        let req = format!("mc.req_q{k}");
        b.reg(&lsu, cu, 96);
        b.reg(&req, mc, 96);
        b.stage(&arb, mc, 1.30, 1_200);
        b.net(Endpoint::Reg(lsu), Endpoint::Stage(arb.clone()), 96);
        b.net(Endpoint::Stage(arb), Endpoint::Reg(req), 96);

        let resp = format!("mc.resp_q{k}");
        let wb = format!("{p}.wb");
        let wbq = format!("{p}.wb_q");
        b.reg(&resp, mc, 64);
        b.reg(&wbq, cu, 64);
        b.stage(&wb, cu, 0.45, 900);
        b.net(Endpoint::Reg(resp), Endpoint::Stage(wb.clone()), 64);
        b.net(Endpoint::Stage(wb), Endpoint::Reg(wbq), 64);

        let ff = b.ff_in(|_| true) - ff_before;
        let comb = b.comb_in(|_| true) - comb_before;
        b.residual_loop(&p, cu, CU_FF - ff, CU_COMB - comb, 0.90)?;
    }

    b.d.canonicalize();
    Ok(b.d)
}

/// Transform schedule that turns a baseline design into the given variant.
pub fn canonical_schedule(cus: u32, variant: Variant) -> Vec<TransformKind> {
    let mut out = Vec::new();
    if variant == Variant::Baseline {
        return out;
    }
    let bits2 = |id: String| TransformKind::SplitBits { mem_id: id, fan: 2 };
    for i in 0..4 {
        out.push(bits2(format!("mc.cache_data{i}")));
    }
    out.push(TransformKind::Pipeline {
        net_id: PIPELINED_NET.into(),
    });
    out.push(bits2("mc.cache_tag0".into()));
    for k in 0..cus {
        for i in 0..2 {
            out.push(bits2(format!("cu{k}.imem{i}")));
        }
    }
    out.push(bits2("mc.cache_tag1".into()));
    out.push(bits2("mc.rtm".into()));
    for k in 0..cus {
        for i in 0..8 {
            out.push(bits2(format!("cu{k}.spm{i}")));
        }
    }
    if variant == Variant::V667 {
        out.push(bits2("mc.dm_buf0".into()));
        out.push(bits2("mc.cache_tag0.s0".into()));
        out.push(bits2("mc.cache_tag0.s1".into()));
    }
    out
}

pub fn build_reference_design(cus: u32, variant: Variant) -> Result<Design> {
    let base = baseline_design(cus)?;
    canonical_schedule(cus, variant)
        .into_iter()
        .try_fold(base, |d, kind| transforms::apply(&d, &kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Config,
    Range,
    DualPort,
    Duplicate,
    Reference,
    Delay,
    Cycle,
    Contiguity,
    Capacity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            subject: subject.into(),
            message: message.into(),
        });
    }
}

pub fn validate_design(d: &Design) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = d.config.check() {
        report.push(ViolationKind::Config, "config", e.to_string());
    }
    if d.schema_version != SCHEMA_VERSION {
        report.push(
            ViolationKind::Config,
            "schema_version",
            format!("unsupported schema version {}", d.schema_version),
        );
    }

    let check_partition = |report: &mut ValidationReport, id: &str, p: Partition| {
        if let Partition::Cu(i) = p {
            if i >= d.config.num_cus {
                report.push(ViolationKind::Config, id, format!("partition {p} beyond num_cus"));
            }
        }
    };

    let mut seen: BTreeSet<Endpoint> = BTreeSet::new();
    let mut dup = |report: &mut ValidationReport, e: Endpoint| {
        if !seen.insert(e.clone()) {
            report.push(ViolationKind::Duplicate, e.id(), format!("duplicate id {e}"));
        }
    };
    for r in &d.registers {
        dup(&mut report, Endpoint::Reg(r.id.clone()));
        check_partition(&mut report, &r.id, r.partition);
    }
    for r in &d.pipeline_regs {
        dup(&mut report, Endpoint::Reg(r.id.clone()));
        check_partition(&mut report, &r.id, r.partition);
        if d.net(&r.net).is_some() {
            report.push(
                ViolationKind::Reference,
                &r.id,
                format!("host net {} still present", r.net),
            );
        }
    }
    for m in &d.memories {
        dup(&mut report, Endpoint::Mem(m.id.clone()));
        check_partition(&mut report, &m.id, m.partition);
        if let Err(e) = m.spec.check_range() {
            report.push(ViolationKind::Range, &m.id, format!("{}: {e}", m.id));
        }
        if m.spec.ports != Ports::Dual {
            report.push(ViolationKind::DualPort, &m.id, format!("{} is not dual-port", m.id));
        }
        if m.logical_parent.is_some() != m.split_meta.is_some() {
            report.push(
                ViolationKind::Contiguity,
                &m.id,
                format!("{} has inconsistent split bookkeeping", m.id),
            );
        }
    }
    for s in &d.stages {
        dup(&mut report, Endpoint::Stage(s.id.clone()));
        check_partition(&mut report, &s.id, s.partition);
        if !(s.delay_ns >= 0.0 && s.delay_ns.is_finite()) {
            report.push(ViolationKind::Delay, &s.id, format!("stage {} has delay {}", s.id, s.delay_ns));
        }
    }

    let mut net_ids = BTreeSet::new();
    for n in &d.nets {
        if !net_ids.insert(n.id.as_str()) {
            report.push(ViolationKind::Duplicate, &n.id, format!("duplicate net id {}", n.id));
        }
        for e in [&n.from, &n.to] {
            if !seen.contains(e) {
                report.push(ViolationKind::Reference, &n.id, format!("net {} references missing {e}", n.id));
            }
        }
    }

    check_groups(d, &mut report);
    if let Some(cycle_node) = find_cycle(d) {
        report.push(
            ViolationKind::Cycle,
            &cycle_node,
            format!("combinational cycle through {cycle_node}"),
        );
    }
    report
}

struct Member {
    spec: MemBlockSpec,
    meta: Option<SplitMeta>,
    index: u32,
    axis: SplitAxis,
}

/// Parent and bank index encoded in a bank id such as `x.w3` or `x.s1`.
fn bank_position(id: &str) -> Option<(&str, SplitAxis, u32)> {
    let (parent, last) = id.rsplit_once('.')?;
    let axis = match last.as_bytes().first()? {
        b'w' => SplitAxis::Words,
        b's' => SplitAxis::Bits,
        _ => return None,
    };
    Some((parent, axis, last[1..].parse().ok()?))
}

fn check_groups(d: &Design, report: &mut ValidationReport) {
    let mut groups: BTreeMap<String, Vec<Member>> = BTreeMap::new();
    for m in &d.memories {
        if let (Some(p), Some(meta)) = (&m.logical_parent, &m.split_meta) {
            groups.entry(p.clone()).or_default().push(Member {
                spec: m.spec,
                meta: Some(meta.clone()),
                index: meta.bank_index,
                axis: meta.axis,
            });
        }
    }
    // A bank that was itself split appears only through its own banks.
    let mut pending: Vec<String> = groups.keys().cloned().collect();
    while let Some(key) = pending.pop() {
        if d.memory(&key).is_some() {
            continue;
        }
        let Some((parent, axis, index)) = bank_position(&key) else { continue };
        let Some(spec) = groups[&key].iter().find_map(|m| m.meta.as_ref().map(|x| x.parent_spec)) else {
            continue;
        };
        let parent = parent.to_string();
        if !groups.contains_key(&parent) {
            pending.push(parent.clone());
        }
        groups.entry(parent).or_default().push(Member {
            spec,
            meta: None,
            index,
            axis,
        });
    }

    for (parent, banks) in &groups {
        let known = banks.iter().find_map(|b| b.meta.as_ref());
        let fan = known.map_or(banks.len() as u32, |m| m.fan);
        let axis = known.map_or(banks[0].axis, |m| m.axis);
        let parent_spec = known.map(|m| m.parent_spec).unwrap_or_else(|| {
            let s = banks[0].spec;
            match axis {
                SplitAxis::Words => MemBlockSpec { words: s.words * fan, ..s },
                SplitAxis::Bits => MemBlockSpec { word_bits: s.word_bits * fan, ..s },
            }
        });
        let uniform = banks.iter().all(|b| {
            b.spec == banks[0].spec
                && b.axis == axis
                && b.meta.as_ref().is_none_or(|m| m.fan == fan && m.parent_spec == parent_spec)
        });
        if !uniform {
            report.push(
                ViolationKind::Contiguity,
                parent,
                format!("banks of {parent} disagree on spec or split metadata"),
            );
            continue;
        }
        let mut idx: Vec<u32> = banks.iter().map(|b| b.index).collect();
        idx.sort_unstable();
        let expected: Vec<u32> = (0..fan).collect();
        if idx != expected {
            report.push(
                ViolationKind::Contiguity,
                parent,
                format!("banks of {parent} have indices {idx:?}, expected 0..{fan}"),
            );
        }
        let total: u64 = banks.iter().map(|b| b.spec.bits()).sum();
        if total != parent_spec.bits() {
            report.push(
                ViolationKind::Capacity,
                parent,
                format!("banks of {parent} hold {total} bits, parent holds {}", parent_spec.bits()),
            );
        }
    }
}

/// Returns a node on a combinational cycle, if any.
pub(crate) fn find_cycle(d: &Design) -> Option<String> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut id_of = |name: String, adj: &mut Vec<Vec<usize>>, names: &mut Vec<String>| -> usize {
        *index.entry(name.clone()).or_insert_with(|| {
            adj.push(Vec::new());
            names.push(name);
            adj.len() - 1
        })
    };
    for n in &d.nets {
        let a = id_of(n.from.source_node(), &mut adj, &mut names);
        let b = id_of(n.to.sink_node(), &mut adj, &mut names);
        adj[a].push(b);
    }
    let mut indeg = vec![0usize; adj.len()];
    for outs in &adj {
        for &b in outs {
            indeg[b] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..adj.len()).filter(|&i| indeg[i] == 0).collect();
    let mut visited = 0;
    while let Some(v) = queue.pop_front() {
        visited += 1;
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    if visited == adj.len() {
        None
    } else {
        (0..adj.len())
            .filter(|&i| indeg[i] > 0)
            .map(|i| names[i].clone())
            .min()
    }
}

pub fn write_design(d: &Design) -> String {
    let mut s = serde_json::to_string_pretty(d).expect("design serializes");
    s.push('\n');
    s
}

pub fn read_design(doc: &str) -> Result<Design> {
    serde_json::from_str(doc).map_err(Error::from_json)
}
