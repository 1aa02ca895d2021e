//! Memory division and pipeline insertion as pure design rewrites.

use serde::{Deserialize, Serialize};

use crate::design::{
    Design, Endpoint, LogicStage, MemBlockInstance, MemBlockSpec, Net, PipelineReg, SplitAxis,
    SplitMeta, MIN_BITS, MIN_WORDS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    SplitWords { mem_id: String, fan: u32 },
    SplitBits { mem_id: String, fan: u32 },
    Pipeline { net_id: String },
}

impl TransformKind {
    pub fn target(&self) -> &str {
        match self {
            TransformKind::SplitWords { mem_id, .. } | TransformKind::SplitBits { mem_id, .. } => mem_id,
            TransformKind::Pipeline { net_id } => net_id,
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransformKind::SplitWords { mem_id, fan } => write!(f, "split_words({mem_id}, {fan})"),
            TransformKind::SplitBits { mem_id, fan } => write!(f, "split_bits({mem_id}, {fan})"),
            TransformKind::Pipeline { net_id } => write!(f, "pipeline({net_id})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transform {
    pub sequence_no: u32,
    #[serde(flatten)]
    pub kind: TransformKind,
}

fn check_fan(fan: u32) -> Result<()> {
    if fan < 2 || !fan.is_power_of_two() {
        return Err(Error::Range(format!("fan {fan} is not a power of two >= 2")));
    }
    Ok(())
}

fn find_mem(d: &Design, mem_id: &str) -> Result<MemBlockInstance> {
    d.memory(mem_id)
        .cloned()
        .ok_or_else(|| Error::Lookup(format!("no memory `{mem_id}`")))
}

pub fn words_split_legal(spec: &MemBlockSpec, fan: u32) -> Result<()> {
    check_fan(fan)?;
    if !spec.words.is_multiple_of(fan) || spec.words / fan < MIN_WORDS {
        return Err(Error::Range(format!(
            "{spec} split {fan}-way by words leaves {} words, below {MIN_WORDS}",
            spec.words / fan
        )));
    }
    Ok(())
}

pub fn bits_split_legal(spec: &MemBlockSpec, fan: u32) -> Result<()> {
    check_fan(fan)?;
    if !spec.word_bits.is_multiple_of(fan) {
        return Err(Error::Range(format!("{spec}: {} bits not divisible by {fan}", spec.word_bits)));
    }
    if spec.word_bits / fan < MIN_BITS {
        return Err(Error::Range(format!(
            "{spec} split {fan}-way by bits leaves {} bits, below {MIN_BITS}",
            spec.word_bits / fan
        )));
    }
    Ok(())
}

fn bank(mem: &MemBlockInstance, id: String, spec: MemBlockSpec, axis: SplitAxis, fan: u32, i: u32) -> MemBlockInstance {
    MemBlockInstance {
        id,
        spec,
        partition: mem.partition,
        logical_parent: Some(mem.id.clone()),
        split_meta: Some(SplitMeta {
            axis,
            fan,
            bank_index: i,
            parent_spec: mem.spec,
        }),
    }
}

fn finish(mut d: Design, kind: TransformKind) -> Design {
    let sequence_no = d.transform_log.len() as u32;
    d.transform_log.push(Transform { sequence_no, kind });
    d.canonicalize();
    d
}

pub fn split_memory_words(d: &Design, mem_id: &str, fan: u32) -> Result<Design> {
    let mem = find_mem(d, mem_id)?;
    words_split_legal(&mem.spec, fan)?;
    let spec = MemBlockSpec {
        words: mem.spec.words / fan,
        ..mem.spec
    };
    let mux = format!("{mem_id}.mux");
    let banks: Vec<String> = (0..fan).map(|i| format!("{mem_id}.w{i}")).collect();

    let mut out = d.clone();
    out.memories.retain(|m| m.id != mem_id);
    for (i, id) in banks.iter().enumerate() {
        out.memories.push(bank(&mem, id.clone(), spec, SplitAxis::Words, fan, i as u32));
    }
    out.stages.push(LogicStage {
        id: mux.clone(),
        partition: mem.partition,
        delay_ns: 0.0,
        cells: 0,
        mux_levels: fan.trailing_zeros(),
    });

    let me = Endpoint::Mem(mem_id.to_string());
    let mut nets = Vec::with_capacity(out.nets.len() + 2 * fan as usize);
    for n in out.nets.drain(..) {
        if n.from == me {
            nets.push(Net {
                from: Endpoint::Stage(mux.clone()),
                ..n
            });
        } else if n.to == me {
            for (i, id) in banks.iter().enumerate() {
                nets.push(Net {
                    id: format!("{}.{i}", n.id),
                    to: Endpoint::Mem(id.clone()),
                    width: n.width - fan.trailing_zeros().min(n.width - 1),
                    ..n.clone()
                });
            }
        } else {
            nets.push(n);
        }
    }
    for id in &banks {
        nets.push(Net {
            id: format!("{id}>{mux}"),
            from: Endpoint::Mem(id.clone()),
            to: Endpoint::Stage(mux.clone()),
            width: spec.word_bits,
            internal: true,
        });
    }
    out.nets = nets;
    Ok(finish(
        out,
        TransformKind::SplitWords {
            mem_id: mem_id.into(),
            fan,
        },
    ))
}

pub fn split_memory_bits(d: &Design, mem_id: &str, fan: u32) -> Result<Design> {
    let mem = find_mem(d, mem_id)?;
    bits_split_legal(&mem.spec, fan)?;
    let spec = MemBlockSpec {
        word_bits: mem.spec.word_bits / fan,
        ..mem.spec
    };
    let banks: Vec<String> = (0..fan).map(|i| format!("{mem_id}.s{i}")).collect();

    let mut out = d.clone();
    out.memories.retain(|m| m.id != mem_id);
    for (i, id) in banks.iter().enumerate() {
        out.memories.push(bank(&mem, id.clone(), spec, SplitAxis::Bits, fan, i as u32));
    }

    let me = Endpoint::Mem(mem_id.to_string());
    let slice = mem.spec.word_bits - spec.word_bits;
    let mut nets = Vec::with_capacity(out.nets.len() + 2 * fan as usize);
    for n in out.nets.drain(..) {
        if n.from == me {
            for (i, id) in banks.iter().enumerate() {
                nets.push(Net {
                    id: format!("{}.{i}", n.id),
                    from: Endpoint::Mem(id.clone()),
                    width: (n.width / fan).max(1),
                    ..n.clone()
                });
            }
        } else if n.to == me {
            for (i, id) in banks.iter().enumerate() {
                nets.push(Net {
                    id: format!("{}.{i}", n.id),
                    to: Endpoint::Mem(id.clone()),
                    width: n.width.saturating_sub(slice).max(1),
                    ..n.clone()
                });
            }
        } else {
            nets.push(n);
        }
    }
    out.nets = nets;
    Ok(finish(
        out,
        TransformKind::SplitBits {
            mem_id: mem_id.into(),
            fan,
        },
    ))
}

pub fn insert_pipeline(d: &Design, net_id: &str) -> Result<Design> {
    let net = d
        .net(net_id)
        .cloned()
        .ok_or_else(|| Error::Lookup(format!("no net `{net_id}`")))?;
    if net.internal {
        return Err(Error::Legality(format!("net `{net_id}` is internal to a split memory")));
    }
    let partitions = d.partition_map();
    let partition = *partitions
        .get(&net.from)
        .ok_or_else(|| Error::Lookup(format!("net `{net_id}` source {} missing", net.from)))?;
    let reg = format!("pipe.{net_id}");
    if partitions.contains_key(&Endpoint::Reg(reg.clone())) {
        return Err(Error::Legality(format!("register `{reg}` already exists")));
    }

    let mut out = d.clone();
    out.nets.retain(|n| n.id != net_id);
    out.nets.push(Net {
        id: format!("{net_id}.a"),
        from: net.from.clone(),
        to: Endpoint::Reg(reg.clone()),
        width: net.width,
        internal: false,
    });
    out.nets.push(Net {
        id: format!("{net_id}.b"),
        from: Endpoint::Reg(reg.clone()),
        to: net.to.clone(),
        width: net.width,
        internal: false,
    });
    out.pipeline_regs.push(PipelineReg {
        id: reg,
        net: net_id.into(),
        width: net.width,
        partition,
    });
    Ok(finish(
        out,
        TransformKind::Pipeline {
            net_id: net_id.into(),
        },
    ))
}

pub fn apply(d: &Design, kind: &TransformKind) -> Result<Design> {
    match kind {
        TransformKind::SplitWords { mem_id, fan } => split_memory_words(d, mem_id, *fan),
        TransformKind::SplitBits { mem_id, fan } => split_memory_bits(d, mem_id, *fan),
        TransformKind::Pipeline { net_id } => insert_pipeline(d, net_id),
    }
}

pub fn replay(d0: &Design, log: &[Transform]) -> Result<Design> {
    let mut d = d0.clone();
    for t in log {
        d = apply(&d, &t.kind).map_err(|e| Error::Replay {
            seq: t.sequence_no,
            reason: e.to_string(),
        })?;
    }
    Ok(d)
}

/// Count of pipeline stages inserted on nets touching any CU partition.
pub fn cu_pipeline_depth(d: &Design) -> u32 {
    d.pipeline_regs
        .iter()
        .filter(|r| matches!(r.partition, crate::design::Partition::Cu(_)))
        .count() as u32
}
