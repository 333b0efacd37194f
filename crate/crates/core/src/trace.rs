//! Primitive traces and operation-count cost accounting.
//!
//! Every primitive a machine executes is appended to its trace together with
//! the public dimensions it ran over. Two executions whose traces differ
//! while their public inputs agree reveal a dependence on private data; the
//! ledger aggregates the same events into per-stage counts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TaintViolation};

/// Primitive operation kinds as counted by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Prim {
    Enc,
    Dec,
    Add,
    Sub,
    Mul,
    EAdd,
    ESub,
    EMul,
    AddPublic,
    MulPublic,
    DotProduct,
    Sum,
    LShift,
    RShift,
    Size,
    Transpose,
    Broadcast,
    Concat,
    Slice,
    Repeat,
    Gather,
    Eq,
    Compare,
    MaskedReciprocal,
    Sort,
    Join,
}

impl Prim {
    pub const ALL: [Prim; 26] = [
        Prim::Enc,
        Prim::Dec,
        Prim::Add,
        Prim::Sub,
        Prim::Mul,
        Prim::EAdd,
        Prim::ESub,
        Prim::EMul,
        Prim::AddPublic,
        Prim::MulPublic,
        Prim::DotProduct,
        Prim::Sum,
        Prim::LShift,
        Prim::RShift,
        Prim::Size,
        Prim::Transpose,
        Prim::Broadcast,
        Prim::Concat,
        Prim::Slice,
        Prim::Repeat,
        Prim::Gather,
        Prim::Eq,
        Prim::Compare,
        Prim::MaskedReciprocal,
        Prim::Sort,
        Prim::Join,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Prim::Enc => "enc",
            Prim::Dec => "dec",
            Prim::Add => "add",
            Prim::Sub => "sub",
            Prim::Mul => "mul",
            Prim::EAdd => "eadd",
            Prim::ESub => "esub",
            Prim::EMul => "emul",
            Prim::AddPublic => "add_public",
            Prim::MulPublic => "mul_public",
            Prim::DotProduct => "dot_product",
            Prim::Sum => "sum",
            Prim::LShift => "lshift",
            Prim::RShift => "rshift",
            Prim::Size => "size",
            Prim::Transpose => "transpose",
            Prim::Broadcast => "broadcast",
            Prim::Concat => "concat",
            Prim::Slice => "slice",
            Prim::Repeat => "repeat",
            Prim::Gather => "gather",
            Prim::Eq => "eq",
            Prim::Compare => "compare",
            Prim::MaskedReciprocal => "masked_reciprocal",
            Prim::Sort => "sort",
            Prim::Join => "join",
        }
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Prim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Prim::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown primitive `{s}`")))
    }
}

/// Pipeline stage an operation is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Adhoc,
    EncodeBlock,
    Upload,
    MergeDedup,
    Obfuscate,
    FilterEr,
    Finalize,
}

impl Stage {
    pub const PIPELINE: [Stage; 6] = [
        Stage::EncodeBlock,
        Stage::Upload,
        Stage::MergeDedup,
        Stage::Obfuscate,
        Stage::FilterEr,
        Stage::Finalize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Adhoc => "adhoc",
            Stage::EncodeBlock => "encode_block",
            Stage::Upload => "upload",
            Stage::MergeDedup => "merge_dedup",
            Stage::Obfuscate => "obfuscate",
            Stage::FilterEr => "filter_er",
            Stage::Finalize => "finalize",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One executed primitive and the public dimensions it touched.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub prim: Prim,
    pub dims: Vec<usize>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.prim, self.dims)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn clear(&mut self) {
        self.events.clear();
    }

    pub fn extend(&mut self, other: &Trace) {
        self.events.extend_from_slice(&other.events);
    }
}

/// Compares the traces of two executions over inputs with identical public
/// shapes. Any difference means the primitive sequence depended on private
/// contents.
pub fn assert_oblivious(left: &Trace, right: &Trace) -> Result<(), TaintViolation> {
    let common = left.len().min(right.len());
    for i in 0..common {
        if left.events[i] != right.events[i] {
            return Err(TaintViolation {
                operation: format!("{} vs {}", left.events[i], right.events[i]),
                site: format!("trace event #{i}"),
            });
        }
    }
    if left.len() != right.len() {
        return Err(TaintViolation {
            operation: format!("trace lengths {} vs {}", left.len(), right.len()),
            site: format!("trace event #{common}"),
        });
    }
    Ok(())
}

/// Per-primitive unit costs. Missing entries cost 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostWeights {
    weights: BTreeMap<Prim, f64>,
}

impl CostWeights {
    pub fn unit() -> Self {
        Self::default()
    }

    pub fn set(&mut self, prim: Prim, weight: f64) -> &mut Self {
        self.weights.insert(prim, weight);
        self
    }

    pub fn get(&self, prim: Prim) -> f64 {
        self.weights.get(&prim).copied().unwrap_or(1.0)
    }

    /// Parses `prim:weight,prim:weight`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut out = Self::default();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, w) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("bad weight entry `{item}`")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad weight `{w}`")))?;
            out.set(name.trim().parse()?, w);
        }
        Ok(out)
    }

    pub fn render(&self) -> String {
        self.weights
            .iter()
            .map(|(p, w)| format!("{p}:{w}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Primitive counts per stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCostLedger {
    counts: BTreeMap<(Stage, Prim), u64>,
}

impl OpCostLedger {
    pub fn record(&mut self, stage: Stage, prim: Prim) {
        *self.counts.entry((stage, prim)).or_default() += 1;
    }

    pub fn add(&mut self, stage: Stage, prim: Prim, n: u64) {
        if n > 0 {
            *self.counts.entry((stage, prim)).or_default() += n;
        }
    }

    pub fn count(&self, prim: Prim) -> u64 {
        self.counts
            .iter()
            .filter(|((_, p), _)| *p == prim)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn stage_count(&self, stage: Stage, prim: Prim) -> u64 {
        self.counts.get(&(stage, prim)).copied().unwrap_or(0)
    }

    pub fn total(&self, weights: &CostWeights) -> f64 {
        self.counts
            .iter()
            .map(|((_, p), c)| weights.get(*p) * *c as f64)
            .sum()
    }

    pub fn stage_total(&self, stage: Stage, weights: &CostWeights) -> f64 {
        self.counts
            .iter()
            .filter(|((s, _), _)| *s == stage)
            .map(|((_, p), c)| weights.get(*p) * *c as f64)
            .sum()
    }

    /// Order-independent merge of another ledger.
    pub fn merge(&mut self, other: &OpCostLedger) {
        for (&key, &c) in &other.counts {
            *self.counts.entry(key).or_default() += c;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (Stage, Prim, u64)> + '_ {
        self.counts.iter().map(|(&(s, p), &c)| (s, p, c))
    }

    /// `stage,primitive,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,primitive,count\n");
        for (s, p, c) in self.rows() {
            out.push_str(&format!("{s},{p},{c}\n"));
        }
        out
    }
}
