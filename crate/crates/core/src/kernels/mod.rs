//! Instrumented matrix-multiplication kernels.
//!
//! Every kernel is executed symbolically: no arithmetic is performed, only the
//! element-granular sequence of reads and writes is emitted into a
//! [`TraceSink`]. Inputs `A` and `B` have fixed ids (`row * n + col`), result
//! matrices and intermediate sums come from an [`Arena`].

mod arena;
pub mod io;
mod loops;
mod rmm;
mod strassen;
mod view;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arena::Arena;
pub use loops::{emit_naive, emit_tiled, naive_trace, tiled_trace};
pub use rmm::{emit_rmm, rmm_managed_trace, rmm_trace, rmm_trace_annotated, GroupRole, TempOrigin};
pub use strassen::{emit_strassen, strassen_managed_trace, strassen_trace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("tile dimension {tile} does not divide matrix dimension {n}")]
    TileMismatch { n: usize, tile: usize },
    #[error("kernel {0} needs a tile dimension")]
    MissingTile(KernelKind),
    #[error("unknown kernel '{0}'")]
    UnknownKernel(String),
    #[error("invalid trace semantics '{0}'")]
    BadSemantics(String),
}

/// Storage class of a datum. Encoded in the top two bits of a [`DatumId`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    InputA,
    InputB,
    Temporary,
    /// Final product written by kernels that do not allocate their own result.
    Output,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::InputA, Region::InputB, Region::Temporary, Region::Output];

    pub fn code(self) -> u64 {
        match self {
            Region::InputA => 0,
            Region::InputB => 1,
            Region::Temporary => 2,
            Region::Output => 3,
        }
    }

    pub fn from_code(code: u64) -> Region {
        match code & 3 {
            0 => Region::InputA,
            1 => Region::InputB,
            2 => Region::Temporary,
            _ => Region::Output,
        }
    }

    pub fn tag(self) -> char {
        match self {
            Region::InputA => 'A',
            Region::InputB => 'B',
            Region::Temporary => 'T',
            Region::Output => 'C',
        }
    }

    pub fn from_tag(c: char) -> Option<Region> {
        match c {
            'A' => Some(Region::InputA),
            'B' => Some(Region::InputB),
            'T' => Some(Region::Temporary),
            'C' => Some(Region::Output),
            _ => None,
        }
    }

    pub fn is_input(self) -> bool {
        matches!(self, Region::InputA | Region::InputB)
    }
}

const REGION_SHIFT: u32 = 62;
const INDEX_MASK: u64 = (1 << REGION_SHIFT) - 1;

/// A datum identifier: region in the top two bits, index in the rest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DatumId(u64);

impl DatumId {
    pub const MAX_INDEX: u64 = INDEX_MASK;

    #[inline]
    pub fn new(region: Region, index: u64) -> DatumId {
        debug_assert!(index <= INDEX_MASK);
        DatumId((region.code() << REGION_SHIFT) | index)
    }

    #[inline]
    pub fn a(index: u64) -> DatumId {
        DatumId::new(Region::InputA, index)
    }

    #[inline]
    pub fn b(index: u64) -> DatumId {
        DatumId::new(Region::InputB, index)
    }

    #[inline]
    pub fn temp(index: u64) -> DatumId {
        DatumId::new(Region::Temporary, index)
    }

    #[inline]
    pub fn region(self) -> Region {
        Region::from_code(self.0 >> REGION_SHIFT)
    }

    #[inline]
    pub fn index(self) -> u64 {
        self.0 & INDEX_MASK
    }

    #[inline]
    pub fn raw(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn from_raw(raw: u64) -> DatumId {
        DatumId(raw)
    }
}

impl fmt::Debug for DatumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.region().tag(), self.index())
    }
}

impl fmt::Display for DatumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for DatumId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DatumId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        io::parse_event(&s).ok_or_else(|| serde::de::Error::custom(format!("malformed datum '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Naive,
    Tiled,
    Rmm,
    RmmManaged,
    Strassen,
    StrassenManaged,
}

impl KernelKind {
    pub const ALL: [KernelKind; 6] = [
        KernelKind::Naive,
        KernelKind::Tiled,
        KernelKind::Rmm,
        KernelKind::RmmManaged,
        KernelKind::Strassen,
        KernelKind::StrassenManaged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Naive => "naive",
            KernelKind::Tiled => "tiled",
            KernelKind::Rmm => "rmm",
            KernelKind::RmmManaged => "rmm_managed",
            KernelKind::Strassen => "strassen",
            KernelKind::StrassenManaged => "strassen_managed",
        }
    }

    pub fn is_managed(self) -> bool {
        matches!(self, KernelKind::RmmManaged | KernelKind::StrassenManaged)
    }

    /// The managed counterpart of a recursive kernel.
    pub fn managed(self) -> Option<KernelKind> {
        match self {
            KernelKind::Rmm | KernelKind::RmmManaged => Some(KernelKind::RmmManaged),
            KernelKind::Strassen | KernelKind::StrassenManaged => Some(KernelKind::StrassenManaged),
            _ => None,
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| KernelError::UnknownKernel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AdditionOrder {
    #[default]
    RowMajor,
    ColumnMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum BaseCaseOrder {
    /// read A, read B, write C
    #[default]
    ABthenC,
    /// write C, read A, read B
    CthenAB,
}

/// Instrumentation choices that are not fixed by the algorithms themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceSemantics {
    /// Naive and tiled kernels keep `C[i][j]` in a register across the k loop.
    pub accumulator_in_register: bool,
    pub addition_order: AdditionOrder,
    pub base_case_order: BaseCaseOrder,
}

impl Default for TraceSemantics {
    fn default() -> Self {
        TraceSemantics {
            accumulator_in_register: true,
            addition_order: AdditionOrder::RowMajor,
            base_case_order: BaseCaseOrder::ABthenC,
        }
    }
}

impl FromStr for TraceSemantics {
    type Err = KernelError;

    /// Comma-separated flags: `default`, `acc=reg|mem`, `add=row|col`,
    /// `base=abc|cab`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut sem = TraceSemantics::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "default" => {}
                "acc=reg" => sem.accumulator_in_register = true,
                "acc=mem" => sem.accumulator_in_register = false,
                "add=row" => sem.addition_order = AdditionOrder::RowMajor,
                "add=col" => sem.addition_order = AdditionOrder::ColumnMajor,
                "base=abc" => sem.base_case_order = BaseCaseOrder::ABthenC,
                "base=cab" => sem.base_case_order = BaseCaseOrder::CthenAB,
                _ => return Err(KernelError::BadSemantics(part.to_string())),
            }
        }
        Ok(sem)
    }
}

impl fmt::Display for TraceSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = if self.accumulator_in_register { "reg" } else { "mem" };
        let add = match self.addition_order {
            AdditionOrder::RowMajor => "row",
            AdditionOrder::ColumnMajor => "col",
        };
        let base = match self.base_case_order {
            BaseCaseOrder::ABthenC => "abc",
            BaseCaseOrder::CthenAB => "cab",
        };
        write!(f, "acc={acc},add={add},base={base}")
    }
}

/// Receiver of a kernel's memory events.
pub trait TraceSink {
    fn access(&mut self, id: DatumId);

    fn alloc(&mut self, _id: DatumId) {}

    fn free(&mut self, _id: DatumId) {}
}

/// Counts events without storing them.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CountingSink {
    pub accesses: u64,
    pub allocs: u64,
    pub frees: u64,
}

impl TraceSink for CountingSink {
    fn access(&mut self, _id: DatumId) {
        self.accesses += 1;
    }

    fn alloc(&mut self, _id: DatumId) {
        self.allocs += 1;
    }

    fn free(&mut self, _id: DatumId) {
        self.frees += 1;
    }
}

impl<S: TraceSink + ?Sized> TraceSink for &mut S {
    fn access(&mut self, id: DatumId) {
        (**self).access(id)
    }

    fn alloc(&mut self, id: DatumId) {
        (**self).alloc(id)
    }

    fn free(&mut self, id: DatumId) {
        (**self).free(id)
    }
}

/// Lifetime of one logical temporary: the event index at which it was
/// allocated and, under managed allocation, the index at which it was freed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocRecord {
    pub id: DatumId,
    pub at: usize,
    pub freed_at: Option<usize>,
}

/// A fully materialized trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryTrace {
    pub events: Vec<DatumId>,
    pub n: usize,
    pub kernel: Option<KernelKind>,
    pub tile: Option<usize>,
    pub semantics: TraceSemantics,
    pub allocs: Vec<AllocRecord>,
    open: HashMap<DatumId, usize>,
}

impl MemoryTrace {
    pub fn new(n: usize, kernel: Option<KernelKind>, tile: Option<usize>, semantics: TraceSemantics) -> Self {
        MemoryTrace { events: Vec::new(), n, kernel, tile, semantics, allocs: Vec::new(), open: HashMap::new() }
    }

    /// A trace with no kernel metadata, e.g. a hand-written example.
    pub fn from_events(events: Vec<DatumId>) -> Self {
        let mut t = MemoryTrace::new(0, None, None, TraceSemantics::default());
        t.events = events;
        t
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Replays the stored events into another sink.
    pub fn replay<S: TraceSink>(&self, sink: &mut S) {
        for &e in &self.events {
            sink.access(e);
        }
    }

    pub fn count_region(&self, region: Region) -> usize {
        self.events.iter().filter(|e| e.region() == region).count()
    }
}

impl TraceSink for MemoryTrace {
    fn access(&mut self, id: DatumId) {
        self.events.push(id);
    }

    fn alloc(&mut self, id: DatumId) {
        let at = self.events.len();
        self.allocs.push(AllocRecord { id, at, freed_at: None });
        self.open.insert(id, self.allocs.len() - 1);
    }

    fn free(&mut self, id: DatumId) {
        if let Some(rec) = self.open.remove(&id) {
            self.allocs[rec].freed_at = Some(self.events.len());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    /// Distinct ids in the trace. Under LIFO reuse this is the peak number of
    /// simultaneously live data.
    pub peak_live: u64,
    /// Logical data: inputs and outputs plus every allocation.
    pub total_distinct: u64,
    /// Distinct temporary ids (peak live temporaries under reuse).
    pub temp_ids: u64,
    pub input_ids: u64,
    pub output_ids: u64,
}

pub fn footprint(trace: &MemoryTrace) -> Footprint {
    let mut ids: Vec<u64> = trace.events.iter().map(|e| e.raw()).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut per_region = [0u64; 4];
    for &raw in &ids {
        per_region[DatumId::from_raw(raw).region().code() as usize] += 1;
    }
    let temp_ids = per_region[2];
    let logical_temps = if trace.allocs.is_empty() {
        temp_ids
    } else {
        trace.allocs.iter().filter(|a| a.id.region() == Region::Temporary).count() as u64
    };
    let input_ids = per_region[0] + per_region[1];
    Footprint {
        peak_live: ids.len() as u64,
        total_distinct: input_ids + per_region[3] + logical_temps,
        temp_ids,
        input_ids,
        output_ids: per_region[3],
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    #[error("event {pos} touches {id} which is not allocated")]
    NotAllocated { pos: usize, id: DatumId },
    #[error("event {pos} touches {id} after it was freed at {freed_at}")]
    UseAfterFree { pos: usize, id: DatumId, freed_at: usize },
}

/// Checks that every temporary access falls inside an allocation of that id.
/// Traces without allocation records are accepted as-is.
pub fn validate(trace: &MemoryTrace) -> Result<(), TraceViolation> {
    if trace.allocs.is_empty() {
        return Ok(());
    }
    let mut by_id: HashMap<DatumId, Vec<(usize, Option<usize>)>> = HashMap::new();
    for a in &trace.allocs {
        by_id.entry(a.id).or_default().push((a.at, a.freed_at));
    }
    for (pos, &id) in trace.events.iter().enumerate() {
        if id.region() != Region::Temporary {
            continue;
        }
        let Some(spans) = by_id.get(&id) else {
            return Err(TraceViolation::NotAllocated { pos, id });
        };
        // spans are in allocation order; find the last allocation at or before pos
        let idx = spans.partition_point(|&(at, _)| at <= pos);
        if idx == 0 {
            return Err(TraceViolation::NotAllocated { pos, id });
        }
        if let (_, Some(freed_at)) = spans[idx - 1] {
            if freed_at <= pos {
                return Err(TraceViolation::UseAfterFree { pos, id, freed_at });
            }
        }
    }
    Ok(())
}

pub(crate) fn check_pow2(n: usize) -> Result<(), KernelError> {
    if n == 0 || !n.is_power_of_two() {
        Err(KernelError::NotPowerOfTwo(n))
    } else {
        Ok(())
    }
}

/// Outcome of a recursive kernel run.
#[derive(Debug, Clone)]
pub struct RecursionStats {
    pub arena: Arena,
    /// Number of 1x1 multiplications executed.
    pub base_cases: u64,
}

/// Kernel selection plus its size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub n: usize,
    pub tile: Option<usize>,
    pub semantics: TraceSemantics,
}

impl KernelConfig {
    pub fn new(kind: KernelKind, n: usize) -> Self {
        KernelConfig { kind, n, tile: None, semantics: TraceSemantics::default() }
    }

    pub fn tiled(n: usize, tile: usize) -> Self {
        KernelConfig { kind: KernelKind::Tiled, n, tile: Some(tile), semantics: TraceSemantics::default() }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        check_pow2(self.n)?;
        if self.kind == KernelKind::Tiled {
            let tile = self.tile.ok_or(KernelError::MissingTile(self.kind))?;
            loops::check_tile(self.n, tile)?;
        }
        Ok(())
    }

    /// Streams the kernel's events into `sink`.
    pub fn emit<S: TraceSink>(&self, sink: &mut S) -> Result<(), KernelError> {
        self.validate()?;
        let (n, s) = (self.n, self.semantics);
        match self.kind {
            KernelKind::Naive => emit_naive(n, s, sink),
            KernelKind::Tiled => emit_tiled(n, self.tile.unwrap_or(n), s, sink),
            KernelKind::Rmm => emit_rmm(n, s, false, sink).map(|_| ()),
            KernelKind::RmmManaged => emit_rmm(n, s, true, sink).map(|_| ()),
            KernelKind::Strassen => emit_strassen(n, s, false, sink).map(|_| ()),
            KernelKind::StrassenManaged => emit_strassen(n, s, true, sink).map(|_| ()),
        }
    }

    pub fn trace(&self) -> Result<MemoryTrace, KernelError> {
        let mut t = MemoryTrace::new(self.n, Some(self.kind), self.tile, self.semantics);
        self.emit(&mut t)?;
        Ok(t)
    }
}

/// `len` accesses drawn uniformly from `alphabet` ids of region A.
pub fn random_trace(len: usize, alphabet: u64, seed: u64) -> MemoryTrace {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let alphabet = alphabet.max(1);
    MemoryTrace::from_events((0..len).map(|_| DatumId::a(rng.gen_range(0..alphabet))).collect())
}
