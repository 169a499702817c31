//! Recursive (cache-oblivious) matrix multiplication with an eight-way split.
//!
//! Each call allocates a fresh result matrix, runs the eight half-size
//! products depth-first in the order
//! `(A11,B11) (A12,B21) | (A11,B12) (A12,B22) | (A21,B11) (A22,B21) | (A21,B12) (A22,B22)`
//! and after every pair (an addition group) sums the two child results into
//! one quadrant of its own result.

use serde::{Deserialize, Serialize};

use super::view::{binop, View};
use super::{
    check_pow2, Arena, BaseCaseOrder, DatumId, KernelError, KernelKind, MemoryTrace, RecursionStats, Region,
    TraceSemantics, TraceSink,
};

/// Position of a call's result inside its parent's addition group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupRole {
    First,
    Second,
    Root,
}

/// Where an (unmanaged) temporary was introduced in the recursion tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TempOrigin {
    /// Dimension of the call that allocated it.
    pub level: usize,
    pub role: GroupRole,
    pub row: usize,
    pub col: usize,
}

const GROUPS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

struct Rmm<'s, S> {
    sem: TraceSemantics,
    arena: Arena,
    sink: &'s mut S,
    origins: Option<Vec<TempOrigin>>,
    base_cases: u64,
}

impl<S: TraceSink> Rmm<'_, S> {
    fn call(&mut self, a: View, b: View, role: GroupRole) -> Vec<u64> {
        let size = a.size;
        let c = self.arena.alloc_block(size * size, self.sink);
        if let Some(origins) = self.origins.as_mut() {
            for (e, &id) in c.iter().enumerate() {
                debug_assert_eq!(id as usize, origins.len());
                origins.push(TempOrigin { level: size, role, row: e / size, col: e % size });
            }
        }
        if size == 1 {
            self.base_cases += 1;
            let (x, y, z) = (a.id(0, 0), b.id(0, 0), DatumId::temp(c[0]));
            match self.sem.base_case_order {
                BaseCaseOrder::ABthenC => [x, y, z],
                BaseCaseOrder::CthenAB => [z, x, y],
            }
            .into_iter()
            .for_each(|e| self.sink.access(e));
            return c;
        }
        let cv = View::temp(&c, size);
        for (qi, qj) in GROUPS {
            let p = self.call(a.quad(qi, 0), b.quad(0, qj), GroupRole::First);
            let q = self.call(a.quad(qi, 1), b.quad(1, qj), GroupRole::Second);
            let h = size / 2;
            binop(View::temp(&p, h), View::temp(&q, h), cv.quad(qi, qj), self.sem.addition_order, self.sink);
            if self.arena.is_managed() {
                self.arena.free_block(&p, self.sink);
                self.arena.free_block(&q, self.sink);
            }
        }
        c
    }
}

/// Streams the recursive kernel into `sink`.
/// `managed` frees both operands of every addition group once the group's
/// destination quadrant is written.
pub fn emit_rmm<S: TraceSink>(
    n: usize,
    sem: TraceSemantics,
    managed: bool,
    sink: &mut S,
) -> Result<RecursionStats, KernelError> {
    check_pow2(n)?;
    let arena = if managed { Arena::managed() } else { Arena::unmanaged() };
    let mut run = Rmm { sem, arena, sink, origins: None, base_cases: 0 };
    run.call(View::dense(Region::InputA, n), View::dense(Region::InputB, n), GroupRole::Root);
    Ok(RecursionStats { arena: run.arena, base_cases: run.base_cases })
}

pub fn rmm_trace(n: usize, sem: TraceSemantics) -> Result<MemoryTrace, KernelError> {
    let mut t = MemoryTrace::new(n, Some(KernelKind::Rmm), None, sem);
    emit_rmm(n, sem, false, &mut t)?;
    Ok(t)
}

pub fn rmm_managed_trace(n: usize, sem: TraceSemantics) -> Result<MemoryTrace, KernelError> {
    let mut t = MemoryTrace::new(n, Some(KernelKind::RmmManaged), None, sem);
    emit_rmm(n, sem, true, &mut t)?;
    Ok(t)
}

/// Unmanaged trace plus, for every temporary id, the tree position that
/// introduced it (indexed by id).
pub fn rmm_trace_annotated(n: usize, sem: TraceSemantics) -> Result<(MemoryTrace, Vec<TempOrigin>), KernelError> {
    check_pow2(n)?;
    let mut t = MemoryTrace::new(n, Some(KernelKind::Rmm), None, sem);
    let mut run = Rmm { sem, arena: Arena::unmanaged(), sink: &mut t, origins: Some(Vec::new()), base_cases: 0 };
    run.call(View::dense(Region::InputA, n), View::dense(Region::InputB, n), GroupRole::Root);
    let origins = run.origins.take().unwrap_or_default();
    Ok((t, origins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{footprint, validate};

    fn sem() -> TraceSemantics {
        TraceSemantics::default()
    }

    #[test]
    fn base_case() {
        let t = rmm_trace(1, sem()).unwrap();
        assert_eq!(t.events, vec![DatumId::a(0), DatumId::b(0), DatumId::temp(0)]);
        assert_eq!(rmm_managed_trace(1, sem()).unwrap().events, t.events);
    }

    #[test]
    fn temporary_counts_match_closed_form() {
        for n in [1usize, 2, 4, 8, 16, 32, 64] {
            let mut sink = crate::kernels::CountingSink::default();
            let stats = emit_rmm(n, sem(), false, &mut sink).unwrap();
            let t = (n * n * (2 * n - 1)) as u64;
            assert_eq!(stats.arena.allocations(), t, "n={n}");
            assert_eq!(stats.arena.next_id(), t);
            assert_eq!(stats.base_cases, (n * n * n) as u64);
        }
        assert_eq!(footprint(&rmm_trace(2, sem()).unwrap()).temp_ids, 12);
        let f4 = footprint(&rmm_trace(4, sem()).unwrap());
        assert_eq!((f4.temp_ids, f4.total_distinct), (112, 144));
    }

    #[test]
    fn trace_length() {
        for n in [1usize, 2, 4, 8, 16] {
            assert_eq!(rmm_trace(n, sem()).unwrap().len(), 6 * n.pow(3) - 3 * n * n);
        }
    }

    #[test]
    fn second_level_sequence() {
        // n=2: the root result takes T0..T3, the first pair of products T4 and T5.
        let t = rmm_trace(2, sem()).unwrap();
        let head: Vec<String> = t.events[..9].iter().map(|e| e.to_string()).collect();
        assert_eq!(head, ["A0", "B0", "T4", "A1", "B2", "T5", "T4", "T5", "T0"]);
    }

    #[test]
    fn base_case_count_equals_cube() {
        for n in [2usize, 4, 8] {
            let t = rmm_trace(n, sem()).unwrap();
            assert_eq!(t.count_region(Region::InputA), n.pow(3));
            assert_eq!(t.count_region(Region::InputB), n.pow(3));
        }
    }

    #[test]
    fn managed_bounds_and_validity() {
        for n in [2usize, 4, 8, 16] {
            let t = rmm_managed_trace(n, sem()).unwrap();
            validate(&t).unwrap();
            let f = footprint(&t);
            assert!(f.temp_ids <= 2 * (n * n) as u64, "n={n} temps={}", f.temp_ids);
            assert!(f.peak_live <= 4 * (n * n) as u64);
            assert_eq!(f.total_distinct, (n * n * (2 * n - 1) + 2 * n * n) as u64);
        }
        assert!(footprint(&rmm_managed_trace(4, sem()).unwrap()).peak_live <= 64);
    }

    #[test]
    fn managed_and_unmanaged_share_operation_sequence() {
        let u = rmm_trace(8, sem()).unwrap();
        let m = rmm_managed_trace(8, sem()).unwrap();
        assert_eq!(u.len(), m.len());
        assert!(u.events.iter().zip(&m.events).all(|(x, y)| x.region() == y.region()));
        let inputs = |t: &MemoryTrace| t.events.iter().filter(|e| e.region().is_input()).copied().collect::<Vec<_>>();
        assert_eq!(inputs(&u), inputs(&m));
    }

    #[test]
    fn annotations_cover_every_temp() {
        let (t, origins) = rmm_trace_annotated(4, sem()).unwrap();
        assert_eq!(origins.len(), 112);
        assert_eq!(origins[0], TempOrigin { level: 4, role: GroupRole::Root, row: 0, col: 0 });
        assert_eq!(origins.iter().filter(|o| o.level == 1).count(), 64);
        assert_eq!(t, rmm_trace(4, sem()).unwrap());
    }

    #[test]
    fn deterministic() {
        assert_eq!(rmm_managed_trace(8, sem()).unwrap(), rmm_managed_trace(8, sem()).unwrap());
    }
}
