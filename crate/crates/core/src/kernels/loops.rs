//! Triple-loop kernels: naive i-j-k and the five-deep tiled loop nest.

use super::{check_pow2, Arena, DatumId, KernelError, KernelKind, MemoryTrace, TraceSemantics, TraceSink};

pub(crate) fn check_tile(n: usize, tile: usize) -> Result<(), KernelError> {
    check_pow2(n)?;
    if tile == 0 || tile > n || !n.is_multiple_of(tile) || !tile.is_power_of_two() {
        return Err(KernelError::TileMismatch { n, tile });
    }
    Ok(())
}

struct Body {
    n: usize,
    sem: TraceSemantics,
    c_ids: Vec<u64>,
}

impl Body {
    fn new<S: TraceSink>(n: usize, sem: TraceSemantics, sink: &mut S) -> Self {
        let c_ids = if sem.accumulator_in_register { Vec::new() } else { Arena::unmanaged().alloc_block(n * n, sink) };
        Body { n, sem, c_ids }
    }

    /// One `C[i][j] += A[i][k] * B[k][j]` iteration.
    #[inline]
    fn step<S: TraceSink>(&self, i: usize, j: usize, k: usize, sink: &mut S) {
        let n = self.n;
        let a = DatumId::a((i * n + k) as u64);
        let b = DatumId::b((k * n + j) as u64);
        if self.sem.accumulator_in_register {
            sink.access(a);
            sink.access(b);
            return;
        }
        let c = DatumId::temp(self.c_ids[i * n + j]);
        match self.sem.base_case_order {
            super::BaseCaseOrder::ABthenC => {
                sink.access(a);
                sink.access(b);
                sink.access(c);
                sink.access(c);
            }
            super::BaseCaseOrder::CthenAB => {
                sink.access(c);
                sink.access(a);
                sink.access(b);
                sink.access(c);
            }
        }
    }
}

pub fn emit_naive<S: TraceSink>(n: usize, sem: TraceSemantics, sink: &mut S) -> Result<(), KernelError> {
    check_pow2(n)?;
    let body = Body::new(n, sem, sink);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                body.step(i, j, k, sink);
            }
        }
    }
    Ok(())
}

pub fn emit_tiled<S: TraceSink>(n: usize, tile: usize, sem: TraceSemantics, sink: &mut S) -> Result<(), KernelError> {
    check_tile(n, tile)?;
    let body = Body::new(n, sem, sink);
    for jj in (0..n).step_by(tile) {
        for kk in (0..n).step_by(tile) {
            for i in 0..n {
                for j in jj..jj + tile {
                    for k in kk..kk + tile {
                        body.step(i, j, k, sink);
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn naive_trace(n: usize, sem: TraceSemantics) -> Result<MemoryTrace, KernelError> {
    let mut t = MemoryTrace::new(n, Some(KernelKind::Naive), None, sem);
    emit_naive(n, sem, &mut t)?;
    Ok(t)
}

pub fn tiled_trace(n: usize, tile: usize, sem: TraceSemantics) -> Result<MemoryTrace, KernelError> {
    let mut t = MemoryTrace::new(n, Some(KernelKind::Tiled), Some(tile), sem);
    emit_tiled(n, tile, sem, &mut t)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{footprint, Region};

    #[test]
    fn naive_single_iteration() {
        let t = naive_trace(1, TraceSemantics::default()).unwrap();
        assert_eq!(t.events, vec![DatumId::a(0), DatumId::b(0)]);
    }

    #[test]
    fn naive_event_count() {
        assert_eq!(naive_trace(2, TraceSemantics::default()).unwrap().len(), 16);
        assert_eq!(naive_trace(8, TraceSemantics::default()).unwrap().len(), 2 * 512);
        assert_eq!(footprint(&naive_trace(2, TraceSemantics::default()).unwrap()).total_distinct, 8);
    }

    #[test]
    fn naive_with_memory_accumulator() {
        let sem = TraceSemantics { accumulator_in_register: false, ..TraceSemantics::default() };
        let t = naive_trace(4, sem).unwrap();
        assert_eq!(t.len(), 4 * 64);
        assert_eq!(t.count_region(Region::Temporary), 2 * 64);
        assert_eq!(footprint(&t).temp_ids, 16);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(naive_trace(6, TraceSemantics::default()), Err(KernelError::NotPowerOfTwo(6)));
        assert_eq!(naive_trace(0, TraceSemantics::default()), Err(KernelError::NotPowerOfTwo(0)));
    }

    #[test]
    fn tiled_full_tile_is_naive() {
        let s = TraceSemantics::default();
        assert_eq!(tiled_trace(4, 4, s).unwrap().events, naive_trace(4, s).unwrap().events);
    }

    #[test]
    fn tiled_length_and_errors() {
        let s = TraceSemantics::default();
        assert_eq!(tiled_trace(8, 2, s).unwrap().len(), 1024);
        assert_eq!(tiled_trace(8, 16, s), Err(KernelError::TileMismatch { n: 8, tile: 16 }));
        assert_eq!(tiled_trace(8, 3, s), Err(KernelError::TileMismatch { n: 8, tile: 3 }));
        assert_eq!(tiled_trace(8, 0, s), Err(KernelError::TileMismatch { n: 8, tile: 0 }));
    }

    #[test]
    fn tiled_unit_tile_is_jki_order() {
        let s = TraceSemantics::default();
        let t = tiled_trace(2, 1, s).unwrap();
        // j=0,k=0: i=0,1 then j=0,k=1 ...
        let expect: Vec<DatumId> =
            [(0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1), (0, 1, 0), (1, 1, 0), (0, 1, 1), (1, 1, 1)]
                .iter()
                .flat_map(|&(i, j, k)| [DatumId::a(i * 2 + k), DatumId::b(k * 2 + j)])
                .collect();
        assert_eq!(t.events, expect);
    }
}
