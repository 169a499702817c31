//! Strassen's seven-product recursion.
//!
//! Per call of dimension `n` (half `h`), product `k` first forms its operand
//! sums into fresh `h x h` temporaries, recurses into a fresh `M_k`, then
//! folds `M_k` into the destination quadrants:
//!
//! ```text
//! M1 = (A11 + A22)(B11 + B22)   C11  = M1,  C22  = M1
//! M2 = (A21 + A22) B11          C21  = M2,  C22 -= M2
//! M3 = A11 (B12 - B22)          C12  = M3,  C22 += M3
//! M4 = A22 (B21 - B11)          C11 += M4,  C21 += M4
//! M5 = (A11 + A12) B22          C11 -= M5,  C12 += M5
//! M6 = (A21 - A11)(B11 + B12)   C22 += M6
//! M7 = (A12 - A22)(B21 + B22)   C11 += M7
//! ```
//!
//! Ten sums and seven products give 17 temporaries per call; the root writes
//! into the [`Region::Output`] matrix. The managed variant frees each sum once
//! its product returns and each `M_k` once it has been folded in.

use super::view::{binop, copy, View};
use super::{
    check_pow2, Arena, BaseCaseOrder, KernelError, KernelKind, MemoryTrace, RecursionStats, Region, TraceSemantics,
    TraceSink,
};

/// An operand of one of the seven products: an input quadrant or a sum of two.
#[derive(Clone, Copy)]
enum Operand {
    Quad(usize, usize),
    Sum((usize, usize), (usize, usize)),
}

use Operand::{Quad, Sum};

/// `(left, right, [(dst quadrant, fold)])`; `fold` is false for a plain copy.
type Product = (Operand, Operand, &'static [((usize, usize), bool)]);

const PRODUCTS: [Product; 7] = [
    (Sum((0, 0), (1, 1)), Sum((0, 0), (1, 1)), &[((0, 0), false), ((1, 1), false)]),
    (Sum((1, 0), (1, 1)), Quad(0, 0), &[((1, 0), false), ((1, 1), true)]),
    (Quad(0, 0), Sum((0, 1), (1, 1)), &[((0, 1), false), ((1, 1), true)]),
    (Quad(1, 1), Sum((1, 0), (0, 0)), &[((0, 0), true), ((1, 0), true)]),
    (Sum((0, 0), (0, 1)), Quad(1, 1), &[((0, 0), true), ((0, 1), true)]),
    (Sum((1, 0), (0, 0)), Sum((0, 0), (0, 1)), &[((1, 1), true)]),
    (Sum((0, 1), (1, 1)), Sum((1, 0), (1, 1)), &[((0, 0), true)]),
];

struct Strassen<'s, S> {
    sem: TraceSemantics,
    arena: Arena,
    sink: &'s mut S,
    base_cases: u64,
}

impl<S: TraceSink> Strassen<'_, S> {
    fn operand(&mut self, m: View, op: Operand, h: usize) -> Option<Vec<u64>> {
        match op {
            Quad(..) => None,
            Sum(x, y) => {
                let ids = self.arena.alloc_block(h * h, self.sink);
                binop(m.quad(x.0, x.1), m.quad(y.0, y.1), View::temp(&ids, h), self.sem.addition_order, self.sink);
                Some(ids)
            }
        }
    }

    fn call(&mut self, a: View, b: View, dst: View) {
        let size = a.size;
        if size == 1 {
            self.base_cases += 1;
            let (x, y, z) = (a.id(0, 0), b.id(0, 0), dst.id(0, 0));
            match self.sem.base_case_order {
                BaseCaseOrder::ABthenC => [x, y, z],
                BaseCaseOrder::CthenAB => [z, x, y],
            }
            .into_iter()
            .for_each(|e| self.sink.access(e));
            return;
        }
        let h = size / 2;
        let order = self.sem.addition_order;
        for (left, right, folds) in PRODUCTS {
            let ls = self.operand(a, left, h);
            let rs = self.operand(b, right, h);
            let lv = match (&ls, left) {
                (Some(ids), _) => View::temp(ids, h),
                (None, Quad(r, c)) => a.quad(r, c),
                (None, Sum(..)) => unreachable!(),
            };
            let rv = match (&rs, right) {
                (Some(ids), _) => View::temp(ids, h),
                (None, Quad(r, c)) => b.quad(r, c),
                (None, Sum(..)) => unreachable!(),
            };
            let m = self.arena.alloc_block(h * h, self.sink);
            self.call(lv, rv, View::temp(&m, h));
            if self.arena.is_managed() {
                for ids in [&ls, &rs].into_iter().flatten() {
                    self.arena.free_block(ids, self.sink);
                }
            }
            let mv = View::temp(&m, h);
            for &((qr, qc), fold) in folds {
                let d = dst.quad(qr, qc);
                if fold {
                    binop(d, mv, d, order, self.sink);
                } else {
                    copy(mv, d, order, self.sink);
                }
            }
            if self.arena.is_managed() {
                self.arena.free_block(&m, self.sink);
            }
        }
    }
}

pub fn emit_strassen<S: TraceSink>(
    n: usize,
    sem: TraceSemantics,
    managed: bool,
    sink: &mut S,
) -> Result<RecursionStats, KernelError> {
    check_pow2(n)?;
    let arena = if managed { Arena::managed() } else { Arena::unmanaged() };
    let mut run = Strassen { sem, arena, sink, base_cases: 0 };
    run.call(View::dense(Region::InputA, n), View::dense(Region::InputB, n), View::dense(Region::Output, n));
    Ok(RecursionStats { arena: run.arena, base_cases: run.base_cases })
}

pub fn strassen_trace(n: usize, sem: TraceSemantics) -> Result<MemoryTrace, KernelError> {
    let mut t = MemoryTrace::new(n, Some(KernelKind::Strassen), None, sem);
    emit_strassen(n, sem, false, &mut t)?;
    Ok(t)
}

pub fn strassen_managed_trace(n: usize, sem: TraceSemantics) -> Result<MemoryTrace, KernelError> {
    let mut t = MemoryTrace::new(n, Some(KernelKind::StrassenManaged), None, sem);
    emit_strassen(n, sem, true, &mut t)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{footprint, validate, DatumId};

    fn sem() -> TraceSemantics {
        TraceSemantics::default()
    }

    fn ts(n: u64) -> u64 {
        // 17/3 (n^log2(7) - n^2)
        let l = n.trailing_zeros();
        17 * (7u64.pow(l) - n * n) / 3
    }

    #[test]
    fn base_case() {
        let t = strassen_trace(1, sem()).unwrap();
        assert_eq!(t.events, vec![DatumId::a(0), DatumId::b(0), DatumId::new(Region::Output, 0)]);
        assert_eq!(strassen_managed_trace(1, sem()).unwrap().events, t.events);
    }

    #[test]
    fn temporaries_match_closed_form() {
        assert_eq!(ts(2), 17);
        assert_eq!(ts(4), 187);
        for n in [2u64, 4, 8, 16, 32, 64] {
            let mut sink = crate::kernels::CountingSink::default();
            let stats = emit_strassen(n as usize, sem(), false, &mut sink).unwrap();
            assert_eq!(stats.arena.allocations(), ts(n), "n={n}");
        }
        assert_eq!(footprint(&strassen_trace(4, sem()).unwrap()).temp_ids, 187);
    }

    #[test]
    fn seven_way_leaf_count() {
        for n in [1usize, 2, 4, 8, 16] {
            let mut t = MemoryTrace::new(n, None, None, sem());
            let stats = emit_strassen(n, sem(), false, &mut t).unwrap();
            assert_eq!(stats.base_cases, 7u64.pow(n.trailing_zeros()));
            assert!(t.len() as f64 >= (n as f64).powf(7f64.log2()));
        }
    }

    #[test]
    fn managed_footprint_bound() {
        for n in [2usize, 4, 8, 16, 32] {
            let t = strassen_managed_trace(n, sem()).unwrap();
            validate(&t).unwrap();
            let f = footprint(&t);
            assert!(f.temp_ids < (n * n) as u64, "n={n}: {}", f.temp_ids);
            assert!(f.input_ids + f.temp_ids <= 3 * (n * n) as u64);
        }
    }

    #[test]
    fn managed_preserves_operation_sequence() {
        let u = strassen_trace(8, sem()).unwrap();
        let m = strassen_managed_trace(8, sem()).unwrap();
        assert_eq!(u.len(), m.len());
        assert!(u
            .events
            .iter()
            .zip(&m.events)
            .all(|(x, y)| x.region() == y.region() && (x.region() == Region::Temporary || x == y)));
    }
}
