//! Square sub-matrix views over either dense regions or arena-allocated ids.

use super::{AdditionOrder, DatumId, Region, TraceSink};

#[derive(Clone, Copy)]
pub(crate) enum Store<'a> {
    /// `region[row * n + col]`, used for the inputs and the final output.
    Dense { region: Region, n: usize },
    /// Row-major block of temporary ids.
    Temp { ids: &'a [u64], dim: usize },
}

#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    store: Store<'a>,
    r0: usize,
    c0: usize,
    pub size: usize,
}

impl<'a> View<'a> {
    pub fn dense(region: Region, n: usize) -> Self {
        View { store: Store::Dense { region, n }, r0: 0, c0: 0, size: n }
    }

    pub fn temp(ids: &'a [u64], dim: usize) -> Self {
        debug_assert_eq!(ids.len(), dim * dim);
        View { store: Store::Temp { ids, dim }, r0: 0, c0: 0, size: dim }
    }

    #[inline]
    pub fn id(&self, r: usize, c: usize) -> DatumId {
        let (r, c) = (self.r0 + r, self.c0 + c);
        match self.store {
            Store::Dense { region, n } => DatumId::new(region, (r * n + c) as u64),
            Store::Temp { ids, dim } => DatumId::temp(ids[r * dim + c]),
        }
    }

    pub fn quad(&self, qr: usize, qc: usize) -> View<'a> {
        let h = self.size / 2;
        View { store: self.store, r0: self.r0 + qr * h, c0: self.c0 + qc * h, size: h }
    }
}

fn for_each_cell(size: usize, order: AdditionOrder, mut f: impl FnMut(usize, usize)) {
    for outer in 0..size {
        for inner in 0..size {
            match order {
                AdditionOrder::RowMajor => f(outer, inner),
                AdditionOrder::ColumnMajor => f(inner, outer),
            }
        }
    }
}

/// `dst = x (+|-) y`, elementwise: read x, read y, write dst.
pub(crate) fn binop<S: TraceSink>(x: View, y: View, dst: View, order: AdditionOrder, sink: &mut S) {
    for_each_cell(dst.size, order, |r, c| {
        sink.access(x.id(r, c));
        sink.access(y.id(r, c));
        sink.access(dst.id(r, c));
    });
}

/// `dst = x`, elementwise: read x, write dst.
pub(crate) fn copy<S: TraceSink>(x: View, dst: View, order: AdditionOrder, sink: &mut S) {
    for_each_cell(dst.size, order, |r, c| {
        sink.access(x.id(r, c));
        sink.access(dst.id(r, c));
    });
}
