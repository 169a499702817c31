use super::{DatumId, TraceSink};

/// Allocator for temporary ids.
///
/// Unmanaged arenas hand out strictly increasing ids and never reclaim. A
/// managed arena keeps a LIFO free list, so the most recently freed id is the
/// next one handed out.
#[derive(Debug, Clone, Default)]
pub struct Arena {
    next_id: u64,
    free_list: Vec<u64>,
    managed: bool,
    live: u64,
    high_water: u64,
    allocations: u64,
}

impl Arena {
    pub fn unmanaged() -> Self {
        Arena::default()
    }

    pub fn managed() -> Self {
        Arena { managed: true, ..Arena::default() }
    }

    pub fn is_managed(&self) -> bool {
        self.managed
    }

    pub fn alloc<S: TraceSink>(&mut self, sink: &mut S) -> u64 {
        let id = match self.free_list.pop() {
            Some(id) => id,
            None => {
                let id = self.next_id;
                self.next_id += 1;
                id
            }
        };
        self.live += 1;
        self.high_water = self.high_water.max(self.live);
        self.allocations += 1;
        sink.alloc(DatumId::temp(id));
        id
    }

    /// Allocates `count` ids; element `e` of the block gets the `e`-th id.
    pub fn alloc_block<S: TraceSink>(&mut self, count: usize, sink: &mut S) -> Vec<u64> {
        (0..count).map(|_| self.alloc(sink)).collect()
    }

    /// Releases an id. Unmanaged arenas only update the live count.
    pub fn free<S: TraceSink>(&mut self, id: u64, sink: &mut S) {
        debug_assert!(self.live > 0);
        self.live -= 1;
        if self.managed {
            self.free_list.push(id);
            sink.free(DatumId::temp(id));
        }
    }

    pub fn free_block<S: TraceSink>(&mut self, ids: &[u64], sink: &mut S) {
        for &id in ids {
            self.free(id, sink);
        }
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn free_list(&self) -> &[u64] {
        &self.free_list
    }

    /// Maximum number of simultaneously live temporaries so far.
    pub fn high_water(&self) -> u64 {
        self.high_water
    }

    pub fn live(&self) -> u64 {
        self.live
    }

    pub fn allocations(&self) -> u64 {
        self.allocations
    }
}
