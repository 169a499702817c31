//! Ground truth for the model, read off an instrumented trace.
//!
//! Every temporary is read once after it is written; its distance is filed
//! under the position of the call that produced it. Every reuse of an input
//! element is filed under its level and its (reduced) index, using the
//! base-case coordinates `(i, j, k)` of the access: `A[i][k]` is reused
//! between columns `j - 1` and `j` of B, at the level given by the trailing
//! ones of `j - 1`; `B[k][j]` likewise between rows `i - 1` and `i`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{ModelError, Which};
use crate::kernels::{rmm_trace_annotated, GroupRole, MemoryTrace, Region, TraceSemantics};
use crate::stackdist::reuse_sequence;

/// One observed reuse: its distance and, when requested, how many distinct
/// temporaries and input elements its window holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub distance: u64,
    pub temps: Option<u64>,
    pub inputs: Option<u64>,
}

/// Observations keyed by model coordinates (1-based `i, j` for `F` and `G`,
/// 0-based `r, c` for the temporary grids).
#[derive(Debug, Clone, Default)]
pub struct Observations {
    pub n: usize,
    pub dt: BTreeMap<(usize, Which, usize, usize), BTreeSet<Observation>>,
    pub f: BTreeMap<(usize, usize, usize), BTreeSet<Observation>>,
    pub g: BTreeMap<(usize, usize, usize), BTreeSet<Observation>>,
    /// Distances of every level-`l` temporary, grouped by the order in which
    /// its `l x l` block was allocated.
    pub blocks: BTreeMap<usize, Vec<Vec<u64>>>,
}

fn window_composition(
    keys: &[(bool, usize)],
    stamp: &mut [usize],
    generation: usize,
    p: usize,
    t: usize,
) -> (u64, u64) {
    let (mut temps, mut inputs) = (0, 0);
    for &(is_temp, k) in &keys[p..=t] {
        if stamp[k] != generation {
            stamp[k] = generation;
            if is_temp {
                temps += 1;
            } else {
                inputs += 1;
            }
        }
    }
    (temps, inputs)
}

/// Classifies every reuse of `rmm_trace(n)`. With `components` the window of
/// each input reuse is rescanned, which is quadratic; keep `n` small.
pub fn observe(n: usize, components: bool) -> Result<Observations, ModelError> {
    let (trace, origins) =
        rmm_trace_annotated(n, TraceSemantics::default()).map_err(|_| ModelError::NotPowerOfTwo(n))?;
    Ok(classify(&trace, &origins, n, components))
}

fn classify(trace: &MemoryTrace, origins: &[crate::kernels::TempOrigin], n: usize, components: bool) -> Observations {
    let distances = reuse_sequence(trace);
    let ev = &trace.events;
    let mut obs = Observations { n, ..Default::default() };

    let mut dense = HashMap::new();
    let keys: Vec<(bool, usize)> = if components {
        ev.iter()
            .map(|e| {
                let next = dense.len();
                (e.region() == Region::Temporary, *dense.entry(*e).or_insert(next))
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut stamp = vec![0usize; dense.len()];
    let mut last = HashMap::new();

    let mut block_of: HashMap<(usize, u64), usize> = HashMap::new();
    let mut block_count: BTreeMap<usize, usize> = BTreeMap::new();

    for (t, (&e, &dist)) in ev.iter().zip(&distances).enumerate() {
        let prev = last.insert(e, t);
        let Some(distance) = dist else { continue };
        let mut o = Observation { distance, temps: None, inputs: None };
        if components {
            let (tc, ic) = window_composition(&keys, &mut stamp, t + 1, prev.expect("reuse has a previous access"), t);
            o.temps = Some(tc);
            o.inputs = Some(ic);
        }
        match e.region() {
            Region::Temporary => {
                let origin = origins[e.index() as usize];
                let which = match origin.role {
                    GroupRole::First => Which::First,
                    GroupRole::Second => Which::Second,
                    GroupRole::Root => continue,
                };
                let l = origin.level;
                obs.dt.entry((l, which, origin.row, origin.col)).or_default().insert(o);
                let block_start = e.index() - (origin.row * l + origin.col) as u64;
                let next = *block_count.get(&l).unwrap_or(&0);
                let b = *block_of.entry((l, block_start)).or_insert_with(|| {
                    block_count.insert(l, next + 1);
                    next
                });
                let grids = obs.blocks.entry(l).or_default();
                if grids.len() <= b {
                    grids.resize(b + 1, vec![0; l * l]);
                }
                grids[b][origin.row * l + origin.col] = distance;
            }
            Region::InputA => {
                let i = e.index() as usize / n;
                let k = e.index() as usize % n;
                let j = ev[t + 1].index() as usize % n;
                let l = 1usize << (j - 1).trailing_ones();
                obs.f.entry((l, i % l + 1, k % (2 * l) + 1)).or_default().insert(o);
            }
            Region::InputB => {
                let k = e.index() as usize / n;
                let j = e.index() as usize % n;
                let i = ev[t - 1].index() as usize / n;
                let l = 1usize << (i - 1).trailing_ones();
                obs.g.entry((l, k % (2 * l) + 1, j % (2 * l) + 1)).or_default().insert(o);
            }
            Region::Output => {}
        }
    }
    obs
}

impl Observations {
    /// True when every key saw a single observation.
    pub fn is_consistent(&self) -> bool {
        self.dt.values().chain(self.f.values()).chain(self.g.values()).all(|s| s.len() == 1)
    }
}
