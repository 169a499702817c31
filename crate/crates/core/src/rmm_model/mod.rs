//! Closed-form reuse-distance distribution of recursive matrix multiplication.
//!
//! The recursion tree of an `N x N` product has `N^3 / l^3` calls of size
//! `l`. Each call's result is read exactly once, by its parent's addition,
//! and the distances of those reads depend only on the level and on whether
//! the call is the first or second member of its addition group ([`DtMatrix`]).
//! Reuses of input elements are classified by the largest complete call
//! between use and reuse; their distances split into a temporary part and an
//! input part (`F` for A, `G` for B).
//!
//! Several symbols of the closed forms admit more than one reading; the
//! choice is recorded in a [`CalibrationTable`] and fixed by [`calibrate`]
//! against the stack-distance oracle.

mod calibrate;
mod observe;
mod table;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stackdist::ReuseDistribution;

pub use calibrate::{calibrate, calibrate_on, CalibrationReport, Candidate, CALIBRATION_SIZES};
pub use observe::{observe, Observation, Observations};
pub use table::{AnchorGrouping, BaseLevel, CalibrationTable, ExtentForm, GridDimension, RecursionForm, SumIndex};
pub use verify::{verify_against, verify_model, verify_with, Component, VerificationReport, WrongPosition};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("level {level} is outside 1..={max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("index ({i}, {j}) is outside the domain of {what} at level {level}")]
    IndexOutOfRange { what: &'static str, i: usize, j: usize, level: usize },
    #[error("{0} needs calibration")]
    NeedsCalibration(&'static str),
    #[error("{what} at level {level} evaluates to non-positive {value}")]
    NonPositive { what: &'static str, level: usize, value: i64 },
}

fn check_pow2(n: usize) -> Result<(), ModelError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(ModelError::NotPowerOfTwo(n));
    }
    Ok(())
}

fn log2(n: usize) -> u32 {
    n.trailing_zeros()
}

/// Temporaries introduced by an `N x N` call: `N^2 (2N - 1)`.
pub fn temp_count(n: usize) -> u64 {
    let n = n as u64;
    n * n * (2 * n).saturating_sub(1)
}

/// `sum_{i=0}^{log N} 8^{log N - i} (2^i)^2`, the per-level form of [`temp_count`].
pub fn temp_count_by_levels(n: usize) -> u64 {
    let ln = log2(n);
    (0..=ln).map(|i| 8u64.pow(ln - i) * 4u64.pow(i)).sum()
}

/// Number of `x x x` calls in an `n x n` product.
pub fn node_count(n: usize, x: usize) -> Result<u64, ModelError> {
    check_pow2(n)?;
    check_pow2(x)?;
    if x > n {
        return Err(ModelError::LevelOutOfRange { level: x, max: n });
    }
    Ok(((n / x) as u64).pow(3))
}

/// Number of level-`m` reuses of one input element in an `n x n` product.
pub fn rc(n: usize, m: usize) -> Result<u64, ModelError> {
    check_pow2(n)?;
    check_pow2(m)?;
    if 2 * m > n {
        return Err(ModelError::LevelOutOfRange { level: m, max: n / 2 });
    }
    Ok((n / (2 * m)) as u64)
}

/// Position of a temporary's call inside its addition group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Which {
    First,
    Second,
}

/// Reuse distances of the `l x l` result of a first or second group member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtMatrix {
    pub level: usize,
    pub which: Which,
    /// Row-major `l x l`.
    pub entries: Vec<u64>,
}

impl DtMatrix {
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.entries[r * self.level + c]
    }
}

/// The closed-form model under one calibration table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RmmModel {
    pub table: CalibrationTable,
    /// Problem size; only read by the global grid-dimension reading.
    pub n: usize,
}

/// `compute_rmm_rdd` result plus how many closed-form values it evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRun {
    pub distribution: ReuseDistribution,
    pub evaluations: u64,
}

fn need<T: Copy>(x: Option<T>, what: &'static str) -> Result<T, ModelError> {
    x.ok_or(ModelError::NeedsCalibration(what))
}

fn bit_sum(x: usize, upto: u32) -> i64 {
    (0..=upto).filter(|&k| k < usize::BITS && (x >> k) & 1 == 1).map(|k| 4i64.pow(k)).sum()
}

fn t(n: usize) -> i64 {
    temp_count(n) as i64
}

impl RmmModel {
    pub fn new(table: CalibrationTable, n: usize) -> Self {
        RmmModel { table, n }
    }

    /// The oracle-matching model for an `n x n` product.
    pub fn resolved(n: usize) -> Self {
        RmmModel::new(CalibrationTable::resolved(), n)
    }

    fn extent(&self, l: usize) -> Result<i64, ModelError> {
        let l2 = (l * l) as i64;
        Ok(match need(self.table.extent, "extent D_l")? {
            ExtentForm::Temporaries => t(l),
            ExtentForm::TemporariesPlusOneInput => t(l) + l2,
            ExtentForm::TotalData => t(l) + 2 * l2,
            ExtentForm::InputsOnly => 2 * l2,
        })
    }

    /// Grid anchors `(d1, d2, d3, d4)` at level `l >= 2`.
    pub fn anchors(&self, l: usize) -> Result<[i64; 4], ModelError> {
        let d = self.extent(l)?;
        let h = (l / 2) as i64;
        let th = t(l / 2);
        let h2 = h * h;
        let d1 = match need(self.table.anchor, "d1 grouping")? {
            AnchorGrouping::CloseAtEnd => 2 * d - 2 * (th - 2 * (h2 - 1)),
            AnchorGrouping::DropInnerFactor => 2 * d - (2 * th - 2 * (h2 - 1)),
        };
        let d2 = 2 * d - (4 * th + 2 * h2 - 2 * (h - 1) - (2 * h2 - h));
        let d3 = d - (2 * th - (2 * h2 - 1));
        let d4 = d - 2 * h2 - (4 * th - 2 * h2 + 2) - (h2 - l as i64) + (h + 1);
        Ok([d1, d2, d3, d4])
    }

    /// `(phi, delta, gamma, omega)`: lower-half shifts of the two grids.
    pub fn shifts(&self, l: usize) -> Result<[i64; 4], ModelError> {
        let n = l as i64;
        let big = match need(self.table.grid_dimension, "DT2 dimension")? {
            GridDimension::Level => n,
            GridDimension::Global => self.n as i64,
        };
        Ok([n * n * n - n * n / 2, n * n * n, big * big * big - big * big, big * big * big - big * big / 2])
    }

    pub fn dt_matrix(&self, l: usize, which: Which) -> Result<DtMatrix, ModelError> {
        check_pow2(l)?;
        if l == 1 {
            // P is reread after Q's base case (P, A, B, Q); Q right after P.
            let v = match which {
                Which::First => 4,
                Which::Second => 2,
            };
            return Ok(DtMatrix { level: 1, which, entries: vec![v] });
        }
        let [d1, d2, d3, d4] = self.anchors(l)?;
        let [phi, delta, gamma, omega] = self.shifts(l)?;
        let big = match need(self.table.grid_dimension, "DT2 dimension")? {
            GridDimension::Level => l as i64,
            GridDimension::Global => self.n as i64,
        };
        let h = l / 2;
        let hi = h as i64;
        let mut entries = Vec::with_capacity(l * l);
        for r in 0..l {
            let (rr, lower) = ((r % h) as i64, r >= h);
            for c in 0..l {
                let v = match (which, c < h) {
                    (Which::First, true) => d1 - c as i64 - if lower { phi } else { 0 },
                    (Which::First, false) => {
                        d2 - hi * hi + hi + rr * hi - (c - h) as i64 - if lower { delta } else { 0 }
                    }
                    (Which::Second, true) => d3 + l as i64 * rr - if lower { gamma } else { 0 },
                    (Which::Second, false) => d4 + rr * (3 * big / 2) - if lower { omega } else { 0 },
                };
                if v <= 0 {
                    return Err(ModelError::NonPositive { what: "temporary grid entry", level: l, value: v });
                }
                entries.push(v as u64);
            }
        }
        Ok(DtMatrix { level: l, which, entries })
    }

    /// Distinct temporaries inside a level-`l` reuse of `A[i][j]`;
    /// `i` in `1..=l`, `j` in `1..=2l`.
    pub fn f_t(&self, i: usize, j: usize, l: usize) -> Result<u64, ModelError> {
        check_pow2(l)?;
        if !(1..=l).contains(&i) || !(1..=2 * l).contains(&j) {
            return Err(ModelError::IndexOutOfRange { what: "f_T", i, j, level: l });
        }
        let ln = log2(l);
        let sub = match need(self.table.sum_index, "f_T subtracted sum")? {
            SumIndex::OverK => (0..ln).map(|k| 2 * t(1 << k)).sum::<i64>(),
            SumIndex::RepeatedTop => ln as i64 * 2 * t(l / 2),
        };
        let coef = need(self.table.row_coefficient, "f_T row coefficient")? as i64;
        let l2 = (l * l) as i64;
        let v =
            t(l) + 2 * l2 + 8 * t(l / 2) - sub + bit_sum((j - 1) % (2 * l), ln + 1) + coef * bit_sum((i - 1) % l, ln);
        positive(v, "f_T", l)
    }

    fn f_prime(&self, i: usize, j: usize, n: usize) -> Result<i64, ModelError> {
        if n == 1 {
            return Ok(0);
        }
        if n == 2 {
            return Ok([[0, 1], [2, 1]][i - 1][j - 1]);
        }
        let form = need(self.table.recursion, "f' recursion")?;
        let (h, q) = (n / 2, n / 4);
        let s = (h * h) as i64;
        let rec = |i: usize, j: usize| -> Result<i64, ModelError> {
            match form {
                RecursionForm::SingleLeading => self.f_prime(i, j, h),
                RecursionForm::DoubleLeading | RecursionForm::SingleLeadingFullRecursion => {
                    Ok(4 * s + self.f_prime(i, j, h)?)
                }
            }
        };
        let lead = match form {
            RecursionForm::DoubleLeading => 4 * (n * n) as i64,
            _ => 0,
        };
        let left = j <= h;
        let v = match i {
            _ if i <= q && left => rec(i, j)?,
            _ if i <= q => s + rec(i, j - h)?,
            _ if i <= h && left => s,
            _ if i <= h => 2 * s,
            _ if i <= 3 * q && left => 2 * s,
            _ if i <= 3 * q => s,
            _ if left => s + rec(i - h, j)?,
            _ => rec(i - h, j - h)?,
        };
        Ok(lead + v)
    }

    /// Distinct A and B elements inside a level-`l` reuse of `A[i][j]`;
    /// `i, j` in `1..=l`.
    pub fn f_ab(&self, i: usize, j: usize, l: usize) -> Result<u64, ModelError> {
        check_pow2(l)?;
        if !(1..=l).contains(&i) || !(1..=l).contains(&j) {
            return Err(ModelError::IndexOutOfRange { what: "f_AB", i, j, level: l });
        }
        positive(4 * (l * l) as i64 + self.f_prime(i, j, l)?, "f_AB", l)
    }

    /// Distinct temporaries inside a level-`l` reuse of `B[i][j]`;
    /// `i` in `1..=2l`, `j` in `1..=l`.
    pub fn g_t(&self, i: usize, j: usize, l: usize) -> Result<u64, ModelError> {
        check_pow2(l)?;
        if !(1..=2 * l).contains(&i) || !(1..=l).contains(&j) {
            return Err(ModelError::IndexOutOfRange { what: "g_T", i, j, level: l });
        }
        let ln = log2(l);
        let sub: i64 = (0..ln).map(|k| 4 * t(1 << k)).sum();
        let v = 4 * t(l) + 2 * (l * l) as i64 - sub + bit_sum(i - 1, ln) + bit_sum(j - 1, ln);
        positive(v, "g_T", l)
    }

    fn g_prime(&self, i: usize, j: usize, n: usize) -> Result<i64, ModelError> {
        const BASE: [[i64; 2]; 2] = [[1, 1], [2, 0]];
        let base = need(self.table.g_base, "g' base level")?;
        match (base, n) {
            (BaseLevel::One, 1) => return Ok(BASE[i - 1][j - 1]),
            (BaseLevel::Two, 2) => return Ok(BASE[(i - 1) % 2][(j - 1) % 2]),
            (BaseLevel::Two, 1) => return Ok(0),
            _ => {}
        }
        let h = n / 2;
        let n2 = (n * n) as i64;
        let top = i <= n;
        let v = match j {
            _ if j <= h && top => self.g_prime(i, j, h)?,
            _ if j <= h => n2 + self.g_prime(i - n, j, h)?,
            _ if j <= n => {
                if top {
                    n2 / 2
                } else {
                    3 * n2 / 2
                }
            }
            _ if j <= 3 * h => {
                if top {
                    3 * n2 / 2
                } else {
                    n2 / 2
                }
            }
            _ if top => n2 + self.g_prime(i, j - n, h)?,
            _ => self.g_prime(i - n, j - n, h)?,
        };
        Ok(v)
    }

    /// Distinct A and B elements inside a level-`l` reuse of `B[i][j]`;
    /// `i, j` in `1..=2l`.
    pub fn g_ab(&self, i: usize, j: usize, l: usize) -> Result<u64, ModelError> {
        check_pow2(l)?;
        if !(1..=2 * l).contains(&i) || !(1..=2 * l).contains(&j) {
            return Err(ModelError::IndexOutOfRange { what: "g_AB", i, j, level: l });
        }
        positive(6 * (l * l) as i64 + self.g_prime(i, j, l)?, "g_AB", l)
    }

    /// Reuse distance of a level-`l` reuse of `A[i][j]`.
    #[allow(non_snake_case)]
    pub fn F(&self, i: usize, j: usize, l: usize) -> Result<u64, ModelError> {
        Ok(self.f_t(i, j, l)? + self.f_ab(i, ((j - 1) % l) + 1, l)?)
    }

    /// Reuse distance of a level-`l` reuse of `B[i][j]`.
    #[allow(non_snake_case)]
    pub fn G(&self, i: usize, j: usize, l: usize) -> Result<u64, ModelError> {
        Ok(self.g_t(i, ((j - 1) % l) + 1, l)? + self.g_ab(i, j, l)?)
    }

    /// Levels that carry reuses: `1, 2, ..., n/2`. The root result is never
    /// read again, so its level has no temporary reuse, and no input element
    /// is reused across a complete `n x n` call.
    pub fn levels(n: usize) -> impl Iterator<Item = usize> {
        std::iter::successors(Some(1usize), |l| Some(l * 2)).take_while(move |&l| 2 * l <= n)
    }

    /// Evaluates the whole distribution without generating a trace.
    pub fn run(&self, n: usize) -> Result<ModelRun, ModelError> {
        check_pow2(n)?;
        let n3 = (n as u64).pow(3);
        let mut dist = ReuseDistribution::new();
        let mut evaluations = 0u64;
        for l in Self::levels(n) {
            let l3 = (l as u64).pow(3);
            for which in [Which::First, Which::Second] {
                for &v in &self.dt_matrix(l, which)?.entries {
                    dist.add(v, n3 / (2 * l3));
                    evaluations += 1;
                }
            }
            for i in 1..=l {
                for j in 1..=2 * l {
                    dist.add(self.F(i, j, l)?, n3 / (4 * l3));
                    evaluations += 1;
                }
            }
            for i in 1..=2 * l {
                for j in 1..=2 * l {
                    dist.add(self.G(i, j, l)?, n3 / (8 * l3));
                    evaluations += 1;
                }
            }
        }
        // first touch of every input element and every temporary
        dist.add_cold(2 * (n as u64).pow(2) + temp_count(n));
        Ok(ModelRun { distribution: dist, evaluations })
    }
}

fn positive(v: i64, what: &'static str, level: usize) -> Result<u64, ModelError> {
    if v <= 0 {
        return Err(ModelError::NonPositive { what, level, value: v });
    }
    Ok(v as u64)
}

/// Model distribution of an `n x n` recursive product under the resolved table.
pub fn compute_rmm_rdd(n: usize) -> Result<ReuseDistribution, ModelError> {
    Ok(RmmModel::resolved(n).run(n)?.distribution)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RmmModel {
        RmmModel::resolved(8)
    }

    #[test]
    fn counts() {
        assert_eq!([temp_count(1), temp_count(2), temp_count(4)], [1, 12, 112]);
        for n in [1usize, 2, 4, 8, 16, 256] {
            assert_eq!(temp_count(n), temp_count_by_levels(n));
        }
        assert_eq!(node_count(8, 8), Ok(1));
        assert_eq!(node_count(8, 2), Ok(64));
        assert_eq!(node_count(4, 1), Ok(64));
        assert!(node_count(4, 8).is_err());
        assert_eq!([rc(4, 1), rc(4, 2), rc(8, 2)], [Ok(2), Ok(1), Ok(2)]);
        assert!(rc(4, 4).is_err());
    }

    #[test]
    fn base_grids() {
        let m = model();
        let fp: Vec<i64> = [(1, 1), (1, 2), (2, 1), (2, 2)].iter().map(|&(i, j)| m.f_prime(i, j, 2).unwrap()).collect();
        assert_eq!(fp, [0, 1, 2, 1]);
        assert_eq!(m.g_prime(2, 2, 1), Ok(0));
        assert_eq!(m.g_prime(2, 1, 1), Ok(2));
    }

    #[test]
    fn uncalibrated_fails_loudly() {
        let m = RmmModel::new(CalibrationTable::uncalibrated(), 8);
        assert_eq!(m.dt_matrix(4, Which::First), Err(ModelError::NeedsCalibration("extent D_l")));
        assert_eq!(m.f_t(1, 1, 2), Err(ModelError::NeedsCalibration("f_T subtracted sum")));
        assert!(m.run(8).is_err());
        // level 1 needs none of the ambiguous symbols
        assert_eq!(m.dt_matrix(1, Which::First).unwrap().entries, vec![4]);
    }

    #[test]
    fn component_bounds() {
        let m = model();
        for l in [1usize, 2, 4, 8, 16] {
            for i in 1..=l {
                for j in 1..=2 * l {
                    assert!(m.f_t(i, j, l).unwrap() >= temp_count(l));
                    assert!(m.F(i, j, l).unwrap() == m.f_t(i, j, l).unwrap() + m.f_ab(i, (j - 1) % l + 1, l).unwrap());
                }
                for j in 1..=l {
                    assert!(m.f_ab(i, j, l).unwrap() <= 8 * (l * l) as u64);
                }
            }
            for i in 1..=2 * l {
                for j in 1..=2 * l {
                    assert!(
                        m.g_t(i, (j - 1) % l + 1, l).unwrap()
                            >= 4 * temp_count(l) - (0..log2(l)).map(|k| 4 * temp_count(1 << k)).sum::<u64>()
                    );
                    assert!(m.g_ab(i, j, l).unwrap() <= 8 * (l * l) as u64);
                }
            }
        }
    }

    #[test]
    fn mass_matches_trace_length() {
        for n in [1usize, 2, 4, 8, 64, 1024] {
            let run = model().run(n).unwrap();
            let n = n as u64;
            assert_eq!(run.distribution.total, 6 * n.pow(3) - 3 * n * n);
            run.distribution.check().unwrap();
        }
    }

    #[test]
    fn evaluation_count_is_quadratic_times_log() {
        for n in [16usize, 64, 256] {
            let e = model().run(n).unwrap().evaluations;
            // sum over levels of 8 l^2 with l <= n/2
            assert!(e <= 3 * (n * n) as u64, "n={n} e={e}");
        }
    }

    #[test]
    fn index_domains_are_enforced() {
        let m = model();
        assert!(m.F(3, 1, 2).is_err());
        assert!(m.F(1, 5, 2).is_err());
        assert!(m.G(5, 1, 2).is_err());
        assert!(m.f_ab(1, 3, 2).is_err());
        assert_eq!(m.dt_matrix(3, Which::First), Err(ModelError::NotPowerOfTwo(3)));
    }

    #[test]
    fn root_grid_is_bounded_by_parent_footprint() {
        let m = model();
        for l in [2usize, 4, 8] {
            let bound = temp_count(2 * l) + 2 * (4 * l * l) as u64;
            for which in [Which::First, Which::Second] {
                assert!(m.dt_matrix(l, which).unwrap().entries.iter().all(|&v| v <= bound));
            }
        }
    }
}
