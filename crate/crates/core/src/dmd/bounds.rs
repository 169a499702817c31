//! Closed-form DMD predictions under the square-root cost, cold misses
//! excluded.

use serde::{Deserialize, Serialize};

use super::DmdError;
use crate::kernels::KernelKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: Option<f64>,
    pub high: f64,
}

/// Asymptotic exponent of `n` per kernel; tiled assumes a tile edge near
/// `sqrt(n)`.
pub const TABLE_EXPONENTS: [(KernelKind, f64); 6] = [
    (KernelKind::Naive, 4.0),
    (KernelKind::Tiled, 3.5),
    (KernelKind::Rmm, 3.5),
    (KernelKind::RmmManaged, 10.0 / 3.0),
    (KernelKind::Strassen, 3.403677461028802),
    (KernelKind::StrassenManaged, 3.23),
];

/// Exact DMD of the naive ijk kernel.
pub fn naive_dmd_formula(n: usize) -> Result<f64, DmdError> {
    if n < 2 {
        return Err(DmdError::TooSmall("naive_dmd_formula"));
    }
    let n = n as f64;
    let n2 = n * n;
    let n3 = n2 * n;
    let sum: f64 = (1..n as u64).map(|i| 2.0 * n * (n2 + n + i as f64).sqrt()).sum();
    Ok(n3 * (2.0 * n).sqrt() + (n3 - 2.0 * n2 + n) * (n2 + 2.0 * n).sqrt() + sum + n * (n2 + n).sqrt())
}

/// `(low, high)` for an `n x n` product in `d x d` tiles.
pub fn tiled_dmd_bounds(n: usize, d: usize) -> (f64, f64) {
    let (n, d) = (n as f64, d as f64);
    let n3 = n * n * n;
    let n4 = n3 * n;
    (n4 / d + n3 * d, 2.0 * 3f64.sqrt() * n4 / d + 2f64.sqrt() * n3 * d)
}

pub fn rmm_dmd_bounds(n: usize) -> (f64, f64) {
    let s = (n as f64).powf(3.5);
    (12.82 * s, 13.46 * s)
}

pub fn rmm_managed_dmd_upper(n: usize) -> f64 {
    11.85 * (n as f64).powf(10.0 / 3.0)
}

pub fn strassen_dmd_upper(n: usize) -> f64 {
    6.51 * (n as f64).powf(2.0 + 7f64.log2() / 2.0)
}

pub fn strassen_managed_dmd_upper(n: usize) -> f64 {
    15.36 * (n as f64).powf(3.23)
}

/// Prediction for a kernel configuration, if one exists.
pub fn bounds_for(kind: KernelKind, n: usize, tile: Option<usize>) -> Option<Bounds> {
    match kind {
        KernelKind::Naive => naive_dmd_formula(n).ok().map(|v| Bounds { low: Some(v), high: v }),
        KernelKind::Tiled => tile.map(|d| {
            let (low, high) = tiled_dmd_bounds(n, d);
            Bounds { low: Some(low), high }
        }),
        KernelKind::Rmm => {
            let (low, high) = rmm_dmd_bounds(n);
            Some(Bounds { low: Some(low), high })
        }
        KernelKind::RmmManaged => Some(Bounds { low: None, high: rmm_managed_dmd_upper(n) }),
        KernelKind::Strassen => Some(Bounds { low: None, high: strassen_dmd_upper(n) }),
        KernelKind::StrassenManaged => Some(Bounds { low: None, high: strassen_managed_dmd_upper(n) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_n2() {
        let want = 8.0 * 2.0 + 2.0 * 8f64.sqrt() + 4.0 * 7f64.sqrt() + 2.0 * 6f64.sqrt();
        assert!((naive_dmd_formula(2).unwrap() - want).abs() < 1e-12);
        assert!(naive_dmd_formula(1).is_err());
    }

    #[test]
    fn pinned_values() {
        assert_eq!(tiled_dmd_bounds(64, 8).0, 4_194_304.0);
        let (lo, hi) = rmm_dmd_bounds(2);
        assert!((lo - 145.0).abs() < 0.1 && (hi - 152.3).abs() < 0.1);
        assert!((TABLE_EXPONENTS[4].1 - (2.0 + 7f64.log2() / 2.0)).abs() < 1e-12);
    }
}
