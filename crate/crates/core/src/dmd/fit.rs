use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{dmd, tile_for, ColdPolicy, CostModel, DmdError};
use crate::kernels::{KernelConfig, KernelKind};
use crate::numfmt::sig6;
use crate::stackdist::analyze_kernel;

/// `value ~ coefficient * n^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub samples: Vec<(usize, f64)>,
    pub exponent: f64,
    pub coefficient: f64,
    /// Largest relative deviation of a sample from the fitted curve.
    pub residual: f64,
}

impl ExponentFit {
    pub fn predict(&self, n: usize) -> f64 {
        self.coefficient * (n as f64).powf(self.exponent)
    }
}

/// Ordinary least squares on `(ln n, ln value)`. Needs two distinct sizes.
pub fn least_squares_loglog(samples: &[(usize, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(n, v)| ((n as f64).ln(), v.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, (my - slope * mx).exp()))
}

/// Fits a power law. Requires at least four distinct sizes whose range covers
/// a factor of eight.
pub fn fit_exponent(samples: &[(usize, f64)]) -> Result<ExponentFit, DmdError> {
    let mut sizes: Vec<usize> = samples.iter().map(|s| s.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let spans = match (sizes.first(), sizes.last()) {
        (Some(&lo), Some(&hi)) => lo > 0 && hi >= 8 * lo,
        _ => false,
    };
    if sizes.len() < 4 || !spans || samples.iter().any(|s| s.1.is_nan() || s.1 <= 0.0) {
        return Err(DmdError::TooFewSamples(sizes));
    }
    let (exponent, coefficient) = least_squares_loglog(samples).ok_or(DmdError::TooFewSamples(sizes))?;
    let residual =
        samples.iter().map(|&(n, v)| (coefficient * (n as f64).powf(exponent) - v).abs() / v).fold(0.0, f64::max);
    Ok(ExponentFit { samples: samples.to_vec(), exponent, coefficient, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kernel: KernelKind,
    pub n: usize,
    pub dmd: f64,
    pub exponent_fit_so_far: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kernel,n,dmd,exponent_fit_so_far\n");
        for r in &self.rows {
            let fit = r.exponent_fit_so_far.map(sig6).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", r.kernel, r.n, sig6(r.dmd), fit);
        }
        s
    }

    pub fn samples(&self, kernel: KernelKind) -> Vec<(usize, f64)> {
        self.rows.iter().filter(|r| r.kernel == kernel).map(|r| (r.n, r.dmd)).collect()
    }

    pub fn fit(&self, kernel: KernelKind) -> Result<ExponentFit, DmdError> {
        fit_exponent(&self.samples(kernel))
    }
}

/// Measures each kernel at each size, in order. Tiled kernels use `tile` or
/// the default edge for the size.
pub fn sweep(
    kernels: &[KernelKind],
    sizes: &[usize],
    tile: Option<usize>,
    cost: &CostModel,
    policy: ColdPolicy,
    mut progress: impl FnMut(&SweepRow),
) -> Result<SweepTable, DmdError> {
    let mut table = SweepTable::default();
    for &kernel in kernels {
        let mut samples = Vec::new();
        for &n in sizes {
            let mut cfg = KernelConfig::new(kernel, n);
            if kernel == KernelKind::Tiled {
                cfg.tile = Some(tile.unwrap_or_else(|| tile_for(n)));
            }
            let dist = analyze_kernel(&cfg)?.distribution();
            let value = dmd(&dist, cost, policy)?;
            samples.push((n, value));
            let row =
                SweepRow { kernel, n, dmd: value, exponent_fit_so_far: least_squares_loglog(&samples).map(|f| f.0) };
            progress(&row);
            table.rows.push(row);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let s: Vec<_> = [4usize, 8, 16, 32].iter().map(|&n| (n, 3.0 * (n as f64).powf(2.5))).collect();
        let f = fit_exponent(&s).unwrap();
        assert!((f.exponent - 2.5).abs() < 1e-9);
        assert!((f.coefficient - 3.0).abs() < 1e-9);
        assert!(f.residual < 1e-9);
    }

    #[test]
    fn rejects_narrow_samples() {
        let s: Vec<_> = [4usize, 8, 16].iter().map(|&n| (n, n as f64)).collect();
        assert!(fit_exponent(&s).is_err());
        let s: Vec<_> = [4usize, 5, 6, 7].iter().map(|&n| (n, n as f64)).collect();
        assert!(fit_exponent(&s).is_err());
    }

    #[test]
    fn sweep_csv() {
        let t =
            sweep(&[KernelKind::Naive], &[2, 4], None, &CostModel::GeometricSqrt, ColdPolicy::Exclude, |_| {}).unwrap();
        let csv = t.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "kernel,n,dmd,exponent_fit_so_far");
        assert!(lines[1].starts_with("naive,2,") && lines[1].ends_with(','));
        assert_eq!(lines.len(), 3);
    }
}
