//! Data movement distance: every reuse pays the cost of the stack position
//! it is found at, `DMD = sum_d count(d) * cost(d)`.

mod bounds;
mod fit;
mod staircase;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelConfig, KernelError, KernelKind};
use crate::numfmt::sig6;
use crate::stackdist::{analyze_kernel, ReuseDistribution};

pub use bounds::{
    bounds_for, naive_dmd_formula, rmm_dmd_bounds, rmm_managed_dmd_upper, strassen_dmd_upper,
    strassen_managed_dmd_upper, tiled_dmd_bounds, Bounds, TABLE_EXPONENTS,
};
pub use fit::{fit_exponent, least_squares_loglog, sweep, ExponentFit, SweepRow, SweepTable};
pub use staircase::{
    fit_sqrt_scale, gnuplot_script, latency_curve, load_staircase, plot_csv, staircase_from_config, Level, SqrtFit,
};

#[derive(Debug, Error)]
pub enum DmdError {
    #[error("staircase cost model has no levels")]
    EmptyStaircase,
    #[error("staircase capacities must strictly increase (level {0})")]
    NonIncreasing(usize),
    #[error("exponent fit needs at least 4 distinct sizes spanning 3 octaves, got {0:?}")]
    TooFewSamples(Vec<usize>),
    #[error("{0} needs n >= 2")]
    TooSmall(&'static str),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("cost file: {0}")]
    Config(String),
}

/// Cost of finding a datum at a given LRU stack position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostModel {
    /// `sqrt(d)`.
    GeometricSqrt,
    /// Latency of the first level whose capacity reaches `d`; the last level
    /// beyond that.
    Staircase { levels: Vec<Level> },
}

impl CostModel {
    pub fn cost(&self, d: u64) -> f64 {
        match self {
            CostModel::GeometricSqrt => (d as f64).sqrt(),
            CostModel::Staircase { levels } => {
                levels.iter().find(|l| l.capacity >= d).or(levels.last()).map_or(f64::NAN, |l| l.latency)
            }
        }
    }

    pub fn validate(&self) -> Result<(), DmdError> {
        match self {
            CostModel::GeometricSqrt => Ok(()),
            CostModel::Staircase { levels } => staircase::check_levels(levels),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CostModel::GeometricSqrt => "sqrt",
            CostModel::Staircase { .. } => "staircase",
        }
    }
}

/// What first accesses cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColdPolicy {
    /// Only reuses are charged.
    #[default]
    Exclude,
    /// Each cold access pays the cost of the whole footprint.
    ChargeFootprint,
}

impl std::str::FromStr for ColdPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exclude" => Ok(ColdPolicy::Exclude),
            "charge" | "charge_footprint" => Ok(ColdPolicy::ChargeFootprint),
            _ => Err(format!("unknown cold policy '{s}' (exclude|charge)")),
        }
    }
}

/// DMD of a distribution. The footprint used by `ChargeFootprint` is the
/// number of distinct data, i.e. the cold count.
pub fn dmd(dist: &ReuseDistribution, cost: &CostModel, policy: ColdPolicy) -> Result<f64, DmdError> {
    cost.validate()?;
    let reuse: f64 = dist.counts.iter().map(|(&d, &c)| c as f64 * cost.cost(d)).sum();
    Ok(match policy {
        ColdPolicy::Exclude => reuse,
        ColdPolicy::ChargeFootprint => reuse + dist.cold as f64 * cost.cost(dist.cold),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmdReport {
    pub kernel: Option<KernelConfig>,
    pub n: usize,
    pub cost: CostModel,
    pub cold_policy: ColdPolicy,
    pub dmd_value: f64,
    /// Number of reuses `R`.
    pub reuse_count: u64,
    /// Distinct data `g`.
    pub footprint: u64,
    pub total_accesses: u64,
    pub max_distance: u64,
    pub bound_low: Option<f64>,
    pub bound_high: Option<f64>,
}

impl DmdReport {
    pub fn from_distribution(
        dist: &ReuseDistribution,
        footprint: u64,
        cost: CostModel,
        cold_policy: ColdPolicy,
    ) -> Result<Self, DmdError> {
        Ok(DmdReport {
            kernel: None,
            n: 0,
            dmd_value: dmd(dist, &cost, cold_policy)?,
            cost,
            cold_policy,
            reuse_count: dist.reuses(),
            footprint,
            total_accesses: dist.total,
            max_distance: dist.max_distance().unwrap_or(0),
            bound_low: None,
            bound_high: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for DmdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(k) = &self.kernel {
            write!(f, "kernel {} n={}", k.kind, k.n)?;
            if let Some(t) = k.tile {
                write!(f, " tile={t}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "cost {} cold={:?}", self.cost.name(), self.cold_policy)?;
        writeln!(f, "dmd {}", sig6(self.dmd_value))?;
        writeln!(f, "reuses {} footprint {} accesses {}", self.reuse_count, self.footprint, self.total_accesses)?;
        match (self.bound_low, self.bound_high) {
            (Some(lo), Some(hi)) => writeln!(f, "bounds [{}, {}]", sig6(lo), sig6(hi))?,
            (None, Some(hi)) => writeln!(f, "upper bound {}", sig6(hi))?,
            _ => {}
        }
        let t1 = theorem1_check(self);
        write!(f, "R <= DMD <= R*cost(g): {}", if t1.pass { "holds" } else { "VIOLATED" })
    }
}

/// Measures a kernel end to end.
pub fn report(cfg: &KernelConfig, cost: &CostModel, policy: ColdPolicy) -> Result<DmdReport, DmdError> {
    let analyzer = analyze_kernel(cfg)?;
    let dist = analyzer.distribution();
    let mut r = DmdReport::from_distribution(&dist, analyzer.footprint(), cost.clone(), policy)?;
    r.kernel = Some(*cfg);
    r.n = cfg.n;
    if let Some(b) = bounds_for(cfg.kind, cfg.n, cfg.tile) {
        r.bound_low = b.low;
        r.bound_high = Some(b.high);
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    pub low: f64,
    pub value: f64,
    pub high: f64,
    pub pass: bool,
}

/// `R * cost(1) <= DMD <= R * cost(g)`, plus the cold terms when they are
/// charged. With the square-root cost this is `R <= DMD <= R sqrt(g)`. A
/// distribution whose largest distance exceeds `g` fails outright.
pub fn theorem1_check(report: &DmdReport) -> Theorem1Check {
    let r = report.reuse_count as f64;
    let g = report.footprint;
    let cost = &report.cost;
    let cold = (report.total_accesses - report.reuse_count) as f64;
    let (low, high) = match report.cold_policy {
        ColdPolicy::Exclude => (r * cost.cost(1), r * cost.cost(g)),
        ColdPolicy::ChargeFootprint => ((r + cold) * cost.cost(1), (r + cold) * cost.cost(g)),
    };
    let value = report.dmd_value;
    // relative slack for float summation order only
    let eps = 1e-9 * high.abs().max(1.0);
    let pass = report.max_distance <= g && value >= low - eps && value <= high + eps;
    Theorem1Check { low, value, high, pass }
}

/// Kernels in the order of the comparison table.
pub fn comparison_kernels(n: usize) -> Vec<KernelConfig> {
    KernelKind::ALL
        .iter()
        .map(|&k| match k {
            KernelKind::Tiled => KernelConfig::tiled(n, tile_for(n)),
            _ => KernelConfig::new(k, n),
        })
        .collect()
}

/// Default tile edge: the power of two nearest `sqrt(n)`.
pub fn tile_for(n: usize) -> usize {
    1usize << n.trailing_zeros().div_ceil(2)
}
