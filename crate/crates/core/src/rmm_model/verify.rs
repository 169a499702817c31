use std::fmt;

use serde::{Deserialize, Serialize};

use super::observe::observe;
use super::{ModelError, RmmModel, Which};
use crate::dmd::{dmd, ColdPolicy, CostModel};
use crate::kernels::{KernelConfig, KernelKind, MemoryTrace};
use crate::numfmt::sig6;
use crate::stackdist::{analyze_kernel, reuse_histogram, ReuseDistribution};

/// Largest size for which a divergence is traced back to tree positions.
const DIAGNOSE_UP_TO: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Dt(Which),
    F,
    G,
}

/// A tree position whose predicted distance disagrees with the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrongPosition {
    pub component: Component,
    pub level: usize,
    pub i: usize,
    pub j: usize,
    pub predicted: Option<u64>,
    pub observed: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub n: usize,
    pub equal: bool,
    pub model_total: u64,
    pub oracle_total: u64,
    pub model_dmd: f64,
    pub oracle_dmd: f64,
    /// Lowest distance whose multiplicities differ: `(distance, model, oracle)`.
    pub first_divergence: Option<(u64, u64, u64)>,
    pub wrong_positions: Vec<WrongPosition>,
}

impl VerificationReport {
    fn build(n: usize, model: &ReuseDistribution, oracle: &ReuseDistribution) -> Self {
        let cost = CostModel::GeometricSqrt;
        let first_divergence = model.first_difference(oracle);
        VerificationReport {
            n,
            equal: model == oracle,
            model_total: model.total,
            oracle_total: oracle.total,
            model_dmd: dmd(model, &cost, ColdPolicy::Exclude).unwrap_or(f64::NAN),
            oracle_dmd: dmd(oracle, &cost, ColdPolicy::Exclude).unwrap_or(f64::NAN),
            first_divergence,
            wrong_positions: Vec::new(),
        }
    }

    pub fn dmd_relative_error(&self) -> f64 {
        (self.model_dmd - self.oracle_dmd).abs() / self.oracle_dmd
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.equal { "equal" } else { "DIVERGENT" };
        writeln!(f, "n={} {verdict}", self.n)?;
        writeln!(f, "accesses model={} trace={}", self.model_total, self.oracle_total)?;
        writeln!(f, "dmd model={} trace={}", sig6(self.model_dmd), sig6(self.oracle_dmd))?;
        if let Some((d, m, o)) = self.first_divergence {
            writeln!(f, "first divergence at distance {d}: model {m}, trace {o}")?;
        }
        for w in self.wrong_positions.iter().take(20) {
            let predicted = w.predicted.map_or("error".to_string(), |p| p.to_string());
            writeln!(
                f,
                "  {:?} level={} ({}, {}) predicted {predicted} observed {:?}",
                w.component, w.level, w.i, w.j, w.observed
            )?;
        }
        if self.wrong_positions.len() > 20 {
            writeln!(f, "  ... {} more", self.wrong_positions.len() - 20)?;
        }
        Ok(())
    }
}

fn diagnose(model: &RmmModel, n: usize) -> Result<Vec<WrongPosition>, ModelError> {
    let obs = observe(n, false)?;
    let mut wrong = Vec::new();
    let mut push = |component,
                    level,
                    i,
                    j,
                    predicted: Result<u64, ModelError>,
                    seen: &std::collections::BTreeSet<super::Observation>| {
        let observed: Vec<u64> = seen.iter().map(|o| o.distance).collect();
        let predicted = predicted.ok();
        if observed.len() != 1 || predicted != Some(observed[0]) {
            wrong.push(WrongPosition { component, level, i, j, predicted, observed });
        }
    };
    for (&(l, which, r, c), seen) in &obs.dt {
        push(Component::Dt(which), l, r, c, model.dt_matrix(l, which).map(|g| g.get(r, c)), seen);
    }
    for (&(l, i, j), seen) in &obs.f {
        push(Component::F, l, i, j, model.F(i, j, l), seen);
    }
    for (&(l, i, j), seen) in &obs.g {
        push(Component::G, l, i, j, model.G(i, j, l), seen);
    }
    Ok(wrong)
}

/// Compares a model against the stack-distance oracle on `rmm_trace(n)`.
pub fn verify_with(model: &RmmModel, n: usize) -> Result<VerificationReport, ModelError> {
    let predicted = model.run(n)?.distribution;
    let oracle = analyze_kernel(&KernelConfig::new(KernelKind::Rmm, n))
        .map_err(|_| ModelError::NotPowerOfTwo(n))?
        .distribution();
    let mut report = VerificationReport::build(n, &predicted, &oracle);
    if !report.equal && n <= DIAGNOSE_UP_TO {
        report.wrong_positions = diagnose(model, n)?;
    }
    Ok(report)
}

/// Resolved model against the oracle.
pub fn verify_model(n: usize) -> Result<VerificationReport, ModelError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(ModelError::NotPowerOfTwo(n));
    }
    verify_with(&RmmModel::resolved(n), n)
}

/// Resolved model against an arbitrary trace, e.g. a managed variant.
pub fn verify_against(n: usize, trace: &MemoryTrace) -> Result<VerificationReport, ModelError> {
    let predicted = RmmModel::resolved(n).run(n)?.distribution;
    Ok(VerificationReport::build(n, &predicted, &reuse_histogram(trace)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{rmm_managed_trace, TraceSemantics};
    use crate::rmm_model::CalibrationTable;

    #[test]
    fn small_sizes_are_exact() {
        for n in [1usize, 2, 4, 8, 16] {
            let r = verify_model(n).unwrap();
            assert!(r.equal, "{r}");
        }
    }

    #[test]
    fn managed_trace_diverges() {
        let t = rmm_managed_trace(8, TraceSemantics::default()).unwrap();
        let r = verify_against(8, &t).unwrap();
        assert!(!r.equal);
        assert_eq!(r.model_total, r.oracle_total);
    }

    #[test]
    fn wrong_reading_is_localized() {
        let table = CalibrationTable { row_coefficient: Some(1), ..CalibrationTable::resolved() };
        let r = verify_with(&RmmModel::new(table, 8), 8).unwrap();
        assert!(!r.equal);
        assert!(r.first_divergence.is_some());
        assert!(!r.wrong_positions.is_empty());
        assert!(r.wrong_positions.iter().all(|w| w.component == Component::F));
        assert!(format!("{r}").contains("DIVERGENT"));
    }
}
