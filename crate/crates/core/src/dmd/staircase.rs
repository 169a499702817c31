//! Hierarchy-shaped costs loaded from a list of `{capacity, latency}` levels.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CostModel, DmdError};
use crate::numfmt::sig6;

/// A cache level holding `capacity` data at `latency` cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub capacity: u64,
    pub latency: f64,
}

impl Level {
    pub fn new(capacity: u64, latency: f64) -> Self {
        Level { capacity, latency }
    }
}

pub(super) fn check_levels(levels: &[Level]) -> Result<(), DmdError> {
    if levels.is_empty() {
        return Err(DmdError::EmptyStaircase);
    }
    for (i, w) in levels.windows(2).enumerate() {
        if w[1].capacity <= w[0].capacity {
            return Err(DmdError::NonIncreasing(i + 1));
        }
    }
    Ok(())
}

/// Parses a JSON array of levels.
pub fn staircase_from_config(json: &str) -> Result<CostModel, DmdError> {
    let levels: Vec<Level> = serde_json::from_str(json).map_err(|e| DmdError::Config(e.to_string()))?;
    check_levels(&levels)?;
    Ok(CostModel::Staircase { levels })
}

pub fn load_staircase(path: &Path) -> Result<CostModel, DmdError> {
    let text = std::fs::read_to_string(path).map_err(|e| DmdError::Config(format!("{}: {e}", path.display())))?;
    staircase_from_config(&text)
}

/// `(position, cost)` for positions `1..=max_pos`.
pub fn latency_curve(cost: &CostModel, max_pos: u64) -> Vec<(u64, f64)> {
    (1..=max_pos).map(|d| (d, cost.cost(d))).collect()
}

/// The least-squares `c` in `cost(d) ~ c sqrt(d)` over `1..=max_pos`, and how
/// far the curve strays from it either way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqrtFit {
    pub scale: f64,
    /// `max cost(d) / (c sqrt d)`.
    pub max_over: f64,
    /// `max c sqrt(d) / cost(d)`.
    pub max_under: f64,
}

pub fn fit_sqrt_scale(cost: &CostModel, max_pos: u64) -> SqrtFit {
    let (mut num, mut den) = (0.0, 0.0);
    for d in 1..=max_pos {
        num += cost.cost(d) * (d as f64).sqrt();
        den += d as f64;
    }
    let scale = num / den;
    let (mut max_over, mut max_under) = (0.0f64, 0.0f64);
    for d in 1..=max_pos {
        let s = scale * (d as f64).sqrt();
        let v = cost.cost(d);
        max_over = max_over.max(v / s);
        max_under = max_under.max(s / v);
    }
    SqrtFit { scale, max_over, max_under }
}

/// CSV `position,staircase,scaled_sqrt` on a geometric grid of positions.
pub fn plot_csv(cost: &CostModel, max_pos: u64) -> String {
    let fit = fit_sqrt_scale(cost, max_pos);
    let mut s = String::from("position,staircase,scaled_sqrt\n");
    let mut positions = Vec::new();
    let mut p = 1.0f64;
    while (p as u64) <= max_pos {
        positions.push(p as u64);
        p *= 1.1;
    }
    positions.push(max_pos);
    positions.dedup();
    for d in positions {
        let _ = writeln!(s, "{d},{},{}", sig6(cost.cost(d)), sig6(fit.scale * (d as f64).sqrt()));
    }
    s
}

/// A gnuplot script drawing the CSV written by [`plot_csv`].
pub fn gnuplot_script(csv_name: &str, png_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output '{png_name}'\n\
         set logscale xy\n\
         set xlabel 'LRU stack position'\n\
         set ylabel 'cost'\n\
         set key left top\n\
         plot '{csv_name}' every ::1 using 1:2 with steps title 'staircase', \\\n     \
         '' every ::1 using 1:3 with lines title 'c*sqrt(d)'\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = r#"[{"capacity": 4096, "latency": 4}, {"capacity": 65536, "latency": 14},
        {"capacity": 2097152, "latency": 46}, {"capacity": 1099511627776, "latency": 250}]"#;

    #[test]
    fn parses_and_validates() {
        let c = staircase_from_config(CFG).unwrap();
        assert_eq!(c.cost(1), 4.0);
        assert_eq!(c.cost(4097), 14.0);
        assert!(matches!(staircase_from_config("[]"), Err(DmdError::EmptyStaircase)));
        let bad = r#"[{"capacity": 8, "latency": 1}, {"capacity": 8, "latency": 2}]"#;
        assert!(matches!(staircase_from_config(bad), Err(DmdError::NonIncreasing(1))));
        assert!(matches!(staircase_from_config("{"), Err(DmdError::Config(_))));
    }

    #[test]
    fn curve_and_plot() {
        let c = staircase_from_config(CFG).unwrap();
        let curve = latency_curve(&c, 10);
        assert_eq!(curve.len(), 10);
        assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
        let fit = fit_sqrt_scale(&c, 1 << 16);
        assert!(fit.scale > 0.0 && fit.max_over >= 1.0 && fit.max_under >= 1.0);
        let csv = plot_csv(&c, 1 << 16);
        assert!(csv.starts_with("position,staircase,scaled_sqrt\n1,4,"));
        assert!(csv.trim_end().lines().last().unwrap().starts_with("65536,"));
        assert!(gnuplot_script("a.csv", "a.png").contains("'a.csv'"));
    }
}
