//! Choosing among readings by matching oracle observations.
//!
//! Each group of readings is scored on its own component: the temporary
//! grids, the temporary and input counts of A reuses, and the input counts
//! of B reuses. A group resolves when exactly one candidate reproduces every
//! observation.

use std::fmt;

use super::observe::{observe, Observations};
use super::{CalibrationTable, ModelError, RmmModel, Which};

/// Problem sizes calibration may look at. Larger sizes are held out.
pub const CALIBRATION_SIZES: [usize; 3] = [2, 4, 8];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub group: &'static str,
    pub reading: String,
    pub checked: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalibrationReport {
    pub sizes: Vec<usize>,
    pub table: CalibrationTable,
    pub candidates: Vec<Candidate>,
}

impl fmt::Display for CalibrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "calibration sizes {:?}", self.sizes)?;
        for c in &self.candidates {
            let mark = if c.mismatches == 0 { "match" } else { "reject" };
            writeln!(f, "  {:<6} {:<10} {} ({}/{} wrong)", mark, c.group, c.reading, c.mismatches, c.checked)?;
        }
        write!(f, "{}", self.table)
    }
}

fn score<F>(observations: &[Observations], table: CalibrationTable, mut check: F) -> (usize, usize)
where
    F: FnMut(&RmmModel, &Observations) -> (usize, usize),
{
    observations.iter().fold((0, 0), |(c, m), o| {
        let (dc, dm) = check(&RmmModel::new(table, o.n), o);
        (c + dc, m + dm)
    })
}

fn dt_mismatches(m: &RmmModel, o: &Observations) -> (usize, usize) {
    let mut grids = std::collections::HashMap::new();
    let (mut checked, mut wrong) = (0, 0);
    for (&(l, which, r, c), seen) in &o.dt {
        if l < 2 {
            continue;
        }
        checked += 1;
        let grid = grids.entry((l, which)).or_insert_with(|| m.dt_matrix(l, which).ok());
        let ok = grid.as_ref().is_some_and(|g| seen.len() == 1 && seen.iter().all(|x| x.distance == g.get(r, c)));
        wrong += usize::from(!ok);
    }
    (checked, wrong)
}

fn matches(
    seen: &std::collections::BTreeSet<super::Observation>,
    pick: impl Fn(&super::Observation) -> Option<u64>,
    value: Result<u64, ModelError>,
) -> bool {
    value.is_ok_and(|v| seen.iter().all(|o| pick(o) == Some(v)))
}

/// Calibrates on [`CALIBRATION_SIZES`].
pub fn calibrate() -> Result<CalibrationReport, ModelError> {
    calibrate_on(&CALIBRATION_SIZES)
}

pub fn calibrate_on(sizes: &[usize]) -> Result<CalibrationReport, ModelError> {
    let observations = sizes.iter().map(|&n| observe(n, true)).collect::<Result<Vec<_>, _>>()?;
    let mut table = CalibrationTable::uncalibrated();
    let mut candidates = Vec::new();

    let mut pick = |group: &'static str,
                    options: Vec<(String, CalibrationTable)>,
                    check: &dyn Fn(&RmmModel, &Observations) -> (usize, usize)| {
        let mut winners = Vec::new();
        for (reading, t) in options {
            let (checked, mismatches) = score(&observations, t, check);
            if mismatches == 0 && checked > 0 {
                winners.push(t);
            }
            candidates.push(Candidate { group, reading, checked, mismatches });
        }
        (winners.len() == 1).then(|| winners[0])
    };

    let mut grid_options = Vec::new();
    for extent in CalibrationTable::EXTENTS {
        for anchor in CalibrationTable::ANCHORS {
            for dim in CalibrationTable::DIMENSIONS {
                let t =
                    CalibrationTable { extent: Some(extent), anchor: Some(anchor), grid_dimension: Some(dim), ..table };
                grid_options.push((format!("D_l={extent:?} d1={anchor:?} dim={dim:?}"), t));
            }
        }
    }
    if let Some(w) = pick("DT", grid_options, &dt_mismatches) {
        table.extent = w.extent;
        table.anchor = w.anchor;
        table.grid_dimension = w.grid_dimension;
    }

    let mut ft_options = Vec::new();
    for sum in CalibrationTable::SUM_INDICES {
        for coef in CalibrationTable::ROW_COEFFICIENTS {
            let t = CalibrationTable { sum_index: Some(sum), row_coefficient: Some(coef), ..table };
            ft_options.push((format!("sum={sum:?} row_coefficient={coef}"), t));
        }
    }
    let ft_check = |m: &RmmModel, o: &Observations| {
        let wrong = o.f.iter().filter(|(&(l, i, j), seen)| !matches(seen, |x| x.temps, m.f_t(i, j, l))).count();
        (o.f.len(), wrong)
    };
    if let Some(w) = pick("f_T", ft_options, &ft_check) {
        table.sum_index = w.sum_index;
        table.row_coefficient = w.row_coefficient;
    }

    let fab_options = CalibrationTable::RECURSIONS
        .iter()
        .map(|&r| (format!("f'={r:?}"), CalibrationTable { recursion: Some(r), ..table }))
        .collect();
    let fab_check = |m: &RmmModel, o: &Observations| {
        let wrong =
            o.f.iter().filter(|(&(l, i, j), seen)| !matches(seen, |x| x.inputs, m.f_ab(i, (j - 1) % l + 1, l))).count();
        (o.f.len(), wrong)
    };
    if let Some(w) = pick("f_AB", fab_options, &fab_check) {
        table.recursion = w.recursion;
    }

    let gab_options = CalibrationTable::G_BASES
        .iter()
        .map(|&b| (format!("g' base={b:?}"), CalibrationTable { g_base: Some(b), ..table }))
        .collect();
    let gab_check = |m: &RmmModel, o: &Observations| {
        let wrong = o.g.iter().filter(|(&(l, i, j), seen)| !matches(seen, |x| x.inputs, m.g_ab(i, j, l))).count();
        (o.g.len(), wrong)
    };
    if let Some(w) = pick("g_AB", gab_options, &gab_check) {
        table.g_base = w.g_base;
    }

    // no alternative readings; scored for the record
    let gt_check = |m: &RmmModel, o: &Observations| {
        let wrong =
            o.g.iter().filter(|(&(l, i, j), seen)| !matches(seen, |x| x.temps, m.g_t(i, (j - 1) % l + 1, l))).count();
        (o.g.len(), wrong)
    };
    let level_one_check = |m: &RmmModel, o: &Observations| {
        let mut wrong = 0;
        let mut checked = 0;
        for which in [Which::First, Which::Second] {
            if let Some(seen) = o.dt.get(&(1, which, 0, 0)) {
                checked += 1;
                let v = m.dt_matrix(1, which).map(|g| g.entries[0]);
                wrong += usize::from(!matches(seen, |x| Some(x.distance), v));
            }
        }
        (checked, wrong)
    };
    pick("g_T", vec![("literal".into(), table)], &gt_check);
    pick("DT l=1", vec![("P: 4, Q: 2".into(), table)], &level_one_check);

    Ok(CalibrationReport { sizes: sizes.to_vec(), table, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_reaches_the_resolved_table() {
        let report = calibrate().unwrap();
        assert!(report.table.is_complete(), "{report}");
        assert_eq!(report.table, CalibrationTable::resolved(), "{report}");
        // each group has exactly one surviving reading
        for group in ["DT", "f_T", "f_AB", "g_AB", "g_T", "DT l=1"] {
            let n = report.candidates.iter().filter(|c| c.group == group && c.mismatches == 0).count();
            assert_eq!(n, 1, "{group}: {report}");
        }
    }
}
