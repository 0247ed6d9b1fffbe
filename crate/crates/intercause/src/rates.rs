//! Identified per-cell outcome rates and the point-identified class masses.

use crate::error::{Error, Result};
use crate::latent::ExposureCell;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::path::Path;

/// Raw outcome counts per exposure cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// cases[cell.index()] = number of units with Y = 1.
    pub cases: [u64; 4],
    /// total[cell.index()] = number of units in the cell.
    pub totals: [u64; 4],
}

impl CellCounts {
    pub fn new(cases: [u64; 4], totals: [u64; 4]) -> Result<Self> {
        for cell in ExposureCell::all() {
            let i = cell.index();
            if totals[i] == 0 {
                return Err(Error::ZeroCellTotal {
                    z: cell.z,
                    m: cell.m,
                });
            }
            if cases[i] > totals[i] {
                return Err(Error::InvalidCounts(format!(
                    "cell {cell}: cases {} exceed total {}",
                    cases[i], totals[i]
                )));
            }
        }
        Ok(Self { cases, totals })
    }

    /// Read a 4-row CSV with header `z,m,cases,total`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut cases = [u64::MAX; 4];
        let mut totals = [0u64; 4];
        let mut seen = [false; 4];
        for record in rdr.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::InvalidCounts(format!(
                    "expected 4 columns z,m,cases,total, got {} columns",
                    record.len()
                )));
            }
            let parse = |field: &str, name: &str| -> Result<u64> {
                field
                    .parse::<u64>()
                    .map_err(|_| Error::InvalidCounts(format!("bad {name} value {field:?}")))
            };
            let z = parse(&record[0], "z")?;
            let m = parse(&record[1], "m")?;
            if z > 1 || m > 1 {
                return Err(Error::InvalidCounts(format!("z,m must be 0/1, got {z},{m}")));
            }
            let cell = ExposureCell::new(z as u8, m as u8);
            if seen[cell.index()] {
                return Err(Error::InvalidCounts(format!("duplicate row for cell {cell}")));
            }
            seen[cell.index()] = true;
            cases[cell.index()] = parse(&record[2], "cases")?;
            totals[cell.index()] = parse(&record[3], "total")?;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::InvalidCounts(
                "all four exposure cells must be present".into(),
            ));
        }
        Self::new(cases, totals)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }
}

/// The four identified outcome rates, one per exposure cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRates {
    delta: [f64; 4],
}

impl CellRates {
    pub fn new(delta: [f64; 4]) -> Result<Self> {
        for (i, &d) in delta.iter().enumerate() {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::InvalidCounts(format!(
                    "rate at cell index {i} is {d}, outside [0,1]"
                )));
            }
        }
        Ok(Self { delta })
    }

    pub fn get(&self, cell: ExposureCell) -> f64 {
        self.delta[cell.index()]
    }

    /// (delta_00, delta_01, delta_10, delta_11)
    pub fn as_tuple(&self) -> (f64, f64, f64, f64) {
        (self.delta[0], self.delta[1], self.delta[2], self.delta[3])
    }

    /// Probability mass of the evidence cell (z, m, y): the rate for y = 1,
    /// its complement for y = 0.
    pub fn evidence_mass(&self, z: u8, m: u8, y: u8) -> f64 {
        let d = self.get(ExposureCell::new(z, m));
        if y == 1 {
            d
        } else {
            1.0 - d
        }
    }
}

/// Per-cell empirical frequencies.
pub fn rates_from_counts(c: &CellCounts) -> CellRates {
    let mut delta = [0.0; 4];
    for i in 0..4 {
        delta[i] = c.cases[i] as f64 / c.totals[i] as f64;
    }
    CellRates { delta }
}

/// The two masses pinned down directly by the monotone composition table:
/// the never-affected class `1 - delta_11` and the always-affected class
/// `delta_00`.
pub fn identified_masses(d: &CellRates) -> (f64, f64) {
    let (d00, _, _, d11) = d.as_tuple();
    (1.0 - d11, d00)
}

/// Report of the observable monotonicity implications.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonotonicityReport {
    pub consistent: bool,
    /// Human-readable descriptions of the violated inequalities.
    pub violations: Vec<String>,
}

/// Check the two observable rate chains implied by monotone response.
///
/// Advisory only: downstream feasibility checks re-validate with their own
/// tolerances before committing to an estimate.
pub fn monotonicity_consistency(d: &CellRates) -> MonotonicityReport {
    let (d00, d01, d10, d11) = d.as_tuple();
    let mut violations = Vec::new();
    let chains: [(&str, f64, f64); 4] = [
        ("delta_00 <= delta_01", d00, d01),
        ("delta_01 <= delta_11", d01, d11),
        ("delta_00 <= delta_10", d00, d10),
        ("delta_10 <= delta_11", d10, d11),
    ];
    for (label, lo, hi) in chains {
        if lo > hi {
            violations.push(format!("{label} violated: {lo:.6} > {hi:.6}"));
        }
    }
    MonotonicityReport {
        consistent: violations.is_empty(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// The lung-cancer summary counts used throughout the test suite.
    pub fn asbestos_counts() -> CellCounts {
        CellCounts::new([6, 5, 118, 141], [5057, 749, 12383, 3130]).unwrap()
    }

    #[test]
    fn frequencies_from_summary_counts() {
        let d = rates_from_counts(&asbestos_counts());
        let (d00, d01, d10, d11) = d.as_tuple();
        assert_abs_diff_eq!(d00, 6.0 / 5057.0);
        assert_abs_diff_eq!(d01, 5.0 / 749.0);
        assert_abs_diff_eq!(d10, 118.0 / 12383.0);
        assert_abs_diff_eq!(d11, 141.0 / 3130.0);
        // Percent roundings match the published summary.
        assert_abs_diff_eq!(100.0 * d00, 0.12, epsilon = 0.005);
        assert_abs_diff_eq!(100.0 * d01, 0.67, epsilon = 0.005);
        assert_abs_diff_eq!(100.0 * d10, 0.95, epsilon = 0.005);
        assert_abs_diff_eq!(100.0 * d11, 4.51, epsilon = 0.01);
    }

    #[test]
    fn degenerate_counts() {
        let zero = CellCounts::new([0, 0, 0, 0], [10, 10, 10, 10]).unwrap();
        assert_eq!(rates_from_counts(&zero).as_tuple(), (0.0, 0.0, 0.0, 0.0));
        let full = CellCounts::new([10, 10, 10, 10], [10, 10, 10, 10]).unwrap();
        assert_eq!(rates_from_counts(&full).as_tuple(), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn scale_invariance() {
        let a = CellCounts::new([3, 7, 2, 9], [30, 70, 20, 90]).unwrap();
        let b = CellCounts::new([21, 49, 14, 63], [210, 490, 140, 630]).unwrap();
        assert_eq!(rates_from_counts(&a), rates_from_counts(&b));
    }

    #[test]
    fn identified_masses_from_asbestos_rates() {
        let d = rates_from_counts(&asbestos_counts());
        let (pi0000, pi1111) = identified_masses(&d);
        assert_abs_diff_eq!(100.0 * pi0000, 95.50, epsilon = 0.005);
        assert_abs_diff_eq!(100.0 * pi1111, 0.12, epsilon = 0.005);
    }

    #[test]
    fn identified_masses_extremes() {
        let d = CellRates::new([0.0, 0.3, 0.4, 1.0]).unwrap();
        assert_eq!(identified_masses(&d), (0.0, 0.0));
    }

    #[test]
    fn monotonicity_accepts_asbestos_rates() {
        let d = rates_from_counts(&asbestos_counts());
        assert!(monotonicity_consistency(&d).consistent);
    }

    #[test]
    fn monotonicity_flags_violation() {
        let d = CellRates::new([0.5, 0.2, 0.6, 0.7]).unwrap();
        let report = monotonicity_consistency(&d);
        assert!(!report.consistent);
        assert!(report.violations.iter().any(|v| v.contains("delta_00 <= delta_01")));
    }

    #[test]
    fn monotonicity_accepts_equal_rates() {
        let d = CellRates::new([0.3, 0.3, 0.3, 0.3]).unwrap();
        assert!(monotonicity_consistency(&d).consistent);
    }

    #[test]
    fn zero_total_rejected() {
        assert!(matches!(
            CellCounts::new([0, 0, 0, 0], [10, 0, 10, 10]),
            Err(Error::ZeroCellTotal { z: 0, m: 1 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let csv = "z,m,cases,total\n0,0,6,5057\n0,1,5,749\n1,0,118,12383\n1,1,141,3130\n";
        let c = CellCounts::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(c, asbestos_counts());
    }

    #[test]
    fn csv_missing_cell_rejected() {
        let csv = "z,m,cases,total\n0,0,6,5057\n0,1,5,749\n1,0,118,12383\n";
        assert!(CellCounts::from_csv_reader(csv.as_bytes()).is_err());
    }
}
