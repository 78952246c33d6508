//! Boundary sweep tables, limit extrapolation and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PlanarDomain;
use crate::szego::{GradingOptions, SzegoSystem};

/// Number of trailing rows used by the limit fit.
pub const EXTRAPOLATION_POINTS: usize = 4;
pub const EXTRAPOLATION_METHOD: &str = "least-squares fit value = L + C*delta on the last 4 rows";

/// `δ_j = delta0 · 2^{−j}` for `j = 0..count`.
pub fn geometric_deltas(delta0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| delta0 * 0.5f64.powi(j as i32)).collect()
}

/// Default depths `0.1 · 2^{−j}`, `j = 0..=8`.
pub fn default_deltas() -> Vec<f64> {
    geometric_deltas(0.1, 9)
}

pub(crate) fn validate_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::Config("at least one depth is required".into()));
    }
    if deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::Config("depths must be positive and finite".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("depths must be strictly decreasing".into()));
    }
    Ok(())
}

/// Least-squares line `y = L + C x` through the last
/// [`EXTRAPOLATION_POINTS`] samples; returns `(L, C)`.
pub fn linear_limit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let k = x.len().min(EXTRAPOLATION_POINTS);
    let (x, y) = (&x[x.len() - k..], &y[y.len() - k..]);
    if k == 1 {
        return (y[0], 0.0);
    }
    let n = k as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - c * mx, c)
}

/// Rows of reals with an optional extrapolated final row and a metadata block.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub extrapolated: Option<Vec<f64>>,
    pub metadata: Map<String, Value>,
}

impl SweepTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            extrapolated: None,
            metadata: Map::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Extrapolates every column except `x_column` to `x → 0`.
    pub fn extrapolate(&mut self, x_column: &str) {
        let xi = self
            .column_index(x_column)
            .expect("unknown abscissa column");
        let x: Vec<f64> = self.rows.iter().map(|r| r[xi]).collect();
        let row = (0..self.columns.len())
            .map(|i| {
                if i == xi {
                    0.0
                } else {
                    let y: Vec<f64> = self.rows.iter().map(|r| r[i]).collect();
                    linear_limit(&x, &y).0
                }
            })
            .collect();
        self.extrapolated = Some(row);
        self.set_meta("extrapolation", EXTRAPOLATION_METHOD);
    }

    /// Extrapolated value of a column.
    pub fn limit(&self, name: &str) -> Option<f64> {
        let i = self.column_index(name)?;
        self.extrapolated.as_ref().map(|r| r[i])
    }

    /// CSV text: a `#`-prefixed JSON metadata line, a header, data rows and,
    /// when present, the extrapolated row flagged in the last column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let meta = serde_json::to_string(&self.metadata).expect("metadata serializes");
        writeln!(out, "# {meta}").unwrap();
        writeln!(out, "{},extrapolated", self.columns.join(",")).unwrap();
        let mut write_row = |row: &[f64], flag: u8| {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.15e}")).collect();
            writeln!(out, "{},{flag}", cells.join(",")).unwrap();
        };
        for row in &self.rows {
            write_row(row, 0);
        }
        if let Some(row) = &self.extrapolated {
            write_row(row, 1);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// SHA-256 of the canonical JSON of the domain specification.
pub fn domain_hash(domain: &PlanarDomain) -> String {
    let json = serde_json::to_string(&domain.to_spec()).expect("domain spec serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// How sweeps discretize the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepSolver {
    /// Trapezoid rule with this many nodes per curve; probes inside the
    /// near-boundary band are errors carrying the minimal node count.
    Uniform { nodes_per_curve: usize },
    /// Gauss–Legendre panels graded toward the probe points.
    Graded(GradingOptions),
}

impl Default for SweepSolver {
    fn default() -> Self {
        SweepSolver::Graded(GradingOptions::default())
    }
}

impl SweepSolver {
    /// Builds a system able to evaluate at every target without degradation.
    pub fn build(&self, domain: &PlanarDomain, targets: &[Complex64]) -> Result<SzegoSystem> {
        match *self {
            SweepSolver::Uniform { nodes_per_curve } => {
                let sys = SzegoSystem::build(domain, nodes_per_curve)?;
                let mut worst: Option<(Complex64, usize)> = None;
                for &z in targets {
                    if sys.accuracy_at(z).is_degraded() {
                        let n = sys.min_nodes_for(z);
                        if worst.is_none_or(|(_, m)| n > m) {
                            worst = Some((z, n));
                        }
                    }
                }
                match worst {
                    Some((z, min_nodes)) => Err(Error::Degraded { z, min_nodes }),
                    None => Ok(sys),
                }
            }
            SweepSolver::Graded(opts) => SzegoSystem::build_graded(domain, targets, opts),
        }
    }

    pub fn describe(&self) -> Value {
        match self {
            SweepSolver::Uniform { nodes_per_curve } => {
                serde_json::json!({"kind": "uniform", "nodes_per_curve": nodes_per_curve})
            }
            SweepSolver::Graded(o) => serde_json::json!({
                "kind": "graded",
                "base_panels": o.base_panels,
                "panel_order": o.panel_order,
                "ratio": o.ratio,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deltas() {
        let d = default_deltas();
        assert_eq!(d.len(), 9);
        assert_eq!(d[0], 0.1);
        assert_eq!(d[8], 0.1 / 256.0);
        assert!(validate_deltas(&d).is_ok());
        assert!(validate_deltas(&[0.1, 0.2]).is_err());
        assert!(validate_deltas(&[]).is_err());
    }

    #[test]
    fn linear_limit_recovers_line() {
        let x = [0.4, 0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = x
            .iter()
            .map(|v| 3.0 - 2.0 * v + if *v > 0.3 { 100.0 } else { 0.0 })
            .collect();
        let (l, c) = linear_limit(&x, &y);
        assert!((l - 3.0).abs() < 1e-13 && (c + 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let mut t = SweepTable::new(["delta", "value"]);
        t.push_row(vec![0.1, 1.0]);
        t.push_row(vec![0.05, 0.5]);
        t.set_meta("domain", "disk");
        t.extrapolate("delta");
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# {"));
        assert_eq!(lines[1], "delta,value,extrapolated");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].ends_with(",1"));
        let first: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(first, 1.0);
        assert!(t.limit("value").unwrap().abs() < 1e-15);
    }

    #[test]
    fn domain_hash_is_stable() {
        let a = domain_hash(&PlanarDomain::disk());
        assert_eq!(a, domain_hash(&PlanarDomain::disk()));
        assert_eq!(a.len(), 64);
        assert_ne!(
            a,
            domain_hash(&PlanarDomain::circle(Complex64::new(0.0, 0.0), 2.0))
        );
    }

    #[test]
    fn uniform_solver_reports_min_nodes() {
        let z = Complex64::new(0.999, 0.0);
        match (SweepSolver::Uniform {
            nodes_per_curve: 64,
        })
        .build(&PlanarDomain::disk(), &[z])
        {
            Err(Error::Degraded { min_nodes, .. }) => assert!(min_nodes >= 16384),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn csv_numbers_round_trip(v in -1e6f64..1e6) {
            let mut t = SweepTable::new(["x"]);
            t.push_row(vec![v]);
            let csv = t.to_csv();
            let cell: f64 = csv.lines().nth(2).unwrap().split(',').next().unwrap().parse().unwrap();
            prop_assert!((cell - v).abs() <= 1e-14 * v.abs().max(1e-300));
        }
    }
}
