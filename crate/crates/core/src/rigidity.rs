//! Aumann–Carathéodory squeeze on the round annulus: `c/λ ≤ Ω ≤ 1`.
//!
//! `Ω` itself is a supremum over non-covering maps and is not computed; only
//! the bracketing pair is reported.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, PlanarDomain};
use crate::oracles::AnnulusSpec;
use crate::sweep::{domain_hash, validate_deltas, SweepSolver, SweepTable};
use crate::szego::SzegoSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RigidityBounds {
    pub z: [f64; 2],
    /// `c(z)/λ(z)`.
    pub lower: f64,
    pub upper: f64,
}

fn check_system(spec: AnnulusSpec, sys: &SzegoSystem) -> Result<()> {
    let want = PlanarDomain::from_spec(&DomainSpec::Annulus {
        r: spec.inner_radius(),
    })?;
    if domain_hash(&want) != domain_hash(sys.domain()) {
        return Err(Error::Config(
            "the solver was built on a different domain than the annulus".into(),
        ));
    }
    Ok(())
}

/// Squeeze bounds at `z`; the lower one is independent of any target domain.
pub fn omega_bounds(spec: AnnulusSpec, sys: &SzegoSystem, z: Complex64) -> Result<RigidityBounds> {
    check_system(spec, sys)?;
    let lambda = spec.hyperbolic(z)?;
    let c = sys.caratheodory(z)?;
    if c.accuracy.is_degraded() {
        return Err(Error::Degraded {
            z,
            min_nodes: sys.min_nodes_for(z),
        });
    }
    let lower = c.value / lambda;
    if !(lower > 0.0 && lower <= 1.0 + 1e-10) {
        return Err(Error::InvariantViolation(format!(
            "c/λ = {lower} at {z} is outside (0, 1]"
        )));
    }
    Ok(RigidityBounds {
        z: [z.re, z.im],
        lower,
        upper: 1.0,
    })
}

/// Rows `(δ, c/λ, 1)` at `z = 1 − δ`; the lower bound tends to 1.
pub fn rigidity_boundary_sweep(
    spec: AnnulusSpec,
    sys: &SzegoSystem,
    deltas: &[f64],
) -> Result<SweepTable> {
    validate_deltas(deltas)?;
    let rows = deltas
        .par_iter()
        .map(|&d| {
            let z = Complex64::new(1.0 - d, 0.0);
            if !spec.contains(z) {
                return Err(Error::domain(format!("depth {d} leaves the annulus")));
            }
            Ok(vec![d, omega_bounds(spec, sys, z)?.lower, 1.0])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = SweepTable::new(["delta", "omega_lower_bound", "omega_upper_bound"]);
    for row in rows {
        table.push_row(row);
    }
    table.extrapolate("delta");
    table.set_meta("experiment", "rigidity_sweep");
    table.set_meta("annulus_r", spec.inner_radius());
    table.set_meta("domain_hash", domain_hash(sys.domain()));
    table.set_meta("nodes", sys.nodes().len());
    table.set_meta("expected_limit", 1.0);
    table.set_meta(
        "monotone",
        deltas.len() < 2
            || table.rows[..deltas.len()]
                .windows(2)
                .all(|w| w[1][1] >= w[0][1]),
    );
    Ok(table)
}

/// Builds a solver resolving every probe and runs [`rigidity_boundary_sweep`].
pub fn rigidity_sweep(
    spec: AnnulusSpec,
    deltas: &[f64],
    solver: &SweepSolver,
) -> Result<SweepTable> {
    validate_deltas(deltas)?;
    let domain = PlanarDomain::from_spec(&DomainSpec::Annulus {
        r: spec.inner_radius(),
    })?;
    let probes: Vec<Complex64> = deltas
        .iter()
        .map(|&d| Complex64::new(1.0 - d, 0.0))
        .collect();
    let sys = solver.build(&domain, &probes)?;
    let mut table = rigidity_boundary_sweep(spec, &sys, deltas)?;
    table.set_meta("solver", solver.describe());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::geometric_deltas;

    fn setup(n: usize) -> (AnnulusSpec, SzegoSystem) {
        let spec = AnnulusSpec::new(0.25).unwrap();
        let d = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.25 }).unwrap();
        (spec, SzegoSystem::build(&d, n).unwrap())
    }

    #[test]
    fn strictly_inside_unit_interval_and_rotation_invariant() {
        let (spec, sys) = setup(128);
        let b = omega_bounds(spec, &sys, Complex64::new(0.5, 0.0)).unwrap();
        assert!(b.lower > 0.0 && b.lower < 1.0 - 1e-3, "{b:?}");
        assert_eq!(b.upper, 1.0);
        for th in [0.3, 1.0, 2.5, 4.0] {
            let r = omega_bounds(spec, &sys, Complex64::from_polar(0.5, th)).unwrap();
            assert!((r.lower - b.lower).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_outside_points_and_foreign_systems() {
        let (spec, sys) = setup(64);
        assert!(matches!(
            omega_bounds(spec, &sys, Complex64::new(0.1, 0.0)),
            Err(Error::Domain(_))
        ));
        let other = AnnulusSpec::new(0.3).unwrap();
        assert!(matches!(
            omega_bounds(other, &sys, Complex64::new(0.5, 0.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sweep_increases_toward_one() {
        let spec = AnnulusSpec::new(0.25).unwrap();
        let t = rigidity_sweep(spec, &geometric_deltas(0.1, 6), &SweepSolver::default()).unwrap();
        let lower = t.column("omega_lower_bound").unwrap();
        assert!(lower[..6].windows(2).all(|w| w[1] > w[0]), "{lower:?}");
        assert!(lower[0] > 0.0 && lower[0] < 1.0);
        assert!((t.limit("omega_lower_bound").unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn uniform_solver_reports_required_nodes() {
        let spec = AnnulusSpec::new(0.25).unwrap();
        let r = rigidity_sweep(
            spec,
            &[1e-4],
            &SweepSolver::Uniform {
                nodes_per_curve: 64,
            },
        );
        assert!(matches!(r, Err(Error::Degraded { .. })));
    }
}
