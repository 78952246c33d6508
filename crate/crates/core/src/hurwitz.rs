//! Hurwitz metric on simply connected domains: the derivative at `z` of the
//! Riemann map normalized at `z` itself, its bilipschitz envelope, continuity
//! probes and boundary sweeps.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{normal_sweep, ConformalModel, DensityEvaluator, MetricKind, SweepDomain};
use crate::error::{Error, Result};
use crate::geometry::PlanarDomain;
use crate::oracles::disk_density;
use crate::sugawa::q_density;
use crate::sweep::{domain_hash, SweepSolver, SweepTable};
use std::sync::Arc;

/// Nodes of the contour integral for `F′(z)`.
pub const CONTOUR_NODES: usize = 64;
/// Contour radius as a fraction of the distance to the boundary.
pub const CONTOUR_FRACTION: f64 = 0.5;
/// Bilipschitz envelope `1/(8δ) ≤ η ≤ 2/δ`.
pub const LOWER_FACTOR: f64 = 0.125;
pub const UPPER_FACTOR: f64 = 2.0;

/// Points of the circle used to differentiate the map at `z`, given the
/// distance `dist` from `z` to the boundary.
pub fn contour_points(z: Complex64, dist: f64) -> Vec<Complex64> {
    let r = CONTOUR_FRACTION * dist;
    (0..CONTOUR_NODES)
        .map(|k| z + Complex64::from_polar(r, TAU * k as f64 / CONTOUR_NODES as f64))
        .collect()
}

/// `η_D(z)`. For simply connected `D` the Hurwitz covering of `D ∖ {z}` is
/// the inverse of the Riemann map `F_z` with `F_z(z) = 0`, so
/// `η(z) = |F_z′(z)|`; the derivative is the trapezoid rule for
/// `(1/2πi)∮ F_z(w)/(w − z)² dw` on a circle about `z`.
pub fn eta_density(model: &ConformalModel, z: Complex64) -> Result<f64> {
    match model {
        ConformalModel::Disk => disk_density(z),
        ConformalModel::HalfPlane(h) => h.density(z),
        ConformalModel::Fourier(_) => {
            let dist = model.boundary_distance(z)?;
            let map = model.riemann_map(z)?;
            let r = CONTOUR_FRACTION * dist;
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, w) in contour_points(z, dist).into_iter().enumerate() {
                let (f, _) = map.eval(w)?;
                acc += f * Complex64::from_polar(1.0 / r, -TAU * k as f64 / CONTOUR_NODES as f64);
            }
            Ok((acc / CONTOUR_NODES as f64).norm())
        }
    }
}

pub fn eta_evaluator(model: &ConformalModel) -> DensityEvaluator {
    let m = model.clone();
    DensityEvaluator::new(MetricKind::Hurwitz, model.provenance(), move |z| {
        eta_density(&m, z)
    })
}

/// Points touched by [`eta_density`] at `z` on a Fourier model.
pub fn eta_targets(z: Complex64, dist: f64) -> Vec<Complex64> {
    let mut v = contour_points(z, dist);
    v.push(z);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BilipschitzReport {
    /// `(x, y, η, δ_D)` per point.
    pub samples: Vec<[f64; 4]>,
    /// Extremes of `η·δ_D` over the points.
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Asserts `1/8 ≤ η(z)·δ_D(z) ≤ 2` at every point; a violation is an error
/// naming the witness.
pub fn bilipschitz_check(
    model: &ConformalModel,
    points: &[Complex64],
) -> Result<BilipschitzReport> {
    model.prefetch_maps(points)?;
    envelope(points, |z| {
        Ok((eta_density(model, z)?, model.boundary_distance(z)?))
    })
}

fn envelope(
    points: &[Complex64],
    eval: impl Fn(Complex64) -> Result<(f64, f64)> + Sync,
) -> Result<BilipschitzReport> {
    if points.is_empty() {
        return Err(Error::Config("no points to check".into()));
    }
    let samples = points
        .par_iter()
        .map(|&z| {
            let (eta, dist) = eval(z)?;
            Ok([z.re, z.im, eta, dist])
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = samples.iter().map(|s| s[2] * s[3]).collect();
    for (s, &r) in samples.iter().zip(&ratios) {
        if !(LOWER_FACTOR..=UPPER_FACTOR).contains(&r) {
            return Err(Error::InvariantViolation(format!(
                "bilipschitz envelope violated at {}: eta*dist = {r}",
                Complex64::new(s[0], s[1])
            )));
        }
    }
    Ok(BilipschitzReport {
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples,
    })
}

/// Rows `(δ, η(z_δ)·δ)` along the inner normal at `t`; the limit is `1/2`.
pub fn eta_boundary_sweep(
    domain: &SweepDomain,
    curve: usize,
    t: f64,
    deltas: &[f64],
    solver: &SweepSolver,
) -> Result<SweepTable> {
    let mut table = normal_sweep(
        domain,
        curve,
        t,
        deltas,
        solver,
        "eta_delta",
        eta_targets,
        |m, z, d| Ok(eta_density(m, z)? * d),
    )?;
    table.set_meta("metric", "hurwitz");
    table.set_meta("expected_limit", 0.5);
    Ok(table)
}

/// Compass directions used by the continuity probe.
pub fn compass() -> [Complex64; 8] {
    std::array::from_fn(|k| Complex64::from_polar(1.0, TAU * k as f64 / 8.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub a: [f64; 2],
    pub eta_a: f64,
    pub radii: Vec<f64>,
    /// `max_k |η(a + r·e^{ikπ/4}) − η(a)|` per radius.
    pub max_difference: Vec<f64>,
    pub monotone: bool,
}

impl ContinuityReport {
    pub fn to_table(&self) -> SweepTable {
        let mut t = SweepTable::new(["radius", "max_difference"]);
        for (r, d) in self.radii.iter().zip(&self.max_difference) {
            t.push_row(vec![*r, *d]);
        }
        t.set_meta("a", self.a.to_vec());
        t.set_meta("eta_a", self.eta_a);
        t.set_meta("monotone", self.monotone);
        t
    }
}

/// Modulus-of-continuity table of `η` at `a` over decreasing radii.
pub fn continuity_probe(
    model: &ConformalModel,
    a: Complex64,
    radii: &[f64],
) -> Result<ContinuityReport> {
    crate::sweep::validate_deltas(radii)?;
    let dist = model.boundary_distance(a)?;
    if radii[0] >= dist {
        return Err(Error::domain(format!(
            "probe radius {} reaches the boundary (distance {dist})",
            radii[0]
        )));
    }
    let mut probes = vec![a];
    for &r in radii {
        probes.extend(compass().iter().map(|u| a + r * u));
    }
    model.prefetch_maps(&probes)?;
    let eta_a = eta_density(model, a)?;
    let max_difference = radii
        .iter()
        .map(|&r| {
            compass()
                .par_iter()
                .map(|&u| Ok((eta_density(model, a + r * u)? - eta_a).abs()))
                .collect::<Result<Vec<f64>>>()
                .map(|v| v.into_iter().fold(0.0, f64::max))
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = max_difference.windows(2).all(|w| w[1] <= w[0]);
    Ok(ContinuityReport {
        a: [a.re, a.im],
        eta_a,
        radii: radii.to_vec(),
        max_difference,
        monotone,
    })
}

/// Targets a solver needs for [`continuity_probe`].
pub fn continuity_targets(
    a: Complex64,
    radii: &[f64],
    dist_at: impl Fn(Complex64) -> f64,
) -> Vec<Complex64> {
    let mut pts = eta_targets(a, dist_at(a));
    for &r in radii {
        for u in compass() {
            let z = a + r * u;
            pts.extend(eta_targets(z, dist_at(z)));
        }
    }
    pts
}

/// Rows `(x, y, c, λ, q, η, max pairwise difference)` on a simply
/// connected domain, each density from an independent evaluation path.
pub fn four_metric_table(
    domain: &PlanarDomain,
    points: &[Complex64],
    solver: &SweepSolver,
) -> Result<SweepTable> {
    if !domain.is_simply_connected() {
        return Err(Error::Unsupported(
            "the four-metric identity needs a simply connected domain".into(),
        ));
    }
    if let Some(z) = points.iter().find(|z| !domain.contains(**z)) {
        return Err(Error::domain(format!("{z} is not interior")));
    }
    let mut targets = Vec::new();
    for &z in points {
        targets.extend(eta_targets(z, -domain.signed_distance(z)?.psi));
    }
    let sys = Arc::new(solver.build(domain, &targets)?);
    let model = ConformalModel::fourier(Arc::clone(&sys))?;
    model.prefetch_maps(points)?;
    let rows = points
        .par_iter()
        .map(|&z| {
            let c = sys.caratheodory(z)?.value;
            let l = model.hyperbolic(z)?;
            let q = q_density(&model, z)?;
            let e = eta_density(&model, z)?;
            let v = [c, l, q, e];
            let spread = v.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
                - v.iter().fold(f64::INFINITY, |a, b| a.min(*b));
            Ok(vec![z.re, z.im, c, l, q, e, spread])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = SweepTable::new([
        "x",
        "y",
        "caratheodory",
        "hyperbolic",
        "sugawa",
        "hurwitz",
        "max_pairwise",
    ]);
    for row in rows {
        table.push_row(row);
    }
    table.set_meta("experiment", "four_metric");
    table.set_meta("domain_hash", domain_hash(domain));
    table.set_meta("solver", solver.describe());
    Ok(table)
}

/// Interior points of an `n × n` grid over the bounding box, keeping those
/// at least `margin` from the boundary.
pub fn interior_grid(domain: &PlanarDomain, n: usize, margin: f64) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Config("grid size must be positive".into()));
    }
    let [x0, x1, y0, y1] = domain.bounding_box();
    let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let z = Complex64::new(at(x0, x1, i), at(y0, y1, j));
            if domain.contains(z) && -domain.signed_distance(z)?.psi >= margin {
                out.push(z);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, PlanarDomain};
    use crate::oracles::HalfPlane;
    use crate::sweep::geometric_deltas;
    use crate::szego::SzegoSystem;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ellipse_model(n: usize) -> (ConformalModel, Arc<SzegoSystem>) {
        let d = PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap();
        let sys = Arc::new(SzegoSystem::build(&d, n).unwrap());
        (ConformalModel::fourier(Arc::clone(&sys)).unwrap(), sys)
    }

    #[test]
    fn closed_forms() {
        assert!(
            (eta_density(&ConformalModel::Disk, c(0.5, 0.0)).unwrap() - 4.0 / 3.0).abs() < 1e-15
        );
        let h = HalfPlane::new(c(1.0, 0.0)).unwrap();
        assert!(
            (eta_density(&ConformalModel::HalfPlane(h), c(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15
        );
    }

    #[test]
    fn contour_derivative_on_disk_solver() {
        let sys = Arc::new(SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap());
        let m = ConformalModel::fourier(sys).unwrap();
        for z in [c(0.0, 0.0), c(0.5, 0.0), c(-0.3, 0.6)] {
            let eta = eta_density(&m, z).unwrap();
            let want = disk_density(z).unwrap();
            assert!((eta - want).abs() < 1e-10 * want, "{z}: {eta} {want}");
        }
    }

    #[test]
    fn ellipse_matches_caratheodory() {
        let (m, sys) = ellipse_model(256);
        for z in [c(0.0, 0.0), c(0.4, -0.5)] {
            let eta = eta_density(&m, z).unwrap();
            let cd = sys.caratheodory(z).unwrap().value;
            assert!((eta - cd).abs() < 1e-8 * cd);
        }
    }

    #[test]
    fn bilipschitz_on_disk() {
        let rep = bilipschitz_check(&ConformalModel::Disk, &[c(0.0, 0.0)]).unwrap();
        assert_eq!((rep.min_ratio, rep.max_ratio), (1.0, 1.0));
        let z = c(0.999999, 0.0);
        let rep = bilipschitz_check(&ConformalModel::Disk, &[z]).unwrap();
        assert!((rep.min_ratio - 0.5).abs() < 1e-6);
    }

    #[test]
    fn bilipschitz_violation_names_witness() {
        let r = envelope(&[c(0.0, 0.0), c(0.25, 0.5)], |z| {
            Ok((if z.re > 0.0 { 3.0 } else { 1.0 }, 1.0))
        });
        match r {
            Err(Error::InvariantViolation(msg)) => assert!(msg.contains("0.25"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let h = HalfPlane::new(c(1.0, 0.0)).unwrap();
        let m = ConformalModel::HalfPlane(h);
        assert!(bilipschitz_check(&m, &[c(0.5, 0.0), c(-3.0, 1.0)]).is_ok());
        assert!(matches!(
            bilipschitz_check(&m, &[c(2.0, 0.0)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn closed_form_sweeps() {
        let deltas = geometric_deltas(0.1, 5);
        let t = eta_boundary_sweep(&SweepDomain::Disk, 0, 1.0, &deltas, &SweepSolver::default())
            .unwrap();
        for (row, d) in t.rows.iter().zip(&deltas) {
            assert!((row[1] - 1.0 / (2.0 - d)).abs() < 1e-14);
        }
        let h = HalfPlane::new(c(2.0, -1.0)).unwrap();
        let t = eta_boundary_sweep(
            &SweepDomain::HalfPlane(h),
            0,
            -0.5,
            &deltas,
            &SweepSolver::default(),
        )
        .unwrap();
        assert!(t.rows.iter().all(|r| (r[1] - 0.5).abs() < 1e-14));
    }

    #[test]
    fn ellipse_sweep_tends_to_half() {
        let d = PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap();
        let t = eta_boundary_sweep(
            &SweepDomain::Fourier(d),
            0,
            0.0,
            &geometric_deltas(0.1, 6),
            &SweepSolver::default(),
        )
        .unwrap();
        assert!((t.limit("eta_delta").unwrap() - 0.5).abs() < 1e-2);
    }

    #[test]
    fn continuity_on_disk_is_closed_form() {
        let radii = geometric_deltas(0.1, 5);
        let rep = continuity_probe(&ConformalModel::Disk, c(0.0, 0.0), &radii).unwrap();
        for (r, d) in radii.iter().zip(&rep.max_difference) {
            assert!((d - (1.0 / (1.0 - r * r) - 1.0)).abs() < 1e-14);
        }
        assert!(rep.monotone);
        assert_eq!(rep.to_table().rows.len(), 5);
        assert!(continuity_probe(&ConformalModel::Disk, c(0.95, 0.0), &radii).is_err());
    }

    #[test]
    fn four_metrics_agree_on_ellipse() {
        let d = PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap();
        let pts = interior_grid(&d, 4, 0.05).unwrap();
        assert!(pts.len() >= 8);
        let t = four_metric_table(&d, &pts, &SweepSolver::default()).unwrap();
        for row in &t.rows {
            assert!(row[6] < 1e-8 * row[2], "{row:?}");
        }
        let ann = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.3 }).unwrap();
        assert!(matches!(
            four_metric_table(&ann, &pts, &SweepSolver::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn multiply_connected_is_unsupported() {
        let d = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.25 }).unwrap();
        let r = eta_boundary_sweep(
            &SweepDomain::Fourier(d),
            0,
            0.0,
            &[0.1],
            &SweepSolver::default(),
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
