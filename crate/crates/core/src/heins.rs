//! Heins generalized curvature
//! `T(ρ,a,r) = −(4/r²)·(mean_{|z−a|=r} log ρ − log ρ(a))/ρ(a)²`,
//! its exact invariance under affine rescaling, and boundary sweeps.

#![allow(non_snake_case)]

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{normal_sweep, DensityEvaluator, SweepDomain};
use crate::error::{Error, Result};
use crate::hurwitz::{eta_evaluator, eta_targets};
use crate::scaling::ScalingSequence;
use crate::sugawa::q_evaluator;
use crate::sweep::{SweepSolver, SweepTable};

/// Default circle-average node count.
pub const DEFAULT_NODES: usize = 256;
/// Default circle radius relative to the boundary distance in sweeps. At a
/// fixed relative radius the sweep tends to the half-plane value
/// [`half_plane_T`]`(r0)`, which is within `0.016` of `−4` here.
pub const DEFAULT_R0: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeinsSample {
    pub a: [f64; 2],
    pub r: f64,
    pub m: usize,
    pub value: f64,
}

fn circle(a: Complex64, r: f64, m: usize) -> impl Iterator<Item = Complex64> {
    (0..m).map(move |k| a + Complex64::from_polar(r, TAU * k as f64 / m as f64))
}

fn check_nodes(m: usize) -> Result<()> {
    if m < 64 || !m.is_power_of_two() {
        return Err(Error::Config(format!(
            "node count must be a power of two ≥ 64, got {m}"
        )));
    }
    Ok(())
}

/// `T(ρ, a, r)` with an `m`-point periodic trapezoid rule on the circle.
pub fn generalized_T(
    rho: &DensityEvaluator,
    a: Complex64,
    r: f64,
    m: usize,
) -> Result<HeinsSample> {
    check_nodes(m)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("radius must be positive, got {r}")));
    }
    let rho_a = rho.eval(a)?;
    let log_a = rho_a.ln();
    let pts: Vec<Complex64> = circle(a, r, m).collect();
    // Summing differences keeps the O(r²) signal out of the cancellation.
    let sum: f64 = pts
        .par_iter()
        .map(|&z| Ok(rho.eval(z)?.ln() - log_a))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let value = -4.0 / (r * r) * (sum / m as f64) / (rho_a * rho_a);
    Ok(HeinsSample {
        a: [a.re, a.im],
        r,
        m,
        value,
    })
}

/// `T` of the half-plane density on a circle of radius `r0` times the
/// boundary distance: `(16/r0²)·log((1 + √(1 − r0²))/2)`.
pub fn half_plane_T(r0: f64) -> f64 {
    16.0 / (r0 * r0) * ((1.0 + (1.0 - r0 * r0).sqrt()) / 2.0).ln()
}

/// `|T(ρ, c, r_original) − T((T)_*ρ, 0, r_scaled)|` for `T(z) = (z − c)/s`;
/// zero up to rounding when `r_original = s·r_scaled`.
pub fn invariance_defect(
    rho: &DensityEvaluator,
    center: Complex64,
    scale: f64,
    r_original: f64,
    r_scaled: f64,
    m: usize,
) -> Result<f64> {
    let lhs = generalized_T(rho, center, r_original, m)?.value;
    let rhs = generalized_T(
        &rho.pushforward(center, scale),
        Complex64::new(0.0, 0.0),
        r_scaled,
        m,
    )?
    .value;
    Ok((lhs - rhs).abs())
}

/// `|T(ρ, p_j, r·δ_j) − T((T_j)_*ρ, 0, r)|`.
pub fn scaling_invariance_check(
    seq: &ScalingSequence,
    j: usize,
    rho: &DensityEvaluator,
    r: f64,
) -> Result<f64> {
    if j >= seq.len() {
        return Err(Error::domain(format!(
            "index {j} out of range for {} depths",
            seq.len()
        )));
    }
    let d = seq.delta(j);
    invariance_defect(rho, seq.point(j), d, r * d, r, DEFAULT_NODES)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeinsMetric {
    Sugawa,
    Hurwitz,
}

impl HeinsMetric {
    pub fn name(self) -> &'static str {
        match self {
            HeinsMetric::Sugawa => "sugawa",
            HeinsMetric::Hurwitz => "hurwitz",
        }
    }
}

fn boundary_distance(domain: &SweepDomain, z: Complex64) -> f64 {
    match domain {
        SweepDomain::Disk => 1.0 - z.norm(),
        SweepDomain::HalfPlane(h) => -h.signed_distance(z),
        SweepDomain::Fourier(d) => d.signed_distance(z).map_or(0.0, |r| -r.psi),
    }
}

/// Rows `(δ, T(ρ, z_δ, r0·δ))` along the inner normal at `t`.
#[allow(clippy::too_many_arguments)]
pub fn heins_boundary_sweep(
    domain: &SweepDomain,
    curve: usize,
    t: f64,
    metric: HeinsMetric,
    r0: f64,
    deltas: &[f64],
    m: usize,
    solver: &SweepSolver,
) -> Result<SweepTable> {
    check_nodes(m)?;
    if !(r0 > 0.0 && r0 <= 0.5) {
        return Err(Error::Config(format!("r0 must lie in (0, 0.5], got {r0}")));
    }
    let targets = move |z: Complex64, d: f64| -> Vec<Complex64> {
        let pts = circle(z, r0 * d, m);
        match metric {
            HeinsMetric::Sugawa => pts.collect(),
            HeinsMetric::Hurwitz => pts
                .chain(std::iter::once(z))
                .flat_map(|w| eta_targets(w, boundary_distance(domain, w)))
                .collect(),
        }
    };
    let mut table = normal_sweep(
        domain,
        curve,
        t,
        deltas,
        solver,
        "T",
        targets,
        |model, z, d| {
            let rho = match metric {
                HeinsMetric::Sugawa => q_evaluator(model),
                HeinsMetric::Hurwitz => {
                    let bases: Vec<Complex64> =
                        circle(z, r0 * d, m).chain(std::iter::once(z)).collect();
                    model.prefetch_maps(&bases)?;
                    eta_evaluator(model)
                }
            };
            Ok(generalized_T(&rho, z, r0 * d, m)?.value)
        },
    )?;
    table.set_meta("metric", metric.name());
    table.set_meta("r0", r0);
    table.set_meta("nodes", m as u64);
    table.set_meta("expected_limit", -4.0);
    table.set_meta("half_plane_value", half_plane_T(r0));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::MetricKind;
    use crate::geometry::{DomainSpec, PlanarDomain};
    use crate::oracles::HalfPlane;
    use crate::scaling::make_sequence;
    use crate::sweep::geometric_deltas;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disk_closed_form() {
        let t = generalized_T(&DensityEvaluator::disk(), c(0.0, 0.0), 0.1, 256).unwrap();
        assert!(
            (t.value - 400.0 * 0.99f64.ln()).abs() < 1e-10,
            "{}",
            t.value
        );
        for r in [0.05, 0.02, 0.01] {
            let v = generalized_T(&DensityEvaluator::disk(), c(0.0, 0.0), r, 256)
                .unwrap()
                .value;
            let defect = -4.0 - v;
            assert!(
                (defect - 2.0 * r * r).abs() < 2.0 * r.powi(4),
                "{r}: {defect}"
            );
        }
    }

    #[test]
    fn half_plane_and_constant() {
        let h = HalfPlane::new(c(1.0, 0.0)).unwrap();
        let v = generalized_T(&DensityEvaluator::half_plane(h), c(0.0, 0.0), 0.1, 256)
            .unwrap()
            .value;
        assert!(v > -4.1 && v < -3.9);
        assert!((v - half_plane_T(0.1)).abs() < 1e-12);
        let k = generalized_T(
            &DensityEvaluator::constant(MetricKind::Sugawa, 3.0),
            c(5.0, 1.0),
            2.0,
            64,
        )
        .unwrap();
        assert_eq!(k.value, 0.0);
    }

    #[test]
    fn half_plane_reference_values() {
        assert!((half_plane_T(0.25) + 4.0972).abs() < 1e-3);
        assert!((half_plane_T(0.1) + 4.0150).abs() < 1e-3);
    }

    #[test]
    fn quadrature_converges_spectrally() {
        let rho = DensityEvaluator::disk();
        let a = c(0.3, -0.2);
        let t256 = generalized_T(&rho, a, 0.4, 256).unwrap().value;
        let t512 = generalized_T(&rho, a, 0.4, 512).unwrap().value;
        assert!((t256 - t512).abs() < 1e-10);
    }

    #[test]
    fn preconditions() {
        let rho = DensityEvaluator::disk();
        assert!(matches!(
            generalized_T(&rho, c(0.0, 0.0), 0.1, 100),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            generalized_T(&rho, c(0.0, 0.0), 0.1, 32),
            Err(Error::Config(_))
        ));
        assert!(generalized_T(&rho, c(0.5, 0.0), 0.6, 64).is_err());
    }

    #[test]
    fn invariance_and_negative_control() {
        let seq = make_sequence(&PlanarDomain::disk(), 0.0, 0.1, 4).unwrap();
        let rho = DensityEvaluator::disk();
        assert!(scaling_invariance_check(&seq, 0, &rho, 0.5).unwrap() <= 1e-12);
        let d = seq.delta(2);
        let mismatched = invariance_defect(&rho, seq.point(2), d, 0.5 * d, 0.5 * d, 256).unwrap();
        assert!(mismatched > 1e-3, "{mismatched}");
    }

    #[test]
    fn ellipse_transport_invariance() {
        let d = PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap();
        let seq = make_sequence(&d, 0.0, 0.1, 3).unwrap();
        let z = seq.point(2);
        let targets: Vec<Complex64> = circle(z, 0.5 * seq.delta(2), 256).chain([z]).collect();
        let sys = SweepSolver::default().build(&d, &targets).unwrap();
        let model = crate::density::ConformalModel::fourier(std::sync::Arc::new(sys)).unwrap();
        let defect = scaling_invariance_check(&seq, 2, &q_evaluator(&model), 0.5).unwrap();
        assert!(defect <= 1e-12, "{defect}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn affine_invariance_is_exact(
            t in 0.0..TAU, delta0 in 0.05..0.2f64, j in 0usize..5, r in 0.1..0.5f64,
            wr in -2.0..2.0f64, wi in -2.0..2.0f64,
        ) {
            prop_assume!(wr.hypot(wi) > 0.2);
            let seq = make_sequence(&PlanarDomain::disk(), t, delta0, 5).unwrap();
            prop_assert!(scaling_invariance_check(&seq, j, &DensityEvaluator::disk(), r).unwrap() <= 1e-12);
            let h = HalfPlane::new(c(wr, wi)).unwrap();
            let rho = DensityEvaluator::half_plane(h);
            let p = c(wr, wi) / c(wr, wi).norm_sqr() * (1.0 - delta0);
            let s = delta0 / c(wr, wi).norm();
            prop_assert!(invariance_defect(&rho, p, s, r * s, r, 256).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn closed_form_sweeps() {
        let deltas = geometric_deltas(0.1, 6);
        let h = HalfPlane::new(c(0.0, 2.0)).unwrap();
        let t = heins_boundary_sweep(
            &SweepDomain::HalfPlane(h),
            0,
            0.3,
            HeinsMetric::Sugawa,
            0.25,
            &deltas,
            256,
            &SweepSolver::default(),
        )
        .unwrap();
        for row in &t.rows {
            assert!((row[1] - half_plane_T(0.25)).abs() < 1e-10);
        }
        let t = heins_boundary_sweep(
            &SweepDomain::Disk,
            0,
            1.0,
            HeinsMetric::Hurwitz,
            0.1,
            &deltas,
            256,
            &SweepSolver::default(),
        )
        .unwrap();
        assert!((t.limit("T").unwrap() - half_plane_T(0.1)).abs() < 1e-4);
    }

    #[test]
    fn ellipse_sweeps_agree() {
        let d = PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap();
        let dom = SweepDomain::Fourier(d);
        let deltas = geometric_deltas(0.1, 6);
        let q = heins_boundary_sweep(
            &dom,
            0,
            0.0,
            HeinsMetric::Sugawa,
            0.1,
            &deltas,
            64,
            &SweepSolver::default(),
        )
        .unwrap();
        let e = heins_boundary_sweep(
            &dom,
            0,
            0.0,
            HeinsMetric::Hurwitz,
            0.1,
            &deltas,
            64,
            &SweepSolver::default(),
        )
        .unwrap();
        for (a, b) in q.rows.iter().zip(&e.rows) {
            assert!((a[1] - b[1]).abs() < 1e-6, "{a:?} {b:?}");
        }
        assert!((q.limit("T").unwrap() + 4.0).abs() < 0.05);
    }

    #[test]
    fn multiply_connected_unsupported() {
        let d = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.3 }).unwrap();
        let r = heins_boundary_sweep(
            &SweepDomain::Fourier(d),
            0,
            0.0,
            HeinsMetric::Sugawa,
            0.1,
            &[0.1],
            64,
            &SweepSolver::default(),
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
