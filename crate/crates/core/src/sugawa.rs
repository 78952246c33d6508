//! Sugawa metric: closed forms on the disk and half-plane, Riemann-map
//! transport to simply connected domains, extremal quadratic differentials
//! and their L¹ norms.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use quadrature::double_exponential;
use serde::Serialize;

use crate::density::{
    alternate_base, normal_sweep, ConformalModel, DensityEvaluator, MetricKind, SweepDomain,
};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, PlanarDomain};
use crate::oracles::{disk_density, disk_extremal_differential, HalfPlane};
use crate::scaling::{scaled_domain, ScalingSequence};
use crate::sweep::{SweepSolver, SweepTable};

/// Integration clips the half-plane at this distance from its boundary line.
pub const HALF_PLANE_CLIP: f64 = 1e-8;
/// Relative clip applied at boundary crossings of general domains.
pub const DOMAIN_CLIP: f64 = 1e-10;
/// Absolute tolerance of each one-dimensional quadrature.
const QUAD_TOL: f64 = 1e-10;
/// Maximal angular panel width of the polar quadrature.
const ANGULAR_PANELS: usize = 64;

/// Region carrying a quadratic differential.
#[derive(Clone, Debug)]
pub enum Support {
    Disk,
    HalfPlane(HalfPlane),
    Domain(Arc<PlanarDomain>),
}

impl Support {
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            Support::Disk => z.norm() < 1.0,
            Support::HalfPlane(h) => h.contains(z),
            Support::Domain(d) => d.contains(z),
        }
    }
}

/// `|φ(z)| = k / |z − pole|⁴`, used to bound truncation tails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuarticDecay {
    pub pole: Complex64,
    pub k: f64,
}

type PhiFn = dyn Fn(Complex64) -> Result<Complex64> + Send + Sync;

/// Holomorphic quadratic differential `φ(z) dz²` based at `z0`.
#[derive(Clone)]
pub struct QuadraticDifferentialEval {
    base: Complex64,
    support: Support,
    decay: Option<QuarticDecay>,
    f: Arc<PhiFn>,
}

impl fmt::Debug for QuadraticDifferentialEval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticDifferentialEval")
            .field("base", &self.base)
            .field("support", &self.support)
            .field("decay", &self.decay)
            .finish()
    }
}

impl QuadraticDifferentialEval {
    pub fn new(
        base: Complex64,
        support: Support,
        decay: Option<QuarticDecay>,
        f: impl Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !support.contains(base) {
            return Err(Error::domain(format!("base point {base} is not interior")));
        }
        if let Some(d) = decay {
            if support.contains(d.pole) {
                return Err(Error::Pole { z: d.pole });
            }
        }
        Ok(Self {
            base,
            support,
            decay,
            f: Arc::new(f),
        })
    }

    pub fn base(&self) -> Complex64 {
        self.base
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn decay(&self) -> Option<QuarticDecay> {
        self.decay
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        (self.f)(z)
    }
}

/// `q_D(z)`; on a Fourier domain the pullback of the disk density through
/// the Riemann map based at a second interior point.
pub fn q_density(model: &ConformalModel, z: Complex64) -> Result<f64> {
    match model {
        ConformalModel::Disk => disk_density(z),
        ConformalModel::HalfPlane(h) => h.density(z),
        ConformalModel::Fourier(sys) => model
            .riemann_map(alternate_base(sys.domain()))?
            .pullback_density(z),
    }
}

pub fn q_evaluator(model: &ConformalModel) -> DensityEvaluator {
    let m = model.clone();
    DensityEvaluator::new(MetricKind::Sugawa, model.provenance(), move |z| {
        q_density(&m, z)
    })
}

fn half_plane_decay(h: &HalfPlane, z0: Complex64) -> QuarticDecay {
    let num = 2.0 - 2.0 * (h.omega().conj() * z0).re;
    QuarticDecay {
        pole: h.extremal_pole(z0),
        k: num * num / h.omega().norm_sqr(),
    }
}

/// Extremal differential based at `z0`, normalized by `φ(z0) > 0` and
/// `‖φ‖₁ = π`. On Fourier domains it is the pullback of the disk's
/// extremal differential under the Riemann map `F`:
/// `φ(z) = φ_𝔻(F(z), F(z0)) F′(z)² · conj(F′(z0))/F′(z0)`.
pub fn extremal_differential(
    model: &ConformalModel,
    z0: Complex64,
) -> Result<QuadraticDifferentialEval> {
    match model {
        ConformalModel::Disk => QuadraticDifferentialEval::new(z0, Support::Disk, None, move |w| {
            disk_extremal_differential(w, z0)
        }),
        ConformalModel::HalfPlane(h) => {
            let h = *h;
            QuadraticDifferentialEval::new(
                z0,
                Support::HalfPlane(h),
                Some(half_plane_decay(&h, z0)),
                move |z| h.extremal_differential(z, z0),
            )
        }
        ConformalModel::Fourier(sys) => {
            let map = model.riemann_map(sys.domain().interior_reference())?;
            let (w0, d0) = map.eval(z0)?;
            let unimodular = d0.conj() / d0;
            let domain = Arc::new(sys.domain().clone());
            QuadraticDifferentialEval::new(z0, Support::Domain(domain), None, move |z| {
                let (w, d) = map.eval_up_to_boundary(z)?;
                Ok(disk_extremal_differential(w, w0)? * d * d * unimodular)
            })
        }
    }
}

/// The limit half-plane's extremal differential at the origin, restricted
/// to the scaled domain `D_j`.
pub fn scaled_extremal_differential(
    seq: &ScalingSequence,
    j: usize,
) -> Result<QuadraticDifferentialEval> {
    let dj = Arc::new(scaled_domain(seq, j)?);
    let h = seq.limit();
    let zero = Complex64::new(0.0, 0.0);
    QuadraticDifferentialEval::new(
        zero,
        Support::Domain(dj),
        Some(half_plane_decay(&h, zero)),
        move |z| h.extremal_differential(z, zero),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L1Report {
    /// `∫ |φ|` over the support clipped to `B̄(z0, R)`.
    pub value: f64,
    /// Bound on the integral over the rest of the support.
    pub tail_bound: f64,
    /// Accumulated error estimate of the quadrature.
    pub quadrature_error: f64,
    pub truncation_radius: f64,
}

/// Roots of `g` on `[0, 2π)` from sign changes on a grid of `m` intervals,
/// refined by bisection.
fn periodic_roots(g: impl Fn(f64) -> f64, m: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let dt = TAU / m as f64;
    let mut a = 0.0;
    let mut ga = g(a);
    for i in 1..=m {
        let b = dt * i as f64;
        let gb = g(b);
        if ga == 0.0 {
            roots.push(a);
        } else if ga * gb < 0.0 {
            let (mut lo, mut hi, mut glo) = (a, b, ga);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let gm = g(mid);
                if gm * glo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        ga = gb;
    }
    roots
}

fn root_grid(c: &BoundaryCurve) -> usize {
    64 * (2 * c.max_mode() + 1)
}

/// Radii at which the ray `center + ρu`, `ρ > 0`, crosses the boundary.
fn ray_crossings(domain: &PlanarDomain, center: Complex64, u: Complex64) -> Vec<f64> {
    let mut out = Vec::new();
    for c in domain.curves() {
        let g = |t: f64| (u.conj() * (c.point(t) - center)).im;
        for t in periodic_roots(g, root_grid(c)) {
            let rho = (u.conj() * (c.point(t) - center)).re;
            if rho > 0.0 {
                out.push(rho);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Radial intervals of the ray inside the support, clipped to `[0, r]`.
fn ray_segments(support: &Support, center: Complex64, u: Complex64, r: f64) -> Vec<(f64, f64)> {
    let raw: Vec<(f64, f64)> = match support {
        Support::Disk => {
            let b = (center.conj() * u).re;
            let exit = -b + (b * b + 1.0 - center.norm_sqr()).sqrt();
            vec![(0.0, exit)]
        }
        Support::HalfPlane(h) => {
            let w = h.omega();
            let dist = -h.signed_distance(center);
            let cos = (w.conj() * u).re / w.norm();
            if cos > 0.0 {
                vec![(0.0, (dist - HALF_PLANE_CLIP) / cos)]
            } else {
                vec![(0.0, f64::INFINITY)]
            }
        }
        Support::Domain(d) => {
            let xs = ray_crossings(d, center, u);
            // Pulled in from the crossings so that roundoff in the roots
            // cannot place quadrature nodes outside the domain.
            let eps = DOMAIN_CLIP;
            let mut segs = Vec::new();
            let mut start = Some(0.0);
            for x in xs {
                match start.take() {
                    Some(s) => segs.push((s, x - eps * x.max(1.0))),
                    None => start = Some(x + eps * x.max(1.0)),
                }
            }
            segs
        }
    };
    raw.into_iter()
        .filter_map(|(a, b)| {
            let b = b.min(r);
            (b > a).then_some((a, b))
        })
        .collect()
}

/// Angles (as seen from `center`) where the clipped ray segments change
/// combinatorially: boundary points at distance `r` and tangencies.
fn angular_breaks(support: &Support, center: Complex64, r: f64) -> Vec<f64> {
    let mut th = Vec::new();
    match support {
        Support::Disk => {}
        Support::HalfPlane(h) => {
            let dist = -h.signed_distance(center);
            if r > dist {
                let a = h.omega().arg();
                let phi = (dist / r).acos();
                th.extend([a - phi, a + phi]);
            }
        }
        Support::Domain(d) => {
            for c in d.curves() {
                let on_circle = |t: f64| (c.point(t) - center).norm() - r;
                let tangent = |t: f64| ((c.point(t) - center).conj() * c.eval_derivative(t, 1)).im;
                for t in periodic_roots(on_circle, root_grid(c))
                    .into_iter()
                    .chain(periodic_roots(tangent, root_grid(c)))
                {
                    th.push((c.point(t) - center).arg());
                }
            }
        }
    }
    let mut th: Vec<f64> = th.into_iter().map(|t| t.rem_euclid(TAU)).collect();
    th.sort_by(f64::total_cmp);
    th
}

/// Integrates `f(a..b)` with tanh-sinh, surfacing the first evaluation error.
fn integrate_checked(
    f: impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
    err: &RefCell<Option<Error>>,
) -> (f64, f64) {
    let out = double_exponential::integrate(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        tol,
    );
    (out.integral, out.error_estimate)
}

/// Splits `[a, b]` at geometric radii `scale·4^k` so that tanh-sinh sees
/// both the near field and the far decay.
fn radial_breaks(a: f64, b: f64, scale: f64) -> Vec<f64> {
    let mut pts = vec![a];
    let mut x = scale / 16.0;
    while x < b {
        if x > a {
            pts.push(x);
        }
        x *= 4.0;
    }
    pts.push(b);
    pts
}

/// `∫ |φ|` over the support clipped to `B̄(z0, R)` in polar coordinates about
/// the base point, with an analytic tail bound where `|φ|` has quartic decay.
pub fn l1_norm(phi: &QuadraticDifferentialEval, truncation_radius: f64) -> Result<L1Report> {
    let r = truncation_radius;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Config(format!(
            "truncation radius must be positive, got {r}"
        )));
    }
    let center = phi.base;
    let tail_bound = tail_bound(phi, r)?;
    let scale = match phi.decay {
        Some(d) => (d.pole - center).norm(),
        None => match &phi.support {
            Support::Domain(d) => -d.signed_distance(center)?.psi,
            _ => 1.0 - center.norm(),
        },
    };
    let mut breaks = vec![0.0];
    breaks.extend(angular_breaks(&phi.support, center, r));
    breaks.push(TAU);
    let mut panels = Vec::new();
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let k = ((b - a) / (TAU / ANGULAR_PANELS as f64)).ceil().max(1.0) as usize;
        for i in 0..k {
            panels.push((
                a + (b - a) * i as f64 / k as f64,
                a + (b - a) * (i + 1) as f64 / k as f64,
            ));
        }
    }
    let err = RefCell::new(None);
    let mut value = 0.0;
    let mut quadrature_error = 0.0;
    let radial = |theta: f64| -> Result<f64> {
        let u = Complex64::from_polar(1.0, theta);
        let inner_err = RefCell::new(None);
        let mut total = 0.0;
        for (a, b) in ray_segments(&phi.support, center, u, r) {
            let pts = radial_breaks(a, b, scale);
            for w in pts.windows(2) {
                let (v, _) = integrate_checked(
                    |rho| Ok(phi.eval(center + rho * u)?.norm() * rho),
                    w[0],
                    w[1],
                    QUAD_TOL,
                    &inner_err,
                );
                total += v;
            }
        }
        match inner_err.into_inner() {
            Some(e) => Err(e),
            None => Ok(total),
        }
    };
    for (a, b) in panels {
        let (v, e) = integrate_checked(radial, a, b, QUAD_TOL, &err);
        value += v;
        quadrature_error += e;
    }
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(L1Report {
        value,
        tail_bound,
        quadrature_error,
        truncation_radius: r,
    })
}

/// Bound on `∫ |φ|` outside `B̄(z0, R)`: zero when the ball covers the
/// support; otherwise `∫_{|z−z0|>R} k/|z − Z|⁴ ≤ 2πk[1/(2s²) + D/(3s³)]`,
/// `D = |Z − z0|`, `s = R − D`.
fn tail_bound(phi: &QuadraticDifferentialEval, r: f64) -> Result<f64> {
    if let Support::Domain(d) = &phi.support {
        let covered = d.curves().all(|c| {
            let m = c.check_grid_size();
            let slack = c.speed_bound() * TAU / m as f64;
            c.sample(m)
                .iter()
                .all(|p| (p - phi.base).norm() + slack <= r)
        });
        if covered {
            return Ok(0.0);
        }
    }
    if matches!(phi.support, Support::Disk) && r >= 1.0 + phi.base.norm() {
        return Ok(0.0);
    }
    match phi.decay {
        Some(dec) => {
            let dd = (dec.pole - phi.base).norm();
            let s = r - dd;
            if s <= 0.0 {
                return Err(Error::Config(format!(
                    "truncation radius {r} must exceed the pole distance {dd}"
                )));
            }
            Ok(TAU * dec.k * (0.5 / (s * s) + dd / (3.0 * s * s * s)))
        }
        None => Err(Error::Config(format!(
            "truncation radius {r} does not cover the domain and no decay bound is known"
        ))),
    }
}

/// Rows `(δ, q(z_δ)·δ)` along the inner normal at `t`; the limit is `1/2`.
pub fn q_boundary_sweep(
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
        "q_delta",
        |_, _| Vec::new(),
        |m, z, d| Ok(q_density(m, z)? * d),
    )?;
    table.set_meta("metric", "sugawa");
    table.set_meta("expected_limit", 0.5);
    Ok(table)
}

/// Rows `(δ_j, j, ∫_{D_j}|φ_j|, tail bound)` with `φ_j` the limit
/// half-plane's extremal differential at the origin; the limit is `π`.
pub fn l1_scaling_sweep(seq: &ScalingSequence, truncation_radius: f64) -> Result<SweepTable> {
    let mut table = SweepTable::new(["delta", "j", "l1_norm", "tail_bound"]);
    for j in 0..seq.len() {
        let phi = scaled_extremal_differential(seq, j)?;
        let rep = l1_norm(&phi, truncation_radius)?;
        table.push_row(vec![seq.delta(j), j as f64, rep.value, rep.tail_bound]);
    }
    table.extrapolate("delta");
    if let Some(row) = table.extrapolated.as_mut() {
        row[1] = f64::NAN;
    }
    table.set_meta("truncation_radius", truncation_radius);
    table.set_meta("expected_limit", PI);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::szego::SzegoSystem;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ellipse() -> PlanarDomain {
        PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap()
    }

    #[test]
    fn closed_form_densities() {
        assert!((q_density(&ConformalModel::Disk, c(0.5, 0.0)).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let h = HalfPlane::new(c(1.0, 0.0)).unwrap();
        assert!(
            (q_density(&ConformalModel::HalfPlane(h), c(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15
        );
        let ev = q_evaluator(&ConformalModel::Disk);
        assert_eq!(ev.kind(), MetricKind::Sugawa);
    }

    #[test]
    fn transport_matches_caratheodory_and_is_base_independent() {
        let d = ellipse();
        let sys = Arc::new(SzegoSystem::build(&d, 256).unwrap());
        let model = ConformalModel::fourier(Arc::clone(&sys)).unwrap();
        for z in [c(0.0, 0.0), c(0.5, -0.3), c(-0.8, 0.2)] {
            let q = q_density(&model, z).unwrap();
            let cd = sys.caratheodory(z).unwrap().value;
            assert!((q - cd).abs() < 1e-8 * cd, "{z}: {q} {cd}");
            let other = model
                .riemann_map(c(0.1, 0.1))
                .unwrap()
                .pullback_density(z)
                .unwrap();
            assert!((q - other).abs() < 1e-8 * q);
        }
    }

    #[test]
    fn annulus_is_unsupported() {
        let d = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.25 }).unwrap();
        let sys = Arc::new(SzegoSystem::build(&d, 64).unwrap());
        assert!(matches!(
            ConformalModel::fourier(sys),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn extremal_differentials() {
        let phi = extremal_differential(&ConformalModel::Disk, c(0.0, 0.0)).unwrap();
        assert!((phi.eval(c(0.3, 0.4)).unwrap() - 1.0).norm() < 1e-15);
        let h = HalfPlane::new(c(1.0, 0.0)).unwrap();
        let phi = extremal_differential(&ConformalModel::HalfPlane(h), c(0.0, 0.0)).unwrap();
        let z = c(-0.7, 1.1);
        assert!((phi.eval(z).unwrap() - 4.0 / (2.0 - z).powu(4)).norm() < 1e-15);

        let sys = Arc::new(SzegoSystem::build(&ellipse(), 256).unwrap());
        let model = ConformalModel::fourier(sys).unwrap();
        for z0 in [c(0.0, 0.0), c(0.4, 0.3)] {
            let phi = extremal_differential(&model, z0).unwrap();
            let v = phi.eval(z0).unwrap();
            assert!(v.im.abs() < 1e-12 * v.re);
            let q = q_density(&model, z0).unwrap();
            assert!(
                (v.norm().sqrt() - q).abs() < 1e-7,
                "{} {q}",
                v.norm().sqrt()
            );
        }
    }

    #[test]
    fn disk_l1_norm() {
        for z0 in [c(0.0, 0.0), c(0.5, -0.2)] {
            let phi = extremal_differential(&ConformalModel::Disk, z0).unwrap();
            let rep = l1_norm(&phi, 2.0).unwrap();
            assert_eq!(rep.tail_bound, 0.0);
            assert!((rep.value - PI).abs() < 1e-8, "{}", rep.value);
        }
    }

    #[test]
    fn half_plane_l1_norm() {
        let h = HalfPlane::new(c(1.0, 0.0)).unwrap();
        let phi = extremal_differential(&ConformalModel::HalfPlane(h), c(0.0, 0.0)).unwrap();
        let rep = l1_norm(&phi, 1e3).unwrap();
        assert!(rep.tail_bound < 1e-4);
        assert!((rep.value - PI).abs() <= 1e-3, "{}", rep.value);
        assert!(PI - rep.value <= rep.tail_bound + 1e-6);
        let h2 = HalfPlane::new(c(0.0, 2.0)).unwrap();
        let phi = extremal_differential(&ConformalModel::HalfPlane(h2), c(0.3, -1.0)).unwrap();
        let rep = l1_norm(&phi, 1e3).unwrap();
        assert!((rep.value - PI).abs() <= 1e-3, "{}", rep.value);
    }

    #[test]
    fn transported_l1_norm() {
        let sys = Arc::new(SzegoSystem::build(&ellipse(), 256).unwrap());
        let model = ConformalModel::fourier(sys).unwrap();
        let phi = extremal_differential(&model, c(0.2, 0.1)).unwrap();
        let rep = l1_norm(&phi, 3.0).unwrap();
        assert_eq!(rep.tail_bound, 0.0);
        assert!((rep.value - PI).abs() < 1e-3, "{}", rep.value);
    }

    #[test]
    fn truncation_must_cover_or_decay() {
        let sys = Arc::new(SzegoSystem::build(&ellipse(), 128).unwrap());
        let model = ConformalModel::fourier(sys).unwrap();
        let phi = extremal_differential(&model, c(0.0, 0.0)).unwrap();
        assert!(matches!(l1_norm(&phi, 0.5), Err(Error::Config(_))));
    }

    #[test]
    fn pole_inside_support_is_rejected() {
        let h = HalfPlane::new(c(1.0, 0.0)).unwrap();
        let big = Arc::new(PlanarDomain::circle(c(0.0, 0.0), 3.0));
        let r = QuadraticDifferentialEval::new(
            c(0.0, 0.0),
            Support::Domain(big),
            Some(half_plane_decay(&h, c(0.0, 0.0))),
            move |z| h.extremal_differential(z, c(0.0, 0.0)),
        );
        assert!(matches!(r, Err(Error::Pole { .. })));
    }

    #[test]
    fn disk_and_half_plane_sweeps() {
        let deltas = crate::sweep::geometric_deltas(0.1, 6);
        let t =
            q_boundary_sweep(&SweepDomain::Disk, 0, 0.3, &deltas, &SweepSolver::default()).unwrap();
        for (row, d) in t.rows.iter().zip(&deltas) {
            assert!((row[1] - 1.0 / (2.0 - d)).abs() < 1e-14);
        }
        assert!((t.limit("q_delta").unwrap() - 0.5).abs() < 1e-3);
        let h = HalfPlane::new(c(0.0, 1.0)).unwrap();
        let t = q_boundary_sweep(
            &SweepDomain::HalfPlane(h),
            0,
            2.0,
            &deltas,
            &SweepSolver::default(),
        )
        .unwrap();
        for row in &t.rows {
            assert!((row[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn scaled_disk_l1_increases_to_pi() {
        let seq = crate::scaling::make_sequence(&PlanarDomain::disk(), 0.0, 0.1, 4).unwrap();
        let t = l1_scaling_sweep(&seq, 1e3).unwrap();
        let v = t.column("l1_norm").unwrap();
        for w in v.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(v.iter().all(|x| *x < PI));
    }
}
