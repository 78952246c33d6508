//! Conformal metric densities as tagged evaluators, and the Riemann-map
//! transport used for simply connected domains.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, PlanarDomain};
use crate::oracles::{disk_density, AnnulusSpec, HalfPlane};
use crate::sweep::{domain_hash, validate_deltas, SweepSolver, SweepTable};
use crate::szego::{Accuracy, SzegoSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Caratheodory,
    Hyperbolic,
    Sugawa,
    Hurwitz,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MetricKind::Caratheodory => "caratheodory",
            MetricKind::Hyperbolic => "hyperbolic",
            MetricKind::Sugawa => "sugawa",
            MetricKind::Hurwitz => "hurwitz",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Oracle,
    Solver,
    Transport,
}

type DensityFn = dyn Fn(Complex64) -> Result<f64> + Send + Sync;

/// A positive density `z ↦ ρ(z)` of a conformal metric `ρ|dz|`.
#[derive(Clone)]
pub struct DensityEvaluator {
    kind: MetricKind,
    provenance: Provenance,
    f: Arc<DensityFn>,
}

impl fmt::Debug for DensityEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityEvaluator")
            .field("kind", &self.kind)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl DensityEvaluator {
    pub fn new(
        kind: MetricKind,
        provenance: Provenance,
        f: impl Fn(Complex64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind,
            provenance,
            f: Arc::new(f),
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Evaluates the density, rejecting non-positive or non-finite values.
    pub fn eval(&self, z: Complex64) -> Result<f64> {
        let v = (self.f)(z)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvariantViolation(format!(
                "{} density is not positive and finite at {z}: {v}",
                self.kind
            )));
        }
        Ok(v)
    }

    /// Pushforward under `T(z) = (z − center)/scale`:
    /// `(T_*ρ)(u) = scale · ρ(center + scale·u)`.
    pub fn pushforward(&self, center: Complex64, scale: f64) -> Self {
        let inner = Arc::clone(&self.f);
        Self {
            kind: self.kind,
            provenance: self.provenance,
            f: Arc::new(move |u| Ok(scale * inner(center + scale * u)?)),
        }
    }

    /// Hyperbolic density `1/(1 − |z|²)` of the unit disk.
    pub fn disk() -> Self {
        Self::new(MetricKind::Hyperbolic, Provenance::Oracle, disk_density)
    }

    /// Common density `|ω|/(2 − 2Re(ω̄z))` of the half-plane.
    pub fn half_plane(hp: HalfPlane) -> Self {
        Self::new(MetricKind::Hyperbolic, Provenance::Oracle, move |z| {
            hp.density(z)
        })
    }

    pub fn annulus_hyperbolic(spec: AnnulusSpec) -> Self {
        Self::new(MetricKind::Hyperbolic, Provenance::Oracle, move |z| {
            spec.hyperbolic(z)
        })
    }

    pub fn constant(kind: MetricKind, value: f64) -> Self {
        Self::new(kind, Provenance::Oracle, move |_| Ok(value))
    }

    /// Carathéodory density `2πS(z,z)` from a solver; degraded points are errors.
    pub fn caratheodory(sys: Arc<SzegoSystem>) -> Self {
        Self::new(MetricKind::Caratheodory, Provenance::Solver, move |z| {
            let v = sys.caratheodory(z)?;
            if v.accuracy.is_degraded() {
                return Err(Error::Degraded {
                    z,
                    min_nodes: sys.min_nodes_for(z),
                });
            }
            Ok(v.value)
        })
    }
}

/// Riemann map `F: D → 𝔻` of a simply connected domain with `F(base) = 0`,
/// `F′(base) > 0`, realized as the Ahlfors map of the solver.
#[derive(Clone, Debug)]
pub struct RiemannMap {
    sys: Arc<SzegoSystem>,
    base: Complex64,
}

impl RiemannMap {
    pub fn new(sys: Arc<SzegoSystem>, base: Complex64) -> Result<Self> {
        if !sys.domain().is_simply_connected() {
            return Err(Error::Unsupported(
                "Riemann-map transport requires a simply connected domain".into(),
            ));
        }
        if !sys.domain().contains(base) {
            return Err(Error::domain(format!("base point {base} is not interior")));
        }
        Ok(Self { sys, base })
    }

    pub fn base(&self) -> Complex64 {
        self.base
    }

    pub fn system(&self) -> &Arc<SzegoSystem> {
        &self.sys
    }

    /// `(F(z), F′(z))`; degraded evaluation points are errors.
    pub fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let v = self.sys.ahlfors_with_derivative(z, self.base)?;
        if v.accuracy == Accuracy::DegradedNearBoundary {
            return Err(Error::Degraded {
                z,
                min_nodes: self.sys.min_nodes_for(z),
            });
        }
        Ok(v.value)
    }

    /// `(F(z), F′(z))` without the near-boundary accuracy check. The
    /// barycentric Cauchy evaluation of `F` and `F′` stays accurate up to the
    /// boundary, unlike the higher kernel derivatives the check guards.
    pub fn eval_up_to_boundary(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        Ok(self.sys.ahlfors_with_derivative(z, self.base)?.value)
    }

    /// Pullback `|F′(z)|/(1 − |F(z)|²)` of the disk density.
    pub fn pullback_density(&self, z: Complex64) -> Result<f64> {
        let (f, df) = self.eval(z)?;
        let m = 1.0 - f.norm_sqr();
        if !(m > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "|F({z})| = {} ≥ 1",
                f.norm()
            )));
        }
        Ok(df.norm() / m)
    }
}

/// Hyperbolic density of a simply connected Fourier domain by Riemann-map pullback.
pub fn transported_hyperbolic(map: RiemannMap) -> DensityEvaluator {
    DensityEvaluator::new(MetricKind::Hyperbolic, Provenance::Transport, move |z| {
        map.pullback_density(z)
    })
}

/// Second interior base point used to make independent transports.
pub fn alternate_base(domain: &PlanarDomain) -> Complex64 {
    let a0 = domain.interior_reference();
    let reach = domain.reach();
    let candidates = [0.37, -0.41, 0.29, -0.23];
    for (k, s) in candidates.iter().enumerate() {
        let dir = Complex64::from_polar(1.0, 0.7 + 1.9 * k as f64);
        let z = a0 + dir * s * reach;
        if domain.contains(z) {
            return z;
        }
    }
    a0 + Complex64::new(1e-3, 1e-3) * reach
}

/// Source of the metric densities of a simply connected domain.
#[derive(Clone, Debug)]
pub enum ConformalModel {
    Disk,
    HalfPlane(HalfPlane),
    /// Fourier domain through a solver that resolves every point of interest.
    Fourier(Arc<SzegoSystem>),
}

impl ConformalModel {
    /// Fourier model; multiply connected domains are unsupported.
    pub fn fourier(sys: Arc<SzegoSystem>) -> Result<Self> {
        if !sys.domain().is_simply_connected() {
            return Err(Error::Unsupported(
                "conformal transport requires a simply connected domain".into(),
            ));
        }
        Ok(ConformalModel::Fourier(sys))
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            ConformalModel::Fourier(_) => Provenance::Transport,
            _ => Provenance::Oracle,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            ConformalModel::Disk => z.norm() < 1.0,
            ConformalModel::HalfPlane(h) => h.contains(z),
            ConformalModel::Fourier(sys) => sys.domain().contains(z),
        }
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn boundary_distance(&self, z: Complex64) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::domain(format!("{z} is not interior")));
        }
        match self {
            ConformalModel::Disk => Ok(1.0 - z.norm()),
            ConformalModel::HalfPlane(h) => Ok(-h.signed_distance(z)),
            ConformalModel::Fourier(sys) => Ok(-sys.domain().signed_distance(z)?.psi),
        }
    }

    /// Riemann map of a Fourier model with `F(base) = 0`.
    pub fn riemann_map(&self, base: Complex64) -> Result<RiemannMap> {
        match self {
            ConformalModel::Fourier(sys) => RiemannMap::new(Arc::clone(sys), base),
            _ => Err(Error::Unsupported(
                "closed-form models need no Riemann map".into(),
            )),
        }
    }

    /// Solves for the Riemann maps based at `bases` in one batch; a no-op for
    /// closed-form models.
    pub fn prefetch_maps(&self, bases: &[Complex64]) -> Result<()> {
        match self {
            ConformalModel::Fourier(sys) => sys.prefetch(bases, 0),
            _ => Ok(()),
        }
    }

    /// Hyperbolic density; transported through the map based at the
    /// domain's interior reference point.
    pub fn hyperbolic(&self, z: Complex64) -> Result<f64> {
        match self {
            ConformalModel::Disk => disk_density(z),
            ConformalModel::HalfPlane(h) => h.density(z),
            ConformalModel::Fourier(sys) => self
                .riemann_map(sys.domain().interior_reference())?
                .pullback_density(z),
        }
    }

    pub fn hyperbolic_evaluator(&self) -> DensityEvaluator {
        let m = self.clone();
        DensityEvaluator::new(MetricKind::Hyperbolic, self.provenance(), move |z| {
            m.hyperbolic(z)
        })
    }
}

/// Domain along whose inner normals the boundary sweeps run.
#[derive(Clone, Debug)]
pub enum SweepDomain {
    /// Unit disk, evaluated in closed form.
    Disk,
    /// Half-plane; boundary points are parametrized by arclength along the line.
    HalfPlane(HalfPlane),
    Fourier(PlanarDomain),
}

impl SweepDomain {
    /// The disk maps to closed forms, every other spec to the solver path.
    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        match spec {
            DomainSpec::Disk {} => Ok(SweepDomain::Disk),
            _ => Ok(SweepDomain::Fourier(PlanarDomain::from_spec(spec)?)),
        }
    }

    /// Probe at depth `delta` along the inner normal at parameter `t`.
    pub fn probe(&self, curve: usize, t: f64, delta: f64) -> Result<Complex64> {
        match self {
            SweepDomain::Disk => {
                if curve != 0 {
                    return Err(Error::domain("the disk has a single boundary curve"));
                }
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::domain(format!("depth {delta} outside (0, 1)")));
                }
                Ok(Complex64::from_polar(1.0 - delta, t))
            }
            SweepDomain::HalfPlane(h) => {
                let w = h.omega();
                let n = w / w.norm();
                let foot = w / w.norm_sqr();
                Ok(foot + Complex64::new(0.0, t) * n - delta * n)
            }
            SweepDomain::Fourier(d) => {
                let p = d.boundary_point(curve, t)?;
                d.normal_probe(&p, delta)
            }
        }
    }

    /// Model able to evaluate at `targets`.
    pub fn model(&self, targets: &[Complex64], solver: &SweepSolver) -> Result<ConformalModel> {
        match self {
            SweepDomain::Disk => Ok(ConformalModel::Disk),
            SweepDomain::HalfPlane(h) => Ok(ConformalModel::HalfPlane(*h)),
            SweepDomain::Fourier(d) => {
                if !d.is_simply_connected() {
                    return Err(Error::Unsupported(
                        "conformal transport requires a simply connected domain".into(),
                    ));
                }
                ConformalModel::fourier(Arc::new(solver.build(d, targets)?))
            }
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            SweepDomain::Disk => {
                serde_json::json!({"kind": "disk", "hash": domain_hash(&PlanarDomain::disk())})
            }
            SweepDomain::HalfPlane(h) => {
                serde_json::json!({"kind": "halfplane", "omega": [h.omega().re, h.omega().im]})
            }
            SweepDomain::Fourier(d) => {
                serde_json::json!({"spec": d.to_spec(), "hash": domain_hash(d)})
            }
        }
    }
}

/// Sweep of `value(model, z_δ, δ)` over probes `z_δ` at the given depths.
/// `targets(z, δ)` lists the points each evaluation touches, so that the
/// solver can resolve them.
#[allow(clippy::too_many_arguments)]
pub fn normal_sweep(
    domain: &SweepDomain,
    curve: usize,
    t: f64,
    deltas: &[f64],
    solver: &SweepSolver,
    column: &str,
    targets: impl Fn(Complex64, f64) -> Vec<Complex64>,
    value: impl Fn(&ConformalModel, Complex64, f64) -> Result<f64>,
) -> Result<SweepTable> {
    validate_deltas(deltas)?;
    let probes = deltas
        .iter()
        .map(|&d| domain.probe(curve, t, d))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<Complex64> = probes
        .iter()
        .zip(deltas)
        .flat_map(|(&z, &d)| {
            let mut v = targets(z, d);
            v.push(z);
            v
        })
        .collect();
    let model = domain.model(&all, solver)?;
    let mut table = SweepTable::new(["delta", column]);
    for (&z, &d) in probes.iter().zip(deltas) {
        table.push_row(vec![d, value(&model, z, d)?]);
    }
    table.extrapolate("delta");
    table.set_meta("domain", domain.describe());
    table.set_meta("curve", curve as u64);
    table.set_meta("t", t);
    if matches!(domain, SweepDomain::Fourier(_)) {
        table.set_meta("solver", solver.describe());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn pushforward_scales_density() {
        let rho = DensityEvaluator::disk();
        let pushed = rho.pushforward(Complex64::new(0.9, 0.0), 0.1);
        let v = pushed.eval(Complex64::new(0.0, 0.0)).unwrap();
        assert!((v - 0.1 / (1.0 - 0.81)).abs() < 1e-14);
        assert_eq!(pushed.kind(), MetricKind::Hyperbolic);
    }

    #[test]
    fn non_positive_density_rejected() {
        let bad = DensityEvaluator::new(MetricKind::Sugawa, Provenance::Oracle, |_| Ok(-1.0));
        assert!(matches!(
            bad.eval(Complex64::new(0.0, 0.0)),
            Err(Error::InvariantViolation(_))
        ));
        assert!(DensityEvaluator::disk()
            .eval(Complex64::new(1.0, 0.0))
            .is_err());
    }

    #[test]
    fn riemann_map_of_disk_is_mobius() {
        let sys = Arc::new(SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap());
        let a = Complex64::new(0.3, -0.2);
        let map = RiemannMap::new(sys, a).unwrap();
        let z = Complex64::new(-0.1, 0.5);
        let (f, _) = map.eval(z).unwrap();
        let mobius = (z - a) / (1.0 - a.conj() * z);
        assert!((f - mobius).norm() < 1e-10);
        assert!((map.pullback_density(z).unwrap() - disk_density(z).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn riemann_map_rejects_annulus() {
        let d = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.25 }).unwrap();
        let sys = Arc::new(SzegoSystem::build(&d, 64).unwrap());
        assert!(matches!(
            RiemannMap::new(sys, Complex64::new(0.5, 0.0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn transported_hyperbolic_matches_caratheodory_on_ellipse() {
        let d = PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap();
        let sys = Arc::new(SzegoSystem::build(&d, 256).unwrap());
        let lam = transported_hyperbolic(
            RiemannMap::new(Arc::clone(&sys), d.interior_reference()).unwrap(),
        );
        let c = DensityEvaluator::caratheodory(sys);
        for z in [Complex64::new(0.4, 0.3), Complex64::new(-1.0, 0.1)] {
            let a = lam.eval(z).unwrap();
            let b = c.eval(z).unwrap();
            assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
        }
    }
}
