//! JSON experiment configurations and their execution into [`SweepTable`]s.

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use rayon::prelude::*;

use crate::curvature::{kappa_n, kappa_sweep};
use crate::density::{ConformalModel, DensityEvaluator, SweepDomain};
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, PlanarDomain};
use crate::heins::{self, heins_boundary_sweep, invariance_defect, HeinsMetric};
use crate::hurwitz::{
    bilipschitz_check, continuity_probe, continuity_targets, eta_boundary_sweep, eta_targets,
    four_metric_table, interior_grid,
};
use crate::oracles::{
    disk_density, disk_extremal_differential, disk_szego, AnnulusSpec, HalfPlane,
};
use crate::rigidity::rigidity_sweep;
use crate::scaling::{
    default_kernel_grid, hausdorff_to_limit, make_sequence_on, scale_report, DEFAULT_WINDOW,
};
use crate::sugawa::{extremal_differential, l1_norm, l1_scaling_sweep, q_boundary_sweep};
use crate::sweep::{domain_hash, geometric_deltas, SweepSolver, SweepTable};
use crate::szego::{GradingOptions, SzegoSystem};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// CSV destination; standard output when absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.experiment.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Boundary discretization used by solver-backed experiments.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    Graded {
        /// Panel length allowed per unit of target distance.
        #[serde(default)]
        ratio: Option<f64>,
    },
    Uniform {
        nodes_per_curve: usize,
    },
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::Graded { ratio: None }
    }
}

impl SolverConfig {
    pub fn solver(self) -> SweepSolver {
        match self {
            SolverConfig::Graded { ratio } => {
                let mut o = GradingOptions::default();
                if let Some(r) = ratio {
                    o.ratio = r;
                }
                SweepSolver::Graded(o)
            }
            SolverConfig::Uniform { nodes_per_curve } => SweepSolver::Uniform { nodes_per_curve },
        }
    }
}

/// Evaluation points.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSet {
    List {
        points: Vec<[f64; 2]>,
    },
    /// Interior nodes of an `n × n` grid over the bounding box, at least
    /// `margin` from the boundary.
    Grid {
        n: usize,
        #[serde(default)]
        margin: f64,
    },
    /// `n × n` nodes spanning `[-half_width, half_width]²` inclusive,
    /// centred at `center`; all must be interior.
    Square {
        n: usize,
        half_width: f64,
        #[serde(default = "origin")]
        center: [f64; 2],
    },
    /// Uniform samples in the region intersected with a box of half-width `extent`.
    Random {
        count: usize,
        seed: u64,
        #[serde(default = "default_extent")]
        extent: f64,
    },
}

fn default_extent() -> f64 {
    4.0
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Disk {},
    Halfplane { omega: [f64; 2] },
    Annulus { r: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMetric {
    Sugawa,
    Hurwitz,
}

fn zero() -> usize {
    0
}
fn delta0() -> f64 {
    0.1
}
fn count() -> usize {
    9
}
fn window() -> f64 {
    DEFAULT_WINDOW
}
fn r0() -> f64 {
    heins::DEFAULT_R0
}
fn nodes() -> usize {
    heins::DEFAULT_NODES
}
fn yes() -> bool {
    true
}
fn origin() -> [f64; 2] {
    [0.0, 0.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    /// Closed-form values and internal identities of an oracle domain.
    Oracle {
        oracle: OracleSpec,
        points: PointSet,
        #[serde(default = "origin")]
        a: [f64; 2],
    },
    /// Boundary samples with normals and curvature.
    Domain {
        domain: DomainSpec,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// `S`, `L` and `f` at points for base point `a`.
    Kernel {
        domain: DomainSpec,
        a: [f64; 2],
        points: PointSet,
        #[serde(default)]
        solver: SolverConfig,
    },
    /// Relative error of the solver's Szegő kernel against the disk formula.
    KernelCheck {
        nodes_per_curve: usize,
        a: [f64; 2],
        points: PointSet,
    },
    MetricSweep {
        metric: SweepMetric,
        domain: DomainSpec,
        #[serde(default = "zero")]
        curve: usize,
        t: f64,
        #[serde(default = "delta0")]
        delta0: f64,
        #[serde(default = "count")]
        count: usize,
        #[serde(default)]
        solver: SolverConfig,
    },
    /// Bilipschitz envelope of the Hurwitz density on a point set.
    MetricCheck {
        domain: DomainSpec,
        points: PointSet,
        #[serde(default)]
        solver: SolverConfig,
    },
    ContinuityProbe {
        domain: DomainSpec,
        a: [f64; 2],
        #[serde(default = "delta0")]
        radius0: f64,
        #[serde(default = "count")]
        count: usize,
        #[serde(default)]
        solver: SolverConfig,
    },
    FourMetric {
        domain: DomainSpec,
        points: PointSet,
        #[serde(default)]
        solver: SolverConfig,
    },
    L1Sweep {
        domain: DomainSpec,
        #[serde(default = "zero")]
        curve: usize,
        t: f64,
        #[serde(default = "delta0")]
        delta0: f64,
        #[serde(default = "count")]
        count: usize,
        #[serde(default = "default_truncation")]
        truncation_radius: f64,
    },
    CurvatureSweep {
        domain: DomainSpec,
        #[serde(default = "zero")]
        curve: usize,
        t: f64,
        orders: Vec<usize>,
        #[serde(default = "delta0")]
        delta0: f64,
        #[serde(default = "count")]
        count: usize,
        #[serde(default)]
        solver: SolverConfig,
    },
    /// `κ_n` at points.
    CurvatureGrid {
        domain: DomainSpec,
        orders: Vec<usize>,
        points: PointSet,
        #[serde(default)]
        solver: SolverConfig,
    },
    /// `‖φ‖₁` of the extremal differential of an oracle domain.
    L1Norm {
        oracle: OracleSpec,
        #[serde(default = "origin")]
        base: [f64; 2],
        #[serde(default = "default_truncation")]
        truncation_radius: f64,
    },
    ScaleReport {
        domain: DomainSpec,
        #[serde(default = "zero")]
        curve: usize,
        t: f64,
        #[serde(default = "delta0")]
        delta0: f64,
        #[serde(default = "count")]
        count: usize,
        #[serde(default = "window")]
        window_radius: f64,
        /// First index reported; earlier depths are skipped.
        #[serde(default = "zero")]
        first: usize,
        /// Also compare the scaled kernels with the half-plane formulas.
        #[serde(default = "yes")]
        kernels: bool,
    },
    RigiditySweep {
        r: f64,
        #[serde(default = "delta0")]
        delta0: f64,
        #[serde(default = "count")]
        count: usize,
        #[serde(default)]
        solver: SolverConfig,
    },
    HeinsSweep {
        domain: DomainSpec,
        #[serde(default = "zero")]
        curve: usize,
        t: f64,
        metric: HeinsMetric,
        #[serde(default = "r0")]
        r0: f64,
        #[serde(default = "delta0")]
        delta0: f64,
        #[serde(default = "count")]
        count: usize,
        #[serde(default = "nodes")]
        nodes: usize,
        #[serde(default)]
        solver: SolverConfig,
    },
    /// `T(ρ, a, r)` for an oracle hyperbolic density.
    HeinsValue {
        oracle: OracleSpec,
        a: [f64; 2],
        r: f64,
        #[serde(default = "nodes")]
        nodes: usize,
    },
    /// Randomized affine-invariance suite for `T`, with a mismatched-radius
    /// control column.
    HeinsInvariance { cases: usize, seed: u64 },
}

fn default_samples() -> usize {
    256
}
fn default_truncation() -> f64 {
    1e3
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Oracle { .. } => "oracle",
            Experiment::Domain { .. } => "domain",
            Experiment::Kernel { .. } => "kernel",
            Experiment::KernelCheck { .. } => "kernel_check",
            Experiment::MetricSweep { .. } => "metric_sweep",
            Experiment::MetricCheck { .. } => "metric_check",
            Experiment::ContinuityProbe { .. } => "continuity_probe",
            Experiment::FourMetric { .. } => "four_metric",
            Experiment::L1Sweep { .. } => "l1_sweep",
            Experiment::CurvatureSweep { .. } => "curvature_sweep",
            Experiment::CurvatureGrid { .. } => "curvature_grid",
            Experiment::L1Norm { .. } => "l1_norm",
            Experiment::ScaleReport { .. } => "scale_report",
            Experiment::RigiditySweep { .. } => "rigidity_sweep",
            Experiment::HeinsSweep { .. } => "heins_sweep",
            Experiment::HeinsValue { .. } => "heins_value",
            Experiment::HeinsInvariance { .. } => "heins_invariance",
        }
    }

    /// Checks every numeric parameter before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let depths = |d0: f64, n: usize| -> Result<()> {
            if !(d0 > 0.0 && d0 < 1.0) {
                return bad(format!("delta0 must lie in (0, 1), got {d0}"));
            }
            if n == 0 || n > 40 {
                return bad(format!("count must lie in 1..=40, got {n}"));
            }
            Ok(())
        };
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                bad(format!("{name} must be finite"))
            }
        };
        match self {
            Experiment::Oracle { oracle, points, a } => {
                oracle.validate()?;
                finite("a", a[0] + a[1])?;
                points.validate()
            }
            Experiment::CurvatureGrid {
                orders,
                points,
                solver,
                ..
            } => {
                if orders.is_empty() || orders.iter().any(|n| !(1..=3).contains(n)) {
                    return bad("curvature orders must lie in 1..=3".into());
                }
                solver.validate()?;
                points.validate()
            }
            Experiment::L1Norm {
                oracle,
                base,
                truncation_radius,
            } => {
                oracle.validate()?;
                finite("base", base[0] + base[1])?;
                if matches!(oracle, OracleSpec::Annulus { .. }) {
                    return bad(
                        "the extremal differential is available on the disk and half-planes only"
                            .into(),
                    );
                }
                if !(*truncation_radius > 0.0 && truncation_radius.is_finite()) {
                    return bad("truncation_radius must be positive".into());
                }
                Ok(())
            }
            Experiment::HeinsValue {
                oracle,
                a,
                r,
                nodes,
            } => {
                oracle.validate()?;
                finite("a", a[0] + a[1])?;
                if !(*r > 0.0 && r.is_finite()) {
                    return bad(format!("radius must be positive, got {r}"));
                }
                if *nodes < 64 || !nodes.is_power_of_two() {
                    return bad(format!("nodes must be a power of two ≥ 64, got {nodes}"));
                }
                Ok(())
            }
            Experiment::Domain { samples, .. } => {
                if *samples < 4 {
                    return bad("samples must be at least 4".into());
                }
                Ok(())
            }
            Experiment::Kernel { points, solver, .. }
            | Experiment::MetricCheck { points, solver, .. }
            | Experiment::FourMetric { points, solver, .. } => {
                solver.validate()?;
                points.validate()
            }
            Experiment::KernelCheck {
                nodes_per_curve,
                points,
                ..
            } => {
                SolverConfig::Uniform {
                    nodes_per_curve: *nodes_per_curve,
                }
                .validate()?;
                points.validate()
            }
            Experiment::MetricSweep {
                t,
                delta0,
                count,
                solver,
                ..
            }
            | Experiment::CurvatureSweep {
                t,
                delta0,
                count,
                solver,
                ..
            } => {
                finite("t", *t)?;
                solver.validate()?;
                if let Experiment::CurvatureSweep { orders, .. } = self {
                    if orders.is_empty() || orders.iter().any(|n| !(1..=3).contains(n)) {
                        return bad("curvature orders must lie in 1..=3".into());
                    }
                }
                depths(*delta0, *count)
            }
            Experiment::ContinuityProbe {
                radius0,
                count,
                solver,
                ..
            } => {
                solver.validate()?;
                depths(*radius0, *count)
            }
            Experiment::L1Sweep {
                t,
                delta0,
                count,
                truncation_radius,
                ..
            } => {
                finite("t", *t)?;
                if !(*truncation_radius > 0.0 && truncation_radius.is_finite()) {
                    return bad("truncation_radius must be positive".into());
                }
                depths(*delta0, *count)
            }
            Experiment::ScaleReport {
                t,
                delta0,
                count,
                window_radius,
                first,
                ..
            } => {
                finite("t", *t)?;
                if !(*window_radius > 0.0 && window_radius.is_finite()) {
                    return bad("window_radius must be positive".into());
                }
                if *first >= *count {
                    return bad("first must be below count".into());
                }
                depths(*delta0, *count)
            }
            Experiment::RigiditySweep {
                r,
                delta0,
                count,
                solver,
            } => {
                if !(*r > 0.0 && *r < 1.0) {
                    return bad(format!("annulus radius must lie in (0, 1), got {r}"));
                }
                if *delta0 >= 1.0 - r {
                    return bad("delta0 must be below the annulus width".into());
                }
                solver.validate()?;
                depths(*delta0, *count)
            }
            Experiment::HeinsSweep {
                t,
                r0,
                delta0,
                count,
                nodes,
                solver,
                ..
            } => {
                finite("t", *t)?;
                if !(*r0 > 0.0 && *r0 <= 0.5) {
                    return bad(format!("r0 must lie in (0, 0.5], got {r0}"));
                }
                if *nodes < 64 || !nodes.is_power_of_two() {
                    return bad(format!("nodes must be a power of two ≥ 64, got {nodes}"));
                }
                solver.validate()?;
                depths(*delta0, *count)
            }
            Experiment::HeinsInvariance { cases, .. } => {
                if *cases == 0 {
                    return bad("cases must be positive".into());
                }
                Ok(())
            }
        }
    }

    pub fn run(&self) -> Result<SweepTable> {
        let mut table = match self {
            Experiment::Oracle { oracle, points, a } => run_oracle(*oracle, points, c(*a))?,
            Experiment::Domain { domain, samples } => run_domain(domain, *samples)?,
            Experiment::Kernel {
                domain,
                a,
                points,
                solver,
            } => run_kernel(domain, c(*a), points, *solver)?,
            Experiment::KernelCheck {
                nodes_per_curve,
                a,
                points,
            } => run_kernel_check(*nodes_per_curve, c(*a), points)?,
            Experiment::MetricSweep {
                metric,
                domain,
                curve,
                t,
                delta0,
                count,
                solver,
            } => {
                let dom = SweepDomain::from_spec(domain)?;
                let deltas = geometric_deltas(*delta0, *count);
                match metric {
                    SweepMetric::Sugawa => {
                        q_boundary_sweep(&dom, *curve, *t, &deltas, &solver.solver())?
                    }
                    SweepMetric::Hurwitz => {
                        eta_boundary_sweep(&dom, *curve, *t, &deltas, &solver.solver())?
                    }
                }
            }
            Experiment::MetricCheck {
                domain,
                points,
                solver,
            } => run_metric_check(domain, points, *solver)?,
            Experiment::ContinuityProbe {
                domain,
                a,
                radius0,
                count,
                solver,
            } => {
                let d = PlanarDomain::from_spec(domain)?;
                let radii = geometric_deltas(*radius0, *count);
                let targets = continuity_targets(c(*a), &radii, |z| {
                    d.signed_distance(z).map_or(0.0, |r| -r.psi)
                });
                let model = SweepDomain::from_spec(domain)?.model(&targets, &solver.solver())?;
                let mut t = continuity_probe(&model, c(*a), &radii)?.to_table();
                t.set_meta("domain_hash", domain_hash(&d));
                t
            }
            Experiment::FourMetric {
                domain,
                points,
                solver,
            } => {
                let d = PlanarDomain::from_spec(domain)?;
                four_metric_table(&d, &points.resolve_in(&d)?, &solver.solver())?
            }
            Experiment::L1Sweep {
                domain,
                curve,
                t,
                delta0,
                count,
                truncation_radius,
            } => {
                let d = PlanarDomain::from_spec(domain)?;
                let seq = make_sequence_on(&d, *curve, *t, *delta0, *count)?;
                let mut tab = l1_scaling_sweep(&seq, *truncation_radius)?;
                tab.set_meta("domain_hash", domain_hash(&d));
                tab
            }
            Experiment::CurvatureSweep {
                domain,
                curve,
                t,
                orders,
                delta0,
                count,
                solver,
            } => {
                let d = PlanarDomain::from_spec(domain)?;
                kappa_sweep(
                    &d,
                    *curve,
                    *t,
                    orders,
                    &geometric_deltas(*delta0, *count),
                    &solver.solver(),
                )?
            }
            Experiment::CurvatureGrid {
                domain,
                orders,
                points,
                solver,
            } => run_curvature_grid(domain, orders, points, *solver)?,
            Experiment::L1Norm {
                oracle,
                base,
                truncation_radius,
            } => run_l1_norm(*oracle, c(*base), *truncation_radius)?,
            Experiment::ScaleReport {
                domain,
                curve,
                t,
                delta0,
                count,
                window_radius,
                first,
                kernels,
            } => run_scale_report(
                domain,
                *curve,
                *t,
                *delta0,
                *count,
                *window_radius,
                *first,
                *kernels,
            )?,
            Experiment::RigiditySweep {
                r,
                delta0,
                count,
                solver,
            } => rigidity_sweep(
                AnnulusSpec::new(*r)?,
                &geometric_deltas(*delta0, *count),
                &solver.solver(),
            )?,
            Experiment::HeinsSweep {
                domain,
                curve,
                t,
                metric,
                r0,
                delta0,
                count,
                nodes,
                solver,
            } => {
                let dom = SweepDomain::from_spec(domain)?;
                let deltas = geometric_deltas(*delta0, *count);
                heins_boundary_sweep(
                    &dom,
                    *curve,
                    *t,
                    *metric,
                    *r0,
                    &deltas,
                    *nodes,
                    &solver.solver(),
                )?
            }
            Experiment::HeinsValue {
                oracle,
                a,
                r,
                nodes,
            } => {
                let rho = match *oracle {
                    OracleSpec::Disk {} => DensityEvaluator::disk(),
                    OracleSpec::Halfplane { omega } => {
                        DensityEvaluator::half_plane(HalfPlane::new(c(omega))?)
                    }
                    OracleSpec::Annulus { r } => {
                        DensityEvaluator::annulus_hyperbolic(AnnulusSpec::new(r)?)
                    }
                };
                let sample = heins::generalized_T(&rho, c(*a), *r, *nodes)?;
                let mut t = SweepTable::new(["x", "y", "r", "nodes", "T"]);
                t.push_row(vec![a[0], a[1], *r, *nodes as f64, sample.value]);
                t
            }
            Experiment::HeinsInvariance { cases, seed } => run_heins_invariance(*cases, *seed)?,
        };
        table.set_meta("experiment", self.name());
        Ok(table)
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        match self {
            SolverConfig::Uniform { nodes_per_curve } if *nodes_per_curve < 16 => {
                Err(Error::Config(format!(
                    "nodes_per_curve must be at least 16, got {nodes_per_curve}"
                )))
            }
            SolverConfig::Graded { ratio: Some(r) }
                if !(*r > 0.0 && *r <= crate::szego::MAX_GRADING_RATIO) =>
            {
                Err(Error::Config(format!(
                    "grading ratio must lie in (0, {}], got {r}",
                    crate::szego::MAX_GRADING_RATIO
                )))
            }
            _ => Ok(()),
        }
    }
}

impl OracleSpec {
    fn validate(&self) -> Result<()> {
        match self {
            OracleSpec::Halfplane { omega }
                if !(omega[0].is_finite() && omega[1].is_finite())
                    || omega[0] == 0.0 && omega[1] == 0.0 =>
            {
                Err(Error::Config("omega must be finite and nonzero".into()))
            }
            OracleSpec::Annulus { r } if !(*r > 0.0 && *r < 1.0) => Err(Error::Config(format!(
                "annulus radius must lie in (0, 1), got {r}"
            ))),
            _ => Ok(()),
        }
    }
}

impl PointSet {
    fn validate(&self) -> Result<()> {
        match self {
            PointSet::List { points } if points.is_empty() => {
                Err(Error::Config("point list is empty".into()))
            }
            PointSet::List { points }
                if points
                    .iter()
                    .any(|p| !p[0].is_finite() || !p[1].is_finite()) =>
            {
                Err(Error::Config("points must be finite".into()))
            }
            PointSet::Grid { n, margin } if *n == 0 || !(*margin >= 0.0) => Err(Error::Config(
                "grid needs n ≥ 1 and a non-negative margin".into(),
            )),
            PointSet::Square { n, half_width, .. } if *n < 2 || !(*half_width > 0.0) => Err(
                Error::Config("square grid needs n ≥ 2 and a positive half-width".into()),
            ),
            PointSet::Random { count, extent, .. } if *count == 0 || !(*extent > 0.0) => Err(
                Error::Config("random points need count ≥ 1 and a positive extent".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Points inside `region`, drawn from `[-extent, extent]²` or a box.
    fn resolve(&self, contains: impl Fn(Complex64) -> bool, bbox: [f64; 4]) -> Vec<Complex64> {
        match self {
            PointSet::List { points } => points.iter().map(|p| c(*p)).collect(),
            PointSet::Grid { n, .. } => {
                let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * (k as f64 + 0.5) / *n as f64;
                let mut out = Vec::new();
                for i in 0..*n {
                    for j in 0..*n {
                        let z = Complex64::new(at(bbox[0], bbox[1], i), at(bbox[2], bbox[3], j));
                        if contains(z) {
                            out.push(z);
                        }
                    }
                }
                out
            }
            PointSet::Square {
                n,
                half_width,
                center,
            } => {
                let step = 2.0 * half_width / (*n - 1) as f64;
                (0..n * n)
                    .map(|k| {
                        c(*center)
                            + Complex64::new(
                                -half_width + step * (k / n) as f64,
                                -half_width + step * (k % n) as f64,
                            )
                    })
                    .collect()
            }
            PointSet::Random {
                count,
                seed,
                extent,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let lo = [bbox[0].max(-extent), bbox[2].max(-extent)];
                let hi = [bbox[1].min(*extent), bbox[3].min(*extent)];
                let mut out = Vec::with_capacity(*count);
                while out.len() < *count {
                    let z = Complex64::new(
                        rng.random_range(lo[0]..hi[0]),
                        rng.random_range(lo[1]..hi[1]),
                    );
                    if contains(z) {
                        out.push(z);
                    }
                }
                out
            }
        }
    }

    fn resolve_in(&self, d: &PlanarDomain) -> Result<Vec<Complex64>> {
        let pts = match self {
            PointSet::Grid { n, margin } => interior_grid(d, *n, *margin)?,
            _ => self.resolve(|z| d.contains(z), d.bounding_box()),
        };
        if let Some(z) = pts.iter().find(|z| !d.contains(**z)) {
            return Err(Error::domain(format!("{z} is not interior")));
        }
        if pts.is_empty() {
            return Err(Error::Config(
                "no evaluation points inside the domain".into(),
            ));
        }
        Ok(pts)
    }
}

fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn run_oracle(oracle: OracleSpec, points: &PointSet, a: Complex64) -> Result<SweepTable> {
    let mut table = SweepTable::new([
        "x",
        "y",
        "density",
        "szego_re",
        "szego_im",
        "ahlfors_identity_defect",
        "caratheodory_identity_defect",
        "differential_identity_defect",
    ]);
    let nan = f64::NAN;
    match oracle {
        OracleSpec::Disk {} => {
            for z in points.resolve(|z| z.norm() < 1.0, [-1.0, 1.0, -1.0, 1.0]) {
                let rho = disk_density(z)?;
                let s = disk_szego(z, a)?;
                let c_def = (2.0 * PI * disk_szego(z, z)?.re - rho).abs();
                let phi_def = (disk_extremal_differential(z, z)?.norm().sqrt() - rho).abs();
                table.push_row(vec![z.re, z.im, rho, s.re, s.im, nan, c_def, phi_def]);
            }
        }
        OracleSpec::Halfplane { omega } => {
            let h = HalfPlane::new(c(omega))?;
            let e = 1e3;
            for z in points.resolve(|z| h.contains(z), [-e, e, -e, e]) {
                let rho = h.density(z)?;
                let s = h.szego(z, a)?;
                let f_def = if z == a {
                    nan
                } else {
                    let f = h.ahlfors(z, a)?;
                    (f - s / h.garabedian(z, a)?).norm() / f.norm().max(f64::MIN_POSITIVE)
                };
                let c_def = (2.0 * PI * h.szego(z, z)?.re - rho).abs() / rho;
                let phi_def = (h.extremal_differential(z, z)?.norm().sqrt() - rho).abs() / rho;
                table.push_row(vec![z.re, z.im, rho, s.re, s.im, f_def, c_def, phi_def]);
            }
            table.set_meta("omega", omega.to_vec());
        }
        OracleSpec::Annulus { r } => {
            let spec = AnnulusSpec::new(r)?;
            for z in points.resolve(|z| spec.contains(z), [-1.0, 1.0, -1.0, 1.0]) {
                table.push_row(vec![
                    z.re,
                    z.im,
                    spec.hyperbolic(z)?,
                    nan,
                    nan,
                    nan,
                    nan,
                    nan,
                ]);
            }
            table.set_meta("annulus_r", r);
        }
    }
    table.set_meta("a", vec![a.re, a.im]);
    Ok(table)
}

fn run_domain(spec: &DomainSpec, samples: usize) -> Result<SweepTable> {
    let d = PlanarDomain::from_spec(spec)?;
    let mut table = SweepTable::new(["curve", "t", "x", "y", "normal_x", "normal_y", "curvature"]);
    for curve in 0..d.curve_count() {
        for k in 0..samples {
            let t = TAU * k as f64 / samples as f64;
            let p = d.boundary_point(curve, t)?;
            table.push_row(vec![
                curve as f64,
                t,
                p.position.re,
                p.position.im,
                p.outward_normal.re,
                p.outward_normal.im,
                p.curvature,
            ]);
        }
    }
    table.set_meta("domain", serde_json::to_value(d.to_spec())?);
    table.set_meta("domain_hash", domain_hash(&d));
    table.set_meta("simply_connected", d.is_simply_connected());
    table.set_meta("reach", d.reach());
    table.set_meta("interior_reference", {
        let z = d.interior_reference();
        vec![z.re, z.im]
    });
    Ok(table)
}

fn run_kernel(
    spec: &DomainSpec,
    a: Complex64,
    points: &PointSet,
    solver: SolverConfig,
) -> Result<SweepTable> {
    let d = PlanarDomain::from_spec(spec)?;
    let pts = points.resolve_in(&d)?;
    let mut targets = pts.clone();
    targets.push(a);
    // Uniform systems report degraded points through the flag column.
    let sys = match solver {
        SolverConfig::Uniform { nodes_per_curve } => SzegoSystem::build(&d, nodes_per_curve)?,
        SolverConfig::Graded { .. } => solver.solver().build(&d, &targets)?,
    };
    let mut table = SweepTable::new([
        "z_re", "z_im", "S_re", "S_im", "L_re", "L_im", "f_re", "f_im", "flag",
    ]);
    for z in pts {
        let s = sys.szego(z, a)?;
        let (l, f) = if z == a {
            (Complex64::new(f64::NAN, f64::NAN), Complex64::new(0.0, 0.0))
        } else {
            (sys.garabedian(z, a)?.value, sys.ahlfors(z, a)?.value)
        };
        let flag = if s.accuracy.is_degraded() { 1.0 } else { 0.0 };
        table.push_row(vec![
            z.re, z.im, s.value.re, s.value.im, l.re, l.im, f.re, f.im, flag,
        ]);
    }
    table.set_meta("domain_hash", domain_hash(&d));
    table.set_meta("a", vec![a.re, a.im]);
    table.set_meta("solver", solver.solver().describe());
    table.set_meta("nodes", sys.nodes().len());
    Ok(table)
}

fn run_kernel_check(n: usize, a: Complex64, points: &PointSet) -> Result<SweepTable> {
    let d = PlanarDomain::disk();
    let sys = SzegoSystem::build(&d, n)?;
    let mut table = SweepTable::new(["x", "y", "relative_error"]);
    for z in points.resolve_in(&d)? {
        let want = disk_szego(z, a)?;
        let got = sys.szego(z, a)?;
        if got.accuracy.is_degraded() {
            return Err(Error::Degraded {
                z,
                min_nodes: sys.min_nodes_for(z),
            });
        }
        table.push_row(vec![z.re, z.im, (got.value - want).norm() / want.norm()]);
    }
    let worst = table
        .column("relative_error")
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    table.set_meta("max_relative_error", worst);
    table.set_meta("nodes_per_curve", n);
    table.set_meta("a", vec![a.re, a.im]);
    Ok(table)
}

fn run_metric_check(
    spec: &DomainSpec,
    points: &PointSet,
    solver: SolverConfig,
) -> Result<SweepTable> {
    let d = PlanarDomain::from_spec(spec)?;
    let pts = points.resolve_in(&d)?;
    let dist = |z: Complex64| d.signed_distance(z).map(|r| -r.psi);
    let mut targets = Vec::new();
    for &z in &pts {
        targets.extend(eta_targets(z, dist(z)?));
    }
    let model = SweepDomain::from_spec(spec)?.model(&targets, &solver.solver())?;
    let report = bilipschitz_check(&model, &pts)?;
    let mut table = SweepTable::new(["x", "y", "eta", "distance", "eta_times_distance"]);
    for [x, y, e, r] in &report.samples {
        table.push_row(vec![*x, *y, *e, *r, e * r]);
    }
    table.set_meta("metric", "hurwitz");
    table.set_meta("domain_hash", domain_hash(&d));
    table.set_meta("violations", 0);
    table.set_meta("min_ratio", report.min_ratio);
    table.set_meta("max_ratio", report.max_ratio);
    Ok(table)
}

fn hausdorff_table(
    seq: &crate::scaling::ScalingSequence,
    r: f64,
    first: usize,
) -> Result<SweepTable> {
    let mut table = SweepTable::new(["delta", "j", "hausdorff_d", "hausdorff_resolved"]);
    for j in first..seq.len() {
        let h = hausdorff_to_limit(seq, j, r)?;
        table.push_row(vec![
            seq.delta(j),
            j as f64,
            h.d,
            if h.resolved { 1.0 } else { 0.0 },
        ]);
    }
    table.extrapolate("delta");
    if let Some(row) = table.extrapolated.as_mut() {
        row[1] = f64::NAN;
        row[3] = f64::NAN;
    }
    table.set_meta("domain_hash", domain_hash(seq.domain()));
    table.set_meta("curve", seq.boundary_point().curve);
    table.set_meta("t", seq.boundary_point().t);
    table.set_meta("window_radius", r);
    Ok(table)
}

fn run_curvature_grid(
    spec: &DomainSpec,
    orders: &[usize],
    points: &PointSet,
    solver: SolverConfig,
) -> Result<SweepTable> {
    let d = PlanarDomain::from_spec(spec)?;
    let pts = points.resolve_in(&d)?;
    let sys = solver.solver().build(&d, &pts)?;
    let mut table = SweepTable::new(
        ["x", "y"]
            .into_iter()
            .map(String::from)
            .chain(orders.iter().map(|n| format!("kappa_{n}"))),
    );
    let rows = pts
        .par_iter()
        .map(|&z| {
            let mut row = vec![z.re, z.im];
            for &n in orders {
                row.push(kappa_n(&sys, z, n)?.kappa);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    for row in rows {
        table.push_row(row);
    }
    table.set_meta("domain_hash", domain_hash(&d));
    table.set_meta("solver", solver.solver().describe());
    table.set_meta("nodes", sys.nodes().len());
    Ok(table)
}

fn run_l1_norm(oracle: OracleSpec, base: Complex64, radius: f64) -> Result<SweepTable> {
    let model = match oracle {
        OracleSpec::Disk {} => ConformalModel::Disk,
        OracleSpec::Halfplane { omega } => ConformalModel::HalfPlane(HalfPlane::new(c(omega))?),
        OracleSpec::Annulus { .. } => {
            return Err(Error::Unsupported(
                "no extremal differential on the annulus".into(),
            ))
        }
    };
    let rep = l1_norm(&extremal_differential(&model, base)?, radius)?;
    let mut t = SweepTable::new([
        "truncation_radius",
        "l1_norm",
        "tail_bound",
        "quadrature_error",
    ]);
    t.push_row(vec![
        rep.truncation_radius,
        rep.value,
        rep.tail_bound,
        rep.quadrature_error,
    ]);
    t.set_meta("base", vec![base.re, base.im]);
    t.set_meta("expected", PI);
    Ok(t)
}

#[allow(clippy::too_many_arguments)]
fn run_scale_report(
    spec: &DomainSpec,
    curve: usize,
    t: f64,
    delta0: f64,
    count: usize,
    r: f64,
    first: usize,
    kernels: bool,
) -> Result<SweepTable> {
    let d = PlanarDomain::from_spec(spec)?;
    let seq = make_sequence_on(&d, curve, t, delta0, count)?;
    if !kernels {
        return hausdorff_table(&seq, r, first);
    }
    let grid = default_kernel_grid(&seq);
    let mut full = scale_report(
        &seq,
        r,
        Complex64::new(0.0, 0.0),
        &grid,
        GradingOptions::default(),
    )?;
    if first > 0 {
        full.rows.drain(..first);
        full.extrapolate("delta");
        if let Some(row) = full.extrapolated.as_mut() {
            row[1] = f64::NAN;
        }
    }
    Ok(full)
}

/// Cases cycle through the disk and annulus hyperbolic densities, a
/// half-plane density and the transported Sugawa density of an ellipse.
fn run_heins_invariance(cases: usize, seed: u64) -> Result<SweepTable> {
    struct Case {
        t: f64,
        delta0: f64,
        j: usize,
        r: f64,
        shape: f64,
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<Case> = (0..cases)
        .map(|_| Case {
            t: rng.random_range(0.0..TAU),
            delta0: rng.random_range(0.05..0.2),
            j: rng.random_range(0..6usize),
            r: rng.random_range(0.1..0.5),
            shape: rng.random_range(0.2..0.5),
        })
        .collect();
    let ellipse = PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 })?;
    let mut ellipse_cases = Vec::new();
    let mut targets = Vec::new();
    for (k, p) in params.iter().enumerate().filter(|(k, _)| k % 4 == 3) {
        let seq = make_sequence_on(&ellipse, 0, p.t, p.delta0, 6)?;
        let (z, d) = (seq.point(p.j), seq.delta(p.j));
        for radius in [p.r * d, p.r * d * d] {
            targets.extend((0..heins::DEFAULT_NODES).map(|i| {
                z + Complex64::from_polar(radius, TAU * i as f64 / heins::DEFAULT_NODES as f64)
            }));
        }
        targets.push(z);
        ellipse_cases.push((k, seq));
    }
    let q = if ellipse_cases.is_empty() {
        None
    } else {
        let model = SweepDomain::Fourier(ellipse).model(&targets, &SweepSolver::default())?;
        Some(crate::sugawa::q_evaluator(&model))
    };
    let mut table = SweepTable::new(["case", "family", "j", "r", "defect", "mismatched_defect"]);
    for (k, p) in params.iter().enumerate() {
        let (center, d, rho) = match k % 4 {
            0 => {
                let seq = make_sequence_on(&PlanarDomain::disk(), 0, p.t, p.delta0, 6)?;
                (seq.point(p.j), seq.delta(p.j), DensityEvaluator::disk())
            }
            1 => {
                let spec = AnnulusSpec::new(p.shape)?;
                let dom = PlanarDomain::from_spec(&DomainSpec::Annulus { r: p.shape })?;
                // probes off the inner circle; depths scale with its radius to stay within reach
                let seq = make_sequence_on(&dom, 0, p.t, p.delta0 * p.shape, 6)?;
                (
                    seq.point(p.j),
                    seq.delta(p.j),
                    DensityEvaluator::annulus_hyperbolic(spec),
                )
            }
            2 => {
                let omega = Complex64::from_polar(1.0 / p.shape, p.t);
                let h = HalfPlane::new(omega)?;
                let d = p.delta0 * 0.5f64.powi(p.j as i32);
                let center = omega / omega.norm_sqr() - d * omega / omega.norm();
                (center, d, DensityEvaluator::half_plane(h))
            }
            _ => {
                let seq = &ellipse_cases
                    .iter()
                    .find(|(i, _)| *i == k)
                    .expect("ellipse case")
                    .1;
                (
                    seq.point(p.j),
                    seq.delta(p.j),
                    q.clone().expect("ellipse model"),
                )
            }
        };
        let defect = invariance_defect(&rho, center, d, p.r * d, p.r, heins::DEFAULT_NODES)?;
        let mismatched =
            invariance_defect(&rho, center, d, p.r * d, p.r * d, heins::DEFAULT_NODES)?;
        table.push_row(vec![
            k as f64,
            (k % 4) as f64,
            p.j as f64,
            p.r,
            defect,
            mismatched,
        ]);
    }
    let worst = table
        .column("defect")
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    table.set_meta("max_defect", worst);
    table.set_meta(
        "families",
        vec!["disk", "annulus", "halfplane", "ellipse_sugawa"],
    );
    table.set_meta("seed", seed);
    Ok(table)
}

/// Parses, validates and runs a configuration, writing the CSV when an
/// output path is configured.
pub fn run(config: &ExperimentConfig) -> Result<SweepTable> {
    config.experiment.validate()?;
    let table = config.experiment.run()?;
    if let Some(path) = &config.out {
        table.write_csv(path)?;
    }
    Ok(table)
}
