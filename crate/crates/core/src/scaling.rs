//! Scaling sequences `T_j(z) = (z − p_j)/δ_j` at a boundary point, the scaled
//! domains `D_j`, their local Hausdorff distance to the limit half-plane, and
//! convergence of densities and kernels along the sequence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::DensityEvaluator;
use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, BoundaryPointData, PlanarDomain};
use crate::nearest::PointIndex;
use crate::oracles::HalfPlane;
use crate::sweep::{domain_hash, geometric_deltas, SweepSolver, SweepTable};
use crate::szego::GradingOptions;

/// Default window radius for local Hausdorff distances.
pub const DEFAULT_WINDOW: f64 = 5.0;
/// Boundary samples are spaced `R · SAMPLE_FRACTION` apart.
pub const SAMPLE_FRACTION: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct ScalingSequence {
    domain: PlanarDomain,
    p: BoundaryPointData,
    deltas: Vec<f64>,
    points: Vec<Complex64>,
    limit: HalfPlane,
}

impl ScalingSequence {
    pub fn domain(&self) -> &PlanarDomain {
        &self.domain
    }

    pub fn boundary_point(&self) -> &BoundaryPointData {
        &self.p
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn delta(&self, j: usize) -> f64 {
        self.deltas[j]
    }

    /// `p_j = p − δ_j ω`.
    pub fn point(&self, j: usize) -> Complex64 {
        self.points[j]
    }

    /// Limit half-plane `{Re(ω̄z) < 1}`.
    pub fn limit(&self) -> HalfPlane {
        self.limit
    }

    /// `T_j(z) = (z − p_j)/δ_j`.
    pub fn map(&self, j: usize, z: Complex64) -> Complex64 {
        (z - self.points[j]) / self.deltas[j]
    }

    pub fn inverse_map(&self, j: usize, u: Complex64) -> Complex64 {
        self.points[j] + self.deltas[j] * u
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.len() {
            return Err(Error::domain(format!(
                "index {j} out of range for {} depths",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Sequence at `γ_curve(t)` with `δ_j = delta0·2^{−j}`, `j < count`.
pub fn make_sequence_on(
    domain: &PlanarDomain,
    curve: usize,
    t: f64,
    delta0: f64,
    count: usize,
) -> Result<ScalingSequence> {
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    let p = domain.boundary_point(curve, t)?;
    let deltas = geometric_deltas(delta0, count);
    let points = deltas
        .iter()
        .map(|&d| domain.normal_probe(&p, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingSequence {
        domain: domain.clone(),
        limit: HalfPlane::new(p.outward_normal)?,
        p,
        deltas,
        points,
    })
}

/// Sequence on the outer boundary curve.
pub fn make_sequence(
    domain: &PlanarDomain,
    t: f64,
    delta0: f64,
    count: usize,
) -> Result<ScalingSequence> {
    make_sequence_on(domain, 0, t, delta0, count)
}

/// `D_j = T_j(D)`.
pub fn scaled_domain(seq: &ScalingSequence, j: usize) -> Result<PlanarDomain> {
    seq.check_index(j)?;
    let s = 1.0 / seq.deltas[j];
    Ok(seq
        .domain
        .affine_image(Complex64::new(s, 0.0), -seq.points[j] * s))
}

/// `ρ(p_j)·δ_j`, the density of `(T_j)_*ρ` at the origin.
pub fn pullback_density(seq: &ScalingSequence, j: usize, rho: &DensityEvaluator) -> Result<f64> {
    seq.check_index(j)?;
    Ok(rho.eval(seq.points[j])? * seq.deltas[j])
}

/// A closed planar set for Hausdorff comparisons.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    Domain(&'a PlanarDomain),
    HalfPlane(&'a HalfPlane),
}

impl Region<'_> {
    fn contains(&self, z: Complex64) -> bool {
        match self {
            Region::Domain(d) => d.contains(z),
            Region::HalfPlane(h) => h.level(z) <= 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HausdorffReport {
    pub j: Option<usize>,
    pub r: f64,
    pub d: f64,
    pub sample_resolution: f64,
    /// `sample_resolution ≤ d/10`; otherwise `d` is only known to lie below
    /// `10·sample_resolution`.
    pub resolved: bool,
}

/// Closure of a region clipped to `B̄(0,R)`, with boundary samples in a kd-tree.
struct ClippedSet<'a> {
    region: Region<'a>,
    r: f64,
    spacing: f64,
    tree: PointIndex,
    samples: Vec<Complex64>,
    /// Samples of the region's own boundary (without the clipping arc).
    curve_tree: Option<PointIndex>,
    /// Outward unit normals at the boundary samples (the first entries of `samples`).
    normals: Vec<Complex64>,
}

impl<'a> ClippedSet<'a> {
    fn new(region: Region<'a>, r: f64, spacing: f64) -> Result<Self> {
        let mut samples = Vec::new();
        let mut normals = Vec::new();
        match region {
            Region::Domain(d) => {
                for c in d.curves() {
                    sample_curve_in_ball(c, r, spacing, &mut samples, &mut normals);
                }
            }
            Region::HalfPlane(h) => {
                let w = h.omega();
                let foot = w / w.norm_sqr();
                let dir = Complex64::new(0.0, 1.0) * w / w.norm();
                let f = foot.norm();
                if f <= r {
                    let half = (r * r - f * f).sqrt();
                    let m = (2.0 * half / spacing).ceil().max(1.0) as usize;
                    for i in 0..=m {
                        let p = foot + dir * (-half + 2.0 * half * i as f64 / m as f64);
                        samples.push(p);
                        normals.push(w / w.norm());
                    }
                }
            }
        }
        let curve_tree = if samples.is_empty() {
            None
        } else {
            Some(PointIndex::new(&samples)?)
        };
        let arcs = sample_arcs(&region, r, spacing, curve_tree.as_ref());
        samples.extend(arcs);
        if samples.is_empty() {
            return Err(Error::domain(format!(
                "clipped set is empty in the window of radius {r}; distance undefined"
            )));
        }
        let tree = PointIndex::new(&samples)?;
        Ok(Self {
            region,
            r,
            spacing,
            tree,
            samples,
            curve_tree,
            normals,
        })
    }

    fn contains(&self, z: Complex64) -> bool {
        z.norm() <= self.r && self.region_side(z).0
    }

    /// Membership in the unclipped region and the distance to the nearest
    /// boundary sample. Away from the boundary the side is read off the normal
    /// at the nearest sample; the nearest boundary point then lies in the
    /// sampled window, so the test is exact.
    fn region_side(&self, z: Complex64) -> (bool, f64) {
        let Some(t) = &self.curve_tree else {
            return (self.region.contains(z), f64::INFINITY);
        };
        let (i, d) = t.nearest(z);
        if matches!(self.region, Region::Domain(_))
            && d > 4.0 * self.spacing
            && z.norm() + d < self.r
        {
            let s = self.samples[i];
            let n = self.normals[i];
            return ((z - s).re * n.re + (z - s).im * n.im < 0.0, d);
        }
        (self.region.contains(z), d)
    }

    fn nearest(&self, z: Complex64) -> (Complex64, f64) {
        let (i, d) = self.tree.nearest(z);
        (self.samples[i], d)
    }

    /// Whether the disk `B(z, rad)` lies in the (unclipped) region.
    fn region_contains_disk(&self, z: Complex64, rad: f64) -> bool {
        let (inside, d) = self.region_side(z);
        inside && d > rad + self.spacing
    }

    /// Distance to the set (0 inside), overestimated by at most half a sample spacing.
    fn dist(&self, z: Complex64) -> f64 {
        if self.contains(z) {
            0.0
        } else {
            self.nearest(z).1
        }
    }
}

/// Points of `γ` inside `B̄(0,R)` with spacing at most `spacing`; intervals
/// that provably stay outside the ball are skipped.
fn sample_curve_in_ball(
    c: &BoundaryCurve,
    r: f64,
    spacing: f64,
    out: &mut Vec<Complex64>,
    normals: &mut Vec<Complex64>,
) {
    let speed = c.speed_bound();
    let m0 = 64 * (2 * c.max_mode() + 1);
    let mut stack: Vec<(f64, f64)> = (0..m0)
        .rev()
        .map(|i| (TAU * i as f64 / m0 as f64, TAU * (i + 1) as f64 / m0 as f64))
        .collect();
    while let Some((a, b)) = stack.pop() {
        let mid = 0.5 * (a + b);
        let pm = c.point(mid);
        if pm.norm() - speed * 0.5 * (b - a) > r {
            continue;
        }
        if speed * (b - a) <= 2.0 * spacing {
            for t in [a, mid] {
                let p = c.point(t);
                if p.norm() <= r {
                    out.push(p);
                    normals.push(c.right_normal(t));
                }
            }
            continue;
        }
        stack.push((mid, b));
        stack.push((a, mid));
    }
}

/// Points of the circle `|z| = R` lying in the region, with spacing at most
/// `spacing`. Arcs far from the region's boundary samples are classified by a
/// single containment test.
fn sample_arcs(
    region: &Region<'_>,
    r: f64,
    spacing: f64,
    boundary: Option<&PointIndex>,
) -> Vec<Complex64> {
    let boundary_dist = |z: Complex64| -> f64 {
        match boundary {
            None => f64::INFINITY,
            Some(t) => t.nearest(z).1,
        }
    };
    let at = |th: f64| Complex64::from_polar(r, th);
    let m0 = 256;
    let mut out = Vec::new();
    let mut stack: Vec<(f64, f64, bool, bool)> = Vec::new();
    let inside: Vec<bool> = (0..=m0)
        .map(|i| region.contains(at(TAU * i as f64 / m0 as f64)))
        .collect();
    for i in (0..m0).rev() {
        stack.push((
            TAU * i as f64 / m0 as f64,
            TAU * (i + 1) as f64 / m0 as f64,
            inside[i],
            inside[i + 1],
        ));
    }
    while let Some((a, b, ia, ib)) = stack.pop() {
        let len = r * (b - a);
        let mid = 0.5 * (a + b);
        let clear = boundary_dist(at(mid)) > 0.5 * len + spacing;
        if clear && ia == ib {
            if ia {
                let m = (len / spacing).ceil().max(1.0) as usize;
                for k in 0..m {
                    let p = at(a + (b - a) * k as f64 / m as f64);
                    out.push(p);
                }
            }
            continue;
        }
        if len <= spacing {
            if ia {
                let p = at(a);
                out.push(p);
            }
            continue;
        }
        let im = region.contains(at(mid));
        stack.push((mid, b, im, ib));
        stack.push((a, mid, ia, im));
    }
    out
}

#[derive(PartialEq)]
struct Cell {
    upper: f64,
    center: Complex64,
    half: f64,
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

/// Relative branch-and-bound tolerance.
const RELATIVE_TOL: f64 = 0.01;
const COARSE_FACTORS: [f64; 2] = [100.0, 10.0];

/// `sup_{x ∈ X} dist(x, Y)` by best-first branch and bound over a quadtree
/// of the window, using that `dist(·, Y)` is 1-Lipschitz. Stops once the
/// bound gap is below `max(tol, RELATIVE_TOL·best)`. Cells bounded by
/// `floor`, a known lower bound for the Hausdorff distance, are pruned.
fn directed_distance(x: &ClippedSet<'_>, y: &ClippedSet<'_>, tol: f64, floor: f64) -> (f64, f64) {
    let slack = x.spacing;
    let mut best: f64 = floor;
    let mut bound: f64 = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Cell {
        upper: f64::INFINITY,
        center: Complex64::new(0.0, 0.0),
        half: x.r,
    });
    while let Some(cell) = heap.pop() {
        if cell.upper <= best + tol.max(RELATIVE_TOL * best) {
            bound = bound.max(cell.upper);
            break;
        }
        let rad = cell.half * std::f64::consts::SQRT_2;
        let dx = x.dist(cell.center);
        if dx > rad + slack {
            continue;
        }
        // X^R lies in the window, so only Y's own boundary matters here.
        if y.region_contains_disk(cell.center, rad) {
            continue;
        }
        let in_y = y.contains(cell.center);
        let g = if in_y { 0.0 } else { y.nearest(cell.center).1 };
        if dx == 0.0 {
            best = best.max(g);
        } else {
            let (s, _) = x.nearest(cell.center);
            best = best.max(y.dist(s));
        }
        let upper = g + rad;
        // Below the sample spacing the samples cannot separate further.
        if upper <= best + tol.max(RELATIVE_TOL * best) || rad <= slack {
            bound = bound.max(upper);
            continue;
        }
        let h = 0.5 * cell.half;
        for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            heap.push(Cell {
                upper,
                center: cell.center + Complex64::new(sx * h, sy * h),
                half: h,
            });
        }
    }
    (best, bound.max(best))
}

/// `d_H(A ∩ B̄(0,R), B ∩ B̄(0,R))` for closures of the two regions.
pub fn local_hausdorff(a: Region<'_>, b: Region<'_>, r: f64) -> Result<HausdorffReport> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Config(format!(
            "window radius must be positive, got {r}"
        )));
    }
    let spacing = r * SAMPLE_FRACTION;
    let tol = spacing;
    let sa = ClippedSet::new(a, r, spacing)?;
    let sb = ClippedSet::new(b, r, spacing)?;
    // Passes of decreasing tolerance bracket the answer. Each lower bound lets
    // the next pass prune the direction that does not attain the maximum; once
    // the upper bound is too small to be resolved, refining stops.
    let mut lower = 0.0;
    let mut result = None;
    for factor in COARSE_FACTORS {
        let pass_tol = factor * tol;
        let ((la, ua), (lb, ub)) = rayon::join(
            || directed_distance(&sa, &sb, pass_tol, lower),
            || directed_distance(&sb, &sa, pass_tol, lower),
        );
        lower = la.max(lb);
        let upper = ua.max(ub);
        if upper < 10.0 * (spacing + tol) {
            result = Some((lower, spacing + (upper - lower)));
            break;
        }
    }
    let (d, sample_resolution) = match result {
        Some(r) => r,
        None => {
            let ((da, _), (db, _)) = rayon::join(
                || directed_distance(&sa, &sb, tol, lower),
                || directed_distance(&sb, &sa, tol, lower),
            );
            let d = da.max(db);
            (d, spacing + tol.max(RELATIVE_TOL * d))
        }
    };
    Ok(HausdorffReport {
        j: None,
        r,
        d,
        sample_resolution,
        resolved: sample_resolution <= d / 10.0,
    })
}

/// `d_H^{(R)}(D_j, ℋ)`.
pub fn hausdorff_to_limit(seq: &ScalingSequence, j: usize, r: f64) -> Result<HausdorffReport> {
    let dj = scaled_domain(seq, j)?;
    let hp = seq.limit();
    let mut rep = local_hausdorff(Region::Domain(&dj), Region::HalfPlane(&hp), r)?;
    rep.j = Some(j);
    Ok(rep)
}

/// Sup-norm deviations of the scaled kernels from the half-plane formulas on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelConvergence {
    pub j: usize,
    pub delta: f64,
    pub sup_s: f64,
    pub sup_f: f64,
    pub sup_l: f64,
}

/// Solves on `D_j` (graded toward the grid and `a`) and compares `S`, `f`,
/// `L` with the half-plane kernels. `L` is compared only away from `a`.
pub fn kernel_convergence_report(
    seq: &ScalingSequence,
    j: usize,
    a: Complex64,
    grid: &[Complex64],
    options: GradingOptions,
) -> Result<KernelConvergence> {
    let dj = scaled_domain(seq, j)?;
    let hp = seq.limit();
    for &z in grid.iter().chain(std::iter::once(&a)) {
        if !hp.contains(z) {
            return Err(Error::domain(format!(
                "grid point {z} is not in the limit half-plane"
            )));
        }
        if !dj.contains(z) {
            return Err(Error::domain(format!(
                "grid point {z} is not yet contained in the scaled domain D_{j}"
            )));
        }
    }
    let mut targets = grid.to_vec();
    targets.push(a);
    let sys = SweepSolver::Graded(options).build(&dj, &targets)?;
    let mut out = KernelConvergence {
        j,
        delta: seq.delta(j),
        sup_s: 0.0,
        sup_f: 0.0,
        sup_l: 0.0,
    };
    for &z in grid {
        let s = sys.szego(z, a)?.value;
        out.sup_s = out.sup_s.max((s - hp.szego(z, a)?).norm());
        let f = sys.ahlfors(z, a)?.value;
        out.sup_f = out.sup_f.max((f - hp.ahlfors(z, a)?).norm());
        if z != a {
            let l = sys.garabedian(z, a)?.value;
            out.sup_l = out.sup_l.max((l - hp.garabedian(z, a)?).norm());
        }
    }
    Ok(out)
}

/// Default compact set `{0, ±0.5i, −1}` rotated to the limit normal, and base point 0.
pub fn default_kernel_grid(seq: &ScalingSequence) -> Vec<Complex64> {
    let w = seq.limit().omega() / seq.limit().omega().norm();
    [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.5),
        Complex64::new(0.0, -0.5),
        Complex64::new(-1.0, 0.0),
    ]
    .iter()
    .map(|z| z * w)
    .collect()
}

/// Per-depth Hausdorff distances and kernel deviations.
pub fn scale_report(
    seq: &ScalingSequence,
    r: f64,
    a: Complex64,
    grid: &[Complex64],
    options: GradingOptions,
) -> Result<SweepTable> {
    let rows: Vec<Vec<f64>> = (0..seq.len())
        .into_par_iter()
        .map(|j| {
            let h = hausdorff_to_limit(seq, j, r)?;
            let k = kernel_convergence_report(seq, j, a, grid, options)?;
            Ok(vec![seq.delta(j), j as f64, h.d, k.sup_s, k.sup_f, k.sup_l])
        })
        .collect::<Result<_>>()?;
    let mut table = SweepTable::new(["delta", "j", "hausdorff_d", "sup_S", "sup_f", "sup_L"]);
    for row in rows {
        table.push_row(row);
    }
    table.extrapolate("delta");
    if let Some(row) = table.extrapolated.as_mut() {
        row[1] = f64::NAN;
    }
    table.set_meta("experiment", "scale_report");
    table.set_meta("domain_hash", domain_hash(seq.domain()));
    table.set_meta("curve", seq.boundary_point().curve);
    table.set_meta("t", seq.boundary_point().t);
    table.set_meta("window_radius", r);
    table.set_meta("hausdorff_sample_resolution", 2.0 * r * SAMPLE_FRACTION);
    table.set_meta("a", vec![a.re, a.im]);
    Ok(table)
}
