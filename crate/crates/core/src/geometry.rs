//! Fourier-parameterized boundary curves and the bounded planar domains they
//! enclose, with the signed-distance defining function, outward normals and
//! inward normal probes.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Size of the coarse parameter scan that seeds the nearest-point Newton iteration.
const COARSE_SCAN: usize = 64;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Positive,
    Negative,
}

/// Closed curve `γ(t) = Σ_{k=-K}^{K} c_k e^{ikt}`, `t ∈ [0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurve {
    /// `coeffs[k + K]` holds `c_k`.
    coeffs: Vec<Complex64>,
    max_mode: usize,
    orientation: Orientation,
    /// Upper bound for `|γ'(t)|`, used to size adaptive parameter steps.
    speed_bound: f64,
}

impl BoundaryCurve {
    /// Builds a curve from coefficients `c_{-K}..=c_K` and checks that it is
    /// regular and simple on a fine grid.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        let curve = Self::new_unchecked(coeffs)?;
        curve.validate()?;
        Ok(curve)
    }

    /// Builds a curve from explicit `(k, c_k)` modes.
    pub fn from_modes(modes: &[(i32, Complex64)]) -> Result<Self> {
        let k_max = modes
            .iter()
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k_max + 1];
        for &(k, c) in modes {
            coeffs[(k + k_max as i32) as usize] += c;
        }
        Self::new(coeffs)
    }

    fn new_unchecked(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) || coeffs.is_empty() {
            return Err(Error::construction(
                "coefficient layout",
                format!("expected 2K+1 coefficients, got {}", coeffs.len()),
            ));
        }
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::construction(
                "coefficient layout",
                "non-finite coefficient",
            ));
        }
        let max_mode = coeffs.len() / 2;
        let speed_bound = coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| (idx as f64 - max_mode as f64).abs() * c.norm())
            .sum();
        let area = signed_area_of(&coeffs, max_mode);
        let orientation = if area >= 0.0 {
            Orientation::Positive
        } else {
            Orientation::Negative
        };
        Ok(Self {
            coeffs,
            max_mode,
            orientation,
            speed_bound,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.speed_bound == 0.0 {
            return Err(Error::construction("regularity", "constant curve"));
        }
        let m = self.check_grid_size();
        let mut min_speed = f64::INFINITY;
        let mut max_speed: f64 = 0.0;
        let pts: Vec<Complex64> = (0..m)
            .map(|i| {
                let t = TAU * i as f64 / m as f64;
                let [p, d, _] = self.eval3(t);
                min_speed = min_speed.min(d.norm());
                max_speed = max_speed.max(d.norm());
                p
            })
            .collect();
        if min_speed <= 1e-8 * max_speed {
            return Err(Error::construction(
                "regularity",
                format!("|γ'(t)| = {min_speed:e} vanishes on the check grid"),
            ));
        }
        if let Some((i, j)) = first_polyline_crossing(&pts, &pts, true) {
            return Err(Error::construction(
                "simplicity",
                format!("check-grid segments {i} and {j} intersect"),
            ));
        }
        Ok(())
    }

    pub(crate) fn check_grid_size(&self) -> usize {
        (32 * (2 * self.max_mode + 1)).max(1024)
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient `c_k`, zero outside the stored range.
    pub fn coefficient(&self, k: i32) -> Complex64 {
        let idx = k + self.max_mode as i32;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn speed_bound(&self) -> f64 {
        self.speed_bound
    }

    pub fn signed_area(&self) -> f64 {
        signed_area_of(&self.coeffs, self.max_mode)
    }

    pub fn point(&self, t: f64) -> Complex64 {
        self.eval_derivative(t, 0)
    }

    /// `d^m γ / dt^m` at `t`, by termwise differentiation.
    pub fn eval_derivative(&self, t: f64, order: u32) -> Complex64 {
        let k_max = self.max_mode as i32;
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, c) in self.coeffs.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let k = idx as i32 - k_max;
            let factor = (I * k as f64).powu(order);
            acc += c * factor * Complex64::from_polar(1.0, k as f64 * t);
        }
        acc
    }

    /// `[γ(t), γ'(t), γ''(t)]`.
    pub fn eval3(&self, t: f64) -> [Complex64; 3] {
        let k_max = self.max_mode as i32;
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (idx, c) in self.coeffs.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let k = idx as f64 - k_max as f64;
            let term = c * Complex64::from_polar(1.0, k * t);
            out[0] += term;
            out[1] += term * I * k;
            out[2] -= term * k * k;
        }
        out
    }

    /// Signed curvature with respect to the curve's own direction of travel.
    pub fn curvature(&self, t: f64) -> f64 {
        let [_, d1, d2] = self.eval3(t);
        (d1.conj() * d2).im / d1.norm().powi(3)
    }

    pub fn unit_tangent(&self, t: f64) -> Complex64 {
        let d = self.eval_derivative(t, 1);
        d / d.norm()
    }

    /// Right-hand normal `-iT`; it points out of the region lying to the left of the curve.
    pub fn right_normal(&self, t: f64) -> Complex64 {
        -I * self.unit_tangent(t)
    }

    /// Same curve traversed backwards (`c_k ↦ c_{-k}`).
    pub fn reversed(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        let mut out = self.clone();
        out.coeffs = coeffs;
        out.orientation = match self.orientation {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        };
        out
    }

    /// Image under `z ↦ scale·z + shift`; regularity, simplicity and orientation
    /// are preserved for `scale ≠ 0`.
    pub fn affine_image(&self, scale: Complex64, shift: Complex64) -> Self {
        let mut coeffs: Vec<Complex64> = self.coeffs.iter().map(|c| c * scale).collect();
        coeffs[self.max_mode] += shift;
        let mut out = self.clone();
        out.coeffs = coeffs;
        out.speed_bound = self.speed_bound * scale.norm();
        out
    }

    pub fn sample(&self, m: usize) -> Vec<Complex64> {
        (0..m)
            .map(|i| self.point(TAU * i as f64 / m as f64))
            .collect()
    }

    /// Winding number of the curve around `z`, computed by summing angle
    /// increments over adaptively refined parameter intervals so that no
    /// single increment can exceed one radian. Points hit exactly by the
    /// curve get winding number 0.
    pub fn winding_number(&self, z: Complex64) -> i32 {
        let m = 8 * (2 * self.max_mode + 1).max(8);
        let dt = TAU / m as f64;
        let mut total = 0.0;
        let mut t0 = 0.0;
        let mut p0 = self.point(0.0);
        for i in 1..=m {
            let t1 = if i == m { TAU } else { dt * i as f64 };
            let p1 = self.point(t1);
            total += self.angle_increment(z, t0, t1, p0, p1, 0);
            t0 = t1;
            p0 = p1;
        }
        if total.is_nan() {
            return 0;
        }
        (total / TAU).round() as i32
    }

    fn angle_increment(
        &self,
        z: Complex64,
        t0: f64,
        t1: f64,
        p0: Complex64,
        p1: Complex64,
        depth: u32,
    ) -> f64 {
        let d = (p0 - z).norm().min((p1 - z).norm());
        if d == 0.0 {
            return f64::NAN;
        }
        let arc_bound = self.speed_bound * (t1 - t0);
        if arc_bound < 0.5 * d || depth > 60 {
            return ((p1 - z) / (p0 - z)).arg();
        }
        let tm = 0.5 * (t0 + t1);
        let pm = self.point(tm);
        self.angle_increment(z, t0, tm, p0, pm, depth + 1)
            + self.angle_increment(z, tm, t1, pm, p1, depth + 1)
    }

    /// Local nearest-point search: coarse scan seeds Newton's method on
    /// `t ↦ |z − γ(t)|²`. Returns `(distance, t, point, residual)` of the best
    /// converged candidate.
    fn nearest_point(&self, z: Complex64) -> std::result::Result<(f64, f64, Complex64), f64> {
        let n = COARSE_SCAN;
        let ts: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let d2: Vec<f64> = ts.iter().map(|&t| (z - self.point(t)).norm_sqr()).collect();
        let mut seeds: Vec<usize> = (0..n)
            .filter(|&i| d2[i] <= d2[(i + n - 1) % n] && d2[i] <= d2[(i + 1) % n])
            .collect();
        seeds.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]));

        let mut best: Option<(f64, f64, Complex64)> = None;
        let mut best_residual = f64::INFINITY;
        for &s in &seeds {
            match self.newton_nearest(z, ts[s]) {
                Ok((t, p)) => {
                    let dist = (z - p).norm();
                    if best.is_none_or(|(bd, _, _)| dist < bd) {
                        best = Some((dist, t, p));
                    }
                }
                Err(res) => best_residual = best_residual.min(res),
            }
        }
        best.ok_or(best_residual)
    }

    fn newton_nearest(
        &self,
        z: Complex64,
        t_start: f64,
    ) -> std::result::Result<(f64, Complex64), f64> {
        let max_step = 0.5 * TAU / COARSE_SCAN as f64;
        let mut t = t_start;
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let [p, d1, d2] = self.eval3(t);
            let r = z - p;
            let grad = -(r.conj() * d1).re;
            let scale = (d1.norm() * r.norm()).max(d1.norm_sqr()).max(1e-300);
            residual = grad.abs() / scale.max(1.0);
            if grad.abs() <= NEWTON_TOL * scale.max(1.0) {
                return Ok((t.rem_euclid(TAU), p));
            }
            let hess = d1.norm_sqr() - (r.conj() * d2).re;
            let step = if hess > 0.0 {
                grad / hess
            } else {
                grad / d1.norm_sqr()
            };
            t -= step.clamp(-max_step, max_step);
        }
        let [p, d1, _] = self.eval3(t);
        let r = z - p;
        let grad = (r.conj() * d1).re;
        let scale = (d1.norm() * r.norm()).max(1.0);
        if grad.abs() <= 1e3 * NEWTON_TOL * scale {
            return Ok((t.rem_euclid(TAU), p));
        }
        Err(residual)
    }
}

fn signed_area_of(coeffs: &[Complex64], max_mode: usize) -> f64 {
    PI * coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| (idx as f64 - max_mode as f64) * c.norm_sqr())
        .sum::<f64>()
}

fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    ((b - a).conj() * (c - a)).im
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// First intersecting pair of segments between two closed polylines. With
/// `same = true`, adjacent segments of a single polyline are skipped.
fn first_polyline_crossing(a: &[Complex64], b: &[Complex64], same: bool) -> Option<(usize, usize)> {
    let na = a.len();
    let nb = b.len();
    // Bounding boxes per block of segments keep this near-linear for well-separated curves.
    const BLOCK: usize = 16;
    let boxes = |pts: &[Complex64]| -> Vec<[f64; 4]> {
        let n = pts.len();
        (0..n.div_ceil(BLOCK))
            .map(|bi| {
                let mut bx = [
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                    f64::INFINITY,
                    f64::NEG_INFINITY,
                ];
                for i in bi * BLOCK..=((bi + 1) * BLOCK).min(n) {
                    let p = pts[i % n];
                    bx[0] = bx[0].min(p.re);
                    bx[1] = bx[1].max(p.re);
                    bx[2] = bx[2].min(p.im);
                    bx[3] = bx[3].max(p.im);
                }
                bx
            })
            .collect()
    };
    let ba = boxes(a);
    let bb = boxes(b);
    for (ia, bxa) in ba.iter().enumerate() {
        for (ib, bxb) in bb.iter().enumerate() {
            if bxa[1] < bxb[0] || bxb[1] < bxa[0] || bxa[3] < bxb[2] || bxb[3] < bxa[2] {
                continue;
            }
            for i in ia * BLOCK..((ia + 1) * BLOCK).min(na) {
                for j in ib * BLOCK..((ib + 1) * BLOCK).min(nb) {
                    if same {
                        let gap = (i as isize - j as isize).rem_euclid(na as isize) as usize;
                        if gap <= 1 || gap >= na - 1 {
                            continue;
                        }
                    }
                    if segments_cross(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]) {
                        return Some((i, j));
                    }
                }
            }
        }
    }
    None
}

/// Serializable description of a model domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {},
    Ellipse {
        a: f64,
        b: f64,
    },
    Annulus {
        r: f64,
    },
    Blob {
        preset: String,
    },
    /// Outer coefficients `c_{-K}..=c_K` as `[re, im]` pairs, plus optional holes.
    Fourier {
        coefficients: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        holes: Vec<Vec<[f64; 2]>>,
    },
}

pub const BLOB_PRESETS: &[&str] = &["bean", "egg"];

/// Bounded domain: a positively oriented outer curve and negatively oriented holes.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarDomain {
    outer: BoundaryCurve,
    holes: Vec<BoundaryCurve>,
}

/// Boundary point with its outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPointData {
    pub curve: usize,
    pub t: f64,
    pub position: Complex64,
    pub outward_normal: Complex64,
    /// Signed curvature; positive where the domain is locally convex.
    pub curvature: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedDistanceResult {
    /// Signed distance, negative inside.
    pub psi: f64,
    pub curve: usize,
    pub nearest_t: f64,
    pub nearest_point: Complex64,
}

impl PlanarDomain {
    pub fn new(outer: BoundaryCurve, holes: Vec<BoundaryCurve>) -> Result<Self> {
        if outer.orientation() != Orientation::Positive {
            return Err(Error::construction(
                "orientation",
                "outer curve must be positively oriented",
            ));
        }
        for (i, h) in holes.iter().enumerate() {
            if h.orientation() != Orientation::Negative {
                return Err(Error::construction(
                    "orientation",
                    format!("hole {i} must be negatively oriented"),
                ));
            }
        }
        let outer_pts = outer.sample(outer.check_grid_size());
        let hole_pts: Vec<Vec<Complex64>> = holes
            .iter()
            .map(|h| h.sample(h.check_grid_size()))
            .collect();
        for (i, h) in holes.iter().enumerate() {
            if first_polyline_crossing(&outer_pts, &hole_pts[i], false).is_some()
                || outer.winding_number(h.point(0.0)) != 1
            {
                return Err(Error::construction(
                    "holes inside outer curve",
                    format!("hole {i} is not strictly inside the outer curve"),
                ));
            }
        }
        for i in 0..holes.len() {
            for j in i + 1..holes.len() {
                if first_polyline_crossing(&hole_pts[i], &hole_pts[j], false).is_some()
                    || holes[i].winding_number(holes[j].point(0.0)) != 0
                    || holes[j].winding_number(holes[i].point(0.0)) != 0
                {
                    return Err(Error::construction(
                        "disjoint holes",
                        format!("holes {i} and {j} overlap"),
                    ));
                }
            }
        }
        Ok(Self { outer, holes })
    }

    pub fn disk() -> Self {
        Self::circle(Complex64::new(0.0, 0.0), 1.0)
    }

    /// Disk of the given center and radius.
    pub fn circle(center: Complex64, radius: f64) -> Self {
        let outer = BoundaryCurve::new_unchecked(vec![
            Complex64::new(0.0, 0.0),
            center,
            Complex64::new(radius, 0.0),
        ])
        .expect("three coefficients");
        Self {
            outer,
            holes: Vec::new(),
        }
    }

    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        match spec {
            DomainSpec::Disk {} => Ok(Self::disk()),
            DomainSpec::Ellipse { a, b } => {
                if !(*a > 0.0 && *b > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::construction(
                        "ellipse semi-axes",
                        format!("a = {a}, b = {b}"),
                    ));
                }
                // a cos t + i b sin t = ((a+b)/2) e^{it} + ((a−b)/2) e^{−it}
                let outer = BoundaryCurve::from_modes(&[
                    (1, Complex64::new(0.5 * (a + b), 0.0)),
                    (-1, Complex64::new(0.5 * (a - b), 0.0)),
                ])?;
                Self::new(outer, Vec::new())
            }
            DomainSpec::Annulus { r } => {
                if !(*r > 0.0 && *r < 1.0) {
                    return Err(Error::construction(
                        "annulus radius",
                        format!("need 0 < r < 1, got {r}"),
                    ));
                }
                let outer = BoundaryCurve::from_modes(&[(1, Complex64::new(1.0, 0.0))])?;
                let hole = BoundaryCurve::from_modes(&[(-1, Complex64::new(*r, 0.0))])?;
                Self::new(outer, vec![hole])
            }
            DomainSpec::Blob { preset } => {
                let modes: &[(i32, Complex64)] = match preset.as_str() {
                    "bean" => &[
                        (1, Complex64::new(1.0, 0.0)),
                        (2, Complex64::new(0.0, 0.12)),
                        (-2, Complex64::new(0.05, 0.0)),
                    ],
                    "egg" => &[
                        (1, Complex64::new(1.0, 0.0)),
                        (-1, Complex64::new(0.1, 0.0)),
                        (2, Complex64::new(0.06, 0.0)),
                    ],
                    other => {
                        return Err(Error::construction(
                            "blob preset",
                            format!("unknown preset {other:?}; known: {BLOB_PRESETS:?}"),
                        ))
                    }
                };
                Self::new(BoundaryCurve::from_modes(modes)?, Vec::new())
            }
            DomainSpec::Fourier {
                coefficients,
                holes,
            } => {
                let to_curve = |pairs: &[[f64; 2]], want: Orientation| -> Result<BoundaryCurve> {
                    let c = BoundaryCurve::new(
                        pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
                    )?;
                    Ok(if c.orientation() == want {
                        c
                    } else {
                        c.reversed()
                    })
                };
                let outer = to_curve(coefficients, Orientation::Positive)?;
                let holes = holes
                    .iter()
                    .map(|h| to_curve(h, Orientation::Negative))
                    .collect::<Result<Vec<_>>>()?;
                Self::new(outer, holes)
            }
        }
    }

    /// Fourier description of this domain (always expressible).
    pub fn to_spec(&self) -> DomainSpec {
        let pairs = |c: &BoundaryCurve| c.coefficients().iter().map(|z| [z.re, z.im]).collect();
        DomainSpec::Fourier {
            coefficients: pairs(&self.outer),
            holes: self.holes.iter().map(pairs).collect(),
        }
    }

    pub fn outer(&self) -> &BoundaryCurve {
        &self.outer
    }

    pub fn holes(&self) -> &[BoundaryCurve] {
        &self.holes
    }

    /// Outer curve followed by the holes.
    pub fn curves(&self) -> impl Iterator<Item = &BoundaryCurve> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn curve(&self, idx: usize) -> Option<&BoundaryCurve> {
        if idx == 0 {
            Some(&self.outer)
        } else {
            self.holes.get(idx - 1)
        }
    }

    pub fn curve_count(&self) -> usize {
        1 + self.holes.len()
    }

    pub fn is_simply_connected(&self) -> bool {
        self.holes.is_empty()
    }

    /// Image under the affine map `z ↦ scale·z + shift`.
    pub fn affine_image(&self, scale: Complex64, shift: Complex64) -> Self {
        Self {
            outer: self.outer.affine_image(scale, shift),
            holes: self
                .holes
                .iter()
                .map(|h| h.affine_image(scale, shift))
                .collect(),
        }
    }

    /// Total winding number is 1 inside, 0 outside (holes count negatively).
    pub fn contains(&self, z: Complex64) -> bool {
        self.curves().map(|c| c.winding_number(z)).sum::<i32>() == 1
    }

    pub fn boundary_point(&self, curve: usize, t: f64) -> Result<BoundaryPointData> {
        let c = self
            .curve(curve)
            .ok_or_else(|| Error::domain(format!("no boundary curve with index {curve}")))?;
        let t = t.rem_euclid(TAU);
        Ok(BoundaryPointData {
            curve,
            t,
            position: c.point(t),
            outward_normal: c.right_normal(t),
            curvature: c.curvature(t),
        })
    }

    /// Signed Euclidean distance to the boundary (negative inside).
    pub fn signed_distance(&self, z: Complex64) -> Result<SignedDistanceResult> {
        let mut best: Option<SignedDistanceResult> = None;
        let mut best_residual = f64::INFINITY;
        for (idx, c) in self.curves().enumerate() {
            match c.nearest_point(z) {
                Ok((dist, t, p)) => {
                    if best.is_none_or(|b| dist < b.psi) {
                        best = Some(SignedDistanceResult {
                            psi: dist,
                            curve: idx,
                            nearest_t: t,
                            nearest_point: p,
                        });
                    }
                }
                Err(res) => best_residual = best_residual.min(res),
            }
        }
        let mut out = best.ok_or(Error::NoConvergence { best_residual })?;
        if self.contains(z) {
            out.psi = -out.psi;
        }
        Ok(out)
    }

    /// Half the smallest radius of curvature over the check grid, capped by half
    /// the separation between distinct boundary curves.
    pub fn reach(&self) -> f64 {
        let mut min_radius = f64::INFINITY;
        let mut samples = Vec::new();
        for c in self.curves() {
            let m = c.check_grid_size();
            for i in 0..m {
                let k = c.curvature(TAU * i as f64 / m as f64).abs();
                if k > 0.0 {
                    min_radius = min_radius.min(1.0 / k);
                }
            }
            samples.push(c.sample(256));
        }
        let mut reach = 0.5 * min_radius;
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                for p in &samples[i] {
                    for q in &samples[j] {
                        reach = reach.min(0.5 * (p - q).norm());
                    }
                }
            }
        }
        reach
    }

    /// Inward probe `p − δω` along the normal fiber through `p`.
    pub fn normal_probe(&self, p: &BoundaryPointData, delta: f64) -> Result<Complex64> {
        let reach = self.reach();
        if !(delta > 0.0) || delta >= reach {
            return Err(Error::domain(format!(
                "probe depth {delta} must lie in (0, reach = {reach})"
            )));
        }
        Ok(p.position - p.outward_normal * delta)
    }

    /// Axis-aligned bounding box `[xmin, xmax, ymin, ymax]` of the outer curve.
    pub fn bounding_box(&self) -> [f64; 4] {
        let pts = self.outer.sample(self.outer.check_grid_size());
        let mut bx = [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for p in pts {
            bx[0] = bx[0].min(p.re);
            bx[1] = bx[1].max(p.re);
            bx[2] = bx[2].min(p.im);
            bx[3] = bx[3].max(p.im);
        }
        bx
    }

    /// Interior reference point: `c_0` of the outer curve when it is interior
    /// and away from holes, otherwise a point found by a small search.
    pub fn interior_reference(&self) -> Complex64 {
        let c0 = self.outer.coefficient(0);
        if self.contains(c0) {
            if let Ok(sd) = self.signed_distance(c0) {
                if sd.psi < -0.2 * self.reach() {
                    return c0;
                }
            }
        }
        let bx = self.bounding_box();
        let mut best = (f64::INFINITY, c0);
        for i in 1..16 {
            for j in 1..16 {
                let z = Complex64::new(
                    bx[0] + (bx[1] - bx[0]) * i as f64 / 16.0,
                    bx[2] + (bx[3] - bx[2]) * j as f64 / 16.0,
                );
                if let Ok(sd) = self.signed_distance(z) {
                    if sd.psi < best.0 {
                        best = (sd.psi, z);
                    }
                }
            }
        }
        best.1
    }
}
