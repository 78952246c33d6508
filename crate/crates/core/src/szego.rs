//! Szegő and Garabedian kernels, the Ahlfors map and the Carathéodory density
//! of a smooth bounded domain, computed from the Kerzman–Stein boundary
//! integral equation.
//!
//! On the boundary `Γ` (domain on the left, unit tangent `T`) the Szegő kernel
//! solves the second-kind equation
//!
//! ```text
//! S(z,a) + ∫_Γ A(z,w) S(w,a) ds(w) = conj(H(a,z)),   z ∈ Γ,
//! H(a,z) = T(z) / (2πi (z − a)),
//! A(z,w) = conj(H(w,z)) − H(z,w)   (smooth, skew-hermitian, A(z,z) = 0).
//! ```
//!
//! The equation is discretized by Nyström's method on a periodic trapezoid
//! grid or on composite Gauss–Legendre panels graded toward given target
//! points, and symmetrized with `sqrt(ds)` weights so the stored matrix is
//! exactly skew-hermitian. Interior values come from the barycentric form of
//! the Cauchy integral, differentiated analytically.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::num::NonZeroUsize;
use std::sync::{Arc, RwLock};

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PlanarDomain;
use crate::nearest::PointIndex;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Highest supported derivative order in either slot of `S(z, a)`.
pub const MAX_PARTIAL_ORDER: usize = 4;
const CACHE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Accuracy {
    Full,
    DegradedNearBoundary,
}

impl Accuracy {
    pub fn is_degraded(self) -> bool {
        self == Accuracy::DegradedNearBoundary
    }

    fn combine(self, other: Accuracy) -> Accuracy {
        if self.is_degraded() || other.is_degraded() {
            Accuracy::DegradedNearBoundary
        } else {
            Accuracy::Full
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelValue<T = Complex64> {
    pub value: T,
    pub accuracy: Accuracy,
}

/// One quadrature node on the boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryNode {
    pub curve: usize,
    pub t: f64,
    pub position: Complex64,
    pub unit_tangent: Complex64,
    /// Arclength quadrature weight.
    pub ds: f64,
    /// Evaluation points closer than this to the node are flagged as degraded.
    pub resolution: f64,
}

/// Largest admissible grading ratio. Points closer to a panel than its
/// length over this ratio are flagged as degraded; at that distance the
/// 16-point Gauss–Legendre rule for the Cauchy kernel errs by about 1e-9.
pub const MAX_GRADING_RATIO: f64 = 3.0;

/// Controls for the graded panel discretization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradingOptions {
    /// Uniform parameter panels per curve before refinement.
    pub base_panels: usize,
    /// Gauss–Legendre nodes per panel.
    pub panel_order: usize,
    /// A panel is split while its arclength exceeds `ratio` times its
    /// distance to a target; at most [`MAX_GRADING_RATIO`].
    pub ratio: f64,
    pub max_panels: usize,
}

impl Default for GradingOptions {
    fn default() -> Self {
        Self {
            base_panels: 32,
            panel_order: 16,
            ratio: 1.0,
            max_panels: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Discretization {
    /// `nodes_per_curve` equispaced parameter nodes on every curve.
    Trapezoid { nodes_per_curve: usize },
    /// Composite Gauss–Legendre panels refined toward the given points.
    Graded {
        targets: Vec<Complex64>,
        options: GradingOptions,
    },
}

/// Boundary densities for one base point `a`.
struct BaseSolution {
    /// `sigma[k][i] = ∂̄_a^k S(w_i, a)`.
    sigma: Vec<Vec<Complex64>>,
    /// `L(w_i, a) − 1/(2π(w_i − a))`.
    garabedian_regular: Vec<Complex64>,
}

pub struct SzegoSystem {
    domain: PlanarDomain,
    discretization: Discretization,
    nodes: Vec<BoundaryNode>,
    sqrt_ds: Vec<f64>,
    kerzman_stein: DMatrix<Complex64>,
    lu: PartialPivLu<Complex64>,
    cache: RwLock<HashMap<(u64, u64), Arc<BaseSolution>>>,
}

impl std::fmt::Debug for SzegoSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SzegoSystem")
            .field("discretization", &self.discretization)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

fn trapezoid_nodes(domain: &PlanarDomain, n: usize) -> Vec<BoundaryNode> {
    let mut nodes = Vec::with_capacity(n * domain.curve_count());
    for (ci, curve) in domain.curves().enumerate() {
        let w = TAU / n as f64;
        let mut curve_nodes: Vec<BoundaryNode> = (0..n)
            .map(|i| {
                let t = w * i as f64;
                let [p, d, _] = curve.eval3(t);
                BoundaryNode {
                    curve: ci,
                    t,
                    position: p,
                    unit_tangent: d / d.norm(),
                    ds: d.norm() * w,
                    resolution: 0.0,
                }
            })
            .collect();
        let h_max = curve_nodes.iter().map(|nd| nd.ds).fold(0.0, f64::max);
        for nd in &mut curve_nodes {
            nd.resolution = 3.0 * h_max;
        }
        nodes.extend(curve_nodes);
    }
    nodes
}

fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).expect("nonzero"));
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x, w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

fn graded_nodes(
    domain: &PlanarDomain,
    targets: &[Complex64],
    opts: &GradingOptions,
) -> Result<Vec<BoundaryNode>> {
    if opts.base_panels == 0
        || opts.panel_order < 2
        || !(opts.ratio > 0.0 && opts.ratio <= MAX_GRADING_RATIO)
    {
        return Err(Error::Config(format!("invalid grading options {opts:?}")));
    }
    let gl = gauss_legendre(opts.panel_order);
    let index = if targets.is_empty() {
        None
    } else {
        Some(PointIndex::new(targets)?)
    };
    let mut nodes = Vec::new();
    let mut total_panels = 0;
    for (ci, curve) in domain.curves().enumerate() {
        let arclength = |a: f64, b: f64| -> f64 {
            let half = 0.5 * (b - a);
            gl.iter()
                .map(|&(x, w)| w * curve.eval_derivative(a + half * (x + 1.0), 1).norm())
                .sum::<f64>()
                * half
        };
        let distance = |index: &PointIndex, a: f64, b: f64| -> f64 {
            let half = 0.5 * (b - a);
            gl.iter()
                .map(|&(x, _)| a + half * (x + 1.0))
                .chain([a, b])
                .map(|s| index.nearest(curve.point(s)).1)
                .fold(f64::INFINITY, f64::min)
        };
        let dt = TAU / opts.base_panels as f64;
        let mut stack: Vec<(f64, f64)> = (0..opts.base_panels)
            .rev()
            .map(|i| (dt * i as f64, dt * (i + 1) as f64))
            .collect();
        let mut panels = Vec::new();
        while let Some((a, b)) = stack.pop() {
            let len = arclength(a, b);
            if index
                .as_ref()
                .is_some_and(|ix| len > opts.ratio * distance(ix, a, b))
            {
                if total_panels + stack.len() + panels.len() > opts.max_panels {
                    return Err(Error::Resolution {
                        detail: format!(
                            "graded discretization exceeds {} panels; a target is too close to the boundary",
                            opts.max_panels
                        ),
                    });
                }
                let m = 0.5 * (a + b);
                stack.push((m, b));
                stack.push((a, m));
            } else {
                panels.push((a, b, len));
            }
        }
        total_panels += panels.len();
        for (a, b, len) in panels {
            let half = 0.5 * (b - a);
            for &(x, w) in &gl {
                let t = a + half * (x + 1.0);
                let [p, d, _] = curve.eval3(t);
                nodes.push(BoundaryNode {
                    curve: ci,
                    t,
                    position: p,
                    unit_tangent: d / d.norm(),
                    ds: d.norm() * w * half,
                    resolution: len / MAX_GRADING_RATIO,
                });
            }
        }
    }
    Ok(nodes)
}

/// `A(z_i, w_j)` for distinct nodes.
fn kerzman_stein_kernel(zi: &BoundaryNode, wj: &BoundaryNode) -> Complex64 {
    let diff = zi.position - wj.position;
    // H(z,w) = T(w)/(2πi(w − z));  conj(H(w,z)) = conj(T(z)/(2πi(z − w)))
    let h = wj.unit_tangent / (2.0 * PI * I * (-diff));
    let h_star = (zi.unit_tangent / (2.0 * PI * I * diff)).conj();
    h_star - h
}

impl SzegoSystem {
    /// Trapezoid system with `n` nodes per boundary curve (`n ≥ 64`, a power of two).
    pub fn build(domain: &PlanarDomain, n: usize) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "node count per curve must be a power of two ≥ 64, got {n}"
            )));
        }
        Self::with_discretization(domain, Discretization::Trapezoid { nodes_per_curve: n })
    }

    /// Panel system graded so that every target point is resolved.
    pub fn build_graded(
        domain: &PlanarDomain,
        targets: &[Complex64],
        options: GradingOptions,
    ) -> Result<Self> {
        Self::with_discretization(
            domain,
            Discretization::Graded {
                targets: targets.to_vec(),
                options,
            },
        )
    }

    pub fn with_discretization(
        domain: &PlanarDomain,
        discretization: Discretization,
    ) -> Result<Self> {
        let nodes = match &discretization {
            Discretization::Trapezoid { nodes_per_curve } => {
                trapezoid_nodes(domain, *nodes_per_curve)
            }
            Discretization::Graded { targets, options } => graded_nodes(domain, targets, options)?,
        };
        check_curve_separation(&nodes)?;
        let n = nodes.len();
        let sqrt_ds: Vec<f64> = nodes.iter().map(|nd| nd.ds.sqrt()).collect();

        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            ZERO
                        } else {
                            sqrt_ds[i] * kerzman_stein_kernel(&nodes[i], &nodes[j]) * sqrt_ds[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let ks = DMatrix::from_fn(n, n, |i, j| rows[i][j]);

        let scale = ks.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                defect = defect.max((ks[(i, j)] + ks[(j, i)].conj()).norm());
            }
        }
        if defect > 1e-12 * scale {
            return Err(Error::InvariantViolation(format!(
                "Kerzman–Stein matrix is not skew-hermitian (defect {defect:e})"
            )));
        }

        let system = Mat::<Complex64>::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                ks[(i, j)]
            }
        });
        let lu = system.partial_piv_lu();
        drop(rows);
        Ok(Self {
            domain: domain.clone(),
            discretization,
            nodes,
            sqrt_ds,
            kerzman_stein: ks,
            lu,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn domain(&self) -> &PlanarDomain {
        &self.domain
    }

    pub fn discretization(&self) -> &Discretization {
        &self.discretization
    }

    pub fn nodes(&self) -> &[BoundaryNode] {
        &self.nodes
    }

    /// Symmetrized Kerzman–Stein matrix `sqrt(ds_i) A(z_i,z_j) sqrt(ds_j)`.
    pub fn kerzman_stein_matrix(&self) -> &DMatrix<Complex64> {
        &self.kerzman_stein
    }

    /// `max |K_ij + conj(K_ji)|`.
    pub fn skew_hermitian_defect(&self) -> f64 {
        let k = &self.kerzman_stein;
        let n = k.nrows();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                d = d.max((k[(i, j)] + k[(j, i)].conj()).norm());
            }
        }
        d
    }

    pub fn accuracy_at(&self, z: Complex64) -> Accuracy {
        if self
            .nodes
            .iter()
            .any(|nd| (z - nd.position).norm() < nd.resolution)
        {
            Accuracy::DegradedNearBoundary
        } else {
            Accuracy::Full
        }
    }

    /// Smallest power-of-two trapezoid node count that keeps `z` outside the degraded band.
    pub fn min_nodes_for(&self, z: Complex64) -> usize {
        let dist = self
            .nodes
            .iter()
            .map(|nd| (z - nd.position).norm())
            .fold(f64::INFINITY, f64::min);
        let speed = self
            .domain
            .curves()
            .map(|c| c.speed_bound())
            .fold(0.0, f64::max);
        let needed = (3.0 * speed * TAU / dist.max(1e-300)).ceil() as usize;
        needed.max(64).next_power_of_two()
    }

    fn require_interior(&self, z: Complex64, what: &str) -> Result<()> {
        if self.domain.contains(z) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{what} = {z} is not interior to the domain"
            )))
        }
    }

    fn require_full(&self, z: Complex64) -> Result<()> {
        if self.accuracy_at(z).is_degraded() {
            Err(Error::Degraded {
                z,
                min_nodes: self.min_nodes_for(z),
            })
        } else {
            Ok(())
        }
    }

    /// Boundary densities for base point `a`, with `ā`-derivatives up to `order`.
    fn base_solution(&self, a: Complex64, order: usize) -> Result<Arc<BaseSolution>> {
        if let Some(sol) = self.cached(a, order) {
            return Ok(sol);
        }
        self.prefetch(&[a], order)?;
        self.cached(a, order).ok_or_else(|| Error::Resolution {
            detail: "base solution evicted".into(),
        })
    }

    fn cached(&self, a: Complex64, order: usize) -> Option<Arc<BaseSolution>> {
        let key = (a.re.to_bits(), a.im.to_bits());
        let cache = self.cache.read().expect("cache lock");
        cache.get(&key).filter(|s| s.sigma.len() > order).cloned()
    }

    /// Solves the boundary equation for many base points with one
    /// multi-right-hand-side solve and caches the results.
    pub fn prefetch(&self, bases: &[Complex64], order: usize) -> Result<()> {
        if order > MAX_PARTIAL_ORDER {
            return Err(Error::Config(format!(
                "derivative order {order} exceeds {MAX_PARTIAL_ORDER}"
            )));
        }
        let mut todo: Vec<Complex64> = Vec::new();
        for &a in bases {
            if self.cached(a, order).is_none() && !todo.iter().any(|b| b == &a) {
                self.require_interior(a, "a")?;
                todo.push(a);
            }
        }
        for chunk in todo.chunks(CACHE_LIMIT / 2) {
            let solved = self.solve_bases(chunk, order)?;
            let mut cache = self.cache.write().expect("cache lock");
            if cache.len() + solved.len() > CACHE_LIMIT {
                cache.clear();
            }
            for (a, sol) in chunk.iter().zip(solved) {
                cache.insert((a.re.to_bits(), a.im.to_bits()), Arc::new(sol));
            }
        }
        Ok(())
    }

    fn solve_bases(&self, bases: &[Complex64], order: usize) -> Result<Vec<BaseSolution>> {
        let n = self.nodes.len();
        let width = order + 1;
        // column b·width + k holds conj(∂_a^k H(a_b, w)), H(a,w) = T(w)/(2πi(w − a))
        let rhs = Mat::<Complex64>::from_fn(n, bases.len() * width, |i, col| {
            let (b, k) = (col / width, col % width);
            let nd = &self.nodes[i];
            let inv = 1.0 / (nd.position - bases[b]);
            let fact: f64 = (1..=k).map(|m| m as f64).product();
            let h = nd.unit_tangent * fact * inv.powi(k as i32 + 1) / (2.0 * PI * I);
            self.sqrt_ds[i] * h.conj()
        });
        let sol = self.lu.solve(&rhs);
        bases
            .par_iter()
            .enumerate()
            .map(|(b, &a)| {
                let sigma: Vec<Vec<Complex64>> = (0..width)
                    .map(|k| {
                        (0..n)
                            .map(|i| sol[(i, b * width + k)] / self.sqrt_ds[i])
                            .collect()
                    })
                    .collect();
                if sigma
                    .iter()
                    .flatten()
                    .any(|v| !v.re.is_finite() || !v.im.is_finite())
                {
                    return Err(Error::Resolution {
                        detail: "Kerzman–Stein system is numerically singular".into(),
                    });
                }
                let garabedian_regular = self
                    .nodes
                    .iter()
                    .zip(&sigma[0])
                    .map(|(nd, s)| {
                        I * s.conj() * nd.unit_tangent.conj() - 1.0 / (2.0 * PI * (nd.position - a))
                    })
                    .collect();
                Ok(BaseSolution {
                    sigma,
                    garabedian_regular,
                })
            })
            .collect()
    }

    /// Derivatives `g^{(m)}(z)`, `m = 0..=order`, of the holomorphic function
    /// with boundary values `values`, from the barycentric Cauchy formula.
    fn cauchy_derivatives(
        &self,
        values: &[Complex64],
        z: Complex64,
        order: usize,
    ) -> Vec<Complex64> {
        let mut p = vec![ZERO; order + 1];
        let mut q = vec![ZERO; order + 1];
        for (nd, g) in self.nodes.iter().zip(values) {
            let inv = 1.0 / (nd.position - z);
            let mut pow = nd.unit_tangent * nd.ds * inv;
            for m in 0..=order {
                p[m] += g * pow;
                q[m] += pow;
                pow *= inv;
            }
        }
        let mut taylor = vec![ZERO; order + 1];
        for m in 0..=order {
            let mut acc = p[m];
            for i in 0..m {
                acc -= taylor[i] * q[m - i];
            }
            taylor[m] = acc / q[0];
        }
        let mut fact = 1.0;
        for (m, c) in taylor.iter_mut().enumerate() {
            if m > 0 {
                fact *= m as f64;
            }
            *c *= fact;
        }
        taylor
    }

    /// Szegő kernel `S(z, a)`.
    pub fn szego(&self, z: Complex64, a: Complex64) -> Result<KernelValue> {
        self.require_interior(z, "z")?;
        let sol = self.base_solution(a, 0)?;
        let v = self.cauchy_derivatives(&sol.sigma[0], z, 0)[0];
        Ok(KernelValue {
            value: v,
            accuracy: self.accuracy_at(z).combine(self.accuracy_at(a)),
        })
    }

    /// Garabedian kernel `L(z, a)`, with a simple pole `1/(2π(z − a))` at `a`.
    pub fn garabedian(&self, z: Complex64, a: Complex64) -> Result<KernelValue> {
        if z == a {
            return Err(Error::Pole { z });
        }
        self.require_interior(z, "z")?;
        let sol = self.base_solution(a, 0)?;
        let g = self.cauchy_derivatives(&sol.garabedian_regular, z, 0)[0];
        Ok(KernelValue {
            value: g + 1.0 / (2.0 * PI * (z - a)),
            accuracy: self.accuracy_at(z).combine(self.accuracy_at(a)),
        })
    }

    /// Ahlfors map `f(z, a) = S/L` and its `z`-derivative, written as
    /// `f = u S / (1 + u g)` with `u = 2π(z − a)` so that it is regular at `a`.
    pub fn ahlfors_with_derivative(
        &self,
        z: Complex64,
        a: Complex64,
    ) -> Result<KernelValue<(Complex64, Complex64)>> {
        self.require_interior(z, "z")?;
        let sol = self.base_solution(a, 0)?;
        let s = self.cauchy_derivatives(&sol.sigma[0], z, 1);
        let g = self.cauchy_derivatives(&sol.garabedian_regular, z, 1);
        let u = 2.0 * PI * (z - a);
        let den = 1.0 + u * g[0];
        let f = u * s[0] / den;
        let df = (2.0 * PI * s[0] + u * s[1]) / den
            - u * s[0] * (2.0 * PI * g[0] + u * g[1]) / (den * den);
        Ok(KernelValue {
            value: (f, df),
            accuracy: self.accuracy_at(z).combine(self.accuracy_at(a)),
        })
    }

    pub fn ahlfors(&self, z: Complex64, a: Complex64) -> Result<KernelValue> {
        let v = self.ahlfors_with_derivative(z, a)?;
        Ok(KernelValue {
            value: v.value.0,
            accuracy: v.accuracy,
        })
    }

    /// Carathéodory density `c(z) = 2π S(z, z)`.
    pub fn caratheodory(&self, z: Complex64) -> Result<KernelValue<f64>> {
        let s = self.szego(z, z)?;
        let c = 2.0 * PI * s.value.re;
        if !(c > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "non-positive Carathéodory density {c} at {z}"
            )));
        }
        Ok(KernelValue {
            value: c,
            accuracy: s.accuracy,
        })
    }

    /// `∂_z^j ∂̄_a^k S(z, a)` at `a = z`.
    pub fn szego_partials(&self, z: Complex64, j: usize, k: usize) -> Result<Complex64> {
        if j > MAX_PARTIAL_ORDER || k > MAX_PARTIAL_ORDER {
            return Err(Error::Unsupported(format!(
                "partial derivative order ({j}, {k}) exceeds {MAX_PARTIAL_ORDER} per slot"
            )));
        }
        Ok(self.partials_matrix(z, j.max(k))?[j][k])
    }

    /// Matrix `M[j][k] = ∂_z^j ∂̄_a^k S(z, a)|_{a=z}` for `j, k ≤ n`.
    pub fn partials_matrix(&self, z: Complex64, n: usize) -> Result<Vec<Vec<Complex64>>> {
        if n > MAX_PARTIAL_ORDER {
            return Err(Error::Unsupported(format!(
                "order {n} exceeds {MAX_PARTIAL_ORDER}"
            )));
        }
        self.require_interior(z, "z")?;
        self.require_full(z)?;
        let sol = self.base_solution(z, n)?;
        let cols: Vec<Vec<Complex64>> = (0..=n)
            .map(|k| self.cauchy_derivatives(&sol.sigma[k], z, n))
            .collect();
        Ok((0..=n)
            .map(|j| (0..=n).map(|k| cols[k][j]).collect())
            .collect())
    }

    /// Drops cached base-point solutions.
    pub fn clear_cache(&self) {
        self.cache.write().expect("cache lock").clear();
    }
}

fn check_curve_separation(nodes: &[BoundaryNode]) -> Result<()> {
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            if a.curve != b.curve
                && (a.position - b.position).norm() < a.resolution.max(b.resolution)
            {
                return Err(Error::Resolution {
                    detail: format!(
                        "curves {} and {} come within {:.3e} of each other, below the node resolution",
                        a.curve,
                        b.curve,
                        (a.position - b.position).norm()
                    ),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::oracles::disk_szego;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ellipse() -> PlanarDomain {
        PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap()
    }

    #[test]
    fn disk_kernel_vanishes() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        let max = sys
            .kerzman_stein_matrix()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-14, "{max}");
        assert_eq!(sys.nodes().len(), 128);
    }

    #[test]
    fn build_examples() {
        let e = SzegoSystem::build(&ellipse(), 256).unwrap();
        let max = e
            .kerzman_stein_matrix()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(max > 1e-3);
        assert!(e.skew_hermitian_defect() < 1e-12);

        let a = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.25 }).unwrap();
        let sys = SzegoSystem::build(&a, 256).unwrap();
        assert_eq!(sys.nodes().len(), 512);
        assert_eq!(sys.nodes()[300].curve, 1);

        assert!(matches!(
            SzegoSystem::build(&ellipse(), 100),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SzegoSystem::build(&ellipse(), 32),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn close_curves_need_more_nodes() {
        let a = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.97 }).unwrap();
        assert!(matches!(
            SzegoSystem::build(&a, 64),
            Err(Error::Resolution { .. })
        ));
        assert!(SzegoSystem::build(&a, 1024).is_ok());
    }

    #[test]
    fn disk_szego_examples() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        let s = sys.szego(c(0.5, 0.0), c(0.0, 0.0)).unwrap();
        assert!((s.value - c(1.0 / (2.0 * PI), 0.0)).norm() < 1e-10);
        assert_eq!(s.accuracy, Accuracy::Full);
        let s = sys.szego(c(0.5, 0.0), c(0.5, 0.0)).unwrap();
        assert!((s.value - c(2.0 / (3.0 * PI), 0.0)).norm() < 1e-10);
        assert!(matches!(
            sys.szego(c(1.5, 0.0), c(0.0, 0.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            sys.szego(c(0.0, 0.0), c(0.0, 1.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn solving_twice_is_bit_identical() {
        let sys = SzegoSystem::build(&ellipse(), 128).unwrap();
        let a = c(0.2, 0.1);
        let s1 = sys.szego(c(-0.3, 0.2), a).unwrap().value;
        sys.clear_cache();
        let s2 = sys.szego(c(-0.3, 0.2), a).unwrap().value;
        assert_eq!(s1.re.to_bits(), s2.re.to_bits());
        assert_eq!(s1.im.to_bits(), s2.im.to_bits());
    }

    #[test]
    fn batched_bases_match_single_solves() {
        let sys = SzegoSystem::build(&ellipse(), 128).unwrap();
        let bases = [c(0.2, 0.1), c(-0.5, 0.3), c(0.0, -0.6)];
        let z = c(-0.3, 0.2);
        let single: Vec<_> = bases
            .iter()
            .map(|&a| sys.szego(z, a).unwrap().value)
            .collect();
        sys.clear_cache();
        sys.prefetch(&bases, 0).unwrap();
        for (&a, s) in bases.iter().zip(&single) {
            assert!((sys.szego(z, a).unwrap().value - s).norm() < 1e-13);
        }
        assert!(matches!(
            sys.prefetch(&[c(5.0, 0.0)], 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ellipse_hermitian_symmetry() {
        let sys = SzegoSystem::build(&ellipse(), 256).unwrap();
        let pts = [c(0.0, 0.0), c(0.4, 0.3), c(-0.7, -0.2), c(0.1, -0.6)];
        for &z in &pts {
            for &a in &pts {
                let s1 = sys.szego(z, a).unwrap().value;
                let s2 = sys.szego(a, z).unwrap().value;
                assert!((s1 - s2.conj()).norm() < 1e-10, "{z} {a}");
            }
        }
    }

    #[test]
    fn disk_ahlfors_and_garabedian() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        let a = c(0.0, 0.0);
        for &z in &[c(0.5, 0.0), c(-0.2, 0.6), c(0.0, 0.0)] {
            let f = sys.ahlfors(z, a).unwrap().value;
            assert!((f - z).norm() < 1e-10);
        }
        let l = sys.garabedian(c(0.5, 0.0), a).unwrap().value;
        assert!((l - c(1.0 / PI, 0.0)).norm() < 1e-9);
        assert!(matches!(sys.garabedian(a, a), Err(Error::Pole { .. })));
        // Residue: (z − a) L(z, a) → 1/(2π).
        let a = c(0.3, -0.1);
        for dir in [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)] {
            let z = a + dir * 1e-6;
            let r = (z - a) * sys.garabedian(z, a).unwrap().value;
            assert!((r - c(1.0 / (2.0 * PI), 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn ahlfors_normalization_and_identity() {
        let sys = SzegoSystem::build(&ellipse(), 256).unwrap();
        let a = c(0.2, -0.1);
        let (f, df) = sys.ahlfors_with_derivative(a, a).unwrap().value;
        assert_eq!(f, ZERO);
        let cval = sys.caratheodory(a).unwrap().value;
        assert!(df.im.abs() < 1e-12 && (df.re - cval).abs() < 1e-10);
        for &z in &[c(0.9, 0.3), c(-1.0, 0.0), c(0.0, 0.8)] {
            let f = sys.ahlfors(z, a).unwrap().value;
            assert!(f.norm() < 1.0);
            let ratio = sys.szego(z, a).unwrap().value / sys.garabedian(z, a).unwrap().value;
            assert!((ratio - f).norm() < 1e-9);
        }
        // Derivative against a central difference.
        let z = c(0.5, 0.4);
        let h = 1e-5;
        let fd = (sys.ahlfors(z + h, a).unwrap().value - sys.ahlfors(z - h, a).unwrap().value)
            / (2.0 * h);
        let df = sys.ahlfors_with_derivative(z, a).unwrap().value.1;
        assert!((fd - df).norm() < 1e-8);
    }

    #[test]
    fn caratheodory_examples() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        assert!((sys.caratheodory(c(0.0, 0.0)).unwrap().value - 1.0).abs() < 1e-12);
        assert!((sys.caratheodory(c(0.5, 0.0)).unwrap().value - 4.0 / 3.0).abs() < 1e-9);
        let e = SzegoSystem::build(&ellipse(), 256).unwrap();
        let v = e.caratheodory(c(0.0, 0.0)).unwrap().value;
        assert!(v > 1.0 / 1.3 && v < 1.0, "{v}");
    }

    #[test]
    fn partials_examples() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        let z = c(0.0, 0.0);
        assert!((sys.szego_partials(z, 1, 1).unwrap() - c(1.0 / (2.0 * PI), 0.0)).norm() < 1e-12);
        assert!(sys.szego_partials(z, 1, 0).unwrap().norm() < 1e-12);
        let z0 = c(0.3, 0.2);
        let m = sys.partials_matrix(z0, 2).unwrap();
        for j in 0..=2usize {
            for k in 0..=2usize {
                let want = closed_form_disk_partial(z0, j, k);
                assert!(
                    (m[j][k] - want).norm() < 1e-10 * want.norm().max(1.0),
                    "{j}{k}"
                );
            }
        }
        assert!(matches!(
            sys.szego_partials(z, 5, 0),
            Err(Error::Unsupported(_))
        ));
    }

    /// `∂_z^j ∂_b^k [1/(2π(1 − b z))]` at `b = z̄0`, `z = z0`, using
    /// `∂_b^k (1 − bz)^{-1} = k! z^k (1 − bz)^{-k-1}` and Leibniz in `z`.
    fn closed_form_disk_partial(z0: Complex64, j: usize, k: usize) -> Complex64 {
        let b = z0.conj();
        let w = 1.0 - b * z0;
        let fact = |n: usize| (1..=n).map(|x| x as f64).product::<f64>();
        let binom = |n: usize, r: usize| fact(n) / (fact(r) * fact(n - r));
        let mut acc = ZERO;
        for i in 0..=j.min(k) {
            let m = j - i;
            let d_zk = fact(k) / fact(k - i) * z0.powu((k - i) as u32);
            let rising: f64 = ((k + 1)..=(k + m)).map(|x| x as f64).product();
            let d_w = rising * b.powu(m as u32) * w.powi(-((k + 1 + m) as i32));
            acc += binom(j, i) * d_zk * d_w;
        }
        fact(k) * acc / (2.0 * PI)
    }

    #[test]
    fn degraded_flag_near_boundary() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        let h = TAU / 128.0;
        let near = c(1.0 - 2.0 * h, 0.0);
        assert!(sys.szego(near, c(0.0, 0.0)).unwrap().accuracy.is_degraded());
        assert!(!sys
            .szego(c(1.0 - 4.0 * h, 0.0), c(0.0, 0.0))
            .unwrap()
            .accuracy
            .is_degraded());
        match sys.partials_matrix(near, 1) {
            Err(Error::Degraded { min_nodes, .. }) => assert!(min_nodes >= 256),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn graded_system_resolves_near_boundary_points() {
        let z = c(1.0 - 1e-3, 0.0);
        let sys = SzegoSystem::build_graded(&PlanarDomain::disk(), &[z], GradingOptions::default())
            .unwrap();
        assert!(sys.nodes().len() < 2000);
        assert!(!sys.accuracy_at(z).is_degraded());
        let s = sys.szego(z, z).unwrap().value;
        let want = disk_szego(z, z).unwrap();
        assert!((s - want).norm() < 1e-10 * want.norm(), "{s} {want}");
        let m = sys.partials_matrix(z, 2).unwrap();
        for j in 0..=2 {
            for k in 0..=2 {
                let want = closed_form_disk_partial(z, j, k);
                assert!(
                    (m[j][k] - want).norm() < 1e-8 * want.norm(),
                    "{j}{k} {} {}",
                    m[j][k],
                    want
                );
            }
        }
    }

    #[test]
    fn cauchy_schwarz_and_self_convergence() {
        let coarse = SzegoSystem::build(&ellipse(), 64).unwrap();
        let mid = SzegoSystem::build(&ellipse(), 128).unwrap();
        let fine = SzegoSystem::build(&ellipse(), 256).unwrap();
        let pts = [c(0.0, 0.0), c(0.5, 0.2), c(-0.4, -0.4), c(0.9, 0.1)];
        let mut err_coarse: f64 = 0.0;
        let mut err_mid: f64 = 0.0;
        for &z in &pts {
            for &a in &pts {
                let f = fine.szego(z, a).unwrap().value;
                err_coarse = err_coarse.max((coarse.szego(z, a).unwrap().value - f).norm());
                err_mid = err_mid.max((mid.szego(z, a).unwrap().value - f).norm());
                let szz = fine.szego(z, z).unwrap().value.re;
                let saa = fine.szego(a, a).unwrap().value.re;
                assert!(f.norm_sqr() <= szz * saa * (1.0 + 1e-12));
            }
        }
        assert!(
            err_mid <= err_coarse / 10.0 || err_mid < 1e-13,
            "{err_coarse} {err_mid}"
        );
    }
}
