//! Higher-order curvatures `κ_n = −4 c^{−(n+1)²} det(∂^j ∂̄^k c)` of the
//! Carathéodory metric, their boundary sweeps, and finite-difference
//! cross-checks of the kernel-derivative path.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPointData, PlanarDomain};
use crate::oracles::disk_kappa_n;
use crate::sweep::{domain_hash, validate_deltas, SweepSolver, SweepTable};
use crate::szego::SzegoSystem;

pub const MAX_CURVATURE_ORDER: usize = 3;

/// `entries[j][k] = ∂_z^j ∂_z̄^k c_D(z)` for `j, k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureMatrix {
    pub n: usize,
    pub z: Complex64,
    pub entries: Vec<Vec<Complex64>>,
    /// Step used when the entries come from finite differences.
    pub h_used: Option<f64>,
    /// Distance from `z` to the boundary, the natural length scale of the entries.
    pub scale: f64,
}

impl CurvatureMatrix {
    /// Largest `|M_jk − conj(M_kj)|`, each term relative to `c·d^{−(j+k)}`.
    pub fn hermitian_defect(&self) -> f64 {
        let c = self.entries[0][0].re;
        let mut worst: f64 = 0.0;
        for j in 0..=self.n {
            for k in 0..=self.n {
                let s = c * self.scale.powi(-((j + k) as i32));
                worst = worst.max((self.entries[j][k] - self.entries[k][j].conj()).norm() / s);
            }
        }
        worst
    }

    /// `κ_n`, computed from the matrix rescaled by `d^{j+k+1}` so that the
    /// determinant stays O(1) near the boundary.
    pub fn kappa(&self) -> f64 {
        let n = self.n;
        let d = self.scale;
        let m = DMatrix::from_fn(n + 1, n + 1, |j, k| {
            let v = 0.5 * (self.entries[j][k] + self.entries[k][j].conj());
            v * d.powi((j + k + 1) as i32)
        });
        let det = m.determinant().re;
        let cd = self.entries[0][0].re * d;
        -4.0 * det / cd.powi(((n + 1) * (n + 1)) as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureMethod {
    KernelDerivative,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub z: [f64; 2],
    pub n: usize,
    pub kappa: f64,
    pub method: CurvatureMethod,
    pub error_estimate: f64,
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_CURVATURE_ORDER {
        return Err(Error::Unsupported(format!(
            "curvature order must be in 1..={MAX_CURVATURE_ORDER}, got {n}"
        )));
    }
    Ok(())
}

fn boundary_distance(domain: &PlanarDomain, z: Complex64) -> Result<f64> {
    let sd = domain.signed_distance(z)?;
    if sd.psi >= 0.0 {
        return Err(Error::domain(format!("{z} is not interior to the domain")));
    }
    Ok(-sd.psi)
}

/// Mixed partials of `c = 2πS(z, z)` by sesquiholomorphy:
/// `∂^j ∂̄^k c = 2π ∂_z^j ∂̄_a^k S(z, a)|_{a=z}`.
pub fn mixed_partials(sys: &SzegoSystem, z: Complex64, n: usize) -> Result<CurvatureMatrix> {
    check_order(n)?;
    let scale = boundary_distance(sys.domain(), z)?;
    let p = sys.partials_matrix(z, n)?;
    let entries: Vec<Vec<Complex64>> = p
        .iter()
        .map(|row| row.iter().map(|v| 2.0 * PI * v).collect())
        .collect();
    let m = CurvatureMatrix {
        n,
        z,
        entries,
        h_used: None,
        scale,
    };
    if !(m.entries[0][0].re > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "c_D({z}) is not positive"
        )));
    }
    let defect = m.hermitian_defect();
    if defect > 1e-8 {
        return Err(Error::InvariantViolation(format!(
            "curvature matrix at {z} is not hermitian (relative defect {defect:e})"
        )));
    }
    Ok(m)
}

pub fn kappa_n(sys: &SzegoSystem, z: Complex64, n: usize) -> Result<CurvatureReport> {
    let m = mixed_partials(sys, z, n)?;
    let kappa = m.kappa();
    if !(kappa < 0.0) {
        return Err(Error::InvariantViolation(format!(
            "κ_{n}({z}) = {kappa} is not negative"
        )));
    }
    Ok(CurvatureReport {
        z: [z.re, z.im],
        n,
        kappa,
        method: CurvatureMethod::KernelDerivative,
        error_estimate: kappa.abs() * m.hermitian_defect() * ((n + 1) * (n + 1)) as f64,
    })
}

/// Finite-difference weights for the `m`-th derivative at 0 on the given
/// offsets (Fornberg's recursion).
pub fn fornberg_weights(m: usize, offsets: &[f64]) -> Vec<f64> {
    let np = offsets.len();
    let mut c = vec![vec![0.0; m + 1]; np];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..np {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Formal accuracy order of the centred `(2s+1)`-point rule for derivative `m`.
fn centered_order(s: usize, m: usize) -> i32 {
    let raw = (2 * s + 1 - m) as i32;
    raw + raw % 2
}

fn binomial(n: usize, k: usize) -> f64 {
    (1..=k).map(|i| (n + 1 - i) as f64 / i as f64).product()
}

/// Real partials `∂x^a ∂y^b` (a + b ≤ 2n) of a sampled function on a centred
/// `(2s+1)²` tensor grid of step `h`.
fn real_partials(values: &[Vec<f64>], s: usize, h: f64, max_order: usize) -> Vec<Vec<(f64, i32)>> {
    let offsets: Vec<f64> = (-(s as i64)..=s as i64).map(|v| v as f64).collect();
    let w: Vec<Vec<f64>> = (0..=max_order)
        .map(|m| fornberg_weights(m, &offsets))
        .collect();
    let mut out = vec![vec![(0.0, 0); max_order + 1]; max_order + 1];
    for a in 0..=max_order {
        for b in 0..=(max_order - a) {
            let mut acc = 0.0;
            for (u, wu) in w[a].iter().enumerate() {
                if *wu == 0.0 {
                    continue;
                }
                for (v, wv) in w[b].iter().enumerate() {
                    acc += wu * wv * values[u][v];
                }
            }
            let order = centered_order(s, a).min(centered_order(s, b));
            out[a][b] = (acc / h.powi((a + b) as i32), order);
        }
    }
    out
}

/// `∂^j ∂̄^k` from real partials via `∂ = (∂x − i∂y)/2`, `∂̄ = (∂x + i∂y)/2`.
fn complex_partial(real: &[Vec<f64>], j: usize, k: usize) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..=j {
        for b in 0..=k {
            let coeff = binomial(j, a)
                * binomial(k, b)
                * (-i).powu((j - a) as u32)
                * i.powu((k - b) as u32);
            acc += coeff * real[a + b][j + k - a - b];
        }
    }
    acc / 2f64.powi((j + k) as i32)
}

fn sample_grid(
    f: &(dyn Fn(Complex64) -> Result<f64> + Sync),
    z: Complex64,
    s: usize,
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    let m = 2 * s + 1;
    let flat: Vec<f64> = (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let (u, v) = (idx / m, idx % m);
            let p = z + h * Complex64::new(u as f64 - s as f64, v as f64 - s as f64);
            f(p)
        })
        .collect::<Result<_>>()?;
    Ok(flat.chunks(m).map(|c| c.to_vec()).collect())
}

/// Richardson-extrapolated real partials from steps `h` and `h/2`.
fn richardson_partials(
    f: &(dyn Fn(Complex64) -> Result<f64> + Sync),
    z: Complex64,
    s: usize,
    h: f64,
    max_order: usize,
) -> Result<Vec<Vec<f64>>> {
    let coarse = real_partials(&sample_grid(f, z, s, h)?, s, h, max_order);
    let fine = real_partials(&sample_grid(f, z, s, 0.5 * h)?, s, 0.5 * h, max_order);
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|(rc, rf)| {
            rc.iter()
                .zip(rf)
                .map(|(&(dc, p), &(df, _))| {
                    let q = 2f64.powi(p);
                    (q * df - dc) / (q - 1.0)
                })
                .collect()
        })
        .collect())
}

/// Default FD step `max(1e−4, 0.02·dist)`.
pub fn fd_step(dist: f64) -> f64 {
    (0.02 * dist).max(1e-4)
}

/// Curvature matrix from finite differences of `caratheodory()`.
pub fn fd_mixed_partials(sys: &SzegoSystem, z: Complex64, n: usize) -> Result<CurvatureMatrix> {
    check_order(n)?;
    let dist = boundary_distance(sys.domain(), z)?;
    let h = fd_step(dist);
    if dist < 10.0 * h {
        return Err(Error::domain(format!(
            "finite differences need clearance 10h = {:e} but dist = {dist:e}",
            10.0 * h
        )));
    }
    let c = |p: Complex64| -> Result<f64> {
        let v = sys.caratheodory(p)?;
        if v.accuracy.is_degraded() {
            return Err(Error::Degraded {
                z: p,
                min_nodes: sys.min_nodes_for(p),
            });
        }
        Ok(v.value)
    };
    let real = richardson_partials(&c, z, n + 1, h, 2 * n)?;
    let entries = (0..=n)
        .map(|j| (0..=n).map(|k| complex_partial(&real, j, k)).collect())
        .collect();
    Ok(CurvatureMatrix {
        n,
        z,
        entries,
        h_used: Some(h),
        scale: dist,
    })
}

/// Largest relative deviation between kernel-derivative and finite-difference
/// curvature matrices, each entry normalized by `max(|K_jk|, c·d^{−(j+k)})`.
pub fn fd_cross_check(sys: &SzegoSystem, z: Complex64, n: usize) -> Result<f64> {
    let k = mixed_partials(sys, z, n)?;
    let f = fd_mixed_partials(sys, z, n)?;
    let c = k.entries[0][0].re;
    let mut worst: f64 = 0.0;
    for j in 0..=n {
        for l in 0..=n {
            let s = k.entries[j][l]
                .norm()
                .max(c * k.scale.powi(-((j + l) as i32)));
            worst = worst.max((k.entries[j][l] - f.entries[j][l]).norm() / s);
        }
    }
    Ok(worst)
}

/// `κ = −c^{−2} Δ log c` with the Laplacian taken by Richardson-extrapolated
/// finite differences of `log c` (independent of the kernel-derivative path).
pub fn kappa_laplacian(sys: &SzegoSystem, z: Complex64) -> Result<CurvatureReport> {
    let dist = boundary_distance(sys.domain(), z)?;
    let h = fd_step(dist);
    let logc = |p: Complex64| -> Result<f64> { Ok(sys.caratheodory(p)?.value.ln()) };
    let real = richardson_partials(&logc, z, 2, h, 2)?;
    let lap = real[2][0] + real[0][2];
    let c = sys.caratheodory(z)?.value;
    let kappa = -lap / (c * c);
    let coarse = real_partials(&sample_grid(&logc, z, 2, h)?, 2, h, 2);
    let lap_coarse = coarse[2][0].0 + coarse[0][2].0;
    Ok(CurvatureReport {
        z: [z.re, z.im],
        n: 1,
        kappa,
        method: CurvatureMethod::FiniteDifference,
        error_estimate: (lap - lap_coarse).abs() / (c * c),
    })
}

/// Table of `(δ, κ_n(p − δω))` for each requested order, with extrapolated limits.
pub fn kappa_boundary_sweep(
    sys: &SzegoSystem,
    p: &BoundaryPointData,
    orders: &[usize],
    deltas: &[f64],
) -> Result<SweepTable> {
    validate_deltas(deltas)?;
    for &n in orders {
        check_order(n)?;
    }
    let domain = sys.domain();
    let probes: Vec<Complex64> = deltas
        .iter()
        .map(|&d| domain.normal_probe(p, d))
        .collect::<Result<_>>()?;
    for &z in &probes {
        if sys.accuracy_at(z).is_degraded() {
            return Err(Error::Degraded {
                z,
                min_nodes: sys.min_nodes_for(z),
            });
        }
    }
    let max_n = orders.iter().copied().max().unwrap_or(1);
    let rows: Vec<Vec<f64>> = probes
        .par_iter()
        .zip(deltas.par_iter())
        .map(|(&z, &d)| {
            let m = mixed_partials(sys, z, max_n)?;
            let mut row = vec![d];
            for &n in orders {
                let sub = CurvatureMatrix {
                    n,
                    z,
                    entries: m.entries[..=n].iter().map(|r| r[..=n].to_vec()).collect(),
                    h_used: None,
                    scale: m.scale,
                };
                row.push(sub.kappa());
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut table = SweepTable::new(
        std::iter::once("delta".to_string()).chain(orders.iter().map(|n| format!("kappa_{n}"))),
    );
    for row in rows {
        table.push_row(row);
    }
    table.extrapolate("delta");
    table.set_meta("experiment", "curvature_sweep");
    table.set_meta("domain_hash", domain_hash(domain));
    table.set_meta("curve", p.curve);
    table.set_meta("t", p.t);
    table.set_meta("nodes", sys.nodes().len());
    let targets: Vec<f64> = orders
        .iter()
        .map(|&n| disk_kappa_n(n as u32).unwrap())
        .collect();
    table.set_meta("expected_limits", targets);
    Ok(table)
}

/// Builds a system resolving every probe and runs [`kappa_boundary_sweep`].
pub fn kappa_sweep(
    domain: &PlanarDomain,
    curve: usize,
    t: f64,
    orders: &[usize],
    deltas: &[f64],
    solver: &SweepSolver,
) -> Result<SweepTable> {
    validate_deltas(deltas)?;
    let p = domain.boundary_point(curve, t)?;
    let probes: Vec<Complex64> = deltas
        .iter()
        .map(|&d| domain.normal_probe(&p, d))
        .collect::<Result<_>>()?;
    let sys = solver.build(domain, &probes)?;
    let mut table = kappa_boundary_sweep(&sys, &p, orders, deltas)?;
    table.set_meta("solver", solver.describe());
    Ok(table)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ellipse() -> PlanarDomain {
        PlanarDomain::from_spec(&DomainSpec::Ellipse { a: 1.3, b: 1.0 }).unwrap()
    }

    #[test]
    fn fornberg_matches_textbook_stencils() {
        let w = fornberg_weights(2, &[-1.0, 0.0, 1.0]);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fornberg_weights(1, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let want = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(centered_order(1, 1), 2);
        assert_eq!(centered_order(1, 2), 2);
        assert_eq!(centered_order(2, 4), 2);
        assert_eq!(centered_order(2, 1), 4);
    }

    #[test]
    fn complex_partials_of_polynomial() {
        // f = x²y: f_x = 2xy, f_y = x², f_xx = 2y, f_xy = 2x, f_yy = 0.
        let f = |p: Complex64| -> Result<f64> { Ok(p.re * p.re * p.im + 3.0) };
        let z = c(0.3, -0.7);
        let real = richardson_partials(&f, z, 2, 0.1, 2).unwrap();
        // ∂∂̄ f = Δf/4 = (2y)/4
        let lap = complex_partial(&real, 1, 1);
        assert!((lap - c(2.0 * z.im / 4.0, 0.0)).norm() < 1e-12);
        // ∂f = (f_x − i f_y)/2
        let d = complex_partial(&real, 1, 0);
        assert!((d - c(z.re * z.im, -z.re * z.re / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn disk_center_matrix() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        let m = mixed_partials(&sys, c(0.0, 0.0), 1).unwrap();
        let want = [[1.0, 0.0], [0.0, 1.0]];
        for j in 0..2 {
            for k in 0..2 {
                assert!((m.entries[j][k] - c(want[j][k], 0.0)).norm() < 1e-12);
            }
        }
        let det = (m.entries[0][0] * m.entries[1][1] - m.entries[0][1] * m.entries[1][0]).re;
        assert!((det - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disk_kappa_values() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 256).unwrap();
        for &z in &[c(0.0, 0.0), c(0.5, 0.3), c(-0.9, 0.0), c(0.0, 0.85)] {
            let k1 = kappa_n(&sys, z, 1).unwrap();
            assert!((k1.kappa + 4.0).abs() < 1e-8, "{z} {}", k1.kappa);
        }
        let k2 = kappa_n(&sys, c(0.0, 0.0), 2).unwrap().kappa;
        assert!((k2 + 16.0).abs() < 1e-8);
        let k3 = kappa_n(&sys, c(0.2, 0.1), 3).unwrap().kappa;
        assert!((k3 + 576.0).abs() < 1e-5 * 576.0, "{k3}");
        assert!(matches!(
            kappa_n(&sys, c(0.0, 0.0), 4),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn disk_automorphism_invariance() {
        let sys = SzegoSystem::build(&PlanarDomain::disk(), 256).unwrap();
        let a = c(0.3, -0.2);
        for &z in &[c(0.1, 0.4), c(-0.5, 0.2)] {
            let w = (z - a) / (1.0 - a.conj() * z);
            for n in 1..=2 {
                let k1 = kappa_n(&sys, z, n).unwrap().kappa;
                let k2 = kappa_n(&sys, w, n).unwrap().kappa;
                assert!((k1 - k2).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ellipse_curvatures() {
        let sys = SzegoSystem::build(&ellipse(), 256).unwrap();
        let m = mixed_partials(&sys, c(0.0, 0.0), 2).unwrap();
        assert!(m.hermitian_defect() < 1e-8);
        for &z in &[c(0.0, 0.0), c(0.6, 0.3), c(-0.9, -0.4)] {
            let k1 = kappa_n(&sys, z, 1).unwrap().kappa;
            assert!(k1 <= -4.0 + 1e-6, "{k1}");
            let k2 = kappa_n(&sys, z, 2).unwrap().kappa;
            assert!(k2 <= -16.0 + 1e-6, "{k2}");
            let lap = kappa_laplacian(&sys, z).unwrap();
            assert!((lap.kappa - k1).abs() < 1e-6, "{} {k1}", lap.kappa);
        }
    }

    #[test]
    fn annulus_burbea_bound_is_strict() {
        let d = PlanarDomain::from_spec(&DomainSpec::Annulus { r: 0.25 }).unwrap();
        let sys = SzegoSystem::build(&d, 256).unwrap();
        let k1 = kappa_n(&sys, c(0.5, 0.0), 1).unwrap().kappa;
        assert!(k1 < -4.0 - 1e-3, "{k1}");
        let lap = kappa_laplacian(&sys, c(0.5, 0.0)).unwrap().kappa;
        assert!((lap - k1).abs() < 1e-6 * k1.abs());
    }

    #[test]
    fn fd_cross_checks() {
        let disk = SzegoSystem::build(&PlanarDomain::disk(), 128).unwrap();
        assert!(fd_cross_check(&disk, c(0.0, 0.0), 1).unwrap() <= 1e-5);
        let e = SzegoSystem::build(&ellipse(), 256).unwrap();
        assert!(fd_cross_check(&e, c(0.0, 0.0), 1).unwrap() <= 1e-4);
        let dev2 = fd_cross_check(&e, c(0.0, 0.0), 2).unwrap();
        assert!(dev2 <= 1e-3, "{dev2}");
        let m = fd_mixed_partials(&e, c(0.0, 0.0), 1).unwrap();
        assert!((m.h_used.unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn disk_sweep_is_constant() {
        let d = PlanarDomain::disk();
        let deltas = crate::sweep::geometric_deltas(0.1, 5);
        let t = kappa_sweep(&d, 0, 0.7, &[1, 2], &deltas, &SweepSolver::default()).unwrap();
        for v in t.column("kappa_1").unwrap() {
            assert!((v + 4.0).abs() < 1e-7, "{v}");
        }
        for v in t.column("kappa_2").unwrap() {
            assert!((v + 16.0).abs() < 1e-5, "{v}");
        }
        assert!((t.limit("kappa_1").unwrap() + 4.0).abs() < 1e-7);
    }

    #[test]
    fn uniform_sweep_too_coarse_reports_min_nodes() {
        let d = PlanarDomain::disk();
        let deltas = crate::sweep::default_deltas();
        let err = kappa_sweep(
            &d,
            0,
            0.0,
            &[1],
            &deltas,
            &SweepSolver::Uniform {
                nodes_per_curve: 256,
            },
        );
        assert!(matches!(err, Err(Error::Degraded { .. })));
    }
}
