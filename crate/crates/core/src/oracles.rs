//! Closed-form kernels, metric densities and extremal quadratic differentials
//! on the half-plane, the unit disk and the round annulus.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Half-plane `{z : Re(ω̄z) < 1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    omega: Complex64,
}

impl HalfPlane {
    pub fn new(omega: Complex64) -> Result<Self> {
        if omega.norm() == 0.0 || !omega.re.is_finite() || !omega.im.is_finite() {
            return Err(Error::domain(
                "half-plane normal must be finite and nonzero",
            ));
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    /// `Re(ω̄z) − 1`, negative inside.
    pub fn level(&self, z: Complex64) -> f64 {
        (self.omega.conj() * z).re - 1.0
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.level(z) < 0.0
    }

    /// Euclidean signed distance to the boundary line.
    pub fn signed_distance(&self, z: Complex64) -> f64 {
        self.level(z) / self.omega.norm()
    }

    fn require_interior(&self, z: Complex64, what: &str) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{what} = {z} is not interior to the half-plane"
            )))
        }
    }

    /// `2 − ωā − ω̄z`.
    fn denom(&self, z: Complex64, a: Complex64) -> Complex64 {
        2.0 - self.omega * a.conj() - self.omega.conj() * z
    }

    /// Ahlfors map `f(z,a) = |ω|(z−a)/(2 − ωā − ω̄z)`.
    pub fn ahlfors(&self, z: Complex64, a: Complex64) -> Result<Complex64> {
        self.require_interior(a, "a")?;
        let den = self.denom(z, a);
        if den.norm() == 0.0 {
            return Err(Error::Pole { z });
        }
        Ok(self.omega.norm() * (z - a) / den)
    }

    /// Szegő kernel `S(z,a) = |ω| / (2π (2 − ωā − ω̄z))`.
    pub fn szego(&self, z: Complex64, a: Complex64) -> Result<Complex64> {
        self.require_interior(a, "a")?;
        let den = self.denom(z, a);
        if den.norm() == 0.0 {
            return Err(Error::Pole { z });
        }
        Ok(self.omega.norm() / (2.0 * PI * den))
    }

    /// Garabedian kernel `L(z,a) = 1/(2π(z−a))`.
    pub fn garabedian(&self, z: Complex64, a: Complex64) -> Result<Complex64> {
        self.require_interior(a, "a")?;
        if z == a {
            return Err(Error::Pole { z });
        }
        Ok(1.0 / (2.0 * PI * (z - a)))
    }

    /// Common density `|ω|/(2 − 2Re(ω̄z))` of the Carathéodory, hyperbolic,
    /// Sugawa and Hurwitz metrics of the half-plane.
    pub fn density(&self, z: Complex64) -> Result<f64> {
        let den = -2.0 * self.level(z);
        if den <= 0.0 {
            return Err(Error::domain(format!(
                "density is infinite at or beyond the boundary (z = {z})"
            )));
        }
        Ok(self.omega.norm() / den)
    }

    /// Extremal quadratic differential based at `z0`:
    /// `φ(z) = |ω|²(2 − ωz̄₀ − ω̄z₀)² / (2 − ωz̄₀ − ω̄z)⁴`.
    pub fn extremal_differential(&self, z: Complex64, z0: Complex64) -> Result<Complex64> {
        self.require_interior(z0, "z0")?;
        let num = self.denom(z0, z0);
        let den = self.denom(z, z0);
        if den.norm() == 0.0 {
            return Err(Error::Pole { z });
        }
        Ok(self.omega.norm_sqr() * num * num / den.powu(4))
    }

    /// Pole `Z₀ = (2 − ωz̄₀)/ω̄` of the extremal differential, exterior to the half-plane.
    pub fn extremal_pole(&self, z0: Complex64) -> Complex64 {
        (2.0 - self.omega * z0.conj()) / self.omega.conj()
    }
}

fn require_in_disk(z: Complex64, what: &str) -> Result<()> {
    if z.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} = {z} is not in the unit disk"
        )))
    }
}

/// `S_𝔻(z,a) = 1/(2π(1 − āz))`.
pub fn disk_szego(z: Complex64, a: Complex64) -> Result<Complex64> {
    require_in_disk(z, "z")?;
    require_in_disk(a, "a")?;
    Ok(1.0 / (2.0 * PI * (1.0 - a.conj() * z)))
}

/// `1/(1 − |z|²)`: the Poincaré density, shared by all four metrics on 𝔻.
pub fn disk_density(z: Complex64) -> Result<f64> {
    require_in_disk(z, "z")?;
    Ok(1.0 / (1.0 - z.norm_sqr()))
}

/// Extremal differential of 𝔻 based at `w0`: the pullback of `φ ≡ 1` under
/// the automorphism `w ↦ (w − w0)/(1 − w̄0 w)`.
pub fn disk_extremal_differential(w: Complex64, w0: Complex64) -> Result<Complex64> {
    require_in_disk(w0, "w0")?;
    let den = 1.0 - w0.conj() * w;
    if den.norm() == 0.0 {
        return Err(Error::Pole { z: w });
    }
    let num = 1.0 - w0.norm_sqr();
    Ok(Complex64::new(num * num, 0.0) / den.powu(4))
}

/// Round annulus `{r < |z| < 1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusSpec {
    inner_radius: f64,
}

impl AnnulusSpec {
    pub fn new(inner_radius: f64) -> Result<Self> {
        if inner_radius > 0.0 && inner_radius < 1.0 {
            Ok(Self { inner_radius })
        } else {
            Err(Error::domain(format!(
                "annulus inner radius must lie in (0,1), got {inner_radius}"
            )))
        }
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let m = z.norm();
        m > self.inner_radius && m < 1.0
    }

    /// Hyperbolic density of curvature −4,
    /// `(π/(2 log(1/r))) / (|z| sin(π log|z| / log r))`.
    pub fn hyperbolic(&self, z: Complex64) -> Result<f64> {
        if !self.contains(z) {
            return Err(Error::domain(format!("{z} is outside the annulus")));
        }
        let r = self.inner_radius;
        let m = z.norm();
        let big_l = -r.ln();
        Ok(PI / (2.0 * big_l) / (m * (PI * m.ln() / r.ln()).sin()))
    }
}

/// `−4 (∏_{k=1}^n k!)²`, the constant higher-order curvature of simply connected domains.
pub fn disk_kappa_n(n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("curvature order must be at least 1"));
    }
    let mut prod = 1.0;
    let mut fact = 1.0;
    for k in 1..=n {
        fact *= k as f64;
        prod *= fact;
    }
    Ok(-4.0 * prod * prod)
}
