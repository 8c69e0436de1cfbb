//! Diffeomorphisms `φ: R^d → R^d` that generate Euclidean pullback geometries.
//!
//! A [`Diffeomorphism`] bundles the forward map, its inverse, and the actions of
//! their Jacobians. The built-in maps have analytic Jacobian actions; user maps
//! may omit `jvp`/`inv_jvp` and fall back to central finite differences.

use std::f64::consts::TAU;
use std::fmt::Debug;

use nalgebra::{DVector, Vector2};

use crate::error::{check_dim, Error, Result};
use crate::{Point, Vector};

/// Step used by the finite-difference Jacobian fallback, relative to `1 + ‖x‖₂`.
pub const FD_REL_STEP: f64 = 1e-6;

pub trait Diffeomorphism: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    fn forward(&self, x: &Point) -> Result<Point>;

    fn inverse(&self, y: &Point) -> Result<Point>;

    /// `D_x φ [v]`.
    fn jvp(&self, x: &Point, v: &Vector) -> Result<Vector> {
        central_difference(x, v, |p| self.forward(p))
    }

    /// `D_y φ⁻¹ [w]`, with `y` given in φ-coordinates.
    fn inv_jvp(&self, y: &Point, w: &Vector) -> Result<Vector> {
        central_difference(y, w, |p| self.inverse(p))
    }
}

/// Directional central difference of `f` at `x` along `v`, with step
/// `h = FD_REL_STEP·(1 + ‖x‖₂)` taken along the unit direction of `v`.
pub fn central_difference<F>(x: &Point, v: &Vector, f: F) -> Result<Vector>
where
    F: Fn(&Point) -> Result<Point>,
{
    check_dim(x.len(), v.len())?;
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(DVector::zeros(x.len()));
    }
    let h = FD_REL_STEP * (1.0 + x.norm());
    let dir = v / norm;
    let plus = f(&(x + &dir * h))?;
    let minus = f(&(x - &dir * h))?;
    Ok((plus - minus) * (norm / (2.0 * h)))
}

fn check2(p: &Point) -> Result<Vector2<f64>> {
    check_dim(2, p.len())?;
    Ok(Vector2::new(p[0], p[1]))
}

fn pt2(a: f64, b: f64) -> Point {
    DVector::from_vec(vec![a, b])
}

/// `φ = id` on `R^d`. Every pullback mapping reduces to its Euclidean form.
#[derive(Debug, Clone)]
pub struct Identity {
    dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Identity { dim }
    }
}

impl Diffeomorphism for Identity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        "identity"
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim, x.len())?;
        Ok(x.clone())
    }

    fn inverse(&self, y: &Point) -> Result<Point> {
        check_dim(self.dim, y.len())?;
        Ok(y.clone())
    }

    fn jvp(&self, x: &Point, v: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, v.len())?;
        Ok(v.clone())
    }

    fn inv_jvp(&self, y: &Point, w: &Vector) -> Result<Vector> {
        check_dim(self.dim, y.len())?;
        check_dim(self.dim, w.len())?;
        Ok(w.clone())
    }
}

/// `φ(x) = (x₁ − β sin x₂, sinh(η x₂))`.
#[derive(Debug, Clone)]
pub struct River {
    pub beta: f64,
    pub eta: f64,
}

impl River {
    pub fn new(beta: f64, eta: f64) -> Result<Self> {
        if !(beta > 0.0 && eta > 0.0 && beta.is_finite() && eta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "river requires beta, eta > 0 (got beta={beta}, eta={eta})"
            )));
        }
        Ok(River { beta, eta })
    }
}

impl Default for River {
    fn default() -> Self {
        River {
            beta: 5.0,
            eta: 0.25,
        }
    }
}

impl Diffeomorphism for River {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &str {
        "river"
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        let x = check2(x)?;
        Ok(pt2(
            x[0] - self.beta * x[1].sin(),
            (self.eta * x[1]).sinh(),
        ))
    }

    fn inverse(&self, y: &Point) -> Result<Point> {
        let y = check2(y)?;
        let x2 = y[1].asinh() / self.eta;
        Ok(pt2(y[0] + self.beta * x2.sin(), x2))
    }

    fn jvp(&self, x: &Point, v: &Vector) -> Result<Vector> {
        let x = check2(x)?;
        let v = check2(v)?;
        Ok(pt2(
            v[0] - self.beta * x[1].cos() * v[1],
            self.eta * (self.eta * x[1]).cosh() * v[1],
        ))
    }

    fn inv_jvp(&self, y: &Point, w: &Vector) -> Result<Vector> {
        let y = check2(y)?;
        let w = check2(w)?;
        let x2 = y[1].asinh() / self.eta;
        let dx2 = w[1] / (self.eta * (1.0 + y[1] * y[1]).sqrt());
        Ok(pt2(w[0] + self.beta * x2.cos() * dx2, dx2))
    }
}

/// `φ(x) = (R/β, (∠x − R/β) mod 2π)` with `R = ‖x‖₂`.
///
/// The angular coordinate is reduced into `[0, 2π)`. Geodesics are straight
/// lines in φ-coordinates and are only meaningful between points whose images
/// do not straddle the cut at angle 0; the library does not unwrap angles.
/// The forward map is undefined at the origin.
#[derive(Debug, Clone)]
pub struct Spiral {
    pub beta: f64,
}

impl Spiral {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "spiral requires beta > 0 (got {beta})"
            )));
        }
        Ok(Spiral { beta })
    }
}

impl Default for Spiral {
    fn default() -> Self {
        Spiral { beta: 0.25 }
    }
}

impl Diffeomorphism for Spiral {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &str {
        "spiral"
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        let x = check2(x)?;
        let r = x.norm();
        if r == 0.0 {
            return Err(Error::domain("spiral", "angle undefined at the origin"));
        }
        let angle = x[1].atan2(x[0]);
        let radial = r / self.beta;
        Ok(pt2(radial, (angle - radial).rem_euclid(TAU)))
    }

    fn inverse(&self, p: &Point) -> Result<Point> {
        let p = check2(p)?;
        let (r, theta) = (p[0], p[1]);
        let psi = r + theta;
        Ok(pt2(self.beta * r * psi.cos(), self.beta * r * psi.sin()))
    }

    fn jvp(&self, x: &Point, v: &Vector) -> Result<Vector> {
        let x = check2(x)?;
        let v = check2(v)?;
        let r2 = x.norm_squared();
        if r2 == 0.0 {
            return Err(Error::domain("spiral", "Jacobian undefined at the origin"));
        }
        let dr = x.dot(&v) / r2.sqrt();
        let dangle = (x[0] * v[1] - x[1] * v[0]) / r2;
        let dradial = dr / self.beta;
        Ok(pt2(dradial, dangle - dradial))
    }

    fn inv_jvp(&self, p: &Point, w: &Vector) -> Result<Vector> {
        let p = check2(p)?;
        let w = check2(w)?;
        let (r, theta) = (p[0], p[1]);
        let (s, c) = (r + theta).sin_cos();
        let dpsi = w[0] + w[1];
        Ok(pt2(
            self.beta * (w[0] * c - r * s * dpsi),
            self.beta * (w[0] * s + r * c * dpsi),
        ))
    }
}

/// `φ(x) = (x₁ − a x₂² − z, x₂)`.
#[derive(Debug, Clone)]
pub struct Banana {
    pub a: f64,
    pub z: f64,
}

impl Banana {
    pub fn new(a: f64, z: f64) -> Result<Self> {
        if !(a.is_finite() && z.is_finite()) {
            return Err(Error::InvalidInput("banana parameters must be finite".into()));
        }
        Ok(Banana { a, z })
    }
}

impl Default for Banana {
    fn default() -> Self {
        Banana { a: 1.0 / 9.0, z: 0.0 }
    }
}

impl Diffeomorphism for Banana {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &str {
        "banana"
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        let x = check2(x)?;
        Ok(pt2(x[0] - self.a * x[1] * x[1] - self.z, x[1]))
    }

    fn inverse(&self, y: &Point) -> Result<Point> {
        let y = check2(y)?;
        Ok(pt2(y[0] + self.a * y[1] * y[1] + self.z, y[1]))
    }

    fn jvp(&self, x: &Point, v: &Vector) -> Result<Vector> {
        let x = check2(x)?;
        let v = check2(v)?;
        Ok(pt2(v[0] - 2.0 * self.a * x[1] * v[1], v[1]))
    }

    fn inv_jvp(&self, y: &Point, w: &Vector) -> Result<Vector> {
        let y = check2(y)?;
        let w = check2(w)?;
        Ok(pt2(w[0] + 2.0 * self.a * y[1] * w[1], w[1]))
    }
}

/// The one-dimensional map `φ(x) = sinh(x + 1)`.
#[derive(Debug, Clone, Default)]
pub struct SinhShift;

impl Diffeomorphism for SinhShift {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "sinh"
    }

    fn forward(&self, x: &Point) -> Result<Point> {
        check_dim(1, x.len())?;
        Ok(DVector::from_element(1, (x[0] + 1.0).sinh()))
    }

    fn inverse(&self, y: &Point) -> Result<Point> {
        check_dim(1, y.len())?;
        Ok(DVector::from_element(1, y[0].asinh() - 1.0))
    }

    fn jvp(&self, x: &Point, v: &Vector) -> Result<Vector> {
        check_dim(1, x.len())?;
        check_dim(1, v.len())?;
        Ok(DVector::from_element(1, (x[0] + 1.0).cosh() * v[0]))
    }

    fn inv_jvp(&self, y: &Point, w: &Vector) -> Result<Vector> {
        check_dim(1, y.len())?;
        check_dim(1, w.len())?;
        Ok(DVector::from_element(1, w[0] / (1.0 + y[0] * y[0]).sqrt()))
    }
}
