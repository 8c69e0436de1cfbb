//! Euclidean pullback manifolds `(R^d, (·,·)^φ)` and their closed-form
//! Levi-Civita mappings.
//!
//! With `φ` pulling back the standard inner product, every mapping is the
//! Euclidean rule applied in φ-coordinates:
//!
//! ```text
//! d(x, y)      = ‖φ(x) − φ(y)‖₂
//! γ_{x,y}(t)   = φ⁻¹((1 − t) φ(x) + t φ(y))
//! exp_x(ξ)     = φ⁻¹(φ(x) + D_xφ[ξ])
//! log_x(y)     = D_{φ(x)}φ⁻¹[φ(y) − φ(x)]
//! P_{y←x} ξ    = D_{φ(y)}φ⁻¹[D_xφ[ξ]]
//! ```

use std::sync::Arc;

use nalgebra::DVector;

use crate::diffeo::Diffeomorphism;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::quadrature::QuadratureConfig;
use crate::{Point, Vector};

/// An ambient vector attached to a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub vec: Vector,
}

impl TangentVector {
    pub fn new(base: Point, vec: Vector) -> Result<Self> {
        check_dim(base.len(), vec.len())?;
        Ok(TangentVector { base, vec })
    }

    pub fn zero(base: Point) -> Self {
        let vec = DVector::zeros(base.len());
        TangentVector { base, vec }
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        TangentVector {
            base: self.base.clone(),
            vec: &self.vec * s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PullbackManifold {
    diffeo: Arc<dyn Diffeomorphism>,
    quad: QuadratureConfig,
}

impl PullbackManifold {
    pub fn new(diffeo: Arc<dyn Diffeomorphism>) -> Self {
        PullbackManifold {
            diffeo,
            quad: QuadratureConfig::default(),
        }
    }

    pub fn with_quadrature(mut self, quad: QuadratureConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn diffeo(&self) -> &Arc<dyn Diffeomorphism> {
        &self.diffeo
    }

    pub fn quadrature(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub fn dim(&self) -> usize {
        self.diffeo.dim()
    }

    /// Validated forward map.
    pub fn phi(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.len())?;
        check_finite(x, "point")?;
        self.diffeo.forward(x)
    }

    /// Validated inverse map; the result must be finite.
    pub fn phi_inv(&self, y: &Point) -> Result<Point> {
        let x = self.diffeo.inverse(y)?;
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::domain("φ⁻¹", "inverse is not finite at this φ-point"))
        }
    }

    pub fn lc_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok((self.phi(x)? - self.phi(y)?).norm())
    }

    pub fn lc_geodesic(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        if !t.is_finite() {
            return Err(Error::NonFinite("geodesic time"));
        }
        let (px, py) = (self.phi(x)?, self.phi(y)?);
        if t == 0.0 {
            return Ok(x.clone());
        }
        if t == 1.0 {
            return Ok(y.clone());
        }
        self.phi_inv(&(px * (1.0 - t) + py * t))
    }

    /// `γ̇_{x,y}(t)`, based at `γ_{x,y}(t)`.
    pub fn lc_geodesic_velocity(&self, x: &Point, y: &Point, t: f64) -> Result<TangentVector> {
        if !t.is_finite() {
            return Err(Error::NonFinite("geodesic time"));
        }
        let (px, py) = (self.phi(x)?, self.phi(y)?);
        let delta = &py - &px;
        let at = px * (1.0 - t) + py * t;
        let vec = self.diffeo.inv_jvp(&at, &delta)?;
        let base = match t {
            t if t == 0.0 => x.clone(),
            t if t == 1.0 => y.clone(),
            _ => self.phi_inv(&at)?,
        };
        Ok(TangentVector { base, vec })
    }

    /// `‖γ̇(s)‖₂` along the φ-coordinate segment `start + s·delta`.
    pub(crate) fn segment_speed(&self, start: &Point, delta: &Vector, s: f64) -> Result<f64> {
        let at = start + delta * s;
        Ok(self.diffeo.inv_jvp(&at, delta)?.norm())
    }

    pub fn lc_exp(&self, xi: &TangentVector) -> Result<Point> {
        check_dim(self.dim(), xi.vec.len())?;
        check_finite(&xi.vec, "tangent vector")?;
        if xi.vec.iter().all(|v| *v == 0.0) {
            return Ok(xi.base.clone());
        }
        let px = self.phi(&xi.base)?;
        let push = self.diffeo.jvp(&xi.base, &xi.vec)?;
        self.phi_inv(&(px + push))
    }

    pub fn lc_log(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let (px, py) = (self.phi(x)?, self.phi(y)?);
        let vec = self.diffeo.inv_jvp(&px, &(py - &px))?;
        Ok(TangentVector {
            base: x.clone(),
            vec,
        })
    }

    /// Parallel transport of `xi` (based at `x`) to `y`.
    pub fn lc_transport(&self, x: &Point, y: &Point, xi: &TangentVector) -> Result<TangentVector> {
        check_dim(self.dim(), xi.vec.len())?;
        check_finite(&xi.vec, "tangent vector")?;
        let py = self.phi(y)?;
        self.phi(x)?;
        let pushed = self.diffeo.jvp(x, &xi.vec)?;
        let vec = self.diffeo.inv_jvp(&py, &pushed)?;
        Ok(TangentVector {
            base: y.clone(),
            vec,
        })
    }

    /// Minimiser of `Σ d(·, xⁱ)²`: `φ⁻¹(mean φ(xⁱ))`.
    pub fn closed_form_barycentre(&self, points: &[Point]) -> Result<Point> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("barycentre of an empty point set".into()))?;
        if points.len() == 1 {
            self.phi(first)?;
            return Ok(first.clone());
        }
        let mut sum = DVector::zeros(self.dim());
        for p in points {
            sum += self.phi(p)?;
        }
        self.phi_inv(&(sum / points.len() as f64))
    }
}
