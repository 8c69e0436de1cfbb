//! Isometrized ("iso") manifold mappings.
//!
//! The iso-connection keeps the Levi-Civita geodesic images but traverses them
//! at constant ℓ²-speed. All mappings are expressed through the closed-form
//! pullback mappings plus two scalar reparameterisations:
//!
//! * `timechange` `s_{x,y}(t)`: the curve time at which a fraction `t` of the
//!   ℓ² arc length of `γ_{x,y}` has been traversed;
//! * `vectorchange` `ℓ_x(ξ)`: the scale making the ℓ² arc length of
//!   `s ↦ exp_x(s ξ)`, `s ∈ [0, ℓ]`, equal to `‖ξ‖₂`.
//!
//! Arc lengths use composite Gauss–Legendre quadrature (see
//! [`QuadratureConfig`](crate::QuadratureConfig)). Tables are built per call.

use crate::error::{check_dim, Error, Result};
use crate::manifold::{PullbackManifold, TangentVector};
use crate::quadrature::ArcLengthTable;
use crate::{Point, Vector};

/// Levi-Civita geodesic written in φ-coordinates as `start + s·delta`.
struct Segment<'a> {
    manifold: &'a PullbackManifold,
    start: Point,
    delta: Vector,
}

impl Segment<'_> {
    fn speed(&self, s: f64) -> Result<f64> {
        self.manifold.segment_speed(&self.start, &self.delta, s)
    }

    fn is_degenerate(&self) -> bool {
        self.delta.iter().all(|v| *v == 0.0)
    }

    fn table(&self, lo: f64, hi: f64) -> Result<ArcLengthTable> {
        let quad = self.manifold.quadrature();
        if self.is_degenerate() {
            let n = quad.panels + 1;
            let width = (hi - lo) / quad.panels as f64;
            return Ok(ArcLengthTable {
                knots: (0..n).map(|k| lo + k as f64 * width).collect(),
                cumlen: vec![0.0; n],
                total: 0.0,
            });
        }
        ArcLengthTable::build(lo, hi, quad.panels, &quad.integrator(), |s| self.speed(s))
    }

    fn invert(&self, table: &ArcLengthTable, target: f64) -> Result<f64> {
        let quad = self.manifold.quadrature();
        table.invert(target, &quad.integrator(), quad.refine_tol, |s| self.speed(s))
    }
}

impl PullbackManifold {
    fn segment(&self, x: &Point, y: &Point) -> Result<Segment<'_>> {
        let start = self.phi(x)?;
        let delta = self.phi(y)? - &start;
        Ok(Segment {
            manifold: self,
            start,
            delta,
        })
    }

    /// Cumulative ℓ² arc length of `γ_{x,y}` at the panel boundaries of `[0, 1]`.
    pub fn arc_length_table(&self, x: &Point, y: &Point) -> Result<ArcLengthTable> {
        self.segment(x, y)?.table(0.0, 1.0)
    }

    /// `∫₀¹ ‖γ̇_{x,y}(s)‖₂ ds`. Symmetric, but not a metric in general.
    pub fn iso_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(self.arc_length_table(x, y)?.total)
    }

    pub fn timechange(&self, x: &Point, y: &Point, t: f64) -> Result<f64> {
        let seg = self.segment(x, y)?;
        if seg.is_degenerate() {
            return Err(Error::DegenerateCurve("timechange needs x ≠ y"));
        }
        let table = seg.table(0.0, 1.0)?;
        timechange_on(&seg, &table, t)
    }

    pub fn iso_geodesic(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        Ok(self.iso_geodesic_samples(x, y, &[t])?.remove(0))
    }

    /// `γ^iso_{x,y}` at several times, sharing one arc-length table.
    pub fn iso_geodesic_samples(&self, x: &Point, y: &Point, times: &[f64]) -> Result<Vec<Point>> {
        let seg = self.segment(x, y)?;
        if seg.is_degenerate() {
            return Err(Error::DegenerateCurve("iso-geodesic needs x ≠ y"));
        }
        let table = seg.table(0.0, 1.0)?;
        times
            .iter()
            .map(|&t| {
                let s = timechange_on(&seg, &table, t)?;
                match s {
                    s if s == 0.0 => Ok(x.clone()),
                    s if s == 1.0 => Ok(y.clone()),
                    s => self.phi_inv(&(&seg.start + &seg.delta * s)),
                }
            })
            .collect()
    }

    /// `ℓ_x(ξ)`: smallest `t' ≥ 0` with `d^iso(x, exp_x(t'ξ)) = ‖ξ‖₂`.
    ///
    /// Brackets by doubling `t'` from 1, then inverts the cumulative arc length
    /// over the bracket. Returns 0 for the zero vector.
    pub fn vectorchange(&self, xi: &TangentVector) -> Result<f64> {
        check_dim(self.dim(), xi.vec.len())?;
        let target = xi.norm();
        if !target.is_finite() {
            return Err(Error::NonFinite("tangent vector"));
        }
        if target == 0.0 {
            return Ok(0.0);
        }
        let start = self.phi(&xi.base)?;
        let delta = self.diffeo().jvp(&xi.base, &xi.vec)?;
        let seg = Segment {
            manifold: self,
            start,
            delta,
        };
        let quad = self.quadrature();
        let rule = quad.integrator();

        let mut hi = 1.0;
        let mut reached =
            ArcLengthTable::build(0.0, hi, quad.panels, &rule, |s| seg.speed(s))?.total;
        let mut doublings = 0;
        while reached < target {
            if doublings == quad.max_bracket_doublings {
                return Err(Error::NonConvergence {
                    doublings,
                    reached,
                    target,
                });
            }
            reached += ArcLengthTable::build(hi, 2.0 * hi, quad.panels, &rule, |s| seg.speed(s))?.total;
            hi *= 2.0;
            doublings += 1;
        }
        let table = seg.table(0.0, hi)?;
        seg.invert(&table, target)
    }

    /// `exp^iso_x(ξ) = exp_x(ℓ_x(ξ)·ξ)`.
    pub fn iso_exp(&self, xi: &TangentVector) -> Result<Point> {
        if xi.vec.iter().all(|v| *v == 0.0) {
            check_dim(self.dim(), xi.vec.len())?;
            return Ok(xi.base.clone());
        }
        let scale = self.vectorchange(xi)?;
        self.lc_exp(&xi.scaled(scale))
    }

    /// `log_x(y)` rescaled to ℓ²-norm `d^iso(x, y)`.
    pub fn iso_log(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let log = self.lc_log(x, y)?;
        let n = log.norm();
        if n == 0.0 {
            return Ok(TangentVector::zero(x.clone()));
        }
        let d = self.iso_distance(x, y)?;
        Ok(log.scaled(d / n))
    }

    /// `P^iso_{y←x} ξ = (‖log_x y‖₂ / ‖log_y x‖₂) · P_{y←x} ξ`; the identity when `x = y`.
    pub fn iso_transport(&self, x: &Point, y: &Point, xi: &TangentVector) -> Result<TangentVector> {
        let forward = self.lc_log(x, y)?.norm();
        let backward = self.lc_log(y, x)?.norm();
        let transported = self.lc_transport(x, y, xi)?;
        if forward == 0.0 || backward == 0.0 {
            return Ok(TangentVector {
                base: y.clone(),
                vec: xi.vec.clone(),
            });
        }
        Ok(transported.scaled(forward / backward))
    }

    /// Central finite-difference ℓ²-speeds of `γ^iso_{x,y}` at `n_samples`
    /// equally spaced interior times `i/(n+1)`.
    pub fn speed_profile(&self, x: &Point, y: &Point, n_samples: usize) -> Result<Vec<(f64, f64)>> {
        if n_samples == 0 {
            return Ok(Vec::new());
        }
        let h = (0.5 / (n_samples + 1) as f64).min(1e-4);
        let centres: Vec<f64> = (1..=n_samples)
            .map(|i| i as f64 / (n_samples + 1) as f64)
            .collect();
        let times: Vec<f64> = centres.iter().flat_map(|&t| [t - h, t + h]).collect();
        let pts = self.iso_geodesic_samples(x, y, &times)?;
        Ok(centres
            .iter()
            .zip(pts.chunks(2))
            .map(|(&t, pair)| (t, (&pair[1] - &pair[0]).norm() / (2.0 * h)))
            .collect())
    }
}

fn timechange_on(seg: &Segment<'_>, table: &ArcLengthTable, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!(
            "timechange is defined on [0, 1] (got {t})"
        )));
    }
    if t == 0.0 || t == 1.0 {
        return Ok(t);
    }
    seg.invert(table, t * table.total)
}
