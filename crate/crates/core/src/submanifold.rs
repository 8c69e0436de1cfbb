//! Geodesic submanifolds (φ⁻¹ images of affine subspaces), ℓ²-orthogonal
//! tangent projections, and projected-gradient IRD on them.

use nalgebra::{DMatrix, DVector};

use crate::descent::{backtrack, new_objective_trace, push_row, ConvergenceTrace, LineSearchConfig};
use crate::error::{check_dim, Error, Result, Stall};
use crate::manifold::{PullbackManifold, TangentVector};
use crate::{Point, Vector};

const ORTHONORMAL_TOL: f64 = 1e-10;
const MEMBERSHIP_TOL: f64 = 1e-8;
const SECOND_DIFF_STEP: f64 = 1e-4;

/// `{ φ⁻¹(φ(base) + Q c) : c ∈ R^m }` with `Q` (`d × m`) orthonormal.
#[derive(Debug, Clone)]
pub struct GeodesicSubmanifold {
    manifold: PullbackManifold,
    base: Point,
    phi_basis: DMatrix<f64>,
    phi_base: Point,
}

impl GeodesicSubmanifold {
    pub fn new(manifold: PullbackManifold, base: Point, phi_basis: DMatrix<f64>) -> Result<Self> {
        let d = manifold.dim();
        check_dim(d, phi_basis.nrows())?;
        if phi_basis.ncols() == 0 || phi_basis.ncols() > d {
            return Err(Error::InvalidInput(format!(
                "submanifold dimension must be in 1..={d} (got {})",
                phi_basis.ncols()
            )));
        }
        let gram = phi_basis.transpose() * &phi_basis;
        let off = (gram - DMatrix::identity(phi_basis.ncols(), phi_basis.ncols())).amax();
        if off > ORTHONORMAL_TOL {
            return Err(Error::DegenerateBasis(format!(
                "φ-basis columns are not orthonormal (max deviation {off:.3e})"
            )));
        }
        let phi_base = manifold.phi(&base)?;
        Ok(GeodesicSubmanifold {
            manifold,
            base,
            phi_basis,
            phi_base,
        })
    }

    /// Orthonormalises `spanning` (columns in φ-coordinates) first.
    pub fn from_spanning(manifold: PullbackManifold, base: Point, spanning: DMatrix<f64>) -> Result<Self> {
        check_dim(manifold.dim(), spanning.nrows())?;
        let q = orthonormalize(&spanning)?;
        Self::new(manifold, base, q)
    }

    /// Pushes tangent vectors at `base` through `D_baseφ` and orthonormalises.
    pub fn from_tangent_basis(manifold: PullbackManifold, base: Point, tangent: DMatrix<f64>) -> Result<Self> {
        check_dim(manifold.dim(), tangent.nrows())?;
        let mut pushed = DMatrix::zeros(tangent.nrows(), tangent.ncols());
        for (j, col) in tangent.column_iter().enumerate() {
            let v = manifold.diffeo().jvp(&base, &col.into_owned())?;
            pushed.set_column(j, &v);
        }
        Self::from_spanning(manifold, base, pushed)
    }

    pub fn manifold(&self) -> &PullbackManifold {
        &self.manifold
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn phi_basis(&self) -> &DMatrix<f64> {
        &self.phi_basis
    }

    pub fn dim(&self) -> usize {
        self.phi_basis.ncols()
    }

    /// `Qᵀ(φ(x) − φ(base))`.
    pub fn coords(&self, x: &Point) -> Result<DVector<f64>> {
        let diff = self.manifold.phi(x)? - &self.phi_base;
        Ok(self.phi_basis.transpose() * diff)
    }

    pub fn point_at(&self, coords: &DVector<f64>) -> Result<Point> {
        check_dim(self.dim(), coords.len())?;
        self.manifold.phi_inv(&(&self.phi_base + &self.phi_basis * coords))
    }

    /// Distance in φ-coordinates from `φ(x) − φ(base)` to `span(Q)`.
    pub fn membership_residual(&self, x: &Point) -> Result<f64> {
        let diff = self.manifold.phi(x)? - &self.phi_base;
        let along = &self.phi_basis * (self.phi_basis.transpose() * &diff);
        Ok((diff - along).norm())
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        let scale = 1.0 + (self.manifold.phi(x)? - &self.phi_base).norm();
        Ok(self.membership_residual(x)? <= MEMBERSHIP_TOL * scale)
    }

    fn require_member(&self, x: &Point) -> Result<()> {
        if self.contains(x)? {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "point is off the submanifold (residual {:.3e})",
                self.membership_residual(x)?
            )))
        }
    }

    /// `U_x`: columns `D_{φ(x)}φ⁻¹[qⱼ]`, a basis of the tangent space of the
    /// submanifold at `x`.
    pub fn tangent_basis(&self, x: &Point) -> Result<DMatrix<f64>> {
        let px = self.manifold.phi(x)?;
        let mut u = DMatrix::zeros(self.phi_basis.nrows(), self.dim());
        for (j, q) in self.phi_basis.column_iter().enumerate() {
            let col = self.manifold.diffeo().inv_jvp(&px, &q.into_owned())?;
            u.set_column(j, &col);
        }
        Ok(u)
    }

    /// `U (UᵀU)⁻¹ Uᵀ v`, the ℓ²-orthogonal projection onto the tangent space at `x`.
    pub fn tangent_projection(&self, x: &Point, v: &Vector) -> Result<TangentVector> {
        check_dim(self.manifold.dim(), v.len())?;
        self.require_member(x)?;
        let u = self.tangent_basis(x)?;
        let gram = u.transpose() * &u;
        let scale = gram.diagonal().amax();
        let chol = gram
            .clone()
            .cholesky()
            .filter(|c| {
                let l = c.l_dirty().diagonal();
                l.iter().all(|v| v * v > f64::EPSILON * scale * gram.nrows() as f64)
            })
            .ok_or_else(|| Error::DegenerateBasis("tangent Gram matrix is singular".into()))?;
        let coef = chol.solve(&(u.transpose() * v));
        Ok(TangentVector {
            base: x.clone(),
            vec: u * coef,
        })
    }
}

fn orthonormalize(spanning: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (d, m) = spanning.shape();
    if m == 0 || m > d {
        return Err(Error::InvalidInput(format!(
            "need between 1 and {d} spanning vectors (got {m})"
        )));
    }
    // Modified Gram–Schmidt with one reorthogonalisation pass.
    let mut q = DMatrix::<f64>::zeros(d, m);
    for j in 0..m {
        let mut v = spanning.column(j).into_owned();
        let original = v.norm();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v -= qi * proj;
            }
        }
        let n = v.norm();
        if !(n > 1e-12 * original.max(f64::MIN_POSITIVE)) {
            return Err(Error::DegenerateBasis(format!(
                "spanning vector {j} is linearly dependent on the previous ones"
            )));
        }
        q.set_column(j, &(v / n));
    }
    Ok(q)
}

/// A twice-differentiable objective on `R^d`.
pub trait Objective {
    fn value(&self, x: &Point) -> Result<f64>;
    fn gradient(&self, x: &Point) -> Result<Vector>;

    /// `D²f(x)[v]`; central differences of the gradient unless overridden.
    fn hessian_vec(&self, x: &Point, v: &Vector) -> Result<Vector> {
        let n = v.norm();
        if n == 0.0 {
            return Ok(DVector::zeros(v.len()));
        }
        let h = 1e-5 * (1.0 + x.norm()) / n;
        let plus = self.gradient(&(x + v * h))?;
        let minus = self.gradient(&(x - v * h))?;
        Ok((plus - minus) / (2.0 * h))
    }
}

/// `f(x) = ½‖A x − b‖₂²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LeastSquares {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        Ok(LeastSquares { a, b })
    }

    fn residual(&self, x: &Point) -> Result<DVector<f64>> {
        check_dim(self.a.ncols(), x.len())?;
        Ok(&self.a * x - &self.b)
    }
}

impl Objective for LeastSquares {
    fn value(&self, x: &Point) -> Result<f64> {
        Ok(0.5 * self.residual(x)?.norm_squared())
    }

    fn gradient(&self, x: &Point) -> Result<Vector> {
        Ok(self.a.transpose() * self.residual(x)?)
    }

    fn hessian_vec(&self, x: &Point, v: &Vector) -> Result<Vector> {
        check_dim(self.a.ncols(), x.len())?;
        Ok(self.a.transpose() * (&self.a * v))
    }
}

/// Projected-gradient IRD with backtracking on the objective.
///
/// `ξ = P_x ∇f(x)`, trial `exp^iso_x(−r ξ)`, accepted iff the objective
/// strictly decreases. Stops when `‖P_x ∇f(x)‖₂ / |f(x₀)| < cfg.tol` (the
/// denominator is replaced by 1 if `f(x₀) = 0`).
pub fn l2pg_ird<F: Objective + ?Sized>(
    s: &GeodesicSubmanifold,
    f: &F,
    x0: &Point,
    cfg: &LineSearchConfig,
) -> Result<(Point, ConvergenceTrace)> {
    cfg.validate()?;
    s.require_member(x0)?;
    let m = s.manifold();
    let f0 = f.value(x0)?;
    let denom = if f0 == 0.0 { 1.0 } else { f0.abs() };

    let mut trace = new_objective_trace();
    let mut x = x0.clone();
    let mut fx = f0;
    let mut xi = s.tangent_projection(&x, &f.gradient(&x)?)?;
    push_row(&mut trace, &x, xi.norm(), 0.0, fx);

    for _ in 0..cfg.max_iters {
        if xi.norm() / denom < cfg.tol {
            trace.converged = true;
            return Ok((x, trace));
        }
        let found = backtrack(m, &x, &xi, cfg, |trial| {
            let ft = f.value(trial)?;
            Ok((ft < fx).then_some(ft))
        })?;
        let Some((next, r, ft)) = found else {
            return Err(Error::Stalled(Box::new(Stall { best: x, trace })));
        };
        x = next;
        fx = ft;
        xi = s.tangent_projection(&x, &f.gradient(&x)?)?;
        push_row(&mut trace, &x, xi.norm(), r, fx);
    }
    trace.converged = xi.norm() / denom < cfg.tol;
    Ok((x, trace))
}

/// The two terms bounding the iso-convexity of `f` restricted to a 1D
/// geodesic submanifold, evaluated at `γ_{x,y}(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityTerms {
    pub t: f64,
    /// `D²f[γ̇, γ̇] / ‖γ̇‖₂²`.
    pub hess_term: f64,
    /// `⟨(I − P)∇f, γ̈⟩₂ / ‖γ̇‖₂²`.
    pub curvature_term: f64,
}

impl ConvexityTerms {
    pub fn sum(&self) -> f64 {
        self.hess_term + self.curvature_term
    }
}

/// Evaluates [`ConvexityTerms`] along the Levi-Civita geodesic from `x` to `y`.
/// `γ̈` is a central difference of the geodesic velocity with step `1e-4`.
pub fn convexity_bounds_1d<F: Objective + ?Sized>(
    s: &GeodesicSubmanifold,
    f: &F,
    x: &Point,
    y: &Point,
    t_grid: &[f64],
) -> Result<Vec<ConvexityTerms>> {
    if s.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "convexity bounds need a one-dimensional submanifold (got dimension {})",
            s.dim()
        )));
    }
    let m = s.manifold();
    let h = SECOND_DIFF_STEP;
    t_grid
        .iter()
        .map(|&t| {
            let vel = m.lc_geodesic_velocity(x, y, t)?;
            let speed2 = vel.vec.norm_squared();
            if speed2 == 0.0 {
                return Err(Error::DegenerateCurve("convexity bounds need x ≠ y"));
            }
            let accel = (m.lc_geodesic_velocity(x, y, t + h)?.vec
                - m.lc_geodesic_velocity(x, y, t - h)?.vec)
                / (2.0 * h);
            let at = &vel.base;
            let grad = f.gradient(at)?;
            let normal = &grad - s.tangent_projection(at, &grad)?.vec;
            let hess = f.hessian_vec(at, &vel.vec)?;
            Ok(ConvexityTerms {
                t,
                hess_term: vel.vec.dot(&hess) / speed2,
                curvature_term: normal.dot(&accel) / speed2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{Banana, Identity, River, SinhShift};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn p(v: &[f64]) -> Point {
        DVector::from_column_slice(v)
    }

    fn identity(d: usize) -> PullbackManifold {
        PullbackManifold::new(Arc::new(Identity::new(d)))
    }

    fn x_axis() -> GeodesicSubmanifold {
        GeodesicSubmanifold::new(identity(2), p(&[0.0, 0.0]), DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))
            .unwrap()
    }

    #[test]
    fn rejects_non_orthonormal_basis() {
        let q = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            GeodesicSubmanifold::new(identity(2), p(&[0.0, 0.0]), q.clone()),
            Err(Error::DegenerateBasis(_))
        ));
        let s = GeodesicSubmanifold::from_spanning(identity(2), p(&[0.0, 0.0]), q).unwrap();
        assert_relative_eq!(s.phi_basis()[(0, 0)], 0.5f64.sqrt(), epsilon = 1e-15);
        let dependent = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(GeodesicSubmanifold::from_spanning(identity(2), p(&[0.0, 0.0]), dependent).is_err());
    }

    #[test]
    fn coordinate_projection_under_identity() {
        let s = x_axis();
        let x = p(&[2.0, 0.0]);
        let v = s.tangent_projection(&x, &p(&[3.0, -4.0])).unwrap();
        assert_relative_eq!(v.vec, p(&[3.0, 0.0]), epsilon = 1e-15);
        assert!(s.tangent_projection(&p(&[0.0, 1.0]), &p(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn projection_is_idempotent_on_river() {
        let m = PullbackManifold::new(Arc::new(River::default()));
        let s = GeodesicSubmanifold::from_spanning(
            m,
            p(&[0.3, -0.5]),
            DMatrix::from_column_slice(2, 1, &[0.6, 0.8]),
        )
        .unwrap();
        let x = s.point_at(&p(&[1.7])).unwrap();
        assert!(s.contains(&x).unwrap());
        let once = s.tangent_projection(&x, &p(&[0.4, -2.0])).unwrap();
        let twice = s.tangent_projection(&x, &once.vec).unwrap();
        assert!((&once.vec - &twice.vec).norm() < 1e-10);
    }

    #[test]
    fn from_tangent_basis_contains_exp_ray() {
        let m = PullbackManifold::new(Arc::new(River::default()));
        let base = p(&[0.1, 0.2]);
        let dir = p(&[1.0, -0.4]);
        let s = GeodesicSubmanifold::from_tangent_basis(m.clone(), base.clone(), DMatrix::from_column_slice(2, 1, dir.as_slice()))
            .unwrap();
        let y = m.iso_exp(&TangentVector::new(base, dir * 2.0).unwrap()).unwrap();
        assert!(s.contains(&y).unwrap());
    }

    #[test]
    fn l2pg_on_axis_finds_projection() {
        let s = x_axis();
        let target = p(&[3.0, 4.0]);
        let f = LeastSquares::new(DMatrix::identity(2, 2), target).unwrap();
        let cfg = LineSearchConfig {
            tol: 1e-10,
            ..Default::default()
        };
        let (x, trace) = l2pg_ird(&s, &f, &p(&[-1.0, 0.0]), &cfg).unwrap();
        assert_relative_eq!(x, p(&[3.0, 0.0]), epsilon = 1e-9);
        assert!(trace.converged);
        let objs = trace.objectives.as_ref().unwrap();
        assert!(objs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn l2pg_stays_feasible_on_banana() {
        let m = PullbackManifold::new(Arc::new(Banana::default()));
        let s = GeodesicSubmanifold::new(m, p(&[0.0, 0.0]), DMatrix::from_column_slice(2, 1, &[0.0, 1.0]))
            .unwrap();
        let f = LeastSquares::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.9]),
            p(&[1.0, 2.0]),
        )
        .unwrap();
        let x0 = s.point_at(&p(&[-2.0])).unwrap();
        let cfg = LineSearchConfig {
            tol: 1e-6,
            ..Default::default()
        };
        let (_, trace) = l2pg_ird(&s, &f, &x0, &cfg).unwrap();
        for x in &trace.iterates {
            assert!(s.contains(x).unwrap());
        }
    }

    #[test]
    fn convexity_terms_identity() {
        let s = GeodesicSubmanifold::from_spanning(
            identity(2),
            p(&[0.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[1.0, 2.0]),
        )
        .unwrap();
        let f = LeastSquares::new(DMatrix::identity(2, 2), p(&[0.0, 0.0])).unwrap();
        let terms = convexity_bounds_1d(&s, &f, &p(&[-1.0, -2.0]), &p(&[2.0, 4.0]), &[0.0, 0.3, 0.7, 1.0])
            .unwrap();
        for t in terms {
            assert_relative_eq!(t.hess_term, 1.0, epsilon = 1e-12);
            assert!(t.curvature_term.abs() < 1e-8);
        }
    }

    struct HalfSquare;

    impl Objective for HalfSquare {
        fn value(&self, x: &Point) -> Result<f64> {
            Ok(0.5 * x.norm_squared())
        }
        fn gradient(&self, x: &Point) -> Result<Vector> {
            Ok(x.clone())
        }
    }

    #[test]
    fn convexity_sum_is_one_in_one_dimension() {
        let m = PullbackManifold::new(Arc::new(SinhShift));
        let s = GeodesicSubmanifold::new(m, p(&[0.0]), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let terms = convexity_bounds_1d(&s, &HalfSquare, &p(&[-2.0]), &p(&[3.0]), &[0.1, 0.5, 0.9]).unwrap();
        for t in terms {
            assert!(t.curvature_term.abs() < 1e-12);
            assert!((t.sum() - 1.0).abs() < 1e-6);
        }
        let s2 = GeodesicSubmanifold::new(identity(2), p(&[0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        assert!(convexity_bounds_1d(&s2, &HalfSquare, &p(&[0.0, 0.0]), &p(&[1.0, 1.0]), &[0.5]).is_err());
    }
}
