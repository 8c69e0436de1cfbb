//! Pointwise estimates of iso-monotonicity, iso-Lipschitz and restricted
//! isometry constants.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::manifold::{PullbackManifold, TangentVector};
use crate::Point;

fn separation(m: &PullbackManifold, x: &Point, xbar: &Point) -> Result<f64> {
    let d = m.iso_distance(xbar, x)?;
    if d == 0.0 {
        return Err(Error::InvalidInput("ratio is undefined at the reference point".into()));
    }
    Ok(d)
}

/// `⟨ξ(x), P^iso_{x←x̄} log^iso_x̄(x)⟩₂ / d^iso(x̄, x)²` for a field vanishing at `x̄`.
pub fn iso_monotonicity_ratio(
    m: &PullbackManifold,
    x: &Point,
    xbar: &Point,
    field_at_x: &TangentVector,
) -> Result<f64> {
    check_dim(m.dim(), field_at_x.vec.len())?;
    let d = separation(m, x, xbar)?;
    let log = m.iso_log(xbar, x)?;
    let moved = m.iso_transport(xbar, x, &log)?;
    Ok(field_at_x.vec.dot(&moved.vec) / (d * d))
}

/// `‖ξ(x)‖₂ / d^iso(x̄, x)`.
pub fn iso_lipschitz_ratio(
    m: &PullbackManifold,
    x: &Point,
    xbar: &Point,
    field_at_x: &TangentVector,
) -> Result<f64> {
    check_dim(m.dim(), field_at_x.vec.len())?;
    let d = separation(m, x, xbar)?;
    Ok(field_at_x.norm() / d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryWitnesses {
    /// `min ratio − 1`.
    pub lower: f64,
    /// `max ratio − 1`.
    pub upper: f64,
    /// `‖A log^iso_x(y)‖₂² / d^iso(x, y)²` per evaluated pair.
    pub ratios: Vec<f64>,
    pub skipped: usize,
}

/// Evaluates the restricted-isometry ratio over `pairs`; coincident pairs are
/// skipped with a warning.
pub fn restricted_isometry_check(
    m: &PullbackManifold,
    a: &DMatrix<f64>,
    pairs: &[(Point, Point)],
) -> Result<IsometryWitnesses> {
    check_dim(m.dim(), a.ncols())?;
    let mut ratios = Vec::with_capacity(pairs.len());
    let mut skipped = 0;
    for (i, (x, y)) in pairs.iter().enumerate() {
        let d = m.iso_distance(x, y)?;
        if d == 0.0 {
            log::warn!("restricted isometry check: pair {i} is coincident, skipping");
            skipped += 1;
            continue;
        }
        let log = m.iso_log(x, y)?;
        ratios.push((a * &log.vec).norm_squared() / (d * d));
    }
    if ratios.is_empty() {
        return Err(Error::InvalidInput("no non-coincident pairs to evaluate".into()));
    }
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(IsometryWitnesses {
        lower: min - 1.0,
        upper: max - 1.0,
        ratios,
        skipped,
    })
}
