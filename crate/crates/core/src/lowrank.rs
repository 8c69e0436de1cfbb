//! Rank-r tangent-space approximation of a data set from its iso-logarithms
//! at a base point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::PullbackManifold;
use crate::submanifold::GeodesicSubmanifold;
use crate::Point;

#[derive(Debug, Clone)]
pub struct RankApprox {
    /// Top-r left singular vectors of `logs` (`d × r`, orthonormal columns).
    pub basis: DMatrix<f64>,
    /// All singular values of `logs`, descending.
    pub singular_values: DVector<f64>,
    /// Columns `log^iso_base(xⁱ)`.
    pub logs: DMatrix<f64>,
}

impl RankApprox {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `Σ_{i > r} σᵢ²`.
    pub fn tail_energy(&self) -> f64 {
        self.singular_values
            .iter()
            .skip(self.rank())
            .map(|s| s * s)
            .sum()
    }

    /// `‖L − B Bᵀ L‖_F²`.
    pub fn reconstruction_error(&self) -> f64 {
        let fit = &self.basis * (self.basis.transpose() * &self.logs);
        (&self.logs - fit).norm_squared()
    }

    /// The geodesic submanifold through `base` spanned by the basis.
    pub fn submanifold(&self, m: &PullbackManifold, base: &Point) -> Result<GeodesicSubmanifold> {
        GeodesicSubmanifold::from_tangent_basis(m.clone(), base.clone(), self.basis.clone())
    }
}

pub fn iso_rank_r_approx(m: &PullbackManifold, points: &[Point], base: &Point, r: usize) -> Result<RankApprox> {
    let d = m.dim();
    let n = points.len();
    if r == 0 || r > d.min(n) {
        return Err(Error::InvalidInput(format!(
            "rank must be in 1..={} for {n} points in dimension {d} (got {r})",
            d.min(n)
        )));
    }
    let mut logs = DMatrix::zeros(d, n);
    for (j, x) in points.iter().enumerate() {
        logs.set_column(j, &m.iso_log(base, x)?.vec);
    }
    let svd = logs.clone().svd(true, false);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::DegenerateBasis("SVD did not produce left singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut basis = DMatrix::zeros(d, r);
    for (k, &idx) in order.iter().take(r).enumerate() {
        basis.set_column(k, &u.column(idx));
    }
    let singular_values = DVector::from_iterator(order.len(), order.iter().map(|&i| svd.singular_values[i]));
    Ok(RankApprox {
        basis,
        singular_values,
        logs,
    })
}
