//! Composite Gauss–Legendre quadrature of curve speeds, cumulative arc-length
//! tables, and their monotone inversion.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Numerical settings for arc-length integrals and the scalar solves built on them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureConfig {
    pub panels: usize,
    pub nodes_per_panel: usize,
    /// Relative tolerance of the adaptive bisection inside each panel.
    pub panel_tol: f64,
    /// Absolute tolerance in the curve parameter for reparameterisation solves.
    pub refine_tol: f64,
    pub max_bracket_doublings: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            panels: 64,
            nodes_per_panel: 4,
            panel_tol: 1e-13,
            refine_tol: 1e-10,
            max_bracket_doublings: 60,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.panels == 0 || self.nodes_per_panel == 0 {
            return Err(Error::InvalidInput(
                "quadrature needs at least one panel and one node".into(),
            ));
        }
        if !(self.panel_tol > 0.0 && self.panel_tol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "panel_tol must be positive (got {})",
                self.panel_tol
            )));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "refine_tol must be positive (got {})",
                self.refine_tol
            )));
        }
        if self.max_bracket_doublings == 0 {
            return Err(Error::InvalidInput(
                "max_bracket_doublings must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn integrator(&self) -> Integrator {
        Integrator {
            rule: GaussLegendre::new(self.nodes_per_panel),
            rel_tol: self.panel_tol,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Newton on P_n from the Chebyshev-like initial guess.
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
                }
                dp = nf * (z * p1 - p2) / (z * z - 1.0);
                let prev = z;
                z = prev - p1 / dp;
                if (z - prev).abs() <= 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f`, one panel.
    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x)?;
        }
        Ok(acc * half)
    }
}

const MAX_SUBDIVISION_DEPTH: u32 = 40;
/// Bisections allowed per call, so that integrands too noisy to ever meet the
/// tolerance (finite-difference Jacobians, say) cost a bounded amount of work.
const MAX_SUBDIVISIONS: u32 = 1000;

/// Adaptive Gauss–Legendre: a panel is halved until the two-half estimate
/// agrees with the whole-panel one to `rel_tol`.
///
/// The threshold is `rel_tol` times the whole-interval estimate and is reused
/// unchanged at every level rather than split between the halves; the
/// subdivision budget bounds the total work instead.
///
/// Speeds of pullback geodesics can concentrate in a sliver of the parameter
/// interval (e.g. near the origin of a `sinh` chart), which fixed panels miss.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub rule: GaussLegendre,
    pub rel_tol: f64,
}

impl Integrator {
    pub fn new(nodes: usize, rel_tol: f64) -> Self {
        Integrator {
            rule: GaussLegendre::new(nodes),
            rel_tol,
        }
    }

    pub fn integrate<F>(&self, a: f64, b: f64, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if a == b {
            return Ok(0.0);
        }
        let whole = self.rule.integrate(a, b, &mut f)?;
        let tol = self.rel_tol * whole.abs();
        let mut budget = MAX_SUBDIVISIONS;
        self.refine(a, b, whole, tol, MAX_SUBDIVISION_DEPTH, &mut budget, &mut f)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine<F>(&self, a: f64, b: f64, whole: f64, tol: f64, depth: u32, budget: &mut u32, f: &mut F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(a, mid, &mut *f)?;
        let right = self.rule.integrate(mid, b, &mut *f)?;
        let halves = left + right;
        let floor = 8.0 * f64::EPSILON * halves.abs();
        if depth == 0 || *budget == 0 || (halves - whole).abs() <= tol.max(floor) {
            return Ok(halves);
        }
        *budget -= 1;
        Ok(self.refine(a, mid, left, tol, depth - 1, budget, f)?
            + self.refine(mid, b, right, tol, depth - 1, budget, f)?)
    }
}

/// Cumulative arc length `∫_{knots[0]}^{t} speed` sampled at equally spaced
/// panel boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLengthTable {
    pub knots: Vec<f64>,
    pub cumlen: Vec<f64>,
    pub total: f64,
}

impl ArcLengthTable {
    pub fn build<F>(lo: f64, hi: f64, panels: usize, quad: &Integrator, mut speed: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let width = (hi - lo) / panels as f64;
        let mut knots = Vec::with_capacity(panels + 1);
        let mut cumlen = Vec::with_capacity(panels + 1);
        knots.push(lo);
        cumlen.push(0.0);
        let mut acc = 0.0;
        for k in 0..panels {
            let a = lo + k as f64 * width;
            let b = if k + 1 == panels {
                hi
            } else {
                lo + (k + 1) as f64 * width
            };
            acc += quad.integrate(a, b, &mut speed)?;
            knots.push(b);
            cumlen.push(acc);
        }
        Ok(ArcLengthTable {
            knots,
            cumlen,
            total: acc,
        })
    }

    /// Smallest parameter `t'` with `cumlen(t') = target`.
    ///
    /// The table brackets the answer within one panel (the piecewise-linear
    /// interpolant supplies the first trial point), bisection narrows the
    /// bracket to `tol`, and a final Newton step using `speed` polishes it.
    pub fn invert<F>(&self, target: f64, quad: &Integrator, tol: f64, mut speed: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let last = self.knots.len() - 1;
        if target <= 0.0 {
            return Ok(self.knots[0]);
        }
        if target >= self.total {
            return Ok(self.knots[last]);
        }
        // First knot whose cumulative length reaches the target.
        let upper = self.cumlen.partition_point(|&c| c < target);
        if self.cumlen[upper] == target {
            // Step back over flat stretches to honour "smallest".
            let mut k = upper;
            while k > 0 && self.cumlen[k - 1] == target {
                k -= 1;
            }
            return Ok(self.knots[k]);
        }
        let k = upper - 1;
        let (mut lo, mut hi) = (self.knots[k], self.knots[k + 1]);
        let base = self.cumlen[k];
        let start = lo;
        let partial = |t: f64, speed: &mut F| -> Result<f64> {
            Ok(base + quad.integrate(start, t, &mut *speed)?)
        };

        let frac = (target - base) / (self.cumlen[k + 1] - base);
        let mut trial = lo + frac * (hi - lo);
        while hi - lo > tol {
            if !(trial > lo && trial < hi) {
                trial = 0.5 * (lo + hi);
            }
            if partial(trial, &mut speed)? < target {
                lo = trial;
            } else {
                hi = trial;
            }
            trial = 0.5 * (lo + hi);
        }
        let mid = 0.5 * (lo + hi);
        let v = speed(mid)?;
        if v > 0.0 {
            let polished = mid - (partial(mid, &mut speed)? - target) / v;
            // Rounding in the bisection comparisons can leave the root just
            // outside the bracket, so allow one bracket width of slack.
            if (polished - mid).abs() <= hi - lo + tol {
                return Ok(polished);
            }
        }
        Ok(mid)
    }
}
