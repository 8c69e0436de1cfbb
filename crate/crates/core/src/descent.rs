//! Iso-Riemannian descent `x⁺ = exp^iso_x(−r ξ_x)`, with and without
//! backtracking, and the iso-barycentre solver built on it.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result, Stall};
use crate::manifold::{PullbackManifold, TangentVector};
use crate::Point;

/// Backtracking parameters shared by the barycentre and projected-gradient solvers.
///
/// Every outer iteration starts from `r0`; a rejected trial multiplies the
/// step by `c`. `max_backtracks` counts trial points per outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchConfig {
    pub r0: f64,
    pub c: f64,
    pub max_backtracks: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            r0: 1.0,
            c: 0.5,
            max_backtracks: 50,
            max_iters: 500,
            tol: 1e-2,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return bad(format!("r0 must be positive (got {})", self.r0));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return bad(format!("c must lie in (0, 1) (got {})", self.c));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive (got {})", self.tol));
        }
        if self.max_backtracks == 0 || self.max_iters == 0 {
            return bad("max_backtracks and max_iters must be positive".into());
        }
        Ok(())
    }
}

/// Iterates and monitored quantities of a descent run.
///
/// Row 0 is the initial iterate, recorded with step size 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub iterates: Vec<Point>,
    pub field_norms: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub objectives: Option<Vec<f64>>,
    pub converged: bool,
}

impl ConvergenceTrace {
    fn with_objectives(track: bool) -> Self {
        ConvergenceTrace {
            objectives: track.then(Vec::new),
            ..Default::default()
        }
    }

    fn push(&mut self, x: &Point, field_norm: f64, step: f64, objective: Option<f64>) {
        self.iterates.push(x.clone());
        self.field_norms.push(field_norm);
        self.step_sizes.push(step);
        if let (Some(obj), Some(v)) = (self.objectives.as_mut(), objective) {
            obj.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    /// Number of accepted steps.
    pub fn steps(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn last(&self) -> Option<&Point> {
        self.iterates.last()
    }

    pub fn field_norms_strictly_decrease(&self) -> bool {
        self.field_norms.windows(2).all(|w| w[1] < w[0])
    }

    /// `iter,field_norm,step_size,objective,x0,…` with 17 significant digits.
    /// The objective column is empty when no objective was tracked.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.iterates.first().map_or(0, |x| x.len());
        write!(w, "iter,field_norm,step_size,objective")?;
        for j in 0..d {
            write!(w, ",x{j}")?;
        }
        writeln!(w)?;
        for (i, x) in self.iterates.iter().enumerate() {
            write!(
                w,
                "{i},{},{},",
                fmt_f64(self.field_norms[i]),
                fmt_f64(self.step_sizes[i])
            )?;
            if let Some(obj) = &self.objectives {
                write!(w, "{}", fmt_f64(obj[i]))?;
            }
            for v in x.iter() {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Fixed CSV float format: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One IRD step `exp^iso_x(−r v)`.
pub fn ird_step(m: &PullbackManifold, x: &Point, v: &TangentVector, r: f64) -> Result<Point> {
    check_dim(x.len(), v.vec.len())?;
    let step = TangentVector {
        base: x.clone(),
        vec: &v.vec * (-r),
    };
    m.iso_exp(&step)
}

/// Which logarithm the barycentre field averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FieldVariant {
    /// `−(1/N) Σ log^iso_x(xⁱ)`, the field the iso-barycentre zeroes.
    #[default]
    IsoLog,
    /// `−(1/N) Σ log_x(xⁱ)`, the Levi-Civita counterpart.
    PlainLog,
}

/// `−(1/N) Σ log^iso_x(xⁱ)`.
pub fn iso_barycentre_field(m: &PullbackManifold, x: &Point, points: &[Point]) -> Result<TangentVector> {
    barycentre_field(m, x, points, FieldVariant::IsoLog)
}

pub fn barycentre_field(
    m: &PullbackManifold,
    x: &Point,
    points: &[Point],
    variant: FieldVariant,
) -> Result<TangentVector> {
    if points.is_empty() {
        return Err(Error::InvalidInput("barycentre field of an empty point set".into()));
    }
    let logs: Vec<TangentVector> = points
        .par_iter()
        .map(|p| match variant {
            FieldVariant::IsoLog => m.iso_log(x, p),
            FieldVariant::PlainLog => m.lc_log(x, p),
        })
        .collect::<Result<_>>()?;
    // Sequential sum keeps the result independent of the thread schedule.
    let mut acc = TangentVector::zero(x.clone());
    for l in &logs {
        acc.vec += &l.vec;
    }
    Ok(acc.scaled(-1.0 / points.len() as f64))
}

/// Backtracking from `cfg.r0`; `judge` returns `Some` for an acceptable trial.
///
/// Trial points the iso-exponential cannot produce count as rejections.
pub(crate) fn backtrack<T, F>(
    m: &PullbackManifold,
    x: &Point,
    xi: &TangentVector,
    cfg: &LineSearchConfig,
    mut judge: F,
) -> Result<Option<(Point, f64, T)>>
where
    F: FnMut(&Point) -> Result<Option<T>>,
{
    let mut r = cfg.r0;
    for _ in 0..cfg.max_backtracks {
        match ird_step(m, x, xi, r) {
            Ok(trial) => {
                if let Some(data) = judge(&trial)? {
                    return Ok(Some((trial, r, data)));
                }
            }
            Err(e @ (Error::Domain { .. } | Error::NonConvergence { .. })) => {
                log::debug!("trial step r = {r} rejected: {e}");
            }
            Err(e) => return Err(e),
        }
        r *= cfg.c;
    }
    Ok(None)
}

/// Iso-barycentre by IRD with backtracking on the field norm.
///
/// Starts at the closed-form (Levi-Civita) barycentre. A trial is accepted
/// only if it strictly decreases `‖ξ‖₂`. Reaching `max_iters` returns the
/// last iterate with `converged = false`; exhausting the backtracks returns
/// [`Error::Stalled`] with the best iterate.
pub fn iso_barycentre(
    m: &PullbackManifold,
    points: &[Point],
    cfg: &LineSearchConfig,
) -> Result<(Point, ConvergenceTrace)> {
    cfg.validate()?;
    let x0 = m.closed_form_barycentre(points)?;
    iso_barycentre_from(m, points, &x0, cfg)
}

/// [`iso_barycentre`] from a caller-chosen starting point.
pub fn iso_barycentre_from(
    m: &PullbackManifold,
    points: &[Point],
    x0: &Point,
    cfg: &LineSearchConfig,
) -> Result<(Point, ConvergenceTrace)> {
    cfg.validate()?;
    let mut trace = ConvergenceTrace::with_objectives(false);
    let mut x = x0.clone();
    let mut xi = iso_barycentre_field(m, &x, points)?;
    let mut norm = xi.norm();
    trace.push(&x, norm, 0.0, None);

    for _ in 0..cfg.max_iters {
        if norm < cfg.tol {
            trace.converged = true;
            return Ok((x, trace));
        }
        let found = backtrack(m, &x, &xi, cfg, |trial| {
            let field = iso_barycentre_field(m, trial, points)?;
            Ok((field.norm() < norm).then_some(field))
        })?;
        let Some((next, r, field)) = found else {
            return Err(Error::Stalled(Box::new(Stall { best: x, trace })));
        };
        x = next;
        xi = field;
        norm = xi.norm();
        trace.push(&x, norm, r, None);
    }
    trace.converged = norm < cfg.tol;
    Ok((x, trace))
}

/// Fixed-step IRD `x⁺ = exp^iso_x(−r ξ(x))` on an arbitrary field, stopping once
/// `‖ξ‖₂ < tol` or after `max_iters` steps.
pub fn fixed_step_ird<F>(
    m: &PullbackManifold,
    x0: &Point,
    r: f64,
    tol: f64,
    max_iters: usize,
    mut field: F,
) -> Result<(Point, ConvergenceTrace)>
where
    F: FnMut(&Point) -> Result<TangentVector>,
{
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("step size must be positive (got {r})")));
    }
    let mut trace = ConvergenceTrace::with_objectives(false);
    let mut x = x0.clone();
    let mut xi = field(&x)?;
    trace.push(&x, xi.norm(), 0.0, None);
    for _ in 0..max_iters {
        if xi.norm() < tol {
            break;
        }
        x = ird_step(m, &x, &xi, r)?;
        xi = field(&x)?;
        trace.push(&x, xi.norm(), r, None);
    }
    trace.converged = xi.norm() < tol;
    Ok((x, trace))
}

/// Fixed-step IRD on the iso-barycentre field.
pub fn iso_barycentre_fixed_step(
    m: &PullbackManifold,
    points: &[Point],
    x0: &Point,
    r: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(Point, ConvergenceTrace)> {
    fixed_step_ird(m, x0, r, tol, max_iters, |x| iso_barycentre_field(m, x, points))
}

/// Objective values are recorded alongside the trace when a caller supplies them.
pub(crate) fn new_objective_trace() -> ConvergenceTrace {
    ConvergenceTrace::with_objectives(true)
}

pub(crate) fn push_row(trace: &mut ConvergenceTrace, x: &Point, norm: f64, step: f64, obj: f64) {
    trace.push(x, norm, step, Some(obj));
}
