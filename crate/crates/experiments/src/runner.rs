//! Runs one configured experiment and writes its CSV files and `manifest.json`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use isogeo_core::descent::fmt_f64;
use isogeo_core::{
    adjusted_rand_index, barycentre_field, convexity_bounds_1d, iso_barycentre, iso_kmeans, iso_lipschitz_ratio,
    iso_monotonicity_ratio, iso_rank_r_approx, l2pg_ird, registry, restricted_isometry_check, riemannian_kmeans,
    ConvergenceTrace, Error, FieldVariant, GeodesicSubmanifold, LeastSquares, Objective, Point, PullbackManifold,
    TangentVector,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, FieldChoice, OperatorKind};
use crate::datasets::{generate_dataset, grid, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// A line search ran out of backtracks.
    Stalled,
    /// The iteration cap was reached before the stopping rule fired.
    NotConverged,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Stalled | Status::NotConverged => 3,
            Status::Failed => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: Status,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
    pub error: Option<String>,
}

/// CSV files of one run, all written under a single directory.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(&mut self, name: &str) -> io::Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> io::Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    }

    fn trace(&mut self, name: &str, trace: &ConvergenceTrace) -> io::Result<()> {
        let mut w = self.create(name)?;
        trace.write_csv(&mut w)?;
        w.flush()
    }
}

struct Outcome {
    status: Status,
    summary: Value,
}

fn coords_header(lead: &str, prefix: &str, d: usize) -> String {
    let mut h = lead.to_string();
    for j in 0..d {
        if !h.is_empty() {
            h.push(',');
        }
        h.push_str(&format!("{prefix}{j}"));
    }
    h
}

fn join(v: &DVector<f64>) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn nan_to_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn build_manifold(cfg: &ExperimentConfig) -> anyhow::Result<PullbackManifold> {
    let diffeo = registry::build(&cfg.geometry.name, &cfg.geometry.params)?;
    Ok(PullbackManifold::new(diffeo).with_quadrature(cfg.quadrature.config()))
}

pub fn dataset(cfg: &ExperimentConfig, m: &PullbackManifold) -> anyhow::Result<Dataset> {
    let spec = cfg.dataset.as_ref().context("experiment needs a [dataset] section")?;
    generate_dataset(spec, m, &cfg.geometry.name)
}

/// Runs the experiment into [`ExperimentConfig::resolved_output_dir`].
///
/// Errors inside the experiment are reported through [`RunReport::status`];
/// `Err` is returned only if the output directory or manifest cannot be written.
pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<RunReport> {
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let start = Instant::now();
    let mut out = Output {
        dir: dir.clone(),
        files: Vec::new(),
    };
    let result = dispatch(cfg, &mut out);
    let wall = start.elapsed().as_secs_f64();
    let (status, summary, error) = match result {
        Ok(o) => (o.status, o.summary, None),
        Err(e) => {
            log::error!("{e:#}");
            (Status::Failed, Value::Null, Some(format!("{e:#}")))
        }
    };
    let manifest = json!({
        "experiment": cfg.experiment,
        "status": status,
        "error": error,
        "summary": summary,
        "files": out.files,
        "wall_time_seconds": wall,
        "versions": {
            "isogeo-experiments": env!("CARGO_PKG_VERSION"),
        },
        "config": cfg,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(RunReport {
        status,
        output_dir: dir,
        files: out.files,
        summary,
        error,
    })
}

fn dispatch(cfg: &ExperimentConfig, out: &mut Output) -> anyhow::Result<Outcome> {
    let m = build_manifold(cfg)?;
    match cfg.experiment {
        ExperimentKind::Geodesic => geodesic(cfg, &m, out),
        ExperimentKind::Barycentre => barycentre(cfg, &m, out),
        ExperimentKind::Kmeans => kmeans(cfg, &m, out),
        ExperimentKind::Ratios => ratios(cfg, &m, out),
        ExperimentKind::Inverse => inverse(cfg, &m, out),
        ExperimentKind::Rankr => rankr(cfg, &m, out),
    }
}

fn write_points(out: &mut Output, ds: &Dataset) -> io::Result<()> {
    let d = ds.points.first().map_or(0, |p| p.len());
    let rows = ds.points.iter().enumerate().map(|(i, x)| {
        let label = ds
            .labels
            .as_ref()
            .map_or(String::new(), |l| l[i].to_string());
        format!("{i},{label},{}", join(x))
    });
    out.csv("points.csv", &coords_header("index,label", "x", d), rows)
}

/// Samples `t ↦ γ(t)` on `samples` equispaced times in `[0, 1]`, either along
/// the iso-geodesic or the Levi-Civita geodesic.
pub fn geodesic_samples(
    m: &PullbackManifold,
    x: &Point,
    y: &Point,
    samples: usize,
    iso: bool,
) -> anyhow::Result<Vec<(f64, Point)>> {
    let times: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let pts = if iso {
        m.iso_geodesic_samples(x, y, &times)?
    } else {
        times.iter().map(|&t| m.lc_geodesic(x, y, t)).collect::<Result<_, _>>()?
    };
    Ok(times.into_iter().zip(pts).collect())
}

fn geodesic(cfg: &ExperimentConfig, m: &PullbackManifold, out: &mut Output) -> anyhow::Result<Outcome> {
    let g = cfg.geodesic.as_ref().context("missing [geodesic]")?;
    let x = DVector::from_column_slice(&g.from);
    let y = DVector::from_column_slice(&g.to);
    let d = m.dim();
    let lc = geodesic_samples(m, &x, &y, g.samples, false)?;
    let iso = if x == y {
        lc.clone()
    } else {
        geodesic_samples(m, &x, &y, g.samples, true)?
    };
    let header = format!("t,{},{}", coords_header("", "lc_x", d), coords_header("", "iso_x", d));
    let rows = lc
        .iter()
        .zip(&iso)
        .map(|((t, a), (_, b))| format!("{},{},{}", fmt_f64(*t), join(a), join(b)));
    out.csv("geodesic.csv", &header, rows)?;

    let mut summary = json!({
        "lc_distance": m.lc_distance(&x, &y)?,
        "iso_distance": m.iso_distance(&x, &y)?,
    });
    if x != y {
        let profile = m.speed_profile(&x, &y, g.samples)?;
        out.csv(
            "speed_profile.csv",
            "t,speed",
            profile.iter().map(|(t, s)| format!("{},{}", fmt_f64(*t), fmt_f64(*s))),
        )?;
        let n = profile.len() as f64;
        let mean = profile.iter().map(|p| p.1).sum::<f64>() / n;
        let var = profile.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n;
        summary["speed_mean"] = json!(mean);
        summary["speed_cv"] = json!(var.sqrt() / mean);
    }
    Ok(Outcome {
        status: Status::Ok,
        summary,
    })
}

fn barycentre(cfg: &ExperimentConfig, m: &PullbackManifold, out: &mut Output) -> anyhow::Result<Outcome> {
    let ds = dataset(cfg, m)?;
    write_points(out, &ds)?;
    let ls = cfg.solver.line_search();
    let (x, trace, status) = match iso_barycentre(m, &ds.points, &ls) {
        Ok((x, trace)) => {
            let status = if trace.converged { Status::Ok } else { Status::NotConverged };
            (x, trace, status)
        }
        Err(Error::Stalled(stall)) => (stall.best, stall.trace, Status::Stalled),
        Err(e) => return Err(e.into()),
    };
    out.trace("trace.csv", &trace)?;
    let closed_form = m.closed_form_barycentre(&ds.points)?;
    Ok(Outcome {
        status,
        summary: json!({
            "n_points": ds.points.len(),
            "iterations": trace.steps(),
            "converged": trace.converged,
            "final_field_norm": trace.field_norms.last(),
            "field_norms_strictly_decrease": trace.field_norms_strictly_decrease(),
            "iso_barycentre": vec_json(&x),
            "closed_form_barycentre": vec_json(&closed_form),
        }),
    })
}

fn kmeans(cfg: &ExperimentConfig, m: &PullbackManifold, out: &mut Output) -> anyhow::Result<Outcome> {
    let km = cfg.kmeans.as_ref().context("missing [kmeans]")?;
    let ds = dataset(cfg, m)?;
    if km.k > ds.points.len() {
        bail!("k = {} exceeds the number of points ({})", km.k, ds.points.len());
    }
    write_points(out, &ds)?;
    let riem = riemannian_kmeans(m, &ds.points, km.k, km.seed)?;
    let iso = iso_kmeans(m, &ds.points, km.k, km.seed, &cfg.solver.line_search())?;
    for (name, res) in [("riemannian", &riem), ("iso", &iso)] {
        let mut w = out.create(&format!("{name}_labels.csv"))?;
        res.write_labels_csv(&ds.points, &mut w)?;
        w.flush()?;
        let mut w = out.create(&format!("{name}_centroids.csv"))?;
        res.write_centroids_csv(&mut w)?;
        w.flush()?;
    }
    let ari = |labels: &[usize]| -> anyhow::Result<Value> {
        Ok(match &ds.labels {
            Some(truth) => json!(adjusted_rand_index(truth, labels)?),
            None => Value::Null,
        })
    };
    let centroids = |c: &[Point]| c.iter().map(vec_json).collect::<Vec<_>>();
    Ok(Outcome {
        status: if iso.converged { Status::Ok } else { Status::NotConverged },
        summary: json!({
            "k": km.k,
            "ari_iso": ari(&iso.labels)?,
            "ari_riemannian": ari(&riem.labels)?,
            "iso_iterations": iso.iterations,
            "iso_converged": iso.converged,
            "riemannian_iterations": riem.iterations,
            "iso_centroids": centroids(&iso.centroids),
            "riemannian_centroids": centroids(&riem.centroids),
        }),
    })
}

fn ratios(cfg: &ExperimentConfig, m: &PullbackManifold, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = cfg.ratios.as_ref().context("missing [ratios]")?;
    let ds = dataset(cfg, m)?;
    write_points(out, &ds)?;
    let (xbar, trace, status) = match iso_barycentre(m, &ds.points, &cfg.solver.line_search()) {
        Ok((x, trace)) => {
            let status = if trace.converged { Status::Ok } else { Status::NotConverged };
            (x, trace, status)
        }
        Err(Error::Stalled(stall)) => {
            log::warn!("iso-barycentre stalled; ratios use its best iterate");
            (stall.best, stall.trace, Status::Stalled)
        }
        Err(e) => return Err(e.into()),
    };
    out.trace("trace.csv", &trace)?;
    let variant = match spec.field {
        FieldChoice::Iso => FieldVariant::IsoLog,
        FieldChoice::Plain => FieldVariant::PlainLog,
    };

    // Undefined ratios (the reference point itself, or outside the chart) are NaN.
    let nodes = grid(&spec.extent, spec.steps);
    let mut mono = Vec::with_capacity(nodes.len());
    let mut lip = Vec::with_capacity(nodes.len());
    for x in &nodes {
        let eval = |x: &Point| -> Result<(f64, f64), Error> {
            let field: TangentVector = barycentre_field(m, x, &ds.points, variant)?;
            Ok((
                iso_monotonicity_ratio(m, x, &xbar, &field)?,
                iso_lipschitz_ratio(m, x, &xbar, &field)?,
            ))
        };
        let (a, b) = eval(x).unwrap_or_else(|e| {
            log::debug!("ratio undefined at {:?}: {e}", x.as_slice());
            (f64::NAN, f64::NAN)
        });
        mono.push(a);
        lip.push(b);
    }
    let d = m.dim();
    for (name, values) in [("monotonicity.csv", &mono), ("lipschitz.csv", &lip)] {
        let rows = nodes
            .iter()
            .zip(values.iter())
            .map(|(x, v)| format!("{},{}", join(x), fmt_f64(*v)));
        out.csv(name, &format!("{},value", coords_header("", "x", d)), rows)?;
    }
    let finite = |v: &[f64]| v.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let (mono_f, lip_f) = (finite(&mono), finite(&lip));
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome {
        status,
        summary: json!({
            "reference_point": vec_json(&xbar),
            "grid_nodes": nodes.len(),
            "undefined_nodes": nodes.len() - mono_f.len(),
            "monotonicity_min": nan_to_null(min(&mono_f)),
            "monotonicity_max": nan_to_null(max(&mono_f)),
            "lipschitz_min": nan_to_null(min(&lip_f)),
            "lipschitz_max": nan_to_null(max(&lip_f)),
        }),
    })
}

/// Forward operator and data of the inverse experiment.
pub fn inverse_problem(
    cfg: &ExperimentConfig,
    s: &GeodesicSubmanifold,
) -> anyhow::Result<(LeastSquares, Option<Point>)> {
    let inv = cfg.inverse.as_ref().context("missing [inverse]")?;
    let d = s.manifold().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(inv.seed);
    let a = match inv.operator {
        OperatorKind::Gaussian => {
            DMatrix::<f64>::from_fn(inv.rows, d, |_, _| StandardNormal.sample(&mut rng))
        }
        OperatorKind::Identity => DMatrix::identity(d, d),
    };
    let (b, truth) = match (&inv.b, inv.truth) {
        (Some(b), _) => (DVector::from_column_slice(b), None),
        (None, Some(t)) => {
            let x_true = s.point_at(&DVector::from_element(1, t))?;
            let noise = Normal::new(0.0, inv.noise_sigma)?;
            let b = &a * &x_true + DVector::from_fn(a.nrows(), |_, _| noise.sample(&mut rng));
            (b, Some(x_true))
        }
        (None, None) => bail!("[inverse] needs `truth` or `b`"),
    };
    Ok((LeastSquares::new(a, b)?, truth))
}

pub fn inverse_submanifold(cfg: &ExperimentConfig, m: &PullbackManifold) -> anyhow::Result<GeodesicSubmanifold> {
    let inv = cfg.inverse.as_ref().context("missing [inverse]")?;
    let base = m.phi_inv(&DVector::from_column_slice(&inv.phi_base))?;
    let dir = DMatrix::from_column_slice(inv.phi_direction.len(), 1, &inv.phi_direction);
    Ok(GeodesicSubmanifold::from_spanning(m.clone(), base, dir)?)
}

fn inverse(cfg: &ExperimentConfig, m: &PullbackManifold, out: &mut Output) -> anyhow::Result<Outcome> {
    let inv = cfg.inverse.as_ref().context("missing [inverse]")?;
    let s = inverse_submanifold(cfg, m)?;
    let (f, truth) = inverse_problem(cfg, &s)?;
    let at = |c: f64| s.point_at(&DVector::from_element(1, c));

    let operator_rows = (0..f.a.nrows()).map(|i| {
        let row: Vec<String> = f.a.row(i).iter().map(|v| fmt_f64(*v)).collect();
        format!("{i},{},{}", row.join(","), fmt_f64(f.b[i]))
    });
    out.csv(
        "operator.csv",
        &format!("{},b", coords_header("row", "a", f.a.ncols())),
        operator_rows,
    )?;

    let x0 = at(inv.start)?;
    let (x, trace, status) = match l2pg_ird(&s, &f, &x0, &cfg.solver.line_search()) {
        Ok((x, trace)) => {
            let status = if trace.converged { Status::Ok } else { Status::NotConverged };
            (x, trace, status)
        }
        Err(Error::Stalled(stall)) => (stall.best, stall.trace, Status::Stalled),
        Err(e) => return Err(e.into()),
    };
    out.trace("trace.csv", &trace)?;

    // Brute-force profile of the objective over the submanifold coordinate.
    let [lo, hi] = inv.param_range;
    let n = inv.grid_points;
    let cell = (hi - lo) / (n - 1) as f64;
    let mut best = (f64::INFINITY, lo);
    for i in 0..n {
        let c = lo + cell * i as f64;
        let v = f.value(&at(c)?)?;
        if v < best.0 {
            best = (v, c);
        }
    }
    let found = s.coords(&x)?[0];

    let (xa, xb) = (at(lo)?, at(hi)?);
    let k = inv.profile_points;
    let times: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
    let terms = convexity_bounds_1d(&s, &f, &xa, &xb, &times)?;
    let mut rows = Vec::with_capacity(k);
    for t in &terms {
        let c = lo + (hi - lo) * t.t;
        rows.push(format!(
            "{},{},{},{},{},{}",
            fmt_f64(t.t),
            fmt_f64(c),
            fmt_f64(f.value(&at(c)?)?),
            fmt_f64(t.hess_term),
            fmt_f64(t.curvature_term),
            fmt_f64(t.sum())
        ));
    }
    out.csv(
        "convexity.csv",
        "t,coordinate,objective,hess_term,curvature_term,sum",
        rows,
    )?;
    let min_sum = terms.iter().map(|t| t.sum()).fold(f64::INFINITY, f64::min);

    let pairs: Vec<(Point, Point)> = (0..k / 2)
        .map(|i| Ok((at(lo + (hi - lo) * times[i])?, at(lo + (hi - lo) * times[k - 1 - i])?)))
        .collect::<anyhow::Result<_>>()?;
    let witnesses = restricted_isometry_check(m, &f.a, &pairs)?;

    Ok(Outcome {
        status,
        summary: json!({
            "iterations": trace.steps(),
            "converged": trace.converged,
            "minimizer": vec_json(&x),
            "minimizer_coordinate": found,
            "minimizer_objective": f.value(&x)?,
            "grid_minimizer_coordinate": best.1,
            "grid_minimum": best.0,
            "grid_cell": cell,
            "grid_cells_off": (found - best.1).abs() / cell,
            "truth": truth.as_ref().map(vec_json),
            "convexity_sum_min": min_sum,
            "isometry_lower": witnesses.lower,
            "isometry_upper": witnesses.upper,
        }),
    })
}

fn rankr(cfg: &ExperimentConfig, m: &PullbackManifold, out: &mut Output) -> anyhow::Result<Outcome> {
    let spec = cfg.rankr.as_ref().context("missing [rankr]")?;
    let ds = dataset(cfg, m)?;
    write_points(out, &ds)?;
    let mut status = Status::Ok;
    let base = match &spec.base {
        Some(b) => DVector::from_column_slice(b),
        None => match iso_barycentre(m, &ds.points, &cfg.solver.line_search()) {
            Ok((x, trace)) => {
                out.trace("trace.csv", &trace)?;
                if !trace.converged {
                    status = Status::NotConverged;
                }
                x
            }
            Err(Error::Stalled(stall)) => {
                out.trace("trace.csv", &stall.trace)?;
                status = Status::Stalled;
                stall.best
            }
            Err(e) => return Err(e.into()),
        },
    };
    let approx = iso_rank_r_approx(m, &ds.points, &base, spec.rank)?;
    let d = m.dim();
    out.csv(
        "singular_values.csv",
        "index,value",
        approx
            .singular_values
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{i},{}", fmt_f64(*s))),
    )?;
    out.csv(
        "basis.csv",
        &coords_header("vector", "x", d),
        (0..approx.rank()).map(|j| format!("{j},{}", join(&approx.basis.column(j).into_owned()))),
    )?;

    // Each point's iso-logarithm projected onto the basis and mapped back.
    let mut rows = Vec::with_capacity(ds.points.len());
    for (i, x) in ds.points.iter().enumerate() {
        let log = approx.logs.column(i);
        let proj = &approx.basis * (approx.basis.transpose() * log);
        let xhat = m.iso_exp(&TangentVector::new(base.clone(), proj)?)?;
        rows.push(format!("{i},{},{}", join(x), join(&xhat)));
    }
    out.csv(
        "reconstruction.csv",
        &format!("index,{},{}", coords_header("", "x", d), coords_header("", "xhat", d)),
        rows,
    )?;
    Ok(Outcome {
        status,
        summary: json!({
            "rank": spec.rank,
            "base": vec_json(&base),
            "singular_values": vec_json(&approx.singular_values),
            "tail_energy": approx.tail_energy(),
            "reconstruction_error": approx.reconstruction_error(),
        }),
    })
}

/// Writes `t,x0,…` rows of a geodesic sampling.
pub fn write_geodesic_csv<W: Write>(mut w: W, samples: &[(f64, Point)]) -> io::Result<()> {
    let d = samples.first().map_or(0, |s| s.1.len());
    writeln!(w, "{}", coords_header("t", "x", d))?;
    for (t, x) in samples {
        writeln!(w, "{},{}", fmt_f64(*t), join(x))?;
    }
    w.flush()
}
