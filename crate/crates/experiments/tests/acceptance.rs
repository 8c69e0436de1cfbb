//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use isogeo_core::diffeo::{Banana, Diffeomorphism, Identity, River, SinhShift, Spiral};
use isogeo_core::{
    iso_barycentre, iso_barycentre_fixed_step, restricted_isometry_check, LineSearchConfig, Point, PullbackManifold,
    TangentVector,
};
use isogeo_experiments::{run, ExperimentConfig, Status};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const IDENTITY_TOL: f64 = 1e-12;
const SPEED_CV_TOL: f64 = 1e-3;
const RADIAL_TOL: f64 = 1e-6;
const ROUND_TRIP_TOL: f64 = 1e-6;
const MIDPOINT_TOL: f64 = 1e-5;
const MEAN_TOL: f64 = 1e-8;
const RATE_SLACK: f64 = 0.02;
const BAND_FIELD_TOL: f64 = 1e-2;
const BAND_MAX_ITERS: usize = 200;
const PG_TOL: f64 = 1e-2;
const WITNESS_TOL: f64 = 1e-10;

const GEOMETRIES: [&str; 4] = ["river", "spiral", "banana", "sinh"];

struct Check {
    ok: bool,
    detail: String,
}

impl Check {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Check {
            ok,
            detail: detail.into(),
        }
    }
}

fn p(v: &[f64]) -> Point {
    DVector::from_column_slice(v)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn manifold(name: &str) -> PullbackManifold {
    let d: Arc<dyn Diffeomorphism> = match name {
        "river" => Arc::new(River::default()),
        "spiral" => Arc::new(Spiral::default()),
        "banana" => Arc::new(Banana::default()),
        "sinh" => Arc::new(SinhShift),
        other => panic!("unknown geometry {other}"),
    };
    PullbackManifold::new(d)
}

/// Spiral points are drawn in φ-coordinates away from the angular cut so the
/// straight φ-segment between two of them stays in the chart.
fn sample_point(name: &str, m: &PullbackManifold, rng: &mut ChaCha8Rng) -> Point {
    match name {
        "river" => p(&[rng.random_range(-4.0..4.0), rng.random_range(-6.0..6.0)]),
        "banana" => p(&[rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]),
        "sinh" => p(&[rng.random_range(-3.0..3.0)]),
        "spiral" => m
            .phi_inv(&p(&[rng.random_range(1.0..4.0), rng.random_range(1.0..TAU - 1.0)]))
            .unwrap(),
        other => panic!("unknown geometry {other}"),
    }
}

fn sample_pair(name: &str, m: &PullbackManifold, rng: &mut ChaCha8Rng) -> (Point, Point) {
    loop {
        let x = sample_point(name, m, rng);
        let y = sample_point(name, m, rng);
        if m.lc_distance(&x, &y).unwrap() > 1e-3 {
            return (x, y);
        }
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(name)).unwrap()
}

fn run_into(mut cfg: ExperimentConfig, dir: &Path) -> (Status, Value) {
    cfg.output_dir = dir.to_path_buf();
    let report = run(&cfg).unwrap();
    (report.status, report.summary)
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let mut c = f();
    let took = start.elapsed();
    c.detail = format!("{} [{:.2?}]", c.detail, took);
    if let Some(limit) = limit {
        if took > limit {
            c.ok = false;
            c.detail = format!("{} exceeds {:?}", c.detail, limit);
        }
    }
    c
}

fn identity_reduction() -> Check {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    let mut worst_op = "";
    let mut note = |op: &'static str, err: f64| {
        if err > worst {
            worst = err;
            worst_op = op;
        }
    };
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let m = PullbackManifold::new(Arc::new(Identity::new(d)));
        let mut draw = || DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
        let (x, y, v) = (draw(), draw(), draw());
        let t = rng.random_range(0.0..1.0);
        let xi = TangentVector::new(x.clone(), v.clone()).unwrap();
        let mid = (&x * (1.0 - t)) + &y * t;
        let pts = [x.clone(), y.clone(), v.clone()];
        let mean = (&x + &y + &v) / 3.0;

        note("lc_distance", (m.lc_distance(&x, &y).unwrap() - (&x - &y).norm()).abs());
        note("lc_geodesic", (m.lc_geodesic(&x, &y, t).unwrap() - &mid).norm());
        note("lc_exp", (m.lc_exp(&xi).unwrap() - (&x + &v)).norm());
        note("lc_log", (m.lc_log(&x, &y).unwrap().vec - (&y - &x)).norm());
        note("lc_transport", (m.lc_transport(&x, &y, &xi).unwrap().vec - &v).norm());
        note("closed_form_barycentre", (m.closed_form_barycentre(&pts).unwrap() - &mean).norm());
        note("iso_distance", (m.iso_distance(&x, &y).unwrap() - (&x - &y).norm()).abs());
        note("timechange", (m.timechange(&x, &y, t).unwrap() - t).abs());
        note("iso_geodesic", (m.iso_geodesic(&x, &y, t).unwrap() - &mid).norm());
        note("vectorchange", (m.vectorchange(&xi).unwrap() - 1.0).abs());
        note("iso_exp", (m.iso_exp(&xi).unwrap() - (&x + &v)).norm());
        note("iso_log", (m.iso_log(&x, &y).unwrap().vec - (&y - &x)).norm());
        note("iso_transport", (m.iso_transport(&x, &y, &xi).unwrap().vec - &v).norm());
    }
    Check::new(
        worst < IDENTITY_TOL,
        format!("max abs error {worst:.2e} ({worst_op}) over 100 inputs, tol {IDENTITY_TOL:e}"),
    )
}

fn constant_speed() -> Check {
    let mut worst: f64 = 0.0;
    for (k, name) in GEOMETRIES.iter().enumerate() {
        let m = manifold(name);
        let mut rng = rng(200 + k as u64);
        for _ in 0..50 {
            let (x, y) = sample_pair(name, &m, &mut rng);
            let profile = m.speed_profile(&x, &y, 64).unwrap();
            let n = profile.len() as f64;
            let mean = profile.iter().map(|s| s.1).sum::<f64>() / n;
            let var = profile.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / n;
            worst = worst.max(var.sqrt() / mean);
        }
    }
    Check::new(
        worst < SPEED_CV_TOL,
        format!("max stddev/mean {worst:.2e} over 4 × 50 pairs, tol {SPEED_CV_TOL:e}"),
    )
}

fn sample_tangent(name: &str, m: &PullbackManifold, rng: &mut ChaCha8Rng) -> TangentVector {
    let (x, y) = sample_pair(name, m, rng);
    let scale = rng.random_range(0.05..1.0);
    m.iso_log(&x, &y).unwrap().scaled(scale)
}

fn radial_isometry() -> Check {
    let mut worst: f64 = 0.0;
    for (k, name) in GEOMETRIES.iter().enumerate() {
        let m = manifold(name);
        let mut rng = rng(300 + k as u64);
        for _ in 0..100 {
            let xi = sample_tangent(name, &m, &mut rng);
            let y = m.iso_exp(&xi).unwrap();
            let err = (m.iso_distance(&xi.base, &y).unwrap() - xi.norm()).abs() / (1.0 + xi.norm());
            worst = worst.max(err);
        }
    }
    Check::new(
        worst < RADIAL_TOL,
        format!("max |d(x, exp ξ) − ‖ξ‖|/(1+‖ξ‖) {worst:.2e}, tol {RADIAL_TOL:e}"),
    )
}

fn round_trip() -> Check {
    let mut worst: f64 = 0.0;
    for (k, name) in GEOMETRIES.iter().enumerate() {
        let m = manifold(name);
        let mut rng = rng(400 + k as u64);
        for _ in 0..100 {
            let (x, y) = sample_pair(name, &m, &mut rng);
            let back = m.iso_exp(&m.iso_log(&x, &y).unwrap()).unwrap();
            worst = worst.max((back - &y).norm() / (1.0 + y.norm()));
        }
    }
    Check::new(
        worst < ROUND_TRIP_TOL,
        format!("max relative round-trip error {worst:.2e}, tol {ROUND_TRIP_TOL:e}"),
    )
}

fn tight(tol: f64) -> LineSearchConfig {
    LineSearchConfig {
        tol,
        ..Default::default()
    }
}

fn midpoint() -> Check {
    let m = manifold("river");
    let mut rng = rng(500);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (x, y) = sample_pair("river", &m, &mut rng);
        let (b, _) = iso_barycentre(&m, &[x.clone(), y.clone()], &tight(1e-9)).unwrap();
        worst = worst.max((b - m.iso_geodesic(&x, &y, 0.5).unwrap()).norm());
    }
    Check::new(
        worst < MIDPOINT_TOL,
        format!("max ‖barycentre − midpoint‖ {worst:.2e} over 50 river pairs, tol {MIDPOINT_TOL:e}"),
    )
}

fn sinh_points(seed: u64) -> Vec<Point> {
    let mut rng = rng(seed);
    (0..10).map(|_| p(&[rng.random_range(-3.0..3.0)])).collect()
}

fn one_dimensional_mean() -> Check {
    let m = manifold("sinh");
    let mut worst: f64 = 0.0;
    let mut steps = Vec::new();
    for seed in 0..10 {
        let pts = sinh_points(600 + seed);
        let mean = pts.iter().map(|x| x[0]).sum::<f64>() / pts.len() as f64;
        let (b, _) = iso_barycentre(&m, &pts, &tight(1e-11)).unwrap();
        worst = worst.max((b[0] - mean).abs());
        let (b, trace) = iso_barycentre_fixed_step(&m, &pts, &p(&[-4.0]), 1.0, MEAN_TOL, 100).unwrap();
        worst = worst.max((b[0] - mean).abs());
        steps.push(trace.steps());
    }
    Check::new(
        worst < MEAN_TOL && steps.iter().all(|s| *s == 1),
        format!("max |barycentre − mean| {worst:.2e}, tol {MEAN_TOL:e}; fixed-step r=1 iterations {steps:?}"),
    )
}

fn linear_rate() -> Check {
    let m = manifold("sinh");
    let mut ok = true;
    let mut detail = Vec::new();
    for r in [0.25f64, 0.5] {
        let bound = (1.0 + r * (r - 2.0)).sqrt() + RATE_SLACK;
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let pts = sinh_points(700 + seed);
            let (_, trace) = iso_barycentre_fixed_step(&m, &pts, &p(&[4.0]), r, 1e-10, 1000).unwrap();
            ok &= trace.converged;
            for w in trace.field_norms.windows(2) {
                worst = worst.max(w[1] / w[0]);
            }
        }
        ok &= worst <= bound;
        detail.push(format!("r={r}: max ratio {worst:.4} ≤ {bound:.4}"));
    }
    Check::new(ok, detail.join("; "))
}

fn band_barycentres(dir: &Path) -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for file in ["river-barycentre.toml", "spiral-barycentre.toml"] {
        let cfg = load(file);
        let n = cfg.dataset.as_ref().unwrap().n;
        let (status, s) = run_into(cfg, &dir.join(file));
        let norm = s["final_field_norm"].as_f64().unwrap();
        let iters = s["iterations"].as_u64().unwrap() as usize;
        let monotone = s["field_norms_strictly_decrease"].as_bool().unwrap();
        ok &= status == Status::Ok && n == 200 && norm < BAND_FIELD_TOL && iters <= BAND_MAX_ITERS && monotone;
        detail.push(format!("{file}: N={n} ‖ξ‖={norm:.2e} after {iters} iterations, monotone={monotone}"));
    }
    Check::new(ok, detail.join("; "))
}

fn kmeans(dir: &Path) -> Check {
    let (status, s) = run_into(load("river-kmeans.toml"), dir);
    let iso = s["ari_iso"].as_f64().unwrap();
    let riem = s["ari_riemannian"].as_f64().unwrap();
    let converged = s["iso_converged"].as_bool().unwrap();
    Check::new(
        status == Status::Ok && iso == 1.0 && iso >= riem && converged,
        format!("ARI iso {iso:.4}, riemannian {riem:.4}, movement-converged {converged}"),
    )
}

/// Runs at the configured relative stopping rule, then at a tight one for the
/// comparison with the grid search.
fn projected_gradient(dir: &Path) -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for file in ["banana-inverse.toml", "banana-inverse-3x2.toml"] {
        let cfg = load(file);
        let rows = cfg.inverse.as_ref().unwrap().rows;
        let grid = cfg.inverse.as_ref().unwrap().grid_points;
        ok &= cfg.solver.tol == PG_TOL && grid == 100_000;
        let (status, s) = run_into(cfg.clone(), &dir.join(file));
        let stopped = status == Status::Ok;
        let trace = fs::read_to_string(dir.join(file).join("trace.csv")).unwrap();
        let rows_csv: Vec<Vec<f64>> = trace
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        let f0 = rows_csv[0][3];
        let last = rows_csv.last().unwrap();
        let rel = last[1] / f0.abs();
        ok &= stopped && rel < PG_TOL;

        let mut tight_cfg = cfg;
        tight_cfg.solver.tol = 1e-6;
        let (status, s_tight) = run_into(tight_cfg, &dir.join(format!("{file}-tight")));
        let cells = s_tight["grid_cells_off"].as_f64().unwrap();
        ok &= status == Status::Ok && cells <= 1.0;
        detail.push(format!(
            "{rows}x2: stopped at ‖P∇f‖/f₀ = {rel:.2e} after {} steps; tight run {cells:.2} grid cells from the grid minimiser",
            s["iterations"]
        ));
    }
    Check::new(ok, detail.join("; "))
}

fn convexity_sign(dir: &Path) -> Check {
    let convex = load("banana-convex.toml");
    let nonconvex = load("banana-nonconvex.toml");
    let (a, b) = (convex.inverse.as_ref().unwrap(), nonconvex.inverse.as_ref().unwrap());
    let same_objective = a.operator == b.operator && a.b == b.b && a.phi_direction == b.phi_direction;
    let offsets = (a.phi_base[0], b.phi_base[0]);
    let (_, s1) = run_into(convex, &dir.join("convex"));
    let (_, s2) = run_into(nonconvex, &dir.join("nonconvex"));
    let min1 = s1["convexity_sum_min"].as_f64().unwrap();
    let min2 = s2["convexity_sum_min"].as_f64().unwrap();
    Check::new(
        same_objective && min1 > 0.0 && min2 < 0.0,
        format!(
            "offset {}: min sum {min1:.4}; offset {}: min sum {min2:.4}",
            offsets.0, offsets.1
        ),
    )
}

fn isometry_witnesses() -> Check {
    let mut worst: f64 = 0.0;
    for (k, name) in GEOMETRIES.iter().enumerate() {
        let m = manifold(name);
        let mut rng = rng(1200 + k as u64);
        let pairs: Vec<(Point, Point)> = (0..20).map(|_| sample_pair(name, &m, &mut rng)).collect();
        for c in [0.5, 2.0, 3.0] {
            let a = DMatrix::identity(m.dim(), m.dim()) * c;
            let w = restricted_isometry_check(&m, &a, &pairs).unwrap();
            let target = c * c - 1.0;
            worst = worst.max((w.lower - target).abs()).max((w.upper - target).abs());
        }
    }
    Check::new(
        worst < WITNESS_TOL,
        format!("max |witness − (c²−1)| {worst:.2e}, tol {WITNESS_TOL:e}"),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism(dir: &Path) -> Check {
    let mut files: Vec<PathBuf> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for file in &files {
        let cfg = ExperimentConfig::load(file).unwrap();
        let stem = file.file_stem().unwrap().to_string_lossy().into_owned();
        let (a, b) = (dir.join(format!("{stem}-a")), dir.join(format!("{stem}-b")));
        run_into(cfg.clone(), &a);
        run_into(cfg, &b);
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        compared += fa.len();
        if fa.is_empty() || fa != fb {
            mismatched.push(stem);
        }
    }
    Check::new(
        mismatched.is_empty(),
        format!(
            "{} configs, {compared} CSV files byte-identical across two runs; mismatched {mismatched:?}",
            files.len()
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Check + 'a>);

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: Vec<Criterion> = vec![
        ("identity reduction", Box::new(|| timed(secs(5), identity_reduction))),
        ("constant l2-speed", Box::new(|| timed(secs(30), constant_speed))),
        ("radial isometry", Box::new(|| timed(None, radial_isometry))),
        ("exp/log round trip", Box::new(|| timed(None, round_trip))),
        ("two-point barycentre is the iso-midpoint", Box::new(|| timed(None, midpoint))),
        ("1D barycentre is the mean", Box::new(|| timed(None, one_dimensional_mean))),
        ("1D linear rate", Box::new(|| timed(None, linear_rate))),
        ("band barycentres", Box::new(move || timed(secs(120), || band_barycentres(&dir.join("c8"))))),
        ("iso-k-means on two river clusters", Box::new(move || timed(None, || kmeans(&dir.join("c9"))))),
        ("projected-gradient IRD vs grid", Box::new(move || timed(secs(60), || projected_gradient(&dir.join("c10"))))),
        ("convexity-term sign", Box::new(move || timed(None, || convexity_sign(&dir.join("c11"))))),
        ("restricted-isometry witnesses", Box::new(|| timed(None, isometry_witnesses))),
        ("determinism", Box::new(move || timed(None, || determinism(&dir.join("c13"))))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let c = check();
        if !c.ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if c.ok { "PASS" } else { "FAIL" }, i + 1, c.detail);
    }
    println!("acceptance: {} passed, {failed} failed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
