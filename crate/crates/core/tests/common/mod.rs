#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::Arc;

use isogeo_core::diffeo::{Banana, Diffeomorphism, River, SinhShift, Spiral};
use isogeo_core::{PullbackManifold, Point, TangentVector};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn p(v: &[f64]) -> Point {
    DVector::from_column_slice(v)
}

pub fn uniform(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Point {
    DVector::from_iterator(d, (0..d).map(|_| rng.random_range(lo..hi)))
}

pub const NAMES: [&str; 4] = ["river", "spiral", "banana", "sinh"];

pub fn manifold(name: &str) -> PullbackManifold {
    let d: Arc<dyn Diffeomorphism> = match name {
        "river" => Arc::new(River::default()),
        "spiral" => Arc::new(Spiral::default()),
        "banana" => Arc::new(Banana::default()),
        "sinh" => Arc::new(SinhShift),
        other => panic!("no test geometry {other}"),
    };
    PullbackManifold::new(d)
}

/// A point in the region where the test geometry is well behaved. Spiral
/// points are drawn in φ-coordinates away from the angular cut, so straight
/// φ-segments between two of them stay inside the chart.
pub fn sample_point(name: &str, m: &PullbackManifold, rng: &mut ChaCha8Rng) -> Point {
    match name {
        "river" => p(&[rng.random_range(-4.0..4.0), rng.random_range(-6.0..6.0)]),
        "banana" => uniform(rng, 2, -4.0, 4.0),
        "sinh" => uniform(rng, 1, -3.0, 3.0),
        "spiral" => {
            let phi = p(&[rng.random_range(1.0..4.0), rng.random_range(1.0..TAU - 1.0)]);
            m.phi_inv(&phi).unwrap()
        }
        other => panic!("no test geometry {other}"),
    }
}

pub fn sample_pair(name: &str, m: &PullbackManifold, rng: &mut ChaCha8Rng) -> (Point, Point) {
    loop {
        let x = sample_point(name, m, rng);
        let y = sample_point(name, m, rng);
        if m.lc_distance(&x, &y).unwrap() > 1e-3 {
            return (x, y);
        }
    }
}

/// A tangent vector whose iso-exponential stays on a sampled φ-segment.
pub fn sample_tangent(name: &str, m: &PullbackManifold, rng: &mut ChaCha8Rng) -> TangentVector {
    let (x, y) = sample_pair(name, m, rng);
    let log = m.iso_log(&x, &y).unwrap();
    log.scaled(rng.random_range(0.05..1.0))
}

/// `∫₀¹ ‖γ̇‖₂` by composite Simpson on central differences of the geodesic
/// written out directly from φ and φ⁻¹, independent of the library quadrature.
pub fn arc_length_oracle(m: &PullbackManifold, x: &Point, y: &Point, s_end: f64, n: usize) -> f64 {
    let d = m.diffeo();
    let (px, py) = (d.forward(x).unwrap(), d.forward(y).unwrap());
    let curve = |s: f64| d.inverse(&(&px * (1.0 - s) + &py * s)).unwrap();
    let h = 1e-6;
    let speed = |s: f64| ((curve(s + h) - curve(s - h)) / (2.0 * h)).norm();
    let n = n + n % 2;
    let w = s_end / n as f64;
    let mut acc = speed(0.0) + speed(s_end);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * speed(i as f64 * w);
    }
    acc * w / 3.0
}
