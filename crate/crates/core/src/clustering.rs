//! Lloyd-type clustering: Euclidean and Levi-Civita baselines and iso-K-means,
//! plus the adjusted Rand index for scoring against ground truth.
//!
//! Labels are cluster indices `0..K`.

use std::collections::HashMap;
use std::io::{self, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::descent::{fmt_f64, iso_barycentre_from, LineSearchConfig};
use crate::error::{Error, Result};
use crate::manifold::PullbackManifold;
use crate::Point;

/// Outer-iteration cap for every variant.
pub const MAX_OUTER_ITERS: usize = 100;
/// Centroid-movement threshold `√Σ‖Δcⱼ‖₂²` for iso-K-means.
pub const MOVEMENT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Point>,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusteringResult {
    /// `index,label,x0,…` for every point.
    pub fn write_labels_csv<W: Write>(&self, points: &[Point], mut w: W) -> io::Result<()> {
        write_header(&mut w, "index,label", points.first().map_or(0, |p| p.len()))?;
        for (i, (x, l)) in points.iter().zip(&self.labels).enumerate() {
            write!(w, "{i},{l}")?;
            write_coords(&mut w, x)?;
        }
        Ok(())
    }

    /// `cluster,x0,…` for every centroid.
    pub fn write_centroids_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w, "cluster", self.centroids.first().map_or(0, |p| p.len()))?;
        for (j, c) in self.centroids.iter().enumerate() {
            write!(w, "{j}")?;
            write_coords(&mut w, c)?;
        }
        Ok(())
    }
}

fn write_header<W: Write>(w: &mut W, lead: &str, d: usize) -> io::Result<()> {
    write!(w, "{lead}")?;
    for j in 0..d {
        write!(w, ",x{j}")?;
    }
    writeln!(w)
}

fn write_coords<W: Write>(w: &mut W, x: &Point) -> io::Result<()> {
    for v in x.iter() {
        write!(w, ",{}", fmt_f64(*v))?;
    }
    writeln!(w)
}

/// Distance and centroid rule of a Lloyd iteration.
trait LloydGeometry: Sync {
    fn distance(&self, a: &Point, b: &Point) -> Result<f64>;
    fn centre(&self, members: &[Point]) -> Result<Point>;
}

struct Euclidean;

impl LloydGeometry for Euclidean {
    fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        Ok((a - b).norm())
    }

    fn centre(&self, members: &[Point]) -> Result<Point> {
        let mut sum = DVector::zeros(members[0].len());
        for p in members {
            sum += p;
        }
        Ok(sum / members.len() as f64)
    }
}

struct LeviCivita<'a>(&'a PullbackManifold);

impl LloydGeometry for LeviCivita<'_> {
    fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        self.0.lc_distance(a, b)
    }

    fn centre(&self, members: &[Point]) -> Result<Point> {
        self.0.closed_form_barycentre(members)
    }
}

fn validate(points: &[Point], k: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidInput("cannot cluster an empty point set".into()));
    }
    if k == 0 || k > points.len() {
        return Err(Error::InvalidInput(format!(
            "K must be in 1..={} (got {k})",
            points.len()
        )));
    }
    let d = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: bad.len(),
        });
    }
    Ok(())
}

/// Nearest centroid for each point (ties go to the lowest index) and the distance to it.
fn assign<G: LloydGeometry + ?Sized>(g: &G, points: &[Point], centroids: &[Point]) -> Result<Vec<(usize, f64)>> {
    points
        .par_iter()
        .map(|p| {
            let mut best = (0, g.distance(p, &centroids[0])?);
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = g.distance(p, c)?;
                if d < best.1 {
                    best = (j, d);
                }
            }
            Ok(best)
        })
        .collect()
}

fn kmeans_plus_plus<G: LloydGeometry + ?Sized>(g: &G, points: &[Point], k: usize, seed: u64) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| g.distance(p, &points[chosen[0]]).map(|d| d * d))
        .collect::<Result<_>>()?;
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 {
                    pick = Some(i);
                    if target < *w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight has a positive entry")
        } else {
            // Every point coincides with a chosen centre.
            (0..n).find(|i| !chosen.contains(i)).expect("k ≤ n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = g.distance(p, &points[next])?;
            d2[i] = d2[i].min(d * d);
        }
    }
    Ok(chosen.into_iter().map(|i| points[i].clone()).collect())
}

/// Lloyd iterations until the labels stop changing. An emptied cluster is
/// reseeded at the point farthest from its own centroid.
fn lloyd<G: LloydGeometry + ?Sized>(g: &G, points: &[Point], k: usize, seed: u64) -> Result<ClusteringResult> {
    validate(points, k)?;
    let mut centroids = kmeans_plus_plus(g, points, k, seed)?;
    let mut assignment = assign(g, points, &centroids)?;
    let mut labels: Vec<usize> = assignment.iter().map(|a| a.0).collect();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_OUTER_ITERS {
        iterations += 1;
        for j in 0..k {
            let members: Vec<Point> = points
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == j)
                .map(|(p, _)| p.clone())
                .collect();
            if members.is_empty() {
                let far = assignment
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, a)| if a.1 > assignment[best].1 { i } else { best });
                log::debug!("cluster {j} emptied; reseeding at point {far}");
                centroids[j] = points[far].clone();
                assignment[far] = (j, 0.0);
                labels[far] = j;
            } else {
                centroids[j] = g.centre(&members)?;
            }
        }
        assignment = assign(g, points, &centroids)?;
        let next: Vec<usize> = assignment.iter().map(|a| a.0).collect();
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    Ok(ClusteringResult {
        labels,
        centroids,
        iterations,
        converged,
    })
}

/// Lloyd's algorithm with ℓ² distances and arithmetic means, k-means++ seeded.
pub fn euclidean_kmeans(points: &[Point], k: usize, seed: u64) -> Result<ClusteringResult> {
    lloyd(&Euclidean, points, k, seed)
}

/// Lloyd's algorithm with the pullback distance and closed-form barycentres.
pub fn riemannian_kmeans(m: &PullbackManifold, points: &[Point], k: usize, seed: u64) -> Result<ClusteringResult> {
    lloyd(&LeviCivita(m), points, k, seed)
}

/// Iso-K-means: starts from [`riemannian_kmeans`], assigns by iso-distance and
/// moves each centroid to the iso-barycentre of its cluster.
///
/// Stops once the centroid movement drops below [`MOVEMENT_TOL`] or after
/// [`MAX_OUTER_ITERS`] passes. An empty cluster keeps its previous centroid; a
/// stalled barycentre solve contributes its best iterate. The returned labels
/// are nearest-centroid labels for the returned centroids.
pub fn iso_kmeans(
    m: &PullbackManifold,
    points: &[Point],
    k: usize,
    seed: u64,
    cfg: &LineSearchConfig,
) -> Result<ClusteringResult> {
    cfg.validate()?;
    let init = riemannian_kmeans(m, points, k, seed)?;
    let iso = IsoDistance(m);
    let mut centroids = init.centroids;
    let mut labels: Vec<usize> = assign(&iso, points, &centroids)?.into_iter().map(|a| a.0).collect();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_OUTER_ITERS {
        iterations += 1;
        let mut movement2 = 0.0;
        for (j, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<Point> = points
                .iter()
                .zip(&labels)
                .filter(|(_, l)| **l == j)
                .map(|(p, _)| p.clone())
                .collect();
            if members.is_empty() {
                log::debug!("cluster {j} is empty; keeping its centroid");
                continue;
            }
            let start = m.closed_form_barycentre(&members)?;
            let next = match iso_barycentre_from(m, &members, &start, cfg) {
                Ok((x, _)) => x,
                Err(Error::Stalled(stall)) => {
                    log::warn!(
                        "iso-barycentre of cluster {j} stalled after {} steps; using best iterate",
                        stall.trace.steps()
                    );
                    stall.best
                }
                Err(e) => return Err(e),
            };
            movement2 += (&next - &*centroid).norm_squared();
            *centroid = next;
        }
        labels = assign(&iso, points, &centroids)?.into_iter().map(|a| a.0).collect();
        if movement2.sqrt() < MOVEMENT_TOL {
            converged = true;
            break;
        }
    }
    Ok(ClusteringResult {
        labels,
        centroids,
        iterations,
        converged,
    })
}

struct IsoDistance<'a>(&'a PullbackManifold);

impl LloydGeometry for IsoDistance<'_> {
    fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        self.0.iso_distance(a, b)
    }

    fn centre(&self, _: &[Point]) -> Result<Point> {
        unreachable!("iso-K-means updates centroids itself")
    }
}

/// Adjusted Rand index from the contingency table of two labelings.
///
/// Returns 1.0 when both labelings are trivially identical partitions (all
/// points in one cluster, or all singletons) where the index is otherwise 0/0.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "labelings differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let pairs = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&i, &j) in a.iter().zip(b) {
        *table.entry((i, j)).or_default() += 1;
        *rows.entry(i).or_default() += 1;
        *cols.entry(j).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| pairs(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| pairs(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
