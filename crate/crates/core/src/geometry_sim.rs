//! Stochastic-geometry engine: Poisson point sets on a square (optionally a
//! torus), nearest-node queries, Markov-path routing through the Voronoi
//! cells a segment crosses, and Monte-Carlo estimators of the access and
//! backbone cost constants.
//!
//! Voronoi cells are never built explicitly. A cell is the set of points
//! whose nearest node is its nucleus, so walking a segment and querying the
//! nearest node yields the crossed cells in order. Consecutive cells along
//! the walk share a boundary point, which makes their nuclei Delaunay
//! neighbours.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimate::{stream_rng, McEstimate};
use crate::link_model::CostCurve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Bucket grid over the domain with roughly one point per bucket.
#[derive(Debug, Clone)]
struct BucketGrid {
    per_side: usize,
    cell: f64,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl BucketGrid {
    fn build(points: &[Point], side: f64) -> Self {
        let per_side = ((points.len() as f64).sqrt().floor() as usize).clamp(1, 4096);
        let cell = side / per_side as f64;
        let bucket_of = |p: &Point| {
            let bx = ((p.x / cell) as usize).min(per_side - 1);
            let by = ((p.y / cell) as usize).min(per_side - 1);
            by * per_side + bx
        };
        let mut counts = vec![0u32; per_side * per_side + 1];
        for p in points {
            counts[bucket_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let b = bucket_of(p);
            items[fill[b] as usize] = i as u32;
            fill[b] += 1;
        }
        Self {
            per_side,
            cell,
            starts,
            items,
        }
    }

    fn bucket(&self, bx: usize, by: usize) -> &[u32] {
        let b = by * self.per_side + bx;
        &self.items[self.starts[b] as usize..self.starts[b + 1] as usize]
    }
}

/// Realization of a point process on `[0, side]^2`.
///
/// With `wraparound` set, opposite edges are identified and every distance
/// is the torus (minimal-image) distance.
#[derive(Debug, Clone)]
pub struct PointSet {
    points: Vec<Point>,
    side: f64,
    wraparound: bool,
    grid: BucketGrid,
}

impl PointSet {
    pub fn new(points: Vec<Point>, side: f64, wraparound: bool) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(domain(format!("domain side must be > 0, got {side}")));
        }
        if points.len() > u32::MAX as usize {
            return Err(domain("too many points"));
        }
        if let Some(p) = points
            .iter()
            .find(|p| !(p.x >= 0.0 && p.x <= side && p.y >= 0.0 && p.y <= side))
        {
            return Err(domain(format!("point ({}, {}) outside [0, {side}]^2", p.x, p.y)));
        }
        let grid = BucketGrid::build(&points, side);
        Ok(Self {
            points,
            side,
            wraparound,
            grid,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn wraparound(&self) -> bool {
        self.wraparound
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Displacement from `a` to `b` (minimal image on the torus).
    pub fn displacement(&self, a: Point, b: Point) -> (f64, f64) {
        let mut dx = b.x - a.x;
        let mut dy = b.y - a.y;
        if self.wraparound {
            dx -= self.side * (dx / self.side).round();
            dy -= self.side * (dy / self.side).round();
        }
        (dx, dy)
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let (dx, dy) = self.displacement(a, b);
        dx.hypot(dy)
    }

    /// Maps a point into the fundamental domain (torus only).
    pub fn wrap(&self, p: Point) -> Point {
        if self.wraparound {
            Point::new(p.x.rem_euclid(self.side), p.y.rem_euclid(self.side))
        } else {
            p
        }
    }

    fn squared_distance(&self, a: Point, b: Point) -> f64 {
        let (dx, dy) = self.displacement(a, b);
        dx * dx + dy * dy
    }

    /// Index of the node closest to `p`; ties go to the lowest index.
    pub fn nearest_node(&self, p: Point) -> Result<usize> {
        if self.points.is_empty() {
            return Err(domain("nearest-node query on an empty node set"));
        }
        let p = self.wrap(p);
        let g = &self.grid;
        let n = g.per_side as isize;
        let bx = ((p.x / g.cell).floor() as isize).clamp(0, n - 1);
        let by = ((p.y / g.cell).floor() as isize).clamp(0, n - 1);
        let mut best = (f64::INFINITY, usize::MAX);
        let consider = |ix: isize, iy: isize, best: &mut (f64, usize)| {
            let (ix, iy) = if self.wraparound {
                (ix.rem_euclid(n), iy.rem_euclid(n))
            } else if ix < 0 || iy < 0 || ix >= n || iy >= n {
                return;
            } else {
                (ix, iy)
            };
            for &i in g.bucket(ix as usize, iy as usize) {
                let i = i as usize;
                let d2 = self.squared_distance(p, self.points[i]);
                if d2 < best.0 || (d2 == best.0 && i < best.1) {
                    *best = (d2, i);
                }
            }
        };
        let max_ring = if self.wraparound { n / 2 + 1 } else { n };
        for ring in 0..=max_ring {
            if ring == 0 {
                consider(bx, by, &mut best);
            } else {
                for k in -ring..=ring {
                    consider(bx + k, by - ring, &mut best);
                    consider(bx + k, by + ring, &mut best);
                }
                for k in -ring + 1..ring {
                    consider(bx - ring, by + k, &mut best);
                    consider(bx + ring, by + k, &mut best);
                }
            }
            // Buckets beyond this ring are at least `ring` cells away.
            let reach = ring as f64 * g.cell;
            if best.1 != usize::MAX && best.0 < reach * reach {
                break;
            }
        }
        Ok(best.1)
    }
}

/// Poisson point set with the given intensity on `[0, side]^2`, drawn from `rng`.
pub fn sample_poisson_with<R: Rng + ?Sized>(
    rng: &mut R,
    intensity: f64,
    side: f64,
    wraparound: bool,
) -> Result<PointSet> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(domain(format!("intensity must be > 0, got {intensity}")));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(domain(format!("domain side must be > 0, got {side}")));
    }
    let mean = intensity * side * side;
    let count: f64 = Poisson::new(mean)
        .map_err(|e| domain(format!("poisson mean {mean}: {e}")))?
        .sample(rng);
    let points = (0..count as usize)
        .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect();
    PointSet::new(points, side, wraparound)
}

/// Poisson point set, deterministic in `seed`.
pub fn sample_poisson(intensity: f64, side: f64, wraparound: bool, seed: u64) -> Result<PointSet> {
    sample_poisson_with(&mut stream_rng(seed, 0), intensity, side, wraparound)
}

/// Index of the node nearest to `p` under the set's metric.
pub fn nearest_node(nodes: &PointSet, p: Point) -> Result<usize> {
    nodes.nearest_node(p)
}

/// Sequence of backbone nodes visited by Markov-path routing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovPath {
    pub node_indices: Vec<usize>,
    pub hop_lengths: Vec<f64>,
}

impl MarkovPath {
    pub fn hops(&self) -> usize {
        self.hop_lengths.len()
    }

    /// Sum of `cost(hop)` over the path.
    pub fn cost<C: CostCurve + ?Sized>(&self, cost: &C) -> Result<f64> {
        self.hop_lengths.iter().map(|&h| cost.cost(h)).sum()
    }
}

/// Coarse sampling step of the segment walk, as a fraction of node spacing.
const WALK_STEPS_PER_SPACING: f64 = 64.0;
/// Sub-steps used to resolve each detected cell transition.
const REFINE: usize = 10;

/// Cells crossed by the segment from `u` to `v` (the straight line on the
/// torus follows the minimal-image displacement), as node indices.
///
/// Walks the segment at 1/64 of the mean node spacing and re-samples every
/// step in which the nearest node changes at ten times that resolution.
/// Cells thinner than the refined step along the segment can be missed.
pub fn markov_path(nodes: &PointSet, u: Point, v: Point) -> Result<MarkovPath> {
    if nodes.is_empty() {
        return Err(domain("markov path on an empty node set"));
    }
    let (dx, dy) = nodes.displacement(u, v);
    let length = dx.hypot(dy);
    if !(length > 0.0) {
        return Err(domain("markov path needs distinct endpoints"));
    }
    let spacing = nodes.side() / (nodes.len() as f64).sqrt();
    let steps = ((length / spacing * WALK_STEPS_PER_SPACING).ceil() as usize).max(1);
    let at = |t: f64| nodes.wrap(Point::new(u.x + t * dx, u.y + t * dy));

    let mut ids = vec![nodes.nearest_node(u)?];
    for i in 1..=steps {
        let t = i as f64 / steps as f64;
        let id = if i == steps {
            nodes.nearest_node(v)?
        } else {
            nodes.nearest_node(at(t))?
        };
        if id != *ids.last().expect("non-empty") {
            let t0 = (i - 1) as f64 / steps as f64;
            let dt = (t - t0) / REFINE as f64;
            for j in 1..REFINE {
                let sub = nodes.nearest_node(at(t0 + j as f64 * dt))?;
                if sub != *ids.last().expect("non-empty") {
                    ids.push(sub);
                }
            }
            if id != *ids.last().expect("non-empty") {
                ids.push(id);
            }
        }
    }
    let pts = nodes.points();
    let hop_lengths = ids
        .windows(2)
        .map(|w| nodes.distance(pts[w[0]], pts[w[1]]))
        .collect();
    Ok(MarkovPath {
        node_indices: ids,
        hop_lengths,
    })
}

/// Controls for the torus Monte-Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusMc {
    /// Torus side in units of the node spacing parameter.
    pub side_in_alpha: f64,
    /// Total routed pairs (or access queries) across all node sets.
    pub samples: usize,
    /// Independently drawn node sets; the standard error is computed across them.
    pub node_sets: usize,
    pub seed: u64,
}

impl TorusMc {
    fn validate(&self, min_samples: usize) -> Result<()> {
        if !(self.side_in_alpha >= 10.0) {
            return Err(domain(format!(
                "torus side must be >= 10 node spacings, got {}",
                self.side_in_alpha
            )));
        }
        if self.samples < min_samples {
            return Err(domain(format!("need at least {min_samples} samples, got {}", self.samples)));
        }
        if self.node_sets < 2 || self.node_sets > self.samples {
            return Err(domain(format!(
                "node_sets must lie in [2, samples], got {}",
                self.node_sets
            )));
        }
        Ok(())
    }

    fn per_set(&self, set: usize) -> usize {
        let base = self.samples / self.node_sets;
        base + usize::from(set < self.samples % self.node_sets)
    }
}

// Runs `work` on every node set in parallel and combines the per-set means.
// Aggregation is by set index, so the result does not depend on scheduling.
fn over_node_sets<F>(alpha_bb: f64, params: &TorusMc, work: F) -> Result<McEstimate>
where
    F: Fn(&PointSet, &mut rand_chacha::ChaCha8Rng, usize) -> Result<f64> + Sync,
{
    if !(alpha_bb > 0.0 && alpha_bb.is_finite()) {
        return Err(domain(format!("alpha_bb must be > 0, got {alpha_bb}")));
    }
    let side = params.side_in_alpha * alpha_bb;
    let intensity = 1.0 / (alpha_bb * alpha_bb);
    let per_set: Vec<Result<(f64, usize)>> = (0..params.node_sets)
        .into_par_iter()
        .map(|set| {
            let mut rng = stream_rng(params.seed, set as u64);
            let nodes = sample_poisson_with(&mut rng, intensity, side, true)?;
            if nodes.is_empty() {
                return Err(domain("sampled an empty node set; enlarge the torus"));
            }
            let n = params.per_set(set);
            Ok((work(&nodes, &mut rng, n)?, n))
        })
        .collect();
    let mut sums = Vec::with_capacity(per_set.len());
    let mut total = 0.0;
    let mut count = 0usize;
    for r in per_set {
        let (sum, n) = r?;
        sums.push(sum / n as f64);
        total += sum;
        count += n;
    }
    let batch = McEstimate::from_samples(&sums);
    Ok(McEstimate {
        mean: total / count as f64,
        std_error: batch.std_error,
        samples: count,
    })
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, side: f64) -> Point {
    Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

/// Monte-Carlo estimate of the backbone cost per bit and per km of user
/// separation under Markov-path routing.
///
/// Each pair `(u, v)` is drawn uniformly on the torus and redrawn while the
/// separation is below `2 alpha_bb`; its contribution is the path cost divided
/// by the separation.
pub fn estimate_kappa_bb_mc<C: CostCurve + ?Sized>(cost: &C, alpha_bb: f64, params: &TorusMc) -> Result<McEstimate> {
    params.validate(100)?;
    let min_sep = 2.0 * alpha_bb;
    over_node_sets(alpha_bb, params, |nodes, rng, n| {
        let mut sum = 0.0;
        for _ in 0..n {
            let (u, v, sep) = loop {
                let u = uniform_point(rng, nodes.side());
                let v = uniform_point(rng, nodes.side());
                let sep = nodes.distance(u, v);
                if sep >= min_sep {
                    break (u, v, sep);
                }
            };
            let path = markov_path(nodes, u, v)?;
            sum += path.cost(cost)? / sep;
        }
        Ok(sum)
    })
}

/// Monte-Carlo estimate of the access cost per bit and per user pair,
/// `2 E[C(distance to nearest node)]`.
pub fn estimate_kappa_loc_mc<C: CostCurve + ?Sized>(cost: &C, alpha_bb: f64, params: &TorusMc) -> Result<McEstimate> {
    params.validate(100)?;
    over_node_sets(alpha_bb, params, |nodes, rng, n| {
        let mut sum = 0.0;
        for _ in 0..n {
            let q = uniform_point(rng, nodes.side());
            let k = nodes.nearest_node(q)?;
            sum += 2.0 * cost.cost(nodes.distance(q, nodes.points()[k]))?;
        }
        Ok(sum)
    })
}

/// Writes nodes as `node x y` lines followed by one `path id id ...` line per path.
pub fn write_geometry<W: Write>(out: &mut W, nodes: &PointSet, paths: &[MarkovPath]) -> io::Result<()> {
    for p in nodes.points() {
        writeln!(out, "node {} {}", p.x, p.y)?;
    }
    for path in paths {
        write!(out, "path")?;
        for id in &path.node_indices {
            write!(out, " {id}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parsed geometry dump.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeometryDump {
    pub nodes: Vec<Point>,
    pub paths: Vec<Vec<usize>>,
}

/// Reads the format produced by [`write_geometry`]. Blank lines are skipped.
pub fn read_geometry<R: BufRead>(input: R) -> Result<GeometryDump> {
    let mut dump = GeometryDump::default();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| domain(format!("line {}: {e}", lineno + 1)))?;
        let mut fields = line.split_whitespace();
        let bad = |what: &str| Error::Domain(format!("line {}: {what}", lineno + 1));
        match fields.next() {
            None => continue,
            Some("node") => {
                let mut coord = || -> Result<f64> {
                    fields
                        .next()
                        .ok_or_else(|| bad("missing coordinate"))?
                        .parse()
                        .map_err(|_| bad("bad coordinate"))
                };
                let p = Point::new(coord()?, coord()?);
                dump.nodes.push(p);
            }
            Some("path") => {
                let ids = fields
                    .map(|f| f.parse::<usize>().map_err(|_| bad("bad node id")))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(&id) = ids.iter().find(|&&id| id >= dump.nodes.len()) {
                    return Err(bad(&format!("path references unknown node {id}")));
                }
                dump.paths.push(ids);
            }
            Some(other) => return Err(bad(&format!("unknown record `{other}`"))),
        }
    }
    Ok(dump)
}
