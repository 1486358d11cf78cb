//! Multi-grid hash index over points on a torus, and a recall harness.
//!
//! The data space is `[0, L)^d` with periodic boundaries and `L` an integer,
//! so every unit grid has exactly `L` cells per axis whatever its offset.
//! A query inspects, in each of the `m` grids, the single bucket its own
//! cell maps to; the candidate set is the union of those buckets.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;
use crate::Rational;

pub const MIN_SIDE: u32 = 3;
const MAX_REDRAWS_PER_QUERY: usize = 10_000;

/// Points on the torus `[0, side)^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDataset {
    d: usize,
    side: u32,
    coords: Vec<f64>,
}

impl PointDataset {
    pub fn new(d: usize, side: u32, points: &[Vec<f64>]) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        if side < MIN_SIDE {
            return Err(Error::InvalidParameter(format!("domain side must be at least {MIN_SIDE}, got {side}")));
        }
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d {
                return Err(Error::InvalidParameter(format!("point has {} coordinates, expected {d}", p.len())));
            }
            if let Some(x) = p.iter().find(|&&x| !(0.0..side as f64).contains(&x)) {
                return Err(Error::InvalidParameter(format!("coordinate {x} outside [0, {side})")));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { d, side, coords })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.d..(id + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    /// CSV with header `dim0,...,dim{d-1}`, one point per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.d).map(|j| format!("dim{j}")))?;
        for p in self.points() {
            w.write_record(p.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, side: u32) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let d = header.len();
        for (j, name) in header.iter().enumerate() {
            if name.trim() != format!("dim{j}") {
                return Err(Error::InvalidParameter(format!("unexpected CSV column {name:?} at position {j}")));
            }
        }
        let mut points = Vec::new();
        for record in r.records() {
            let record = record?;
            let p = record
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidParameter(format!("not a number: {f:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            points.push(p);
        }
        Self::new(d, side, &points)
    }
}

/// `n` i.i.d. uniform points on `[0, side)^d`.
pub fn generate_dataset(n: usize, d: usize, side: u32, seed: u64) -> Result<PointDataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    if side < MIN_SIDE {
        return Err(Error::InvalidParameter(format!("domain side must be at least {MIN_SIDE}, got {side}")));
    }
    let mut stream = rng::stream(seed);
    let l = side as f64;
    let coords = (0..n * d)
        // guard against rounding up to exactly `side`
        .map(|_| (f64::sample_unit(&mut stream) * l).min(l - l * f64::EPSILON))
        .collect();
    Ok(PointDataset { d, side, coords })
}

/// Cell coordinates packed as `Σ c_j · side^j`.
pub type CellKey = u64;

fn check_key_space(d: usize, side: u32) -> Result<()> {
    match (side as u64).checked_pow(d as u32) {
        Some(_) => Ok(()),
        None => Err(Error::InvalidParameter(format!("{side}^{d} cells do not fit a 64-bit cell key"))),
    }
}

#[derive(Debug, Clone)]
pub struct MultiGridIndex {
    m: usize,
    d: usize,
    side: u32,
    offsets: Vec<f64>,
    buckets: Vec<HashMap<CellKey, Vec<usize>>>,
}

impl MultiGridIndex {
    /// Builds `m` grids with uniform offsets drawn from `seed`.
    pub fn build(dataset: &PointDataset, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        let mut stream = rng::stream(seed);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dataset.d).map(|_| f64::sample_unit(&mut stream)).collect())
            .collect();
        Self::build_with_offsets(dataset, &rows)
    }

    /// Builds with explicit grid offsets (one row of `d` values in `[0, 1)` per grid).
    pub fn build_with_offsets(dataset: &PointDataset, offsets: &[Vec<f64>]) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        let d = dataset.d;
        check_key_space(d, dataset.side)?;
        let mut flat = Vec::with_capacity(offsets.len() * d);
        for row in offsets {
            if row.len() != d || row.iter().any(|u| !(0.0..1.0).contains(u)) {
                return Err(Error::InvalidParameter("grid offsets must be d values in [0, 1)".into()));
            }
            flat.extend_from_slice(row);
        }
        let mut index = Self {
            m: offsets.len(),
            d,
            side: dataset.side,
            offsets: flat,
            buckets: Vec::with_capacity(offsets.len()),
        };
        for grid in 0..index.m {
            let mut map: HashMap<CellKey, Vec<usize>> = HashMap::new();
            for (id, p) in dataset.points().enumerate() {
                map.entry(index.cell_of(grid, p)).or_default().push(id);
            }
            index.buckets.push(map);
        }
        Ok(index)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn offsets(&self, grid: usize) -> &[f64] {
        &self.offsets[grid * self.d..(grid + 1) * self.d]
    }

    pub fn buckets(&self, grid: usize) -> &HashMap<CellKey, Vec<usize>> {
        &self.buckets[grid]
    }

    /// Integer cell coordinates of `x` in grid `grid`, wrapped into `0..side`.
    pub fn cell_coords(&self, grid: usize, x: &[f64]) -> Vec<u32> {
        let side = self.side as i64;
        x.iter()
            .zip(self.offsets(grid))
            .map(|(&xj, &off)| ((xj - off).floor() as i64).rem_euclid(side) as u32)
            .collect()
    }

    pub fn cell_of(&self, grid: usize, x: &[f64]) -> CellKey {
        let side = self.side as i64;
        x.iter()
            .zip(self.offsets(grid))
            .rev()
            .fold(0u64, |key, (&xj, &off)| {
                key * side as u64 + ((xj - off).floor() as i64).rem_euclid(side) as u64
            })
    }

    /// Union of the buckets holding `q`, one per grid.
    pub fn query_candidates(&self, q: &[f64]) -> Result<BTreeSet<usize>> {
        self.check_query(q)?;
        Ok(self.candidate_ids(q).collect())
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.d || q.iter().any(|&x| !(0.0..self.side as f64).contains(&x)) {
            return Err(Error::OutOfDomain(q.to_vec()));
        }
        Ok(())
    }

    fn candidate_ids<'a>(&'a self, q: &'a [f64]) -> impl Iterator<Item = usize> + 'a {
        (0..self.m).flat_map(move |g| {
            self.buckets[g]
                .get(&self.cell_of(g, q))
                .map(Vec::as_slice)
                .unwrap_or(&[])
                .iter()
                .copied()
        })
    }
}

/// Signed torus difference `x - q`, folded into `[-side/2, side/2]`.
fn wrapped_delta(x: f64, q: f64, side: f64) -> f64 {
    let delta = x - q;
    delta - side * (delta / side).round()
}

/// Brute-force maximum-metric range query of side `s` around `q`:
/// ids of points with wrapped `|x_j - q_j| < s/2` in every dimension.
pub fn range_query_exact(dataset: &PointDataset, q: &[f64], s: f64) -> Result<Vec<usize>> {
    let side = dataset.side as f64;
    if !(s > 0.0 && s <= side / 2.0) {
        return Err(Error::InvalidParameter(format!("query side must lie in (0, {}], got {s}", side / 2.0)));
    }
    if q.len() != dataset.d {
        return Err(Error::OutOfDomain(q.to_vec()));
    }
    let r = s / 2.0;
    Ok(dataset
        .points()
        .enumerate()
        .filter(|(_, p)| p.iter().zip(q).all(|(&x, &qj)| wrapped_delta(x, qj, side).abs() < r))
        .map(|(id, _)| id)
        .collect())
}

/// Outcome of a single query against the unit range query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryOutcome {
    pub recall: f64,
    pub candidate_fraction: f64,
    pub true_neighbors: usize,
}

/// Recall of the index for one query with `s = b = 1`; `None` when the
/// exact range result is empty.
pub fn query_recall(index: &MultiGridIndex, dataset: &PointDataset, q: &[f64]) -> Result<Option<QueryOutcome>> {
    index.check_query(q)?;
    let exact = range_query_exact(dataset, q, 1.0)?;
    if exact.is_empty() {
        return Ok(None);
    }
    let candidates: HashSet<usize> = index.candidate_ids(q).collect();
    let hits = exact.iter().filter(|id| candidates.contains(id)).count();
    Ok(Some(QueryOutcome {
        recall: hits as f64 / exact.len() as f64,
        candidate_fraction: candidates.len() as f64 / dataset.len() as f64,
        true_neighbors: exact.len(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RecallConfig {
    pub n: usize,
    pub d: usize,
    pub side: u32,
    pub m: usize,
    pub queries: usize,
    /// Queries answered by each index build; every build draws fresh grid
    /// offsets.
    pub queries_per_build: usize,
    pub seed: u64,
}

impl RecallConfig {
    /// One index build per query.
    pub fn new(n: usize, d: usize, side: u32, m: usize, queries: usize, seed: u64) -> Self {
        Self { n, d, side, m, queries, queries_per_build: 1, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallReport {
    pub config: RecallConfig,
    pub queries: usize,
    pub builds: usize,
    pub mean_recall: f64,
    /// Standard error over per-build mean recalls (over queries when there
    /// is a single build).
    pub stderr: f64,
    /// `p(m, 1, d)`, the modelled selectivity.
    #[serde(serialize_with = "crate::report::serialize_fraction")]
    pub predicted: Rational,
    pub mean_candidate_fraction: f64,
    /// Queries redrawn because their exact range result was empty.
    pub redraws: usize,
}

/// Draws a query in `[0, side)^d` whose unit range result is non-empty.
fn draw_query(
    index: &MultiGridIndex,
    dataset: &PointDataset,
    stream: &mut rng::Stream,
) -> Result<(QueryOutcome, usize)> {
    let side = dataset.side as f64;
    for attempt in 0..MAX_REDRAWS_PER_QUERY {
        let q: Vec<f64> = (0..dataset.d)
            .map(|_| (f64::sample_unit(stream) * side).min(side - side * f64::EPSILON))
            .collect();
        if let Some(outcome) = query_recall(index, dataset, &q)? {
            return Ok((outcome, attempt));
        }
    }
    Err(Error::InvalidParameter(format!(
        "no query with a non-empty range result after {MAX_REDRAWS_PER_QUERY} draws; dataset too sparse"
    )))
}

/// Mean recall of random unit range queries against `m`-grid indexes over
/// one uniform dataset.
///
/// The modelled selectivity is an expectation over grid offsets as well as
/// query positions, so the index is rebuilt with fresh offsets every
/// `queries_per_build` queries. Dataset, offsets and queries use seeds
/// derived from `seed`; build `b` and query `k` draw from their own
/// substreams, so results do not depend on the thread pool.
pub fn recall_experiment(cfg: &RecallConfig) -> Result<RecallReport> {
    if cfg.queries == 0 || cfg.queries_per_build == 0 {
        return Err(Error::InvalidParameter("queries and queries_per_build must be at least 1".into()));
    }
    let dataset = generate_dataset(cfg.n, cfg.d, cfg.side, rng::derive_seed(cfg.seed, 0))?;
    check_key_space(cfg.d, cfg.side)?;
    if cfg.m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    let predicted = analytic::p_at_least_one::<Rational>(cfg.m, cfg.d)?;
    let offset_seed = rng::derive_seed(cfg.seed, 1);
    let query_seed = rng::derive_seed(cfg.seed, 2);
    let builds = cfg.queries.div_ceil(cfg.queries_per_build);

    let per_build = (0..builds)
        .into_par_iter()
        .map(|b| {
            let index = MultiGridIndex::build(&dataset, cfg.m, rng::derive_seed(offset_seed, b as u64))?;
            let first = b * cfg.queries_per_build;
            let last = (first + cfg.queries_per_build).min(cfg.queries);
            (first..last)
                .map(|k| draw_query(&index, &dataset, &mut rng::substream(query_seed, k as u64)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<Vec<(QueryOutcome, usize)>>>>()?;

    let outcomes: Vec<&(QueryOutcome, usize)> = per_build.iter().flatten().collect();
    let recalls: Vec<f64> = outcomes.iter().map(|(o, _)| o.recall).collect();
    let fractions: Vec<f64> = outcomes.iter().map(|(o, _)| o.candidate_fraction).collect();
    let mean_recall = rng::pairwise_sum(&recalls) / recalls.len() as f64;
    let stderr = if builds >= 2 {
        let build_means: Vec<f64> = per_build
            .iter()
            .map(|qs| qs.iter().map(|(o, _)| o.recall).sum::<f64>() / qs.len() as f64)
            .collect();
        rng::mean_stderr(&build_means).1
    } else {
        rng::mean_stderr(&recalls).1
    };
    Ok(RecallReport {
        config: *cfg,
        queries: cfg.queries,
        builds,
        mean_recall,
        stderr,
        predicted,
        mean_candidate_fraction: rng::pairwise_sum(&fractions) / fractions.len() as f64,
        redraws: outcomes.iter().map(|(_, r)| r).sum(),
    })
}
