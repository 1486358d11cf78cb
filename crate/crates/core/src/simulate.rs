//! Monte Carlo estimation of `p(m, ell, d)` over random cell sets.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic;
use crate::error::{Error, Result};
use crate::geometry::{coverage_volume, sample_cell_set, CellSet, MAX_CELLS, MAX_DIM};
use crate::rng;
use crate::scalar::Real;
use crate::spec::CoverageSpec;
use crate::Rational;

pub const MIN_SAMPLES: usize = 100;
pub const MIN_POINTS_PER_CELLSET: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactVolume,
    PointSample,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ExactVolume => "exact-volume",
            Method::PointSample => "point-sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    /// The spec actually simulated (after normalization).
    pub spec: CoverageSpec,
    /// Set when the requested spec was rewritten by [`CoverageSpec::normalized`].
    pub normalized_from: Option<CoverageSpec>,
    pub method: Method,
}

fn prepare(spec: &CoverageSpec, samples: usize) -> Result<(CoverageSpec, Option<CoverageSpec>)> {
    spec.require_equal_sides()?;
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let run = spec.normalized();
    let from = (run != *spec).then_some(*spec);
    Ok((run, from))
}

/// Mean exact coverage volume over `samples` independent cell sets.
///
/// Cell set `k` is drawn from the substream `(seed, k)`, so the result does
/// not depend on the thread pool.
pub fn estimate(spec: &CoverageSpec, samples: usize, seed: u64) -> Result<Estimate> {
    estimate_as::<f64>(spec, samples, seed)
}

pub fn estimate_as<T: Real>(spec: &CoverageSpec, samples: usize, seed: u64) -> Result<Estimate> {
    let (run, normalized_from) = prepare(spec, samples)?;
    if run.m() > MAX_CELLS || run.d() > MAX_DIM {
        return Err(Error::DecompositionLimit {
            m: run.m(),
            d: run.d(),
            max_m: MAX_CELLS,
            max_d: MAX_DIM,
        });
    }
    let volumes = (0..samples)
        .into_par_iter()
        .map(|k| {
            let cells: CellSet<T> = sample_cell_set(&mut rng::substream(seed, k as u64), &run);
            coverage_volume(&cells, run.ell()).map(|v| v.to_f64().unwrap_or(f64::NAN))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = rng::mean_stderr(&volumes);
    Ok(Estimate {
        mean,
        stderr,
        samples,
        seed,
        spec: run,
        normalized_from,
        method: Method::ExactVolume,
    })
}

/// Two-stage estimate: each cell set's coverage is itself estimated from
/// `points_per_cellset` uniform query points. Works for any `m` and `d`.
///
/// The standard error is taken over the per-cell-set fractions, which by the
/// law of total variance already includes both the between-cell-set and the
/// within-cell-set (binomial) variance.
pub fn estimate_pointwise(
    spec: &CoverageSpec,
    cell_samples: usize,
    points_per_cellset: usize,
    seed: u64,
) -> Result<Estimate> {
    let (run, normalized_from) = prepare(spec, cell_samples)?;
    if points_per_cellset < MIN_POINTS_PER_CELLSET {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_POINTS_PER_CELLSET} points per cell set, got {points_per_cellset}"
        )));
    }
    let fractions: Vec<f64> = (0..cell_samples)
        .into_par_iter()
        .map(|k| {
            let mut stream = rng::substream(seed, k as u64);
            let cells: CellSet<f64> = sample_cell_set(&mut stream, &run);
            let mut point = vec![0.0; run.d()];
            let mut hits = 0usize;
            for _ in 0..points_per_cellset {
                for x in point.iter_mut() {
                    *x = f64::sample_unit(&mut stream) - 0.5;
                }
                if cells.multiplicity(&point) >= run.ell() {
                    hits += 1;
                }
            }
            hits as f64 / points_per_cellset as f64
        })
        .collect();
    let (mean, stderr) = rng::mean_stderr(&fractions);
    Ok(Estimate {
        mean,
        stderr,
        samples: cell_samples,
        seed,
        spec: run,
        normalized_from,
        method: Method::PointSample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub spec: CoverageSpec,
    pub estimate: Estimate,
    #[serde(serialize_with = "serialize_opt_fraction")]
    pub analytic: Option<Rational>,
    pub z: Option<f64>,
}

fn serialize_opt_fraction<S: serde::Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => crate::report::serialize_fraction(r, s),
        None => s.serialize_none(),
    }
}

/// Simulates every spec and compares against the closed form where one
/// exists (`b = s = 1`). Row `i` uses a seed derived from `(seed, i)`.
pub fn sweep(specs: &[CoverageSpec], samples: usize, seed: u64) -> Result<Vec<SweepRow>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let estimate = estimate(spec, samples, rng::derive_seed(seed, i as u64))?;
            let analytic = analytic::p_for_spec(spec).ok();
            let z = analytic.as_ref().and_then(|a| {
                crate::report::z_score(estimate.mean, crate::rational::to_f64(a), estimate.stderr)
            });
            Ok(SweepRow { spec: *spec, estimate, analytic, z })
        })
        .collect()
}
