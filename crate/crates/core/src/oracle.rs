//! Numeric integration of the raw integrands, independent of the closed forms.
//!
//! The integrand catalog is closed: it holds exactly the members of the
//! integral family plus the piecewise one-dimensional overlap integrands for
//! two and three cells. Two methods are offered: a tensor midpoint rule with
//! a Lipschitz error bound for low arity, and seeded Monte Carlo with a
//! four-standard-error tolerance for anything larger.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::Integral;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub const MAX_TENSOR_ARITY: usize = 4;
pub const MAX_TENSOR_EVALUATIONS: u64 = 100_000_000;
pub const MIN_MC_SAMPLES: usize = 10_000;
/// Lipschitz/variation constant of the catalog (all partial derivatives are
/// bounded by 1 on domains of width at most 1).
pub const LIPSCHITZ_C: f64 = 2.0;
/// Monte Carlo tolerance in standard errors.
pub const MC_SIGMAS: f64 = 4.0;
const MC_CHUNK: usize = 8192;
const MC_TOLERANCE_FLOOR: f64 = 1e-12;

/// Which half (or all) of `[-1/2, 1/2]` a variable ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    NonNegHalf,
    NegHalf,
    Full,
}

impl Role {
    fn bounds<T: Real>(self) -> (T, T) {
        let h = T::lit(0.5);
        match self {
            Role::NonNegHalf => (T::zero(), h),
            Role::NegHalf => (-h, T::zero()),
            Role::Full => (-h, h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain<T> {
    bounds: Vec<(T, T)>,
    roles: Vec<Role>,
}

impl<T: Real> BoxDomain<T> {
    pub fn new(bounds: Vec<(T, T)>, roles: Vec<Role>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != roles.len() {
            return Err(Error::InvalidParameter("domain needs one role per bounded variable".into()));
        }
        if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidParameter(format!("empty interval [{lo:?}, {hi:?}]")));
        }
        Ok(Self { bounds, roles })
    }

    pub fn from_roles(roles: Vec<Role>) -> Self {
        let bounds = roles.iter().map(|r| r.bounds()).collect();
        Self { bounds, roles }
    }

    pub fn arity(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(T, T)] {
        &self.bounds
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn volume(&self) -> T {
        self.bounds.iter().fold(T::one(), |acc, &(lo, hi)| acc * (hi - lo))
    }
}

/// The closed catalog of integrands.
///
/// Pair layouts interleave `(y_j, v_j)`; the combined integrand lists its
/// `max_group` variables first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrand {
    Constant { arity: usize },
    /// `Π (x_j + 1/2)`
    ShiftedProduct { arity: usize },
    /// `max(x_1..x_n) + 1/2`
    MaxShifted { arity: usize },
    /// `min(x_1..x_n) + 1/2`
    MinShifted { arity: usize },
    /// `Π (y_j - v_j)`
    SpanProduct { pairs: usize },
    /// `(max(x_1..x_g) + 1/2) · Π (y_j - v_j)`
    Combined { max_group: usize, pairs: usize },
    /// Common length of two clipped cells over `[-1/2, 1/2]^2`:
    /// `1 - |x - y|` when exactly one variable is negative,
    /// `1 - max(|x|, |y|)` otherwise.
    PairOverlap,
    /// Common length of three clipped cells over `[-1/2, 1/2]^3`, by octant.
    TripleOverlap,
}

impl Integrand {
    pub fn for_integral(integral: Integral) -> Self {
        match integral {
            Integral::Shifted => Integrand::ShiftedProduct { arity: 1 },
            Integral::ShiftedPair => Integrand::ShiftedProduct { arity: 2 },
            Integral::ShiftedProduct { d } => Integrand::ShiftedProduct { arity: d },
            Integral::MaxPair => Integrand::MaxShifted { arity: 2 },
            Integral::MaxShifted { d } => Integrand::MaxShifted { arity: d },
            Integral::Span => Integrand::SpanProduct { pairs: 1 },
            Integral::SpanProduct { pairs } => Integrand::SpanProduct { pairs },
            Integral::Combined { max_group, pairs } => Integrand::Combined { max_group, pairs },
        }
    }

    pub fn arity(&self) -> usize {
        match *self {
            Integrand::Constant { arity }
            | Integrand::ShiftedProduct { arity }
            | Integrand::MaxShifted { arity }
            | Integrand::MinShifted { arity } => arity,
            Integrand::SpanProduct { pairs } => 2 * pairs,
            Integrand::Combined { max_group, pairs } => max_group + 2 * pairs,
            Integrand::PairOverlap => 2,
            Integrand::TripleOverlap => 3,
        }
    }

    /// The domain the integrand is defined over.
    pub fn natural_domain<T: Real>(&self) -> BoxDomain<T> {
        let pairs = |n: usize| (0..n).flat_map(|_| [Role::NonNegHalf, Role::NegHalf]);
        let roles: Vec<Role> = match *self {
            Integrand::Constant { arity } => vec![Role::Full; arity],
            Integrand::ShiftedProduct { arity }
            | Integrand::MaxShifted { arity }
            | Integrand::MinShifted { arity } => vec![Role::NonNegHalf; arity],
            Integrand::SpanProduct { pairs: n } => pairs(n).collect(),
            Integrand::Combined { max_group, pairs: n } => {
                std::iter::repeat_n(Role::NonNegHalf, max_group).chain(pairs(n)).collect()
            }
            Integrand::PairOverlap => vec![Role::Full; 2],
            Integrand::TripleOverlap => vec![Role::Full; 3],
        };
        BoxDomain::from_roles(roles)
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        let h = T::lit(0.5);
        let span = |p: &[T]| p.chunks_exact(2).fold(T::one(), |acc, c| acc * (c[0] - c[1]));
        let max = |p: &[T]| p.iter().copied().fold(T::neg_infinity(), T::max);
        match *self {
            Integrand::Constant { .. } => T::one(),
            Integrand::ShiftedProduct { .. } => x.iter().fold(T::one(), |acc, &v| acc * (v + h)),
            Integrand::MaxShifted { .. } => max(x) + h,
            Integrand::MinShifted { .. } => x.iter().copied().fold(T::infinity(), T::min) + h,
            Integrand::SpanProduct { .. } => span(x),
            Integrand::Combined { max_group, .. } => {
                (max(&x[..max_group]) + h) * span(&x[max_group..])
            }
            Integrand::PairOverlap => {
                let (a, b) = (x[0], x[1]);
                if (a < T::zero()) != (b < T::zero()) {
                    T::one() - (a - b).abs()
                } else {
                    T::one() - a.abs().max(b.abs())
                }
            }
            Integrand::TripleOverlap => {
                let (a, b, c) = (x[0], x[1], x[2]);
                let one = T::one();
                match (a < T::zero(), b < T::zero(), c < T::zero()) {
                    (false, false, false) => one - a.max(b).max(c),
                    (true, true, true) => one - a.abs().max(b.abs()).max(c.abs()),
                    (false, false, true) => one - a.max(b) + c,
                    (false, true, false) => one - a.max(c) + b,
                    (true, false, false) => one - b.max(c) + a,
                    (false, true, true) => one - a + b.min(c),
                    (true, false, true) => one - b + a.min(c),
                    (true, true, false) => one - c + a.min(b),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    TensorMidpoint,
    MonteCarlo,
}

impl OracleMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            OracleMethod::TensorMidpoint => "tensor-midpoint",
            OracleMethod::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult<T> {
    pub value: T,
    /// Absolute error bound (tensor) or `4 · stderr` (Monte Carlo).
    pub tolerance: T,
    pub method: OracleMethod,
    pub evaluations: u64,
}

impl<T: Real> OracleResult<T> {
    pub fn brackets(&self, target: T) -> bool {
        (self.value - target).abs() <= self.tolerance
    }
}

fn check_arity<T: Real>(integrand: &Integrand, domain: &BoxDomain<T>) -> Result<()> {
    if integrand.arity() == 0 {
        return Err(Error::InvalidParameter("integrand needs at least one variable".into()));
    }
    if integrand.arity() != domain.arity() {
        return Err(Error::InvalidParameter(format!(
            "integrand takes {} variables but the domain has {}",
            integrand.arity(),
            domain.arity()
        )));
    }
    Ok(())
}

/// Midpoint rule on a `points_per_axis^arity` tensor grid.
///
/// Tolerance is `2 · arity / points_per_axis`.
pub fn integrate_tensor<T: Real>(
    integrand: &Integrand,
    domain: &BoxDomain<T>,
    points_per_axis: usize,
) -> Result<OracleResult<T>> {
    check_arity(integrand, domain)?;
    let arity = domain.arity();
    if points_per_axis == 0 {
        return Err(Error::InvalidParameter("points_per_axis must be at least 1".into()));
    }
    let total = (points_per_axis as u64).checked_pow(arity as u32);
    if arity > MAX_TENSOR_ARITY || total.is_none_or(|t| t > MAX_TENSOR_EVALUATIONS) {
        return Err(Error::GridTooLarge {
            points: points_per_axis,
            arity,
            limit: MAX_TENSOR_EVALUATIONS,
        });
    }
    let total = total.expect("checked above");
    let n = points_per_axis;
    let steps: Vec<T> = domain
        .bounds()
        .iter()
        .map(|&(lo, hi)| (hi - lo) / T::from_usize(n).expect("grid size fits"))
        .collect();
    let coord = |axis: usize, k: usize| {
        domain.bounds()[axis].0 + (T::from_usize(k).expect("index fits") + T::lit(0.5)) * steps[axis]
    };

    let inner = n.pow(arity as u32 - 1);
    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut idx = vec![0usize; arity];
            idx[0] = first;
            let mut x: Vec<T> = (0..arity).map(|a| coord(a, idx[a])).collect();
            let mut sum = 0.0f64;
            for _ in 0..inner {
                sum += integrand.eval(&x).to_f64().unwrap_or(f64::NAN);
                for axis in 1..arity {
                    idx[axis] += 1;
                    if idx[axis] < n {
                        x[axis] = coord(axis, idx[axis]);
                        break;
                    }
                    idx[axis] = 0;
                    x[axis] = coord(axis, 0);
                }
            }
            sum
        })
        .collect();

    let cell = domain.volume().to_f64().unwrap_or(f64::NAN) / total as f64;
    let value = rng::pairwise_sum(&partials) * cell;
    Ok(OracleResult {
        value: T::lit(value),
        tolerance: T::lit(LIPSCHITZ_C * arity as f64 / n as f64),
        method: OracleMethod::TensorMidpoint,
        evaluations: total,
    })
}

/// Plain Monte Carlo: mean of uniform samples times the domain volume.
pub fn integrate_mc<T: Real>(
    integrand: &Integrand,
    domain: &BoxDomain<T>,
    samples: usize,
    seed: u64,
) -> Result<OracleResult<T>> {
    check_arity(integrand, domain)?;
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    let arity = domain.arity();
    let chunks = samples.div_ceil(MC_CHUNK);

    // per chunk: (count, mean, sum of squared deviations)
    let stats: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut rng = rng::substream(seed, c as u64);
            let mut x = vec![T::zero(); arity];
            let (mut mean, mut m2) = (0.0f64, 0.0f64);
            for k in 0..count {
                for (xi, &(lo, hi)) in x.iter_mut().zip(domain.bounds()) {
                    *xi = lo + (hi - lo) * T::sample_unit(&mut rng);
                }
                let f = integrand.eval(&x).to_f64().unwrap_or(f64::NAN);
                let delta = f - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (f - mean);
            }
            (count as f64, mean, m2)
        })
        .collect();

    let (n, mean, m2) = stats.into_iter().fold((0.0, 0.0, 0.0), |(na, ma, sa), (nb, mb, sb)| {
        let n = na + nb;
        let delta = mb - ma;
        (n, ma + delta * nb / n, sa + sb + delta * delta * na * nb / n)
    });
    let vol = domain.volume().to_f64().unwrap_or(f64::NAN);
    let stderr = (m2 / (n - 1.0) / n).sqrt() * vol;
    Ok(OracleResult {
        value: T::lit(mean * vol),
        tolerance: T::lit((MC_SIGMAS * stderr).max(MC_TOLERANCE_FLOOR)),
        method: OracleMethod::MonteCarlo,
        evaluations: samples as u64,
    })
}
