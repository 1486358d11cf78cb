//! Closed-form coverage probabilities and the supporting integral family.
//!
//! Every function is generic over [`Field`]; instantiate with [`Rational`]
//! for exact values or with `f64` for quick approximations.
//!
//! Write each cell's offset as `x = u - 1/2`, uniform on `[-1/2, 1/2)`. In
//! one dimension the common part of `ell` clipped cells then has length
//! `1 - max(nonnegative x's) + min(negative x's)`, an empty max or min
//! contributing 0. Splitting the cube by the sign of each variable gives
//! `C(ell, i)` congruent quadrants with `i` nonnegative variables, each
//! integrable through order statistics of uniforms on `[0, 1/2]`.

use num_bigint::BigInt;
use num_traits::{pow, One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::binomial;
use crate::scalar::Field;
use crate::Rational;

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::InvalidParameter(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

fn half<F: Field>() -> F {
    F::from_ratio(1, 2)
}

fn ratio<F: Field>(n: usize, d: usize) -> F {
    F::from_ratio(n as i64, d as i64)
}

fn choose<F: Field>(n: usize, k: usize) -> F {
    F::from_bigint(&binomial(n as u64, k as u64))
}

/// `E[max]` of `count` i.i.d. uniforms on `[0, 1/2]`; zero for an empty max.
pub fn expected_max_half<F: Field>(count: usize) -> F {
    if count == 0 {
        F::zero()
    } else {
        ratio(count, 2 * (count + 1))
    }
}

/// `E[min]` of `count` i.i.d. uniforms on `[0, 1/2]`; zero for an empty min.
pub fn expected_min_half<F: Field>(count: usize) -> F {
    if count == 0 {
        F::zero()
    } else {
        ratio(1, 2 * (count + 1))
    }
}

/// Members of the integral family, all over `x, y ∈ [0, 1/2]`, `v ∈ [-1/2, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integral {
    /// `∫ (x + 1/2)`
    Shifted,
    /// `∫∫ (x1 + 1/2)(x2 + 1/2)`
    ShiftedPair,
    /// `∫ Π_{j ≤ d} (x_j + 1/2)`
    ShiftedProduct { d: usize },
    /// `∫∫ max(x1, x2) + 1/2`
    MaxPair,
    /// `∫ max(x_1..x_d) + 1/2`
    MaxShifted { d: usize },
    /// `∫∫ (y - v)`
    Span,
    /// `∫ Π_{j ≤ pairs} (y_j - v_j)`
    SpanProduct { pairs: usize },
    /// `∫ (max(x_1..x_g) + 1/2) · Π_{j ≤ pairs} (y_j - v_j)` with `g = max_group`
    Combined { max_group: usize, pairs: usize },
}

impl Integral {
    /// Short identifier of the table row this integral belongs to.
    pub fn id(&self) -> &'static str {
        match self {
            Integral::Shifted => "a",
            Integral::ShiftedPair => "b",
            Integral::ShiftedProduct { .. } => "c",
            Integral::MaxPair => "d",
            Integral::MaxShifted { .. } => "e",
            Integral::Span => "f",
            Integral::SpanProduct { .. } => "g",
            Integral::Combined { .. } => "h",
        }
    }

    /// Number of integration variables.
    pub fn arity(&self) -> usize {
        match *self {
            Integral::Shifted => 1,
            Integral::ShiftedPair | Integral::MaxPair | Integral::Span => 2,
            Integral::ShiftedProduct { d } | Integral::MaxShifted { d } => d,
            Integral::SpanProduct { pairs } => 2 * pairs,
            Integral::Combined { max_group, pairs } => max_group + 2 * pairs,
        }
    }

    /// `(x variables, (y, v) pairs)`; zero where a group is absent.
    pub fn params(&self) -> (usize, usize) {
        match *self {
            Integral::Shifted => (1, 0),
            Integral::ShiftedPair | Integral::MaxPair => (2, 0),
            Integral::ShiftedProduct { d } | Integral::MaxShifted { d } => (d, 0),
            Integral::Span => (0, 1),
            Integral::SpanProduct { pairs } => (0, pairs),
            Integral::Combined { max_group, pairs } => (max_group, pairs),
        }
    }

    pub fn value<F: Field>(&self) -> Result<F> {
        match *self {
            Integral::Shifted => Ok(F::from_ratio(3, 8)),
            Integral::ShiftedPair => Ok(F::from_ratio(9, 64)),
            Integral::ShiftedProduct { d } => {
                positive("d", d)?;
                Ok(pow(F::from_ratio(3, 8), d))
            }
            Integral::MaxPair => Ok(F::from_ratio(5, 24)),
            Integral::MaxShifted { d } => {
                positive("d", d)?;
                Ok(max_shifted(d))
            }
            Integral::Span => Ok(F::from_ratio(1, 8)),
            Integral::SpanProduct { pairs } => {
                positive("pairs", pairs)?;
                Ok(pow(F::from_ratio(1, 8), pairs))
            }
            Integral::Combined { max_group, pairs } => {
                positive("max_group", max_group)?;
                positive("pairs", pairs)?;
                Ok(max_shifted::<F>(max_group) * pow(F::from_ratio(1, 8), pairs))
            }
        }
    }
}

/// `(2d + 1) / ((d + 1) · 2^(d + 1))`
fn max_shifted<F: Field>(d: usize) -> F {
    let denom = F::from_bigint(&(BigInt::from(d + 1) << (d + 1)));
    ratio::<F>(2 * d + 1, 1) / denom
}

/// Same integrand with `min` in place of `max`:
/// `(1/2)^d · (1/2 + 1/(2(d + 1)))`. Differs from [`Integral::MaxShifted`]
/// for every `d ≥ 2`.
pub fn min_shifted<F: Field>(d: usize) -> Result<F> {
    positive("d", d)?;
    Ok(pow(half::<F>(), d) * (half::<F>() + expected_min_half::<F>(d)))
}

/// The combined integral with group roles exchanged,
/// `(2P + 1) / (8^G · (P + 1) · 2^(P + 1))`.
pub fn combined_roles_swapped<F: Field>(max_group: usize, pairs: usize) -> Result<F> {
    positive("max_group", max_group)?;
    positive("pairs", pairs)?;
    Ok(max_shifted::<F>(pairs) * pow(F::from_ratio(1, 8), max_group))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralEntry {
    pub integral: Integral,
    #[serde(serialize_with = "crate::report::serialize_fraction")]
    pub value: Rational,
}

/// Largest `d` (and pair count) listed by [`integral_table`].
pub const TABLE_MAX_D: usize = 6;
/// Largest group sizes listed for the combined integral.
pub const TABLE_MAX_COMBINED: usize = 3;

/// Every integral of the family with its exact value: the fixed entries
/// plus the parameterised ones for `d ≤ 6` and combined sizes `≤ 3`.
pub fn integral_table() -> Vec<IntegralEntry> {
    let mut rows = vec![Integral::Shifted, Integral::ShiftedPair];
    rows.extend((1..=TABLE_MAX_D).map(|d| Integral::ShiftedProduct { d }));
    rows.push(Integral::MaxPair);
    rows.extend((1..=TABLE_MAX_D).map(|d| Integral::MaxShifted { d }));
    rows.push(Integral::Span);
    rows.extend((1..=TABLE_MAX_D).map(|pairs| Integral::SpanProduct { pairs }));
    for max_group in 1..=TABLE_MAX_COMBINED {
        for pairs in 1..=TABLE_MAX_COMBINED {
            rows.push(Integral::Combined { max_group, pairs });
        }
    }
    rows.into_iter()
        .map(|integral| IntegralEntry {
            value: integral.value().expect("table parameters are positive"),
            integral,
        })
        .collect()
}

/// `p(1, 1, d) = (3/4)^d`: expected clipped volume of one cell.
pub fn p_single<F: Field>(d: usize) -> Result<F> {
    positive("d", d)?;
    Ok(pow(F::from_ratio(3, 4), d))
}

/// One sign pattern class of the `ell`-variable overlap integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantTerm<F> {
    /// Variables in `[0, 1/2]`.
    pub nonneg: usize,
    /// Variables in `[-1/2, 0)`.
    pub neg: usize,
    /// Number of congruent quadrants, `C(ell, nonneg)`.
    pub weight: F,
    /// Integral of `1 - max(nonneg) + min(neg)` over one quadrant.
    pub value: F,
}

pub fn quadrant_terms<F: Field>(ell: usize) -> Result<Vec<QuadrantTerm<F>>> {
    positive("ell", ell)?;
    let volume: F = pow(half::<F>(), ell);
    Ok((0..=ell)
        .map(|i| {
            let k = ell - i;
            let mean = F::one() - expected_max_half::<F>(i) - expected_max_half::<F>(k);
            QuadrantTerm {
                nonneg: i,
                neg: k,
                weight: choose(ell, i),
                value: volume.clone() * mean,
            }
        })
        .collect())
}

/// `p(1, ell, 1)`: expected common length of `ell` independent clipped
/// cells in one dimension, summed over sign quadrants.
pub fn p_one_of_one_overlap<F: Field>(ell: usize) -> Result<F> {
    Ok(quadrant_terms::<F>(ell)?
        .into_iter()
        .fold(F::zero(), |acc, t| acc + t.weight * t.value))
}

/// `p(1, ell, d) = p(1, ell, 1)^d`; dimensions are independent.
pub fn p_one_of_one_overlap_dd<F: Field>(ell: usize, d: usize) -> Result<F> {
    positive("d", d)?;
    Ok(pow(p_one_of_one_overlap::<F>(ell)?, d))
}

/// `p(m, 1, d)` by inclusion–exclusion over the overlap terms,
/// `Σ_{j=1..m} (-1)^(j+1) C(m, j) p(1, j, d)`.
pub fn p_at_least_one<F: Field>(m: usize, d: usize) -> Result<F> {
    p_at_least_ell(m, 1, d)
}

/// Inclusion–exclusion whose last term uses `p(1, m - 1, d)` instead of
/// `p(1, m, d)`. Kept only for comparison against [`p_at_least_one`]; for
/// `m ≥ 3` it disagrees with simulation (and exceeds 1 at `m = 3, d = 1`).
pub fn p_at_least_one_shifted_last_term<F: Field>(m: usize, d: usize) -> Result<F> {
    positive("m", m)?;
    positive("d", d)?;
    if m == 1 {
        return p_single(d);
    }
    let mut acc = F::zero();
    for j in 1..=m {
        let overlap = if j == m { j - 1 } else { j };
        let term = choose::<F>(m, j) * p_one_of_one_overlap_dd::<F>(overlap, d)?;
        acc = if j % 2 == 1 { acc + term } else { acc - term };
    }
    Ok(acc)
}

/// `p(m, ell, d)`: at-least-`ell` inclusion–exclusion,
/// `Σ_{j=ell..m} (-1)^(j-ell) C(j-1, ell-1) C(m, j) p(1, j, d)`.
/// Zero when `ell > m`.
pub fn p_at_least_ell<F: Field>(m: usize, ell: usize, d: usize) -> Result<F> {
    positive("m", m)?;
    positive("ell", ell)?;
    positive("d", d)?;
    let mut acc = F::zero();
    for j in ell..=m {
        let term = choose::<F>(j - 1, ell - 1) * choose::<F>(m, j) * p_one_of_one_overlap_dd::<F>(j, d)?;
        acc = if (j - ell) % 2 == 0 { acc + term } else { acc - term };
    }
    Ok(acc)
}

/// Analytic value for a (normalized) coverage spec; requires `b = s = 1`.
pub fn p_for_spec(spec: &crate::CoverageSpec) -> Result<Rational> {
    spec.require_unit()?;
    let s = spec.normalized();
    p_at_least_ell(s.m(), s.ell(), s.d())
}

/// `true` when the exact value lies in `[0, 1]`.
pub fn is_probability(r: &Rational) -> bool {
    !(r < &Rational::zero() || r > &Rational::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn integral_table_printed_values() {
        assert_eq!(Integral::Shifted.value::<Rational>().unwrap(), q(3, 8));
        assert_eq!(Integral::ShiftedPair.value::<Rational>().unwrap(), q(9, 64));
        assert_eq!(Integral::MaxPair.value::<Rational>().unwrap(), q(5, 24));
        assert_eq!(Integral::MaxShifted { d: 2 }.value::<Rational>().unwrap(), q(5, 24));
        assert_eq!(Integral::MaxShifted { d: 1 }.value::<Rational>().unwrap(), q(3, 8));
        assert_eq!(Integral::MaxShifted { d: 3 }.value::<Rational>().unwrap(), q(7, 64));
        assert_eq!(Integral::Span.value::<Rational>().unwrap(), q(1, 8));
        assert_eq!(Integral::SpanProduct { pairs: 2 }.value::<Rational>().unwrap(), q(1, 64));
        assert_eq!(
            Integral::Combined { max_group: 1, pairs: 1 }.value::<Rational>().unwrap(),
            q(3, 64)
        );
        assert_eq!(Integral::ShiftedProduct { d: 2 }.value::<Rational>().unwrap(), q(9, 64));
    }

    #[test]
    fn integral_parameters_must_be_positive() {
        assert!(Integral::ShiftedProduct { d: 0 }.value::<Rational>().is_err());
        assert!(Integral::Combined { max_group: 0, pairs: 1 }.value::<Rational>().is_err());
        assert!(Integral::SpanProduct { pairs: 0 }.value::<f64>().is_err());
    }

    #[test]
    fn table_shape() {
        let t = integral_table();
        assert_eq!(t.len(), 2 + 6 + 1 + 6 + 1 + 6 + 9);
        assert!(t.iter().all(|e| is_probability(&e.value)));
    }

    #[test]
    fn min_reading_differs() {
        assert_eq!(min_shifted::<Rational>(1).unwrap(), q(3, 8));
        assert_eq!(min_shifted::<Rational>(2).unwrap(), q(1, 6));
        assert_eq!(min_shifted::<Rational>(3).unwrap(), q(5, 64));
        assert_eq!(combined_roles_swapped::<Rational>(2, 1).unwrap(), q(3, 512));
    }

    #[test]
    fn closed_forms() {
        assert_eq!(p_single::<Rational>(1).unwrap(), q(3, 4));
        assert_eq!(p_single::<Rational>(2).unwrap(), q(9, 16));
        assert_eq!(p_single::<Rational>(10).unwrap(), q(59049, 1048576));
        assert!(p_single::<Rational>(0).is_err());
    }

    #[test]
    fn quadrant_sum_special_cases() {
        assert_eq!(p_one_of_one_overlap::<Rational>(1).unwrap(), q(3, 4));
        assert_eq!(p_one_of_one_overlap::<Rational>(2).unwrap(), q(7, 12));
        assert_eq!(p_one_of_one_overlap::<Rational>(3).unwrap(), q(15, 32));
        assert_eq!(p_one_of_one_overlap::<Rational>(4).unwrap(), q(31, 80));
    }

    #[test]
    fn three_fold_octant_split() {
        // all-same-sign octants and mixed octants
        let t = quadrant_terms::<Rational>(3).unwrap();
        let pure: Rational = t.iter().filter(|t| t.nonneg == 0 || t.neg == 0).map(|t| &t.weight * &t.value).sum();
        let mixed: Rational = t.iter().filter(|t| t.nonneg != 0 && t.neg != 0).map(|t| &t.weight * &t.value).sum();
        assert_eq!(pure, q(5, 32));
        assert_eq!(mixed, q(5, 16));
        let octants: Rational = t.iter().map(|t| t.weight.clone()).sum();
        assert_eq!(octants, q(8, 1));
    }

    #[test]
    fn quadrant_terms_bounded() {
        for ell in 1..=10 {
            let bound: Rational = pow(q(1, 2), ell);
            for t in quadrant_terms::<Rational>(ell).unwrap() {
                assert_eq!(t.nonneg + t.neg, ell);
                assert!(t.value >= Rational::zero() && t.value <= bound);
            }
        }
    }

    #[test]
    fn overlap_matches_geometric_series_pattern() {
        // (2^(l+1) - 1) / ((l + 1) 2^l), checked rather than assumed
        for ell in 1..=20usize {
            let pattern = Rational::new(
                (BigInt::from(1) << (ell + 1)) - 1,
                BigInt::from(ell + 1) << ell,
            );
            assert_eq!(p_one_of_one_overlap::<Rational>(ell).unwrap(), pattern, "ell = {ell}");
        }
    }

    #[test]
    fn overlap_in_d_dimensions() {
        assert_eq!(p_one_of_one_overlap_dd::<Rational>(2, 2).unwrap(), q(49, 144));
        assert_eq!(p_one_of_one_overlap_dd::<Rational>(1, 3).unwrap(), q(27, 64));
        assert_eq!(p_one_of_one_overlap_dd::<Rational>(3, 2).unwrap(), q(225, 1024));
    }

    #[test]
    fn inclusion_exclusion_values() {
        assert_eq!(p_at_least_one::<Rational>(1, 2).unwrap(), q(9, 16));
        assert_eq!(p_at_least_one::<Rational>(2, 1).unwrap(), q(11, 12));
        assert_eq!(p_at_least_one::<Rational>(3, 1).unwrap(), q(31, 32));
        assert_eq!(p_at_least_one::<Rational>(2, 2).unwrap(), q(113, 144));
        assert_eq!(p_at_least_one_shifted_last_term::<Rational>(3, 1).unwrap(), q(13, 12));
    }

    #[test]
    fn at_least_ell_values() {
        assert_eq!(p_at_least_ell::<Rational>(2, 2, 1).unwrap(), q(7, 12));
        assert_eq!(p_at_least_ell::<Rational>(2, 3, 4).unwrap(), Rational::zero());
        assert_eq!(p_at_least_ell::<Rational>(3, 2, 1).unwrap(), q(13, 16));
        assert_eq!(p_at_least_ell::<Rational>(1, 2, 1).unwrap(), Rational::zero());
    }

    #[test]
    fn float_instantiation_tracks_exact() {
        for (m, ell, d) in [(3, 1, 2), (4, 2, 3), (5, 5, 1)] {
            let exact = crate::rational::to_f64(&p_at_least_ell::<Rational>(m, ell, d).unwrap());
            let approx = p_at_least_ell::<f64>(m, ell, d).unwrap();
            assert!((exact - approx).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_entry_point() {
        let s = crate::CoverageSpec::unit(1, 2, 1).unwrap();
        assert_eq!(p_for_spec(&s).unwrap(), q(7, 12));
        let s = crate::CoverageSpec::new(1, 1, 1, 2.0, 2.0).unwrap();
        assert!(p_for_spec(&s).is_err());
    }
}
