//! The power sums `S_d(y) = sum a^y` over monic `a` of degree `d` prime to `t`.
//!
//! Two evaluators that share nothing but the field:
//!
//! * [`power_sum_enumeration`] walks every monic `a = f_0 + ... + t^d` with
//!   `f_0 != 0` and adds `f_0^z (a / f_0)^m` in F_q[[t]] / t^N;
//! * [`power_sum_combinatorial`] expands the same sum through carry-free
//!   decompositions: after the character sums over the coefficients only the
//!   admissible decompositions survive, each contributing
//!   `(-1)^d * multinomial * t^weight`.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::digits::{self, DigitsError, ExponentY};
use crate::field::{FieldError, FqContext, FqElement};
use crate::series::{SeriesError, SeriesJson, TruncatedSeries};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PowerSumError {
    #[error(transparent)]
    Digits(#[from] DigitsError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("enumeration over {tuples} polynomials exceeds the limit of {limit}")]
    TooManyTuples { tuples: u64, limit: u64 },
    #[error("valuation does not fit in a machine integer")]
    ValuationOverflow,
}

impl PowerSumError {
    /// True for resource-limit failures, as opposed to bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            PowerSumError::TooManyTuples { .. }
                | PowerSumError::Digits(DigitsError::CapExceeded { .. })
                | PowerSumError::Digits(DigitsError::TooLarge)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Enumeration,
    Combinatorial,
}

/// Valuation of a power sum. Only the combinatorial evaluator can certify
/// an exact zero; enumeration can only bound the valuation from below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SumValuation {
    Exact(i128),
    ExactZero,
    AtLeast(i128),
}

impl SumValuation {
    pub fn exact(self) -> Option<i128> {
        match self {
            SumValuation::Exact(v) => Some(v),
            _ => None,
        }
    }

    /// Whether two reports can describe the same power sum.
    pub fn consistent_with(self, other: SumValuation) -> bool {
        use SumValuation::*;
        match (self, other) {
            (Exact(a), Exact(b)) => a == b,
            (ExactZero, ExactZero) => true,
            (Exact(_), ExactZero) | (ExactZero, Exact(_)) => false,
            (AtLeast(n), Exact(v)) | (Exact(v), AtLeast(n)) => v >= n,
            (AtLeast(_), _) | (_, AtLeast(_)) => true,
        }
    }

    /// From a greedy prediction: `None` means no admissible decomposition.
    pub fn from_weight(weight: Option<&BigUint>) -> Result<Self, PowerSumError> {
        match weight {
            None => Ok(SumValuation::ExactZero),
            Some(w) => w.to_i128().map(SumValuation::Exact).ok_or(PowerSumError::ValuationOverflow),
        }
    }
}

impl std::fmt::Display for SumValuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SumValuation::Exact(v) => write!(f, "{v}"),
            SumValuation::ExactZero => write!(f, "zero"),
            SumValuation::AtLeast(n) => write!(f, ">={n}"),
        }
    }
}

/// `S_d(y)` modulo `t^N` together with its valuation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerSumResult {
    pub series: TruncatedSeries,
    pub valuation: SumValuation,
    pub method: Method,
}

/// JSON form `{q, d, z, m, method, valuation, series}`.
#[derive(Clone, Debug, Serialize)]
pub struct PowerSumJson {
    pub q: u32,
    pub d: usize,
    pub z: u64,
    pub m: serde_json::Value,
    pub method: Method,
    pub valuation: SumValuation,
    pub series: SeriesJson,
}

impl PowerSumResult {
    pub fn to_json(&self, ctx: &FqContext, d: usize, y: &ExponentY) -> Result<PowerSumJson, DigitsError> {
        Ok(PowerSumJson {
            q: ctx.order(),
            d,
            z: y.residue(),
            m: digits::big_to_json(y.finite_m()?),
            method: self.method,
            valuation: self.valuation,
            series: self.series.to_json(ctx),
        })
    }
}

/// Resource bounds for the enumeration evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationLimits {
    /// Largest number of monic polynomials `(q - 1) q^(d-1)` to walk.
    pub max_tuples: u64,
    /// Ceiling for adaptive precision doubling.
    pub max_precision: i128,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits { max_tuples: 1 << 20, max_precision: 1024 }
    }
}

/// Number of monic polynomials of degree `d` with nonzero constant term.
pub fn tuple_count(q: u32, d: usize) -> Option<u64> {
    if d == 0 {
        return Some(1);
    }
    let mut n = (q - 1) as u64;
    for _ in 1..d {
        n = n.checked_mul(q as u64)?;
    }
    Some(n)
}

/// Contribution `f_0^z (a / f_0)^m` of the monic polynomial with the given
/// tuple index; `f_0` cycles fastest through the units.
fn contribution(
    ctx: &FqContext,
    d: usize,
    z: u64,
    m: &BigUint,
    index: u64,
    precision: i128,
) -> Result<TruncatedSeries, PowerSumError> {
    let q = ctx.order() as u64;
    let f0 = ctx.from_index((1 + index % (q - 1)) as u32)?;
    let f0_inv = ctx.inv(f0)?;
    let mut rest = index / (q - 1);
    let mut coeffs = Vec::with_capacity(d + 1);
    coeffs.push(FqElement::ONE);
    for _ in 1..d {
        let fi = ctx.from_index((rest % q) as u32)?;
        rest /= q;
        coeffs.push(ctx.mul(fi, f0_inv));
    }
    coeffs.push(f0_inv);
    let unit = TruncatedSeries::from_coeffs(0, coeffs, precision);
    let powered = unit.pow_one_unit(ctx, m)?;
    Ok(powered.scale(ctx, ctx.pow(f0, z as i64)?))
}

/// `S_d(y) mod t^N` by literal summation over monic polynomials, split into
/// `chunks` independently summed blocks.
pub fn power_sum_enumeration_chunked(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    precision: i128,
    limits: &EnumerationLimits,
    chunks: usize,
) -> Result<PowerSumResult, PowerSumError> {
    let m = y.finite_m()?;
    let precision = precision.max(1);
    let series = if d == 0 {
        TruncatedSeries::one(precision)
    } else {
        let q = ctx.order();
        let tuples = tuple_count(q, d).unwrap_or(u64::MAX);
        if tuples > limits.max_tuples {
            return Err(PowerSumError::TooManyTuples { tuples, limit: limits.max_tuples });
        }
        let chunks = chunks.clamp(1, tuples as usize) as u64;
        let step = tuples.div_ceil(chunks);
        let partials: Vec<TruncatedSeries> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * step;
                let hi = ((c + 1) * step).min(tuples);
                let mut acc = TruncatedSeries::zero(precision);
                for index in lo..hi {
                    acc = acc.add(ctx, &contribution(ctx, d, y.residue(), m, index, precision)?);
                }
                Ok(acc)
            })
            .collect::<Result<_, PowerSumError>>()?;
        partials
            .iter()
            .fold(TruncatedSeries::zero(precision), |acc, s| acc.add(ctx, s))
    };
    let valuation = match series.valuation().exact() {
        Some(v) => SumValuation::Exact(v),
        None => SumValuation::AtLeast(series.precision()),
    };
    Ok(PowerSumResult { series, valuation, method: Method::Enumeration })
}

/// `S_d(y) mod t^N` by literal summation over monic polynomials.
pub fn power_sum_enumeration(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    precision: i128,
    limits: &EnumerationLimits,
) -> Result<PowerSumResult, PowerSumError> {
    let chunks = rayon::current_num_threads().max(1) * 4;
    power_sum_enumeration_chunked(ctx, d, y, precision, limits, chunks)
}

/// `S_d(y)` as an exact sparse polynomial in `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactPowerSum {
    /// Nonzero terms keyed by exponent.
    pub terms: BTreeMap<u128, FqElement>,
}

impl ExactPowerSum {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn valuation(&self) -> SumValuation {
        match self.terms.keys().next() {
            None => SumValuation::ExactZero,
            Some(&w) => SumValuation::Exact(w as i128),
        }
    }

    pub fn degree(&self) -> Option<u128> {
        self.terms.keys().next_back().copied()
    }

    pub fn to_series(&self, ctx: &FqContext, precision: i128) -> TruncatedSeries {
        TruncatedSeries::from_terms(
            ctx,
            self.terms
                .iter()
                .filter(|(&w, _)| w < precision.max(0) as u128)
                .map(|(&w, &c)| (w as i128, c)),
            precision,
        )
    }
}

/// `S_d(y)` exactly, as `(-1)^d` times the sum of `multinomial * t^weight`
/// over admissible decompositions. `cap` bounds the digit units of `m`.
pub fn power_sum_combinatorial(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    cap: usize,
) -> Result<ExactPowerSum, PowerSumError> {
    power_sum_combinatorial_below(ctx, d, y, u128::MAX, cap)
}

/// The terms of `S_d(y)` of degree below `limit`, exactly. `cap` bounds the
/// digit units `p^e < limit`, the only ones that can leave `m_0`.
pub fn power_sum_combinatorial_below(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    limit: u128,
    cap: usize,
) -> Result<ExactPowerSum, PowerSumError> {
    let mut acc: BTreeMap<u128, FqElement> = BTreeMap::new();
    digits::for_each_decomposition_below(ctx, y, d, limit, cap, |dec| {
        let c = ctx.from_int(dec.multinomial as i64);
        let slot = acc.entry(dec.weight).or_insert(FqElement::ZERO);
        *slot = ctx.add(*slot, c);
    })?;
    let sign = if d % 2 == 0 { ctx.one() } else { ctx.from_int(-1) };
    let terms = acc
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|(w, c)| (w, ctx.mul(sign, c)))
        .collect();
    Ok(ExactPowerSum { terms })
}

/// Combinatorial evaluation packaged like the enumeration result.
pub fn power_sum_combinatorial_truncated(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    precision: i128,
    cap: usize,
) -> Result<PowerSumResult, PowerSumError> {
    let exact = power_sum_combinatorial(ctx, d, y, cap)?;
    Ok(PowerSumResult {
        series: exact.to_series(ctx, precision),
        valuation: exact.valuation(),
        method: Method::Combinatorial,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Enumeration(EnumerationLimits),
    Combinatorial { cap: usize },
}

/// Largest useful precision for enumeration: `S_d` is a polynomial of degree
/// at most `d * m`, so beyond that nothing new can appear.
/// The flag is set when the ceiling is that degree bound, so a sum seen to
/// vanish there is exactly zero.
fn enumeration_ceiling(d: usize, m: &BigUint, limits: &EnumerationLimits) -> (i128, bool) {
    let exact_bound = (m * BigUint::from(d)).to_i128().map(|v| v + 1).unwrap_or(i128::MAX);
    let ceiling = exact_bound.min(limits.max_precision).max(1);
    (ceiling, ceiling == exact_bound)
}

/// The valuation `v_d(y)`.
///
/// Enumeration starts at the greedy prediction plus one and doubles the
/// precision until the sum is seen to be nonzero or the ceiling is reached.
/// A sum still zero at `t^(dm+1)` is exactly zero.
pub fn valuation_of_power_sum(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    strategy: Strategy,
) -> Result<SumValuation, PowerSumError> {
    match strategy {
        Strategy::Combinatorial { cap } => Ok(power_sum_combinatorial(ctx, d, y, cap)?.valuation()),
        Strategy::Enumeration(limits) => {
            let m = y.finite_m()?;
            let (ceiling, complete) = enumeration_ceiling(d, m, &limits);
            let predicted = digits::greedy_decomposition(ctx, y, d)?
                .and_then(|dec| dec.weight().to_i128());
            let mut precision = match predicted {
                Some(w) => (w + 1).min(ceiling),
                None => ceiling.min(16),
            };
            loop {
                let res = power_sum_enumeration(ctx, d, y, precision, &limits)?;
                if let SumValuation::Exact(v) = res.valuation {
                    return Ok(SumValuation::Exact(v));
                }
                if precision >= ceiling {
                    return Ok(if complete { SumValuation::ExactZero } else { SumValuation::AtLeast(precision) });
                }
                precision = (precision * 2).min(ceiling);
            }
        }
    }
}
