//! The zeta polynomial `zeta_t(x, y) = sum_d S_d(y) x^d`, its zeros in
//! F_q((t)), and the simplicity verdict.
//!
//! Roots are lifted one polygon side at a time. For a side from `d - 1` to
//! `d` with slope `lambda`, substituting `x = t^-lambda u` and dividing by
//! `t^c0` (the side's intercept) gives a polynomial `Q(u)` with integral
//! coefficients whose root `u` is a unit, so Newton's iteration runs in
//! F_q[[t]] where truncation never loses precision.

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digits::{self, DigitsError, ExponentY, PadicPart, PadicStream, DEFAULT_UNIT_CAP};
use crate::field::{FqContext, FqElement};
use crate::polygon::{NewtonPolygon, PolygonError};
use crate::powersum::{self, EnumerationLimits, ExactPowerSum, PowerSumError, SumValuation};
use crate::series::{self, SeriesError, SeriesJson, TruncatedSeries, Valuation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZetaError {
    #[error(transparent)]
    PowerSum(#[from] PowerSumError),
    #[error(transparent)]
    Digits(#[from] DigitsError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Polygon(#[from] PolygonError),
    #[error("S_{d} is nonzero beyond the degree bound {bound}")]
    BoundViolated { d: usize, bound: usize },
    #[error("evaluators disagree on S_{d}: {detail}")]
    CrossCheck { d: usize, detail: String },
    #[error("valuation of S_{d} is only known as {valuation}")]
    Unresolved { d: usize, valuation: SumValuation },
    #[error("constant term is zero")]
    ZeroConstantTerm,
    #[error("polygon side starting at degree {start} has width {width}")]
    WidthNotOne { start: usize, width: usize },
    #[error("root of valuation {valuation}: {detail}")]
    HenselConditionFailed { valuation: i128, detail: String },
    #[error("v_{d} did not stabilize within {depth} digits (last weight {last:?})")]
    NotStabilized { d: usize, depth: usize, last: Option<BigUint> },
    #[error("precision {precision} needs {needed} stream digits, only {depth} declared")]
    StreamTooShallow { precision: i128, needed: usize, depth: usize },
    #[error("coefficient {d} is known to t^{available}, t^{needed} needed")]
    PrecisionExhausted { d: usize, needed: i128, available: i128 },
}

impl ZetaError {
    /// True for failures caused by search caps or declared depths rather
    /// than by bad input or a mathematical counterexample.
    pub fn is_resource_limit(&self) -> bool {
        match self {
            ZetaError::PowerSum(e) => e.is_resource_limit(),
            ZetaError::Digits(e) => matches!(e, DigitsError::CapExceeded { .. } | DigitsError::TooLarge),
            ZetaError::Unresolved { .. }
            | ZetaError::StreamTooShallow { .. }
            | ZetaError::PrecisionExhausted { .. } => true,
            _ => false,
        }
    }

    /// The pipeline stage a mathematical failure belongs to, if it is one.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            ZetaError::BoundViolated { .. } | ZetaError::CrossCheck { .. } => Some(Stage::Coefficients),
            ZetaError::NotStabilized { .. } => Some(Stage::Stabilization),
            ZetaError::WidthNotOne { .. } => Some(Stage::Polygon),
            ZetaError::HenselConditionFailed { .. } => Some(Stage::Roots),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Coefficients,
    Stabilization,
    Polygon,
    Roots,
    Residual,
}

/// Default for [`ZetaOptions::stream_cap`].
pub const DEFAULT_STREAM_CAP: usize = 40;

/// Search caps for building a zeta polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZetaOptions {
    /// Digit-unit cap for the combinatorial evaluator.
    pub cap: usize,
    /// Cap on the movable digit units (those below the weight cutoff) when
    /// expanding a stream truncation; the cutoff keeps this search small.
    pub stream_cap: usize,
    pub limits: EnumerationLimits,
    /// Re-derive every coefficient by enumeration and compare.
    pub cross_check: bool,
}

impl Default for ZetaOptions {
    fn default() -> Self {
        ZetaOptions { cap: DEFAULT_UNIT_CAP, stream_cap: DEFAULT_STREAM_CAP, limits: EnumerationLimits::default(), cross_check: true }
    }
}

/// An exact Laurent polynomial in `t`: `coeffs[i]` multiplies `t^(lead_val + i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaurentJson {
    pub lead_val: i128,
    pub coeffs: Vec<Vec<u32>>,
}

/// A polynomial in `x` over F_q[t, 1/t] read from JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub p: u32,
    pub n: u32,
    #[serde(default)]
    pub modulus: Option<Vec<u32>>,
    pub coefficients: Vec<LaurentJson>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Coefficients {
    Exact(Vec<ExactPowerSum>),
    /// Literal sums, recomputed at whatever precision is asked for.
    Enumerated(EnumerationLimits),
    /// Low-degree terms of the digit expansion for a deep enough stream
    /// truncation, with the digit-unit cap.
    Digits(usize),
    /// Exact Laurent polynomials as `(exponent, coefficient)` terms.
    Laurent(Vec<Vec<(i128, FqElement)>>),
}

/// Valuation of a stream exponent's `S_d`, witnessed at a truncation depth.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizedValuation {
    pub d: usize,
    pub weight: Option<BigUint>,
    /// Digits of the stream consumed when stability was seen.
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZetaPolynomial {
    exponent: Option<ExponentY>,
    valuations: Vec<SumValuation>,
    degree_bound: Option<usize>,
    coefficients: Coefficients,
    stabilization: Option<Vec<StabilizedValuation>>,
    cross_checked: bool,
}

impl ZetaPolynomial {
    /// Degree in `x`: the last `d` with `S_d` not known to vanish.
    pub fn degree(&self) -> usize {
        self.valuations.len() - 1
    }

    pub fn valuations(&self) -> &[SumValuation] {
        &self.valuations
    }

    pub fn degree_bound(&self) -> Option<usize> {
        self.degree_bound
    }

    pub fn exponent(&self) -> Option<&ExponentY> {
        self.exponent.as_ref()
    }

    pub fn stabilization(&self) -> Option<&[StabilizedValuation]> {
        self.stabilization.as_deref()
    }

    /// Deepest truncation a stream valuation needed.
    pub fn stabilization_depth(&self) -> Option<usize> {
        self.stabilization
            .as_ref()
            .map(|s| s.iter().map(|v| v.depth).max().unwrap_or(0))
    }

    pub fn cross_checked(&self) -> bool {
        self.cross_checked
    }

    /// Exact sparse coefficients, when they came from the digit expansion.
    pub fn exact_coefficients(&self) -> Option<&[ExactPowerSum]> {
        match &self.coefficients {
            Coefficients::Exact(v) => Some(v),
            _ => None,
        }
    }

    /// Coefficient `d` modulo `t^precisions[d]`.
    pub fn coefficients(&self, ctx: &FqContext, precisions: &[i128]) -> Result<Vec<TruncatedSeries>, ZetaError> {
        let y = self.exponent.as_ref();
        (0..=self.degree())
            .map(|d| {
                let precision = precisions[d];
                if self.valuations[d] == SumValuation::ExactZero {
                    return Ok(TruncatedSeries::zero(precision));
                }
                match &self.coefficients {
                    Coefficients::Exact(sums) => Ok(sums[d].to_series(ctx, precision)),
                    Coefficients::Enumerated(limits) => {
                        if precision > limits.max_precision {
                            return Err(ZetaError::PrecisionExhausted {
                                d,
                                needed: precision,
                                available: limits.max_precision,
                            });
                        }
                        padic_power_sum(ctx, d, y.expect("enumerated coefficients carry their exponent"), precision, limits)
                    }
                    Coefficients::Digits(cap) => {
                        let y = y.expect("stream coefficients carry their exponent");
                        Ok(stream_power_sum(ctx, d, y, precision, *cap)?.to_series(ctx, precision))
                    }
                    Coefficients::Laurent(cs) => {
                        Ok(TruncatedSeries::from_terms(ctx, cs[d].iter().copied(), precision))
                    }
                }
            })
            .collect()
    }

    /// Every coefficient modulo the same `t^precision`.
    pub fn coefficients_to(&self, ctx: &FqContext, precision: i128) -> Result<Vec<TruncatedSeries>, ZetaError> {
        self.coefficients(ctx, &vec![precision; self.degree() + 1])
    }

    /// A polynomial with exact Laurent-polynomial coefficients.
    pub fn from_laurent(ctx: &FqContext, coefficients: &[LaurentJson]) -> Result<Self, ZetaError> {
        let mut polys = Vec::with_capacity(coefficients.len());
        for c in coefficients {
            let mut terms = Vec::new();
            for (i, v) in c.coeffs.iter().enumerate() {
                let e = ctx.element(v).map_err(SeriesError::from)?;
                if !e.is_zero() {
                    terms.push((c.lead_val + i as i128, e));
                }
            }
            polys.push(terms);
        }
        while polys.len() > 1 && polys.last().is_some_and(|t| t.is_empty()) {
            polys.pop();
        }
        if polys.is_empty() {
            polys.push(Vec::new());
        }
        let valuations = polys
            .iter()
            .map(|t| match t.first() {
                Some(&(k, _)) => SumValuation::Exact(k),
                None => SumValuation::ExactZero,
            })
            .collect();
        Ok(ZetaPolynomial {
            exponent: None,
            valuations,
            degree_bound: None,
            coefficients: Coefficients::Laurent(polys),
            stabilization: None,
            cross_checked: false,
        })
    }

    /// Coefficient valuations with zero coefficients as `None`.
    fn point_valuations(&self) -> Result<Vec<Option<i128>>, ZetaError> {
        self.valuations
            .iter()
            .enumerate()
            .map(|(d, &v)| match v {
                SumValuation::Exact(x) => Ok(Some(x)),
                SumValuation::ExactZero => Ok(None),
                SumValuation::AtLeast(_) => Err(ZetaError::Unresolved { d, valuation: v }),
            })
            .collect()
    }

    pub fn polygon(&self) -> Result<NewtonPolygon, ZetaError> {
        Ok(NewtonPolygon::from_valuations(&self.point_valuations()?)?)
    }
}

/// Drops trailing zero coefficients, keeping at least the constant term.
fn trim(valuations: &mut Vec<SumValuation>) {
    while valuations.len() > 1 && valuations.last() == Some(&SumValuation::ExactZero) {
        valuations.pop();
    }
}

/// Smallest `k` with `p^k >= precision`.
fn digits_for_precision(p: u32, precision: i128) -> usize {
    let mut k = 0;
    let mut place: i128 = 1;
    while place < precision as i128 {
        place *= p as i128;
        k += 1;
    }
    k
}

/// `S_d(y) mod t^precision` by enumeration. For a stream exponent only the
/// first `k` digits matter when `p^k >= precision`, since a one-unit raised
/// to `p^k` is then 1 modulo `t^precision`.
pub fn padic_power_sum(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    precision: i128,
    limits: &EnumerationLimits,
) -> Result<TruncatedSeries, ZetaError> {
    let finite = match y.padic() {
        PadicPart::Finite(_) => y.clone(),
        PadicPart::Stream(stream) => {
            let k = digits_for_precision(ctx.characteristic(), precision);
            if k > stream.depth {
                return Err(ZetaError::StreamTooShallow { precision, needed: k, depth: stream.depth });
            }
            let m = stream.truncation(k, ctx.characteristic())?;
            ExponentY::new(ctx, y.residue() as i64, PadicPart::Finite(m))
        }
    };
    Ok(powersum::power_sum_enumeration(ctx, d, &finite, precision, limits)?.series)
}

/// Terms of `S_d(y)` below `t^precision` from the digit expansion, for a
/// finite or stream exponent (truncated as in [`padic_power_sum`]).
pub fn stream_power_sum(
    ctx: &FqContext,
    d: usize,
    y: &ExponentY,
    precision: i128,
    cap: usize,
) -> Result<ExactPowerSum, ZetaError> {
    let finite = match y.padic() {
        PadicPart::Finite(_) => y.clone(),
        PadicPart::Stream(stream) => {
            let k = digits_for_precision(ctx.characteristic(), precision);
            if k > stream.depth {
                return Err(ZetaError::StreamTooShallow { precision, needed: k, depth: stream.depth });
            }
            let m = stream.truncation(k, ctx.characteristic())?;
            ExponentY::new(ctx, y.residue() as i64, PadicPart::Finite(m))
        }
    };
    let limit = precision.max(0) as u128;
    Ok(powersum::power_sum_combinatorial_below(ctx, d, &finite, limit, cap)?)
}

/// Compares enumerated coefficients against claimed valuations modulo
/// `t^precision`, where `precision` exceeds every finite claimed valuation.
fn cross_check(
    ctx: &FqContext,
    y: &ExponentY,
    valuations: &[SumValuation],
    upto: usize,
    exact: Option<&[ExactPowerSum]>,
    limits: &EnumerationLimits,
) -> Result<bool, ZetaError> {
    let top = valuations.iter().filter_map(|v| v.exact()).max().unwrap_or(0);
    let precision = (top + 1).min(limits.max_precision).max(1);
    if top >= precision {
        return Ok(false);
    }
    for d in 0..=upto {
        if powersum::tuple_count(ctx.order(), d).is_none_or(|n| n > limits.max_tuples) {
            return Ok(false);
        }
    }
    for d in 0..=upto {
        let enumerated = padic_power_sum(ctx, d, y, precision, limits)?;
        let claimed = valuations.get(d).copied().unwrap_or(SumValuation::ExactZero);
        let seen = match enumerated.valuation() {
            Valuation::Exact(v) => SumValuation::Exact(v),
            Valuation::AtLeast(n) => SumValuation::AtLeast(n),
        };
        let agrees = match claimed {
            SumValuation::ExactZero => enumerated.is_zero(),
            _ => seen == claimed,
        };
        if !agrees {
            return Err(ZetaError::CrossCheck { d, detail: format!("claimed {claimed}, enumeration gives {seen}") });
        }
        if let Some(sums) = exact {
            let series = sums.get(d).map_or(TruncatedSeries::zero(precision), |s| s.to_series(ctx, precision));
            if series != enumerated {
                return Err(ZetaError::CrossCheck {
                    d,
                    detail: format!("series {} vs {}", series.display(ctx), enumerated.display(ctx)),
                });
            }
        }
    }
    Ok(true)
}

/// The zeta polynomial of a finite exponent.
///
/// Coefficients up to the degree bound come from the digit expansion, and
/// the first coefficient past the bound is certified zero. When the digit
/// expansion exceeds its cap, coefficients fall back to enumeration and
/// valuations may only be bounded.
pub fn zeta_polynomial(ctx: &FqContext, y: &ExponentY, opts: &ZetaOptions) -> Result<ZetaPolynomial, ZetaError> {
    let m = y.finite_m()?;
    let bound = digits::degree_bound(ctx.order(), m);
    let mut sums = Vec::with_capacity(bound + 1);
    let mut capped = false;
    for d in 0..=bound + 1 {
        match powersum::power_sum_combinatorial(ctx, d, y, opts.cap) {
            Ok(s) => sums.push(s),
            Err(e) if e.is_resource_limit() => {
                capped = true;
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    if capped {
        let mut valuations = (0..=bound)
            .map(|d| powersum::valuation_of_power_sum(ctx, d, y, powersum::Strategy::Enumeration(opts.limits)))
            .collect::<Result<Vec<_>, _>>()?;
        // enumeration certifies zero only when it reaches t^(dm+1); a bound
        // cut short by max_precision stays as an unresolved coefficient
        trim(&mut valuations);
        return Ok(ZetaPolynomial {
            exponent: Some(y.clone()),
            valuations,
            degree_bound: Some(bound),
            coefficients: Coefficients::Enumerated(opts.limits),
            stabilization: None,
            cross_checked: false,
        });
    }
    if !sums[bound + 1].is_zero() {
        return Err(ZetaError::BoundViolated { d: bound + 1, bound });
    }
    sums.truncate(bound + 1);
    let mut valuations: Vec<SumValuation> = sums.iter().map(|s| s.valuation()).collect();
    trim(&mut valuations);
    sums.truncate(valuations.len());
    let cross_checked = if opts.cross_check {
        cross_check(ctx, y, &valuations, bound, Some(&sums), &opts.limits)?
    } else {
        false
    };
    Ok(ZetaPolynomial {
        exponent: Some(y.clone()),
        valuations,
        degree_bound: Some(bound),
        coefficients: Coefficients::Exact(sums),
        stabilization: None,
        cross_checked,
    })
}

/// Valuations `v_d` of a stream exponent for `d <= d_max`, each read off
/// the greedy decomposition of successive truncations `m_j`.
///
/// A value counts as stable at depth `j` once `m_(j-1)` and `m_j` give the
/// same weight and the decomposition of `m_j` draws nothing from its top
/// digit into the parts `m_1, ..., m_d`. "No decomposition" is stable only
/// when every digit from `j` on is known to be zero.
pub fn stabilized_valuations(
    ctx: &FqContext,
    y: &ExponentY,
    d_max: usize,
) -> Result<Vec<StabilizedValuation>, ZetaError> {
    let stream = match y.padic() {
        PadicPart::Stream(s) => s,
        PadicPart::Finite(m) => {
            let depth = digits::base_digits(m, ctx.characteristic()).len() + 2;
            let s = PadicStream::from_finite(m, ctx.characteristic(), depth);
            let y = ExponentY::new(ctx, y.residue() as i64, PadicPart::Stream(s));
            return stabilized_valuations(ctx, &y, d_max);
        }
    };
    let p = ctx.characteristic();
    let mut out = Vec::with_capacity(d_max + 1);
    out.push(StabilizedValuation { d: 0, weight: Some(BigUint::zero()), depth: 0 });
    for d in 1..=d_max {
        let mut prev: Option<Option<BigUint>> = None;
        let mut found = None;
        for j in 1..=stream.depth {
            let ds = stream.truncation_digits(j)?;
            let parts = digits::greedy_parts_digits(&ds, p, ctx.order(), y.residue(), d);
            let weight = parts.as_ref().map(|ps| {
                ps.iter()
                    .enumerate()
                    .map(|(i, v)| digits::from_digits(v, p) * BigUint::from(i))
                    .sum::<BigUint>()
            });
            let top_unused = match &parts {
                Some(ps) => ps[1..].iter().all(|v| v[j - 1] == 0),
                None => stream.zero_from(j),
            };
            if prev.as_ref() == Some(&weight) && top_unused {
                found = Some(StabilizedValuation { d, weight, depth: j });
                break;
            }
            prev = Some(weight);
        }
        match found {
            Some(v) => out.push(v),
            None => {
                return Err(ZetaError::NotStabilized { d, depth: stream.depth, last: prev.flatten() });
            }
        }
    }
    Ok(out)
}

/// The zeta polynomial of a stream exponent, truncated at `x^d_max`.
///
/// Valuations come from [`stabilized_valuations`]. Coefficients are the
/// low-degree terms of the digit expansion for a truncation of the stream
/// deep enough for the requested precision; their lowest terms must land
/// exactly on the stabilized valuations.
pub fn stream_zeta_polynomial(
    ctx: &FqContext,
    y: &ExponentY,
    d_max: usize,
    opts: &ZetaOptions,
) -> Result<ZetaPolynomial, ZetaError> {
    let stab = stabilized_valuations(ctx, y, d_max)?;
    let mut valuations = stab
        .iter()
        .map(|s| SumValuation::from_weight(s.weight.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    trim(&mut valuations);
    for (d, &v) in valuations.iter().enumerate() {
        let Some(w) = v.exact() else { continue };
        let low = stream_power_sum(ctx, d, y, w + 1, opts.stream_cap)?.valuation();
        if low != v {
            return Err(ZetaError::CrossCheck {
                d,
                detail: format!("stabilized weight {v}, digit expansion gives {low}"),
            });
        }
    }
    let cross_checked = if opts.cross_check {
        cross_check(ctx, y, &valuations, valuations.len() - 1, None, &opts.limits)?
    } else {
        false
    };
    Ok(ZetaPolynomial {
        exponent: Some(y.clone()),
        valuations,
        degree_bound: None,
        coefficients: Coefficients::Digits(opts.stream_cap),
        stabilization: Some(stab),
        cross_checked,
    })
}

/// One lifted zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootReport {
    pub valuation: i128,
    /// The root modulo `t^precision`.
    pub series: TruncatedSeries,
    /// Valuation of the polynomial evaluated at the truncated root.
    pub residual: Valuation,
    /// What the residual must reach: precision plus `val P'(root)`.
    pub bound: i128,
    pub iterations: usize,
}

impl RootReport {
    pub fn certified(&self) -> bool {
        self.residual.meets(self.bound)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroReport {
    /// Sorted by valuation, ascending.
    pub roots: Vec<RootReport>,
    pub simple: bool,
    pub precision: i128,
}

/// Ceiling for [`default_precision`].
pub const MAX_DEFAULT_PRECISION: i128 = 1024;

/// Default number of t-digits to lift each root to: `4 * (largest slope) + 16`,
/// capped at [`MAX_DEFAULT_PRECISION`].
pub fn default_precision(np: &NewtonPolygon) -> i128 {
    let top = np
        .segments()
        .iter()
        .map(|s| s.slope.ceil().to_integer())
        .max()
        .unwrap_or(0)
        .max(0);
    top.saturating_mul(4).saturating_add(16).min(MAX_DEFAULT_PRECISION)
}

/// Data for lifting the root on one width-1 side.
#[derive(Clone, Copy, Debug)]
struct Side {
    /// Higher endpoint of the side.
    d: usize,
    lambda: i128,
    /// `val P(x) - val Q(u)`: the side's value at degree 0.
    c0: i128,
    /// `val Q'(u)` at the root.
    k: i128,
}

impl Side {
    /// Working precision for `u`: enough that the Newton correction is
    /// determined past `target` digits.
    fn work(&self, target: i128) -> i128 {
        target + 2 * self.k + 8
    }
}

fn exactify(ctx: &FqContext, s: &TruncatedSeries, precision: i128) -> TruncatedSeries {
    TruncatedSeries::from_terms(ctx, s.terms(), precision)
}

/// Newton iteration on the scaled polynomial for one side; the returned
/// root is known to `target` digits past its leading term.
fn lift_side(ctx: &FqContext, coeffs: &[TruncatedSeries], side: Side, target: i128) -> Result<RootReport, ZetaError> {
    let Side { d, lambda, c0, k } = side;
    let work = side.work(target);
    let fail = |detail: String| ZetaError::HenselConditionFailed { valuation: -lambda, detail };
    let q: Vec<TruncatedSeries> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c.shift(-(i as i128) * lambda - c0).truncate(work))
        .collect();
    if let Some(i) = q.iter().position(|c| c.lead_val() < 0 || c.precision() < work) {
        return Err(fail(format!("scaled coefficient {i} is not integral to t^{work}")));
    }
    let dq = series::derivative(ctx, &q);
    let mut u = q[d - 1].div(ctx, &q[d])?.neg(ctx);
    u = exactify(ctx, &u.truncate(work), work);
    let mut previous: Option<i128> = None;
    for step in 0..64 {
        let qu = series::horner(ctx, &q, &u);
        let dqu = series::horner(ctx, &dq, &u);
        match dqu.valuation() {
            Valuation::Exact(v) if v == k => {}
            other => return Err(fail(format!("val Q'(u) is {other} at step {step}, expected {k}"))),
        }
        let vq = match qu.valuation() {
            Valuation::Exact(v) => v,
            Valuation::AtLeast(n) => n,
        };
        if step == 0 && vq <= 2 * k {
            return Err(fail(format!("val Q(u0) = {vq} does not exceed 2 val Q'(u0) = {}", 2 * k)));
        }
        if let Some(prev) = previous {
            let expected = (2 * prev - 2 * k).min(work - k);
            if vq < expected {
                return Err(fail(format!("step {step}: val Q(u) = {vq}, quadratic convergence needs {expected}")));
            }
        }
        if vq >= target + k {
            return Ok(RootReport {
                valuation: -lambda,
                series: u.truncate(target).shift(-lambda),
                residual: Valuation::AtLeast(0),
                bound: target - lambda + (c0 + lambda + k),
                iterations: step,
            });
        }
        previous = Some(vq);
        let delta = qu.div(ctx, &dqu)?;
        u = exactify(ctx, &u.sub(ctx, &delta), work);
    }
    Err(fail("no convergence in 64 steps".into()))
}

/// Lifts every zero of `zp` to `target` t-digits past its leading term
/// (absolute precision `target + valuation`).
///
/// Requires every polygon side to have width 1; each side then carries one
/// root, whose lift is checked for quadratic convergence and finally
/// substituted back into the unscaled polynomial.
pub fn find_roots(ctx: &FqContext, zp: &ZetaPolynomial, target: Option<i128>) -> Result<ZeroReport, ZetaError> {
    let vals = zp.point_valuations()?;
    if vals[0].is_none() {
        return Err(ZetaError::ZeroConstantTerm);
    }
    let np = NewtonPolygon::from_valuations(&vals)?;
    if let Some(s) = np.segments().iter().find(|s| s.width != 1) {
        return Err(ZetaError::WidthNotOne { start: s.start, width: s.width });
    }
    let target = target.unwrap_or_else(|| default_precision(&np)).max(1);
    let degree = zp.degree();
    let top = vals[degree].expect("trimmed polynomial has a nonzero top coefficient");
    let lambdas: Vec<i128> = np.segments().iter().map(|s| s.slope.to_integer()).collect();
    let sides: Vec<Side> = np
        .segments()
        .iter()
        .zip(&lambdas)
        .map(|(s, &lambda)| {
            let start_val = vals[s.start].expect("hull vertices are nonzero coefficients");
            let c0 = start_val - s.start as i128 * lambda;
            // P'(a) = c_D prod_{b != a} (a - b), and distinct valuations make
            // val(a - b) = min(val a, val b)
            let others: i128 = lambdas
                .iter()
                .filter(|&&l| l != lambda)
                .map(|&l| (-lambda).min(-l))
                .sum();
            let k = top + others - c0 - lambda;
            Side { d: s.start + 1, lambda, c0, k }
        })
        .collect();
    // the scaled lift for a side needs c_i to t^(work + i lambda + c0), and
    // the hull keeps i lambda + c0 at or below v_i
    let extra = sides.iter().map(|s| s.work(target)).max().unwrap_or(1);
    let precisions: Vec<i128> = vals.iter().map(|v| v.map_or(i128::MAX / 4, |v| v + extra)).collect();
    let coeffs = zp.coefficients(ctx, &precisions)?;
    let mut roots = sides
        .par_iter()
        .map(|&side| {
            let mut root = lift_side(ctx, &coeffs, side, target)?;
            root.residual = substitute(ctx, &coeffs, &root.series, side.work(target));
            Ok(root)
        })
        .collect::<Result<Vec<_>, ZetaError>>()?;
    roots.sort_by_key(|r| r.valuation);
    Ok(ZeroReport { roots, simple: true, precision: target })
}

/// Valuation of `P(x)` for the truncated root `x`, read as an exact
/// Laurent polynomial to `work` digits past its leading term.
fn substitute(ctx: &FqContext, coeffs: &[TruncatedSeries], x: &TruncatedSeries, work: i128) -> Valuation {
    let x = exactify(ctx, x, x.lead_val() + work);
    series::horner(ctx, coeffs, &x).valuation()
}

/// Outcome of the full pipeline for one exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub degree: usize,
    pub valuations: Vec<SumValuation>,
    pub polygon: Option<NewtonPolygon>,
    pub roots: Vec<RootReport>,
    pub simple: bool,
    pub verdict: bool,
    pub failure: Option<(Stage, String)>,
    pub precision: i128,
    pub stabilization_depth: Option<usize>,
    pub cross_checked: bool,
}

/// Builds the zeta polynomial (stabilized when the exponent is a stream),
/// its polygon, lifts all roots and checks each by substitution.
///
/// Mathematical failures come back as a false verdict naming the stage;
/// resource limits and bad input are errors.
pub fn verify_rh(
    ctx: &FqContext,
    y: &ExponentY,
    d_max: usize,
    precision: Option<i128>,
    opts: &ZetaOptions,
) -> Result<Verdict, ZetaError> {
    let failed = |stage: Stage, detail: String, zp: Option<&ZetaPolynomial>, polygon: Option<NewtonPolygon>| Verdict {
        degree: zp.map_or(0, |z| z.degree()),
        valuations: zp.map_or_else(Vec::new, |z| z.valuations().to_vec()),
        simple: polygon.as_ref().is_some_and(|np| np.segments().iter().all(|s| s.width == 1)),
        polygon,
        roots: Vec::new(),
        verdict: false,
        failure: Some((stage, detail)),
        precision: precision.unwrap_or(0),
        stabilization_depth: zp.and_then(|z| z.stabilization_depth()),
        cross_checked: zp.is_some_and(|z| z.cross_checked()),
    };
    let built = match y.padic() {
        PadicPart::Finite(_) => zeta_polynomial(ctx, y, opts),
        PadicPart::Stream(_) => stream_zeta_polynomial(ctx, y, d_max, opts),
    };
    let zp = match built {
        Ok(zp) => zp,
        Err(e) => match e.stage() {
            Some(stage) => return Ok(failed(stage, e.to_string(), None, None)),
            None => return Err(e),
        },
    };
    let np = zp.polygon()?;
    let report = match find_roots(ctx, &zp, precision) {
        Ok(r) => r,
        Err(e) => match e.stage() {
            Some(stage) => return Ok(failed(stage, e.to_string(), Some(&zp), Some(np))),
            None => return Err(e),
        },
    };
    let mut failure = None;
    if report.roots.len() != zp.degree() {
        failure = Some((Stage::Roots, format!("{} roots for degree {}", report.roots.len(), zp.degree())));
    }
    let expected: Vec<i128> = {
        let mut v: Vec<i128> = np.segments().iter().map(|s| -s.slope.to_integer()).collect();
        v.sort_unstable();
        v
    };
    let got: Vec<i128> = report.roots.iter().map(|r| r.valuation).collect();
    if failure.is_none() && (got != expected || got.windows(2).any(|w| w[0] == w[1])) {
        failure = Some((Stage::Roots, format!("root valuations {got:?}, polygon predicts {expected:?}")));
    }
    if failure.is_none() {
        if let Some(r) = report.roots.iter().find(|r| !r.certified() || r.series.lead_val() != r.valuation) {
            failure = Some((
                Stage::Residual,
                format!("root of valuation {}: residual {} below bound {}", r.valuation, r.residual, r.bound),
            ));
        }
    }
    Ok(Verdict {
        degree: zp.degree(),
        valuations: zp.valuations().to_vec(),
        simple: report.simple,
        polygon: Some(np),
        roots: report.roots,
        verdict: failure.is_none(),
        failure,
        precision: report.precision,
        stabilization_depth: zp.stabilization_depth(),
        cross_checked: zp.cross_checked(),
    })
}

/// JSON form of one root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RootJson {
    pub valuation: i128,
    pub series: SeriesJson,
    pub residual: Valuation,
    pub bound: i128,
}

impl RootReport {
    pub fn to_json(&self, ctx: &FqContext) -> RootJson {
        RootJson {
            valuation: self.valuation,
            series: self.series.to_json(ctx),
            residual: self.residual,
            bound: self.bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn ctx(q: u32) -> FqContext {
        FqContext::with_order(q).unwrap()
    }

    fn finite(ctx: &FqContext, z: i64, m: u64) -> ExponentY {
        ExponentY::finite(ctx, z, m)
    }

    fn stream(ctx: &FqContext, z: i64, spec: &str, depth: usize) -> ExponentY {
        let s = PadicStream::parse(spec, ctx.characteristic(), depth).unwrap();
        ExponentY::new(ctx, z, PadicPart::Stream(s))
    }

    fn exact_vals(zp: &ZetaPolynomial) -> Vec<Option<i128>> {
        zp.valuations().iter().map(|v| v.exact()).collect()
    }

    #[test]
    fn small_zeta_polynomials() {
        let f3 = ctx(3);
        let zp = zeta_polynomial(&f3, &finite(&f3, 1, 8), &ZetaOptions::default()).unwrap();
        assert_eq!(zp.degree(), 2);
        assert_eq!(exact_vals(&zp), vec![Some(0), Some(1), Some(6)]);
        assert!(zp.cross_checked());

        let f4 = ctx(4);
        let zp = zeta_polynomial(&f4, &finite(&f4, 2, 5), &ZetaOptions::default()).unwrap();
        assert_eq!(zp.degree(), 1);
        let cs = zp.coefficients_to(&f4, 8).unwrap();
        assert_eq!(cs[1], TruncatedSeries::monomial(f4.from_int(-1), 5, 8));
    }

    #[test]
    fn exponent_zero_has_one_linear_factor() {
        // S_1 = sum over nonzero f_0 of f_0^0 = q - 1 = -1, so zeta = 1 - x
        let f3 = ctx(3);
        let zp = zeta_polynomial(&f3, &finite(&f3, 0, 0), &ZetaOptions::default()).unwrap();
        assert_eq!(zp.degree(), 1);
        assert_eq!(exact_vals(&zp), vec![Some(0), Some(0)]);
        let report = find_roots(&f3, &zp, Some(8)).unwrap();
        assert_eq!(report.roots.len(), 1);
        assert_eq!(report.roots[0].series, TruncatedSeries::one(8));
    }

    #[test]
    fn linear_root_is_exact() {
        let f3 = ctx(3);
        let poly = [
            LaurentJson { lead_val: 0, coeffs: vec![vec![1]] },
            LaurentJson { lead_val: 1, coeffs: vec![vec![1]] },
        ];
        let zp = ZetaPolynomial::from_laurent(&f3, &poly).unwrap();
        let report = find_roots(&f3, &zp, Some(8)).unwrap();
        let root = &report.roots[0];
        assert_eq!(root.valuation, -1);
        assert_eq!(root.series, TruncatedSeries::monomial(f3.from_int(2), -1, 7));
        assert!(root.residual.exact().is_none());
        assert!(root.certified());
    }

    #[test]
    fn constant_polynomial_has_no_roots() {
        let f3 = ctx(3);
        let zp = ZetaPolynomial::from_laurent(&f3, &[LaurentJson { lead_val: 0, coeffs: vec![vec![1]] }]).unwrap();
        let report = find_roots(&f3, &zp, None).unwrap();
        assert!(report.roots.is_empty());
        assert!(report.simple);
    }

    #[test]
    fn wide_side_is_rejected() {
        let f3 = ctx(3);
        let poly = [
            LaurentJson { lead_val: 0, coeffs: vec![vec![1]] },
            LaurentJson { lead_val: 2, coeffs: vec![vec![1]] },
            LaurentJson { lead_val: 2, coeffs: vec![vec![1]] },
        ];
        let zp = ZetaPolynomial::from_laurent(&f3, &poly).unwrap();
        assert_eq!(find_roots(&f3, &zp, Some(8)), Err(ZetaError::WidthNotOne { start: 0, width: 2 }));
    }

    #[test]
    fn roots_of_a_quadratic() {
        let f3 = ctx(3);
        let zp = zeta_polynomial(&f3, &finite(&f3, 1, 8), &ZetaOptions::default()).unwrap();
        let report = find_roots(&f3, &zp, Some(40)).unwrap();
        let vals: Vec<i128> = report.roots.iter().map(|r| r.valuation).collect();
        assert_eq!(vals, vec![-5, -1]);
        for r in &report.roots {
            assert!(r.certified(), "{r:?}");
            assert_eq!(r.series.precision(), r.valuation + 40);
        }
    }

    #[test]
    fn verdicts_on_examples() {
        for (q, z, m, roots) in [(3, 1, 8, 2), (2, 0, 11, 4), (4, 2, 5, 1), (3, 0, 0, 1)] {
            let f = ctx(q);
            let v = verify_rh(&f, &finite(&f, z, m), 4, Some(64), &ZetaOptions::default()).unwrap();
            assert!(v.verdict, "q={q} z={z} m={m}: {:?}", v.failure);
            assert_eq!(v.roots.len(), roots, "q={q} z={z} m={m}");
        }
        let f4 = ctx(4);
        let v = verify_rh(&f4, &finite(&f4, 2, 5), 4, Some(64), &ZetaOptions::default()).unwrap();
        assert_eq!(v.roots[0].valuation, -5);
    }

    #[test]
    fn stabilization_of_minus_one() {
        let f3 = ctx(3);
        let y = stream(&f3, 1, "repeat:2", 32);
        let stab = stabilized_valuations(&f3, &y, 1).unwrap();
        assert_eq!(stab[1].weight, Some(BigUint::from(1u32)));

        let f2 = ctx(2);
        let y = stream(&f2, 0, "repeat:1", 32);
        let stab = stabilized_valuations(&f2, &y, 4).unwrap();
        assert!(stab.iter().all(|s| s.weight.is_some() && s.depth <= 32));
    }

    #[test]
    fn finite_and_stream_agree() {
        for (q, z, m) in [(3, 1, 8u64), (2, 0, 11), (5, 3, 7), (4, 2, 5)] {
            let f = ctx(q);
            let p = f.characteristic();
            let fin = zeta_polynomial(&f, &finite(&f, z, m), &ZetaOptions::default()).unwrap();
            let s = PadicStream::from_finite(&BigUint::from(m), p, 16);
            let y = ExponentY::new(&f, z, PadicPart::Stream(s));
            let st = stream_zeta_polynomial(&f, &y, fin.degree() + 1, &ZetaOptions::default()).unwrap();
            assert_eq!(fin.valuations(), st.valuations(), "q={q} z={z} m={m}");
            assert_eq!(fin.polygon().unwrap(), st.polygon().unwrap());
            let a = find_roots(&f, &fin, Some(64)).unwrap();
            let b = find_roots(&f, &st, Some(64)).unwrap();
            assert_eq!(a.roots, b.roots);
        }
    }

    #[test]
    fn unknown_tail_does_not_stabilize_to_zero() {
        // digits 1 then nothing known: v_2 for q = 3, z = 1 needs more units
        let f3 = ctx(3);
        let y = stream(&f3, 1, "1", 1);
        let err = stabilized_valuations(&f3, &y, 2).unwrap_err();
        assert!(matches!(err, ZetaError::NotStabilized { d: 1, .. }), "{err:?}");
        let v = verify_rh(&f3, &y, 2, Some(16), &ZetaOptions::default()).unwrap();
        assert!(!v.verdict);
        assert_eq!(v.failure.unwrap().0, Stage::Stabilization);
    }

    #[test]
    fn stream_verdicts() {
        for q in [2u32, 3, 5] {
            let f = ctx(q);
            let p = f.characteristic();
            for spec in [format!("repeat:{}", p - 1), "repeat:1,0".to_string(), format!("repeat:0,{}", p - 1)] {
                for z in 0..(q as i64 - 1).max(1) {
                    let y = stream(&f, z, &spec, 32);
                    let v = verify_rh(&f, &y, 4, Some(64), &ZetaOptions::default()).unwrap();
                    assert!(v.verdict, "q={q} z={z} {spec}: {:?}", v.failure);
                    assert!(v.stabilization_depth.unwrap() <= 32);
                }
            }
        }
    }

    #[test]
    fn doubling_precision_extends_roots() {
        let f5 = ctx(5);
        let zp = zeta_polynomial(&f5, &finite(&f5, 3, 57), &ZetaOptions::default()).unwrap();
        let a = find_roots(&f5, &zp, Some(32)).unwrap();
        let b = find_roots(&f5, &zp, Some(64)).unwrap();
        for (ra, rb) in a.roots.iter().zip(&b.roots) {
            assert_eq!(rb.series.truncate(ra.series.precision()), ra.series);
        }
    }

    #[test]
    fn default_precision_tracks_largest_slope() {
        let np = NewtonPolygon::from_valuations(&[Some(0), Some(1), Some(6)]).unwrap();
        assert_eq!(default_precision(&np), 36);
        assert_eq!(np.segments()[1].slope, Ratio::from_integer(5));
    }
}
