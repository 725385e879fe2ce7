//! Truncated Laurent series over F_q in the variable `t`.
//!
//! A [`TruncatedSeries`] is known modulo `t^N`; every operation propagates
//! `N` pessimistically, so a coefficient is never reported unless it is
//! determined by the inputs.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, FqContext, FqElement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("cannot invert a series that is zero modulo t^{0}")]
    InvertZero(i128),
    #[error("exponentiation by a large integer needs a one-unit (constant term 1, valuation 0)")]
    NotOneUnit,
    #[error("malformed series: {0}")]
    Malformed(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// t-adic valuation of a truncated series: exact, or only a lower bound when
/// the series vanishes modulo its precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Valuation {
    Exact(i128),
    AtLeast(i128),
}

impl Valuation {
    pub fn exact(self) -> Option<i128> {
        match self {
            Valuation::Exact(v) => Some(v),
            Valuation::AtLeast(_) => None,
        }
    }

    /// True if the valuation is certainly at least `bound`.
    pub fn meets(self, bound: i128) -> bool {
        match self {
            Valuation::Exact(v) | Valuation::AtLeast(v) => v >= bound,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(v) => write!(f, "{v}"),
            Valuation::AtLeast(n) => write!(f, ">={n}"),
        }
    }
}

/// An element of F_q((t)) known modulo `t^precision`.
///
/// Coefficients are stored densely from `lead_val` up to `precision - 1`.
/// A nonzero series is normalized so that its first stored coefficient is
/// nonzero; the zero series stores nothing and has `lead_val == precision`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    lead_val: i128,
    coeffs: Vec<FqElement>,
    precision: i128,
}

impl TruncatedSeries {
    pub fn zero(precision: i128) -> Self {
        TruncatedSeries { lead_val: precision, coeffs: Vec::new(), precision }
    }

    pub fn one(precision: i128) -> Self {
        Self::monomial(FqElement::ONE, 0, precision)
    }

    /// `c * t^k` modulo `t^precision`.
    pub fn monomial(c: FqElement, k: i128, precision: i128) -> Self {
        Self::from_coeffs(k, vec![c], precision)
    }

    /// Series with `coeffs[i]` the coefficient of `t^(start + i)`. Entries at or
    /// beyond `precision` are dropped.
    pub fn from_coeffs(start: i128, coeffs: Vec<FqElement>, precision: i128) -> Self {
        let first = coeffs.iter().position(|c| !c.is_zero());
        let Some(first) = first else {
            return Self::zero(precision);
        };
        let lead_val = start + first as i128;
        if lead_val >= precision {
            return Self::zero(precision);
        }
        let len = (precision - lead_val) as usize;
        let mut dense: Vec<FqElement> = coeffs.into_iter().skip(first).take(len).collect();
        dense.resize(len, FqElement::ZERO);
        TruncatedSeries { lead_val, coeffs: dense, precision }
    }

    /// Builds a series from `(exponent, coefficient)` terms; repeated exponents add up.
    pub fn from_terms<I>(ctx: &FqContext, terms: I, precision: i128) -> Self
    where
        I: IntoIterator<Item = (i128, FqElement)>,
    {
        let terms: Vec<(i128, FqElement)> =
            terms.into_iter().filter(|&(k, _)| k < precision).collect();
        let Some(start) = terms.iter().map(|&(k, _)| k).min() else {
            return Self::zero(precision);
        };
        let mut dense = vec![FqElement::ZERO; (precision - start) as usize];
        for (k, c) in terms {
            let slot = &mut dense[(k - start) as usize];
            *slot = ctx.add(*slot, c);
        }
        Self::from_coeffs(start, dense, precision)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Exponent of the first nonzero coefficient, or the precision for zero.
    pub fn lead_val(&self) -> i128 {
        self.lead_val
    }

    pub fn precision(&self) -> i128 {
        self.precision
    }

    pub fn valuation(&self) -> Valuation {
        if self.is_zero() {
            Valuation::AtLeast(self.precision)
        } else {
            Valuation::Exact(self.lead_val)
        }
    }

    /// Coefficient of `t^k`, or `None` if `k` is not below the precision.
    pub fn coefficient(&self, k: i128) -> Option<FqElement> {
        if k >= self.precision {
            return None;
        }
        if k < self.lead_val {
            return Some(FqElement::ZERO);
        }
        Some(self.coeffs[(k - self.lead_val) as usize])
    }

    pub fn leading_coefficient(&self) -> Option<FqElement> {
        self.coeffs.first().copied()
    }

    /// Nonzero terms as `(exponent, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (i128, FqElement)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, &c)| (self.lead_val + i as i128, c))
    }

    /// Forgets everything at or beyond `t^precision` (no-op if already coarser).
    pub fn truncate(&self, precision: i128) -> Self {
        if precision >= self.precision {
            return self.clone();
        }
        Self::from_coeffs(self.lead_val, self.coeffs.clone(), precision)
    }

    /// Multiplication by `t^k`.
    pub fn shift(&self, k: i128) -> Self {
        TruncatedSeries {
            lead_val: self.lead_val + k,
            coeffs: self.coeffs.clone(),
            precision: self.precision + k,
        }
    }

    pub fn neg(&self, ctx: &FqContext) -> Self {
        TruncatedSeries {
            lead_val: self.lead_val,
            coeffs: self.coeffs.iter().map(|&c| ctx.neg(c)).collect(),
            precision: self.precision,
        }
    }

    pub fn scale(&self, ctx: &FqContext, c: FqElement) -> Self {
        if c.is_zero() {
            return Self::zero(self.precision);
        }
        TruncatedSeries {
            lead_val: self.lead_val,
            coeffs: self.coeffs.iter().map(|&a| ctx.mul(a, c)).collect(),
            precision: self.precision,
        }
    }

    pub fn add(&self, ctx: &FqContext, other: &Self) -> Self {
        self.combine(other, |a, b| ctx.add(a, b))
    }

    pub fn sub(&self, ctx: &FqContext, other: &Self) -> Self {
        self.combine(other, |a, b| ctx.sub(a, b))
    }

    fn combine(&self, other: &Self, op: impl Fn(FqElement, FqElement) -> FqElement) -> Self {
        let precision = self.precision.min(other.precision);
        let start = self.lead_val.min(other.lead_val).min(precision);
        let len = (precision - start) as usize;
        let mut dense = Vec::with_capacity(len);
        for k in start..precision {
            let a = self.coefficient(k).unwrap_or(FqElement::ZERO);
            let b = other.coefficient(k).unwrap_or(FqElement::ZERO);
            dense.push(op(a, b));
        }
        Self::from_coeffs(start, dense, precision)
    }

    pub fn mul(&self, ctx: &FqContext, other: &Self) -> Self {
        let precision = (self.precision + other.lead_val).min(other.precision + self.lead_val);
        let lead = self.lead_val + other.lead_val;
        if self.is_zero() || other.is_zero() || lead >= precision {
            return Self::zero(precision);
        }
        let len = (precision - lead) as usize;
        let mut dense = vec![FqElement::ZERO; len];
        for (i, &a) in self.coeffs.iter().enumerate().take(len) {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate().take(len - i) {
                if !b.is_zero() {
                    dense[i + j] = ctx.add(dense[i + j], ctx.mul(a, b));
                }
            }
        }
        Self::from_coeffs(lead, dense, precision)
    }

    /// Multiplicative inverse. For `a = t^v u` known modulo `t^N` the result
    /// is known modulo `t^(N - 2v)`, i.e. relative precision is preserved.
    pub fn inv(&self, ctx: &FqContext) -> Result<Self, SeriesError> {
        if self.is_zero() {
            return Err(SeriesError::InvertZero(self.precision));
        }
        let rel = self.coeffs.len();
        let u0_inv = ctx.inv(self.coeffs[0])?;
        let mut w = Vec::with_capacity(rel);
        w.push(u0_inv);
        for k in 1..rel {
            let mut acc = FqElement::ZERO;
            for i in 1..=k {
                let ui = self.coeffs[i];
                if !ui.is_zero() {
                    acc = ctx.add(acc, ctx.mul(ui, w[k - i]));
                }
            }
            w.push(ctx.neg(ctx.mul(u0_inv, acc)));
        }
        let lead = -self.lead_val;
        Ok(Self::from_coeffs(lead, w, lead + rel as i128))
    }

    pub fn div(&self, ctx: &FqContext, other: &Self) -> Result<Self, SeriesError> {
        Ok(self.mul(ctx, &other.inv(ctx)?))
    }

    pub fn is_one_unit(&self) -> bool {
        self.lead_val == 0 && self.coeffs.first() == Some(&FqElement::ONE)
    }

    /// `self^e` for a one-unit and an exponent of any size.
    ///
    /// For a one-unit `a` known mod `t^N`, `a^(p^k) = 1 mod t^N` once
    /// `p^k >= N`, so the exponent is first reduced modulo that `p^k`.
    pub fn pow_one_unit(&self, ctx: &FqContext, e: &BigUint) -> Result<Self, SeriesError> {
        if !self.is_one_unit() {
            return Err(SeriesError::NotOneUnit);
        }
        let p = BigUint::from(ctx.characteristic());
        let mut period = BigUint::from(1u32);
        let limit = BigUint::from(self.precision.max(1) as u64);
        while period < limit {
            period *= &p;
        }
        let mut rest = e % &period;
        // a^m = prod_k (a^(p^k))^(c_k) over the base-p digits c_k of m; each
        // a^(p^k) is sparse, so put it on the left of `mul`
        let mut acc = Self::one(self.precision);
        let mut frob = self.clone();
        while !rest.is_zero() {
            let c = (&rest % &p).to_u32().expect("digit below p");
            rest /= &p;
            for _ in 0..c {
                acc = frob.mul(ctx, &acc);
            }
            if !rest.is_zero() {
                frob = frob.frobenius(ctx);
            }
        }
        Ok(acc)
    }

    /// `self^p` for a series with `lead_val >= 0`, at the same precision.
    fn frobenius(&self, ctx: &FqContext) -> Self {
        let p = ctx.characteristic() as i128;
        let terms: Vec<(i128, FqElement)> = self
            .terms()
            .map(|(k, c)| (k * p, ctx.pow_u64(c, p as u64)))
            .collect();
        Self::from_terms(ctx, terms, self.precision)
    }

    /// `self^e` for a machine-size exponent and any nonzero base.
    /// `e = 0` gives 1 at the base's relative precision.
    pub fn pow(&self, ctx: &FqContext, e: u64) -> Self {
        let mut acc: Option<Self> = None;
        let mut base = self.clone();
        let mut e_left = e;
        while e_left > 0 {
            if e_left & 1 == 1 {
                acc = Some(match acc {
                    Some(a) => a.mul(ctx, &base),
                    None => base.clone(),
                });
            }
            e_left >>= 1;
            if e_left > 0 {
                base = base.mul(ctx, &base);
            }
        }
        acc.unwrap_or_else(|| Self::one(self.precision - self.lead_val))
    }

    pub fn to_json(&self, ctx: &FqContext) -> SeriesJson {
        SeriesJson {
            lead_val: self.lead_val,
            precision: self.precision,
            coeffs: self.coeffs.iter().map(|&c| ctx.coeffs(c)).collect(),
        }
    }

    pub fn from_json(ctx: &FqContext, json: &SeriesJson) -> Result<Self, SeriesError> {
        if json.lead_val > json.precision {
            return Err(SeriesError::Malformed("lead_val beyond precision".into()));
        }
        let coeffs = json
            .coeffs
            .iter()
            .map(|c| ctx.element(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_coeffs(json.lead_val, coeffs, json.precision))
    }

    /// Human-readable rendering, e.g. `2*t^-1 + [1,1]*t^3 + O(t^8)`.
    pub fn display(&self, ctx: &FqContext) -> String {
        let mut parts: Vec<String> = self
            .terms()
            .map(|(k, c)| {
                let c = if ctx.degree() == 1 {
                    c.index().to_string()
                } else {
                    format!("{:?}", ctx.coeffs(c))
                };
                match k {
                    0 => c,
                    1 => format!("{c}*t"),
                    _ => format!("{c}*t^{k}"),
                }
            })
            .collect();
        parts.push(format!("O(t^{})", self.precision));
        parts.join(" + ")
    }
}

/// Evaluates `sum coeffs[d] x^d` by Horner's rule.
pub fn horner(ctx: &FqContext, coeffs: &[TruncatedSeries], x: &TruncatedSeries) -> TruncatedSeries {
    let mut iter = coeffs.iter().rev();
    let Some(top) = iter.next() else {
        return TruncatedSeries::zero(i128::MAX / 4);
    };
    iter.fold(top.clone(), |acc, c| acc.mul(ctx, x).add(ctx, c))
}

/// Coefficients of the formal derivative in `x`.
pub fn derivative(ctx: &FqContext, coeffs: &[TruncatedSeries]) -> Vec<TruncatedSeries> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(d, c)| c.scale(ctx, ctx.from_int(d as i64)))
        .collect()
}

/// JSON form of a series: `{lead_val, precision, coeffs}` where each
/// coefficient is its coordinate vector in the field's power basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub lead_val: i128,
    pub precision: i128,
    pub coeffs: Vec<Vec<u32>>,
}

/// Converts a non-negative big integer to `i128`, if it fits.
pub fn big_to_i128(v: &BigUint) -> Option<i128> {
    if v.is_zero() {
        return Some(0);
    }
    v.to_i128()
}
