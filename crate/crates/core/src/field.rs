//! Arithmetic in the finite field F_q, q = p^n.
//!
//! Elements are stored in the power basis of a root of the defining modulus.
//! The coordinate vector (c_0, ..., c_{n-1}) is packed into a single integer
//! `c_0 + c_1 p + ... + c_{n-1} p^{n-1}`, so the natural integer order of the
//! packed value is the canonical enumeration order of the field
//! (lexicographic on coordinates, least significant first).

use std::fmt;

use thiserror::Error;

/// Largest supported field order.
pub const MAX_FIELD_ORDER: u32 = 1 << 16;

/// Fields up to this order get full addition and multiplication tables.
const TABLE_LIMIT: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("extension degree must be at least 1")]
    ZeroDegree,
    #[error("modulus has degree {got}, expected {expected}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("modulus is not monic")]
    NotMonic,
    #[error("modulus coefficient {0} is not reduced modulo p")]
    CoefficientOutOfRange(u32),
    #[error("modulus is reducible over F_p")]
    ReducibleModulus,
    #[error("field order p^n exceeds {MAX_FIELD_ORDER}")]
    FieldTooLarge,
    #[error("division by zero")]
    DivisionByZero,
    #[error("coordinate vector {0:?} is not a valid element")]
    InvalidCoordinates(Vec<u32>),
}

/// An element of F_q in packed power-basis coordinates.
///
/// Elements only make sense together with the [`FqContext`] that produced
/// them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FqElement(u32);

impl FqElement {
    pub const ZERO: FqElement = FqElement(0);
    pub const ONE: FqElement = FqElement(1);

    /// Position of the element in the canonical enumeration order.
    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone)]
struct Tables {
    add: Vec<u32>,
    mul: Vec<u32>,
}

/// The field F_q together with its defining modulus over F_p.
#[derive(Clone)]
pub struct FqContext {
    p: u32,
    n: usize,
    q: u32,
    modulus: Vec<u32>,
    neg: Vec<u32>,
    inv: Vec<u32>,
    tables: Option<Tables>,
}

impl fmt::Debug for FqContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FqContext")
            .field("p", &self.p)
            .field("n", &self.n)
            .field("q", &self.q)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FqContext {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.n == other.n && self.modulus == other.modulus
    }
}

impl Eq for FqContext {}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut k = 2u32;
    while (k as u64) * (k as u64) <= p as u64 {
        if p % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

/// Splits `q` into `(p, n)` with `q = p^n`, or `None` if `q` is not a prime power.
pub fn prime_power_decompose(q: u32) -> Option<(u32, usize)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|k| q % k == 0)?;
    let mut rest = q;
    let mut n = 0;
    while rest % p == 0 {
        rest /= p;
        n += 1;
    }
    (rest == 1).then_some((p, n))
}

impl FqContext {
    /// Builds F_{p^n}. Without an explicit modulus the lexicographically least
    /// monic irreducible of degree `n` is used, where candidates are ordered by
    /// their packed lower coefficients (constant term least significant).
    ///
    /// `modulus` is given constant term first and must include the leading 1.
    pub fn new(p: u32, n: usize, modulus: Option<&[u32]>) -> Result<Self, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if n == 0 {
            return Err(FieldError::ZeroDegree);
        }
        let q = checked_pow(p, n).ok_or(FieldError::FieldTooLarge)?;
        if q > MAX_FIELD_ORDER {
            return Err(FieldError::FieldTooLarge);
        }
        let modulus = match modulus {
            Some(m) => {
                if m.len() != n + 1 {
                    return Err(FieldError::DegreeMismatch {
                        expected: n,
                        got: m.len().saturating_sub(1),
                    });
                }
                if let Some(&c) = m.iter().find(|&&c| c >= p) {
                    return Err(FieldError::CoefficientOutOfRange(c));
                }
                if m[n] != 1 {
                    return Err(FieldError::NotMonic);
                }
                if !is_irreducible(m, p) {
                    return Err(FieldError::ReducibleModulus);
                }
                m.to_vec()
            }
            None => least_irreducible(p, n),
        };
        Ok(Self::build(p, n, q, modulus))
    }

    /// Shorthand for the prime field F_p.
    pub fn prime(p: u32) -> Result<Self, FieldError> {
        Self::new(p, 1, None)
    }

    /// F_q with the default modulus, for any prime power `q`.
    pub fn with_order(q: u32) -> Result<Self, FieldError> {
        let (p, n) = prime_power_decompose(q).ok_or(FieldError::NotPrime(q))?;
        Self::new(p, n, None)
    }

    fn build(p: u32, n: usize, q: u32, modulus: Vec<u32>) -> Self {
        let mut ctx = FqContext {
            p,
            n,
            q,
            modulus,
            neg: Vec::new(),
            inv: Vec::new(),
            tables: None,
        };
        ctx.neg = (0..q).map(|a| ctx.neg_slow(a)).collect();
        if q <= TABLE_LIMIT {
            let mut add = vec![0; (q * q) as usize];
            let mut mul = vec![0; (q * q) as usize];
            for a in 0..q {
                for b in 0..q {
                    add[(a * q + b) as usize] = ctx.add_slow(a, b);
                    mul[(a * q + b) as usize] = ctx.mul_slow(a, b);
                }
            }
            ctx.tables = Some(Tables { add, mul });
        }
        // inverses by exponentiation: a^(q-2)
        let mut inv = vec![0; q as usize];
        for a in 1..q {
            inv[a as usize] = ctx.pow_u64(FqElement(a), (q - 2) as u64).0;
        }
        ctx.inv = inv;
        ctx
    }

    #[inline]
    pub fn characteristic(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn order(&self) -> u32 {
        self.q
    }

    /// Coefficients of the defining modulus, constant term first.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn zero(&self) -> FqElement {
        FqElement::ZERO
    }

    pub fn one(&self) -> FqElement {
        FqElement::ONE
    }

    pub fn element(&self, coeffs: &[u32]) -> Result<FqElement, FieldError> {
        if coeffs.len() != self.n || coeffs.iter().any(|&c| c >= self.p) {
            return Err(FieldError::InvalidCoordinates(coeffs.to_vec()));
        }
        Ok(FqElement(pack(coeffs, self.p)))
    }

    /// Element with the given enumeration index.
    pub fn from_index(&self, index: u32) -> Result<FqElement, FieldError> {
        if index >= self.q {
            return Err(FieldError::InvalidCoordinates(vec![index]));
        }
        Ok(FqElement(index))
    }

    pub fn coeffs(&self, a: FqElement) -> Vec<u32> {
        unpack(a.0, self.p, self.n)
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(&self, k: i64) -> FqElement {
        FqElement(k.rem_euclid(self.p as i64) as u32)
    }

    /// All elements in canonical order.
    pub fn elements(&self) -> impl Iterator<Item = FqElement> {
        (0..self.q).map(FqElement)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = FqElement> {
        (1..self.q).map(FqElement)
    }

    #[inline]
    pub fn add(&self, a: FqElement, b: FqElement) -> FqElement {
        match &self.tables {
            Some(t) => FqElement(t.add[(a.0 * self.q + b.0) as usize]),
            None => FqElement(self.add_slow(a.0, b.0)),
        }
    }

    #[inline]
    pub fn neg(&self, a: FqElement) -> FqElement {
        FqElement(self.neg[a.0 as usize])
    }

    #[inline]
    pub fn sub(&self, a: FqElement, b: FqElement) -> FqElement {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FqElement, b: FqElement) -> FqElement {
        match &self.tables {
            Some(t) => FqElement(t.mul[(a.0 * self.q + b.0) as usize]),
            None => FqElement(self.mul_slow(a.0, b.0)),
        }
    }

    pub fn inv(&self, a: FqElement) -> Result<FqElement, FieldError> {
        if a.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        Ok(FqElement(self.inv[a.0 as usize]))
    }

    pub fn div(&self, a: FqElement, b: FqElement) -> Result<FqElement, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a^e` for any integer `e`. Nonzero bases reduce the exponent modulo q - 1;
    /// `0^0 = 1`, `0^e = 0` for `e > 0`, and `0^e` with `e < 0` is an error.
    pub fn pow(&self, a: FqElement, e: i64) -> Result<FqElement, FieldError> {
        if a.is_zero() {
            return match e {
                0 => Ok(FqElement::ONE),
                e if e > 0 => Ok(FqElement::ZERO),
                _ => Err(FieldError::DivisionByZero),
            };
        }
        let e = e.rem_euclid((self.q - 1) as i64) as u64;
        Ok(self.pow_u64(a, e))
    }

    /// `a^e` by square-and-multiply, no exponent reduction.
    pub fn pow_u64(&self, a: FqElement, mut e: u64) -> FqElement {
        let mut base = a;
        let mut acc = FqElement::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn add_slow(&self, a: u32, b: u32) -> u32 {
        let (p, mut a, mut b) = (self.p, a, b);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.n {
            out += ((a % p + b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    fn neg_slow(&self, a: u32) -> u32 {
        let coeffs: Vec<u32> = unpack(a, self.p, self.n)
            .into_iter()
            .map(|c| (self.p - c) % self.p)
            .collect();
        pack(&coeffs, self.p)
    }

    fn mul_slow(&self, a: u32, b: u32) -> u32 {
        let p = self.p as u64;
        let n = self.n;
        let x = unpack(a, self.p, n);
        let y = unpack(b, self.p, n);
        let mut prod = vec![0u64; 2 * n - 1];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                prod[i + j] = (prod[i + j] + xi as u64 * yj as u64) % p;
            }
        }
        // reduce by the monic modulus, top degree down
        for k in (n..prod.len()).rev() {
            let c = prod[k];
            if c == 0 {
                continue;
            }
            prod[k] = 0;
            for (i, &mi) in self.modulus[..n].iter().enumerate() {
                let sub = c * mi as u64 % p;
                prod[k - n + i] = (prod[k - n + i] + p - sub) % p;
            }
        }
        let coeffs: Vec<u32> = prod[..n].iter().map(|&c| c as u32).collect();
        pack(&coeffs, self.p)
    }
}

/// Literal value of `sum f^h` over F_q (or over F_q^* with `nonzero_only`),
/// with the convention `0^0 = 1`.
pub fn field_power_sum(ctx: &FqContext, h: u64, nonzero_only: bool) -> FqElement {
    let start = if nonzero_only { 1 } else { 0 };
    (start..ctx.order())
        .map(|i| {
            let f = FqElement(i);
            if f.is_zero() && h == 0 {
                FqElement::ONE
            } else {
                ctx.pow_u64(f, h)
            }
        })
        .fold(FqElement::ZERO, |acc, x| ctx.add(acc, x))
}

fn checked_pow(p: u32, n: usize) -> Option<u32> {
    let mut acc: u32 = 1;
    for _ in 0..n {
        acc = acc.checked_mul(p)?;
    }
    Some(acc)
}

fn pack(coeffs: &[u32], p: u32) -> u32 {
    coeffs.iter().rev().fold(0, |acc, &c| acc * p + c)
}

fn unpack(mut a: u32, p: u32, n: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(a % p);
        a /= p;
    }
    out
}

/// Remainder of `a` modulo the monic `b` over F_p (both constant term first).
fn poly_rem(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let p64 = p as u64;
    let mut r: Vec<u64> = a.iter().map(|&c| c as u64).collect();
    let db = b.len() - 1;
    while r.len() > db {
        let lead = r.pop().unwrap();
        if lead == 0 {
            continue;
        }
        let shift = r.len() - db;
        for (i, &bi) in b[..db].iter().enumerate() {
            r[shift + i] = (r[shift + i] + p64 - lead * bi as u64 % p64) % p64;
        }
    }
    r.into_iter().map(|c| c as u32).collect()
}

/// Trial division by every monic polynomial of degree 1..=deg/2.
fn is_irreducible(m: &[u32], p: u32) -> bool {
    let deg = m.len() - 1;
    for k in 1..=deg / 2 {
        let count = p.pow(k as u32);
        for low in 0..count {
            let mut divisor = unpack(low, p, k);
            divisor.push(1);
            if poly_rem(m, &divisor, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn least_irreducible(p: u32, n: usize) -> Vec<u32> {
    let count = p.pow(n as u32);
    (0..count)
        .map(|low| {
            let mut m = unpack(low, p, n);
            m.push(1);
            m
        })
        .find(|m| is_irreducible(m, p))
        .expect("an irreducible polynomial exists in every degree")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_fields() -> Vec<FqContext> {
        [2, 3, 4, 5, 7, 8, 9, 11, 13, 16]
            .iter()
            .map(|&q| FqContext::with_order(q).unwrap())
            .collect()
    }

    #[test]
    fn prime_fields() {
        let f2 = FqContext::new(2, 1, None).unwrap();
        assert_eq!(f2.order(), 2);
        assert_eq!(f2.modulus(), &[0, 1]);
        let f3 = FqContext::new(3, 1, None).unwrap();
        assert_eq!(f3.order(), 3);
    }

    #[test]
    fn f4_default_modulus_is_the_unique_irreducible_quadratic() {
        // x^2, x^2+1, x^2+x are reducible over F_2; x^2+x+1 is not.
        let candidates = [[0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]];
        let irreducible: Vec<_> = candidates
            .iter()
            .filter(|m| {
                (0..2u32).all(|x| (m[0] + m[1] * x + m[2] * x * x) % 2 != 0)
            })
            .collect();
        assert_eq!(irreducible, vec![&[1, 1, 1]]);
        let f4 = FqContext::new(2, 2, None).unwrap();
        assert_eq!(f4.modulus(), &[1, 1, 1]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(FqContext::new(4, 1, None).unwrap_err(), FieldError::NotPrime(4));
        assert_eq!(
            FqContext::new(2, 2, Some(&[1, 0, 1])).unwrap_err(),
            FieldError::ReducibleModulus
        );
        assert_eq!(
            FqContext::new(2, 2, Some(&[1, 1])).unwrap_err(),
            FieldError::DegreeMismatch { expected: 2, got: 1 }
        );
        assert_eq!(FqContext::new(2, 0, None).unwrap_err(), FieldError::ZeroDegree);
        assert_eq!(FqContext::new(2, 17, None).unwrap_err(), FieldError::FieldTooLarge);
        assert_eq!(FqContext::new(3, 2, Some(&[1, 0, 2])).unwrap_err(), FieldError::NotMonic);
    }

    #[test]
    fn construction_is_deterministic() {
        let a = FqContext::new(3, 3, None).unwrap();
        let b = FqContext::new(3, 3, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.modulus(), b.modulus());
    }

    #[test]
    fn small_examples() {
        let f3 = FqContext::prime(3).unwrap();
        assert_eq!(f3.mul(f3.from_int(2), f3.from_int(2)), f3.one());
        let f5 = FqContext::prime(5).unwrap();
        assert_eq!(f5.inv(f5.from_int(3)).unwrap(), f5.from_int(2));
        assert_eq!(f5.inv(f5.zero()), Err(FieldError::DivisionByZero));
        let f4 = FqContext::with_order(4).unwrap();
        let g = f4.element(&[0, 1]).unwrap();
        assert_eq!(f4.pow(g, 3).unwrap(), f4.one());
        assert_eq!(f4.pow(g, -1).unwrap(), f4.inv(g).unwrap());
        assert_eq!(f4.pow(f4.zero(), -2), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn coordinates_round_trip_in_enumeration_order() {
        let f9 = FqContext::with_order(9).unwrap();
        let listed: Vec<Vec<u32>> = f9.elements().map(|e| f9.coeffs(e)).collect();
        assert_eq!(listed[0], vec![0, 0]);
        assert_eq!(listed[1], vec![1, 0]);
        assert_eq!(listed[3], vec![0, 1]);
        for e in f9.elements() {
            assert_eq!(f9.element(&f9.coeffs(e)).unwrap(), e);
        }
        assert!(f9.element(&[3, 0]).is_err());
    }

    #[test]
    fn group_order_and_frobenius() {
        for ctx in small_fields() {
            let p = ctx.characteristic() as u64;
            for a in ctx.nonzero_elements() {
                assert_eq!(ctx.pow_u64(a, (ctx.order() - 1) as u64), ctx.one());
                assert_eq!(ctx.mul(a, ctx.inv(a).unwrap()), ctx.one());
            }
            for a in ctx.elements() {
                for b in ctx.elements() {
                    let lhs = ctx.pow_u64(ctx.add(a, b), p);
                    let rhs = ctx.add(ctx.pow_u64(a, p), ctx.pow_u64(b, p));
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn field_axioms_exhaustive_small() {
        for q in [4, 8, 9] {
            let ctx = FqContext::with_order(q).unwrap();
            for a in ctx.elements() {
                assert_eq!(ctx.add(a, ctx.neg(a)), ctx.zero());
                for b in ctx.elements() {
                    assert_eq!(ctx.mul(a, b), ctx.mul(b, a));
                    for c in ctx.elements() {
                        let lhs = ctx.mul(a, ctx.add(b, c));
                        let rhs = ctx.add(ctx.mul(a, b), ctx.mul(a, c));
                        assert_eq!(lhs, rhs);
                        assert_eq!(ctx.mul(ctx.mul(a, b), c), ctx.mul(a, ctx.mul(b, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn table_free_path_matches_tables() {
        // 3^6 = 729 > TABLE_LIMIT uses the slow path
        let big = FqContext::new(3, 6, None).unwrap();
        assert!(big.tables.is_none());
        let e: Vec<FqElement> = big.elements().step_by(37).collect();
        for &a in &e {
            if !a.is_zero() {
                assert_eq!(big.mul(a, big.inv(a).unwrap()), big.one());
            }
            for &b in &e {
                assert_eq!(big.mul(a, b), big.mul(b, a));
                assert_eq!(big.sub(big.add(a, b), b), a);
            }
        }
    }

    #[test]
    fn power_sum_examples() {
        let f3 = FqContext::prime(3).unwrap();
        assert_eq!(field_power_sum(&f3, 2, false), f3.from_int(-1));
        assert_eq!(field_power_sum(&f3, 1, false), f3.zero());
        let f4 = FqContext::with_order(4).unwrap();
        assert_eq!(field_power_sum(&f4, 0, true), f4.from_int(-1));
        assert_eq!(field_power_sum(&f4, 0, false), f4.zero());
    }

    #[test]
    fn power_sum_matches_character_relation() {
        for ctx in small_fields() {
            let qm1 = (ctx.order() - 1) as u64;
            let minus_one = ctx.from_int(-1);
            for h in 0..=3 * qm1 {
                let all = if h == 0 || h % qm1 != 0 { ctx.zero() } else { minus_one };
                let units = if h % qm1 == 0 { minus_one } else { ctx.zero() };
                assert_eq!(field_power_sum(&ctx, h, false), all, "q={} h={h}", ctx.order());
                assert_eq!(field_power_sum(&ctx, h, true), units, "q={} h={h}", ctx.order());
            }
        }
    }

    #[test]
    fn prime_power_split() {
        assert_eq!(prime_power_decompose(9), Some((3, 2)));
        assert_eq!(prime_power_decompose(8), Some((2, 3)));
        assert_eq!(prime_power_decompose(7), Some((7, 1)));
        assert_eq!(prime_power_decompose(12), None);
        assert_eq!(prime_power_decompose(1), None);
    }
}
