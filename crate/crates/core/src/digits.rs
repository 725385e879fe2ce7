//! Base-p digit combinatorics behind the power-sum valuations.
//!
//! An exponent `m` is handled as the multiset of its base-p "digit units":
//! position `e` with digit `c` contributes `c` copies of `p^e`. A carry-free
//! decomposition `m = m_0 (+) ... (+) m_d` is exactly a distribution of these
//! units among the parts, so every search here works on digit vectors.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::field::FqContext;

/// Default bound on digit units for the part-assignment searches.
pub const DEFAULT_UNIT_CAP: usize = 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DigitsError {
    #[error("parts sum to {got}, expected {expected}")]
    PartsSumMismatch { expected: BigUint, got: BigUint },
    #[error("{units} digit units exceed the search cap of {cap}")]
    CapExceeded { units: usize, cap: usize },
    #[error("closed form needs a prime field, got q = {0}")]
    NotPrimeField(u32),
    #[error("exponent has a p-adic stream part; a finite integer is required")]
    NotFinite,
    #[error("digit {digit} is not below the base {base}")]
    InvalidDigit { digit: u32, base: u32 },
    #[error("exponent too large for exhaustive search")]
    TooLarge,
    #[error("stream is only known to {known} digits, {requested} requested")]
    StreamTooShort { known: usize, requested: usize },
    #[error("invalid stream spec: {0}")]
    BadStreamSpec(String),
}

/// Base-`b` digits of `k`, least significant first; zero has no digits.
pub fn base_digits(k: &BigUint, b: u32) -> Vec<u32> {
    assert!(b >= 2, "base must be at least 2");
    let mut out = Vec::new();
    let mut rest = k.clone();
    let base = BigUint::from(b);
    while !rest.is_zero() {
        let (quot, rem) = rest.div_rem(&base);
        out.push(rem.to_u32().unwrap());
        rest = quot;
    }
    out
}

/// Inverse of [`base_digits`].
pub fn from_digits(digits: &[u32], b: u32) -> BigUint {
    let base = BigUint::from(b);
    digits
        .iter()
        .rev()
        .fold(BigUint::zero(), |acc, &d| acc * &base + BigUint::from(d))
}

/// Sum of the base-`b` digits, `ell_b(k)`.
pub fn digit_sum(k: &BigUint, b: u32) -> u64 {
    base_digits(k, b).iter().map(|&d| d as u64).sum()
}

/// Number of base-p digit units of `k` (its base-p digit sum).
pub fn digit_units(k: &BigUint, p: u32) -> usize {
    digit_sum(k, p) as usize
}

/// True iff adding the parts in base `p` produces no carry.
pub fn carry_free(parts: &[BigUint], p: u32) -> bool {
    let digits: Vec<Vec<u32>> = parts.iter().map(|k| base_digits(k, p)).collect();
    let len = digits.iter().map(Vec::len).max().unwrap_or(0);
    (0..len).all(|i| {
        let s: u64 = digits.iter().map(|d| *d.get(i).unwrap_or(&0) as u64).sum();
        s < p as u64
    })
}

/// `C(a, b) mod p` for `a, b < p` by the multiplicative formula.
fn small_binomial(a: u64, b: u64, p: u64) -> u64 {
    if b > a {
        return 0;
    }
    let mut num = 1u64;
    let mut den = 1u64;
    for i in 0..b {
        num = num * ((a - i) % p) % p;
        den = den * ((i + 1) % p) % p;
    }
    num * mod_inverse(den, p) % p
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // p prime, a not divisible by p
    let mut acc = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

/// `C(n, k) mod p` by Lucas' theorem.
pub fn binomial_mod_p(n: &BigUint, k: &BigUint, p: u32) -> u32 {
    if k > n {
        return 0;
    }
    let nd = base_digits(n, p);
    let kd = base_digits(k, p);
    let mut acc = 1u64;
    for (i, &a) in nd.iter().enumerate() {
        let b = *kd.get(i).unwrap_or(&0);
        acc = acc * small_binomial(a as u64, b as u64, p as u64) % p as u64;
        if acc == 0 {
            break;
        }
    }
    acc as u32
}

/// The multinomial `m! / (m_0! ... m_d!)` reduced mod `p`, as a chain of
/// binomials each evaluated by Lucas' theorem.
pub fn multinomial_mod_p(m: &BigUint, parts: &[BigUint], p: u32) -> Result<u32, DigitsError> {
    let total: BigUint = parts.iter().sum();
    if &total != m {
        return Err(DigitsError::PartsSumMismatch { expected: m.clone(), got: total });
    }
    let mut running = BigUint::zero();
    let mut acc = 1u64;
    for part in parts {
        running += part;
        acc = acc * binomial_mod_p(&running, part, p) as u64 % p as u64;
    }
    Ok(acc as u32)
}

/// Eventually periodic base-p digit stream: `prefix` followed by `period`
/// repeated forever. An empty `period` means nothing is known past the prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadicStream {
    pub prefix: Vec<u32>,
    pub period: Vec<u32>,
    /// Declared truncation length: how many digits may be consumed.
    pub depth: usize,
}

impl PadicStream {
    pub fn new(prefix: Vec<u32>, period: Vec<u32>, depth: usize, p: u32) -> Result<Self, DigitsError> {
        if let Some(&digit) = prefix.iter().chain(&period).find(|&&d| d >= p) {
            return Err(DigitsError::InvalidDigit { digit, base: p });
        }
        if period.is_empty() && depth > prefix.len() {
            return Err(DigitsError::StreamTooShort { known: prefix.len(), requested: depth });
        }
        Ok(PadicStream { prefix, period, depth })
    }

    /// The stream of a non-negative integer: its digits followed by zeros.
    pub fn from_finite(m: &BigUint, p: u32, depth: usize) -> Self {
        PadicStream { prefix: base_digits(m, p), period: vec![0], depth }
    }

    /// `-1` in Z_p: every digit `p - 1`.
    pub fn minus_one(p: u32, depth: usize) -> Self {
        PadicStream { prefix: Vec::new(), period: vec![p - 1], depth }
    }

    /// Parses `PREFIX|PERIOD` (comma-separated digits on each side, either
    /// side may be empty) or `repeat:PERIOD`.
    pub fn parse(spec: &str, p: u32, depth: usize) -> Result<Self, DigitsError> {
        let list = |s: &str| -> Result<Vec<u32>, DigitsError> {
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<u32>().map_err(|_| DigitsError::BadStreamSpec(spec.to_string())))
                .collect()
        };
        let (prefix, period) = if let Some(rest) = spec.strip_prefix("repeat:") {
            (Vec::new(), list(rest)?)
        } else if let Some((a, b)) = spec.split_once('|') {
            (list(a)?, list(b)?)
        } else {
            (list(spec)?, Vec::new())
        };
        Self::new(prefix, period, depth, p)
    }

    pub fn digit(&self, i: usize) -> Option<u32> {
        if i < self.prefix.len() {
            Some(self.prefix[i])
        } else if self.period.is_empty() {
            None
        } else {
            Some(self.period[(i - self.prefix.len()) % self.period.len()])
        }
    }

    /// The first `j` digits, least significant first.
    pub fn truncation_digits(&self, j: usize) -> Result<Vec<u32>, DigitsError> {
        (0..j)
            .map(|i| {
                self.digit(i).ok_or(DigitsError::StreamTooShort {
                    known: self.prefix.len(),
                    requested: j,
                })
            })
            .collect()
    }

    /// The positive integer `m_j = sum_{i<j} digit_i p^i`.
    pub fn truncation(&self, j: usize, p: u32) -> Result<BigUint, DigitsError> {
        Ok(from_digits(&self.truncation_digits(j)?, p))
    }

    /// True if every digit from position `j` on is known to be zero.
    pub fn zero_from(&self, j: usize) -> bool {
        !self.period.is_empty()
            && self.period.iter().all(|&d| d == 0)
            && self.prefix.iter().skip(j).all(|&d| d == 0)
    }
}

/// The p-adic part of an exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PadicPart {
    Finite(BigUint),
    Stream(PadicStream),
}

/// An exponent `y = (z, m)`: `z` a residue mod `q - 1` twisting the constant
/// term, `m` the p-adic power applied to the one-unit part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentY {
    z: u64,
    padic: PadicPart,
}

impl ExponentY {
    /// `z` may be any integer; it is reduced into `[0, q - 1)`.
    pub fn new(ctx: &FqContext, z: i64, padic: PadicPart) -> Self {
        let modulus = (ctx.order() - 1) as i64;
        ExponentY { z: z.rem_euclid(modulus) as u64, padic }
    }

    pub fn finite(ctx: &FqContext, z: i64, m: impl Into<BigUint>) -> Self {
        Self::new(ctx, z, PadicPart::Finite(m.into()))
    }

    /// The least non-negative residue `r` of `z` mod `q - 1`.
    pub fn residue(&self) -> u64 {
        self.z
    }

    pub fn padic(&self) -> &PadicPart {
        &self.padic
    }

    pub fn finite_m(&self) -> Result<&BigUint, DigitsError> {
        match &self.padic {
            PadicPart::Finite(m) => Ok(m),
            PadicPart::Stream(_) => Err(DigitsError::NotFinite),
        }
    }
}

/// A carry-free decomposition `(m_0, ..., m_d)` with its weight `sum i m_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    d: usize,
    parts: Vec<BigUint>,
    weight: BigUint,
}

impl Decomposition {
    pub fn new(parts: Vec<BigUint>) -> Self {
        let d = parts.len() - 1;
        let weight = parts
            .iter()
            .enumerate()
            .map(|(i, m)| m * BigUint::from(i))
            .sum();
        Decomposition { d, parts, weight }
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn parts(&self) -> &[BigUint] {
        &self.parts
    }

    /// `m_i`.
    pub fn part(&self, i: usize) -> &BigUint {
        &self.parts[i]
    }

    pub fn weight(&self) -> &BigUint {
        &self.weight
    }

    /// Checks every defining constraint against `m` and the residue `r`.
    pub fn is_valid_for(&self, ctx: &FqContext, m: &BigUint, r: u64) -> bool {
        let modulus = BigUint::from(ctx.order() - 1);
        let total: BigUint = self.parts.iter().sum();
        let residue_ok = |k: &BigUint, target: u64| (k % &modulus) == BigUint::from(target) % &modulus;
        &total == m
            && carry_free(&self.parts, ctx.characteristic())
            && (1..self.d).all(|i| !self.parts[i].is_zero() && residue_ok(&self.parts[i], 0))
            && (self.d == 0 || residue_ok(&self.parts[self.d], r))
    }

    pub fn to_json(decomposition: Option<&Self>, d: usize) -> DecompositionJson {
        match decomposition {
            Some(dec) => DecompositionJson {
                d,
                parts: dec.parts.iter().map(big_to_json).collect(),
                weight: big_to_json(&dec.weight),
                exists: true,
            },
            None => DecompositionJson { d, parts: Vec::new(), weight: Value::Null, exists: false },
        }
    }
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(|k| k.to_string()).collect();
        write!(f, "({}) weight {}", parts.join(", "), self.weight)
    }
}

/// JSON form `{d, parts, weight, exists}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub d: usize,
    pub parts: Vec<Value>,
    pub weight: Value,
    pub exists: bool,
}

/// Integers as JSON numbers when they fit in `u64`, decimal strings otherwise.
pub fn big_to_json(k: &BigUint) -> Value {
    match k.to_u64() {
        Some(v) => Value::from(v),
        None => Value::String(k.to_string()),
    }
}

/// Residue classes of digit units modulo `q - 1`: since `p^n = 1` there, the
/// unit `p^e` has residue `p^(e mod n)`, so residue questions only depend on
/// how many units fall in each of the `n` classes.
struct ClassSpace {
    residues: Vec<u64>,
    modulus: u64,
    memo: HashMap<(Vec<u32>, usize), bool>,
}

impl ClassSpace {
    fn new(p: u32, q: u32) -> Self {
        let modulus = (q - 1) as u64;
        let mut residues = Vec::new();
        let mut place = 1u64;
        while place < q as u64 {
            residues.push(place % modulus);
            place *= p as u64;
        }
        ClassSpace { residues, modulus, memo: HashMap::new() }
    }

    fn counts(&self, digits: &[u32]) -> Vec<u32> {
        let n = self.residues.len();
        let mut c = vec![0; n];
        for (e, &k) in digits.iter().enumerate() {
            c[e % n] += k;
        }
        c
    }

    fn residue(&self, counts: &[u32]) -> u64 {
        counts
            .iter()
            .zip(&self.residues)
            .fold(0, |acc, (&k, &r)| (acc + k as u64 * r) % self.modulus)
    }

    /// Every count vector `s <= bound`.
    fn sub_vectors(bound: &[u32]) -> impl Iterator<Item = Vec<u32>> + '_ {
        let total: u64 = bound.iter().map(|&b| b as u64 + 1).product();
        (0..total).map(move |mut idx| {
            bound
                .iter()
                .map(|&b| {
                    let v = (idx % (b as u64 + 1)) as u32;
                    idx /= b as u64 + 1;
                    v
                })
                .collect()
        })
    }

    /// Can `k` disjoint nonempty sub-multisets with residue 0 be drawn from
    /// units with these class counts?
    fn feasible(&mut self, counts: &[u32], k: usize) -> bool {
        if k == 0 {
            return true;
        }
        if let Some(&hit) = self.memo.get(&(counts.to_vec(), k)) {
            return hit;
        }
        let candidates: Vec<Vec<u32>> = Self::sub_vectors(counts)
            .filter(|s| s.iter().any(|&x| x > 0) && self.residue(s) == 0)
            .collect();
        let ok = candidates.into_iter().any(|s| {
            let rest: Vec<u32> = counts.iter().zip(&s).map(|(a, b)| a - b).collect();
            self.feasible(&rest, k - 1)
        });
        self.memo.insert((counts.to_vec(), k), ok);
        ok
    }
}

/// The least sub-multiset of `avail` with `want[j]` units from class `j`:
/// the lowest units of each class.
fn lowest_units(avail: &[u32], want: &[u32]) -> Vec<u32> {
    let n = want.len();
    let mut left = want.to_vec();
    avail
        .iter()
        .enumerate()
        .map(|(e, &c)| {
            let take = c.min(left[e % n]);
            left[e % n] -= take;
            take
        })
        .collect()
}

/// Greedy decomposition on a digit vector, returning the parts as digit
/// vectors with index `i` holding `m_i`.
///
/// Parts are fixed from the top: `m_d` is the least sub-multiset of units
/// with residue `r` (possibly empty when `r = 0`), then `m_{d-1}, ..., m_1`
/// each the least nonempty one with residue 0, and the rest is `m_0`. Each
/// choice only ranges over those leaving enough units to complete the lower
/// parts; a plain top-down choice can strand them when `q` is composite
/// (q = 4, z = 2, m = 45, d = 2 is the smallest case).
pub fn greedy_parts_digits(digits: &[u32], p: u32, q: u32, r: u64, d: usize) -> Option<Vec<Vec<u32>>> {
    let mut space = ClassSpace::new(p, q);
    let mut remaining = digits.to_vec();
    let mut parts = vec![vec![0; digits.len()]; d + 1];
    let sum_of = |ds: &[u32]| from_digits(ds, p);
    for i in (1..=d).rev() {
        let (target, nonempty) = if i == d { (r % space.modulus, false) } else { (0, true) };
        let counts = space.counts(&remaining);
        let options: Vec<Vec<u32>> = ClassSpace::sub_vectors(&counts)
            .filter(|s| (!nonempty || s.iter().any(|&x| x > 0)) && space.residue(s) == target)
            .collect();
        let mut best: Option<(BigUint, Vec<u32>)> = None;
        for s in options {
            let rest: Vec<u32> = counts.iter().zip(&s).map(|(a, b)| a - b).collect();
            if !space.feasible(&rest, i - 1) {
                continue;
            }
            let chosen = lowest_units(&remaining, &s);
            let sum = sum_of(&chosen);
            if best.as_ref().is_none_or(|(b, _)| sum < *b) {
                best = Some((sum, chosen));
            }
        }
        let (_, chosen) = best?;
        for (slot, &c) in remaining.iter_mut().zip(&chosen) {
            *slot -= c;
        }
        parts[i] = chosen;
    }
    parts[0] = remaining;
    Some(parts)
}

/// The greedy decomposition of the finite exponent, or `None` when no
/// admissible decomposition exists (the valuation is infinite).
pub fn greedy_decomposition(
    ctx: &FqContext,
    y: &ExponentY,
    d: usize,
) -> Result<Option<Decomposition>, DigitsError> {
    let m = y.finite_m()?;
    let p = ctx.characteristic();
    if d == 0 {
        return Ok(Some(Decomposition::new(vec![m.clone()])));
    }
    let digits = base_digits(m, p);
    Ok(greedy_parts_digits(&digits, p, ctx.order(), y.residue(), d)
        .map(|parts| Decomposition::new(parts.iter().map(|ds| from_digits(ds, p)).collect())))
}

/// A valid decomposition as produced by [`for_each_decomposition`].
#[derive(Clone, Debug)]
pub struct RawDecomposition<'a> {
    pub parts: &'a [u128],
    pub weight: u128,
    /// The multinomial coefficient of the decomposition mod p (never zero).
    pub multinomial: u32,
}

/// Visits every carry-free decomposition `m = m_0 (+) ... (+) m_d` satisfying
/// the residue and positivity constraints, by distributing the digit units
/// of each base-p position among the `d + 1` parts. Units at one position are
/// interchangeable, so each decomposition is visited exactly once.
pub fn for_each_decomposition<F>(
    ctx: &FqContext,
    y: &ExponentY,
    d: usize,
    cap: usize,
    visit: F,
) -> Result<(), DigitsError>
where
    F: FnMut(RawDecomposition<'_>),
{
    for_each_decomposition_below(ctx, y, d, u128::MAX, cap, visit)
}

/// Like [`for_each_decomposition`], restricted to weights below `limit`.
///
/// A unit `p^e` placed in part `i >= 1` adds `i p^e` to the weight, so units
/// with `p^e >= limit` are forced into `m_0` and only the remaining ones
/// count against `cap`. Positions are searched from the top so heavy
/// placements are cut off first.
pub fn for_each_decomposition_below<F>(
    ctx: &FqContext,
    y: &ExponentY,
    d: usize,
    limit: u128,
    cap: usize,
    mut visit: F,
) -> Result<(), DigitsError>
where
    F: FnMut(RawDecomposition<'_>),
{
    let m = y.finite_m()?;
    let p = ctx.characteristic();
    if m.bits() > 120 {
        return Err(DigitsError::TooLarge);
    }
    let digits = base_digits(m, p);
    let mut places = Vec::with_capacity(digits.len());
    let mut place: u128 = 1;
    for _ in &digits {
        places.push(place);
        place = place.saturating_mul(p as u128);
    }
    let movable = |e: usize| d > 0 && places[e] < limit;
    let units: usize = (0..digits.len())
        .filter(|&e| movable(e))
        .map(|e| digits[e] as usize)
        .sum();
    if units > cap {
        return Err(DigitsError::CapExceeded { units, cap });
    }
    let modulus = (ctx.order() - 1) as u64;
    // factorials mod p up to p - 1 for the per-position multinomials
    let mut fact = vec![1u64; p as usize];
    for i in 1..p as usize {
        fact[i] = fact[i - 1] * i as u64 % p as u64;
    }
    let mut state = SearchState {
        parts: vec![0u128; d + 1],
        residues: vec![0u64; d + 1],
        multinomial: 1,
        weight: 0,
    };
    // fixed units all land in m_0
    for e in (0..digits.len()).filter(|&e| !movable(e)) {
        state.parts[0] += places[e] * digits[e] as u128;
    }
    let order: Vec<usize> = (0..digits.len()).rev().filter(|&e| movable(e)).collect();
    let search = Search {
        digits: &digits,
        places: &places,
        order: &order,
        fact: &fact,
        p: p as u64,
        modulus,
        r: y.residue() % modulus,
        d,
        limit,
        memo: RefCell::new(HashMap::new()),
    };
    search.position(0, &mut state, &mut visit);
    Ok(())
}

struct Search<'a> {
    digits: &'a [u32],
    places: &'a [u128],
    /// Positions still to distribute, in search order.
    order: &'a [usize],
    fact: &'a [u64],
    p: u64,
    modulus: u64,
    r: u64,
    d: usize,
    limit: u128,
    /// Whether positions `order[idx..]` can still complete the residue and
    /// nonemptiness conditions, keyed by `(idx, residues of parts 1..=d,
    /// nonempty mask)`. Weight is ignored, so this only prunes.
    memo: RefCell<HashMap<(usize, Vec<u64>, u64), bool>>,
}

struct SearchState {
    parts: Vec<u128>,
    residues: Vec<u64>,
    multinomial: u64,
    weight: u128,
}

impl Search<'_> {
    fn position<F: FnMut(RawDecomposition<'_>)>(&self, idx: usize, st: &mut SearchState, visit: &mut F) {
        let Some(&pos) = self.order.get(idx) else {
            self.leaf(st, visit);
            return;
        };
        if self.d > 0 {
            let mask = (1..=self.d).filter(|&i| st.parts[i] != 0).fold(0u64, |m, i| m | 1 << i);
            if !self.completable(idx, st.residues[1..].to_vec(), mask) {
                return;
            }
        }
        let c = self.digits[pos];
        let saved = st.multinomial;
        st.multinomial = st.multinomial * self.fact[c as usize] % self.p;
        self.distribute(idx, 0, c, st, visit);
        st.multinomial = saved;
    }

    /// Hands out `left` units of the position at `order[idx]` to parts `part..=d`.
    fn distribute<F: FnMut(RawDecomposition<'_>)>(
        &self,
        idx: usize,
        part: usize,
        left: u32,
        st: &mut SearchState,
        visit: &mut F,
    ) {
        let place = self.places[self.order[idx]];
        let place_res = (place % self.modulus as u128) as u64;
        if part == self.d {
            self.assign(part, left, place, place_res, st);
            if st.weight < self.limit {
                self.position(idx + 1, st, visit);
            }
            self.unassign(part, left, place, place_res, st);
            return;
        }
        for k in 0..=left {
            self.assign(part, k, place, place_res, st);
            if st.weight < self.limit {
                self.distribute(idx, part + 1, left - k, st, visit);
            }
            self.unassign(part, k, place, place_res, st);
        }
    }

    fn completable(&self, idx: usize, residues: Vec<u64>, mask: u64) -> bool {
        let d = self.d;
        let Some(&pos) = self.order.get(idx) else {
            return residues[d - 1] == self.r
                && (1..d).all(|i| mask & (1 << i) != 0 && residues[i - 1] == 0);
        };
        let key = (idx, residues, mask);
        if let Some(&hit) = self.memo.borrow().get(&key) {
            return hit;
        }
        let (_, residues, _) = &key;
        let place_res = (self.places[pos] % self.modulus as u128) as u64;
        // every way to hand the digit's units to parts 1..=d, rest to m_0
        let mut share = vec![0u32; d];
        let mut ok = false;
        loop {
            let used: u32 = share.iter().sum();
            if used <= self.digits[pos] {
                let mut next = residues.clone();
                let mut m = mask;
                for (i, &k) in share.iter().enumerate() {
                    if k > 0 {
                        next[i] = (next[i] + place_res * k as u64) % self.modulus;
                        m |= 1 << (i + 1);
                    }
                }
                if self.completable(idx + 1, next, m) {
                    ok = true;
                    break;
                }
            }
            // odometer over share in [0, digit]^d
            let mut i = 0;
            while i < d && share[i] == self.digits[pos] {
                share[i] = 0;
                i += 1;
            }
            if i == d {
                break;
            }
            share[i] += 1;
        }
        self.memo.borrow_mut().insert(key, ok);
        ok
    }

    fn assign(&self, part: usize, k: u32, place: u128, place_res: u64, st: &mut SearchState) {
        if k == 0 {
            return;
        }
        st.parts[part] += place * k as u128;
        st.weight += place * k as u128 * part as u128;
        st.residues[part] = (st.residues[part] + place_res * k as u64) % self.modulus;
        let inv = mod_inverse(self.fact[k as usize], self.p);
        st.multinomial = st.multinomial * inv % self.p;
    }

    fn unassign(&self, part: usize, k: u32, place: u128, place_res: u64, st: &mut SearchState) {
        if k == 0 {
            return;
        }
        st.parts[part] -= place * k as u128;
        st.weight -= place * k as u128 * part as u128;
        st.residues[part] = (st.residues[part] + self.modulus - place_res * k as u64 % self.modulus) % self.modulus;
        st.multinomial = st.multinomial * self.fact[k as usize] % self.p;
    }

    fn leaf<F: FnMut(RawDecomposition<'_>)>(&self, st: &SearchState, visit: &mut F) {
        let d = self.d;
        if d == 0 {
            visit(RawDecomposition { parts: &st.parts, weight: 0, multinomial: st.multinomial as u32 });
            return;
        }
        if st.residues[d] != self.r {
            return;
        }
        if (1..d).any(|i| st.parts[i] == 0 || st.residues[i] != 0) {
            return;
        }
        visit(RawDecomposition { parts: &st.parts, weight: st.weight, multinomial: st.multinomial as u32 });
    }
}

/// Minimum-weight admissible decomposition by exhaustive search over all
/// distributions of the digit units; ties broken by lexicographic parts.
pub fn exhaustive_min_decomposition(
    ctx: &FqContext,
    y: &ExponentY,
    d: usize,
    cap: usize,
) -> Result<Option<Decomposition>, DigitsError> {
    let mut best: Option<(u128, Vec<u128>)> = None;
    for_each_decomposition(ctx, y, d, cap, |dec| {
        let better = match &best {
            None => true,
            Some((w, parts)) => (dec.weight, dec.parts) < (*w, parts.as_slice()),
        };
        if better {
            best = Some((dec.weight, dec.parts.to_vec()));
        }
    })?;
    Ok(best.map(|(_, parts)| Decomposition::new(parts.into_iter().map(BigUint::from).collect())))
}

/// Closed-form valuation for a prime field: with `e_1 <= e_2 <= ...` the
/// digit-unit exponents of `m` (length `l`), the valuation is infinite when
/// `l < (p-1)(d-1) + r` and otherwise
/// `d * sum_{i<=r} p^{e_i} + sum_{j=1}^{d-1} j * sum_{i=1}^{p-1} p^{e_{(d-1-j)(p-1)+r+i}}`.
pub fn closed_form_valuation(
    ctx: &FqContext,
    y: &ExponentY,
    d: usize,
) -> Result<Option<BigUint>, DigitsError> {
    if ctx.degree() != 1 {
        return Err(DigitsError::NotPrimeField(ctx.order()));
    }
    let m = y.finite_m()?;
    if d == 0 {
        return Ok(Some(BigUint::zero()));
    }
    let p = ctx.characteristic() as usize;
    let r = y.residue() as usize;
    // e-sequence: exponent e repeated digit_e times, ascending
    let mut powers = Vec::new();
    let mut place = BigUint::one();
    for c in base_digits(m, p as u32) {
        for _ in 0..c {
            powers.push(place.clone());
        }
        place *= BigUint::from(p);
    }
    let ell = powers.len();
    if ell < (p - 1) * (d - 1) + r {
        return Ok(None);
    }
    // 1-based e_i is powers[i - 1]
    let mut total: BigUint = powers[..r].iter().sum::<BigUint>() * BigUint::from(d);
    for j in 1..d {
        let offset = (d - 1 - j) * (p - 1) + r;
        let block: BigUint = powers[offset..offset + p - 1].iter().sum();
        total += block * BigUint::from(j);
    }
    Ok(Some(total))
}

/// Predicted Newton-polygon slope `lambda(d) = v_d - v_{d-1}` from the greedy
/// decompositions at `d` and `d - 1`: `m_1(d) + sum_{u=1}^{d-1} m_u(d-1)`.
/// `lambda(0) = 0`; `None` if either decomposition is missing.
pub fn slope_prediction(ctx: &FqContext, y: &ExponentY, d: usize) -> Result<Option<BigUint>, DigitsError> {
    if d == 0 {
        return Ok(Some(BigUint::zero()));
    }
    let (Some(cur), Some(prev)) = (greedy_decomposition(ctx, y, d)?, greedy_decomposition(ctx, y, d - 1)?)
    else {
        return Ok(None);
    };
    let tail: BigUint = (1..d).map(|u| prev.part(u)).sum();
    Ok(Some(cur.part(1) + tail))
}

/// Degree bound of the zeta polynomial: the largest `d` with
/// `(d - 1)(q - 1) <= ell_q(m)`; every `S_d` beyond it vanishes.
pub fn degree_bound(q: u32, m: &BigUint) -> usize {
    (digit_sum(m, q) / (q as u64 - 1)) as usize + 1
}
