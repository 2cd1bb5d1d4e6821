//! p-typical truncated Witt vectors `W_r(A)` over rings of characteristic p.
//!
//! The ring operations are evaluated from universal polynomials obtained by
//! inverting the ghost map over `Q`; the resulting integer polynomials are
//! reduced mod p once and cached per `(p, r)`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::linalg::is_prime;

/// Default cap on `p^r` for which universal polynomials are computed.
pub const DEFAULT_SIZE_BOUND: u64 = 125;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WittError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("length must be at least 1")]
    ZeroLength,
    #[error("p^r = {p}^{r} exceeds the configured bound {bound}")]
    BoundExceeded { p: u64, r: usize, bound: u64 },
    #[error("Witt vector parameters do not match: {left:?} vs {right:?}")]
    ParamsMismatch { left: WittParams, right: WittParams },
    #[error("cannot truncate length {s} to length {r}")]
    TruncationTooLong { s: usize, r: usize },
    #[error("coefficient ring has characteristic {found}, expected {expected}")]
    Characteristic { expected: u64, found: u64 },
}

pub type Result<T> = std::result::Result<T, WittError>;

/// A commutative ring whose elements can be enumerated at test scale.
pub trait CommRing {
    type Elem: Clone + PartialEq + Eq + Hash + Debug;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn characteristic(&self) -> u64;
    /// Every element, in a fixed order.
    fn elements(&self) -> Vec<Self::Elem>;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }

    fn pow(&self, a: &Self::Elem, mut e: u64) -> Self::Elem {
        let mut acc = self.one();
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// `n * x` by double-and-add.
    fn scale_int(&self, x: &Self::Elem, n: i64) -> Self::Elem {
        let mut acc = self.zero();
        let mut base = if n < 0 { self.neg(x) } else { x.clone() };
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(&acc, &base);
            }
            base = self.add(&base, &base);
            k >>= 1;
        }
        acc
    }

    fn from_int(&self, n: i64) -> Self::Elem {
        self.scale_int(&self.one(), n)
    }

    fn is_zero(&self, a: &Self::Elem) -> bool {
        *a == self.zero()
    }
}

/// The prime field `F_p`, elements stored in `[0, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(WittError::NotPrime(p));
        }
        Ok(PrimeField { p })
    }

    pub fn p(&self) -> u64 {
        self.p
    }
}

impl CommRing for PrimeField {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.p
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.p
    }
    fn neg(&self, a: &u64) -> u64 {
        (self.p - a % self.p) % self.p
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        (a * b) % self.p
    }
    fn characteristic(&self) -> u64 {
        self.p
    }
    fn elements(&self) -> Vec<u64> {
        (0..self.p).collect()
    }
    fn from_int(&self, n: i64) -> u64 {
        n.rem_euclid(self.p as i64) as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WittParams {
    pub p: u64,
    pub r: usize,
}

impl WittParams {
    pub fn new(p: u64, r: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(WittError::NotPrime(p));
        }
        if r == 0 {
            return Err(WittError::ZeroLength);
        }
        Ok(WittParams { p, r })
    }
}

/// Polynomial over Q in variables `a_0..a_{r-1}, b_0..b_{r-1}`, keyed by
/// exponent vectors of length `2r`.
pub type RationalPoly = BTreeMap<Vec<u32>, BigRational>;

/// Integer polynomial in the same variables.
pub type IntegerPoly = BTreeMap<Vec<u32>, BigInt>;

/// Polynomial with coefficients in `F_p`, as `(exponents, coefficient)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedPoly {
    pub terms: Vec<(Vec<u32>, u64)>,
}

#[derive(Debug)]
pub struct UniversalWittPolynomials {
    pub p: u64,
    pub r: usize,
    pub addition: Vec<IntegerPoly>,
    pub multiplication: Vec<IntegerPoly>,
    pub negation: Vec<IntegerPoly>,
    add_mod_p: Vec<ReducedPoly>,
    mul_mod_p: Vec<ReducedPoly>,
    neg_mod_p: Vec<ReducedPoly>,
}

fn poly_add_into(acc: &mut RationalPoly, other: &RationalPoly, sign: i32) {
    for (k, v) in other {
        let e = acc.entry(k.clone()).or_insert_with(BigRational::zero);
        if sign >= 0 {
            *e += v;
        } else {
            *e -= v;
        }
    }
    acc.retain(|_, v| !v.is_zero());
}

fn poly_mul(a: &RationalPoly, b: &RationalPoly) -> RationalPoly {
    let mut out = RationalPoly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            *out.entry(k).or_insert_with(BigRational::zero) += va * vb;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn poly_pow(a: &RationalPoly, mut e: u64, nvars: usize) -> RationalPoly {
    let mut acc = RationalPoly::new();
    acc.insert(vec![0; nvars], BigRational::one());
    let mut base = a.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc = poly_mul(&acc, &base);
        }
        e >>= 1;
        if e > 0 {
            base = poly_mul(&base, &base);
        }
    }
    acc
}

fn poly_scale(a: &RationalPoly, s: &BigRational) -> RationalPoly {
    a.iter().map(|(k, v)| (k.clone(), v * s)).collect()
}

fn variable(idx: usize, nvars: usize) -> RationalPoly {
    let mut k = vec![0; nvars];
    k[idx] = 1;
    RationalPoly::from([(k, BigRational::one())])
}

/// Ghost component `w_n` of a vector of polynomials.
fn ghost(p: u64, xs: &[RationalPoly], n: usize, nvars: usize) -> RationalPoly {
    let mut out = RationalPoly::new();
    for (j, x) in xs.iter().enumerate().take(n + 1) {
        let pj = BigRational::from_integer(BigInt::from(p).pow(j as u32));
        let term = poly_pow(x, p.pow((n - j) as u32), nvars);
        poly_add_into(&mut out, &poly_scale(&term, &pj), 1);
    }
    out
}

/// Solves `w_n(X) = targets[n]` for `X` recursively.
fn invert_ghost(p: u64, targets: &[RationalPoly], nvars: usize) -> Vec<RationalPoly> {
    let mut xs: Vec<RationalPoly> = Vec::with_capacity(targets.len());
    for (n, target) in targets.iter().enumerate() {
        let mut rest = target.clone();
        for (j, x) in xs.iter().enumerate() {
            let pj = BigRational::from_integer(BigInt::from(p).pow(j as u32));
            let term = poly_pow(x, p.pow((n - j) as u32), nvars);
            poly_add_into(&mut rest, &poly_scale(&term, &pj), -1);
        }
        let inv = BigRational::new(BigInt::one(), BigInt::from(p).pow(n as u32));
        xs.push(poly_scale(&rest, &inv));
    }
    xs
}

fn to_integer(p: u64, r: usize, what: &str, polys: Vec<RationalPoly>) -> Vec<IntegerPoly> {
    polys
        .into_iter()
        .enumerate()
        .map(|(n, poly)| {
            poly.into_iter()
                .map(|(k, v)| {
                    assert!(
                        v.is_integer(),
                        "non-integral coefficient {v} in {what} polynomial {n} for (p, r) = ({p}, {r})"
                    );
                    (k, v.to_integer())
                })
                .collect()
        })
        .collect()
}

fn reduce_mod_p(p: u64, polys: &[IntegerPoly]) -> Vec<ReducedPoly> {
    let bp = BigInt::from(p);
    polys
        .iter()
        .map(|poly| ReducedPoly {
            terms: poly
                .iter()
                .filter_map(|(k, v)| {
                    let mut c = v % &bp;
                    if c.is_negative() {
                        c += &bp;
                    }
                    let c = c.to_u64().expect("residue fits");
                    (c != 0).then(|| (k.clone(), c))
                })
                .collect(),
        })
        .collect()
}

impl UniversalWittPolynomials {
    fn compute(p: u64, r: usize) -> Self {
        let nvars = 2 * r;
        let a: Vec<RationalPoly> = (0..r).map(|i| variable(i, nvars)).collect();
        let b: Vec<RationalPoly> = (0..r).map(|i| variable(r + i, nvars)).collect();
        let wa: Vec<RationalPoly> = (0..r).map(|n| ghost(p, &a, n, nvars)).collect();
        let wb: Vec<RationalPoly> = (0..r).map(|n| ghost(p, &b, n, nvars)).collect();
        let sum_targets: Vec<RationalPoly> = wa
            .iter()
            .zip(&wb)
            .map(|(x, y)| {
                let mut s = x.clone();
                poly_add_into(&mut s, y, 1);
                s
            })
            .collect();
        let prod_targets: Vec<RationalPoly> =
            wa.iter().zip(&wb).map(|(x, y)| poly_mul(x, y)).collect();
        let neg_targets: Vec<RationalPoly> = wa
            .iter()
            .map(|x| poly_scale(x, &BigRational::from_integer(BigInt::from(-1))))
            .collect();
        let addition = to_integer(p, r, "addition", invert_ghost(p, &sum_targets, nvars));
        let multiplication = to_integer(
            p,
            r,
            "multiplication",
            invert_ghost(p, &prod_targets, nvars),
        );
        let negation = to_integer(p, r, "negation", invert_ghost(p, &neg_targets, nvars));
        UniversalWittPolynomials {
            p,
            r,
            add_mod_p: reduce_mod_p(p, &addition),
            mul_mod_p: reduce_mod_p(p, &multiplication),
            neg_mod_p: reduce_mod_p(p, &negation),
            addition,
            multiplication,
            negation,
        }
    }

    /// Ghost components of integer inputs, for checking identities.
    pub fn ghost_value(p: u64, xs: &[BigInt], n: usize) -> BigInt {
        (0..=n)
            .map(|j| BigInt::from(p).pow(j as u32) * xs[j].pow(p.pow((n - j) as u32) as u32))
            .sum()
    }

    /// Evaluates an integer polynomial at integer points.
    pub fn eval_integer(poly: &IntegerPoly, a: &[BigInt], b: &[BigInt]) -> BigInt {
        let vals: Vec<&BigInt> = a.iter().chain(b).collect();
        poly.iter()
            .map(|(k, c)| {
                let mut t = c.clone();
                for (x, &e) in vals.iter().zip(k) {
                    if e > 0 {
                        t *= x.pow(e);
                    }
                }
                t
            })
            .sum()
    }
}

type PolyCache = Mutex<HashMap<(u64, usize), Arc<UniversalWittPolynomials>>>;

fn cache() -> &'static PolyCache {
    static CACHE: OnceLock<PolyCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Universal polynomials for `W_r` at prime `p`, computed on first use.
pub fn compute_universal_polynomials(p: u64, r: usize) -> Result<Arc<UniversalWittPolynomials>> {
    universal_polynomials_bounded(p, r, DEFAULT_SIZE_BOUND)
}

pub fn universal_polynomials_bounded(
    p: u64,
    r: usize,
    bound: u64,
) -> Result<Arc<UniversalWittPolynomials>> {
    WittParams::new(p, r)?;
    let size = p.checked_pow(r as u32);
    if size.is_none_or(|s| s > bound) {
        return Err(WittError::BoundExceeded { p, r, bound });
    }
    let mut guard = cache().lock().expect("polynomial cache poisoned");
    let entry = guard
        .entry((p, r))
        .or_insert_with(|| Arc::new(UniversalWittPolynomials::compute(p, r)));
    Ok(entry.clone())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WittVector<E> {
    pub params: WittParams,
    pub components: Vec<E>,
}

impl<E> WittVector<E> {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// `W_r(A)` for a coefficient ring `A` of characteristic p.
#[derive(Clone, Debug)]
pub struct WittRing<R: CommRing> {
    base: R,
    params: WittParams,
    polys: Arc<UniversalWittPolynomials>,
}

impl<R: CommRing> WittRing<R> {
    pub fn new(base: R, r: usize) -> Result<Self> {
        Self::with_bound(base, r, DEFAULT_SIZE_BOUND)
    }

    pub fn with_bound(base: R, r: usize, bound: u64) -> Result<Self> {
        let p = base.characteristic();
        let params = WittParams::new(p, r)?;
        let polys = universal_polynomials_bounded(p, r, bound)?;
        Ok(WittRing {
            base,
            params,
            polys,
        })
    }

    pub fn base(&self) -> &R {
        &self.base
    }

    pub fn params(&self) -> WittParams {
        self.params
    }

    pub fn p(&self) -> u64 {
        self.params.p
    }

    pub fn length(&self) -> usize {
        self.params.r
    }

    pub fn polynomials(&self) -> &UniversalWittPolynomials {
        &self.polys
    }

    pub fn vector(&self, components: Vec<R::Elem>) -> Result<WittVector<R::Elem>> {
        if components.len() != self.params.r {
            return Err(WittError::ParamsMismatch {
                left: self.params,
                right: WittParams {
                    p: self.params.p,
                    r: components.len(),
                },
            });
        }
        Ok(WittVector {
            params: self.params,
            components,
        })
    }

    fn check(&self, x: &WittVector<R::Elem>) -> Result<()> {
        if x.params != self.params || x.components.len() != self.params.r {
            return Err(WittError::ParamsMismatch {
                left: self.params,
                right: x.params,
            });
        }
        Ok(())
    }

    fn eval(&self, poly: &ReducedPoly, vars: &[&R::Elem]) -> R::Elem {
        let base = &self.base;
        let mut acc = base.zero();
        for (exps, c) in &poly.terms {
            let mut t = base.from_int(*c as i64);
            for (x, &e) in vars.iter().zip(exps) {
                if e > 0 {
                    t = base.mul(&t, &base.pow(x, e as u64));
                }
            }
            acc = base.add(&acc, &t);
        }
        acc
    }

    fn binary(
        &self,
        polys: &[ReducedPoly],
        x: &WittVector<R::Elem>,
        y: &WittVector<R::Elem>,
    ) -> Result<WittVector<R::Elem>> {
        self.check(x)?;
        self.check(y)?;
        let vars: Vec<&R::Elem> = x.components.iter().chain(&y.components).collect();
        Ok(WittVector {
            params: self.params,
            components: polys.iter().map(|poly| self.eval(poly, &vars)).collect(),
        })
    }

    pub fn try_add(
        &self,
        x: &WittVector<R::Elem>,
        y: &WittVector<R::Elem>,
    ) -> Result<WittVector<R::Elem>> {
        self.binary(&self.polys.add_mod_p, x, y)
    }

    pub fn try_mul(
        &self,
        x: &WittVector<R::Elem>,
        y: &WittVector<R::Elem>,
    ) -> Result<WittVector<R::Elem>> {
        self.binary(&self.polys.mul_mod_p, x, y)
    }

    pub fn try_neg(&self, x: &WittVector<R::Elem>) -> Result<WittVector<R::Elem>> {
        let zero = self.zero_vector();
        self.binary(&self.polys.neg_mod_p, x, &zero)
    }

    fn zero_vector(&self) -> WittVector<R::Elem> {
        WittVector {
            params: self.params,
            components: vec![self.base.zero(); self.params.r],
        }
    }

    /// `(a_0, ..., a_{r-1}) -> (0, a_0, ..., a_{r-2})`.
    pub fn verschiebung(&self, x: &WittVector<R::Elem>) -> WittVector<R::Elem> {
        let mut components = vec![self.base.zero()];
        components.extend(x.components[..x.components.len() - 1].iter().cloned());
        WittVector {
            params: x.params,
            components,
        }
    }

    /// Componentwise p-th power.
    pub fn frobenius(&self, x: &WittVector<R::Elem>) -> WittVector<R::Elem> {
        WittVector {
            params: x.params,
            components: x
                .components
                .iter()
                .map(|a| self.base.pow(a, self.params.p))
                .collect(),
        }
    }

    pub fn teichmuller(&self, a: &R::Elem) -> WittVector<R::Elem> {
        let mut components = vec![self.base.zero(); self.params.r];
        components[0] = a.clone();
        WittVector {
            params: self.params,
            components,
        }
    }

    /// Applies a ring map of `A` componentwise, which is `W_r` of that map.
    pub fn map_components<F>(&self, x: &WittVector<R::Elem>, f: F) -> WittVector<R::Elem>
    where
        F: Fn(&R::Elem) -> R::Elem,
    {
        WittVector {
            params: x.params,
            components: x.components.iter().map(f).collect(),
        }
    }

    /// The ring `W_s(A)` for another length `s`, sharing the coefficient ring.
    pub fn with_length(&self, s: usize) -> Result<WittRing<R>>
    where
        R: Clone,
    {
        WittRing::new(self.base.clone(), s)
    }
}

/// The truncation `W_s -> W_r`, dropping trailing components.
pub fn truncate<E: Clone>(x: &WittVector<E>, r: usize) -> Result<WittVector<E>> {
    let s = x.components.len();
    if r > s || r == 0 {
        return Err(WittError::TruncationTooLong { s, r });
    }
    Ok(WittVector {
        params: WittParams { p: x.params.p, r },
        components: x.components[..r].to_vec(),
    })
}

/// Extends `x` in `W_r` by zeros to length `s`; not a ring map, used to build
/// `V^{s-r}` from `W_r` into `W_s`.
pub fn pad<E: Clone>(x: &WittVector<E>, s: usize, zero: E) -> WittVector<E> {
    let mut components = x.components.clone();
    components.resize(s, zero);
    WittVector {
        params: WittParams { p: x.params.p, r: s },
        components,
    }
}

impl<R: CommRing> CommRing for WittRing<R> {
    type Elem = WittVector<R::Elem>;

    fn zero(&self) -> Self::Elem {
        self.zero_vector()
    }

    fn one(&self) -> Self::Elem {
        self.teichmuller(&self.base.one())
    }

    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.try_add(a, b).expect("Witt parameters match")
    }

    fn neg(&self, a: &Self::Elem) -> Self::Elem {
        self.try_neg(a).expect("Witt parameters match")
    }

    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.try_mul(a, b).expect("Witt parameters match")
    }

    fn characteristic(&self) -> u64 {
        self.params.p.pow(self.params.r as u32)
    }

    fn elements(&self) -> Vec<Self::Elem> {
        let base = self.base.elements();
        let mut out: Vec<Vec<R::Elem>> = vec![vec![]];
        for _ in 0..self.params.r {
            let mut next = Vec::with_capacity(out.len() * base.len());
            for prefix in &out {
                for b in &base {
                    let mut v = prefix.clone();
                    v.push(b.clone());
                    next.push(v);
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|components| WittVector {
                params: self.params,
                components,
            })
            .collect()
    }
}
