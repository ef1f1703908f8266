//! Graded p-local coefficient rings and sparse exact polynomial arithmetic in
//! the generators `v_1, v_2, ...`.
//!
//! A [`RingSpec`] describes which coefficient ring is modelled; a [`CoefElem`]
//! is a sparse element of it. Coefficients are exact: arbitrary precision
//! rationals for the rational and p-local kinds, canonical residues in
//! `[0, p^r)` for the finite kinds.
//!
//! Cohomological degrees follow `|v_k| = -2(p^k - 1)`. Monomials of degree
//! below `-degree_cutoff` are discarded after every operation.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default degree window: large enough that no computation in this crate
/// ever reaches it unless a caller asks for a tighter one.
pub const DEFAULT_DEGREE_CUTOFF: u32 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("ring spec mismatch: {left} vs {right}")]
    SpecMismatch { left: String, right: String },
    #[error("coefficient of {monomial} is not p-integral for p = {p}")]
    NotPIntegral { monomial: String, p: u64 },
    #[error("no ring map {from} -> {to}")]
    IllegalReduction { from: String, to: String },
    #[error("invalid ring spec: {0}")]
    InvalidSpec(String),
    #[error("{ring} has no maximal graded ideal")]
    NoMaximalIdeal { ring: String },
    #[error("{elem} is not invertible in {ring}")]
    NotInvertible { elem: String, ring: String },
    #[error("cannot parse coefficient \"{input}\": {reason}")]
    Parse { input: String, reason: String },
}

pub type Result<T> = std::result::Result<T, RingError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RingKind {
    /// `Q[v_1, ..., v_n]`, the rationalization used to build logarithms.
    RationalVPoly,
    /// `Z_(p)[v_1, ..., v_n]`: BP* with `v_{>n}` dropped.
    BPTruncated,
    /// `BP*/I_h = F_p[v_h, ..., v_n]`.
    BPQuotient { h: usize },
    /// `Z_(p)[v_1, ..., v_n, v_n^{-1}]`.
    EnRing,
    /// `Z/p^r[v_n, v_n^{-1}]`.
    KprRing,
}

/// Description of a graded coefficient ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingSpec {
    pub kind: RingKind,
    pub p: u64,
    pub r: u32,
    pub n: usize,
    pub degree_cutoff: u32,
}

/// Ideal selectors used when reducing coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ideal {
    Zero,
    /// The maximal graded ideal `m_0`.
    M0,
    /// `I_h = (p, v_1, ..., v_{h-1})`.
    I(usize),
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// p-adic valuation of a nonzero integer.
pub fn p_valuation(x: &BigInt, p: u64) -> u32 {
    debug_assert!(!x.is_zero());
    let p = BigInt::from(p);
    let mut x = x.clone();
    let mut v = 0;
    loop {
        let (q, r) = x.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        x = q;
        v += 1;
    }
}

/// p-adic valuation of a nonzero rational.
pub fn p_valuation_q(x: &BigRational, p: u64) -> i64 {
    p_valuation(x.numer(), p) as i64 - p_valuation(x.denom(), p) as i64
}

pub(crate) fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

impl RingSpec {
    fn build(kind: RingKind, p: u64, r: u32, n: usize) -> Result<RingSpec> {
        let spec = RingSpec { kind, p, r, n, degree_cutoff: DEFAULT_DEGREE_CUTOFF };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rational(p: u64, n: usize) -> Result<RingSpec> {
        Self::build(RingKind::RationalVPoly, p, 1, n)
    }

    pub fn bp(p: u64, n: usize) -> Result<RingSpec> {
        Self::build(RingKind::BPTruncated, p, 1, n)
    }

    pub fn bp_mod_ideal(p: u64, h: usize, n: usize) -> Result<RingSpec> {
        Self::build(RingKind::BPQuotient { h }, p, 1, n)
    }

    pub fn en(p: u64, n: usize) -> Result<RingSpec> {
        Self::build(RingKind::EnRing, p, 1, n)
    }

    pub fn kpr(p: u64, r: u32, n: usize) -> Result<RingSpec> {
        Self::build(RingKind::KprRing, p, r, n)
    }

    pub fn with_cutoff(mut self, cutoff: u32) -> Result<RingSpec> {
        if cutoff % 2 != 0 {
            return Err(RingError::InvalidSpec(format!("degree cutoff {cutoff} must be even")));
        }
        self.degree_cutoff = cutoff;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !is_prime(self.p) {
            return Err(RingError::InvalidSpec(format!("{} is not prime", self.p)));
        }
        if self.r == 0 {
            return Err(RingError::InvalidSpec("r must be positive".into()));
        }
        if self.r > 1 && self.kind != RingKind::KprRing {
            return Err(RingError::InvalidSpec("r > 1 only makes sense for K_{p^r}(n)".into()));
        }
        match self.kind {
            RingKind::EnRing | RingKind::KprRing if self.n == 0 => {
                Err(RingError::InvalidSpec("height n must be at least 1".into()))
            }
            RingKind::BPQuotient { h } if h == 0 || h > self.n => Err(RingError::InvalidSpec(
                format!("quotient height {h} must lie in 1..={}", self.n),
            )),
            _ if self.degree_cutoff % 2 != 0 => {
                Err(RingError::InvalidSpec("degree cutoff must be even".into()))
            }
            _ => Ok(()),
        }
    }

    /// `|v_k| = -2(p^k - 1)`, for `k >= 1`.
    pub fn generator_degree(&self, k: usize) -> i64 {
        -2 * ((self.p as i64).pow(k as u32) - 1)
    }

    pub fn generator_degrees(&self) -> Vec<i64> {
        (1..=self.n).map(|k| self.generator_degree(k)).collect()
    }

    pub fn is_laurent(&self) -> bool {
        matches!(self.kind, RingKind::EnRing | RingKind::KprRing)
    }

    /// Whether coefficients are residues modulo a prime power.
    pub fn modulus(&self) -> Option<BigInt> {
        match self.kind {
            RingKind::KprRing => Some(BigInt::from(self.p).pow(self.r)),
            RingKind::BPQuotient { .. } => Some(BigInt::from(self.p)),
            _ => None,
        }
    }

    pub fn is_integral(&self) -> bool {
        self.kind != RingKind::RationalVPoly
    }

    /// Whether generator `v_k` (1-based) survives in this ring.
    pub fn is_live(&self, k: usize) -> bool {
        if k == 0 || k > self.n {
            return false;
        }
        match self.kind {
            RingKind::KprRing => k == self.n,
            RingKind::BPQuotient { h } => k >= h,
            _ => true,
        }
    }

    pub fn descriptor(&self) -> String {
        match self.kind {
            RingKind::RationalVPoly => format!("Q[v1..v{}] (p={})", self.n, self.p),
            RingKind::BPTruncated => format!("BP*<=v{} (p={})", self.n, self.p),
            RingKind::BPQuotient { h } => format!("BP*/I_{h}<=v{} (p={})", self.n, self.p),
            RingKind::EnRing => format!("E({})* (p={})", self.n, self.p),
            RingKind::KprRing => format!("K_{{{}^{}}}({})*", self.p, self.r, self.n),
        }
    }

    pub fn monomial_degree(&self, exps: &[i32]) -> i64 {
        exps.iter()
            .enumerate()
            .map(|(i, &e)| e as i64 * self.generator_degree(i + 1))
            .sum()
    }

    fn in_window(&self, exps: &[i32]) -> bool {
        self.monomial_degree(exps) >= -(self.degree_cutoff as i64)
    }

    /// Normal form of a scalar: `None` when it vanishes in this ring.
    fn normalize_scalar(&self, c: BigRational, exps: &[i32]) -> Result<Option<BigRational>> {
        if c.is_zero() {
            return Ok(None);
        }
        if self.is_integral() && p_valuation(c.denom(), self.p) > 0 {
            return Err(RingError::NotPIntegral {
                monomial: format_monomial(exps),
                p: self.p,
            });
        }
        match self.modulus() {
            None => Ok(Some(c)),
            Some(m) => {
                let inv = mod_inverse(c.denom(), &m).expect("p-integral denominator");
                let res = (c.numer() * inv).mod_floor(&m);
                Ok(if res.is_zero() { None } else { Some(BigRational::from_integer(res)) })
            }
        }
    }

    fn check_exponents(&self, exps: &[i32]) -> Result<()> {
        if exps.len() != self.n {
            return Err(RingError::InvalidSpec(format!(
                "monomial {} has {} exponents, ring has {} generators",
                format_monomial(exps),
                exps.len(),
                self.n
            )));
        }
        for (i, &e) in exps.iter().enumerate() {
            let k = i + 1;
            if e != 0 && !self.is_live(k) {
                return Err(RingError::InvalidSpec(format!("v{k} is zero in {}", self.descriptor())));
            }
            if e < 0 && !(self.is_laurent() && k == self.n) {
                return Err(RingError::InvalidSpec(format!("v{k} is not invertible in {}", self.descriptor())));
            }
        }
        Ok(())
    }

    /// Whether the canonical ring map `self -> target` exists.
    pub fn maps_to(&self, target: &RingSpec) -> bool {
        use RingKind::*;
        if self.p != target.p {
            return false;
        }
        match (self.kind, target.kind) {
            (RationalVPoly, RationalVPoly) | (RationalVPoly, BPTruncated) | (BPTruncated, BPTruncated) => {
                target.n <= self.n
            }
            (RationalVPoly | BPTruncated, BPQuotient { .. }) => target.n <= self.n,
            (BPQuotient { h }, BPQuotient { h: h2 }) => h <= h2 && target.n <= self.n,
            (BPQuotient { h }, KprRing) => target.r == 1 && target.n == h && h <= self.n,
            (RationalVPoly | BPTruncated, EnRing | KprRing) => target.n <= self.n,
            (EnRing, EnRing | KprRing) => target.n == self.n,
            (KprRing, KprRing) => target.n == self.n && target.r <= self.r,
            _ => false,
        }
    }

    /// Generators of `m_0` are `p` (when not already zero) and the listed `v_k`.
    fn ideal_generators(&self, ideal: Ideal) -> Result<(bool, Vec<usize>)> {
        let all_live: Vec<usize> = (1..=self.n).filter(|&k| self.is_live(k)).collect();
        match ideal {
            Ideal::Zero => Ok((false, vec![])),
            Ideal::I(h) => {
                if self.kind == RingKind::RationalVPoly {
                    return Err(RingError::NoMaximalIdeal { ring: self.descriptor() });
                }
                Ok((true, (1..h).filter(|&k| self.is_live(k)).collect()))
            }
            Ideal::M0 => match self.kind {
                RingKind::RationalVPoly => Err(RingError::NoMaximalIdeal { ring: self.descriptor() }),
                RingKind::BPTruncated | RingKind::BPQuotient { .. } => Ok((true, all_live)),
                RingKind::EnRing => Ok((true, (1..self.n).collect())),
                RingKind::KprRing => Ok((self.r > 1, vec![])),
            },
        }
    }

    /// Smallest `i` with `m_0^i = 0`, when `m_0` is nilpotent.
    pub fn m0_nilpotency(&self) -> Option<u32> {
        match self.kind {
            RingKind::KprRing => Some(self.r),
            _ => None,
        }
    }
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

pub fn format_monomial(exps: &[i32]) -> String {
    let parts: Vec<String> = exps
        .iter()
        .enumerate()
        .filter(|(_, &e)| e != 0)
        .map(|(i, &e)| if e == 1 { format!("v{}", i + 1) } else { format!("v{}^{}", i + 1, e) })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

fn format_scalar(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

/// A sparse element of the ring described by `spec`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefElem {
    spec: RingSpec,
    terms: BTreeMap<Vec<i32>, BigRational>,
}

impl CoefElem {
    pub fn zero(spec: RingSpec) -> Self {
        CoefElem { spec, terms: BTreeMap::new() }
    }

    pub fn one(spec: RingSpec) -> Self {
        Self::from_int(spec, 1)
    }

    pub fn from_int(spec: RingSpec, c: i64) -> Self {
        Self::scalar(spec, BigRational::from_integer(c.into())).expect("integers are p-integral")
    }

    pub fn scalar(spec: RingSpec, c: BigRational) -> Result<Self> {
        Self::monomial(spec, c, &vec![0; spec.n])
    }

    /// The generator `v_k`.
    pub fn generator(spec: RingSpec, k: usize) -> Result<Self> {
        let mut exps = vec![0; spec.n];
        if k == 0 || k > spec.n {
            return Err(RingError::InvalidSpec(format!("no generator v{k} in {spec}")));
        }
        exps[k - 1] = 1;
        Self::monomial(spec, BigRational::one(), &exps)
    }

    pub fn monomial(spec: RingSpec, c: BigRational, exps: &[i32]) -> Result<Self> {
        spec.check_exponents(exps)?;
        let mut out = Self::zero(spec);
        if spec.in_window(exps) {
            if let Some(c) = spec.normalize_scalar(c, exps)? {
                out.terms.insert(exps.to_vec(), c);
            }
        }
        Ok(out)
    }

    pub fn from_terms<I>(spec: RingSpec, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i32>, BigRational)>,
    {
        let mut out = Self::zero(spec);
        for (exps, c) in terms {
            spec.check_exponents(&exps)?;
            out.accumulate(exps, c)?;
        }
        Ok(out)
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self.terms.iter().all(|(e, c)| e.iter().all(|&x| x == 0) && c.is_one())
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> BigRational {
        self.terms.get(&vec![0; self.spec.n]).cloned().unwrap_or_else(BigRational::zero)
    }

    fn accumulate(&mut self, exps: Vec<i32>, c: BigRational) -> Result<()> {
        if !self.spec.in_window(&exps) {
            return Ok(());
        }
        let total = match self.terms.remove(&exps) {
            Some(prev) => prev + c,
            None => c,
        };
        if let Some(v) = self.spec.normalize_scalar(total, &exps)? {
            self.terms.insert(exps, v);
        }
        Ok(())
    }

    // Inputs to the internal arithmetic are already normalized, so sums and
    // products stay p-integral and `accumulate` cannot fail.
    fn push(&mut self, exps: Vec<i32>, c: BigRational) {
        self.accumulate(exps, c).expect("closed under ring operations");
    }

    fn check_same(&self, other: &CoefElem) -> Result<()> {
        if self.spec != other.spec {
            return Err(RingError::SpecMismatch {
                left: self.spec.descriptor(),
                right: other.spec.descriptor(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &CoefElem) -> Result<CoefElem> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.push(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &CoefElem) -> Result<CoefElem> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.push(e.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &CoefElem) -> Result<CoefElem> {
        self.check_same(other)?;
        let mut out = CoefElem::zero(self.spec);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let exps: Vec<i32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.push(exps, c1 * c2);
            }
        }
        Ok(out)
    }

    /// `self += a * b`, without intermediate allocation of the product.
    pub(crate) fn add_mul_assign(&mut self, a: &CoefElem, b: &CoefElem) {
        for (e1, c1) in &a.terms {
            for (e2, c2) in &b.terms {
                let exps: Vec<i32> = e1.iter().zip(e2).map(|(x, y)| x + y).collect();
                self.push(exps, c1 * c2);
            }
        }
    }

    pub(crate) fn add_assign_ref(&mut self, other: &CoefElem) {
        for (e, c) in &other.terms {
            self.push(e.clone(), c.clone());
        }
    }

    pub(crate) fn sub_assign_ref(&mut self, other: &CoefElem) {
        for (e, c) in &other.terms {
            self.push(e.clone(), -c.clone());
        }
    }

    pub fn neg(&self) -> CoefElem {
        let mut out = CoefElem::zero(self.spec);
        for (e, c) in &self.terms {
            out.push(e.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> Result<CoefElem> {
        let mut out = CoefElem::zero(self.spec);
        for (e, c) in &self.terms {
            out.accumulate(e.clone(), c * k)?;
        }
        Ok(out)
    }

    pub fn scale_int(&self, k: i64) -> CoefElem {
        self.scale(&BigRational::from_integer(k.into())).expect("integer scaling")
    }

    pub fn pow(&self, e: u64) -> CoefElem {
        let mut result = CoefElem::one(self.spec);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Cohomological degree, if the element is a nonzero homogeneous one.
    pub fn degree(&self) -> Option<i64> {
        let mut degs = self.terms.keys().map(|e| self.spec.monomial_degree(e));
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.is_zero() || self.degree().is_some()
    }

    /// Canonical representative modulo `ideal`, in the same ring.
    ///
    /// When the ideal contains `p`, coefficients are replaced by their residue
    /// in `[0, p)`.
    pub fn reduce_mod(&self, ideal: Ideal) -> Result<CoefElem> {
        let (kill_p, gens) = self.spec.ideal_generators(ideal)?;
        let p = BigInt::from(self.spec.p);
        let mut out = CoefElem::zero(self.spec);
        for (e, c) in &self.terms {
            if gens.iter().any(|&k| e[k - 1] > 0) {
                continue;
            }
            let c = if kill_p {
                let inv = mod_inverse(c.denom(), &p).expect("p-integral");
                let res = (c.numer() * inv).mod_floor(&p);
                BigRational::from_integer(res)
            } else {
                c.clone()
            };
            out.push(e.clone(), c);
        }
        Ok(out)
    }

    pub fn in_ideal(&self, ideal: Ideal) -> Result<bool> {
        Ok(self.reduce_mod(ideal)?.is_zero())
    }

    /// `m_0`-adic order: the largest `i` with `self` in `m_0^i`.
    /// `None` for zero.
    pub fn m0_order(&self) -> Result<Option<u32>> {
        let (kill_p, gens) = self.spec.ideal_generators(Ideal::M0)?;
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                let pv = if kill_p { p_valuation(c.numer(), self.spec.p) } else { 0 };
                pv + gens.iter().map(|&k| e[k - 1].max(0) as u32).sum::<u32>()
            })
            .min())
    }

    /// Unit test in the ring (for `E(n)*` in its `I_n`-completion, matching
    /// the graded-local convention).
    pub fn is_unit(&self) -> bool {
        if self.is_zero() {
            return false;
        }
        let p = self.spec.p;
        match self.spec.kind {
            RingKind::RationalVPoly => self.terms.len() == 1 && self.degree() == Some(0),
            RingKind::BPTruncated => {
                self.terms.len() == 1
                    && self.degree() == Some(0)
                    && p_valuation(self.constant_term().numer(), p) == 0
            }
            RingKind::BPQuotient { .. } => self.terms.len() == 1 && self.degree() == Some(0),
            RingKind::KprRing => {
                let red = self.reduce_mod(Ideal::I(1)).expect("p is a non-unit");
                red.terms.len() == 1
            }
            RingKind::EnRing => {
                if !self.is_homogeneous() {
                    return false;
                }
                let red = self.reduce_mod(Ideal::M0).expect("E(n) is local");
                !red.is_zero()
            }
        }
    }

    /// Exact inverse, when it exists as a finite expression.
    pub fn inverse(&self) -> Result<CoefElem> {
        let err = || RingError::NotInvertible { elem: self.to_string(), ring: self.spec.descriptor() };
        if !self.is_unit() {
            return Err(err());
        }
        match self.spec.kind {
            RingKind::KprRing => {
                // self = lead * (1 + t) with t in (p), so t^r = 0.
                let red = self.reduce_mod(Ideal::I(1))?;
                let (exps, c) = red.terms.iter().next().map(|(e, c)| (e.clone(), c.clone())).unwrap();
                let m = self.spec.modulus().unwrap();
                let cinv = mod_inverse(c.numer(), &m).ok_or_else(err)?;
                let inv_exps: Vec<i32> = exps.iter().map(|x| -x).collect();
                let lead_inv = CoefElem::monomial(self.spec, BigRational::from_integer(cinv), &inv_exps)?;
                let t = &(&lead_inv * self) - &CoefElem::one(self.spec);
                let mut sum = CoefElem::one(self.spec);
                let mut power = CoefElem::one(self.spec);
                for _ in 1..self.spec.r {
                    power = &power * &t.neg();
                    sum = &sum + &power;
                }
                Ok(&sum * &lead_inv)
            }
            RingKind::EnRing => {
                if self.terms.len() != 1 {
                    return Err(err());
                }
                let (e, c) = self.terms.iter().next().unwrap();
                if e[..self.spec.n - 1].iter().any(|&x| x != 0) {
                    return Err(err());
                }
                let inv: Vec<i32> = e.iter().map(|x| -x).collect();
                CoefElem::monomial(self.spec, c.recip(), &inv)
            }
            _ => {
                let c = self.constant_term();
                CoefElem::scalar(self.spec, c.recip())
            }
        }
    }

    /// Image under the canonical ring map to `target`.
    pub fn reduce_to(&self, target: &RingSpec) -> Result<CoefElem> {
        if !self.spec.maps_to(target) {
            return Err(RingError::IllegalReduction {
                from: self.spec.descriptor(),
                to: target.descriptor(),
            });
        }
        let mut out = CoefElem::zero(*target);
        for (e, c) in &self.terms {
            if target.is_integral() && p_valuation(c.denom(), target.p) > 0 {
                return Err(RingError::NotPIntegral { monomial: format_monomial(e), p: target.p });
            }
            let killed = e.iter().enumerate().any(|(i, &x)| x > 0 && !target.is_live(i + 1));
            if killed {
                continue;
            }
            let exps = e[..target.n].to_vec();
            out.accumulate(exps, c.clone())?;
        }
        Ok(out)
    }

    /// Sum of coefficients after `v_n -> 1`, as a residue mod `p^r`.
    /// Only meaningful for `K_{p^r}(n)`.
    pub fn specialize_kpr(&self) -> BigInt {
        let m = self.spec.modulus().expect("finite coefficient ring");
        self.terms.values().fold(BigInt::zero(), |acc, c| (acc + c.numer()).mod_floor(&m))
    }

    /// Canonical ordering key of a monomial: decreasing degree, then
    /// lexicographic exponent vector.
    fn order_key(&self, exps: &[i32]) -> (i64, Vec<i32>) {
        (-self.spec.monomial_degree(exps), exps.to_vec())
    }

    pub fn sorted_terms(&self) -> Vec<(&Vec<i32>, &BigRational)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| self.order_key(a.0).cmp(&self.order_key(b.0)));
        v
    }

    /// Parse the canonical text form, e.g. `4 + 4*v1 - 1/3*v1^2*v2^-1`.
    pub fn parse(spec: RingSpec, input: &str) -> Result<CoefElem> {
        let perr = |reason: &str| RingError::Parse { input: input.to_string(), reason: reason.to_string() };
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(perr("empty input"));
        }
        let mut chunks: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        let mut prev: Option<char> = None;
        for ch in s.chars() {
            let sign_here = (ch == '+' || ch == '-') && !matches!(prev, None | Some('^'));
            if sign_here {
                chunks.push((neg, std::mem::take(&mut cur)));
                neg = ch == '-';
            } else if ch == '-' && prev.is_none() {
                neg = true;
            } else {
                cur.push(ch);
            }
            prev = Some(ch);
        }
        chunks.push((neg, cur));
        let mut out = CoefElem::zero(spec);
        for (neg, chunk) in chunks {
            if chunk.is_empty() {
                return Err(perr("dangling sign"));
            }
            let mut c = BigRational::one();
            let mut exps = vec![0i32; spec.n];
            for factor in chunk.split('*') {
                if let Some(rest) = factor.strip_prefix('v') {
                    let (idx, pow) = match rest.split_once('^') {
                        Some((i, e)) => (i, e.parse::<i32>().map_err(|_| perr("bad exponent"))?),
                        None => (rest, 1),
                    };
                    let k: usize = idx.parse().map_err(|_| perr("bad generator index"))?;
                    if k == 0 || k > spec.n {
                        return Err(perr("generator out of range"));
                    }
                    exps[k - 1] += pow;
                } else {
                    let q = match factor.split_once('/') {
                        Some((a, b)) => {
                            let a: BigInt = a.parse().map_err(|_| perr("bad numerator"))?;
                            let b: BigInt = b.parse().map_err(|_| perr("bad denominator"))?;
                            if b.is_zero() {
                                return Err(perr("zero denominator"));
                            }
                            BigRational::new(a, b)
                        }
                        None => BigRational::from_integer(factor.parse().map_err(|_| perr("bad integer"))?),
                    };
                    c *= q;
                }
            }
            if neg {
                c = -c;
            }
            spec.check_exponents(&exps)?;
            out.accumulate(exps, c)?;
        }
        Ok(out)
    }

    /// Small integer value of a constant element, if it is one.
    pub fn as_small_int(&self) -> Option<i64> {
        if self.is_zero() {
            return Some(0);
        }
        if self.terms.len() != 1 || self.degree() != Some(0) {
            return None;
        }
        let c = self.constant_term();
        c.is_integer().then(|| c.numer().to_i64()).flatten()
    }
}

impl fmt::Display for CoefElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (e, c)) in self.sorted_terms().into_iter().enumerate() {
            let constant = e.iter().all(|&x| x == 0);
            let body = if constant {
                format_scalar(&c.abs())
            } else if c.abs().is_one() {
                format_monomial(e)
            } else {
                format!("{}*{}", format_scalar(&c.abs()), format_monomial(e))
            };
            match (i, c.is_negative()) {
                (0, false) => write!(f, "{body}")?,
                (0, true) => write!(f, "-{body}")?,
                (_, false) => write!(f, " + {body}")?,
                (_, true) => write!(f, " - {body}")?,
            }
        }
        Ok(())
    }
}

impl PartialOrd for CoefElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        (self.spec == other.spec).then(|| self.to_string().cmp(&other.to_string()))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $inner:ident) => {
        impl<'a> std::ops::$tr<&'a CoefElem> for &'a CoefElem {
            type Output = CoefElem;
            fn $m(self, rhs: &'a CoefElem) -> CoefElem {
                self.$inner(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}
binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn additive_inverse_cancels() {
        let s = RingSpec::bp(2, 2).unwrap();
        let v1 = CoefElem::generator(s, 1).unwrap();
        let v2 = CoefElem::generator(s, 2).unwrap();
        let sum = &(&v1 + &v2) + &v1.neg();
        assert_eq!(sum, v2);
        assert_eq!(sum.to_string(), "v2");
    }

    #[test]
    fn laurent_monomial_product() {
        let s = RingSpec::kpr(2, 1, 1).unwrap();
        let v1 = CoefElem::generator(s, 1).unwrap();
        assert_eq!((&v1 * &v1).to_string(), "v1^2");
        let inv = v1.inverse().unwrap();
        assert_eq!(inv.to_string(), "v1^-1");
        assert!((&inv * &v1).is_one());
    }

    #[test]
    fn square_of_two_plus_v1_at_p2() {
        // (2 + v1)^2 = 4 + 4 v1 + v1^2, by hand.
        let s = RingSpec::bp(2, 1).unwrap();
        let a = CoefElem::parse(s, "2 + v1").unwrap();
        assert_eq!((&a * &a).to_string(), "4 + 4*v1 + v1^2");
    }

    #[test]
    fn reductions() {
        let bp = RingSpec::bp(2, 2).unwrap();
        let e1 = RingSpec::en(2, 1).unwrap();
        let v2 = CoefElem::generator(bp, 2).unwrap();
        assert!(v2.reduce_to(&e1).unwrap().is_zero());

        let k = RingSpec::kpr(2, 1, 1).unwrap();
        let two_v1 = CoefElem::parse(e1, "2*v1").unwrap();
        assert!(two_v1.reduce_to(&k).unwrap().is_zero());

        let rat = RingSpec::rational(2, 1).unwrap();
        let half_v1 = CoefElem::monomial(rat, q(1, 2), &[1]).unwrap();
        let err = half_v1.reduce_to(&RingSpec::bp(2, 1).unwrap()).unwrap_err();
        assert_eq!(err, RingError::NotPIntegral { monomial: "v1".into(), p: 2 });

        assert!(matches!(
            v2.reduce_to(&RingSpec::rational(2, 2).unwrap()),
            Err(RingError::IllegalReduction { .. })
        ));
    }

    #[test]
    fn p_local_denominators_survive_in_bp() {
        let bp = RingSpec::bp(2, 1).unwrap();
        let third = CoefElem::scalar(bp, q(1, 3)).unwrap();
        assert_eq!(third.to_string(), "1/3");
        assert!(third.is_unit());
        let k4 = RingSpec::kpr(2, 2, 1).unwrap();
        // 1/3 = 3 mod 4
        assert_eq!(third.reduce_to(&k4).unwrap().to_string(), "3");
    }

    #[test]
    fn unit_detection_in_kpr() {
        let k2 = RingSpec::kpr(2, 1, 1).unwrap();
        assert!(CoefElem::generator(k2, 1).unwrap().is_unit());

        let k4 = RingSpec::kpr(2, 2, 1).unwrap();
        let two = CoefElem::from_int(k4, 2);
        assert!(!two.is_unit());
        assert!(two.inverse().is_err());

        let a = CoefElem::parse(k4, "v1 + 2*v1^2").unwrap();
        assert!(a.is_unit());
        // inverse exhibited by hand: v1^-1 - 2
        let inv = a.inverse().unwrap();
        assert_eq!(inv, CoefElem::parse(k4, "v1^-1 - 2").unwrap());
        assert!((&a * &inv).is_one());
    }

    #[test]
    fn spec_mismatch_is_reported() {
        let a = CoefElem::one(RingSpec::bp(2, 1).unwrap());
        let b = CoefElem::one(RingSpec::bp(3, 1).unwrap());
        let err = a.try_add(&b).unwrap_err();
        assert!(err.to_string().contains("p=2") && err.to_string().contains("p=3"));
    }

    #[test]
    fn degree_window_drops_low_monomials() {
        let s = RingSpec::bp(2, 1).unwrap().with_cutoff(4).unwrap();
        let v1 = CoefElem::generator(s, 1).unwrap();
        assert_eq!((&v1 * &v1).to_string(), "v1^2");
        assert!((&(&v1 * &v1) * &v1).is_zero());
    }

    #[test]
    fn canonical_text_round_trips() {
        let s = RingSpec::en(3, 2).unwrap();
        let a = CoefElem::parse(s, "-1/2*v1^2*v2^-1 + 3 - v2").unwrap();
        assert_eq!(a.to_string(), "-1/2*v1^2*v2^-1 + 3 - v2");
        assert_eq!(CoefElem::parse(s, &a.to_string()).unwrap(), a);
    }

    #[test]
    fn ideals_and_orders() {
        let e2 = RingSpec::en(2, 2).unwrap();
        let a = CoefElem::parse(e2, "2*v2 + v1^3").unwrap();
        assert!(a.in_ideal(Ideal::M0).unwrap());
        assert_eq!(a.m0_order().unwrap(), Some(1));
        let b = CoefElem::parse(e2, "v2 + v1^3*v2^0").unwrap();
        assert!(b.is_unit());
        assert_eq!(b.reduce_mod(Ideal::M0).unwrap().to_string(), "v2");

        let k4 = RingSpec::kpr(2, 2, 1).unwrap();
        assert_eq!(CoefElem::from_int(k4, 2).m0_order().unwrap(), Some(1));
        assert_eq!(k4.m0_nilpotency(), Some(2));
        let rat = RingSpec::rational(2, 1).unwrap();
        assert!(CoefElem::one(rat).reduce_mod(Ideal::M0).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(RingSpec::bp(4, 1).is_err());
        assert!(RingSpec::kpr(2, 1, 0).is_err());
        assert!(RingSpec::bp_mod_ideal(2, 3, 2).is_err());
        assert!(RingSpec::bp(2, 1).unwrap().with_cutoff(3).is_err());
        assert_eq!(RingSpec::bp(3, 2).unwrap().generator_degrees(), vec![-4, -16]);
    }
}
