//! Truncated power series in one variable `u` and two variables `x, y`, all of
//! cohomological degree 2, over a [`RingSpec`].
//!
//! Storage is dense in the series variable and sparse in the `v`-generators.
//! Every series carries its truncation order `T` (terms `u^j` with `j < T`);
//! binary operations on series of different orders are rejected.

use std::fmt;

use num_rational::BigRational;
use serde_json::{json, Value};
use thiserror::Error;

use crate::ringcore::{CoefElem, Ideal, RingError, RingSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("truncation mismatch: u^{left} vs u^{right}")]
    TruncationMismatch { left: usize, right: usize },
    #[error("inner series has nonzero constant term {0}")]
    NonzeroConstant(String),
    #[error("linear coefficient {0} is not a unit")]
    NonUnitLinear(String),
    #[error("constant term {0} is not invertible")]
    NonUnitConstant(String),
    #[error("series is zero modulo the ideal (through u^{trunc})")]
    ZeroModIdeal { trunc: usize },
    #[error("result is only determined modulo u^{available}, u^{needed} was requested")]
    InsufficientPrecision { needed: usize, available: usize },
    #[error("series is not divisible by u^{0}")]
    NotDivisible(usize),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

/// `Σ_{j<T} c_j u^j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct USeries {
    spec: RingSpec,
    coeffs: Vec<CoefElem>,
}

impl USeries {
    pub fn zero(spec: RingSpec, trunc: usize) -> Self {
        assert!(trunc > 0, "truncation order must be positive");
        USeries { spec, coeffs: vec![CoefElem::zero(spec); trunc] }
    }

    pub fn one(spec: RingSpec, trunc: usize) -> Self {
        Self::monomial(CoefElem::one(spec), 0, trunc)
    }

    /// The coordinate `u`.
    pub fn var(spec: RingSpec, trunc: usize) -> Self {
        Self::monomial(CoefElem::one(spec), 1, trunc)
    }

    pub fn monomial(c: CoefElem, exp: usize, trunc: usize) -> Self {
        let mut s = Self::zero(*c.spec(), trunc);
        if exp < trunc {
            s.coeffs[exp] = c;
        }
        s
    }

    /// Build from coefficients; entries at or beyond `trunc` are dropped.
    pub fn from_coeffs(spec: RingSpec, trunc: usize, coeffs: Vec<CoefElem>) -> Result<Self> {
        let mut s = Self::zero(spec, trunc);
        for (j, c) in coeffs.into_iter().enumerate().take(trunc) {
            if c.spec() != &spec {
                return Err(RingError::SpecMismatch {
                    left: spec.descriptor(),
                    right: c.spec().descriptor(),
                }
                .into());
            }
            s.coeffs[j] = c;
        }
        Ok(s)
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn trunc(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, j: usize) -> &CoefElem {
        &self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[CoefElem] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, j: usize, c: CoefElem) {
        assert_eq!(c.spec(), &self.spec);
        self.coeffs[j] = c;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(CoefElem::is_zero)
    }

    /// Smallest exponent with a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    fn nonzero(&self) -> Vec<(usize, &CoefElem)> {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).collect()
    }

    fn check(&self, other: &USeries) -> Result<()> {
        if self.spec != other.spec {
            return Err(RingError::SpecMismatch {
                left: self.spec.descriptor(),
                right: other.spec.descriptor(),
            }
            .into());
        }
        if self.trunc() != other.trunc() {
            return Err(SeriesError::TruncationMismatch { left: self.trunc(), right: other.trunc() });
        }
        Ok(())
    }

    pub fn add(&self, other: &USeries) -> Result<USeries> {
        self.check(other)?;
        let mut out = self.clone();
        for (c, d) in out.coeffs.iter_mut().zip(&other.coeffs) {
            c.add_assign_ref(d);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &USeries) -> Result<USeries> {
        self.check(other)?;
        let mut out = self.clone();
        for (c, d) in out.coeffs.iter_mut().zip(&other.coeffs) {
            c.sub_assign_ref(d);
        }
        Ok(out)
    }

    pub fn neg(&self) -> USeries {
        USeries { spec: self.spec, coeffs: self.coeffs.iter().map(CoefElem::neg).collect() }
    }

    /// Multiply every coefficient by a ring element.
    pub fn scale(&self, c: &CoefElem) -> Result<USeries> {
        if c.spec() != &self.spec {
            return Err(RingError::SpecMismatch {
                left: self.spec.descriptor(),
                right: c.spec().descriptor(),
            }
            .into());
        }
        Ok(USeries { spec: self.spec, coeffs: self.coeffs.iter().map(|a| a * c).collect() })
    }

    pub fn scale_int(&self, k: i64) -> USeries {
        USeries { spec: self.spec, coeffs: self.coeffs.iter().map(|a| a.scale_int(k)).collect() }
    }

    /// Cauchy product truncated at `T`.
    pub fn mul(&self, other: &USeries) -> Result<USeries> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &USeries) -> USeries {
        let t = self.trunc();
        let mut out = USeries::zero(self.spec, t);
        let b = other.nonzero();
        for (i, a) in self.nonzero() {
            for &(j, c) in &b {
                if i + j >= t {
                    break;
                }
                out.coeffs[i + j].add_mul_assign(a, c);
            }
        }
        out
    }

    pub fn pow(&self, e: u64) -> USeries {
        let mut result = USeries::one(self.spec, self.trunc());
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_unchecked(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_unchecked(&base);
            }
        }
        result
    }

    /// `f(g(u))`, Horner evaluation; `g` must have zero constant term.
    pub fn compose(&self, g: &USeries) -> Result<USeries> {
        self.check(g)?;
        if !g.coeffs[0].is_zero() {
            return Err(SeriesError::NonzeroConstant(g.coeffs[0].to_string()));
        }
        let t = self.trunc();
        let v = match g.valuation() {
            None => return Ok(USeries::monomial(self.coeffs[0].clone(), 0, t)),
            Some(v) => v,
        };
        // Terms f_k g^k with k*v >= T vanish.
        let top = (t - 1) / v;
        let mut acc = USeries::monomial(self.coeffs[top].clone(), 0, t);
        for k in (0..top).rev() {
            acc = acc.mul_unchecked(g);
            acc.coeffs[0].add_assign_ref(&self.coeffs[k]);
        }
        Ok(acc)
    }

    /// `f(g(u))` modulo `u^target`, where `f` is known modulo `u^{T_f}` and `g`
    /// modulo `u^{T_g}`. The result is certified to be determined by the
    /// inputs; otherwise the attainable order is reported.
    ///
    /// When `g` has valuation `v`, the tail of `f` contributes only from
    /// `u^{T_f v}` on, and the tail of `g` only from `u^{(k-1)v + T_g}` for
    /// the smallest `k >= 1` with `f_k != 0`.
    pub fn compose_to(&self, g: &USeries, target: usize) -> Result<USeries> {
        if self.spec != g.spec {
            return Err(RingError::SpecMismatch {
                left: self.spec.descriptor(),
                right: g.spec.descriptor(),
            }
            .into());
        }
        if !g.coeffs[0].is_zero() {
            return Err(SeriesError::NonzeroConstant(g.coeffs[0].to_string()));
        }
        let available = self.determined_order(g);
        if available < target {
            return Err(SeriesError::InsufficientPrecision { needed: target, available });
        }
        let f = self.resized(target);
        let g = g.resized(target);
        f.compose(&g)
    }

    /// Order through which `self ∘ g` is determined by the known coefficients.
    pub fn determined_order(&self, g: &USeries) -> usize {
        let v = match g.valuation() {
            // g vanishes through its own precision; only f_0 matters below T_g.
            None => return if self.coeffs[1..].iter().all(|c| c.is_zero()) { usize::MAX } else { g.trunc() },
            Some(v) => v,
        };
        let from_f = self.trunc().saturating_mul(v);
        let from_g = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, c)| !c.is_zero())
            .map(|(k, _)| (k - 1) * v + g.trunc())
            .unwrap_or(usize::MAX);
        from_f.min(from_g)
    }

    /// Copy at a different truncation order: drops terms when shrinking, pads
    /// with zeros when growing. Growing is only correct for series known to be
    /// exact polynomials; callers state that by using this method.
    pub fn resized(&self, trunc: usize) -> USeries {
        let mut out = USeries::zero(self.spec, trunc);
        for (j, c) in self.coeffs.iter().enumerate().take(trunc) {
            out.coeffs[j] = c.clone();
        }
        out
    }

    /// Formal derivative.
    pub fn derivative(&self) -> USeries {
        let t = self.trunc();
        let mut out = USeries::zero(self.spec, t);
        for j in 1..t {
            out.coeffs[j - 1] = self.coeffs[j].scale_int(j as i64);
        }
        out
    }

    /// Multiplicative inverse; the constant term must be invertible.
    pub fn inverse(&self) -> Result<USeries> {
        let c0 = &self.coeffs[0];
        let c0_inv = c0.inverse().map_err(|_| SeriesError::NonUnitConstant(c0.to_string()))?;
        let t = self.trunc();
        let mut h = USeries::monomial(c0_inv, 0, 1);
        let mut prec = 1;
        while prec < t {
            prec = (2 * prec).min(t);
            let a = self.resized(prec);
            let h_ext = h.resized(prec);
            // h <- h (2 - a h)
            let ah = a.mul_unchecked(&h_ext);
            let two_minus = USeries::one(self.spec, prec).scale_int(2).sub(&ah)?;
            h = h_ext.mul_unchecked(&two_minus);
        }
        Ok(h)
    }

    /// Compositional inverse: `g` with `f(g(u)) = u` mod `u^T`.
    pub fn reversion(&self) -> Result<USeries> {
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::NonzeroConstant(self.coeffs[0].to_string()));
        }
        let t = self.trunc();
        if t < 2 {
            return Ok(USeries::zero(self.spec, t));
        }
        let a1 = &self.coeffs[1];
        let a1_inv = a1.inverse().map_err(|_| SeriesError::NonUnitLinear(a1.to_string()))?;
        let df = self.derivative();
        // Newton: g <- g - (f(g) - u) / f'(g), doubling the precision.
        let mut g = USeries::monomial(a1_inv, 1, 2);
        let mut prec = 2;
        while prec < t {
            prec = (2 * prec).min(t);
            let f = self.resized(prec);
            let g_ext = g.resized(prec);
            let resid = f.compose(&g_ext)?.sub(&USeries::var(self.spec, prec))?;
            let slope = df.resized(prec).compose(&g_ext)?.inverse()?;
            g = g_ext.sub(&resid.mul_unchecked(&slope))?;
        }
        Ok(g)
    }

    /// Smallest exponent whose coefficient survives reduction modulo `ideal`,
    /// with the (unreduced) coefficient.
    pub fn lowest_term(&self, ideal: Ideal) -> Result<(usize, CoefElem)> {
        for (j, c) in self.coeffs.iter().enumerate() {
            if !c.in_ideal(ideal)? {
                return Ok((j, c.clone()));
            }
        }
        Err(SeriesError::ZeroModIdeal { trunc: self.trunc() })
    }

    /// Coefficient-wise reduction modulo an ideal.
    pub fn reduce_mod(&self, ideal: Ideal) -> Result<USeries> {
        let coeffs = self.coeffs.iter().map(|c| c.reduce_mod(ideal)).collect::<std::result::Result<_, _>>()?;
        Ok(USeries { spec: self.spec, coeffs })
    }

    /// Image under the ring map to `target`.
    pub fn reduce_to(&self, target: &RingSpec) -> Result<USeries> {
        let coeffs = self.coeffs.iter().map(|c| c.reduce_to(target)).collect::<std::result::Result<_, _>>()?;
        Ok(USeries { spec: *target, coeffs })
    }

    /// Exact division by `u^k`; the result has order `T - k`.
    pub fn div_u_power(&self, k: usize) -> Result<USeries> {
        if k >= self.trunc() || self.coeffs[..k].iter().any(|c| !c.is_zero()) {
            return Err(SeriesError::NotDivisible(k));
        }
        Ok(USeries { spec: self.spec, coeffs: self.coeffs[k..].to_vec() })
    }

    /// Multiply by `u^k` keeping the truncation order.
    pub fn shift(&self, k: usize) -> USeries {
        let t = self.trunc();
        let mut out = USeries::zero(self.spec, t);
        for j in 0..t.saturating_sub(k) {
            out.coeffs[j + k] = self.coeffs[j].clone();
        }
        out
    }

    /// Total degree `d` if every coefficient `c_j` is homogeneous of degree
    /// `d - 2j` (`|u| = 2`).
    pub fn homogeneous_degree(&self) -> Option<i64> {
        let mut deg = None;
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = c.degree()? + 2 * j as i64;
            match deg {
                None => deg = Some(d),
                Some(e) if e != d => return None,
                _ => {}
            }
        }
        deg
    }

    /// `[[exponent, "coefficient"], ...]` for the nonzero terms.
    pub fn terms_json(&self) -> Value {
        Value::Array(
            self.nonzero().into_iter().map(|(j, c)| json!([j, c.to_string()])).collect(),
        )
    }

    pub fn to_json(&self) -> Value {
        json!({
            "ring": self.spec.descriptor(),
            "trunc": self.trunc(),
            "terms": self.terms_json(),
        })
    }
}

fn term_text(c: &CoefElem, monomial: &str) -> String {
    let s = c.to_string();
    if monomial.is_empty() {
        return if c.num_terms() > 1 { format!("({s})") } else { s };
    }
    if c.is_one() {
        monomial.to_string()
    } else if c.num_terms() > 1 {
        format!("({s})*{monomial}")
    } else if s == "-1" {
        format!("-{monomial}")
    } else {
        format!("{s}*{monomial}")
    }
}

fn join_terms(terms: Vec<String>) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, t) in terms.into_iter().enumerate() {
        match (i, t.strip_prefix('-')) {
            (0, _) => out.push_str(&t),
            (_, Some(rest)) => {
                out.push_str(" - ");
                out.push_str(rest);
            }
            (_, None) => {
                out.push_str(" + ");
                out.push_str(&t);
            }
        }
    }
    out
}

impl fmt::Display for USeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self
            .nonzero()
            .into_iter()
            .map(|(j, c)| {
                let m = match j {
                    0 => String::new(),
                    1 => "u".into(),
                    _ => format!("u^{j}"),
                };
                term_text(c, &m)
            })
            .collect();
        f.write_str(&join_terms(terms))
    }
}

/// `Σ_{i+j<T} c_{ij} x^i y^j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiSeries {
    spec: RingSpec,
    trunc: usize,
    rows: Vec<Vec<CoefElem>>,
}

impl BiSeries {
    pub fn zero(spec: RingSpec, trunc: usize) -> Self {
        assert!(trunc > 0, "truncation order must be positive");
        let rows = (0..trunc).map(|i| vec![CoefElem::zero(spec); trunc - i]).collect();
        BiSeries { spec, trunc, rows }
    }

    pub fn x(spec: RingSpec, trunc: usize) -> Self {
        let mut s = Self::zero(spec, trunc);
        if trunc > 1 {
            s.rows[1][0] = CoefElem::one(spec);
        }
        s
    }

    pub fn y(spec: RingSpec, trunc: usize) -> Self {
        let mut s = Self::zero(spec, trunc);
        if trunc > 1 {
            s.rows[0][1] = CoefElem::one(spec);
        }
        s
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn coeff(&self, i: usize, j: usize) -> &CoefElem {
        &self.rows[i][j]
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, c: CoefElem) {
        assert_eq!(c.spec(), &self.spec);
        self.rows[i][j] = c;
    }

    /// Nonzero coefficients as `(i, j, c)`.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, &CoefElem)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, c)| (i, j, c)))
            .filter(|(_, _, c)| !c.is_zero())
    }

    fn check(&self, other: &BiSeries) -> Result<()> {
        if self.spec != other.spec {
            return Err(RingError::SpecMismatch {
                left: self.spec.descriptor(),
                right: other.spec.descriptor(),
            }
            .into());
        }
        if self.trunc != other.trunc {
            return Err(SeriesError::TruncationMismatch { left: self.trunc, right: other.trunc });
        }
        Ok(())
    }

    pub fn add(&self, other: &BiSeries) -> Result<BiSeries> {
        self.check(other)?;
        let mut out = self.clone();
        for (i, j, c) in other.terms() {
            out.rows[i][j].add_assign_ref(c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &BiSeries) -> Result<BiSeries> {
        self.check(other)?;
        let mut out = self.clone();
        for (i, j, c) in other.terms() {
            out.rows[i][j].sub_assign_ref(c);
        }
        Ok(out)
    }

    pub fn mul(&self, other: &BiSeries) -> Result<BiSeries> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &BiSeries) -> BiSeries {
        let t = self.trunc;
        let mut out = BiSeries::zero(self.spec, t);
        let b: Vec<_> = other.terms().collect();
        for (i1, j1, c1) in self.terms() {
            for &(i2, j2, c2) in &b {
                if i1 + j1 + i2 + j2 < t {
                    out.rows[i1 + i2][j1 + j2].add_mul_assign(c1, c2);
                }
            }
        }
        out
    }

    /// `F(y, x)`.
    pub fn swap(&self) -> BiSeries {
        let mut out = BiSeries::zero(self.spec, self.trunc);
        for (i, j, c) in self.terms() {
            out.rows[j][i] = c.clone();
        }
        out
    }

    /// Univariate series `f` evaluated at the bivariate series `self`
    /// (constant term zero), i.e. `f(G(x, y))`.
    pub fn substitute_into(&self, f: &USeries) -> Result<BiSeries> {
        if f.spec() != &self.spec {
            return Err(RingError::SpecMismatch {
                left: self.spec.descriptor(),
                right: f.spec().descriptor(),
            }
            .into());
        }
        if f.trunc() != self.trunc {
            return Err(SeriesError::TruncationMismatch { left: f.trunc(), right: self.trunc });
        }
        if !self.rows[0][0].is_zero() {
            return Err(SeriesError::NonzeroConstant(self.rows[0][0].to_string()));
        }
        let t = self.trunc;
        let mut acc = BiSeries::zero(self.spec, t);
        acc.rows[0][0] = f.coeff(t - 1).clone();
        for k in (0..t - 1).rev() {
            acc = acc.mul_unchecked(self);
            acc.rows[0][0].add_assign_ref(f.coeff(k));
        }
        Ok(acc)
    }

    /// The univariate series `F(a(u), b(u))`; `a` and `b` need zero constant
    /// terms.
    pub fn evaluate(&self, a: &USeries, b: &USeries) -> Result<USeries> {
        for s in [a, b] {
            if s.spec() != &self.spec {
                return Err(RingError::SpecMismatch {
                    left: self.spec.descriptor(),
                    right: s.spec().descriptor(),
                }
                .into());
            }
            if s.trunc() != self.trunc {
                return Err(SeriesError::TruncationMismatch { left: s.trunc(), right: self.trunc });
            }
            if !s.coeff(0).is_zero() {
                return Err(SeriesError::NonzeroConstant(s.coeff(0).to_string()));
            }
        }
        let t = self.trunc;
        // Powers b^j, then Horner in a over the row polynomials.
        let mut b_pows = vec![USeries::one(self.spec, t)];
        for j in 1..t {
            b_pows.push(b_pows[j - 1].mul_unchecked(b));
        }
        let row_value = |i: usize| {
            let mut s = USeries::zero(self.spec, t);
            for (j, c) in self.rows[i].iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                for (k, d) in b_pows[j].coeffs.iter().enumerate() {
                    if !d.is_zero() {
                        s.coeffs[k].add_mul_assign(c, d);
                    }
                }
            }
            s
        };
        let mut acc = row_value(t - 1);
        for i in (0..t - 1).rev() {
            acc = acc.mul_unchecked(a).add(&row_value(i))?;
        }
        Ok(acc)
    }

    /// Coefficient-wise image under a ring map.
    pub fn reduce_to(&self, target: &RingSpec) -> Result<BiSeries> {
        let mut out = BiSeries::zero(*target, self.trunc);
        for (i, j, c) in self.terms() {
            out.rows[i][j] = c.reduce_to(target)?;
        }
        Ok(out)
    }

    /// `F(x, 0)` as a univariate series in `x`.
    pub fn restrict_x(&self) -> USeries {
        let coeffs = self.rows.iter().map(|row| row[0].clone()).collect();
        USeries { spec: self.spec, coeffs }
    }

    /// Total degree if every `c_{ij}` is homogeneous of degree `d - 2(i+j)`.
    pub fn homogeneous_degree(&self) -> Option<i64> {
        let mut deg = None;
        for (i, j, c) in self.terms() {
            let d = c.degree()? + 2 * (i + j) as i64;
            match deg {
                None => deg = Some(d),
                Some(e) if e != d => return None,
                _ => {}
            }
        }
        deg
    }

    /// `[[i, j, "coefficient"], ...]` for the nonzero terms.
    pub fn terms_json(&self) -> Value {
        Value::Array(self.terms().map(|(i, j, c)| json!([i, j, c.to_string()])).collect())
    }
}

impl fmt::Display for BiSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<(usize, usize, &CoefElem)> = self.terms().collect();
        terms.sort_by_key(|&(i, j, _)| (i + j, std::cmp::Reverse(i)));
        let texts = terms
            .into_iter()
            .map(|(i, j, c)| {
                let mut m = Vec::new();
                match i {
                    0 => {}
                    1 => m.push("x".to_string()),
                    _ => m.push(format!("x^{i}")),
                }
                match j {
                    0 => {}
                    1 => m.push("y".to_string()),
                    _ => m.push(format!("y^{j}")),
                }
                term_text(c, &m.join("*"))
            })
            .collect();
        f.write_str(&join_terms(texts))
    }
}

/// Convenience: a series with small integer coefficients.
pub fn int_series(spec: RingSpec, trunc: usize, coeffs: &[i64]) -> USeries {
    let cs = coeffs.iter().map(|&c| CoefElem::from_int(spec, c)).collect();
    USeries::from_coeffs(spec, trunc, cs).expect("matching spec")
}

/// Convenience: a rational constant.
pub fn rational(spec: RingSpec, num: i64, den: i64) -> CoefElem {
    CoefElem::scalar(spec, BigRational::new(num.into(), den.into())).expect("p-integral constant")
}
