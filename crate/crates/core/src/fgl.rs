//! The p-typical formal group law and its reductions to `E(n)*` and
//! `K_{p^r}(n)*`.
//!
//! The law is pinned by its p-series: generators are defined so that
//! `[p](u) = pu +_F v1 u^p +_F v2 u^{p^2} +_F ...`. Over the rationals this is
//! equivalent to the log identity
//! `p log(u) = log(pu) + Σ_i log(v_i u^{p^i})`, whose coefficient of
//! `u^{p^k}` gives `λ_k (p - p^{p^k}) = Σ_{i=1..k} λ_{k-i} v_i^{p^{k-i}}`.
//! The law is `exp(log x + log y)`; its coefficients are asserted to be
//! p-integral before reduction.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ringcore::{mod_inverse, p_valuation, CoefElem, RingError, RingKind, RingSpec};
use crate::modseries::ModSeries;
use crate::series::{BiSeries, SeriesError, USeries};

/// Above this truncation order, l-series default to the log route (the
/// addition-chain route needs the full bivariate law).
pub const CHAIN_MAX_TRUNC: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    PTypicalUniversal,
    BPQuotient,
    En,
    Kpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LSeriesMethod {
    AdditionChain,
    Logarithm,
    /// `K_{p^r}(n)` only: `[l] = [l'] ∘ [p]^s` with `[p]` from the closed form
    /// `Σ_{i<r} p^i u^i A_i(v_n u^{p^n})`, `A_i = [x^i] F(x, y)`.
    Factored,
}

/// `log(u) = Σ_k λ_k u^{p^k}` over the rationalization of a coefficient ring,
/// with the generators that die in that ring set to zero.
#[derive(Clone, Debug)]
pub struct ArakiLog {
    spec: RingSpec,
    terms: Vec<(usize, CoefElem)>,
}

impl ArakiLog {
    /// Log coefficients `λ_k` for `p^k < trunc`, for the generators live in
    /// `target`.
    pub fn for_ring(target: &RingSpec, trunc: usize) -> Result<ArakiLog> {
        let p = target.p;
        let rspec = RingSpec::rational(p, target.n)?.with_cutoff(target.degree_cutoff)?;
        let mut terms = vec![(1usize, CoefElem::one(rspec))];
        let mut k = 1u32;
        loop {
            let q = match (p as usize).checked_pow(k) {
                Some(q) if q < trunc => q,
                _ => break,
            };
            let mut num = CoefElem::zero(rspec);
            for i in 1..=(k as usize).min(target.n) {
                if !target.is_live(i) {
                    continue;
                }
                let prev = &terms[k as usize - i].1;
                if prev.is_zero() {
                    continue;
                }
                let vi = CoefElem::generator(rspec, i)?.pow(p.pow(k - i as u32));
                num.add_mul_assign(prev, &vi);
            }
            let pb = BigInt::from(p);
            let den = &pb - pb.pow(q as u32);
            let lam = num.scale(&BigRational::new(BigInt::one(), den))?;
            terms.push((q, lam));
            k += 1;
        }
        Ok(ArakiLog { spec: rspec, terms })
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    /// `(p^k, λ_k)` pairs, starting with `(1, 1)`.
    pub fn terms(&self) -> &[(usize, CoefElem)] {
        &self.terms
    }

    pub fn as_series(&self, trunc: usize) -> USeries {
        let mut s = USeries::zero(self.spec, trunc);
        for (q, c) in &self.terms {
            if *q < trunc {
                s.set_coeff(*q, c.clone());
            }
        }
        s
    }

    /// The series `g` with `log(g) = w`, solved one coefficient at a time.
    /// `w` needs zero constant term and a nonzero rational linear coefficient.
    ///
    /// Writing `g = u f`, the powers `f^q` are carried along with the
    /// recurrence `j f_0 h_j = Σ_{i=1..j} ((q+1) i - j) f_i h_{j-i}`.
    pub fn solve(&self, w: &USeries) -> Result<USeries> {
        let t = w.trunc();
        if w.spec() != &self.spec {
            return Err(RingError::SpecMismatch {
                left: self.spec.descriptor(),
                right: w.spec().descriptor(),
            }
            .into());
        }
        if !w.coeff(0).is_zero() {
            return Err(SeriesError::NonzeroConstant(w.coeff(0).to_string()).into());
        }
        if t < 2 {
            return Ok(USeries::zero(self.spec, t));
        }
        let w1 = w.coeff(1);
        if w1.is_zero() || w1.degree() != Some(0) || w1.num_terms() != 1 {
            return Err(SeriesError::NonUnitLinear(w1.to_string()).into());
        }
        let f0_inv = w1.constant_term().recip();
        let powers: Vec<(usize, &CoefElem)> =
            self.terms.iter().skip(1).filter(|(q, _)| *q < t).map(|(q, c)| (*q, c)).collect();
        let mut f: Vec<CoefElem> = Vec::with_capacity(t - 1);
        f.push(w1.clone());
        // h[k] = f^{q_k}, needed up to index t - 1 - q_k.
        let mut h: Vec<Vec<CoefElem>> = powers
            .iter()
            .map(|(q, _)| {
                let mut v = Vec::with_capacity(t - q);
                v.push(w1.pow(*q as u64));
                v
            })
            .collect();
        for j in 1..t - 1 {
            let mut fj = w.coeff(j + 1).clone();
            for (k, (q, lam)) in powers.iter().enumerate() {
                if j + 1 >= *q {
                    let prod = *lam * &h[k][j + 1 - q];
                    fj.sub_assign_ref(&prod);
                }
            }
            f.push(fj);
            let f_ref = &f;
            h.par_iter_mut().zip(powers.par_iter()).for_each(|(hk, (q, _))| {
                if j >= t - q {
                    return;
                }
                let mut acc = CoefElem::zero(*f_ref[0].spec());
                for i in 1..=j {
                    let fi = &f_ref[i];
                    if fi.is_zero() || hk[j - i].is_zero() {
                        continue;
                    }
                    let m = ((*q as i64) + 1) * i as i64 - j as i64;
                    if m != 0 {
                        acc.add_mul_assign(&fi.scale_int(m), &hk[j - i]);
                    }
                }
                let scale = &f0_inv / BigRational::from_integer(BigInt::from(j));
                hk.push(acc.scale(&scale).expect("rational ring"));
            });
        }
        let mut coeffs = vec![CoefElem::zero(self.spec)];
        coeffs.extend(f);
        Ok(USeries::from_coeffs(self.spec, t, coeffs)?)
    }

    /// `exp`, the compositional inverse of the log.
    pub fn exp(&self, trunc: usize) -> Result<USeries> {
        self.solve(&USeries::var(self.spec, trunc))
    }
}

/// A formal group law over a coefficient ring, truncated at total degree
/// `T` in `x, y`.
#[derive(Clone, Debug)]
pub struct FormalGroupLaw {
    spec: RingSpec,
    trunc: usize,
    provenance: Provenance,
    shadow: ArakiLog,
    law: OnceLock<BiSeries>,
    p_series_mod: OnceLock<ModSeries>,
    cache: Arc<Mutex<HashMap<(i64, LSeriesMethod), USeries>>>,
}

fn provenance_of(spec: &RingSpec) -> Result<Provenance> {
    Ok(match spec.kind {
        RingKind::BPTruncated => Provenance::PTypicalUniversal,
        RingKind::BPQuotient { .. } => Provenance::BPQuotient,
        RingKind::EnRing => Provenance::En,
        RingKind::KprRing => Provenance::Kpr,
        RingKind::RationalVPoly => {
            return Err(Error::UnsupportedRing(format!(
                "{} carries no integral p-typical law",
                spec.descriptor()
            )))
        }
    })
}

fn integrality(err: RingError) -> Error {
    match err {
        RingError::NotPIntegral { monomial, p } => Error::NotPIntegral { term: monomial, p },
        other => other.into(),
    }
}

/// The p-typical law over `BP*` (generators up to `v_n`), to order `T`.
pub fn build_ptypical(spec: RingSpec, trunc: usize) -> Result<FormalGroupLaw> {
    if spec.kind != RingKind::BPTruncated {
        return Err(Error::UnsupportedRing(format!("{} is not BP*", spec.descriptor())));
    }
    FormalGroupLaw::new(spec, trunc)
}

impl FormalGroupLaw {
    /// The image of the p-typical law in `spec` (any integral kind). The
    /// bivariate law is materialized eagerly for `T <= CHAIN_MAX_TRUNC`, and
    /// on first use otherwise.
    pub fn new(spec: RingSpec, trunc: usize) -> Result<FormalGroupLaw> {
        if trunc < 2 {
            return Err(Error::TruncationTooSmall { needed: 2, got: trunc });
        }
        let provenance = provenance_of(&spec)?;
        let shadow = ArakiLog::for_ring(&spec, trunc)?;
        let fgl = FormalGroupLaw {
            spec,
            trunc,
            provenance,
            shadow,
            law: OnceLock::new(),
            p_series_mod: OnceLock::new(),
            cache: Arc::new(Mutex::new(HashMap::new())),
        };
        if trunc <= CHAIN_MAX_TRUNC {
            let law = fgl.build_law()?;
            let _ = fgl.law.set(law);
        }
        Ok(fgl)
    }

    /// The same law without the eager bivariate build, for callers that only
    /// need l-series; these then go through the logarithm.
    pub fn series_only(spec: RingSpec, trunc: usize) -> Result<FormalGroupLaw> {
        if trunc < 2 {
            return Err(Error::TruncationTooSmall { needed: 2, got: trunc });
        }
        Ok(FormalGroupLaw {
            spec,
            trunc,
            provenance: provenance_of(&spec)?,
            shadow: ArakiLog::for_ring(&spec, trunc)?,
            law: OnceLock::new(),
            p_series_mod: OnceLock::new(),
            cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// `K_{p^r}(n)`: the `E(n)` law with `v_1..v_{n-1}` killed, reduced mod `p^r`.
    pub fn kpr(p: u64, r: u32, n: usize, trunc: usize) -> Result<FormalGroupLaw> {
        Self::new(RingSpec::kpr(p, r, n)?, trunc)
    }

    pub fn en(p: u64, n: usize, trunc: usize) -> Result<FormalGroupLaw> {
        Self::new(RingSpec::en(p, n)?, trunc)
    }

    fn build_law(&self) -> Result<BiSeries> {
        let t = self.trunc;
        let rs = self.shadow.spec;
        let exp = self.shadow.exp(t)?;
        let mut sum = BiSeries::zero(rs, t);
        for (q, c) in self.shadow.terms() {
            if *q < t {
                sum.set_coeff(*q, 0, c.clone());
                sum.set_coeff(0, *q, c.clone());
            }
        }
        let rational = sum.substitute_into(&exp)?;
        rational.reduce_to(&self.spec).map_err(|e| match e {
            SeriesError::Ring(r) => integrality(r),
            other => other.into(),
        })
    }

    pub fn spec(&self) -> &RingSpec {
        &self.spec
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// The rational log the law is built from (killed generators set to 0).
    pub fn shadow_log(&self) -> &ArakiLog {
        &self.shadow
    }

    /// The log series, for the universal p-typical law.
    pub fn log(&self) -> Option<USeries> {
        (self.provenance == Provenance::PTypicalUniversal).then(|| self.shadow.as_series(self.trunc))
    }

    /// Note attached to every output over `K_{p^r}(n)`, `r > 1`.
    pub fn convention(&self) -> Option<&'static str> {
        (self.provenance == Provenance::Kpr && self.spec.r > 1)
            .then_some("quotient-law convention: E(n) law with v1..v(n-1) killed, reduced mod p^r")
    }

    /// `F(x, y)`.
    pub fn law(&self) -> &BiSeries {
        self.law.get_or_init(|| self.build_law().expect("p-typical law is p-integral"))
    }

    /// Coefficient-wise image in `target`, with unit and commutativity
    /// re-checked.
    pub fn reduce(&self, target: &RingSpec) -> Result<FormalGroupLaw> {
        let law = self.law().reduce_to(target).map_err(|e| match e {
            SeriesError::Ring(r) => integrality(r),
            other => other.into(),
        })?;
        let out = FormalGroupLaw {
            spec: *target,
            trunc: self.trunc,
            provenance: provenance_of(target)?,
            shadow: ArakiLog::for_ring(target, self.trunc)?,
            law: OnceLock::new(),
            p_series_mod: OnceLock::new(),
            cache: Arc::new(Mutex::new(HashMap::new())),
        };
        let _ = out.law.set(law);
        let (unit, comm) = (out.unit_axiom(), out.commutative());
        if !unit {
            return Err(Error::AxiomFailure(format!("F(x,0) != x over {}", target.descriptor())));
        }
        if !comm {
            return Err(Error::AxiomFailure(format!("F(x,y) != F(y,x) over {}", target.descriptor())));
        }
        Ok(out)
    }

    fn var(&self) -> USeries {
        USeries::var(self.spec, self.trunc)
    }

    /// `F(a, b)` for series `a`, `b` with zero constant term.
    pub fn add(&self, a: &USeries, b: &USeries) -> Result<USeries> {
        Ok(self.law().evaluate(a, b)?)
    }

    /// `ι(u)` with `F(u, ι(u)) = 0`.
    pub fn formal_inverse(&self) -> Result<USeries> {
        if self.trunc > CHAIN_MAX_TRUNC && self.law.get().is_none() {
            return self.l_series_with(-1, LSeriesMethod::Logarithm);
        }
        let u = self.var();
        let mut iota = u.neg();
        // Each pass fixes at least one more coefficient.
        for _ in 0..self.trunc {
            let resid = self.add(&u, &iota)?;
            if resid.is_zero() {
                return Ok(iota);
            }
            iota = iota.sub(&resid)?;
        }
        if self.add(&u, &iota)?.is_zero() {
            Ok(iota)
        } else {
            Err(Error::AxiomFailure("formal inverse iteration did not settle".into()))
        }
    }

    /// `[l](u)`, by the default method for this truncation.
    pub fn l_series(&self, l: i64) -> Result<USeries> {
        let method = if self.trunc <= CHAIN_MAX_TRUNC && self.law.get().is_some() {
            LSeriesMethod::AdditionChain
        } else if self.provenance == Provenance::Kpr {
            LSeriesMethod::Factored
        } else {
            LSeriesMethod::Logarithm
        };
        self.l_series_with(l, method)
    }

    pub fn l_series_with(&self, l: i64, method: LSeriesMethod) -> Result<USeries> {
        if l == 0 {
            return Ok(USeries::zero(self.spec, self.trunc));
        }
        if let Some(s) = self.cache.lock().unwrap().get(&(l, method)) {
            return Ok(s.clone());
        }
        let s = match method {
            LSeriesMethod::AdditionChain => self.chain(l)?,
            LSeriesMethod::Factored => self.factored(l)?,
            LSeriesMethod::Logarithm => {
                let w = self.shadow.as_series(self.trunc).scale_int(l);
                let g = self.shadow.solve(&w)?;
                g.reduce_to(&self.spec).map_err(|e| match e {
                    SeriesError::Ring(r) => integrality(r),
                    other => other.into(),
                })?
            }
        };
        self.cache.lock().unwrap().insert((l, method), s.clone());
        Ok(s)
    }

    fn chain(&self, l: i64) -> Result<USeries> {
        let mut m = l.unsigned_abs();
        let mut result: Option<USeries> = None;
        let mut base = self.var();
        while m > 0 {
            if m & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => self.add(&r, &base)?,
                });
            }
            m >>= 1;
            if m > 0 {
                base = self.add(&base, &base)?;
            }
        }
        let pos = result.expect("l != 0");
        if l > 0 {
            Ok(pos)
        } else {
            Ok(self.formal_inverse()?.compose(&pos)?)
        }
    }

    fn factored(&self, l: i64) -> Result<USeries> {
        if self.provenance != Provenance::Kpr {
            return Err(Error::UnsupportedRing(format!(
                "factored l-series need K_{{p^r}}(n), not {}",
                self.spec.descriptor()
            )));
        }
        let p = self.spec.p as i64;
        let (mut s, mut rest) = (0u32, l);
        while rest % p == 0 {
            rest /= p;
            s += 1;
        }
        let pm = self.p_series_mod()?;
        let mut g = ModSeries::var(pm.modulus(), self.trunc);
        for _ in 0..s {
            g = pm.compose(&g)?;
        }
        if rest != 1 {
            let method = if self.trunc <= CHAIN_MAX_TRUNC && self.law.get().is_some() {
                LSeriesMethod::AdditionChain
            } else {
                LSeriesMethod::Logarithm
            };
            let outer = ModSeries::from_useries(&self.l_series_with(rest, method)?);
            g = outer.compose(&g)?;
        }
        Ok(g.to_useries(self.spec, 2)?)
    }

    /// `[p](u)` over `K_{p^r}(n)` with `v_n -> 1`.
    ///
    /// `F(x, y) = Σ_i x^i A_i(y)` and `p^r = 0`, so
    /// `[p](u) = F(pu, v_n u^{p^n}) = Σ_{i<r} p^i u^i A_i(v_n u^{p^n})`.
    /// With `E(t) = exp(log y + t) = Σ_m e_m(y) t^m` one has `E' = A_1(E)`,
    /// `A_1 = 1/log'`, and `A_i = Σ_{m<=i} e_m [x^i] log(x)^m`.
    pub fn p_series_mod(&self) -> Result<&ModSeries> {
        if let Some(s) = self.p_series_mod.get() {
            return Ok(s);
        }
        let s = self.compute_p_series_mod()?;
        Ok(self.p_series_mod.get_or_init(|| s))
    }

    fn compute_p_series_mod(&self) -> Result<ModSeries> {
        let spec = &self.spec;
        if spec.kind != RingKind::KprRing {
            return Err(Error::UnsupportedRing(spec.descriptor()));
        }
        let (p, r, t) = (spec.p, spec.r as usize, self.trunc);
        let q = (p as usize).pow(spec.n as u32);
        let len = (t - 1) / q + 1;
        let scalar = |c: &CoefElem| c.terms().next().map(|(_, x)| x.clone()).unwrap_or_else(BigRational::zero);
        let lam: Vec<(usize, BigRational)> = self.shadow.terms().iter().map(|(k, c)| (*k, scalar(c))).collect();
        // log'(y), then A_1 = 1/log'(y)
        let mut dlog = vec![BigRational::zero(); len];
        for (k, c) in &lam {
            if k - 1 < len {
                dlog[k - 1] = c * BigRational::from_integer(BigInt::from(*k));
            }
        }
        let a1 = qinv(&dlog);
        // D[k] = A_1^{(k)} / k!
        let mut d = vec![a1.clone()];
        for k in 1..r.saturating_sub(1) {
            let next: Vec<BigRational> = qderiv(&d[k - 1])
                .into_iter()
                .map(|c| c / BigRational::from_integer(BigInt::from(k)))
                .collect();
            d.push(next);
        }
        let mut y = vec![BigRational::zero(); len];
        if len > 1 {
            y[1] = BigRational::one();
        }
        let mut e = vec![y];
        for m in 0..r.saturating_sub(1) {
            // [t^m] Σ_k D[k] δ(t)^k, δ = Σ_{1<=i<=m} e_i t^i
            let mut total = vec![BigRational::zero(); len];
            let mut delta_pow: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); len]; m + 1];
            delta_pow[0][0] = BigRational::one();
            for (k, dk) in d.iter().enumerate().take(m + 1) {
                if k > 0 {
                    let mut next = vec![vec![BigRational::zero(); len]; m + 1];
                    for a in 0..=m {
                        for b in 1..=m - a {
                            let prod = qmul(&delta_pow[a], &e[b]);
                            for (x, y) in next[a + b].iter_mut().zip(prod) {
                                *x += y;
                            }
                        }
                    }
                    delta_pow = next;
                }
                for (x, y) in total.iter_mut().zip(qmul(dk, &delta_pow[m])) {
                    *x += y;
                }
            }
            let scale = BigRational::from_integer(BigInt::from(m + 1));
            e.push(total.into_iter().map(|c| c / &scale).collect());
        }
        // powers of log(x) through x^{r-1}
        let mut lx = vec![BigRational::zero(); r];
        for (k, c) in &lam {
            if *k < r {
                lx[*k] = c.clone();
            }
        }
        let mut lpow = vec![{
            let mut one = vec![BigRational::zero(); r];
            one[0] = BigRational::one();
            one
        }];
        for m in 1..r {
            lpow.push(qmul(&lpow[m - 1], &lx));
        }
        let modulus = BigInt::from(p).pow(r as u32);
        let mut out = ModSeries::zero(modulus.to_u64().expect("modulus fits in u64"), t);
        let mut acc = vec![BigInt::zero(); t];
        for i in 0..r {
            let mut ai = vec![BigRational::zero(); len];
            for m in 0..=i {
                let c = &lpow[m][i];
                if c.is_zero() {
                    continue;
                }
                for (x, y) in ai.iter_mut().zip(&e[m]) {
                    *x += c * y;
                }
            }
            let pi = BigInt::from(p).pow(i as u32);
            for (j, c) in ai.iter().enumerate() {
                let idx = i + q * j;
                if idx >= t || c.is_zero() {
                    continue;
                }
                if p_valuation(c.denom(), p) > 0 {
                    return Err(Error::NotPIntegral { term: format!("x^{i} y^{j}"), p });
                }
                let inv = mod_inverse(c.denom(), &modulus).expect("p-free denominator");
                acc[idx] += &pi * c.numer() * inv;
            }
        }
        for (j, c) in acc.into_iter().enumerate() {
            out.set(j, c.mod_floor(&modulus).to_u64().unwrap());
        }
        Ok(out)
    }

    /// `p u +_F v1 u^p +_F ... ` over the generators live in this ring.
    pub fn p_series_formal_sum(&self) -> Result<USeries> {
        let p = self.spec.p as usize;
        let t = self.trunc;
        let mut acc = self.var().scale_int(p as i64);
        for i in 1..=self.spec.n {
            let q = match p.checked_pow(i as u32) {
                Some(q) if q < t => q,
                _ => break,
            };
            if !self.spec.is_live(i) {
                continue;
            }
            let vi = USeries::monomial(CoefElem::generator(self.spec, i)?, q, t);
            acc = self.add(&acc, &vi)?;
        }
        Ok(acc)
    }

    /// Checks `[p](u) = pu +_F v1 u^p +_F ...` exactly at truncation.
    pub fn check_p_series(&self) -> Result<PSeriesCheck> {
        let lhs = self.l_series_with(self.spec.p as i64, LSeriesMethod::AdditionChain)?;
        let rhs = self.p_series_formal_sum()?;
        Ok(PSeriesCheck { holds: lhs == rhs, lhs, rhs })
    }

    fn unit_axiom(&self) -> bool {
        let f = self.law();
        let x = self.var();
        f.restrict_x() == x && f.swap().restrict_x() == x
    }

    fn commutative(&self) -> bool {
        let f = self.law();
        &f.swap() == f
    }

    fn associative(&self) -> bool {
        let f = self.law();
        let t = self.trunc;
        let mut one = BiSeries::zero(self.spec, t);
        one.set_coeff(0, 0, CoefElem::one(self.spec));
        let powers = |g: &BiSeries| -> Vec<BiSeries> {
            let mut v = vec![one.clone()];
            for i in 1..t {
                let next = v[i - 1].mul(g).expect("same ring");
                v.push(next);
            }
            v
        };
        // F(F(x,y), z): powers of F in (x, y), z^j attached.
        let left_pows = powers(f);
        let mut left: BTreeMap<(usize, usize, usize), CoefElem> = BTreeMap::new();
        for (i, j, c) in f.terms() {
            for (a, b, d) in left_pows[i].terms() {
                if a + b + j < t {
                    left.entry((a, b, j)).or_insert_with(|| CoefElem::zero(self.spec)).add_mul_assign(c, d);
                }
            }
        }
        // F(x, F(y, z)): powers of F in (y, z), x^i attached.
        let mut right: BTreeMap<(usize, usize, usize), CoefElem> = BTreeMap::new();
        for (i, j, c) in f.terms() {
            for (b, g, d) in left_pows[j].terms() {
                if i + b + g < t {
                    right.entry((i, b, g)).or_insert_with(|| CoefElem::zero(self.spec)).add_mul_assign(c, d);
                }
            }
        }
        left.retain(|_, c| !c.is_zero());
        right.retain(|_, c| !c.is_zero());
        left == right
    }

    /// Unit, commutativity and associativity, exactly at truncation.
    pub fn check_axioms(&self) -> AxiomReport {
        AxiomReport { unit: self.unit_axiom(), commutative: self.commutative(), associative: self.associative() }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "ring": self.spec.descriptor(),
            "trunc": self.trunc,
            "provenance": self.provenance,
            "law": self.law().terms_json(),
        });
        if let Some(c) = self.convention() {
            v["convention"] = json!(c);
        }
        v
    }

    /// Coefficients `a_ij` of `F` with `i <= j`, one per line.
    pub fn coefficient_table(&self) -> String {
        let mut lines = Vec::new();
        let mut terms: Vec<_> = self.law().terms().filter(|(i, j, _)| i <= j).collect();
        terms.sort_by_key(|&(i, j, _)| (i + j, i));
        for (i, j, c) in terms {
            lines.push(format!("a[{i},{j}] = {c}"));
        }
        lines.join("\n")
    }
}

fn qmul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let t = a.len();
    let mut out = vec![BigRational::zero(); t];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(t - i) {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

fn qderiv(a: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); a.len()];
    for j in 1..a.len() {
        out[j - 1] = &a[j] * BigRational::from_integer(BigInt::from(j));
    }
    out
}

/// Inverse of a series with constant term 1, exploiting sparsity of `a`.
fn qinv(a: &[BigRational]) -> Vec<BigRational> {
    let nz: Vec<(usize, &BigRational)> = a.iter().enumerate().skip(1).filter(|(_, c)| !c.is_zero()).collect();
    let mut h = vec![BigRational::zero(); a.len()];
    h[0] = BigRational::one();
    for j in 1..a.len() {
        let mut s = BigRational::zero();
        for &(i, c) in &nz {
            if i > j {
                break;
            }
            if !h[j - i].is_zero() {
                s -= c * &h[j - i];
            }
        }
        h[j] = s;
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PSeriesCheck {
    pub lhs: USeries,
    pub rhs: USeries,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub unit: bool,
    pub commutative: bool,
    pub associative: bool,
}

impl AxiomReport {
    pub fn all(&self) -> bool {
        self.unit && self.commutative && self.associative
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_coefficients_at_two() {
        let bp = RingSpec::bp(2, 2).unwrap();
        let log = ArakiLog::for_ring(&bp, 8).unwrap();
        let t: Vec<String> = log.terms().iter().map(|(q, c)| format!("{q}:{c}")).collect();
        // λ1 = v1/(2-4); λ2 = (λ1 v1^2 + v2)/(2-16)
        assert_eq!(t, vec!["1:1", "2:-1/2*v1", "4:-1/14*v2 + 1/28*v1^3"]);
    }

    #[test]
    fn low_order_law() {
        let f = build_ptypical(RingSpec::bp(2, 2).unwrap(), 4).unwrap();
        let law = f.law();
        // F = x + y + v1 xy + v1^2 (x^2 y + x y^2) at order 3, by hand from the log.
        assert_eq!(law.coeff(1, 1).to_string(), "v1");
        assert_eq!(law.coeff(2, 1).to_string(), "v1^2");
        assert_eq!(f.l_series(1).unwrap(), USeries::var(*f.spec(), 4));
        assert_eq!(f.log().unwrap().coeff(1).to_string(), "1");
    }

    #[test]
    fn k21_law_and_series() {
        let f = FormalGroupLaw::kpr(2, 1, 1, 4).unwrap();
        // 4 λ1^2 = v1^2 survives mod 2: a 2-typical law is not multiplicative
        assert_eq!(f.law().to_string(), "x + y + v1*x*y + v1^2*x^2*y + v1^2*x*y^2");
        assert_eq!(f.l_series(3).unwrap().to_string(), "u + v1*u^2 + v1^2*u^3");
        assert_eq!(f.formal_inverse().unwrap().to_string(), "u + v1*u^2 + v1^2*u^3");
        assert_eq!(f.l_series(2).unwrap().to_string(), "v1*u^2");
    }

    #[test]
    fn additive_law_inverse() {
        // all generators set to zero: log(u) = u
        let rs = RingSpec::rational(2, 1).unwrap();
        let log = ArakiLog { spec: rs, terms: vec![(1, CoefElem::one(rs))] };
        let u = USeries::var(rs, 6);
        assert_eq!(log.solve(&u.scale_int(-1)).unwrap(), u.neg());
    }

    #[test]
    fn chain_matches_log_route() {
        let specs = [
            RingSpec::kpr(2, 2, 1).unwrap(),
            RingSpec::en(3, 1).unwrap(),
            RingSpec::bp(2, 2).unwrap(),
            RingSpec::bp_mod_ideal(2, 1, 2).unwrap(),
            RingSpec::bp_mod_ideal(3, 2, 2).unwrap(),
        ];
        for spec in specs {
            let f = FormalGroupLaw::new(spec, 12).unwrap();
            let lazy = FormalGroupLaw::series_only(spec, 12).unwrap();
            for l in [-3, -2, -1, 2, 5, 6] {
                let chain = f.l_series_with(l, LSeriesMethod::AdditionChain).unwrap();
                assert_eq!(chain, f.l_series_with(l, LSeriesMethod::Logarithm).unwrap(), "l={l} over {spec}");
                assert_eq!(chain, lazy.l_series(l).unwrap(), "l={l} over {spec}");
            }
        }
    }

    #[test]
    fn factored_matches_other_routes() {
        for (p, r, n, t) in [(2, 1, 1, 20), (2, 2, 1, 20), (2, 2, 2, 40), (3, 2, 1, 30), (2, 3, 1, 20), (3, 3, 2, 30)] {
            let f = FormalGroupLaw::kpr(p, r, n, t).unwrap();
            for l in [2i64, -2, 4, 6, 9, 12] {
                assert_eq!(
                    f.l_series_with(l, LSeriesMethod::Factored).unwrap(),
                    f.l_series_with(l, LSeriesMethod::AdditionChain).unwrap(),
                    "l={l} p={p} r={r} n={n}"
                );
            }
        }
        let f = FormalGroupLaw::kpr(2, 2, 2, 90).unwrap();
        assert_eq!(
            f.l_series_with(8, LSeriesMethod::Factored).unwrap(),
            f.l_series_with(8, LSeriesMethod::Logarithm).unwrap()
        );
    }

    #[test]
    fn exp_inverts_log() {
        let rs = RingSpec::rational(2, 2).unwrap();
        let log = ArakiLog::for_ring(&RingSpec::bp(2, 2).unwrap(), 10).unwrap();
        let e = log.exp(10).unwrap();
        assert_eq!(log.as_series(10).compose(&e).unwrap(), USeries::var(rs, 10));
        assert_eq!(e.compose(&log.as_series(10)).unwrap(), USeries::var(rs, 10));
    }

    #[test]
    fn rational_kind_rejected() {
        let rs = RingSpec::rational(2, 1).unwrap();
        assert!(matches!(FormalGroupLaw::new(rs, 4), Err(Error::UnsupportedRing(_))));
        assert!(matches!(build_ptypical(RingSpec::en(2, 1).unwrap(), 4), Err(Error::UnsupportedRing(_))));
    }
}
