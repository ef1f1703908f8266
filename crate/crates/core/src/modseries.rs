//! Series over `Z/m` (machine integers), used for `K_{p^r}(n)` after the
//! specialization `v_n -> 1`.
//!
//! For a homogeneous series the specialization loses nothing: the exponent
//! of `v_n` in front of `u^j` is recovered from the total degree.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::ringcore::{CoefElem, RingKind, RingSpec};
use crate::series::{SeriesError, USeries};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModSeries {
    modulus: u64,
    coeffs: Vec<u64>,
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

impl ModSeries {
    pub fn zero(modulus: u64, trunc: usize) -> Self {
        assert!(modulus > 1 && trunc > 0);
        ModSeries { modulus, coeffs: vec![0; trunc] }
    }

    pub fn var(modulus: u64, trunc: usize) -> Self {
        let mut s = Self::zero(modulus, trunc);
        if trunc > 1 {
            s.coeffs[1] = 1 % modulus;
        }
        s
    }

    pub fn from_coeffs(modulus: u64, trunc: usize, coeffs: &[i64]) -> Self {
        let mut s = Self::zero(modulus, trunc);
        for (j, &c) in coeffs.iter().enumerate().take(trunc) {
            s.coeffs[j] = c.rem_euclid(modulus as i64) as u64;
        }
        s
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn trunc(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> u64 {
        self.coeffs[j]
    }

    pub fn set(&mut self, j: usize, c: u64) {
        self.coeffs[j] = c % self.modulus;
    }

    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|&c| c != 0)
    }

    pub fn resized(&self, trunc: usize) -> Self {
        let mut s = Self::zero(self.modulus, trunc);
        let k = trunc.min(self.trunc());
        s.coeffs[..k].copy_from_slice(&self.coeffs[..k]);
        s
    }

    fn check(&self, other: &ModSeries) -> Result<(), SeriesError> {
        if self.trunc() != other.trunc() {
            return Err(SeriesError::TruncationMismatch { left: self.trunc(), right: other.trunc() });
        }
        assert_eq!(self.modulus, other.modulus, "moduli differ");
        Ok(())
    }

    pub fn add(&self, other: &ModSeries) -> Result<ModSeries, SeriesError> {
        self.check(other)?;
        let m = self.modulus;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a + b) % m).collect();
        Ok(ModSeries { modulus: m, coeffs })
    }

    pub fn sub(&self, other: &ModSeries) -> Result<ModSeries, SeriesError> {
        self.check(other)?;
        let m = self.modulus;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a + m - b) % m).collect();
        Ok(ModSeries { modulus: m, coeffs })
    }

    pub fn scale(&self, c: u64) -> ModSeries {
        let m = self.modulus;
        ModSeries { modulus: m, coeffs: self.coeffs.iter().map(|&a| mulmod(a, c, m)).collect() }
    }

    pub fn mul(&self, other: &ModSeries) -> Result<ModSeries, SeriesError> {
        self.check(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &ModSeries) -> ModSeries {
        let t = self.trunc();
        let m = self.modulus as u128;
        let b: Vec<(usize, u128)> =
            other.coeffs.iter().enumerate().filter(|(_, &c)| c != 0).map(|(j, &c)| (j, c as u128)).collect();
        let mut acc = vec![0u128; t];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let a = a as u128;
            for &(j, c) in &b {
                if i + j >= t {
                    break;
                }
                acc[i + j] += a * c;
                // keep the accumulator far from overflow
                if acc[i + j] >= 1u128 << 120 {
                    acc[i + j] %= m;
                }
            }
        }
        ModSeries { modulus: self.modulus, coeffs: acc.into_iter().map(|x| (x % m) as u64).collect() }
    }

    /// `f(g(u))`, `g(0) = 0`.
    pub fn compose(&self, g: &ModSeries) -> Result<ModSeries, SeriesError> {
        self.check(g)?;
        if g.coeffs[0] != 0 {
            return Err(SeriesError::NonzeroConstant(g.coeffs[0].to_string()));
        }
        let t = self.trunc();
        let mut out = ModSeries::zero(self.modulus, t);
        let v = match g.valuation() {
            None => {
                out.coeffs[0] = self.coeffs[0];
                return Ok(out);
            }
            Some(v) => v,
        };
        let top = (t - 1) / v;
        out.coeffs[0] = self.coeffs[top];
        for k in (0..top).rev() {
            out = out.mul_unchecked(g);
            out.coeffs[0] = (out.coeffs[0] + self.coeffs[k]) % self.modulus;
        }
        Ok(out)
    }

    /// Specialization `v_n -> 1` of a series over `K_{p^r}(n)`.
    pub fn from_useries(s: &USeries) -> ModSeries {
        let spec = s.spec();
        assert_eq!(spec.kind, RingKind::KprRing, "specialization needs K_{{p^r}}(n)");
        let m = spec.modulus().unwrap().to_u64().expect("modulus fits in u64");
        let coeffs = s.coeffs().iter().map(|c| c.specialize_kpr().to_u64().unwrap()).collect();
        ModSeries { modulus: m, coeffs }
    }

    /// Inverse of the specialization for a series homogeneous of total
    /// degree `degree` (`|u| = 2`).
    pub fn to_useries(&self, spec: RingSpec, degree: i64) -> Result<USeries, SeriesError> {
        let vdeg = spec.generator_degree(spec.n);
        let mut out = USeries::zero(spec, self.trunc());
        for (j, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let rest = degree - 2 * j as i64;
            let (e, r) = rest.div_rem(&vdeg);
            if !r.is_zero() {
                return Err(SeriesError::Ring(crate::ringcore::RingError::InvalidSpec(format!(
                    "coefficient of u^{j} cannot be homogeneous of degree {rest}"
                ))));
            }
            let mut exps = vec![0i32; spec.n];
            exps[spec.n - 1] = e as i32;
            let coef = CoefElem::monomial(spec, BigInt::from(c).into(), &exps)?;
            out.set_coeff(j, coef);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_mod_four() {
        let a = ModSeries::from_coeffs(4, 5, &[0, 2, 1]);
        assert_eq!(a.mul(&a).unwrap().coeffs(), &[0, 0, 0, 0, 1]);
        let u = ModSeries::var(4, 5);
        assert_eq!(a.compose(&u).unwrap(), a);
        // (2u + u^2) ∘ (2u + u^2) = 2(2u+u^2) + (2u+u^2)^2 = 4u + 6u^2 + 4u^3 + u^4
        assert_eq!(a.compose(&a).unwrap().coeffs(), &[0, 0, 2, 0, 1]);
    }

    #[test]
    fn round_trip_through_specialization() {
        let k = RingSpec::kpr(2, 2, 1).unwrap();
        let v1 = CoefElem::generator(k, 1).unwrap();
        let s = USeries::monomial(CoefElem::from_int(k, 2), 1, 4)
            .add(&USeries::monomial(v1.clone(), 2, 4))
            .unwrap()
            .add(&USeries::monomial(&v1 * &v1, 3, 4).scale_int(3))
            .unwrap();
        let m = ModSeries::from_useries(&s);
        assert_eq!(m.coeffs(), &[0, 2, 1, 3]);
        assert_eq!(m.to_useries(k, 2).unwrap(), s);
        assert!(m.to_useries(k, 3).is_err());
    }
}
