//! Euler classes of sums of weighted line bundles and their leading forms.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fgl::{FormalGroupLaw, Provenance};
use crate::linalg::ModMatrix;
use crate::modseries::ModSeries;
use crate::ringcore::{CoefElem, Ideal};
use crate::series::USeries;

/// Circle weights `x_w p^w` with `p ∤ x_w`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineBundleWeights {
    p: u64,
    weights: Vec<i64>,
    decomposition: Vec<(i64, u32)>,
}

impl LineBundleWeights {
    pub fn new(p: u64, weights: &[i64]) -> Result<Self> {
        let mut decomposition = Vec::with_capacity(weights.len());
        for &w in weights {
            if w == 0 {
                return Err(Error::ZeroWeight);
            }
            let (mut x, mut e) = (w, 0u32);
            while x % p as i64 == 0 {
                x /= p as i64;
                e += 1;
            }
            decomposition.push((x, e));
        }
        Ok(LineBundleWeights { p, weights: weights.to_vec(), decomposition })
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    /// `(x_w, w)` per weight.
    pub fn decomposition(&self) -> &[(i64, u32)] {
        &self.decomposition
    }

    /// `Σ_w p^{n w}`.
    pub fn leading_exponent(&self, n: usize) -> usize {
        self.decomposition.iter().map(|&(_, e)| (self.p as usize).pow(n as u32 * e)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct EulerClass {
    pub series: USeries,
    pub source: LineBundleWeights,
    pub provenance: Provenance,
    pub height: usize,
}

/// `Π_w [w](u)`, truncated at the law's order.
pub fn euler_of_weights(law: &FormalGroupLaw, wts: &LineBundleWeights) -> Result<EulerClass> {
    if wts.p != law.spec().p {
        return Err(Error::Invalid(format!("weights decomposed at p={}, law has p={}", wts.p, law.spec().p)));
    }
    let mut e = USeries::one(*law.spec(), law.trunc());
    for &w in wts.weights() {
        e = e.mul(&law.l_series(w)?)?;
    }
    Ok(EulerClass { series: e, source: wts.clone(), provenance: law.provenance(), height: law.spec().n })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeadingForm {
    pub k: usize,
    /// Coefficient of `u^k`.
    pub x: CoefElem,
    /// `x(u) = Σ_{j>=k} e_j u^{j-k}`, so that `e = u^k x(u) + m`.
    pub x_series: USeries,
    /// Every coefficient below `u^k` lies in `m_0`.
    pub remainder_in_m0: bool,
}

impl LeadingForm {
    pub fn to_json(&self) -> Value {
        json!({
            "k": self.k,
            "x": self.x.to_string(),
            "x_is_unit": self.x.is_unit(),
            "remainder_in_m0": self.remainder_in_m0,
        })
    }
}

/// `e = u^k x + m` with `k = Σ p^{n w}`, `x` a unit and `m ∈ m_0[[u]]`.
///
/// `k` is computed from the weights alone and then certified against the
/// series; a non-unit `x` or a remainder outside `m_0` is a hard failure.
pub fn leading_form(e: &EulerClass) -> Result<LeadingForm> {
    if !matches!(e.provenance, Provenance::Kpr | Provenance::En) {
        return Err(Error::UnsupportedRing(format!("{} has no local structure here", e.series.spec().descriptor())));
    }
    let k = e.source.leading_exponent(e.height);
    let t = e.series.trunc();
    if t <= k {
        return Err(Error::TruncationTooSmall { needed: k + 1, got: t });
    }
    let mut remainder_in_m0 = true;
    for j in 0..k {
        if !e.series.coeff(j).in_ideal(Ideal::M0)? {
            remainder_in_m0 = false;
        }
    }
    let x = e.series.coeff(k).clone();
    if !x.is_unit() {
        return Err(Error::UnitCertificate(format!("coefficient {x} of u^{k} is not a unit")));
    }
    if !remainder_in_m0 {
        return Err(Error::UnitCertificate(format!("terms below u^{k} are not in m_0")));
    }
    let x_series = e.series.coeffs()[k..].to_vec();
    let x_series = USeries::from_coeffs(*e.series.spec(), t - k, x_series)?;
    Ok(LeadingForm { k, x, x_series, remainder_in_m0 })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelVector {
    pub basis: usize,
    /// Coefficients of `u^0 .. u^{T-k-1}` in `Z/p^{r-d}`.
    pub coeffs: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InjectivityCertificate {
    pub k: usize,
    pub trunc: usize,
    pub window: usize,
    pub specialization: &'static str,
    pub moduli: Vec<u64>,
    pub kernel: Vec<KernelVector>,
    pub injective: bool,
}

/// Multiplication by `e` on the synthetic module `⊕_b m_0^{d_b} R[[u]]`,
/// `R = K_{p^r}(n)*` with `v_n -> 1`, from `u`-degrees below `T - k` into
/// `R[[u]]/u^T`. Basis element `b` of filtration degree `d_b` spans a copy of
/// `p^{d_b} Z/p^r ≅ Z/p^{r-d_b}`, and `e` acts diagonally.
pub fn ab_injectivity_check(
    e: &EulerClass,
    k: usize,
    filtration_degrees: &[u32],
    trunc: usize,
) -> Result<InjectivityCertificate> {
    let spec = e.series.spec();
    if e.provenance != Provenance::Kpr {
        return Err(Error::UnsupportedRing(format!(
            "the injectivity engine works over K_{{p^r}}(n), not {}",
            spec.descriptor()
        )));
    }
    if trunc <= k {
        return Err(Error::TruncationTooSmall { needed: k + 1, got: trunc });
    }
    if trunc > e.series.trunc() {
        return Err(Error::TruncationTooSmall { needed: trunc, got: e.series.trunc() });
    }
    let series = ModSeries::from_useries(&e.series.resized(trunc));
    let (p, r) = (spec.p, spec.r);
    let window = trunc - k;
    let mut kernel = Vec::new();
    let mut moduli = Vec::new();
    for (b, &d) in filtration_degrees.iter().enumerate() {
        if d >= r {
            moduli.push(1);
            continue;
        }
        let s = r - d;
        let mut mat = ModMatrix::zero(p, s, trunc, window);
        for j in 0..window {
            for i in j..trunc {
                mat.set(i, j, series.coeff(i - j));
            }
        }
        moduli.push(mat.modulus());
        for g in mat.kernel() {
            kernel.push(KernelVector { basis: b, coeffs: g });
        }
    }
    Ok(InjectivityCertificate {
        k,
        trunc,
        window,
        specialization: "v_n -> 1",
        moduli,
        injective: kernel.is_empty(),
        kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgl::FormalGroupLaw;

    fn k21(t: usize) -> FormalGroupLaw {
        FormalGroupLaw::kpr(2, 1, 1, t).unwrap()
    }

    #[test]
    fn euler_examples() {
        let f = k21(6);
        let e = |w: &[i64]| euler_of_weights(&f, &LineBundleWeights::new(2, w).unwrap()).unwrap();
        assert_eq!(e(&[1]).series.to_string(), "u");
        assert_eq!(e(&[2]).series.to_string(), "v1*u^2");
        assert_eq!(e(&[1, 1]).series.to_string(), "u^2");
        assert!(matches!(LineBundleWeights::new(2, &[1, 0]), Err(Error::ZeroWeight)));
    }

    #[test]
    fn leading_forms() {
        let f = k21(8);
        let lf = |w: &[i64]| leading_form(&euler_of_weights(&f, &LineBundleWeights::new(2, w).unwrap()).unwrap()).unwrap();
        let a = lf(&[2]);
        assert_eq!((a.k, a.x.to_string()), (2, "v1".to_string()));
        let b = lf(&[2, 2]);
        assert_eq!((b.k, b.x.to_string()), (4, "v1^2".to_string()));
        let c = lf(&[3]);
        assert_eq!((c.k, c.x.to_string()), (1, "1".to_string()));
        let e = euler_of_weights(&f, &LineBundleWeights::new(2, &[4, 4]).unwrap()).unwrap();
        assert_eq!(leading_form(&e), Err(Error::TruncationTooSmall { needed: 9, got: 8 }));
    }

    #[test]
    fn injectivity_engine() {
        let f = k21(6);
        let e = euler_of_weights(&f, &LineBundleWeights::new(2, &[1]).unwrap()).unwrap();
        let cert = ab_injectivity_check(&e, 1, &[0], 5).unwrap();
        assert!(cert.injective);
        let e2 = euler_of_weights(&f, &LineBundleWeights::new(2, &[2]).unwrap()).unwrap();
        let cert = ab_injectivity_check(&e2, 2, &[0], 6).unwrap();
        assert!(cert.injective && cert.window == 4);
        // corrupt: remove the leading term
        let mut bad = e2.clone();
        bad.series.set_coeff(2, CoefElem::zero(*f.spec()));
        let cert = ab_injectivity_check(&bad, 2, &[0], 6).unwrap();
        assert!(!cert.injective);
        assert!(matches!(ab_injectivity_check(&e2, 2, &[0], 2), Err(Error::TruncationTooSmall { needed: 3, .. })));
    }
}
