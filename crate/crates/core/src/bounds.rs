//! Effective bounds: π-series over `BP*/I_h`, the factorization of
//! `[p^a](u)`, the constants `B` and `C`, and the kernel-vanishing check on
//! synthetic filtered modules.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fgl::FormalGroupLaw;
use crate::ringcore::RingSpec;
use crate::series::USeries;

mod kernel;
pub use kernel::{
    kernel_vanishing_check, FilteredModuleModel, KernelCertificate, KernelOptions, MapSpec, ModelSpec, SliceMap, Witness,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LandweberFiltration {
    heights: Vec<usize>,
}

impl LandweberFiltration {
    pub fn new(heights: &[usize]) -> Self {
        LandweberFiltration { heights: heights.to_vec() }
    }

    pub fn heights(&self) -> &[usize] {
        &self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    /// Warnings for slices above the estimate `n_j <= ceil(log_p q)`.
    pub fn height_warnings(&self, p: u64, q: u64) -> Vec<String> {
        let mut cap = 0usize;
        while (p as u128).pow(cap as u32) < q as u128 {
            cap += 1;
        }
        self.heights
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > cap)
            .map(|(j, &n)| format!("slice {j}: height {n} exceeds ceil(log_{p} {q}) = {cap}"))
            .collect()
    }
}

fn checked_pow(p: u64, e: u64) -> Result<u128> {
    let e = u32::try_from(e).map_err(|_| Error::Invalid("exponent overflow".into()))?;
    (p as u128).checked_pow(e).ok_or_else(|| Error::Invalid(format!("{p}^{e} overflows")))
}

/// `B = Σ_{w,j} p^{n_j w}`.
pub fn bound_b(p: u64, weight_exponents: &[u32], filt: &LandweberFiltration) -> Result<u128> {
    let mut total = 0u128;
    for &w in weight_exponents {
        for &n in filt.heights() {
            total = total
                .checked_add(checked_pow(p, n as u64 * w as u64)?)
                .ok_or_else(|| Error::Invalid("B overflows".into()))?;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LensBound {
    pub c: u128,
    pub r_min: u128,
}

/// `C = Σ_j p^{s n_j}` and `r = q(q-1)C`.
pub fn lens_bound(p: u64, q: u64, s: u32, filt: &LandweberFiltration) -> Result<LensBound> {
    let mut c = 0u128;
    for &n in filt.heights() {
        c = c.checked_add(checked_pow(p, s as u64 * n as u64)?).ok_or_else(|| Error::Invalid("C overflows".into()))?;
    }
    let q = q as u128;
    let r_min = q
        .checked_mul(q.saturating_sub(1))
        .and_then(|x| x.checked_mul(c))
        .ok_or_else(|| Error::Invalid("r overflows".into()))?;
    Ok(LensBound { c, r_min })
}

/// Least `n >= 1` with `2(p^n - 1) > m + 1`.
pub fn choose_height(m: u64, p: u64) -> usize {
    let mut n = 1usize;
    while 2 * ((p as u128).pow(n as u32) - 1) <= m as u128 + 1 {
        n += 1;
    }
    n
}

/// Order to which `[p](u)` must be known for `[p^a](u)` mod `u^target`.
fn p_series_order(p: u64, h: usize, a: u32, target: usize) -> usize {
    if a == 0 {
        return 0;
    }
    let val = (p as usize).pow(a * h as u32);
    if target <= val {
        return 0;
    }
    if a == 1 {
        return target;
    }
    let v = (p as usize).pow((a - 1) * h as u32);
    let tf = target.div_ceil(v);
    let tg = target - ((p as usize).pow(h as u32) - 1) * v;
    tf.max(p_series_order(p, h, a - 1, tg))
}

/// `[p^a](u)` mod `u^target`, by repeated composition with `ps = [p](u)`,
/// carrying only the precision each step needs.
fn p_power(ps: &USeries, p: u64, h: usize, a: u32, target: usize) -> Result<USeries> {
    let spec = *ps.spec();
    if a == 0 {
        return Ok(USeries::var(spec, target));
    }
    let val = (p as usize).pow(a * h as u32);
    if target <= val {
        return Ok(USeries::zero(spec, target));
    }
    if a == 1 {
        if ps.trunc() < target {
            return Err(Error::TruncationTooSmall { needed: target, got: ps.trunc() });
        }
        return Ok(ps.resized(target));
    }
    let v = (p as usize).pow((a - 1) * h as u32);
    let tg = target - ((p as usize).pow(h as u32) - 1) * v;
    let g = p_power(ps, p, h, a - 1, tg)?;
    Ok(ps.compose_to(&g, target)?)
}

/// `[p](u)` over `BP*/I_h` mod `u^order`. Generators `v_k` with
/// `p^k >= order` cannot reach the result and are dropped.
fn quotient_p_series(p: u64, h: usize, order: usize) -> Result<USeries> {
    let order = order.max(2);
    let mut top = h + 1;
    while (p as usize).pow(top as u32 + 1) < order {
        top += 1;
    }
    let spec = RingSpec::bp_mod_ideal(p, h, top)?;
    let law = FormalGroupLaw::new(spec, order)?;
    Ok(law.l_series(p as i64)?)
}

/// `π_h(u) = [p](u) / u^{p^h}` from a p-series known mod `u^{T_p}`.
fn pi_from(ps: &USeries, p: u64, h: usize) -> Result<USeries> {
    let k = (p as usize).pow(h as u32);
    Ok(ps.div_u_power(k)?)
}

/// `π_h[j] = π_h([p^j](u))` mod `u^T`, over `BP*/I_h`.
pub fn pi_series(p: u64, h: usize, j: u32, trunc: usize) -> Result<USeries> {
    if h == 0 {
        return Err(Error::Invalid("height must be at least 1".into()));
    }
    let k = (p as usize).pow(h as u32);
    let order = (trunc + k).max(p_series_order(p, h, j, trunc));
    let ps = quotient_p_series(p, h, order)?;
    pi_index(&ps, p, h, j, trunc)
}

fn pi_index(ps: &USeries, p: u64, h: usize, j: u32, trunc: usize) -> Result<USeries> {
    let pi = pi_from(ps, p, h)?;
    if j == 0 {
        return Ok(pi.resized(trunc));
    }
    let g = p_power(ps, p, h, j, trunc)?;
    Ok(pi.compose_to(&g, trunc)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UpowersCertificate {
    pub p: u64,
    pub h: usize,
    pub a: u32,
    pub trunc: usize,
    /// Order to which `[p](u)` over `BP*/I_h` was computed.
    pub p_series_order: usize,
    pub holds: bool,
    pub first_mismatch: Option<usize>,
}

impl UpowersCertificate {
    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p,
            "h": self.h,
            "a": self.a,
            "T": self.trunc,
            "p_series_order": self.p_series_order,
            "identity": "[p^a](u) = u^{p^{ah}} * prod_{j<a} pi_h[j]^{p^{(a-1-j)h}} mod I_h",
            "holds": self.holds,
            "first_mismatch": self.first_mismatch,
        })
    }
}

/// Both sides of `[p^a](u) = u^{p^{ah}} Π_{j<a} π_h[j]^{p^{(a-1-j)h}}` over
/// `BP*/I_h`, mod `u^T`.
pub fn verify_upowers(p: u64, h: usize, a: u32, trunc: usize) -> Result<UpowersCertificate> {
    if a == 0 || h == 0 {
        return Err(Error::Invalid("a and h must be at least 1".into()));
    }
    let lead = (p as usize).pow(a * h as u32);
    if trunc <= lead {
        return Err(Error::TruncationTooSmall { needed: lead + 1, got: trunc });
    }
    let s = trunc - lead;
    let k = (p as usize).pow(h as u32);
    let mut order = p_series_order(p, h, a, trunc).max(s + k);
    for j in 1..a {
        order = order.max(p_series_order(p, h, j, s));
    }
    let ps = quotient_p_series(p, h, order)?;
    let lhs = p_power(&ps, p, h, a, trunc)?;
    let spec = *ps.spec();
    let mut prod = USeries::one(spec, s);
    for j in 0..a {
        let e = (p as u64).pow((a - 1 - j) * h as u32);
        prod = prod.mul(&pi_index(&ps, p, h, j, s)?.pow(e))?;
    }
    let rhs = prod.resized(trunc).shift(lead);
    let first_mismatch = (0..trunc).find(|&i| lhs.coeff(i) != rhs.coeff(i));
    Ok(UpowersCertificate { p, h, a, trunc, p_series_order: order, holds: first_mismatch.is_none(), first_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(bound_b(2, &[0], &LandweberFiltration::new(&[1])).unwrap(), 1);
        assert_eq!(bound_b(2, &[0, 1], &LandweberFiltration::new(&[1, 1, 2])).unwrap(), 11);
        assert_eq!(bound_b(2, &[], &LandweberFiltration::new(&[1, 2])).unwrap(), 0);
        let l = lens_bound(2, 3, 1, &LandweberFiltration::new(&[1, 2])).unwrap();
        assert_eq!((l.c, l.r_min), (6, 36));
        assert_eq!(lens_bound(2, 1, 1, &LandweberFiltration::new(&[1, 2])).unwrap().r_min, 0);
        assert_eq!(lens_bound(3, 2, 0, &LandweberFiltration::new(&[1, 2, 2])).unwrap().c, 3);
        assert_eq!(choose_height(0, 2), 1);
        assert_eq!(choose_height(5, 2), 3);
        assert_eq!(choose_height(4, 2), 2);
        assert_eq!(choose_height(5, 3), 2);
        assert_eq!(LandweberFiltration::new(&[1, 3]).height_warnings(2, 3).len(), 1);
    }

    #[test]
    fn pi_series_shape() {
        let pi = pi_series(2, 1, 0, 6).unwrap();
        assert_eq!(pi.coeff(0).to_string(), "v1");
        assert!(pi.coeff(1).is_zero());
        assert_eq!(pi.coeff(2).to_string(), "v2");
        assert_eq!(pi_series(2, 2, 0, 4).unwrap().coeff(0).to_string(), "v2");
        assert_eq!(pi_series(3, 1, 1, 8).unwrap().coeff(0).to_string(), "v1");
    }

    #[test]
    fn upowers_small() {
        for (h, a, t) in [(1, 1, 6), (1, 2, 20), (2, 2, 24), (1, 3, 12)] {
            let c = verify_upowers(2, h, a, t).unwrap();
            assert!(c.holds, "{c:?}");
        }
        assert!(matches!(verify_upowers(2, 1, 2, 4), Err(Error::TruncationTooSmall { needed: 5, .. })));
    }

    #[test]
    fn upowers_against_chain() {
        // [4](u) from the law directly versus the iterated composition
        let spec = RingSpec::bp_mod_ideal(2, 1, 4).unwrap();
        let law = FormalGroupLaw::new(spec, 20).unwrap();
        let direct = law.l_series(4).unwrap();
        let ps = law.l_series(2).unwrap();
        assert_eq!(p_power(&ps, 2, 1, 2, 20).unwrap(), direct);
    }
}
