//! Morava K-theory of a Hamiltonian circle space from its fixed-point data:
//! assembly by split extensions, cardinality bookkeeping, and the kernel and
//! cardinality bounds that force the Morse inequalities to be equalities.
//!
//! Cardinalities follow one convention throughout: a free module of rank `d`
//! over `K_{p^r}(n)*` counts as `p^{rd}` (one period, `v_n -> 1`).

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::euler::{euler_of_weights, leading_form, LineBundleWeights};
use crate::fgl::FormalGroupLaw;
use crate::linalg::ModMatrix;
use crate::modseries::ModSeries;

/// Moment values arrive as JSON integers or `"a/b"` strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MomentValue {
    Int(i64),
    Text(String),
}

impl MomentValue {
    pub fn to_rational(&self) -> Result<BigRational> {
        match self {
            MomentValue::Int(x) => Ok(BigRational::from_integer((*x).into())),
            MomentValue::Text(s) => {
                let bad = || Error::Invalid(format!("moment value {s:?} is not a rational number"));
                let (a, b) = match s.split_once('/') {
                    Some((a, b)) => (a.trim(), b.trim()),
                    None => (s.trim(), "1"),
                };
                let a: num_bigint::BigInt = a.parse().map_err(|_| bad())?;
                let b: num_bigint::BigInt = b.parse().map_err(|_| bad())?;
                if b.is_zero() {
                    return Err(bad());
                }
                Ok(BigRational::new(a, b))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedComponentDatum {
    pub name: String,
    /// Degrees of free generators of `K*(F_β)`.
    pub generator_degrees: Vec<i64>,
    pub morse_index: i64,
    pub normal_weights: Vec<i64>,
    pub moment_value: MomentValue,
}

impl FixedComponentDatum {
    pub fn rank(&self) -> usize {
        self.generator_degrees.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.morse_index < 0 || self.morse_index % 2 != 0 {
            return Err(Error::Invalid(format!(
                "component {}: Morse index {} must be even and non-negative",
                self.name, self.morse_index
            )));
        }
        if self.normal_weights.contains(&0) {
            return Err(Error::ZeroWeight);
        }
        self.moment_value.to_rational()?;
        Ok(())
    }
}

/// A curated data file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MorseData {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub provenance: String,
    pub components: Vec<FixedComponentDatum>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MorseRing {
    pub p: u64,
    pub r: u32,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Generator {
    pub component: String,
    pub degree: i64,
}

/// One step of the assembly; every step after the first splits a short
/// exact sequence, certified by the leading form of the normal Euler class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplittingStep {
    pub step: usize,
    pub component: String,
    pub moment_value: String,
    pub morse_index: i64,
    pub rank: usize,
    pub k: usize,
    pub x: String,
    pub x_is_unit: bool,
    pub splits: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssembledModule {
    pub ring: MorseRing,
    pub generators: Vec<Generator>,
    pub trace: Vec<SplittingStep>,
    /// Index of a dropped generator (negative control only).
    pub dropped: Option<usize>,
}

impl AssembledModule {
    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn splitting_steps(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn degrees(&self) -> Vec<i64> {
        self.generators.iter().map(|g| g.degree).collect()
    }

    /// Largest `k_β` over all components.
    pub fn max_k(&self) -> usize {
        self.trace.iter().map(|s| s.k).max().unwrap_or(0)
    }

    /// Negative control: the same assembly with generator `i` removed.
    pub fn corrupted_drop(&self, i: usize) -> Self {
        let mut out = self.clone();
        if i < out.generators.len() {
            out.generators.remove(i);
            out.dropped = Some(i);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "ring": self.ring,
            "rank": self.rank(),
            "generators": self.generators,
            "splitting_steps": self.splitting_steps(),
            "trace": self.trace,
            "dropped": self.dropped,
        })
    }
}

/// Assemble `⊕_β K^{*+λ_β}(F_β)` in order of increasing moment value.
pub fn assemble(data: &[FixedComponentDatum], ring: MorseRing) -> Result<AssembledModule> {
    let mut keyed = Vec::with_capacity(data.len());
    for c in data {
        c.validate()?;
        keyed.push((c.moment_value.to_rational()?, c));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    for w in keyed.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Invalid(format!(
                "components {} and {} share moment value {}; the ordering is undefined",
                w[0].1.name, w[1].1.name, w[0].0
            )));
        }
    }
    let mut generators = Vec::new();
    let mut trace = Vec::new();
    for (step, (mv, c)) in keyed.iter().enumerate() {
        let wts = LineBundleWeights::new(ring.p, &c.normal_weights)?;
        let k = wts.leading_exponent(ring.n);
        let law = FormalGroupLaw::kpr(ring.p, ring.r, ring.n, (k + 1).max(2))?;
        let lf = leading_form(&euler_of_weights(&law, &wts)?)?;
        trace.push(SplittingStep {
            step,
            component: c.name.clone(),
            moment_value: mv.to_string(),
            morse_index: c.morse_index,
            rank: c.rank(),
            k: lf.k,
            x: lf.x.to_string(),
            x_is_unit: lf.x.is_unit(),
            splits: lf.x.is_unit() && lf.remainder_in_m0,
        });
        for &d in &c.generator_degrees {
            generators.push(Generator { component: c.name.clone(), degree: c.morse_index + d });
        }
    }
    Ok(AssembledModule { ring, generators, trace, dropped: None })
}

/// `|Q|` for a free module of the given rank: `p^{r·rank}`.
pub fn cardinality(p: u64, r: u32, rank: usize) -> BigUint {
    BigUint::from(p).pow(r * rank as u32)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MorseEqualityCertificate {
    pub ring: MorseRing,
    pub fixed_rank: usize,
    pub assembled_rank: usize,
    /// `log_p |K*(F)|`.
    pub fixed_log_p: u64,
    /// `log_p |K*(M)|`.
    pub assembled_log_p: u64,
    pub fixed_cardinality: String,
    pub assembled_cardinality: String,
    pub inequality_holds: bool,
    pub equality: bool,
    pub degrees_match: bool,
    pub all_steps_split: bool,
    pub degenerate: bool,
}

impl MorseEqualityCertificate {
    pub fn passed(&self) -> bool {
        self.equality && self.degrees_match && self.all_steps_split
    }

    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        v["passed"] = json!(self.passed());
        v["convention"] = json!("|Q| = p^(r*rank), v_n -> 1");
        v
    }
}

/// Compare `|K*(F)|`, computed from the data alone, with `|K*(M)|` of an
/// assembly.
pub fn check_morse_equality(data: &[FixedComponentDatum], m: &AssembledModule) -> MorseEqualityCertificate {
    let ring = m.ring;
    let fixed_rank: usize = data.iter().map(FixedComponentDatum::rank).sum();
    let mut expected: Vec<i64> =
        data.iter().flat_map(|c| c.generator_degrees.iter().map(move |d| c.morse_index + d)).collect();
    let mut got = m.degrees();
    expected.sort_unstable();
    got.sort_unstable();
    let fixed = cardinality(ring.p, ring.r, fixed_rank);
    let assembled = cardinality(ring.p, ring.r, m.rank());
    MorseEqualityCertificate {
        ring,
        fixed_rank,
        assembled_rank: m.rank(),
        fixed_log_p: ring.r as u64 * fixed_rank as u64,
        assembled_log_p: ring.r as u64 * m.rank() as u64,
        fixed_cardinality: fixed.to_string(),
        assembled_cardinality: assembled.to_string(),
        inequality_holds: fixed >= assembled,
        equality: fixed == assembled,
        degrees_match: expected == got,
        all_steps_split: m.trace.iter().all(|s| s.splits),
        degenerate: data.is_empty(),
    }
}

pub fn morse_equality_check(data: &[FixedComponentDatum], ring: MorseRing) -> Result<MorseEqualityCertificate> {
    let m = assemble(data, ring)?;
    Ok(check_morse_equality(data, &m))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentKernel {
    pub component: String,
    pub rank: usize,
    pub k: usize,
    /// `log_p` of the kernel of `e(ν)` on `⊕_{j<=m} K*(F_β) u^j`.
    pub kernel_log_p: u64,
    /// Kernel generators of one block, as coefficients of `u^0 .. u^m`.
    pub kernel_generators: Vec<Vec<u64>>,
    /// The kernel meets `span{u^j : j <= m-k}` trivially.
    pub meets_low_span_trivially: bool,
    /// The kernel lies in `span{u^j : j > m-k}` (reported, not required).
    pub contained_in_top_window: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WindowCertificate {
    pub ring: MorseRing,
    pub m: usize,
    /// `max_β k_β`.
    pub k: usize,
    pub components: Vec<ComponentKernel>,
    pub fixed_rank: usize,
    pub assembled_rank: usize,
    /// `|K(F)|^{m+1} - |K(F)|^{k+1}`.
    pub euler_lhs: String,
    /// `|K(M_{S^1,m})| = p^{r·rank_M·(m+1)}`.
    pub euler_rhs: String,
    pub euler_bound_holds: bool,
    pub leray_lhs: String,
    /// `|K(M)|^{m+1}`.
    pub leray_rhs: String,
    pub leray_bound_holds: bool,
}

impl WindowCertificate {
    pub fn kernel_bound_holds(&self) -> bool {
        self.components.iter().all(|c| c.meets_low_span_trivially)
    }

    pub fn passed(&self) -> bool {
        self.kernel_bound_holds() && self.euler_bound_holds && self.leray_bound_holds
    }

    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        v["kernel_bound_holds"] = json!(self.kernel_bound_holds());
        v["passed"] = json!(self.passed());
        v
    }
}

/// Kernel of `e(ν)` on `⊕_{j=0}^m K*(F_β) u^j` for one component, over
/// `Z/p^r` with `v_n -> 1`. The module is `rank` identical blocks.
pub fn component_kernel(c: &FixedComponentDatum, m: usize, ring: MorseRing) -> Result<ComponentKernel> {
    c.validate()?;
    let wts = LineBundleWeights::new(ring.p, &c.normal_weights)?;
    let k = wts.leading_exponent(ring.n);
    if m < k {
        return Err(Error::Invalid(format!("window empty: m = {m} < k = {k} for component {}", c.name)));
    }
    let law = FormalGroupLaw::kpr(ring.p, ring.r, ring.n, (m + 1).max(2))?;
    let e = euler_of_weights(&law, &wts)?;
    leading_form(&e)?;
    let s = ModSeries::from_useries(&e.series);
    let (d, size) = (c.rank(), m + 1);
    let mut full = ModMatrix::zero(ring.p, ring.r, d * size, d * size);
    let low = m - k + 1;
    let mut restricted = ModMatrix::zero(ring.p, ring.r, d * size, d * low);
    for b in 0..d {
        for j in 0..size {
            for i in j..size {
                full.set(b * size + i, b * size + j, s.coeff(i - j));
                if j < low {
                    restricted.set(b * size + i, b * low + j, s.coeff(i - j));
                }
            }
        }
    }
    let mut block = ModMatrix::zero(ring.p, ring.r, size, size);
    for j in 0..size {
        for i in j..size {
            block.set(i, j, s.coeff(i - j));
        }
    }
    let kernel_generators = block.kernel();
    let contained_in_top_window = kernel_generators.iter().all(|g| g[..low].iter().all(|&x| x == 0));
    Ok(ComponentKernel {
        component: c.name.clone(),
        rank: d,
        k,
        kernel_log_p: full.log_kernel_size(),
        kernel_generators,
        meets_low_span_trivially: restricted.log_kernel_size() == 0,
        contained_in_top_window,
    })
}

/// The kernel bound for every component, and both cardinality bounds with
/// `F = ⊔ F_β`, `k = max k_β`, and `M` taken from the assembly.
pub fn kernel_window_check(
    data: &[FixedComponentDatum],
    m: usize,
    assembled: &AssembledModule,
) -> Result<WindowCertificate> {
    let ring = assembled.ring;
    let mut components = Vec::with_capacity(data.len());
    for c in data {
        components.push(component_kernel(c, m, ring)?);
    }
    let k = components.iter().map(|c| c.k).max().unwrap_or(0);
    let fixed_rank: usize = data.iter().map(FixedComponentDatum::rank).sum();
    let f = cardinality(ring.p, ring.r, fixed_rank);
    let mf = cardinality(ring.p, ring.r, assembled.rank());
    let euler_lhs = f.pow(m as u32 + 1) - f.pow(k as u32 + 1);
    let borel = cardinality(ring.p, ring.r, assembled.rank() * (m + 1));
    let leray_rhs = mf.pow(m as u32 + 1);
    Ok(WindowCertificate {
        ring,
        m,
        k,
        components,
        fixed_rank,
        assembled_rank: assembled.rank(),
        euler_bound_holds: euler_lhs <= borel,
        euler_lhs: euler_lhs.to_string(),
        euler_rhs: borel.to_string(),
        leray_bound_holds: borel <= leray_rhs,
        leray_lhs: borel.to_string(),
        leray_rhs: leray_rhs.to_string(),
    })
}

/// Distinct even degrees occurring in an assembly, for reports.
pub fn degree_profile(m: &AssembledModule) -> Vec<(i64, usize)> {
    let mut out: BTreeMap<i64, usize> = BTreeMap::new();
    for d in m.degrees() {
        *out.entry(d).or_default() += 1;
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn comp(name: &str, lam: i64, w: &[i64], mv: i64) -> FixedComponentDatum {
        FixedComponentDatum {
            name: name.into(),
            generator_degrees: vec![0],
            morse_index: lam,
            normal_weights: w.to_vec(),
            moment_value: MomentValue::Int(mv),
        }
    }

    fn cp1() -> Vec<FixedComponentDatum> {
        vec![comp("N", 2, &[-1], 1), comp("S", 0, &[1], 0)]
    }

    const K21: MorseRing = MorseRing { p: 2, r: 1, n: 1 };

    #[test]
    fn assembly_examples() {
        let m = assemble(&cp1(), K21).unwrap();
        assert_eq!(m.rank(), 2);
        assert_eq!(m.degrees(), vec![0, 2]);
        assert_eq!(m.trace[0].component, "S");
        assert_eq!(m.splitting_steps(), 1);
        let single = assemble(&[comp("pt", 0, &[], 0)], K21).unwrap();
        assert_eq!((single.rank(), single.degrees()), (1, vec![0]));
        let cp2 = vec![comp("a", 0, &[1, 2], 0), comp("b", 2, &[-1, 1], 1), comp("c", 4, &[-2, -1], 2)];
        let m = assemble(&cp2, MorseRing { p: 3, r: 1, n: 1 }).unwrap();
        assert_eq!((m.rank(), m.splitting_steps()), (3, 2));
        let dup = vec![comp("a", 0, &[1], 0), comp("b", 2, &[-1], 0)];
        assert!(matches!(assemble(&dup, K21), Err(Error::Invalid(_))));
        let odd = vec![comp("a", 1, &[1], 0)];
        assert!(matches!(assemble(&odd, K21), Err(Error::Invalid(_))));
    }

    #[test]
    fn moments_parse() {
        assert_eq!(MomentValue::Text("3/6".into()).to_rational().unwrap(), BigRational::new(1.into(), 2.into()));
        assert!(MomentValue::Text("1/0".into()).to_rational().is_err());
        let mut a = comp("a", 0, &[1], 0);
        a.moment_value = MomentValue::Text("1/2".into());
        let b = comp("b", 2, &[-1], 0);
        let m = assemble(&[a, b], K21).unwrap();
        assert_eq!(m.trace[0].component, "b");
    }

    #[test]
    fn cardinalities() {
        assert_eq!(cardinality(2, 1, 2), BigUint::from(4u32));
        assert_eq!(cardinality(3, 1, 0), BigUint::one());
        assert_eq!(cardinality(3, 2, 5), BigUint::from(3u32).pow(10));
        let c = morse_equality_check(&cp1(), K21).unwrap();
        assert!(c.passed() && c.fixed_cardinality == "4" && c.assembled_cardinality == "4");
        let e = morse_equality_check(&[], K21).unwrap();
        assert!(e.degenerate && e.equality && e.fixed_cardinality == "1");
        let bad = assemble(&cp1(), K21).unwrap().corrupted_drop(0);
        let c = check_morse_equality(&cp1(), &bad);
        assert!(c.inequality_holds && !c.equality && !c.passed());
    }

    #[test]
    fn kernel_examples() {
        let c = component_kernel(&comp("pt", 0, &[2], 0), 5, K21).unwrap();
        assert_eq!(c.k, 2);
        assert_eq!(c.kernel_log_p, 2);
        assert!(c.meets_low_span_trivially && c.contained_in_top_window);
        for g in &c.kernel_generators {
            assert!(g[..4].iter().all(|&x| x == 0));
        }
        for m in 1..8 {
            let c = component_kernel(&comp("pt", 0, &[1], 0), m, K21).unwrap();
            assert_eq!(c.kernel_log_p, 1);
            assert_eq!(c.kernel_generators, vec![{
                let mut v = vec![0; m + 1];
                v[m] = 1;
                v
            }]);
        }
        assert!(matches!(component_kernel(&comp("pt", 0, &[2], 0), 1, K21), Err(Error::Invalid(_))));
    }

    #[test]
    fn containment_fails_over_z4() {
        // over K_4(1), [2](u) = 2u + ..., and the kernel leaks below the top window
        let ring = MorseRing { p: 2, r: 2, n: 1 };
        let c = component_kernel(&comp("pt", 0, &[2], 0), 6, ring).unwrap();
        assert!(c.meets_low_span_trivially);
        assert!(!c.contained_in_top_window);
    }

    #[test]
    fn bounds_on_cp1() {
        let data = cp1();
        let m = assemble(&data, K21).unwrap();
        let w = kernel_window_check(&data, 4, &m).unwrap();
        assert!(w.passed());
        assert_eq!(w.euler_lhs, (BigUint::from(4u32).pow(5) - BigUint::from(4u32).pow(2)).to_string());
        assert_eq!(w.leray_lhs, w.leray_rhs);
        let w = kernel_window_check(&data, 4, &m.corrupted_drop(1)).unwrap();
        assert!(!w.euler_bound_holds && !w.passed());
    }
}
