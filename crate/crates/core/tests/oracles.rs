//! Independent oracles: numeric specializations of the law built from
//! scratch, brute-force kernels, and direct enumeration.

mod common;

use fgl_forge::euler::{euler_of_weights, LineBundleWeights};
use fgl_forge::fgl::FormalGroupLaw;
use fgl_forge::linalg::ModMatrix;
use fgl_forge::modseries::ModSeries;
use fgl_forge::morse::{component_kernel, FixedComponentDatum, MomentValue, MorseRing};
use fgl_forge::ringcore::{CoefElem, RingSpec};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::RngExt;

type Q = BigRational;

fn q(x: i64) -> Q {
    Q::from_integer(BigInt::from(x))
}

/// Evaluate at `v_i = vals[i-1]`.
fn eval(c: &CoefElem, vals: &[i64]) -> Q {
    let mut total = Q::zero();
    for (exps, coef) in c.terms() {
        let mut t = coef.clone();
        for (i, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                t *= q(vals[i]);
            }
        }
        total += t;
    }
    total
}

/// Log coefficients `λ_k` at `v = vals`, from `p λ_k = Σ_{i<=k} λ_i v_{k-i}^{p^i}`
/// with `v_0 = p`.
fn log_coeffs(p: i64, vals: &[i64], kmax: usize) -> Vec<Q> {
    let v = |j: usize| if j == 0 { q(p) } else { q(*vals.get(j - 1).unwrap_or(&0)) };
    let mut lam = vec![Q::one()];
    for k in 1..=kmax {
        let mut s = Q::zero();
        for (i, li) in lam.iter().enumerate() {
            let mut pw = Q::one();
            for _ in 0..p.pow(i as u32) {
                pw *= v(k - i);
            }
            s += li * pw;
        }
        let mut pk = Q::one();
        for _ in 0..p.pow(k as u32) {
            pk *= q(p);
        }
        lam.push(s / (q(p) - pk));
    }
    lam
}

fn mul1(a: &[Q], b: &[Q]) -> Vec<Q> {
    let t = a.len();
    let mut out = vec![Q::zero(); t];
    for i in 0..t {
        for j in 0..t - i {
            out[i + j] += &a[i] * &b[j];
        }
    }
    out
}

/// Compositional inverse of `f = u + ...` by fixed-point iteration.
fn revert(f: &[Q]) -> Vec<Q> {
    let t = f.len();
    let mut g = vec![Q::zero(); t];
    g[1] = Q::one();
    for _ in 0..t {
        let fg = compose1(f, &g);
        for i in 1..t {
            g[i] = &g[i] - (&fg[i] - if i == 1 { Q::one() } else { Q::zero() });
        }
    }
    g
}

fn compose1(f: &[Q], g: &[Q]) -> Vec<Q> {
    let t = f.len();
    let mut out = vec![Q::zero(); t];
    let mut pw = vec![Q::zero(); t];
    pw[0] = Q::one();
    for c in f.iter() {
        for i in 0..t {
            out[i] += c * &pw[i];
        }
        pw = mul1(&pw, g);
    }
    out
}

/// `F(x, y) = exp(log x + log y)`, as a `t x t` coefficient array.
fn law_numeric(p: i64, vals: &[i64], t: usize) -> Vec<Vec<Q>> {
    let mut kmax = 0;
    while (p as usize).pow(kmax as u32 + 1) < t {
        kmax += 1;
    }
    let lam = log_coeffs(p, vals, kmax);
    let mut log = vec![Q::zero(); t];
    for (k, l) in lam.iter().enumerate() {
        let d = (p as usize).pow(k as u32);
        if d < t {
            log[d] = l.clone();
        }
    }
    let exp = revert(&log);
    // powers of (log x + log y) as bivariate arrays
    let mut s = vec![vec![Q::zero(); t]; t];
    for (d, c) in log.iter().enumerate() {
        if d > 0 {
            s[d][0] += c;
            s[0][d] += c;
        }
    }
    let mul2 = |a: &Vec<Vec<Q>>, b: &Vec<Vec<Q>>| {
        let mut out = vec![vec![Q::zero(); t]; t];
        for i in 0..t {
            for j in 0..t - i {
                if a[i][j].is_zero() {
                    continue;
                }
                for k in 0..t - i - j {
                    for l in 0..t - i - j - k {
                        out[i + k][j + l] += &a[i][j] * &b[k][l];
                    }
                }
            }
        }
        out
    };
    let mut out = vec![vec![Q::zero(); t]; t];
    let mut pw = vec![vec![Q::zero(); t]; t];
    pw[0][0] = Q::one();
    for c in exp.iter() {
        for i in 0..t {
            for j in 0..t {
                out[i][j] += c * &pw[i][j];
            }
        }
        pw = mul2(&pw, &s);
    }
    out
}

#[test]
fn bp_law_matches_numeric_exp_log() {
    for (p, n, vals, t) in [(2i64, 1usize, vec![1i64], 9usize), (2, 2, vec![3, -1], 9), (3, 1, vec![2], 10)] {
        let law = FormalGroupLaw::new(RingSpec::bp(p as u64, n).unwrap(), t).unwrap();
        let num = law_numeric(p, &vals, t);
        for i in 0..t {
            for j in 0..t - i {
                assert_eq!(eval(law.law().coeff(i, j), &vals), num[i][j], "a[{i},{j}] at p={p} v={vals:?}");
            }
        }
    }
}

#[test]
fn l_series_match_iterated_numeric_sum() {
    let (p, vals, t) = (3i64, vec![1i64], 10usize);
    let law = FormalGroupLaw::new(RingSpec::bp(3, 1).unwrap(), t).unwrap();
    let num = law_numeric(p, &vals, t);
    // [l]u = F(u, [l-1]u), evaluated numerically
    let add_u = |g: &[Q]| -> Vec<Q> {
        let mut out = vec![Q::zero(); t];
        let mut gp = vec![Q::zero(); t];
        gp[0] = Q::one();
        for j in 0..t {
            for i in 0..t - j {
                if num[i][j].is_zero() {
                    continue;
                }
                // u^i g^j
                for k in 0..t - i {
                    out[i + k] += &num[i][j] * &gp[k];
                }
            }
            gp = mul1(&gp, g);
        }
        out
    };
    let mut g = vec![Q::zero(); t];
    g[1] = Q::one();
    for l in 2..=5 {
        g = add_u(&g);
        let s = law.l_series(l).unwrap();
        for (j, gj) in g.iter().enumerate() {
            assert_eq!(&eval(s.coeff(j), &vals), gj, "[{l}] coefficient {j}");
        }
    }
}

fn brute_kernel(series: &ModSeries, m: usize, modulus: u64) -> Vec<Vec<u64>> {
    let size = m + 1;
    let mut out = Vec::new();
    let total = modulus.pow(size as u32);
    for code in 0..total {
        let mut v = vec![0u64; size];
        let mut c = code;
        for x in v.iter_mut() {
            *x = c % modulus;
            c /= modulus;
        }
        let mut ok = true;
        for i in 0..size {
            let mut acc = 0u64;
            for j in 0..=i {
                acc = (acc + series.coeff(i - j) * v[j]) % modulus;
            }
            if acc != 0 {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(v);
        }
    }
    out
}

#[test]
fn window_kernel_against_enumeration() {
    let ring = MorseRing { p: 2, r: 2, n: 1 };
    for (w, m) in [(vec![2i64], 4usize), (vec![1, 2], 5), (vec![-2], 5), (vec![3], 4), (vec![2, 2], 5)] {
        let c = FixedComponentDatum {
            name: "pt".into(),
            generator_degrees: vec![0],
            morse_index: 0,
            normal_weights: w.clone(),
            moment_value: MomentValue::Int(0),
        };
        let cert = component_kernel(&c, m, ring).unwrap();
        let law = FormalGroupLaw::kpr(2, 2, 1, m + 1).unwrap();
        let e = euler_of_weights(&law, &LineBundleWeights::new(2, &w).unwrap()).unwrap();
        let s = ModSeries::from_useries(&e.series);
        let ker = brute_kernel(&s, m, 4);
        // |ker| = 2^{kernel_log_p}
        assert_eq!(ker.len() as u64, 1u64 << cert.kernel_log_p, "weights {w:?}");
        let low = m + 1 - cert.k;
        let meets = ker.iter().any(|v| v.iter().any(|&x| x != 0) && v[low..].iter().all(|&x| x == 0));
        assert_eq!(!meets, cert.meets_low_span_trivially, "weights {w:?}");
        let contained = ker.iter().all(|v| v[..low].iter().all(|&x| x == 0));
        assert_eq!(contained, cert.contained_in_top_window, "weights {w:?}");
    }
}

#[test]
fn modular_kernel_sizes_against_enumeration() {
    let mut rng = common::rng(11);
    for (p, r) in [(2u64, 2u32), (3, 1), (2, 3), (3, 2)] {
        let m = p.pow(r);
        for _ in 0..15 {
            let rows = rng.random_range(1..=3usize);
            let cols = rng.random_range(1..=3usize);
            let data: Vec<Vec<i64>> =
                (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0..m as i64)).collect()).collect();
            let a = ModMatrix::from_rows(p, r, &data);
            let mut count = 0u64;
            for code in 0..m.pow(cols as u32) {
                let mut x = vec![0u64; cols];
                let mut c = code;
                for v in x.iter_mut() {
                    *v = c % m;
                    c /= m;
                }
                if a.apply(&x).iter().all(|&y| y == 0) {
                    count += 1;
                }
            }
            assert_eq!(count, p.pow(a.log_kernel_size() as u32), "{data:?} mod {m}");
            for g in a.kernel() {
                assert!(a.apply(&g).iter().all(|&y| y == 0));
            }
        }
    }
}
