#![allow(dead_code)]

use fgl_forge::bounds::{MapSpec, ModelSpec};
use rand::rngs::Xoshiro256PlusPlus;
use rand::{RngExt, SeedableRng};

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn vp(mut x: i64, p: u64) -> u32 {
    let mut e = 0;
    while x % p as i64 == 0 {
        x /= p as i64;
        e += 1;
    }
    e
}

/// `Σ_w Σ_j p^{n_j v_p(w)}`, spelled out.
pub fn direct_b(p: u64, weights: &[i64], heights: &[usize]) -> u128 {
    let mut total = 0u128;
    for &w in weights {
        for &n in heights {
            let mut term = 1u128;
            for _ in 0..(n as u32 * vp(w, p)) {
                term *= p as u128;
            }
            total += term;
        }
    }
    total
}

pub struct KernelJob {
    pub model: ModelSpec,
    pub weights: Vec<i64>,
    pub a: usize,
    pub q: u32,
}

/// A random filtered model whose connecting maps respect degrees, heights
/// and the filtration, truncated at exactly `A + qB`.
pub fn random_kernel_job(r: &mut Xoshiro256PlusPlus, p: u64) -> KernelJob {
    let t = r.random_range(1..=3usize);
    let mut heights: Vec<usize> = (0..t).map(|_| r.random_range(1..=2usize)).collect();
    heights.sort_unstable_by(|a, b| b.cmp(a));
    let shifts: Vec<i64> = (0..t).map(|_| 2 * r.random_range(0..=3i64)).collect();
    let pool: &[i64] = if p == 2 { &[1, -1, 2, -2, 3, -3, 5] } else { &[1, -1, 2, -2, 3, -3, 4] };
    let nw = r.random_range(1..=2usize);
    let weights: Vec<i64> = (0..nw).map(|_| pool[r.random_range(0..pool.len())]).collect();
    let a = r.random_range(1..=4usize);
    let q = t as u32;
    let b = direct_b(p, &weights, &heights) as usize;
    let trunc = a + q as usize * b;
    let top = heights[0];
    let mut maps = Vec::new();
    for i in 0..t {
        for j in i + 1..t {
            if !r.random_bool(0.6) {
                continue;
            }
            let want = 2 * nw as i64 + shifts[j] - shifts[i];
            let mut terms = Vec::new();
            if want >= 0 && ((want / 2) as usize) < trunc {
                terms.push(((want / 2) as usize, "1".to_string()));
            }
            let e = want / 2 + (p as i64).pow(top as u32) - 1;
            if e >= 0 && (e as usize) < trunc && (terms.is_empty() || r.random_bool(0.5)) {
                terms.push((e as usize, format!("v{top}")));
            }
            if !terms.is_empty() {
                maps.push(MapSpec { from: j, to: i, terms });
            }
        }
    }
    KernelJob { model: ModelSpec { p, heights, shifts, trunc, maps }, weights, a, q }
}
