//! Linear algebra over `Z/p^r`.
//!
//! Diagonalization by full pivoting on the entry of least p-adic valuation:
//! every remaining entry is then divisible by the pivot, so rows and columns
//! can be cleared without division by non-units.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModMatrix {
    p: u64,
    r: u32,
    m: u64,
    rows: usize,
    cols: usize,
    a: Vec<Vec<u64>>,
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn valuation(x: u64, p: u64, r: u32) -> u32 {
    if x == 0 {
        return r;
    }
    let (mut x, mut v) = (x, 0);
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

fn inv_mod(a: u64, m: u64) -> u64 {
    let (mut t, mut new_t, mut r, mut new_r) = (0i128, 1i128, m as i128, a as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    assert_eq!(r, 1, "{a} is not a unit mod {m}");
    t.rem_euclid(m as i128) as u64
}

/// Diagonal form `U A V = diag(p^{a_k})`.
#[derive(Clone, Debug, Serialize)]
pub struct Diagonalization {
    /// Valuation of the k-th diagonal entry, per column; `r` where the entry
    /// is zero.
    pub valuations: Vec<u32>,
    /// Column transform `V` (column-major: `v[k]` is the k-th column).
    #[serde(skip)]
    pub v: Vec<Vec<u64>>,
}

impl ModMatrix {
    pub fn zero(p: u64, r: u32, rows: usize, cols: usize) -> Self {
        let m = p.checked_pow(r).expect("p^r fits in u64");
        ModMatrix { p, r, m, rows, cols, a: vec![vec![0; cols]; rows] }
    }

    pub fn from_rows(p: u64, r: u32, rows: &[Vec<i64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut out = Self::zero(p, r, rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged matrix");
            for (j, &x) in row.iter().enumerate() {
                out.a[i][j] = x.rem_euclid(out.m as i64) as u64;
            }
        }
        out
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: u64) {
        self.a[i][j] = x % self.m;
    }

    pub fn apply(&self, x: &[u64]) -> Vec<u64> {
        assert_eq!(x.len(), self.cols);
        self.a
            .iter()
            .map(|row| row.iter().zip(x).fold(0u64, |acc, (&a, &b)| (acc + mulmod(a, b, self.m)) % self.m))
            .collect()
    }

    pub fn diagonalize(&self) -> Diagonalization {
        let (p, r, m) = (self.p, self.r, self.m);
        let mut a = self.a.clone();
        let mut v: Vec<Vec<u64>> = (0..self.cols)
            .map(|k| {
                let mut col = vec![0; self.cols];
                col[k] = 1 % m;
                col
            })
            .collect();
        let mut vals = vec![r; self.cols];
        let steps = self.rows.min(self.cols);
        for k in 0..steps {
            let mut best: Option<(u32, usize, usize)> = None;
            for (i, row) in a.iter().enumerate().skip(k) {
                for (j, &x) in row.iter().enumerate().skip(k) {
                    if x != 0 {
                        let val = valuation(x, p, r);
                        if best.is_none_or(|(b, _, _)| val < b) {
                            best = Some((val, i, j));
                        }
                    }
                }
            }
            let Some((val, i, j)) = best else { break };
            a.swap(k, i);
            for row in a.iter_mut() {
                row.swap(k, j);
            }
            v.swap(k, j);
            let pa = p.pow(val);
            let unit_inv = inv_mod(a[k][k] / pa, m);
            for x in a[k].iter_mut() {
                *x = mulmod(*x, unit_inv, m);
            }
            // rows below
            for i in k + 1..self.rows {
                let f = a[i][k] / pa;
                if f == 0 {
                    continue;
                }
                for j in k..self.cols {
                    let sub = mulmod(f, a[k][j], m);
                    a[i][j] = (a[i][j] + m - sub) % m;
                }
            }
            // columns to the right, mirrored in V
            for j in k + 1..self.cols {
                let f = a[k][j] / pa;
                if f == 0 {
                    continue;
                }
                for row in a.iter_mut().skip(k) {
                    let sub = mulmod(f, row[k], m);
                    row[j] = (row[j] + m - sub) % m;
                }
                let (left, right) = v.split_at_mut(j);
                for (x, &y) in right[0].iter_mut().zip(&left[k]) {
                    *x = (*x + m - mulmod(f, y, m)) % m;
                }
            }
            vals[k] = val;
        }
        Diagonalization { valuations: vals, v }
    }

    /// Generators of `{x : A x = 0}`.
    pub fn kernel(&self) -> Vec<Vec<u64>> {
        let d = self.diagonalize();
        let mut gens = Vec::new();
        for (k, &a) in d.valuations.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let scale = self.p.pow(self.r - a);
            let g: Vec<u64> = d.v[k].iter().map(|&x| mulmod(x, scale, self.m)).collect();
            if g.iter().any(|&x| x != 0) {
                gens.push(g);
            }
        }
        gens
    }

    /// `log_p |ker A|`.
    pub fn log_kernel_size(&self) -> u64 {
        self.diagonalize().valuations.iter().map(|&a| a as u64).sum()
    }

    /// `log_p |im A|`.
    pub fn log_image_size(&self) -> u64 {
        self.r as u64 * self.cols as u64 - self.log_kernel_size()
    }
}
