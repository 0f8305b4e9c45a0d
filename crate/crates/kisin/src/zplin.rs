//! Constant-matrix algebra over W(k') and Z/p^N-linear solvers.
//!
//! The residual equations behind trivialization, descent and σ-conjugacy
//! testing are all of the shape L(X) = 0 for a Z/p^N-linear endomorphism L of
//! the matrix space M_n(W(k')) (σ is Z_p-linear, so twisted equations
//! qualify). We materialize L in the flat coordinate basis, compute the
//! kernel by a Smith reduction over Z/p^N, and search the kernel's mod-p span
//! for an invertible element. The search is exhaustive over that span, so a
//! miss is a proof that no invertible solution exists at this precision.

use crate::coeffs::{CoeffParams, WittElem};
use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Dense square matrix over W(k').
#[derive(Clone, PartialEq, Eq)]
pub struct WMatrix {
    n: usize,
    entries: Vec<WittElem>,
    params: Arc<CoeffParams>,
}

impl fmt::Debug for WMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "WMatrix {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                write!(f, "{:?} ", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl WMatrix {
    pub fn zero(params: &Arc<CoeffParams>, n: usize) -> WMatrix {
        WMatrix {
            n,
            entries: vec![params.zero(); n * n],
            params: params.clone(),
        }
    }

    pub fn identity(params: &Arc<CoeffParams>, n: usize) -> WMatrix {
        let mut m = Self::zero(params, n);
        for i in 0..n {
            m.set(i, i, params.one());
        }
        m
    }

    pub fn from_rows(params: &Arc<CoeffParams>, rows: Vec<Vec<WittElem>>) -> WMatrix {
        let n = rows.len();
        let entries = rows.into_iter().flatten().collect();
        WMatrix {
            n,
            entries,
            params: params.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &Arc<CoeffParams> {
        &self.params
    }

    pub fn get(&self, i: usize, j: usize) -> &WittElem {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: WittElem) {
        self.entries[i * self.n + j] = v;
    }

    pub fn add(&self, other: &WMatrix) -> WMatrix {
        WMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.add(b))
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn sub(&self, other: &WMatrix) -> WMatrix {
        WMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.sub(b))
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn mul(&self, other: &WMatrix) -> WMatrix {
        let n = self.n;
        let mut out = Self::zero(&self.params, n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(i, j).add(&a.mul(b));
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> WMatrix {
        let n = self.n;
        let mut out = Self::zero(&self.params, n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    /// Entrywise sigma.
    pub fn sigma(&self) -> WMatrix {
        WMatrix {
            n: self.n,
            entries: self.entries.iter().map(|a| a.sigma()).collect(),
            params: self.params.clone(),
        }
    }

    pub fn sigma_iter(&self, k: usize) -> WMatrix {
        WMatrix {
            n: self.n,
            entries: self.entries.iter().map(|a| a.sigma_iter(k)).collect(),
            params: self.params.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|a| a.is_zero())
    }

    /// Invertible over W(k') iff invertible over the residue field.
    pub fn is_invertible(&self) -> bool {
        self.inv().is_ok()
    }

    /// Inverse by Gaussian elimination with unit pivots.
    pub fn inv(&self) -> Result<WMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut b = Self::identity(&self.params, n);
        for col in 0..n {
            let piv = (col..n)
                .find(|&i| a.get(i, col).is_unit())
                .ok_or_else(|| Error::Unit("matrix not invertible over W(k')".into()))?;
            if piv != col {
                for j in 0..n {
                    let t = a.get(piv, j).clone();
                    a.set(piv, j, a.get(col, j).clone());
                    a.set(col, j, t);
                    let t = b.get(piv, j).clone();
                    b.set(piv, j, b.get(col, j).clone());
                    b.set(col, j, t);
                }
            }
            let inv = a.get(col, col).inv()?;
            for j in 0..n {
                a.set(col, j, a.get(col, j).mul(&inv));
                b.set(col, j, b.get(col, j).mul(&inv));
            }
            for i in 0..n {
                if i == col || a.get(i, col).is_zero() {
                    continue;
                }
                let f = a.get(i, col).clone();
                for j in 0..n {
                    let na = a.get(i, j).sub(&f.mul(a.get(col, j)));
                    a.set(i, j, na);
                    let nb = b.get(i, j).sub(&f.mul(b.get(col, j)));
                    b.set(i, j, nb);
                }
            }
        }
        Ok(b)
    }

    /// Embeds into a coefficient extension via the image of the generator.
    pub fn embed(&self, ext: &Arc<CoeffParams>, gen_image: &WittElem) -> WMatrix {
        WMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|a| self.params.embed(a, gen_image))
                .collect(),
            params: ext.clone(),
        }
    }

    fn flatten(&self) -> Vec<u64> {
        let r = self.params.r();
        let mut out = Vec::with_capacity(self.entries.len() * r);
        for e in &self.entries {
            out.extend_from_slice(e.coords());
        }
        out
    }

    fn unflatten(params: &Arc<CoeffParams>, n: usize, flat: &[u64]) -> WMatrix {
        let r = params.r();
        let entries = flat
            .chunks(r)
            .map(|c| params.from_coords(c).expect("coordinate chunk"))
            .collect();
        WMatrix {
            n,
            entries,
            params: params.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Smith reduction over Z/p^N
// ---------------------------------------------------------------------------

fn val_p_scalar(a: u64, p: u64) -> Option<u32> {
    if a == 0 {
        return None;
    }
    let mut a = a;
    let mut v = 0;
    while a.is_multiple_of(p) {
        a /= p;
        v += 1;
    }
    Some(v)
}

fn inv_unit(a: u64, p: u64, pn: u64) -> u64 {
    let mut x = 1u64;
    if p > 2 {
        let mut b = 1u64;
        let mut base = a % p;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                b = b * base % p;
            }
            base = base * base % p;
            e >>= 1;
        }
        x = b;
    }
    let mut reach = p;
    while reach < pn {
        reach = reach.saturating_mul(reach).min(pn);
        let ax = (a as u128 * x as u128 % pn as u128) as u64;
        let t = (2u128 + pn as u128 - ax as u128) as u64 % pn;
        x = (x as u128 * t as u128 % pn as u128) as u64;
    }
    x
}

/// Kernel of the Z/p^N-linear map x ↦ D·x; returns spanning vectors (length =
/// number of columns of D).
pub fn kernel_zpn(d: &[Vec<u64>], p: u64, pn: u64, n_prec: u32) -> Vec<Vec<u64>> {
    let rows = d.len();
    let cols = if rows == 0 { 0 } else { d[0].len() };
    if cols == 0 {
        return Vec::new();
    }
    let mut a: Vec<Vec<u64>> = d.to_vec();
    // column transform V, as columns
    let mut v: Vec<Vec<u64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0u64; cols];
            e[j] = 1;
            e
        })
        .collect();
    let mulm = |x: u64, y: u64| (x as u128 * y as u128 % pn as u128) as u64;
    let subm = |x: u64, y: u64| ((x as u128 + pn as u128 - y as u128 % pn as u128) % pn as u128) as u64;
    let mut t = 0usize;
    let lim = rows.min(cols);
    let mut pivot_vals: Vec<u32> = Vec::new();
    while t < lim {
        // global min-valuation pivot in the trailing submatrix
        let mut best: Option<(usize, usize, u32)> = None;
        for i in t..rows {
            for j in t..cols {
                if let Some(val) = val_p_scalar(a[i][j], p) {
                    if best.is_none_or(|(_, _, bv)| val < bv) {
                        best = Some((i, j, val));
                    }
                }
            }
        }
        let Some((pi, pj, pv)) = best else { break };
        a.swap(t, pi);
        if pj != t {
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
            v.swap(t, pj);
        }
        // normalize pivot to p^pv by a row scaling
        let mut ppow = 1u64;
        for _ in 0..pv {
            ppow = mulm(ppow, p);
        }
        let unit = a[t][t] / ppow;
        let uinv = inv_unit(unit % pn, p, pn);
        for j in t..cols {
            a[t][j] = mulm(a[t][j], uinv);
        }
        // clear the pivot column with row ops
        for i in 0..rows {
            if i == t || a[i][t] == 0 {
                continue;
            }
            let f = a[i][t] / ppow;
            for j in t..cols {
                let s = mulm(f, a[t][j]);
                a[i][j] = subm(a[i][j], s);
            }
        }
        // clear the pivot row with column ops (recorded in V)
        for j in 0..cols {
            if j == t || a[t][j] == 0 {
                continue;
            }
            let f = a[t][j] / ppow;
            for row in a.iter_mut() {
                let s = mulm(f, row[t]);
                row[j] = subm(row[j], s);
            }
            for i in 0..cols {
                let s = mulm(f, v[t][i]);
                v[j][i] = subm(v[j][i], s);
            }
        }
        pivot_vals.push(pv);
        t += 1;
    }
    let mut kernel = Vec::new();
    for (s, &val) in pivot_vals.iter().enumerate() {
        if val > 0 && val < n_prec {
            let mut scale = 1u64;
            for _ in 0..(n_prec - val) {
                scale = mulm(scale, p);
            }
            kernel.push(v[s].iter().map(|&x| mulm(x, scale)).collect());
        } else if val >= n_prec {
            kernel.push(v[s].clone());
        }
    }
    for col in v.iter().skip(t) {
        kernel.push(col.clone());
    }
    kernel
}

// ---------------------------------------------------------------------------
// invertible-solution search
// ---------------------------------------------------------------------------

/// Kernel of a Z/p^N-linear operator on M_n(W(k')), computed by
/// materializing the operator on the flat coordinate basis.
pub fn matrix_kernel<F>(params: &Arc<CoeffParams>, n: usize, op: F) -> Vec<WMatrix>
where
    F: Fn(&WMatrix) -> WMatrix,
{
    let r = params.r();
    let dim = r * n * n;
    let mut d: Vec<Vec<u64>> = vec![vec![0u64; dim]; dim];
    for b in 0..dim {
        let mut flat = vec![0u64; dim];
        flat[b] = 1;
        let img = op(&WMatrix::unflatten(params, n, &flat));
        let col = img.flatten();
        for (i, &x) in col.iter().enumerate() {
            d[i][b] = x;
        }
    }
    kernel_zpn(&d, params.p(), params.pn(), params.n())
        .into_iter()
        .map(|flat| WMatrix::unflatten(params, n, &flat))
        .collect()
}

/// Searches the mod-p span of `basis` exhaustively for an element whose
/// residue matrix is invertible, returning an integral representative (an
/// invertible integral combination). Deterministic: candidates are tried in
/// lexicographic coefficient order over a greedily reduced independent set,
/// and the first hit wins.
pub fn find_invertible_in_span(basis: &[WMatrix]) -> Option<WMatrix> {
    if basis.is_empty() {
        return None;
    }
    let params = basis[0].params().clone();
    let p = params.p();
    let n = basis[0].n();
    let r = params.r();
    let dim = r * n * n;
    // greedy independent subset of the residues
    let mut reduced: Vec<Vec<u64>> = Vec::new(); // row-echelon residues
    let mut members: Vec<&WMatrix> = Vec::new();
    for b in basis {
        let mut v: Vec<u64> = b.flatten().iter().map(|&x| x % p).collect();
        for row in &reduced {
            let lead = row.iter().position(|&x| x != 0).unwrap();
            if v[lead] != 0 {
                let f = v[lead] * inv_unit(row[lead], p, p) % p;
                for i in 0..dim {
                    v[i] = (v[i] + (p - f) * row[i]) % p;
                }
            }
        }
        if v.iter().any(|&x| x != 0) {
            reduced.push(v);
            members.push(b);
        }
    }
    if members.is_empty() {
        return None;
    }
    let k = members.len();
    // enumerate p^k combinations (skip all-zero)
    let mut counter = vec![0u64; k];
    loop {
        // increment
        let mut idx = 0;
        loop {
            counter[idx] += 1;
            if counter[idx] < p {
                break;
            }
            counter[idx] = 0;
            idx += 1;
            if idx == k {
                return None;
            }
        }
        let mut cand = WMatrix::zero(&params, n);
        for (c, m) in counter.iter().zip(&members) {
            if *c != 0 {
                let mut scaled = WMatrix::zero(&params, n);
                for i in 0..n {
                    for j in 0..n {
                        scaled.set(i, j, m.get(i, j).scalar_mul(*c));
                    }
                }
                cand = cand.add(&scaled);
            }
        }
        if cand.is_invertible() {
            return Some(cand);
        }
    }
}

/// Solves σ(U)·A₀·U^{-1} = Id, i.e. U = σ(U)·A₀, over W(k')/p^N, returning
/// an invertible solution when one exists at this precision.
pub fn solve_residual_trivialization(a0: &WMatrix) -> Option<WMatrix> {
    let params = a0.params().clone();
    let n = a0.n();
    let kern = matrix_kernel(&params, n, |x| x.sub(&x.sigma().mul(a0)));
    find_invertible_in_span(&kern)
}

/// Finds X with σ(X)·C₁ = C₂·X (a σ-conjugacy witness), exhaustively at the
/// mod-p layer and exactly at full precision.
pub fn sigma_conjugacy_witness(c1: &WMatrix, c2: &WMatrix) -> Option<WMatrix> {
    let params = c1.params().clone();
    let n = c1.n();
    let kern = matrix_kernel(&params, n, |x| x.sigma().mul(c1).sub(&c2.mul(x)));
    find_invertible_in_span(&kern)
}
