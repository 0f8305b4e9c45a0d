//! Linear algebra over the truncated discrete valuation ring 𝒪_K =
//! W(k)\[u\]/(P(u)).
//!
//! Kernels are computed by column elimination with π-valuation pivoting: the
//! minimal-valuation entry divides every other entry of its row, so the
//! eliminations are exact divisions in the DVR. Columns that never acquire a
//! pivot are kernel generators (read off from the accumulated column
//! transform). The same elimination with a right-hand side solves linear
//! systems when they are solvable at precision.

use crate::error::Result;
use crate::sring::{OKElem, SParams};
use std::sync::Arc;

/// Dense matrix over 𝒪_K, row major.
#[derive(Clone, Debug)]
pub struct OKMat {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<OKElem>,
}

impl OKMat {
    pub fn new(rows: usize, cols: usize, entries: Vec<OKElem>) -> OKMat {
        debug_assert_eq!(entries.len(), rows * cols);
        OKMat {
            rows,
            cols,
            entries,
        }
    }

    pub fn zero(sp: &Arc<SParams>, rows: usize, cols: usize) -> OKMat {
        OKMat {
            rows,
            cols,
            entries: vec![OKElem::zero(sp); rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &OKElem {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: OKElem) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn mul_vec(&self, x: &[OKElem]) -> Vec<OKElem> {
        (0..self.rows)
            .map(|i| {
                let mut acc = x[0].sub(x.first().unwrap()); // zero with right params
                for (j, xj) in x.iter().enumerate() {
                    acc = acc.add(&self.get(i, j).mul(xj));
                }
                acc
            })
            .collect()
    }
}

/// Exact division a/b in the DVR, defined when v_π(a) >= v_π(b).
fn div_exact(a: &OKElem, b: &OKElem) -> Result<OKElem> {
    let vb = b.val_pi().unwrap_or(0);
    // strip π^vb from b, invert the unit, multiply, strip π^vb from a
    let b_unit = b.div_pi_pow(vb)?;
    let a_shift = a.div_pi_pow(vb)?;
    Ok(a_shift.mul(&b_unit.inv()?))
}

/// Kernel data: generators of {x : A x = 0 at precision} plus the π-adic
/// valuations of the elimination pivots (the echelon profile of A).
#[derive(Clone, Debug)]
pub struct KernelData {
    pub gens: Vec<Vec<OKElem>>,
    pub pivot_vals: Vec<usize>,
}

/// Column-echelon kernel of a matrix over 𝒪_K.
pub fn kernel(sp: &Arc<SParams>, a: &OKMat) -> Result<KernelData> {
    let rows = a.rows;
    let cols = a.cols;
    let mut work = a.clone();
    // column transform, stored as columns of the identity initially
    let mut v: Vec<Vec<OKElem>> = (0..cols)
        .map(|j| {
            (0..cols)
                .map(|i| {
                    if i == j {
                        OKElem::one(sp)
                    } else {
                        OKElem::zero(sp)
                    }
                })
                .collect()
        })
        .collect();
    let mut pivot_rows: Vec<bool> = vec![false; rows];
    let mut pivot_cols: Vec<bool> = vec![false; cols];
    let mut pivot_vals: Vec<usize> = Vec::new();
    loop {
        // min π-valuation entry among unpivoted rows/cols
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..rows {
            if pivot_rows[i] {
                continue;
            }
            for j in 0..cols {
                if pivot_cols[j] {
                    continue;
                }
                if let Some(val) = work.get(i, j).val_pi() {
                    if best.is_none_or(|(_, _, bv)| val < bv) {
                        best = Some((i, j, val));
                    }
                }
            }
        }
        let Some((pi, pj, pv)) = best else { break };
        pivot_rows[pi] = true;
        pivot_cols[pj] = true;
        pivot_vals.push(pv);
        let pivot = work.get(pi, pj).clone();
        for j in 0..cols {
            if j == pj || pivot_cols[j] {
                continue;
            }
            if work.get(pi, j).val_pi().is_none() {
                continue;
            }
            let f = div_exact(work.get(pi, j), &pivot)?;
            // col_j -= f * col_pj (in work and in v)
            for i in 0..rows {
                let upd = work.get(i, j).sub(&work.get(i, pj).mul(&f));
                work.set(i, j, upd);
            }
            for i in 0..cols {
                v[j][i] = v[j][i].sub(&v[pj][i].mul(&f));
            }
        }
    }
    let mut gens = Vec::new();
    for j in 0..cols {
        if !pivot_cols[j] {
            gens.push(v[j].clone());
        }
    }
    Ok(KernelData { gens, pivot_vals })
}

/// Solves A x = b over 𝒪_K by Gaussian elimination with π-valuation
/// pivoting; `None` when the system is unsolvable at precision.
pub fn solve(sp: &Arc<SParams>, a: &OKMat, b: &[OKElem]) -> Option<Vec<OKElem>> {
    let rows = a.rows;
    let cols = a.cols;
    let mut work = a.clone();
    let mut rhs: Vec<OKElem> = b.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..rows {
            if row_used[i] {
                continue;
            }
            for j in 0..cols {
                if col_used[j] {
                    continue;
                }
                if let Some(val) = work.get(i, j).val_pi() {
                    if best.is_none_or(|(_, _, bv)| val < bv) {
                        best = Some((i, j, val));
                    }
                }
            }
        }
        let Some((pi, pj, _)) = best else { break };
        row_used[pi] = true;
        col_used[pj] = true;
        pivots.push((pi, pj));
        let pivot = work.get(pi, pj).clone();
        for i in 0..rows {
            // only unpivoted rows: there the pivot's minimality guarantees
            // exact divisibility; pivot rows are handled by back-substitution
            if row_used[i] && i != pi {
                continue;
            }
            if i == pi || work.get(i, pj).val_pi().is_none() {
                continue;
            }
            let f = match div_exact(work.get(i, pj), &pivot) {
                Ok(f) => f,
                Err(_) => return None,
            };
            for j in 0..cols {
                let upd = work.get(i, j).sub(&work.get(pi, j).mul(&f));
                work.set(i, j, upd);
            }
            let upd = rhs[i].sub(&rhs[pi].mul(&f));
            rhs[i] = upd;
        }
    }
    // rows without pivots must have vanishing rhs
    for i in 0..rows {
        if !row_used[i] && !rhs[i].is_zero_at_eff() {
            return None;
        }
    }
    // back-substitution: pivot rows now have a single unknown each
    let mut x: Vec<OKElem> = (0..cols).map(|_| OKElem::zero(sp)).collect();
    // process pivots in reverse acquisition order
    for &(pi, pj) in pivots.iter().rev() {
        let mut acc = rhs[pi].clone();
        for j in 0..cols {
            if j != pj {
                acc = acc.sub(&work.get(pi, j).mul(&x[j]));
            }
        }
        match div_exact(&acc, work.get(pi, pj)) {
            Ok(val) => x[pj] = val,
            Err(_) => return None,
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::CoeffParams;
    use crate::series::EisensteinP;
    use crate::sring::{embed_fraks, eval_pi};

    fn setup(e: usize) -> Arc<SParams> {
        let w = CoeffParams::new(2, 1, 6).unwrap();
        let pe = EisensteinP::monic_uniform(&w, e).unwrap();
        SParams::new(pe, 32).unwrap()
    }

    fn pi_elem(sp: &Arc<SParams>) -> OKElem {
        let w = sp.coeff().clone();
        let u = crate::series::SeriesS::monomial(w.one(), 1, sp.m());
        eval_pi(&embed_fraks(sp, &u)).unwrap()
    }

    #[test]
    fn kernel_of_diag_1_pi() {
        let sp = setup(2);
        let a = OKMat::new(
            2,
            2,
            vec![
                OKElem::one(&sp),
                OKElem::zero(&sp),
                OKElem::zero(&sp),
                OKElem::zero(&sp),
            ],
        );
        // diag(1, 0): kernel = e_2
        let kd = kernel(&sp, &a).unwrap();
        assert_eq!(kd.gens.len(), 1);
        assert!(kd.gens[0][0].is_zero_at_eff());
        assert!(kd.gens[0][1].is_unit());
        assert_eq!(kd.pivot_vals, vec![0]);
    }

    #[test]
    fn kernel_annihilates() {
        let sp = setup(3);
        let pi = pi_elem(&sp);
        // [[π, π²],[π², π³]] has rank 1: kernel is spanned by (π, -1)-ish
        let pi2 = pi.mul(&pi);
        let pi3 = pi2.mul(&pi);
        let a = OKMat::new(2, 2, vec![pi.clone(), pi2.clone(), pi2.clone(), pi3]);
        let kd = kernel(&sp, &a).unwrap();
        assert_eq!(kd.gens.len(), 1);
        for row in 0..2 {
            let mut acc = OKElem::zero(&sp);
            for j in 0..2 {
                acc = acc.add(&a.get(row, j).mul(&kd.gens[0][j]));
            }
            assert!(acc.is_zero_at_eff(), "A·gen = 0");
        }
    }

    #[test]
    fn solve_simple_system() {
        let sp = setup(2);
        let pi = pi_elem(&sp);
        let two = OKElem::from_witt(&sp, sp.coeff().from_u64(2));
        // [[1, π],[0, 2]]·x = (π, 2·π) has solution? second row: 2 x₂ = 2π ⟹
        // x₂ = π; first: x₁ + π·π = π... x₁ = π - π².
        let a = OKMat::new(
            2,
            2,
            vec![OKElem::one(&sp), pi.clone(), OKElem::zero(&sp), two.clone()],
        );
        let b = vec![pi.clone(), two.mul(&pi)];
        let x = solve(&sp, &a, &b).expect("solvable");
        for i in 0..2 {
            let mut acc = OKElem::zero(&sp);
            for j in 0..2 {
                acc = acc.add(&a.get(i, j).mul(&x[j]));
            }
            assert!(acc.sub(&b[i]).is_zero_at_eff());
        }
    }

    #[test]
    fn solve_detects_unsolvable() {
        let sp = setup(1);
        let two = OKElem::from_witt(&sp, sp.coeff().from_u64(2));
        // 2x = 1 has no integral solution
        let a = OKMat::new(1, 1, vec![two]);
        let b = vec![OKElem::one(&sp)];
        assert!(solve(&sp, &a, &b).is_none());
    }
}
