//! φ-modules of height ≤ h over 𝔖 and their structure theory.
//!
//! Matrix convention, fixed globally: columns are images, φ(e_j) =
//! Σ_i A_{ij} e_i. Under a basis change ẽ_j = Σ_i X_{ij} e_i the matrix
//! becomes X^{-1}·A·σφ(X), and the n-fold semilinear composite has matrix
//! A·σ(A)···σ^{n-1}(A).
//!
//! The Verschiebung V is the unique matrix with A·V = V·A = P^h·Id; it exists
//! iff the declared height bound holds, which is checked by exact divisibility
//! of P^h·adj(A) by det(A). Duality transposes V; the four classification
//! flags are read off from det(A) and the mod-(p,u) semilinear composite. The
//! connected-étale decomposition combines a Fitting decomposition over the
//! residue field with an order-by-order block triangularization, and étale
//! modules are trivialized by a residual descent solve followed by the
//! convergent product iteration U_{i+1} = A_i.

use crate::coeffs::{CoeffParams, ResidueElem, WittElem};
use crate::error::{Error, Result};
use crate::series::{
    p_unit_factorization, remainder_is_zero, weierstrass_divide, Decide, EisensteinP, SeriesS,
};
use crate::zplin::{solve_residual_trivialization, WMatrix};
use std::fmt;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// matrices over 𝔖
// ---------------------------------------------------------------------------

/// Dense rectangular matrix over 𝔖, row major.
#[derive(Clone, PartialEq, Eq)]
pub struct SMat {
    rows: usize,
    cols: usize,
    entries: Vec<SeriesS>,
    params: Arc<CoeffParams>,
    m: usize,
}

impl fmt::Debug for SMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(
                f,
                "  {:?}",
                (0..self.cols).map(|j| self.get(i, j)).collect::<Vec<_>>()
            )?;
        }
        write!(f, "]")
    }
}

impl SMat {
    pub fn zero(params: &Arc<CoeffParams>, m: usize, rows: usize, cols: usize) -> SMat {
        SMat {
            rows,
            cols,
            entries: vec![SeriesS::zero(params, m); rows * cols],
            params: params.clone(),
            m,
        }
    }

    pub fn identity(params: &Arc<CoeffParams>, m: usize, n: usize) -> SMat {
        let mut s = Self::zero(params, m, n, n);
        for i in 0..n {
            s.set(i, i, SeriesS::one(params, m));
        }
        s
    }

    /// Builds from nonempty row data; use [`SMat::zero`] for empty shapes.
    pub fn from_rows(rows: Vec<Vec<SeriesS>>) -> SMat {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let entries: Vec<SeriesS> = rows.into_iter().flatten().collect();
        let params = entries[0].params().clone();
        let m = entries[0].m();
        SMat {
            rows: r,
            cols: c,
            entries,
            params,
            m,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &SeriesS {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: SeriesS) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn params(&self) -> Arc<CoeffParams> {
        self.params.clone()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn add(&self, other: &SMat) -> SMat {
        SMat {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.add(b))
                .collect(),
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &SMat) -> SMat {
        SMat {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.sub(b))
                .collect(),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &SMat) -> SMat {
        debug_assert_eq!(self.cols, other.rows);
        let params = self.params();
        let m = self.m();
        let mut out = Self::zero(&params, m, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
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

    pub fn scale(&self, c: &SeriesS) -> SMat {
        SMat {
            entries: self.entries.iter().map(|a| a.mul(c)).collect(),
            ..self.clone()
        }
    }

    pub fn transpose(&self) -> SMat {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j).clone());
            }
        }
        SMat {
            rows: self.cols,
            cols: self.rows,
            entries,
            params: self.params.clone(),
            m: self.m,
        }
    }

    /// Entrywise σφ (the series Frobenius).
    pub fn phi(&self) -> SMat {
        SMat {
            entries: self.entries.iter().map(|a| a.phi()).collect(),
            ..self.clone()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|a| a.is_zero())
    }

    /// Zero modulo u^t.
    pub fn is_zero_mod_u(&self, t: usize) -> bool {
        self.entries
            .iter()
            .all(|a| a.u_order().is_none_or(|o| o >= t))
    }

    pub fn eq_mod_u(&self, other: &SMat, t: usize) -> bool {
        self.sub(other).is_zero_mod_u(t)
    }

    /// Minimal (p,u)-order over all entries; `None` when zero at precision.
    pub fn pu_order(&self) -> Option<usize> {
        self.entries.iter().filter_map(|a| a.pu_order()).min()
    }

    /// Determinant by Laplace expansion (ranks here are small).
    pub fn det(&self) -> SeriesS {
        debug_assert_eq!(self.rows, self.cols);
        let params = self.params();
        let m = self.m();
        let n = self.rows;
        if n == 0 {
            return SeriesS::one(&params, m);
        }
        if n == 1 {
            return self.get(0, 0).clone();
        }
        let mut acc = SeriesS::zero(&params, m);
        for j in 0..n {
            let a = self.get(0, j);
            if a.is_zero() {
                continue;
            }
            let minor = self.minor(0, j).det();
            let term = a.mul(&minor);
            if j % 2 == 0 {
                acc = acc.add(&term);
            } else {
                acc = acc.sub(&term);
            }
        }
        acc
    }

    fn minor(&self, row: usize, col: usize) -> SMat {
        let n = self.rows;
        let mut rows = Vec::with_capacity(n - 1);
        for i in 0..n {
            if i == row {
                continue;
            }
            let mut r = Vec::with_capacity(n - 1);
            for j in 0..n {
                if j == col {
                    continue;
                }
                r.push(self.get(i, j).clone());
            }
            rows.push(r);
        }
        SMat::from_rows(rows)
    }

    /// Adjugate: A·adj(A) = adj(A)·A = det(A)·Id.
    pub fn adjugate(&self) -> SMat {
        debug_assert_eq!(self.rows, self.cols);
        let params = self.params();
        let m = self.m();
        let n = self.rows;
        if n == 0 {
            return self.clone();
        }
        if n == 1 {
            return Self::identity(&params, m, 1);
        }
        let mut out = Self::zero(&params, m, n, n);
        for i in 0..n {
            for j in 0..n {
                let cof = self.minor(i, j).det();
                let signed = if (i + j) % 2 == 0 { cof } else { cof.neg() };
                out.set(j, i, signed);
            }
        }
        out
    }

    /// Inverse of a matrix invertible over 𝔖, by Gaussian elimination with
    /// unit-series pivots.
    pub fn inv(&self) -> Result<SMat> {
        debug_assert_eq!(self.rows, self.cols);
        let params = self.params();
        let m = self.m();
        let n = self.rows;
        let mut a = self.clone();
        let mut b = Self::identity(&params, m, n);
        for col in 0..n {
            let piv = (col..n)
                .find(|&i| a.get(i, col).is_unit())
                .ok_or_else(|| {
                    Error::Unit("matrix has no unit pivot; not invertible over 𝔖".into())
                })?;
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

    /// Constant term as a matrix over W(k').
    pub fn eval0(&self) -> WMatrix {
        debug_assert_eq!(self.rows, self.cols);
        let params = self.params();
        let mut w = WMatrix::zero(&params, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                w.set(i, j, self.get(i, j).eval0());
            }
        }
        w
    }

    pub fn from_const(w: &WMatrix, m: usize) -> SMat {
        let params = w.params().clone();
        let n = w.n();
        let mut s = Self::zero(&params, m, n, n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, SeriesS::constant(w.get(i, j).clone(), m));
            }
        }
        s
    }

    /// Residue matrix mod (p, u).
    pub fn residue0(&self) -> Vec<Vec<ResidueElem>> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.get(i, j).eval0().residue())
                    .collect()
            })
            .collect()
    }

    pub fn embed_coeffs(&self, ext: &Arc<CoeffParams>, gen_image: &WittElem) -> SMat {
        SMat {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|a| a.embed_coeffs(ext, gen_image))
                .collect(),
            params: ext.clone(),
            m: self.m,
        }
    }

    /// Extracts the block with row range r0..r1 and column range c0..c1.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> SMat {
        let mut out = SMat::zero(&self.params, self.m, r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out.set(i - r0, j - c0, self.get(i, j).clone());
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// residue-field linear algebra (for Fitting decompositions)
// ---------------------------------------------------------------------------

type RVec = Vec<ResidueElem>;

fn rmat_mul(a: &[RVec], b: &[RVec]) -> Vec<RVec> {
    let n = a.len();
    let m = b[0].len();
    let inner = b.len();
    let params = a[0][0].params().clone();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = ResidueElem::zero(&params);
                    for (k, brow) in b.iter().enumerate().take(inner) {
                        acc = acc.add(&a[i][k].mul(&brow[j]));
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn rmat_frobenius(a: &[RVec]) -> Vec<RVec> {
    a.iter()
        .map(|row| row.iter().map(|x| x.frobenius()).collect())
        .collect()
}

fn rmat_is_zero(a: &[RVec]) -> bool {
    a.iter().all(|row| row.iter().all(|x| x.is_zero()))
}

/// The n-fold semilinear composite A·σ(A)···σ^{n-1}(A) mod (p,u).
fn semilinear_composite(a: &[RVec], n: usize) -> Vec<RVec> {
    let mut acc = a.to_vec();
    let mut tw = a.to_vec();
    for _ in 1..n {
        tw = rmat_frobenius(&tw);
        acc = rmat_mul(&acc, &tw);
    }
    acc
}

fn residue_inv(x: &ResidueElem) -> ResidueElem {
    let params = x.params();
    let card = {
        let mut q = 1u64;
        for _ in 0..params.r() {
            q *= params.p();
        }
        q
    };
    x.pow(card - 2)
}

/// Column-space basis (original columns) by incremental elimination over k'.
fn column_space_basis(a: &[RVec]) -> Vec<RVec> {
    let rows = a.len();
    let cols = a[0].len();
    let mut basis: Vec<RVec> = Vec::new();
    let mut echelon: Vec<(usize, RVec)> = Vec::new();
    for j in 0..cols {
        let mut col: RVec = (0..rows).map(|i| a[i][j].clone()).collect();
        for (lead, red) in &echelon {
            if !col[*lead].is_zero() {
                let f = col[*lead].clone();
                for i in 0..rows {
                    col[i] = col[i].sub(&f.mul(&red[i]));
                }
            }
        }
        if let Some(lead) = col.iter().position(|x| !x.is_zero()) {
            let inv = residue_inv(&col[lead]);
            let red: RVec = col.iter().map(|x| x.mul(&inv)).collect();
            echelon.push((lead, red));
            basis.push((0..rows).map(|i| a[i][j].clone()).collect());
        }
    }
    basis
}

/// Kernel basis of the k'-linear map with matrix a.
fn kernel_basis(a: &[RVec]) -> Vec<RVec> {
    let rows = a.len();
    let cols = a[0].len();
    let params = a[0][0].params().clone();
    let mut mat: Vec<RVec> = a.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut prow = 0usize;
    for col in 0..cols {
        let Some(pr) = (prow..rows).find(|&i| !mat[i][col].is_zero()) else {
            continue;
        };
        mat.swap(prow, pr);
        let inv = residue_inv(&mat[prow][col]);
        for j in 0..cols {
            mat[prow][j] = mat[prow][j].mul(&inv);
        }
        for i in 0..rows {
            if i != prow && !mat[i][col].is_zero() {
                let f = mat[i][col].clone();
                for j in 0..cols {
                    mat[i][j] = mat[i][j].sub(&f.mul(&mat[prow][j]));
                }
            }
        }
        pivots.push((prow, col));
        prow += 1;
        if prow == rows {
            break;
        }
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut gens = Vec::new();
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v: RVec = (0..cols).map(|_| ResidueElem::zero(&params)).collect();
        v[free] = ResidueElem::one(&params);
        for &(pr, pc) in &pivots {
            v[pc] = ResidueElem::zero(&params).sub(&mat[pr][free]);
        }
        gens.push(v);
    }
    gens
}

/// Inverse Frobenius on k' (x ↦ x^{p^{r-1}}), applied entrywise k times.
fn inv_frobenius_vec(v: &RVec, k: usize) -> RVec {
    let params = v[0].params();
    let r = params.r();
    let mut exp = 1u64;
    for _ in 0..(r - 1) {
        exp *= params.p();
    }
    let mut out = v.clone();
    for _ in 0..k {
        out = out.iter().map(|x| x.pow(exp)).collect();
    }
    out
}

// ---------------------------------------------------------------------------
// PhiModule
// ---------------------------------------------------------------------------

/// Finite free 𝔖-module with Frobenius matrix A (columns are images) and a
/// declared height bound h; `v` caches the Verschiebung once validated.
#[derive(Clone)]
pub struct PhiModule {
    a: SMat,
    pe: EisensteinP,
    h: usize,
    v: Option<SMat>,
    /// u-precision up to which V is exact (divisions by det shrink it).
    v_u_prec: usize,
}

impl fmt::Debug for PhiModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhiModule(rank {}, h <= {})", self.rank(), self.h)
    }
}

/// Classification flags. Not mutually exclusive (a multiplicative module is
/// also φ-nilpotent) and all false for mixed modules; a rank-0 module carries
/// every flag vacuously.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifyFlags {
    pub etale: bool,
    pub multiplicative: bool,
    pub nilpotent: bool,
    pub unipotent: bool,
}

impl PhiModule {
    pub fn new(a: SMat, pe: EisensteinP, h: usize) -> Result<PhiModule> {
        if a.rows() != a.cols() {
            return Err(Error::Params("Frobenius matrix must be square".into()));
        }
        Ok(PhiModule {
            a,
            pe,
            h,
            v: None,
            v_u_prec: 0,
        })
    }

    /// Rank-1 module (𝔖, c·φ).
    pub fn rank1(c: SeriesS, pe: EisensteinP, h: usize) -> Result<PhiModule> {
        Self::new(SMat::from_rows(vec![vec![c]]), pe, h)
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn matrix(&self) -> &SMat {
        &self.a
    }

    pub fn pe(&self) -> &EisensteinP {
        &self.pe
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn params(&self) -> Arc<CoeffParams> {
        self.pe.params().clone()
    }

    pub fn m(&self) -> usize {
        self.a.m()
    }

    pub fn verschiebung(&self) -> Option<&SMat> {
        self.v.as_ref()
    }

    pub fn v_u_prec(&self) -> usize {
        self.v_u_prec
    }

    /// Checks the height bound and computes the Verschiebung V with
    /// A·V = V·A = P^h·Id; returns a copy with V cached.
    pub fn validated(&self) -> Result<PhiModule> {
        let mut out = self.clone();
        let (v, uprec) = out.compute_verschiebung()?;
        out.v = Some(v);
        out.v_u_prec = uprec;
        Ok(out)
    }

    fn compute_verschiebung(&self) -> Result<(SMat, usize)> {
        let params = self.params();
        let m = self.m();
        let n = self.rank();
        if n == 0 {
            return Ok((self.a.clone(), m));
        }
        let det = self.a.det();
        if det.is_zero() {
            return Err(Error::Precision(
                "det(A) vanishes at the working precision".into(),
            ));
        }
        let fac = p_unit_factorization(&det, &self.pe)?;
        if !fac.unit_flag {
            return Err(Error::Height(format!(
                "det(A) = P^{}·(non-unit): cokernel is not P-power torsion",
                fac.s
            )));
        }
        if fac.s > n * self.h {
            return Err(Error::Height(format!(
                "det(A) has P-adic valuation {} > n·h = {}",
                fac.s,
                n * self.h
            )));
        }
        let adj = self.a.adjugate();
        // division by P in the truncated ring leaves P-torsion ambiguity in
        // the top u-window; coefficients are fully determined only below
        // M - e·(s + N·excess). The validated window self-reports this.
        let excess = fac.s.saturating_sub(self.h);
        let uprec = m
            .saturating_sub(self.pe.e() * (fac.s + params.n() as usize * excess + usize::from(excess > 0)));
        if uprec == 0 {
            return Err(Error::Precision(
                "u-precision exhausted by the P-adic divisions of validation".into(),
            ));
        }
        let wit_inv = fac
            .witness
            .inv()
            .map_err(|_| Error::Height("unit cofactor expected".into()))?
            .resized(m);
        let pser = self.pe.as_series(m);
        let v = if fac.s <= self.h {
            // V = P^{h-s} · w^{-1} · adj
            let mut scale = wit_inv;
            for _ in 0..(self.h - fac.s) {
                scale = scale.mul(&pser);
            }
            adj.scale(&scale)
        } else {
            // V = w^{-1} · adj / P^{s-h}, entrywise exact division
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    let div = weierstrass_divide(adj.get(i, j), &self.pe, excess)?;
                    match remainder_is_zero(&div) {
                        Decide::True => row.push(div.q.resized(m).mul(&wit_inv)),
                        Decide::False => {
                            return Err(Error::Height(format!(
                                "adj(A)[{i}][{j}] is not divisible by P^{excess}: height > {}",
                                self.h
                            )))
                        }
                        Decide::Undecidable => {
                            return Err(Error::Precision(format!(
                                "divisibility of adj(A)[{i}][{j}] by P^{excess} undecidable"
                            )))
                        }
                    }
                }
                rows.push(row);
            }
            SMat::from_rows(rows)
        };
        // A·V = V·A = P^h·Id at the effective u-precision
        let mut ph = SMat::identity(&params, m, n);
        for _ in 0..self.h {
            ph = ph.scale(&pser);
        }
        if !self.a.mul(&v).eq_mod_u(&ph, uprec) || !v.mul(&self.a).eq_mod_u(&ph, uprec) {
            return Err(Error::Precision(
                "Verschiebung identity failed at the effective precision".into(),
            ));
        }
        Ok((v, uprec))
    }

    /// The dual module: underlying Hom_𝔖(𝔐, 𝔖) with 1⊗φ the dual of ψ; its
    /// matrix is V^T. Requires height ≤ 1.
    pub fn dual(&self) -> Result<PhiModule> {
        if self.h != 1 {
            return Err(Error::Params(
                "duality is defined for modules of height <= 1".into(),
            ));
        }
        let (vd, uprec) = match &self.v {
            Some(v) => (v.clone(), self.v_u_prec),
            None => {
                let val = self.validated()?;
                (val.v.unwrap(), val.v_u_prec)
            }
        };
        let mut out = PhiModule::new(vd.transpose(), self.pe.clone(), 1)?;
        out.v = Some(self.a.transpose());
        out.v_u_prec = uprec;
        Ok(out)
    }

    /// Classification of a validated height-≤1 module.
    pub fn classify(&self) -> Result<ClassifyFlags> {
        if self.h != 1 {
            return Err(Error::Params("classification requires height <= 1".into()));
        }
        let n = self.rank();
        if n == 0 {
            return Ok(ClassifyFlags {
                etale: true,
                multiplicative: true,
                nilpotent: true,
                unipotent: true,
            });
        }
        let det = self.a.det();
        if det.is_zero() {
            return Err(Error::Precision("det(A) vanishes at precision".into()));
        }
        let fac = p_unit_factorization(&det, &self.pe)?;
        if !fac.unit_flag {
            return Err(Error::Height(
                "det(A) is not P^s·unit; not of bounded height".into(),
            ));
        }
        let etale = fac.s == 0;
        let multiplicative = fac.s == n;
        let abar = self.a.residue0();
        let nilpotent = rmat_is_zero(&semilinear_composite(&abar, n));
        let v = match &self.v {
            Some(v) => v.clone(),
            None => self.validated()?.v.unwrap(),
        };
        let dual_bar = v.transpose().residue0();
        let unipotent = rmat_is_zero(&semilinear_composite(&dual_bar, n));
        Ok(ClassifyFlags {
            etale,
            multiplicative,
            nilpotent,
            unipotent,
        })
    }

    /// Kronecker tensor product; heights add.
    pub fn tensor(&self, other: &PhiModule) -> Result<PhiModule> {
        if self.pe != *other.pe() {
            return Err(Error::Params(
                "tensor factors must share the Eisenstein datum".into(),
            ));
        }
        let (n1, n2) = (self.rank(), other.rank());
        let params = self.params();
        let m = self.m();
        let mut a = SMat::zero(&params, m, n1 * n2, n1 * n2);
        for i1 in 0..n1 {
            for j1 in 0..n1 {
                let x = self.a.get(i1, j1);
                if x.is_zero() {
                    continue;
                }
                for i2 in 0..n2 {
                    for j2 in 0..n2 {
                        let y = other.a.get(i2, j2);
                        if y.is_zero() {
                            continue;
                        }
                        a.set(i1 * n2 + i2, j1 * n2 + j2, x.mul(y));
                    }
                }
            }
        }
        PhiModule::new(a, self.pe.clone(), self.h + other.h)?.validated()
    }

    /// Block direct sum; heights max.
    pub fn direct_sum(&self, other: &PhiModule) -> Result<PhiModule> {
        if self.pe != *other.pe() {
            return Err(Error::Params(
                "summands must share the Eisenstein datum".into(),
            ));
        }
        let (n1, n2) = (self.rank(), other.rank());
        let params = self.params();
        let m = self.m();
        let mut a = SMat::zero(&params, m, n1 + n2, n1 + n2);
        for i in 0..n1 {
            for j in 0..n1 {
                a.set(i, j, self.a.get(i, j).clone());
            }
        }
        for i in 0..n2 {
            for j in 0..n2 {
                a.set(n1 + i, n1 + j, other.a.get(i, j).clone());
            }
        }
        PhiModule::new(a, self.pe.clone(), self.h.max(other.h))?.validated()
    }
}

// ---------------------------------------------------------------------------
// module maps and torsion modules
// ---------------------------------------------------------------------------

/// 𝔖-linear map of φ-modules; `matrix` is target.rank × source.rank and
/// φ-equivariance reads A_tgt·σφ(F) = F·A_src.
#[derive(Clone, Debug)]
pub struct ModuleMap {
    pub source: PhiModule,
    pub target: PhiModule,
    pub matrix: SMat,
}

impl ModuleMap {
    pub fn new(source: PhiModule, target: PhiModule, matrix: SMat) -> Result<ModuleMap> {
        if matrix.rows() != target.rank() || matrix.cols() != source.rank() {
            return Err(Error::Params("map matrix has wrong shape".into()));
        }
        Ok(ModuleMap {
            source,
            target,
            matrix,
        })
    }

    pub fn is_phi_equivariant(&self) -> bool {
        if self.source.rank() == 0 {
            return true;
        }
        let lhs = self.target.matrix().mul(&self.matrix.phi());
        let rhs = self.matrix.mul(self.source.matrix());
        lhs == rhs
    }

    /// u-order of the equivariance defect A_tgt·σφ(F) - F·A_src; `None` when
    /// it vanishes exactly at the container precision.
    pub fn phi_defect_order(&self) -> Option<usize> {
        if self.source.rank() == 0 {
            return None;
        }
        let lhs = self.target.matrix().mul(&self.matrix.phi());
        let rhs = self.matrix.mul(self.source.matrix());
        let diff = lhs.sub(&rhs);
        if diff.is_zero() {
            None
        } else {
            (0..self.target.m())
                .find(|&t| !diff.is_zero_mod_u(t + 1))
        }
    }
}

/// Torsion φ-module of height ≤ 1: either the cokernel of an isogeny of free
/// modules, or an explicit sum-form presentation killed by p-powers.
#[derive(Clone, Debug)]
pub enum TorsionPhiModule {
    Coker {
        map: Box<ModuleMap>,
        /// a with det(map) = p^a·unit: the cokernel is killed by p^a.
        p_length: usize,
        /// residue degree r of k, for length bookkeeping over Z_p.
        residue_degree: usize,
    },
    Sum {
        /// p-power exponents of the cyclic summand moduli.
        exponents: Vec<u32>,
        /// Frobenius matrix over 𝔖, read modulo p^{max exponent}.
        matrix: SMat,
        pe: EisensteinP,
    },
}

/// Presents coker(f) as a torsion φ-module. Requires f φ-equivariant with
/// det(f) = p^a·unit (no u- or P-factor), which encodes "p-power torsion with
/// no nonzero u-torsion".
pub fn coker_of_isogeny(f: &ModuleMap) -> Result<TorsionPhiModule> {
    if !f.is_phi_equivariant() {
        return Err(Error::NotIsogeny(
            "map is not φ-equivariant: A_tgt·σφ(F) ≠ F·A_src".into(),
        ));
    }
    if f.source.rank() != f.target.rank() {
        return Err(Error::NotIsogeny("isogeny needs equal ranks".into()));
    }
    let det = f.matrix.det();
    if det.is_zero() {
        return Err(Error::NotIsogeny("det(f) = 0 at precision".into()));
    }
    let fac = p_unit_factorization(&det, f.source.pe())?;
    if fac.s > 0 {
        return Err(Error::NotIsogeny(format!(
            "det(f) has a P-factor (s = {})",
            fac.s
        )));
    }
    let a = fac
        .witness
        .pu_order()
        .ok_or_else(|| Error::NotIsogeny("det(f) = 0 at precision".into()))?;
    let scaled = fac
        .witness
        .div_p_exact(a as u32)
        .map_err(|_| Error::NotIsogeny("det(f) is not p^a·unit: u-torsion present".into()))?;
    if !scaled.is_unit() {
        return Err(Error::NotIsogeny(
            "det(f)/p^a is not a unit of 𝔖: u-torsion present".into(),
        ));
    }
    Ok(TorsionPhiModule::Coker {
        map: Box::new(f.clone()),
        p_length: a,
        residue_degree: f.source.params().r(),
    })
}

// ---------------------------------------------------------------------------
// connected-étale and multiplicative-unipotent decompositions
// ---------------------------------------------------------------------------

/// Result of a two-block decomposition: `transform` X satisfies
/// X^{-1}·A·σφ(X) = [[sub block, *],[0, quotient block]] (connected-étale) or
/// the block-lower analogue (multiplicative-unipotent); `sub_map` embeds the
/// distinguished submodule.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub sub: PhiModule,
    pub quotient: PhiModule,
    pub sub_map: ModuleMap,
    pub transform: SMat,
    /// u-precision up to which the decomposition identities are certified
    /// (the full container for connected-étale; the measured defect window
    /// for the dual-transported multiplicative-unipotent sequence).
    pub u_prec: usize,
}

impl PhiModule {
    /// The connected-étale sequence 0 → 𝔐^ét → 𝔐 → 𝔐^c → 0: maximal étale
    /// submodule, φ-nilpotent quotient. Fitting decomposition of the
    /// semilinear operator mod (p,u), then successive block
    /// triangularization (each pass is solvable because the étale block is
    /// invertible and the other block is topologically nilpotent).
    pub fn connected_etale(&self) -> Result<Decomposition> {
        let me = if self.v.is_some() {
            self.clone()
        } else {
            self.validated()?
        };
        if me.h != 1 {
            return Err(Error::Params("decomposition requires height <= 1".into()));
        }
        let params = me.params();
        let m = me.m();
        let n = me.rank();
        if n == 0 {
            let idmat = SMat::zero(&params, m, 0, 0);
            return Ok(Decomposition {
                sub_map: ModuleMap::new(me.clone(), me.clone(), idmat.clone())?,
                sub: me.clone(),
                quotient: me.clone(),
                transform: idmat,
                u_prec: m,
            });
        }
        let abar = me.a.residue0();
        let comp = semilinear_composite(&abar, n);
        let image = column_space_basis(&comp);
        let n1 = image.len();
        let kern: Vec<RVec> = kernel_basis(&comp)
            .into_iter()
            .map(|v| inv_frobenius_vec(&v, n))
            .collect();
        if n1 + kern.len() != n {
            return Err(Error::Precision(
                "residue Fitting decomposition is not a direct sum".into(),
            ));
        }
        if n1 == n {
            // already étale: sub = identity, quotient rank 0
            let empty = PhiModule::new(SMat::zero(&params, m, 0, 0), me.pe.clone(), 1)?;
            let idmat = SMat::identity(&params, m, n);
            return Ok(Decomposition {
                sub_map: ModuleMap::new(me.clone(), me.clone(), idmat.clone())?,
                sub: me.clone(),
                quotient: empty,
                transform: idmat,
                u_prec: m,
            });
        }
        // residue change of basis [image | kernel], lifted to 𝔖
        let mut x0 = SMat::zero(&params, m, n, n);
        for (j, col) in image.iter().chain(kern.iter()).enumerate() {
            for i in 0..n {
                let w = params.from_coords(col[i].coords())?;
                x0.set(i, j, SeriesS::constant(w, m));
            }
        }
        let mut transform = x0.clone();
        let mut cur = x0.inv()?.mul(&me.a).mul(&x0.phi());
        if n1 > 0 {
            let budget = (params.n() as usize + m + 2) * (n + 2);
            let mut rounds = 0usize;
            loop {
                let b21 = cur.block(n1, n, 0, n1);
                if b21.is_zero() {
                    break;
                }
                rounds += 1;
                if rounds > budget {
                    return Err(Error::Precision(format!(
                        "block triangularization did not converge within {budget} rounds"
                    )));
                }
                let a11 = cur.block(0, n1, 0, n1);
                let z = b21.mul(&a11.inv()?);
                // X = [[I,0],[Z,I]]; A <- X^{-1}·A·σφ(X)
                let mut x = SMat::identity(&params, m, n);
                for i in 0..(n - n1) {
                    for j in 0..n1 {
                        x.set(n1 + i, j, z.get(i, j).clone());
                    }
                }
                cur = x.inv()?.mul(&cur).mul(&x.phi());
                transform = transform.mul(&x);
            }
        }
        let e_block = cur.block(0, n1, 0, n1);
        let c_block = cur.block(n1, n, n1, n);
        let sub = PhiModule::new(e_block, me.pe.clone(), 1)?.validated()?;
        let quotient = PhiModule::new(c_block, me.pe.clone(), 1)?.validated()?;
        let iota = transform.block(0, n, 0, n1);
        let sub_map = ModuleMap::new(sub.clone(), me.clone(), iota)?;
        if n1 > 0 && !sub_map.is_phi_equivariant() {
            return Err(Error::Precision(
                "étale submodule inclusion failed φ-equivariance at precision".into(),
            ));
        }
        Ok(Decomposition {
            sub,
            quotient,
            sub_map,
            transform,
            u_prec: m,
        })
    }

    /// The multiplicative-unipotent sequence 0 → 𝔐^u → 𝔐 → 𝔐^m → 0, computed
    /// by dualizing the connected-étale decomposition of the dual: the étale
    /// inclusion and nilpotent projection of 𝔐^∨ dualize to the
    /// multiplicative projection and unipotent inclusion of 𝔐. The dual's
    /// Verschiebung carries P-division ambiguity in its top u-window, so the
    /// transported presentations are solved exactly from unit minors and the
    /// certified window is measured and reported in `u_prec`.
    pub fn mult_unipotent(&self) -> Result<Decomposition> {
        let me = if self.v.is_some() {
            self.clone()
        } else {
            self.validated()?
        };
        let dual = me.dual()?;
        let dec = dual.connected_etale()?;
        let n = me.rank();
        let n_et = dec.sub.rank(); // étale rank of the dual = multiplicative rank
        let params = me.params();
        let m = me.m();
        if n == 0 || n_et == n || n_et == 0 {
            // pure multiplicative / pure non-multiplicative shortcuts
            let y = SMat::identity(&params, m, n);
            let cur = me.a.clone();
            let (subblock, multblock) = if n_et == n {
                (SMat::zero(&params, m, 0, 0), cur)
            } else {
                (cur, SMat::zero(&params, m, 0, 0))
            };
            let sub = PhiModule::new(subblock, me.pe.clone(), 1)?.validated()?;
            let quotient = PhiModule::new(multblock, me.pe.clone(), 1)?.validated()?;
            let iota = if sub.rank() == n {
                SMat::identity(&params, m, n)
            } else {
                SMat::zero(&params, m, n, 0)
            };
            let sub_map = ModuleMap::new(sub.clone(), me.clone(), iota)?;
            return Ok(Decomposition {
                sub,
                quotient,
                sub_map,
                transform: y,
                u_prec: m,
            });
        }
        let x_inv = dec.transform.inv()?;
        // ι = (last n-n_et rows of X^{-1})^T embeds 𝔐^u; π = (first n_et
        // columns of X)^T projects onto 𝔐^m
        let iota = x_inv.block(n_et, n, 0, n).transpose();
        let pi = dec.transform.block(0, n, 0, n_et).transpose();
        // exact presentations from unit minors: ι·A_u = A·σφ(ι) and
        // A_m·σφ(π) = π·A
        let iota_left_inv = right_inverse(&iota.transpose())
            .ok_or_else(|| Error::Precision("unipotent inclusion has no unit minor".into()))?
            .transpose();
        let a_sub = iota_left_inv.mul(&me.a.mul(&iota.phi()));
        let pi_phi_right_inv = right_inverse(&pi.phi())
            .ok_or_else(|| Error::Precision("multiplicative projection has no unit minor".into()))?;
        let a_quot = pi.mul(&me.a).mul(&pi_phi_right_inv);
        let sub = PhiModule::new(a_sub, me.pe.clone(), 1)?.validated()?;
        let quotient = PhiModule::new(a_quot, me.pe.clone(), 1)?.validated()?;
        let sub_map = ModuleMap::new(sub.clone(), me.clone(), iota)?;
        // the inclusion is φ-stable up to the dual's certified window; measure
        let u_prec = match sub_map.phi_defect_order() {
            None => m,
            Some(d) => d,
        };
        let floor = dual
            .v_u_prec
            .saturating_sub(me.pe.e() * (params.n() as usize + n));
        if u_prec < floor.max(1) {
            return Err(Error::Precision(format!(
                "unipotent inclusion φ-stable only below u^{u_prec} (expected >= {floor})"
            )));
        }
        let quot_map = ModuleMap::new(me.clone(), quotient.clone(), pi)?;
        let qd = quot_map.phi_defect_order();
        let u_prec = match qd {
            None => u_prec,
            Some(d) => u_prec.min(d),
        };
        if u_prec < floor.max(1) {
            return Err(Error::Precision(format!(
                "multiplicative projection certified only below u^{u_prec}"
            )));
        }
        Ok(Decomposition {
            sub,
            quotient,
            sub_map,
            transform: dec.transform.inv()?.transpose(),
            u_prec,
        })
    }
}

// ---------------------------------------------------------------------------
// trivialization of étale modules
// ---------------------------------------------------------------------------

/// Result of trivializing an étale module over an unramified coefficient
/// extension: φ(U)·A·U^{-1} = Id at the working precision.
#[derive(Clone)]
pub struct Trivialization {
    /// Matrix over W(k')\[\[u\]\]-series.
    pub u: SMat,
    /// The extension coefficients and the image of the base generator.
    pub ext: Arc<CoeffParams>,
    pub gen_image: WittElem,
    pub ext_degree: usize,
    /// Product-iteration count after the residual stage.
    pub iterations: usize,
    /// The residual stage solution (constant matrix over W(k')).
    pub u0: WMatrix,
}

impl fmt::Debug for Trivialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Trivialization(ext degree {}, {} iterations)",
            self.ext_degree, self.iterations
        )
    }
}

impl PhiModule {
    /// Trivializes an étale module: finds U over W(k')\[\[u\]\] with
    /// φ(U)·A·U^{-1} ≡ Id mod (p^N, u^M), where k' ranges over unramified
    /// extensions of the base of degree ≤ `budget`.
    ///
    /// Stage 1 solves the residual descent equation σ(U₀)·(A mod u)·U₀^{-1} =
    /// Id over W(k') by an exhaustive Z/p^N-linear kernel search; stage 2 runs
    /// the product iteration U_{i+1} := A_i, whose i-th factor is ≡ Id mod
    /// u^{p^i}, so ceil(log_p M) iterations close the window.
    pub fn trivialize_etale(&self, budget: usize) -> Result<Trivialization> {
        let flags = self.classify()?;
        if !flags.etale {
            return Err(Error::Params(
                "trivialization requires an étale module".into(),
            ));
        }
        let base = self.params();
        let m = self.m();
        let a0 = self.a.eval0();
        for d in 1..=budget.max(1) {
            let (ext, img) = base.extension(d)?;
            let a0e = a0.embed(&ext, &img);
            let Some(u0) = solve_residual_trivialization(&a0e) else {
                continue;
            };
            let ae = self.a.embed_coeffs(&ext, &img);
            let u0inv = SMat::from_const(&u0.inv()?, m);
            // A' = φ(U₀)·A·U₀^{-1} ≡ Id mod u
            let aprime = SMat::from_const(&u0.sigma(), m).mul(&ae).mul(&u0inv);
            if !aprime.eq_mod_u(&SMat::identity(&ext, m, self.rank()), 1) {
                return Err(Error::Precision(
                    "residual stage did not normalize A mod u".into(),
                ));
            }
            // product iteration: U = φ^{K-1}(A')···φ(A')·A'·U₀
            let p = ext.p() as usize;
            let mut k = 0usize;
            let mut reach = 1usize;
            while reach < m {
                reach = reach.saturating_mul(p);
                k += 1;
            }
            let mut u = SMat::from_const(&u0, m);
            let mut g = aprime;
            for _ in 0..k {
                u = g.mul(&u);
                g = g.phi();
            }
            let residual = u.phi().mul(&ae).mul(&u.inv()?);
            if residual != SMat::identity(&ext, m, self.rank()) {
                return Err(Error::Precision(
                    "trivialization residual nonzero at precision".into(),
                ));
            }
            return Ok(Trivialization {
                u,
                ext,
                gen_image: img,
                ext_degree: d,
                iterations: k,
                u0,
            });
        }
        // probe beyond the budget to suggest a sufficient degree
        let mut suggested = None;
        for d in (budget + 1)..=(budget + 6) {
            if let Ok((ext, img)) = base.extension(d) {
                if solve_residual_trivialization(&a0.embed(&ext, &img)).is_some() {
                    suggested = Some(d);
                    break;
                }
            }
        }
        Err(Error::ResidualUnsolvable { budget, suggested })
    }
}

/// Right inverse of a full-row-rank matrix over 𝔖 with a unit minor: zero
/// outside a greedily chosen column set J, π_J^{-1} on it.
pub(crate) fn right_inverse(pi: &SMat) -> Option<SMat> {
    let rows = pi.rows();
    let cols = pi.cols();
    let params = pi.params();
    let m = pi.m();
    if rows == 0 {
        return Some(SMat::zero(&params, m, cols, 0));
    }
    let res = pi.residue0();
    let card = {
        let mut q = 1u64;
        for _ in 0..params.r() {
            q *= params.p();
        }
        q
    };
    let mut chosen: Vec<usize> = Vec::new();
    let mut echelon: Vec<(usize, Vec<crate::coeffs::ResidueElem>)> = Vec::new();
    for j in 0..cols {
        let mut v: Vec<crate::coeffs::ResidueElem> =
            (0..rows).map(|i| res[i][j].clone()).collect();
        for (lead, red) in &echelon {
            if !v[*lead].is_zero() {
                let f = v[*lead].clone();
                for i in 0..rows {
                    v[i] = v[i].sub(&f.mul(&red[i]));
                }
            }
        }
        if let Some(lead) = v.iter().position(|x| !x.is_zero()) {
            let inv = v[lead].pow(card - 2);
            let red: Vec<_> = v.iter().map(|x| x.mul(&inv)).collect();
            echelon.push((lead, red));
            chosen.push(j);
            if chosen.len() == rows {
                break;
            }
        }
    }
    if chosen.len() < rows {
        return None;
    }
    let mut sub = SMat::zero(&params, m, rows, rows);
    for (t, &j) in chosen.iter().enumerate() {
        for i in 0..rows {
            sub.set(i, t, pi.get(i, j).clone());
        }
    }
    let sub_inv = sub.inv().ok()?;
    let mut r = SMat::zero(&params, m, cols, rows);
    for (t, &j) in chosen.iter().enumerate() {
        for i in 0..rows {
            r.set(j, i, sub_inv.get(t, i).clone());
        }
    }
    Some(r)
}


// ---------------------------------------------------------------------------
// isomorphism search
// ---------------------------------------------------------------------------

/// Exhibits an isomorphism H: M₁ → M₂ (A₂·σφ(H) = H·A₁, H invertible) for a
/// pair of étale or a pair of multiplicative modules: a residual solve over
/// W(k), then u-adic Newton lifting. `None` when the residual equation has no
/// invertible solution over the base coefficients.
pub fn iso_between(m1: &PhiModule, m2: &PhiModule) -> Result<Option<ModuleMap>> {
    if m1.rank() != m2.rank() {
        return Ok(None);
    }
    let n = m1.rank();
    if n == 0 {
        return Ok(Some(ModuleMap::new(
            m1.clone(),
            m2.clone(),
            SMat::zero(&m1.params(), m1.m(), 0, 0),
        )?));
    }
    let f1 = m1.classify()?;
    let f2 = m2.classify()?;
    let params = m1.params();
    let m = m1.m();
    // reduce to the étale-type equation H·E₁ = E₂·σφ(H)
    let (e1, e2) = if f1.etale && f2.etale {
        (m1.matrix().clone(), m2.matrix().clone())
    } else if f1.multiplicative && f2.multiplicative {
        // multiplicative: A = P·E with E = ψ-inverse transposed..: strip P
        let strip = |mm: &PhiModule| -> Result<SMat> {
            let mut rows = Vec::new();
            for i in 0..n {
                let mut row = Vec::new();
                for j in 0..n {
                    let div = weierstrass_divide(mm.matrix().get(i, j), mm.pe(), 1)?;
                    match remainder_is_zero(&div) {
                        Decide::True => row.push(div.q.resized(m)),
                        _ => {
                            return Err(Error::Precision(
                                "multiplicative matrix entry not divisible by P".into(),
                            ))
                        }
                    }
                }
                rows.push(row);
            }
            Ok(SMat::from_rows(rows))
        };
        (strip(m1)?, strip(m2)?)
    } else {
        return Err(Error::Params(
            "isomorphism search supports étale or multiplicative pairs".into(),
        ));
    };
    // residual layer: H₀·E₁(0) = E₂(0)·σ(H₀) over W(k)
    let e10 = e1.eval0();
    let e20 = e2.eval0();
    let kern =
        crate::zplin::matrix_kernel(&params, n, |x| x.mul(&e10).sub(&e20.mul(&x.sigma())));
    let Some(h0) = crate::zplin::find_invertible_in_span(&kern) else {
        return Ok(None);
    };
    // u-adic Newton: defect F(H) = E₂·σφ(H) - H·E₁; H += F(H)·E₁^{-1}
    // multiplies the defect's u-order by p
    let e1inv = e1.inv()?;
    let mut h = SMat::from_const(&h0, m);
    let mut rounds = 0usize;
    loop {
        let defect = e2.mul(&h.phi()).sub(&h.mul(&e1));
        if defect.is_zero() {
            break;
        }
        rounds += 1;
        if rounds > m + 4 {
            return Err(Error::Precision(
                "isomorphism lifting did not converge".into(),
            ));
        }
        h = h.add(&defect.mul(&e1inv));
    }
    let map = ModuleMap::new(m1.clone(), m2.clone(), h)?;
    if !map.is_phi_equivariant() {
        return Err(Error::Precision(
            "isomorphism candidate failed φ-equivariance".into(),
        ));
    }
    Ok(Some(map))
}
