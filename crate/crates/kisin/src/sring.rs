//! The divided-power ring S at finite precision.
//!
//! S is the p-adic completion of the divided power envelope of W(k)\[u\] along
//! (P(u)); its elements are exactly the sums Σ b_i u^i / q(i)! with
//! q(i) = floor(i/e). We store the b_i directly (the "divided basis") and all
//! integer weights q(i+j)!/(q(i)! q(j)!), q(pi)!/q(i)! are computed exactly as
//! p-power times unit before reduction mod p^N.
//!
//! Fil¹S membership is decided through the quotient S/Fil¹S ≅ 𝒪_K =
//! W(k)\[u\]/(P): an element lies in Fil¹S iff its divided evaluation at π
//! vanishes. Every division by p decrements the element's effective
//! p-precision `eff_n`, which certificates downstream must report.

use crate::coeffs::{CoeffParams, WittElem};
use crate::error::{Error, Result};
use crate::series::{EisensteinP, SeriesS};
use std::fmt;
use std::sync::Arc;

/// Shared context for S: coefficients, Eisenstein polynomial, container
/// length, factorial tables and π-power tables.
pub struct SParams {
    coeff: Arc<CoeffParams>,
    pe: EisensteinP,
    m: usize,
    /// v_p(q(i)!) for i < m.
    fact_val: Vec<u32>,
    /// unit part of q(i)! mod p^N.
    fact_unit: Vec<u64>,
    /// inverse of the unit part mod p^N.
    fact_unit_inv: Vec<u64>,
    /// coords of π^i in 𝒪_K (exact mod p^N), i < m.
    pi_pow: Vec<Vec<WittElem>>,
    /// μ with p = π·μ in 𝒪_K: μ = -(a_1 + a_2 π + ... + a_e π^{e-1}).
    mu: Vec<WittElem>,
}

impl fmt::Debug for SParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S(e={}, M={}, {:?})", self.e(), self.m, self.coeff)
    }
}

impl SParams {
    pub fn new(pe: EisensteinP, m: usize) -> Result<Arc<SParams>> {
        let coeff = pe.params().clone();
        let e = pe.e();
        if m == 0 {
            return Err(Error::Params("u-precision must be positive".into()));
        }
        let p = coeff.p();
        let pn = coeff.pn();
        // factorial tables for q(i)!
        let mut fact_val = vec![0u32; m];
        let mut fact_unit = vec![1u64; m];
        let qmax = (m - 1) / e;
        let mut val = 0u32;
        let mut unit: u64 = 1;
        let mut by_q_val = vec![0u32; qmax + 1];
        let mut by_q_unit = vec![1u64; qmax + 1];
        for q in 1..=qmax {
            let mut k = q as u64;
            while k.is_multiple_of(p) {
                k /= p;
                val += 1;
            }
            unit = ((unit as u128 * k as u128) % pn as u128) as u64;
            by_q_val[q] = val;
            by_q_unit[q] = unit;
        }
        for i in 0..m {
            let q = i / e;
            fact_val[i] = by_q_val[q];
            fact_unit[i] = by_q_unit[q];
        }
        let fact_unit_inv: Vec<u64> = fact_unit
            .iter()
            .map(|&u| inv_unit_mod(u, p, pn))
            .collect();
        // π powers in 𝒪_K: reduce u^i mod P by long division, iteratively
        let mut pi_pow: Vec<Vec<WittElem>> = Vec::with_capacity(m);
        let mut cur = vec![coeff.zero(); e];
        cur[0] = coeff.one();
        let lead_inv = pe.coeffs()[e].inv()?;
        for _ in 0..m {
            pi_pow.push(cur.clone());
            // multiply by π: shift, then reduce the overflow via
            // π^e = -a_e^{-1}(a_0 + ... + a_{e-1} π^{e-1})
            let top = cur[e - 1].clone();
            for j in (1..e).rev() {
                cur[j] = cur[j - 1].clone();
            }
            cur[0] = coeff.zero();
            if !top.is_zero() {
                let c = top.mul(&lead_inv);
                for j in 0..e {
                    cur[j] = cur[j].sub(&c.mul(&pe.coeffs()[j]));
                }
            }
        }
        let mut mu = vec![coeff.zero(); e];
        for j in 0..e {
            mu[j] = pe.coeffs()[j + 1].neg();
        }
        Ok(Arc::new(SParams {
            coeff,
            pe,
            m,
            fact_val,
            fact_unit,
            fact_unit_inv,
            pi_pow,
            mu,
        }))
    }

    pub fn coeff(&self) -> &Arc<CoeffParams> {
        &self.coeff
    }
    pub fn pe(&self) -> &EisensteinP {
        &self.pe
    }
    pub fn e(&self) -> usize {
        self.pe.e()
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> u32 {
        self.coeff.n()
    }

    fn weight_mul(&self, i: usize, j: usize) -> (u32, u64) {
        // q(i+j)! / (q(i)! q(j)!) as p^v · unit
        let v = self.fact_val[i + j] - self.fact_val[i] - self.fact_val[j];
        let pn = self.coeff.pn();
        let u = mulm(
            self.fact_unit[i + j],
            mulm(self.fact_unit_inv[i], self.fact_unit_inv[j], pn),
            pn,
        );
        (v, u)
    }

    fn p_pow(&self, v: u32) -> u64 {
        let mut acc: u64 = 1;
        let pn = self.coeff.pn();
        for _ in 0..v {
            acc = mulm(acc, self.coeff.p(), pn);
        }
        acc
    }
}

#[inline]
fn mulm(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn inv_unit_mod(a: u64, p: u64, pn: u64) -> u64 {
    // Newton from the Fermat inverse mod p
    let mut x = 1u64;
    let ap = a % p;
    let mut b = 1u64;
    let mut e = p - 2;
    let mut base = ap;
    while e > 0 {
        if e & 1 == 1 {
            b = b * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    if p > 2 {
        x = b;
    }
    let mut reach = p;
    while reach < pn {
        reach = reach.saturating_mul(reach).min(pn);
        let ax = mulm(a, x, pn);
        let two_minus = (2u128 + pn as u128 - ax as u128) as u64 % pn;
        x = mulm(x, two_minus, pn);
    }
    x
}

// ---------------------------------------------------------------------------
// SElem
// ---------------------------------------------------------------------------

/// Element Σ b_i u^i / q(i)! of S, with effective p-precision tracking.
#[derive(Clone)]
pub struct SElem {
    pub(crate) coeffs: Vec<WittElem>,
    pub(crate) eff_n: u32,
    sp: Arc<SParams>,
}

impl PartialEq for SElem {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl fmt::Debug for SElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SElem(eff={})[", self.eff_n)?;
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                if !first {
                    write!(f, " + ")?;
                }
                write!(f, "{:?}·u^{}/q!", c, i)?;
                first = false;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, "]")
    }
}

impl SElem {
    pub fn zero(sp: &Arc<SParams>) -> SElem {
        SElem {
            coeffs: vec![sp.coeff.zero(); sp.m],
            eff_n: sp.n(),
            sp: sp.clone(),
        }
    }

    pub fn one(sp: &Arc<SParams>) -> SElem {
        let mut z = Self::zero(sp);
        z.coeffs[0] = sp.coeff.one();
        z
    }

    /// The divided basis element u^i / q(i)!.
    pub fn basis(sp: &Arc<SParams>, i: usize) -> SElem {
        let mut z = Self::zero(sp);
        if i < sp.m {
            z.coeffs[i] = sp.coeff.one();
        }
        z
    }

    pub fn params(&self) -> &Arc<SParams> {
        &self.sp
    }

    pub fn eff_n(&self) -> u32 {
        self.eff_n
    }

    pub fn coeffs(&self) -> &[WittElem] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &WittElem {
        &self.coeffs[i]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Zero at the element's effective precision.
    pub fn is_zero_at_eff(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero_mod(self.eff_n))
    }

    pub fn add(&self, other: &SElem) -> SElem {
        SElem {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
            eff_n: self.eff_n.min(other.eff_n),
            sp: self.sp.clone(),
        }
    }

    pub fn sub(&self, other: &SElem) -> SElem {
        SElem {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.sub(b))
                .collect(),
            eff_n: self.eff_n.min(other.eff_n),
            sp: self.sp.clone(),
        }
    }

    pub fn neg(&self) -> SElem {
        SElem {
            coeffs: self.coeffs.iter().map(|a| a.neg()).collect(),
            eff_n: self.eff_n,
            sp: self.sp.clone(),
        }
    }

    pub fn scale(&self, c: &WittElem) -> SElem {
        SElem {
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
            eff_n: self.eff_n,
            sp: self.sp.clone(),
        }
    }

    /// Product with the divided-power convolution weights
    /// (u^i/q(i)!)(u^j/q(j)!) = [q(i+j)!/(q(i)! q(j)!)] u^{i+j}/q(i+j)!.
    pub fn mul(&self, other: &SElem) -> SElem {
        let sp = &self.sp;
        let m = sp.m;
        let mut out = Self::zero(sp);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j >= m {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                let (v, u) = sp.weight_mul(i, j);
                let w = mulm(sp.p_pow(v), u, sp.coeff.pn());
                out.coeffs[i + j] = out.coeffs[i + j].add(&a.mul(b).scalar_mul(w));
            }
        }
        out.eff_n = self.eff_n.min(other.eff_n);
        out
    }

    /// φ on S: u^i/q(i)! ↦ [q(pi)!/q(i)!] u^{pi}/q(pi)! with σ on
    /// coefficients.
    pub fn phi(&self) -> SElem {
        let sp = &self.sp;
        let p = sp.coeff.p() as usize;
        let mut out = Self::zero(sp);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let Some(pi) = i.checked_mul(p).filter(|&x| x < sp.m) else {
                continue;
            };
            let v = sp.fact_val[pi] - sp.fact_val[i];
            let u = mulm(sp.fact_unit[pi], sp.fact_unit_inv[i], sp.coeff.pn());
            let w = mulm(sp.p_pow(v), u, sp.coeff.pn());
            out.coeffs[pi] = a.sigma().scalar_mul(w);
        }
        out.eff_n = self.eff_n;
        out
    }

    /// N = -u d/du acts diagonally: the basis element of index i is an
    /// eigenvector with eigenvalue -i.
    pub fn n_op(&self) -> SElem {
        let sp = &self.sp;
        let pn = sp.coeff.pn();
        let mut out = Self::zero(sp);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let s = (pn - (i as u64 % pn)) % pn;
            out.coeffs[i] = a.scalar_mul(s);
        }
        out.eff_n = self.eff_n;
        out
    }

    /// Exact division by an integer c = p^v · unit; effective precision drops
    /// by v.
    pub fn div_int_exact(&self, c: u64) -> Result<SElem> {
        let sp = &self.sp;
        let p = sp.coeff.p();
        let mut v = 0u32;
        let mut c = c;
        while c.is_multiple_of(p) {
            c /= p;
            v += 1;
        }
        let cinv = inv_unit_mod(c % sp.coeff.pn(), p, sp.coeff.pn());
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for a in &self.coeffs {
            coeffs.push(a.scalar_mul(cinv).div_p_exact(v)?);
        }
        Ok(SElem {
            coeffs,
            eff_n: self
                .eff_n
                .checked_sub(v)
                .ok_or_else(|| Error::Precision("effective precision exhausted".into()))?,
            sp: self.sp.clone(),
        })
    }

    /// Membership in I_0, the ideal topologically generated by u^{ei}/i! for
    /// i >= 1. In the divided basis this ideal is exactly the set of elements
    /// supported in indices >= e, so membership is a coordinate-support test
    /// (at the element's effective precision).
    pub fn is_in_i0(&self) -> bool {
        let e = self.sp.e();
        self.coeffs
            .iter()
            .take(e)
            .all(|c| c.is_zero_mod(self.eff_n))
    }

    /// u-adic support order (index of first coefficient nonzero at eff_n).
    pub fn support_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero_mod(self.eff_n))
    }

}

/// Embeds 𝔖 into S: Σ a_i u^i ↦ Σ (q(i)! a_i) u^i/q(i)!. A ring homomorphism
/// that intertwines the two Frobenii.
pub fn embed_fraks(sp: &Arc<SParams>, f: &SeriesS) -> SElem {
    let mut out = SElem::zero(sp);
    let pn = sp.coeff.pn();
    for i in 0..f.m().min(sp.m) {
        let a = f.coeff(i);
        if a.is_zero() {
            continue;
        }
        let w = mulm(sp.p_pow(sp.fact_val[i]), sp.fact_unit[i], pn);
        out.coeffs[i] = a.scalar_mul(w);
    }
    out
}

// ---------------------------------------------------------------------------
// 𝒪_K = W(k)[u]/(P) and the divided evaluation
// ---------------------------------------------------------------------------

/// Element of 𝒪_K = W(k)\[u\]/(P(u)) at precision p^N, in the basis
/// 1, π, ..., π^{e-1}.
#[derive(Clone)]
pub struct OKElem {
    pub(crate) coords: Vec<WittElem>,
    pub(crate) eff_n: u32,
    sp: Arc<SParams>,
}

impl fmt::Debug for OKElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OK(eff={}){:?}", self.eff_n, self.coords)
    }
}

impl PartialEq for OKElem {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}

impl OKElem {
    pub fn zero(sp: &Arc<SParams>) -> OKElem {
        OKElem {
            coords: vec![sp.coeff.zero(); sp.e()],
            eff_n: sp.n(),
            sp: sp.clone(),
        }
    }

    pub fn one(sp: &Arc<SParams>) -> OKElem {
        let mut z = Self::zero(sp);
        z.coords[0] = sp.coeff.one();
        z
    }

    pub fn from_witt(sp: &Arc<SParams>, w: WittElem) -> OKElem {
        let mut z = Self::zero(sp);
        z.coords[0] = w;
        z
    }

    pub fn params(&self) -> &Arc<SParams> {
        &self.sp
    }

    pub fn coords(&self) -> &[WittElem] {
        &self.coords
    }

    pub fn eff_n(&self) -> u32 {
        self.eff_n
    }

    pub fn is_zero_at_eff(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero_mod(self.eff_n))
    }

    pub fn add(&self, other: &OKElem) -> OKElem {
        OKElem {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a.add(b))
                .collect(),
            eff_n: self.eff_n.min(other.eff_n),
            sp: self.sp.clone(),
        }
    }

    pub fn sub(&self, other: &OKElem) -> OKElem {
        OKElem {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a.sub(b))
                .collect(),
            eff_n: self.eff_n.min(other.eff_n),
            sp: self.sp.clone(),
        }
    }

    pub fn neg(&self) -> OKElem {
        OKElem {
            coords: self.coords.iter().map(|a| a.neg()).collect(),
            eff_n: self.eff_n,
            sp: self.sp.clone(),
        }
    }

    pub fn mul(&self, other: &OKElem) -> OKElem {
        let sp = &self.sp;
        let e = sp.e();
        let coeff = &sp.coeff;
        // polynomial product of degree <= 2e-2, then reduce by P
        let mut prod = vec![coeff.zero(); 2 * e - 1];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coords.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                prod[i + j] = prod[i + j].add(&a.mul(b));
            }
        }
        let lead_inv = sp.pe.coeffs()[e].inv().expect("a_e is a unit");
        for k in (e..2 * e - 1).rev() {
            if prod[k].is_zero() {
                continue;
            }
            let c = prod[k].mul(&lead_inv);
            for j in 0..=e {
                prod[k - e + j] = prod[k - e + j].sub(&c.mul(&sp.pe.coeffs()[j]));
            }
        }
        OKElem {
            coords: prod[..e].to_vec(),
            eff_n: self.eff_n.min(other.eff_n),
            sp: self.sp.clone(),
        }
    }

    pub fn scale(&self, w: &WittElem) -> OKElem {
        OKElem {
            coords: self.coords.iter().map(|a| a.mul(w)).collect(),
            eff_n: self.eff_n,
            sp: self.sp.clone(),
        }
    }

    /// π-adic valuation at the effective precision: `None` means
    /// indistinguishable from zero. Coordinates are measured by
    /// v_π(w_m π^m) = e·v_p(w_m) + m; the values are distinct mod e so the
    /// minimum is exact.
    pub fn val_pi(&self) -> Option<usize> {
        let e = self.sp.e();
        let mut best: Option<usize> = None;
        for (m, w) in self.coords.iter().enumerate() {
            if w.is_zero_mod(self.eff_n) {
                continue;
            }
            let v = w.val_p().unwrap();
            let cand = e * (v as usize) + m;
            best = Some(best.map_or(cand, |b| b.min(cand)));
        }
        best
    }

    pub fn is_unit(&self) -> bool {
        self.val_pi() == Some(0)
    }

    /// Inverse of a unit by Newton from the residue-field inverse.
    pub fn inv(&self) -> Result<OKElem> {
        if !self.is_unit() {
            return Err(Error::Unit("non-unit in O_K".into()));
        }
        let sp = &self.sp;
        let w0inv = self.coords[0].inv()?;
        let mut y = OKElem::from_witt(sp, w0inv);
        // y <- y(2 - xy): quadratic convergence in the maximal ideal
        let two = OKElem::from_witt(sp, sp.coeff.from_u64(2));
        let rounds = (usize::BITS - (sp.e() * sp.n() as usize).leading_zeros()) + 1;
        for _ in 0..rounds {
            let xy = self.mul(&y);
            y = y.mul(&two.sub(&xy));
        }
        y = y.with_eff(self.eff_n);
        Ok(y)
    }

    fn with_eff(mut self, eff: u32) -> OKElem {
        self.eff_n = eff;
        self
    }

    /// Exact division by p (coordinatewise); drops effective precision.
    pub fn div_p_exact(&self) -> Result<OKElem> {
        let coords = self
            .coords
            .iter()
            .map(|c| c.div_p_exact(1))
            .collect::<Result<Vec<_>>>()?;
        Ok(OKElem {
            coords,
            eff_n: self
                .eff_n
                .checked_sub(1)
                .ok_or_else(|| Error::Precision("effective precision exhausted".into()))?,
            sp: self.sp.clone(),
        })
    }

    /// Exact division by π using p = π·μ: requires v_π >= 1.
    pub fn div_pi_exact(&self) -> Result<OKElem> {
        let sp = &self.sp;
        let e = sp.e();
        if self.coords[0].val_p() == Some(0) {
            return Err(Error::Precision("element not divisible by π".into()));
        }
        // x = w_0 + Σ_{m>=1} w_m π^m; x/π = (w_0/p)·μ + Σ_{m>=1} w_m π^{m-1}
        let w0p = self.coords[0].div_p_exact(1)?;
        let mut coords = vec![sp.coeff.zero(); e];
        coords[..e - 1].clone_from_slice(&self.coords[1..e]);
        for (j, mj) in sp.mu.iter().enumerate() {
            coords[j] = coords[j].add(&w0p.mul(mj));
        }
        Ok(OKElem {
            coords,
            eff_n: self
                .eff_n
                .checked_sub(1)
                .ok_or_else(|| Error::Precision("effective precision exhausted".into()))?,
            sp: self.sp.clone(),
        })
    }

    /// Exact division by π^k.
    pub fn div_pi_pow(&self, k: usize) -> Result<OKElem> {
        let mut z = self.clone();
        for _ in 0..k {
            z = z.div_pi_exact()?;
        }
        Ok(z)
    }

    /// Multiplication by π.
    pub fn mul_pi(&self) -> OKElem {
        let sp = &self.sp;
        let e = sp.e();
        let mut z = OKElem::zero(sp);
        z.eff_n = self.eff_n;
        let lead_inv = sp.pe.coeffs()[e].inv().expect("a_e is a unit");
        let top = self.coords[e - 1].clone();
        for m in (1..e).rev() {
            z.coords[m] = self.coords[m - 1].clone();
        }
        z.coords[0] = sp.coeff.zero();
        if !top.is_zero() {
            let c = top.mul(&lead_inv);
            for j in 0..e {
                z.coords[j] = z.coords[j].sub(&c.mul(&sp.pe.coeffs()[j]));
            }
        }
        z
    }
}

/// Divided evaluation at π: u^i/q(i)! ↦ π^i/q(i)! ∈ 𝒪_K. The homomorphism
/// S → 𝒪_K realizing S/Fil¹S ≅ 𝒪_K. Terms whose coefficient is divisible by
/// the factorial are evaluated exactly; genuinely divided terms use π-power
/// tables and report the precision they consumed.
pub fn eval_pi(x: &SElem) -> Result<OKElem> {
    let sp = x.params().clone();
    let pn = sp.coeff.pn();
    let mut acc = OKElem::zero(&sp);
    let mut eff = x.eff_n;
    for (i, b) in x.coeffs.iter().enumerate() {
        if b.is_zero() {
            continue;
        }
        let v = sp.fact_val[i];
        let unit_inv = sp.fact_unit_inv[i];
        let vb = b.val_p().unwrap();
        let d = v.min(vb);
        // divide b by p^d exactly, the π-power by the rest
        let b_red = b.div_p_exact(d)?.scalar_mul(unit_inv % pn);
        let rem = v - d;
        let mut term = OKElem::zero(&sp);
        for (m, c) in sp.pi_pow[i].iter().enumerate() {
            term.coords[m] = c.div_p_exact(rem).map_err(|_| {
                Error::Precision(format!(
                    "divided evaluation of index {i} needs p^{rem} beyond the stored precision"
                ))
            })?;
        }
        if rem > 0 {
            let valid = sp.n().checked_sub(rem).filter(|&w| w >= 1).ok_or_else(|| {
                Error::Precision(format!(
                    "divided evaluation exhausts p-precision at index {i}"
                ))
            })?;
            eff = eff.min(valid);
        }
        let term = OKElem {
            coords: term.coords.iter().map(|c| c.mul(&b_red)).collect(),
            eff_n: sp.n(),
            sp: sp.clone(),
        };
        acc = acc.add(&term);
    }
    acc.eff_n = eff;
    if acc.eff_n == 0 {
        return Err(Error::Precision(
            "divided evaluation exhausted all p-precision".into(),
        ));
    }
    Ok(acc)
}

/// Fil¹S membership at the effective precision: vanishing of the divided
/// evaluation at π.
pub fn fil1_test(x: &SElem) -> Result<bool> {
    Ok(eval_pi(x)?.is_zero_at_eff())
}

/// φ₁ = φ/p on Fil¹S. Verifies membership and exact divisibility; the result
/// loses one unit of effective precision.
pub fn phi1(x: &SElem) -> Result<SElem> {
    if !fil1_test(x)? {
        return Err(Error::Fil("φ₁ applied outside Fil¹S".into()));
    }
    let g = x.phi();
    let coeffs = g
        .coeffs
        .iter()
        .map(|c| c.div_p_exact(1))
        .collect::<Result<Vec<_>>>()
        .map_err(|_| Error::Precision("φ(x) not divisible by p at precision".into()))?;
    let eff = x
        .eff_n
        .checked_sub(1)
        .ok_or_else(|| Error::Precision("effective precision exhausted in φ₁".into()))?;
    Ok(SElem {
        coeffs,
        eff_n: eff,
        sp: x.params().clone(),
    })
}

/// φ₁ for an element structurally known to lie in Fil¹S (e.g. a P-multiple):
/// skips the divided evaluation and verifies divisibility coordinatewise.
pub fn phi1_unchecked(x: &SElem) -> Result<SElem> {
    let g = x.phi();
    let coeffs = g
        .coeffs
        .iter()
        .map(|c| c.div_p_exact(1))
        .collect::<Result<Vec<_>>>()
        .map_err(|_| Error::Precision("φ(x) not divisible by p at precision".into()))?;
    let eff = x
        .eff_n
        .checked_sub(1)
        .ok_or_else(|| Error::Precision("effective precision exhausted in φ₁".into()))?;
    Ok(SElem {
        coeffs,
        eff_n: eff,
        sp: x.params().clone(),
    })
}

/// The unit c₁ = φ(P(u))/p.
pub fn c1(sp: &Arc<SParams>) -> Result<SElem> {
    let ps = sp.pe().as_series(sp.m());
    let img = embed_fraks(sp, &ps).phi();
    let coeffs = img
        .coeffs
        .iter()
        .map(|c| c.div_p_exact(1))
        .collect::<Result<Vec<_>>>()?;
    let c = SElem {
        coeffs,
        eff_n: sp.n() - 1,
        sp: sp.clone(),
    };
    debug_assert!(c.coeffs[0].is_unit(), "c₁ must be a unit");
    Ok(c)
}

/// Inverse of an S-unit (constant divided coordinate a unit) by Newton.
pub fn s_inv(x: &SElem) -> Result<SElem> {
    if !x.coeffs[0].is_unit() {
        return Err(Error::Unit("constant coordinate is not a unit".into()));
    }
    let sp = x.params();
    let mut y = SElem::zero(sp);
    y.coeffs[0] = x.coeffs[0].inv()?;
    let two = {
        let mut t = SElem::zero(sp);
        t.coeffs[0] = sp.coeff().from_u64(2);
        t
    };
    // u-adic (and divided-filtration) quadratic convergence
    let rounds = (usize::BITS - sp.m().leading_zeros()) + 2;
    for _ in 0..rounds {
        let xy = x.mul(&y);
        y = y.mul(&two.sub(&xy));
    }
    y.eff_n = x.eff_n;
    Ok(y)
}

/// γ_k(P) = P^k / k! as an element of S.
pub fn gamma_p(sp: &Arc<SParams>, k: usize) -> Result<SElem> {
    let m = sp.m();
    let mut pk = SeriesS::one(sp.coeff(), m);
    let ps = sp.pe().as_series(m);
    for _ in 0..k {
        pk = pk.mul(&ps);
    }
    let mut fact: u64 = 1;
    for j in 2..=k as u64 {
        fact = fact.wrapping_mul(j);
    }
    embed_fraks(sp, &pk).div_int_exact(fact.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(p: u64, e: usize, n: u32, m: usize) -> Arc<SParams> {
        let w = CoeffParams::new(p, 1, n).unwrap();
        let pe = EisensteinP::monic_uniform(&w, e).unwrap();
        SParams::new(pe, m).unwrap()
    }

    fn setup_u_plus_2(n: u32, m: usize) -> Arc<SParams> {
        let w = CoeffParams::new(2, 1, n).unwrap();
        let pe = EisensteinP::new(vec![w.from_u64(2), w.one()]).unwrap();
        SParams::new(pe, m).unwrap()
    }

    #[test]
    fn divided_product_weights() {
        // e = 1: (u/1)·(u/1) = 2·(u²/2!)
        let sp = setup(2, 1, 4, 8);
        let u = SElem::basis(&sp, 1);
        let prod = u.mul(&u);
        assert_eq!(*prod.coeff(2), sp.coeff().from_u64(2));
        // f·1 = f
        let one = SElem::one(&sp);
        assert_eq!(u.mul(&one), u);
    }

    #[test]
    fn embed_is_a_ring_hom() {
        let sp = setup_u_plus_2(5, 16);
        let w = sp.coeff().clone();
        let ps = sp.pe().as_series(16);
        // embed(P)·embed(P) = embed(P²) = 2!·γ₂(P)
        let p1 = embed_fraks(&sp, &ps);
        let p2 = embed_fraks(&sp, &ps.mul(&ps));
        assert_eq!(p1.mul(&p1), p2);
        let g2 = gamma_p(&sp, 2).unwrap();
        let mut two = SElem::zero(&sp);
        two.coeffs[0] = w.from_u64(2);
        assert_eq!(two.mul(&g2), p2, "P² = 2!·γ₂(P)");
        // embed(1) = 1, and for e = 1: embed(u²) = 2·(u²/2!)
        assert_eq!(
            embed_fraks(&sp, &SeriesS::one(&w, 16)),
            SElem::one(&sp)
        );
        let u2 = SeriesS::monomial(w.one(), 2, 16);
        assert_eq!(*embed_fraks(&sp, &u2).coeff(2), w.from_u64(2));
        // e = 1: embed(u) has b_1 = 1!·1 = 1
        let u = SeriesS::monomial(w.one(), 1, 16);
        assert_eq!(*embed_fraks(&sp, &u).coeff(1), w.one());
    }

    #[test]
    fn embed_intertwines_phi() {
        let sp = setup(2, 2, 4, 20);
        let w = sp.coeff().clone();
        let mut f = SeriesS::zero(&w, 20);
        f.set_coeff(0, w.from_u64(3));
        f.set_coeff(1, w.from_u64(5));
        f.set_coeff(3, w.one());
        assert_eq!(embed_fraks(&sp, &f.phi()), embed_fraks(&sp, &f).phi());
    }

    #[test]
    fn n_operator() {
        let sp = setup(2, 1, 4, 10);
        // N(1) = 0
        assert!(SElem::one(&sp).n_op().is_zero());
        // each basis element is an eigenvector with eigenvalue -i
        for i in 1..6 {
            let b = SElem::basis(&sp, i);
            let got = b.n_op();
            let want = b.scale(&sp.coeff().from_i64(-(i as i64)));
            assert_eq!(got, want);
        }
    }

    #[test]
    fn n_phi_commutation() {
        // N ∘ φ = p · φ ∘ N on random-ish elements
        let sp = setup(3, 2, 4, 27);
        let w = sp.coeff().clone();
        let mut x = SElem::zero(&sp);
        for (i, c) in [(0usize, 7u64), (1, 2), (2, 11), (5, 1), (8, 4)] {
            x.coeffs[i] = w.from_u64(c);
        }
        let lhs = x.phi().n_op();
        let rhs = x.n_op().phi().scale(&w.from_u64(3));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn fil1_membership() {
        let sp = setup_u_plus_2(6, 16);
        let w = sp.coeff().clone();
        let ps = sp.pe().as_series(16);
        assert!(fil1_test(&embed_fraks(&sp, &ps)).unwrap(), "P ∈ Fil¹");
        assert!(!fil1_test(&SElem::one(&sp)).unwrap(), "1 ∉ Fil¹");
        // divided powers of the kernel generator stay in Fil¹
        assert!(fil1_test(&gamma_p(&sp, 2).unwrap()).unwrap(), "γ₂(P) ∈ Fil¹");
        assert!(fil1_test(&gamma_p(&sp, 3).unwrap()).unwrap(), "γ₃(P) ∈ Fil¹");
        // e = 1, P = u + 2: u + 2 - P = 0 ∈ Fil¹
        let u = SeriesS::monomial(w.one(), 1, 16);
        let two = SeriesS::constant(w.from_u64(2), 16);
        let diff = u.add(&two).sub(&ps);
        assert!(fil1_test(&embed_fraks(&sp, &diff)).unwrap());
    }

    #[test]
    fn fil1_u_not_member_for_ramified() {
        let sp = setup(2, 2, 5, 16);
        let w = sp.coeff().clone();
        let u = SeriesS::monomial(w.one(), 1, 16);
        assert!(!fil1_test(&embed_fraks(&sp, &u)).unwrap(), "u ∉ Fil¹ for e > 1");
    }

    #[test]
    fn eval_pi_is_a_ring_hom() {
        let sp = setup(2, 2, 5, 16);
        let w = sp.coeff().clone();
        let mut f = SeriesS::zero(&w, 16);
        f.set_coeff(0, w.from_u64(3));
        f.set_coeff(2, w.from_u64(5));
        let mut g = SeriesS::zero(&w, 16);
        g.set_coeff(1, w.one());
        g.set_coeff(3, w.from_u64(7));
        let (ef, eg) = (embed_fraks(&sp, &f), embed_fraks(&sp, &g));
        let lhs = eval_pi(&ef.mul(&eg)).unwrap();
        let rhs = eval_pi(&ef).unwrap().mul(&eval_pi(&eg).unwrap());
        assert!(lhs.sub(&rhs).is_zero_at_eff());
        let lhs = eval_pi(&ef.add(&eg)).unwrap();
        let rhs = eval_pi(&ef).unwrap().add(&eval_pi(&eg).unwrap());
        assert!(lhs.sub(&rhs).is_zero_at_eff());
    }

    #[test]
    fn eval_pi_kernel_contains_p_multiples() {
        let sp = setup(2, 3, 5, 24);
        let w = sp.coeff().clone();
        let ps = sp.pe().as_series(24);
        let pimg = embed_fraks(&sp, &ps);
        let mut f = SeriesS::zero(&w, 24);
        f.set_coeff(0, w.from_u64(9));
        f.set_coeff(2, w.from_u64(3));
        let prod = pimg.mul(&embed_fraks(&sp, &f));
        assert!(eval_pi(&prod).unwrap().is_zero_at_eff());
    }

    #[test]
    fn c1_for_u_plus_2() {
        // p = 2, P = u + 2: c₁ = 1 + u²/2! (b_0 = 1, b_2 = 1) and a unit
        let sp = setup_u_plus_2(6, 16);
        let w = sp.coeff().clone();
        let c = c1(&sp).unwrap();
        assert_eq!(*c.coeff(0), w.one());
        assert_eq!(*c.coeff(2), w.one());
        for i in [1usize, 3, 4, 5] {
            assert!(c.coeff(i).is_zero());
        }
        assert!(c.coeff(0).is_unit());
        // φ₁(P) = c₁
        let pimg = embed_fraks(&sp, &sp.pe().as_series(16));
        assert_eq!(phi1(&pimg).unwrap(), c);
    }

    #[test]
    fn phi1_error_cases() {
        let sp = setup_u_plus_2(6, 16);
        let w = sp.coeff().clone();
        // p·1 ∉ Fil¹S
        let mut p1 = SElem::zero(&sp);
        p1.coeffs[0] = w.from_u64(2);
        assert!(matches!(phi1(&p1), Err(Error::Fil(_))));
    }

    #[test]
    fn phi_of_fil1_divisible_by_p() {
        for e in 1..=3usize {
            let sp = setup(2, e, 6, 24);
            for k in 1..=3usize {
                let g = gamma_p(&sp, k).unwrap();
                let img = g.phi();
                for c in img.coeffs() {
                    assert!(
                        c.is_zero() || c.val_p().unwrap() >= 1,
                        "φ(γ_{k}(P)) divisible by p (e={e})"
                    );
                }
            }
        }
    }

    #[test]
    fn i0_support_condition() {
        let sp = setup(2, 2, 4, 12);
        let w = sp.coeff().clone();
        // u^e·(anything) has support >= e
        let ue = SeriesS::monomial(w.one(), 2, 12);
        assert!(embed_fraks(&sp, &ue).is_in_i0());
        let u = SeriesS::monomial(w.one(), 1, 12);
        assert!(!embed_fraks(&sp, &u).is_in_i0());
        assert!(SElem::zero(&sp).is_in_i0());
        // the divided generator u^{2e}/2! itself
        assert!(SElem::basis(&sp, 4).is_in_i0());
    }

    #[test]
    fn s_unit_inverse() {
        let sp = setup_u_plus_2(6, 16);
        let c = c1(&sp).unwrap();
        let cinv = s_inv(&c).unwrap();
        let prod = c.mul(&cinv);
        let diff = prod.sub(&SElem::one(&sp));
        assert!(diff.is_zero_at_eff(), "c₁·c₁^{{-1}} = 1 at eff precision");
    }
}
