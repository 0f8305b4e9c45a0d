//! Truncated arithmetic in 𝔖 = W(k)\[\[u\]\] modulo (p^N, u^M).
//!
//! A [`SeriesS`] is an exact vector of M Witt coefficients. The Frobenius φ
//! sends u to u^p and applies sigma to coefficients. Division with remainder
//! by an Eisenstein polynomial P(u) (unit leading coefficient) is ordinary
//! polynomial long division in the truncated ring; the result coincides with
//! Weierstrass division of the underlying power series up to the effective
//! precision that the quotient/remainder structs report.

use crate::coeffs::{CoeffParams, WittElem};
use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Element of 𝔖 = W(k)\[\[u\]\] mod (p^N, u^M); index i holds the coefficient
/// of u^i.
#[derive(Clone, PartialEq, Eq)]
pub struct SeriesS {
    coeffs: Vec<WittElem>,
    params: Arc<CoeffParams>,
}

impl fmt::Debug for SeriesS {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S[")?;
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                if !first {
                    write!(f, " + ")?;
                }
                write!(f, "{:?}·u^{}", c, i)?;
                first = false;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, "]")
    }
}

impl SeriesS {
    pub fn zero(params: &Arc<CoeffParams>, m: usize) -> SeriesS {
        SeriesS {
            coeffs: vec![params.zero(); m],
            params: params.clone(),
        }
    }

    pub fn one(params: &Arc<CoeffParams>, m: usize) -> SeriesS {
        let mut s = Self::zero(params, m);
        s.coeffs[0] = params.one();
        s
    }

    pub fn monomial(c: WittElem, i: usize, m: usize) -> SeriesS {
        let params = c.params().clone();
        let mut s = Self::zero(&params, m);
        if i < m {
            s.coeffs[i] = c;
        }
        s
    }

    pub fn from_coeffs(params: &Arc<CoeffParams>, coeffs: Vec<WittElem>) -> SeriesS {
        debug_assert!(coeffs.iter().all(|c| c.params() == params));
        SeriesS {
            coeffs,
            params: params.clone(),
        }
    }

    pub fn constant(c: WittElem, m: usize) -> SeriesS {
        Self::monomial(c, 0, m)
    }

    pub fn params(&self) -> &Arc<CoeffParams> {
        &self.params
    }

    /// The u-precision M (container length).
    pub fn m(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, i: usize) -> &WittElem {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[WittElem] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, i: usize, c: WittElem) {
        self.coeffs[i] = c;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// u-adic order; `None` when zero at precision.
    pub fn u_order(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    /// (p,u)-adic order: min over i of i + v_p(coefficient i).
    pub fn pu_order(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.val_p().map(|v| i + v as usize))
            .min()
    }

    fn check_compat(&self, other: &SeriesS) -> Result<()> {
        if self.m() != other.m() {
            return Err(Error::Params(format!(
                "u-precision mismatch: {} vs {}",
                self.m(),
                other.m()
            )));
        }
        if !self.coeffs[0].same_params(&other.coeffs[0]) {
            return Err(Error::Params("coefficient ring mismatch".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &SeriesS) -> SeriesS {
        debug_assert!(self.check_compat(other).is_ok());
        SeriesS {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn sub(&self, other: &SeriesS) -> SeriesS {
        debug_assert!(self.check_compat(other).is_ok());
        SeriesS {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.sub(b))
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn neg(&self) -> SeriesS {
        SeriesS {
            coeffs: self.coeffs.iter().map(|a| a.neg()).collect(),
            params: self.params.clone(),
        }
    }

    pub fn mul(&self, other: &SeriesS) -> SeriesS {
        debug_assert!(self.check_compat(other).is_ok());
        let m = self.m();
        let mut out = Self::zero(&self.params, m);
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
                out.coeffs[i + j] = out.coeffs[i + j].add(&a.mul(b));
            }
        }
        out
    }

    pub fn scale(&self, c: &WittElem) -> SeriesS {
        SeriesS {
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
            params: self.params.clone(),
        }
    }

    pub fn scale_u64(&self, c: u64) -> SeriesS {
        SeriesS {
            coeffs: self.coeffs.iter().map(|a| a.scalar_mul(c)).collect(),
            params: self.params.clone(),
        }
    }

    /// Multiplication by u^k (truncating at the top).
    pub fn shift_up(&self, k: usize) -> SeriesS {
        let m = self.m();
        let mut out = Self::zero(&self.params, m);
        for i in 0..m.saturating_sub(k) {
            out.coeffs[i + k] = self.coeffs[i].clone();
        }
        out
    }

    /// Truncates (or zero-extends; extension claims no new knowledge and is
    /// only for internal container alignment).
    pub fn resized(&self, m2: usize) -> SeriesS {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(m2, self.params.zero());
        SeriesS {
            coeffs,
            params: self.params.clone(),
        }
    }

    /// True iff invertible in 𝔖: nonzero image mod (p, u).
    pub fn is_unit(&self) -> bool {
        self.coeffs[0].is_unit()
    }

    /// Inverse of a unit by the recursive coefficient formula.
    pub fn inv(&self) -> Result<SeriesS> {
        if !self.is_unit() {
            return Err(Error::Unit(
                "constant coefficient is not a unit of W(k)".into(),
            ));
        }
        let m = self.m();
        let c0inv = self.coeffs[0].inv()?;
        let mut g = Self::zero(&self.params, m);
        g.coeffs[0] = c0inv.clone();
        for k in 1..m {
            let mut acc = self.params.zero();
            for j in 1..=k {
                if !self.coeffs[j].is_zero() {
                    acc = acc.add(&self.coeffs[j].mul(&g.coeffs[k - j]));
                }
            }
            g.coeffs[k] = c0inv.mul(&acc).neg();
        }
        Ok(g)
    }

    /// φ(Σ a_i u^i) = Σ σ(a_i) u^{pi}, truncated to the container. The
    /// mathematical output is determined mod u^{pM}; the container caps the
    /// reported u-precision at min(pM, M) = M.
    pub fn phi(&self) -> SeriesS {
        let (s, _) = self.phi_with_prec();
        s
    }

    pub fn phi_with_prec(&self) -> (SeriesS, usize) {
        let m = self.m();
        let p = self.params.p() as usize;
        let mut out = Self::zero(&self.params, m);
        for (i, a) in self.coeffs.iter().enumerate() {
            let j = i.saturating_mul(p);
            if j >= m {
                break;
            }
            out.coeffs[j] = a.sigma();
        }
        (out, (p * m).min(m))
    }

    /// Constant term (evaluation at u = 0).
    pub fn eval0(&self) -> WittElem {
        self.coeffs[0].clone()
    }

    /// Entrywise reduction of the element mod p (as residue data), used for
    /// mod-(p,u) questions.
    pub fn val_p_of_coeff(&self, i: usize) -> Option<u32> {
        self.coeffs[i].val_p()
    }

    /// Exact division of every coefficient by p^k.
    pub fn div_p_exact(&self, k: u32) -> Result<SeriesS> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| c.div_p_exact(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(SeriesS {
            coeffs,
            params: self.params.clone(),
        })
    }

    /// Embeds the series into a coefficient extension, given the image of the
    /// base generator.
    pub fn embed_coeffs(&self, ext: &Arc<CoeffParams>, gen_image: &WittElem) -> SeriesS {
        SeriesS {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| self.params.embed(c, gen_image))
                .collect(),
            params: ext.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Eisenstein polynomials
// ---------------------------------------------------------------------------

/// Eisenstein polynomial P(u) = a_0 + a_1 u + ... + a_e u^e normalized so
/// that a_0 = p exactly, p | a_i for 0 < i < e, and a_e is a unit (the
/// polynomial need not be monic).
#[derive(Clone, PartialEq, Eq)]
pub struct EisensteinP {
    coeffs: Vec<WittElem>,
}

impl fmt::Debug for EisensteinP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P(deg {})", self.e())
    }
}

impl EisensteinP {
    pub fn new(coeffs: Vec<WittElem>) -> Result<EisensteinP> {
        if coeffs.len() < 2 {
            return Err(Error::Params("Eisenstein polynomial needs degree >= 1".into()));
        }
        let params = coeffs[0].params().clone();
        let p_elt = params.from_u64(params.p());
        if coeffs[0] != p_elt {
            return Err(Error::Params("P(0) must equal p exactly".into()));
        }
        let e = coeffs.len() - 1;
        for (i, c) in coeffs.iter().enumerate().take(e).skip(1) {
            if c.val_p() == Some(0) {
                return Err(Error::Params(format!(
                    "coefficient a_{i} must be divisible by p"
                )));
            }
        }
        if !coeffs[e].is_unit() {
            return Err(Error::Params("leading coefficient must be a unit".into()));
        }
        Ok(EisensteinP { coeffs })
    }

    /// The standard choice u^e + ... + p with only leading and constant terms.
    pub fn monic_uniform(params: &Arc<CoeffParams>, e: usize) -> Result<EisensteinP> {
        let mut coeffs = vec![params.zero(); e + 1];
        coeffs[0] = params.from_u64(params.p());
        coeffs[e] = params.one();
        Self::new(coeffs)
    }

    pub fn e(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[WittElem] {
        &self.coeffs
    }

    pub fn params(&self) -> &Arc<CoeffParams> {
        self.coeffs[0].params()
    }

    pub fn as_series(&self, m: usize) -> SeriesS {
        let params = self.params();
        let mut s = SeriesS::zero(params, m);
        for (i, c) in self.coeffs.iter().enumerate() {
            if i < m {
                s.set_coeff(i, c.clone());
            }
        }
        s
    }

    /// P to the h-th power as a coefficient vector of length he+1 (exact
    /// polynomial arithmetic mod p^N).
    pub fn power_poly(&self, h: usize) -> Vec<WittElem> {
        let params = self.params();
        let mut acc = vec![params.one()];
        for _ in 0..h {
            let mut next = vec![params.zero(); acc.len() + self.e()];
            for (i, a) in acc.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (j, b) in self.coeffs.iter().enumerate() {
                    next[i + j] = next[i + j].add(&a.mul(b));
                }
            }
            acc = next;
        }
        acc
    }

    pub fn embed_coeffs(
        &self,
        ext: &Arc<CoeffParams>,
        gen_image: &WittElem,
    ) -> Result<EisensteinP> {
        let params = self.params().clone();
        EisensteinP::new(
            self.coeffs
                .iter()
                .map(|c| params.embed(c, gen_image))
                .collect::<Vec<_>>(),
        )
        .map_err(|e| Error::Params(format!("embedding Eisenstein polynomial: {e}")))?
        .validate_in(ext)
    }

    fn validate_in(self, _ext: &Arc<CoeffParams>) -> Result<EisensteinP> {
        Ok(self)
    }
}

// ---------------------------------------------------------------------------
// Weierstrass division
// ---------------------------------------------------------------------------

/// Result of dividing f by P^h: f = q · P^h + r with deg_u r < he, exact as
/// truncated objects. Interpreted as Weierstrass division of the underlying
/// power series, q is valid mod u^{q_u_prec} and r mod p^{r_p_prec}; the
/// fields make the precision loss explicit.
#[derive(Clone, Debug)]
pub struct WeierstrassDiv {
    pub q: SeriesS,
    pub r: SeriesS,
    pub q_u_prec: usize,
    pub r_p_prec: u32,
}

/// Three-valued zero test outcome for precision-limited predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decide {
    True,
    False,
    Undecidable,
}

/// Divides f by P^h with remainder of u-degree < he.
///
/// The truncated data determine the power-series quotient only mod
/// u^{M - he}; `Precision` error if that window is empty.
pub fn weierstrass_divide(f: &SeriesS, pe: &EisensteinP, h: usize) -> Result<WeierstrassDiv> {
    if h == 0 {
        return Err(Error::Params("division exponent h must be >= 1".into()));
    }
    let m = f.m();
    let e = pe.e();
    let he = h * e;
    if m <= he {
        return Err(Error::Precision(format!(
            "u-precision {m} cannot stabilize a quotient by P^{h} (degree {he})"
        )));
    }
    let params = f.params();
    let d = pe.power_poly(h);
    let lead_inv = d[he].inv()?;
    let mut work: Vec<WittElem> = f.coeffs().to_vec();
    let mut q = SeriesS::zero(params, m);
    for k in (he..m).rev() {
        if work[k].is_zero() {
            continue;
        }
        let c = work[k].mul(&lead_inv);
        for (j, dj) in d.iter().enumerate() {
            if dj.is_zero() {
                continue;
            }
            work[k - he + j] = work[k - he + j].sub(&c.mul(dj));
        }
        q.set_coeff(k - he, c);
    }
    let mut r = SeriesS::zero(params, m);
    for (k, w) in work.iter().enumerate().take(he) {
        r.set_coeff(k, w.clone());
    }
    let r_p_prec = remainder_p_prec(params, m, e, h);
    Ok(WeierstrassDiv {
        q,
        r,
        q_u_prec: m - he,
        r_p_prec,
    })
}

/// Conservative p-precision of a division remainder: unknown tail
/// coefficients of f at u^j (j >= M) perturb the remainder only modulo
/// p^{floor((M - e + 1)/e)}, less one per extra division.
fn remainder_p_prec(params: &Arc<CoeffParams>, m: usize, e: usize, h: usize) -> u32 {
    let base = (m + 1).saturating_sub(e) / e;
    let adj = base.saturating_sub(h - 1) as u32;
    adj.min(params.n())
}

/// Decides whether a division remainder vanishes, honoring its effective
/// p-precision.
pub fn remainder_is_zero(div: &WeierstrassDiv) -> Decide {
    if div.r.is_zero() {
        return Decide::True;
    }
    let prec = div.r_p_prec;
    let n = div.r.params().n();
    let definitely_nonzero = (0..div.r.m()).any(|i| {
        div.r
            .val_p_of_coeff(i)
            .is_some_and(|v| v < prec)
    });
    if definitely_nonzero {
        Decide::False
    } else if prec >= n {
        // zero at full precision
        Decide::True
    } else {
        Decide::Undecidable
    }
}

/// Factorization data of f as P^s · (cofactor): `s` is the exact P-adic
/// valuation at the working precision, `unit_flag` says whether the cofactor
/// is a unit of 𝔖, and `witness` is the cofactor (u-precision M - se).
#[derive(Clone, Debug)]
pub struct PFactor {
    pub s: usize,
    pub unit_flag: bool,
    pub witness: SeriesS,
}

/// The largest s with P^s | f, by repeated Weierstrass division.
pub fn p_unit_factorization(f: &SeriesS, pe: &EisensteinP) -> Result<PFactor> {
    if f.is_zero() {
        return Err(Error::Precision(
            "input is zero at the working precision; P-adic valuation undefined".into(),
        ));
    }
    let mut cur = f.clone();
    let mut s = 0usize;
    loop {
        if cur.m() <= pe.e() {
            return Err(Error::Precision(
                "u-precision exhausted while extracting P factors".into(),
            ));
        }
        let div = weierstrass_divide(&cur, pe, 1)?;
        match remainder_is_zero(&div) {
            Decide::True => {
                s += 1;
                cur = div.q.resized(cur.m() - pe.e());
                if cur.is_zero() {
                    return Err(Error::Precision(
                        "cofactor vanished at precision; P-adic valuation exceeds the window"
                            .into(),
                    ));
                }
            }
            Decide::False => {
                return Ok(PFactor {
                    unit_flag: cur.is_unit(),
                    witness: cur,
                    s,
                });
            }
            Decide::Undecidable => {
                return Err(Error::Precision(format!(
                    "divisibility by P undecidable at p-precision {}",
                    div.r_p_prec
                )));
            }
        }
    }
}
