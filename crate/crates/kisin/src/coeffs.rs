//! Arithmetic in W(k') at finite precision: the coefficient ring for
//! everything else in the crate.
//!
//! W(k') for k' = F_{p^r} is modeled as (Z/p^N)\[x\]/(f) where f is a monic
//! degree-r polynomial whose reduction is irreducible over F_p and which
//! divides x^{p^r - 1} - 1 modulo p^N (for r > 1). The second condition makes
//! the generator g = x a Teichmüller element, so the Witt vector Frobenius is
//! simply g -> g^p and no Witt-coordinate arithmetic is ever needed.
//!
//! Precision is a hard modulus: every element is an exact vector of residues
//! mod p^N, and operations that would need more precision fail loudly
//! elsewhere in the crate.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Parameters of W(k'): prime, extension degree, precision and defining
/// polynomial. Construct via [`CoeffParams::new`] (automatic Teichmüller
/// polynomial) or [`CoeffParams::with_poly`] (validated user polynomial).
pub struct CoeffParams {
    p: u64,
    r: usize,
    n: u32,
    /// p^n
    pn: u64,
    /// Monic defining polynomial, coefficients mod p^n, length r+1, f[r] = 1.
    f: Vec<u64>,
    /// Coordinates of g^p mod f for the power basis; sigma(g) = g^p exactly
    /// because g is Teichmüller.
    sigma_gen: Vec<u64>,
}

impl PartialEq for CoeffParams {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.r == other.r && self.n == other.n && self.f == other.f
    }
}
impl Eq for CoeffParams {}

impl fmt::Debug for CoeffParams {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "W(F_{}^{}) mod p^{}", self.p, self.r, self.n)
    }
}

// ---------------------------------------------------------------------------
// scalar helpers mod p^n
// ---------------------------------------------------------------------------

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
fn add_mod(a: u64, b: u64, m: u64) -> u64 {
    let s = a as u128 + b as u128;
    (s % m as u128) as u64
}

#[inline]
fn sub_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 + m as u128 - b as u128) as u64 % m
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// v_p of a scalar; `None` for 0.
fn val_p(mut a: u64, p: u64) -> Option<u32> {
    if a == 0 {
        return None;
    }
    let mut v = 0;
    while a.is_multiple_of(p) {
        a /= p;
        v += 1;
    }
    Some(v)
}

/// Inverse of a unit scalar mod p^n, by Fermat on the residue and Newton.
fn inv_mod_pn(a: u64, p: u64, pn: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(p));
    let mut x = pow_mod(a % p, p - 2, p); // inverse mod p
    if p == 2 {
        x = 1;
    }
    // x <- x(2 - ax), doubling precision each round
    let mut reach = p;
    while reach < pn {
        reach = reach.saturating_mul(reach).min(pn);
        let ax = mul_mod(a, x, pn);
        x = mul_mod(x, sub_mod(2 % pn, ax, pn), pn);
    }
    x
}

// ---------------------------------------------------------------------------
// dense polynomial helpers over Z/m
// ---------------------------------------------------------------------------

fn poly_trim(v: &mut Vec<u64>) {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
}

fn poly_mul(a: &[u64], b: &[u64], m: u64) -> Vec<u64> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = add_mod(out[i + j], mul_mod(ai, bj, m), m);
        }
    }
    out
}

/// Remainder of `a` modulo the monic polynomial `f`, coefficients mod m.
fn poly_rem_monic(a: &[u64], f: &[u64], m: u64) -> Vec<u64> {
    let d = f.len() - 1;
    let mut a = a.to_vec();
    while a.len() > d {
        let lead = *a.last().unwrap();
        let k = a.len() - 1 - d;
        if lead != 0 {
            for i in 0..d {
                a[k + i] = sub_mod(a[k + i], mul_mod(lead, f[i], m), m);
            }
        }
        a.pop();
    }
    a.resize(d.max(1), 0);
    a
}

/// x^e mod (f, m) for monic f.
fn poly_powmod_x(e: u64, f: &[u64], m: u64) -> Vec<u64> {
    let d = f.len() - 1;
    let mut base = vec![0u64; d.max(2)];
    if d == 1 {
        // x reduces immediately
        base = poly_rem_monic(&[0, 1], f, m);
    } else {
        base[1] = 1;
        base.truncate(d);
    }
    let mut acc = vec![0u64; d.max(1)];
    acc[0] = 1;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = poly_rem_monic(&poly_mul(&acc, &base, m), f, m);
        }
        base = poly_rem_monic(&poly_mul(&base, &base, m), f, m);
        e >>= 1;
    }
    acc
}

fn poly_gcd_fp(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    poly_trim(&mut a);
    poly_trim(&mut b);
    while !(b.len() == 1 && b[0] == 0) {
        // a mod b with unit leading coefficient handling
        let lead_inv = inv_mod_pn(*b.last().unwrap(), p, p);
        let monic_b: Vec<u64> = b.iter().map(|&c| mul_mod(c, lead_inv, p)).collect();
        let r = if a.len() >= monic_b.len() {
            poly_rem_monic(&a, &monic_b, p)
        } else {
            a.clone()
        };
        a = monic_b;
        b = r;
        poly_trim(&mut b);
    }
    a
}

/// Irreducibility over F_p of a monic polynomial of degree r, by the
/// standard x^{p^k} criteria.
fn is_irreducible_fp(f: &[u64], p: u64) -> bool {
    let r = f.len() - 1;
    if r == 0 {
        return false;
    }
    // x^{p^r} = x mod f
    let mut xq = poly_rem_monic(&[0, 1], f, p);
    for _ in 0..r {
        // raise to p-th power
        let mut acc = vec![0u64; f.len() - 1];
        acc[0] = 1;
        let mut b = xq.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = poly_rem_monic(&poly_mul(&acc, &b, p), f, p);
            }
            b = poly_rem_monic(&poly_mul(&b, &b, p), f, p);
            e >>= 1;
        }
        xq = acc;
    }
    let mut x_itself = poly_rem_monic(&[0, 1], f, p);
    poly_trim(&mut xq);
    poly_trim(&mut x_itself);
    if xq != x_itself {
        return false;
    }
    // gcd(x^{p^{r/l}} - x, f) = 1 for every prime l | r
    let mut l = 2;
    let mut rr = r;
    let mut primes = Vec::new();
    while l * l <= rr {
        if rr.is_multiple_of(l) {
            primes.push(l);
            while rr.is_multiple_of(l) {
                rr /= l;
            }
        }
        l += 1;
    }
    if rr > 1 {
        primes.push(rr);
    }
    for l in primes {
        let k = r / l;
        let mut xq = poly_rem_monic(&[0, 1], f, p);
        for _ in 0..k {
            let mut acc = vec![0u64; f.len() - 1];
            acc[0] = 1;
            let mut b = xq.clone();
            let mut e = p;
            while e > 0 {
                if e & 1 == 1 {
                    acc = poly_rem_monic(&poly_mul(&acc, &b, p), f, p);
                }
                b = poly_rem_monic(&poly_mul(&b, &b, p), f, p);
                e >>= 1;
            }
            xq = acc;
        }
        // xq - x
        let mut diff = xq;
        if diff.len() < 2 {
            diff.resize(2, 0);
        }
        diff[1] = sub_mod(diff[1], 1, p);
        poly_trim(&mut diff);
        let g = poly_gcd_fp(&diff, f, p);
        if !(g.len() == 1 && g[0] != 0) {
            return false;
        }
    }
    true
}

impl CoeffParams {
    /// Builds W(F_{p^r}) at precision p^n with an automatically chosen
    /// defining polynomial whose roots are Teichmüller elements.
    pub fn new(p: u64, r: usize, n: u32) -> Result<Arc<CoeffParams>> {
        if n == 0 {
            return Err(Error::Params("precision exponent must be >= 1".into()));
        }
        if r == 0 {
            return Err(Error::Params("extension degree must be >= 1".into()));
        }
        let pn = checked_pow(p, n)?;
        if r == 1 {
            // W(F_p) = Z/p^n with generator 1 and f = x - 1
            let f = vec![sub_mod(0, 1, pn), 1];
            return Ok(Arc::new(CoeffParams {
                p,
                r,
                n,
                pn,
                f,
                sigma_gen: vec![1],
            }));
        }
        // deterministic search for an irreducible residue polynomial
        let mut fbar = None;
        'outer: for code in 0..checked_pow(p, r as u32)? {
            let mut cand = vec![0u64; r + 1];
            cand[r] = 1;
            let mut c = code;
            for item in cand.iter_mut().take(r) {
                *item = c % p;
                c /= p;
            }
            if is_irreducible_fp(&cand, p) {
                fbar = Some(cand);
                break 'outer;
            }
        }
        let fbar = fbar.ok_or_else(|| Error::Params("no irreducible polynomial found".into()))?;
        let f = teichmuller_normalize(&fbar, p, r, n, pn);
        Self::finish(p, r, n, pn, f)
    }

    /// Builds W(F_{p^r}) from a caller-supplied monic defining polynomial
    /// (coefficients mod p^n), validating the invariants: the reduction is
    /// irreducible over F_p, and for r > 1 the polynomial divides
    /// x^{p^r - 1} - 1 mod p^n.
    pub fn with_poly(p: u64, r: usize, n: u32, f: Vec<u64>) -> Result<Arc<CoeffParams>> {
        if n == 0 {
            return Err(Error::Params("precision exponent must be >= 1".into()));
        }
        let pn = checked_pow(p, n)?;
        if f.len() != r + 1 || r == 0 {
            return Err(Error::Params(format!(
                "defining polynomial must have degree {r}"
            )));
        }
        if f[r] % pn != 1 {
            return Err(Error::Params("defining polynomial must be monic".into()));
        }
        let f: Vec<u64> = f.iter().map(|&c| c % pn).collect();
        let fbar: Vec<u64> = f.iter().map(|&c| c % p).collect();
        if r > 1 && !is_irreducible_fp(&fbar, p) {
            return Err(Error::Params(
                "defining polynomial is not irreducible mod p".into(),
            ));
        }
        if r > 1 {
            // x^{p^r - 1} = 1 in (Z/p^n)[x]/(f) iff f | x^{p^r-1} - 1
            let e = checked_pow(p, r as u32)? - 1;
            let pw = poly_powmod_x(e, &f, pn);
            let mut one = vec![0u64; r];
            one[0] = 1;
            if pw != one {
                return Err(Error::Params(
                    "defining polynomial does not divide x^{p^r-1} - 1 at precision; \
                     generator would not be Teichmüller"
                        .into(),
                ));
            }
        }
        Self::finish(p, r, n, pn, f)
    }

    fn finish(p: u64, r: usize, n: u32, pn: u64, f: Vec<u64>) -> Result<Arc<CoeffParams>> {
        let sigma_gen = poly_powmod_x(p, &f, pn);
        Ok(Arc::new(CoeffParams {
            p,
            r,
            n,
            pn,
            f,
            sigma_gen,
        }))
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn r(&self) -> usize {
        self.r
    }
    /// Precision exponent N.
    pub fn n(&self) -> u32 {
        self.n
    }
    /// The modulus p^N.
    pub fn pn(&self) -> u64 {
        self.pn
    }
    pub fn poly(&self) -> &[u64] {
        &self.f
    }

    /// The power-basis generator g (class of x).
    pub fn gen(self: &Arc<Self>) -> WittElem {
        let mut coords = vec![0u64; self.r];
        if self.r == 1 {
            coords[0] = 1; // x = 1 mod (x - 1)
        } else {
            coords[1] = 1;
        }
        WittElem {
            coords,
            params: self.clone(),
        }
    }

    pub fn zero(self: &Arc<Self>) -> WittElem {
        WittElem {
            coords: vec![0u64; self.r],
            params: self.clone(),
        }
    }

    pub fn one(self: &Arc<Self>) -> WittElem {
        self.from_u64(1)
    }

    pub fn from_u64(self: &Arc<Self>, c: u64) -> WittElem {
        let mut coords = vec![0u64; self.r];
        coords[0] = c % self.pn;
        WittElem {
            coords,
            params: self.clone(),
        }
    }

    pub fn from_i64(self: &Arc<Self>, c: i64) -> WittElem {
        let m = self.pn as i128;
        let v = ((c as i128 % m) + m) % m;
        self.from_u64(v as u64)
    }

    pub fn from_coords(self: &Arc<Self>, coords: &[u64]) -> Result<WittElem> {
        if coords.len() != self.r {
            return Err(Error::Params(format!(
                "coordinate vector has length {}, expected {}",
                coords.len(),
                self.r
            )));
        }
        Ok(WittElem {
            coords: coords.iter().map(|&c| c % self.pn).collect(),
            params: self.clone(),
        })
    }

    /// Builds the degree-d unramified extension and the image of this ring's
    /// generator in it, giving an exact embedding W(k) -> W(k').
    pub fn extension(self: &Arc<Self>, d: usize) -> Result<(Arc<CoeffParams>, WittElem)> {
        if d == 0 {
            return Err(Error::Params("extension degree must be >= 1".into()));
        }
        if d == 1 {
            return Ok((self.clone(), self.gen()));
        }
        let ext = CoeffParams::new(self.p, self.r * d, self.n)?;
        // lex-least residue root of f-bar in the big field, then Teichmüller
        let fbar: Vec<u64> = self.f.iter().map(|&c| c % self.p).collect();
        let card = checked_pow(self.p, (self.r * d) as u32)?;
        let mut root = None;
        for code in 0..card {
            let mut coords = vec![0u64; self.r * d];
            let mut c = code;
            for item in coords.iter_mut() {
                *item = c % self.p;
                c /= self.p;
            }
            let z = ResidueElem {
                coords,
                params: ext.clone(),
            };
            if z.eval_poly(&fbar).is_zero() {
                root = Some(z);
                break;
            }
        }
        let root = root.ok_or_else(|| {
            Error::Params("defining polynomial has no root in the requested extension".into())
        })?;
        let img = ext.teichmuller(&root);
        Ok((ext, img))
    }

    /// Applies the embedding determined by `gen_image` (the image of this
    /// ring's generator, as produced by [`CoeffParams::extension`]).
    pub fn embed(&self, a: &WittElem, gen_image: &WittElem) -> WittElem {
        let ext = &gen_image.params;
        let mut acc = ext.zero();
        // Horner in the image of g
        for &c in a.coords.iter().rev() {
            acc = acc.mul(gen_image).add(&ext.from_u64(c));
        }
        acc
    }

    /// Teichmüller lift: the unique multiplicative section of reduction.
    pub fn teichmuller(self: &Arc<Self>, a: &ResidueElem) -> WittElem {
        let mut z = WittElem {
            coords: a.coords.clone(),
            params: self.clone(),
        };
        let q = {
            // p^r may overflow only for absurd parameters; checked at build
            let mut q: u64 = 1;
            for _ in 0..self.r {
                q *= self.p;
            }
            q
        };
        // z -> z^{p^r} gains one p-digit per round
        for _ in 0..=self.n {
            z = z.pow(q);
        }
        z
    }
}

fn checked_pow(p: u64, n: u32) -> Result<u64> {
    let mut acc: u64 = 1;
    for _ in 0..n {
        acc = acc
            .checked_mul(p)
            .filter(|&v| v <= (1u64 << 62))
            .ok_or_else(|| Error::Params("p^N exceeds the supported scalar range".into()))?;
    }
    Ok(acc)
}

/// Replaces a monic lift of an irreducible residue polynomial by the minimal
/// polynomial of the Teichmüller lift of its root, so that the roots of the
/// returned polynomial are exactly Teichmüller.
fn teichmuller_normalize(fbar: &[u64], p: u64, r: usize, n: u32, pn: u64) -> Vec<u64> {
    // temporary ring (Z/p^n)[x]/(naive lift)
    let f0: Vec<u64> = fbar.to_vec();
    let mut t = vec![0u64; r];
    t[1 % r] = 1;
    if r == 1 {
        t[0] = f0[0]; // unused
    }
    let q = {
        let mut q: u64 = 1;
        for _ in 0..r {
            q *= p;
        }
        q
    };
    let powq = |z: &[u64]| -> Vec<u64> {
        let mut acc = vec![0u64; r];
        acc[0] = 1;
        let mut b = z.to_vec();
        let mut e = q;
        while e > 0 {
            if e & 1 == 1 {
                acc = poly_rem_monic(&poly_mul(&acc, &b, pn), &f0, pn);
            }
            b = poly_rem_monic(&poly_mul(&b, &b, pn), &f0, pn);
            e >>= 1;
        }
        acc
    };
    for _ in 0..=n {
        t = powq(&t);
    }
    // minimal polynomial: solve B c = t^r over Z/p^n, B columns = coords of t^j
    let mut pows: Vec<Vec<u64>> = Vec::with_capacity(r + 1);
    let mut cur = vec![0u64; r];
    cur[0] = 1;
    for _ in 0..=r {
        pows.push(cur.clone());
        cur = poly_rem_monic(&poly_mul(&cur, &t, pn), &f0, pn);
    }
    let mut mat = vec![vec![0u64; r]; r]; // mat[row][col]
    for (j, pw) in pows.iter().take(r).enumerate() {
        for i in 0..r {
            mat[i][j] = pw[i];
        }
    }
    let mut rhs: Vec<u64> = pows[r].clone();
    // Gaussian elimination; the matrix is the identity mod p, so every pivot
    // is a unit without any row searching
    for col in 0..r {
        let mut piv = col;
        while mat[piv][col].is_multiple_of(p) {
            piv += 1;
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        let inv = inv_mod_pn(mat[col][col], p, pn);
        for j in 0..r {
            mat[col][j] = mul_mod(mat[col][j], inv, pn);
        }
        rhs[col] = mul_mod(rhs[col], inv, pn);
        for i in 0..r {
            if i != col && mat[i][col] != 0 {
                let fctr = mat[i][col];
                for j in 0..r {
                    mat[i][j] = sub_mod(mat[i][j], mul_mod(fctr, mat[col][j], pn), pn);
                }
                rhs[i] = sub_mod(rhs[i], mul_mod(fctr, rhs[col], pn), pn);
            }
        }
    }
    let mut f = vec![0u64; r + 1];
    f[r] = 1;
    for j in 0..r {
        f[j] = sub_mod(0, rhs[j], pn);
    }
    f
}

// ---------------------------------------------------------------------------
// WittElem
// ---------------------------------------------------------------------------

/// Element of W(k') at precision p^N, in the power basis of the generator.
#[derive(Clone, PartialEq, Eq)]
pub struct WittElem {
    coords: Vec<u64>,
    params: Arc<CoeffParams>,
}

impl fmt::Debug for WittElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{:?}", self.coords)
    }
}

impl WittElem {
    pub fn params(&self) -> &Arc<CoeffParams> {
        &self.params
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn same_params(&self, other: &WittElem) -> bool {
        Arc::ptr_eq(&self.params, &other.params) || *self.params == *other.params
    }

    fn check_params(&self, other: &WittElem) -> Result<()> {
        if self.same_params(other) {
            Ok(())
        } else {
            Err(Error::Params(format!(
                "{:?} vs {:?}",
                self.params, other.params
            )))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// Zero modulo p^k (k clamped to the precision).
    pub fn is_zero_mod(&self, k: u32) -> bool {
        let k = k.min(self.params.n);
        let pk = self.params.pn / pow_mod(self.params.p, (self.params.n - k) as u64, u64::MAX);
        self.coords.iter().all(|&c| c % pk == 0)
    }

    pub fn add(&self, other: &WittElem) -> WittElem {
        debug_assert!(self.same_params(other));
        let m = self.params.pn;
        WittElem {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| add_mod(a, b, m))
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn sub(&self, other: &WittElem) -> WittElem {
        debug_assert!(self.same_params(other));
        let m = self.params.pn;
        WittElem {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| sub_mod(a, b, m))
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn neg(&self) -> WittElem {
        let m = self.params.pn;
        WittElem {
            coords: self.coords.iter().map(|&a| sub_mod(0, a, m)).collect(),
            params: self.params.clone(),
        }
    }

    pub fn mul(&self, other: &WittElem) -> WittElem {
        debug_assert!(self.same_params(other));
        let m = self.params.pn;
        let prod = poly_mul(&self.coords, &other.coords, m);
        let red = poly_rem_monic(&prod, &self.params.f, m);
        let mut coords = red;
        coords.resize(self.params.r, 0);
        WittElem {
            coords,
            params: self.params.clone(),
        }
    }

    pub fn scalar_mul(&self, c: u64) -> WittElem {
        let m = self.params.pn;
        let c = c % m;
        WittElem {
            coords: self.coords.iter().map(|&a| mul_mod(a, c, m)).collect(),
            params: self.params.clone(),
        }
    }

    pub fn pow(&self, mut e: u64) -> WittElem {
        let mut acc = self.params.one();
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            e >>= 1;
        }
        acc
    }

    /// Checked ring operations with parameter validation, for callers that
    /// mix sources of elements.
    pub fn checked_add(&self, other: &WittElem) -> Result<WittElem> {
        self.check_params(other)?;
        Ok(self.add(other))
    }

    pub fn checked_mul(&self, other: &WittElem) -> Result<WittElem> {
        self.check_params(other)?;
        Ok(self.mul(other))
    }

    /// True iff the residue is nonzero, i.e. the element is a unit.
    pub fn is_unit(&self) -> bool {
        self.coords.iter().any(|&c| c % self.params.p != 0)
    }

    /// Inverse of a unit; `Unit` error otherwise.
    pub fn inv(&self) -> Result<WittElem> {
        if !self.is_unit() {
            return Err(Error::Unit(format!("{:?}", self)));
        }
        // residue-field inverse by Fermat: z^(p^r - 2)
        let res = self.residue();
        let card = {
            let mut q: u64 = 1;
            for _ in 0..self.params.r {
                q *= self.params.p;
            }
            q
        };
        let mut inv_res = res.pow(card - 2);
        if card == 2 {
            inv_res = res.clone(); // F_2: the only unit is 1
        }
        let mut x = WittElem {
            coords: inv_res.coords.clone(),
            params: self.params.clone(),
        };
        // Newton: x <- x(2 - ax)
        let two = self.params.from_u64(2);
        let mut reach = 1u32;
        while reach < self.params.n {
            reach *= 2;
            let ax = self.mul(&x);
            x = x.mul(&two.sub(&ax));
        }
        Ok(x)
    }

    /// v_p as an element: min over coordinates; `None` for 0 at precision.
    pub fn val_p(&self) -> Option<u32> {
        self.coords
            .iter()
            .filter_map(|&c| val_p(c, self.params.p))
            .min()
    }

    /// Exact division by p^k; `Precision` error if not divisible.
    pub fn div_p_exact(&self, k: u32) -> Result<WittElem> {
        let pk = checked_pow(self.params.p, k)?;
        let mut coords = Vec::with_capacity(self.coords.len());
        for &c in &self.coords {
            if c % pk != 0 {
                return Err(Error::Precision(format!(
                    "coordinate {c} not divisible by p^{k}"
                )));
            }
            coords.push(c / pk);
        }
        Ok(WittElem {
            coords,
            params: self.params.clone(),
        })
    }

    /// The Witt vector Frobenius sigma, the unique lift of x -> x^p. Since
    /// the generator is Teichmüller, sigma(g) = g^p exactly.
    pub fn sigma(&self) -> WittElem {
        if self.params.r == 1 {
            return self.clone();
        }
        let m = self.params.pn;
        let sg = WittElem {
            coords: self.params.sigma_gen.clone(),
            params: self.params.clone(),
        };
        // evaluate the coordinate polynomial at sigma(g) by Horner
        let mut acc = self.params.zero();
        for &c in self.coords.iter().rev() {
            acc = acc.mul(&sg);
            acc.coords[0] = add_mod(acc.coords[0], c, m);
        }
        acc
    }

    pub fn sigma_iter(&self, k: usize) -> WittElem {
        let mut z = self.clone();
        for _ in 0..k % self.params.r {
            z = z.sigma();
        }
        z
    }

    pub fn residue(&self) -> ResidueElem {
        ResidueElem {
            coords: self.coords.iter().map(|&c| c % self.params.p).collect(),
            params: self.params.clone(),
        }
    }

    /// Reduces the element to a lower precision n2 <= N (same ring family).
    pub fn reduce_mod(&self, pk: u64) -> Vec<u64> {
        self.coords.iter().map(|&c| c % pk).collect()
    }
}

// ---------------------------------------------------------------------------
// ResidueElem
// ---------------------------------------------------------------------------

/// Element of the residue field k' = F_{p^r}.
#[derive(Clone, PartialEq, Eq)]
pub struct ResidueElem {
    coords: Vec<u64>,
    params: Arc<CoeffParams>,
}

impl fmt::Debug for ResidueElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{:?}", self.coords)
    }
}

impl ResidueElem {
    pub fn params(&self) -> &Arc<CoeffParams> {
        &self.params
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn from_coords(params: &Arc<CoeffParams>, coords: &[u64]) -> Result<ResidueElem> {
        if coords.len() != params.r {
            return Err(Error::Params("wrong residue coordinate length".into()));
        }
        Ok(ResidueElem {
            coords: coords.iter().map(|&c| c % params.p).collect(),
            params: params.clone(),
        })
    }

    pub fn zero(params: &Arc<CoeffParams>) -> ResidueElem {
        ResidueElem {
            coords: vec![0; params.r],
            params: params.clone(),
        }
    }

    pub fn one(params: &Arc<CoeffParams>) -> ResidueElem {
        let mut coords = vec![0; params.r];
        coords[0] = 1;
        ResidueElem {
            coords,
            params: params.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &ResidueElem) -> ResidueElem {
        let p = self.params.p;
        ResidueElem {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| (a + b) % p)
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn sub(&self, other: &ResidueElem) -> ResidueElem {
        let p = self.params.p;
        ResidueElem {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| (a + p - b) % p)
                .collect(),
            params: self.params.clone(),
        }
    }

    pub fn mul(&self, other: &ResidueElem) -> ResidueElem {
        let p = self.params.p;
        let fbar: Vec<u64> = self.params.f.iter().map(|&c| c % p).collect();
        let prod = poly_mul(&self.coords, &other.coords, p);
        let mut red = poly_rem_monic(&prod, &fbar, p);
        red.resize(self.params.r, 0);
        ResidueElem {
            coords: red,
            params: self.params.clone(),
        }
    }

    pub fn pow(&self, mut e: u64) -> ResidueElem {
        let mut acc = ResidueElem::one(&self.params);
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&b);
            }
            b = b.mul(&b);
            e >>= 1;
        }
        acc
    }

    fn eval_poly(&self, poly: &[u64]) -> ResidueElem {
        let mut acc = ResidueElem::zero(&self.params);
        for &c in poly.iter().rev() {
            acc = acc.mul(self);
            acc.coords[0] = (acc.coords[0] + c) % self.params.p;
        }
        acc
    }

    /// Frobenius x -> x^p on the residue field.
    pub fn frobenius(&self) -> ResidueElem {
        self.pow(self.params.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w2(n: u32) -> Arc<CoeffParams> {
        CoeffParams::new(2, 1, n).unwrap()
    }

    fn w4(n: u32) -> Arc<CoeffParams> {
        CoeffParams::new(2, 2, n).unwrap()
    }

    /// extended Euclid oracle for the inverse of a mod m
    fn egcd_inv(a: i64, m: i64) -> i64 {
        let (mut old_r, mut r) = (a, m);
        let (mut old_s, mut s) = (1i64, 0i64);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        assert_eq!(old_r.abs(), 1);
        (old_s * old_r.signum()).rem_euclid(m)
    }

    #[test]
    fn inv_in_w_f2_n4() {
        // inv(3) = 11 since 3 * 11 = 33 = 1 mod 16 (extended-Euclid oracle)
        let w = w2(4);
        let three = w.from_u64(3);
        let inv = three.inv().unwrap();
        assert_eq!(inv.coords()[0], egcd_inv(3, 16) as u64);
        assert_eq!(inv.coords()[0], 11);
        assert!(three.mul(&inv).sub(&w.one()).is_zero());
    }

    #[test]
    fn inv_identity_and_nonunit() {
        let w = w2(4);
        assert_eq!(w.one().inv().unwrap(), w.one());
        assert!(matches!(w.from_u64(2).inv(), Err(Error::Unit(_))));
        assert!(matches!(w.zero().inv(), Err(Error::Unit(_))));
    }

    #[test]
    fn inv_random_units_w4() {
        let w = w4(5);
        let g = w.gen();
        for k in 0..10u64 {
            let a = g.pow(k).add(&w.from_u64(2 * k + 1)).add(&w.one());
            if !a.is_unit() {
                continue;
            }
            let inv = a.inv().unwrap();
            assert!(a.mul(&inv).sub(&w.one()).is_zero());
        }
    }

    #[test]
    fn sigma_is_identity_on_prime_field() {
        let w = w2(5);
        for c in 0..8 {
            let a = w.from_u64(c);
            assert_eq!(a.sigma(), a);
        }
    }

    #[test]
    fn sigma_on_w_f4() {
        // generator is a Teichmüller cube root of unity; sigma(w) = w^2
        let w = w4(6);
        let om = w.gen();
        assert!(om.pow(3).sub(&w.one()).is_zero(), "omega^3 = 1");
        let s = om.sigma();
        assert_eq!(s, om.mul(&om), "sigma(omega) = omega^2");
        // sigma(omega) = omega^p mod p and is a root of f
        assert_eq!(
            s.residue(),
            om.residue().frobenius(),
            "sigma lifts x -> x^p"
        );
        // sigma^r = id
        assert_eq!(om.sigma_iter(2), om);
    }

    #[test]
    fn sigma_is_additive_and_multiplicative() {
        let w = CoeffParams::new(3, 2, 4).unwrap();
        let g = w.gen();
        let pairs = [
            (g.pow(2).add(&w.from_u64(5)), g.pow(5).add(&w.from_u64(2))),
            (g.clone(), g.pow(7)),
            (w.from_u64(13), g.pow(3).add(&g)),
        ];
        for (a, b) in pairs {
            assert_eq!(a.add(&b).sigma(), a.sigma().add(&b.sigma()));
            assert_eq!(a.mul(&b).sigma(), a.sigma().mul(&b.sigma()));
        }
    }

    #[test]
    fn sigma_power_is_identity() {
        for (p, r) in [(2u64, 3usize), (3, 2), (2, 6)] {
            let w = CoeffParams::new(p, r, 4).unwrap();
            let g = w.gen();
            let a = g.pow(5).add(&w.from_u64(3)).add(&g);
            assert_eq!(a.sigma_iter(r), a, "sigma^{r} = id over F_{p}^{r}");
        }
    }

    #[test]
    fn teichmuller_basics() {
        let w = w2(4);
        assert!(w.teichmuller(&ResidueElem::zero(&w)).is_zero());
        assert_eq!(w.teichmuller(&ResidueElem::one(&w)), w.one());
    }

    #[test]
    fn teichmuller_generator_is_exact() {
        // by the Teichmüller normalization of f, the generator lifts itself
        let w = w4(6);
        let g = w.gen();
        let t = w.teichmuller(&g.residue());
        assert_eq!(t, g);
        assert!(t.pow(3).sub(&w.one()).is_zero(), "t^3 = 1 mod 2^N");
    }

    #[test]
    fn teichmuller_is_multiplicative() {
        let w = CoeffParams::new(3, 2, 5).unwrap();
        let g = w.gen().residue();
        for i in 0..4u64 {
            for j in 0..4u64 {
                let a = g.pow(i + 1);
                let b = g.pow(j + 3);
                let lhs = w.teichmuller(&a.mul(&b));
                let rhs = w.teichmuller(&a).mul(&w.teichmuller(&b));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn residue_of_teichmuller_is_identity() {
        let w = CoeffParams::new(2, 3, 4).unwrap();
        let g = w.gen().residue();
        for i in 0..7u64 {
            let a = g.pow(i).add(&ResidueElem::one(&w));
            assert_eq!(w.teichmuller(&a).residue(), a);
        }
    }

    #[test]
    fn params_mismatch_detected() {
        let a = w2(4).one();
        let b = w2(5).one();
        assert!(matches!(a.checked_add(&b), Err(Error::Params(_))));
    }

    #[test]
    fn extension_embedding_is_a_ring_hom() {
        let base = w4(4);
        let (ext, img) = base.extension(3).unwrap();
        assert_eq!(ext.r(), 6);
        let g = base.gen();
        let a = g.pow(2).add(&base.from_u64(3));
        let b = g.add(&base.from_u64(7));
        let ea = base.embed(&a, &img);
        let eb = base.embed(&b, &img);
        assert_eq!(base.embed(&a.mul(&b), &img), ea.mul(&eb));
        assert_eq!(base.embed(&a.add(&b), &img), ea.add(&eb));
        // embedding respects sigma on the subfield: sigma^[k':k]... the
        // absolute Frobenius commutes with the embedding
        assert_eq!(base.embed(&a.sigma(), &img), ea.sigma());
    }

    #[test]
    fn prime_field_extension_embeds_constants() {
        let base = w2(4);
        let (ext, img) = base.extension(2).unwrap();
        assert_eq!(base.embed(&base.from_u64(5), &img), ext.from_u64(5));
    }

    #[test]
    fn val_p_and_div() {
        let w = w2(5);
        let a = w.from_u64(12);
        assert_eq!(a.val_p(), Some(2));
        assert_eq!(a.div_p_exact(2).unwrap(), w.from_u64(3));
        assert!(a.div_p_exact(3).is_err());
        assert_eq!(w.zero().val_p(), None);
    }
}
