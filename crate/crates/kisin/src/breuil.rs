//! The base-change functor 𝔐 ↦ ℳ = S ⊗_{φ,𝔖} 𝔐 to strongly divisible
//! S-modules.
//!
//! With ê_j := 1⊗e_j, the linearization 1⊗φ_𝔐: ℳ → S⊗_𝔖 𝔐 has matrix A_S
//! (the embedded Frobenius matrix), while φ_ℳ itself has matrix φ(A_S).
//! Fil¹ℳ = {x : A_S·x ∈ Fil¹S ⊗ 𝔐} is computed through the quotient
//! S/Fil¹S ≅ 𝒪_K: the reduction Ā acts on 𝒪_K^n and Fil¹ℳ is generated by
//! lifts of ker(Ā) together with Fil¹S·ℳ. φ₁ applies the divided Frobenius
//! entrywise to A_S·x.
//!
//! The monodromy operator is the unique N over N_S = -u d/du satisfying
//! Griffiths transversality N∘φ₁ = c₁^{-1}·φ₁∘(P·N); it is found by a fixed
//! point iteration on the φ₁-spanning set. Each round routes the correction
//! through P·N and φ₁, multiplying its u-valuation by p, and the identity
//! φ₁(P·x) = c₁·φ(x) makes the iteration division-free. The independent
//! residual check afterwards evaluates both sides of the Griffiths relation
//! literally, with the stored c₁ and c₁^{-1}.

use crate::error::{Error, Result};
use crate::oklin::{self, OKMat};
use crate::phimod::{right_inverse, ModuleMap, PhiModule, SMat};
use crate::sring::{
    c1, embed_fraks, eval_pi, fil1_test, phi1, phi1_unchecked, s_inv, OKElem, SElem, SParams,
};
use std::sync::Arc;

type SVec = Vec<SElem>;

// ---------------------------------------------------------------------------
// small helpers over S-vectors and S-matrices
// ---------------------------------------------------------------------------

fn svec_zero(sp: &Arc<SParams>, n: usize) -> SVec {
    (0..n).map(|_| SElem::zero(sp)).collect()
}

fn svec_add(a: &SVec, b: &SVec) -> SVec {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

fn svec_sub(a: &SVec, b: &SVec) -> SVec {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

fn svec_scale(a: &SVec, c: &SElem) -> SVec {
    a.iter().map(|x| x.mul(c)).collect()
}

fn svec_is_zero_mod_u(a: &[SElem], t: usize) -> bool {
    a.iter().all(|x| {
        x.coeffs()
            .iter()
            .take(t.min(x.coeffs().len()))
            .all(|c| c.is_zero_mod(x.eff_n()))
    })
}

fn smat_apply(a: &[SVec], x: &SVec) -> SVec {
    let sp = x[0].params().clone();
    let n = a.len();
    let mut out = svec_zero(&sp, n);
    for (i, row) in a.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if !e.is_zero() && !x[j].is_zero() {
                out[i] = out[i].add(&e.mul(&x[j]));
            }
        }
    }
    out
}

/// Inverse of a square S-matrix with unit pivots (invertible mod (p, u-part)).
fn smat_inv(sp: &Arc<SParams>, a: &[SVec]) -> Result<Vec<SVec>> {
    let n = a.len();
    let mut work: Vec<SVec> = a.to_vec();
    let mut inv: Vec<SVec> = (0..n)
        .map(|i| {
            let mut row = svec_zero(sp, n);
            row[i] = SElem::one(sp);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .find(|&i| work[i][col].coeff(0).is_unit())
            .ok_or_else(|| Error::Unit("S-matrix has no unit pivot".into()))?;
        work.swap(col, piv);
        inv.swap(col, piv);
        let pinv = s_inv(&work[col][col])?;
        for j in 0..n {
            work[col][j] = work[col][j].mul(&pinv);
            inv[col][j] = inv[col][j].mul(&pinv);
        }
        for i in 0..n {
            if i == col || work[i][col].is_zero() {
                continue;
            }
            let f = work[i][col].clone();
            for j in 0..n {
                work[i][j] = work[i][j].sub(&f.mul(&work[col][j]));
                inv[i][j] = inv[i][j].sub(&f.mul(&inv[col][j]));
            }
        }
    }
    Ok(inv)
}

fn lift_ok_to_s(sp: &Arc<SParams>, x: &OKElem) -> SElem {
    // coordinates sit in degrees < e, where the divided weights are 1
    let mut out = SElem::zero(sp);
    for (m, w) in x.coords().iter().enumerate() {
        out = out.add(&SElem::basis(sp, m).scale(w));
    }
    out
}

// ---------------------------------------------------------------------------
// BreuilModule
// ---------------------------------------------------------------------------

/// S ⊗_{φ,𝔖} 𝔐 with its Fil¹ generators and φ₁ data.
pub struct BreuilModule {
    base: PhiModule,
    sp: Arc<SParams>,
    /// matrix of 1⊗φ_𝔐 (embedded entries), rows of SElem.
    a_s: Vec<SVec>,
    /// φ(A_S): the matrix of φ_ℳ on the ê basis.
    a_s_phi: Vec<SVec>,
    /// lifted kernel basis of Ā over 𝒪_K: generators of Fil¹ℳ over Fil¹S·ℳ.
    pub fil1_gens: Vec<SVec>,
    /// φ₁ of each generator.
    pub phi1_images: Vec<SVec>,
    /// π-valuations of the 𝒪_K elimination pivots (echelon profile of Ā).
    pub fil1_pivot_vals: Vec<usize>,
    /// the unit c₁ = φ(P)/p.
    pub c_one: SElem,
}

impl BreuilModule {
    pub fn base(&self) -> &PhiModule {
        &self.base
    }

    pub fn sp(&self) -> &Arc<SParams> {
        &self.sp
    }

    pub fn rank(&self) -> usize {
        self.base.rank()
    }

    pub fn a_s(&self) -> &[SVec] {
        &self.a_s
    }

    /// Minimal effective p-precision across the stored Fil¹/φ₁ data.
    pub fn eff_n(&self) -> u32 {
        let mut eff = self.c_one.eff_n();
        for g in self.fil1_gens.iter().chain(self.phi1_images.iter()) {
            for x in g {
                eff = eff.min(x.eff_n());
            }
        }
        eff
    }
}

/// Builds the Breuil module of a validated height-≤1 φ-module.
pub fn build_breuil(module: &PhiModule, sp: &Arc<SParams>) -> Result<BreuilModule> {
    if *module.pe() != *sp.pe() {
        return Err(Error::Params(
            "module and S-context use different Eisenstein data".into(),
        ));
    }
    if module.m() != sp.m() {
        return Err(Error::Params("u-precision mismatch between 𝔖 and S".into()));
    }
    let base = if module.verschiebung().is_some() {
        module.clone()
    } else {
        module.validated()?
    };
    if base.h() > 1 {
        return Err(Error::Params("Breuil functor requires height <= 1".into()));
    }
    let n = base.rank();
    let a_s: Vec<SVec> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| embed_fraks(sp, base.matrix().get(i, j)))
                .collect()
        })
        .collect();
    let a_s_phi: Vec<SVec> = a_s
        .iter()
        .map(|row| row.iter().map(|x| x.phi()).collect())
        .collect();
    // Ā over 𝒪_K and its kernel
    let (kernel, pivot_vals) = if n > 0 {
        let mut entries = Vec::with_capacity(n * n);
        for row in &a_s {
            for x in row {
                entries.push(eval_pi(x)?);
            }
        }
        let kd = oklin::kernel(sp, &OKMat::new(n, n, entries))?;
        (kd.gens, kd.pivot_vals)
    } else {
        (Vec::new(), Vec::new())
    };
    let fil1_gens: Vec<SVec> = kernel
        .iter()
        .map(|gen| gen.iter().map(|x| lift_ok_to_s(sp, x)).collect())
        .collect();
    // φ₁ of each generator: entrywise divided Frobenius of A_S·g
    let mut phi1_images = Vec::with_capacity(fil1_gens.len());
    for g in &fil1_gens {
        let y = smat_apply(&a_s, g);
        let mut img = Vec::with_capacity(n);
        for yi in &y {
            if !fil1_test(yi)? {
                return Err(Error::Precision(
                    "kernel lift left Fil¹S at the working precision".into(),
                ));
            }
            img.push(phi1(yi)?);
        }
        phi1_images.push(img);
    }
    let c_one = c1(sp)?;
    Ok(BreuilModule {
        base,
        sp: sp.clone(),
        a_s,
        a_s_phi,
        fil1_gens,
        phi1_images,
        fil1_pivot_vals: pivot_vals,
        c_one,
    })
}

/// Builds the Breuil data without the height gate (for report-style negative
/// tests of strong divisibility on corrupted inputs).
pub fn build_breuil_unchecked(module: &PhiModule, sp: &Arc<SParams>) -> Result<BreuilModule> {
    let n = module.rank();
    let a_s: Vec<SVec> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| embed_fraks(sp, module.matrix().get(i, j)))
                .collect()
        })
        .collect();
    let a_s_phi: Vec<SVec> = a_s
        .iter()
        .map(|row| row.iter().map(|x| x.phi()).collect())
        .collect();
    let (kernel, pivot_vals) = if n > 0 {
        let mut entries = Vec::with_capacity(n * n);
        for row in &a_s {
            for x in row {
                entries.push(eval_pi(x)?);
            }
        }
        let kd = oklin::kernel(sp, &OKMat::new(n, n, entries))?;
        (kd.gens, kd.pivot_vals)
    } else {
        (Vec::new(), Vec::new())
    };
    let fil1_gens: Vec<SVec> = kernel
        .iter()
        .map(|gen| gen.iter().map(|x| lift_ok_to_s(sp, x)).collect())
        .collect();
    let mut phi1_images = Vec::with_capacity(fil1_gens.len());
    for g in &fil1_gens {
        let y = smat_apply(&a_s, g);
        let mut img = Vec::with_capacity(n);
        for yi in &y {
            img.push(phi1(yi)?);
        }
        phi1_images.push(img);
    }
    Ok(BreuilModule {
        base: module.clone(),
        sp: sp.clone(),
        a_s,
        a_s_phi,
        fil1_gens,
        phi1_images,
        fil1_pivot_vals: pivot_vals,
        c_one: c1(sp)?,
    })
}

// ---------------------------------------------------------------------------
// strong divisibility
// ---------------------------------------------------------------------------

/// Report of the strong-divisibility checks: φ(Fil¹ℳ) ⊂ pℳ on all stored
/// generators (and on P·ê_j), and surjectivity of the φ₁-images together
/// with the c₁·φ(A_S) columns mod (p, u-part).
#[derive(Clone, Debug)]
pub struct DivisibilityReport {
    pub divisible: bool,
    pub spanning: bool,
    pub failures: Vec<String>,
}

impl DivisibilityReport {
    pub fn pass(&self) -> bool {
        self.divisible && self.spanning
    }
}

pub fn check_strong_divisibility(b: &BreuilModule) -> DivisibilityReport {
    let sp = &b.sp;
    let n = b.rank();
    let mut failures = Vec::new();
    let mut divisible = true;
    // φ(g) ∈ p·ℳ for each Fil¹ generator: φ_ℳ(Σ g_j ê_j) = φ(A_S)·φ_S(g)
    for (k, g) in b.fil1_gens.iter().enumerate() {
        let gphi: SVec = g.iter().map(|x| x.phi()).collect();
        let img = smat_apply(&b.a_s_phi, &gphi);
        for (i, x) in img.iter().enumerate() {
            let ok = x
                .coeffs()
                .iter()
                .all(|c| c.is_zero() || c.val_p().unwrap() >= 1);
            if !ok {
                divisible = false;
                failures.push(format!(
                    "φ(fil1 gen {k}) has a p-indivisible coordinate at ê_{i}"
                ));
            }
        }
        // p·φ₁(g) = φ(g)
        let p = sp.coeff().p();
        let scaled: SVec = b.phi1_images[k]
            .iter()
            .map(|x| x.scale(&sp.coeff().from_u64(p)))
            .collect();
        let diff = svec_sub(&scaled, &img);
        if !diff.iter().all(|x| x.is_zero_at_eff()) {
            divisible = false;
            failures.push(format!("p·φ₁ ≠ φ on fil1 gen {k} at eff precision"));
        }
    }
    // φ(P·ê_j) = p·c₁·φ(A_S)_j is divisible by construction; verify anyway
    let pimg = embed_fraks(sp, &sp.pe().as_series(sp.m()));
    for j in 0..n {
        let mut col = svec_zero(sp, n);
        col[j] = pimg.clone();
        let img = smat_apply(&b.a_s_phi, &col.iter().map(|x| x.phi()).collect::<Vec<_>>());
        for (i, x) in img.iter().enumerate() {
            let ok = x
                .coeffs()
                .iter()
                .all(|c| c.is_zero() || c.val_p().unwrap() >= 1);
            if !ok {
                divisible = false;
                failures.push(format!("φ(P·ê_{j}) not divisible by p at ê_{i}"));
            }
        }
    }
    // spanning: [φ₁(g_k) | c₁·φ(A_S)_j] surjective mod (p, u-support)
    let spanning = spanning_rank_full(b);
    if !spanning {
        failures.push("φ₁-images and c₁·φ(A_S) columns do not span ℳ mod (p,u)".into());
    }
    DivisibilityReport {
        divisible,
        spanning,
        failures,
    }
}

/// The spanning columns: φ₁ of the Fil¹ generators, then φ₁(P·ê_j) =
/// c₁·φ(A_S) column j.
fn spanning_columns(b: &BreuilModule) -> Vec<SVec> {
    let n = b.rank();
    let mut cols: Vec<SVec> = b.phi1_images.clone();
    for j in 0..n {
        let col: SVec = (0..n).map(|i| b.c_one.mul(&b.a_s_phi[i][j])).collect();
        cols.push(col);
    }
    cols
}

fn residue_card(params: &Arc<crate::coeffs::CoeffParams>) -> u64 {
    let mut q = 1u64;
    for _ in 0..params.r() {
        q *= params.p();
    }
    q
}

fn spanning_rank_full(b: &BreuilModule) -> bool {
    let n = b.rank();
    if n == 0 {
        return true;
    }
    let cols = spanning_columns(b);
    let params = b.sp.coeff().clone();
    let card = residue_card(&params);
    // reduce mod (p, u-support): residue of the constant divided coordinate
    let mut mat: Vec<Vec<crate::coeffs::ResidueElem>> = (0..n)
        .map(|i| cols.iter().map(|c| c[i].coeff(0).residue()).collect())
        .collect();
    let cols_n = mat[0].len();
    let mut rank = 0usize;
    let mut prow = 0usize;
    for col in 0..cols_n {
        let Some(pr) = (prow..n).find(|&i| !mat[i][col].is_zero()) else {
            continue;
        };
        mat.swap(prow, pr);
        let inv = mat[prow][col].pow(card - 2);
        let norm: Vec<_> = (0..cols_n).map(|j| mat[prow][j].mul(&inv)).collect();
        mat[prow] = norm;
        for i in 0..n {
            if i != prow && !mat[i][col].is_zero() {
                let f = mat[i][col].clone();
                for j in 0..cols_n {
                    mat[i][j] = mat[i][j].sub(&f.mul(&mat[prow][j]));
                }
            }
        }
        prow += 1;
        rank += 1;
        if prow == n {
            break;
        }
    }
    rank == n
}

// ---------------------------------------------------------------------------
// the monodromy operator
// ---------------------------------------------------------------------------

/// Result of the monodromy fixed point: values N(ê_j) as S-vectors, the
/// iteration count, the verified Griffiths residual order, and the
/// I₀-support flag.
#[derive(Clone, Debug)]
pub struct Monodromy {
    pub n_values: Vec<SVec>,
    pub iterations: usize,
    /// every Griffiths residual coordinate vanishes mod u^{residual_order}
    pub residual_order: usize,
    pub in_i0: bool,
}

/// N(x) for an S-vector x, by the Leibniz rule from the basis values.
fn n_apply(nu: &[SVec], x: &SVec) -> SVec {
    let n = x.len();
    let mut out: SVec = x.iter().map(|c| c.n_op()).collect();
    for j in 0..n {
        if x[j].is_zero() {
            continue;
        }
        for i in 0..n {
            if !nu[j][i].is_zero() {
                out[i] = out[i].add(&x[j].mul(&nu[j][i]));
            }
        }
    }
    out
}

/// Computes N on the standard generators by the Griffiths fixed point,
/// stopping when two successive iterates agree mod u^{m_n}. An optional seed
/// (which must be I₀-supported) exercises uniqueness.
pub fn compute_n(b: &BreuilModule, m_n: usize, seed: Option<Vec<SVec>>) -> Result<Monodromy> {
    let sp = &b.sp;
    let n = b.rank();
    if m_n > sp.m() {
        return Err(Error::Params(format!(
            "target u-precision {m_n} exceeds the container {}",
            sp.m()
        )));
    }
    if n == 0 {
        return Ok(Monodromy {
            n_values: Vec::new(),
            iterations: 0,
            residual_order: m_n,
            in_i0: true,
        });
    }
    let report = check_strong_divisibility(b);
    if !report.pass() {
        return Err(Error::Params(
            "monodromy requires a strongly divisible module".into(),
        ));
    }
    // spanning sources g_s (Fil¹ gens, then P·ê_j) and their φ₁-columns w_s
    let pimg = embed_fraks(sp, &sp.pe().as_series(sp.m()));
    let mut sources: Vec<SVec> = b.fil1_gens.clone();
    for j in 0..n {
        let mut col = svec_zero(sp, n);
        col[j] = pimg.clone();
        sources.push(col);
    }
    let w_cols = spanning_columns(b);
    // solve W·Λ = Id on a unit minor: greedy independent columns mod (p,u)
    let sel = select_unit_columns(b, &w_cols)?;
    let w_sel: Vec<SVec> = (0..n)
        .map(|i| sel.iter().map(|&s| w_cols[s][i].clone()).collect())
        .collect();
    let w_sel_inv = smat_inv(sp, &w_sel)?;
    let mut lambda: Vec<SVec> = (0..sources.len()).map(|_| svec_zero(sp, n)).collect();
    for (t, &s) in sel.iter().enumerate() {
        for j in 0..n {
            lambda[s][j] = w_sel_inv[t][j].clone();
        }
    }
    let budget = {
        let p = sp.coeff().p() as usize;
        let mut k = 0usize;
        let mut reach = 1usize;
        while reach < m_n {
            reach = reach.saturating_mul(p);
            k += 1;
        }
        k + 2
    };
    let mut nu: Vec<SVec> = match seed {
        Some(s) => {
            for v in &s {
                for x in v {
                    if !x.is_in_i0() {
                        return Err(Error::Params("seed must be I₀-supported".into()));
                    }
                }
            }
            s
        }
        None => (0..n).map(|_| svec_zero(sp, n)).collect(),
    };
    let mut iterations = 0usize;
    loop {
        iterations += 1;
        if iterations > budget {
            return Err(Error::NonConvergence {
                budget,
                detail: "monodromy iterates did not stabilize; raise the u-precision".into(),
            });
        }
        // ρ_s = c₁^{-1}·φ₁(P·N(g_s)); by φ₁(P·x) = c₁·φ(x) this is the
        // division-free expression φ(A_S·N(g_s)) entrywise
        let mut rho: Vec<SVec> = Vec::with_capacity(sources.len());
        for g in &sources {
            let ng = n_apply(&nu, g);
            let y = smat_apply(&b.a_s, &ng);
            rho.push(y.iter().map(|x| x.phi()).collect());
        }
        // ν'_j = Σ_s N_S(Λ_{s,j})·w_s + Λ_{s,j}·ρ_s
        let mut next: Vec<SVec> = (0..n).map(|_| svec_zero(sp, n)).collect();
        for (s, w) in w_cols.iter().enumerate() {
            for j in 0..n {
                if lambda[s][j].is_zero() {
                    continue;
                }
                let t1 = svec_scale(w, &lambda[s][j].n_op());
                let t2 = svec_scale(&rho[s], &lambda[s][j]);
                next[j] = svec_add(&next[j], &svec_add(&t1, &t2));
            }
        }
        let stable = nu
            .iter()
            .zip(&next)
            .all(|(a, b)| svec_is_zero_mod_u(&svec_sub(a, b), m_n));
        nu = next;
        if stable {
            break;
        }
    }
    // independent residual: N(φ₁(g)) - c₁^{-1}·φ₁(P·N(g)) ≡ 0 mod u^{m_n},
    // right side computed literally through the stored c₁ and c₁^{-1}
    let c1inv = s_inv(&b.c_one)?;
    let mut residual_order = m_n;
    for (k, g) in b.fil1_gens.iter().enumerate() {
        let lhs = n_apply(&nu, &b.phi1_images[k]);
        let ng = n_apply(&nu, g);
        let png: SVec = ng.iter().map(|x| x.mul(&pimg)).collect();
        let y = smat_apply(&b.a_s, &png);
        let mut rhs = Vec::with_capacity(n);
        for yi in &y {
            // y_i ∈ Fil¹S structurally: P·N(g) ∈ P·ℳ
            rhs.push(c1inv.mul(&phi1_unchecked(yi)?));
        }
        let diff = svec_sub(&lhs, &rhs);
        for x in &diff {
            if let Some(ord) = x.support_order() {
                residual_order = residual_order.min(ord);
            }
        }
    }
    let in_i0 = nu.iter().all(|v| v.iter().all(|x| x.is_in_i0()));
    Ok(Monodromy {
        n_values: nu,
        iterations,
        residual_order,
        in_i0,
    })
}

fn select_unit_columns(b: &BreuilModule, cols: &[SVec]) -> Result<Vec<usize>> {
    let n = b.rank();
    let params = b.sp.coeff().clone();
    let card = residue_card(&params);
    let mut chosen: Vec<usize> = Vec::new();
    let mut echelon: Vec<(usize, Vec<crate::coeffs::ResidueElem>)> = Vec::new();
    for (s, col) in cols.iter().enumerate() {
        let mut v: Vec<crate::coeffs::ResidueElem> =
            (0..n).map(|i| col[i].coeff(0).residue()).collect();
        for (lead, red) in &echelon {
            if !v[*lead].is_zero() {
                let f = v[*lead].clone();
                for i in 0..n {
                    v[i] = v[i].sub(&f.mul(&red[i]));
                }
            }
        }
        if let Some(lead) = v.iter().position(|x| !x.is_zero()) {
            let inv = v[lead].pow(card - 2);
            let red: Vec<_> = v.iter().map(|x| x.mul(&inv)).collect();
            echelon.push((lead, red));
            chosen.push(s);
            if chosen.len() == n {
                return Ok(chosen);
            }
        }
    }
    Err(Error::Precision(
        "φ₁-spanning columns do not reach full rank mod (p,u)".into(),
    ))
}

// ---------------------------------------------------------------------------
// exactness transport
// ---------------------------------------------------------------------------

/// Report of transporting a short exact sequence 0 → M' → M → M'' → 0 through
/// the functor: φ-equivariance of both maps, exactness-with-saturation at the
/// 𝔖 level (completed basis matrix invertible), exactness at the S level, and
/// surjectivity of Fil¹ℳ → Fil¹ℳ''.
#[derive(Clone, Debug)]
pub struct TransportReport {
    pub equivariant: bool,
    pub composite_zero: bool,
    pub exact_saturated: bool,
    pub s_level_exact: bool,
    pub fil1_surjective: bool,
    pub detail: Vec<String>,
}

impl TransportReport {
    pub fn pass(&self) -> bool {
        self.equivariant
            && self.composite_zero
            && self.exact_saturated
            && self.s_level_exact
            && self.fil1_surjective
    }
}

pub fn transport_exactness(
    iota: &ModuleMap,
    proj: &ModuleMap,
    sp: &Arc<SParams>,
) -> Result<TransportReport> {
    let mut detail = Vec::new();
    let m_mid = &iota.target;
    let n = m_mid.rank();
    let n1 = iota.source.rank();
    let n2 = proj.target.rank();
    if proj.source.rank() != n || n1 + n2 != n {
        return Err(Error::Params("sequence ranks are inconsistent".into()));
    }
    let equivariant = iota.is_phi_equivariant() && proj.is_phi_equivariant();
    if !equivariant {
        detail.push("a map fails φ-equivariance".into());
    }
    let composite_zero = proj.matrix.mul(&iota.matrix).is_zero();
    if !composite_zero {
        detail.push("π∘ι ≠ 0".into());
    }
    // completed basis: [ι | R] with π·R = Id; R from a unit minor of π
    let params = m_mid.params();
    let m = m_mid.m();
    let (exact_saturated, completed) = match right_inverse(&proj.matrix) {
        Some(r) => {
            let mut t = SMat::zero(&params, m, n, n);
            for i in 0..n {
                for j in 0..n1 {
                    t.set(i, j, iota.matrix.get(i, j).clone());
                }
                for j in 0..n2 {
                    t.set(i, n1 + j, r.get(i, j).clone());
                }
            }
            let ok = t.det().is_unit();
            if !ok {
                detail.push(
                    "completed matrix [ι | section] is not invertible over 𝔖: the image \
                     is not saturated or the sequence is not exact"
                        .into(),
                );
            }
            (ok, Some(t))
        }
        None => {
            detail.push("π has no unit minor: not surjective over 𝔖".into());
            (false, None)
        }
    };
    // S-level: the embedded completed matrix stays invertible
    let s_level_exact = exact_saturated
        && completed
            .as_ref()
            .map(|t| embed_fraks(sp, &t.det()).coeff(0).is_unit())
            .unwrap_or(false);
    if exact_saturated && !s_level_exact {
        detail.push("tensored sequence not exact at precision".into());
    }
    // Fil¹ surjectivity: every Fil¹ generator of ℳ'' lifts into Fil¹ℳ
    let mut fil1_surjective = equivariant && composite_zero && exact_saturated;
    if fil1_surjective {
        let b_mid = build_breuil(m_mid, sp)?;
        let b_quot = build_breuil(&proj.target, sp)?;
        let r = right_inverse(&proj.matrix).unwrap();
        let mut a_entries = Vec::with_capacity(n * n);
        for row in b_mid.a_s() {
            for x in row {
                a_entries.push(eval_pi(x)?);
            }
        }
        let a_ok = OKMat::new(n, n, a_entries);
        let mut ai_entries = Vec::with_capacity(n * n1);
        for i in 0..n {
            for j in 0..n1 {
                let mut acc = OKElem::zero(sp);
                for k in 0..n {
                    let iota_ok = eval_pi(&embed_fraks(sp, iota.matrix.get(k, j)))?;
                    acc = acc.add(&a_ok.get(i, k).mul(&iota_ok));
                }
                ai_entries.push(acc);
            }
        }
        let a_iota = OKMat::new(n, n1, ai_entries);
        for (gi, ghat) in b_quot.fil1_gens.iter().enumerate() {
            // lift x₀ = R·ĝ into ℳ
            let mut x0: SVec = svec_zero(sp, n);
            for i in 0..n {
                for j in 0..n2 {
                    let rij = embed_fraks(sp, r.get(i, j));
                    x0[i] = x0[i].add(&rij.mul(&ghat[j]));
                }
            }
            // defect Ā·x̄₀ must be absorbed by the ι-image: solve Ā·ι̅·z = Ā·x̄₀
            let x0_ok: Vec<OKElem> = x0.iter().map(eval_pi).collect::<Result<Vec<_>>>()?;
            let mut defect = Vec::with_capacity(n);
            for i in 0..n {
                let mut acc = OKElem::zero(sp);
                for k in 0..n {
                    acc = acc.add(&a_ok.get(i, k).mul(&x0_ok[k]));
                }
                defect.push(acc);
            }
            if defect.iter().all(|x| x.is_zero_at_eff()) {
                continue;
            }
            if n1 == 0 || oklin::solve(sp, &a_iota, &defect).is_none() {
                fil1_surjective = false;
                detail.push(format!(
                    "Fil¹ generator {gi} of the quotient does not lift to Fil¹ℳ"
                ));
            }
        }
    }
    Ok(TransportReport {
        equivariant,
        composite_zero,
        exact_saturated,
        s_level_exact,
        fil1_surjective,
        detail,
    })
}
