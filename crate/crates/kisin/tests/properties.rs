//! Property tests for the ring layers: the structural invariants that every
//! randomized input must satisfy.

use kisin::coeffs::CoeffParams;
use kisin::series::{p_unit_factorization, weierstrass_divide, EisensteinP, SeriesS};
use kisin::sring::{embed_fraks, eval_pi, SElem, SParams};
use proptest::prelude::*;
use std::sync::Arc;

const M: usize = 20;

fn w2() -> Arc<CoeffParams> {
    CoeffParams::new(2, 1, 5).unwrap()
}

fn series_strategy() -> impl Strategy<Value = Vec<u64>> {
    proptest::collection::vec(0u64..32, M)
}

fn mk_series(w: &Arc<CoeffParams>, coeffs: &[u64]) -> SeriesS {
    let mut s = SeriesS::zero(w, M);
    for (i, &c) in coeffs.iter().enumerate() {
        s.set_coeff(i, w.from_u64(c));
    }
    s
}

proptest! {
    #[test]
    fn phi_is_multiplicative(a in series_strategy(), b in series_strategy()) {
        let w = w2();
        let (f, g) = (mk_series(&w, &a), mk_series(&w, &b));
        prop_assert_eq!(f.mul(&g).phi(), f.phi().mul(&g.phi()));
    }

    #[test]
    fn weierstrass_roundtrip(a in series_strategy(), e in 1usize..4, h in 1usize..3) {
        let w = w2();
        let pe = EisensteinP::monic_uniform(&w, e).unwrap();
        let f = mk_series(&w, &a);
        if M > h * e {
            let div = weierstrass_divide(&f, &pe, h).unwrap();
            let mut ph = SeriesS::one(&w, M);
            for _ in 0..h {
                ph = ph.mul(&pe.as_series(M));
            }
            prop_assert_eq!(div.q.mul(&ph).add(&div.r), f);
            // remainder degree bound
            for i in h * e..M {
                prop_assert!(div.r.coeff(i).is_zero());
            }
        }
    }

    #[test]
    fn unit_inverse_roundtrip(a in series_strategy()) {
        let w = w2();
        let mut f = mk_series(&w, &a);
        if !f.is_unit() {
            f.set_coeff(0, w.from_u64(2 * a[0] + 1));
        }
        let g = f.inv().unwrap();
        prop_assert_eq!(f.mul(&g), SeriesS::one(&w, M));
    }

    #[test]
    fn p_valuation_is_additive(a in series_strategy(), b in series_strategy(), e in 1usize..3) {
        // primality of P at the working precision: valuations add whenever
        // the cofactors' non-divisibility is decisive enough that it cannot
        // be washed out mod p^N in the product
        let w = w2();
        let pe = EisensteinP::monic_uniform(&w, e).unwrap();
        let (f, g) = (mk_series(&w, &a), mk_series(&w, &b));
        let sf = p_unit_factorization(&f, &pe).ok();
        let sg = p_unit_factorization(&g, &pe).ok();
        if let (Some(sf), Some(sg)) = (sf, sg) {
            // π-adic size of the remainder: min over coordinates of
            // e·v_p + degree; remainders multiply in O_K = W[u]/(P), so the
            // product's non-divisibility is decided iff the sum stays below
            // the zero threshold e·N
            let pi_val = |h: &SeriesS| -> Option<u32> {
                let div = weierstrass_divide(h, &pe, 1).ok()?;
                (0..e)
                    .filter_map(|i| div.r.val_p_of_coeff(i).map(|v| e as u32 * v + i as u32))
                    .min()
            };
            let (va, vb) = (pi_val(&sf.witness), pi_val(&sg.witness));
            if let (Some(va), Some(vb)) = (va, vb) {
                if va + vb < e as u32 * w.n() && (sf.s + sg.s + 1) * e < M / 2 {
                    if let Ok(sp) = p_unit_factorization(&f.mul(&g), &pe) {
                        prop_assert_eq!(sp.s, sf.s + sg.s);
                    }
                }
            }
        }
    }

    #[test]
    fn embed_is_ring_hom_and_eval_pi_composes(a in series_strategy(), b in series_strategy(), e in 1usize..3) {
        let w = w2();
        let pe = EisensteinP::monic_uniform(&w, e).unwrap();
        let sp = SParams::new(pe, M).unwrap();
        let (f, g) = (mk_series(&w, &a), mk_series(&w, &b));
        let (ef, eg) = (embed_fraks(&sp, &f), embed_fraks(&sp, &g));
        prop_assert_eq!(&ef.mul(&eg), &embed_fraks(&sp, &f.mul(&g)));
        prop_assert_eq!(&ef.add(&eg), &embed_fraks(&sp, &f.add(&g)));
        // evaluation at π is a ring homomorphism on embedded elements
        let lhs = eval_pi(&ef.mul(&eg)).unwrap();
        let rhs = eval_pi(&ef).unwrap().mul(&eval_pi(&eg).unwrap());
        prop_assert!(lhs.sub(&rhs).is_zero_at_eff());
    }

    #[test]
    fn divided_weights_match_plain_multiplication(i in 0usize..8, j in 0usize..8, e in 1usize..3) {
        // u^i·u^j through the divided basis equals the embedded product
        let w = w2();
        let pe = EisensteinP::monic_uniform(&w, e).unwrap();
        let sp = SParams::new(pe, M).unwrap();
        if i + j < M {
            let ui = SeriesS::monomial(w.one(), i, M);
            let uj = SeriesS::monomial(w.one(), j, M);
            let lhs = embed_fraks(&sp, &ui).mul(&embed_fraks(&sp, &uj));
            let rhs = embed_fraks(&sp, &ui.mul(&uj));
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn n_operator_is_a_derivation(a in series_strategy(), b in series_strategy()) {
        let w = w2();
        let pe = EisensteinP::monic_uniform(&w, 2).unwrap();
        let sp = SParams::new(pe, M).unwrap();
        let (x, y) = (
            embed_fraks(&sp, &mk_series(&w, &a)),
            embed_fraks(&sp, &mk_series(&w, &b)),
        );
        // N(xy) = N(x)y + xN(y)
        let lhs = x.mul(&y).n_op();
        let rhs = x.n_op().mul(&y).add(&x.mul(&y.n_op()));
        prop_assert_eq!(lhs, rhs);
        let _ = SElem::zero(&sp);
    }
}
