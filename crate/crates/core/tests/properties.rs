//! Property-based checks of the algebraic invariants.

use proptest::prelude::*;

use permpoly_core::agw::random_valid_diagram;
use permpoly_core::families::decompose;
use permpoly_core::field::{FieldCtx, FieldElem};
use permpoly_core::poly::{monomial_is_permutation, poly_is_permutation, Poly};
use permpoly_core::rng::SplitMix64;

fn small_field() -> impl Strategy<Value = FieldCtx> {
    prop_oneof![
        Just((2u64, 1u32)),
        Just((3, 1)),
        Just((5, 1)),
        Just((7, 1)),
        Just((2, 2)),
        Just((3, 2)),
        Just((2, 3)),
        Just((13, 1)),
    ]
    .prop_map(|(p, m)| FieldCtx::new(p, m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn field_axioms((ctx, codes) in small_field().prop_flat_map(|ctx| {
        let q_sq = ctx.q_sq();
        (Just(ctx), prop::collection::vec(0..q_sq, 3))
    })) {
        let x = ctx.elem_from_code(codes[0]).unwrap();
        let y = ctx.elem_from_code(codes[1]).unwrap();
        let z = ctx.elem_from_code(codes[2]).unwrap();
        // commutativity and associativity
        prop_assert_eq!(ctx.add(x, y), ctx.add(y, x));
        prop_assert_eq!(ctx.mul(x, y), ctx.mul(y, x));
        prop_assert_eq!(ctx.add(ctx.add(x, y), z), ctx.add(x, ctx.add(y, z)));
        prop_assert_eq!(ctx.mul(ctx.mul(x, y), z), ctx.mul(x, ctx.mul(y, z)));
        // distributivity
        prop_assert_eq!(
            ctx.mul(x, ctx.add(y, z)),
            ctx.add(ctx.mul(x, y), ctx.mul(x, z))
        );
        // subtraction and division invert
        prop_assert_eq!(ctx.sub(ctx.add(x, y), y), x);
        if !y.is_zero() {
            prop_assert_eq!(ctx.div(ctx.mul(x, y), y).unwrap(), x);
        }
    }

    #[test]
    fn pow_is_group_exponentiation((ctx, code, e1, e2) in small_field().prop_flat_map(|ctx| {
        let q_sq = ctx.q_sq();
        (Just(ctx), 1..q_sq, 0u64..1000, 0u64..1000)
    })) {
        let x = ctx.elem_from_code(code).unwrap();
        prop_assert_eq!(
            ctx.pow(x, e1 + e2),
            ctx.mul(ctx.pow(x, e1), ctx.pow(x, e2))
        );
        prop_assert_eq!(ctx.pow(ctx.pow(x, e1), e2), ctx.pow(x, e1 * e2));
    }

    #[test]
    fn frobenius_is_field_automorphism((ctx, codes) in small_field().prop_flat_map(|ctx| {
        let q_sq = ctx.q_sq();
        (Just(ctx), prop::collection::vec(0..q_sq, 2))
    })) {
        let x = ctx.elem_from_code(codes[0]).unwrap();
        let y = ctx.elem_from_code(codes[1]).unwrap();
        prop_assert_eq!(ctx.frobenius(ctx.frobenius(x)), x);
        prop_assert_eq!(
            ctx.frobenius(ctx.add(x, y)),
            ctx.add(ctx.frobenius(x), ctx.frobenius(y))
        );
        prop_assert_eq!(
            ctx.frobenius(ctx.mul(x, y)),
            ctx.mul(ctx.frobenius(x), ctx.frobenius(y))
        );
        prop_assert!(ctx.in_subfield(ctx.norm(x)));
        prop_assert!(ctx.in_subfield(ctx.trace(x)));
    }

    #[test]
    fn zech_addition_matches_vectors((ctx, codes) in small_field().prop_flat_map(|ctx| {
        let q_sq = ctx.q_sq();
        (Just(ctx), prop::collection::vec(0..q_sq, 2))
    })) {
        let x = ctx.elem_from_code(codes[0]).unwrap();
        let y = ctx.elem_from_code(codes[1]).unwrap();
        prop_assert_eq!(ctx.add(x, y), ctx.add_coeffwise(x, y));
    }

    #[test]
    fn reduce_mod_preserves_the_function((ctx, pairs) in small_field().prop_flat_map(|ctx| {
        let q_sq = ctx.q_sq();
        (Just(ctx), prop::collection::vec((0u64..512, 0..q_sq), 0..8))
    })) {
        let terms: Vec<(u64, FieldElem)> = pairs
            .iter()
            .map(|&(e, c)| (e, ctx.elem_from_code(c).unwrap()))
            .collect();
        let p = Poly::from_pairs(&ctx, &terms);
        let reduced = p.reduce_mod(&ctx);
        if let Some(d) = reduced.degree() {
            prop_assert!(d < ctx.q_sq());
        }
        prop_assert_eq!(reduced.reduce_mod(&ctx), reduced.clone());
        for x in ctx.elements() {
            prop_assert_eq!(p.eval(&ctx, x), reduced.eval(&ctx, x));
        }
    }

    #[test]
    fn poly_text_roundtrip((ctx, pairs) in small_field().prop_flat_map(|ctx| {
        let q_sq = ctx.q_sq();
        (Just(ctx), prop::collection::vec((0u64..64, 0..q_sq), 0..6))
    })) {
        let terms: Vec<(u64, FieldElem)> = pairs
            .iter()
            .map(|&(e, c)| (e, ctx.elem_from_code(c).unwrap()))
            .collect();
        let p = Poly::from_pairs(&ctx, &terms);
        let text = p.format(&ctx);
        prop_assert_eq!(Poly::parse(&ctx, &text).unwrap(), p);
    }

    #[test]
    fn monomial_permutation_criterion((ctx, k) in small_field().prop_flat_map(|ctx| {
        let bound = ctx.q_sq() * 2;
        (Just(ctx), 1..bound)
    })) {
        prop_assert_eq!(
            poly_is_permutation(&ctx, &Poly::monomial(k, FieldElem::ONE)),
            monomial_is_permutation(&ctx, k)
        );
    }

    #[test]
    fn decompose_reconstructs((ctx, a_log, i, e_pick) in small_field().prop_flat_map(|ctx| {
        let ord = ctx.order();
        let q = ctx.q();
        (Just(ctx), 0..ord, 0..=q, 0..q)
    })) {
        let q = ctx.q();
        let a = ctx.xi_pow(a_log);
        let b = ctx.mul(ctx.xi_pow((q - 1) * i), ctx.pow(a, q));
        let e = ctx.subfield()[e_pick as usize];
        let c = ctx.mul(e, ctx.inv(ctx.xi_pow(i)).unwrap());
        let dec = decompose(&ctx, a, b, c).unwrap().expect("constructed to satisfy the shape");
        prop_assert_eq!(dec.i, i % (q + 1));
        prop_assert_eq!(dec.e_code, e.code());
        // reconstruction
        prop_assert_eq!(b, ctx.mul(ctx.xi_pow((q - 1) * dec.i), ctx.pow(a, q)));
        let e_back = ctx.elem_from_code(dec.e_code as u64).unwrap();
        prop_assert_eq!(c, ctx.mul(e_back, ctx.inv(ctx.xi_pow(dec.i)).unwrap()));
    }

    #[test]
    fn diagram_equivalence_never_fails(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let d = random_valid_diagram(&mut rng, 128, seed % 2 == 0);
        let sides = d.agw_equivalence().expect("generator satisfies the preconditions");
        prop_assert!(sides.agree);
    }
}
