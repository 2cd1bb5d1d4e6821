//! Flows through the public API, from algebras to lifted cocycles.

use std::collections::HashSet;
use std::sync::Arc;

use kummerwitt::algebra::{AlgebraAction, FiniteAlgebra, FiniteGroup};
use kummerwitt::cohomology::{
    cohomology, is_cocycle, wittmod_from_algebra, Character, ClassHom, Cochain, GMap, GModule, ShortExactSequence,
};
use kummerwitt::corpus::{f4, sign};
use kummerwitt::extensions::{extension_from_cocycle, extension_of_torsor, lift_along, torsor_of_extension};
use kummerwitt::kummer::{
    fit_factorization, is_cyclotomic_pair, lift_cocycle_rank1, CyclotomicData, KummerError,
};
use kummerwitt::linalg::Modulus;
use kummerwitt::witt::{CommRing, WittRing};

fn md(p: u64, e: u32) -> Modulus {
    Modulus::prime_power(p, e).unwrap()
}

#[test]
fn witt_module_of_dual_numbers() {
    let alg = FiniteAlgebra::truncated_poly(2, 2).unwrap();
    let g = Arc::new(FiniteGroup::cyclic(1));
    let action = AlgebraAction::trivial(g.clone(), &alg);
    let wm = wittmod_from_algebra(&alg, &action, 2, &Character::trivial(g, md(2, 2)), 1).unwrap();
    assert_eq!(wm.module.order(), 16);
    assert_eq!(wm.module.invariants().factors(), &[4, 2, 2]);

    // additive orders of W_2(F_2[x]/(x^2)) by direct census
    let w = WittRing::new(alg, 2).unwrap();
    let mut orders = [0usize; 5];
    for x in w.elements() {
        let k = (1..=4).find(|&k| w.scale_int(&x, k as i64) == w.zero()).unwrap();
        orders[k] += 1;
    }
    // Z/4 + Z/2 + Z/2: 8 elements of order 4, 7 of order 2
    assert_eq!(orders, [0, 1, 7, 0, 8]);
}

#[test]
fn bockstein_of_the_identity_character() {
    for p in [2u64, 3] {
        let g = Arc::new(FiniteGroup::cyclic(p as usize));
        let m = md(p, 2);
        let small = GModule::trivial_cyclic(g.clone(), m, 1).unwrap();
        let big = GModule::trivial_cyclic(g.clone(), m, 2).unwrap();
        let inj = GMap::new(&small, &big, vec![vec![p]]).unwrap();
        let surj = GMap::new(&big, &small, vec![vec![1]]).unwrap();
        let seq = ShortExactSequence::new(inj, surj).unwrap();
        let h1 = cohomology(&small, 1).unwrap();
        let h2 = cohomology(&small, 2).unwrap();
        let delta = seq.connecting_map(&h1, &h2).unwrap();
        assert!(delta.is_surjective() && delta.is_injective());

        // the identity character lifts to no cocycle of Z/p^2
        let id = Cochain::from_fn(&small, 1, |t| vec![t[0] as u64]);
        assert!(is_cocycle(&small, &id));
        assert!(lift_along(&seq.surj, &id).unwrap().is_none());
    }
}

#[test]
fn sign_example_from_check_to_lift() {
    let c2 = Arc::new(FiniteGroup::cyclic(2));
    let data = CyclotomicData::new(sign(&c2, md(2, 2)), 1).unwrap();
    assert!(is_cyclotomic_pair(&data).unwrap().cyclotomic);

    for alg in [FiniteAlgebra::prime_field(2).unwrap(), f4()] {
        let action = AlgebraAction::trivial(c2.clone(), &alg);
        let fit = fit_factorization(&alg, &action).unwrap();
        assert_eq!(fit.m, 0);
        let w1 = wittmod_from_algebra(&alg, &action, 1, &data.chi, 1).unwrap();
        let h1 = cohomology(&w1.module, 1).unwrap();
        for coords in h1.all_classes() {
            let c = h1.representative(&coords);
            let rep = lift_cocycle_rank1(&data, &alg, &action, 1, &c).unwrap();
            let w2 = wittmod_from_algebra(&alg, &action, 2, &data.chi, 1).unwrap();
            assert!(is_cocycle(&w2.module, &rep.lift));
            let back = ClassHom::induced(&w2.reduction_to(&w1).unwrap(), &cohomology(&w2.module, 1).unwrap(), &h1)
                .unwrap();
            assert_eq!(back.apply(&rep.lift_coords), coords);
        }
    }
}

#[test]
fn trivial_character_mod_four_is_rejected_for_lifting() {
    let c2 = Arc::new(FiniteGroup::cyclic(2));
    let data = CyclotomicData::new(Character::trivial(c2.clone(), md(2, 2)), 1).unwrap();
    let alg = FiniteAlgebra::prime_field(2).unwrap();
    let action = AlgebraAction::trivial(c2, &alg);
    let w1 = wittmod_from_algebra(&alg, &action, 1, &data.chi, 1).unwrap();
    let c = cohomology(&w1.module, 1).unwrap().representative(&[1]);
    assert!(matches!(
        lift_cocycle_rank1(&data, &alg, &action, 1, &c),
        Err(KummerError::NotCyclotomic { .. })
    ));
}

#[test]
fn torsors_of_extensions_of_f2_over_c2() {
    let c2 = Arc::new(FiniteGroup::cyclic(2));
    let f2 = md(2, 1);
    let b = GModule::trivial_free(c2.clone(), f2, 1);
    let h1 = cohomology(&b, 1).unwrap();
    let mut classes = HashSet::new();
    for coords in h1.all_classes() {
        let ext = extension_from_cocycle(&b, &h1.representative(&coords)).unwrap();
        let x = torsor_of_extension(&ext).unwrap();
        assert_eq!(x.len(), 2);
        let back = extension_of_torsor(&x).unwrap();
        assert_eq!(back.extension_class().unwrap().coords, coords);
        classes.insert(x.class().unwrap().1);
    }
    assert_eq!(classes.len(), 2);
}
