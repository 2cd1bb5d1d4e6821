use super::*;
use crate::cohomology::{differential, is_cocycle};
use crate::corpus::{f4, fit_algebras, lift_instances, sign};
use crate::extensions::{extension_from_cocycle, obstruction_class};
use std::collections::HashSet;

fn md(p: u64, e: u32) -> Modulus {
    Modulus::prime_power(p, e).unwrap()
}

fn cyclic(n: usize) -> Arc<FiniteGroup> {
    Arc::new(FiniteGroup::cyclic(n))
}

fn klein() -> Arc<FiniteGroup> {
    Arc::new(FiniteGroup::cyclic(2).direct_product(&FiniteGroup::cyclic(2)))
}

fn all_cochains(m: &GModule, n: usize) -> Vec<Cochain> {
    let elems = m.elements();
    let slots = m.group().order().pow(n as u32);
    all_coordinates(&vec![elems.len() as u64; slots])
        .into_iter()
        .map(|c| Cochain {
            degree: n,
            values: c.iter().map(|&i| elems[i as usize].clone()).collect(),
        })
        .collect()
}

/// Surjectivity of `H^1(G, big) -> H^1(G, small)` by enumeration.
fn brute_surjective(big: &GModule, small: &GModule) -> bool {
    let bounds: HashSet<Vec<Vec<u64>>> = small
        .elements()
        .iter()
        .map(|v| differential(small, &Cochain::constant(small, v)).values)
        .collect();
    let small_cocycles: Vec<Cochain> = all_cochains(small, 1).into_iter().filter(|c| is_cocycle(small, c)).collect();
    let class = |c: &Cochain| -> Vec<u64> {
        let mut members: Vec<Vec<u64>> = bounds
            .iter()
            .map(|b| c.values.iter().zip(b).flat_map(|(x, y)| small.add(x, y)).collect())
            .collect();
        members.sort();
        members.dedup();
        members.into_iter().next().unwrap()
    };
    let targets: HashSet<Vec<u64>> = small_cocycles.iter().map(|c| class(c)).collect();
    let hit: HashSet<Vec<u64>> = all_cochains(big, 1)
        .into_iter()
        .filter(|c| is_cocycle(big, c))
        .map(|c| {
            let reduced = Cochain {
                degree: 1,
                values: c.values.iter().map(|v| small.canonical(v)).collect(),
            };
            class(&reduced)
        })
        .collect();
    targets.is_subset(&hit)
}

#[test]
fn cyclotomic_examples() {
    let trivial = CyclotomicData::new(Character::trivial(cyclic(1), md(2, 2)), 1).unwrap();
    assert!(is_cyclotomic_pair(&trivial).unwrap().cyclotomic);

    for p in [2, 3, 5] {
        let g = cyclic(p as usize);
        let data = CyclotomicData::new(Character::trivial(g.clone(), md(p, 2)), 1).unwrap();
        let report = is_cyclotomic_pair(&data).unwrap();
        assert!(!report.cyclotomic);
        let fail = report.first_failure().unwrap();
        assert_eq!(fail.subgroup.len(), p as usize);
        assert_eq!(fail.image_order, 1);
        assert_eq!(fail.target_order, p as u128);
        assert_eq!(fail.witness, Some(vec![1]));
    }

    let c2 = cyclic(2);
    let data = CyclotomicData::new(sign(&c2, md(2, 2)), 1).unwrap();
    let report = is_cyclotomic_pair(&data).unwrap();
    assert!(report.cyclotomic);
    assert_eq!(report.subgroups.len(), 2);
}

#[test]
fn cyclotomic_matches_brute_force() {
    for (g, p) in [(cyclic(2), 2), (cyclic(4), 2), (klein(), 2), (cyclic(3), 3), (cyclic(2), 3)] {
        for chi in Character::all(g.clone(), md(p, 2)) {
            let data = CyclotomicData::new(chi, 1).unwrap();
            let report = is_cyclotomic_pair(&data).unwrap();
            let big = data.twist_module(2).unwrap();
            let small = data.twist_module(1).unwrap();
            for (h, entry) in g.subgroups().unwrap().iter().zip(&report.subgroups) {
                assert_eq!(entry.surjective, brute_surjective(&big.restrict(h), &small.restrict(h)));
            }
        }
    }
}

#[test]
fn prime_to_p_groups_are_cyclotomic() {
    for chi in Character::all(cyclic(3), md(2, 3)) {
        for n in 1..=2 {
            let data = CyclotomicData::new(chi.clone(), n).unwrap();
            assert!(is_cyclotomic_pair(&data).unwrap().cyclotomic);
        }
    }
}

#[test]
fn cyclotomic_is_monotone() {
    for g in [cyclic(2), cyclic(4), klein(), cyclic(3)] {
        for chi in Character::all(g.clone(), md(2, 3)) {
            let data = CyclotomicData::new(chi, 1).unwrap();
            if is_cyclotomic_pair(&data).unwrap().cyclotomic {
                for f in 1..3 {
                    assert!(is_cyclotomic_pair(&data.reduce(f).unwrap()).unwrap().cyclotomic);
                }
            }
        }
    }
}

#[test]
fn cyclotomic_bound() {
    let data = CyclotomicData::new(Character::trivial(cyclic(8), md(2, 2)), 1).unwrap();
    assert!(matches!(
        is_cyclotomic_pair_bounded(&data, 4),
        Err(KummerError::BoundExceeded { .. })
    ));
}

#[test]
fn cyclothymic_examples() {
    let c2 = cyclic(2);
    let lambda = Character::trivial(c2.clone(), md(2, 1));
    let found = cyclothymic_witness(&lambda, 1, 1, &[]).unwrap().unwrap();
    assert!(found.is_trivial());

    let l = GModule::trivial_cyclic(c2.clone(), md(2, 2), 1).unwrap();
    let h1 = cohomology(&l, 1).unwrap();
    let input = CyclothymicInput {
        subgroup: c2.whole(),
        class: h1.representative(&[1]),
    };
    let psi = cyclothymic_witness(&lambda, 1, 1, &[input]).unwrap().unwrap();
    assert_eq!(psi, sign(&c2, md(2, 2)));

    for p in [3u64, 5] {
        let g = cyclic(p as usize);
        let lambda = Character::trivial(g.clone(), md(p, 1));
        let l = GModule::trivial_cyclic(g.clone(), md(p, 2), 1).unwrap();
        let h1 = cohomology(&l, 1).unwrap();
        let input = CyclothymicInput {
            subgroup: g.whole(),
            class: h1.representative(&[1]),
        };
        assert!(cyclothymic_witness(&lambda, 1, 1, &[input]).unwrap().is_none());
    }
}

/// `m` from the nilpotency index of `N`, by enumerating products.
fn brute_frobenius_exponent(alg: &FiniteAlgebra) -> u32 {
    let elems = alg.elements();
    let big = (alg.p() as u64).pow(alg.dim() as u32);
    let nil: Vec<Vec<u64>> = elems.iter().filter(|a| alg.pow(a, big).iter().all(|&c| c == 0)).cloned().collect();
    let mut k = 1;
    let mut products: HashSet<Vec<u64>> = nil.iter().cloned().collect();
    while products.iter().any(|x| x.iter().any(|&c| c != 0)) {
        products = products.iter().flat_map(|x| nil.iter().map(move |y| alg.mul(x, y))).collect();
        k += 1;
    }
    let mut m = 0;
    while (alg.p() as usize).pow(m) < k {
        m += 1;
    }
    m
}

#[test]
fn fit_on_corpus() {
    for inst in fit_algebras() {
        let fit = fit_factorization(&inst.algebra, &inst.action).unwrap();
        let p = inst.algebra.p();
        assert_eq!(fit.f.mul(&fit.g).unwrap(), inst.algebra.frobenius_power_matrix(fit.m), "{}", inst.name);
        for g in inst.group.elements() {
            let a = inst.action.matrix(g);
            let perm = fit.set.module_matrix(p, g);
            assert_eq!(a.mul(&fit.f).unwrap(), fit.f.mul(&perm).unwrap());
            assert_eq!(perm.mul(&fit.g).unwrap(), fit.g.mul(a).unwrap());
        }
        assert_eq!(fit.m, brute_frobenius_exponent(&inst.algebra), "{}", inst.name);
    }
}

#[test]
fn fit_examples() {
    let g = cyclic(1);
    let f3 = FiniteAlgebra::prime_field(3).unwrap();
    let fit = fit_factorization(&f3, &AlgebraAction::trivial(g.clone(), &f3)).unwrap();
    assert_eq!((fit.m, fit.set.size()), (0, 1));
    assert_eq!(fit.f, ResidueMatrix::identity(md(3, 1), 1));

    let dual = FiniteAlgebra::truncated_poly(2, 2).unwrap();
    let fit = fit_factorization(&dual, &AlgebraAction::trivial(g, &dual)).unwrap();
    assert_eq!((fit.m, fit.set.size()), (1, 1));
    // a + bx -> a, then 1 -> 1
    assert_eq!(fit.f.row_vecs(), vec![vec![1], vec![0]]);
    assert_eq!(fit.g.row_vecs(), vec![vec![1, 0]]);

    let c2 = cyclic(2);
    let k = f4();
    let action = AlgebraAction::from_generators(c2, &k, &[(1, k.frobenius_matrix())]).unwrap();
    let fit = fit_factorization(&k, &action).unwrap();
    assert_eq!((fit.m, fit.set.size()), (0, 2));
    assert_eq!(fit.set.image(1, 0), 1);
    assert_eq!(k.frobenius(&fit.points[0]), fit.points[1]);
}

fn cyclotomic_instances() -> Vec<crate::corpus::LiftInstance> {
    lift_instances()
        .into_iter()
        .filter(|inst| is_cyclotomic_pair(&CyclotomicData::new(inst.chi.clone(), 1).unwrap()).unwrap().cyclotomic)
        .collect()
}

#[test]
fn lift_zero_and_generator() {
    let c2 = cyclic(2);
    let data = CyclotomicData::new(sign(&c2, md(2, 2)), 1).unwrap();
    let f2 = FiniteAlgebra::prime_field(2).unwrap();
    let action = AlgebraAction::trivial(c2.clone(), &f2);
    let ctx = LiftContext::new(&data, &f2, &action).unwrap();
    let w1 = ctx.level(1);
    let zero = lift_with_context(&ctx, 1, &Cochain::zero(&w1.module, 1)).unwrap();
    assert_eq!(zero.m, 0);
    let top = cohomology(&ctx.level(2).module, 1).unwrap();
    assert!(top.is_zero_class(&zero.lift_coords));

    let h1 = cohomology(&w1.module, 1).unwrap();
    let gen = h1.representative(&[1]);
    let report = lift_with_context(&ctx, 1, &gen).unwrap();
    assert_eq!((report.m, report.constructive_m), (0, 0));
    // H^1(C_2, Z/4(-1)) = Z/2, and the lift is its generator
    assert_eq!(top.orders(), &[2]);
    assert_eq!(report.lift_coords, vec![1]);
    assert_eq!(top.class_of(&report.constructive_lift).unwrap(), vec![1]);
}

#[test]
fn lift_every_class_on_corpus() {
    for inst in cyclotomic_instances() {
        let data = CyclotomicData::new(inst.chi.clone(), 1).unwrap();
        let alg = &inst.instance.algebra;
        let ctx = LiftContext::new(&data, alg, &inst.instance.action).unwrap();
        let m_a = ctx.frobenius_exponent();
        for r in 1..=data.e as usize {
            let wr = ctx.level(r);
            let h = cohomology(&wr.module, 1).unwrap();
            for coords in h.all_classes() {
                let c = h.representative(&coords);
                let report = lift_with_context(&ctx, r, &c).unwrap();
                assert!(ctx.verify(r, &c, report.m, &report.lift).unwrap(), "{}", inst.name);
                assert!(ctx.verify(r, &c, report.constructive_m, &report.constructive_lift).unwrap());
                assert!(report.m <= report.constructive_m);
                assert!(report.constructive_m <= m_a * r as u32, "{}", inst.name);
                assert_eq!(report.steps.len(), r);
                // the reduction W_{e+1} -> W_r has no obstruction on the pullback
                let top_len = data.e as usize + 1;
                let q = ctx.level(top_len).reduction_to(wr).unwrap();
                let pulled = map_cochain(&wr.frobenius_map(report.m).unwrap(), &c);
                if top_len > r {
                    assert!(obstruction_class(&q, &pulled).unwrap().vanishes());
                }
            }
        }
    }
}

#[test]
fn lift_rejects_non_cyclotomic() {
    let c2 = cyclic(2);
    let data = CyclotomicData::new(Character::trivial(c2.clone(), md(2, 2)), 1).unwrap();
    let f2 = FiniteAlgebra::prime_field(2).unwrap();
    let action = AlgebraAction::trivial(c2, &f2);
    assert!(matches!(
        LiftContext::new(&data, &f2, &action),
        Err(KummerError::NotCyclotomic { .. })
    ));
}

#[test]
fn invertible_lift_bookkeeping() {
    let c2 = cyclic(2);
    let data = CyclotomicData::new(sign(&c2, md(2, 2)), 1).unwrap();
    let dual = FiniteAlgebra::truncated_poly(2, 2).unwrap();
    let action = AlgebraAction::trivial(c2.clone(), &dual);
    let ctx = LiftContext::new(&data, &dual, &action).unwrap();
    let h = cohomology(&ctx.level(1).module, 1).unwrap();
    for coords in h.all_classes() {
        let c = h.representative(&coords);
        let plain = lift_cocycle_rank1(&data, &dual, &action, 1, &c).unwrap();
        let twisted = lift_cocycle_invertible(&data, &dual, &action, &LineBundle::Free, 1, &c).unwrap();
        assert_eq!(plain.lift_coords, twisted.lift_coords);
        assert_eq!(twisted.line_bundle_power, Some(2u64.pow(twisted.m)));
    }
    let bad = LineBundle::NonFree {
        description: "Picard class of order 2".into(),
    };
    let c = Cochain::zero(&ctx.level(1).module, 1);
    assert!(matches!(
        lift_cocycle_invertible(&data, &dual, &action, &bad, 1, &c),
        Err(KummerError::NonFreeLineBundle(_))
    ));
}

#[test]
fn laurent_model_examples() {
    let data = CyclotomicData::new(Character::trivial(cyclic(1), md(3, 1)), 1).unwrap();
    let model = laurent_model(&data, 1, 1 << 12).unwrap();
    assert_eq!(model.group.order(), 3);
    assert_eq!(model.t.values, vec![vec![0], vec![1], vec![2]]);

    let c2 = cyclic(2);
    let data = CyclotomicData::new(sign(&c2, md(2, 3)), 1).unwrap();
    for k in 1..=3 {
        let model = laurent_model(&data, k, 1 << 12).unwrap();
        let q = 2usize.pow(k);
        assert_eq!(model.group.order(), q * 2);
        assert!(is_cocycle(&model.coefficients, &model.t));
        // on the normal factor (x, 1) the cocycle is x
        for x in 0..q {
            assert_eq!(model.t.values[x * 2], vec![x as u64]);
        }
    }
    assert!(laurent_model(&data, 3, 8).is_err());
}

#[test]
fn cup_with_t_gives_cocycles() {
    let c2 = cyclic(2);
    let data = CyclotomicData::new(sign(&c2, md(2, 2)), 1).unwrap();
    let model = laurent_model(&data, 2, 1 << 10).unwrap();
    let m = GModule::trivial_free(c2.clone(), md(2, 2), 1);
    for n in 0..=1 {
        let h = cohomology(&m, n).unwrap();
        for coords in h.all_classes() {
            let (target, c) = model.cup_with_t(&m, &h.representative(&coords)).unwrap();
            assert_eq!(c.degree, n + 1);
            assert!(is_cocycle(&target, &c));
        }
    }
}

#[test]
fn smooth_instances() {
    let trivial = cyclic(1);
    let f2 = FiniteAlgebra::prime_field(2).unwrap();
    let r = smooth_instance_check(&trivial, &f2, &AlgebraAction::trivial(trivial.clone(), &f2), 1 << 20).unwrap();
    assert!(r.surjective);

    let c2 = cyclic(2);
    let r = smooth_instance_check(&c2, &f2, &AlgebraAction::trivial(c2.clone(), &f2), 1 << 20).unwrap();
    assert!(r.surjective);
    assert_eq!(r.target_classes, 2);
    let w2 = WittRing::new(f2.clone(), 2).unwrap();
    let nontrivial = r
        .target_representatives
        .iter()
        .position(|z| z[1].b != vec![0])
        .unwrap();
    let witness = r.witnesses[nontrivial].as_ref().unwrap();
    let m = &witness[1];
    let ints = [&m.a, &m.b, &m.d].map(|x| witt_to_integer(&w2, x).unwrap());
    assert_eq!(ints, [1, 1, 3]);
    // [[1,1],[0,3]]^2 = 1 mod 4
    let (a, b, d) = (ints[0], ints[1], ints[2]);
    assert_eq!(((a * a) % 4, (a * b + b * d) % 4, (d * d) % 4), (1, 0, 1));
    for (w, z) in r.witnesses.iter().zip(&r.target_representatives) {
        let w = w.as_ref().unwrap();
        for (x, y) in w.iter().zip(z) {
            assert_eq!(truncate(&x.b, 1).unwrap().components[0], y.b);
        }
    }
}

#[test]
fn kummer_identity_examples() {
    let c2 = cyclic(2);
    let chi = sign(&c2, md(2, 2));
    let b = GModule::cyclic_twist(c2.clone(), md(2, 2), 2, &chi, 1).unwrap();
    let h1 = cohomology(&b, 1).unwrap();
    let zero_ext = extension_from_cocycle(&b, &Cochain::zero(&b, 1)).unwrap();
    let res = kummer_identity_check(&[0], &chi, &zero_ext).unwrap();
    assert!(res.holds);
    assert_eq!(res.square, vec![0]);

    let ext = extension_from_cocycle(&b, &h1.representative(&[1])).unwrap();
    let res = kummer_identity_check(&[1], &chi, &ext).unwrap();
    assert!(res.holds);
    assert_eq!(res.square, vec![1]);
    assert_eq!(kummer_identity_check(&[0], &chi, &ext).unwrap_err(), KummerError::ReductionMismatch);
}

#[test]
fn kummer_identity_on_small_groups() {
    for g in [cyclic(1), cyclic(2), cyclic(3), cyclic(4), klein()] {
        for (chi, e1, ext) in kummer_instances(&g).unwrap() {
            assert!(kummer_identity_check(&e1, &chi, &ext).unwrap().holds);
        }
    }
    // on the Klein group, a class inflated from a factor with a lift
    let k = klein();
    let found = kummer_instances(&k)
        .unwrap()
        .into_iter()
        .filter(|(chi, e1, _)| !chi.is_trivial() && e1.iter().any(|&c| c != 0))
        .count();
    assert!(found > 0);
}
