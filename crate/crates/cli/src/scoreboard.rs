//! The built-in corpus: one entry per acceptance criterion.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use kummerwitt::algebra::{AlgebraAction, FiniteAlgebra, FiniteGroup, PermutationGSet};
use kummerwitt::cohomology::{cohomology, is_cocycle, map_cochain, Character, Cochain, GMap, GModule};
use kummerwitt::corpus::{fit_algebras, lift_instances};
use kummerwitt::extensions::{
    extension_from_cocycle, extension_of_torsor, h1_reduction, lift_along, obstruction_class, torsor_of_extension,
    GModExtension,
};
use kummerwitt::kummer::{
    fit_factorization, is_cyclotomic_pair, kummer_identity_check, kummer_instances, lift_with_context,
    smooth_instance_check, witt_to_integer, CyclotomicData, KummerError, LiftContext,
};
use kummerwitt::linalg::{Modulus, ResidueMatrix};
use kummerwitt::witt::{
    compute_universal_polynomials, truncate, CommRing, IntegerPoly, PrimeField, UniversalWittPolynomials,
    WittRing, WittVector,
};
use num_bigint::BigInt;
use serde_json::{json, Map, Value};

use crate::report::{seal, TOOL, VERSION};

/// Result of one corpus entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub criterion: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: Value,
}

type Check = fn() -> Result<Value, String>;

/// `(criterion, name, check)`; the determinism entry is handled separately.
pub const ENTRIES: &[(u32, &str, Check)] = &[
    (1, "witt/ring-isomorphism", witt_ring_isomorphism),
    (2, "witt/universal-polynomials", universal_polynomials),
    (3, "witt/structure-identities", structure_identities),
    (4, "cohomology/cyclic-groups", cyclic_cohomology),
    (5, "cyclotomic/fixtures", cyclotomic_fixtures),
    (6, "kummer/cup-square-identity", cup_square_identity),
    (7, "fit/corpus", fit_corpus),
    (8, "lift/rank-one", rank_one_lifting),
    (9, "obstruction/equivalence", obstruction_equivalence),
    (10, "torsor/dictionary", torsor_dictionary),
    (11, "smooth/b2-instance", b2_instance),
];

pub const DETERMINISM: &str = "determinism/corpus-json";

fn md(p: u64, e: u32) -> Modulus {
    Modulus::prime_power(p, e).expect("prime")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `C_1, C_2, C_3, C_4` and the Klein group.
pub fn small_groups() -> Vec<(&'static str, Arc<FiniteGroup>)> {
    vec![
        ("C_1", Arc::new(FiniteGroup::cyclic(1))),
        ("C_2", Arc::new(FiniteGroup::cyclic(2))),
        ("C_3", Arc::new(FiniteGroup::cyclic(3))),
        ("C_4", Arc::new(FiniteGroup::cyclic(4))),
        ("C_2 x C_2", Arc::new(FiniteGroup::cyclic(2).direct_product(&FiniteGroup::cyclic(2)))),
    ]
}

/// `G` acting on itself by left multiplication.
pub fn regular_set(group: &Arc<FiniteGroup>) -> PermutationGSet {
    let perms = group
        .elements()
        .map(|g| group.elements().map(|x| group.mul(g, x)).collect())
        .collect();
    PermutationGSet::new(group.clone(), perms).expect("regular action")
}

/// Surjections `q: M_big -> M_small` with `|G| <= 4` and `|M_big| <= 81`.
pub fn obstruction_maps() -> Vec<(String, GMap)> {
    let mut out = Vec::new();
    for (gname, g) in small_groups() {
        for p in [2u64, 3] {
            for a in 2..=4u32 {
                if p.pow(a) > 81 {
                    continue;
                }
                let m = md(p, a);
                for chi in Character::all(g.clone(), m) {
                    let big = GModule::cyclic_twist(g.clone(), m, a, &chi, 1).expect("twist");
                    for b in 1..a {
                        let small = GModule::cyclic_twist(g.clone(), m, b, &chi, 1).expect("twist");
                        let q = GMap::new(&big, &small, vec![vec![1]]).expect("reduction");
                        out.push((format!("{gname}: Z/{p}^{a}({:?}) -> Z/{p}^{b}", chi.values()), q));
                    }
                    if a == 2 {
                        let t = GModule::trivial_cyclic(g.clone(), m, 1).expect("trivial");
                        let sum = GModule::direct_sum(&[&big, &t]).expect("sum");
                        let red = GModule::cyclic_twist(g.clone(), m, 1, &chi, 1).expect("twist");
                        let q = GMap::new(&sum, &red, vec![vec![1], vec![0]]).expect("projection");
                        out.push((format!("{gname}: Z/{p}^2({:?}) + F_{p} -> F_{p}", chi.values()), q));
                        let both = GModule::direct_sum(&[&red, &t]).expect("sum");
                        let q = GMap::new(&sum, &both, vec![vec![1, 0], vec![0, 1]]).expect("reduction");
                        out.push((format!("{gname}: Z/{p}^2({:?}) + F_{p} -> F_{p} + F_{p}", chi.values()), q));
                    }
                }
            }
            for a in 1..=2u32 {
                let size = (p.pow(a) as u128).pow(g.order() as u32);
                if size > 81 || g.order() == 1 {
                    continue;
                }
                let m = md(p, a);
                let perm = GModule::permutation_module(&regular_set(&g), m).expect("permutation module");
                let triv = GModule::trivial_free(g.clone(), m, 1);
                let q = GMap::new(&perm, &triv, vec![vec![1]; g.order()]).expect("augmentation");
                out.push((format!("{gname}: Z/{p}^{a}[G] -> Z/{p}^{a}"), q));
            }
        }
    }
    out
}

/// Small `F_2`-modules over `C_2` and `C_3`.
pub fn f2_modules() -> Vec<(String, GModule)> {
    let f2 = md(2, 1);
    let mut out = Vec::new();
    for n in [2usize, 3] {
        let g = Arc::new(FiniteGroup::cyclic(n));
        out.push((format!("C_{n}: F_2"), GModule::trivial_free(g.clone(), f2, 1)));
        out.push((format!("C_{n}: F_2^2"), GModule::trivial_free(g.clone(), f2, 2)));
        out.push((
            format!("C_{n}: F_2[C_{n}]"),
            GModule::permutation_module(&regular_set(&g), f2).expect("permutation module"),
        ));
        if n == 3 {
            // F_4 with the generator acting by a primitive cube root of unity
            let f4 = kummerwitt::corpus::f4();
            let omega = f4.multiplication_matrix(&f4.basis_vector(1));
            let square = omega.mul(&omega).expect("square");
            let mats = vec![ResidueMatrix::identity(f2, 2), omega, square];
            let m = GModule::new(g.clone(), f2, 2, vec![], mats).expect("module");
            out.push(("C_3: F_4".to_string(), m));
        }
    }
    out
}

fn witt_ring_isomorphism() -> Result<Value, String> {
    let mut checked = 0;
    for p in [2u64, 3, 5] {
        for r in 1..=3usize {
            let w = WittRing::new(PrimeField::new(p).map_err(err)?, r).map_err(err)?;
            let n = p.pow(r as u32);
            let image: Vec<_> = (0..n).map(|k| w.from_int(k as i64)).collect();
            let distinct: HashSet<_> = image.iter().collect();
            ensure(distinct.len() as u64 == n && w.elements().len() as u64 == n, || {
                format!("k -> k.1 is not bijective for p = {p}, r = {r}")
            })?;
            for a in 0..n {
                for b in 0..n {
                    let (x, y) = (&image[a as usize], &image[b as usize]);
                    ensure(w.add(x, y) == image[((a + b) % n) as usize], || format!("addition at ({a}, {b})"))?;
                    ensure(w.mul(x, y) == image[((a * b) % n) as usize], || format!("multiplication at ({a}, {b})"))?;
                }
            }
            checked += 1;
        }
    }
    Ok(json!({ "rings": checked }))
}

fn monomial(r: usize, terms: &[(&[(usize, u32)], i64)]) -> IntegerPoly {
    terms
        .iter()
        .map(|(vars, c)| {
            let mut e = vec![0; 2 * r];
            for &(i, k) in *vars {
                e[i] = k;
            }
            (e, BigInt::from(*c))
        })
        .collect()
}

fn universal_polynomials() -> Result<Value, String> {
    let mut terms = BTreeMap::new();
    for (p, r) in [(2u64, 2usize), (2, 3), (3, 2), (5, 2)] {
        let u = compute_universal_polynomials(p, r).map_err(err)?;
        // a_i is variable i, b_i is variable r + i
        let (a0, a1, b0, b1) = (0, 1, r, r + 1);
        let s1 = match p {
            2 => Some(monomial(r, &[(&[(a1, 1)], 1), (&[(b1, 1)], 1), (&[(a0, 1), (b0, 1)], -1)])),
            3 => Some(monomial(
                r,
                &[(&[(a1, 1)], 1), (&[(b1, 1)], 1), (&[(a0, 2), (b0, 1)], -1), (&[(a0, 1), (b0, 2)], -1)],
            )),
            _ => None,
        };
        if let Some(s1) = s1 {
            ensure(u.addition[1] == s1, || format!("S_1 differs for p = {p}, r = {r}"))?;
        }
        for seed in 0..12i64 {
            let a: Vec<BigInt> = (0..r as i64).map(|i| BigInt::from((seed * 7 + i * 3) % 11 - 5)).collect();
            let b: Vec<BigInt> = (0..r as i64).map(|i| BigInt::from((seed * 5 + i * 13) % 9 - 4)).collect();
            let eval = |polys: &[IntegerPoly]| -> Vec<BigInt> {
                polys.iter().map(|q| UniversalWittPolynomials::eval_integer(q, &a, &b)).collect()
            };
            let (s, m) = (eval(&u.addition), eval(&u.multiplication));
            for n in 0..r {
                let wa = UniversalWittPolynomials::ghost_value(p, &a, n);
                let wb = UniversalWittPolynomials::ghost_value(p, &b, n);
                ensure(UniversalWittPolynomials::ghost_value(p, &s, n) == &wa + &wb, || {
                    format!("ghost sum fails for p = {p}, r = {r}")
                })?;
                ensure(UniversalWittPolynomials::ghost_value(p, &m, n) == &wa * &wb, || {
                    format!("ghost product fails for p = {p}, r = {r}")
                })?;
            }
        }
        let count: usize = u.addition.iter().chain(&u.multiplication).map(|q| q.len()).sum();
        terms.insert(format!("{p},{r}"), count);
    }
    Ok(json!({ "terms": terms }))
}

fn structure_on(alg: &FiniteAlgebra, s: usize) -> Result<usize, String> {
    let p = alg.p();
    let w = WittRing::new(alg.clone(), s).map_err(err)?;
    let elems = w.elements();
    for x in &elems {
        let px = w.scale_int(x, p as i64);
        ensure(w.frobenius(&w.verschiebung(x)) == px, || "F V != p".into())?;
        ensure(w.verschiebung(&w.frobenius(x)) == px, || "V F != p".into())?;
    }
    for r in 1..s {
        let wr = WittRing::new(alg.clone(), r).map_err(err)?;
        let sub = WittRing::new(alg.clone(), s - r).map_err(err)?;
        let shift = |x: &WittVector<Vec<u64>>| {
            let mut c = vec![alg.zero(); r];
            c.extend(x.components.iter().cloned());
            w.vector(c).expect("length s")
        };
        let sub_elems = sub.elements();
        let image: HashSet<WittVector<Vec<u64>>> = sub_elems.iter().map(shift).collect();
        ensure(image.len() == sub_elems.len(), || "V^r is not injective".into())?;
        for x in &sub_elems {
            for y in sub_elems.iter().step_by(3) {
                ensure(shift(&sub.add(x, y)) == w.add(&shift(x), &shift(y)), || "V^r is not additive".into())?;
            }
        }
        let kernel: HashSet<WittVector<Vec<u64>>> = elems
            .iter()
            .filter(|x| truncate(x, r).map(|t| wr.is_zero(&t)).unwrap_or(false))
            .cloned()
            .collect();
        ensure(kernel == image, || format!("image of V^{r} is not the kernel of truncation"))?;
        let truncs: HashSet<_> = elems.iter().map(|x| truncate(x, r).expect("r < s")).collect();
        ensure(truncs.len() == wr.elements().len(), || "truncation is not onto".into())?;
        for x in elems.iter().step_by(5) {
            for y in elems.iter().step_by(7) {
                let t = |z: &WittVector<Vec<u64>>| truncate(z, r).expect("r < s");
                ensure(t(&w.add(x, y)) == wr.add(&t(x), &t(y)), || "truncation is not additive".into())?;
                ensure(t(&w.mul(x, y)) == wr.mul(&t(x), &t(y)), || "truncation is not multiplicative".into())?;
            }
        }
    }
    Ok(elems.len())
}

fn structure_identities() -> Result<Value, String> {
    let f4 = kummerwitt::corpus::f4();
    let dual = FiniteAlgebra::truncated_poly(2, 2).map_err(err)?;
    Ok(json!({
        "W_3(F_4)": structure_on(&f4, 3)?,
        "W_2(F_2[x]/(x^2))": structure_on(&dual, 2)?,
    }))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Orders of `H^n(C_m, Z/q(u))` from the periodic resolution.
fn periodic_order(m: usize, q: u64, u: u64, n: usize) -> u64 {
    let norm = (0..m).fold((0u64, 1u64), |(s, pw), _| ((s + pw) % q, pw * u % q)).0;
    let fixed = gcd((u + q - 1) % q, q);
    let norm_kernel = gcd(norm, q);
    match n {
        0 => fixed,
        n if n % 2 == 1 => norm_kernel / (q / fixed),
        _ => fixed / (q / norm_kernel),
    }
}

fn cyclic_cohomology() -> Result<Value, String> {
    let mut cases = 0;
    for m in 1..=4usize {
        let g = Arc::new(FiniteGroup::cyclic(m));
        let gen = g.cyclic_generator().ok_or("cyclic group without generator")?;
        for p in [2u64, 3] {
            for r in 1..=2u32 {
                let modulus = md(p, r);
                for chi in Character::all(g.clone(), modulus) {
                    let module = GModule::cyclic_twist(g.clone(), modulus, r, &chi, 1).map_err(err)?;
                    for n in 0..=2 {
                        let h = cohomology(&module, n).map_err(err)?;
                        let expected = periodic_order(m, modulus.value(), chi.value(gen), n);
                        ensure(h.order() == expected as u128, || {
                            format!("H^{n}(C_{m}, Z/{}({:?})) = {} not {expected}", modulus.value(), chi.values(), h.order())
                        })?;
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(json!({ "cases": cases }))
}

fn cyclotomic_fixtures() -> Result<Value, String> {
    let c2 = Arc::new(FiniteGroup::cyclic(2));
    let sign = kummerwitt::corpus::sign(&c2, md(2, 2));
    let rep = is_cyclotomic_pair(&CyclotomicData::new(sign, 1).map_err(err)?).map_err(err)?;
    ensure(rep.cyclotomic, || "C_2 with sign mod 4 is not cyclotomic".into())?;
    let mut witnesses = Vec::new();
    for p in [2u64, 3, 5] {
        let g = Arc::new(FiniteGroup::cyclic(p as usize));
        let data = CyclotomicData::new(Character::trivial(g.clone(), md(p, 2)), 1).map_err(err)?;
        let rep = is_cyclotomic_pair(&data).map_err(err)?;
        ensure(!rep.cyclotomic, || format!("C_{p} trivial mod p^2 passes"))?;
        let fail = rep.first_failure().ok_or("no failing subgroup")?;
        ensure(fail.subgroup.len() == p as usize && fail.witness == Some(vec![1]), || {
            format!("unexpected witness {:?} on {:?}", fail.witness, fail.subgroup)
        })?;
        witnesses.push(json!({ "p": p, "subgroup": fail.subgroup, "class": fail.witness }));
    }
    let c3 = Arc::new(FiniteGroup::cyclic(3));
    let mut c3_checked = 0;
    for e in 2..=3 {
        for chi in Character::all(c3.clone(), md(2, e)) {
            let rep = is_cyclotomic_pair(&CyclotomicData::new(chi.clone(), 1).map_err(err)?).map_err(err)?;
            ensure(rep.cyclotomic, || format!("C_3 with {:?} fails", chi.values()))?;
            c3_checked += 1;
        }
    }
    Ok(json!({ "non_cyclotomic_witnesses": witnesses, "c3_characters": c3_checked }))
}

fn cup_square_identity() -> Result<Value, String> {
    let mut counts = BTreeMap::new();
    for (name, g) in small_groups() {
        let instances = kummer_instances(&g).map_err(err)?;
        for (chi, e1, ext) in &instances {
            let id = kummer_identity_check(e1, chi, ext).map_err(err)?;
            ensure(id.holds, || format!("{name}: identity fails for chi = {:?}, e1 = {e1:?}", chi.values()))?;
        }
        counts.insert(name, instances.len());
    }
    Ok(json!({ "instances": counts }))
}

fn fit_corpus() -> Result<Value, String> {
    let mut ms = BTreeMap::new();
    for inst in fit_algebras() {
        let fit = fit_factorization(&inst.algebra, &inst.action).map_err(err)?;
        ensure(fit.verify(&inst.algebra, &inst.action), || format!("{}: factorization fails", inst.name))?;
        let rows: Vec<Vec<u64>> = (0..inst.algebra.dim())
            .map(|i| {
                let mut x = inst.algebra.basis_vector(i);
                for _ in 0..fit.m {
                    x = inst.algebra.frobenius(&x);
                }
                x
            })
            .collect();
        ensure(fit.f.mul(&fit.g).map_err(err)?.row_vecs() == rows, || format!("{}: g f != Frob^m", inst.name))?;
        let (_, minimum) = inst.algebra.nilpotency_data();
        ensure(fit.m == minimum, || format!("{}: m = {} but minimum is {minimum}", inst.name, fit.m))?;
        ms.insert(inst.name, fit.m);
    }
    Ok(json!({ "m": ms }))
}

fn rank_one_lifting() -> Result<Value, String> {
    let mut lifted = BTreeMap::new();
    let mut rejected = Vec::new();
    for inst in lift_instances() {
        let data = CyclotomicData::new(inst.chi.clone(), 1).map_err(err)?;
        let (alg, action) = (&inst.instance.algebra, &inst.instance.action);
        let ctx = match LiftContext::new(&data, alg, action) {
            Ok(ctx) => ctx,
            Err(KummerError::NotCyclotomic { .. }) => {
                rejected.push(inst.name);
                continue;
            }
            Err(e) => return Err(format!("{}: {e}", inst.name)),
        };
        let m_a = fit_factorization(alg, action).map_err(err)?.m;
        let top = ctx.level(data.e as usize + 1);
        let mut count = 0;
        for r in 1..=data.e as usize {
            let wr = ctx.level(r);
            let h = cohomology(&wr.module, 1).map_err(err)?;
            let trunc = top.reduction_to(wr).map_err(err)?;
            for coords in h.all_classes() {
                let c = h.representative(&coords);
                let rep = lift_with_context(&ctx, r, &c).map_err(err)?;
                ensure(is_cocycle(&top.module, &rep.lift), || format!("{}: lift is not a cocycle", inst.name))?;
                let pulled = map_cochain(&wr.frobenius_map(rep.m).map_err(err)?, &c);
                let reduced = map_cochain(&trunc, &rep.lift);
                ensure(h.class_of(&pulled).map_err(err)? == h.class_of(&reduced).map_err(err)?, || {
                    format!("{}: class {coords:?} lifts incorrectly", inst.name)
                })?;
                ensure(rep.m <= m_a * r as u32, || {
                    format!("{}: m = {} exceeds {m_a} * {r}", inst.name, rep.m)
                })?;
                count += 1;
            }
        }
        lifted.insert(inst.name, count);
    }
    Ok(json!({ "classes_lifted": lifted, "not_cyclotomic": rejected }))
}

fn obstruction_equivalence() -> Result<Value, String> {
    let (mut total, mut vanishing) = (0, 0);
    for (name, q) in obstruction_maps() {
        let reduction = h1_reduction(&q).map_err(err)?;
        let h1 = cohomology(q.target(), 1).map_err(err)?;
        for coords in h1.all_classes() {
            let c = h1.representative(&coords);
            let obs = obstruction_class(&q, &c).map_err(err)?;
            let lift = lift_along(&q, &c).map_err(err)?;
            let liftable = reduction.preimage(&coords).is_some();
            ensure(obs.vanishes() == liftable && lift.is_some() == liftable, || {
                format!("{name}: class {coords:?} disagrees")
            })?;
            if let Some(l) = lift {
                let back = Cochain {
                    degree: 1,
                    values: l.values.iter().map(|v| q.apply(v)).collect(),
                };
                ensure(is_cocycle(q.source(), &l) && h1.class_of(&back).map_err(err)? == coords, || {
                    format!("{name}: lift of {coords:?} does not reduce")
                })?;
            }
            total += 1;
            vanishing += usize::from(liftable);
        }
    }
    Ok(json!({ "classes": total, "liftable": vanishing }))
}

fn torsor_dictionary() -> Result<Value, String> {
    let (mut round_trips, mut automorphism_checks) = (0, 0);
    let modules = f2_modules();
    for (name, b) in &modules {
        let h1 = cohomology(b, 1).map_err(err)?;
        for coords in h1.all_classes() {
            let z = h1.representative(&coords);
            let ext = extension_from_cocycle(b, &z).map_err(err)?;
            let x = torsor_of_extension(&ext).map_err(err)?;
            let back = extension_of_torsor(&x).map_err(err)?;
            let class = ext.extension_class().map_err(err)?.coords;
            ensure(back.extension_class().map_err(err)?.coords == class, || {
                format!("{name}: class changes on a round trip")
            })?;
            let y = torsor_of_extension(&back).map_err(err)?;
            ensure(x.isomorphism_to(&y).is_some(), || format!("{name}: torsors are not isomorphic"))?;
            let (th1, tcoords) = x.class().map_err(err)?;
            ensure(tcoords == th1.class_of(&z).map_err(err)?, || format!("{name}: torsor class differs"))?;
            round_trips += 1;
            let autos = ext.automorphisms().map_err(err)?;
            let hom = ext.quot().hom_module(ext.sub()).map_err(err)?;
            ensure(autos.len() as u128 == cohomology(&hom.module, 0).map_err(err)?.order(), || {
                format!("{name}: automorphism count")
            })?;
            automorphism_checks += 1;
        }
    }
    for (na, a) in &modules {
        for (nb, b) in &modules {
            if a.group() != b.group() {
                continue;
            }
            let ext = GModExtension::split(b, a).map_err(err)?;
            let autos = ext.automorphisms().map_err(err)?;
            let hom = a.hom_module(b).map_err(err)?;
            ensure(autos.len() as u128 == cohomology(&hom.module, 0).map_err(err)?.order(), || {
                format!("split extension of {na} by {nb}: automorphism count")
            })?;
            automorphism_checks += 1;
        }
    }
    Ok(json!({ "round_trips": round_trips, "automorphism_counts": automorphism_checks }))
}

fn b2_instance() -> Result<Value, String> {
    let g = FiniteGroup::cyclic(2);
    let f2 = FiniteAlgebra::prime_field(2).map_err(err)?;
    let action = AlgebraAction::trivial(Arc::new(g.clone()), &f2);
    let red = smooth_instance_check(&g, &f2, &action, kummerwitt::extensions::DEFAULT_ENUMERATION_BOUND)
        .map_err(err)?;
    ensure(red.surjective, || "H^1(C_2, B(Z/4)) -> H^1(C_2, B(F_2)) is not onto".into())?;
    let w2 = WittRing::new(f2.clone(), 2).map_err(err)?;
    let int = |x: &WittVector<Vec<u64>>| witt_to_integer(&w2, x).expect("W_2(F_2) = Z/4");
    let mut witnesses = Vec::new();
    for w in red.witnesses.iter().flatten() {
        let s = &w[1];
        let (a, b, d) = (int(&s.a), int(&s.b), int(&s.d));
        // [[a, b], [0, d]]^2 = [[a^2, ab + bd], [0, d^2]]
        let square = [(a * a) % 4, (a * b + b * d) % 4, (d * d) % 4];
        ensure(square == [1, 0, 1], || format!("witness [[{a}, {b}], [0, {d}]] does not square to 1"))?;
        witnesses.push(json!([[a, b], [0, d]]));
    }
    ensure(witnesses.contains(&json!([[1, 1], [0, 3]])), || "the [[1, 1], [0, 3]] witness is missing".into())?;
    Ok(json!({
        "source_classes": red.source_classes,
        "target_classes": red.target_classes,
        "witnesses": witnesses,
    }))
}

fn run_entry(criterion: u32, name: &'static str, check: Check) -> Outcome {
    match check() {
        Ok(detail) => Outcome {
            criterion,
            name,
            passed: true,
            detail,
        },
        Err(msg) => Outcome {
            criterion,
            name,
            passed: false,
            detail: json!({ "error": msg }),
        },
    }
}

fn selected(name: &str, filter: Option<&str>) -> bool {
    filter.is_none_or(|f| name.contains(f))
}

/// Runs the selected entries in order, with `on_entry` called after each.
pub fn run_corpus(filter: Option<&str>, mut on_entry: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let chosen: Vec<_> = ENTRIES.iter().filter(|(_, n, _)| selected(n, filter)).collect();
    let mut outcomes = Vec::new();
    for &&(criterion, name, check) in &chosen {
        let o = run_entry(criterion, name, check);
        on_entry(&o);
        outcomes.push(o);
    }
    if selected(DETERMINISM, filter) {
        // rerun everything else that was selected, or the whole corpus
        let first: Vec<Outcome> = if outcomes.is_empty() {
            ENTRIES.iter().map(|&(c, n, f)| run_entry(c, n, f)).collect()
        } else {
            outcomes.clone()
        };
        let again: Vec<Outcome> = first
            .iter()
            .map(|o| {
                let &(c, n, f) = ENTRIES.iter().find(|e| e.1 == o.name).expect("known entry");
                run_entry(c, n, f)
            })
            .collect();
        let a = serde_json::to_string(&entries_json(&first)).expect("serializes");
        let b = serde_json::to_string(&entries_json(&again)).expect("serializes");
        let o = Outcome {
            criterion: 12,
            name: DETERMINISM,
            passed: a == b,
            detail: json!({ "entries_rerun": first.len(), "bytes": a.len() }),
        };
        on_entry(&o);
        outcomes.push(o);
    }
    outcomes
}

fn entries_json(outcomes: &[Outcome]) -> Value {
    json!(outcomes
        .iter()
        .map(|o| json!({
            "criterion": o.criterion,
            "name": o.name,
            "passed": o.passed,
            "detail": o.detail,
        }))
        .collect::<Vec<_>>())
}

pub fn corpus_document(outcomes: &[Outcome], filter: Option<&str>) -> Value {
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let mut doc = Map::new();
    doc.insert("tool".into(), json!(TOOL));
    doc.insert("version".into(), json!(VERSION));
    doc.insert("filter".into(), json!(filter));
    doc.insert("entries".into(), entries_json(outcomes));
    doc.insert("passed".into(), json!(passed));
    doc.insert("failed".into(), json!(outcomes.len() - passed));
    seal(doc)
}
