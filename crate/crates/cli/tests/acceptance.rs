//! Acceptance suite. Each criterion is checked against a brute-force oracle
//! written here, independently of the code paths it tests, and prints one
//! PASS/FAIL line.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use kummerwitt::algebra::{AlgebraAction, FiniteAlgebra, FiniteGroup};
use kummerwitt::cohomology::{cohomology, Character, Cochain, GModule};
use kummerwitt::corpus::{f4, fit_algebras, lift_instances, sign};
use kummerwitt::extensions::{
    extension_from_cocycle, extension_of_torsor, lift_along, obstruction_class, torsor_of_extension,
    GAffineSpace, GModExtension, DEFAULT_ENUMERATION_BOUND,
};
use kummerwitt::kummer::{
    fit_factorization, is_cyclotomic_pair, kummer_identity_check, kummer_instances, lift_with_context,
    smooth_instance_check, CyclotomicData, KummerError, LiftContext,
};
use kummerwitt::linalg::Modulus;
use kummerwitt::witt::{compute_universal_polynomials, CommRing, IntegerPoly, PrimeField, WittRing, WittVector};
use kummerwitt_cli::scoreboard::{f2_modules, obstruction_maps, small_groups};
use num_bigint::BigInt;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "Witt ring W_r(F_p) = Z/p^r", limit: secs(1), run: witt_ring },
        Criterion { id: 2, name: "universal polynomial integrality", limit: secs(5), run: universal_polynomials },
        Criterion { id: 3, name: "Witt structure identities", limit: secs(10), run: structure_identities },
        Criterion { id: 4, name: "cohomology of cyclic groups", limit: secs(60), run: cyclic_cohomology },
        Criterion { id: 5, name: "cyclotomic fixtures", limit: secs(5), run: cyclotomic_fixtures },
        Criterion { id: 6, name: "e1 cup e1 = chi cup e1", limit: secs(30), run: cup_square_identity },
        Criterion { id: 7, name: "Frobenius factorization", limit: secs(5), run: fit_soundness },
        Criterion { id: 8, name: "rank one lifting", limit: secs(120), run: rank_one_lifting },
        Criterion { id: 9, name: "obstruction equivalence", limit: secs(120), run: obstruction_equivalence },
        Criterion { id: 10, name: "torsor dictionary", limit: secs(30), run: torsor_dictionary },
        Criterion { id: 11, name: "B_2 smoothness over C_2", limit: secs(1), run: b2_instance },
        Criterion { id: 12, name: "deterministic corpus --json", limit: None, run: determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let took = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(d), Some(limit)) if took > limit => Err(format!("{d}; took {took:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {:>2} {}: {detail} [{took:.2?}]", c.id, c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {:>2} {}: {msg} [{took:.2?}]", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
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

fn md(p: u64, e: u32) -> Modulus {
    Modulus::prime_power(p, e).expect("prime")
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Every assignment of values to `n` slots such that `ok(prefix)` holds
/// each time a slot is filled. Stops after `limit` solutions.
fn backtrack<V: Clone>(
    n: usize,
    cands: &dyn Fn(usize) -> Vec<V>,
    ok: &dyn Fn(&[V]) -> bool,
    limit: usize,
) -> Vec<Vec<V>> {
    fn go<V: Clone>(
        n: usize,
        cands: &dyn Fn(usize) -> Vec<V>,
        ok: &dyn Fn(&[V]) -> bool,
        limit: usize,
        prefix: &mut Vec<V>,
        out: &mut Vec<Vec<V>>,
    ) {
        if out.len() >= limit {
            return;
        }
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for v in cands(prefix.len()) {
            prefix.push(v);
            if ok(prefix) {
                go(n, cands, ok, limit, prefix, out);
            }
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(n, cands, ok, limit, &mut Vec::new(), &mut out);
    out
}

/// `Z/q` with `g` acting by `x -> u[g] x`, over the elements `elems` of `group`.
struct Line<'a> {
    group: &'a FiniteGroup,
    elems: Vec<usize>,
    q: u64,
    u: Vec<u64>,
}

impl Line<'_> {
    fn pos(&self, g: usize) -> usize {
        self.elems.iter().position(|&x| x == g).expect("closed")
    }

    fn fixed(&self) -> u64 {
        (0..self.q).filter(|&x| self.elems.iter().all(|&g| self.u[g] * x % self.q == x)).count() as u64
    }

    fn cocycles(&self) -> Vec<Vec<u64>> {
        let k = self.elems.len();
        let q = self.q;
        let ok = |z: &[u64]| {
            let i = z.len() - 1;
            (0..=i).all(|a| {
                (0..=i).all(|b| {
                    let ab = self.pos(self.group.mul(self.elems[a], self.elems[b]));
                    ab > i || (a != i && b != i && ab != i) || z[ab] == (z[a] + self.u[self.elems[a]] * z[b]) % q
                })
            })
        };
        backtrack(k, &|_| (0..q).collect(), &ok, usize::MAX)
    }

    fn coboundaries(&self) -> BTreeSet<Vec<u64>> {
        (0..self.q)
            .map(|x| self.elems.iter().map(|&g| (self.u[g] * x + self.q - x) % self.q).collect())
            .collect()
    }

    /// Smallest representative of `z + B^1`.
    fn class_key(&self, z: &[u64], cob: &BTreeSet<Vec<u64>>) -> Vec<u64> {
        cob.iter()
            .map(|b| z.iter().zip(b).map(|(x, y)| (x + y) % self.q).collect::<Vec<_>>())
            .min()
            .expect("nonempty")
    }

    fn h1(&self) -> u64 {
        (self.cocycles().len() / self.coboundaries().len()) as u64
    }

    /// `|H^2|` from normalized cochains: `|Z^2| / |B^2|`.
    fn h2(&self) -> u64 {
        let k = self.elems.len();
        let q = self.q;
        let e = self.pos(self.group.identity());
        let mut due: Vec<Vec<[usize; 3]>> = vec![Vec::new(); k * k];
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    let ab = self.pos(self.group.mul(self.elems[a], self.elems[b]));
                    let bc = self.pos(self.group.mul(self.elems[b], self.elems[c]));
                    let last = [b * k + c, ab * k + c, a * k + bc, a * k + b].into_iter().max().expect("four");
                    due[last].push([a, b, c]);
                }
            }
        }
        let cands = |s: usize| if s / k == e || s % k == e { vec![0] } else { (0..q).collect() };
        let ok = |z: &[u64]| {
            due[z.len() - 1].iter().all(|&[a, b, c]| {
                let ab = self.pos(self.group.mul(self.elems[a], self.elems[b]));
                let bc = self.pos(self.group.mul(self.elems[b], self.elems[c]));
                let lhs = self.u[self.elems[a]] * z[b * k + c] + z[a * k + bc];
                let rhs = z[ab * k + c] + z[a * k + b];
                lhs % q == rhs % q
            })
        };
        let z2 = backtrack(k * k, &cands, &ok, usize::MAX).len();
        let mut b2 = HashSet::new();
        let mut c = vec![0u64; k];
        loop {
            let d: Vec<u64> = (0..k * k)
                .map(|s| {
                    let (a, b) = (s / k, s % k);
                    let ab = self.pos(self.group.mul(self.elems[a], self.elems[b]));
                    (self.u[self.elems[a]] * c[b] + c[a] + q - c[ab]) % q
                })
                .collect();
            b2.insert(d);
            // next normalized cochain, c(e) = 0
            let mut i = 0;
            loop {
                if i == k {
                    return (z2 / b2.len()) as u64;
                }
                if i != e {
                    c[i] += 1;
                    if c[i] < q {
                        break;
                    }
                    c[i] = 0;
                }
                i += 1;
            }
        }
    }
}

/// Subgroups of a small group, by checking every subset.
fn subgroups(g: &FiniteGroup) -> Vec<Vec<usize>> {
    let n = g.order();
    (0u32..1 << n)
        .map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|s| s.contains(&g.identity()) && s.iter().all(|&a| s.iter().all(|&b| s.contains(&g.mul(a, b)))))
        .collect()
}

/// `H^1(H, Z/p^{e+1}(chi)) -> H^1(H, Z/p(chi))` onto for every subgroup `H`.
fn brute_cyclotomic(g: &FiniteGroup, p: u64, big_q: u64, chi: &[u64]) -> bool {
    subgroups(g).into_iter().all(|h| {
        let big = Line { group: g, elems: h.clone(), q: big_q, u: chi.to_vec() };
        let small = Line { group: g, elems: h, q: p, u: chi.iter().map(|x| x % p).collect() };
        let cob = small.coboundaries();
        let all: BTreeSet<_> = small.cocycles().iter().map(|z| small.class_key(z, &cob)).collect();
        let image: BTreeSet<_> = big
            .cocycles()
            .iter()
            .map(|z| small.class_key(&z.iter().map(|x| x % p).collect::<Vec<_>>(), &cob))
            .collect();
        image == all
    })
}

fn witt_ring() -> Outcome {
    let mut rings = 0;
    for p in [2u64, 3, 5] {
        for r in 1..=3usize {
            let w = WittRing::new(PrimeField::new(p).map_err(err)?, r).map_err(err)?;
            let n = p.pow(r as u32) as usize;
            // k -> 1 + 1 + ... + 1
            let mut image = vec![w.zero()];
            for k in 1..n {
                image.push(w.add(&image[k - 1], &w.one()));
            }
            ensure(w.add(&image[n - 1], &w.one()) == w.zero(), || format!("p^r . 1 != 0 for p = {p}, r = {r}"))?;
            let set: HashSet<_> = image.iter().cloned().collect();
            let elems: HashSet<_> = w.elements().into_iter().collect();
            ensure(set.len() == n && set == elems, || format!("not a bijection for p = {p}, r = {r}"))?;
            for a in 0..n {
                for b in 0..n {
                    ensure(w.add(&image[a], &image[b]) == image[(a + b) % n], || format!("sum {a} + {b}"))?;
                    ensure(w.mul(&image[a], &image[b]) == image[a * b % n], || format!("product {a} * {b}"))?;
                }
            }
            rings += 1;
        }
    }
    Ok(format!("{rings} rings checked exhaustively"))
}

fn poly_add(a: &mut IntegerPoly, b: &IntegerPoly, scale: i64) {
    for (e, c) in b {
        let entry = a.entry(e.clone()).or_insert_with(|| BigInt::from(0));
        *entry += c * scale;
    }
    a.retain(|_, c| *c != BigInt::from(0));
}

fn poly_mul(a: &IntegerPoly, b: &IntegerPoly) -> IntegerPoly {
    let mut out = IntegerPoly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *out.entry(e).or_insert_with(|| BigInt::from(0)) += ca * cb;
        }
    }
    out.retain(|_, c| *c != BigInt::from(0));
    out
}

fn poly_pow(a: &IntegerPoly, k: u64, vars: usize) -> IntegerPoly {
    let mut out = IntegerPoly::from([(vec![0; vars], BigInt::from(1))]);
    for _ in 0..k {
        out = poly_mul(&out, a);
    }
    out
}

fn var(i: usize, vars: usize) -> IntegerPoly {
    let mut e = vec![0; vars];
    e[i] = 1;
    IntegerPoly::from([(e, BigInt::from(1))])
}

fn poly_div(a: &IntegerPoly, p: u64) -> Option<IntegerPoly> {
    let p = BigInt::from(p);
    a.iter()
        .map(|(e, c)| (c % &p == BigInt::from(0)).then(|| (e.clone(), c / &p)))
        .collect()
}

fn universal_polynomials() -> Outcome {
    let mut terms = 0;
    for (p, r) in [(2u64, 2usize), (2, 3), (3, 2), (5, 2)] {
        let u = compute_universal_polynomials(p, r).map_err(err)?;
        let vars = 2 * r;
        let (a0, a1, b0, b1) = (var(0, vars), var(1, vars), var(r, vars), var(r + 1, vars));
        // S_1 and P_1 from the first two ghost components
        let mut sum0 = a0.clone();
        poly_add(&mut sum0, &b0, 1);
        let mut s1 = poly_pow(&a0, p, vars);
        poly_add(&mut s1, &poly_pow(&b0, p, vars), 1);
        poly_add(&mut s1, &poly_pow(&sum0, p, vars), -1);
        let mut s1 = poly_div(&s1, p).ok_or("S_1 is not integral")?;
        poly_add(&mut s1, &a1, 1);
        poly_add(&mut s1, &b1, 1);
        ensure(u.addition[1] == s1, || format!("S_1 differs from the ghost derivation for p = {p}, r = {r}"))?;
        let mut p1 = poly_mul(&poly_pow(&a0, p, vars), &b1);
        poly_add(&mut p1, &poly_mul(&a1, &poly_pow(&b0, p, vars)), 1);
        poly_add(&mut p1, &poly_mul(&a1, &b1), p as i64);
        ensure(u.multiplication[1] == p1, || format!("P_1 differs for p = {p}, r = {r}"))?;
        let mut literal = a1.clone();
        poly_add(&mut literal, &b1, 1);
        match p {
            2 => poly_add(&mut literal, &poly_mul(&a0, &b0), -1),
            3 => {
                poly_add(&mut literal, &poly_mul(&poly_mul(&a0, &a0), &b0), -1);
                poly_add(&mut literal, &poly_mul(&a0, &poly_mul(&b0, &b0)), -1);
            }
            _ => literal = s1.clone(),
        }
        ensure(u.addition[1] == literal, || format!("S_1 is not the closed form for p = {p}"))?;
        // ghost identities at integer points, every component
        let ghost = |x: &[i64], n: usize| -> BigInt {
            (0..=n).map(|i| BigInt::from(p).pow(i as u32) * BigInt::from(x[i]).pow(p.pow((n - i) as u32) as u32)).sum()
        };
        let eval = |poly: &IntegerPoly, x: &[i64]| -> BigInt {
            poly.iter()
                .map(|(e, c)| e.iter().zip(x).fold(c.clone(), |acc, (k, v)| acc * BigInt::from(*v).pow(*k)))
                .sum()
        };
        for seed in 0..40i64 {
            let a: Vec<i64> = (0..r as i64).map(|i| (seed * 31 + i * 17) % 13 - 6).collect();
            let b: Vec<i64> = (0..r as i64).map(|i| (seed * 19 + i * 23) % 11 - 5).collect();
            let ab: Vec<i64> = a.iter().chain(&b).copied().collect();
            let s: Vec<i64> = u.addition.iter().map(|q| i64::try_from(eval(q, &ab)).expect("small")).collect();
            let m: Vec<i64> = u.multiplication.iter().map(|q| i64::try_from(eval(q, &ab)).expect("small")).collect();
            for n in 0..r {
                ensure(ghost(&s, n) == ghost(&a, n) + ghost(&b, n), || format!("ghost sum, p = {p}, r = {r}"))?;
                ensure(ghost(&m, n) == ghost(&a, n) * ghost(&b, n), || format!("ghost product, p = {p}, r = {r}"))?;
            }
        }
        terms += u.addition.iter().chain(&u.multiplication).map(|q| q.len()).sum::<usize>();
    }
    Ok(format!("4 parameter pairs, {terms} integer terms"))
}

fn structure_on(alg: &FiniteAlgebra, s: usize) -> Result<usize, String> {
    let p = alg.p();
    let w = WittRing::new(alg.clone(), s).map_err(err)?;
    let elems = w.elements();
    let frob = |x: &WittVector<Vec<u64>>| w.vector(x.components.iter().map(|a| alg.pow(a, p)).collect()).expect("len");
    let ver = |x: &WittVector<Vec<u64>>| {
        let mut c = vec![alg.zero()];
        c.extend(x.components[..s - 1].iter().cloned());
        w.vector(c).expect("len")
    };
    for x in &elems {
        let px = (1..p).fold(x.clone(), |acc, _| w.add(&acc, x));
        ensure(frob(&ver(x)) == px && ver(&frob(x)) == px, || format!("FV or VF differs from p on {x:?}"))?;
    }
    for r in 1..s {
        let wr = WittRing::new(alg.clone(), r).map_err(err)?;
        let sub = WittRing::new(alg.clone(), s - r).map_err(err)?;
        let trunc = |x: &WittVector<Vec<u64>>| wr.vector(x.components[..r].to_vec()).expect("len");
        let shift = |x: &WittVector<Vec<u64>>| {
            let mut c = vec![alg.zero(); r];
            c.extend(x.components.iter().cloned());
            w.vector(c).expect("len")
        };
        let sub_elems = sub.elements();
        let image: HashSet<_> = sub_elems.iter().map(shift).collect();
        ensure(image.len() == sub_elems.len(), || format!("V^{r} is not injective"))?;
        for x in &sub_elems {
            for y in &sub_elems {
                ensure(shift(&sub.add(x, y)) == w.add(&shift(x), &shift(y)), || format!("V^{r} is not additive"))?;
            }
        }
        let kernel: HashSet<_> = elems.iter().filter(|x| trunc(x) == wr.zero()).cloned().collect();
        ensure(kernel == image, || format!("ker(W_{s} -> W_{r}) differs from the image of V^{r}"))?;
        let onto: HashSet<_> = elems.iter().map(trunc).collect();
        ensure(onto.len() == wr.elements().len(), || format!("W_{s} -> W_{r} is not onto"))?;
        for x in &elems {
            for y in &elems {
                ensure(trunc(&w.add(x, y)) == wr.add(&trunc(x), &trunc(y)), || "truncation is not additive".into())?;
                ensure(trunc(&w.mul(x, y)) == wr.mul(&trunc(x), &trunc(y)), || "truncation is not multiplicative".into())?;
            }
        }
    }
    Ok(elems.len())
}

fn structure_identities() -> Outcome {
    let a = structure_on(&f4(), 3)?;
    let b = structure_on(&FiniteAlgebra::truncated_poly(2, 2).map_err(err)?, 2)?;
    Ok(format!("|W_3(F_4)| = {a}, |W_2(F_2[x]/(x^2))| = {b}, exhaustive"))
}

fn cyclic_cohomology() -> Outcome {
    let mut cases = 0;
    for m in 1..=4usize {
        let g = Arc::new(FiniteGroup::cyclic(m));
        let gen = g.cyclic_generator().ok_or("no generator")?;
        for p in [2u64, 3] {
            for r in 1..=2u32 {
                let q = p.pow(r);
                let units: Vec<u64> =
                    (1..q).filter(|&u| gcd(u, q) == 1 && (0..m).fold(1, |acc, _| acc * u % q) == 1 % q).collect();
                ensure(units.len() == Character::all(g.clone(), md(p, r)).len(), || "character count".into())?;
                for u in units {
                    let mut values = vec![0; m];
                    for k in 0..m {
                        values[g.pow(gen, k)] = (0..k).fold(1, |acc, _| acc * u % q);
                    }
                    let line = Line { group: &g, elems: (0..m).collect(), q, u: values };
                    let brute = [line.fixed(), line.h1(), line.h2()];
                    let chi = Character::from_generators(g.clone(), md(p, r), &[(gen, u)]).map_err(err)?;
                    let module = GModule::cyclic_twist(g.clone(), md(p, r), r, &chi, 1).map_err(err)?;
                    for (n, expected) in brute.into_iter().enumerate() {
                        let got = cohomology(&module, n).map_err(err)?.order();
                        ensure(got == expected as u128, || {
                            format!("H^{n}(C_{m}, Z/{q}({u})) = {got}, enumeration gives {expected}")
                        })?;
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{cases} orders agree with cocycle enumeration"))
}

fn cyclotomic_fixtures() -> Outcome {
    let c2 = Arc::new(FiniteGroup::cyclic(2));
    let chi = sign(&c2, md(2, 2));
    ensure(brute_cyclotomic(&c2, 2, 4, chi.values()), || "enumeration: C_2 sign mod 4 fails".into())?;
    let rep = is_cyclotomic_pair(&CyclotomicData::new(chi, 1).map_err(err)?).map_err(err)?;
    ensure(rep.cyclotomic, || "C_2 with sign mod 4 is rejected".into())?;
    for p in [2u64, 3, 5] {
        let g = Arc::new(FiniteGroup::cyclic(p as usize));
        let chi = Character::trivial(g.clone(), md(p, 2));
        ensure(!brute_cyclotomic(&g, p, p * p, chi.values()), || format!("enumeration: C_{p} trivial passes"))?;
        let rep = is_cyclotomic_pair(&CyclotomicData::new(chi.clone(), 1).map_err(err)?).map_err(err)?;
        ensure(!rep.cyclotomic, || format!("C_{p} with trivial mod p^2 is accepted"))?;
        let fail = rep.first_failure().ok_or("no failing subgroup reported")?;
        ensure(fail.subgroup.len() == p as usize && fail.witness == Some(vec![1]), || {
            format!("C_{p}: witness {:?} on {:?}", fail.witness, fail.subgroup)
        })?;
        // the witness class is missed by the reduction
        let small = GModule::cyclic_twist(g.clone(), md(p, 2), 1, &chi, 1).map_err(err)?;
        let h1 = cohomology(&small, 1).map_err(err)?;
        let w = h1.representative(&[1]);
        let line = Line { group: &g, elems: (0..p as usize).collect(), q: p, u: vec![1; p as usize] };
        let cob = line.coboundaries();
        let z: Vec<u64> = w.values.iter().map(|v| small.canonical(v)[0] % p).collect();
        let big = Line { group: &g, elems: line.elems.clone(), q: p * p, u: line.u.clone() };
        let hit = big.cocycles().iter().any(|c| {
            line.class_key(&c.iter().map(|x| x % p).collect::<Vec<_>>(), &cob) == line.class_key(&z, &cob)
        });
        ensure(!hit, || format!("C_{p}: the witness lies in the image"))?;
    }
    let c3 = Arc::new(FiniteGroup::cyclic(3));
    let mut c3_cases = 0;
    for e in 2..=3 {
        for chi in Character::all(c3.clone(), md(2, e)) {
            ensure(brute_cyclotomic(&c3, 2, 1 << e, chi.values()), || "enumeration: C_3 fails".into())?;
            let rep = is_cyclotomic_pair(&CyclotomicData::new(chi, 1).map_err(err)?).map_err(err)?;
            ensure(rep.cyclotomic, || "C_3 with p = 2 is rejected".into())?;
            c3_cases += 1;
        }
    }
    Ok(format!("sign mod 4 passes, C_2/C_3/C_5 trivial fail with witness [1], {c3_cases} C_3 characters pass"))
}

fn cup_square_identity() -> Outcome {
    let mut total = 0;
    for (name, g) in small_groups() {
        let n = g.order();
        let all = || 0..n;
        let f2 = GModule::trivial_cyclic(g.clone(), md(2, 2), 1).map_err(err)?;
        let h1 = cohomology(&f2, 1).map_err(err)?;
        // B^2(G, F_2)
        let mut b2 = HashSet::new();
        for mask in 0u32..1 << n {
            let c = |x: usize| (mask >> x & 1) as u64;
            let d: Vec<u64> = (0..n * n).map(|s| (c(s / n) + c(s % n) + c(g.mul(s / n, s % n))) % 2).collect();
            b2.insert(d);
        }
        let mut brute = BTreeSet::new();
        let mut classes = 0;
        for mask in 0u32..1 << n {
            let chi: Vec<u64> = all().map(|x| if mask >> x & 1 == 1 { 3 } else { 1 }).collect();
            if !all().all(|a| all().all(|b| chi[g.mul(a, b)] == chi[a] * chi[b] % 4)) {
                continue;
            }
            let line = Line { group: &g, elems: all().collect(), q: 4, u: chi.clone() };
            let cocycles = line.cocycles();
            classes += cocycles.len() / line.coboundaries().len();
            let x: Vec<u64> = chi.iter().map(|&v| u64::from(v == 3)).collect();
            for z in &cocycles {
                let e: Vec<u64> = z.iter().map(|v| v % 2).collect();
                let diff: Vec<u64> = (0..n * n).map(|s| (e[s / n] * e[s % n] + x[s / n] * e[s % n]) % 2).collect();
                ensure(b2.contains(&diff), || format!("{name}: e.e - chi.e is not a coboundary for z = {z:?}"))?;
                let class = h1
                    .class_of(&Cochain { degree: 1, values: e.iter().map(|&v| vec![v]).collect() })
                    .map_err(err)?;
                brute.insert((chi.clone(), class));
            }
        }
        let instances = kummer_instances(&g).map_err(err)?;
        ensure(instances.len() == classes, || format!("{name}: {} instances, enumeration finds {classes}", instances.len()))?;
        let mut found = BTreeSet::new();
        for (chi, e1, ext) in &instances {
            let id = kummer_identity_check(e1, chi, ext).map_err(err)?;
            ensure(id.holds && id.square == id.twisted, || format!("{name}: identity fails for {:?}", chi.values()))?;
            found.insert((chi.values().to_vec(), e1.clone()));
        }
        ensure(found == brute, || format!("{name}: reduced classes differ from enumeration"))?;
        total += instances.len();
    }
    Ok(format!("{total} instances over 5 groups of order <= 4"))
}

fn vec_mat(p: u64, v: &[u64], rows: &[Vec<u64>]) -> Vec<u64> {
    let cols = rows.first().map_or(0, Vec::len);
    (0..cols).map(|j| v.iter().zip(rows).map(|(x, r)| x * r[j]).sum::<u64>() % p).collect()
}

fn fit_soundness() -> Outcome {
    let mut ms = Vec::new();
    for inst in fit_algebras() {
        let (alg, action) = (&inst.algebra, &inst.action);
        let p = alg.p();
        let d = alg.dim();
        let fit = fit_factorization(alg, action).map_err(err)?;
        let (f, gm) = (fit.f.row_vecs(), fit.g.row_vecs());
        let perms = fit.set.permutations();
        let q = p.pow(fit.m);
        for i in 0..d {
            let b = alg.basis_vector(i);
            ensure(vec_mat(p, &vec_mat(p, &b, &f), &gm) == alg.pow(&b, q), || format!("{}: g f != Frob^m", inst.name))?;
        }
        for h in action.group().elements() {
            let permute = |v: &[u64]| {
                let mut out = vec![0; v.len()];
                for (x, &c) in v.iter().enumerate() {
                    out[perms[h][x]] = c;
                }
                out
            };
            for i in 0..d {
                let b = alg.basis_vector(i);
                ensure(vec_mat(p, &action.apply(h, &b), &f) == permute(&vec_mat(p, &b, &f)), || {
                    format!("{}: f is not equivariant", inst.name)
                })?;
            }
            for (x, row) in gm.iter().enumerate() {
                ensure(gm[perms[h][x]] == action.apply(h, row), || format!("{}: g is not equivariant", inst.name))?;
            }
        }
        // nilradical by brute force, then the index of N^k = 0
        let elems = alg.elements();
        let nil: Vec<Vec<u64>> = elems.iter().filter(|a| alg.pow(a, d as u64) == alg.zero()).cloned().collect();
        let mut power: HashSet<Vec<u64>> = nil.iter().cloned().collect();
        let mut k = 1u64;
        while power.iter().any(|x| *x != alg.zero()) {
            let mut next: HashSet<Vec<u64>> = HashSet::from([alg.zero()]);
            let prods: HashSet<Vec<u64>> = power.iter().flat_map(|x| nil.iter().map(|y| alg.mul(x, y))).collect();
            for y in prods {
                let snapshot: Vec<_> = next.iter().cloned().collect();
                for x in snapshot {
                    let mut s = x.clone();
                    for _ in 1..p {
                        s = alg.add(&s, &y);
                        next.insert(s.clone());
                    }
                }
            }
            power = next;
            k += 1;
        }
        let minimum = (0..).find(|&m| p.pow(m) >= k).expect("finite");
        ensure(fit.m == minimum, || format!("{}: m = {}, N^{k} = 0 needs {minimum}", inst.name, fit.m))?;
        ms.push(format!("{}: {}", inst.name, fit.m));
    }
    Ok(format!("m = [{}]", ms.join(", ")))
}

/// Every 1-cocycle `z` with `z(g)` drawn from `cands(g)`.
fn module_cocycles(m: &GModule, cands: &dyn Fn(usize) -> Vec<Vec<u64>>, limit: usize) -> Vec<Vec<Vec<u64>>> {
    let g = m.group();
    let ok = |z: &[Vec<u64>]| {
        let i = z.len() - 1;
        (0..=i).all(|a| {
            (0..=i).all(|b| {
                let ab = g.mul(a, b);
                ab > i || (a != i && b != i && ab != i) || m.equal(&z[ab], &m.add(&z[a], &m.act(a, &z[b])))
            })
        })
    };
    backtrack(g.order(), cands, &ok, limit)
}

/// Whether `d(g) = g x - x` for some `x`.
fn is_coboundary(m: &GModule, d: &[Vec<u64>]) -> bool {
    m.elements().iter().any(|x| m.group().elements().all(|g| m.equal(&d[g], &m.sub(&m.act(g, x), x))))
}

fn rank_one_lifting() -> Outcome {
    let (mut lifted, mut accepted, mut rejected) = (0, 0, 0);
    for inst in lift_instances() {
        let g = inst.chi.group().clone();
        let p = inst.chi.modulus().p();
        let brute = brute_cyclotomic(&g, p, inst.chi.modulus().value(), inst.chi.values());
        let data = CyclotomicData::new(inst.chi.clone(), 1).map_err(err)?;
        let (alg, action) = (&inst.instance.algebra, &inst.instance.action);
        let ctx = match LiftContext::new(&data, alg, action) {
            Ok(ctx) => ctx,
            Err(KummerError::NotCyclotomic { .. }) => {
                ensure(!brute, || format!("{}: rejected but cyclotomic by enumeration", inst.name))?;
                rejected += 1;
                continue;
            }
            Err(e) => return Err(format!("{}: {e}", inst.name)),
        };
        ensure(brute, || format!("{}: accepted but not cyclotomic by enumeration", inst.name))?;
        accepted += 1;
        let m_a = fit_factorization(alg, action).map_err(err)?.m;
        let top = ctx.level(data.e as usize + 1);
        for r in 1..=data.e as usize {
            let wr = ctx.level(r);
            let h = cohomology(&wr.module, 1).map_err(err)?;
            let all = wr.module.elements();
            let z1 = module_cocycles(&wr.module, &|_| all.clone(), usize::MAX).len();
            let b1: HashSet<Vec<Vec<u64>>> = all
                .iter()
                .map(|x| g.elements().map(|s| wr.module.canonical(&wr.module.sub(&wr.module.act(s, x), x))).collect())
                .collect();
            ensure(h.order() == (z1 / b1.len()) as u128, || format!("{}: |H^1| differs from enumeration", inst.name))?;
            for coords in h.all_classes() {
                let c = h.representative(&coords);
                let rep = lift_with_context(&ctx, r, &c).map_err(err)?;
                let z = &rep.lift.values;
                let tm = &top.module;
                let cocycle = g.elements().all(|a| g.elements().all(|b| tm.equal(&z[g.mul(a, b)], &tm.add(&z[a], &tm.act(a, &z[b])))));
                ensure(cocycle, || format!("{}: lift of {coords:?} is not a cocycle", inst.name))?;
                let ring = wr.ring();
                let diff: Vec<Vec<u64>> = g
                    .elements()
                    .map(|s| {
                        let w = top.to_witt(&z[s]);
                        let t = wr.from_witt(&wr.ring().vector(w.components[..r].to_vec()).expect("length r"));
                        let pulled = (0..rep.m).fold(wr.to_witt(&c.values[s]), |x, _| ring.map_components(&x, |a| alg.pow(a, p)));
                        wr.module.sub(&t, &wr.from_witt(&pulled))
                    })
                    .collect();
                ensure(is_coboundary(&wr.module, &diff), || {
                    format!("{}: truncated lift of {coords:?} is not Frob^{}-pullback", inst.name, rep.m)
                })?;
                ensure(rep.m <= m_a * r as u32, || format!("{}: m = {} > {m_a} * {r}", inst.name, rep.m))?;
                lifted += 1;
            }
        }
    }
    Ok(format!("{lifted} classes lifted over {accepted} cyclotomic instances, {rejected} rejected"))
}

fn obstruction_equivalence() -> Outcome {
    let (mut cocycles, mut liftable, mut maps) = (0, 0, 0);
    for (name, q) in obstruction_maps() {
        let (big, small) = (q.source(), q.target());
        ensure(big.order() <= 81 && big.group().order() <= 4, || format!("{name}: outside the bounds"))?;
        let mut fibers: HashMap<Vec<u64>, Vec<Vec<u64>>> = HashMap::new();
        for x in big.elements() {
            fibers.entry(small.canonical(&q.apply(&x))).or_default().push(x);
        }
        let all = small.elements();
        for c in module_cocycles(small, &|_| all.clone(), usize::MAX) {
            let cands = |g: usize| fibers.get(&small.canonical(&c[g])).cloned().unwrap_or_default();
            let brute = !module_cocycles(big, &cands, 1).is_empty();
            let cochain = Cochain { degree: 1, values: c.clone() };
            let obs = obstruction_class(&q, &cochain).map_err(err)?;
            let lift = lift_along(&q, &cochain).map_err(err)?;
            ensure(obs.vanishes() == brute && lift.is_some() == brute, || {
                format!("{name}: c = {c:?}, obstruction vanishes = {}, lift exists = {brute}", obs.vanishes())
            })?;
            cocycles += 1;
            liftable += usize::from(brute);
        }
        maps += 1;
    }
    Ok(format!("{maps} maps, {cocycles} cocycles, {liftable} liftable"))
}

/// Images of the basis of an `F_2`-module as bit masks.
fn bits(v: &[u64]) -> u32 {
    v.iter().enumerate().fold(0, |acc, (i, &x)| acc | ((x as u32 & 1) << i))
}

fn f2_free(m: &GModule) -> Result<usize, String> {
    let k = m.rank();
    ensure(m.modulus().value() == 2 && m.order() == 1 << k, || "expected a free F_2-module".into())?;
    Ok(k)
}

fn apply_bits(rows: &[u32], v: u32) -> u32 {
    rows.iter().enumerate().filter(|(i, _)| v >> i & 1 == 1).fold(0, |acc, (_, r)| acc ^ r)
}

/// Automorphisms of `0 -> B -> E -> A -> 0` by exhaustive search over the
/// maps `e_j -> e_j + i(b_j)`.
fn brute_automorphisms(ext: &GModExtension) -> Result<usize, String> {
    let (mid, sub) = (ext.mid(), ext.sub());
    let k = f2_free(mid)?;
    let kb = f2_free(sub)?;
    let unit = |i: usize| (0..k).map(|j| u64::from(i == j)).collect::<Vec<_>>();
    let acts: Vec<Vec<u32>> = mid.group().elements().map(|g| (0..k).map(|i| bits(&mid.act(g, &unit(i)))).collect()).collect();
    let sub_images: Vec<u32> = (0..kb)
        .map(|i| bits(&mid.canonical(&ext.inj().apply(&(0..kb).map(|j| u64::from(i == j)).collect::<Vec<_>>()))))
        .collect();
    let offsets: Vec<u32> = (0u32..1 << kb).map(|b| apply_bits(&sub_images, b)).collect();
    let mut count = 0;
    let mut choice = vec![0usize; k];
    loop {
        let rows: Vec<u32> = (0..k).map(|j| (1 << j) ^ offsets[choice[j]]).collect();
        let fixes_sub = sub_images.iter().all(|&s| apply_bits(&rows, s) == s);
        let equivariant = || acts.iter().all(|a| (0..k).all(|j| apply_bits(&rows, a[j]) == apply_bits(a, rows[j])));
        let bijective = || (0u32..1 << k).map(|v| apply_bits(&rows, v)).collect::<HashSet<_>>().len() == 1 << k;
        if fixes_sub && equivariant() && bijective() {
            count += 1;
        }
        let mut j = 0;
        loop {
            if j == k {
                return Ok(count);
            }
            choice[j] += 1;
            if choice[j] < offsets.len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
    }
}

/// An isomorphism of torsors is fixed by the image of one point.
fn brute_torsor_iso(x: &GAffineSpace, y: &GAffineSpace) -> bool {
    if x.translations() != y.translations() || x.len() != y.len() || x.is_empty() {
        return false;
    }
    let nv = x.vectors().len();
    let g = x.translations().group();
    (0..y.len()).any(|y0| {
        let mut phi = vec![usize::MAX; x.len()];
        for v in 0..nv {
            phi[x.translate(0, v)] = y.translate(y0, v);
        }
        phi.iter().all(|&t| t != usize::MAX) && g.elements().all(|s| (0..x.len()).all(|p| phi[x.act(s, p)] == y.act(s, phi[p])))
    })
}

fn torsor_dictionary() -> Outcome {
    let (mut round_trips, mut counts) = (0, 0);
    let modules = f2_modules();
    for (name, b) in &modules {
        let all = b.elements();
        for z in module_cocycles(b, &|_| all.clone(), usize::MAX) {
            let cochain = Cochain { degree: 1, values: z.clone() };
            let ext = extension_from_cocycle(b, &cochain).map_err(err)?;
            let x = torsor_of_extension(&ext).map_err(err)?;
            let back = extension_of_torsor(&x).map_err(err)?;
            let y = torsor_of_extension(&back).map_err(err)?;
            ensure(brute_torsor_iso(&x, &y), || format!("{name}: z = {z:?} does not round trip"))?;
            // the torsor's cocycle g -> g(x_0) - x_0 is cohomologous to z
            let t: Vec<Vec<u64>> =
                b.group().elements().map(|g| x.vectors()[x.difference(x.act(g, 0), 0)].clone()).collect();
            let d: Vec<Vec<u64>> = t.iter().zip(&z).map(|(a, c)| b.sub(a, c)).collect();
            ensure(is_coboundary(b, &d), || format!("{name}: torsor class differs from z = {z:?}"))?;
            let found = ext.automorphisms().map_err(err)?.len();
            let brute = brute_automorphisms(&ext)?;
            ensure(found == brute, || format!("{name}: {found} automorphisms, search finds {brute}"))?;
            round_trips += 1;
            counts += 1;
        }
    }
    for (na, a) in &modules {
        for (nb, b) in &modules {
            if a.group() != b.group() {
                continue;
            }
            let ext = GModExtension::split(b, a).map_err(err)?;
            let found = ext.automorphisms().map_err(err)?.len();
            let brute = brute_automorphisms(&ext)?;
            ensure(found == brute, || format!("{nb} + {na}: {found} automorphisms, search finds {brute}"))?;
            counts += 1;
        }
    }
    Ok(format!("{round_trips} round trips, {counts} automorphism counts"))
}

type Upper = [u64; 3];

fn upper_mul(x: Upper, y: Upper, q: u64) -> Upper {
    [x[0] * y[0] % q, (x[0] * y[1] + x[1] * y[2]) % q, x[2] * y[2] % q]
}

/// Twisted-conjugacy classes of `H^1(C_2, B(Z/q))` with trivial action.
fn borel_classes(q: u64) -> Vec<BTreeSet<Upper>> {
    let units: Vec<u64> = (1..q).filter(|&u| gcd(u, q) == 1).collect();
    let mut group: Vec<Upper> = Vec::new();
    for &a in &units {
        for b in 0..q {
            for &d in &units {
                group.push([a, b, d]);
            }
        }
    }
    let inv = |x: Upper| *group.iter().find(|y| upper_mul(x, **y, q) == [1, 0, 1]).expect("group");
    let cocycles: Vec<Upper> = group.iter().copied().filter(|&m| upper_mul(m, m, q) == [1, 0, 1]).collect();
    let mut classes: Vec<BTreeSet<Upper>> = Vec::new();
    for m in cocycles {
        if classes.iter().any(|c| c.contains(&m)) {
            continue;
        }
        classes.push(group.iter().map(|&b| upper_mul(upper_mul(inv(b), m, q), b, q)).collect());
    }
    classes
}

fn b2_instance() -> Outcome {
    let big = borel_classes(4);
    let small = borel_classes(2);
    let reduce = |x: Upper| [x[0] % 2, x[1] % 2, x[2] % 2];
    let onto = small.iter().all(|c| big.iter().any(|b| b.iter().any(|&m| c.contains(&reduce(m)))));
    ensure(onto, || "enumeration: reduction is not onto".into())?;
    let g = FiniteGroup::cyclic(2);
    let f2 = FiniteAlgebra::prime_field(2).map_err(err)?;
    let action = AlgebraAction::trivial(Arc::new(g.clone()), &f2);
    let red = smooth_instance_check(&g, &f2, &action, DEFAULT_ENUMERATION_BOUND).map_err(err)?;
    ensure(red.surjective, || "reduction reported not onto".into())?;
    ensure(red.source_classes == big.len() && red.target_classes == small.len(), || {
        format!("{} -> {} classes, enumeration gives {} -> {}", red.source_classes, red.target_classes, big.len(), small.len())
    })?;
    // W_2(F_2) = Z/4 by (x_0, x_1) -> x_0 + 2 x_1
    let int = |w: &WittVector<Vec<u64>>| (w.components[0][0] + 2 * w.components[1][0]) % 4;
    let mut witnesses = BTreeSet::new();
    for w in red.witnesses.iter().flatten() {
        let s = &w[1];
        let m = [int(&s.a), int(&s.b), int(&s.d)];
        ensure(upper_mul(m, m, 4) == [1, 0, 1], || format!("witness {m:?} does not square to 1 mod 4"))?;
        witnesses.insert(m);
    }
    ensure(witnesses.contains(&[1, 1, 3]), || format!("witnesses {witnesses:?} lack [[1, 1], [0, 3]]"))?;
    Ok(format!("{} -> {} classes, witnesses {witnesses:?}", big.len(), small.len()))
}

fn determinism() -> Outcome {
    let run = || -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_kummerwitt")).args(["corpus", "--json"]).output().map_err(err)?;
        ensure(out.status.success(), || format!("corpus exited with {}", out.status))?;
        Ok(out.stdout)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "two runs differ".into())?;
    let doc: serde_json::Value = serde_json::from_slice(&a).map_err(err)?;
    ensure(kummerwitt_cli::report::check_seal(&doc), || "run_hash does not match".into())?;
    let hash = doc["run_hash"].as_str().unwrap_or_default().chars().take(12).collect::<String>();
    Ok(format!("{} identical bytes, run_hash {hash}...", a.len()))
}
