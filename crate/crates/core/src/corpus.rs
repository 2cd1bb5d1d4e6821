//! Small named instances shared by the command line front-end and tests.

use std::sync::Arc;

use crate::algebra::{AlgebraAction, FiniteAlgebra, FiniteGroup};
use crate::cohomology::Character;
use crate::linalg::Modulus;

/// A group acting on a finite algebra.
#[derive(Clone, Debug)]
pub struct AlgebraInstance {
    pub name: &'static str,
    pub group: Arc<FiniteGroup>,
    pub algebra: FiniteAlgebra,
    pub action: AlgebraAction,
}

/// An algebra instance with a character `G -> (Z/p^{e+1})^*`.
#[derive(Clone, Debug)]
pub struct LiftInstance {
    pub name: &'static str,
    pub instance: AlgebraInstance,
    pub chi: Character,
}

fn cyclic(n: usize) -> Arc<FiniteGroup> {
    Arc::new(FiniteGroup::cyclic(n))
}

fn frobenius_action(group: &Arc<FiniteGroup>, alg: &FiniteAlgebra) -> AlgebraAction {
    AlgebraAction::from_generators(group.clone(), alg, &[(1, alg.frobenius_matrix())]).expect("Frobenius generates")
}

fn factor_action(group: &Arc<FiniteGroup>, factor: &FiniteAlgebra, powers: &[u32]) -> (FiniteAlgebra, AlgebraAction) {
    let factors = vec![factor.clone(), factor.clone()];
    let alg = FiniteAlgebra::product(&factors).expect("product");
    let m = AlgebraAction::factor_matrix(&factors, &[1, 0], powers).expect("swap");
    let action = AlgebraAction::from_generators(group.clone(), &alg, &[(1, m)]).expect("involution");
    (alg, action)
}

fn instance(name: &'static str, group: Arc<FiniteGroup>, algebra: FiniteAlgebra, action: AlgebraAction) -> AlgebraInstance {
    AlgebraInstance {
        name,
        group,
        algebra,
        action,
    }
}

fn trivial(name: &'static str, group: Arc<FiniteGroup>, algebra: FiniteAlgebra) -> AlgebraInstance {
    let action = AlgebraAction::trivial(group.clone(), &algebra);
    instance(name, group, algebra, action)
}

pub fn f4() -> FiniteAlgebra {
    FiniteAlgebra::finite_field(2, &[1, 1, 1]).expect("irreducible")
}

pub fn f8() -> FiniteAlgebra {
    FiniteAlgebra::finite_field(2, &[1, 1, 0, 1]).expect("irreducible")
}

pub fn f9() -> FiniteAlgebra {
    FiniteAlgebra::finite_field(3, &[1, 0, 1]).expect("irreducible")
}

/// The eight algebras used for Frobenius factorization.
pub fn fit_algebras() -> Vec<AlgebraInstance> {
    let c2 = cyclic(2);
    let f2 = FiniteAlgebra::prime_field(2).expect("prime");
    let (f2xf2, swap) = factor_action(&c2, &f2, &[0, 0]);
    let (f4xf4, swap_frob) = factor_action(&c2, &f4(), &[1, 1]);
    vec![
        trivial("F_3", c2.clone(), FiniteAlgebra::prime_field(3).expect("prime")),
        instance("F_4", c2.clone(), f4(), frobenius_action(&c2, &f4())),
        instance("F_8", cyclic(3), f8(), frobenius_action(&cyclic(3), &f8())),
        instance("F_9", c2.clone(), f9(), frobenius_action(&c2, &f9())),
        trivial("F_2[x]/(x^2)", cyclic(1), FiniteAlgebra::truncated_poly(2, 2).expect("prime")),
        trivial("F_3[x]/(x^3)", cyclic(1), FiniteAlgebra::truncated_poly(3, 3).expect("prime")),
        instance("F_2 x F_2", c2.clone(), f2xf2, swap),
        instance("F_4 x F_4", c2, f4xf4, swap_frob),
    ]
}

/// `-1` on the generator of a cyclic group.
pub fn sign(group: &Arc<FiniteGroup>, md: Modulus) -> Character {
    let g = group.cyclic_generator().expect("cyclic");
    Character::from_generators(group.clone(), md, &[(g, md.value() - 1)]).expect("order two")
}

/// Instances for lifting, including pairs that fail the cyclotomic check.
pub fn lift_instances() -> Vec<LiftInstance> {
    let md = |p: u64, e: u32| Modulus::prime_power(p, e).expect("prime");
    let c2 = cyclic(2);
    let c3 = cyclic(3);
    let f2 = FiniteAlgebra::prime_field(2).expect("prime");
    let dual = FiniteAlgebra::truncated_poly(2, 2).expect("prime");
    let (f2xf2, swap) = factor_action(&c2, &f2, &[0, 0]);
    let (f4xf4, swap_frob) = factor_action(&c2, &f4(), &[1, 1]);
    let lift = |name, instance, chi| LiftInstance { name, instance, chi };
    vec![
        lift("C_2 sign mod 4 on F_2", trivial("F_2", c2.clone(), f2.clone()), sign(&c2, md(2, 2))),
        lift("C_2 sign mod 4 on F_2[x]/(x^2)", trivial("F_2[x]/(x^2)", c2.clone(), dual.clone()), sign(&c2, md(2, 2))),
        lift("C_2 sign mod 4 on F_4", instance("F_4", c2.clone(), f4(), frobenius_action(&c2, &f4())), sign(&c2, md(2, 2))),
        lift("C_2 sign mod 4 on F_2 x F_2", instance("F_2 x F_2", c2.clone(), f2xf2, swap), sign(&c2, md(2, 2))),
        lift("C_2 sign mod 4 on F_4 x F_4", instance("F_4 x F_4", c2.clone(), f4xf4, swap_frob), sign(&c2, md(2, 2))),
        lift("C_2 sign mod 8 on F_2", trivial("F_2", c2.clone(), f2.clone()), sign(&c2, md(2, 3))),
        lift("C_2 sign mod 8 on F_2[x]/(x^2)", trivial("F_2[x]/(x^2)", c2.clone(), dual), sign(&c2, md(2, 3))),
        lift("C_2 sign mod 8 on F_4", trivial("F_4", c2.clone(), f4()), sign(&c2, md(2, 3))),
        lift("C_3 trivial mod 4 on F_8", instance("F_8", c3.clone(), f8(), frobenius_action(&c3, &f8())), Character::trivial(c3.clone(), md(2, 2))),
        lift("C_2 sign mod 9 on F_9", instance("F_9", c2.clone(), f9(), frobenius_action(&c2, &f9())), sign(&c2, md(3, 2))),
        lift("C_2 sign mod 9 on F_3[x]/(x^3)", trivial("F_3[x]/(x^3)", c2.clone(), FiniteAlgebra::truncated_poly(3, 3).expect("prime")), sign(&c2, md(3, 2))),
        lift("C_2 trivial mod 4 on F_2", trivial("F_2", c2.clone(), f2), Character::trivial(c2, md(2, 2))),
    ]
}
