//! Cyclotomic pairs, Frobenius factorization through permutation modules,
//! and lifting of `H^1` classes with Witt vector coefficients.

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{AlgebraAction, AlgebraError, FiniteAlgebra, FiniteGroup, PermutationGSet, Subgroup};
use crate::cohomology::{
    cohomology, cup_product, inflate_cochain, map_cochain, wittmod_from_algebra, Character, ClassHom,
    Cochain, CohomologyError, GMap, GModule, Pairing, Shapiro, WittModule,
};
use crate::extensions::{
    b2_reduction_surjective, BorelReduction, BorelRing, ExtensionError, GModExtension,
};
use crate::linalg::{all_coordinates, kernel_basis, LinearSolver, Modulus, ResidueMatrix};
use crate::witt::{truncate, CommRing, WittRing, WittVector};

/// Largest group handled by the subgroup scans.
pub const DEFAULT_GROUP_BOUND: usize = 64;
/// Largest residue field scanned for a normal basis generator.
pub const NORMAL_BASIS_BOUND: u128 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KummerError {
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("{what} of size {size} exceeds bound {bound}")]
    BoundExceeded { what: &'static str, size: u128, bound: u128 },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("the pair is not cyclotomic: subgroup {subgroup:?} misses class {class:?}")]
    NotCyclotomic { subgroup: Vec<usize>, class: Vec<u64> },
    #[error("line bundle is not free: {0}")]
    NonFreeLineBundle(String),
    #[error("the lifted extension does not reduce to the given class")]
    ReductionMismatch,
    #[error("internal solve failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, KummerError>;

/// A group with a character `chi: G -> (Z/p^{e+1})^*`, depth `e` and degree `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclotomicData {
    pub group: Arc<FiniteGroup>,
    pub p: u64,
    pub e: u32,
    pub n: usize,
    pub chi: Character,
}

impl CyclotomicData {
    pub fn new(chi: Character, n: usize) -> Result<Self> {
        let md = chi.modulus();
        if md.exponent() < 1 {
            return Err(KummerError::InvalidData("character modulus must be p^(e+1)".into()));
        }
        Ok(CyclotomicData {
            group: chi.group().clone(),
            p: md.p(),
            e: md.exponent() - 1,
            n,
            chi,
        })
    }

    pub fn modulus(&self) -> Modulus {
        self.chi.modulus()
    }

    /// The same data with `chi` reduced mod `p^f`.
    pub fn reduce(&self, f: u32) -> Result<Self> {
        if f == 0 || f > self.e + 1 {
            return Err(KummerError::InvalidData(format!("cannot reduce to p^{f}")));
        }
        Self::new(self.chi.reduce(f), self.n)
    }

    /// `Z/p^a(chi^n)` over `Z/p^{e+1}`.
    pub fn twist_module(&self, a: u32) -> Result<GModule> {
        Ok(GModule::cyclic_twist(self.group.clone(), self.modulus(), a, &self.chi, self.n as i64)?)
    }
}

/// Surjectivity of `H^n(H, T^n) -> H^n(H, (T/p)^n)` for one subgroup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupReport {
    pub subgroup: Vec<usize>,
    pub source_order: u128,
    pub target_order: u128,
    pub image_order: u128,
    pub surjective: bool,
    /// A class of `H^n(H, (T/p)^n)` outside the image.
    pub witness: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclotomicReport {
    pub cyclotomic: bool,
    pub subgroups: Vec<SubgroupReport>,
}

impl CyclotomicReport {
    pub fn first_failure(&self) -> Option<&SubgroupReport> {
        self.subgroups.iter().find(|s| !s.surjective)
    }
}

pub fn is_cyclotomic_pair(data: &CyclotomicData) -> Result<CyclotomicReport> {
    is_cyclotomic_pair_bounded(data, DEFAULT_GROUP_BOUND)
}

pub fn is_cyclotomic_pair_bounded(data: &CyclotomicData, bound: usize) -> Result<CyclotomicReport> {
    let order = data.group.order();
    if order > bound {
        return Err(KummerError::BoundExceeded {
            what: "group",
            size: order as u128,
            bound: bound as u128,
        });
    }
    let big = data.twist_module(data.e + 1)?;
    let small = data.twist_module(1)?;
    let mut subgroups = Vec::new();
    for h in data.group.subgroups()? {
        let (b, s) = (big.restrict(&h), small.restrict(&h));
        let q = GMap::new(&b, &s, vec![vec![1]])?;
        let src = cohomology(&b, data.n)?;
        let tgt = cohomology(&s, data.n)?;
        let map = ClassHom::induced(&q, &src, &tgt)?;
        let witness = if map.is_surjective() {
            None
        } else {
            tgt.all_classes().into_iter().find(|c| map.preimage(c).is_none())
        };
        subgroups.push(SubgroupReport {
            subgroup: h.elements().to_vec(),
            source_order: map.source_order(),
            target_order: map.target_order(),
            image_order: map.image_order(),
            surjective: witness.is_none(),
            witness,
        });
    }
    Ok(CyclotomicReport {
        cyclotomic: subgroups.iter().all(|s| s.surjective),
        subgroups,
    })
}

/// A subgroup with a class of `H^n(H, L)` where `L = F_p(lambda)`.
#[derive(Clone, Debug)]
pub struct CyclothymicInput {
    pub subgroup: Subgroup,
    pub class: Cochain,
}

/// Searches `psi: G -> (Z/p^{1+e})^*` lifting `lambda` such that every
/// class lifts to `H^n(H_i, Z/p^{1+e}(psi))`. `lambda` is the character of
/// `L` mod `p`; classes are cochains on `F_p(lambda)|H_i` presented over
/// `Z/p^{1+e}`.
pub fn cyclothymic_witness(
    lambda: &Character,
    n: usize,
    e: u32,
    inputs: &[CyclothymicInput],
) -> Result<Option<Character>> {
    let group = lambda.group().clone();
    let p = lambda.modulus().p();
    let md = Modulus::prime_power(p, e + 1).map_err(CohomologyError::from)?;
    let lambda1 = lambda.reduce(1);
    for psi in Character::all(group.clone(), md) {
        if psi.reduce(1) != lambda1 {
            continue;
        }
        let big = GModule::cyclic_twist(group.clone(), md, e + 1, &psi, 1)?;
        let small = GModule::cyclic_twist(group.clone(), md, 1, &psi, 1)?;
        let mut ok = true;
        for input in inputs {
            let (b, s) = (big.restrict(&input.subgroup), small.restrict(&input.subgroup));
            let q = GMap::new(&b, &s, vec![vec![1]])?;
            let tgt = cohomology(&s, n)?;
            let src = cohomology(&b, n)?;
            let map = ClassHom::induced(&q, &src, &tgt)?;
            if map.preimage(&tgt.class_of(&input.class)?).is_none() {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(psi));
        }
    }
    Ok(None)
}

/// `g . f = Frob^m` through `F_p[X]`.
#[derive(Clone, Debug)]
pub struct FitFactorization {
    pub m: u32,
    pub set: PermutationGSet,
    /// The elements of `A` indexed by `X`.
    pub points: Vec<Vec<u64>>,
    /// `A -> F_p^X`, rows indexed by the basis of `A`.
    pub f: ResidueMatrix,
    /// `F_p^X -> A`, rows `Frob^m(x)`.
    pub g: ResidueMatrix,
}

impl FitFactorization {
    /// The matrix `g . f` equals `Frob^m`, and both maps are equivariant.
    pub fn verify(&self, alg: &FiniteAlgebra, action: &AlgebraAction) -> bool {
        let p = alg.p();
        let composite = self.f.mul(&self.g).expect("shapes");
        if composite != alg.frobenius_power_matrix(self.m) {
            return false;
        }
        action.group().elements().all(|h| {
            let a = action.matrix(h);
            let perm = self.set.module_matrix(p, h);
            a.mul(&self.f).ok() == self.f.mul(&perm).ok() && perm.mul(&self.g).ok() == self.g.mul(a).ok()
        })
    }
}

fn fp(p: u64) -> Modulus {
    Modulus::prime_power(p, 1).expect("prime")
}

fn stack(p: u64, cols: usize, rows: &[Vec<u64>]) -> ResidueMatrix {
    ResidueMatrix::from_rows(fp(p), cols, rows).expect("widths")
}

fn rank(p: u64, cols: usize, rows: &[Vec<u64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = stack(p, cols, rows);
    crate::linalg::HowellForm::new(&m).rows().len()
}

pub fn fit_factorization(alg: &FiniteAlgebra, action: &AlgebraAction) -> Result<FitFactorization> {
    let p = alg.p();
    let d = alg.dim();
    let group = action.group().clone();
    let dec = alg.residue_decomposition();
    let m = dec.frobenius_exponent;
    let perms: Vec<Vec<usize>> = group
        .elements()
        .map(|g| dec.factor_permutation(alg, action.matrix(g)))
        .collect();
    let nf = dec.idempotents.len();
    let mut done = vec![false; nf];
    let mut points: Vec<Vec<u64>> = Vec::new();
    for i in 0..nf {
        if done[i] {
            continue;
        }
        for g in group.elements() {
            done[perms[g][i]] = true;
        }
        let stab: Vec<usize> = group.elements().filter(|&g| perms[g][i] == i).collect();
        let incl = &dec.field_inclusions[i];
        let k = incl.rows();
        // fixed field of the stabilizer inside k_i
        let mut wide = ResidueMatrix::zero(fp(p), k, d * stab.len());
        for (s, &g) in stab.iter().enumerate() {
            let moved = incl.mul(action.matrix(g)).expect("shapes");
            for r in 0..k {
                for c in 0..d {
                    let v = (moved.get(r, c) + p - incl.get(r, c)) % p;
                    wide.set(r, s * d + c, v);
                }
            }
        }
        let fixed: Vec<Vec<u64>> = crate::algebra::span_basis(p, k, &kernel_basis(&wide).row_vecs())
            .iter()
            .map(|x| incl.apply(x))
            .collect();
        let size = (p as u128).pow(k as u32);
        if size > NORMAL_BASIS_BOUND {
            return Err(KummerError::BoundExceeded {
                what: "residue field",
                size,
                bound: NORMAL_BASIS_BOUND,
            });
        }
        let seeds = all_coordinates(&vec![p; k])
            .into_iter()
            .filter(|x| x.iter().any(|&c| c != 0))
            .find_map(|x| {
                let alpha = incl.apply(&x);
                let mut local: Vec<Vec<u64>> = Vec::new();
                for beta in &fixed {
                    let seed = alg.mul(beta, &alpha);
                    for &g in &stab {
                        let y = action.apply(g, &seed);
                        if !local.contains(&y) {
                            local.push(y);
                        }
                    }
                }
                (local.len() == k && rank(p, d, &local) == k).then(|| {
                    fixed.iter().map(|beta| alg.mul(beta, &alpha)).collect::<Vec<_>>()
                })
            })
            .ok_or_else(|| KummerError::Internal("no normal basis generator found".into()))?;
        for seed in seeds {
            for g in group.elements() {
                let y = action.apply(g, &seed);
                if !points.contains(&y) {
                    points.push(y);
                }
            }
        }
    }
    if points.len() != dec.separable_basis.len() || rank(p, d, &points) != points.len() {
        return Err(KummerError::Internal("permutation basis is not a basis".into()));
    }
    let perm_table: Vec<Vec<usize>> = group
        .elements()
        .map(|g| {
            points
                .iter()
                .map(|x| {
                    let y = action.apply(g, x);
                    points.iter().position(|z| *z == y).expect("G-stable")
                })
                .collect()
        })
        .collect();
    let set = PermutationGSet::new(group, perm_table)?;
    let basis = stack(p, d, &points);
    let solver = LinearSolver::new(&basis);
    let f_rows: Vec<Vec<u64>> = (0..d)
        .map(|i| {
            solver
                .solve(dec.projection.row(i))
                .map_err(CohomologyError::from)?
                .ok_or_else(|| KummerError::Internal("projection outside the separable part".into()))
        })
        .collect::<Result<_>>()?;
    let frob = alg.frobenius_power_matrix(m);
    let g_rows: Vec<Vec<u64>> = points.iter().map(|x| frob.apply(x)).collect();
    let fit = FitFactorization {
        m,
        set,
        f: stack(p, points.len(), &f_rows),
        g: stack(p, d, &g_rows),
        points,
    };
    if !fit.verify(alg, action) {
        return Err(KummerError::Internal("factorization check failed".into()));
    }
    Ok(fit)
}

/// `Z/p^a[X](chi)` over `Z/p^R` with `g e_x = chi(g) e_{gx}`.
pub fn twisted_permutation_module(set: &PermutationGSet, md: Modulus, a: u32, chi: &Character) -> Result<GModule> {
    let n = set.size();
    let pa = md.p().pow(a);
    let action = set
        .group()
        .elements()
        .map(|g| {
            let mut m = ResidueMatrix::zero(md, n, n);
            for x in 0..n {
                m.set(x, set.image(g, x), chi.value(g) % pa);
            }
            m
        })
        .collect();
    let relations = if a < md.exponent() {
        (0..n)
            .map(|i| {
                let mut r = vec![0; n];
                r[i] = pa;
                r
            })
            .collect()
    } else {
        vec![]
    };
    Ok(GModule::new(set.group().clone(), md, n, relations, action)?)
}

/// One level of the inductive lift.
#[derive(Clone, Debug)]
pub struct LiftStep {
    pub length: usize,
    pub m: u32,
    /// Class of the partial lift in `H^1(G, W_{e+1}(A)(1))`.
    pub lift_coords: Vec<u64>,
}

/// How the coefficients are twisted by an invertible module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LineBundle {
    Free,
    NonFree { description: String },
}

#[derive(Clone, Debug)]
pub struct LiftReport {
    /// Minimal `m` with `Frob^m^*(c)` liftable.
    pub m: u32,
    /// A lift of `Frob^m^*(c)` for the minimal `m`.
    pub lift: Cochain,
    pub lift_coords: Vec<u64>,
    /// Exponent produced by the inductive construction.
    pub constructive_m: u32,
    pub constructive_lift: Cochain,
    /// `m(A) * r`.
    pub bound: u32,
    pub steps: Vec<LiftStep>,
    /// `p^m` for the line-bundle tag `L -> L^{p^m}`.
    pub line_bundle_power: Option<u64>,
}

/// The Witt modules `W_s(A)(chi)` for `s = 1..=e+1`.
pub struct LiftContext<'a> {
    pub data: &'a CyclotomicData,
    pub algebra: &'a FiniteAlgebra,
    pub action: &'a AlgebraAction,
    levels: Vec<WittModule>,
}

impl<'a> LiftContext<'a> {
    pub fn new(data: &'a CyclotomicData, algebra: &'a FiniteAlgebra, action: &'a AlgebraAction) -> Result<Self> {
        if data.n != 1 {
            return Err(KummerError::InvalidData("lifting is implemented for n = 1".into()));
        }
        if algebra.p() != data.p || action.group() != &data.group {
            return Err(KummerError::InvalidData("algebra, action and character disagree".into()));
        }
        let report = is_cyclotomic_pair(data)?;
        if let Some(fail) = report.first_failure() {
            return Err(KummerError::NotCyclotomic {
                subgroup: fail.subgroup.clone(),
                class: fail.witness.clone().unwrap_or_default(),
            });
        }
        let levels = (1..=data.e as usize + 1)
            .map(|s| wittmod_from_algebra(algebra, action, s, &data.chi, 1))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(LiftContext {
            data,
            algebra,
            action,
            levels,
        })
    }

    /// `W_s(A)(1)`.
    pub fn level(&self, s: usize) -> &WittModule {
        &self.levels[s - 1]
    }

    fn top(&self) -> &WittModule {
        self.levels.last().expect("nonempty")
    }

    fn truncation(&self, from: usize, to: usize) -> Result<GMap> {
        Ok(self.level(from).reduction_to(self.level(to))?)
    }

    /// `V^r` on `W_{e+1}`.
    fn shift(&self, r: usize) -> Result<GMap> {
        let top = self.data.e as usize + 1;
        let t = self.truncation(top, top - r)?;
        Ok(t.then(&self.level(top - r).verschiebung_into(self.top())?)?)
    }

    /// `m(A)`.
    pub fn frobenius_exponent(&self) -> u32 {
        self.algebra.nilpotency_data().1
    }

    /// The base case: a lift of `Frob^m^*(c)` for `c` in `Z^1(G, A(1))`.
    pub fn lift_base(&self, c: &Cochain) -> Result<(u32, Cochain)> {
        let data = self.data;
        let md = data.modulus();
        let group = data.group.clone();
        let alg = self.algebra;
        let w1 = self.level(1);
        let values: Vec<Vec<u64>> = c.values.iter().map(|v| w1.module.canonical(v)).collect();
        let mut orbit = Vec::new();
        for v in &values {
            for g in group.elements() {
                orbit.push(self.action.apply(g, v));
            }
        }
        let sub_basis = alg.generated_subalgebra(&orbit);
        let (sub, incl) = alg.subalgebra(&sub_basis)?;
        let sub_action = self.action.restrict_to_subalgebra(&incl)?;
        let fit = fit_factorization(&sub, &sub_action)?;
        let solver = LinearSolver::new(&incl);
        let in_sub = |v: &[u64]| -> Result<Vec<u64>> {
            solver
                .solve(v)
                .map_err(CohomologyError::from)?
                .ok_or_else(|| KummerError::Internal("value outside the generated subalgebra".into()))
        };
        let small = twisted_permutation_module(&fit.set, md, 1, &data.chi)?;
        let big = twisted_permutation_module(&fit.set, md, data.e + 1, &data.chi)?;
        let pushed = Cochain {
            degree: 1,
            values: values
                .iter()
                .map(|v| Ok(small.canonical(&fit.f.apply(&in_sub(v)?))))
                .collect::<Result<Vec<_>>>()?,
        };
        let mut lifted = Cochain::zero(&big, 1);
        for orbit in fit.set.orbits() {
            let part = self.lift_orbit(&fit.set, &orbit, &pushed)?;
            lifted = lifted.add(&big, &part);
        }
        // e_x -> [g(e_x)] in W_{e+1}(A)(1)
        let top = self.top();
        let rows = (0..fit.set.size())
            .map(|x| top.teichmuller(&incl.apply(fit.g.row(x))))
            .collect();
        let to_witt = GMap::new(&big, &top.module, rows)?;
        Ok((fit.m, map_cochain(&to_witt, &lifted)))
    }

    /// Lifts the part of `w` supported on one orbit through Shapiro.
    fn lift_orbit(&self, set: &PermutationGSet, orbit: &[usize], w: &Cochain) -> Result<Cochain> {
        let data = self.data;
        let md = data.modulus();
        let group = data.group.clone();
        let n = set.size();
        let x0 = orbit[0];
        let h = set.stabilizer(x0);
        let reps = h.right_coset_reps(&group);
        let chi_inv = data.chi.pow(-1);
        let small_x = twisted_permutation_module(set, md, 1, &data.chi)?;
        let big_x = twisted_permutation_module(set, md, data.e + 1, &data.chi)?;
        let line_small = data.twist_module(1)?.restrict(&h);
        let line_big = data.twist_module(data.e + 1)?.restrict(&h);
        let sh_small = Shapiro::new(group.clone(), &h, &line_small)?;
        let sh_big = Shapiro::new(group.clone(), &h, &line_big)?;
        let slot_of = |x: usize| reps.iter().position(|&y| set.image(group.inv(y), x0) == x);
        // Phi: slot j -> chi(y_j)^{-1} e_{y_j^{-1} x0}
        let phi_rows = |target_rank: usize| -> Vec<Vec<u64>> {
            reps.iter()
                .map(|&y| {
                    let mut row = vec![0; target_rank];
                    row[set.image(group.inv(y), x0)] = chi_inv.value(y);
                    row
                })
                .collect()
        };
        let phi_big = GMap::new(sh_big.coinduced(), &big_x, phi_rows(n))?;
        let inv_rows: Vec<Vec<u64>> = (0..n)
            .map(|x| {
                let mut row = vec![0; reps.len()];
                if let Some(j) = slot_of(x) {
                    row[j] = data.chi.value(reps[j]);
                }
                row
            })
            .collect();
        // the inverse only sees the orbit; other coordinates are dropped
        let phi_inv = GMap::new(&small_x, sh_small.coinduced(), inv_rows)?;
        let on_orbit = map_cochain(&phi_inv, w);
        let at_h = sh_small.forward(&on_orbit);
        let src = cohomology(&line_big, 1)?;
        let tgt = cohomology(&line_small, 1)?;
        let q = GMap::new(&line_big, &line_small, vec![vec![1]])?;
        let red = ClassHom::induced(&q, &src, &tgt)?;
        let coords = tgt.class_of(&at_h)?;
        let pre = red.preimage(&coords).ok_or_else(|| {
            KummerError::Internal("cyclotomic hypothesis did not yield a lift".into())
        })?;
        let lifted_h = src.representative(&pre);
        Ok(map_cochain(&phi_big, &sh_big.backward(&lifted_h)))
    }

    /// The inductive construction for `c` in `Z^1(G, W_r(A)(1))`.
    pub fn lift_constructive(&self, r: usize, c: &Cochain) -> Result<(u32, Cochain, Vec<LiftStep>)> {
        let top_len = self.data.e as usize + 1;
        if r == 0 || r > top_len {
            return Err(KummerError::InvalidData(format!("length {r} outside 1..={top_len}")));
        }
        let h_top = cohomology(&self.top().module, 1)?;
        if r == 1 {
            let (m, lift) = self.lift_base(c)?;
            let step = LiftStep {
                length: 1,
                m,
                lift_coords: h_top.class_of(&lift)?,
            };
            return Ok((m, lift, vec![step]));
        }
        let wr = self.level(r);
        let prev = r - 1;
        let truncated = map_cochain(&self.truncation(r, prev)?, c);
        let (m_prev, lift_prev, mut steps) = self.lift_constructive(prev, &truncated)?;
        // defect c' = Frob^{m_prev}^* c - (lift_prev mod p^r)
        let pulled = map_cochain(&wr.frobenius_map(m_prev)?, c);
        let reduced = map_cochain(&self.truncation(top_len, r)?, &lift_prev);
        let defect = pulled.add(&wr.module, &reduced.neg(&wr.module));
        let v = self.level(1).verschiebung_into(wr)?;
        let h_r = cohomology(&wr.module, 1)?;
        let h_1 = cohomology(&self.level(1).module, 1)?;
        let via_v = ClassHom::induced(&v, &h_1, &h_r)?;
        let b_coords = via_v
            .preimage(&h_r.class_of(&defect)?)
            .ok_or_else(|| KummerError::Internal("defect is not in the image of V".into()))?;
        let b = h_1.representative(&b_coords);
        let (m_b, b_lift) = self.lift_base(&b)?;
        let top = self.top();
        let total = map_cochain(&top.frobenius_map(m_b)?, &lift_prev)
            .add(&top.module, &map_cochain(&self.shift(prev)?, &b_lift));
        let m = m_prev + m_b;
        steps.push(LiftStep {
            length: r,
            m,
            lift_coords: h_top.class_of(&total)?,
        });
        Ok((m, total, steps))
    }

    /// Whether `Frob^m^*(c)` is the reduction of a class, with one such class.
    pub fn lift_at(&self, r: usize, c: &Cochain, m: u32) -> Result<Option<Cochain>> {
        let top_len = self.data.e as usize + 1;
        let wr = self.level(r);
        let pulled = map_cochain(&wr.frobenius_map(m)?, c);
        let h_top = cohomology(&self.top().module, 1)?;
        let h_r = cohomology(&wr.module, 1)?;
        let red = ClassHom::induced(&self.truncation(top_len, r)?, &h_top, &h_r)?;
        Ok(red.preimage(&h_r.class_of(&pulled)?).map(|k| h_top.representative(&k)))
    }

    /// Checks `trunc(lift) = Frob^m^*(c)` in cohomology.
    pub fn verify(&self, r: usize, c: &Cochain, m: u32, lift: &Cochain) -> Result<bool> {
        let top_len = self.data.e as usize + 1;
        let wr = self.level(r);
        let h_r = cohomology(&wr.module, 1)?;
        let pulled = map_cochain(&wr.frobenius_map(m)?, c);
        let reduced = map_cochain(&self.truncation(top_len, r)?, lift);
        Ok(h_r.class_of(&pulled)? == h_r.class_of(&reduced)?)
    }
}

/// Lifts `c` in `Z^1(G, W_r(A)(1))` to `H^1(G, W_{e+1}(A)(1))` after a
/// Frobenius pullback.
pub fn lift_cocycle_rank1(
    data: &CyclotomicData,
    alg: &FiniteAlgebra,
    action: &AlgebraAction,
    r: usize,
    c: &Cochain,
) -> Result<LiftReport> {
    let ctx = LiftContext::new(data, alg, action)?;
    lift_with_context(&ctx, r, c)
}

pub fn lift_with_context(ctx: &LiftContext<'_>, r: usize, c: &Cochain) -> Result<LiftReport> {
    let wr = ctx.level(r);
    if !crate::cohomology::is_cocycle(&wr.module, c) {
        return Err(CohomologyError::NotCocycle.into());
    }
    let (constructive_m, constructive_lift, steps) = ctx.lift_constructive(r, c)?;
    if !ctx.verify(r, c, constructive_m, &constructive_lift)? {
        return Err(KummerError::Internal("constructed lift does not reduce correctly".into()));
    }
    let mut found = None;
    for m in 0..=constructive_m {
        if let Some(lift) = ctx.lift_at(r, c, m)? {
            found = Some((m, lift));
            break;
        }
    }
    let (m, lift) = found.expect("the constructive exponent lifts");
    let h_top = cohomology(&ctx.top().module, 1)?;
    Ok(LiftReport {
        m,
        lift_coords: h_top.class_of(&lift)?,
        lift,
        constructive_m,
        constructive_lift,
        bound: ctx.frobenius_exponent() * r as u32,
        steps,
        line_bundle_power: None,
    })
}

/// The same lift with coefficients `W_r(L)(1)` for a line bundle `L`; only
/// free `L` is supported, where `L^{p^m}` is again free.
pub fn lift_cocycle_invertible(
    data: &CyclotomicData,
    alg: &FiniteAlgebra,
    action: &AlgebraAction,
    bundle: &LineBundle,
    r: usize,
    c: &Cochain,
) -> Result<LiftReport> {
    if let LineBundle::NonFree { description } = bundle {
        return Err(KummerError::NonFreeLineBundle(format!(
            "{description}; only modules free of rank one can be trivialized"
        )));
    }
    let mut report = lift_cocycle_rank1(data, alg, action, r, c)?;
    report.line_bundle_power = Some(data.p.pow(report.m));
    Ok(report)
}

/// `G((t)) = Z/p^k(1) x| G` with the cocycle `(t)(x, g) = x`.
#[derive(Clone, Debug)]
pub struct LaurentModel {
    pub base: Arc<FiniteGroup>,
    pub level: u32,
    pub chi: Character,
    pub group: Arc<FiniteGroup>,
    /// Coefficients `Z/p^k(chi)` pulled back to `G((t))`.
    pub coefficients: GModule,
    pub t: Cochain,
    /// `(x, g) -> g`.
    pub projection: Vec<usize>,
}

/// Element `(x, g)` has index `x * |G| + g`.
pub fn laurent_model(data: &CyclotomicData, k: u32, bound: usize) -> Result<LaurentModel> {
    if k == 0 || k > data.e + 1 {
        return Err(KummerError::InvalidData(format!("level {k} outside 1..={}", data.e + 1)));
    }
    let chi = data.chi.reduce(k);
    let q = data.p.pow(k) as usize;
    let n = data.group.order();
    let size = q * n;
    if size > bound {
        return Err(KummerError::BoundExceeded {
            what: "Laurent group",
            size: size as u128,
            bound: bound as u128,
        });
    }
    let table: Vec<Vec<usize>> = (0..size)
        .map(|a| {
            let (x, g) = (a / n, a % n);
            (0..size)
                .map(|b| {
                    let (y, h) = (b / n, b % n);
                    let z = (x as u64 + chi.value(g) * y as u64) % q as u64;
                    z as usize * n + data.group.mul(g, h)
                })
                .collect()
        })
        .collect();
    let group = Arc::new(FiniteGroup::from_table(&table)?);
    let md = chi.modulus();
    let projection: Vec<usize> = (0..size).map(|a| a % n).collect();
    let values: Vec<u64> = projection.iter().map(|&g| chi.value(g)).collect();
    let lifted = Character::new(group.clone(), md, values)?;
    let coefficients = GModule::cyclic_twist(group.clone(), md, k, &lifted, 1)?;
    let t = Cochain::from_fn(&coefficients, 1, |a| vec![(a[0] / n) as u64]);
    if !crate::cohomology::is_cocycle(&coefficients, &t) {
        return Err(KummerError::Internal("(t) is not a cocycle".into()));
    }
    Ok(LaurentModel {
        base: data.group.clone(),
        level: k,
        chi,
        group,
        coefficients,
        t,
        projection,
    })
}

impl LaurentModel {
    /// `x -> inf(x) cup (t)` for a cochain on a `G`-module over `Z/p^k`.
    pub fn cup_with_t(&self, m: &GModule, c: &Cochain) -> Result<(GModule, Cochain)> {
        let inflated = m.inflate(self.group.clone(), &self.projection)?;
        let lifted = Character::new(
            self.group.clone(),
            self.chi.modulus(),
            self.projection.iter().map(|&g| self.chi.value(g)).collect(),
        )?;
        let target = inflated.twist(&lifted, 1)?;
        let pairing = Pairing::new(&inflated, &self.coefficients, &target, (0..m.rank()).map(|i| {
            let mut v = vec![0; m.rank()];
            v[i] = 1;
            v
        }).collect())?;
        let x = inflate_cochain(&self.group, self.base.order(), &self.projection, c);
        Ok((target, cup_product(&pairing, &x, &self.t)))
    }
}

/// Reads an element of `W_r(F_p)` as an integer mod `p^r`.
pub fn witt_to_integer<R: CommRing>(ring: &WittRing<R>, w: &WittVector<R::Elem>) -> Option<u64> {
    let q = ring.p().pow(ring.length() as u32);
    (0..q).find(|&k| ring.from_int(k as i64) == *w)
}

/// `H^1(G, B_2(W_2(A))) -> H^1(G, B_2(A))` onto, for one algebra.
pub fn smooth_instance_check(
    group: &FiniteGroup,
    alg: &FiniteAlgebra,
    action: &AlgebraAction,
    bound: usize,
) -> Result<BorelReduction<WittVector<Vec<u64>>, Vec<u64>>> {
    let w2 = WittRing::new(alg.clone(), 2).map_err(CohomologyError::from)?;
    let act_w = |g: usize, x: &WittVector<Vec<u64>>| w2.map_components(x, |a| action.apply(g, a));
    let act_a = |g: usize, x: &Vec<u64>| action.apply(g, x);
    let big = BorelRing { ring: &w2, act: &act_w };
    let small = BorelRing { ring: alg, act: &act_a };
    let reduce = |x: &WittVector<Vec<u64>>| truncate(x, 1).expect("length 2").components[0].clone();
    Ok(b2_reduction_surjective(group, &big, &small, &reduce, bound)?)
}

/// The two sides of `e_1 cup e_1 = chi cup e_1` in `H^2(G, F_2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KummerIdentity {
    pub holds: bool,
    pub square: Vec<u64>,
    pub twisted: Vec<u64>,
}

/// `F_2` with trivial action over `Z/4`.
pub fn f2_module(group: &Arc<FiniteGroup>) -> Result<GModule> {
    let md = Modulus::prime_power(2, 2).map_err(CohomologyError::from)?;
    Ok(GModule::trivial_cyclic(group.clone(), md, 1)?)
}

/// `chi` read additively in `Z^1(G, F_2)`.
pub fn sign_cocycle(chi: &Character) -> Result<Cochain> {
    let f2 = f2_module(chi.group())?;
    let q = chi.modulus().value();
    Ok(Cochain::from_fn(&f2, 1, |t| vec![u64::from(chi.value(t[0]) == q - 1)]))
}

/// The class in `H^1(G, F_2)` of the mod 2 reduction of an extension of
/// `Z/4` by `Z/4(chi)`.
pub fn reduced_extension_class(chi: &Character, lifted: &GModExtension) -> Result<Vec<u64>> {
    let group = chi.group();
    let md = Modulus::prime_power(2, 2).map_err(CohomologyError::from)?;
    if chi.modulus() != md {
        return Err(KummerError::InvalidData("chi must be a character mod 4".into()));
    }
    let sub = GModule::cyclic_twist(group.clone(), md, 2, chi, 1)?;
    let quot = GModule::trivial_free(group.clone(), md, 1);
    if *lifted.sub() != sub || *lifted.quot() != quot {
        return Err(KummerError::InvalidData("expected an extension of Z/4 by Z/4(chi)".into()));
    }
    let reduced = lifted.reduce(1)?;
    let class = reduced.extension_class()?;
    let f2 = f2_module(group)?;
    let values = class
        .cocycle
        .values
        .iter()
        .map(|v| vec![class.hom.to_matrix(v).get(0, 0) % 2])
        .collect();
    Ok(cohomology(&f2, 1)?.class_of(&Cochain { degree: 1, values })?)
}

pub fn kummer_identity_check(e1: &[u64], chi: &Character, lifted: &GModExtension) -> Result<KummerIdentity> {
    let group = chi.group();
    let f2 = f2_module(group)?;
    let h1 = cohomology(&f2, 1)?;
    if reduced_extension_class(chi, lifted)? != h1.scale_class(e1, 1) {
        return Err(KummerError::ReductionMismatch);
    }
    let h2 = cohomology(&f2, 2)?;
    let pairing = Pairing::scalar(&f2, &f2, &f2)?;
    let e = h1.representative(e1);
    let x = sign_cocycle(chi)?;
    let square = h2.class_of(&cup_product(&pairing, &e, &e))?;
    let twisted = h2.class_of(&cup_product(&pairing, &x, &e))?;
    Ok(KummerIdentity {
        holds: square == twisted,
        square,
        twisted,
    })
}

/// Every `(chi, e_1, lift)` over a group: all characters mod 4 and all
/// classes of `H^1(G, Z/4(chi))`, each giving an extension of `Z/4` by
/// `Z/4(chi)` and its reduction `e_1`.
pub fn kummer_instances(group: &Arc<FiniteGroup>) -> Result<Vec<(Character, Vec<u64>, GModExtension)>> {
    let md = Modulus::prime_power(2, 2).map_err(CohomologyError::from)?;
    let mut out = Vec::new();
    for chi in Character::all(group.clone(), md) {
        let b = GModule::cyclic_twist(group.clone(), md, 2, &chi, 1)?;
        let h1 = cohomology(&b, 1)?;
        for coords in h1.all_classes() {
            let ext = crate::extensions::extension_from_cocycle(&b, &h1.representative(&coords))?;
            let e1 = reduced_extension_class(&chi, &ext)?;
            out.push((chi.clone(), e1, ext));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
