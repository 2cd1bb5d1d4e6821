//! Finite `(Z/p^R, G)`-modules and their cohomology through the
//! inhomogeneous bar resolution.
//!
//! A module is a quotient of `(Z/p^R)^k` by an action-stable relation
//! submodule, with one `k x k` matrix per group element (row `i` is the image
//! of `e_i`). Cochains of degree `n` are tables indexed by `G^n`; tuple
//! `(g_1, ..., g_n)` sits at `sum g_i |G|^{n-i}`.
//!
//! Cohomology is computed on a diagonal re-presentation of the module, so
//! the cocycle condition becomes a plain kernel computation, and a class is
//! identified by its coordinates against the invariant-factor generators of
//! `Z/B`. Those coordinates are canonical.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::algebra::{
    right_coset_decompose, AlgebraAction, AlgebraError, FiniteAlgebra, FiniteGroup,
    PermutationGSet, Subgroup,
};
use crate::linalg::{
    all_coordinates, kernel_basis, vec_add, vec_neg, vec_scale, vec_sub, HowellForm,
    LinalgError, LinearSolver, Modulus, ResidueMatrix, Subquotient,
};
use crate::witt::{CommRing, WittError, WittRing, WittVector};

/// Default cap on the number of columns of a differential matrix.
pub const DEFAULT_MAX_COCHAIN_DIM: usize = 16_384;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CohomologyError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Witt(#[from] WittError),
    #[error("invalid module: {0}")]
    InvalidModule(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("map is not G-equivariant")]
    NotEquivariant,
    #[error("modules live over different moduli or groups")]
    Mismatch,
    #[error("cochain is not a cocycle")]
    NotCocycle,
    #[error("degree {0} is not supported")]
    DegreeNotSupported(usize),
    #[error("cochain space of dimension {size} exceeds bound {bound}")]
    SizeBound { size: usize, bound: usize },
    #[error("sequence is not exact: {0}")]
    NotExact(String),
    #[error("invalid character: {0}")]
    InvalidCharacter(String),
    #[error("invalid pairing: {0}")]
    InvalidPairing(String),
}

pub type Result<T> = std::result::Result<T, CohomologyError>;

/// A character `G -> (Z/p^k)^x`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Character {
    group: Arc<FiniteGroup>,
    modulus: Modulus,
    values: Vec<u64>,
}

impl Character {
    pub fn new(group: Arc<FiniteGroup>, modulus: Modulus, values: Vec<u64>) -> Result<Self> {
        if values.len() != group.order() {
            return Err(CohomologyError::InvalidCharacter(format!(
                "expected {} values, found {}",
                group.order(),
                values.len()
            )));
        }
        let values: Vec<u64> = values.into_iter().map(|v| v % modulus.value()).collect();
        if values.iter().any(|&v| !modulus.is_unit(v)) {
            return Err(CohomologyError::InvalidCharacter("values must be units".into()));
        }
        for a in group.elements() {
            for b in group.elements() {
                if values[group.mul(a, b)] != modulus.mul(values[a], values[b]) {
                    return Err(CohomologyError::InvalidCharacter(format!(
                        "not multiplicative at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(Character {
            group,
            modulus,
            values,
        })
    }

    pub fn trivial(group: Arc<FiniteGroup>, modulus: Modulus) -> Self {
        Character {
            values: vec![1 % modulus.value(); group.order()],
            group,
            modulus,
        }
    }

    /// Extends values on generators multiplicatively.
    pub fn from_generators(
        group: Arc<FiniteGroup>,
        modulus: Modulus,
        gens: &[(usize, u64)],
    ) -> Result<Self> {
        let mut values: Vec<Option<u64>> = vec![None; group.order()];
        values[group.identity()] = Some(1 % modulus.value());
        let mut queue = VecDeque::from([group.identity()]);
        while let Some(x) = queue.pop_front() {
            for &(g, u) in gens {
                let y = group.mul(x, g);
                let v = modulus.mul(values[x].expect("visited"), u);
                match values[y] {
                    None => {
                        values[y] = Some(v);
                        queue.push_back(y);
                    }
                    Some(w) if w != v => {
                        return Err(CohomologyError::InvalidCharacter(
                            "generator values are inconsistent".into(),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }
        let values = values
            .into_iter()
            .map(|v| v.ok_or_else(|| CohomologyError::InvalidCharacter("generators do not generate".into())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(group, modulus, values)
    }

    /// Every character into `(Z/p^k)^x`, in a fixed order.
    pub fn all(group: Arc<FiniteGroup>, modulus: Modulus) -> Vec<Character> {
        let gens = group.generators();
        let units = modulus.units();
        let choices = all_coordinates(&vec![units.len() as u64; gens.len()]);
        let mut out: Vec<Character> = Vec::new();
        for c in choices {
            let assignment: Vec<(usize, u64)> = gens
                .iter()
                .zip(&c)
                .map(|(&g, &i)| (g, units[i as usize]))
                .collect();
            if let Ok(chi) = Self::from_generators(group.clone(), modulus, &assignment) {
                if !out.contains(&chi) {
                    out.push(chi);
                }
            }
        }
        out
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn value(&self, g: usize) -> u64 {
        self.values[g]
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|&v| v == 1 % self.modulus.value())
    }

    /// The character mod `p^k`, `1 <= k <= ` current exponent.
    pub fn reduce(&self, k: u32) -> Character {
        let m = self.modulus.with_exponent(k);
        Character {
            group: self.group.clone(),
            modulus: m,
            values: self.values.iter().map(|&v| v % m.value()).collect(),
        }
    }

    pub fn pow(&self, n: i64) -> Character {
        let m = self.modulus;
        let values = self
            .values
            .iter()
            .map(|&v| {
                let base = if n < 0 { m.inv(v).expect("unit") } else { v };
                m.pow(base, n.unsigned_abs())
            })
            .collect();
        Character {
            group: self.group.clone(),
            modulus: m,
            values,
        }
    }

    pub fn restrict(&self, sub: &Subgroup) -> Character {
        Character {
            group: Arc::new(sub.to_group(&self.group)),
            modulus: self.modulus,
            values: sub.elements().iter().map(|&g| self.values[g]).collect(),
        }
    }
}

/// A finitely generated `Z/p^R`-module with a `G`-action.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GModule {
    group: Arc<FiniteGroup>,
    modulus: Modulus,
    rank: usize,
    relations: HowellForm,
    action: Vec<ResidueMatrix>,
}

impl GModule {
    pub fn new(
        group: Arc<FiniteGroup>,
        modulus: Modulus,
        rank: usize,
        relations: Vec<Vec<u64>>,
        action: Vec<ResidueMatrix>,
    ) -> Result<Self> {
        if action.len() != group.order() {
            return Err(CohomologyError::InvalidModule(format!(
                "expected {} action matrices, found {}",
                group.order(),
                action.len()
            )));
        }
        for (g, m) in action.iter().enumerate() {
            if m.rows() != rank || m.cols() != rank || m.modulus() != modulus {
                return Err(CohomologyError::InvalidModule(format!(
                    "action matrix {g} has the wrong shape or modulus"
                )));
            }
        }
        if relations.iter().any(|r| r.len() != rank) {
            return Err(CohomologyError::InvalidModule("relation width mismatch".into()));
        }
        let module = GModule {
            relations: HowellForm::from_rows(modulus, rank, relations),
            group,
            modulus,
            rank,
            action,
        };
        module.validate()?;
        Ok(module)
    }

    fn validate(&self) -> Result<()> {
        let group = self.group.clone();
        for (g, m) in self.action.iter().enumerate() {
            for r in self.relations.rows() {
                if !self.relations.contains(&m.apply(r)) {
                    return Err(CohomologyError::InvalidModule(format!(
                        "relations are not stable under element {g}"
                    )));
                }
            }
        }
        for i in 0..self.rank {
            let mut e = vec![0; self.rank];
            e[i] = 1;
            if !self.equal(&self.act(group.identity(), &e), &e) {
                return Err(CohomologyError::InvalidModule("identity acts nontrivially".into()));
            }
            for a in group.elements() {
                for b in group.elements() {
                    let lhs = self.act(group.mul(a, b), &e);
                    let rhs = self.act(a, &self.act(b, &e));
                    if !self.equal(&lhs, &rhs) {
                        return Err(CohomologyError::InvalidModule(format!(
                            "action is not a homomorphism at ({a}, {b})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `Z/p^a` with trivial action, presented over `Z/p^R`.
    pub fn trivial_cyclic(group: Arc<FiniteGroup>, modulus: Modulus, a: u32) -> Result<Self> {
        let chi = Character::trivial(group.clone(), modulus);
        Self::cyclic_twist(group, modulus, a, &chi, 1)
    }

    /// Free `(Z/p^R)^k` with trivial action.
    pub fn trivial_free(group: Arc<FiniteGroup>, modulus: Modulus, rank: usize) -> Self {
        let id = ResidueMatrix::identity(modulus, rank);
        GModule {
            action: vec![id; group.order()],
            relations: HowellForm::from_rows(modulus, rank, vec![]),
            group,
            modulus,
            rank,
        }
    }

    /// `Z/p^a(chi^n)` over `Z/p^R`; needs `chi` defined mod at least `p^a`.
    pub fn cyclic_twist(
        group: Arc<FiniteGroup>,
        modulus: Modulus,
        a: u32,
        chi: &Character,
        n: i64,
    ) -> Result<Self> {
        if a == 0 || a > modulus.exponent() || chi.modulus().exponent() < a || chi.modulus().p() != modulus.p() {
            return Err(CohomologyError::Mismatch);
        }
        let pa = modulus.p().pow(a);
        let twisted = chi.pow(n);
        let action = (0..group.order())
            .map(|g| {
                let v = twisted.value(g) % pa;
                ResidueMatrix::from_rows(modulus, 1, &[vec![v]]).expect("1x1")
            })
            .collect();
        let relations = if a < modulus.exponent() { vec![vec![pa]] } else { vec![] };
        Self::new(group, modulus, 1, relations, action)
    }

    pub fn direct_sum(parts: &[&GModule]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| CohomologyError::InvalidModule("empty direct sum".into()))?;
        if parts
            .iter()
            .any(|m| m.modulus != first.modulus || m.group != first.group)
        {
            return Err(CohomologyError::Mismatch);
        }
        let rank: usize = parts.iter().map(|m| m.rank).sum();
        let mut relations = Vec::new();
        let mut action: Vec<ResidueMatrix> =
            vec![ResidueMatrix::zero(first.modulus, rank, rank); first.group.order()];
        let mut off = 0;
        for m in parts {
            for r in m.relations.rows() {
                let mut row = vec![0; rank];
                row[off..off + m.rank].copy_from_slice(r);
                relations.push(row);
            }
            for (g, mat) in action.iter_mut().enumerate() {
                for i in 0..m.rank {
                    for j in 0..m.rank {
                        mat.set(off + i, off + j, m.action[g].get(i, j));
                    }
                }
            }
            off += m.rank;
        }
        Self::new(first.group.clone(), first.modulus, rank, relations, action)
    }

    /// `Z/p^R[X]` for a permutation `G`-set `X`.
    pub fn permutation_module(set: &PermutationGSet, modulus: Modulus) -> Result<Self> {
        let n = set.size();
        let action = set
            .group()
            .elements()
            .map(|g| {
                let mut m = ResidueMatrix::zero(modulus, n, n);
                for i in 0..n {
                    m.set(i, set.image(g, i), 1);
                }
                m
            })
            .collect();
        Self::new(set.group().clone(), modulus, n, vec![], action)
    }

    /// `M(chi^n)`.
    pub fn twist(&self, chi: &Character, n: i64) -> Result<Self> {
        if chi.modulus().exponent() < self.modulus.exponent() || *chi.group() != self.group {
            return Err(CohomologyError::Mismatch);
        }
        let t = chi.pow(n);
        let action = self
            .action
            .iter()
            .enumerate()
            .map(|(g, m)| m.scale(t.value(g) % self.modulus.value()))
            .collect();
        Self::new(
            self.group.clone(),
            self.modulus,
            self.rank,
            self.relations.rows().to_vec(),
            action,
        )
    }

    /// The same module presented over `Z/p^{R'}` with `R' >= R`.
    pub fn with_modulus(&self, target: Modulus) -> Result<Self> {
        if target.p() != self.modulus.p() || target.exponent() < self.modulus.exponent() {
            return Err(CohomologyError::Mismatch);
        }
        if target == self.modulus {
            return Ok(self.clone());
        }
        let big = self.modulus.value();
        let mut relations: Vec<Vec<u64>> = self.relations.rows().to_vec();
        for i in 0..self.rank {
            let mut r = vec![0; self.rank];
            r[i] = big;
            relations.push(r);
        }
        let lift = |m: &ResidueMatrix| {
            ResidueMatrix::from_rows(target, m.cols(), &m.row_vecs()).expect("widths")
        };
        Self::new(
            self.group.clone(),
            target,
            self.rank,
            relations,
            self.action.iter().map(lift).collect(),
        )
    }

    /// Restriction to a subgroup, indexed locally.
    pub fn restrict(&self, sub: &Subgroup) -> GModule {
        GModule {
            group: Arc::new(sub.to_group(&self.group)),
            modulus: self.modulus,
            rank: self.rank,
            relations: self.relations.clone(),
            action: sub.elements().iter().map(|&g| self.action[g].clone()).collect(),
        }
    }

    /// A module over `G/N` viewed over `G` through the projection.
    pub fn inflate(&self, group: Arc<FiniteGroup>, proj: &[usize]) -> Result<Self> {
        let action = group.elements().map(|g| self.action[proj[g]].clone()).collect();
        Self::new(
            group,
            self.modulus,
            self.rank,
            self.relations.rows().to_vec(),
            action,
        )
    }

    /// `Maps_H(G, M)` for a module `M` over `H`, stored by values on the
    /// right coset representatives; `(g f)(x) = f(x g)`.
    pub fn coinduce(group: Arc<FiniteGroup>, sub: &Subgroup, m: &GModule) -> Result<Self> {
        if m.group.order() != sub.order() {
            return Err(CohomologyError::Mismatch);
        }
        let reps = sub.right_coset_reps(&group);
        let k = reps.len();
        let d = m.rank;
        let mut relations = Vec::new();
        for slot in 0..k {
            for r in m.relations.rows() {
                let mut row = vec![0; k * d];
                row[slot * d..(slot + 1) * d].copy_from_slice(r);
                relations.push(row);
            }
        }
        let mut action = Vec::with_capacity(group.order());
        for g in group.elements() {
            let mut mat = ResidueMatrix::zero(m.modulus, k * d, k * d);
            for (slot, &x) in reps.iter().enumerate() {
                let (j, h) = right_coset_decompose(&group, sub, &reps, group.mul(x, g));
                let mh = &m.action[sub.local(h).expect("in H")];
                for i in 0..d {
                    for t in 0..d {
                        mat.set(j * d + i, slot * d + t, mh.get(i, t));
                    }
                }
            }
            action.push(mat);
        }
        Self::new(group, m.modulus, k * d, relations, action)
    }

    /// The submodule generated by `gens`, which must be `G`-stable, with
    /// its inclusion.
    pub fn submodule(&self, gens: &[Vec<u64>]) -> Result<(GModule, GMap)> {
        let t = gens.len();
        let mut stacked = gens.to_vec();
        stacked.extend(self.relations.rows().iter().cloned());
        let cover = ResidueMatrix::from_rows(self.modulus, self.rank, &stacked)?;
        let relations: Vec<Vec<u64>> = kernel_basis(&cover)
            .row_vecs()
            .into_iter()
            .map(|r| r[..t].to_vec())
            .collect();
        let solver = LinearSolver::new(&cover);
        let mut action = Vec::with_capacity(self.group.order());
        for g in self.group.elements() {
            let mut rows = Vec::with_capacity(t);
            for s in gens {
                let x = solver.solve(&self.act(g, s))?.ok_or_else(|| {
                    CohomologyError::InvalidModule("generated submodule is not G-stable".into())
                })?;
                rows.push(x[..t].to_vec());
            }
            action.push(ResidueMatrix::from_rows(self.modulus, t, &rows)?);
        }
        let sub = GModule::new(self.group.clone(), self.modulus, t, relations, action)?;
        let incl = GMap::new(&sub, self, gens.to_vec())?;
        Ok((sub, incl))
    }

    /// `M / <gens>` for a `G`-stable set of generators, with the projection.
    pub fn quotient(&self, gens: &[Vec<u64>]) -> Result<(GModule, GMap)> {
        let mut relations: Vec<Vec<u64>> = self.relations.rows().to_vec();
        relations.extend(gens.iter().cloned());
        let q = GModule::new(
            self.group.clone(),
            self.modulus,
            self.rank,
            relations,
            self.action.clone(),
        )?;
        let id = (0..self.rank).map(|i| unit_vector(self.rank, i)).collect();
        let proj = GMap::new(self, &q, id)?;
        Ok((q, proj))
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn relations(&self) -> &HowellForm {
        &self.relations
    }

    pub fn action_matrix(&self, g: usize) -> &ResidueMatrix {
        &self.action[g]
    }

    pub fn canonical(&self, v: &[u64]) -> Vec<u64> {
        self.relations.reduce(v)
    }

    pub fn equal(&self, a: &[u64], b: &[u64]) -> bool {
        self.relations.contains(&vec_sub(self.modulus, a, b))
    }

    pub fn is_zero(&self, v: &[u64]) -> bool {
        self.relations.contains(v)
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.rank]
    }

    pub fn act(&self, g: usize, v: &[u64]) -> Vec<u64> {
        self.canonical(&self.action[g].apply(v))
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        self.canonical(&vec_add(self.modulus, a, b))
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        self.canonical(&vec_sub(self.modulus, a, b))
    }

    pub fn neg(&self, a: &[u64]) -> Vec<u64> {
        self.canonical(&vec_neg(self.modulus, a))
    }

    pub fn scale(&self, a: &[u64], s: u64) -> Vec<u64> {
        self.canonical(&vec_scale(self.modulus, a, s))
    }

    fn structure(&self) -> Subquotient {
        let id: Vec<Vec<u64>> = (0..self.rank).map(|i| unit_vector(self.rank, i)).collect();
        Subquotient::new(self.modulus, self.rank, &id, self.relations.rows())
    }

    pub fn invariants(&self) -> crate::linalg::InvariantFactors {
        self.structure().invariants().clone()
    }

    pub fn order(&self) -> u128 {
        self.structure().order()
    }

    /// Every element as a canonical vector.
    pub fn elements(&self) -> Vec<Vec<u64>> {
        self.structure().elements()
    }

    /// `Hom_{Z/p^R}(self, other)` with `(g f)(m) = g f(g^{-1} m)`.
    pub fn hom_module(&self, other: &GModule) -> Result<HomModule> {
        HomModule::new(self, other)
    }
}

fn unit_vector(n: usize, i: usize) -> Vec<u64> {
    let mut v = vec![0; n];
    v[i] = 1;
    v
}

/// A `G`-equivariant homomorphism; row `i` of `matrix` is the image of `e_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GMap {
    source: GModule,
    target: GModule,
    matrix: ResidueMatrix,
}

impl GMap {
    pub fn new(source: &GModule, target: &GModule, rows: Vec<Vec<u64>>) -> Result<Self> {
        let map = Self::unchecked(source, target, rows)?;
        for r in source.relations.rows() {
            if !target.is_zero(&map.matrix.apply(r)) {
                return Err(CohomologyError::InvalidMap("relations are not respected".into()));
            }
        }
        for g in source.group.elements() {
            for i in 0..source.rank {
                let e = unit_vector(source.rank, i);
                let lhs = map.apply(&source.act(g, &e));
                let rhs = target.act(g, &map.apply(&e));
                if !target.equal(&lhs, &rhs) {
                    return Err(CohomologyError::NotEquivariant);
                }
            }
        }
        Ok(map)
    }

    fn unchecked(source: &GModule, target: &GModule, rows: Vec<Vec<u64>>) -> Result<Self> {
        if source.modulus != target.modulus || source.group != target.group {
            return Err(CohomologyError::Mismatch);
        }
        if rows.len() != source.rank {
            return Err(CohomologyError::InvalidMap(format!(
                "expected {} rows, found {}",
                source.rank,
                rows.len()
            )));
        }
        Ok(GMap {
            source: source.clone(),
            target: target.clone(),
            matrix: ResidueMatrix::from_rows(source.modulus, target.rank, &rows)?,
        })
    }

    pub fn identity(m: &GModule) -> Self {
        GMap {
            source: m.clone(),
            target: m.clone(),
            matrix: ResidueMatrix::identity(m.modulus, m.rank),
        }
    }

    pub fn zero(source: &GModule, target: &GModule) -> Result<Self> {
        Self::new(source, target, vec![vec![0; target.rank]; source.rank])
    }

    pub fn source(&self) -> &GModule {
        &self.source
    }

    pub fn target(&self) -> &GModule {
        &self.target
    }

    pub fn matrix(&self) -> &ResidueMatrix {
        &self.matrix
    }

    pub fn apply(&self, v: &[u64]) -> Vec<u64> {
        self.target.canonical(&self.matrix.apply(v))
    }

    /// `other . self`.
    pub fn then(&self, other: &GMap) -> Result<GMap> {
        if self.target != other.source {
            return Err(CohomologyError::Mismatch);
        }
        Ok(GMap {
            source: self.source.clone(),
            target: other.target.clone(),
            matrix: self.matrix.mul(&other.matrix)?,
        })
    }

    pub fn add(&self, other: &GMap) -> Result<GMap> {
        if self.source != other.source || self.target != other.target {
            return Err(CohomologyError::Mismatch);
        }
        let rows = (0..self.source.rank)
            .map(|i| vec_add(self.source.modulus, self.matrix.row(i), other.matrix.row(i)))
            .collect();
        Self::unchecked(&self.source, &self.target, rows)
    }

    pub fn scale(&self, s: u64) -> GMap {
        GMap {
            source: self.source.clone(),
            target: self.target.clone(),
            matrix: self.matrix.scale(s),
        }
    }

    pub fn image_order(&self) -> u128 {
        Subquotient::new(
            self.target.modulus,
            self.target.rank,
            &self.matrix.row_vecs(),
            self.target.relations.rows(),
        )
        .order()
    }

    pub fn is_surjective(&self) -> bool {
        self.image_order() == self.target.order()
    }

    pub fn is_injective(&self) -> bool {
        self.image_order() == self.source.order()
    }

    pub fn is_zero(&self) -> bool {
        (0..self.source.rank).all(|i| self.target.is_zero(self.matrix.row(i)))
    }

    /// Elementwise equality of maps.
    pub fn equals(&self, other: &GMap) -> bool {
        self.source == other.source
            && self.target == other.target
            && (0..self.source.rank)
                .all(|i| self.target.equal(self.matrix.row(i), other.matrix.row(i)))
    }
}

/// An inhomogeneous cochain; `values[t]` is the value at tuple index `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cochain {
    pub degree: usize,
    pub values: Vec<Vec<u64>>,
}

pub fn tuple_index(order: usize, tuple: &[usize]) -> usize {
    tuple.iter().fold(0, |acc, &g| acc * order + g)
}

pub fn tuple_of(order: usize, n: usize, mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = idx % order;
        idx /= order;
    }
    out
}

impl Cochain {
    pub fn zero(m: &GModule, n: usize) -> Self {
        Cochain {
            degree: n,
            values: vec![m.zero(); m.group.order().pow(n as u32)],
        }
    }

    pub fn from_fn<F>(m: &GModule, n: usize, f: F) -> Self
    where
        F: Fn(&[usize]) -> Vec<u64>,
    {
        let order = m.group.order();
        Cochain {
            degree: n,
            values: (0..order.pow(n as u32))
                .map(|i| m.canonical(&f(&tuple_of(order, n, i))))
                .collect(),
        }
    }

    pub fn constant(m: &GModule, v: &[u64]) -> Self {
        Cochain {
            degree: 0,
            values: vec![m.canonical(v)],
        }
    }

    pub fn value(&self, order: usize, tuple: &[usize]) -> &[u64] {
        &self.values[tuple_index(order, tuple)]
    }

    pub fn add(&self, m: &GModule, other: &Cochain) -> Cochain {
        Cochain {
            degree: self.degree,
            values: self.values.iter().zip(&other.values).map(|(a, b)| m.add(a, b)).collect(),
        }
    }

    pub fn scale(&self, m: &GModule, s: u64) -> Cochain {
        Cochain {
            degree: self.degree,
            values: self.values.iter().map(|a| m.scale(a, s)).collect(),
        }
    }

    pub fn neg(&self, m: &GModule) -> Cochain {
        Cochain {
            degree: self.degree,
            values: self.values.iter().map(|a| m.neg(a)).collect(),
        }
    }

    pub fn equals(&self, m: &GModule, other: &Cochain) -> bool {
        self.degree == other.degree
            && self.values.iter().zip(&other.values).all(|(a, b)| m.equal(a, b))
    }
}

/// The bar differential.
pub fn differential(m: &GModule, c: &Cochain) -> Cochain {
    let order = m.group.order();
    let n = c.degree;
    let md = m.modulus;
    let values = (0..order.pow(n as u32 + 1))
        .map(|idx| {
            let t = tuple_of(order, n + 1, idx);
            let mut acc = m.act(t[0], c.value(order, &t[1..]));
            for i in 0..n {
                let mut merged = t[..i].to_vec();
                merged.push(m.group.mul(t[i], t[i + 1]));
                merged.extend_from_slice(&t[i + 2..]);
                let v = c.value(order, &merged);
                acc = if i % 2 == 0 { vec_sub(md, &acc, v) } else { vec_add(md, &acc, v) };
            }
            let last = c.value(order, &t[..n]);
            acc = if n % 2 == 0 { vec_sub(md, &acc, last) } else { vec_add(md, &acc, last) };
            m.canonical(&acc)
        })
        .collect();
    Cochain {
        degree: n + 1,
        values,
    }
}

pub fn is_cocycle(m: &GModule, c: &Cochain) -> bool {
    differential(m, c).values.iter().all(|v| m.is_zero(v))
}

pub fn map_cochain(f: &GMap, c: &Cochain) -> Cochain {
    Cochain {
        degree: c.degree,
        values: c.values.iter().map(|v| f.apply(v)).collect(),
    }
}

/// Diagonal re-presentation `M = sum Z/p^{a_i} s_i`.
#[derive(Clone, Debug)]
struct Simplified {
    module: GModule,
    exps: Vec<u32>,
    structure: Subquotient,
}

impl Simplified {
    fn new(m: &GModule) -> Result<Self> {
        let structure = m.structure();
        let md = m.modulus;
        let exps: Vec<u32> = structure
            .invariants()
            .factors()
            .iter()
            .map(|&f| exponent_of(md.p(), f))
            .collect();
        let t = exps.len();
        let relations: Vec<Vec<u64>> = exps
            .iter()
            .enumerate()
            .filter(|(_, &a)| a < md.exponent())
            .map(|(i, &a)| {
                let mut r = vec![0; t];
                r[i] = md.p().pow(a);
                r
            })
            .collect();
        let mut action = Vec::with_capacity(m.group.order());
        for g in m.group.elements() {
            let rows = structure
                .generators()
                .iter()
                .map(|s| structure.coordinates(&m.act(g, s)).expect("in module"))
                .collect::<Vec<_>>();
            action.push(ResidueMatrix::from_rows(md, t, &rows)?);
        }
        let module = GModule::new(m.group.clone(), md, t, relations, action)?;
        Ok(Simplified {
            module,
            exps,
            structure,
        })
    }

    fn to_simple(&self, v: &[u64]) -> Vec<u64> {
        self.structure.coordinates(v).expect("vector lies in the module")
    }

    fn from_simple(&self, c: &[u64]) -> Vec<u64> {
        self.structure.element(c)
    }
}

fn exponent_of(p: u64, mut f: u64) -> u32 {
    let mut e = 0;
    while f > 1 {
        f /= p;
        e += 1;
    }
    e
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CohomologyOptions {
    /// Highest degree allowed; 3 is accepted only when set explicitly.
    pub max_degree: usize,
    pub max_cochain_dim: usize,
}

impl Default for CohomologyOptions {
    fn default() -> Self {
        CohomologyOptions {
            max_degree: 2,
            max_cochain_dim: DEFAULT_MAX_COCHAIN_DIM,
        }
    }
}

/// `H^n(G, M)` with canonical class coordinates.
#[derive(Clone, Debug)]
pub struct CohomologyGroup {
    module: GModule,
    degree: usize,
    simple: Simplified,
    quotient: Subquotient,
}

/// A class together with its canonical representative cocycle.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CohomologyClass {
    pub degree: usize,
    pub coords: Vec<u64>,
    pub cocycle: Cochain,
}

/// Differential matrix on simplified coordinates: rows are the basis
/// cochains of degree `n`, columns those of degree `n + 1`.
fn differential_matrix(m: &GModule, n: usize) -> ResidueMatrix {
    let order = m.group.order();
    let k = m.rank;
    let md = m.modulus;
    let rows_n = order.pow(n as u32);
    let cols_n = order.pow(n as u32 + 1);
    let mut d = ResidueMatrix::zero(md, rows_n * k, cols_n * k);
    let add_block = |d: &mut ResidueMatrix, src: usize, dst: usize, mat: Option<&ResidueMatrix>, sign: i64| {
        for i in 0..k {
            for j in 0..k {
                let v = match mat {
                    Some(a) => a.get(i, j),
                    None => u64::from(i == j),
                };
                if v == 0 {
                    continue;
                }
                let v = if sign < 0 { md.neg(v) } else { v };
                let (r, c) = (src * k + i, dst * k + j);
                let cur = d.get(r, c);
                d.set(r, c, md.add(cur, v));
            }
        }
    };
    for s in 0..cols_n {
        let t = tuple_of(order, n + 1, s);
        add_block(&mut d, tuple_index(order, &t[1..]), s, Some(&m.action[t[0]]), 1);
        for i in 0..n {
            let mut merged = t[..i].to_vec();
            merged.push(m.group.mul(t[i], t[i + 1]));
            merged.extend_from_slice(&t[i + 2..]);
            let sign = if i % 2 == 0 { -1 } else { 1 };
            add_block(&mut d, tuple_index(order, &merged), s, None, sign);
        }
        let sign = if n % 2 == 0 { -1 } else { 1 };
        add_block(&mut d, tuple_index(order, &t[..n]), s, None, sign);
    }
    d
}

impl CohomologyGroup {
    pub fn new(m: &GModule, n: usize) -> Result<Self> {
        Self::with_options(m, n, CohomologyOptions::default())
    }

    pub fn with_options(m: &GModule, n: usize, opts: CohomologyOptions) -> Result<Self> {
        if n > opts.max_degree || n > 3 {
            return Err(CohomologyError::DegreeNotSupported(n));
        }
        let simple = Simplified::new(m)?;
        let sm = &simple.module;
        let md = sm.modulus;
        let t = sm.rank;
        let order = m.group.order();
        let size = order.pow(n as u32 + 1) * t;
        if size > opts.max_cochain_dim {
            return Err(CohomologyError::SizeBound {
                size,
                bound: opts.max_cochain_dim,
            });
        }
        let dim_n = order.pow(n as u32) * t;
        // Cocycles: x D = 0 modulo the diagonal relations, i.e. column j of
        // x D scaled by p^{R - a_j} vanishes.
        let mut d = differential_matrix(sm, n);
        for col in 0..d.cols() {
            let a = simple.exps[col % t.max(1)];
            let s = md.p().pow(md.exponent() - a);
            if s != 1 {
                for row in 0..d.rows() {
                    let v = md.mul(d.get(row, col), s);
                    d.set(row, col, v);
                }
            }
        }
        let cocycles = if dim_n == 0 {
            vec![]
        } else {
            kernel_basis(&d).row_vecs()
        };
        let mut boundaries: Vec<Vec<u64>> = Vec::new();
        if n > 0 && dim_n > 0 {
            boundaries.extend(differential_matrix(sm, n - 1).row_vecs());
        }
        for blk in 0..order.pow(n as u32) {
            for (i, &a) in simple.exps.iter().enumerate() {
                if a < md.exponent() {
                    let mut r = vec![0; dim_n];
                    r[blk * t + i] = md.p().pow(a);
                    boundaries.push(r);
                }
            }
        }
        let quotient = Subquotient::new(md, dim_n, &cocycles, &boundaries);
        Ok(CohomologyGroup {
            module: m.clone(),
            degree: n,
            simple,
            quotient,
        })
    }

    pub fn module(&self) -> &GModule {
        &self.module
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn invariants(&self) -> &crate::linalg::InvariantFactors {
        self.quotient.invariants()
    }

    pub fn order(&self) -> u128 {
        self.quotient.order()
    }

    pub fn orders(&self) -> &[u64] {
        self.quotient.invariants().factors()
    }

    fn flatten(&self, c: &Cochain) -> Vec<u64> {
        c.values.iter().flat_map(|v| self.simple.to_simple(v)).collect()
    }

    /// Canonical coordinates of the class of a cocycle.
    pub fn class_of(&self, c: &Cochain) -> Result<Vec<u64>> {
        if c.degree != self.degree
            || c.values.len() != self.module.group.order().pow(self.degree as u32)
        {
            return Err(CohomologyError::Mismatch);
        }
        if !is_cocycle(&self.module, c) {
            return Err(CohomologyError::NotCocycle);
        }
        Ok(self
            .quotient
            .coordinates(&self.flatten(c))
            .expect("cocycles lie in the cocycle module"))
    }

    /// The canonical representative cocycle of a class.
    pub fn representative(&self, coords: &[u64]) -> Cochain {
        let v = self.quotient.element(coords);
        let t = self.simple.module.rank;
        let values = if t == 0 {
            vec![self.module.zero(); self.module.group.order().pow(self.degree as u32)]
        } else {
            v.chunks(t).map(|c| self.simple.from_simple(c)).collect()
        };
        Cochain {
            degree: self.degree,
            values,
        }
    }

    pub fn class(&self, coords: &[u64]) -> CohomologyClass {
        let coords: Vec<u64> = coords.iter().zip(self.orders()).map(|(c, o)| c % o).collect();
        CohomologyClass {
            degree: self.degree,
            cocycle: self.representative(&coords),
            coords,
        }
    }

    pub fn generators(&self) -> Vec<Cochain> {
        (0..self.orders().len())
            .map(|i| {
                let mut c = vec![0; self.orders().len()];
                c[i] = 1;
                self.representative(&c)
            })
            .collect()
    }

    pub fn all_classes(&self) -> Vec<Vec<u64>> {
        all_coordinates(self.orders())
    }

    pub fn zero_class(&self) -> Vec<u64> {
        vec![0; self.orders().len()]
    }

    pub fn is_zero_class(&self, coords: &[u64]) -> bool {
        coords.iter().zip(self.orders()).all(|(c, o)| c % o == 0)
    }

    pub fn add_classes(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b)
            .zip(self.orders())
            .map(|((x, y), o)| (x + y) % o)
            .collect()
    }

    pub fn scale_class(&self, a: &[u64], s: u64) -> Vec<u64> {
        a.iter()
            .zip(self.orders())
            .map(|(x, o)| (x % o) * (s % o) % o)
            .collect()
    }

    pub fn same_class(&self, a: &Cochain, b: &Cochain) -> Result<bool> {
        Ok(self.class_of(a)? == self.class_of(b)?)
    }
}

type CohomologyCache = Mutex<HashMap<(GModule, usize), Arc<CohomologyGroup>>>;

/// `H^n(G, M)` computed once per `(M, n)`.
pub fn cohomology(m: &GModule, n: usize) -> Result<Arc<CohomologyGroup>> {
    static CACHE: OnceLock<CohomologyCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (m.clone(), n);
    if let Some(h) = cache.lock().expect("cache poisoned").get(&key) {
        return Ok(h.clone());
    }
    let h = Arc::new(CohomologyGroup::new(m, n)?);
    let mut guard = cache.lock().expect("cache poisoned");
    Ok(guard.entry(key).or_insert(h).clone())
}

/// A homomorphism between cohomology groups, stored by generator images.
#[derive(Clone, Debug)]
pub struct ClassHom {
    source_orders: Vec<u64>,
    target_orders: Vec<u64>,
    images: Vec<Vec<u64>>,
}

impl ClassHom {
    /// The map induced by a cochain-level operation.
    pub fn from_cochain_map<F>(src: &CohomologyGroup, tgt: &CohomologyGroup, f: F) -> Result<Self>
    where
        F: Fn(&Cochain) -> Result<Cochain>,
    {
        let images = src
            .generators()
            .iter()
            .map(|c| tgt.class_of(&f(c)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassHom {
            source_orders: src.orders().to_vec(),
            target_orders: tgt.orders().to_vec(),
            images,
        })
    }

    /// The map induced by a module homomorphism.
    pub fn induced(f: &GMap, src: &CohomologyGroup, tgt: &CohomologyGroup) -> Result<Self> {
        if *f.source() != src.module || *f.target() != tgt.module {
            return Err(CohomologyError::Mismatch);
        }
        Self::from_cochain_map(src, tgt, |c| Ok(map_cochain(f, c)))
    }

    pub fn apply(&self, coords: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; self.target_orders.len()];
        for (c, img) in coords.iter().zip(&self.images) {
            for ((o, &x), &ord) in out.iter_mut().zip(img).zip(&self.target_orders) {
                *o = (*o + (c % ord) * x) % ord;
            }
        }
        out
    }

    fn modulus(&self) -> Option<Modulus> {
        let big = self
            .target_orders
            .iter()
            .chain(&self.source_orders)
            .copied()
            .max()?;
        Modulus::new(big).ok()
    }

    fn span(&self) -> Option<(Modulus, Vec<Vec<u64>>, Vec<Vec<u64>>)> {
        let m = self.modulus()?;
        let t = self.target_orders.len();
        let rels = self
            .target_orders
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let mut r = vec![0; t];
                r[i] = o % m.value();
                r
            })
            .collect();
        Some((m, self.images.clone(), rels))
    }

    pub fn image_order(&self) -> u128 {
        if self.target_orders.is_empty() {
            return 1;
        }
        match self.span() {
            Some((m, gens, rels)) => Subquotient::new(m, self.target_orders.len(), &gens, &rels).order(),
            None => 1,
        }
    }

    pub fn source_order(&self) -> u128 {
        self.source_orders.iter().map(|&o| o as u128).product()
    }

    pub fn target_order(&self) -> u128 {
        self.target_orders.iter().map(|&o| o as u128).product()
    }

    pub fn is_surjective(&self) -> bool {
        self.image_order() == self.target_order()
    }

    pub fn is_injective(&self) -> bool {
        self.image_order() == self.source_order()
    }

    pub fn is_zero(&self) -> bool {
        self.image_order() == 1
    }

    /// Some class mapping to `target`, if one exists.
    pub fn preimage(&self, target: &[u64]) -> Option<Vec<u64>> {
        if target.iter().zip(&self.target_orders).all(|(c, o)| c % o == 0) {
            return Some(vec![0; self.source_orders.len()]);
        }
        let (m, gens, rels) = self.span()?;
        let mut rows = gens;
        rows.extend(rels);
        let mat = ResidueMatrix::from_rows(m, self.target_orders.len(), &rows).ok()?;
        let x = LinearSolver::new(&mat).solve(target).ok()??;
        Some(
            x[..self.source_orders.len()]
                .iter()
                .zip(&self.source_orders)
                .map(|(v, o)| v % o)
                .collect(),
        )
    }

    /// All classes in the image, sorted.
    pub fn image(&self) -> Vec<Vec<u64>> {
        let mut out: Vec<Vec<u64>> = all_coordinates(&self.source_orders)
            .iter()
            .map(|c| self.apply(c))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// All classes in the kernel, sorted.
    pub fn kernel(&self) -> Vec<Vec<u64>> {
        all_coordinates(&self.source_orders)
            .into_iter()
            .filter(|c| self.apply(c).iter().all(|&x| x == 0))
            .collect()
    }
}

/// `0 -> sub -> mid -> quot -> 0`.
#[derive(Clone, Debug)]
pub struct ShortExactSequence {
    pub inj: GMap,
    pub surj: GMap,
}

impl ShortExactSequence {
    pub fn new(inj: GMap, surj: GMap) -> Result<Self> {
        if inj.target != surj.source {
            return Err(CohomologyError::Mismatch);
        }
        if !inj.then(&surj)?.is_zero() {
            return Err(CohomologyError::NotExact("composite is nonzero".into()));
        }
        if !inj.is_injective() {
            return Err(CohomologyError::NotExact("first map is not injective".into()));
        }
        if !surj.is_surjective() {
            return Err(CohomologyError::NotExact("second map is not surjective".into()));
        }
        if inj.source.order() * surj.target.order() != inj.target.order() {
            return Err(CohomologyError::NotExact("image differs from kernel".into()));
        }
        Ok(ShortExactSequence { inj, surj })
    }

    pub fn sub(&self) -> &GModule {
        &self.inj.source
    }

    pub fn mid(&self) -> &GModule {
        &self.inj.target
    }

    pub fn quot(&self) -> &GModule {
        &self.surj.target
    }

    /// Some preimage of `v` under the surjection.
    pub fn lift(&self, v: &[u64]) -> Vec<u64> {
        let mid = self.mid();
        let mut rows = self.surj.matrix.row_vecs();
        rows.extend(self.quot().relations.rows().iter().cloned());
        let m = ResidueMatrix::from_rows(mid.modulus, self.quot().rank, &rows).expect("widths");
        let x = LinearSolver::new(&m)
            .solve(v)
            .expect("dims")
            .expect("surjective");
        mid.canonical(&x[..mid.rank])
    }

    /// The element of `sub` mapping to `v`, for `v` in the kernel.
    pub fn pull_back(&self, v: &[u64]) -> Option<Vec<u64>> {
        let sub = self.sub();
        let mut rows = self.inj.matrix.row_vecs();
        rows.extend(self.mid().relations.rows().iter().cloned());
        let m = ResidueMatrix::from_rows(sub.modulus, self.mid().rank, &rows).expect("widths");
        let x = LinearSolver::new(&m).solve(v).expect("dims")?;
        Some(sub.canonical(&x[..sub.rank]))
    }

    /// The connecting homomorphism on a cocycle with values in `quot`.
    pub fn connecting_cochain(&self, z: &Cochain) -> Result<Cochain> {
        let lifted = Cochain {
            degree: z.degree,
            values: z.values.iter().map(|v| self.lift(v)).collect(),
        };
        let d = differential(self.mid(), &lifted);
        let values = d
            .values
            .iter()
            .map(|v| self.pull_back(v).ok_or(CohomologyError::NotCocycle))
            .collect::<Result<Vec<_>>>()?;
        Ok(Cochain {
            degree: d.degree,
            values,
        })
    }

    pub fn connecting_map(&self, src: &CohomologyGroup, tgt: &CohomologyGroup) -> Result<ClassHom> {
        ClassHom::from_cochain_map(src, tgt, |c| self.connecting_cochain(c))
    }
}

/// Restricts a cochain over `G` to a subgroup, indexed locally.
pub fn restrict_cochain(group: &FiniteGroup, sub: &Subgroup, c: &Cochain) -> Cochain {
    let h = sub.order();
    let values = (0..h.pow(c.degree as u32))
        .map(|idx| {
            let t: Vec<usize> = tuple_of(h, c.degree, idx)
                .into_iter()
                .map(|i| sub.elements()[i])
                .collect();
            c.value(group.order(), &t).to_vec()
        })
        .collect();
    Cochain {
        degree: c.degree,
        values,
    }
}

/// Inflates a cochain over `G/N` along the projection `G -> G/N`.
pub fn inflate_cochain(group: &FiniteGroup, quotient_order: usize, proj: &[usize], c: &Cochain) -> Cochain {
    let n = group.order();
    let values = (0..n.pow(c.degree as u32))
        .map(|idx| {
            let t: Vec<usize> = tuple_of(n, c.degree, idx).into_iter().map(|g| proj[g]).collect();
            c.value(quotient_order, &t).to_vec()
        })
        .collect();
    Cochain {
        degree: c.degree,
        values,
    }
}

/// Shapiro's isomorphism `H^n(G, Maps_H(G, M)) = H^n(H, M)` on cochains.
#[derive(Clone, Debug)]
pub struct Shapiro {
    group: Arc<FiniteGroup>,
    sub: Subgroup,
    module: GModule,
    coinduced: GModule,
    reps: Vec<usize>,
}

impl Shapiro {
    pub fn new(group: Arc<FiniteGroup>, sub: &Subgroup, module: &GModule) -> Result<Self> {
        let coinduced = GModule::coinduce(group.clone(), sub, module)?;
        Ok(Shapiro {
            reps: sub.right_coset_reps(&group),
            group,
            sub: sub.clone(),
            module: module.clone(),
            coinduced,
        })
    }

    pub fn coinduced(&self) -> &GModule {
        &self.coinduced
    }

    pub fn module(&self) -> &GModule {
        &self.module
    }

    /// Restrict to `H` and evaluate at the identity coset.
    pub fn forward(&self, c: &Cochain) -> Cochain {
        let d = self.module.rank;
        let r = restrict_cochain(&self.group, &self.sub, c);
        Cochain {
            degree: r.degree,
            values: r.values.iter().map(|v| self.module.canonical(&v[..d])).collect(),
        }
    }

    /// `C(g_1..g_n)(x) = eta(x) c(eta(x)^{-1} eta(x g_1), ...)` where
    /// `y = eta(y) rho(y)` with `rho(y)` the representative of `H y`.
    pub fn backward(&self, c: &Cochain) -> Cochain {
        let g = &self.group;
        let d = self.module.rank;
        let h_order = self.sub.order();
        let eta = |y: usize| right_coset_decompose(g, &self.sub, &self.reps, y).1;
        let local = |y: usize| self.sub.local(y).expect("in H");
        let n = c.degree;
        let values = (0..g.order().pow(n as u32))
            .map(|idx| {
                let t = tuple_of(g.order(), n, idx);
                let mut out = Vec::with_capacity(self.reps.len() * d);
                for &x in &self.reps {
                    let mut prefix = x;
                    let mut etas = vec![eta(prefix)];
                    for &gi in &t {
                        prefix = g.mul(prefix, gi);
                        etas.push(eta(prefix));
                    }
                    let args: Vec<usize> = etas
                        .windows(2)
                        .map(|w| local(g.mul(g.inv(w[0]), w[1])))
                        .collect();
                    let v = c.value(h_order, &args);
                    out.extend(self.module.act(local(etas[0]), v));
                }
                self.coinduced.canonical(&out)
            })
            .collect();
        Cochain { degree: n, values }
    }
}

/// Corestriction from `H` to `G`: Shapiro followed by the norm map
/// `Maps_H(G, M) -> M`, `f -> sum_x x^{-1} f(x)`.
pub fn corestriction(group: Arc<FiniteGroup>, sub: &Subgroup, m: &GModule, c: &Cochain) -> Result<Cochain> {
    let res = m.restrict(sub);
    let shapiro = Shapiro::new(group.clone(), sub, &res)?;
    let lifted = shapiro.backward(c);
    let reps = sub.right_coset_reps(&group);
    let d = m.rank;
    let norm_rows: Vec<Vec<u64>> = reps
        .iter()
        .flat_map(|&x| (0..d).map(move |i| (x, i)))
        .map(|(x, i)| m.act(group.inv(x), &unit_vector(d, i)))
        .collect();
    let norm = GMap::new(shapiro.coinduced(), m, norm_rows)?;
    Ok(map_cochain(&norm, &lifted))
}

/// A `G`-equivariant bilinear map `M x N -> P`.
#[derive(Clone, Debug)]
pub struct Pairing {
    left: GModule,
    right: GModule,
    target: GModule,
    table: Vec<Vec<u64>>,
}

impl Pairing {
    pub fn new(left: &GModule, right: &GModule, target: &GModule, table: Vec<Vec<u64>>) -> Result<Self> {
        if left.modulus != target.modulus || right.modulus != target.modulus {
            return Err(CohomologyError::Mismatch);
        }
        if table.len() != left.rank * right.rank || table.iter().any(|v| v.len() != target.rank) {
            return Err(CohomologyError::InvalidPairing("table shape".into()));
        }
        let pairing = Pairing {
            left: left.clone(),
            right: right.clone(),
            target: target.clone(),
            table,
        };
        for r in left.relations.rows() {
            for j in 0..right.rank {
                if !target.is_zero(&pairing.apply_raw(r, &unit_vector(right.rank, j))) {
                    return Err(CohomologyError::InvalidPairing("left relations".into()));
                }
            }
        }
        for r in right.relations.rows() {
            for i in 0..left.rank {
                if !target.is_zero(&pairing.apply_raw(&unit_vector(left.rank, i), r)) {
                    return Err(CohomologyError::InvalidPairing("right relations".into()));
                }
            }
        }
        for g in left.group.elements() {
            for i in 0..left.rank {
                for j in 0..right.rank {
                    let (a, b) = (unit_vector(left.rank, i), unit_vector(right.rank, j));
                    let lhs = pairing.apply(&left.act(g, &a), &right.act(g, &b));
                    let rhs = target.act(g, &pairing.apply(&a, &b));
                    if !target.equal(&lhs, &rhs) {
                        return Err(CohomologyError::InvalidPairing("not equivariant".into()));
                    }
                }
            }
        }
        Ok(pairing)
    }

    /// Multiplication of rank-one modules, `e x f -> e`.
    pub fn scalar(left: &GModule, right: &GModule, target: &GModule) -> Result<Self> {
        Self::new(left, right, target, vec![vec![1]])
    }

    fn apply_raw(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let md = self.target.modulus;
        let mut out = vec![0; self.target.rank];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                let s = md.mul(x, y);
                if s != 0 {
                    out = vec_add(md, &out, &vec_scale(md, &self.table[i * self.right.rank + j], s));
                }
            }
        }
        out
    }

    pub fn apply(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        self.target.canonical(&self.apply_raw(a, b))
    }

    /// `N x M -> P`, `(b, a) -> pairing(a, b)`.
    pub fn swapped(&self) -> Pairing {
        let table = (0..self.right.rank)
            .flat_map(|j| (0..self.left.rank).map(move |i| (i, j)))
            .map(|(i, j)| self.table[i * self.right.rank + j].clone())
            .collect();
        Pairing {
            left: self.right.clone(),
            right: self.left.clone(),
            target: self.target.clone(),
            table,
        }
    }

    pub fn target(&self) -> &GModule {
        &self.target
    }
}

/// `(a ∪ b)(g_1..g_{m+n}) = a(g_1..g_m) * (g_1...g_m) b(g_{m+1}..g_{m+n})`.
pub fn cup_product(pairing: &Pairing, a: &Cochain, b: &Cochain) -> Cochain {
    let group = &pairing.left.group;
    let order = group.order();
    let (m, n) = (a.degree, b.degree);
    let values = (0..order.pow((m + n) as u32))
        .map(|idx| {
            let t = tuple_of(order, m + n, idx);
            let prod = t[..m].iter().fold(group.identity(), |acc, &g| group.mul(acc, g));
            let bv = pairing.right.act(prod, b.value(order, &t[m..]));
            pairing.apply(a.value(order, &t[..m]), &bv)
        })
        .collect();
    Cochain {
        degree: m + n,
        values,
    }
}

/// `Hom_{Z/p^R}(A, B)` with the conjugation action.
#[derive(Clone, Debug)]
pub struct HomModule {
    pub module: GModule,
    source: GModule,
    target: GModule,
    src: Simplified,
    tgt: Simplified,
}

impl HomModule {
    fn new(a: &GModule, b: &GModule) -> Result<Self> {
        if a.modulus != b.modulus || a.group != b.group {
            return Err(CohomologyError::Mismatch);
        }
        let md = a.modulus;
        let src = Simplified::new(a)?;
        let tgt = Simplified::new(b)?;
        let (ta, tb) = (src.exps.len(), tgt.exps.len());
        let mut relations = Vec::new();
        for i in 0..ta {
            for j in 0..tb {
                let e = src.exps[i].min(tgt.exps[j]);
                if e < md.exponent() {
                    let mut r = vec![0; ta * tb];
                    r[i * tb + j] = md.p().pow(e);
                    relations.push(r);
                }
            }
        }
        let mut hom = HomModule {
            module: GModule::trivial_free(a.group.clone(), md, ta * tb),
            source: a.clone(),
            target: b.clone(),
            src,
            tgt,
        };
        let group = a.group.clone();
        let mut action = Vec::with_capacity(group.order());
        for g in group.elements() {
            let ainv = a.action_matrix(group.inv(g));
            let bg = b.action_matrix(g);
            let rows = (0..ta * tb)
                .map(|idx| {
                    let f = hom.to_matrix(&unit_vector(ta * tb, idx));
                    let conj = ainv.mul(&f).and_then(|x| x.mul(bg)).expect("shapes");
                    hom.from_matrix(&conj)
                })
                .collect::<Result<Vec<_>>>()?;
            action.push(ResidueMatrix::from_rows(md, ta * tb, &rows)?);
        }
        hom.module = GModule::new(group, md, ta * tb, relations, action)?;
        Ok(hom)
    }

    pub fn source(&self) -> &GModule {
        &self.source
    }

    pub fn target(&self) -> &GModule {
        &self.target
    }

    fn shift(&self, i: usize, j: usize) -> u32 {
        self.tgt.exps[j].saturating_sub(self.src.exps[i])
    }

    /// The homomorphism as a matrix on the ambient coordinates of the
    /// source (row `l` is the image of `e_l`).
    pub fn to_matrix(&self, v: &[u64]) -> ResidueMatrix {
        let md = self.source.modulus;
        let (ta, tb) = (self.src.exps.len(), self.tgt.exps.len());
        // images of the simplified generators, in simplified target coords
        let gen_images: Vec<Vec<u64>> = (0..ta)
            .map(|i| {
                (0..tb)
                    .map(|j| md.mul(v[i * tb + j], md.p().pow(self.shift(i, j))))
                    .collect()
            })
            .collect();
        let rows: Vec<Vec<u64>> = (0..self.source.rank)
            .map(|l| {
                let coords = self.src.to_simple(&unit_vector(self.source.rank, l));
                let mut img = vec![0; tb];
                for (c, gi) in coords.iter().zip(&gen_images) {
                    img = vec_add(md, &img, &vec_scale(md, gi, *c));
                }
                self.tgt.from_simple(&img)
            })
            .collect();
        ResidueMatrix::from_rows(md, self.target.rank, &rows).expect("widths")
    }

    pub fn from_matrix(&self, f: &ResidueMatrix) -> Result<Vec<u64>> {
        let md = self.source.modulus;
        let (ta, tb) = (self.src.exps.len(), self.tgt.exps.len());
        let mut out = vec![0; ta * tb];
        for i in 0..ta {
            let s = self.src.structure.generators()[i].clone();
            let img = self.tgt.to_simple(&f.apply(&s));
            for j in 0..tb {
                let shift = md.p().pow(self.shift(i, j));
                if img[j] % shift != 0 {
                    return Err(CohomologyError::InvalidMap("not a homomorphism".into()));
                }
                let ord = md.p().pow(self.src.exps[i].min(self.tgt.exps[j]));
                out[i * tb + j] = (img[j] / shift) % ord;
            }
        }
        Ok(out)
    }

    /// Applies the homomorphism `v` to an element of the source.
    pub fn evaluate(&self, v: &[u64], x: &[u64]) -> Vec<u64> {
        self.target.canonical(&self.to_matrix(v).apply(x))
    }
}

/// `W_r(A)(chi^n)` as a `Z/p^R`-module on the generators `V^j [b_i]`,
/// index `j * dim + i`.
#[derive(Clone, Debug)]
pub struct WittModule {
    pub module: GModule,
    ring: WittRing<FiniteAlgebra>,
    algebra: FiniteAlgebra,
    action: AlgebraAction,
    twist: Character,
    power: i64,
    basis: Vec<WittVector<Vec<u64>>>,
}

pub fn wittmod_from_algebra(
    alg: &FiniteAlgebra,
    action: &AlgebraAction,
    r: usize,
    twist: &Character,
    power: i64,
) -> Result<WittModule> {
    let md = twist.modulus();
    if md.p() != alg.p() || (md.exponent() as usize) < r || twist.group() != action.group() {
        return Err(CohomologyError::Mismatch);
    }
    let ring = WittRing::new(alg.clone(), r)?;
    let d = alg.dim();
    let mut basis = Vec::with_capacity(r * d);
    for j in 0..r {
        for i in 0..d {
            let mut w = ring.teichmuller(&alg.basis_vector(i));
            for _ in 0..j {
                w = ring.verschiebung(&w);
            }
            basis.push(w);
        }
    }
    let mut wm = WittModule {
        module: GModule::trivial_free(action.group().clone(), md, r * d),
        ring,
        algebra: alg.clone(),
        action: action.clone(),
        twist: twist.clone(),
        power,
        basis,
    };
    let p = alg.p();
    let relations: Vec<Vec<u64>> = (0..r * d)
        .map(|idx| {
            let pw = wm.ring.scale_int(&wm.basis[idx], p as i64);
            let mut row = vec_neg(md, &wm.digits(&pw));
            row[idx] = md.add(row[idx], p);
            row
        })
        .collect();
    let chi = twist.pow(power);
    let group = action.group().clone();
    let mats = group
        .elements()
        .map(|g| {
            let rows: Vec<Vec<u64>> = (0..r * d)
                .map(|idx| {
                    let moved = wm.ring.map_components(&wm.basis[idx], |a| action.apply(g, a));
                    vec_scale(md, &wm.digits(&moved), chi.value(g))
                })
                .collect();
            ResidueMatrix::from_rows(md, r * d, &rows).expect("widths")
        })
        .collect();
    wm.module = GModule::new(group, md, r * d, relations, mats)?;
    Ok(wm)
}

impl WittModule {
    pub fn length(&self) -> usize {
        self.ring.length()
    }

    pub fn ring(&self) -> &WittRing<FiniteAlgebra> {
        &self.ring
    }

    pub fn algebra(&self) -> &FiniteAlgebra {
        &self.algebra
    }

    pub fn action(&self) -> &AlgebraAction {
        &self.action
    }

    pub fn twist(&self) -> &Character {
        &self.twist
    }

    pub fn power(&self) -> i64 {
        self.power
    }

    /// Greedy expansion `w = sum x_{ji} V^j [b_i]` with digits in `[0, p)`.
    pub fn digits(&self, w: &WittVector<Vec<u64>>) -> Vec<u64> {
        let d = self.algebra.dim();
        let r = self.length();
        let mut rest = w.clone();
        let mut out = vec![0; r * d];
        for j in 0..r {
            let a = rest.components[j].clone();
            for (i, &lambda) in a.iter().enumerate() {
                if lambda == 0 {
                    continue;
                }
                out[j * d + i] = lambda;
                let term = self.ring.scale_int(&self.basis[j * d + i], lambda as i64);
                rest = self.ring.sub(&rest, &term);
            }
            debug_assert!(rest.components[j].iter().all(|&x| x == 0));
        }
        debug_assert_eq!(rest, self.ring.zero());
        out
    }

    /// The Witt vector represented by a module vector.
    pub fn to_witt(&self, v: &[u64]) -> WittVector<Vec<u64>> {
        let mut acc = self.ring.zero();
        for (x, b) in v.iter().zip(&self.basis) {
            if *x != 0 {
                acc = self.ring.add(&acc, &self.ring.scale_int(b, *x as i64));
            }
        }
        acc
    }

    pub fn from_witt(&self, w: &WittVector<Vec<u64>>) -> Vec<u64> {
        self.module.canonical(&self.digits(w))
    }

    /// `[a]` as a module vector.
    pub fn teichmuller(&self, a: &[u64]) -> Vec<u64> {
        self.from_witt(&self.ring.teichmuller(&a.to_vec()))
    }

    /// `W_r(Frob^m)`.
    pub fn frobenius_map(&self, m: u32) -> Result<GMap> {
        let rows = self
            .basis
            .iter()
            .map(|b| {
                let mut w = b.clone();
                for _ in 0..m {
                    w = self.ring.frobenius(&w);
                }
                self.digits(&w)
            })
            .collect();
        GMap::new(&self.module, &self.module, rows)
    }

    /// `W_r(f)` into another Witt module of the same length and twist, for
    /// an equivariant algebra map `f` (rows = images of basis vectors).
    pub fn algebra_map(&self, other: &WittModule, f: &ResidueMatrix) -> Result<GMap> {
        if other.length() != self.length() {
            return Err(CohomologyError::Mismatch);
        }
        let rows = self
            .basis
            .iter()
            .map(|b| {
                let comps = b.components.iter().map(|a| f.apply(a)).collect();
                other.digits(&other.ring.vector(comps).expect("length"))
            })
            .collect();
        GMap::new(&self.module, &other.module, rows)
    }

    /// The truncation `W_r -> W_s` for `s <= r`.
    pub fn reduction_to(&self, other: &WittModule) -> Result<GMap> {
        let s = other.length();
        if s > self.length() || other.algebra != self.algebra {
            return Err(CohomologyError::Mismatch);
        }
        let rows = self
            .basis
            .iter()
            .map(|b| {
                let t = crate::witt::truncate(b, s).expect("s <= r");
                let t = other.ring.vector(t.components).expect("length");
                other.digits(&t)
            })
            .collect();
        GMap::new(&self.module, &other.module, rows)
    }

    /// `V^{s-r}: W_r -> W_s` for `s >= r`.
    pub fn verschiebung_into(&self, other: &WittModule) -> Result<GMap> {
        let (r, s) = (self.length(), other.length());
        if s < r || other.algebra != self.algebra {
            return Err(CohomologyError::Mismatch);
        }
        let d = self.algebra.dim();
        let rows = (0..r * d)
            .map(|idx| unit_vector(s * d, idx + (s - r) * d))
            .collect();
        GMap::new(&self.module, &other.module, rows)
    }
}

/// `W_r(Frob^m)^*` on a cocycle.
pub fn frobenius_pullback(wm: &WittModule, c: &Cochain, m: u32) -> Result<Cochain> {
    Ok(map_cochain(&wm.frobenius_map(m)?, c))
}
