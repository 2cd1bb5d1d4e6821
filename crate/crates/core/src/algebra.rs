//! Finite groups, finite-dimensional commutative F_p-algebras and group
//! actions on them.
//!
//! Matrices act on row vectors: the row `i` of an action matrix is the image
//! of the basis vector `e_i`, so `x -> x * M_g` and `M_{gh} = M_h * M_g`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{
    is_prime, kernel_basis, HowellForm, LinearSolver, Modulus, ResidueMatrix,
};
use crate::witt::CommRing;

/// Default cap on group order for subgroup enumeration.
pub const DEFAULT_GROUP_BOUND: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("invalid group table: {0}")]
    InvalidGroup(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("polynomial {0:?} is reducible over F_{1}")]
    Reducible(Vec<u64>, u64),
    #[error("invalid structure constants: {0}")]
    InvalidStructure(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("elements {0:?} do not form a subgroup")]
    NotSubgroup(Vec<usize>),
    #[error("{what} = {size} exceeds bound {bound}")]
    BoundExceeded {
        what: &'static str,
        size: usize,
        bound: usize,
    },
    #[error("subspace is not a unital subalgebra")]
    NotSubalgebra,
    #[error("element is not fixed by the subgroup")]
    NotInvariant,
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    pub fn trivial() -> Self {
        Self::cyclic(1)
    }

    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1, "cyclic group of order zero");
        let table = (0..n * n).map(|k| (k / n + k % n) % n).collect();
        FiniteGroup {
            order: n,
            table,
            identity: 0,
            inverse: (0..n).map(|i| (n - i) % n).collect(),
        }
    }

    /// `(a, b)` is stored at index `a * |other| + b`.
    pub fn direct_product(&self, other: &FiniteGroup) -> Self {
        let (n, m) = (self.order, other.order);
        let mut table = vec![0; n * m * n * m];
        for a in 0..n * m {
            for b in 0..n * m {
                let x = self.mul(a / m, b / m);
                let y = other.mul(a % m, b % m);
                table[a * n * m + b] = x * m + y;
            }
        }
        FiniteGroup {
            order: n * m,
            table,
            identity: self.identity * m + other.identity,
            inverse: (0..n * m)
                .map(|a| self.inv(a / m) * m + other.inv(a % m))
                .collect(),
        }
    }

    pub fn from_table(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(AlgebraError::InvalidGroup("empty table".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(AlgebraError::InvalidGroup(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&x| x >= n) {
                return Err(AlgebraError::InvalidGroup(format!(
                    "entry {bad} in row {i} is out of range"
                )));
            }
        }
        let table: Vec<usize> = rows.iter().flatten().copied().collect();
        let mul = |a: usize, b: usize| table[a * n + b];
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| mul(e, x) == x && mul(x, e) == x))
            .ok_or_else(|| AlgebraError::InvalidGroup("no identity element".into()))?;
        let mut inverse = vec![0; n];
        for (x, slot) in inverse.iter_mut().enumerate() {
            *slot = (0..n)
                .find(|&y| mul(x, y) == identity && mul(y, x) == identity)
                .ok_or_else(|| AlgebraError::InvalidGroup(format!("element {x} has no inverse")))?;
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if mul(mul(a, b), c) != mul(a, mul(b, c)) {
                        return Err(AlgebraError::InvalidGroup(format!(
                            "not associative at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroup {
            order: n,
            table,
            identity,
            inverse,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn pow(&self, a: usize, k: usize) -> usize {
        (0..k).fold(self.identity, |acc, _| self.mul(acc, a))
    }

    pub fn element_order(&self, a: usize) -> usize {
        let mut x = a;
        let mut k = 1;
        while x != self.identity {
            x = self.mul(x, a);
            k += 1;
        }
        k
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    pub fn table_rows(&self) -> Vec<Vec<usize>> {
        self.table.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    pub fn is_abelian(&self) -> bool {
        self.elements()
            .all(|a| self.elements().all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// A cyclic generator, if the group is cyclic.
    pub fn cyclic_generator(&self) -> Option<usize> {
        self.elements().find(|&g| self.element_order(g) == self.order)
    }

    /// Closure of a set of elements under multiplication.
    pub fn generated(&self, gens: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.order];
        seen[self.identity] = true;
        let mut queue = VecDeque::from([self.identity]);
        while let Some(x) = queue.pop_front() {
            for &g in gens {
                let y = self.mul(x, g);
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        (0..self.order).filter(|&i| seen[i]).collect()
    }

    /// A generating set chosen greedily in index order.
    pub fn generators(&self) -> Vec<usize> {
        let mut gens = Vec::new();
        let mut span = self.generated(&[]);
        for g in self.elements() {
            if !span.contains(&g) {
                gens.push(g);
                span = self.generated(&gens);
            }
        }
        gens
    }

    pub fn subgroup(&self, elements: &[usize]) -> Result<Subgroup> {
        let set: BTreeSet<usize> = elements.iter().copied().collect();
        let closed = set.contains(&self.identity)
            && set.iter().all(|&a| a < self.order)
            && set.iter().all(|&a| {
                set.contains(&self.inv(a))
                    && set.iter().all(|&b| set.contains(&self.mul(a, b)))
            });
        if !closed {
            return Err(AlgebraError::NotSubgroup(elements.to_vec()));
        }
        Ok(Subgroup {
            elements: set.into_iter().collect(),
        })
    }

    pub fn whole(&self) -> Subgroup {
        Subgroup {
            elements: self.elements().collect(),
        }
    }

    pub fn trivial_subgroup(&self) -> Subgroup {
        Subgroup {
            elements: vec![self.identity],
        }
    }

    /// Every subgroup, sorted by order and then by element list.
    pub fn subgroups(&self) -> Result<Vec<Subgroup>> {
        self.subgroups_bounded(DEFAULT_GROUP_BOUND)
    }

    pub fn subgroups_bounded(&self, bound: usize) -> Result<Vec<Subgroup>> {
        if self.order > bound {
            return Err(AlgebraError::BoundExceeded {
                what: "group order",
                size: self.order,
                bound,
            });
        }
        let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
        let start = vec![self.identity];
        found.insert(start.clone());
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for g in self.elements() {
                if s.binary_search(&g).is_ok() {
                    continue;
                }
                let mut gens = s.clone();
                gens.push(g);
                let t = self.generated(&gens);
                if found.insert(t.clone()) {
                    queue.push_back(t);
                }
            }
        }
        let mut out: Vec<Subgroup> = found
            .into_iter()
            .map(|elements| Subgroup { elements })
            .collect();
        out.sort_by(|a, b| a.order().cmp(&b.order()).then(a.elements.cmp(&b.elements)));
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subgroup {
    elements: Vec<usize>,
}

impl Subgroup {
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, g: usize) -> bool {
        self.elements.binary_search(&g).is_ok()
    }

    pub fn index_in(&self, group: &FiniteGroup) -> usize {
        group.order() / self.order()
    }

    /// Local index of a member element.
    pub fn local(&self, g: usize) -> Option<usize> {
        self.elements.binary_search(&g).ok()
    }

    /// The subgroup as a group in its own right; local index `i` is
    /// `elements[i]`.
    pub fn to_group(&self, group: &FiniteGroup) -> FiniteGroup {
        let n = self.order();
        let rows: Vec<Vec<usize>> = self
            .elements
            .iter()
            .map(|&a| {
                self.elements
                    .iter()
                    .map(|&b| self.local(group.mul(a, b)).expect("closed"))
                    .collect()
            })
            .collect();
        let g = FiniteGroup::from_table(&rows).expect("subgroup table is a group");
        debug_assert_eq!(g.order(), n);
        g
    }

    /// Representatives `x_j` of the right cosets `H x_j`: the identity for
    /// `H` itself, otherwise the least element of the coset.
    pub fn right_coset_reps(&self, group: &FiniteGroup) -> Vec<usize> {
        let mut seen = vec![false; group.order()];
        let mut reps = Vec::new();
        let order = std::iter::once(group.identity()).chain(group.elements());
        for g in order {
            if seen[g] {
                continue;
            }
            reps.push(g);
            for &h in &self.elements {
                seen[group.mul(h, g)] = true;
            }
        }
        reps
    }

    /// Representatives of the left cosets `g H`.
    pub fn left_coset_reps(&self, group: &FiniteGroup) -> Vec<usize> {
        let mut seen = vec![false; group.order()];
        let mut reps = Vec::new();
        let order = std::iter::once(group.identity()).chain(group.elements());
        for g in order {
            if seen[g] {
                continue;
            }
            reps.push(g);
            for &h in &self.elements {
                seen[group.mul(g, h)] = true;
            }
        }
        reps
    }

    pub fn is_normal(&self, group: &FiniteGroup) -> bool {
        group.elements().all(|g| {
            self.elements
                .iter()
                .all(|&h| self.contains(group.mul(group.mul(g, h), group.inv(g))))
        })
    }

    /// The quotient `G/N` with cosets ordered by least element, and the
    /// projection `G -> G/N`.
    pub fn quotient(&self, group: &FiniteGroup) -> Result<(FiniteGroup, Vec<usize>)> {
        if !self.is_normal(group) {
            return Err(AlgebraError::NotSubgroup(self.elements.clone()));
        }
        let reps = self.right_coset_reps(group);
        let mut proj = vec![0; group.order()];
        for (j, &x) in reps.iter().enumerate() {
            for &h in &self.elements {
                proj[group.mul(h, x)] = j;
            }
        }
        let rows: Vec<Vec<usize>> = reps
            .iter()
            .map(|&a| reps.iter().map(|&b| proj[group.mul(a, b)]).collect())
            .collect();
        Ok((FiniteGroup::from_table(&rows)?, proj))
    }
}

/// Decomposes `g = h * x_j` against right coset representatives.
pub fn right_coset_decompose(
    group: &FiniteGroup,
    sub: &Subgroup,
    reps: &[usize],
    g: usize,
) -> (usize, usize) {
    for (j, &x) in reps.iter().enumerate() {
        let h = group.mul(g, group.inv(x));
        if sub.contains(h) {
            return (j, h);
        }
    }
    unreachable!("coset representatives cover the group")
}

/// Linear algebra over F_p used throughout this module.
pub(crate) fn fp(p: u64) -> Modulus {
    Modulus::prime_power(p, 1).expect("prime")
}

pub(crate) fn mat(p: u64, cols: usize, rows: &[Vec<u64>]) -> ResidueMatrix {
    ResidueMatrix::from_rows(fp(p), cols, rows).expect("consistent widths")
}

/// Echelon basis of the span of `rows` over F_p.
pub(crate) fn span_basis(p: u64, cols: usize, rows: &[Vec<u64>]) -> Vec<Vec<u64>> {
    HowellForm::from_rows(fp(p), cols, rows.to_vec()).rows().to_vec()
}

/// A finite-dimensional commutative unital F_p-algebra given by structure
/// constants `e_i * e_j = sum_k c[i][j][k] e_k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteAlgebra {
    p: u64,
    dim: usize,
    consts: Vec<u64>,
    unit: Vec<u64>,
}

impl FiniteAlgebra {
    pub fn new(p: u64, dim: usize, consts: Vec<u64>, unit: Vec<u64>) -> Result<Self> {
        if !is_prime(p) {
            return Err(AlgebraError::NotPrime(p));
        }
        if consts.len() != dim * dim * dim || unit.len() != dim {
            return Err(AlgebraError::InvalidStructure(format!(
                "expected {} constants and a unit of length {dim}",
                dim * dim * dim
            )));
        }
        let alg = FiniteAlgebra {
            p,
            dim,
            consts: consts.into_iter().map(|c| c % p).collect(),
            unit: unit.into_iter().map(|c| c % p).collect(),
        };
        alg.validate()?;
        Ok(alg)
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim;
        let basis: Vec<Vec<u64>> = (0..d).map(|i| self.basis_vector(i)).collect();
        for i in 0..d {
            if self.mul(&self.unit, &basis[i]) != basis[i] {
                return Err(AlgebraError::InvalidStructure(format!(
                    "unit does not fix e_{i}"
                )));
            }
            for j in 0..d {
                let ij = self.mul(&basis[i], &basis[j]);
                if ij != self.mul(&basis[j], &basis[i]) {
                    return Err(AlgebraError::InvalidStructure(format!(
                        "e_{i} e_{j} != e_{j} e_{i}"
                    )));
                }
                for k in 0..d {
                    if self.mul(&ij, &basis[k]) != self.mul(&basis[i], &self.mul(&basis[j], &basis[k])) {
                        return Err(AlgebraError::InvalidStructure(format!(
                            "not associative at (e_{i}, e_{j}, e_{k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn prime_field(p: u64) -> Result<Self> {
        Self::new(p, 1, vec![1], vec![1])
    }

    /// `F_p[x]/(f)` for a monic irreducible `f`, coefficients low to high.
    pub fn finite_field(p: u64, poly: &[u64]) -> Result<Self> {
        if !is_prime(p) {
            return Err(AlgebraError::NotPrime(p));
        }
        let poly: Vec<u64> = poly.iter().map(|c| c % p).collect();
        let deg = poly.len().saturating_sub(1);
        if deg == 0 || poly[deg] != 1 {
            return Err(AlgebraError::InvalidStructure(
                "polynomial must be monic of positive degree".into(),
            ));
        }
        if !is_irreducible(p, &poly) {
            return Err(AlgebraError::Reducible(poly, p));
        }
        Ok(Self::quotient_by_monic(p, &poly))
    }

    /// `F_p[x]/(x^k)`.
    pub fn truncated_poly(p: u64, k: usize) -> Result<Self> {
        if !is_prime(p) {
            return Err(AlgebraError::NotPrime(p));
        }
        if k == 0 {
            return Err(AlgebraError::InvalidStructure("k must be positive".into()));
        }
        let mut poly = vec![0; k + 1];
        poly[k] = 1;
        Ok(Self::quotient_by_monic(p, &poly))
    }

    fn quotient_by_monic(p: u64, poly: &[u64]) -> Self {
        let deg = poly.len() - 1;
        let mut consts = vec![0; deg * deg * deg];
        for i in 0..deg {
            for j in 0..deg {
                // x^{i+j} reduced mod f
                let mut v = vec![0u64; 2 * deg];
                v[i + j] = 1;
                for t in (deg..2 * deg).rev() {
                    let c = v[t];
                    if c != 0 {
                        v[t] = 0;
                        for (s, &f) in poly.iter().enumerate().take(deg) {
                            v[t - deg + s] = (v[t - deg + s] + (p - f) * c) % p;
                        }
                    }
                }
                for k in 0..deg {
                    consts[(i * deg + j) * deg + k] = v[k];
                }
            }
        }
        let mut unit = vec![0; deg];
        unit[0] = 1;
        FiniteAlgebra {
            p,
            dim: deg,
            consts,
            unit,
        }
    }

    pub fn product(factors: &[FiniteAlgebra]) -> Result<Self> {
        let p = factors
            .first()
            .ok_or_else(|| AlgebraError::InvalidStructure("empty product".into()))?
            .p;
        if factors.iter().any(|f| f.p != p) {
            return Err(AlgebraError::InvalidStructure("mixed characteristics".into()));
        }
        let dim: usize = factors.iter().map(|f| f.dim).sum();
        let mut consts = vec![0; dim * dim * dim];
        let mut unit = Vec::with_capacity(dim);
        let mut off = 0;
        for f in factors {
            for i in 0..f.dim {
                for j in 0..f.dim {
                    for k in 0..f.dim {
                        consts[((off + i) * dim + off + j) * dim + off + k] = f.c(i, j, k);
                    }
                }
            }
            unit.extend_from_slice(&f.unit);
            off += f.dim;
        }
        Ok(FiniteAlgebra {
            p,
            dim,
            consts,
            unit,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn unit(&self) -> &[u64] {
        &self.unit
    }

    pub fn c(&self, i: usize, j: usize, k: usize) -> u64 {
        self.consts[(i * self.dim + j) * self.dim + k]
    }

    pub fn basis_vector(&self, i: usize) -> Vec<u64> {
        let mut v = vec![0; self.dim];
        v[i] = 1;
        v
    }

    pub fn size(&self) -> u128 {
        (self.p as u128).pow(self.dim as u32)
    }

    /// Row `i` is `e_i * a`.
    pub fn multiplication_matrix(&self, a: &[u64]) -> ResidueMatrix {
        let rows: Vec<Vec<u64>> = (0..self.dim)
            .map(|i| self.mul(&self.basis_vector(i), &a.to_vec()))
            .collect();
        mat(self.p, self.dim, &rows)
    }

    /// Row `i` is `e_i^p`; the map `x -> x^p` is `x -> x * F`.
    pub fn frobenius_matrix(&self) -> ResidueMatrix {
        let rows: Vec<Vec<u64>> = (0..self.dim)
            .map(|i| self.pow(&self.basis_vector(i), self.p))
            .collect();
        mat(self.p, self.dim, &rows)
    }

    pub fn frobenius_power_matrix(&self, m: u32) -> ResidueMatrix {
        let f = self.frobenius_matrix();
        (0..m).fold(ResidueMatrix::identity(fp(self.p), self.dim), |acc, _| {
            acc.mul(&f).expect("square")
        })
    }

    pub fn frobenius(&self, a: &[u64]) -> Vec<u64> {
        self.pow(&a.to_vec(), self.p)
    }

    pub fn is_perfect(&self) -> bool {
        kernel_basis(&self.frobenius_matrix()).is_zero()
    }

    /// Echelon basis of the nilradical, computed as `ker Frob^t` with
    /// `p^t >= dim`.
    pub fn nilradical(&self) -> Vec<Vec<u64>> {
        let mut t = 0;
        while (self.p as usize).pow(t) < self.dim.max(1) {
            t += 1;
        }
        let k = kernel_basis(&self.frobenius_power_matrix(t));
        span_basis(self.p, self.dim, &k.row_vecs())
    }

    /// `(k, m)`: `k` minimal with `N^k = 0`, `m` minimal with `p^m >= k`.
    pub fn nilpotency_data(&self) -> (usize, u32) {
        let n = self.nilradical();
        let mut k = 1;
        let mut power = n.clone();
        while !power.is_empty() {
            let mut prods = Vec::new();
            for x in &power {
                for y in &n {
                    prods.push(self.mul(x, y));
                }
            }
            power = span_basis(self.p, self.dim, &prods);
            k += 1;
        }
        let mut m = 0;
        while (self.p as usize).pow(m) < k {
            m += 1;
        }
        (k, m)
    }

    /// Echelon basis of the unital subalgebra generated by `gens`.
    pub fn generated_subalgebra(&self, gens: &[Vec<u64>]) -> Vec<Vec<u64>> {
        let mut rows = vec![self.unit.clone()];
        rows.extend(gens.iter().cloned());
        let mut basis = span_basis(self.p, self.dim, &rows);
        loop {
            let mut all = basis.clone();
            for x in &basis {
                for y in &basis {
                    all.push(self.mul(x, y));
                }
            }
            let next = span_basis(self.p, self.dim, &all);
            if next.len() == basis.len() {
                return next;
            }
            basis = next;
        }
    }

    /// The subalgebra spanned by `basis` (independent rows), with its
    /// inclusion matrix (rows = basis).
    pub fn subalgebra(&self, basis: &[Vec<u64>]) -> Result<(FiniteAlgebra, ResidueMatrix)> {
        let d = basis.len();
        let incl = mat(self.p, self.dim, basis);
        let solver = LinearSolver::new(&incl);
        let coords = |v: &[u64]| -> Result<Vec<u64>> {
            solver
                .solve(v)
                .expect("dimensions match")
                .ok_or(AlgebraError::NotSubalgebra)
        };
        let unit = coords(&self.unit)?;
        let mut consts = vec![0; d * d * d];
        for i in 0..d {
            for j in 0..d {
                let prod = coords(&self.mul(&basis[i], &basis[j]))?;
                for k in 0..d {
                    consts[(i * d + j) * d + k] = prod[k];
                }
            }
        }
        let sub = FiniteAlgebra::new(self.p, d, consts, unit)?;
        Ok((sub, incl))
    }

    /// Primitive idempotents of the split subalgebra `{b : b^p = b}`.
    ///
    /// Every element `y` there satisfies `y^p = y`, so `1 - (y - c)^{p-1}` is
    /// the idempotent of the eigenvalue `c`. Refining by a basis gives the
    /// primitive idempotents without enumerating the algebra.
    pub fn primitive_idempotents(&self) -> Vec<Vec<u64>> {
        let f = self.frobenius_matrix();
        let id = ResidueMatrix::identity(fp(self.p), self.dim);
        let mut diff = f.clone();
        for i in 0..self.dim {
            diff.set(i, i, (f.get(i, i) + self.p - id.get(i, i)) % self.p);
        }
        let split = span_basis(self.p, self.dim, &kernel_basis(&diff).row_vecs());
        let mut idems = vec![self.unit.clone()];
        for y in &split {
            let mut next = Vec::new();
            for e in &idems {
                for c in 0..self.p {
                    let shifted = self.sub(y, &self.scalar(c));
                    let t = self.sub(&self.unit, &self.pow(&shifted, self.p - 1));
                    let piece = self.mul(e, &t);
                    if piece.iter().any(|&x| x != 0) {
                        next.push(piece);
                    }
                }
            }
            idems = next;
        }
        idems.sort();
        idems
    }

    pub fn scalar(&self, c: u64) -> Vec<u64> {
        self.unit.iter().map(|&u| u * (c % self.p) % self.p).collect()
    }

    pub fn scale(&self, a: &[u64], c: u64) -> Vec<u64> {
        a.iter().map(|&x| x * (c % self.p) % self.p).collect()
    }

    /// Decomposition `A -> A_red = B = prod k_i`.
    pub fn residue_decomposition(&self) -> ResidueDecomposition {
        let (_, m) = self.nilpotency_data();
        let frob_m = self.frobenius_power_matrix(m);
        let sep = span_basis(self.p, self.dim, &frob_m.row_vecs());
        let nil = self.nilradical();
        // Projection A = B + N -> B, in A-coordinates.
        let mut both = sep.clone();
        both.extend(nil.iter().cloned());
        let solver = LinearSolver::new(&mat(self.p, self.dim, &both));
        let project = |v: &[u64]| -> Vec<u64> {
            let x = solver.solve(v).expect("dims").expect("A = B + N");
            let mut out = vec![0; self.dim];
            for (c, b) in x.iter().zip(&sep) {
                for (o, &bb) in out.iter_mut().zip(b) {
                    *o = (*o + c * bb) % self.p;
                }
            }
            out
        };
        let projection = mat(
            self.p,
            self.dim,
            &(0..self.dim)
                .map(|i| project(&self.basis_vector(i)))
                .collect::<Vec<_>>(),
        );
        let idempotents = self.primitive_idempotents();
        let mut fields = Vec::new();
        let mut inclusions = Vec::new();
        for e in &idempotents {
            let rows: Vec<Vec<u64>> = sep.iter().map(|b| self.mul(e, b)).collect();
            let basis = span_basis(self.p, self.dim, &rows);
            let (k, incl) = self
                .ideal_algebra(&basis, e)
                .expect("e B is a field with unit e");
            fields.push(k);
            inclusions.push(incl);
        }
        let product = FiniteAlgebra::product(&fields).expect("nonempty");
        // natural map: x -> (coords of e_i * proj(x) in k_i)_i
        let natural_rows: Vec<Vec<u64>> = (0..self.dim)
            .map(|i| {
                let b = projection.row(i).to_vec();
                let mut out = Vec::new();
                for (e, incl) in idempotents.iter().zip(&inclusions) {
                    let piece = self.mul(e, &b);
                    let c = LinearSolver::new(incl)
                        .solve(&piece)
                        .expect("dims")
                        .expect("in factor");
                    out.extend(c);
                }
                out
            })
            .collect();
        ResidueDecomposition {
            frobenius_exponent: m,
            separable_basis: sep,
            nilradical: nil,
            projection,
            idempotents,
            natural_map: mat(self.p, product.dim, &natural_rows),
            fields,
            field_inclusions: inclusions,
            product,
        }
    }

    /// The ideal `e A` spanned by `basis` as an algebra with unit `e`.
    fn ideal_algebra(&self, basis: &[Vec<u64>], e: &[u64]) -> Result<(FiniteAlgebra, ResidueMatrix)> {
        let d = basis.len();
        let incl = mat(self.p, self.dim, basis);
        let solver = LinearSolver::new(&incl);
        let coords = |v: &[u64]| -> Result<Vec<u64>> {
            solver.solve(v).expect("dims").ok_or(AlgebraError::NotSubalgebra)
        };
        let unit = coords(e)?;
        let mut consts = vec![0; d * d * d];
        for i in 0..d {
            for j in 0..d {
                let prod = coords(&self.mul(&basis[i], &basis[j]))?;
                for k in 0..d {
                    consts[(i * d + j) * d + k] = prod[k];
                }
            }
        }
        Ok((FiniteAlgebra::new(self.p, d, consts, unit)?, incl))
    }

    pub fn is_field(&self) -> bool {
        self.nilradical().is_empty() && self.primitive_idempotents().len() == 1
    }
}

/// Exhaustive irreducibility test: no monic factor of degree `<= deg/2`.
fn is_irreducible(p: u64, poly: &[u64]) -> bool {
    let deg = poly.len() - 1;
    for d in 1..=deg / 2 {
        let count = p.pow(d as u32);
        for idx in 0..count {
            let mut q = Vec::with_capacity(d + 1);
            let mut k = idx;
            for _ in 0..d {
                q.push(k % p);
                k /= p;
            }
            q.push(1);
            if poly_rem(p, poly, &q).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn poly_rem(p: u64, a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db {
        let c = *r.last().expect("nonempty");
        let shift = r.len() - 1 - db;
        for (i, &bc) in b.iter().enumerate() {
            r[shift + i] = (r[shift + i] + (p - bc) * c % p) % p;
        }
        r.pop();
    }
    r
}

impl CommRing for FiniteAlgebra {
    type Elem = Vec<u64>;

    fn zero(&self) -> Vec<u64> {
        vec![0; self.dim]
    }

    fn one(&self) -> Vec<u64> {
        self.unit.clone()
    }

    fn add(&self, a: &Vec<u64>, b: &Vec<u64>) -> Vec<u64> {
        a.iter().zip(b).map(|(x, y)| (x + y) % self.p).collect()
    }

    fn neg(&self, a: &Vec<u64>) -> Vec<u64> {
        a.iter().map(|x| (self.p - x) % self.p).collect()
    }

    fn mul(&self, a: &Vec<u64>, b: &Vec<u64>) -> Vec<u64> {
        let d = self.dim;
        let mut out = vec![0u64; d];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                if y == 0 {
                    continue;
                }
                let xy = x * y % self.p;
                let base = (i * d + j) * d;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (*o + xy * self.consts[base + k]) % self.p;
                }
            }
        }
        out
    }

    fn characteristic(&self) -> u64 {
        self.p
    }

    fn elements(&self) -> Vec<Vec<u64>> {
        crate::linalg::all_coordinates(&vec![self.p; self.dim])
    }

    fn from_int(&self, n: i64) -> Vec<u64> {
        self.scalar(n.rem_euclid(self.p as i64) as u64)
    }
}

#[derive(Clone, Debug)]
pub struct ResidueDecomposition {
    /// `m` with `Frob^m(N) = 0`; the separable part is `Frob^m(A)`.
    pub frobenius_exponent: u32,
    pub separable_basis: Vec<Vec<u64>>,
    pub nilradical: Vec<Vec<u64>>,
    /// Projection `A -> B` along `N`, a ring map with kernel `N`.
    pub projection: ResidueMatrix,
    pub idempotents: Vec<Vec<u64>>,
    pub fields: Vec<FiniteAlgebra>,
    /// Rows: basis of `k_i = e_i B` inside `A`.
    pub field_inclusions: Vec<ResidueMatrix>,
    pub product: FiniteAlgebra,
    /// `A -> P(A) = prod k_i`.
    pub natural_map: ResidueMatrix,
}

impl ResidueDecomposition {
    /// Permutation of the factors induced by an algebra automorphism.
    pub fn factor_permutation(&self, alg: &FiniteAlgebra, m: &ResidueMatrix) -> Vec<usize> {
        let _ = alg;
        self.idempotents
            .iter()
            .map(|e| {
                let img = m.apply(e);
                self.idempotents
                    .iter()
                    .position(|f| *f == img)
                    .expect("automorphisms permute primitive idempotents")
            })
            .collect()
    }
}

/// A group acting on an algebra by automorphisms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraAction {
    group: Arc<FiniteGroup>,
    matrices: Vec<ResidueMatrix>,
}

impl AlgebraAction {
    pub fn trivial(group: Arc<FiniteGroup>, alg: &FiniteAlgebra) -> Self {
        let id = ResidueMatrix::identity(fp(alg.p), alg.dim);
        AlgebraAction {
            matrices: vec![id; group.order()],
            group,
        }
    }

    pub fn new(
        group: Arc<FiniteGroup>,
        alg: &FiniteAlgebra,
        matrices: Vec<ResidueMatrix>,
    ) -> Result<Self> {
        if matrices.len() != group.order() {
            return Err(AlgebraError::InvalidAction(format!(
                "expected {} matrices, found {}",
                group.order(),
                matrices.len()
            )));
        }
        let action = AlgebraAction { group, matrices };
        action.validate(alg)?;
        Ok(action)
    }

    /// Extends images of generators to the whole group.
    pub fn from_generators(
        group: Arc<FiniteGroup>,
        alg: &FiniteAlgebra,
        gens: &[(usize, ResidueMatrix)],
    ) -> Result<Self> {
        let n = group.order();
        let id = ResidueMatrix::identity(fp(alg.p), alg.dim);
        let mut mats: Vec<Option<ResidueMatrix>> = vec![None; n];
        mats[group.identity()] = Some(id);
        let mut queue = VecDeque::from([group.identity()]);
        while let Some(x) = queue.pop_front() {
            for (g, mg) in gens {
                let y = group.mul(x, *g);
                // M_{xg} = M_g M_x
                let my = mg
                    .mul(mats[x].as_ref().expect("visited"))
                    .map_err(|e| AlgebraError::InvalidAction(e.to_string()))?;
                match &mats[y] {
                    None => {
                        mats[y] = Some(my);
                        queue.push_back(y);
                    }
                    Some(existing) if *existing != my => {
                        return Err(AlgebraError::InvalidAction(
                            "generator images do not define a homomorphism".into(),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }
        let matrices = mats
            .into_iter()
            .map(|m| m.ok_or_else(|| AlgebraError::InvalidAction("generators do not generate".into())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(group, alg, matrices)
    }

    /// Generator acts on `prod F_i` (identical factors) by moving factor `i`
    /// to `perm[i]` after applying `Frob^{powers[i]}` inside the factor.
    pub fn factor_matrix(
        factors: &[FiniteAlgebra],
        perm: &[usize],
        powers: &[u32],
    ) -> Result<ResidueMatrix> {
        if perm.len() != factors.len() || powers.len() != factors.len() {
            return Err(AlgebraError::InvalidAction("factor data length mismatch".into()));
        }
        let offsets: Vec<usize> = factors
            .iter()
            .scan(0, |acc, f| {
                let o = *acc;
                *acc += f.dim;
                Some(o)
            })
            .collect();
        let dim: usize = factors.iter().map(|f| f.dim).sum();
        let p = factors[0].p;
        let mut rows = vec![vec![0u64; dim]; dim];
        for (i, f) in factors.iter().enumerate() {
            let target = perm[i];
            if target >= factors.len() || factors[target] != *f {
                return Err(AlgebraError::InvalidAction(format!(
                    "factor {i} cannot be sent to factor {target}"
                )));
            }
            let frob = f.frobenius_power_matrix(powers[i]);
            for t in 0..f.dim {
                for s in 0..f.dim {
                    rows[offsets[i] + t][offsets[target] + s] = frob.get(t, s);
                }
            }
        }
        Ok(mat(p, dim, &rows))
    }

    fn validate(&self, alg: &FiniteAlgebra) -> Result<()> {
        let d = alg.dim;
        for (g, m) in self.matrices.iter().enumerate() {
            if m.rows() != d || m.cols() != d || m.modulus().value() != alg.p {
                return Err(AlgebraError::InvalidAction(format!("matrix {g} has wrong shape")));
            }
            if m.apply(alg.unit()) != alg.unit() {
                return Err(AlgebraError::InvalidAction(format!("element {g} moves the unit")));
            }
            if !kernel_basis(m).is_zero() {
                return Err(AlgebraError::InvalidAction(format!("matrix {g} is singular")));
            }
            for i in 0..d {
                for j in 0..d {
                    let ei = alg.basis_vector(i);
                    let ej = alg.basis_vector(j);
                    let lhs = m.apply(&alg.mul(&ei, &ej));
                    let rhs = alg.mul(&m.row(i).to_vec(), &m.row(j).to_vec());
                    if lhs != rhs {
                        return Err(AlgebraError::InvalidAction(format!(
                            "element {g} is not multiplicative on (e_{i}, e_{j})"
                        )));
                    }
                }
            }
        }
        let group = &self.group;
        for a in group.elements() {
            for b in group.elements() {
                let expected = self.matrices[b].mul(&self.matrices[a]).expect("square");
                if self.matrices[group.mul(a, b)] != expected {
                    return Err(AlgebraError::InvalidAction(format!(
                        "not a homomorphism at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn matrix(&self, g: usize) -> &ResidueMatrix {
        &self.matrices[g]
    }

    pub fn matrices(&self) -> &[ResidueMatrix] {
        &self.matrices
    }

    pub fn apply(&self, g: usize, x: &[u64]) -> Vec<u64> {
        self.matrices[g].apply(x)
    }

    pub fn is_trivial(&self) -> bool {
        let d = self.matrices[0].rows();
        let id = ResidueMatrix::identity(self.matrices[0].modulus(), d);
        self.matrices.iter().all(|m| *m == id)
    }

    /// Restriction to a subgroup, in local indices.
    pub fn restrict(&self, sub: &Subgroup) -> AlgebraAction {
        let h = sub.to_group(&self.group);
        AlgebraAction {
            matrices: sub.elements().iter().map(|&g| self.matrices[g].clone()).collect(),
            group: Arc::new(h),
        }
    }

    /// Action on a `G`-stable subalgebra given by its inclusion rows.
    pub fn restrict_to_subalgebra(&self, incl: &ResidueMatrix) -> Result<AlgebraAction> {
        let solver = LinearSolver::new(incl);
        let mut mats = Vec::with_capacity(self.matrices.len());
        for m in &self.matrices {
            let rows = (0..incl.rows())
                .map(|i| {
                    solver
                        .solve(&m.apply(incl.row(i)))
                        .expect("dims")
                        .ok_or_else(|| AlgebraError::InvalidAction("subalgebra is not stable".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            mats.push(ResidueMatrix::from_rows(incl.modulus(), incl.rows(), &rows).expect("widths"));
        }
        Ok(AlgebraAction {
            group: self.group.clone(),
            matrices: mats,
        })
    }

    /// Frobenius commutes with every action matrix.
    pub fn commutes_with_frobenius(&self, alg: &FiniteAlgebra) -> bool {
        let f = alg.frobenius_matrix();
        self.matrices
            .iter()
            .all(|m| m.mul(&f).expect("square") == f.mul(m).expect("square"))
    }
}

/// Fixed subalgebra `A^G` with its inclusion.
pub fn fixed_subring(
    alg: &FiniteAlgebra,
    action: &AlgebraAction,
) -> Result<(FiniteAlgebra, ResidueMatrix)> {
    let d = alg.dim;
    let p = alg.p;
    let n = action.group.order();
    let mut wide = ResidueMatrix::zero(fp(p), d, d * n);
    for (g, m) in action.matrices.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                let v = (m.get(i, j) + p - u64::from(i == j)) % p;
                wide.set(i, g * d + j, v);
            }
        }
    }
    let basis = span_basis(p, d, &kernel_basis(&wide).row_vecs());
    alg.subalgebra(&basis)
}

/// `prod_{gH in G/H} g(a)` for an `H`-fixed element `a`.
pub fn norm_element(
    alg: &FiniteAlgebra,
    action: &AlgebraAction,
    a: &[u64],
    sub: &Subgroup,
) -> Result<Vec<u64>> {
    if sub.elements().iter().any(|&h| action.apply(h, a) != a) {
        return Err(AlgebraError::NotInvariant);
    }
    let mut acc = alg.one();
    for g in sub.left_coset_reps(&action.group) {
        acc = alg.mul(&acc, &action.apply(g, a));
    }
    Ok(acc)
}

/// `Maps_H(G, A)` for an `H`-action on `A`.
///
/// Functions are stored by their values on the right coset representatives
/// `x_j`, so the algebra is `A^{[G:H]}`; `(g f)(x) = f(x g)`.
#[derive(Clone, Debug)]
pub struct InducedAlgebra {
    pub algebra: FiniteAlgebra,
    pub action: AlgebraAction,
    pub coset_reps: Vec<usize>,
}

pub fn induced_algebra(
    group: &Arc<FiniteGroup>,
    sub: &Subgroup,
    alg: &FiniteAlgebra,
    sub_action: &AlgebraAction,
) -> Result<InducedAlgebra> {
    group.subgroup(sub.elements())?;
    if sub_action.group.order() != sub.order() {
        return Err(AlgebraError::InvalidAction(
            "action is not over the given subgroup".into(),
        ));
    }
    let reps = sub.right_coset_reps(group);
    let k = reps.len();
    let d = alg.dim;
    let algebra = FiniteAlgebra::product(&vec![alg.clone(); k])?;
    let mut matrices = Vec::with_capacity(group.order());
    for g in group.elements() {
        let mut rows = vec![vec![0u64; k * d]; k * d];
        for (slot, &x) in reps.iter().enumerate() {
            // x_slot g = h x_j, so (g f)_slot = h f_j
            let (j, h) = right_coset_decompose(group, sub, &reps, group.mul(x, g));
            let mh = sub_action.matrix(sub.local(h).expect("in H"));
            for i in 0..d {
                for t in 0..d {
                    rows[j * d + i][slot * d + t] = mh.get(i, t);
                }
            }
        }
        matrices.push(mat(alg.p, k * d, &rows));
    }
    let action = AlgebraAction::new(group.clone(), &algebra, matrices)?;
    Ok(InducedAlgebra {
        algebra,
        action,
        coset_reps: reps,
    })
}

/// A finite set with a group acting by permutations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationGSet {
    group: Arc<FiniteGroup>,
    perms: Vec<Vec<usize>>,
}

impl PermutationGSet {
    pub fn new(group: Arc<FiniteGroup>, perms: Vec<Vec<usize>>) -> Result<Self> {
        if perms.len() != group.order() {
            return Err(AlgebraError::InvalidAction("one permutation per element".into()));
        }
        let size = perms.first().map_or(0, |p| p.len());
        for p in &perms {
            let set: BTreeSet<usize> = p.iter().copied().collect();
            if p.len() != size || set.len() != size || set.iter().any(|&x| x >= size) {
                return Err(AlgebraError::InvalidAction("not a permutation".into()));
            }
        }
        for a in group.elements() {
            for b in group.elements() {
                let ab = group.mul(a, b);
                if (0..size).any(|x| perms[ab][x] != perms[a][perms[b][x]]) {
                    return Err(AlgebraError::InvalidAction(format!(
                        "permutations are not a homomorphism at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(PermutationGSet { group, perms })
    }

    pub fn size(&self) -> usize {
        self.perms.first().map_or(0, |p| p.len())
    }

    pub fn group(&self) -> &Arc<FiniteGroup> {
        &self.group
    }

    pub fn image(&self, g: usize, x: usize) -> usize {
        self.perms[g][x]
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Row `i` is `e_{g(i)}`.
    pub fn module_matrix(&self, p: u64, g: usize) -> ResidueMatrix {
        let n = self.size();
        let mut m = ResidueMatrix::zero(fp(p), n, n);
        for i in 0..n {
            m.set(i, self.perms[g][i], 1);
        }
        m
    }

    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.size()];
        let mut out = Vec::new();
        for x in 0..self.size() {
            if seen[x] {
                continue;
            }
            let mut orbit: Vec<usize> = self.group.elements().map(|g| self.perms[g][x]).collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &y in &orbit {
                seen[y] = true;
            }
            out.push(orbit);
        }
        out
    }

    pub fn stabilizer(&self, x: usize) -> Subgroup {
        let elements: Vec<usize> = self.group.elements().filter(|&g| self.perms[g][x] == x).collect();
        self.group.subgroup(&elements).expect("stabilizers are subgroups")
    }
}

/// Index of an element in `elements()` order.
pub fn element_index(p: u64, v: &[u64]) -> usize {
    v.iter().rev().fold(0usize, |acc, &x| acc * p as usize + x as usize)
}

/// Lookup table from element to position, for enumerations.
pub fn element_positions(elems: &[Vec<u64>]) -> HashMap<Vec<u64>, usize> {
    elems.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect()
}
