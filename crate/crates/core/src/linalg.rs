//! Exact linear algebra over the residue rings `Z/p^r`.
//!
//! Row modules are canonicalized with the Howell form, which is unique for a
//! given submodule of `(Z/p^r)^n`. Reducing a vector against a Howell basis
//! gives a canonical coset representative, so equality of quotient elements
//! is a plain vector comparison.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("modulus {0} is not a power of a single prime")]
    NotPrimePower(u64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// The modulus `p^r` of a residue ring, with `p` prime and `r >= 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus {
    p: u64,
    exponent: u32,
    value: u64,
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z/{}^{}", self.p, self.exponent)
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Modulus {
    pub fn new(value: u64) -> Result<Self> {
        if value < 2 {
            return Err(LinalgError::NotPrimePower(value));
        }
        let mut p = 2;
        while value % p != 0 {
            p += 1;
        }
        let mut rest = value;
        let mut exponent = 0;
        while rest % p == 0 {
            rest /= p;
            exponent += 1;
        }
        if rest != 1 {
            return Err(LinalgError::NotPrimePower(value));
        }
        Ok(Modulus { p, exponent, value })
    }

    pub fn prime_power(p: u64, exponent: u32) -> Result<Self> {
        if !is_prime(p) || exponent == 0 {
            return Err(LinalgError::NotPrimePower(p.saturating_pow(exponent)));
        }
        Ok(Modulus {
            p,
            exponent,
            value: p.pow(exponent),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn reduce(&self, x: i128) -> u64 {
        x.rem_euclid(self.value as i128) as u64
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        (a + b) % self.value
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        (a + self.value - b % self.value) % self.value
    }

    pub fn neg(&self, a: u64) -> u64 {
        (self.value - a % self.value) % self.value
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.value as u128) as u64
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut acc = 1 % self.value;
        a %= self.value;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// p-adic valuation of `a` in `Z/p^r`; zero has valuation `r`.
    pub fn valuation(&self, a: u64) -> u32 {
        let mut a = a % self.value;
        if a == 0 {
            return self.exponent;
        }
        let mut v = 0;
        while a % self.p == 0 {
            a /= self.p;
            v += 1;
        }
        v
    }

    pub fn is_unit(&self, a: u64) -> bool {
        a % self.p != 0
    }

    /// Inverse of a unit.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if !self.is_unit(a) {
            return None;
        }
        // Euler: a^(phi(p^r) - 1)
        let phi = self.value / self.p * (self.p - 1);
        Some(self.pow(a, phi - 1))
    }

    pub fn units(&self) -> Vec<u64> {
        (1..self.value).filter(|&a| self.is_unit(a)).collect()
    }

    /// The modulus `p^k` for `1 <= k`.
    pub fn with_exponent(&self, k: u32) -> Modulus {
        Modulus::prime_power(self.p, k).expect("prime already validated")
    }
}

/// Dense matrix over `Z/p^r`, entries stored reduced in `[0, p^r)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ResidueMatrix {
    modulus: Modulus,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl fmt::Debug for ResidueMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:?} {}x{}", self.modulus, self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl ResidueMatrix {
    pub fn zero(modulus: Modulus, rows: usize, cols: usize) -> Self {
        ResidueMatrix {
            modulus,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(modulus: Modulus, n: usize) -> Self {
        let mut m = Self::zero(modulus, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from rows, reducing every entry. All rows must have
    /// length `cols`.
    pub fn from_rows(modulus: Modulus, cols: usize, rows: &[Vec<u64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend(row.iter().map(|&x| x % modulus.value));
        }
        Ok(ResidueMatrix {
            modulus,
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_signed_rows(modulus: Modulus, cols: usize, rows: &[Vec<i64>]) -> Result<Self> {
        let rows: Vec<Vec<u64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| modulus.reduce(x as i128)).collect())
            .collect();
        Self::from_rows(modulus, cols, &rows)
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v % self.modulus.value;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn push_row(&mut self, row: &[u64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: row.len(),
            });
        }
        let m = self.modulus.value;
        self.data.extend(row.iter().map(|&x| x % m));
        self.rows += 1;
        Ok(())
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &ResidueMatrix) -> Result<ResidueMatrix> {
        if self.modulus != other.modulus {
            return Err(LinalgError::ModulusMismatch {
                left: self.modulus.value,
                right: other.modulus.value,
            });
        }
        if self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(ResidueMatrix {
            modulus: self.modulus,
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn transpose(&self) -> ResidueMatrix {
        let mut t = ResidueMatrix::zero(self.modulus, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    pub fn mul(&self, other: &ResidueMatrix) -> Result<ResidueMatrix> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let m = self.modulus;
        let mut out = ResidueMatrix::zero(m, self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let idx = r * other.cols + c;
                    out.data[idx] = (out.data[idx] + a * other.get(k, c)) % m.value;
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn apply(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.rows, "vector length must match row count");
        let m = self.modulus.value;
        let mut out = vec![0u64; self.cols];
        for (r, &a) in v.iter().enumerate() {
            if a % m == 0 {
                continue;
            }
            let row = self.row(r);
            for (o, &x) in out.iter_mut().zip(row) {
                *o = (*o + (a % m) * x) % m;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn scale(&self, s: u64) -> ResidueMatrix {
        let m = self.modulus;
        ResidueMatrix {
            modulus: m,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| m.mul(x, s)).collect(),
        }
    }

    /// Copy with every entry reduced into a smaller modulus `p^k`, `k <= r`.
    pub fn reduce_modulus(&self, target: Modulus) -> ResidueMatrix {
        assert_eq!(target.p, self.modulus.p);
        assert!(target.exponent <= self.modulus.exponent);
        ResidueMatrix {
            modulus: target,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x % target.value).collect(),
        }
    }
}

/// Vector helpers over a modulus.
pub fn vec_add(m: Modulus, a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| m.add(x, y)).collect()
}

pub fn vec_sub(m: Modulus, a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| m.sub(x, y)).collect()
}

pub fn vec_scale(m: Modulus, a: &[u64], s: u64) -> Vec<u64> {
    a.iter().map(|&x| m.mul(x, s)).collect()
}

pub fn vec_neg(m: Modulus, a: &[u64]) -> Vec<u64> {
    a.iter().map(|&x| m.neg(x)).collect()
}

fn axpy(m: Modulus, dst: &mut [u64], s: u64, src: &[u64]) {
    if s == 0 {
        return;
    }
    for (d, &x) in dst.iter_mut().zip(src) {
        *d = (*d + s * x) % m.value;
    }
}

/// A Howell basis of a row module, with pivot data for reduction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HowellForm {
    modulus: Modulus,
    cols: usize,
    rows: Vec<Vec<u64>>,
    /// (pivot column, valuation of the pivot) per row.
    pivots: Vec<(usize, u32)>,
}

impl HowellForm {
    pub fn new(m: &ResidueMatrix) -> Self {
        Self::from_rows(m.modulus, m.cols, m.row_vecs())
    }

    pub fn from_rows(modulus: Modulus, cols: usize, input: Vec<Vec<u64>>) -> Self {
        let md = modulus;
        let mut work: Vec<Vec<u64>> = input
            .into_iter()
            .map(|r| r.into_iter().map(|x| x % md.value).collect::<Vec<_>>())
            .filter(|r: &Vec<u64>| r.iter().any(|&x| x != 0))
            .collect();
        let mut rows = Vec::new();
        let mut pivots = Vec::new();
        for c in 0..cols {
            if work.is_empty() {
                break;
            }
            let mut best: Option<(usize, u32)> = None;
            for (i, r) in work.iter().enumerate() {
                let v = md.valuation(r[c]);
                if v < md.exponent && best.is_none_or(|(_, bv)| v < bv) {
                    best = Some((i, v));
                    if v == 0 {
                        break;
                    }
                }
            }
            let Some((idx, v)) = best else { continue };
            let mut piv = work.swap_remove(idx);
            let pv = md.p.pow(v);
            let unit = piv[c] / pv;
            let uinv = md.inv(unit).expect("unit part is invertible");
            for x in piv.iter_mut() {
                *x = md.mul(*x, uinv);
            }
            debug_assert_eq!(piv[c], pv);
            for r in work.iter_mut() {
                if r[c] != 0 {
                    let q = r[c] / pv;
                    axpy(md, r, md.neg(q), &piv);
                    debug_assert_eq!(r[c], 0);
                }
            }
            if v > 0 {
                let extra = vec_scale(md, &piv, md.p.pow(md.exponent - v));
                if extra.iter().any(|&x| x != 0) {
                    work.push(extra);
                }
            }
            work.retain(|r| r.iter().any(|&x| x != 0));
            rows.push(piv);
            pivots.push((c, v));
        }
        // Reduce entries above each pivot into [0, p^v).
        let n = rows.len();
        for j in 0..n {
            for i in j + 1..n {
                let (c, v) = pivots[i];
                let pv = md.p.pow(v);
                let q = rows[j][c] / pv;
                if q != 0 {
                    let src = rows[i].clone();
                    axpy(md, &mut rows[j], md.neg(q), &src);
                }
            }
        }
        HowellForm {
            modulus,
            cols,
            rows,
            pivots,
        }
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn pivots(&self) -> &[(usize, u32)] {
        &self.pivots
    }

    pub fn to_matrix(&self) -> ResidueMatrix {
        ResidueMatrix::from_rows(self.modulus, self.cols, &self.rows).expect("consistent widths")
    }

    /// Canonical representative of `v + span`.
    pub fn reduce(&self, v: &[u64]) -> Vec<u64> {
        let md = self.modulus;
        let mut w: Vec<u64> = v.iter().map(|&x| x % md.value).collect();
        for (row, &(c, val)) in self.rows.iter().zip(&self.pivots) {
            let q = w[c] / md.p.pow(val);
            if q != 0 {
                axpy(md, &mut w, md.neg(q), row);
            }
        }
        w
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    /// Order of the row module.
    pub fn span_order(&self) -> u128 {
        // In Howell form the module order is the product over pivots of p^(r - v).
        self.pivots
            .iter()
            .map(|&(_, v)| (self.modulus.p as u128).pow(self.modulus.exponent - v))
            .product()
    }
}

/// The Howell normal form of the row module of `m`, as a matrix.
pub fn howell_form(m: &ResidueMatrix) -> ResidueMatrix {
    HowellForm::new(m).to_matrix()
}

/// Generators of `{x : x * m = 0}`.
pub fn kernel_basis(m: &ResidueMatrix) -> ResidueMatrix {
    let md = m.modulus;
    let (r, c) = (m.rows, m.cols);
    let aug: Vec<Vec<u64>> = (0..r)
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.extend((0..r).map(|j| u64::from(i == j)));
            row
        })
        .collect();
    let h = HowellForm::from_rows(md, c + r, aug);
    let kernel: Vec<Vec<u64>> = h
        .rows
        .iter()
        .zip(&h.pivots)
        .filter(|(_, &(pc, _))| pc >= c)
        .map(|(row, _)| row[c..].to_vec())
        .collect();
    ResidueMatrix::from_rows(md, r, &kernel).expect("consistent widths")
}

/// A prepared solver for `x * m = b` with fixed `m`.
#[derive(Clone, Debug)]
pub struct LinearSolver {
    cols: usize,
    nrows: usize,
    howell: HowellForm,
}

impl LinearSolver {
    pub fn new(m: &ResidueMatrix) -> Self {
        let (r, c) = (m.rows, m.cols);
        let aug: Vec<Vec<u64>> = (0..r)
            .map(|i| {
                let mut row = m.row(i).to_vec();
                row.extend((0..r).map(|j| u64::from(i == j)));
                row
            })
            .collect();
        LinearSolver {
            cols: c,
            nrows: r,
            howell: HowellForm::from_rows(m.modulus, c + r, aug),
        }
    }

    pub fn solve(&self, b: &[u64]) -> Result<Option<Vec<u64>>> {
        if b.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: b.len(),
            });
        }
        let md = self.howell.modulus;
        let mut w: Vec<u64> = b.iter().map(|&x| x % md.value).collect();
        w.extend(std::iter::repeat_n(0, self.nrows));
        for (row, &(c, v)) in self.howell.rows.iter().zip(&self.howell.pivots) {
            if c >= self.cols {
                break;
            }
            let pv = md.p.pow(v);
            if w[c] % pv != 0 {
                return Ok(None);
            }
            let q = w[c] / pv;
            if q != 0 {
                axpy(md, &mut w, md.neg(q), row);
            }
        }
        if w[..self.cols].iter().any(|&x| x != 0) {
            return Ok(None);
        }
        Ok(Some(w[self.cols..].iter().map(|&x| md.neg(x)).collect()))
    }
}

/// Some `x` with `x * m = b`, or `None` when `b` is outside the row span.
pub fn solve_linear(m: &ResidueMatrix, b: &[u64]) -> Result<Option<Vec<u64>>> {
    LinearSolver::new(m).solve(b)
}

/// Orders of the cyclic factors of a finite `Z/p^r`-module, nonincreasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct InvariantFactors(pub Vec<u64>);

impl InvariantFactors {
    pub fn order(&self) -> u128 {
        self.0.iter().map(|&x| x as u128).product()
    }

    pub fn factors(&self) -> &[u64] {
        &self.0
    }

    pub fn is_trivial(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for InvariantFactors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.0.iter().map(|x| format!("Z/{x}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Smith reduction of a relation matrix over a local ring, tracking the
/// column transform `V` and its inverse.
struct SmithData {
    /// Valuation of the diagonal entry for every column index (after the
    /// transform); `exponent` for columns without a pivot.
    valuations: Vec<u32>,
    v: ResidueMatrix,
    v_inv: ResidueMatrix,
}

fn smith_columns(md: Modulus, ncols: usize, rels: Vec<Vec<u64>>) -> SmithData {
    let mut a = rels;
    let mut v = ResidueMatrix::identity(md, ncols);
    let mut v_inv = ResidueMatrix::identity(md, ncols);
    let mut valuations = vec![md.exponent; ncols];
    let nrows = a.len();
    let mut t = 0;
    while t < nrows.min(ncols) {
        let mut best: Option<(usize, usize, u32)> = None;
        'search: for (i, row) in a.iter().enumerate().skip(t) {
            for (j, &x) in row.iter().enumerate().skip(t) {
                let val = md.valuation(x);
                if val < md.exponent && best.is_none_or(|(_, _, b)| val < b) {
                    best = Some((i, j, val));
                    if val == 0 {
                        break 'search;
                    }
                }
            }
        }
        let Some((bi, bj, val)) = best else { break };
        a.swap(t, bi);
        if bj != t {
            for row in a.iter_mut() {
                row.swap(t, bj);
            }
            for r in 0..ncols {
                let (x, y) = (v.get(r, t), v.get(r, bj));
                v.set(r, t, y);
                v.set(r, bj, x);
            }
            for c in 0..ncols {
                let (x, y) = (v_inv.get(t, c), v_inv.get(bj, c));
                v_inv.set(t, c, y);
                v_inv.set(bj, c, x);
            }
        }
        let pv = md.p.pow(val);
        let uinv = md.inv(a[t][t] / pv).expect("unit part");
        for x in a[t].iter_mut() {
            *x = md.mul(*x, uinv);
        }
        let pivot_row = a[t].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != t && row[t] != 0 {
                let q = row[t] / pv;
                axpy(md, row, md.neg(q), &pivot_row);
            }
        }
        for j in t + 1..ncols {
            let x = a[t][j];
            if x == 0 {
                continue;
            }
            let q = x / pv;
            // col_j -= q * col_t
            for row in a.iter_mut() {
                row[j] = md.sub(row[j], md.mul(q, row[t]));
            }
            for r in 0..ncols {
                let nv = md.sub(v.get(r, j), md.mul(q, v.get(r, t)));
                v.set(r, j, nv);
            }
            // row_t(V^-1) += q * row_j(V^-1)
            for c in 0..ncols {
                let nv = md.add(v_inv.get(t, c), md.mul(q, v_inv.get(j, c)));
                v_inv.set(t, c, nv);
            }
        }
        valuations[t] = val;
        t += 1;
    }
    SmithData {
        valuations,
        v,
        v_inv,
    }
}

/// A finite module presented as `(span(gens) + span(rels)) / span(rels)`
/// inside `(Z/p^r)^n`, decomposed into cyclic factors.
#[derive(Clone, Debug)]
pub struct Subquotient {
    modulus: Modulus,
    ambient: usize,
    invariants: InvariantFactors,
    /// Ambient vectors generating the cyclic factors, matching `invariants`.
    generators: Vec<Vec<u64>>,
    relations: HowellForm,
    // coordinates: solve x * [gens; rels] = v, then y = x * V restricted
    solver: LinearSolver,
    v: ResidueMatrix,
    kept: Vec<usize>,
}

impl Subquotient {
    pub fn new(modulus: Modulus, ambient: usize, gens: &[Vec<u64>], rels: &[Vec<u64>]) -> Self {
        let md = modulus;
        let mut all: Vec<Vec<u64>> = gens.to_vec();
        all.extend(rels.iter().cloned());
        let cover = ResidueMatrix::from_rows(md, ambient, &all).expect("consistent widths");
        let g = gens.len();
        let total = all.len();
        let mut relation_rows = kernel_basis(&cover).row_vecs();
        for j in g..total {
            let mut e = vec![0; total];
            e[j] = 1;
            relation_rows.push(e);
        }
        let smith = smith_columns(md, total, relation_rows);
        let mut factors = Vec::new();
        let mut generators = Vec::new();
        let mut kept = Vec::new();
        for (j, &val) in smith.valuations.iter().enumerate() {
            if val == 0 {
                continue;
            }
            factors.push((md.p.pow(val), j));
        }
        // nonincreasing order, ties by column index for determinism
        factors.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut orders = Vec::new();
        for (order, j) in factors {
            let x = smith.v_inv.row(j).to_vec();
            generators.push(cover.transpose().apply_col(&x));
            orders.push(order);
            kept.push(j);
        }
        Subquotient {
            modulus,
            ambient,
            invariants: InvariantFactors(orders),
            generators,
            relations: HowellForm::from_rows(md, ambient, rels.to_vec()),
            solver: LinearSolver::new(&cover),
            v: smith.v,
            kept,
        }
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn invariants(&self) -> &InvariantFactors {
        &self.invariants
    }

    pub fn order(&self) -> u128 {
        self.invariants.order()
    }

    pub fn generators(&self) -> &[Vec<u64>] {
        &self.generators
    }

    pub fn relations(&self) -> &HowellForm {
        &self.relations
    }

    /// Canonical representative of `v` modulo the relations.
    pub fn canonical(&self, v: &[u64]) -> Vec<u64> {
        self.relations.reduce(v)
    }

    /// Coordinates of `v` against `generators`, each reduced modulo the
    /// order of its factor; `None` if `v` lies outside the module.
    pub fn coordinates(&self, v: &[u64]) -> Option<Vec<u64>> {
        let x = self.solver.solve(v).expect("dimension checked")?;
        let y = self.v.apply(&x);
        Some(
            self.kept
                .iter()
                .zip(&self.invariants.0)
                .map(|(&j, &ord)| y[j] % ord)
                .collect(),
        )
    }

    /// The ambient vector with the given coordinates.
    pub fn element(&self, coords: &[u64]) -> Vec<u64> {
        let md = self.modulus;
        let mut out = vec![0; self.ambient];
        for (c, g) in coords.iter().zip(&self.generators) {
            axpy(md, &mut out, *c % md.value, g);
        }
        self.canonical(&out)
    }

    /// All elements as canonical ambient vectors, in coordinate order.
    pub fn elements(&self) -> Vec<Vec<u64>> {
        all_coordinates(&self.invariants.0)
            .into_iter()
            .map(|c| self.element(&c))
            .collect()
    }
}

/// Every coordinate tuple with `0 <= c_i < orders[i]`, lexicographic.
pub fn all_coordinates(orders: &[u64]) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for &o in orders {
        let mut next = Vec::with_capacity(out.len() * o as usize);
        for prefix in &out {
            for c in 0..o {
                let mut v = prefix.clone();
                v.push(c);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

impl ResidueMatrix {
    /// Matrix times column vector.
    pub fn apply_col(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.cols);
        let m = self.modulus;
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(0u64, |acc, (&a, &b)| (acc + a * (b % m.value)) % m.value)
            })
            .collect()
    }
}

/// Invariant factors of the module generated by `generators` modulo the
/// span of `relations`.
pub fn quotient_invariants(
    generators: &ResidueMatrix,
    relations: &ResidueMatrix,
) -> Result<InvariantFactors> {
    if generators.modulus != relations.modulus {
        return Err(LinalgError::ModulusMismatch {
            left: generators.modulus.value,
            right: relations.modulus.value,
        });
    }
    if generators.cols != relations.cols && relations.rows > 0 {
        return Err(LinalgError::DimensionMismatch {
            expected: generators.cols,
            found: relations.cols,
        });
    }
    let sq = Subquotient::new(
        generators.modulus,
        generators.cols,
        &generators.row_vecs(),
        &relations.row_vecs(),
    );
    Ok(sq.invariants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn md(n: u64) -> Modulus {
        Modulus::new(n).unwrap()
    }

    fn mat(n: u64, cols: usize, rows: &[&[u64]]) -> ResidueMatrix {
        let rows: Vec<Vec<u64>> = rows.iter().map(|r| r.to_vec()).collect();
        ResidueMatrix::from_rows(md(n), cols, &rows).unwrap()
    }

    /// Every Z/n-combination of the rows.
    fn span(m: &ResidueMatrix) -> HashSet<Vec<u64>> {
        let n = m.modulus().value();
        let mut out = HashSet::new();
        out.insert(vec![0; m.cols()]);
        for r in 0..m.rows() {
            let mut next = HashSet::new();
            for v in &out {
                for c in 0..n {
                    next.insert(vec_add(m.modulus(), v, &vec_scale(m.modulus(), m.row(r), c)));
                }
            }
            out = next;
        }
        out
    }

    #[test]
    fn composite_modulus_rejected() {
        assert_eq!(Modulus::new(12), Err(LinalgError::NotPrimePower(12)));
        assert!(Modulus::new(1).is_err());
        assert_eq!(Modulus::new(27).unwrap().p(), 3);
    }

    #[test]
    fn howell_identity_fixed() {
        let id = ResidueMatrix::identity(md(4), 3);
        assert_eq!(howell_form(&id), id);
    }

    #[test]
    fn howell_single_row() {
        let m = mat(4, 1, &[&[2]]);
        assert_eq!(howell_form(&m), m);
    }

    #[test]
    fn howell_order_eight_example() {
        let m = mat(4, 2, &[&[2, 0], &[0, 2], &[1, 1]]);
        let h = HowellForm::new(&m);
        assert_eq!(span(&m).len(), 8);
        assert_eq!(h.span_order(), 8);
        assert_eq!(span(&h.to_matrix()), span(&m));
    }

    #[test]
    fn howell_property_needs_extra_rows() {
        // span{(2, 1)} over Z/4 contains (0, 2), which must appear in the form.
        let m = mat(4, 2, &[&[2, 1]]);
        let h = howell_form(&m);
        assert_eq!(h.rows(), 2);
        assert_eq!(h.row(1), &[0, 2]);
    }

    #[test]
    fn kernel_examples() {
        let k = kernel_basis(&mat(9, 1, &[&[3]]));
        assert_eq!(span(&k), span(&mat(9, 1, &[&[3]])));
        assert!(kernel_basis(&ResidueMatrix::identity(md(8), 3)).is_zero());
        let k = kernel_basis(&mat(8, 1, &[&[2]]));
        assert_eq!(span(&k), span(&mat(8, 1, &[&[4]])));
    }

    #[test]
    fn solve_examples() {
        let id = ResidueMatrix::identity(md(9), 2);
        assert_eq!(solve_linear(&id, &[4, 7]).unwrap(), Some(vec![4, 7]));
        let two = mat(4, 1, &[&[2]]);
        assert_eq!(solve_linear(&two, &[1]).unwrap(), None);
        let x = solve_linear(&two, &[2]).unwrap().unwrap();
        assert_eq!(x[0] % 2, 1);
        assert!(matches!(
            solve_linear(&two, &[1, 2]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quotient_examples() {
        let m9 = md(9);
        let free = ResidueMatrix::identity(m9, 2);
        let none = ResidueMatrix::zero(m9, 0, 2);
        assert_eq!(quotient_invariants(&free, &none).unwrap().0, vec![9, 9]);
        let g = ResidueMatrix::identity(md(4), 1);
        let r = mat(4, 1, &[&[2]]);
        assert_eq!(quotient_invariants(&g, &r).unwrap().0, vec![2]);
        let g = ResidueMatrix::identity(md(4), 2);
        let r = mat(4, 2, &[&[2, 0], &[0, 1]]);
        assert_eq!(quotient_invariants(&g, &r).unwrap().0, vec![2]);
    }

    #[test]
    fn subquotient_coordinates_roundtrip() {
        let m = md(8);
        let gens = vec![vec![1, 0, 0], vec![0, 2, 0], vec![1, 1, 4]];
        let rels = vec![vec![4, 0, 0], vec![0, 4, 4]];
        let sq = Subquotient::new(m, 3, &gens, &rels);
        let elems = sq.elements();
        let distinct: HashSet<_> = elems.iter().cloned().collect();
        assert_eq!(distinct.len() as u128, sq.order());
        for (coords, e) in all_coordinates(sq.invariants().factors()).iter().zip(&elems) {
            assert_eq!(&sq.coordinates(e).unwrap(), coords);
        }
        assert_eq!(sq.coordinates(&[0, 0, 1]), None);
    }

    // Exhaustive checks over all matrices with <= 3 rows, 2 columns over
    // small moduli, and random wider ones below.
    fn small_matrices(n: u64, rows: usize, cols: usize) -> Vec<ResidueMatrix> {
        let count = (n as usize).pow((rows * cols) as u32);
        (0..count)
            .map(|mut idx| {
                let mut data = Vec::new();
                for _ in 0..rows * cols {
                    data.push((idx % n as usize) as u64);
                    idx /= n as usize;
                }
                let rows_v: Vec<Vec<u64>> = data.chunks(cols).map(|c| c.to_vec()).collect();
                ResidueMatrix::from_rows(md(n), cols, &rows_v).unwrap()
            })
            .collect()
    }

    #[test]
    fn howell_exhaustive_small() {
        for n in [4u64, 8, 9] {
            for rows in 1..=2 {
                for m in small_matrices(n, rows, 2) {
                    let h = howell_form(&m);
                    assert_eq!(span(&h), span(&m), "{m:?}");
                    assert_eq!(howell_form(&h), h, "idempotent on {m:?}");
                }
            }
        }
    }

    #[test]
    fn howell_is_canonical_for_equal_spans() {
        // Different generating sets of the same module give the same form.
        let a = mat(9, 2, &[&[3, 3], &[0, 3]]);
        let b = mat(9, 2, &[&[3, 0], &[3, 6], &[6, 6]]);
        assert_eq!(span(&a), span(&b));
        assert_eq!(howell_form(&a), howell_form(&b));
    }

    use proptest::prelude::*;

    fn arb_matrix() -> impl Strategy<Value = ResidueMatrix> {
        (prop_oneof![Just(4u64), Just(8), Just(9), Just(5), Just(27)], 1usize..=3, 1usize..=3)
            .prop_flat_map(|(n, r, c)| {
                prop::collection::vec(0..n, r * c).prop_map(move |d| {
                    let rows: Vec<Vec<u64>> = d.chunks(c).map(|x| x.to_vec()).collect();
                    ResidueMatrix::from_rows(md(n), c, &rows).unwrap()
                })
            })
    }

    proptest! {
        #[test]
        fn howell_idempotent_and_span_preserving(m in arb_matrix()) {
            let h = howell_form(&m);
            prop_assert_eq!(howell_form(&h), h.clone());
            prop_assert_eq!(span(&h), span(&m));
            prop_assert_eq!(HowellForm::new(&m).span_order(), span(&m).len() as u128);
        }

        #[test]
        fn solve_agrees_with_span(m in arb_matrix(), seed in any::<u64>()) {
            let n = m.modulus().value();
            let b: Vec<u64> = (0..m.cols()).map(|i| (seed >> (8 * i)) % n).collect();
            let sp = span(&m);
            match solve_linear(&m, &b).unwrap() {
                Some(x) => prop_assert_eq!(m.apply(&x), b),
                None => prop_assert!(!sp.contains(&b)),
            }
        }

        #[test]
        fn kernel_is_complete(m in arb_matrix()) {
            let k = kernel_basis(&m);
            let ks = if k.rows() == 0 { HashSet::from([vec![0; m.rows()]]) } else { span(&k) };
            let all = span(&ResidueMatrix::identity(m.modulus(), m.rows()));
            let brute: HashSet<Vec<u64>> = all.into_iter().filter(|x| m.apply(x).iter().all(|&y| y == 0)).collect();
            prop_assert_eq!(ks, brute);
        }

        #[test]
        fn quotient_order_matches_counts(m in arb_matrix()) {
            let id = ResidueMatrix::identity(m.modulus(), m.cols());
            let inv = quotient_invariants(&id, &m).unwrap();
            let ambient = (m.modulus().value() as u128).pow(m.cols() as u32);
            prop_assert_eq!(inv.order(), ambient / span(&m).len() as u128);
            prop_assert!(inv.factors().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn reduce_is_canonical(m in arb_matrix(), seed in any::<u64>()) {
            let h = HowellForm::new(&m);
            let n = m.modulus().value();
            let v: Vec<u64> = (0..m.cols()).map(|i| (seed >> (8 * i)) % n).collect();
            let rv = h.reduce(&v);
            for s in span(&m) {
                let w = vec_add(m.modulus(), &v, &s);
                prop_assert_eq!(h.reduce(&w), rv.clone());
            }
        }
    }
}
