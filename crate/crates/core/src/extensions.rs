//! Extensions of `(Z/p^R, G)`-modules, torsors, and lifting obstructions.
//!
//! An extension `0 -> B -> E -> A -> 0` is stored as its two maps. Classes
//! live in `H^1(G, Hom(A, B))` and are only defined when the surjection
//! splits as a map of `Z/p^R`-modules.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::FiniteGroup;
use crate::cohomology::{
    cohomology, differential, is_cocycle, tuple_of, ClassHom, Cochain, CohomologyError,
    CohomologyGroup, GMap, GModule, HomModule, ShortExactSequence,
};
use crate::linalg::{kernel_basis, vec_add, vec_neg, vec_scale, LinearSolver, ResidueMatrix, Subquotient};
use crate::witt::CommRing;

/// Default cap on enumerated cocycle tables for nonabelian `H^1`.
pub const DEFAULT_ENUMERATION_BOUND: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtensionError {
    #[error(transparent)]
    Cohomology(#[from] CohomologyError),
    #[error("extensions have different end terms")]
    EndMismatch,
    #[error("the surjection has no module-level section (geometrically nontrivial)")]
    GeometricallyNontrivial,
    #[error("quotient is not the trivial free module of rank one")]
    NotTrivialRankOne,
    #[error("invalid affine space: {0}")]
    InvalidAffineSpace(String),
    #[error("{what} of size {size} exceeds bound {bound}")]
    BoundExceeded { what: &'static str, size: usize, bound: usize },
    #[error("group of order {order} is too large for {what}")]
    GroupTooLarge { what: &'static str, order: usize },
}

pub type Result<T> = std::result::Result<T, ExtensionError>;

fn unit_vector(n: usize, i: usize) -> Vec<u64> {
    let mut v = vec![0; n];
    v[i] = 1;
    v
}

/// Coordinates of `v` along an injective map, if `v` is in its image.
fn preimage_along(f: &GMap, v: &[u64]) -> Option<Vec<u64>> {
    let src = f.source();
    let mut rows = f.matrix().row_vecs();
    rows.extend(f.target().relations().rows().iter().cloned());
    let m = ResidueMatrix::from_rows(src.modulus(), f.target().rank(), &rows).expect("widths");
    let x = LinearSolver::new(&m).solve(v).expect("dims")?;
    Some(src.canonical(&x[..src.rank()]))
}

/// The fiber product `X x_Z Y` with its two projections.
fn fiber_product(f: &GMap, g: &GMap) -> Result<(GModule, GMap, GMap)> {
    if f.target() != g.target() {
        return Err(ExtensionError::EndMismatch);
    }
    let (x, y, z) = (f.source(), g.source(), f.target());
    let md = z.modulus();
    let (kx, ky) = (x.rank(), y.rank());
    let mut rows = f.matrix().row_vecs();
    rows.extend(g.matrix().row_vecs().iter().map(|r| vec_neg(md, r)));
    rows.extend(z.relations().rows().iter().cloned());
    let m = ResidueMatrix::from_rows(md, z.rank(), &rows).map_err(CohomologyError::from)?;
    let gens: Vec<Vec<u64>> = kernel_basis(&m)
        .row_vecs()
        .into_iter()
        .map(|r| r[..kx + ky].to_vec())
        .filter(|r| r.iter().any(|&c| c != 0))
        .collect();
    let sum = GModule::direct_sum(&[x, y])?;
    let (p, incl) = sum.submodule(&gens)?;
    let px = GMap::new(&p, x, incl.matrix().row_vecs().iter().map(|r| r[..kx].to_vec()).collect())?;
    let py = GMap::new(&p, y, incl.matrix().row_vecs().iter().map(|r| r[kx..].to_vec()).collect())?;
    Ok((p, px, py))
}

/// `0 -> B -> E -> A -> 0`.
#[derive(Clone, Debug)]
pub struct GModExtension {
    seq: ShortExactSequence,
}

/// The class of an extension with the data needed to compare it.
#[derive(Clone, Debug)]
pub struct ExtensionClass {
    pub hom: HomModule,
    pub h1: Arc<CohomologyGroup>,
    pub coords: Vec<u64>,
    pub cocycle: Cochain,
}

impl GModExtension {
    pub fn new(inj: GMap, surj: GMap) -> Result<Self> {
        Ok(GModExtension {
            seq: ShortExactSequence::new(inj, surj)?,
        })
    }

    /// `B -> B + A -> A`.
    pub fn split(b: &GModule, a: &GModule) -> Result<Self> {
        let e = GModule::direct_sum(&[b, a])?;
        let (kb, ka) = (b.rank(), a.rank());
        let inj = (0..kb).map(|i| unit_vector(kb + ka, i)).collect();
        let surj = (0..kb + ka)
            .map(|i| if i < kb { vec![0; ka] } else { unit_vector(ka, i - kb) })
            .collect();
        Self::new(GMap::new(b, &e, inj)?, GMap::new(&e, a, surj)?)
    }

    pub fn sequence(&self) -> &ShortExactSequence {
        &self.seq
    }

    pub fn sub(&self) -> &GModule {
        self.seq.sub()
    }

    pub fn mid(&self) -> &GModule {
        self.seq.mid()
    }

    pub fn quot(&self) -> &GModule {
        self.seq.quot()
    }

    pub fn inj(&self) -> &GMap {
        &self.seq.inj
    }

    pub fn surj(&self) -> &GMap {
        &self.seq.surj
    }

    /// `f_* E = (E + B') / {(i(b), -f(b))}`.
    pub fn pushforward(&self, f: &GMap) -> Result<Self> {
        if f.source() != self.sub() {
            return Err(ExtensionError::EndMismatch);
        }
        let (e, b2) = (self.mid(), f.target());
        let md = e.modulus();
        let (ke, kb2) = (e.rank(), b2.rank());
        let sum = GModule::direct_sum(&[e, b2])?;
        let gens: Vec<Vec<u64>> = (0..self.sub().rank())
            .map(|l| {
                let mut v = self.inj().matrix().row(l).to_vec();
                v.extend(vec_neg(md, f.matrix().row(l)));
                v
            })
            .collect();
        let (q, _) = sum.quotient(&gens)?;
        let inj = (0..kb2).map(|i| unit_vector(ke + kb2, ke + i)).collect();
        let ka = self.quot().rank();
        let surj = (0..ke + kb2)
            .map(|i| if i < ke { self.surj().matrix().row(i).to_vec() } else { vec![0; ka] })
            .collect();
        Self::new(GMap::new(b2, &q, inj)?, GMap::new(&q, self.quot(), surj)?)
    }

    /// `g^* E = E x_A A'`.
    pub fn pullback(&self, g: &GMap) -> Result<Self> {
        if g.target() != self.quot() {
            return Err(ExtensionError::EndMismatch);
        }
        let (p, pe, pa) = fiber_product(self.surj(), g)?;
        let incl_rows: Vec<Vec<u64>> = (0..p.rank())
            .map(|i| {
                let mut v = pe.matrix().row(i).to_vec();
                v.extend_from_slice(pa.matrix().row(i));
                v
            })
            .collect();
        let sum = GModule::direct_sum(&[self.mid(), g.source()])?;
        let incl = GMap::new(&p, &sum, incl_rows)?;
        let inj_rows = (0..self.sub().rank())
            .map(|l| {
                let mut v = self.inj().matrix().row(l).to_vec();
                v.extend(vec![0; g.source().rank()]);
                preimage_along(&incl, &v).expect("i(b) lies over 0")
            })
            .collect();
        Self::new(GMap::new(self.sub(), &p, inj_rows)?, pa)
    }

    /// The Baer sum: pull back along the diagonal, push forward along
    /// addition.
    pub fn baer_sum(&self, other: &GModExtension) -> Result<Self> {
        if self.sub() != other.sub() || self.quot() != other.quot() {
            return Err(ExtensionError::EndMismatch);
        }
        let (p, p1, p2) = fiber_product(self.surj(), other.surj())?;
        let (e1, e2) = (self.mid(), other.mid());
        let md = e1.modulus();
        let sum = GModule::direct_sum(&[e1, e2])?;
        let incl_rows: Vec<Vec<u64>> = (0..p.rank())
            .map(|i| {
                let mut v = p1.matrix().row(i).to_vec();
                v.extend_from_slice(p2.matrix().row(i));
                v
            })
            .collect();
        let incl = GMap::new(&p, &sum, incl_rows)?;
        let lift = |a: &[u64], b: &[u64]| {
            let mut v = a.to_vec();
            v.extend_from_slice(b);
            preimage_along(&incl, &v).expect("lies in the fiber product")
        };
        let kb = self.sub().rank();
        let anti: Vec<Vec<u64>> = (0..kb)
            .map(|l| lift(self.inj().matrix().row(l), &vec_neg(md, other.inj().matrix().row(l))))
            .collect();
        let (q, _) = p.quotient(&anti)?;
        let inj_rows = (0..kb)
            .map(|l| lift(self.inj().matrix().row(l), &vec![0; e2.rank()]))
            .collect();
        let surj = p1.then(self.surj())?;
        let surj_rows = surj.matrix().row_vecs();
        Self::new(
            GMap::new(self.sub(), &q, inj_rows)?,
            GMap::new(&q, self.quot(), surj_rows)?,
        )
    }

    /// A `Z/p^R`-linear section of the surjection, rows indexed by the
    /// ambient basis of `A`.
    pub fn section(&self) -> Result<ResidueMatrix> {
        let (a, e) = (self.quot(), self.mid());
        let md = a.modulus();
        let structure = Subquotient::new(
            md,
            a.rank(),
            &(0..a.rank()).map(|i| unit_vector(a.rank(), i)).collect::<Vec<_>>(),
            a.relations().rows(),
        );
        let mut images = Vec::new();
        for (t, &ord) in structure.generators().iter().zip(structure.invariants().factors()) {
            let e0 = self.seq.lift(t);
            // need b with ord * (e0 + i(b)) = 0 in E
            let target = vec_neg(md, &vec_scale(md, &e0, ord));
            let mut rows: Vec<Vec<u64>> = self
                .inj()
                .matrix()
                .row_vecs()
                .iter()
                .map(|r| vec_scale(md, r, ord))
                .collect();
            rows.extend(e.relations().rows().iter().cloned());
            let m = ResidueMatrix::from_rows(md, e.rank(), &rows).map_err(CohomologyError::from)?;
            let x = LinearSolver::new(&m)
                .solve(&target)
                .map_err(CohomologyError::from)?
                .ok_or(ExtensionError::GeometricallyNontrivial)?;
            let ib = self.inj().matrix().apply(&x[..self.sub().rank()]);
            images.push(e.canonical(&vec_add(md, &e0, &ib)));
        }
        let rows: Vec<Vec<u64>> = (0..a.rank())
            .map(|l| {
                let c = structure.coordinates(&unit_vector(a.rank(), l)).expect("in A");
                c.iter().zip(&images).fold(vec![0; e.rank()], |acc, (&k, img)| {
                    vec_add(md, &acc, &vec_scale(md, img, k))
                })
            })
            .collect();
        Ok(ResidueMatrix::from_rows(md, e.rank(), &rows).map_err(CohomologyError::from)?)
    }

    /// Every module-level section: one fixed section plus `i . phi` for
    /// each `phi` in `Hom(A, B)`.
    pub fn sections(&self) -> Result<Vec<ResidueMatrix>> {
        let s = self.section()?;
        let hom = self.quot().hom_module(self.sub())?;
        let md = self.mid().modulus();
        Ok(hom
            .module
            .elements()
            .iter()
            .map(|v| {
                let phi = hom.to_matrix(v).mul(self.inj().matrix()).expect("shapes");
                let rows: Vec<Vec<u64>> = (0..s.rows())
                    .map(|l| self.mid().canonical(&vec_add(md, s.row(l), phi.row(l))))
                    .collect();
                ResidueMatrix::from_rows(md, s.cols(), &rows).expect("widths")
            })
            .collect())
    }

    pub fn extension_class(&self) -> Result<ExtensionClass> {
        let s = self.section()?;
        self.extension_class_with_section(&s)
    }

    /// The class of `g -> g s g^{-1} - s` for a given module-level section.
    pub fn extension_class_with_section(&self, s: &ResidueMatrix) -> Result<ExtensionClass> {
        let (a, e) = (self.quot(), self.mid());
        let group = a.group().clone();
        let md = a.modulus();
        let hom = a.hom_module(self.sub())?;
        let apply_s = |v: &[u64]| e.canonical(&s.apply(v));
        let mut values = Vec::with_capacity(group.order());
        for g in group.elements() {
            let rows = (0..a.rank())
                .map(|l| {
                    let moved = a.act(group.inv(g), &unit_vector(a.rank(), l));
                    let v = e.act(g, &apply_s(&moved));
                    let diff = e.canonical(&vec_add(md, &v, &vec_neg(md, &apply_s(&unit_vector(a.rank(), l)))));
                    preimage_along(self.inj(), &diff).expect("difference lies in B")
                })
                .collect::<Vec<_>>();
            let f = ResidueMatrix::from_rows(md, self.sub().rank(), &rows).map_err(CohomologyError::from)?;
            values.push(hom.from_matrix(&f)?);
        }
        let cocycle = Cochain { degree: 1, values };
        let h1 = cohomology(&hom.module, 1)?;
        let coords = h1.class_of(&cocycle)?;
        Ok(ExtensionClass {
            hom,
            h1,
            coords,
            cocycle,
        })
    }

    /// `x -> x + i(f(pi(x)))` for every `f` in `Hom_G(A, B)`.
    pub fn automorphisms(&self) -> Result<Vec<GMap>> {
        let (a, b, e) = (self.quot(), self.sub(), self.mid());
        let md = e.modulus();
        let hom = a.hom_module(b)?;
        let h0 = cohomology(&hom.module, 0)?;
        let mut out = Vec::new();
        for coords in h0.all_classes() {
            let v = &h0.representative(&coords).values[0];
            let f = hom.to_matrix(v);
            let shift = self
                .surj()
                .matrix()
                .mul(&f)
                .and_then(|m| m.mul(self.inj().matrix()))
                .map_err(CohomologyError::from)?;
            let rows = (0..e.rank())
                .map(|i| vec_add(md, &unit_vector(e.rank(), i), shift.row(i)))
                .collect();
            out.push(GMap::new(e, e, rows)?);
        }
        Ok(out)
    }

    /// Whether `map: E -> E'` is a morphism of extensions inducing the
    /// identity on both ends.
    pub fn is_morphism_to(&self, other: &GModExtension, map: &GMap) -> bool {
        if self.sub() != other.sub() || self.quot() != other.quot() {
            return false;
        }
        if map.source() != self.mid() || map.target() != other.mid() {
            return false;
        }
        let left = self.inj().then(map).map(|m| m.equals(other.inj())).unwrap_or(false);
        let right = map.then(other.surj()).map(|m| m.equals(self.surj())).unwrap_or(false);
        left && right
    }

    /// The extension `E / p^k E` of `A / p^k A` by `B / p^k B`.
    pub fn reduce(&self, k: u32) -> Result<Self> {
        let md = self.mid().modulus();
        let pk = md.p().pow(k);
        let kill = |m: &GModule| -> Result<GModule> {
            let gens: Vec<Vec<u64>> = (0..m.rank()).map(|i| vec_scale(md, &unit_vector(m.rank(), i), pk)).collect();
            Ok(m.quotient(&gens)?.0)
        };
        let (b, e, a) = (kill(self.sub())?, kill(self.mid())?, kill(self.quot())?);
        let inj = GMap::new(&b, &e, self.inj().matrix().row_vecs())?;
        let surj = GMap::new(&e, &a, self.surj().matrix().row_vecs())?;
        Self::new(inj, surj)
    }
}

/// `E = B + Z/p^R` with `g(b, a) = (g b + a z(g), a)`, an extension of the
/// trivial rank-one module by `B` with class `[z]`.
pub fn extension_from_cocycle(b: &GModule, z: &Cochain) -> Result<GModExtension> {
    if z.degree != 1 || !is_cocycle(b, z) {
        return Err(CohomologyError::NotCocycle.into());
    }
    let group = b.group().clone();
    let md = b.modulus();
    let k = b.rank();
    let a = GModule::trivial_free(group.clone(), md, 1);
    let relations = b
        .relations()
        .rows()
        .iter()
        .map(|r| {
            let mut row = r.clone();
            row.push(0);
            row
        })
        .collect();
    let action = group
        .elements()
        .map(|g| {
            let mut m = ResidueMatrix::zero(md, k + 1, k + 1);
            let bg = b.action_matrix(g);
            for i in 0..k {
                for j in 0..k {
                    m.set(i, j, bg.get(i, j));
                }
                m.set(k, i, z.values[g][i]);
            }
            m.set(k, k, 1);
            m
        })
        .collect();
    let e = GModule::new(group, md, k + 1, relations, action)?;
    let inj = GMap::new(b, &e, (0..k).map(|i| unit_vector(k + 1, i)).collect())?;
    let surj = GMap::new(&e, &a, (0..=k).map(|i| vec![u64::from(i == k)]).collect())?;
    GModExtension::new(inj, surj)
}

/// A finite `G`-set with a simply transitive translation action of a
/// module, compatible with `G`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GAffineSpace {
    translations: GModule,
    vectors: Vec<Vec<u64>>,
    action: Vec<Vec<usize>>,
    translate: Vec<Vec<usize>>,
}

impl GAffineSpace {
    /// `action[g][x]` is `g(x)`; `translate[x][v]` is `x + vectors[v]` for
    /// the canonical elements of `translations` in `elements()` order.
    pub fn new(translations: &GModule, action: Vec<Vec<usize>>, translate: Vec<Vec<usize>>) -> Result<Self> {
        let vectors = translations.elements();
        let n = translate.len();
        if n == 0 {
            return Err(ExtensionError::InvalidAffineSpace("empty carrier".into()));
        }
        let group = translations.group().clone();
        let bad = |s: &str| Err(ExtensionError::InvalidAffineSpace(s.into()));
        if action.len() != group.order() || action.iter().any(|r| r.len() != n) {
            return bad("action table shape");
        }
        if translate.iter().any(|r| r.len() != vectors.len()) {
            return bad("translation table shape");
        }
        let space = GAffineSpace {
            translations: translations.clone(),
            vectors,
            action,
            translate,
        };
        let index: HashMap<&Vec<u64>, usize> = space.vectors.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let zero = index[&translations.zero()];
        for x in 0..n {
            if space.translate[x][zero] != x {
                return bad("zero does not act trivially");
            }
            let mut seen = vec![false; n];
            for v in 0..space.vectors.len() {
                let y = space.translate[x][v];
                if y >= n || seen[y] {
                    return bad("translation is not simply transitive");
                }
                seen[y] = true;
                for w in 0..space.vectors.len() {
                    let s = translations.add(&space.vectors[v], &space.vectors[w]);
                    if space.translate[y][w] != space.translate[x][index[&s]] {
                        return bad("translations do not compose");
                    }
                }
            }
            if seen.iter().any(|&s| !s) {
                return bad("translation is not simply transitive");
            }
        }
        for g in group.elements() {
            for h in group.elements() {
                for x in 0..n {
                    if space.action[group.mul(g, h)][x] != space.action[g][space.action[h][x]] {
                        return bad("action is not a homomorphism");
                    }
                }
            }
            for x in 0..n {
                for v in 0..space.vectors.len() {
                    let gv = index[&translations.act(g, &space.vectors[v])];
                    if space.action[g][space.translate[x][v]] != space.translate[space.action[g][x]][gv] {
                        return bad("g(x + m) differs from g(x) + g(m)");
                    }
                }
            }
        }
        if space.action[group.identity()].iter().enumerate().any(|(x, &y)| x != y) {
            return bad("identity acts nontrivially");
        }
        Ok(space)
    }

    /// The module acting on itself.
    pub fn trivial(m: &GModule) -> Result<Self> {
        let elems = m.elements();
        let index: HashMap<Vec<u64>, usize> = elems.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        let action = m
            .group()
            .elements()
            .map(|g| elems.iter().map(|v| index[&m.act(g, v)]).collect())
            .collect();
        let translate = elems
            .iter()
            .map(|x| elems.iter().map(|v| index[&m.add(x, v)]).collect())
            .collect();
        Self::new(m, action, translate)
    }

    pub fn len(&self) -> usize {
        self.translate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translate.is_empty()
    }

    pub fn translations(&self) -> &GModule {
        &self.translations
    }

    pub fn vectors(&self) -> &[Vec<u64>] {
        &self.vectors
    }

    pub fn act(&self, g: usize, x: usize) -> usize {
        self.action[g][x]
    }

    pub fn translate(&self, x: usize, v: usize) -> usize {
        self.translate[x][v]
    }

    /// The vector `v` with `y + v = x`.
    pub fn difference(&self, x: usize, y: usize) -> usize {
        self.translate[y].iter().position(|&z| z == x).expect("simply transitive")
    }

    /// The class of `g -> g(x_0) - x_0` in `H^1(G, translations)`.
    pub fn class(&self) -> Result<(Arc<CohomologyGroup>, Vec<u64>)> {
        let g = self.translations.group();
        let values = g.elements().map(|h| self.vectors[self.difference(self.action[h][0], 0)].clone()).collect();
        let h1 = cohomology(&self.translations, 1)?;
        let coords = h1.class_of(&Cochain { degree: 1, values })?;
        Ok((h1, coords))
    }

    /// An equivariant bijection commuting with translations, if any.
    pub fn isomorphism_to(&self, other: &GAffineSpace) -> Option<Vec<usize>> {
        if self.translations != other.translations || self.len() != other.len() {
            return None;
        }
        let group = self.translations.group();
        (0..other.len()).find_map(|y0| {
            let map: Vec<usize> = (0..self.len())
                .map(|x| other.translate[y0][self.difference(x, 0)])
                .collect();
            let ok = group
                .elements()
                .all(|g| (0..self.len()).all(|x| map[self.action[g][x]] == other.action[g][map[x]]));
            ok.then_some(map)
        })
    }
}

fn check_trivial_rank_one(a: &GModule) -> Result<()> {
    let trivial = GModule::trivial_free(a.group().clone(), a.modulus(), 1);
    if *a != trivial {
        return Err(ExtensionError::NotTrivialRankOne);
    }
    Ok(())
}

/// `X(E) = pi^{-1}(1)` with translations `B`.
pub fn torsor_of_extension(ext: &GModExtension) -> Result<GAffineSpace> {
    check_trivial_rank_one(ext.quot())?;
    let (b, e) = (ext.sub(), ext.mid());
    let points: Vec<Vec<u64>> = e
        .elements()
        .into_iter()
        .filter(|x| ext.quot().equal(&ext.surj().apply(x), &[1]))
        .collect();
    let index: HashMap<&Vec<u64>, usize> = points.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let vectors = b.elements();
    let action = e
        .group()
        .elements()
        .map(|g| points.iter().map(|x| index[&e.act(g, x)]).collect())
        .collect();
    let translate = points
        .iter()
        .map(|x| vectors.iter().map(|v| index[&e.add(x, &ext.inj().apply(v))]).collect())
        .collect();
    GAffineSpace::new(b, action, translate)
}

/// An element `(x, alpha, v)` of `X x R x X->`, read as `alpha x + v`.
pub type AffineTriple = (usize, u64, usize);

/// The modulification `E(X) = (X x R x X->) / ~` of a nonempty affine
/// space, computed by enumerating the triples and their classes.
#[derive(Clone, Debug)]
pub struct Modulification {
    pub extension: GModExtension,
    pub triples: Vec<AffineTriple>,
    /// Class index of each triple.
    pub class_of: Vec<usize>,
    pub class_count: usize,
    /// Class index to the element of `extension.mid()`.
    pub elements: Vec<Vec<u64>>,
}

impl Modulification {
    pub fn add_triples(&self, space: &GAffineSpace, a: AffineTriple, b: AffineTriple) -> AffineTriple {
        let m = &space.translations;
        let r = m.modulus();
        let (x, alpha, v) = a;
        let (x2, beta, w) = b;
        let shift = m.scale(&space.vectors[space.difference(x2, x)], beta);
        let sum = m.add(&m.add(&shift, &space.vectors[v]), &space.vectors[w]);
        let idx = space.vectors.iter().position(|u| *u == sum).expect("canonical");
        (x, r.add(alpha, beta) % r.value(), idx)
    }
}

pub fn modulify(space: &GAffineSpace) -> Result<Modulification> {
    if space.is_empty() {
        return Err(ExtensionError::InvalidAffineSpace("empty carrier".into()));
    }
    let m = &space.translations;
    let md = m.modulus();
    let r_size = md.value();
    let triples: Vec<AffineTriple> = (0..space.len())
        .flat_map(|x| (0..r_size).flat_map(move |a| (0..space.vectors.len()).map(move |v| (x, a, v))))
        .collect();
    // (x, a, v) ~ (x', a', v') iff a = a' and a (x - x') + v = v'
    let mut class_of = vec![usize::MAX; triples.len()];
    let mut reps: Vec<AffineTriple> = Vec::new();
    for (i, &(x, a, v)) in triples.iter().enumerate() {
        if class_of[i] != usize::MAX {
            continue;
        }
        let c = reps.len();
        reps.push((x, a, v));
        for (j, &(x2, a2, v2)) in triples.iter().enumerate().skip(i) {
            if class_of[j] == usize::MAX && a2 == a {
                let lhs = m.add(&m.scale(&space.vectors[space.difference(x, x2)], a), &space.vectors[v]);
                if m.equal(&lhs, &space.vectors[v2]) {
                    class_of[j] = c;
                }
            }
        }
    }
    // Coordinates through the base point 0: (alpha, v + alpha (x - x_0)).
    let coords = |(x, a, v): AffineTriple| {
        let mut out = vec![a];
        out.extend(m.add(&space.vectors[v], &m.scale(&space.vectors[space.difference(x, 0)], a)));
        out
    };
    let group = m.group().clone();
    let r_mod = GModule::trivial_free(group.clone(), md, 1);
    let k = m.rank();
    let mut relations: Vec<Vec<u64>> = Vec::new();
    for rel in m.relations().rows() {
        let mut row = vec![0];
        row.extend_from_slice(rel);
        relations.push(row);
    }
    let action = group
        .elements()
        .map(|g| {
            let mut mat = ResidueMatrix::zero(md, k + 1, k + 1);
            mat.set(0, 0, 1);
            let shift = &space.vectors[space.difference(space.action[g][0], 0)];
            for (j, &s) in shift.iter().enumerate() {
                mat.set(0, j + 1, s);
            }
            let mg = m.action_matrix(g);
            for i in 0..k {
                for j in 0..k {
                    mat.set(i + 1, j + 1, mg.get(i, j));
                }
            }
            mat
        })
        .collect();
    let e = GModule::new(group, md, k + 1, relations, action)?;
    let inj = GMap::new(m, &e, (0..k).map(|i| unit_vector(k + 1, i + 1)).collect())?;
    let surj = GMap::new(&e, &r_mod, (0..=k).map(|i| vec![u64::from(i == 0)]).collect())?;
    let elements = reps.iter().map(|&t| e.canonical(&coords(t))).collect();
    Ok(Modulification {
        extension: GModExtension::new(inj, surj)?,
        class_of,
        class_count: reps.len(),
        triples,
        elements,
    })
}

/// `E(P)` for a torsor; the modulification.
pub fn extension_of_torsor(space: &GAffineSpace) -> Result<GModExtension> {
    Ok(modulify(space)?.extension)
}

/// The obstruction to lifting a class along a surjection of modules.
#[derive(Clone, Debug)]
pub struct Obstruction {
    pub kernel: GModule,
    pub sequence: ShortExactSequence,
    pub h2: Arc<CohomologyGroup>,
    pub cocycle: Cochain,
    pub coords: Vec<u64>,
}

impl Obstruction {
    pub fn vanishes(&self) -> bool {
        self.h2.is_zero_class(&self.coords)
    }
}

/// The kernel of a surjection and the resulting short exact sequence.
pub fn kernel_sequence(q: &GMap) -> Result<ShortExactSequence> {
    let (big, small) = (q.source(), q.target());
    let mut rows = q.matrix().row_vecs();
    rows.extend(small.relations().rows().iter().cloned());
    let m = ResidueMatrix::from_rows(big.modulus(), small.rank(), &rows).map_err(CohomologyError::from)?;
    let gens: Vec<Vec<u64>> = kernel_basis(&m)
        .row_vecs()
        .into_iter()
        .map(|r| r[..big.rank()].to_vec())
        .filter(|r| !big.is_zero(r))
        .collect();
    let incl = if gens.is_empty() {
        let k = GModule::trivial_free(big.group().clone(), big.modulus(), 0);
        GMap::new(&k, big, vec![])?
    } else {
        big.submodule(&gens)?.1
    };
    Ok(ShortExactSequence::new(incl, q.clone())?)
}

/// `Obs(c)`: lift each cocycle value, the defect `-(d lift)` is a 2-cocycle
/// with values in the kernel; it vanishes iff `c` lifts.
pub fn obstruction_class(q: &GMap, c: &Cochain) -> Result<Obstruction> {
    if !is_cocycle(q.target(), c) || c.degree != 1 {
        return Err(CohomologyError::NotCocycle.into());
    }
    let seq = kernel_sequence(q)?;
    let kernel = seq.sub().clone();
    let delta = seq.connecting_cochain(c)?;
    let cocycle = delta.neg(&kernel);
    let h2 = cohomology(&kernel, 2)?;
    let coords = h2.class_of(&cocycle)?;
    Ok(Obstruction {
        kernel,
        sequence: seq,
        h2,
        cocycle,
        coords,
    })
}

/// A lift of `c` along `q` when the obstruction vanishes.
pub fn lift_along(q: &GMap, c: &Cochain) -> Result<Option<Cochain>> {
    let obs = obstruction_class(q, c)?;
    if !obs.vanishes() {
        return Ok(None);
    }
    let seq = &obs.sequence;
    let big = q.source();
    let lifted = Cochain {
        degree: 1,
        values: c.values.iter().map(|v| seq.lift(v)).collect(),
    };
    // d(lifted) = i(delta); correct by a 1-cochain b in the kernel with db = delta
    let delta = seq.connecting_cochain(c)?;
    let b = coboundary_preimage(&obs.kernel, &delta)?;
    let correction = Cochain {
        degree: 1,
        values: b.values.iter().map(|v| seq.inj.apply(v)).collect(),
    };
    let out = lifted.add(big, &correction.neg(big));
    debug_assert!(is_cocycle(big, &out));
    Ok(Some(out))
}

/// A 1-cochain `b` with `d b = z` for a 2-coboundary `z`.
pub fn coboundary_preimage(m: &GModule, z: &Cochain) -> Result<Cochain> {
    let order = m.group().order();
    let k = m.rank();
    let md = m.modulus();
    // unknowns: b(g) in ambient coords, plus relation multipliers per slot
    let n_rel = m.relations().rows().len();
    let n_vars = order * k + order * order * n_rel;
    let mut rows = vec![vec![0u64; order * order * k]; n_vars];
    for g in 0..order {
        for i in 0..k {
            let e = unit_vector(k, i);
            let var = g * k + i;
            let b = Cochain::from_fn_raw(m, 1, |t| if t[0] == g { e.clone() } else { vec![0; k] });
            let d = differential_raw(m, &b);
            for (slot, v) in d.values.iter().enumerate() {
                rows[var][slot * k..(slot + 1) * k].copy_from_slice(v);
            }
        }
    }
    for slot in 0..order * order {
        for (r, rel) in m.relations().rows().iter().enumerate() {
            rows[order * k + slot * n_rel + r][slot * k..(slot + 1) * k].copy_from_slice(rel);
        }
    }
    let mat = ResidueMatrix::from_rows(md, order * order * k, &rows).map_err(CohomologyError::from)?;
    let target: Vec<u64> = z.values.iter().flatten().copied().collect();
    let x = LinearSolver::new(&mat)
        .solve(&target)
        .map_err(CohomologyError::from)?
        .ok_or(CohomologyError::NotCocycle)?;
    Ok(Cochain {
        degree: 1,
        values: (0..order).map(|g| m.canonical(&x[g * k..(g + 1) * k])).collect(),
    })
}

trait RawCochain {
    fn from_fn_raw<F: Fn(&[usize]) -> Vec<u64>>(m: &GModule, n: usize, f: F) -> Cochain;
}

impl RawCochain for Cochain {
    fn from_fn_raw<F: Fn(&[usize]) -> Vec<u64>>(m: &GModule, n: usize, f: F) -> Cochain {
        let order = m.group().order();
        Cochain {
            degree: n,
            values: (0..order.pow(n as u32)).map(|i| f(&tuple_of(order, n, i))).collect(),
        }
    }
}

/// The bar differential without reducing modulo relations, so the result is
/// linear in the ambient coordinates of the input.
fn differential_raw(m: &GModule, c: &Cochain) -> Cochain {
    let order = m.group().order();
    let n = c.degree;
    let md = m.modulus();
    let values = (0..order.pow(n as u32 + 1))
        .map(|idx| {
            let t = tuple_of(order, n + 1, idx);
            let mut acc = m.action_matrix(t[0]).apply(c.value(order, &t[1..]));
            for i in 0..n {
                let mut merged = t[..i].to_vec();
                merged.push(m.group().mul(t[i], t[i + 1]));
                merged.extend_from_slice(&t[i + 2..]);
                let v = c.value(order, &merged);
                acc = if i % 2 == 0 { vec_add(md, &acc, &vec_neg(md, v)) } else { vec_add(md, &acc, v) };
            }
            let last = c.value(order, &t[..n]);
            if n % 2 == 0 {
                vec_add(md, &acc, &vec_neg(md, last))
            } else {
                vec_add(md, &acc, last)
            }
        })
        .collect();
    Cochain { degree: n + 1, values }
}

/// `[[a, b], [0, d]]` with `a`, `d` units.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BorelMatrix<E> {
    pub a: E,
    pub b: E,
    pub d: E,
}

/// A coefficient ring for the Borel subgroup, with a `G`-action by ring
/// automorphisms.
pub struct BorelRing<'a, R: CommRing> {
    pub ring: &'a R,
    pub act: &'a dyn Fn(usize, &R::Elem) -> R::Elem,
}

impl<R: CommRing> BorelRing<'_, R> {
    fn mul(&self, x: &BorelMatrix<R::Elem>, y: &BorelMatrix<R::Elem>) -> BorelMatrix<R::Elem> {
        let r = self.ring;
        BorelMatrix {
            a: r.mul(&x.a, &y.a),
            b: r.add(&r.mul(&x.a, &y.b), &r.mul(&x.b, &y.d)),
            d: r.mul(&x.d, &y.d),
        }
    }

    fn act(&self, g: usize, x: &BorelMatrix<R::Elem>) -> BorelMatrix<R::Elem> {
        BorelMatrix {
            a: (self.act)(g, &x.a),
            b: (self.act)(g, &x.b),
            d: (self.act)(g, &x.d),
        }
    }

    fn identity(&self) -> BorelMatrix<R::Elem> {
        BorelMatrix {
            a: self.ring.one(),
            b: self.ring.zero(),
            d: self.ring.one(),
        }
    }

    fn units(&self) -> Vec<R::Elem> {
        let elems = self.ring.elements();
        let one = self.ring.one();
        elems
            .iter()
            .filter(|x| elems.iter().any(|y| self.ring.mul(x, y) == one))
            .cloned()
            .collect()
    }

    fn group_elements(&self) -> Vec<BorelMatrix<R::Elem>> {
        let units = self.units();
        let elems = self.ring.elements();
        let mut out = Vec::with_capacity(units.len() * units.len() * elems.len());
        for a in &units {
            for b in &elems {
                for d in &units {
                    out.push(BorelMatrix { a: a.clone(), b: b.clone(), d: d.clone() });
                }
            }
        }
        out
    }

    fn inverse(&self, x: &BorelMatrix<R::Elem>, all: &[BorelMatrix<R::Elem>]) -> BorelMatrix<R::Elem> {
        let id = self.identity();
        all.iter().find(|y| self.mul(x, y) == id).expect("invertible").clone()
    }
}

/// A cocycle table `g -> z(g)` with `z(gh) = z(g) g(z(h))`.
pub type BorelCocycle<E> = Vec<BorelMatrix<E>>;

/// Nonabelian `H^1(G, B(R))`: one representative per twisted-conjugacy
/// class, plus every cocycle with its class index.
#[derive(Clone, Debug)]
pub struct BorelH1<E> {
    pub cocycles: Vec<BorelCocycle<E>>,
    pub class_of: Vec<usize>,
    pub representatives: Vec<BorelCocycle<E>>,
}

pub fn b2_h1_classes<R: CommRing>(
    group: &FiniteGroup,
    coeffs: &BorelRing<'_, R>,
    bound: usize,
) -> Result<BorelH1<R::Elem>> {
    let cyclic = group.cyclic_generator();
    if group.order() > 8 || (group.order() > 4 && cyclic.is_none()) {
        return Err(ExtensionError::GroupTooLarge {
            what: "nonabelian H^1",
            order: group.order(),
        });
    }
    let all = coeffs.group_elements();
    let gens = match cyclic {
        Some(g) => vec![g],
        None => group.generators(),
    };
    let size = all.len().saturating_pow(gens.len() as u32);
    if size > bound {
        return Err(ExtensionError::BoundExceeded {
            what: "candidate cocycle tables",
            size,
            bound,
        });
    }
    let mut cocycles = Vec::new();
    let choices = crate::linalg::all_coordinates(&vec![all.len() as u64; gens.len()]);
    for choice in choices {
        let images: Vec<(usize, &BorelMatrix<R::Elem>)> =
            gens.iter().zip(&choice).map(|(&g, &i)| (g, &all[i as usize])).collect();
        if let Some(z) = extend_cocycle(group, coeffs, &images) {
            cocycles.push(z);
        }
    }
    let index: HashMap<&BorelCocycle<R::Elem>, usize> =
        cocycles.iter().enumerate().map(|(i, z)| (z, i)).collect();
    let mut class_of = vec![usize::MAX; cocycles.len()];
    let mut representatives = Vec::new();
    for i in 0..cocycles.len() {
        if class_of[i] != usize::MAX {
            continue;
        }
        let c = representatives.len();
        representatives.push(cocycles[i].clone());
        for b in &all {
            let binv = coeffs.inverse(b, &all);
            let twisted: BorelCocycle<R::Elem> = group
                .elements()
                .map(|g| coeffs.mul(&coeffs.mul(&binv, &cocycles[i][g]), &coeffs.act(g, b)))
                .collect();
            let j = index[&twisted];
            class_of[j] = c;
        }
    }
    Ok(BorelH1 {
        cocycles,
        class_of,
        representatives,
    })
}

/// Extends generator values by `z(xg) = z(x) x(z(g))`; `None` if
/// inconsistent (for a cyclic group this is the twisted norm condition).
fn extend_cocycle<R: CommRing>(
    group: &FiniteGroup,
    coeffs: &BorelRing<'_, R>,
    images: &[(usize, &BorelMatrix<R::Elem>)],
) -> Option<BorelCocycle<R::Elem>> {
    let mut z: Vec<Option<BorelMatrix<R::Elem>>> = vec![None; group.order()];
    z[group.identity()] = Some(coeffs.identity());
    let mut queue = std::collections::VecDeque::from([group.identity()]);
    while let Some(x) = queue.pop_front() {
        for &(g, zg) in images {
            let y = group.mul(x, g);
            let zx = z[x].clone().expect("visited");
            let v = coeffs.mul(&zx, &coeffs.act(x, zg));
            match &z[y] {
                None => {
                    z[y] = Some(v);
                    queue.push_back(y);
                }
                Some(w) if *w != v => return None,
                Some(_) => {}
            }
        }
    }
    let z: Vec<BorelMatrix<R::Elem>> = z.into_iter().collect::<Option<Vec<_>>>()?;
    let ok = group.elements().all(|g| {
        group
            .elements()
            .all(|h| z[group.mul(g, h)] == coeffs.mul(&z[g], &coeffs.act(g, &z[h])))
    });
    ok.then_some(z)
}

/// Surjectivity of `H^1(G, B(S)) -> H^1(G, B(R))` for a ring map
/// `reduce: S -> R`, with a lifting cocycle per target class.
#[derive(Clone, Debug)]
pub struct BorelReduction<E, F> {
    pub surjective: bool,
    pub source_classes: usize,
    pub target_classes: usize,
    /// For each target class, a source cocycle reducing into it.
    pub witnesses: Vec<Option<BorelCocycle<E>>>,
    pub target_representatives: Vec<BorelCocycle<F>>,
}

pub fn b2_reduction_surjective<S: CommRing, R: CommRing>(
    group: &FiniteGroup,
    big: &BorelRing<'_, S>,
    small: &BorelRing<'_, R>,
    reduce: &dyn Fn(&S::Elem) -> R::Elem,
    bound: usize,
) -> Result<BorelReduction<S::Elem, R::Elem>> {
    let hs = b2_h1_classes(group, big, bound)?;
    let hr = b2_h1_classes(group, small, bound)?;
    let index: HashMap<&BorelCocycle<R::Elem>, usize> =
        hr.cocycles.iter().enumerate().map(|(i, z)| (z, i)).collect();
    let mut witnesses: Vec<Option<BorelCocycle<S::Elem>>> = vec![None; hr.representatives.len()];
    for z in &hs.representatives {
        let reduced: BorelCocycle<R::Elem> = z
            .iter()
            .map(|m| BorelMatrix { a: reduce(&m.a), b: reduce(&m.b), d: reduce(&m.d) })
            .collect();
        let c = hr.class_of[index[&reduced]];
        if witnesses[c].is_none() {
            witnesses[c] = Some(z.clone());
        }
    }
    // prefer a witness whose reduction is the representative itself
    for z in &hs.cocycles {
        let reduced: BorelCocycle<R::Elem> = z
            .iter()
            .map(|m| BorelMatrix { a: reduce(&m.a), b: reduce(&m.b), d: reduce(&m.d) })
            .collect();
        let i = index[&reduced];
        let c = hr.class_of[i];
        if reduced == hr.representatives[c] {
            let current = witnesses[c].as_ref().map(|w| {
                w.iter()
                    .map(|m| BorelMatrix { a: reduce(&m.a), b: reduce(&m.b), d: reduce(&m.d) })
                    .collect::<Vec<_>>()
                    == hr.representatives[c]
            });
            if current != Some(true) {
                witnesses[c] = Some(z.clone());
            }
        }
    }
    Ok(BorelReduction {
        surjective: witnesses.iter().all(Option::is_some),
        source_classes: hs.representatives.len(),
        target_classes: hr.representatives.len(),
        witnesses,
        target_representatives: hr.representatives,
    })
}

/// The class map `H^1(G, M_big) -> H^1(G, M_small)` induced by `q`.
pub fn h1_reduction(q: &GMap) -> Result<ClassHom> {
    let src = cohomology(q.source(), 1)?;
    let tgt = cohomology(q.target(), 1)?;
    Ok(ClassHom::induced(q, &src, &tgt)?)
}

/// `d` of a 0-cochain, re-exported for callers building coboundaries.
pub fn coboundary_of(m: &GModule, v: &[u64]) -> Cochain {
    differential(m, &Cochain::constant(m, v))
}
