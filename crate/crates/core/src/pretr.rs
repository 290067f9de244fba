//! One-sided twisted complexes, the pretriangulated envelope `Pretr(A)`
//! realized on finitely many objects, cones, contractions, and the
//! cone-based check that a closed lift is a homotopy equivalence.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::ainfty::{
    self, card, circ_at, delta_at, dinf, dinf_family, full, singleton, transformation_shape, McObject, SubsetFamily,
    Transformation,
};
use crate::dg::{CochainComplex, CompData, CompEntry, DgCategory, GradedSpace, Morphism, ObjectId};
use crate::error::{Error, Result};
use crate::gen;
use crate::linalg::{self, Matrix, Scalar};
use crate::reedy::{self, SignScheme};

/// `(⊕ C_i[r_i], q)` with `q[i][j] ∈ A^{1+r_i−r_j}(C_j, C_i)`, zero for `i ≥ j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TwistedComplex {
    pub entries: Vec<(ObjectId, i32)>,
    pub q: Vec<Vec<Vec<Scalar>>>,
}

/// Degree in `A` of block `(i, j)` of a degree-`k` map `⊕C_j[r_j] → ⊕C'_i[r'_i]`.
pub fn block_degree(k: i32, target_shift: i32, source_shift: i32) -> i32 {
    k + target_shift - source_shift
}

impl TwistedComplex {
    pub fn new(cat: &DgCategory, entries: Vec<(ObjectId, i32)>, q: Vec<Vec<Vec<Scalar>>>) -> Result<TwistedComplex> {
        let t = TwistedComplex { entries, q };
        if t.entries.iter().any(|&(x, _)| x >= cat.num_objects()) {
            return Err(Error::Invalid("twisted complex entry is not an object".into()));
        }
        if t.q.len() != t.len() || t.q.iter().any(|row| row.len() != t.len()) {
            return Err(Error::Shape("q must be a square matrix over the entries".into()));
        }
        for i in 0..t.len() {
            for j in 0..t.len() {
                let (x, y, k) = t.q_hom(i, j);
                if t.q[i][j].len() != cat.dim(x, y, k) {
                    return Err(Error::Shape(format!("q[{i}][{j}] has the wrong dimension")));
                }
            }
        }
        Ok(t)
    }

    /// `C` as a one-entry complex.
    pub fn single(cat: &DgCategory, x: ObjectId) -> TwistedComplex {
        TwistedComplex { entries: vec![(x, 0)], q: vec![vec![cat.field().zeros(cat.dim(x, x, 1))]] }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn q_hom(&self, i: usize, j: usize) -> (ObjectId, ObjectId, i32) {
        (self.entries[j].0, self.entries[i].0, 1 + self.entries[i].1 - self.entries[j].1)
    }

    /// `q` as a degree-1 endomorphism.
    pub fn q_morphism(&self) -> TcMorphism {
        TcMorphism { source: self.clone(), target: self.clone(), degree: 1, blocks: self.q.clone() }
    }

    /// The complex shifted by one: shifts raised by 1 and `q` negated.
    pub fn shifted(&self) -> TwistedComplex {
        TwistedComplex {
            entries: self.entries.iter().map(|&(x, r)| (x, r + 1)).collect(),
            q: self.q.iter().map(|row| row.iter().map(|c| c.iter().map(|s| -s).collect()).collect()).collect(),
        }
    }
}

/// A degree-`k` map with blocks `blocks[i][j] ∈ A^{k+r'_i−r_j}(C_j, C'_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TcMorphism {
    pub source: TwistedComplex,
    pub target: TwistedComplex,
    pub degree: i32,
    pub blocks: Vec<Vec<Vec<Scalar>>>,
}

impl TcMorphism {
    pub fn zero(cat: &DgCategory, source: &TwistedComplex, target: &TwistedComplex, degree: i32) -> TcMorphism {
        let blocks = (0..target.len())
            .map(|i| {
                (0..source.len())
                    .map(|j| {
                        let k = block_degree(degree, target.entries[i].1, source.entries[j].1);
                        cat.field().zeros(cat.dim(source.entries[j].0, target.entries[i].0, k))
                    })
                    .collect()
            })
            .collect();
        TcMorphism { source: source.clone(), target: target.clone(), degree, blocks }
    }

    pub fn identity(cat: &DgCategory, t: &TwistedComplex) -> TcMorphism {
        let mut m = TcMorphism::zero(cat, t, t, 0);
        for (i, &(x, _)) in t.entries.iter().enumerate() {
            m.blocks[i][i] = cat.identity_coords(x).to_vec();
        }
        m
    }

    /// Block `(i, j)` as a morphism of `A`.
    pub fn block(&self, i: usize, j: usize) -> Morphism {
        Morphism {
            source: self.source.entries[j].0,
            target: self.target.entries[i].0,
            degree: block_degree(self.degree, self.target.entries[i].1, self.source.entries[j].1),
            coords: self.blocks[i][j].clone(),
        }
    }

    pub fn check(&self, cat: &DgCategory) -> Result<()> {
        let z = TcMorphism::zero(cat, &self.source, &self.target, self.degree);
        let ok = z.blocks.len() == self.blocks.len()
            && z.blocks.iter().zip(&self.blocks).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(u, v)| u.len() == v.len())
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("twisted-complex morphism blocks have the wrong dimensions".into()))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().flatten().all(|c| linalg::is_zero_vec(c))
    }

    fn add_scaled(&mut self, c: &Scalar, other: &TcMorphism) {
        for (a, b) in self.blocks.iter_mut().flatten().zip(other.blocks.iter().flatten()) {
            linalg::axpy(a, c, b);
        }
    }
}

/// Matrix product `g f`, composing blocks in `A`.
pub fn compose_tc(cat: &DgCategory, g: &TcMorphism, f: &TcMorphism) -> Result<TcMorphism> {
    if g.source != f.target {
        return Err(Error::Shape("middle twisted complexes differ".into()));
    }
    let mut out = TcMorphism::zero(cat, &f.source, &g.target, g.degree + f.degree);
    for i in 0..g.target.len() {
        for j in 0..f.source.len() {
            for l in 0..f.target.len() {
                let t = cat.compose(&g.block(i, l), &f.block(l, j))?;
                linalg::axpy(&mut out.blocks[i][j], &cat.field().one(), &t.coords);
            }
        }
    }
    Ok(out)
}

/// Blockwise `(−1)^{r'_i} d`.
fn d_blocks(cat: &DgCategory, f: &TcMorphism) -> TcMorphism {
    let mut out = TcMorphism::zero(cat, &f.source, &f.target, f.degree + 1);
    for i in 0..f.target.len() {
        let s = cat.field().sign(f.target.entries[i].1.rem_euclid(2) == 1);
        for j in 0..f.source.len() {
            out.blocks[i][j] = linalg::scale(&s, &cat.diff(&f.block(i, j)).coords);
        }
    }
    out
}

/// `d_TC(f) = d f + q'f − (−1)^k f q`.
pub fn d_tc(cat: &DgCategory, f: &TcMorphism) -> Result<TcMorphism> {
    let mut out = d_blocks(cat, f);
    out.add_scaled(&cat.field().one(), &compose_tc(cat, &f.target.q_morphism(), f)?);
    let s = cat.field().sign(f.degree.rem_euclid(2) == 0);
    out.add_scaled(&s, &compose_tc(cat, f, &f.source.q_morphism())?);
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct TwistedReport {
    pub lower_blocks: Vec<(usize, usize)>,
    pub mc_blocks: Vec<(usize, usize)>,
}

impl TwistedReport {
    pub fn passed(&self) -> bool {
        self.lower_blocks.is_empty() && self.mc_blocks.is_empty()
    }
}

/// One-sidedness and `d q + q q = 0`.
pub fn validate_twisted(cat: &DgCategory, t: &TwistedComplex) -> Result<TwistedReport> {
    let mut report = TwistedReport::default();
    for i in 0..t.len() {
        for j in 0..=i {
            if !linalg::is_zero_vec(&t.q[i][j]) {
                report.lower_blocks.push((i, j));
            }
        }
    }
    let q = t.q_morphism();
    let mut mc = d_blocks(cat, &q);
    mc.add_scaled(&cat.field().one(), &compose_tc(cat, &q, &q)?);
    for i in 0..t.len() {
        for j in 0..t.len() {
            if !linalg::is_zero_vec(&mc.blocks[i][j]) {
                report.mc_blocks.push((i, j));
            }
        }
    }
    Ok(report)
}

/// `Cone(f) = (Y ⊕ X[1], q₀₁ = f)` for a closed degree-0 `f: X → Y`.
pub fn cone(cat: &DgCategory, f: &Morphism) -> Result<TwistedComplex> {
    cat.check(f)?;
    if f.degree != 0 || !cat.is_closed(f) {
        return Err(Error::NotClosed("cone needs a closed degree-0 morphism".into()));
    }
    let field = cat.field();
    let (x, y) = (f.source, f.target);
    let q = vec![
        vec![field.zeros(cat.dim(y, y, 1)), f.coords.clone()],
        vec![field.zeros(cat.dim(y, x, 2)), field.zeros(cat.dim(x, x, 1))],
    ];
    TwistedComplex::new(cat, vec![(y, 0), (x, 1)], q)
}

/// The cone of a closed degree-0 map of twisted complexes: the target
/// followed by the shifted source, glued by `f`.
pub fn cone_tc(cat: &DgCategory, f: &TcMorphism) -> Result<TwistedComplex> {
    f.check(cat)?;
    if f.degree != 0 || !d_tc(cat, f)?.is_zero() {
        return Err(Error::NotClosed("cone needs a closed degree-0 morphism".into()));
    }
    let (t, s) = (&f.target, f.source.shifted());
    let entries: Vec<(ObjectId, i32)> = t.entries.iter().chain(&s.entries).copied().collect();
    let (a, b) = (t.len(), s.len());
    let mut q = vec![Vec::new(); a + b];
    for (i, row) in q.iter_mut().enumerate() {
        for j in 0..a + b {
            let block = match (i < a, j < a) {
                (true, true) => t.q[i][j].clone(),
                (true, false) => f.blocks[i][j - a].clone(),
                (false, false) => s.q[i - a][j - a].clone(),
                (false, true) => {
                    let k = 1 + entries[i].1 - entries[j].1;
                    cat.field().zeros(cat.dim(entries[j].0, entries[i].0, k))
                }
            };
            row.push(block);
        }
    }
    TwistedComplex::new(cat, entries, q)
}

struct HomLayout {
    /// per degree: (i, j, offset, len)
    blocks: BTreeMap<i32, Vec<(usize, usize, usize, usize)>>,
}

impl HomLayout {
    fn new(cat: &DgCategory, s: &TwistedComplex, t: &TwistedComplex) -> HomLayout {
        let mut degrees = Vec::new();
        for &(y, ry) in &t.entries {
            for &(x, rx) in &s.entries {
                let sp = cat.hom(x, y).space();
                if let (Some(lo), Some(hi)) = (sp.min_degree(), sp.max_degree()) {
                    degrees.extend((lo..=hi).map(|m| m - ry + rx));
                }
            }
        }
        degrees.sort_unstable();
        degrees.dedup();
        let mut blocks = BTreeMap::new();
        for k in degrees {
            let mut list = Vec::new();
            let mut off = 0;
            for (i, &(y, ry)) in t.entries.iter().enumerate() {
                for (j, &(x, rx)) in s.entries.iter().enumerate() {
                    let len = cat.dim(x, y, block_degree(k, ry, rx));
                    list.push((i, j, off, len));
                    off += len;
                }
            }
            blocks.insert(k, list);
        }
        HomLayout { blocks }
    }

    fn dim(&self, k: i32) -> usize {
        self.blocks.get(&k).and_then(|l| l.last()).map_or(0, |&(_, _, o, n)| o + n)
    }

    fn flatten(&self, f: &TcMorphism) -> Vec<Scalar> {
        let field_len = self.dim(f.degree);
        let mut out = Vec::with_capacity(field_len);
        if let Some(list) = self.blocks.get(&f.degree) {
            for &(i, j, _, _) in list {
                out.extend(f.blocks[i][j].iter().cloned());
            }
        }
        out
    }

    fn unflatten(&self, cat: &DgCategory, s: &TwistedComplex, t: &TwistedComplex, k: i32, v: &[Scalar]) -> TcMorphism {
        let mut m = TcMorphism::zero(cat, s, t, k);
        if let Some(list) = self.blocks.get(&k) {
            for &(i, j, off, len) in list {
                m.blocks[i][j] = v[off..off + len].to_vec();
            }
        }
        m
    }
}

/// Composition entries of `A` grouped by objects and degrees.
struct Buckets(HashMap<(ObjectId, ObjectId, ObjectId, i32, i32), Vec<CompEntry>>);

impl Buckets {
    fn new(cat: &DgCategory) -> Buckets {
        let mut map: HashMap<_, Vec<CompEntry>> = HashMap::new();
        let m = cat.num_objects();
        for x in 0..m {
            for y in 0..m {
                for z in 0..m {
                    for e in cat.comp_entries(x, y, z) {
                        map.entry((x, y, z, e.gdeg, e.fdeg)).or_default().push(e.clone());
                    }
                }
            }
        }
        Buckets(map)
    }

    fn get(&self, x: ObjectId, y: ObjectId, z: ObjectId, gdeg: i32, fdeg: i32) -> &[CompEntry] {
        self.0.get(&(x, y, z, gdeg, fdeg)).map_or(&[], |v| v)
    }
}

fn add_at(m: &mut Matrix, r: usize, c: usize, v: &Scalar) {
    let cur = m.get(r, c) + v;
    m.set(r, c, cur);
}

/// Matrix of `d_TC: hom(S,T)^k → hom(S,T)^{k+1}` in the layout coordinates.
fn d_tc_matrix(cat: &DgCategory, buckets: &Buckets, s: &TwistedComplex, t: &TwistedComplex, l: &HomLayout, k: i32) -> Matrix {
    let field = cat.field();
    let mut m = Matrix::zeros(field, l.dim(k + 1), l.dim(k));
    let src = &l.blocks[&k];
    let tgt = &l.blocks[&(k + 1)];
    let at = |i: usize, j: usize| tgt[i * s.len() + j].2;
    let right_sign = field.sign(k.rem_euclid(2) == 0);
    for &(i, j, off, len) in src {
        if len == 0 {
            continue;
        }
        let (cj, rj) = s.entries[j];
        let (ci, ri) = t.entries[i];
        let deg = block_degree(k, ri, rj);
        // (−1)^{r'_i} d on the block itself
        let dm = cat.hom(cj, ci).d(deg);
        let sign = field.sign(ri.rem_euclid(2) == 1);
        for r in 0..dm.rows() {
            for c in 0..dm.cols() {
                let v = dm.get(r, c);
                if !v.is_zero() {
                    add_at(&mut m, at(i, j) + r, off + c, &(&sign * v));
                }
            }
        }
        // q'_{hi} ∘ f_{ij} lands in block (h, j)
        for h in 0..t.len() {
            let q = &t.q[h][i];
            if linalg::is_zero_vec(q) {
                continue;
            }
            let qdeg = 1 + t.entries[h].1 - ri;
            for e in buckets.get(cj, ci, t.entries[h].0, qdeg, deg) {
                if !q[e.gidx].is_zero() {
                    add_at(&mut m, at(h, j) + e.outidx, off + e.fidx, &(&q[e.gidx] * &e.coef));
                }
            }
        }
        // −(−1)^k f_{ij} ∘ q_{jh} lands in block (i, h)
        for h in 0..s.len() {
            let q = &s.q[j][h];
            if linalg::is_zero_vec(q) {
                continue;
            }
            let qdeg = 1 + rj - s.entries[h].1;
            for e in buckets.get(s.entries[h].0, cj, ci, deg, qdeg) {
                if !q[e.fidx].is_zero() {
                    let v = &(&q[e.fidx] * &e.coef) * &right_sign;
                    add_at(&mut m, at(i, h) + e.outidx, off + e.gidx, &v);
                }
            }
        }
    }
    m
}

/// `Pretr(A)` restricted to a finite list of twisted complexes, realized
/// as a DG-category whose hom complexes carry `d_TC`.
pub struct Pretr {
    pub category: DgCategory,
    pub complexes: Vec<TwistedComplex>,
    /// Only maps from earlier to later objects are kept.
    pub directed: bool,
}

impl Pretr {
    /// Twisted complexes are deduplicated; every complex must be valid.
    pub fn new(cat: &DgCategory, complexes: &[TwistedComplex]) -> Result<Pretr> {
        let mut list: Vec<TwistedComplex> = Vec::new();
        for t in complexes {
            if !list.contains(t) {
                let report = validate_twisted(cat, t)?;
                if !report.passed() {
                    return Err(Error::Invalid(format!("twisted complex fails validation: {report:?}")));
                }
                list.push(t.clone());
            }
        }
        Pretr::build(cat, list, false)
    }

    /// The subcategory on `complexes` (in order, repeats allowed) keeping
    /// only homs from an object to itself or a later one. It is closed under
    /// composition and `d_TC`, and holds everything a vertex-ordered family
    /// over these objects can touch.
    pub fn directed(cat: &DgCategory, complexes: &[TwistedComplex]) -> Result<Pretr> {
        for t in complexes {
            let report = validate_twisted(cat, t)?;
            if !report.passed() {
                return Err(Error::Invalid(format!("twisted complex fails validation: {report:?}")));
            }
        }
        Pretr::build(cat, complexes.to_vec(), true)
    }

    fn build(cat: &DgCategory, list: Vec<TwistedComplex>, directed: bool) -> Result<Pretr> {
        let field = cat.field();
        let n = list.len();
        let buckets = Buckets::new(cat);
        let layouts: Vec<HomLayout> = (0..n * n).map(|p| HomLayout::new(cat, &list[p / n], &list[p % n])).collect();
        let mut homs = HashMap::new();
        for x in 0..n {
            for y in 0..n {
                if directed && y < x {
                    continue;
                }
                let l = &layouts[x * n + y];
                let space = GradedSpace::new(l.blocks.keys().map(|&k| (k, l.dim(k))));
                let mut d = BTreeMap::new();
                for &k in l.blocks.keys() {
                    let (rows, cols) = (l.dim(k + 1), l.dim(k));
                    if rows == 0 || cols == 0 {
                        continue;
                    }
                    d.insert(k, d_tc_matrix(cat, &buckets, &list[x], &list[y], l, k));
                }
                homs.insert((x, y), CochainComplex::new(field, space, d)?);
            }
        }
        let mut comp = CompData::new();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if directed && (y < x || z < y) {
                        continue;
                    }
                    let (lf, lg, lo) = (&layouts[x * n + y], &layouts[y * n + z], &layouts[x * n + z]);
                    let mut entries = Vec::new();
                    for (&p, gl) in &lg.blocks {
                        for (&q, fl) in &lf.blocks {
                            let Some(ol) = lo.blocks.get(&(p + q)) else { continue };
                            for &(i, l, goff, glen) in gl {
                                if glen == 0 {
                                    continue;
                                }
                                for &(l2, j, foff, flen) in fl {
                                    if l2 != l || flen == 0 {
                                        continue;
                                    }
                                    let ooff = ol[i * list[x].len() + j].2;
                                    let (cx, cy, cz) = (list[x].entries[j].0, list[y].entries[l].0, list[z].entries[i].0);
                                    let gdeg = block_degree(p, list[z].entries[i].1, list[y].entries[l].1);
                                    let fdeg = block_degree(q, list[y].entries[l].1, list[x].entries[j].1);
                                    for e in buckets.get(cx, cy, cz, gdeg, fdeg) {
                                        entries.push(CompEntry {
                                            gdeg: p,
                                            gidx: goff + e.gidx,
                                            fdeg: q,
                                            fidx: foff + e.fidx,
                                            outidx: ooff + e.outidx,
                                            coef: e.coef.clone(),
                                        });
                                    }
                                }
                            }
                        }
                    }
                    if !entries.is_empty() {
                        comp.insert((x, y, z), entries);
                    }
                }
            }
        }
        let ids = (0..n).map(|x| layouts[x * n + x].flatten(&TcMorphism::identity(cat, &list[x]))).collect();
        let names = (0..n)
            .map(|i| if directed { format!("v{i}:{}", complex_name(cat, &list[i], i)) } else { complex_name(cat, &list[i], i) })
            .collect();
        let category = DgCategory::new(field, names, homs, comp, ids)?;
        Ok(Pretr { category, complexes: list, directed })
    }

    /// `Pretr` on the one-entry complexes of every object of `A` plus `extra`.
    pub fn with_embedding(cat: &DgCategory, extra: &[TwistedComplex]) -> Result<Pretr> {
        let mut all: Vec<TwistedComplex> = (0..cat.num_objects()).map(|x| TwistedComplex::single(cat, x)).collect();
        all.extend(extra.iter().cloned());
        Pretr::new(cat, &all)
    }

    pub fn object_of(&self, t: &TwistedComplex) -> Option<ObjectId> {
        self.complexes.iter().position(|c| c == t)
    }

    /// `A ↪ Pretr(A)` on objects.
    pub fn embed_object(&self, cat: &DgCategory, x: ObjectId) -> Result<ObjectId> {
        self.object_of(&TwistedComplex::single(cat, x))
            .ok_or_else(|| Error::Invalid(format!("object {} is not embedded", cat.name(x))))
    }

    pub fn embed_morphism(&self, cat: &DgCategory, f: &Morphism) -> Result<Morphism> {
        Ok(Morphism {
            source: self.embed_object(cat, f.source)?,
            target: self.embed_object(cat, f.target)?,
            degree: f.degree,
            coords: f.coords.clone(),
        })
    }

    fn embed_family(&self, cat: &DgCategory, phi: &SubsetFamily) -> Result<SubsetFamily> {
        let map = |v: &[ObjectId]| v.iter().map(|&x| self.embed_object(cat, x)).collect::<Result<Vec<_>>>();
        let mut shape = phi.shape.clone();
        shape.source = map(&phi.shape.source)?;
        shape.target = map(&phi.shape.target)?;
        let mut out = shape.zero();
        for (s, c) in phi.components() {
            out.set_coords(s, c.clone());
        }
        Ok(out)
    }

    pub fn embed_mc(&self, cat: &DgCategory, obj: &McObject) -> Result<McObject> {
        Ok(McObject { f: self.embed_family(cat, &obj.f)? })
    }

    pub fn embed_transformation(&self, cat: &DgCategory, a: &Transformation) -> Result<Transformation> {
        Ok(Transformation {
            source: Arc::new(self.embed_mc(cat, &a.source)?),
            target: Arc::new(self.embed_mc(cat, &a.target)?),
            a: self.embed_family(cat, &a.a)?,
        })
    }

    /// Coordinates of a twisted-complex morphism between two objects of this category.
    pub fn morphism(&self, cat: &DgCategory, f: &TcMorphism) -> Result<Morphism> {
        let (x, y) = (self.require(&f.source)?, self.require(&f.target)?);
        Ok(Morphism { source: x, target: y, degree: f.degree, coords: HomLayout::new(cat, &f.source, &f.target).flatten(f) })
    }

    pub fn tc_morphism(&self, cat: &DgCategory, m: &Morphism) -> TcMorphism {
        let (s, t) = (&self.complexes[m.source], &self.complexes[m.target]);
        HomLayout::new(cat, s, t).unflatten(cat, s, t, m.degree, &m.coords)
    }

    fn require(&self, t: &TwistedComplex) -> Result<ObjectId> {
        self.object_of(t).ok_or_else(|| Error::Invalid("twisted complex is not an object of this envelope".into()))
    }
}

fn complex_name(cat: &DgCategory, t: &TwistedComplex, i: usize) -> String {
    if t.len() == 1 && t.entries[0].1 == 0 && linalg::is_zero_vec(&t.q[0][0]) {
        return cat.name(t.entries[0].0).to_string();
    }
    let parts: Vec<String> = t.entries.iter().map(|&(x, r)| format!("{}[{r}]", cat.name(x))).collect();
    format!("tw{i}({})", parts.join("+"))
}

/// Solve `d_TC(b) = 1` for a degree −1 endomorphism.
pub fn find_contraction(cat: &DgCategory, t: &TwistedComplex) -> Result<Option<TcMorphism>> {
    let p = Pretr::new(cat, std::slice::from_ref(t))?;
    let hom = p.category.hom(0, 0);
    let rhs = p.category.identity_coords(0).to_vec();
    if hom.dim(-1) == 0 {
        return Ok(if linalg::is_zero_vec(&rhs) { Some(TcMorphism::zero(cat, t, t, -1)) } else { None });
    }
    let sys = linalg::AffineSystem::new(hom.d(-1), rhs);
    let Some(v) = linalg::solve_affine(&sys)? else {
        return Ok(None);
    };
    let b = p.tc_morphism(cat, &Morphism { source: 0, target: 0, degree: -1, coords: v });
    if d_tc(cat, &b)? != TcMorphism::identity(cat, t) {
        return Err(Error::Invalid("contraction failed its re-check".into()));
    }
    Ok(Some(b))
}

/// The objects `Cone(a_i)` for a closed degree-0 transformation over `A`.
pub fn vertex_cones(cat: &DgCategory, a: &Transformation) -> Result<Vec<TwistedComplex>> {
    (0..=a.n()).map(|i| cone(cat, &a.component(cat, singleton(i)))).collect()
}

/// `Cone(a)` in `F_n(Pretr A)` (or the matching object if `a` is truncated),
/// with vertices `Cone(a_i)` and components
/// `h_I = [[g_I, (−1)^k a_I], [0, (−1)^{k−1} f_I]]`, `|I| = k+1`.
pub fn cone_object(cat: &DgCategory, p: &Pretr, a: &Transformation) -> Result<McObject> {
    if a.degree() != 0 {
        return Err(Error::Shape("cone needs a degree-0 transformation".into()));
    }
    let cones = vertex_cones(cat, a)?;
    let vertices = if p.directed {
        if p.complexes != cones {
            return Err(Error::Invalid("directed envelope must list the vertex cones in order".into()));
        }
        (0..cones.len()).collect()
    } else {
        cones.iter().map(|t| p.require(t)).collect::<Result<Vec<_>>>()?
    };
    let mut shape = a.source.f.shape.clone();
    shape.source = vertices.clone();
    shape.target = vertices;
    let mut h = shape.zero();
    let field = cat.field();
    for s in shape.mask.subsets(a.n()) {
        let k = card(s) as i32 - 1;
        let (i0, ik) = (ainfty::min_elem(s), ainfty::max_elem(s));
        let (src, tgt) = (&cones[i0], &cones[ik]);
        let mut m = TcMorphism::zero(cat, src, tgt, 1 - k);
        if let Some(c) = a.target.f.get(s) {
            m.blocks[0][0] = c.clone();
        }
        if let Some(c) = a.a.get(s) {
            m.blocks[0][1] = linalg::scale(&field.sign(k % 2 == 1), c);
        }
        if let Some(c) = a.source.f.get(s) {
            m.blocks[1][1] = linalg::scale(&field.sign(k % 2 == 0), c);
        }
        h.set_coords(s, HomLayout::new(cat, src, tgt).flatten(&m));
    }
    Ok(McObject { f: h })
}

/// Solve `d_{A∞}(b) = 1` for a degree −1 endomorphism of an object of
/// `F_n` or of the matching object. The equation at `I` involves `b_I` only
/// through `d b_I`, so it is solved subset by subset in order of size. Once
/// every vertex is contractible its hom complexes are acyclic and each
/// closed right-hand side is exact, so this finds a contraction whenever
/// one exists.
pub fn fn_contraction(cat: &DgCategory, obj: &Arc<McObject>) -> Result<Option<Transformation>> {
    let id = ainfty::identity_transformation(cat, obj);
    let shape = transformation_shape(obj, obj, -1);
    let mut b = shape.zero();
    for s in shape.mask.subsets(obj.n()) {
        let (x, y, k) = shape.component_hom(s);
        let known = ainfty::dinf_at(cat, &obj.f, &obj.f, &b, s);
        let rhs = id.a.morphism(cat, s).minus(&known);
        if cat.dim(x, y, k) == 0 {
            if !rhs.is_zero() {
                return Ok(None);
            }
            continue;
        }
        let sys = linalg::AffineSystem::new(cat.hom(x, y).d(k), rhs.coords);
        let Some(v) = linalg::solve_affine(&sys)? else {
            return Ok(None);
        };
        b.set_coords(s, v);
    }
    let b = id.with_family(b);
    if dinf(cat, &b).a != id.a {
        return Err(Error::Invalid("contraction failed its re-check".into()));
    }
    Ok(Some(b))
}

/// `[±(Δb)_top∘b₀, ±(b∘f)_top∘b₀, ±(f∘b)_top∘b₀]` with Koszul signs, and
/// `Θ = (Δb + b∘f + f∘b)_top`.
fn contraction_parts(cat: &DgCategory, full_obj: &McObject, b: &Transformation) -> Result<(Vec<Morphism>, Morphism)> {
    let s = full(full_obj.n());
    let f = &full_obj.f;
    let terms = [delta_at(cat, &b.a, s), circ_at(cat, &b.a, f, s, false), circ_at(cat, f, &b.a, s, false)];
    let b0 = b.component(cat, singleton(0));
    let mut parts = Vec::with_capacity(3);
    for t in &terms {
        let koszul = cat.field().sign(t.degree.rem_euclid(2) == 1);
        parts.push(cat.compose(t, &b0)?.scaled(&koszul));
    }
    Ok((parts, ainfty::dinf_at(cat, f, f, &b.a, s)))
}

/// Extend a contraction `b` of the truncation of `full` to a contraction of
/// `full` by `b_top = ±(Δb + b∘f + f∘b)_top ∘ b₀`.
pub fn contraction_lift(cat: &DgCategory, full_obj: &Arc<McObject>, b: &Transformation, scheme: &SignScheme) -> Result<Transformation> {
    if full_obj.is_truncated() || *b.source != reedy::truncate_object(full_obj) || b.source != b.target {
        return Err(Error::Shape("contraction must be of the truncation of the object".into()));
    }
    let id = ainfty::identity_transformation(cat, &b.source);
    if b.degree() != -1 || dinf(cat, b).a != id.a {
        return Err(Error::Invalid("input is not a contraction".into()));
    }
    let s = full(full_obj.n());
    let (parts, _) = contraction_parts(cat, full_obj, b)?;
    let top = reedy::signed_sum(cat, &parts, &scheme.contraction);
    let mut fam = transformation_shape(full_obj, full_obj, -1).zero();
    for (t, c) in b.a.components() {
        fam.set_coords(t, c.clone());
    }
    fam.set(s, top)?;
    let lifted = Transformation { source: full_obj.clone(), target: full_obj.clone(), a: fam };
    if dinf(cat, &lifted).a != ainfty::identity_transformation(cat, full_obj).a {
        return Err(Error::Calibration { stage: "contraction_lift".into(), detail: "d_A∞ of the lifted contraction is not 1".into() });
    }
    Ok(lifted)
}

/// The cone of a closed lift in `F_n(Pretr A)` together with a contraction
/// of its truncation, if one exists.
pub struct ConeCase {
    pub pretr: Pretr,
    pub cone: Arc<McObject>,
    pub contraction: Option<Transformation>,
}

pub fn prepare_cone(cat: &DgCategory, lifted: &Transformation) -> Result<ConeCase> {
    if lifted.is_truncated() || lifted.degree() != 0 || !dinf(cat, lifted).a.is_zero() {
        return Err(Error::NotClosed("expected a closed degree-0 transformation at full level".into()));
    }
    let envelope = Pretr::with_embedding(cat, &[])?;
    let embedded = envelope.embed_transformation(cat, lifted)?;
    if !dinf(&envelope.category, &embedded).a.is_zero() {
        return Err(Error::Invalid("embedding does not preserve closedness".into()));
    }
    let pretr = Pretr::directed(cat, &vertex_cones(cat, lifted)?)?;
    let cone = Arc::new(cone_object(cat, &pretr, lifted)?);
    if !ainfty::mc_defect(&pretr.category, &cone).is_zero() {
        return Err(Error::Invalid("cone fails Maurer–Cartan".into()));
    }
    let trunc = Arc::new(reedy::truncate_object(&cone));
    // perturb by an exact term so that every part of the lift formula is exercised
    let contraction = fn_contraction(&pretr.category, &trunc)?.map(|b| {
        let mut r = gen::rng(0, 8);
        let u = gen::random_family(&pretr.category, &b.a.shape.with_degree(-2), &mut r);
        let du = dinf_family(&pretr.category, &trunc.f, &trunc.f, &u);
        b.with_family(b.a.plus(&du))
    });
    Ok(ConeCase { pretr, cone, contraction })
}

impl ConeCase {
    /// The top identity `d b_top + Θ = 0` as a linear condition on the
    /// contraction signs; `None` without a contraction.
    pub(crate) fn signed_identity(&self) -> Result<(&Pretr, Option<reedy::SignedIdentity>)> {
        let Some(b) = &self.contraction else {
            return Ok((&self.pretr, None));
        };
        let cat = &self.pretr.category;
        let (parts, theta) = contraction_parts(cat, &self.cone, b)?;
        let dparts: Vec<Morphism> = parts.iter().map(|p| cat.diff(p)).collect();
        Ok((&self.pretr, Some(reedy::SignedIdentity::new(&theta, &dparts))))
    }

    /// Lift the contraction of the truncated cone; `None` if there is none.
    pub fn lift(&self, scheme: &SignScheme) -> Result<Option<Transformation>> {
        match &self.contraction {
            None => Ok(None),
            Some(b) => contraction_lift(&self.pretr.category, &self.cone, b, scheme).map(Some),
        }
    }
}

/// Decide whether a closed lift is a homotopy equivalence by contracting
/// its cone in `F_n(Pretr A)`: the truncated cone is contracted and the
/// contraction lifted to full level.
pub fn appendix_hoequiv_check(cat: &DgCategory, lifted: &Transformation, scheme: &SignScheme) -> Result<bool> {
    Ok(prepare_cone(cat, lifted)?.lift(scheme)?.is_some())
}

/// Every battery cone admits a contraction and lifting it succeeds under `scheme`.
pub fn contraction_battery_passes(cases: &[ConeCase], scheme: &SignScheme) -> bool {
    cases.iter().all(|c| matches!(c.lift(scheme), Ok(Some(_))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::{is_homotopy_equivalence, validate_category};
    use crate::linalg::Field;

    fn cat(seed: u64) -> DgCategory {
        gen::random_endo_category(Field::Rational, seed)
    }

    #[test]
    fn d_tc_squares_to_zero_and_is_a_derivation() {
        for seed in 0..30 {
            let c = cat(seed / 3);
            let mut r = gen::rng(seed, 1);
            let s = gen::random_twisted_complex(&c, &mut r).unwrap();
            let t = gen::random_twisted_complex(&c, &mut r).unwrap();
            let u = gen::random_twisted_complex(&c, &mut r).unwrap();
            for x in [&s, &t, &u] {
                assert!(validate_twisted(&c, x).unwrap().passed());
            }
            let (k, l) = (seed as i32 % 3 - 1, seed as i32 % 2);
            let f = gen::random_tc_morphism(&c, &s, &t, k, &mut r);
            let g = gen::random_tc_morphism(&c, &t, &u, l, &mut r);
            assert!(d_tc(&c, &d_tc(&c, &f).unwrap()).unwrap().is_zero(), "seed {seed}");
            let lhs = d_tc(&c, &compose_tc(&c, &g, &f).unwrap()).unwrap();
            let mut rhs = compose_tc(&c, &d_tc(&c, &g).unwrap(), &f).unwrap();
            rhs.add_scaled(&c.field().sign(l % 2 == 1), &compose_tc(&c, &g, &d_tc(&c, &f).unwrap()).unwrap());
            assert_eq!(lhs, rhs, "seed {seed}");
        }
    }

    #[test]
    fn envelope_homs_carry_d_tc_and_matrix_composition() {
        for seed in 0..6 {
            let c = cat(seed);
            let mut r = gen::rng(seed, 2);
            let s = gen::random_twisted_complex(&c, &mut r).unwrap();
            let t = gen::random_twisted_complex(&c, &mut r).unwrap();
            let p = Pretr::new(&c, &[s.clone(), t.clone()]).unwrap();
            let pc = &p.category;
            for x in 0..pc.num_objects() {
                for y in 0..pc.num_objects() {
                    assert!(pc.hom(x, y).d_squared_failures().is_empty());
                }
            }
            for k in -1..=1 {
                let f = gen::random_tc_morphism(&c, &s, &t, k, &mut r);
                let g = gen::random_tc_morphism(&c, &t, &s, -k, &mut r);
                let h = gen::random_tc_morphism(&c, &s, &t, 1, &mut r);
                let (pf, pg, ph) = (p.morphism(&c, &f).unwrap(), p.morphism(&c, &g).unwrap(), p.morphism(&c, &h).unwrap());
                assert_eq!(p.tc_morphism(&c, &pf), f);
                assert_eq!(pc.diff(&pf), p.morphism(&c, &d_tc(&c, &f).unwrap()).unwrap());
                let gf = pc.compose(&pg, &pf).unwrap();
                assert_eq!(gf, p.morphism(&c, &compose_tc(&c, &g, &f).unwrap()).unwrap());
                let leibniz = pc.compose(&pc.diff(&pg), &pf).unwrap().plus(
                    &pc.compose(&pg, &pc.diff(&pf)).unwrap().scaled(&c.field().sign(k % 2 != 0)),
                );
                assert_eq!(pc.diff(&gf), leibniz);
                let (x, y) = (pf.source, pf.target);
                assert_eq!(pc.compose(&pc.identity(y), &pf).unwrap(), pf);
                assert_eq!(pc.compose(&pf, &pc.identity(x)).unwrap(), pf);
                assert_eq!(
                    pc.compose(&ph, &gf).unwrap(),
                    pc.compose(&pc.compose(&ph, &pg).unwrap(), &pf).unwrap()
                );
            }
        }
    }

    #[test]
    fn embedding_is_fully_faithful_on_single_entries() {
        let c = cat(4);
        let p = Pretr::with_embedding(&c, &[]).unwrap();
        assert!(validate_category(&p.category).passed());
        let mut r = gen::rng(4, 3);
        for x in 0..c.num_objects() {
            let ex = p.embed_object(&c, x).unwrap();
            assert_eq!(p.category.identity(ex), p.embed_morphism(&c, &c.identity(x)).unwrap());
            for y in 0..c.num_objects() {
                let ey = p.embed_object(&c, y).unwrap();
                assert_eq!(p.category.hom(ex, ey).space(), c.hom(x, y).space());
                let f = gen::random_morphism(&c, x, y, 0, &mut r);
                let g = gen::random_morphism(&c, y, x, 1, &mut r);
                let ef = p.embed_morphism(&c, &f).unwrap();
                assert_eq!(p.category.diff(&ef), p.embed_morphism(&c, &c.diff(&f)).unwrap());
                assert_eq!(
                    p.category.compose(&p.embed_morphism(&c, &g).unwrap(), &ef).unwrap(),
                    p.embed_morphism(&c, &c.compose(&g, &f).unwrap()).unwrap()
                );
            }
        }
        let x = Arc::new(gen::generate_mc_object(&c, 2, 4).unwrap());
        let ex = p.embed_mc(&c, &x).unwrap();
        assert!(ainfty::validate_mc_object(&p.category, &ex).passed());
        assert_eq!(p.embed_mc(&c, &reedy::truncate_object(&x)).unwrap(), reedy::truncate_object(&ex));
    }

    #[test]
    fn cone_is_contractible_exactly_for_equivalences() {
        for seed in 0..10 {
            let c = cat(seed);
            let mut r = gen::rng(seed, 4);
            for x in 0..3 {
                assert!(find_contraction(&c, &cone(&c, &c.identity(x)).unwrap()).unwrap().is_some());
                let zero = c.zero(x, x, 0);
                let acyclic = c.hom(x, x).cohomology_dims().values().all(|&v| v == 0);
                assert_eq!(find_contraction(&c, &cone(&c, &zero).unwrap()).unwrap().is_some(), acyclic);
                for y in 0..3 {
                    let f = gen::random_closed(&c, x, y, 0, &mut r);
                    let contractible = find_contraction(&c, &cone(&c, &f).unwrap()).unwrap();
                    assert_eq!(contractible.is_some(), is_homotopy_equivalence(&c, &f).unwrap().is_some());
                }
            }
        }
    }

    #[test]
    fn cones_of_twisted_maps_are_twisted_complexes() {
        for seed in 0..12 {
            let c = cat(seed);
            let mut r = gen::rng(seed, 5);
            let s = gen::random_twisted_complex(&c, &mut r).unwrap();
            let t = gen::random_twisted_complex(&c, &mut r).unwrap();
            let f = d_tc(&c, &gen::random_tc_morphism(&c, &s, &t, -1, &mut r)).unwrap();
            let k = cone_tc(&c, &f).unwrap();
            assert_eq!(k.len(), s.len() + t.len());
            assert!(validate_twisted(&c, &k).unwrap().passed());
            let open = gen::random_tc_morphism(&c, &s, &t, 0, &mut r);
            if !d_tc(&c, &open).unwrap().is_zero() {
                assert!(cone_tc(&c, &open).is_err());
            }
        }
    }

    #[test]
    fn appendix_route_agrees_on_lifts_and_planted_failures() {
        for seed in 0..4 {
            let c = cat(seed);
            let n = 1 + seed as usize % 2;
            let inst = reedy::generate_instance(&c, n, seed).unwrap();
            let (_, lift) = reedy::lift_instance(&c, &inst, &SignScheme::REFERENCE).unwrap();
            let case = prepare_cone(&c, &lift).unwrap();
            let b = case.lift(&SignScheme::REFERENCE).unwrap().expect("contraction");
            let id = ainfty::identity_transformation(&case.pretr.category, &case.cone);
            assert_eq!(dinf(&case.pretr.category, &b).a, id.a);

            let x = inst.source.clone();
            let zero = ainfty::identity_transformation(&c, &x);
            let zero = zero.with_family(zero.a.shape.zero());
            let acyclic = c.hom(x.objects()[0], x.objects()[0]).cohomology_dims().values().all(|&v| v == 0);
            assert_eq!(appendix_hoequiv_check(&c, &zero, &SignScheme::REFERENCE).unwrap(), acyclic);
            assert_eq!(ainfty::is_hoequiv_fn(&c, &zero).unwrap().is_some(), acyclic);
        }
    }
}
