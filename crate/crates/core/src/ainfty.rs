//! Subset-indexed families over `{0,…,n}` and the A∞ operations on them.
//!
//! A subset is a bitmask; bit `i` set means `i ∈ I`. A component at `I` with
//! `|I| = k+1` has degree `m − k` where `m` is the family degree.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dg::{self, DgCategory, Morphism, ObjectId};
use crate::error::{Error, Result};
use crate::linalg::{Scalar, SystemBuilder};

pub type Subset = u32;

pub fn card(s: Subset) -> u32 {
    s.count_ones()
}

pub fn full(n: usize) -> Subset {
    ((1u64 << (n + 1)) - 1) as Subset
}

pub fn singleton(i: usize) -> Subset {
    1 << i
}

pub fn elements(s: Subset) -> Vec<usize> {
    (0..32).filter(|i| s & (1 << i) != 0).collect()
}

pub fn from_elements(e: &[usize]) -> Subset {
    e.iter().fold(0, |acc, &i| acc | (1 << i))
}

pub fn min_elem(s: Subset) -> usize {
    s.trailing_zeros() as usize
}

pub fn max_elem(s: Subset) -> usize {
    31 - s.leading_zeros() as usize
}

/// `"0,2,3"`.
pub fn subset_key(s: Subset) -> String {
    elements(s).iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_subset_key(key: &str, n: usize) -> Option<Subset> {
    let mut prev: Option<usize> = None;
    let mut s = 0;
    for part in key.split(',') {
        let i: usize = part.trim().parse().ok()?;
        if i > n || prev.is_some_and(|p| p >= i) {
            return None;
        }
        prev = Some(i);
        s |= 1 << i;
    }
    Some(s)
}

/// Which subsets carry components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    pub min_card: u32,
    pub include_top: bool,
}

impl Mask {
    pub const TRANSFORMATION: Mask = Mask { min_card: 1, include_top: true };
    pub const MC: Mask = Mask { min_card: 2, include_top: true };

    pub fn truncated(self) -> Mask {
        Mask { include_top: false, ..self }
    }

    pub fn admits(&self, n: usize, s: Subset) -> bool {
        s != 0 && s & !full(n) == 0 && card(s) >= self.min_card && (self.include_top || s != full(n))
    }

    /// Admissible subsets ordered by cardinality, then lexicographically.
    pub fn subsets(&self, n: usize) -> Vec<Subset> {
        let mut v: Vec<Subset> = (1..=full(n)).filter(|&s| self.admits(n, s)).collect();
        v.sort_by_key(|&s| (card(s), elements(s)));
        v
    }
}

/// Everything about a family except its components.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FamilyShape {
    pub n: usize,
    pub degree: i32,
    pub source: Vec<ObjectId>,
    pub target: Vec<ObjectId>,
    pub mask: Mask,
}

impl FamilyShape {
    pub fn admits(&self, s: Subset) -> bool {
        self.mask.admits(self.n, s)
    }

    pub fn component_degree(&self, s: Subset) -> i32 {
        self.degree - (card(s) as i32 - 1)
    }

    /// `(X_{min I}, Y_{max I}, degree)`.
    pub fn component_hom(&self, s: Subset) -> (ObjectId, ObjectId, i32) {
        (self.source[min_elem(s)], self.target[max_elem(s)], self.component_degree(s))
    }

    pub fn with_degree(&self, degree: i32) -> FamilyShape {
        FamilyShape { degree, ..self.clone() }
    }

    pub fn with_mask(&self, mask: Mask) -> FamilyShape {
        FamilyShape { mask, ..self.clone() }
    }

    pub fn dim(&self, cat: &DgCategory) -> usize {
        self.blocks(cat).iter().map(|b| b.2).sum()
    }

    /// `(subset, offset, len)` for the flat coordinate layout.
    pub fn blocks(&self, cat: &DgCategory) -> Vec<(Subset, usize, usize)> {
        let mut off = 0;
        let mut out = Vec::new();
        for s in self.mask.subsets(self.n) {
            let (x, y, k) = self.component_hom(s);
            let len = cat.dim(x, y, k);
            out.push((s, off, len));
            off += len;
        }
        out
    }

    pub fn zero(&self) -> SubsetFamily {
        SubsetFamily { shape: self.clone(), components: BTreeMap::new() }
    }

    pub fn basis(&self, cat: &DgCategory, j: usize) -> SubsetFamily {
        let mut out = self.zero();
        for (s, off, len) in self.blocks(cat) {
            if j >= off && j < off + len {
                let (x, y, k) = self.component_hom(s);
                out.components.insert(s, cat.basis(x, y, k, j - off).coords);
                break;
            }
        }
        out
    }

    pub fn from_coords(&self, cat: &DgCategory, coords: &[Scalar]) -> SubsetFamily {
        let mut out = self.zero();
        for (s, off, len) in self.blocks(cat) {
            let c = coords[off..off + len].to_vec();
            if !crate::linalg::is_zero_vec(&c) {
                out.components.insert(s, c);
            }
        }
        out
    }
}

/// A sparse family `{φ_I}`; absent components are zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsetFamily {
    pub shape: FamilyShape,
    components: BTreeMap<Subset, Vec<Scalar>>,
}

impl SubsetFamily {
    pub fn n(&self) -> usize {
        self.shape.n
    }

    pub fn degree(&self) -> i32 {
        self.shape.degree
    }

    pub fn mask(&self) -> Mask {
        self.shape.mask
    }

    pub fn get(&self, s: Subset) -> Option<&Vec<Scalar>> {
        self.components.get(&s)
    }

    pub fn components(&self) -> impl Iterator<Item = (Subset, &Vec<Scalar>)> + '_ {
        self.components.iter().map(|(s, v)| (*s, v))
    }

    /// The component at `s` as a morphism (zero when absent).
    pub fn morphism(&self, cat: &DgCategory, s: Subset) -> Morphism {
        let (x, y, k) = self.shape.component_hom(s);
        match self.components.get(&s) {
            Some(c) => Morphism { source: x, target: y, degree: k, coords: c.clone() },
            None => cat.zero(x, y, k),
        }
    }

    fn morphism_opt(&self, s: Subset) -> Option<Morphism> {
        let c = self.components.get(&s)?;
        let (x, y, k) = self.shape.component_hom(s);
        Some(Morphism { source: x, target: y, degree: k, coords: c.clone() })
    }

    pub fn set(&mut self, s: Subset, m: Morphism) -> Result<()> {
        if !self.shape.admits(s) {
            return Err(Error::Shape(format!("subset {{{}}} is not admissible", subset_key(s))));
        }
        let (x, y, k) = self.shape.component_hom(s);
        if (m.source, m.target, m.degree) != (x, y, k) {
            return Err(Error::Shape(format!(
                "component {{{}}} must lie in hom({x},{y})^{k}, got hom({},{})^{}",
                subset_key(s),
                m.source,
                m.target,
                m.degree
            )));
        }
        self.set_coords(s, m.coords);
        Ok(())
    }

    pub(crate) fn set_coords(&mut self, s: Subset, coords: Vec<Scalar>) {
        if crate::linalg::is_zero_vec(&coords) {
            self.components.remove(&s);
        } else {
            self.components.insert(s, coords);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn add_scaled(&mut self, c: &Scalar, other: &SubsetFamily) {
        assert_eq!(
            (self.shape.n, self.shape.degree, &self.shape.source, &self.shape.target),
            (other.shape.n, other.shape.degree, &other.shape.source, &other.shape.target),
            "adding families of different shapes"
        );
        for (s, v) in &other.components {
            if !self.shape.admits(*s) {
                continue;
            }
            let mut cur = match self.components.remove(s) {
                Some(c) => c,
                None => vec![c.field().zero(); v.len()],
            };
            crate::linalg::axpy(&mut cur, c, v);
            self.set_coords(*s, cur);
        }
    }

    pub fn plus(&self, other: &SubsetFamily) -> SubsetFamily {
        let mut out = self.clone();
        if let Some(one) = other.field_one() {
            out.add_scaled(&one, other);
        }
        out
    }

    pub fn minus(&self, other: &SubsetFamily) -> SubsetFamily {
        let mut out = self.clone();
        if let Some(one) = other.field_one() {
            out.add_scaled(&-one, other);
        }
        out
    }

    pub fn scaled(&self, c: &Scalar) -> SubsetFamily {
        let mut out = self.shape.zero();
        for (s, v) in &self.components {
            out.set_coords(*s, crate::linalg::scale(c, v));
        }
        out
    }

    pub fn negated(&self) -> SubsetFamily {
        let mut out = self.clone();
        for v in out.components.values_mut() {
            for x in v.iter_mut() {
                *x = -&*x;
            }
        }
        out
    }

    fn field_one(&self) -> Option<Scalar> {
        self.components.values().flat_map(|v| v.first()).next().map(|s| s.field().one())
    }

    /// Keep only components admitted by `mask`.
    pub fn restrict(&self, mask: Mask) -> SubsetFamily {
        let shape = self.shape.with_mask(mask);
        let components = self.components.iter().filter(|(s, _)| shape.admits(**s)).map(|(s, v)| (*s, v.clone())).collect();
        SubsetFamily { shape, components }
    }

    pub fn to_coords(&self, cat: &DgCategory) -> Vec<Scalar> {
        let mut out = Vec::new();
        for (s, _, len) in self.shape.blocks(cat) {
            match self.components.get(&s) {
                Some(c) => out.extend(c.iter().cloned()),
                None => out.extend(cat.field().zeros(len)),
            }
        }
        out
    }

    /// Check every stored component has the right length.
    pub fn check(&self, cat: &DgCategory) -> Result<()> {
        let sh = &self.shape;
        if sh.source.len() != sh.n + 1 || sh.target.len() != sh.n + 1 {
            return Err(Error::Shape(format!("object tuples must have length {}", sh.n + 1)));
        }
        for &x in sh.source.iter().chain(&sh.target) {
            if x >= cat.num_objects() {
                return Err(Error::Shape(format!("unknown object id {x}")));
            }
        }
        for (s, v) in &self.components {
            if !sh.admits(*s) {
                return Err(Error::Shape(format!("component at inadmissible subset {{{}}}", subset_key(*s))));
            }
            let (x, y, k) = sh.component_hom(*s);
            if v.len() != cat.dim(x, y, k) {
                return Err(Error::Shape(format!(
                    "component {{{}}} has {} coordinates, expected {}",
                    subset_key(*s),
                    v.len(),
                    cat.dim(x, y, k)
                )));
            }
        }
        Ok(())
    }
}

fn sign(cat: &DgCategory, negative: bool) -> Scalar {
    cat.field().sign(negative)
}

/// `(dφ)_I = d(φ_I)`.
pub fn d_at(cat: &DgCategory, phi: &SubsetFamily, s: Subset) -> Option<Morphism> {
    phi.morphism_opt(s).map(|m| cat.diff(&m))
}

/// `(Δφ)_I = (−1)^{|φ|} Σ_{0<t<k} (−1)^{k−t} φ_{I∖i_t}`, evaluated at any `I`.
pub fn delta_at(cat: &DgCategory, phi: &SubsetFamily, s: Subset) -> Morphism {
    let sh = &phi.shape;
    let (x, y) = (sh.source[min_elem(s)], sh.target[max_elem(s)]);
    let k = card(s) as usize - 1;
    let mut out = cat.zero(x, y, phi.degree() + 1 - k as i32);
    let e = elements(s);
    for (t, &i) in e.iter().enumerate().take(k).skip(1) {
        if let Some(c) = phi.get(s & !(1 << i)) {
            let neg = (phi.degree().rem_euclid(2) as usize + k - t) % 2 == 1;
            crate::linalg::axpy(&mut out.coords, &sign(cat, neg), c);
        }
    }
    out
}

/// `(φ∘ψ)_I = Σ_s (−1)^{|ψ|(k−s)} φ_{i_s…i_k} ∘ ψ_{i_0…i_s}`, evaluated at any `I`.
/// With `exclude_top`, the term `φ_{0…n} ∘ ψ_0` is dropped.
pub fn circ_at(cat: &DgCategory, phi: &SubsetFamily, psi: &SubsetFamily, s: Subset, exclude_top: bool) -> Morphism {
    let x = psi.shape.source[min_elem(s)];
    let y = phi.shape.target[max_elem(s)];
    let k = card(s) as i32 - 1;
    let mut out = cat.zero(x, y, phi.degree() + psi.degree() - k);
    let e = elements(s);
    for (idx, &i) in e.iter().enumerate() {
        let upper = s & !((1 << i) - 1);
        let lower = s & ((1u64 << (i + 1)) - 1) as Subset;
        if exclude_top && idx == 0 && s == full(phi.n()) {
            continue;
        }
        let (Some(a), Some(b)) = (phi.morphism_opt(upper), psi.morphism_opt(lower)) else {
            continue;
        };
        let t = cat.compose_unchecked(&a, &b);
        let neg = psi.degree().rem_euclid(2) == 1 && (k as usize - idx) % 2 == 1;
        crate::linalg::axpy(&mut out.coords, &sign(cat, neg), &t.coords);
    }
    out
}

fn collect(shape: FamilyShape, mut f: impl FnMut(Subset) -> Morphism) -> SubsetFamily {
    let mut out = shape.zero();
    for s in shape.mask.subsets(shape.n) {
        out.set_coords(s, f(s).coords);
    }
    out
}

pub fn d(cat: &DgCategory, phi: &SubsetFamily) -> SubsetFamily {
    let mut out = phi.shape.with_degree(phi.degree() + 1).zero();
    for (s, _) in phi.components() {
        if let Some(m) = d_at(cat, phi, s) {
            out.set_coords(s, m.coords);
        }
    }
    out
}

pub fn delta(cat: &DgCategory, phi: &SubsetFamily) -> SubsetFamily {
    collect(phi.shape.with_degree(phi.degree() + 1), |s| delta_at(cat, phi, s))
}

/// The convolution `φ∘ψ` (or `∘′` with `exclude_top`). The output mask
/// admits every subset either factor's mask would.
pub fn circ(cat: &DgCategory, phi: &SubsetFamily, psi: &SubsetFamily, exclude_top: bool) -> Result<SubsetFamily> {
    if phi.n() != psi.n() {
        return Err(Error::Shape(format!("levels differ: {} vs {}", phi.n(), psi.n())));
    }
    if phi.shape.source != psi.shape.target {
        return Err(Error::Shape("target objects of the right factor differ from source objects of the left".into()));
    }
    let mask = Mask {
        min_card: phi.mask().min_card.min(psi.mask().min_card),
        include_top: phi.mask().include_top && psi.mask().include_top,
    };
    let shape = FamilyShape {
        n: phi.n(),
        degree: phi.degree() + psi.degree(),
        source: psi.shape.source.clone(),
        target: phi.shape.target.clone(),
        mask,
    };
    Ok(collect(shape, |s| circ_at(cat, phi, psi, s, exclude_top)))
}

/// An A∞ functor `k[n] → A`: objects plus a degree-1 family with
/// min cardinality 2. Truncated objects lack the top component.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct McObject {
    pub f: SubsetFamily,
}

impl McObject {
    pub fn new(cat: &DgCategory, f: SubsetFamily) -> Result<McObject> {
        f.check(cat)?;
        let sh = &f.shape;
        if sh.degree != 1 || sh.mask.min_card != 2 || sh.source != sh.target {
            return Err(Error::Shape("an MC family has degree 1, min cardinality 2 and equal object tuples".into()));
        }
        Ok(McObject { f })
    }

    pub fn n(&self) -> usize {
        self.f.n()
    }

    pub fn objects(&self) -> &[ObjectId] {
        &self.f.shape.source
    }

    pub fn is_truncated(&self) -> bool {
        !self.f.mask().include_top
    }

    pub fn edge(&self, cat: &DgCategory, i: usize, j: usize) -> Morphism {
        self.f.morphism(cat, singleton(i) | singleton(j))
    }
}

/// `d f + Δf + f∘f` over the object's admissible subsets.
pub fn mc_defect(cat: &DgCategory, obj: &McObject) -> SubsetFamily {
    let f = &obj.f;
    collect(f.shape.with_degree(2), |s| {
        let mut m = delta_at(cat, f, s).plus(&circ_at(cat, f, f, s, false));
        if let Some(df) = d_at(cat, f, s) {
            m = m.plus(&df);
        }
        m
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct McReport {
    pub defect_subsets: Vec<String>,
    pub failed_edges: Vec<(usize, usize)>,
}

impl McReport {
    pub fn passed(&self) -> bool {
        self.defect_subsets.is_empty() && self.failed_edges.is_empty()
    }
}

pub fn validate_mc_object(cat: &DgCategory, obj: &McObject) -> McReport {
    let defect = mc_defect(cat, obj);
    let mut report = McReport {
        defect_subsets: defect.components().map(|(s, _)| subset_key(s)).collect(),
        failed_edges: Vec::new(),
    };
    for i in 0..=obj.n() {
        for j in i + 1..=obj.n() {
            let e = obj.edge(cat, i, j);
            let ok = cat.is_closed(&e) && matches!(dg::is_homotopy_equivalence(cat, &e), Ok(Some(_)));
            if !ok && !(obj.is_truncated() && i == 0 && j == obj.n() && obj.n() == 1) {
                report.failed_edges.push((i, j));
            }
        }
    }
    report
}

/// A morphism `a: (X,f) → (Y,g)` of F_n or of the matching object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transformation {
    pub source: Arc<McObject>,
    pub target: Arc<McObject>,
    pub a: SubsetFamily,
}

impl Transformation {
    pub fn new(cat: &DgCategory, source: Arc<McObject>, target: Arc<McObject>, a: SubsetFamily) -> Result<Transformation> {
        a.check(cat)?;
        if source.n() != a.n() || target.n() != a.n() {
            return Err(Error::Shape("endpoint levels differ from the family level".into()));
        }
        if a.shape.source != source.objects() || a.shape.target != target.objects() {
            return Err(Error::Shape("family object tuples differ from the endpoints".into()));
        }
        if a.mask().min_card != 1 {
            return Err(Error::Shape("a transformation has min cardinality 1".into()));
        }
        let trunc = !a.mask().include_top;
        if source.is_truncated() != trunc || target.is_truncated() != trunc {
            return Err(Error::Shape("truncation flags of the family and endpoints differ".into()));
        }
        Ok(Transformation { source, target, a })
    }

    pub fn degree(&self) -> i32 {
        self.a.degree()
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn is_truncated(&self) -> bool {
        !self.a.mask().include_top
    }

    pub fn component(&self, cat: &DgCategory, s: Subset) -> Morphism {
        self.a.morphism(cat, s)
    }

    pub fn with_family(&self, a: SubsetFamily) -> Transformation {
        Transformation { source: self.source.clone(), target: self.target.clone(), a }
    }
}

pub fn transformation_shape(source: &McObject, target: &McObject, degree: i32) -> FamilyShape {
    let mask = if source.is_truncated() { Mask::TRANSFORMATION.truncated() } else { Mask::TRANSFORMATION };
    FamilyShape {
        n: source.n(),
        degree,
        source: source.objects().to_vec(),
        target: target.objects().to_vec(),
        mask,
    }
}

/// `(d_{A∞} a)_I = d a_I + (Δa)_I + (g∘a)_I − (−1)^{|a|} (a∘f)_I`.
pub fn dinf_at(cat: &DgCategory, f: &SubsetFamily, g: &SubsetFamily, a: &SubsetFamily, s: Subset) -> Morphism {
    let mut m = delta_at(cat, a, s).plus(&circ_at(cat, g, a, s, false));
    let af = circ_at(cat, a, f, s, false);
    m.add_scaled(&sign(cat, a.degree().rem_euclid(2) == 0), &af);
    if let Some(da) = d_at(cat, a, s) {
        m = m.plus(&da);
    }
    m
}

pub fn dinf_family(cat: &DgCategory, f: &SubsetFamily, g: &SubsetFamily, a: &SubsetFamily) -> SubsetFamily {
    collect(a.shape.with_degree(a.degree() + 1), |s| dinf_at(cat, f, g, a, s))
}

pub fn dinf(cat: &DgCategory, a: &Transformation) -> Transformation {
    a.with_family(dinf_family(cat, &a.source.f, &a.target.f, &a.a))
}

/// `b ∘ a` as the convolution.
pub fn compose_transformations(cat: &DgCategory, b: &Transformation, a: &Transformation) -> Result<Transformation> {
    if a.target.as_ref() != b.source.as_ref() {
        return Err(Error::Shape("composition endpoints differ".into()));
    }
    let c = circ(cat, &b.a, &a.a, false)?;
    Ok(Transformation { source: a.source.clone(), target: b.target.clone(), a: c })
}

pub fn identity_transformation(cat: &DgCategory, obj: &Arc<McObject>) -> Transformation {
    let mut a = transformation_shape(obj, obj, 0).zero();
    for (i, &x) in obj.objects().iter().enumerate() {
        a.set_coords(singleton(i), cat.identity(x).coords);
    }
    Transformation { source: obj.clone(), target: obj.clone(), a }
}

pub fn fn_hom_dims(cat: &DgCategory, source: &McObject, target: &McObject, degree: i32) -> usize {
    transformation_shape(source, target, degree).dim(cat)
}

/// Transport `(X,f)` along singleton maps `a_i: X_i → Y_i`: solves level by
/// level for a family `g` on the `Y_i` and components `a_I = r_I + δ_I` with
/// `g` Maurer–Cartan and `d_{A∞}(a) = 0`. `offsets` supplies the `r_I`.
/// Returns `None` when some level is inconsistent.
pub fn transport(
    cat: &DgCategory,
    source: &Arc<McObject>,
    targets: &[ObjectId],
    singletons: &[Morphism],
    mut offsets: impl FnMut(&FamilyShape, Subset) -> Option<Morphism>,
) -> Result<Option<Transformation>> {
    let n = source.n();
    if targets.len() != n + 1 || singletons.len() != n + 1 {
        return Err(Error::Shape(format!("need {} targets and singleton maps", n + 1)));
    }
    let f = &source.f;
    let mc_mask = if source.is_truncated() { Mask::MC.truncated() } else { Mask::MC };
    let mut g = FamilyShape { n, degree: 1, source: targets.to_vec(), target: targets.to_vec(), mask: mc_mask }.zero();
    let ashape = FamilyShape {
        n,
        degree: 0,
        source: source.objects().to_vec(),
        target: targets.to_vec(),
        mask: Mask { min_card: 1, include_top: mc_mask.include_top },
    };
    let mut a = ashape.zero();
    for (i, m) in singletons.iter().enumerate() {
        if (m.source, m.target, m.degree) != (source.objects()[i], targets[i], 0) {
            return Err(Error::Shape(format!("singleton map {i} has the wrong hom space")));
        }
        a.set_coords(singleton(i), m.coords.clone());
    }
    let field = cat.field();
    for s in mc_mask.subsets(n) {
        let (y0, yk, gk) = g.shape.component_hom(s);
        let (x0, _, ak) = ashape.component_hom(s);
        let a0 = a.morphism(cat, singleton(min_elem(s)));
        if let Some(r) = offsets(&ashape, s) {
            a.set_coords(s, r.coords);
        }
        // MC: d g_I = −(Δg + g∘g)_I
        let mc_rhs = delta_at(cat, &g, s).plus(&circ_at(cat, &g, &g, s, false)).negated();
        // closedness: d δ_I + g_I a_0 = −(d r_I + Δa + (g∘a)_known − a∘f)_I
        let known = dinf_at(cat, f, &g, &a, s).negated();
        let mut b = SystemBuilder::new(field);
        let ug = b.unknown("g_I", cat.dim(y0, yk, gk));
        let ud = b.unknown("delta_I", cat.dim(x0, yk, ak));
        let e_mc = b.equation("mc", mc_rhs.coords);
        let e_cl = b.equation("closed", known.coords);
        for j in 0..b.unknown_len(ug) {
            let gb = cat.basis(y0, yk, gk, j);
            b.add_image(ug, j, e_mc, &cat.diff(&gb).coords);
            b.add_image(ug, j, e_cl, &cat.compose_unchecked(&gb, &a0).coords);
        }
        for j in 0..b.unknown_len(ud) {
            let db = cat.diff(&cat.basis(x0, yk, ak, j));
            b.add_image(ud, j, e_cl, &db.coords);
        }
        let Some(sol) = b.solve() else {
            return Ok(None);
        };
        g.set_coords(s, pad(field, &sol[0], cat.dim(y0, yk, gk)));
        let mut cur = a.morphism(cat, s);
        crate::linalg::axpy(&mut cur.coords, &field.one(), &pad(field, &sol[1], cat.dim(x0, yk, ak)));
        a.set_coords(s, cur.coords);
    }
    let target = Arc::new(McObject { f: g });
    Ok(Some(Transformation { source: source.clone(), target, a }))
}

fn pad(field: crate::linalg::Field, v: &[Scalar], len: usize) -> Vec<Scalar> {
    if v.is_empty() {
        field.zeros(len)
    } else {
        v.to_vec()
    }
}

/// `cX`: all objects `x`, edges `1_x`, higher components 0.
pub fn constant_object(cat: &DgCategory, x: ObjectId, n: usize) -> McObject {
    let mut f = FamilyShape { n, degree: 1, source: vec![x; n + 1], target: vec![x; n + 1], mask: Mask::MC }.zero();
    for i in 0..=n {
        for j in i + 1..=n {
            f.set_coords(singleton(i) | singleton(j), cat.identity(x).coords);
        }
    }
    McObject { f }
}

/// `c(h): cX → cY`, singletons `h`, higher components 0.
pub fn constant_morphism(cat: &DgCategory, h: &Morphism, n: usize) -> Transformation {
    let src = Arc::new(constant_object(cat, h.source, n));
    let tgt = Arc::new(constant_object(cat, h.target, n));
    let mut a = transformation_shape(&src, &tgt, h.degree).zero();
    for i in 0..=n {
        a.set_coords(singleton(i), h.coords.clone());
    }
    Transformation { source: src, target: tgt, a }
}

fn is_constant(cat: &DgCategory, obj: &McObject) -> bool {
    let x = obj.objects()[0];
    !obj.is_truncated() && obj.f == constant_object(cat, x, obj.n()).f
}

fn require_closed(cat: &DgCategory, a: &Transformation, degree: i32) -> Result<()> {
    if a.degree() != degree {
        return Err(Error::Shape(format!("expected degree {degree}, got {}", a.degree())));
    }
    if !dinf(cat, a).a.is_zero() {
        return Err(Error::NotClosed("d_A∞(a) ≠ 0".into()));
    }
    Ok(())
}

/// For closed degree-0 `a: cX → cY`, a `b` with `d_{A∞}(b) = a − c(a_0)`:
/// `b_I = (−1)^{|I|−1} a_{{0}∪I}` when `0 ∉ I`, and `0` otherwise.
pub fn exactness_primitive(cat: &DgCategory, a: &Transformation) -> Result<Transformation> {
    if !is_constant(cat, &a.source) || !is_constant(cat, &a.target) {
        return Err(Error::Invalid("exactness primitive needs constant endpoints".into()));
    }
    require_closed(cat, a, 0)?;
    let mut b = a.a.shape.with_degree(-1).zero();
    for s in b.shape.mask.subsets(a.n()) {
        if s & 1 == 0 {
            if let Some(c) = a.a.get(s | 1) {
                b.set_coords(s, scaled_by_parity(cat, c, card(s) - 1));
            }
        }
    }
    Ok(a.with_family(b))
}

fn scaled_by_parity(cat: &DgCategory, c: &[Scalar], k: u32) -> Vec<Scalar> {
    crate::linalg::scale(&sign(cat, k % 2 == 1), c)
}

/// The closed map `cX_0 → (X,f)` with `a_0 = 1`, `a_i = f_{0i}`, and
/// `a_I = (−1)^{|I|−1} f_{{0}∪I}` for `0 ∉ I`; components containing 0 vanish.
pub fn strictification_point(cat: &DgCategory, obj: &Arc<McObject>) -> Result<Transformation> {
    if obj.is_truncated() {
        return Err(Error::Invalid("strictification point needs a full object".into()));
    }
    if !mc_defect(cat, obj).is_zero() {
        return Err(Error::Invalid("object does not satisfy Maurer–Cartan".into()));
    }
    let x0 = obj.objects()[0];
    let src = Arc::new(constant_object(cat, x0, obj.n()));
    let mut a = transformation_shape(&src, obj, 0).zero();
    a.set_coords(1, cat.identity(x0).coords);
    for s in a.shape.mask.subsets(obj.n()) {
        if s & 1 == 0 {
            if let Some(c) = obj.f.get(s | 1) {
                a.set_coords(s, scaled_by_parity(cat, c, card(s) - 1));
            }
        }
    }
    Ok(Transformation { source: src, target: obj.clone(), a })
}

/// An order-preserving map `θ: [m] → [n]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonotoneMap {
    values: Vec<usize>,
    n: usize,
}

impl MonotoneMap {
    pub fn new(values: Vec<usize>, n: usize) -> Result<MonotoneMap> {
        if values.is_empty() || values.windows(2).any(|w| w[0] > w[1]) || values.iter().any(|&v| v > n) {
            return Err(Error::Invalid(format!("{values:?} is not a monotone map into [{n}]")));
        }
        Ok(MonotoneMap { values, n })
    }

    pub fn identity(n: usize) -> MonotoneMap {
        MonotoneMap { values: (0..=n).collect(), n }
    }

    /// `d^i: [n−1] → [n]`, skipping `i`.
    pub fn face(n: usize, i: usize) -> MonotoneMap {
        MonotoneMap { values: (0..=n).filter(|&j| j != i).collect(), n }
    }

    /// `s^i: [n+1] → [n]`, hitting `i` twice.
    pub fn degeneracy(n: usize, i: usize) -> MonotoneMap {
        MonotoneMap { values: (0..=n + 1).map(|j| if j <= i { j } else { j - 1 }).collect(), n }
    }

    pub fn source_level(&self) -> usize {
        self.values.len() - 1
    }

    pub fn target_level(&self) -> usize {
        self.n
    }

    pub fn apply(&self, i: usize) -> usize {
        self.values[i]
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MonotoneMap) -> Result<MonotoneMap> {
        if other.n != self.source_level() {
            return Err(Error::Shape("monotone maps do not compose".into()));
        }
        Ok(MonotoneMap { values: other.values.iter().map(|&v| self.values[v]).collect(), n: self.n })
    }

    fn image(&self, s: Subset) -> (Subset, bool) {
        let e = elements(s);
        let img: Vec<usize> = e.iter().map(|&i| self.values[i]).collect();
        let injective = img.windows(2).all(|w| w[0] < w[1]);
        (from_elements(&img), injective)
    }
}

fn reindex_family(cat: &DgCategory, theta: &MonotoneMap, phi: &SubsetFamily, unit_edges: bool) -> Result<SubsetFamily> {
    if phi.n() != theta.target_level() {
        return Err(Error::Shape(format!("datum lives at level {}, map targets level {}", phi.n(), theta.target_level())));
    }
    let m = theta.source_level();
    let top_hit = !phi.mask().include_top && (0..=m).map(|i| theta.apply(i)).collect::<Vec<_>>() == (0..=phi.n()).collect::<Vec<_>>();
    let mask = Mask { min_card: phi.mask().min_card, include_top: !top_hit };
    let pull = |v: &[ObjectId]| (0..=m).map(|i| v[theta.apply(i)]).collect::<Vec<_>>();
    let shape = FamilyShape { n: m, degree: phi.degree(), source: pull(&phi.shape.source), target: pull(&phi.shape.target), mask };
    let mut out = shape.zero();
    for s in mask.subsets(m) {
        let (img, injective) = theta.image(s);
        if injective {
            if !phi.shape.admits(img) {
                return Err(Error::Invalid(format!("component {{{}}} is not available", subset_key(img))));
            }
            if let Some(c) = phi.get(img) {
                out.set_coords(s, c.clone());
            }
        } else if unit_edges && card(s) == 2 {
            out.set_coords(s, cat.identity(shape.source[min_elem(s)]).coords);
        }
    }
    Ok(out)
}

/// Pull an object back along `θ`. Degenerate edges become identities and
/// components that are not injective on their subset vanish.
pub fn reindex_object(cat: &DgCategory, theta: &MonotoneMap, obj: &McObject) -> Result<McObject> {
    Ok(McObject { f: reindex_family(cat, theta, &obj.f, true)? })
}

pub fn reindex_transformation(cat: &DgCategory, theta: &MonotoneMap, a: &Transformation) -> Result<Transformation> {
    Ok(Transformation {
        source: Arc::new(reindex_object(cat, theta, &a.source)?),
        target: Arc::new(reindex_object(cat, theta, &a.target)?),
        a: reindex_family(cat, theta, &a.a, false)?,
    })
}

/// Witness that `a` is invertible in `H⁰`: `b∘a = 1 + d_{A∞}(h1)` and
/// `a∘b = 1 + d_{A∞}(h2)` with `b` closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FnWitness {
    pub b: Transformation,
    pub h1: Transformation,
    pub h2: Transformation,
}

pub fn is_hoequiv_fn(cat: &DgCategory, a: &Transformation) -> Result<Option<FnWitness>> {
    require_closed(cat, a, 0)?;
    let (x, y) = (&a.source, &a.target);
    let field = cat.field();
    let bshape = transformation_shape(y, x, 0);
    let h1shape = transformation_shape(x, x, -1);
    let h2shape = transformation_shape(y, y, -1);
    let idx = identity_transformation(cat, x);
    let idy = identity_transformation(cat, y);
    let mut sys = SystemBuilder::new(field);
    let ub = sys.unknown("b", bshape.dim(cat));
    let uh1 = sys.unknown("h1", h1shape.dim(cat));
    let uh2 = sys.unknown("h2", h2shape.dim(cat));
    let e_closed = sys.equation("d b = 0", field.zeros(bshape.with_degree(1).dim(cat)));
    let e_left = sys.equation("b a - d h1 = 1", idx.a.to_coords(cat));
    let e_right = sys.equation("a b - d h2 = 1", idy.a.to_coords(cat));
    for j in 0..bshape.dim(cat) {
        let b = bshape.basis(cat, j);
        sys.add_image(ub, j, e_closed, &dinf_family(cat, &y.f, &x.f, &b).to_coords(cat));
        sys.add_image(ub, j, e_left, &circ(cat, &b, &a.a, false)?.restrict(idx.a.mask()).to_coords(cat));
        sys.add_image(ub, j, e_right, &circ(cat, &a.a, &b, false)?.restrict(idy.a.mask()).to_coords(cat));
    }
    for j in 0..h1shape.dim(cat) {
        let h = h1shape.basis(cat, j);
        sys.add_image(uh1, j, e_left, &dinf_family(cat, &x.f, &x.f, &h).negated().to_coords(cat));
    }
    for j in 0..h2shape.dim(cat) {
        let h = h2shape.basis(cat, j);
        sys.add_image(uh2, j, e_right, &dinf_family(cat, &y.f, &y.f, &h).negated().to_coords(cat));
    }
    let Some(sol) = sys.solve() else {
        return Ok(None);
    };
    let fam = |shape: &FamilyShape, v: &[Scalar]| shape.from_coords(cat, &pad(field, v, shape.dim(cat)));
    Ok(Some(FnWitness {
        b: Transformation { source: y.clone(), target: x.clone(), a: fam(&bshape, &sol[0]) },
        h1: Transformation { source: x.clone(), target: x.clone(), a: fam(&h1shape, &sol[1]) },
        h2: Transformation { source: y.clone(), target: y.clone(), a: fam(&h2shape, &sol[2]) },
    }))
}

/// Re-check the three witness equations exactly.
pub fn check_fn_witness(cat: &DgCategory, a: &Transformation, w: &FnWitness) -> Result<bool> {
    let idx = identity_transformation(cat, &a.source);
    let idy = identity_transformation(cat, &a.target);
    let left = compose_transformations(cat, &w.b, a)?.a.minus(&dinf(cat, &w.h1).a);
    let right = compose_transformations(cat, a, &w.b)?.a.minus(&dinf(cat, &w.h2).a);
    Ok(dinf(cat, &w.b).a.is_zero() && left == idx.a && right == idy.a)
}

/// Every singleton component is a homotopy equivalence in the base category.
pub fn pointwise_hoequiv(cat: &DgCategory, a: &Transformation) -> Result<bool> {
    require_closed(cat, a, 0)?;
    for i in 0..=a.n() {
        let ai = a.component(cat, singleton(i));
        if dg::is_homotopy_equivalence(cat, &ai)?.is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The hom complex `F_n((X,f),(Y,g))` as an explicit cochain complex,
/// in the flat coordinates of [`FamilyShape::blocks`].
pub fn fn_hom_complex(cat: &DgCategory, source: &McObject, target: &McObject) -> Result<crate::dg::CochainComplex> {
    let field = cat.field();
    let degrees = fn_degree_range(cat, source, target);
    let space = crate::dg::GradedSpace::new(degrees.iter().map(|&l| (l, fn_hom_dims(cat, source, target, l))));
    let mut d = BTreeMap::new();
    for &l in &degrees {
        let shape = transformation_shape(source, target, l);
        let (rows, cols) = (fn_hom_dims(cat, source, target, l + 1), shape.dim(cat));
        if rows == 0 || cols == 0 {
            continue;
        }
        let mut m = crate::linalg::Matrix::zeros(field, rows, cols);
        for j in 0..cols {
            let img = dinf_family(cat, &source.f, &target.f, &shape.basis(cat, j));
            m.set_column(j, &img.to_coords(cat));
        }
        d.insert(l, m);
    }
    Ok(crate::dg::CochainComplex::new(field, space, d)?)
}

fn fn_degree_range(cat: &DgCategory, source: &McObject, target: &McObject) -> Vec<i32> {
    let mut lo = i32::MAX;
    let mut hi = i32::MIN;
    for &x in source.objects() {
        for &y in target.objects() {
            let sp = cat.hom(x, y).space();
            if let (Some(a), Some(b)) = (sp.min_degree(), sp.max_degree()) {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
    }
    if lo > hi {
        return Vec::new();
    }
    (lo..=hi + source.n() as i32).collect()
}

/// The constant inclusion `A(X,Y) → F_n(cX,cY)` as a chain map.
pub fn constant_inclusion_map(cat: &DgCategory, x: ObjectId, y: ObjectId, n: usize) -> Result<crate::dg::ChainMap> {
    let cx = constant_object(cat, x, n);
    let cy = constant_object(cat, y, n);
    let field = cat.field();
    let mut maps = BTreeMap::new();
    for l in cat.hom(x, y).space().degrees() {
        let (rows, cols) = (fn_hom_dims(cat, &cx, &cy, l), cat.dim(x, y, l));
        let mut m = crate::linalg::Matrix::zeros(field, rows, cols);
        for j in 0..cols {
            let c = constant_morphism(cat, &cat.basis(x, y, l, j), n);
            m.set_column(j, &c.a.to_coords(cat));
        }
        maps.insert(l, m);
    }
    Ok(crate::dg::ChainMap { maps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::linalg::Field;

    fn cat(seed: u64) -> DgCategory {
        gen::random_endo_category(Field::Rational, seed)
    }

    #[test]
    fn delta_squares_to_zero_and_anticommutes_with_d() {
        for seed in 0..20 {
            let c = cat(seed);
            let mut r = gen::rng(seed, 9);
            let n = 1 + (seed as usize % 4);
            let x: Vec<ObjectId> = (0..=n).map(|i| (i + seed as usize) % 3).collect();
            let y: Vec<ObjectId> = (0..=n).map(|i| (2 * i + seed as usize) % 3).collect();
            let shape = FamilyShape { n, degree: (seed % 3) as i32 - 1, source: x, target: y, mask: Mask::TRANSFORMATION };
            let phi = gen::random_family(&c, &shape, &mut r);
            assert!(delta(&c, &delta(&c, &phi)).is_zero());
            assert!(d(&c, &delta(&c, &phi)).plus(&delta(&c, &d(&c, &phi))).is_zero());
        }
    }

    #[test]
    fn generated_objects_satisfy_mc_and_transport_is_closed() {
        for seed in 0..12 {
            let c = cat(seed);
            let n = 1 + (seed as usize % 4);
            let t = gen::generate_mc_with_map(&c, n, seed).unwrap();
            assert!(validate_mc_object(&c, &t.target).passed(), "seed {seed}");
            assert!(dinf(&c, &t).a.is_zero(), "seed {seed}");
        }
    }

    #[test]
    fn dinf_squares_to_zero_and_composition_is_compatible() {
        for seed in 0..12 {
            let c = cat(seed);
            let n = 1 + (seed as usize % 4);
            let x = Arc::new(gen::generate_mc_object(&c, n, seed).unwrap());
            let a = gen::generate_hoequiv(&c, &x, seed).unwrap();
            assert!(dinf(&c, &a).a.is_zero());
            let b = gen::generate_hoequiv(&c, &a.target, seed + 100).unwrap();
            let mut r = gen::rng(seed, 5);
            let u = a.with_family(gen::random_family(&c, &a.a.shape.with_degree(-1), &mut r));
            let v = b.with_family(gen::random_family(&c, &b.a.shape.with_degree(1), &mut r));
            assert!(dinf(&c, &dinf(&c, &u)).a.is_zero(), "seed {seed}");
            let vu = compose_transformations(&c, &v, &u).unwrap();
            let lhs = dinf(&c, &vu).a;
            let rhs = compose_transformations(&c, &dinf(&c, &v), &u)
                .unwrap()
                .a
                .minus(&compose_transformations(&c, &v, &dinf(&c, &u)).unwrap().a);
            let w = gen::generate_hoequiv(&c, &b.target, seed + 200).unwrap();
            let t = w.with_family(gen::random_family(&c, &w.a.shape.with_degree(1), &mut r));
            assert_eq!(
                compose_transformations(&c, &compose_transformations(&c, &t, &v).unwrap(), &u).unwrap(),
                compose_transformations(&c, &t, &compose_transformations(&c, &v, &u).unwrap()).unwrap()
            );
            assert_eq!(lhs, rhs, "Leibniz, seed {seed}");
        }
    }

    #[test]
    fn strictification_and_primitive_are_correct() {
        for seed in 0..10 {
            let c = cat(seed);
            let n = 1 + (seed as usize % 4);
            let x = Arc::new(gen::generate_mc_object(&c, n, seed).unwrap());
            let p = strictification_point(&c, &x).unwrap();
            assert!(dinf(&c, &p).a.is_zero(), "seed {seed}");
            let (x0, y0) = (x.objects()[0], (seed as usize + 1) % 3);
            let mut r = gen::rng(seed, 4);
            let cx = Arc::new(constant_object(&c, x0, n));
            let cy = Arc::new(constant_object(&c, y0, n));
            let h = gen::random_closed(&c, x0, y0, 0, &mut r);
            let u = gen::random_family(&c, &transformation_shape(&cx, &cy, -1), &mut r);
            let base = constant_morphism(&c, &h, n);
            let a = base.with_family(base.a.plus(&dinf_family(&c, &cx.f, &cy.f, &u)));
            let b = exactness_primitive(&c, &a).unwrap();
            let a0 = constant_morphism(&c, &a.component(&c, 1), n);
            assert_eq!(dinf(&c, &b).a, a.a.minus(&a0.a), "seed {seed}");
        }
    }

    #[test]
    fn primitive_rejects_open_input() {
        let c = cat(3);
        let cx = Arc::new(constant_object(&c, 0, 2));
        let mut r = gen::rng(3, 1);
        let shape = transformation_shape(&cx, &cx, 0);
        let a = Transformation { source: cx.clone(), target: cx, a: gen::random_family(&c, &shape, &mut r) };
        if !dinf(&c, &a).a.is_zero() {
            assert!(matches!(exactness_primitive(&c, &a), Err(Error::NotClosed(_))));
        }
    }

    #[test]
    fn reindexing_is_functorial_and_preserves_mc() {
        for seed in 0..8 {
            let c = cat(seed);
            let x = gen::generate_mc_object(&c, 3, seed).unwrap();
            let s1 = MonotoneMap::degeneracy(3, 1);
            let d2 = MonotoneMap::face(4, 2);
            let y = reindex_object(&c, &s1, &x).unwrap();
            assert!(validate_mc_object(&c, &y).passed());
            let z = reindex_object(&c, &d2, &y).unwrap();
            let comp = s1.compose(&d2).unwrap();
            assert_eq!(z, reindex_object(&c, &comp, &x).unwrap());
            assert_eq!(comp, MonotoneMap::identity(3));
            assert_eq!(z, x);
        }
    }

    #[test]
    fn fn_hoequiv_matches_pointwise() {
        for seed in 0..8 {
            let c = cat(seed);
            let n = 1 + (seed as usize % 3);
            let x = Arc::new(gen::generate_mc_object(&c, n, seed).unwrap());
            let a = gen::generate_hoequiv(&c, &x, seed).unwrap();
            assert!(pointwise_hoequiv(&c, &a).unwrap());
            let w = is_hoequiv_fn(&c, &a).unwrap().expect("witness");
            assert!(check_fn_witness(&c, &a, &w).unwrap());
        }
    }

    #[test]
    fn constant_inclusion_is_a_quasi_isomorphism() {
        for seed in 0..6 {
            let c = cat(seed);
            let n = 1 + (seed as usize % 3);
            let (x, y) = (0, 1);
            let cx = constant_object(&c, x, n);
            let cy = constant_object(&c, y, n);
            let big = fn_hom_complex(&c, &cx, &cy).unwrap();
            let map = constant_inclusion_map(&c, x, y, n).unwrap();
            let ranks = crate::dg::induced_cohomology_rank(c.hom(x, y), &big, &map).unwrap();
            let src = c.hom(x, y).cohomology_dims();
            let tgt = big.cohomology_dims();
            for (k, &r) in &ranks {
                assert_eq!(r, src[k]);
                assert_eq!(r, tgt.get(k).copied().unwrap_or(0));
            }
            assert_eq!(tgt.values().sum::<usize>(), src.values().sum::<usize>());
        }
    }
}
