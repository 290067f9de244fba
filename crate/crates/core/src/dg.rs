//! Finite DG-categories.
//!
//! Hom complexes are finite-dimensional graded spaces with an explicit
//! differential; composition is a sparse structure tensor. Sign convention
//! for the Leibniz rule: `d(g∘f) = d(g)∘f + (-1)^|g| g∘d(f)`.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, axpy, is_zero_vec, Field, LinalgError, Matrix, Scalar, SystemBuilder};

pub type ObjectId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DgError {
    #[error("object mismatch: {0}")]
    ObjectMismatch(String),
    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),
    #[error("morphism is not closed: {0}")]
    NotClosed(String),
    #[error("malformed input: {0}")]
    Input(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Dimensions of a finitely supported graded vector space.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GradedSpace {
    dims: BTreeMap<i32, usize>,
}

impl GradedSpace {
    pub fn new(dims: impl IntoIterator<Item = (i32, usize)>) -> GradedSpace {
        GradedSpace {
            dims: dims.into_iter().filter(|(_, n)| *n > 0).collect(),
        }
    }

    pub fn dim(&self, k: i32) -> usize {
        self.dims.get(&k).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.dims.values().sum()
    }

    /// Degrees with nonzero dimension, ascending.
    pub fn degrees(&self) -> impl Iterator<Item = i32> + '_ {
        self.dims.keys().copied()
    }

    pub fn dims(&self) -> &BTreeMap<i32, usize> {
        &self.dims
    }

    pub fn min_degree(&self) -> Option<i32> {
        self.dims.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<i32> {
        self.dims.keys().next_back().copied()
    }
}

/// A bounded cochain complex of finite-dimensional spaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CochainComplex {
    field: Field,
    space: GradedSpace,
    /// `d[k]` maps degree `k` to degree `k + 1`; missing entries are zero.
    d: BTreeMap<i32, Matrix>,
}

impl CochainComplex {
    pub fn new(field: Field, space: GradedSpace, d: BTreeMap<i32, Matrix>) -> Result<CochainComplex, DgError> {
        for (&k, m) in &d {
            if m.rows() != space.dim(k + 1) || m.cols() != space.dim(k) {
                return Err(DgError::Input(format!(
                    "differential in degree {k} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    space.dim(k + 1),
                    space.dim(k)
                )));
            }
            if m.field() != field {
                return Err(DgError::Input(format!("differential in degree {k} over the wrong field")));
            }
        }
        let d = d.into_iter().filter(|(_, m)| !m.is_zero() && m.rows() > 0 && m.cols() > 0).collect();
        Ok(CochainComplex { field, space, d })
    }

    /// Complex with zero differential.
    pub fn zero_differential(field: Field, space: GradedSpace) -> CochainComplex {
        CochainComplex {
            field,
            space,
            d: BTreeMap::new(),
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn space(&self) -> &GradedSpace {
        &self.space
    }

    pub fn dim(&self, k: i32) -> usize {
        self.space.dim(k)
    }

    /// The differential out of degree `k` as a full matrix.
    pub fn d(&self, k: i32) -> Matrix {
        self.d
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(self.field, self.dim(k + 1), self.dim(k)))
    }

    pub fn stored_differentials(&self) -> &BTreeMap<i32, Matrix> {
        &self.d
    }

    pub fn apply_d(&self, k: i32, x: &[Scalar]) -> Vec<Scalar> {
        match self.d.get(&k) {
            Some(m) => m.mul_vec(x).expect("coordinate length matches"),
            None => self.field.zeros(self.dim(k + 1)),
        }
    }

    /// Degrees `k` where `d^{k+1} d^k != 0`.
    pub fn d_squared_failures(&self) -> Vec<i32> {
        let mut bad = Vec::new();
        for (&k, m) in &self.d {
            if let Some(next) = self.d.get(&(k + 1)) {
                if !next.mul(m).expect("shapes chain").is_zero() {
                    bad.push(k);
                }
            }
        }
        bad
    }

    pub fn validate(&self) -> Result<(), DgError> {
        match self.d_squared_failures().first() {
            Some(k) => Err(DgError::Input(format!("d∘d != 0 starting in degree {k}"))),
            None => Ok(()),
        }
    }

    pub fn cohomology_dims(&self) -> BTreeMap<i32, usize> {
        let mut out = BTreeMap::new();
        for k in self.space.degrees() {
            let ker = self.dim(k) - linalg::rank(&self.d(k));
            let im = linalg::rank(&self.d(k - 1));
            out.insert(k, ker - im);
        }
        out
    }
}

/// A degreewise linear map between two complexes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMap {
    /// `maps[k]` is `dim target^k x dim source^k`; missing entries are zero.
    pub maps: BTreeMap<i32, Matrix>,
}

impl ChainMap {
    fn at(&self, field: Field, k: i32, source: &CochainComplex, target: &CochainComplex) -> Matrix {
        self.maps
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(field, target.dim(k), source.dim(k)))
    }
}

/// Rank of the map induced on cohomology, per degree of the source.
pub fn induced_cohomology_rank(
    source: &CochainComplex,
    target: &CochainComplex,
    map: &ChainMap,
) -> Result<BTreeMap<i32, usize>, DgError> {
    let field = source.field();
    for (&k, m) in &map.maps {
        if m.rows() != target.dim(k) || m.cols() != source.dim(k) {
            return Err(DgError::Input(format!("chain map block in degree {k} has the wrong shape")));
        }
    }
    let mut degrees: Vec<i32> = source.space().degrees().chain(target.space().degrees()).collect();
    degrees.sort_unstable();
    degrees.dedup();
    for &k in &degrees {
        let lhs = target.d(k).mul(&map.at(field, k, source, target))?;
        let rhs = map.at(field, k + 1, source, target).mul(&source.d(k))?;
        if lhs != rhs {
            return Err(DgError::Input(format!("map does not commute with d in degree {k}")));
        }
    }
    let mut out = BTreeMap::new();
    for k in source.space().degrees() {
        let cycles = linalg::kernel(&source.d(k));
        let phi = map.at(field, k, source, target);
        let boundaries = target.d(k - 1);
        let mut cols: Vec<Vec<Scalar>> = cycles.iter().map(|z| phi.mul_vec(z).expect("shape")).collect();
        cols.extend((0..boundaries.cols()).map(|c| boundaries.column(c)));
        let n = target.dim(k);
        let mut m = Matrix::zeros(field, n, cols.len());
        for (c, col) in cols.iter().enumerate() {
            m.set_column(c, col);
        }
        out.insert(k, linalg::rank(&m) - linalg::rank(&boundaries));
    }
    Ok(out)
}

/// One term of a composition tensor: `basis_g[gidx] ∘ basis_f[fidx]`
/// contributes `coef` to output coordinate `outidx` in degree `gdeg+fdeg`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompEntry {
    pub gdeg: i32,
    pub gidx: usize,
    pub fdeg: i32,
    pub fidx: usize,
    pub outidx: usize,
    pub coef: Scalar,
}

/// Per `gidx`, the `(fidx, outidx, coef)` products it takes part in.
type CompRows = Vec<Vec<(usize, usize, Scalar)>>;

#[derive(Clone, Debug, Default)]
struct CompTable {
    entries: Vec<CompEntry>,
    /// (gdeg, fdeg) -> per gidx list of (fidx, outidx, coef)
    index: HashMap<(i32, i32), CompRows>,
}

impl CompTable {
    fn new(entries: Vec<CompEntry>, gdims: &GradedSpace) -> CompTable {
        let mut index: HashMap<(i32, i32), CompRows> = HashMap::new();
        for e in &entries {
            let slot = index
                .entry((e.gdeg, e.fdeg))
                .or_insert_with(|| vec![Vec::new(); gdims.dim(e.gdeg)]);
            slot[e.gidx].push((e.fidx, e.outidx, e.coef.clone()));
        }
        CompTable { entries, index }
    }
}

/// A morphism of a given degree: an element of `hom(source, target)^degree`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Morphism {
    pub source: ObjectId,
    pub target: ObjectId,
    pub degree: i32,
    pub coords: Vec<Scalar>,
}

impl Morphism {
    pub fn is_zero(&self) -> bool {
        is_zero_vec(&self.coords)
    }

    fn check_same_shape(&self, other: &Morphism) {
        assert!(
            self.source == other.source && self.target == other.target && self.degree == other.degree,
            "adding morphisms of different shapes: {}->{} deg {} vs {}->{} deg {}",
            self.source,
            self.target,
            self.degree,
            other.source,
            other.target,
            other.degree
        );
    }

    /// `self += c * other`.
    ///
    /// # Panics
    /// If the two morphisms live in different hom spaces.
    pub fn add_scaled(&mut self, c: &Scalar, other: &Morphism) {
        self.check_same_shape(other);
        axpy(&mut self.coords, c, &other.coords);
    }

    pub fn plus(&self, other: &Morphism) -> Morphism {
        let mut out = self.clone();
        let one = match other.coords.first() {
            Some(s) => s.field().one(),
            None => return out,
        };
        out.add_scaled(&one, other);
        out
    }

    pub fn minus(&self, other: &Morphism) -> Morphism {
        let mut out = self.clone();
        let m1 = match other.coords.first() {
            Some(s) => -s.field().one(),
            None => return out,
        };
        out.add_scaled(&m1, other);
        out
    }

    pub fn scaled(&self, c: &Scalar) -> Morphism {
        Morphism {
            coords: linalg::scale(c, &self.coords),
            ..self.clone()
        }
    }

    pub fn negated(&self) -> Morphism {
        Morphism {
            coords: self.coords.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}

/// `g f = 1_X + d(r_X)`, `f g = 1_Y + d(r_Y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomotopyWitness {
    pub g: Morphism,
    pub r_x: Morphism,
    pub r_y: Morphism,
}

/// A homotopy witness with the extra coherence `f r_X - r_Y f = d(r_XY)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KontsevichWitness {
    pub g: Morphism,
    pub r_x: Morphism,
    pub r_y: Morphism,
    pub r_xy: Morphism,
}

impl KontsevichWitness {
    pub fn homotopy(&self) -> HomotopyWitness {
        HomotopyWitness {
            g: self.g.clone(),
            r_x: self.r_x.clone(),
            r_y: self.r_y.clone(),
        }
    }
}

/// Raw composition data for [`DgCategory::new`], keyed by `(X, Y, Z)` for
/// `hom(Y,Z) ⊗ hom(X,Y) -> hom(X,Z)`.
pub type CompData = HashMap<(ObjectId, ObjectId, ObjectId), Vec<CompEntry>>;

#[derive(Clone, Debug)]
pub struct DgCategory {
    field: Field,
    objects: Vec<String>,
    homs: Vec<CochainComplex>,
    comp: HashMap<(ObjectId, ObjectId, ObjectId), CompTable>,
    ids: Vec<Vec<Scalar>>,
}

impl DgCategory {
    /// Build a category from raw data, checking shapes only. Use
    /// [`validate_category`] for the axioms.
    pub fn new(
        field: Field,
        objects: Vec<String>,
        mut homs: HashMap<(ObjectId, ObjectId), CochainComplex>,
        comp: CompData,
        ids: Vec<Vec<Scalar>>,
    ) -> Result<DgCategory, DgError> {
        let n = objects.len();
        {
            let mut seen = objects.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != n {
                return Err(DgError::Input("duplicate object names".into()));
            }
        }
        if ids.len() != n {
            return Err(DgError::Input(format!("{} identities for {n} objects", ids.len())));
        }
        let mut hom_list = Vec::with_capacity(n * n);
        for x in 0..n {
            for y in 0..n {
                let h = homs
                    .remove(&(x, y))
                    .unwrap_or_else(|| CochainComplex::zero_differential(field, GradedSpace::default()));
                if h.field() != field {
                    return Err(DgError::Input(format!("hom({x},{y}) over the wrong field")));
                }
                hom_list.push(h);
            }
        }
        if let Some(((x, y), _)) = homs.into_iter().next() {
            return Err(DgError::Input(format!("hom entry for unknown objects ({x},{y})")));
        }
        let mut tables = HashMap::new();
        for ((x, y, z), entries) in comp {
            if x >= n || y >= n || z >= n {
                return Err(DgError::Input(format!("composition entry for unknown objects ({x},{y},{z})")));
            }
            let hg = &hom_list[y * n + z];
            let hf = &hom_list[x * n + y];
            let ho = &hom_list[x * n + z];
            for e in &entries {
                if e.gidx >= hg.dim(e.gdeg) || e.fidx >= hf.dim(e.fdeg) || e.outidx >= ho.dim(e.gdeg + e.fdeg) {
                    return Err(DgError::Input(format!(
                        "composition entry {e:?} out of range for ({x},{y},{z})"
                    )));
                }
                if e.coef.field() != field {
                    return Err(DgError::Input("composition coefficient over the wrong field".into()));
                }
            }
            let entries: Vec<CompEntry> = entries.into_iter().filter(|e| !e.coef.is_zero()).collect();
            tables.insert((x, y, z), CompTable::new(entries, hg.space()));
        }
        for (x, id) in ids.iter().enumerate() {
            if id.len() != hom_list[x * n + x].dim(0) {
                return Err(DgError::Input(format!(
                    "identity of {} has {} coordinates, hom^0 has dimension {}",
                    objects[x],
                    id.len(),
                    hom_list[x * n + x].dim(0)
                )));
            }
        }
        Ok(DgCategory {
            field,
            objects,
            homs: hom_list,
            comp: tables,
            ids,
        })
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().position(|o| o == name)
    }

    pub fn name(&self, x: ObjectId) -> &str {
        &self.objects[x]
    }

    pub fn hom(&self, x: ObjectId, y: ObjectId) -> &CochainComplex {
        &self.homs[x * self.objects.len() + y]
    }

    pub fn dim(&self, x: ObjectId, y: ObjectId, k: i32) -> usize {
        self.hom(x, y).dim(k)
    }

    pub fn comp_entries(&self, x: ObjectId, y: ObjectId, z: ObjectId) -> &[CompEntry] {
        self.comp.get(&(x, y, z)).map_or(&[], |t| &t.entries)
    }

    pub fn identity_coords(&self, x: ObjectId) -> &[Scalar] {
        &self.ids[x]
    }

    pub fn zero(&self, x: ObjectId, y: ObjectId, k: i32) -> Morphism {
        Morphism {
            source: x,
            target: y,
            degree: k,
            coords: self.field.zeros(self.dim(x, y, k)),
        }
    }

    pub fn identity(&self, x: ObjectId) -> Morphism {
        Morphism {
            source: x,
            target: x,
            degree: 0,
            coords: self.ids[x].clone(),
        }
    }

    pub fn basis(&self, x: ObjectId, y: ObjectId, k: i32, i: usize) -> Morphism {
        let mut m = self.zero(x, y, k);
        m.coords[i] = self.field.one();
        m
    }

    pub fn morphism(&self, x: ObjectId, y: ObjectId, k: i32, coords: Vec<Scalar>) -> Result<Morphism, DgError> {
        if coords.len() != self.dim(x, y, k) {
            return Err(DgError::Input(format!(
                "{} coordinates for hom({},{})^{k} of dimension {}",
                coords.len(),
                self.name(x),
                self.name(y),
                self.dim(x, y, k)
            )));
        }
        Ok(Morphism {
            source: x,
            target: y,
            degree: k,
            coords,
        })
    }

    pub fn check(&self, f: &Morphism) -> Result<(), DgError> {
        if f.source >= self.num_objects() || f.target >= self.num_objects() {
            return Err(DgError::Input("morphism endpoint is not an object".into()));
        }
        if f.coords.len() != self.dim(f.source, f.target, f.degree) {
            return Err(DgError::Input(format!(
                "{} coordinates in hom^{} of dimension {}",
                f.coords.len(),
                f.degree,
                self.dim(f.source, f.target, f.degree)
            )));
        }
        Ok(())
    }

    /// `g ∘ f`.
    pub fn compose(&self, g: &Morphism, f: &Morphism) -> Result<Morphism, DgError> {
        if f.target != g.source {
            return Err(DgError::ObjectMismatch(format!(
                "cannot compose {}->{} after {}->{}",
                self.name(g.source),
                self.name(g.target),
                self.name(f.source),
                self.name(f.target)
            )));
        }
        Ok(self.compose_unchecked(g, f))
    }

    pub(crate) fn compose_unchecked(&self, g: &Morphism, f: &Morphism) -> Morphism {
        let (x, y, z) = (f.source, f.target, g.target);
        let mut out = self.zero(x, z, g.degree + f.degree);
        if out.coords.is_empty() {
            return out;
        }
        let Some(table) = self.comp.get(&(x, y, z)) else {
            return out;
        };
        let Some(index) = table.index.get(&(g.degree, f.degree)) else {
            return out;
        };
        for (gi, gv) in g.coords.iter().enumerate() {
            if gv.is_zero() {
                continue;
            }
            for (fi, oi, c) in &index[gi] {
                let fv = &f.coords[*fi];
                if !fv.is_zero() {
                    let t = gv * fv;
                    out.coords[*oi].add_mul(c, &t);
                }
            }
        }
        out
    }

    /// The differential `d f`, of degree `|f| + 1`.
    pub fn diff(&self, f: &Morphism) -> Morphism {
        Morphism {
            source: f.source,
            target: f.target,
            degree: f.degree + 1,
            coords: self.hom(f.source, f.target).apply_d(f.degree, &f.coords),
        }
    }

    pub fn is_closed(&self, f: &Morphism) -> bool {
        self.diff(f).is_zero()
    }
}

/// One violated axiom, with offending basis indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Violation {
    DSquared { x: String, y: String, degree: i32 },
    Leibniz { x: String, y: String, z: String, g: (i32, usize), f: (i32, usize) },
    Associativity { w: String, x: String, y: String, z: String, h: (i32, usize), g: (i32, usize), f: (i32, usize) },
    Unit { x: String, y: String, side: String, f: (i32, usize) },
    IdentityNotClosed { x: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

type Basis = (i32, usize);
type Sparse = BTreeMap<usize, Scalar>;

fn add_sparse(acc: &mut Sparse, c: &Scalar, v: &Sparse) {
    for (&i, x) in v {
        let e = acc.entry(i).or_insert_with(|| c.field().zero());
        e.add_mul(c, x);
        if e.is_zero() {
            acc.remove(&i);
        }
    }
}

/// Composition `hom(Y,Z) ⊗ hom(X,Y) → hom(X,Z)` on basis elements, with
/// nonzero products indexed by either factor.
#[derive(Default)]
struct Tensor {
    prod: HashMap<(Basis, Basis), Sparse>,
    by_left: HashMap<Basis, Vec<Basis>>,
    by_right: HashMap<Basis, Vec<Basis>>,
}

impl Tensor {
    fn new(entries: &[CompEntry]) -> Tensor {
        let mut prod: HashMap<(Basis, Basis), Sparse> = HashMap::new();
        for e in entries {
            let v = prod.entry(((e.gdeg, e.gidx), (e.fdeg, e.fidx))).or_default();
            add_sparse(v, &e.coef.field().one(), &Sparse::from([(e.outidx, e.coef.clone())]));
        }
        prod.retain(|_, v| !v.is_empty());
        let mut t = Tensor { prod, ..Tensor::default() };
        let mut keys: Vec<_> = t.prod.keys().copied().collect();
        keys.sort();
        for (g, f) in keys {
            t.by_left.entry(g).or_default().push(f);
            t.by_right.entry(f).or_default().push(g);
        }
        t
    }

    fn get(&self, g: Basis, f: Basis) -> Option<&Sparse> {
        self.prod.get(&(g, f))
    }

    /// `(Σ c_l e_l) ∘ f` for a sparse left factor of degree `gk`.
    fn left_sparse(&self, gk: i32, g: &Sparse, f: Basis) -> Sparse {
        let mut out = Sparse::new();
        for (&l, c) in g {
            if let Some(v) = self.get((gk, l), f) {
                add_sparse(&mut out, c, v);
            }
        }
        out
    }

    fn right_sparse(&self, g: Basis, fk: i32, f: &Sparse) -> Sparse {
        let mut out = Sparse::new();
        for (&m, c) in f {
            if let Some(v) = self.get(g, (fk, m)) {
                add_sparse(&mut out, c, v);
            }
        }
        out
    }
}

/// Columns of the differential of one hom complex, and the reverse index.
struct SparseD {
    cols: HashMap<Basis, Sparse>,
    preimages: HashMap<Basis, Vec<Basis>>,
}

impl SparseD {
    fn new(h: &CochainComplex) -> SparseD {
        let mut cols = HashMap::new();
        let mut preimages: HashMap<Basis, Vec<Basis>> = HashMap::new();
        for k in h.space().degrees() {
            let d = h.d(k);
            for i in 0..h.dim(k) {
                let col: Sparse = (0..d.rows()).filter(|&r| !d.get(r, i).is_zero()).map(|r| (r, d.get(r, i).clone())).collect();
                for &r in col.keys() {
                    preimages.entry((k + 1, r)).or_default().push((k, i));
                }
                cols.insert((k, i), col);
            }
        }
        SparseD { cols, preimages }
    }

    fn col(&self, b: Basis) -> Sparse {
        self.cols.get(&b).cloned().unwrap_or_default()
    }

    fn preimages(&self, b: Basis) -> &[Basis] {
        self.preimages.get(&b).map_or(&[], Vec::as_slice)
    }
}

/// Check d² = 0, Leibniz, associativity and unitality on all basis
/// elements. Structure constants are sparse, so only basis tuples where
/// some term of an identity can be nonzero are evaluated; on the rest both
/// sides vanish.
pub fn validate_category(cat: &DgCategory) -> ValidationReport {
    let n = cat.num_objects();
    let mut v = Vec::new();
    let name = |x: ObjectId| cat.name(x).to_string();
    let one = cat.field.one();
    for x in 0..n {
        for y in 0..n {
            for k in cat.hom(x, y).d_squared_failures() {
                v.push(Violation::DSquared { x: name(x), y: name(y), degree: k });
            }
        }
    }
    let ds: Vec<SparseD> = (0..n * n).map(|i| SparseD::new(cat.hom(i / n, i % n))).collect();
    let d = |x: ObjectId, y: ObjectId| &ds[x * n + y];
    let tensors: Vec<Tensor> = (0..n * n * n).map(|i| Tensor::new(cat.comp_entries(i / (n * n), (i / n) % n, i % n))).collect();
    let t = |x: ObjectId, y: ObjectId, z: ObjectId| &tensors[(x * n + y) * n + z];
    let sparse_id = |x: ObjectId| -> Sparse {
        cat.identity_coords(x).iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (i, c.clone())).collect()
    };

    for x in 0..n {
        if !cat.is_closed(&cat.identity(x)) {
            v.push(Violation::IdentityNotClosed { x: name(x) });
        }
        for y in 0..n {
            let (idy, idx) = (sparse_id(y), sparse_id(x));
            let h = cat.hom(x, y);
            for k in h.space().degrees() {
                for i in 0..h.dim(k) {
                    let e = Sparse::from([(i, one.clone())]);
                    if t(x, y, y).left_sparse(0, &idy, (k, i)) != e {
                        v.push(Violation::Unit { x: name(x), y: name(y), side: "left".into(), f: (k, i) });
                    }
                    if t(x, x, y).right_sparse((k, i), 0, &idx) != e {
                        v.push(Violation::Unit { x: name(x), y: name(y), side: "right".into(), f: (k, i) });
                    }
                }
            }
        }
    }

    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let tz = t(x, y, z);
                let mut pairs: std::collections::BTreeSet<(Basis, Basis)> = tz.prod.keys().copied().collect();
                for &(m, f) in tz.prod.keys() {
                    pairs.extend(d(y, z).preimages(m).iter().map(|&g| (g, f)));
                }
                for &(g, m) in tz.prod.keys() {
                    pairs.extend(d(x, y).preimages(m).iter().map(|&f| (g, f)));
                }
                for (g, f) in pairs {
                    let mut lhs = Sparse::new();
                    for (&o, c) in tz.get(g, f).into_iter().flatten() {
                        add_sparse(&mut lhs, c, &d(x, z).col((g.0 + f.0, o)));
                    }
                    let mut rhs = tz.left_sparse(g.0 + 1, &d(y, z).col(g), f);
                    let sign = cat.field.sign(g.0.rem_euclid(2) == 1);
                    add_sparse(&mut rhs, &sign, &tz.right_sparse(g, f.0 + 1, &d(x, y).col(f)));
                    if lhs != rhs {
                        v.push(Violation::Leibniz { x: name(x), y: name(y), z: name(z), g, f });
                    }
                }
            }
        }
    }

    for w in 0..n {
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let (hg_t, gf_t, lf_t, hm_t) = (t(x, y, z), t(w, x, y), t(w, x, z), t(w, y, z));
                    let mut triples = std::collections::BTreeSet::new();
                    for (&(h, g), hg) in &hg_t.prod {
                        for &l in hg.keys() {
                            for &f in lf_t.by_left.get(&(h.0 + g.0, l)).into_iter().flatten() {
                                triples.insert((h, g, f));
                            }
                        }
                    }
                    for (&(g, f), gf) in &gf_t.prod {
                        for &m in gf.keys() {
                            for &h in hm_t.by_right.get(&(g.0 + f.0, m)).into_iter().flatten() {
                                triples.insert((h, g, f));
                            }
                        }
                    }
                    for (h, g, f) in triples {
                        let lhs = match hg_t.get(h, g) {
                            Some(hg) => lf_t.left_sparse(h.0 + g.0, hg, f),
                            None => Sparse::new(),
                        };
                        let rhs = match gf_t.get(g, f) {
                            Some(gf) => hm_t.right_sparse(h, g.0 + f.0, gf),
                            None => Sparse::new(),
                        };
                        if lhs != rhs {
                            v.push(Violation::Associativity {
                                w: name(w),
                                x: name(x),
                                y: name(y),
                                z: name(z),
                                h,
                                g,
                                f,
                            });
                        }
                    }
                }
            }
        }
    }
    ValidationReport { violations: v }
}

/// Cohomology dimensions of `hom(x, y)`.
pub fn cohomology_dims(cat: &DgCategory, x: ObjectId, y: ObjectId) -> BTreeMap<i32, usize> {
    cat.hom(x, y).cohomology_dims()
}

/// Some `h` with `d h = f`, if `f` is exact.
pub fn is_null_homotopic(cat: &DgCategory, f: &Morphism) -> Result<Option<Morphism>, DgError> {
    cat.check(f)?;
    if !cat.is_closed(f) {
        return Err(DgError::NotClosed("null-homotopy requested for a non-closed morphism".into()));
    }
    let (x, y, k) = (f.source, f.target, f.degree);
    let mut b = SystemBuilder::new(cat.field);
    let h = b.unknown("h", cat.dim(x, y, k - 1));
    let e = b.equation("dh = f", f.coords.clone());
    for j in 0..b.unknown_len(h) {
        let img = cat.diff(&cat.basis(x, y, k - 1, j));
        b.add_image(h, j, e, &img.coords);
    }
    Ok(b.solve().map(|mut sol| Morphism {
        source: x,
        target: y,
        degree: k - 1,
        coords: sol.remove(0),
    }))
}

fn check_closed_degree_zero(cat: &DgCategory, f: &Morphism) -> Result<(), DgError> {
    cat.check(f)?;
    if f.degree != 0 {
        return Err(DgError::DegreeMismatch(format!("expected degree 0, got {}", f.degree)));
    }
    if !cat.is_closed(f) {
        return Err(DgError::NotClosed("homotopy equivalence test needs d(f) = 0".into()));
    }
    Ok(())
}

fn homotopy_system(cat: &DgCategory, f: &Morphism, with_coherence: bool) -> Option<Vec<Morphism>> {
    let (x, y) = (f.source, f.target);
    let field = cat.field;
    let mut b = SystemBuilder::new(field);
    let ug = b.unknown("g", cat.dim(y, x, 0));
    let urx = b.unknown("r_X", cat.dim(x, x, -1));
    let ury = b.unknown("r_Y", cat.dim(y, y, -1));
    let urxy = b.unknown("r_XY", if with_coherence { cat.dim(x, y, -2) } else { 0 });
    let e_closed = b.equation("dg = 0", field.zeros(cat.dim(y, x, 1)));
    let e_left = b.equation("gf - d r_X = 1_X", cat.identity(x).coords);
    let e_right = b.equation("fg - d r_Y = 1_Y", cat.identity(y).coords);
    let e_coh = b.equation(
        "f r_X - r_Y f - d r_XY = 0",
        field.zeros(if with_coherence { cat.dim(x, y, -1) } else { 0 }),
    );
    for j in 0..b.unknown_len(ug) {
        let g = cat.basis(y, x, 0, j);
        b.add_image(ug, j, e_closed, &cat.diff(&g).coords);
        b.add_image(ug, j, e_left, &cat.compose_unchecked(&g, f).coords);
        b.add_image(ug, j, e_right, &cat.compose_unchecked(f, &g).coords);
    }
    for j in 0..b.unknown_len(urx) {
        let r = cat.basis(x, x, -1, j);
        b.add_image(urx, j, e_left, &cat.diff(&r).negated().coords);
        if with_coherence {
            b.add_image(urx, j, e_coh, &cat.compose_unchecked(f, &r).coords);
        }
    }
    for j in 0..b.unknown_len(ury) {
        let r = cat.basis(y, y, -1, j);
        b.add_image(ury, j, e_right, &cat.diff(&r).negated().coords);
        if with_coherence {
            b.add_image(ury, j, e_coh, &cat.compose_unchecked(&r, f).negated().coords);
        }
    }
    for j in 0..b.unknown_len(urxy) {
        let r = cat.basis(x, y, -2, j);
        b.add_image(urxy, j, e_coh, &cat.diff(&r).negated().coords);
    }
    let sol = b.solve()?;
    let shapes = [(y, x, 0), (x, x, -1), (y, y, -1), (x, y, -2)];
    Some(
        sol.into_iter()
            .zip(shapes)
            .map(|(coords, (s, t, k))| {
                let coords = if coords.is_empty() { field.zeros(cat.dim(s, t, k)) } else { coords };
                Morphism { source: s, target: t, degree: k, coords }
            })
            .collect(),
    )
}

/// Decide whether a closed degree-0 morphism is invertible in H⁰, returning
/// an explicit inverse and homotopies.
pub fn is_homotopy_equivalence(cat: &DgCategory, f: &Morphism) -> Result<Option<HomotopyWitness>, DgError> {
    check_closed_degree_zero(cat, f)?;
    Ok(homotopy_system(cat, f, false).map(|mut v| {
        v.truncate(3);
        let r_y = v.pop().unwrap();
        let r_x = v.pop().unwrap();
        let g = v.pop().unwrap();
        HomotopyWitness { g, r_x, r_y }
    }))
}

/// Like [`is_homotopy_equivalence`], additionally solving for `r_XY` with
/// `f r_X - r_Y f = d(r_XY)`.
pub fn kontsevich_witness(cat: &DgCategory, f: &Morphism) -> Result<Option<KontsevichWitness>, DgError> {
    check_closed_degree_zero(cat, f)?;
    Ok(homotopy_system(cat, f, true).map(|mut v| {
        let r_xy = v.pop().unwrap();
        let r_y = v.pop().unwrap();
        let r_x = v.pop().unwrap();
        let g = v.pop().unwrap();
        KontsevichWitness { g, r_x, r_y, r_xy }
    }))
}

/// Check the three witness equations exactly.
pub fn check_kontsevich(cat: &DgCategory, f: &Morphism, w: &KontsevichWitness) -> bool {
    check_homotopy(cat, f, &w.homotopy()) && {
        let lhs = cat.compose_unchecked(f, &w.r_x).minus(&cat.compose_unchecked(&w.r_y, f));
        lhs == cat.diff(&w.r_xy)
    }
}

pub fn check_homotopy(cat: &DgCategory, f: &Morphism, w: &HomotopyWitness) -> bool {
    let (x, y) = (f.source, f.target);
    cat.is_closed(&w.g)
        && cat.compose_unchecked(&w.g, f) == cat.identity(x).plus(&cat.diff(&w.r_x))
        && cat.compose_unchecked(f, &w.g) == cat.identity(y).plus(&cat.diff(&w.r_y))
}

/// The linearization of the poset `0 < 1 < ... < n`.
pub fn make_k_n(field: Field, n: usize) -> DgCategory {
    let objects: Vec<String> = (0..=n).map(|i| i.to_string()).collect();
    let mut homs = HashMap::new();
    for i in 0..=n {
        for j in i..=n {
            homs.insert((i, j), CochainComplex::zero_differential(field, GradedSpace::new([(0, 1)])));
        }
    }
    let mut comp = CompData::new();
    for i in 0..=n {
        for j in i..=n {
            for k in j..=n {
                comp.insert(
                    (i, j, k),
                    vec![CompEntry { gdeg: 0, gidx: 0, fdeg: 0, fidx: 0, outidx: 0, coef: field.one() }],
                );
            }
        }
    }
    let ids = vec![vec![field.one()]; n + 1];
    DgCategory::new(field, objects, homs, comp, ids).expect("k[n] is well-formed")
}

/// Coordinates of `hom(V, W)^k` for complexes of vector spaces: one block
/// per source degree `j` holding a `dim W^{j+k} x dim V^j` matrix in
/// row-major order.
#[derive(Clone, Debug)]
struct EndoLayout {
    blocks: Vec<(i32, usize, usize, usize)>, // (j, rows, cols, offset)
    total: usize,
}

impl EndoLayout {
    fn new(v: &CochainComplex, w: &CochainComplex, k: i32) -> EndoLayout {
        let mut blocks = Vec::new();
        let mut offset = 0;
        for j in v.space().degrees() {
            let rows = w.dim(j + k);
            let cols = v.dim(j);
            if rows > 0 && cols > 0 {
                blocks.push((j, rows, cols, offset));
                offset += rows * cols;
            }
        }
        EndoLayout { blocks, total: offset }
    }

    fn find(&self, j: i32) -> Option<(usize, usize, usize)> {
        self.blocks.iter().find(|b| b.0 == j).map(|b| (b.1, b.2, b.3))
    }

    fn to_blocks(&self, field: Field, x: &[Scalar]) -> BTreeMap<i32, Matrix> {
        self.blocks
            .iter()
            .map(|&(j, r, c, off)| {
                let rows = (0..r).map(|a| x[off + a * c..off + (a + 1) * c].to_vec()).collect();
                (j, Matrix::from_rows(field, rows, c).expect("block shape"))
            })
            .collect()
    }

    fn gather_blocks(&self, field: Field, m: &BTreeMap<i32, Matrix>) -> Vec<Scalar> {
        let mut x = field.zeros(self.total);
        for &(j, r, c, off) in &self.blocks {
            if let Some(b) = m.get(&j) {
                for a in 0..r {
                    for e in 0..c {
                        x[off + a * c + e] = b.get(a, e).clone();
                    }
                }
            }
        }
        x
    }
}

/// The DG-category whose objects are the given complexes and whose hom
/// complexes are the internal homs of cochain complexes:
/// `hom(V,W)^k = ∏_j Hom(V^j, W^{j+k})`, `d φ = d_W φ - (-1)^k φ d_V`.
pub fn make_endo_category(field: Field, complexes: &[(String, CochainComplex)]) -> Result<DgCategory, DgError> {
    for (name, c) in complexes {
        if c.field() != field {
            return Err(DgError::Input(format!("complex {name} over the wrong field")));
        }
        c.validate().map_err(|e| DgError::Input(format!("complex {name}: {e}")))?;
    }
    let n = complexes.len();
    let objects: Vec<String> = complexes.iter().map(|(s, _)| s.clone()).collect();
    let cx: Vec<&CochainComplex> = complexes.iter().map(|(_, c)| c).collect();

    let hom_range = |v: &CochainComplex, w: &CochainComplex| -> Vec<i32> {
        match (v.space().min_degree(), v.space().max_degree(), w.space().min_degree(), w.space().max_degree()) {
            (Some(vlo), Some(vhi), Some(wlo), Some(whi)) => ((wlo - vhi)..=(whi - vlo)).collect(),
            _ => Vec::new(),
        }
    };

    let mut layouts: HashMap<(usize, usize, i32), EndoLayout> = HashMap::new();
    let mut homs = HashMap::new();
    for x in 0..n {
        for y in 0..n {
            let degs = hom_range(cx[x], cx[y]);
            for &k in &degs {
                layouts.insert((x, y, k), EndoLayout::new(cx[x], cx[y], k));
            }
            let space = GradedSpace::new(degs.iter().map(|&k| (k, layouts[&(x, y, k)].total)));
            let mut d = BTreeMap::new();
            for &k in &degs {
                let src = &layouts[&(x, y, k)];
                let Some(tgt) = layouts.get(&(x, y, k + 1)) else { continue };
                if src.total == 0 || tgt.total == 0 {
                    continue;
                }
                let mut m = Matrix::zeros(field, tgt.total, src.total);
                let sign = field.sign(k.rem_euclid(2) == 1);
                for col in 0..src.total {
                    let mut e = field.zeros(src.total);
                    e[col] = field.one();
                    let phi = src.to_blocks(field, &e);
                    let mut out: BTreeMap<i32, Matrix> = BTreeMap::new();
                    for (&j, b) in &phi {
                        // d_W φ_j : V^j -> W^{j+k+1}
                        let dw = cx[y].d(j + k);
                        let t = dw.mul(b)?;
                        accumulate(&mut out, j, &t, &field.one());
                        // -(-1)^k φ_j d_V^{j-1} : V^{j-1} -> W^{j+k}
                        let dv = cx[x].d(j - 1);
                        let t = b.mul(&dv)?;
                        accumulate(&mut out, j - 1, &t, &-&sign);
                    }
                    m.set_column(col, &tgt.gather_blocks(field, &out));
                }
                d.insert(k, m);
            }
            homs.insert((x, y), CochainComplex::new(field, space, d)?);
        }
    }

    let mut comp = CompData::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let mut entries = Vec::new();
                for q in hom_range(cx[x], cx[y]) {
                    let lf = &layouts[&(x, y, q)];
                    for p in hom_range(cx[y], cx[z]) {
                        let lg = &layouts[&(y, z, p)];
                        let Some(lo) = layouts.get(&(x, z, p + q)) else { continue };
                        for &(jf, _rf, cf, off_f) in &lf.blocks {
                            let jg = jf + q;
                            let Some((rg, cg, off_g)) = lg.find(jg) else { continue };
                            let (_, co, off_o) = lo.find(jf).expect("output block exists");
                            debug_assert_eq!(co, cf);
                            // E_{a,b} ∘ E_{b,e} = E_{a,e}
                            for a in 0..rg {
                                for b in 0..cg {
                                    for e in 0..cf {
                                        entries.push(CompEntry {
                                            gdeg: p,
                                            gidx: off_g + a * cg + b,
                                            fdeg: q,
                                            fidx: off_f + b * cf + e,
                                            outidx: off_o + a * co + e,
                                            coef: field.one(),
                                        });
                                    }
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

    let ids = (0..n)
        .map(|x| match layouts.get(&(x, x, 0)) {
            Some(l) => {
                let blocks: BTreeMap<i32, Matrix> = l
                    .blocks
                    .iter()
                    .map(|&(j, r, _, _)| (j, Matrix::identity(field, r)))
                    .collect();
                l.gather_blocks(field, &blocks)
            }
            None => Vec::new(),
        })
        .collect();
    DgCategory::new(field, objects, homs, comp, ids)
}

fn accumulate(out: &mut BTreeMap<i32, Matrix>, j: i32, t: &Matrix, c: &Scalar) {
    if t.rows() == 0 || t.cols() == 0 {
        return;
    }
    let entry = out.entry(j).or_insert_with(|| Matrix::zeros(t.field(), t.rows(), t.cols()));
    for r in 0..t.rows() {
        for k in 0..t.cols() {
            let v = t.get(r, k);
            if !v.is_zero() {
                let mut cur = entry.get(r, k).clone();
                cur.add_mul(c, v);
                entry.set(r, k, cur);
            }
        }
    }
}
