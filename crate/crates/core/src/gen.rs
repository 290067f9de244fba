//! Seeded random instances: complexes, endomorphism categories, morphisms,
//! families and twisted complexes.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ainfty::{self, FamilyShape, McObject, SubsetFamily, Transformation};
use crate::dg::{self, CochainComplex, DgCategory, GradedSpace, Morphism, ObjectId};
use crate::error::{Error, Result};
use crate::linalg::{self, Field, Matrix, Scalar};
use crate::pretr::{self, TcMorphism, TwistedComplex};

pub type SeededRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn rng(seed: u64, stream: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn small_scalar(field: Field, rng: &mut SeededRng) -> Scalar {
    field.from_i64(rng.gen_range(-2..=2))
}

pub fn nonzero_scalar(field: Field, rng: &mut SeededRng) -> Scalar {
    let v = [-2, -1, 1, 2][rng.gen_range(0..4)];
    field.from_i64(v)
}

pub fn random_vector(field: Field, len: usize, rng: &mut SeededRng) -> Vec<Scalar> {
    (0..len).map(|_| small_scalar(field, rng)).collect()
}

pub fn random_morphism(cat: &DgCategory, x: ObjectId, y: ObjectId, k: i32, rng: &mut SeededRng) -> Morphism {
    Morphism {
        source: x,
        target: y,
        degree: k,
        coords: random_vector(cat.field(), cat.dim(x, y, k), rng),
    }
}

/// A random cycle: a small-integer combination of a kernel basis of `d`.
pub fn random_closed(cat: &DgCategory, x: ObjectId, y: ObjectId, k: i32, rng: &mut SeededRng) -> Morphism {
    let field = cat.field();
    let mut out = cat.zero(x, y, k);
    for v in linalg::kernel(&cat.hom(x, y).d(k)) {
        linalg::axpy(&mut out.coords, &small_scalar(field, rng), &v);
    }
    out
}

pub fn random_exact(cat: &DgCategory, x: ObjectId, y: ObjectId, k: i32, rng: &mut SeededRng) -> Morphism {
    cat.diff(&random_morphism(cat, x, y, k - 1, rng))
}

pub fn random_family(cat: &DgCategory, shape: &FamilyShape, rng: &mut SeededRng) -> SubsetFamily {
    let coords = random_vector(cat.field(), shape.dim(cat), rng);
    shape.from_coords(cat, &coords)
}

/// A random closed degree-0 map `x → y` that is a homotopy equivalence,
/// or `None` after `tries` failed draws.
pub fn random_hoequiv(cat: &DgCategory, x: ObjectId, y: ObjectId, rng: &mut SeededRng, tries: usize) -> Option<Morphism> {
    let field = cat.field();
    let basis = linalg::kernel(&cat.hom(x, y).d(0));
    for _ in 0..tries {
        let mut f = cat.zero(x, y, 0);
        for v in &basis {
            linalg::axpy(&mut f.coords, &small_scalar(field, rng), v);
        }
        if let Ok(Some(_)) = dg::is_homotopy_equivalence(cat, &f) {
            return Some(f);
        }
    }
    None
}

/// A random invertible matrix `L U` (unit triangular factors) and its inverse.
pub fn random_invertible(field: Field, n: usize, rng: &mut SeededRng) -> (Matrix, Matrix) {
    let mut l = Matrix::identity(field, n);
    let mut u = Matrix::identity(field, n);
    for i in 0..n {
        for j in 0..i {
            l.set(i, j, small_scalar(field, rng));
            u.set(j, i, small_scalar(field, rng));
        }
    }
    let p = l.mul(&u).expect("square factors");
    let inv = linalg::inverse(&p).expect("unit triangular product is invertible");
    (p, inv)
}

#[derive(Clone, Copy, Debug)]
enum Atom {
    Class(i32),
    Pair(i32),
}

fn complex_from_atoms(field: Field, atoms: &[Atom], rng: &mut SeededRng) -> CochainComplex {
    let mut dims: BTreeMap<i32, usize> = BTreeMap::new();
    // position of each atom's basis vector(s) in its degrees
    let mut slots = Vec::new();
    for a in atoms {
        match *a {
            Atom::Class(t) => {
                let e = dims.entry(t).or_default();
                slots.push((*e, 0));
                *e += 1;
            }
            Atom::Pair(t) => {
                let lo = *dims.entry(t).or_default();
                *dims.get_mut(&t).unwrap() += 1;
                let hi = *dims.entry(t + 1).or_default();
                *dims.get_mut(&(t + 1)).unwrap() += 1;
                slots.push((lo, hi));
            }
        }
    }
    let mut d: BTreeMap<i32, Matrix> = BTreeMap::new();
    for (a, &(lo, hi)) in atoms.iter().zip(&slots) {
        if let Atom::Pair(t) = *a {
            let m = d.entry(t).or_insert_with(|| Matrix::zeros(field, dims[&(t + 1)], dims[&t]));
            m.set(hi, lo, nonzero_scalar(field, rng));
        }
    }
    let mut p = BTreeMap::new();
    for (&t, &n) in &dims {
        p.insert(t, random_invertible(field, n, rng));
    }
    let d = d
        .into_iter()
        .map(|(t, m)| {
            let conj = p[&(t + 1)].0.mul(&m).and_then(|x| x.mul(&p[&t].1)).expect("shapes agree");
            (t, conj)
        })
        .collect();
    CochainComplex::new(field, GradedSpace::new(dims), d).expect("conjugated atoms form a complex")
}

/// Atoms of a complex supported in `[lo, lo+2]` with at least one
/// cohomology class and at most `max_dim` per degree.
fn random_atoms(lo: i32, max_dim: usize, rng: &mut SeededRng) -> Vec<Atom> {
    loop {
        let mut atoms = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            atoms.push(Atom::Class(rng.gen_range(lo..=lo + 2)));
        }
        for _ in 0..rng.gen_range(0..=2) {
            atoms.push(Atom::Pair(rng.gen_range(lo..=lo + 1)));
        }
        let mut dims: BTreeMap<i32, usize> = BTreeMap::new();
        for a in &atoms {
            match *a {
                Atom::Class(t) => *dims.entry(t).or_default() += 1,
                Atom::Pair(t) => {
                    *dims.entry(t).or_default() += 1;
                    *dims.entry(t + 1).or_default() += 1;
                }
            }
        }
        if dims.values().all(|&v| v <= max_dim) {
            return atoms;
        }
    }
}

pub fn random_complex(field: Field, rng: &mut SeededRng) -> CochainComplex {
    let lo = rng.gen_range(-3..=1);
    let atoms = random_atoms(lo, 2, rng);
    complex_from_atoms(field, &atoms, rng)
}

/// Endomorphism category of three random complexes: `V`, a homotopy
/// equivalent `W` (same classes plus an extra contractible pair, in a new
/// basis) and an unrelated `U`.
pub fn random_endo_category(field: Field, seed: u64) -> DgCategory {
    let mut r = rng(seed, 0);
    let lo = r.gen_range(-3..=1);
    let atoms = random_atoms(lo, 2, &mut r);
    let v = complex_from_atoms(field, &atoms, &mut r);
    let mut w_atoms = atoms.clone();
    w_atoms.push(Atom::Pair(r.gen_range(lo..=lo + 1)));
    let w = complex_from_atoms(field, &w_atoms, &mut r);
    let u = random_complex(field, &mut r);
    dg::make_endo_category(field, &[("V".into(), v), ("W".into(), w), ("U".into(), u)])
        .expect("random complexes are valid")
}

/// Like [`random_endo_category`], but `V` has a class in every degree of
/// `[−2, 2]`, so hom complexes reach far enough for components at high
/// levels to be nonzero.
pub fn random_wide_category(field: Field, seed: u64) -> DgCategory {
    let mut r = rng(seed, 3);
    let mut atoms: Vec<Atom> = (-2..=2).map(Atom::Class).collect();
    atoms.push(Atom::Pair(r.gen_range(-2..=1)));
    let v = complex_from_atoms(field, &atoms, &mut r);
    let mut w_atoms = atoms.clone();
    w_atoms.push(Atom::Pair(r.gen_range(-2..=1)));
    let w = complex_from_atoms(field, &w_atoms, &mut r);
    let u_atoms = vec![Atom::Class(r.gen_range(-1..=1)), Atom::Pair(r.gen_range(-2..=1))];
    let u = complex_from_atoms(field, &u_atoms, &mut r);
    dg::make_endo_category(field, &[("V".into(), v), ("W".into(), w), ("U".into(), u)])
        .expect("random complexes are valid")
}

/// Move a Kontsevich witness for `f` to a random one: `g ↦ g + d u`,
/// `r_X ↦ r_X + u f + d v_X`, `r_Y ↦ r_Y + f u + d v_Y`,
/// `r_XY ↦ r_XY + f v_X − v_Y f`. All three identities are preserved.
pub fn randomize_kontsevich(cat: &DgCategory, f: &Morphism, w: &dg::KontsevichWitness, rng: &mut SeededRng) -> Result<dg::KontsevichWitness> {
    let (x, y) = (f.source, f.target);
    let u = random_morphism(cat, y, x, -1, rng);
    let vx = random_morphism(cat, x, x, -2, rng);
    let vy = random_morphism(cat, y, y, -2, rng);
    Ok(dg::KontsevichWitness {
        g: w.g.plus(&cat.diff(&u)),
        r_x: w.r_x.plus(&cat.compose(&u, f)?).plus(&cat.diff(&vx)),
        r_y: w.r_y.plus(&cat.compose(f, &u)?).plus(&cat.diff(&vy)),
        r_xy: w.r_xy.plus(&cat.compose(f, &vx)?).minus(&cat.compose(&vy, f)?),
    })
}

/// Objects homotopy equivalent to `x`, found by random search (`x` first).
pub fn equivalent_objects(cat: &DgCategory, x: ObjectId, rng: &mut SeededRng) -> Vec<ObjectId> {
    let mut out = vec![x];
    for y in 0..cat.num_objects() {
        if y != x && random_hoequiv(cat, x, y, rng, 4).is_some() {
            out.push(y);
        }
    }
    out
}

/// First object whose identity is a homotopy equivalence, i.e. any object.
pub fn pick_base(cat: &DgCategory, rng: &mut SeededRng) -> Result<ObjectId> {
    if cat.num_objects() == 0 {
        return Err(Error::Generation("category has no objects".into()));
    }
    Ok(rng.gen_range(0..cat.num_objects()))
}

const RETRIES: usize = 8;

fn random_offsets<'a>(cat: &'a DgCategory, rng: &'a mut SeededRng) -> impl FnMut(&FamilyShape, u32) -> Option<Morphism> + 'a {
    move |shape, s| {
        let (x, y, k) = shape.component_hom(s);
        Some(random_morphism(cat, x, y, k, rng))
    }
}

/// A random MC object at level `n`: the constant object on a base object,
/// transported along random homotopy equivalences to objects equivalent to
/// it. Returns the object together with the transport map `cX → (X,f)`.
pub fn generate_mc_with_map(cat: &DgCategory, n: usize, seed: u64) -> Result<Transformation> {
    let mut r = rng(seed, 1);
    for _ in 0..RETRIES {
        let base = pick_base(cat, &mut r)?;
        let pool = equivalent_objects(cat, base, &mut r);
        let targets: Vec<ObjectId> = (0..=n).map(|_| pool[r.gen_range(0..pool.len())]).collect();
        let Some(maps) = targets.iter().map(|&y| random_hoequiv(cat, base, y, &mut r, 8)).collect::<Option<Vec<_>>>() else {
            continue;
        };
        let src = Arc::new(ainfty::constant_object(cat, base, n));
        if let Some(t) = ainfty::transport(cat, &src, &targets, &maps, random_offsets(cat, &mut r))? {
            return Ok(t);
        }
    }
    Err(Error::Generation(format!("no MC object at level {n} after {RETRIES} attempts")))
}

pub fn generate_mc_object(cat: &DgCategory, n: usize, seed: u64) -> Result<McObject> {
    Ok(generate_mc_with_map(cat, n, seed)?.target.as_ref().clone())
}

/// A closed degree-0 homotopy equivalence out of `obj` (full or truncated):
/// a transport to randomly chosen equivalent objects, plus `d_{A∞}` of a
/// random degree −1 family. With probability 1/3 each singleton is the
/// identity, so pure `id + d_{A∞}(u)` instances also occur.
pub fn generate_hoequiv(cat: &DgCategory, obj: &Arc<McObject>, seed: u64) -> Result<Transformation> {
    let mut r = rng(seed, 2);
    for _ in 0..RETRIES {
        let mut targets = Vec::new();
        let mut maps = Vec::new();
        for &x in obj.objects() {
            let pool = equivalent_objects(cat, x, &mut r);
            let y = if r.gen_range(0..3) == 0 { x } else { pool[r.gen_range(0..pool.len())] };
            let m = if y == x && r.gen_bool(0.5) { Some(cat.identity(x)) } else { random_hoequiv(cat, x, y, &mut r, 8) };
            let Some(m) = m else { break };
            targets.push(y);
            maps.push(m);
        }
        if maps.len() != obj.objects().len() {
            continue;
        }
        let Some(t) = ainfty::transport(cat, obj, &targets, &maps, random_offsets(cat, &mut r))? else {
            continue;
        };
        let u = random_family(cat, &t.a.shape.with_degree(-1), &mut r);
        let du = ainfty::dinf_family(cat, &obj.f, &t.target.f, &u);
        return Ok(t.with_family(t.a.plus(&du)));
    }
    Err(Error::Generation("no homotopy equivalence found".into()))
}

/// A random valid one-sided twisted complex: a shifted object, a sum of two
/// objects, the cone of a closed map, or the cone of a boundary `d_TC(h)`
/// between two smaller twisted complexes.
pub fn random_twisted_complex(cat: &DgCategory, rng: &mut SeededRng) -> Result<TwistedComplex> {
    let nobj = cat.num_objects();
    let shift = |r: &mut SeededRng| r.gen_range(-1..=1);
    let basic = |r: &mut SeededRng| -> Result<TwistedComplex> {
        let (x, y) = (r.gen_range(0..nobj), r.gen_range(0..nobj));
        match r.gen_range(0..3) {
            0 => {
                let t = TwistedComplex::single(cat, x);
                Ok(if r.gen_bool(0.5) { t.shifted() } else { t })
            }
            1 => {
                let entries = vec![(x, shift(r)), (y, shift(r))];
                let q = (0..2)
                    .map(|i| (0..2).map(|j| cat.field().zeros(cat.dim(entries[j].0, entries[i].0, 1 + entries[i].1 - entries[j].1))).collect())
                    .collect();
                TwistedComplex::new(cat, entries, q)
            }
            _ => pretr::cone(cat, &random_closed(cat, x, y, 0, r)),
        }
    };
    if rng.gen_bool(0.6) {
        return basic(rng);
    }
    let (s, t) = (basic(rng)?, basic(rng)?);
    let h = random_tc_morphism(cat, &s, &t, -1, rng);
    pretr::cone_tc(cat, &pretr::d_tc(cat, &h)?)
}

pub fn random_tc_morphism(cat: &DgCategory, source: &TwistedComplex, target: &TwistedComplex, degree: i32, rng: &mut SeededRng) -> TcMorphism {
    let mut m = TcMorphism::zero(cat, source, target, degree);
    for c in m.blocks.iter_mut().flatten() {
        *c = random_vector(cat.field(), c.len(), rng);
    }
    m
}
