//! JSON file formats for categories, morphisms, MC objects,
//! transformations, witnesses and twisted complexes.
//!
//! Scalars are strings (`"3/4"`, `"-2"`, or residues mod `p`); subset keys
//! are comma-joined increasing indices such as `"0,2"`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::ainfty::{parse_subset_key, subset_key, FamilyShape, Mask, McObject, SubsetFamily, Transformation};
use crate::dg::{CochainComplex, CompEntry, DgCategory, GradedSpace, KontsevichWitness, Morphism, ObjectId};
use crate::error::{Error, Result};
use crate::linalg::{Field, Matrix, Scalar};
use crate::pretr::{TcMorphism, TwistedComplex};

/// Largest simplex level accepted in files.
pub const MAX_LEVEL: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomDims {
    pub dims: BTreeMap<i32, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompEntryFile {
    pub gdeg: i32,
    pub gidx: usize,
    pub fdeg: i32,
    pub fidx: usize,
    pub outidx: usize,
    pub coef: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryFile {
    pub field: Field,
    pub objects: Vec<String>,
    pub hom: BTreeMap<String, HomDims>,
    #[serde(default)]
    pub d: BTreeMap<String, BTreeMap<i32, Vec<Vec<String>>>>,
    #[serde(default)]
    pub comp: BTreeMap<String, Vec<CompEntryFile>>,
    pub id: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismFile {
    pub source: String,
    pub target: String,
    pub degree: i32,
    pub coords: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McObjectFile {
    pub n: usize,
    pub objects: Vec<String>,
    pub degree: i32,
    pub components: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub source: McObjectFile,
    pub target: McObjectFile,
}

/// A transformation with its object tuples, plus the full endpoint objects.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformationFile {
    pub n: usize,
    pub degree: i32,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub components: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub truncated: bool,
    pub endpoints: Endpoints,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessFile {
    pub g: MorphismFile,
    pub r_x: MorphismFile,
    pub r_y: MorphismFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_xy: Option<MorphismFile>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryFile {
    pub object: String,
    pub shift: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistedComplexFile {
    pub entries: Vec<EntryFile>,
    #[serde(default)]
    pub q: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcMorphismFile {
    pub source: TwistedComplexFile,
    pub target: TwistedComplexFile,
    pub degree: i32,
    #[serde(default)]
    pub blocks: BTreeMap<String, Vec<String>>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn fmt_err(what: &str, detail: impl std::fmt::Display) -> Error {
    Error::Format(format!("{what}: {detail}"))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| fmt_err("json", e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file types serialize");
    s.push('\n');
    s
}

fn scalars(field: Field, v: &[String]) -> Result<Vec<Scalar>> {
    v.iter().map(|s| field.parse(s).map_err(Error::from)).collect()
}

fn strings(v: &[Scalar]) -> Vec<String> {
    v.iter().map(Scalar::to_string).collect()
}

fn object(cat: &DgCategory, name: &str) -> Result<ObjectId> {
    cat.object_id(name).ok_or_else(|| fmt_err("unknown object", name))
}

fn objects(cat: &DgCategory, names: &[String]) -> Result<Vec<ObjectId>> {
    names.iter().map(|n| object(cat, n)).collect()
}

fn names(cat: &DgCategory, ids: &[ObjectId]) -> Vec<String> {
    ids.iter().map(|&x| cat.name(x).to_string()).collect()
}

fn split_names(key: &str, parts: usize) -> Result<Vec<&str>> {
    let v: Vec<&str> = key.split("->").map(str::trim).collect();
    if v.len() != parts {
        return Err(fmt_err("bad key", key));
    }
    Ok(v)
}

/// Index pairs like `"0,1"` (block row, block column).
fn pair_key(key: &str) -> Result<(usize, usize)> {
    let (a, b) = key.split_once(',').ok_or_else(|| fmt_err("bad block key", key))?;
    let p = |s: &str| s.trim().parse::<usize>().map_err(|_| fmt_err("bad block key", key));
    Ok((p(a)?, p(b)?))
}

// ---------------------------------------------------------------- categories

pub fn category_to_file(cat: &DgCategory) -> CategoryFile {
    let n = cat.num_objects();
    let mut hom = BTreeMap::new();
    let mut d = BTreeMap::new();
    let mut comp = BTreeMap::new();
    for x in 0..n {
        for y in 0..n {
            let key = format!("{}->{}", cat.name(x), cat.name(y));
            let h = cat.hom(x, y);
            hom.insert(key.clone(), HomDims { dims: h.space().dims().clone() });
            let mats: BTreeMap<i32, Vec<Vec<String>>> = h
                .stored_differentials()
                .iter()
                .filter(|(_, m)| !m.is_zero())
                .map(|(&k, m)| (k, (0..m.rows()).map(|r| strings(m.row(r))).collect()))
                .collect();
            if !mats.is_empty() {
                d.insert(key, mats);
            }
            for z in 0..n {
                let entries = cat.comp_entries(x, y, z);
                if entries.is_empty() {
                    continue;
                }
                let key = format!("{}->{}->{}", cat.name(x), cat.name(y), cat.name(z));
                let list = entries
                    .iter()
                    .map(|e| CompEntryFile {
                        gdeg: e.gdeg,
                        gidx: e.gidx,
                        fdeg: e.fdeg,
                        fidx: e.fidx,
                        outidx: e.outidx,
                        coef: e.coef.to_string(),
                    })
                    .collect();
                comp.insert(key, list);
            }
        }
    }
    let id = (0..n).map(|x| (cat.name(x).to_string(), strings(cat.identity_coords(x)))).collect();
    CategoryFile { field: cat.field(), objects: cat.objects().to_vec(), hom, d, comp, id }
}

pub fn category_from_file(file: &CategoryFile) -> Result<DgCategory> {
    let field = file.field;
    let index: HashMap<&str, ObjectId> = file.objects.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let look = |name: &str| index.get(name).copied().ok_or_else(|| fmt_err("unknown object", name));
    let mut spaces = HashMap::new();
    for (key, h) in &file.hom {
        let v = split_names(key, 2)?;
        spaces.insert((look(v[0])?, look(v[1])?), GradedSpace::new(h.dims.clone()));
    }
    let mut homs = HashMap::new();
    for ((x, y), space) in &spaces {
        let key = format!("{}->{}", file.objects[*x], file.objects[*y]);
        let mut d = BTreeMap::new();
        for (&k, rows) in file.d.get(&key).into_iter().flatten() {
            let rows = rows.iter().map(|r| scalars(field, r)).collect::<Result<Vec<_>>>()?;
            if rows.len() != space.dim(k + 1) {
                return Err(fmt_err("differential", format!("{key} in degree {k} has {} rows", rows.len())));
            }
            d.insert(k, Matrix::from_rows(field, rows, space.dim(k))?);
        }
        homs.insert((*x, *y), CochainComplex::new(field, space.clone(), d)?);
    }
    for key in file.d.keys() {
        let v = split_names(key, 2)?;
        if !spaces.contains_key(&(look(v[0])?, look(v[1])?)) {
            return Err(fmt_err("differential for a missing hom", key));
        }
    }
    let mut comp = HashMap::new();
    for (key, list) in &file.comp {
        let v = split_names(key, 3)?;
        let entries = list
            .iter()
            .map(|e| {
                Ok(CompEntry {
                    gdeg: e.gdeg,
                    gidx: e.gidx,
                    fdeg: e.fdeg,
                    fidx: e.fidx,
                    outidx: e.outidx,
                    coef: field.parse(&e.coef)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        comp.insert((look(v[0])?, look(v[1])?, look(v[2])?), entries);
    }
    let ids = file
        .objects
        .iter()
        .map(|x| scalars(field, file.id.get(x).ok_or_else(|| fmt_err("missing identity", x))?))
        .collect::<Result<Vec<_>>>()?;
    if file.id.len() != file.objects.len() {
        return Err(fmt_err("identities", "entries for unknown objects"));
    }
    Ok(DgCategory::new(field, file.objects.clone(), homs, comp, ids)?)
}

pub fn read_category(text: &str) -> Result<DgCategory> {
    category_from_file(&parse_json(text)?)
}

pub fn write_category(cat: &DgCategory) -> String {
    to_json(&category_to_file(cat))
}

// ----------------------------------------------------------------- morphisms

pub fn morphism_to_file(cat: &DgCategory, f: &Morphism) -> MorphismFile {
    MorphismFile {
        source: cat.name(f.source).into(),
        target: cat.name(f.target).into(),
        degree: f.degree,
        coords: strings(&f.coords),
    }
}

pub fn morphism_from_file(cat: &DgCategory, file: &MorphismFile) -> Result<Morphism> {
    let (x, y) = (object(cat, &file.source)?, object(cat, &file.target)?);
    Ok(cat.morphism(x, y, file.degree, scalars(cat.field(), &file.coords)?)?)
}

pub fn witness_to_file(cat: &DgCategory, w: &KontsevichWitness) -> WitnessFile {
    WitnessFile {
        g: morphism_to_file(cat, &w.g),
        r_x: morphism_to_file(cat, &w.r_x),
        r_y: morphism_to_file(cat, &w.r_y),
        r_xy: Some(morphism_to_file(cat, &w.r_xy)),
    }
}

/// A Kontsevich witness; `r_xy` must be present.
pub fn witness_from_file(cat: &DgCategory, file: &WitnessFile) -> Result<KontsevichWitness> {
    let r_xy = file.r_xy.as_ref().ok_or_else(|| fmt_err("witness", "r_xy is required"))?;
    Ok(KontsevichWitness {
        g: morphism_from_file(cat, &file.g)?,
        r_x: morphism_from_file(cat, &file.r_x)?,
        r_y: morphism_from_file(cat, &file.r_y)?,
        r_xy: morphism_from_file(cat, r_xy)?,
    })
}

// ------------------------------------------------------------------ families

fn components_to_file(phi: &SubsetFamily) -> BTreeMap<String, Vec<String>> {
    phi.components().map(|(s, c)| (subset_key(s), strings(c))).collect()
}

fn family_from_file(cat: &DgCategory, shape: FamilyShape, comps: &BTreeMap<String, Vec<String>>) -> Result<SubsetFamily> {
    let mut phi = shape.zero();
    for (key, coords) in comps {
        let s = parse_subset_key(key, shape.n).ok_or_else(|| fmt_err("bad subset key", key))?;
        if !shape.admits(s) {
            return Err(fmt_err("subset not admissible here", key));
        }
        let (x, y, k) = shape.component_hom(s);
        phi.set(s, cat.morphism(x, y, k, scalars(cat.field(), coords)?)?)?;
    }
    Ok(phi)
}

fn check_level(n: usize) -> Result<()> {
    if n > MAX_LEVEL {
        return Err(fmt_err("level", format!("{n} exceeds {MAX_LEVEL}")));
    }
    Ok(())
}

fn mask(base: Mask, truncated: bool) -> Mask {
    if truncated {
        base.truncated()
    } else {
        base
    }
}

pub fn mc_to_file(cat: &DgCategory, obj: &McObject) -> McObjectFile {
    McObjectFile {
        n: obj.n(),
        objects: names(cat, obj.objects()),
        degree: 1,
        components: components_to_file(&obj.f),
        truncated: obj.is_truncated(),
    }
}

pub fn mc_from_file(cat: &DgCategory, file: &McObjectFile) -> Result<McObject> {
    check_level(file.n)?;
    if file.degree != 1 {
        return Err(fmt_err("MC object", "degree must be 1"));
    }
    let objs = objects(cat, &file.objects)?;
    if objs.len() != file.n + 1 {
        return Err(fmt_err("MC object", format!("level {} needs {} objects", file.n, file.n + 1)));
    }
    let shape = FamilyShape { n: file.n, degree: 1, source: objs.clone(), target: objs, mask: mask(Mask::MC, file.truncated) };
    McObject::new(cat, family_from_file(cat, shape, &file.components)?)
}

pub fn transformation_to_file(cat: &DgCategory, a: &Transformation) -> TransformationFile {
    TransformationFile {
        n: a.n(),
        degree: a.degree(),
        source: names(cat, a.source.objects()),
        target: names(cat, a.target.objects()),
        components: components_to_file(&a.a),
        truncated: a.is_truncated(),
        endpoints: Endpoints { source: mc_to_file(cat, &a.source), target: mc_to_file(cat, &a.target) },
    }
}

pub fn transformation_from_file(cat: &DgCategory, file: &TransformationFile) -> Result<Transformation> {
    check_level(file.n)?;
    let source = Arc::new(mc_from_file(cat, &file.endpoints.source)?);
    let target = Arc::new(mc_from_file(cat, &file.endpoints.target)?);
    let shape = FamilyShape {
        n: file.n,
        degree: file.degree,
        source: objects(cat, &file.source)?,
        target: objects(cat, &file.target)?,
        mask: mask(Mask::TRANSFORMATION, file.truncated),
    };
    if shape.source.len() != file.n + 1 || shape.target.len() != file.n + 1 {
        return Err(fmt_err("transformation", "object tuples have the wrong length"));
    }
    Transformation::new(cat, source, target, family_from_file(cat, shape, &file.components)?)
}

// --------------------------------------------------------- twisted complexes

pub fn twisted_to_file(cat: &DgCategory, t: &TwistedComplex) -> TwistedComplexFile {
    let mut q = BTreeMap::new();
    for (i, row) in t.q.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if !crate::linalg::is_zero_vec(c) {
                q.insert(format!("{i},{j}"), strings(c));
            }
        }
    }
    TwistedComplexFile {
        entries: t.entries.iter().map(|&(x, r)| EntryFile { object: cat.name(x).into(), shift: r }).collect(),
        q,
    }
}

fn blocks_from_file(
    cat: &DgCategory,
    rows: usize,
    cols: usize,
    mut zero: impl FnMut(usize, usize) -> usize,
    given: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<Vec<Vec<Scalar>>>> {
    let mut out: Vec<Vec<Vec<Scalar>>> = (0..rows).map(|i| (0..cols).map(|j| cat.field().zeros(zero(i, j))).collect()).collect();
    for (key, coords) in given {
        let (i, j) = pair_key(key)?;
        if i >= rows || j >= cols {
            return Err(fmt_err("block out of range", key));
        }
        let v = scalars(cat.field(), coords)?;
        if v.len() != out[i][j].len() {
            return Err(fmt_err("block has the wrong dimension", key));
        }
        out[i][j] = v;
    }
    Ok(out)
}

pub fn twisted_from_file(cat: &DgCategory, file: &TwistedComplexFile) -> Result<TwistedComplex> {
    let entries = file.entries.iter().map(|e| Ok((object(cat, &e.object)?, e.shift))).collect::<Result<Vec<_>>>()?;
    let n = entries.len();
    let q = blocks_from_file(
        cat,
        n,
        n,
        |i, j| cat.dim(entries[j].0, entries[i].0, 1 + entries[i].1 - entries[j].1),
        &file.q,
    )?;
    TwistedComplex::new(cat, entries, q)
}

pub fn tc_morphism_to_file(cat: &DgCategory, f: &TcMorphism) -> TcMorphismFile {
    let mut blocks = BTreeMap::new();
    for (i, row) in f.blocks.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if !crate::linalg::is_zero_vec(c) {
                blocks.insert(format!("{i},{j}"), strings(c));
            }
        }
    }
    TcMorphismFile {
        source: twisted_to_file(cat, &f.source),
        target: twisted_to_file(cat, &f.target),
        degree: f.degree,
        blocks,
    }
}

pub fn tc_morphism_from_file(cat: &DgCategory, file: &TcMorphismFile) -> Result<TcMorphism> {
    let source = twisted_from_file(cat, &file.source)?;
    let target = twisted_from_file(cat, &file.target)?;
    let zero = TcMorphism::zero(cat, &source, &target, file.degree);
    let blocks = blocks_from_file(cat, target.len(), source.len(), |i, j| zero.blocks[i][j].len(), &file.blocks)?;
    Ok(TcMorphism { blocks, ..zero })
}

// -------------------------------------------------------------- file kinds

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Category,
    Morphism,
    McObject,
    Transformation,
    Witness,
    TwistedComplex,
    TcMorphism,
}

/// Guess a file's kind from its top-level keys.
pub fn detect_kind(text: &str) -> Result<FileKind> {
    let v: serde_json::Value = parse_json(text)?;
    let obj = v.as_object().ok_or_else(|| fmt_err("file", "top level must be an object"))?;
    let has = |k: &str| obj.contains_key(k);
    Ok(if has("hom") {
        FileKind::Category
    } else if has("entries") {
        FileKind::TwistedComplex
    } else if has("blocks") || (has("source") && obj["source"].is_object()) {
        FileKind::TcMorphism
    } else if has("endpoints") {
        FileKind::Transformation
    } else if has("components") {
        FileKind::McObject
    } else if has("r_x") {
        FileKind::Witness
    } else if has("coords") {
        FileKind::Morphism
    } else {
        return Err(fmt_err("file", "unrecognized kind"));
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    #[test]
    fn category_files_reproduce_the_category() {
        for field in [Field::Rational, Field::prime(65537).unwrap()] {
            let c = gen::random_endo_category(field, 3);
            let text = write_category(&c);
            let back = read_category(&text).unwrap();
            assert_eq!(write_category(&back), text);
            assert_eq!(detect_kind(&text).unwrap(), FileKind::Category);
            for x in 0..3 {
                assert_eq!(back.identity(x), c.identity(x));
            }
        }
    }

    #[test]
    fn field_and_scalar_encodings() {
        assert_eq!(serde_json::to_string(&Field::Rational).unwrap(), "\"Q\"");
        assert_eq!(serde_json::to_string(&Field::prime(7).unwrap()).unwrap(), "{\"Fp\":7}");
        let q = Field::Rational.parse("-6/4").unwrap();
        assert_eq!(q.to_string(), "-3/2");
        assert_eq!(Field::prime(7).unwrap().parse("-1").unwrap().to_string(), "6");
    }

    #[test]
    fn mc_and_transformation_files() {
        let c = gen::random_endo_category(Field::Rational, 5);
        let x = Arc::new(gen::generate_mc_object(&c, 2, 5).unwrap());
        let a = gen::generate_hoequiv(&c, &x, 5).unwrap();
        let file = transformation_to_file(&c, &a);
        assert_eq!(transformation_from_file(&c, &file).unwrap(), a);
        let t = crate::reedy::truncate(&a);
        let tf = transformation_to_file(&c, &t);
        assert!(tf.truncated && !tf.components.contains_key("0,1,2"));
        assert_eq!(transformation_from_file(&c, &tf).unwrap(), t);
        let mut bad = mc_to_file(&c, &t.source);
        bad.components.insert("0,1,2".into(), vec!["1".into()]);
        assert!(mc_from_file(&c, &bad).is_err());
        assert_eq!(detect_kind(&to_json(&file)).unwrap(), FileKind::Transformation);
        assert_eq!(detect_kind(&to_json(&mc_to_file(&c, &x))).unwrap(), FileKind::McObject);
    }

    #[test]
    fn twisted_files() {
        let c = gen::random_endo_category(Field::Rational, 6);
        let mut r = gen::rng(6, 0);
        let s = gen::random_twisted_complex(&c, &mut r).unwrap();
        let t = gen::random_twisted_complex(&c, &mut r).unwrap();
        assert_eq!(twisted_from_file(&c, &twisted_to_file(&c, &s)).unwrap(), s);
        let f = gen::random_tc_morphism(&c, &s, &t, 0, &mut r);
        let file = tc_morphism_to_file(&c, &f);
        assert_eq!(tc_morphism_from_file(&c, &file).unwrap(), f);
        assert_eq!(detect_kind(&to_json(&file)).unwrap(), FileKind::TcMorphism);
        assert_eq!(detect_kind(&to_json(&twisted_to_file(&c, &s))).unwrap(), FileKind::TwistedComplex);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let c = gen::random_endo_category(Field::Rational, 1);
        let mut file = category_to_file(&c);
        let key = file.comp.keys().next().unwrap().clone();
        file.comp.get_mut(&key).unwrap()[0].outidx = 99;
        assert!(category_from_file(&file).is_err());
        assert!(read_category("{").is_err());
        assert!(read_category("{\"field\":\"Q\"}").is_err());
        let m = MorphismFile { source: "V".into(), target: "nope".into(), degree: 0, coords: vec![] };
        assert!(morphism_from_file(&c, &m).is_err());
    }
}
