//! Matching objects `M_nF(A)` as truncated data, the matching map `m_n`,
//! and the explicit lifts that make `m_n` a Dwyer–Kan fibration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ainfty::{
    self, circ_at, delta_at, dinf, full, is_hoequiv_fn, mc_defect, singleton, transformation_shape, Mask,
    McObject, SubsetFamily, Transformation,
};
use crate::dg::{self, DgCategory, HomotopyWitness, KontsevichWitness, Morphism};
use crate::linalg::Scalar;
use crate::error::{Error, Result};
use crate::gen;

/// Drop the top component of an object.
pub fn truncate_object(obj: &McObject) -> McObject {
    McObject { f: obj.f.restrict(obj.f.mask().truncated()) }
}

/// `m_n` on morphisms: drop the top component and truncate both endpoints.
pub fn truncate(a: &Transformation) -> Transformation {
    Transformation {
        source: Arc::new(truncate_object(&a.source)),
        target: Arc::new(truncate_object(&a.target)),
        a: a.a.restrict(a.a.mask().truncated()),
    }
}

/// A preimage of a truncated `a` under `m_n` between the given full
/// endpoints, with top component 0.
pub fn hom_lift_zero(source: &Arc<McObject>, target: &Arc<McObject>, a: &Transformation) -> Result<Transformation> {
    if *a.source != truncate_object(source) || *a.target != truncate_object(target) {
        return Err(Error::Shape("endpoints do not truncate to the endpoints of the map".into()));
    }
    let mut fam = transformation_shape(source, target, a.degree()).zero();
    for (s, c) in a.a.components() {
        fam.set_coords(s, c.clone());
    }
    Ok(Transformation { source: source.clone(), target: target.clone(), a: fam })
}

/// One sign per term of each lift formula. A term `X·r` with a homotopy
/// factor `r` also carries the Koszul sign `(−1)^{|X||r|}`, so the scheme
/// itself does not depend on the level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignScheme {
    /// `[Δa·ā₀, (a∘f)·ā₀, (g∘′a)·ā₀, (Δg + g∘g)·r_Y]`
    pub object: [i8; 4],
    /// `[Δa·r_X, (a∘f)·r_X, (g∘′a)·r_X, (Δg + g∘g)·r_XY]`
    pub morphism: [i8; 4],
    /// Contraction lift, see [`crate::pretr::contraction_lift`].
    pub contraction: [i8; 3],
    /// `d g_top = ε (Δg + g∘g)_top`.
    pub orientation: i8,
}

impl SignScheme {
    /// The scheme `calibrate_signs` finds for the conventions of this crate.
    pub const REFERENCE: SignScheme = SignScheme {
        object: [-1, 1, -1, 1],
        morphism: [1, -1, 1, 1],
        contraction: [-1, -1, -1],
        orientation: -1,
    };

    pub const TERMS: usize = 12;

    pub fn get(&self, term: usize) -> i8 {
        match term {
            0..=3 => self.object[term],
            4..=7 => self.morphism[term - 4],
            8..=10 => self.contraction[term - 8],
            11 => self.orientation,
            _ => panic!("sign term {term} out of range"),
        }
    }

    /// The same scheme with sign `term` (0..12, in field order) flipped.
    pub fn flipped(&self, term: usize) -> SignScheme {
        let mut s = *self;
        let slot = match term {
            0..=3 => &mut s.object[term],
            4..=7 => &mut s.morphism[term - 4],
            8..=10 => &mut s.contraction[term - 8],
            11 => &mut s.orientation,
            _ => panic!("sign term {term} out of range"),
        };
        *slot = -*slot;
        s
    }

    pub fn term_name(term: usize) -> &'static str {
        [
            "object.delta_a",
            "object.a_f",
            "object.g_a",
            "object.mc",
            "morphism.delta_a",
            "morphism.a_f",
            "morphism.g_a",
            "morphism.mc",
            "contraction.0",
            "contraction.1",
            "contraction.2",
            "orientation",
        ][term]
    }
}

fn parity_sign(cat: &DgCategory, eps: i8, koszul: i32) -> crate::linalg::Scalar {
    cat.field().sign((eps < 0) != (koszul.rem_euclid(2) == 1))
}

/// The four top-subset terms shared by both lifts: `Δa`, `a∘f`, `g∘′a` and
/// `Δg + g∘g`, where `g` may be truncated or full.
fn top_terms(cat: &DgCategory, f: &SubsetFamily, g: &SubsetFamily, a: &SubsetFamily) -> [Morphism; 4] {
    let s = full(a.n());
    let mc = delta_at(cat, g, s).plus(&circ_at(cat, g, g, s, false));
    [delta_at(cat, a, s), circ_at(cat, a, f, s, false), circ_at(cat, g, a, s, true), mc]
}

fn check_lift_inputs(cat: &DgCategory, full_source: &McObject, a: &Transformation) -> Result<()> {
    if full_source.is_truncated() {
        return Err(Error::Invalid("source must be a full object".into()));
    }
    if !mc_defect(cat, full_source).is_zero() {
        return Err(Error::Invalid("source does not satisfy Maurer–Cartan".into()));
    }
    if !a.is_truncated() || *a.source != truncate_object(full_source) {
        return Err(Error::Shape("map must start at the truncation of the source".into()));
    }
    if a.degree() != 0 || !dinf(cat, a).a.is_zero() {
        return Err(Error::NotClosed("map must be closed of degree 0".into()));
    }
    Ok(())
}

fn calibration(stage: &str, detail: impl Into<String>) -> Error {
    Error::Calibration { stage: stage.into(), detail: detail.into() }
}

/// The object-lift terms `[Δa·ā₀, (a∘f)·ā₀, (g∘′a)·ā₀, ±(Δg + g∘g)·r_Y]`
/// with their Koszul signs, and `Φ = (Δg + g∘g)_top`.
fn object_parts(
    cat: &DgCategory,
    source: &McObject,
    target: &McObject,
    a: &Transformation,
    w: &HomotopyWitness,
) -> Result<(Vec<Morphism>, Morphism)> {
    let [da, af, ga, phi] = top_terms(cat, &source.f, &target.f, &a.a);
    let mut parts = Vec::with_capacity(4);
    for t in [&da, &af, &ga] {
        parts.push(cat.compose(t, &w.g)?);
    }
    parts.push(cat.compose(&phi, &w.r_y)?.scaled(&parity_sign(cat, 1, phi.degree)));
    Ok((parts, phi))
}

/// The morphism-lift terms `[±Δa·r_X, ±(a∘f)·r_X, ±(g∘′a)·r_X, (Δg + g∘g)·r_XY]`.
fn morphism_parts(
    cat: &DgCategory,
    source: &McObject,
    lifted_target: &McObject,
    a: &Transformation,
    kw: &KontsevichWitness,
) -> Result<Vec<Morphism>> {
    let [da, af, ga, phi] = top_terms(cat, &source.f, &lifted_target.f, &a.a);
    let mut parts = Vec::with_capacity(4);
    for t in [&da, &af, &ga] {
        parts.push(cat.compose(t, &kw.r_x)?.scaled(&parity_sign(cat, 1, t.degree)));
    }
    parts.push(cat.compose(&phi, &kw.r_xy)?);
    Ok(parts)
}

pub(crate) fn signed_sum(cat: &DgCategory, parts: &[Morphism], signs: &[i8]) -> Morphism {
    let mut out = parts[0].scaled(&cat.field().zero());
    for (p, &e) in parts.iter().zip(signs) {
        out.add_scaled(&parity_sign(cat, e, 0), p);
    }
    out
}

/// Whether `base + Σ ε_i v_i = 0`, for testing many sign choices against a
/// linear identity at the top subset.
pub(crate) struct SignedIdentity {
    base: Vec<Scalar>,
    terms: Vec<Vec<Scalar>>,
}

impl SignedIdentity {
    pub(crate) fn new(base: &Morphism, terms: &[Morphism]) -> SignedIdentity {
        SignedIdentity { base: base.coords.clone(), terms: terms.iter().map(|t| t.coords.clone()).collect() }
    }

    pub(crate) fn holds(&self, cat: &DgCategory, signs: &[i8]) -> bool {
        let mut v = self.base.clone();
        for (t, &e) in self.terms.iter().zip(signs) {
            crate::linalg::axpy(&mut v, &parity_sign(cat, e, 0), t);
        }
        crate::linalg::is_zero_vec(&v)
    }
}

/// Extend a truncated target `(Y,g)` to a full MC object using a closed
/// degree-0 `a: m_n(X,f) → (Y,g)` and a homotopy inverse `ā₀` of `a₀` with
/// `a₀ā₀ = 1 + d r_Y`.
pub fn lift_object(
    cat: &DgCategory,
    full_source: &McObject,
    target: &McObject,
    a: &Transformation,
    w: &HomotopyWitness,
    scheme: &SignScheme,
) -> Result<McObject> {
    check_lift_inputs(cat, full_source, a)?;
    if *a.target != *target {
        return Err(Error::Shape("map must end at the target".into()));
    }
    let a0 = a.component(cat, singleton(0));
    if !dg::check_homotopy(cat, &a0, w) {
        return Err(Error::Invalid("witness does not invert a_0".into()));
    }
    let n = a.n();
    let s = full(n);
    let (parts, phi) = object_parts(cat, full_source, target, a, w)?;
    let top = signed_sum(cat, &parts, &scheme.object);

    if cat.diff(&top) != phi.scaled(&parity_sign(cat, scheme.orientation, 0)) {
        return Err(calibration("orientation", "d g_top differs from the oriented Maurer–Cartan term"));
    }
    let mut f = target.f.shape.with_mask(Mask::MC).zero();
    for (t, c) in target.f.components() {
        f.set_coords(t, c.clone());
    }
    f.set(s, top)?;
    let out = McObject { f };
    let defect = mc_defect(cat, &out);
    if !defect.is_zero() {
        let keys: Vec<String> = defect.components().map(|(t, _)| ainfty::subset_key(t)).collect();
        return Err(calibration("lift_object", format!("Maurer–Cartan fails at {{{}}}", keys.join("},{"))));
    }
    if n == 1 && dg::is_homotopy_equivalence(cat, &out.edge(cat, 0, 1))?.is_none() {
        return Err(calibration("lift_object", "lifted edge is not a homotopy equivalence"));
    }
    Ok(out)
}

/// The closed lift of `a` to `full_source → lifted_target`, given a
/// Kontsevich witness for `a₀` (the one whose `ā₀, r_Y` built the target).
pub fn lift_morphism(
    cat: &DgCategory,
    full_source: &Arc<McObject>,
    lifted_target: &Arc<McObject>,
    a: &Transformation,
    kw: &KontsevichWitness,
    scheme: &SignScheme,
) -> Result<Transformation> {
    check_lift_inputs(cat, full_source, a)?;
    if *a.target != truncate_object(lifted_target) {
        return Err(Error::Shape("lifted target does not truncate to the target of the map".into()));
    }
    let a0 = a.component(cat, singleton(0));
    if !dg::check_kontsevich(cat, &a0, kw) {
        return Err(Error::Invalid("not a Kontsevich witness for a_0".into()));
    }
    let n = a.n();
    let top = signed_sum(cat, &morphism_parts(cat, full_source, lifted_target, a, kw)?, &scheme.morphism);

    let mut fam = hom_lift_zero(full_source, lifted_target, a)?;
    fam.a.set(full(n), top)?;
    if !dinf(cat, &fam).a.is_zero() {
        let keys: Vec<String> = dinf(cat, &fam).a.components().map(|(t, _)| ainfty::subset_key(t)).collect();
        return Err(calibration("lift_morphism", format!("d_A∞ of the lift is nonzero at {{{}}}", keys.join("},{"))));
    }
    if truncate(&fam) != *a {
        return Err(calibration("lift_morphism", "truncation of the lift differs from the input"));
    }
    Ok(fam)
}

/// A lifting problem: a full source, a closed homotopy equivalence out of
/// its truncation, and a Kontsevich witness for the first component.
#[derive(Clone, Debug)]
pub struct LiftInstance {
    pub source: Arc<McObject>,
    pub a: Transformation,
    pub kw: KontsevichWitness,
}

pub fn generate_instance(cat: &DgCategory, n: usize, seed: u64) -> Result<LiftInstance> {
    let source = Arc::new(gen::generate_mc_object(cat, n, seed)?);
    let trunc = Arc::new(truncate_object(&source));
    let a = gen::generate_hoequiv(cat, &trunc, seed)?;
    let a0 = a.component(cat, singleton(0));
    let kw = dg::kontsevich_witness(cat, &a0)?
        .ok_or_else(|| Error::Generation("first component is not a homotopy equivalence".into()))?;
    let kw = gen::randomize_kontsevich(cat, &a0, &kw, &mut gen::rng(seed, 6))?;
    Ok(LiftInstance { source, a, kw })
}

/// Run both lifts on an instance.
pub fn lift_instance(cat: &DgCategory, inst: &LiftInstance, scheme: &SignScheme) -> Result<(Arc<McObject>, Transformation)> {
    let y = lift_object(cat, &inst.source, &inst.a.target, &inst.a, &inst.kw.homotopy(), scheme)?;
    let y = Arc::new(y);
    let lift = lift_morphism(cat, &inst.source, &y, &inst.a, &inst.kw, scheme)?;
    Ok((y, lift))
}

/// Seed of trial `i` in a run seeded by `seed`.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub const BATTERY: usize = 50;

/// Levels used by the calibration battery for a requested level `n`.
pub fn battery_levels(n: usize) -> Vec<usize> {
    (1..=n.max(3)).collect()
}

pub fn calibration_battery(cat: &DgCategory, n: usize, seed: u64) -> Result<Vec<LiftInstance>> {
    let levels = battery_levels(n);
    (0..BATTERY).map(|i| generate_instance(cat, levels[i % levels.len()], trial_seed(seed, i))).collect()
}

fn all_signs<const K: usize>() -> Vec<[i8; K]> {
    (0..1u32 << K)
        .map(|bits| std::array::from_fn(|i| if bits >> i & 1 == 1 { -1 } else { 1 }))
        .collect()
}

fn unique<T: Copy + std::fmt::Debug>(stage: &str, survivors: Vec<T>) -> Result<T> {
    match survivors.as_slice() {
        [one] => Ok(*one),
        [] => Err(calibration(stage, "no sign choice satisfies the battery")),
        many => Err(calibration(stage, format!("{} sign choices survive: {many:?}", many.len()))),
    }
}

/// Exhaustive search for the sign scheme under which both lifts and the
/// contraction lift succeed on every battery instance.
///
/// Each instance is validated once. Only the top component depends on the
/// signs and its defining identity is linear in them, so candidates are
/// screened on that identity; the surviving scheme is then confirmed by
/// running the actual lifts on the whole battery.
pub fn calibrate_signs(cat: &DgCategory, n: usize, seed: u64) -> Result<SignScheme> {
    let battery = calibration_battery(cat, n, seed)?;
    let base = SignScheme::REFERENCE;

    let mut mc = Vec::new();
    let mut oriented = Vec::new();
    let mut edge_cases = Vec::new();
    for inst in &battery {
        check_lift_inputs(cat, &inst.source, &inst.a)?;
        let (parts, phi) = object_parts(cat, &inst.source, &inst.a.target, &inst.a, &inst.kw.homotopy())?;
        let dparts: Vec<Morphism> = parts.iter().map(|p| cat.diff(p)).collect();
        mc.push(SignedIdentity::new(&phi, &dparts));
        let mut with_phi = dparts.clone();
        with_phi.push(phi.clone());
        oriented.push(SignedIdentity::new(&phi.scaled(&cat.field().zero()), &with_phi));
        if inst.a.n() == 1 {
            edge_cases.push(inst);
        }
    }
    let mut object_survivors = Vec::new();
    for object in all_signs::<4>() {
        for orientation in [1, -1] {
            let mut signs = object.to_vec();
            signs.push(-orientation);
            if mc.iter().all(|c| c.holds(cat, &object)) && oriented.iter().all(|c| c.holds(cat, &signs)) {
                object_survivors.push((object, orientation));
            }
        }
    }
    let (object, orientation) = unique("lift_object", object_survivors)?;
    let scheme = SignScheme { object, orientation, ..base };

    let targets = battery
        .iter()
        .map(|inst| lift_object(cat, &inst.source, &inst.a.target, &inst.a, &inst.kw.homotopy(), &scheme).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let mut closed = Vec::new();
    for (inst, y) in battery.iter().zip(&targets) {
        let parts = morphism_parts(cat, &inst.source, y, &inst.a, &inst.kw)?;
        let dparts: Vec<Morphism> = parts.iter().map(|p| cat.diff(p)).collect();
        let zero_top = hom_lift_zero(&inst.source, y, &inst.a)?;
        let known = ainfty::dinf_at(cat, &inst.source.f, &y.f, &zero_top.a, full(inst.a.n()));
        closed.push(SignedIdentity::new(&known, &dparts));
    }
    let morphism_survivors: Vec<[i8; 4]> =
        all_signs::<4>().into_iter().filter(|m| closed.iter().all(|c| c.holds(cat, m))).collect();
    let morphism = unique("lift_morphism", morphism_survivors)?;
    let scheme = SignScheme { morphism, ..scheme };

    let cases = battery
        .iter()
        .zip(&targets)
        .map(|(inst, y)| {
            let lift = lift_morphism(cat, &inst.source, y, &inst.a, &inst.kw, &scheme)?;
            crate::pretr::prepare_cone(cat, &lift)
        })
        .collect::<Result<Vec<_>>>()?;
    let identities = cases.iter().map(|c| c.signed_identity()).collect::<Result<Vec<_>>>()?;
    let contraction_survivors: Vec<[i8; 3]> = all_signs::<3>()
        .into_iter()
        .filter(|c| identities.iter().all(|(p, id)| id.as_ref().is_some_and(|id| id.holds(&p.category, c))))
        .collect();
    let contraction = unique("contraction_lift", contraction_survivors)?;
    let scheme = SignScheme { contraction, ..scheme };

    for inst in &battery {
        lift_instance(cat, inst, &scheme)?;
    }
    for inst in edge_cases {
        lift_object(cat, &inst.source, &inst.a.target, &inst.a, &inst.kw.homotopy(), &scheme)?;
    }
    if !crate::pretr::contraction_battery_passes(&cases, &scheme) {
        return Err(calibration("contraction_lift", "calibrated scheme fails on the battery"));
    }
    Ok(scheme)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub stage: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FibrationReport {
    pub trials: usize,
    pub passed: usize,
    pub failures: Vec<TrialFailure>,
    pub scheme: SignScheme,
}

impl FibrationReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

fn fail(stage: &str, detail: impl Into<String>) -> (String, String) {
    (stage.into(), detail.into())
}

fn stage_of(e: Error, stage: &str) -> (String, String) {
    match e {
        Error::Calibration { stage, detail } => (stage, detail),
        other => (stage.into(), other.to_string()),
    }
}

/// Check the lifting property on one generated instance.
pub fn run_trial(cat: &DgCategory, inst: &LiftInstance, scheme: &SignScheme, seed: u64) -> Result<(), (String, String)> {
    let n = inst.a.n();
    let (y, lift) = lift_instance(cat, inst, scheme).map_err(|e| stage_of(e, "lift"))?;

    // surjectivity of m_n on Hom complexes, in degrees −1, 0, 1
    let mut r = gen::rng(seed, 7);
    for l in -1..=1 {
        let shape = inst.a.a.shape.with_degree(l);
        let b = inst.a.with_family(gen::random_family(cat, &shape, &mut r));
        let up = hom_lift_zero(&inst.source, &y, &b).map_err(|e| stage_of(e, "surjectivity"))?;
        if truncate(&up) != b {
            return Err(fail("surjectivity", format!("hom_lift_zero does not truncate back in degree {l}")));
        }
        let full_dim = ainfty::fn_hom_dims(cat, &inst.source, &y, l);
        let matching = ainfty::fn_hom_dims(cat, &inst.a.source, &inst.a.target, l);
        let extra = cat.dim(inst.source.objects()[0], y.objects()[n], l - n as i32);
        if full_dim != matching + extra {
            return Err(fail("surjectivity", format!("dimension count fails in degree {l}")));
        }
    }

    let mc = ainfty::validate_mc_object(cat, &y);
    if !mc.passed() {
        return Err(fail("lift_object", format!("lifted object invalid: {mc:?}")));
    }
    if !dinf(cat, &lift).a.is_zero() || truncate(&lift) != inst.a {
        return Err(fail("lift_morphism", "lift is not closed or does not truncate to the input"));
    }

    let pointwise = ainfty::pointwise_hoequiv(cat, &lift).map_err(|e| stage_of(e, "equivalence"))?;
    let witness = is_hoequiv_fn(cat, &lift).map_err(|e| stage_of(e, "equivalence"))?;
    match witness {
        Some(w) if ainfty::check_fn_witness(cat, &lift, &w).unwrap_or(false) => {}
        Some(_) => return Err(fail("equivalence", "homotopy-inverse witness fails re-check")),
        None => return Err(fail("equivalence", "lift is not a homotopy equivalence in F_n")),
    }
    if !pointwise {
        return Err(fail("equivalence", "pointwise criterion disagrees with the F_n witness"));
    }
    let appendix = crate::pretr::appendix_hoequiv_check(cat, &lift, scheme).map_err(|e| stage_of(e, "appendix"))?;
    if !appendix {
        return Err(fail("appendix", "cone-contraction route disagrees with the main route"));
    }
    Ok(())
}

/// Generate `trials` lifting problems at level `n` and check every part of
/// the fibration property on each.
pub fn verify_fibration(cat: &DgCategory, n: usize, trials: usize, seed: u64, scheme: &SignScheme) -> Result<FibrationReport> {
    type Outcome = Result<(), (String, String)>;
    let mut results: Vec<(usize, Result<Outcome>)> = std::thread::scope(|sc| {
        let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(trials.max(1));
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                sc.spawn(move || {
                    (w..trials)
                        .step_by(workers)
                        .map(|i| {
                            let s = trial_seed(seed, i);
                            (i, generate_instance(cat, n, s).map(|inst| run_trial(cat, &inst, scheme, s)))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("trial worker panicked")).collect()
    });
    results.sort_by_key(|(i, _)| *i);
    let mut report = FibrationReport { trials, passed: 0, failures: Vec::new(), scheme: *scheme };
    for (i, r) in results {
        match r? {
            Ok(()) => report.passed += 1,
            Err((stage, detail)) => report.failures.push(TrialFailure { trial: i, stage, detail }),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ainfty::{compose_transformations, identity_transformation, reindex_object, MonotoneMap};
    use crate::linalg::Field;

    fn cat(seed: u64) -> DgCategory {
        gen::random_endo_category(Field::Rational, seed)
    }

    fn identity_witness(cat: &DgCategory, x: usize) -> KontsevichWitness {
        KontsevichWitness {
            g: cat.identity(x),
            r_x: cat.zero(x, x, -1),
            r_y: cat.zero(x, x, -1),
            r_xy: cat.zero(x, x, -2),
        }
    }

    #[test]
    fn truncation_commutes_with_dinf_and_composition() {
        for seed in 0..8 {
            let c = cat(seed);
            let n = 1 + seed as usize % 3;
            let x = Arc::new(gen::generate_mc_object(&c, n, seed).unwrap());
            let a = gen::generate_hoequiv(&c, &x, seed).unwrap();
            let mut r = gen::rng(seed, 3);
            let u = a.with_family(gen::random_family(&c, &a.a.shape.with_degree(1), &mut r));
            assert_eq!(truncate(&dinf(&c, &u)), dinf(&c, &truncate(&u)));
            let id = identity_transformation(&c, &a.target);
            let b = gen::generate_hoequiv(&c, &a.target, seed + 50).unwrap();
            let v = b.with_family(gen::random_family(&c, &b.a.shape.with_degree(-1), &mut r));
            let vu = compose_transformations(&c, &v, &u).unwrap();
            let tvtu = compose_transformations(&c, &truncate(&v), &truncate(&u)).unwrap();
            assert_eq!(truncate(&vu), tvtu);
            assert_eq!(compose_transformations(&c, &id, &u).unwrap(), u);
        }
    }

    #[test]
    fn hom_lift_zero_is_a_section_and_dimensions_add_up() {
        for seed in 0..6 {
            let c = cat(seed);
            let n = 1 + seed as usize % 3;
            let x = Arc::new(gen::generate_mc_object(&c, n, seed).unwrap());
            let y = gen::generate_hoequiv(&c, &x, seed).unwrap().target;
            let (tx, ty) = (Arc::new(truncate_object(&x)), Arc::new(truncate_object(&y)));
            let mut r = gen::rng(seed, 2);
            for l in -2..=2 {
                let b = gen::random_family(&c, &transformation_shape(&tx, &ty, l), &mut r);
                let b = Transformation { source: tx.clone(), target: ty.clone(), a: b };
                let up = hom_lift_zero(&x, &y, &b).unwrap();
                assert!(up.component(&c, full(n)).is_zero());
                assert_eq!(truncate(&up), b);
                let extra = c.dim(x.objects()[0], y.objects()[n], l - n as i32);
                assert_eq!(ainfty::fn_hom_dims(&c, &x, &y, l), ainfty::fn_hom_dims(&c, &tx, &ty, l) + extra);
            }
            let wrong = ainfty::constant_object(&c, (y.objects()[0] + 1) % 3, n);
            let id = identity_transformation(&c, &tx);
            assert!(matches!(hom_lift_zero(&x, &Arc::new(wrong), &id), Err(Error::Shape(_))));
        }
    }

    #[test]
    fn identity_lifts_to_identity() {
        for seed in 0..8 {
            let c = cat(seed);
            let n = 1 + seed as usize % 4;
            let x = Arc::new(if seed % 2 == 0 {
                gen::generate_mc_object(&c, n, seed).unwrap()
            } else {
                ainfty::constant_object(&c, seed as usize % 3, n)
            });
            let tx = Arc::new(truncate_object(&x));
            let id = identity_transformation(&c, &tx);
            let kw = identity_witness(&c, x.objects()[0]);
            let y = lift_object(&c, &x, &tx, &id, &kw.homotopy(), &SignScheme::REFERENCE).unwrap();
            assert_eq!(y, *x, "seed {seed}");
            let lift = lift_morphism(&c, &x, &Arc::new(y), &id, &kw, &SignScheme::REFERENCE).unwrap();
            assert_eq!(lift, identity_transformation(&c, &x));
        }
    }

    #[test]
    fn face_maps_see_only_the_truncation() {
        for seed in 0..6 {
            let c = cat(seed);
            let n = 2 + seed as usize % 3;
            let x = gen::generate_mc_object(&c, n, seed).unwrap();
            let t = truncate_object(&x);
            for i in 0..=n {
                let face = MonotoneMap::face(n, i);
                assert_eq!(reindex_object(&c, &face, &t).unwrap(), reindex_object(&c, &face, &x).unwrap());
            }
        }
    }

    #[test]
    fn lifts_reject_bad_inputs() {
        let c = cat(2);
        let inst = generate_instance(&c, 2, 2).unwrap();
        let mut bad = inst.kw.clone();
        bad.g = bad.g.scaled(&c.field().from_i64(2));
        let r = lift_object(&c, &inst.source, &inst.a.target, &inst.a, &bad.homotopy(), &SignScheme::REFERENCE);
        assert!(matches!(r, Err(Error::Invalid(_))));
        let mut r2 = gen::rng(2, 1);
        let open = inst.a.with_family(gen::random_family(&c, &inst.a.a.shape, &mut r2));
        if !dinf(&c, &open).a.is_zero() {
            let r = lift_object(&c, &inst.source, &inst.a.target, &open, &inst.kw.homotopy(), &SignScheme::REFERENCE);
            assert!(matches!(r, Err(Error::NotClosed(_))));
        }
    }

    #[test]
    fn reference_scheme_passes_and_a_flip_is_caught() {
        let c = cat(1);
        let report = verify_fibration(&c, 2, 6, 11, &SignScheme::REFERENCE).unwrap();
        assert!(report.all_passed(), "{:?}", report.failures);
        let flipped = verify_fibration(&c, 2, 6, 11, &SignScheme::REFERENCE.flipped(0)).unwrap();
        assert!(!flipped.failures.is_empty());
        assert_eq!(flipped.passed + flipped.failures.len(), 6);
    }

    #[test]
    fn scheme_terms_round_trip() {
        let s = SignScheme::REFERENCE;
        for t in 0..SignScheme::TERMS {
            assert_eq!(s.flipped(t).get(t), -s.get(t));
            assert_eq!(s.flipped(t).flipped(t), s);
        }
        let names: std::collections::BTreeSet<_> = (0..SignScheme::TERMS).map(SignScheme::term_name).collect();
        assert_eq!(names.len(), SignScheme::TERMS);
    }
}
