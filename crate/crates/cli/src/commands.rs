use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};

use dgfib_core::ainfty::{self, dinf, singleton, McObject, Transformation};
use dgfib_core::dg::{self, DgCategory};
use dgfib_core::io::{self, FileKind};
use dgfib_core::reedy::{self, SignScheme};
use dgfib_core::suite::{self, SuiteConfig, SuiteKind};
use dgfib_core::{gen, pretr};

use crate::{Command, Common, Failure, GenKind, Outcome, SuiteName};

type Res<T> = Result<T, Failure>;

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Res<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Failure::Input(format!("{flag} is required")))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Res<T> {
    Ok(io::parse_json(text)?)
}

fn load_cat(c: &Common) -> Res<DgCategory> {
    Ok(io::read_category(&read(need(&c.cat, "--cat")?)?)?)
}

fn input(c: &Common) -> Res<(String, FileKind)> {
    let text = read(need(&c.input, "--in")?)?;
    let kind = io::detect_kind(&text)?;
    Ok((text, kind))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// Write a file to `--out` (or `dir/name` when `--out` is a directory
/// target), or embed it in the report under `key`.
fn emit(c: &Common, name: Option<&str>, key: &str, text: &str, body: &mut Value) -> Res<()> {
    match &c.out {
        Some(out) => {
            let path = match name {
                Some(n) => {
                    std::fs::create_dir_all(out).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
                    out.join(n)
                }
                None => out.clone(),
            };
            std::fs::write(&path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            body[key] = json!(path.display().to_string());
        }
        None => body[key] = serde_json::from_str(text).expect("emitted files are JSON"),
    }
    Ok(())
}

fn mutation(c: &Common) -> Res<Option<usize>> {
    let Some(m) = &c.mutate_sign else { return Ok(None) };
    let term = m
        .parse::<usize>()
        .ok()
        .or_else(|| (0..SignScheme::TERMS).find(|&t| SignScheme::term_name(t) == m))
        .filter(|&t| t < SignScheme::TERMS)
        .ok_or_else(|| Failure::Input(format!("unknown sign term {m:?}")))?;
    Ok(Some(term))
}

fn scheme(c: &Common) -> Res<SignScheme> {
    let base = match &c.scheme {
        Some(p) => {
            let v: Value = parse(&read(p)?)?;
            let s = v.get("scheme").cloned().unwrap_or(v);
            serde_json::from_value(s).map_err(|e| Failure::Input(format!("scheme: {e}")))?
        }
        None => SignScheme::REFERENCE,
    };
    Ok(match mutation(c)? {
        Some(t) => base.flipped(t),
        None => base,
    })
}

fn mc_report(cat: &DgCategory, obj: &McObject) -> (bool, Value) {
    let r = ainfty::validate_mc_object(cat, obj);
    (r.passed(), to_value(&r))
}

pub fn run(c: &Common, cmd: &Command) -> Res<Outcome> {
    match cmd {
        Command::Validate => validate(c),
        Command::Gen { kind } => generate(c, *kind),
        Command::McCheck => {
            let cat = load_cat(c)?;
            let obj = io::mc_from_file(&cat, &parse(&input(c)?.0)?)?;
            let (ok, r) = mc_report(&cat, &obj);
            Ok(Outcome::new(ok, json!({ "n": obj.n(), "truncated": obj.is_truncated(), "mc": r })))
        }
        Command::Dinf => {
            let cat = load_cat(c)?;
            let a = io::transformation_from_file(&cat, &parse(&input(c)?.0)?)?;
            let da = dinf(&cat, &a);
            let mut body = json!({ "closed": da.a.is_zero() });
            emit(c, None, "output", &io::to_json(&io::transformation_to_file(&cat, &da)), &mut body)?;
            Ok(Outcome::new(true, body))
        }
        Command::Hoequiv => hoequiv(c),
        Command::Witness => {
            let cat = load_cat(c)?;
            let f = io::morphism_from_file(&cat, &parse(&input(c)?.0)?)?;
            match dg::kontsevich_witness(&cat, &f).map_err(dgfib_core::Error::from)? {
                Some(w) => {
                    let mut body = json!({ "equivalence": true });
                    emit(c, None, "output", &io::to_json(&io::witness_to_file(&cat, &w)), &mut body)?;
                    Ok(Outcome::new(true, body))
                }
                None => Ok(Outcome::new(false, json!({ "equivalence": false }))),
            }
        }
        Command::Match => {
            let cat = load_cat(c)?;
            let (text, kind) = input(c)?;
            let out = match kind {
                FileKind::McObject => io::to_json(&io::mc_to_file(&cat, &reedy::truncate_object(&io::mc_from_file(&cat, &parse(&text)?)?))),
                FileKind::Transformation => {
                    let a = io::transformation_from_file(&cat, &parse(&text)?)?;
                    io::to_json(&io::transformation_to_file(&cat, &reedy::truncate(&a)))
                }
                k => return Err(Failure::Input(format!("cannot truncate a {k:?} file"))),
            };
            let mut body = json!({});
            emit(c, None, "output", &out, &mut body)?;
            Ok(Outcome::new(true, body))
        }
        Command::Lift { source, witness } => lift(c, source, witness.as_deref()),
        Command::Cone => {
            let cat = load_cat(c)?;
            let (text, kind) = input(c)?;
            let t = match kind {
                FileKind::Morphism => pretr::cone(&cat, &io::morphism_from_file(&cat, &parse(&text)?)?)?,
                FileKind::TcMorphism => pretr::cone_tc(&cat, &io::tc_morphism_from_file(&cat, &parse(&text)?)?)?,
                k => return Err(Failure::Input(format!("cannot take the cone of a {k:?} file"))),
            };
            let r = pretr::validate_twisted(&cat, &t)?;
            let mut body = json!({ "twisted": to_value(&r) });
            emit(c, None, "output", &io::to_json(&io::twisted_to_file(&cat, &t)), &mut body)?;
            Ok(Outcome::new(r.passed(), body))
        }
        Command::Contract => {
            let cat = load_cat(c)?;
            let t = io::twisted_from_file(&cat, &parse(&input(c)?.0)?)?;
            let r = pretr::validate_twisted(&cat, &t)?;
            if !r.passed() {
                return Err(Failure::Input(format!("not a twisted complex: {r:?}")));
            }
            match pretr::find_contraction(&cat, &t)? {
                Some(b) => {
                    let mut body = json!({ "contractible": true });
                    emit(c, None, "output", &io::to_json(&io::tc_morphism_to_file(&cat, &b)), &mut body)?;
                    Ok(Outcome::new(true, body))
                }
                None => Ok(Outcome::new(false, json!({ "contractible": false }))),
            }
        }
        Command::Calibrate => {
            let cat = match &c.cat {
                Some(_) => load_cat(c)?,
                None => gen::random_wide_category(c.field, c.seed),
            };
            let s = reedy::calibrate_signs(&cat, c.n, c.seed)?;
            let mut body = json!({ "scheme": s, "matches_reference": s == SignScheme::REFERENCE });
            if c.out.is_some() {
                emit(c, None, "output", &io::to_json(&json!({ "scheme": s })), &mut body)?;
            }
            Ok(Outcome::new(true, body))
        }
        Command::FibrationTest => {
            let cat = match &c.cat {
                Some(_) => load_cat(c)?,
                None => gen::random_endo_category(c.field, c.seed),
            };
            let rep = reedy::verify_fibration(&cat, c.n, c.trials, c.seed, &scheme(c)?)?;
            Ok(Outcome::new(rep.all_passed(), to_value(&rep)))
        }
        Command::QuasiEquivTest => quasi(c),
        Command::Suite { suite: name } => {
            let kind = match name {
                SuiteName::Core => SuiteKind::Core,
                SuiteName::Ainfty => SuiteKind::Ainfty,
                SuiteName::Reedy => SuiteKind::Reedy,
                SuiteName::Pretr => SuiteKind::Pretr,
                SuiteName::All => SuiteKind::All,
            };
            let config = SuiteConfig { field: c.field, seed: c.seed, trials: c.trials, mutate: mutation(c)? };
            let rep = suite::run_suite(kind, config);
            for chk in rep.checks.iter().filter(|k| !k.ok()) {
                eprintln!("{}: {}/{} passed", chk.name, chk.passed, chk.cases);
            }
            let mut body = to_value(&rep);
            body.as_object_mut().expect("object").remove("status");
            Ok(Outcome::new(rep.passed(), body))
        }
    }
}

fn validate(c: &Common) -> Res<Outcome> {
    let (text, kind) = input(c)?;
    if kind == FileKind::Category {
        let cat = io::read_category(&text)?;
        let r = dg::validate_category(&cat);
        return Ok(Outcome::new(r.passed(), json!({ "kind": kind, "objects": cat.num_objects(), "report": to_value(&r) })));
    }
    let cat = load_cat(c)?;
    let (ok, report) = match kind {
        FileKind::Category => unreachable!(),
        FileKind::Morphism => {
            let f = io::morphism_from_file(&cat, &parse(&text)?)?;
            (true, json!({ "closed": cat.is_closed(&f) }))
        }
        FileKind::McObject => mc_report(&cat, &io::mc_from_file(&cat, &parse(&text)?)?),
        FileKind::Transformation => {
            let a = io::transformation_from_file(&cat, &parse(&text)?)?;
            let (s_ok, s) = mc_report(&cat, &a.source);
            let (t_ok, t) = mc_report(&cat, &a.target);
            (s_ok && t_ok, json!({ "source": s, "target": t, "closed": dinf(&cat, &a).a.is_zero() }))
        }
        FileKind::Witness => {
            let f: io::WitnessFile = parse(&text)?;
            io::morphism_from_file(&cat, &f.g)?;
            io::morphism_from_file(&cat, &f.r_x)?;
            io::morphism_from_file(&cat, &f.r_y)?;
            if let Some(r) = &f.r_xy {
                io::morphism_from_file(&cat, r)?;
            }
            (true, json!({}))
        }
        FileKind::TwistedComplex => {
            let r = pretr::validate_twisted(&cat, &io::twisted_from_file(&cat, &parse(&text)?)?)?;
            (r.passed(), to_value(&r))
        }
        FileKind::TcMorphism => {
            let f = io::tc_morphism_from_file(&cat, &parse(&text)?)?;
            let s = pretr::validate_twisted(&cat, &f.source)?;
            let t = pretr::validate_twisted(&cat, &f.target)?;
            let closed = pretr::d_tc(&cat, &f)?.is_zero();
            (s.passed() && t.passed(), json!({ "source": s, "target": t, "closed": closed }))
        }
    };
    Ok(Outcome::new(ok, json!({ "kind": kind, "report": report })))
}

fn generate(c: &Common, kind: GenKind) -> Res<Outcome> {
    let text = match kind {
        GenKind::Cat => io::write_category(&gen::random_endo_category(c.field, c.seed)),
        GenKind::Mc => {
            let cat = load_cat(c)?;
            io::to_json(&io::mc_to_file(&cat, &gen::generate_mc_object(&cat, c.n, c.seed)?))
        }
        GenKind::Hoequiv => {
            let cat = load_cat(c)?;
            let x = match &c.input {
                Some(p) => io::mc_from_file(&cat, &parse(&read(p)?)?)?,
                None => gen::generate_mc_object(&cat, c.n, c.seed)?,
            };
            let a = gen::generate_hoequiv(&cat, &Arc::new(x), c.seed)?;
            io::to_json(&io::transformation_to_file(&cat, &a))
        }
    };
    let mut body = json!({ "seed": c.seed });
    emit(c, None, "output", &text, &mut body)?;
    Ok(Outcome::new(true, body))
}

fn hoequiv(c: &Common) -> Res<Outcome> {
    let cat = load_cat(c)?;
    let (text, kind) = input(c)?;
    match kind {
        FileKind::Morphism => {
            let f = io::morphism_from_file(&cat, &parse(&text)?)?;
            let w = dg::is_homotopy_equivalence(&cat, &f).map_err(dgfib_core::Error::from)?;
            let wit = w.as_ref().map(|w| {
                json!({
                    "g": io::morphism_to_file(&cat, &w.g),
                    "r_x": io::morphism_to_file(&cat, &w.r_x),
                    "r_y": io::morphism_to_file(&cat, &w.r_y),
                })
            });
            Ok(Outcome::new(w.is_some(), json!({ "equivalence": w.is_some(), "witness": wit })))
        }
        FileKind::Transformation => {
            let a = io::transformation_from_file(&cat, &parse(&text)?)?;
            let main = ainfty::is_hoequiv_fn(&cat, &a)?;
            let certified = match &main {
                Some(w) => ainfty::check_fn_witness(&cat, &a, w)?,
                None => false,
            };
            let pointwise = ainfty::pointwise_hoequiv(&cat, &a)?;
            let agree = main.is_some() == pointwise;
            Ok(Outcome::new(
                certified && pointwise,
                json!({ "equivalence": main.is_some(), "certified": certified, "pointwise": pointwise, "agree": agree }),
            ))
        }
        k => Err(Failure::Input(format!("expected a morphism or transformation, got {k:?}"))),
    }
}

fn lift(c: &Common, source: &Path, witness: Option<&Path>) -> Res<Outcome> {
    let cat = load_cat(c)?;
    let a: Transformation = io::transformation_from_file(&cat, &parse(&input(c)?.0)?)?;
    let x = Arc::new(io::mc_from_file(&cat, &parse(&read(source)?)?)?);
    let a0 = a.component(&cat, singleton(0));
    let kw = match witness {
        Some(p) => {
            let w = io::witness_from_file(&cat, &parse(&read(p)?)?)?;
            if !dg::check_kontsevich(&cat, &a0, &w) {
                return Err(Failure::Input("witness does not satisfy the Kontsevich identities for a_0".into()));
            }
            w
        }
        None => dg::kontsevich_witness(&cat, &a0)
            .map_err(dgfib_core::Error::from)?
            .ok_or_else(|| Failure::Violated("a_0 is not a homotopy equivalence".into()))?,
    };
    let sch = scheme(c)?;
    let y = Arc::new(reedy::lift_object(&cat, &x, &a.target, &a, &kw.homotopy(), &sch)?);
    let up = reedy::lift_morphism(&cat, &x, &y, &a, &kw, &sch)?;
    let (mc_ok, mc) = mc_report(&cat, &y);
    let closed = dinf(&cat, &up).a.is_zero();
    let round_trip = reedy::truncate(&up) == a;
    let main = match ainfty::is_hoequiv_fn(&cat, &up)? {
        Some(w) => ainfty::check_fn_witness(&cat, &up, &w)?,
        None => false,
    };
    let pointwise = ainfty::pointwise_hoequiv(&cat, &up)?;
    let appendix = pretr::appendix_hoequiv_check(&cat, &up, &sch)?;
    let ok = mc_ok && closed && round_trip && main && pointwise && appendix;
    let mut body = json!({
        "scheme": sch,
        "mc": mc,
        "closed": closed,
        "truncation_round_trip": round_trip,
        "equivalence": { "fn_witness": main, "pointwise": pointwise, "appendix": appendix },
    });
    emit(c, Some("lifted_object.json"), "lifted_object", &io::to_json(&io::mc_to_file(&cat, &y)), &mut body)?;
    emit(c, Some("lifted_morphism.json"), "lifted_morphism", &io::to_json(&io::transformation_to_file(&cat, &up)), &mut body)?;
    Ok(Outcome::new(ok, body))
}

fn quasi(c: &Common) -> Res<Outcome> {
    let cat = match &c.cat {
        Some(_) => load_cat(c)?,
        None => gen::random_endo_category(c.field, c.seed),
    };
    let mut ok = true;
    let mut pairs = Vec::new();
    for x in 0..cat.num_objects() {
        for y in 0..cat.num_objects() {
            let cx = ainfty::constant_object(&cat, x, c.n);
            let cy = ainfty::constant_object(&cat, y, c.n);
            let big = ainfty::fn_hom_complex(&cat, &cx, &cy)?;
            let map = ainfty::constant_inclusion_map(&cat, x, y, c.n)?;
            let ranks = dg::induced_cohomology_rank(cat.hom(x, y), &big, &map).map_err(dgfib_core::Error::from)?;
            let (src, tgt) = (cat.hom(x, y).cohomology_dims(), big.cohomology_dims());
            let degrees: std::collections::BTreeSet<i32> = src.keys().chain(tgt.keys()).copied().collect();
            let pass = degrees.iter().all(|k| {
                let r = ranks.get(k).copied().unwrap_or(0);
                r == src.get(k).copied().unwrap_or(0) && r == tgt.get(k).copied().unwrap_or(0)
            });
            ok &= pass;
            pairs.push(json!({
                "source": cat.name(x), "target": cat.name(y), "passed": pass,
                "rank": ranks, "hom_cohomology": src, "fn_cohomology": tgt,
            }));
        }
    }
    Ok(Outcome::new(ok, json!({ "n": c.n, "pairs": pairs })))
}
