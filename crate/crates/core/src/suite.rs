//! Seeded property batteries over generated instances, with JSON reports.

use std::sync::Arc;

use serde::Serialize;

use crate::ainfty::{self, dinf, FamilyShape, Mask};
use crate::dg::{self, DgCategory};
use crate::error::{Error, Result};
use crate::gen;
use crate::linalg::Field;
use crate::pretr;
use crate::reedy::{self, trial_seed, SignScheme};

/// Counterexamples kept per check; the failure count is always exact.
pub const MAX_EXAMPLES: usize = 8;

/// Number of distinct random categories a battery cycles through.
const CATEGORIES: u64 = 8;

pub const OTHER_PRIME: u64 = 65537;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    Core,
    Ainfty,
    Reedy,
    Pretr,
    All,
}

impl std::str::FromStr for SuiteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "core" => SuiteKind::Core,
            "ainfty" => SuiteKind::Ainfty,
            "reedy" => SuiteKind::Reedy,
            "pretr" => SuiteKind::Pretr,
            "all" => SuiteKind::All,
            _ => return Err(Error::Invalid(format!("unknown suite {s:?}"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub field: Field,
    pub seed: u64,
    pub trials: usize,
    /// Flip this calibrated sign before running (mutation testing).
    pub mutate: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub case: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub passed: usize,
    pub failures: Vec<Counterexample>,
}

impl CheckResult {
    pub fn ok(&self) -> bool {
        self.passed == self.cases
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub status: &'static str,
    pub suite: SuiteKind,
    pub field: String,
    pub seed: u64,
    pub trials: usize,
    pub scheme: Option<SignScheme>,
    pub mutated_term: Option<&'static str>,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::ok)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

type Case = std::result::Result<(), String>;

fn ensure(cond: bool, detail: impl FnOnce() -> String) -> Case {
    if cond {
        Ok(())
    } else {
        Err(detail())
    }
}

fn lib<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Run `cases` independent cases, in parallel when possible, and collect
/// the outcomes in case order.
fn run_check(name: &str, cases: usize, f: impl Fn(usize) -> Case + Sync) -> CheckResult {
    let f = &f;
    let mut results: Vec<(usize, Case)> = std::thread::scope(|sc| {
        let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(cases.max(1));
        let handles: Vec<_> = (0..workers)
            .map(|w| sc.spawn(move || (w..cases).step_by(workers).map(|i| (i, f(i))).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("suite worker panicked")).collect()
    });
    results.sort_by_key(|(i, _)| *i);
    let mut out = CheckResult { name: name.into(), cases, passed: 0, failures: Vec::new() };
    for (case, r) in results {
        match r {
            Ok(()) => out.passed += 1,
            Err(detail) if out.failures.len() < MAX_EXAMPLES => out.failures.push(Counterexample { case, detail }),
            Err(_) => {}
        }
    }
    out
}

fn single(name: &str, r: Case) -> CheckResult {
    run_check(name, 1, |_| r.clone())
}

pub struct Suite {
    pub config: SuiteConfig,
    cats: Vec<DgCategory>,
}

impl Suite {
    pub fn new(config: SuiteConfig) -> Suite {
        let cats = (0..CATEGORIES).map(|j| gen::random_endo_category(config.field, config.seed.wrapping_add(j))).collect();
        Suite { config, cats }
    }

    fn cat(&self, i: usize) -> &DgCategory {
        &self.cats[i % self.cats.len()]
    }

    fn seed(&self, i: usize) -> u64 {
        trial_seed(self.config.seed, i)
    }

    pub fn run(&self, kind: SuiteKind) -> SuiteReport {
        let mut checks = Vec::new();
        let mut scheme = None;
        if matches!(kind, SuiteKind::Core | SuiteKind::All) {
            checks.extend(self.structure());
        }
        if matches!(kind, SuiteKind::Ainfty | SuiteKind::All) {
            checks.extend(self.ainfty());
        }
        if matches!(kind, SuiteKind::Reedy | SuiteKind::Pretr | SuiteKind::All) {
            let (cal, active) = self.calibration();
            checks.extend(cal);
            scheme = active;
        }
        if let Some(s) = scheme {
            if matches!(kind, SuiteKind::Reedy | SuiteKind::All) {
                checks.extend(self.fibrancy(&s));
            }
            if matches!(kind, SuiteKind::Pretr | SuiteKind::All) {
                checks.extend(self.appendix(&s));
            }
        }
        let mut report = SuiteReport {
            status: "pass",
            suite: kind,
            field: self.config.field.to_string(),
            seed: self.config.seed,
            trials: self.config.trials,
            scheme,
            mutated_term: self.config.mutate.map(SignScheme::term_name),
            checks,
        };
        if !report.passed() {
            report.status = "fail";
        }
        report
    }

    // ------------------------------------------------------------- structure

    pub fn structure(&self) -> Vec<CheckResult> {
        let t = self.config.trials;
        let field = self.config.field;
        let seed = self.config.seed;
        let categories = run_check("category_axioms", t, |i| {
            let c = gen::random_endo_category(field, trial_seed(seed, i));
            let r = dg::validate_category(&c);
            ensure(r.passed(), || format!("violations: {:?}", &r.violations[..r.violations.len().min(3)]))
        });
        let simplices = run_check("k_n_axioms", 6, |n| {
            let r = dg::validate_category(&dg::make_k_n(field, n));
            ensure(r.passed(), || format!("k[{n}]: {:?}", r.violations.first()))
        });
        let witnesses = run_check("equivalence_iff_kontsevich", t, |i| {
            let c = self.cat(i);
            let mut r = gen::rng(self.seed(i), 20);
            let (x, y) = (i % 3, (i / 3) % 3);
            let f = if i % 2 == 0 {
                gen::random_hoequiv(c, x, y, &mut r, 4).unwrap_or_else(|| gen::random_closed(c, x, y, 0, &mut r))
            } else {
                gen::random_closed(c, x, y, 0, &mut r)
            };
            let h = lib(dg::is_homotopy_equivalence(c, &f).map_err(Error::from))?;
            let k = lib(dg::kontsevich_witness(c, &f).map_err(Error::from))?;
            ensure(h.is_some() == k.is_some(), || format!("verdicts differ for {f:?}"))?;
            if let (Some(h), Some(k)) = (h, k) {
                ensure(dg::check_homotopy(c, &f, &h) && dg::check_kontsevich(c, &f, &k), || "witness fails re-check".into())?;
            }
            let e = gen::random_exact(c, x, y, 0, &mut r);
            let n = lib(dg::is_null_homotopic(c, &e).map_err(Error::from))?;
            ensure(n.is_some_and(|h| c.diff(&h) == e), || "exact map without a valid null-homotopy".into())
        });
        vec![categories, simplices, witnesses]
    }

    // ---------------------------------------------------------------- ainfty

    pub fn ainfty(&self) -> Vec<CheckResult> {
        let t = self.config.trials;
        let dinf_sq = run_check("dinf_squared_zero", 3 * t, |i| {
            let c = self.cat(i);
            let s = self.seed(i);
            let n = 1 + i % 3;
            let x = Arc::new(lib(gen::generate_mc_object(c, n, s))?);
            let a = lib(gen::generate_hoequiv(c, &x, s))?;
            ensure(ainfty::validate_mc_object(c, &x).passed(), || "source fails Maurer–Cartan".into())?;
            ensure(ainfty::validate_mc_object(c, &a.target).passed(), || "target fails Maurer–Cartan".into())?;
            let mut r = gen::rng(s, 21);
            let u = a.with_family(gen::random_family(c, &a.a.shape.with_degree(i as i32 % 3 - 1), &mut r));
            ensure(dinf(c, &dinf(c, &u)).a.is_zero(), || format!("level {n}"))
        });
        let delta = run_check("delta_squared_zero_and_anticommutes_with_d", 2 * t, |i| {
            let c = self.cat(i);
            let mut r = gen::rng(self.seed(i), 22);
            let n = 1 + i % 4;
            let pick = |r: &mut gen::SeededRng| -> Vec<usize> {
                (0..=n).map(|_| rand::Rng::gen_range(r, 0..c.num_objects())).collect()
            };
            let shape = FamilyShape { n, degree: (i % 3) as i32 - 1, source: pick(&mut r), target: pick(&mut r), mask: Mask::TRANSFORMATION };
            let phi = gen::random_family(c, &shape, &mut r);
            let dd = ainfty::delta(c, &ainfty::delta(c, &phi));
            let anti = ainfty::d(c, &ainfty::delta(c, &phi)).plus(&ainfty::delta(c, &ainfty::d(c, &phi)));
            ensure(dd.is_zero() && anti.is_zero(), || format!("level {n}, degree {}", shape.degree))
        });
        let primitive = run_check("exactness_primitive", t, |i| {
            let c = self.cat(i);
            let n = 1 + i % 4;
            let mut r = gen::rng(self.seed(i), 23);
            let (x, y) = (i % 3, (i + 1 + i / 3) % 3);
            let cx = Arc::new(ainfty::constant_object(c, x, n));
            let cy = Arc::new(ainfty::constant_object(c, y, n));
            let h = gen::random_closed(c, x, y, 0, &mut r);
            let u = gen::random_family(c, &ainfty::transformation_shape(&cx, &cy, -1), &mut r);
            let base = ainfty::constant_morphism(c, &h, n);
            let a = base.with_family(base.a.plus(&ainfty::dinf_family(c, &cx.f, &cy.f, &u)));
            let b = lib(ainfty::exactness_primitive(c, &a))?;
            let a0 = ainfty::constant_morphism(c, &a.component(c, 1), n);
            ensure(dinf(c, &b).a == a.a.minus(&a0.a), || format!("level {n}"))
        });
        let strict = run_check("strictification_point", t, |i| {
            let c = self.cat(i);
            let n = 1 + i % 4;
            let x = Arc::new(lib(gen::generate_mc_object(c, n, self.seed(i)))?);
            let p = lib(ainfty::strictification_point(c, &x))?;
            ensure(dinf(c, &p).a.is_zero(), || "not closed".into())?;
            let w = lib(ainfty::is_hoequiv_fn(c, &p))?.ok_or("not certified as an equivalence")?;
            ensure(lib(ainfty::check_fn_witness(c, &p, &w))?, || "witness fails re-check".into())
        });
        let quasi = run_check("constant_inclusion_quasi_isomorphism", (t / 5).max(20), |i| {
            let c = self.cat(i);
            let n = 1 + i % 3;
            let (x, y) = (i % 3, (i / 3) % 3);
            let big = lib(ainfty::fn_hom_complex(c, &ainfty::constant_object(c, x, n), &ainfty::constant_object(c, y, n)))?;
            let map = lib(ainfty::constant_inclusion_map(c, x, y, n))?;
            let ranks = lib(dg::induced_cohomology_rank(c.hom(x, y), &big, &map).map_err(Error::from))?;
            let (src, tgt) = (c.hom(x, y).cohomology_dims(), big.cohomology_dims());
            let degrees: std::collections::BTreeSet<i32> = src.keys().chain(tgt.keys()).copied().collect();
            for k in degrees {
                let (r, a, b) = (ranks.get(&k).copied().unwrap_or(0), src.get(&k).copied().unwrap_or(0), tgt.get(&k).copied().unwrap_or(0));
                ensure(r == a && r == b, || format!("degree {k}: rank {r}, H(A) {a}, H(F_n) {b}"))?;
            }
            Ok(())
        });
        let technical = run_check("fn_equivalence_matches_pointwise", t, |i| {
            let c = self.cat(i);
            let s = self.seed(i);
            let n = 1 + i % 3;
            let mut r = gen::rng(s, 24);
            let (a, expected) = if i % 2 == 0 {
                let x = Arc::new(lib(gen::generate_mc_object(c, n, s))?);
                (lib(gen::generate_hoequiv(c, &x, s))?, true)
            } else {
                // planted: a constant map on a possibly non-invertible h
                let (x, y) = (i % 3, (i / 2) % 3);
                let h = if i % 4 == 1 { c.zero(x, y, 0) } else { gen::random_closed(c, x, y, 0, &mut r) };
                let base = ainfty::constant_morphism(c, &h, n);
                let u = gen::random_family(c, &base.a.shape.with_degree(-1), &mut r);
                let a = base.with_family(base.a.plus(&ainfty::dinf_family(c, &base.source.f, &base.target.f, &u)));
                (a, lib(dg::is_homotopy_equivalence(c, &h).map_err(Error::from))?.is_some())
            };
            let fnv = lib(ainfty::is_hoequiv_fn(c, &a))?;
            let pw = lib(ainfty::pointwise_hoequiv(c, &a))?;
            ensure(fnv.is_some() == pw, || format!("F_n says {}, pointwise says {pw}", fnv.is_some()))?;
            ensure(expected == pw, || format!("expected {expected}, got {pw}"))?;
            if let Some(w) = fnv {
                ensure(lib(ainfty::check_fn_witness(c, &a, &w))?, || "witness fails re-check".into())?;
            }
            Ok(())
        });
        vec![dinf_sq, delta, primitive, strict, quasi, technical]
    }

    // ----------------------------------------------------------- calibration

    /// Calibrate on wide categories over two seeds and two fields. Returns
    /// the checks and the active (possibly mutated) scheme.
    pub fn calibration(&self) -> (Vec<CheckResult>, Option<SignScheme>) {
        let other = match self.config.field {
            Field::Rational => Field::Prime(OTHER_PRIME),
            Field::Prime(_) => Field::Rational,
        };
        let runs: Vec<(Field, u64)> = [self.config.field, other]
            .into_iter()
            .flat_map(|f| [(f, self.config.seed), (f, self.config.seed.wrapping_add(1))])
            .collect();
        let results: Vec<Result<SignScheme>> = runs
            .iter()
            .map(|&(f, s)| reedy::calibrate_signs(&gen::random_wide_category(f, s), 3, s))
            .collect();
        let unique = run_check("calibration_unique", runs.len(), |i| {
            results[i].as_ref().map(|_| ()).map_err(|e| format!("{} seed {}: {e}", runs[i].0, runs[i].1))
        });
        let found: Vec<SignScheme> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let stable = single(
            "calibration_stable_across_seeds_and_fields",
            ensure(found.len() == runs.len() && found.iter().all(|s| *s == found[0]), || format!("schemes: {found:?}")),
        );
        let active = results[0].as_ref().ok().map(|s| match self.config.mutate {
            Some(t) => s.flipped(t),
            None => *s,
        });
        (vec![unique, stable], active)
    }

    // --------------------------------------------------------------- fibrancy

    /// Each level runs on the wide category, where top components are
    /// nonzero, and on the first endo category.
    pub fn fibrancy(&self, scheme: &SignScheme) -> Vec<CheckResult> {
        let wide = gen::random_wide_category(self.config.field, self.config.seed);
        let mut out = Vec::new();
        for n in 1..=3 {
            for (label, c) in [("wide", &wide), ("endo", &self.cats[0])] {
                let name = format!("fibration_n{n}_{label}");
                out.push(match reedy::verify_fibration(c, n, self.config.trials, self.config.seed, scheme) {
                    Ok(rep) => CheckResult {
                        name,
                        cases: rep.trials,
                        passed: rep.passed,
                        failures: rep
                            .failures
                            .into_iter()
                            .take(MAX_EXAMPLES)
                            .map(|f| Counterexample { case: f.trial, detail: format!("{}: {}", f.stage, f.detail) })
                            .collect(),
                    },
                    Err(e) => single(&name, Err(e.to_string())),
                });
            }
        }
        out
    }

    // -------------------------------------------------------------- appendix

    pub fn appendix(&self, scheme: &SignScheme) -> Vec<CheckResult> {
        let t = self.config.trials;
        let dtc = run_check("d_tc_squared_zero", 2 * t, |i| {
            let c = self.cat(i);
            let mut r = gen::rng(self.seed(i), 30);
            let s = lib(gen::random_twisted_complex(c, &mut r))?;
            let u = lib(gen::random_twisted_complex(c, &mut r))?;
            let f = gen::random_tc_morphism(c, &s, &u, (i % 3) as i32 - 1, &mut r);
            ensure(lib(pretr::d_tc(c, &lib(pretr::d_tc(c, &f))?))?.is_zero(), || format!("{} → {} entries", s.len(), u.len()))
        });
        let cones = run_check("cone_contractible_iff_equivalence", 2 * t, |i| {
            let c = self.cat(i);
            let mut r = gen::rng(self.seed(i), 31);
            let (x, y) = (i % 3, (i / 3) % 3);
            let f = match i % 4 {
                0 => gen::random_hoequiv(c, x, y, &mut r, 4).unwrap_or_else(|| c.zero(x, y, 0)),
                1 => c.zero(x, y, 0),
                _ => gen::random_closed(c, x, y, 0, &mut r),
            };
            let contraction = lib(pretr::find_contraction(c, &lib(pretr::cone(c, &f))?))?;
            let equivalence = lib(dg::is_homotopy_equivalence(c, &f).map_err(Error::from))?;
            ensure(contraction.is_some() == equivalence.is_some(), || format!("cone {}, equivalence {}", contraction.is_some(), equivalence.is_some()))
        });
        let lifts = run_check("contraction_lift_identity", (t / 2).max(50), |i| {
            let c = self.cat(i);
            let s = self.seed(i);
            let inst = lib(reedy::generate_instance(c, 1 + i % 3, s))?;
            let (_, lift) = lib(reedy::lift_instance(c, &inst, scheme))?;
            let case = lib(pretr::prepare_cone(c, &lift))?;
            let b = lib(case.lift(scheme))?.ok_or("truncated cone has no contraction")?;
            let id = ainfty::identity_transformation(&case.pretr.category, &case.cone);
            ensure(dinf(&case.pretr.category, &b).a == id.a, || "d_A∞(b) ≠ 1".into())
        });
        let agree = run_check("appendix_route_matches_main_route", t, |i| {
            let c = self.cat(i);
            let s = self.seed(i);
            let n = 1 + i % 3;
            let a = if i % 2 == 0 {
                let inst = lib(reedy::generate_instance(c, n, s))?;
                lib(reedy::lift_instance(c, &inst, scheme))?.1
            } else {
                let mut r = gen::rng(s, 32);
                let (x, y) = (i % 3, (i / 2) % 3);
                let h = if i % 4 == 1 { c.zero(x, y, 0) } else { gen::random_closed(c, x, y, 0, &mut r) };
                ainfty::constant_morphism(c, &h, n)
            };
            let main = lib(ainfty::is_hoequiv_fn(c, &a))?.is_some();
            let appendix = lib(pretr::appendix_hoequiv_check(c, &a, scheme))?;
            ensure(main == appendix, || format!("main {main}, appendix {appendix}"))
        });
        vec![dtc, cones, lifts, agree]
    }
}

pub fn run_suite(kind: SuiteKind, config: SuiteConfig) -> SuiteReport {
    Suite::new(config).run(kind)
}
