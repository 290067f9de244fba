//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::time::{Duration, Instant};

use dgfib_core::linalg::Field;
use dgfib_core::reedy::SignScheme;
use dgfib_core::suite::{CheckResult, Suite, SuiteConfig, OTHER_PRIME};

const SEED: u64 = 0;
const TRIALS: usize = 100;

struct Gate {
    failed: usize,
}

impl Gate {
    fn line(&mut self, id: &str, ok: bool, summary: String) {
        println!("[{}] {id}: {summary}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

fn config(field: Field, mutate: Option<usize>) -> SuiteConfig {
    SuiteConfig { field, seed: SEED, trials: TRIALS, mutate }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn find<'a>(checks: &'a [CheckResult], name: &str) -> &'a CheckResult {
    checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("missing check {name}"))
}

/// `name` passed every case and ran at least `min` of them.
fn full(c: &CheckResult, min: usize) -> bool {
    c.ok() && c.cases >= min
}

fn describe(checks: &[&CheckResult]) -> String {
    checks
        .iter()
        .map(|c| {
            let first = c.failures.first().map(|f| format!(" [case {}: {}]", f.case, f.detail)).unwrap_or_default();
            format!("{} {}/{}{first}", c.name, c.passed, c.cases)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn main() {
    let mut gate = Gate { failed: 0 };
    let suite = Suite::new(config(Field::Rational, None));

    let (structure, t1) = timed(|| suite.structure());
    let cs = [find(&structure, "category_axioms"), find(&structure, "k_n_axioms"), find(&structure, "equivalence_iff_kontsevich")];
    let ok = full(cs[0], TRIALS) && full(cs[1], 6) && cs[2].ok() && t1 < Duration::from_secs(10);
    gate.line("1 structure", ok, format!("{} in {:.1?} (limit 10s)", describe(&cs), t1));

    let (ainfty, t2) = timed(|| suite.ainfty());
    let cs = [find(&ainfty, "dinf_squared_zero"), find(&ainfty, "delta_squared_zero_and_anticommutes_with_d")];
    let ok = full(cs[0], 300) && full(cs[1], 200) && t2 < Duration::from_secs(60);
    gate.line("2 a-infinity", ok, format!("{} in {:.1?} (limit 60s)", describe(&cs), t2));

    let cs = [
        find(&ainfty, "exactness_primitive"),
        find(&ainfty, "strictification_point"),
        find(&ainfty, "constant_inclusion_quasi_isomorphism"),
    ];
    let ok = full(cs[0], 100) && full(cs[1], 100) && full(cs[2], 20);
    gate.line("3 constant inclusion", ok, describe(&cs));

    let c = find(&ainfty, "fn_equivalence_matches_pointwise");
    gate.line("4 pointwise criterion", full(c, 100), describe(&[c]));

    let ((calibration, active), t5) = timed(|| suite.calibration());
    let cs = [find(&calibration, "calibration_unique"), find(&calibration, "calibration_stable_across_seeds_and_fields")];
    let matches = active == Some(SignScheme::REFERENCE);
    let ok = full(cs[0], 4) && cs[1].ok() && matches;
    gate.line(
        "5 calibration",
        ok,
        format!("{} over Q and F_{OTHER_PRIME}, seeds {SEED} and {}; equals built-in scheme: {matches} ({:.1?})", describe(&cs), SEED + 1, t5),
    );
    let scheme = active.unwrap_or(SignScheme::REFERENCE);

    let (fibrancy, t6) = timed(|| suite.fibrancy(&scheme));
    let cs: Vec<&CheckResult> = fibrancy.iter().collect();
    let ok = cs.len() == 6 && cs.iter().all(|c| full(c, TRIALS)) && t6 < Duration::from_secs(600);
    gate.line("6 fibrancy", ok, format!("{} in {:.1?} (limit 10min)", describe(&cs), t6));

    let (appendix, t7) = timed(|| suite.appendix(&scheme));
    let cs = [
        find(&appendix, "d_tc_squared_zero"),
        find(&appendix, "cone_contractible_iff_equivalence"),
        find(&appendix, "contraction_lift_identity"),
        find(&appendix, "appendix_route_matches_main_route"),
    ];
    // Every fibrancy trial also runs the appendix route against the main one.
    let ok = full(cs[0], 200) && full(cs[1], 200) && full(cs[2], 50) && cs[3].ok() && fibrancy.iter().all(CheckResult::ok);
    gate.line("7 twisted complexes", ok, format!("{} in {:.1?}", describe(&cs), t7));

    // A flipped sign must break some check and leave a counterexample.
    let (caught, t8) = timed(|| {
        (0..SignScheme::TERMS)
            .map(|t| {
                let mutated = Suite::new(SuiteConfig { trials: 10, ..config(Field::Rational, Some(t)) });
                let checks = mutated.fibrancy(&scheme.flipped(t));
                let hit = checks.iter().find(|c| !c.ok() && !c.failures.is_empty());
                (SignScheme::term_name(t), hit.map(|c| c.name.clone()))
            })
            .collect::<Vec<_>>()
    });
    let missed: Vec<&str> = caught.iter().filter(|(_, hit)| hit.is_none()).map(|(t, _)| *t).collect();
    let summary = caught.iter().map(|(t, hit)| format!("{t}->{}", hit.as_deref().unwrap_or("none"))).collect::<Vec<_>>().join(", ");
    gate.line("8 mutation", missed.is_empty(), format!("{summary} ({:.1?})", t8));

    let prime = Suite::new(config(Field::Prime(OTHER_PRIME), None));
    let (cross, tx) = timed(|| {
        let mut v = prime.structure();
        v.extend(prime.ainfty());
        v
    });
    let bad: Vec<&CheckResult> = cross.iter().filter(|c| !c.ok()).collect();
    gate.line(
        "cross-check F_65537",
        bad.is_empty(),
        format!("{} checks, failing: [{}] ({:.1?})", cross.len(), describe(&bad), tx),
    );

    if gate.failed > 0 {
        println!("{} criteria failed", gate.failed);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
