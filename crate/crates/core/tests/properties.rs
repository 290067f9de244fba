use std::sync::Arc;

use proptest::prelude::*;

use dgfib_core::ainfty::{self, dinf, FamilyShape, Mask};
use dgfib_core::linalg::{self, AffineSystem, Field, Matrix, Scalar};
use dgfib_core::{gen, pretr};

const SMALL_PRIME: u64 = 5;

fn fields() -> impl Strategy<Value = Field> {
    prop_oneof![Just(Field::Rational), Just(Field::Prime(65537)), Just(Field::Prime(SMALL_PRIME))]
}

fn matrix(field: Field, rows: usize, cols: usize, entries: &[i64]) -> Matrix {
    let data: Vec<Vec<Scalar>> = entries.chunks(cols).take(rows).map(|r| r.iter().map(|&v| field.from_i64(v)).collect()).collect();
    Matrix::from_rows(field, data, cols).unwrap()
}

/// Every vector of `F_5^n`, for brute-force solving.
fn all_vectors(n: usize) -> Vec<Vec<Scalar>> {
    let f = Field::Prime(SMALL_PRIME);
    (0..SMALL_PRIME.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let d = k % SMALL_PRIME;
                    k /= SMALL_PRIME;
                    f.from_i64(d as i64)
                })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalars_form_a_field(field in fields(), a in -40i64..40, b in -40i64..40, c in -40i64..40) {
        let (a, b, c) = (field.from_i64(a), field.from_i64(b), field.from_i64(c));
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a - &a, field.zero());
        prop_assert_eq!(&a + &(-&a), field.zero());
        match a.inv() {
            Some(i) => prop_assert!((&a * &i).is_one()),
            None => prop_assert!(a.is_zero()),
        }
        let mut acc = c.clone();
        acc.add_mul(&a, &b);
        prop_assert_eq!(acc, &c + &(&a * &b));
    }

    #[test]
    fn solver_agrees_with_brute_force_over_f5(rows in 1usize..4, cols in 1usize..4, entries in prop::collection::vec(0i64..5, 9), rhs in prop::collection::vec(0i64..5, 3)) {
        let f = Field::Prime(SMALL_PRIME);
        let a = matrix(f, rows, cols, &entries);
        let b: Vec<Scalar> = rhs.iter().take(rows).map(|&v| f.from_i64(v)).collect();
        let vectors = all_vectors(cols);
        let solutions = vectors.iter().filter(|x| a.mul_vec(x).unwrap() == b).count();
        let kernel_size = vectors.iter().filter(|x| linalg::is_zero_vec(&a.mul_vec(x).unwrap())).count();
        match linalg::solve_affine(&AffineSystem::new(a.clone(), b.clone())).unwrap() {
            Some(x) => {
                prop_assert_eq!(a.mul_vec(&x).unwrap(), b);
                prop_assert_eq!(solutions, kernel_size);
            }
            None => prop_assert_eq!(solutions, 0),
        }
        let nullity = cols - linalg::rank(&a);
        prop_assert_eq!(kernel_size, SMALL_PRIME.pow(nullity as u32) as usize);
        prop_assert_eq!(linalg::kernel(&a).len(), nullity);
    }

    #[test]
    fn kernels_and_inverses_are_exact(field in fields(), n in 1usize..5, entries in prop::collection::vec(-3i64..4, 16)) {
        let a = matrix(field, n, n, &entries);
        for v in linalg::kernel(&a) {
            prop_assert!(linalg::is_zero_vec(&a.mul_vec(&v).unwrap()));
        }
        match linalg::inverse(&a) {
            Some(inv) => {
                prop_assert_eq!(linalg::rank(&a), n);
                prop_assert_eq!(a.mul(&inv).unwrap(), Matrix::identity(field, n));
                prop_assert_eq!(inv.mul(&a).unwrap(), Matrix::identity(field, n));
            }
            None => prop_assert!(linalg::rank(&a) < n),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bar_differential_squares_to_zero_and_anticommutes_with_d(seed in any::<u64>(), n in 1usize..5, degree in -1i32..2) {
        let c = gen::random_endo_category(Field::Rational, seed % 16);
        let mut r = gen::rng(seed, 40);
        let objects = |r: &mut gen::SeededRng| (0..=n).map(|_| rand::Rng::gen_range(r, 0..c.num_objects())).collect::<Vec<_>>();
        let shape = FamilyShape { n, degree, source: objects(&mut r), target: objects(&mut r), mask: Mask::TRANSFORMATION };
        let phi = gen::random_family(&c, &shape, &mut r);
        let delta = ainfty::delta(&c, &phi);
        prop_assert!(ainfty::delta(&c, &delta).is_zero());
        prop_assert!(ainfty::d(&c, &delta).plus(&ainfty::delta(&c, &ainfty::d(&c, &phi))).is_zero());
    }

    #[test]
    fn transformation_differential_squares_to_zero(seed in any::<u64>(), n in 1usize..4, degree in -1i32..2, prime in any::<bool>()) {
        let field = if prime { Field::Prime(65537) } else { Field::Rational };
        let c = gen::random_endo_category(field, seed % 16);
        let x = Arc::new(gen::generate_mc_object(&c, n, seed).unwrap());
        let a = gen::generate_hoequiv(&c, &x, seed).unwrap();
        prop_assert!(dinf(&c, &a).a.is_zero());
        let mut r = gen::rng(seed, 41);
        let u = a.with_family(gen::random_family(&c, &a.a.shape.with_degree(degree), &mut r));
        prop_assert!(dinf(&c, &dinf(&c, &u)).a.is_zero());
    }

    #[test]
    fn twisted_differential_squares_to_zero(seed in any::<u64>(), degree in -1i32..2) {
        let c = gen::random_endo_category(Field::Rational, seed % 16);
        let mut r = gen::rng(seed, 42);
        let s = gen::random_twisted_complex(&c, &mut r).unwrap();
        let t = gen::random_twisted_complex(&c, &mut r).unwrap();
        prop_assert!(pretr::validate_twisted(&c, &s).unwrap().passed());
        let f = gen::random_tc_morphism(&c, &s, &t, degree, &mut r);
        prop_assert!(pretr::d_tc(&c, &pretr::d_tc(&c, &f).unwrap()).unwrap().is_zero());
    }
}
