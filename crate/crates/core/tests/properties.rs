use cbnorm::cert::{basis_certificate, from_ell1, from_prefix_tree};
use cbnorm::matnorms::{cb_norm_matrix, norm_inf_to_one};
use cbnorm::tensor::symmetric_tensor_of;
use cbnorm::{Matrix, MultiIndex, Partition, Polynomial, Rational, Scalar, Tensor};
use proptest::prelude::*;

fn small_int_poly(n: usize) -> impl Strategy<Value = Polynomial<f64>> {
    prop::collection::vec((prop::collection::vec(0u32..=1, n), -6i32..=6), 0..10).prop_map(move |terms| {
        let terms = terms.into_iter().map(|(e, c)| (MultiIndex::new(e), c as f64));
        Polynomial::from_terms(n, terms.collect::<Vec<_>>()).unwrap()
    })
}

fn family(n: usize) -> impl Strategy<Value = Partition> {
    prop::collection::vec(0usize..3, n).prop_map(move |slots| {
        let mut parts = vec![Vec::new(); 2];
        for (v, s) in slots.into_iter().enumerate() {
            if s < 2 {
                parts[s].push(v);
            }
        }
        parts.retain(|p: &Vec<usize>| !p.is_empty());
        Partition::new(n, parts).unwrap()
    })
}

fn to_q(p: &Polynomial<f64>) -> Polynomial<Rational> {
    p.map_scalar(|c| Rational::from_f64(*c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_and_float_norms_agree(p in small_int_poly(7)) {
        let q = to_q(&p);
        prop_assert_eq!(q.norm_inf_exact().unwrap().to_f64(), p.norm_inf_exact().unwrap());
        prop_assert_eq!(q.norm_one_exact().unwrap().to_f64(), p.norm_one_exact().unwrap());
        prop_assert!(p.norm_one_exact().unwrap() <= p.norm_inf_exact().unwrap());
    }

    #[test]
    fn projector_is_idempotent_and_contracts(p in small_int_poly(6), q in family(6)) {
        let once = p.project_wq(&q).unwrap();
        prop_assert_eq!(&once.project_wq(&q).unwrap(), &once);
        prop_assert!(once.norm_inf_exact().unwrap() <= p.norm_inf_exact().unwrap());
        let x: Vec<f64> = (0..6).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        prop_assert_eq!(p.project_wq_by_averaging(&q, &x).unwrap(), once.eval(&x).unwrap());
    }

    #[test]
    fn polynomial_json_round_trip(p in small_int_poly(5)) {
        prop_assert_eq!(Polynomial::from_json_str(&p.to_json_string()).unwrap(), p);
    }

    #[test]
    fn symmetric_tensors_reproduce_coefficients(p in small_int_poly(5)) {
        let h = p.homogeneous_part(2);
        let t = symmetric_tensor_of(&h, 2).unwrap();
        prop_assert!(t.is_symmetric());
        prop_assert!(t.consistency_check(&h).unwrap().violations.is_empty());
    }

    #[test]
    fn certificates_realize_their_tensors(entries in prop::collection::vec(((0usize..3, 0usize..3), -4i32..=4), 1..6)) {
        let t = Tensor::from_entries(3, 2, entries.iter().map(|((i, j), c)| (vec![*i, *j], *c as f64))).unwrap();
        for cert in [from_ell1(&t).unwrap(), from_prefix_tree(&t).unwrap()] {
            prop_assert!(cert.validate(1e-9).is_valid());
            let diff = cert.realize().unwrap().sub(&t).unwrap();
            prop_assert!(diff.entries().values().all(|x| x.abs() < 1e-12));
            prop_assert!(*cert.weight() <= t.l1_norm() + 1e-12);
        }
    }

    #[test]
    fn certificate_sums_add_realizations(a in prop::collection::vec(0usize..3, 2), b in prop::collection::vec(0usize..3, 2)) {
        let ca = basis_certificate::<Rational>(&a, 3).unwrap();
        let cb = basis_certificate::<Rational>(&b, 3).unwrap();
        let sum = ca.add(&cb).unwrap();
        let want = Tensor::basis(3, &a).unwrap().add(&Tensor::basis(3, &b).unwrap()).unwrap();
        prop_assert_eq!(sum.realize().unwrap(), want);
        prop_assert_eq!(sum.weight().clone(), Rational::from_i64(2));
    }

    #[test]
    fn grothendieck_sandwich_on_small_matrices(entries in prop::collection::vec(-3i32..=3, 6)) {
        let a = Matrix::from_fn(2, 3, |i, j| entries[3 * i + j] as f64);
        let inf = norm_inf_to_one(&a).unwrap();
        let exact = norm_inf_to_one(&a.map(|x| Rational::from_f64(*x))).unwrap();
        prop_assert_eq!(exact.to_f64(), inf);
        let cb = cb_norm_matrix(&a).unwrap();
        prop_assert!(cb.is_consistent());
        prop_assert!(cb.lower >= inf - 1e-9);
        prop_assert!(cb.upper <= 1.7821 * inf + 1e-6);
    }
}
