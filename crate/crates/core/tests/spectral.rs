use depbernstein::spectral::{
    check_golden_thompson, check_trace_holder, eig_sym, expm_sym, gerschgorin_bound, schatten_norm, trace_exp,
    weyl_lambda_max_bound, SymMatrix,
};
use proptest::prelude::*;

fn sym(max_dim: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_dim).prop_flat_map(|d| {
        prop::collection::vec(-2.0f64..2.0, d * (d + 1) / 2).prop_map(move |upper| {
            let mut entries = vec![0.0; d * d];
            let mut it = upper.into_iter();
            for i in 0..d {
                for j in i..d {
                    let v = it.next().unwrap();
                    entries[i * d + j] = v;
                    entries[j * d + i] = v;
                }
            }
            SymMatrix::new(d, entries).unwrap()
        })
    })
}

fn pair(max_dim: usize) -> impl Strategy<Value = (SymMatrix, SymMatrix)> {
    (1..=max_dim).prop_flat_map(|d| (sym_of(d), sym_of(d)))
}

fn sym_of(d: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |raw| {
        let entries = (0..d * d).map(|k| 0.5 * (raw[k] + raw[(k % d) * d + k / d])).collect();
        SymMatrix::new(d, entries).unwrap()
    })
}

proptest! {
    #[test]
    fn eigendecomposition_reconstructs(a in sym(8)) {
        let spec = eig_sym(&a).unwrap();
        let back = spec.reconstruct_with(|x| x);
        let err = back.sub(&a).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-10 * (1.0 + a.frobenius_norm()));
        prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(spec.lambda_max, spec.eigenvalues[0]);
        prop_assert_eq!(spec.lambda_min, *spec.eigenvalues.last().unwrap());
    }

    #[test]
    fn golden_thompson_holds((a, b) in pair(8)) {
        prop_assert!(check_golden_thompson(&a, &b).unwrap().holds);
    }

    #[test]
    fn trace_holder_holds((a, b) in pair(8), p in prop::sample::select(vec![1.5, 2.0, 3.0, 10.0])) {
        prop_assert!(check_trace_holder(&a, &b, p).unwrap().holds);
    }

    #[test]
    fn weyl_holds(list in (1usize..=6).prop_flat_map(|d| prop::collection::vec(sym_of(d), 1..=16))) {
        prop_assert!(weyl_lambda_max_bound(&list).unwrap().holds());
    }

    #[test]
    fn gerschgorin_dominates_radius(a in sym(8)) {
        let radius = eig_sym(&a).unwrap().spectral_radius();
        prop_assert!(gerschgorin_bound(&a) >= radius * (1.0 - 1e-12));
    }

    #[test]
    fn trace_exp_is_convex_in_t(a in sym(6), t in -2.0f64..2.0) {
        let h = 0.05;
        let f = |s: f64| trace_exp(s, &a).unwrap().value;
        prop_assert!(f(t - h) - 2.0 * f(t) + f(t + h) >= -1e-8);
    }

    #[test]
    fn matrix_exponential_is_positive_definite(a in sym(6)) {
        let e = expm_sym(&a).unwrap();
        prop_assert!(eig_sym(&e).unwrap().lambda_min > 0.0);
        let te = trace_exp(1.0, &a).unwrap().value;
        prop_assert!((e.trace() - te).abs() <= 1e-9 * te);
    }

    #[test]
    fn schatten_norms_are_ordered(a in sym(6)) {
        let one = schatten_norm(&a, 1.0).unwrap();
        let two = schatten_norm(&a, 2.0).unwrap();
        let inf = schatten_norm(&a, f64::INFINITY).unwrap();
        prop_assert!(inf <= two * (1.0 + 1e-12) && two <= one * (1.0 + 1e-12));
        prop_assert!((two - a.frobenius_norm()).abs() <= 1e-10 * (1.0 + two));
    }

    #[test]
    fn json_round_trip(a in sym(5)) {
        let text = serde_json::to_string(&a).unwrap();
        let back: SymMatrix = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn trace_exp_of_zero_time_is_dimension() {
    let a = SymMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![2.0, -3.0, 1.0], vec![0.0, 1.0, 5.0]]).unwrap();
    assert_eq!(trace_exp(0.0, &a).unwrap().value, 3.0);
    assert_eq!(expm_sym(&SymMatrix::zeros(4)).unwrap().trace(), 4.0);
}

#[test]
fn json_rejects_bad_shapes() {
    assert!(serde_json::from_str::<SymMatrix>(r#"{"dim": 2, "entries": [1, 2, 3]}"#).is_err());
    assert!(serde_json::from_str::<SymMatrix>(r#"{"dim": 2, "entries": [1, 2, 5, 3]}"#).is_err());
    assert!(serde_json::from_str::<SymMatrix>(r#"{"dim": 1, "entries": [1], "extra": 0}"#).is_err());
}
