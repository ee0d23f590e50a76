use nnflow_core::constitutive::{StressModel, Viscosity};
use nnflow_core::nfunction::{conjugate_exponent, ConjugateParams, NFunction};
use nnflow_core::tensor::SymMat;
use proptest::prelude::*;

fn sym(dim: usize) -> impl Strategy<Value = SymMat> {
    prop::collection::vec(-3.0f64..3.0, 9).prop_map(move |v| {
        let mut rows = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = v[3 * i + j];
            }
        }
        SymMat::from_rows(dim, &rows)
    })
}

const X: [f64; 3] = [0.3, 1.1, 2.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fenchel_young_holds_for_power(p in 1.3f64..4.0, k in sym(3), l in sym(3)) {
        let nf = NFunction::power(3, p).unwrap();
        let params = ConjugateParams::default();
        let mstar = nf.conjugate(&X, &l, &params).unwrap();
        let gap = nf.value(&X, &k) + mstar - k.ddot(&l);
        prop_assert!(gap >= -1e-12 * (1.0 + k.norm() * l.norm()));
    }

    #[test]
    fn power_conjugate_is_dual_power(p in 1.3f64..4.0, l in sym(2)) {
        let nf = NFunction::power(2, p).unwrap();
        let q = conjugate_exponent(p);
        let exact = l.norm().powf(q) / q;
        let v = nf.conjugate(&X, &l, &ConjugateParams::default()).unwrap();
        prop_assert!((v - exact).abs() <= 1e-10 * (1.0 + exact));
    }

    #[test]
    fn power_law_stress_is_monotone(p in 1.5f64..3.5, a in sym(3), b in sym(3)) {
        let m = StressModel::power_law(3, p, Viscosity::constant(1.0)).unwrap();
        let sa = m.stress(&X, 1.0, 1.0, &a).unwrap();
        let sb = m.stress(&X, 1.0, 1.0, &b).unwrap();
        prop_assert!((sa - sb).ddot(&(a - b)) >= -1e-12);
    }

    #[test]
    fn carreau_stress_is_monotone(a in sym(2), b in sym(2), rho in 0.5f64..2.0, theta in 0.5f64..2.0) {
        let m = StressModel::carreau(2, 2.2, Viscosity::constant(1.0)).unwrap();
        let sa = m.stress(&X, rho, theta, &a).unwrap();
        let sb = m.stress(&X, rho, theta, &b).unwrap();
        prop_assert!((sa - sb).ddot(&(a - b)) >= -1e-12);
    }

    #[test]
    fn power_law_coercivity_is_an_identity(p in 1.5f64..3.5, k in sym(3)) {
        let m = StressModel::power_law(3, p, Viscosity::constant(1.0)).unwrap();
        let s = m.stress(&X, 1.0, 1.0, &k).unwrap();
        let nf = m.nfunction();
        let rhs = nf.value(&X, &k) + nf.conjugate(&X, &s, &ConjugateParams::default()).unwrap();
        prop_assert!((s.ddot(&k) - rhs).abs() <= 1e-10 * (1.0 + k.norm().powf(p)));
    }

    #[test]
    fn stress_vanishes_only_at_zero_strain(k in sym(2)) {
        let m = StressModel::carreau(2, 2.5, Viscosity::constant(1.0)).unwrap();
        let s = m.stress(&X, 1.0, 1.0, &k).unwrap();
        prop_assert_eq!(s.is_zero(), k.is_zero());
    }
}
