use nalgebra::DMatrix;
use nevlab::forms::{fs_form_at, mixed_wedge_density, numeric_ddc, pullback_form, ChartPoint, HermitianForm};
use nevlab::C64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<C64>> {
    prop::collection::vec(complex(), rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn hermitian(k: usize) -> impl Strategy<Value = HermitianForm> {
    matrix(k, k).prop_map(|m| HermitianForm::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap())
}

fn psd(k: usize) -> impl Strategy<Value = HermitianForm> {
    matrix(k, k).prop_map(|m| HermitianForm::new(&m * m.adjoint()).unwrap())
}

fn hermitian_defect(f: &HermitianForm) -> f64 {
    let a = f.coeff();
    (a - a.adjoint()).norm() / a.norm().max(f64::MIN_POSITIVE)
}

fn density(forms: &[&HermitianForm]) -> f64 {
    let args: Vec<(&HermitianForm, usize)> = forms.iter().map(|f| (*f, 1)).collect();
    mixed_wedge_density(&args, forms.len()).unwrap()
}

/// Size of the terms entering a mixed discriminant, for relative tolerances.
fn scale(forms: &[&HermitianForm]) -> f64 {
    forms.iter().map(|f| f.norm()).product::<f64>().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructions_stay_hermitian(
        a in prop::collection::vec(complex(), 3),
        b in prop::collection::vec(complex(), 3),
        j in matrix(3, 2),
        h in hermitian(3),
        w in prop::collection::vec(complex(), 2),
    ) {
        prop_assert!(hermitian_defect(&HermitianForm::outer(&a)) <= 1e-12);
        prop_assert!(hermitian_defect(&HermitianForm::sym_outer(&a, &b)) <= 1e-12);
        prop_assert!(hermitian_defect(&pullback_form(&j, &h).unwrap()) <= 1e-12);
        prop_assert!(hermitian_defect(&h.scaled(-1.7)) <= 1e-12);
        let p = ChartPoint::new(0, w).unwrap();
        prop_assert!(hermitian_defect(&fs_form_at(&p)) <= 1e-12);
    }

    #[test]
    fn mixed_density_is_symmetric(fs in prop::collection::vec(hermitian(3), 3), perm in 0usize..6) {
        let order = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]][perm];
        let base: Vec<&HermitianForm> = fs.iter().collect();
        let permuted: Vec<&HermitianForm> = order.iter().map(|&i| &fs[i]).collect();
        let tol = 1e-10 * scale(&base);
        prop_assert!((density(&base) - density(&permuted)).abs() <= tol);
    }

    #[test]
    fn mixed_density_is_multilinear(
        a in hermitian(2), b in hermitian(2), c in hermitian(2), s in -3.0..3.0f64,
    ) {
        let tol = 1e-10 * (scale(&[&a, &c]) + scale(&[&b, &c]));
        let scaled = a.scaled(s);
        prop_assert!((density(&[&scaled, &c]) - s * density(&[&a, &c])).abs() <= tol * (1.0 + s.abs()));
        let sum = HermitianForm::new(a.coeff() + b.coeff()).unwrap();
        prop_assert!((density(&[&sum, &c]) - density(&[&a, &c]) - density(&[&b, &c])).abs() <= tol);
    }

    #[test]
    fn mixed_density_of_psd_forms_is_nonnegative(fs in prop::collection::vec(psd(3), 3)) {
        let refs: Vec<&HermitianForm> = fs.iter().collect();
        prop_assert!(density(&refs) >= -1e-12 * scale(&refs));
    }

    #[test]
    fn pullback_is_functorial(h in hermitian(3), j1 in matrix(3, 2), j2 in matrix(2, 2)) {
        let twice = pullback_form(&j2, &pullback_form(&j1, &h).unwrap()).unwrap();
        let once = pullback_form(&(&j1 * &j2), &h).unwrap();
        let tol = 1e-12 * (1.0 + h.norm() * j1.norm().powi(2) * j2.norm().powi(2));
        prop_assert!((twice.coeff() - once.coeff()).norm() <= tol);
    }

    #[test]
    fn pluriharmonic_functions_have_no_ddc(
        coeffs in prop::collection::vec(complex(), 4),
        z in prop::collection::vec(complex(), 2),
    ) {
        // Re of a holomorphic polynomial
        let u = |w: &[C64]| {
            (coeffs[0] * w[0] * w[0] + coeffs[1] * w[0] * w[1] + coeffs[2] * w[1].powu(3) + coeffs[3] * w[0]).re
        };
        let f = numeric_ddc(u, &z, None).unwrap();
        let size = 1.0 + z.iter().map(|c| c.norm()).sum::<f64>();
        let magnitude = coeffs.iter().map(|c| c.norm()).sum::<f64>() * size.powi(3);
        prop_assert!(f.norm() <= 1e-5 * (1.0 + magnitude), "{}", f.norm());
    }
}
