use approx::assert_abs_diff_eq;
use domlab::cocycle::{lyapunov_spectrum, psi, psi_n, SplittingField};
use domlab::dynamics::{Diffeo, TorusPoint};
use domlab::entropy::shannon_entropy;
use domlab::measures::{empirical_measure, TestFunctionFamily};

fn golden() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

#[test]
fn cat_map_on_rational_points() {
    let cat = Diffeo::Cat;
    let y = cat.apply(&TorusPoint::new(&[0.5, 0.25]));
    assert_abs_diff_eq!(y.coords()[0], 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(y.coords()[1], 0.75, epsilon = 1e-15);
    let back = cat.apply_inverse(&y);
    assert_abs_diff_eq!(back.distance(&TorusPoint::new(&[0.5, 0.25])), 0.0, epsilon = 1e-15);
}

#[test]
fn cat_period_five_orbit() {
    let x = TorusPoint::new(&[0.2, 0.4]);
    let orbit = Diffeo::Cat.orbit(&x, 11);
    let back = Diffeo::Cat.iterate(&x, 10);
    assert!(back.distance(&x) < 1e-12);
    let mu = empirical_measure(&Diffeo::Cat, &x, 10).unwrap();
    assert!(mu.len() <= 10 && orbit.len() == 11);
}

#[test]
fn perturbed_cat_derivative_at_origin() {
    let eps = 0.05;
    let map = Diffeo::PerturbedCat { eps };
    let o = TorusPoint::origin(2);
    assert!(map.apply(&o).distance(&o) < 1e-15);
    let j = map.jacobian_at(o.coords());
    let expected = [[2.0, 1.0 + 2.0 * eps], [1.0, 1.0 + eps]];
    for (r, row) in expected.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            assert_abs_diff_eq!(j[(r, c)], *v, epsilon = 1e-14);
        }
    }
    assert_abs_diff_eq!(j.determinant(), 1.0, epsilon = 1e-14);
}

#[test]
fn cat_exponents_and_psi() {
    let r = lyapunov_spectrum(&Diffeo::Cat, &TorusPoint::new(&[0.3, 0.1]), 2000, 1).unwrap();
    assert_abs_diff_eq!(r.exponents[0], golden().ln(), epsilon = 1e-10);
    assert_abs_diff_eq!(r.exponents[1], -golden().ln(), epsilon = 1e-10);
    let field = SplittingField::cat();
    let x = TorusPoint::new(&[0.61, 0.17]);
    assert_abs_diff_eq!(psi(&Diffeo::Cat, &field, &x).unwrap(), -golden().ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(psi_n(&Diffeo::Cat, &field, &x, 7).unwrap(), -7.0 * golden().ln(), epsilon = 1e-10);
}

#[test]
fn cat_circle_fibre_is_neutral() {
    let r = lyapunov_spectrum(&Diffeo::CatCircle { kappa: 0.3 }, &TorusPoint::new(&[0.1, 0.2, 0.3]), 4000, 1).unwrap();
    // the shear into the fibre only decays like 1/n
    assert_abs_diff_eq!(r.exponents[0], golden().ln(), epsilon = 1e-4);
    assert_abs_diff_eq!(r.exponents[1], 0.0, epsilon = 1e-3);
    assert_abs_diff_eq!(r.exponents[2], -golden().ln(), epsilon = 1e-4);
    assert_abs_diff_eq!(r.exponents.iter().sum::<f64>(), 0.0, epsilon = 1e-10);
}

#[test]
fn shannon_entropy_of_uniform() {
    assert_abs_diff_eq!(shannon_entropy(&[0.25; 4]), 4f64.ln(), epsilon = 1e-15);
    assert_abs_diff_eq!(shannon_entropy(&[1.0, 0.0]), 0.0, epsilon = 1e-15);
}

#[test]
fn truncation_bound_halves_per_level() {
    let a = TestFunctionFamily::new(2, 10).unwrap().truncation_error_bound();
    let b = TestFunctionFamily::new(2, 11).unwrap().truncation_error_bound();
    assert_abs_diff_eq!(a, 2.0 * 2f64.powi(-10), epsilon = 1e-18);
    assert_abs_diff_eq!(a / b, 2.0, epsilon = 1e-12);
}
