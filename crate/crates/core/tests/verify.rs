use dunkl::grid::{make_test_function, GridFunction, GridSpec, TestFunctionKind, WeightedGrid};
use dunkl::group::DunklStructure;
use dunkl::lp::{LittlewoodPaley, ScaleWindow};
use dunkl::verify::{
    almost_orthogonality_decay, ball_comparability_battery, doubling_battery, maximal_battery, maximal_function,
};

fn grid(m: usize, kappa: f64) -> WeightedGrid {
    WeightedGrid::new(GridSpec::new(8.0, m, 1), DunklStructure::preset("z2", kappa).unwrap()).unwrap()
}

#[test]
fn maximal_function_of_a_constant() {
    let g = grid(64, 0.5);
    let f = GridFunction::from_fn(&g, |_| -2.5).unwrap();
    let mf = maximal_function(&f, &g).unwrap();
    for v in mf.values().iter() {
        assert!((v - 2.5).abs() <= 1e-12, "{v}");
    }
}

#[test]
fn maximal_function_dominates_modulus() {
    let g = grid(64, 0.5);
    for seed in 0..5 {
        let f = make_test_function(&TestFunctionKind::Random, seed, &g).unwrap();
        let mf = maximal_function(&f, &g).unwrap();
        for (m, v) in mf.values().iter().zip(f.values().iter()) {
            // the h/2 ball holds only the center
            assert!(*m >= v.abs() * (1.0 - 1e-12));
        }
    }
}

#[test]
fn maximal_battery_is_bounded() {
    let g = grid(128, 0.5);
    let rep = maximal_battery(&g, 50, 1).unwrap();
    assert!(rep.all_finite);
    assert_eq!(rep.ratios.len(), 50);
    assert!(rep.ratios.iter().all(|&r| r >= 1.0 - 1e-12));
    assert!(rep.c_hat.is_finite());
}

#[test]
fn two_scale_window_has_too_few_pairs() {
    let g = grid(32, 0.5);
    let lp = LittlewoodPaley::build(&g, ScaleWindow::new(0, 1, 1).unwrap()).unwrap();
    let rep = almost_orthogonality_decay(&lp, &g, 3).unwrap();
    assert!(rep.insufficient_data);
    assert!(rep.epsilon_prime.is_none());
    assert!(!rep.pass);
}

#[test]
fn flat_decay_and_submultiplicativity() {
    let g = grid(256, 0.0);
    let lp = LittlewoodPaley::build(&g, ScaleWindow::new(-2, 5, 2).unwrap()).unwrap();
    for k in -2..=1 {
        let a = lp.dk(k).unwrap();
        let b = lp.dk(k + 3).unwrap();
        let r = a.compose(b).self_adjoint_norm() / (a.self_adjoint_norm() * b.self_adjoint_norm());
        assert!(r <= 2f64.powf(-0.9), "k = {k}: {r}");
        let sq = a.compose(a).self_adjoint_norm();
        assert!(sq <= a.self_adjoint_norm().powi(2) * (1.0 + 1e-12));
    }
}

#[test]
fn ball_and_doubling_constants_are_finite() {
    let g = grid(256, 0.5);
    let balls = ball_comparability_battery(&g, 40, 2).unwrap();
    assert!(balls.c.is_finite() && balls.c >= 1.0);
    assert!(balls.ratios.iter().all(|r| *r > 0.0));
    let dbl = doubling_battery(&g, 40, 2).unwrap();
    assert!(dbl.c.is_finite() && dbl.c >= 1.0);
    assert!(dbl.ratios.iter().zip(&dbl.lambdas).all(|(r, l)| *r >= 1.0 && *l >= 1.0));
}
