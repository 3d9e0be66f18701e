//! Acceptance criteria at the desk-scale defaults: Z2 on the line, kappa = 0.5,
//! L = 8, m = 512, window [-3, 6], M = 2. Each test prints one PASS/FAIL line.

use std::sync::Arc;

use once_cell::sync::Lazy;
use rayon::prelude::*;

use dunkl::config::RunConfig;
use dunkl::frame::{Codec, FrameContext, NeumannConfig, contraction_estimate};
use dunkl::grid::{GridSpec, WeightedGrid};
use dunkl::group::DunklStructure;
use dunkl::hankel::rank_one_heat_kernel;
use dunkl::lp::{ScaleWindow, TLParams};
use dunkl::operator::{
    assemble_dunkl_laplacian, dyadic_time, heat_kernel, poisson_kernel, spectral_decompose,
    SpectralDecomposition,
};
use dunkl::verify::{
    identity_split_check, norm_equivalence_battery, run_suite, Suite, EQUIVALENCE_PARAMS,
};

const SPLIT_TOL: f64 = 1e-10;
const SEMIGROUP_TOL: f64 = 1e-10;
const TELESCOPE_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-3;
const SYMMETRY_TOL: f64 = 1e-10;
const HEAT_REDUCTION_TOL: f64 = 1e-3;
const POISSON_REDUCTION_TOL: f64 = 2e-3;
const HANKEL_TOL: f64 = 1e-3;
const MAX_M: u32 = 4;
const NEUMANN_TOL: f64 = 1e-4;
const NEUMANN_MAX_ITER: usize = 40;
const STEP_SLACK: f64 = 0.05;
const SEEDS: u64 = 20;
const DUALITY_TRIALS: usize = 50;
const DUALITY_SEED: u64 = 7;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn grid(kappa: f64) -> WeightedGrid {
    let s = DunklStructure::preset("z2", kappa).unwrap();
    WeightedGrid::new(GridSpec::new(8.0, 512, 1), s).unwrap()
}

static CTX: Lazy<FrameContext> =
    Lazy::new(|| FrameContext::new(grid(0.5), ScaleWindow::default(), 0.05).unwrap());

static CODEC: Lazy<Codec> = Lazy::new(|| {
    let cfg = NeumannConfig {
        tol: NEUMANN_TOL,
        max_iter: NEUMANN_MAX_ITER,
        subspace: true,
    };
    Codec::new(&CTX, cfg).unwrap()
});

static FLAT: Lazy<(WeightedGrid, Arc<SpectralDecomposition>)> = Lazy::new(|| {
    let g = grid(0.0);
    let d = spectral_decompose(&assemble_dunkl_laplacian(&g).unwrap()).unwrap();
    (g, Arc::new(d))
});

/// Ten interior indices spread over the inner half-box.
fn sample(g: &WeightedGrid) -> Vec<usize> {
    dunkl::verify::sample_points(g, 10)
}

#[test]
fn c01_splitting_identity() {
    let s = identity_split_check(CODEC.operators());
    let pass = s.residual <= SPLIT_TOL;
    report(1, "splitting identity", pass, format!("residual {:.3e} (tol {SPLIT_TOL:e})", s.residual));
    assert!(pass);
}

#[test]
fn c02_semigroup_exactness() {
    let family = CTX.lp().family();
    let d = family.decomposition();
    let ks: Vec<i32> = family.scales().collect();
    let pairs: Vec<(i32, i32)> = ks
        .iter()
        .flat_map(|&k| ks.iter().filter(move |&&j| j >= k).map(move |&j| (k, j)))
        .collect();
    let worst = pairs
        .par_iter()
        .map(|&(k, j)| {
            let t = dyadic_time(k) + dyadic_time(j);
            let h = heat_kernel(t, d).unwrap();
            let eh = family.heat(k).unwrap().compose(family.heat(j).unwrap()).sub(&h);
            let p = poisson_kernel(t, d).unwrap();
            let ep = family.poisson(k).unwrap().compose(family.poisson(j).unwrap()).sub(&p);
            (eh.self_adjoint_norm() / h.self_adjoint_norm()).max(ep.self_adjoint_norm() / p.self_adjoint_norm())
        })
        .reduce(|| 0.0, f64::max);
    let lp = CTX.lp();
    let w = lp.window();
    let mut tele = 0.0f64;
    for a in w.scales() {
        let mut sum = lp.dk(a).unwrap().clone();
        for b in a..=w.k_max {
            if b > a {
                sum = sum.add(lp.dk(b).unwrap());
            }
            let direct = family.poisson(a).unwrap().sub(family.poisson(b + 1).unwrap());
            tele = tele.max(sum.sub(&direct).operator_norm());
        }
    }
    let pass = worst <= SEMIGROUP_TOL && tele <= TELESCOPE_TOL;
    report(
        2,
        "semigroup exactness",
        pass,
        format!(
            "{} pairs, max relative defect {worst:.3e} (tol {SEMIGROUP_TOL:e}); telescoping {tele:.3e} (tol {TELESCOPE_TOL:e})",
            pairs.len()
        ),
    );
    assert!(pass);
}

#[test]
fn c03_mass_and_symmetry() {
    let family = CTX.lp().family();
    let interior = CTX.grid().interior_indices(0.5);
    let mut mass = Vec::new();
    let mut sym = 0.0f64;
    for k in 0..=6 {
        mass.push((k, family.mass_defect(k, &interior).unwrap()));
        sym = sym.max(family.heat(k).unwrap().symmetry_defect());
    }
    let worst = mass.iter().map(|m| m.1).fold(0.0, f64::max);
    let pass = worst <= MASS_TOL && sym <= SYMMETRY_TOL;
    let per_t: Vec<String> = mass.iter().map(|(k, m)| format!("t=2^-{k}: {m:.2e}")).collect();
    report(
        3,
        "mass and symmetry",
        pass,
        format!(
            "mass defect {} (tol {MASS_TOL:e}); symmetry {sym:.2e} (tol {SYMMETRY_TOL:e})",
            per_t.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn c04_classical_reduction() {
    let (g, d) = &*FLAT;
    let pts = sample(g);
    let x = |i: usize| g.point(i)[0];
    let mut heat_err = Vec::new();
    let mut poisson_err = Vec::new();
    for t in [0.25, 1.0] {
        let h = d.kernel_entries(&d.heat_symbol(t), &pts, &pts);
        let p = d.kernel_entries(&d.poisson_symbol(t), &pts, &pts);
        let (mut eh, mut sh, mut ep, mut sp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for (a, &i) in pts.iter().enumerate() {
            for (b, &j) in pts.iter().enumerate() {
                let r = x(i) - x(j);
                let gauss = (4.0 * std::f64::consts::PI * t).powf(-0.5) * (-r * r / (4.0 * t)).exp();
                let cauchy = t / (std::f64::consts::PI * (t * t + r * r));
                eh = eh.max((h[(a, b)] - gauss).abs());
                sh = sh.max(gauss);
                ep = ep.max((p[(a, b)] - cauchy).abs());
                sp = sp.max(cauchy);
            }
        }
        heat_err.push((t, eh / sh));
        poisson_err.push((t, ep / sp));
    }
    let wh = heat_err.iter().map(|e| e.1).fold(0.0, f64::max);
    let wp = poisson_err.iter().map(|e| e.1).fold(0.0, f64::max);
    let pass = wh <= HEAT_REDUCTION_TOL && wp <= POISSON_REDUCTION_TOL;
    report(
        4,
        "classical reduction",
        pass,
        format!(
            "heat {:?} (tol {HEAT_REDUCTION_TOL:e}); Poisson {:?} (tol {POISSON_REDUCTION_TOL:e})",
            heat_err
                .iter()
                .map(|(t, e)| format!("t={t}: {e:.2e}"))
                .collect::<Vec<_>>(),
            poisson_err
                .iter()
                .map(|(t, e)| format!("t={t}: {e:.2e}"))
                .collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn c05_hankel_cross_check() {
    let g = CTX.grid();
    let d = CTX.lp().family().decomposition();
    let pts = sample(g);
    let t = 0.5;
    let spectral = d.kernel_entries(&d.heat_symbol(t), &pts, &pts);
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (a, &i) in pts.iter().enumerate() {
        for (b, &j) in pts.iter().enumerate() {
            let h = rank_one_heat_kernel(t, g.point(i)[0], g.point(j)[0], 0.5).unwrap();
            err = err.max((spectral[(a, b)] - h).abs());
            scale = scale.max(h.abs());
        }
    }
    let rel = err / scale;
    let pass = rel <= HANKEL_TOL;
    report(5, "spectral vs Hankel heat kernel", pass, format!("10x10 sample, relative {rel:.3e} (tol {HANKEL_TOL:e})"));
    assert!(pass);
}

#[test]
fn c06_almost_orthogonality() {
    let r = dunkl::verify::almost_orthogonality_decay(CTX.lp(), CTX.grid(), 5).unwrap();
    let pass = r.pass;
    report(
        6,
        "almost orthogonality",
        pass,
        format!(
            "eps' {:.4}, R^2 {:.4} over {} pairs (need eps' >= 0.3, R^2 >= 0.9); gamma {:.3}",
            r.epsilon_prime.unwrap_or(f64::NAN),
            r.r_squared.unwrap_or(f64::NAN),
            r.norms.len(),
            r.gamma.unwrap_or(f64::NAN)
        ),
    );
    assert!(pass);
}

#[test]
fn c07_contraction_and_inversion() {
    let rhos: Vec<(u32, f64)> = (0..=MAX_M)
        .map(|m| {
            let ctx = CTX.with_m(m).unwrap();
            let ops = ctx.build_operators().unwrap();
            (m, contraction_estimate(&ops, ctx.band()).rho_hat)
        })
        .collect();
    let crossing = rhos.iter().find(|r| r.1 < 1.0).map(|r| r.0);
    let m = CTX.window().m;
    let rho = CODEC.contraction().rho_hat;
    let runs: Vec<_> = (0..SEEDS)
        .into_par_iter()
        .map(|s| CODEC.invert(&CTX.bandlimited(s).unwrap()).unwrap().1)
        .collect();
    let converged = runs.iter().filter(|r| r.converged && r.iterations <= NEUMANN_MAX_ITER).count();
    let step = runs
        .iter()
        .flat_map(|r| r.ratios())
        .fold(0.0, f64::max);
    let pass = crossing.is_some() && rho < 1.0 && converged == SEEDS as usize && step <= rho + STEP_SLACK;
    report(
        7,
        "contraction and inversion",
        pass,
        format!(
            "rho_hat by M {:?}, first M below 1: {:?}; at M = {m}: {converged}/{SEEDS} converged to {NEUMANN_TOL:e} within {NEUMANN_MAX_ITER}, max step ratio {step:.4} (bound {:.4})",
            rhos.iter().map(|(m, r)| format!("{m}: {r:.3}")).collect::<Vec<_>>(),
            crossing,
            rho + STEP_SLACK
        ),
    );
    assert!(pass);
}

#[test]
fn c08_norm_equivalence() {
    let params = TLParams::parse_list(EQUIVALENCE_PARAMS).unwrap();
    let r = norm_equivalence_battery(&CODEC, &params, SEEDS as usize, 0).unwrap();
    let brackets: Vec<String> = params
        .iter()
        .zip(r.tl_min.iter().zip(&r.tl_max))
        .map(|(p, (lo, hi))| format!("({},{},{}): [{lo:.3}, {hi:.3}]", p.alpha, p.p, p.q))
        .collect();
    report(
        8,
        "norm equivalence",
        r.pass,
        format!(
            "L2 ratio [{:.3}, {:.3}] (need [0.25, 4]); TL ratios {} (need [0.1, 10])",
            r.l2_min,
            r.l2_max,
            brackets.join(", ")
        ),
    );
    assert!(r.pass);
}

#[test]
fn c09_duality_batteries() {
    let r = run_suite(Suite::Duality, &RunConfig::default(), Some(DUALITY_TRIALS), DUALITY_SEED).unwrap();
    let entries = r.results.as_array().unwrap();
    let detail: Vec<String> = entries
        .iter()
        .map(|e| {
            format!(
                "{}: C {:.4} (m=512) / {:.4} (m=256), factor {:.3}",
                e["case"].as_str().unwrap(),
                e["fine"]["c_hat"].as_f64().unwrap(),
                e["coarse"]["c_hat"].as_f64().unwrap(),
                e["stability"].as_f64().unwrap()
            )
        })
        .collect();
    report(9, "duality batteries", r.pass, format!("{} (need finite, factor <= 2)", detail.join("; ")));
    assert!(r.pass);
}

#[test]
fn c10_kernel_column_batteries() {
    let r = run_suite(Suite::Lemma51, &RunConfig::default(), None, 0).unwrap();
    let detail: Vec<String> = r
        .results
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            format!(
                "k={} {}: spread {:.2}{}",
                e["k"],
                e["case"].as_str().unwrap(),
                e["spread"].as_f64().unwrap(),
                if e["report"]["all_finite"].as_bool().unwrap() { "" } else { " NONFINITE" }
            )
        })
        .collect();
    report(10, "kernel column batteries", r.pass, format!("{} (need finite, spread <= 3 in B and D)", detail.join(", ")));
    assert!(r.pass);
}

#[test]
fn c11_determinism() {
    let cfg = RunConfig::default();
    let mut same = Vec::new();
    for (suite, trials) in [
        (Suite::Split, None),
        (Suite::Duality, Some(5)),
        (Suite::Lemma51, None),
        (Suite::Equivalence, Some(3)),
        (Suite::Orthogonality, None),
    ] {
        let a = run_suite(suite, &cfg, trials, 11).unwrap().to_json().unwrap();
        let b = run_suite(suite, &cfg, trials, 11).unwrap().to_json().unwrap();
        same.push((suite.name(), a == b));
    }
    let pass = same.iter().all(|s| s.1);
    report(11, "determinism", pass, format!("byte-identical reports: {same:?}"));
    assert!(pass);
}
