//! Property-based checks of the structural invariants.

use gexpect::catalog;
use gexpect::expectation::{ConditionalRepresentation, GExpectation, LsmcConfig, Method, Mode};
use gexpect::gdsl::{parse_claim, parse_expr, parse_generator, BinOp, Context, Expr, Func, Var};
use gexpect::model::{validate_assumptions, Claim, GeneratorSpec, SampleBox, TimeGrid};
use gexpect::properties::{
    all_pairs, check_convexity, check_generator_side, check_positive_homogeneity, check_subadditivity,
    check_translation_invariance, PropertyReport,
};
use gexpect::risk::{classify, rho_dynamic, rho_static, RiskConfig};
use gexpect::solvers::{simulate_paths, solve_lattice, solve_lsmc, LatticeScheme};
use proptest::prelude::*;

const LATTICE_TOL: f64 = 1e-9;

/// Every catalog driver has `K <= 1`, so two steps keep `K * dt <= 0.5`.
const MIN_STEPS: usize = 2;

fn grid(n: usize) -> TimeGrid<f64> {
    TimeGrid::new(1.0, n).unwrap()
}

fn a3_catalog() -> Vec<GeneratorSpec<f64>> {
    vec![
        catalog::zero(),
        catalog::abs_z(0.3),
        catalog::abs_z(-0.3),
        catalog::abs_z_time(0.3),
        catalog::soft_abs_z(),
        catalog::sin_y_min_z(),
    ]
}

fn strict(g: GeneratorSpec<f64>, n: usize) -> GExpectation<f64> {
    GExpectation::new(g, grid(n), Method::default(), Mode::Strict).unwrap()
}

/// `a x + b |x| + c min(x, 1)`.
fn base_claim(a: f64, b: f64, c: f64) -> Claim<f64> {
    Claim::scalar_fn(format!("{a}*x + {b}*abs(x) + {c}*min(x,1)"), move |x: f64| {
        a * x + b * x.abs() + c * x.min(1.0)
    })
}

/// `phi + m pos(x - k)` with `m >= 0`.
fn bumped(phi: &Claim<f64>, m: f64, k: f64) -> Claim<f64> {
    let bump = Claim::scalar_fn(format!("{m}*pos(x-{k})"), move |x: f64| m * (x - k).max(0.0));
    phi.plus(&bump)
}

fn slice(rep: ConditionalRepresentation<f64>) -> Vec<f64> {
    match rep {
        ConditionalRepresentation::Lattice { values, .. } => values,
        ConditionalRepresentation::Lsmc { .. } => panic!("lattice slice expected"),
    }
}

fn assert_report_invariants(r: &PropertyReport<f64>) {
    assert_eq!(r.pass, r.max_violation <= r.tol, "{r:?}");
    if r.instances_tested >= 1 {
        assert!(r.witness.is_some(), "{r:?}");
    }
}

fn driver() -> impl Strategy<Value = GeneratorSpec<f64>> {
    prop_oneof![
        (-1.0..1.0_f64).prop_map(catalog::abs_z),
        (-0.5..0.5_f64).prop_map(catalog::abs_z_time),
        Just(catalog::soft_abs_z()),
        Just(catalog::sin_y_min_z()),
        (-1.0..1.0_f64, -1.0..1.0_f64).prop_map(|(a, b)| catalog::linear(a, b)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grid_points_increase_and_close(t in 0.01..50.0_f64, n in 1usize..2000) {
        let g = TimeGrid::new(t, n).unwrap();
        prop_assert!((g.dt() * n as f64 - t).abs() <= t * f64::EPSILON);
        for i in 0..n {
            prop_assert!(g.time(i + 1) > g.time(i));
        }
    }

    /// Ordered terminal values stay ordered at every node while `K sqrt(dt) <= 1`.
    #[test]
    fn lattice_comparison(
        g in driver(),
        (a, b, c) in (-2.0..2.0_f64, -1.0..1.0_f64, -1.0..1.0_f64),
        (m, k) in (0.0..2.0_f64, -1.5..1.5_f64),
    ) {
        let lo = base_claim(a, b, c);
        let hi = bumped(&lo, m, k);
        let grid = grid(64);
        for scheme in [LatticeScheme::Implicit, LatticeScheme::Explicit] {
            let s_lo = solve_lattice(&g, &lo, grid, scheme).unwrap();
            let s_hi = solve_lattice(&g, &hi, grid, scheme).unwrap();
            for i in 0..=64 {
                for (u, v) in s_hi.values(i).unwrap().iter().zip(s_lo.values(i).unwrap()) {
                    prop_assert!(u >= v, "{} at level {i}: {u} < {v}", g.label());
                }
            }
        }
    }

    /// A bump on nodes of positive probability raises the value strictly.
    #[test]
    fn strict_comparison(
        g in driver(),
        (a, b, c) in (-2.0..2.0_f64, -1.0..1.0_f64, -1.0..1.0_f64),
        (m, k) in (0.1..2.0_f64, -1.5..1.5_f64),
    ) {
        let lo = base_claim(a, b, c);
        let hi = bumped(&lo, m, k);
        let grid = grid(64);
        let v_lo = solve_lattice(&g, &lo, grid, LatticeScheme::Implicit).unwrap().y0();
        let v_hi = solve_lattice(&g, &hi, grid, LatticeScheme::Implicit).unwrap().y0();
        prop_assert!(v_hi > v_lo);
    }

    #[test]
    fn constants_are_preserved_at_every_node(idx in 0usize..6, c in -10.0..10.0_f64, n in MIN_STEPS..80) {
        let g = a3_catalog().swap_remove(idx);
        let s = solve_lattice(&g, &Claim::constant(1, c), grid(n), LatticeScheme::Implicit).unwrap();
        for i in 0..=n {
            prop_assert!(s.values(i).unwrap().iter().all(|&v| v == c));
        }
        let ge = strict(g, n);
        prop_assert_eq!(ge.evaluate(&Claim::constant(1, c)).unwrap().value, c);
    }

    /// Drivers even in `z` price `phi(x)` and `phi(-x)` identically.
    #[test]
    fn mirrored_claims_have_equal_value(
        which in 0usize..3,
        (a, b, c) in (-2.0..2.0_f64, -1.0..1.0_f64, -1.0..1.0_f64),
        n in MIN_STEPS..100,
    ) {
        let g = [catalog::abs_z(0.3), catalog::abs_z_time(-0.3), catalog::soft_abs_z()][which].clone();
        let phi = base_claim(a, b, c);
        let mirrored = Claim::scalar_fn("mirror", move |x: f64| a * -x + b * x.abs() + c * (-x).min(1.0));
        let u = solve_lattice(&g, &phi, grid(n), LatticeScheme::Implicit).unwrap().y0();
        let v = solve_lattice(&g, &mirrored, grid(n), LatticeScheme::Implicit).unwrap().y0();
        prop_assert_eq!(u, v);
    }

    #[test]
    fn affine_drivers_pass_lipschitz_check(
        (a, b1, b2) in (-3.0..3.0_f64, -3.0..3.0_f64, -3.0..3.0_f64),
        seed in any::<u64>(),
    ) {
        let k = a.abs().max((b1 * b1 + b2 * b2).sqrt());
        let g = GeneratorSpec::from_fn(2, k, "affine", move |_, y: f64, z: &[f64]| a * y + b1 * z[0] + b2 * z[1]);
        let r = validate_assumptions(&g, &SampleBox::standard(1.0), 2_000, 1e-9, seed).unwrap();
        prop_assert!(r.a1_pass, "{r:?}");
    }

    #[test]
    fn z_multiplied_bodies_vanish_at_zero(e1 in safe_expr(), e2 in safe_expr(), seed in any::<u64>()) {
        let src = format!("z1 * {} + {} * z2", e1, e2);
        let g = parse_generator::<f64>(&src, 2).unwrap().with_lipschitz(1e6);
        let r = validate_assumptions(&g, &SampleBox::standard(1.0), 500, 1e-9, seed).unwrap();
        prop_assert_eq!(r.a3_max_abs, 0.0);
    }

    #[test]
    fn claim_round_trip(e in claim_expr()) {
        let printed = e.pretty_claim_1d();
        let back = parse_expr(&printed, Context::Claim { dim: 1 }).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn generator_round_trip(e in generator_expr()) {
        let printed = e.to_string();
        let back = parse_expr(&printed, Context::Generator { dim: 2 }).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn anti_monotone_risk(
        idx in 0usize..6,
        (a, b, c) in (-2.0..2.0_f64, -1.0..1.0_f64, -1.0..1.0_f64),
        (m, k) in (0.0..2.0_f64, -1.5..1.5_f64),
    ) {
        let ge = strict(a3_catalog().swap_remove(idx), 32);
        let lo = base_claim(a, b, c);
        let hi = bumped(&lo, m, k);
        prop_assert!(rho_static(&ge, &hi).unwrap() <= rho_static(&ge, &lo).unwrap() + LATTICE_TOL);
    }

    #[test]
    fn cash_invariance_for_y_free_drivers(
        idx in 0usize..5,
        (a, b, c) in (-2.0..2.0_f64, -1.0..1.0_f64, -1.0..1.0_f64),
        cash in -5.0..5.0_f64,
    ) {
        // The first five catalog drivers do not depend on y.
        let ge = strict(a3_catalog().swap_remove(idx), 32);
        let x = base_claim(a, b, c);
        let gap = rho_static(&ge, &x.shifted(cash)).unwrap() - rho_static(&ge, &x).unwrap() + cash;
        prop_assert!(gap.abs() <= LATTICE_TOL, "{gap}");
    }

    #[test]
    fn terminal_identity(idx in 0usize..6, (a, b, c) in (-2.0..2.0_f64, -1.0..1.0_f64, -1.0..1.0_f64)) {
        let ge = strict(a3_catalog().swap_remove(idx), 16);
        let x = base_claim(a, b, c);
        let rep = rho_dynamic(&ge, &x, 16).unwrap();
        let ConditionalRepresentation::Lattice { states, values, .. } = rep else { panic!() };
        for (s, v) in states.iter().zip(&values) {
            prop_assert_eq!(*v, -(a * s + b * s.abs() + c * s.min(1.0)));
        }
    }
}

fn number() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..4000).prop_map(|v| Expr::Number(v as f64 / 16.0)),
        (1u32..100, -8i32..8).prop_map(|(m, e)| Expr::Number(m as f64 * 10f64.powi(e))),
    ]
}

fn tree(leaf: BoxedStrategy<Expr>, unsafe_ops: bool) -> impl Strategy<Value = Expr> {
    leaf.prop_recursive(5, 48, 3, move |inner| {
        let mut funcs = vec![Func::Abs, Func::Sin, Func::Cos, Func::Pos];
        let mut ops = vec![BinOp::Add, BinOp::Sub, BinOp::Mul];
        if unsafe_ops {
            funcs.extend([Func::Sqrt, Func::Exp]);
            ops.push(BinOp::Div);
        }
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (proptest::sample::select(ops), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (proptest::sample::select(funcs), inner.clone()).prop_map(|(f, a)| Expr::Call(f, vec![a])),
            (any::<bool>(), proptest::collection::vec(inner, 2..4))
                .prop_map(|(min, args)| Expr::Call(if min { Func::Min } else { Func::Max }, args)),
        ]
    })
}

fn claim_expr() -> impl Strategy<Value = Expr> {
    tree(prop_oneof![number(), Just(Expr::Var(Var::X(0)))].boxed(), true)
}

fn generator_expr() -> impl Strategy<Value = Expr> {
    let var = proptest::sample::select(vec![Var::T, Var::Y, Var::Z(0), Var::Z(1)]).prop_map(Expr::Var);
    tree(prop_oneof![number(), var].boxed(), true)
}

/// Total, finite everywhere on the sampling box: no division, root or exponential.
fn safe_expr() -> impl Strategy<Value = String> {
    let var = proptest::sample::select(vec![Var::T, Var::Y, Var::Z(0), Var::Z(1)]).prop_map(Expr::Var);
    tree(prop_oneof![number(), var].boxed(), false).prop_map(|e| format!("({e})"))
}

#[test]
fn endpoint_weights_are_neutral() {
    let claims = catalog::claim_battery::<f64>();
    for g in a3_catalog() {
        let ge = strict(g, 32);
        let conv = check_convexity(&ge, &all_pairs(&claims), &[0.0, 1.0], Some(LATTICE_TOL)).unwrap();
        let hom = check_positive_homogeneity(&ge, &claims, &[0.0, 1.0], Some(LATTICE_TOL)).unwrap();
        for r in conv.reports().into_iter().chain(hom.reports()) {
            assert!(r.pass, "{}: {r:?}", ge.generator().label());
            assert_report_invariants(r);
        }
    }
}

#[test]
fn convexity_implies_translation_invariance() {
    let claims = catalog::claim_battery::<f64>();
    let constants = catalog::scalars(&catalog::CONSTANTS);
    let mut vacuous = 0;
    for g in a3_catalog() {
        let ge = strict(g, 32);
        let conv = check_convexity(&ge, &all_pairs(&claims), &catalog::scalars(&catalog::ALPHAS), Some(LATTICE_TOL))
            .unwrap();
        if !conv.pass() {
            vacuous += 1;
            continue;
        }
        let tr = check_translation_invariance(&ge, &claims, &constants, Some(10.0 * LATTICE_TOL)).unwrap();
        assert!(tr.pass(), "{}", ge.generator().label());
    }
    // Concave and y-dependent drivers fail convexity; the rest carry the chain.
    assert_eq!(vacuous, 2);
}

#[test]
fn sublinearity_matches_coherence() {
    let claims = catalog::claim_battery::<f64>();
    for g in a3_catalog() {
        let ge = strict(g, 32);
        let sub = check_subadditivity(&ge, &all_pairs(&claims), None).unwrap();
        let hom = check_positive_homogeneity(&ge, &claims, &catalog::scalars(&catalog::LAMBDAS), None).unwrap();
        let mut cfg = RiskConfig::standard(1.0);
        cfg.samples = 20_000;
        // Cash invariance is part of coherence and independent of sublinearity.
        let y_free = !ge.generator().label().starts_with("sin");
        let class = classify(&ge, &cfg).unwrap();
        assert_eq!(
            sub.pass() && hom.pass() && y_free,
            class.coherent,
            "{}",
            ge.generator().label()
        );
    }
}

#[test]
fn reports_are_deterministic() {
    let g = catalog::soft_abs_z::<f64>();
    let bx = SampleBox::standard(1.0);
    assert_eq!(
        check_generator_side(&g, &bx, 5_000, 9, 1e-9).unwrap(),
        check_generator_side(&g, &bx, 5_000, 9, 1e-9).unwrap()
    );
    assert_eq!(
        validate_assumptions(&g, &bx, 5_000, 1e-9, 9).unwrap(),
        validate_assumptions(&g, &bx, 5_000, 1e-9, 9).unwrap()
    );
    let ge = strict(g, 32);
    let claims = catalog::claim_battery::<f64>();
    let a = check_convexity(&ge, &all_pairs(&claims), &[0.5], None).unwrap();
    let b = check_convexity(&ge, &all_pairs(&claims), &[0.5], None).unwrap();
    assert_eq!(a.static_level, b.static_level);
    assert_eq!(a.dynamic_level, b.dynamic_level);
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn worker_count_does_not_change_results() {
    let g = catalog::sin_y_min_z::<f64>();
    let claim = parse_claim::<f64>("pos(x-0.5)", 1).unwrap();
    for seed in [0, 1, 12345] {
        let run = || {
            let paths = simulate_paths(1, grid(20), 5_000, seed).unwrap();
            let sol = solve_lsmc(&g, &claim, &paths, 3, 3).unwrap();
            let gen = check_generator_side(&g, &SampleBox::standard(1.0), 3_000, seed, 1e-9).unwrap();
            (sol.y0.to_bits(), sol.std_error.to_bits(), gen)
        };
        assert_eq!(in_pool(1, run), in_pool(4, run));
    }
    let lsmc = Method::Lsmc(LsmcConfig {
        paths: 4_000,
        ..Default::default()
    });
    let run = || {
        let ge = GExpectation::new(catalog::abs_z(0.3), grid(16), lsmc, Mode::Strict).unwrap();
        let claims = catalog::claim_battery::<f64>();
        let r = check_translation_invariance(&ge, &claims, &[1.0], None).unwrap();
        (r.static_level, r.dynamic_level)
    };
    assert_eq!(in_pool(1, run), in_pool(4, run));
}

#[test]
fn conditional_slices_shift_with_cash() {
    for g in a3_catalog().into_iter().take(5) {
        let ge = strict(g, 32);
        for c in catalog::claim_battery::<f64>() {
            let base = slice(ge.conditional(&c, 16).unwrap());
            let shifted = slice(ge.conditional(&c.shifted(2.0), 16).unwrap());
            for (u, v) in base.iter().zip(&shifted) {
                assert!((v - u - 2.0).abs() <= 1e-12);
            }
        }
    }
}
