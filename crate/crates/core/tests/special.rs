mod common;

use common::*;
use mvlab_core::identity::lab;
use mvlab_core::special::*;
use mvlab_core::torus::{self, curvature, form_at, gauge_shift, random_potential, ConnectionField, FlowConfig, TorusGrid};
use mvlab_core::{Error, Exec, KForm, StructureKind};
use proptest::prelude::*;
use std::f64::consts::PI;

const EX: Exec = Exec::Parallel;
const TAU: f64 = 2.0 * PI;

fn grid(n: usize) -> TorusGrid {
    TorusGrid::new(&vec![4; n]).unwrap()
}

fn constant(n: usize, form: KForm, s: Option<StructureKind>) -> ConnectionField {
    constant_field(grid(n), form, s).unwrap()
}

const G2: SpecialKind = SpecialKind::G2;
const SPIN7: SpecialKind = SpecialKind::Spin7;
const DHYM3: SpecialKind = SpecialKind::Dhym { nc: 3, theta: 0.0 };

fn solution(kind: SpecialKind, seed: u64) -> KForm {
    newton_with_retries(kind, seed, 20).unwrap().form
}

/// 1 − ½⟨E², Φ⟩ + ∗E⁴/24 from brute-force wedges.
fn cayley_integrand(e: &KForm) -> f64 {
    let e2 = wedge_brute(e, e);
    let e4 = wedge_brute(&e2, &e2);
    1.0 - 0.5 * e2.dot(&ref_cayley()) + e4.coeffs()[0] / 24.0
}

#[test]
fn flat_connections_and_phase() {
    for (n, kind) in [(8, SPIN7), (7, G2), (6, DHYM3), (6, SpecialKind::Dhym { nc: 3, theta: PI })] {
        let r = ddt_residual(&constant(n, KForm::zeros(n, 2), None), kind, 1e-12, EX).unwrap();
        assert!(r.is_solution, "{kind:?}");
        // sin π is not exactly zero in floating point.
        assert!(r.max_norm() < 1e-15);
    }
    let r = ddt_residual(
        &constant(6, KForm::zeros(6, 2), None),
        SpecialKind::Dhym { nc: 3, theta: 0.3 },
        1e-12,
        EX,
    )
    .unwrap();
    assert!(!r.is_solution);
    assert!((r.get("F2").unwrap().linf - 0.3f64.sin()).abs() < 1e-15);
}

#[test]
fn spin7_single_line_is_not_a_solution() {
    let e = KForm::from_terms(8, &[(&[0, 1], 0.8)]).unwrap();
    let r = ddt_residual(&constant(8, e, None), SPIN7, 1e-10, EX).unwrap();
    assert!(!r.is_solution);
    let f1 = r.get("F1").unwrap();
    assert!(f1.l2 > 0.1);
    // Constant field: L² over the unit torus equals the pointwise norm.
    assert!((f1.l2 - f1.linf).abs() < 1e-12);
    assert_eq!(r.components.len(), 2);
}

#[test]
fn residual_validation_and_json() {
    let c = constant(7, KForm::zeros(7, 2), None);
    assert!(matches!(ddt_residual(&c, SPIN7, 1e-9, EX), Err(Error::InvalidInput(_))));
    assert!(ddt_residual(&c, SpecialKind::Dhym { nc: 5, theta: 0.0 }, 1e-9, EX).is_err());
    let r = ddt_residual(&c, G2, 1e-9, EX).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    assert!(s.contains(r#""kind":"g2""#), "{s}");
    let back: DdtResidual = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
}

#[test]
fn newton_solutions_are_equality_cases() {
    for seed in [1, 2, 3] {
        let sol = newton_with_retries(G2, seed, 20).unwrap();
        assert!(sol.residual < 1e-12 && sol.form.norm() > 1e-3);
        let f = &sol.form;
        let cal = 1.0 - 0.5 * wedge_brute(f, f).dot(&ref_star_phi());
        assert!((cal.abs() - det_one_plus(f).sqrt()).abs() < 1e-9, "G2 seed {seed}");
        let r = ddt_residual(&constant(7, f.clone(), Some(StructureKind::G2)), G2, 1e-10, EX).unwrap();
        assert!(r.is_solution);

        let f = solution(SPIN7, seed);
        assert!((cayley_integrand(&f).abs() - det_one_plus(&f).sqrt()).abs() < 1e-9, "Spin7 seed {seed}");
        let r = ddt_residual(&constant(8, f, None), SPIN7, 1e-10, EX).unwrap();
        assert!(r.is_solution);

        let f = solution(DHYM3, seed);
        let s = lab().su(3).unwrap();
        assert!(s.pr("[2,0]", &f).norm() < 1e-10);
        let r = ddt_residual(&constant(6, f, None), DHYM3, 1e-10, EX).unwrap();
        assert!(r.is_solution);
    }
}

#[test]
fn newton_is_deterministic_per_seed() {
    let a = newton_constant_ddt(G2, 11);
    let b = newton_constant_ddt(G2, 11);
    match (a, b) {
        (Ok(a), Ok(b)) => {
            assert_eq!(a, b);
            assert!(a.iterations <= 50 && a.residual < 1e-12);
        }
        (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
        _ => panic!("same seed gave different outcomes"),
    }
    assert!(matches!(
        newton_constant_ddt(SpecialKind::Dhym { nc: 5, theta: 0.0 }, 0),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn spin7_equations_on_solutions_and_perturbations() {
    let mut r = rng(8);
    for seed in [4, 5] {
        let f = solution(SPIN7, seed);
        let c = constant(8, f.clone(), Some(StructureKind::Spin7));
        let eb = energy_bound_report(&c, SPIN7, EX).unwrap();
        assert!(eb.min_abs_integrand > 0.0);
        assert!(eb.slack.abs() < 1e-9);
        for scale in [1e-3, 1e-4, 1e-5] {
            let mut p = f.clone();
            p.axpy(scale, &random_form(&mut r, 8, 2, 1.0));
            let res = ddt_residual(&constant(8, p.clone(), None), SPIN7, 0.0, EX).unwrap();
            let (f1, f2) = (res.get("F1").unwrap().linf, res.get("F2").unwrap().linf);
            assert!(f2 < 100.0 * f1, "F2 {f2} vs F1 {f1}");
            let eb = energy_bound_report(&constant(8, p, None), SPIN7, EX).unwrap();
            assert!(eb.slack > 0.0, "scale {scale}");
        }
    }
}

#[test]
fn energy_bound_examples() {
    let flat = constant(8, KForm::zeros(8, 2), None);
    let eb = energy_bound_report(&flat, SPIN7, EX).unwrap();
    assert!((eb.calibrated_integral - 1.0).abs() < 1e-14);
    assert!((eb.volume - 1.0).abs() < 1e-14);
    assert!(eb.slack.abs() < 1e-14);

    let g = grid(7);
    let pot = random_potential(&g, 0.3, 2);
    let bg = KForm::from_terms(7, &[(&[0, 3], 0.4)]).unwrap();
    let c = ConnectionField::new(g.clone(), pot, bg, Some(StructureKind::G2)).unwrap();
    let eb = energy_bound_report(&c, G2, EX).unwrap();
    assert!(eb.slack > 0.0);
    let mut r = rng(4);
    let shifted = gauge_shift(&c, &uniform_vec(&mut r, g.points(), 2.0), EX).unwrap();
    let eb2 = energy_bound_report(&shifted, G2, EX).unwrap();
    assert!((eb2.calibrated_integral - eb.calibrated_integral).abs() < 1e-12);

    // For constant F₀ and a = df the calibrated integral does not depend on f.
    let f = g.sample(|x| (TAU * x[0]).sin() * (TAU * x[4]).cos(), EX);
    let exact = ConnectionField::new(g.clone(), torus::d(&g, 0, &f, EX).unwrap(), c.background.clone(), None).unwrap();
    let base = energy_bound_report(&constant(7, c.background.clone(), None), G2, EX).unwrap();
    let eb3 = energy_bound_report(&exact, G2, EX).unwrap();
    assert!((eb3.calibrated_integral - base.calibrated_integral).abs() < 1e-12);

    assert!(energy_bound_report(&flat, G2, EX).is_err());
}

#[test]
fn dhym_energy_bound_on_solutions() {
    for seed in [1, 2] {
        let f = solution(DHYM3, seed);
        let eb = energy_bound_report(&constant(6, f, None), DHYM3, EX).unwrap();
        assert!(eb.slack.abs() < 1e-9);
    }
}

#[test]
fn angle_function_examples() {
    let c = constant(6, KForm::zeros(6, 2), Some(StructureKind::Su3));
    let a = angle_function(&c, EX).unwrap();
    assert!(a.theta.iter().all(|t| *t == 0.0));
    assert!(a.r.iter().all(|r| *r == 1.0));

    // Frame e²³ is array (0, 1) in the SU3 convention.
    let lam = 0.7;
    let c = constant(6, KForm::from_terms(6, &[(&[0, 1], lam)]).unwrap(), Some(StructureKind::Su3));
    let a = angle_function(&c, EX).unwrap();
    for p in [0, 100, 4095] {
        assert!((a.zeta_re[p] - 1.0).abs() < 1e-15 && (a.zeta_im[p] - lam).abs() < 1e-15);
        assert!((a.theta[p] - lam.atan()).abs() < 1e-15);
        assert!((a.zeta(p) - a.r[p] * nalgebra::Complex::from_polar(1.0, a.theta[p])).norm() < 1e-15);
    }
    assert!(angle_function(&constant(6, KForm::zeros(6, 2), None), EX).is_err());
}

#[test]
fn angle_modulus_is_a_determinant_on_11_forms() {
    let mut r = rng(12);
    for (nc, kind) in [(3, StructureKind::Su3), (4, StructureKind::Su4)] {
        let s = lab().su(nc).unwrap();
        for _ in 0..50 {
            let e = s.pr("[1,1]", &random_form(&mut r, 2 * nc, 2, 1.5));
            let a = angle_function(&constant(2 * nc, e.clone(), Some(kind)), EX).unwrap();
            let want = det_one_plus(&e);
            assert!((a.r[0] * a.r[0] - want).abs() < 1e-10 * want);
            assert!(a.r[0] >= 1.0 - 1e-12);
        }
    }
}

#[test]
fn angle_derivative_wraps_branch_cuts() {
    let g = TorusGrid::new(&[8, 4]).unwrap();
    let theta = g.sample(|x| (2.0 * TAU * x[0]).rem_euclid(TAU) - PI, EX);
    let d0 = angle_derivative(&g, &theta, 0);
    assert!(d0.iter().all(|v| (v - 2.0 * TAU).abs() < 1e-12), "{d0:?}");
    assert!(angle_derivative(&g, &theta, 1).iter().all(|v| *v == 0.0));
}

#[test]
fn dazord_constant_field_and_precondition() {
    let s = lab().su(3).unwrap();
    let mut r = rng(3);
    let e = s.pr("[1,1]", &random_form(&mut r, 6, 2, 1.0));
    let cmp = dazord_compare(&constant(6, e, Some(StructureKind::Su3)), EX).unwrap();
    assert!(cmp.lhs_l2 < 1e-12 && cmp.rhs_l2 < 1e-12);
    let bad = KForm::from_terms(6, &[(&[0, 2], 0.5), (&[1, 3], -0.5)]).unwrap();
    assert!(s.pr("[2,0]", &bad).norm() > 0.1);
    let c = constant(6, bad, Some(StructureKind::Su3));
    assert!(matches!(dazord_compare(&c, EX), Err(Error::InvalidInput(_))));
}

#[test]
fn dazord_second_order_agreement() {
    let errs: Vec<f64> = [16, 32]
        .iter()
        .map(|&nn| {
            let c = analytic_kahler_field(nn, 0.5, EX).unwrap();
            assert!(max_20_part(&c, EX).unwrap() < 1e-12);
            let cmp = dazord_compare(&c, EX).unwrap();
            assert!(cmp.lhs_l2 > 0.1);
            cmp.rel_error
        })
        .collect();
    let ratio = errs[0] / errs[1];
    assert!((3.0..=5.0).contains(&ratio), "{errs:?}");
}

fn diagonal_field(nn: usize) -> ConnectionField {
    let g = TorusGrid::new(&[nn, 4, nn, 4, 4, 4]).unwrap();
    let f = g.sample(|x| 0.3 * ((TAU * x[0]).sin() + 0.5 * (TAU * x[2]).cos()) / (TAU * TAU), EX);
    let a = ddc_potential(&g, &f, EX).unwrap();
    let bg = KForm::from_terms(6, &[(&[0, 1], 0.4), (&[4, 5], -0.2)]).unwrap();
    ConnectionField::new(g, a, bg, Some(StructureKind::Su3)).unwrap()
}

#[test]
fn angle_derivative_matches_eigenvalue_formula() {
    let mut errs = Vec::new();
    for nn in [8, 16, 32] {
        let c = diagonal_field(nn);
        let chk = angle_derivative_check(&c, 1e-12, EX).unwrap();
        assert_eq!(chk.points, c.grid.points());
        errs.push(chk.max_abs_diff);
    }
    // The 8-point grid is still pre-asymptotic.
    assert!(errs[0] > errs[1]);
    assert!((3.0..5.0).contains(&(errs[1] / errs[2])), "{errs:?}");
}

#[test]
fn ddc_potential_has_no_20_part() {
    let g = TorusGrid::new(&[6, 4, 4, 6, 4, 4]).unwrap();
    let mut r = rng(6);
    let f = uniform_vec(&mut r, g.points(), 1.0);
    let a = ddc_potential(&g, &f, EX).unwrap();
    let c = ConnectionField::new(g.clone(), a, KForm::zeros(6, 2), Some(StructureKind::Su3)).unwrap();
    assert!(max_20_part(&c, EX).unwrap() < 1e-12);
    assert!(ddc_potential(&grid(7), &vec![0.0; 4usize.pow(7)], EX).is_err());
}

#[test]
fn pullback_examples() {
    let flat = constant(7, KForm::zeros(7, 2), Some(StructureKind::G2));
    let up = pullback_circle(&flat, 4).unwrap();
    assert_eq!(up.n(), 8);
    assert_eq!(up.structure, Some(StructureKind::Spin7));
    assert_eq!(ddt_residual(&up, SPIN7, 0.0, EX).unwrap().max_norm(), 0.0);

    let f = solution(G2, 7);
    let up = pullback_circle(&constant(7, f, Some(StructureKind::G2)), 4).unwrap();
    assert!(ddt_residual(&up, SPIN7, 1e-9, EX).unwrap().is_solution);

    let f = solution(DHYM3, 7);
    let up = pullback_circle(&constant(6, f, Some(StructureKind::Su3)), 4).unwrap();
    assert!(ddt_residual(&up, G2, 1e-9, EX).unwrap().is_solution);

    assert!(matches!(
        pullback_circle(&constant(8, KForm::zeros(8, 2), None), 4),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn pullback_keeps_curvature_and_residuals() {
    let g = TorusGrid::new(&[4, 6, 4, 4, 4, 4, 4]).unwrap();
    let bg = KForm::from_terms(7, &[(&[1, 2], 0.5)]).unwrap();
    let c = ConnectionField::new(g.clone(), random_potential(&g, 0.2, 5), bg, Some(StructureKind::G2)).unwrap();
    let base = ddt_residual(&c, G2, 1e-9, EX).unwrap();
    assert!(!base.is_solution);
    let up = pullback_circle(&c, 4).unwrap();
    assert!(ddt_residual(&up, SPIN7, 1e-9, EX).unwrap().max_norm() > 0.0);
    // i(∂/∂x)E = 0 and the remaining components agree with the base.
    let e = curvature(&c, EX);
    let eu = curvature(&up, EX);
    for p in [0, 1000, g.points() - 1] {
        let lifted = form_at(&c.grid, 2, &e, p).embed(8, 1).unwrap();
        for layer in 0..4 {
            assert_eq!(form_at(&up.grid, 2, &eu, layer * g.points() + p), lifted);
        }
    }
}

#[test]
fn dhym_flow_from_small_data_flattens() {
    let g = TorusGrid::new(&[4; 6]).unwrap();
    let c = ConnectionField::new(g.clone(), random_potential(&g, 0.05, 3), KForm::zeros(6, 2), Some(StructureKind::Su3)).unwrap();
    let e0 = g.l2_norm(&curvature(&c, EX));
    let out = torus::run_flow(
        &c,
        &FlowConfig {
            steps: 200,
            record_every: 50,
            ..Default::default()
        },
    )
    .unwrap();
    let e1 = g.l2_norm(&curvature(&out.field, EX));
    assert!(e1 < 0.5 * e0, "{e0} -> {e1}");
    let rows = &out.trace.rows;
    assert!(rows[200].res_2 < rows[0].res_2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn slack_is_nonnegative_on_random_constants(seed in any::<u64>()) {
        let mut r = rng(seed);
        for (n, kind) in [(8, SPIN7), (7, G2), (6, DHYM3)] {
            let e = random_form(&mut r, n, 2, 1.5);
            let eb = energy_bound_report(&constant(n, e, None), kind, EX).unwrap();
            prop_assert!(eb.slack >= -1e-12);
        }
    }
}
