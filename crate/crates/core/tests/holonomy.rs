mod common;

use common::*;
use mvlab_core::forms::{hodge, interior};
use mvlab_core::holonomy::{
    lambda_map, pq_projector_by_eigen, proj2, proj4_7, su_proj, SuTarget,
};
use mvlab_core::{make_structure, Endo, Error, KForm, StructureKind};
use nalgebra::DMatrix;
use proptest::prelude::*;

const LIN_TOL: f64 = 1e-12;

fn basis(n: usize, idx: &[usize]) -> KForm {
    KForm::basis(n, idx).unwrap()
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn mat_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// φ on the 1..7 slots of R^8.
fn phi8() -> KForm {
    indexed_form(
        8,
        0,
        &[
            ("123", 1.0),
            ("145", 1.0),
            ("167", 1.0),
            ("246", 1.0),
            ("257", -1.0),
            ("347", -1.0),
            ("356", -1.0),
        ],
    )
}

#[test]
fn g2_forms_match_reference() {
    let s = make_structure(StructureKind::G2);
    assert_eq!(s.phi(), &ref_phi());
    assert_eq!(s.psi(), &ref_star_phi());
    assert_eq!(s.phi().coeffs().iter().filter(|c| **c != 0.0).count(), 7);
    assert!(s.phi().coeffs().iter().all(|c| [0.0, 1.0, -1.0].contains(c)));
    assert_eq!(hodge(s.phi()), *s.psi());
}

#[test]
fn spin7_form_matches_reference_and_is_self_dual() {
    let s = make_structure(StructureKind::Spin7);
    assert_eq!(s.cayley(), &ref_cayley());
    assert_eq!(hodge(s.cayley()), *s.cayley());
    // Φ = e⁰∧φ + ∗₇φ
    let e0 = basis(8, &[0]);
    let psi8 = ref_star_phi().embed(8, 1).unwrap();
    assert_eq!(&e0.w(&phi8()) + &psi8, ref_cayley());
}

#[test]
fn su_forms_match_reference() {
    for nc in [3, 4] {
        let s = make_structure(StructureKind::su(nc).unwrap());
        let (om, re, im) = ref_su(nc);
        assert_eq!(s.omega(), &om, "nc={nc}");
        assert_eq!(s.re_omega(), &re, "nc={nc}");
        assert_eq!(s.im_omega(), &im, "nc={nc}");
        let j = s.j();
        let n = 2 * nc;
        assert!(j.compose(j).add(&Endo::identity(n)).max_abs_diff(&Endo::zeros(n)) == 0.0);
        for a in 0..nc {
            assert_eq!(j.apply(&unit(n, 2 * a)), unit(n, 2 * a + 1));
        }
    }
}

#[test]
fn su3_hodge_relations() {
    let s = make_structure(StructureKind::Su3);
    let om = s.omega();
    assert!(hodge(om).max_abs_diff(&om.w(om).scaled(0.5)) < LIN_TOL);
    assert_eq!(hodge(s.re_omega()), *s.im_omega());
    assert_eq!(hodge(s.im_omega()), -s.re_omega());
}

#[test]
fn su4_hodge_relations_and_induced_cayley() {
    let s = make_structure(StructureKind::Su4);
    let om = s.omega();
    let om2 = om.w(om);
    assert!(hodge(om).max_abs_diff(&om2.w(om).scaled(1.0 / 6.0)) < LIN_TOL);
    assert_eq!(hodge(&om2), om2);
    assert_eq!(hodge(s.re_omega()), *s.re_omega());
    assert_eq!(hodge(s.im_omega()), *s.im_omega());
    let induced = &om2.scaled(0.5) + s.re_omega();
    assert_eq!(induced, ref_cayley());
    assert_eq!(s.induced_spin7().unwrap().cayley(), &ref_cayley());
    assert!(make_structure(StructureKind::G2).induced_spin7().is_err());
}

fn check_bundle(kind: StructureKind, degree: usize, ranks: &[usize]) {
    let s = make_structure(kind);
    let b = s.bundle(degree).unwrap();
    let dim = b.components[0].1.nrows();
    let mut sum = DMatrix::<f64>::zeros(dim, dim);
    for (i, (label, p)) in b.components.iter().enumerate() {
        assert!(mat_err(&(p * p), p) < LIN_TOL, "{kind} {label} not idempotent");
        assert!(mat_err(&p.transpose(), p) < LIN_TOL, "{kind} {label} not symmetric");
        for (label2, q) in &b.components[i + 1..] {
            assert!((p * q).amax() < LIN_TOL, "{kind} {label} not orthogonal to {label2}");
        }
        let rank = p.clone().svd(false, false).rank(1e-8);
        assert_eq!(rank, ranks[i], "{kind} {label}");
        sum += p;
    }
    assert!(mat_err(&sum, &DMatrix::identity(dim, dim)) < LIN_TOL, "{kind} degree {degree}");
    assert_eq!(b.ranks().iter().map(|r| r.1).collect::<Vec<_>>(), ranks);
}

#[test]
fn projector_bundles() {
    check_bundle(StructureKind::G2, 2, &[7, 14]);
    check_bundle(StructureKind::Spin7, 2, &[7, 21]);
    check_bundle(StructureKind::Spin7, 4, &[1, 7, 27, 35]);
    check_bundle(StructureKind::Su4, 2, &[1, 6, 6, 15]);
    check_bundle(StructureKind::Su3, 2, &[1, 6, 8]);
    // [p,q] splittings in every degree.
    check_bundle(StructureKind::Su3, 3, &[2, 18]);
    check_bundle(StructureKind::Su4, 4, &[2, 32, 36]);
}

#[test]
fn pq_projectors_agree_with_eigen_route() {
    for nc in [2, 3, 4] {
        let s = make_structure(StructureKind::su(nc).unwrap());
        for k in 1..2 * nc {
            for q in 0..=k / 2 {
                let p = k - q;
                if p > nc {
                    continue;
                }
                let label = format!("[{p},{q}]");
                let a = s.projector(&label).unwrap();
                let b = pq_projector_by_eigen(nc, p, q);
                assert!(mat_err(a, &b) < 1e-10, "nc={nc} {label}");
            }
        }
    }
}

#[test]
fn induced_spin7_projectors_match_the_spin7_ones() {
    let a = make_structure(StructureKind::Su4).induced_spin7().unwrap();
    let b = make_structure(StructureKind::Spin7);
    for l in ["2_7", "2_21", "4_1", "4_7", "4_27", "4_35"] {
        assert!(mat_err(a.projector(l).unwrap(), b.projector(l).unwrap()) < LIN_TOL, "{l}");
    }
}

#[test]
fn su4_seven_dimensional_splits() {
    let s = make_structure(StructureKind::Su4);
    let sp = s.induced_spin7().unwrap();
    // Λ⁴₇ = R ImΩ ⊕ ω∧A₋ and Λ²₇ = Rω ⊕ A₊
    let p4 = s.projector("ImOmega").unwrap() + s.projector("omega^A-").unwrap();
    assert!(mat_err(&p4, sp.projector("4_7").unwrap()) < LIN_TOL);
    let p2 = s.projector("omega").unwrap() + s.projector("A+").unwrap();
    assert!(mat_err(&p2, sp.projector("2_7").unwrap()) < LIN_TOL);
}

#[test]
fn proj2_spin7_lambda_example() {
    let s = make_structure(StructureKind::Spin7);
    // 2λ²(e¹) = e⁰¹ + i(e₁)φ = e⁰¹ + e²³ + e⁴⁵ + e⁶⁷
    let a = indexed_form(8, 0, &[("01", 1.0), ("23", 1.0), ("45", 1.0), ("67", 1.0)]);
    let via_interior = &basis(8, &[0, 1]) + &interior(&unit(8, 1), &phi8()).unwrap();
    assert_eq!(a, via_interior);
    let parts = proj2(&s, &a).unwrap();
    assert_eq!(parts[0].0, "2_7");
    assert!(parts[0].1.max_abs_diff(&a) < LIN_TOL);
    assert!(parts[1].1.max_abs() < LIN_TOL);
    let l2 = lambda_map(2, &basis(8, &[1])).unwrap();
    assert!(l2.max_abs_diff(&a.scaled(0.5)) < LIN_TOL);
    assert!((l2.norm() - 1.0).abs() < LIN_TOL);
}

#[test]
fn su4_two_form_eigenvalues() {
    let s = make_structure(StructureKind::Su4);
    let om2 = s.omega().power(2);
    let beta = indexed_form(8, 0, &[("02", 1.0), ("13", -1.0)]);
    let beta_p = indexed_form(8, 0, &[("01", 1.0), ("23", -1.0)]);
    assert_eq!(hodge(&om2.w(&beta)), beta.scaled(2.0));
    assert_eq!(hodge(&om2.w(&beta_p)), beta_p.scaled(-2.0));
    assert_eq!(hodge(&om2.w(s.omega())), s.omega().scaled(6.0));
    for (t, sign) in [(SuTarget::APlus, 2.0), (SuTarget::AMinus, -2.0)] {
        let b = su_proj(&s, &beta, t).unwrap();
        let img = hodge(&s.re_omega().w(&b));
        assert!(img.max_abs_diff(&b.scaled(sign)) < LIN_TOL);
    }
    let sum = &su_proj(&s, &beta, SuTarget::APlus).unwrap() + &su_proj(&s, &beta, SuTarget::AMinus).unwrap();
    assert!(sum.max_abs_diff(&beta) < LIN_TOL);
    assert!(su_proj(&s, &beta_p, SuTarget::Primitive11).unwrap().max_abs_diff(&beta_p) < LIN_TOL);
}

#[test]
fn proj2_components_sum_and_lie_in_eigenspaces() {
    let mut r = rng(2);
    let cases: [(StructureKind, Vec<(&str, f64)>); 3] = [
        (StructureKind::G2, vec![("2_7", 2.0), ("2_14", -1.0)]),
        (StructureKind::Spin7, vec![("2_7", 3.0), ("2_21", -1.0)]),
        (StructureKind::Su3, vec![("omega", 2.0), ("[2,0]", 1.0), ("[1,1]_0", -1.0)]),
    ];
    for (kind, eig) in cases {
        let s = make_structure(kind);
        let n = kind.dim();
        let a = random_form(&mut r, n, 2, 2.0);
        let parts = proj2(&s, &a).unwrap();
        let mut sum = KForm::zeros(n, 2);
        for (label, c) in &parts {
            sum += c;
            let lam = eig.iter().find(|e| e.0 == label).unwrap().1;
            let op = match kind {
                StructureKind::G2 => hodge(&s.phi().w(c)),
                StructureKind::Spin7 => hodge(&s.cayley().w(c)),
                // SU(3): ∗(ω∧β) = β on [[2,0]], -β on [1,1]_0, 2ω on ω
                _ => hodge(&s.omega().w(c)),
            };
            assert!(op.max_abs_diff(&c.scaled(lam)) < 1e-11, "{kind} {label}");
        }
        assert!(sum.max_abs_diff(&a) < LIN_TOL);
    }
    let g2 = make_structure(StructureKind::G2);
    assert!(matches!(proj2(&g2, &basis(8, &[0, 1])), Err(Error::InvalidInput(_))));
}

#[test]
fn lambda_maps() {
    let mut r = rng(9);
    assert_eq!(lambda_map(4, &KForm::zeros(8, 1)).unwrap(), KForm::zeros(8, 4));
    assert!(matches!(lambda_map(2, &basis(8, &[0])), Err(Error::InvalidInput(_))));
    assert!(lambda_map(3, &basis(8, &[1])).is_err());
    let s = make_structure(StructureKind::Spin7);
    for _ in 0..100 {
        let mut v = uniform_vec(&mut r, 8, 2.0);
        v[0] = 0.0;
        let a = KForm::one_form(&v);
        let l2 = lambda_map(2, &a).unwrap();
        let l4 = lambda_map(4, &a).unwrap();
        let l6 = lambda_map(6, &a).unwrap();
        for l in [&l2, &l4, &l6] {
            assert!((l.norm() - a.norm()).abs() < LIN_TOL);
        }
        assert!(l6.max_abs_diff(&hodge(&l2)) < LIN_TOL);
        assert!(s.pr("2_7", &l2).max_abs_diff(&l2) < LIN_TOL);
        assert!(s.pr("4_7", &l4).max_abs_diff(&l4) < LIN_TOL);
    }
    // Orthonormal frames.
    for k in [2, 4, 6] {
        for u in 1..8 {
            for v in 1..8 {
                let d = lambda_map(k, &basis(8, &[u])).unwrap().dot(&lambda_map(k, &basis(8, &[v])).unwrap());
                let want = if u == v { 1.0 } else { 0.0 };
                assert!((d - want).abs() < LIN_TOL);
            }
        }
    }
}

#[test]
fn proj4_7_examples() {
    let s = make_structure(StructureKind::Spin7);
    let l = lambda_map(4, &basis(8, &[3])).unwrap();
    assert!(proj4_7(&s, &l).unwrap().max_abs_diff(&l) < LIN_TOL);
    assert!(proj4_7(&s, s.cayley()).unwrap().max_abs() < LIN_TOL);
    let mut r = rng(4);
    for _ in 0..20 {
        let xi = random_form(&mut r, 8, 4, 2.0);
        let p = proj4_7(&s, &xi).unwrap();
        assert!(p.max_abs_diff(&s.pr("4_7", &xi)) < LIN_TOL);
        assert!(proj4_7(&s, &p).unwrap().max_abs_diff(&p) < LIN_TOL);
    }
    let g2 = make_structure(StructureKind::G2);
    assert!(proj4_7(&g2, &KForm::zeros(8, 4)).is_err());
    assert!(proj4_7(&s, &KForm::zeros(8, 3)).is_err());
}

#[test]
fn su4_four_form_norm_relation() {
    let s = make_structure(StructureKind::Su4);
    let mut r = rng(6);
    for _ in 0..50 {
        let xi = random_form(&mut r, 8, 4, 2.0);
        let lhs = 2.0 * s.pr("omega^A-", &xi).norm_sq();
        let rhs = s.pr("A-", &hodge(&s.omega().w(&xi))).norm_sq();
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs));
    }
}

#[test]
fn su_proj_examples() {
    let s = make_structure(StructureKind::Su3);
    let om = s.omega();
    assert!(su_proj(&s, om, SuTarget::PQ(1, 1)).unwrap().max_abs_diff(om) < LIN_TOL);
    assert!(su_proj(&s, om, SuTarget::PQ(2, 0)).unwrap().max_abs() < LIN_TOL);
    assert!(su_proj(&s, om, SuTarget::PQ(2, 1)).is_err());
    assert!(su_proj(&make_structure(StructureKind::G2), &KForm::zeros(7, 2), SuTarget::PQ(1, 1)).is_err());
    let mut r = rng(8);
    for _ in 0..50 {
        let u = uniform_vec(&mut r, 6, 2.0);
        let a = interior(&u, s.re_omega()).unwrap();
        assert!(su_proj(&s, &a, SuTarget::PQ(2, 0)).unwrap().max_abs_diff(&a) < LIN_TOL);
        let b = random_form(&mut r, 6, 2, 2.0);
        let lhs = hodge(&su_proj(&s, &b, SuTarget::PQ(2, 0)).unwrap());
        let rhs = su_proj(&s, &hodge(&b), SuTarget::PQ(3, 1)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < LIN_TOL);
    }
}

#[test]
fn g2_metric_recovery() {
    let phi = ref_phi();
    for i in 0..7 {
        for j in 0..7 {
            let a = interior(&unit(7, i), &phi).unwrap();
            let b = interior(&unit(7, j), &phi).unwrap();
            let v = wedge_brute(&wedge_brute(&a, &b), &phi).coeffs()[0] / 6.0;
            assert_eq!(v, if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn su3_contractions() {
    let s = make_structure(StructureKind::Su3);
    let mut r = rng(10);
    for _ in 0..1000 {
        let u = uniform_vec(&mut r, 6, 2.0);
        let a = interior(&u, s.re_omega()).unwrap();
        let ju = KForm::one_form(&s.j().apply(&u));
        let uf = KForm::one_form(&u);
        assert!(hodge(&a.w(s.re_omega())).max_abs_diff(&ju.scaled(2.0)) < LIN_TOL);
        assert!(hodge(&a.w(s.im_omega())).max_abs_diff(&uf.scaled(-2.0)) < LIN_TOL);
        assert!((a.norm_sq() - 2.0 * uf.norm_sq()).abs() < 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn g2_contraction_identities(u in prop::collection::vec(-2.0f64..2.0, 7)) {
        let (phi, psi) = (ref_phi(), ref_star_phi());
        let star_u = hodge(&KForm::one_form(&u));
        let iphi = interior(&u, &phi).unwrap();
        let ipsi = interior(&u, &psi).unwrap();
        prop_assert!(phi.w(&ipsi).max_abs_diff(&star_u.scaled(-4.0)) < LIN_TOL);
        prop_assert!(psi.w(&iphi).max_abs_diff(&star_u.scaled(3.0)) < LIN_TOL);
        prop_assert!(phi.w(&iphi).max_abs_diff(&hodge(&iphi).scaled(2.0)) < LIN_TOL);
    }

    #[test]
    fn spin7_eigen_law_and_wedge_split(seed in any::<u64>()) {
        let s = make_structure(StructureKind::Spin7);
        let mut r = rng(seed);
        let b7 = s.pr("2_7", &random_form(&mut r, 8, 2, 2.0));
        let c7 = s.pr("2_7", &random_form(&mut r, 8, 2, 2.0));
        let b21 = s.pr("2_21", &random_form(&mut r, 8, 2, 2.0));
        let c21 = s.pr("2_21", &random_form(&mut r, 8, 2, 2.0));
        prop_assert!(b7.w(s.cayley()).max_abs_diff(&hodge(&b7).scaled(3.0)) < 1e-11);
        prop_assert!(b21.w(s.cayley()).max_abs_diff(&hodge(&b21).scaled(-1.0)) < 1e-11);
        prop_assert!(proj4_7(&s, &b7.w(&c7)).unwrap().max_abs() < 1e-11);
        prop_assert!(proj4_7(&s, &b21.w(&c21)).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn su3_wedge_norms(seed in any::<u64>()) {
        let s = make_structure(StructureKind::Su3);
        let mut r = rng(seed);
        let b = random_form(&mut r, 6, 2, 2.0);
        let p = 2.0 * s.pr("[2,0]", &b).norm_sq();
        prop_assert!((b.w(s.re_omega()).norm_sq() - p).abs() < 1e-10);
        prop_assert!((b.w(s.im_omega()).norm_sq() - p).abs() < 1e-10);
    }
}
