//! Residual evaluators for the pointwise equalities and inequalities relating
//! det(I + F♯) to calibrated terms, plus seeded randomized suites.
//!
//! All identities are written for a real 2-form F; the connection curvature
//! is iF. [`cayley_body_convention`] evaluates the same identity with complex
//! arithmetic on iF as a cross-check of the sign bookkeeping.

use std::sync::OnceLock;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{self, powers};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::forms::{binomial, det_one_plus, hodge, interior, ComplexKForm, KForm};
use crate::holonomy::{
    make_structure, project_complex, HolonomyStructure, StructureKind,
};

pub const DEFAULT_TOL: f64 = 1e-9;

/// One evaluated identity: |LHS − RHS| (or the violation of an inequality)
/// and the scale it is measured against.
#[derive(Clone, Debug, PartialEq)]
pub struct Eval {
    pub id: String,
    pub residual: f64,
    pub scale: f64,
    /// Bound minus value, for inequalities.
    pub slack: Option<f64>,
}

impl Eval {
    pub fn rel(&self) -> f64 {
        self.residual / self.scale
    }
}

fn scale_of(lhs: f64, rhs: f64, terms: &[f64]) -> f64 {
    terms
        .iter()
        .fold(1f64.max(lhs.abs()).max(rhs.abs()), |m, t| m.max(t.abs()))
}

/// Scalar identity LHS = RHS; `terms` are the individual summands.
pub fn eq(id: impl Into<String>, lhs: f64, rhs: f64, terms: &[f64]) -> Eval {
    Eval {
        id: id.into(),
        residual: (lhs - rhs).abs(),
        scale: scale_of(lhs, rhs, terms),
        slack: None,
    }
}

/// Form identity A = B, measured in the Euclidean norm.
pub fn eq_form(id: impl Into<String>, a: &KForm, b: &KForm) -> Eval {
    Eval {
        id: id.into(),
        residual: (a - b).norm(),
        scale: 1f64.max(a.norm()).max(b.norm()),
        slack: None,
    }
}

/// Inequality value ≤ bound.
pub fn le(id: impl Into<String>, value: f64, bound: f64) -> Eval {
    Eval {
        id: id.into(),
        residual: (value - bound).max(0.0),
        scale: scale_of(value, bound, &[]),
        slack: Some(bound - value),
    }
}

/// Aggregated residual statistics for one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity_id: String,
    pub samples: usize,
    pub max_rel_residual: f64,
    pub mean_rel_residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_slack: Option<f64>,
    pub worst_index: usize,
    pub worst_input: serde_json::Value,
}

impl ResidualReport {
    /// Aggregates evaluations of one identity, given in sample order.
    pub fn from_evals(
        id: &str,
        evals: &[(usize, Eval)],
        inputs: &dyn Fn(usize) -> serde_json::Value,
        tol: f64,
    ) -> ResidualReport {
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let mut worst = evals.first().map_or(0, |e| e.0);
        let mut scale = 0.0f64;
        let mut smin: Option<f64> = None;
        let mut smax: Option<f64> = None;
        for (i, e) in evals {
            let r = e.rel();
            sum += r;
            if r > max || r.is_nan() {
                max = if r.is_nan() { f64::INFINITY } else { r };
                worst = *i;
            }
            scale = scale.max(e.scale);
            if let Some(s) = e.slack {
                smin = Some(smin.map_or(s, |m: f64| m.min(s)));
                smax = Some(smax.map_or(s, |m: f64| m.max(s)));
            }
        }
        let samples = evals.len();
        ResidualReport {
            identity_id: id.to_string(),
            samples,
            max_rel_residual: max,
            mean_rel_residual: if samples > 0 { sum / samples as f64 } else { 0.0 },
            scale,
            tolerance: tol,
            pass: max <= tol,
            min_slack: smin,
            max_slack: smax,
            worst_index: worst,
            worst_input: if samples > 0 { inputs(worst) } else { serde_json::Value::Null },
        }
    }

    fn single(e: Eval, input: &KForm, tol: f64) -> ResidualReport {
        let v = serde_json::to_value(input).unwrap_or(serde_json::Value::Null);
        ResidualReport::from_evals(&e.id.clone(), &[(0, e)], &|_| v.clone(), tol)
    }
}

/// The structures used by the suites, built once.
pub struct Lab {
    pub g2: HolonomyStructure,
    pub spin7: HolonomyStructure,
    pub su2: HolonomyStructure,
    pub su3: HolonomyStructure,
    pub su4: HolonomyStructure,
}

pub fn lab() -> &'static Lab {
    static LAB: OnceLock<Lab> = OnceLock::new();
    LAB.get_or_init(|| Lab {
        g2: make_structure(StructureKind::G2),
        spin7: make_structure(StructureKind::Spin7),
        su2: make_structure(StructureKind::Su2),
        su3: make_structure(StructureKind::Su3),
        su4: make_structure(StructureKind::Su4),
    })
}

impl Lab {
    pub fn su(&self, nc: usize) -> Result<&HolonomyStructure> {
        match nc {
            2 => Ok(&self.su2),
            3 => Ok(&self.su3),
            4 => Ok(&self.su4),
            _ => invalid(format!("complex dimension {nc} is not supported")),
        }
    }

    pub fn get(&self, kind: StructureKind) -> &HolonomyStructure {
        match kind {
            StructureKind::G2 => &self.g2,
            StructureKind::Spin7 => &self.spin7,
            StructureKind::Su2 => &self.su2,
            StructureKind::Su3 => &self.su3,
            StructureKind::Su4 => &self.su4,
        }
    }
}

fn need_two_form(f: &KForm, n: usize) -> Result<()> {
    if f.k() != 2 || f.n() != n {
        return invalid(format!(
            "expected a 2-form on R^{n}, got a {}-form on R^{}",
            f.k(),
            f.n()
        ));
    }
    Ok(())
}

/// det(I + F♯) by LU and by the wedge-power formula against each other.
pub fn det_evals(f: &KForm) -> Result<Vec<Eval>> {
    let d = det_one_plus(f)?;
    Ok(vec![eq(format!("det.n{}", f.n()), d.formula, d.oracle, &[])])
}

/// Terms of the Cayley equality for real F on R^8.
#[derive(Clone, Copy, Debug)]
pub struct CayleyTerms {
    pub calibrated: f64,
    pub seven: f64,
    pub four_seven: f64,
    pub det_lu: f64,
    pub det_formula: f64,
}

impl CayleyTerms {
    pub fn lhs(&self) -> f64 {
        self.calibrated * self.calibrated + self.seven + self.four_seven
    }
}

pub fn cayley_terms(f: &KForm) -> Result<CayleyTerms> {
    need_two_form(f, 8)?;
    let s = &lab().spin7;
    let p = powers(f);
    let cal = 1.0 - 0.5 * p[2].dot(s.cayley()) + p[4].top() / 24.0;
    let b = f - &hodge(&p[3]).scaled(1.0 / 6.0);
    let seven = 4.0 * s.pr("2_7", &b).norm_sq();
    let four_seven = 2.0 * s.pr("4_7", &p[2]).norm_sq();
    let d = det_one_plus(f)?;
    Ok(CayleyTerms {
        calibrated: cal,
        seven,
        four_seven,
        det_lu: d.oracle,
        det_formula: d.formula,
    })
}

pub fn cayley_evals(f: &KForm) -> Result<Vec<Eval>> {
    let t = cayley_terms(f)?;
    let lhs = t.lhs();
    let terms = [t.calibrated * t.calibrated, t.seven, t.four_seven];
    Ok(vec![
        eq("cayley", lhs, t.det_lu, &terms),
        eq("cayley.formula_det", lhs, t.det_formula, &terms),
    ])
}

pub fn cayley_check(f: &KForm) -> Result<ResidualReport> {
    let e = cayley_evals(f)?;
    let worst = e.into_iter().fold(None::<Eval>, |acc, x| match acc {
        Some(a) if a.rel() >= x.rel() => Some(a),
        _ => Some(x),
    });
    let mut w = worst.unwrap();
    w.id = "cayley".into();
    Ok(ResidualReport::single(w, f, DEFAULT_TOL))
}

/// The Cayley equality evaluated on the curvature iF with complex arithmetic:
/// |1 + ⟨G²,Φ⟩/2 + ∗G⁴/24|² + 4|π²₇(G + ∗G³/6)|² + 2|π⁴₇(G²)|² with G = iF.
pub fn cayley_body_convention(f: &KForm) -> Result<f64> {
    need_two_form(f, 8)?;
    let s = &lab().spin7;
    let g = ComplexKForm {
        re: KForm::zeros(8, 2),
        im: f.clone(),
    };
    let g2 = g.w(&g);
    let g3 = g2.w(&g);
    let g4 = g3.w(&g);
    let pairing = Complex::new(g2.re.dot(s.cayley()), g2.im.dot(s.cayley()));
    let cal = Complex::new(1.0, 0.0) + pairing * 0.5 + g4.top() / 24.0;
    let b = g.add(&g3.hodge().scaled(Complex::new(1.0 / 6.0, 0.0)));
    let seven = project_complex(s, "2_7", &b)?.norm_sq();
    let four = project_complex(s, "4_7", &g2)?.norm_sq();
    Ok(cal.norm_sqr() + 4.0 * seven + 2.0 * four)
}

pub fn cayley_sign_evals(f: &KForm) -> Result<Vec<Eval>> {
    let t = cayley_terms(f)?;
    let body = cayley_body_convention(f)?;
    let flipped = cayley_terms(&-f)?;
    Ok(vec![
        eq("cayley.body_convention", body, t.lhs(), &[t.det_lu]),
        eq("cayley.odd_symmetry", flipped.lhs(), t.lhs(), &[t.det_lu]),
    ])
}

/// The three homogeneous pieces of the Cayley equality.
pub fn cayley_degree_evals(f: &KForm) -> Result<Vec<Eval>> {
    need_two_form(f, 8)?;
    let s = &lab().spin7;
    let p = powers(f);
    let f2phi = p[2].dot(s.cayley());
    let sf3 = hodge(&p[3]);
    let sf4 = p[4].top();
    let f7 = s.pr("2_7", f);
    let sf3_7 = s.pr("2_7", &sf3);
    let f2_47 = s.pr("4_7", &p[2]).norm_sq();

    let a = [-f2phi, 4.0 * f7.norm_sq()];
    let d2 = eq("cayley.deg2", a[0] + a[1], f.norm_sq(), &a);

    let b = [
        0.25 * f2phi * f2phi,
        sf4 / 12.0,
        -(4.0 / 3.0) * f7.dot(&sf3_7),
        2.0 * f2_47,
    ];
    let d4 = eq("cayley.deg4", b.iter().sum(), 0.25 * p[2].norm_sq(), &b);

    let c = [-f2phi * sf4 / 24.0, sf3_7.norm_sq() / 9.0];
    let d6 = eq("cayley.deg6", c[0] + c[1], p[3].norm_sq() / 36.0, &c);
    Ok(vec![d2, d4, d6])
}

pub fn cayley_degree_check(f: &KForm) -> Result<Vec<ResidualReport>> {
    Ok(cayley_degree_evals(f)?
        .into_iter()
        .map(|e| ResidualReport::single(e, f, DEFAULT_TOL))
        .collect())
}

pub fn associator_evals(f: &KForm) -> Result<Vec<Eval>> {
    need_two_form(f, 7)?;
    let s = &lab().g2;
    let f2 = f.w(f);
    let f3 = f2.w(f);
    let cal = 1.0 - 0.5 * f2.dot(s.psi());
    let t2 = (&s.psi().w(f) - &f3.scaled(1.0 / 6.0)).norm_sq();
    let t3 = 0.25 * s.phi().w(&hodge(&f2)).norm_sq();
    let d = det_one_plus(f)?;
    let terms = [cal * cal, t2, t3];
    Ok(vec![eq("associator", terms.iter().sum(), d.oracle, &terms)])
}

pub fn associator_check(f: &KForm) -> Result<ResidualReport> {
    let e = associator_evals(f)?.remove(0);
    Ok(ResidualReport::single(e, f, DEFAULT_TOL))
}

fn complex_z(s: &HolonomyStructure, f: &KForm) -> ComplexKForm {
    ComplexKForm {
        re: s.omega().clone(),
        im: f.clone(),
    }
}

pub fn sl3_evals(f: &KForm) -> Result<Vec<Eval>> {
    need_two_form(f, 6)?;
    let s = &lab().su3;
    let z = complex_z(s, f);
    let z2 = z.w(&z);
    let z3 = z2.w(&z);
    let t1 = z3.norm_sq() / 36.0;
    let t2 = 2.0 * project_complex(s, "[3,1]", &z2)?.norm_sq() / 4.0;
    let d = det_one_plus(f)?;
    Ok(vec![eq("sl3", t1 + t2, d.oracle, &[t1, t2])])
}

pub fn sl3_check(f: &KForm) -> Result<ResidualReport> {
    let e = sl3_evals(f)?.remove(0);
    Ok(ResidualReport::single(e, f, DEFAULT_TOL))
}

/// Main SL4 identity, its three homogeneous pieces and the A± rewrite.
pub fn sl4_evals(f: &KForm) -> Result<Vec<Eval>> {
    need_two_form(f, 8)?;
    let s = &lab().su4;
    let z = complex_z(s, f);
    let z2 = z.w(&z);
    let z3 = z2.w(&z);
    let z4 = z3.w(&z);
    let t1 = z4.norm_sq() / 576.0;
    let t2 = 2.0 * project_complex(s, "[4,2]", &z3)?.norm_sq() / 36.0;
    let t3 = 8.0 * project_complex(s, "[4,0]", &z2)?.norm_sq() / 4.0;
    let d = det_one_plus(f)?;
    let main = eq("sl4", t1 + t2 + t3, d.oracle, &[t1, t2, t3]);

    let om = s.omega();
    let om2 = om.power(2);
    let om3 = om2.w(om);
    let p = powers(f);
    let w2f2 = om2.w(&p[2]).top();
    let w3f = om3.w(f).top();
    let wf3 = om.w(&p[3]).top();
    let sf3 = hodge(&p[3]);
    let sf4 = p[4].top();
    let f20 = s.pr("[2,0]", f);
    let sf3_20 = s.pr("[2,0]", &sf3);

    let a = [-0.5 * w2f2, w3f * w3f / 36.0, 2.0 * f20.norm_sq()];
    let d2 = eq("sl4.deg2", a.iter().sum(), f.norm_sq(), &a);

    let b = [
        w2f2 * w2f2 / 16.0,
        sf4 / 12.0,
        -w3f * wf3 / 18.0,
        0.5 * s.pr("[4,2]", &om.w(&p[2])).norm_sq(),
        -(2.0 / 3.0) * f20.dot(&sf3_20),
        2.0 * s.pr("[4,0]", &p[2]).norm_sq(),
    ];
    let d4 = eq("sl4.deg4", b.iter().sum(), 0.25 * p[2].norm_sq(), &b);

    let c = [
        -w2f2 * sf4 / 48.0,
        wf3 * wf3 / 36.0,
        sf3_20.norm_sq() / 18.0,
    ];
    let d6 = eq("sl4.deg6", c.iter().sum(), p[3].norm_sq() / 36.0, &c);

    let swf2 = hodge(&om.w(&p[2]));
    let r = [
        (2.0 / 3.0) * s.pr("A+", f).dot(&s.pr("A+", &sf3)),
        -(2.0 / 3.0) * s.pr("A-", f).dot(&s.pr("A-", &sf3)),
        0.5 * s.pr("A+", &swf2).norm_sq(),
        -0.5 * s.pr("A-", &swf2).norm_sq(),
    ];
    let lhs = 0.25 * p[2].dot(&om2) * p[2].dot(s.re_omega());
    let rw = eq("sl4.rewrite", lhs, r.iter().sum(), &r);
    Ok(vec![main, d2, d4, d6, rw])
}

pub fn sl4_check(f: &KForm) -> Result<Vec<ResidualReport>> {
    Ok(sl4_evals(f)?
        .into_iter()
        .map(|e| ResidualReport::single(e, f, DEFAULT_TOL))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionKind {
    CayleyToAsso,
    AssoToSl3,
}

/// Value, bound and equality-condition residual of a restriction inequality.
#[derive(Clone, Copy, Debug)]
pub struct RestrictionOutcome {
    pub value: f64,
    pub bound: f64,
    pub slack: f64,
    /// Norm of the tensors whose vanishing characterises equality.
    pub equality_residual: f64,
}

pub fn restriction_outcome(kind: RestrictionKind, f: &KForm) -> Result<RestrictionOutcome> {
    let l = lab();
    let e0 = f.interior_basis(0);
    let (value, eq_res) = match kind {
        RestrictionKind::CayleyToAsso => {
            need_two_form(f, 8)?;
            let psi8 = l.g2.psi().embed(8, 1)?;
            let f2 = f.w(f);
            let v = (1.0 - 0.5 * f2.dot(&psi8)).abs();
            let g2res = (&f.w(&psi8) - &f2.w(f).scaled(1.0 / 6.0)).norm();
            (v, e0.norm() + g2res)
        }
        RestrictionKind::AssoToSl3 => {
            need_two_form(f, 7)?;
            let om7 = l.su3.omega().embed(7, 1)?;
            let f2 = f.w(f);
            let v = (1.0 - 0.25 * f2.dot(&om7.w(&om7))).abs();
            let f6 = f.restrict(6, 1)?;
            let (f20, im) = calibration::dhym_tensors(&l.su3, &f6, 0.0)?;
            (v, e0.norm() + f20.norm() + im.abs())
        }
    };
    let bound = det_one_plus(f)?.oracle.sqrt();
    Ok(RestrictionOutcome {
        value,
        bound,
        slack: bound - value,
        equality_residual: eq_res,
    })
}

pub fn restriction_evals(kind: RestrictionKind, f: &KForm) -> Result<Vec<Eval>> {
    let o = restriction_outcome(kind, f)?;
    let id = match kind {
        RestrictionKind::CayleyToAsso => "restriction.cayley_to_asso",
        RestrictionKind::AssoToSl3 => "restriction.asso_to_sl3",
    };
    Ok(vec![le(id, o.value, o.bound)])
}

pub fn restriction_bound_check(kind: RestrictionKind, f: &KForm) -> Result<ResidualReport> {
    let e = restriction_evals(kind, f)?.remove(0);
    Ok(ResidualReport::single(e, f, DEFAULT_TOL))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseContext {
    Spin7,
    G2,
    Sl3,
    Sl4,
}

impl PhaseContext {
    pub fn structure(self) -> &'static HolonomyStructure {
        let l = lab();
        match self {
            PhaseContext::Spin7 => &l.spin7,
            PhaseContext::G2 => &l.g2,
            PhaseContext::Sl3 => &l.su3,
            PhaseContext::Sl4 => &l.su4,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PhaseOutcome {
    pub calibrated: f64,
    pub bound: f64,
    pub slack: f64,
    pub residual_1: f64,
    pub residual_2: f64,
}

/// |calibrated term| ≤ √det(I + F♯) together with the defining residuals.
pub fn phase_outcome(ctx: PhaseContext, f: &KForm, theta: f64) -> Result<PhaseOutcome> {
    let s = ctx.structure();
    need_two_form(f, s.n())?;
    let cal = calibration::calibrated(s, f, theta);
    let bound = det_one_plus(f)?.oracle.sqrt();
    let (r1, r2) = calibration::residual_norms(s, f, theta)?;
    Ok(PhaseOutcome {
        calibrated: cal,
        bound,
        slack: bound - cal.abs(),
        residual_1: r1,
        residual_2: r2,
    })
}

pub fn phase_evals(ctx: PhaseContext, f: &KForm, theta: f64) -> Result<Vec<Eval>> {
    let o = phase_outcome(ctx, f, theta)?;
    let id = match ctx {
        PhaseContext::Spin7 => "phase_bound.spin7",
        PhaseContext::G2 => "phase_bound.g2",
        PhaseContext::Sl3 => "phase_bound.sl3",
        PhaseContext::Sl4 => "phase_bound.sl4",
    };
    Ok(vec![le(id, o.calibrated.abs(), o.bound)])
}

pub fn phase_bound_check(ctx: PhaseContext, f: &KForm, theta: f64) -> Result<ResidualReport> {
    let e = phase_evals(ctx, f, theta)?.remove(0);
    Ok(ResidualReport::single(e, f, DEFAULT_TOL))
}

/// |(ω + iF)^m/m!|² = det(I + F♯) for F with vanishing [2,0] part.
pub fn sln_f02_evals(nc: usize, f: &KForm) -> Result<Vec<Eval>> {
    let s = lab().su(nc)?;
    need_two_form(f, s.n())?;
    let f20 = s.pr("[2,0]", f).norm();
    if f20 > 1e-12 * f.norm().max(1.0) {
        return invalid(format!("[2,0] part of F is {f20:.3e}, expected zero"));
    }
    let z = calibration::zeta(s, f);
    let d = det_one_plus(f)?;
    Ok(vec![eq(format!("sln_f02.n{nc}"), z.norm_sqr(), d.oracle, &[])])
}

pub fn sln_f02_check(nc: usize, f: &KForm) -> Result<ResidualReport> {
    let e = sln_f02_evals(nc, f)?.remove(0);
    Ok(ResidualReport::single(e, f, DEFAULT_TOL))
}

/// Supporting algebraic lemmas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// Contractions of φ and ∗φ with a vector on R^7.
    G2Contractions,
    /// ∗(ξ ∧ (∗F³)²) = (3/2)⟨F², ξ⟩ ∗F⁴ on R^8.
    TwentyFourForm,
    /// Norm relations for β ∈ Λ²₇ and γ ∈ Λ²₂₁.
    TwoFormNorm,
    /// α ∧ Φ = 3∗α on Λ²₇ and −∗α on Λ²₂₁.
    Spin7Eigen,
    /// π⁴₇(β∧β') = 0 for β, β' both in Λ²₇ or both in Λ²₂₁.
    Spin7WedgeSplit,
    /// Contractions of ReΩ with a vector on R^6.
    Su3Contractions,
    /// Eigenvalue characterisation of the SU(3) pieces of Λ².
    Su3TwoForms,
    /// |β∧ReΩ|² = |β∧ImΩ|² = 2|π^{[2,0]}β|².
    Su3TwoFormNorm,
    /// Eigenvalue characterisation of the SU(4) pieces of Λ² under ∗(ω²∧·).
    Su4TwoForms,
    /// ∗(ReΩ∧·) = ±2 on A±, 0 on real (1,1)-forms.
    Su4APlusMinus,
    /// Λ²₇ = Rω ⊕ A+ and Λ⁴₇ = R ImΩ ⊕ ω∧A- for the induced Spin(7) structure.
    Su4SevenSplit,
    /// 2|π_{ω∧A-}ξ|² = |π_{A-}∗(ω∧ξ)|².
    Su4FourForm,
    /// Hodge star ↔ [p,q] projections: ∗π^{[p,q]} = π^{[m-q,m-p]}∗.
    SuHodgeProjection,
}

pub const ALL_LEMMAS: [Lemma; 13] = [
    Lemma::G2Contractions,
    Lemma::TwentyFourForm,
    Lemma::TwoFormNorm,
    Lemma::Spin7Eigen,
    Lemma::Spin7WedgeSplit,
    Lemma::Su3Contractions,
    Lemma::Su3TwoForms,
    Lemma::Su3TwoFormNorm,
    Lemma::Su4TwoForms,
    Lemma::Su4APlusMinus,
    Lemma::Su4SevenSplit,
    Lemma::Su4FourForm,
    Lemma::SuHodgeProjection,
];

impl Lemma {
    pub fn name(self) -> &'static str {
        match self {
            Lemma::G2Contractions => "g2_contractions",
            Lemma::TwentyFourForm => "24form",
            Lemma::TwoFormNorm => "2form_norm",
            Lemma::Spin7Eigen => "spin7_eigen",
            Lemma::Spin7WedgeSplit => "spin7_wedge_split",
            Lemma::Su3Contractions => "su3_contractions",
            Lemma::Su3TwoForms => "su3_2forms",
            Lemma::Su3TwoFormNorm => "su3_2form_norm",
            Lemma::Su4TwoForms => "su4_2forms",
            Lemma::Su4APlusMinus => "su4_apm",
            Lemma::Su4SevenSplit => "su4_seven_split",
            Lemma::Su4FourForm => "su4_4form",
            Lemma::SuHodgeProjection => "su_hodge_projection",
        }
    }

    pub fn parse(s: &str) -> Result<Lemma> {
        ALL_LEMMAS
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown lemma '{s}'")))
    }

    /// Draws inputs of the right shape: forms first, then an optional vector.
    pub fn sample(self, rng: &mut impl Rng, range: f64) -> LemmaInput {
        let l = lab();
        let form = |rng: &mut dyn rand::RngCore, n, k| random_form(rng, n, k, range);
        let vec = |rng: &mut dyn rand::RngCore, n| -> Vec<f64> {
            (0..n).map(|_| uniform(rng, range)).collect()
        };
        match self {
            Lemma::G2Contractions => LemmaInput::vector(vec(rng, 7)),
            Lemma::Su3Contractions => LemmaInput::vector(vec(rng, 6)),
            Lemma::TwentyFourForm => LemmaInput::forms(vec![form(rng, 8, 2), form(rng, 8, 4)]),
            Lemma::TwoFormNorm | Lemma::Spin7Eigen => {
                let b = l.spin7.pr("2_7", &form(rng, 8, 2));
                let g = l.spin7.pr("2_21", &form(rng, 8, 2));
                LemmaInput::forms(vec![b, g])
            }
            Lemma::Spin7WedgeSplit => {
                let s = &l.spin7;
                LemmaInput::forms(vec![
                    s.pr("2_7", &form(rng, 8, 2)),
                    s.pr("2_7", &form(rng, 8, 2)),
                    s.pr("2_21", &form(rng, 8, 2)),
                    s.pr("2_21", &form(rng, 8, 2)),
                ])
            }
            Lemma::Su3TwoForms | Lemma::Su3TwoFormNorm => LemmaInput::forms(vec![form(rng, 6, 2)]),
            Lemma::Su4TwoForms | Lemma::Su4APlusMinus => LemmaInput::forms(vec![form(rng, 8, 2)]),
            Lemma::Su4SevenSplit => LemmaInput::forms(vec![form(rng, 8, 2), form(rng, 8, 4)]),
            Lemma::Su4FourForm => LemmaInput::forms(vec![form(rng, 8, 4)]),
            Lemma::SuHodgeProjection => {
                let k = rng.random_range(0..=6usize);
                let k8 = rng.random_range(0..=8usize);
                LemmaInput::forms(vec![form(rng, 6, k), form(rng, 8, k8)])
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaInput {
    pub forms: Vec<KForm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

impl LemmaInput {
    pub fn forms(forms: Vec<KForm>) -> Self {
        LemmaInput {
            forms,
            vector: None,
        }
    }

    pub fn vector(v: Vec<f64>) -> Self {
        LemmaInput {
            forms: Vec::new(),
            vector: Some(v),
        }
    }
}

fn need_in(s: &HolonomyStructure, label: &str, a: &KForm) -> Result<()> {
    let off = (&s.project(label, a)? - a).norm();
    if off > 1e-10 * a.norm().max(1.0) {
        return invalid(format!("input is not in {label} (distance {off:.3e})"));
    }
    Ok(())
}

fn need_forms(inp: &LemmaInput, shapes: &[(usize, usize)]) -> Result<()> {
    if inp.forms.len() != shapes.len()
        || inp
            .forms
            .iter()
            .zip(shapes)
            .any(|(f, &(n, k))| f.n() != n || f.k() != k)
    {
        return invalid(format!("lemma expects forms of shape {shapes:?}"));
    }
    Ok(())
}

fn need_vector(inp: &LemmaInput, n: usize) -> Result<&[f64]> {
    match &inp.vector {
        Some(v) if v.len() == n => Ok(v),
        _ => invalid(format!("lemma expects a vector of length {n}")),
    }
}

/// Residuals of a supporting lemma on the given inputs.
pub fn algebra_lemma_evals(lemma: Lemma, inp: &LemmaInput) -> Result<Vec<Eval>> {
    let l = lab();
    let id = |s: &str| format!("lemma.{}.{s}", lemma.name());
    Ok(match lemma {
        Lemma::G2Contractions => {
            let u = need_vector(inp, 7)?;
            let (phi, psi) = (l.g2.phi(), l.g2.psi());
            let ub = KForm::one_form(u);
            let su = hodge(&ub);
            let iphi = interior(u, phi)?;
            let ipsi = interior(u, psi)?;
            vec![
                eq_form(id("phi_ipsi"), &phi.w(&ipsi), &su.scaled(-4.0)),
                eq_form(id("psi_iphi"), &psi.w(&iphi), &su.scaled(3.0)),
                eq_form(id("phi_iphi_star"), &phi.w(&iphi), &hodge(&iphi).scaled(2.0)),
                eq_form(id("phi_iphi_wedge"), &phi.w(&iphi), &ub.w(psi).scaled(2.0)),
            ]
        }
        Lemma::TwentyFourForm => {
            need_forms(inp, &[(8, 2), (8, 4)])?;
            let (f, xi) = (&inp.forms[0], &inp.forms[1]);
            let p = powers(f);
            let s3 = hodge(&p[3]);
            let lhs = xi.w(&s3.w(&s3)).top();
            let rhs = 1.5 * p[2].dot(xi) * p[4].top();
            vec![eq(id("main"), lhs, rhs, &[])]
        }
        Lemma::TwoFormNorm => {
            need_forms(inp, &[(8, 2), (8, 2)])?;
            let (b, g) = (&inp.forms[0], &inp.forms[1]);
            need_in(&l.spin7, "2_7", b)?;
            need_in(&l.spin7, "2_21", g)?;
            let (b2, g2) = (b.w(b), g.w(g));
            let nb = b.norm_sq();
            let ng = g.norm_sq();
            vec![
                eq_form(id("cube"), &b2.w(b), &hodge(b).scaled(1.5 * nb)),
                eq(id("beta4"), nb * nb, b2.norm_sq() * 2.0 / 3.0, &[]),
                eq(
                    id("gamma4"),
                    ng * ng,
                    g2.norm_sq() - g2.w(&g2).top() / 3.0,
                    &[g2.norm_sq(), g2.w(&g2).top() / 3.0],
                ),
                eq(id("mixed"), nb * ng, 2.0 * b.w(g).norm_sq(), &[]),
            ]
        }
        Lemma::Spin7Eigen => {
            need_forms(inp, &[(8, 2), (8, 2)])?;
            let (b, g) = (&inp.forms[0], &inp.forms[1]);
            need_in(&l.spin7, "2_7", b)?;
            need_in(&l.spin7, "2_21", g)?;
            let phi = l.spin7.cayley();
            vec![
                eq_form(id("seven"), &b.w(phi), &hodge(b).scaled(3.0)),
                eq_form(id("twentyone"), &g.w(phi), &hodge(g).scaled(-1.0)),
            ]
        }
        Lemma::Spin7WedgeSplit => {
            need_forms(inp, &[(8, 2), (8, 2), (8, 2), (8, 2)])?;
            let f = &inp.forms;
            let s = &l.spin7;
            need_in(s, "2_7", &f[0])?;
            need_in(s, "2_7", &f[1])?;
            need_in(s, "2_21", &f[2])?;
            need_in(s, "2_21", &f[3])?;
            let z = KForm::zeros(8, 4);
            let w77 = f[0].w(&f[1]);
            let w2121 = f[2].w(&f[3]);
            vec![
                eq_form(id("seven_seven"), &s.pr("4_7", &w77), &z),
                eq_form(id("21_21"), &s.pr("4_7", &w2121), &z),
                eq_form(id("seven_seven_35"), &s.pr("4_35", &w77), &z),
            ]
        }
        Lemma::Su3Contractions => {
            let u = need_vector(inp, 6)?;
            let s = &l.su3;
            let ire = interior(u, s.re_omega())?;
            let ju = s.j().apply(u);
            vec![
                eq_form(
                    id("re"),
                    &hodge(&ire.w(s.re_omega())),
                    &KForm::one_form(&ju).scaled(2.0),
                ),
                eq_form(
                    id("im"),
                    &hodge(&ire.w(s.im_omega())),
                    &KForm::one_form(u).scaled(-2.0),
                ),
                eq(
                    id("norm"),
                    ire.norm_sq(),
                    2.0 * u.iter().map(|x| x * x).sum::<f64>(),
                    &[],
                ),
                eq_form(id("in_20"), &s.pr("[2,0]", &ire), &ire),
            ]
        }
        Lemma::Su3TwoForms => {
            need_forms(inp, &[(6, 2)])?;
            let s = &l.su3;
            let b = &inp.forms[0];
            let op = |x: &KForm| hodge(&s.omega().w(x));
            let (p20, p11, pw) = (s.pr("[2,0]", b), s.pr("[1,1]_0", b), s.pr("omega", b));
            vec![
                eq_form(id("20"), &op(&p20), &p20),
                eq_form(id("11_0"), &op(&p11), &p11.scaled(-1.0)),
                eq_form(id("omega"), &op(&pw), &pw.scaled(2.0)),
                eq_form(id("sum"), &(&(&p20 + &p11) + &pw), b),
            ]
        }
        Lemma::Su3TwoFormNorm => {
            need_forms(inp, &[(6, 2)])?;
            let s = &l.su3;
            let b = &inp.forms[0];
            let t = 2.0 * s.pr("[2,0]", b).norm_sq();
            vec![
                eq(id("re"), b.w(s.re_omega()).norm_sq(), t, &[]),
                eq(id("im"), b.w(s.im_omega()).norm_sq(), t, &[]),
            ]
        }
        Lemma::Su4TwoForms => {
            need_forms(inp, &[(8, 2)])?;
            let s = &l.su4;
            let b = &inp.forms[0];
            let w2 = s.omega().power(2);
            let op = |x: &KForm| hodge(&w2.w(x));
            let (p20, p11, pw) = (s.pr("[2,0]", b), s.pr("[1,1]_0", b), s.pr("omega", b));
            let pw_explicit = s.omega().scaled(b.dot(s.omega()) / 4.0);
            vec![
                eq_form(id("20"), &op(&p20), &p20.scaled(2.0)),
                eq_form(id("11_0"), &op(&p11), &p11.scaled(-2.0)),
                eq_form(id("omega"), &op(&pw), &pw.scaled(6.0)),
                eq_form(id("omega_explicit"), &pw, &pw_explicit),
            ]
        }
        Lemma::Su4APlusMinus => {
            need_forms(inp, &[(8, 2)])?;
            let s = &l.su4;
            let b = &inp.forms[0];
            let op = |x: &KForm| hodge(&s.re_omega().w(x));
            let (ap, am) = (s.pr("A+", b), s.pr("A-", b));
            let p11 = s.pr("[1,1]", b);
            vec![
                eq_form(id("plus"), &op(&ap), &ap.scaled(2.0)),
                eq_form(id("minus"), &op(&am), &am.scaled(-2.0)),
                eq_form(id("zero_on_11"), &op(&p11), &KForm::zeros(8, 2)),
                eq_form(id("split"), &(&ap + &am), &s.pr("[2,0]", b)),
            ]
        }
        Lemma::Su4SevenSplit => {
            need_forms(inp, &[(8, 2), (8, 4)])?;
            let s = &l.su4;
            let (a, xi) = (&inp.forms[0], &inp.forms[1]);
            let sp = &l.spin7;
            vec![
                eq_form(
                    id("two"),
                    &sp.pr("2_7", a),
                    &(&s.pr("omega", a) + &s.pr("A+", a)),
                ),
                eq_form(
                    id("four"),
                    &sp.pr("4_7", xi),
                    &(&s.pr("ImOmega", xi) + &s.pr("omega^A-", xi)),
                ),
                eq_form(id("a_minus_in_21"), &sp.pr("2_21", &s.pr("A-", a)), &s.pr("A-", a)),
            ]
        }
        Lemma::Su4FourForm => {
            need_forms(inp, &[(8, 4)])?;
            let s = &l.su4;
            let xi = &inp.forms[0];
            let lhs = 2.0 * s.pr("omega^A-", xi).norm_sq();
            let rhs = s.pr("A-", &hodge(&s.omega().w(xi))).norm_sq();
            vec![eq(id("main"), lhs, rhs, &[])]
        }
        Lemma::SuHodgeProjection => {
            if inp.forms.len() != 2 {
                return invalid("lemma expects two forms");
            }
            let mut out = Vec::new();
            for (s, a) in [(&l.su3, &inp.forms[0]), (&l.su4, &inp.forms[1])] {
                let m = s.n() / 2;
                if a.n() != s.n() {
                    return invalid("form dimension does not match the structure");
                }
                let k = a.k();
                for q in 0..=k / 2 {
                    let p = k - q;
                    if p > m {
                        continue;
                    }
                    let lhs = hodge(&s.pr(&format!("[{p},{q}]"), a));
                    let (p2, q2) = (m - q, m - p);
                    let label = format!("[{},{}]", p2.max(q2), p2.min(q2));
                    let rhs = s.pr(&label, &hodge(a));
                    out.push(eq_form(id(&format!("n{}", s.n())), &lhs, &rhs));
                }
            }
            out
        }
    })
}

pub fn algebra_lemma_check(lemma: Lemma, inp: &LemmaInput) -> Result<Vec<ResidualReport>> {
    let v = serde_json::to_value(inp)?;
    Ok(algebra_lemma_evals(lemma, inp)?
        .into_iter()
        .map(|e| {
            let id = e.id.clone();
            ResidualReport::from_evals(&id, &[(0, e)], &|_| v.clone(), DEFAULT_TOL)
        })
        .collect())
}

fn uniform(rng: &mut dyn rand::RngCore, range: f64) -> f64 {
    let u: f64 = rng.random();
    range * (2.0 * u - 1.0)
}

/// A k-form with coefficients uniform in [-range, range).
pub fn random_form(rng: &mut dyn rand::RngCore, n: usize, k: usize, range: f64) -> KForm {
    let c = (0..binomial(n, k)).map(|_| uniform(rng, range)).collect();
    KForm::from_coeffs(n, k, c).expect("random coefficients are finite")
}

/// Independent stream for sample `index` of a seeded run.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index as u64);
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Context {
    Spin7,
    G2,
    Sl2,
    Sl3,
    Sl4,
    Det,
    Lemmas,
}

pub const ALL_CONTEXTS: [Context; 7] = [
    Context::Spin7,
    Context::G2,
    Context::Sl2,
    Context::Sl3,
    Context::Sl4,
    Context::Det,
    Context::Lemmas,
];

impl Context {
    pub fn name(self) -> &'static str {
        match self {
            Context::Spin7 => "spin7",
            Context::G2 => "g2",
            Context::Sl2 => "sl2",
            Context::Sl3 => "sl3",
            Context::Sl4 => "sl4",
            Context::Det => "det",
            Context::Lemmas => "lemmas",
        }
    }

    pub fn parse(s: &str) -> Result<Context> {
        ALL_CONTEXTS
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown context '{s}'")))
    }
}

/// Settings for [`random_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub context: Context,
    pub count: usize,
    pub seed: u64,
    pub range: f64,
    pub tolerance: f64,
    pub exec: Exec,
}

impl SuiteConfig {
    pub fn new(context: Context, count: usize, seed: u64, range: f64) -> Self {
        SuiteConfig {
            context,
            count,
            seed,
            range,
            tolerance: DEFAULT_TOL,
            exec: Exec::default(),
        }
    }
}

/// Projection onto real (1,1)-forms, used to draw admissible inputs.
fn project_11(s: &HolonomyStructure, f: &KForm) -> KForm {
    s.pr("[1,1]", f)
}

fn sample_evals(ctx: Context, rng: &mut ChaCha8Rng, range: f64) -> Result<(serde_json::Value, Vec<Eval>)> {
    let l = lab();
    let mut ev = Vec::new();
    let input;
    match ctx {
        Context::Spin7 => {
            let f = random_form(rng, 8, 2, range);
            ev.extend(cayley_evals(&f)?);
            ev.extend(cayley_degree_evals(&f)?);
            ev.extend(cayley_sign_evals(&f)?);
            ev.extend(restriction_evals(RestrictionKind::CayleyToAsso, &f)?);
            ev.extend(phase_evals(PhaseContext::Spin7, &f, 0.0)?);
            input = serde_json::to_value(&f)?;
        }
        Context::G2 => {
            let f = random_form(rng, 7, 2, range);
            ev.extend(associator_evals(&f)?);
            ev.extend(restriction_evals(RestrictionKind::AssoToSl3, &f)?);
            ev.extend(phase_evals(PhaseContext::G2, &f, 0.0)?);
            input = serde_json::to_value(&f)?;
        }
        Context::Sl2 => {
            let f = project_11(&l.su2, &random_form(rng, 4, 2, range));
            ev.extend(sln_f02_evals(2, &f)?);
            input = serde_json::to_value(&f)?;
        }
        Context::Sl3 | Context::Sl4 => {
            let (n, nc, pc) = if ctx == Context::Sl3 {
                (6, 3, PhaseContext::Sl3)
            } else {
                (8, 4, PhaseContext::Sl4)
            };
            let f = random_form(rng, n, 2, range);
            let theta = uniform(rng, std::f64::consts::PI);
            if nc == 3 {
                ev.extend(sl3_evals(&f)?);
            } else {
                ev.extend(sl4_evals(&f)?);
            }
            ev.extend(phase_evals(pc, &f, theta)?);
            let f11 = project_11(l.su(nc)?, &f);
            ev.extend(sln_f02_evals(nc, &f11)?);
            input = serde_json::to_value(&f)?;
        }
        Context::Det => {
            let mut forms = Vec::new();
            for n in [6, 7, 8] {
                let f = random_form(rng, n, 2, range);
                ev.extend(det_evals(&f)?);
                forms.push(f);
            }
            input = serde_json::to_value(&forms)?;
        }
        Context::Lemmas => {
            let mut inputs = Vec::new();
            for lemma in ALL_LEMMAS {
                let inp = lemma.sample(rng, range);
                ev.extend(algebra_lemma_evals(lemma, &inp)?);
                inputs.push(inp);
            }
            input = serde_json::to_value(&inputs)?;
        }
    }
    Ok((input, ev))
}

/// Runs every check registered for the context on `count` seeded samples.
/// Sample i draws from its own ChaCha stream, so the result does not depend on
/// the execution policy or thread count.
pub fn random_suite(cfg: &SuiteConfig) -> Result<Vec<ResidualReport>> {
    if cfg.count == 0 {
        return invalid("sample count must be at least 1");
    }
    if !(cfg.range.is_finite() && cfg.range >= 0.0) {
        return invalid("range must be a finite non-negative number");
    }
    let per_sample = cfg.exec.map_indexed(cfg.count, |i| {
        let mut rng = sample_rng(cfg.seed, i);
        sample_evals(cfg.context, &mut rng, cfg.range)
    });
    let per_sample: Vec<(serde_json::Value, Vec<Eval>)> =
        per_sample.into_iter().collect::<Result<_>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut grouped: std::collections::HashMap<String, Vec<(usize, Eval)>> = Default::default();
    for (i, (_, evals)) in per_sample.iter().enumerate() {
        for e in evals {
            if !grouped.contains_key(&e.id) {
                order.push(e.id.clone());
            }
            grouped.entry(e.id.clone()).or_default().push((i, e.clone()));
        }
    }
    let inputs = |i: usize| per_sample[i].0.clone();
    Ok(order
        .iter()
        .map(|id| ResidualReport::from_evals(id, &grouped[id], &inputs, cfg.tolerance))
        .collect())
}
