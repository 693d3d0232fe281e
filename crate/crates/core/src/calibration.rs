//! Pointwise dDT / dHYM residual tensors and calibrated integrands for a
//! constant real curvature 2-form E (the connection curvature is iE).

use nalgebra::Complex;

use crate::error::{invalid, Result};
use crate::forms::{det_formula, hodge, ComplexKForm, KForm};
use crate::holonomy::{HolonomyStructure, StructureKind};

/// Wedge powers E, E², ..., up to E^{n/2}; index m holds E^m.
pub fn powers(e: &KForm) -> Vec<KForm> {
    let top = e.n() / 2;
    let mut out = vec![KForm::scalar(e.n(), 1.0), e.clone()];
    for m in 2..=top {
        let next = out[m - 1].w(e);
        out.push(next);
    }
    out
}

fn check(s: &HolonomyStructure, e: &KForm, want: StructureKind) -> Result<()> {
    if s.kind() != want {
        return invalid(format!("expected a {want} structure, got {}", s.kind()));
    }
    if e.k() != 2 || e.n() != s.n() {
        return invalid(format!(
            "expected a 2-form on R^{}, got a {}-form on R^{}",
            s.n(),
            e.k(),
            e.n()
        ));
    }
    Ok(())
}

/// (π²₇(E − ∗E³/6), π⁴₇(E²)).
pub fn spin7_tensors(s: &HolonomyStructure, e: &KForm) -> Result<(KForm, KForm)> {
    check(s, e, StructureKind::Spin7)?;
    let p = powers(e);
    let f1 = s.pr("2_7", &(e - &hodge(&p[3]).scaled(1.0 / 6.0)));
    let f2 = s.pr("4_7", &p[2]);
    Ok((f1, f2))
}

/// E ∧ ∗φ − E³/6, a 6-form on R^7.
pub fn g2_tensor(s: &HolonomyStructure, e: &KForm) -> Result<KForm> {
    check(s, e, StructureKind::G2)?;
    let e3 = e.power(3);
    Ok(&e.w(s.psi()) - &e3.scaled(1.0 / 6.0))
}

/// (ω + iE)^m.
pub fn kahler_power(s: &HolonomyStructure, e: &KForm, m: usize) -> ComplexKForm {
    let z = ComplexKForm {
        re: s.omega().clone(),
        im: e.clone(),
    };
    z.power(m)
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|x| x as f64).product()
}

/// ζ with (ω + iE)^m = ζ ω^m, m the complex dimension.
pub fn zeta(s: &HolonomyStructure, e: &KForm) -> Complex<f64> {
    let m = s.n() / 2;
    kahler_power(s, e, m).top() / factorial(m)
}

/// (π^{[2,0]}E, Im(e^{-iθ}(ω + iE)^m / m!)).
pub fn dhym_tensors(s: &HolonomyStructure, e: &KForm, theta: f64) -> Result<(KForm, f64)> {
    if !s.kind().is_su() {
        return invalid("dHYM residuals need an SU structure");
    }
    if e.k() != 2 || e.n() != s.n() {
        return invalid("dHYM residuals take a 2-form of the structure dimension");
    }
    let f1 = s.pr("[2,0]", e);
    let z = zeta(s, e) * Complex::from_polar(1.0, -theta);
    Ok((f1, z.im))
}

/// Calibrated integrand for the volume lower bound, pointwise.
/// Spin7: 1 − ⟨E², Φ⟩/2 + ∗E⁴/24. G2: 1 − ⟨E², ∗φ⟩/2. SU: Re(e^{-iθ}(ω+iE)^m/m!).
pub fn calibrated(s: &HolonomyStructure, e: &KForm, theta: f64) -> f64 {
    match s.kind() {
        StructureKind::Spin7 => {
            let p = powers(e);
            1.0 - 0.5 * p[2].dot(s.cayley()) + p[4].top() / 24.0
        }
        StructureKind::G2 => 1.0 - 0.5 * e.power(2).dot(s.psi()),
        _ => (zeta(s, e) * Complex::from_polar(1.0, -theta)).re,
    }
}

/// √det(I + E♯) via the wedge-power formula.
pub fn volume_density(e: &KForm) -> f64 {
    det_formula(e).sqrt()
}

/// Norms of the defining tensors, in the order (first, second).
pub fn residual_norms(s: &HolonomyStructure, e: &KForm, theta: f64) -> Result<(f64, f64)> {
    match s.kind() {
        StructureKind::Spin7 => {
            let (a, b) = spin7_tensors(s, e)?;
            Ok((a.norm(), b.norm()))
        }
        StructureKind::G2 => Ok((g2_tensor(s, e)?.norm(), 0.0)),
        _ => {
            let (a, b) = dhym_tensors(s, e, theta)?;
            Ok((a.norm(), b.abs()))
        }
    }
}
