//! Canonical G2, Spin(7), SU(m) structures on flat R^n and their projections.
//!
//! Index conventions (0-based arrays): on R^7 the array index i is the
//! G2 frame vector e_{i+1}; on R^8 array index i is e_i. On R^6 the SU(3)
//! frame is e_2..e_7, stored at array indices 0..5.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::{binomial, hodge, ComplexKForm, Endo, KForm, MultiIndexTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    G2,
    Spin7,
    /// SU(2) on R^4. Only used by the complex-dimension sweep of the
    /// special Lagrangian identity.
    Su2,
    Su3,
    Su4,
}

impl StructureKind {
    pub fn dim(self) -> usize {
        match self {
            StructureKind::G2 => 7,
            StructureKind::Spin7 | StructureKind::Su4 => 8,
            StructureKind::Su2 => 4,
            StructureKind::Su3 => 6,
        }
    }

    pub fn is_su(self) -> bool {
        matches!(self, StructureKind::Su2 | StructureKind::Su3 | StructureKind::Su4)
    }

    /// Complex dimension for SU kinds.
    pub fn complex_dim(self) -> Option<usize> {
        self.is_su().then(|| self.dim() / 2)
    }

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::G2 => "g2",
            StructureKind::Spin7 => "spin7",
            StructureKind::Su2 => "su2",
            StructureKind::Su3 => "su3",
            StructureKind::Su4 => "su4",
        }
    }

    pub fn su(nc: usize) -> Result<StructureKind> {
        match nc {
            2 => Ok(StructureKind::Su2),
            3 => Ok(StructureKind::Su3),
            4 => Ok(StructureKind::Su4),
            _ => invalid(format!("no SU structure of complex dimension {nc}")),
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g2" => Ok(StructureKind::G2),
            "spin7" => Ok(StructureKind::Spin7),
            "su2" => Ok(StructureKind::Su2),
            "su3" => Ok(StructureKind::Su3),
            "su4" => Ok(StructureKind::Su4),
            other => invalid(format!("unknown structure kind '{other}'")),
        }
    }
}

/// Target subspace for [`su_proj`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuTarget {
    /// Real part of Λ^{p,q} ⊕ Λ^{q,p} (or of Λ^{p,p} when p = q).
    PQ(usize, usize),
    APlus,
    AMinus,
    ROmega,
    /// Primitive real (1,1)-forms.
    Primitive11,
}

/// Labelled orthogonal projectors on Λ^k that split it into components.
#[derive(Clone, Debug)]
pub struct ProjectorBundle {
    pub kind: StructureKind,
    pub degree: usize,
    pub components: Vec<(String, DMatrix<f64>)>,
}

impl ProjectorBundle {
    pub fn get(&self, label: &str) -> Option<&DMatrix<f64>> {
        self.components.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    pub fn ranks(&self) -> Vec<(String, usize)> {
        self.components
            .iter()
            .map(|(l, m)| (l.clone(), m.trace().round() as usize))
            .collect()
    }

    /// Each labelled component of a form of this degree.
    pub fn split(&self, a: &KForm) -> Result<Vec<(String, KForm)>> {
        if a.k() != self.degree || a.n() != self.kind.dim() {
            return invalid(format!(
                "{} degree-{} components need a {}-form on R^{}",
                self.kind,
                self.degree,
                self.degree,
                self.kind.dim()
            ));
        }
        Ok(self
            .components
            .iter()
            .map(|(l, m)| (l.clone(), apply(m, a)))
            .collect())
    }
}

/// Structure forms plus every projector matrix needed by the identity suites.
#[derive(Clone, Debug)]
pub struct HolonomyStructure {
    kind: StructureKind,
    n: usize,
    phi: Option<KForm>,
    psi: Option<KForm>,
    cayley: Option<KForm>,
    omega: Option<KForm>,
    re_omega: Option<KForm>,
    im_omega: Option<KForm>,
    j: Option<Endo>,
    projectors: BTreeMap<String, DMatrix<f64>>,
}

fn form(n: usize, terms: &[(&[usize], f64)]) -> KForm {
    KForm::from_terms(n, terms).expect("static structure form")
}

/// φ on R^7 in array indices (frame index minus one).
pub fn g2_phi() -> KForm {
    form(
        7,
        &[
            (&[0, 1, 2], 1.0),
            (&[0, 3, 4], 1.0),
            (&[0, 5, 6], 1.0),
            (&[1, 3, 5], 1.0),
            (&[1, 4, 6], -1.0),
            (&[2, 3, 6], -1.0),
            (&[2, 4, 5], -1.0),
        ],
    )
}

/// ∗φ on R^7 as the explicit coefficient list.
pub fn g2_psi() -> KForm {
    form(
        7,
        &[
            (&[3, 4, 5, 6], 1.0),
            (&[1, 2, 5, 6], 1.0),
            (&[1, 2, 3, 4], 1.0),
            (&[0, 2, 4, 6], 1.0),
            (&[0, 2, 3, 5], -1.0),
            (&[0, 1, 4, 5], -1.0),
            (&[0, 1, 3, 6], -1.0),
        ],
    )
}

/// The Cayley form Φ on R^8.
pub fn spin7_phi() -> KForm {
    form(
        8,
        &[
            (&[0, 1, 2, 3], 1.0),
            (&[0, 1, 4, 5], 1.0),
            (&[0, 1, 6, 7], 1.0),
            (&[0, 2, 4, 6], 1.0),
            (&[0, 2, 5, 7], -1.0),
            (&[0, 3, 4, 7], -1.0),
            (&[0, 3, 5, 6], -1.0),
            (&[4, 5, 6, 7], 1.0),
            (&[2, 3, 6, 7], 1.0),
            (&[2, 3, 4, 5], 1.0),
            (&[1, 3, 5, 7], 1.0),
            (&[1, 3, 4, 6], -1.0),
            (&[1, 2, 5, 6], -1.0),
            (&[1, 2, 4, 7], -1.0),
        ],
    )
}

/// Standard complex structure with J e_{2a} = e_{2a+1}.
pub fn complex_structure(nc: usize) -> Endo {
    let n = 2 * nc;
    let mut j = Endo::zeros(n);
    for a in 0..nc {
        j.set(2 * a + 1, 2 * a, 1.0);
        j.set(2 * a, 2 * a + 1, -1.0);
    }
    j
}

/// f^a = e^{2a} + i e^{2a+1}.
pub fn f_frame(nc: usize) -> Vec<ComplexKForm> {
    let n = 2 * nc;
    (0..nc)
        .map(|a| {
            let re = KForm::basis(n, &[2 * a]).unwrap();
            let im = KForm::basis(n, &[2 * a + 1]).unwrap();
            ComplexKForm { re, im }
        })
        .collect()
}

/// Kähler form and holomorphic volume form of C^nc.
pub fn kahler_forms(nc: usize) -> (KForm, ComplexKForm) {
    let n = 2 * nc;
    let mut omega = KForm::zeros(n, 2);
    for a in 0..nc {
        omega.axpy(1.0, &KForm::basis(n, &[2 * a, 2 * a + 1]).unwrap());
    }
    let f = f_frame(nc);
    let mut big = ComplexKForm::one(n);
    for fa in &f {
        big = big.w(fa);
    }
    (omega, big)
}

/// Matrix (in lex bases) of a linear map Λ^k_in(R^n) -> Λ^k_out(R^n).
pub fn operator_matrix(
    n: usize,
    k_in: usize,
    k_out: usize,
    f: impl Fn(&KForm) -> KForm,
) -> DMatrix<f64> {
    let dim_in = binomial(n, k_in);
    let dim_out = binomial(n, k_out);
    let mut m = DMatrix::zeros(dim_out, dim_in);
    for c in 0..dim_in {
        let mut e = KForm::zeros(n, k_in);
        e.coeffs_mut()[c] = 1.0;
        let img = f(&e);
        assert_eq!(img.k(), k_out);
        for r in 0..dim_out {
            m[(r, c)] = img.coeffs()[r];
        }
    }
    m
}

/// Orthogonal projectors onto the eigenspaces of a diagonalisable operator with
/// known distinct eigenvalues, by Lagrange interpolation.
pub fn spectral_projectors(t: &DMatrix<f64>, eigenvalues: &[f64]) -> Vec<DMatrix<f64>> {
    let dim = t.nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let mut p = id.clone();
            for (j, &lj) in eigenvalues.iter().enumerate() {
                if j != i {
                    p = p * (t - &id * lj) / (li - lj);
                }
            }
            // Symmetrise away rounding.
            (&p + p.transpose()) * 0.5
        })
        .collect()
}

/// Projector onto the span of the given orthonormal vectors.
fn frame_projector(vectors: &[KForm]) -> DMatrix<f64> {
    let dim = vectors[0].coeffs().len();
    let mut p = DMatrix::zeros(dim, dim);
    for v in vectors {
        let c = nalgebra::DVector::from_column_slice(v.coeffs());
        p += &c * c.transpose();
    }
    p
}

pub(crate) fn apply(p: &DMatrix<f64>, a: &KForm) -> KForm {
    let v = nalgebra::DVector::from_column_slice(a.coeffs());
    let out = p * v;
    KForm::from_coeffs(a.n(), a.k(), out.as_slice().to_vec()).expect("projector output")
}

/// Real projector onto [[Λ^{p,q}]] built from the f^a frame.
fn pq_frame_projector(nc: usize, p: usize, q: usize) -> DMatrix<f64> {
    let n = 2 * nc;
    let k = p + q;
    let dim = binomial(n, k);
    let f = f_frame(nc);
    let fbar: Vec<ComplexKForm> = f.iter().map(|x| x.conj()).collect();
    let holo = MultiIndexTable::get(nc, p);
    let anti = MultiIndexTable::get(nc, q);
    let mut m = DMatrix::zeros(dim, dim);
    let mut add = |pp: &MultiIndexTable, qq: &MultiIndexTable| {
        for a in 0..pp.len() {
            for b in 0..qq.len() {
                let mut v = ComplexKForm::one(n);
                for i in pp.tuple(a) {
                    v = v.w(&f[i]);
                }
                for i in qq.tuple(b) {
                    v = v.w(&fbar[i]);
                }
                let ns = v.norm_sq();
                let vr = nalgebra::DVector::from_column_slice(v.re.coeffs());
                let vi = nalgebra::DVector::from_column_slice(v.im.coeffs());
                m += (&vr * vr.transpose() + &vi * vi.transpose()) / ns;
            }
        }
    };
    add(holo, anti);
    if p != q {
        add(anti, holo);
    }
    m
}

/// Matrix on Λ^k of the derivation extension of α ↦ α∘A on Λ^1.
pub fn derivation_matrix(a: &Endo, k: usize) -> DMatrix<f64> {
    let n = a.n();
    // Pullback of e^i: (e^i ∘ A)(e_j) = A_ij.
    let pulled: Vec<KForm> = (0..n)
        .map(|i| KForm::one_form(&(0..n).map(|j| a.get(i, j)).collect::<Vec<_>>()))
        .collect();
    let t = MultiIndexTable::get(n, k);
    let dim = t.len();
    let mut m = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let idx = t.tuple(c);
        let mut img = KForm::zeros(n, k);
        for slot in 0..k {
            let mut w = KForm::scalar(n, 1.0);
            for (s, &i) in idx.iter().enumerate() {
                let factor = if s == slot {
                    pulled[i].clone()
                } else {
                    KForm::basis(n, &[i]).unwrap()
                };
                w = w.w(&factor);
            }
            img += &w;
        }
        for r in 0..dim {
            m[(r, c)] = img.coeffs()[r];
        }
    }
    m
}

/// [[p,q]] projector via the eigenspaces of -𝒥² (eigenvalue (p-q)²); an
/// independent route to the f-frame construction.
pub fn pq_projector_by_eigen(nc: usize, p: usize, q: usize) -> DMatrix<f64> {
    let k = p + q;
    let jd = derivation_matrix(&complex_structure(nc), k);
    let t = -(&jd * &jd);
    let mut eig = Vec::new();
    let mut target = 0;
    for qq in 0..=k / 2 {
        let pp = k - qq;
        if pp > nc || qq > nc {
            continue;
        }
        if qq == p.min(q) {
            target = eig.len();
        }
        eig.push(((pp - qq) * (pp - qq)) as f64);
    }
    if eig.len() == 1 {
        return DMatrix::identity(binomial(2 * nc, k), binomial(2 * nc, k));
    }
    spectral_projectors(&t, &eig).swap_remove(target)
}

fn pq_label(p: usize, q: usize) -> String {
    let (p, q) = (p.max(q), p.min(q));
    format!("[{p},{q}]")
}

impl HolonomyStructure {
    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn need<'a>(&self, f: &'a Option<KForm>, what: &str) -> &'a KForm {
        f.as_ref()
            .unwrap_or_else(|| panic!("{} structure has no {what}", self.kind))
    }

    /// φ (G2).
    pub fn phi(&self) -> &KForm {
        self.need(&self.phi, "3-form φ")
    }

    /// ∗φ (G2).
    pub fn psi(&self) -> &KForm {
        self.need(&self.psi, "4-form ∗φ")
    }

    /// Φ (Spin7, and the induced one for SU4).
    pub fn cayley(&self) -> &KForm {
        self.need(&self.cayley, "Cayley form")
    }

    pub fn omega(&self) -> &KForm {
        self.need(&self.omega, "Kähler form")
    }

    pub fn re_omega(&self) -> &KForm {
        self.need(&self.re_omega, "holomorphic volume form")
    }

    pub fn im_omega(&self) -> &KForm {
        self.need(&self.im_omega, "holomorphic volume form")
    }

    pub fn big_omega(&self) -> ComplexKForm {
        ComplexKForm {
            re: self.re_omega().clone(),
            im: self.im_omega().clone(),
        }
    }

    pub fn j(&self) -> &Endo {
        self.j
            .as_ref()
            .unwrap_or_else(|| panic!("{} structure has no complex structure", self.kind))
    }

    pub fn complex_structure(&self) -> Option<&Endo> {
        self.j.as_ref()
    }

    /// All structure forms with their conventional names.
    pub fn named_forms(&self) -> Vec<(&'static str, &KForm)> {
        [
            ("phi", &self.phi),
            ("star_phi", &self.psi),
            ("cayley", &self.cayley),
            ("omega", &self.omega),
            ("re_Omega", &self.re_omega),
            ("im_Omega", &self.im_omega),
        ]
        .into_iter()
        .filter_map(|(name, f)| f.as_ref().map(|x| (name, x)))
        .collect()
    }

    /// Projector matrix by label, e.g. "2_7", "4_35", "[2,0]", "A+", "omega^A-".
    pub fn projector(&self, label: &str) -> Result<&DMatrix<f64>> {
        self.projectors
            .get(label)
            .ok_or_else(|| Error::InvalidInput(format!("{} has no projector '{label}'", self.kind)))
    }

    pub fn project(&self, label: &str, a: &KForm) -> Result<KForm> {
        let p = self.projector(label)?;
        if a.n() != self.n || binomial(self.n, a.k()) != p.nrows() {
            return invalid(format!(
                "projector '{label}' does not act on {}-forms on R^{}",
                a.k(),
                a.n()
            ));
        }
        Ok(apply(p, a))
    }

    /// Like [`project`](Self::project) but for validated inputs.
    pub fn pr(&self, label: &str, a: &KForm) -> KForm {
        self.project(label, a).expect("projection")
    }

    pub fn projector_labels(&self) -> Vec<String> {
        self.projectors.keys().cloned().collect()
    }

    /// The decomposition of Λ^degree into the structure's irreducible pieces.
    pub fn bundle(&self, degree: usize) -> Result<ProjectorBundle> {
        use StructureKind::*;
        let labels: Vec<String> = match (self.kind, degree) {
            (G2, 2) => vec!["2_7".into(), "2_14".into()],
            (Spin7, 2) => vec!["2_7".into(), "2_21".into()],
            (Spin7, 4) => vec!["4_1".into(), "4_7".into(), "4_27".into(), "4_35".into()],
            (Su4, 2) => vec!["omega".into(), "A+".into(), "A-".into(), "[1,1]_0".into()],
            (Su2 | Su3, 2) => vec!["omega".into(), "[2,0]".into(), "[1,1]_0".into()],
            (k, d) if k.is_su() && d <= self.n => {
                let nc = self.n / 2;
                (0..=d / 2)
                    .filter(|&q| d - q <= nc)
                    .map(|q| pq_label(d - q, q))
                    .collect()
            }
            _ => return invalid(format!("no projector bundle for {} in degree {degree}", self.kind)),
        };
        let components = labels
            .into_iter()
            .map(|l| {
                let m = self.projector(&l)?.clone();
                Ok((l, m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProjectorBundle {
            kind: self.kind,
            degree,
            components,
        })
    }

    /// The Spin(7) structure induced by SU(4), Φ = ω²/2 + ReΩ.
    pub fn induced_spin7(&self) -> Result<HolonomyStructure> {
        if self.kind != StructureKind::Su4 {
            return invalid("only SU(4) induces a Spin(7) structure");
        }
        Ok(spin7_from(self.cayley().clone()))
    }
}

fn g2_structure() -> HolonomyStructure {
    let phi = g2_phi();
    let psi = g2_psi();
    let t = operator_matrix(7, 2, 2, |a| hodge(&phi.w(a)));
    let ps = spectral_projectors(&t, &[2.0, -1.0]);
    let mut projectors = BTreeMap::new();
    projectors.insert("2_7".to_string(), ps[0].clone());
    projectors.insert("2_14".to_string(), ps[1].clone());
    HolonomyStructure {
        kind: StructureKind::G2,
        n: 7,
        phi: Some(phi),
        psi: Some(psi),
        cayley: None,
        omega: None,
        re_omega: None,
        im_omega: None,
        j: None,
        projectors,
    }
}

/// λ^k(α) for a 1-form α on R^8 with no e^0 component; φ lives on indices 1..7.
fn lambda_raw(k: usize, alpha: &KForm, cayley: &KForm) -> KForm {
    let phi8 = g2_phi().embed(8, 1).unwrap();
    let psi8 = g2_psi().embed(8, 1).unwrap();
    let e0 = KForm::basis(8, &[0]).unwrap();
    match k {
        2 => {
            let ia = crate::forms::interior(alpha.coeffs(), &phi8).unwrap();
            (&e0.w(alpha) + &ia).scaled(0.5)
        }
        4 => {
            let ia = crate::forms::interior(alpha.coeffs(), &psi8).unwrap();
            (&e0.w(&ia) - &alpha.w(&phi8)).scaled(1.0 / 8f64.sqrt())
        }
        6 => cayley.w(&lambda_raw(2, alpha, cayley)).scaled(1.0 / 3.0),
        _ => unreachable!(),
    }
}

fn spin7_from(cayley: KForm) -> HolonomyStructure {
    let mut projectors = BTreeMap::new();
    let t2 = operator_matrix(8, 2, 2, |a| hodge(&cayley.w(a)));
    let ps = spectral_projectors(&t2, &[3.0, -1.0]);
    projectors.insert("2_7".to_string(), ps[0].clone());
    projectors.insert("2_21".to_string(), ps[1].clone());

    let star4 = operator_matrix(8, 4, 4, hodge);
    let id = DMatrix::<f64>::identity(70, 70);
    let p1 = frame_projector(&[cayley.scaled(1.0 / cayley.norm())]);
    let frame: Vec<KForm> = (1..8)
        .map(|u| lambda_raw(4, &KForm::basis(8, &[u]).unwrap(), &cayley))
        .collect();
    let p7 = frame_projector(&frame);
    let p35 = (&id - &star4) * 0.5;
    let p27 = (&id + &star4) * 0.5 - &p1 - &p7;
    projectors.insert("4_1".to_string(), p1);
    projectors.insert("4_7".to_string(), p7);
    projectors.insert("4_27".to_string(), p27);
    projectors.insert("4_35".to_string(), p35);
    HolonomyStructure {
        kind: StructureKind::Spin7,
        n: 8,
        phi: None,
        psi: None,
        cayley: Some(cayley),
        omega: None,
        re_omega: None,
        im_omega: None,
        j: None,
        projectors,
    }
}

fn su_structure(nc: usize) -> HolonomyStructure {
    let n = 2 * nc;
    let (omega, big) = kahler_forms(nc);
    let mut projectors = BTreeMap::new();
    for k in 0..=n {
        for q in 0..=k / 2 {
            let p = k - q;
            if p > nc {
                continue;
            }
            projectors.insert(pq_label(p, q), pq_frame_projector(nc, p, q));
        }
    }
    let p_omega = frame_projector(&[omega.scaled(1.0 / omega.norm())]);
    let p11 = projectors[&pq_label(1, 1)].clone();
    projectors.insert("[1,1]_0".to_string(), &p11 - &p_omega);
    projectors.insert("omega".to_string(), p_omega);

    let kind = StructureKind::su(nc).unwrap();
    let mut cayley = None;
    if nc == 4 {
        let re = big.re.clone();
        let r = operator_matrix(8, 2, 2, |a| hodge(&re.w(a)));
        let p20 = projectors[&pq_label(2, 0)].clone();
        let id = DMatrix::<f64>::identity(28, 28);
        let ap = &p20 * (&r + &id * 2.0) * &p20 / 4.0;
        let am = &p20 * (&id * 2.0 - &r) * &p20 / 4.0;
        let ap = (&ap + ap.transpose()) * 0.5;
        let am = (&am + am.transpose()) * 0.5;
        // ω ∧ · is √2 times an isometry on A-.
        let l = operator_matrix(8, 2, 4, |a| omega.w(a));
        let pwa = &l * &am * l.transpose() * 0.5;
        let pwa = (&pwa + pwa.transpose()) * 0.5;
        projectors.insert("A+".to_string(), ap);
        projectors.insert("A-".to_string(), am);
        projectors.insert("omega^A-".to_string(), pwa);
        projectors.insert(
            "ImOmega".to_string(),
            frame_projector(&[big.im.scaled(1.0 / big.im.norm())]),
        );
        cayley = Some(&omega.power(2).scaled(0.5) + &big.re);
    }
    HolonomyStructure {
        kind,
        n,
        phi: None,
        psi: None,
        cayley,
        omega: Some(omega),
        re_omega: Some(big.re),
        im_omega: Some(big.im),
        j: Some(complex_structure(nc)),
        projectors,
    }
}

pub fn make_structure(kind: StructureKind) -> HolonomyStructure {
    match kind {
        StructureKind::G2 => g2_structure(),
        StructureKind::Spin7 => spin7_from(spin7_phi()),
        StructureKind::Su2 => su_structure(2),
        StructureKind::Su3 => su_structure(3),
        StructureKind::Su4 => su_structure(4),
    }
}

/// Λ² decomposition of `a` with labels as in [`HolonomyStructure::bundle`].
pub fn proj2(s: &HolonomyStructure, a: &KForm) -> Result<Vec<(String, KForm)>> {
    if a.k() != 2 || a.n() != s.n() {
        return invalid(format!(
            "proj2 expects a 2-form on R^{}, got a {}-form on R^{}",
            s.n(),
            a.k(),
            a.n()
        ));
    }
    let b = s.bundle(2)?;
    Ok(b.components
        .iter()
        .map(|(l, p)| (l.clone(), apply(p, a)))
        .collect())
}

/// The Spin(7)-equivariant isometries λ^k: R^7 -> Λ^k_7(R^8), k = 2, 4, 6.
pub fn lambda_map(k: usize, alpha: &KForm) -> Result<KForm> {
    if alpha.n() != 8 || alpha.k() != 1 {
        return invalid("λ maps take a 1-form on R^8");
    }
    if alpha.coeffs()[0] != 0.0 {
        return invalid("λ maps take 1-forms orthogonal to e^0");
    }
    if !matches!(k, 2 | 4 | 6) {
        return invalid(format!("λ^{k} is not defined"));
    }
    Ok(lambda_raw(k, alpha, &spin7_phi()))
}

/// Orthogonal projection onto Λ^4_7 using the frame {λ^4(e^u)}.
pub fn proj4_7(s: &HolonomyStructure, xi: &KForm) -> Result<KForm> {
    if s.kind() != StructureKind::Spin7 {
        return invalid("proj4_7 needs a Spin(7) structure");
    }
    if xi.n() != 8 || xi.k() != 4 {
        return invalid("proj4_7 expects a 4-form on R^8");
    }
    let mut out = KForm::zeros(8, 4);
    for u in 1..8 {
        let l = lambda_raw(4, &KForm::basis(8, &[u]).unwrap(), s.cayley());
        out.axpy(xi.dot(&l), &l);
    }
    Ok(out)
}

/// Projection of a (real) form onto an SU-type component.
pub fn su_proj(s: &HolonomyStructure, a: &KForm, target: SuTarget) -> Result<KForm> {
    if !s.kind().is_su() {
        return invalid(format!("{} is not an SU structure", s.kind()));
    }
    let label = match target {
        SuTarget::PQ(p, q) => {
            if p + q != a.k() {
                return invalid(format!(
                    "[{p},{q}] projection of a form of degree {}",
                    a.k()
                ));
            }
            if p.max(q) > s.n() / 2 {
                return Ok(KForm::zeros(a.n(), a.k()));
            }
            pq_label(p, q)
        }
        SuTarget::APlus => "A+".into(),
        SuTarget::AMinus => "A-".into(),
        SuTarget::ROmega => "omega".into(),
        SuTarget::Primitive11 => "[1,1]_0".into(),
    };
    s.project(&label, a)
}

/// Applies a real projector to both parts of a complex form.
pub fn project_complex(s: &HolonomyStructure, label: &str, a: &ComplexKForm) -> Result<ComplexKForm> {
    Ok(ComplexKForm {
        re: s.project(label, &a.re)?,
        im: s.project(label, &a.im)?,
    })
}
