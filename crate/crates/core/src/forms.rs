//! Dense exterior algebra on Euclidean R^n, 2 <= n <= 8.
//!
//! Basis k-forms e^{i_1...i_k} are stored in lexicographic order of the
//! strictly increasing index tuple. Internally a tuple is a bitmask, which
//! makes wedge signs and complements cheap to compute.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_DIM: usize = 8;

const NO_POS: u16 = u16::MAX;

/// Lexicographic basis of k-tuples in {0..n-1}.
#[derive(Debug)]
pub struct MultiIndexTable {
    n: usize,
    k: usize,
    masks: Vec<u16>,
    pos: Vec<u16>,
}

fn build_table(n: usize, k: usize) -> MultiIndexTable {
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut tuples);
    let masks: Vec<u16> = tuples
        .iter()
        .map(|t| t.iter().fold(0u16, |m, &i| m | (1 << i)))
        .collect();
    let mut pos = vec![NO_POS; 1 << n];
    for (p, &m) in masks.iter().enumerate() {
        pos[m as usize] = p as u16;
    }
    MultiIndexTable { n, k, masks, pos }
}

fn tables() -> &'static Vec<MultiIndexTable> {
    static TABLES: OnceLock<Vec<MultiIndexTable>> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut v = Vec::new();
        for n in 0..=MAX_DIM {
            for k in 0..=MAX_DIM {
                v.push(build_table(n, k.min(n)));
            }
        }
        v
    })
}

impl MultiIndexTable {
    /// Shared table for (n, k). Panics if n > 8 or k > n.
    pub fn get(n: usize, k: usize) -> &'static MultiIndexTable {
        assert!(n <= MAX_DIM && k <= n, "basis ({n},{k}) out of range");
        &tables()[n * (MAX_DIM + 1) + k]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn mask(&self, p: usize) -> u16 {
        self.masks[p]
    }

    pub fn position_of_mask(&self, mask: u16) -> Option<usize> {
        if mask.count_ones() as usize != self.k {
            return None;
        }
        match self.pos.get(mask as usize) {
            Some(&p) if p != NO_POS => Some(p as usize),
            _ => None,
        }
    }

    pub fn tuple(&self, p: usize) -> Vec<usize> {
        bits(self.masks[p]).collect()
    }

    pub fn indices(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|p| self.tuple(p)).collect()
    }

    /// Offset of a strictly increasing tuple.
    pub fn position(&self, tuple: &[usize]) -> Option<usize> {
        if tuple.len() != self.k || tuple.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        if tuple.iter().any(|&i| i >= self.n) {
            return None;
        }
        self.position_of_mask(tuple.iter().fold(0u16, |m, &i| m | (1 << i)))
    }
}

pub(crate) fn bits(mask: u16) -> impl Iterator<Item = usize> {
    (0..16).filter(move |i| mask & (1 << i) != 0)
}

/// Sign of e^A ^ e^B relative to e^{A|B}; zero when A and B overlap.
pub(crate) fn shuffle_sign(a: u16, b: u16) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inv = 0u32;
    for j in bits(b) {
        inv += (a >> (j + 1)).count_ones();
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone, Copy, Debug)]
struct WedgeTerm {
    a: u8,
    b: u8,
    c: u8,
    sign: f64,
}

fn wedge_table(n: usize, j: usize, k: usize) -> &'static [WedgeTerm] {
    const S: usize = MAX_DIM + 1;
    static CACHE: [OnceLock<Vec<WedgeTerm>>; S * S * S] = [const { OnceLock::new() }; S * S * S];
    CACHE[(n * S + j) * S + k].get_or_init(|| {
        let ta = MultiIndexTable::get(n, j);
        let tb = MultiIndexTable::get(n, k);
        let tc = MultiIndexTable::get(n, j + k);
        let mut out = Vec::new();
        for ia in 0..ta.len() {
            for ib in 0..tb.len() {
                let (ma, mb) = (ta.mask(ia), tb.mask(ib));
                if ma & mb != 0 {
                    continue;
                }
                let ic = tc.position_of_mask(ma | mb).expect("disjoint union is a basis tuple");
                out.push(WedgeTerm {
                    a: ia as u8,
                    b: ib as u8,
                    c: ic as u8,
                    sign: shuffle_sign(ma, mb),
                });
            }
        }
        out
    })
}

fn hodge_table(n: usize, k: usize) -> &'static [(u8, f64)] {
    const S: usize = MAX_DIM + 1;
    static CACHE: [OnceLock<Vec<(u8, f64)>>; S * S] = [const { OnceLock::new() }; S * S];
    CACHE[n * S + k].get_or_init(|| {
        let t = MultiIndexTable::get(n, k);
        let tc = MultiIndexTable::get(n, n - k);
        let full: u16 = ((1u32 << n) - 1) as u16;
        (0..t.len())
            .map(|p| {
                let m = t.mask(p);
                let c = full & !m;
                (tc.position_of_mask(c).unwrap() as u8, shuffle_sign(m, c))
            })
            .collect()
    })
}

/// A k-form on R^n with dense coefficients in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKForm")]
pub struct KForm {
    n: usize,
    k: usize,
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawKForm {
    n: usize,
    k: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<RawKForm> for KForm {
    type Error = Error;
    fn try_from(r: RawKForm) -> Result<Self> {
        KForm::from_coeffs(r.n, r.k, r.coeffs)
    }
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if n > MAX_DIM || k > n {
        return invalid(format!("degree {k} on R^{n} is not supported"));
    }
    Ok(())
}

impl KForm {
    pub fn zeros(n: usize, k: usize) -> KForm {
        assert!(n <= MAX_DIM && k <= n);
        KForm {
            n,
            k,
            coeffs: vec![0.0; binomial(n, k)],
        }
    }

    pub fn from_coeffs(n: usize, k: usize, coeffs: Vec<f64>) -> Result<KForm> {
        check_dims(n, k)?;
        if coeffs.len() != binomial(n, k) {
            return invalid(format!(
                "{} coefficients given for a {k}-form on R^{n} (expected {})",
                coeffs.len(),
                binomial(n, k)
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return invalid("non-finite coefficient");
        }
        Ok(KForm { n, k, coeffs })
    }

    pub fn scalar(n: usize, c: f64) -> KForm {
        KForm {
            n,
            k: 0,
            coeffs: vec![c],
        }
    }

    /// e^{0 1 ... n-1}.
    pub fn volume(n: usize) -> KForm {
        let mut v = KForm::zeros(n, n);
        v.coeffs[0] = 1.0;
        v
    }

    pub fn one_form(coeffs: &[f64]) -> KForm {
        KForm {
            n: coeffs.len(),
            k: 1,
            coeffs: coeffs.to_vec(),
        }
    }

    /// e^{i_1} ^ ... ^ e^{i_k} for indices in any order; repeated indices give zero.
    pub fn basis(n: usize, idx: &[usize]) -> Result<KForm> {
        check_dims(n, idx.len())?;
        if idx.iter().any(|&i| i >= n) {
            return invalid(format!("index out of range for R^{n}: {idx:?}"));
        }
        let mut out = KForm::zeros(n, idx.len());
        let mut mask = 0u16;
        let mut sign = 1.0;
        for &i in idx {
            let b = 1u16 << i;
            if mask & b != 0 {
                return Ok(out);
            }
            sign *= shuffle_sign(mask, b);
            mask |= b;
        }
        let p = MultiIndexTable::get(n, idx.len()).position_of_mask(mask).unwrap();
        out.coeffs[p] = sign;
        Ok(out)
    }

    /// Sum of c * e^{idx} over the given terms. All terms must share a degree.
    pub fn from_terms(n: usize, terms: &[(&[usize], f64)]) -> Result<KForm> {
        let k = terms.first().map_or(0, |t| t.0.len());
        let mut out = KForm::zeros(n, k);
        for (idx, c) in terms {
            if idx.len() != k {
                return invalid("terms of mixed degree");
            }
            out.axpy(*c, &KForm::basis(n, idx)?);
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn table(&self) -> &'static MultiIndexTable {
        MultiIndexTable::get(self.n, self.k)
    }

    /// Coefficient of e^{idx} (idx strictly increasing).
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.table().position(idx).map_or(0.0, |p| self.coeffs[p])
    }

    /// Coefficient of a degree-0 or degree-n form.
    pub fn top(&self) -> f64 {
        debug_assert!(self.k == 0 || self.k == self.n);
        self.coeffs[0]
    }

    pub fn axpy(&mut self, c: f64, other: &KForm) {
        debug_assert_eq!((self.n, self.k), (other.n, other.k));
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += c * y;
        }
    }

    pub fn scaled(&self, c: f64) -> KForm {
        KForm {
            n: self.n,
            k: self.k,
            coeffs: self.coeffs.iter().map(|x| c * x).collect(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &KForm) -> f64 {
        assert_eq!((self.n, self.k), (other.n, other.k));
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    pub fn wedge(&self, other: &KForm) -> Result<KForm> {
        wedge(self, other)
    }

    /// Wedge product; panics on mismatch. For internal use with validated inputs.
    pub fn w(&self, other: &KForm) -> KForm {
        wedge(self, other).expect("wedge of incompatible forms")
    }

    pub fn hodge(&self) -> KForm {
        hodge(self)
    }

    pub fn dot(&self, other: &KForm) -> f64 {
        assert_eq!((self.n, self.k), (other.n, other.k));
        self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x * y).sum()
    }

    /// self^m, with self^0 = 1.
    pub fn power(&self, m: usize) -> KForm {
        let mut out = KForm::scalar(self.n, 1.0);
        for _ in 0..m {
            out = out.w(self);
        }
        out
    }

    /// Interior product with the basis vector e_j.
    pub fn interior_basis(&self, j: usize) -> KForm {
        let mut v = vec![0.0; self.n];
        v[j] = 1.0;
        interior(&v, self).expect("interior product on a positive-degree form")
    }

    /// Extend a form on R^m to R^{m+offset..} by shifting every index by `offset`.
    pub fn embed(&self, n: usize, offset: usize) -> Result<KForm> {
        if self.n + offset > n {
            return invalid("embedding does not fit");
        }
        let src = self.table();
        let dst = MultiIndexTable::get(n, self.k);
        let mut out = KForm::zeros(n, self.k);
        for p in 0..src.len() {
            let m = src.mask(p) << offset;
            out.coeffs[dst.position_of_mask(m).unwrap()] = self.coeffs[p];
        }
        Ok(out)
    }

    /// Restrict to the coordinates offset..offset+m, dropping terms that involve others.
    pub fn restrict(&self, m: usize, offset: usize) -> Result<KForm> {
        if m + offset > self.n || self.k > m {
            return invalid("restriction does not fit");
        }
        let src = self.table();
        let dst = MultiIndexTable::get(m, self.k);
        let window: u16 = (((1u32 << m) - 1) as u16) << offset;
        let mut out = KForm::zeros(m, self.k);
        for p in 0..src.len() {
            let mk = src.mask(p);
            if mk & !window == 0 {
                out.coeffs[dst.position_of_mask(mk >> offset).unwrap()] = self.coeffs[p];
            }
        }
        Ok(out)
    }
}

impl Add for &KForm {
    type Output = KForm;
    fn add(self, rhs: &KForm) -> KForm {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &KForm {
    type Output = KForm;
    fn sub(self, rhs: &KForm) -> KForm {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Add for KForm {
    type Output = KForm;
    fn add(mut self, rhs: KForm) -> KForm {
        self += &rhs;
        self
    }
}

impl Sub for KForm {
    type Output = KForm;
    fn sub(mut self, rhs: KForm) -> KForm {
        self -= &rhs;
        self
    }
}

impl AddAssign<&KForm> for KForm {
    fn add_assign(&mut self, rhs: &KForm) {
        assert_eq!((self.n, self.k), (rhs.n, rhs.k), "adding forms of different shape");
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&KForm> for KForm {
    fn sub_assign(&mut self, rhs: &KForm) {
        assert_eq!((self.n, self.k), (rhs.n, rhs.k), "subtracting forms of different shape");
        self.axpy(-1.0, rhs);
    }
}

impl Mul<&KForm> for f64 {
    type Output = KForm;
    fn mul(self, rhs: &KForm) -> KForm {
        rhs.scaled(self)
    }
}

impl Mul<KForm> for f64 {
    type Output = KForm;
    fn mul(self, rhs: KForm) -> KForm {
        rhs.scaled(self)
    }
}

impl Neg for &KForm {
    type Output = KForm;
    fn neg(self) -> KForm {
        self.scaled(-1.0)
    }
}

impl Neg for KForm {
    type Output = KForm;
    fn neg(self) -> KForm {
        self.scaled(-1.0)
    }
}

pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm> {
    if a.n != b.n {
        return invalid(format!("wedge of forms on R^{} and R^{}", a.n, b.n));
    }
    if a.k + b.k > a.n {
        return invalid(format!("wedge degree {} exceeds dimension {}", a.k + b.k, a.n));
    }
    let mut out = KForm::zeros(a.n, a.k + b.k);
    for t in wedge_table(a.n, a.k, b.k) {
        out.coeffs[t.c as usize] += t.sign * a.coeffs[t.a as usize] * b.coeffs[t.b as usize];
    }
    Ok(out)
}

/// Contraction i(v)a in the first slot.
pub fn interior(v: &[f64], a: &KForm) -> Result<KForm> {
    if a.k == 0 {
        return invalid("interior product of a 0-form");
    }
    if v.len() != a.n {
        return invalid(format!("vector of length {} on R^{}", v.len(), a.n));
    }
    let src = a.table();
    let dst = MultiIndexTable::get(a.n, a.k - 1);
    let mut out = KForm::zeros(a.n, a.k - 1);
    for p in 0..src.len() {
        let c = a.coeffs[p];
        if c == 0.0 {
            continue;
        }
        let m = src.mask(p);
        for (slot, j) in bits(m).enumerate() {
            let s = if slot % 2 == 0 { 1.0 } else { -1.0 };
            let q = dst.position_of_mask(m & !(1 << j)).unwrap();
            out.coeffs[q] += s * v[j] * c;
        }
    }
    Ok(out)
}

/// Hodge star for the Euclidean metric and orientation e^{0...n-1}.
pub fn hodge(a: &KForm) -> KForm {
    let mut out = KForm::zeros(a.n, a.n - a.k);
    for (p, &(q, s)) in hodge_table(a.n, a.k).iter().enumerate() {
        out.coeffs[q as usize] = s * a.coeffs[p];
    }
    out
}

pub fn inner(a: &KForm, b: &KForm) -> Result<f64> {
    if (a.n, a.k) != (b.n, b.k) {
        return invalid(format!(
            "inner product of a {}-form on R^{} with a {}-form on R^{}",
            a.k, a.n, b.k, b.n
        ));
    }
    Ok(a.dot(b))
}

/// A linear map of R^n stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Endo {
    n: usize,
    m: Vec<f64>,
}

impl Endo {
    pub fn zeros(n: usize) -> Endo {
        Endo { n, m: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Endo {
        let mut e = Endo::zeros(n);
        for i in 0..n {
            e.m[i * n + i] = 1.0;
        }
        e
    }

    pub fn from_rows(n: usize, m: Vec<f64>) -> Result<Endo> {
        if m.len() != n * n {
            return invalid("matrix size does not match dimension");
        }
        if m.iter().any(|x| !x.is_finite()) {
            return invalid("non-finite matrix entry");
        }
        Ok(Endo { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Endo {
        let n = self.n;
        let mut t = Endo::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.m[j * n + i] = self.m[i * n + j];
            }
        }
        t
    }

    pub fn compose(&self, other: &Endo) -> Endo {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut out = Endo::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.m[i * n + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.m[i * n + j] += a * other.m[l * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Endo) -> Endo {
        Endo {
            n: self.n,
            m: self.m.iter().zip(&other.m).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Endo) -> Endo {
        Endo {
            n: self.n,
            m: self.m.iter().zip(&other.m).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Endo {
        Endo {
            n: self.n,
            m: self.m.iter().map(|a| c * a).collect(),
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.m[i * n + j] * u[j]).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.m[i * self.n + i]).sum()
    }

    /// Frobenius norm of K + K^T.
    pub fn asymmetry(&self) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = self.m[i * n + j] + self.m[j * n + i];
                s += x * x;
            }
        }
        s.sqrt()
    }

    pub fn max_abs_diff(&self, other: &Endo) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Determinant by LU factorisation with partial pivoting.
    pub fn det_lu(&self) -> f64 {
        let n = self.n;
        let mut a = self.m.clone();
        let mut det = 1.0;
        for c in 0..n {
            let mut piv = c;
            for r in c + 1..n {
                if a[r * n + c].abs() > a[piv * n + c].abs() {
                    piv = r;
                }
            }
            if a[piv * n + c] == 0.0 {
                return 0.0;
            }
            if piv != c {
                for j in 0..n {
                    a.swap(c * n + j, piv * n + j);
                }
                det = -det;
            }
            let d = a[c * n + c];
            det *= d;
            for r in c + 1..n {
                let f = a[r * n + c] / d;
                if f != 0.0 {
                    for j in c..n {
                        a[r * n + j] -= f * a[c * n + j];
                    }
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Endo> {
        let n = self.n;
        let mut a = self.m.clone();
        let mut inv = Endo::identity(n).m;
        for c in 0..n {
            let mut piv = c;
            for r in c + 1..n {
                if a[r * n + c].abs() > a[piv * n + c].abs() {
                    piv = r;
                }
            }
            if a[piv * n + c].abs() < 1e-300 {
                return invalid("singular matrix");
            }
            for j in 0..n {
                a.swap(c * n + j, piv * n + j);
                inv.swap(c * n + j, piv * n + j);
            }
            let d = a[c * n + c];
            for j in 0..n {
                a[c * n + j] /= d;
                inv[c * n + j] /= d;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = a[r * n + c];
                if f != 0.0 {
                    for j in 0..n {
                        a[r * n + j] -= f * a[c * n + j];
                        inv[r * n + j] -= f * inv[c * n + j];
                    }
                }
            }
        }
        Ok(Endo { n, m: inv })
    }
}

/// F^sharp: the skew endomorphism with g(F^sharp u, v) = F(u, v).
pub fn sharp(f: &KForm) -> Result<Endo> {
    if f.k != 2 {
        return invalid(format!("sharp expects a 2-form, got degree {}", f.k));
    }
    let n = f.n;
    let t = f.table();
    let mut e = Endo::zeros(n);
    for p in 0..t.len() {
        let m = t.mask(p);
        let i = m.trailing_zeros() as usize;
        let j = 15 - m.leading_zeros() as usize;
        // F(u,v) = sum_{i<j} F_ij (u_i v_j - u_j v_i), so (F^sharp u)_j = sum_i F_ij u_i.
        e.m[j * n + i] = f.coeffs[p];
        e.m[i * n + j] = -f.coeffs[p];
    }
    Ok(e)
}

/// K^flat(u, v) = g(K u, v). With `require_skew`, rejects K with |K + K^T| > 1e-12 (1 + |K|).
pub fn flat_skew(k: &Endo, require_skew: bool) -> Result<KForm> {
    let n = k.n;
    if require_skew {
        let asym = k.asymmetry();
        let scale = 1.0 + k.m.iter().map(|x| x * x).sum::<f64>().sqrt();
        if asym > 1e-12 * scale {
            return Err(Error::NotSkew { asymmetry: asym });
        }
    }
    let mut out = KForm::zeros(n, 2);
    let t = out.table();
    for p in 0..t.len() {
        let m = t.mask(p);
        let i = m.trailing_zeros() as usize;
        let j = 15 - m.leading_zeros() as usize;
        // Antisymmetric part of g(Ku, v); exact for skew K.
        out.coeffs[p] = 0.5 * (k.m[j * n + i] - k.m[i * n + j]);
    }
    Ok(out)
}

/// det(I + F^sharp) computed two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPair {
    /// 1 + |F|^2 + |F^2/2!|^2 + ...
    pub formula: f64,
    /// LU determinant of I + F^sharp.
    pub oracle: f64,
}

pub fn det_formula(f: &KForm) -> f64 {
    let mut total = 1.0;
    let mut pw = KForm::scalar(f.n, 1.0);
    let mut fact = 1.0;
    for m in 1..=f.n / 2 {
        pw = pw.w(f);
        fact *= m as f64;
        total += pw.norm_sq() / (fact * fact);
    }
    total
}

pub fn det_one_plus(f: &KForm) -> Result<DetPair> {
    let s = sharp(f)?;
    let oracle = Endo::identity(f.n).add(&s).det_lu();
    Ok(DetPair {
        formula: det_formula(f),
        oracle,
    })
}

/// A complex-valued k-form stored as real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexKForm {
    pub re: KForm,
    pub im: KForm,
}

impl ComplexKForm {
    pub fn new(re: KForm, im: KForm) -> Result<ComplexKForm> {
        if (re.n, re.k) != (im.n, im.k) {
            return invalid("real and imaginary parts differ in shape");
        }
        Ok(ComplexKForm { re, im })
    }

    pub fn real(re: KForm) -> ComplexKForm {
        let im = KForm::zeros(re.n, re.k);
        ComplexKForm { re, im }
    }

    pub fn zeros(n: usize, k: usize) -> ComplexKForm {
        ComplexKForm {
            re: KForm::zeros(n, k),
            im: KForm::zeros(n, k),
        }
    }

    pub fn one(n: usize) -> ComplexKForm {
        ComplexKForm::real(KForm::scalar(n, 1.0))
    }

    pub fn n(&self) -> usize {
        self.re.n
    }

    pub fn k(&self) -> usize {
        self.re.k
    }

    pub fn wedge(&self, other: &ComplexKForm) -> Result<ComplexKForm> {
        let rr = wedge(&self.re, &other.re)?;
        let ii = wedge(&self.im, &other.im)?;
        let ri = wedge(&self.re, &other.im)?;
        let ir = wedge(&self.im, &other.re)?;
        Ok(ComplexKForm {
            re: rr - ii,
            im: ri + ir,
        })
    }

    pub fn w(&self, other: &ComplexKForm) -> ComplexKForm {
        self.wedge(other).expect("wedge of incompatible forms")
    }

    pub fn power(&self, m: usize) -> ComplexKForm {
        let mut out = ComplexKForm::one(self.n());
        for _ in 0..m {
            out = out.w(self);
        }
        out
    }

    pub fn scaled(&self, c: Complex<f64>) -> ComplexKForm {
        ComplexKForm {
            re: &self.re.scaled(c.re) - &self.im.scaled(c.im),
            im: &self.re.scaled(c.im) + &self.im.scaled(c.re),
        }
    }

    pub fn conj(&self) -> ComplexKForm {
        ComplexKForm {
            re: self.re.clone(),
            im: -&self.im,
        }
    }

    pub fn add(&self, other: &ComplexKForm) -> ComplexKForm {
        ComplexKForm {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
        }
    }

    pub fn sub(&self, other: &ComplexKForm) -> ComplexKForm {
        ComplexKForm {
            re: &self.re - &other.re,
            im: &self.im - &other.im,
        }
    }

    pub fn hodge(&self) -> ComplexKForm {
        ComplexKForm {
            re: hodge(&self.re),
            im: hodge(&self.im),
        }
    }

    /// Hermitian squared norm |re|^2 + |im|^2.
    pub fn norm_sq(&self) -> f64 {
        self.re.norm_sq() + self.im.norm_sq()
    }

    /// Top coefficient as a complex number (degree 0 or n).
    pub fn top(&self) -> Complex<f64> {
        Complex::new(self.re.top(), self.im.top())
    }
}
