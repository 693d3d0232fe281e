//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's wedge, Hodge star or determinant code.
#![allow(dead_code)]

use mvlab_core::forms::binomial;
use mvlab_core::KForm;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, len: usize, range: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-range..range)).collect()
}

pub fn random_form(rng: &mut ChaCha8Rng, n: usize, k: usize, range: f64) -> KForm {
    KForm::from_coeffs(n, k, uniform_vec(rng, binomial(n, k), range)).unwrap()
}

/// Sign of the permutation that sorts `idx`, or 0 with a repeated index.
pub fn perm_sign(idx: &[usize]) -> f64 {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] == v[j + 1] {
                return 0.0;
            }
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    sign
}

/// Strictly increasing k-tuples of 0..n in lexicographic order.
pub fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Wedge product by summing over pairs of basis tuples.
pub fn wedge_brute(a: &KForm, b: &KForm) -> KForm {
    let n = a.n();
    let (ka, kb) = (a.k(), b.k());
    let mut out = vec![0.0; binomial(n, ka + kb)];
    if ka + kb <= n {
        let target = tuples(n, ka + kb);
        for (i, ti) in tuples(n, ka).iter().enumerate() {
            for (j, tj) in tuples(n, kb).iter().enumerate() {
                let cat: Vec<usize> = ti.iter().chain(tj).copied().collect();
                let s = perm_sign(&cat);
                if s == 0.0 {
                    continue;
                }
                let mut sorted = cat.clone();
                sorted.sort_unstable();
                let pos = target.iter().position(|t| *t == sorted).unwrap();
                out[pos] += s * a.coeffs()[i] * b.coeffs()[j];
            }
        }
    }
    KForm::from_coeffs(n, ka + kb, out).unwrap()
}

/// Hodge star from e^I ∧ ∗e^I = vol on the basis.
pub fn hodge_brute(a: &KForm) -> KForm {
    let n = a.n();
    let k = a.k();
    let target = tuples(n, n - k);
    let mut out = vec![0.0; binomial(n, n - k)];
    for (i, t) in tuples(n, k).iter().enumerate() {
        let comp: Vec<usize> = (0..n).filter(|x| !t.contains(x)).collect();
        let cat: Vec<usize> = t.iter().chain(&comp).copied().collect();
        let pos = target.iter().position(|c| *c == comp).unwrap();
        out[pos] += perm_sign(&cat) * a.coeffs()[i];
    }
    KForm::from_coeffs(n, n - k, out).unwrap()
}

/// The skew matrix F_ij of a 2-form.
pub fn skew_matrix(f: &KForm) -> DMatrix<f64> {
    let n = f.n();
    let mut m = DMatrix::zeros(n, n);
    for (p, t) in tuples(n, 2).iter().enumerate() {
        m[(t[0], t[1])] = f.coeffs()[p];
        m[(t[1], t[0])] = -f.coeffs()[p];
    }
    m
}

/// det(I + F) with nalgebra's LU.
pub fn det_one_plus(f: &KForm) -> f64 {
    let n = f.n();
    (DMatrix::identity(n, n) + skew_matrix(f)).determinant()
}

/// ρ (det G)^{1/4} G⁻¹F as a 2-form, with G = I + FᵀF, from dense nalgebra algebra.
pub fn stress_oracle(f: &KForm) -> KForm {
    let n = f.n();
    let a = skew_matrix(f);
    let g = DMatrix::identity(n, n) + a.transpose() * &a;
    let rho = g.determinant().powf(0.25);
    let k = g.try_inverse().unwrap() * &a * rho;
    let c = tuples(n, 2)
        .iter()
        .map(|t| 0.5 * (k[(t[0], t[1])] - k[(t[1], t[0])]))
        .collect();
    KForm::from_coeffs(n, 2, c).unwrap()
}

/// A form from index strings such as "123"; each digit minus `offset` is the
/// array index.
pub fn indexed_form(n: usize, offset: usize, terms: &[(&str, f64)]) -> KForm {
    let mut out = KForm::zeros(n, terms[0].0.len());
    for (idx, c) in terms {
        let ix: Vec<usize> = idx
            .chars()
            .map(|ch| ch.to_digit(10).unwrap() as usize - offset)
            .collect();
        let s = perm_sign(&ix);
        let mut sorted = ix.clone();
        sorted.sort_unstable();
        out.axpy(s * c, &KForm::basis(n, &sorted).unwrap());
    }
    out
}

pub fn ref_phi() -> KForm {
    indexed_form(
        7,
        1,
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

pub fn ref_star_phi() -> KForm {
    indexed_form(
        7,
        1,
        &[
            ("4567", 1.0),
            ("2367", 1.0),
            ("2345", 1.0),
            ("1357", 1.0),
            ("1346", -1.0),
            ("1256", -1.0),
            ("1247", -1.0),
        ],
    )
}

pub fn ref_cayley() -> KForm {
    indexed_form(
        8,
        0,
        &[
            ("0123", 1.0),
            ("0145", 1.0),
            ("0167", 1.0),
            ("0246", 1.0),
            ("0257", -1.0),
            ("0347", -1.0),
            ("0356", -1.0),
            ("4567", 1.0),
            ("2367", 1.0),
            ("2345", 1.0),
            ("1357", 1.0),
            ("1346", -1.0),
            ("1256", -1.0),
            ("1247", -1.0),
        ],
    )
}

/// ω, ReΩ and ImΩ of C^3 (frame indices 2..7) or C^4 (frame indices 0..7),
/// with Ω the product of the f^a = e^x + i e^y expanded term by term.
pub fn ref_su(nc: usize) -> (KForm, KForm, KForm) {
    let (n, offset) = if nc == 3 { (6, 2) } else { (8, 0) };
    let pairs: Vec<(usize, usize)> = (0..nc).map(|a| (2 * a + offset, 2 * a + 1 + offset)).collect();
    let mut omega = Vec::new();
    for &(x, y) in &pairs {
        omega.push((format!("{x}{y}"), 1.0));
    }
    // Expand Π (e^x + i e^y): each factor contributes a real or an imaginary index.
    let mut re = Vec::new();
    let mut im = Vec::new();
    for mask in 0..(1usize << nc) {
        let idx: String = pairs
            .iter()
            .enumerate()
            .map(|(a, &(x, y))| if mask >> a & 1 == 1 { y } else { x })
            .map(|d| char::from_digit(d as u32, 10).unwrap())
            .collect();
        let ni = mask.count_ones();
        // i^ni
        match ni % 4 {
            0 => re.push((idx, 1.0)),
            1 => im.push((idx, 1.0)),
            2 => re.push((idx, -1.0)),
            _ => im.push((idx, -1.0)),
        }
    }
    fn conv(v: &[(String, f64)]) -> Vec<(&str, f64)> {
        v.iter().map(|(s, c)| (s.as_str(), *c)).collect()
    }
    (
        indexed_form(n, offset, &conv(&omega)),
        indexed_form(n, offset, &conv(&re)),
        indexed_form(n, offset, &conv(&im)),
    )
}
