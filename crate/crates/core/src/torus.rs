//! Connections on the flat unit torus T^n discretised on a periodic grid with
//! central differences: curvature, volume functional, mean curvature and the
//! explicit-Euler line bundle mean curvature flow.
//!
//! Fields are stored component-major: component c of a k-form field occupies
//! `data[c * points .. (c + 1) * points]`, and grid points are numbered
//! row-major (last axis fastest).

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::forms::{binomial, shuffle_sign, KForm, MultiIndexTable};
use crate::holonomy::{make_structure, StructureKind};

/// Default cap on grid size (points), about 0.3 GB per scalar field.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 25;

const ROW_BLOCK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    shape: Vec<usize>,
    strides: Vec<usize>,
    points: usize,
}

impl TorusGrid {
    pub fn new(shape: &[usize]) -> Result<TorusGrid> {
        TorusGrid::with_budget(shape, DEFAULT_POINT_BUDGET)
    }

    pub fn with_budget(shape: &[usize], max_points: usize) -> Result<TorusGrid> {
        if shape.is_empty() || shape.len() > crate::forms::MAX_DIM {
            return invalid(format!("torus dimension {} is not supported", shape.len()));
        }
        if let Some(&bad) = shape.iter().find(|&&s| s < 4 || s % 2 != 0) {
            return invalid(format!("axis size {bad} must be even and at least 4"));
        }
        let points = shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .filter(|&p| p <= max_points)
            .ok_or_else(|| {
                Error::InvalidInput(format!("grid {shape:?} exceeds the budget of {max_points} points"))
            })?;
        let mut strides = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        Ok(TorusGrid {
            shape: shape.to_vec(),
            strides,
            points,
        })
    }

    /// The cube N^n.
    pub fn cube(n: usize, size: usize) -> Result<TorusGrid> {
        TorusGrid::new(&vec![size; n])
    }

    pub fn n(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.shape[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.n()).map(|i| self.spacing(i)).fold(f64::INFINITY, f64::min)
    }

    /// Volume of one grid cell.
    pub fn cell(&self) -> f64 {
        self.shape.iter().map(|&s| 1.0 / s as f64).product()
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        (0..self.n())
            .map(|i| ((p / self.strides[i]) % self.shape[i]) as f64 * self.spacing(i))
            .collect()
    }

    /// Evaluates `f` at every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64 + Sync + Send, exec: Exec) -> Vec<f64> {
        exec.map_indexed(self.points, |p| f(&self.coords(p)))
    }

    /// Samples a k-form field from a function returning all components.
    pub fn sample_form(
        &self,
        k: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Sync + Send,
        exec: Exec,
    ) -> Vec<f64> {
        let m = binomial(self.n(), k);
        let per_point = exec.map_indexed(self.points, |p| f(&self.coords(p)));
        let mut out = vec![0.0; m * self.points];
        for (p, v) in per_point.into_iter().enumerate() {
            assert_eq!(v.len(), m, "sampled form has the wrong number of components");
            for c in 0..m {
                out[c * self.points + p] = v[c];
            }
        }
        out
    }

    /// dst += coef * (src(x + e_axis) − src(x − e_axis)) / (2 h_axis).
    pub fn diff_acc(&self, src: &[f64], dst: &mut [f64], axis: usize, coef: f64, exec: Exec) {
        let len = self.shape[axis];
        let inner = self.strides[axis];
        let c = coef * 0.5 * len as f64;
        let rows_per_block = (ROW_BLOCK / inner).max(1);
        exec.for_chunks(dst, rows_per_block * inner, |b, chunk| {
            let r0 = b * rows_per_block;
            for (ri, row) in chunk.chunks_mut(inner).enumerate() {
                let r = r0 + ri;
                let (o, i) = (r / len, r % len);
                let base = o * len * inner;
                let ip = base + ((i + 1) % len) * inner;
                let im = base + ((i + len - 1) % len) * inner;
                let sp = &src[ip..ip + inner];
                let sm = &src[im..im + inner];
                for ((d, a), b) in row.iter_mut().zip(sp).zip(sm) {
                    *d += c * (a - b);
                }
            }
        });
    }

    /// Discrete L² inner product of two fields with the same layout.
    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let s: f64 = a
            .chunks(ROW_BLOCK)
            .zip(b.chunks(ROW_BLOCK))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .sum();
        s * self.cell()
    }

    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        self.l2_inner(a, a).sqrt()
    }
}

/// Potential with entries uniform in [−amplitude, amplitude), drawn in
/// storage order from a ChaCha8 stream seeded with `seed`.
pub fn random_potential(grid: &TorusGrid, amplitude: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let len = grid.n() * grid.points();
    if amplitude == 0.0 {
        return vec![0.0; len];
    }
    (0..len).map(|_| rng.random_range(-amplitude..amplitude)).collect()
}

/// Exterior derivative of a k-form field.
pub fn d(grid: &TorusGrid, k: usize, field: &[f64], exec: Exec) -> Result<Vec<f64>> {
    let n = grid.n();
    if k + 1 > n {
        return invalid(format!("d of a {k}-form on T^{n}"));
    }
    check_len(grid, k, field)?;
    let src = MultiIndexTable::get(n, k);
    let dst = MultiIndexTable::get(n, k + 1);
    let np = grid.points();
    let mut out = vec![0.0; dst.len() * np];
    for q in 0..dst.len() {
        let m = dst.mask(q);
        for j in crate::forms::bits(m) {
            let rest = m & !(1 << j);
            let p = src.position_of_mask(rest).unwrap();
            let s = shuffle_sign(1 << j, rest);
            let (o, f) = (&mut out[q * np..(q + 1) * np], &field[p * np..(p + 1) * np]);
            grid.diff_acc(f, o, j, s, exec);
        }
    }
    Ok(out)
}

/// Codifferential δ, the exact adjoint of [`d`] for the discrete L² product.
pub fn delta(grid: &TorusGrid, k: usize, field: &[f64], exec: Exec) -> Result<Vec<f64>> {
    let n = grid.n();
    if k == 0 || k > n {
        return invalid(format!("δ of a {k}-form on T^{n}"));
    }
    check_len(grid, k, field)?;
    let src = MultiIndexTable::get(n, k);
    let dst = MultiIndexTable::get(n, k - 1);
    let np = grid.points();
    let mut out = vec![0.0; dst.len() * np];
    for q in 0..dst.len() {
        let m = dst.mask(q);
        for j in 0..n {
            if m & (1 << j) != 0 {
                continue;
            }
            let p = src.position_of_mask(m | (1 << j)).unwrap();
            let s = shuffle_sign(1 << j, m);
            let (o, f) = (&mut out[q * np..(q + 1) * np], &field[p * np..(p + 1) * np]);
            grid.diff_acc(f, o, j, -s, exec);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffOp {
    D,
    Delta,
}

pub fn exterior_calculus(
    grid: &TorusGrid,
    k: usize,
    field: &[f64],
    op: DiffOp,
    exec: Exec,
) -> Result<Vec<f64>> {
    match op {
        DiffOp::D => d(grid, k, field, exec),
        DiffOp::Delta => delta(grid, k, field, exec),
    }
}

fn check_len(grid: &TorusGrid, k: usize, field: &[f64]) -> Result<()> {
    let want = binomial(grid.n(), k) * grid.points();
    if field.len() != want {
        return invalid(format!(
            "{k}-form field has {} values, expected {want}",
            field.len()
        ));
    }
    Ok(())
}

/// A connection ∇₀ + i a on the trivial bundle over T^n with constant
/// background curvature i F₀.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionField {
    pub grid: TorusGrid,
    pub potential: Vec<f64>,
    pub background: KForm,
    pub structure: Option<StructureKind>,
}

impl ConnectionField {
    pub fn new(
        grid: TorusGrid,
        potential: Vec<f64>,
        background: KForm,
        structure: Option<StructureKind>,
    ) -> Result<ConnectionField> {
        let n = grid.n();
        check_len(&grid, 1, &potential)?;
        if background.n() != n || background.k() != 2 {
            return invalid("background must be a 2-form of the torus dimension");
        }
        if let Some(s) = structure {
            if s.dim() != n {
                return invalid(format!("{s} structure on a {n}-torus"));
            }
        }
        if potential.iter().any(|x| !x.is_finite()) {
            return invalid("non-finite potential");
        }
        Ok(ConnectionField {
            grid,
            potential,
            background,
            structure,
        })
    }

    /// a = 0 with the given background.
    pub fn flat(grid: TorusGrid, background: KForm, structure: Option<StructureKind>) -> Result<Self> {
        let pot = vec![0.0; grid.n() * grid.points()];
        ConnectionField::new(grid, pot, background, structure)
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }
}

/// E = F₀ + d a as a 2-form field.
pub fn curvature(c: &ConnectionField, exec: Exec) -> Vec<f64> {
    let mut e = d(&c.grid, 1, &c.potential, exec).expect("potential is a 1-form field");
    let np = c.grid.points();
    for (q, &f0) in c.background.coeffs().iter().enumerate() {
        if f0 != 0.0 {
            for x in &mut e[q * np..(q + 1) * np] {
                *x += f0;
            }
        }
    }
    e
}

/// 2-form at one point of a component-major field.
pub fn form_at(grid: &TorusGrid, k: usize, field: &[f64], p: usize) -> KForm {
    let np = grid.points();
    let m = binomial(grid.n(), k);
    let c = (0..m).map(|q| field[q * np + p]).collect();
    KForm::from_coeffs(grid.n(), k, c).expect("finite field values")
}

/// Pointwise geometry of E: G = I − E♯E♯ = I + (E♯)ᵀE♯ and related quantities.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub n: usize,
    /// (det G)^{1/4} = √det(I + E♯).
    pub rho: f64,
    pub det_g: f64,
    /// G row-major with stride 8.
    pub g: [f64; 64],
    /// G⁻¹ row-major with stride 8.
    pub g_inv: [f64; 64],
    /// E♯ row-major with stride 8.
    pub sharp: [f64; 64],
}

fn pairs(n: usize) -> &'static [(u8, u8)] {
    use std::sync::OnceLock;
    static CACHE: [OnceLock<Vec<(u8, u8)>>; 9] = [const { OnceLock::new() }; 9];
    CACHE[n].get_or_init(|| {
        let t = MultiIndexTable::get(n, 2);
        (0..t.len())
            .map(|p| {
                let m = t.mask(p);
                (m.trailing_zeros() as u8, (15 - m.leading_zeros()) as u8)
            })
            .collect()
    })
}

/// Cholesky factor of G and E♯; returns (L, sharp, rho, det G).
#[inline]
fn factor(n: usize, e: &[f64]) -> ([f64; 64], [f64; 64], f64, f64) {
    let mut m = [0.0f64; 64];
    for (&(i, j), &v) in pairs(n).iter().zip(e) {
        let (i, j) = (i as usize, j as usize);
        m[j * 8 + i] = v;
        m[i * 8 + j] = -v;
    }
    let mut g = [0.0f64; 64];
    for r in 0..n {
        for c in 0..=r {
            let mut s = if r == c { 1.0 } else { 0.0 };
            for l in 0..n {
                s += m[l * 8 + r] * m[l * 8 + c];
            }
            g[r * 8 + c] = s;
        }
    }
    // In-place Cholesky on the lower triangle.
    let mut prod = 1.0;
    for c in 0..n {
        let mut dsum = g[c * 8 + c];
        for l in 0..c {
            dsum -= g[c * 8 + l] * g[c * 8 + l];
        }
        let dd = dsum.sqrt();
        g[c * 8 + c] = dd;
        prod *= dd;
        for r in c + 1..n {
            let mut s = g[r * 8 + c];
            for l in 0..c {
                s -= g[r * 8 + l] * g[c * 8 + l];
            }
            g[r * 8 + c] = s / dd;
        }
    }
    (g, m, prod.sqrt(), prod * prod)
}

/// Solves L Lᵀ x = b in place.
#[inline]
fn chol_solve(n: usize, l: &[f64; 64], b: &mut [f64; 8]) {
    for r in 0..n {
        let mut s = b[r];
        for c in 0..r {
            s -= l[r * 8 + c] * b[c];
        }
        b[r] = s / l[r * 8 + r];
    }
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= l[c * 8 + r] * b[c];
        }
        b[r] = s / l[r * 8 + r];
    }
}

/// Inverse and determinant of A = I + E♯ by Gauss-Jordan elimination.
/// The symmetric part of A is I, so no pivoting is needed.
#[inline(always)]
fn one_plus_inverse<const N: usize>(e: &[f64], pairs: &[(u8, u8)]) -> ([[f64; N]; N], f64) {
    let mut a = [[0.0f64; N]; N];
    let mut inv = [[0.0f64; N]; N];
    for i in 0..N {
        a[i][i] = 1.0;
        inv[i][i] = 1.0;
    }
    for (&(i, j), &v) in pairs.iter().zip(e) {
        a[j as usize][i as usize] = v;
        a[i as usize][j as usize] = -v;
    }
    let mut det = 1.0;
    for c in 0..N {
        let piv = a[c][c];
        det *= piv;
        let r = 1.0 / piv;
        for t in 0..N {
            a[c][t] *= r;
            inv[c][t] *= r;
        }
        for row in 0..N {
            if row == c {
                continue;
            }
            let f = a[row][c];
            if f != 0.0 {
                for t in 0..N {
                    a[row][t] -= f * a[c][t];
                    inv[row][t] -= f * inv[c][t];
                }
            }
        }
    }
    (inv, det)
}

#[inline(always)]
fn stress_n<const N: usize>(e: &[f64], k_out: &mut [f64]) -> f64 {
    let pr = pairs(N);
    let (p, det) = one_plus_inverse::<N>(e, pr);
    // G⁻¹E♯ = ((I − E♯)⁻¹ − (I + E♯)⁻¹)/2 and (I − E♯)⁻¹ = ((I + E♯)⁻¹)ᵀ.
    let rho = det.sqrt();
    for (q, &(i, j)) in pr.iter().enumerate() {
        let (i, j) = (i as usize, j as usize);
        k_out[q] = rho * 0.5 * (p[i][j] - p[j][i]);
    }
    rho
}

#[inline(always)]
fn rho_n<const N: usize>(e: &[f64]) -> f64 {
    let mut a = [[0.0f64; N]; N];
    for i in 0..N {
        a[i][i] = 1.0;
    }
    for (&(i, j), &v) in pairs(N).iter().zip(e) {
        a[j as usize][i as usize] = v;
        a[i as usize][j as usize] = -v;
    }
    let mut det = 1.0;
    for c in 0..N {
        let piv = a[c][c];
        det *= piv;
        for row in c + 1..N {
            let f = a[row][c] / piv;
            for t in c + 1..N {
                a[row][t] -= f * a[c][t];
            }
        }
    }
    det.sqrt()
}

/// (det G)^{1/4} (G⁻¹ E♯)♭ written into `k_out`; returns (det G)^{1/4}.
pub fn stress(n: usize, e: &[f64], k_out: &mut [f64]) -> f64 {
    match n {
        1 => 1.0,
        2 => stress_n::<2>(e, k_out),
        3 => stress_n::<3>(e, k_out),
        4 => stress_n::<4>(e, k_out),
        5 => stress_n::<5>(e, k_out),
        6 => stress_n::<6>(e, k_out),
        7 => stress_n::<7>(e, k_out),
        8 => stress_n::<8>(e, k_out),
        _ => panic!("unsupported dimension {n}"),
    }
}

/// (det G)^{1/4} = det(I + E♯)^{1/2}.
pub fn rho(n: usize, e: &[f64]) -> f64 {
    match n {
        1 => 1.0,
        2 => rho_n::<2>(e),
        3 => rho_n::<3>(e),
        4 => rho_n::<4>(e),
        5 => rho_n::<5>(e),
        6 => rho_n::<6>(e),
        7 => rho_n::<7>(e),
        8 => rho_n::<8>(e),
        _ => panic!("unsupported dimension {n}"),
    }
}

/// G, det G and G⁻¹ for a 2-form E.
pub fn big_g(e: &KForm) -> PointGeometry {
    let n = e.n();
    let (l, m, rho, det_g) = factor(n, e.coeffs());
    let mut g = [0.0f64; 64];
    for r in 0..n {
        for c in 0..n {
            let mut s = if r == c { 1.0 } else { 0.0 };
            for t in 0..n {
                s += m[t * 8 + r] * m[t * 8 + c];
            }
            g[r * 8 + c] = s;
        }
    }
    let mut g_inv = [0.0f64; 64];
    for c in 0..n {
        let mut col = [0.0f64; 8];
        col[c] = 1.0;
        chol_solve(n, &l, &mut col);
        for r in 0..n {
            g_inv[r * 8 + c] = col[r];
        }
    }
    PointGeometry {
        n,
        rho,
        det_g,
        g,
        g_inv,
        sharp: m,
    }
}

/// Runs `stress` on every point of a curvature field in place; returns Σ ρ.
fn stress_field(grid: &TorusGrid, e: &mut [f64], exec: Exec) -> f64 {
    let n = grid.n();
    let m = binomial(n, 2);
    let np = grid.points();
    // Hand each worker the same point range of every component.
    let mut cols: Vec<_> = e.chunks_mut(np).map(|c| c.chunks_mut(ROW_BLOCK)).collect();
    let blocks: Vec<Vec<&mut [f64]>> = (0..np.div_ceil(ROW_BLOCK))
        .map(|_| cols.iter_mut().map(|c| c.next().unwrap()).collect())
        .collect();
    let sums = exec.map_items(blocks, |_, mut block| {
        let len = block.first().map_or(0, |b| b.len());
        let mut ev = [0.0f64; 28];
        let mut kv = [0.0f64; 28];
        let mut acc = 0.0;
        for p in 0..len {
            for q in 0..m {
                ev[q] = block[q][p];
            }
            acc += stress(n, &ev[..m], &mut kv[..m]);
            for q in 0..m {
                block[q][p] = kv[q];
            }
        }
        acc
    });
    sums.into_iter().sum()
}

/// V = Σ √det(I + E♯) · cell.
pub fn volume(c: &ConnectionField, exec: Exec) -> f64 {
    let mut e = curvature(c, exec);
    volume_of_curvature(&c.grid, &mut e, exec)
}

fn volume_of_curvature(grid: &TorusGrid, e: &mut [f64], exec: Exec) -> f64 {
    let n = grid.n();
    let m = binomial(n, 2);
    let np = grid.points();
    let e_ro: &[f64] = e;
    let s = exec.sum_blocks(np, ROW_BLOCK, |r| {
        let mut ev = [0.0f64; 28];
        let mut acc = 0.0;
        for p in r {
            for q in 0..m {
                ev[q] = e_ro[q * np + p];
            }
            acc += rho(n, &ev[..m]);
        }
        acc
    });
    s * grid.cell()
}

/// V evaluated both as Σ (det G)^{1/4} and as Σ √(1 + |E|² + |E²/2|² + ...).
pub fn volume_two_ways(c: &ConnectionField, exec: Exec) -> (f64, f64) {
    let e = curvature(c, exec);
    let np = c.grid.points();
    let a = exec.sum_blocks(np, ROW_BLOCK, |r| {
        r.map(|p| big_g(&form_at(&c.grid, 2, &e, p)).rho).sum()
    });
    let b = exec.sum_blocks(np, ROW_BLOCK, |r| {
        r.map(|p| calibration::volume_density(&form_at(&c.grid, 2, &e, p)))
            .sum()
    });
    (a * c.grid.cell(), b * c.grid.cell())
}

/// Volume and mean curvature H = −δ((det G)^{1/4}(G⁻¹E♯)♭) together.
pub fn volume_and_mean_curvature(c: &ConnectionField, exec: Exec) -> (f64, Vec<f64>) {
    let mut k = curvature(c, exec);
    let rho_sum = stress_field(&c.grid, &mut k, exec);
    let mut h = delta(&c.grid, 2, &k, exec).expect("stress is a 2-form field");
    for x in &mut h {
        *x = -*x;
    }
    (rho_sum * c.grid.cell(), h)
}

pub fn mean_curvature(c: &ConnectionField, exec: Exec) -> Vec<f64> {
    volume_and_mean_curvature(c, exec).1
}

/// The quadratic form of the principal symbol of the linearised mean
/// curvature operator: (det G)^{1/4}(|a|²|ξ|² − ⟨a,ξ⟩²) in the metric G⁻¹,
/// plus (det G)^{1/4}⟨a,ξ⟩² (flat metric) with the DeTurck term.
pub fn principal_symbol_form(e: &KForm, xi: &[f64], a: &[f64], deturck: bool) -> Result<f64> {
    let n = e.n();
    if xi.len() != n || a.len() != n {
        return invalid("covectors must match the form dimension");
    }
    if xi.iter().all(|&x| x == 0.0) {
        return invalid("principal symbol needs ξ ≠ 0");
    }
    let geo = big_g(e);
    let ip = |u: &[f64], v: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += u[i] * geo.g_inv[i * 8 + j] * v[j];
            }
        }
        s
    };
    let (aa, xx, ax) = (ip(a, a), ip(xi, xi), ip(a, xi));
    let mut out = geo.rho * (aa * xx - ax * ax);
    if deturck {
        let flat: f64 = a.iter().zip(xi).map(|(p, q)| p * q).sum();
        out += geo.rho * flat * flat;
    }
    Ok(out)
}

/// a ↦ a + d f.
pub fn gauge_shift(c: &ConnectionField, f: &[f64], exec: Exec) -> Result<ConnectionField> {
    let df = d(&c.grid, 0, f, exec)?;
    let mut out = c.clone();
    for (x, y) in out.potential.iter_mut().zip(&df) {
        *x += y;
    }
    Ok(out)
}

/// Step-size policy of the flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "policy", content = "value")]
pub enum Dt {
    /// dt = c · min h².
    Auto(f64),
    Fixed(f64),
}

impl Default for Dt {
    fn default() -> Self {
        Dt::Auto(0.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dt: Dt,
    pub steps: usize,
    pub deturck: bool,
    /// Residual and slack columns are filled every `record_every` steps
    /// (NaN in between); 0 disables them.
    pub record_every: usize,
    /// Phase θ used for dHYM residuals and the calibrated integrand.
    pub theta: f64,
    pub exec: Exec,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: Dt::default(),
            steps: 100,
            deturck: false,
            record_every: 1,
            theta: 0.0,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub v: f64,
    pub h_l2: f64,
    pub res_1: f64,
    pub res_2: f64,
    pub slack: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<String>,
}

impl FlowTrace {
    /// Steps where V increased by more than `rel_tol · V`.
    pub fn monotonicity_violations(&self, rel_tol: f64) -> usize {
        self.rows
            .windows(2)
            .filter(|w| w[1].v - w[0].v > rel_tol * w[0].v)
            .count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,V,H_l2,res_1,res_2,slack,dt")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.v, r.h_l2, r.res_1, r.res_2, r.slack, r.dt
            )?;
        }
        Ok(())
    }
}

/// Final state of a flow run.
#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub field: ConnectionField,
    pub trace: FlowTrace,
    /// With DeTurck on: η such that the potential equals that of the plain
    /// flow plus dη (the accumulated gauge term).
    pub gauge: Option<Vec<f64>>,
}

/// L² norms of the defining residual tensors and the energy-bound slack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDiagnostics {
    pub res_1: f64,
    pub res_2: f64,
    pub calibrated_integral: f64,
    pub volume: f64,
    pub slack: f64,
}

pub fn diagnostics(c: &ConnectionField, theta: f64, exec: Exec) -> Result<FieldDiagnostics> {
    let kind = c
        .structure
        .ok_or_else(|| Error::InvalidInput("field has no structure".into()))?;
    let s = crate::identity::lab().get(kind);
    let e = curvature(c, exec);
    let np = c.grid.points();
    let per_block = exec.map_indexed(np.div_ceil(ROW_BLOCK), |b| {
        let lo = b * ROW_BLOCK;
        let hi = (lo + ROW_BLOCK).min(np);
        let mut acc = [0.0f64; 4];
        for p in lo..hi {
            let ep = form_at(&c.grid, 2, &e, p);
            let (r1, r2) = calibration::residual_norms(s, &ep, theta).expect("structure matches");
            acc[0] += r1 * r1;
            acc[1] += r2 * r2;
            acc[2] += calibration::calibrated(s, &ep, theta);
            acc[3] += calibration::volume_density(&ep);
        }
        acc
    });
    let mut tot = [0.0f64; 4];
    for a in per_block {
        for i in 0..4 {
            tot[i] += a[i];
        }
    }
    let cell = c.grid.cell();
    let cal = tot[2] * cell;
    let vol = tot[3] * cell;
    Ok(FieldDiagnostics {
        res_1: (tot[0] * cell).sqrt(),
        res_2: (tot[1] * cell).sqrt(),
        calibrated_integral: cal,
        volume: vol,
        slack: vol - cal.abs(),
    })
}

/// Explicit Euler for ∂a/∂t = H (optionally minus d((det G₀)^{1/4} δ(a − a₀))).
pub fn run_flow(c0: &ConnectionField, cfg: &FlowConfig) -> Result<FlowOutcome> {
    let exec = cfg.exec;
    let grid = &c0.grid;
    let dt = match cfg.dt {
        Dt::Auto(c) if c > 0.0 => c * grid.min_spacing().powi(2),
        Dt::Fixed(x) if x > 0.0 => x,
        _ => return invalid("time step must be positive"),
    };
    let n = grid.n();
    let np = grid.points();
    let mut field = c0.clone();

    // Frozen DeTurck weight (det G₀)^{1/4} from the initial connection.
    let rho0 = if cfg.deturck {
        let e = curvature(c0, exec);
        let m = binomial(n, 2);
        let e_ro = &e;
        Some(exec.map_indexed(np, move |p| {
            let mut ev = [0.0f64; 28];
            for q in 0..m {
                ev[q] = e_ro[q * np + p];
            }
            rho(n, &ev[..m])
        }))
    } else {
        None
    };
    let mut eta = rho0.as_ref().map(|_| vec![0.0; np]);

    let mut trace = FlowTrace::default();
    let record = |field: &ConnectionField, t: f64, v: f64, h: &[f64], step: usize| -> Result<TraceRow> {
        let (mut r1, mut r2, mut slack) = (f64::NAN, f64::NAN, f64::NAN);
        if cfg.record_every > 0 && step % cfg.record_every == 0 && field.structure.is_some() {
            let dg = diagnostics(field, cfg.theta, exec)?;
            r1 = dg.res_1;
            r2 = dg.res_2;
            slack = dg.slack;
        }
        Ok(TraceRow {
            t,
            v,
            h_l2: grid.l2_norm(h),
            res_1: r1,
            res_2: r2,
            slack,
            dt,
        })
    };

    let mut t = 0.0;
    for step in 0..=cfg.steps {
        let (v, h) = volume_and_mean_curvature(&field, exec);
        if !v.is_finite() || h.iter().any(|x| !x.is_finite()) {
            return Err(Error::FlowDiverged {
                step,
                t,
                trace: Box::new(trace),
            });
        }
        trace.rows.push(record(&field, t, v, &h, step)?);
        if step == cfg.steps {
            break;
        }
        let mut update = h;
        if let (Some(rho0), Some(eta)) = (&rho0, eta.as_mut()) {
            let rel: Vec<f64> = field
                .potential
                .iter()
                .zip(&c0.potential)
                .map(|(a, b)| a - b)
                .collect();
            let mut s = delta(grid, 1, &rel, exec)?;
            for (x, r) in s.iter_mut().zip(rho0) {
                *x *= r;
            }
            let ds = d(grid, 0, &s, exec)?;
            for (u, g) in update.iter_mut().zip(&ds) {
                *u -= g;
            }
            for (e, x) in eta.iter_mut().zip(&s) {
                *e -= dt * x;
            }
        }
        for (a, u) in field.potential.iter_mut().zip(&update) {
            *a += dt * u;
        }
        t += dt;
    }
    Ok(FlowOutcome {
        field,
        trace,
        gauge: eta,
    })
}

/// Manifest of a CFLD field file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfldManifest {
    pub format: String,
    pub n: usize,
    pub shape: Vec<usize>,
    pub structure_kind: Option<StructureKind>,
    pub background_coeffs: Vec<f64>,
    pub payload_bytes: usize,
    pub layout: String,
}

const CFLD_LAYOUT: &str = "component-major f64 little-endian, grid row-major (last axis fastest)";

/// Writes the JSON manifest, a newline, then the raw potential.
pub fn write_cfld<W: Write>(c: &ConnectionField, mut w: W) -> Result<()> {
    let man = CfldManifest {
        format: "CFLD".into(),
        n: c.n(),
        shape: c.grid.shape().to_vec(),
        structure_kind: c.structure,
        background_coeffs: c.background.coeffs().to_vec(),
        payload_bytes: c.potential.len() * 8,
        layout: CFLD_LAYOUT.into(),
    };
    serde_json::to_writer(&mut w, &man)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(c.potential.len() * 8);
    for x in &c.potential {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_cfld<R: Read>(r: R) -> Result<ConnectionField> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let man: CfldManifest = serde_json::from_slice(&line)?;
    if man.format != "CFLD" || man.shape.len() != man.n {
        return invalid("not a CFLD manifest");
    }
    let grid = TorusGrid::new(&man.shape)?;
    let want = grid.n() * grid.points() * 8;
    if man.payload_bytes != want {
        return invalid(format!(
            "manifest declares {} payload bytes, grid needs {want}",
            man.payload_bytes
        ));
    }
    let mut buf = vec![0u8; want];
    r.read_exact(&mut buf)?;
    let pot = buf
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let bg = KForm::from_coeffs(man.n, 2, man.background_coeffs)?;
    ConnectionField::new(grid, pot, bg, man.structure_kind)
}

pub fn save_cfld(c: &ConnectionField, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_cfld(c, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_cfld(path: &Path) -> Result<ConnectionField> {
    read_cfld(std::fs::File::open(path)?)
}

/// Structure of the right dimension for a field, if any.
pub fn structure_for(c: &ConnectionField) -> Option<crate::holonomy::HolonomyStructure> {
    c.structure.map(make_structure)
}
