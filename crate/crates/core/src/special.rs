//! dDT and dHYM connections on tori: residual norms, the angle function,
//! the mean curvature / angle comparison, energy bounds, circle pullbacks and
//! a Newton generator for constant solutions.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::forms::{binomial, KForm};
use crate::holonomy::{HolonomyStructure, StructureKind};
use crate::identity::lab;
use crate::torus::{self, big_g, curvature, form_at, ConnectionField, TorusGrid};

const BLOCK: usize = 1024;

/// Which special-connection equation a residual refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SpecialKind {
    Spin7,
    G2,
    /// dHYM with phase θ on a Kähler torus of complex dimension `nc`.
    Dhym { nc: usize, theta: f64 },
}

impl SpecialKind {
    pub fn dim(&self) -> usize {
        match self {
            SpecialKind::Spin7 => 8,
            SpecialKind::G2 => 7,
            SpecialKind::Dhym { nc, .. } => 2 * nc,
        }
    }

    pub fn structure(&self) -> Result<&'static HolonomyStructure> {
        Ok(match self {
            SpecialKind::Spin7 => &lab().spin7,
            SpecialKind::G2 => &lab().g2,
            SpecialKind::Dhym { nc, .. } => lab().su(*nc)?,
        })
    }

    fn theta(&self) -> f64 {
        match self {
            SpecialKind::Dhym { theta, .. } => *theta,
            _ => 0.0,
        }
    }

    /// Default kind for a structure (dHYM at phase `theta` on SU structures).
    pub fn for_structure(kind: StructureKind, theta: f64) -> SpecialKind {
        match kind {
            StructureKind::Spin7 => SpecialKind::Spin7,
            StructureKind::G2 => SpecialKind::G2,
            k => SpecialKind::Dhym {
                nc: k.complex_dim().unwrap_or(0),
                theta,
            },
        }
    }
}

/// Defining tensors of the equation at one point, flattened, with names.
pub fn pointwise_tensors(kind: &SpecialKind, e: &KForm) -> Result<Vec<(&'static str, Vec<f64>)>> {
    let s = kind.structure()?;
    Ok(match kind {
        SpecialKind::Spin7 => {
            let (a, b) = calibration::spin7_tensors(s, e)?;
            vec![("F1", a.into_coeffs()), ("F2", b.into_coeffs())]
        }
        SpecialKind::G2 => vec![("F", calibration::g2_tensor(s, e)?.into_coeffs())],
        SpecialKind::Dhym { theta, .. } => {
            let (a, b) = calibration::dhym_tensors(s, e, *theta)?;
            vec![("F1", a.into_coeffs()), ("F2", vec![b])]
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentNorm {
    pub name: String,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdtResidual {
    pub kind: SpecialKind,
    pub components: Vec<ComponentNorm>,
    pub tolerance: f64,
    pub is_solution: bool,
}

impl DdtResidual {
    pub fn get(&self, name: &str) -> Option<&ComponentNorm> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn max_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.l2.max(c.linf))
            .fold(0.0, f64::max)
    }
}

/// L² and L∞ norms over the grid of each defining tensor.
pub fn ddt_residual(c: &ConnectionField, kind: SpecialKind, tol: f64, exec: Exec) -> Result<DdtResidual> {
    if kind.dim() != c.n() {
        return invalid(format!("{kind:?} needs a {}-torus, field lives on T^{}", kind.dim(), c.n()));
    }
    kind.structure()?;
    let e = curvature(c, exec);
    let np = c.grid.points();
    let names: Vec<&str> = pointwise_tensors(&kind, &KForm::zeros(c.n(), 2))?
        .into_iter()
        .map(|(n, _)| n)
        .collect();
    let parts = exec.map_indexed(np.div_ceil(BLOCK), |b| {
        let mut acc = vec![(0.0f64, 0.0f64); names.len()];
        for p in b * BLOCK..((b + 1) * BLOCK).min(np) {
            let t = pointwise_tensors(&kind, &form_at(&c.grid, 2, &e, p)).expect("checked kind");
            for (slot, (_, v)) in acc.iter_mut().zip(t) {
                let sq: f64 = v.iter().map(|x| x * x).sum();
                slot.0 += sq;
                slot.1 = slot.1.max(sq.sqrt());
            }
        }
        acc
    });
    let mut tot = vec![(0.0f64, 0.0f64); names.len()];
    for part in parts {
        for (t, p) in tot.iter_mut().zip(part) {
            t.0 += p.0;
            t.1 = t.1.max(p.1);
        }
    }
    let components: Vec<ComponentNorm> = names
        .iter()
        .zip(tot)
        .map(|(n, (sq, mx))| ComponentNorm {
            name: n.to_string(),
            l2: (sq * c.grid.cell()).sqrt(),
            linf: mx,
        })
        .collect();
    let is_solution = components.iter().all(|c| c.l2 <= tol && c.linf <= tol);
    Ok(DdtResidual {
        kind,
        components,
        tolerance: tol,
        is_solution,
    })
}

fn su_structure(c: &ConnectionField) -> Result<&'static HolonomyStructure> {
    match c.structure {
        Some(k @ (StructureKind::Su3 | StructureKind::Su4 | StructureKind::Su2)) => {
            lab().su(k.complex_dim().unwrap_or(0))
        }
        _ => invalid("the angle function needs a Kähler (SU) structure on the field"),
    }
}

/// ζ = r e^{iθ} with (ω + iE)^m = ζ ω^m, per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleData {
    pub zeta_re: Vec<f64>,
    pub zeta_im: Vec<f64>,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl AngleData {
    pub fn zeta(&self, p: usize) -> Complex<f64> {
        Complex::new(self.zeta_re[p], self.zeta_im[p])
    }
}

pub fn angle_function(c: &ConnectionField, exec: Exec) -> Result<AngleData> {
    let s = su_structure(c)?;
    let e = curvature(c, exec);
    let zeta = exec.map_indexed(c.grid.points(), |p| calibration::zeta(s, &form_at(&c.grid, 2, &e, p)));
    Ok(AngleData {
        zeta_re: zeta.iter().map(|z| z.re).collect(),
        zeta_im: zeta.iter().map(|z| z.im).collect(),
        r: zeta.iter().map(|z| z.norm()).collect(),
        theta: zeta.iter().map(|z| z.arg()).collect(),
    })
}

/// Central difference of an angle field along `axis`, lifting each
/// neighbour difference into (−π, π].
pub fn angle_derivative(grid: &TorusGrid, theta: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; grid.points()];
    let len = grid.shape()[axis];
    let stride: usize = grid.shape()[axis + 1..].iter().product();
    let scale = 0.5 * len as f64;
    for (p, o) in out.iter_mut().enumerate() {
        let i = (p / stride) % len;
        let base = p - i * stride;
        let up = base + ((i + 1) % len) * stride;
        let dn = base + ((i + len - 1) % len) * stride;
        *o = wrap(theta[up] - theta[dn]) * scale;
    }
    out
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Largest (2,0)+(0,2) component of the curvature over the grid.
pub fn max_20_part(c: &ConnectionField, exec: Exec) -> Result<f64> {
    let s = su_structure(c)?;
    let e = curvature(c, exec);
    let np = c.grid.points();
    let parts = exec.map_indexed(np.div_ceil(BLOCK), |b| {
        (b * BLOCK..((b + 1) * BLOCK).min(np))
            .map(|p| s.pr("[2,0]", &form_at(&c.grid, 2, &e, p)).norm())
            .fold(0.0, f64::max)
    });
    Ok(parts.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DazordComparison {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub lhs_l2: f64,
    pub rhs_l2: f64,
    pub diff_l2: f64,
    pub rel_error: f64,
}

/// Mean curvature against −(det G)^{1/4}(G⁻¹)*(J dθ).
pub fn dazord_compare(c: &ConnectionField, exec: Exec) -> Result<DazordComparison> {
    let s = su_structure(c)?;
    let worst = max_20_part(c, exec)?;
    if worst > 1e-10 {
        return invalid(format!("curvature has a (2,0) part of size {worst:.3e}"));
    }
    let n = c.n();
    let grid = &c.grid;
    let np = grid.points();
    let lhs = torus::mean_curvature(c, exec);
    let angle = angle_function(c, exec)?;
    let dtheta: Vec<Vec<f64>> = (0..n).map(|j| angle_derivative(grid, &angle.theta, j)).collect();
    let e = curvature(c, exec);
    let j = s.j();
    let per_point = exec.map_indexed(np, |p| {
        let geo = big_g(&form_at(grid, 2, &e, p));
        // (J dθ)_i = dθ(J e_i)
        let jd: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| dtheta[k][p] * j.get(k, i)).sum())
            .collect();
        (0..n)
            .map(|i| -geo.rho * (0..n).map(|k| jd[k] * geo.g_inv[k * 8 + i]).sum::<f64>())
            .collect::<Vec<f64>>()
    });
    let mut rhs = vec![0.0; n * np];
    for (p, v) in per_point.into_iter().enumerate() {
        for i in 0..n {
            rhs[i * np + p] = v[i];
        }
    }
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let lhs_l2 = grid.l2_norm(&lhs);
    let diff_l2 = grid.l2_norm(&diff);
    Ok(DazordComparison {
        rhs_l2: grid.l2_norm(&rhs),
        lhs_l2,
        diff_l2,
        rel_error: diff_l2 / lhs_l2.max(1.0),
        lhs,
        rhs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleDerivativeCheck {
    pub points: usize,
    pub max_abs_diff: f64,
}

/// At points where E only has entries on the complex lines e^{2a,2a+1},
/// compares the differenced angle with Σ_a D E_{2a,2a+1} / (1 + E_{2a,2a+1}²).
pub fn angle_derivative_check(c: &ConnectionField, diag_tol: f64, exec: Exec) -> Result<AngleDerivativeCheck> {
    su_structure(c)?;
    let n = c.n();
    let grid = &c.grid;
    let np = grid.points();
    let e = curvature(c, exec);
    let angle = angle_function(c, exec)?;
    let table = crate::forms::MultiIndexTable::get(n, 2);
    let diag: Vec<usize> = (0..n / 2)
        .map(|a| table.position(&[2 * a, 2 * a + 1]).unwrap())
        .collect();
    let mut derivs = Vec::new();
    for &q in &diag {
        let comp = &e[q * np..(q + 1) * np];
        let per_axis: Vec<Vec<f64>> = (0..n)
            .map(|ax| {
                let mut out = vec![0.0; np];
                grid.diff_acc(comp, &mut out, ax, 1.0, exec);
                out
            })
            .collect();
        derivs.push(per_axis);
    }
    let dtheta: Vec<Vec<f64>> = (0..n).map(|ax| angle_derivative(grid, &angle.theta, ax)).collect();
    let mut points = 0;
    let mut worst: f64 = 0.0;
    for p in 0..np {
        let off: f64 = (0..table.len())
            .filter(|q| !diag.contains(q))
            .map(|q| e[q * np + p].abs())
            .fold(0.0, f64::max);
        if off > diag_tol {
            continue;
        }
        points += 1;
        for ax in 0..n {
            let want: f64 = diag
                .iter()
                .enumerate()
                .map(|(a, &q)| {
                    let l = e[q * np + p];
                    derivs[a][ax][p] / (1.0 + l * l)
                })
                .sum();
            let got = dtheta[ax][p];
            worst = worst.max((got - want).abs());
        }
    }
    Ok(AngleDerivativeCheck {
        points,
        max_abs_diff: worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBound {
    pub calibrated_integral: f64,
    pub volume: f64,
    pub slack: f64,
    /// min over the grid of |calibrated integrand|.
    pub min_abs_integrand: f64,
}

/// Volume against the integral of the calibrated integrand of `kind`.
pub fn energy_bound_report(c: &ConnectionField, kind: SpecialKind, exec: Exec) -> Result<EnergyBound> {
    if kind.dim() != c.n() {
        return invalid(format!("{kind:?} needs a {}-torus", kind.dim()));
    }
    let s = kind.structure()?;
    let theta = kind.theta();
    let e = curvature(c, exec);
    let np = c.grid.points();
    let parts = exec.map_indexed(np.div_ceil(BLOCK), |b| {
        let mut acc = (0.0, 0.0, f64::INFINITY);
        for p in b * BLOCK..((b + 1) * BLOCK).min(np) {
            let ep = form_at(&c.grid, 2, &e, p);
            let cal = calibration::calibrated(s, &ep, theta);
            acc.0 += cal;
            acc.1 += calibration::volume_density(&ep);
            acc.2 = f64::min(acc.2, cal.abs());
        }
        acc
    });
    let (mut cal, mut vol, mut min_abs) = (0.0, 0.0, f64::INFINITY);
    for (a, b, m) in parts {
        cal += a;
        vol += b;
        min_abs = min_abs.min(m);
    }
    let cell = c.grid.cell();
    let (cal, vol) = (cal * cell, vol * cell);
    Ok(EnergyBound {
        calibrated_integral: cal,
        volume: vol,
        slack: vol - cal.abs(),
        min_abs_integrand: min_abs,
    })
}

/// Pulls a connection on T^n back to T^{n+1} = S¹ × T^n; the circle is the
/// new axis 0 with `circle_points` samples. G2 fields become Spin7 fields and
/// SU3 fields become G2 fields.
pub fn pullback_circle(c: &ConnectionField, circle_points: usize) -> Result<ConnectionField> {
    let n = c.n();
    let structure = match (n, c.structure) {
        (7, Some(StructureKind::G2) | None) => StructureKind::Spin7,
        (6, Some(StructureKind::Su3) | None) => StructureKind::G2,
        _ => return invalid(format!("pullback is defined from T^7 (G2) or T^6 (SU3), got T^{n}")),
    };
    let mut shape = vec![circle_points];
    shape.extend_from_slice(c.grid.shape());
    let grid = TorusGrid::new(&shape)?;
    let np = c.grid.points();
    let mut pot = vec![0.0; (n + 1) * grid.points()];
    for comp in 0..n {
        let src = &c.potential[comp * np..(comp + 1) * np];
        let dst = &mut pot[(comp + 1) * grid.points()..(comp + 2) * grid.points()];
        for chunk in dst.chunks_mut(np) {
            chunk.copy_from_slice(src);
        }
    }
    let bg = c.background.embed(n + 1, 1)?;
    ConnectionField::new(grid, pot, bg, Some(structure))
}

/// Constant solution produced by [`newton_constant_ddt`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonSolution {
    pub kind: SpecialKind,
    pub seed: u64,
    pub form: KForm,
    pub residual: f64,
    pub iterations: usize,
}

pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_FD_STEP: f64 = 1e-7;
pub const NEWTON_ACCEPT: f64 = 1e-12;
pub const NEWTON_START_RADIUS: f64 = 0.5;

struct NewtonSystem {
    kind: SpecialKind,
    /// Orthonormal basis of the admissible 2-forms (columns).
    basis: DMatrix<f64>,
}

impl NewtonSystem {
    fn new(kind: SpecialKind) -> Result<NewtonSystem> {
        let n = kind.dim();
        let m = binomial(n, 2);
        let basis = match kind {
            SpecialKind::Dhym { .. } => {
                // Columns spanning the range of the [1,1] projector.
                let p = kind.structure()?.projector("[1,1]")?.clone();
                let eig = p.symmetric_eigen();
                let cols: Vec<DVector<f64>> = (0..m)
                    .filter(|&i| eig.eigenvalues[i] > 0.5)
                    .map(|i| eig.eigenvectors.column(i).into_owned())
                    .collect();
                DMatrix::from_columns(&cols)
            }
            _ => DMatrix::identity(m, m),
        };
        Ok(NewtonSystem { kind, basis })
    }

    fn form(&self, x: &DVector<f64>) -> KForm {
        let c = &self.basis * x;
        KForm::from_coeffs(self.kind.dim(), 2, c.iter().copied().collect()).expect("finite")
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = pointwise_tensors(&self.kind, &self.form(x)).expect("kind is valid");
        DVector::from_iterator(
            t.iter().map(|(_, v)| v.len()).sum(),
            t.into_iter().flat_map(|(_, v)| v),
        )
    }
}

/// Newton iteration with min-norm steps from a random start for a constant
/// 2-form solving the equation of `kind`.
pub fn newton_constant_ddt(kind: SpecialKind, seed: u64) -> Result<NewtonSolution> {
    let sys = NewtonSystem::new(kind)?;
    let dim = sys.basis.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Uniform in the ball: random direction, radius ∝ u^{1/dim}.
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let radius = NEWTON_START_RADIUS * rng.random::<f64>().powf(1.0 / dim as f64);
    let mut x = DVector::from_iterator(dim, dir.iter().map(|d| d / len * radius));
    let mut r = sys.residual(&x);
    let mut norm = r.norm();
    for it in 0..=NEWTON_MAX_ITER {
        if norm < NEWTON_ACCEPT {
            return Ok(NewtonSolution {
                kind,
                seed,
                form: sys.form(&x),
                residual: norm,
                iterations: it,
            });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), dim);
        for k in 0..dim {
            let mut xp = x.clone();
            xp[k] += NEWTON_FD_STEP;
            let col = (sys.residual(&xp) - &r) / NEWTON_FD_STEP;
            jac.set_column(k, &col);
        }
        let svd = jac.svd(true, true);
        let cutoff = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let step = svd
            .solve(&r, cutoff)
            .map_err(|e| Error::NotFound(format!("pseudo-inverse failed: {e}")))?;
        let mut scale = 1.0;
        loop {
            let xn = &x - &step * scale;
            let rn = sys.residual(&xn);
            let nn = rn.norm();
            if nn < norm || scale < 1e-6 {
                x = xn;
                r = rn;
                norm = nn;
                break;
            }
            scale *= 0.5;
        }
        if !norm.is_finite() {
            break;
        }
    }
    Err(Error::NotFound(format!(
        "{kind:?} Newton from seed {seed} stopped at residual {norm:.3e}"
    )))
}

/// Tries seeds `seed, seed + 1, ...` and keeps the first nonzero solution.
pub fn newton_with_retries(kind: SpecialKind, seed: u64, attempts: usize) -> Result<NewtonSolution> {
    let mut last = None;
    for s in seed..seed + attempts as u64 {
        match newton_constant_ddt(kind, s) {
            Ok(sol) if sol.form.norm() > 1e-6 => return Ok(sol),
            Ok(_) => {}
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::NotFound(format!("no nonzero solution in {attempts} attempts"))))
}

/// a = −J*df, so that d a = dd^c f is of type (1,1) exactly on the grid:
/// a_{2k} = −D_{2k+1} f and a_{2k+1} = D_{2k} f.
pub fn ddc_potential(grid: &TorusGrid, f: &[f64], exec: Exec) -> Result<Vec<f64>> {
    if grid.n() % 2 != 0 {
        return invalid("dd^c needs an even-dimensional torus");
    }
    let np = grid.points();
    let df = torus::d(grid, 0, f, exec)?;
    let mut a = vec![0.0; grid.n() * np];
    for k in 0..grid.n() / 2 {
        let (x, y) = (2 * k, 2 * k + 1);
        for p in 0..np {
            a[x * np + p] = -df[y * np + p];
            a[y * np + p] = df[x * np + p];
        }
    }
    Ok(a)
}

/// Smooth SU(3) test connection on the grid (N, N, N, 4, 4, 4): constant
/// (1,1) background plus dd^c of a trigonometric potential in x0, x1, x2.
pub fn analytic_kahler_field(size: usize, amplitude: f64, exec: Exec) -> Result<ConnectionField> {
    let grid = TorusGrid::new(&[size, size, size, 4, 4, 4])?;
    let t = 2.0 * PI;
    let f = grid.sample(
        |x| {
            amplitude
                * ((t * (x[0] + x[1])).sin()
                    + 0.5 * (t * (x[1] - x[2])).cos()
                    + 0.3 * (t * x[2]).sin() * (t * x[0]).cos())
                / (t * t)
        },
        exec,
    );
    let a = ddc_potential(&grid, &f, exec)?;
    let bg = KForm::from_terms(
        6,
        &[
            (&[0, 1], 0.3),
            (&[2, 3], -0.2),
            (&[4, 5], 0.5),
            (&[0, 2], 0.1),
            (&[1, 3], 0.1),
        ],
    )?;
    ConnectionField::new(grid, a, bg, Some(StructureKind::Su3))
}

/// A constant-curvature field on `grid` with background `form` and a = 0.
pub fn constant_field(grid: TorusGrid, form: KForm, structure: Option<StructureKind>) -> Result<ConnectionField> {
    ConnectionField::flat(grid, form, structure)
}
