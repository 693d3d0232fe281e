use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _};
use serde::Serialize;

use mvlab_core::identity::{self, Context, ResidualReport, SuiteConfig};
use mvlab_core::special::{self, SpecialKind};
use mvlab_core::torus::{self, ConnectionField, Dt, FlowConfig, TorusGrid};
use mvlab_core::{make_structure, Error, Exec, KForm, StructureKind};

use crate::config::RunConfig;
use crate::json;
use crate::Status;

/// Common wrapper of every JSON report.
#[derive(Serialize)]
pub struct Envelope<'a, T> {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: &'a RunConfig,
    pub result: T,
}

pub fn write_report<T: Serialize>(cfg: &RunConfig, result: T) -> anyhow::Result<()> {
    let env = Envelope {
        tool: "mvlab",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        result,
    };
    json::emit(&env, cfg.out.as_deref())
}

fn structure_kind(cfg: &RunConfig) -> anyhow::Result<StructureKind> {
    let s = cfg.structure.as_deref().ok_or_else(|| anyhow!("--structure is required"))?;
    Ok(s.parse()?)
}

pub fn verify(mut cfg: RunConfig) -> anyhow::Result<Status> {
    let name = cfg.context.clone().ok_or_else(|| anyhow!("--context is required"))?;
    let context = Context::parse(&name)?;
    let samples = *cfg.samples.get_or_insert(10_000);
    let seed = *cfg.seed.get_or_insert(0);
    let range = *cfg.range.get_or_insert(2.0);
    let tolerance = *cfg.tolerance.get_or_insert(identity::DEFAULT_TOL);
    if samples == 0 {
        bail!("--samples must be at least 1");
    }
    let mut suite = SuiteConfig::new(context, samples, seed, range);
    suite.tolerance = tolerance;
    let reports = identity::random_suite(&suite)?;
    let pass = reports.iter().all(|r| r.pass);

    #[derive(Serialize)]
    struct Out {
        context: String,
        pass: bool,
        reports: Vec<ResidualReport>,
    }
    write_report(
        &cfg,
        Out {
            context: name,
            pass,
            reports,
        },
    )?;
    Ok(if pass { Status::Pass } else { Status::Fail })
}

#[derive(Serialize)]
struct Component {
    label: String,
    coeffs: Vec<f64>,
    norm: f64,
}

pub fn project(mut cfg: RunConfig) -> anyhow::Result<Status> {
    let kind = structure_kind(&cfg)?;
    let s = make_structure(kind);
    let degree = *cfg.degree.get_or_insert(2);
    let n = kind.dim();
    let form = match &cfg.coeffs {
        Some(c) => KForm::from_coeffs(n, degree, c.clone())?,
        None => {
            let seed = *cfg.seed.get_or_insert(0);
            identity::random_form(&mut identity::sample_rng(seed, 0), n, degree, 1.0)
        }
    };
    let components: Vec<Component> = match &cfg.label {
        Some(label) => {
            let p = s.project(label, &form)?;
            vec![Component {
                label: label.clone(),
                norm: p.norm(),
                coeffs: p.into_coeffs(),
            }]
        }
        None => s
            .bundle(degree)?
            .split(&form)?
            .into_iter()
            .map(|(label, p)| Component {
                label,
                norm: p.norm(),
                coeffs: p.into_coeffs(),
            })
            .collect(),
    };
    let mut sum = KForm::zeros(n, degree);
    for c in &components {
        sum += &KForm::from_coeffs(n, degree, c.coeffs.clone())?;
    }

    #[derive(Serialize)]
    struct Out {
        structure: String,
        degree: usize,
        input: Vec<f64>,
        components: Vec<Component>,
        reconstruction_error: Option<f64>,
    }
    let whole = cfg.label.is_none();
    write_report(
        &cfg,
        Out {
            structure: kind.to_string(),
            degree,
            reconstruction_error: whole.then(|| sum.max_abs_diff(&form)),
            input: form.into_coeffs(),
            components,
        },
    )?;
    Ok(Status::Pass)
}

pub fn structure_dump(cfg: RunConfig) -> anyhow::Result<Status> {
    let kind = structure_kind(&cfg)?;
    let s = make_structure(kind);

    #[derive(Serialize)]
    struct Out {
        structure: String,
        dim: usize,
        forms: BTreeMap<String, KForm>,
        projector_labels: Vec<String>,
        ranks: BTreeMap<String, Vec<(String, usize)>>,
    }
    let forms = s
        .named_forms()
        .into_iter()
        .map(|(name, f)| (name.to_string(), f.clone()))
        .collect();
    let ranks = (1..=kind.dim() / 2)
        .filter_map(|k| s.bundle(k).ok().map(|b| (format!("degree_{k}"), b.ranks())))
        .collect();
    write_report(
        &cfg,
        Out {
            structure: kind.to_string(),
            dim: kind.dim(),
            forms,
            projector_labels: s.projector_labels(),
            ranks,
        },
    )?;
    Ok(Status::Pass)
}

fn load(path: &Path) -> anyhow::Result<ConnectionField> {
    torus::load_cfld(path).with_context(|| format!("reading field {}", path.display()))
}

fn generated_field(cfg: &mut RunConfig) -> anyhow::Result<ConnectionField> {
    let sname = cfg.structure.get_or_insert_with(|| "g2".into()).clone();
    let structure = match sname.as_str() {
        "none" => None,
        other => Some(other.parse::<StructureKind>()?),
    };
    let shape = match (&cfg.shape, structure) {
        (Some(s), _) => s.clone(),
        (None, Some(k)) => vec![8; k.dim()],
        (None, None) => bail!("--shape is required without a structure"),
    };
    cfg.shape = Some(shape.clone());
    let grid = TorusGrid::new(&shape)?;
    let n = grid.n();
    let amplitude = *cfg.amplitude.get_or_insert(0.01);
    let seed = *cfg.seed.get_or_insert(0);
    let background = match &cfg.background {
        Some(c) => KForm::from_coeffs(n, 2, c.clone())?,
        None => KForm::zeros(n, 2),
    };
    let pot = torus::random_potential(&grid, amplitude, seed);
    Ok(ConnectionField::new(grid, pot, background, structure)?)
}

pub fn flow(mut cfg: RunConfig) -> anyhow::Result<Status> {
    let field = match cfg.input.clone() {
        Some(p) => load(&p)?,
        None => generated_field(&mut cfg)?,
    };
    let steps = *cfg.steps.get_or_insert(100);
    let dt = match cfg.dt {
        Some(x) => Dt::Fixed(x),
        None => Dt::Auto(*cfg.dt_factor.get_or_insert(0.1)),
    };
    let flow_cfg = FlowConfig {
        dt,
        steps,
        deturck: *cfg.deturck.get_or_insert(false),
        record_every: *cfg.record_every.get_or_insert(10),
        theta: *cfg.theta.get_or_insert(0.0),
        exec: Exec::Parallel,
    };
    let trace_path = cfg.trace.get_or_insert_with(|| PathBuf::from("trace.csv")).clone();
    let snap_path = cfg.snapshot.get_or_insert_with(|| PathBuf::from("final.cfld")).clone();
    let su = field
        .structure
        .filter(|k| k.is_su())
        .map(|_| special::max_20_part(&field, Exec::Parallel))
        .transpose()?;

    #[derive(Serialize)]
    struct Out {
        diverged: bool,
        steps_completed: usize,
        dt: f64,
        initial_volume: f64,
        final_volume: f64,
        monotonicity_violations: usize,
        final_diagnostics: Option<torus::FieldDiagnostics>,
        initial_20_part: Option<f64>,
        final_20_part: Option<f64>,
        trace: PathBuf,
        snapshot: Option<PathBuf>,
    }

    match torus::run_flow(&field, &flow_cfg) {
        Ok(out) => {
            write_trace(&out.trace, &trace_path)?;
            torus::save_cfld(&out.field, &snap_path)?;
            let rows = &out.trace.rows;
            let diag = match out.field.structure {
                Some(_) => Some(torus::diagnostics(&out.field, flow_cfg.theta, Exec::Parallel)?),
                None => None,
            };
            let fin20 = su
                .map(|_| special::max_20_part(&out.field, Exec::Parallel))
                .transpose()?;
            write_report(
                &cfg,
                Out {
                    diverged: false,
                    steps_completed: rows.len() - 1,
                    dt: rows[0].dt,
                    initial_volume: rows[0].v,
                    final_volume: rows[rows.len() - 1].v,
                    monotonicity_violations: out.trace.monotonicity_violations(1e-12),
                    final_diagnostics: diag,
                    initial_20_part: su,
                    final_20_part: fin20,
                    trace: trace_path,
                    snapshot: Some(snap_path),
                },
            )?;
            Ok(Status::Pass)
        }
        Err(Error::FlowDiverged { step, trace, .. }) => {
            write_trace(&trace, &trace_path)?;
            let rows = &trace.rows;
            let v = |i: usize| rows.get(i).map_or(f64::NAN, |r| r.v);
            write_report(
                &cfg,
                Out {
                    diverged: true,
                    steps_completed: step.saturating_sub(1),
                    dt: rows.first().map_or(f64::NAN, |r| r.dt),
                    initial_volume: v(0),
                    final_volume: v(rows.len().saturating_sub(1)),
                    monotonicity_violations: trace.monotonicity_violations(1e-12),
                    final_diagnostics: None,
                    initial_20_part: su,
                    final_20_part: None,
                    trace: trace_path,
                    snapshot: None,
                },
            )?;
            eprintln!("flow diverged at step {step}");
            Ok(Status::Diverged)
        }
        Err(e) => Err(e.into()),
    }
}

fn write_trace(trace: &torus::FlowTrace, path: &Path) -> anyhow::Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    trace.write_csv(std::io::BufWriter::new(f))?;
    Ok(())
}

fn special_kind(name: &str, nc: usize, theta: f64) -> anyhow::Result<SpecialKind> {
    Ok(match name {
        "spin7" => SpecialKind::Spin7,
        "g2" => SpecialKind::G2,
        "dhym" => SpecialKind::Dhym { nc, theta },
        other => bail!("unknown kind '{other}' (spin7 | g2 | dhym)"),
    })
}

pub fn residuals(mut cfg: RunConfig) -> anyhow::Result<Status> {
    let path = cfg.input.clone().ok_or_else(|| anyhow!("--input is required"))?;
    let field = load(&path)?;
    let theta = *cfg.theta.get_or_insert(0.0);
    let tol = *cfg.tolerance.get_or_insert(1e-10);
    let kind = match &cfg.kind {
        Some(k) => special_kind(k, field.n() / 2, theta)?,
        None => SpecialKind::for_structure(
            field
                .structure
                .ok_or_else(|| anyhow!("field has no structure; pass --kind"))?,
            theta,
        ),
    };
    let res = special::ddt_residual(&field, kind, tol, Exec::Parallel)?;
    let energy = special::energy_bound_report(&field, kind, Exec::Parallel)?;
    let angle = match kind {
        SpecialKind::Dhym { .. } if field.structure.is_some_and(|k| k.is_su()) => {
            let a = special::angle_function(&field, Exec::Parallel)?;
            Some(BTreeMap::from([
                ("min_r", a.r.iter().copied().fold(f64::INFINITY, f64::min)),
                ("min_theta", a.theta.iter().copied().fold(f64::INFINITY, f64::min)),
                ("max_theta", a.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            ]))
        }
        _ => None,
    };

    #[derive(Serialize)]
    struct Out {
        residual: special::DdtResidual,
        energy: special::EnergyBound,
        angle: Option<BTreeMap<&'static str, f64>>,
    }
    write_report(
        &cfg,
        Out {
            residual: res,
            energy,
            angle,
        },
    )?;
    Ok(Status::Pass)
}

pub fn dazord_check(mut cfg: RunConfig) -> anyhow::Result<Status> {
    let field = match cfg.input.clone() {
        Some(p) => load(&p)?,
        None => {
            let size = *cfg.size.get_or_insert(16);
            let amp = *cfg.amplitude.get_or_insert(0.5);
            special::analytic_kahler_field(size, amp, Exec::Parallel)?
        }
    };
    let cmp = special::dazord_compare(&field, Exec::Parallel)?;

    #[derive(Serialize)]
    struct Out {
        shape: Vec<usize>,
        lhs_l2: f64,
        rhs_l2: f64,
        diff_l2: f64,
        rel_error: f64,
    }
    write_report(
        &cfg,
        Out {
            shape: field.grid.shape().to_vec(),
            lhs_l2: cmp.lhs_l2,
            rhs_l2: cmp.rhs_l2,
            diff_l2: cmp.diff_l2,
            rel_error: cmp.rel_error,
        },
    )?;
    Ok(Status::Pass)
}

pub fn newton_constant(mut cfg: RunConfig) -> anyhow::Result<Status> {
    let name = cfg.kind.clone().ok_or_else(|| anyhow!("--kind is required"))?;
    let nc = if name == "dhym" { Some(*cfg.nc.get_or_insert(3)) } else { None };
    let theta = *cfg.theta.get_or_insert(0.0);
    let kind = special_kind(&name, nc.unwrap_or(0), theta)?;
    let seed = *cfg.seed.get_or_insert(0);
    let attempts = *cfg.attempts.get_or_insert(10);
    let sol = match special::newton_with_retries(kind, seed, attempts) {
        Ok(s) => s,
        Err(Error::NotFound(msg)) => {
            eprintln!("no solution: {msg}");
            return Ok(Status::Fail);
        }
        Err(e) => return Err(e.into()),
    };
    let s = kind.structure()?;
    let cal = mvlab_core::calibration::calibrated(s, &sol.form, theta);
    let vol = mvlab_core::calibration::volume_density(&sol.form);
    if let Some(shape) = cfg.shape.clone() {
        let path = cfg.snapshot.get_or_insert_with(|| PathBuf::from("constant.cfld")).clone();
        let grid = TorusGrid::new(&shape)?;
        let field = special::constant_field(grid, sol.form.clone(), Some(s.kind()))?;
        torus::save_cfld(&field, &path)?;
    }

    #[derive(Serialize)]
    struct Out {
        solution: special::NewtonSolution,
        calibrated: f64,
        volume_density: f64,
        slack: f64,
    }
    write_report(
        &cfg,
        Out {
            solution: sol,
            calibrated: cal,
            volume_density: vol,
            slack: vol - cal.abs(),
        },
    )?;
    Ok(Status::Pass)
}

pub fn pullback(mut cfg: RunConfig) -> anyhow::Result<Status> {
    let path = cfg.input.clone().ok_or_else(|| anyhow!("--input is required"))?;
    let field = load(&path)?;
    let m = *cfg.circle_points.get_or_insert(4);
    let theta = *cfg.theta.get_or_insert(0.0);
    let out_path = cfg.snapshot.get_or_insert_with(|| PathBuf::from("pullback.cfld")).clone();
    let base_kind = match field.n() {
        7 => SpecialKind::G2,
        6 => SpecialKind::Dhym { nc: 3, theta },
        n => bail!("pullback needs a field on T^6 or T^7, got T^{n}"),
    };
    let up = special::pullback_circle(&field, m)?;
    let up_kind = SpecialKind::for_structure(up.structure.expect("pullback sets a structure"), theta);
    let base = special::ddt_residual(&field, base_kind, 1e-10, Exec::Parallel)?;
    let lifted = special::ddt_residual(&up, up_kind, 1e-9, Exec::Parallel)?;
    torus::save_cfld(&up, &out_path)?;

    #[derive(Serialize)]
    struct Out {
        base: special::DdtResidual,
        pullback: special::DdtResidual,
        output: PathBuf,
    }
    write_report(
        &cfg,
        Out {
            base,
            pullback: lifted,
            output: out_path,
        },
    )?;
    Ok(Status::Pass)
}
