//! Computations shared by the subcommands and the pipeline runner.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use codazzi::blaschke::{parse_eps_grid, volume_expansion};
use codazzi::gjms::Gjms;
use codazzi::hypersurface::{boundary_geometry, identity_residuals, surface_obstruction_check};
use codazzi::io::{save_density, write_csv, write_json, StoredDensity, SCHEMA_VERSION};
use codazzi::ma_solver::{solve_fefferman, strictify, StrictDensity};
use codazzi::qcurvature::{q_curvature, q_from_log_extension, LogScale};
use codazzi::variation::{
    first_variation_check, obstruction_variation, second_variation_check, DeformationFlow,
    Generator,
};
use codazzi::{Harmonic, SurfaceSpec};

/// A file produced by a task, written only once the task has succeeded.
pub enum Artifact {
    Json {
        name: String,
        value: Value,
    },
    Csv {
        name: String,
        header: Vec<String>,
        rows: Vec<Vec<f64>>,
        footer: Value,
    },
    Density {
        name: String,
        density: Box<StoredDensity>,
    },
}

impl Artifact {
    pub fn name(&self) -> &str {
        match self {
            Artifact::Json { name, .. }
            | Artifact::Csv { name, .. }
            | Artifact::Density { name, .. } => name,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.name());
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        match self {
            Artifact::Json { value, .. } => write_json(&path, value)?,
            Artifact::Csv {
                header,
                rows,
                footer,
                ..
            } => {
                let h: Vec<&str> = header.iter().map(String::as_str).collect();
                write_csv(&path, &h, rows, Some(footer))?
            }
            Artifact::Density { density, .. } => save_density(&path, density)?,
        }
        Ok(path)
    }
}

#[derive(Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<Artifact>,
    pub density: Option<StoredDensity>,
}

impl Outcome {
    fn metric(&mut self, k: &str, v: f64) {
        self.metrics.insert(k.to_string(), v);
    }
}

/// Densities produced by earlier pipeline tasks, keyed by task name.
#[derive(Default)]
pub struct Context {
    pub densities: BTreeMap<String, StoredDensity>,
    pub base_dir: PathBuf,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Where a task takes its density from: an earlier `solve` task or a file.
#[derive(Debug, Clone)]
pub struct DensitySource {
    pub density: Option<String>,
    pub density_file: Option<PathBuf>,
}

impl DensitySource {
    fn check(&self) -> Result<()> {
        match (&self.density, &self.density_file) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => bail!("exactly one of `density` and `density_file` must be given"),
        }
    }

    fn load(&self, ctx: &Context) -> Result<StoredDensity> {
        if let Some(name) = &self.density {
            return ctx
                .densities
                .get(name)
                .cloned()
                .ok_or_else(|| anyhow!("no density produced by task `{name}`"));
        }
        let path = ctx.resolve(self.density_file.as_ref().expect("checked"));
        codazzi::io::load_density(&path)
            .with_context(|| format!("reading density {}", path.display()))
    }
}

/// A surface given inline or by file.
#[derive(Debug, Clone)]
pub struct SpecSource {
    pub spec: Option<SurfaceSpec>,
    pub spec_file: Option<PathBuf>,
}

impl SpecSource {
    fn check(&self) -> Result<()> {
        if let Some(s) = &self.spec {
            s.validate()?;
        }
        match (&self.spec, &self.spec_file) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => bail!("exactly one of `spec` and `spec_file` must be given"),
        }
    }

    fn load(&self, ctx: &Context) -> Result<SurfaceSpec> {
        if let Some(s) = &self.spec {
            return Ok(s.clone());
        }
        let path = ctx.resolve(self.spec_file.as_ref().expect("checked"));
        SurfaceSpec::load(&path).with_context(|| format!("reading spec {}", path.display()))
    }
}

fn strict_of(d: &StoredDensity) -> Result<StrictDensity> {
    if d.strict {
        Ok(StrictDensity::from_strict(d.density.clone())?)
    } else {
        Ok(strictify(&d.density)?)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn harmonic_values(d: &StoredDensity, hs: &[Harmonic]) -> Result<Vec<f64>> {
    let grid = d.density.collar().grid();
    let mut out = vec![0.0; grid.len()];
    for h in hs {
        if h.l > grid.lmax() || h.m.unsigned_abs() as usize > h.l || !h.coeff.is_finite() {
            bail!(
                "harmonic ({}, {}) is not available at lmax {}",
                h.l,
                h.m,
                grid.lmax()
            );
        }
        for (o, y) in out.iter_mut().zip(grid.harmonic(h.l, h.m)) {
            *o += h.coeff * y;
        }
    }
    Ok(out)
}

fn nodes_json(d: &StoredDensity) -> Value {
    json!(d.density.collar().directions())
}

fn check_harmonics(hs: &[Harmonic]) -> Result<()> {
    for h in hs {
        if h.m.unsigned_abs() as usize > h.l || !h.coeff.is_finite() {
            bail!("invalid harmonic ({}, {})", h.l, h.m);
        }
    }
    Ok(())
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    #[serde(default)]
    pub spec: Option<SurfaceSpec>,
    #[serde(default)]
    pub spec_file: Option<PathBuf>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_order() -> usize {
    2
}

pub fn solve(p: &SolveParams, ctx: &Context) -> Result<Outcome> {
    let spec = p.source().load(ctx)?;
    let fd = solve_fefferman(&spec, p.order)?;
    let mut out = Outcome::default();
    let controlled = fd.residual_profile[..p.order]
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    out.metric("residual", controlled);
    out.metric("sweeps", fd.sweeps as f64);
    let (fd, check) = if p.strict {
        let sd = strictify(&fd)?;
        (sd.density, sd.lap_obstruction_after)
    } else {
        (fd, f64::NAN)
    };
    if p.strict {
        out.metric("strict_residual", check);
    }
    out.metric("obstruction_max", sup(fd.obstruction_boundary()));
    let stored = StoredDensity {
        spec,
        order: p.order,
        strict: p.strict,
        density: fd,
    };
    if let Some(name) = &p.output {
        out.artifacts.push(Artifact::Density {
            name: name.clone(),
            density: Box::new(stored.clone()),
        });
    }
    out.density = Some(stored);
    Ok(out)
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct BoundaryParams {
    #[serde(default)]
    pub density: Option<String>,
    #[serde(default)]
    pub density_file: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<String>,
}

pub fn boundary(p: &BoundaryParams, ctx: &Context) -> Result<Outcome> {
    let d = p.source().load(ctx)?;
    let bg = boundary_geometry(&d.density.rho, None)?;
    let ir = identity_residuals(&bg);
    let a2 = bg.a_norm2();
    let trs = bg.trace_s();
    let o = d.density.obstruction_boundary();
    let (int_o, int_da) = surface_obstruction_check(&bg, o)?;
    let area = bg.integrate(&vec![1.0; a2.len()]);
    let mut out = Outcome::default();
    out.metric("pab", ir.pab);
    out.metric("r_m", ir.r_m);
    out.metric("area", area);
    out.metric("a_norm2_max", sup(&a2));
    out.metric("obstruction_max", sup(o));
    out.metric("obstruction_integral", int_o);
    out.metric("obstruction_identity", (int_o - int_da).abs());
    if let Some(name) = &p.report {
        let header = [
            "x",
            "y",
            "z",
            "h_xx",
            "h_xy",
            "h_xz",
            "h_yy",
            "h_yz",
            "h_zz",
            "a_norm2",
            "tr_s",
            "r",
            "obstruction",
        ];
        let rows = (0..a2.len())
            .map(|i| {
                let u = d.density.collar().directions()[i];
                let h = bg.h.at(i);
                vec![
                    u[0], u[1], u[2], h[0], h[1], h[2], h[4], h[5], h[8], a2[i], trs[i], bg.r[i],
                    o[i],
                ]
            })
            .collect();
        let footer = json!({
            "schema_version": SCHEMA_VERSION,
            "area": area,
            "integral_a_norm2": bg.integrate(&a2),
            "integral_tr_s": bg.integrate(&trs),
            "integral_r": bg.integrate(&bg.r),
            "integral_obstruction": int_o,
            "minus_half_integral_div_a_squared": int_da,
            "pab_residual": ir.pab,
            "r_m_residual": ir.r_m,
        });
        out.artifacts.push(Artifact::Csv {
            name: name.clone(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
            footer,
        });
    }
    Ok(out)
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct GjmsParams {
    #[serde(default)]
    pub density: Option<String>,
    #[serde(default)]
    pub density_file: Option<PathBuf>,
    pub m: usize,
    pub harmonics: Vec<Harmonic>,
    #[serde(default)]
    pub output: Option<String>,
}

pub fn gjms(p: &GjmsParams, ctx: &Context) -> Result<Outcome> {
    let d = p.source().load(ctx)?;
    let f = harmonic_values(&d, &p.harmonics)?;
    let op = if p.m == 3 {
        Gjms::strict(&strict_of(&d)?)?
    } else {
        Gjms::new(&d.density)?
    };
    op.check_order(p.m)?;
    let pf = op.apply(p.m, &f)?;
    let bg = boundary_geometry(&d.density.rho, None)?;
    let vol = bg.calculus().volume_density().to_vec();
    let grid = d.density.collar().grid();
    let dot = |a: &[f64], b: &[f64]| {
        bg.integrate(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>())
    };
    let ff = dot(&f, &f);
    let rayleigh = if ff > 0.0 { dot(&f, &pf) / ff } else { 0.0 };
    let eig: Vec<f64> = pf.iter().zip(&f).map(|(a, b)| a - rayleigh * b).collect();
    let eigen_residual = if ff > 0.0 {
        dot(&eig, &eig).sqrt() / ff.sqrt()
    } else {
        0.0
    };
    let rev: Vec<f64> = f.iter().rev().cloned().collect();
    let sa = op.selfadjoint_residual(p.m, &f, &rev, &vol)?.abs() / ff.max(f64::MIN_POSITIVE);
    let mut out = Outcome::default();
    out.metric("rayleigh", rayleigh);
    out.metric("eigen_residual", eigen_residual);
    out.metric("selfadjoint_residual", sa);
    out.metric("pairing", dot(&f, &pf));
    if let Some(name) = &p.output {
        let value = json!({
            "schema_version": SCHEMA_VERSION,
            "m": p.m,
            "input_harmonics": p.harmonics,
            "rayleigh_quotient": rayleigh,
            "eigen_residual": eigen_residual,
            "nodes": nodes_json(&d),
            "input": f,
            "values": pf,
            "coefficients": grid.analyze(&pf),
        });
        out.artifacts.push(Artifact::Json {
            name: name.clone(),
            value,
        });
    }
    Ok(out)
}

/// `flat`, or `Υ` given as harmonics with `τ̂ = e^{−Υ}τ`.
#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct ScaleParams {
    #[serde(default)]
    pub upsilon: Vec<Harmonic>,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct QcurvParams {
    #[serde(default)]
    pub density: Option<String>,
    #[serde(default)]
    pub density_file: Option<PathBuf>,
    #[serde(default)]
    pub scale: ScaleParams,
    #[serde(default)]
    pub output: Option<String>,
}

pub fn qcurv(p: &QcurvParams, ctx: &Context) -> Result<Outcome> {
    let d = p.source().load(ctx)?;
    let metric = d.density.metric()?;
    let bg = boundary_geometry(&d.density.rho, None)?;
    let vol = bg.calculus().volume_density().to_vec();
    let flat = LogScale::flat(&metric)?;
    let q_flat = q_curvature(&metric, &flat, &vol)?;
    let mut out = Outcome::default();
    let (q, ups) = if p.scale.upsilon.is_empty() {
        (q_flat.clone(), None)
    } else {
        let ups = harmonic_values(&d, &p.scale.upsilon)?;
        let scale = LogScale::rescaled(&metric, &ups)?;
        let q = q_curvature(&metric, &scale, &vol)?;
        let p1 = Gjms::new(&d.density)?.apply(1, &ups)?;
        let law = q
            .values
            .iter()
            .zip(&q_flat.values)
            .zip(&p1)
            .map(|((a, b), c)| (a - b - c).abs())
            .fold(0.0, f64::max);
        out.metric("transformation_residual", law);
        out.metric("total_shift", (q.total - q_flat.total).abs());
        (q, Some((scale, ups)))
    };
    let scale_ref = ups.as_ref().map(|s| &s.0).unwrap_or(&flat);
    let (two_b, _) = q_from_log_extension(&metric, scale_ref)?;
    let b_err = two_b
        .iter()
        .zip(&q.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.metric("q_total", q.total);
    out.metric("log_term_residual", b_err);
    if let Some(name) = &p.output {
        let value = json!({
            "schema_version": SCHEMA_VERSION,
            "scale": if ups.is_some() { json!({ "upsilon": p.scale.upsilon }) } else { json!("flat") },
            "q_total": q.total,
            "log_term_residual": b_err,
            "nodes": nodes_json(&d),
            "q": q.values,
        });
        out.artifacts.push(Artifact::Json {
            name: name.clone(),
            value,
        });
    }
    Ok(out)
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct VolumeParams {
    #[serde(default)]
    pub density: Option<String>,
    #[serde(default)]
    pub density_file: Option<PathBuf>,
    #[serde(default = "default_eps")]
    pub eps: String,
    #[serde(default)]
    pub scale: ScaleParams,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_eps() -> String {
    "0.02:0.3:24".into()
}

pub fn volume(p: &VolumeParams, ctx: &Context) -> Result<Outcome> {
    let d = p.source().load(ctx)?;
    let eps = parse_eps_grid(&p.eps)?;
    let ups = if p.scale.upsilon.is_empty() {
        None
    } else {
        Some(harmonic_values(&d, &p.scale.upsilon)?)
    };
    let ve = volume_expansion(&d.density.rho, ups.as_deref(), &eps)?;
    let mut out = Outcome::default();
    out.metric("log_coefficient", ve.log_coefficient);
    out.metric("c_minus2", ve.c_minus2);
    out.metric("condition", ve.condition);
    out.metric("fit_residual", ve.fit_residual);
    if ve.interior {
        out.metric("renormalized", ve.renormalized);
    }
    if let Some(name) = &p.output {
        let rows = eps
            .iter()
            .zip(&ve.volumes)
            .map(|(e, v)| vec![*e, *v])
            .collect();
        let mut footer = serde_json::to_value(&ve)?;
        if let Value::Object(m) = &mut footer {
            m.remove("epsilons");
            m.remove("volumes");
            m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        }
        out.artifacts.push(Artifact::Csv {
            name: name.clone(),
            header: vec!["eps".into(), "volume".into()],
            rows,
            footer,
        });
    }
    Ok(out)
}

#[derive(Deserialize, serde::Serialize, Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VaryMode {
    First,
    Second,
    Obstruction,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct VaryParams {
    #[serde(default)]
    pub spec: Option<SurfaceSpec>,
    #[serde(default)]
    pub spec_file: Option<PathBuf>,
    #[serde(default)]
    pub density: Option<String>,
    pub generator: Generator,
    pub mode: VaryMode,
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default = "default_eps")]
    pub eps: String,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_step() -> f64 {
    0.02
}

impl VaryParams {
    fn validate(&self) -> Result<()> {
        let given = [
            self.spec.is_some(),
            self.spec_file.is_some(),
            self.density.is_some(),
        ];
        if given.iter().filter(|b| **b).count() != 1 {
            bail!("exactly one of `spec`, `spec_file` and `density` must be given");
        }
        if !(self.h > 0.0 && self.h < 0.5) {
            bail!("finite-difference step must lie in (0, 0.5)");
        }
        self.generator.validate()?;
        parse_eps_grid(&self.eps)?;
        Ok(())
    }

    fn mode_metrics(&self) -> &'static [&'static str] {
        match self.mode {
            VaryMode::First => &[
                "dq_dt",
                "dl_dt",
                "predicted",
                "relative_error",
                "scaled_q_error",
                "projection_error",
            ],
            VaryMode::Second => &["second_derivative", "pairing", "ratio", "projection_error"],
            VaryMode::Obstruction => &[
                "derivative_norm",
                "ratio",
                "proportionality",
                "transport_mismatch",
            ],
        }
    }
}

pub fn vary(p: &VaryParams, ctx: &Context) -> Result<Outcome> {
    let sd = if p.density.is_some() {
        strict_of(
            &DensitySource {
                density: p.density.clone(),
                density_file: None,
            }
            .load(ctx)?,
        )?
    } else {
        let spec = SpecSource {
            spec: p.spec.clone(),
            spec_file: p.spec_file.clone(),
        }
        .load(ctx)?;
        strictify(&solve_fefferman(&spec, 2)?)?
    };
    let flow = DeformationFlow::new(&sd, &p.generator)?;
    let mut out = Outcome::default();
    let report = match p.mode {
        VaryMode::First => {
            let eps = parse_eps_grid(&p.eps)?;
            let fv = first_variation_check(&flow, p.h, &eps)?;
            let scale = fv.predicted.abs().max(f64::MIN_POSITIVE);
            let rel = (fv.fd_l.first - fv.predicted).abs() / scale;
            out.metric("dq_dt", fv.fd_q.first);
            out.metric("dl_dt", fv.fd_l.first);
            out.metric("predicted", fv.predicted);
            out.metric("relative_error", rel);
            out.metric(
                "scaled_q_error",
                (-0.5 * fv.fd_q.first - fv.predicted).abs(),
            );
            out.metric("projection_error", fv.projection_error);
            serde_json::to_value(&fv)?
        }
        VaryMode::Second => {
            let sv = second_variation_check(&flow, p.h)?;
            out.metric("second_derivative", sv.fd.second);
            out.metric("pairing", sv.pairing);
            out.metric("ratio", sv.ratio.unwrap_or(f64::NAN));
            out.metric("projection_error", sv.projection_error);
            serde_json::to_value(&sv)?
        }
        VaryMode::Obstruction => {
            let ov = obstruction_variation(&flow, p.h)?;
            out.metric("derivative_norm", ov.derivative_norm);
            out.metric("ratio", ov.ratio.unwrap_or(f64::NAN));
            out.metric("proportionality", ov.proportionality);
            out.metric("transport_mismatch", ov.transport_mismatch);
            serde_json::to_value(&ov)?
        }
    };
    if let Some(name) = &p.output {
        let value = json!({
            "schema_version": SCHEMA_VERSION,
            "mode": p.mode,
            "generator": p.generator,
            "h": p.h,
            "report": report,
        });
        out.artifacts.push(Artifact::Json {
            name: name.clone(),
            value,
        });
    }
    Ok(out)
}

impl SolveParams {
    fn source(&self) -> SpecSource {
        SpecSource {
            spec: self.spec.clone(),
            spec_file: self.spec_file.clone(),
        }
    }
}

macro_rules! density_source {
    ($($t:ty),*) => {$(
        impl $t {
            fn source(&self) -> DensitySource {
                DensitySource { density: self.density.clone(), density_file: self.density_file.clone() }
            }
        }
    )*};
}

density_source!(BoundaryParams, GjmsParams, QcurvParams, VolumeParams);

/// One pipeline step. Every kind is also reachable as a subcommand.
pub trait Task: Send + Sync {
    fn kind(&self) -> &'static str;
    /// Validation that needs no computation; run on the whole config first.
    fn check(&self) -> Result<()>;
    fn metrics(&self) -> &'static [&'static str];
    /// Earlier task whose density this one consumes.
    fn requires(&self) -> Option<&str>;
    fn outputs(&self) -> Vec<String>;
    fn run(&self, ctx: &Context) -> Result<Outcome>;
}

impl Task for SolveParams {
    fn kind(&self) -> &'static str {
        "solve"
    }
    fn check(&self) -> Result<()> {
        self.source().check()?;
        if !(1..=2).contains(&self.order) {
            bail!("order must be 1 or 2");
        }
        Ok(())
    }
    fn metrics(&self) -> &'static [&'static str] {
        &["residual", "sweeps", "strict_residual", "obstruction_max"]
    }
    fn requires(&self) -> Option<&str> {
        None
    }
    fn outputs(&self) -> Vec<String> {
        self.output.iter().cloned().collect()
    }
    fn run(&self, ctx: &Context) -> Result<Outcome> {
        solve(self, ctx)
    }
}

impl Task for BoundaryParams {
    fn kind(&self) -> &'static str {
        "boundary"
    }
    fn check(&self) -> Result<()> {
        self.source().check()
    }
    fn metrics(&self) -> &'static [&'static str] {
        &[
            "pab",
            "r_m",
            "area",
            "a_norm2_max",
            "obstruction_max",
            "obstruction_integral",
            "obstruction_identity",
        ]
    }
    fn requires(&self) -> Option<&str> {
        self.density.as_deref()
    }
    fn outputs(&self) -> Vec<String> {
        self.report.iter().cloned().collect()
    }
    fn run(&self, ctx: &Context) -> Result<Outcome> {
        boundary(self, ctx)
    }
}

impl Task for GjmsParams {
    fn kind(&self) -> &'static str {
        "gjms"
    }
    fn check(&self) -> Result<()> {
        self.source().check()?;
        if self.m != 1 && self.m != 3 {
            bail!("m must be 1 or 3 in dimension 2");
        }
        if self.harmonics.is_empty() {
            bail!("at least one input harmonic is required");
        }
        check_harmonics(&self.harmonics)
    }
    fn metrics(&self) -> &'static [&'static str] {
        &[
            "rayleigh",
            "eigen_residual",
            "selfadjoint_residual",
            "pairing",
        ]
    }
    fn requires(&self) -> Option<&str> {
        self.density.as_deref()
    }
    fn outputs(&self) -> Vec<String> {
        self.output.iter().cloned().collect()
    }
    fn run(&self, ctx: &Context) -> Result<Outcome> {
        gjms(self, ctx)
    }
}

impl Task for QcurvParams {
    fn kind(&self) -> &'static str {
        "qcurv"
    }
    fn check(&self) -> Result<()> {
        self.source().check()?;
        check_harmonics(&self.scale.upsilon)
    }
    fn metrics(&self) -> &'static [&'static str] {
        &[
            "q_total",
            "log_term_residual",
            "transformation_residual",
            "total_shift",
        ]
    }
    fn requires(&self) -> Option<&str> {
        self.density.as_deref()
    }
    fn outputs(&self) -> Vec<String> {
        self.output.iter().cloned().collect()
    }
    fn run(&self, ctx: &Context) -> Result<Outcome> {
        qcurv(self, ctx)
    }
}

impl Task for VolumeParams {
    fn kind(&self) -> &'static str {
        "volume"
    }
    fn check(&self) -> Result<()> {
        self.source().check()?;
        parse_eps_grid(&self.eps)?;
        check_harmonics(&self.scale.upsilon)
    }
    fn metrics(&self) -> &'static [&'static str] {
        &[
            "log_coefficient",
            "c_minus2",
            "condition",
            "fit_residual",
            "renormalized",
        ]
    }
    fn requires(&self) -> Option<&str> {
        self.density.as_deref()
    }
    fn outputs(&self) -> Vec<String> {
        self.output.iter().cloned().collect()
    }
    fn run(&self, ctx: &Context) -> Result<Outcome> {
        volume(self, ctx)
    }
}

impl Task for VaryParams {
    fn kind(&self) -> &'static str {
        "vary"
    }
    fn check(&self) -> Result<()> {
        self.validate()
    }
    fn metrics(&self) -> &'static [&'static str] {
        self.mode_metrics()
    }
    fn requires(&self) -> Option<&str> {
        self.density.as_deref()
    }
    fn outputs(&self) -> Vec<String> {
        self.output.iter().cloned().collect()
    }
    fn run(&self, ctx: &Context) -> Result<Outcome> {
        vary(self, ctx)
    }
}

type Builder = fn(toml::Value) -> Result<Box<dyn Task>>;

fn build<T: Task + serde::de::DeserializeOwned + 'static>(v: toml::Value) -> Result<Box<dyn Task>> {
    let t: T = v.try_into()?;
    t.check()?;
    Ok(Box::new(t))
}

/// Task kinds understood by the pipeline runner.
pub const REGISTRY: &[(&str, Builder)] = &[
    ("solve", build::<SolveParams>),
    ("boundary", build::<BoundaryParams>),
    ("gjms", build::<GjmsParams>),
    ("qcurv", build::<QcurvParams>),
    ("volume", build::<VolumeParams>),
    ("vary", build::<VaryParams>),
];

pub fn build_task(kind: &str, params: toml::Value) -> Result<Box<dyn Task>> {
    let (_, b) = REGISTRY.iter().find(|(k, _)| *k == kind).ok_or_else(|| {
        let known: Vec<&str> = REGISTRY.iter().map(|(k, _)| *k).collect();
        anyhow!("unknown task kind `{kind}` (known: {})", known.join(", "))
    })?;
    b(params)
}
