//! Versioned JSON and CSV artifacts. Every float is written with 17
//! significant digits so that files round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Collar, Field};
use crate::jet::Jet;
use crate::ma_solver::{ma_residual_field, obstruction_density, quadric_density, FeffermanDensity};
use crate::surface::{SurfaceKind, SurfaceSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    v.serialize(&mut ser)
        .map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = to_json(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Writes a numeric table; `footer` is appended as a `# `-prefixed JSON line.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<f64>],
    footer: Option<&serde_json::Value>,
) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::InvalidInput(
                "CSV row length does not match the header".into(),
            ));
        }
        out.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    if let Some(f) = footer {
        out.push_str("# ");
        out.push_str(&to_json(f)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(tag = "representation", rename_all = "snake_case")]
enum Representation {
    /// Exact quadric density of the spec.
    Polynomial,
    /// Collar jet coefficients `[order][node]`.
    Collocation { coefficients: Vec<Vec<f64>> },
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
struct DensityFile {
    schema_version: u32,
    spec: SurfaceSpec,
    order: usize,
    strict: bool,
    sweeps: usize,
    residual_profile: Vec<f64>,
    density: Representation,
}

/// A density together with the data needed to rebuild it.
#[derive(Clone, Debug)]
pub struct StoredDensity {
    pub spec: SurfaceSpec,
    pub order: usize,
    pub strict: bool,
    pub density: FeffermanDensity,
}

pub fn save_density(path: &Path, d: &StoredDensity) -> Result<()> {
    let density = if d.density.rho.poly().is_some() {
        Representation::Polynomial
    } else {
        Representation::Collocation {
            coefficients: d.density.rho.jet().coefficients(),
        }
    };
    let file = DensityFile {
        schema_version: SCHEMA_VERSION,
        spec: d.spec.clone(),
        order: d.order,
        strict: d.strict,
        sweeps: d.density.sweeps,
        residual_profile: d.density.residual_profile.clone(),
        density,
    };
    write_json(path, &file)
}

pub fn density_from_json(text: &str) -> Result<StoredDensity> {
    let file: DensityFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported density schema version {}",
            file.schema_version
        )));
    }
    file.spec.validate()?;
    let collar = Collar::for_spec(&file.spec)?;
    let rho = match file.density {
        Representation::Polynomial => {
            if file.spec.kind != SurfaceKind::Quadric {
                return Err(Error::Parse(
                    "polynomial density stored for a non-quadric surface".into(),
                ));
            }
            Field::from_poly(&collar, quadric_density(&file.spec)?)?
        }
        Representation::Collocation { coefficients } => {
            if coefficients.len() != collar.storage() + 1
                || coefficients.iter().any(|c| c.len() != collar.nodes())
            {
                return Err(Error::Parse(
                    "density coefficients do not match the grid".into(),
                ));
            }
            if coefficients.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Parse("non-finite density coefficient".into()));
            }
            Field::complete_from_jet(&collar, Jet::from_coefficients(coefficients)?, 2)?
        }
    };
    let res = ma_residual_field(&rho)?;
    let profile = (0..=res.order())
        .map(|k| res.jet().max_abs_coef(k))
        .collect::<Vec<f64>>();
    let obstruction = obstruction_density(&rho)?;
    Ok(StoredDensity {
        spec: file.spec,
        order: file.order,
        strict: file.strict,
        density: FeffermanDensity {
            rho,
            obstruction,
            residual_profile: profile,
            sweeps: file.sweeps,
        },
    })
}

pub fn load_density(path: &Path) -> Result<StoredDensity> {
    density_from_json(&fs::read_to_string(path)?)
}
