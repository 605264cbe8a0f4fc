//! Declarative surface descriptions and grid settings.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::sphere::real_harmonic;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Quadric,
    StarShaped,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct Harmonic {
    pub l: usize,
    pub m: i64,
    pub coeff: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_lmax")]
    pub lmax: usize,
    /// Transverse order of working fields; the defining density is carried
    /// two orders higher.
    #[serde(default = "default_jet_order")]
    pub jet_order: usize,
}

fn default_lmax() -> usize {
    24
}

fn default_jet_order() -> usize {
    6
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lmax: default_lmax(),
            jet_order: default_jet_order(),
        }
    }
}

impl GridConfig {
    pub fn new(lmax: usize, jet_order: usize) -> Self {
        GridConfig { lmax, jet_order }
    }

    pub fn storage_order(&self) -> usize {
        self.jet_order + 2
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadric: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harmonics: Vec<Harmonic>,
    #[serde(default)]
    pub grid: GridConfig,
}

impl SurfaceSpec {
    /// Unit ball `(1/2)(-(ξ⁰)² + Σ(ξ^i)²)`.
    pub fn ball(n: usize) -> Self {
        Self::ellipsoid(&vec![1.0; n + 1])
    }

    /// Ellipsoid `Σ (x_i/a_i)² < 1` centred at the origin.
    pub fn ellipsoid(axes: &[f64]) -> Self {
        let n = axes.len() - 1;
        let mut a = vec![vec![0.0; n + 2]; n + 2];
        a[0][0] = -1.0;
        for (i, ax) in axes.iter().enumerate() {
            a[i + 1][i + 1] = 1.0 / (ax * ax);
        }
        SurfaceSpec {
            kind: SurfaceKind::Quadric,
            n,
            quadric: Some(a),
            harmonics: vec![],
            grid: GridConfig::default(),
        }
    }

    pub fn quadric(matrix: Vec<Vec<f64>>) -> Self {
        let n = matrix.len().saturating_sub(2);
        SurfaceSpec {
            kind: SurfaceKind::Quadric,
            n,
            quadric: Some(matrix),
            harmonics: vec![],
            grid: GridConfig::default(),
        }
    }

    /// Star-shaped surface with `log R = Σ coeff · Y_lm`.
    pub fn star_shaped(harmonics: Vec<Harmonic>) -> Self {
        SurfaceSpec {
            kind: SurfaceKind::StarShaped,
            n: 2,
            quadric: None,
            harmonics,
            grid: GridConfig::default(),
        }
    }

    pub fn with_grid(mut self, grid: GridConfig) -> Self {
        self.grid = grid;
        self
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: SurfaceSpec = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: SurfaceSpec = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn quadric_matrix(&self) -> Result<DMatrix<f64>> {
        let q = self
            .quadric
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("quadric spec without coefficient matrix".into()))?;
        let d = q.len();
        if d != self.n + 2 || q.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput(format!(
                "quadric matrix must be {0}x{0}",
                self.n + 2
            )));
        }
        Ok(DMatrix::from_fn(d, d, |i, j| 0.5 * (q[i][j] + q[j][i])))
    }

    /// Quadric matrix scaled so that its determinant is -1.
    pub fn normalized_quadric(&self) -> Result<DMatrix<f64>> {
        let a = self.quadric_matrix()?;
        let det = a.determinant();
        if det >= 0.0 {
            return Err(Error::Convexity(
                "quadric does not have Lorentz signature".into(),
            ));
        }
        Ok(a * (-det).powf(-1.0 / (self.n as f64 + 2.0)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.lmax < 4 {
            return Err(Error::InvalidInput("grid.lmax must be at least 4".into()));
        }
        if self.grid.jet_order < self.n / 2 + 1 {
            return Err(Error::InvalidInput(format!(
                "grid.jet_order = {} is below the obstruction order {}",
                self.grid.jet_order,
                self.n / 2 + 1
            )));
        }
        match self.kind {
            SurfaceKind::Quadric => {
                if self.n < 1 {
                    return Err(Error::InvalidInput("dimension n must be positive".into()));
                }
                let a = self.quadric_matrix()?;
                let eig = a.clone().symmetric_eigen();
                let neg = eig.eigenvalues.iter().filter(|v| **v < 0.0).count();
                let zero = eig
                    .eigenvalues
                    .iter()
                    .filter(|v| v.abs() < 1e-14 * a.norm())
                    .count();
                if neg != 1 || zero != 0 {
                    return Err(Error::Convexity(
                        "quadric matrix must have Lorentz signature (1, n+1)".into(),
                    ));
                }
                let block = a.view((1, 1), (self.n + 1, self.n + 1)).into_owned();
                if block
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .any(|v| *v <= 0.0)
                {
                    return Err(Error::Convexity(
                        "quadric is not bounded in the affine chart".into(),
                    ));
                }
                if a[(0, 0)] >= 0.0 {
                    return Err(Error::Convexity(
                        "the chart origin must lie inside the quadric".into(),
                    ));
                }
                // origin inside: ρ(0) < 0 and star-shaped about it (true for ellipsoids containing 0)
                let rho = Poly::quadric(&a);
                let mut origin = vec![0.0; self.n + 2];
                origin[0] = 1.0;
                if rho.eval(&origin) >= 0.0 {
                    return Err(Error::Convexity(
                        "the chart origin must lie inside the quadric".into(),
                    ));
                }
            }
            SurfaceKind::StarShaped => {
                if self.n != 2 {
                    return Err(Error::Unsupported(
                        "star-shaped surfaces are supported for n = 2 only".into(),
                    ));
                }
                for h in &self.harmonics {
                    if h.m.unsigned_abs() as usize > h.l {
                        return Err(Error::InvalidInput(format!(
                            "harmonic (l={}, m={}) out of range",
                            h.l, h.m
                        )));
                    }
                    if !h.coeff.is_finite() {
                        return Err(Error::InvalidInput(
                            "non-finite harmonic coefficient".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `log R(u)` for star-shaped specs.
    pub fn log_radius(&self, dir: [f64; 3]) -> f64 {
        self.harmonics
            .iter()
            .map(|h| h.coeff * real_harmonic(h.l, h.m, dir))
            .sum()
    }

    /// Radial function of the boundary in direction `dir` (any n for quadrics).
    pub fn radius(&self, dir: &[f64]) -> Result<f64> {
        match self.kind {
            SurfaceKind::StarShaped => Ok(self.log_radius([dir[0], dir[1], dir[2]]).exp()),
            SurfaceKind::Quadric => {
                let a = self.quadric_matrix()?;
                quadric_radius(&a, dir)
            }
        }
    }
}

/// Positive root `r` of `(1/2) a_IJ ξ^I ξ^J = 0` at `ξ = (1, r·dir)`.
pub fn quadric_radius(a: &DMatrix<f64>, dir: &[f64]) -> Result<f64> {
    let d = dir.len();
    let mut qa = 0.0;
    let mut qb = 0.0;
    for i in 0..d {
        qb += a[(0, i + 1)] * dir[i];
        for j in 0..d {
            qa += a[(i + 1, j + 1)] * dir[i] * dir[j];
        }
    }
    let qc = a[(0, 0)];
    let disc = qb * qb - qa * qc;
    if qa <= 0.0 || disc < 0.0 {
        return Err(Error::Convexity("ray does not cross the quadric".into()));
    }
    let r = (-qb + disc.sqrt()) / qa;
    if r <= 0.0 {
        return Err(Error::Convexity(
            "quadric is not star-shaped about the origin".into(),
        ));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_radius_is_one() {
        let b = SurfaceSpec::ball(2);
        b.validate().unwrap();
        assert!((b.radius(&[0.0, 0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ellipsoid_normalization() {
        let e = SurfaceSpec::ellipsoid(&[1.2, 0.9, 1.1]);
        let a = e.normalized_quadric().unwrap();
        assert!((a.determinant() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip() {
        let s = SurfaceSpec::star_shaped(vec![Harmonic {
            l: 4,
            m: 0,
            coeff: 0.05,
        }]);
        let text = toml::to_string(&s).unwrap();
        let back = SurfaceSpec::from_toml_str(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_bad_signature() {
        let mut s = SurfaceSpec::ball(2);
        s.quadric.as_mut().unwrap()[0][0] = 1.0;
        assert!(s.validate().is_err());
        let bad = SurfaceSpec::from_toml_str("kind = \"star_shaped\"\nn = 2\nfoo = 1\n");
        assert!(bad.is_err());
    }
}
