//! Deformations `Ω_t = Fl̲_t(Ω)` generated by `f ∈ E[2]` through
//! `X^I = g̃^{IJ}D_J f̃`, and finite-difference checks of the variation
//! formulas for `Q̄` and the obstruction density.

use std::sync::Arc;

use log::debug;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blaschke::volume_expansion;
use crate::error::{Error, Result};
use crate::field::{Collar, Field, DIM};
use crate::gjms::Gjms;
use crate::hypersurface::boundary_geometry;
use crate::ma_solver::{radial_seed, solve_from_seed, FeffermanDensity, StrictDensity};
use crate::poly::Poly;
use crate::qcurvature::{q_curvature, LogScale};
use crate::sphere::{lm_index, SphereGrid};
use crate::surface::{GridConfig, Harmonic, SurfaceSpec};

const MAX_STEP: f64 = 2.5e-3;

/// Boundary density generating the flow.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// `f = Σ c Y_lm` in the flat scale.
    Harmonics { harmonics: Vec<Harmonic> },
    /// `f = a_IJ ξ^I ξ^J` restricted to the boundary.
    Quadratic { matrix: Vec<Vec<f64>> },
}

impl Generator {
    pub fn harmonic(l: usize, m: i64, coeff: f64) -> Self {
        Generator::Harmonics {
            harmonics: vec![Harmonic { l, m, coeff }],
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let g: Generator = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Harmonics { harmonics } => {
                for h in harmonics {
                    if h.m.unsigned_abs() as usize > h.l || !h.coeff.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "bad generator harmonic ({}, {})",
                            h.l, h.m
                        )));
                    }
                }
            }
            Generator::Quadratic { matrix } => {
                if matrix.len() != DIM
                    || matrix
                        .iter()
                        .any(|r| r.len() != DIM || r.iter().any(|v| !v.is_finite()))
                {
                    return Err(Error::InvalidInput(
                        "quadratic generator must be a finite 4×4 matrix".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Weight-2 seed extension on a collar.
    fn seed(&self, collar: &Arc<Collar>) -> Result<Field> {
        self.validate()?;
        match self {
            Generator::Harmonics { harmonics } => {
                let grid = collar.grid();
                let mut c = vec![0.0; grid.n_coeffs()];
                for h in harmonics {
                    if h.l > grid.lmax() {
                        return Err(Error::InvalidInput(format!(
                            "generator degree {} exceeds lmax {}",
                            h.l,
                            grid.lmax()
                        )));
                    }
                    c[lm_index(h.l, h.m)] += h.coeff;
                }
                Field::ray_constant(collar, &grid.synthesize(&c), 2)
            }
            Generator::Quadratic { matrix } => {
                let a = DMatrix::from_fn(DIM, DIM, |i, j| 0.5 * (matrix[i][j] + matrix[j][i]));
                Field::from_poly(collar, Poly::quadric(&a).scale(2.0))
            }
        }
    }
}

/// The flow of `X̲` on a fixed strict density.
pub struct DeformationFlow {
    base: StrictDensity,
    f: Vec<f64>,
    extension: Field,
    x: Vec<Field>,
    /// Spectral coefficients of every jet coefficient of `X^I`, for off-grid evaluation.
    x_coeffs: Vec<Vec<Vec<f64>>>,
}

/// A flowed boundary sampled on the base grid.
#[derive(Clone, Debug)]
pub struct FlowedBoundary {
    pub t: f64,
    pub log_radius: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// `max |log R_t − P_lmax log R_t|` on the grid.
    pub projection_error: f64,
}

impl DeformationFlow {
    pub fn new(base: &StrictDensity, generator: &Generator) -> Result<Self> {
        let gj = Gjms::strict(base)?;
        let collar = base.density.collar().clone();
        let seed = generator.seed(&collar)?;
        let ext = gj.extend_harmonic_from(&seed, 3)?.extension;
        let d = ext.ambient_derivative()?;
        let metric = gj.metric();
        let mut x = Vec::with_capacity(DIM);
        for i in 0..DIM {
            let mut acc = metric.inverse(i, 0).mul(&d[0])?;
            for (j, dj) in d.iter().enumerate().skip(1) {
                acc = acc.add(&metric.inverse(i, j).mul(dj)?)?;
            }
            x.push(acc);
        }
        let grid = collar.grid();
        let x_coeffs = x
            .iter()
            .map(|xi| {
                (0..=xi.order())
                    .map(|k| grid.analyze(xi.jet().coef(k)))
                    .collect()
            })
            .collect();
        Ok(DeformationFlow {
            base: base.clone(),
            f: ext.boundary().to_vec(),
            extension: ext,
            x,
            x_coeffs,
        })
    }

    pub fn base(&self) -> &StrictDensity {
        &self.base
    }

    pub fn collar(&self) -> &Arc<Collar> {
        self.base.density.collar()
    }

    /// `f` on the base boundary nodes.
    pub fn generator(&self) -> &[f64] {
        &self.f
    }

    pub fn extension(&self) -> &Field {
        &self.extension
    }

    /// `X^I` at `ξ = (1, x(p, s))` on a grid ray.
    fn x_at_node(&self, p: usize, s: f64) -> [f64; DIM] {
        let mut out = [0.0; DIM];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.x[i].jet().series_at(p).eval(s);
        }
        out
    }

    /// `X^I` at `ξ = (1, x)` for any `x` in the collar.
    pub fn x_at(&self, x: [f64; 3]) -> [f64; DIM] {
        let (_, s, basis) = self.collar().collar_coordinates(x);
        let mut out = [0.0; DIM];
        for (i, o) in out.iter_mut().enumerate() {
            let mut pw = 1.0;
            for c in &self.x_coeffs[i] {
                *o += pw * c.iter().zip(&basis).map(|(a, b)| a * b).sum::<f64>();
                pw *= s;
            }
        }
        out
    }

    fn projected(x: [f64; 3], xi: [f64; DIM]) -> [f64; 3] {
        [
            xi[1] - x[0] * xi[0],
            xi[2] - x[1] * xi[0],
            xi[3] - x[2] * xi[0],
        ]
    }

    /// `∂_t log R_t` for the boundary transported by `X̲`.
    fn log_radius_rate(&self, ell: &[f64]) -> Vec<f64> {
        let collar = self.collar();
        let grid = collar.grid();
        let grad = grid.gradient(ell);
        (0..ell.len())
            .map(|p| {
                let u = collar.directions()[p];
                let r = ell[p].exp();
                let s = r / collar.radius()[p] - 1.0;
                let pt = [r * u[0], r * u[1], r * u[2]];
                let v = Self::projected(pt, self.x_at_node(p, s));
                let vu: f64 = (0..3).map(|c| v[c] * u[c]).sum();
                let gv: f64 = (0..3).map(|c| grad[c][p] * v[c]).sum();
                (vu - gv) / r
            })
            .collect()
    }

    /// RK4 transport of `log R` from 0 to `t`.
    pub fn flow_boundary(&self, t: f64) -> FlowedBoundary {
        let collar = self.collar();
        let mut ell: Vec<f64> = collar.radius().iter().map(|r| r.ln()).collect();
        let steps = (t.abs() / MAX_STEP).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let axpy = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> {
            a.iter().zip(k).map(|(x, y)| x + c * y).collect()
        };
        if t != 0.0 {
            for _ in 0..steps {
                let k1 = self.log_radius_rate(&ell);
                let k2 = self.log_radius_rate(&axpy(&ell, &k1, 0.5 * dt));
                let k3 = self.log_radius_rate(&axpy(&ell, &k2, 0.5 * dt));
                let k4 = self.log_radius_rate(&axpy(&ell, &k3, dt));
                for p in 0..ell.len() {
                    ell[p] += dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
                }
            }
        }
        let grid = collar.grid();
        let coeffs = grid.analyze(&ell);
        let back = grid.synthesize(&coeffs);
        let projection_error = ell
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        FlowedBoundary {
            t,
            log_radius: ell,
            coeffs,
            projection_error,
        }
    }

    /// Lagrangian images `(Fl̲_t(x_p), λ_p)` of the boundary nodes, with
    /// `Fl_t(1, x) = λ(1, Fl̲_t(x))`.
    pub fn flow_points(&self, t: f64) -> Vec<([f64; 3], f64)> {
        let collar = self.collar();
        let steps = (t.abs() / MAX_STEP).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        (0..collar.nodes())
            .into_par_iter()
            .map(|p| {
                let mut x = collar.point(p, 0.0);
                let mut ll = 0.0;
                let rate = |x: [f64; 3]| {
                    let xi = self.x_at(x);
                    (Self::projected(x, xi), xi[0])
                };
                let shift = |x: [f64; 3], v: [f64; 3], c: f64| {
                    [x[0] + c * v[0], x[1] + c * v[1], x[2] + c * v[2]]
                };
                if t != 0.0 {
                    for _ in 0..steps {
                        let (v1, l1) = rate(x);
                        let (v2, l2) = rate(shift(x, v1, 0.5 * dt));
                        let (v3, l3) = rate(shift(x, v2, 0.5 * dt));
                        let (v4, l4) = rate(shift(x, v3, dt));
                        for c in 0..3 {
                            x[c] += dt / 6.0 * (v1[c] + 2.0 * v2[c] + 2.0 * v3[c] + v4[c]);
                        }
                        ll += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
                    }
                }
                (x, ll.exp())
            })
            .collect()
    }

    /// Star-shaped spec of `Ω_t`.
    pub fn deformed_spec(&self, t: f64) -> (SurfaceSpec, FlowedBoundary) {
        let fb = self.flow_boundary(t);
        let grid = self.collar().grid();
        let mut harmonics = Vec::new();
        for l in 0..=grid.lmax() {
            for m in -(l as i64)..=(l as i64) {
                let c = fb.coeffs[lm_index(l, m)];
                if c != 0.0 {
                    harmonics.push(Harmonic { l, m, coeff: c });
                }
            }
        }
        let cfg = GridConfig::new(grid.lmax(), self.collar().storage() - 2);
        (SurfaceSpec::star_shaped(harmonics).with_grid(cfg), fb)
    }

    /// Fefferman density, `Q̄` and `O` of `Ω_t` on a copy of the base grid.
    pub fn member(&self, t: f64) -> Result<FamilyMember> {
        let fb = self.flow_boundary(t);
        let base = self.collar();
        let g = base.grid();
        let grid = SphereGrid::with_size(g.lmax(), g.nlat(), g.nlon())?;
        let collar = Arc::new(Collar::from_log_radius_coeffs(
            grid,
            fb.coeffs.clone(),
            base.storage(),
        )?);
        let fd = solve_from_seed(&radial_seed(&collar)?, 2, 2)?;
        FamilyMember::from_density(t, fd, fb.projection_error)
    }
}

/// One domain of a deformation family.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub t: f64,
    pub density: FeffermanDensity,
    pub q_total: f64,
    pub obstruction: Vec<f64>,
    pub flat_volume: Vec<f64>,
    pub projection_error: f64,
}

impl FamilyMember {
    pub fn from_density(t: f64, density: FeffermanDensity, projection_error: f64) -> Result<Self> {
        let bg = boundary_geometry(&density.rho, None)?;
        let flat_volume = bg.calculus().volume_density().to_vec();
        let metric = density.metric()?;
        let q = q_curvature(&metric, &LogScale::flat(&metric)?, &flat_volume)?;
        let obstruction = density.obstruction_boundary().to_vec();
        Ok(FamilyMember {
            t,
            density,
            q_total: q.total,
            obstruction,
            flat_volume,
            projection_error,
        })
    }
}

/// Four-point first and five-point second central differences with a
/// Richardson-style error estimate against the lower-order stencil.
#[derive(Clone, Debug, Serialize)]
pub struct FiniteDifference {
    pub h: f64,
    pub samples: Vec<(f64, f64)>,
    pub first: f64,
    pub first_error: f64,
    pub second: f64,
    pub second_error: f64,
}

pub fn finite_difference(h: f64, v: [f64; 5]) -> FiniteDifference {
    let [m2, m1, z, p1, p2] = v;
    let first = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    let first_low = (p1 - m1) / (2.0 * h);
    let second = (-p2 + 16.0 * p1 - 30.0 * z + 16.0 * m1 - m2) / (12.0 * h * h);
    let second_low = (p1 - 2.0 * z + m1) / (h * h);
    let ts = [-2.0, -1.0, 0.0, 1.0, 2.0];
    FiniteDifference {
        h,
        samples: ts.iter().zip(v).map(|(t, q)| (t * h, q)).collect(),
        first,
        first_error: (first - first_low).abs(),
        second,
        second_error: (second - second_low).abs(),
    }
}

/// Members at `t ∈ {−2h, −h, 0, h, 2h}`.
pub fn stencil(flow: &DeformationFlow, h: f64) -> Result<Vec<FamilyMember>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(
            "finite-difference step must be positive".into(),
        ));
    }
    [-2.0, -1.0, 0.0, 1.0, 2.0]
        .par_iter()
        .map(|k| flow.member(k * h))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FirstVariation {
    /// Differences of `Q̄_t`.
    pub fd_q: FiniteDifference,
    /// Differences of the log coefficient `L_t`.
    pub fd_l: FiniteDifference,
    /// `∫ O ρ̄̇ vol_h` with `ρ̄̇|_M = −2f`.
    pub pairing: f64,
    /// `k₂ ∫ O ρ̄̇`, the predicted `dL/dt`.
    pub predicted: f64,
    pub projection_error: f64,
}

pub const K2: f64 = 0.5;

pub fn first_variation_check(
    flow: &DeformationFlow,
    h: f64,
    eps: &[f64],
) -> Result<FirstVariation> {
    let members = stencil(flow, h)?;
    let q: Vec<f64> = members.iter().map(|m| m.q_total).collect();
    let l: Vec<f64> = members
        .par_iter()
        .map(|m| volume_expansion(&m.density.rho, None, eps).map(|v| v.log_coefficient))
        .collect::<Result<_>>()?;
    let fd_q = finite_difference(h, [q[0], q[1], q[2], q[3], q[4]]);
    let fd_l = finite_difference(h, [l[0], l[1], l[2], l[3], l[4]]);
    let base = &members[2];
    let w: Vec<f64> = (0..flow.f.len())
        .map(|p| base.obstruction[p] * (-2.0 * flow.f[p]) * base.flat_volume[p])
        .collect();
    let pairing = flow.collar().grid().integrate(&w);
    let predicted = K2 * pairing;
    debug!(
        "first variation: dL {} dQ {} predicted {predicted}",
        fd_l.first, fd_q.first
    );
    let projection_error = members
        .iter()
        .map(|m| m.projection_error)
        .fold(0.0, f64::max);
    Ok(FirstVariation {
        fd_q,
        fd_l,
        pairing,
        predicted,
        projection_error,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SecondVariation {
    pub fd: FiniteDifference,
    /// `∫ f P₃ f vol_h` on the base.
    pub pairing: f64,
    /// `d²Q̄/dt² ÷ ∫ f P₃ f` when the pairing is nonzero.
    pub ratio: Option<f64>,
    pub projection_error: f64,
}

pub fn second_variation_check(flow: &DeformationFlow, h: f64) -> Result<SecondVariation> {
    let members = stencil(flow, h)?;
    let q: Vec<f64> = members.iter().map(|m| m.q_total).collect();
    let fd = finite_difference(h, [q[0], q[1], q[2], q[3], q[4]]);
    let pf = Gjms::strict(&flow.base)?.apply(3, &flow.f)?;
    let vol = &members[2].flat_volume;
    let w: Vec<f64> = (0..pf.len()).map(|p| flow.f[p] * pf[p] * vol[p]).collect();
    let pairing = flow.collar().grid().integrate(&w);
    let scale = flow
        .collar()
        .grid()
        .integrate(&flow.f.iter().map(|v| v * v).collect::<Vec<_>>());
    let ratio = (pairing.abs() > 1e-8 * scale.max(1e-300)).then(|| fd.second / pairing);
    let projection_error = members
        .iter()
        .map(|m| m.projection_error)
        .fold(0.0, f64::max);
    Ok(SecondVariation {
        fd,
        pairing,
        ratio,
        projection_error,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ObstructionVariation {
    pub h: f64,
    /// Central difference of `Fl_t^*O_t|_M`.
    pub derivative: Vec<f64>,
    pub p3f: Vec<f64>,
    /// Least-squares `b` in `derivative ≈ b P₃f`.
    pub ratio: Option<f64>,
    /// `‖derivative − b P₃f‖ / ‖derivative‖` (or `‖derivative‖` on the kernel).
    pub proportionality: f64,
    pub derivative_norm: f64,
    /// Largest distance between Lagrangian images and the transported boundary.
    pub transport_mismatch: f64,
}

/// `Fl_t^*O_t` on the base boundary nodes.
fn pulled_back_obstruction(
    flow: &DeformationFlow,
    member: &FamilyMember,
) -> Result<(Vec<f64>, f64)> {
    let pts = flow.flow_points(member.t);
    let collar = member.density.collar();
    let grid = collar.grid();
    let oc = grid.analyze(&member.obstruction);
    let lc = collar.log_radius_coeffs();
    let mut mismatch = 0.0f64;
    let vals = pts
        .iter()
        .map(|(x, lambda)| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let dir = [x[0] / r, x[1] / r, x[2] / r];
            mismatch = mismatch.max((r.ln() - grid.evaluate_at(lc, dir)).abs());
            lambda.powi(-4) * grid.evaluate_at(&oc, dir)
        })
        .collect();
    Ok((vals, mismatch))
}

pub fn obstruction_variation(flow: &DeformationFlow, h: f64) -> Result<ObstructionVariation> {
    let members = stencil(flow, h)?;
    let pulled: Vec<(Vec<f64>, f64)> = members
        .iter()
        .map(|m| pulled_back_obstruction(flow, m))
        .collect::<Result<_>>()?;
    let n = flow.f.len();
    let derivative: Vec<f64> = (0..n)
        .map(|p| {
            (-pulled[4].0[p] + 8.0 * pulled[3].0[p] - 8.0 * pulled[1].0[p] + pulled[0].0[p])
                / (12.0 * h)
        })
        .collect();
    let p3f = Gjms::strict(&flow.base)?.apply(3, &flow.f)?;
    let grid = flow.collar().grid();
    let dot = |a: &[f64], b: &[f64]| {
        grid.integrate(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>())
    };
    let pp = dot(&p3f, &p3f);
    let dd = dot(&derivative, &derivative);
    let derivative_norm = dd.sqrt();
    let ff = dot(&flow.f, &flow.f);
    let (ratio, proportionality) = if pp > 1e-12 * ff.max(1e-300) {
        let b = dot(&derivative, &p3f) / pp;
        let r: Vec<f64> = derivative
            .iter()
            .zip(&p3f)
            .map(|(d, q)| d - b * q)
            .collect();
        (Some(b), dot(&r, &r).sqrt() / derivative_norm.max(1e-300))
    } else {
        (None, derivative_norm)
    };
    let transport_mismatch = pulled.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ObstructionVariation {
        h,
        derivative,
        p3f,
        ratio,
        proportionality,
        derivative_norm,
        transport_mismatch,
    })
}

/// `max |∂_tρ̄_t + 2f|` on the base boundary, by central differences.
pub fn density_velocity_residual(flow: &DeformationFlow, h: f64) -> Result<f64> {
    let members: Vec<FamilyMember> = [-h, h]
        .par_iter()
        .map(|t| flow.member(*t))
        .collect::<Result<_>>()?;
    let base = flow.collar();
    let at_base = |m: &FamilyMember| -> Vec<f64> {
        let c = m.density.collar();
        (0..base.nodes())
            .map(|p| {
                let s = base.radius()[p] / c.radius()[p] - 1.0;
                m.density.rho.jet().series_at(p).eval(s)
            })
            .collect()
    };
    let (a, b) = (at_base(&members[0]), at_base(&members[1]));
    Ok((0..base.nodes())
        .map(|p| ((b[p] - a[p]) / (2.0 * h) + 2.0 * flow.f[p]).abs())
        .fold(0.0, f64::max))
}
