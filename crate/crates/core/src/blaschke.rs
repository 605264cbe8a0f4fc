//! Blaschke metric of a convex domain and the renormalized volume expansion
//! `Vol({τ^{−2}ρ̄ < −ε²/2}) = c₋₂ε^{−2} + L log(1/ε) + V + o(1)` (n = 2).
//!
//! In collar coordinates `x = (1+s)R(u)u` the Riemannian volume of
//! `g = ∂∂ρ/(−2ρ) + ∂ρ∂ρ/(4ρ²)` is `√(−J)(−2ρ)^{−2}(1+s)²R³ ds dΩ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::jet::Series;
use crate::ma_solver::ma_residual_field;
use crate::poly::Poly;
use crate::sphere::gauss_legendre;

const FIT_CONDITION_LIMIT: f64 = 1e10;
const OUTER_POINTS: usize = 64;
const INNER_POINTS: usize = 48;

/// Derivatives of a polynomial density at an affine point, up to order four.
struct PolyDerivatives {
    d0: f64,
    d1: Vec<f64>,
    d2: Vec<Vec<f64>>,
    d3: Vec<Vec<Vec<f64>>>,
    d4: Vec<Vec<Vec<Vec<f64>>>>,
}

impl PolyDerivatives {
    fn at(rho: &Poly, x: &[f64]) -> Self {
        let d = x.len();
        let p1: Vec<Poly> = (0..d).map(|i| rho.derivative(i + 1)).collect();
        let p2: Vec<Vec<Poly>> = p1
            .iter()
            .map(|p| (0..d).map(|j| p.derivative(j + 1)).collect())
            .collect();
        let p3: Vec<Vec<Vec<Poly>>> = p2
            .iter()
            .map(|r| {
                r.iter()
                    .map(|p| (0..d).map(|k| p.derivative(k + 1)).collect())
                    .collect()
            })
            .collect();
        let ev = |p: &Poly| p.eval_affine(x);
        PolyDerivatives {
            d0: ev(rho),
            d1: p1.iter().map(ev).collect(),
            d2: p2.iter().map(|r| r.iter().map(ev).collect()).collect(),
            d3: p3
                .iter()
                .map(|r| r.iter().map(|c| c.iter().map(ev).collect()).collect())
                .collect(),
            d4: p3
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|c| {
                            c.iter()
                                .map(|p| (0..d).map(|l| ev(&p.derivative(l + 1))).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Blaschke metric `∂∂ρ̄/(−2ρ̄) + ∂ρ̄∂ρ̄/(4ρ̄²)` of a polynomial density in the flat scale.
pub fn blaschke_metric(rho: &Poly, x: &[f64]) -> Result<DMatrix<f64>> {
    check_point(rho, x)?;
    let dv = PolyDerivatives::at(rho, x);
    Ok(metric_jets(&dv).0)
}

fn check_point(rho: &Poly, x: &[f64]) -> Result<()> {
    if rho.nvars() != x.len() + 1 {
        return Err(Error::InvalidInput(
            "point dimension does not match the density".into(),
        ));
    }
    let v = rho.eval_affine(x);
    if v >= -1e-12 {
        return Err(Error::InvalidInput(format!(
            "point is not inside the domain (ρ = {v:e})"
        )));
    }
    Ok(())
}

type Metric3 = Vec<Vec<Vec<f64>>>;
type Metric4 = Vec<Vec<Vec<Vec<f64>>>>;

/// `g_ij`, `∂_k g_ij`, `∂_l∂_k g_ij`.
fn metric_jets(p: &PolyDerivatives) -> (DMatrix<f64>, Metric3, Metric4) {
    let d = p.d1.len();
    let r = p.d0;
    let (r2, r3, r4) = (r * r, r * r * r, r * r * r * r);
    let (d1, d2, d3, d4) = (&p.d1, &p.d2, &p.d3, &p.d4);
    let g = DMatrix::from_fn(d, d, |i, j| {
        -d2[i][j] / (2.0 * r) + d1[i] * d1[j] / (4.0 * r2)
    });
    let mut dg = vec![vec![vec![0.0; d]; d]; d];
    let mut ddg = vec![vec![vec![vec![0.0; d]; d]; d]; d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let a = -d3[i][j][k] / (2.0 * r) + d2[i][j] * d1[k] / (2.0 * r2);
                let b = (d2[i][k] * d1[j] + d1[i] * d2[j][k]) / (4.0 * r2)
                    - d1[i] * d1[j] * d1[k] / (2.0 * r3);
                dg[i][j][k] = a + b;
                for l in 0..d {
                    let a = -d4[i][j][k][l] / (2.0 * r)
                        + d3[i][j][k] * d1[l] / (2.0 * r2)
                        + (d3[i][j][l] * d1[k] + d2[i][j] * d2[k][l]) / (2.0 * r2)
                        - d2[i][j] * d1[k] * d1[l] / r3;
                    let b = (d3[i][k][l] * d1[j]
                        + d2[i][k] * d2[j][l]
                        + d2[i][l] * d2[j][k]
                        + d1[i] * d3[j][k][l])
                        / (4.0 * r2)
                        - (d2[i][k] * d1[j] + d1[i] * d2[j][k]) * d1[l] / (2.0 * r3)
                        - (d2[i][l] * d1[j] * d1[k]
                            + d1[i] * d2[j][l] * d1[k]
                            + d1[i] * d1[j] * d2[k][l])
                            / (2.0 * r3)
                        + 1.5 * d1[i] * d1[j] * d1[k] * d1[l] / r4;
                    ddg[i][j][k][l] = a + b;
                }
            }
        }
    }
    (g, dg, ddg)
}

/// Largest deviation of the Riemann tensor of the Blaschke metric at `x`
/// from constant curvature `κ`, relative to `|g|²`.
pub fn constant_curvature_residual(rho: &Poly, x: &[f64], kappa: f64) -> Result<f64> {
    check_point(rho, x)?;
    let dv = PolyDerivatives::at(rho, x);
    let (g, dg, ddg) = metric_jets(&dv);
    let d = g.nrows();
    let gi = g
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    // Γ_{kij} = ½(∂_i g_jk + ∂_j g_ik − ∂_k g_ij), index order (lowered, i, j)
    let low = |k: usize, i: usize, j: usize| 0.5 * (dg[j][k][i] + dg[i][k][j] - dg[i][j][k]);
    let mut gam = vec![vec![vec![0.0; d]; d]; d];
    for m in 0..d {
        for i in 0..d {
            for j in 0..d {
                gam[m][i][j] = (0..d).map(|k| gi[(m, k)] * low(k, i, j)).sum();
            }
        }
    }
    let scale = g.norm().powi(2);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut r = 0.5
                        * (ddg[i][l][j][k] + ddg[j][k][i][l] - ddg[i][k][j][l] - ddg[j][l][i][k]);
                    for m in 0..d {
                        for q in 0..d {
                            r += g[(m, q)]
                                * (gam[m][j][k] * gam[q][i][l] - gam[m][j][l] * gam[q][i][k]);
                        }
                    }
                    let model = kappa * (g[(i, k)] * g[(j, l)] - g[(i, l)] * g[(j, k)]);
                    worst = worst.max((r - model).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// Sampled volumes and the fitted expansion.
#[derive(Clone, Debug, Serialize)]
pub struct VolumeExpansion {
    pub epsilons: Vec<f64>,
    pub volumes: Vec<f64>,
    /// Coefficient of `ε^{−2}`.
    pub c_minus2: f64,
    /// Coefficient of `log(1/ε)`.
    pub log_coefficient: f64,
    /// Constant term; includes the interior only when `interior` is set.
    pub renormalized: f64,
    /// Coefficients of `ε²` and `ε⁴`.
    pub higher: Vec<f64>,
    pub condition: f64,
    pub fit_residual: f64,
    pub interior: bool,
}

/// Parses `a:b:n` into `n` geometrically spaced values from `a` to `b`.
pub fn parse_eps_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("expected lo:hi:count, got {s:?}")));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad lower bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad upper bound {:?}", parts[1])))?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad count {:?}", parts[2])))?;
    eps_grid(lo, hi, n)
}

pub fn eps_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi < 1.0) || n < 6 {
        return Err(Error::InvalidInput(format!(
            "ε grid needs 0 < lo < hi < 1 and at least 6 samples, got {lo}:{hi}:{n}"
        )));
    }
    let r = (hi / lo).ln();
    Ok((0..n)
        .map(|i| lo * (r * i as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Volumes of `{e^{2Υ}ρ̄ < −ε²/2}` and the least-squares expansion.
///
/// Only the collar `ρ̄ > −ε_max²` is integrated unless the density is an exact
/// polynomial, in which case the whole domain is included and `V` is meaningful.
pub fn volume_expansion(
    rho: &Field,
    upsilon: Option<&[f64]>,
    eps: &[f64],
) -> Result<VolumeExpansion> {
    if rho.weight() != 2 {
        return Err(Error::WeightMismatch(rho.weight(), 2));
    }
    if eps.len() < 6 || eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::InvalidInput(
            "ε grid needs at least 6 values in (0, 1)".into(),
        ));
    }
    let collar = rho.collar().clone();
    let nodes = collar.nodes();
    if let Some(u) = upsilon {
        if u.len() != nodes {
            return Err(Error::GridMismatch);
        }
    }
    let interior = rho.poly().is_some();
    let res = ma_residual_field(rho)?;
    let eps_max = eps.iter().cloned().fold(0.0, f64::max);
    let ups_max = upsilon.map_or(0.0, |u| u.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let level = -eps_max * eps_max * (2.0 * ups_max).exp();
    let radius = collar.radius();

    let (gx, gw) = gauss_legendre(OUTER_POINTS);
    let (ix, iw) = gauss_legendre(INNER_POINTS);
    let per_node: Vec<Vec<f64>> = (0..nodes)
        .into_par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let rs = rho.jet().series_at(p);
            let jplus = res.jet().series_at(p);
            let drs = rs.derivative();
            let r3 = radius[p].powi(3);
            let density = |s: f64| -> Result<f64> {
                let j = jplus.eval(s) - 1.0;
                if j >= 0.0 {
                    return Err(Error::Convexity(
                        "Monge–Ampère determinant is not negative in the collar".into(),
                    ));
                }
                let v = rs.eval(s);
                Ok((-j).sqrt() * (1.0 + s).powi(2) * r3 / (4.0 * v * v))
            };
            let s1 = solve_level(&rs, &drs, level, 0.0)?;
            let mut inner = 0.0;
            if interior {
                let (a, b) = (-1.0, s1);
                for (x, w) in ix.iter().zip(&iw) {
                    let s = 0.5 * (b - a) * x + 0.5 * (b + a);
                    inner += 0.5 * (b - a) * w * density(s)?;
                }
            }
            let shift = upsilon.map_or(0.0, |u| u[p]);
            let v1 = (-2.0 * level).ln();
            let mut out = Vec::with_capacity(eps.len());
            for e in eps {
                // v = log(−2ρ), region −2ρ > ε²e^{−2Υ}
                let v0 = (e * e).ln() - 2.0 * shift;
                let mut acc = 0.0;
                let mut s = s1;
                for q in (0..OUTER_POINTS).rev() {
                    let v = 0.5 * (v1 - v0) * gx[q] + 0.5 * (v1 + v0);
                    s = solve_level(&rs, &drs, -0.5 * v.exp(), s)?;
                    let dsdv = -0.5 * v.exp() / drs.eval(s);
                    acc += 0.5 * (v1 - v0) * gw[q] * density(s)? * dsdv.abs();
                }
                out.push(inner + acc);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let grid = collar.grid();
    let volumes: Vec<f64> = (0..eps.len())
        .map(|k| {
            let vals: Vec<f64> = per_node.iter().map(|v| v[k]).collect();
            grid.integrate(&vals)
        })
        .collect();
    fit_expansion(eps, volumes, interior)
}

/// Newton solve of `ρ(s) = target` starting from `s0`.
fn solve_level(rs: &Series, drs: &Series, target: f64, s0: f64) -> Result<f64> {
    let mut s = s0;
    for _ in 0..60 {
        let f = rs.eval(s) - target;
        let d = drs.eval(s);
        if d <= 0.0 {
            return Err(Error::Convexity(
                "density is not increasing along a collar ray".into(),
            ));
        }
        let step = f / d;
        s -= step;
        if step.abs() < 1e-15 {
            return Ok(s);
        }
    }
    Err(Error::Convexity(format!(
        "level set ρ = {target:e} not found along a ray"
    )))
}

/// Fits `c₋₂ε^{−2} + L log(1/ε) + V + c₂ε² + c₄ε⁴`.
pub fn fit_expansion(eps: &[f64], volumes: Vec<f64>, interior: bool) -> Result<VolumeExpansion> {
    let basis = |e: f64| [e.powi(-2), -e.ln(), 1.0, e * e, e.powi(4)];
    let m = eps.len();
    let a = DMatrix::from_fn(m, 5, |i, j| basis(eps[i])[j]);
    let norms: Vec<f64> = (0..5).map(|j| a.column(j).norm()).collect();
    let scaled = DMatrix::from_fn(m, 5, |i, j| a[(i, j)] / norms[j]);
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !condition.is_finite() || condition > FIT_CONDITION_LIMIT {
        return Err(Error::IllConditioned(condition));
    }
    let b = DVector::from_vec(volumes.clone());
    let y = svd
        .solve(&b, 1e-14)
        .map_err(|_| Error::IllConditioned(condition))?;
    let c: Vec<f64> = (0..5).map(|j| y[j] / norms[j]).collect();
    let fit_residual = (&a * DVector::from_vec(c.clone()) - &b).amax();
    Ok(VolumeExpansion {
        epsilons: eps.to_vec(),
        volumes,
        c_minus2: c[0],
        log_coefficient: c[1],
        renormalized: c[2],
        higher: vec![c[3], c[4]],
        condition,
        fit_residual,
        interior,
    })
}

/// Hyperbolic volume of `{ρ̄ < −ε²/2}` in the unit ball with `ρ̄ = (|x|² − 1)/2`.
pub fn ball_volume(eps: f64) -> f64 {
    let c = (1.0 - eps * eps).sqrt();
    std::f64::consts::PI * (2.0 * c / (eps * eps) - 2.0 * c.atanh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ma_solver::quadric_density;
    use crate::surface::SurfaceSpec;

    #[test]
    fn ball_metric_is_hyperbolic() {
        let p = quadric_density(&SurfaceSpec::ball(2)).unwrap();
        let g0 = blaschke_metric(&p, &[0.0, 0.0, 0.0]).unwrap();
        assert!((g0 - DMatrix::<f64>::identity(3, 3)).amax() < 1e-14);
        let x = [0.3, -0.2, 0.5];
        let g = blaschke_metric(&p, &x).unwrap();
        let q = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
        let klein = DMatrix::from_fn(
            3,
            3,
            |i, j| if i == j { 1.0 / q } else { 0.0 } + x[i] * x[j] / (q * q),
        );
        assert!((g - klein).amax() < 1e-12);
        assert!(constant_curvature_residual(&p, &x, -1.0).unwrap() < 1e-9);
        assert!(constant_curvature_residual(&p, &x, 1.0).unwrap() > 0.1);
        assert!(blaschke_metric(&p, &[1.0, 0.5, 0.0]).is_err());
    }

    #[test]
    fn fit_recovers_closed_form() {
        let eps = eps_grid(0.02, 0.3, 24).unwrap();
        let v: Vec<f64> = eps.iter().map(|e| ball_volume(*e)).collect();
        let fit = fit_expansion(&eps, v, true).unwrap();
        let tp = 2.0 * std::f64::consts::PI;
        assert!((fit.log_coefficient + tp).abs() < 1e-3 * tp);
        assert!((fit.c_minus2 - tp).abs() < 1e-3 * tp);
    }
}
