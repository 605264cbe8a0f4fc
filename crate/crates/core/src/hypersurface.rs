//! Boundary affine geometry of `M = {ρ̄ = 0}`: affine normal, affine metric,
//! Fubini–Pick form, shape operator and transverse curvature, in the flat
//! affine scale of the chart or in a rescaled scale `τ̂ = e^{−Υ}τ`.
//!
//! With `ρ = ρ̄/τ²` and the projectively changed connection `∇̂`
//!
//! ```text
//! H = ∇dρ,  ξ = H⁻¹dρ / (dρ·H⁻¹dρ),  h = H|TM,  S = ∇ξ|TM,
//! A = ½ ∇H|TM,  r = H(ξ, ξ).
//! ```
//!
//! Tensors on `M` are pulled back to S² through `u ↦ R(u)u` and stored as
//! Cartesian tangent tensors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Collar, Field};
use crate::jet::Jet;
use crate::poly::Poly;
use crate::tangent::{MetricCalculus, TensorField};

#[derive(Clone, Debug)]
pub struct BoundaryGeometry {
    pub n: usize,
    collar: Arc<Collar>,
    /// `Υ` on M when the scale is `e^{−Υ}` times the flat one.
    pub upsilon: Option<Vec<f64>>,
    pub h: TensorField,
    pub a: TensorField,
    /// Shape operator lowered with `h`, symmetrized.
    pub s: TensorField,
    pub r: Vec<f64>,
    /// Affine normal in chart components.
    pub xi: Vec<[f64; 3]>,
    /// Projective Schouten tensor of the scale restricted to `TM`.
    pub schouten: TensorField,
    /// Largest `|S_αβ − S_βα|`.
    pub s_asymmetry: f64,
    /// Largest relative defect of `ξ ⌟ τ^{−(n+2)} = vol_h`.
    pub volume_defect: f64,
}

/// Sup-norm residuals of the boundary identities.
#[derive(Clone, Debug, serde::Serialize)]
pub struct IdentityResiduals {
    pub pab: f64,
    pub r_m: f64,
    /// `r − trS/n` and `r − (scal − |A|²)/(n(n−1))`, reported in the flat scale.
    pub r_trs: Option<(f64, f64)>,
    pub a_trace: f64,
    pub s_asymmetry: f64,
    pub volume_defect: f64,
    /// `max(|h|, |S|, |Ric|)` for relative comparisons.
    pub field_scale: f64,
}

#[derive(Clone, Debug)]
struct NodeJets {
    d1: Vec<[f64; 3]>,
    d2: Vec<[f64; 9]>,
    d3: Vec<[f64; 27]>,
}

fn sym2(m: &mut [f64; 9]) {
    for i in 0..3 {
        for j in (i + 1)..3 {
            let v = 0.5 * (m[i * 3 + j] + m[j * 3 + i]);
            m[i * 3 + j] = v;
            m[j * 3 + i] = v;
        }
    }
}

fn sym3(t: &[f64; 27]) -> [f64; 27] {
    let mut out = [0.0; 27];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let v = t[(i * 3 + j) * 3 + k]
                    + t[(i * 3 + k) * 3 + j]
                    + t[(j * 3 + i) * 3 + k]
                    + t[(j * 3 + k) * 3 + i]
                    + t[(k * 3 + i) * 3 + j]
                    + t[(k * 3 + j) * 3 + i];
                out[(i * 3 + j) * 3 + k] = v / 6.0;
            }
        }
    }
    out
}

fn gradient_jets(collar: &Arc<Collar>, jets: &[Jet], keep: usize) -> Result<Vec<Jet>> {
    let out: Vec<Result<[Jet; 3]>> = jets
        .par_iter()
        .map(|j| Field::from_jet(collar, j.truncate(keep.min(j.order())), 0)?.cartesian_gradient())
        .collect();
    let mut flat = Vec::with_capacity(jets.len() * 3);
    for g in out {
        flat.extend(g?);
    }
    Ok(flat)
}

/// Cartesian derivatives of orders 1..=3 of a chart function at `s = 0`.
fn chart_derivatives(f: &Field) -> Result<NodeJets> {
    let collar = f.collar().clone();
    let g1: Vec<Jet> = f.cartesian_gradient()?.to_vec();
    let g2 = gradient_jets(&collar, &g1, 2)?;
    let g3 = gradient_jets(&collar, &g2, 1)?;
    let n = collar.nodes();
    let mut d1 = vec![[0.0; 3]; n];
    let mut d2 = vec![[0.0; 9]; n];
    let mut d3 = vec![[0.0; 27]; n];
    for p in 0..n {
        for i in 0..3 {
            d1[p][i] = g1[i].boundary()[p];
        }
        for i in 0..9 {
            d2[p][i] = g2[i].boundary()[p];
        }
        for i in 0..27 {
            d3[p][i] = g3[i].boundary()[p];
        }
        sym2(&mut d2[p]);
        d3[p] = sym3(&d3[p]);
    }
    Ok(NodeJets { d1, d2, d3 })
}

/// First and second Cartesian derivatives of the ray-constant extension of `Υ`.
fn upsilon_derivatives(
    collar: &Arc<Collar>,
    upsilon: &[f64],
) -> Result<(Vec<[f64; 3]>, Vec<[f64; 9]>)> {
    let f = Field::ray_constant(collar, upsilon, 0)?;
    let g1: Vec<Jet> = f.cartesian_gradient()?.to_vec();
    let g2 = gradient_jets(collar, &g1, 1)?;
    let n = collar.nodes();
    let mut d1 = vec![[0.0; 3]; n];
    let mut d2 = vec![[0.0; 9]; n];
    for p in 0..n {
        for i in 0..3 {
            d1[p][i] = g1[i].boundary()[p];
        }
        for i in 0..9 {
            d2[p][i] = g2[i].boundary()[p];
        }
        sym2(&mut d2[p]);
    }
    Ok((d1, d2))
}

/// Differential of `u ↦ R(u)u` on tangent vectors: `J = u ∇Rᵀ + R(I − uuᵀ)`.
fn jacobian(collar: &Collar, p: usize) -> Matrix3<f64> {
    let u = collar.directions()[p];
    let r = collar.radius()[p];
    let gl = collar.grad_log_radius();
    let mut j = Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let proj = if a == b { 1.0 } else { 0.0 } - u[a] * u[b];
            j[(a, b)] = u[a] * r * gl[b][p] + r * proj;
        }
    }
    j
}

fn pull2(j: &Matrix3<f64>, m: &Matrix3<f64>) -> Vec<f64> {
    let t = j.transpose() * m * j;
    let mut out = vec![0.0; 9];
    for a in 0..3 {
        for b in 0..3 {
            out[a * 3 + b] = 0.5 * (t[(a, b)] + t[(b, a)]);
        }
    }
    out
}

fn pull3(j: &Matrix3<f64>, t: &[f64; 27]) -> Vec<f64> {
    let mut out = vec![0.0; 27];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for i in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            acc += t[(i * 3 + k) * 3 + l] * j[(i, a)] * j[(k, b)] * j[(l, c)];
                        }
                    }
                }
                out[(a * 3 + b) * 3 + c] = acc;
            }
        }
    }
    out
}

struct NodeGeometry {
    h: Vec<f64>,
    a: Vec<f64>,
    s: Vec<f64>,
    s_asym: f64,
    r: f64,
    xi: [f64; 3],
    schouten: Vec<f64>,
    vol_defect: f64,
}

fn node_geometry(
    collar: &Collar,
    p: usize,
    jets: &NodeJets,
    ups: Option<(&[f64; 3], &[f64; 9], f64)>,
) -> Result<NodeGeometry> {
    let d1 = Vector3::from_column_slice(&jets.d1[p]);
    let d2 = Matrix3::from_row_slice(&jets.d2[p]);
    let d3 = &jets.d3[p];
    let (up, upp, uval) = match ups {
        Some((a, b, v)) => (Vector3::from_column_slice(a), Matrix3::from_row_slice(b), v),
        None => (Vector3::zeros(), Matrix3::zeros(), 0.0),
    };
    let hh = d2 - up * d1.transpose() - d1 * up.transpose();
    // ∂_k Ĥ_ij stored at [i][j][k]
    let mut dh = [0.0; 27];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                dh[(i * 3 + j) * 3 + k] = d3[(i * 3 + j) * 3 + k]
                    - upp[(k, i)] * d1[j]
                    - up[i] * d2[(k, j)]
                    - d2[(k, i)] * up[j]
                    - d1[i] * upp[(k, j)];
            }
        }
    }
    let hinv = hh
        .try_inverse()
        .ok_or_else(|| Error::Convexity("ambient Hessian of ρ is singular on M".into()))?;
    let v = hinv * d1;
    let c = d1.dot(&v);
    if !(c.abs() > 1e-14) {
        return Err(Error::Convexity("affine normal is undefined".into()));
    }
    let xi = v / c;
    let mut dxi = Matrix3::zeros();
    for k in 0..3 {
        let mut dhk = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                dhk[(i, j)] = dh[(i * 3 + j) * 3 + k];
            }
        }
        let col = d2.column(k).into_owned();
        let dv = hinv * (col - dhk * v);
        let dc = col.dot(&v) + d1.dot(&dv);
        let dxk = dv / c - v * (dc / (c * c));
        for i in 0..3 {
            dxi[(i, k)] = dxk[i];
        }
    }
    let upxi = up.dot(&xi);
    let mut shape = dxi + xi * up.transpose();
    for i in 0..3 {
        shape[(i, i)] += upxi;
    }
    let mut nab = [0.0; 27];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                nab[(k * 3 + i) * 3 + j] = dh[(i * 3 + j) * 3 + k]
                    - 2.0 * up[k] * hh[(i, j)]
                    - up[i] * hh[(k, j)]
                    - up[j] * hh[(i, k)];
            }
        }
    }
    let a3: Vec<f64> = sym3(&nab).iter().map(|v| 0.5 * v).collect();
    let a3: [f64; 27] = a3.try_into().unwrap();
    let jac = jacobian(collar, p);
    let h = pull2(&jac, &hh);
    let slow_raw = jac.transpose() * shape.transpose() * hh * jac;
    let mut s_asym = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            s_asym = s_asym.max((slow_raw[(a, b)] - slow_raw[(b, a)]).abs());
        }
    }
    let s = pull2(&jac, &(shape.transpose() * hh));
    let a = pull3(&jac, &a3);
    let r = xi.dot(&(hh * xi));
    let p3 = -upp + up * up.transpose();
    let schouten = pull2(&jac, &p3);
    let (et, ep) = collar.grid().frame(p);
    let (et, ep) = (
        Vector3::from_column_slice(&et),
        Vector3::from_column_slice(&ep),
    );
    let (jt, jp) = (jac * et, jac * ep);
    let vol_form = Matrix3::from_columns(&[xi, jt, jp]).determinant().abs() * (4.0 * uval).exp();
    let hm = Matrix3::from_row_slice(&h);
    let g2 = [
        [et.dot(&(hm * et)), et.dot(&(hm * ep))],
        [ep.dot(&(hm * et)), ep.dot(&(hm * ep))],
    ];
    let sqrt_det = (g2[0][0] * g2[1][1] - g2[0][1] * g2[1][0]).sqrt();
    if !(g2[0][0] > 0.0 && sqrt_det > 0.0) {
        return Err(Error::Convexity(
            "affine metric is not positive definite".into(),
        ));
    }
    Ok(NodeGeometry {
        h,
        a,
        s,
        s_asym,
        r,
        xi: [xi[0], xi[1], xi[2]],
        schouten,
        vol_defect: (vol_form - sqrt_det).abs() / sqrt_det,
    })
}

/// Boundary geometry of a weight-2 density in the flat scale, or in the
/// scale `e^{−Υ}τ` when `upsilon` is given (Υ extended constant along rays).
pub fn boundary_geometry(rho: &Field, upsilon: Option<&[f64]>) -> Result<BoundaryGeometry> {
    if rho.weight() != 2 {
        return Err(Error::WeightMismatch(rho.weight(), 2));
    }
    let collar = rho.collar().clone();
    let n = collar.nodes();
    let (chart, ups) = match upsilon {
        Some(u) => {
            if u.len() != n {
                return Err(Error::GridMismatch);
            }
            let e2: Vec<f64> = u.iter().map(|v| (2.0 * v).exp()).collect();
            let rho_hat = rho.mul(&Field::ray_constant(&collar, &e2, 0)?)?;
            (rho_hat, Some(upsilon_derivatives(&collar, u)?))
        }
        None => (rho.clone(), None),
    };
    let jets = chart_derivatives(&chart)?;
    let nodes: Vec<Result<NodeGeometry>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let u = ups
                .as_ref()
                .map(|(d1, d2)| (&d1[p], &d2[p], upsilon.unwrap()[p]));
            node_geometry(&collar, p, &jets, u)
        })
        .collect();
    let nodes: Vec<NodeGeometry> = nodes.into_iter().collect::<Result<_>>()?;
    Ok(BoundaryGeometry {
        n: 2,
        upsilon: upsilon.map(|u| u.to_vec()),
        h: TensorField::from_fn(2, n, |p| nodes[p].h.clone()),
        a: TensorField::from_fn(3, n, |p| nodes[p].a.clone()),
        s: TensorField::from_fn(2, n, |p| nodes[p].s.clone()),
        r: nodes.iter().map(|g| g.r).collect(),
        xi: nodes.iter().map(|g| g.xi).collect(),
        schouten: TensorField::from_fn(2, n, |p| nodes[p].schouten.clone()),
        s_asymmetry: nodes.iter().map(|g| g.s_asym).fold(0.0, f64::max),
        volume_defect: nodes.iter().map(|g| g.vol_defect).fold(0.0, f64::max),
        collar,
    })
}

impl BoundaryGeometry {
    pub fn collar(&self) -> &Arc<Collar> {
        &self.collar
    }

    pub fn calculus(&self) -> MetricCalculus<'_> {
        MetricCalculus::new(self.collar.grid(), &self.h)
    }

    pub fn trace_s(&self) -> Vec<f64> {
        self.calculus().trace(&self.s)
    }

    pub fn a_norm2(&self) -> Vec<f64> {
        self.calculus().norm2_3(&self.a)
    }

    /// `δA` with `(δA)_αβ = ∇^h_γ A_αβ^γ`.
    pub fn div_a(&self) -> TensorField {
        self.calculus().divergence3(&self.a)
    }

    pub fn scalar_curvature(&self) -> Vec<f64> {
        let mc = self.calculus();
        mc.trace(&mc.ricci())
    }

    /// Trace-free part of `S`.
    pub fn trace_free_s(&self) -> TensorField {
        let mc = self.calculus();
        let tr = mc.trace(&self.s);
        TensorField::from_fn(2, self.h.nodes(), |p| {
            (0..9)
                .map(|i| self.s.at(p)[i] - 0.5 * tr[p] * self.h.at(p)[i])
                .collect()
        })
    }

    /// `∫_M f vol_h`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.calculus().integrate(f)
    }
}

/// Residuals of `(n−1)P − Ric + δA + AA − S + (trS)h = 0` and of the
/// transverse-curvature identities.
pub fn identity_residuals(bg: &BoundaryGeometry) -> IdentityResiduals {
    let n = bg.n as f64;
    let mc = bg.calculus();
    let ric = mc.ricci();
    let scal = mc.trace(&ric);
    let da = mc.divergence3(&bg.a);
    let aa = mc.contract_aa(&bg.a);
    let trs = mc.trace(&bg.s);
    let a2 = mc.norm2_3(&bg.a);
    let nodes = bg.h.nodes();
    let pab = TensorField::from_fn(2, nodes, |p| {
        (0..9)
            .map(|i| {
                (n - 1.0) * bg.schouten.at(p)[i] - ric.at(p)[i] + da.at(p)[i] + aa.at(p)[i]
                    - bg.s.at(p)[i]
                    + trs[p] * bg.h.at(p)[i]
            })
            .collect()
    });
    let r_m = (0..nodes)
        .map(|p| (bg.r[p] - 2.0 / n * trs[p] + (scal[p] - a2[p]) / (n * (n - 1.0))).abs())
        .fold(0.0, f64::max);
    let r_trs = bg.upsilon.is_none().then(|| {
        let a = (0..nodes)
            .map(|p| (bg.r[p] - trs[p] / n).abs())
            .fold(0.0, f64::max);
        let b = (0..nodes)
            .map(|p| (bg.r[p] - (scal[p] - a2[p]) / (n * (n - 1.0))).abs())
            .fold(0.0, f64::max);
        (a, b)
    });
    let a_trace = mc.trace3(&bg.a).max_norm();
    let field_scale = bg.h.max_norm().max(bg.s.max_norm()).max(ric.max_norm());
    IdentityResiduals {
        pab: pab.max_norm(),
        r_m,
        r_trs,
        a_trace,
        s_asymmetry: bg.s_asymmetry,
        volume_defect: bg.volume_defect,
        field_scale,
    }
}

/// Geometry in the scale `e^{−Υ}τ` from the flat-scale geometry by the
/// transformation rules
///
/// ```text
/// ĥ = e^{2Υ}h,   Â = e^{2Υ}A,   ξ̂ = e^{−2Υ}(ξ − grad_h Υ),
/// ĥ(ŜX,Y) = h(SX,Y) + (ξΥ − |dΥ|²)h + dΥ⊗dΥ − Hess_h Υ + A(X, grad_h Υ, Y),
/// r̂ = e^{−2Υ}(r + 2ξΥ − |dΥ|²).
/// ```
pub fn conformal_rescale(bg: &BoundaryGeometry, upsilon: &[f64]) -> Result<BoundaryGeometry> {
    if bg.upsilon.is_some() {
        return Err(Error::InvalidInput(
            "rescaling is defined from the flat scale".into(),
        ));
    }
    let collar = bg.collar.clone();
    let n = collar.nodes();
    if upsilon.len() != n {
        return Err(Error::GridMismatch);
    }
    let mc = bg.calculus();
    let du = mc.sphere().gradient(upsilon);
    let grad = mc.gradient(upsilon);
    let hess = mc.hessian(upsilon);
    let (d3, dd3) = upsilon_derivatives(&collar, upsilon)?;
    let e2: Vec<f64> = upsilon.iter().map(|v| (2.0 * v).exp()).collect();
    let mut xi_hat = vec![[0.0; 3]; n];
    let mut r_hat = vec![0.0; n];
    let mut s_hat = TensorField::zeros(2, n);
    let mut schouten = TensorField::zeros(2, n);
    for p in 0..n {
        let jac = jacobian(&collar, p);
        let g = grad.at(p);
        let jg = jac * Vector3::new(g[0], g[1], g[2]);
        let xi = bg.xi[p];
        let xiu: f64 = (0..3).map(|i| xi[i] * d3[p][i]).sum();
        let dnorm: f64 = (0..3).map(|i| g[i] * du.at(p)[i]).sum();
        for i in 0..3 {
            xi_hat[p][i] = (xi[i] - jg[i]) / e2[p];
        }
        r_hat[p] = (bg.r[p] + 2.0 * xiu - dnorm) / e2[p];
        let (h, a, s, d) = (bg.h.at(p), bg.a.at(p), bg.s.at(p), du.at(p));
        let out = s_hat.at_mut(p);
        for i in 0..3 {
            for j in 0..3 {
                let ag: f64 = (0..3).map(|k| a[(i * 3 + k) * 3 + j] * g[k]).sum();
                out[i * 3 + j] = s[i * 3 + j] + (xiu - dnorm) * h[i * 3 + j] + d[i] * d[j]
                    - hess.at(p)[i * 3 + j]
                    + ag;
            }
        }
        let up = Vector3::from_column_slice(&d3[p]);
        let p3 = -Matrix3::from_row_slice(&dd3[p]) + up * up.transpose();
        schouten.at_mut(p).copy_from_slice(&pull2(&jac, &p3));
    }
    let scale = |t: &TensorField| {
        TensorField::from_fn(t.rank(), n, |p| t.at(p).iter().map(|v| v * e2[p]).collect())
    };
    Ok(BoundaryGeometry {
        n: bg.n,
        collar,
        upsilon: Some(upsilon.to_vec()),
        h: scale(&bg.h),
        a: scale(&bg.a),
        s: s_hat,
        r: r_hat,
        xi: xi_hat,
        schouten,
        s_asymmetry: bg.s_asymmetry,
        volume_defect: bg.volume_defect,
    })
}

/// Largest differences between two geometries on the same grid.
pub fn geometry_difference(a: &BoundaryGeometry, b: &BoundaryGeometry) -> f64 {
    let dr =
        a.r.iter()
            .zip(&b.r)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
    let dxi =
        a.xi.iter()
            .zip(&b.xi)
            .map(|(x, y)| (0..3).map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
    [
        a.h.sub(&b.h).max_norm(),
        a.a.sub(&b.a).max_norm(),
        a.s.sub(&b.s).max_norm(),
        a.schouten.sub(&b.schouten).max_norm(),
        dr,
        dxi,
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `(∫_M O vol_h, −½ ∫_M |δA|²_h vol_h)` in the flat scale.
pub fn surface_obstruction_check(bg: &BoundaryGeometry, obstruction: &[f64]) -> Result<(f64, f64)> {
    if bg.upsilon.is_some() {
        log::warn!("obstruction check requested in a non-flat scale");
    }
    if obstruction.len() != bg.h.nodes() {
        return Err(Error::GridMismatch);
    }
    let mc = bg.calculus();
    let da = mc.divergence3(&bg.a);
    let da2 = mc.norm2_2(&da);
    Ok((mc.integrate(obstruction), -0.5 * mc.integrate(&da2)))
}

/// Outcome of the Gauss–Codazzi check for a polynomial density.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub enum GaussCodazzi {
    /// The equations are stated for `n ≥ 4` only.
    Degenerate,
    Residuals {
        gauss: f64,
        codazzi: f64,
        points: usize,
    },
}

/// Weyl part of a tensor with curvature symmetries, `R_abcd = h(R(e_a,e_b)e_c, e_d)`.
fn weyl_part(r: &[f64], h: &DMatrix<f64>, hinv: &DMatrix<f64>) -> Vec<f64> {
    let n = h.nrows();
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let mut ric = DMatrix::zeros(n, n);
    for b in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for a in 0..n {
                for d in 0..n {
                    acc += hinv[(a, d)] * r[idx(a, b, c, d)];
                }
            }
            ric[(b, c)] = acc;
        }
    }
    let scal: f64 = (0..n)
        .flat_map(|b| (0..n).map(move |c| (b, c)))
        .map(|(b, c)| hinv[(b, c)] * ric[(b, c)])
        .sum();
    let nf = n as f64;
    let p = (&ric - h * (scal / (2.0 * (nf - 1.0)))) / (nf - 2.0);
    let mut w = r.to_vec();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    w[idx(a, b, c, d)] -= p[(b, c)] * h[(a, d)] + p[(a, d)] * h[(b, c)]
                        - p[(a, c)] * h[(b, d)]
                        - p[(b, d)] * h[(a, c)];
                }
            }
        }
    }
    w
}

fn boundary_points(rho: &Poly, count: usize) -> Result<Vec<DVector<f64>>> {
    let dim = rho.nvars() - 1;
    let mut x0 = vec![1.0];
    x0.extend(std::iter::repeat_n(0.0, dim));
    let grad0 = DVector::from_iterator(dim, (1..=dim).map(|i| rho.derivative(i).eval(&x0)));
    let hess = DMatrix::from_fn(dim, dim, |i, j| {
        rho.derivative(i + 1).derivative(j + 1).eval(&x0)
    });
    let hinv = hess
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Convexity("quadric is degenerate".into()))?;
    let centre = -(&hinv * grad0);
    let mut xc = vec![1.0];
    xc.extend(centre.iter());
    let rc = rho.eval(&xc);
    if !(rc < 0.0) {
        return Err(Error::Convexity(
            "quadric has no interior in the chart".into(),
        ));
    }
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let d = DVector::from_iterator(dim, (0..dim).map(|_| next()));
        if d.norm() < 0.1 {
            continue;
        }
        let q = d.dot(&(&hess * &d));
        let t = (-2.0 * rc / q).sqrt();
        pts.push(&centre + d * t);
    }
    Ok(pts)
}

/// Gauss and Codazzi residuals of the embedded structure at sample points of
/// `{ρ = 0}` for a polynomial density in `n + 2` homogeneous variables.
pub fn gauss_codazzi_residual(rho: &Poly, points: usize) -> Result<GaussCodazzi> {
    let dim = rho.nvars() - 1;
    let n = dim - 1;
    if n < 4 {
        return Ok(GaussCodazzi::Degenerate);
    }
    let d1p: Vec<Poly> = (1..=dim).map(|i| rho.derivative(i)).collect();
    let d2p: Vec<Vec<Poly>> = d1p
        .iter()
        .map(|p| (1..=dim).map(|j| p.derivative(j)).collect())
        .collect();
    let d3p: Vec<Vec<Vec<Poly>>> = d2p
        .iter()
        .map(|r| {
            r.iter()
                .map(|p| (1..=dim).map(|k| p.derivative(k)).collect())
                .collect()
        })
        .collect();
    let mut gauss = 0.0f64;
    let mut codazzi = 0.0f64;
    for x in boundary_points(rho, points)? {
        let mut xh = vec![1.0];
        xh.extend(x.iter());
        let d1 = DVector::from_iterator(dim, d1p.iter().map(|p| p.eval(&xh)));
        let hh = DMatrix::from_fn(dim, dim, |i, j| d2p[i][j].eval(&xh));
        let t3 = |i: usize, j: usize, k: usize| d3p[i][j][k].eval(&xh);
        let t4 = |i: usize, j: usize, k: usize, l: usize| d3p[i][j][k].derivative(l + 1).eval(&xh);
        let hinv = hh
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Convexity("singular Hessian".into()))?;
        let v = &hinv * &d1;
        let c = d1.dot(&v);
        let xi = &v / c;
        // orthonormal basis of ker dρ
        let nrm = d1.normalize();
        let mut frame: Vec<DVector<f64>> = Vec::new();
        for k in 0..dim {
            let mut e = DVector::zeros(dim);
            e[k] = 1.0;
            e -= &nrm * nrm[k];
            for f in &frame {
                let proj = f.dot(&e);
                e -= f * proj;
            }
            if e.norm() > 1e-8 {
                frame.push(e.normalize());
            }
            if frame.len() == n {
                break;
            }
        }
        if frame.len() != n {
            return Err(Error::Convexity("singular tangential frame".into()));
        }
        let e = DMatrix::from_columns(&frame);
        let h = e.transpose() * &hh * &e;
        let hi = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Convexity("degenerate affine metric".into()))?;
        // shape operator S e_a = ∂_{e_a} ξ
        let mut dxi = DMatrix::<f64>::zeros(dim, dim);
        for k in 0..dim {
            let dhk = DMatrix::from_fn(dim, dim, |i, j| t3(i, j, k));
            let col = hh.column(k).into_owned();
            let dv = &hinv * (&col - &dhk * &v);
            let dc = col.dot(&v) + d1.dot(&dv);
            let dx = &dv / c - &v * (dc / (c * c));
            dxi.set_column(k, &dx);
        }
        let s_amb = &dxi * &e;
        let s = e.transpose() * &s_amb;
        let mut tf = vec![0.0; dim * dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    tf[(i * dim + j) * dim + k] = t3(i, j, k);
                }
            }
        }
        let frame_t3 = |a: &DVector<f64>, b: &DVector<f64>, cc: &DVector<f64>| -> f64 {
            let mut acc = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    for k in 0..dim {
                        acc += tf[(i * dim + j) * dim + k] * a[i] * b[j] * cc[k];
                    }
                }
            }
            acc
        };
        let col = |a: usize| e.column(a).into_owned();
        let mut a3 = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    a3[(a * n + b) * n + cc] = 0.5 * frame_t3(&col(a), &col(b), &col(cc));
                }
            }
        }
        let ai = |a: usize, b: usize, cc: usize| a3[(a * n + b) * n + cc];
        // K_X Y with upper index: K^e_{ab}
        let kup = |ee: usize, a: usize, b: usize| -> f64 {
            (0..n).map(|f| hi[(ee, f)] * ai(a, b, f)).sum()
        };
        // Gauss: R(X,Y)Z = ½[h(Y,Z)SX − h(X,Z)SY + h(SY,Z)X − h(SX,Z)Y] − [K_X,K_Y]Z
        let sl = |a: usize, b: usize| -> f64 { (0..n).map(|cc| s[(cc, a)] * h[(cc, b)]).sum() };
        let idx4 = |a: usize, b: usize, cc: usize, d: usize| ((a * n + b) * n + cc) * n + d;
        let mut rt = vec![0.0; n * n * n * n];
        let mut qa = vec![0.0; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        let mut v = 0.5
                            * (h[(b, cc)] * sl(a, d) - h[(a, cc)] * sl(b, d)
                                + sl(b, cc) * h[(a, d)]
                                - sl(a, cc) * h[(b, d)]);
                        for ee in 0..n {
                            v -= ai(a, ee, d) * kup(ee, b, cc) - ai(b, ee, d) * kup(ee, a, cc);
                        }
                        rt[idx4(a, b, cc, d)] = v;
                        let mut q = 0.0;
                        for nu in 0..n {
                            q += ai(nu, cc, a) * kup(nu, b, d) - ai(nu, cc, b) * kup(nu, a, d);
                        }
                        qa[idx4(a, b, cc, d)] = q;
                    }
                }
            }
        }
        let w = weyl_part(&rt, &h, &hi);
        let tq = weyl_part(&qa, &h, &hi);
        for i in 0..w.len() {
            gauss = gauss.max((2.0 * tq[i] + w[i]).abs());
        }
        // Codazzi: ∇^h A from the fourth derivatives of ρ
        let xi_t3 = |b: &DVector<f64>, cc: &DVector<f64>| frame_t3(&xi, b, cc);
        let mut na = vec![0.0; n * n * n * n];
        for d in 0..n {
            for a in 0..n {
                for b in 0..n {
                    for cc in 0..n {
                        let mut q4 = 0.0;
                        let (ed, ea, eb, ec) = (col(d), col(a), col(b), col(cc));
                        for i in 0..dim {
                            for j in 0..dim {
                                for k in 0..dim {
                                    for l in 0..dim {
                                        let w4 = ed[i] * ea[j] * eb[k] * ec[l];
                                        if w4 != 0.0 {
                                            q4 += w4 * t4(i, j, k, l);
                                        }
                                    }
                                }
                            }
                        }
                        let mut v = 0.5
                            * (q4
                                - h[(d, a)] * xi_t3(&eb, &ec)
                                - h[(d, b)] * xi_t3(&ea, &ec)
                                - h[(d, cc)] * xi_t3(&ea, &eb));
                        for ee in 0..n {
                            v -= kup(ee, d, a) * ai(ee, b, cc)
                                + kup(ee, d, b) * ai(a, ee, cc)
                                + kup(ee, d, cc) * ai(a, b, ee);
                        }
                        na[idx4(d, a, b, cc)] = v;
                    }
                }
            }
        }
        let mut da = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                da[(a, b)] = (0..n)
                    .flat_map(|g| (0..n).map(move |d| (g, d)))
                    .map(|(g, d)| hi[(g, d)] * na[idx4(g, a, b, d)])
                    .sum();
            }
        }
        let nf = n as f64;
        for a in 0..n {
            for b in 0..n {
                for g in 0..n {
                    for m in 0..n {
                        let alt = 0.5 * (na[idx4(a, b, g, m)] - na[idx4(b, a, g, m)]);
                        let corr = 0.5
                            * (h[(m, a)] * da[(b, g)] - h[(m, b)] * da[(a, g)]
                                + h[(g, a)] * da[(b, m)]
                                - h[(g, b)] * da[(a, m)])
                            / nf;
                        codazzi = codazzi.max((alt - corr).abs());
                    }
                }
            }
        }
    }
    Ok(GaussCodazzi::Residuals {
        gauss,
        codazzi,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ma_solver::{quadric_density, solve_fefferman};
    use crate::surface::{GridConfig, SurfaceSpec};

    #[test]
    fn ball_flat_scale() {
        let spec = SurfaceSpec::ball(2).with_grid(GridConfig::new(12, 6));
        let fd = solve_fefferman(&spec, 2).unwrap();
        let bg = boundary_geometry(&fd.rho, None).unwrap();
        assert!(bg.a.max_norm() < 1e-12);
        let one = vec![1.0; bg.r.len()];
        assert!(bg.r.iter().all(|r| (r - 1.0).abs() < 1e-12));
        assert!(bg
            .trace_s()
            .iter()
            .zip(&one)
            .all(|(t, _)| (t - 2.0).abs() < 1e-12));
        let res = identity_residuals(&bg);
        assert!(res.pab < 1e-10 && res.r_m < 1e-10, "{res:?}");
        assert!(res.volume_defect < 1e-12);
    }

    #[test]
    fn ball_n4_gauss_codazzi() {
        let p = quadric_density(&SurfaceSpec::ball(4)).unwrap();
        match gauss_codazzi_residual(&p, 4).unwrap() {
            GaussCodazzi::Residuals { gauss, codazzi, .. } => {
                assert!(gauss < 1e-12 && codazzi < 1e-12)
            }
            GaussCodazzi::Degenerate => panic!(),
        }
        let p2 = quadric_density(&SurfaceSpec::ball(2)).unwrap();
        assert_eq!(
            gauss_codazzi_residual(&p2, 4).unwrap(),
            GaussCodazzi::Degenerate
        );
    }
}
