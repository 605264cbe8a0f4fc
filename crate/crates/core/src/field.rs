//! Homogeneous fields on the ambient cone.
//!
//! A density of weight `w` is stored dehomogenized at ξ⁰ = 1 as a function
//! of the affine point `x`. Near the boundary we use collar coordinates
//! `x = (1+s) R(u) u` with `u ∈ S²`, and a field is a jet in `s` whose
//! coefficients live on the sphere grid. Ambient derivatives follow from
//!
//! ```text
//! ∂_0 F = w F − x·∇F,   ∂_i F = ∂F/∂x^i,
//! ∂_x F = a(u) ∂_s F + (1/((1+s) R)) ∇_u F,   a = (u − ∇_u log R)/R,
//! x·∇F = (1+s) ∂_s F.
//! ```

use std::sync::Arc;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::{Jet, Series};
use crate::poly::Poly;
use crate::sphere::SphereGrid;
use crate::surface::{quadric_radius, SurfaceKind, SurfaceSpec};

/// Number of homogeneous coordinates for the collocation representation (n = 2).
pub const DIM: usize = 4;

/// Boundary grid with its radial map; shared by every field built on it.
#[derive(Debug)]
pub struct Collar {
    grid: SphereGrid,
    storage: usize,
    radius: Vec<f64>,
    log_r_coeffs: Vec<f64>,
    grad_log_r: [Vec<f64>; 3],
    a: [Vec<f64>; 3],
    inv_r: Vec<f64>,
    dirs: Vec<[f64; 3]>,
    inv_q: Series,
}

impl Collar {
    /// Builds the collar over a radial function sampled on the grid.
    pub fn new(grid: SphereGrid, radius: Vec<f64>, storage: usize) -> Result<Self> {
        if radius.len() != grid.len() {
            return Err(Error::InvalidInput(
                "radius samples do not match the grid".into(),
            ));
        }
        if radius.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidInput(
                "radial function must be positive".into(),
            ));
        }
        let log_r: Vec<f64> = radius.iter().map(|r| r.ln()).collect();
        let log_r_coeffs = grid.analyze(&log_r);
        Self::from_parts(grid, radius, log_r_coeffs, storage)
    }

    /// Builds the collar from spherical-harmonic coefficients of `log R`.
    pub fn from_log_radius_coeffs(
        grid: SphereGrid,
        log_r_coeffs: Vec<f64>,
        storage: usize,
    ) -> Result<Self> {
        let radius: Vec<f64> = grid
            .synthesize(&log_r_coeffs)
            .iter()
            .map(|v| v.exp())
            .collect();
        Self::from_parts(grid, radius, log_r_coeffs, storage)
    }

    fn from_parts(
        grid: SphereGrid,
        radius: Vec<f64>,
        log_r_coeffs: Vec<f64>,
        storage: usize,
    ) -> Result<Self> {
        let n = grid.len();
        let grad_log_r = grid.gradient_from_coeffs(&log_r_coeffs);
        let dirs: Vec<[f64; 3]> = (0..n).map(|i| grid.direction(i)).collect();
        let inv_r: Vec<f64> = radius.iter().map(|r| 1.0 / r).collect();
        let mut a = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut worst: f64 = 1.0;
        for p in 0..n {
            for c in 0..3 {
                a[c][p] = (dirs[p][c] - grad_log_r[c][p]) * inv_r[p];
            }
            // Jacobian of (s, tangent) ↦ x at s = 0 in the frame (u, e_θ, e_φ)
            let (et, ep) = grid.frame(p);
            let r = radius[p];
            let gt: f64 = (0..3).map(|c| grad_log_r[c][p] * et[c]).sum::<f64>() * r;
            let gp: f64 = (0..3).map(|c| grad_log_r[c][p] * ep[c]).sum::<f64>() * r;
            let u = dirs[p];
            let col = |k: usize| -> [f64; 3] {
                match k {
                    0 => [r * u[0], r * u[1], r * u[2]],
                    1 => [
                        r * et[0] + gt * u[0],
                        r * et[1] + gt * u[1],
                        r * et[2] + gt * u[2],
                    ],
                    _ => [
                        r * ep[0] + gp * u[0],
                        r * ep[1] + gp * u[1],
                        r * ep[2] + gp * u[2],
                    ],
                }
            };
            let m = Matrix3::from_fn(|i, j| col(j)[i]);
            let sv = m.singular_values();
            let cond = sv.max() / sv.min();
            worst = worst.max(cond);
        }
        if !(worst < 1e8) {
            return Err(Error::SingularCollar(worst));
        }
        Ok(Collar {
            grid,
            storage,
            radius,
            log_r_coeffs,
            grad_log_r,
            a,
            inv_r,
            dirs,
            inv_q: Series::inv_one_plus_s(storage),
        })
    }

    /// Collar over the boundary of a surface spec (n = 2).
    pub fn for_spec(spec: &SurfaceSpec) -> Result<Arc<Self>> {
        if spec.n != 2 {
            return Err(Error::Unsupported(
                "collocation fields are implemented for n = 2".into(),
            ));
        }
        spec.validate()?;
        let grid = SphereGrid::new(spec.grid.lmax)?;
        Self::for_spec_on_grid(spec, grid)
    }

    pub fn for_spec_on_grid(spec: &SurfaceSpec, grid: SphereGrid) -> Result<Arc<Self>> {
        let storage = spec.grid.storage_order();
        let collar = match spec.kind {
            SurfaceKind::StarShaped => {
                let mut c = vec![0.0; grid.n_coeffs()];
                for h in &spec.harmonics {
                    if h.l > grid.lmax() {
                        return Err(Error::InvalidInput(format!(
                            "harmonic degree {} exceeds grid lmax {}",
                            h.l,
                            grid.lmax()
                        )));
                    }
                    c[crate::sphere::lm_index(h.l, h.m)] += h.coeff;
                }
                Self::from_log_radius_coeffs(grid, c, storage)?
            }
            SurfaceKind::Quadric => {
                let a = spec.quadric_matrix()?;
                let radius = (0..grid.len())
                    .map(|p| quadric_radius(&a, &grid.direction(p)))
                    .collect::<Result<Vec<f64>>>()?;
                Self::new(grid, radius, storage)?
            }
        };
        Ok(Arc::new(collar))
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn storage(&self) -> usize {
        self.storage
    }

    pub fn radius(&self) -> &[f64] {
        &self.radius
    }

    pub fn log_radius_coeffs(&self) -> &[f64] {
        &self.log_r_coeffs
    }

    pub fn grad_log_radius(&self) -> &[Vec<f64>; 3] {
        &self.grad_log_r
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.dirs
    }

    /// Affine point at node `p` and collar parameter `s`.
    pub fn point(&self, p: usize, s: f64) -> [f64; 3] {
        let r = (1.0 + s) * self.radius[p];
        let u = self.dirs[p];
        [r * u[0], r * u[1], r * u[2]]
    }

    /// `∂s/∂x` at the boundary nodes.
    pub fn ds_dx(&self) -> &[Vec<f64>; 3] {
        &self.a
    }

    /// Radial function at an arbitrary direction (spectral interpolation of log R).
    pub fn radius_at(&self, dir: [f64; 3]) -> f64 {
        self.grid.evaluate_at(&self.log_r_coeffs, dir).exp()
    }

    /// Collar coordinates `(u, s)` of an affine point.
    pub fn collar_coordinates(&self, x: [f64; 3]) -> ([f64; 3], f64, Vec<f64>) {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let u = [x[0] / r, x[1] / r, x[2] / r];
        let basis = self.grid.basis_at(u);
        let log_r: f64 = basis
            .iter()
            .zip(&self.log_r_coeffs)
            .map(|(b, c)| b * c)
            .sum();
        (u, r / log_r.exp() - 1.0, basis)
    }

    /// Tangential gradient of every jet coefficient.
    pub fn tangential_gradient(&self, jet: &Jet) -> [Jet; 3] {
        let coefs: Vec<[Vec<f64>; 3]> = (0..=jet.order())
            .into_par_iter()
            .map(|k| self.grid.gradient(jet.coef(k)))
            .collect();
        let mk = |c: usize| {
            Jet::from_coefficients(coefs.iter().map(|g| g[c].clone()).collect()).unwrap()
        };
        [mk(0), mk(1), mk(2)]
    }

    /// Cartesian gradient given `∂_s F` (already at the target order) and `F`.
    fn cartesian_from(&self, ds: &Jet, jet: &Jet) -> [Jet; 3] {
        let order = ds.order();
        let tang = self.tangential_gradient(&jet.truncate(order));
        let inv_q = self.inv_q.truncate(order);
        let mk = |c: usize| -> Jet {
            let t = tang[c].mul_series(&inv_q).mul_nodes(&self.inv_r);
            ds.mul_nodes(&self.a[c]).add(&t)
        };
        [mk(0), mk(1), mk(2)]
    }

    /// Samples a polynomial density (ξ⁰ = 1) onto the collar at storage order.
    pub fn sample_poly(&self, poly: &Poly) -> Result<Jet> {
        if poly.nvars() != DIM {
            return Err(Error::InvalidInput(format!(
                "expected a polynomial in {DIM} variables"
            )));
        }
        let n = self.nodes();
        let k_max = self.storage;
        let mut jet = Jet::zeros(k_max, n);
        for (e, c) in poly.terms() {
            if e[1..].iter().any(|k| *k < 0) {
                return Err(Error::InvalidInput(
                    "negative exponent on an affine coordinate".into(),
                ));
            }
            let d = e[1..].iter().sum::<i32>() as usize;
            let binom: Vec<f64> = (0..=k_max.min(d)).map(|k| binomial(d, k)).collect();
            for p in 0..n {
                let r = self.radius[p];
                let u = self.dirs[p];
                let mono =
                    c * (r * u[0]).powi(e[1]) * (r * u[1]).powi(e[2]) * (r * u[2]).powi(e[3]);
                for (k, b) in binom.iter().enumerate() {
                    jet.coef_mut(k)[p] += mono * b;
                }
            }
        }
        Ok(jet)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// Collocation representation of a homogeneous density.
///
/// `degree = Some(d)` marks a jet that is an exact polynomial of degree `d`
/// in `s` (coefficients above `d` vanish); such jets are stored at the
/// collar's storage order and keep their full order under differentiation
/// in `s`. Otherwise the jet is a truncation valid through its order.
#[derive(Clone, Debug)]
pub struct Field {
    weight: i32,
    jet: Jet,
    degree: Option<usize>,
    poly: Option<Arc<Poly>>,
    collar: Arc<Collar>,
}

impl Field {
    pub fn from_jet(collar: &Arc<Collar>, jet: Jet, weight: i32) -> Result<Self> {
        if jet.nodes() != collar.nodes() {
            return Err(Error::GridMismatch);
        }
        let jet = jet.truncate(collar.storage());
        Ok(Field {
            weight,
            jet,
            degree: None,
            poly: None,
            collar: collar.clone(),
        })
    }

    /// A jet declared to be an exact polynomial in `s` (missing coefficients are zero).
    pub fn complete_from_jet(collar: &Arc<Collar>, jet: Jet, weight: i32) -> Result<Self> {
        if jet.nodes() != collar.nodes() {
            return Err(Error::GridMismatch);
        }
        let s = collar.storage();
        let degree = jet.order().min(s);
        Ok(Field {
            weight,
            jet: jet.promote(s),
            degree: Some(degree),
            poly: None,
            collar: collar.clone(),
        })
    }

    /// Exact polynomial density; the weight is the homogeneous degree.
    pub fn from_poly(collar: &Arc<Collar>, poly: Poly) -> Result<Self> {
        let w = poly
            .homogeneous_degree()
            .ok_or_else(|| Error::InvalidInput("polynomial is not homogeneous".into()))?;
        Self::from_poly_with_weight(collar, poly, w)
    }

    pub fn from_poly_with_weight(collar: &Arc<Collar>, poly: Poly, weight: i32) -> Result<Self> {
        if let Some(d) = poly.homogeneous_degree() {
            if d != weight {
                return Err(Error::WeightMismatch(d, weight));
            }
        } else if !poly.is_zero() {
            return Err(Error::InvalidInput("polynomial is not homogeneous".into()));
        }
        let jet = collar.sample_poly(&poly)?;
        let d = poly.affine_degree();
        let degree = (d <= collar.storage()).then_some(d);
        Ok(Field {
            weight,
            jet,
            degree,
            poly: Some(Arc::new(poly)),
            collar: collar.clone(),
        })
    }

    /// Extension constant along rays of the chart (all higher jets vanish).
    pub fn ray_constant(collar: &Arc<Collar>, values: &[f64], weight: i32) -> Result<Self> {
        if values.len() != collar.nodes() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite boundary values".into()));
        }
        let jet = Jet::from_boundary(values, collar.storage());
        Ok(Field {
            weight,
            jet,
            degree: Some(0),
            poly: None,
            collar: collar.clone(),
        })
    }

    pub fn constant(collar: &Arc<Collar>, c: f64, weight: i32) -> Self {
        let jet = Jet::constant(collar.storage(), collar.nodes(), c);
        Field {
            weight,
            jet,
            degree: Some(0),
            poly: None,
            collar: collar.clone(),
        }
    }

    pub fn zero(collar: &Arc<Collar>, weight: i32) -> Self {
        Self::constant(collar, 0.0, weight)
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    pub fn jet(&self) -> &Jet {
        &self.jet
    }

    pub fn order(&self) -> usize {
        self.jet.order()
    }

    pub fn is_complete(&self) -> bool {
        self.degree.is_some()
    }

    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    pub fn poly(&self) -> Option<&Poly> {
        self.poly.as_deref()
    }

    pub fn collar(&self) -> &Arc<Collar> {
        &self.collar
    }

    pub fn boundary(&self) -> &[f64] {
        self.jet.boundary()
    }

    pub fn with_weight(mut self, weight: i32) -> Self {
        self.weight = weight;
        self.poly = None;
        self
    }

    fn same_collar(&self, o: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.collar, &o.collar) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn add(&self, o: &Field) -> Result<Field> {
        self.same_collar(o)?;
        if self.weight != o.weight {
            return Err(Error::WeightMismatch(self.weight, o.weight));
        }
        if let (Some(p), Some(q)) = (&self.poly, &o.poly) {
            return Field::from_poly_with_weight(&self.collar, p.add(q), self.weight);
        }
        let degree = match (self.degree, o.degree) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(Field {
            weight: self.weight,
            jet: self.jet.add(&o.jet),
            degree,
            poly: None,
            collar: self.collar.clone(),
        })
    }

    pub fn sub(&self, o: &Field) -> Result<Field> {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Field {
        Field {
            weight: self.weight,
            jet: self.jet.scale(c),
            degree: self.degree,
            poly: self.poly.as_ref().map(|p| Arc::new(p.scale(c))),
            collar: self.collar.clone(),
        }
    }

    pub fn mul(&self, o: &Field) -> Result<Field> {
        self.same_collar(o)?;
        let weight = self.weight + o.weight;
        if let (Some(p), Some(q)) = (&self.poly, &o.poly) {
            return Field::from_poly_with_weight(&self.collar, p.mul(q), weight);
        }
        let jet = self.jet.mul(&o.jet);
        let degree = match (self.degree, o.degree) {
            (Some(a), Some(b)) if a + b <= self.collar.storage() => Some(a + b),
            _ => None,
        };
        Ok(Field {
            weight,
            jet,
            degree,
            poly: None,
            collar: self.collar.clone(),
        })
    }

    pub fn powi(&self, m: usize) -> Result<Field> {
        let mut out = Field::constant(&self.collar, 1.0, 0);
        for _ in 0..m {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Product with a weight-0 function constant along rays.
    pub fn mul_boundary(&self, values: &[f64]) -> Field {
        Field {
            weight: self.weight,
            jet: self.jet.mul_nodes(values),
            degree: self.degree,
            poly: None,
            collar: self.collar.clone(),
        }
    }

    /// Declares the stored jet to be exact: missing coefficients are zero.
    /// Used when a construction is free to choose the higher jets.
    pub fn into_complete(self) -> Field {
        let s = self.collar.storage();
        let degree = Some(self.jet.order().min(s));
        Field {
            jet: self.jet.promote(s),
            degree,
            poly: None,
            ..self
        }
    }

    /// Truncates to a lower order (drops exactness).
    pub fn truncate(&self, order: usize) -> Field {
        Field {
            jet: self.jet.truncate(order),
            degree: None,
            poly: None,
            ..self.clone()
        }
    }

    /// `self / d` for a numerator vanishing on `M`, `d` a defining function.
    pub fn div_vanishing(&self, d: &Field) -> Result<Field> {
        self.same_collar(d)?;
        let weight = self.weight - d.weight;
        if self.poly.as_ref().is_some_and(|p| p.is_zero()) {
            return Field::from_poly_with_weight(&self.collar, Poly::zero(DIM), weight);
        }
        let jet = self.jet.div_vanishing(&d.jet)?;
        Ok(Field {
            weight,
            jet,
            degree: None,
            poly: None,
            collar: self.collar.clone(),
        })
    }

    /// Coefficient of `s^k` (zero above the stored order of a complete field).
    pub fn coefficient(&self, k: usize) -> Result<Vec<f64>> {
        if k <= self.order() {
            Ok(self.jet.coef(k).to_vec())
        } else if self.is_complete() {
            Ok(vec![0.0; self.collar.nodes()])
        } else {
            Err(Error::JetExhausted {
                need: k,
                have: self.order(),
            })
        }
    }

    /// `∂_s` of the representing function.
    pub fn ds(&self) -> Jet {
        if self.degree.is_some() {
            self.jet.ds_complete()
        } else {
            self.jet.ds()
        }
    }

    /// Cartesian gradient in the chart (weight is not tracked).
    pub fn cartesian_gradient(&self) -> Result<[Jet; 3]> {
        if self.degree.is_none() && self.jet.order() == 0 {
            return Err(Error::JetExhausted { need: 1, have: 0 });
        }
        let ds = self.ds();
        Ok(self.collar.cartesian_from(&ds, &self.jet))
    }

    /// `x·∇F = (1+s) ∂_s F`.
    pub fn euler_radial(&self) -> Result<Jet> {
        if self.degree.is_none() && self.jet.order() == 0 {
            return Err(Error::JetExhausted { need: 1, have: 0 });
        }
        let ds = self.ds();
        Ok(ds.add(&ds.mul_s()))
    }

    /// Ambient gradient `∂_I F`, I = 0..3, each of weight `w − 1`.
    pub fn ambient_derivative(&self) -> Result<Vec<Field>> {
        if let Some(p) = &self.poly {
            return (0..DIM)
                .map(|i| {
                    Field::from_poly_with_weight(&self.collar, p.derivative(i), self.weight - 1)
                })
                .collect();
        }
        if self.degree.is_none() && self.jet.order() == 0 {
            return Err(Error::JetExhausted { need: 1, have: 0 });
        }
        let ds = self.ds();
        let order = ds.order();
        let euler = ds.add(&ds.mul_s());
        let d0 = self
            .jet
            .truncate(order)
            .scale(self.weight as f64)
            .sub(&euler);
        let grad = self.collar.cartesian_from(&ds, &self.jet);
        let w = self.weight - 1;
        let mut out = Vec::with_capacity(DIM);
        out.push(Field {
            weight: w,
            jet: d0,
            degree: self.degree,
            poly: None,
            collar: self.collar.clone(),
        });
        for g in grad {
            out.push(Field {
                weight: w,
                jet: g,
                degree: None,
                poly: None,
                collar: self.collar.clone(),
            });
        }
        Ok(out)
    }

    /// Symmetric matrix `∂_I ∂_J F` (averaged over the two orders of differentiation).
    pub fn ambient_hessian(&self) -> Result<Vec<Vec<Field>>> {
        let d1 = self.ambient_derivative()?;
        let d2: Vec<Vec<Field>> = d1
            .iter()
            .map(|f| f.ambient_derivative())
            .collect::<Result<_>>()?;
        symmetrize2(&d2)
    }

    /// Euler residual `ξ^I ∂_I F − w F` (vanishes identically for a homogeneous field).
    pub fn euler_residual(&self) -> Result<Jet> {
        let d = self.ambient_derivative()?;
        // ξ = (1, x) at ξ⁰ = 1 and x·∇F = (1+s)∂_sF
        let xgrad = self.euler_radial()?;
        let lhs = d[0].jet.add(&xgrad);
        Ok(lhs.sub(&self.jet.scale(self.weight as f64)))
    }
}

/// Combines numerically equal representatives of one quantity: keeps those
/// valid to the highest order (exact ones first) and averages them.
pub fn best_of(items: &[Field]) -> Result<Field> {
    let rank = |f: &Field| {
        if f.is_complete() || f.poly().is_some() {
            usize::MAX
        } else {
            f.order()
        }
    };
    let top = items
        .iter()
        .map(rank)
        .max()
        .ok_or_else(|| Error::InvalidInput("nothing to combine".into()))?;
    let chosen: Vec<&Field> = items.iter().filter(|f| rank(f) == top).collect();
    let mut acc = chosen[0].clone();
    for f in &chosen[1..] {
        acc = acc.add(f)?;
    }
    Ok(if chosen.len() > 1 {
        acc.scale(1.0 / chosen.len() as f64)
    } else {
        acc
    })
}

/// Symmetrizes `m[i][j]` and `m[j][i]` with [`best_of`].
pub fn symmetrize2(m: &[Vec<Field>]) -> Result<Vec<Vec<Field>>> {
    let n = m.len();
    let mut out = m.to_vec();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = best_of(&[m[i][j].clone(), m[j][i].clone()])?;
            out[i][j] = v.clone();
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// A density in either representation.
#[derive(Clone, Debug)]
pub enum HomogeneousField {
    Polynomial { weight: i32, poly: Poly },
    Collocation(Field),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Mul,
}

impl HomogeneousField {
    pub fn polynomial(poly: Poly) -> Result<Self> {
        let weight = poly
            .homogeneous_degree()
            .ok_or_else(|| Error::InvalidInput("polynomial is not homogeneous".into()))?;
        Ok(HomogeneousField::Polynomial { weight, poly })
    }

    pub fn weight(&self) -> i32 {
        match self {
            HomogeneousField::Polynomial { weight, .. } => *weight,
            HomogeneousField::Collocation(f) => f.weight(),
        }
    }

    /// `add` needs equal weights; `mul` adds weights.
    pub fn arith(&self, other: &HomogeneousField, op: ArithOp) -> Result<HomogeneousField> {
        match (self, other) {
            (
                HomogeneousField::Polynomial {
                    weight: w1,
                    poly: p1,
                },
                HomogeneousField::Polynomial {
                    weight: w2,
                    poly: p2,
                },
            ) => match op {
                ArithOp::Add => {
                    if w1 != w2 {
                        return Err(Error::WeightMismatch(*w1, *w2));
                    }
                    Ok(HomogeneousField::Polynomial {
                        weight: *w1,
                        poly: p1.add(p2),
                    })
                }
                ArithOp::Mul => Ok(HomogeneousField::Polynomial {
                    weight: w1 + w2,
                    poly: p1.mul(p2),
                }),
            },
            (HomogeneousField::Collocation(a), HomogeneousField::Collocation(b)) => match op {
                ArithOp::Add => Ok(HomogeneousField::Collocation(a.add(b)?)),
                ArithOp::Mul => Ok(HomogeneousField::Collocation(a.mul(b)?)),
            },
            _ => Err(Error::InvalidInput(
                "cannot combine polynomial and collocation fields".into(),
            )),
        }
    }

    pub fn scale(&self, c: f64) -> HomogeneousField {
        match self {
            HomogeneousField::Polynomial { weight, poly } => HomogeneousField::Polynomial {
                weight: *weight,
                poly: poly.scale(c),
            },
            HomogeneousField::Collocation(f) => HomogeneousField::Collocation(f.scale(c)),
        }
    }

    pub fn ambient_derivative(&self) -> Result<Vec<HomogeneousField>> {
        match self {
            HomogeneousField::Polynomial { weight, poly } => Ok((0..poly.nvars())
                .map(|i| HomogeneousField::Polynomial {
                    weight: weight - 1,
                    poly: poly.derivative(i),
                })
                .collect()),
            HomogeneousField::Collocation(f) => Ok(f
                .ambient_derivative()?
                .into_iter()
                .map(HomogeneousField::Collocation)
                .collect()),
        }
    }
}

/// Extends boundary values to a weight-`w` field of the given order.
pub fn homogeneous_extend(collar: &Arc<Collar>, values: &[f64], weight: i32) -> Result<Field> {
    Field::ray_constant(collar, values, weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{GridConfig, Harmonic};
    use nalgebra::DMatrix;

    fn ball_poly() -> Poly {
        let mut a = DMatrix::<f64>::identity(4, 4);
        a[(0, 0)] = -1.0;
        Poly::quadric(&a)
    }

    fn perturbed(lmax: usize) -> Arc<Collar> {
        let spec = SurfaceSpec::star_shaped(vec![
            Harmonic {
                l: 4,
                m: 0,
                coeff: 0.05,
            },
            Harmonic {
                l: 3,
                m: 2,
                coeff: 0.03,
            },
        ])
        .with_grid(GridConfig::new(lmax, 6));
        Collar::for_spec(&spec).unwrap()
    }

    #[test]
    fn poly_sampling_matches_direct_evaluation() {
        let c = perturbed(12);
        let p = ball_poly()
            .mul(&Poly::var(4, 2))
            .add(&Poly::monomial(vec![0, 1, 1, 1], 0.7));
        let f = Field::from_poly(&c, p.clone()).unwrap();
        for node in (0..c.nodes()).step_by(29) {
            for &s in &[0.0, 0.03, -0.05] {
                let x = c.point(node, s);
                let direct = p.eval_affine(&x);
                let jet_val = f.jet().series_at(node).eval(s);
                assert!((direct - jet_val).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn collocation_gradient_matches_polynomial_gradient() {
        let c = perturbed(32);
        let p = ball_poly()
            .mul(&Poly::var(4, 1))
            .add(&Poly::monomial(vec![1, 0, 2, 0], 0.3));
        let exact = Field::from_poly(&c, p.clone()).unwrap();
        // same data without the polynomial attached
        let numeric = Field::complete_from_jet(&c, exact.jet().clone(), 3).unwrap();
        let d_exact = exact.ambient_derivative().unwrap();
        let d_num = numeric.ambient_derivative().unwrap();
        for i in 0..DIM {
            for k in 0..=4 {
                let a = d_exact[i].jet().coef(k);
                let b = d_num[i].jet().coef(k);
                let err = a
                    .iter()
                    .zip(b)
                    .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                assert!(err < 1e-10, "component {i}, order {k}: {err}");
            }
        }
    }

    #[test]
    fn euler_identity_for_weight_two_field() {
        let c = perturbed(16);
        let y = c.grid().harmonic(3, 1);
        let f = Field::ray_constant(&c, &y, 2).unwrap();
        let g = f
            .mul(&Field::from_poly(&c, ball_poly()).unwrap().with_weight(2))
            .unwrap()
            .with_weight(2);
        let res = g.euler_residual().unwrap();
        assert!(res.max_abs() < 1e-12);
    }

    #[test]
    fn ray_constant_round_trip() {
        let c = perturbed(10);
        let y = c.grid().harmonic(1, 0);
        let f = homogeneous_extend(&c, &y, 2).unwrap();
        assert_eq!(f.boundary(), &y[..]);
        for k in 1..=f.order() {
            assert_eq!(f.jet().max_abs_coef(k), 0.0);
        }
    }

    #[test]
    fn add_requires_equal_weights() {
        let c = perturbed(8);
        let a = Field::constant(&c, 1.0, 0);
        let b = Field::constant(&c, 1.0, 2);
        assert!(matches!(a.add(&b), Err(Error::WeightMismatch(0, 2))));
        let other = perturbed(8);
        let d = Field::constant(&other, 1.0, 0);
        assert!(matches!(a.add(&d), Err(Error::GridMismatch)));
    }

    #[test]
    fn polynomial_representation_arith() {
        let r = HomogeneousField::polynomial(ball_poly()).unwrap();
        let r2 = r.arith(&r, ArithOp::Mul).unwrap();
        assert_eq!(r2.weight(), 4);
        if let HomogeneousField::Polynomial { poly, .. } = &r2 {
            assert!((poly.eval(&[1.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-15);
        }
        let d = r.ambient_derivative().unwrap();
        if let HomogeneousField::Polynomial { poly, .. } = &d[0] {
            assert!((poly.eval(&[2.0, 0.0, 0.0, 0.0]) + 2.0).abs() < 1e-15);
        }
    }
}
