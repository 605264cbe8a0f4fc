//! Fefferman defining densities of the real Monge–Ampère equation
//! `J[ρ̄] = det(D_I D_J ρ̄) = −1`, the obstruction density and the strict
//! normalization.

use std::sync::Arc;

use log::debug;

use crate::ambient::AmbientMetric;
use crate::error::{Error, Result};
use crate::field::{symmetrize2, Collar, Field, HomogeneousField, DIM};
use crate::jet::{Jet, JetMatrix};
use crate::poly::{poly_determinant, Poly};
use crate::surface::{SurfaceKind, SurfaceSpec};

/// `J[ρ̄] + 1` for either representation.
pub fn ma_residual(rho: &HomogeneousField) -> Result<HomogeneousField> {
    match rho {
        HomogeneousField::Polynomial { weight, poly } => {
            if *weight != 2 {
                return Err(Error::WeightMismatch(*weight, 2));
            }
            Ok(HomogeneousField::Polynomial {
                weight: 0,
                poly: ma_residual_poly(poly),
            })
        }
        HomogeneousField::Collocation(f) => {
            Ok(HomogeneousField::Collocation(ma_residual_field(f)?))
        }
    }
}

/// Exact `det(∂∂p) + 1` by cofactor expansion.
pub fn ma_residual_poly(p: &Poly) -> Poly {
    let n = p.nvars();
    let m: Vec<Vec<Poly>> = (0..n)
        .map(|i| (0..n).map(|j| p.derivative(i).derivative(j)).collect())
        .collect();
    poly_determinant(&m).add(&Poly::constant(n, 1.0))
}

pub fn ma_residual_field(rho: &Field) -> Result<Field> {
    if rho.weight() != 2 {
        return Err(Error::WeightMismatch(rho.weight(), 2));
    }
    let g = rho.ambient_hessian()?;
    let one = Field::constant(rho.collar(), 1.0, 0);
    if g.iter().flatten().all(|f| f.poly().is_some()) {
        let m: Vec<Vec<Poly>> = g
            .iter()
            .map(|r| r.iter().map(|f| f.poly().unwrap().clone()).collect())
            .collect();
        let det = poly_determinant(&m).add(&Poly::constant(DIM, 1.0));
        return Field::from_poly_with_weight(rho.collar(), det, 0);
    }
    let g = symmetrize2(&g)?;
    let jm = JetMatrix::new(DIM, g.iter().flatten().map(|f| f.jet().clone()).collect());
    Field::from_jet(rho.collar(), jm.determinant(), 0)?.add(&one)
}

/// Quadric density `(1/2) a_IJ ξ^I ξ^J` with `det a = −1`; exact solution in any dimension.
pub fn quadric_density(spec: &SurfaceSpec) -> Result<Poly> {
    if spec.kind != SurfaceKind::Quadric {
        return Err(Error::InvalidInput(
            "quadric density requested for a non-quadric spec".into(),
        ));
    }
    spec.validate()?;
    Ok(Poly::quadric(&spec.normalized_quadric()?))
}

/// Output of the order-by-order solver.
#[derive(Clone, Debug)]
pub struct FeffermanDensity {
    pub rho: Field,
    /// `O` with `J[ρ̄] = −1 + O ρ̄²` (weight −4), valid to a truncated order.
    pub obstruction: Field,
    /// Largest `|coef_k(J + 1)|` for each `k` at exit.
    pub residual_profile: Vec<f64>,
    pub sweeps: usize,
}

impl FeffermanDensity {
    pub fn collar(&self) -> &Arc<Collar> {
        self.rho.collar()
    }

    pub fn metric(&self) -> Result<AmbientMetric> {
        AmbientMetric::new(&self.rho)
    }

    pub fn obstruction_boundary(&self) -> &[f64] {
        self.obstruction.boundary()
    }

    pub fn total_obstruction(&self) -> f64 {
        self.collar().grid().integrate(self.obstruction.boundary())
    }
}

/// Initial density vanishing on the boundary: exact quadric or `(|x|² − R²)/2`.
pub fn seed_density(spec: &SurfaceSpec, collar: &Arc<Collar>) -> Result<Field> {
    match spec.kind {
        SurfaceKind::Quadric => Field::from_poly(collar, quadric_density(spec)?),
        SurfaceKind::StarShaped => radial_seed(collar),
    }
}

/// `(|x|² − R(x/|x|)²)/2` in the chart, i.e. `R²(s + s²/2)`.
pub fn radial_seed(collar: &Arc<Collar>) -> Result<Field> {
    let r2: Vec<f64> = collar.radius().iter().map(|r| r * r).collect();
    let half: Vec<f64> = r2.iter().map(|v| 0.5 * v).collect();
    let zero = vec![0.0; collar.nodes()];
    Field::complete_from_jet(collar, Jet::from_coefficients(vec![zero, r2, half])?, 2)
}

pub fn solve_fefferman(spec: &SurfaceSpec, target_order: usize) -> Result<FeffermanDensity> {
    let collar = Collar::for_spec(spec)?;
    let seed = seed_density(spec, &collar)?;
    solve_from_seed(&seed, target_order, spec.n)
}

/// Runs the solver from any weight-2 density vanishing on the boundary.
pub fn solve_from_seed(seed: &Field, target_order: usize, n: usize) -> Result<FeffermanDensity> {
    if n != 2 {
        return Err(Error::Unsupported(
            "collocation solver is implemented for n = 2".into(),
        ));
    }
    let top = n / 2 + 1;
    if target_order == 0 || target_order > top {
        return Err(Error::InvalidInput(format!(
            "target order must lie in 1..={top}"
        )));
    }
    let collar = seed.collar().clone();
    if collar.storage() < top + 3 {
        return Err(Error::JetExhausted {
            need: top + 3,
            have: collar.storage(),
        });
    }
    if seed.boundary().iter().any(|v| v.abs() > 1e-12) {
        return Err(Error::InvalidInput(
            "seed density does not vanish on the boundary".into(),
        ));
    }
    let rho1 = seed.coefficient(1)?;
    if rho1.iter().any(|v| *v <= 0.0) {
        return Err(Error::Convexity(
            "seed density is not positive outside the domain".into(),
        ));
    }

    let mut rho = seed.clone();
    let mut res = ma_residual_field(&rho)?;
    let mut sweeps = 0;
    if !is_exact_zero(&res) {
        let j0 = res.coefficient(0)?;
        if j0.iter().any(|v| *v - 1.0 >= 0.0) {
            return Err(Error::Convexity(
                "Hessian determinant is not negative on the boundary".into(),
            ));
        }
        let scale: Vec<f64> = j0
            .iter()
            .map(|v| (1.0 - v).powf(-1.0 / (n as f64 + 2.0)))
            .collect();
        rho = rho.mul_boundary(&scale);
        res = ma_residual_field(&rho)?;
        sweeps += 1;
    }
    for m in 2..=target_order {
        if is_exact_zero(&res) {
            break;
        }
        let lead = res.coefficient(m - 1)?;
        let r1 = rho.coefficient(1)?;
        let worst = lead.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        debug!("order {m}: leading residual {worst:e}");
        if worst == 0.0 {
            continue;
        }
        // the correction is exact at this order; repeating it only feeds back aliasing error
        let denom = (m * (n + 4 - 2 * m)) as f64;
        let phi: Vec<f64> = lead
            .iter()
            .zip(&r1)
            .map(|(e, r)| e / r.powi(m as i32 - 1) / denom)
            .collect();
        let phi = Field::ray_constant(&collar, &phi, 2 - 2 * m as i32)?;
        rho = rho.add(&phi.mul(&rho.powi(m)?)?)?.into_complete();
        res = ma_residual_field(&rho)?;
        sweeps += 1;
    }
    let profile = (0..=res.order())
        .map(|k| res.jet().max_abs_coef(k))
        .collect();
    let obstruction = obstruction_of(&rho, &res, n)?;
    Ok(FeffermanDensity {
        rho,
        obstruction,
        residual_profile: profile,
        sweeps,
    })
}

fn is_exact_zero(f: &Field) -> bool {
    f.poly().is_some_and(|p| p.max_abs_coefficient() < 1e-13)
}

fn obstruction_of(rho: &Field, res: &Field, n: usize) -> Result<Field> {
    let mut o = res.clone();
    for _ in 0..(n / 2 + 1) {
        o = o.div_vanishing(rho)?;
    }
    Ok(o)
}

/// Boundary value of `O = (J[ρ̄] + 1)/ρ̄^{n/2+1}` for a Fefferman density.
pub fn obstruction_density(rho: &Field) -> Result<Field> {
    let res = ma_residual_field(rho)?;
    obstruction_of(rho, &res, 2)
}

/// Strict density `ρ̄' = ρ̄ − (n+6)^{−2} ρ̄^{n/2+3} Δ̃O`, with the check value
/// `max |Δ̃'O'|` on the boundary.
#[derive(Clone, Debug)]
pub struct StrictDensity {
    pub density: FeffermanDensity,
    pub lap_obstruction_before: f64,
    pub lap_obstruction_after: f64,
}

impl StrictDensity {
    /// Wraps a density that is already strict, e.g. one read back from disk.
    pub fn from_strict(fd: FeffermanDensity) -> Result<Self> {
        let check = fd
            .metric()?
            .laplacian(&fd.obstruction)?
            .jet()
            .max_abs_coef(0);
        Ok(StrictDensity {
            density: fd,
            lap_obstruction_before: check,
            lap_obstruction_after: check,
        })
    }
}

pub fn strictify(fd: &FeffermanDensity) -> Result<StrictDensity> {
    let n = 2usize;
    let collar = fd.collar().clone();
    if collar.storage() < n / 2 + 6 {
        return Err(Error::JetExhausted {
            need: n / 2 + 6,
            have: collar.storage(),
        });
    }
    let metric = fd.metric()?;
    if is_exact_zero(&fd.obstruction) {
        return Ok(StrictDensity {
            density: fd.clone(),
            lap_obstruction_before: 0.0,
            lap_obstruction_after: 0.0,
        });
    }
    let lap = metric.laplacian(&fd.obstruction)?;
    let before = lap.jet().max_abs_coef(0);
    // only the boundary value of the correction enters Δ̃'O' on M
    let psi = Field::ray_constant(&collar, lap.boundary(), lap.weight())?;
    let c = -1.0 / ((n + 6) as f64).powi(2);
    let rho = fd
        .rho
        .add(&psi.mul(&fd.rho.powi(n / 2 + 3)?)?.scale(c))?
        .into_complete();
    let res = ma_residual_field(&rho)?;
    let obstruction = obstruction_of(&rho, &res, n)?;
    let metric2 = AmbientMetric::new(&rho)?;
    let after = metric2.laplacian(&obstruction)?.jet().max_abs_coef(0);
    let profile = (0..=res.order())
        .map(|k| res.jet().max_abs_coef(k))
        .collect();
    Ok(StrictDensity {
        density: FeffermanDensity {
            rho,
            obstruction,
            residual_profile: profile,
            sweeps: fd.sweeps,
        },
        lap_obstruction_before: before,
        lap_obstruction_after: after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{GridConfig, Harmonic};

    #[test]
    fn ball_is_exact() {
        let spec = SurfaceSpec::ball(2);
        let p = quadric_density(&spec).unwrap();
        assert!(ma_residual_poly(&p).is_zero());
        let spec4 = SurfaceSpec::ball(4);
        assert!(ma_residual_poly(&quadric_density(&spec4).unwrap()).is_zero());
    }

    #[test]
    fn determinant_homogeneity() {
        let p = quadric_density(&SurfaceSpec::ellipsoid(&[1.3, 0.8, 1.1])).unwrap();
        let j = ma_residual_poly(&p).sub(&Poly::constant(4, 1.0));
        let j2 = ma_residual_poly(&p.scale(1.7)).sub(&Poly::constant(4, 1.0));
        let x = [1.0, 0.0, 0.0, 0.0];
        assert!((j2.eval(&x) - 1.7f64.powi(4) * j.eval(&x)).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_normalized_residual() {
        let p = quadric_density(&SurfaceSpec::ellipsoid(&[1.3, 0.8, 1.1])).unwrap();
        assert!(ma_residual_poly(&p).max_abs_coefficient() < 1e-12);
    }

    #[test]
    fn perturbed_sphere_solves_to_obstruction_order() {
        let spec = SurfaceSpec::star_shaped(vec![Harmonic {
            l: 4,
            m: 0,
            coeff: 0.02,
        }])
        .with_grid(GridConfig::new(40, 6));
        let fd = solve_fefferman(&spec, 2).unwrap();
        assert!(fd.residual_profile[0] < 1e-9, "{:?}", fd.residual_profile);
        assert!(fd.residual_profile[1] < 1e-6, "{:?}", fd.residual_profile);
        assert!(fd.residual_profile[2] > 1e-2);
    }
}
