//! Ambient metric `g̃ = DDρ̄`, its Christoffel symbols and the ambient Laplacian.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{best_of, symmetrize2, Field, HomogeneousField, DIM};
use crate::jet::{Jet, JetMatrix};
use crate::poly::{poly_determinant, Poly};

fn triple_index(i: usize, j: usize, k: usize) -> usize {
    let mut t = [i, j, k];
    t.sort_unstable();
    (t[0] * DIM + t[1]) * DIM + t[2]
}

/// Ambient metric of a collocation density.
#[derive(Clone, Debug)]
pub struct AmbientMetric {
    rho: Field,
    g: Vec<Vec<Field>>,
    ginv: Vec<Vec<Field>>,
    gamma: Vec<Option<Field>>,
    trgamma: Vec<Field>,
}

impl AmbientMetric {
    pub fn new(rho: &Field) -> Result<Self> {
        if rho.weight() != 2 {
            return Err(Error::WeightMismatch(rho.weight(), 2));
        }
        let g = rho.ambient_hessian()?;
        let ginv = invert(&g)?;
        let dg: Vec<Vec<Vec<Field>>> = (0..DIM)
            .map(|i| {
                (0..DIM)
                    .map(|j| {
                        if i <= j {
                            g[i][j].ambient_derivative()
                        } else {
                            Ok(vec![])
                        }
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<Vec<Field>>>>>()?;
        let d = |k: usize, i: usize, j: usize| -> Field {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            dg[a][b][k].clone()
        };
        let mut gamma = vec![None; DIM * DIM * DIM];
        for i in 0..DIM {
            for j in i..DIM {
                for k in j..DIM {
                    let v = best_of(&[d(i, j, k), d(j, i, k), d(k, i, j)])?.scale(0.5);
                    gamma[triple_index(i, j, k)] = Some(v);
                }
            }
        }
        let mut m = AmbientMetric {
            rho: rho.clone(),
            g,
            ginv,
            gamma,
            trgamma: vec![],
        };
        let mut tr = Vec::with_capacity(DIM);
        for k in 0..DIM {
            // g^{IJ} Γ_IJL first, then raise L
            let mut lower = Vec::with_capacity(DIM);
            for l in 0..DIM {
                lower.push(m.contract_inverse(|i, j| m.christoffel(i, j, l).clone())?);
            }
            let mut acc: Option<Field> = None;
            for (l, low) in lower.iter().enumerate() {
                let t = m.ginv[k][l].mul(low)?;
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.add(&t)?,
                });
            }
            tr.push(acc.unwrap());
        }
        m.trgamma = tr;
        Ok(m)
    }

    pub fn rho(&self) -> &Field {
        &self.rho
    }

    pub fn metric(&self, i: usize, j: usize) -> &Field {
        &self.g[i][j]
    }

    pub fn inverse(&self, i: usize, j: usize) -> &Field {
        &self.ginv[i][j]
    }

    /// `Γ_IJK` with all indices down (totally symmetric).
    pub fn christoffel(&self, i: usize, j: usize, k: usize) -> &Field {
        self.gamma[triple_index(i, j, k)].as_ref().unwrap()
    }

    /// `g̃^{IJ} Γ_IJ^K`.
    pub fn trace_christoffel(&self, k: usize) -> &Field {
        &self.trgamma[k]
    }

    /// `det g̃`.
    pub fn determinant(&self) -> Result<Field> {
        if self.g.iter().flatten().all(|f| f.poly().is_some()) {
            let m: Vec<Vec<Poly>> = self
                .g
                .iter()
                .map(|r| r.iter().map(|f| f.poly().unwrap().clone()).collect())
                .collect();
            return Field::from_poly_with_weight(self.rho.collar(), poly_determinant(&m), 0);
        }
        let jm = JetMatrix::new(
            DIM,
            self.g.iter().flatten().map(|f| f.jet().clone()).collect(),
        );
        Field::from_jet(self.rho.collar(), jm.determinant(), 0)
    }

    /// `Σ_IJ g̃^{IJ} t(I, J)` for symmetric `t`.
    pub fn contract_inverse(&self, t: impl Fn(usize, usize) -> Field) -> Result<Field> {
        let mut acc: Option<Field> = None;
        for i in 0..DIM {
            for j in i..DIM {
                let mut term = self.ginv[i][j].mul(&t(i, j))?;
                if i != j {
                    term = term.scale(2.0);
                }
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term)?,
                });
            }
        }
        Ok(acc.unwrap())
    }

    /// `|dF|² = g̃^{IJ} ∂_I F ∂_J F`-type pairing of two gradients.
    pub fn pair(&self, a: &[Field], b: &[Field]) -> Result<Field> {
        let mut acc: Option<Field> = None;
        for i in 0..DIM {
            for j in 0..DIM {
                let t = self.ginv[i][j].mul(&a[i])?.mul(&b[j])?;
                acc = Some(match acc {
                    None => t,
                    Some(x) => x.add(&t)?,
                });
            }
        }
        Ok(acc.unwrap())
    }

    /// `Δ̃f = −g̃^{IJ}(∂_I∂_J f − Γ_IJ^K ∂_K f)`.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.laplacian_from_gradient(&f.ambient_derivative()?)
    }

    /// `Δ̃` applied to a function given only through its gradient `d = ∂F`.
    pub fn laplacian_from_gradient(&self, d: &[Field]) -> Result<Field> {
        let dd: Vec<Vec<Field>> = d
            .iter()
            .map(|x| x.ambient_derivative())
            .collect::<Result<_>>()?;
        let dd = symmetrize2(&dd)?;
        let mut out = self.contract_inverse(|i, j| dd[i][j].clone())?.scale(-1.0);
        for k in 0..DIM {
            out = out.add(&self.trgamma[k].mul(&d[k])?)?;
        }
        Ok(out)
    }

    pub fn laplacian_power(&self, f: &Field, k: usize) -> Result<Field> {
        let mut out = f.clone();
        for _ in 0..k {
            out = self.laplacian(&out)?;
        }
        Ok(out)
    }

    /// Residual of `g̃_IJ ξ^J = ∂_I ρ̄` over all components.
    pub fn euler_residual(&self) -> Result<f64> {
        let c = self.rho.collar();
        let drho = self.rho.ambient_derivative()?;
        let mut worst: f64 = 0.0;
        for i in 0..DIM {
            let mut acc = drho[i].scale(-1.0);
            for j in 0..DIM {
                let xi = Field::from_poly(c, Poly::var(DIM, j))?;
                acc = acc.add(&self.g[i][j].mul(&xi)?.with_weight(1))?;
            }
            worst = worst.max(acc.jet().max_abs());
        }
        Ok(worst)
    }

    /// Largest `|ξ^K Γ_IJK|`.
    pub fn christoffel_radial_residual(&self) -> Result<f64> {
        let c = self.rho.collar();
        let mut worst: f64 = 0.0;
        for i in 0..DIM {
            for j in i..DIM {
                let mut acc: Option<Field> = None;
                for k in 0..DIM {
                    let xi = Field::from_poly(c, Poly::var(DIM, k))?;
                    let t = self.christoffel(i, j, k).mul(&xi)?;
                    acc = Some(match acc {
                        None => t,
                        Some(a) => a.add(&t)?,
                    });
                }
                worst = worst.max(acc.unwrap().jet().max_abs());
            }
        }
        Ok(worst)
    }
}

fn invert(g: &[Vec<Field>]) -> Result<Vec<Vec<Field>>> {
    let collar = g[0][0].collar().clone();
    if g.iter().flatten().all(|f| {
        f.poly()
            .map(|p| p.affine_degree() == 0 && p.homogeneous_degree().unwrap_or(0) == 0)
            .unwrap_or(false)
    }) {
        let m = DMatrix::from_fn(DIM, DIM, |i, j| {
            g[i][j].poly().unwrap().eval(&[1.0, 0.0, 0.0, 0.0])
        });
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Convexity("ambient metric is singular".into()))?;
        return (0..DIM)
            .map(|i| {
                (0..DIM)
                    .map(|j| {
                        Field::from_poly_with_weight(&collar, Poly::constant(DIM, inv[(i, j)]), 0)
                    })
                    .collect()
            })
            .collect();
    }
    let jm = JetMatrix::new(DIM, g.iter().flatten().map(|f| f.jet().clone()).collect());
    check_signature(&jm)?;
    let inv = jm.inverse()?;
    (0..DIM)
        .map(|i| {
            (0..DIM)
                .map(|j| Field::from_jet(&collar, inv.get(i, j).clone(), 0))
                .collect()
        })
        .collect()
}

fn check_signature(jm: &JetMatrix) -> Result<()> {
    for p in 0..jm.nodes() {
        let m = DMatrix::from_fn(DIM, DIM, |i, j| jm.get(i, j).coef(0)[p]);
        let eig = m.symmetric_eigen().eigenvalues;
        let neg = eig.iter().filter(|v| **v < 0.0).count();
        let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if neg != 1 || eig.iter().any(|v| v.abs() < 1e-12 * scale) {
            return Err(Error::Convexity(format!(
                "ambient metric is not Lorentzian at node {p}"
            )));
        }
    }
    Ok(())
}

/// Ambient metric of a quadratic defining density in any dimension (constant Hessian).
#[derive(Clone, Debug)]
pub struct PolyMetric {
    rho: Poly,
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
}

impl PolyMetric {
    pub fn new(rho: &Poly) -> Result<Self> {
        if rho.homogeneous_degree() != Some(2) {
            return Err(Error::InvalidInput(
                "polynomial ambient metric needs a quadratic density".into(),
            ));
        }
        let n = rho.nvars();
        let zero = vec![0.0; n];
        let g = DMatrix::from_fn(n, n, |i, j| rho.derivative(i).derivative(j).eval(&zero));
        let ginv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Convexity("ambient metric is singular".into()))?;
        let neg = g
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .filter(|v| **v < 0.0)
            .count();
        if neg != 1 {
            return Err(Error::Convexity("ambient metric is not Lorentzian".into()));
        }
        Ok(PolyMetric {
            rho: rho.clone(),
            g,
            ginv,
        })
    }

    pub fn rho(&self) -> &Poly {
        &self.rho
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.ginv
    }

    pub fn determinant(&self) -> f64 {
        self.g.determinant()
    }

    /// Christoffel symbols vanish for a constant Hessian.
    pub fn laplacian(&self, f: &Poly) -> Poly {
        let n = self.rho.nvars();
        let mut out = Poly::zero(n);
        for i in 0..n {
            let di = f.derivative(i);
            for j in 0..n {
                let c = self.ginv[(i, j)];
                if c != 0.0 {
                    out = out.sub(&di.derivative(j).scale(c));
                }
            }
        }
        out
    }
}

/// Either ambient representation.
#[derive(Clone, Debug)]
pub enum Ambient {
    Polynomial(PolyMetric),
    Collocation(AmbientMetric),
}

impl Ambient {
    pub fn laplacian(&self, f: &HomogeneousField) -> Result<HomogeneousField> {
        match (self, f) {
            (Ambient::Polynomial(m), HomogeneousField::Polynomial { weight, poly }) => {
                Ok(HomogeneousField::Polynomial {
                    weight: weight - 2,
                    poly: m.laplacian(poly),
                })
            }
            (Ambient::Collocation(m), HomogeneousField::Collocation(x)) => {
                Ok(HomogeneousField::Collocation(m.laplacian(x)?))
            }
            _ => Err(Error::InvalidInput(
                "field and metric representations differ".into(),
            )),
        }
    }

    pub fn laplacian_power(&self, f: &HomogeneousField, k: usize) -> Result<HomogeneousField> {
        let mut out = f.clone();
        for _ in 0..k {
            out = self.laplacian(&out)?;
        }
        Ok(out)
    }
}

/// Largest coefficient of a jet restricted to orders `0..=k`.
pub fn max_through(jet: &Jet, k: usize) -> f64 {
    (0..=k.min(jet.order()))
        .map(|i| jet.max_abs_coef(i))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Collar;
    use crate::surface::{GridConfig, Harmonic, SurfaceSpec};
    use std::sync::Arc;

    fn ball_poly(n: usize) -> Poly {
        let mut a = DMatrix::<f64>::identity(n + 2, n + 2);
        a[(0, 0)] = -1.0;
        Poly::quadric(&a)
    }

    fn perturbed() -> Arc<Collar> {
        perturbed_at(16)
    }

    fn perturbed_at(lmax: usize) -> Arc<Collar> {
        let spec = SurfaceSpec::star_shaped(vec![Harmonic {
            l: 4,
            m: 0,
            coeff: 0.05,
        }])
        .with_grid(GridConfig::new(lmax, 6));
        Collar::for_spec(&spec).unwrap()
    }

    #[test]
    fn ball_metric_is_flat_minkowski() {
        let c = perturbed();
        let rho = Field::from_poly(&c, ball_poly(2)).unwrap();
        let m = AmbientMetric::new(&rho).unwrap();
        for k in 0..DIM {
            assert!(m.trace_christoffel(k).poly().unwrap().is_zero());
        }
        assert_eq!(m.inverse(0, 0).poly().unwrap(), &Poly::constant(4, -1.0));
        let lap = m.laplacian(&rho).unwrap();
        assert!((lap.boundary()[0] + 4.0).abs() < 1e-14);
    }

    #[test]
    fn harmonic_polynomial() {
        let pm = PolyMetric::new(&ball_poly(2)).unwrap();
        let f = Poly::monomial(vec![1, 1, 0, 0], 1.0);
        assert!(pm.laplacian(&f).is_zero());
        assert!((pm.determinant() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn euler_and_radial_christoffel_on_generic_density() {
        let c = perturbed_at(24);
        // a non-quadratic weight-2 density: ρ̄_ball · (1 + 0.1 ξ¹ξ²/(ξ⁰)²)
        let p = ball_poly(2).add(&ball_poly(2).mul(&Poly::monomial(vec![-2, 0, 1, 1], 0.1)));
        let rho = Field::from_poly(&c, p).unwrap();
        let jet = rho.jet().clone();
        let numeric = Field::complete_from_jet(&c, jet, 2).unwrap();
        let m = AmbientMetric::new(&numeric).unwrap();
        let e = m.euler_residual().unwrap();
        assert!(e < 1e-10, "{e}");
        let r = m.christoffel_radial_residual().unwrap();
        assert!(r < 1e-9, "{r}");
        let lap = m.laplacian(&numeric).unwrap();
        let err = lap
            .jet()
            .add(&Jet::constant(lap.order(), c.nodes(), 4.0))
            .max_abs();
        assert!(err < 1e-9, "{err}");
    }
}
