//! Sparse Laurent polynomials in homogeneous coordinates ξ⁰..ξ^{N-1}.
//!
//! Negative exponents are allowed (only ever needed on ξ⁰, for densities of
//! negative weight such as `(ξ⁰)^{-1}`).

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<i32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::monomial(vec![0; nvars], c)
    }

    pub fn monomial(exponents: Vec<i32>, c: f64) -> Self {
        let nvars = exponents.len();
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(exponents, c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(e, 1.0)
    }

    /// `(1/2) a_IJ ξ^I ξ^J`.
    pub fn quadric(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut p = Poly::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0; n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, 0.5 * a[(i, j)]);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, e: Vec<i32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    /// Common total degree of all monomials, or `None` if inhomogeneous.
    /// The zero polynomial reports `None`.
    pub fn homogeneous_degree(&self) -> Option<i32> {
        let mut it = self.terms.keys().map(|e| e.iter().sum::<i32>());
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    /// Largest total degree in the affine variables ξ¹..ξ^{N-1}.
    pub fn affine_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e[1..].iter().sum::<i32>().max(0) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut p = self.clone();
        for (e, c) in &o.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            p.add_term(e.clone(), v * c);
        }
        p
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut p = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<i32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, c1 * c2);
            }
        }
        p
    }

    pub fn powi(&self, k: u32) -> Poly {
        let mut p = Poly::constant(self.nvars, 1.0);
        for _ in 0..k {
            p = p.mul(self);
        }
        p
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] != 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                p.add_term(e2, c * e[i] as f64);
            }
        }
        p
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        assert_eq!(xi.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(xi).map(|(k, x)| x.powi(*k)).product::<f64>())
            .sum()
    }

    /// Evaluates with ξ⁰ = 1 at the affine point `x`.
    pub fn eval_affine(&self, x: &[f64]) -> f64 {
        let mut xi = Vec::with_capacity(self.nvars);
        xi.push(1.0);
        xi.extend_from_slice(x);
        self.eval(&xi)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |a, v| a.max(v.abs()))
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, k) in e.iter().enumerate() {
                if *k != 0 {
                    write!(f, "·ξ{i}^{k}")?;
                }
            }
        }
        Ok(())
    }
}

/// Determinant of a square matrix of polynomials by cofactor expansion over
/// column subsets.
pub fn poly_determinant(m: &[Vec<Poly>]) -> Poly {
    let d = m.len();
    let nvars = m[0][0].nvars();
    // minors[mask] = det of rows 0..popcount(mask) against the columns in mask
    let mut minors: Vec<Option<Poly>> = vec![None; 1 << d];
    minors[0] = Some(Poly::constant(nvars, 1.0));
    for mask in 1usize..(1 << d) {
        let row = mask.count_ones() as usize - 1;
        let mut acc = Poly::zero(nvars);
        let mut sign_pos = 0;
        for col in 0..d {
            if mask & (1 << col) == 0 {
                continue;
            }
            let sub = mask & !(1 << col);
            // sign from the position of `col` among the selected columns
            let sign = if (mask.count_ones() as usize - 1 - sign_pos).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            sign_pos += 1;
            if let Some(minor) = &minors[sub] {
                if !m[row][col].is_zero() && !minor.is_zero() {
                    acc = acc.add(&m[row][col].mul(minor).scale(sign));
                }
            }
        }
        minors[mask] = Some(acc);
    }
    minors[(1 << d) - 1].take().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(n: usize) -> Poly {
        let mut a = DMatrix::<f64>::identity(n + 2, n + 2);
        a[(0, 0)] = -1.0;
        Poly::quadric(&a)
    }

    #[test]
    fn ball_square_value() {
        let r = ball(2);
        let r2 = r.mul(&r);
        assert_eq!(r2.homogeneous_degree(), Some(4));
        assert!((r2.eval(&[1.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradient_of_ball() {
        let r = ball(2);
        let xi = [1.3, -0.2, 0.5, 0.7];
        for i in 0..4 {
            let expect = if i == 0 { -xi[0] } else { xi[i] };
            assert!((r.derivative(i).eval(&xi) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn euler_identity_exact() {
        let p = ball(3)
            .mul(&Poly::var(5, 1))
            .add(&Poly::monomial(vec![3, 0, 0, 0, 0], 2.0));
        let deg = p.homogeneous_degree().unwrap();
        let mut euler = Poly::zero(5);
        for i in 0..5 {
            euler = euler.add(&Poly::var(5, i).mul(&p.derivative(i)));
        }
        assert_eq!(euler, p.scale(deg as f64));
    }

    #[test]
    fn determinant_matches_leibniz() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let m: Vec<Vec<Poly>> = (0..3)
            .map(|i| (0..3).map(|j| Poly::constant(2, a[(i, j)])).collect())
            .collect();
        let det = poly_determinant(&m);
        assert!((det.eval(&[0.0, 0.0]) - a.determinant()).abs() < 1e-12);
        let x = Poly::var(1, 0);
        let m2 = vec![
            vec![x.clone(), Poly::constant(1, 1.0)],
            vec![Poly::constant(1, 2.0), x.clone()],
        ];
        let d2 = poly_determinant(&m2);
        assert!((d2.eval(&[3.0]) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn laurent_derivative() {
        let p = Poly::monomial(vec![-1, 0, 0], 1.0);
        assert_eq!(p.derivative(0), Poly::monomial(vec![-2, 0, 0], -1.0));
        assert_eq!(p.homogeneous_degree(), Some(-1));
    }
}
