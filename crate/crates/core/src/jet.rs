//! Truncated power series in the collar coordinate `s`, one series per grid node.
//!
//! `Series` is a single scalar series; `Jet` stores `order + 1` coefficient
//! arrays of grid values, coefficient-major, so node loops vectorize.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Scalar truncated power series `Σ c_k s^k`, `k ≤ order`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn zeros(order: usize) -> Self {
        Series(vec![0.0; order + 1])
    }

    pub fn constant(order: usize, c: f64) -> Self {
        let mut s = Self::zeros(order);
        s.0[0] = c;
        s
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(order + 1, 0.0);
        Series(v)
    }

    pub fn add(&self, o: &Series) -> Series {
        let k = self.order().min(o.order());
        Series((0..=k).map(|i| self.0[i] + o.0[i]).collect())
    }

    pub fn sub(&self, o: &Series) -> Series {
        let k = self.order().min(o.order());
        Series((0..=k).map(|i| self.0[i] - o.0[i]).collect())
    }

    pub fn scale(&self, c: f64) -> Series {
        Series(self.0.iter().map(|v| v * c).collect())
    }

    pub fn mul(&self, o: &Series) -> Series {
        let k = self.order().min(o.order());
        let mut out = vec![0.0; k + 1];
        for i in 0..=k {
            for j in 0..=(k - i) {
                out[i + j] += self.0[i] * o.0[j];
            }
        }
        Series(out)
    }

    pub fn recip(&self) -> Series {
        let k = self.order();
        let a0 = self.0[0];
        let mut b = vec![0.0; k + 1];
        b[0] = 1.0 / a0;
        for n in 1..=k {
            let mut acc = 0.0;
            for j in 1..=n {
                acc += self.0[j] * b[n - j];
            }
            b[n] = -acc / a0;
        }
        Series(b)
    }

    pub fn div(&self, o: &Series) -> Series {
        let k = self.order().min(o.order());
        self.truncate(k).mul(&o.truncate(k).recip())
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    pub fn derivative(&self) -> Series {
        if self.order() == 0 {
            return Series(vec![0.0]);
        }
        Series((1..self.0.len()).map(|k| k as f64 * self.0[k]).collect())
    }

    /// `(1+s)^{-1}` to the given order.
    pub fn inv_one_plus_s(order: usize) -> Series {
        Series(
            (0..=order)
                .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        )
    }
}

/// Grid-valued truncated series. Coefficient `k` at node `i` is `data[k * nodes + i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: usize,
    nodes: usize,
    data: Vec<f64>,
}

impl Jet {
    pub fn zeros(order: usize, nodes: usize) -> Self {
        Jet {
            order,
            nodes,
            data: vec![0.0; (order + 1) * nodes],
        }
    }

    pub fn constant(order: usize, nodes: usize, c: f64) -> Self {
        let mut j = Self::zeros(order, nodes);
        j.coef_mut(0).iter_mut().for_each(|v| *v = c);
        j
    }

    /// Jet whose only nonzero coefficient is `values` at `s^0`.
    pub fn from_boundary(values: &[f64], order: usize) -> Self {
        let mut j = Self::zeros(order, values.len());
        j.coef_mut(0).copy_from_slice(values);
        j
    }

    pub fn from_coefficients(coefs: Vec<Vec<f64>>) -> Result<Self> {
        if coefs.is_empty() {
            return Err(Error::InvalidInput(
                "jet needs at least one coefficient".into(),
            ));
        }
        let nodes = coefs[0].len();
        if nodes == 0 || coefs.iter().any(|c| c.len() != nodes) {
            return Err(Error::InvalidInput("ragged jet coefficients".into()));
        }
        let order = coefs.len() - 1;
        Ok(Jet {
            order,
            nodes,
            data: coefs.concat(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn coef(&self, k: usize) -> &[f64] {
        &self.data[k * self.nodes..(k + 1) * self.nodes]
    }

    pub fn coef_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.nodes;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn boundary(&self) -> &[f64] {
        self.coef(0)
    }

    pub fn coefficients(&self) -> Vec<Vec<f64>> {
        (0..=self.order).map(|k| self.coef(k).to_vec()).collect()
    }

    pub fn series_at(&self, node: usize) -> Series {
        Series(
            (0..=self.order)
                .map(|k| self.data[k * self.nodes + node])
                .collect(),
        )
    }

    pub fn set_series(&mut self, node: usize, s: &Series) {
        for k in 0..=self.order.min(s.order()) {
            self.data[k * self.nodes + node] = s.0[k];
        }
    }

    /// Keeps coefficients up to `order` (never raises the order).
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            order,
            nodes: self.nodes,
            data: self.data[..(order + 1) * self.nodes].to_vec(),
        }
    }

    /// Pads with zero coefficients up to `order`.
    pub fn promote(&self, order: usize) -> Jet {
        if order <= self.order {
            return self.truncate(order);
        }
        let mut data = self.data.clone();
        data.resize((order + 1) * self.nodes, 0.0);
        Jet {
            order,
            nodes: self.nodes,
            data,
        }
    }

    fn check(&self, o: &Jet) {
        assert_eq!(self.nodes, o.nodes, "jet node count mismatch");
    }

    pub fn add(&self, o: &Jet) -> Jet {
        self.check(o);
        let k = self.order.min(o.order);
        let len = (k + 1) * self.nodes;
        Jet {
            order: k,
            nodes: self.nodes,
            data: (0..len).map(|i| self.data[i] + o.data[i]).collect(),
        }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        self.check(o);
        let k = self.order.min(o.order);
        let len = (k + 1) * self.nodes;
        Jet {
            order: k,
            nodes: self.nodes,
            data: (0..len).map(|i| self.data[i] - o.data[i]).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            order: self.order,
            nodes: self.nodes,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn axpy(&mut self, c: f64, o: &Jet) {
        self.check(o);
        let k = self.order.min(o.order);
        if k < self.order {
            *self = self.truncate(k);
        }
        let len = (k + 1) * self.nodes;
        for i in 0..len {
            self.data[i] += c * o.data[i];
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, o: &Jet) -> Jet {
        self.check(o);
        let k = self.order.min(o.order);
        let n = self.nodes;
        let mut out = Jet::zeros(k, n);
        for i in 0..=k {
            let a = self.coef(i);
            for j in 0..=(k - i) {
                let b = o.coef(j);
                let dst = &mut out.data[(i + j) * n..(i + j + 1) * n];
                for p in 0..n {
                    dst[p] += a[p] * b[p];
                }
            }
        }
        out
    }

    /// Multiplies every coefficient by an `s`-independent grid function.
    pub fn mul_nodes(&self, f: &[f64]) -> Jet {
        assert_eq!(f.len(), self.nodes);
        let mut out = self.clone();
        for k in 0..=self.order {
            for (v, c) in out.coef_mut(k).iter_mut().zip(f) {
                *v *= c;
            }
        }
        out
    }

    /// Multiplies by a node-independent series.
    pub fn mul_series(&self, s: &Series) -> Jet {
        let k = self.order.min(s.order());
        let n = self.nodes;
        let mut out = Jet::zeros(k, n);
        for i in 0..=k {
            let a = self.coef(i);
            for j in 0..=(k - i) {
                let c = s.0[j];
                if c == 0.0 {
                    continue;
                }
                let dst = &mut out.data[(i + j) * n..(i + j + 1) * n];
                for p in 0..n {
                    dst[p] += c * a[p];
                }
            }
        }
        out
    }

    /// `∂_s`; the result has one order less (order 0 stays order 0 with zero value).
    pub fn ds(&self) -> Jet {
        if self.order == 0 {
            return Jet::zeros(0, self.nodes);
        }
        let n = self.nodes;
        let mut out = Jet::zeros(self.order - 1, n);
        for k in 1..=self.order {
            let kf = k as f64;
            let src = self.coef(k);
            for (d, v) in out.coef_mut(k - 1).iter_mut().zip(src) {
                *d = kf * v;
            }
        }
        out
    }

    /// `∂_s` keeping the storage order (top coefficient becomes zero); only
    /// meaningful for jets known to vanish beyond their order.
    pub fn ds_complete(&self) -> Jet {
        self.ds().promote(self.order)
    }

    /// Multiplication by `s`, truncated at the current order.
    pub fn mul_s(&self) -> Jet {
        let n = self.nodes;
        let mut out = Jet::zeros(self.order, n);
        for k in 1..=self.order {
            out.data[k * n..(k + 1) * n].copy_from_slice(self.coef(k - 1));
        }
        out
    }

    /// Per-node reciprocal; needs nonzero boundary values.
    pub fn recip(&self) -> Result<Jet> {
        let n = self.nodes;
        let a0 = self.coef(0);
        if let Some(i) = a0.iter().position(|v| *v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "reciprocal of a jet vanishing at node {i}"
            )));
        }
        let mut b = Jet::zeros(self.order, n);
        for p in 0..n {
            b.data[p] = 1.0 / a0[p];
        }
        for k in 1..=self.order {
            for p in 0..n {
                let mut acc = 0.0;
                for j in 1..=k {
                    acc += self.data[j * n + p] * b.data[(k - j) * n + p];
                }
                b.data[k * n + p] = -acc * b.data[p];
            }
        }
        Ok(b)
    }

    /// `self / d` where `d` vanishes at `s = 0` with nonzero `∂_s d`; `self`
    /// must vanish there too. The quotient loses one order.
    pub fn div_vanishing(&self, d: &Jet) -> Result<Jet> {
        self.check(d);
        let k = self.order.min(d.order);
        if k == 0 {
            return Err(Error::JetExhausted { need: 1, have: 0 });
        }
        let num = self.truncate(k).ds_shift();
        let den = d.truncate(k).ds_shift();
        Ok(num.mul(&den.recip()?))
    }

    /// Drops the `s^0` coefficient and shifts down: `(f - f_0)/s`.
    fn ds_shift(&self) -> Jet {
        let n = self.nodes;
        Jet {
            order: self.order - 1,
            nodes: n,
            data: self.data[n..].to_vec(),
        }
    }

    pub fn powi(&self, m: usize) -> Jet {
        let mut out = Jet::constant(self.order, self.nodes, 1.0);
        for _ in 0..m {
            out = out.mul(self);
        }
        out
    }

    /// Evaluates the series at `s` (same `s` for every node).
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let n = self.nodes;
        let mut out = vec![0.0; n];
        for k in (0..=self.order).rev() {
            let c = self.coef(k);
            for p in 0..n {
                out[p] = out[p] * s + c[p];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max_abs_coef(&self, k: usize) -> f64 {
        self.coef(k).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Square matrix of jets on a common grid.
#[derive(Clone, Debug)]
pub struct JetMatrix {
    pub dim: usize,
    pub entries: Vec<Jet>,
}

impl JetMatrix {
    pub fn new(dim: usize, entries: Vec<Jet>) -> Self {
        assert_eq!(entries.len(), dim * dim);
        JetMatrix { dim, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> &Jet {
        &self.entries[i * self.dim + j]
    }

    pub fn order(&self) -> usize {
        self.entries.iter().map(|e| e.order()).min().unwrap_or(0)
    }

    pub fn nodes(&self) -> usize {
        self.entries[0].nodes()
    }

    fn node_coefficients(&self, node: usize, order: usize) -> Vec<DMatrix<f64>> {
        let d = self.dim;
        (0..=order)
            .map(|k| DMatrix::from_fn(d, d, |i, j| self.get(i, j).coef(k)[node]))
            .collect()
    }

    /// Per-node series inverse: `B_0 = A_0^{-1}`, `B_k = -B_0 Σ_{j≥1} A_j B_{k-j}`.
    pub fn inverse(&self) -> Result<JetMatrix> {
        let d = self.dim;
        let order = self.order();
        let n = self.nodes();
        let mut out: Vec<Jet> = (0..d * d).map(|_| Jet::zeros(order, n)).collect();
        for p in 0..n {
            let a = self.node_coefficients(p, order);
            let b0 = a[0].clone().try_inverse().ok_or_else(|| {
                Error::Convexity(format!("ambient metric is singular at node {p}"))
            })?;
            let mut b = vec![b0.clone()];
            for k in 1..=order {
                let mut acc = DMatrix::<f64>::zeros(d, d);
                for j in 1..=k {
                    acc += &a[j] * &b[k - j];
                }
                b.push(-(&b0 * acc));
            }
            for (k, bk) in b.iter().enumerate() {
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j].coef_mut(k)[p] = bk[(i, j)];
                    }
                }
            }
        }
        Ok(JetMatrix::new(d, out))
    }

    /// Per-node determinant by series Gaussian elimination, pivoting on
    /// constant terms.
    pub fn determinant(&self) -> Jet {
        let d = self.dim;
        let order = self.order();
        let n = self.nodes();
        let mut out = Jet::zeros(order, n);
        for p in 0..n {
            let mut m: Vec<Vec<Series>> = (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| self.get(i, j).truncate(order).series_at(p))
                        .collect()
                })
                .collect();
            out.set_series(p, &series_determinant(&mut m, order));
        }
        out
    }
}

/// Determinant of a matrix of series (destroys the input).
pub fn series_determinant(m: &mut [Vec<Series>], order: usize) -> Series {
    let d = m.len();
    let mut det = Series::constant(order, 1.0);
    for c in 0..d {
        let piv = (c..d)
            .max_by(|&a, &b| m[a][c].0[0].abs().partial_cmp(&m[b][c].0[0].abs()).unwrap())
            .unwrap();
        if m[piv][c].0[0] == 0.0 {
            return Series::zeros(order);
        }
        if piv != c {
            m.swap(piv, c);
            det = det.scale(-1.0);
        }
        let pivot = m[c][c].clone();
        det = det.mul(&pivot);
        let inv = pivot.recip();
        for r in (c + 1)..d {
            let factor = m[r][c].mul(&inv);
            for k in c..d {
                let t = factor.mul(&m[c][k]);
                m[r][k] = m[r][k].sub(&t);
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_jet(order: usize, nodes: usize, seed: f64) -> Jet {
        let coefs = (0..=order)
            .map(|k| {
                (0..nodes)
                    .map(|p| ((k * 7 + p * 3) as f64 * seed).sin() + if k == 0 { 2.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Jet::from_coefficients(coefs).unwrap()
    }

    #[test]
    fn series_reciprocal_and_eval() {
        let a = Series(vec![2.0, 1.0, -0.5, 0.25]);
        let b = a.recip();
        let one = a.mul(&b);
        assert!((one.0[0] - 1.0).abs() < 1e-15);
        for k in 1..=3 {
            assert!(one.0[k].abs() < 1e-15);
        }
        let q = Series::inv_one_plus_s(12);
        assert!((q.eval(0.1) - 1.0 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn jet_product_matches_pointwise_series() {
        let a = sample_jet(4, 5, 0.3);
        let b = sample_jet(3, 5, 0.7);
        let c = a.mul(&b);
        assert_eq!(c.order(), 3);
        for p in 0..5 {
            let expect = a.series_at(p).truncate(3).mul(&b.series_at(p));
            let got = c.series_at(p);
            for k in 0..=3 {
                assert!((expect.0[k] - got.0[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn division_by_vanishing_jet() {
        let rho =
            Jet::from_coefficients(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![0.5, 0.1]]).unwrap();
        let f =
            Jet::from_coefficients(vec![vec![1.0, -1.0], vec![0.3, 0.2], vec![0.0, 0.4]]).unwrap();
        let prod = f.mul(&rho);
        let back = prod.div_vanishing(&rho).unwrap();
        assert_eq!(back.order(), 1);
        for k in 0..=1 {
            for p in 0..2 {
                assert!((back.coef(k)[p] - f.coef(k)[p]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn determinant_and_inverse_agree_with_nalgebra_at_sample_points() {
        let d = 4;
        let entries: Vec<Jet> = (0..d * d)
            .map(|i| {
                let mut j = sample_jet(3, 3, 0.11 * (i + 1) as f64);
                if i % (d + 1) == 0 {
                    j.coef_mut(0).iter_mut().for_each(|v| *v += 3.0);
                }
                j
            })
            .collect();
        let m = JetMatrix::new(d, entries);
        let det = m.determinant();
        let inv = m.inverse().unwrap();
        let s = 0.01;
        for p in 0..3 {
            let mat = DMatrix::from_fn(d, d, |i, j| m.get(i, j).series_at(p).eval(s));
            let dj = det.series_at(p).eval(s);
            assert!((dj - mat.determinant()).abs() < 1e-7 * mat.determinant().abs().max(1.0));
            let mi = mat.try_inverse().unwrap();
            for i in 0..d {
                for j in 0..d {
                    assert!((inv.get(i, j).series_at(p).eval(s) - mi[(i, j)]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn derivative_and_shift() {
        let j = Jet::from_coefficients(vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(j.ds().coefficients(), vec![vec![2.0], vec![6.0]]);
        assert_eq!(
            j.mul_s().coefficients(),
            vec![vec![0.0], vec![1.0], vec![2.0]]
        );
        assert_eq!(j.ds_complete().order(), 2);
    }
}
