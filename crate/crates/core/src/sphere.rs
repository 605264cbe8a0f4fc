//! Gauss–Legendre × equispaced-azimuth grid on S² with real spherical-harmonic
//! transforms and spectral differentiation.
//!
//! Real harmonics are orthonormal on the unit sphere, without the
//! Condon–Shortley phase:
//!
//! ```text
//! Y_l0  = P̄_l^0(cos θ)
//! Y_lm  = √2 P̄_l^m(cos θ) cos(mφ)      m > 0
//! Y_l,-m = √2 P̄_l^m(cos θ) sin(mφ)     m > 0
//! ```
//!
//! Nodes are stored latitude-major: `node = lat * nlon + lon`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Index of `(l, m)` in a coefficient vector of length `(lmax + 1)²`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    l * l + (l as i64 + m) as usize
}

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton on the Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Orthonormal associated Legendre functions P̄_l^m(cos θ) for all
/// `0 ≤ m ≤ l ≤ lmax`, packed at `l(l+1)/2 + m`.
pub fn normalized_legendre(lmax: usize, x: f64, sin_theta: f64) -> Vec<f64> {
    let mut p = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    p[0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let prev = p[idx(m - 1, m - 1)];
            p[idx(m, m)] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * sin_theta * prev;
        }
        if m < lmax {
            p[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * p[idx(m, m)];
        }
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[idx(l, m)] = a * (x * p[idx(l - 1, m)] - b * p[idx(l - 2, m)]);
        }
    }
    p
}

/// θ-derivative of P̄_l^m(cos θ), from
/// `sin θ dP̄_l^m/dθ = l cos θ P̄_l^m − √((2l+1)(l²−m²)/(2l−1)) P̄_{l−1}^m`.
fn legendre_dtheta(lmax: usize, x: f64, sin_theta: f64, p: &[f64]) -> Vec<f64> {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut d = vec![0.0; p.len()];
    for l in 0..=lmax {
        for m in 0..=l {
            let lf = l as f64;
            let mf = m as f64;
            let lower = if l > m {
                ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt()
                    * p[idx(l - 1, m)]
            } else {
                0.0
            };
            d[idx(l, m)] = (lf * x * p[idx(l, m)] - lower) / sin_theta;
        }
    }
    d
}

/// Quadrature grid on the unit sphere with spectral transforms up to `lmax`.
#[derive(Debug)]
pub struct SphereGrid {
    lmax: usize,
    nlat: usize,
    nlon: usize,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    lat_weights: Vec<f64>,
    phi: Vec<f64>,
    /// P̄ table per latitude, packed triangular.
    plm: Vec<Vec<f64>>,
    dplm: Vec<Vec<f64>>,
    cos_mphi: Vec<Vec<f64>>,
    sin_mphi: Vec<Vec<f64>>,
}

/// Cartesian components of a tangent vector field on the grid.
pub type VectorField = [Vec<f64>; 3];

impl SphereGrid {
    /// Smallest Gauss grid resolving harmonics up to `lmax`.
    pub fn new(lmax: usize) -> Result<Self> {
        if lmax < 2 {
            return Err(Error::InvalidInput(format!(
                "lmax must be at least 2, got {lmax}"
            )));
        }
        let nlat = lmax + 2;
        let nlon = 2 * lmax + 2;
        Self::with_size(lmax, nlat, nlon)
    }

    pub fn with_size(lmax: usize, nlat: usize, nlon: usize) -> Result<Self> {
        if nlat < lmax + 1 || nlon < 2 * lmax + 1 {
            return Err(Error::InvalidInput(format!(
                "grid {nlat}x{nlon} cannot resolve lmax = {lmax}"
            )));
        }
        let (x, w) = gauss_legendre(nlat);
        // north to south
        let mut order: Vec<usize> = (0..nlat).collect();
        order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap());
        let cos_theta: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let lat_weights: Vec<f64> = order.iter().map(|&i| w[i]).collect();
        let sin_theta: Vec<f64> = cos_theta.iter().map(|c| (1.0 - c * c).sqrt()).collect();
        let phi: Vec<f64> = (0..nlon)
            .map(|k| 2.0 * PI * k as f64 / nlon as f64)
            .collect();
        let plm: Vec<Vec<f64>> = (0..nlat)
            .map(|j| normalized_legendre(lmax, cos_theta[j], sin_theta[j]))
            .collect();
        let dplm = (0..nlat)
            .map(|j| legendre_dtheta(lmax, cos_theta[j], sin_theta[j], &plm[j]))
            .collect();
        let cos_mphi = (0..=lmax)
            .map(|m| phi.iter().map(|p| (m as f64 * p).cos()).collect())
            .collect();
        let sin_mphi = (0..=lmax)
            .map(|m| phi.iter().map(|p| (m as f64 * p).sin()).collect())
            .collect();
        Ok(Self {
            lmax,
            nlat,
            nlon,
            cos_theta,
            sin_theta,
            lat_weights,
            phi,
            plm,
            dplm,
            cos_mphi,
            sin_mphi,
        })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn nlat(&self) -> usize {
        self.nlat
    }

    pub fn nlon(&self) -> usize {
        self.nlon
    }

    pub fn len(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_coeffs(&self) -> usize {
        (self.lmax + 1) * (self.lmax + 1)
    }

    /// Unit direction of a node.
    pub fn direction(&self, node: usize) -> [f64; 3] {
        let (j, k) = (node / self.nlon, node % self.nlon);
        let (st, ct) = (self.sin_theta[j], self.cos_theta[j]);
        [st * self.phi[k].cos(), st * self.phi[k].sin(), ct]
    }

    /// Orthonormal tangent frame (e_θ, e_φ) at a node.
    pub fn frame(&self, node: usize) -> ([f64; 3], [f64; 3]) {
        let (j, k) = (node / self.nlon, node % self.nlon);
        let (st, ct) = (self.sin_theta[j], self.cos_theta[j]);
        let (sp, cp) = self.phi[k].sin_cos();
        ([ct * cp, ct * sp, -st], [-sp, cp, 0.0])
    }

    /// Quadrature weight of a node; weights sum to 4π.
    pub fn weight(&self, node: usize) -> f64 {
        self.lat_weights[node / self.nlon] * 2.0 * PI / self.nlon as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.weight(i))
            .sum()
    }

    /// Forward transform: grid values → coefficients for l ≤ lmax.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        let lmax = self.lmax;
        let mut coeffs = vec![0.0; self.n_coeffs()];
        let dphi = 2.0 * PI / self.nlon as f64;
        let mut cm = vec![0.0; lmax + 1];
        let mut sm = vec![0.0; lmax + 1];
        for j in 0..self.nlat {
            let row = &values[j * self.nlon..(j + 1) * self.nlon];
            for m in 0..=lmax {
                let (c, s) = (&self.cos_mphi[m], &self.sin_mphi[m]);
                let mut a = 0.0;
                let mut b = 0.0;
                for k in 0..self.nlon {
                    a += row[k] * c[k];
                    b += row[k] * s[k];
                }
                cm[m] = a * dphi;
                sm[m] = b * dphi;
            }
            let w = self.lat_weights[j];
            let p = &self.plm[j];
            for l in 0..=lmax {
                let base = l * (l + 1) / 2;
                coeffs[lm_index(l, 0)] += w * p[base] * cm[0];
                for m in 1..=l {
                    let pv = w * p[base + m] * std::f64::consts::SQRT_2;
                    coeffs[lm_index(l, m as i64)] += pv * cm[m];
                    coeffs[lm_index(l, -(m as i64))] += pv * sm[m];
                }
            }
        }
        coeffs
    }

    /// Inverse transform with an arbitrary latitude table (values or θ-derivative).
    fn synthesize_with(
        &self,
        coeffs: &[f64],
        table: &[Vec<f64>],
        phi_derivative: bool,
        over_sin: bool,
    ) -> Vec<f64> {
        let lmax = self.lmax;
        let mut out = vec![0.0; self.len()];
        let mut cm = vec![0.0; lmax + 1];
        let mut sm = vec![0.0; lmax + 1];
        for j in 0..self.nlat {
            let p = &table[j];
            cm.iter_mut().for_each(|v| *v = 0.0);
            sm.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..=lmax {
                let base = l * (l + 1) / 2;
                cm[0] += coeffs[lm_index(l, 0)] * p[base];
                for m in 1..=l {
                    let pv = p[base + m] * std::f64::consts::SQRT_2;
                    cm[m] += coeffs[lm_index(l, m as i64)] * pv;
                    sm[m] += coeffs[lm_index(l, -(m as i64))] * pv;
                }
            }
            let scale = if over_sin {
                1.0 / self.sin_theta[j]
            } else {
                1.0
            };
            let row = &mut out[j * self.nlon..(j + 1) * self.nlon];
            for m in 0..=lmax {
                let (c, s) = (&self.cos_mphi[m], &self.sin_mphi[m]);
                if phi_derivative {
                    // ∂φ [a cos mφ + b sin mφ] = m(−a sin mφ + b cos mφ)
                    let mf = m as f64 * scale;
                    for k in 0..self.nlon {
                        row[k] += mf * (-cm[m] * s[k] + sm[m] * c[k]);
                    }
                } else {
                    for k in 0..self.nlon {
                        row[k] += scale * (cm[m] * c[k] + sm[m] * s[k]);
                    }
                }
            }
        }
        out
    }

    /// Inverse transform: coefficients → grid values.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.synthesize_with(coeffs, &self.plm, false, false)
    }

    /// Band-limit projection (analysis followed by synthesis).
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        self.synthesize(&self.analyze(values))
    }

    /// Surface gradient from coefficients, in Cartesian components.
    pub fn gradient_from_coeffs(&self, coeffs: &[f64]) -> VectorField {
        let d_theta = self.synthesize_with(coeffs, &self.dplm, false, false);
        let d_phi = self.synthesize_with(coeffs, &self.plm, true, true);
        let n = self.len();
        let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let (et, ep) = self.frame(i);
            for c in 0..3 {
                g[c][i] = d_theta[i] * et[c] + d_phi[i] * ep[c];
            }
        }
        g
    }

    /// Surface gradient of grid values (spectral, band-limited to lmax).
    pub fn gradient(&self, values: &[f64]) -> VectorField {
        self.gradient_from_coeffs(&self.analyze(values))
    }

    /// Laplace–Beltrami (positive convention, Δ Y_l = l(l+1) Y_l).
    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.analyze(values);
        for l in 0..=self.lmax {
            for m in -(l as i64)..=(l as i64) {
                c[lm_index(l, m)] *= (l * (l + 1)) as f64;
            }
        }
        self.synthesize(&c)
    }

    /// Grid values of a single real harmonic.
    pub fn harmonic(&self, l: usize, m: i64) -> Vec<f64> {
        let mut c = vec![0.0; self.n_coeffs()];
        if l <= self.lmax && m.unsigned_abs() as usize <= l {
            c[lm_index(l, m)] = 1.0;
        }
        self.synthesize(&c)
    }

    /// Values of every basis harmonic at a direction, in coefficient order.
    pub fn basis_at(&self, dir: [f64; 3]) -> Vec<f64> {
        let lmax = self.lmax;
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let ct = (dir[2] / norm).clamp(-1.0, 1.0);
        let st = (1.0 - ct * ct).sqrt();
        let phi = dir[1].atan2(dir[0]);
        let p = normalized_legendre(lmax, ct, st);
        let mut out = vec![0.0; self.n_coeffs()];
        for l in 0..=lmax {
            let base = l * (l + 1) / 2;
            out[lm_index(l, 0)] = p[base];
            for m in 1..=l {
                let (s, c) = (m as f64 * phi).sin_cos();
                let pv = p[base + m] * std::f64::consts::SQRT_2;
                out[lm_index(l, m as i64)] = pv * c;
                out[lm_index(l, -(m as i64))] = pv * s;
            }
        }
        out
    }

    /// Evaluates a coefficient vector at an arbitrary unit direction.
    pub fn evaluate_at(&self, coeffs: &[f64], dir: [f64; 3]) -> f64 {
        let lmax = self.lmax;
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let ct = (dir[2] / norm).clamp(-1.0, 1.0);
        let st = (1.0 - ct * ct).sqrt();
        let phi = dir[1].atan2(dir[0]);
        let p = normalized_legendre(lmax, ct, st);
        let mut v = 0.0;
        for l in 0..=lmax {
            let base = l * (l + 1) / 2;
            v += coeffs[lm_index(l, 0)] * p[base];
            for m in 1..=l {
                let (s, c) = (m as f64 * phi).sin_cos();
                let pv = p[base + m] * std::f64::consts::SQRT_2;
                v +=
                    pv * (coeffs[lm_index(l, m as i64)] * c + coeffs[lm_index(l, -(m as i64))] * s);
            }
        }
        v
    }

    /// Coefficients with only `l ≤ lmax` kept, for resampling between grids.
    pub fn resize_coeffs(coeffs: &[f64], lmax_new: usize) -> Vec<f64> {
        let mut out = vec![0.0; (lmax_new + 1) * (lmax_new + 1)];
        let n = coeffs.len().min(out.len());
        out[..n].copy_from_slice(&coeffs[..n]);
        out
    }
}

/// Real orthonormal harmonic evaluated at a direction, for oracles and inputs.
pub fn real_harmonic(l: usize, m: i64, dir: [f64; 3]) -> f64 {
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let ct = (dir[2] / norm).clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).sqrt();
    let phi = dir[1].atan2(dir[0]);
    let p = normalized_legendre(l, ct, st);
    let ma = m.unsigned_abs() as usize;
    let pv = p[l * (l + 1) / 2 + ma];
    match m {
        0 => pv,
        m if m > 0 => std::f64::consts::SQRT_2 * pv * (m as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * pv * (ma as f64 * phi).sin(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sphere_area() {
        let g = SphereGrid::new(16).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn quadrature_exact_against_constants() {
        let g = SphereGrid::new(8).unwrap();
        for l in 1..(2 * g.lmax()) {
            let vals: Vec<f64> = (0..g.len())
                .map(|i| real_harmonic(l, 0, g.direction(i)))
                .collect();
            assert!(g.integrate(&vals).abs() < 1e-12, "l = {l}");
        }
    }

    #[test]
    fn analysis_inverts_synthesis() {
        let g = SphereGrid::new(12).unwrap();
        let mut c = vec![0.0; g.n_coeffs()];
        for (i, v) in c.iter_mut().enumerate() {
            *v = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
        }
        let back = g.analyze(&g.synthesize(&c));
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesized_harmonic_matches_pointwise_formula() {
        let g = SphereGrid::new(10).unwrap();
        for &(l, m) in &[(0, 0), (1, 0), (2, 1), (3, -2), (7, 5)] {
            let vals = g.harmonic(l, m);
            for i in (0..g.len()).step_by(17) {
                assert!((vals[i] - real_harmonic(l, m, g.direction(i))).abs() < 1e-12);
            }
        }
        // Y_10 = √(3/4π) cos θ
        let d = [0.3, -0.4, (1.0f64 - 0.25).sqrt()];
        assert!((real_harmonic(1, 0, d) - (3.0 / (4.0 * PI)).sqrt() * d[2]).abs() < 1e-14);
    }

    #[test]
    fn laplacian_eigenvalues() {
        let g = SphereGrid::new(24).unwrap();
        for l in 0..=22usize {
            let m = (l as i64) / 2 - 1;
            let m = m.clamp(-(l as i64), l as i64);
            let y = g.harmonic(l, m);
            let ly = g.laplacian(&y);
            let ev = (l * (l + 1)) as f64;
            let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())) * ev.max(1.0);
            for (a, b) in ly.iter().zip(&y) {
                assert!((a - ev * b).abs() < 1e-10 * scale, "l = {l}");
            }
        }
    }

    #[test]
    fn gradient_of_coordinate_function() {
        // grad of z restricted to S² is e_z − z u
        let g = SphereGrid::new(8).unwrap();
        let z: Vec<f64> = (0..g.len()).map(|i| g.direction(i)[2]).collect();
        let gr = g.gradient(&z);
        for i in 0..g.len() {
            let u = g.direction(i);
            let expect = [-u[2] * u[0], -u[2] * u[1], 1.0 - u[2] * u[2]];
            for c in 0..3 {
                assert!((gr[c][i] - expect[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn point_evaluation_matches_grid() {
        let g = SphereGrid::new(10).unwrap();
        let y = g.harmonic(5, -3);
        let c = g.analyze(&y);
        let d = [0.2, 0.5, -0.7];
        assert!((g.evaluate_at(&c, d) - real_harmonic(5, -3, d)).abs() < 1e-12);
    }
}
