//! Tensor calculus on S² for tangent tensors stored by Cartesian components.
//!
//! A rank-r tensor field holds `3^r` components per node, index
//! `(i₁,…,i_r) ↦ Σ i_a 3^{r−a}`, and annihilates the radial direction in
//! every slot. The round connection is the projected spectral gradient; a
//! second metric `h` is handled through its difference tensor
//! `C^k_ij = ½ h^{kl}(∇⁰_i h_jl + ∇⁰_j h_il − ∇⁰_l h_ij)`.

use rayon::prelude::*;

use crate::sphere::SphereGrid;

#[derive(Clone, Debug)]
pub struct TensorField {
    rank: usize,
    data: Vec<Vec<f64>>,
}

fn pow3(r: usize) -> usize {
    3usize.pow(r as u32)
}

impl TensorField {
    pub fn zeros(rank: usize, nodes: usize) -> Self {
        TensorField {
            rank,
            data: vec![vec![0.0; pow3(rank)]; nodes],
        }
    }

    pub fn from_fn(rank: usize, nodes: usize, f: impl Fn(usize) -> Vec<f64> + Sync) -> Self {
        let data: Vec<Vec<f64>> = (0..nodes).into_par_iter().map(&f).collect();
        assert!(data.iter().all(|d| d.len() == pow3(rank)));
        TensorField { rank, data }
    }

    pub fn scalar(values: &[f64]) -> Self {
        TensorField {
            rank: 0,
            data: values.iter().map(|v| vec![*v]).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nodes(&self) -> usize {
        self.data.len()
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.data[p]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.data[p]
    }

    pub fn component(&self, idx: usize) -> Vec<f64> {
        self.data.iter().map(|d| d[idx]).collect()
    }

    pub fn add(&self, o: &TensorField) -> TensorField {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &TensorField) -> TensorField {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> TensorField {
        TensorField {
            rank: self.rank,
            data: self
                .data
                .iter()
                .map(|d| d.iter().map(|v| v * c).collect())
                .collect(),
        }
    }

    fn zip(&self, o: &TensorField, f: impl Fn(f64, f64) -> f64) -> TensorField {
        assert_eq!(self.rank, o.rank);
        assert_eq!(self.nodes(), o.nodes());
        TensorField {
            rank: self.rank,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
                .collect(),
        }
    }

    /// Largest Frobenius norm over the nodes.
    pub fn max_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|d| d.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Values of a scalar field.
    pub fn values(&self) -> Vec<f64> {
        assert_eq!(self.rank, 0);
        self.component(0)
    }
}

/// Projects every slot of a per-node component array onto `T_u S²`.
pub fn project_components(t: &[f64], rank: usize, u: [f64; 3]) -> Vec<f64> {
    let mut cur = t.to_vec();
    for slot in 0..rank {
        let stride = pow3(rank - 1 - slot);
        let mut next = vec![0.0; cur.len()];
        for idx in 0..cur.len() {
            let i = (idx / stride) % 3;
            let base = idx - i * stride;
            let mut v = cur[idx];
            for (j, uj) in u.iter().enumerate() {
                v -= u[i] * uj * cur[base + j * stride];
            }
            next[idx] = v;
        }
        cur = next;
    }
    cur
}

/// Round-sphere calculus on a grid.
pub struct SphereCalculus<'a> {
    grid: &'a SphereGrid,
}

impl<'a> SphereCalculus<'a> {
    pub fn new(grid: &'a SphereGrid) -> Self {
        SphereCalculus { grid }
    }

    pub fn grid(&self) -> &SphereGrid {
        self.grid
    }

    pub fn project(&self, t: &TensorField) -> TensorField {
        TensorField::from_fn(t.rank, t.nodes(), |p| {
            project_components(t.at(p), t.rank, self.grid.direction(p))
        })
    }

    pub fn gradient(&self, f: &[f64]) -> TensorField {
        let g = self.grid.gradient(f);
        TensorField::from_fn(1, f.len(), |p| vec![g[0][p], g[1][p], g[2][p]])
    }

    /// `∇⁰T` with the derivative index last.
    pub fn nabla(&self, t: &TensorField) -> TensorField {
        let nc = pow3(t.rank);
        let grads: Vec<[Vec<f64>; 3]> = (0..nc)
            .into_par_iter()
            .map(|c| self.grid.gradient(&t.component(c)))
            .collect();
        TensorField::from_fn(t.rank + 1, t.nodes(), |p| {
            let mut raw = vec![0.0; nc * 3];
            for c in 0..nc {
                for k in 0..3 {
                    raw[c * 3 + k] = grads[c][k][p];
                }
            }
            project_components(&raw, t.rank + 1, self.grid.direction(p))
        })
    }
}

fn inv3(m: &[f64]) -> [f64; 9] {
    let a = nalgebra::Matrix3::from_row_slice(m);
    let inv = a.try_inverse().expect("tangent metric is degenerate");
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[i * 3 + j] = inv[(i, j)];
        }
    }
    out
}

/// Calculus for a Riemannian metric `h` on S² given by tangent components.
pub struct MetricCalculus<'a> {
    sphere: SphereCalculus<'a>,
    h: TensorField,
    hinv: TensorField,
    vol: Vec<f64>,
    /// `C^k_ij` stored at `[k][i][j]`.
    c_up: TensorField,
}

impl<'a> MetricCalculus<'a> {
    pub fn new(grid: &'a SphereGrid, h: &TensorField) -> Self {
        assert_eq!(h.rank(), 2);
        let sphere = SphereCalculus::new(grid);
        let n = h.nodes();
        let mut vol = vec![0.0; n];
        let hinv = TensorField::from_fn(2, n, |p| {
            let u = grid.direction(p);
            let mut m = h.at(p).to_vec();
            for i in 0..3 {
                for j in 0..3 {
                    m[i * 3 + j] += u[i] * u[j];
                }
            }
            let inv = inv3(&m);
            let mut out = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    out[i * 3 + j] = inv[i * 3 + j] - u[i] * u[j];
                }
            }
            out
        });
        for (p, v) in vol.iter_mut().enumerate() {
            let u = grid.direction(p);
            let mut m = h.at(p).to_vec();
            for i in 0..3 {
                for j in 0..3 {
                    m[i * 3 + j] += u[i] * u[j];
                }
            }
            *v = nalgebra::Matrix3::from_row_slice(&m).determinant().sqrt();
        }
        let dh = sphere.nabla(h);
        let c_up = TensorField::from_fn(3, n, |p| {
            let d = dh.at(p);
            let hi = hinv.at(p);
            // ∇⁰_i h_jl is stored at [j][l][i]
            let dd = |i: usize, j: usize, l: usize| d[(j * 3 + l) * 3 + i];
            let mut low = [0.0; 27];
            for i in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        low[(i * 3 + j) * 3 + l] = 0.5 * (dd(i, j, l) + dd(j, i, l) - dd(l, i, j));
                    }
                }
            }
            let mut out = vec![0.0; 27];
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut acc = 0.0;
                        for l in 0..3 {
                            acc += hi[k * 3 + l] * low[(i * 3 + j) * 3 + l];
                        }
                        out[(k * 3 + i) * 3 + j] = acc;
                    }
                }
            }
            out
        });
        MetricCalculus {
            sphere,
            h: h.clone(),
            hinv,
            vol,
            c_up,
        }
    }

    pub fn sphere(&self) -> &SphereCalculus<'a> {
        &self.sphere
    }

    pub fn metric(&self) -> &TensorField {
        &self.h
    }

    pub fn inverse(&self) -> &TensorField {
        &self.hinv
    }

    /// `√det h` relative to the round area element.
    pub fn volume_density(&self) -> &[f64] {
        &self.vol
    }

    pub fn difference_tensor(&self) -> &TensorField {
        &self.c_up
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        let w: Vec<f64> = f.iter().zip(&self.vol).map(|(a, b)| a * b).collect();
        self.sphere.grid.integrate(&w)
    }

    pub fn ricci(&self) -> TensorField {
        let dc = self.sphere.nabla(&self.c_up);
        let n = self.h.nodes();
        TensorField::from_fn(2, n, |p| {
            let u = self.sphere.grid.direction(p);
            let c = self.c_up.at(p);
            let d = dc.at(p);
            let cc = |k: usize, i: usize, j: usize| c[(k * 3 + i) * 3 + j];
            // ∇⁰_m C^k_ij at [k][i][j][m]
            let dd = |k: usize, i: usize, j: usize, m: usize| d[((k * 3 + i) * 3 + j) * 3 + m];
            let mut out = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = if i == j { 1.0 } else { 0.0 } - u[i] * u[j];
                    for k in 0..3 {
                        v += dd(k, i, j, k) - dd(k, i, k, j);
                        for l in 0..3 {
                            v += cc(k, k, l) * cc(l, i, j) - cc(k, j, l) * cc(l, i, k);
                        }
                    }
                    out[i * 3 + j] = v;
                }
            }
            out
        })
    }

    /// `h^{ij} t_ij` of a rank-2 field.
    pub fn trace(&self, t: &TensorField) -> Vec<f64> {
        (0..t.nodes())
            .map(|p| {
                let hi = self.hinv.at(p);
                let a = t.at(p);
                (0..9).map(|i| hi[i] * a[i]).sum()
            })
            .collect()
    }

    /// `|t|²_h` of a rank-2 field.
    pub fn norm2_2(&self, t: &TensorField) -> Vec<f64> {
        (0..t.nodes())
            .map(|p| {
                let hi = self.hinv.at(p);
                let a = t.at(p);
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            for l in 0..3 {
                                acc += hi[i * 3 + k] * hi[j * 3 + l] * a[i * 3 + j] * a[k * 3 + l];
                            }
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Raises every index of a rank-3 field.
    fn raise3(&self, p: usize, a: &[f64]) -> [f64; 27] {
        let hi = self.hinv.at(p);
        let mut t1 = [0.0; 27];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t1[(i * 3 + j) * 3 + k] =
                        (0..3).map(|m| hi[k * 3 + m] * a[(i * 3 + j) * 3 + m]).sum();
                }
            }
        }
        let mut t2 = [0.0; 27];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t2[(i * 3 + j) * 3 + k] = (0..3)
                        .map(|m| hi[j * 3 + m] * t1[(i * 3 + m) * 3 + k])
                        .sum();
                }
            }
        }
        let mut t3 = [0.0; 27];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t3[(i * 3 + j) * 3 + k] = (0..3)
                        .map(|m| hi[i * 3 + m] * t2[(m * 3 + j) * 3 + k])
                        .sum();
                }
            }
        }
        t3
    }

    /// `|A|²_h` of a rank-3 field.
    pub fn norm2_3(&self, a: &TensorField) -> Vec<f64> {
        (0..a.nodes())
            .map(|p| {
                let up = self.raise3(p, a.at(p));
                up.iter().zip(a.at(p)).map(|(x, y)| x * y).sum()
            })
            .collect()
    }

    /// `A_iμν A_j^{μν}`.
    pub fn contract_aa(&self, a: &TensorField) -> TensorField {
        TensorField::from_fn(2, a.nodes(), |p| {
            let hi = self.hinv.at(p);
            let x = a.at(p);
            let mut out = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for m in 0..3 {
                        for nn in 0..3 {
                            for k in 0..3 {
                                for l in 0..3 {
                                    acc += x[(i * 3 + m) * 3 + nn]
                                        * hi[m * 3 + k]
                                        * hi[nn * 3 + l]
                                        * x[(j * 3 + k) * 3 + l];
                                }
                            }
                        }
                    }
                    out[i * 3 + j] = acc;
                }
            }
            out
        })
    }

    /// `h^{ij} A_ijk`.
    pub fn trace3(&self, a: &TensorField) -> TensorField {
        TensorField::from_fn(1, a.nodes(), |p| {
            let hi = self.hinv.at(p);
            let x = a.at(p);
            (0..3)
                .map(|k| (0..9).map(|ij| hi[ij] * x[ij * 3 + k]).sum())
                .collect()
        })
    }

    /// `(δA)_ij = h^{kl} ∇^h_l A_ijk`.
    pub fn divergence3(&self, a: &TensorField) -> TensorField {
        let da = self.sphere.nabla(a);
        TensorField::from_fn(2, a.nodes(), |p| {
            let hi = self.hinv.at(p);
            let c = self.c_up.at(p);
            let x = a.at(p);
            let d = da.at(p);
            let cc = |k: usize, i: usize, j: usize| c[(k * 3 + i) * 3 + j];
            let ax = |i: usize, j: usize, k: usize| x[(i * 3 + j) * 3 + k];
            let mut out = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            let w = hi[k * 3 + l];
                            if w == 0.0 {
                                continue;
                            }
                            let mut v = d[((i * 3 + j) * 3 + k) * 3 + l];
                            for m in 0..3 {
                                v -= cc(m, l, i) * ax(m, j, k)
                                    + cc(m, l, j) * ax(i, m, k)
                                    + cc(m, l, k) * ax(i, j, m);
                            }
                            acc += w * v;
                        }
                    }
                    out[i * 3 + j] = acc;
                }
            }
            out
        })
    }

    /// `Hess_h f`.
    pub fn hessian(&self, f: &[f64]) -> TensorField {
        let g = self.sphere.gradient(f);
        let dg = self.sphere.nabla(&g);
        TensorField::from_fn(2, f.len(), |p| {
            let c = self.c_up.at(p);
            let gp = g.at(p);
            let d = dg.at(p);
            let mut out = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = 0.5 * (d[i * 3 + j] + d[j * 3 + i]);
                    for k in 0..3 {
                        v -= c[(k * 3 + i) * 3 + j] * gp[k];
                    }
                    out[i * 3 + j] = v;
                }
            }
            out
        })
    }

    /// `Δ_h f = −h^{ij}(Hess_h f)_ij` (non-negative spectrum).
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.trace(&self.hessian(f))
            .into_iter()
            .map(|v| -v)
            .collect()
    }

    /// `grad_h f` as a tangent vector.
    pub fn gradient(&self, f: &[f64]) -> TensorField {
        let g = self.sphere.gradient(f);
        TensorField::from_fn(1, f.len(), |p| {
            let hi = self.hinv.at(p);
            let gp = g.at(p);
            (0..3)
                .map(|i| (0..3).map(|j| hi[i * 3 + j] * gp[j]).sum())
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round(grid: &SphereGrid, c: f64) -> TensorField {
        TensorField::from_fn(2, grid.len(), |p| {
            let u = grid.direction(p);
            let mut out = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    out[i * 3 + j] = c * ((if i == j { 1.0 } else { 0.0 }) - u[i] * u[j]);
                }
            }
            out
        })
    }

    #[test]
    fn round_metric_curvature() {
        let grid = SphereGrid::new(12).unwrap();
        let h = round(&grid, 1.0);
        let mc = MetricCalculus::new(&grid, &h);
        assert!(mc.difference_tensor().max_norm() < 1e-12);
        let ric = mc.ricci();
        assert!(ric.sub(&h).max_norm() < 1e-12);
        let total: f64 = mc.integrate(&vec![1.0; grid.len()]);
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn scaled_and_conformal_metrics() {
        let grid = SphereGrid::new(24).unwrap();
        // h = e^{2w} round, w = 0.1 Y_2^0; scal = e^{-2w}(2 + 2Δ⁰w)
        let w: Vec<f64> = grid.harmonic(2, 0).iter().map(|v| 0.1 * v).collect();
        let round1 = round(&grid, 1.0);
        let h = TensorField::from_fn(2, grid.len(), |p| {
            round1
                .at(p)
                .iter()
                .map(|v| v * (2.0 * w[p]).exp())
                .collect()
        });
        let mc = MetricCalculus::new(&grid, &h);
        let scal = mc.trace(&mc.ricci());
        let lap0 = grid.laplacian(&w);
        let err = (0..grid.len())
            .map(|p| (scal[p] - (-2.0 * w[p]).exp() * (2.0 + 2.0 * lap0[p])).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        // Laplacian of a conformal metric in 2D: Δ_h = e^{-2w} Δ⁰
        let f = grid.harmonic(3, 1);
        let lh = mc.laplacian(&f);
        let err = (0..grid.len())
            .map(|p| (lh[p] - (-2.0 * w[p]).exp() * 12.0 * f[p]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn divergence_of_gradient_cube() {
        let grid = SphereGrid::new(16).unwrap();
        let h = round(&grid, 1.0);
        let mc = MetricCalculus::new(&grid, &h);
        // A = sym(df ⊗ h) has δA computable in closed form on the round sphere
        let f = grid.harmonic(2, 1);
        let df = mc.sphere().gradient(&f);
        let a = TensorField::from_fn(3, grid.len(), |p| {
            let g = df.at(p);
            let hp = h.at(p);
            let mut out = vec![0.0; 27];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        out[(i * 3 + j) * 3 + k] =
                            g[i] * hp[j * 3 + k] + g[j] * hp[i * 3 + k] + g[k] * hp[i * 3 + j];
                    }
                }
            }
            out
        });
        // δA_ij = 2 Hess f_ij + (Δ⁰ sign −) trace term: ∇^k(f_i h_jk + f_j h_ik + f_k h_ij) = 2 f_ij − (Δf) h_ij
        let hess = mc.hessian(&f);
        let lap = mc.laplacian(&f);
        let expect = TensorField::from_fn(2, grid.len(), |p| {
            (0..9)
                .map(|ij| 2.0 * hess.at(p)[ij] - lap[p] * h.at(p)[ij])
                .collect()
        });
        assert!(mc.divergence3(&a).sub(&expect).max_norm() < 1e-10);
    }
}
