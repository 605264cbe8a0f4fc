//! GJMS operators `P_m : E[m − n/2] → E[−m − n/2]` from the ambient
//! Laplacian, by harmonic extension and by logarithmic extension.
//!
//! Extensions are built order by order from
//! `Δ̃(ρ̄^j φ) = ρ̄^j Δ̃φ − j(n + 2w' + 2j) ρ̄^{j−1} φ` for `φ` of weight `w'`.

use crate::ambient::AmbientMetric;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::hypersurface::BoundaryGeometry;
use crate::ma_solver::{FeffermanDensity, StrictDensity};
use crate::qcurvature::LogScale;

const N: usize = 2;

/// `c_m = 2^{m−1}((m−1)!)²`.
pub fn harmonic_constant(m: usize) -> f64 {
    let f: f64 = (1..m).map(|k| k as f64).product();
    2f64.powi(m as i32 - 1) * f * f
}

/// `c'_m = −2^m m ((m−1)!)²`.
pub fn log_constant(m: usize) -> f64 {
    let f: f64 = (1..m).map(|k| k as f64).product();
    -(2f64.powi(m as i32)) * m as f64 * f * f
}

#[derive(Clone, Debug)]
pub struct HarmonicExtension {
    pub extension: Field,
    /// `ψ|_M` with `Δ̃f̃ = ψ ρ̄^{m−1}`.
    pub psi: Vec<f64>,
    /// Largest coefficient of `Δ̃f̃` below order `m − 1` after the construction.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct LogExtension {
    pub a: Field,
    pub b: Field,
    /// Largest smooth-part coefficient of `Δ̃(A + Bρ̄^m log|ρ|)` per order in `s`.
    pub smooth_residual: Vec<f64>,
    /// Same for the coefficient of `log|ρ|`.
    pub log_residual: Vec<f64>,
    /// Residual is `O(ρ̄^attained)`: leading orders whose coefficients were
    /// reduced below `1e−6` of their size before correction.
    pub attained_order: usize,
}

impl LogExtension {
    pub fn b_boundary(&self) -> &[f64] {
        self.b.boundary()
    }
}

/// GJMS operators for one Fefferman density.
pub struct Gjms {
    metric: AmbientMetric,
    strict: bool,
}

fn ray(rho: &Field, values: &[f64], weight: i32) -> Result<Field> {
    Field::ray_constant(rho.collar(), values, weight)
}

/// Adds `ρ̄^j φ` to `f` so that the `s^{j−1}` coefficient `c` of its Laplacian
/// is removed, assuming the lower coefficients already vanish.
fn kill_order(f: &Field, rho: &Field, coef: &[f64], j: usize) -> Result<Field> {
    let w = f.weight() - 2 * j as i32;
    let factor = (j as i32 * (N as i32 + 2 * w + 2 * j as i32)) as f64;
    if factor == 0.0 {
        return Err(Error::InvalidInput(format!("resonant extension order {j}")));
    }
    let r1 = rho.coefficient(1)?;
    let phi: Vec<f64> = coef
        .iter()
        .zip(&r1)
        .map(|(c, r)| c / (factor * r.powi(j as i32 - 1)))
        .collect();
    Ok(f.add(&ray(rho, &phi, w)?.mul(&rho.powi(j)?)?)?
        .into_complete())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

impl Gjms {
    pub fn new(fd: &FeffermanDensity) -> Result<Self> {
        Ok(Gjms {
            metric: fd.metric()?,
            strict: false,
        })
    }

    pub fn strict(sd: &StrictDensity) -> Result<Self> {
        Ok(Gjms {
            metric: sd.density.metric()?,
            strict: true,
        })
    }

    pub fn from_metric(metric: AmbientMetric, strict: bool) -> Self {
        Gjms { metric, strict }
    }

    pub fn metric(&self) -> &AmbientMetric {
        &self.metric
    }

    fn rho(&self) -> &Field {
        self.metric.rho()
    }

    /// Rejects orders outside `1..=n/2` and `n/2 + 2` (the latter needs a strict density).
    pub fn check_order(&self, m: usize) -> Result<()> {
        if (1..=N / 2).contains(&m) {
            Ok(())
        } else if m == N / 2 + 2 {
            if self.strict {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "P_{m} requires a strict Fefferman density"
                )))
            }
        } else {
            Err(Error::Unsupported(format!(
                "P_{m} is not defined for n = {N}"
            )))
        }
    }

    pub fn weight(m: usize) -> i32 {
        m as i32 - (N / 2) as i32
    }

    /// Extension with `Δ̃f̃ = O(ρ̄^{m−1})` starting from the ray-constant one.
    pub fn extend_harmonic(&self, f: &[f64], m: usize) -> Result<HarmonicExtension> {
        self.extend_harmonic_from(&ray(self.rho(), f, Self::weight(m))?, m)
    }

    /// Same, starting from a given extension of the boundary data.
    pub fn extend_harmonic_from(&self, seed: &Field, m: usize) -> Result<HarmonicExtension> {
        self.check_order(m)?;
        if seed.weight() != Self::weight(m) {
            return Err(Error::WeightMismatch(seed.weight(), Self::weight(m)));
        }
        let rho = self.rho().clone();
        let mut ft = seed.clone().into_complete();
        for k in 0..m.saturating_sub(1) {
            let lap = self.metric.laplacian(&ft)?;
            ft = kill_order(&ft, &rho, &lap.coefficient(k)?, k + 1)?;
        }
        let lap = self.metric.laplacian(&ft)?;
        let residual = (0..m - 1)
            .map(|k| lap.jet().max_abs_coef(k))
            .fold(0.0, f64::max);
        let r1 = rho.coefficient(1)?;
        let psi = lap
            .coefficient(m - 1)?
            .iter()
            .zip(&r1)
            .map(|(c, r)| c / r.powi(m as i32 - 1))
            .collect();
        Ok(HarmonicExtension {
            extension: ft,
            psi,
            residual,
        })
    }

    /// `P_m f = c_m ψ|_M`.
    pub fn apply(&self, m: usize, f: &[f64]) -> Result<Vec<f64>> {
        let c = harmonic_constant(m);
        Ok(self
            .extend_harmonic(f, m)?
            .psi
            .into_iter()
            .map(|v| c * v)
            .collect())
    }

    /// `Δ̃^m f̃|_M` for an arbitrary extension `f̃` of weight `m − n/2`.
    pub fn apply_power(&self, m: usize, ft: &Field) -> Result<Vec<f64>> {
        self.check_order(m)?;
        if ft.weight() != Self::weight(m) {
            return Err(Error::WeightMismatch(ft.weight(), Self::weight(m)));
        }
        Ok(self.metric.laplacian_power(ft, m)?.boundary().to_vec())
    }

    /// `∫_M (f₁ P_m f₂ − f₂ P_m f₁)` against a volume density relative to the round measure.
    pub fn selfadjoint_residual(
        &self,
        m: usize,
        f1: &[f64],
        f2: &[f64],
        volume: &[f64],
    ) -> Result<f64> {
        let p1 = self.apply(m, f1)?;
        let p2 = self.apply(m, f2)?;
        let grid = self.rho().collar().grid();
        let w: Vec<f64> = (0..f1.len())
            .map(|i| (f1[i] * p2[i] - f2[i] * p1[i]) * volume[i])
            .collect();
        Ok(grid.integrate(&w))
    }

    /// `A` and `B` with `A|_M = f` and `Δ̃(A + B ρ̄^m log|ρ|) = O(ρ̄^K)` in the scale `τ`.
    pub fn log_extension(&self, m: usize, f: &[f64], scale: &LogScale) -> Result<LogExtension> {
        self.check_order(m)?;
        let a0 = self.extend_harmonic(f, m)?.extension;
        solve_log_extension(&self.metric, scale, None, a0, m)
    }
}

/// Smooth part of `Δ̃(Y log|ρ|)` for `Y = B ρ̄^m`:
/// `−(2w_Y + n) B ρ̄^{m−1} + 4 g̃(dY, d log τ) − 2Y Δ̃ log τ`.
fn log_term_smooth(
    metric: &AmbientMetric,
    scale: &LogScale,
    b: &Field,
    m: usize,
) -> Result<(Field, Field)> {
    let rho = metric.rho();
    let y = b.mul(&rho.powi(m)?)?;
    let wy = y.weight();
    let dy = y.ambient_derivative()?;
    let mut smooth = b
        .mul(&rho.powi(m - 1)?)?
        .scale(-((2 * wy + N as i32) as f64));
    smooth = smooth.add(&metric.pair(&dy, scale.gradient())?.scale(4.0))?;
    smooth = smooth.sub(&y.mul(scale.laplacian())?.scale(2.0))?;
    let log_part = metric.laplacian(&y)?;
    Ok((smooth, log_part))
}

/// Solves `Δ̃(source + A + B ρ̄^m log|ρ|) = O(ρ̄^K)` order by order, where
/// `source_lap` is `Δ̃(source)` (if any) and `a0` is the starting `A`.
pub(crate) fn solve_log_extension(
    metric: &AmbientMetric,
    scale: &LogScale,
    source_lap: Option<&Field>,
    a0: Field,
    m: usize,
) -> Result<LogExtension> {
    let rho = metric.rho().clone();
    let collar = rho.collar().clone();
    let r1 = rho.coefficient(1)?;
    let wa = a0.weight();
    let wb = wa - 2 * m as i32;
    let smooth_total = |a: &Field, b: Option<&Field>| -> Result<Field> {
        let mut t = metric.laplacian(a)?;
        if let Some(s) = source_lap {
            t = t.add(s)?;
        }
        if let Some(b) = b {
            t = t.add(&log_term_smooth(metric, scale, b, m)?.0)?;
        }
        Ok(t)
    };
    let coefs =
        |f: &Field| -> Vec<f64> { (0..=f.order()).map(|j| f.jet().max_abs_coef(j)).collect() };
    let mut ref_smooth = vec![0.0; collar.storage() + 1];
    let mut ref_log = vec![0.0; collar.storage() + m + 1];
    let mut a = a0.into_complete();
    for k in 0..m - 1 {
        let t = smooth_total(&a, None)?;
        ref_smooth[k] = t.jet().max_abs_coef(k);
        a = kill_order(&a, &rho, &t.coefficient(k)?, k + 1)?;
    }
    let t = smooth_total(&a, None)?;
    let lead = t.coefficient(m - 1)?;
    ref_smooth[m - 1] = t.jet().max_abs_coef(m - 1);
    let b0: Vec<f64> = lead
        .iter()
        .zip(&r1)
        .map(|(c, r)| -c / (2.0 * m as f64 * r.powi(m as i32 - 1)))
        .collect();
    // B solves Δ̃B = O(ρ̄^K) on its own; every order is non-resonant
    let mut b = ray(&rho, &b0, wb)?;
    for k in 0..collar.storage() {
        let lap = metric.laplacian(&b)?;
        if k >= lap.order() {
            break;
        }
        ref_log[k + m] = lap.jet().max_abs_coef(k) * max_abs(&r1).powi(m as i32);
        b = kill_order(&b, &rho, &lap.coefficient(k)?, k + 1)?;
    }
    let mut k = m;
    loop {
        let t = smooth_total(&a, Some(&b))?;
        if k >= t.order() {
            break;
        }
        ref_smooth[k] = t.jet().max_abs_coef(k);
        a = kill_order(&a, &rho, &t.coefficient(k)?, k + 1)?;
        k += 1;
    }
    let t = smooth_total(&a, Some(&b))?;
    let (_, log_part) = log_term_smooth(metric, scale, &b, m)?;
    // the top stored coefficient of a truncated jet is not meaningful
    let mut smooth_residual = coefs(&t);
    smooth_residual.pop();
    let mut log_residual = coefs(&log_part);
    log_residual.pop();
    let tol = 1e-6;
    let ok = |res: &[f64], refs: &[f64], j: usize| {
        res.get(j).is_some_and(|r| *r <= tol * refs[j].max(1.0))
    };
    let mut attained_order = 0;
    while ok(&smooth_residual, &ref_smooth, attained_order)
        && ok(&log_residual, &ref_log, attained_order)
    {
        attained_order += 1;
    }
    Ok(LogExtension {
        a,
        b,
        smooth_residual,
        log_residual,
        attained_order,
    })
}

/// `P₁f = Δ_h f + ((n−2)/(4(n−1)))(scal_h − |A|²) f`.
pub fn p1_closed_form(bg: &BoundaryGeometry, f: &[f64]) -> Vec<f64> {
    let n = bg.n as f64;
    let mc = bg.calculus();
    let lap = mc.laplacian(f);
    if bg.n == 2 {
        return lap;
    }
    let scal = mc.trace(&mc.ricci());
    let a2 = mc.norm2_3(&bg.a);
    let c = (n - 2.0) / (4.0 * (n - 1.0));
    (0..f.len())
        .map(|i| lap[i] + c * (scal[i] - a2[i]) * f[i])
        .collect()
}

/// Eigenvalue of `P_{n/2+2}` on degree-`k` spherical harmonics of the round sphere,
/// `Π_{j=1}^{n/2+2} (k(k+n−1) + (n/2+j−1)(n/2−j))`.
pub fn round_p_top_eigenvalue(n: usize, k: usize) -> f64 {
    let lam = (k * (k + n - 1)) as f64;
    let h = (n / 2) as f64;
    (1..=n / 2 + 2)
        .map(|j| lam + (h + j as f64 - 1.0) * (h - j as f64))
        .product()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    max_abs(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        assert_eq!(harmonic_constant(1), 1.0);
        assert_eq!(harmonic_constant(3), 16.0);
        assert_eq!(log_constant(1), -2.0);
        assert_eq!(log_constant(3), -96.0);
        assert_eq!(round_p_top_eigenvalue(2, 3), 720.0);
        assert_eq!(round_p_top_eigenvalue(2, 2), 0.0);
    }
}
