use nalgebra::Matrix4;

use codazzi::ma_solver::{solve_fefferman, strictify, StrictDensity};
use codazzi::variation::{density_velocity_residual, DeformationFlow, Generator};
use codazzi::{GridConfig, Harmonic, SurfaceSpec};

fn ball_strict(lmax: usize) -> StrictDensity {
    strictify(
        &solve_fefferman(&SurfaceSpec::ball(2).with_grid(GridConfig::new(lmax, 6)), 2).unwrap(),
    )
    .unwrap()
}

/// Radius along `u` of the zero set of `(1, x)ᵀ M (1, x)`.
fn quadric_radius(m: &Matrix4<f64>, u: [f64; 3]) -> f64 {
    let v = nalgebra::Vector4::new(0.0, u[0], u[1], u[2]);
    let e0 = nalgebra::Vector4::new(1.0, 0.0, 0.0, 0.0);
    let (a, b, c) = (
        (v.transpose() * m * v)[0],
        (e0.transpose() * m * v)[0],
        m[(0, 0)],
    );
    (-b + (b * b - a * c).sqrt()) / a
}

#[test]
fn quadratic_generator_moves_ball_through_ellipsoids() {
    let base = ball_strict(20);
    let mut a = vec![vec![0.0; 4]; 4];
    a[0][0] = 0.3;
    a[1][1] = 1.0;
    a[2][2] = -1.0;
    a[3][3] = 0.3;
    a[0][2] = 0.1;
    a[2][0] = 0.1;
    let flow = DeformationFlow::new(&base, &Generator::Quadratic { matrix: a.clone() }).unwrap();
    let ball = Matrix4::from_diagonal(&nalgebra::Vector4::new(-1.0, 1.0, 1.0, 1.0));
    let am = Matrix4::from_fn(|i, j| a[i][j]);
    let b = ball.try_inverse().unwrap() * am * 2.0;
    for t in [0.05, -0.08] {
        let e = (b * -t).exp();
        let image = e.transpose() * ball * e;
        let fb = flow.flow_boundary(t);
        let err = flow
            .collar()
            .directions()
            .iter()
            .zip(&fb.log_radius)
            .map(|(u, l)| (quadric_radius(&image, *u).ln() - l).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "t = {t}: {err}");
    }
}

#[test]
fn lagrangian_points_lie_on_eulerian_boundary() {
    let base = ball_strict(12);
    let flow = DeformationFlow::new(&base, &Generator::harmonic(3, 1, 0.02)).unwrap();
    let fb = flow.flow_boundary(0.05);
    let grid = flow.collar().grid();
    let err = flow
        .flow_points(0.05)
        .iter()
        .map(|(x, _)| {
            let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            (r.ln() - grid.evaluate_at(&fb.coeffs, *x)).abs()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn flow_reverses() {
    let base = ball_strict(12);
    let flow = DeformationFlow::new(&base, &Generator::harmonic(3, 1, 0.02)).unwrap();
    let there = flow.flow_boundary(0.04).log_radius;
    let back = flow.flow_boundary(-0.04).log_radius;
    let odd = there
        .iter()
        .zip(&back)
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max);
    let size = there.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(size > 1e-4);
    assert!(odd < 1e-2 * size, "{odd} vs {size}");
}

#[test]
fn zero_generator_is_identity() {
    let base = ball_strict(10);
    let flow = DeformationFlow::new(&base, &Generator::harmonic(2, 0, 0.0)).unwrap();
    let fb = flow.flow_boundary(0.1);
    assert!(fb.log_radius.iter().all(|v| v.abs() < 1e-14));
    assert!(flow
        .flow_points(0.1)
        .iter()
        .all(|(_, l)| (l - 1.0).abs() < 1e-14));
}

#[test]
fn flow_is_linear_in_generator_at_first_order() {
    let base = ball_strict(10);
    let h = 1e-3;
    let rate = |g: Generator| {
        let f = DeformationFlow::new(&base, &g).unwrap();
        let p = f.flow_boundary(h).log_radius;
        let m = f.flow_boundary(-h).log_radius;
        p.iter()
            .zip(&m)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect::<Vec<_>>()
    };
    let a = rate(Generator::harmonic(3, 0, 0.01));
    let b = rate(Generator::harmonic(4, -2, 0.01));
    let ab = rate(Generator::Harmonics {
        harmonics: vec![
            Harmonic {
                l: 3,
                m: 0,
                coeff: 0.01,
            },
            Harmonic {
                l: 4,
                m: -2,
                coeff: 0.01,
            },
        ],
    });
    let err = a
        .iter()
        .zip(&b)
        .zip(&ab)
        .map(|((x, y), z)| (x + y - z).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-7, "{err}");
}

#[test]
fn lagrangian_and_eulerian_transport_agree() {
    let base = ball_strict(12);
    let flow = DeformationFlow::new(&base, &Generator::harmonic(4, 1, 0.02)).unwrap();
    assert!(density_velocity_residual(&flow, 0.02).unwrap() < 1e-6);
}

#[test]
fn generator_json() {
    let g = Generator::from_json_str(
        r#"{"kind":"harmonics","harmonics":[{"l":3,"m":-1,"coeff":0.5}]}"#,
    )
    .unwrap();
    assert_eq!(g, Generator::harmonic(3, -1, 0.5));
    assert!(Generator::from_json_str(
        r#"{"kind":"harmonics","harmonics":[{"l":1,"m":2,"coeff":0.5}]}"#
    )
    .is_err());
    assert!(Generator::from_json_str(r#"{"kind":"quadratic","matrix":[[1.0]]}"#).is_err());
}
