//! Backgrounds against a direct Fourier mode sum of the mollified Green's
//! function, evaluated pointwise without any FFT.

use std::f64::consts::PI;

use vortex_core::{background, default_sigma, PointSource, TorusGeometry};

/// `w(x) = -(4π/|S|) Σ_{k≠0} m e^{-σ²|k|²/2} cos(k·(x - z)) / |k|²`, summed
/// until the Gaussian factor drops below 1e-20.
fn green_sum(l1: f64, l2: f64, sigma: f64, src: [f64; 2], m: f64, x: [f64; 2]) -> f64 {
    let kmax = (2.0 * 46.0f64).sqrt() / sigma;
    let m1 = (kmax * l1 / (2.0 * PI)).ceil() as i64;
    let m2 = (kmax * l2 / (2.0 * PI)).ceil() as i64;
    let (dx, dy) = (x[0] - src[0], x[1] - src[1]);
    let mut sum = 0.0;
    for a in -m1..=m1 {
        let k1 = 2.0 * PI * a as f64 / l1;
        for b in -m2..=m2 {
            if a == 0 && b == 0 {
                continue;
            }
            let k2 = 2.0 * PI * b as f64 / l2;
            let ksq = k1 * k1 + k2 * k2;
            sum += (-0.5 * sigma * sigma * ksq).exp() * (k1 * dx + k2 * dy).cos() / ksq;
        }
    }
    -4.0 * PI * m / (l1 * l2) * sum
}

#[test]
fn antipode_matches_mode_sum() {
    let g = TorusGeometry::square(6.0, 128).unwrap();
    let sigma = default_sigma(&g, 2.0);
    let z = g.node(40, 40);
    let w = background(&g, &[PointSource::unit(z[0], z[1])], sigma).unwrap();
    let anti = [z[0] + 3.0, z[1] + 3.0];
    let node = w.get(40 + 64, 40 + 64);
    let oracle = green_sum(6.0, 6.0, sigma, z, 1.0, anti);
    assert!((node - oracle).abs() < 1e-6, "{node} vs {oracle}");
}

#[test]
fn rectangular_torus_off_node_points() {
    let g = TorusGeometry::new(5.0, 7.0, 64, 96).unwrap();
    let sigma = default_sigma(&g, 2.0);
    let src = [1.23, 4.56];
    let w = background(&g, &[PointSource::new(src[0], src[1], 2)], sigma).unwrap();
    for p in [[0.0, 0.0], [3.7, 1.1], [4.9, 6.5]] {
        let oracle = green_sum(5.0, 7.0, sigma, src, 2.0, p);
        let got = w.interpolate(p);
        assert!((got - oracle).abs() < 1e-6, "{p:?}: {got} vs {oracle}");
    }
}
