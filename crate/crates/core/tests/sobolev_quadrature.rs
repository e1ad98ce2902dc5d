use latwalk::calculus::sobolev_w;
use latwalk::Multiplier;

/// Bessel potential of `e^{-2x^2}` by direct cosine quadrature of its transform
/// `sqrt(pi/2) e^{-xi^2/8}` against `(1 + xi^2)^{1/2}`.
fn bessel_potential(x: f64) -> f64 {
    let (cut, steps) = (40.0, 8_000);
    let h = cut / steps as f64;
    let mut acc = 0.0;
    for j in 0..=steps {
        let xi = j as f64 * h;
        let w = if j == 0 || j == steps { 0.5 } else { 1.0 };
        acc += w * (1.0 + xi * xi).sqrt() * (std::f64::consts::PI / 2.0).sqrt() * (-xi * xi / 8.0).exp() * (xi * x).cos();
    }
    acc * h / std::f64::consts::PI
}

#[test]
fn dilated_gaussian_w14_matches_quadrature() {
    let f = Multiplier::gaussian(1.0).dilate(2.0);
    let got = sobolev_w(&f, 1.0, 4.0).unwrap();
    // the potential decays like the Gaussian up to a polynomial factor; |x| <= 8 suffices
    let (half, steps) = (8.0, 2000);
    let h = 2.0 * half / steps as f64;
    let sum: f64 = (0..steps).map(|j| bessel_potential(-half + j as f64 * h).powi(4)).sum();
    let oracle = (sum * h).powf(0.25);
    assert!((got.value - oracle).abs() < 1e-5, "{} vs {oracle}", got.value);
    assert!(!got.aliased);
}
