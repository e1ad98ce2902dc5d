use std::time::Instant;

use latwalk::norms::{uniform_multiplier_sweep, wave_growth_fit};
use latwalk::{GridSpec, MultiplierFunction};

fn wave_ladder() -> Vec<f64> {
    (0..=6).map(|i| 2f64.powi(i)).collect()
}

#[test]
fn wave_growth_on_line_and_plane() {
    let start = Instant::now();
    for (n, m) in [(1, 8192), (2, 512)] {
        let g = wave_growth_fit(GridSpec::new(n, m).unwrap(), &wave_ladder()).unwrap();
        assert!(g.truncated.is_empty(), "n={n}: {:?}", g.truncated);
        assert!(g.fit.exponent <= n as f64 / 2.0 + 0.2, "n={n}: {}", g.fit.exponent);
        assert!(g.fit.passed());
    }
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn wave_growth_is_grid_stable() {
    let ts = wave_ladder();
    let coarse = wave_growth_fit(GridSpec::new(1, 4096).unwrap(), &ts).unwrap();
    let fine = wave_growth_fit(GridSpec::new(1, 8192).unwrap(), &ts).unwrap();
    assert!((coarse.fit.exponent - fine.fit.exponent).abs() <= 0.03);
    for (a, b) in coarse.rows.iter().zip(&fine.rows) {
        assert!((a.upper - b.upper).abs() <= 1e-6 * b.upper);
    }
}

#[test]
fn uniform_multiplier_sweeps() {
    let ts: Vec<f64> = (0..=12).map(|i| 10f64.powf(i as f64 / 4.0)).collect();
    for f in [MultiplierFunction::bump(0.1, 0.9), MultiplierFunction::bump_steep(0.1, 0.9, 32.0)] {
        let sweep = uniform_multiplier_sweep(&f, GridSpec::new(1, 256).unwrap(), &ts, 1 << 22).unwrap();
        assert!(sweep.truncated.is_empty(), "{:?}", sweep.truncated);
        assert_eq!(sweep.rows.len(), ts.len());
        assert!(sweep.pass, "{:?} {}", sweep.fit, sweep.max_over_median);
    }
}

#[test]
fn uniform_sweep_on_the_plane_within_budget() {
    let ts: Vec<f64> = (0..=6).map(|i| 10f64.powf(i as f64 / 4.0)).collect();
    let f = MultiplierFunction::bump_steep(0.05, 0.45, 32.0);
    let sweep = uniform_multiplier_sweep(&f, GridSpec::new(2, 256).unwrap(), &ts, 1 << 24).unwrap();
    assert!(sweep.truncated.is_empty(), "{:?}", sweep.truncated);
    assert!(sweep.pass && sweep.max_over_median < 1.1, "{:?} {}", sweep.fit, sweep.max_over_median);

    let over = uniform_multiplier_sweep(&f, GridSpec::new(2, 256).unwrap(), &[1.0, 1000.0], 1 << 20).unwrap();
    assert_eq!(over.truncated, vec![1000.0]);
    assert!(!over.pass);
}
