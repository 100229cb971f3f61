use pt_spectra::hamiltonians::{ModelH2, ModelH3};
use pt_spectra::closed_forms::{quantum_levels_r1s1, OscillatorPair};
use pt_spectra::scan::{
    certify_reality, scan, truncation_convergence, uniform_grid, GainCouplingFamily, Label, ScanConfig, Truncation,
};
use pt_spectra::{Complex64, Error};

#[test]
fn h3_at_zero_is_the_harmonic_oscillator() {
    let cfg = ScanConfig::new(vec![0.0], Truncation::Single(64), 5);
    let out = scan(&ModelH3::default(), &cfg).unwrap();
    for (k, t) in out.trajectories.iter().enumerate() {
        assert_eq!(t.label, Label::Level(k));
        let z = t.points[0].value;
        assert!((z - Complex64::new((2 * k + 1) as f64, 0.0)).norm() <= 1e-10, "{k}: {z}");
    }
}

#[test]
fn h3_low_levels_stay_real_for_positive_eps() {
    let cfg = ScanConfig::new(uniform_grid(0.0, 0.5, 0.1).unwrap(), Truncation::Single(96), 3);
    let out = scan(&ModelH3::default(), &cfg).unwrap();
    assert_eq!(out.trajectories.len(), 3);
    for t in &out.trajectories {
        assert!(t.points.iter().all(|p| p.real), "{}", t.label);
        // levels rise with eps on this side
        assert!(t.points.windows(2).all(|w| w[1].value.re > w[0].value.re));
    }
    for s in &out.samples {
        assert!(s.conjugation_defect <= 1e-9 * s.matrix_norm, "{s:?}");
    }
}

#[test]
fn reversed_grid_gives_the_same_trajectories() {
    let grid = uniform_grid(-0.3, 0.3, 0.1).unwrap();
    let mut rev = grid.clone();
    rev.reverse();
    let model = ModelH3::default();
    let a = scan(&model, &ScanConfig::new(grid, Truncation::Single(48), 4)).unwrap();
    let b = scan(&model, &ScanConfig::new(rev, Truncation::Single(48), 4)).unwrap();
    for (ta, tb) in a.trajectories.iter().zip(&b.trajectories) {
        assert_eq!(ta.label, tb.label);
        for p in &ta.points {
            assert_eq!(tb.value_at(p.eps), Some(p.value), "{} at {}", ta.label, p.eps);
        }
    }
}

#[test]
fn gain_reality_certificates() {
    let model = GainCouplingFamily { e1: 0.0, e2: 2.0 };
    let mut cfg = ScanConfig::new(vec![], Truncation::Fixed, 2);
    cfg.match_tol = 10.0;
    let real = certify_reality(&model, Label::Level(0), 0.5, &cfg).unwrap();
    assert!(real.real && real.certified);
    assert!((real.value.re - (1.0 - 0.75f64.sqrt())).abs() <= 1e-12);
    let broken = certify_reality(&model, Label::Level(1), 1.5, &cfg).unwrap();
    assert!(!broken.real && !broken.certified);
    assert!((broken.value.im.abs() - 1.25f64.sqrt()).abs() <= 1e-12);
}

#[test]
fn tiny_truncation_is_not_certified() {
    let cfg = ScanConfig::new(vec![], Truncation::Single(4), 2);
    match certify_reality(&ModelH3::default(), Label::Level(1), 0.5, &cfg) {
        Err(Error::TruncationNotConverged { shift, tol, .. }) => assert!(shift > tol),
        other => panic!("expected a convergence failure, got {other:?}"),
    }
}

#[test]
fn convergence_tables() {
    let cfg = ScanConfig::new(vec![], Truncation::Single(8), 3);
    let model = ModelH3::default();
    let sizes = [8, 16, 32].map(Truncation::Single);
    let t = truncation_convergence(&model, 0.0, &sizes, 3, &cfg).unwrap();
    assert!(t.rows.iter().all(|r| r.differences.iter().all(|&d| d <= 1e-12)));

    let sizes = [64, 128, 256].map(Truncation::Single);
    let t = truncation_convergence(&model, 0.3, &sizes, 3, &cfg).unwrap();
    assert!(t.rows.iter().all(|r| r.monotone), "{t:?}");

    let h2 = ModelH2::new(1.0, 2.0, 1, 1).unwrap();
    let cfg = ScanConfig::new(vec![], Truncation::Product(16, 16), 1);
    let sizes = [(16, 16), (24, 24), (32, 32)].map(|(a, b)| Truncation::Product(a, b));
    let t = truncation_convergence(&h2, 0.5, &sizes, 1, &cfg).unwrap();
    let last = *t.rows[0].values.last().unwrap();
    let want = quantum_levels_r1s1(&OscillatorPair::new(1.0, 2.0, 0.5).unwrap(), 0, 0);
    assert!((last - want).norm() <= 1e-8, "{last} vs {want}");
}

#[test]
fn h3_ground_state_is_real_and_stable_for_negative_eps() {
    let model = ModelH3::default();
    let mut cfg = ScanConfig::new(vec![], Truncation::Single(128), 1);
    cfg.refined_truncation = Some(Truncation::Single(256));
    cfg.doubling_tol = 1e-6;
    let cert = certify_reality(&model, Label::Level(0), -0.2, &cfg).unwrap();
    assert!(cert.certified, "{cert:?}");
    assert!(cert.shift <= 1e-6);
}
