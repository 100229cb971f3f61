use pt_spectra::closed_forms::{
    classical_lambda_pm, classical_normal_frequencies, eig_detuned, eig_gain_coupling, quantum_levels_linear_lambda,
    quantum_levels_r1s1, threshold_detuned, threshold_gain_coupling, OscillatorPair, TwoLevelDetuned,
    TwoLevelGainCoupling,
};
use pt_spectra::hamiltonians::{build_h2, ModelH2};
use pt_spectra::linalg::{eigenvalues, multiset_distance};
use pt_spectra::{Complex64, DenseMatrix};
use rustfft::FftPlanner;

#[test]
fn two_level_reality_boundary() {
    for (e1, e2) in [(0.0, 2.0), (-1.0, 3.0), (0.5, 0.7)] {
        let thr = threshold_gain_coupling(&TwoLevelGainCoupling::new(e1, e2, 0.0).unwrap());
        let (hi, lo) = eig_gain_coupling(&TwoLevelGainCoupling::new(e1, e2, thr).unwrap());
        assert!((hi - lo).norm() <= 1e-14, "{e1},{e2}: {hi} {lo}");
        let below = eig_gain_coupling(&TwoLevelGainCoupling::new(e1, e2, 0.999 * thr).unwrap());
        assert!(below.0.im == 0.0 && below.1.im == 0.0);
        let above = eig_gain_coupling(&TwoLevelGainCoupling::new(e1, e2, 1.001 * thr).unwrap());
        assert!(above.0.im != 0.0 && (above.0 - above.1.conj()).norm() <= 1e-14);
    }
    let m = TwoLevelDetuned::new(0.3, 1.2, 1.2).unwrap();
    let (a, b) = eig_detuned(&m);
    assert_eq!(threshold_detuned(&m), 1.2);
    assert!((a - b).norm() <= 1e-14);
}

#[test]
fn closed_forms_agree_with_the_eigensolver() {
    for eps in [0.0, 0.4, 0.99, 1.0, 1.7, -2.5] {
        let m = TwoLevelGainCoupling::new(0.0, 2.0, eps).unwrap();
        let (hi, lo) = eig_gain_coupling(&m);
        let s = eigenvalues(&m.matrix()).unwrap().eigenvalues;
        assert!(multiset_distance(&s, &[hi, lo]) <= 1e-7, "eps={eps}");
        let d = TwoLevelDetuned::new(1.0, 0.5, eps).unwrap();
        let (a, b) = eig_detuned(&d);
        let s = eigenvalues(&d.matrix()).unwrap().eigenvalues;
        assert!(multiset_distance(&s, &[a, b]) <= 1e-7, "eps={eps}");
    }
}

#[test]
fn lambda_pm_sum_and_product_rules() {
    for (w1, w2, eps) in [(1.0, 2.0, 0.5), (1.0, 2.0, 5.0), (0.7, 1.3, 0.1), (2.0, 2.0, 1.0)] {
        let p = OscillatorPair::new(w1, w2, eps).unwrap();
        let (lp, lm) = classical_lambda_pm(&p);
        let sum = 2.0 * (w1 * w1 + w2 * w2);
        let prod = 4.0 * w1 * w1 * w2 * w2 + eps * eps;
        assert!((lp + lm - sum).norm() <= 1e-12 * sum);
        assert!((lp * lm - prod).norm() <= 1e-12 * prod);
        let s = eigenvalues(&p.classical_matrix()).unwrap().eigenvalues;
        assert!(multiset_distance(&s, &[lp, lm]) <= 1e-7 * sum);
    }
}

/// `x'' = -2 M x` by classical RK4, sampling `x1 + x2` so both modes show up
/// even when they decouple.
fn integrate(m: &DenseMatrix, dt: f64, steps: usize) -> Vec<Complex64> {
    let a = m.scale(Complex64::new(-2.0, 0.0));
    let accel = |x: &[Complex64]| a.matvec(x);
    let add = |x: &[Complex64], k: &[Complex64], h: f64| -> Vec<Complex64> {
        x.iter().zip(k).map(|(u, v)| u + v * h).collect()
    };
    let mut x = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
    let mut v = vec![Complex64::new(0.0, 0.0); 2];
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(x[0] + x[1]);
        let (k1x, k1v) = (v.clone(), accel(&x));
        let (k2x, k2v) = (add(&v, &k1v, dt / 2.0), accel(&add(&x, &k1x, dt / 2.0)));
        let (k3x, k3v) = (add(&v, &k2v, dt / 2.0), accel(&add(&x, &k2x, dt / 2.0)));
        let (k4x, k4v) = (add(&v, &k3v, dt), accel(&add(&x, &k3x, dt)));
        for i in 0..2 {
            x[i] += (k1x[i] + k2x[i] * 2.0 + k3x[i] * 2.0 + k4x[i]) * (dt / 6.0);
            v[i] += (k1v[i] + k2v[i] * 2.0 + k3v[i] * 2.0 + k4v[i]) * (dt / 6.0);
        }
    }
    out
}

/// The two strongest positive angular frequencies of a Hann-windowed signal,
/// located by parabolic interpolation of the log magnitude.
fn two_peaks(signal: &[Complex64], dt: f64) -> [f64; 2] {
    let n = signal.len();
    let mut buf: Vec<Complex64> = signal
        .iter()
        .enumerate()
        .map(|(k, &z)| z * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // the cosine modes put equal weight at +-omega; fold onto the positive side
    let mag: Vec<f64> = (0..n / 2).map(|k| buf[k].norm() + buf[(n - k) % n].norm()).collect();
    let mut peaks: Vec<(f64, usize)> = (1..mag.len() - 1)
        .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])
        .map(|k| (mag[k], k))
        .collect();
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = [0.0; 2];
    for (slot, &(_, k)) in out.iter_mut().zip(&peaks[..2]) {
        let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
        let offset = 0.5 * (a - c) / (a - 2.0 * b + c);
        *slot = 2.0 * std::f64::consts::PI * (k as f64 + offset) / (n as f64 * dt);
    }
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn normal_frequencies_match_integrated_motion() {
    let dt = 0.02;
    for eps in [0.0, 1.5, 2.5] {
        let p = OscillatorPair::new(1.0, 2.0, eps).unwrap();
        let (wp, wm) = classical_normal_frequencies(&p);
        assert!(wp.im == 0.0 && wm.im == 0.0);
        let measured = two_peaks(&integrate(&p.classical_matrix(), dt, 1 << 16), dt);
        for (got, want) in measured.iter().zip([wm.re, wp.re]) {
            assert!((got - want).abs() <= 1e-3, "eps={eps}: {got} vs {want}");
        }
    }
}

#[test]
fn motion_grows_past_the_classical_threshold() {
    let p = OscillatorPair::new(1.0, 2.0, 4.0).unwrap();
    let (wp, _) = classical_normal_frequencies(&p);
    assert!(wp.im != 0.0);
    let x = integrate(&p.classical_matrix(), 0.01, 2000);
    assert!(x[1999].norm() > 1e3 * x[0].norm());
}

fn h2_r1s1_ground(eps: f64, n: usize) -> Complex64 {
    let m = ModelH2::new(1.0, 2.0, 1, 1).unwrap();
    let h = build_h2(&m, eps, n, n).unwrap();
    eigenvalues(&h.spectral_matrix()).unwrap().sorted()[0]
}

#[test]
fn sqrt_levels_match_diagonalisation_and_linear_ones_do_not() {
    for eps in [0.0, 0.5, 1.0] {
        let p = OscillatorPair::new(1.0, 2.0, eps).unwrap();
        let numeric = h2_r1s1_ground(eps, 24);
        let sqrt_form = quantum_levels_r1s1(&p, 0, 0);
        let linear = quantum_levels_linear_lambda(&p, 0, 0);
        assert!((numeric - sqrt_form).norm() <= 1e-6, "eps={eps}: {numeric} vs {sqrt_form}");
        assert!((numeric - linear).norm() >= 1.0, "eps={eps}: {numeric} vs {linear}");
    }
}
