"""Exercise the Python bindings end to end. Run after `pip install --no-build-isolation crates/py`."""

import pt_spectra_py as pts


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    levels = pts.h3_spectrum(0.0, 32)
    assert all(close(z, 2 * k + 1, 1e-10) for k, z in enumerate(levels[:5])), levels[:5]

    for eps in (0.5, 1.5):
        hi, lo = pts.gain_eigenvalues(0.0, 2.0, eps)
        num = pts.eigenvalues([[0, 1j * eps], [1j * eps, 2]])
        assert min(abs(num[0] - lo), abs(num[0] - hi)) <= 1e-7, (num, hi, lo)

    lp, lm = pts.classical_lambda_pm(1.0, 2.0, 0.5)
    assert close(lp + lm, 10.0, 1e-12) and close(lp * lm, 16.25, 1e-12)

    ground = pts.h2_spectrum(0.5, 24, 24, omega1=1.0, omega2=2.0, r=1, s=1)[0]
    assert close(ground, pts.quantum_level(1.0, 2.0, 0.5, 0, 0), 1e-6), ground

    rows = pts.scan_h3([0.0, 0.1, 0.2], n=64, levels=3)
    assert len(rows) == 9 and all(real for *_, real in rows)

    coeffs, radius = pts.rspe_two_level(0.0, 2.0, level=0, order=40)
    assert close(coeffs[2], 0.5, 1e-12) and abs(radius - 1.0) < 0.05, radius
    (plus, rp), _ = pts.rspe_lambda_pm(1.0, 2.0, order=40)
    assert close(plus[0], 8.0, 1e-12) and abs(rp - 3.0) < 0.15, rp

    assert close(pts.gain_threshold(0.0, 2.0, 0.5, 1.5), 1.0, 1e-8)

    try:
        pts.h3_spectrum(1.5, 16)
    except ValueError as e:
        assert "eps" in str(e)
    else:
        raise AssertionError("out-of-range eps accepted")
    assert issubclass(pts.NumericalError, RuntimeError)

    print("smoke test passed")


if __name__ == "__main__":
    main()
